"""Smoke test for the mcm_reid extension module.

Build and run from the repository root:

    cargo build --release -p mcm-py
    cp target/release/libmcm_reid.so python/mcm_reid.so
    python3 python/smoke_test.py
"""

import math
import os
import sys
import tempfile

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import mcm_reid  # noqa: E402


def check(cond, msg):
    if not cond:
        raise AssertionError(msg)
    print("ok  ", msg)


def main():
    h, s, v = mcm_reid.rgb_to_hsv(255, 0, 0)
    check((h, s, v) == (0.0, 1.0, 1.0), "pure red converts to (0, 1, 1)")

    uniform = [1.0 / 72] * 24 + [1.0 / 36] * 12 + [1.0 / 12] * 4
    check(mcm_reid.bhattacharyya(uniform, uniform) == 0.0, "b(h, h) = 0")
    peaked = [0.0] * 40
    peaked[0], peaked[24], peaked[36] = 1 / 3, 1 / 3, 1 / 3
    b = mcm_reid.bhattacharyya(uniform, peaked)
    oracle = math.sqrt(1 - sum(math.sqrt(p * q) for p, q in zip(uniform, peaked)))
    check(abs(b - oracle) < 1e-12, "Bhattacharyya matches direct summation")

    with tempfile.TemporaryDirectory() as tmp:
        manifest = mcm_reid.generate_synthetic_dataset(
            os.path.join(tmp, "data"), 4, seed=3, probe_coefficient=0.8
        )
        data = os.path.dirname(manifest)

        def paths(i, cam):
            stem = os.path.join(data, f"p{i:04}_{cam}")
            return stem + ".png", stem + "_mask.png"

        gallery = [
            mcm_reid.extract_descriptor(*paths(i, "cam_a"), f"p{i:04}", template=True, seed=i)
            for i in range(4)
        ]
        probe = mcm_reid.extract_descriptor(*paths(2, "cam_b"), "p0002", seed=9)
        check(gallery[0].part_sizes == [400, 400], "template holds P x S patches per part")
        check(probe.part_sizes == [80, 80], "probe holds P patches per part")
        check(probe.provenance == "probe", "provenance recorded")

        ranked = mcm_reid.rank_gallery(probe, gallery)
        distances = [d for _, d in ranked]
        check(distances == sorted(distances), "ranking ascends by distance")
        check(len(ranked) == 4, "every template ranked")

        d = mcm_reid.sequence_distance(gallery[2], probe)
        check(abs(d - dict(ranked)["p0002"]) < 1e-15, "sequence distance agrees with ranking")
        check(mcm_reid.sequence_distance(probe, probe) == 0.0, "self distance is 0")
        check(mcm_reid.part_distance(probe, probe, 1) == 0.0, "part self distance is 0")

        for ext in ("json", "bin"):
            path = os.path.join(tmp, f"probe.{ext}")
            probe.save(path, '{"note": "smoke"}')
            again = mcm_reid.PersonDescriptor.load(path)
            check(again.patches(0) == probe.patches(0), f"{ext} round trip is exact")

        result = mcm_reid.evaluate(manifest, trials=2, patches=20)
        cmc = result["cmc"]
        check(len(cmc) == 4 and cmc[-1] == 1.0, "CMC ends at 1")
        check(all(a <= b for a, b in zip(cmc, cmc[1:])), "CMC is monotone")
        check(result["timing"]["match_ms"] > 0, "timing reported")

        try:
            mcm_reid.extract_descriptor(paths(0, "cam_a")[0], os.path.join(tmp, "nope.png"), "x")
        except OSError as e:
            check("nope.png" in str(e), "missing mask raises OSError naming the path")
        else:
            raise AssertionError("missing mask did not raise")

        try:
            mcm_reid.sequence_distance(probe, probe, k=0)
        except ValueError:
            check(True, "invalid k raises ValueError")
        else:
            raise AssertionError("k = 0 did not raise")

    print("all smoke checks passed")


if __name__ == "__main__":
    main()
