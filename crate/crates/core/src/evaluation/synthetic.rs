use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::descriptor::derive_seed;
use crate::error::{McmError, Result};
use crate::imaging::{apply_brightness_contrast, BlobMask, ImageRaster};

use super::{DatasetManifest, ManifestEntry};

pub const SYNTHETIC_WIDTH: usize = 48;
pub const SYNTHETIC_HEIGHT: usize = 128;

const NOISE: i32 = 6;

fn hsv_color(h: f64, s: f64, v: f64) -> [u8; 3] {
    let c = v * s;
    let hp = (h / 60.0).rem_euclid(6.0);
    let x = c * (1.0 - (hp.rem_euclid(2.0) - 1.0).abs());
    let (r, g, b) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    let to_u8 = |f: f64| ((f + m) * 255.0).round().clamp(0.0, 255.0) as u8;
    [to_u8(r), to_u8(g), to_u8(b)]
}

fn random_color(rng: &mut ChaCha8Rng) -> [u8; 3] {
    hsv_color(
        rng.random_range(0.0..360.0),
        rng.random_range(0.35..1.0),
        rng.random_range(0.35..0.9),
    )
}

fn jitter(rng: &mut ChaCha8Rng, c: [u8; 3]) -> [u8; 3] {
    let n = rng.random_range(-NOISE..=NOISE);
    c.map(|v| (v as i32 + n).clamp(0, 255) as u8)
}

/// Seeded 48x128 person: head, torso with a logo block of a second colour,
/// legs. Every pixel carries a small brightness jitter. The mask covers the
/// whole image.
pub fn synthetic_person(seed: u64) -> (ImageRaster, BlobMask) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (SYNTHETIC_WIDTH, SYNTHETIC_HEIGHT);
    let head = hsv_color(
        rng.random_range(15.0..35.0),
        rng.random_range(0.3..0.6),
        rng.random_range(0.5..0.85),
    );
    let torso = random_color(&mut rng);
    let logo = random_color(&mut rng);
    let legs = random_color(&mut rng);

    let head_end = h * 3 / 20;
    let torso_end = h * 11 / 20;
    let torso_h = torso_end - head_end;
    let logo_w = rng.random_range(w / 4..=w / 2);
    let logo_h = rng.random_range(torso_h / 5..=torso_h / 2);
    let logo_x = rng.random_range(0..=w - logo_w);
    let logo_y = head_end + rng.random_range(0..=torso_h - logo_h);

    let mut pixels = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let base = if y < head_end {
                head
            } else if y < torso_end {
                let in_logo = (logo_x..logo_x + logo_w).contains(&x)
                    && (logo_y..logo_y + logo_h).contains(&y);
                if in_logo {
                    logo
                } else {
                    torso
                }
            } else {
                legs
            };
            pixels.push(jitter(&mut rng, base));
        }
    }
    (
        ImageRaster::new(w, h, pixels).expect("fixed dimensions"),
        BlobMask::full(w, h).expect("fixed dimensions"),
    )
}

/// Writes `num_persons` gallery/probe image pairs plus masks and a
/// `manifest.jsonl` into `dir`. Probe images are the gallery images
/// multiplied by `probe_coefficient`. Returns the manifest with paths
/// resolved against `dir`.
pub fn generate_synthetic_dataset(
    dir: &Path,
    num_persons: usize,
    seed: u64,
    probe_coefficient: f64,
) -> Result<DatasetManifest> {
    if num_persons < 2 {
        return Err(McmError::InvalidArgument(
            "a synthetic dataset needs at least 2 persons".into(),
        ));
    }
    std::fs::create_dir_all(dir).map_err(|e| McmError::io(dir, e))?;
    let mut relative = DatasetManifest::default();
    for i in 0..num_persons {
        let id = format!("p{i:04}");
        let (gallery, mask) = synthetic_person(derive_seed(seed, &format!("person/{i}")));
        let probe = apply_brightness_contrast(&gallery, &mask, probe_coefficient)?;
        for (cam, img) in [("cam_a", &gallery), ("cam_b", &probe)] {
            let image = format!("{id}_{cam}.png");
            let mask_name = format!("{id}_{cam}_mask.png");
            img.save_png(&dir.join(&image))?;
            mask.save_png(&dir.join(&mask_name))?;
            relative.entries.push(ManifestEntry {
                person_id: id.clone(),
                camera_id: cam.into(),
                image: image.into(),
                mask: mask_name.into(),
            });
        }
    }
    let manifest_path = dir.join("manifest.jsonl");
    relative.save(&manifest_path)?;
    DatasetManifest::load(&manifest_path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::load_image;

    #[test]
    fn identity_probes_equal_gallery() {
        let dir = tempfile::tempdir().unwrap();
        let m = generate_synthetic_dataset(dir.path(), 3, 11, 1.0).unwrap();
        for (g, p) in m.single_shot_pairs().unwrap() {
            assert_eq!(load_image(&g.image).unwrap(), load_image(&p.image).unwrap());
        }
    }

    #[test]
    fn probes_are_scaled() {
        let dir = tempfile::tempdir().unwrap();
        let m = generate_synthetic_dataset(dir.path(), 2, 4, 0.6).unwrap();
        let (g, p) = &m.single_shot_pairs().unwrap()[0];
        let (g, p) = (load_image(&g.image).unwrap(), load_image(&p.image).unwrap());
        for (a, b) in g.pixels().iter().zip(p.pixels()) {
            for c in 0..3 {
                assert_eq!(b[c], crate::imaging::scale_channel(a[c], 0.6));
            }
        }
    }

    #[test]
    fn byte_identical_regeneration() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        generate_synthetic_dataset(a.path(), 2, 99, 0.7).unwrap();
        generate_synthetic_dataset(b.path(), 2, 99, 0.7).unwrap();
        let mut names: Vec<_> = std::fs::read_dir(a.path())
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        names.sort();
        assert_eq!(names.len(), 9);
        for name in names {
            assert_eq!(
                std::fs::read(a.path().join(&name)).unwrap(),
                std::fs::read(b.path().join(&name)).unwrap()
            );
        }
    }

    #[test]
    fn rejects_single_person() {
        let dir = tempfile::tempdir().unwrap();
        assert!(generate_synthetic_dataset(dir.path(), 1, 0, 1.0).is_err());
    }
}
