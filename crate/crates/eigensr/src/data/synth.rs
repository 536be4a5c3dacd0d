//! Synthetic structured-image corpus for reproducible desk-scale runs.
//!
//! Every image is drawn from one face-like template: a soft-edged head
//! ellipse over a color gradient background, two dark eye blobs and a
//! mouth blob, with small per-sample jitter on colors, positions and
//! sizes. The shared template keeps the corpus close to a low-dimensional
//! manifold, so the eigenvalue spectrum decays fast (the leading ten
//! components carry most of the energy), while the steep head edge gives
//! the super-resolver detail that plain bicubic upsampling loses.

use std::fs;
use std::path::Path;

use ndarray::Array3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::util::subseed;

use super::{save_image_unit, CorpusManifest, ImageShape, Split};

/// Jitter scales for the template. Tuned once so that a 200-image 32x32
/// corpus at seed 0 concentrates >= 80% of its energy in 10 components.
#[derive(Debug, Clone)]
pub struct SynthParams {
    pub bg_base: [f64; 3],
    pub bg_jitter: f64,
    pub gradient_jitter: f64,
    pub skin: [f64; 3],
    pub head_pos_jitter: f64,
    pub head_size_jitter: f64,
    pub edge_steepness: f64,
    pub eye_amp: f64,
    pub eye_amp_jitter: f64,
    pub eye_pos_jitter: f64,
    pub mouth_amp: [f64; 3],
    pub mouth_amp_jitter: f64,
    pub brightness_jitter: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            bg_base: [0.35, 0.45, 0.60],
            bg_jitter: 0.10,
            gradient_jitter: 0.12,
            skin: [0.85, 0.65, 0.55],
            head_pos_jitter: 0.008,
            head_size_jitter: 0.012,
            edge_steepness: 14.0,
            eye_amp: 0.35,
            eye_amp_jitter: 0.08,
            eye_pos_jitter: 0.006,
            mouth_amp: [0.22, -0.06, -0.02],
            mouth_amp_jitter: 0.20,
            brightness_jitter: 0.05,
        }
    }
}

fn gaussian(dx: f64, dy: f64, sx: f64, sy: f64) -> f64 {
    (-0.5 * ((dx / sx).powi(2) + (dy / sy).powi(2))).exp()
}

/// Render one template sample; `rng` supplies the per-sample jitter.
fn render_sample(shape: ImageShape, p: &SynthParams, rng: &mut ChaCha8Rng) -> Array3<f64> {
    let (c, h, w) = (shape.channels, shape.height, shape.width);
    let mut jitter = |scale: f64| rng.gen_range(-scale..=scale);

    let bg: Vec<f64> = p.bg_base.iter().map(|b| b + jitter(p.bg_jitter)).collect();
    let gx: Vec<f64> = (0..3).map(|_| jitter(p.gradient_jitter)).collect();
    let gy: Vec<f64> = (0..3).map(|_| jitter(p.gradient_jitter)).collect();

    let head_cx = 0.5 + jitter(p.head_pos_jitter);
    let head_cy = 0.5 + jitter(p.head_pos_jitter);
    let head_rx = 0.34 + jitter(p.head_size_jitter);
    let head_ry = 0.42 + jitter(p.head_size_jitter);
    let steep = p.edge_steepness;

    let eye_dx = 0.15 + jitter(p.eye_pos_jitter);
    let eye_cy = head_cy - 0.13 + jitter(p.eye_pos_jitter);
    let eye_sigma = 0.045 + jitter(0.003);
    let eye_amp = p.eye_amp + jitter(p.eye_amp_jitter);

    let mouth_cy = head_cy + 0.16 + jitter(p.eye_pos_jitter);
    let mouth_sx = 0.14 + jitter(0.01);
    let mouth_sy = 0.05;
    let mouth_gain = 1.0 + jitter(p.mouth_amp_jitter);

    let brightness = 1.0 + jitter(p.brightness_jitter);

    Array3::from_shape_fn((c, h, w), |(ch, y, x)| {
        let u = (x as f64 + 0.5) / w as f64;
        let v = (y as f64 + 0.5) / h as f64;
        let ch3 = ch.min(2);

        let mut val = bg[ch3] + gx[ch3] * (u - 0.5) + gy[ch3] * (v - 0.5);

        // Soft-edged head ellipse.
        let r = (((u - head_cx) / head_rx).powi(2) + ((v - head_cy) / head_ry).powi(2)).sqrt();
        let mask = 1.0 / (1.0 + ((r - 1.0) * steep).exp());
        val += mask * (p.skin[ch3] - val);

        // Eyes darken all channels equally.
        let eyes = gaussian(u - (head_cx - eye_dx), v - eye_cy, eye_sigma, eye_sigma)
            + gaussian(u - (head_cx + eye_dx), v - eye_cy, eye_sigma, eye_sigma);
        val -= eye_amp * eyes;

        // Mouth shifts toward red.
        let mouth = gaussian(u - head_cx, v - mouth_cy, mouth_sx, mouth_sy);
        val += mouth_gain * p.mouth_amp[ch3] * mouth;

        (val * brightness).clamp(0.0, 1.0)
    })
}

/// Generate a corpus of `count` train images plus `max(1, count / 10)`
/// validation images under `dir`, and write its manifest.
pub fn synth_corpus(
    dir: &Path,
    count: usize,
    image_shape: ImageShape,
    seed: u64,
) -> Result<CorpusManifest> {
    synth_corpus_with(dir, count, image_shape, seed, &SynthParams::default())
}

pub fn synth_corpus_with(
    dir: &Path,
    count: usize,
    image_shape: ImageShape,
    seed: u64,
    params: &SynthParams,
) -> Result<CorpusManifest> {
    if count < 2 {
        return Err(Error::InvalidCorpus(format!(
            "synthetic corpus needs at least 2 train images, got {count}"
        )));
    }
    let val_count = (count / 10).max(1);
    fs::create_dir_all(dir.join("images"))?;

    let mut entries = Vec::with_capacity(count + val_count);
    for i in 0..count + val_count {
        let mut rng = ChaCha8Rng::seed_from_u64(subseed(seed, "synth-sample", i as u64));
        let img = render_sample(image_shape, params, &mut rng);
        let (rel, split) = if i < count {
            (format!("images/train_{i:04}.png"), Split::Train)
        } else {
            (format!("images/val_{:04}.png", i - count), Split::Val)
        };
        save_image_unit(&dir.join(&rel), &img.view())?;
        entries.push((rel, split));
    }

    let manifest = CorpusManifest::new(dir.to_path_buf(), entries, image_shape);
    manifest.save()?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util::sha256_file;
    use tempfile::TempDir;

    #[test]
    fn corpus_counts_and_shape() {
        let dir = TempDir::new().unwrap();
        let shape = ImageShape::new(3, 16, 16);
        let m = synth_corpus(dir.path(), 12, shape, 0).unwrap();
        assert_eq!(m.split_paths(Split::Train).len(), 12);
        assert_eq!(m.split_paths(Split::Val).len(), 1);
        let reloaded = CorpusManifest::load(dir.path()).unwrap();
        assert_eq!(reloaded.image_shape(), shape);
    }

    #[test]
    fn different_seeds_differ() {
        let d0 = TempDir::new().unwrap();
        let d1 = TempDir::new().unwrap();
        let shape = ImageShape::new(3, 8, 8);
        synth_corpus(d0.path(), 2, shape, 0).unwrap();
        synth_corpus(d1.path(), 2, shape, 1).unwrap();
        let h0 = sha256_file(&d0.path().join("images/train_0000.png")).unwrap();
        let h1 = sha256_file(&d1.path().join("images/train_0000.png")).unwrap();
        assert_ne!(h0, h1);
    }

    #[test]
    fn same_seed_is_reproducible() {
        let d0 = TempDir::new().unwrap();
        let d1 = TempDir::new().unwrap();
        let shape = ImageShape::new(3, 8, 8);
        synth_corpus(d0.path(), 3, shape, 7).unwrap();
        synth_corpus(d1.path(), 3, shape, 7).unwrap();
        for rel in ["images/train_0000.png", "images/train_0002.png", "images/val_0000.png"] {
            let h0 = sha256_file(&d0.path().join(rel)).unwrap();
            let h1 = sha256_file(&d1.path().join(rel)).unwrap();
            assert_eq!(h0, h1);
        }
    }

    #[test]
    fn minimum_count_enforced() {
        let dir = TempDir::new().unwrap();
        assert!(synth_corpus(dir.path(), 1, ImageShape::new(3, 8, 8), 0).is_err());
    }
}
