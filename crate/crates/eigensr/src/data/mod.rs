//! Corpus ingestion and LR/HR/condition triple construction.
//!
//! Images are `(C, H, W)` arrays of `f64` in `[0, 1]`, decoded from 8-bit
//! PNG by `/255`. Flat vectors used by the eigenbasis code are the
//! row-major flattening of that layout (channel-major). LR inputs are
//! always synthesized from HR by the pipeline's own bicubic downsampler;
//! the condition is the bicubic x4 upsample of the LR image.

pub mod bicubic;
mod synth;

pub use synth::{synth_corpus, SynthParams};

use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array3, Array4, ArrayView3, ArrayView4};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::{sha256_hex, subseed};
use bicubic::{bicubic_resize, clamp_unit};

pub const MANIFEST_FILE: &str = "manifest.txt";

/// Shape an image folds back into: (channels, height, width).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageShape {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl ImageShape {
    pub fn new(channels: usize, height: usize, width: usize) -> Self {
        Self { channels, height, width }
    }

    /// Flat vector length.
    pub fn len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl fmt::Display for ImageShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.channels, self.height, self.width)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Split::Train => write!(f, "train"),
            Split::Val => write!(f, "val"),
        }
    }
}

/// Ordered list of corpus images plus their split assignment.
#[derive(Debug, Clone)]
pub struct CorpusManifest {
    root: PathBuf,
    entries: Vec<(String, Split)>,
    image_shape: ImageShape,
}

impl CorpusManifest {
    /// Load `manifest.txt` from a corpus directory. Each line is
    /// `<relative path> <train|val>`. The image shape is taken from the
    /// first entry's decoded image.
    pub fn load(root: &Path) -> Result<Self> {
        let path = root.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::InvalidCorpus(format!(
            "cannot read {}: {e}",
            path.display()
        )))?;
        let mut entries = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let (Some(rel), Some(split)) = (parts.next(), parts.next()) else {
                return Err(Error::Malformed {
                    path: path.clone(),
                    reason: format!("line {}: expected '<path> <split>'", lineno + 1),
                });
            };
            let split = match split {
                "train" => Split::Train,
                "val" => Split::Val,
                other => {
                    return Err(Error::Malformed {
                        path: path.clone(),
                        reason: format!("line {}: unknown split tag '{other}'", lineno + 1),
                    })
                }
            };
            entries.push((rel.to_string(), split));
        }
        if entries.is_empty() {
            return Err(Error::InvalidCorpus(format!(
                "{} lists no images",
                path.display()
            )));
        }
        let mut seen = std::collections::HashSet::new();
        for (rel, _) in &entries {
            if !seen.insert(rel.as_str()) {
                return Err(Error::InvalidCorpus(format!("duplicate identifier {rel}")));
            }
        }
        let first = load_image_unit(&root.join(&entries[0].0))?;
        let (c, h, w) = first.dim();
        Ok(Self {
            root: root.to_path_buf(),
            entries,
            image_shape: ImageShape::new(c, h, w),
        })
    }

    /// Build a manifest in memory (used by the synthetic corpus writer).
    pub fn new(root: PathBuf, entries: Vec<(String, Split)>, image_shape: ImageShape) -> Self {
        Self { root, entries, image_shape }
    }

    pub fn save(&self) -> Result<()> {
        let mut f = fs::File::create(self.root.join(MANIFEST_FILE))?;
        for (rel, split) in &self.entries {
            writeln!(f, "{rel} {split}")?;
        }
        Ok(())
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn image_shape(&self) -> ImageShape {
        self.image_shape
    }

    /// Identifiers belonging to a split, in manifest order.
    pub fn split_paths(&self, split: Split) -> Vec<&str> {
        self.entries
            .iter()
            .filter(|(_, s)| *s == split)
            .map(|(rel, _)| rel.as_str())
            .collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Load one image by identifier, checked against the manifest shape.
    pub fn load_image(&self, rel: &str) -> Result<Array3<f64>> {
        let img = load_image_unit(&self.root.join(rel))?;
        let (c, h, w) = img.dim();
        let got = ImageShape::new(c, h, w);
        if got != self.image_shape {
            return Err(Error::ShapeMismatch {
                expected: self.image_shape.to_string(),
                got: format!("{got} ({rel})"),
            });
        }
        Ok(img)
    }

    /// Load every image of a split as flat vectors, in manifest order.
    pub fn load_split_vectors(&self, split: Split) -> Result<Vec<Array1<f64>>> {
        self.split_paths(split)
            .iter()
            .map(|rel| Ok(flatten_image(&self.load_image(rel)?.view())))
            .collect()
    }
}

/// One training example. `condition` is the bicubic x4 upsample of `lr`
/// and always matches `hr`'s shape.
#[derive(Debug, Clone)]
pub struct SampleTriple {
    pub lr: Array3<f64>,
    pub hr: Array3<f64>,
    pub condition: Array3<f64>,
}

/// A batch of triples, stacked along axis 0.
#[derive(Debug, Clone)]
pub struct TripleBatch {
    pub lr: Array4<f64>,
    pub hr: Array4<f64>,
    pub condition: Array4<f64>,
    /// Manifest-order indices of the train-split images in this batch.
    pub indices: Vec<usize>,
}

impl TripleBatch {
    pub fn batch_size(&self) -> usize {
        self.lr.dim().0
    }

    /// Stable content hash over lr/hr/condition bytes, little-endian f64.
    pub fn checksum(&self) -> String {
        let mut bytes = Vec::new();
        for arr in [&self.lr, &self.hr, &self.condition] {
            for v in arr.iter() {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
        sha256_hex(&bytes)
    }
}

/// Build the triple for one HR image with a given scale factor.
pub fn triple_from_hr(hr: &Array3<f64>, scale: usize) -> Result<SampleTriple> {
    let (_, h, w) = hr.dim();
    if h % scale != 0 || w % scale != 0 {
        return Err(Error::ShapeMismatch {
            expected: format!("H and W divisible by {scale}"),
            got: format!("{h}x{w}"),
        });
    }
    let mut lr = bicubic_resize(hr, h / scale, w / scale)?;
    clamp_unit(&mut lr);
    let mut condition = bicubic_resize(&lr, h, w)?;
    clamp_unit(&mut condition);
    Ok(SampleTriple { lr, hr: hr.clone(), condition })
}

/// Deterministic per-epoch stream of [`TripleBatch`]es over the train
/// split. The permutation is a pure function of `(seed, epoch)`, so a
/// resumed run re-creates the exact same order.
pub struct TripleStream {
    manifest: CorpusManifest,
    batch_size: usize,
    seed: u64,
    scale: usize,
    strict_decode: bool,
}

impl TripleStream {
    pub fn new(
        manifest: &CorpusManifest,
        batch_size: usize,
        seed: u64,
        scale: usize,
        strict_decode: bool,
    ) -> Result<Self> {
        if batch_size == 0 {
            return Err(Error::InvalidBatch("batch_size must be >= 1".into()));
        }
        if manifest.split_paths(Split::Train).is_empty() {
            return Err(Error::InvalidCorpus("train split is empty".into()));
        }
        Ok(Self {
            manifest: manifest.clone(),
            batch_size,
            seed,
            scale,
            strict_decode,
        })
    }

    /// Shuffled batches for one epoch. The final batch may be smaller.
    pub fn epoch_batches(&self, epoch: usize) -> Result<Vec<TripleBatch>> {
        let paths = self.manifest.split_paths(Split::Train);
        let mut order: Vec<usize> = (0..paths.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(subseed(self.seed, "epoch-shuffle", epoch as u64));
        order.shuffle(&mut rng);

        let shape = self.manifest.image_shape();
        let (c, h, w) = (shape.channels, shape.height, shape.width);
        let mut batches = Vec::new();
        let mut triples: Vec<(usize, SampleTriple)> = Vec::new();
        let mut flush = |triples: &mut Vec<(usize, SampleTriple)>, batches: &mut Vec<TripleBatch>| {
            if triples.is_empty() {
                return;
            }
            let b = triples.len();
            let mut lr = Array4::<f64>::zeros((b, c, h / self.scale, w / self.scale));
            let mut hr = Array4::<f64>::zeros((b, c, h, w));
            let mut condition = Array4::<f64>::zeros((b, c, h, w));
            let mut indices = Vec::with_capacity(b);
            for (i, (idx, t)) in triples.drain(..).enumerate() {
                lr.index_axis_mut(ndarray::Axis(0), i).assign(&t.lr);
                hr.index_axis_mut(ndarray::Axis(0), i).assign(&t.hr);
                condition.index_axis_mut(ndarray::Axis(0), i).assign(&t.condition);
                indices.push(idx);
            }
            batches.push(TripleBatch { lr, hr, condition, indices });
        };

        for idx in order {
            match self.manifest.load_image(paths[idx]) {
                Ok(img) => {
                    triples.push((idx, triple_from_hr(&img, self.scale)?));
                    if triples.len() == self.batch_size {
                        flush(&mut triples, &mut batches);
                    }
                }
                Err(e) if !self.strict_decode => {
                    eprintln!("warning: skipping {}: {e}", paths[idx]);
                }
                Err(e) => return Err(e),
            }
        }
        flush(&mut triples, &mut batches);
        if batches.is_empty() {
            return Err(Error::InvalidCorpus("no decodable train images".into()));
        }
        Ok(batches)
    }
}

/// Decode an image file to `(C, H, W)` in `[0, 1]`.
pub fn load_image_unit(path: &Path) -> Result<Array3<f64>> {
    let img = image::open(path)?.to_rgb8();
    let (w, h) = img.dimensions();
    let mut out = Array3::<f64>::zeros((3, h as usize, w as usize));
    for (x, y, px) in img.enumerate_pixels() {
        for ch in 0..3 {
            out[[ch, y as usize, x as usize]] = px.0[ch] as f64 / 255.0;
        }
    }
    Ok(out)
}

/// Encode a `(C, H, W)` image in `[0, 1]` to an 8-bit PNG. One channel is
/// written as grayscale, three as RGB.
pub fn save_image_unit(path: &Path, image: &ArrayView3<f64>) -> Result<()> {
    let (c, h, w) = image.dim();
    let to_u8 = |v: f64| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
    match c {
        1 => {
            let mut buf = image::GrayImage::new(w as u32, h as u32);
            for (x, y, px) in buf.enumerate_pixels_mut() {
                px.0[0] = to_u8(image[[0, y as usize, x as usize]]);
            }
            buf.save(path)?;
        }
        3 => {
            let mut buf = image::RgbImage::new(w as u32, h as u32);
            for (x, y, px) in buf.enumerate_pixels_mut() {
                for ch in 0..3 {
                    px.0[ch] = to_u8(image[[ch, y as usize, x as usize]]);
                }
            }
            buf.save(path)?;
        }
        other => {
            return Err(Error::ShapeMismatch {
                expected: "1 or 3 channels".into(),
                got: other.to_string(),
            })
        }
    }
    Ok(())
}

/// Row-major flatten of a `(C, H, W)` image into a length `C*H*W` vector.
pub fn flatten_image(image: &ArrayView3<f64>) -> Array1<f64> {
    Array1::from_iter(image.iter().copied())
}

/// Fold a flat vector back into `(C, H, W)`.
pub fn unflatten_image(v: &Array1<f64>, shape: ImageShape) -> Result<Array3<f64>> {
    if v.len() != shape.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("flat length {}", shape.len()),
            got: v.len().to_string(),
        });
    }
    Ok(Array3::from_shape_vec(
        (shape.channels, shape.height, shape.width),
        v.to_vec(),
    )
    .expect("length checked"))
}

/// Flatten a `(B, C, H, W)` batch into `(B, C*H*W)` rows.
pub fn flatten_batch(batch: &ArrayView4<f64>) -> ndarray::Array2<f64> {
    let (b, c, h, w) = batch.dim();
    let flat: Vec<f64> = batch.iter().copied().collect();
    ndarray::Array2::from_shape_vec((b, c * h * w), flat).expect("contiguous batch")
}

/// Fold `(B, C*H*W)` rows back into a `(B, C, H, W)` batch.
pub fn unflatten_batch(rows: &ndarray::ArrayView2<f64>, shape: ImageShape) -> Array4<f64> {
    let (b, d) = rows.dim();
    assert_eq!(d, shape.len(), "row length must match image shape");
    Array4::from_shape_vec(
        (b, shape.channels, shape.height, shape.width),
        rows.iter().copied().collect(),
    )
    .expect("contiguous rows")
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::TempDir;

    fn write_corpus(dir: &Path, n: usize, shape: ImageShape, val: usize) -> CorpusManifest {
        synth_corpus_at(dir, n, val, shape)
    }

    fn synth_corpus_at(dir: &Path, train: usize, val: usize, shape: ImageShape) -> CorpusManifest {
        // Small hand-rolled corpus: constant images with varying level.
        fs::create_dir_all(dir.join("images")).unwrap();
        let mut entries = Vec::new();
        for i in 0..train + val {
            let v = (i as f64 + 1.0) / (train + val + 1) as f64;
            let img = Array3::from_elem((shape.channels, shape.height, shape.width), v);
            let rel = format!("images/img_{i:03}.png");
            save_image_unit(&dir.join(&rel), &img.view()).unwrap();
            let split = if i < train { Split::Train } else { Split::Val };
            entries.push((rel, split));
        }
        let m = CorpusManifest::new(dir.to_path_buf(), entries, shape);
        m.save().unwrap();
        m
    }

    #[test]
    fn manifest_round_trip() {
        let dir = TempDir::new().unwrap();
        let shape = ImageShape::new(3, 8, 8);
        let m = write_corpus(dir.path(), 4, shape, 2);
        let loaded = CorpusManifest::load(dir.path()).unwrap();
        assert_eq!(loaded.image_shape(), shape);
        assert_eq!(loaded.len(), m.len());
        assert_eq!(loaded.split_paths(Split::Train).len(), 4);
        assert_eq!(loaded.split_paths(Split::Val).len(), 2);
    }

    #[test]
    fn manifest_rejects_duplicates_and_bad_split() {
        let dir = TempDir::new().unwrap();
        let shape = ImageShape::new(3, 4, 4);
        write_corpus(dir.path(), 2, shape, 0);
        fs::write(
            dir.path().join(MANIFEST_FILE),
            "images/img_000.png train\nimages/img_000.png val\n",
        )
        .unwrap();
        assert!(CorpusManifest::load(dir.path()).is_err());
        fs::write(dir.path().join(MANIFEST_FILE), "images/img_000.png test\n").unwrap();
        assert!(CorpusManifest::load(dir.path()).is_err());
    }

    #[test]
    fn triple_shapes_and_range() {
        let dir = TempDir::new().unwrap();
        let shape = ImageShape::new(3, 16, 16);
        let m = write_corpus(dir.path(), 5, shape, 0);
        let stream = TripleStream::new(&m, 2, 0, 4, true).unwrap();
        let batches = stream.epoch_batches(0).unwrap();
        assert_eq!(batches.len(), 3); // 2 + 2 + 1
        let b0 = &batches[0];
        assert_eq!(b0.lr.dim(), (2, 3, 4, 4));
        assert_eq!(b0.hr.dim(), (2, 3, 16, 16));
        assert_eq!(b0.condition.dim(), (2, 3, 16, 16));
        for v in b0.lr.iter().chain(b0.hr.iter()).chain(b0.condition.iter()) {
            assert!((0.0..=1.0).contains(v));
        }
        assert_eq!(batches[2].batch_size(), 1);
    }

    #[test]
    fn stream_is_deterministic_per_seed_and_epoch() {
        let dir = TempDir::new().unwrap();
        let shape = ImageShape::new(3, 8, 8);
        let m = write_corpus(dir.path(), 7, shape, 0);
        let s1 = TripleStream::new(&m, 3, 42, 4, true).unwrap();
        let s2 = TripleStream::new(&m, 3, 42, 4, true).unwrap();
        let a = s1.epoch_batches(5).unwrap();
        let b = s2.epoch_batches(5).unwrap();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b.iter()) {
            assert_eq!(x.checksum(), y.checksum());
            assert_eq!(x.indices, y.indices);
        }
        let c = s1.epoch_batches(6).unwrap();
        assert_ne!(
            a.iter().map(|t| t.indices.clone()).collect::<Vec<_>>(),
            c.iter().map(|t| t.indices.clone()).collect::<Vec<_>>(),
            "different epochs should reshuffle"
        );
    }

    #[test]
    fn flatten_unflatten_round_trip() {
        let img = Array3::from_shape_fn((3, 4, 5), |(c, y, x)| (c * 100 + y * 10 + x) as f64);
        let flat = flatten_image(&img.view());
        assert_eq!(flat.len(), 60);
        assert_eq!(flat[0], 0.0);
        assert_eq!(flat[5], 1.0 * 5.0); // (0, 1, 0) => row-major
        let back = unflatten_image(&flat, ImageShape::new(3, 4, 5)).unwrap();
        assert_eq!(img, back);
    }

    #[test]
    fn png_round_trip_is_exact_for_8bit_levels() {
        let dir = TempDir::new().unwrap();
        let img = Array3::from_shape_fn((3, 6, 6), |(c, y, x)| {
            ((c * 83 + y * 11 + x * 7) % 256) as f64 / 255.0
        });
        let path = dir.path().join("t.png");
        save_image_unit(&path, &img.view()).unwrap();
        let back = load_image_unit(&path).unwrap();
        for (a, b) in img.iter().zip(back.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
