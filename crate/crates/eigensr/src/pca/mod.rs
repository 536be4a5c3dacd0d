//! Orthogonal eigenbasis of an image corpus and projection operators over
//! subspace splits.
//!
//! The basis comes from the eigen-decomposition of the unnormalized
//! scatter matrix X X^T of mean-centered flat image vectors. For the
//! usual corpus regime (many more pixels than samples) the decomposition
//! runs on the m x m Gram matrix X^T X and maps eigenvectors back through
//! X, which is exactly equivalent on the nonzero spectrum.
//!
//! Projections are represented in pixel space: `project_w` returns
//! B_n B_n^T (x - mean), the rank-n reconstruction as an image, which is
//! what both the discriminator and the montage renderer consume. The
//! operator is symmetric and idempotent, so it is also its own transpose
//! for backpropagation.

mod io;

pub use io::{load_basis, save_basis};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::data::{unflatten_image, ImageShape};
use crate::error::{Error, Result};

/// Relative threshold below which eigenvalues clamp to zero and their
/// vectors are dropped.
const EIGENVALUE_CLAMP_REL: f64 = 1e-9;

/// Slack used when comparing cumulative energy against a requested
/// fraction, relative to the total energy.
const ENERGY_EPS_REL: f64 = 1e-12;

/// Mean vector, orthonormal eigenvector matrix and eigenvalue spectrum of
/// a training corpus.
#[derive(Debug, Clone)]
pub struct PcaBasis {
    mean: Array1<f64>,
    /// d x r, columns ordered by non-increasing eigenvalue.
    basis: Array2<f64>,
    /// Non-increasing, all strictly positive (zeros are dropped at fit).
    eigenvalues: Array1<f64>,
    image_shape: ImageShape,
    corpus_size: usize,
}

impl PcaBasis {
    /// Assemble a basis from raw parts, validating every invariant.
    pub fn from_parts(
        mean: Array1<f64>,
        basis: Array2<f64>,
        eigenvalues: Array1<f64>,
        image_shape: ImageShape,
        corpus_size: usize,
    ) -> Result<Self> {
        let out = Self { mean, basis, eigenvalues, image_shape, corpus_size };
        out.validate()?;
        Ok(out)
    }

    pub fn mean(&self) -> &Array1<f64> {
        &self.mean
    }

    pub fn basis(&self) -> &Array2<f64> {
        &self.basis
    }

    pub fn eigenvalues(&self) -> &Array1<f64> {
        &self.eigenvalues
    }

    pub fn rank(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn image_shape(&self) -> ImageShape {
        self.image_shape
    }

    pub fn corpus_size(&self) -> usize {
        self.corpus_size
    }

    /// Cumulative energy fraction captured by the first `n` components.
    pub fn energy_fraction_at(&self, n: usize) -> f64 {
        let total: f64 = self.eigenvalues.sum();
        if total <= 0.0 {
            return 0.0;
        }
        self.eigenvalues.iter().take(n).sum::<f64>() / total
    }

    /// Partition the basis at dimension `n`: W spans columns 1..n, V the
    /// rest.
    pub fn split(&self, n: usize) -> Result<SubspaceSplit<'_>> {
        if n > self.rank() {
            return Err(Error::InvalidSplit { n, rank: self.rank() });
        }
        Ok(SubspaceSplit { parent: self, n })
    }

    fn check_vector(&self, x: &ArrayView1<f64>) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::ShapeMismatch {
                expected: format!("vector of length {}", self.dim()),
                got: x.len().to_string(),
            });
        }
        Ok(())
    }

    fn validate(&self) -> Result<()> {
        let d = self.mean.len();
        let (bd, r) = self.basis.dim();
        if bd != d || self.eigenvalues.len() != r || d != self.image_shape.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("basis {d}x{r} consistent with mean/shape"),
                got: format!("basis {bd}x{r}, shape {}", self.image_shape),
            });
        }
        if r > d || self.corpus_size < 1 || r > self.corpus_size.saturating_sub(1) {
            return Err(Error::InvalidCorpus(format!(
                "rank {r} violates bound min(m-1, d) = {}",
                (self.corpus_size.saturating_sub(1)).min(d)
            )));
        }
        for w in self.eigenvalues.windows(2) {
            if w[1] > w[0] {
                return Err(Error::InvalidCorpus("eigenvalues not sorted".into()));
            }
        }
        if self.eigenvalues.iter().any(|&l| l < -1e-9 || !l.is_finite()) {
            return Err(Error::InvalidCorpus("negative or non-finite eigenvalue".into()));
        }
        // Columns orthonormal within 1e-6.
        let gram = self.basis.t().dot(&self.basis);
        for i in 0..r {
            for j in 0..r {
                let want = if i == j { 1.0 } else { 0.0 };
                if (gram[[i, j]] - want).abs() > 1e-6 {
                    return Err(Error::InvalidCorpus(format!(
                        "basis columns not orthonormal: [{i},{j}] = {}",
                        gram[[i, j]]
                    )));
                }
            }
        }
        Ok(())
    }
}

/// A basis partitioned at dimension `n` into complementary subspaces.
#[derive(Debug, Clone, Copy)]
pub struct SubspaceSplit<'a> {
    parent: &'a PcaBasis,
    n: usize,
}

impl<'a> SubspaceSplit<'a> {
    pub fn parent(&self) -> &'a PcaBasis {
        self.parent
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Pixel-space orthogonal projection onto W (the first n components).
    ///
    /// With `centered == false` the mean is subtracted first; the mean is
    /// never added back.
    pub fn project_w(&self, x: &ArrayView1<f64>, centered: bool) -> Result<Array1<f64>> {
        self.project_cols(x, centered, 0, self.n)
    }

    /// Pixel-space orthogonal projection onto V (components n+1..r).
    pub fn project_v(&self, x: &ArrayView1<f64>, centered: bool) -> Result<Array1<f64>> {
        self.project_cols(x, centered, self.n, self.parent.rank())
    }

    fn project_cols(
        &self,
        x: &ArrayView1<f64>,
        centered: bool,
        lo: usize,
        hi: usize,
    ) -> Result<Array1<f64>> {
        self.parent.check_vector(x)?;
        let xc = if centered {
            x.to_owned()
        } else {
            x - &self.parent.mean
        };
        if lo == hi {
            return Ok(Array1::zeros(x.len()));
        }
        let cols = self.parent.basis.slice(s![.., lo..hi]);
        let coeffs = cols.t().dot(&xc);
        Ok(cols.dot(&coeffs))
    }

    /// Batched W projection over already-centered rows of shape (B, d).
    pub fn project_w_batch(&self, rows: &ArrayView2<f64>) -> Array2<f64> {
        self.project_cols_batch(rows, 0, self.n)
    }

    /// Batched V projection over already-centered rows of shape (B, d).
    pub fn project_v_batch(&self, rows: &ArrayView2<f64>) -> Array2<f64> {
        self.project_cols_batch(rows, self.n, self.parent.rank())
    }

    fn project_cols_batch(&self, rows: &ArrayView2<f64>, lo: usize, hi: usize) -> Array2<f64> {
        assert_eq!(rows.ncols(), self.parent.dim(), "row length must be d");
        if lo == hi {
            return Array2::zeros(rows.dim());
        }
        let cols = self.parent.basis.slice(s![.., lo..hi]);
        rows.dot(&cols).dot(&cols.t())
    }
}

/// Fit the eigenbasis of an ordered corpus of flat image vectors.
///
/// Rank is `min(rank_cap, m - 1, d)` minus any components whose
/// eigenvalue falls below `1e-9` of the leading one. The result is
/// deterministic for a fixed corpus order: eigenvalue ties keep original
/// decomposition order, and each eigenvector's largest-magnitude entry is
/// made positive.
pub fn fit_pca(
    corpus: &[Array1<f64>],
    image_shape: ImageShape,
    rank_cap: Option<usize>,
) -> Result<PcaBasis> {
    let m = corpus.len();
    if m < 2 {
        return Err(Error::InvalidCorpus(format!(
            "need at least 2 samples, got {m}"
        )));
    }
    let d = image_shape.len();
    for (i, x) in corpus.iter().enumerate() {
        if x.len() != d {
            return Err(Error::ShapeMismatch {
                expected: format!("vectors of length {d}"),
                got: format!("{} (sample {i})", x.len()),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidCorpus(format!("non-finite value in sample {i}")));
        }
    }

    let mut mean = Array1::<f64>::zeros(d);
    for x in corpus {
        mean += x;
    }
    mean /= m as f64;

    // Centered data as d x m columns.
    let x = DMatrix::from_fn(d, m, |i, j| corpus[j][i] - mean[i]);

    let (eigenvalues, vectors) = if m < d {
        gram_eigen(&x)
    } else {
        direct_eigen(&x)
    };

    let bound = rank_cap.unwrap_or(usize::MAX).min(m - 1).min(d);
    let lambda1 = eigenvalues.first().copied().unwrap_or(0.0).max(0.0);
    let clamp = EIGENVALUE_CLAMP_REL * lambda1;
    let kept: Vec<usize> = (0..eigenvalues.len().min(bound))
        .filter(|&i| eigenvalues[i] > 0.0 && eigenvalues[i] >= clamp)
        .collect();
    let r = kept.len();

    let mut basis = Array2::<f64>::zeros((d, r));
    let mut lambdas = Array1::<f64>::zeros(r);
    for (col, &i) in kept.iter().enumerate() {
        lambdas[col] = eigenvalues[i];
        let v = &vectors[i];
        // Sign convention: largest-magnitude entry positive (first index
        // wins ties).
        let mut arg = 0;
        let mut best = 0.0f64;
        for (k, &val) in v.iter().enumerate() {
            if val.abs() > best {
                best = val.abs();
                arg = k;
            }
        }
        let sign = if v[arg] < 0.0 { -1.0 } else { 1.0 };
        for k in 0..d {
            basis[[k, col]] = sign * v[k];
        }
    }

    PcaBasis::from_parts(mean, basis, lambdas, image_shape, m)
}

/// Sort eigenpairs by non-increasing eigenvalue; exact ties keep original
/// decomposition order.
fn sorted_pairs(eigen: SymmetricEigen<f64, nalgebra::Dyn>) -> (Vec<f64>, Vec<DVector<f64>>) {
    let mut order: Vec<usize> = (0..eigen.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| {
        eigen.eigenvalues[b]
            .partial_cmp(&eigen.eigenvalues[a])
            .expect("finite eigenvalues")
            .then(a.cmp(&b))
    });
    let values = order.iter().map(|&i| eigen.eigenvalues[i]).collect();
    let vectors = order
        .iter()
        .map(|&i| eigen.eigenvectors.column(i).into_owned())
        .collect();
    (values, vectors)
}

/// Gram-matrix path for m < d: decompose X^T X and map v -> Xv / ||Xv||.
fn gram_eigen(x: &DMatrix<f64>) -> (Vec<f64>, Vec<DVector<f64>>) {
    let gram = x.transpose() * x;
    let (values, small_vectors) = sorted_pairs(SymmetricEigen::new(gram));
    let mut vectors = Vec::with_capacity(small_vectors.len());
    let mut kept_values = Vec::with_capacity(values.len());
    for (lambda, v) in values.into_iter().zip(small_vectors) {
        let u = x * v;
        let norm = u.norm();
        if norm > 0.0 && lambda > 0.0 {
            vectors.push(u / norm);
            kept_values.push(lambda);
        } else {
            vectors.push(DVector::zeros(x.nrows()));
            kept_values.push(lambda.max(0.0));
        }
    }
    (kept_values, vectors)
}

/// Direct path: decompose the d x d scatter matrix X X^T.
fn direct_eigen(x: &DMatrix<f64>) -> (Vec<f64>, Vec<DVector<f64>>) {
    let scatter = x * x.transpose();
    sorted_pairs(SymmetricEigen::new(scatter))
}

/// Smallest `n` whose leading components capture at least `fraction` of
/// the total eigenvalue energy.
pub fn energy_dimension(basis: &PcaBasis, fraction: f64) -> Result<usize> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::Config(format!(
            "energy fraction must be in [0, 1], got {fraction}"
        )));
    }
    let total: f64 = basis.eigenvalues.sum();
    if total <= 0.0 {
        return Err(Error::DegenerateSpectrum);
    }
    let threshold = fraction * total - ENERGY_EPS_REL * total;
    let mut cum = 0.0;
    if cum >= threshold {
        return Ok(0);
    }
    for (i, &l) in basis.eigenvalues.iter().enumerate() {
        cum += l;
        if cum >= threshold {
            return Ok(i + 1);
        }
    }
    Ok(basis.rank())
}

/// Mean-plus-W-projection reconstructions of `x` at the dimensions that
/// reach each requested energy fraction, folded to image shape and
/// clamped to [0, 1].
pub fn montage_projections(
    basis: &PcaBasis,
    x: &ArrayView1<f64>,
    fractions: &[f64],
) -> Result<Vec<ndarray::Array3<f64>>> {
    for w in fractions.windows(2) {
        if w[1] < w[0] {
            return Err(Error::Config("fractions must be ascending".into()));
        }
    }
    let mut out = Vec::with_capacity(fractions.len());
    for &f in fractions {
        let n = energy_dimension(basis, f)?;
        let split = basis.split(n)?;
        let proj = split.project_w(x, false)?;
        let recon = &proj + &basis.mean;
        let mut img = unflatten_image(&recon, basis.image_shape)?;
        crate::data::bicubic::clamp_unit(&mut img);
        out.push(img);
    }
    Ok(out)
}
