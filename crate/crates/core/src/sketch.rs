//! The distribution of sketching matrices `S` and their structured
//! application.
//!
//! Four kinds are provided: the column-norm-weighted single coordinate
//! (`S = e_i / ||A[:,i]||` with probability `||A[:,i]||^2 / ||A||_F^2`),
//! uniform index blocks (`S = I[:, J]` over q-subsets), the fixed identity,
//! and dense Gaussian sketches scaled by `1/sqrt(q)` so `E[S S^T] = I`.
//! Samples are applied without ever materializing `S` for the structured
//! kinds.

use nalgebra::{DMatrix, DVector};
use rand::distributions::WeightedIndex;
use rand::prelude::Distribution;
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::linalg::{ColumnOp, Matrix, SupportVec, RANK_CUTOFF};

/// Default Monte-Carlo budget for expectations without a closed form.
pub const DEFAULT_MC_SAMPLES: usize = 10_000;

/// Largest number of atoms enumerated exactly before falling back to
/// Monte Carlo.
pub const MAX_EXACT_ATOMS: usize = 200_000;

#[derive(Debug, Error)]
pub enum SketchError {
    #[error("block size {q} exceeds ambient dimension {ambient}")]
    BlockTooLarge { q: usize, ambient: usize },
    #[error("block size must be at least 1")]
    EmptyBlock,
    #[error("weighted coordinate sampling needs a nonzero matrix")]
    ZeroMatrix,
    #[error("ambient dimension mismatch: distribution lives in {expected}, operator has {got}")]
    AmbientMismatch { expected: usize, got: usize },
    #[error("Gaussian sketches have no closed-form expectation; supply a sample budget")]
    NeedsSampleBudget,
    #[error("expected outer product is singular; positive definiteness fails")]
    AssumptionViolated,
}

/// Distribution family without a bound ambient dimension; resolved against a
/// concrete operator by [`DistKind::build`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistKind {
    CoordWeighted,
    UniformBlock,
    Identity,
    Gaussian,
}

impl DistKind {
    pub fn name(&self) -> &'static str {
        match self {
            DistKind::CoordWeighted => "coord-weighted",
            DistKind::UniformBlock => "uniform-block",
            DistKind::Identity => "identity",
            DistKind::Gaussian => "gaussian",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "coord-weighted" => Some(DistKind::CoordWeighted),
            "uniform-block" => Some(DistKind::UniformBlock),
            "identity" => Some(DistKind::Identity),
            "gaussian" => Some(DistKind::Gaussian),
            _ => None,
        }
    }

    /// Effective block size for epoch accounting.
    pub fn effective_q(&self, q: usize, ambient: usize) -> usize {
        match self {
            DistKind::CoordWeighted => 1,
            DistKind::UniformBlock | DistKind::Gaussian => q,
            DistKind::Identity => ambient,
        }
    }

    pub fn build<O: ColumnOp + ?Sized>(
        &self,
        op: &O,
        q: usize,
    ) -> Result<SketchDistribution, SketchError> {
        match self {
            DistKind::CoordWeighted => SketchDistribution::coordinate_weighted(op),
            DistKind::UniformBlock => SketchDistribution::uniform_block(op.ncols(), q),
            DistKind::Identity => Ok(SketchDistribution::identity(op.ncols())),
            DistKind::Gaussian => SketchDistribution::gaussian(op.ncols(), q),
        }
    }
}

/// A distribution over sketching matrices `S` (ambient x q).
#[derive(Debug, Clone)]
pub enum SketchDistribution {
    /// `S = e_i / ||A[:,i]||` with probability proportional to the squared
    /// column norm. Zero columns get probability zero.
    CoordinateWeighted {
        ambient: usize,
        probs: Vec<f64>,
        scales: Vec<f64>,
        sampler: WeightedIndex<f64>,
    },
    /// Uniformly random q-subset of coordinates, `S = I[:, J]`.
    UniformBlock { ambient: usize, q: usize },
    /// Deterministic `S = I`.
    Identity { ambient: usize },
    /// Dense i.i.d. standard normal entries scaled by `1/sqrt(q)`.
    Gaussian { ambient: usize, q: usize },
}

/// One realized sketch, kept in structured form.
#[derive(Debug, Clone, PartialEq)]
pub enum SketchSample {
    ScaledCoordinate { index: usize, scale: f64 },
    /// Sorted, distinct coordinate indices.
    IndexBlock { indices: Vec<usize> },
    Identity { ambient: usize },
    Dense(DMatrix<f64>),
}

impl SketchDistribution {
    pub fn coordinate_weighted<O: ColumnOp + ?Sized>(op: &O) -> Result<Self, SketchError> {
        let ambient = op.ncols();
        let mut probs = Vec::with_capacity(ambient);
        let mut scales = Vec::with_capacity(ambient);
        let mut total = 0.0;
        for j in 0..ambient {
            let nsq = op.col_norm_sq(j);
            total += nsq;
            probs.push(nsq);
            scales.push(if nsq > 0.0 { 1.0 / nsq.sqrt() } else { 0.0 });
        }
        if total <= 0.0 {
            return Err(SketchError::ZeroMatrix);
        }
        for p in probs.iter_mut() {
            *p /= total;
        }
        let sampler = WeightedIndex::new(probs.clone()).map_err(|_| SketchError::ZeroMatrix)?;
        Ok(Self::CoordinateWeighted {
            ambient,
            probs,
            scales,
            sampler,
        })
    }

    pub fn uniform_block(ambient: usize, q: usize) -> Result<Self, SketchError> {
        if q == 0 {
            return Err(SketchError::EmptyBlock);
        }
        if q > ambient {
            return Err(SketchError::BlockTooLarge { q, ambient });
        }
        Ok(Self::UniformBlock { ambient, q })
    }

    pub fn identity(ambient: usize) -> Self {
        Self::Identity { ambient }
    }

    pub fn gaussian(ambient: usize, q: usize) -> Result<Self, SketchError> {
        if q == 0 {
            return Err(SketchError::EmptyBlock);
        }
        Ok(Self::Gaussian { ambient, q })
    }

    pub fn ambient_dim(&self) -> usize {
        match self {
            Self::CoordinateWeighted { ambient, .. }
            | Self::UniformBlock { ambient, .. }
            | Self::Identity { ambient }
            | Self::Gaussian { ambient, .. } => *ambient,
        }
    }

    pub fn block_size(&self) -> usize {
        match self {
            Self::CoordinateWeighted { .. } => 1,
            Self::UniformBlock { q, .. } | Self::Gaussian { q, .. } => *q,
            Self::Identity { ambient } => *ambient,
        }
    }

    /// Draws one sample following the declared law.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> SketchSample {
        match self {
            Self::CoordinateWeighted {
                sampler, scales, ..
            } => {
                let index = sampler.sample(rng);
                SketchSample::ScaledCoordinate {
                    index,
                    scale: scales[index],
                }
            }
            Self::UniformBlock { ambient, q } => {
                // Partial Fisher-Yates: q distinct indices in O(ambient) setup
                // and O(q) swaps, every q-subset equally likely.
                let mut pool: Vec<usize> = (0..*ambient).collect();
                for k in 0..*q {
                    let pick = rng.gen_range(k..*ambient);
                    pool.swap(k, pick);
                }
                let mut indices: Vec<usize> = pool[..*q].to_vec();
                indices.sort_unstable();
                SketchSample::IndexBlock { indices }
            }
            Self::Identity { ambient } => SketchSample::Identity { ambient: *ambient },
            Self::Gaussian { ambient, q } => {
                let scale = 1.0 / (*q as f64).sqrt();
                SketchSample::Dense(DMatrix::from_fn(*ambient, *q, |_, _| {
                    rng.sample::<f64, _>(StandardNormal) * scale
                }))
            }
        }
    }

    /// `E[S S^T]`, exact for the discrete kinds.
    pub fn expected_outer(&self) -> Result<DMatrix<f64>, SketchError> {
        match self {
            Self::CoordinateWeighted { probs, scales, .. } => {
                let d = probs.len();
                let mut m = DMatrix::zeros(d, d);
                for i in 0..d {
                    m[(i, i)] = probs[i] * scales[i] * scales[i];
                }
                Ok(m)
            }
            Self::UniformBlock { ambient, q } => {
                // Each index belongs to a uniformly random q-subset with
                // probability q / ambient.
                Ok(DMatrix::identity(*ambient, *ambient) * (*q as f64 / *ambient as f64))
            }
            Self::Identity { ambient } => Ok(DMatrix::identity(*ambient, *ambient)),
            Self::Gaussian { .. } => Err(SketchError::NeedsSampleBudget),
        }
    }

    /// Monte-Carlo estimate of `E[S S^T]`.
    pub fn expected_outer_sampled<R: Rng + ?Sized>(
        &self,
        samples: usize,
        rng: &mut R,
    ) -> DMatrix<f64> {
        let d = self.ambient_dim();
        let mut acc = DMatrix::zeros(d, d);
        for _ in 0..samples {
            accumulate_outer(&mut acc, &self.draw(rng));
        }
        acc / samples as f64
    }

    /// `M = E[S S^T / ||A S||_2^2]` with the 0/0 = 0 convention for atoms
    /// whose sketched image vanishes. Exact by atom enumeration for discrete
    /// kinds when the atom count is tractable, Monte Carlo otherwise.
    pub fn m_matrix<R: Rng + ?Sized>(
        &self,
        a: &Matrix,
        rng: &mut R,
    ) -> Result<MMatrixEstimate, SketchError> {
        self.m_matrix_with(a, DEFAULT_MC_SAMPLES, rng)
    }

    pub fn m_matrix_with<R: Rng + ?Sized>(
        &self,
        a: &Matrix,
        mc_samples: usize,
        rng: &mut R,
    ) -> Result<MMatrixEstimate, SketchError> {
        let d = self.ambient_dim();
        if a.ncols() != d {
            return Err(SketchError::AmbientMismatch {
                expected: d,
                got: a.ncols(),
            });
        }
        match self {
            Self::CoordinateWeighted { probs, scales, .. } => {
                let mut m = DMatrix::zeros(d, d);
                for i in 0..d {
                    if probs[i] == 0.0 {
                        continue;
                    }
                    // ||A S||^2 for S = scale * e_i is scale^2 ||A[:,i]||^2.
                    let image_nsq = scales[i] * scales[i] * a.col_norm_sq(i);
                    if image_nsq > 0.0 {
                        m[(i, i)] += probs[i] * scales[i] * scales[i] / image_nsq;
                    }
                }
                Ok(MMatrixEstimate::exact(m, d))
            }
            Self::Identity { .. } => {
                let snorm = spectral_norm_sq(&a.to_dense());
                if snorm == 0.0 {
                    return Ok(MMatrixEstimate::exact(DMatrix::zeros(d, d), 1));
                }
                Ok(MMatrixEstimate::exact(
                    DMatrix::identity(d, d) / snorm,
                    1,
                ))
            }
            Self::UniformBlock { ambient, q } => {
                match binomial_at_most(*ambient, *q, MAX_EXACT_ATOMS) {
                    Some(count) => {
                        let dense = a.to_dense();
                        let mut m = DMatrix::zeros(d, d);
                        let weight = 1.0 / count as f64;
                        let mut indices: Vec<usize> = (0..*q).collect();
                        loop {
                            let sub = dense.select_columns(indices.iter());
                            let image_nsq = spectral_norm_sq(&sub);
                            if image_nsq > 0.0 {
                                for &i in &indices {
                                    m[(i, i)] += weight / image_nsq;
                                }
                            }
                            if !next_combination(&mut indices, *ambient) {
                                break;
                            }
                        }
                        Ok(MMatrixEstimate::exact(m, count))
                    }
                    None => Ok(self.m_matrix_mc(a, mc_samples, rng)),
                }
            }
            Self::Gaussian { .. } => Ok(self.m_matrix_mc(a, mc_samples, rng)),
        }
    }

    fn m_matrix_mc<R: Rng + ?Sized>(
        &self,
        a: &Matrix,
        samples: usize,
        rng: &mut R,
    ) -> MMatrixEstimate {
        let d = self.ambient_dim();
        let dense = a.to_dense();
        let mut m = DMatrix::zeros(d, d);
        for _ in 0..samples {
            let s = self.draw(rng);
            let image_nsq = match &s {
                SketchSample::ScaledCoordinate { index, scale } => {
                    scale * scale * a.col_norm_sq(*index)
                }
                SketchSample::IndexBlock { indices } => {
                    spectral_norm_sq(&dense.select_columns(indices.iter()))
                }
                SketchSample::Identity { .. } => spectral_norm_sq(&dense),
                SketchSample::Dense(b) => spectral_norm_sq(&(&dense * b)),
            };
            if image_nsq > 0.0 {
                let mut outer = DMatrix::zeros(d, d);
                accumulate_outer(&mut outer, &s);
                m += outer / image_nsq;
            }
        }
        MMatrixEstimate {
            matrix: m / samples as f64,
            mc_samples: Some(samples),
            atoms: None,
        }
    }

    /// Checks positive definiteness of `E[S S^T]` for the discrete kinds.
    pub fn check_assumption(&self) -> Result<(), SketchError> {
        let outer = self.expected_outer()?;
        let eig = nalgebra::SymmetricEigen::new(outer);
        let max = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
        let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        if max <= 0.0 || min <= RANK_CUTOFF * max {
            return Err(SketchError::AssumptionViolated);
        }
        Ok(())
    }
}

/// `M` together with how it was obtained.
#[derive(Debug, Clone)]
pub struct MMatrixEstimate {
    pub matrix: DMatrix<f64>,
    /// Monte-Carlo sample count, `None` when exact.
    pub mc_samples: Option<usize>,
    /// Number of atoms enumerated in the exact case.
    pub atoms: Option<usize>,
}

impl MMatrixEstimate {
    fn exact(matrix: DMatrix<f64>, atoms: usize) -> Self {
        Self {
            matrix,
            mc_samples: None,
            atoms: Some(atoms),
        }
    }
}

impl SketchSample {
    pub fn ambient_dim(&self) -> Option<usize> {
        match self {
            SketchSample::ScaledCoordinate { .. } => None,
            SketchSample::IndexBlock { .. } => None,
            SketchSample::Identity { ambient } => Some(*ambient),
            SketchSample::Dense(b) => Some(b.nrows()),
        }
    }

    pub fn block_size(&self) -> Option<usize> {
        match self {
            SketchSample::ScaledCoordinate { .. } => Some(1),
            SketchSample::IndexBlock { indices } => Some(indices.len()),
            SketchSample::Identity { ambient } => Some(*ambient),
            SketchSample::Dense(b) => Some(b.ncols()),
        }
    }

    /// `S^T v`.
    pub fn apply_transpose(&self, v: &DVector<f64>) -> Result<DVector<f64>, SketchError> {
        match self {
            SketchSample::ScaledCoordinate { index, scale } => {
                if *index >= v.len() {
                    return Err(SketchError::AmbientMismatch {
                        expected: index + 1,
                        got: v.len(),
                    });
                }
                Ok(DVector::from_vec(vec![scale * v[*index]]))
            }
            SketchSample::IndexBlock { indices } => {
                for &i in indices {
                    if i >= v.len() {
                        return Err(SketchError::AmbientMismatch {
                            expected: i + 1,
                            got: v.len(),
                        });
                    }
                }
                Ok(DVector::from_iterator(
                    indices.len(),
                    indices.iter().map(|&i| v[i]),
                ))
            }
            SketchSample::Identity { ambient } => {
                if *ambient != v.len() {
                    return Err(SketchError::AmbientMismatch {
                        expected: *ambient,
                        got: v.len(),
                    });
                }
                Ok(v.clone())
            }
            SketchSample::Dense(b) => {
                if b.nrows() != v.len() {
                    return Err(SketchError::AmbientMismatch {
                        expected: b.nrows(),
                        got: v.len(),
                    });
                }
                Ok(b.transpose() * v)
            }
        }
    }

    /// `S w`, returned with its support for the structured kinds.
    pub fn apply(&self, w: &DVector<f64>, ambient: usize) -> Result<SupportVec, SketchError> {
        let q = self.block_size().unwrap_or(0);
        if w.len() != q {
            return Err(SketchError::AmbientMismatch {
                expected: q,
                got: w.len(),
            });
        }
        match self {
            SketchSample::ScaledCoordinate { index, scale } => Ok(SupportVec::Sparse {
                dim: ambient,
                entries: vec![(*index, scale * w[0])],
            }),
            SketchSample::IndexBlock { indices } => Ok(SupportVec::Sparse {
                dim: ambient,
                entries: indices.iter().enumerate().map(|(k, &i)| (i, w[k])).collect(),
            }),
            SketchSample::Identity { ambient: amb } => {
                if *amb != ambient {
                    return Err(SketchError::AmbientMismatch {
                        expected: *amb,
                        got: ambient,
                    });
                }
                Ok(SupportVec::Dense(w.clone()))
            }
            SketchSample::Dense(b) => {
                if b.nrows() != ambient {
                    return Err(SketchError::AmbientMismatch {
                        expected: b.nrows(),
                        got: ambient,
                    });
                }
                Ok(SupportVec::Dense(b * w))
            }
        }
    }
}

fn accumulate_outer(acc: &mut DMatrix<f64>, s: &SketchSample) {
    match s {
        SketchSample::ScaledCoordinate { index, scale } => {
            acc[(*index, *index)] += scale * scale;
        }
        SketchSample::IndexBlock { indices } => {
            for &i in indices {
                acc[(i, i)] += 1.0;
            }
        }
        SketchSample::Identity { ambient } => {
            for i in 0..*ambient {
                acc[(i, i)] += 1.0;
            }
        }
        SketchSample::Dense(b) => {
            *acc += b * b.transpose();
        }
    }
}

/// Largest singular value squared.
pub(crate) fn spectral_norm_sq(a: &DMatrix<f64>) -> f64 {
    if a.ncols() == 1 {
        return a.column(0).norm_squared();
    }
    let sv = a.clone().singular_values();
    sv.iter().map(|s| s * s).fold(0.0, f64::max)
}

/// `C(n, k)` if it does not exceed `limit`.
fn binomial_at_most(n: usize, k: usize, limit: usize) -> Option<usize> {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > limit as u128 {
            return None;
        }
    }
    Some(acc as usize)
}

/// Advances `indices` to the next lexicographic k-combination of `0..n`.
fn next_combination(indices: &mut [usize], n: usize) -> bool {
    let k = indices.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if indices[i] != i + n - k {
            indices[i] += 1;
            for j in i + 1..k {
                indices[j] = indices[j - 1] + 1;
            }
            return true;
        }
    }
    false
}
