//! Quartic-to-quadratic recasting of the region objective.
//!
//! Each AF kernel `A` is split into `Ar = (A + A^H)/2` and `Ai_j = j (A - A^H)/2`,
//! both Hermitian, so that `|x^H A x|^2 = (x^H Ar x)^2 + (x^H Ai_j x)^2`.
//! Loading both by `zeta I` makes them positive definite, and since
//! `x^H x = N` for unimodular `x`,
//!
//! ```text
//! C = sum_{k,p} |x^H (Ar + zeta I) x - zeta N|^2 + |x^H (Ai_j + zeta I) x - zeta N|^2.
//! ```
//!
//! The Hermitian square roots of the loaded matrices are what the solver's
//! auxiliary-vector formulation works with.

use serde::{Deserialize, Serialize};

use crate::af::{AfKernel, RegionSpec};
use crate::error::{Error, Part, Result};
use crate::linalg::{hermitian_eigen, hermitian_sqrt, min_eigenvalue, symmetrize, CMatrix, C64};

/// Default loading margin above the smallest eigenvalue.
pub const DEFAULT_DELTA: f64 = 0.01;

#[derive(Debug, Clone)]
pub struct SplitPair {
    pub k: i64,
    pub p: i64,
    /// `(A + A^H) / 2`
    pub ar: CMatrix,
    /// `j (A - A^H) / 2`, Hermitian.
    pub ai_j: CMatrix,
}

impl SplitPair {
    pub fn from_matrix(k: i64, p: i64, a: &CMatrix) -> Self {
        let ah = a.adjoint();
        let mut ar = (a + &ah) * C64::new(0.5, 0.0);
        let mut ai_j = (a - &ah) * C64::new(0.0, 0.5);
        symmetrize(&mut ar);
        symmetrize(&mut ai_j);
        Self { k, p, ar, ai_j }
    }

    /// Skew-Hermitian part `(A - A^H) / 2`, recovered as `-j Ai_j`.
    pub fn skew(&self) -> CMatrix {
        &self.ai_j * C64::new(0.0, -1.0)
    }
}

pub fn split_kernel(kernel: &AfKernel) -> SplitPair {
    SplitPair::from_matrix(kernel.k, kernel.p, &kernel.matrix)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ZetaPolicy {
    /// Smallest eigenvalue over every split matrix, plus the margin.
    #[default]
    Exact,
    /// Unitary spectral bound: every eigenvalue lies in `[-1, 1]`.
    Bound,
}

impl std::str::FromStr for ZetaPolicy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "exact" => Ok(ZetaPolicy::Exact),
            "bound" => Ok(ZetaPolicy::Bound),
            other => Err(format!(
                "unknown zeta policy `{other}` (expected exact or bound)"
            )),
        }
    }
}

/// Loading scalar with `zeta > -min eig` over the whole collection.
///
/// The exact policy returns `max(delta - min_eig, delta)`, keeping `zeta`
/// positive so that `sqrt(zeta N)` exists.
pub fn choose_zeta(splits: &[SplitPair], policy: ZetaPolicy, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidConfig {
            field: "delta",
            reason: format!("loading margin must be positive, got {delta}"),
        });
    }
    if splits.is_empty() {
        return Err(Error::Numerical("no matrices to load".into()));
    }
    match policy {
        ZetaPolicy::Bound => Ok(1.0 + delta),
        ZetaPolicy::Exact => {
            let min = splits
                .iter()
                .flat_map(|s| [min_eigenvalue(&s.ar), min_eigenvalue(&s.ai_j)])
                .fold(f64::INFINITY, f64::min);
            Ok((delta - min).max(delta))
        }
    }
}

#[derive(Debug, Clone)]
pub struct LoadedPair {
    pub k: i64,
    pub p: i64,
    pub zeta: f64,
    /// `Ar + zeta I`
    pub ar_t: CMatrix,
    /// `Ai_j + zeta I`
    pub ai_t: CMatrix,
    pub ar_sqrt: CMatrix,
    pub ai_sqrt: CMatrix,
    pub ar_min_eig: f64,
    pub ai_min_eig: f64,
}

impl LoadedPair {
    pub fn part(&self, part: Part) -> (&CMatrix, &CMatrix) {
        match part {
            Part::Real => (&self.ar_t, &self.ar_sqrt),
            Part::Imag => (&self.ai_t, &self.ai_sqrt),
        }
    }
}

pub fn load_and_root(split: &SplitPair, zeta: f64) -> Result<LoadedPair> {
    let n = split.ar.nrows();
    let shift = CMatrix::identity(n, n) * C64::new(zeta, 0.0);
    let ar_t = &split.ar + &shift;
    let ai_t = &split.ai_j + &shift;
    let (ar_sqrt, ar_min_eig) = hermitian_sqrt(&ar_t);
    let (ai_sqrt, ai_min_eig) = hermitian_sqrt(&ai_t);
    let floor = 1e-12 * zeta.abs();
    for (part, min_eig) in [(Part::Real, ar_min_eig), (Part::Imag, ai_min_eig)] {
        if min_eig.is_nan() || min_eig <= floor {
            return Err(Error::NotPositiveDefinite {
                k: split.k,
                p: split.p,
                part,
                min_eig,
                zeta,
            });
        }
    }
    Ok(LoadedPair {
        k: split.k,
        p: split.p,
        zeta,
        ar_t,
        ai_t,
        ar_sqrt,
        ai_sqrt,
        ar_min_eig,
        ai_min_eig,
    })
}

/// Loaded pairs for every cell of a region, in `RegionSpec::cells` order.
///
/// They depend only on the region and `zeta`, so they are built once per run.
#[derive(Debug, Clone)]
pub struct LoadedSet {
    pub n: usize,
    pub zeta: f64,
    pub pairs: Vec<LoadedPair>,
}

impl LoadedSet {
    pub fn build(region: &RegionSpec, policy: ZetaPolicy, delta: f64) -> Result<Self> {
        let n = region.n();
        let splits = region
            .cells()
            .map(|(k, p)| AfKernel::new(k, p, n).map(|a| split_kernel(&a)))
            .collect::<Result<Vec<_>>>()?;
        let zeta = choose_zeta(&splits, policy, delta)?;
        let pairs = splits
            .iter()
            .map(|s| load_and_root(s, zeta))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { n, zeta, pairs })
    }

    /// `sqrt(zeta N)`
    pub fn radius(&self) -> f64 {
        (self.zeta * self.n as f64).sqrt()
    }

    /// `R = sum (Ar_t + Ai_t)`, accumulated in cell order.
    pub fn loaded_sum(&self) -> CMatrix {
        let mut r = CMatrix::zeros(self.n, self.n);
        for pair in &self.pairs {
            r += &pair.ar_t;
            r += &pair.ai_t;
        }
        r
    }
}

/// Spectrum summary of one cell, for debugging dumps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenRange {
    pub k: i64,
    pub p: i64,
    pub real_min: f64,
    pub real_max: f64,
    pub imag_min: f64,
    pub imag_max: f64,
}

pub fn eigen_ranges(splits: &[SplitPair]) -> Vec<EigenRange> {
    fn range(m: &CMatrix) -> (f64, f64) {
        hermitian_eigen(m)
            .eigenvalues
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &l| {
                (lo.min(l), hi.max(l))
            })
    }
    splits
        .iter()
        .map(|s| {
            let (real_min, real_max) = range(&s.ar);
            let (imag_min, imag_max) = range(&s.ai_j);
            EigenRange {
                k: s.k,
                p: s.p,
                real_min,
                real_max,
                imag_min,
                imag_max,
            }
        })
        .collect()
}
