//! Discrete ambiguity function of a unimodular slow-time code.
//!
//! For a code `x` of length `N` the (cyclic) discrete AF at delay lag `k` and
//! Doppler bin `p` is
//!
//! ```text
//! r[k, p] = sum_{n=1..N} x_n conj(x_{n-k}) exp(-j 2 pi (n - k) p / N)
//!         = x^H D_p J_k x
//! ```
//!
//! with `n - k` reduced cyclically into `1..=N`, `D_p` the diagonal Doppler
//! phasor matrix and `J_k` the cyclic shift by `k` lags. The chirp-level
//! `exp(j pi p / N) sinc(pi p / N)` factor of the exact sampled AF is dropped,
//! which is accurate for `|p| << N`.
//!
//! Storage is 0-based; entry `i` of `D_p` uses the 1-based exponent `i + 1`, so
//! its last entry is always 1.

use std::collections::BTreeSet;
use std::f64::consts::TAU;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{quad_form, CMatrix, CVector, C64};

/// Lower clip for dB levels of (numerically) empty bins.
pub const DB_FLOOR: f64 = -100.0;

pub(crate) fn check_length(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidLength(n));
    }
    Ok(())
}

pub(crate) fn check_lag(k: i64, n: usize) -> Result<()> {
    if k.unsigned_abs() >= n as u64 {
        return Err(Error::LagOutOfRange { lag: k, n });
    }
    Ok(())
}

/// Accepted Doppler bin range `[-ceil(N/2), ceil(N/2) - 1]`.
pub fn bin_range(n: usize) -> (i64, i64) {
    let half = n.div_ceil(2) as i64;
    (-half, half - 1)
}

pub(crate) fn check_bin(p: i64, n: usize) -> Result<()> {
    let (lo, hi) = bin_range(n);
    if p < lo || p > hi {
        return Err(Error::BinOutOfRange { bin: p, lo, hi, n });
    }
    Ok(())
}

/// The `N` Doppler bins of the full grid: `-N/2..N/2-1` for even `N`,
/// `-(N-1)/2..(N-1)/2` for odd `N`.
pub fn grid_bins(n: usize) -> Vec<i64> {
    let lo = -((n / 2) as i64);
    let hi = n.div_ceil(2) as i64 - 1;
    (lo..=hi).collect()
}

/// `exp(-j 2 pi m p / N)` with the exponent reduced mod `N` before scaling.
fn phasor(m: i64, p: i64, n: usize) -> C64 {
    let r = (m * p).rem_euclid(n as i64);
    C64::from_polar(1.0, -TAU * r as f64 / n as f64)
}

/// A unimodular code stored by its phases, so `|x_n| = 1` holds by construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeSequence {
    phases: Vec<f64>,
}

impl CodeSequence {
    pub fn from_phases(phases: Vec<f64>) -> Result<Self> {
        check_length(phases.len())?;
        if let Some(i) = phases.iter().position(|p| !p.is_finite()) {
            return Err(Error::Numerical(format!("phase {i} is not finite")));
        }
        Ok(Self { phases })
    }

    /// Phases of the given complex entries. Magnitudes are discarded.
    pub fn from_entries(entries: &[C64]) -> Result<Self> {
        Self::from_phases(entries.iter().map(|z| z.arg()).collect())
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn entry(&self, i: usize) -> C64 {
        C64::from_polar(1.0, self.phases[i])
    }

    pub fn entries(&self) -> Vec<C64> {
        (0..self.len()).map(|i| self.entry(i)).collect()
    }

    pub fn to_vector(&self) -> CVector {
        CVector::from_iterator(self.len(), (0..self.len()).map(|i| self.entry(i)))
    }

    /// The code multiplied by `exp(j phi)`.
    pub fn rotated(&self, phi: f64) -> Self {
        Self {
            phases: self.phases.iter().map(|p| p + phi).collect(),
        }
    }
}

/// Delay lags and Doppler bins over which the AF is suppressed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionSpec {
    n: usize,
    lags: BTreeSet<i64>,
    bins: BTreeSet<i64>,
}

impl RegionSpec {
    pub fn new(
        n: usize,
        lags: impl IntoIterator<Item = i64>,
        bins: impl IntoIterator<Item = i64>,
    ) -> Result<Self> {
        check_length(n)?;
        let lags: BTreeSet<i64> = lags.into_iter().collect();
        let bins: BTreeSet<i64> = bins.into_iter().collect();
        if lags.is_empty() {
            return Err(Error::EmptyIndexSet("k"));
        }
        if bins.is_empty() {
            return Err(Error::EmptyIndexSet("p"));
        }
        for &k in &lags {
            check_lag(k, n)?;
        }
        for &p in &bins {
            check_bin(p, n)?;
        }
        if lags.contains(&0) && bins.contains(&0) {
            return Err(Error::MainlobeInRegion);
        }
        Ok(Self { n, lags, bins })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn lags(&self) -> &BTreeSet<i64> {
        &self.lags
    }

    pub fn bins(&self) -> &BTreeSet<i64> {
        &self.bins
    }

    /// Number of `(k, p)` cells.
    pub fn size(&self) -> usize {
        self.lags.len() * self.bins.len()
    }

    /// All `(k, p)` cells, lag-major in ascending order.
    pub fn cells(&self) -> impl Iterator<Item = (i64, i64)> + '_ {
        self.lags
            .iter()
            .flat_map(move |&k| self.bins.iter().map(move |&p| (k, p)))
    }

    pub fn contains(&self, k: i64, p: i64) -> bool {
        self.lags.contains(&k) && self.bins.contains(&p)
    }
}

/// `D_p = Diag(exp(-j 2 pi n p / N)), n = 1..N`.
pub fn build_doppler_diag(p: i64, n: usize) -> Result<CMatrix> {
    check_length(n)?;
    let diag = CVector::from_iterator(n, (1..=n as i64).map(|m| phasor(m, p, n)));
    Ok(CMatrix::from_diagonal(&diag))
}

/// Cyclic shift `J_k` with `(J_k x)_i = x_{(i + k) mod N}`; `J_{-k} = J_k^H`.
pub fn build_shift(k: i64, n: usize) -> Result<CMatrix> {
    check_length(n)?;
    check_lag(k, n)?;
    let mut m = CMatrix::zeros(n, n);
    for i in 0..n {
        let j = (i as i64 + k).rem_euclid(n as i64) as usize;
        m[(i, j)] = C64::new(1.0, 0.0);
    }
    Ok(m)
}

/// `A_{k,p} = D_p J_k` for one AF cell. Always unitary.
#[derive(Debug, Clone)]
pub struct AfKernel {
    pub k: i64,
    pub p: i64,
    pub matrix: CMatrix,
}

impl AfKernel {
    pub fn new(k: i64, p: i64, n: usize) -> Result<Self> {
        check_length(n)?;
        check_lag(k, n)?;
        let mut matrix = CMatrix::zeros(n, n);
        for i in 0..n {
            let j = (i as i64 + k).rem_euclid(n as i64) as usize;
            matrix[(i, j)] = phasor(i as i64 + 1, p, n);
        }
        Ok(Self { k, p, matrix })
    }

    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    /// `x^H A x`.
    pub fn apply(&self, x: &CodeSequence) -> C64 {
        quad_form(&x.to_vector(), &self.matrix)
    }
}

/// Direct cyclic sum for `r[k, p]`.
pub fn eval_af(x: &CodeSequence, k: i64, p: i64) -> Result<C64> {
    let n = x.len();
    check_lag(k, n)?;
    check_bin(p, n)?;
    Ok(af_unchecked(&x.entries(), k, p))
}

fn af_unchecked(x: &[C64], k: i64, p: i64) -> C64 {
    let n = x.len();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        let j = (i as i64 - k).rem_euclid(n as i64) as usize;
        acc += x[i] * x[j].conj() * phasor(j as i64 + 1, p, n);
    }
    acc
}

/// Region energy `C = sum_{k in K} sum_{p in P} |r[k, p]|^2`.
pub fn eval_objective(x: &CodeSequence, region: &RegionSpec) -> Result<f64> {
    if region.n() != x.len() {
        return Err(Error::LengthMismatch(region.n(), x.len()));
    }
    let entries = x.entries();
    Ok(region
        .cells()
        .map(|(k, p)| af_unchecked(&entries, k, p).norm_sqr())
        .sum())
}

/// `20 log10(|r| / N)`, clipped to `[DB_FLOOR, 0]`.
pub fn level_db(magnitude: f64, n: usize) -> f64 {
    let db = 20.0 * (magnitude / n as f64).log10();
    if db.is_nan() {
        DB_FLOOR
    } else {
        db.clamp(DB_FLOOR, 0.0)
    }
}

/// `|r[k, p]|` over every lag `-N+1..=N-1` and every grid bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AfGrid {
    pub n: usize,
    pub lags: Vec<i64>,
    pub bins: Vec<i64>,
    /// Row per lag, column per bin.
    pub magnitude: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct AfGridJson<'a> {
    n: usize,
    lags: &'a [i64],
    bins: &'a [i64],
    magnitude: &'a [Vec<f64>],
    magnitude_db: Vec<Vec<f64>>,
}

pub fn af_grid(x: &CodeSequence) -> AfGrid {
    let n = x.len();
    let entries = x.entries();
    let lags: Vec<i64> = (-(n as i64) + 1..n as i64).collect();
    let bins = grid_bins(n);
    let magnitude = lags
        .iter()
        .map(|&k| {
            bins.iter()
                .map(|&p| af_unchecked(&entries, k, p).norm())
                .collect()
        })
        .collect();
    AfGrid {
        n,
        lags,
        bins,
        magnitude,
    }
}

impl AfGrid {
    pub fn get(&self, k: i64, p: i64) -> Option<f64> {
        let row = self.lags.iter().position(|&l| l == k)?;
        let col = self.bins.iter().position(|&b| b == p)?;
        Some(self.magnitude[row][col])
    }

    /// Mainlobe-normalized dB view.
    pub fn magnitude_db(&self) -> Vec<Vec<f64>> {
        self.magnitude
            .iter()
            .map(|row| row.iter().map(|&m| level_db(m, self.n)).collect())
            .collect()
    }

    fn write_table<W: Write>(&self, out: W, table: &[Vec<f64>]) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["lag".to_string()];
        header.extend(self.bins.iter().map(|b| b.to_string()));
        w.write_record(&header)?;
        for (lag, row) in self.lags.iter().zip(table) {
            let mut rec = vec![lag.to_string()];
            rec.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Linear magnitudes; header row holds the bin indices, first column the lag.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        self.write_table(out, &self.magnitude)
    }

    pub fn write_db_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        self.write_table(out, &self.magnitude_db())
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(AfGridJson {
            n: self.n,
            lags: &self.lags,
            bins: &self.bins,
            magnitude: &self.magnitude,
            magnitude_db: self.magnitude_db(),
        })
        .expect("grid serializes")
    }
}
