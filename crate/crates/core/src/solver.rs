//! Cyclic minimization of the auxiliary-vector problem
//!
//! ```text
//! min  sum_{k,p} ||Ar_t^{1/2} x - sqrt(zeta N) u_r||^2 + ||Ai_t^{1/2} x - sqrt(zeta N) u_i||^2
//! s.t. |x_n| = 1,  ||u_r|| = ||u_i|| = 1
//! ```
//!
//! alternating a unimodular quadratic program in `x` (solved by
//! power-method-like iterations on `D_x = gamma_x I - B_x`) with the
//! closed-form normalization updates of the auxiliary vectors.

use std::f64::consts::TAU;
use std::io::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::af::{check_length, eval_objective, CodeSequence, RegionSpec};
use crate::error::{Error, Result};
use crate::linalg::{frobenius_norm, max_eigenvalue, quad_form, CMatrix, CVector, C64};
use crate::reformulation::{LoadedSet, ZetaPolicy, DEFAULT_DELTA};

pub const DEFAULT_GAMMA1: usize = 1000;
pub const DEFAULT_GAMMA2: usize = 500;
pub const DEFAULT_EPSILON: f64 = 1e-6;

/// How `gamma_x` is chosen above the largest eigenvalue of `B_x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GammaPolicy {
    /// Frobenius norm of `B_x`.
    #[default]
    Frobenius,
    /// Largest eigenvalue plus a relative margin of 1e-9.
    Exact,
}

impl std::str::FromStr for GammaPolicy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "frobenius" => Ok(GammaPolicy::Frobenius),
            "exact" => Ok(GammaPolicy::Exact),
            other => Err(format!(
                "unknown gamma policy `{other}` (expected frobenius or exact)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub region: RegionSpec,
    /// Cap on outer iterations.
    pub gamma1: usize,
    /// PMLI steps per outer iteration.
    pub gamma2: usize,
    /// Relative change of the region energy that stops the outer loop.
    pub epsilon: f64,
    pub seed: u64,
    pub zeta_policy: ZetaPolicy,
    pub delta: f64,
    #[serde(default)]
    pub gamma_policy: GammaPolicy,
    /// Optional early exit for the inner loop on relative UQP change.
    #[serde(default)]
    pub inner_epsilon: Option<f64>,
    /// Keep every inner UQP objective value in the trace.
    #[serde(default)]
    pub record_inner: bool,
}

impl SolverConfig {
    pub fn new(region: RegionSpec) -> Self {
        Self {
            region,
            gamma1: DEFAULT_GAMMA1,
            gamma2: DEFAULT_GAMMA2,
            epsilon: DEFAULT_EPSILON,
            seed: 0,
            zeta_policy: ZetaPolicy::Exact,
            delta: DEFAULT_DELTA,
            gamma_policy: GammaPolicy::Frobenius,
            inner_epsilon: None,
            record_inner: false,
        }
    }

    pub fn n(&self) -> usize {
        self.region.n()
    }

    pub fn validate(&self) -> Result<()> {
        // re-run region checks in case the config was deserialized
        RegionSpec::new(
            self.region.n(),
            self.region.lags().iter().copied(),
            self.region.bins().iter().copied(),
        )?;
        if self.gamma1 < 1 {
            return Err(Error::InvalidConfig {
                field: "gamma1",
                reason: "must be at least 1".into(),
            });
        }
        if self.gamma2 < 1 {
            return Err(Error::InvalidConfig {
                field: "gamma2",
                reason: "must be at least 1".into(),
            });
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidConfig {
                field: "epsilon",
                reason: format!("must be positive, got {}", self.epsilon),
            });
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::InvalidConfig {
                field: "delta",
                reason: format!("must be positive, got {}", self.delta),
            });
        }
        if let Some(e) = self.inner_epsilon {
            if !(e > 0.0 && e.is_finite()) {
                return Err(Error::InvalidConfig {
                    field: "inner_epsilon",
                    reason: format!("must be positive, got {e}"),
                });
            }
        }
        Ok(())
    }
}

/// Phases i.i.d. uniform on `[0, 2 pi)`, reproducible from `seed`.
pub fn init_random_code(n: usize, seed: u64) -> Result<CodeSequence> {
    check_length(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    CodeSequence::from_phases((0..n).map(|_| rng.random::<f64>() * TAU).collect())
}

/// Unit vectors `u_r`, `u_i` per region cell, in `RegionSpec::cells` order.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxiliarySet {
    pub cells: Vec<(i64, i64)>,
    pub u_r: Vec<CVector>,
    pub u_i: Vec<CVector>,
}

impl AuxiliarySet {
    pub fn get(&self, k: i64, p: i64) -> Option<(&CVector, &CVector)> {
        let i = self.cells.iter().position(|&c| c == (k, p))?;
        Some((&self.u_r[i], &self.u_i[i]))
    }
}

fn normalized(v: CVector, what: &str, k: i64, p: i64) -> Result<CVector> {
    let norm = v.norm();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::Numerical(format!(
            "{what} product has norm {norm} at (k, p) = ({k}, {p})"
        )));
    }
    Ok(v.unscale(norm))
}

/// Closed-form minimizer over the auxiliary vectors with `x` fixed:
/// `u = A_t^{1/2} x / ||A_t^{1/2} x||`.
pub fn update_aux(x: &CodeSequence, loaded: &LoadedSet) -> Result<AuxiliarySet> {
    if x.len() != loaded.n {
        return Err(Error::LengthMismatch(loaded.n, x.len()));
    }
    let v = x.to_vector();
    let mut aux = AuxiliarySet {
        cells: Vec::with_capacity(loaded.pairs.len()),
        u_r: Vec::with_capacity(loaded.pairs.len()),
        u_i: Vec::with_capacity(loaded.pairs.len()),
    };
    for pair in &loaded.pairs {
        aux.cells.push((pair.k, pair.p));
        aux.u_r
            .push(normalized(&pair.ar_sqrt * &v, "real root", pair.k, pair.p)?);
        aux.u_i.push(normalized(
            &pair.ai_sqrt * &v,
            "imaginary root",
            pair.k,
            pair.p,
        )?);
    }
    Ok(aux)
}

/// Sum-of-norms objective of the auxiliary-vector problem.
pub fn m2_objective(x: &CodeSequence, aux: &AuxiliarySet, loaded: &LoadedSet) -> f64 {
    let v = x.to_vector();
    let rho = loaded.radius();
    loaded
        .pairs
        .iter()
        .zip(aux.u_r.iter().zip(&aux.u_i))
        .map(|(pair, (ur, ui))| {
            (&pair.ar_sqrt * &v - ur * C64::new(rho, 0.0)).norm_squared()
                + (&pair.ai_sqrt * &v - ui * C64::new(rho, 0.0)).norm_squared()
        })
        .sum()
}

/// `x̄^H D x̄` with `x̄ = [x; 1]`.
pub fn uqp_objective(d: &CMatrix, x: &CodeSequence) -> f64 {
    quad_form(&augmented(x), d).re
}

fn augmented(x: &CodeSequence) -> CVector {
    let n = x.len();
    CVector::from_fn(n + 1, |i, _| {
        if i < n {
            x.entry(i)
        } else {
            C64::new(1.0, 0.0)
        }
    })
}

/// The UQP for one outer iteration.
#[derive(Debug, Clone)]
pub struct Uqp {
    /// `s_x = -sqrt(zeta N) sum (Ar_t^{1/2} u_r + Ai_t^{1/2} u_i)`
    pub s: CVector,
    /// `B_x = [[R, s_x], [s_x^H, 0]]`
    pub b: CMatrix,
    pub gamma: f64,
    /// `D_x = gamma_x I - B_x`
    pub d: CMatrix,
    /// `x̄^H B_x x̄ + constant` equals the auxiliary-vector objective.
    pub constant: f64,
}

/// Builds `B_x` and `D_x` from the current auxiliary vectors. `loaded_sum` is
/// `R = sum (Ar_t + Ai_t)`.
pub fn build_uqp(
    aux: &AuxiliarySet,
    loaded: &LoadedSet,
    loaded_sum: &CMatrix,
    policy: GammaPolicy,
) -> Uqp {
    let n = loaded.n;
    let rho = loaded.radius();
    let mut acc = CVector::zeros(n);
    let mut unit_mass = 0.0;
    for (pair, (ur, ui)) in loaded.pairs.iter().zip(aux.u_r.iter().zip(&aux.u_i)) {
        acc += &pair.ar_sqrt * ur;
        acc += &pair.ai_sqrt * ui;
        unit_mass += ur.norm_squared() + ui.norm_squared();
    }
    let s = acc * C64::new(-rho, 0.0);

    let mut b = CMatrix::zeros(n + 1, n + 1);
    b.view_mut((0, 0), (n, n)).copy_from(loaded_sum);
    for i in 0..n {
        b[(i, n)] = s[i];
        b[(n, i)] = s[i].conj();
    }

    let gamma = match policy {
        GammaPolicy::Frobenius => frobenius_norm(&b),
        GammaPolicy::Exact => {
            let top = max_eigenvalue(&b);
            top + 1e-9 * top.abs().max(1.0)
        }
    };
    let d = CMatrix::identity(n + 1, n + 1) * C64::new(gamma, 0.0) - &b;
    Uqp {
        s,
        b,
        gamma,
        d,
        constant: rho * rho * unit_mass,
    }
}

#[derive(Debug, Clone, Default)]
pub struct PmliOptions {
    pub iterations: usize,
    pub inner_epsilon: Option<f64>,
    pub record: bool,
}

#[derive(Debug, Clone)]
pub struct PmliOutcome {
    pub code: CodeSequence,
    pub steps: usize,
    /// UQP objective before the first step and after each step, when recorded.
    pub objectives: Vec<f64>,
}

/// Power-method-like iterations `x <- exp(j arg([I 0] D x̄))` with the last
/// entry of `x̄` pinned to 1.
///
/// An exactly-zero entry of `D x̄` keeps its previous phase.
pub fn pmli(d: &CMatrix, x_start: &CodeSequence, opts: &PmliOptions) -> PmliOutcome {
    let n = x_start.len();
    assert_eq!(d.nrows(), n + 1, "UQP matrix must be (N+1)x(N+1)");
    let mut phases = x_start.phases().to_vec();
    let mut xbar = CVector::from_fn(n + 1, |i, _| {
        if i < n {
            C64::from_polar(1.0, phases[i])
        } else {
            C64::new(1.0, 0.0)
        }
    });
    let mut y = CVector::zeros(n + 1);
    let one = C64::new(1.0, 0.0);
    let zero = C64::new(0.0, 0.0);
    let track = opts.record || opts.inner_epsilon.is_some();
    let mut objectives = Vec::new();
    let mut last = f64::NAN;
    if track {
        last = xbar.dotc(&(d * &xbar)).re;
        if opts.record {
            objectives.push(last);
        }
    }

    let mut steps = 0;
    while steps < opts.iterations {
        y.gemv(one, d, &xbar, zero);
        for i in 0..n {
            let yi = y[i];
            if yi.re != 0.0 || yi.im != 0.0 {
                phases[i] = yi.arg();
                xbar[i] = C64::from_polar(1.0, phases[i]);
            }
        }
        steps += 1;
        if track {
            y.gemv(one, d, &xbar, zero);
            let value = xbar.dotc(&y).re;
            if opts.record {
                objectives.push(value);
            }
            if let Some(eps) = opts.inner_epsilon {
                if (value - last).abs() <= eps * last.abs() {
                    break;
                }
            }
            last = value;
        }
    }
    PmliOutcome {
        code: CodeSequence::from_phases(phases).expect("phases stay finite"),
        steps,
        objectives,
    }
}

/// Exactly `gamma2` PMLI steps from `x_start`.
pub fn pmli_inner(d: &CMatrix, x_start: &CodeSequence, gamma2: usize) -> CodeSequence {
    pmli(
        d,
        x_start,
        &PmliOptions {
            iterations: gamma2,
            ..Default::default()
        },
    )
    .code
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    /// 0 is the initial code.
    pub outer_iter: usize,
    /// Region energy on the quartic criterion.
    pub c: f64,
    /// Auxiliary-vector objective after the u-update.
    pub m2_objective: f64,
    /// Auxiliary-vector objective after the x-update, before the u-update.
    pub m2_after_x: f64,
    pub elapsed_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Tolerance,
    MaxIterations,
    ZeroObjective,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTrace {
    pub rows: Vec<TraceRow>,
    /// Per outer iteration, the inner UQP objective sequence (verbose runs only).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub inner: Vec<Vec<f64>>,
    pub stop: StopReason,
}

impl ConvergenceTrace {
    pub fn initial_c(&self) -> f64 {
        self.rows[0].c
    }

    pub fn final_c(&self) -> f64 {
        self.rows.last().expect("trace has the initial row").c
    }

    pub fn outer_iterations(&self) -> usize {
        self.rows.len() - 1
    }

    /// Columns `outer_iter,C,m2_objective,elapsed_ms`. Wall time is left
    /// blank unless `with_timing`, so untimed traces are reproducible byte
    /// for byte.
    pub fn write_csv<W: Write>(&self, out: W, with_timing: bool) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["outer_iter", "C", "m2_objective", "elapsed_ms"])?;
        for row in &self.rows {
            let elapsed = if with_timing {
                format!("{:.3}", row.elapsed_ms)
            } else {
                String::new()
            };
            w.write_record([
                row.outer_iter.to_string(),
                row.c.to_string(),
                row.m2_objective.to_string(),
                elapsed,
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Long format `outer_iter,inner_iter,uqp_objective`.
    pub fn write_inner_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["outer_iter", "inner_iter", "uqp_objective"])?;
        for (t, seq) in self.inner.iter().enumerate() {
            for (s, v) in seq.iter().enumerate() {
                w.write_record([(t + 1).to_string(), s.to_string(), v.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Iterate state of one run.
#[derive(Debug, Clone)]
pub struct SolverState<'a> {
    pub x: CodeSequence,
    pub aux: AuxiliarySet,
    pub outer_iter: usize,
    pub loaded: &'a LoadedSet,
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub initial: CodeSequence,
    pub code: CodeSequence,
    pub trace: ConvergenceTrace,
    pub zeta: f64,
}

/// Loop-invariant data of a run: loaded pairs and their sum.
#[derive(Debug, Clone)]
pub struct Solver {
    config: SolverConfig,
    loaded: LoadedSet,
    loaded_sum: CMatrix,
}

impl Solver {
    pub fn new(config: SolverConfig) -> Result<Self> {
        config.validate()?;
        let loaded = LoadedSet::build(&config.region, config.zeta_policy, config.delta)?;
        let loaded_sum = loaded.loaded_sum();
        Ok(Self {
            config,
            loaded,
            loaded_sum,
        })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn loaded(&self) -> &LoadedSet {
        &self.loaded
    }

    pub fn loaded_sum(&self) -> &CMatrix {
        &self.loaded_sum
    }

    /// Starting state: the given code with its conditionally optimal auxiliary vectors.
    pub fn start(&self, x0: CodeSequence) -> Result<SolverState<'_>> {
        let aux = update_aux(&x0, &self.loaded)?;
        Ok(SolverState {
            x: x0,
            aux,
            outer_iter: 0,
            loaded: &self.loaded,
        })
    }

    /// One outer iteration. Returns the PMLI outcome and the objective after
    /// the x-block.
    pub fn step(&self, state: &mut SolverState<'_>) -> Result<(PmliOutcome, f64)> {
        let uqp = build_uqp(
            &state.aux,
            &self.loaded,
            &self.loaded_sum,
            self.config.gamma_policy,
        );
        let outcome = pmli(
            &uqp.d,
            &state.x,
            &PmliOptions {
                iterations: self.config.gamma2,
                inner_epsilon: self.config.inner_epsilon,
                record: self.config.record_inner,
            },
        );
        state.x = outcome.code.clone();
        let m2_after_x = m2_objective(&state.x, &state.aux, &self.loaded);
        state.aux = update_aux(&state.x, &self.loaded)?;
        state.outer_iter += 1;
        Ok((outcome, m2_after_x))
    }

    pub fn run_from(&self, x0: CodeSequence) -> Result<SolveOutcome> {
        if x0.len() != self.config.n() {
            return Err(Error::LengthMismatch(self.config.n(), x0.len()));
        }
        let clock = Instant::now();
        let region = &self.config.region;
        let mut state = self.start(x0.clone())?;
        let c0 = eval_objective(&state.x, region)?;
        let m0 = m2_objective(&state.x, &state.aux, &self.loaded);
        let mut rows = vec![TraceRow {
            outer_iter: 0,
            c: c0,
            m2_objective: m0,
            m2_after_x: m0,
            elapsed_ms: 0.0,
        }];
        let mut inner = Vec::new();
        let mut stop = StopReason::MaxIterations;
        let mut prev = c0;
        if prev == 0.0 {
            stop = StopReason::ZeroObjective;
        } else {
            for _ in 0..self.config.gamma1 {
                let (outcome, m2_after_x) = self.step(&mut state)?;
                if self.config.record_inner {
                    inner.push(outcome.objectives);
                }
                let c = eval_objective(&state.x, region)?;
                if !c.is_finite() {
                    return Err(Error::Numerical(format!(
                        "objective became {c} at outer iteration {}",
                        state.outer_iter
                    )));
                }
                rows.push(TraceRow {
                    outer_iter: state.outer_iter,
                    c,
                    m2_objective: m2_objective(&state.x, &state.aux, &self.loaded),
                    m2_after_x,
                    elapsed_ms: clock.elapsed().as_secs_f64() * 1e3,
                });
                if c == 0.0 {
                    stop = StopReason::ZeroObjective;
                    break;
                }
                if ((c - prev) / prev).abs() <= self.config.epsilon {
                    stop = StopReason::Tolerance;
                    break;
                }
                prev = c;
            }
        }
        Ok(SolveOutcome {
            initial: x0,
            code: state.x,
            trace: ConvergenceTrace { rows, inner, stop },
            zeta: self.loaded.zeta,
        })
    }
}

/// Full run from the seeded random start.
pub fn run(config: &SolverConfig) -> Result<SolveOutcome> {
    let solver = Solver::new(config.clone())?;
    let x0 = init_random_code(config.n(), config.seed)?;
    solver.run_from(x0)
}
