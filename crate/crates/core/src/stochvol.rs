//! Lognormal stochastic volatility experiments.
//!
//! ```text
//! dX = e^Y X dZ,   dY = (μ - γY) dt + ν dW,   dZ = ρ dW + √(1-ρ²) dZ̃
//! ```
//!
//! `E[X_t]/x0` is estimated by simulation (log-Euler in X, Euler in Y) and
//! computed exactly at small `n` by tensor Gauss–Hermite quadrature. The
//! martingale defect equals the explosion probability of the tilted process
//! `dY = b(Y) dt + ν dW` with `b(y) = ρν e^y + μ - γy`, estimated through the
//! barrier survival probabilities `I_n^M`.
//!
//! Monte Carlo paths use one ChaCha8 stream per path index and are reduced
//! in fixed-size chunks in path order, so results do not depend on the
//! number of worker threads.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quadrature::{gauss_hermite_normal, gauss_legendre, Rule};
use crate::scalar::{norm_cdf, CompensatedSum, Scalar};

/// `e^Y` overflows beyond this; such paths are flagged exploded.
pub const Y_GUARD: f64 = 700.0;

const CHUNK: usize = 1024;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StochVolError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("quadrature supports at most {max} steps, got {got}")]
    TooManySteps { max: usize, got: usize },
    #[error("change of variables is degenerate for ν = 0")]
    ZeroVolOfVol,
    #[error("need at least {0} grid values")]
    GridTooSmall(usize),
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SVParams<T> {
    pub x0: T,
    pub y0: T,
    #[serde(alias = "mu_drift")]
    pub mu: T,
    pub gamma: T,
    pub nu: T,
    pub rho: T,
    pub t: T,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Benign,
    Explosive,
}

impl<T: Scalar> SVParams<T> {
    pub fn preset(p: Preset) -> Self {
        let (rho, nu, gamma) = match p {
            Preset::Benign => (-0.5, 0.5, 1.0),
            Preset::Explosive => (0.9, 1.5, 0.0),
        };
        Self {
            x0: T::one(),
            y0: T::zero(),
            mu: T::zero(),
            gamma: T::lit(gamma),
            nu: T::lit(nu),
            rho: T::lit(rho),
            t: T::lit(5.0),
            n: 64,
        }
    }

    pub fn with_steps(mut self, n: usize) -> Self {
        self.n = n;
        self
    }

    pub fn validate(&self) -> Result<(), StochVolError> {
        let bad = |m: &str| Err(StochVolError::InvalidParams(m.to_string()));
        let all_finite = [self.x0, self.y0, self.mu, self.gamma, self.nu, self.rho, self.t]
            .iter()
            .all(|v| v.is_finite());
        if !all_finite {
            return bad("non-finite parameter");
        }
        if !(self.x0 > T::zero()) {
            return bad("x0 must be positive");
        }
        if self.nu < T::zero() {
            return bad("nu must be non-negative");
        }
        if self.rho.abs() > T::one() {
            return bad("rho must lie in [-1, 1]");
        }
        if !(self.t > T::zero()) {
            return bad("t must be positive");
        }
        if self.n == 0 {
            return bad("n must be at least 1");
        }
        Ok(())
    }

    pub fn dt(&self) -> T {
        self.t / T::from_usize(self.n).unwrap()
    }

    /// Drift of the untilted log-volatility.
    fn drift(&self, y: T) -> T {
        self.mu - self.gamma * y
    }

    /// Tilted drift `b(y) = ρν e^y + μ - γy`.
    pub fn tilted_drift(&self, y: T) -> T {
        self.rho * self.nu * y.exp() + self.mu - self.gamma * y
    }
}

/// Euler path `Y_{i+1} = Y_i + (μ - γY_i)Δt + ν√Δt z_i` (length `n + 1`).
pub fn simulate_y_path<T: Scalar>(p: &SVParams<T>, normals: &[T]) -> Vec<T> {
    let dt = p.dt();
    let sq = dt.sqrt();
    let mut y = Vec::with_capacity(normals.len() + 1);
    y.push(p.y0);
    for &z in normals.iter().take(p.n) {
        let last = *y.last().expect("non-empty");
        y.push(last + p.drift(last) * dt + p.nu * sq * z);
    }
    y
}

/// Monte Carlo settings. `workers = None` uses the global rayon pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McConfig {
    pub paths: usize,
    pub seed: u64,
    #[serde(default)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Naive,
    Conditioned,
    Barrier,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorReport<T> {
    pub estimate: T,
    pub stderr: T,
    pub paths: usize,
    pub n: usize,
    pub scheme: Scheme,
    pub seed: u64,
    /// Paths on which `Y` crossed the overflow guard.
    pub exploded: usize,
    /// Wall-clock seconds; kept out of serialized output so reruns compare
    /// bit-for-bit.
    #[serde(skip)]
    pub elapsed_seconds: f64,
}

impl<T: Scalar> EstimatorReport<T> {
    pub fn variance(&self) -> T {
        self.stderr * self.stderr * T::from_usize(self.paths).unwrap()
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Moments<T> {
    sum: CompensatedSum<T>,
    sum_sq: CompensatedSum<T>,
    count: usize,
}

impl<T: Scalar> Moments<T> {
    fn push(&mut self, x: T) {
        self.sum.add(x);
        self.sum_sq.add(x * x);
        self.count += 1;
    }

    fn merge(&mut self, o: &Self) {
        self.sum.merge(&o.sum);
        self.sum_sq.merge(&o.sum_sq);
        self.count += o.count;
    }

    fn mean(&self) -> T {
        self.sum.value() / T::from_usize(self.count.max(1)).unwrap()
    }

    fn stderr(&self) -> T {
        if self.count < 2 {
            return T::zero();
        }
        let n = T::from_usize(self.count).unwrap();
        let s = self.sum.value();
        let var = ((self.sum_sq.value() - s * s / n) / (n - T::one())).max(T::zero());
        (var / n).sqrt()
    }
}

struct ChunkResult<T> {
    moments: Vec<Moments<T>>,
    exploded: usize,
}

fn path_rng(seed: u64, path: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path as u64);
    rng
}

fn normal<T: Scalar>(rng: &mut ChaCha8Rng) -> T {
    T::lit(rng.sample::<f64, _>(StandardNormal))
}

/// Runs `f` once per path; `f` writes `k` values and returns whether the
/// path exploded. Chunks are reduced in path order.
fn run_paths<T, F>(cfg: &McConfig, k: usize, f: F) -> Result<(Vec<Moments<T>>, usize), StochVolError>
where
    T: Scalar,
    F: Fn(&mut ChaCha8Rng, &mut [T]) -> bool + Sync,
{
    let chunks = cfg.paths.div_ceil(CHUNK);
    let work = || -> Vec<ChunkResult<T>> {
        (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut moments = vec![Moments::default(); k];
                let mut exploded = 0;
                let mut buf = vec![T::zero(); k];
                for path in c * CHUNK..((c + 1) * CHUNK).min(cfg.paths) {
                    let mut rng = path_rng(cfg.seed, path);
                    if f(&mut rng, &mut buf) {
                        exploded += 1;
                    }
                    for (m, &v) in moments.iter_mut().zip(&buf) {
                        m.push(v);
                    }
                }
                ChunkResult { moments, exploded }
            })
            .collect()
    };
    let results = match cfg.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .map_err(|e| StochVolError::ThreadPool(e.to_string()))?
            .install(work),
        None => work(),
    };
    let mut total = vec![Moments::default(); k];
    let mut exploded = 0;
    for r in &results {
        for (t, m) in total.iter_mut().zip(&r.moments) {
            t.merge(m);
        }
        exploded += r.exploded;
    }
    Ok((total, exploded))
}

fn check_mc<T: Scalar>(p: &SVParams<T>, cfg: &McConfig) -> Result<(), StochVolError> {
    p.validate()?;
    if cfg.paths == 0 {
        return Err(StochVolError::InvalidParams("paths must be at least 1".into()));
    }
    Ok(())
}

fn report<T: Scalar>(
    m: &Moments<T>,
    exploded: usize,
    p: &SVParams<T>,
    cfg: &McConfig,
    scheme: Scheme,
    start: Instant,
) -> EstimatorReport<T> {
    EstimatorReport {
        estimate: m.mean(),
        stderr: m.stderr(),
        paths: cfg.paths,
        n: p.n,
        scheme,
        seed: cfg.seed,
        exploded,
        elapsed_seconds: start.elapsed().as_secs_f64(),
    }
}

/// `E[X_t]/x0` by log-Euler: `X_{i+1} = X_i exp(e^{Y_i} ΔZ_i - ½ e^{2Y_i} Δt)`.
/// Exploded paths contribute zero and are counted.
pub fn naive_estimator<T: Scalar>(p: &SVParams<T>, cfg: &McConfig) -> Result<EstimatorReport<T>, StochVolError> {
    check_mc(p, cfg)?;
    let start = Instant::now();
    let dt = p.dt();
    let sq = dt.sqrt();
    let half = T::lit(0.5);
    let rho_bar = (T::one() - p.rho * p.rho).max(T::zero()).sqrt();
    let guard = T::lit(Y_GUARD);
    let (m, exploded) = run_paths(cfg, 1, |rng, out| {
        let mut y = p.y0;
        let mut log_x = T::zero();
        for _ in 0..p.n {
            let z1: T = normal(rng);
            let z2: T = normal(rng);
            if y > guard {
                out[0] = T::zero();
                return true;
            }
            let vol = y.exp();
            let dw = sq * z1;
            let dz = p.rho * dw + rho_bar * sq * z2;
            log_x += vol * dz - half * vol * vol * dt;
            y += p.drift(y) * dt + p.nu * dw;
        }
        let x = log_x.exp();
        if y > guard || !x.is_finite() {
            out[0] = T::zero();
            return true;
        }
        out[0] = x;
        false
    })?;
    Ok(report(&m[0], exploded, p, cfg, Scheme::Naive, start))
}

/// Conditioning on `W`: averages `exp(ρ Σ e^{Y_i} ΔW_i - ½ρ² Σ e^{2Y_i} Δt)`.
/// Draws the same normals as [`naive_estimator`] so matched seeds share `W`.
pub fn conditioned_estimator<T: Scalar>(p: &SVParams<T>, cfg: &McConfig) -> Result<EstimatorReport<T>, StochVolError> {
    check_mc(p, cfg)?;
    let start = Instant::now();
    let dt = p.dt();
    let sq = dt.sqrt();
    let half = T::lit(0.5);
    let guard = T::lit(Y_GUARD);
    let (m, exploded) = run_paths(cfg, 1, |rng, out| {
        let mut y = p.y0;
        let mut expo = T::zero();
        for _ in 0..p.n {
            let z1: T = normal(rng);
            let _unused: T = normal(rng);
            if y > guard {
                out[0] = T::zero();
                return true;
            }
            let vol = y.exp();
            let dw = sq * z1;
            expo += p.rho * vol * dw - half * p.rho * p.rho * vol * vol * dt;
            y += p.drift(y) * dt + p.nu * dw;
        }
        let v = expo.exp();
        if !v.is_finite() {
            out[0] = T::zero();
            return true;
        }
        out[0] = v;
        false
    })?;
    Ok(report(&m[0], exploded, p, cfg, Scheme::Conditioned, start))
}

/// Runs the tilted Euler path until it reaches `stop` or overflows. Returns
/// the running maximum of `Y_1..Y_n` (`+∞` on overflow).
fn tilted_max<T: Scalar>(p: &SVParams<T>, rng: &mut ChaCha8Rng, stop: T) -> T {
    let dt = p.dt();
    let sq = dt.sqrt();
    let guard = T::lit(Y_GUARD);
    let mut y = p.y0;
    let mut max = T::neg_infinity();
    for _ in 0..p.n {
        let z: T = normal(rng);
        y = y + p.tilted_drift(y) * dt + p.nu * sq * z;
        if !(y <= guard) {
            return T::infinity();
        }
        max = max.max(y);
        if max >= stop {
            break;
        }
    }
    max
}

/// `I_n^M = P(Y_1, …, Y_n < M)` for the tilted Euler scheme. Overflow counts
/// as a crossing and is reported.
pub fn barrier_survival<T: Scalar>(
    p: &SVParams<T>,
    barrier: T,
    cfg: &McConfig,
) -> Result<EstimatorReport<T>, StochVolError> {
    check_mc(p, cfg)?;
    if !(barrier > p.y0) {
        return Err(StochVolError::InvalidParams("barrier must exceed y0".into()));
    }
    let start = Instant::now();
    let (m, exploded) = run_paths(cfg, 1, |rng, out| {
        let max = tilted_max(p, rng, barrier);
        out[0] = if max < barrier { T::one() } else { T::zero() };
        max.is_infinite()
    })?;
    Ok(report(&m[0], exploded, p, cfg, Scheme::Barrier, start))
}

/// `I_n^M` by nested Gauss–Legendre over each normal increment (`n ≤ 3`),
/// with the last step in closed form.
pub fn barrier_quadrature<T: Scalar>(p: &SVParams<T>, barrier: T, panels: usize) -> Result<T, StochVolError> {
    p.validate()?;
    if p.n > 3 {
        return Err(StochVolError::TooManySteps { max: 3, got: p.n });
    }
    if p.nu == T::zero() {
        return Err(StochVolError::ZeroVolOfVol);
    }
    let rule: Rule<T> = gauss_legendre(16);
    let dt = p.dt();
    let s = p.nu * dt.sqrt();
    #[allow(clippy::too_many_arguments)]
    fn level<T: Scalar>(
        p: &SVParams<T>,
        rule: &Rule<T>,
        panels: usize,
        barrier: T,
        dt: T,
        s: T,
        y: T,
        left: usize,
    ) -> T {
        let mean = y + p.tilted_drift(y) * dt;
        if !mean.is_finite() {
            return T::zero();
        }
        let z_max = (barrier - mean) / s;
        if left == 1 {
            return norm_cdf(z_max);
        }
        let lo = T::lit(-12.0);
        if z_max <= lo {
            return T::zero();
        }
        let hi = z_max.min(T::lit(12.0));
        crate::quadrature::integrate_panels(
            |z: T| crate::scalar::norm_pdf(z) * level(p, rule, panels, barrier, dt, s, mean + s * z, left - 1),
            lo,
            hi,
            &[],
            panels,
            rule,
        )
    }
    Ok(level(p, &rule, panels.max(1), barrier, dt, s, p.y0, p.n))
}

/// `∫ ∏ dΔY_i (2πν²Δt)^{-1/2} exp(-½ Σ [ΔY_i - b(Y_i)Δt]² / (ν²Δt))` by
/// recursive Gauss–Hermite: at each level the nodes are centred on
/// `b(Y_i)Δt` and the integrand is evaluated explicitly and divided by the
/// rule's weight function. Levels whose `Y_i` exceeds the overflow guard
/// are integrated to their exact value one.
pub fn quadrature_identity<T: Scalar>(p: &SVParams<T>, nodes: usize) -> Result<T, StochVolError> {
    p.validate()?;
    if p.n > 3 {
        return Err(StochVolError::TooManySteps { max: 3, got: p.n });
    }
    if p.nu == T::zero() {
        return Err(StochVolError::ZeroVolOfVol);
    }
    let rule: Rule<T> = gauss_hermite_normal(nodes);
    let dt = p.dt();
    let s = p.nu * dt.sqrt();
    let inv_norm = T::one() / (s * (T::lit(2.0) * T::PI()).sqrt());
    let guard = T::lit(Y_GUARD);
    #[allow(clippy::too_many_arguments)]
    fn level<T: Scalar>(p: &SVParams<T>, rule: &Rule<T>, dt: T, s: T, inv_norm: T, guard: T, y: T, left: usize) -> T {
        if left == 0 {
            return T::one();
        }
        if y > guard {
            return T::one();
        }
        let centre = p.tilted_drift(y) * dt;
        let half = T::lit(0.5);
        let mut acc = T::zero();
        for (z, w) in rule.iter() {
            // residual ΔY - b(Y)Δt is carried directly: recomputing it from
            // ΔY cancels catastrophically once b(Y) is large
            let resid = s * z;
            let dy = centre + resid;
            let e = resid / s;
            let density = inv_norm * (-half * e * e).exp();
            // weight function of the rule is φ(z); dΔY = s dz
            let ratio = density * s / crate::scalar::norm_pdf(z);
            acc += w * ratio * level(p, rule, dt, s, inv_norm, guard, y + dy, left - 1);
        }
        acc
    }
    Ok(level(p, &rule, dt, s, inv_norm, guard, p.y0, p.n))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChangeOfVariables<T> {
    /// `E_W[exp(ρ Σ e^{Y_i} ΔW_i - ½ρ² Σ e^{2Y_i} Δt)]`.
    pub dw_form: T,
    /// Tilted Gaussian density in `ΔY` with Jacobian `ν` per dimension.
    pub dy_form: T,
}

/// Evaluates both sides of the change of variables `ΔY_i = (μ - γY_i)Δt + ν ΔW_i`
/// on fixed tensor Gauss–Hermite grids (`n ≤ 2`).
pub fn change_of_variables_check<T: Scalar>(
    p: &SVParams<T>,
    nodes: usize,
) -> Result<ChangeOfVariables<T>, StochVolError> {
    p.validate()?;
    if p.n > 2 {
        return Err(StochVolError::TooManySteps { max: 2, got: p.n });
    }
    if p.nu == T::zero() {
        return Err(StochVolError::ZeroVolOfVol);
    }
    let rule: Rule<T> = gauss_hermite_normal(nodes);
    let dt = p.dt();
    let sq = dt.sqrt();
    let half = T::lit(0.5);
    let two_pi = T::lit(2.0) * T::PI();

    // ΔW form: normals z_i give ΔW_i = √Δt z_i.
    fn dw_level<T: Scalar>(p: &SVParams<T>, rule: &Rule<T>, dt: T, sq: T, y: T, left: usize) -> T {
        if left == 0 {
            return T::one();
        }
        let vol = y.exp();
        let half = T::lit(0.5);
        rule.iter()
            .map(|(z, w)| {
                let dw = sq * z;
                let factor = (p.rho * vol * dw - half * p.rho * p.rho * vol * vol * dt).exp();
                w * factor * dw_level(p, rule, dt, sq, y + p.drift(y) * dt + p.nu * dw, left - 1)
            })
            .sum()
    }

    // ΔY form: nodes ΔY = (μ - γY)Δt + ν√Δt z, integrand the tilted density.
    let s = p.nu * sq;
    let dy_level = |y0: T| -> T {
        let mut stack: Vec<(T, T, usize)> = vec![(y0, T::one(), p.n)];
        let mut total = T::zero();
        while let Some((y, weight, left)) = stack.pop() {
            if left == 0 {
                total += weight;
                continue;
            }
            let skeleton = p.drift(y) * dt;
            let tilted = p.tilted_drift(y) * dt;
            for (z, w) in rule.iter() {
                let dy = skeleton + s * z;
                let e = (dy - tilted) / s;
                let density = (-half * e * e).exp() / (s * two_pi.sqrt());
                let jac = s / crate::scalar::norm_pdf(z);
                stack.push((y + dy, weight * w * density * jac, left - 1));
            }
        }
        total
    };
    Ok(ChangeOfVariables {
        dw_form: dw_level(p, &rule, dt, sq, p.y0, p.n),
        dy_form: dy_level(p.y0),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepCell<T> {
    pub barrier: T,
    pub n: usize,
    pub estimate: T,
    pub stderr: T,
    pub exploded: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extrapolated<T> {
    pub barrier: T,
    pub value: T,
    pub stderr: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierSweepResult<T> {
    pub params: SVParams<T>,
    pub paths: usize,
    pub seed: u64,
    pub barriers: Vec<T>,
    pub steps: Vec<usize>,
    /// Row-major over `steps` then `barriers`.
    pub cells: Vec<SweepCell<T>>,
    /// `lim_n Î_n^M` per barrier (Richardson in `√Δt` over the two finest `n`).
    pub n_limit: Vec<Extrapolated<T>>,
    /// The largest-`M`, largest-`n` cell.
    pub corner: SweepCell<T>,
    /// `1 - lim_M lim_n Î`, read at the largest barrier.
    pub martingale_defect: T,
    pub martingale_defect_stderr: T,
    /// Corner below one by more than five standard errors.
    pub defect_detected: bool,
    /// `lim_n lim_M`: the fixed-`n` expectation, one by the Gaussian recursion.
    pub n_first_value: T,
    /// Largest drop of `Î` when `M` increases, in units of the pair's stderr.
    pub worst_monotonicity_violation: T,
}

impl<T: Scalar> BarrierSweepResult<T> {
    pub fn cell(&self, n: usize, barrier: T) -> Option<&SweepCell<T>> {
        self.cells.iter().find(|c| c.n == n && c.barrier == barrier)
    }
}

/// Survival table over barriers × step counts. One simulation per `n`
/// records each path's running maximum, so all barriers share paths.
pub fn limit_order_experiment<T: Scalar>(
    p: &SVParams<T>,
    barriers: &[T],
    steps: &[usize],
    cfg: &McConfig,
) -> Result<BarrierSweepResult<T>, StochVolError> {
    p.validate()?;
    if barriers.len() < 3 || steps.len() < 3 {
        return Err(StochVolError::GridTooSmall(3));
    }
    let mut barriers = barriers.to_vec();
    barriers.sort_by(|a, b| a.partial_cmp(b).expect("finite barriers"));
    let mut steps = steps.to_vec();
    steps.sort_unstable();
    if barriers[0] <= p.y0 {
        return Err(StochVolError::InvalidParams("barriers must exceed y0".into()));
    }
    let top = barriers[barriers.len() - 1];
    let mut cells = Vec::with_capacity(barriers.len() * steps.len());
    for &n in &steps {
        let pn = p.with_steps(n);
        check_mc(&pn, cfg)?;
        let k = barriers.len();
        let (moments, exploded) = run_paths(cfg, k, |rng, out| {
            let max = tilted_max(&pn, rng, top);
            for (o, &b) in out.iter_mut().zip(&barriers) {
                *o = if max < b { T::one() } else { T::zero() };
            }
            max.is_infinite()
        })?;
        for (m, &b) in moments.iter().zip(&barriers) {
            cells.push(SweepCell {
                barrier: b,
                n,
                estimate: m.mean(),
                stderr: m.stderr(),
                exploded,
            });
        }
    }
    let idx = |si: usize, bi: usize| si * barriers.len() + bi;
    let ns = steps.len();
    let c = T::one() / (T::lit(2.0).sqrt() - T::one());
    let n_limit: Vec<Extrapolated<T>> = (0..barriers.len())
        .map(|bi| {
            let fine = cells[idx(ns - 1, bi)];
            let coarse = cells[idx(ns - 2, bi)];
            let ratio = T::from_usize(fine.n).unwrap() / T::from_usize(coarse.n).unwrap();
            // Richardson for an error ∝ √Δt
            let cc = if ratio == T::lit(2.0) {
                c
            } else {
                T::one() / (ratio.sqrt() - T::one())
            };
            let value = fine.estimate + (fine.estimate - coarse.estimate) * cc;
            let stderr = (((T::one() + cc) * fine.stderr).powi(2) + (cc * coarse.stderr).powi(2)).sqrt();
            Extrapolated {
                barrier: barriers[bi],
                value,
                stderr,
            }
        })
        .collect();
    let corner = cells[idx(ns - 1, barriers.len() - 1)];
    let last = n_limit[n_limit.len() - 1];
    let mut worst = T::zero();
    for si in 0..ns {
        for bi in 1..barriers.len() {
            let (a, b) = (cells[idx(si, bi - 1)], cells[idx(si, bi)]);
            let drop = a.estimate - b.estimate;
            if drop > T::zero() {
                let se = (a.stderr * a.stderr + b.stderr * b.stderr).sqrt();
                worst = worst.max(if se > T::zero() { drop / se } else { T::infinity() });
            }
        }
    }
    let n_first_value = quadrature_identity(&p.with_steps(2), 64)?;
    Ok(BarrierSweepResult {
        params: *p,
        paths: cfg.paths,
        seed: cfg.seed,
        barriers,
        steps,
        defect_detected: T::one() - corner.estimate > T::lit(5.0) * corner.stderr,
        corner,
        martingale_defect: T::one() - last.value,
        martingale_defect_stderr: last.stderr,
        n_limit,
        n_first_value,
        worst_monotonicity_violation: worst,
        cells,
    })
}

/// Black–Scholes call; `σ√T = 0` gives the discounted intrinsic value.
pub fn bs_call<T: Scalar>(s0: T, k: T, sigma: T, t: T, r: T) -> T {
    let df = (-r * t).exp();
    let sd = sigma * t.sqrt();
    if sd == T::zero() {
        return (s0 - k * df).max(T::zero());
    }
    if k == T::zero() {
        return s0;
    }
    let d1 = ((s0 / k).ln() + r * t) / sd + sd / T::lit(2.0);
    let d2 = d1 - sd;
    s0 * norm_cdf(d1) - k * df * norm_cdf(d2)
}

pub fn bs_put<T: Scalar>(s0: T, k: T, sigma: T, t: T, r: T) -> T {
    let df = (-r * t).exp();
    let sd = sigma * t.sqrt();
    if sd == T::zero() {
        return (k * df - s0).max(T::zero());
    }
    if k == T::zero() {
        return T::zero();
    }
    let d1 = ((s0 / k).ln() + r * t) / sd + sd / T::lit(2.0);
    let d2 = d1 - sd;
    k * df * norm_cdf(-d2) - s0 * norm_cdf(-d1)
}

/// `σ²T → ∞`: calls at `S0`, puts at `K`.
pub fn infinite_variance_limit<T: Scalar>(s0: T, k: T) -> (T, T) {
    (s0, k)
}
