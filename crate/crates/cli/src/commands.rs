use std::path::{Path, PathBuf};

use anyhow::anyhow;
use posform::extension_lp::{
    certificate_residual, check_consistency, price_bounds, ArbitragePortfolio, Bound, Consistency, MarketSpec,
    PriceBounds,
};
use posform::kernel::{
    bs_generator_with, propagate, DriftScheme, GeneratorVerdict, KernelSpace, PricingKernelOperator, Stepping,
};
use posform::payoff_space::Payoff;
use posform::pricing_form::{
    implied_form_from_curve, validate_call_curve, CurveVerdict, GeneralizedPricingForm, ImpliedForm, ImpliedFormError,
    ImpliedFormOptions,
};
use posform::stochvol::{
    change_of_variables_check, conditioned_estimator, limit_order_experiment, naive_estimator, quadrature_identity,
    BarrierSweepResult, ChangeOfVariables, EstimatorReport, McConfig, Preset, SVParams,
};
use serde::{Deserialize, Serialize};

use crate::input::{read_curve, read_json};
use crate::output::{write_csv, write_json};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DETECTED: i32 = 2;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_NUMERIC: i32 = 70;

#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub error: anyhow::Error,
}

pub trait Classify<T> {
    /// Bad input: exit 64.
    fn usage(self) -> Result<T, Failure>;
    /// Numerical or internal failure: exit 70.
    fn numeric(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn usage(self) -> Result<T, Failure> {
        self.map_err(|e| Failure {
            code: EXIT_USAGE,
            error: e.into(),
        })
    }

    fn numeric(self) -> Result<T, Failure> {
        self.map_err(|e| Failure {
            code: EXIT_NUMERIC,
            error: e.into(),
        })
    }
}

/// What a finished subcommand reports back for the manifest.
#[derive(Debug, Default)]
pub struct Run {
    pub detected: bool,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    /// Printed on stdout.
    pub summary: String,
}

impl Run {
    fn new(inputs: &[&Path]) -> Self {
        Self {
            inputs: inputs.iter().map(|p| p.to_path_buf()).collect(),
            ..Self::default()
        }
    }

    fn json<T: Serialize + for<'de> Deserialize<'de>>(&mut self, path: PathBuf, value: &T) -> Result<(), Failure> {
        write_json(&path, value).numeric()?;
        if self.summary.is_empty() {
            self.summary = serde_json::to_string_pretty(value).numeric()?;
        }
        self.outputs.push(path);
        Ok(())
    }

    fn csv<R: Serialize + for<'de> Deserialize<'de>>(&mut self, path: PathBuf, rows: &[R]) -> Result<(), Failure> {
        write_csv(&path, rows).numeric()?;
        self.outputs.push(path);
        Ok(())
    }
}

fn sibling(primary: &Path, suffix: &str) -> PathBuf {
    let stem = primary
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    primary.with_file_name(format!("{stem}{suffix}"))
}

pub fn validate_curve(curve: &Path, spot: f64, tol: f64, out: PathBuf) -> Result<Run, Failure> {
    let c = read_curve(curve).usage()?;
    let verdict = validate_call_curve(&c, spot, tol).usage()?;
    let mut run = Run::new(&[curve]);
    run.detected = !verdict.ok;
    run.json(out, &verdict)?;
    Ok(run)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ImpliedFormFailure {
    pub reason: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<CurveVerdict<f64>>,
}

pub fn implied_form(curve: &Path, spot: f64, opts: &ImpliedFormOptions<f64>, out: PathBuf) -> Result<Run, Failure> {
    let c = read_curve(curve).usage()?;
    let mut run = Run::new(&[curve]);
    match implied_form_from_curve(&c, spot, opts) {
        Ok(form) => run.json(out, &form)?,
        Err(ImpliedFormError::Curve(e)) => return Err(e).usage(),
        Err(e @ ImpliedFormError::TailNotConverged { .. }) => return Err(e).numeric(),
        Err(e) => {
            // arbitrage in the curve or in the implied measure
            run.detected = true;
            let verdict = match &e {
                ImpliedFormError::Arbitrage(v) => Some(v.clone()),
                _ => None,
            };
            let failure = ImpliedFormFailure {
                reason: e.to_string(),
                verdict,
            };
            run.json(sibling(&out, ".rejected.json"), &failure)?;
        }
    }
    Ok(run)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum FormFile {
    Implied(ImpliedForm<f64>),
    Plain(GeneralizedPricingForm<f64>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PriceReport {
    pub payoff: Payoff<f64>,
    pub price: f64,
    pub form_positive: bool,
}

pub fn price(form: &Path, payoff: &Path, out: PathBuf) -> Result<Run, Failure> {
    let f = match read_json::<FormFile>(form).usage()? {
        FormFile::Implied(i) => i.form,
        FormFile::Plain(p) => p,
    };
    f.validate().usage()?;
    let p: Payoff<f64> = read_json(payoff).usage()?;
    let value = f.price(&p).usage()?;
    let mut run = Run::new(&[form, payoff]);
    run.json(
        out,
        &PriceReport {
            payoff: p,
            price: value,
            form_positive: f.is_positive(1e-12),
        },
    )?;
    Ok(run)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum TargetFile {
    Vector { vector: Vec<f64> },
    Payoff(Payoff<f64>),
}

/// One side of the interval; `value` is absent when the side is unbounded.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundSide {
    pub value: Option<f64>,
    pub form: Option<GeneralizedPricingForm<f64>>,
    pub form_weights: Option<Vec<f64>>,
    pub hedge: Option<Vec<(String, f64)>>,
    pub hedge_cost: Option<f64>,
    /// Weak-duality residual of the certificate.
    pub residual: f64,
}

impl BoundSide {
    fn new(b: Bound<f64>, residual: f64) -> Self {
        Self {
            value: b.value.is_finite().then_some(b.value),
            form: b.form,
            form_weights: b.form_weights,
            hedge: b.hedge,
            hedge_cost: b.hedge_cost,
            residual,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundsReport {
    pub labels: Vec<String>,
    pub target: Vec<f64>,
    pub lower: BoundSide,
    pub upper: BoundSide,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArbitrageReport {
    pub arbitrage: ArbitragePortfolio<f64>,
}

pub fn bounds(market: &Path, target: &Path, out: PathBuf) -> Result<Run, Failure> {
    let spec: MarketSpec<f64> = read_json(market).usage()?;
    let mkt = spec.build().usage()?;
    let t = match read_json::<TargetFile>(target).usage()? {
        TargetFile::Vector { vector } => vector,
        TargetFile::Payoff(p) => mkt.space.vector_of("target", &p).usage()?,
    };
    let mut run = Run::new(&[market, target]);
    if let Consistency::Arbitrage(a) = check_consistency(&mkt).numeric()? {
        run.detected = true;
        run.json(sibling(&out, ".arbitrage.json"), &ArbitrageReport { arbitrage: a })?;
        return Ok(run);
    }
    let PriceBounds { lower, upper } = price_bounds(&mkt, &t).usage()?;
    let report = BoundsReport {
        labels: mkt.space.labels(),
        lower: BoundSide::new(lower.clone(), certificate_residual(&mkt, &t, &lower, false)),
        upper: BoundSide::new(upper.clone(), certificate_residual(&mkt, &t, &upper, true)),
        target: t,
    };
    run.json(out, &report)?;
    Ok(run)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GridSpec {
    Uniform { lo: f64, hi: f64, nodes: usize },
    LogUniform { lo: f64, hi: f64, nodes: usize },
    Nodes { nodes: Vec<f64> },
}

fn default_theta() -> f64 {
    0.5
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KernelScenario {
    pub r: f64,
    pub sigma: f64,
    pub grid: GridSpec,
    #[serde(default = "default_true")]
    pub slope: bool,
    pub horizon: f64,
    pub steps: usize,
    #[serde(default = "default_theta")]
    pub theta: f64,
    #[serde(default = "default_true")]
    pub rannacher: bool,
    #[serde(default)]
    pub drift_scheme: DriftScheme,
    pub payoff: Payoff<f64>,
    /// Spot at which the propagated payoff is reported.
    pub spot: f64,
    #[serde(default)]
    pub dump_operator: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KernelReport {
    pub value_at_spot: f64,
    pub generator: GeneratorVerdict<f64>,
    pub short_rate_min: f64,
    pub short_rate_max: f64,
    pub positivity_dt_bound: f64,
    pub propagator_min_entry: f64,
    pub propagator_norm: f64,
    /// Largest change of the forward `S` (with unit slope) over the horizon.
    pub forward_leak: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValueRow {
    pub coordinate: String,
    pub payoff: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeneratorFailure {
    pub error: String,
    pub row: usize,
    pub spot: f64,
    pub value: f64,
}

pub fn kernel_check(scenario: &Path, out: PathBuf) -> Result<Run, Failure> {
    let sc: KernelScenario = read_json(scenario).usage()?;
    let space = match &sc.grid {
        GridSpec::Uniform { lo, hi, nodes } => KernelSpace::uniform(*lo, *hi, *nodes, sc.slope),
        GridSpec::LogUniform { lo, hi, nodes } => KernelSpace::log_uniform_between(*lo, *hi, *nodes, sc.slope),
        GridSpec::Nodes { nodes } => KernelSpace::new(nodes.clone(), sc.slope),
    }
    .usage()?;
    let mut run = Run::new(&[scenario]);
    let rates = vec![sc.r; space.grid.len()];
    let h = match bs_generator_with(&rates, sc.sigma, &space, sc.drift_scheme) {
        Ok(h) => h,
        Err(posform::kernel::KernelError::NegativeOffDiagonal { row, spot, value }) => {
            run.detected = true;
            let fail = GeneratorFailure {
                error: "negative off-diagonal generator entry".into(),
                row,
                spot,
                value,
            };
            run.json(sibling(&out, ".rejected.json"), &fail)?;
            return Ok(run);
        }
        Err(e) => return Err(e).usage(),
    };
    let verdict = h.arbitrage_check();
    let plan = Stepping {
        horizon: sc.horizon,
        steps: sc.steps,
        theta: sc.theta,
        rannacher: sc.rannacher,
    };
    let f = space.vector_of(&sc.payoff).usage()?;
    let values = propagate(&f, &h, &plan).numeric()?;
    let u = PricingKernelOperator::propagator(&h, 0.0, &plan).numeric()?;
    let forward = space.affine(0.0, 1.0);
    let moved = propagate(&forward, &h, &plan).numeric()?;
    let leak = moved
        .iter()
        .zip(&forward)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let rates = h.implied_short_rate();
    let report = KernelReport {
        value_at_spot: space.interpolate(&values, sc.spot),
        short_rate_min: rates.iter().copied().fold(f64::INFINITY, f64::min),
        short_rate_max: rates.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        positivity_dt_bound: h.positivity_dt_bound(sc.theta),
        propagator_min_entry: u.min_entry(),
        propagator_norm: u.operator_norm(&space.fstar()).numeric()?,
        forward_leak: leak,
        generator: verdict.clone(),
    };
    run.detected = !verdict.ok;
    run.json(out.clone(), &report)?;
    let rows: Vec<ValueRow> = space
        .labels()
        .into_iter()
        .zip(f.iter().zip(&values))
        .map(|(coordinate, (&p, &v))| ValueRow {
            coordinate,
            payoff: p,
            value: v,
        })
        .collect();
    run.csv(out.with_extension("csv"), &rows)?;
    if sc.dump_operator {
        let path = sibling(&out, ".operator.csv");
        std::fs::write(&path, u.dump().to_csv()).numeric()?;
        run.outputs.push(path);
    }
    Ok(run)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SvConfig {
    #[serde(default)]
    pub preset: Option<Preset>,
    #[serde(default)]
    pub params: Option<SVParams<f64>>,
    /// Overrides the step count of the preset or params.
    #[serde(default)]
    pub n: Option<usize>,
}

impl SvConfig {
    pub fn params(&self) -> anyhow::Result<SVParams<f64>> {
        let mut p = match (&self.preset, &self.params) {
            (Some(preset), None) => SVParams::preset(*preset),
            (None, Some(p)) => *p,
            _ => return Err(anyhow!("config needs exactly one of `preset` or `params`")),
        };
        if let Some(n) = self.n {
            p.n = n;
        }
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MartingalityReport {
    pub params: SVParams<f64>,
    pub naive: EstimatorReport<f64>,
    pub conditioned: EstimatorReport<f64>,
    /// `(naive - conditioned) / combined stderr`.
    pub estimator_z: f64,
    /// Exact expectation of the two-step scheme by quadrature.
    pub fixed_n_quadrature: f64,
    pub change_of_variables: Option<ChangeOfVariables<f64>>,
    /// Conditioned estimate below one by more than five standard errors.
    pub defect_detected: bool,
}

pub fn martingality(config: &Path, mc: McConfig, out: PathBuf) -> Result<Run, Failure> {
    let cfg: SvConfig = read_json(config).usage()?;
    let p = cfg.params().usage()?;
    let naive = naive_estimator(&p, &mc).usage()?;
    let conditioned = conditioned_estimator(&p, &mc).usage()?;
    let se = naive.stderr.hypot(conditioned.stderr);
    let two = p.with_steps(2);
    let report = MartingalityReport {
        params: p,
        estimator_z: if se > 0.0 {
            (naive.estimate - conditioned.estimate) / se
        } else {
            0.0
        },
        fixed_n_quadrature: if p.nu > 0.0 {
            quadrature_identity(&two, 64).numeric()?
        } else {
            1.0
        },
        change_of_variables: if p.nu > 0.0 {
            Some(change_of_variables_check(&two, 64).numeric()?)
        } else {
            None
        },
        defect_detected: 1.0 - conditioned.estimate > 5.0 * conditioned.stderr,
        naive,
        conditioned,
    };
    let mut run = Run::new(&[config]);
    run.seed = Some(mc.seed);
    run.workers = mc.workers;
    run.detected = report.defect_detected;
    run.json(out, &report)?;
    Ok(run)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub barrier: f64,
    pub n: usize,
    pub estimate: f64,
    pub stderr: f64,
    pub exploded: usize,
}

pub fn barrier_sweep(
    config: &Path,
    barriers: &[f64],
    steps: &[usize],
    mc: McConfig,
    out: PathBuf,
) -> Result<Run, Failure> {
    let cfg: SvConfig = read_json(config).usage()?;
    let p = cfg.params().usage()?;
    let result: BarrierSweepResult<f64> = limit_order_experiment(&p, barriers, steps, &mc).usage()?;
    let rows: Vec<SweepRow> = result
        .cells
        .iter()
        .map(|c| SweepRow {
            barrier: c.barrier,
            n: c.n,
            estimate: c.estimate,
            stderr: c.stderr,
            exploded: c.exploded,
        })
        .collect();
    let mut run = Run::new(&[config]);
    run.seed = Some(mc.seed);
    run.workers = mc.workers;
    run.detected = result.defect_detected;
    run.json(out.clone(), &result)?;
    run.csv(out.with_extension("csv"), &rows)?;
    Ok(run)
}
