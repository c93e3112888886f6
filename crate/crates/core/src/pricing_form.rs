//! Generalized pricing forms: a finite measure (atoms plus a density) and
//! nonnegative weights on the asymptotic coordinates of payoffs.
//!
//! ```text
//! π(f) = Σ w_i f(S_i) + ∫ f(S) ρ(S) dS
//!        + a_lin · lim f(S)/S + a_quad · lim f(S)/S² + a_log · (-lim_{S→0} f(S)/ln S)
//! ```
//!
//! Only the measure part can be read as a risk-neutral probability. A
//! positive linear weight makes call prices tend to `a_lin` at large strikes,
//! which no finite measure can reproduce.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::payoff_space::{
    payoff_norm_default, Asymptotics, Coefficient, DominatingFunction, GrowthDirection, NormValue, Payoff,
};
use crate::quadrature::{gauss_laguerre, gauss_legendre, integrate_panels, Rule};
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PricingError {
    #[error("payoff cannot be priced by this form: {0}")]
    UnpriceablePayoff(String),
    #[error("invalid pricing form: {0}")]
    InvalidForm(String),
    #[error("invalid strike grid: {0}")]
    InvalidStrikes(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CurveError {
    #[error("a call curve needs at least 3 strikes, got {0}")]
    TooFewPoints(usize),
    #[error("strikes must be finite, non-negative and strictly increasing")]
    BadStrikes,
    #[error("strike and price columns differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("non-finite price at strike {0}")]
    NonFinitePrice(f64),
    #[error("spot must be positive and finite, got {0}")]
    BadSpot(f64),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ImpliedFormError {
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error("curve admits static arbitrage ({} violations)", .0.violations.len())]
    Arbitrage(CurveVerdict<f64>),
    #[error("implied density negative ({value:.3e}) at strike {strike}")]
    NegativeDensity { strike: f64, value: f64 },
    #[error("implied density mass {mass} exceeds the zero-coupon price 1")]
    ExcessMass { mass: f64 },
    #[error("tail limit not converged: remainder estimate {estimate:.3e} exceeds {threshold:.3e}")]
    TailNotConverged { estimate: f64, threshold: f64 },
}

/// Nonnegative weights on the growth directions (for an arbitrage-free form).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Deserialize<'de> + Default"))]
pub struct BoundaryWeights<T> {
    #[serde(default)]
    pub linear_inf: T,
    #[serde(default)]
    pub quad_inf: T,
    #[serde(default)]
    pub log_zero: T,
}

impl<T: Scalar> BoundaryWeights<T> {
    pub fn zero() -> Self {
        Self {
            linear_inf: T::zero(),
            quad_inf: T::zero(),
            log_zero: T::zero(),
        }
    }

    pub fn linear(a: T) -> Self {
        Self {
            linear_inf: a,
            ..Self::zero()
        }
    }

    pub fn get(&self, d: GrowthDirection) -> T {
        match d {
            GrowthDirection::LinearAtInfinity => self.linear_inf,
            GrowthDirection::QuadraticAtInfinity => self.quad_inf,
            GrowthDirection::LogAtZero => self.log_zero,
        }
    }

    pub fn set(&mut self, d: GrowthDirection, w: T) {
        match d {
            GrowthDirection::LinearAtInfinity => self.linear_inf = w,
            GrowthDirection::QuadraticAtInfinity => self.quad_inf = w,
            GrowthDirection::LogAtZero => self.log_zero = w,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentialDensity<T> {
    /// Total mass of the density.
    pub mass: T,
    /// Mean of the normalized exponential law.
    pub scale: T,
}

/// Measure part with a density. Sampled densities are integrated with the
/// trapezoid rule on their nodes; the exponential density analytically-guided
/// Gauss quadrature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Density<T> {
    Sampled { nodes: Vec<T>, values: Vec<T> },
    Exponential { exponential: ExponentialDensity<T> },
}

impl<T: Scalar> Density<T> {
    pub fn exponential(mass: T, scale: T) -> Self {
        Density::Exponential {
            exponential: ExponentialDensity { mass, scale },
        }
    }

    fn validate(&self) -> Result<(), PricingError> {
        match self {
            Density::Sampled { nodes, values } => {
                if nodes.len() != values.len() || nodes.len() < 2 {
                    return Err(PricingError::InvalidForm(
                        "density needs at least two nodes with matching values".into(),
                    ));
                }
                if nodes[0] < T::zero() || nodes.windows(2).any(|w| !(w[0] < w[1])) {
                    return Err(PricingError::InvalidForm(
                        "density nodes must be non-negative and strictly increasing".into(),
                    ));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(PricingError::InvalidForm("non-finite density value".into()));
                }
            }
            Density::Exponential { exponential: e } => {
                if !(e.scale > T::zero() && e.scale.is_finite() && e.mass.is_finite()) {
                    return Err(PricingError::InvalidForm(
                        "exponential density needs finite mass and positive scale".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Value of the density at `s` (linear interpolation for sampled densities).
    pub fn value_at(&self, s: T) -> T {
        match self {
            Density::Sampled { nodes, values } => {
                if s < nodes[0] || s > nodes[nodes.len() - 1] {
                    return T::zero();
                }
                let j = nodes.partition_point(|&x| x <= s).min(nodes.len() - 1).max(1);
                let w = (s - nodes[j - 1]) / (nodes[j] - nodes[j - 1]);
                values[j - 1] * (T::one() - w) + values[j] * w
            }
            Density::Exponential { exponential: e } => {
                if s < T::zero() {
                    T::zero()
                } else {
                    e.mass / e.scale * (-s / e.scale).exp()
                }
            }
        }
    }

    fn integrate(&self, f: &Payoff<T>) -> Result<T, PricingError> {
        match self {
            Density::Sampled { nodes, values } => {
                let n = nodes.len();
                let half = T::lit(0.5);
                let mut acc = T::zero();
                for i in 0..n {
                    if values[i] == T::zero() {
                        continue;
                    }
                    let left = if i > 0 { nodes[i] - nodes[i - 1] } else { T::zero() };
                    let right = if i + 1 < n { nodes[i + 1] - nodes[i] } else { T::zero() };
                    let v = f.eval(nodes[i]);
                    if !v.is_finite() {
                        return Err(PricingError::UnpriceablePayoff(format!(
                            "payoff is infinite at density node S={}",
                            nodes[i]
                        )));
                    }
                    acc += half * (left + right) * values[i] * v;
                }
                Ok(acc)
            }
            Density::Exponential { exponential: e } => {
                if e.mass == T::zero() {
                    return Ok(T::zero());
                }
                Ok(e.mass * exponential_expectation(f, e.scale))
            }
        }
    }

    pub fn mass(&self) -> T {
        match self {
            Density::Sampled { nodes, values } => {
                let half = T::lit(0.5);
                nodes
                    .windows(2)
                    .zip(values.windows(2))
                    .map(|(x, v)| half * (x[1] - x[0]) * (v[0] + v[1]))
                    .sum()
            }
            Density::Exponential { exponential: e } => e.mass,
        }
    }
}

const GL_ORDER: usize = 16;
const LAGUERRE_ORDER: usize = 32;

/// `E[f(scale·U)]` for `U ~ Exp(1)`: composite Gauss–Legendre on `[0, U_max]`
/// with unit panels and breaks at the payoff kinks, Gauss–Laguerre beyond.
fn exponential_expectation<T: Scalar>(f: &Payoff<T>, scale: T) -> T {
    let legendre: Rule<T> = gauss_legendre(GL_ORDER);
    let laguerre: Rule<T> = gauss_laguerre(LAGUERRE_ORDER);
    let kinks: Vec<T> = f.kinks().into_iter().map(|k| k / scale).collect();
    let last_kink = kinks.iter().copied().fold(T::zero(), T::max);
    let u_max = (T::lit(40.0).max(last_kink + T::lit(40.0))).ceil();
    let mut breaks = kinks;
    let mut u = T::one();
    while u < u_max {
        breaks.push(u);
        u += T::one();
    }
    if !f.asym(GrowthDirection::LogAtZero).is_zero() {
        // graded panels towards the logarithmic singularity at zero
        let mut g = T::lit(1e-14);
        while g < T::one() {
            breaks.push(g);
            g *= T::lit(10.0);
        }
    }
    let body = integrate_panels(
        |u: T| f.eval(scale * u) * (-u).exp(),
        T::zero(),
        u_max,
        &breaks,
        1,
        &legendre,
    );
    let tail_weight = (-u_max).exp();
    let tail: T = laguerre.iter().map(|(v, w)| w * f.eval(scale * (u_max + v))).sum();
    body + tail_weight * tail
}

/// Price functional on payoffs: atoms + density + boundary weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Deserialize<'de> + Default"))]
pub struct GeneralizedPricingForm<T> {
    #[serde(default)]
    pub atoms: Vec<(T, T)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<Density<T>>,
    #[serde(default)]
    pub boundary: BoundaryWeights<T>,
}

impl<T: Scalar> GeneralizedPricingForm<T> {
    pub fn new(
        atoms: Vec<(T, T)>,
        density: Option<Density<T>>,
        boundary: BoundaryWeights<T>,
    ) -> Result<Self, PricingError> {
        let form = Self {
            atoms,
            density,
            boundary,
        };
        form.validate()?;
        Ok(form)
    }

    pub fn zero() -> Self {
        Self {
            atoms: Vec::new(),
            density: None,
            boundary: BoundaryWeights::zero(),
        }
    }

    pub fn validate(&self) -> Result<(), PricingError> {
        for &(s, w) in &self.atoms {
            if !(s >= T::zero() && s.is_finite() && w.is_finite()) {
                return Err(PricingError::InvalidForm(format!("bad atom ({s}, {w})")));
            }
        }
        if let Some(d) = &self.density {
            d.validate()?;
        }
        for d in GrowthDirection::ALL {
            if !self.boundary.get(d).is_finite() {
                return Err(PricingError::InvalidForm(format!("non-finite {d} weight")));
            }
        }
        Ok(())
    }

    /// Atom `a/S0` at zero, exponential density of mass `(S0-a)/S0` and mean
    /// `S0`, linear weight `a`: call prices `a + (S0-a) e^{-K/S0}`.
    pub fn exponential_with_tail_weight(spot: T, a: T) -> Self {
        Self {
            atoms: vec![(T::zero(), a / spot)],
            density: Some(Density::exponential((spot - a) / spot, spot)),
            boundary: BoundaryWeights::linear(a),
        }
    }

    /// `f(0) + S0 lim f(S)/S`: the infinite-variance limit of lognormal pricing.
    pub fn infinite_variance_limit(spot: T) -> Self {
        Self {
            atoms: vec![(T::zero(), T::one())],
            density: None,
            boundary: BoundaryWeights::linear(spot),
        }
    }

    pub fn with_boundary(mut self, d: GrowthDirection, w: T) -> Self {
        self.boundary.set(d, w);
        self
    }

    /// Components below `-tol` (atoms, density values, boundary weights).
    pub fn negative_components(&self, tol: T) -> Vec<String> {
        let mut out = Vec::new();
        for &(s, w) in &self.atoms {
            if w < -tol {
                out.push(format!("atom at S={s} has weight {w}"));
            }
        }
        match &self.density {
            Some(Density::Sampled { nodes, values }) => {
                for (s, v) in nodes.iter().zip(values) {
                    if *v < -tol {
                        out.push(format!("density at S={s} is {v}"));
                    }
                }
            }
            Some(Density::Exponential { exponential: e }) if e.mass < -tol => {
                out.push(format!("exponential density mass {}", e.mass));
            }
            _ => {}
        }
        for d in GrowthDirection::ALL {
            let w = self.boundary.get(d);
            if w < -tol {
                out.push(format!("{d} weight {w}"));
            }
        }
        out
    }

    /// Positivity of the linear form: every component nonnegative.
    pub fn is_positive(&self, tol: T) -> bool {
        self.negative_components(tol).is_empty()
    }

    /// Total mass of the measure part (atoms plus density).
    pub fn measure_mass(&self) -> T {
        self.atoms.iter().map(|a| a.1).sum::<T>() + self.density.as_ref().map_or(T::zero(), |d| d.mass())
    }

    /// `π(f)`. Fails when a nonzero boundary weight meets a divergent
    /// coefficient or the payoff is infinite where the measure has mass.
    pub fn price(&self, f: &Payoff<T>) -> Result<T, PricingError> {
        let mut total = T::zero();
        for &(s, w) in &self.atoms {
            if w == T::zero() {
                continue;
            }
            let v = f.eval(s);
            if !v.is_finite() {
                return Err(PricingError::UnpriceablePayoff(format!(
                    "payoff is infinite at atom S={s}"
                )));
            }
            total += w * v;
        }
        if let Some(d) = &self.density {
            total += d.integrate(f)?;
        }
        for dir in GrowthDirection::ALL {
            let w = self.boundary.get(dir);
            if w == T::zero() {
                continue;
            }
            match f.asym(dir) {
                Coefficient::Finite(c) => total += w * c,
                Coefficient::Divergent => {
                    return Err(PricingError::UnpriceablePayoff(format!(
                        "payoff grows faster than the {dir} direction weighted by {w}"
                    )))
                }
            }
        }
        Ok(total)
    }

    /// Zero-coupon price `π(1)`.
    pub fn zero_coupon(&self) -> T {
        self.price(&Payoff::bond()).expect("bond is always priceable")
    }

    pub fn call_curve(&self, strikes: &[T]) -> Result<CallCurve<T>, PricingError> {
        if strikes.iter().any(|k| !(k.is_finite() && *k >= T::zero())) || strikes.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(PricingError::InvalidStrikes(
                "strikes must be finite, non-negative and increasing".into(),
            ));
        }
        let prices = strikes
            .iter()
            .map(|&k| self.price(&Payoff::call(k).expect("validated strike")))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(CallCurve {
            strikes: strikes.to_vec(),
            prices,
        })
    }
}

/// Call prices sampled on a strike grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallCurve<T> {
    pub strikes: Vec<T>,
    pub prices: Vec<T>,
}

impl<T: Scalar> CallCurve<T> {
    pub fn new(strikes: Vec<T>, prices: Vec<T>) -> Result<Self, CurveError> {
        let curve = Self { strikes, prices };
        curve.check_shape(1)?;
        Ok(curve)
    }

    pub fn from_fn(strikes: Vec<T>, f: impl Fn(T) -> T) -> Self {
        let prices = strikes.iter().map(|&k| f(k)).collect();
        Self { strikes, prices }
    }

    pub fn len(&self) -> usize {
        self.strikes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strikes.is_empty()
    }

    fn check_shape(&self, min_len: usize) -> Result<(), CurveError> {
        if self.strikes.len() != self.prices.len() {
            return Err(CurveError::LengthMismatch(self.strikes.len(), self.prices.len()));
        }
        if self.strikes.len() < min_len {
            return Err(CurveError::TooFewPoints(self.strikes.len()));
        }
        if self.strikes.iter().any(|k| !(k.is_finite() && *k >= T::zero()))
            || self.strikes.windows(2).any(|w| !(w[0] < w[1]))
        {
            return Err(CurveError::BadStrikes);
        }
        if let Some((k, _)) = self.strikes.iter().zip(&self.prices).find(|(_, p)| !p.is_finite()) {
            return Err(CurveError::NonFinitePrice(k.as_f64()));
        }
        Ok(())
    }

    /// Index of the largest strike not above `k`.
    fn index_at_or_below(&self, k: T) -> usize {
        self.strikes.partition_point(|&x| x <= k).saturating_sub(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ViolationKind {
    #[serde(rename = "negative")]
    Negative,
    #[serde(rename = "increasing")]
    Increasing,
    #[serde(rename = "non-convex")]
    NonConvex,
    #[serde(rename = "above-spot")]
    AboveSpot,
    #[serde(rename = "below-intrinsic")]
    BelowIntrinsic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Violation<T> {
    pub kind: ViolationKind,
    pub strike: T,
    pub magnitude: T,
}

/// Static no-arbitrage verdict; `ok` iff no violations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveVerdict<T> {
    pub ok: bool,
    pub violations: Vec<Violation<T>>,
}

impl<T: Scalar> CurveVerdict<T> {
    pub fn has(&self, kind: ViolationKind) -> bool {
        self.violations.iter().any(|v| v.kind == kind)
    }

    fn to_f64(&self) -> CurveVerdict<f64> {
        CurveVerdict {
            ok: self.ok,
            violations: self
                .violations
                .iter()
                .map(|v| Violation {
                    kind: v.kind,
                    strike: v.strike.as_f64(),
                    magnitude: v.magnitude.as_f64(),
                })
                .collect(),
        }
    }
}

/// Checks, within `tol`, the conditions implied by positivity of prices on
/// calls, spreads and butterflies (zero rates, unit zero-coupon):
/// `0 ≤ C`, `C` non-increasing, convex on consecutive triples, `C ≤ S0` and
/// `C ≥ S0 - K`.
pub fn validate_call_curve<T: Scalar>(curve: &CallCurve<T>, spot: T, tol: T) -> Result<CurveVerdict<T>, CurveError> {
    curve.check_shape(3)?;
    if !(spot > T::zero() && spot.is_finite()) {
        return Err(CurveError::BadSpot(spot.as_f64()));
    }
    let (k, c) = (&curve.strikes, &curve.prices);
    let mut violations = Vec::new();
    let mut push = |kind, strike, magnitude| {
        violations.push(Violation {
            kind,
            strike,
            magnitude,
        })
    };
    for i in 0..k.len() {
        if c[i] < -tol {
            push(ViolationKind::Negative, k[i], -c[i]);
        }
        if c[i] - spot > tol {
            push(ViolationKind::AboveSpot, k[i], c[i] - spot);
        }
        let intrinsic = spot - k[i];
        if intrinsic - c[i] > tol {
            push(ViolationKind::BelowIntrinsic, k[i], intrinsic - c[i]);
        }
        if i + 1 < k.len() && c[i + 1] - c[i] > tol {
            push(ViolationKind::Increasing, k[i + 1], c[i + 1] - c[i]);
        }
        if i > 0 && i + 1 < k.len() {
            let lambda = (k[i + 1] - k[i]) / (k[i + 1] - k[i - 1]);
            let chord = lambda * c[i - 1] + (T::one() - lambda) * c[i + 1];
            let excess = c[i] - chord;
            if excess > tol * (T::one() + c[i].abs()) {
                push(ViolationKind::NonConvex, k[i], excess);
            }
        }
    }
    Ok(CurveVerdict {
        ok: violations.is_empty(),
        violations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImpliedFormOptions<T> {
    /// Tolerance for the static-arbitrage pre-check.
    pub curve_tol: T,
    /// Density values below `-density_tol` are reported as arbitrage.
    pub density_tol: T,
    /// Tail remainder must be below `tail_tol · S0`.
    pub tail_tol: T,
    /// Representable by a probability measure iff the tail limit is `≤ representability_tol`.
    pub representability_tol: T,
}

impl<T: Scalar> Default for ImpliedFormOptions<T> {
    fn default() -> Self {
        Self {
            curve_tol: T::tol(1e-9, 1e3),
            density_tol: T::tol(1e-8, 1e3),
            tail_tol: T::tol(1e-6, 1e3),
            representability_tol: T::tol(1e-6, 1e3),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Deserialize<'de> + Default"))]
pub struct ImpliedForm<T> {
    pub form: GeneralizedPricingForm<T>,
    /// Fitted `lim_{K→∞} C(K)`, the weight at infinity.
    pub tail_limit: T,
    /// Geometric estimate of `|C(K_max) - lim C|`.
    pub tail_remainder: T,
    pub representable_by_probability: bool,
}

/// Geometric remainder estimate from the differences on `[K/4, K/2]` and
/// `[K/2, K]`: `d2 · q / (1 - q)` with `q = d2 / d1`.
fn tail_remainder<T: Scalar>(curve: &CallCurve<T>) -> T {
    let n = curve.len();
    let k_max = curve.strikes[n - 1];
    let i_half = curve.index_at_or_below(k_max / T::lit(2.0));
    let i_quarter = curve.index_at_or_below(k_max / T::lit(4.0));
    let c = &curve.prices;
    let d1 = c[i_quarter] - c[i_half];
    let d2 = c[i_half] - c[n - 1];
    let scale = c.iter().fold(T::zero(), |m, v| m.max(v.abs())).max(T::one());
    if d2.abs() <= T::epsilon() * T::lit(16.0) * scale {
        return T::zero();
    }
    if d1 <= T::zero() || d2 < T::zero() || i_quarter == i_half {
        return T::infinity();
    }
    let q = d2 / d1;
    if q >= T::one() {
        return T::infinity();
    }
    d2 * q / (T::one() - q)
}

/// Recovers a generalized pricing form from a call curve: weight at infinity
/// from the tail limit, density from second differences, atom at zero
/// absorbing the remaining zero-coupon mass.
pub fn implied_form_from_curve<T: Scalar>(
    curve: &CallCurve<T>,
    spot: T,
    opts: &ImpliedFormOptions<T>,
) -> Result<ImpliedForm<T>, ImpliedFormError> {
    let verdict = validate_call_curve(curve, spot, opts.curve_tol)?;
    if !verdict.ok {
        return Err(ImpliedFormError::Arbitrage(verdict.to_f64()));
    }
    let remainder = tail_remainder(curve);
    let threshold = opts.tail_tol * spot;
    if remainder > threshold {
        return Err(ImpliedFormError::TailNotConverged {
            estimate: remainder.as_f64(),
            threshold: threshold.as_f64(),
        });
    }
    let (k, c) = (&curve.strikes, &curve.prices);
    let n = k.len();
    let a = c[n - 1];

    let two = T::lit(2.0);
    let mut rho = vec![T::zero(); n];
    for j in 1..n - 1 {
        let hl = k[j] - k[j - 1];
        let hr = k[j + 1] - k[j];
        rho[j] = two * ((c[j + 1] - c[j]) / hr - (c[j] - c[j - 1]) / hl) / (hl + hr);
    }
    if n >= 4 {
        rho[0] = rho[1] + (rho[1] - rho[2]) * (k[1] - k[0]) / (k[2] - k[1]);
        rho[n - 1] = rho[n - 2] + (rho[n - 2] - rho[n - 3]) * (k[n - 1] - k[n - 2]) / (k[n - 2] - k[n - 3]);
    } else {
        rho[0] = rho[1];
        rho[n - 1] = rho[n - 2];
    }
    for (j, r) in rho.iter_mut().enumerate() {
        if *r < -opts.density_tol {
            return Err(ImpliedFormError::NegativeDensity {
                strike: k[j].as_f64(),
                value: r.as_f64(),
            });
        }
        *r = r.max(T::zero());
    }
    let density = Density::Sampled {
        nodes: k.clone(),
        values: rho,
    };
    let mass = density.mass();
    let mut atom = T::one() - mass;
    if atom < -opts.density_tol * (T::one() + k[n - 1]) {
        return Err(ImpliedFormError::ExcessMass { mass: mass.as_f64() });
    }
    atom = atom.max(T::zero());
    Ok(ImpliedForm {
        form: GeneralizedPricingForm {
            atoms: vec![(T::zero(), atom)],
            density: Some(density),
            boundary: BoundaryWeights::linear(a),
        },
        tail_limit: a,
        tail_remainder: remainder,
        representable_by_probability: a <= opts.representability_tol,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct Counterexample<T> {
    pub description: String,
    pub payoff: Payoff<T>,
    pub price: T,
    /// `|π(f)| / (π(f*)‖f‖)` when the payoff is dominated.
    pub ratio: Option<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct NormTheoremReport<T> {
    pub price_fstar: T,
    /// `max |π(f)| / (π(f*)‖f‖)` over the dominated samples.
    pub max_ratio: T,
    /// The same ratio at `f = f*`.
    pub saturation_ratio: T,
    pub ratios: Vec<Option<T>>,
    /// Samples whose norm relative to `f*` is infinite.
    pub not_dominated: Vec<usize>,
    pub counterexamples: Vec<Counterexample<T>>,
}

impl<T: Scalar> NormTheoremReport<T> {
    pub fn holds(&self) -> bool {
        self.counterexamples.is_empty()
    }
}

/// Checks `|π(f)| ≤ π(f*)‖f‖` on the samples, its saturation at `f*`, and
/// probes positivity with nonnegative payoffs localized at every component
/// of the form.
pub fn verify_norm_theorem<T: Scalar>(
    form: &GeneralizedPricingForm<T>,
    samples: &[Payoff<T>],
    fstar: DominatingFunction,
) -> Result<NormTheoremReport<T>, PricingError> {
    let slack = T::tol(1e-9, 1e4);
    let fstar_payoff: Payoff<T> = fstar.as_payoff();
    let price_fstar = form.price(&fstar_payoff)?;
    let ratio_of = |f: &Payoff<T>| -> Result<(Option<T>, T), PricingError> {
        let p = form.price(f)?;
        let ratio = match payoff_norm_default(f, fstar) {
            NormValue::Infinite => None,
            NormValue::Finite(n) => {
                let denom = price_fstar * n;
                Some(if denom == T::zero() {
                    if p == T::zero() {
                        T::zero()
                    } else {
                        T::infinity()
                    }
                } else {
                    p.abs() / denom
                })
            }
        };
        Ok((ratio, p))
    };

    let mut ratios = Vec::with_capacity(samples.len());
    let mut not_dominated = Vec::new();
    let mut counterexamples = Vec::new();
    let mut max_ratio = T::zero();
    for (i, f) in samples.iter().enumerate() {
        let (ratio, p) = ratio_of(f)?;
        match ratio {
            None => not_dominated.push(i),
            Some(r) => {
                max_ratio = max_ratio.max(r);
                if r > T::one() + slack {
                    counterexamples.push(Counterexample {
                        description: format!("sample {i} exceeds the norm bound"),
                        payoff: f.clone(),
                        price: p,
                        ratio: Some(r),
                    });
                }
            }
        }
        ratios.push(ratio);
    }
    let saturation_ratio = ratio_of(&fstar_payoff)?.0.unwrap_or_else(T::infinity);
    if price_fstar < T::zero() {
        counterexamples.push(Counterexample {
            description: "negative price for the dominating payoff".into(),
            payoff: fstar_payoff.clone(),
            price: price_fstar,
            ratio: None,
        });
    }

    for (description, probe) in positivity_probes(form) {
        let p = match form.price(&probe) {
            Ok(p) => p,
            Err(_) => continue,
        };
        if p < -slack {
            let ratio = ratio_of(&probe).ok().and_then(|r| r.0);
            counterexamples.push(Counterexample {
                description,
                payoff: probe,
                price: p,
                ratio,
            });
        }
    }

    Ok(NormTheoremReport {
        price_fstar,
        max_ratio,
        saturation_ratio,
        ratios,
        not_dominated,
        counterexamples,
    })
}

/// Nonnegative payoffs concentrated at each component of the form.
fn positivity_probes<T: Scalar>(form: &GeneralizedPricingForm<T>) -> Vec<(String, Payoff<T>)> {
    let mut locations: Vec<T> = form.atoms.iter().map(|a| a.0).collect();
    if let Some(Density::Sampled { nodes, .. }) = &form.density {
        locations.extend(nodes.iter().copied());
    }
    locations.sort_by(|a, b| a.partial_cmp(b).expect("finite locations"));
    locations.dedup();
    let mut probes = Vec::new();
    for (i, &x) in locations.iter().enumerate() {
        let gap_left = if i > 0 { x - locations[i - 1] } else { T::infinity() };
        let gap_right = locations.get(i + 1).map_or(T::infinity(), |&y| y - x);
        let width = gap_left
            .min(gap_right)
            .min(T::lit(1e-2) * x.max(T::one()))
            .max(T::epsilon() * x.max(T::one()) * T::lit(1e3));
        probes.push((format!("butterfly centred at S={x}"), butterfly(x, width)));
    }
    if let Some(Density::Exponential { exponential: e }) = &form.density {
        probes.push(("bond against the exponential density".into(), Payoff::bond()));
        probes.push((
            "call at the density scale".into(),
            Payoff::call(e.scale).expect("positive scale"),
        ));
    }
    let reach = locations
        .iter()
        .copied()
        .chain(form.density.as_ref().map(|d| match d {
            Density::Exponential { exponential: e } => e.scale,
            Density::Sampled { nodes, .. } => nodes[nodes.len() - 1],
        }))
        .fold(T::one(), T::max);
    let far = reach * T::lit(1e3);
    if form.boundary.linear_inf < T::zero() {
        probes.push((
            "far out-of-the-money call".into(),
            Payoff::call(far).expect("finite strike"),
        ));
    }
    if form.boundary.quad_inf < T::zero() {
        probes.push((
            "far out-of-the-money power call".into(),
            Payoff::power_call(far).expect("finite strike"),
        ));
    }
    if form.boundary.log_zero < T::zero() {
        let eps = locations
            .iter()
            .copied()
            .filter(|&x| x > T::zero())
            .fold(T::one(), T::min)
            * T::lit(1e-6);
        let log_put = Payoff::sampled(
            vec![eps, eps * T::lit(2.0)],
            vec![T::zero(), T::zero()],
            Asymptotics::new(T::zero(), T::zero(), T::one()),
        )
        .expect("valid log put");
        probes.push(("log payoff vanishing above a tiny strike".into(), log_put));
    }
    probes
}

/// Unit-height butterfly centred at `x` with half-width `h`. Near zero it
/// degenerates to the put spread `((x+h-S)+ - (x-S)+)/h`, equal to one on `[0, x]`.
fn butterfly<T: Scalar>(x: T, h: T) -> Payoff<T> {
    let inv = T::one() / h;
    if x - h < T::zero() {
        return Payoff::combination(vec![
            (inv, Payoff::put(x + h).expect("non-negative strike")),
            (-inv, Payoff::put(x).expect("non-negative strike")),
        ]);
    }
    Payoff::combination(vec![
        (inv, Payoff::call(x - h).expect("non-negative strike")),
        (-inv * T::lit(2.0), Payoff::call(x).expect("non-negative strike")),
        (inv, Payoff::call(x + h).expect("non-negative strike")),
    ])
}
