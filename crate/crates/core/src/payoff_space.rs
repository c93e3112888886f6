//! Payoffs with explicit asymptotic growth coordinates and the norm induced by
//! a dominating payoff.
//!
//! A payoff is a closed-form function of the terminal spot `S ∈ (0, ∞)`
//! together with its limits along three growth directions:
//!
//! * `LinearAtInfinity`: `lim_{S→∞} f(S)/S`
//! * `QuadraticAtInfinity`: `lim_{S→∞} f(S)/S²`
//! * `LogAtZero`: `-lim_{S→0} f(S)/ln(S)`
//!
//! These limits are the coordinates on which boundary weights of a
//! [`GeneralizedPricingForm`](crate::pricing_form::GeneralizedPricingForm) act.
//! They are exact for the built-in kinds and declared by the caller for
//! sampled payoffs.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PayoffError {
    #[error("strike must be finite and non-negative, got {0}")]
    InvalidStrike(f64),
    #[error("log contract strike must be positive, got {0}")]
    NonPositiveLogStrike(f64),
    #[error("invalid sampled payoff: {0}")]
    InvalidSamples(String),
    #[error("declared {direction} coefficient {declared} disagrees with analytic value {actual}")]
    InconsistentAsym {
        direction: GrowthDirection,
        declared: String,
        actual: String,
    },
    #[error("unknown payoff kind `{0}`")]
    UnknownKind(String),
    #[error("payoff kind `{kind}` requires field `{field}`")]
    MissingField { kind: String, field: &'static str },
}

/// Direction along which a payoff may escape every finite measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GrowthDirection {
    #[serde(rename = "linear_inf")]
    LinearAtInfinity,
    #[serde(rename = "quad_inf")]
    QuadraticAtInfinity,
    #[serde(rename = "log_zero")]
    LogAtZero,
}

impl GrowthDirection {
    pub const ALL: [GrowthDirection; 3] = [
        GrowthDirection::LinearAtInfinity,
        GrowthDirection::QuadraticAtInfinity,
        GrowthDirection::LogAtZero,
    ];

    pub fn label(self) -> &'static str {
        match self {
            GrowthDirection::LinearAtInfinity => "linear_inf",
            GrowthDirection::QuadraticAtInfinity => "quad_inf",
            GrowthDirection::LogAtZero => "log_zero",
        }
    }
}

impl fmt::Display for GrowthDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Value of an asymptotic limit. `Divergent` marks a limit that does not
/// exist as a finite number (e.g. `f(S)/S` for a quadratic payoff).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Coefficient<T> {
    Finite(T),
    Divergent,
}

impl<T: Scalar> Coefficient<T> {
    pub fn finite(self) -> Option<T> {
        match self {
            Coefficient::Finite(v) => Some(v),
            Coefficient::Divergent => None,
        }
    }

    pub fn is_zero(self) -> bool {
        matches!(self, Coefficient::Finite(v) if v == T::zero())
    }

    fn scale(self, a: T) -> Self {
        match self {
            Coefficient::Finite(v) => Coefficient::Finite(a * v),
            Coefficient::Divergent if a == T::zero() => Coefficient::Finite(T::zero()),
            Coefficient::Divergent => Coefficient::Divergent,
        }
    }

    fn plus(self, other: Self) -> Self {
        match (self, other) {
            (Coefficient::Finite(a), Coefficient::Finite(b)) => Coefficient::Finite(a + b),
            _ => Coefficient::Divergent,
        }
    }
}

impl<T: Scalar> fmt::Display for Coefficient<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coefficient::Finite(v) => write!(f, "{v}"),
            Coefficient::Divergent => f.write_str("divergent"),
        }
    }
}

impl<T: Scalar + Serialize> Serialize for Coefficient<T> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Coefficient::Finite(v) => v.serialize(s),
            Coefficient::Divergent => s.serialize_str("divergent"),
        }
    }
}

impl<'de, T: Scalar + Deserialize<'de>> Deserialize<'de> for Coefficient<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr<T> {
            Num(T),
            Tag(String),
        }
        match Repr::<T>::deserialize(d)? {
            Repr::Num(v) => Ok(Coefficient::Finite(v)),
            Repr::Tag(s) if s == "divergent" => Ok(Coefficient::Divergent),
            Repr::Tag(s) => Err(serde::de::Error::custom(format!(
                "expected number or \"divergent\", got \"{s}\""
            ))),
        }
    }
}

/// Limits of a payoff along every [`GrowthDirection`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Asymptotics<T> {
    pub linear_inf: Coefficient<T>,
    pub quad_inf: Coefficient<T>,
    pub log_zero: Coefficient<T>,
}

impl<T: Scalar> Asymptotics<T> {
    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    pub fn new(linear_inf: T, quad_inf: T, log_zero: T) -> Self {
        Self {
            linear_inf: Coefficient::Finite(linear_inf),
            quad_inf: Coefficient::Finite(quad_inf),
            log_zero: Coefficient::Finite(log_zero),
        }
    }

    pub fn get(&self, d: GrowthDirection) -> Coefficient<T> {
        match d {
            GrowthDirection::LinearAtInfinity => self.linear_inf,
            GrowthDirection::QuadraticAtInfinity => self.quad_inf,
            GrowthDirection::LogAtZero => self.log_zero,
        }
    }

    fn map2(self, other: Self, f: impl Fn(Coefficient<T>, Coefficient<T>) -> Coefficient<T>) -> Self {
        Self {
            linear_inf: f(self.linear_inf, other.linear_inf),
            quad_inf: f(self.quad_inf, other.quad_inf),
            log_zero: f(self.log_zero, other.log_zero),
        }
    }

    fn scale(self, a: T) -> Self {
        Self {
            linear_inf: self.linear_inf.scale(a),
            quad_inf: self.quad_inf.scale(a),
            log_zero: self.log_zero.scale(a),
        }
    }

    fn as_map(&self) -> BTreeMap<GrowthDirection, Coefficient<T>> {
        GrowthDirection::ALL.iter().map(|&d| (d, self.get(d))).collect()
    }
}

/// Dominating power at infinity and log singularity at zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrowthClass {
    /// Smallest `p ∈ {0, 1, 2}` with `f(S)/S^p` bounded at infinity.
    pub power: u8,
    pub log_at_zero: bool,
}

impl GrowthClass {
    pub fn dominated_by(self, other: GrowthClass) -> bool {
        self.power <= other.power && (!self.log_at_zero || other.log_at_zero)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PayoffKind<T> {
    Call {
        strike: T,
    },
    Put {
        strike: T,
    },
    Forward {
        strike: T,
    },
    Bond,
    PowerCall {
        strike: T,
    },
    LogContract {
        strike: T,
    },
    /// Piecewise-linear interpolation of samples. Outside the sampled range the
    /// declared asymptotic coefficients drive the extrapolation.
    Sampled {
        nodes: Vec<T>,
        values: Vec<T>,
    },
    Combination(Vec<(T, Payoff<T>)>),
    /// A dominating function used as a payoff.
    Reference(DominatingFunction),
}

/// A European payoff on the terminal spot.
#[derive(Debug, Clone, PartialEq)]
pub struct Payoff<T> {
    kind: PayoffKind<T>,
    asym: Asymptotics<T>,
}

fn check_strike<T: Scalar>(k: T) -> Result<T, PayoffError> {
    if k.is_finite() && k >= T::zero() {
        Ok(k)
    } else {
        Err(PayoffError::InvalidStrike(k.as_f64()))
    }
}

impl<T: Scalar> Payoff<T> {
    /// `(S - K)+`
    pub fn call(strike: T) -> Result<Self, PayoffError> {
        let strike = check_strike(strike)?;
        Ok(Self {
            kind: PayoffKind::Call { strike },
            asym: Asymptotics::new(T::one(), T::zero(), T::zero()),
        })
    }

    /// `(K - S)+`
    pub fn put(strike: T) -> Result<Self, PayoffError> {
        let strike = check_strike(strike)?;
        Ok(Self {
            kind: PayoffKind::Put { strike },
            asym: Asymptotics::zero(),
        })
    }

    /// `S - K`; `forward(0)` is the share itself.
    pub fn forward(strike: T) -> Result<Self, PayoffError> {
        let strike = check_strike(strike)?;
        Ok(Self {
            kind: PayoffKind::Forward { strike },
            asym: Asymptotics::new(T::one(), T::zero(), T::zero()),
        })
    }

    /// Unit zero-coupon bond paying 1 in every state.
    pub fn bond() -> Self {
        Self {
            kind: PayoffKind::Bond,
            asym: Asymptotics::zero(),
        }
    }

    /// `[(S - K)+]²`. Its linear coefficient diverges.
    pub fn power_call(strike: T) -> Result<Self, PayoffError> {
        let strike = check_strike(strike)?;
        Ok(Self {
            kind: PayoffKind::PowerCall { strike },
            asym: Asymptotics {
                linear_inf: Coefficient::Divergent,
                quad_inf: Coefficient::Finite(T::one()),
                log_zero: Coefficient::Finite(T::zero()),
            },
        })
    }

    /// `-ln(S/K) + S - K`, nonnegative with its minimum at `S = K`.
    pub fn log_contract(strike: T) -> Result<Self, PayoffError> {
        if !(strike.is_finite() && strike > T::zero()) {
            return Err(PayoffError::NonPositiveLogStrike(strike.as_f64()));
        }
        Ok(Self {
            kind: PayoffKind::LogContract { strike },
            asym: Asymptotics::new(T::one(), T::zero(), T::one()),
        })
    }

    /// User-sampled payoff. `asym` must state the limits explicitly; a nonzero
    /// quadratic coefficient makes the linear one divergent.
    pub fn sampled(nodes: Vec<T>, values: Vec<T>, asym: Asymptotics<T>) -> Result<Self, PayoffError> {
        if nodes.len() < 2 || nodes.len() != values.len() {
            return Err(PayoffError::InvalidSamples(format!(
                "need at least two nodes and matching values (got {} nodes, {} values)",
                nodes.len(),
                values.len()
            )));
        }
        if nodes[0] < T::zero() || nodes.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(PayoffError::InvalidSamples(
                "nodes must be non-negative and strictly increasing".into(),
            ));
        }
        if nodes.iter().chain(values.iter()).any(|v| !v.is_finite()) {
            return Err(PayoffError::InvalidSamples("non-finite sample".into()));
        }
        let (Some(lin), Some(quad), Some(log)) = (
            asym.linear_inf
                .finite()
                .or(if asym.quad_inf.is_zero() { None } else { Some(T::zero()) }),
            asym.quad_inf.finite(),
            asym.log_zero.finite(),
        ) else {
            return Err(PayoffError::InvalidSamples(
                "declared coefficients must be finite (linear may be divergent only with a quadratic term)".into(),
            ));
        };
        if !lin.is_finite() || !quad.is_finite() || !log.is_finite() {
            return Err(PayoffError::InvalidSamples("non-finite coefficient".into()));
        }
        if log != T::zero() && nodes[0] == T::zero() {
            return Err(PayoffError::InvalidSamples(
                "a log-at-zero coefficient needs a first node above zero".into(),
            ));
        }
        let linear_inf = if quad != T::zero() {
            Coefficient::Divergent
        } else {
            Coefficient::Finite(lin)
        };
        Ok(Self {
            kind: PayoffKind::Sampled { nodes, values },
            asym: Asymptotics {
                linear_inf,
                quad_inf: Coefficient::Finite(quad),
                log_zero: Coefficient::Finite(log),
            },
        })
    }

    /// Finite linear combination `Σ a_i f_i`.
    pub fn combination(terms: Vec<(T, Payoff<T>)>) -> Self {
        let asym = terms.iter().fold(Asymptotics::zero(), |acc, (a, p)| {
            acc.map2(p.asym.scale(*a), Coefficient::plus)
        });
        Self {
            kind: PayoffKind::Combination(terms),
            asym,
        }
    }

    pub fn scaled(&self, a: T) -> Self {
        Self::combination(vec![(a, self.clone())])
    }

    pub fn plus(&self, other: &Payoff<T>) -> Self {
        Self::combination(vec![(T::one(), self.clone()), (T::one(), other.clone())])
    }

    pub fn kind(&self) -> &PayoffKind<T> {
        &self.kind
    }

    pub fn asymptotics(&self) -> &Asymptotics<T> {
        &self.asym
    }

    pub fn asym(&self, d: GrowthDirection) -> Coefficient<T> {
        self.asym.get(d)
    }

    pub fn strike(&self) -> Option<T> {
        match self.kind {
            PayoffKind::Call { strike }
            | PayoffKind::Put { strike }
            | PayoffKind::Forward { strike }
            | PayoffKind::PowerCall { strike }
            | PayoffKind::LogContract { strike } => Some(strike),
            _ => None,
        }
    }

    pub fn growth_class(&self) -> GrowthClass {
        let power = if !self.asym.quad_inf.is_zero() {
            2
        } else if !self.asym.linear_inf.is_zero() {
            1
        } else {
            0
        };
        GrowthClass {
            power,
            log_at_zero: !self.asym.log_zero.is_zero(),
        }
    }

    /// Payoff value at spot `s`. Finite for every `s > 0`; the log contract is
    /// `+∞` at `s = 0`.
    pub fn eval(&self, s: T) -> T {
        let zero = T::zero();
        match &self.kind {
            PayoffKind::Call { strike } => (s - *strike).max(zero),
            PayoffKind::Put { strike } => (*strike - s).max(zero),
            PayoffKind::Forward { strike } => s - *strike,
            PayoffKind::Bond => T::one(),
            PayoffKind::PowerCall { strike } => {
                let x = (s - *strike).max(zero);
                x * x
            }
            PayoffKind::LogContract { strike } => {
                if s == zero {
                    T::infinity()
                } else {
                    -(s / *strike).ln() + s - *strike
                }
            }
            PayoffKind::Sampled { nodes, values } => self.eval_sampled(nodes, values, s),
            PayoffKind::Combination(terms) => terms
                .iter()
                .filter(|(a, _)| *a != zero)
                .map(|(a, p)| *a * p.eval(s))
                .sum(),
            PayoffKind::Reference(f) => f.eval(s),
        }
    }

    fn eval_sampled(&self, nodes: &[T], values: &[T], s: T) -> T {
        let n = nodes.len();
        if s <= nodes[0] {
            let log = self.asym.log_zero.finite().unwrap_or_else(T::zero);
            if log == T::zero() || s == nodes[0] {
                return values[0];
            }
            if s == T::zero() {
                return if log > T::zero() {
                    T::infinity()
                } else {
                    T::neg_infinity()
                };
            }
            return values[0] - log * (s / nodes[0]).ln();
        }
        if s >= nodes[n - 1] {
            let quad = self.asym.quad_inf.finite().unwrap_or_else(T::zero);
            let lin = self.asym.linear_inf.finite().unwrap_or_else(T::zero);
            let last = nodes[n - 1];
            return values[n - 1] + lin * (s - last) + quad * (s * s - last * last);
        }
        let j = nodes.partition_point(|&x| x <= s);
        let (x0, x1) = (nodes[j - 1], nodes[j]);
        let w = (s - x0) / (x1 - x0);
        values[j - 1] * (T::one() - w) + values[j] * w
    }

    /// Points where the payoff is not smooth.
    pub fn kinks(&self) -> Vec<T> {
        let mut out = match &self.kind {
            PayoffKind::Call { strike } | PayoffKind::Put { strike } | PayoffKind::PowerCall { strike } => {
                vec![*strike]
            }
            PayoffKind::Sampled { nodes, .. } => nodes.clone(),
            PayoffKind::Combination(terms) => terms.iter().flat_map(|(_, p)| p.kinks()).collect(),
            PayoffKind::Reference(DominatingFunction::LinearLog) => vec![T::one()],
            _ => Vec::new(),
        };
        out.sort_by(|a, b| a.partial_cmp(b).expect("finite kinks"));
        out.dedup();
        out
    }

    /// Strikes appearing anywhere in the payoff (used to refine sup grids).
    pub fn strikes(&self) -> Vec<T> {
        match &self.kind {
            PayoffKind::Combination(terms) => {
                let mut v: Vec<T> = terms.iter().flat_map(|(_, p)| p.strikes()).collect();
                v.sort_by(|a, b| a.partial_cmp(b).expect("finite strikes"));
                v.dedup();
                v
            }
            PayoffKind::Sampled { nodes, .. } => nodes.clone(),
            _ => self.strike().into_iter().collect(),
        }
    }
}

/// Nonnegative reference payoff `f*` defining the norm `‖f‖ = inf{M : |f| ≤ M f*}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DominatingFunction {
    /// `1 + S`
    #[serde(rename = "1+S")]
    Linear,
    /// `1 + S²`
    #[serde(rename = "1+S^2")]
    Quadratic,
    /// `1 + S - ln(min(S, 1))`
    #[serde(rename = "1+S-ln(min(S,1))")]
    LinearLog,
}

impl DominatingFunction {
    pub fn eval<T: Scalar>(self, s: T) -> T {
        match self {
            DominatingFunction::Linear => T::one() + s,
            DominatingFunction::Quadratic => T::one() + s * s,
            DominatingFunction::LinearLog => {
                if s == T::zero() {
                    T::infinity()
                } else {
                    T::one() + s - s.min(T::one()).ln()
                }
            }
        }
    }

    pub fn asymptotics<T: Scalar>(self) -> Asymptotics<T> {
        match self {
            DominatingFunction::Linear => Asymptotics::new(T::one(), T::zero(), T::zero()),
            DominatingFunction::Quadratic => Asymptotics {
                linear_inf: Coefficient::Divergent,
                quad_inf: Coefficient::Finite(T::one()),
                log_zero: Coefficient::Finite(T::zero()),
            },
            DominatingFunction::LinearLog => Asymptotics::new(T::one(), T::zero(), T::one()),
        }
    }

    pub fn growth_class(self) -> GrowthClass {
        match self {
            DominatingFunction::Linear => GrowthClass {
                power: 1,
                log_at_zero: false,
            },
            DominatingFunction::Quadratic => GrowthClass {
                power: 2,
                log_at_zero: false,
            },
            DominatingFunction::LinearLog => GrowthClass {
                power: 1,
                log_at_zero: true,
            },
        }
    }

    /// `f*` as a payoff so that it can be priced.
    pub fn as_payoff<T: Scalar>(self) -> Payoff<T> {
        Payoff {
            kind: PayoffKind::Reference(self),
            asym: self.asymptotics(),
        }
    }
}

/// A payoff norm; infinity is a distinguished value rather than `inf`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum NormValue<T> {
    Finite(T),
    Infinite,
}

impl<T: Scalar> NormValue<T> {
    pub fn finite(self) -> Option<T> {
        match self {
            NormValue::Finite(v) => Some(v),
            NormValue::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, NormValue::Infinite)
    }
}

/// Geometric grid on `[1e-6, 1e8]` with 4096 points, plus `S = 0`, the given
/// strikes and their neighbourhoods.
pub fn sup_grid<T: Scalar>(strikes: &[T]) -> Vec<T> {
    const POINTS: usize = 4096;
    let (lo, hi) = (1e-6f64, 1e8f64);
    let ratio = (hi / lo).ln() / (POINTS - 1) as f64;
    let mut grid: Vec<T> = Vec::with_capacity(POINTS + 1 + 5 * strikes.len());
    grid.push(T::zero());
    grid.extend((0..POINTS).map(|i| T::lit(lo * (ratio * i as f64).exp())));
    for &k in strikes {
        if k > T::zero() && k.is_finite() {
            for rel in [-1e-3, -1e-6, 0.0, 1e-6, 1e-3] {
                grid.push(k * (T::one() + T::lit(rel)));
            }
        }
    }
    grid.sort_by(|a, b| a.partial_cmp(b).expect("finite grid"));
    grid.dedup();
    grid
}

/// `‖f‖` relative to `f*`: the larger of the sampled supremum of `|f|/f*` on
/// `grid` and the ratios of asymptotic coefficients along the directions `f*`
/// grows in. Infinite when `f` is not dominated by `f*`.
pub fn payoff_norm<T: Scalar>(f: &Payoff<T>, fstar: DominatingFunction, grid: &[T]) -> NormValue<T> {
    if !f.growth_class().dominated_by(fstar.growth_class()) {
        return NormValue::Infinite;
    }
    let mut sup = T::zero();
    for &s in grid {
        let d = fstar.eval(s);
        if !d.is_finite() || d <= T::zero() {
            continue;
        }
        let v = f.eval(s);
        if !v.is_finite() {
            return NormValue::Infinite;
        }
        sup = sup.max(v.abs() / d);
    }
    let fa = fstar.asymptotics::<T>();
    for d in GrowthDirection::ALL {
        let (Coefficient::Finite(c), coef) = (fa.get(d), f.asym(d)) else {
            continue;
        };
        match coef {
            Coefficient::Divergent => return NormValue::Infinite,
            Coefficient::Finite(v) if c > T::zero() => sup = sup.max(v.abs() / c),
            Coefficient::Finite(v) if v != T::zero() => return NormValue::Infinite,
            Coefficient::Finite(_) => {}
        }
    }
    NormValue::Finite(sup)
}

/// `payoff_norm` on the default [`sup_grid`] refined at the payoff's strikes.
pub fn payoff_norm_default<T: Scalar>(f: &Payoff<T>, fstar: DominatingFunction) -> NormValue<T> {
    payoff_norm(f, fstar, &sup_grid(&f.strikes()))
}

/// JSON shape of a payoff: `{kind, strike, asym:{...}}`, with `nodes`/`values`
/// for sampled payoffs and `terms` for combinations.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct PayoffDescriptor<T> {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strike: Option<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub asym: Option<BTreeMap<GrowthDirection, Coefficient<T>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes: Option<Vec<T>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<T>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terms: Option<Vec<(T, PayoffDescriptor<T>)>>,
}

impl<T: Scalar> From<&Payoff<T>> for PayoffDescriptor<T> {
    fn from(p: &Payoff<T>) -> Self {
        let mut d = PayoffDescriptor {
            kind: String::new(),
            strike: p.strike(),
            asym: Some(p.asym.as_map()),
            nodes: None,
            values: None,
            terms: None,
        };
        d.kind = match &p.kind {
            PayoffKind::Call { .. } => "call",
            PayoffKind::Put { .. } => "put",
            PayoffKind::Forward { .. } => "forward",
            PayoffKind::Bond => "bond",
            PayoffKind::PowerCall { .. } => "power_call",
            PayoffKind::LogContract { .. } => "log_contract",
            PayoffKind::Sampled { nodes, values } => {
                d.nodes = Some(nodes.clone());
                d.values = Some(values.clone());
                "sampled"
            }
            PayoffKind::Combination(terms) => {
                d.terms = Some(terms.iter().map(|(a, t)| (*a, t.into())).collect());
                "combination"
            }
            PayoffKind::Reference(DominatingFunction::Linear) => "one_plus_s",
            PayoffKind::Reference(DominatingFunction::Quadratic) => "one_plus_s2",
            PayoffKind::Reference(DominatingFunction::LinearLog) => "one_plus_s_log",
        }
        .to_string();
        d
    }
}

impl<T: Scalar> TryFrom<PayoffDescriptor<T>> for Payoff<T> {
    type Error = PayoffError;

    fn try_from(d: PayoffDescriptor<T>) -> Result<Self, PayoffError> {
        let strike = |kind: &str| {
            d.strike.ok_or_else(|| PayoffError::MissingField {
                kind: kind.to_string(),
                field: "strike",
            })
        };
        let payoff = match d.kind.as_str() {
            "call" => Payoff::call(strike("call")?)?,
            "put" => Payoff::put(strike("put")?)?,
            "forward" => Payoff::forward(d.strike.unwrap_or_else(T::zero))?,
            "stock" => Payoff::forward(T::zero())?,
            "bond" => Payoff::bond(),
            "power_call" => Payoff::power_call(strike("power_call")?)?,
            "log_contract" => Payoff::log_contract(strike("log_contract")?)?,
            "one_plus_s" => DominatingFunction::Linear.as_payoff(),
            "one_plus_s2" => DominatingFunction::Quadratic.as_payoff(),
            "one_plus_s_log" => DominatingFunction::LinearLog.as_payoff(),
            "sampled" => {
                let missing = |field| PayoffError::MissingField {
                    kind: "sampled".into(),
                    field,
                };
                let declared = d.asym.as_ref().ok_or_else(|| missing("asym"))?;
                let get = |dir| declared.get(&dir).copied().unwrap_or(Coefficient::Finite(T::zero()));
                let asym = Asymptotics {
                    linear_inf: get(GrowthDirection::LinearAtInfinity),
                    quad_inf: get(GrowthDirection::QuadraticAtInfinity),
                    log_zero: get(GrowthDirection::LogAtZero),
                };
                return Payoff::sampled(
                    d.nodes.ok_or_else(|| missing("nodes"))?,
                    d.values.ok_or_else(|| missing("values"))?,
                    asym,
                );
            }
            "combination" => {
                let terms = d.terms.ok_or(PayoffError::MissingField {
                    kind: "combination".into(),
                    field: "terms",
                })?;
                let terms = terms
                    .into_iter()
                    .map(|(a, t)| Ok((a, Payoff::try_from(t)?)))
                    .collect::<Result<Vec<_>, PayoffError>>()?;
                Payoff::combination(terms)
            }
            other => return Err(PayoffError::UnknownKind(other.to_string())),
        };
        if let Some(declared) = &d.asym {
            for (&dir, &coef) in declared {
                let actual = payoff.asym(dir);
                let agree = match (coef, actual) {
                    (Coefficient::Finite(a), Coefficient::Finite(b)) => {
                        (a - b).abs() <= T::tol(1e-12, 16.0) * (T::one() + b.abs())
                    }
                    (Coefficient::Divergent, Coefficient::Divergent) => true,
                    _ => false,
                };
                if !agree {
                    return Err(PayoffError::InconsistentAsym {
                        direction: dir,
                        declared: coef.to_string(),
                        actual: actual.to_string(),
                    });
                }
            }
        }
        Ok(payoff)
    }
}

impl<T: Scalar + Serialize> Serialize for Payoff<T> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        PayoffDescriptor::from(self).serialize(s)
    }
}

impl<'de, T: Scalar + Deserialize<'de>> Deserialize<'de> for Payoff<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let desc = PayoffDescriptor::<T>::deserialize(d)?;
        Payoff::try_from(desc).map_err(serde::de::Error::custom)
    }
}
