//! Positive extensions of quoted prices on a finite augmented state space.
//!
//! A pricing form on the grid plus boundary coordinates is a nonnegative
//! weight vector `w`. Quotes are consistent iff `V w = p` has such a
//! solution; the range of `t·w` over all of them is the no-arbitrage price
//! interval of a target `t`.

pub mod simplex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::payoff_space::{Coefficient, GrowthDirection, Payoff};
use crate::pricing_form::{BoundaryWeights, GeneralizedPricingForm};
use crate::scalar::Scalar;
pub use simplex::{
    optimality_residual, solve_lp, solve_lp_with, verify_farkas, Constraint, LpError, LpProblem, LpSolution, LpStatus,
    RowKind, Sense, Tolerances,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MarketError {
    #[error("grid must be non-empty, finite, non-negative and strictly increasing")]
    BadGrid,
    #[error("direction {0} listed twice")]
    DuplicateDirection(GrowthDirection),
    #[error("instrument `{name}` has {got} coordinates, expected {expected}")]
    VectorLength { name: String, got: usize, expected: usize },
    #[error("instrument `{0}` has non-finite data")]
    NonFinite(String),
    #[error("payoff `{name}` has no finite coordinate at {at}")]
    Unrepresentable { name: String, at: String },
    #[error("instrument `{0}` needs exactly one of `vector` or `payoff`")]
    AmbiguousInstrument(String),
    #[error("market has no instruments")]
    Empty,
    #[error(transparent)]
    Payoff(#[from] crate::payoff_space::PayoffError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("market admits arbitrage")]
    Arbitrage(ArbitragePortfolio<f64>),
}

/// Spot grid followed by the selected growth-direction coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentedStateSpace<T> {
    pub grid: Vec<T>,
    #[serde(default)]
    pub directions: Vec<GrowthDirection>,
}

impl<T: Scalar> AugmentedStateSpace<T> {
    pub fn new(grid: Vec<T>, directions: Vec<GrowthDirection>) -> Result<Self, MarketError> {
        let space = Self { grid, directions };
        space.validate()?;
        Ok(space)
    }

    fn validate(&self) -> Result<(), MarketError> {
        if self.grid.is_empty()
            || self.grid.iter().any(|s| !(s.is_finite() && *s >= T::zero()))
            || self.grid.windows(2).any(|w| !(w[0] < w[1]))
        {
            return Err(MarketError::BadGrid);
        }
        for (i, d) in self.directions.iter().enumerate() {
            if self.directions[..i].contains(d) {
                return Err(MarketError::DuplicateDirection(*d));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.grid.len() + self.directions.len()
    }

    pub fn labels(&self) -> Vec<String> {
        self.grid
            .iter()
            .map(|s| format!("S={s}"))
            .chain(self.directions.iter().map(|d| d.label().to_string()))
            .collect()
    }

    /// Payoff values on the grid followed by its asymptotic coefficients.
    pub fn vector_of(&self, name: &str, f: &Payoff<T>) -> Result<Vec<T>, MarketError> {
        let mut v = Vec::with_capacity(self.dim());
        for &s in &self.grid {
            let x = f.eval(s);
            if !x.is_finite() {
                return Err(MarketError::Unrepresentable {
                    name: name.to_string(),
                    at: format!("S={s}"),
                });
            }
            v.push(x);
        }
        for &d in &self.directions {
            match f.asym(d) {
                Coefficient::Finite(c) => v.push(c),
                Coefficient::Divergent => {
                    return Err(MarketError::Unrepresentable {
                        name: name.to_string(),
                        at: d.label().to_string(),
                    })
                }
            }
        }
        Ok(v)
    }

    /// Pricing form whose atoms and boundary weights are the coordinates of `w`.
    pub fn form_from_weights(&self, w: &[T]) -> GeneralizedPricingForm<T> {
        let m = self.grid.len();
        let atoms = self
            .grid
            .iter()
            .zip(w)
            .filter(|(_, &x)| x != T::zero())
            .map(|(&s, &x)| (s, x))
            .collect();
        let mut boundary = BoundaryWeights::zero();
        for (d, &x) in self.directions.iter().zip(&w[m..]) {
            boundary.set(*d, x);
        }
        GeneralizedPricingForm {
            atoms,
            density: None,
            boundary,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instrument<T> {
    pub name: String,
    pub vector: Vec<T>,
    pub price: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteMarket<T> {
    pub space: AugmentedStateSpace<T>,
    pub instruments: Vec<Instrument<T>>,
}

impl<T: Scalar> FiniteMarket<T> {
    /// Validates vector lengths and drops exact duplicates (same vector and
    /// price); the first name is kept.
    pub fn new(space: AugmentedStateSpace<T>, instruments: Vec<Instrument<T>>) -> Result<Self, MarketError> {
        space.validate()?;
        let mut kept: Vec<Instrument<T>> = Vec::with_capacity(instruments.len());
        for inst in instruments {
            if inst.vector.len() != space.dim() {
                return Err(MarketError::VectorLength {
                    name: inst.name,
                    got: inst.vector.len(),
                    expected: space.dim(),
                });
            }
            if !inst.price.is_finite() || inst.vector.iter().any(|v| !v.is_finite()) {
                return Err(MarketError::NonFinite(inst.name));
            }
            if !kept.iter().any(|k| k.vector == inst.vector && k.price == inst.price) {
                kept.push(inst);
            }
        }
        Ok(Self {
            space,
            instruments: kept,
        })
    }

    pub fn from_payoffs(
        space: AugmentedStateSpace<T>,
        quotes: Vec<(String, Payoff<T>, T)>,
    ) -> Result<Self, MarketError> {
        let instruments = quotes
            .into_iter()
            .map(|(name, f, price)| {
                let vector = space.vector_of(&name, &f)?;
                Ok(Instrument { name, vector, price })
            })
            .collect::<Result<Vec<_>, MarketError>>()?;
        Self::new(space, instruments)
    }

    pub fn with_instrument(&self, name: &str, f: &Payoff<T>, price: T) -> Result<Self, MarketError> {
        let vector = self.space.vector_of(name, f)?;
        let mut instruments = self.instruments.clone();
        instruments.push(Instrument {
            name: name.to_string(),
            vector,
            price,
        });
        Self::new(self.space.clone(), instruments)
    }

    /// Every instrument's payoff and price multiplied by `lambda`.
    pub fn scaled(&self, lambda: T) -> Self {
        Self {
            space: self.space.clone(),
            instruments: self
                .instruments
                .iter()
                .map(|i| Instrument {
                    name: i.name.clone(),
                    vector: i.vector.iter().map(|&v| v * lambda).collect(),
                    price: i.price * lambda,
                })
                .collect(),
        }
    }

    fn equality_rows(&self) -> Vec<Constraint<T>> {
        self.instruments
            .iter()
            .map(|i| Constraint::new(i.vector.clone(), RowKind::Eq, i.price))
            .collect()
    }

    fn portfolio(&self, weights: &[T]) -> Vec<(String, T)> {
        self.instruments
            .iter()
            .zip(weights)
            .map(|(i, &w)| (i.name.clone(), w))
            .collect()
    }

    fn portfolio_payoff(&self, weights: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.space.dim()];
        for (inst, &w) in self.instruments.iter().zip(weights) {
            for (o, &v) in out.iter_mut().zip(&inst.vector) {
                *o += w * v;
            }
        }
        out
    }

    fn portfolio_cost(&self, weights: &[T]) -> T {
        self.instruments.iter().zip(weights).map(|(i, &w)| i.price * w).sum()
    }
}

/// Instrument weights with a nonnegative payoff on every coordinate and a
/// negative cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArbitragePortfolio<T> {
    pub weights: Vec<(String, T)>,
    pub payoff: Vec<T>,
    pub cost: T,
}

impl<T: Scalar> ArbitragePortfolio<T> {
    fn to_f64(&self) -> ArbitragePortfolio<f64> {
        ArbitragePortfolio {
            weights: self.weights.iter().map(|(n, w)| (n.clone(), w.as_f64())).collect(),
            payoff: self.payoff.iter().map(|v| v.as_f64()).collect(),
            cost: self.cost.as_f64(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "lowercase")]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de> + Default"))]
pub enum Consistency<T> {
    Consistent {
        weights: Vec<T>,
        form: GeneralizedPricingForm<T>,
    },
    Arbitrage(ArbitragePortfolio<T>),
}

impl<T> Consistency<T> {
    pub fn is_consistent(&self) -> bool {
        matches!(self, Consistency::Consistent { .. })
    }
}

/// Existence of a positive form repricing every instrument, or an arbitrage
/// portfolio built from the Farkas certificate.
pub fn check_consistency<T: Scalar>(mkt: &FiniteMarket<T>) -> Result<Consistency<T>, MarketError> {
    if mkt.instruments.is_empty() {
        return Err(MarketError::Empty);
    }
    let problem = LpProblem {
        sense: Sense::Minimize,
        objective: vec![T::zero(); mkt.space.dim()],
        constraints: mkt.equality_rows(),
    };
    match solve_lp(&problem)? {
        LpSolution::Optimal { x, .. } => Ok(Consistency::Consistent {
            form: mkt.space.form_from_weights(&x),
            weights: x,
        }),
        LpSolution::Infeasible { certificate } => {
            let scale = certificate.iter().fold(T::zero(), |m, v| m.max(v.abs()));
            let weights: Vec<T> = certificate.iter().map(|&v| v / scale).collect();
            Ok(Consistency::Arbitrage(ArbitragePortfolio {
                payoff: mkt.portfolio_payoff(&weights),
                cost: mkt.portfolio_cost(&weights),
                weights: mkt.portfolio(&weights),
            }))
        }
        LpSolution::Unbounded { .. } => unreachable!("zero objective cannot be unbounded"),
    }
}

/// One side of the price interval: the optimal value, the extremal form and
/// the dual hedge certifying it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de> + Default"))]
pub struct Bound<T> {
    pub value: T,
    /// Positive form attaining the bound; absent when unbounded.
    pub form: Option<GeneralizedPricingForm<T>>,
    pub form_weights: Option<Vec<T>>,
    /// Instrument portfolio dominating (upper) or dominated by (lower) the target.
    pub hedge: Option<Vec<(String, T)>>,
    pub hedge_cost: Option<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de> + Default"))]
pub struct PriceBounds<T> {
    pub lower: Bound<T>,
    pub upper: Bound<T>,
}

impl<T: Scalar> PriceBounds<T> {
    pub fn width(&self) -> T {
        self.upper.value - self.lower.value
    }
}

/// Weak-duality check of one bound: the form reprices the market and values
/// the target at `value`; the hedge dominates (or is dominated by) the
/// target on every coordinate and costs `value`. Returns the largest residual.
pub fn certificate_residual<T: Scalar>(mkt: &FiniteMarket<T>, target: &[T], bound: &Bound<T>, upper: bool) -> T {
    let mut worst = T::zero();
    if let Some(w) = &bound.form_weights {
        for inst in &mkt.instruments {
            let p: T = inst.vector.iter().zip(w).map(|(&a, &b)| a * b).sum();
            worst = worst.max((p - inst.price).abs());
        }
        worst = worst.max(w.iter().fold(T::zero(), |m, &v| m.max(-v)));
        let tv: T = target.iter().zip(w).map(|(&a, &b)| a * b).sum();
        worst = worst.max((tv - bound.value).abs());
    }
    if let Some(h) = &bound.hedge {
        let weights: Vec<T> = h.iter().map(|x| x.1).collect();
        let payoff = mkt.portfolio_payoff(&weights);
        for (&hp, &t) in payoff.iter().zip(target) {
            let shortfall = if upper { t - hp } else { hp - t };
            worst = worst.max(shortfall);
        }
        worst = worst.max((mkt.portfolio_cost(&weights) - bound.value).abs());
    }
    worst
}

fn bound<T: Scalar>(mkt: &FiniteMarket<T>, target: &[T], sense: Sense) -> Result<Bound<T>, MarketError> {
    let problem = LpProblem {
        sense,
        objective: target.to_vec(),
        constraints: mkt.equality_rows(),
    };
    match solve_lp(&problem)? {
        LpSolution::Optimal { x, duals, objective } => Ok(Bound {
            value: objective,
            form: Some(mkt.space.form_from_weights(&x)),
            form_weights: Some(x),
            hedge_cost: Some(mkt.portfolio_cost(&duals)),
            hedge: Some(mkt.portfolio(&duals)),
        }),
        LpSolution::Unbounded { .. } => Ok(Bound {
            value: if sense == Sense::Maximize {
                T::infinity()
            } else {
                T::neg_infinity()
            },
            form: None,
            form_weights: None,
            hedge: None,
            hedge_cost: None,
        }),
        LpSolution::Infeasible { .. } => match check_consistency(mkt)? {
            Consistency::Arbitrage(a) => Err(MarketError::Arbitrage(a.to_f64())),
            Consistency::Consistent { .. } => unreachable!("feasibility does not depend on the objective"),
        },
    }
}

/// No-arbitrage price interval of `target` with extremal forms and hedges.
pub fn price_bounds<T: Scalar>(mkt: &FiniteMarket<T>, target: &[T]) -> Result<PriceBounds<T>, MarketError> {
    if mkt.instruments.is_empty() {
        return Err(MarketError::Empty);
    }
    if target.len() != mkt.space.dim() {
        return Err(MarketError::VectorLength {
            name: "target".into(),
            got: target.len(),
            expected: mkt.space.dim(),
        });
    }
    if let Consistency::Arbitrage(a) = check_consistency(mkt)? {
        return Err(MarketError::Arbitrage(a.to_f64()));
    }
    Ok(PriceBounds {
        lower: bound(mkt, target, Sense::Minimize)?,
        upper: bound(mkt, target, Sense::Maximize)?,
    })
}

pub fn price_bounds_of_payoff<T: Scalar>(
    mkt: &FiniteMarket<T>,
    target: &Payoff<T>,
) -> Result<PriceBounds<T>, MarketError> {
    let t = mkt.space.vector_of("target", target)?;
    price_bounds(mkt, &t)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapEntry<T> {
    pub name: String,
    pub lower: T,
    pub upper: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletenessReport<T> {
    pub complete: bool,
    pub widest: Option<GapEntry<T>>,
    pub gaps: Vec<GapEntry<T>>,
}

/// Complete iff every basis payoff has a price interval of width `≤ tol`.
pub fn is_complete<T: Scalar>(
    mkt: &FiniteMarket<T>,
    basis: &[(String, Vec<T>)],
    tol: T,
) -> Result<CompletenessReport<T>, MarketError> {
    let mut gaps = Vec::with_capacity(basis.len());
    for (name, v) in basis {
        let b = price_bounds(mkt, v)?;
        gaps.push(GapEntry {
            name: name.clone(),
            lower: b.lower.value,
            upper: b.upper.value,
        });
    }
    // ties within `tol` resolve to the first basis payoff
    let max_width = gaps.iter().fold(T::neg_infinity(), |m, g| m.max(g.upper - g.lower));
    let widest = gaps.iter().find(|g| g.upper - g.lower >= max_width - tol).cloned();
    let complete = widest.as_ref().is_none_or(|g| g.upper - g.lower <= tol);
    Ok(CompletenessReport { complete, widest, gaps })
}

/// Market file entry: either a raw coordinate vector or a payoff descriptor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct InstrumentSpec<T> {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vector: Option<Vec<T>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payoff: Option<Payoff<T>>,
    pub price: T,
}

/// `{grid, directions, instruments: [{name, vector | payoff, price}]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct MarketSpec<T> {
    pub grid: Vec<T>,
    #[serde(default)]
    pub directions: Vec<GrowthDirection>,
    pub instruments: Vec<InstrumentSpec<T>>,
}

impl<T: Scalar> MarketSpec<T> {
    pub fn build(&self) -> Result<FiniteMarket<T>, MarketError> {
        let space = AugmentedStateSpace::new(self.grid.clone(), self.directions.clone())?;
        let mut instruments = Vec::with_capacity(self.instruments.len());
        for spec in &self.instruments {
            let vector = match (&spec.vector, &spec.payoff) {
                (Some(v), None) => v.clone(),
                (None, Some(f)) => space.vector_of(&spec.name, f)?,
                _ => return Err(MarketError::AmbiguousInstrument(spec.name.clone())),
            };
            instruments.push(Instrument {
                name: spec.name.clone(),
                vector,
                price: spec.price,
            });
        }
        FiniteMarket::new(space, instruments)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bond_stock(directions: Vec<GrowthDirection>) -> FiniteMarket<f64> {
        let space = AugmentedStateSpace::new(vec![0.0, 50.0, 100.0, 150.0, 200.0], directions).unwrap();
        FiniteMarket::from_payoffs(
            space,
            vec![
                ("bond".into(), Payoff::bond(), 1.0),
                ("stock".into(), Payoff::forward(0.0).unwrap(), 100.0),
            ],
        )
        .unwrap()
    }

    #[test]
    fn bond_stock_is_consistent() {
        let mkt = bond_stock(vec![GrowthDirection::LinearAtInfinity]);
        let Consistency::Consistent { form, weights } = check_consistency(&mkt).unwrap() else {
            panic!()
        };
        assert!(weights.iter().all(|&w| w >= 0.0));
        assert!((form.price(&Payoff::bond()).unwrap() - 1.0).abs() < 1e-12);
        assert!((form.price(&Payoff::forward(0.0).unwrap()).unwrap() - 100.0).abs() < 1e-9);
    }

    #[test]
    fn call_above_spot_is_arbitrage() {
        let mkt = bond_stock(vec![GrowthDirection::LinearAtInfinity])
            .with_instrument("call100", &Payoff::call(100.0).unwrap(), 105.0)
            .unwrap();
        let Consistency::Arbitrage(a) = check_consistency(&mkt).unwrap() else {
            panic!()
        };
        assert!(a.payoff.iter().all(|&v| v >= -1e-12));
        assert!(a.cost < 0.0);
        // brute force over (stock, call) portfolios: buy stock, sell call
        let w: Vec<f64> = a.weights.iter().map(|x| x.1).collect();
        assert!(w[1] > 0.0 && w[2] < 0.0);
    }

    #[test]
    fn call_bounds_with_and_without_slope() {
        let call = Payoff::call(100.0).unwrap();
        for (dirs, upper, hedge_stock) in [
            (vec![GrowthDirection::LinearAtInfinity], 100.0, 1.0),
            (vec![], 50.0, 0.5),
        ] {
            let mkt = bond_stock(dirs);
            let b = price_bounds_of_payoff(&mkt, &call).unwrap();
            assert!(b.lower.value.abs() < 1e-9);
            assert!((b.upper.value - upper).abs() < 1e-9);
            let t = mkt.space.vector_of("call", &call).unwrap();
            assert!(certificate_residual(&mkt, &t, &b.upper, true) < 1e-8);
            assert!(certificate_residual(&mkt, &t, &b.lower, false) < 1e-8);
            let stock = b.upper.hedge.as_ref().unwrap()[1].1;
            assert!((stock - hedge_stock).abs() < 1e-9);
        }
    }

    #[test]
    fn quoted_instrument_has_zero_width() {
        let mkt = bond_stock(vec![GrowthDirection::LinearAtInfinity]);
        let b = price_bounds_of_payoff(&mkt, &Payoff::forward(0.0).unwrap()).unwrap();
        assert!((b.lower.value - 100.0).abs() < 1e-9 && (b.upper.value - 100.0).abs() < 1e-9);
    }

    #[test]
    fn completeness_examples() {
        let mkt = bond_stock(vec![GrowthDirection::LinearAtInfinity]);
        let basis: Vec<(String, Vec<f64>)> = mkt
            .space
            .grid
            .iter()
            .map(|&k| {
                (
                    format!("call{k}"),
                    mkt.space.vector_of("c", &Payoff::call(k).unwrap()).unwrap(),
                )
            })
            .collect();
        let report = is_complete(&mkt, &basis, 1e-8).unwrap();
        assert!(!report.complete);
        let w = report.widest.unwrap();
        assert_eq!(w.name, "call100");
        assert!((w.upper - w.lower - 100.0).abs() < 1e-9);

        // full-rank market priced by a known positive form
        let weights = [0.1, 0.2, 0.3, 0.2, 0.1, 10.0];
        let mut full = mkt.clone();
        full.instruments.clear();
        for j in 0..6 {
            let mut v = vec![0.0; 6];
            v[j] = 1.0;
            full.instruments.push(Instrument {
                name: format!("e{j}"),
                price: weights[j],
                vector: v,
            });
        }
        assert!(is_complete(&full, &basis, 1e-8).unwrap().complete);
    }

    #[test]
    fn duplicates_removed() {
        let mkt = bond_stock(vec![])
            .with_instrument("bond2", &Payoff::bond(), 1.0)
            .unwrap();
        assert_eq!(mkt.instruments.len(), 2);
    }

    #[test]
    fn market_json() {
        let json = serde_json::json!({
            "grid": [0.0, 50.0, 100.0, 150.0, 200.0],
            "directions": ["linear_inf"],
            "instruments": [
                {"name": "bond", "payoff": {"kind": "bond"}, "price": 1.0},
                {"name": "stock", "vector": [0.0, 50.0, 100.0, 150.0, 200.0, 1.0], "price": 100.0}
            ]
        });
        let spec: MarketSpec<f64> = serde_json::from_value(json).unwrap();
        let mkt = spec.build().unwrap();
        assert_eq!(mkt.instruments[0].vector, vec![1.0, 1.0, 1.0, 1.0, 1.0, 0.0]);
    }
}
