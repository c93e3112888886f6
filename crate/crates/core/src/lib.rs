//! Arbitrage-free pricing with positive linear forms on payoff spaces,
//! including weights carried by the growth of a payoff at zero and infinity.
//!
//! Everything numeric is generic over [`scalar::Scalar`] (`f32` or `f64`);
//! the aliases below fix `f64`, with `F32` variants for the main types.

// `!(a < b)` is used deliberately so that NaN inputs fail validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod extension_lp;
pub mod kernel;
pub mod payoff_space;
pub mod pricing_form;
pub mod quadrature;
pub mod scalar;
pub mod stochvol;

pub use scalar::Scalar;

pub type Payoff = payoff_space::Payoff<f64>;
pub type PricingForm = pricing_form::GeneralizedPricingForm<f64>;
pub type CallCurve = pricing_form::CallCurve<f64>;
pub type ImpliedForm = pricing_form::ImpliedForm<f64>;
pub type AugmentedStateSpace = extension_lp::AugmentedStateSpace<f64>;
pub type FiniteMarket = extension_lp::FiniteMarket<f64>;
pub type PriceBounds = extension_lp::PriceBounds<f64>;
pub type LpProblem = extension_lp::simplex::LpProblem<f64>;
pub type KernelSpace = kernel::KernelSpace<f64>;
pub type Generator = kernel::Generator<f64>;
pub type PricingKernelOperator = kernel::PricingKernelOperator<f64>;
pub type SVParams = stochvol::SVParams<f64>;
pub type EstimatorReport = stochvol::EstimatorReport<f64>;

pub type PayoffF32 = payoff_space::Payoff<f32>;
pub type PricingFormF32 = pricing_form::GeneralizedPricingForm<f32>;
pub type CallCurveF32 = pricing_form::CallCurve<f32>;
pub type KernelSpaceF32 = kernel::KernelSpace<f32>;
pub type PricingKernelOperatorF32 = kernel::PricingKernelOperator<f32>;
pub type SVParamsF32 = stochvol::SVParams<f32>;
