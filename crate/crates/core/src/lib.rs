//! Bayesian Cox proportional-hazards survival models.
//!
//! Three baseline-hazard families are supported: Weibull, piecewise constant
//! on a knot partition, and a log-scale cubic B-spline on the same partition.
//! Each family is paired with its prior scenarios (independent, hierarchical
//! and correlated random-walk priors), fitted with an adaptive
//! Metropolis-within-Gibbs sampler, and compared through DIC and LPML.
//! The [`simulate`] and [`study`] modules generate right-censored data by
//! hazard inversion and summarise replicated fits.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baseline;
pub mod data;
pub mod error;
pub mod inference;
pub mod quadrature;
pub mod roots;
pub mod sampler;
pub mod selection;
pub mod simulate;
pub mod splines;
pub mod study;

pub use baseline::{BSplineLogBaseline, BaselineModel, PiecewiseConstantBaseline, WeibullBaseline};
pub use data::{Dataset, SurvivalRecord};
pub use error::{Error, Result};
pub use inference::{BaselinePrior, BetaPrior, GammaPrior, ModelSpec, ParameterState, PriorScenario, SigmaHyperprior};
pub use sampler::{McmcConfig, PosteriorDraws};
pub use splines::KnotGrid;
