//! Inference on common stochastic trends in nonstationary panels.
//!
//! The pipeline: project a T×p panel onto a deterministic sine basis
//! ([`design_matrix`]), take squared canonical correlations between panel
//! and basis ([`squared_canonical_correlations`]), estimate how many
//! eigenvalues stay near one ([`estimate_s_maxgap`], [`estimate_s_argmax_alt`],
//! [`estimate_s_sequence`]), and test inclusion hypotheses about the span the
//! trends live in ([`decide`]). Critical values come from the exact
//! univariate limit law ([`zeta1_quantile`]) or Monte Carlo simulation of
//! its multivariate counterpart ([`simulate_zeta`], [`CriticalValueTable`]).
//! A benchmark VAR(1) generator and its Monte Carlo experiments live in
//! [`dgp`].

#![forbid(unsafe_code)]

pub mod basis;
pub mod cca;
pub mod dgp;
mod error;
pub mod hypotheses;
pub mod limitdist;
mod rng;
pub mod trends;

pub use basis::{default_k, design_matrix, kl_basis_value, BasisKind, DesignMatrix};
pub use cca::{
    moment, squared_canonical_correlations, CcaOutput, CcaSolver, SeriesPanel, DEFAULT_COND_CAP,
};
pub use dgp::{
    mc_hypothesis, mc_selection, simulate_var1, DgpConfig, HypothesisCell, McCase, McGrid,
    McReport, SelectionCell,
};
pub use error::{Error, Result};
pub use hypotheses::{
    build_aggregation_hypothesis, build_autonomy_hypothesis, decide, decide_with_solver,
    orthogonal_complement, rank_profile, subsystems, DecisionLevels, DecisionOutcome, DecisionRule,
    HypothesisKind, HypothesisSpec, RankProfile, Subsystems, DEFAULT_RANK_TOL,
};
pub use limitdist::{
    confidence_stripe, simulate_zeta, zeta1_cdf, zeta1_mean, zeta1_pdf, zeta1_quantile,
    ConfidenceStripe, CriticalValueTable, NormKind, Provenance, SimSettings, ZetaDraws,
};
pub use trends::{
    estimate_s, estimate_s_argmax_alt, estimate_s_maxgap, estimate_s_sequence, tau, test_statistic,
    EstimateDiagnostics, SelectionMethod, TauVector, TrendEstimate,
};
