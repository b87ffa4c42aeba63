//! Panel regressions: fixed-effects OLS with cluster-robust covariance and
//! one-step difference GMM.

mod arellano_bond;
mod cluster;
mod fe_ols;
mod frame;
mod result;
mod terms;

pub use arellano_bond::{fit_arellano_bond, AbSpec};
pub use cluster::{cluster_meat, clustered_covariance, dense_ids};
pub use fe_ols::{
    cluster_ids, drop_singletons, fe_ids, fit_fe_ols, Absorber, ClusterLevel, FixedEffect, RegressionSpec,
    DEMEAN_MAX_ITER, DEMEAN_TOL,
};
pub use frame::Frame;
pub use result::{stars, write_result, Coefficient, Method, RegressionResult, RESULT_HEADER, Z_01, Z_05, Z_10};
pub use terms::{build_interactions, Cmp, Factor, Filter, Term};
