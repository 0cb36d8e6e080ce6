//! Small-parameter behaviour near a Grushin point: the series expansion of
//! the geodesics, the corner of the cut locus, and the convergence of the
//! rescaled exponential map from a nearby point to the nilpotent one.
//!
//! Asymptotic statements are checked as empirical convergence orders.

mod corner;
mod scaling;
mod series;

pub use corner::{
    corner_fit, cut_point_velocities, grushin_cut_point, grushin_cut_point_tol, Branch, CornerFit, GrushinCutPoint,
};
pub use scaling::{
    default_scaling_s_grid, default_theta_grid, perturbed_scaling_check, Coupling, ScalingReport, SCALING_SLOPE,
};
pub use series::{
    default_rho_grid, default_s_grid, rescaled_flow, rescaled_samples, series_report, series_terms, verify_series, RescaledCurve,
    RescaledPoint, SeriesReport, SeriesSlopes, SeriesTerms, SERIES_P_SLOPE, SERIES_X_SLOPE, SERIES_Y_SLOPE,
};
