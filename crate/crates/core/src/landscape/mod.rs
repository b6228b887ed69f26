//! Region classification and numerical certification of the landscape bounds.

mod certify;
mod regions;
mod spectrum;
mod thresholds;

pub use certify::{
    certify_landscape, certify_point, escape_direction, fmt_f64, strict_convexity_fosp_check,
    write_region_csv, CertificationReport, CertifyConfig, CheckStatus, EscapeDirection,
    RegionReport, Sampler, BOUND_SLACK, REGION_CSV_HEADER,
};
pub use regions::{
    classify_metrics, classify_region, local_radius, saddle_grad_threshold, PointMetrics,
    RegionLabel, RegionParams, RegionSet, SADDLE_GAP,
};
pub use spectrum::{
    dense_hessian, hess_extreme_eigs, horizontal_basis, horizontal_dim, HessianSpectrumEstimate,
    SpectrumMethod, SpectrumOptions,
};
pub use thresholds::{
    compute_thresholds, delta_min, escape_curvature_coefficient, grad_floor_bounded,
    grad_floor_frobenius, grad_floor_spectral, local_hessian_bracket, psi,
    strong_convexity_margin, BoundContext, ThresholdReport,
};
