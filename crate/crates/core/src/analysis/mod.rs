//! Estimators: survival functions and tail fits, susceptibility and
//! finite-size scaling, flux features and regressions.

pub mod flux;
pub mod fss;
pub mod regression;
pub mod sf;
pub mod stats;
pub mod synth;

pub use flux::{flux_features, FlowType, FluxFeatures, FluxRecord, HawkesIntensity, StreamEvent};
pub use fss::{fss_pipeline, susceptibility, ChiCurve, FssConfig, PeakEstimate, PlantedScaling, ScalingFit};
pub use regression::{
    correlation_surface, flux_regression, weighted_least_squares, Coefficient, CorrelationSurface,
    FluxRegressionResult, RegressionConfig,
};
pub use sf::{empirical_sf, fit_geometric, fit_tail_exponent, tail_sensitivity, Ccdf, GeometricFit, TailFit};
pub use synth::{synthetic_stream, SyntheticStreamParams};
