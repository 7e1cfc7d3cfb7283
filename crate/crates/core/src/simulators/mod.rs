//! Seedable generative models and the variogram-based initializer.

mod basic;
mod export;
mod models;
mod spatial;
mod variogram;

pub use basic::{ar1_mle, sim_ar1, sim_gaussian_iid, sim_svol, sim_svol_with_latent, SvolParams};
pub use export::{read_dataset_csv, read_series_csv, write_dataset_csv};
pub use models::{
    Ar1MleEstimator, Ar1Model, BrownResnickModel, GaussianModel, SeriesSimulator, Simulator, SvolModel,
};
pub use spatial::{
    sim_brown_resnick, sim_gp, BrownResnickConfig, BrownResnickParams, BrownResnickSampler, BrownResnickStats,
    GpSampler, Grid2D, PowExpParams,
};
pub use variogram::{empirical_variogram, fit_powexp, normal_scores, EmpiricalVariogram, PowExpFit};
