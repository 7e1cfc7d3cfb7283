//! Experiment presets, result files and plot data.

mod config;
mod metrics;
mod plotdata;
mod run;

pub use config::{BuiltModel, ExperimentConfig, ModelConfig, Preset, Scale, SeriesEstimator};
pub use metrics::{metric_table, metrics, MetricRow, ParamMetrics};
pub use plotdata::{emit_plotdata, BOXPLOT_FILE, INTERVALS_FILE, SCATTER_FILE};
pub use run::{
    load_bundle, run, run_to_dir, write_bundle, write_metrics, EstimateRow, ResultBundle, SampleRow, Timings,
    TraceLine, BOOTSTRAP_FILE, CONFIG_FILE, ESTIMATES_FILE, METRICS_FILE, TIMINGS_FILE, TRACE_FILE, TRAIN_FILE,
};
