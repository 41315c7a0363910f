//! Experiment driver: configuration, the reconstruction and prediction
//! runs, reports and plots.

mod config;
mod experiment;
mod plot;
mod report;

pub use config::{DatasetSpec, ExperimentConfig, ImageSource, LatentScaling, Method};
pub use experiment::{
    ae_seeds, build_dataset, codec_path, emit_all, emit_artifacts, fit_spectral, generate_dataset, lstm_seeds,
    prepare_data, run_prediction_experiment, run_reconstruction_experiment, streams, train_ae, ExperimentOutput,
    PredictionSample,
};
pub use plot::{emit_plot, render_plot, PlotLabels, Series};
pub use report::{config_hash, emit_report, DatasetSummary, ExperimentKind, Report, ReportRow};
