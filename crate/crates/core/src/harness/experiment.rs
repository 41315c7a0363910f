use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use super::config::{DatasetSpec, ExperimentConfig, ImageSource, LatentScaling, Method};
use super::plot::{emit_plot, PlotLabels};
use super::report::{config_hash, emit_report, DatasetSummary, ExperimentKind, Report, ReportRow};
use crate::ae::LinearCodec;
use crate::codec::{reconstruction_mse, Identity, Representation, Scaled};
use crate::data::{self, SequenceDataset, TextureParams};
use crate::error::{Error, Result};
use crate::graphs::{build_correlation_graph, build_grid_graph, build_semi_geometric_graph, laplacian};
use crate::linalg::{sym_eig, Matrix, SymEig};
use crate::lstm::{evaluate_prediction, predict_free_run, train_lstm, LstmCell, LstmTrainOptions};
use crate::optim::TrainSchedule;
use crate::rng::derive_seed;
use crate::spectral::SpectralBasis;

/// Child seed streams of the experiment seed.
pub mod streams {
    pub const DATA: u64 = 1;
    pub const SPLIT: u64 = 2;
    pub const AE: u64 = 3;
    pub const LSTM: u64 = 4;
}

/// Decoded free-run predictions for one test sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSample {
    pub method: Method,
    pub m: usize,
    /// Index into the test split.
    pub sequence: usize,
    /// Real frames `W+1..=T`.
    pub target: Matrix,
    pub predicted: Matrix,
}

/// A report plus the artifacts worth persisting.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub report: Report,
    /// Trained autoencoders by latent dimension.
    pub codecs: Vec<(usize, LinearCodec)>,
    pub samples: Vec<PredictionSample>,
}

/// Builds the configured dataset; a pure function of the dataset description and seed.
pub fn build_dataset(spec: &DatasetSpec, seed: u64) -> Result<SequenceDataset> {
    match spec {
        DatasetSpec::MovingCrop {
            source,
            crop,
            frames,
            count,
        } => {
            let images = match source {
                ImageSource::Textures {
                    height,
                    width,
                    sigma_x,
                    sigma_y,
                } => data::generate_texture_images(
                    *count,
                    *height,
                    *width,
                    TextureParams {
                        sigma_x: *sigma_x,
                        sigma_y: *sigma_y,
                    },
                    derive_seed(seed, 0),
                )?,
                ImageSource::Stl10 { path } => data::load_stl10(path)?,
            };
            data::generate_moving_crop_dataset(&images, *crop, *frames, *count, derive_seed(seed, 1))
        }
        DatasetSpec::MovingSprite {
            canvas,
            sprite,
            frames,
            count,
        } => data::generate_moving_sprite_dataset(*canvas, *sprite, *frames, *count, seed),
        DatasetSpec::Csv { paths, window } => {
            let mut sequences = Vec::new();
            for path in paths {
                let series = data::load_csv_series(path)?;
                for start in (0..series.rows() / window).map(|k| k * window) {
                    sequences.push(Matrix::from_fn(*window, series.cols(), |r, c| series[(start + r, c)]));
                }
            }
            if sequences.is_empty() {
                return Err(Error::Config(format!("csv series are shorter than one window of {window} frames")));
            }
            SequenceDataset::new(sequences, None)
        }
        DatasetSpec::Tensor { path } => SequenceDataset::load(path),
    }
}

/// Dataset generated exactly as the experiments see it.
pub fn generate_dataset(config: &ExperimentConfig) -> Result<SequenceDataset> {
    config.validate()?;
    build_dataset(&config.dataset, derive_seed(config.seed, streams::DATA))
}

/// Validates the config, builds the dataset and splits it.
pub fn prepare_data(config: &ExperimentConfig) -> Result<(SequenceDataset, SequenceDataset)> {
    let dataset = generate_dataset(config)?;
    config.check_against(dataset.frame_dim(), dataset.frame_shape())?;
    data::split(&dataset, config.train_fraction, derive_seed(config.seed, streams::SPLIT))
}

/// Laplacian eigendecomposition for a graph method, fit on training data.
pub fn fit_spectral(method: Method, train: &SequenceDataset, keep_fraction: f64) -> Result<SymEig> {
    let grid = || {
        train
            .frame_shape()
            .ok_or_else(|| Error::Config(format!("method {method} needs frames on a pixel grid")))
    };
    let graph = match method {
        Method::GftGrid => {
            let (h, w) = grid()?;
            build_grid_graph(h, w)?
        }
        Method::GftGeo => {
            let (h, w) = grid()?;
            build_semi_geometric_graph(train.frames(), h, w)?
        }
        Method::GftCorr => build_correlation_graph(&train.stacked_frames(), keep_fraction)?,
        Method::Ae | Method::Raw => {
            return Err(Error::Config(format!("method {method} has no graph")));
        }
    };
    Ok(sym_eig(&laplacian(&graph))?)
}

/// `(init, shuffle)` seeds of the autoencoder with `m` latent dimensions.
pub fn ae_seeds(seed: u64, m: usize) -> (u64, u64) {
    let base = derive_seed(derive_seed(seed, streams::AE), m as u64);
    (derive_seed(base, 0), derive_seed(base, 1))
}

/// `(init, shuffle)` seeds of an LSTM of width `m`. They depend only on the
/// width, so methods compared at equal `m` share initialization and batch
/// order.
pub fn lstm_seeds(seed: u64, m: usize) -> (u64, u64) {
    let base = derive_seed(derive_seed(seed, streams::LSTM), m as u64);
    (derive_seed(base, 0), derive_seed(base, 1))
}

/// Trains the tied autoencoder on individual training frames.
pub fn train_ae(frames: &Matrix, m: usize, schedule: &TrainSchedule, seed: u64) -> Result<(LinearCodec, Vec<f64>)> {
    let (init_seed, shuffle_seed) = ae_seeds(seed, m);
    let codec = LinearCodec::init(frames.cols(), m, init_seed)?;
    crate::ae::train_autoencoder(&codec, frames, schedule, shuffle_seed)
}

pub fn codec_path(dir: &Path, m: usize) -> PathBuf {
    dir.join(format!("ae_m{m}.gts"))
}

enum Codec {
    Spectral(SpectralBasis),
    Ae(LinearCodec),
    Raw(Identity),
}

impl Codec {
    fn rep(&self) -> &dyn Representation {
        match self {
            Codec::Spectral(b) => b,
            Codec::Ae(c) => c,
            Codec::Raw(i) => i,
        }
    }
}

struct Fitted<'a> {
    config: &'a ExperimentConfig,
    train_frames: Matrix,
    test_frames: Matrix,
    eigs: Vec<(Method, SymEig)>,
}

impl<'a> Fitted<'a> {
    fn new(config: &'a ExperimentConfig, train: &SequenceDataset, test: &SequenceDataset) -> Result<Self> {
        let spectral: Vec<Method> = config
            .methods
            .iter()
            .copied()
            .filter(|m| !matches!(m, Method::Ae | Method::Raw))
            .collect();
        let eigs = par_map(&spectral, |&method| fit_spectral(method, train, config.keep_fraction))
            .into_iter()
            .zip(&spectral)
            .map(|(eig, &method)| eig.map(|e| (method, e)))
            .collect::<Result<_>>()?;
        Ok(Self {
            config,
            train_frames: train.stacked_frames(),
            test_frames: test.stacked_frames(),
            eigs,
        })
    }

    fn codec(&self, method: Method, m: usize, reuse_dir: Option<&Path>) -> Result<(Codec, Vec<f64>)> {
        let n = self.train_frames.cols();
        Ok(match method {
            Method::Raw => (Codec::Raw(Identity { n }), vec![]),
            Method::Ae => match reuse_dir {
                Some(dir) => {
                    let path = codec_path(dir, m);
                    let codec = LinearCodec::load(&path)?;
                    if (codec.n(), codec.m()) != (n, m) {
                        return Err(Error::format(
                            path.display(),
                            format!("codec is {}x{}, expected {n}x{m}", codec.n(), codec.m()),
                        ));
                    }
                    (Codec::Ae(codec), vec![])
                }
                None => {
                    let (codec, history) = train_ae(&self.train_frames, m, &self.config.ae_schedule, self.config.seed)?;
                    (Codec::Ae(codec), history)
                }
            },
            _ => {
                let eig = &self.eigs.iter().find(|(k, _)| *k == method).expect("fitted").1;
                (Codec::Spectral(SpectralBasis::from_eig(eig, m)?), vec![])
            }
        })
    }
}

fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Cells to compute. The raw baseline does not depend on `m`, so it is
/// computed once at the first configured dimension.
fn cells(config: &ExperimentConfig) -> Vec<(Method, usize)> {
    config
        .methods
        .iter()
        .flat_map(|&method| {
            let dims: &[usize] = if method == Method::Raw {
                &config.latent_dims[..1]
            } else {
                &config.latent_dims
            };
            dims.iter().map(move |&m| (method, m))
        })
        .collect()
}

struct CellOut {
    row: ReportRow,
    codec: Option<LinearCodec>,
    samples: Vec<PredictionSample>,
}

fn assemble(
    kind: ExperimentKind,
    config: &ExperimentConfig,
    train: &SequenceDataset,
    test: &SequenceDataset,
    cell_keys: &[(Method, usize)],
    outs: Vec<CellOut>,
    start: Instant,
) -> ExperimentOutput {
    let mut rows = Vec::new();
    let mut codecs = Vec::new();
    let mut samples = Vec::new();
    for (&(method, _), out) in cell_keys.iter().zip(outs) {
        if method == Method::Raw {
            for &m in &config.latent_dims {
                rows.push(ReportRow { m, ..out.row.clone() });
            }
        } else {
            rows.push(out.row);
        }
        if let Some(c) = out.codec {
            codecs.push((c.m(), c));
        }
        samples.extend(out.samples);
    }
    let report = Report {
        kind,
        seed: config.seed,
        config_hash: config_hash(config),
        wall_time_secs: start.elapsed().as_secs_f64(),
        dataset: DatasetSummary {
            train_sequences: train.len(),
            test_sequences: test.len(),
            frames_per_sequence: train.frames_per_sequence(),
            frame_dim: train.frame_dim(),
            frame_shape: train.frame_shape(),
        },
        rows,
        config: config.clone(),
    };
    ExperimentOutput { report, codecs, samples }
}

/// Test-set reconstruction MSE of every configured (method, m). Graphs and
/// autoencoders are fit on the training split only.
pub fn run_reconstruction_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    let start = Instant::now();
    let (train, test) = prepare_data(config)?;
    let fitted = Fitted::new(config, &train, &test)?;
    let keys = cells(config);
    let outs = par_map(&keys, |&(method, m)| -> Result<CellOut> {
        let (codec, ae_loss) = fitted.codec(method, m, None)?;
        let recon_mse = reconstruction_mse(codec.rep(), &fitted.test_frames)?;
        Ok(CellOut {
            row: ReportRow {
                method,
                m,
                recon_mse,
                pred_mse: None,
                ae_loss,
                lstm_loss: vec![],
            },
            codec: match codec {
                Codec::Ae(c) => Some(c),
                _ => None,
            },
            samples: vec![],
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(assemble(ExperimentKind::Reconstruction, config, &train, &test, &keys, outs, start))
}

/// Trains one FC-LSTM per (method, m) on encoded training sequences and
/// scores decoded free-run predictions against the raw test frames.
pub fn run_prediction_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    let start = Instant::now();
    let (train, test) = prepare_data(config)?;
    config.check_warmup(train.frames_per_sequence())?;
    if let Some(dir) = &config.ae_codecs {
        if config.methods.contains(&Method::Ae) {
            for &m in &config.latent_dims {
                let path = codec_path(dir, m);
                if !path.is_file() {
                    return Err(Error::Config(format!("missing autoencoder codec {}", path.display())));
                }
            }
        }
    }
    let fitted = Fitted::new(config, &train, &test)?;
    let keys = cells(config);
    let warmup = config.warmup;
    let outs = par_map(&keys, |&(method, m)| -> Result<CellOut> {
        let (codec, ae_loss) = fitted.codec(method, m, config.ae_codecs.as_deref())?;
        let rep = codec.rep();
        let recon_mse = reconstruction_mse(rep, &fitted.test_frames)?;

        let mut train_latent = train
            .sequences()
            .iter()
            .map(|s| rep.encode_rows(s))
            .collect::<Result<Vec<_>>>()?;
        let scaled = match config.latent_scaling {
            LatentScaling::None => None,
            LatentScaling::MaxAbs => Some(Scaled::fit_max_abs(rep, &train_latent)?),
        };
        if let Some(s) = &scaled {
            train_latent.iter_mut().for_each(|z| z.scale(1.0 / s.scale));
        }
        let coder: &dyn Representation = match &scaled {
            Some(s) => s,
            None => rep,
        };
        let test_latent = test
            .sequences()
            .iter()
            .map(|s| coder.encode_rows(s))
            .collect::<Result<Vec<_>>>()?;

        let width = rep.latent_dim();
        let (init_seed, shuffle_seed) = lstm_seeds(config.seed, width);
        let options = LstmTrainOptions {
            clip_norm: config.clip_norm,
        };
        let (cell, lstm_loss) = train_lstm(
            &LstmCell::init(width, init_seed)?,
            &train_latent,
            &config.lstm_schedule,
            warmup,
            shuffle_seed,
            options,
        )?;
        let pred_mse = evaluate_prediction(&cell, &test_latent, test.sequences(), warmup, coder)?;

        let samples = (0..config.prediction_samples.min(test.len()))
            .map(|i| {
                let raw = &test.sequences()[i];
                Ok(PredictionSample {
                    method,
                    m,
                    sequence: i,
                    target: Matrix::from_fn(raw.rows() - warmup, raw.cols(), |r, c| raw[(r + warmup, c)]),
                    predicted: predict_free_run(&cell, &test_latent[i], warmup, coder)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(CellOut {
            row: ReportRow {
                method,
                m,
                recon_mse,
                pred_mse: Some(pred_mse),
                ae_loss,
                lstm_loss,
            },
            codec: None,
            samples,
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(assemble(ExperimentKind::Prediction, config, &train, &test, &keys, outs, start))
}

/// Writes codecs as `codecs/ae_m{m}.gts` and prediction samples as
/// `samples/{method}_m{m}_seq{i}.gts` (rank `[2, T-W, ...frame]`, target
/// first).
pub fn emit_artifacts(output: &ExperimentOutput, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    let mut written = Vec::new();
    if !output.codecs.is_empty() {
        let codec_dir = dir.join("codecs");
        fs::create_dir_all(&codec_dir).map_err(|e| Error::io(&codec_dir, e))?;
        for (m, codec) in &output.codecs {
            let path = codec_path(&codec_dir, *m);
            codec.save(&path)?;
            written.push(path);
        }
    }
    if !output.samples.is_empty() {
        let sample_dir = dir.join("samples");
        fs::create_dir_all(&sample_dir).map_err(|e| Error::io(&sample_dir, e))?;
        let mut frame_dims = vec![];
        match output.report.dataset.frame_shape {
            Some((h, w)) => frame_dims.extend([h, w]),
            None => frame_dims.push(output.report.dataset.frame_dim),
        }
        for s in &output.samples {
            let path = sample_dir.join(format!("{}_m{}_seq{}.gts", s.method, s.m, s.sequence));
            let mut dims = vec![2, s.target.rows()];
            dims.extend(&frame_dims);
            let mut values = s.target.as_slice().to_vec();
            values.extend_from_slice(s.predicted.as_slice());
            data::save_tensor(&path, &dims, &values)?;
            written.push(path);
        }
    }
    Ok(written)
}

/// Report, CSV, artifacts, and an MSE-versus-m plot (skipped when there is
/// only one latent dimension).
pub fn emit_all(output: &ExperimentOutput, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    let mut written = emit_report(&output.report, dir)?;
    written.extend(emit_artifacts(output, dir)?);
    if output.report.config.latent_dims.len() >= 2 {
        let (name, labels, series) = match output.report.kind {
            ExperimentKind::Reconstruction => (
                "recon_mse.svg",
                PlotLabels::default(),
                output.report.curves(|r| Some(r.recon_mse)),
            ),
            ExperimentKind::Prediction => (
                "pred_mse.svg",
                PlotLabels {
                    title: "Free-run prediction error".into(),
                    ..PlotLabels::default()
                },
                output.report.curves(|r| r.pred_mse),
            ),
        };
        let path = dir.join(name);
        emit_plot(&series, &labels, &path)?;
        written.push(path);
    }
    Ok(written)
}
