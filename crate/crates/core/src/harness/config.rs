//! JSON experiment configuration.
//!
//! ```json
//! {
//!   "dataset": {
//!     "kind": "moving_crop",
//!     "source": { "kind": "textures", "height": 32, "width": 32 },
//!     "crop": 16, "frames": 20, "count": 200
//!   },
//!   "methods": ["gft-grid", "gft-geo", "ae", "raw"],
//!   "latent_dims": [16, 32, 64],
//!   "seed": 7
//! }
//! ```
//!
//! Everything except `dataset`, `methods` and `latent_dims` has a default.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::TextureParams;
use crate::error::{Error, Result};
use crate::optim::TrainSchedule;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "gft-grid")]
    GftGrid,
    #[serde(rename = "gft-geo")]
    GftGeo,
    #[serde(rename = "gft-corr")]
    GftCorr,
    #[serde(rename = "ae")]
    Ae,
    #[serde(rename = "raw")]
    Raw,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::GftGrid, Method::GftGeo, Method::GftCorr, Method::Ae, Method::Raw];

    pub fn name(self) -> &'static str {
        match self {
            Method::GftGrid => "gft-grid",
            Method::GftGeo => "gft-geo",
            Method::GftCorr => "gft-corr",
            Method::Ae => "ae",
            Method::Raw => "raw",
        }
    }

    /// Needs frames laid out on a pixel grid.
    pub fn needs_grid(self) -> bool {
        matches!(self, Method::GftGrid | Method::GftGeo)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown method {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ImageSource {
    /// Synthetic smooth textures, one per sequence.
    Textures {
        height: usize,
        width: usize,
        #[serde(default = "default_sigma_x")]
        sigma_x: f64,
        #[serde(default = "default_sigma_y")]
        sigma_y: f64,
    },
    /// An STL-10 binary image file (e.g. `unlabeled_X.bin`).
    Stl10 { path: PathBuf },
}

fn default_sigma_x() -> f64 {
    TextureParams::default().sigma_x
}

fn default_sigma_y() -> f64 {
    TextureParams::default().sigma_y
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSpec {
    MovingCrop {
        source: ImageSource,
        crop: usize,
        frames: usize,
        count: usize,
    },
    MovingSprite {
        canvas: usize,
        sprite: usize,
        frames: usize,
        count: usize,
    },
    /// Node series, one CSV per recording (rows are time points), cut into
    /// consecutive non-overlapping windows of `window` frames.
    Csv { paths: Vec<PathBuf>, window: usize },
    /// A sequence tensor written by `gen-data` or [`SequenceDataset::save`].
    ///
    /// [`SequenceDataset::save`]: crate::data::SequenceDataset::save
    Tensor { path: PathBuf },
}

impl DatasetSpec {
    /// Frame grid known from the dataset description alone (file datasets return `None`).
    pub fn declared_grid(&self) -> Option<(usize, usize)> {
        match self {
            DatasetSpec::MovingCrop { crop, .. } => Some((*crop, *crop)),
            DatasetSpec::MovingSprite { canvas, .. } => Some((*canvas, *canvas)),
            _ => None,
        }
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        match self {
            DatasetSpec::MovingCrop {
                source: ImageSource::Stl10 { path },
                ..
            } => fix(path),
            DatasetSpec::Csv { paths, .. } => paths.iter_mut().for_each(fix),
            DatasetSpec::Tensor { path } => fix(path),
            _ => {}
        }
    }
}

/// Rescaling of latent codes before they reach the LSTM.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatentScaling {
    #[default]
    None,
    /// Divide by the largest training-code magnitude so codes fit the
    /// `tanh` output range of the cell.
    MaxAbs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    pub methods: Vec<Method>,
    pub latent_dims: Vec<usize>,
    #[serde(default = "TrainSchedule::autoencoder_images")]
    pub ae_schedule: TrainSchedule,
    #[serde(default = "TrainSchedule::lstm")]
    pub lstm_schedule: TrainSchedule,
    /// Real frames fed to the LSTM before it runs on its own predictions.
    #[serde(default = "default_warmup")]
    pub warmup: usize,
    /// Fraction of node pairs kept as edges of the correlation graph.
    #[serde(default = "default_keep_fraction")]
    pub keep_fraction: f64,
    #[serde(default)]
    pub latent_scaling: LatentScaling,
    #[serde(default)]
    pub clip_norm: Option<f64>,
    /// Directory of `ae_m{m}.gts` codecs saved by a reconstruction run. When
    /// absent, autoencoders are trained here with the same derived seeds a
    /// reconstruction run uses, which reproduces its codecs exactly.
    #[serde(default)]
    pub ae_codecs: Option<PathBuf>,
    /// Test sequences whose decoded predictions are dumped per cell.
    #[serde(default = "default_prediction_samples")]
    pub prediction_samples: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_train_fraction() -> f64 {
    0.7
}

fn default_warmup() -> usize {
    10
}

fn default_keep_fraction() -> f64 {
    0.05
}

fn default_prediction_samples() -> usize {
    1
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Reads a config file; relative dataset paths are taken relative to
    /// the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config: Self = serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.dataset.resolve_paths(base);
        if let Some(dir) = &mut config.ae_codecs {
            if dir.is_relative() {
                *dir = base.join(&*dir);
            }
        }
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Checks that do not need the data.
    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::Config("no methods configured".into()));
        }
        if self.latent_dims.is_empty() {
            return Err(Error::Config("no latent dimensions configured".into()));
        }
        for (i, m) in self.methods.iter().enumerate() {
            if self.methods[..i].contains(m) {
                return Err(Error::Config(format!("method {m} listed twice")));
            }
        }
        for (i, m) in self.latent_dims.iter().enumerate() {
            if *m == 0 {
                return Err(Error::Config("latent dimension 0".into()));
            }
            if self.latent_dims[..i].contains(m) {
                return Err(Error::Config(format!("latent dimension {m} listed twice")));
            }
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::OutOfRange {
                name: "train_fraction",
                range: "(0, 1)",
                value: self.train_fraction,
            });
        }
        if !(self.keep_fraction > 0.0 && self.keep_fraction <= 1.0) {
            return Err(Error::OutOfRange {
                name: "keep_fraction",
                range: "(0, 1]",
                value: self.keep_fraction,
            });
        }
        if let Some(c) = self.clip_norm {
            if !(c.is_finite() && c > 0.0) {
                return Err(Error::OutOfRange {
                    name: "clip_norm",
                    range: "(0, inf)",
                    value: c,
                });
            }
        }
        self.ae_schedule.validate()?;
        self.lstm_schedule.validate()?;
        match &self.dataset {
            DatasetSpec::MovingCrop { crop, frames, count, .. } => {
                nonzero("crop", *crop)?;
                nonzero("frames", *frames)?;
                nonzero("count", *count)?;
            }
            DatasetSpec::MovingSprite {
                canvas,
                sprite,
                frames,
                count,
            } => {
                nonzero("canvas", *canvas)?;
                nonzero("sprite", *sprite)?;
                nonzero("frames", *frames)?;
                nonzero("count", *count)?;
            }
            DatasetSpec::Csv { paths, window } => {
                if paths.is_empty() {
                    return Err(Error::Config("csv dataset lists no files".into()));
                }
                nonzero("window", *window)?;
            }
            DatasetSpec::Tensor { .. } => {}
        }
        if let Some(grid) = self.dataset.declared_grid() {
            self.check_against(grid.0 * grid.1, Some(grid))?;
        } else if let DatasetSpec::Csv { .. } = self.dataset {
            if let Some(m) = self.methods.iter().find(|m| m.needs_grid()) {
                return Err(Error::Config(format!("method {m} needs image frames; csv series have no pixel grid")));
            }
        }
        Ok(())
    }

    /// Checks against the frame layout of the loaded data.
    pub fn check_against(&self, n: usize, grid: Option<(usize, usize)>) -> Result<()> {
        if grid.is_none() {
            if let Some(m) = self.methods.iter().find(|m| m.needs_grid()) {
                return Err(Error::Config(format!("method {m} needs frames on a pixel grid")));
            }
        }
        if let Some(&m) = self.latent_dims.iter().find(|&&m| m > n) {
            return Err(Error::LatentDimOutOfRange { m, n });
        }
        Ok(())
    }

    /// Warm-up bounds for `frames` per sequence.
    pub fn check_warmup(&self, frames: usize) -> Result<()> {
        if self.warmup == 0 || self.warmup >= frames {
            return Err(Error::WarmupOutOfRange {
                warmup: self.warmup,
                frames,
                max: frames.saturating_sub(1),
            });
        }
        Ok(())
    }
}

fn nonzero(name: &'static str, v: usize) -> Result<()> {
    if v == 0 {
        return Err(Error::Config(format!("dataset {name} must be positive")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "dataset": {"kind": "moving_sprite", "canvas": 8, "sprite": 3, "frames": 6, "count": 10},
        "methods": ["gft-grid", "ae"],
        "latent_dims": [4, 8]
    }"#;

    #[test]
    fn defaults_fill_in() {
        let c = ExperimentConfig::from_json(MINIMAL).unwrap();
        assert_eq!(c.warmup, 10);
        assert_eq!(c.train_fraction, 0.7);
        assert_eq!(c.keep_fraction, 0.05);
        assert_eq!(c.ae_schedule, TrainSchedule::autoencoder_images());
        assert_eq!(c.lstm_schedule, TrainSchedule::lstm());
        assert_eq!(c.latent_scaling, LatentScaling::None);
        assert_eq!(c.seed, 0);
        c.validate().unwrap();
    }

    #[test]
    fn json_round_trip() {
        let c = ExperimentConfig::from_json(MINIMAL).unwrap();
        assert_eq!(ExperimentConfig::from_json(&c.to_json()).unwrap(), c);
    }

    #[test]
    fn method_names() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
            assert_eq!(serde_json::to_string(&m).unwrap(), format!("\"{m}\""));
        }
        assert!("pca".parse::<Method>().is_err());
    }

    #[test]
    fn rejects_bad_configs() {
        let mut c = ExperimentConfig::from_json(MINIMAL).unwrap();
        c.latent_dims = vec![65];
        assert!(matches!(c.validate(), Err(Error::LatentDimOutOfRange { m: 65, n: 64 })));

        let mut c = ExperimentConfig::from_json(MINIMAL).unwrap();
        c.methods.push(Method::Ae);
        assert!(c.validate().is_err());

        let mut c = ExperimentConfig::from_json(MINIMAL).unwrap();
        c.dataset = DatasetSpec::Csv {
            paths: vec!["a.csv".into()],
            window: 5,
        };
        let err = c.validate().unwrap_err();
        assert!(err.to_string().contains("gft-grid"), "{err}");

        assert!(ExperimentConfig::from_json(r#"{"dataset": {"kind": "nope"}, "methods": [], "latent_dims": []}"#).is_err());
        let typo = MINIMAL.replace("\"latent_dims\"", "\"latent_dim\"");
        assert!(ExperimentConfig::from_json(&typo).is_err());
    }

    #[test]
    fn warmup_bounds() {
        let mut c = ExperimentConfig::from_json(MINIMAL).unwrap();
        c.warmup = 5;
        c.check_warmup(6).unwrap();
        assert!(c.check_warmup(5).is_err());
        c.warmup = 0;
        assert!(c.check_warmup(6).is_err());
    }

    #[test]
    fn relative_paths_follow_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        fs::write(
            &path,
            r#"{"dataset": {"kind": "tensor", "path": "data/x.gts"}, "methods": ["raw"], "latent_dims": [1], "ae_codecs": "codecs"}"#,
        )
        .unwrap();
        let c = ExperimentConfig::load(&path).unwrap();
        assert_eq!(c.dataset, DatasetSpec::Tensor { path: dir.path().join("data/x.gts") });
        assert_eq!(c.ae_codecs, Some(dir.path().join("codecs")));
    }
}
