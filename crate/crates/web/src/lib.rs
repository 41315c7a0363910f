//! Browser demo: reconstruct a texture crop from its lowest graph
//! frequencies, look at individual basis vectors, and plot the error curve.
//!
//! [`DemoCore`] holds the logic and runs natively; [`Demo`] is the thin
//! `wasm-bindgen` wrapper the page talks to.

use gtslatent::codec::Representation;
use gtslatent::data::{generate_moving_crop_dataset, generate_texture_images, TextureParams};
use gtslatent::graphs::{build_grid_graph, build_semi_geometric_graph, laplacian};
use gtslatent::harness::{render_plot, PlotLabels, Series};
use gtslatent::linalg::{mse, sym_eig, SymEig};
use gtslatent::rng::derive_seed;
use gtslatent::spectral::SpectralBasis;
use gtslatent::{Error, Result};
use wasm_bindgen::prelude::*;

const TRAIN_SEQUENCES: usize = 24;
const SHOWN_FRAMES: usize = 8;
const FRAMES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphKind {
    Grid,
    Geo,
}

impl GraphKind {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "grid" => Ok(GraphKind::Grid),
            "geo" => Ok(GraphKind::Geo),
            other => Err(Error::Config(format!("unknown graph {other:?} (expected \"grid\" or \"geo\")"))),
        }
    }
}

pub struct DemoCore {
    side: usize,
    frames: Vec<Vec<f64>>,
    grid: SymEig,
    geo: SymEig,
}

impl DemoCore {
    /// Textures of `2·side` pixels, cropped to `side x side` windows. The
    /// semi-geometric graph is fit on training crops; the shown frames come
    /// from other images.
    pub fn new(seed: u64, side: usize) -> Result<Self> {
        if side < 2 {
            return Err(Error::Config("side must be at least 2".into()));
        }
        let count = TRAIN_SEQUENCES + SHOWN_FRAMES;
        let images = generate_texture_images(count, 2 * side, 2 * side, TextureParams::default(), derive_seed(seed, 0))?;
        let dataset = generate_moving_crop_dataset(&images, side, FRAMES, count, derive_seed(seed, 1))?;
        let (train, shown) = dataset.sequences().split_at(TRAIN_SEQUENCES);
        let train_frames = train.iter().flat_map(|s| (0..s.rows()).map(move |r| s.row(r)));
        let geo_graph = build_semi_geometric_graph(train_frames, side, side)?;
        Ok(Self {
            side,
            frames: shown.iter().map(|s| s.row(0).to_vec()).collect(),
            grid: sym_eig(&laplacian(&build_grid_graph(side, side)?))?,
            geo: sym_eig(&laplacian(&geo_graph))?,
        })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn n(&self) -> usize {
        self.side * self.side
    }

    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    pub fn frame(&self, index: usize) -> Result<&[f64]> {
        self.frames.get(index).map(Vec::as_slice).ok_or(Error::OutOfRange {
            name: "frame index",
            range: "[0, frame_count)",
            value: index as f64,
        })
    }

    fn eig(&self, kind: GraphKind) -> &SymEig {
        match kind {
            GraphKind::Grid => &self.grid,
            GraphKind::Geo => &self.geo,
        }
    }

    pub fn reconstruct(&self, index: usize, kind: GraphKind, m: usize) -> Result<Vec<f64>> {
        let basis = SpectralBasis::from_eig(self.eig(kind), m)?;
        basis.round_trip(self.frame(index)?)
    }

    pub fn reconstruction_mse(&self, index: usize, kind: GraphKind, m: usize) -> Result<f64> {
        Ok(mse(self.frame(index)?, &self.reconstruct(index, kind, m)?)?)
    }

    /// The `k`-th basis vector (ascending eigenvalue) and its eigenvalue.
    pub fn basis_vector(&self, kind: GraphKind, k: usize) -> Result<(Vec<f64>, f64)> {
        let eig = self.eig(kind);
        if k >= self.n() {
            return Err(Error::LatentDimOutOfRange { m: k + 1, n: self.n() });
        }
        Ok((eig.vectors.col(k), eig.values[k]))
    }

    /// Mean reconstruction MSE over the shown frames for `m = 1, 2, 4, …, n`.
    pub fn mse_curve(&self, kind: GraphKind) -> Result<Vec<(f64, f64)>> {
        let mut dims: Vec<usize> = std::iter::successors(Some(1usize), |m| Some(m * 2))
            .take_while(|&m| m < self.n())
            .collect();
        dims.push(self.n());
        dims.into_iter()
            .map(|m| {
                let total: f64 = (0..self.frame_count())
                    .map(|i| self.reconstruction_mse(i, kind, m))
                    .sum::<Result<f64>>()?;
                Ok((m as f64, total / self.frame_count() as f64))
            })
            .collect()
    }

    pub fn mse_curve_svg(&self) -> Result<String> {
        let series = vec![
            Series {
                label: "grid".into(),
                points: self.mse_curve(GraphKind::Grid)?,
            },
            Series {
                label: "geo".into(),
                points: self.mse_curve(GraphKind::Geo)?,
            },
        ];
        render_plot(&series, &PlotLabels::default())
    }
}

/// Grayscale RGBA for values in `[-1, 1]`.
pub fn gray_rgba(values: &[f64]) -> Vec<u8> {
    values
        .iter()
        .flat_map(|v| {
            let g = ((v.clamp(-1.0, 1.0) + 1.0) * 127.5).round() as u8;
            [g, g, g, 255]
        })
        .collect()
}

/// Blue-white-red RGBA, symmetric around zero and scaled to the largest
/// magnitude.
pub fn diverging_rgba(values: &[f64]) -> Vec<u8> {
    let peak = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    values
        .iter()
        .flat_map(|&v| {
            let t = if peak > 0.0 { v / peak } else { 0.0 };
            let fade = (255.0 * (1.0 - t.abs())).round() as u8;
            if t >= 0.0 {
                [255, fade, fade, 255]
            } else {
                [fade, fade, 255, 255]
            }
        })
        .collect()
}

fn js(e: Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub struct Demo {
    core: DemoCore,
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u32, side: usize) -> std::result::Result<Demo, JsError> {
        Ok(Demo {
            core: DemoCore::new(seed as u64, side).map_err(js)?,
        })
    }

    pub fn side(&self) -> usize {
        self.core.side()
    }

    #[wasm_bindgen(js_name = frameCount)]
    pub fn frame_count(&self) -> usize {
        self.core.frame_count()
    }

    #[wasm_bindgen(js_name = frameRgba)]
    pub fn frame_rgba(&self, index: usize) -> std::result::Result<Vec<u8>, JsError> {
        Ok(gray_rgba(self.core.frame(index).map_err(js)?))
    }

    #[wasm_bindgen(js_name = reconstructRgba)]
    pub fn reconstruct_rgba(&self, index: usize, graph: &str, m: usize) -> std::result::Result<Vec<u8>, JsError> {
        let kind = GraphKind::parse(graph).map_err(js)?;
        Ok(gray_rgba(&self.core.reconstruct(index, kind, m).map_err(js)?))
    }

    #[wasm_bindgen(js_name = reconstructionMse)]
    pub fn reconstruction_mse(&self, index: usize, graph: &str, m: usize) -> std::result::Result<f64, JsError> {
        let kind = GraphKind::parse(graph).map_err(js)?;
        self.core.reconstruction_mse(index, kind, m).map_err(js)
    }

    #[wasm_bindgen(js_name = basisRgba)]
    pub fn basis_rgba(&self, graph: &str, k: usize) -> std::result::Result<Vec<u8>, JsError> {
        let kind = GraphKind::parse(graph).map_err(js)?;
        Ok(diverging_rgba(&self.core.basis_vector(kind, k).map_err(js)?.0))
    }

    pub fn eigenvalue(&self, graph: &str, k: usize) -> std::result::Result<f64, JsError> {
        let kind = GraphKind::parse(graph).map_err(js)?;
        Ok(self.core.basis_vector(kind, k).map_err(js)?.1)
    }

    #[wasm_bindgen(js_name = mseCurveSvg)]
    pub fn mse_curve_svg(&self) -> std::result::Result<String, JsError> {
        self.core.mse_curve_svg().map_err(js)
    }
}
