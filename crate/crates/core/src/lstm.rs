//! Fully connected LSTM over latent frames.
//!
//! Hidden size equals the latent size `m` and the hidden state is the
//! prediction of the next frame. A sequence of `T` frames is processed in
//! two phases: during warm-up the real frames `1..=W` are fed in; after
//! that the previous prediction is fed back. Either way each step emits a
//! prediction, so `T - 1` predictions cover frames `2..=T`.
//!
//! Gate blocks are stacked in the order input, forget, cell, output in both
//! the input-to-hidden and hidden-to-hidden weights.

use std::path::Path;

use crate::codec::{check_len, Representation};
use crate::error::{Error, Result};
use crate::linalg::{axpy, Matrix};
use crate::optim::{batches, AdamState, TrainSchedule};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Input,
    Forget,
    Cell,
    Output,
}

impl Gate {
    pub const ALL: [Gate; 4] = [Gate::Input, Gate::Forget, Gate::Cell, Gate::Output];

    fn block(self) -> usize {
        match self {
            Gate::Input => 0,
            Gate::Forget => 1,
            Gate::Cell => 2,
            Gate::Output => 3,
        }
    }

    fn suffix(self) -> char {
        match self {
            Gate::Input => 'i',
            Gate::Forget => 'f',
            Gate::Cell => 'g',
            Gate::Output => 'o',
        }
    }
}

/// Weights and biases of one cell. Also used to hold gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmCell {
    m: usize,
    /// `4m x m`, applied to the input frame.
    w_x: Matrix,
    /// `4m x m`, applied to the previous hidden state.
    w_h: Matrix,
    b_x: Vec<f64>,
    b_h: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LstmState {
    pub fn zeros(m: usize) -> Self {
        Self {
            h: vec![0.0; m],
            c: vec![0.0; m],
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl LstmCell {
    /// Weights uniform on `[-1/√m, 1/√m]`, biases zero.
    pub fn init(m: usize, seed: u64) -> Result<Self> {
        if m == 0 {
            return Err(Error::ZeroDimension { what: "latent dimension" });
        }
        let bound = 1.0 / (m as f64).sqrt();
        let mut rng = Rng::new(seed);
        let w_x = Matrix::from_fn(4 * m, m, |_, _| rng.uniform(-bound, bound));
        let w_h = Matrix::from_fn(4 * m, m, |_, _| rng.uniform(-bound, bound));
        Ok(Self {
            m,
            w_x,
            w_h,
            b_x: vec![0.0; 4 * m],
            b_h: vec![0.0; 4 * m],
        })
    }

    pub fn zeros(m: usize) -> Self {
        Self {
            m,
            w_x: Matrix::zeros(4 * m, m),
            w_h: Matrix::zeros(4 * m, m),
            b_x: vec![0.0; 4 * m],
            b_h: vec![0.0; 4 * m],
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn parameter_count(&self) -> usize {
        8 * self.m * self.m + 8 * self.m
    }

    /// `W_i·` block for one gate (`m x m`).
    pub fn input_weight(&self, gate: Gate) -> Matrix {
        let b = gate.block() * self.m;
        Matrix::from_fn(self.m, self.m, |r, c| self.w_x[(b + r, c)])
    }

    /// `W_h·` block for one gate (`m x m`).
    pub fn hidden_weight(&self, gate: Gate) -> Matrix {
        let b = gate.block() * self.m;
        Matrix::from_fn(self.m, self.m, |r, c| self.w_h[(b + r, c)])
    }

    pub fn input_bias(&self, gate: Gate) -> &[f64] {
        let b = gate.block() * self.m;
        &self.b_x[b..b + self.m]
    }

    pub fn hidden_bias(&self, gate: Gate) -> &[f64] {
        let b = gate.block() * self.m;
        &self.b_h[b..b + self.m]
    }

    /// The four parameter buffers in a fixed order.
    pub fn tensors(&self) -> [&[f64]; 4] {
        [self.w_x.as_slice(), self.w_h.as_slice(), &self.b_x, &self.b_h]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 4] {
        [self.w_x.as_mut_slice(), self.w_h.as_mut_slice(), &mut self.b_x, &mut self.b_h]
    }

    /// Sets every weight to `w` and every bias to `b`.
    pub fn constant(m: usize, w: f64, b: f64) -> Self {
        let mut cell = Self::zeros(m);
        let [wx, wh, bx, bh] = cell.tensors_mut();
        wx.fill(w);
        wh.fill(w);
        bx.fill(b);
        bh.fill(b);
        cell
    }

    fn add_scaled(&mut self, alpha: f64, other: &LstmCell) {
        for (dst, src) in self.tensors_mut().into_iter().zip(other.tensors()) {
            axpy(alpha, src, dst);
        }
    }

    fn squared_norm(&self) -> f64 {
        self.tensors().iter().flat_map(|t| t.iter()).map(|v| v * v).sum()
    }

    /// The 16 named tensors: `w_i{i,f,g,o}`, `w_h{i,f,g,o}` (`m x m`) and
    /// `b_i{..}`, `b_h{..}` (length `m`).
    pub fn named_tensors(&self) -> Vec<(String, Vec<usize>, Vec<f64>)> {
        let m = self.m;
        let mut out = Vec::with_capacity(16);
        for gate in Gate::ALL {
            out.push((format!("w_i{}", gate.suffix()), vec![m, m], self.input_weight(gate).into_vec()));
        }
        for gate in Gate::ALL {
            out.push((format!("w_h{}", gate.suffix()), vec![m, m], self.hidden_weight(gate).into_vec()));
        }
        for gate in Gate::ALL {
            out.push((format!("b_i{}", gate.suffix()), vec![m], self.input_bias(gate).to_vec()));
        }
        for gate in Gate::ALL {
            out.push((format!("b_h{}", gate.suffix()), vec![m], self.hidden_bias(gate).to_vec()));
        }
        out
    }

    /// Writes one GTS1 file per named tensor into `dir`.
    pub fn save_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, dims, values) in self.named_tensors() {
            crate::data::save_tensor(dir.join(format!("{name}.gts")), &dims, &values)?;
        }
        Ok(())
    }

    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let (dims, _) = crate::data::load_tensor(dir.join("b_ii.gts"))?;
        let m = *dims.first().ok_or_else(|| Error::format(dir.display(), "empty dims for b_ii"))?;
        let mut cell = Self::zeros(m);
        for gate in Gate::ALL {
            let off = gate.block() * m;
            for (prefix, is_weight, input_side) in
                [("w_i", true, true), ("w_h", true, false), ("b_i", false, true), ("b_h", false, false)]
            {
                let path = dir.join(format!("{prefix}{}.gts", gate.suffix()));
                let (dims, values) = crate::data::load_tensor(&path)?;
                let want = if is_weight { vec![m, m] } else { vec![m] };
                if dims != want {
                    return Err(Error::format(path.display(), format!("expected dims {want:?}, got {dims:?}")));
                }
                match (is_weight, input_side) {
                    (true, true) => cell.w_x.as_mut_slice()[off * m..(off + m) * m].copy_from_slice(&values),
                    (true, false) => cell.w_h.as_mut_slice()[off * m..(off + m) * m].copy_from_slice(&values),
                    (false, true) => cell.b_x[off..off + m].copy_from_slice(&values),
                    (false, false) => cell.b_h[off..off + m].copy_from_slice(&values),
                }
            }
        }
        Ok(cell)
    }

    fn check_step_dims(&self, x: &[f64], state: &LstmState) -> Result<()> {
        check_len("lstm input", self.m, x.len())?;
        check_len("lstm hidden state", self.m, state.h.len())?;
        check_len("lstm cell state", self.m, state.c.len())
    }

    fn forward_cached(&self, x: &[f64], state: &LstmState) -> StepCache {
        let m = self.m;
        let mut pre = self.b_x.clone();
        axpy(1.0, &self.b_h, &mut pre);
        for (r, p) in pre.iter_mut().enumerate() {
            *p += crate::linalg::dot(self.w_x.row(r), x) + crate::linalg::dot(self.w_h.row(r), &state.h);
        }
        let i: Vec<f64> = pre[0..m].iter().map(|&v| sigmoid(v)).collect();
        let f: Vec<f64> = pre[m..2 * m].iter().map(|&v| sigmoid(v)).collect();
        let g: Vec<f64> = pre[2 * m..3 * m].iter().map(|&v| v.tanh()).collect();
        let o: Vec<f64> = pre[3 * m..4 * m].iter().map(|&v| sigmoid(v)).collect();
        let c: Vec<f64> = (0..m).map(|k| f[k] * state.c[k] + i[k] * g[k]).collect();
        let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
        let h: Vec<f64> = (0..m).map(|k| o[k] * tanh_c[k]).collect();
        StepCache {
            x: x.to_vec(),
            h_prev: state.h.clone(),
            c_prev: state.c.clone(),
            i,
            f,
            g,
            o,
            c,
            tanh_c,
            h,
        }
    }

    /// One application of the gate equations; returns the new state.
    pub fn step(&self, x: &[f64], state: &LstmState) -> Result<LstmState> {
        self.check_step_dims(x, state)?;
        let cache = self.forward_cached(x, state);
        Ok(LstmState {
            h: cache.h,
            c: cache.c,
        })
    }
}

/// Gate activations of one step, kept for backpropagation.
#[derive(Debug, Clone)]
pub struct StepCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    pub i: Vec<f64>,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub o: Vec<f64>,
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
    pub h: Vec<f64>,
}

pub fn lstm_init(m: usize, seed: u64) -> Result<LstmCell> {
    LstmCell::init(m, seed)
}

/// `(h_t, c_t)` from `x_t` and `(h_{t-1}, c_{t-1})`.
pub fn lstm_step(cell: &LstmCell, x: &[f64], state: &LstmState) -> Result<LstmState> {
    cell.step(x, state)
}

fn check_sequence(cell: &LstmCell, frames: &Matrix, warmup: usize) -> Result<()> {
    check_len("lstm frame", cell.m, frames.cols())?;
    let t = frames.rows();
    if t < 2 {
        return Err(Error::TooFewFrames { need: 2, got: t });
    }
    if warmup == 0 || warmup > t - 1 {
        return Err(Error::WarmupOutOfRange {
            warmup,
            frames: t,
            max: t - 1,
        });
    }
    Ok(())
}

/// Forward pass over a `T x m` sequence; step `s` (0-based) consumes the
/// real frame `s` while `s < warmup`, else the previous prediction.
fn forward_sequence(cell: &LstmCell, frames: &Matrix, warmup: usize) -> Vec<StepCache> {
    let steps = frames.rows() - 1;
    let mut state = LstmState::zeros(cell.m);
    let mut caches: Vec<StepCache> = Vec::with_capacity(steps);
    for s in 0..steps {
        let cache = if s < warmup {
            cell.forward_cached(frames.row(s), &state)
        } else {
            let fed_back = caches[s - 1].h.clone();
            cell.forward_cached(&fed_back, &state)
        };
        state = LstmState {
            h: cache.h.clone(),
            c: cache.c.clone(),
        };
        caches.push(cache);
    }
    caches
}

/// Predictions for frames `2..=T` as a `(T-1) x m` matrix.
pub fn run_sequence(cell: &LstmCell, frames: &Matrix, warmup: usize) -> Result<Matrix> {
    check_sequence(cell, frames, warmup)?;
    let caches = forward_sequence(cell, frames, warmup);
    let mut data = Vec::with_capacity(caches.len() * cell.m);
    for c in &caches {
        data.extend_from_slice(&c.h);
    }
    Ok(Matrix::new(caches.len(), cell.m, data)?)
}

/// Mean squared error over all `T - 1` predictions (warm-up and free-run),
/// with gradients by backpropagation through time. Fed-back predictions
/// are differentiated through, so a free-run input carries gradient to the
/// step that produced it.
pub fn lstm_loss_and_grad(cell: &LstmCell, frames: &Matrix, warmup: usize) -> Result<(f64, LstmCell)> {
    check_sequence(cell, frames, warmup)?;
    let m = cell.m;
    let caches = forward_sequence(cell, frames, warmup);
    let steps = caches.len();
    let scale = 1.0 / (steps * m) as f64;

    let mut loss = 0.0;
    for (s, c) in caches.iter().enumerate() {
        let target = frames.row(s + 1);
        loss += c.h.iter().zip(target).map(|(p, y)| (p - y) * (p - y)).sum::<f64>();
    }
    loss *= scale;

    let mut grad = LstmCell::zeros(m);
    let mut dh_future = vec![0.0; m];
    let mut dc_future = vec![0.0; m];
    let mut dpre = vec![0.0; 4 * m];
    for s in (0..steps).rev() {
        let c = &caches[s];
        let target = frames.row(s + 1);
        for k in 0..m {
            let dh = 2.0 * scale * (c.h[k] - target[k]) + dh_future[k];
            let d_o = dh * c.tanh_c[k];
            let dc = dc_future[k] + dh * c.o[k] * (1.0 - c.tanh_c[k] * c.tanh_c[k]);
            let di = dc * c.g[k];
            let dg = dc * c.i[k];
            let df = dc * c.c_prev[k];
            dc_future[k] = dc * c.f[k];
            dpre[k] = di * c.i[k] * (1.0 - c.i[k]);
            dpre[m + k] = df * c.f[k] * (1.0 - c.f[k]);
            dpre[2 * m + k] = dg * (1.0 - c.g[k] * c.g[k]);
            dpre[3 * m + k] = d_o * c.o[k] * (1.0 - c.o[k]);
        }
        for (r, &dp) in dpre.iter().enumerate() {
            if dp != 0.0 {
                axpy(dp, &c.x, grad.w_x.row_mut(r));
                axpy(dp, &c.h_prev, grad.w_h.row_mut(r));
            }
        }
        axpy(1.0, &dpre, &mut grad.b_x);
        axpy(1.0, &dpre, &mut grad.b_h);

        // Gradient reaching h_{s-1}: through the recurrence, and through the
        // input when step s consumed the fed-back prediction.
        let mut dh_prev = cell.w_h.t_matvec(&dpre)?;
        if s >= warmup {
            axpy(1.0, &cell.w_x.t_matvec(&dpre)?, &mut dh_prev);
        }
        dh_future = dh_prev;
    }
    Ok((loss, grad))
}

/// Training options beyond the schedule.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LstmTrainOptions {
    /// Rescale the batch gradient to this global L2 norm when exceeded.
    pub clip_norm: Option<f64>,
}

fn batch_gradients(cell: &LstmCell, seqs: &[&Matrix], warmup: usize) -> Result<Vec<(f64, LstmCell)>> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        seqs.par_iter().map(|s| lstm_loss_and_grad(cell, s, warmup)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        seqs.iter().map(|s| lstm_loss_and_grad(cell, s, warmup)).collect()
    }
}

/// Mini-batch Adam with BPTT gradients averaged over each batch. Per-sequence
/// gradients may be computed in parallel; they are summed in batch order so
/// results do not depend on the thread count.
pub fn train_lstm(
    cell: &LstmCell,
    sequences: &[Matrix],
    schedule: &TrainSchedule,
    warmup: usize,
    seed: u64,
    options: LstmTrainOptions,
) -> Result<(LstmCell, Vec<f64>)> {
    schedule.validate()?;
    if sequences.is_empty() {
        return Err(Error::EmptyDataset);
    }
    for s in sequences {
        check_sequence(cell, s, warmup)?;
    }
    let mut cell = cell.clone();
    let mut adam: Vec<AdamState> = cell.tensors().iter().map(|t| AdamState::new(t.len())).collect();
    let mut rng = Rng::new(seed);
    let mut history = Vec::with_capacity(schedule.epochs);
    for epoch in 0..schedule.epochs {
        let (lr, wd) = schedule.at(epoch)?;
        let order = rng.permutation(sequences.len());
        let mut total = 0.0;
        for idx in batches(&order, schedule.batch_size) {
            let seqs: Vec<&Matrix> = idx.iter().map(|&i| &sequences[i]).collect();
            let mut grad = LstmCell::zeros(cell.m);
            for (loss, g) in batch_gradients(&cell, &seqs, warmup)? {
                total += loss;
                grad.add_scaled(1.0, &g);
            }
            let mut factor = 1.0 / idx.len() as f64;
            if let Some(max) = options.clip_norm {
                let norm = grad.squared_norm().sqrt() * factor;
                if norm > max {
                    factor *= max / norm;
                }
            }
            for t in grad.tensors_mut() {
                t.iter_mut().for_each(|v| *v *= factor);
            }
            for ((state, params), g) in adam.iter_mut().zip(cell.tensors_mut()).zip(grad.tensors()) {
                state.step(params, g, lr, wd)?;
            }
        }
        history.push(total / sequences.len() as f64);
    }
    Ok((cell, history))
}

/// Decoded free-run predictions for frames `W+1..=T` (`(T-W) x n`).
pub fn predict_free_run(
    cell: &LstmCell,
    latent: &Matrix,
    warmup: usize,
    decoder: &dyn Representation,
) -> Result<Matrix> {
    let preds = run_sequence(cell, latent, warmup)?;
    let tail = Matrix::from_fn(preds.rows() - (warmup - 1), preds.cols(), |r, c| preds[(r + warmup - 1, c)]);
    decoder.decode_rows(&tail)
}

/// Mean over sequences of the MSE between raw frames `W+1..=T` and the
/// decoded free-run predictions for them.
pub fn evaluate_prediction(
    cell: &LstmCell,
    latent_sequences: &[Matrix],
    raw_sequences: &[Matrix],
    warmup: usize,
    decoder: &dyn Representation,
) -> Result<f64> {
    if latent_sequences.is_empty() {
        return Err(Error::EmptyDataset);
    }
    check_len("raw sequence count", latent_sequences.len(), raw_sequences.len())?;
    let per_sequence = |(latent, raw): (&Matrix, &Matrix)| -> Result<f64> {
        check_len("raw sequence length", latent.rows(), raw.rows())?;
        let decoded = predict_free_run(cell, latent, warmup, decoder)?;
        let target = Matrix::from_fn(decoded.rows(), raw.cols(), |r, c| raw[(r + warmup, c)]);
        Ok(crate::linalg::mse_matrix(&target, &decoded)?)
    };
    #[cfg(feature = "parallel")]
    let errors: Vec<f64> = {
        use rayon::prelude::*;
        latent_sequences
            .par_iter()
            .zip(raw_sequences.par_iter())
            .map(per_sequence)
            .collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let errors: Vec<f64> = latent_sequences
        .iter()
        .zip(raw_sequences.iter())
        .map(per_sequence)
        .collect::<Result<_>>()?;
    Ok(errors.iter().sum::<f64>() / errors.len() as f64)
}
