//! Tied-weight linear autoencoder: encode `x̂ = Aᵀx`, decode `x̃ = Ax̂`,
//! trained on mean squared reconstruction error with Adam.

use std::path::Path;

use crate::codec::{check_len, Representation};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::optim::{batches, AdamState, TrainSchedule};
use crate::rng::Rng;
use crate::spectral::check_latent_dim;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearCodec {
    /// `n x m`.
    a: Matrix,
}

impl LinearCodec {
    /// Entries i.i.d. uniform on `[-1/√n, 1/√n]`.
    pub fn init(n: usize, m: usize, seed: u64) -> Result<Self> {
        check_latent_dim(m, n)?;
        let bound = 1.0 / (n as f64).sqrt();
        let mut rng = Rng::new(seed);
        let a = Matrix::from_fn(n, m, |_, _| rng.uniform(-bound, bound));
        Ok(Self { a })
    }

    pub fn from_matrix(a: Matrix) -> Result<Self> {
        check_latent_dim(a.cols(), a.rows())?;
        Ok(Self { a })
    }

    pub fn weights(&self) -> &Matrix {
        &self.a
    }

    pub fn n(&self) -> usize {
        self.a.rows()
    }

    pub fn m(&self) -> usize {
        self.a.cols()
    }

    pub fn encode(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("autoencoder input", self.n(), x.len())?;
        Ok(self.a.t_matvec(x)?)
    }

    pub fn decode(&self, xhat: &[f64]) -> Result<Vec<f64>> {
        check_len("autoencoder latent", self.m(), xhat.len())?;
        Ok(self.a.matvec(xhat)?)
    }

    /// Loss `(1 / (B·n)) Σ_b ‖AAᵀx_b − x_b‖²` over a batch stacked as rows,
    /// and its gradient `(2 / (B·n)) Σ_b (r_b x_bᵀA + x_b r_bᵀA)` with
    /// `r_b = AAᵀx_b − x_b`.
    pub fn loss_and_grad(&self, batch: &Matrix) -> Result<(f64, Matrix)> {
        if batch.rows() == 0 {
            return Err(Error::EmptyBatch);
        }
        check_len("autoencoder input", self.n(), batch.cols())?;
        let codes = batch.matmul(&self.a)?; // B x m
        let mut resid = codes.matmul(&self.a.transpose())?; // B x n
        for (r, x) in resid.as_mut_slice().iter_mut().zip(batch.as_slice()) {
            *r -= x;
        }
        let scale = 1.0 / (batch.rows() * self.n()) as f64;
        let loss = resid.as_slice().iter().map(|v| v * v).sum::<f64>() * scale;

        let resid_codes = resid.matmul(&self.a)?; // rows: r_bᵀA
        let mut grad = resid.transpose().matmul(&codes)?;
        let second = batch.transpose().matmul(&resid_codes)?;
        for (g, s) in grad.as_mut_slice().iter_mut().zip(second.as_slice()) {
            *g = 2.0 * scale * (*g + s);
        }
        Ok((loss, grad))
    }

    /// Writes `A` as a rank-2 tensor `[n, m]`.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::data::save_tensor(path, &[self.n(), self.m()], self.a.as_slice())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let (dims, values) = crate::data::load_tensor(path)?;
        if dims.len() != 2 {
            return Err(Error::format(path.display(), format!("expected a rank-2 tensor, got rank {}", dims.len())));
        }
        Self::from_matrix(Matrix::new(dims[0], dims[1], values)?)
    }
}

pub fn init_codec(n: usize, m: usize, seed: u64) -> Result<LinearCodec> {
    LinearCodec::init(n, m, seed)
}

pub fn ae_encode(c: &LinearCodec, x: &[f64]) -> Result<Vec<f64>> {
    c.encode(x)
}

pub fn ae_decode(c: &LinearCodec, xhat: &[f64]) -> Result<Vec<f64>> {
    c.decode(xhat)
}

pub fn ae_loss_and_grad(c: &LinearCodec, batch: &Matrix) -> Result<(f64, Matrix)> {
    c.loss_and_grad(batch)
}

impl Representation for LinearCodec {
    fn ambient_dim(&self) -> usize {
        self.n()
    }

    fn latent_dim(&self) -> usize {
        self.m()
    }

    fn encode(&self, x: &[f64]) -> Result<Vec<f64>> {
        LinearCodec::encode(self, x)
    }

    fn decode(&self, z: &[f64]) -> Result<Vec<f64>> {
        LinearCodec::decode(self, z)
    }

    fn encode_rows(&self, frames: &Matrix) -> Result<Matrix> {
        check_len("autoencoder input", self.n(), frames.cols())?;
        Ok(frames.matmul(&self.a)?)
    }

    fn decode_rows(&self, codes: &Matrix) -> Result<Matrix> {
        check_len("autoencoder latent", self.m(), codes.cols())?;
        Ok(codes.matmul(&self.a.transpose())?)
    }
}

fn gather_rows(src: &Matrix, idx: &[usize]) -> Matrix {
    let mut data = Vec::with_capacity(idx.len() * src.cols());
    for &i in idx {
        data.extend_from_slice(src.row(i));
    }
    Matrix::new(idx.len(), src.cols(), data).expect("rows of a valid matrix")
}

/// Mini-batch Adam on the reconstruction loss. `samples` holds one training
/// frame per row; they are reshuffled every epoch.
///
/// Returns the trained codec and the per-epoch mean training loss
/// (averaged over samples, so a short last batch counts proportionally).
pub fn train_autoencoder(
    codec: &LinearCodec,
    samples: &Matrix,
    schedule: &TrainSchedule,
    seed: u64,
) -> Result<(LinearCodec, Vec<f64>)> {
    schedule.validate()?;
    if samples.rows() == 0 {
        return Err(Error::EmptyDataset);
    }
    check_len("autoencoder training sample", codec.n(), samples.cols())?;

    let mut codec = codec.clone();
    let mut adam = AdamState::new(codec.a.as_slice().len());
    let mut rng = Rng::new(seed);
    let mut history = Vec::with_capacity(schedule.epochs);
    for epoch in 0..schedule.epochs {
        let (lr, wd) = schedule.at(epoch)?;
        let order = rng.permutation(samples.rows());
        let mut total = 0.0;
        for idx in batches(&order, schedule.batch_size) {
            let batch = gather_rows(samples, idx);
            let (loss, grad) = codec.loss_and_grad(&batch)?;
            total += loss * idx.len() as f64;
            adam.step(codec.a.as_mut_slice(), grad.as_slice(), lr, wd)?;
        }
        history.push(total / samples.rows() as f64);
    }
    Ok((codec, history))
}
