//! Common interface over the linear representations: the graph Fourier
//! bases, the tied autoencoder, the identity used as the uncompressed
//! baseline, and a global rescaling wrapper.

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// A linear map `ℝⁿ → ℝᵐ` together with its paired decoder `ℝᵐ → ℝⁿ`.
pub trait Representation: Send + Sync {
    fn ambient_dim(&self) -> usize;
    fn latent_dim(&self) -> usize;
    fn encode(&self, x: &[f64]) -> Result<Vec<f64>>;
    fn decode(&self, z: &[f64]) -> Result<Vec<f64>>;

    /// Encodes every row of `frames` (`N x n` → `N x m`).
    fn encode_rows(&self, frames: &Matrix) -> Result<Matrix> {
        map_rows(frames, self.latent_dim(), |x| self.encode(x))
    }

    /// Decodes every row of `codes` (`N x m` → `N x n`).
    fn decode_rows(&self, codes: &Matrix) -> Result<Matrix> {
        map_rows(codes, self.ambient_dim(), |z| self.decode(z))
    }

    /// `decode(encode(x))`.
    fn round_trip(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.decode(&self.encode(x)?)
    }
}

fn map_rows(
    input: &Matrix,
    out_cols: usize,
    f: impl Fn(&[f64]) -> Result<Vec<f64>>,
) -> Result<Matrix> {
    let mut data = Vec::with_capacity(input.rows() * out_cols);
    for r in 0..input.rows() {
        data.extend(f(input.row(r))?);
    }
    Ok(Matrix::new(input.rows(), out_cols, data)?)
}

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::LengthMismatch {
            what,
            expected,
            got,
        });
    }
    Ok(())
}

/// `ℝⁿ → ℝⁿ`, unchanged.
#[derive(Debug, Clone, Copy)]
pub struct Identity {
    pub n: usize,
}

impl Representation for Identity {
    fn ambient_dim(&self) -> usize {
        self.n
    }

    fn latent_dim(&self) -> usize {
        self.n
    }

    fn encode(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("identity input", self.n, x.len())?;
        Ok(x.to_vec())
    }

    fn decode(&self, z: &[f64]) -> Result<Vec<f64>> {
        check_len("identity latent", self.n, z.len())?;
        Ok(z.to_vec())
    }

    fn encode_rows(&self, frames: &Matrix) -> Result<Matrix> {
        check_len("identity input", self.n, frames.cols())?;
        Ok(frames.clone())
    }

    fn decode_rows(&self, codes: &Matrix) -> Result<Matrix> {
        check_len("identity latent", self.n, codes.cols())?;
        Ok(codes.clone())
    }
}

/// Divides latents by a fixed positive scale on encode and multiplies them
/// back on decode. The round trip is unchanged; only the range the
/// sequence model sees differs.
pub struct Scaled<'a> {
    pub inner: &'a dyn Representation,
    pub scale: f64,
}

impl<'a> Scaled<'a> {
    pub fn new(inner: &'a dyn Representation, scale: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::OutOfRange {
                name: "latent scale",
                range: "(0, inf)",
                value: scale,
            });
        }
        Ok(Self { inner, scale })
    }

    /// Scale mapping the largest training latent magnitude to 1.
    pub fn fit_max_abs(inner: &'a dyn Representation, train_codes: &[Matrix]) -> Result<Self> {
        let peak = train_codes.iter().fold(0.0_f64, |m, c| m.max(c.max_abs()));
        Self::new(inner, if peak > 0.0 { peak } else { 1.0 })
    }
}

impl Representation for Scaled<'_> {
    fn ambient_dim(&self) -> usize {
        self.inner.ambient_dim()
    }

    fn latent_dim(&self) -> usize {
        self.inner.latent_dim()
    }

    fn encode(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut z = self.inner.encode(x)?;
        z.iter_mut().for_each(|v| *v /= self.scale);
        Ok(z)
    }

    fn decode(&self, z: &[f64]) -> Result<Vec<f64>> {
        let unscaled: Vec<f64> = z.iter().map(|v| v * self.scale).collect();
        self.inner.decode(&unscaled)
    }

    fn encode_rows(&self, frames: &Matrix) -> Result<Matrix> {
        let mut z = self.inner.encode_rows(frames)?;
        z.scale(1.0 / self.scale);
        Ok(z)
    }

    fn decode_rows(&self, codes: &Matrix) -> Result<Matrix> {
        let mut unscaled = codes.clone();
        unscaled.scale(self.scale);
        self.inner.decode_rows(&unscaled)
    }
}

/// Mean squared round-trip error over all rows of `frames`.
pub fn reconstruction_mse(rep: &dyn Representation, frames: &Matrix) -> Result<f64> {
    let recon = rep.decode_rows(&rep.encode_rows(frames)?)?;
    Ok(crate::linalg::mse_matrix(frames, &recon)?)
}
