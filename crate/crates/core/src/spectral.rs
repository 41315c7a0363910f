//! Graph Fourier bases: the `m` Laplacian eigenvectors of lowest eigenvalue,
//! with the forward transform `x̂ = Uₘᵀx` and inverse `x = Uₘx̂`.

use crate::codec::{check_len, Representation};
use crate::error::{Error, Result};
use crate::linalg::{sym_eig, Matrix, SymEig};

/// Truncated graph Fourier basis.
#[derive(Debug, Clone)]
pub struct SpectralBasis {
    /// `n x m`, columns ordered by ascending eigenvalue.
    basis: Matrix,
    eigenvalues: Vec<f64>,
}

impl SpectralBasis {
    /// Diagonalizes `laplacian` and keeps the `m` lowest modes.
    pub fn compute(laplacian: &Matrix, m: usize) -> Result<Self> {
        check_latent_dim(m, laplacian.rows())?;
        Self::from_eig(&sym_eig(laplacian)?, m)
    }

    /// Truncates an existing decomposition; the full eigensolve is the
    /// expensive part and can be shared across several `m`.
    pub fn from_eig(eig: &SymEig, m: usize) -> Result<Self> {
        check_latent_dim(m, eig.values.len())?;
        Ok(Self {
            basis: eig.vectors.leading_columns(m),
            eigenvalues: eig.values[..m].to_vec(),
        })
    }

    pub fn basis(&self) -> &Matrix {
        &self.basis
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn n(&self) -> usize {
        self.basis.rows()
    }

    pub fn m(&self) -> usize {
        self.basis.cols()
    }
}

/// Convenience wrapper for [`SpectralBasis::compute`].
pub fn compute_basis(laplacian: &Matrix, m: usize) -> Result<SpectralBasis> {
    SpectralBasis::compute(laplacian, m)
}

pub fn gft_encode(b: &SpectralBasis, x: &[f64]) -> Result<Vec<f64>> {
    check_len("graph signal", b.n(), x.len())?;
    Ok(b.basis.t_matvec(x)?)
}

pub fn gft_decode(b: &SpectralBasis, xhat: &[f64]) -> Result<Vec<f64>> {
    check_len("spectral coefficients", b.m(), xhat.len())?;
    Ok(b.basis.matvec(xhat)?)
}

pub(crate) fn check_latent_dim(m: usize, n: usize) -> Result<()> {
    if m == 0 || m > n {
        return Err(Error::LatentDimOutOfRange { m, n });
    }
    Ok(())
}

impl Representation for SpectralBasis {
    fn ambient_dim(&self) -> usize {
        self.n()
    }

    fn latent_dim(&self) -> usize {
        self.m()
    }

    fn encode(&self, x: &[f64]) -> Result<Vec<f64>> {
        gft_encode(self, x)
    }

    fn decode(&self, z: &[f64]) -> Result<Vec<f64>> {
        gft_decode(self, z)
    }

    fn encode_rows(&self, frames: &Matrix) -> Result<Matrix> {
        check_len("graph signal", self.n(), frames.cols())?;
        Ok(frames.matmul(&self.basis)?)
    }

    fn decode_rows(&self, codes: &Matrix) -> Result<Matrix> {
        check_len("spectral coefficients", self.m(), codes.cols())?;
        Ok(codes.matmul(&self.basis.transpose())?)
    }
}
