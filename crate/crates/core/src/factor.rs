//! Partially orthogonal matrix-vector tensor factorization
//! `X = sum_r G_r o c_r = G x_3 C` with `C^T C = I_R`, and its two
//! alternating updates.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::svd;
use crate::prox::svt;
use crate::scalar::Real;
use crate::tensor::{Cube, Mat};

/// Abundance stack `g` (`I x J x R`, slice `r` is `G_r`) and endmember matrix
/// `c` (`K x R`, column `r` is `c_r`) with orthonormal columns.
#[derive(Debug, Clone, PartialEq)]
pub struct MvtfFactors<T> {
    pub g: Cube<T>,
    pub c: Mat<T>,
}

impl<T: Real> MvtfFactors<T> {
    pub fn new(g: Cube<T>, c: Mat<T>) -> Result<Self> {
        if g.dims().bands != c.cols() {
            return Err(Error::shape(
                "MvtfFactors::new",
                format!("endmember matrix with {} columns", g.dims().bands),
                format!("{}x{}", c.rows(), c.cols()),
            ));
        }
        if c.cols() > c.rows() {
            return Err(Error::param(
                "rank",
                format!("R = {} exceeds the band count K = {}", c.cols(), c.rows()),
            ));
        }
        let tol = T::lit(1e-8).max(T::epsilon() * T::lit(100.0));
        let defect = orthogonality_defect(&c);
        if defect > tol {
            return Err(Error::param(
                "c",
                format!("columns are not orthonormal (||C^T C - I||_F = {defect})"),
            ));
        }
        Ok(Self { g, c })
    }

    pub fn rank(&self) -> usize {
        self.c.cols()
    }

    /// `G x_3 C`.
    pub fn compose(&self) -> Result<Cube<T>> {
        compose(self)
    }
}

/// `||C^T C - I||_F`.
pub fn orthogonality_defect<T: Real>(c: &Mat<T>) -> T {
    let r = c.cols();
    let mut acc = T::zero();
    for a in 0..r {
        for b in 0..r {
            let mut d = T::zero();
            for k in 0..c.rows() {
                d += c.get(k, a) * c.get(k, b);
            }
            if a == b {
                d -= T::one();
            }
            acc += d * d;
        }
    }
    acc.sqrt()
}

/// `sum_r G_r o c_r`.
pub fn compose<T: Real>(f: &MvtfFactors<T>) -> Result<Cube<T>> {
    f.g.mode3_product(&f.c)
}

/// Starts `C` from the `rank` leading left singular vectors of the mode-3
/// unfolding of `y` and projects `y` onto them for `G`.
pub fn init_factors<T: Real>(y: &Cube<T>, rank: usize) -> Result<MvtfFactors<T>> {
    let bands = y.dims().bands;
    if rank == 0 || rank > bands {
        return Err(Error::param(
            "rank",
            format!("must lie in 1..={bands} (the band count), got {rank}"),
        ));
    }
    // Left singular vectors of Y_(3) are the eigenvectors of Y_(3) Y_(3)^T.
    let gram = Mat::from_fn(bands, bands, |a, b| {
        y.band(a).iter().zip(y.band(b)).map(|(&p, &q)| p * q).sum()
    });
    let u = svd(&gram)?.u;
    let c = Mat::from_fn(bands, rank, |k, r| u.get(k, r));
    let g = y.mode3_product_transposed(&c)?;
    Ok(MvtfFactors { g, c })
}

/// Abundance update: every slice of `M = (X + Lambda4 / beta4) x_3 C^T` is
/// passed through SVT with threshold `lambda_g / beta4`.
pub fn update_g<T: Real>(
    x: &Cube<T>,
    c: &Mat<T>,
    lambda_g: T,
    beta4: T,
    lambda4: &Cube<T>,
) -> Result<Cube<T>> {
    if !(beta4 > T::zero()) {
        return Err(Error::param("beta4", format!("must be positive, got {beta4}")));
    }
    if !(lambda_g >= T::zero()) {
        return Err(Error::param("lambda_g", format!("must be nonnegative, got {lambda_g}")));
    }
    let shifted = x.zip_map(lambda4, |a, l| a + l / beta4)?;
    let m = shifted.mode3_product_transposed(c)?;
    let tau = lambda_g / beta4;
    let slices = (0..m.dims().bands)
        .into_par_iter()
        .map(|r| svt(&m.band_mat(r), tau))
        .collect::<Result<Vec<_>>>()?;
    Cube::from_bands(&slices)
}

/// Result of the orthogonal Procrustes step.
#[derive(Debug, Clone)]
pub struct EndmemberUpdate<T> {
    pub c: Mat<T>,
    /// Numerical rank of the `R x K` target; below `R` the maximiser is not
    /// unique and the returned `c` is one valid choice.
    pub target_rank: usize,
}

impl<T: Real> EndmemberUpdate<T> {
    pub fn is_degenerate(&self) -> bool {
        self.target_rank < self.c.cols()
    }
}

/// `argmax_C trace(M C)` subject to `C^T C = I`, for `M` of shape `R x K`:
/// with `M = U S V^T`, the maximiser is `C = V U^T`.
pub fn procrustes<T: Real>(m: &Mat<T>) -> Result<EndmemberUpdate<T>> {
    if m.rows() > m.cols() {
        return Err(Error::shape(
            "procrustes",
            "R x K target with R <= K",
            format!("{}x{}", m.rows(), m.cols()),
        ));
    }
    let s = svd(m)?;
    let c = s.v.matmul(&s.u.transpose())?;
    Ok(EndmemberUpdate {
        c,
        target_rank: s.rank(),
    })
}

/// Endmember update: Procrustes on `M = G_(3) (Lambda4_(3)^T + beta4 X_(3)^T)`.
pub fn update_c<T: Real>(
    g: &Cube<T>,
    x: &Cube<T>,
    lambda4: &Cube<T>,
    beta4: T,
) -> Result<EndmemberUpdate<T>> {
    let target = x.zip_map(lambda4, |a, l| l + beta4 * a)?;
    if g.dims().rows != x.dims().rows || g.dims().cols != x.dims().cols {
        return Err(Error::shape("update_c", x.dims(), g.dims()));
    }
    let (rank, bands) = (g.dims().bands, x.dims().bands);
    let m = Mat::from_fn(rank, bands, |r, k| {
        g.band(r).iter().zip(target.band(k)).map(|(&p, &q)| p * q).sum()
    });
    procrustes(&m)
}
