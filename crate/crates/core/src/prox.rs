//! Proximal maps of the l1 norm and of the nuclear norm.

use num_traits::Float;

use crate::diff::DiffField;
use crate::error::{Error, Result};
use crate::linalg::svd;
use crate::scalar::Real;
use crate::tensor::{Cube, Mat};

/// `sgn(x) * max(|x| - tau, 0)`, with `sgn(0) = 0`.
#[inline]
pub fn shrink<T: Real>(x: T, tau: T) -> T {
    let mag = Float::abs(x) - tau;
    if mag > T::zero() {
        if x > T::zero() {
            mag
        } else {
            -mag
        }
    } else {
        T::zero()
    }
}

/// Containers that can be soft-thresholded entrywise.
pub trait SoftThreshold<T: Real>: Sized {
    fn shrink_entries(&self, tau: T) -> Self;
}

impl<T: Real> SoftThreshold<T> for Cube<T> {
    fn shrink_entries(&self, tau: T) -> Self {
        self.map(|v| shrink(v, tau))
    }
}

impl<T: Real> SoftThreshold<T> for DiffField<T> {
    fn shrink_entries(&self, tau: T) -> Self {
        self.map(|v| shrink(v, tau))
    }
}

impl<T: Real> SoftThreshold<T> for Mat<T> {
    fn shrink_entries(&self, tau: T) -> Self {
        Mat::from_fn(self.rows(), self.cols(), |r, c| shrink(self.get(r, c), tau))
    }
}

fn check_tau<T: Real>(tau: T) -> Result<()> {
    if !(tau >= T::zero()) || !tau.is_finite() {
        return Err(Error::param("tau", format!("threshold must be finite and >= 0, got {tau}")));
    }
    Ok(())
}

/// Entrywise soft thresholding.
pub fn soft_threshold<T: Real, X: SoftThreshold<T>>(x: &X, tau: T) -> Result<X> {
    check_tau(tau)?;
    Ok(x.shrink_entries(tau))
}

/// Singular value thresholding: `U Thr_tau(S) V^T`, the minimiser of
/// `tau ||G||_* + 1/2 ||G - m||_F^2`.
pub fn svt<T: Real>(m: &Mat<T>, tau: T) -> Result<Mat<T>> {
    check_tau(tau)?;
    let s = svd(m)?;
    let shrunk: Vec<T> = s.sigma.iter().map(|&v| shrink(v, tau)).collect();
    Ok(s.recompose_with(&shrunk))
}

/// Sum of singular values.
pub fn nuclear_norm<T: Real>(m: &Mat<T>) -> Result<T> {
    Ok(svd(m)?.sigma.into_iter().sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Dims;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn scalar_shrink() {
        assert!((shrink(1.2, 0.5) - 0.7f64).abs() < 1e-15);
        assert!((shrink(-1.2, 0.5) + 0.7f64).abs() < 1e-15);
        assert_eq!(shrink(1.5, 2.0), 0.0);
        assert_eq!(shrink(0.0, 0.0), 0.0);
        for x in [-3.0, -0.1, 0.0, 0.25, 8.0] {
            assert_eq!(shrink(x, 0.0), x);
        }
    }

    #[test]
    fn negative_tau_is_rejected() {
        let c = Cube::<f64>::zeros(Dims::new(1, 1, 1));
        assert!(soft_threshold(&c, -0.1).is_err());
        assert!(svt(&Mat::<f64>::identity(2), -1.0).is_err());
    }

    #[test]
    fn threshold_applies_to_fields() {
        let dims = Dims::new(1, 2, 1);
        let f = DiffField::new(
            Cube::new(dims, vec![1.0, -1.0]).unwrap(),
            Cube::new(dims, vec![0.2, 3.0]).unwrap(),
            Cube::new(dims, vec![-0.4, 0.0]).unwrap(),
        )
        .unwrap();
        let t = soft_threshold(&f, 0.5).unwrap();
        assert_eq!(t.h.as_slice(), &[0.5, -0.5]);
        assert_eq!(t.v.as_slice(), &[0.0, 2.5]);
        assert_eq!(t.z.as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn svt_on_diagonal() {
        let m = Mat::from_rows(&[vec![3.0, 0.0], vec![0.0, 1.0]]);
        let out = svt(&m, 2.0).unwrap();
        let expect = Mat::from_rows(&[vec![1.0, 0.0], vec![0.0, 0.0]]);
        assert!(out.sub(&expect).unwrap().frob_norm() < 1e-14);
    }

    #[test]
    fn svt_zero_threshold_reproduces_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = Mat::from_fn(7, 4, |_, _| rng.random_range(-1.0..1.0));
        assert!(svt(&m, 0.0).unwrap().sub(&m).unwrap().frob_norm() < 1e-12);
    }

    #[test]
    fn svt_full_shrinkage_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = Mat::from_fn(5, 6, |_, _| rng.random_range(-1.0..1.0));
        let smax = svd(&m).unwrap().sigma[0];
        let out = svt(&m, smax).unwrap();
        assert!(out.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn svt_shrinks_singular_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = Mat::from_fn(6, 5, |_, _| rng.random_range(-1.0..1.0));
        let tau = 0.3;
        let before = svd(&m).unwrap().sigma;
        let after = svd(&svt(&m, tau).unwrap()).unwrap().sigma;
        for (a, b) in after.iter().zip(&before) {
            assert!((a - shrink(*b, tau)).abs() < 1e-10);
        }
    }

    #[test]
    fn svt_is_locally_minimal() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = Mat::from_fn(6, 5, |_, _| rng.random_range(-1.0..1.0));
        let tau = 0.3;
        let objective = |g: &Mat<f64>| {
            tau * nuclear_norm(g).unwrap() + 0.5 * g.sub(&m).unwrap().frob_norm().powi(2)
        };
        let g = svt(&m, tau).unwrap();
        let best = objective(&g);
        for _ in 0..1000 {
            let scale = rng.random_range(1e-4..1e-1);
            let p = Mat::from_fn(6, 5, |r, c| g.get(r, c) + scale * rng.random_range(-1.0..1.0));
            assert!(objective(&p) >= best - 1e-12);
        }
    }

    mod props {
        use super::*;
        use rand::Rng;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn soft_threshold_is_a_contraction(
                xs in proptest::collection::vec(-5.0f64..5.0, 12),
                ys in proptest::collection::vec(-5.0f64..5.0, 12),
                tau in 0.0f64..3.0,
            ) {
                let dims = Dims::new(2, 3, 2);
                let x = Cube::new(dims, xs).unwrap();
                let y = Cube::new(dims, ys).unwrap();
                let tx = soft_threshold(&x, tau).unwrap();
                let ty = soft_threshold(&y, tau).unwrap();
                prop_assert!(tx.sub(&ty).unwrap().frob_norm() <= x.sub(&y).unwrap().frob_norm() + 1e-12);
            }

            #[test]
            fn svt_never_raises_rank(
                rows in 1usize..7, cols in 1usize..7, rank in 0usize..4,
                tau in 0.0f64..2.0, seed in any::<u64>()
            ) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let r = rank.min(rows).min(cols);
                let a = Mat::from_fn(rows, r, |_, _| rng.random_range(-1.0..1.0));
                let b = Mat::from_fn(r, cols, |_, _| rng.random_range(-1.0..1.0));
                let m = if r == 0 { Mat::zeros(rows, cols) } else { a.matmul(&b).unwrap() };
                let out = svt(&m, tau).unwrap();
                prop_assert!(svd(&out).unwrap().rank() <= svd(&m).unwrap().rank());
            }
        }
    }
}
