//! Thin singular value decomposition by one-sided (Hestenes) Jacobi
//! rotations.
//!
//! The routine orthogonalises the columns of the input in place; column norms
//! become singular values and the accumulated rotations become the right
//! singular vectors. It is slower than bidiagonalisation for large matrices
//! but delivers singular values with high relative accuracy, which the SVT
//! and Procrustes steps rely on, and it is generic over [`Real`].

use num_traits::Float;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::tensor::Mat;

const MAX_SWEEPS: usize = 80;

/// `a = u * diag(sigma) * v^T` with `p = min(rows, cols)` components.
///
/// `u` is `rows x p`, `v` is `cols x p`, both with orthonormal columns;
/// `sigma` is non-increasing. The largest-magnitude entry of every column
/// of `u` is nonnegative, which pins the sign ambiguity.
#[derive(Debug, Clone)]
pub struct Svd<T> {
    pub u: Mat<T>,
    pub sigma: Vec<T>,
    pub v: Mat<T>,
}

impl<T: Real> Svd<T> {
    /// Numerical rank: singular values above `max(rows, cols) * eps * sigma_max`.
    pub fn rank(&self) -> usize {
        let smax = self.sigma.first().copied().unwrap_or_else(T::zero);
        let n = self.u.rows().max(self.v.rows());
        let tol = smax * T::epsilon() * T::lit(n as f64);
        self.sigma.iter().filter(|&&s| s > tol).count()
    }

    /// Rebuilds `u * diag(weights) * v^T`.
    pub fn recompose_with(&self, weights: &[T]) -> Mat<T> {
        let (m, n) = (self.u.rows(), self.v.rows());
        let mut out = Mat::zeros(m, n);
        for (c, &w) in weights.iter().enumerate() {
            if w == T::zero() {
                continue;
            }
            for r in 0..m {
                let a = self.u.get(r, c) * w;
                if a == T::zero() {
                    continue;
                }
                let dst = &mut out.as_mut_slice()[r * n..(r + 1) * n];
                for (q, d) in dst.iter_mut().enumerate() {
                    *d += a * self.v.get(q, c);
                }
            }
        }
        out
    }
}

/// Thin SVD of an arbitrary real matrix.
pub fn svd<T: Real>(a: &Mat<T>) -> Result<Svd<T>> {
    if !a.is_finite() {
        return Err(Error::Numeric {
            op: "svd",
            reason: "input contains non-finite entries".into(),
        });
    }
    if a.rows() >= a.cols() {
        jacobi_tall(a)
    } else {
        let t = jacobi_tall(&a.transpose())?;
        let mut out = Svd {
            u: t.v,
            sigma: t.sigma,
            v: t.u,
        };
        fix_signs(&mut out);
        Ok(out)
    }
}

fn jacobi_tall<T: Real>(a: &Mat<T>) -> Result<Svd<T>> {
    let (m, n) = (a.rows(), a.cols());
    let mut w: Vec<Vec<T>> = (0..n).map(|c| a.column(c)).collect();
    let mut v: Vec<Vec<T>> = (0..n)
        .map(|c| (0..n).map(|r| if r == c { T::one() } else { T::zero() }).collect())
        .collect();
    let tol = T::epsilon() * T::lit(m.max(1) as f64);

    let mut converged = n < 2;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let mut rotated = false;
        for p in 0..n - 1 {
            for q in p + 1..n {
                let (alpha, beta, gamma) = {
                    let (wp, wq) = (&w[p], &w[q]);
                    let mut alpha = T::zero();
                    let mut beta = T::zero();
                    let mut gamma = T::zero();
                    for (&x, &y) in wp.iter().zip(wq) {
                        alpha += x * x;
                        beta += y * y;
                        gamma += x * y;
                    }
                    (alpha, beta, gamma)
                };
                if gamma == T::zero() || Float::abs(gamma) <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (T::lit(2.0) * gamma);
                let t = Float::signum(zeta) / (Float::abs(zeta) + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                rotate(&mut w, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        converged = !rotated;
    }
    if !converged {
        return Err(Error::Numeric {
            op: "svd",
            reason: format!("Jacobi sweeps did not converge within {MAX_SWEEPS} sweeps"),
        });
    }

    let norms: Vec<T> = w
        .iter()
        .map(|col| col.iter().map(|&x| x * x).sum::<T>().sqrt())
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| norms[b].partial_cmp(&norms[a]).unwrap().then(a.cmp(&b)));

    let smax = order.first().map_or(T::zero(), |&i| norms[i]);
    let floor = smax * T::epsilon();
    let mut u_cols: Vec<Vec<T>> = Vec::with_capacity(n);
    let mut sigma = Vec::with_capacity(n);
    let mut pending = Vec::new();
    for (slot, &idx) in order.iter().enumerate() {
        let s = norms[idx];
        if s > floor && s > T::min_positive_value() {
            u_cols.push(w[idx].iter().map(|&x| x / s).collect());
            sigma.push(s);
        } else {
            u_cols.push(vec![T::zero(); m]);
            sigma.push(T::zero());
            pending.push(slot);
        }
    }
    complete_basis(&mut u_cols, &pending);

    let u = Mat::from_fn(m, n, |r, c| u_cols[c][r]);
    let vm = Mat::from_fn(n, n, |r, c| v[order[c]][r]);
    let mut out = Svd { u, sigma, v: vm };
    fix_signs(&mut out);
    Ok(out)
}

#[inline]
fn rotate<T: Real>(cols: &mut [Vec<T>], p: usize, q: usize, c: T, s: T) {
    let (lo, hi) = cols.split_at_mut(q);
    for (x, y) in lo[p].iter_mut().zip(hi[0].iter_mut()) {
        let (a, b) = (*x, *y);
        *x = c * a - s * b;
        *y = s * a + c * b;
    }
}

/// Replaces the columns listed in `pending` by unit vectors orthogonal to
/// every other column (Gram-Schmidt over the standard basis).
fn complete_basis<T: Real>(cols: &mut [Vec<T>], pending: &[usize]) {
    if pending.is_empty() {
        return;
    }
    let m = cols[0].len();
    let mut accepted: Vec<usize> = (0..cols.len()).filter(|c| !pending.contains(c)).collect();
    for &slot in pending {
        let mut best: Option<(T, Vec<T>)> = None;
        for t in 0..m {
            let mut e = vec![T::zero(); m];
            e[t] = T::one();
            for _ in 0..2 {
                for &a in &accepted {
                    let d: T = e.iter().zip(&cols[a]).map(|(&x, &y)| x * y).sum();
                    for (x, &y) in e.iter_mut().zip(&cols[a]) {
                        *x -= d * y;
                    }
                }
            }
            let nrm = e.iter().map(|&x| x * x).sum::<T>().sqrt();
            if best.as_ref().is_none_or(|(b, _)| nrm > *b) {
                best = Some((nrm, e));
            }
        }
        let (nrm, e) = best.expect("column space has room for the completion");
        cols[slot] = e.into_iter().map(|x| x / nrm).collect();
        accepted.push(slot);
    }
}

fn fix_signs<T: Real>(svd: &mut Svd<T>) {
    let (m, p) = (svd.u.rows(), svd.u.cols());
    for c in 0..p {
        let mut best = T::zero();
        for r in 0..m {
            let x = svd.u.get(r, c);
            if Float::abs(x) > Float::abs(best) {
                best = x;
            }
        }
        if best < T::zero() {
            for r in 0..m {
                svd.u.set(r, c, -svd.u.get(r, c));
            }
            for r in 0..svd.v.rows() {
                svd.v.set(r, c, -svd.v.get(r, c));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_mat(m: usize, n: usize, seed: u64) -> Mat<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Mat::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0))
    }

    fn gram_defect(q: &Mat<f64>) -> f64 {
        q.transpose()
            .matmul(q)
            .unwrap()
            .sub(&Mat::identity(q.cols()))
            .unwrap()
            .frob_norm()
    }

    fn check(a: &Mat<f64>) {
        let s = svd(a).unwrap();
        let p = a.rows().min(a.cols());
        assert_eq!(s.sigma.len(), p);
        assert!(s.sigma.windows(2).all(|w| w[0] >= w[1]));
        assert!(gram_defect(&s.u) < 1e-12);
        assert!(gram_defect(&s.v) < 1e-12);
        let back = s.recompose_with(&s.sigma);
        assert!(back.sub(a).unwrap().frob_norm() <= 1e-12 * a.frob_norm().max(1.0));
    }

    #[test]
    fn reconstructs_random_shapes() {
        for (m, n, seed) in [(6, 5, 1), (5, 6, 2), (1, 4, 3), (4, 1, 4), (12, 12, 5), (3, 9, 6)] {
            check(&random_mat(m, n, seed));
        }
    }

    #[test]
    fn diagonal_input() {
        let a = Mat::from_rows(&[vec![1.0, 0.0], vec![0.0, 3.0]]);
        let s = svd(&a).unwrap();
        assert_eq!(s.sigma, vec![3.0, 1.0]);
    }

    #[test]
    fn rank_deficient_input_gets_orthonormal_factors() {
        let a = Mat::from_fn(5, 3, |r, c| (r + 1) as f64 * if c == 2 { 0.0 } else { 1.0 });
        let s = svd(&a).unwrap();
        assert_eq!(s.rank(), 1);
        assert!(gram_defect(&s.u) < 1e-12);
        assert!(gram_defect(&s.v) < 1e-12);
        let z = svd(&Mat::<f64>::zeros(4, 2)).unwrap();
        assert_eq!(z.sigma, vec![0.0, 0.0]);
        assert!(gram_defect(&z.u) < 1e-12);
    }

    #[test]
    fn matches_nalgebra_singular_values() {
        let a = random_mat(8, 6, 11);
        let ours = svd(&a).unwrap().sigma;
        let na = nalgebra::DMatrix::from_row_slice(8, 6, a.as_slice());
        let mut theirs: Vec<f64> = na.singular_values().iter().copied().collect();
        theirs.sort_by(|a, b| b.partial_cmp(a).unwrap());
        for (x, y) in ours.iter().zip(&theirs) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn single_precision() {
        let a = Mat::from_fn(5, 4, |r, c| ((r * 7 + c * 3) % 5) as f32 - 2.0);
        let s = svd(&a).unwrap();
        let back = s.recompose_with(&s.sigma);
        assert!(back.sub(&a).unwrap().frob_norm() < 1e-4);
    }

    #[test]
    fn rejects_nan() {
        let a = Mat::from_rows(&[vec![f64::NAN]]);
        assert!(matches!(svd(&a), Err(Error::Numeric { .. })));
    }
}
