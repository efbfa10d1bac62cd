//! Circular forward differences along the three cube axes, their adjoint, and
//! the Fourier-domain solve of `(beta2 I + beta3 D^T D) z = m`.
//!
//! Differences wrap around at the far edge of every axis, so `D^T D` is block
//! circulant and diagonalised by the 3-D DFT. Its eigenvalue at frequency
//! `(p, q, s)` is `4 sin^2(pi p / I) + 4 sin^2(pi q / J) + 4 sin^2(pi s / K)`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::tensor::{Cube, Dims};

/// Horizontal (`i`), vertical (`j`) and spectral (`k`) components of a
/// difference stack. Holds both the TV split variable and its multiplier.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffField<T> {
    pub h: Cube<T>,
    pub v: Cube<T>,
    pub z: Cube<T>,
}

impl<T: Real> DiffField<T> {
    pub fn new(h: Cube<T>, v: Cube<T>, z: Cube<T>) -> Result<Self> {
        h.check_same("DiffField::new", &v)?;
        h.check_same("DiffField::new", &z)?;
        Ok(Self { h, v, z })
    }

    pub fn zeros(dims: Dims) -> Self {
        Self {
            h: Cube::zeros(dims),
            v: Cube::zeros(dims),
            z: Cube::zeros(dims),
        }
    }

    pub fn dims(&self) -> Dims {
        self.h.dims()
    }

    pub fn components(&self) -> [&Cube<T>; 3] {
        [&self.h, &self.v, &self.z]
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            h: self.h.map(&f),
            v: self.v.map(&f),
            z: self.z.map(&f),
        }
    }

    pub fn zip_map(&self, other: &DiffField<T>, f: impl Fn(T, T) -> T) -> Result<Self> {
        Ok(Self {
            h: self.h.zip_map(&other.h, &f)?,
            v: self.v.zip_map(&other.v, &f)?,
            z: self.z.zip_map(&other.z, &f)?,
        })
    }

    pub fn sub(&self, other: &DiffField<T>) -> Result<Self> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn inner_product(&self, other: &DiffField<T>) -> Result<T> {
        Ok(self.h.inner_product(&other.h)?
            + self.v.inner_product(&other.v)?
            + self.z.inner_product(&other.z)?)
    }

    pub fn frob_norm(&self) -> T {
        (self.h.frob_norm_sq() + self.v.frob_norm_sq() + self.z.frob_norm_sq()).sqrt()
    }

    pub fn l1_norm(&self) -> T {
        self.h.l1_norm() + self.v.l1_norm() + self.z.l1_norm()
    }

    pub fn is_finite(&self) -> bool {
        self.h.is_finite() && self.v.is_finite() && self.z.is_finite()
    }
}

/// `D x`: circular forward differences along `i`, `j` and `k`.
pub fn diff_forward<T: Real>(x: &Cube<T>) -> DiffField<T> {
    let d = x.dims();
    let h = Cube::from_fn(d, |i, j, k| x.get((i + 1) % d.rows, j, k) - x.get(i, j, k));
    let v = Cube::from_fn(d, |i, j, k| x.get(i, (j + 1) % d.cols, k) - x.get(i, j, k));
    let z = Cube::from_fn(d, |i, j, k| x.get(i, j, (k + 1) % d.bands) - x.get(i, j, k));
    DiffField { h, v, z }
}

/// `D^T d`: the sum over axes of `d[prev] - d[here]` with circular `prev`.
pub fn diff_adjoint<T: Real>(d: &DiffField<T>) -> Result<Cube<T>> {
    d.h.check_same("diff_adjoint", &d.v)?;
    d.h.check_same("diff_adjoint", &d.z)?;
    let s = d.dims();
    Ok(Cube::from_fn(s, |i, j, k| {
        let ip = (i + s.rows - 1) % s.rows;
        let jp = (j + s.cols - 1) % s.cols;
        let kp = (k + s.bands - 1) % s.bands;
        (d.h.get(ip, j, k) - d.h.get(i, j, k))
            + (d.v.get(i, jp, k) - d.v.get(i, j, k))
            + (d.z.get(i, j, kp) - d.z.get(i, j, k))
    }))
}

/// Eigenvalues of `beta2 I + beta3 D^T D` laid out like a cube, plus the FFT
/// plans needed to apply its inverse. Immutable once built.
#[derive(Clone)]
pub struct TvKernelSpectrum<T: Real> {
    denom: Cube<T>,
    beta2: T,
    beta3: T,
    plans: Plans<T>,
}

impl<T: Real> fmt::Debug for TvKernelSpectrum<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TvKernelSpectrum")
            .field("dims", &self.denom.dims())
            .field("beta2", &self.beta2)
            .field("beta3", &self.beta3)
            .finish_non_exhaustive()
    }
}

impl<T: Real> TvKernelSpectrum<T> {
    pub fn new(dims: Dims, beta2: T, beta3: T) -> Result<Self> {
        if !(beta2 > T::zero()) || !beta2.is_finite() {
            return Err(Error::param("beta2", format!("must be positive, got {beta2}")));
        }
        if !(beta3 >= T::zero()) || !beta3.is_finite() {
            return Err(Error::param("beta3", format!("must be nonnegative, got {beta3}")));
        }
        if dims.is_empty() {
            return Err(Error::shape("TvKernelSpectrum::new", "non-empty dims", dims));
        }
        let axis = |n: usize| -> Vec<T> {
            (0..n)
                .map(|p| {
                    let s = (PI * p as f64 / n as f64).sin();
                    T::lit(4.0 * s * s)
                })
                .collect()
        };
        let (ai, aj, ak) = (axis(dims.rows), axis(dims.cols), axis(dims.bands));
        let denom = Cube::from_fn(dims, |p, q, s| beta2 + beta3 * (ai[p] + aj[q] + ak[s]));
        Ok(Self {
            denom,
            beta2,
            beta3,
            plans: Plans::new(dims),
        })
    }

    pub fn dims(&self) -> Dims {
        self.denom.dims()
    }

    pub fn denom(&self) -> &Cube<T> {
        &self.denom
    }

    pub fn betas(&self) -> (T, T) {
        (self.beta2, self.beta3)
    }
}

/// Solves `(beta2 I + beta3 D^T D) z = m` by pointwise division in the
/// Fourier domain.
pub fn solve_z_system<T: Real>(m: &Cube<T>, spec: &TvKernelSpectrum<T>) -> Result<Cube<T>> {
    let dims = m.dims();
    if dims != spec.dims() {
        return Err(Error::shape("solve_z_system", spec.dims(), dims));
    }
    let mut buf: Vec<Complex<T>> = m
        .as_slice()
        .iter()
        .map(|&re| Complex::new(re, T::zero()))
        .collect();
    spec.plans.transform(&mut buf, false);
    for (c, &d) in buf.iter_mut().zip(spec.denom.as_slice()) {
        *c = *c / d;
    }
    spec.plans.transform(&mut buf, true);

    let scale = T::one() / T::lit(dims.len() as f64);
    let mut imag_sq = T::zero();
    let data: Vec<T> = buf
        .iter()
        .map(|c| {
            imag_sq += c.im * c.im * scale * scale;
            c.re * scale
        })
        .collect();
    let z = Cube::new(dims, data)?;
    let tol = T::lit(1e-9).max(T::epsilon() * T::lit(1e4));
    let norm = z.frob_norm();
    if imag_sq.sqrt() > tol * norm {
        return Err(Error::Numeric {
            op: "solve_z_system",
            reason: format!(
                "imaginary residue {} exceeds {} of the solution norm {}",
                imag_sq.sqrt(),
                tol,
                norm
            ),
        });
    }
    Ok(z)
}

/// Applies `(beta2 I + beta3 D^T D)` directly through the difference operators.
pub fn apply_z_operator<T: Real>(z: &Cube<T>, beta2: T, beta3: T) -> Result<Cube<T>> {
    let dtd = diff_adjoint(&diff_forward(z))?;
    z.zip_map(&dtd, |a, b| beta2 * a + beta3 * b)
}

#[derive(Clone)]
struct Plans<T: Real> {
    dims: Dims,
    forward: [Arc<dyn Fft<T>>; 3],
    inverse: [Arc<dyn Fft<T>>; 3],
}

impl<T: Real> Plans<T> {
    fn new(dims: Dims) -> Self {
        let mut planner = FftPlanner::new();
        let lens = [dims.rows, dims.cols, dims.bands];
        Self {
            dims,
            forward: lens.map(|n| planner.plan_fft_forward(n)),
            inverse: lens.map(|n| planner.plan_fft_inverse(n)),
        }
    }

    /// Unnormalised 3-D DFT in place.
    fn transform(&self, buf: &mut [Complex<T>], inverse: bool) {
        let plans = if inverse { &self.inverse } else { &self.forward };
        let Dims { rows, cols, bands } = self.dims;
        let plane = rows * cols;

        // along j: contiguous rows of every band
        plans[1].process(buf);

        let mut line = vec![Complex::new(T::zero(), T::zero()); rows.max(bands)];
        // along i: stride `cols` within each band
        for k in 0..bands {
            for j in 0..cols {
                let base = k * plane + j;
                for i in 0..rows {
                    line[i] = buf[base + i * cols];
                }
                plans[0].process(&mut line[..rows]);
                for i in 0..rows {
                    buf[base + i * cols] = line[i];
                }
            }
        }
        // along k: stride `plane`
        for p in 0..plane {
            for k in 0..bands {
                line[k] = buf[p + k * plane];
            }
            plans[2].process(&mut line[..bands]);
            for k in 0..bands {
                buf[p + k * plane] = line[k];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_cube(dims: Dims, seed: u64) -> Cube<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Cube::from_fn(dims, |_, _, _| rng.random_range(-1.0..1.0))
    }

    fn random_field(dims: Dims, seed: u64) -> DiffField<f64> {
        DiffField {
            h: random_cube(dims, seed),
            v: random_cube(dims, seed + 1),
            z: random_cube(dims, seed + 2),
        }
    }

    #[test]
    fn constant_cube_has_zero_differences() {
        let c = Cube::filled(Dims::new(3, 4, 5), 0.7);
        let d = diff_forward(&c);
        assert_eq!(d, DiffField::zeros(c.dims()));
        assert_eq!(diff_adjoint(&d).unwrap(), Cube::zeros(c.dims()));
    }

    #[test]
    fn ramp_wraps_around() {
        let x = Cube::from_fn(Dims::new(4, 2, 1), |i, _, _| i as f64);
        let d = diff_forward(&x);
        for j in 0..2 {
            let col: Vec<f64> = (0..4).map(|i| d.h.get(i, j, 0)).collect();
            assert_eq!(col, vec![1.0, 1.0, 1.0, -3.0]);
        }
    }

    #[test]
    fn forward_matches_modular_loop() {
        let dims = Dims::new(3, 4, 2);
        let x = random_cube(dims, 3);
        let d = diff_forward(&x);
        for k in 0..2 {
            for i in 0..3 {
                for j in 0..4 {
                    let here = x.get(i, j, k);
                    assert_eq!(d.h.get(i, j, k), x.get((i + 1) % 3, j, k) - here);
                    assert_eq!(d.v.get(i, j, k), x.get(i, (j + 1) % 4, k) - here);
                    assert_eq!(d.z.get(i, j, k), x.get(i, j, (k + 1) % 2) - here);
                }
            }
        }
    }

    #[test]
    fn adjoint_of_zero_is_zero() {
        let dims = Dims::new(2, 3, 4);
        assert_eq!(diff_adjoint(&DiffField::<f64>::zeros(dims)).unwrap(), Cube::zeros(dims));
    }

    #[test]
    fn adjoint_identity() {
        let dims = Dims::new(5, 4, 3);
        let x = random_cube(dims, 10);
        let d = random_field(dims, 20);
        let lhs = diff_forward(&x).inner_product(&d).unwrap();
        let rhs = x.inner_product(&diff_adjoint(&d).unwrap()).unwrap();
        assert!((lhs - rhs).abs() < 1e-10);
    }

    #[test]
    fn spectrum_corner_values() {
        let s = TvKernelSpectrum::<f64>::new(Dims::new(2, 2, 2), 0.3, 0.7).unwrap();
        assert_eq!(s.denom().get(0, 0, 0), 0.3);
        assert!((s.denom().get(1, 1, 1) - (0.3 + 12.0 * 0.7)).abs() < 1e-12);
        assert!(s.denom().as_slice().iter().all(|&v| v >= 0.3));
        assert!(TvKernelSpectrum::<f64>::new(Dims::new(2, 2, 2), 0.0, 1.0).is_err());
        assert!(TvKernelSpectrum::<f64>::new(Dims::new(2, 2, 2), 1.0, -1.0).is_err());
    }

    /// Naive 3-D DFT, independent of the FFT path.
    fn naive_dft(x: &[Complex<f64>], dims: Dims, sign: f64) -> Vec<Complex<f64>> {
        let mut out = vec![Complex::new(0.0, 0.0); dims.len()];
        for s in 0..dims.bands {
            for p in 0..dims.rows {
                for q in 0..dims.cols {
                    let mut acc = Complex::new(0.0, 0.0);
                    for k in 0..dims.bands {
                        for i in 0..dims.rows {
                            for j in 0..dims.cols {
                                let phase = sign
                                    * 2.0
                                    * PI
                                    * ((p * i) as f64 / dims.rows as f64
                                        + (q * j) as f64 / dims.cols as f64
                                        + (s * k) as f64 / dims.bands as f64);
                                acc += x[dims.offset(i, j, k)] * Complex::from_polar(1.0, phase);
                            }
                        }
                    }
                    out[dims.offset(p, q, s)] = acc;
                }
            }
        }
        out
    }

    #[test]
    fn spectrum_diagonalises_operator() {
        let dims = Dims::new(3, 5, 4);
        let x = random_cube(dims, 7);
        let beta3 = 0.8;
        let spec = TvKernelSpectrum::new(dims, 1.0, beta3).unwrap();
        let direct = diff_adjoint(&diff_forward(&x)).unwrap();

        let xc: Vec<_> = x.as_slice().iter().map(|&v| Complex::new(v, 0.0)).collect();
        let mut fx = naive_dft(&xc, dims, -1.0);
        for (c, &d) in fx.iter_mut().zip(spec.denom().as_slice()) {
            *c *= (d - 1.0) / beta3;
        }
        let back = naive_dft(&fx, dims, 1.0);
        let n = dims.len() as f64;
        for (b, &e) in back.iter().zip(direct.as_slice()) {
            assert!((b.re / n - e).abs() < 1e-10);
            assert!((b.im / n).abs() < 1e-10);
        }
    }

    #[test]
    fn diagonal_and_constant_systems() {
        let dims = Dims::new(3, 2, 4);
        let m = random_cube(dims, 8);
        let spec = TvKernelSpectrum::new(dims, 2.0, 0.0).unwrap();
        let z = solve_z_system(&m, &spec).unwrap();
        for (a, b) in z.as_slice().iter().zip(m.as_slice()) {
            assert!((a - b / 2.0).abs() < 1e-14);
        }

        let c = Cube::filled(dims, 3.0f64);
        let spec = TvKernelSpectrum::new(dims, 1.5, 0.9).unwrap();
        let z = solve_z_system(&c, &spec).unwrap();
        assert!(z.as_slice().iter().all(|&v| (v - 2.0).abs() < 1e-14));
    }

    #[test]
    fn solve_matches_dense_linear_system() {
        let dims = Dims::new(4, 3, 2);
        let (b2, b3) = (1.0, 0.5);
        let n = dims.len();
        let mut a = nalgebra::DMatrix::<f64>::zeros(n, n);
        for col in 0..n {
            let mut e = Cube::zeros(dims);
            e.as_mut_slice()[col] = 1.0;
            let ae = apply_z_operator(&e, b2, b3).unwrap();
            for row in 0..n {
                a[(row, col)] = ae.as_slice()[row];
            }
        }
        let m = random_cube(dims, 12);
        let rhs = nalgebra::DVector::from_column_slice(m.as_slice());
        let dense = a.lu().solve(&rhs).unwrap();

        let spec = TvKernelSpectrum::new(dims, b2, b3).unwrap();
        let z = solve_z_system(&m, &spec).unwrap();
        for (x, y) in z.as_slice().iter().zip(dense.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
        let resid = apply_z_operator(&z, b2, b3).unwrap().sub(&m).unwrap().frob_norm();
        assert!(resid < 1e-8 * m.frob_norm());
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let spec = TvKernelSpectrum::new(Dims::new(2, 2, 2), 1.0, 1.0).unwrap();
        let m = Cube::<f64>::zeros(Dims::new(2, 2, 3));
        assert!(matches!(solve_z_system(&m, &spec), Err(Error::Shape { .. })));
    }

    #[test]
    fn single_precision_solve() {
        let dims = Dims::new(4, 4, 3);
        let m = random_cube(dims, 5).cast::<f32>();
        let spec = TvKernelSpectrum::new(dims, 0.1f32, 0.1).unwrap();
        let z = solve_z_system(&m, &spec).unwrap();
        let resid = apply_z_operator(&z, 0.1, 0.1).unwrap().sub(&m).unwrap().frob_norm();
        assert!(resid < 1e-4 * m.frob_norm());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn adjoint_identity_holds(
                rows in 1usize..9, cols in 1usize..9, bands in 1usize..9, seed in any::<u64>()
            ) {
                let dims = Dims::new(rows, cols, bands);
                let x = random_cube(dims, seed);
                let d = random_field(dims, seed.wrapping_add(100));
                let lhs = diff_forward(&x).inner_product(&d).unwrap();
                let rhs = x.inner_product(&diff_adjoint(&d).unwrap()).unwrap();
                prop_assert!((lhs - rhs).abs() < 1e-10 * x.frob_norm() * d.frob_norm());
            }

            #[test]
            fn z_solve_residual_is_small(
                rows in 1usize..7, cols in 1usize..7, bands in 1usize..7,
                b2 in 0.01f64..2.0, b3 in 0.0f64..2.0, seed in any::<u64>()
            ) {
                let dims = Dims::new(rows, cols, bands);
                let m = random_cube(dims, seed);
                let spec = TvKernelSpectrum::new(dims, b2, b3).unwrap();
                let z = solve_z_system(&m, &spec).unwrap();
                let r = apply_z_operator(&z, b2, b3).unwrap().sub(&m).unwrap().frob_norm();
                prop_assert!(r < 1e-8 * m.frob_norm());
            }
        }
    }
}
