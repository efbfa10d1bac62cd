//! Dense third-order tensors and the small amount of matrix algebra the
//! solver needs.
//!
//! A [`Cube`] of dims `(rows, cols, bands)` stores its values band by band:
//! entry `(i, j, k)` lives at offset `k * rows * cols + i * cols + j`. Each
//! band is therefore a contiguous row-major `rows x cols` image, and the
//! mode-3 unfolding is a plain reinterpretation of the buffer: row `k` of the
//! unfolding is band `k`, column `i * cols + j` is spatial pixel `(i, j)`.

use std::fmt;

use num_traits::Float;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Extents of a cube: spatial rows `I`, spatial columns `J`, spectral bands `K`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct Dims {
    pub rows: usize,
    pub cols: usize,
    pub bands: usize,
}

impl Dims {
    pub const fn new(rows: usize, cols: usize, bands: usize) -> Self {
        Self { rows, cols, bands }
    }

    /// Number of pixels in one band.
    #[inline]
    pub const fn band_len(&self) -> usize {
        self.rows * self.cols
    }

    #[inline]
    pub const fn len(&self) -> usize {
        self.rows * self.cols * self.bands
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub const fn offset(&self, i: usize, j: usize, k: usize) -> usize {
        k * self.rows * self.cols + i * self.cols + j
    }

    /// Same spatial extent with a different number of bands.
    pub const fn with_bands(&self, bands: usize) -> Self {
        Self::new(self.rows, self.cols, bands)
    }
}

impl fmt::Display for Dims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.rows, self.cols, self.bands)
    }
}

/// Dense row-major matrix.
#[derive(Clone, PartialEq)]
pub struct Mat<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: fmt::Debug> fmt::Debug for Mat<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Mat")
            .field("rows", &self.rows)
            .field("cols", &self.cols)
            .field("data", &self.data)
            .finish()
    }
}

impl<T: Real> Mat<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(
                "Mat::new",
                format!("{} values for {rows}x{cols}", rows * cols),
                data.len(),
            ));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |r, c| if r == c { T::one() } else { T::zero() })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from nested rows; panics on ragged input.
    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let ncols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == ncols), "ragged rows");
        Self {
            rows: rows.len(),
            cols: ncols,
            data: rows.iter().flatten().copied().collect(),
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: T) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<T> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self.get(c, r))
    }

    pub fn matmul(&self, other: &Mat<T>) -> Result<Mat<T>> {
        if self.cols != other.rows {
            return Err(Error::shape(
                "Mat::matmul",
                format!("inner dimension {}", self.cols),
                other.rows,
            ));
        }
        let mut out = Mat::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            let dst = &mut out.data[r * other.cols..(r + 1) * other.cols];
            for (p, &a) in self.row(r).iter().enumerate() {
                if a == T::zero() {
                    continue;
                }
                for (d, &b) in dst.iter_mut().zip(other.row(p)) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn frob_norm(&self) -> T {
        self.data.iter().map(|&v| v * v).sum::<T>().sqrt()
    }

    pub fn trace(&self) -> T {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).sum()
    }

    pub fn sub(&self, other: &Mat<T>) -> Result<Mat<T>> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::shape(
                "Mat::sub",
                format!("{}x{}", self.rows, self.cols),
                format!("{}x{}", other.rows, other.cols),
            ));
        }
        Ok(Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| a - b).collect(),
        })
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Dense `I x J x K` tensor, band-contiguous (see module docs).
#[derive(Clone, PartialEq)]
pub struct Cube<T> {
    dims: Dims,
    data: Vec<T>,
}

impl<T: fmt::Debug> fmt::Debug for Cube<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Cube")
            .field("dims", &self.dims)
            .field("data", &self.data)
            .finish()
    }
}

impl<T: Real> Cube<T> {
    pub fn new(dims: Dims, data: Vec<T>) -> Result<Self> {
        if data.len() != dims.len() {
            return Err(Error::shape(
                "Cube::new",
                format!("{} values for {dims}", dims.len()),
                data.len(),
            ));
        }
        Ok(Self { dims, data })
    }

    pub fn zeros(dims: Dims) -> Self {
        Self {
            dims,
            data: vec![T::zero(); dims.len()],
        }
    }

    pub fn filled(dims: Dims, value: T) -> Self {
        Self {
            dims,
            data: vec![value; dims.len()],
        }
    }

    /// Evaluates `f(i, j, k)` for every entry.
    pub fn from_fn(dims: Dims, mut f: impl FnMut(usize, usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(dims.len());
        for k in 0..dims.bands {
            for i in 0..dims.rows {
                for j in 0..dims.cols {
                    data.push(f(i, j, k));
                }
            }
        }
        Self { dims, data }
    }

    #[inline]
    pub fn dims(&self) -> Dims {
        self.dims
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> T {
        self.data[self.dims.offset(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: T) {
        let o = self.dims.offset(i, j, k);
        self.data[o] = v;
    }

    pub fn band(&self, k: usize) -> &[T] {
        let n = self.dims.band_len();
        &self.data[k * n..(k + 1) * n]
    }

    pub fn band_mut(&mut self, k: usize) -> &mut [T] {
        let n = self.dims.band_len();
        &mut self.data[k * n..(k + 1) * n]
    }

    /// Band `k` as a `rows x cols` matrix.
    pub fn band_mat(&self, k: usize) -> Mat<T> {
        Mat {
            rows: self.dims.rows,
            cols: self.dims.cols,
            data: self.band(k).to_vec(),
        }
    }

    /// Stacks equally sized matrices as the bands of a cube.
    pub fn from_bands(bands: &[Mat<T>]) -> Result<Self> {
        let (rows, cols) = bands.first().map_or((0, 0), |m| (m.rows, m.cols));
        if let Some(bad) = bands.iter().find(|m| m.rows != rows || m.cols != cols) {
            return Err(Error::shape(
                "Cube::from_bands",
                format!("{rows}x{cols}"),
                format!("{}x{}", bad.rows, bad.cols),
            ));
        }
        let dims = Dims::new(rows, cols, bands.len());
        let data = bands.iter().flat_map(|m| m.data.iter().copied()).collect();
        Ok(Self { dims, data })
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            dims: self.dims,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Elementwise combination of two same-shaped cubes.
    pub fn zip_map(&self, other: &Cube<T>, f: impl Fn(T, T) -> T) -> Result<Self> {
        self.check_same("Cube::zip_map", other)?;
        Ok(Self {
            dims: self.dims,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &Cube<T>) -> Result<Self> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Cube<T>) -> Result<Self> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|v| v * s)
    }

    pub(crate) fn check_same(&self, op: &'static str, other: &Cube<T>) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::shape(op, self.dims, other.dims));
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Converts every entry to another scalar type.
    pub fn cast<U: Real>(&self) -> Cube<U> {
        Cube {
            dims: self.dims,
            data: self
                .data
                .iter()
                .map(|&v| U::from_f64(v.to_f64_lossy()).unwrap_or_else(U::nan))
                .collect(),
        }
    }

    /// `<a, b> = sum a[i,j,k] * b[i,j,k]`.
    pub fn inner_product(&self, other: &Cube<T>) -> Result<T> {
        self.check_same("inner_product", other)?;
        Ok(self.data.iter().zip(&other.data).map(|(&a, &b)| a * b).sum())
    }

    pub fn frob_norm_sq(&self) -> T {
        self.data.iter().map(|&v| v * v).sum()
    }

    pub fn frob_norm(&self) -> T {
        self.frob_norm_sq().sqrt()
    }

    pub fn l1_norm(&self) -> T {
        self.data.iter().map(|&v| Float::abs(v)).sum()
    }

    /// Mode-3 unfolding: a `K x (I*J)` matrix whose row `k` is band `k`.
    pub fn unfold_mode3(&self) -> Mat<T> {
        Mat {
            rows: self.dims.bands,
            cols: self.dims.band_len(),
            data: self.data.clone(),
        }
    }

    /// Inverse of [`Cube::unfold_mode3`].
    pub fn fold_mode3(m: &Mat<T>, dims: Dims) -> Result<Self> {
        if m.rows != dims.bands || m.cols != dims.band_len() {
            return Err(Error::shape(
                "fold_mode3",
                format!("{}x{}", dims.bands, dims.band_len()),
                format!("{}x{}", m.rows, m.cols),
            ));
        }
        Ok(Self {
            dims,
            data: m.data.clone(),
        })
    }

    /// Mode-3 product `self x_3 u` with `u` of shape `K' x K`:
    /// `out[i,j,k'] = sum_k self[i,j,k] * u[k',k]`.
    pub fn mode3_product(&self, u: &Mat<T>) -> Result<Self> {
        if u.cols != self.dims.bands {
            return Err(Error::shape(
                "mode3_product",
                format!("matrix with {} columns", self.dims.bands),
                format!("{}x{}", u.rows, u.cols),
            ));
        }
        let dims = self.dims.with_bands(u.rows);
        let mut out = Cube::zeros(dims);
        for kp in 0..u.rows {
            let dst = out.band_mut(kp);
            for k in 0..self.dims.bands {
                let w = u.get(kp, k);
                if w == T::zero() {
                    continue;
                }
                for (d, &s) in dst.iter_mut().zip(self.band(k)) {
                    *d += w * s;
                }
            }
        }
        Ok(out)
    }

    /// Mode-3 product with the transpose of `u` (`u` is `K x K'`), without
    /// materialising the transpose: `out[i,j,k'] = sum_k self[i,j,k] * u[k,k']`.
    pub fn mode3_product_transposed(&self, u: &Mat<T>) -> Result<Self> {
        if u.rows != self.dims.bands {
            return Err(Error::shape(
                "mode3_product_transposed",
                format!("matrix with {} rows", self.dims.bands),
                format!("{}x{}", u.rows, u.cols),
            ));
        }
        let dims = self.dims.with_bands(u.cols);
        let mut out = Cube::zeros(dims);
        for kp in 0..u.cols {
            let dst = out.band_mut(kp);
            for k in 0..self.dims.bands {
                let w = u.get(k, kp);
                if w == T::zero() {
                    continue;
                }
                for (d, &s) in dst.iter_mut().zip(self.band(k)) {
                    *d += w * s;
                }
            }
        }
        Ok(out)
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

    #[test]
    fn inner_product_of_ones() {
        let a = Cube::filled(Dims::new(2, 2, 2), 1.0);
        assert_eq!(a.inner_product(&a).unwrap(), 8.0);
        let z = Cube::zeros(Dims::new(2, 2, 2));
        assert_eq!(a.inner_product(&z).unwrap(), 0.0);
    }

    #[test]
    fn inner_product_matches_loop() {
        let dims = Dims::new(3, 3, 2);
        let a = random_cube(dims, 1);
        let b = random_cube(dims, 2);
        let mut expect = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..2 {
                    expect += a.get(i, j, k) * b.get(i, j, k);
                }
            }
        }
        assert!((a.inner_product(&b).unwrap() - expect).abs() < 1e-14);
    }

    #[test]
    fn inner_product_rejects_mismatch() {
        let a = Cube::<f64>::zeros(Dims::new(2, 2, 2));
        let b = Cube::<f64>::zeros(Dims::new(2, 2, 3));
        assert!(matches!(a.inner_product(&b), Err(Error::Shape { .. })));
    }

    #[test]
    fn norms() {
        let ones = Cube::filled(Dims::new(2, 2, 2), 1.0f64);
        assert_eq!(ones.frob_norm(), 8f64.sqrt());
        assert_eq!(Cube::<f64>::zeros(Dims::new(2, 2, 2)).frob_norm(), 0.0);
        assert_eq!(Cube::filled(Dims::new(1, 1, 1), 3.0f64).frob_norm(), 3.0);

        let c = Cube::new(Dims::new(1, 3, 1), vec![1.0, -2.0, 0.0]).unwrap();
        assert_eq!(c.l1_norm(), 3.0);
        assert_eq!(Cube::<f64>::zeros(Dims::new(3, 1, 1)).l1_norm(), 0.0);

        let r = random_cube(Dims::new(4, 3, 2), 3);
        let expect: f64 = r.as_slice().iter().map(|v| v.abs()).sum();
        assert!((r.l1_norm() - expect).abs() < 1e-14);
    }

    #[test]
    fn unfold_spectral_vector() {
        let c = Cube::new(Dims::new(1, 1, 4), vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let m = c.unfold_mode3();
        assert_eq!((m.rows(), m.cols()), (4, 1));
        assert_eq!(m.as_slice(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn unfold_index_enumeration() {
        let dims = Dims::new(2, 2, 2);
        let c = Cube::from_fn(dims, |i, j, k| (4 * k + 2 * j + i) as f64);
        let m = c.unfold_mode3();
        // column index is i * J + j
        for k in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    assert_eq!(m.get(k, i * 2 + j), (4 * k + 2 * j + i) as f64);
                }
            }
        }
        assert_eq!(m.row(0), &[0.0, 2.0, 1.0, 3.0]);
        assert_eq!(m.row(1), &[4.0, 6.0, 5.0, 7.0]);
    }

    #[test]
    fn fold_edge_cases() {
        let z = Cube::fold_mode3(&Mat::<f64>::zeros(3, 4), Dims::new(2, 2, 3)).unwrap();
        assert_eq!(z, Cube::zeros(Dims::new(2, 2, 3)));
        let one = Cube::fold_mode3(&Mat::from_rows(&[vec![5.0]]), Dims::new(1, 1, 1)).unwrap();
        assert_eq!(one.get(0, 0, 0), 5.0);
        assert!(Cube::fold_mode3(&Mat::<f64>::zeros(3, 4), Dims::new(2, 3, 3)).is_err());
    }

    #[test]
    fn fold_matches_index_loop() {
        let dims = Dims::new(3, 2, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let m = Mat::from_fn(4, 6, |_, _| rng.random_range(-1.0..1.0));
        let c = Cube::fold_mode3(&m, dims).unwrap();
        for k in 0..4 {
            for i in 0..3 {
                for j in 0..2 {
                    assert_eq!(c.get(i, j, k), m.get(k, i * 2 + j));
                }
            }
        }
    }

    #[test]
    fn mode3_identity_and_sums() {
        let g = random_cube(Dims::new(3, 2, 2), 4);
        assert_eq!(g.mode3_product(&Mat::identity(2)).unwrap(), g);

        let ones = Cube::filled(Dims::new(2, 2, 2), 1.0);
        let u = Mat::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]);
        assert_eq!(
            ones.mode3_product(&u).unwrap(),
            Cube::filled(Dims::new(2, 2, 2), 2.0)
        );
    }

    #[test]
    fn mode3_matches_unfolding_identity() {
        let g = random_cube(Dims::new(3, 3, 2), 5);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let u = Mat::from_fn(4, 2, |_, _| rng.random_range(-1.0..1.0));
        let via_unfold =
            Cube::fold_mode3(&u.matmul(&g.unfold_mode3()).unwrap(), Dims::new(3, 3, 4)).unwrap();
        let direct = g.mode3_product(&u).unwrap();
        let err = direct.sub(&via_unfold).unwrap().frob_norm() / via_unfold.frob_norm();
        assert!(err < 1e-12);

        let back = direct.mode3_product_transposed(&u).unwrap();
        let expect = direct.mode3_product(&u.transpose()).unwrap();
        assert!(back.sub(&expect).unwrap().frob_norm() < 1e-12);
        assert!(g.mode3_product(&Mat::zeros(4, 3)).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn cube_strategy() -> impl Strategy<Value = Cube<f64>> {
            (1usize..5, 1usize..5, 1usize..5).prop_flat_map(|(i, j, k)| {
                proptest::collection::vec(-10.0f64..10.0, i * j * k)
                    .prop_map(move |v| Cube::new(Dims::new(i, j, k), v).unwrap())
            })
        }

        proptest! {
            #[test]
            fn fold_unfold_is_exact(c in cube_strategy()) {
                let back = Cube::fold_mode3(&c.unfold_mode3(), c.dims()).unwrap();
                prop_assert_eq!(back, c);
            }

            #[test]
            fn norm_squared_is_self_inner_product(c in cube_strategy()) {
                let ip = c.inner_product(&c).unwrap();
                let n = c.frob_norm();
                prop_assert!((n * n - ip).abs() <= 1e-12 * ip.max(1e-300));
            }
        }
    }
}
