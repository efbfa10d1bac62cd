//! Smooth low-rank test scenes with a known factorization.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::factor::MvtfFactors;
use crate::tensor::{Cube, Dims, Mat};

/// Ground truth `G x_3 C` with values in `[0.05, 0.95]`.
///
/// `C` has orthonormal, spectrally smooth columns, the first of which is
/// constant, so every band has a positive mean. Each abundance slice is a sum
/// of separable low-frequency cosine products and has rank at most 3.
pub fn smooth_scene(dims: Dims, rank: usize, seed: u64) -> Result<(Cube<f64>, MvtfFactors<f64>)> {
    if rank == 0 || rank > dims.bands {
        return Err(Error::param(
            "rank",
            format!("must lie in 1..={}, got {rank}", dims.bands),
        ));
    }
    if dims.is_empty() {
        return Err(Error::param("dims", "cube is empty"));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let (rows, cols, bands) = (dims.rows, dims.cols, dims.bands);

    // smooth spectra, Gram-Schmidt against the constant column
    let mut basis: Vec<Vec<f64>> = vec![vec![1.0 / (bands as f64).sqrt(); bands]];
    while basis.len() < rank {
        let (f, ph) = (rng.random_range(0.3..2.0), rng.random_range(0.0..std::f64::consts::TAU));
        let mut v: Vec<f64> = (0..bands)
            .map(|k| (f * std::f64::consts::PI * k as f64 / bands as f64 + ph).cos() + rng.random_range(-0.05..0.05))
            .collect();
        for _ in 0..2 {
            for b in &basis {
                let d: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= d * y);
            }
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-6 {
            basis.push(v.into_iter().map(|x| x / n).collect());
        }
    }
    let c = Mat::from_fn(bands, rank, |k, r| basis[r][k]);

    let mut slices = Vec::with_capacity(rank);
    for r in 0..rank {
        let amp = if r == 0 { 1.0 } else { 0.5 };
        // slice 0 later absorbs a constant, so it gets one term fewer
        let n_terms = if r == 0 { 2 } else { 3 };
        let terms: Vec<_> = (0..n_terms)
            .map(|_| {
                (
                    rng.random_range(-1.0..1.0) * amp,
                    rng.random_range(0.2..1.5),
                    rng.random_range(0.0..std::f64::consts::TAU),
                    rng.random_range(0.2..1.5),
                    rng.random_range(0.0..std::f64::consts::TAU),
                )
            })
            .collect();
        slices.push(Mat::from_fn(rows, cols, |i, j| {
            let (u, v) = (i as f64 / rows as f64, j as f64 / cols as f64);
            terms
                .iter()
                .map(|&(a, fi, pi, fj, pj)| a * (std::f64::consts::PI * fi * u + pi).cos() * (std::f64::consts::PI * fj * v + pj).cos())
                .sum()
        }));
    }
    let g = Cube::from_bands(&slices)?;
    let raw = g.mode3_product(&c)?;

    // affine rescale into [0.05, 0.95]; the offset lives in the constant
    // endmember, so it stays inside the factorization
    let lo = raw.as_slice().iter().copied().fold(f64::INFINITY, f64::min);
    let hi = raw.as_slice().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scale = if hi > lo { 0.9 / (hi - lo) } else { 1.0 };
    let shift = (0.05 - scale * lo) * (bands as f64).sqrt();
    let mut g = g.scale(scale);
    for v in g.band_mut(0) {
        *v += shift;
    }
    let factors = MvtfFactors::new(g, c)?;
    let x = factors.compose()?;
    Ok((x, factors))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::svd;

    #[test]
    fn scene_properties() {
        let dims = Dims::new(20, 18, 9);
        let (x, f) = smooth_scene(dims, 3, 1).unwrap();
        assert_eq!(x.dims(), dims);
        let (lo, hi) = x
            .as_slice()
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        assert!((lo - 0.05).abs() < 1e-12 && (hi - 0.95).abs() < 1e-12);
        assert_eq!(svd(&x.unfold_mode3()).unwrap().rank(), 3);
        for r in 0..3 {
            assert!(svd(&f.g.band_mat(r)).unwrap().rank() <= 3);
        }
        assert_eq!(smooth_scene(dims, 3, 1).unwrap().0, x);
        assert!(smooth_scene(dims, 10, 1).is_err());
    }
}
