//! Seeded mixed-noise simulation: Gaussian, salt-and-pepper, dead lines and
//! stripes, plus the four standard corruption cases.
//!
//! Noise sources are applied in a fixed order (Gaussian, impulse, dead lines,
//! stripes) from one `ChaCha20Rng` stream seeded with
//! `SeedableRng::seed_from_u64`. Band windows are 1-based and inclusive.
//! Nothing is clipped afterwards.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::tensor::{Cube, Dims};

/// Identifier of the random stream, recorded in every [`NoiseSpec`].
pub const RNG_ALGORITHM: &str = "ChaCha20Rng/rand_chacha-0.9/seed_from_u64";

/// Stripe offsets are uniform on `[-STRIPE_AMPLITUDE, STRIPE_AMPLITUDE]`.
pub const STRIPE_AMPLITUDE: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeadlineSpec {
    pub band_lo: usize,
    pub band_hi: usize,
    pub count_lo: usize,
    pub count_hi: usize,
    pub width_lo: usize,
    pub width_hi: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StripeSpec {
    pub band_lo: usize,
    pub band_hi: usize,
    pub count_lo: usize,
    pub count_hi: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Standard deviation of the additive Gaussian noise.
    pub gaussian_sigma: f64,
    /// Probability that an entry is replaced by 0 or 1.
    pub impulse_fraction: f64,
    #[serde(default)]
    pub deadline: Option<DeadlineSpec>,
    #[serde(default)]
    pub stripes: Option<StripeSpec>,
    pub seed: u64,
    #[serde(default = "default_rng_name")]
    pub rng: String,
}

fn default_rng_name() -> String {
    RNG_ALGORITHM.to_string()
}

fn check_window(name: &'static str, lo: usize, hi: usize, max: usize) -> Result<()> {
    if lo == 0 || lo > hi || hi > max {
        return Err(Error::param(
            name,
            format!("range {lo}..={hi} must be nonempty and lie within 1..={max}"),
        ));
    }
    Ok(())
}

fn check_range(name: &'static str, lo: usize, hi: usize) -> Result<()> {
    if lo > hi {
        return Err(Error::param(name, format!("range {lo}..={hi} is empty")));
    }
    Ok(())
}

impl DeadlineSpec {
    pub fn validate(&self, dims: Dims) -> Result<()> {
        check_window("deadline.band", self.band_lo, self.band_hi, dims.bands)?;
        check_range("deadline.count", self.count_lo, self.count_hi)?;
        check_window("deadline.width", self.width_lo, self.width_hi, dims.cols)
    }

    fn clamped(self, dims: Dims) -> Self {
        let (band_lo, band_hi) = clamp_window(self.band_lo, self.band_hi, dims.bands);
        let width_hi = self.width_hi.min(dims.cols);
        Self {
            band_lo,
            band_hi,
            width_lo: self.width_lo.min(width_hi),
            width_hi,
            ..self
        }
    }
}

impl StripeSpec {
    pub fn validate(&self, dims: Dims) -> Result<()> {
        check_window("stripes.band", self.band_lo, self.band_hi, dims.bands)?;
        check_range("stripes.count", self.count_lo, self.count_hi)?;
        if self.count_hi > dims.cols {
            return Err(Error::param(
                "stripes.count",
                format!("at most {} distinct columns exist, asked for up to {}", dims.cols, self.count_hi),
            ));
        }
        Ok(())
    }

    fn clamped(self, dims: Dims) -> Self {
        let (band_lo, band_hi) = clamp_window(self.band_lo, self.band_hi, dims.bands);
        let count_hi = self.count_hi.min(dims.cols);
        Self {
            band_lo,
            band_hi,
            count_lo: self.count_lo.min(count_hi),
            count_hi,
        }
    }
}

/// Pulls both ends of a 1-based window into `1..=k`.
fn clamp_window(lo: usize, hi: usize, k: usize) -> (usize, usize) {
    (lo.clamp(1, k), hi.clamp(1, k))
}

impl NoiseSpec {
    pub fn validate(&self, dims: Dims) -> Result<()> {
        if dims.is_empty() {
            return Err(Error::param("dims", "cube is empty"));
        }
        if !(self.gaussian_sigma >= 0.0) || !self.gaussian_sigma.is_finite() {
            return Err(Error::param(
                "gaussian_sigma",
                format!("must be finite and >= 0, got {}", self.gaussian_sigma),
            ));
        }
        if !(0.0..=1.0).contains(&self.impulse_fraction) {
            return Err(Error::param(
                "impulse_fraction",
                format!("must lie in [0, 1], got {}", self.impulse_fraction),
            ));
        }
        if let Some(d) = &self.deadline {
            d.validate(dims)?;
        }
        if let Some(s) = &self.stripes {
            s.validate(dims)?;
        }
        if self.rng != RNG_ALGORITHM {
            return Err(Error::param(
                "rng",
                format!("only `{RNG_ALGORITHM}` is available, got `{}`", self.rng),
            ));
        }
        Ok(())
    }

    /// Preset for corruption case 1 to 4 on a cube of the given size.
    ///
    /// Band windows are those of a 191-band scene and are clamped into
    /// `1..=K` for shorter cubes.
    pub fn case(case_id: u8, dims: Dims, seed: u64) -> Result<Self> {
        let deadline = DeadlineSpec {
            band_lo: 41,
            band_hi: 100,
            count_lo: 3,
            count_hi: 10,
            width_lo: 1,
            width_hi: 3,
        };
        let stripes = StripeSpec {
            band_lo: 101,
            band_hi: 190,
            count_lo: 20,
            count_hi: 40,
        };
        let (gaussian_sigma, impulse_fraction, deadline, stripes) = match case_id {
            1 => (0.2, 0.2, None, None),
            2 => (0.15, 0.0, Some(deadline), None),
            3 => (0.05, 0.1, Some(deadline), None),
            4 => (0.05, 0.1, Some(deadline), Some(stripes)),
            other => return Err(Error::param("case", format!("must be 1, 2, 3 or 4, got {other}"))),
        };
        if dims.is_empty() {
            return Err(Error::param("dims", "cube is empty"));
        }
        Ok(Self {
            gaussian_sigma,
            impulse_fraction,
            deadline: deadline.map(|d| d.clamped(dims)),
            stripes: stripes.map(|s| s.clamped(dims)),
            seed,
            rng: default_rng_name(),
        })
    }

    /// Applies every noise source in order with a fresh stream from `seed`.
    pub fn apply<T: Real>(&self, x: &Cube<T>) -> Result<Cube<T>> {
        self.validate(x.dims())?;
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        let mut out = add_gaussian(x, self.gaussian_sigma, &mut rng)?;
        out = add_impulse(&out, self.impulse_fraction, &mut rng)?;
        if let Some(d) = &self.deadline {
            out = add_deadlines(&out, d, &mut rng)?;
        }
        if let Some(s) = &self.stripes {
            out = add_stripes(&out, s, &mut rng)?;
        }
        Ok(out)
    }
}

/// `x + sigma * g` with `g` i.i.d. standard normal.
pub fn add_gaussian<T: Real, R: Rng + ?Sized>(x: &Cube<T>, sigma: f64, rng: &mut R) -> Result<Cube<T>> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::param("gaussian_sigma", format!("must be finite and >= 0, got {sigma}")));
    }
    let mut out = x.clone();
    if sigma == 0.0 {
        return Ok(out);
    }
    for v in out.as_mut_slice() {
        let g: f64 = rng.sample(StandardNormal);
        *v += T::lit(sigma * g);
    }
    Ok(out)
}

/// Replaces each entry with probability `p` by 0 or 1, equally likely.
pub fn add_impulse<T: Real, R: Rng + ?Sized>(x: &Cube<T>, p: f64, rng: &mut R) -> Result<Cube<T>> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::param("impulse_fraction", format!("must lie in [0, 1], got {p}")));
    }
    let mut out = x.clone();
    if p == 0.0 {
        return Ok(out);
    }
    for v in out.as_mut_slice() {
        if rng.random_bool(p) {
            *v = if rng.random_bool(0.5) { T::one() } else { T::zero() };
        }
    }
    Ok(out)
}

/// Zeroes runs of whole columns in every band of the window.
pub fn add_deadlines<T: Real, R: Rng + ?Sized>(
    x: &Cube<T>,
    spec: &DeadlineSpec,
    rng: &mut R,
) -> Result<Cube<T>> {
    let dims = x.dims();
    spec.validate(dims)?;
    let mut out = x.clone();
    let (rows, cols) = (dims.rows, dims.cols);
    for k in spec.band_lo - 1..spec.band_hi {
        let count = rng.random_range(spec.count_lo..=spec.count_hi);
        let band = out.band_mut(k);
        for _ in 0..count {
            let width = rng.random_range(spec.width_lo..=spec.width_hi);
            let start = rng.random_range(0..=cols - width);
            for i in 0..rows {
                band[i * cols + start..i * cols + start + width].fill(T::zero());
            }
        }
    }
    Ok(out)
}

/// Adds a constant offset to distinct whole columns in every band of the window.
pub fn add_stripes<T: Real, R: Rng + ?Sized>(x: &Cube<T>, spec: &StripeSpec, rng: &mut R) -> Result<Cube<T>> {
    let dims = x.dims();
    spec.validate(dims)?;
    let mut out = x.clone();
    let (rows, cols) = (dims.rows, dims.cols);
    for k in spec.band_lo - 1..spec.band_hi {
        let count = rng.random_range(spec.count_lo..=spec.count_hi);
        let chosen = index::sample(rng, cols, count);
        let band = out.band_mut(k);
        for j in chosen.iter() {
            let offset = T::lit(rng.random_range(-STRIPE_AMPLITUDE..=STRIPE_AMPLITUDE));
            for i in 0..rows {
                band[i * cols + j] += offset;
            }
        }
    }
    Ok(out)
}

/// Corrupts `x` with case `case_id` and returns the spec that was used.
pub fn apply_case<T: Real>(x: &Cube<T>, case_id: u8, seed: u64) -> Result<(Cube<T>, NoiseSpec)> {
    let spec = NoiseSpec::case(case_id, x.dims(), seed)?;
    let noisy = spec.apply(x)?;
    Ok((noisy, spec))
}
