//! ADMM solver for
//!
//! ```text
//! min  lambda_tv ||L||_1 + lambda_s ||S||_1 + lambda_n ||N||_F^2 + lambda_g sum_r ||G_r||_*
//! s.t. Y = X + S + N,  Z = X,  L = D(Z),  X = G x_3 C,  C^T C = I
//! ```
//!
//! Each outer iteration updates, in this order: `G`, `C`, `X`, `Z`, `L`, `S`,
//! `N`, then the four multipliers.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::diff::{diff_adjoint, diff_forward, solve_z_system, DiffField, TvKernelSpectrum};
use crate::error::{Error, Result};
use crate::factor::{init_factors, update_c, update_g, MvtfFactors};
use crate::prox::{nuclear_norm, soft_threshold};
use crate::scalar::Real;
use crate::tensor::{Cube, Dims};

/// Regulariser weights, penalties and stopping rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverParams {
    pub lambda_tv: f64,
    pub lambda_s: f64,
    pub lambda_n: f64,
    pub lambda_g: f64,
    /// Number of endmembers `R`.
    pub rank: usize,
    /// Penalties `beta1..beta4` for the fidelity, `Z = X`, `L = D(Z)` and
    /// factorization constraints.
    pub beta: [f64; 4],
    /// Stop once `||X_prev - X||_F^2 / ||X||_F^2 <= tol`.
    pub tol: f64,
    pub max_iter: usize,
    /// Every beta is multiplied by `rho` after each iteration; 1 keeps them fixed.
    pub rho: f64,
}

impl SolverParams {
    /// Weights tuned for simulated mixed-noise experiments.
    pub fn simulated() -> Self {
        Self {
            lambda_tv: 2e-4,
            lambda_s: 0.02,
            lambda_n: 0.1,
            lambda_g: 0.1,
            rank: 5,
            beta: [0.1; 4],
            tol: 1e-4,
            max_iter: 200,
            rho: 1.0,
        }
    }

    /// Weights for real sensor data dominated by stripes and dead lines.
    pub fn real() -> Self {
        Self {
            lambda_tv: 1e-5,
            lambda_s: 0.013,
            lambda_n: 0.1,
            lambda_g: 0.1,
            rank: 2,
            ..Self::simulated()
        }
    }

    pub fn validate(&self, dims: Dims) -> Result<()> {
        let nonneg = [
            ("lambda_tv", self.lambda_tv),
            ("lambda_s", self.lambda_s),
            ("lambda_n", self.lambda_n),
            ("lambda_g", self.lambda_g),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::param(name, format!("must be finite and >= 0, got {v}")));
            }
        }
        for (b, name) in self.beta.iter().zip(["beta1", "beta2", "beta3", "beta4"]) {
            if !(*b > 0.0) || !b.is_finite() {
                return Err(Error::param(name, format!("must be finite and > 0, got {b}")));
            }
        }
        if self.rank == 0 || self.rank > dims.bands {
            return Err(Error::param(
                "rank",
                format!("must lie in 1..={} (the band count), got {}", dims.bands, self.rank),
            ));
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::param("tol", format!("must lie in (0, 1), got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::param("max_iter", "must be at least 1"));
        }
        if !(self.rho >= 1.0) || !self.rho.is_finite() {
            return Err(Error::param("rho", format!("must be finite and >= 1, got {}", self.rho)));
        }
        Ok(())
    }
}

impl Default for SolverParams {
    fn default() -> Self {
        Self::simulated()
    }
}

/// Every primal and dual variable of the iteration.
#[derive(Debug, Clone)]
pub struct SolverState<T: Real> {
    pub x: Cube<T>,
    pub z: Cube<T>,
    pub s: Cube<T>,
    pub n: Cube<T>,
    pub l: DiffField<T>,
    pub factors: MvtfFactors<T>,
    pub lambda1: Cube<T>,
    pub lambda2: Cube<T>,
    pub lambda3: DiffField<T>,
    pub lambda4: Cube<T>,
    /// Current penalties; they only move when `rho > 1`.
    pub beta: [T; 4],
    pub iter: usize,
}

impl<T: Real> SolverState<T> {
    /// `X = Y`, `Z = S = N = L = 0`, zero multipliers, SVD-initialised factors.
    pub fn init(y: &Cube<T>, params: &SolverParams) -> Result<Self> {
        let dims = y.dims();
        Ok(Self {
            x: y.clone(),
            z: Cube::zeros(dims),
            s: Cube::zeros(dims),
            n: Cube::zeros(dims),
            l: DiffField::zeros(dims),
            factors: init_factors(y, params.rank)?,
            lambda1: Cube::zeros(dims),
            lambda2: Cube::zeros(dims),
            lambda3: DiffField::zeros(dims),
            lambda4: Cube::zeros(dims),
            beta: params.beta.map(T::lit),
            iter: 0,
        })
    }

    /// Norms of the four constraint violations at the current iterate.
    pub fn residuals(&self, y: &Cube<T>) -> Result<Residuals> {
        let fidelity = self.fidelity_gap(y)?.frob_norm();
        let consensus = self.z.sub(&self.x)?.frob_norm();
        let tv_split = self.l.sub(&diff_forward(&self.z))?.frob_norm();
        let factorization = self.x.sub(&self.factors.compose()?)?.frob_norm();
        Ok(Residuals {
            fidelity: fidelity.to_f64_lossy(),
            consensus: consensus.to_f64_lossy(),
            tv_split: tv_split.to_f64_lossy(),
            factorization: factorization.to_f64_lossy(),
        })
    }

    fn fidelity_gap(&self, y: &Cube<T>) -> Result<Cube<T>> {
        let mut out = y.sub(&self.x)?;
        for ((o, &s), &n) in out
            .as_mut_slice()
            .iter_mut()
            .zip(self.s.as_slice())
            .zip(self.n.as_slice())
        {
            *o = *o - s - n;
        }
        Ok(out)
    }
}

/// Closed-form `X` update:
/// `(b1 (Y - S - N) + L1 + b2 Z + L2 + b4 (G x_3 C) - L4) / (b1 + b2 + b4)`.
pub fn update_x<T: Real>(state: &SolverState<T>, y: &Cube<T>) -> Result<Cube<T>> {
    let [b1, b2, _, b4] = state.beta;
    let low_rank = state.factors.compose()?;
    let dims = y.dims();
    for c in [&state.s, &state.n, &state.z, &state.lambda1, &state.lambda2, &state.lambda4, &low_rank] {
        y.check_same("update_x", c)?;
    }
    let denom = b1 + b2 + b4;
    let data = (0..dims.len())
        .map(|p| {
            let num = b1 * (y.as_slice()[p] - state.s.as_slice()[p] - state.n.as_slice()[p])
                + state.lambda1.as_slice()[p]
                + b2 * state.z.as_slice()[p]
                + state.lambda2.as_slice()[p]
                + b4 * low_rank.as_slice()[p]
                - state.lambda4.as_slice()[p];
            num / denom
        })
        .collect();
    Cube::new(dims, data)
}

/// `Z` update: solve `(b2 I + b3 D^T D) Z = b2 X - L2 + D^T(b3 L + L3)`.
pub fn update_z<T: Real>(state: &SolverState<T>, spec: &TvKernelSpectrum<T>) -> Result<Cube<T>> {
    let [_, b2, b3, _] = state.beta;
    let field = state.l.zip_map(&state.lambda3, |l, m| b3 * l + m)?;
    let back = diff_adjoint(&field)?;
    let mut rhs = state.x.zip_map(&state.lambda2, |x, l| b2 * x - l)?;
    for (r, &d) in rhs.as_mut_slice().iter_mut().zip(back.as_slice()) {
        *r += d;
    }
    solve_z_system(&rhs, spec)
}

/// `L = Thr_{lambda_tv / b3}(D(Z) - L3 / b3)`.
pub fn update_l<T: Real>(state: &SolverState<T>, lambda_tv: f64) -> Result<DiffField<T>> {
    let b3 = state.beta[2];
    let shifted = diff_forward(&state.z).zip_map(&state.lambda3, |d, m| d - m / b3)?;
    soft_threshold(&shifted, T::lit(lambda_tv) / b3)
}

/// `S = Thr_{lambda_s / b1}(Y - X - N + L1 / b1)`.
pub fn update_s<T: Real>(state: &SolverState<T>, y: &Cube<T>, lambda_s: f64) -> Result<Cube<T>> {
    let b1 = state.beta[0];
    let mut arg = y.sub(&state.x)?;
    for ((a, &n), &l) in arg
        .as_mut_slice()
        .iter_mut()
        .zip(state.n.as_slice())
        .zip(state.lambda1.as_slice())
    {
        *a = *a - n + l / b1;
    }
    soft_threshold(&arg, T::lit(lambda_s) / b1)
}

/// `N = (b1 (Y - X - S) + L1) / (b1 + 2 lambda_n)`.
pub fn update_n<T: Real>(state: &SolverState<T>, y: &Cube<T>, lambda_n: f64) -> Result<Cube<T>> {
    let b1 = state.beta[0];
    let denom = b1 + T::lit(2.0 * lambda_n);
    let mut out = y.sub(&state.x)?;
    for ((o, &s), &l) in out
        .as_mut_slice()
        .iter_mut()
        .zip(state.s.as_slice())
        .zip(state.lambda1.as_slice())
    {
        *o = (b1 * (*o - s) + l) / denom;
    }
    Ok(out)
}

/// Dual variables after one ascent step.
#[derive(Debug, Clone, PartialEq)]
pub struct Multipliers<T> {
    pub lambda1: Cube<T>,
    pub lambda2: Cube<T>,
    pub lambda3: DiffField<T>,
    pub lambda4: Cube<T>,
}

/// `L1 += b1 (Y - X - S - N)`, `L2 += b2 (Z - X)`, `L3 += b3 (L - D(Z))`,
/// `L4 += b4 (X - G x_3 C)`.
pub fn update_multipliers<T: Real>(state: &SolverState<T>, y: &Cube<T>) -> Result<Multipliers<T>> {
    let [b1, b2, b3, b4] = state.beta;
    let gap = state.fidelity_gap(y)?;
    let lambda1 = state.lambda1.zip_map(&gap, |l, r| l + b1 * r)?;
    let consensus = state.z.sub(&state.x)?;
    let lambda2 = state.lambda2.zip_map(&consensus, |l, r| l + b2 * r)?;
    let split = state.l.sub(&diff_forward(&state.z))?;
    let lambda3 = state.lambda3.zip_map(&split, |l, r| l + b3 * r)?;
    let fac = state.x.sub(&state.factors.compose()?)?;
    let lambda4 = state.lambda4.zip_map(&fac, |l, r| l + b4 * r)?;
    Ok(Multipliers {
        lambda1,
        lambda2,
        lambda3,
        lambda4,
    })
}

/// `||prev - new||_F^2 / ||new||_F^2`; zero when both vanish, infinite when
/// only `new` does.
pub fn relative_change<T: Real>(prev: &Cube<T>, new: &Cube<T>) -> Result<f64> {
    let num = prev.sub(new)?.frob_norm_sq().to_f64_lossy();
    let den = new.frob_norm_sq().to_f64_lossy();
    Ok(if den > 0.0 {
        num / den
    } else if num == 0.0 {
        0.0
    } else {
        f64::INFINITY
    })
}

pub fn convergence_check<T: Real>(prev: &Cube<T>, new: &Cube<T>, tol: f64) -> Result<bool> {
    Ok(relative_change(prev, new)? <= tol)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    /// `||Y - X - S - N||_F`
    pub fidelity: f64,
    /// `||Z - X||_F`
    pub consensus: f64,
    /// `||L - D(Z)||_F`
    pub tv_split: f64,
    /// `||X - G x_3 C||_F`
    pub factorization: f64,
}

impl Residuals {
    pub fn max(&self) -> f64 {
        self.fidelity
            .max(self.consensus)
            .max(self.tv_split)
            .max(self.factorization)
    }
}

/// Unweighted regulariser values at the returned iterate and their weighted sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveTerms {
    pub tv: f64,
    pub sparse_l1: f64,
    pub gaussian_fro_sq: f64,
    pub nuclear: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub converged: bool,
    pub relative_change: Vec<f64>,
    pub residuals: Vec<Residuals>,
    pub objective: ObjectiveTerms,
    /// Iterations whose endmember target had rank below `R`.
    pub degenerate_endmember_updates: Vec<usize>,
    /// Number of times the largest constraint residual went up during the
    /// second half of the run. ADMM on this nonconvex model has no
    /// monotonicity guarantee, so this is reported rather than enforced.
    pub late_residual_increases: usize,
    pub wall_time_secs: f64,
    pub params: SolverParams,
}

impl SolveReport {
    pub fn max_residuals(&self) -> Vec<f64> {
        self.residuals.iter().map(Residuals::max).collect()
    }

    pub fn final_max_residual(&self) -> f64 {
        self.residuals.last().map_or(0.0, Residuals::max)
    }
}

#[derive(Debug, Clone)]
pub struct Solution<T: Real> {
    /// Clean image estimate.
    pub x: Cube<T>,
    /// Sparse noise (impulses, dead lines, stripes).
    pub s: Cube<T>,
    /// Dense Gaussian noise.
    pub n: Cube<T>,
    pub factors: MvtfFactors<T>,
    pub report: SolveReport,
}

fn guard_cube<T: Real>(c: &Cube<T>, step: &'static str, iteration: usize) -> Result<()> {
    if c.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite { step, iteration })
    }
}

fn guard_field<T: Real>(f: &DiffField<T>, step: &'static str, iteration: usize) -> Result<()> {
    if f.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite { step, iteration })
    }
}

/// Separates `y` into a clean low-rank, piecewise-smooth image plus sparse
/// and Gaussian noise.
pub fn solve<T: Real>(y: &Cube<T>, params: &SolverParams) -> Result<Solution<T>> {
    let started = Instant::now();
    params.validate(y.dims())?;
    if !y.is_finite() {
        return Err(Error::NonFinite {
            step: "input",
            iteration: 0,
        });
    }

    let mut state = SolverState::init(y, params)?;
    let mut spec = TvKernelSpectrum::new(y.dims(), state.beta[1], state.beta[2])?;
    let mut relative = Vec::new();
    let mut residuals = Vec::new();
    let mut degenerate = Vec::new();
    let mut converged = false;

    for iteration in 1..=params.max_iter {
        state.iter = iteration;
        let x_prev = state.x.clone();

        let g = update_g(
            &state.x,
            &state.factors.c,
            T::lit(params.lambda_g),
            state.beta[3],
            &state.lambda4,
        )?;
        guard_cube(&g, "G", iteration)?;
        state.factors.g = g;

        let endmembers = update_c(&state.factors.g, &state.x, &state.lambda4, state.beta[3])?;
        if !endmembers.c.is_finite() {
            return Err(Error::NonFinite { step: "C", iteration });
        }
        if endmembers.is_degenerate() {
            degenerate.push(iteration);
        }
        state.factors.c = endmembers.c;

        state.x = update_x(&state, y)?;
        guard_cube(&state.x, "X", iteration)?;

        state.z = update_z(&state, &spec)?;
        guard_cube(&state.z, "Z", iteration)?;

        state.l = update_l(&state, params.lambda_tv)?;
        guard_field(&state.l, "L", iteration)?;

        state.s = update_s(&state, y, params.lambda_s)?;
        guard_cube(&state.s, "S", iteration)?;

        state.n = update_n(&state, y, params.lambda_n)?;
        guard_cube(&state.n, "N", iteration)?;

        let m = update_multipliers(&state, y)?;
        for (c, step) in [(&m.lambda1, "Lambda1"), (&m.lambda2, "Lambda2"), (&m.lambda4, "Lambda4")] {
            guard_cube(c, step, iteration)?;
        }
        guard_field(&m.lambda3, "Lambda3", iteration)?;
        state.lambda1 = m.lambda1;
        state.lambda2 = m.lambda2;
        state.lambda3 = m.lambda3;
        state.lambda4 = m.lambda4;

        residuals.push(state.residuals(y)?);
        let change = relative_change(&x_prev, &state.x)?;
        relative.push(change);

        if change <= params.tol {
            converged = true;
            break;
        }
        if params.rho > 1.0 {
            let rho = T::lit(params.rho);
            state.beta = state.beta.map(|b| b * rho);
            spec = TvKernelSpectrum::new(y.dims(), state.beta[1], state.beta[2])?;
        }
    }

    let objective = objective_terms(&state, params)?;
    let late_residual_increases = count_late_increases(&residuals);
    let report = SolveReport {
        iterations: relative.len(),
        converged,
        relative_change: relative,
        residuals,
        objective,
        degenerate_endmember_updates: degenerate,
        late_residual_increases,
        wall_time_secs: started.elapsed().as_secs_f64(),
        params: params.clone(),
    };
    Ok(Solution {
        x: state.x,
        s: state.s,
        n: state.n,
        factors: state.factors,
        report,
    })
}

fn objective_terms<T: Real>(state: &SolverState<T>, params: &SolverParams) -> Result<ObjectiveTerms> {
    let tv = diff_forward(&state.x).l1_norm().to_f64_lossy();
    let sparse_l1 = state.s.l1_norm().to_f64_lossy();
    let gaussian_fro_sq = state.n.frob_norm_sq().to_f64_lossy();
    let mut nuclear = 0.0;
    for r in 0..state.factors.g.dims().bands {
        nuclear += nuclear_norm(&state.factors.g.band_mat(r))?.to_f64_lossy();
    }
    let total = params.lambda_tv * tv
        + params.lambda_s * sparse_l1
        + params.lambda_n * gaussian_fro_sq
        + params.lambda_g * nuclear;
    Ok(ObjectiveTerms {
        tv,
        sparse_l1,
        gaussian_fro_sq,
        nuclear,
        total,
    })
}

fn count_late_increases(residuals: &[Residuals]) -> usize {
    let maxima: Vec<f64> = residuals.iter().map(Residuals::max).collect();
    let start = maxima.len() / 2;
    maxima[start..]
        .windows(2)
        .filter(|w| w[1] > w[0])
        .count()
}
