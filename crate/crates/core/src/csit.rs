//! Partial channel knowledge at the transmitter: the worst-channel lower
//! bound, the equivalent-covariance upper bound, and the Monte-Carlo fixed
//! point for per-eigenmode powers.

use nalgebra::Cholesky;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::channel::{CsitModel, MmWaveLink};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::linkmodel::{LinkGains, SystemParams};
use crate::sumrate::{solve_gains, SnrThresholds, SolveMode, SolveReport};

pub const FIXED_POINT_MAX_ITER: usize = 500;
pub const DEFAULT_MC_SEED: u64 = 0x5eed;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CovarianceMode {
    /// `P / n_t * I`.
    Uniform,
    /// `P q q^H`.
    UnitRank,
    /// `V diag(p) V^H` in the eigenbasis `V` of the equivalent covariance.
    EigenPowers,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sub6Covariance {
    pub mode: CovarianceMode,
    pub total_power: f64,
    /// Unit direction for [`CovarianceMode::UnitRank`].
    pub q: Option<Vec<Complex64>>,
    /// Per-eigenmode powers for [`CovarianceMode::EigenPowers`].
    pub antenna_powers: Option<Vec<f64>>,
    n_t: usize,
}

impl Sub6Covariance {
    pub fn uniform(n_t: usize, total_power: f64) -> Result<Self> {
        check_power(total_power)?;
        if n_t == 0 {
            return Err(Error::Domain("n_t must be at least 1".into()));
        }
        Ok(Self { mode: CovarianceMode::Uniform, total_power, q: None, antenna_powers: None, n_t })
    }

    pub fn unit_rank(q: Vec<Complex64>, total_power: f64) -> Result<Self> {
        check_power(total_power)?;
        let norm = q.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if q.is_empty() || (norm - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!("q must be a unit vector (norm {norm})")));
        }
        let n_t = q.len();
        Ok(Self { mode: CovarianceMode::UnitRank, total_power, q: Some(q), antenna_powers: None, n_t })
    }

    pub fn eigen_powers(powers: Vec<f64>) -> Result<Self> {
        if powers.is_empty() || powers.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
            return Err(Error::Domain("eigenmode powers must be finite and >= 0".into()));
        }
        let total_power = powers.iter().sum();
        let n_t = powers.len();
        Ok(Self { mode: CovarianceMode::EigenPowers, total_power, q: None, antenna_powers: Some(powers), n_t })
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    /// The covariance matrix; the eigen-power mode needs the model for its
    /// basis.
    pub fn matrix(&self, model: &CsitModel) -> CMatrix {
        let n = self.n_t;
        match self.mode {
            CovarianceMode::Uniform => CMatrix::identity(n, n) * Complex64::new(self.total_power / n as f64, 0.0),
            CovarianceMode::UnitRank => {
                let q = self.q.as_ref().expect("unit-rank covariance has q");
                CMatrix::from_fn(n, n, |r, c| q[r] * q[c].conj() * self.total_power)
            }
            CovarianceMode::EigenPowers => {
                let p = self.antenna_powers.as_ref().expect("eigen-power covariance has powers");
                let (_, basis) = equivalent_covariance_eigen(model);
                let d = CMatrix::from_fn(n, n, |r, c| if r == c { Complex64::new(p[r], 0.0) } else { Complex64::new(0.0, 0.0) });
                &basis * d * basis.adjoint()
            }
        }
    }
}

fn check_power(p: f64) -> Result<()> {
    if !(p >= 0.0) || !p.is_finite() {
        return Err(Error::Domain(format!("total power must be finite and >= 0, got {p}")));
    }
    Ok(())
}

fn check_dims(model: &CsitModel, cov: &Sub6Covariance) -> Result<()> {
    if model.n_t() != cov.n_t() {
        return Err(Error::Domain(format!(
            "covariance is {0}x{0} but the model has {1} transmit antennas",
            cov.n_t(),
            model.n_t()
        )));
    }
    Ok(())
}

/// `w ln det(I + H K H^H / w)`, zero at `w = 0`.
pub fn rate_with_covariance(h: &CMatrix, k: &CMatrix, w: f64) -> f64 {
    if w <= 0.0 {
        return 0.0;
    }
    let m = h * k * h.adjoint();
    let (eigs, _) = linalg::hermitian_eigen(&m);
    w * eigs.iter().map(|e| (e.max(0.0) / w).ln_1p()).sum::<f64>()
}

/// Eigenvalues (descending) and eigenvectors of `lambda u u^H + sigma_e2 I`.
/// The eigenvectors are `u` followed by an orthonormal completion.
pub fn equivalent_covariance_eigen(model: &CsitModel) -> (Vec<f64>, CMatrix) {
    let n = model.n_t();
    let mut sigma = vec![model.sigma_e2(); n];
    sigma[0] += model.los_gain();
    (sigma, linalg::orthonormal_completion(model.u()))
}

/// Rate on the worst channel of the set: `w ln(1 + s^2 u^H K u / w)` with
/// `s = (sqrt(lambda) - epsilon)^+`.
///
/// ```
/// use bandalloc::channel::CsitModel;
/// use bandalloc::csit::{lower_bound_rate, worst_case_covariance};
///
/// let model = CsitModel::with_random_directions(4, 2, 4.0, 1.0, 0.1, 7).unwrap();
/// let cov = worst_case_covariance(&model, 1.0);
/// let r = lower_bound_rate(&model, &cov, 1.0).unwrap();
/// assert!((r - 2f64.ln()).abs() < 1e-12);
/// ```
pub fn lower_bound_rate(model: &CsitModel, cov: &Sub6Covariance, w: f64) -> Result<f64> {
    check_dims(model, cov)?;
    if w <= 0.0 {
        return Ok(0.0);
    }
    let k = cov.matrix(model);
    let u = CMatrix::from_column_slice(model.n_t(), 1, model.u());
    let uku = (u.adjoint() * k * &u)[(0, 0)].re.max(0.0);
    let s = model.worst_case_amplitude();
    Ok(w * (s * s * uku / w).ln_1p())
}

/// The unit-rank covariance along `u`.
pub fn worst_case_covariance(model: &CsitModel, total_power: f64) -> Sub6Covariance {
    Sub6Covariance::unit_rank(model.u().to_vec(), total_power.max(0.0)).expect("u is a unit vector")
}

/// `w ln det(I + K Sigma / w)` with `Sigma = H_mean^H H_mean + sigma_e2 I`,
/// from the eigenvalues of `K^(1/2) Sigma K^(1/2)`.
pub fn upper_bound_rate(model: &CsitModel, cov: &Sub6Covariance, w: f64) -> Result<f64> {
    check_dims(model, cov)?;
    if w <= 0.0 {
        return Ok(0.0);
    }
    let n = model.n_t();
    let hbar = model.mean_channel();
    let sigma = hbar.adjoint() * &hbar + CMatrix::identity(n, n) * Complex64::new(model.sigma_e2(), 0.0);
    let root = linalg::psd_sqrt(&cov.matrix(model));
    let (eigs, _) = linalg::hermitian_eigen(&(&root * sigma * &root));
    Ok(w * eigs.iter().map(|e| (e.max(0.0) / w).ln_1p()).sum::<f64>())
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointState {
    /// Per-eigenmode powers.
    pub p: Vec<f64>,
    pub e_values: Vec<f64>,
    pub mc_samples: usize,
    /// Largest change of any `p_i` in the last iteration, relative to the
    /// total power.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `sum_i p_i` after each iteration.
    pub power_sums: Vec<f64>,
}

/// Common random numbers: `n_r x n_t` matrices with i.i.d. unit-variance
/// complex Gaussian entries. Each base draw enters with all `n_t` cyclic
/// shifts of its columns, so the sample average is invariant under a cyclic
/// relabelling of the modes and a flat `sigma` gets exactly uniform powers.
/// At least `count` matrices are returned, rounded up to a multiple of `n_t`.
fn draw_samples(n_r: usize, n_t: usize, count: usize, seed: u64) -> Vec<CMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let base = count.div_ceil(n_t.max(1));
    let mut out = Vec::with_capacity(base * n_t);
    for _ in 0..base {
        let z = CMatrix::from_fn(n_r, n_t, |_, _| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            Complex64::new(re * s, im * s)
        });
        for shift in 0..n_t {
            out.push(CMatrix::from_fn(n_r, n_t, |r, c| z[(r, (c + shift) % n_t)]));
        }
    }
    out
}

/// `E_i(p) = E[sigma_i z_i^H A^-1 z_i]` with `A = I + sum_j p_j sigma_j z_j z_j^H`.
///
/// This equals the expectation of
/// `sigma_i t_i / (1 + p_i sigma_i t_i)`, `t_i = z_i^H A_i^-1 z_i`, where
/// `A_i` leaves out term `i` (Sherman-Morrison), so one factorisation per
/// sample serves every `i`.
fn e_values(p: &[f64], sigma: &[f64], samples: &[CMatrix]) -> Vec<f64> {
    let n_t = p.len();
    let per_sample: Vec<Vec<f64>> = samples
        .par_iter()
        .map(|z| {
            let n_r = z.nrows();
            let weights = CMatrix::from_fn(n_t, n_t, |r, c| {
                if r == c {
                    Complex64::new(p[r] * sigma[r], 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            });
            let a = CMatrix::identity(n_r, n_r) + z * weights * z.adjoint();
            let chol = Cholesky::new(a).expect("I + PSD is positive definite");
            let solved = chol.solve(z);
            (0..n_t)
                .map(|i| {
                    let t: Complex64 = z.column(i).iter().zip(solved.column(i).iter()).map(|(x, y)| x.conj() * y).sum();
                    sigma[i] * t.re
                })
                .collect()
        })
        .collect();
    let mut out = vec![0.0; n_t];
    for row in &per_sample {
        for (o, v) in out.iter_mut().zip(row) {
            *o += v;
        }
    }
    out.iter_mut().for_each(|o| *o /= samples.len() as f64);
    out
}

/// Monte-Carlo estimate of `E ln det(I + Z diag(p sigma) Z^H)` on fixed
/// samples.
pub fn expected_log_det(p: &[f64], sigma: &[f64], n_r: usize, mc_samples: usize, seed: u64) -> f64 {
    let samples = draw_samples(n_r, p.len(), mc_samples, seed);
    let vals: Vec<f64> = samples
        .par_iter()
        .map(|z| {
            let d = CMatrix::from_fn(p.len(), p.len(), |r, c| {
                if r == c {
                    Complex64::new(p[r] * sigma[r], 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            });
            let m = z * d * z.adjoint();
            let (eigs, _) = linalg::hermitian_eigen(&m);
            eigs.iter().map(|e| e.max(0.0).ln_1p()).sum::<f64>()
        })
        .collect();
    vals.iter().sum::<f64>() / vals.len() as f64
}

/// Fixed-point powers with the default sample seed.
pub fn fixed_point_powers(model: &CsitModel, total_power: f64, mc_samples: usize, tol: f64) -> Result<FixedPointState> {
    fixed_point_powers_seeded(model, total_power, mc_samples, tol, DEFAULT_MC_SEED)
}

/// Iterates `p_i <- P p_i E_i(p) / sum_j p_j E_j(p)` from uniform powers.
/// The eigenvalues are those of the equivalent covariance.
pub fn fixed_point_powers_seeded(
    model: &CsitModel,
    total_power: f64,
    mc_samples: usize,
    tol: f64,
    seed: u64,
) -> Result<FixedPointState> {
    let (sigma, _) = equivalent_covariance_eigen(model);
    fixed_point_on_spectrum(&sigma, model.n_r(), total_power, mc_samples, tol, seed)
}

/// The fixed point for an explicit spectrum `sigma`.
pub fn fixed_point_on_spectrum(
    sigma: &[f64],
    n_r: usize,
    total_power: f64,
    mc_samples: usize,
    tol: f64,
    seed: u64,
) -> Result<FixedPointState> {
    if mc_samples < 1000 {
        return Err(Error::InvalidParams(format!("need at least 1000 Monte-Carlo samples, got {mc_samples}")));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParams(format!("tolerance must be > 0, got {tol}")));
    }
    check_power(total_power)?;
    let n_t = sigma.len();
    let mut p = vec![total_power / n_t as f64; n_t];
    let mut state = FixedPointState {
        p: p.clone(),
        e_values: vec![0.0; n_t],
        mc_samples,
        residual: 0.0,
        iterations: 0,
        converged: n_t == 1 || total_power == 0.0,
        power_sums: vec![p.iter().sum()],
    };
    if state.converged {
        return Ok(state);
    }

    let samples = draw_samples(n_r, n_t, mc_samples, seed);
    state.mc_samples = samples.len();
    for it in 1..=FIXED_POINT_MAX_ITER {
        let e = e_values(&p, sigma, &samples);
        let weighted: Vec<f64> = p.iter().zip(&e).map(|(pi, ei)| pi * ei).collect();
        let norm: f64 = weighted.iter().sum();
        if !(norm > 0.0) {
            break;
        }
        let mut next: Vec<f64> = weighted.iter().map(|x| total_power * x / norm).collect();
        // fold the rounding error back into the largest entry so the sum is exact
        let drift = total_power - next.iter().sum::<f64>();
        let k = (0..n_t).max_by(|&a, &b| next[a].total_cmp(&next[b])).unwrap_or(0);
        next[k] += drift;

        let residual = p.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / total_power;
        p = next;
        state.p = p.clone();
        state.e_values = e;
        state.residual = residual;
        state.iterations = it;
        state.power_sums.push(p.iter().sum());
        if residual <= tol {
            state.converged = true;
            break;
        }
    }
    Ok(state)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsitBound {
    Lower,
    Upper,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CsitOptions {
    pub mc_samples: usize,
    pub tol: f64,
    pub seed: u64,
    pub mode: SolveMode,
}

impl Default for CsitOptions {
    fn default() -> Self {
        Self { mc_samples: 2000, tol: 1e-6, seed: DEFAULT_MC_SEED, mode: SolveMode::Auto }
    }
}

/// Sum-rate solve with the sub-6 rate replaced by one of the bounds.
pub fn solve_with_csit(model: &CsitModel, link: &MmWaveLink, params: &SystemParams, bound: CsitBound) -> Result<SolveReport> {
    solve_with_csit_opts(model, link, params, bound, &CsitOptions::default())
}

pub fn solve_with_csit_opts(
    model: &CsitModel,
    link: &MmWaveLink,
    params: &SystemParams,
    bound: CsitBound,
    opts: &CsitOptions,
) -> Result<SolveReport> {
    if model.n_t() != params.n_t || model.n_r() != params.n_r {
        return Err(Error::InvalidParams(format!(
            "model is {}x{} but params say n_r = {}, n_t = {}",
            model.n_r(),
            model.n_t(),
            params.n_r,
            params.n_t
        )));
    }
    let th = SnrThresholds::default();
    match bound {
        CsitBound::Lower => {
            let s = model.worst_case_amplitude();
            let gains = LinkGains { sub6: vec![s * s], mmwave: link.gain() };
            Ok(solve_gains(&gains, params, opts.mode, &th))
        }
        CsitBound::Upper => {
            let (sigma, _) = equivalent_covariance_eigen(model);
            let n = sigma.len() as f64;
            let uniform = LinkGains { sub6: sigma.iter().map(|s| s / n).collect(), mmwave: link.gain() };
            let first = solve_gains(&uniform, params, opts.mode, &th);
            // the fixed point depends on the operating SNR per hertz
            let a = first.allocation;
            let snr = if a.w_sub6 > 0.0 && a.p_sub6 > 0.0 {
                a.p_sub6 / a.w_sub6
            } else {
                params.p_max / params.w_sub6_max
            };
            let fp = fixed_point_on_spectrum(&sigma, model.n_r(), snr, opts.mc_samples, opts.tol, opts.seed)?;
            let gains = LinkGains {
                sub6: sigma.iter().zip(&fp.p).map(|(s, p)| s * p / snr).collect(),
                mmwave: link.gain(),
            };
            let mut report = solve_gains(&gains, params, opts.mode, &th);
            if !fp.converged {
                report.warnings.push(format!(
                    "fixed-point powers did not converge in {FIXED_POINT_MAX_ITER} iterations (residual {:.2e})",
                    fp.residual
                ));
            }
            Ok(report)
        }
    }
}
