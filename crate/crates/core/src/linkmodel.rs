//! Rates, consumed power, feasibility and energy efficiency of an allocation.
//!
//! Noise is normalised to unit spectral density, so a gain `g` means an SNR
//! of `p g / w` for power `p` spread over bandwidth `w`.

use crate::channel::{MmWaveLink, Sub6Channel};
use crate::error::{Error, Result};

/// Relative slack allowed on the budget and bandwidth caps when deciding
/// feasibility. Solvers build allocations by subtraction, which can overshoot
/// the budget by a few ulps.
pub const FEASIBILITY_RTOL: f64 = 1e-12;

/// Budget, component cost and bandwidth caps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    /// Total budget for transmit power plus component power, watts.
    pub p_max: f64,
    /// Converter power per hertz of sampled bandwidth, watts per hertz.
    pub adc_a: f64,
    pub n_t: usize,
    pub n_r: usize,
    pub w_sub6_max: f64,
    pub w_m_max: f64,
}

impl SystemParams {
    pub fn new(p_max: f64, adc_a: f64, n_t: usize, n_r: usize, w_sub6_max: f64, w_m_max: f64) -> Result<Self> {
        let p = Self { p_max, adc_a, n_t, n_r, w_sub6_max, w_m_max };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("p_max", self.p_max),
            ("adc_a", self.adc_a),
            ("w_sub6_max", self.w_sub6_max),
            ("w_m_max", self.w_m_max),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParams(format!("{name} must be finite and > 0, got {v}")));
            }
        }
        if self.n_t == 0 || self.n_r == 0 {
            return Err(Error::InvalidParams("antenna counts must be at least 1".into()));
        }
        Ok(())
    }

    /// Component cost per hertz of sub-6 bandwidth: one converter per
    /// receive antenna.
    pub fn sub6_cost(&self) -> f64 {
        self.n_r as f64 * self.adc_a
    }

    /// Component cost per hertz of mmWave bandwidth: a single RF chain.
    pub fn mmwave_cost(&self) -> f64 {
        self.adc_a
    }
}

impl Default for SystemParams {
    /// 64 x 16 antennas, 1 MHz / 1 GHz caps, `a = 1e-9`, 1 W.
    fn default() -> Self {
        Self {
            p_max: 1.0,
            adc_a: 1e-9,
            n_t: 64,
            n_r: 16,
            w_sub6_max: 1e6,
            w_m_max: 1e9,
        }
    }
}

/// The four decision variables. An interface is active iff its bandwidth is
/// positive.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Allocation {
    pub w_sub6: f64,
    pub w_m: f64,
    pub p_sub6: f64,
    pub p_m: f64,
}

impl Allocation {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn sub6_active(&self) -> bool {
        self.w_sub6 > 0.0
    }

    pub fn mmwave_active(&self) -> bool {
        self.w_m > 0.0
    }

    pub fn active_count(&self) -> usize {
        self.sub6_active() as usize + self.mmwave_active() as usize
    }

    pub fn transmit_power(&self) -> f64 {
        self.p_sub6 + self.p_m
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalReport {
    pub rate_sub6: f64,
    pub rate_m: f64,
    pub rate_total: f64,
    pub consumed_power: f64,
    /// Nats per joule; zero for the all-zero allocation.
    pub ee: f64,
    pub feasible: bool,
}

/// Per-unit-power SNR gains of both interfaces. The sub-6 entries are one per
/// eigenmode; for the uniform covariance they are `lambda_i^2 / n_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkGains {
    pub sub6: Vec<f64>,
    pub mmwave: f64,
}

impl LinkGains {
    pub fn new(ch: &Sub6Channel, link: &MmWaveLink) -> Self {
        Self {
            sub6: ch.uniform_gains(),
            mmwave: link.gain(),
        }
    }

    pub fn sub6_total(&self) -> f64 {
        self.sub6.iter().sum()
    }
}

fn check_nonneg(w: f64, p: f64) -> Result<()> {
    if !(w >= 0.0) || !(p >= 0.0) {
        return Err(Error::Domain(format!("bandwidth and power must be >= 0 (w = {w}, p = {p})")));
    }
    Ok(())
}

/// `w * sum_i ln(1 + p g_i / w)`, zero at `w = 0`.
pub fn rate_with_gains(gains: &[f64], w: f64, p: f64) -> Result<f64> {
    check_nonneg(w, p)?;
    if w == 0.0 {
        return Ok(0.0);
    }
    let snr = p / w;
    Ok(w * gains.iter().map(|g| (snr * g).ln_1p()).sum::<f64>())
}

/// Sub-6 rate under the uniform input covariance `p / n_t * I`.
///
/// ```
/// use bandalloc::channel::Sub6Channel;
/// use bandalloc::linkmodel::rate_sub6_uniform;
///
/// let ch = Sub6Channel::from_singular_values(1, 1, &[1.0]).unwrap();
/// let r = rate_sub6_uniform(&ch, 1.0, 1.0).unwrap();
/// assert!((r - 2f64.ln()).abs() < 1e-15);
/// ```
pub fn rate_sub6_uniform(ch: &Sub6Channel, w: f64, p: f64) -> Result<f64> {
    rate_with_gains(&ch.uniform_gains(), w, p)
}

/// `w ln(1 + p A / w)`.
pub fn rate_mmwave(link: &MmWaveLink, w: f64, p: f64) -> Result<f64> {
    rate_with_gains(&[link.gain()], w, p)
}

/// Transmit power of the active interfaces plus component power.
pub fn consumed_power(alloc: &Allocation, params: &SystemParams) -> f64 {
    let ind = |w: f64, p: f64| if w > 0.0 { p } else { 0.0 };
    ind(alloc.w_sub6, alloc.p_sub6)
        + params.sub6_cost() * alloc.w_sub6
        + ind(alloc.w_m, alloc.p_m)
        + params.mmwave_cost() * alloc.w_m
}

/// Whether `alloc` respects the budget and caps. Negative entries, and power
/// on an inactive interface, are infeasible.
pub fn is_feasible(alloc: &Allocation, params: &SystemParams) -> bool {
    let vals = [alloc.w_sub6, alloc.w_m, alloc.p_sub6, alloc.p_m];
    if vals.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return false;
    }
    if (alloc.w_sub6 == 0.0 && alloc.p_sub6 > 0.0) || (alloc.w_m == 0.0 && alloc.p_m > 0.0) {
        return false;
    }
    let slack = 1.0 + FEASIBILITY_RTOL;
    alloc.w_sub6 <= params.w_sub6_max * slack
        && alloc.w_m <= params.w_m_max * slack
        && consumed_power(alloc, params) <= params.p_max * slack
}

/// Evaluates an allocation against explicit gains.
pub fn evaluate_gains(alloc: &Allocation, gains: &LinkGains, params: &SystemParams) -> EvalReport {
    let feasible = is_feasible(alloc, params);
    let rate = |g: &[f64], w: f64, p: f64| rate_with_gains(g, w.max(0.0), p.max(0.0)).unwrap_or(0.0);
    let rate_sub6 = rate(&gains.sub6, alloc.w_sub6, alloc.p_sub6);
    let rate_m = rate(&[gains.mmwave], alloc.w_m, alloc.p_m);
    let rate_total = rate_sub6 + rate_m;
    let consumed = consumed_power(alloc, params);
    EvalReport {
        rate_sub6,
        rate_m,
        rate_total,
        consumed_power: consumed,
        ee: if consumed > 0.0 { rate_total / consumed } else { 0.0 },
        feasible,
    }
}

/// Evaluates an allocation on a channel pair with the uniform sub-6
/// covariance.
pub fn evaluate(alloc: &Allocation, ch: &Sub6Channel, link: &MmWaveLink, params: &SystemParams) -> EvalReport {
    evaluate_gains(alloc, &LinkGains::new(ch, link), params)
}
