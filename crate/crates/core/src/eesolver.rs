//! Energy-efficiency maximisation by Dinkelbach's parametric iteration.
//!
//! For a parameter `beta` the inner problem maximises `f(x) - beta g(x)`,
//! with `f` the sum rate and `g` the consumed power, over the bandwidth caps
//! and a power cap per interface. Both terms separate across interfaces, so
//! each interface is solved on its own and switched off when its best profit
//! is not positive.

use crate::channel::{MmWaveLink, Sub6Channel};
use crate::error::{Error, Result};
use crate::interface::penalised_optimum;
use crate::linkmodel::{consumed_power, evaluate_gains, Allocation, LinkGains, SystemParams};
use crate::sumrate::{Candidate, SnrThresholds, SolveReport};

/// Smallest accepted `beta`.
pub const BETA_FLOOR: f64 = 1e-12;
/// Default per-interface transmit power cap, watts.
pub const DEFAULT_P_CAP: f64 = 100.0;
pub const MAX_ITERATIONS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EeOptions {
    pub p_cap: f64,
    /// Stopping threshold on `F(beta)`; `None` means `1e-9` times the rate
    /// found at the first iteration.
    pub delta: Option<f64>,
}

impl Default for EeOptions {
    fn default() -> Self {
        Self { p_cap: DEFAULT_P_CAP, delta: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DinkelbachState {
    pub beta: f64,
    pub f_value: f64,
    pub g_value: f64,
    /// `F(beta) = f - beta g` at the last inner solution.
    pub big_f: f64,
    pub iteration: usize,
    pub delta: f64,
    /// `(beta_n, F(beta_n))` per iteration.
    pub history: Vec<(f64, f64)>,
    pub converged: bool,
}

/// Inner solution for explicit gains.
pub fn inner_solve_gains(beta: f64, gains: &LinkGains, params: &SystemParams, p_cap: f64) -> Result<(Allocation, f64, f64)> {
    if !(beta >= BETA_FLOOR) {
        return Err(Error::BetaTooSmall(beta));
    }
    let (w_sub6, p_sub6) = penalised_optimum(&gains.sub6, params.sub6_cost(), params.w_sub6_max, p_cap, beta);
    let (w_m, p_m) = penalised_optimum(&[gains.mmwave], params.mmwave_cost(), params.w_m_max, p_cap, beta);
    let alloc = Allocation { w_sub6, w_m, p_sub6, p_m };
    let f = evaluate_gains(&alloc, gains, params).rate_total;
    Ok((alloc, f, consumed_power(&alloc, params)))
}

/// `argmax f(x) - beta g(x)` with the default power cap.
pub fn inner_solve(beta: f64, ch: &Sub6Channel, link: &MmWaveLink, params: &SystemParams) -> Result<(Allocation, f64, f64)> {
    inner_solve_gains(beta, &LinkGains::new(ch, link), params, DEFAULT_P_CAP)
}

/// Dinkelbach iteration with the default power cap and `delta`.
///
/// ```
/// use bandalloc::channel::{MmWaveLink, Sub6Channel};
/// use bandalloc::eesolver::dinkelbach;
/// use bandalloc::linkmodel::SystemParams;
///
/// let ch = Sub6Channel::from_singular_values(2, 2, &[1e4, 1e4]).unwrap();
/// let link = MmWaveLink::new(1e8).unwrap();
/// let params = SystemParams::default();
/// let report = dinkelbach(&ch, &link, &params, None).unwrap();
/// let state = report.dinkelbach.unwrap();
/// assert!(state.converged);
/// assert!(state.history.windows(2).all(|h| h[1].0 > h[0].0));
/// ```
pub fn dinkelbach(ch: &Sub6Channel, link: &MmWaveLink, params: &SystemParams, delta: Option<f64>) -> Result<SolveReport> {
    dinkelbach_gains(&LinkGains::new(ch, link), params, &EeOptions { delta, ..EeOptions::default() })
}

pub fn dinkelbach_gains(gains: &LinkGains, params: &SystemParams, opts: &EeOptions) -> Result<SolveReport> {
    if let Some(d) = opts.delta {
        if !(d > 0.0) {
            return Err(Error::InvalidParams(format!("delta must be > 0, got {d}")));
        }
    }
    if !(opts.p_cap > 0.0) || !opts.p_cap.is_finite() {
        return Err(Error::InvalidParams(format!("p_cap must be finite and > 0, got {}", opts.p_cap)));
    }

    let mut beta = BETA_FLOOR;
    let mut history = Vec::new();
    let mut delta = opts.delta.unwrap_or(0.0);
    let mut warnings = Vec::new();
    let mut last: Option<(Allocation, f64, f64, f64)> = None;
    let mut converged = false;

    for n in 0..MAX_ITERATIONS {
        let (alloc, f, g) = inner_solve_gains(beta, gains, params, opts.p_cap)?;
        let big_f = f - beta * g;
        history.push((beta, big_f));
        if n == 0 && opts.delta.is_none() {
            delta = 1e-9 * f;
        }
        // At the optimal beta the zero allocation also attains F = 0; the
        // previous iterate, whose ratio is beta itself, is the one to keep.
        let keep_previous = match &last {
            Some((_, pf, pg, _)) => *pg > 0.0 && (g == 0.0 || pf / pg > f / g),
            None => false,
        };
        if keep_previous {
            let (pa, pf, pg, _) = last.expect("checked above");
            last = Some((pa, pf, pg, big_f));
        } else {
            last = Some((alloc, f, g, big_f));
        }
        // the relative test keeps f / g within 1e-9 of beta on return
        if g == 0.0 || (big_f <= delta && big_f <= 1e-9 * beta * g) {
            converged = true;
            break;
        }
        let next = f / g;
        if !(next > beta) {
            // rounding has stalled the sequence
            converged = true;
            break;
        }
        beta = next;
    }
    if !converged {
        warnings.push(format!("Dinkelbach did not reach F <= {delta:.3e} in {MAX_ITERATIONS} iterations"));
    }

    let (alloc, f, g, big_f) = last.expect("at least one iteration");
    if f == 0.0 {
        warnings.push("no interface can carry a positive rate; energy efficiency is 0".into());
    }
    if alloc.p_sub6 >= opts.p_cap * (1.0 - 1e-12) || alloc.p_m >= opts.p_cap * (1.0 - 1e-12) {
        warnings.push(format!("power cap of {} W is active", opts.p_cap));
    }
    let source = if alloc.active_count() == 0 {
        Candidate::Zero
    } else {
        Candidate::Numeric
    };
    let mut report = SolveReport::assemble(alloc, gains, params, source, warnings, &SnrThresholds::default());
    report.dinkelbach = Some(DinkelbachState {
        beta: if g > 0.0 { f / g } else { 0.0 },
        f_value: f,
        g_value: g,
        big_f,
        iteration: history.len(),
        delta,
        history,
        converged,
    });
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::generate_rayleigh;

    fn ee_of(gains: &[f64], cost: f64, w: f64, p: f64) -> f64 {
        let r = w * gains.iter().map(|g| (1.0 + p * g / w).ln()).sum::<f64>();
        r / (p + cost * w)
    }

    #[test]
    fn rejects_tiny_beta() {
        let ch = Sub6Channel::from_singular_values(1, 1, &[1.0]).unwrap();
        let link = MmWaveLink::new(1.0).unwrap();
        let params = SystemParams::default();
        assert_eq!(inner_solve(0.0, &ch, &link, &params).unwrap_err(), Error::BetaTooSmall(0.0));
        assert!(inner_solve(1e-13, &ch, &link, &params).is_err());
        assert!(inner_solve(1e-12, &ch, &link, &params).is_ok());
    }

    #[test]
    fn huge_beta_switches_everything_off() {
        let ch = generate_rayleigh(4, 2, 1).unwrap().scaled(1e10);
        let link = MmWaveLink::new(1e9).unwrap();
        let (alloc, f, g) = inner_solve(1e30, &ch, &link, &SystemParams::default()).unwrap();
        assert_eq!((alloc, f, g), (Allocation::zero(), 0.0, 0.0));
    }

    #[test]
    fn zero_channel_has_zero_ee() {
        let ch = Sub6Channel::from_singular_values(2, 2, &[0.0, 0.0]).unwrap();
        let link = MmWaveLink::new(0.0).unwrap();
        for beta in [1e-12, 1.0, 1e6] {
            let (alloc, _, _) = inner_solve(beta, &ch, &link, &SystemParams::default()).unwrap();
            assert_eq!(alloc, Allocation::zero());
        }
        let r = dinkelbach(&ch, &link, &SystemParams::default(), None).unwrap();
        assert_eq!(r.eval.ee, 0.0);
        assert!(!r.warnings.is_empty());
    }

    #[test]
    fn siso_matches_one_dimensional_scan() {
        // mmWave only: scan w with the best p for each w
        let ch = Sub6Channel::from_singular_values(1, 1, &[0.0]).unwrap();
        let link = MmWaveLink::new(1e9).unwrap();
        let params = SystemParams::new(1.0, 1e-9, 1, 1, 1e6, 1e8).unwrap();
        let opts = EeOptions { p_cap: 1.0, delta: None };
        let r = dinkelbach_gains(&LinkGains::new(&ch, &link), &params, &opts).unwrap();
        let mut best: f64 = 0.0;
        for i in 1..=4000 {
            let w = params.w_m_max * 10f64.powf(-8.0 * (1.0 - i as f64 / 4000.0));
            for j in 1..=400 {
                let p = opts.p_cap * 10f64.powf(-6.0 * (1.0 - j as f64 / 400.0));
                best = best.max(ee_of(&[1e9], params.adc_a, w, p));
            }
        }
        let ee = r.eval.ee;
        assert!(ee >= best * (1.0 - 1e-9), "{ee} < {best}");
        assert!(ee <= best * (1.0 + 1e-3), "{ee} >> {best}");
    }

    #[test]
    fn history_is_monotone_and_terminates() {
        for seed in 0..10 {
            let ch = generate_rayleigh(4, 2, seed).unwrap().scaled(1e10);
            let link = MmWaveLink::rician(4, 2, 6.3e6, 10.0, seed).unwrap();
            let r = dinkelbach(&ch, &link, &SystemParams::default(), None).unwrap();
            let st = r.dinkelbach.unwrap();
            assert!(st.converged && st.iteration <= MAX_ITERATIONS);
            assert!(st.history.windows(2).all(|h| h[1].0 > h[0].0));
            assert!(st.history.windows(2).all(|h| h[1].1 < h[0].1));
            assert!(st.history.iter().all(|h| h.1 >= -st.delta));
            assert!(st.big_f.abs() <= st.delta);
            assert!((r.eval.ee - st.f_value / st.g_value).abs() <= 1e-12 * r.eval.ee, "{:?} {:?}", r.eval, st);
            let beta_last = st.history.last().unwrap().0;
            assert!((beta_last - r.eval.ee).abs() <= 1e-9 * r.eval.ee);
        }
    }

    #[test]
    fn table2_regime_keeps_mmwave_band_narrow() {
        let ch = generate_rayleigh(64, 16, 3).unwrap().scaled(1e10);
        let link = MmWaveLink::rician(64, 16, 6.3e6, 10.0, 3).unwrap();
        let params = SystemParams::new(2.5, 1e-7, 64, 16, 1e6, 1e9).unwrap();
        let r = dinkelbach(&ch, &link, &params, None).unwrap();
        assert!(r.allocation.w_m < 1e-2 * params.w_m_max, "{:?}", r.allocation);
    }
}
