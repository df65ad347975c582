//! High-SNR closed forms (full sub-6 band, full mmWave band) and the low-SNR
//! single-interface rule.

use crate::error::{Error, Result};
use crate::interface::{split_budget, Bandwidth, Interface};
use crate::linkmodel::{consumed_power, Allocation, LinkGains, SystemParams};
use crate::specialfn::wright_omega;

/// Constants of the two full-band closed forms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedFormConstants {
    /// `omega(ln(a A) - 1)`.
    pub b: f64,
    /// `n_r a + n n_r a / B`, watts per hertz.
    pub c: f64,
    /// `omega(mean_i ln(lambda_i^2) - ln(n_t / a) - 1)`.
    pub d: f64,
    /// `a + a / D`, watts per hertz.
    pub e: f64,
}

/// `(B, C)` from the mmWave gain and the sub-6 mode count.
pub(crate) fn mmwave_constants(gains: &LinkGains, params: &SystemParams) -> Result<(f64, f64)> {
    let a = params.adc_a;
    let arg = (a * gains.mmwave).ln() - 1.0;
    if !arg.is_finite() {
        return Err(Error::Domain(format!("no real B for a A = {}", a * gains.mmwave)));
    }
    let b = wright_omega(arg)?.value;
    let n = gains.sub6.len() as f64;
    let nr_a = params.n_r as f64 * a;
    Ok((b, nr_a + n * nr_a / b))
}

/// `(D, E)`. With uniform gains `g_i = lambda_i^2 / n_t` the omega argument is
/// `mean_i ln(g_i a) - 1`.
pub(crate) fn sub6_constants(gains: &LinkGains, params: &SystemParams) -> Result<(f64, f64)> {
    let zero_modes = gains.sub6.iter().filter(|g| !(**g > 0.0)).count();
    if zero_modes > 0 || gains.sub6.is_empty() {
        return Err(Error::RankDeficient { zero_modes: zero_modes.max(1) });
    }
    let a = params.adc_a;
    let mean_ln = gains.sub6.iter().map(|g| g.ln()).sum::<f64>() / gains.sub6.len() as f64;
    let d = wright_omega(mean_ln + a.ln() - 1.0)?.value;
    Ok((d, a + a / d))
}

impl ClosedFormConstants {
    pub fn compute(gains: &LinkGains, params: &SystemParams) -> Result<Self> {
        let (b, c) = mmwave_constants(gains, params)?;
        let (d, e) = sub6_constants(gains, params)?;
        Ok(Self { b, c, d, e })
    }
}

/// Pushes any budget the closed form left unused into the sub-6 power.
fn rebalance(alloc: &mut Allocation, params: &SystemParams, warnings: &mut Vec<String>) {
    let left = params.p_max - consumed_power(alloc, params);
    if left > 1e-9 * params.p_max {
        if alloc.w_sub6 > 0.0 {
            alloc.p_sub6 += left;
            warnings.push(format!("closed form left {left:.3e} W unused; added to sub-6 power"));
        } else if alloc.w_m > 0.0 {
            alloc.p_m += left;
            warnings.push(format!("closed form left {left:.3e} W unused; added to mmWave power"));
        }
    }
}

/// Re-solves the free variables with one bandwidth pinned to its cap.
fn face_solve(gains: &LinkGains, params: &SystemParams, pin_sub6: bool) -> Option<Allocation> {
    let (s_bw, m_bw) = if pin_sub6 {
        (Bandwidth::Fixed(params.w_sub6_max), Bandwidth::Free { cap: params.w_m_max })
    } else {
        (Bandwidth::Free { cap: params.w_sub6_max }, Bandwidth::Fixed(params.w_m_max))
    };
    let s = Interface::new(&gains.sub6, params.sub6_cost(), s_bw);
    let m = Interface::new(&[gains.mmwave], params.mmwave_cost(), m_bw);
    let (qs, qm) = split_budget(&s, &m, params.p_max)?;
    let (w_sub6, p_sub6) = s.allocate(qs);
    let (w_m, p_m) = m.allocate(qm);
    Some(Allocation { w_sub6, w_m, p_sub6, p_m })
}

/// Full sub-6 band; mmWave bandwidth and both powers from the closed form.
pub(crate) fn case1(gains: &LinkGains, params: &SystemParams) -> Result<(Allocation, Vec<String>)> {
    let (b, c) = mmwave_constants(gains, params)?;
    let a = params.adc_a;
    let ws = params.w_sub6_max;
    let n = gains.sub6.len() as f64;
    let rest = params.p_max - c * ws;
    let mut alloc = Allocation {
        w_sub6: ws,
        p_sub6: (n * params.n_r as f64 * a * ws / b).max(0.0),
        p_m: (rest / (b + 1.0)).max(0.0),
        w_m: (rest / (a + a / b)).max(0.0),
    };
    if alloc.w_m == 0.0 {
        alloc.p_m = 0.0;
    }
    let mut warnings = Vec::new();
    if alloc.w_m > params.w_m_max {
        warnings.push("mmWave bandwidth clamped at its cap; powers re-solved on that face".into());
        match face_solve(gains, params, false) {
            Some(face) => alloc = face,
            None => alloc.w_m = params.w_m_max,
        }
    }
    rebalance(&mut alloc, params, &mut warnings);
    Ok((alloc, warnings))
}

/// Full mmWave band; sub-6 bandwidth and both powers from the closed form.
pub(crate) fn case2(gains: &LinkGains, params: &SystemParams) -> Result<(Allocation, Vec<String>)> {
    let (d, e) = sub6_constants(gains, params)?;
    let a = params.adc_a;
    let wm = params.w_m_max;
    let rest = params.p_max - e * wm;
    let mut alloc = Allocation {
        w_m: wm,
        p_m: (a * wm / d).max(0.0),
        p_sub6: (rest / (d + 1.0)).max(0.0),
        w_sub6: (rest / (params.n_r as f64 * e)).max(0.0),
    };
    if alloc.w_sub6 == 0.0 {
        alloc.p_sub6 = 0.0;
    }
    let mut warnings = Vec::new();
    if alloc.w_sub6 > params.w_sub6_max {
        warnings.push("sub-6 bandwidth clamped at its cap; powers re-solved on that face".into());
        match face_solve(gains, params, true) {
            Some(face) => alloc = face,
            None => alloc.w_sub6 = params.w_sub6_max,
        }
    }
    rebalance(&mut alloc, params, &mut warnings);
    Ok((alloc, warnings))
}

/// Low-SNR rule: all transmit power to the interface with the larger
/// linearised slope (`sum_i g_i` against `A`, ties to sub-6). Its bandwidth is
/// whatever keeps the component cost at 1% of the budget, or its cap.
pub(crate) fn low_snr(gains: &LinkGains, params: &SystemParams) -> Allocation {
    let sub6_wins = gains.sub6_total() >= gains.mmwave;
    if !(gains.sub6_total().max(gains.mmwave) > 0.0) {
        return Allocation::zero();
    }
    let (cost, cap) = if sub6_wins {
        (params.sub6_cost(), params.w_sub6_max)
    } else {
        (params.mmwave_cost(), params.w_m_max)
    };
    let w = cap.min(0.01 * params.p_max / cost);
    let p = (params.p_max - cost * w).max(0.0);
    if sub6_wins {
        Allocation { w_sub6: w, p_sub6: p, ..Allocation::zero() }
    } else {
        Allocation { w_m: w, p_m: p, ..Allocation::zero() }
    }
}
