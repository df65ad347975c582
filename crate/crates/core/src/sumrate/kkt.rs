//! KKT diagnostics for the sum-rate problem.
//!
//! Multipliers: `mu0` budget, `mu1` sub-6 bandwidth cap, `mu2` mmWave
//! bandwidth cap, `mu3` / `mu4` nonnegativity of the sub-6 / mmWave power.
//! Residuals are relative: power rows are divided by `mu0`, bandwidth rows by
//! `mu0 c` for the interface's cost per hertz `c`.

use crate::interface::{bandwidth_slope, log_sum_slope};
use crate::linkmodel::{consumed_power, Allocation, LinkGains, SystemParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ActiveCase {
    /// Both interfaces on, sub-6 band full, mmWave band below its cap.
    FullSub6,
    /// Both on, mmWave band full, sub-6 band below its cap.
    FullMmWave,
    /// Both on with both bands full.
    FullBoth,
    Sub6Only,
    MmWaveOnly,
    /// Both on with both bands below their caps.
    NumericInterior,
    /// Nothing transmits.
    Inactive,
}

impl ActiveCase {
    pub fn of(alloc: &Allocation, params: &SystemParams) -> Self {
        let full = |w: f64, cap: f64| w >= cap * (1.0 - 1e-12);
        match (alloc.sub6_active(), alloc.mmwave_active()) {
            (false, false) => ActiveCase::Inactive,
            (true, false) => ActiveCase::Sub6Only,
            (false, true) => ActiveCase::MmWaveOnly,
            (true, true) => match (full(alloc.w_sub6, params.w_sub6_max), full(alloc.w_m, params.w_m_max)) {
                (true, true) => ActiveCase::FullBoth,
                (true, false) => ActiveCase::FullSub6,
                (false, true) => ActiveCase::FullMmWave,
                (false, false) => ActiveCase::NumericInterior,
            },
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            ActiveCase::FullSub6 => "full_sub6",
            ActiveCase::FullMmWave => "full_mmwave",
            ActiveCase::FullBoth => "full_both",
            ActiveCase::Sub6Only => "sub6_only",
            ActiveCase::MmWaveOnly => "mmwave_only",
            ActiveCase::NumericInterior => "interior",
            ActiveCase::Inactive => "inactive",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktDiagnostics {
    /// `[mu0, mu1, mu2, mu3, mu4]`, all nonnegative.
    pub multipliers: [f64; 5],
    /// Rows for `p_sub6`, `p_m`, `w_sub6`, `w_m`.
    pub stationarity_residuals: [f64; 4],
    /// Rows for the budget, the two caps, and the two power bounds.
    pub slackness_residuals: [f64; 5],
    pub active_case: ActiveCase,
}

impl KktDiagnostics {
    pub fn max_residual(&self) -> f64 {
        self.stationarity_residuals
            .iter()
            .chain(&self.slackness_residuals)
            .fold(0.0, |m, r| m.max(r.abs()))
    }
}

struct Side<'a> {
    gains: &'a [f64],
    w: f64,
    p: f64,
    cost: f64,
    cap: f64,
}

impl Side<'_> {
    fn on(&self) -> bool {
        self.w > 0.0
    }
    fn rho(&self) -> f64 {
        self.p / self.w
    }
    fn dr_dp(&self) -> f64 {
        log_sum_slope(self.gains, self.rho())
    }
    fn dr_dw(&self) -> f64 {
        bandwidth_slope(self.gains, self.rho())
    }
}

/// Residuals of the KKT system at `alloc`; rows of an inactive interface are
/// left at zero.
pub fn kkt_residuals_gains(alloc: &Allocation, gains: &LinkGains, params: &SystemParams) -> KktDiagnostics {
    let mm = [gains.mmwave];
    let s = Side {
        gains: &gains.sub6,
        w: alloc.w_sub6,
        p: alloc.p_sub6,
        cost: params.sub6_cost(),
        cap: params.w_sub6_max,
    };
    let m = Side {
        gains: &mm,
        w: alloc.w_m,
        p: alloc.p_m,
        cost: params.mmwave_cost(),
        cap: params.w_m_max,
    };
    let active_case = ActiveCase::of(alloc, params);

    let mu0 = if m.on() && m.p > 0.0 {
        m.dr_dp()
    } else if s.on() && s.p > 0.0 {
        s.dr_dp()
    } else {
        [&s, &m].iter().filter(|x| x.on()).map(|x| x.dr_dp()).fold(0.0, f64::max)
    };
    let mut mult = [mu0, 0.0, 0.0, 0.0, 0.0];
    let mut stat = [0.0; 4];
    let mut slack = [0.0; 5];
    if mu0 <= 0.0 {
        return KktDiagnostics {
            multipliers: mult,
            stationarity_residuals: stat,
            slackness_residuals: slack,
            active_case,
        };
    }

    slack[0] = (params.p_max - consumed_power(alloc, params)) / params.p_max;
    for (k, side) in [&s, &m].into_iter().enumerate() {
        if !side.on() {
            continue;
        }
        // power row: dR/dp - mu0 + mu_p = 0 with mu_p >= 0 only at p = 0
        let dp = side.dr_dp();
        let mu_p = if side.p == 0.0 { (mu0 - dp).max(0.0) } else { 0.0 };
        mult[3 + k] = mu_p;
        stat[k] = (dp - mu0 + mu_p) / mu0;
        slack[3 + k] = mu_p * side.p / params.p_max / mu0;

        // bandwidth row: dR/dw - mu0 c - mu_w = 0 with mu_w >= 0
        let scale = (mu0 * side.cost).max(f64::MIN_POSITIVE);
        let raw = side.dr_dw() - mu0 * side.cost;
        let mu_w = raw.max(0.0);
        mult[1 + k] = mu_w;
        stat[2 + k] = raw.min(0.0) / scale;
        slack[1 + k] = mu_w * (side.cap - side.w) / side.cap / scale;
    }

    KktDiagnostics {
        multipliers: mult,
        stationarity_residuals: stat,
        slackness_residuals: slack,
        active_case,
    }
}
