//! Per-interface optimisation of a rate `w * sum_i ln(1 + p g_i / w)` against
//! a linear cost `p + c w`.
//!
//! For a budget `q` spent on one interface (`p + c w = q`, `0 <= w <= cap`),
//! the rate is homogeneous in `(w, p)`, so below a knee the best SNR per hertz
//! `rho = p / w` is a constant `rho*` and the value grows linearly in `q`.
//! Past the knee the bandwidth sits at its cap and the remaining budget goes
//! to power. The resulting value function is concave with a continuous
//! derivative, which makes splitting a budget between two interfaces a
//! monotone root-finding problem.

use crate::specialfn::bandwidth_marginal;

/// How the bandwidth of an interface is handled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Bandwidth {
    /// Chosen freely in `[0, cap]`.
    Free { cap: f64 },
    /// Pinned; `Fixed(0.0)` switches the interface off.
    Fixed(f64),
}

#[derive(Debug, Clone)]
pub(crate) struct Interface {
    /// Strictly positive gains only.
    gains: Vec<f64>,
    cost: f64,
    bandwidth: Bandwidth,
    /// Optimal SNR per hertz below the knee (free bandwidth only).
    rho_star: f64,
}

/// `L(rho) = sum_i ln(1 + rho g_i)`.
pub(crate) fn log_sum(gains: &[f64], rho: f64) -> f64 {
    gains.iter().map(|g| (rho * g).ln_1p()).sum()
}

/// `L'(rho)`, which is also `dR/dp` at SNR-per-hertz `rho`.
pub(crate) fn log_sum_slope(gains: &[f64], rho: f64) -> f64 {
    gains.iter().map(|g| g / (1.0 + rho * g)).sum()
}

/// `dR/dw` at SNR-per-hertz `rho`.
pub(crate) fn bandwidth_slope(gains: &[f64], rho: f64) -> f64 {
    gains.iter().map(|g| bandwidth_marginal(rho * g)).sum()
}

/// Bisection in `ln(rho)` for the root of a function that is positive below
/// and negative above it.
pub(crate) fn log_bisect(f: impl Fn(f64) -> f64, start: f64) -> f64 {
    let (mut lo, mut hi) = (start, start);
    let mut guard = 0;
    while f(lo) <= 0.0 && guard < 2000 {
        lo *= 0.5;
        guard += 1;
    }
    guard = 0;
    while f(hi) > 0.0 && guard < 2000 {
        hi *= 2.0;
        guard += 1;
    }
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if !(mid > lo && mid < hi) {
            break;
        }
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo * hi).sqrt()
}

/// Root of `L'(rho) (rho + c) - L(rho)`, the maximiser of `L(rho) / (rho + c)`.
fn optimal_rho(gains: &[f64], cost: f64) -> f64 {
    if gains.is_empty() {
        return 0.0;
    }
    let phi = |rho: f64| {
        gains
            .iter()
            .map(|g| g * cost / (1.0 + rho * g) - bandwidth_marginal(rho * g))
            .sum::<f64>()
    };
    let gmax = gains.iter().cloned().fold(0.0, f64::max);
    log_bisect(phi, (cost / gmax).sqrt().max(1e-300))
}

impl Interface {
    pub(crate) fn new(gains: &[f64], cost: f64, bandwidth: Bandwidth) -> Self {
        let gains: Vec<f64> = gains.iter().copied().filter(|g| *g > 0.0).collect();
        let rho_star = match bandwidth {
            Bandwidth::Free { .. } => optimal_rho(&gains, cost),
            Bandwidth::Fixed(_) => 0.0,
        };
        Self { gains, cost, bandwidth, rho_star }
    }

    pub(crate) fn is_dead(&self) -> bool {
        self.gains.is_empty() || matches!(self.bandwidth, Bandwidth::Fixed(w) if w == 0.0)
    }

    /// Smallest budget the interface can accept.
    pub(crate) fn min_budget(&self) -> f64 {
        match self.bandwidth {
            Bandwidth::Free { .. } => 0.0,
            Bandwidth::Fixed(w) => self.cost * w,
        }
    }

    /// Best `(w, p)` for a budget `q >= min_budget()`.
    pub(crate) fn allocate(&self, q: f64) -> (f64, f64) {
        match self.bandwidth {
            Bandwidth::Fixed(w) => {
                if w == 0.0 {
                    (0.0, 0.0)
                } else {
                    (w, (q - self.cost * w).max(0.0))
                }
            }
            Bandwidth::Free { cap } => {
                if self.gains.is_empty() || q <= 0.0 {
                    return (0.0, 0.0);
                }
                let w = q / (self.rho_star + self.cost);
                if w <= cap {
                    (w, (q - self.cost * w).max(0.0))
                } else {
                    (cap, (q - self.cost * cap).max(0.0))
                }
            }
        }
    }

    /// `dV/dq`, the marginal rate of budget.
    pub(crate) fn marginal(&self, q: f64) -> f64 {
        if self.is_dead() {
            return 0.0;
        }
        let (w, p) = self.allocate(q);
        if w == 0.0 {
            // free interface at zero budget: the linear-regime slope
            return log_sum_slope(&self.gains, self.rho_star);
        }
        log_sum_slope(&self.gains, p / w)
    }

    #[cfg(test)]
    pub(crate) fn value(&self, q: f64) -> f64 {
        let (w, p) = self.allocate(q);
        if w == 0.0 {
            0.0
        } else {
            w * log_sum(&self.gains, p / w)
        }
    }
}

/// Splits `budget` between two interfaces to maximise the summed value.
/// Returns `None` when the budget cannot cover both minimum budgets.
pub(crate) fn split_budget(a: &Interface, b: &Interface, budget: f64) -> Option<(f64, f64)> {
    let lo = a.min_budget();
    let hi = budget - b.min_budget();
    if hi < lo {
        return None;
    }
    let h = |qa: f64| a.marginal(qa) - b.marginal(budget - qa);
    if a.is_dead() || h(lo) <= 0.0 {
        return Some((lo, budget - lo));
    }
    if b.is_dead() || h(hi) >= 0.0 {
        return Some((hi, budget - hi));
    }
    let (mut l, mut r) = (lo, hi);
    for _ in 0..300 {
        let mid = 0.5 * (l + r);
        if !(mid > l && mid < r) {
            break;
        }
        if h(mid) > 0.0 {
            l = mid;
        } else {
            r = mid;
        }
    }
    let qa = 0.5 * (l + r);
    Some((qa, budget - qa))
}

/// Best `(w, p)` maximising `R(w, p) - beta (p + c w)` with `w <= cap`,
/// `p <= p_cap`. The objective is jointly concave, so the KKT point found
/// here is global.
pub(crate) fn penalised_optimum(gains: &[f64], cost: f64, cap: f64, p_cap: f64, beta: f64) -> (f64, f64) {
    let gains: Vec<f64> = gains.iter().copied().filter(|g| *g > 0.0).collect();
    let total: f64 = gains.iter().sum();
    if gains.is_empty() || total <= beta {
        return (0.0, 0.0);
    }
    // SNR per hertz at which the power derivative equals beta
    let rho = log_bisect(|r| log_sum_slope(&gains, r) - beta, 1.0 / total);
    let profit = log_sum(&gains, rho) - beta * rho - beta * cost;
    if profit <= 0.0 {
        return (0.0, 0.0);
    }
    if rho * cap <= p_cap {
        return (cap, rho * cap);
    }
    // power cap binds; widen the band until dR/dw falls to beta c
    let w_lo = p_cap / rho;
    let slope = |w: f64| bandwidth_slope(&gains, p_cap / w) - beta * cost;
    if slope(cap) >= 0.0 {
        return (cap, p_cap);
    }
    let (mut l, mut r) = (w_lo, cap);
    for _ in 0..300 {
        let mid = 0.5 * (l + r);
        if !(mid > l && mid < r) {
            break;
        }
        if slope(mid) > 0.0 {
            l = mid;
        } else {
            r = mid;
        }
    }
    (0.5 * (l + r), p_cap)
}
