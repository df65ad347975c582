//! Brute-force grid search over the decision variables, used to certify the
//! solvers. Every candidate point is scored through
//! [`evaluate_gains`](crate::linkmodel::evaluate_gains) and nothing else.
//!
//! Bandwidths and powers are gridded in log coordinates. Each round lays
//! `points_per_axis` points on every axis, then the next round shrinks the
//! window by `shrink_factor` around the incumbent.

use rayon::prelude::*;

use crate::channel::{MmWaveLink, Sub6Channel};
use crate::eesolver::DEFAULT_P_CAP;
use crate::error::{Error, Result};
use crate::linkmodel::{evaluate_gains, Allocation, LinkGains, SystemParams};

/// Smallest gridded bandwidth or power, relative to its cap.
const LOG_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub points_per_axis: usize,
    pub refinement_rounds: usize,
    pub shrink_factor: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { points_per_axis: 32, refinement_rounds: 4, shrink_factor: 0.25 }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.points_per_axis < 8 {
            return Err(Error::InvalidParams(format!("points_per_axis must be >= 8, got {}", self.points_per_axis)));
        }
        if !(self.shrink_factor > 0.0 && self.shrink_factor < 1.0) {
            return Err(Error::InvalidParams(format!("shrink_factor must lie in (0, 1), got {}", self.shrink_factor)));
        }
        if self.shrink_factor * (self.points_per_axis as f64) < 2.0 {
            return Err(Error::InvalidParams("shrink_factor * points_per_axis must be >= 2".into()));
        }
        if self.refinement_rounds == 0 {
            return Err(Error::InvalidParams("need at least one round".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub allocation: Allocation,
    /// Sum rate (nats/s) or energy efficiency (nats/J).
    pub objective: f64,
    /// Estimated gap between `objective` and the true optimum, from the drop
    /// to the nearest grid neighbours along each axis.
    pub resolution_bound: f64,
    /// Incumbent objective after each round of the winning pattern.
    pub round_objectives: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
struct Axis {
    lo: f64,
    hi: f64,
}

struct Search {
    coords: Vec<f64>,
    objective: f64,
    bound: f64,
    rounds: Vec<f64>,
}

fn grid_point(lo: f64, hi: f64, n: usize, k: usize) -> f64 {
    if k + 1 == n {
        hi
    } else {
        lo + (hi - lo) * k as f64 / (n - 1) as f64
    }
}

/// Maximises `score` over the box, returning the incumbent and its bound.
fn search<F>(domain: &[Axis], spec: &GridSpec, score: F) -> Option<Search>
where
    F: Fn(&[f64]) -> Option<f64> + Sync,
{
    let d = domain.len();
    let n = spec.points_per_axis;
    let total = n.pow(d as u32);
    let mut window: Vec<Axis> = domain.to_vec();
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut rounds = Vec::new();

    for _ in 0..spec.refinement_rounds {
        let win = &window;
        let found = (0..total)
            .into_par_iter()
            .filter_map(|idx| {
                let mut rem = idx;
                let mut x = vec![0.0; d];
                for (k, ax) in win.iter().enumerate() {
                    x[k] = grid_point(ax.lo, ax.hi, n, rem % n);
                    rem /= n;
                }
                score(&x).map(|v| (idx, v))
            })
            .reduce_with(|a, b| {
                if b.1 > a.1 || (b.1 == a.1 && b.0 < a.0) {
                    b
                } else {
                    a
                }
            });
        if let Some((idx, v)) = found {
            if best.as_ref().is_none_or(|(_, bv)| v > *bv) {
                let mut rem = idx;
                let x: Vec<f64> = window
                    .iter()
                    .map(|ax| {
                        let c = grid_point(ax.lo, ax.hi, n, rem % n);
                        rem /= n;
                        c
                    })
                    .collect();
                best = Some((x, v));
            }
        }
        let Some((x, v)) = &best else {
            return None;
        };
        rounds.push(*v);
        // shrink around the incumbent, shifted to stay inside the domain
        for (k, ax) in window.iter_mut().enumerate() {
            let width = (ax.hi - ax.lo) * spec.shrink_factor;
            let full = domain[k];
            let mut lo = x[k] - 0.5 * width;
            let mut hi = x[k] + 0.5 * width;
            if lo < full.lo {
                hi += full.lo - lo;
                lo = full.lo;
            }
            if hi > full.hi {
                lo -= hi - full.hi;
                hi = full.hi;
            }
            *ax = Axis { lo: lo.max(full.lo), hi };
        }
    }

    let (x, v) = best?;
    // the last evaluated grid had the previous window, i.e. the current one
    // scaled back by 1 / shrink
    let mut bound = 0.0;
    for k in 0..d {
        let step = (window[k].hi - window[k].lo) / spec.shrink_factor / (n - 1) as f64;
        let mut drop: f64 = 0.0;
        for dir in [-1.0, 1.0] {
            let mut y = x.clone();
            y[k] += dir * step;
            if y[k] < domain[k].lo || y[k] > domain[k].hi {
                continue;
            }
            if let Some(nv) = score(&y) {
                drop = drop.max(v - nv);
            }
        }
        bound += drop.max(0.0);
    }
    Some(Search { coords: x, objective: v, bound, rounds })
}

fn log_axis(cap: f64) -> Axis {
    Axis { lo: (cap * LOG_FLOOR).ln(), hi: cap.ln() }
}

/// Prefers `a` over `b`: larger objective; within 1e-9 relative, fewer active
/// interfaces, then sub-6 over mmWave.
fn better(a: &OracleResult, b: &OracleResult) -> bool {
    let scale = a.objective.abs().max(b.objective.abs());
    let diff = a.objective - b.objective;
    if diff.abs() > 1e-9 * scale {
        return diff > 0.0;
    }
    let (na, nb) = (a.allocation.active_count(), b.allocation.active_count());
    if na != nb {
        return na < nb;
    }
    a.allocation.sub6_active() && !b.allocation.sub6_active()
}

fn pick(results: Vec<OracleResult>) -> OracleResult {
    let mut best: Option<OracleResult> = None;
    for r in results {
        if best.as_ref().is_none_or(|b| better(&r, b)) {
            best = Some(r);
        }
    }
    best.expect("the zero allocation is always a candidate")
}

fn zero_result() -> OracleResult {
    OracleResult { allocation: Allocation::zero(), objective: 0.0, resolution_bound: 0.0, round_objectives: vec![0.0] }
}

/// Sum-rate oracle. Powers sit on the budget-equality surface: for the
/// two-interface pattern the coordinates are both log-bandwidths and the
/// sub-6 share of the power left after component costs.
pub fn grid_search_sumrate(ch: &Sub6Channel, link: &MmWaveLink, params: &SystemParams, spec: &GridSpec) -> Result<OracleResult> {
    grid_search_sumrate_gains(&LinkGains::new(ch, link), params, spec)
}

pub fn grid_search_sumrate_gains(gains: &LinkGains, params: &SystemParams, spec: &GridSpec) -> Result<OracleResult> {
    spec.validate()?;
    params.validate()?;
    let (cs, cm, p) = (params.sub6_cost(), params.mmwave_cost(), params.p_max);

    let score_alloc = |a: Allocation| {
        let ev = evaluate_gains(&a, gains, params);
        ev.feasible.then_some(ev.rate_total)
    };
    let both = move |x: &[f64]| {
        let (ws, wm, share) = (x[0].exp(), x[1].exp(), x[2]);
        let rest = p - cs * ws - cm * wm;
        (rest >= 0.0).then(|| Allocation { w_sub6: ws, w_m: wm, p_sub6: share * rest, p_m: (1.0 - share) * rest })
    };
    let sub6 = move |x: &[f64]| {
        let ws = x[0].exp();
        let rest = p - cs * ws;
        (rest >= 0.0).then(|| Allocation { w_sub6: ws, p_sub6: rest, ..Allocation::zero() })
    };
    let mm = move |x: &[f64]| {
        let wm = x[0].exp();
        let rest = p - cm * wm;
        (rest >= 0.0).then(|| Allocation { w_m: wm, p_m: rest, ..Allocation::zero() })
    };

    let mut results = vec![zero_result()];
    let patterns: [(Vec<Axis>, &(dyn Fn(&[f64]) -> Option<Allocation> + Sync)); 3] = [
        (vec![log_axis(params.w_sub6_max)], &sub6),
        (vec![log_axis(params.w_m_max)], &mm),
        (
            vec![log_axis(params.w_sub6_max), log_axis(params.w_m_max), Axis { lo: 0.0, hi: 1.0 }],
            &both,
        ),
    ];
    for (axes, map) in patterns {
        if let Some(s) = search(&axes, spec, |x| map(x).and_then(score_alloc)) {
            results.push(OracleResult {
                allocation: map(&s.coords).expect("incumbent is feasible"),
                objective: s.objective,
                resolution_bound: s.bound,
                round_objectives: s.rounds,
            });
        }
    }
    Ok(pick(results))
}

/// Energy-efficiency oracle with the default power cap.
pub fn grid_search_ee(ch: &Sub6Channel, link: &MmWaveLink, params: &SystemParams, spec: &GridSpec) -> Result<OracleResult> {
    grid_search_ee_gains(&LinkGains::new(ch, link), params, spec, DEFAULT_P_CAP)
}

/// Energy-efficiency oracle over the box `w <= cap`, `p <= p_cap`; the total
/// budget plays no role.
pub fn grid_search_ee_gains(gains: &LinkGains, params: &SystemParams, spec: &GridSpec, p_cap: f64) -> Result<OracleResult> {
    spec.validate()?;
    params.validate()?;
    // lift the budget out of the way so only the box decides feasibility
    let boxed = SystemParams {
        p_max: 4.0 * p_cap + params.sub6_cost() * params.w_sub6_max + params.mmwave_cost() * params.w_m_max,
        ..*params
    };
    let score_alloc = |a: Allocation| {
        let ev = evaluate_gains(&a, gains, &boxed);
        (ev.feasible && a.p_sub6 <= p_cap && a.p_m <= p_cap).then_some(ev.ee)
    };
    let both = |x: &[f64]| Allocation { w_sub6: x[0].exp(), p_sub6: x[1].exp(), w_m: x[2].exp(), p_m: x[3].exp() };
    let sub6 = |x: &[f64]| Allocation { w_sub6: x[0].exp(), p_sub6: x[1].exp(), ..Allocation::zero() };
    let mm = |x: &[f64]| Allocation { w_m: x[0].exp(), p_m: x[1].exp(), ..Allocation::zero() };
    let pa = log_axis(p_cap);

    let mut results = vec![zero_result()];
    let patterns: [(Vec<Axis>, &(dyn Fn(&[f64]) -> Allocation + Sync)); 3] = [
        (vec![log_axis(params.w_sub6_max), pa], &sub6),
        (vec![log_axis(params.w_m_max), pa], &mm),
        (vec![log_axis(params.w_sub6_max), pa, log_axis(params.w_m_max), pa], &both),
    ];
    for (axes, map) in patterns {
        if let Some(s) = search(&axes, spec, |x| score_alloc(map(x))) {
            results.push(OracleResult {
                allocation: map(&s.coords),
                objective: s.objective,
                resolution_bound: s.bound,
                round_objectives: s.rounds,
            });
        }
    }
    Ok(pick(results))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::generate_rayleigh;
    use crate::linkmodel::{evaluate, is_feasible};

    #[test]
    fn spec_validation() {
        assert!(GridSpec::default().validate().is_ok());
        assert!(GridSpec { points_per_axis: 7, ..GridSpec::default() }.validate().is_err());
        assert!(GridSpec { shrink_factor: 1.0, ..GridSpec::default() }.validate().is_err());
        assert!(GridSpec { points_per_axis: 8, refinement_rounds: 2, shrink_factor: 0.2 }.validate().is_err());
    }

    #[test]
    fn zero_channel() {
        let ch = Sub6Channel::from_singular_values(2, 2, &[0.0, 0.0]).unwrap();
        let link = MmWaveLink::new(0.0).unwrap();
        let params = SystemParams::default();
        let r = grid_search_sumrate(&ch, &link, &params, &GridSpec::default()).unwrap();
        assert_eq!((r.allocation, r.objective), (Allocation::zero(), 0.0));
        let spec = GridSpec { points_per_axis: 10, refinement_rounds: 2, shrink_factor: 0.25 };
        let r = grid_search_ee(&ch, &link, &params, &spec).unwrap();
        assert_eq!((r.allocation, r.objective), (Allocation::zero(), 0.0));
    }

    #[test]
    fn symmetric_instance_is_swap_invariant() {
        // identical SISO interfaces: same gain, same cost, same cap
        let ch = Sub6Channel::from_singular_values(1, 1, &[1e5]).unwrap();
        let link = MmWaveLink::new(1e10).unwrap();
        let params = SystemParams::new(1.0, 1e-9, 1, 1, 1e7, 1e7).unwrap();
        let r = grid_search_sumrate(&ch, &link, &params, &GridSpec::default()).unwrap();
        let a = r.allocation;
        let swapped = Allocation { w_sub6: a.w_m, w_m: a.w_sub6, p_sub6: a.p_m, p_m: a.p_sub6 };
        let rs = evaluate(&swapped, &ch, &link, &params);
        assert!(rs.feasible);
        assert!((rs.rate_total - r.objective).abs() <= 1e-12 * r.objective);

        let spec = GridSpec { points_per_axis: 12, refinement_rounds: 3, shrink_factor: 0.25 };
        let r = grid_search_ee(&ch, &link, &params, &spec).unwrap();
        let a = r.allocation;
        let swapped = Allocation { w_sub6: a.w_m, w_m: a.w_sub6, p_sub6: a.p_m, p_m: a.p_sub6 };
        let rs = evaluate(&swapped, &ch, &link, &params);
        assert!((rs.ee - r.objective).abs() <= 1e-12 * r.objective);
    }

    #[test]
    fn rounds_never_lose_ground_and_points_are_feasible() {
        for seed in 0..5 {
            let ch = generate_rayleigh(4, 2, seed).unwrap().scaled(1e10);
            let link = MmWaveLink::rician(4, 2, 6.3e6, 10.0, seed).unwrap();
            let params = SystemParams::new(0.5, 1e-9, 4, 2, 1e6, 1e9).unwrap();
            let r = grid_search_sumrate(&ch, &link, &params, &GridSpec::default()).unwrap();
            assert!(r.round_objectives.windows(2).all(|w| w[1] >= w[0]));
            assert!(is_feasible(&r.allocation, &params));
            assert!(r.resolution_bound >= 0.0);
        }
    }
}
