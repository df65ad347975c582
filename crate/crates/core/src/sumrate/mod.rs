//! Sum-rate maximisation under a total power budget.
//!
//! [`solve`] evaluates a set of candidates and returns the best feasible one:
//! the two full-band closed forms, each single-interface optimum, the
//! low-SNR rule, and the exact numeric optimum over both interfaces. The
//! numeric optimum splits the budget between per-interface value functions;
//! each value function is concave, so the split is a monotone root find.

mod closed_form;
mod kkt;

pub use closed_form::ClosedFormConstants;
pub use kkt::{kkt_residuals_gains, ActiveCase, KktDiagnostics};

use crate::channel::{MmWaveLink, Sub6Channel};
use crate::eesolver::DinkelbachState;
use crate::error::Result;
use crate::interface::{split_budget, Bandwidth, Interface};
use crate::linkmodel::{evaluate_gains, Allocation, EvalReport, LinkGains, SystemParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolveMode {
    /// Every candidate.
    #[default]
    Auto,
    /// The two full-band closed forms only.
    HighSnr,
    /// The low-SNR rule only.
    LowSnr,
    /// The numeric optimum only.
    Numeric,
}

/// Where the returned allocation came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Candidate {
    FullSub6ClosedForm,
    FullMmWaveClosedForm,
    Sub6Only,
    MmWaveOnly,
    LowSnrRule,
    Numeric,
    /// Fallback when nothing else is feasible.
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnrRegime {
    High,
    Low,
    Mixed,
}

/// Per-interface SNR thresholds used to label a solution. These are
/// defaults, not derived values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnrThresholds {
    pub high: f64,
    pub low: f64,
}

impl Default for SnrThresholds {
    fn default() -> Self {
        Self { high: 10.0, low: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub allocation: Allocation,
    pub eval: EvalReport,
    pub kkt: KktDiagnostics,
    pub snr_regime: SnrRegime,
    pub source: Candidate,
    pub warnings: Vec<String>,
    /// Set by the energy-efficiency solver.
    pub dinkelbach: Option<DinkelbachState>,
}

/// `p * sum(g) / w` for each active interface.
fn post_hoc_snrs(alloc: &Allocation, gains: &LinkGains) -> Vec<f64> {
    let mut out = Vec::new();
    if alloc.sub6_active() {
        out.push(alloc.p_sub6 * gains.sub6_total() / alloc.w_sub6);
    }
    if alloc.mmwave_active() {
        out.push(alloc.p_m * gains.mmwave / alloc.w_m);
    }
    out
}

pub fn snr_regime(alloc: &Allocation, gains: &LinkGains, thresholds: &SnrThresholds) -> SnrRegime {
    let snrs = post_hoc_snrs(alloc, gains);
    if snrs.iter().all(|s| *s <= thresholds.low) {
        SnrRegime::Low
    } else if snrs.iter().all(|s| *s >= thresholds.high) {
        SnrRegime::High
    } else {
        SnrRegime::Mixed
    }
}

impl SolveReport {
    pub(crate) fn assemble(
        allocation: Allocation,
        gains: &LinkGains,
        params: &SystemParams,
        source: Candidate,
        warnings: Vec<String>,
        thresholds: &SnrThresholds,
    ) -> Self {
        Self {
            eval: evaluate_gains(&allocation, gains, params),
            kkt: kkt_residuals_gains(&allocation, gains, params),
            snr_regime: snr_regime(&allocation, gains, thresholds),
            allocation,
            source,
            warnings,
            dinkelbach: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Pattern {
    Both,
    Sub6Only,
    MmWaveOnly,
}

/// Exact optimum restricted to an activation pattern.
pub(crate) fn numeric_pattern(gains: &LinkGains, params: &SystemParams, pattern: Pattern) -> Allocation {
    let s_bw = match pattern {
        Pattern::MmWaveOnly => Bandwidth::Fixed(0.0),
        _ => Bandwidth::Free { cap: params.w_sub6_max },
    };
    let m_bw = match pattern {
        Pattern::Sub6Only => Bandwidth::Fixed(0.0),
        _ => Bandwidth::Free { cap: params.w_m_max },
    };
    let s = Interface::new(&gains.sub6, params.sub6_cost(), s_bw);
    let m = Interface::new(&[gains.mmwave], params.mmwave_cost(), m_bw);
    let (qs, qm) = split_budget(&s, &m, params.p_max).expect("free interfaces accept any budget");
    let (w_sub6, p_sub6) = s.allocate(qs);
    let (w_m, p_m) = m.allocate(qm);
    Allocation { w_sub6, w_m, p_sub6, p_m }
}

/// Closed form with the whole sub-6 band in use.
///
/// Returns an error when `a A` admits no real constant `B` (for example
/// `A = 0`). The result may be infeasible when the sub-6 component cost alone
/// exceeds the budget.
pub fn solve_case1(ch: &Sub6Channel, link: &MmWaveLink, params: &SystemParams) -> Result<Allocation> {
    closed_form::case1(&LinkGains::new(ch, link), params).map(|(a, _)| a)
}

/// Closed form with the whole mmWave band in use. Fails with
/// [`Error::RankDeficient`](crate::Error::RankDeficient) when any singular
/// value is zero.
pub fn solve_case2(ch: &Sub6Channel, link: &MmWaveLink, params: &SystemParams) -> Result<Allocation> {
    closed_form::case2(&LinkGains::new(ch, link), params).map(|(a, _)| a)
}

/// All transmit power on the interface with the better linearised slope.
pub fn solve_low_snr(ch: &Sub6Channel, link: &MmWaveLink, params: &SystemParams) -> Allocation {
    closed_form::low_snr(&LinkGains::new(ch, link), params)
}

/// Exact optimum over both interfaces.
pub fn solve_numeric(ch: &Sub6Channel, link: &MmWaveLink, params: &SystemParams) -> Allocation {
    numeric_pattern(&LinkGains::new(ch, link), params, Pattern::Both)
}

pub fn kkt_residuals(alloc: &Allocation, ch: &Sub6Channel, link: &MmWaveLink, params: &SystemParams) -> KktDiagnostics {
    kkt_residuals_gains(alloc, &LinkGains::new(ch, link), params)
}

/// Solves with the uniform sub-6 covariance and default thresholds.
///
/// ```
/// use bandalloc::channel::{MmWaveLink, Sub6Channel};
/// use bandalloc::linkmodel::SystemParams;
/// use bandalloc::sumrate::{solve, SolveMode};
///
/// let ch = Sub6Channel::from_singular_values(4, 2, &[0.0, 0.0]).unwrap();
/// let link = MmWaveLink::new(0.0).unwrap();
/// let params = SystemParams::default();
/// let report = solve(&ch, &link, &params, SolveMode::Auto);
/// assert_eq!(report.eval.rate_total, 0.0);
/// ```
pub fn solve(ch: &Sub6Channel, link: &MmWaveLink, params: &SystemParams, mode: SolveMode) -> SolveReport {
    solve_gains(&LinkGains::new(ch, link), params, mode, &SnrThresholds::default())
}

/// Solves against explicit per-mode gains.
pub fn solve_gains(gains: &LinkGains, params: &SystemParams, mode: SolveMode, thresholds: &SnrThresholds) -> SolveReport {
    let mut candidates: Vec<(Candidate, Allocation, Vec<String>)> = Vec::new();
    let mut notes = Vec::new();

    if matches!(mode, SolveMode::Auto | SolveMode::HighSnr) {
        match closed_form::case1(gains, params) {
            Ok((a, w)) => candidates.push((Candidate::FullSub6ClosedForm, a, w)),
            Err(e) => notes.push(format!("full sub-6 closed form skipped: {e}")),
        }
        match closed_form::case2(gains, params) {
            Ok((a, w)) => candidates.push((Candidate::FullMmWaveClosedForm, a, w)),
            Err(e) => notes.push(format!("full mmWave closed form skipped: {e}")),
        }
    }
    if matches!(mode, SolveMode::Auto | SolveMode::LowSnr) {
        candidates.push((Candidate::LowSnrRule, closed_form::low_snr(gains, params), Vec::new()));
    }
    if matches!(mode, SolveMode::Auto | SolveMode::Numeric) {
        candidates.push((Candidate::Sub6Only, numeric_pattern(gains, params, Pattern::Sub6Only), Vec::new()));
        candidates.push((Candidate::MmWaveOnly, numeric_pattern(gains, params, Pattern::MmWaveOnly), Vec::new()));
        candidates.push((Candidate::Numeric, numeric_pattern(gains, params, Pattern::Both), Vec::new()));
    }

    let mut best: Option<(Candidate, Allocation, Vec<String>, EvalReport)> = None;
    for (src, alloc, warns) in candidates {
        let ev = evaluate_gains(&alloc, gains, params);
        if !ev.feasible {
            continue;
        }
        let better = match &best {
            None => true,
            Some((_, b_alloc, _, b_ev)) => prefer(&alloc, &ev, b_alloc, b_ev),
        };
        if better {
            best = Some((src, alloc, warns, ev));
        }
    }

    let Some((source, allocation, mut warnings, ev)) = best else {
        let mut warnings = notes;
        warnings.push("no feasible candidate; returning the all-zero allocation".into());
        return SolveReport::assemble(Allocation::zero(), gains, params, Candidate::Zero, warnings, thresholds);
    };
    if ev.rate_total == 0.0 {
        warnings.push("no interface can carry a positive rate".into());
    }
    if matches!(mode, SolveMode::HighSnr | SolveMode::LowSnr) {
        warnings.extend(notes);
    }
    let report = SolveReport::assemble(allocation, gains, params, source, warnings, thresholds);
    let regime = report.snr_regime;
    let mut report = report;
    match source {
        Candidate::FullSub6ClosedForm | Candidate::FullMmWaveClosedForm if regime != SnrRegime::High => {
            report.warnings.push(format!("high-SNR closed form used in the {regime:?} regime"));
        }
        Candidate::LowSnrRule if regime != SnrRegime::Low => {
            report.warnings.push(format!("low-SNR rule used in the {regime:?} regime"));
        }
        _ => {}
    }
    report
}

/// Candidate order: larger rate; within 1e-9 relative, fewer active
/// interfaces, then sub-6 over mmWave; otherwise keep the incumbent.
fn prefer(a: &Allocation, a_ev: &EvalReport, b: &Allocation, b_ev: &EvalReport) -> bool {
    let scale = a_ev.rate_total.abs().max(b_ev.rate_total.abs());
    let diff = a_ev.rate_total - b_ev.rate_total;
    if diff.abs() > 1e-9 * scale {
        return diff > 0.0;
    }
    if a.active_count() != b.active_count() {
        return a.active_count() < b.active_count();
    }
    a.sub6_active() && !b.sub6_active()
}
