//! Pulse-input solvers.
//!
//! - [`solve_proper`]: bisection on the bolus magnitude until the response
//!   attains (but does not cross) the floor. The response minimum is a
//!   strictly decreasing function of the magnitude, so bisection is exact.
//! - [`optimize_delivery`]: for a fixed duration, bisection on the delivery
//!   time driven by the sign of the difference between the largest maximum
//!   before the first floor contact and the largest maximum after the last
//!   one; an equal pair is the fixed-duration optimality condition. Falls
//!   back to golden-section minimization of the peak when the window gives
//!   no sign change.
//! - [`optimize_duration`]: bracket the crossover duration between
//!   gamma-optimal (short) and lambda-optimal (long) responses, each
//!   candidate evaluated at its own optimal delivery time, and bisect.
//!   Terminates early when a candidate classifies as the globally optimal
//!   shape.
//! - [`optimize_duration_fixed_delivery`]: same bracket machinery with the
//!   delivery time pinned; case B (minimum before all peaks) plays the
//!   short side and case A (peaks before the minimum) the long side.
//! - [`optimize_global`]: duration optimization over the configured bounds;
//!   the returned input is the global optimum over all proper pulses.
//! - [`sweep_gamma`]: peak-vs-parameter curves behind the reproduction
//!   figures, evaluated in parallel.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{classify, Classification, ExtremumKind, ShapeReport, Tolerances};
use crate::error::{Error, Result};
use crate::integrate::{refine_extremum, simulate, SimConfig, Trajectory};
use crate::models::PulseInput;
use crate::scenario::Scenario;

/// Result of a proper-magnitude solve.
#[derive(Debug, Clone)]
pub struct ProperSolveResult {
    pub u_hat: f64,
    /// Response minimum achieved by `u_hat`; within `tol_floor` of the floor.
    pub achieved_min: f64,
    pub iterations: usize,
    pub trajectory: Trajectory,
}

/// One evaluated point of an optimizer run or sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepPoint {
    /// The swept or bisected parameter value (duration or delivery time).
    pub value: f64,
    pub gamma: f64,
    pub u_hat: f64,
    pub t_prime: f64,
    pub tau: f64,
    pub classification: Classification,
    /// Per-point failure, when the sweep continued past an error.
    pub error: Option<String>,
}

/// Result of a delivery/duration optimization.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizeResult {
    pub t_prime: f64,
    pub tau: f64,
    pub u_hat: f64,
    pub gamma: f64,
    pub classification: Classification,
    /// Every evaluated candidate, in evaluation order.
    pub sweep_log: Vec<SweepPoint>,
    /// Indices into `sweep_log` of successive lambda-side (upper bracket)
    /// updates of the duration bisection.
    pub lambda_side: Vec<usize>,
    /// Indices into `sweep_log` of successive gamma-side (lower bracket)
    /// updates.
    pub gamma_side: Vec<usize>,
}

/// Which parameter [`sweep_gamma`] walks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SweepParameter {
    /// Duration sweep; each point is evaluated at its own optimal delivery
    /// time.
    Tau,
    /// Delivery-time sweep at the given fixed duration.
    TPrime { tau: f64 },
}

/// Scenario plus precomputed run-invariant data for the solver loops.
struct Ctx<'a> {
    scenario: &'a Scenario,
    u_bar: f64,
    tol: Tolerances,
    /// Glucose trace of the zero-bolus response.
    zero: Trajectory,
    zero_min: f64,
    zero_max: f64,
}

/// One evaluated candidate response.
struct Eval {
    u_hat: f64,
    report: ShapeReport,
    trajectory: Trajectory,
}

impl<'a> Ctx<'a> {
    fn new(scenario: &'a Scenario) -> Result<Self> {
        scenario.validate()?;
        let u_bar = scenario.basal()?;
        let cfg = lean_config(&scenario.sim);
        let zero = simulate(
            &scenario.model,
            &PulseInput::basal_only(u_bar),
            &scenario.meal,
            &cfg,
        )?;
        let (zi, _) = zero.min_glucose();
        let (_, zero_min) = interior_refined(&zero, zi);
        let (xi, _) = zero.max_glucose();
        let (_, zero_max) = interior_refined(&zero, xi);
        Ok(Self { scenario, u_bar, tol: scenario.tolerances, zero, zero_min, zero_max })
    }

    /// Zero-bolus glucose at time `t` (linear interpolation).
    fn zero_glucose_at(&self, t: f64) -> f64 {
        let times = &self.zero.times;
        match times.binary_search_by(|x| x.total_cmp(&t)) {
            Ok(i) => self.zero.glucose[i],
            Err(0) => self.zero.glucose[0],
            Err(i) if i >= times.len() => *self.zero.glucose.last().unwrap(),
            Err(i) => {
                let (t0, t1) = (times[i - 1], times[i]);
                let (g0, g1) = (self.zero.glucose[i - 1], self.zero.glucose[i]);
                g0 + (g1 - g0) * (t - t0) / (t1 - t0)
            }
        }
    }

    fn sim(&self, u_hat: f64, t_prime: f64, tau: f64) -> Result<Trajectory> {
        let input = PulseInput::new(self.u_bar, u_hat, t_prime, tau);
        simulate(&self.scenario.model, &input, &self.scenario.meal, &lean_config(&self.scenario.sim))
    }

    /// Response minimum for a magnitude; simulation failures (overdose
    /// driving the model out of its domain) count as having crossed the
    /// floor hard.
    fn response_min(&self, u_hat: f64, t_prime: f64, tau: f64) -> Result<Option<f64>> {
        match self.sim(u_hat, t_prime, tau) {
            Ok(traj) => {
                let (i, _) = traj.min_glucose();
                Ok(Some(interior_refined(&traj, i).1))
            }
            Err(Error::DomainError(_)) | Err(Error::NumericalError(_)) => Ok(None),
            Err(e) => Err(e),
        }
    }

    /// Proper magnitude at `(t_prime, tau)` by bisection, with an optional
    /// warm-start magnitude from a neighboring solve.
    fn solve_proper(&self, t_prime: f64, tau: f64, hint: Option<f64>) -> Result<ProperSolveResult> {
        let lambda = self.scenario.lambda;
        let tol = &self.tol;
        let cap = self.scenario.solver.max_iterations;
        if lambda > self.zero_glucose_at(t_prime) + tol.tol_floor {
            return Err(Error::InfeasibleFloor(format!(
                "lambda = {lambda} exceeds g(t' = {t_prime}) = {:.6} of the bolus-free response",
                self.zero_glucose_at(t_prime)
            )));
        }
        if self.zero_min < lambda - tol.tol_floor {
            return Err(Error::NoFloorContact(format!(
                "zero-bolus response already dips to {:.6} below lambda = {lambda}",
                self.zero_min
            )));
        }
        let target = 0.5 * tol.tol_floor;
        if (self.zero_min - lambda).abs() <= target {
            let trajectory = self.sim(0.0, t_prime, tau)?;
            return Ok(ProperSolveResult {
                u_hat: 0.0,
                achieved_min: self.zero_min,
                iterations: 0,
                trajectory,
            });
        }

        let mut iterations = 0usize;
        // Establish [lo, hi] with min(lo) > lambda, min(hi) < lambda.
        let mut lo = 0.0_f64;
        let mut lo_min = self.zero_min;
        let mut hi;
        let hi_min;
        let seed = hint.filter(|h| h.is_finite() && *h > 0.0);
        match seed {
            Some(h) => {
                hi = h;
                loop {
                    iterations += 1;
                    if iterations > cap {
                        return Err(Error::IterationLimit(format!(
                            "bracketing the proper magnitude at t' = {t_prime}, tau = {tau}"
                        )));
                    }
                    match self.response_min(hi, t_prime, tau)? {
                        Some(m) if m > lambda => {
                            lo = hi;
                            lo_min = m;
                            hi *= 2.0;
                        }
                        Some(m) => {
                            hi_min = Some(m);
                            break;
                        }
                        None => {
                            hi_min = None;
                            break;
                        }
                    }
                }
            }
            None => {
                hi = self.u_bar.max(1.0);
                loop {
                    iterations += 1;
                    if iterations > cap {
                        return Err(Error::IterationLimit(format!(
                            "bracketing the proper magnitude at t' = {t_prime}, tau = {tau}"
                        )));
                    }
                    match self.response_min(hi, t_prime, tau)? {
                        Some(m) if m > lambda => {
                            lo = hi;
                            lo_min = m;
                            hi *= 2.0;
                        }
                        Some(m) => {
                            hi_min = Some(m);
                            break;
                        }
                        None => {
                            hi_min = None;
                            break;
                        }
                    }
                }
            }
        }

        // Bisect to the floor.
        let mut best = match hi_min {
            Some(m) if (m - lambda).abs() <= (lo_min - lambda).abs() => (hi, m),
            _ => (lo, lo_min),
        };
        loop {
            iterations += 1;
            if iterations > cap {
                break;
            }
            let mid = 0.5 * (lo + hi);
            let m = self.response_min(mid, t_prime, tau)?;
            match m {
                Some(m) => {
                    if (m - lambda).abs() < (best.1 - lambda).abs() {
                        best = (mid, m);
                    }
                    if (m - lambda).abs() <= target {
                        break;
                    }
                    if m > lambda {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                None => hi = mid,
            }
            if hi - lo <= 1e-12 * hi.max(1.0) {
                break;
            }
        }
        let (u_hat, achieved_min) = best;
        if (achieved_min - lambda).abs() > tol.tol_floor {
            return Err(Error::IterationLimit(format!(
                "proper solve stalled at min g = {achieved_min:.6} (lambda = {lambda}) \
                 for t' = {t_prime}, tau = {tau}"
            )));
        }
        let trajectory = self.sim(u_hat, t_prime, tau)?;
        Ok(ProperSolveResult { u_hat, achieved_min, iterations, trajectory })
    }

    /// Proper solve plus shape classification.
    fn evaluate(&self, t_prime: f64, tau: f64, hint: Option<f64>) -> Result<Eval> {
        let solved = self.solve_proper(t_prime, tau, hint)?;
        let report = classify(&solved.trajectory, self.scenario.lambda, &self.tol);
        Ok(Eval { u_hat: solved.u_hat, report, trajectory: solved.trajectory })
    }

    /// Balance function for the delivery bisection: largest maximum before
    /// the first floor contact minus largest maximum after the last one
    /// (trajectory endpoints count as shoulder candidates). Increasing in
    /// the delivery time: late delivery leaves the early rise unsuppressed.
    fn balance(&self, eval: &Eval) -> Option<f64> {
        let report = &eval.report;
        let traj = &eval.trajectory;
        if report.lambda_attained.is_empty() {
            return None;
        }
        let first = report.lambda_attained.iter().copied().fold(f64::INFINITY, f64::min);
        let last = report.lambda_attained.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut pre = traj.glucose[0];
        let mut post = *traj.glucose.last().unwrap();
        for e in &report.extrema {
            if e.boundary || e.kind != ExtremumKind::Max {
                continue;
            }
            if e.time < first {
                pre = pre.max(e.value);
            }
            if e.time > last {
                post = post.max(e.value);
            }
        }
        Some(pre - post)
    }
}

fn lean_config(sim: &SimConfig) -> SimConfig {
    SimConfig { record_states: false, ..sim.clone() }
}

/// Refined extremum value at a sample index (raw value at the boundary).
fn interior_refined(traj: &Trajectory, i: usize) -> (f64, f64) {
    if i == 0 || i + 1 >= traj.len() {
        (traj.times[i], traj.glucose[i])
    } else {
        refine_extremum(traj, i)
    }
}

fn point(value: f64, eval: &Eval, t_prime: f64, tau: f64) -> SweepPoint {
    SweepPoint {
        value,
        gamma: eval.report.gamma,
        u_hat: eval.u_hat,
        t_prime,
        tau,
        classification: eval.report.classification,
        error: None,
    }
}

fn error_point(value: f64, t_prime: f64, tau: f64, err: &Error) -> SweepPoint {
    SweepPoint {
        value,
        gamma: f64::NAN,
        u_hat: f64::NAN,
        t_prime,
        tau,
        classification: Classification::Indeterminate,
        error: Some(err.to_string()),
    }
}

/// Find the bolus magnitude whose response attains but does not cross the
/// floor, for a fixed delivery time and duration.
pub fn solve_proper(scenario: &Scenario, t_prime: f64, tau: f64) -> Result<ProperSolveResult> {
    let ctx = Ctx::new(scenario)?;
    let mut result = ctx.solve_proper(t_prime, tau, None)?;
    // Re-run the returned trajectory with full state recording.
    let input = PulseInput::new(ctx.u_bar, result.u_hat, t_prime, tau);
    result.trajectory = simulate(&scenario.model, &input, &scenario.meal, &scenario.sim)?;
    Ok(result)
}

/// Optimal delivery time for a fixed duration over the window
/// `[t_lo, t_hi]`.
pub fn optimize_delivery(
    scenario: &Scenario,
    tau: f64,
    t_lo: f64,
    t_hi: f64,
) -> Result<OptimizeResult> {
    let ctx = Ctx::new(scenario)?;
    let (res, _) = optimize_delivery_inner(&ctx, tau, t_lo, t_hi, None)?;
    Ok(res)
}

fn optimize_delivery_inner(
    ctx: &Ctx<'_>,
    tau: f64,
    t_lo: f64,
    t_hi: f64,
    hint: Option<f64>,
) -> Result<(OptimizeResult, Eval)> {
    let cap = ctx.scenario.solver.max_iterations;
    let tol_t = ctx.tol.tol_delivery;
    let mut log = Vec::new();
    let mut last_u = hint;

    let mut eval_at = |t: f64, log: &mut Vec<SweepPoint>| -> Result<Eval> {
        let ev = ctx.evaluate(t, tau, last_u)?;
        last_u = Some(ev.u_hat);
        log.push(point(t, &ev, t, tau));
        Ok(ev)
    };

    let ev_lo = eval_at(t_lo, &mut log)?;
    let ev_hi = eval_at(t_hi, &mut log)?;
    let d_lo = ctx.balance(&ev_lo);
    let d_hi = ctx.balance(&ev_hi);

    let bisectable = matches!((d_lo, d_hi), (Some(a), Some(b)) if a.signum() != b.signum());
    let mut final_eval;
    let mut final_t;
    if bisectable {
        let (mut lo, mut hi) = (t_lo, t_hi);
        let lo_sign = d_lo.unwrap().signum();
        let mut best: Option<(f64, Eval, f64)> = None; // (|D|, eval, t)
        let mut iters = 0;
        while hi - lo > tol_t {
            iters += 1;
            if iters > cap {
                return Err(Error::IterationLimit(format!(
                    "delivery bisection at tau = {tau} did not reach {tol_t} min"
                )));
            }
            let mid = 0.5 * (lo + hi);
            let ev = eval_at(mid, &mut log)?;
            match ctx.balance(&ev) {
                Some(d) => {
                    if d.signum() == lo_sign {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    let score = d.abs();
                    if best.as_ref().is_none_or(|(s, _, _)| score < *s) {
                        best = Some((score, ev, mid));
                    }
                }
                // No floor contact reported: treat as the early side.
                None => lo = mid,
            }
        }
        match best {
            Some((_, ev, t)) => {
                final_eval = ev;
                final_t = t;
            }
            None => {
                let mid = 0.5 * (lo + hi);
                final_eval = eval_at(mid, &mut log)?;
                final_t = mid;
            }
        }
        // Near the duration crossover the balance condition parks at a
        // floor-contact regime boundary that need not minimize the peak;
        // polish with a local direct search around the balance point.
        let mut width = (16.0 * tol_t).max(4.0);
        loop {
            let (a, b) = ((final_t - width).max(t_lo), (final_t + width).min(t_hi));
            let (t, ev) = golden_min(&mut eval_at, &mut log, a, b, tol_t, cap, tau)?;
            if ev.report.gamma < final_eval.report.gamma {
                final_eval = ev;
                final_t = t;
            }
            let at_edge = (final_t - a) <= tol_t || (b - final_t) <= tol_t;
            let can_grow = a > t_lo || b < t_hi;
            if at_edge && can_grow && width < (t_hi - t_lo) {
                width *= 4.0;
            } else {
                break;
            }
        }
    } else {
        // Golden-section minimization of the peak over the whole window.
        let (t, ev) = golden_min(&mut eval_at, &mut log, t_lo, t_hi, tol_t, cap, tau)?;
        final_t = t;
        final_eval = ev;
        // A minimum pinned to the window edge means the window missed it.
        let edge = tol_t.max(1e-9);
        if (final_t - t_lo) <= edge || (t_hi - final_t) <= edge {
            let better_than_edges = final_eval.report.gamma
                < ev_lo.report.gamma.min(ev_hi.report.gamma) - 1e-12;
            if !better_than_edges {
                return Err(Error::WindowTooNarrow(format!(
                    "no interior optimum for tau = {tau} in [{t_lo}, {t_hi}] \
                     (no maxima-balance sign change, peak minimized at the edge)"
                )));
            }
        }
    }

    let result = OptimizeResult {
        t_prime: final_t,
        tau,
        u_hat: final_eval.u_hat,
        gamma: final_eval.report.gamma,
        classification: final_eval.report.classification,
        sweep_log: log,
        lambda_side: Vec::new(),
        gamma_side: Vec::new(),
    };
    Ok((result, final_eval))
}

/// Golden-section minimization of the peak over a delivery-time interval.
/// The peak is the maximum of finitely many single-crossing branches, so it
/// is unimodal in the delivery time up to solver noise.
fn golden_min(
    eval_at: &mut impl FnMut(f64, &mut Vec<SweepPoint>) -> Result<Eval>,
    log: &mut Vec<SweepPoint>,
    t_lo: f64,
    t_hi: f64,
    tol_t: f64,
    cap: usize,
    tau: f64,
) -> Result<(f64, Eval)> {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let (mut a, mut b) = (t_lo, t_hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut ev_c = eval_at(c, log)?;
    let mut ev_d = eval_at(d, log)?;
    let mut iters = 0;
    while (b - a) > tol_t {
        iters += 1;
        if iters > cap {
            return Err(Error::IterationLimit(format!(
                "golden-section delivery search at tau = {tau}"
            )));
        }
        if ev_c.report.gamma <= ev_d.report.gamma {
            b = d;
            d = c;
            ev_d = ev_c;
            c = b - INV_PHI * (b - a);
            ev_c = eval_at(c, log)?;
        } else {
            a = c;
            c = d;
            ev_c = ev_d;
            d = a + INV_PHI * (b - a);
            ev_d = eval_at(d, log)?;
        }
    }
    if ev_c.report.gamma <= ev_d.report.gamma {
        Ok((c, ev_c))
    } else {
        Ok((d, ev_d))
    }
}

/// The duration side a classification belongs to in the bracket loop.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Side {
    /// Lower bracket side (short durations; peak improves by lengthening).
    Short,
    /// Upper bracket side (long durations; peak improves by shortening).
    Long,
    /// Terminal: cannot be improved.
    Done,
    Unknown,
}

fn duration_side(class: Classification) -> Side {
    match class {
        Classification::GloballyOptimalShape => Side::Done,
        Classification::GammaOptimal => Side::Short,
        Classification::LambdaOptimal => Side::Long,
        _ => Side::Unknown,
    }
}

/// Fixed-delivery variant: case B responses (floor contact before every
/// peak) behave like the short side and case A (every peak before the
/// floor contact) like the long side; a response that is lambda- or
/// gamma-optimal at the fixed delivery time cannot be improved at all.
fn fixed_delivery_side(class: Classification) -> Side {
    match class {
        Classification::CaseB => Side::Short,
        Classification::CaseA => Side::Long,
        Classification::GloballyOptimalShape
        | Classification::LambdaOptimal
        | Classification::GammaOptimal => Side::Done,
        _ => Side::Unknown,
    }
}

struct DurationSearch<'a, 'b> {
    ctx: &'a Ctx<'b>,
    side_of: fn(Classification) -> Side,
    /// Evaluate a candidate duration: (t', eval).
    log: Vec<SweepPoint>,
    lambda_side: Vec<usize>,
    gamma_side: Vec<usize>,
}

impl<'a, 'b> DurationSearch<'a, 'b> {
    fn result_from(&mut self, tau: f64, t_prime: f64, eval: &Eval) -> OptimizeResult {
        OptimizeResult {
            t_prime,
            tau,
            u_hat: eval.u_hat,
            gamma: eval.report.gamma,
            classification: eval.report.classification,
            sweep_log: std::mem::take(&mut self.log),
            lambda_side: std::mem::take(&mut self.lambda_side),
            gamma_side: std::mem::take(&mut self.gamma_side),
        }
    }
}

fn optimize_duration_impl(
    scenario: &Scenario,
    tau_lo: f64,
    tau_hi: f64,
    fixed_t: Option<f64>,
) -> Result<OptimizeResult> {
    let ctx = Ctx::new(scenario)?;
    let tol = ctx.tol;
    let cap = scenario.solver.max_iterations;
    let (w_lo, w_hi) = scenario.delivery_window();

    // The peak can only be lowered if the disturbance raises it above the
    // steady state in the first place.
    if ctx.zero_max <= scenario.g0 + 10.0 * tol.tol_floor {
        return Err(Error::PreconditionFailed(format!(
            "bolus-free response never exceeds g0 = {} (max {:.6}); nothing to optimize",
            scenario.g0, ctx.zero_max
        )));
    }

    let side_of: fn(Classification) -> Side =
        if fixed_t.is_some() { fixed_delivery_side } else { duration_side };
    let mut search = DurationSearch { ctx: &ctx, side_of, log: Vec::new(), lambda_side: Vec::new(), gamma_side: Vec::new() };

    // Evaluate one duration, at its own optimal delivery time or at the
    // fixed one; records the sweep point.
    let mut u_hint: Option<f64> = None;
    let mut eval_tau = |search: &mut DurationSearch, tau: f64| -> Result<(f64, Eval)> {
        match fixed_t {
            Some(t) => {
                let ev = search.ctx.evaluate(t, tau, u_hint)?;
                u_hint = Some(ev.u_hat);
                search.log.push(point(tau, &ev, t, tau));
                Ok((t, ev))
            }
            None => {
                let (res, ev) = optimize_delivery_inner(search.ctx, tau, w_lo, w_hi, u_hint)?;
                u_hint = Some(ev.u_hat);
                search.log.push(point(tau, &ev, res.t_prime, tau));
                Ok((res.t_prime, ev))
            }
        }
    };

    // Step 1: the shortest admissible duration. If it already sits on the
    // long side (or is terminal) it is the optimum: every longer duration
    // on that side is worse, and no short-side duration exists below it.
    let (t0, ev0) = eval_tau(&mut search, tau_lo)?;
    match (search.side_of)(ev0.report.classification) {
        Side::Done | Side::Long => {
            let idx = search.log.len() - 1;
            search.lambda_side.push(idx);
            return Ok(search.result_from(tau_lo, t0, &ev0));
        }
        Side::Short => {
            search.gamma_side.push(search.log.len() - 1);
        }
        Side::Unknown => {}
    }

    // Step 2: seed the bracket from the probe grid, then grow geometrically
    // until the long side appears.
    let mut sigma: Option<(f64, f64, Eval)> = match (search.side_of)(ev0.report.classification) {
        Side::Short => Some((tau_lo, t0, ev0)),
        _ => None,
    };
    let mut alpha: Option<(f64, f64, Eval)> = None;
    let mut seeds: Vec<f64> = scenario
        .solver
        .seed_durations
        .iter()
        .copied()
        .filter(|&t| t > tau_lo && t <= tau_hi)
        .collect();
    seeds.sort_by(f64::total_cmp);
    for tau in seeds {
        let (tp, ev) = eval_tau(&mut search, tau)?;
        match (search.side_of)(ev.report.classification) {
            Side::Done => {
                let idx = search.log.len() - 1;
                search.lambda_side.push(idx);
                return Ok(search.result_from(tau, tp, &ev));
            }
            Side::Short => {
                search.gamma_side.push(search.log.len() - 1);
                sigma = Some((tau, tp, ev));
            }
            Side::Long => {
                search.lambda_side.push(search.log.len() - 1);
                alpha = Some((tau, tp, ev));
                break;
            }
            Side::Unknown => {}
        }
    }
    if alpha.is_none() {
        // Step 2b: grow the duration until the long side appears.
        let mut tau = scenario
            .solver
            .seed_durations
            .iter()
            .copied()
            .fold(tau_lo.max(2.0), f64::max)
            * 2.0;
        let mut iters = 0;
        while tau <= tau_hi {
            iters += 1;
            if iters > cap {
                break;
            }
            let (tp, ev) = eval_tau(&mut search, tau)?;
            match (search.side_of)(ev.report.classification) {
                Side::Done => {
                    let idx = search.log.len() - 1;
                    search.lambda_side.push(idx);
                    return Ok(search.result_from(tau, tp, &ev));
                }
                Side::Short => {
                    search.gamma_side.push(search.log.len() - 1);
                    sigma = Some((tau, tp, ev));
                }
                Side::Long => {
                    search.lambda_side.push(search.log.len() - 1);
                    alpha = Some((tau, tp, ev));
                    break;
                }
                Side::Unknown => {}
            }
            tau *= 2.0;
        }
    }

    let Some(mut alpha) = alpha else {
        return Err(Error::NoGammaOptimalFound(format!(
            "no duration in ({tau_lo}, {tau_hi}] classified on the long (lambda/case-A) side; \
             the bracket cannot be established"
        )));
    };
    // Without any short-side point the bracket starts at the lower bound.
    let mut sigma_tau = sigma.as_ref().map(|(t, _, _)| *t).unwrap_or(tau_lo);

    // Step 3: bisect the bracket. After it is tighter than tol_tau, keep
    // refining a few more steps to let the terminal shape emerge.
    let mut refine_left = 18usize;
    let mut iters = 0usize;
    loop {
        let width = alpha.0 - sigma_tau;
        if width <= tol.tol_tau {
            if refine_left == 0 {
                break;
            }
            refine_left -= 1;
        }
        iters += 1;
        if iters > cap {
            break;
        }
        // Candidate list: the midpoint, then off-center resamples when a
        // candidate cannot be classified to either side.
        let mut advanced = false;
        for frac in [0.5, 0.375, 0.625, 0.25, 0.75] {
            let tau = sigma_tau + frac * width;
            if tau <= sigma_tau || tau >= alpha.0 {
                continue;
            }
            let (tp, ev) = eval_tau(&mut search, tau)?;
            match (search.side_of)(ev.report.classification) {
                Side::Done => {
                    let idx = search.log.len() - 1;
                    search.lambda_side.push(idx);
                    return Ok(search.result_from(tau, tp, &ev));
                }
                Side::Short => {
                    search.gamma_side.push(search.log.len() - 1);
                    sigma_tau = tau;
                    sigma = Some((tau, tp, ev));
                    advanced = true;
                    break;
                }
                Side::Long => {
                    search.lambda_side.push(search.log.len() - 1);
                    alpha = (tau, tp, ev);
                    advanced = true;
                    break;
                }
                Side::Unknown => {}
            }
        }
        if !advanced {
            if fixed_t.is_some() {
                return Err(Error::ClassificationAmbiguous(format!(
                    "no resample in ({sigma_tau}, {}) classified as case A or B",
                    alpha.0
                )));
            }
            break;
        }
    }

    // Tolerance-limited: return the bracket endpoint with the smaller peak.
    let best = match sigma {
        Some(s) if s.2.report.gamma < alpha.2.report.gamma => s,
        _ => alpha,
    };
    Ok(search.result_from(best.0, best.1, &best.2))
}

/// Optimal duration with per-duration optimal delivery time.
pub fn optimize_duration(scenario: &Scenario, tau_lo: f64, tau_hi: f64) -> Result<OptimizeResult> {
    optimize_duration_impl(scenario, tau_lo, tau_hi, None)
}

/// Optimal duration for a fixed delivery time.
pub fn optimize_duration_fixed_delivery(
    scenario: &Scenario,
    t_prime: f64,
    tau_lo: f64,
    tau_hi: f64,
) -> Result<OptimizeResult> {
    optimize_duration_impl(scenario, tau_lo, tau_hi, Some(t_prime))
}

/// Globally optimal pulse over the scenario's configured bounds.
pub fn optimize_global(scenario: &Scenario) -> Result<OptimizeResult> {
    optimize_duration(scenario, scenario.solver.tau_lo, scenario.solver.tau_hi)
}

/// Peak-vs-parameter sweep. Duration points are evaluated at their own
/// optimal delivery times; delivery points at the given fixed duration.
/// Per-point failures are recorded and the sweep continues.
pub fn sweep_gamma(
    scenario: &Scenario,
    parameter: SweepParameter,
    grid: &[f64],
) -> Result<Vec<SweepPoint>> {
    let ctx = Ctx::new(scenario)?;
    let (w_lo, w_hi) = scenario.delivery_window();
    let points: Vec<SweepPoint> = grid
        .par_iter()
        .map(|&value| match parameter {
            SweepParameter::Tau => {
                match optimize_delivery_inner(&ctx, value, w_lo, w_hi, None) {
                    Ok((res, ev)) => point(value, &ev, res.t_prime, value),
                    Err(e) => error_point(value, f64::NAN, value, &e),
                }
            }
            SweepParameter::TPrime { tau } => match ctx.evaluate(value, tau, None) {
                Ok(ev) => point(value, &ev, value, tau),
                Err(e) => error_point(value, value, tau, &e),
            },
        })
        .collect();
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::Scenario;

    fn bergman() -> Scenario {
        Scenario::bergman_paper()
    }

    #[test]
    fn proper_solve_zero_magnitude_at_zero_response_min() {
        // Floor equal to the minimum of the zero-bolus response (= g0 for a
        // meal-only run, attained at t = 0): u_hat = 0.
        let mut scn = bergman();
        scn.lambda = scn.g0 - 1e-9;
        // Validation requires lambda < g0 strictly; the tiny gap is within
        // the solver's floor tolerance, so the zero magnitude satisfies it.
        let res = solve_proper(&scn, 300.0, 100.0).unwrap();
        assert_eq!(res.u_hat, 0.0);
    }

    #[test]
    fn proper_solve_hits_floor_within_tolerance() {
        let scn = bergman();
        let res = solve_proper(&scn, 300.0, 370.0).unwrap();
        assert!(res.u_hat > 0.0);
        assert!(
            (res.achieved_min - 4.0).abs() <= scn.tolerances.tol_floor,
            "achieved min {}",
            res.achieved_min
        );
        assert!(res.iterations <= 60, "used {} iterations", res.iterations);
    }

    #[test]
    fn proper_solve_iterations_shrink_with_looser_tolerance() {
        let scn = bergman();
        let tight = solve_proper(&scn, 300.0, 370.0).unwrap();
        let mut loose_scn = bergman();
        loose_scn.tolerances.tol_floor *= 2.0;
        let loose = solve_proper(&loose_scn, 300.0, 370.0).unwrap();
        assert!(
            loose.iterations <= tight.iterations,
            "loose {} > tight {}",
            loose.iterations,
            tight.iterations
        );
    }

    #[test]
    fn proper_solve_rejects_floor_above_g0() {
        let mut scn = bergman();
        scn.lambda = 6.0;
        assert!(solve_proper(&scn, 300.0, 100.0).is_err());
    }

    #[test]
    fn no_meal_scenario_fails_precondition() {
        let mut scn = bergman();
        scn.meal.pulses.clear();
        let err = optimize_duration(&scn, 0.0, 1000.0).unwrap_err();
        assert!(matches!(err, Error::PreconditionFailed(_)), "got {err:?}");
    }
}
