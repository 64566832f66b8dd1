//! Trajectory shape analysis: extrema extraction, response classification
//! and diagnostic counts.
//!
//! Classification vocabulary (for a proper response with floor `lambda`):
//!
//! - `LambdaOptimal`: the global maximum lies strictly between two
//!   floor-attaining minima.
//! - `GammaOptimal`: every floor-attaining minimum lies between two maxima
//!   equal to the global maximum.
//! - `GloballyOptimalShape`: at least two equal global maxima interlaced
//!   with at least two floor-attaining minima (neither set entirely to one
//!   side of the other).
//! - `CaseA` / `CaseB`: no global maximum after / before a global minimum.
//! - `Improper`: the response dips below the floor.
//!
//! Exact equality of maxima or exact floor attainment is measure-zero
//! numerically, so equality is decided by the relative tolerance
//! `tol_equal_max` and floor attainment by the absolute `tol_floor`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrate::{refine_extremum, Trajectory};
use crate::models::GlucoseModel;

/// A local extremum of the glucose trace, refined to sub-grid accuracy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extremum {
    pub time: f64,
    pub value: f64,
    pub kind: ExtremumKind,
    /// True for the trajectory endpoints, which are reported but do not
    /// count as interior maxima/minima for shape decisions.
    pub boundary: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExtremumKind {
    Max,
    Min,
}

/// Analysis tolerances. All positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Absolute floor-attainment tolerance (mmol/L).
    pub tol_floor: f64,
    /// Relative tolerance for equality of maxima.
    pub tol_equal_max: f64,
    /// Minimum prominence for an interior extremum (mmol/L).
    pub tol_extremum: f64,
    /// Duration bracket width at which the duration optimizer stops (min).
    pub tol_tau: f64,
    /// Delivery-time resolution of the inner bisection (min).
    pub tol_delivery: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            tol_floor: 1e-4,
            tol_equal_max: 1e-3,
            tol_extremum: 1e-5,
            tol_tau: 1.0,
            tol_delivery: 0.02,
        }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("tol_floor", self.tol_floor),
            ("tol_equal_max", self.tol_equal_max),
            ("tol_extremum", self.tol_extremum),
            ("tol_tau", self.tol_tau),
            ("tol_delivery", self.tol_delivery),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidScenario(format!(
                    "tolerance {name} must be finite and > 0, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Shape classification labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    LambdaOptimal,
    GammaOptimal,
    CaseA,
    CaseB,
    GloballyOptimalShape,
    Improper,
    Indeterminate,
}

impl std::fmt::Display for Classification {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Classification::LambdaOptimal => "lambda-optimal",
            Classification::GammaOptimal => "gamma-optimal",
            Classification::CaseA => "case-a",
            Classification::CaseB => "case-b",
            Classification::GloballyOptimalShape => "globally-optimal-shape",
            Classification::Improper => "improper",
            Classification::Indeterminate => "indeterminate",
        };
        f.write_str(s)
    }
}

/// Shape analysis of one response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeReport {
    pub extrema: Vec<Extremum>,
    /// Global maximum of the response (over extrema and endpoints).
    pub gamma: f64,
    /// Time of the global maximum.
    pub gamma_time: f64,
    /// Global minimum of the response.
    pub min_glucose: f64,
    /// Times where the response attains the floor within `tol_floor`.
    pub lambda_attained: Vec<f64>,
    pub classification: Classification,
}

impl ShapeReport {
    /// Interior maxima equal to gamma within `tol_equal_max` (relative).
    pub fn gamma_maxima(&self, tol: &Tolerances) -> Vec<&Extremum> {
        self.extrema
            .iter()
            .filter(|e| {
                !e.boundary
                    && e.kind == ExtremumKind::Max
                    && e.value >= self.gamma * (1.0 - tol.tol_equal_max)
            })
            .collect()
    }

    /// Interior minima attaining the global minimum within `tol_floor`.
    pub fn floor_minima(&self, tol: &Tolerances) -> Vec<&Extremum> {
        self.extrema
            .iter()
            .filter(|e| {
                !e.boundary
                    && e.kind == ExtremumKind::Min
                    && e.value <= self.min_glucose + tol.tol_floor
            })
            .collect()
    }
}

/// Extract alternating local extrema of the glucose trace with prominence
/// at least `tol_extremum`, refined through three-point parabolas; the
/// endpoints are appended as boundary extrema.
pub fn find_extrema(traj: &Trajectory, tol: &Tolerances) -> Vec<Extremum> {
    let g = &traj.glucose;
    let n = g.len();
    let mut out: Vec<Extremum> = Vec::new();
    if n == 0 {
        return out;
    }
    if n == 1 {
        out.push(Extremum {
            time: traj.times[0],
            value: g[0],
            kind: ExtremumKind::Max,
            boundary: true,
        });
        return out;
    }

    let delta = tol.tol_extremum;
    let mut mx = g[0];
    let mut mn = g[0];
    let mut mx_i = 0usize;
    let mut mn_i = 0usize;
    // None until the first move larger than delta decides the direction.
    let mut looking_for_max: Option<bool> = None;
    let mut raw: Vec<(usize, ExtremumKind)> = Vec::new();

    for i in 1..n {
        let v = g[i];
        if v > mx {
            mx = v;
            mx_i = i;
        }
        if v < mn {
            mn = v;
            mn_i = i;
        }
        match looking_for_max {
            None => {
                if v < mx - delta {
                    raw.push((mx_i, ExtremumKind::Max));
                    mn = v;
                    mn_i = i;
                    looking_for_max = Some(false);
                } else if v > mn + delta {
                    raw.push((mn_i, ExtremumKind::Min));
                    mx = v;
                    mx_i = i;
                    looking_for_max = Some(true);
                }
            }
            Some(true) => {
                if v < mx - delta {
                    raw.push((mx_i, ExtremumKind::Max));
                    mn = v;
                    mn_i = i;
                    looking_for_max = Some(false);
                }
            }
            Some(false) => {
                if v > mn + delta {
                    raw.push((mn_i, ExtremumKind::Min));
                    mx = v;
                    mx_i = i;
                    looking_for_max = Some(true);
                }
            }
        }
    }

    for (idx, kind) in raw {
        let boundary = idx == 0 || idx == n - 1;
        let (time, value) =
            if boundary { (traj.times[idx], g[idx]) } else { refine_extremum(traj, idx) };
        out.push(Extremum { time, value, kind, boundary });
    }

    // Attach the endpoints when the scan did not already claim them.
    let start_claimed = out.first().is_some_and(|e| e.time == traj.times[0]);
    if !start_claimed {
        let kind = match out.first() {
            Some(e) => match e.kind {
                ExtremumKind::Max => ExtremumKind::Min,
                ExtremumKind::Min => ExtremumKind::Max,
            },
            // Monotone trace: the start is a minimum iff the trace rises.
            None => {
                if g[n - 1] >= g[0] {
                    ExtremumKind::Min
                } else {
                    ExtremumKind::Max
                }
            }
        };
        out.insert(
            0,
            Extremum { time: traj.times[0], value: g[0], kind, boundary: true },
        );
    }
    let end_claimed = out.last().is_some_and(|e| e.time == traj.times[n - 1]);
    if !end_claimed {
        let kind = match out.last() {
            Some(e) => match e.kind {
                ExtremumKind::Max => ExtremumKind::Min,
                ExtremumKind::Min => ExtremumKind::Max,
            },
            None => ExtremumKind::Max,
        };
        out.push(Extremum { time: traj.times[n - 1], value: g[n - 1], kind, boundary: true });
    }

    // Enforce alternation: merge adjacent same-kind extrema, keeping the
    // more extreme one.
    let mut merged: Vec<Extremum> = Vec::with_capacity(out.len());
    for e in out {
        match merged.last_mut() {
            Some(last) if last.kind == e.kind => {
                let keep_new = match e.kind {
                    ExtremumKind::Max => e.value > last.value,
                    ExtremumKind::Min => e.value < last.value,
                };
                if keep_new {
                    *last = e;
                }
            }
            _ => merged.push(e),
        }
    }
    merged
}

/// Classify a response shape against the floor `lambda`.
pub fn classify(traj: &Trajectory, lambda: f64, tol: &Tolerances) -> ShapeReport {
    let extrema = find_extrema(traj, tol);

    let mut gamma = f64::NEG_INFINITY;
    let mut gamma_time = 0.0;
    let mut min_glucose = f64::INFINITY;
    for e in &extrema {
        if e.value > gamma {
            gamma = e.value;
            gamma_time = e.time;
        }
        min_glucose = min_glucose.min(e.value);
    }

    let interior_max: Vec<&Extremum> =
        extrema.iter().filter(|e| !e.boundary && e.kind == ExtremumKind::Max).collect();
    let interior_min: Vec<&Extremum> =
        extrema.iter().filter(|e| !e.boundary && e.kind == ExtremumKind::Min).collect();

    let lambda_minima: Vec<&Extremum> = interior_min
        .iter()
        .copied()
        .filter(|e| (e.value - lambda).abs() <= tol.tol_floor)
        .collect();
    let lambda_attained: Vec<f64> = lambda_minima.iter().map(|e| e.time).collect();

    // Candidates for "a global maximum": interior maxima within the
    // relative equality tolerance of gamma. The t = 0 boundary is excluded
    // (the steady-state start is not a response peak).
    let gamma_maxima: Vec<&Extremum> = interior_max
        .iter()
        .copied()
        .filter(|e| e.value >= gamma * (1.0 - tol.tol_equal_max))
        .collect();
    // "Global minima" for the case split: floor minima when the floor is
    // attained, otherwise minima at the global minimum value.
    let global_minima: Vec<&Extremum> = if lambda_minima.is_empty() {
        interior_min
            .iter()
            .copied()
            .filter(|e| e.value <= min_glucose + tol.tol_floor)
            .collect()
    } else {
        lambda_minima.clone()
    };

    let classification = if min_glucose < lambda - tol.tol_floor {
        Classification::Improper
    } else {
        classify_shape(&gamma_maxima, &lambda_minima, &global_minima, gamma_time)
    };

    ShapeReport { extrema, gamma, gamma_time, min_glucose, lambda_attained, classification }
}

fn classify_shape(
    gamma_maxima: &[&Extremum],
    lambda_minima: &[&Extremum],
    global_minima: &[&Extremum],
    gamma_time: f64,
) -> Classification {
    // Globally optimal: >= 2 equal global maxima interlaced with >= 2 floor
    // minima; neither set entirely one-sided of the other.
    if gamma_maxima.len() >= 2 && lambda_minima.len() >= 2 {
        let max_first = gamma_maxima.first().unwrap().time;
        let max_last = gamma_maxima.last().unwrap().time;
        let min_first = lambda_minima.first().unwrap().time;
        let min_last = lambda_minima.last().unwrap().time;
        let one_sided = max_last < min_first || min_last < max_first;
        if !one_sided {
            return Classification::GloballyOptimalShape;
        }
    }

    // Lambda-optimal: the global maximum strictly between two floor minima.
    if lambda_minima.iter().any(|e| e.time < gamma_time)
        && lambda_minima.iter().any(|e| e.time > gamma_time)
    {
        return Classification::LambdaOptimal;
    }

    // Gamma-optimal: every floor minimum between two equal global maxima.
    if gamma_maxima.len() >= 2 && !lambda_minima.is_empty() {
        let first = gamma_maxima.first().unwrap().time;
        let last = gamma_maxima.last().unwrap().time;
        if lambda_minima.iter().all(|e| e.time > first && e.time < last) {
            return Classification::GammaOptimal;
        }
    }

    if !gamma_maxima.is_empty() && !global_minima.is_empty() {
        let max_last = gamma_maxima.last().unwrap().time;
        let max_first = gamma_maxima.first().unwrap().time;
        let min_first = global_minima.first().unwrap().time;
        let min_last = global_minima.last().unwrap().time;
        // Case A: no global maximum after a global minimum.
        if max_last < min_first {
            return Classification::CaseA;
        }
        // Case B: no global maximum before a global minimum.
        if max_first > min_last {
            return Classification::CaseB;
        }
    }

    Classification::Indeterminate
}

/// Count sign changes of the glucose difference of two responses on the
/// same grid, for times strictly greater than `after`. Differences smaller
/// than 1e-9 in magnitude are treated as zero.
pub fn count_sign_changes(a: &Trajectory, b: &Trajectory, after: f64) -> Result<usize> {
    count_changes(a, b, after, |t, i| (t.glucose[i], ()))
}

/// Same as [`count_sign_changes`] but on a recorded state component.
pub fn count_sign_changes_component(
    a: &Trajectory,
    b: &Trajectory,
    after: f64,
    component: usize,
) -> Result<usize> {
    if a.state_dim <= component || b.state_dim <= component {
        return Err(Error::GridMismatch(format!(
            "state component {component} not recorded (dims {} / {})",
            a.state_dim, b.state_dim
        )));
    }
    count_changes(a, b, after, |t, i| (t.state(i)[component], ()))
}

fn count_changes(
    a: &Trajectory,
    b: &Trajectory,
    after: f64,
    read: impl Fn(&Trajectory, usize) -> (f64, ()),
) -> Result<usize> {
    if !a.same_grid(b) {
        return Err(Error::GridMismatch(format!(
            "trajectories have {} vs {} samples or differing times",
            a.len(),
            b.len()
        )));
    }
    const DEAD_BAND: f64 = 1e-9;
    let mut sign = 0i8;
    let mut count = 0usize;
    for i in 0..a.len() {
        if a.times[i] <= after {
            continue;
        }
        let d = read(a, i).0 - read(b, i).0;
        if d.abs() < DEAD_BAND {
            continue;
        }
        let s = if d > 0.0 { 1 } else { -1 };
        if sign != 0 && s != sign {
            count += 1;
        }
        sign = s;
    }
    Ok(count)
}

/// Maximum of the glucose clearance factor `h` over a trajectory.
/// Requires recorded states.
pub fn max_h<M: GlucoseModel>(traj: &Trajectory, model: &M) -> Result<f64> {
    if !traj.has_states() {
        return Err(Error::InvalidScenario(
            "max_h needs a trajectory with recorded states".into(),
        ));
    }
    let dim = model.dim();
    let mut max = f64::NEG_INFINITY;
    for i in 0..traj.len() {
        max = max.max(model.clearance(&traj.state(i)[..dim]));
    }
    Ok(max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disturbance::MealCascade;
    use crate::integrate::{simulate, SimConfig};
    use crate::models::{BergmanParams, GlucoseModel, Model, PulseInput};

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn synthetic(times: Vec<f64>, glucose: Vec<f64>) -> Trajectory {
        Trajectory::from_glucose_samples(times, glucose)
    }

    #[test]
    fn monotone_trace_has_only_boundary_extrema() {
        let times: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let glucose: Vec<f64> = times.iter().map(|&t| 5.0 + 0.01 * t).collect();
        let ex = find_extrema(&synthetic(times, glucose), &tol());
        assert_eq!(ex.len(), 2);
        assert!(ex.iter().all(|e| e.boundary));
        assert_eq!(ex[0].kind, ExtremumKind::Min);
        assert_eq!(ex[1].kind, ExtremumKind::Max);
    }

    #[test]
    fn sine_trace_extrema_at_analytic_locations() {
        let dt = 0.1;
        let times: Vec<f64> = (0..=10000).map(|i| i as f64 * dt).collect();
        let glucose: Vec<f64> =
            times.iter().map(|&t| 5.0 + (2.0 * std::f64::consts::PI * t / 200.0).sin()).collect();
        let ex = find_extrema(&synthetic(times, glucose), &tol());
        let interior: Vec<&Extremum> = ex.iter().filter(|e| !e.boundary).collect();
        // Maxima at 50 + 200k, minima at 150 + 200k within [0, 1000].
        let expected_max = [50.0, 250.0, 450.0, 650.0, 850.0];
        let expected_min = [150.0, 350.0, 550.0, 750.0, 950.0];
        let maxima: Vec<f64> = interior
            .iter()
            .filter(|e| e.kind == ExtremumKind::Max)
            .map(|e| e.time)
            .collect();
        let minima: Vec<f64> = interior
            .iter()
            .filter(|e| e.kind == ExtremumKind::Min)
            .map(|e| e.time)
            .collect();
        assert_eq!(maxima.len(), expected_max.len());
        assert_eq!(minima.len(), expected_min.len());
        for (got, want) in maxima.iter().zip(expected_max) {
            assert!((got - want).abs() <= dt, "max at {got}, expected {want}");
        }
        for (got, want) in minima.iter().zip(expected_min) {
            assert!((got - want).abs() <= dt, "min at {got}, expected {want}");
        }
        // Alternating kinds.
        for w in ex.windows(2) {
            assert_ne!(w[0].kind, w[1].kind);
        }
    }

    #[test]
    fn ripple_below_prominence_is_ignored() {
        let times: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        let glucose: Vec<f64> = times
            .iter()
            .map(|&t| 5.0 + 1e-7 * (t * 0.7).sin() + 0.001 * t)
            .collect();
        let ex = find_extrema(&synthetic(times, glucose), &tol());
        assert!(ex.iter().all(|e| e.boundary), "ripple registered as extrema: {ex:?}");
    }

    #[test]
    fn classify_case_a_single_max_then_floor_min() {
        // One max then one floor-touching min, max before min.
        let times: Vec<f64> = (0..=1000).map(|i| i as f64).collect();
        let glucose: Vec<f64> = times
            .iter()
            .map(|&t| {
                let peak = 3.0 * (-((t - 300.0) / 100.0).powi(2)).exp();
                let dip = -1.0 * (-((t - 700.0) / 100.0).powi(2)).exp();
                5.0 + peak + dip
            })
            .collect();
        let traj = synthetic(times, glucose);
        let report = classify(&traj, 4.0, &tol());
        assert_eq!(report.classification, Classification::CaseA);
    }

    #[test]
    fn classify_case_b_floor_min_then_max() {
        let times: Vec<f64> = (0..=1000).map(|i| i as f64).collect();
        let glucose: Vec<f64> = times
            .iter()
            .map(|&t| {
                let dip = -1.0 * (-((t - 300.0) / 100.0).powi(2)).exp();
                let peak = 3.0 * (-((t - 700.0) / 100.0).powi(2)).exp();
                5.0 + peak + dip
            })
            .collect();
        let traj = synthetic(times, glucose);
        let report = classify(&traj, 4.0, &tol());
        assert_eq!(report.classification, Classification::CaseB);
    }

    #[test]
    fn classify_improper_when_dipping_below_floor() {
        let times: Vec<f64> = (0..=1000).map(|i| i as f64).collect();
        let glucose: Vec<f64> = times
            .iter()
            .map(|&t| 5.0 - 1.5 * (-((t - 400.0) / 80.0).powi(2)).exp())
            .collect();
        let traj = synthetic(times, glucose);
        let report = classify(&traj, 4.0, &tol());
        assert_eq!(report.classification, Classification::Improper);
    }

    #[test]
    fn classify_lambda_optimal_max_between_two_floor_minima() {
        let times: Vec<f64> = (0..=1200).map(|i| i as f64).collect();
        let glucose: Vec<f64> = times
            .iter()
            .map(|&t| {
                let d1 = -1.0 * (-((t - 300.0) / 60.0).powi(2)).exp();
                let d2 = -1.0 * (-((t - 900.0) / 60.0).powi(2)).exp();
                let peak = 2.0 * (-((t - 600.0) / 80.0).powi(2)).exp();
                5.0 + d1 + d2 + peak
            })
            .collect();
        let traj = synthetic(times, glucose);
        let report = classify(&traj, 4.0, &tol());
        assert_eq!(report.classification, Classification::LambdaOptimal);
    }

    #[test]
    fn classify_gamma_optimal_floor_min_between_equal_maxima() {
        let times: Vec<f64> = (0..=1200).map(|i| i as f64).collect();
        let glucose: Vec<f64> = times
            .iter()
            .map(|&t| {
                let m1 = 2.0 * (-((t - 300.0) / 60.0).powi(2)).exp();
                let m2 = 2.0 * (-((t - 900.0) / 60.0).powi(2)).exp();
                let dip = -1.0 * (-((t - 600.0) / 80.0).powi(2)).exp();
                5.0 + m1 + m2 + dip
            })
            .collect();
        let traj = synthetic(times, glucose);
        let report = classify(&traj, 4.0, &tol());
        assert_eq!(report.classification, Classification::GammaOptimal);
    }

    #[test]
    fn classify_globally_optimal_interlaced() {
        let times: Vec<f64> = (0..=1600).map(|i| i as f64).collect();
        let glucose: Vec<f64> = times
            .iter()
            .map(|&t| {
                let m1 = 2.0 * (-((t - 300.0) / 60.0).powi(2)).exp();
                let m2 = 2.0 * (-((t - 900.0) / 60.0).powi(2)).exp();
                let d1 = -1.0 * (-((t - 600.0) / 60.0).powi(2)).exp();
                let d2 = -1.0 * (-((t - 1200.0) / 60.0).powi(2)).exp();
                5.0 + m1 + m2 + d1 + d2
            })
            .collect();
        let traj = synthetic(times, glucose);
        let report = classify(&traj, 4.0, &tol());
        assert_eq!(report.classification, Classification::GloballyOptimalShape);
    }

    #[test]
    fn sign_changes_zero_for_identical_trajectories() {
        let times: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let glucose: Vec<f64> = times.iter().map(|&t| 5.0 + (t * 0.1).sin()).collect();
        let a = synthetic(times.clone(), glucose.clone());
        let b = synthetic(times, glucose);
        assert_eq!(count_sign_changes(&a, &b, 0.0).unwrap(), 0);
    }

    #[test]
    fn sign_changes_counts_crossings() {
        let times: Vec<f64> = (0..=400).map(|i| i as f64 * 0.1).collect();
        let a_vals: Vec<f64> = times.iter().map(|&t| (t * 0.5).sin()).collect();
        let b_vals: Vec<f64> = vec![0.0; times.len()];
        let a = synthetic(times.clone(), a_vals);
        let b = synthetic(times, b_vals);
        // sin(t/2) on (0, 40] crosses zero at 2pi k: ~6.28, 12.57, 18.85, 25.13, 31.4, 37.7
        assert_eq!(count_sign_changes(&a, &b, 0.0).unwrap(), 6);
    }

    #[test]
    fn sign_changes_rejects_grid_mismatch() {
        let a = synthetic(vec![0.0, 1.0], vec![1.0, 2.0]);
        let b = synthetic(vec![0.0, 2.0], vec![1.0, 2.0]);
        assert!(matches!(count_sign_changes(&a, &b, 0.0), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn max_h_constant_for_basal_only() {
        let params = BergmanParams {
            a: 0.0101,
            b: 8.16e-4,
            c: 0.025,
            d: 0.025,
            k: 1.0 / 1806.0,
            g_eff: 0.0023,
            egp: 1.0,
        };
        let model = Model::Bergman(params);
        let u_bar = model.basal_rate(5.0).unwrap();
        let input = PulseInput::basal_only(u_bar);
        let traj =
            simulate(&model, &input, &MealCascade::none(), &SimConfig::new(500.0, 0.05)).unwrap();
        let h = max_h(&traj, &model).unwrap();
        let expected = params.b * params.k * u_bar + params.g_eff;
        assert!((h - expected).abs() < 1e-12, "h = {h}, expected {expected}");
    }

    #[test]
    fn max_h_monotone_in_bolus_magnitude() {
        let model = Model::Bergman(BergmanParams {
            a: 0.0101,
            b: 8.16e-4,
            c: 0.025,
            d: 0.025,
            k: 1.0 / 1806.0,
            g_eff: 0.0023,
            egp: 1.0,
        });
        let u_bar = model.basal_rate(5.0).unwrap();
        let cfg = SimConfig::new(1500.0, 0.1);
        let mut last = 0.0;
        for u_hat in [0.0, 1e5, 3e5] {
            let input = PulseInput::new(u_bar, u_hat, 200.0, 100.0);
            let traj = simulate(&model, &input, &MealCascade::none(), &cfg).unwrap();
            let h = max_h(&traj, &model).unwrap();
            assert!(h >= last, "max h not monotone at u_hat = {u_hat}");
            last = h;
        }
    }
}
