//! Fixed-step classical Runge-Kutta integration of the augmented
//! (model + meal cascade) system.
//!
//! The integration grid is built from the discontinuity set: bolus edges,
//! meal pulse edges and any extra breakpoints from the configuration. Each
//! segment between consecutive breakpoints is integrated with a uniform
//! step no larger than `dt`, and the delivery rate and pulse value are held
//! at their segment-interior values, so no RK stage ever straddles a
//! discontinuity. Impulse inputs (`tau == 0`) become an instantaneous jump
//! of the first insulin state at the delivery time.

use serde::{Deserialize, Serialize};

use crate::disturbance::{meal_rate, MealCascade};
use crate::error::{Error, Result};
use crate::models::{input_value, GlucoseModel, PulseInput, MAX_AUG_DIM};

/// Simulation grid configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    /// Simulation horizon (min).
    pub horizon: f64,
    /// Maximum integration step (min).
    pub dt: f64,
    /// Extra breakpoint times to align the grid with, within `[0, horizon]`.
    pub breakpoints: Vec<f64>,
    /// Record every n-th step within a segment (segment ends always
    /// recorded).
    pub record_stride: usize,
    /// Record full state vectors (glucose, input and meal rate are always
    /// recorded).
    pub record_states: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            horizon: 2000.0,
            dt: 0.05,
            breakpoints: Vec::new(),
            record_stride: 1,
            record_states: true,
        }
    }
}

impl SimConfig {
    pub fn new(horizon: f64, dt: f64) -> Self {
        Self { horizon, dt, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidScenario(format!("dt must be > 0, got {}", self.dt)));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::InvalidScenario(format!(
                "horizon must be > 0, got {}",
                self.horizon
            )));
        }
        if self.record_stride == 0 {
            return Err(Error::InvalidScenario("record_stride must be >= 1".into()));
        }
        for &b in &self.breakpoints {
            if !(b.is_finite() && (0.0..=self.horizon).contains(&b)) {
                return Err(Error::InvalidScenario(format!(
                    "breakpoint {b} outside [0, {}]",
                    self.horizon
                )));
            }
        }
        Ok(())
    }
}

/// Time-stamped samples of a simulated run. `states` is row-major with
/// `state_dim` entries per sample (model states followed by the two
/// cascade states) and is empty when state recording is off.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub glucose: Vec<f64>,
    pub inputs: Vec<f64>,
    pub meals: Vec<f64>,
    pub states: Vec<f64>,
    pub state_dim: usize,
    pub state_names: Vec<&'static str>,
}

impl Trajectory {
    /// Build a trajectory from bare glucose samples (no states). Intended
    /// for analysis of synthetic or externally produced series.
    pub fn from_glucose_samples(times: Vec<f64>, glucose: Vec<f64>) -> Self {
        assert_eq!(times.len(), glucose.len());
        let n = times.len();
        Self {
            times,
            glucose,
            inputs: vec![0.0; n],
            meals: vec![0.0; n],
            states: Vec::new(),
            state_dim: 0,
            state_names: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// State row for sample `i`; empty slice when states were not recorded.
    pub fn state(&self, i: usize) -> &[f64] {
        if self.state_dim == 0 {
            &[]
        } else {
            &self.states[i * self.state_dim..(i + 1) * self.state_dim]
        }
    }

    pub fn has_states(&self) -> bool {
        self.state_dim > 0 && !self.states.is_empty()
    }

    /// Minimum glucose sample and its index.
    pub fn min_glucose(&self) -> (usize, f64) {
        let mut idx = 0;
        let mut min = f64::INFINITY;
        for (i, &g) in self.glucose.iter().enumerate() {
            if g < min {
                min = g;
                idx = i;
            }
        }
        (idx, min)
    }

    /// Maximum glucose sample and its index.
    pub fn max_glucose(&self) -> (usize, f64) {
        let mut idx = 0;
        let mut max = f64::NEG_INFINITY;
        for (i, &g) in self.glucose.iter().enumerate() {
            if g > max {
                max = g;
                idx = i;
            }
        }
        (idx, max)
    }

    pub fn same_grid(&self, other: &Trajectory) -> bool {
        self.times == other.times
    }
}

/// Assemble the sorted, deduplicated breakpoint set for a run.
fn breakpoint_times(input: &PulseInput, cascade: &MealCascade, config: &SimConfig) -> Vec<f64> {
    let mut pts = vec![0.0, config.horizon];
    if input.is_impulse() {
        pts.push(input.t_prime);
    } else {
        pts.push(input.t_prime);
        pts.push(input.t_end());
    }
    pts.extend(cascade.breakpoints());
    pts.extend(config.breakpoints.iter().copied());
    pts.retain(|&t| t >= 0.0 && t <= config.horizon);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

/// Simulate the model driven by a pulse input and a meal cascade from its
/// basal steady state.
///
/// Classical 4th-order fixed-step integration. The grid contains every
/// breakpoint exactly; delivery and ingestion rates are evaluated at
/// segment midpoints so every RK stage sees segment-constant inputs.
pub fn simulate<M: GlucoseModel>(
    model: &M,
    input: &PulseInput,
    cascade: &MealCascade,
    config: &SimConfig,
) -> Result<Trajectory> {
    config.validate()?;
    input.validate()?;
    cascade.validate()?;
    let dim = model.dim();
    let aug = dim + 2;
    assert!(aug <= MAX_AUG_DIM);

    let mut state = [0.0; MAX_AUG_DIM];
    let init = model.steady_state(input.u_bar)?;
    state[..dim].copy_from_slice(&init);
    // Cascade starts empty.
    state[dim] = 0.0;
    state[dim + 1] = 0.0;

    let impulse = input.is_impulse() && input.u_hat > 0.0;
    let mut impulse_pending = impulse && input.t_prime <= config.horizon;
    if impulse_pending && input.t_prime == 0.0 {
        state[model.impulse_state()] += model.impulse_gain() * input.u_hat;
        impulse_pending = false;
    }

    let breaks = breakpoint_times(input, cascade, config);
    let est_steps = (config.horizon / config.dt).ceil() as usize + breaks.len() + 2;
    let n_rec = est_steps / config.record_stride + breaks.len() + 2;

    let mut traj = Trajectory {
        times: Vec::with_capacity(n_rec),
        glucose: Vec::with_capacity(n_rec),
        inputs: Vec::with_capacity(n_rec),
        meals: Vec::with_capacity(n_rec),
        states: if config.record_states { Vec::with_capacity(n_rec * aug) } else { Vec::new() },
        state_dim: if config.record_states { aug } else { 0 },
        state_names: if config.record_states {
            let mut names = model.state_names().to_vec();
            names.push("f1");
            names.push("f2");
            names
        } else {
            Vec::new()
        },
    };

    let inv_t = 1.0 / cascade.time_constant;
    let record = |traj: &mut Trajectory, t: f64, s: &[f64], u: f64| {
        traj.times.push(t);
        traj.glucose.push(model.glucose(&s[..dim]));
        traj.inputs.push(u);
        traj.meals.push(meal_rate(s[dim], cascade));
        if config.record_states {
            traj.states.extend_from_slice(&s[..aug]);
        }
    };
    let check = |s: &[f64], t: f64| -> Result<()> {
        for &v in &s[..aug] {
            if !v.is_finite() {
                return Err(Error::NumericalError(format!(
                    "non-finite state component at t = {t:.4}"
                )));
            }
        }
        if model.glucose(&s[..dim]) <= 0.0 {
            return Err(Error::DomainError(format!(
                "glucose reached a non-positive value at t = {t:.4}"
            )));
        }
        Ok(())
    };

    check(&state, 0.0)?;
    record(&mut traj, 0.0, &state, input_value(input, 0.0));

    let mut k1 = [0.0; MAX_AUG_DIM];
    let mut k2 = [0.0; MAX_AUG_DIM];
    let mut k3 = [0.0; MAX_AUG_DIM];
    let mut k4 = [0.0; MAX_AUG_DIM];
    let mut tmp = [0.0; MAX_AUG_DIM];

    for seg in breaks.windows(2) {
        let (b0, b1) = (seg[0], seg[1]);
        let len = b1 - b0;
        if len <= 0.0 {
            continue;
        }
        let n = ((len / config.dt) - 1e-9).ceil().max(1.0) as usize;
        let h = len / n as f64;
        // Segment-constant inputs sampled away from the edges.
        let mid = b0 + 0.5 * len;
        let u_seg = input_value(input, mid);
        let rho_seg = cascade.pulse_value(mid);

        let rhs = |s: &[f64], out: &mut [f64]| {
            let f1 = s[dim];
            let f2 = s[dim + 1];
            model.derivatives(&s[..dim], u_seg, meal_rate(f1, cascade), &mut out[..dim]);
            out[dim] = (-f1 + f2) * inv_t;
            out[dim + 1] = -f2 * inv_t + cascade.drive_gain * rho_seg;
        };

        for step in 1..=n {
            rhs(&state, &mut k1);
            for i in 0..aug {
                tmp[i] = state[i] + 0.5 * h * k1[i];
            }
            rhs(&tmp, &mut k2);
            for i in 0..aug {
                tmp[i] = state[i] + 0.5 * h * k2[i];
            }
            rhs(&tmp, &mut k3);
            for i in 0..aug {
                tmp[i] = state[i] + h * k3[i];
            }
            rhs(&tmp, &mut k4);
            for i in 0..aug {
                state[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            // Land segment ends exactly.
            let t = if step == n { b1 } else { b0 + h * step as f64 };
            check(&state, t)?;
            if step == n || step % config.record_stride == 0 {
                record(&mut traj, t, &state, input_value(input, t));
            }
        }

        if impulse_pending && b1 == input.t_prime {
            state[model.impulse_state()] += model.impulse_gain() * input.u_hat;
            impulse_pending = false;
            // Replace the sample at t' with the post-jump state.
            if config.record_states {
                let last = traj.times.len() - 1;
                traj.states[last * aug..(last + 1) * aug].copy_from_slice(&state[..aug]);
                traj.glucose[last] = model.glucose(&state[..dim]);
            }
        }
    }

    Ok(traj)
}

/// Refine a sampled local extremum by the vertex of the parabola through
/// the three neighboring samples. Returns `(time, value)`. Flat or boundary
/// configurations fall back to the sample itself.
pub fn refine_extremum(traj: &Trajectory, index: usize) -> (f64, f64) {
    let n = traj.len();
    if n < 3 || index == 0 || index + 1 >= n {
        return (traj.times[index], traj.glucose[index]);
    }
    let (x0, x1, x2) = (traj.times[index - 1], traj.times[index], traj.times[index + 1]);
    let (y0, y1, y2) = (traj.glucose[index - 1], traj.glucose[index], traj.glucose[index + 1]);
    let d1 = (y1 - y0) / (x1 - x0);
    let d2 = (y2 - y1) / (x2 - x1);
    let curv = (d2 - d1) / (x2 - x0);
    let scale = y1.abs().max(1.0);
    if curv.abs() < 1e-14 * scale {
        return (x1, y1);
    }
    let xv = 0.5 * (x0 + x1) - d1 / (2.0 * curv);
    let xv = xv.clamp(x0, x2);
    let yv = y0 + d1 * (xv - x0) + curv * (xv - x0) * (xv - x1);
    (xv, yv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disturbance::MealPulse;
    use crate::models::{BergmanParams, Model};

    fn bergman() -> Model {
        Model::Bergman(BergmanParams {
            a: 0.0101,
            b: 8.16e-4,
            c: 0.025,
            d: 0.025,
            k: 1.0 / 1806.0,
            g_eff: 0.0023,
            egp: 1.0,
        })
    }

    fn meal() -> MealCascade {
        MealCascade {
            time_constant: 60.0,
            output_gain: 1.0 / 263.0,
            drive_gain: 1.0,
            pulses: vec![
                MealPulse { height: 5.0, start: 300.0, end: 800.0 },
                MealPulse { height: 100.0, start: 450.0, end: 460.0 },
            ],
        }
    }

    #[test]
    fn basal_only_trajectory_is_flat() {
        let m = bergman();
        let u_bar = m.basal_rate(5.0).unwrap();
        let input = PulseInput::basal_only(u_bar);
        let traj =
            simulate(&m, &input, &MealCascade::none(), &SimConfig::new(2000.0, 0.05)).unwrap();
        for &g in &traj.glucose {
            assert!((g - 5.0).abs() < 1e-6, "g drifted to {g}");
        }
    }

    #[test]
    fn grid_contains_all_breakpoints_exactly() {
        let m = bergman();
        let u_bar = m.basal_rate(5.0).unwrap();
        let input = PulseInput::new(u_bar, 1000.0, 123.456, 377.1);
        let traj = simulate(&m, &input, &meal(), &SimConfig::new(2000.0, 0.05)).unwrap();
        for bp in [123.456, 123.456 + 377.1, 300.0, 450.0, 460.0, 800.0] {
            assert!(
                traj.times.iter().any(|&t| t == bp),
                "breakpoint {bp} missing from grid"
            );
        }
        // Strictly increasing times.
        for w in traj.times.windows(2) {
            assert!(w[1] > w[0]);
        }
    }

    #[test]
    fn trajectory_is_deterministic() {
        let m = bergman();
        let u_bar = m.basal_rate(5.0).unwrap();
        let input = PulseInput::new(u_bar, 2e5, 310.0, 370.0);
        let cfg = SimConfig::new(2000.0, 0.05);
        let a = simulate(&m, &input, &meal(), &cfg).unwrap();
        let b = simulate(&m, &input, &meal(), &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn halving_dt_barely_moves_the_peak() {
        let m = bergman();
        let u_bar = m.basal_rate(5.0).unwrap();
        let input = PulseInput::new(u_bar, 2e5, 310.0, 370.0);
        let coarse = simulate(&m, &input, &meal(), &SimConfig::new(2000.0, 0.05)).unwrap();
        let fine = simulate(&m, &input, &meal(), &SimConfig::new(2000.0, 0.025)).unwrap();
        let (ci, _) = coarse.max_glucose();
        let (fi, _) = fine.max_glucose();
        let (_, cmax) = refine_extremum(&coarse, ci);
        let (_, fmax) = refine_extremum(&fine, fi);
        assert!((cmax - fmax).abs() < 1e-5, "dt halving moved peak by {}", (cmax - fmax).abs());
    }

    #[test]
    fn fourth_order_self_convergence_on_smooth_segments() {
        // Meal-only run at coarse steps; compare at shared breakpoint times
        // against a much finer reference. Error should drop ~16x per halving.
        let m = bergman();
        let u_bar = m.basal_rate(5.0).unwrap();
        let input = PulseInput::basal_only(u_bar);
        let sample_times = [450.0, 460.0, 800.0, 2000.0];
        let err_at = |dt: f64, rf: &Trajectory| -> f64 {
            let t = simulate(&m, &input, &meal(), &SimConfig::new(2000.0, dt)).unwrap();
            sample_times
                .iter()
                .map(|&bt| {
                    let i = t.times.iter().position(|&x| x == bt).unwrap();
                    let j = rf.times.iter().position(|&x| x == bt).unwrap();
                    (t.glucose[i] - rf.glucose[j]).abs()
                })
                .fold(0.0, f64::max)
        };
        let reference = simulate(&m, &input, &meal(), &SimConfig::new(2000.0, 0.25)).unwrap();
        let e1 = err_at(4.0, &reference);
        let e2 = err_at(2.0, &reference);
        let ratio = e1 / e2;
        assert!(
            (8.0..40.0).contains(&ratio),
            "order-4 convergence ratio {ratio} (errors {e1:.3e}, {e2:.3e})"
        );
    }

    #[test]
    fn impulse_jumps_first_insulin_state() {
        let m = bergman();
        let u_bar = m.basal_rate(5.0).unwrap();
        let u_hat = 5e7;
        let input = PulseInput::new(u_bar, u_hat, 100.0, 0.0);
        let traj =
            simulate(&m, &input, &MealCascade::none(), &SimConfig::new(400.0, 0.05)).unwrap();
        let i = traj.times.iter().position(|&t| t == 100.0).unwrap();
        let z_before = traj.state(i - 1)[0];
        let z_after = traj.state(i)[0];
        let expected_jump = 0.025 * (1.0 / 1806.0) * u_hat;
        assert!(
            ((z_after - z_before) - expected_jump).abs() / expected_jump < 1e-3,
            "jump {} vs expected {expected_jump}",
            z_after - z_before
        );
        // Glucose must dip afterwards.
        let (_, gmin) = traj.min_glucose();
        assert!(gmin < 5.0);
    }

    #[test]
    fn refine_extremum_exact_on_parabola() {
        let times: Vec<f64> = (0..100).map(|i| i as f64 * 0.1).collect();
        let glucose: Vec<f64> = times.iter().map(|&t| 5.0 - (t - 4.03).powi(2)).collect();
        let traj = Trajectory::from_glucose_samples(times, glucose);
        let (i, _) = traj.max_glucose();
        let (t, v) = refine_extremum(&traj, i);
        assert!((t - 4.03).abs() < 1e-12);
        assert!((v - 5.0).abs() < 1e-12);
    }

    #[test]
    fn refine_extremum_flat_returns_center() {
        let times: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let glucose = vec![2.0; 10];
        let traj = Trajectory::from_glucose_samples(times, glucose);
        let (t, v) = refine_extremum(&traj, 5);
        assert_eq!((t, v), (5.0, 2.0));
    }

    #[test]
    fn refined_max_close_to_dense_grid_max() {
        let m = bergman();
        let u_bar = m.basal_rate(5.0).unwrap();
        let input = PulseInput::new(u_bar, 2e5, 310.0, 370.0);
        let coarse = simulate(&m, &input, &meal(), &SimConfig::new(2000.0, 0.5)).unwrap();
        let dense = simulate(&m, &input, &meal(), &SimConfig::new(2000.0, 0.05)).unwrap();
        let (ci, _) = coarse.max_glucose();
        let (t_ref, v_ref) = refine_extremum(&dense, dense.max_glucose().0);
        let (t, v) = refine_extremum(&coarse, ci);
        assert!((t - t_ref).abs() < 1.0);
        assert!((v - v_ref).abs() < 0.01);
    }
}
