//! Hovorka model: insulin absorption/kinetics chain, three insulin action
//! states and a two-mass glucose subsystem with renal excretion and a
//! saturating non-insulin-dependent flux.
//!
//! ```text
//! dz/dt  = -d z + u
//! dy/dt  = -d y + d z
//! dx/dt  = -k x + c d y
//! dxi/dt = -ai xi + ai bi x        (i = 1, 2, 3)
//! dq1/dt = -h1 q1 + l q2 + w
//! dq2/dt = -h2 q2 + x1 q1
//! ```
//!
//! with `g = q1 / V`, `w = r + E`, `h2 = l + x2` and
//! `h1 = (f_c + f_r + x3 E / g) / V + x1`, where
//!
//! ```text
//! f_r = V R (1 - g_r_bar / g)  for g >= g_r_bar, else 0
//! f_c = f / g                  for g >= g_c_bar, else f / g_c_bar
//! ```
//!
//! Equilibria have no closed form; the initializer solves the glucose mass
//! by bisection after evaluating the insulin chain in closed form, and the
//! basal calibrator does a scalar solve on top of that.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::GlucoseModel;

/// Hovorka model parameters. All strictly positive. The shipped preset is
/// the Hovorka et al. 2004 adult set scaled to a body weight in kg;
/// `body_weight` records that scaling and is not used by the dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HovorkaParams {
    /// Insulin action deactivation rates (1/min).
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    /// Insulin action gains (transport, disposal, EGP suppression).
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
    /// Plasma insulin gain, 1/(insulin distribution volume) (1/L).
    pub c: f64,
    /// Subcutaneous absorption rate, 1/t_max_I (1/min).
    pub d: f64,
    /// Plasma insulin elimination rate (1/min).
    pub k: f64,
    /// Endogenous glucose production at zero insulin action (mmol/min).
    #[serde(rename = "E")]
    pub egp: f64,
    /// Non-insulin-dependent glucose flux (mmol/min).
    pub f: f64,
    /// Glucose level below which the non-insulin flux saturates (mmol/L).
    pub g_c_bar: f64,
    /// Renal excretion threshold (mmol/L).
    pub g_r_bar: f64,
    /// Inter-compartment transfer rate (1/min).
    pub l: f64,
    /// Glucose distribution volume (L).
    #[serde(rename = "V")]
    pub volume: f64,
    /// Renal clearance rate above the threshold (1/min).
    #[serde(rename = "R")]
    pub renal_rate: f64,
    /// Body weight (kg) the per-kg source constants were scaled by.
    pub body_weight: f64,
}

/// A Hovorka state vector with named components. `g = q1 / V` is derived.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HovorkaState {
    pub z: f64,
    pub y: f64,
    pub x: f64,
    pub x1: f64,
    pub x2: f64,
    pub x3: f64,
    pub q1: f64,
    pub q2: f64,
}

impl HovorkaState {
    pub fn as_array(&self) -> [f64; 8] {
        [self.z, self.y, self.x, self.x1, self.x2, self.x3, self.q1, self.q2]
    }

    pub fn from_slice(s: &[f64]) -> Self {
        Self {
            z: s[0],
            y: s[1],
            x: s[2],
            x1: s[3],
            x2: s[4],
            x3: s[5],
            q1: s[6],
            q2: s[7],
        }
    }

    /// Plasma glucose concentration (mmol/L).
    pub fn glucose(&self, params: &HovorkaParams) -> f64 {
        self.q1 / params.volume
    }
}

/// Pure derivative evaluation. Fails with `DomainError` when the glucose
/// mass is non-positive (the clearance terms divide by `g`).
pub fn hovorka_derivatives(
    state: &HovorkaState,
    params: &HovorkaParams,
    u_val: f64,
    r_val: f64,
) -> Result<HovorkaState> {
    if state.q1 <= 0.0 {
        return Err(Error::DomainError(format!(
            "hovorka glucose mass q1 = {} must be > 0",
            state.q1
        )));
    }
    let mut out = [0.0; 8];
    params.derivatives(&state.as_array(), u_val, r_val, &mut out);
    Ok(HovorkaState::from_slice(&out))
}

impl HovorkaParams {
    /// Hovorka et al. 2004 adult parameter set scaled to `body_weight` kg.
    ///
    /// Per-kg source constants: V_I = 0.12 L/kg, V_G = 0.16 L/kg,
    /// F_01 = 0.0097 mmol/(kg min), EGP_0 = 0.0161 mmol/(kg min); rates
    /// k_a = (0.006, 0.06, 0.03) 1/min, sensitivities
    /// (51.2, 8.2, 520) x 1e-4, t_max_I = 55 min, k_e = 0.138 1/min,
    /// k_12 = 0.066 1/min, renal clearance 0.003 1/min above 9 mmol/L and
    /// flux saturation below 4.5 mmol/L.
    pub fn hovorka_2004(body_weight: f64) -> Self {
        Self {
            a1: 0.006,
            a2: 0.06,
            a3: 0.03,
            b1: 51.2e-4,
            b2: 8.2e-4,
            b3: 520e-4,
            c: 1.0 / (0.12 * body_weight),
            d: 1.0 / 55.0,
            k: 0.138,
            egp: 0.0161 * body_weight,
            f: 0.0097 * body_weight,
            g_c_bar: 4.5,
            g_r_bar: 9.0,
            l: 0.066,
            volume: 0.16 * body_weight,
            renal_rate: 0.003,
            body_weight,
        }
    }

    /// Renal excretion factor `f_r(g)`.
    pub fn f_r(&self, g: f64) -> f64 {
        if g >= self.g_r_bar {
            self.volume * self.renal_rate * (1.0 - self.g_r_bar / g)
        } else {
            0.0
        }
    }

    /// Non-insulin-dependent flux factor `f_c(g)`.
    pub fn f_c(&self, g: f64) -> f64 {
        if g >= self.g_c_bar {
            self.f / g
        } else {
            self.f / self.g_c_bar
        }
    }

    /// Glucose clearance factor `h1` at a state.
    fn h1(&self, state: &[f64]) -> f64 {
        let g = state[6] / self.volume;
        let (x1, x3) = (state[3], state[5]);
        (self.f_c(g) + self.f_r(g) + x3 * self.egp / g) / self.volume + x1
    }

    /// Plasma insulin concentration under constant input `u_bar`.
    fn x_equilibrium(&self, u_bar: f64) -> f64 {
        self.c * u_bar / self.k
    }

    /// Equilibrium glucose mass imbalance as a function of `q1`, with the
    /// insulin chain pinned at its `u_bar` equilibrium. Strictly increasing
    /// in `q1` wherever the renal or insulin-transport terms are active, so
    /// a sign change brackets the equilibrium.
    fn equilibrium_residual(&self, q1: f64, x: f64) -> f64 {
        let g = q1 / self.volume;
        let (x1, x2, x3) = (self.b1 * x, self.b2 * x, self.b3 * x);
        let gf_c = if g >= self.g_c_bar { self.f } else { self.f * g / self.g_c_bar };
        let gf_r = if g >= self.g_r_bar {
            self.volume * self.renal_rate * (g - self.g_r_bar)
        } else {
            0.0
        };
        gf_c + gf_r + x1 * x2 * q1 / (self.l + x2) - self.egp * (1.0 - x3)
    }

    /// Equilibrium glucose concentration under constant input `u_bar`.
    pub fn equilibrium_glucose(&self, u_bar: f64) -> Result<f64> {
        let x = self.x_equilibrium(u_bar);
        if self.b3 * x >= 1.0 {
            return Err(Error::ConvergenceError(format!(
                "input {u_bar} saturates EGP suppression (x3 >= 1); no positive equilibrium"
            )));
        }
        // Bracket the root, then bisect to machine precision.
        let mut lo = 0.0_f64;
        let mut hi = self.volume * (2.0 * self.g_r_bar).max(50.0);
        let mut guard = 0;
        while self.equilibrium_residual(hi, x) < 0.0 {
            hi *= 2.0;
            guard += 1;
            if guard > 200 {
                return Err(Error::ConvergenceError(
                    "hovorka equilibrium bracket did not close".into(),
                ));
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.equilibrium_residual(mid, x) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * hi.max(1.0) {
                break;
            }
        }
        Ok(0.5 * (lo + hi) / self.volume)
    }
}

impl GlucoseModel for HovorkaParams {
    fn dim(&self) -> usize {
        8
    }

    fn state_names(&self) -> &'static [&'static str] {
        &["z", "y", "x", "x1", "x2", "x3", "q1", "q2"]
    }

    #[inline]
    fn derivatives(&self, state: &[f64], u_val: f64, r_val: f64, out: &mut [f64]) {
        let (z, y, x) = (state[0], state[1], state[2]);
        let (x1, x2, x3) = (state[3], state[4], state[5]);
        let (q1, q2) = (state[6], state[7]);
        let g = q1 / self.volume;
        let w = r_val + self.egp;
        let h1 = (self.f_c(g) + self.f_r(g) + x3 * self.egp / g) / self.volume + x1;
        let h2 = self.l + x2;
        out[0] = -self.d * z + u_val;
        out[1] = -self.d * y + self.d * z;
        out[2] = -self.k * x + self.c * self.d * y;
        out[3] = -self.a1 * x1 + self.a1 * self.b1 * x;
        out[4] = -self.a2 * x2 + self.a2 * self.b2 * x;
        out[5] = -self.a3 * x3 + self.a3 * self.b3 * x;
        out[6] = -h1 * q1 + self.l * q2 + w;
        out[7] = -h2 * q2 + x1 * q1;
    }

    #[inline]
    fn glucose(&self, state: &[f64]) -> f64 {
        state[6] / self.volume
    }

    fn clearance(&self, state: &[f64]) -> f64 {
        self.h1(state)
    }

    fn steady_state(&self, u_bar: f64) -> Result<Vec<f64>> {
        if u_bar < 0.0 {
            return Err(Error::InvalidScenario("basal rate must be >= 0".into()));
        }
        let z = u_bar / self.d;
        let x = self.x_equilibrium(u_bar);
        let g = self.equilibrium_glucose(u_bar)?;
        let q1 = g * self.volume;
        let (x1, x2, x3) = (self.b1 * x, self.b2 * x, self.b3 * x);
        let q2 = x1 * q1 / (self.l + x2);
        let state = vec![z, z, x, x1, x2, x3, q1, q2];
        // The chain is closed-form; only q1 came from a root-finder. Check
        // the residual anyway so a bad bracket can never leak out.
        let mut dot = [0.0; 8];
        self.derivatives(&state, u_bar, 0.0, &mut dot);
        let worst = dot.iter().fold(0.0_f64, |m, d| m.max(d.abs()));
        if worst > 1e-9 {
            return Err(Error::ConvergenceError(format!(
                "hovorka steady state residual {worst:.3e} exceeds 1e-9"
            )));
        }
        Ok(state)
    }

    fn basal_rate(&self, g0: f64) -> Result<f64> {
        if g0 <= 0.0 {
            return Err(Error::InvalidScenario("g0 must be > 0".into()));
        }
        let bound = self.equilibrium_glucose(0.0)?;
        if g0 > bound {
            return Err(Error::InfeasibleBasal(format!(
                "g0 = {g0} exceeds the zero-input steady state {bound:.6}"
            )));
        }
        if (g0 - bound).abs() <= 1e-12 * bound {
            return Ok(0.0);
        }
        // Equilibrium glucose decreases strictly with the input; bisect.
        let mut lo = 0.0_f64;
        let mut hi = 1.0_f64;
        let mut guard = 0;
        loop {
            match self.equilibrium_glucose(hi) {
                Ok(g) if g > g0 => {
                    hi *= 2.0;
                    guard += 1;
                    if guard > 100 {
                        return Err(Error::ConvergenceError(
                            "hovorka basal bracket did not close".into(),
                        ));
                    }
                }
                _ => break,
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let g = self.equilibrium_glucose(mid)?;
            if g > g0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * hi.max(1.0) {
                break;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    fn impulse_gain(&self) -> f64 {
        // dz/dt = -d z + u: a u_hat impulse jumps z by u_hat.
        1.0
    }

    fn validate(&self) -> Result<()> {
        let fields = [
            ("a1", self.a1),
            ("a2", self.a2),
            ("a3", self.a3),
            ("b1", self.b1),
            ("b2", self.b2),
            ("b3", self.b3),
            ("c", self.c),
            ("d", self.d),
            ("k", self.k),
            ("E", self.egp),
            ("f", self.f),
            ("g_c_bar", self.g_c_bar),
            ("g_r_bar", self.g_r_bar),
            ("l", self.l),
            ("V", self.volume),
            ("R", self.renal_rate),
            ("body_weight", self.body_weight),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidScenario(format!(
                    "hovorka parameter {name} must be finite and > 0, got {v}"
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> HovorkaParams {
        HovorkaParams::hovorka_2004(70.0)
    }

    #[test]
    fn piecewise_branches_below_thresholds() {
        let p = params();
        let g = 3.0; // below both g_c_bar = 4.5 and g_r_bar = 9.0
        assert_eq!(p.f_r(g), 0.0);
        assert_eq!(p.f_c(g), p.f / p.g_c_bar);
    }

    #[test]
    fn renal_term_vanishes_at_threshold_from_both_sides() {
        let p = params();
        // Branch for g >= g_r_bar evaluated exactly at the threshold.
        let above = p.volume * p.renal_rate * (1.0 - p.g_r_bar / p.g_r_bar);
        assert_eq!(above, 0.0);
        assert_eq!(p.f_r(p.g_r_bar), 0.0);
        assert!((p.f_r(p.g_r_bar + 1e-12) - 0.0).abs() < 1e-12);
    }

    #[test]
    fn flux_term_continuous_at_threshold() {
        let p = params();
        let below = p.f / p.g_c_bar;
        let above = p.f / p.g_c_bar; // f/g at g == g_c_bar
        assert!((below - above).abs() <= 1e-12);
        assert!((p.f_c(p.g_c_bar) - below).abs() <= 1e-12);
    }

    #[test]
    fn steady_state_residual_below_1e9() {
        let p = params();
        let u_bar = p.basal_rate(5.0).unwrap();
        let ss = p.steady_state(u_bar).unwrap();
        let state = HovorkaState::from_slice(&ss);
        assert!((state.glucose(&p) - 5.0).abs() < 1e-9);
        let dot = hovorka_derivatives(&state, &p, u_bar, 0.0).unwrap();
        for v in dot.as_array() {
            assert!(v.abs() < 1e-9, "residual component {v}");
        }
    }

    #[test]
    fn glucose_is_q1_over_v() {
        let p = params();
        let ss = p.steady_state(0.0).unwrap();
        assert_eq!(p.glucose(&ss), ss[6] / p.volume);
    }

    #[test]
    fn zero_input_bound_and_infeasible_basal() {
        let p = params();
        let bound = p.equilibrium_glucose(0.0).unwrap();
        // With zero insulin the balance is renal: well above the target range.
        assert!(bound > 9.0, "zero-input steady state {bound}");
        assert_eq!(p.basal_rate(bound).unwrap(), 0.0);
        assert!(matches!(p.basal_rate(bound + 0.5), Err(Error::InfeasibleBasal(_))));
    }

    #[test]
    fn derivatives_reject_nonpositive_mass() {
        let p = params();
        let mut s = HovorkaState::from_slice(&p.steady_state(0.0).unwrap());
        s.q1 = 0.0;
        assert!(matches!(hovorka_derivatives(&s, &p, 0.0, 0.0), Err(Error::DomainError(_))));
    }

    #[test]
    fn basal_rate_is_physiologically_sized() {
        // mU/min for a 70 kg adult holding 5 mmol/L: order 1-20.
        let u = params().basal_rate(5.0).unwrap();
        assert!(u > 0.5 && u < 50.0, "basal {u}");
    }
}
