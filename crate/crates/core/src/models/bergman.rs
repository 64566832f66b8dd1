//! Bergman (Khandarian) minimal model.
//!
//! States: subcutaneous insulin `z`, plasma insulin `y`, insulin
//! effectiveness `x` (1/min) and plasma glucose `g` (mmol/L):
//!
//! ```text
//! dz/dt = -d z + d k u
//! dy/dt = -c y + c z
//! dx/dt = -a x + a b y
//! dg/dt = -(x + G) g + (r + E)
//! ```
//!
//! A constant input `u_bar` has the closed-form fixed point
//! `(k u_bar, k u_bar, b k u_bar, E / (b k u_bar + G))`, which gives both
//! the steady-state initializer and the basal calibration
//! `u_bar = (E/g0 - G) / (k b)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::GlucoseModel;

/// Bergman minimal model parameters. All positive; minutes and mmol/L.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BergmanParams {
    /// Insulin motility (1/min).
    pub a: f64,
    /// Insulin sensitivity.
    pub b: f64,
    /// Plasma insulin rate constant (1/min).
    pub c: f64,
    /// Subcutaneous insulin rate constant (1/min).
    pub d: f64,
    /// Clearance scaling of the delivery rate.
    pub k: f64,
    /// Glucose effectiveness (1/min).
    #[serde(rename = "G")]
    pub g_eff: f64,
    /// Endogenous glucose production (mmol/(L min)).
    #[serde(rename = "E")]
    pub egp: f64,
}

/// A Bergman state vector with named components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BergmanState {
    pub z: f64,
    pub y: f64,
    pub x: f64,
    pub g: f64,
}

impl BergmanState {
    pub fn as_array(&self) -> [f64; 4] {
        [self.z, self.y, self.x, self.g]
    }

    pub fn from_slice(s: &[f64]) -> Self {
        Self { z: s[0], y: s[1], x: s[2], g: s[3] }
    }
}

/// Pure derivative evaluation; see the module equations.
pub fn bergman_derivatives(
    state: &BergmanState,
    params: &BergmanParams,
    u_val: f64,
    r_val: f64,
) -> BergmanState {
    let mut out = [0.0; 4];
    params.derivatives(&state.as_array(), u_val, r_val, &mut out);
    BergmanState::from_slice(&out)
}

impl BergmanParams {
    /// Constant insulin effectiveness under basal input `u_bar`.
    pub fn x_basal(&self, u_bar: f64) -> f64 {
        self.b * self.k * u_bar
    }
}

impl GlucoseModel for BergmanParams {
    fn dim(&self) -> usize {
        4
    }

    fn state_names(&self) -> &'static [&'static str] {
        &["z", "y", "x", "g"]
    }

    #[inline]
    fn derivatives(&self, state: &[f64], u_val: f64, r_val: f64, out: &mut [f64]) {
        let (z, y, x, g) = (state[0], state[1], state[2], state[3]);
        out[0] = -self.d * z + self.d * self.k * u_val;
        out[1] = -self.c * y + self.c * z;
        out[2] = -self.a * x + self.a * self.b * y;
        out[3] = -(x + self.g_eff) * g + (r_val + self.egp);
    }

    #[inline]
    fn glucose(&self, state: &[f64]) -> f64 {
        state[3]
    }

    fn clearance(&self, state: &[f64]) -> f64 {
        state[2] + self.g_eff
    }

    fn steady_state(&self, u_bar: f64) -> Result<Vec<f64>> {
        if u_bar < 0.0 {
            return Err(Error::InvalidScenario("basal rate must be >= 0".into()));
        }
        let z = self.k * u_bar;
        let x = self.b * z;
        let g = self.egp / (x + self.g_eff);
        Ok(vec![z, z, x, g])
    }

    fn basal_rate(&self, g0: f64) -> Result<f64> {
        if g0 <= 0.0 {
            return Err(Error::InvalidScenario("g0 must be > 0".into()));
        }
        let gap = self.egp / g0 - self.g_eff;
        if gap < 0.0 {
            return Err(Error::InfeasibleBasal(format!(
                "E/g0 = {:.6} < G = {:.6}: holding g0 = {g0} would need a negative basal rate",
                self.egp / g0,
                self.g_eff
            )));
        }
        Ok(gap / (self.k * self.b))
    }

    fn impulse_gain(&self) -> f64 {
        // dz/dt = -d z + d k * (u_hat delta) integrates to a jump of d k u_hat.
        self.d * self.k
    }

    fn validate(&self) -> Result<()> {
        let fields = [
            ("a", self.a),
            ("b", self.b),
            ("c", self.c),
            ("d", self.d),
            ("k", self.k),
            ("G", self.g_eff),
            ("E", self.egp),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidScenario(format!(
                    "bergman parameter {name} must be finite and > 0, got {v}"
                )));
            }
        }
        // The production floor must dominate glucose effectiveness so that a
        // positive steady state exists for every non-negative input.
        if self.egp < self.g_eff {
            return Err(Error::InvalidScenario(format!(
                "bergman requires E >= G, got E = {} < G = {}",
                self.egp, self.g_eff
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paper_params() -> BergmanParams {
        BergmanParams {
            a: 0.0101,
            b: 8.16e-4,
            c: 0.025,
            d: 0.025,
            k: 1.0 / 1806.0,
            g_eff: 0.0023,
            egp: 1.0,
        }
    }

    #[test]
    fn steady_state_is_fixed_point() {
        let p = paper_params();
        let u_bar = p.basal_rate(5.0).unwrap();
        let ss = p.steady_state(u_bar).unwrap();
        let state = BergmanState::from_slice(&ss);
        let dot = bergman_derivatives(&state, &p, u_bar, 0.0);
        for v in dot.as_array() {
            assert!(v.abs() < 1e-12, "steady-state derivative {v} not ~0");
        }
        assert!((state.g - 5.0).abs() < 1e-9, "g component {} != 5.0", state.g);
    }

    #[test]
    fn glucose_derivative_arithmetic() {
        // x = 0, G = 0.0023, g = 5.0, r = 0, E = 1.0:
        // dg/dt = 1.0 - 0.0023 * 5.0 = 0.9885
        let p = paper_params();
        let s = BergmanState { z: 0.0, y: 0.0, x: 0.0, g: 5.0 };
        let dot = bergman_derivatives(&s, &p, 0.0, 0.0);
        let expected = 1.0 - 0.0023 * 5.0;
        assert_eq!(expected, 0.9885);
        assert!((dot.g - expected).abs() < 1e-15);
    }

    #[test]
    fn origin_response() {
        let p = paper_params();
        let s = BergmanState { z: 0.0, y: 0.0, x: 0.0, g: 0.0 };
        let dot = bergman_derivatives(&s, &p, 0.0, 0.0);
        assert_eq!(dot.z, 0.0);
        assert_eq!(dot.y, 0.0);
        assert_eq!(dot.x, 0.0);
        assert_eq!(dot.g, 1.0);
    }

    #[test]
    fn basal_rate_regression_constant() {
        // Independent arithmetic oracle: (E/g0 - G) * 1806 / 8.16e-4.
        let p = paper_params();
        let oracle = (1.0 / 5.0 - 0.0023) * 1806.0 / 8.16e-4;
        let got = p.basal_rate(5.0).unwrap();
        assert!((got - oracle).abs() / oracle < 1e-14);
        // Frozen regression value.
        assert!((got - 437_556.617_647_058_8).abs() < 1e-6, "basal = {got}");
    }

    #[test]
    fn basal_rate_boundary_and_infeasible() {
        let mut p = paper_params();
        p.egp = 0.0023 * 5.0; // E/g0 == G exactly
        assert_eq!(p.basal_rate(5.0).unwrap(), 0.0);
        assert!(matches!(p.basal_rate(10.0), Err(Error::InfeasibleBasal(_))));
    }

    #[test]
    fn basal_rate_decreasing_in_g0() {
        let p = paper_params();
        let mut last = f64::INFINITY;
        for g0 in [1.0, 2.0, 3.0, 5.0, 8.0, 13.0] {
            let u = p.basal_rate(g0).unwrap();
            assert!(u < last, "basal rate not strictly decreasing at g0 = {g0}");
            last = u;
        }
    }

    #[test]
    fn zero_input_steady_state() {
        let p = paper_params();
        let ss = p.steady_state(0.0).unwrap();
        assert_eq!(ss[2], 0.0);
        assert!((ss[3] - p.egp / p.g_eff).abs() < 1e-12);
    }

    #[test]
    fn validate_rejects_e_below_g() {
        let mut p = paper_params();
        p.egp = 1e-3; // below G
        assert!(p.validate().is_err());
        assert!(paper_params().validate().is_ok());
    }
}
