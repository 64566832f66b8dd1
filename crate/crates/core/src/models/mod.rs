//! Glucose-insulin dynamics: the Bergman minimal model, the Hovorka model,
//! the rectangular pulse input, and the contract both models satisfy.
//!
//! Both models are driven by an insulin delivery rate `u(t)` and a meal
//! absorption rate `r(t)` and expose a plasma glucose concentration `g`
//! (mmol/L). The glucose equation has the common form `dg/dt = -h*g + w`
//! with `w = r + E`; `h` is the insulin-dependent clearance. The contract
//! required of any model plugged into the solvers:
//!
//! 1. `g` is continuous in `u`, `w`, `t` and decreases monotonically in `u`;
//! 2. `h` is continuous and monotone in `u`;
//! 3. `w` and `h` decay to their lower bounds;
//! 4. with `u = 0`, `g` stays at or above the desired steady state.

mod bergman;
mod hovorka;

pub use bergman::{bergman_derivatives, BergmanParams, BergmanState};
pub use hovorka::{hovorka_derivatives, HovorkaParams, HovorkaState};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest state dimension across models plus the two meal-cascade states.
/// Sized so integrator scratch buffers can live on the stack.
pub const MAX_AUG_DIM: usize = 12;

/// A rectangular insulin bolus on top of a constant basal rate.
///
/// The delivered rate is `u_bar + u_hat` on the closed interval
/// `[t_prime, t_prime + tau]` and `u_bar` elsewhere. `tau == 0` denotes an
/// impulse of strength `u_hat` (rate x minutes) at `t_prime`, realized by
/// the integrator as an instantaneous jump of the first insulin state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseInput {
    /// Basal delivery rate, >= 0.
    pub u_bar: f64,
    /// Bolus magnitude, >= 0. For `tau == 0` this is the impulse strength.
    pub u_hat: f64,
    /// Delivery time in minutes, >= 0.
    pub t_prime: f64,
    /// Bolus duration in minutes, >= 0 (0 = impulse).
    pub tau: f64,
}

impl PulseInput {
    pub fn new(u_bar: f64, u_hat: f64, t_prime: f64, tau: f64) -> Self {
        Self { u_bar, u_hat, t_prime, tau }
    }

    /// Basal-only input (no bolus).
    pub fn basal_only(u_bar: f64) -> Self {
        Self { u_bar, u_hat: 0.0, t_prime: 0.0, tau: 0.0 }
    }

    pub fn is_impulse(&self) -> bool {
        self.tau == 0.0
    }

    /// End of the bolus interval.
    pub fn t_end(&self) -> f64 {
        self.t_prime + self.tau
    }

    /// The bolus interval `[t_prime, t_prime + tau]` as a pair.
    pub fn interval(&self) -> (f64, f64) {
        (self.t_prime, self.t_end())
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.u_bar >= 0.0
            && self.u_hat >= 0.0
            && self.t_prime >= 0.0
            && self.tau >= 0.0
            && self.u_bar.is_finite()
            && self.u_hat.is_finite()
            && self.t_prime.is_finite()
            && self.tau.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidScenario(format!(
                "pulse input must have finite non-negative fields, got {self:?}"
            )))
        }
    }
}

/// Pointwise input rate at time `t`: `u_bar + u_hat` on the closed interval
/// `[t_prime, t_prime + tau]`, `u_bar` outside. Only meaningful for
/// `tau > 0`; the impulse case is handled by the integrator as a state jump,
/// not by pointwise evaluation.
pub fn input_value(input: &PulseInput, t: f64) -> f64 {
    if input.tau > 0.0 && t >= input.t_prime && t <= input.t_end() {
        input.u_bar + input.u_hat
    } else {
        input.u_bar
    }
}

/// The model contract shared by the Bergman and Hovorka systems: derivative
/// evaluation on flat state slices, glucose extraction, steady-state
/// initialization and basal calibration.
pub trait GlucoseModel {
    /// Number of state components.
    fn dim(&self) -> usize;

    /// Column names for trajectory export, in state order.
    fn state_names(&self) -> &'static [&'static str];

    /// Evaluate the state derivative at `state` under delivery rate `u_val`
    /// and meal rate `r_val`, writing into `out` (`dim()` entries each).
    fn derivatives(&self, state: &[f64], u_val: f64, r_val: f64, out: &mut [f64]);

    /// Plasma glucose concentration (mmol/L) for a state.
    fn glucose(&self, state: &[f64]) -> f64;

    /// The glucose clearance factor `h` for a state (Bergman: `x + G`;
    /// Hovorka: `h1`). Diagnostic for peak-clearance comparisons.
    fn clearance(&self, state: &[f64]) -> f64;

    /// Equilibrium state under constant input `u_bar` and zero meal.
    fn steady_state(&self, u_bar: f64) -> Result<Vec<f64>>;

    /// Constant input making `g0` an equilibrium glucose value.
    fn basal_rate(&self, g0: f64) -> Result<f64>;

    /// Coefficient of `u` in the first insulin-state equation; an impulse
    /// of strength `u_hat` jumps that state by `impulse_gain() * u_hat`.
    fn impulse_gain(&self) -> f64;

    /// Index of the first insulin state (the one an impulse jumps).
    fn impulse_state(&self) -> usize {
        0
    }

    /// Sanity-check parameter values.
    fn validate(&self) -> Result<()>;
}

/// Runtime model selection for scenarios. Methods delegate to the concrete
/// parameter structs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", deny_unknown_fields)]
pub enum Model {
    #[serde(rename = "bergman")]
    Bergman(BergmanParams),
    #[serde(rename = "hovorka")]
    Hovorka(HovorkaParams),
}

impl Model {
    pub fn name(&self) -> &'static str {
        match self {
            Model::Bergman(_) => "bergman",
            Model::Hovorka(_) => "hovorka",
        }
    }
}

impl GlucoseModel for Model {
    fn dim(&self) -> usize {
        match self {
            Model::Bergman(p) => p.dim(),
            Model::Hovorka(p) => p.dim(),
        }
    }

    fn state_names(&self) -> &'static [&'static str] {
        match self {
            Model::Bergman(p) => p.state_names(),
            Model::Hovorka(p) => p.state_names(),
        }
    }

    #[inline]
    fn derivatives(&self, state: &[f64], u_val: f64, r_val: f64, out: &mut [f64]) {
        match self {
            Model::Bergman(p) => p.derivatives(state, u_val, r_val, out),
            Model::Hovorka(p) => p.derivatives(state, u_val, r_val, out),
        }
    }

    #[inline]
    fn glucose(&self, state: &[f64]) -> f64 {
        match self {
            Model::Bergman(p) => p.glucose(state),
            Model::Hovorka(p) => p.glucose(state),
        }
    }

    fn clearance(&self, state: &[f64]) -> f64 {
        match self {
            Model::Bergman(p) => p.clearance(state),
            Model::Hovorka(p) => p.clearance(state),
        }
    }

    fn steady_state(&self, u_bar: f64) -> Result<Vec<f64>> {
        match self {
            Model::Bergman(p) => p.steady_state(u_bar),
            Model::Hovorka(p) => p.steady_state(u_bar),
        }
    }

    fn basal_rate(&self, g0: f64) -> Result<f64> {
        match self {
            Model::Bergman(p) => p.basal_rate(g0),
            Model::Hovorka(p) => p.basal_rate(g0),
        }
    }

    fn impulse_gain(&self) -> f64 {
        match self {
            Model::Bergman(p) => p.impulse_gain(),
            Model::Hovorka(p) => p.impulse_gain(),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Model::Bergman(p) => p.validate(),
            Model::Hovorka(p) => p.validate(),
        }
    }
}

/// Generic steady-state initializer, named to match the operation it
/// performs for either model.
pub fn steady_state_init<M: GlucoseModel>(model: &M, u_bar: f64) -> Result<Vec<f64>> {
    model.steady_state(u_bar)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn input_value_characteristic_function() {
        let p = PulseInput::new(2.0, 3.0, 100.0, 50.0);
        // closed left endpoint
        assert_eq!(input_value(&p, 100.0), 5.0);
        // closed right endpoint
        assert_eq!(input_value(&p, 150.0), 5.0);
        // outside
        assert_eq!(input_value(&p, 99.999), 2.0);
        assert_eq!(input_value(&p, 150.001), 2.0);
        assert_eq!(input_value(&p, 0.0), 2.0);
    }

    #[test]
    fn impulse_never_adds_pointwise() {
        let p = PulseInput::new(2.0, 1e6, 100.0, 0.0);
        assert!(p.is_impulse());
        assert_eq!(input_value(&p, 100.0), 2.0);
    }

    #[test]
    fn pulse_validation_rejects_negatives() {
        assert!(PulseInput::new(-1.0, 0.0, 0.0, 0.0).validate().is_err());
        assert!(PulseInput::new(0.0, -1.0, 0.0, 0.0).validate().is_err());
        assert!(PulseInput::new(0.0, 0.0, -1.0, 0.0).validate().is_err());
        assert!(PulseInput::new(0.0, 0.0, 0.0, -1.0).validate().is_err());
        assert!(PulseInput::new(1.0, 1.0, 1.0, 1.0).validate().is_ok());
    }
}
