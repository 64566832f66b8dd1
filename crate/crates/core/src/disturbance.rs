//! Meal absorption forcing: rectangular ingestion pulses fed through a 2x2
//! linear cascade.
//!
//! ```text
//! df1/dt = (-f1 + f2) / T
//! df2/dt = -f2 / T + drive_gain * rho(t)
//! r(t)   = output_gain * f1(t)
//! ```
//!
//! `rho` is a sum of rectangular pulses; the cascade smooths them into the
//! absorption rate `r` that forces the glucose equation. The DC gain from a
//! sustained `rho` to `f1` is `drive_gain * T`, so the total exposure is
//! `integral(r) = output_gain * drive_gain * T * integral(rho)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One rectangular ingestion pulse: `height` on `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MealPulse {
    pub height: f64,
    pub start: f64,
    pub end: f64,
}

/// The 2x2 meal cascade and its pulse train.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MealCascade {
    /// Cascade time constant (min).
    pub time_constant: f64,
    /// Gain from `f1` to the absorption rate `r`.
    pub output_gain: f64,
    /// Gain applied to `rho` before it drives `f2`.
    pub drive_gain: f64,
    /// Rectangular pulses making up `rho(t)`.
    pub pulses: Vec<MealPulse>,
}

impl MealCascade {
    /// No meal at all: `r(t) = 0`.
    pub fn none() -> Self {
        Self { time_constant: 60.0, output_gain: 1.0, drive_gain: 1.0, pulses: Vec::new() }
    }

    /// Pulse train value `rho(t)`. Pulse intervals are closed.
    pub fn pulse_value(&self, t: f64) -> f64 {
        self.pulses
            .iter()
            .filter(|p| t >= p.start && t <= p.end)
            .map(|p| p.height)
            .sum()
    }

    /// All pulse edges, for the integrator's breakpoint set.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut edges: Vec<f64> = self.pulses.iter().flat_map(|p| [p.start, p.end]).collect();
        edges.sort_by(f64::total_cmp);
        edges.dedup();
        edges
    }

    /// Last time `rho` can be non-zero (0 if no pulses).
    pub fn last_edge(&self) -> f64 {
        self.pulses.iter().map(|p| p.end).fold(0.0, f64::max)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.time_constant.is_finite() && self.time_constant > 0.0) {
            return Err(Error::InvalidScenario(format!(
                "meal time constant must be > 0, got {}",
                self.time_constant
            )));
        }
        for (i, p) in self.pulses.iter().enumerate() {
            if !(p.start.is_finite() && p.end.is_finite() && p.height.is_finite()) {
                return Err(Error::InvalidScenario(format!("meal pulse {i} has non-finite fields")));
            }
            if p.start >= p.end {
                return Err(Error::InvalidScenario(format!(
                    "meal pulse {i} interval [{}, {}] is not well-ordered",
                    p.start, p.end
                )));
            }
            if p.start < 0.0 {
                return Err(Error::InvalidScenario(format!(
                    "meal pulse {i} starts before t = 0"
                )));
            }
        }
        Ok(())
    }
}

/// Cascade state derivative at time `t`.
pub fn cascade_derivatives(f1: f64, f2: f64, cascade: &MealCascade, t: f64) -> (f64, f64) {
    let inv_t = 1.0 / cascade.time_constant;
    let rho = cascade.pulse_value(t);
    ((-f1 + f2) * inv_t, -f2 * inv_t + cascade.drive_gain * rho)
}

/// Absorption rate from the first cascade state.
pub fn meal_rate(f1: f64, cascade: &MealCascade) -> f64 {
    cascade.output_gain * f1
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bergman_meal() -> MealCascade {
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
    fn zero_state_outside_pulses_is_equilibrium() {
        let c = bergman_meal();
        let (d1, d2) = cascade_derivatives(0.0, 0.0, &c, 100.0);
        assert_eq!((d1, d2), (0.0, 0.0));
    }

    #[test]
    fn pulse_train_values() {
        let c = bergman_meal();
        // Both pulses overlap only on [450, 460].
        assert_eq!(c.pulse_value(455.0), 105.0);
        assert_eq!(c.pulse_value(450.0), 105.0);
        assert_eq!(c.pulse_value(460.0), 105.0);
        assert_eq!(c.pulse_value(500.0), 5.0);
        assert_eq!(c.pulse_value(299.9), 0.0);
        assert_eq!(c.pulse_value(800.0), 5.0);
        assert_eq!(c.pulse_value(800.1), 0.0);
    }

    #[test]
    fn meal_rate_is_gain_times_f1() {
        let c = bergman_meal();
        assert_eq!(meal_rate(0.0, &c), 0.0);
        assert!((meal_rate(263.0, &c) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn breakpoints_sorted_and_deduped() {
        let c = bergman_meal();
        assert_eq!(c.breakpoints(), vec![300.0, 450.0, 460.0, 800.0]);
        assert_eq!(c.last_edge(), 800.0);
    }

    #[test]
    fn validation_rejects_inverted_pulse() {
        let mut c = bergman_meal();
        c.pulses[0] = MealPulse { height: 1.0, start: 10.0, end: 10.0 };
        assert!(c.validate().is_err());
    }
}
