//! Experiment descriptions: model choice and parameters, floor, meal,
//! integration grid, tolerances and solver bounds, round-trippable through
//! TOML scenario files.
//!
//! Model parameter sets are separate one-document-per-model TOML files; the
//! two shipped presets are `bergman-paper` and `hovorka-2004-70kg`. A
//! scenario file either names a preset (`preset = "..."`) or embeds the
//! parameters inline under `[params]`. Unknown keys anywhere are errors.
//! The `BOLUSOPT_PRESET_DIR` environment variable redirects preset lookup
//! to `<dir>/<name>.toml`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analysis::Tolerances;
use crate::disturbance::MealCascade;
use crate::error::{Error, Result};
use crate::integrate::SimConfig;
use crate::models::{GlucoseModel, Model, PulseInput};

/// Environment variable overriding the preset directory.
pub const PRESET_DIR_ENV: &str = "BOLUSOPT_PRESET_DIR";

const BERGMAN_PAPER_TOML: &str = include_str!("../presets/bergman-paper.toml");
const HOVORKA_2004_TOML: &str = include_str!("../presets/hovorka-2004-70kg.toml");

/// Names of the built-in parameter presets.
pub fn preset_names() -> &'static [&'static str] {
    &["bergman-paper", "hovorka-2004-70kg"]
}

/// Raw TOML document of a built-in preset.
pub fn preset_document(name: &str) -> Result<&'static str> {
    match name {
        "bergman-paper" => Ok(BERGMAN_PAPER_TOML),
        "hovorka-2004-70kg" => Ok(HOVORKA_2004_TOML),
        _ => Err(Error::InvalidScenario(format!(
            "unknown preset {name:?}; available: {}",
            preset_names().join(", ")
        ))),
    }
}

/// Load a model parameter set by preset name. When `BOLUSOPT_PRESET_DIR`
/// is set, `<dir>/<name>.toml` is read instead of the embedded document.
pub fn load_preset(name: &str) -> Result<Model> {
    if let Ok(dir) = std::env::var(PRESET_DIR_ENV) {
        let path = Path::new(&dir).join(format!("{name}.toml"));
        let text = std::fs::read_to_string(&path).map_err(|e| {
            Error::InvalidScenario(format!(
                "preset {name:?} not found at {} ({e})",
                path.display()
            ))
        })?;
        return parse_model(&text);
    }
    parse_model(preset_document(name)?)
}

fn parse_model(text: &str) -> Result<Model> {
    let model: Model =
        toml::from_str(text).map_err(|e| Error::Parse(format!("model parameters: {e}")))?;
    model.validate()?;
    Ok(model)
}

/// Search bounds and iteration caps for the solvers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverBounds {
    /// Smallest duration considered (min); 0 = impulse.
    pub tau_lo: f64,
    /// Largest duration considered (min).
    pub tau_hi: f64,
    /// Earliest delivery time (min).
    pub t_lo: f64,
    /// Latest delivery time (min); defaults to the last meal pulse edge.
    pub t_hi: Option<f64>,
    /// Iteration cap for each bisection loop.
    pub max_iterations: usize,
    /// Durations probed to seed the bracket before bisection.
    pub seed_durations: Vec<f64>,
}

impl Default for SolverBounds {
    fn default() -> Self {
        Self {
            tau_lo: 0.0,
            tau_hi: 1600.0,
            t_lo: 0.0,
            t_hi: None,
            max_iterations: 200,
            seed_durations: vec![2.0, 50.0, 100.0, 200.0, 400.0, 800.0, 1600.0],
        }
    }
}

/// A full experiment description.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    pub name: Option<String>,
    /// Resolved model parameters (serialized inline).
    #[serde(rename = "params")]
    pub model: Model,
    /// Target steady-state glucose (mmol/L).
    pub g0: f64,
    /// Hypoglycaemia floor (mmol/L), `0 < lambda < g0`.
    pub lambda: f64,
    pub meal: MealCascade,
    pub sim: SimConfig,
    pub tolerances: Tolerances,
    pub solver: SolverBounds,
}

/// On-disk scenario form: preset reference or inline parameters, with
/// optional sections falling back to model-appropriate defaults.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    name: Option<String>,
    preset: Option<String>,
    params: Option<Model>,
    g0: f64,
    lambda: f64,
    meal: Option<MealCascade>,
    sim: Option<SimConfig>,
    tolerances: Option<Tolerances>,
    solver: Option<SolverBounds>,
}

impl Scenario {
    /// The Bergman reproduction experiment: the published parameter set,
    /// g0 = 5 mmol/L, floor 4 mmol/L and the two-pulse meal through the
    /// T = 60 min cascade with output gain 1/263.
    pub fn bergman_paper() -> Self {
        Self::from_toml(BERGMAN_SCENARIO).expect("built-in scenario must parse")
    }

    /// The Hovorka reproduction experiment: the 2004 70 kg parameter set,
    /// g0 = 5 mmol/L, floor 4 mmol/L, T = 55 min cascade with drive gain
    /// 0.8 and output gain 1/55.
    pub fn hovorka_2004() -> Self {
        Self::from_toml(HOVORKA_SCENARIO).expect("built-in scenario must parse")
    }

    /// Built-in complete scenarios by name (same names as the presets).
    pub fn builtin(name: &str) -> Result<Self> {
        match name {
            "bergman-paper" => Ok(Self::bergman_paper()),
            "hovorka-2004-70kg" => Ok(Self::hovorka_2004()),
            _ => Err(Error::InvalidScenario(format!(
                "unknown built-in scenario {name:?}; available: {}",
                preset_names().join(", ")
            ))),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let file: ScenarioFile =
            toml::from_str(text).map_err(|e| Error::Parse(format!("scenario: {e}")))?;
        let model = match (&file.preset, file.params) {
            (Some(_), Some(_)) => {
                return Err(Error::InvalidScenario(
                    "scenario sets both `preset` and `[params]`; pick one".into(),
                ))
            }
            (Some(name), None) => load_preset(name)?,
            (None, Some(params)) => params,
            (None, None) => {
                return Err(Error::InvalidScenario(
                    "scenario needs either `preset` or `[params]`".into(),
                ))
            }
        };
        let sim = file.sim.unwrap_or_else(|| {
            let horizon = match model {
                Model::Bergman(_) => 2000.0,
                Model::Hovorka(_) => 2500.0,
            };
            SimConfig::new(horizon, 0.05)
        });
        let scenario = Scenario {
            name: file.name,
            model,
            g0: file.g0,
            lambda: file.lambda,
            meal: file.meal.unwrap_or_else(MealCascade::none),
            sim,
            tolerances: file.tolerances.unwrap_or_default(),
            solver: file.solver.unwrap_or_default(),
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(format!("serialize scenario: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.meal.validate()?;
        self.sim.validate()?;
        self.tolerances.validate()?;
        if !(self.g0.is_finite() && self.g0 > 0.0) {
            return Err(Error::InvalidScenario(format!("g0 must be > 0, got {}", self.g0)));
        }
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::InvalidScenario(format!(
                "lambda must be > 0, got {}",
                self.lambda
            )));
        }
        if self.lambda >= self.g0 {
            return Err(Error::InvalidScenario(format!(
                "lambda = {} must be below g0 = {}",
                self.lambda, self.g0
            )));
        }
        let b = &self.solver;
        if !(b.tau_lo >= 0.0 && b.tau_hi > b.tau_lo && b.tau_hi.is_finite()) {
            return Err(Error::InvalidScenario(format!(
                "duration bounds [{}, {}] invalid",
                b.tau_lo, b.tau_hi
            )));
        }
        let t_hi = self.delivery_window().1;
        if !(b.t_lo >= 0.0 && t_hi > b.t_lo && t_hi <= self.sim.horizon) {
            return Err(Error::InvalidScenario(format!(
                "delivery window [{}, {t_hi}] invalid for horizon {}",
                b.t_lo, self.sim.horizon
            )));
        }
        if b.max_iterations == 0 {
            return Err(Error::InvalidScenario("max_iterations must be >= 1".into()));
        }
        Ok(())
    }

    /// Basal rate holding `g0` for this scenario's model.
    pub fn basal(&self) -> Result<f64> {
        self.model.basal_rate(self.g0)
    }

    /// Bolus pulse on top of this scenario's basal rate.
    pub fn pulse(&self, u_hat: f64, t_prime: f64, tau: f64) -> Result<PulseInput> {
        Ok(PulseInput::new(self.basal()?, u_hat, t_prime, tau))
    }

    /// The delivery-time search window `[t_lo, t_hi]`; `t_hi` defaults to
    /// the last meal edge (or 40% of the horizon with no meal).
    pub fn delivery_window(&self) -> (f64, f64) {
        let t_hi = self.solver.t_hi.unwrap_or_else(|| {
            let edge = self.meal.last_edge();
            if edge > 0.0 {
                edge
            } else {
                0.4 * self.sim.horizon
            }
        });
        (self.solver.t_lo, t_hi)
    }
}

const BERGMAN_SCENARIO: &str = r#"
name = "bergman-paper"
preset = "bergman-paper"
g0 = 5.0
lambda = 4.0

[meal]
# The source absorption rate r = f1/263 is on the mg/dl scale; the output
# gain carries the extra 1/18 so r lands in mmol/(L min).
time_constant = 60.0
output_gain = 0.00021123785382340515 # 1/(263*18)
drive_gain = 1.0
pulses = [
  { height = 5.0, start = 300.0, end = 800.0 },
  { height = 100.0, start = 450.0, end = 460.0 },
]

[sim]
horizon = 2000.0
dt = 0.05
"#;

const HOVORKA_SCENARIO: &str = r#"
name = "hovorka-2004-70kg"
preset = "hovorka-2004-70kg"
g0 = 5.0
lambda = 4.0

[meal]
# Ingestion pulses are glucose mass on the 100 mg scale; the output gain
# folds the 100/18 conversion into r = f1/55 so r lands in mmol/min.
time_constant = 55.0
output_gain = 0.10101010101010101 # 100/(18*55)
drive_gain = 0.8
pulses = [
  { height = 0.2, start = 300.0, end = 800.0 },
  { height = 5.0, start = 450.0, end = 460.0 },
]

[sim]
horizon = 2500.0
dt = 0.05
"#;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::HovorkaParams;

    #[test]
    fn builtin_scenarios_parse_and_validate() {
        let b = Scenario::bergman_paper();
        assert_eq!(b.model.name(), "bergman");
        assert_eq!(b.sim.horizon, 2000.0);
        assert_eq!(b.lambda, 4.0);
        let h = Scenario::hovorka_2004();
        assert_eq!(h.model.name(), "hovorka");
        assert_eq!(h.sim.horizon, 2500.0);
        assert_eq!(h.meal.drive_gain, 0.8);
    }

    #[test]
    fn bergman_preset_matches_published_constants() {
        let Model::Bergman(p) = load_preset("bergman-paper").unwrap() else {
            panic!("wrong model")
        };
        assert_eq!(p.a, 0.0101);
        assert_eq!(p.b, 8.16e-4);
        assert_eq!(p.c, 0.025);
        assert_eq!(p.d, 0.025);
        assert!((p.k - 1.0 / 1806.0).abs() < 1e-18);
        assert_eq!(p.g_eff, 0.0023);
        // E = 1.0 on the source's mg/dl scale, carried in mmol/L.
        assert_eq!(p.egp, 1.0 / 18.0);
    }

    #[test]
    fn hovorka_preset_matches_constructor() {
        let Model::Hovorka(p) = load_preset("hovorka-2004-70kg").unwrap() else {
            panic!("wrong model")
        };
        let reference = HovorkaParams::hovorka_2004(70.0);
        assert_eq!(p, reference);
    }

    #[test]
    fn scenario_roundtrip_is_identity() {
        for scn in [Scenario::bergman_paper(), Scenario::hovorka_2004()] {
            let text = scn.to_toml().unwrap();
            let back = Scenario::from_toml(&text).unwrap();
            assert_eq!(scn, back);
            // And a second cycle for good measure.
            assert_eq!(back.to_toml().unwrap(), text);
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = r#"
preset = "bergman-paper"
g0 = 5.0
lambda = 4.0
tpyo = 1.0
"#;
        assert!(Scenario::from_toml(text).is_err());

        let text = r#"
g0 = 5.0
lambda = 4.0
[params]
model = "bergman"
a = 0.0101
b = 0.000816
c = 0.025
d = 0.025
k = 0.0005537098560354374
G = 0.0023
E = 1.0
not_a_param = 3.0
"#;
        assert!(Scenario::from_toml(text).is_err());
    }

    #[test]
    fn lambda_must_be_below_g0() {
        let mut scn = Scenario::bergman_paper();
        scn.lambda = 5.0;
        assert!(matches!(scn.validate(), Err(Error::InvalidScenario(_))));
        scn.lambda = -1.0;
        assert!(scn.validate().is_err());
    }

    #[test]
    fn preset_dir_override() {
        // Strict override: pointing the env var at an empty directory makes
        // lookup fail, unsetting it restores the embedded preset. Runs in a
        // forked-free single test to avoid races on the env var.
        let dir = std::env::temp_dir().join("bolusopt-preset-test");
        std::fs::create_dir_all(&dir).unwrap();
        unsafe { std::env::set_var(PRESET_DIR_ENV, &dir) };
        assert!(load_preset("bergman-paper").is_err());
        let mut doc = preset_document("bergman-paper").unwrap().to_string();
        doc = doc.replace("E = 1.0", "E = 2.0");
        std::fs::write(dir.join("bergman-paper.toml"), doc).unwrap();
        let Model::Bergman(p) = load_preset("bergman-paper").unwrap() else {
            panic!("wrong model")
        };
        assert_eq!(p.egp, 2.0);
        unsafe { std::env::remove_var(PRESET_DIR_ENV) };
        let Model::Bergman(p) = load_preset("bergman-paper").unwrap() else {
            panic!("wrong model")
        };
        assert_eq!(p.egp, 1.0);
        let _ = std::fs::remove_dir_all(&dir);
    }

    #[test]
    fn delivery_window_defaults_to_meal_edge() {
        let scn = Scenario::bergman_paper();
        assert_eq!(scn.delivery_window(), (0.0, 800.0));
        let mut scn = scn;
        scn.solver.t_hi = Some(600.0);
        assert_eq!(scn.delivery_window(), (0.0, 600.0));
    }
}
