//! Run configuration: a TOML file with per-topic sections, frequencies in Hz.

use std::path::Path;

use optoent::model::{hz, CavityParams, DampingModel, MeasurementChannel, PhysicalParams};
use optoent::sweep::{Axis, AxisParam, OutputField, Spacing, SweepSpec};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConfigFile {
    pub mirror: Mirror,
    pub cavity: Cavity,
    pub detection: Detection,
    pub montecarlo: MonteCarlo,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Sweep>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Mirror {
    /// Mass of each mirror [kg].
    pub mass: f64,
    pub frequency_hz: f64,
    /// Bare mechanical damping Gamma.
    pub damping_hz: f64,
    pub temperature: f64,
    /// Feedback-modified damping gamma_m.
    pub feedback_damping_hz: f64,
    pub damping_model: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Cavity {
    pub kappa_minus_hz: f64,
    pub zeta: f64,
    pub delta_minus: f64,
    /// Optomechanical coupling g.
    pub coupling_hz: f64,
    /// Ignore `coupling_hz` and compute g from the intracavity amplitude.
    pub coupling_from_amplitude: bool,
    pub length: f64,
    pub laser_frequency_hz: f64,
    pub input_power: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Detection {
    pub efficiency: f64,
    pub optical_occupation: f64,
    /// `x` (amplitude) or `y` (phase).
    pub channel: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MonteCarlo {
    pub trajectories: usize,
    /// Collection window in units of the conditional relaxation time.
    pub collect_relaxations: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub outputs: Vec<String>,
    pub axis: Vec<SweepAxis>,
}

/// Gamma endpoints are in Hz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    pub param: String,
    pub start: f64,
    pub end: f64,
    pub points: usize,
    #[serde(default = "linear")]
    pub spacing: String,
}

fn linear() -> String {
    "linear".into()
}

impl Default for Mirror {
    fn default() -> Self {
        Mirror {
            mass: 7.71e-6,
            frequency_hz: 2.2,
            damping_hz: 1e-6,
            temperature: 300.0,
            feedback_damping_hz: 6.9e-3,
            damping_model: "structural".into(),
        }
    }
}

impl Default for Cavity {
    fn default() -> Self {
        Cavity {
            kappa_minus_hz: 1.64e6,
            zeta: 3.0,
            delta_minus: 0.2,
            coupling_hz: 2.68e5,
            coupling_from_amplitude: false,
            length: 0.1,
            laser_frequency_hz: 3e14,
            input_power: 30e-3,
            amplitude: 1.27e5,
        }
    }
}

impl Default for Detection {
    fn default() -> Self {
        Detection { efficiency: 0.92, optical_occupation: 0.0, channel: "x".into() }
    }
}

impl Default for MonteCarlo {
    fn default() -> Self {
        MonteCarlo { trajectories: 2000, collect_relaxations: 50.0, seed: 0 }
    }
}

impl ConfigFile {
    /// Reads `path` (or the defaults) and applies `key=value` overrides.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
                let parsed: ConfigFile =
                    toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {}", p.display(), e.message())))?;
                toml::Table::try_from(parsed).map_err(|e| CliError::Config(e.to_string()))?
            }
            None => toml::Table::try_from(ConfigFile::default()).map_err(|e| CliError::Config(e.to_string()))?,
        };
        for item in overrides {
            apply_override(&mut table, item)?;
        }
        let config: ConfigFile = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(format!("after --set overrides: {}", e.message())))?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn channel(&self) -> Result<MeasurementChannel, CliError> {
        MeasurementChannel::parse(&self.detection.channel).ok_or_else(|| {
            CliError::Config(format!("detection.channel: expected `x` or `y`, got `{}`", self.detection.channel))
        })
    }

    /// Physical parameters in SI units with angular frequencies.
    pub fn physical(&self) -> Result<PhysicalParams, CliError> {
        let damping = match self.mirror.damping_model.as_str() {
            "structural" => DampingModel::Structural,
            "velocity" => DampingModel::Velocity,
            other => {
                return Err(CliError::Config(format!(
                    "mirror.damping_model: expected `structural` or `velocity`, got `{other}`"
                )))
            }
        };
        let c = &self.cavity;
        let m = &self.mirror;
        let coupling = if c.coupling_from_amplitude {
            optoent::model::coupling_from_cavity(
                c.length,
                hz(c.laser_frequency_hz),
                m.mass,
                hz(m.frequency_hz),
                c.amplitude,
            )?
        } else {
            hz(c.coupling_hz)
        };
        let params = PhysicalParams {
            mass: m.mass,
            omega: hz(m.frequency_hz),
            gamma_bare: hz(m.damping_hz),
            temperature: m.temperature,
            gamma_m: hz(m.feedback_damping_hz),
            kappa_minus: hz(c.kappa_minus_hz),
            zeta: c.zeta,
            delta_minus: c.delta_minus,
            coupling,
            eta: self.detection.efficiency,
            n_th_optical: self.detection.optical_occupation,
            damping,
            cavity: Some(CavityParams {
                length: c.length,
                omega_laser: hz(c.laser_frequency_hz),
                input_power: c.input_power,
                amplitude: c.amplitude,
            }),
        };
        params.validate().map_err(|e| match e {
            optoent::Error::InvalidParameter { field, reason } => {
                CliError::Config(format!("`{}`: {reason}", config_key(field)))
            }
            other => other.into(),
        })?;
        Ok(params)
    }

    /// Sweep from the `[sweep]` section, if present.
    pub fn sweep_spec(
        &self,
        base: &PhysicalParams,
        channel: MeasurementChannel,
    ) -> Result<Option<SweepSpec>, CliError> {
        let Some(sweep) = &self.sweep else { return Ok(None) };
        let outputs = sweep
            .outputs
            .iter()
            .map(|s| {
                OutputField::parse(s).ok_or_else(|| CliError::Config(format!("sweep.outputs: unknown field `{s}`")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let axes = sweep
            .axis
            .iter()
            .map(|a| {
                let param = AxisParam::parse(&a.param)
                    .ok_or_else(|| CliError::Config(format!("sweep.axis.param: unknown parameter `{}`", a.param)))?;
                let spacing = match a.spacing.as_str() {
                    "linear" => Spacing::Linear,
                    "log" => Spacing::Log,
                    other => {
                        return Err(CliError::Config(format!(
                            "sweep.axis.spacing: expected `linear` or `log`, got `{other}`"
                        )))
                    }
                };
                let scale = if param == AxisParam::Gamma { hz(1.0) } else { 1.0 };
                Ok(Axis { param, start: a.start * scale, end: a.end * scale, points: a.points, spacing })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let spec = SweepSpec { base: *base, axes, channel, outputs };
        spec.validate()?;
        Ok(Some(spec))
    }
}

/// Config key of a physical-parameter field.
fn config_key(field: &str) -> &str {
    match field {
        "mass" => "mirror.mass",
        "omega" => "mirror.frequency_hz",
        "gamma_bare" => "mirror.damping_hz",
        "temperature" => "mirror.temperature",
        "gamma_m" => "mirror.feedback_damping_hz",
        "kappa_minus" => "cavity.kappa_minus_hz",
        "zeta" => "cavity.zeta",
        "delta_minus" => "cavity.delta_minus",
        "coupling" => "cavity.coupling_hz",
        "eta" => "detection.efficiency",
        "n_th_optical" => "detection.optical_occupation",
        "cavity.omega_laser" => "cavity.laser_frequency_hz",
        other => other,
    }
}

fn apply_override(table: &mut toml::Table, item: &str) -> Result<(), CliError> {
    let (key, raw) =
        item.split_once('=').ok_or_else(|| CliError::Usage(format!("--set expects key=value, got `{item}`")))?;
    let key = key.trim();
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Usage(format!("--set: malformed key `{key}`")));
    }
    let value = parse_value(raw.trim());
    let (last, path) = parts.split_last().expect("non-empty key");
    let mut cursor = table;
    for part in path {
        let entry = cursor.entry(part.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cursor =
            entry.as_table_mut().ok_or_else(|| CliError::Config(format!("--set {key}: `{part}` is not a section")))?;
    }
    if path.is_empty() {
        return Err(CliError::Config(format!("--set {key}: unknown key `{key}` (keys are section.name)")));
    }
    cursor.insert(last.to_string(), value);
    Ok(())
}

/// Interprets an override as a TOML value, falling back to a bare string.
fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_the_reference_setup() {
        let cfg = ConfigFile::load(None, &[]).unwrap();
        assert_eq!(cfg.physical().unwrap(), PhysicalParams::reference_setup());
    }

    #[test]
    fn overrides_parse_numbers_and_strings() {
        let cfg = ConfigFile::load(None, &["cavity.zeta=5".into(), "detection.channel=y".into()]).unwrap();
        assert_eq!(cfg.cavity.zeta, 5.0);
        assert_eq!(cfg.channel().unwrap(), MeasurementChannel::PhaseY);
    }

    #[test]
    fn unknown_keys_are_named() {
        let err = ConfigFile::load(None, &["cavity.zetta=5".into()]).unwrap_err();
        assert!(err.to_string().contains("zetta"), "{err}");
        let err = toml::from_str::<ConfigFile>("[mirror]\nmas = 1.0\n").unwrap_err();
        assert!(err.message().contains("mas"));
    }

    #[test]
    fn effective_config_round_trips() {
        let cfg = ConfigFile::load(None, &["mirror.temperature=4.2".into(), "cavity.delta_minus=0.15".into()]).unwrap();
        let back: ConfigFile = toml::from_str(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
    }
}
