//! Scenario files.
//!
//! The on-disk form mirrors [`Scenario`] field for field, with the unit of
//! every physical quantity spelled out in the key. An infinite radius (a
//! flat sheet) is written as the string `"inf"` so the same document can be
//! echoed into JSON.

use std::fmt;
use std::path::Path;

use escal_core::beamformer::ObjectiveKind;
use escal_core::escal::LoopConfig;
use escal_core::scenario::{DeformationTrajectory, InitMode, Scenario};
use escal_core::signal::{NoiseConfig, PhaseMapping};
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::HarnessError;

/// A curvature radius in metres; `f64::INFINITY` means flat.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Radius(pub f64);

impl Serialize for Radius {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0 == f64::INFINITY {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Radius {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Radius;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a radius in metres or \"inf\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Radius, E> {
                Ok(Radius(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Radius, E> {
                Ok(Radius(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Radius, E> {
                Ok(Radius(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Radius, E> {
                match v {
                    "inf" | "flat" => Ok(Radius(f64::INFINITY)),
                    _ => Err(E::invalid_value(de::Unexpected::Str(v), &self)),
                }
            }
        }
        d.deserialize_any(V)
    }
}

/// TOML integers are signed 64-bit; larger `u64` values are written as
/// decimal strings.
mod wide_u64 {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &u64, s: S) -> Result<S::Ok, S::Error> {
        match i64::try_from(*v) {
            Ok(i) => s.serialize_i64(i),
            Err(_) => s.serialize_str(&v.to_string()),
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Int(u64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Int(v) => Ok(v),
            Repr::Text(t) => t.parse().map_err(de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TrajectoryFile {
    Static {
        r0_m: Radius,
    },
    Step {
        r0_m: Radius,
        r1_m: Radius,
        #[serde(with = "wide_u64")]
        step_tick: u64,
    },
    Sinusoidal {
        r0_m: f64,
        vib_amplitude_m: f64,
        vib_freq_hz: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitFile {
    Nominal,
    Coarse,
    Codes { codes: Vec<u8> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveFile {
    Magnitude,
    Power,
    InPhase,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseMappingFile {
    Uniform256,
    Quadrant64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoopFile {
    pub omega_p_rad_s: f64,
    pub omega_tick_rad_s: f64,
    pub lut_len: usize,
    pub lut_entry_bits: u32,
    pub hpf_cutoff_rad_s: f64,
    pub a_phi_lsb: f64,
    pub a_v: f64,
    pub psi_rad: f64,
    pub code_bits_internal: u32,
    pub code_bits_output: u32,
    /// Element this loop drives.
    pub element: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseFile {
    pub enabled: bool,
    pub snr_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub rows: usize,
    pub columns: usize,
    pub spacing_m: f64,
    pub freq_rf_hz: f64,
    /// Omitted for a homodyne receiver.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub freq_lo_hz: Option<f64>,
    pub aoa_rad: f64,
    pub amplitude: f64,
    pub phase_mapping: PhaseMappingFile,
    pub gain_code: u8,
    pub delay_code: u8,
    pub dwell_samples: usize,
    pub objective: ObjectiveFile,
    #[serde(with = "wide_u64")]
    pub tick_budget: u64,
    #[serde(with = "wide_u64")]
    pub seed: u64,
    pub stop_on_convergence: bool,
    pub pattern_step_deg: f64,
    pub trajectory: TrajectoryFile,
    pub init: InitFile,
    pub noise: NoiseFile,
    #[serde(default)]
    pub loops: Vec<LoopFile>,
}

impl From<&Scenario> for ScenarioFile {
    fn from(s: &Scenario) -> Self {
        let trajectory = match s.trajectory {
            DeformationTrajectory::Static { r0 } => TrajectoryFile::Static { r0_m: Radius(r0) },
            DeformationTrajectory::Step { r0, r1, step_tick } => TrajectoryFile::Step {
                r0_m: Radius(r0),
                r1_m: Radius(r1),
                step_tick,
            },
            DeformationTrajectory::Sinusoidal {
                r0,
                vib_amplitude,
                vib_freq,
            } => TrajectoryFile::Sinusoidal {
                r0_m: r0,
                vib_amplitude_m: vib_amplitude,
                vib_freq_hz: vib_freq,
            },
        };
        let init = match &s.init {
            InitMode::Nominal => InitFile::Nominal,
            InitMode::Coarse => InitFile::Coarse,
            InitMode::Codes(c) => InitFile::Codes { codes: c.clone() },
        };
        let loops = s
            .loops
            .iter()
            .zip(&s.loop_elements)
            .map(|(c, &element)| LoopFile {
                omega_p_rad_s: c.omega_p,
                omega_tick_rad_s: c.omega_tick,
                lut_len: c.lut_len,
                lut_entry_bits: c.lut_entry_bits,
                hpf_cutoff_rad_s: c.hpf_cutoff,
                a_phi_lsb: c.a_phi,
                a_v: c.a_v,
                psi_rad: c.psi,
                code_bits_internal: c.code_bits_internal,
                code_bits_output: c.code_bits_output,
                element,
            })
            .collect();
        ScenarioFile {
            rows: s.rows,
            columns: s.columns,
            spacing_m: s.spacing_m,
            freq_rf_hz: s.freq_rf_hz,
            freq_lo_hz: s.freq_lo_hz,
            aoa_rad: s.aoa_rad,
            amplitude: s.amplitude,
            phase_mapping: match s.phase_mapping {
                PhaseMapping::Uniform256 => PhaseMappingFile::Uniform256,
                PhaseMapping::Quadrant64 => PhaseMappingFile::Quadrant64,
            },
            gain_code: s.gain_code,
            delay_code: s.delay_code,
            dwell_samples: s.dwell,
            objective: match s.objective {
                ObjectiveKind::Magnitude => ObjectiveFile::Magnitude,
                ObjectiveKind::Power => ObjectiveFile::Power,
                ObjectiveKind::InPhase => ObjectiveFile::InPhase,
            },
            tick_budget: s.tick_budget,
            seed: s.seed,
            stop_on_convergence: s.stop_on_convergence,
            pattern_step_deg: s.pattern_step_deg,
            trajectory,
            init,
            noise: NoiseFile {
                enabled: s.noise.enabled,
                snr_db: s.noise.snr_db,
            },
            loops,
        }
    }
}

impl From<&ScenarioFile> for Scenario {
    fn from(f: &ScenarioFile) -> Self {
        let trajectory = match f.trajectory {
            TrajectoryFile::Static { r0_m } => DeformationTrajectory::Static { r0: r0_m.0 },
            TrajectoryFile::Step {
                r0_m,
                r1_m,
                step_tick,
            } => DeformationTrajectory::Step {
                r0: r0_m.0,
                r1: r1_m.0,
                step_tick,
            },
            TrajectoryFile::Sinusoidal {
                r0_m,
                vib_amplitude_m,
                vib_freq_hz,
            } => DeformationTrajectory::Sinusoidal {
                r0: r0_m,
                vib_amplitude: vib_amplitude_m,
                vib_freq: vib_freq_hz,
            },
        };
        Scenario {
            rows: f.rows,
            columns: f.columns,
            spacing_m: f.spacing_m,
            freq_rf_hz: f.freq_rf_hz,
            freq_lo_hz: f.freq_lo_hz,
            aoa_rad: f.aoa_rad,
            amplitude: f.amplitude,
            trajectory,
            phase_mapping: match f.phase_mapping {
                PhaseMappingFile::Uniform256 => PhaseMapping::Uniform256,
                PhaseMappingFile::Quadrant64 => PhaseMapping::Quadrant64,
            },
            gain_code: f.gain_code,
            delay_code: f.delay_code,
            dwell: f.dwell_samples,
            objective: match f.objective {
                ObjectiveFile::Magnitude => ObjectiveKind::Magnitude,
                ObjectiveFile::Power => ObjectiveKind::Power,
                ObjectiveFile::InPhase => ObjectiveKind::InPhase,
            },
            init: match &f.init {
                InitFile::Nominal => InitMode::Nominal,
                InitFile::Coarse => InitMode::Coarse,
                InitFile::Codes { codes } => InitMode::Codes(codes.clone()),
            },
            loops: f
                .loops
                .iter()
                .map(|l| LoopConfig {
                    omega_p: l.omega_p_rad_s,
                    omega_tick: l.omega_tick_rad_s,
                    lut_len: l.lut_len,
                    lut_entry_bits: l.lut_entry_bits,
                    hpf_cutoff: l.hpf_cutoff_rad_s,
                    a_phi: l.a_phi_lsb,
                    a_v: l.a_v,
                    psi: l.psi_rad,
                    code_bits_internal: l.code_bits_internal,
                    code_bits_output: l.code_bits_output,
                })
                .collect(),
            loop_elements: f.loops.iter().map(|l| l.element).collect(),
            // the master seed drives the noise stream
            noise: NoiseConfig {
                enabled: f.noise.enabled,
                snr_db: f.noise.snr_db,
                seed: f.seed,
            },
            tick_budget: f.tick_budget,
            seed: f.seed,
            stop_on_convergence: f.stop_on_convergence,
            pattern_step_deg: f.pattern_step_deg,
        }
    }
}

impl ScenarioFile {
    pub fn to_toml(&self) -> Result<String, HarnessError> {
        toml::to_string(self)
            .map_err(|e| HarnessError::Config(format!("cannot serialize scenario: {e}")))
    }

    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        Self::with_overrides(text, &[])
    }

    /// Parses `text` after applying `key.path=value` overrides. Path segments
    /// that are integers index into arrays (`loops.0.a_phi_lsb=12`).
    pub fn with_overrides(text: &str, overrides: &[String]) -> Result<Self, HarnessError> {
        let mut table: toml::Table =
            toml::from_str(text).map_err(|e| HarnessError::Config(format!("scenario: {e}")))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        ScenarioFile::deserialize(toml::Value::Table(table))
            .map_err(|e| HarnessError::Config(format!("scenario: {e}")))
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::with_overrides(&text, overrides)
    }

    pub fn scenario(&self) -> Result<Scenario, HarnessError> {
        let s = Scenario::from(self);
        s.validate()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        Ok(s)
    }
}

fn parse_value(raw: &str) -> toml::Value {
    let probe = format!("v = {raw}");
    match toml::from_str::<toml::Table>(&probe) {
        Ok(mut t) => t
            .remove("v")
            .unwrap_or_else(|| toml::Value::String(raw.to_string())),
        // bare words such as `kind=step` are strings
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

fn apply_override(root: &mut toml::Table, assignment: &str) -> Result<(), HarnessError> {
    let bad = |why: &str| HarnessError::Usage(format!("--set {assignment}: {why}"));
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| bad("expected key=value"))?;
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(bad("empty key"));
    }
    let value = parse_value(raw.trim());
    let (last, parents) = keys.split_last().expect("split yields at least one key");
    let mut node = root
        .entry(keys[0].to_string())
        .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    if parents.is_empty() {
        *node = value;
        return Ok(());
    }
    for key in &parents[1..] {
        node = step_into(node, key).ok_or_else(|| bad(&format!("no field `{key}`")))?;
    }
    match node {
        toml::Value::Table(t) => {
            t.insert(last.to_string(), value);
        }
        toml::Value::Array(a) => {
            let i: usize = last.parse().map_err(|_| bad("array index expected"))?;
            let slot = a.get_mut(i).ok_or_else(|| bad("index out of range"))?;
            *slot = value;
        }
        _ => return Err(bad("not a section")),
    }
    Ok(())
}

fn step_into<'a>(node: &'a mut toml::Value, key: &str) -> Option<&'a mut toml::Value> {
    match node {
        toml::Value::Table(t) => Some(
            t.entry(key.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new())),
        ),
        toml::Value::Array(a) => a.get_mut(key.parse::<usize>().ok()?),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn headline_round_trips() {
        let s = Scenario::headline();
        let f = ScenarioFile::from(&s);
        let back = ScenarioFile::from_toml(&f.to_toml().unwrap()).unwrap();
        assert_eq!(back, f);
        assert_eq!(back.scenario().unwrap(), s);
    }

    #[test]
    fn flat_radius_is_a_string() {
        let s = Scenario::step_flat_to_headline();
        let text = ScenarioFile::from(&s).to_toml().unwrap();
        assert!(text.contains("r0_m = \"inf\""), "{text}");
        let back = ScenarioFile::from_toml(&text).unwrap().scenario().unwrap();
        assert_eq!(back, s);
        let json = serde_json::to_string(&ScenarioFile::from(&s)).unwrap();
        let f: ScenarioFile = serde_json::from_str(&json).unwrap();
        assert_eq!(Scenario::from(&f), s);
    }

    #[test]
    fn huge_seeds_survive_toml() {
        let mut s = Scenario {
            seed: u64::MAX,
            tick_budget: u64::MAX - 1,
            ..Scenario::headline()
        };
        s.noise.seed = s.seed;
        let text = ScenarioFile::from(&s).to_toml().unwrap();
        assert!(text.contains("seed = \"18446744073709551615\""), "{text}");
        assert_eq!(Scenario::from(&ScenarioFile::from_toml(&text).unwrap()), s);
        let f = ScenarioFile::with_overrides(&text, &["seed=3".into()]).unwrap();
        assert_eq!(f.seed, 3);
    }

    #[test]
    fn overrides_reach_nested_fields() {
        let text = ScenarioFile::from(&Scenario::headline()).to_toml().unwrap();
        let f = ScenarioFile::with_overrides(
            &text,
            &[
                "trajectory.r0_m=0.5".into(),
                "loops.1.a_phi_lsb=12.5".into(),
                "noise.enabled=true".into(),
                "seed=9".into(),
                "objective=power".into(),
            ],
        )
        .unwrap();
        assert_eq!(f.trajectory, TrajectoryFile::Static { r0_m: Radius(0.5) });
        assert_eq!(f.loops[1].a_phi_lsb, 12.5);
        assert!(f.noise.enabled);
        assert_eq!(f.seed, 9);
        assert_eq!(f.objective, ObjectiveFile::Power);
        let s = f.scenario().unwrap();
        assert_eq!(s.noise.seed, 9);
    }

    #[test]
    fn bad_overrides_are_usage_errors() {
        let text = ScenarioFile::from(&Scenario::headline()).to_toml().unwrap();
        for o in ["seed", "loops.7.a_v=1", "spacing_m.x=1", ".=3"] {
            let e = ScenarioFile::with_overrides(&text, &[o.into()]).unwrap_err();
            assert!(matches!(e, HarnessError::Usage(_)), "{o}: {e:?}");
        }
        let e = ScenarioFile::with_overrides(&text, &["bogus=1".into()]).unwrap_err();
        assert!(matches!(e, HarnessError::Config(_)));
    }

    #[test]
    fn invalid_physics_is_a_config_error() {
        let text = ScenarioFile::from(&Scenario::headline()).to_toml().unwrap();
        let f = ScenarioFile::with_overrides(&text, &["spacing_m=-1".into()]).unwrap();
        assert!(matches!(f.scenario(), Err(HarnessError::Config(_))));
    }
}
