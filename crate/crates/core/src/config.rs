//! Run configuration: TOML tables with optional unit suffixes.
//!
//! A value is either a bare number in the key's default unit or a string
//! `"<number> <unit>"`, e.g. `tau_x = "0.619 ns"` or `rep_rate = "80 MHz"`.
//! Unknown keys are rejected so typos do not silently fall back to defaults.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;
use toml::{Table, Value};

use crate::emitter::{DetectorModel, EmitterModel, LaserClock, Line};
use crate::field::{DiodeGeometry, ImageCharge, TrapFieldModel};
use crate::interferometer::{HomBench, LineShape, MichelsonScan, Polarization};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("missing required key `{0}`")]
    Missing(String),
    #[error("invalid value for `{key}`: {msg}")]
    Invalid { key: String, msg: String },
    #[error("unknown key `{0}`")]
    Unknown(String),
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Unit {
    /// ps
    Time,
    /// Hz
    Rate,
    /// nm
    Length,
    /// µeV
    Linewidth,
    /// eV
    Energy,
    /// V
    Voltage,
    None,
}

impl Unit {
    fn factor(self, suffix: &str) -> Option<f64> {
        let f = match (self, suffix) {
            (Unit::Time, "fs") => 1e-3,
            (Unit::Time, "ps") => 1.0,
            (Unit::Time, "ns") => 1e3,
            (Unit::Time, "us" | "µs") => 1e6,
            (Unit::Time, "ms") => 1e9,
            (Unit::Time, "s") => 1e12,
            (Unit::Rate, "Hz") => 1.0,
            (Unit::Rate, "kHz") => 1e3,
            (Unit::Rate, "MHz") => 1e6,
            (Unit::Rate, "GHz") => 1e9,
            (Unit::Length, "nm") => 1.0,
            (Unit::Length, "um" | "µm") => 1e3,
            (Unit::Length, "mm") => 1e6,
            (Unit::Linewidth, "ueV" | "µeV") | (Unit::Energy, "eV") => 1.0,
            (Unit::Linewidth, "meV") => 1e3,
            (Unit::Linewidth, "eV") => 1e6,
            (Unit::Energy, "meV") => 1e-3,
            (Unit::Voltage, "V") => 1.0,
            (Unit::Voltage, "mV") => 1e-3,
            _ => return None,
        };
        Some(f)
    }

    fn name(self) -> &'static str {
        match self {
            Unit::Time => "ps",
            Unit::Rate => "Hz",
            Unit::Length => "nm",
            Unit::Linewidth => "ueV",
            Unit::Energy => "eV",
            Unit::Voltage => "V",
            Unit::None => "",
        }
    }
}

/// Tracks which keys were read so leftovers can be reported.
struct Reader<'a> {
    root: &'a Table,
    used: BTreeSet<String>,
}

impl<'a> Reader<'a> {
    fn lookup(&self, key: &str) -> Option<&'a Value> {
        let mut parts = key.split('.');
        let mut v = self.root.get(parts.next()?)?;
        for p in parts {
            v = v.as_table()?.get(p)?;
        }
        Some(v)
    }

    fn invalid(key: &str, msg: impl Into<String>) -> ConfigError {
        ConfigError::Invalid { key: key.to_string(), msg: msg.into() }
    }

    fn number(&mut self, key: &str, unit: Unit) -> Result<Option<f64>, ConfigError> {
        let Some(v) = self.lookup(key) else { return Ok(None) };
        self.used.insert(key.to_string());
        let x = match v {
            Value::Integer(i) => *i as f64,
            Value::Float(f) => *f,
            Value::String(s) => {
                let s = s.trim();
                let split = s.find(|c: char| c.is_alphabetic() || c == 'µ').unwrap_or(s.len());
                let (num, suffix) = s.split_at(split);
                let num: f64 = num.trim().parse().map_err(|_| Self::invalid(key, format!("cannot parse {s:?}")))?;
                let suffix = suffix.trim();
                if suffix.is_empty() {
                    num
                } else {
                    let f = unit.factor(suffix).ok_or_else(|| {
                        Self::invalid(key, format!("unit {suffix:?} not accepted (expected a {} quantity)", unit.name()))
                    })?;
                    num * f
                }
            }
            _ => return Err(Self::invalid(key, "expected a number")),
        };
        if !x.is_finite() {
            return Err(Self::invalid(key, "not finite"));
        }
        Ok(Some(x))
    }

    fn f64_or(&mut self, key: &str, unit: Unit, default: f64) -> Result<f64, ConfigError> {
        Ok(self.number(key, unit)?.unwrap_or(default))
    }

    fn required(&mut self, key: &str, unit: Unit) -> Result<f64, ConfigError> {
        self.number(key, unit)?.ok_or_else(|| ConfigError::Missing(key.to_string()))
    }

    fn u64_or(&mut self, key: &str, default: u64) -> Result<u64, ConfigError> {
        match self.lookup(key) {
            None => Ok(default),
            Some(Value::Integer(i)) if *i >= 0 => {
                self.used.insert(key.to_string());
                Ok(*i as u64)
            }
            Some(Value::Float(f)) if *f >= 0.0 && f.fract() == 0.0 && *f < 1.8e19 => {
                self.used.insert(key.to_string());
                Ok(*f as u64)
            }
            Some(_) => Err(Self::invalid(key, "expected a non-negative integer")),
        }
    }

    fn string(&mut self, key: &str) -> Result<Option<&'a str>, ConfigError> {
        match self.lookup(key) {
            None => Ok(None),
            Some(Value::String(s)) => {
                self.used.insert(key.to_string());
                Ok(Some(s.as_str()))
            }
            Some(_) => Err(Self::invalid(key, "expected a string")),
        }
    }

    /// Array of bare numbers in the key's default unit.
    fn list(&mut self, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        match self.lookup(key) {
            None => Ok(None),
            Some(Value::Array(items)) => {
                self.used.insert(key.to_string());
                let mut out = Vec::with_capacity(items.len());
                for (i, it) in items.iter().enumerate() {
                    let sub = format!("{key}[{i}]");
                    let x = match it {
                        Value::Integer(v) => *v as f64,
                        Value::Float(v) => *v,
                        _ => return Err(Self::invalid(&sub, "expected a number")),
                    };
                    out.push(x);
                }
                Ok(Some(out))
            }
            Some(_) => Err(Self::invalid(key, "expected an array")),
        }
    }

    fn leftovers(&self) -> Result<(), ConfigError> {
        fn walk(t: &Table, prefix: &str, used: &BTreeSet<String>) -> Result<(), ConfigError> {
            for (k, v) in t {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                match v {
                    Value::Table(sub) => walk(sub, &key, used)?,
                    _ if used.contains(&key) => {}
                    _ => return Err(ConfigError::Unknown(key)),
                }
            }
            Ok(())
        }
        walk(self.root, "", &self.used)
    }
}

/// What `simulate` produces.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    /// Sync, XX and X streams.
    Cascade,
    /// Two HOM output ports for one line.
    Hom,
    /// Attenuated-laser reference stream.
    Coherent,
    /// Sync and signal of a zero-lifetime emitter (IRF).
    Delta,
    /// Michelson fringe scans.
    Michelson,
}

impl Scenario {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "cascade" => Scenario::Cascade,
            "hom" => Scenario::Hom,
            "coherent" => Scenario::Coherent,
            "delta" => Scenario::Delta,
            "michelson" => Scenario::Michelson,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MichelsonConfig {
    pub line: LineShape,
    pub scan: MichelsonScan,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub seed: u64,
    // kept out of manifests so runs into different dirs hash the same
    #[serde(skip)]
    pub out: PathBuf,
    pub pulses: u64,
    pub emitter: EmitterModel,
    pub clock: LaserClock,
    pub detector: DetectorModel,
    pub bench: HomBench,
    pub line: Line,
    /// Mean photon number per pulse for the coherent reference.
    pub mean_photons: f64,
    pub diode: DiodeGeometry,
    pub trap: TrapFieldModel,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub michelson: Option<MichelsonConfig>,
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let root: Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Syntax(e.to_string()))?;
        let mut r = Reader { root: &root, used: BTreeSet::new() };

        let scenario = match r.string("scenario")? {
            None => Scenario::Cascade,
            Some(s) => Scenario::parse(s).ok_or_else(|| Reader::invalid("scenario", format!("unknown scenario {s:?}")))?,
        };
        let seed = r.u64_or("seed", 0)?;
        let out = PathBuf::from(r.string("out")?.unwrap_or("out"));
        let pulses = r.u64_or("pulses", 1_000_000)?;
        if pulses == 0 {
            return Err(Reader::invalid("pulses", "must be at least 1"));
        }

        let needs_emitter = matches!(scenario, Scenario::Cascade | Scenario::Hom | Scenario::Coherent);
        let (tau_xx, tau_x) = if needs_emitter {
            (r.required("emitter.tau_xx", Unit::Time)?, r.required("emitter.tau_x", Unit::Time)?)
        } else {
            (r.f64_or("emitter.tau_xx", Unit::Time, 1.0)?, r.f64_or("emitter.tau_x", Unit::Time, 1.0)?)
        };
        let emitter = EmitterModel {
            tau_xx,
            tau_x,
            p_exc: r.f64_or("emitter.p_exc", Unit::None, 1.0)?,
            p_multi: r.f64_or("emitter.p_multi", Unit::None, 0.0)?,
            background_rate: r.f64_or("emitter.background_rate", Unit::Rate, 100.0)?,
        };
        emitter.validate().map_err(|e| Reader::invalid("emitter", e.to_string()))?;

        let rep = r.f64_or("clock.rep_rate", Unit::Rate, 80.0e6)?;
        if !(rep > 0.0) {
            return Err(Reader::invalid("clock.rep_rate", "must be positive"));
        }
        let mut clock = LaserClock::from_rep_rate(rep);
        clock.pulse_jitter_fwhm = r.f64_or("clock.jitter_fwhm", Unit::Time, 0.0)?;
        clock.validate().map_err(|e| Reader::invalid("clock", e.to_string()))?;

        let d0 = DetectorModel::default();
        let detector = DetectorModel {
            jitter_fwhm: r.f64_or("detector.jitter_fwhm", Unit::Time, d0.jitter_fwhm)?,
            efficiency: r.f64_or("detector.efficiency", Unit::None, d0.efficiency)?,
            dead_time: r.f64_or("detector.dead_time", Unit::Time, d0.dead_time)?,
        };
        detector.validate().map_err(|e| Reader::invalid("detector", e.to_string()))?;

        let delay = r.f64_or("bench.delay", Unit::Time, clock.period_ps as f64)?;
        if !(delay >= 1.0) {
            return Err(Reader::invalid("bench.delay", "must be at least 1 ps"));
        }
        let polarization = match r.string("bench.polarization")? {
            None | Some("co") => Polarization::Co,
            Some("cross") => Polarization::Cross,
            Some(s) => return Err(Reader::invalid("bench.polarization", format!("expected co or cross, got {s:?}"))),
        };
        let t_short = r.f64_or("bench.t_short", Unit::None, 1.0)?;
        let t_long = r.f64_or("bench.t_long", Unit::None, 1.0)?;
        let mut bench = HomBench {
            delay_ps: delay.round() as u64,
            nu: r.f64_or("bench.nu", Unit::None, 1.0)?,
            polarization,
            ..HomBench::default()
        };
        bench = match r.number("bench.split_first", Unit::None)? {
            Some(s) => HomBench { split_first: s, arm_transmissions: (t_short, t_long), ..bench },
            None => bench.balanced(t_short, t_long),
        };
        bench.validate().map_err(|e| Reader::invalid("bench", e.to_string()))?;
        let line = match r.string("bench.line")? {
            None | Some("x") => Line::X,
            Some("xx") => Line::Xx,
            Some(s) => return Err(Reader::invalid("bench.line", format!("expected x or xx, got {s:?}"))),
        };

        let mean_photons = r.f64_or("coherent.mean_photons", Unit::None, 0.1)?;
        if !(mean_photons > 0.0) {
            return Err(Reader::invalid("coherent.mean_photons", "must be positive"));
        }

        let g0 = DiodeGeometry::default();
        let diode = DiodeGeometry {
            vb: r.f64_or("diode.vb", Unit::Voltage, g0.vb)?,
            d_nm: r.f64_or("diode.d", Unit::Length, g0.d_nm)?,
        };
        diode.validate().map_err(|e| Reader::invalid("diode.d", e.to_string()))?;
        let t0 = TrapFieldModel::default();
        let image = match r.string("trap.image")? {
            None | Some("grounded-plane") => ImageCharge::GroundedPlane,
            Some("none") => ImageCharge::None,
            Some(s) => return Err(Reader::invalid("trap.image", format!("expected none or grounded-plane, got {s:?}"))),
        };
        let trap = TrapFieldModel {
            delta0: r.f64_or("trap.delta0", Unit::Length, t0.delta0)?,
            d: r.f64_or("trap.d", Unit::Length, t0.d)?,
            epsilon_r: r.f64_or("trap.epsilon_r", Unit::None, t0.epsilon_r)?,
            m_hh: r.f64_or("trap.m_hh", Unit::None, t0.m_hh)?,
            image,
        };
        trap.validate().map_err(|e| Reader::invalid("trap", e.to_string()))?;

        let michelson = if scenario == Scenario::Michelson {
            let line = LineShape {
                f_l: r.required("michelson.f_l", Unit::Linewidth)?,
                f_g: r.required("michelson.f_g", Unit::Linewidth)?,
                center: r.f64_or("michelson.center", Unit::Energy, 1.59)?,
            };
            line.validate().map_err(|e| Reader::invalid("michelson", e.to_string()))?;
            let s0 = MichelsonScan::default();
            let scan = MichelsonScan {
                coarse_positions_mm: r.list("michelson.positions")?.unwrap_or(s0.coarse_positions_mm),
                piezo_step_nm: r.f64_or("michelson.piezo_step", Unit::Length, s0.piezo_step_nm)?,
                steps: r.u64_or("michelson.steps", s0.steps as u64)? as usize,
                i0: r.f64_or("michelson.i0", Unit::None, s0.i0)?,
                noise: r.f64_or("michelson.noise", Unit::None, s0.noise)?,
                seed,
            };
            Some(MichelsonConfig { line, scan })
        } else {
            None
        };

        r.leftovers()?;
        Ok(RunConfig {
            scenario,
            seed,
            out,
            pulses,
            emitter,
            clock,
            detector,
            bench,
            line,
            mean_photons,
            diode,
            trap,
            michelson,
        })
    }
}

/// Trap and diode blocks only, for the field model.
pub fn load_field_config(path: impl AsRef<Path>) -> Result<(DiodeGeometry, TrapFieldModel), ConfigError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
    // the emitter block is optional here
    let c = RunConfig::parse(&format!("scenario = \"delta\"\n{text}"))?;
    Ok((c.diode, c.trap))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "
seed = 7
pulses = 1000
[emitter]
tau_xx = 161
tau_x = \"0.619 ns\"
";

    #[test]
    fn minimal_cascade() {
        let c = RunConfig::parse(MINIMAL).unwrap();
        assert_eq!(c.scenario, Scenario::Cascade);
        assert_eq!(c.emitter.tau_x, 619.0);
        assert_eq!(c.clock.period_ps, 12_500);
        assert_eq!(c.bench.delay_ps, 12_500);
        assert_eq!(c.trap.epsilon_r, 11.4);
    }

    #[test]
    fn missing_tau_x_names_key() {
        let err = RunConfig::parse("[emitter]\ntau_xx = 161\n").unwrap_err();
        assert!(err.to_string().contains("emitter.tau_x"), "{err}");
    }

    #[test]
    fn unknown_key_rejected() {
        let err = RunConfig::parse(&format!("{MINIMAL}tau_y = 3\n")).unwrap_err();
        assert!(err.to_string().contains("emitter.tau_y"), "{err}");
    }

    #[test]
    fn units_converted() {
        let text = format!("{MINIMAL}[clock]\nrep_rate = \"76 MHz\"\n[detector]\njitter_fwhm = \"0.02 ns\"\n");
        let c = RunConfig::parse(&text).unwrap();
        assert_eq!(c.clock.period_ps, 13_158);
        assert!((c.detector.jitter_fwhm - 20.0).abs() < 1e-9);
        let bad = format!("{MINIMAL}[clock]\nrep_rate = \"76 ps\"\n");
        assert!(matches!(RunConfig::parse(&bad), Err(ConfigError::Invalid { .. })));
    }

    #[test]
    fn michelson_requires_linewidths() {
        let err = RunConfig::parse("scenario = \"michelson\"\n[michelson]\nf_l = 3.0\n").unwrap_err();
        assert!(err.to_string().contains("michelson.f_g"));
        let c = RunConfig::parse("scenario = \"michelson\"\n[michelson]\nf_l = 3.0\nf_g = \"4 ueV\"\npositions = [0.0, 10.0]\n").unwrap();
        assert_eq!(c.michelson.unwrap().scan.coarse_positions_mm, vec![0.0, 10.0]);
    }

    #[test]
    fn trap_overrides() {
        let c = RunConfig::parse(&format!("{MINIMAL}[trap]\nepsilon_r = 12.5\nimage = \"none\"\n")).unwrap();
        assert_eq!(c.trap.epsilon_r, 12.5);
        assert_eq!(c.trap.image, ImageCharge::None);
    }
}
