//! Run configuration: a flat key-value format with bracketed sections.
//!
//! ```text
//! # comment
//! [run]
//! out = results
//! workers = 4
//! seed = 7
//!
//! [scenario hpid_step]
//! plant = extended          # extended | joints
//! controller = hpid         # pid | hpid
//! kp = -3
//! kd = -3
//! ki = -1
//! mu = 0.1
//! x0 = 1, 0, 0.3            # extended plant only
//! norm = weighted           # weighted | canonical | experimental
//! norm_coefficients = 1, 1  # weighted
//! norm_p = 2, 0.5, 1        # canonical: p11, p12, p22
//! norm_tolerance = 1e-12    # canonical
//! zeta1_max = 1             # experimental
//! gamma = 1                 # experimental
//! joints = 6                # joints plant only
//! horizon = 9
//! step = 0.001
//! norm_floor = 1e-9
//! seed = 3
//!
//! [compare table]
//! pid = pid_run
//! hpid = hpid_run
//! # or: fixture = table1
//! ```

use std::collections::HashSet;
use std::fmt::{self, Write as _};
use std::path::PathBuf;

use crate::control::{GainSet, DEFAULT_NORM_FLOOR};
use crate::plant::{ExtendedState, JointPlantConfig, NormChoice};
use crate::sim::{ControllerKind, ExtendedPlant, PlantConfig, Scenario, DEFAULT_HORIZON, DEFAULT_STEP};

/// A configuration problem, with the 1-based line it was found on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    fn at(line: usize, message: impl Into<String>) -> Self {
        Self {
            line: Some(line),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlantKind {
    Extended,
    Joints,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fixture {
    Table1,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub plant: PlantKind,
    pub controller: ControllerKind,
    pub gains: GainSet,
    pub mu: f64,
    pub initial: [f64; 3],
    /// Norm override; `None` keeps the plant's default norm.
    pub norm: Option<NormChoice>,
    pub joints: usize,
    pub horizon: f64,
    pub step: f64,
    pub norm_floor: f64,
    pub seed: Option<u64>,
}

impl ScenarioConfig {
    fn with_defaults(name: &str) -> Self {
        Self {
            name: name.to_string(),
            plant: PlantKind::Extended,
            controller: ControllerKind::Hpid,
            gains: GainSet::certified_default(),
            mu: 0.0,
            initial: [0.0; 3],
            norm: None,
            joints: 6,
            horizon: DEFAULT_HORIZON,
            step: DEFAULT_STEP,
            norm_floor: DEFAULT_NORM_FLOOR,
            seed: None,
        }
    }

    /// Builds the simulation scenario; `run_seed` applies when the section
    /// has no seed of its own.
    pub fn to_scenario(&self, run_seed: u64) -> Scenario {
        let plant = match self.plant {
            PlantKind::Extended => PlantConfig::Extended(ExtendedPlant {
                gains: self.gains,
                mu: self.mu,
                norm: self.norm.clone().unwrap_or_default(),
                initial: ExtendedState::new(self.initial[0], self.initial[1], self.initial[2]),
            }),
            PlantKind::Joints => {
                let mut cfg = JointPlantConfig::desk_scale(self.joints, self.mu);
                for joint in &mut cfg.joints {
                    joint.gains = self.gains;
                    if let Some(norm) = &self.norm {
                        joint.norm = norm.clone();
                    }
                }
                PlantConfig::Joints(cfg)
            }
        };
        Scenario {
            name: self.name.clone(),
            plant,
            controller: self.controller,
            horizon: self.horizon,
            step: self.step,
            norm_floor: self.norm_floor,
            seed: self.seed.unwrap_or(run_seed),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CompareSource {
    Scenarios { pid: String, hpid: String },
    Fixture(Fixture),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareConfig {
    pub name: String,
    pub source: CompareSource,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub out: PathBuf,
    pub workers: Option<usize>,
    pub seed: u64,
    pub scenarios: Vec<ScenarioConfig>,
    pub comparisons: Vec<CompareConfig>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            out: PathBuf::from("out"),
            workers: None,
            seed: 0,
            scenarios: Vec::new(),
            comparisons: Vec::new(),
        }
    }
}

impl RunConfig {
    pub fn scenario(&self, name: &str) -> Option<&ScenarioConfig> {
        self.scenarios.iter().find(|s| s.name == name)
    }

    /// Renders the configuration in the format accepted by [`parse_config`].
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "[run]");
        let _ = writeln!(out, "out = {}", self.out.display());
        if let Some(w) = self.workers {
            let _ = writeln!(out, "workers = {w}");
        }
        let _ = writeln!(out, "seed = {}", self.seed);
        for s in &self.scenarios {
            let _ = writeln!(out, "\n[scenario {}]", s.name);
            let plant = match s.plant {
                PlantKind::Extended => "extended",
                PlantKind::Joints => "joints",
            };
            let _ = writeln!(out, "plant = {plant}");
            let _ = writeln!(out, "controller = {}", s.controller.as_str());
            let _ = writeln!(out, "kp = {}", s.gains.kp);
            let _ = writeln!(out, "kd = {}", s.gains.kd);
            let _ = writeln!(out, "ki = {}", s.gains.ki);
            let _ = writeln!(out, "mu = {}", s.mu);
            match s.plant {
                PlantKind::Extended => {
                    let _ = writeln!(out, "x0 = {}, {}, {}", s.initial[0], s.initial[1], s.initial[2]);
                }
                PlantKind::Joints => {
                    let _ = writeln!(out, "joints = {}", s.joints);
                }
            }
            match &s.norm {
                None => {}
                Some(NormChoice::WeightedSum { coefficients }) => {
                    let _ = writeln!(out, "norm = weighted");
                    let _ = writeln!(out, "norm_coefficients = {}, {}", coefficients[0], coefficients[1]);
                }
                Some(NormChoice::Canonical { p, tolerance }) => {
                    let _ = writeln!(out, "norm = canonical");
                    let _ = writeln!(out, "norm_p = {}, {}, {}", p[0][0], p[0][1], p[1][1]);
                    let _ = writeln!(out, "norm_tolerance = {tolerance}");
                }
                Some(NormChoice::Experimental { zeta1_max, gamma }) => {
                    let _ = writeln!(out, "norm = experimental");
                    let _ = writeln!(out, "zeta1_max = {zeta1_max}");
                    let _ = writeln!(out, "gamma = {gamma}");
                }
            }
            let _ = writeln!(out, "horizon = {}", s.horizon);
            let _ = writeln!(out, "step = {}", s.step);
            let _ = writeln!(out, "norm_floor = {}", s.norm_floor);
            if let Some(seed) = s.seed {
                let _ = writeln!(out, "seed = {seed}");
            }
        }
        for c in &self.comparisons {
            let _ = writeln!(out, "\n[compare {}]", c.name);
            match &c.source {
                CompareSource::Scenarios { pid, hpid } => {
                    let _ = writeln!(out, "pid = {pid}");
                    let _ = writeln!(out, "hpid = {hpid}");
                }
                CompareSource::Fixture(Fixture::Table1) => {
                    let _ = writeln!(out, "fixture = table1");
                }
            }
        }
        out
    }
}

/// Raw norm keys, resolved once the section is complete.
#[derive(Default)]
struct NormKeys {
    kind: Option<(usize, String)>,
    coefficients: Option<[f64; 2]>,
    p: Option<[f64; 3]>,
    tolerance: Option<f64>,
    zeta1_max: Option<f64>,
    gamma: Option<f64>,
}

enum Section {
    None,
    Run,
    Scenario(Box<ScenarioConfig>, NormKeys, usize),
    Compare(String, Option<String>, Option<String>, Option<String>, usize),
}

fn parse_f64(line: usize, key: &str, value: &str) -> Result<f64, ConfigError> {
    value
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| ConfigError::at(line, format!("{key}: expected a finite number, got '{value}'")))
}

fn parse_list<const N: usize>(line: usize, key: &str, value: &str) -> Result<[f64; N], ConfigError> {
    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
    if parts.len() != N {
        return Err(ConfigError::at(line, format!("{key}: expected {N} comma-separated numbers, got {}", parts.len())));
    }
    let mut out = [0.0; N];
    for (slot, part) in out.iter_mut().zip(parts) {
        *slot = parse_f64(line, key, part)?;
    }
    Ok(out)
}

fn parse_uint<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<T, ConfigError> {
    value
        .parse::<T>()
        .map_err(|_| ConfigError::at(line, format!("{key}: expected a non-negative integer, got '{value}'")))
}

fn parse_positive(line: usize, key: &str, value: &str) -> Result<f64, ConfigError> {
    let v = parse_f64(line, key, value)?;
    if v <= 0.0 {
        return Err(ConfigError::at(line, format!("{key} must be positive, got {v}")));
    }
    Ok(v)
}

fn set_scenario_key(
    s: &mut ScenarioConfig,
    norm: &mut NormKeys,
    line: usize,
    key: &str,
    value: &str,
) -> Result<(), ConfigError> {
    match key {
        "plant" => {
            s.plant = match value {
                "extended" => PlantKind::Extended,
                "joints" => PlantKind::Joints,
                _ => return Err(ConfigError::at(line, format!("plant must be 'extended' or 'joints', got '{value}'"))),
            }
        }
        "controller" => {
            s.controller = match value {
                "pid" => ControllerKind::Pid,
                "hpid" => ControllerKind::Hpid,
                _ => return Err(ConfigError::at(line, format!("controller must be 'pid' or 'hpid', got '{value}'"))),
            }
        }
        "kp" => s.gains.kp = parse_f64(line, key, value)?,
        "kd" => s.gains.kd = parse_f64(line, key, value)?,
        "ki" => s.gains.ki = parse_f64(line, key, value)?,
        "mu" => {
            let mu = parse_f64(line, key, value)?;
            if !(mu > -0.5 && mu < 0.5) {
                return Err(ConfigError::at(line, format!("mu must lie in (-0.5, 0.5), got {mu}")));
            }
            s.mu = mu;
        }
        "x0" => s.initial = parse_list::<3>(line, key, value)?,
        "joints" => {
            let n: usize = parse_uint(line, key, value)?;
            if n == 0 {
                return Err(ConfigError::at(line, "joints must be at least 1"));
            }
            s.joints = n;
        }
        "horizon" => s.horizon = parse_positive(line, key, value)?,
        "step" => s.step = parse_positive(line, key, value)?,
        "norm_floor" => s.norm_floor = parse_positive(line, key, value)?,
        "seed" => s.seed = Some(parse_uint(line, key, value)?),
        "norm" => norm.kind = Some((line, value.to_string())),
        "norm_coefficients" => norm.coefficients = Some(parse_list::<2>(line, key, value)?),
        "norm_p" => norm.p = Some(parse_list::<3>(line, key, value)?),
        "norm_tolerance" => norm.tolerance = Some(parse_positive(line, key, value)?),
        "zeta1_max" => norm.zeta1_max = Some(parse_positive(line, key, value)?),
        "gamma" => norm.gamma = Some(parse_positive(line, key, value)?),
        _ => return Err(ConfigError::at(line, format!("unknown key '{key}' in scenario section"))),
    }
    Ok(())
}

fn finish_scenario(mut s: ScenarioConfig, norm: NormKeys, header_line: usize) -> Result<ScenarioConfig, ConfigError> {
    let stray = |name: &str| ConfigError::at(header_line, format!("scenario {}: '{name}' given without a matching 'norm'", s.name));
    s.norm = match norm.kind {
        None => {
            if norm.coefficients.is_some() {
                return Err(stray("norm_coefficients"));
            }
            if norm.p.is_some() || norm.tolerance.is_some() {
                return Err(stray("norm_p"));
            }
            if norm.zeta1_max.is_some() || norm.gamma.is_some() {
                return Err(stray("zeta1_max"));
            }
            None
        }
        Some((line, kind)) => Some(match kind.as_str() {
            "weighted" => NormChoice::WeightedSum {
                coefficients: norm.coefficients.unwrap_or([1.0, 1.0]),
            },
            "canonical" => {
                let [p11, p12, p22] = norm.p.ok_or_else(|| ConfigError::at(line, "canonical norm needs norm_p"))?;
                NormChoice::Canonical {
                    p: [[p11, p12], [p12, p22]],
                    tolerance: norm.tolerance.unwrap_or(1e-12),
                }
            }
            "experimental" => NormChoice::Experimental {
                zeta1_max: norm
                    .zeta1_max
                    .ok_or_else(|| ConfigError::at(line, "experimental norm needs zeta1_max"))?,
                gamma: norm.gamma.unwrap_or(1.0),
            },
            other => {
                return Err(ConfigError::at(
                    line,
                    format!("norm must be 'weighted', 'canonical' or 'experimental', got '{other}'"),
                ))
            }
        }),
    };
    if let Err(e) = s.to_scenario(0).validate() {
        return Err(ConfigError::at(header_line, format!("scenario {}: {e}", s.name)));
    }
    Ok(s)
}

fn close_section(section: Section, cfg: &mut RunConfig, errors: &mut Vec<ConfigError>) {
    match section {
        Section::None | Section::Run => {}
        Section::Scenario(s, norm, line) => match finish_scenario(*s, norm, line) {
            Ok(s) => cfg.scenarios.push(s),
            Err(e) => errors.push(e),
        },
        Section::Compare(name, pid, hpid, fixture, line) => {
            let source = match (pid, hpid, fixture) {
                (None, None, Some(f)) if f == "table1" => Ok(CompareSource::Fixture(Fixture::Table1)),
                (None, None, Some(f)) => Err(format!("unknown fixture '{f}' (expected 'table1')")),
                (Some(pid), Some(hpid), None) => Ok(CompareSource::Scenarios { pid, hpid }),
                _ => Err("needs either both 'pid' and 'hpid' or a single 'fixture'".to_string()),
            };
            match source {
                Ok(source) => cfg.comparisons.push(CompareConfig { name, source }),
                Err(msg) => errors.push(ConfigError::at(line, format!("compare {name}: {msg}"))),
            }
        }
    }
}

fn check_compare_pairs(cfg: &RunConfig, errors: &mut Vec<ConfigError>) {
    for c in &cfg.comparisons {
        let CompareSource::Scenarios { pid, hpid } = &c.source else {
            continue;
        };
        let lookup = |name: &str| {
            cfg.scenario(name)
                .ok_or_else(|| ConfigError { line: None, message: format!("compare {}: unknown scenario '{name}'", c.name) })
        };
        match (lookup(pid), lookup(hpid)) {
            (Ok(a), Ok(b)) => {
                if a.plant != b.plant || (a.plant == PlantKind::Joints && a.joints != b.joints) {
                    errors.push(ConfigError {
                        line: None,
                        message: format!("compare {}: scenarios '{pid}' and '{hpid}' use different plants", c.name),
                    });
                }
                if a.horizon != b.horizon || a.step != b.step {
                    errors.push(ConfigError {
                        line: None,
                        message: format!(
                            "compare {}: grid mismatch (T = {}, h = {} vs T = {}, h = {})",
                            c.name, a.horizon, a.step, b.horizon, b.step
                        ),
                    });
                }
            }
            (a, b) => errors.extend(a.err().into_iter().chain(b.err())),
        }
    }
}

/// Parses and validates a configuration document. All problems found are
/// returned together.
pub fn parse_config(text: &str) -> Result<RunConfig, Vec<ConfigError>> {
    let mut cfg = RunConfig::default();
    let mut errors = Vec::new();
    let mut section = Section::None;
    let mut seen_sections = HashSet::new();
    let mut seen_keys = HashSet::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(header) = content.strip_prefix('[') {
            let Some(header) = header.strip_suffix(']') else {
                errors.push(ConfigError::at(line, format!("malformed section header '{content}'")));
                continue;
            };
            close_section(std::mem::replace(&mut section, Section::None), &mut cfg, &mut errors);
            seen_keys.clear();
            let mut words = header.split_whitespace();
            let kind = words.next().unwrap_or("");
            let name = words.next();
            if words.next().is_some() {
                errors.push(ConfigError::at(line, format!("section names may not contain spaces: '{header}'")));
                continue;
            }
            if !seen_sections.insert(header.split_whitespace().collect::<Vec<_>>().join(" ")) {
                errors.push(ConfigError::at(line, format!("duplicate section '[{header}]'")));
                continue;
            }
            section = match (kind, name) {
                ("run", None) => Section::Run,
                ("scenario", Some(n)) => Section::Scenario(Box::new(ScenarioConfig::with_defaults(n)), NormKeys::default(), line),
                ("compare", Some(n)) => Section::Compare(n.to_string(), None, None, None, line),
                _ => {
                    errors.push(ConfigError::at(
                        line,
                        format!("unknown section '[{header}]' (expected [run], [scenario <name>] or [compare <name>])"),
                    ));
                    Section::None
                }
            };
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            errors.push(ConfigError::at(line, format!("expected 'key = value', got '{content}'")));
            continue;
        };
        let (key, value) = (key.trim(), value.trim());
        if !seen_keys.insert(key.to_string()) {
            errors.push(ConfigError::at(line, format!("duplicate key '{key}'")));
            continue;
        }
        let result = match &mut section {
            Section::None => Err(ConfigError::at(line, format!("key '{key}' outside of any section"))),
            Section::Run => match key {
                "out" => {
                    cfg.out = PathBuf::from(value);
                    Ok(())
                }
                "workers" => parse_uint::<usize>(line, key, value).and_then(|w| {
                    if w == 0 {
                        Err(ConfigError::at(line, "workers must be at least 1"))
                    } else {
                        cfg.workers = Some(w);
                        Ok(())
                    }
                }),
                "seed" => parse_uint(line, key, value).map(|s| cfg.seed = s),
                _ => Err(ConfigError::at(line, format!("unknown key '{key}' in [run]"))),
            },
            Section::Scenario(s, norm, _) => set_scenario_key(s, norm, line, key, value),
            Section::Compare(_, pid, hpid, fixture, _) => match key {
                "pid" | "hpid" | "fixture" => {
                    let slot = match key {
                        "pid" => pid,
                        "hpid" => hpid,
                        _ => fixture,
                    };
                    *slot = Some(value.to_string());
                    Ok(())
                }
                _ => Err(ConfigError::at(line, format!("unknown key '{key}' in compare section"))),
            },
        };
        if let Err(e) = result {
            errors.push(e);
        }
    }
    close_section(section, &mut cfg, &mut errors);
    check_compare_pairs(&cfg, &mut errors);

    if errors.is_empty() {
        Ok(cfg)
    } else {
        Err(errors)
    }
}
