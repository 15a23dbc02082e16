use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::config::{parse_config, CompareSource, Fixture, PlantKind, RunConfig, ScenarioConfig};
use super::csv::write_trajectory;
use super::verify::{run_verify, VerifyOptions};
use super::{exit_code, Cli, Command, EXIT_CONFIG, EXIT_FAILURE, EXIT_OK};
use crate::control::GainSet;
use crate::metrics::{compare, MetricsReport};
use crate::sim::{simulate, ControllerKind, Trajectory};
use crate::stability::{certify, StabilityCertificate};

/// What a command printed and how it ended.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CommandOutput {
    pub stdout: Vec<String>,
    pub stderr: Vec<String>,
    pub code: i32,
}

impl CommandOutput {
    fn fail(&mut self, code: i32, message: String) {
        self.stderr.push(message);
        self.code = self.code.max(code);
    }
}

fn config_failure(message: String) -> CommandOutput {
    let mut out = CommandOutput::default();
    out.fail(EXIT_CONFIG, message);
    out
}

fn load_config(cli: &Cli) -> Result<RunConfig, CommandOutput> {
    let Some(path) = &cli.config else {
        return Ok(RunConfig::default());
    };
    let text = fs::read_to_string(path)
        .map_err(|e| config_failure(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text).map_err(|errs| {
        let mut out = CommandOutput::default();
        for e in errs {
            out.fail(EXIT_CONFIG, format!("{}: {e}", path.display()));
        }
        out
    })
}

fn write_file(out: &mut CommandOutput, path: &Path, contents: &str) -> bool {
    match fs::write(path, contents) {
        Ok(()) => true,
        Err(e) => {
            out.fail(EXIT_CONFIG, format!("cannot write {}: {e}", path.display()));
            false
        }
    }
}

/// Parses the configuration, applies flag overrides and runs the command
/// on a thread pool sized by `--workers`, `HPID_WORKERS` or the config.
pub fn run(cli: &Cli) -> CommandOutput {
    let mut cfg = match load_config(cli) {
        Ok(cfg) => cfg,
        Err(out) => return out,
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let out_dir = cli.out.clone().unwrap_or_else(|| cfg.out.clone());
    let needs_config = matches!(cli.command, Command::Simulate | Command::Compare);
    if needs_config && cli.config.is_none() {
        return config_failure("this command needs --config <path>".into());
    }
    let workers = cli.workers.or(cfg.workers).unwrap_or(0);
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool,
        Err(e) => return config_failure(format!("cannot start {workers} workers: {e}")),
    };
    let write_dir = (cli.config.is_some() || cli.out.is_some()).then_some(out_dir);
    if let Some(dir) = &write_dir {
        if let Err(e) = fs::create_dir_all(dir) {
            return config_failure(format!("cannot create output directory {}: {e}", dir.display()));
        }
    }
    pool.install(|| match cli.command {
        Command::Simulate => cmd_simulate(&cfg, write_dir.as_deref().unwrap_or(Path::new("."))),
        Command::Compare => cmd_compare(&cfg, write_dir.as_deref().unwrap_or(Path::new("."))),
        Command::Certify => cmd_certify(&cfg, write_dir.as_deref()),
        Command::Verify => cmd_verify(
            VerifyOptions {
                seed: cfg.seed,
                broken_norm: cli.inject_broken_norm,
            },
            write_dir.as_deref(),
        ),
    })
}

/// Warnings for hPID scenarios whose degree lies outside the interval
/// certified for their gains.
fn certification_warnings(s: &ScenarioConfig) -> Option<String> {
    if s.controller != ControllerKind::Hpid || s.mu == 0.0 {
        return None;
    }
    match certify(&s.gains) {
        Ok(cert) if cert.contains(s.mu) => None,
        Ok(cert) => Some(format!(
            "warning: scenario {}: mu = {} lies outside the certified interval [{}, {}]",
            s.name, s.mu, cert.mu_lo, cert.mu_hi
        )),
        Err(e) => Some(format!("warning: scenario {}: gains are not certified: {e}", s.name)),
    }
}

fn run_scenarios(cfg: &RunConfig, names: &[&str]) -> Vec<crate::error::Result<Trajectory>> {
    names
        .par_iter()
        .map(|name| {
            let s = cfg.scenario(name).expect("scenario names validated by the parser");
            simulate(&s.to_scenario(cfg.seed))
        })
        .collect()
}

pub fn cmd_simulate(cfg: &RunConfig, out_dir: &Path) -> CommandOutput {
    let mut out = CommandOutput::default();
    for s in &cfg.scenarios {
        if let Some(w) = certification_warnings(s) {
            out.stderr.push(w);
        }
    }
    let names: Vec<&str> = cfg.scenarios.iter().map(|s| s.name.as_str()).collect();
    for (name, result) in names.iter().zip(run_scenarios(cfg, &names)) {
        match result {
            Ok(traj) => {
                let path = out_dir.join(format!("{name}.csv"));
                if write_file(&mut out, &path, &write_trajectory(&traj)) {
                    out.stdout.push(format!(
                        "{name}: {} samples, final |x| = {:e} -> {}",
                        traj.len(),
                        traj.final_state_norm(),
                        path.display()
                    ));
                }
            }
            Err(e) => out.fail(exit_code(&e), format!("{name}: {e}")),
        }
    }
    out
}

pub fn cmd_compare(cfg: &RunConfig, out_dir: &Path) -> CommandOutput {
    let mut out = CommandOutput::default();
    let reports: Vec<(String, crate::error::Result<MetricsReport>)> = cfg
        .comparisons
        .par_iter()
        .map(|c| {
            let report = match &c.source {
                CompareSource::Fixture(Fixture::Table1) => Ok(MetricsReport::table1_fixture()),
                CompareSource::Scenarios { pid, hpid } => {
                    let mut runs = run_scenarios(cfg, &[pid, hpid]).into_iter();
                    match (runs.next().expect("two runs"), runs.next().expect("two runs")) {
                        (Ok(a), Ok(b)) => compare(&a, &b),
                        (Err(e), _) | (_, Err(e)) => Err(e),
                    }
                }
            };
            (c.name.clone(), report)
        })
        .collect();
    for (name, report) in reports {
        match report {
            Ok(report) => {
                let path = out_dir.join(format!("{name}_report.csv"));
                if write_file(&mut out, &path, &report.to_csv()) {
                    out.stdout.push(format!("{name}: {}", report.summary()));
                }
            }
            Err(e) => out.fail(exit_code(&e), format!("{name}: {e}")),
        }
    }
    out
}

pub fn certificate_csv(cert: &StabilityCertificate) -> String {
    let mut out = String::from("quantity,value\n");
    let gains = cert.gains;
    for (k, v) in [("kp", gains.kp), ("kd", gains.kd), ("ki", gains.ki)] {
        let _ = writeln!(out, "{k},{v:.16e}");
    }
    for i in 0..3 {
        for j in i..3 {
            let _ = writeln!(out, "p{}{},{:.16e}", i + 1, j + 1, cert.p.get(i, j));
        }
    }
    let _ = writeln!(out, "beta,{:.16e}", cert.beta);
    let _ = writeln!(out, "gamma,{:.16e}", cert.gamma);
    let _ = writeln!(out, "mu_lo,{:.16e}", cert.mu_lo);
    let _ = writeln!(out, "mu_hi,{:.16e}", cert.mu_hi);
    out
}

fn describe_certificate(name: &str, cert: &StabilityCertificate) -> String {
    let mut text = format!("{name}: certified mu interval [{}, {}]\n", cert.mu_lo, cert.mu_hi);
    for i in 0..3 {
        let row: Vec<String> = (0..3).map(|j| format!("{:>12.6}", cert.p.get(i, j))).collect();
        let _ = writeln!(text, "  P[{}] = {}", i + 1, row.join(" "));
    }
    let _ = write!(text, "  beta = {:.6e}, gamma = {:.6e}", cert.beta, cert.gamma);
    text
}

pub fn cmd_certify(cfg: &RunConfig, out_dir: Option<&Path>) -> CommandOutput {
    let mut out = CommandOutput::default();
    let mut targets: Vec<(String, GainSet)> = cfg.scenarios.iter().map(|s| (s.name.clone(), s.gains)).collect();
    if targets.is_empty() {
        targets.push(("default".into(), GainSet::certified_default()));
    }
    let results: Vec<_> = targets.par_iter().map(|(_, g)| certify(g)).collect();
    for ((name, gains), result) in targets.iter().zip(results) {
        match result {
            Ok(cert) => {
                out.stdout.push(describe_certificate(name, &cert));
                if let Some(dir) = out_dir {
                    let path: PathBuf = dir.join(format!("{name}_certificate.csv"));
                    write_file(&mut out, &path, &certificate_csv(&cert));
                }
            }
            Err(e) => out.fail(
                EXIT_FAILURE.max(exit_code(&e)),
                format!("{name}: gains (kp = {}, kd = {}, ki = {}) rejected: {e}", gains.kp, gains.kd, gains.ki),
            ),
        }
    }
    for s in cfg.scenarios.iter().filter(|s| s.plant == PlantKind::Extended || s.plant == PlantKind::Joints) {
        if let Some(w) = certification_warnings(s) {
            out.stderr.push(w);
        }
    }
    out
}

pub fn cmd_verify(opts: VerifyOptions, out_dir: Option<&Path>) -> CommandOutput {
    let report = run_verify(opts);
    let text = report.to_text();
    let mut out = CommandOutput {
        stdout: text.lines().map(String::from).collect(),
        stderr: Vec::new(),
        code: if report.passed() { EXIT_OK } else { EXIT_FAILURE },
    };
    if let Some(dir) = out_dir {
        write_file(&mut out, &dir.join("verify_report.txt"), &text);
    }
    out
}
