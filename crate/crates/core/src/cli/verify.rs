//! Property suite run by `hpid verify`: dilation and norm identities,
//! closed-loop homogeneity, solution scaling, and Lyapunov decrease.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::control::{pid_step, GainSet, HpidState};
use crate::error::Result;
use crate::homogeneity::{
    verify_field_homogeneity, Canonical, Dilation, Experimental, HomNormSpec, HomogeneousNorm, WeightedSum,
    FIELD_HOMOGENEITY_TOL,
};
use crate::linalg::euclidean_norm;
use crate::plant::{ClosedLoop, ExtendedState, NormChoice};
use crate::sim::{scaling_symmetry_run, simulate, Scenario};
use crate::stability::{audit, certify, lyapunov_decrease_check};

/// Options for a verification run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Replace the experimental norm by a Euclidean norm that is not
    /// homogeneous, as a negative control for the scaling properties.
    pub broken_norm: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyResult {
    pub name: String,
    pub measured: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl PropertyResult {
    fn at_most(name: impl Into<String>, measured: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            measured,
            tolerance,
            passed: measured <= tolerance,
        }
    }

    fn failed(name: impl Into<String>, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            measured: f64::INFINITY,
            tolerance,
            passed: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub seed: u64,
    pub results: Vec<PropertyResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.results.iter().all(|r| r.passed)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "seed {}", self.seed);
        for r in &self.results {
            let _ = writeln!(
                out,
                "{} {:<36} measured {:.6e}  tolerance {:.1e}",
                if r.passed { "PASS" } else { "FAIL" },
                r.name,
                r.measured,
                r.tolerance
            );
        }
        let n_pass = self.results.iter().filter(|r| r.passed).count();
        let _ = writeln!(out, "{n_pass}/{} properties passed", self.results.len());
        out
    }
}

const SAMPLES: usize = 200;

fn sample_vec(rng: &mut ChaCha8Rng, n: usize, range: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-range..range)).collect()
}

fn sample_pairs(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<(f64, Vec<f64>)> {
    (0..n)
        .map(|_| (rng.random_range(-2.0..2.0), sample_vec(rng, dim, 2.0)))
        .filter(|(_, x)| euclidean_norm(x) > 1e-3)
        .collect()
}

fn group_law(seed: u64) -> Result<PropertyResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    for _ in 0..SAMPLES {
        let dil = Dilation::extended(rng.random_range(-0.45..0.45))?;
        let (s, t) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let x = sample_vec(&mut rng, 3, 2.0);
        let composed = dil.apply(s, &dil.apply(t, &x)?)?;
        let direct = dil.apply(s + t, &x)?;
        let diff: Vec<f64> = composed.iter().zip(&direct).map(|(a, b)| a - b).collect();
        worst = worst.max(euclidean_norm(&diff) / euclidean_norm(&direct).max(1.0));
    }
    Ok(PropertyResult::at_most("dilation group law", worst, 1e-12))
}

/// `|N(d(s)x) - e^s N(x)| / (e^s N(x))` over random samples.
fn norm_scaling<F>(name: &str, dil: &Dilation, norm: F, seed: u64) -> Result<PropertyResult>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    for (s, x) in sample_pairs(&mut rng, SAMPLES, dil.dim()) {
        let expected = s.exp() * norm(&x)?;
        let got = norm(&dil.apply(s, &x)?)?;
        worst = worst.max((got - expected).abs() / expected);
    }
    Ok(PropertyResult::at_most(format!("norm scaling ({name})"), worst, 1e-9))
}

fn norm_suites(opts: VerifyOptions) -> Result<Vec<PropertyResult>> {
    let mu = -0.2;
    let hpid_dil = Dilation::hpid(mu)?;
    let weighted = HomogeneousNorm::new(
        HomNormSpec::WeightedSum(WeightedSum::new(vec![1.0, 1.0])?),
        hpid_dil.clone(),
    )?;
    let cert = certify(&GainSet::certified_default())?;
    let ext_dil = Dilation::extended(0.1)?;
    let canonical = Canonical::new(cert.p.clone(), 1e-12)?;
    let experimental = Experimental::new(0.5, 1.0, mu)?;

    let mut out = vec![
        norm_scaling("weighted sum", &hpid_dil, |x| weighted.eval(x), opts.seed + 1)?,
        norm_scaling("canonical", &ext_dil, |x| canonical.norm(&ext_dil, x), opts.seed + 2)?,
    ];
    out.push(if opts.broken_norm {
        norm_scaling("experimental", &hpid_dil, |x| Ok(euclidean_norm(x)), opts.seed + 3)?
    } else {
        norm_scaling("experimental", &hpid_dil, |x| experimental.norm(x), opts.seed + 3)?
    });

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed + 4);
    let mut residual = 0.0_f64;
    let mut gradient_err = 0.0_f64;
    for _ in 0..100 {
        let x = sample_vec(&mut rng, 3, 2.0);
        let lambda = canonical.norm(&ext_dil, &x)?;
        let z = ext_dil.apply(-lambda.ln(), &x)?;
        residual = residual.max((cert.p.quad_form(&z).sqrt() - 1.0).abs());

        let grad = canonical.gradient(&ext_dil, &x)?;
        let step = 1e-6;
        let fd: Vec<f64> = (0..3)
            .map(|i| {
                let mut hi = x.clone();
                let mut lo = x.clone();
                hi[i] += step;
                lo[i] -= step;
                Ok((canonical.norm(&ext_dil, &hi)? - canonical.norm(&ext_dil, &lo)?) / (2.0 * step))
            })
            .collect::<Result<_>>()?;
        let diff: Vec<f64> = grad.iter().zip(&fd).map(|(a, b)| a - b).collect();
        gradient_err = gradient_err.max(euclidean_norm(&diff) / euclidean_norm(&fd).max(1e-12));
    }
    out.push(PropertyResult::at_most("canonical norm defining equation", residual, 1e-10));
    out.push(PropertyResult::at_most("canonical gradient vs differences", gradient_err, 1e-5));
    Ok(out)
}

fn field_homogeneity(mu: f64, seed: u64) -> Result<PropertyResult> {
    let gains = GainSet::certified_default();
    let cl = ClosedLoop::new(gains, mu, NormChoice::default().build(mu)?)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = sample_pairs(&mut rng, SAMPLES, 3);
    let report = verify_field_homogeneity(
        |x| Ok(cl.field(&[x[0], x[1], x[2]])?.to_vec()),
        &cl.extended_dilation(),
        mu,
        &samples,
    )?;
    Ok(PropertyResult::at_most(
        format!("field homogeneity (mu = {mu})"),
        report.max_residual,
        FIELD_HOMOGENEITY_TOL,
    ))
}

fn zero_degree_equivalence(seed: u64) -> Result<PropertyResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    for _ in 0..1000 {
        let gains = GainSet::new(
            rng.random_range(-10.0..0.0),
            rng.random_range(-10.0..0.0),
            rng.random_range(-10.0..0.0),
        );
        let state = HpidState::new(gains, 0.0, NormChoice::default().build(0.0)?)?
            .with_integral(rng.random_range(-5.0..5.0));
        let (eps, deps, dt) = (
            rng.random_range(-5.0..5.0),
            rng.random_range(-5.0..5.0),
            rng.random_range(1e-4..1e-1),
        );
        let (u_h, next) = state.step(eps, deps, dt)?;
        let (u_p, acc) = pid_step(&gains, state.integral(), eps, deps, dt)?;
        worst = worst.max((u_h - u_p).abs()).max((next.integral() - acc).abs());
    }
    Ok(PropertyResult::at_most("zero degree equals linear PID", worst, 1e-12))
}

fn scaling_symmetry(mu: f64, s: f64) -> Result<PropertyResult> {
    let name = format!("solution scaling (mu = {mu}, s = {s})");
    let scn = Scenario::extended(&name, GainSet::certified_default(), mu, ExtendedState::new(1.0, 0.0, 0.3))
        .with_grid(5.0, 1e-3);
    let report = scaling_symmetry_run(&scn, s)?;
    Ok(PropertyResult::at_most(name, report.discrepancy, 1e-4))
}

fn decrease(mu: f64) -> Result<PropertyResult> {
    let gains = GainSet::certified_default();
    let cert = certify(&gains)?;
    let scn = Scenario::extended("decrease", gains, mu, ExtendedState::new(1.0, 0.0, 0.3));
    let report = lyapunov_decrease_check(&simulate(&scn)?, &cert, mu, 1e-12)?;
    Ok(PropertyResult {
        name: format!("Lyapunov decrease (mu = {mu})"),
        measured: 1.0 - report.fraction,
        tolerance: 1.0 - crate::stability::DECREASE_PASS_FRACTION,
        passed: report.passed,
    })
}

fn certificate() -> Result<PropertyResult> {
    let cert = certify(&GainSet::certified_default())?;
    let a = audit(&cert)?;
    let straddles = cert.mu_lo < 0.0 && cert.mu_hi > 0.0;
    Ok(PropertyResult {
        name: "certificate audit".into(),
        measured: -a.p_min_eigenvalue.min(-a.lyapunov_max_eigenvalue),
        tolerance: 0.0,
        passed: a.passed() && straddles,
    })
}

type Job = Box<dyn Fn() -> Result<Vec<PropertyResult>> + Send + Sync>;

/// Runs every property. Failures are recorded in the report; an error
/// inside a property is reported as a failure of that property.
pub fn run_verify(opts: VerifyOptions) -> VerifyReport {
    let seed = opts.seed;
    let mut jobs: Vec<(String, f64, Job)> = vec![
        ("dilation group law".into(), 1e-12, Box::new(move || group_law(seed).map(|r| vec![r]))),
        ("norm suites".into(), 1e-9, Box::new(move || norm_suites(opts))),
        ("zero degree equals linear PID".into(), 1e-12, Box::new(move || zero_degree_equivalence(seed + 5).map(|r| vec![r]))),
        ("certificate audit".into(), 0.0, Box::new(|| certificate().map(|r| vec![r]))),
    ];
    for (i, mu) in [-0.2, -0.1, 0.0, 0.1, 0.2].into_iter().enumerate() {
        jobs.push((
            format!("field homogeneity (mu = {mu})"),
            FIELD_HOMOGENEITY_TOL,
            Box::new(move || field_homogeneity(mu, seed + 10 + i as u64).map(|r| vec![r])),
        ));
    }
    for mu in [-0.1, 0.1] {
        for s in [-0.5, 0.5] {
            jobs.push((
                format!("solution scaling (mu = {mu}, s = {s})"),
                1e-4,
                Box::new(move || scaling_symmetry(mu, s).map(|r| vec![r])),
            ));
        }
    }
    for mu in [-0.1, 0.0, 0.1] {
        jobs.push((format!("Lyapunov decrease (mu = {mu})"), 0.01, Box::new(move || decrease(mu).map(|r| vec![r]))));
    }

    let results = jobs
        .par_iter()
        .map(|(name, tol, job)| job().unwrap_or_else(|_| vec![PropertyResult::failed(name.clone(), *tol)]))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    VerifyReport { seed, results }
}
