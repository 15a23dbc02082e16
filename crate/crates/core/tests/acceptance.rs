//! Acceptance gate. Runs every criterion at its stated tolerance, prints one
//! PASS/FAIL line per criterion and exits non-zero if any fails.

use std::fs;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use hpid::cli::{run, Cli, EXIT_OK};
use hpid::homogeneity::{
    verify_field_homogeneity, Canonical, Dilation, Experimental, WeightedSum, FIELD_HOMOGENEITY_TOL,
};
use hpid::linalg::euclidean_norm;
use hpid::metrics::{compare, iavc_samples, itae_samples, ivc_samples, l2_norm, pointwise_norm, Signal};
use hpid::plant::{closed_loop_field, ClosedLoop, ExtendedState, JointPlantConfig, NormChoice, DESK_SCALE_MU};
use hpid::sim::{scaling_symmetry_run, simulate, ControllerKind, Scenario, Trajectory};
use hpid::stability::{certify, convergence_classifier, lyapunov_decrease_check};
use hpid::{hpid_step, pid_step, GainSet, HpidState};
use clap::Parser;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome, Option<Duration>);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn rand_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-3.0..3.0)).collect()
}

fn homogeneity_algebra() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let p = certify(&GainSet::certified_default()).map_err(|e| e.to_string())?.p;
    let canonical = Canonical::new(p.clone(), 1e-12).map_err(|e| e.to_string())?;
    let weighted = WeightedSum::new(vec![1.0, 2.0]).map_err(|e| e.to_string())?;
    let (mut group, mut scaling, mut residual, mut gradient) = (0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64);
    for _ in 0..100 {
        let mu = rng.random_range(-0.3..0.3);
        let (s, t) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let ext = Dilation::extended(mu).unwrap();
        let x = rand_vec(&mut rng, 3);
        let lhs = ext.apply(s, &ext.apply(t, &x).unwrap()).unwrap();
        let rhs = ext.apply(s + t, &x).unwrap();
        let diff: Vec<f64> = lhs.iter().zip(&rhs).map(|(a, b)| a - b).collect();
        group = group.max(euclidean_norm(&diff) / euclidean_norm(&rhs).max(1.0));

        let hp = Dilation::hpid(mu).unwrap();
        let xi = rand_vec(&mut rng, 2);
        let experimental = Experimental::new(0.7, 1.5, mu).unwrap();
        let rel = |a: f64, b: f64| (a - b).abs() / b;
        scaling = scaling
            .max(rel(weighted.norm(&hp, &hp.apply(s, &xi).unwrap()).unwrap(), s.exp() * weighted.norm(&hp, &xi).unwrap()))
            .max(rel(experimental.norm(&hp.apply(s, &xi).unwrap()).unwrap(), s.exp() * experimental.norm(&xi).unwrap()))
            .max(rel(
                canonical.norm(&ext, &ext.apply(s, &x).unwrap()).unwrap(),
                s.exp() * canonical.norm(&ext, &x).unwrap(),
            ));

        let lambda = canonical.norm(&ext, &x).unwrap();
        let z = ext.apply(-lambda.ln(), &x).unwrap();
        residual = residual.max((p.quad_form(&z).sqrt() - 1.0).abs());

        let grad = canonical.gradient(&ext, &x).unwrap();
        let h = 1e-6;
        for i in 0..3 {
            let (mut hi, mut lo) = (x.clone(), x.clone());
            hi[i] += h;
            lo[i] -= h;
            let fd = (canonical.norm(&ext, &hi).unwrap() - canonical.norm(&ext, &lo).unwrap()) / (2.0 * h);
            gradient = gradient.max((grad[i] - fd).abs() / euclidean_norm(&grad));
        }
    }
    check(
        group <= 1e-12 && scaling <= 1e-9 && residual <= 1e-10 && gradient <= 1e-5,
        format!("group {group:.1e}, norm scaling {scaling:.1e}, canonical residual {residual:.1e}, gradient {gradient:.1e}"),
    )
}

fn field_homogeneity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0_f64;
    for mu in [-0.2, -0.1, 0.0, 0.1, 0.2] {
        let cl = ClosedLoop::new(GainSet::certified_default(), mu, NormChoice::default().build(mu).unwrap()).unwrap();
        let samples: Vec<(f64, Vec<f64>)> =
            (0..200).map(|_| (rng.random_range(-2.0..2.0), rand_vec(&mut rng, 3))).collect();
        let report = verify_field_homogeneity(
            |x| Ok(cl.field(&[x[0], x[1], x[2]])?.to_vec()),
            &cl.extended_dilation(),
            mu,
            &samples,
        )
        .map_err(|e| e.to_string())?;
        worst = worst.max(report.max_residual);
    }
    check(worst <= FIELD_HOMOGENEITY_TOL, format!("max residual {worst:.1e} over 5 x 200 samples"))
}

fn zero_degree() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let norm = NormChoice::default().build(0.0).unwrap();
    let mut worst = 0.0_f64;
    let mut field_exact = true;
    for _ in 0..1000 {
        let gains = GainSet::new(
            rng.random_range(-10.0..10.0),
            rng.random_range(-10.0..10.0),
            rng.random_range(-10.0..10.0),
        );
        let acc = rng.random_range(-5.0..5.0);
        let (eps, deps, dt) = (rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(1e-4..0.1));
        let state = HpidState::new(gains, 0.0, norm.clone()).unwrap().with_integral(acc);
        let (u_h, _) = hpid_step(&state, eps, deps, dt).unwrap();
        let (u_p, _) = pid_step(&gains, acc, eps, deps, dt).unwrap();
        worst = worst.max((u_h - u_p).abs());

        let x = ExtendedState::new(eps, deps, acc);
        let a = gains.closed_loop_matrix();
        let v = x.to_array();
        let ax: Vec<f64> = a.iter().map(|r| r.iter().zip(&v).map(|(p, q)| p * q).sum()).collect();
        field_exact &= closed_loop_field(&x, &gains, 0.0, &norm).unwrap().to_vec() == ax;
    }
    check(worst <= 1e-12 && field_exact, format!("max |u_hpid - u_pid| {worst:.1e}, field == A x: {field_exact}"))
}

fn linear_oracle() -> Outcome {
    let a = GainSet::certified_default().closed_loop_matrix();
    let mut n = a;
    for (i, row) in n.iter_mut().enumerate() {
        row[i] += 1.0;
    }
    let mut n2 = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            n2[i][j] = (0..3).map(|k| n[i][k] * n[k][j]).sum();
        }
    }
    let x0 = [1.0, 0.0, 0.3];
    let traj = simulate(&Scenario::extended("oracle", GainSet::certified_default(), 0.0, ExtendedState::new(1.0, 0.0, 0.3)))
        .map_err(|e| e.to_string())?;
    let mut worst = 0.0_f64;
    for (t, x) in traj.times.iter().zip(&traj.states) {
        for i in 0..3 {
            let exact: f64 = (0..3)
                .map(|j| {
                    let id = if i == j { 1.0 } else { 0.0 };
                    (-t).exp() * (id + t * n[i][j] + 0.5 * t * t * n2[i][j]) * x0[j]
                })
                .sum();
            worst = worst.max((x[i] - exact).abs());
        }
    }
    check(worst <= 1e-6, format!("sup error {worst:.1e} against e^(At) x0"))
}

fn certificate_and_decrease() -> Outcome {
    let gains = GainSet::certified_default();
    let cert = certify(&gains).map_err(|e| e.to_string())?;
    let mut detail = format!("interval [{}, {}]", cert.mu_lo, cert.mu_hi);
    let mut ok = cert.mu_lo < 0.0 && cert.mu_hi > 0.0;
    for mu in [-0.1, 0.0, 0.1] {
        let traj = simulate(&Scenario::extended("decrease", gains, mu, ExtendedState::new(1.0, 0.0, 0.3)))
            .map_err(|e| e.to_string())?;
        let report = lyapunov_decrease_check(&traj, &cert, mu, 1e-12).map_err(|e| e.to_string())?;
        ok &= report.passed;
        detail.push_str(&format!(", mu {mu}: {:.4}", report.fraction));
    }
    check(ok, detail)
}

fn scaling_symmetry() -> Outcome {
    let mut worst = 0.0_f64;
    for mu in [-0.1, 0.1] {
        for s in [-0.5, 0.5] {
            let scn = Scenario::extended("scaling", GainSet::certified_default(), mu, ExtendedState::new(1.0, 0.0, 0.3))
                .with_grid(9.0, 1e-4);
            worst = worst.max(scaling_symmetry_run(&scn, s).map_err(|e| e.to_string())?.discrepancy);
        }
    }
    check(worst <= 1e-4, format!("max discrepancy {worst:.1e} at h = 1e-4"))
}

fn settle(traj: &Trajectory, tol: f64) -> Result<f64, String> {
    convergence_classifier(traj, tol)
        .map_err(|e| e.to_string())?
        .settle_time
        .ok_or_else(|| format!("never settled below {tol:e}"))
}

fn rate_taxonomy() -> Outcome {
    let run = |mu: f64| {
        simulate(&Scenario::extended("rate", GainSet::certified_default(), mu, ExtendedState::new(1.0, 0.0, 0.3)).with_grid(40.0, 1e-3))
            .map_err(|e| e.to_string())
    };
    let (finite, linear) = (run(-0.2)?, run(0.0)?);
    let t_finite = settle(&finite, 1e-6)?;
    let t_linear = settle(&linear, 1e-6)?;
    let t_tail = settle(&linear, 1e-8)?;
    check(
        t_finite <= 0.95 * t_linear && t_linear <= 0.95 * t_tail,
        format!("mu=-0.2 reaches 1e-6 at {t_finite} s; mu=0 reaches 1e-6 at {t_linear} s and 1e-8 at {t_tail} s"),
    )
}

fn metrics_correctness() -> Outcome {
    let h = 1e-3;
    let times: Vec<f64> = (0..=9000).map(|k| k as f64 * h).collect();
    let itae = itae_samples(&times, &vec![1.0; times.len()]).map_err(|e| e.to_string())?;
    let ivc = ivc_samples(&times, &times).map_err(|e| e.to_string())?;
    let iavc = iavc_samples(&times, &vec![2.0; times.len()]).map_err(|e| e.to_string())?;

    let traj = simulate(&Scenario::joints("l2", ControllerKind::Hpid, JointPlantConfig::desk_scale(6, DESK_SCALE_MU)))
        .map_err(|e| e.to_string())?;
    let sq: Vec<f64> = (0..traj.len()).map(|k| pointwise_norm(&traj, Signal::Control, k).unwrap().powi(2)).collect();
    let trap: f64 = sq.windows(2).map(|w| 0.5 * h * (w[0] + w[1])).sum();
    let l2 = l2_norm(&traj, Signal::Control).map_err(|e| e.to_string())?;
    let consistency = (trap - l2 * l2).abs() / (l2 * l2);
    check(
        (itae - 40.5).abs() <= 1e-6 && (ivc - 9.0).abs() <= 1e-9 && (iavc - 18.0).abs() <= 1e-9 && consistency <= 1e-9,
        format!("ITAE {itae}, IVC {ivc}, IAVC {iavc}, pointwise/L2 {consistency:.1e}"),
    )
}

fn table_trend() -> Outcome {
    let plant = JointPlantConfig::desk_scale(6, DESK_SCALE_MU);
    let pid = simulate(&Scenario::joints("pid", ControllerKind::Pid, plant.clone())).map_err(|e| e.to_string())?;
    let hpid = simulate(&Scenario::joints("hpid", ControllerKind::Hpid, plant)).map_err(|e| e.to_string())?;
    let report = compare(&pid, &hpid).map_err(|e| e.to_string())?;
    let n = report.hpid_effort_reductions();
    check(n >= 4, format!("hPID lower IVC and IAVC on {n}/6 joints (mu = {DESK_SCALE_MU})"))
}

fn cli(args: &[&str]) -> Result<i32, String> {
    let mut argv = vec!["hpid"];
    argv.extend_from_slice(args);
    let out = run(&Cli::try_parse_from(argv).map_err(|e| e.to_string())?);
    if out.code != EXIT_OK {
        return Err(out.stderr.join("; "));
    }
    Ok(out.code)
}

fn fixture_rendering() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = dir.path().join("fixture.cfg");
    fs::write(&cfg, "[compare table1]\nfixture = table1\n").map_err(|e| e.to_string())?;
    cli(&["compare", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()])?;
    let csv = fs::read_to_string(dir.path().join("table1_report.csv")).map_err(|e| e.to_string())?;
    let expected_rows = [
        "1,982,615,114,65,2.776,2.806,,,,",
        "2,2390,618,142,68,4.385,3.704,,,,",
        "3,836,853,43,50,1.198,0.987,,,,",
        "4,111,56,67,65,6.589,6.345,,,,",
        "5,109,133,73,72,7.925,8.15,,,,",
        "6,552,591,102,108,1.802,1.3733,,,,",
        "all,,,,,,,423.933,329.459,52.2818,55.0789",
        "all_alternate,,,,,,,,,59.214,55.865",
    ];
    let lines: Vec<&str> = csv.lines().skip(1).collect();
    check(lines == expected_rows, format!("{} data rows rendered", lines.len()))
}

fn determinism() -> Outcome {
    let text = "[run]\nseed = 21\n\
                [scenario joints_pid]\nplant = joints\ncontroller = pid\n\
                [scenario joints_hpid]\nplant = joints\nmu = -0.2\n\
                [scenario step]\nmu = 0.1\nx0 = 1, 0, 0.3\n\
                [compare desk]\npid = joints_pid\nhpid = joints_hpid\n";
    let mut outputs = Vec::new();
    for workers in ["1", "3"] {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let cfg = dir.path().join("run.cfg");
        fs::write(&cfg, text).map_err(|e| e.to_string())?;
        let (c, o) = (cfg.to_str().unwrap(), dir.path().to_str().unwrap());
        cli(&["simulate", "--config", c, "--out", o, "--workers", workers])?;
        cli(&["compare", "--config", c, "--out", o, "--workers", workers])?;
        let files: Vec<Vec<u8>> = ["joints_pid.csv", "joints_hpid.csv", "step.csv", "desk_report.csv"]
            .iter()
            .map(|f| fs::read(dir.path().join(f)).map_err(|e| e.to_string()))
            .collect::<Result<_, _>>()?;
        outputs.push(files);
    }
    check(outputs[0] == outputs[1], format!("{} files compared byte for byte", outputs[0].len()))
}

fn main() -> ExitCode {
    let secs = Duration::from_secs;
    let criteria: [Criterion; 11] = [
        ("homogeneity algebra suite", homogeneity_algebra, Some(secs(5))),
        ("closed-loop field homogeneity", field_homogeneity, Some(secs(5))),
        ("zero-degree degeneration", zero_degree, None),
        ("linear-case matrix exponential oracle", linear_oracle, None),
        ("stability certificate and Lyapunov decrease", certificate_and_decrease, Some(secs(30))),
        ("solution scaling symmetry", scaling_symmetry, None),
        ("convergence rate taxonomy", rate_taxonomy, None),
        ("metrics correctness", metrics_correctness, None),
        ("qualitative PID vs hPID effort trend", table_trend, Some(secs(60))),
        ("fixture rendering", fixture_rendering, None),
        ("determinism", determinism, None),
    ];
    let mut failures = 0;
    for (name, f, limit) in criteria {
        let start = Instant::now();
        let outcome = f();
        let elapsed = start.elapsed();
        let in_time = limit.is_none_or(|l| elapsed <= l);
        let (passed, detail) = match outcome {
            Ok(d) => (in_time, d),
            Err(d) => (false, d),
        };
        let budget = limit.map_or(String::new(), |l| format!(" / {:.0} s", l.as_secs_f64()));
        println!(
            "{} {name}: {detail} [{:.2} s{budget}]",
            if passed { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
        if !passed {
            failures += 1;
        }
    }
    println!("{}/11 acceptance criteria passed", 11 - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
