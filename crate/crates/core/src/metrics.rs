//! Performance indices on sampled trajectories and the PID-vs-hPID table.
//!
//! All integrals use the trapezoidal rule on the uniform grid, except IVC
//! which integrates the forward-difference derivative of the piecewise
//! linear control, i.e. `Σ |u_{k+1} - u_k|`.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::sim::Trajectory;

/// Which recorded signal a norm is taken over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Signal {
    Control,
    Error,
}

fn trapezoid(times: &[f64], values: impl Fn(usize) -> f64) -> f64 {
    (0..times.len().saturating_sub(1))
        .map(|k| 0.5 * (times[k + 1] - times[k]) * (values(k) + values(k + 1)))
        .sum()
}

fn check_samples(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::Argument(format!("index needs at least 2 samples, got {n}")));
    }
    Ok(())
}

/// `∫ |du/dt| dt` with forward differences.
pub fn ivc_samples(times: &[f64], u: &[f64]) -> Result<f64> {
    check_samples(times.len())?;
    Ok(u.windows(2).map(|w| (w[1] - w[0]).abs()).sum())
}

/// `∫ |u| dt`.
pub fn iavc_samples(times: &[f64], u: &[f64]) -> Result<f64> {
    check_samples(times.len())?;
    Ok(trapezoid(times, |k| u[k].abs()))
}

/// `∫ t |ε| dt`.
pub fn itae_samples(times: &[f64], eps: &[f64]) -> Result<f64> {
    check_samples(times.len())?;
    Ok(trapezoid(times, |k| times[k] * eps[k].abs()))
}

fn channel(traj: &Trajectory, signal: Signal, joint: usize) -> Result<Vec<f64>> {
    let rows = match signal {
        Signal::Control => &traj.controls,
        Signal::Error => &traj.errors,
    };
    let n = traj.n_channels();
    if joint >= n {
        return Err(Error::Argument(format!("joint index {joint} out of range for {n} channels")));
    }
    Ok(rows.iter().map(|r| r[joint]).collect())
}

pub fn ivc(traj: &Trajectory, joint: usize) -> Result<f64> {
    ivc_samples(&traj.times, &channel(traj, Signal::Control, joint)?)
}

pub fn iavc(traj: &Trajectory, joint: usize) -> Result<f64> {
    iavc_samples(&traj.times, &channel(traj, Signal::Control, joint)?)
}

pub fn itae(traj: &Trajectory, joint: usize) -> Result<f64> {
    itae_samples(&traj.times, &channel(traj, Signal::Error, joint)?)
}

/// `(∫ Σ_i s_i² dt)^{1/2}` over all channels.
pub fn l2_norm(traj: &Trajectory, signal: Signal) -> Result<f64> {
    check_samples(traj.len())?;
    let rows = match signal {
        Signal::Control => &traj.controls,
        Signal::Error => &traj.errors,
    };
    Ok(trapezoid(&traj.times, |k| rows[k].iter().map(|v| v * v).sum()).sqrt())
}

/// `(Σ_j s_j²(t_k))^{1/2}` at one sample.
pub fn pointwise_norm(traj: &Trajectory, signal: Signal, t_index: usize) -> Result<f64> {
    let rows = match signal {
        Signal::Control => &traj.controls,
        Signal::Error => &traj.errors,
    };
    let row = rows.get(t_index).ok_or_else(|| {
        Error::Argument(format!("sample index {t_index} out of range for {} samples", rows.len()))
    })?;
    Ok(row.iter().map(|v| v * v).sum::<f64>().sqrt())
}

/// A `(PID, hPID)` pair of values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pair {
    pub pid: f64,
    pub hpid: f64,
}

impl Pair {
    pub const fn new(pid: f64, hpid: f64) -> Self {
        Self { pid, hpid }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointIndices {
    pub ivc: Pair,
    pub iavc: Pair,
    pub itae: Pair,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub pid_scenario: String,
    pub hpid_scenario: String,
    pub joints: Vec<JointIndices>,
    pub control_l2: Pair,
    pub error_l2: Pair,
    /// A second, conflicting pair of error L² values carried by a fixture.
    pub alternate_error_l2: Option<Pair>,
    /// `true` when the numbers were injected rather than computed.
    pub precomputed: bool,
}

pub const REPORT_HEADER: &str = "joint,IVC_PID,IVC_HPID,IAVC_PID,IAVC_HPID,ITAE_PID,ITAE_HPID,L2U_PID,L2U_HPID,L2EPS_PID,L2EPS_HPID";

/// Per-joint indices for both controllers plus aggregate L² norms.
pub fn compare(pid: &Trajectory, hpid: &Trajectory) -> Result<MetricsReport> {
    if pid.times != hpid.times {
        return Err(Error::Argument(format!(
            "grid mismatch: {} samples at h = {} vs {} samples at h = {}",
            pid.len(),
            pid.step(),
            hpid.len(),
            hpid.step()
        )));
    }
    if pid.n_channels() != hpid.n_channels() {
        return Err(Error::Argument(format!(
            "channel mismatch: {} vs {}",
            pid.n_channels(),
            hpid.n_channels()
        )));
    }
    let joints = (0..pid.n_channels())
        .map(|j| {
            Ok(JointIndices {
                ivc: Pair::new(ivc(pid, j)?, ivc(hpid, j)?),
                iavc: Pair::new(iavc(pid, j)?, iavc(hpid, j)?),
                itae: Pair::new(itae(pid, j)?, itae(hpid, j)?),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MetricsReport {
        pid_scenario: pid.scenario.name.clone(),
        hpid_scenario: hpid.scenario.name.clone(),
        joints,
        control_l2: Pair::new(l2_norm(pid, Signal::Control)?, l2_norm(hpid, Signal::Control)?),
        error_l2: Pair::new(l2_norm(pid, Signal::Error)?, l2_norm(hpid, Signal::Error)?),
        alternate_error_l2: None,
        precomputed: false,
    })
}

impl MetricsReport {
    /// The hardware table and the L² norms reported alongside it; the
    /// second error-norm pair contradicts the first and is kept as an
    /// alternate row.
    pub fn table1_fixture() -> Self {
        const ROWS: [[f64; 6]; 6] = [
            [982.0, 615.0, 114.0, 65.0, 2.776, 2.806],
            [2390.0, 618.0, 142.0, 68.0, 4.385, 3.704],
            [836.0, 853.0, 43.0, 50.0, 1.198, 0.987],
            [111.0, 56.0, 67.0, 65.0, 6.589, 6.345],
            [109.0, 133.0, 73.0, 72.0, 7.925, 8.150],
            [552.0, 591.0, 102.0, 108.0, 1.802, 1.3733],
        ];
        Self {
            pid_scenario: "table1_pid".into(),
            hpid_scenario: "table1_hpid".into(),
            joints: ROWS
                .iter()
                .map(|r| JointIndices {
                    ivc: Pair::new(r[0], r[1]),
                    iavc: Pair::new(r[2], r[3]),
                    itae: Pair::new(r[4], r[5]),
                })
                .collect(),
            control_l2: Pair::new(423.933, 329.459),
            error_l2: Pair::new(52.2818, 55.0789),
            alternate_error_l2: Some(Pair::new(59.214, 55.865)),
            precomputed: true,
        }
    }

    pub fn all_finite_nonnegative(&self) -> bool {
        let ok = |p: &Pair| p.pid.is_finite() && p.hpid.is_finite() && p.pid >= 0.0 && p.hpid >= 0.0;
        self.joints.iter().all(|j| ok(&j.ivc) && ok(&j.iavc) && ok(&j.itae))
            && ok(&self.control_l2)
            && ok(&self.error_l2)
    }

    /// Joints where hPID has strictly lower IVC and IAVC than PID.
    pub fn hpid_effort_reductions(&self) -> usize {
        self.joints
            .iter()
            .filter(|j| j.ivc.hpid < j.ivc.pid && j.iavc.hpid < j.iavc.pid)
            .count()
    }

    /// CSV with one row per joint and an `all` row with the L² norms.
    /// Numbers use the shortest representation that round-trips.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(REPORT_HEADER);
        out.push('\n');
        for (j, idx) in self.joints.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},,,,",
                j + 1,
                idx.ivc.pid,
                idx.ivc.hpid,
                idx.iavc.pid,
                idx.iavc.hpid,
                idx.itae.pid,
                idx.itae.hpid
            );
        }
        let _ = writeln!(
            out,
            "all,,,,,,,{},{},{},{}",
            self.control_l2.pid, self.control_l2.hpid, self.error_l2.pid, self.error_l2.hpid
        );
        if let Some(alt) = self.alternate_error_l2 {
            let _ = writeln!(out, "all_alternate,,,,,,,,,{},{}", alt.pid, alt.hpid);
        }
        out
    }

    /// One-line summary of the effort comparison.
    pub fn summary(&self) -> String {
        let n = self.joints.len();
        let ivc = self.joints.iter().filter(|j| j.ivc.hpid < j.ivc.pid).count();
        let iavc = self.joints.iter().filter(|j| j.iavc.hpid < j.iavc.pid).count();
        let itae = self.joints.iter().filter(|j| j.itae.hpid < j.itae.pid).count();
        format!(
            "{} vs {}{}: hPID lower IVC on {ivc}/{n}, lower IAVC on {iavc}/{n}, lower ITAE on {itae}/{n} joints; \
             |u|_L2 {} -> {}, |eps|_L2 {} -> {}",
            self.pid_scenario,
            self.hpid_scenario,
            if self.precomputed { " (precomputed)" } else { "" },
            self.control_l2.pid,
            self.control_l2.hpid,
            self.error_l2.pid,
            self.error_l2.hpid
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(t_end: f64, h: f64) -> Vec<f64> {
        let n = (t_end / h).round() as usize;
        (0..=n).map(|k| k as f64 * h).collect()
    }

    #[test]
    fn ivc_examples() {
        let t = grid(9.0, 1e-3);
        assert_eq!(ivc_samples(&t, &vec![2.0; t.len()]).unwrap(), 0.0);
        assert!((ivc_samples(&t, &t).unwrap() - 9.0).abs() <= 1e-9);
        assert!(ivc_samples(&[0.0], &[1.0]).is_err());
    }

    #[test]
    fn iavc_examples() {
        let t = grid(9.0, 1e-3);
        assert_eq!(iavc_samples(&t, &vec![0.0; t.len()]).unwrap(), 0.0);
        assert!((iavc_samples(&t, &vec![2.0; t.len()]).unwrap() - 18.0).abs() <= 1e-9);
        let u: Vec<f64> = t.iter().map(|t| t - 4.5).collect();
        assert!((iavc_samples(&t, &u).unwrap() - 20.25).abs() <= 1e-6);
    }

    #[test]
    fn itae_examples() {
        let t = grid(9.0, 1e-3);
        assert_eq!(itae_samples(&t, &vec![0.0; t.len()]).unwrap(), 0.0);
        assert!((itae_samples(&t, &vec![1.0; t.len()]).unwrap() - 40.5).abs() <= 1e-6);
    }

    #[test]
    fn fixture_csv_renders_table_values() {
        let csv = MetricsReport::table1_fixture().to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], REPORT_HEADER);
        assert_eq!(lines[1], "1,982,615,114,65,2.776,2.806,,,,");
        assert_eq!(lines[5], "5,109,133,73,72,7.925,8.15,,,,");
        assert_eq!(lines[6], "6,552,591,102,108,1.802,1.3733,,,,");
        assert_eq!(lines[7], "all,,,,,,,423.933,329.459,52.2818,55.0789");
        assert_eq!(lines[8], "all_alternate,,,,,,,,,59.214,55.865");
    }
}
