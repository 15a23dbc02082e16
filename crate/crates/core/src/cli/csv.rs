//! Trajectory CSV files: header row, `time` first, LF line endings,
//! numbers in scientific notation with 17 significant digits.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::sim::{PlantConfig, Trajectory};

/// Column names for a trajectory: `time,x1,x2,x3,u` for the extended
/// plant, `time,j<k>_q,j<k>_u,j<k>_eps` per joint otherwise.
pub fn trajectory_header(traj: &Trajectory) -> Vec<String> {
    let mut cols = vec!["time".to_string()];
    match &traj.scenario.plant {
        PlantConfig::Extended(_) => cols.extend(["x1", "x2", "x3", "u"].map(String::from)),
        PlantConfig::Joints(j) => {
            for k in 1..=j.n_joints() {
                cols.extend([format!("j{k}_q"), format!("j{k}_u"), format!("j{k}_eps")]);
            }
        }
    }
    cols
}

fn push_number(out: &mut String, v: f64) {
    let _ = write!(out, "{v:.16e}");
}

pub fn write_trajectory(traj: &Trajectory) -> String {
    let mut out = trajectory_header(traj).join(",");
    out.push('\n');
    let extended = matches!(traj.scenario.plant, PlantConfig::Extended(_));
    for k in 0..traj.len() {
        push_number(&mut out, traj.times[k]);
        if extended {
            for &v in traj.states[k].iter().chain(&traj.controls[k]) {
                out.push(',');
                push_number(&mut out, v);
            }
        } else {
            for j in 0..traj.n_channels() {
                for v in [traj.outputs[k][j], traj.controls[k][j], traj.errors[k][j]] {
                    out.push(',');
                    push_number(&mut out, v);
                }
            }
        }
        out.push('\n');
    }
    out
}

/// A numeric table read back from CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl CsvTable {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }
}

pub fn read_table(text: &str) -> Result<CsvTable> {
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| Error::Argument("empty CSV document".into()))?
        .split(',')
        .map(String::from)
        .collect();
    let rows = lines
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| {
            let row = l
                .split(',')
                .map(|f| {
                    f.parse::<f64>()
                        .map_err(|_| Error::Argument(format!("row {}: cannot parse '{f}' as a number", i + 2)))
                })
                .collect::<Result<Vec<_>>>()?;
            if row.len() != header.len() {
                return Err(Error::Argument(format!(
                    "row {}: {} fields, header has {}",
                    i + 2,
                    row.len(),
                    header.len()
                )));
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CsvTable { header, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::GainSet;
    use crate::plant::{ExtendedState, JointPlantConfig};
    use crate::sim::{simulate, ControllerKind, Scenario};

    #[test]
    fn extended_round_trip_is_exact() {
        let scn = Scenario::extended("rt", GainSet::certified_default(), 0.1, ExtendedState::new(1.0, 0.0, 0.3))
            .with_grid(1.0, 1e-2);
        let traj = simulate(&scn).unwrap();
        let table = read_table(&write_trajectory(&traj)).unwrap();
        assert_eq!(table.header, ["time", "x1", "x2", "x3", "u"]);
        assert_eq!(table.column("time").unwrap(), traj.times);
        let x2: Vec<f64> = traj.states.iter().map(|s| s[1]).collect();
        assert_eq!(table.column("x2").unwrap(), x2);
    }

    #[test]
    fn joint_columns_are_named_per_joint() {
        let scn = Scenario::joints("j", ControllerKind::Pid, JointPlantConfig::desk_scale(2, 0.0)).with_grid(0.1, 1e-2);
        let traj = simulate(&scn).unwrap();
        let text = write_trajectory(&traj);
        assert!(text.starts_with("time,j1_q,j1_u,j1_eps,j2_q,j2_u,j2_eps\n"));
        assert!(!text.contains('\r'));
        let table = read_table(&text).unwrap();
        let u2: Vec<f64> = traj.controls.iter().map(|c| c[1]).collect();
        assert_eq!(table.column("j2_u").unwrap(), u2);
    }
}
