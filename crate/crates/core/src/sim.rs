//! Fixed-step RK4 simulation of the closed loops and trajectory recording.
//!
//! For `μ < 0` the closed-loop field is only continuous at `ξ = 0`, so the
//! fourth-order behaviour of RK4 degrades in a neighbourhood of the origin.

use crate::control::{GainSet, HpidState, DEFAULT_NORM_FLOOR};
use crate::error::{Error, Result};
use crate::linalg::euclidean_norm;
use crate::plant::{
    double_integrator_rhs, feedback_linearized_joint_rhs, ClosedLoop, ExtendedState, JointPlantConfig,
    NormChoice,
};

/// States with Euclidean norm above this abort the simulation.
pub const DIVERGENCE_THRESHOLD: f64 = 1e9;
pub const DEFAULT_HORIZON: f64 = 9.0;
pub const DEFAULT_STEP: f64 = 1e-3;

/// Classical fourth-order Runge–Kutta step.
pub fn rk4_step<F>(rhs: &mut F, t: f64, x: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
{
    if !(h > 0.0) {
        return Err(Error::Argument(format!("step must be positive, got {h}")));
    }
    let mut eval = |t: f64, x: &[f64]| -> Result<Vec<f64>> {
        let dx = rhs(t, x)?;
        if dx.len() != x.len() {
            return Err(Error::Argument(format!(
                "rhs returned {} components for a state of dimension {}",
                dx.len(),
                x.len()
            )));
        }
        if dx.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("non-finite derivative at t = {t}")));
        }
        Ok(dx)
    };
    let axpy = |a: f64, d: &[f64]| -> Vec<f64> { x.iter().zip(d).map(|(xi, di)| xi + a * di).collect() };

    let k1 = eval(t, x)?;
    let k2 = eval(t + 0.5 * h, &axpy(0.5 * h, &k1))?;
    let k3 = eval(t + 0.5 * h, &axpy(0.5 * h, &k2))?;
    let k4 = eval(t + h, &axpy(h, &k3))?;
    Ok((0..x.len())
        .map(|i| x[i] + h * ((k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) / 6.0))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControllerKind {
    Pid,
    Hpid,
}

impl ControllerKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Pid => "pid",
            Self::Hpid => "hpid",
        }
    }
}

/// Double integrator `ε̈ = u + p` closed by (h)PID, state `(ε, ε̇, x₃)` with `x₃(0) = p`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedPlant {
    pub gains: GainSet,
    pub mu: f64,
    pub norm: NormChoice,
    pub initial: ExtendedState,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PlantConfig {
    Extended(ExtendedPlant),
    Joints(JointPlantConfig),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub plant: PlantConfig,
    pub controller: ControllerKind,
    pub horizon: f64,
    pub step: f64,
    pub norm_floor: f64,
    pub seed: u64,
}

impl Scenario {
    /// hPID on the extended double integrator with default horizon, step and norm.
    pub fn extended(name: &str, gains: GainSet, mu: f64, initial: ExtendedState) -> Self {
        Self {
            name: name.to_string(),
            plant: PlantConfig::Extended(ExtendedPlant {
                gains,
                mu,
                norm: NormChoice::default(),
                initial,
            }),
            controller: ControllerKind::Hpid,
            horizon: DEFAULT_HORIZON,
            step: DEFAULT_STEP,
            norm_floor: DEFAULT_NORM_FLOOR,
            seed: 0,
        }
    }

    pub fn joints(name: &str, controller: ControllerKind, plant: JointPlantConfig) -> Self {
        Self {
            name: name.to_string(),
            plant: PlantConfig::Joints(plant),
            controller,
            horizon: DEFAULT_HORIZON,
            step: DEFAULT_STEP,
            norm_floor: DEFAULT_NORM_FLOOR,
            seed: 0,
        }
    }

    pub fn with_grid(mut self, horizon: f64, step: f64) -> Self {
        self.horizon = horizon;
        self.step = step;
        self
    }

    pub fn n_steps(&self) -> usize {
        (self.horizon / self.step).round() as usize
    }

    /// `μ` actually used by the controller: zero for the linear PID.
    pub fn effective_mu(&self, mu: f64) -> f64 {
        match self.controller {
            ControllerKind::Pid => 0.0,
            ControllerKind::Hpid => mu,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (t, h) = (self.horizon, self.step);
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::Argument(format!("horizon must be positive, got {t}")));
        }
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::Argument(format!("step must be positive, got {h}")));
        }
        if h > t / 10.0 {
            return Err(Error::Argument(format!("step {h} must not exceed horizon/10 = {}", t / 10.0)));
        }
        let n = t / h;
        if (n - n.round()).abs() > 1e-6 * n {
            return Err(Error::Argument(format!("horizon {t} is not a whole number of steps {h}")));
        }
        if !(self.norm_floor.is_finite() && self.norm_floor > 0.0) {
            return Err(Error::Argument(format!("norm_floor must be positive, got {}", self.norm_floor)));
        }
        match &self.plant {
            PlantConfig::Extended(p) => {
                if !p.initial.is_finite() {
                    return Err(Error::Argument("initial state must be finite".into()));
                }
                self.closed_loop(p)?;
            }
            PlantConfig::Joints(j) => {
                j.validate()?;
                self.joint_controllers(j)?;
            }
        }
        Ok(())
    }

    fn closed_loop(&self, p: &ExtendedPlant) -> Result<ClosedLoop> {
        let mu = self.effective_mu(p.mu);
        ClosedLoop::with_floor(p.gains, mu, p.norm.build(mu)?, self.norm_floor)
    }

    fn joint_controllers(&self, plant: &JointPlantConfig) -> Result<Vec<HpidState>> {
        plant
            .joints
            .iter()
            .enumerate()
            .map(|(j, spec)| {
                let mu = self.effective_mu(spec.mu);
                spec.norm
                    .build(mu)
                    .and_then(|norm| HpidState::with_floor(spec.gains, mu, norm, self.norm_floor))
                    .map_err(|e| Error::Argument(format!("joint {}: {e}", j + 1)))
            })
            .collect()
    }
}

/// Sampled closed-loop signals on a uniform grid.
///
/// For the extended plant `states` are `(x₁, x₂, x₃)`, `controls` is `[u]`
/// and `errors` is `[ε]`; `outputs` is empty. For the joint plant the
/// state holds `(δ_a, δ_b, ∫)` per joint and `outputs` the joint positions.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub controls: Vec<Vec<f64>>,
    pub errors: Vec<Vec<f64>>,
    pub outputs: Vec<Vec<f64>>,
    pub scenario: Scenario,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn n_channels(&self) -> usize {
        self.controls.first().map_or(0, Vec::len)
    }

    pub fn step(&self) -> f64 {
        self.scenario.step
    }

    pub fn final_state_norm(&self) -> f64 {
        self.states.last().map_or(0.0, |x| euclidean_norm(x))
    }
}

fn check_divergence(t: f64, x: &[f64]) -> Result<()> {
    let norm = euclidean_norm(x);
    if !(norm <= DIVERGENCE_THRESHOLD) {
        return Err(Error::Divergence {
            time: t,
            norm,
            threshold: DIVERGENCE_THRESHOLD,
        });
    }
    Ok(())
}

/// Runs a scenario over `[0, T]` at step `h`. Deterministic.
pub fn simulate(scn: &Scenario) -> Result<Trajectory> {
    scn.validate()?;
    match &scn.plant {
        PlantConfig::Extended(p) => simulate_extended(scn, p),
        PlantConfig::Joints(j) => simulate_joints(scn, j),
    }
}

fn simulate_extended(scn: &Scenario, plant: &ExtendedPlant) -> Result<Trajectory> {
    let cl = scn.closed_loop(plant)?;
    let p = plant.initial.x3;
    let n = scn.n_steps();
    let h = scn.step;
    let mut rhs = |_t: f64, x: &[f64]| -> Result<Vec<f64>> { Ok(cl.field(&[x[0], x[1], x[2]])?.to_vec()) };

    let mut traj = empty_trajectory(scn, n + 1);
    let mut x = plant.initial.to_array().to_vec();
    for k in 0..=n {
        let t = k as f64 * h;
        let xa = [x[0], x[1], x[2]];
        traj.times.push(t);
        traj.controls.push(vec![cl.control(&xa, p)?]);
        traj.errors.push(vec![x[0]]);
        traj.outputs.push(Vec::new());
        traj.states.push(x.clone());
        if k < n {
            x = rk4_step(&mut rhs, t, &x, h)?;
            check_divergence(t + h, &x)?;
        }
    }
    Ok(traj)
}

/// Same closed loop as [`simulate`] for the extended plant, but the
/// control comes from [`HpidState::evaluate`] driving
/// [`double_integrator_rhs`], with the controller's accumulator advanced
/// by the RK4 stages. `x₃` is reconstructed as `p + K_i·∫`.
pub fn simulate_extended_with_controller(scn: &Scenario) -> Result<Trajectory> {
    scn.validate()?;
    let PlantConfig::Extended(plant) = &scn.plant else {
        return Err(Error::Argument("controller-path simulation needs the extended plant".into()));
    };
    let mu = scn.effective_mu(plant.mu);
    let controller = HpidState::with_floor(plant.gains, mu, plant.norm.build(mu)?, scn.norm_floor)?;
    let p = plant.initial.x3;
    let ki = plant.gains.ki;
    let n = scn.n_steps();
    let h = scn.step;
    let mut rhs = |_t: f64, y: &[f64]| -> Result<Vec<f64>> {
        let (u, integrand) = controller.evaluate(y[0], y[1], y[2])?;
        let (de, dde) = double_integrator_rhs(y[0], y[1], u, p);
        Ok(vec![de, dde, integrand])
    };

    let mut traj = empty_trajectory(scn, n + 1);
    let mut y = vec![plant.initial.x1, plant.initial.x2, 0.0];
    for k in 0..=n {
        let t = k as f64 * h;
        let (u, _) = controller.evaluate(y[0], y[1], y[2])?;
        traj.times.push(t);
        traj.controls.push(vec![u]);
        traj.errors.push(vec![y[0]]);
        traj.outputs.push(Vec::new());
        traj.states.push(vec![y[0], y[1], p + ki * y[2]]);
        if k < n {
            y = rk4_step(&mut rhs, t, &y, h)?;
            check_divergence(t + h, &y)?;
        }
    }
    Ok(traj)
}

fn simulate_joints(scn: &Scenario, plant: &JointPlantConfig) -> Result<Trajectory> {
    let controllers = scn.joint_controllers(plant)?;
    let phases = plant.resolve_phases(scn.seed);
    let n_joints = plant.n_joints();
    let n = scn.n_steps();
    let h = scn.step;

    let joint_eval = |t: f64, x: &[f64], j: usize| -> Result<(f64, f64, f64)> {
        let (da, db, acc) = (x[3 * j], x[3 * j + 1], x[3 * j + 2]);
        let (u, integrand) = controllers[j].evaluate(da, db, acc)?;
        let disturbance = plant.joints[j].disturbance.eval(t, phases[j]);
        let (dda, ddb) = feedback_linearized_joint_rhs(da, db, u, disturbance);
        Ok((dda, ddb, integrand))
    };
    let mut rhs = |t: f64, x: &[f64]| -> Result<Vec<f64>> {
        let mut dx = Vec::with_capacity(x.len());
        for j in 0..n_joints {
            let (a, b, c) = joint_eval(t, x, j)?;
            dx.extend_from_slice(&[a, b, c]);
        }
        Ok(dx)
    };

    let mut x: Vec<f64> = plant
        .joints
        .iter()
        .flat_map(|j| {
            let (da, db) = j.initial_error();
            [da, db, 0.0]
        })
        .collect();
    let mut traj = empty_trajectory(scn, n + 1);
    for k in 0..=n {
        let t = k as f64 * h;
        let mut u = Vec::with_capacity(n_joints);
        let mut eps = Vec::with_capacity(n_joints);
        let mut q = Vec::with_capacity(n_joints);
        for (j, spec) in plant.joints.iter().enumerate() {
            let (da, db, acc) = (x[3 * j], x[3 * j + 1], x[3 * j + 2]);
            u.push(controllers[j].evaluate(da, db, acc)?.0);
            eps.push(da);
            q.push(spec.reference.eval(t).0 - da);
        }
        traj.times.push(t);
        traj.controls.push(u);
        traj.errors.push(eps);
        traj.outputs.push(q);
        traj.states.push(x.clone());
        if k < n {
            x = rk4_step(&mut rhs, t, &x, h)?;
            check_divergence(t + h, &x)?;
        }
    }
    Ok(traj)
}

fn empty_trajectory(scn: &Scenario, capacity: usize) -> Trajectory {
    Trajectory {
        times: Vec::with_capacity(capacity),
        states: Vec::with_capacity(capacity),
        controls: Vec::with_capacity(capacity),
        errors: Vec::with_capacity(capacity),
        outputs: Vec::with_capacity(capacity),
        scenario: scn.clone(),
    }
}

/// Result of comparing `x(t, d̃(s)x₀)` against `d̃(s) x(e^{μs}t, x₀)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingReport {
    pub s: f64,
    pub mu: f64,
    /// Sup over compared samples of the max-abs component difference.
    pub discrepancy: f64,
    pub compared_samples: usize,
    /// Some rescaled times fell beyond the nominal horizon and were skipped.
    pub truncated: bool,
}

/// Checks the solution scaling symmetry of the homogeneous closed loop.
/// The nominal trajectory is resampled at `e^{μs}t` by linear interpolation.
pub fn scaling_symmetry_run(scn: &Scenario, s: f64) -> Result<ScalingReport> {
    let PlantConfig::Extended(plant) = &scn.plant else {
        return Err(Error::Argument("scaling symmetry needs the extended plant".into()));
    };
    if !s.is_finite() {
        return Err(Error::Argument(format!("s must be finite, got {s}")));
    }
    let mu = scn.effective_mu(plant.mu);
    let dil = crate::homogeneity::Dilation::extended(mu)?;
    let nominal = simulate(scn)?;

    let mut scaled_scn = scn.clone();
    let scaled_x0 = dil.apply(s, &plant.initial.to_array())?;
    if let PlantConfig::Extended(p) = &mut scaled_scn.plant {
        p.initial = ExtendedState::from_slice(&scaled_x0)?;
    }
    let scaled = simulate(&scaled_scn)?;

    let rate = (mu * s).exp();
    let h = scn.step;
    let last = nominal.len() - 1;
    let mut discrepancy = 0.0_f64;
    let mut compared = 0;
    let mut truncated = false;
    for (k, &t) in scaled.times.iter().enumerate() {
        let tau = rate * t;
        let pos = tau / h;
        let i = pos.floor() as usize;
        let frac = pos - i as f64;
        let resampled: Vec<f64> = if i >= last {
            if i == last && frac <= 1e-9 {
                nominal.states[last].clone()
            } else {
                truncated = true;
                continue;
            }
        } else {
            nominal.states[i]
                .iter()
                .zip(&nominal.states[i + 1])
                .map(|(a, b)| a + frac * (b - a))
                .collect()
        };
        let predicted = dil.apply(s, &resampled)?;
        let diff = scaled.states[k]
            .iter()
            .zip(&predicted)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        discrepancy = discrepancy.max(diff);
        compared += 1;
    }
    Ok(ScalingReport {
        s,
        mu,
        discrepancy,
        compared_samples: compared,
        truncated,
    })
}
