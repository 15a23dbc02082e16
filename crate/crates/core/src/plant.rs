//! Plant models: the disturbed double integrator, the closed-loop extended
//! field `g_μ`, and the decentralized multi-joint tracking-error plant.
//!
//! The multi-joint plant is the post-cancellation error dynamics: after
//! feedback linearization each joint error obeys `δ̈ = u_fb - ξ(t)` where
//! `ξ` is a bounded disturbance standing in for cancellation mismatch.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::control::{GainSet, DEFAULT_NORM_FLOOR};
use crate::error::{Error, Result};
use crate::homogeneity::{
    Canonical, Dilation, Experimental, HomNormSpec, HomogeneousNorm, WeightedSum,
};
use crate::linalg::SymMatrix;

/// Homogeneity degree used by the default multi-joint comparison.
pub const DESK_SCALE_MU: f64 = -0.2;

/// Extended closed-loop state `x = (ε, ε̇, p + K_i∫ν^{3μ}ε)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtendedState {
    pub x1: f64,
    pub x2: f64,
    pub x3: f64,
}

impl ExtendedState {
    pub const fn new(x1: f64, x2: f64, x3: f64) -> Self {
        Self { x1, x2, x3 }
    }

    /// Initial condition for error `ε₀`, rate `ε̇₀` and constant disturbance `p`.
    pub const fn initial(eps0: f64, deps0: f64, p: f64) -> Self {
        Self::new(eps0, deps0, p)
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x1, self.x2, self.x3]
    }

    pub fn from_slice(x: &[f64]) -> Result<Self> {
        match x {
            [a, b, c] => Ok(Self::new(*a, *b, *c)),
            _ => Err(Error::Argument(format!("extended state needs 3 components, got {}", x.len()))),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.x1.is_finite() && self.x2.is_finite() && self.x3.is_finite()
    }
}

/// `ε̈ = u + p`: returns `(ε̇, u + p)`.
pub fn double_integrator_rhs(_eps: f64, deps: f64, u: f64, p: f64) -> (f64, f64) {
    (deps, u + p)
}

/// Per-joint error dynamics after feedback linearization: `(δ_b, u_fb - ξ)`.
pub fn feedback_linearized_joint_rhs(_delta_a: f64, delta_b: f64, u_fb: f64, disturbance: f64) -> (f64, f64) {
    (delta_b, u_fb - disturbance)
}

/// Description of the 2-d homogeneous norm used by a controller, before
/// it is bound to a particular `μ`.
#[derive(Debug, Clone, PartialEq)]
pub enum NormChoice {
    WeightedSum { coefficients: [f64; 2] },
    Canonical { p: [[f64; 2]; 2], tolerance: f64 },
    Experimental { zeta1_max: f64, gamma: f64 },
}

impl Default for NormChoice {
    fn default() -> Self {
        Self::WeightedSum {
            coefficients: [1.0, 1.0],
        }
    }
}

impl NormChoice {
    /// Builds the norm paired with `d(s) = diag(e^{(1-μ)s}, e^s)`.
    pub fn build(&self, mu: f64) -> Result<HomogeneousNorm> {
        let dilation = Dilation::hpid(mu)?;
        let spec = match self {
            Self::WeightedSum { coefficients } => HomNormSpec::WeightedSum(WeightedSum::new(coefficients.to_vec())?),
            Self::Canonical { p, tolerance } => {
                let p = SymMatrix::from_rows(&[p[0].to_vec(), p[1].to_vec()])?;
                HomNormSpec::Canonical(Canonical::new(p, *tolerance)?)
            }
            Self::Experimental { zeta1_max, gamma } => {
                HomNormSpec::Experimental(Experimental::new(*zeta1_max, *gamma, mu)?)
            }
        };
        HomogeneousNorm::new(spec, dilation)
    }
}

/// The closed-loop field `g_μ` of the double integrator under hPID.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoop {
    gains: GainSet,
    mu: f64,
    norm: HomogeneousNorm,
    norm_floor: f64,
}

impl ClosedLoop {
    pub fn new(gains: GainSet, mu: f64, norm: HomogeneousNorm) -> Result<Self> {
        Self::with_floor(gains, mu, norm, DEFAULT_NORM_FLOOR)
    }

    pub fn with_floor(gains: GainSet, mu: f64, norm: HomogeneousNorm, norm_floor: f64) -> Result<Self> {
        if !(mu > -0.5 && mu < 0.5) {
            return Err(Error::Argument(format!("mu must lie in (-0.5, 0.5), got {mu}")));
        }
        let expected = Dilation::hpid(mu)?;
        let paired = norm.dim() == 2
            && norm
                .dilation()
                .weights()
                .iter()
                .zip(expected.weights())
                .all(|(a, b)| (a - b).abs() <= 1e-12);
        if !paired {
            return Err(Error::Argument(format!(
                "closed-loop norm must be paired with d(s) = diag(e^((1-mu)s), e^s) for mu = {mu}"
            )));
        }
        if !(norm_floor.is_finite() && norm_floor > 0.0) {
            return Err(Error::Argument(format!("norm_floor must be positive, got {norm_floor}")));
        }
        Ok(Self {
            gains,
            mu,
            norm,
            norm_floor,
        })
    }

    pub fn gains(&self) -> &GainSet {
        &self.gains
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn norm(&self) -> &HomogeneousNorm {
        &self.norm
    }

    pub fn norm_floor(&self) -> f64 {
        self.norm_floor
    }

    /// `d̃(s) = diag(e^{(1-μ)s}, e^s, e^{(1+μ)s})`.
    pub fn extended_dilation(&self) -> Dilation {
        Dilation::extended(self.mu).expect("mu validated at construction")
    }

    /// `g_μ(x) = (x₂, K_p ν^{2μ} x₁ + K_d ν^{μ} x₂ + x₃, K_i ν^{3μ} x₁)`.
    /// At `μ = 0` this is exactly `A x` and the norm is never evaluated.
    pub fn field(&self, x: &[f64; 3]) -> Result<[f64; 3]> {
        let g = &self.gains;
        let [x1, x2, x3] = *x;
        if self.mu == 0.0 {
            return Ok([x2, g.kp * x1 + g.kd * x2 + x3, g.ki * x1]);
        }
        let nu = self.norm.eval(&[x1, x2])?.max(self.norm_floor);
        let m_d = nu.powf(self.mu);
        let m_p = nu.powf(2.0 * self.mu);
        let m_i = nu.powf(3.0 * self.mu);
        Ok([x2, g.kp * m_p * x1 + g.kd * m_d * x2 + x3, g.ki * m_i * x1])
    }

    /// The control part of `ẋ₂`, i.e. `ẋ₂ - p`.
    pub fn control(&self, x: &[f64; 3], p: f64) -> Result<f64> {
        Ok(self.field(x)?[1] - p)
    }
}

/// Free-function form of [`ClosedLoop::field`].
pub fn closed_loop_field(x: &ExtendedState, gains: &GainSet, mu: f64, norm: &HomogeneousNorm) -> Result<[f64; 3]> {
    ClosedLoop::new(*gains, mu, norm.clone())?.field(&x.to_array())
}

/// Sinusoidal reference `offset + A sin(ωt + φ)` with analytic derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceSpec {
    pub amplitude: f64,
    pub omega: f64,
    pub phase: f64,
    pub offset: f64,
}

impl ReferenceSpec {
    pub const fn constant(offset: f64) -> Self {
        Self {
            amplitude: 0.0,
            omega: 0.0,
            phase: 0.0,
            offset,
        }
    }

    /// `(ζ*_a, ζ*_b, ζ̇*_b)` at time `t`.
    pub fn eval(&self, t: f64) -> (f64, f64, f64) {
        let arg = self.omega * t + self.phase;
        let (s, c) = arg.sin_cos();
        (
            self.offset + self.amplitude * s,
            self.amplitude * self.omega * c,
            -self.amplitude * self.omega * self.omega * s,
        )
    }
}

pub fn reference_eval(spec: &ReferenceSpec, t: f64) -> Result<(f64, f64, f64)> {
    if !(t >= 0.0) {
        return Err(Error::Argument(format!("reference time must be >= 0, got {t}")));
    }
    Ok(spec.eval(t))
}

/// `ξ(t) = p + a sin(ωt + φ)` with `|p| + |a| ≤ ξ_a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Disturbance {
    pub bound: f64,
    pub constant: f64,
    pub amplitude: f64,
    pub omega: f64,
    /// `None` draws the phase from the scenario seed.
    pub phase: Option<f64>,
}

impl Default for Disturbance {
    fn default() -> Self {
        Self {
            bound: 0.5,
            constant: 0.3,
            amplitude: 0.0,
            omega: 0.0,
            phase: Some(0.0),
        }
    }
}

impl Disturbance {
    pub fn none() -> Self {
        Self {
            bound: 0.0,
            constant: 0.0,
            amplitude: 0.0,
            omega: 0.0,
            phase: Some(0.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.bound, self.constant, self.amplitude, self.omega]
            .iter()
            .all(|v| v.is_finite())
            && self.phase.is_none_or(f64::is_finite);
        if !finite {
            return Err(Error::Argument(format!("disturbance parameters must be finite: {self:?}")));
        }
        if self.bound < 0.0 {
            return Err(Error::Argument(format!("disturbance bound must be >= 0, got {}", self.bound)));
        }
        if self.constant.abs() + self.amplitude.abs() > self.bound {
            return Err(Error::Argument(format!(
                "disturbance |p| + |a| = {} exceeds bound {}",
                self.constant.abs() + self.amplitude.abs(),
                self.bound
            )));
        }
        Ok(())
    }

    pub fn eval(&self, t: f64, phase: f64) -> f64 {
        self.constant + self.amplitude * (self.omega * t + phase).sin()
    }
}

/// One joint of the decentralized plant.
#[derive(Debug, Clone, PartialEq)]
pub struct JointSpec {
    pub gains: GainSet,
    pub mu: f64,
    pub norm: NormChoice,
    pub disturbance: Disturbance,
    pub reference: ReferenceSpec,
    /// Initial joint position and velocity.
    pub q0: f64,
    pub dq0: f64,
}

impl JointSpec {
    /// Initial tracking error `(δ_a, δ_b) = (ζ* - ζ, ζ̇* - ζ̇)` at `t = 0`.
    pub fn initial_error(&self) -> (f64, f64) {
        let (r, dr, _) = self.reference.eval(0.0);
        (r - self.q0, dr - self.dq0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointPlantConfig {
    pub joints: Vec<JointSpec>,
}

impl JointPlantConfig {
    /// Six joints with distinct sinusoidal references, an initial offset
    /// from the reference, constant disturbance 0.3 plus a 0.15 sinusoid,
    /// bound 0.5, certified gains, and the experimental norm with
    /// `ζ₁,max` equal to half of each joint's initial error and `γ = 2`.
    pub fn desk_scale(n_joints: usize, mu: f64) -> Self {
        const AMPLITUDE: [f64; 6] = [0.8, 1.2, 0.5, 0.9, 0.6, 1.0];
        const OMEGA: [f64; 6] = [0.6, 0.9, 1.3, 0.7, 1.1, 0.5];
        const PHASE: [f64; 6] = [0.0, 0.7, 1.4, 2.1, 2.8, 3.5];
        const OFFSET: [f64; 6] = [1.5, 1.0, 0.5, 2.0, 1.2, 1.8];
        const INITIAL_ERROR: [f64; 6] = [0.9, 1.6, 0.5, 1.1, 0.7, 1.3];
        let joints = (0..n_joints)
            .map(|j| {
                let k = j % 6;
                let reference = ReferenceSpec {
                    amplitude: AMPLITUDE[k],
                    omega: OMEGA[k],
                    phase: PHASE[k],
                    offset: OFFSET[k],
                };
                let (r0, dr0, _) = reference.eval(0.0);
                JointSpec {
                    gains: GainSet::certified_default(),
                    mu,
                    norm: NormChoice::Experimental {
                        zeta1_max: 0.5 * INITIAL_ERROR[k],
                        gamma: 2.0,
                    },
                    disturbance: Disturbance {
                        bound: 0.5,
                        constant: 0.3,
                        amplitude: 0.15,
                        omega: 2.0 + 0.25 * k as f64,
                        phase: None,
                    },
                    reference,
                    q0: r0 - INITIAL_ERROR[k],
                    dq0: dr0,
                }
            })
            .collect();
        Self { joints }
    }

    pub fn n_joints(&self) -> usize {
        self.joints.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.joints.is_empty() {
            return Err(Error::Argument("joint plant needs at least one joint".into()));
        }
        for (j, joint) in self.joints.iter().enumerate() {
            joint
                .disturbance
                .validate()
                .map_err(|e| Error::Argument(format!("joint {}: {e}", j + 1)))?;
        }
        Ok(())
    }

    /// Disturbance phases, drawing unset ones from `seed`.
    pub fn resolve_phases(&self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.joints
            .iter()
            .map(|j| {
                let drawn: f64 = rng.random_range(0.0..TAU);
                j.disturbance.phase.unwrap_or(drawn)
            })
            .collect()
    }
}
