//! Linear PID and homogeneous PID (hPID) step evaluators.
//!
//! The hPID law is
//!
//! ```text
//! u = K_p ν^{2μ} ε + K_d ν^{μ} ε̇ + K_i ∫ ν^{3μ} ε dτ,   ν = max(‖(ε, ε̇)‖_d, norm_floor)
//! ```
//!
//! and reduces to the linear PID at `μ = 0`. No anti-windup and no
//! derivative filtering: the plants considered here are unsaturated.

use crate::error::{ensure_finite, Error, Result};
use crate::homogeneity::HomogeneousNorm;

pub const DEFAULT_NORM_FLOOR: f64 = 1e-9;

/// Signed PID gains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainSet {
    pub kp: f64,
    pub kd: f64,
    pub ki: f64,
}

/// Which Routh–Hurwitz condition rejected a gain set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HurwitzViolation {
    /// `a2 = -K_d > 0` fails.
    DampingCoefficient,
    /// `a1 = -K_p > 0` fails.
    StiffnessCoefficient,
    /// `a0 = -K_i > 0` fails.
    IntegralCoefficient,
    /// `a2·a1 > a0` fails.
    CrossCondition,
}

impl std::fmt::Display for HurwitzViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let msg = match self {
            Self::DampingCoefficient => "a2 = -K_d must be > 0",
            Self::StiffnessCoefficient => "a1 = -K_p must be > 0",
            Self::IntegralCoefficient => "a0 = -K_i must be > 0",
            Self::CrossCondition => "a2*a1 = K_d*K_p must exceed a0 = -K_i",
        };
        f.write_str(msg)
    }
}

impl GainSet {
    pub const fn new(kp: f64, kd: f64, ki: f64) -> Self {
        Self { kp, kd, ki }
    }

    /// `K_p = K_d = -3, K_i = -1`: characteristic polynomial `(λ+1)³`.
    pub const fn certified_default() -> Self {
        Self::new(-3.0, -3.0, -1.0)
    }

    pub fn is_finite(&self) -> bool {
        self.kp.is_finite() && self.kd.is_finite() && self.ki.is_finite()
    }

    /// Closed-loop matrix of the double integrator under linear PID,
    /// state `(ε, ε̇, p + K_i∫ε)`.
    pub fn closed_loop_matrix(&self) -> [[f64; 3]; 3] {
        [
            [0.0, 1.0, 0.0],
            [self.kp, self.kd, 1.0],
            [self.ki, 0.0, 0.0],
        ]
    }

    /// Coefficients `(a2, a1, a0)` of `λ³ + a2 λ² + a1 λ + a0 = λ³ - K_d λ² - K_p λ - K_i`.
    pub fn characteristic_coefficients(&self) -> (f64, f64, f64) {
        (-self.kd, -self.kp, -self.ki)
    }

    /// First Routh–Hurwitz condition violated, if any.
    pub fn hurwitz_violation(&self) -> Option<HurwitzViolation> {
        let (a2, a1, a0) = self.characteristic_coefficients();
        if !(a2 > 0.0) {
            Some(HurwitzViolation::DampingCoefficient)
        } else if !(a1 > 0.0) {
            Some(HurwitzViolation::StiffnessCoefficient)
        } else if !(a0 > 0.0) {
            Some(HurwitzViolation::IntegralCoefficient)
        } else if !(a2 * a1 > a0) {
            Some(HurwitzViolation::CrossCondition)
        } else {
            None
        }
    }

    pub fn is_stabilizing(&self) -> bool {
        self.is_finite() && self.hurwitz_violation().is_none()
    }
}

fn check_step_inputs(eps: f64, deps: f64, dt: f64) -> Result<()> {
    ensure_finite("eps", eps)?;
    ensure_finite("eps_dot", deps)?;
    ensure_finite("dt", dt)?;
    if dt < 0.0 {
        return Err(Error::Argument(format!("dt must be non-negative, got {dt}")));
    }
    Ok(())
}

/// One linear PID step with a left-endpoint rectangle rule on the integral.
/// Returns `(u, integral')`. `dt = 0` evaluates the law without accumulating.
pub fn pid_step(gains: &GainSet, integral: f64, eps: f64, deps: f64, dt: f64) -> Result<(f64, f64)> {
    check_step_inputs(eps, deps, dt)?;
    ensure_finite("integral", integral)?;
    if !gains.is_finite() {
        return Err(Error::Argument(format!("gains must be finite: {gains:?}")));
    }
    let acc = integral + eps * dt;
    Ok((gains.kp * eps + gains.kd * deps + gains.ki * acc, acc))
}

/// Homogeneous PID controller state.
#[derive(Debug, Clone, PartialEq)]
pub struct HpidState {
    gains: GainSet,
    mu: f64,
    norm: HomogeneousNorm,
    integral: f64,
    norm_floor: f64,
}

impl HpidState {
    pub fn new(gains: GainSet, mu: f64, norm: HomogeneousNorm) -> Result<Self> {
        Self::with_floor(gains, mu, norm, DEFAULT_NORM_FLOOR)
    }

    pub fn with_floor(gains: GainSet, mu: f64, norm: HomogeneousNorm, norm_floor: f64) -> Result<Self> {
        if !(mu > -0.5 && mu < 0.5) {
            return Err(Error::Argument(format!("mu must lie in (-0.5, 0.5), got {mu}")));
        }
        if !gains.is_finite() {
            return Err(Error::Argument(format!("gains must be finite: {gains:?}")));
        }
        if norm.dim() != 2 {
            return Err(Error::Argument(format!(
                "hPID norm must act on the 2-dimensional error pair, got dimension {}",
                norm.dim()
            )));
        }
        if !(norm_floor.is_finite() && norm_floor > 0.0) {
            return Err(Error::Argument(format!("norm_floor must be positive, got {norm_floor}")));
        }
        Ok(Self {
            gains,
            mu,
            norm,
            integral: 0.0,
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

    pub fn integral(&self) -> f64 {
        self.integral
    }

    pub fn with_integral(mut self, integral: f64) -> Self {
        self.integral = integral;
        self
    }

    /// `max(‖(ε, ε̇)‖_d, norm_floor)`.
    pub fn regularized_norm(&self, eps: f64, deps: f64) -> Result<f64> {
        Ok(self.norm.eval(&[eps, deps])?.max(self.norm_floor))
    }

    /// Gain modulation `(ν^{2μ}, ν^{μ}, ν^{3μ})`; exactly ones at `μ = 0`.
    pub fn modulation(&self, eps: f64, deps: f64) -> Result<(f64, f64, f64)> {
        if self.mu == 0.0 {
            return Ok((1.0, 1.0, 1.0));
        }
        let nu = self.regularized_norm(eps, deps)?;
        Ok((nu.powf(2.0 * self.mu), nu.powf(self.mu), nu.powf(3.0 * self.mu)))
    }

    /// Integrand of the integral channel, `ν^{3μ} ε`.
    pub fn integrand(&self, eps: f64, deps: f64) -> Result<f64> {
        Ok(self.modulation(eps, deps)?.2 * eps)
    }

    /// Control law evaluated with the current accumulator.
    pub fn output(&self, eps: f64, deps: f64) -> Result<f64> {
        let (m_p, m_d, _) = self.modulation(eps, deps)?;
        Ok(self.law(m_p, m_d, eps, deps, self.integral))
    }

    /// `(u, ν^{3μ}ε)` for an accumulator value held outside the state,
    /// e.g. by an ODE integrator.
    pub fn evaluate(&self, eps: f64, deps: f64, integral: f64) -> Result<(f64, f64)> {
        let (m_p, m_d, m_i) = self.modulation(eps, deps)?;
        Ok((self.law(m_p, m_d, eps, deps, integral), m_i * eps))
    }

    fn law(&self,m_p: f64, m_d: f64, eps: f64, deps: f64, integral: f64) -> f64 {
        let g = &self.gains;
        g.kp * m_p * eps + g.kd * m_d * deps + g.ki * integral
    }

    /// One hPID step (rectangle rule on the integral). Returns the control
    /// and the advanced state; `self` is left untouched.
    pub fn step(&self, eps: f64, deps: f64, dt: f64) -> Result<(f64, HpidState)> {
        check_step_inputs(eps, deps, dt)?;
        let (m_p, m_d, m_i) = self.modulation(eps, deps)?;
        let integral = self.integral + m_i * eps * dt;
        let u = self.law(m_p, m_d, eps, deps, integral);
        if !u.is_finite() {
            return Err(Error::Numerical(format!("hPID produced non-finite control at eps={eps}, eps_dot={deps}")));
        }
        let mut next = self.clone();
        next.integral = integral;
        Ok((u, next))
    }

    /// Clears the accumulator; every other field is kept.
    pub fn reset(&self) -> HpidState {
        let mut s = self.clone();
        s.integral = 0.0;
        s
    }
}

/// Free-function form of [`HpidState::step`].
pub fn hpid_step(state: &HpidState, eps: f64, deps: f64, dt: f64) -> Result<(f64, HpidState)> {
    state.step(eps, deps, dt)
}
