//! Lyapunov certificates for the hPID closed loop.
//!
//! Given gains that make the linear closed-loop matrix `A` Hurwitz, solve
//! `P A + Aᵀ P = -Q`, then find the interval of `μ` around zero on which
//! `P G_d̃ + G_d̃ᵀ P ≻ 0` with `G_d̃ = I₃ + μ diag(-1, 0, 1)`. The canonical
//! `d̃`-homogeneous norm induced by `P` is then the candidate Lyapunov
//! function, whose decrease is checked along simulated trajectories.

use crate::control::GainSet;
use crate::error::{Error, Result};
use crate::homogeneity::{Canonical, Dilation};
use crate::linalg::{euclidean_norm, solve_dense, Matrix, SymMatrix};
use crate::sim::{PlantConfig, Trajectory};

/// Required eigenvalue margin of `P G + Gᵀ P` inside the certified interval.
pub const MU_MARGIN: f64 = 1e-8;
/// The hPID law is defined for `|μ| < 0.5`; the search never leaves that range.
pub const MU_SEARCH_CAP: f64 = 0.5;
const MU_BISECTION_STEPS: usize = 60;
/// `‖P A + Aᵀ P + Q‖` accepted from the direct solve.
pub const LYAPUNOV_RESIDUAL_TOL: f64 = 1e-9;

pub const DECREASE_PASS_FRACTION: f64 = 0.99;
pub const DECREASE_RELATIVE_SLACK: f64 = 0.05;
pub const DECREASE_ABSOLUTE_SLACK: f64 = 1e-6;

/// Solves `P A + Aᵀ P = -Q` for symmetric `P` directly on the
/// `n(n+1)/2` independent entries.
pub fn solve_lyapunov_matrix(a: &Matrix, q: &SymMatrix) -> Result<SymMatrix> {
    let n = a.dim();
    if q.dim() != n {
        return Err(Error::Argument(format!("Q is {}x{}, A is {n}x{n}", q.dim(), q.dim())));
    }
    let mut index = vec![vec![0usize; n]; n];
    let mut count = 0;
    for i in 0..n {
        for j in i..n {
            index[i][j] = count;
            index[j][i] = count;
            count += 1;
        }
    }
    let mut lhs = vec![vec![0.0; count]; count];
    let mut rhs = vec![0.0; count];
    for k in 0..n {
        for l in k..n {
            let row = index[k][l];
            // (PA)_{kl} = Σ_m P_km A_ml, (AᵀP)_{kl} = Σ_m A_mk P_ml
            for m in 0..n {
                lhs[row][index[k][m]] += a[(m, l)];
                lhs[row][index[m][l]] += a[(m, k)];
            }
            rhs[row] = -q.get(k, l);
        }
    }
    let sol = solve_dense(&lhs, &rhs)
        .ok_or_else(|| Error::Infeasible("Lyapunov equation is singular (A has eigenvalues summing to zero)".into()))?;
    let mut p = Matrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            p[(i, j)] = sol[index[i][j]];
        }
    }
    let p = SymMatrix::new(p)?;
    let residual = lyapunov_residual(a, &p, q);
    if residual > LYAPUNOV_RESIDUAL_TOL * (1.0 + q.matrix().max_abs()) {
        return Err(Error::Numerical(format!("Lyapunov residual {residual:e} too large")));
    }
    Ok(p)
}

/// Max-abs entry of `P A + Aᵀ P + Q`.
pub fn lyapunov_residual(a: &Matrix, p: &SymMatrix, q: &SymMatrix) -> f64 {
    p.matrix()
        .matmul(a)
        .symmetric_part_x2()
        .matrix()
        .add(q.matrix())
        .max_abs()
}

pub fn closed_loop_matrix(gains: &GainSet) -> Matrix {
    let rows: Vec<Vec<f64>> = gains.closed_loop_matrix().iter().map(|r| r.to_vec()).collect();
    Matrix::from_rows(&rows).expect("3x3")
}

/// `P` for the gains' closed-loop matrix. Fails with the offending
/// Routh–Hurwitz condition when the linear loop is not Hurwitz.
pub fn solve_lyapunov(gains: &GainSet, q: &SymMatrix) -> Result<SymMatrix> {
    if !gains.is_finite() {
        return Err(Error::Argument(format!("gains must be finite: {gains:?}")));
    }
    if let Some(v) = gains.hurwitz_violation() {
        return Err(Error::Infeasible(format!(
            "closed-loop matrix is not Hurwitz for {gains:?}: Routh-Hurwitz condition {v} violated"
        )));
    }
    if !q.is_positive_definite(0.0) {
        return Err(Error::Argument("Q must be positive definite".into()));
    }
    let p = solve_lyapunov_matrix(&closed_loop_matrix(gains), q)?;
    if !p.is_positive_definite(0.0) {
        return Err(Error::Numerical("Lyapunov solution is not positive definite".into()));
    }
    Ok(p)
}

/// `G_d̃ = I₃ + μ diag(-1, 0, 1)`.
pub fn extended_generator(mu: f64) -> Matrix {
    Matrix::diag(&[1.0 - mu, 1.0, 1.0 + mu])
}

/// `λ_min(P G_d̃ + G_d̃ᵀ P)`.
pub fn monotonicity_margin(p: &SymMatrix, mu: f64) -> f64 {
    p.matrix().matmul(&extended_generator(mu)).symmetric_part_x2().min_eigenvalue()
}

/// `λ_min(P^{1/2} G P^{-1/2} + P^{-1/2} Gᵀ P^{1/2})` for `G = G_d̃(μ)`.
pub fn beta(p: &SymMatrix, mu: f64) -> Result<f64> {
    Ok(similarity_sym(p, &extended_generator(mu))?.min_eigenvalue())
}

/// `-λ_max(P^{1/2} A P^{-1/2} + P^{-1/2} Aᵀ P^{1/2})`.
pub fn gamma(p: &SymMatrix, a: &Matrix) -> Result<f64> {
    Ok(-similarity_sym(p, a)?.max_eigenvalue())
}

/// `P^{1/2} M P^{-1/2} + (P^{1/2} M P^{-1/2})ᵀ`.
fn similarity_sym(p: &SymMatrix, m: &Matrix) -> Result<SymMatrix> {
    let half = p.power(0.5)?;
    let inv_half = p.power(-0.5)?;
    Ok(half.matrix().matmul(m).matmul(inv_half.matrix()).symmetric_part_x2())
}

/// One feasibility probe of the μ search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MuProbe {
    pub mu: f64,
    pub margin: f64,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityCertificate {
    pub p: SymMatrix,
    /// `β` at the worse of the two interval endpoints.
    pub beta: f64,
    pub gamma: f64,
    pub mu_lo: f64,
    pub mu_hi: f64,
    pub gains: GainSet,
    /// Every probe evaluated by the bisection search, in order.
    pub trace: Vec<MuProbe>,
}

impl StabilityCertificate {
    pub fn contains(&self, mu: f64) -> bool {
        mu >= self.mu_lo && mu <= self.mu_hi
    }

    /// `β` for a specific `μ`, recomputed from `P`.
    pub fn beta_at(&self, mu: f64) -> Result<f64> {
        beta(&self.p, mu)
    }

    /// Decay rate `γ / (2β(μ))` of the decrease inequality.
    pub fn decay_rate(&self, mu: f64) -> Result<f64> {
        Ok(self.gamma / (2.0 * self.beta_at(mu)?))
    }
}

/// Independent re-check of a certificate's invariants.
#[derive(Debug, Clone, PartialEq)]
pub struct CertificateAudit {
    pub p_min_eigenvalue: f64,
    pub lyapunov_max_eigenvalue: f64,
    pub endpoint_margins: (f64, f64),
    pub beta_endpoints: (f64, f64),
    pub gamma: f64,
    pub interval_ok: bool,
}

impl CertificateAudit {
    pub fn passed(&self) -> bool {
        self.p_min_eigenvalue > 0.0
            && self.lyapunov_max_eigenvalue < 0.0
            && self.endpoint_margins.0 > 0.0
            && self.endpoint_margins.1 > 0.0
            && self.beta_endpoints.0 > 0.0
            && self.beta_endpoints.1 > 0.0
            && self.gamma > 0.0
            && self.interval_ok
    }
}

/// Recomputes every certificate invariant from `P` and the gains.
pub fn audit(cert: &StabilityCertificate) -> Result<CertificateAudit> {
    let a = closed_loop_matrix(&cert.gains);
    let lyap = cert.p.matrix().matmul(&a).symmetric_part_x2();
    Ok(CertificateAudit {
        p_min_eigenvalue: cert.p.min_eigenvalue(),
        lyapunov_max_eigenvalue: lyap.max_eigenvalue(),
        endpoint_margins: (monotonicity_margin(&cert.p, cert.mu_lo), monotonicity_margin(&cert.p, cert.mu_hi)),
        beta_endpoints: (beta(&cert.p, cert.mu_lo)?, beta(&cert.p, cert.mu_hi)?),
        gamma: gamma(&cert.p, &a)?,
        interval_ok: cert.mu_lo < 0.0 && 0.0 < cert.mu_hi,
    })
}

/// Certifies gains with `Q = I₃`.
pub fn certify(gains: &GainSet) -> Result<StabilityCertificate> {
    certify_with_q(gains, &SymMatrix::identity(3))
}

pub fn certify_with_q(gains: &GainSet, q: &SymMatrix) -> Result<StabilityCertificate> {
    let p = solve_lyapunov(gains, q)?;
    let a = closed_loop_matrix(gains);
    let mut trace = Vec::new();
    let mut probe = |mu: f64| {
        let margin = monotonicity_margin(&p, mu);
        let feasible = margin >= MU_MARGIN;
        trace.push(MuProbe { mu, margin, feasible });
        feasible
    };
    if !probe(0.0) {
        return Err(Error::Numerical("P G + Gᵀ P is not positive definite at mu = 0".into()));
    }
    let mut endpoint = |direction: f64| {
        let cap = direction * MU_SEARCH_CAP;
        if probe(cap) {
            return cap;
        }
        let (mut good, mut bad) = (0.0, cap);
        for _ in 0..MU_BISECTION_STEPS {
            let mid = 0.5 * (good + bad);
            if probe(mid) {
                good = mid;
            } else {
                bad = mid;
            }
        }
        good
    };
    let mu_hi = endpoint(1.0);
    let mu_lo = endpoint(-1.0);
    if !(mu_lo < 0.0 && mu_hi > 0.0) {
        return Err(Error::Numerical(format!("degenerate certified interval ({mu_lo}, {mu_hi})")));
    }
    let beta_worse = beta(&p, mu_lo)?.min(beta(&p, mu_hi)?);
    let gamma = gamma(&p, &a)?;
    if !(beta_worse > 0.0 && gamma > 0.0) {
        return Err(Error::Numerical(format!("certificate constants not positive: beta {beta_worse}, gamma {gamma}")));
    }
    Ok(StabilityCertificate {
        p,
        beta: beta_worse,
        gamma,
        mu_lo,
        mu_hi,
        gains: *gains,
        trace,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecreaseReport {
    pub mu: f64,
    /// `γ / (2β(μ))`.
    pub rate: f64,
    pub intervals_checked: usize,
    pub intervals_satisfied: usize,
    pub fraction: f64,
    /// Largest `ΔV/Δt + rate·V^{1+μ}` seen, before slack.
    pub worst_excess: f64,
    pub passed: bool,
}

/// Checks `ΔV/Δt ≤ -(γ/2β) V_{k+1}^{1+μ} + slack` on every sample interval,
/// where `V` is the canonical `d̃`-homogeneous norm induced by `cert.p`.
/// Intervals ending inside the terminal ball `V < 100·norm_floor` are skipped.
pub fn lyapunov_decrease_check(
    traj: &Trajectory,
    cert: &StabilityCertificate,
    mu: f64,
    norm_tolerance: f64,
) -> Result<DecreaseReport> {
    let scn = &traj.scenario;
    let PlantConfig::Extended(plant) = &scn.plant else {
        return Err(Error::Argument("decrease check needs an extended-plant trajectory".into()));
    };
    let traj_mu = scn.effective_mu(plant.mu);
    if traj_mu != mu {
        return Err(Error::Argument(format!("trajectory was generated with mu = {traj_mu}, check asked for {mu}")));
    }
    if plant.gains != cert.gains {
        return Err(Error::Argument(format!(
            "trajectory gains {:?} differ from certificate gains {:?}",
            plant.gains, cert.gains
        )));
    }
    if !cert.contains(mu) {
        return Err(Error::Argument(format!(
            "mu = {mu} outside certified interval ({}, {})",
            cert.mu_lo, cert.mu_hi
        )));
    }
    let dil = Dilation::extended(mu)?;
    let norm = Canonical::new(cert.p.clone(), norm_tolerance)?;
    let values = traj
        .states
        .iter()
        .map(|x| norm.norm(&dil, x))
        .collect::<Result<Vec<f64>>>()?;
    let rate = cert.decay_rate(mu)?;
    let terminal = 100.0 * scn.norm_floor;

    let mut checked = 0;
    let mut satisfied = 0;
    let mut worst_excess = f64::NEG_INFINITY;
    for k in 0..values.len().saturating_sub(1) {
        let (v0, v1) = (values[k], values[k + 1]);
        if v1 < terminal {
            continue;
        }
        let dt = traj.times[k + 1] - traj.times[k];
        let slope = (v1 - v0) / dt;
        let rhs = -rate * v1.powf(1.0 + mu);
        worst_excess = worst_excess.max(slope - rhs);
        checked += 1;
        if slope <= rhs + DECREASE_ABSOLUTE_SLACK + DECREASE_RELATIVE_SLACK * rhs.abs() {
            satisfied += 1;
        }
    }
    let fraction = if checked == 0 { 1.0 } else { satisfied as f64 / checked as f64 };
    Ok(DecreaseReport {
        mu,
        rate,
        intervals_checked: checked,
        intervals_satisfied: satisfied,
        fraction,
        worst_excess: if checked == 0 { 0.0 } else { worst_excess },
        passed: fraction >= DECREASE_PASS_FRACTION,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Convergence {
    pub finite_time: bool,
    pub settle_time: Option<f64>,
}

/// Fraction of the horizon that must remain after settling for a run to
/// count as settled in finite time.
pub const SETTLE_MARGIN: f64 = 0.05;

/// First sample time after which `‖x‖ ≤ settle_tol` for the rest of the run.
pub fn convergence_classifier(traj: &Trajectory, settle_tol: f64) -> Result<Convergence> {
    if !(settle_tol > 0.0) {
        return Err(Error::Argument(format!("settle_tol must be positive, got {settle_tol}")));
    }
    let Some(&horizon) = traj.times.last() else {
        return Ok(Convergence {
            finite_time: false,
            settle_time: None,
        });
    };
    let mut settle_index = None;
    for (k, x) in traj.states.iter().enumerate().rev() {
        if euclidean_norm(x) <= settle_tol {
            settle_index = Some(k);
        } else {
            break;
        }
    }
    let settle_time = settle_index.map(|k| traj.times[k]);
    Ok(Convergence {
        finite_time: settle_time.is_some_and(|t| t < horizon * (1.0 - SETTLE_MARGIN)),
        settle_time,
    })
}
