//! Weighted dilations, d-homogeneous norms and homogeneity checks for
//! vector fields.
//!
//! A weighted dilation acts as `d(s) = diag(e^{r_1 s}, …, e^{r_n s})` with
//! all weights `r_i > 0`. A d-homogeneous norm satisfies
//! `‖d(s)x‖_d = e^s ‖x‖_d`. Three such norms are provided:
//!
//! * [`WeightedSum`]: `Σ γ_i |x_i|^{1/r_i}`,
//! * [`Canonical`]: the unique `λ > 0` with `‖d(-ln λ)x‖_P = 1`,
//! * [`Experimental`]: `|ξ₁|^{1/(1-μ)} / ζ₁,max + γ|ξ₂|` on ℝ².

use crate::error::{ensure_dim, ensure_finite, Error, Result};
use crate::linalg::{euclidean_norm, Matrix, SymMatrix};

/// Default eigenvalue margin for positive definiteness checks.
pub const DEFAULT_MONOTONICITY_TOL: f64 = 1e-10;

/// Pass threshold of [`verify_field_homogeneity`].
pub const FIELD_HOMOGENEITY_TOL: f64 = 1e-9;

/// Below this `‖x‖_P` the canonical norm is reported as exactly zero.
const CANONICAL_ORIGIN_EPS: f64 = 1e-300;
/// Bisection width on `ln λ`, i.e. a relative tolerance on `λ`.
const CANONICAL_BISECTION_TOL: f64 = 1e-12;
const CANONICAL_MAX_EXPANSIONS: usize = 64;
const CANONICAL_NEWTON_STEPS: usize = 2;

/// Weighted dilation group with diagonal generator `diag(r_1..r_n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dilation {
    weights: Vec<f64>,
}

impl Dilation {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Argument("dilation needs at least one weight".into()));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::Argument(format!(
                "dilation weights must be finite and strictly positive, got {w}"
            )));
        }
        Ok(Self { weights })
    }

    /// `d(s) = e^s I_n`.
    pub fn standard(n: usize) -> Self {
        Self {
            weights: vec![1.0; n],
        }
    }

    /// `d(s) = diag(e^{(1-μ)s}, e^s)` on the error/derivative pair.
    pub fn hpid(mu: f64) -> Result<Self> {
        Self::new(vec![1.0 - mu, 1.0])
    }

    /// `d̃(s) = diag(e^{(1-μ)s}, e^s, e^{(1+μ)s})` on the extended closed-loop state.
    pub fn extended(mu: f64) -> Result<Self> {
        Self::new(vec![1.0 - mu, 1.0, 1.0 + mu])
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn generator(&self) -> Matrix {
        Matrix::diag(&self.weights)
    }

    pub fn matrix(&self, s: f64) -> Matrix {
        Matrix::diag(&self.factors(s))
    }

    /// Diagonal entries `e^{r_i s}` of `d(s)`.
    pub fn factors(&self, s: f64) -> Vec<f64> {
        self.weights.iter().map(|r| (r * s).exp()).collect()
    }

    /// `d(s) x`.
    pub fn apply(&self, s: f64, x: &[f64]) -> Result<Vec<f64>> {
        ensure_dim(self.dim(), x.len())?;
        Ok(self.apply_unchecked(s, x))
    }

    pub(crate) fn apply_unchecked(&self, s: f64, x: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(x)
            .map(|(r, xi)| (r * s).exp() * xi)
            .collect()
    }
}

/// `true` iff both `P` and `P G_d + G_dᵀ P` have smallest eigenvalue above
/// [`DEFAULT_MONOTONICITY_TOL`].
pub fn check_strict_monotonicity(dil: &Dilation, p: &SymMatrix) -> Result<bool> {
    check_strict_monotonicity_with_tol(dil, p, DEFAULT_MONOTONICITY_TOL)
}

pub fn check_strict_monotonicity_with_tol(dil: &Dilation, p: &SymMatrix, tol: f64) -> Result<bool> {
    ensure_dim(dil.dim(), p.dim())?;
    Ok(p.is_positive_definite(tol) && monotonicity_matrix(dil, p).is_positive_definite(tol))
}

/// `P G_d + G_dᵀ P`.
pub fn monotonicity_matrix(dil: &Dilation, p: &SymMatrix) -> SymMatrix {
    p.matrix().matmul(&dil.generator()).symmetric_part_x2()
}

/// `Σ γ_i |x_i|^{1/r_i}`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSum {
    coefficients: Vec<f64>,
}

impl WeightedSum {
    pub fn new(coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.is_empty() || coefficients.iter().any(|g| !(g.is_finite() && *g > 0.0)) {
            return Err(Error::Argument(format!(
                "weighted-sum coefficients must be finite and positive: {coefficients:?}"
            )));
        }
        Ok(Self { coefficients })
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn norm(&self, dil: &Dilation, x: &[f64]) -> Result<f64> {
        ensure_dim(self.coefficients.len(), dil.dim())?;
        ensure_dim(dil.dim(), x.len())?;
        Ok(self
            .coefficients
            .iter()
            .zip(dil.weights())
            .zip(x)
            .map(|((g, r), xi)| g * xi.abs().powf(1.0 / r))
            .sum())
    }
}

/// Canonical homogeneous norm induced by `‖z‖_P = √(zᵀPz)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Canonical {
    p: SymMatrix,
    tolerance: f64,
}

impl Canonical {
    /// `P` must be positive definite; monotonicity against a particular
    /// dilation is checked by [`HomogeneousNorm::new`].
    pub fn new(p: SymMatrix, tolerance: f64) -> Result<Self> {
        if !(tolerance.is_finite() && tolerance > 0.0) {
            return Err(Error::Argument(format!(
                "canonical norm tolerance must be positive, got {tolerance}"
            )));
        }
        if !p.is_positive_definite(DEFAULT_MONOTONICITY_TOL) {
            return Err(Error::Argument("canonical norm needs P positive definite".into()));
        }
        Ok(Self { p, tolerance })
    }

    pub fn p(&self) -> &SymMatrix {
        &self.p
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    /// Solves `‖d(-ln λ)x‖_P = 1` for `λ`: bracket expansion in `ln λ`
    /// starting from `λ₀ = ‖x‖_P`, bisection, then safeguarded Newton.
    pub fn norm(&self, dil: &Dilation, x: &[f64]) -> Result<f64> {
        ensure_dim(self.p.dim(), dil.dim())?;
        ensure_dim(dil.dim(), x.len())?;
        let n0 = self.p.quad_form(x).max(0.0).sqrt();
        if !n0.is_finite() {
            return Err(Error::Numerical(format!("‖x‖_P is not finite for x = {x:?}")));
        }
        if n0 < CANONICAL_ORIGIN_EPS {
            return Ok(0.0);
        }
        // phi(s) = ‖d(-s)x‖_P², strictly decreasing in s
        let phi = |s: f64| self.p.quad_form(&dil.apply_unchecked(-s, x));

        let s0 = n0.ln();
        let (mut lo, mut hi);
        let f0 = phi(s0);
        if f0 == 1.0 {
            return Ok(n0);
        }
        let mut step = std::f64::consts::LN_2;
        let mut found = false;
        if f0 > 1.0 {
            lo = s0;
            hi = s0 + step;
            for _ in 0..CANONICAL_MAX_EXPANSIONS {
                let f = phi(hi);
                if !f.is_finite() {
                    break;
                }
                if f <= 1.0 {
                    found = true;
                    break;
                }
                lo = hi;
                step *= 2.0;
                hi += step;
            }
        } else {
            hi = s0;
            lo = s0 - step;
            for _ in 0..CANONICAL_MAX_EXPANSIONS {
                let f = phi(lo);
                if !f.is_finite() {
                    break;
                }
                if f >= 1.0 {
                    found = true;
                    break;
                }
                hi = lo;
                step *= 2.0;
                lo -= step;
            }
        }
        if !found {
            return Err(Error::Numerical(format!(
                "canonical norm: no root bracket for x = {x:?}"
            )));
        }

        while hi - lo > CANONICAL_BISECTION_TOL {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if phi(mid) > 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }

        // Newton on F(s) = ½ ln phi(s), F'(s) = -zᵀPGz / zᵀPz, z = d(-s)x.
        let mut s = 0.5 * (lo + hi);
        for _ in 0..CANONICAL_NEWTON_STEPS {
            let z = dil.apply_unchecked(-s, x);
            let pz = self.p.quad_form(&z);
            let gz: Vec<f64> = z.iter().zip(dil.weights()).map(|(zi, r)| zi * r).collect();
            let pgz = self.p.bilinear(&z, &gz);
            if !(pz > 0.0 && pgz > 0.0) {
                break;
            }
            let f = 0.5 * pz.ln();
            let candidate = s + f * pz / pgz;
            if candidate.is_finite() && candidate >= lo && candidate <= hi {
                s = candidate;
            } else {
                break;
            }
        }

        let lambda = s.exp();
        let residual = (phi(s).sqrt() - 1.0).abs();
        if !lambda.is_finite() || residual > self.tolerance {
            return Err(Error::Numerical(format!(
                "canonical norm residual {residual:e} exceeds tolerance {:e}",
                self.tolerance
            )));
        }
        Ok(lambda)
    }

    /// `∂‖x‖_d/∂x = λ · zᵀ P d(-ln λ) / (zᵀ P G_d z)` with `z = d(-ln λ)x`.
    pub fn gradient(&self, dil: &Dilation, x: &[f64]) -> Result<Vec<f64>> {
        let lambda = self.norm(dil, x)?;
        if lambda == 0.0 {
            return Err(Error::Domain(
                "canonical norm gradient is undefined at the origin".into(),
            ));
        }
        let s = -lambda.ln();
        let factors = dil.factors(s);
        let z: Vec<f64> = factors.iter().zip(x).map(|(f, xi)| f * xi).collect();
        let pz = self.p.matrix().mul_vec(&z);
        let gz: Vec<f64> = z.iter().zip(dil.weights()).map(|(zi, r)| zi * r).collect();
        let denom = self.p.bilinear(&z, &gz);
        if !(denom > 0.0) {
            return Err(Error::Numerical(format!(
                "canonical norm gradient: non-positive denominator {denom}"
            )));
        }
        Ok(pz
            .iter()
            .zip(&factors)
            .map(|(pzi, f)| lambda * pzi * f / denom)
            .collect())
    }
}

/// `‖ξ‖_d = ζ₁,max⁻¹ |ξ₁|^{1/(1-μ)} + γ|ξ₂|`, homogeneous for
/// `d(s) = diag(e^{(1-μ)s}, e^s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Experimental {
    zeta1_max: f64,
    gamma: f64,
    mu: f64,
}

impl Experimental {
    pub fn new(zeta1_max: f64, gamma: f64, mu: f64) -> Result<Self> {
        if !(zeta1_max.is_finite() && zeta1_max > 0.0) {
            return Err(Error::Argument(format!("zeta1_max must be positive, got {zeta1_max}")));
        }
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::Argument(format!("gamma must be positive, got {gamma}")));
        }
        if !(mu > -0.5 && mu < 0.5) {
            return Err(Error::Argument(format!("mu must lie in (-0.5, 0.5), got {mu}")));
        }
        Ok(Self {
            zeta1_max,
            gamma,
            mu,
        })
    }

    pub fn zeta1_max(&self) -> f64 {
        self.zeta1_max
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn norm(&self, xi: &[f64]) -> Result<f64> {
        ensure_dim(2, xi.len())?;
        Ok(xi[0].abs().powf(1.0 / (1.0 - self.mu)) / self.zeta1_max + self.gamma * xi[1].abs())
    }

    /// The dilation this norm is homogeneous with respect to.
    pub fn dilation(&self) -> Dilation {
        Dilation::hpid(self.mu).expect("mu validated at construction")
    }
}

/// Tagged choice of homogeneous norm.
#[derive(Debug, Clone, PartialEq)]
pub enum HomNormSpec {
    WeightedSum(WeightedSum),
    Canonical(Canonical),
    Experimental(Experimental),
}

/// A norm specification paired with the dilation it is homogeneous for.
#[derive(Debug, Clone, PartialEq)]
pub struct HomogeneousNorm {
    spec: HomNormSpec,
    dilation: Dilation,
}

impl HomogeneousNorm {
    /// Validates the pairing: dimensions, monotonicity of `d` w.r.t. `P`
    /// for the canonical norm, and `d = diag(e^{(1-μ)s}, e^s)` for the
    /// experimental norm.
    pub fn new(spec: HomNormSpec, dilation: Dilation) -> Result<Self> {
        match &spec {
            HomNormSpec::WeightedSum(w) => ensure_dim(w.coefficients.len(), dilation.dim())?,
            HomNormSpec::Canonical(c) => {
                if !check_strict_monotonicity(&dilation, &c.p)? {
                    return Err(Error::Argument(
                        "dilation is not strictly monotone with respect to ‖·‖_P \
                         (P G_d + G_dᵀ P must be positive definite)"
                            .into(),
                    ));
                }
            }
            HomNormSpec::Experimental(e) => {
                let expected = e.dilation();
                let matches = dilation.dim() == 2
                    && dilation
                        .weights()
                        .iter()
                        .zip(expected.weights())
                        .all(|(a, b)| (a - b).abs() <= 1e-12);
                if !matches {
                    return Err(Error::Argument(format!(
                        "experimental norm needs weights {:?}, got {:?}",
                        expected.weights(),
                        dilation.weights()
                    )));
                }
            }
        }
        Ok(Self { spec, dilation })
    }

    pub fn spec(&self) -> &HomNormSpec {
        &self.spec
    }

    pub fn dilation(&self) -> &Dilation {
        &self.dilation
    }

    pub fn dim(&self) -> usize {
        self.dilation.dim()
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        match &self.spec {
            HomNormSpec::WeightedSum(w) => w.norm(&self.dilation, x),
            HomNormSpec::Canonical(c) => c.norm(&self.dilation, x),
            HomNormSpec::Experimental(e) => e.norm(x),
        }
    }
}

/// Outcome of a field-homogeneity check.
#[derive(Debug, Clone, PartialEq)]
pub struct HomogeneityReport {
    pub max_residual: f64,
    /// Index of the sample with the largest residual.
    pub worst_sample: Option<usize>,
    pub samples: usize,
    pub tolerance: f64,
    pub passed: bool,
}

/// Checks `g(d(s)x) = e^{μs} d(s) g(x)` on the given `(s, x)` samples.
///
/// The residual of a sample is
/// `‖g(d(s)x) - e^{μs}d(s)g(x)‖ / max(1, e^{μs}‖d(s)g(x)‖)`.
pub fn verify_field_homogeneity<F>(
    field: F,
    dil: &Dilation,
    mu: f64,
    samples: &[(f64, Vec<f64>)],
) -> Result<HomogeneityReport>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    ensure_finite("mu", mu)?;
    let mut max_residual = 0.0_f64;
    let mut worst_sample = None;
    for (idx, (s, x)) in samples.iter().enumerate() {
        ensure_finite("s", *s)?;
        ensure_dim(dil.dim(), x.len())?;
        let gx = field(x)?;
        let lhs = field(&dil.apply_unchecked(*s, x))?;
        ensure_dim(dil.dim(), gx.len())?;
        ensure_dim(dil.dim(), lhs.len())?;
        let scale = (mu * s).exp();
        let rhs: Vec<f64> = dil
            .apply_unchecked(*s, &gx)
            .into_iter()
            .map(|v| v * scale)
            .collect();
        let diff: Vec<f64> = lhs.iter().zip(&rhs).map(|(a, b)| a - b).collect();
        let residual = euclidean_norm(&diff) / euclidean_norm(&rhs).max(1.0);
        if !residual.is_finite() {
            return Err(Error::Numerical(format!(
                "non-finite homogeneity residual at sample {idx}"
            )));
        }
        if worst_sample.is_none() || residual > max_residual {
            max_residual = residual;
            worst_sample = Some(idx);
        }
    }
    Ok(HomogeneityReport {
        max_residual,
        worst_sample,
        samples: samples.len(),
        tolerance: FIELD_HOMOGENEITY_TOL,
        passed: max_residual <= FIELD_HOMOGENEITY_TOL,
    })
}
