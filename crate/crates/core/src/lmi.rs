//! Data-based Lyapunov LMI for a fixed decay/growth factor λ.
//!
//! With `X` and `X₊` taken from a [`PsiMatrix`], the LMI reads
//!
//! ```text
//! F(P) = X₊ᵀ P X₊ − λ Xᵀ P X ≺ 0,   P = Pᵀ ≻ 0.
//! ```
//!
//! Because `X` is invertible for companion data, `F(P) ≺ 0` is a congruence
//! of `AᵀPA − λP ≺ 0` for the unknown generating matrix `A`. Feasibility is
//! decided by projected subgradient descent on `λ_max` of the LMI, and every
//! returned certificate is checked a posteriori.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{PsiMatrix, SubsystemId, Trace};
use crate::linalg::{cholesky, eigh_jacobi, lambda_max, DenseMatrix, LinalgError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LmiError {
    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(#[from] LinalgError),
    #[error("invalid feasibility options: {0}")]
    InvalidOptions(String),
    #[error("lambda must be positive, got {0}")]
    NonPositiveLambda(f64),
}

/// A quadratic Lyapunov-like function `V(ξ) = ξᵀPξ` with per-step factor λ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovCertificate {
    pub subsystem_id: SubsystemId,
    pub lambda: f64,
    /// Normalized to `λ_max(p) = 1`.
    pub p: DenseMatrix,
    /// `λ_min(p)`; at least `1/κ` for solver output.
    pub margin_pd: f64,
    /// `−λ_max(S F(p) S) / λ_min(p)` with `S = (XᵀX)^{-1/2}`; at least
    /// `eps_feas` for solver output.
    pub margin_decrease: f64,
}

impl LyapunovCertificate {
    /// `V(ξ) = ξᵀPξ`.
    pub fn value(&self, xi: &[f64]) -> f64 {
        self.p.quad_form(xi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StepRule {
    /// Polyak step toward the target `−depth · λ_min(P)` on the whitened LMI.
    Polyak { depth: f64 },
    /// Normalized step of length `initial / √(k+1)`.
    Diminishing { initial: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityOptions {
    pub eps_feas: f64,
    /// κ: iterates are kept in `I ⪯ P ⪯ κ·I`.
    pub cond_cap: f64,
    pub max_iters: usize,
    pub step_rule: StepRule,
    /// Start from the truncated Stein series instead of `I` when it is
    /// feasible and inside the box.
    #[serde(default = "enabled")]
    pub warm_start: bool,
}

fn enabled() -> bool {
    true
}

impl Default for FeasibilityOptions {
    fn default() -> Self {
        Self {
            eps_feas: 1e-6,
            cond_cap: 1e6,
            max_iters: 20_000,
            step_rule: StepRule::Polyak { depth: 0.1 },
            warm_start: true,
        }
    }
}

impl FeasibilityOptions {
    pub fn validate(&self) -> Result<(), LmiError> {
        let bad = |m: &str| Err(LmiError::InvalidOptions(m.to_string()));
        if !(self.eps_feas > 0.0) {
            return bad("eps_feas must be positive");
        }
        if !(self.cond_cap > 1.0) {
            return bad("cond_cap must exceed 1");
        }
        if self.max_iters == 0 {
            return bad("max_iters must be at least 1");
        }
        match self.step_rule {
            StepRule::Polyak { depth } if !(depth > 0.0) => bad("Polyak depth must be positive"),
            StepRule::Diminishing { initial } if !(initial > 0.0) => {
                bad("diminishing step must be positive")
            }
            _ => Ok(()),
        }
    }
}

/// `F = X₊ᵀ·p·X₊ − λ·Xᵀ·p·X`.
pub fn lmi_value(p: &DenseMatrix, lambda: f64, psi: &PsiMatrix) -> DenseMatrix {
    let next = psi.x_next.congruence(p);
    let now = psi.x_now.congruence(p);
    next.sub(&now.scale(lambda)).symmetrize()
}

#[derive(Debug, Clone, PartialEq)]
pub enum Feasibility {
    Feasible {
        certificate: LyapunovCertificate,
        iterations: usize,
    },
    /// Budget exhausted. This can be a false negative close to the boundary.
    Infeasible { iterations: usize, best_margin: f64 },
}

impl Feasibility {
    pub fn certificate(&self) -> Option<&LyapunovCertificate> {
        match self {
            Feasibility::Feasible { certificate, .. } => Some(certificate),
            Feasibility::Infeasible { .. } => None,
        }
    }

    pub fn into_certificate(self) -> Option<LyapunovCertificate> {
        match self {
            Feasibility::Feasible { certificate, .. } => Some(certificate),
            Feasibility::Infeasible { .. } => None,
        }
    }

    pub fn is_feasible(&self) -> bool {
        matches!(self, Feasibility::Feasible { .. })
    }
}

/// Data whitened by `S = (XᵀX)^{-1/2}`. `N = X·S` is orthogonal, so in the
/// coordinates `Q = NᵀPN` the whitened LMI reads `BᵀQB − λQ` with
/// `B = Nᵀ·X₊·S`. `λ_max` of it does not depend on how the data happen to
/// be scaled or conditioned, and its sign matches `λ_max(F(P))`.
struct Whitened {
    /// `N`, mapping `Q` back to `P = N·Q·Nᵀ`.
    basis: DenseMatrix,
    /// `B`.
    shift: DenseMatrix,
    whitener: DenseMatrix,
}

impl Whitened {
    fn new(psi: &PsiMatrix) -> Result<Self, LinalgError> {
        let gram = psi
            .x_now
            .congruence(&DenseMatrix::identity(psi.dimension()));
        let eig = eigh_jacobi(&gram)?;
        if !(eig.min() > 0.0) {
            return Err(LinalgError::NotPositiveDefinite {
                index: 0,
                pivot: eig.min(),
            });
        }
        let whitener = eig.reconstruct_with(|v| 1.0 / v.sqrt());
        let basis = psi.x_now.matmul(&whitener);
        let shift = basis.transpose().matmul(&psi.x_next.matmul(&whitener));
        Ok(Self {
            basis,
            shift,
            whitener,
        })
    }

    fn lmi(&self, q: &DenseMatrix, lambda: f64) -> DenseMatrix {
        self.shift.congruence(q).sub(&q.scale(lambda)).symmetrize()
    }

    fn to_original(&self, q: &DenseMatrix) -> DenseMatrix {
        self.basis.transpose().congruence(q).symmetrize()
    }

    /// Starting point `Q_K = Σ_{k≤K} λ^{-k}·(B^k)ᵀB^k` for the first
    /// `K = 2^j − 1` with `‖B^{K+1}‖² < λ^{K+1}` and `Q_K ⪯ κ·I`.
    /// Since `BᵀQ_K·B − λ·Q_K = λ·(λ^{-(K+1)}·(B^{K+1})ᵀB^{K+1} − I)`, any such
    /// `Q_K` is strictly feasible, and `Q_K ⪰ I` always holds.
    fn stein_start(&self, lambda: f64, cap: f64) -> Result<Option<DenseMatrix>, LinalgError> {
        let d = self.shift.rows();
        let mut q = DenseMatrix::identity(d);
        let mut power = self.shift.scale(1.0 / lambda.sqrt());
        for _ in 0..STEIN_DOUBLINGS {
            if power.as_slice().iter().any(|v| !v.is_finite()) {
                return Ok(None);
            }
            if lambda_max(&power.congruence(&DenseMatrix::identity(d)))? < 1.0 {
                return Ok(Some(q));
            }
            q = q.add(&power.congruence(&q)).symmetrize();
            if !(lambda_max(&q)? <= cap) {
                return Ok(None);
            }
            power = power.matmul(&power);
        }
        Ok(None)
    }
}

const STEIN_DOUBLINGS: usize = 30;

/// Clamps the spectrum of `p` into `[1, κ]`. Returns the projection and its
/// smallest and largest eigenvalues.
fn project_box(p: &DenseMatrix, cap: f64) -> Result<(DenseMatrix, f64, f64), LinalgError> {
    let eig = eigh_jacobi(&p.symmetrize())?;
    let lo = eig.min().clamp(1.0, cap);
    let hi = eig.max().clamp(1.0, cap);
    Ok((eig.reconstruct_with(|v| v.clamp(1.0, cap)), lo, hi))
}

/// Decides strict feasibility of `F(P) ≺ 0` for the given λ.
///
/// Minimizes `φ(P) = λ_max(S·F(P)·S)` over `I ⪯ P ⪯ κ·I` by projected
/// subgradient steps from [`Whitened::stein_start`] when it exists and `I`
/// otherwise, carried out on `Q = NᵀPN` where the subgradient is
/// `BvvᵀBᵀ − λ·vvᵀ` for the top eigenvector `v`. The box is invariant under
/// the orthogonal change of basis.
/// Stops once `φ(P) ≤ −eps_feas · λ_min(P)`.
pub fn solve_feasibility(
    psi: &PsiMatrix,
    lambda: f64,
    opts: &FeasibilityOptions,
) -> Result<Feasibility, LmiError> {
    opts.validate()?;
    if !(lambda > 0.0) {
        return Err(LmiError::NonPositiveLambda(lambda));
    }
    let d = psi.dimension();
    let data = Whitened::new(psi)?;
    let cap = opts.cond_cap;

    let start = if opts.warm_start {
        data.stein_start(lambda, cap)?
    } else {
        None
    };
    let (mut p, mut p_min) = match start {
        Some(q) => {
            let lo = eigh_jacobi(&q)?.min();
            (q, lo)
        }
        None => (DenseMatrix::identity(d), 1.0),
    };
    let mut best_margin = f64::NEG_INFINITY;

    for k in 0..opts.max_iters {
        let eig = eigh_jacobi(&data.lmi(&p, lambda))?;
        let phi = eig.max();
        let margin = -phi / p_min;
        best_margin = best_margin.max(margin);
        if margin >= opts.eps_feas {
            let certificate = certificate_from(psi, &data, lambda, &data.to_original(&p))?;
            if certificate.margin_decrease >= opts.eps_feas {
                return Ok(Feasibility::Feasible {
                    certificate,
                    iterations: k,
                });
            }
        }

        let v = eig.top_vector();
        let a = data.shift.mul_vec(&v);
        let b = v;
        let mut grad = DenseMatrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                grad[(i, j)] = a[i] * a[j] - lambda * b[i] * b[j];
            }
        }
        let gnorm2 = grad.as_slice().iter().map(|g| g * g).sum::<f64>();
        if gnorm2 == 0.0 {
            break;
        }
        let step = match opts.step_rule {
            StepRule::Polyak { depth } => (phi + depth * p_min) / gnorm2,
            StepRule::Diminishing { initial } => initial / ((k + 1) as f64).sqrt() / gnorm2.sqrt(),
        };
        let (projected, lo, _) = project_box(&p.sub(&grad.scale(step)), cap)?;
        p = projected;
        p_min = lo;
    }
    Ok(Feasibility::Infeasible {
        iterations: opts.max_iters,
        best_margin,
    })
}

fn certificate_from(
    psi: &PsiMatrix,
    data: &Whitened,
    lambda: f64,
    p: &DenseMatrix,
) -> Result<LyapunovCertificate, LinalgError> {
    let eig = eigh_jacobi(p)?;
    let p = p.scale(1.0 / eig.max()).symmetrize();
    let margin_pd = eig.min() / eig.max();
    let whitened = data.whitener.congruence(&lmi_value(&p, lambda, psi));
    let margin_decrease = -eigh_jacobi(&whitened.symmetrize())?.max() / margin_pd;
    Ok(LyapunovCertificate {
        subsystem_id: psi.subsystem_id,
        lambda,
        p,
        margin_pd,
        margin_decrease,
    })
}

/// Outcome of the three certificate checks.
#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    pub subsystem_matches: bool,
    /// (a) `P ≻ 0` via Cholesky.
    pub positive_definite: bool,
    /// (b) `λ_max(F(P)) < 0`.
    pub lmi_negative: bool,
    pub lmi_max_eigenvalue: f64,
    /// (c) `V(x(t+1)) ≤ λ·V(x(t))·(1 + 1e−9)` along the whole trace.
    pub pointwise_decrease: bool,
    /// Largest `V(x(t+1)) / V(x(t))` seen along the trace.
    pub worst_ratio: f64,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.subsystem_matches
            && self.positive_definite
            && self.lmi_negative
            && self.pointwise_decrease
    }
}

pub const POINTWISE_SLACK: f64 = 1e-9;

pub fn verify_certificate(
    cert: &LyapunovCertificate,
    psi: &PsiMatrix,
    trace: &Trace,
) -> VerificationReport {
    let subsystem_matches =
        cert.subsystem_id == psi.subsystem_id && psi.subsystem_id == trace.subsystem_id;
    let positive_definite = cholesky(&cert.p.symmetrize()).is_ok();
    let lmi_max_eigenvalue = eigh_jacobi(&lmi_value(&cert.p, cert.lambda, psi))
        .map(|e| e.max())
        .unwrap_or(f64::NAN);
    let lmi_negative = lmi_max_eigenvalue < 0.0;

    let mut pointwise_decrease = true;
    let mut worst_ratio = 0.0f64;
    for w in trace.samples.windows(2) {
        let now = cert.value(&w[0]);
        let next = cert.value(&w[1]);
        if next > cert.lambda * now * (1.0 + POINTWISE_SLACK) {
            pointwise_decrease = false;
        }
        if now > 0.0 {
            worst_ratio = worst_ratio.max(next / now);
        }
    }
    VerificationReport {
        subsystem_matches,
        positive_definite,
        lmi_negative,
        lmi_max_eigenvalue,
        pointwise_decrease,
        worst_ratio,
    }
}
