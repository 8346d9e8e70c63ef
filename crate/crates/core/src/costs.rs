//! Local objectives `f_i`: strictly convex, smooth scalar costs with analytic
//! gradients and curvature bounds, plus optional box-constraint penalties.
//!
//! The global problem is
//!
//! ```text
//! minimise  F(x) = Σ f_i(x_i)   subject to   Σ (x_i − b_i) = 0
//! ```
//!
//! A weighted constraint `aᵀz = b` is reduced to this form with
//! [`normalize_problem`] (`x_i = a_i z_i`).

use alloc::vec::Vec;
use core::fmt;

use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub enum CostError {
    /// The second derivative is unbounded on ℝ (hard penalty with `c ≥ 3`).
    UnboundedCurvature,
    InvalidParameter(&'static str),
    NonpositiveWeight(usize),
    LengthMismatch { costs: usize, other: usize },
    EmptyProblem,
}

impl fmt::Display for CostError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::UnboundedCurvature => write!(
                f,
                "curvature is unbounded on the real line; supply a domain-restricted bound"
            ),
            Self::InvalidParameter(what) => write!(f, "invalid cost parameter: {what}"),
            Self::NonpositiveWeight(i) => write!(f, "weight a_{i} must be positive"),
            Self::LengthMismatch { costs, other } => {
                write!(f, "{costs} costs but {other} per-agent values")
            }
            Self::EmptyProblem => write!(f, "problem has no agents"),
        }
    }
}

impl core::error::Error for CostError {}

/// A scalar cost with analytic derivatives.
pub trait LocalCost {
    fn value(&self, x: f64) -> f64;

    fn gradient(&self, x: f64) -> f64;

    /// `u = sup f″ / 2`.
    fn curvature_bound(&self) -> Result<f64, CostError>;

    /// `f(x + δ) − f(x)` for an exactly known step `δ`, evaluated without
    /// cancellation when `δ` is small next to `x`.
    fn value_step(&self, x: f64, delta: f64) -> f64 {
        self.value(x + delta) - self.value(x)
    }
}

/// `g x² + d x + a`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct QuadraticCost {
    pub g: f64,
    pub d: f64,
    pub a: f64,
}

impl QuadraticCost {
    pub fn new(g: f64, d: f64, a: f64) -> Result<Self, CostError> {
        if !(g.is_finite() && g > 0.0) {
            return Err(CostError::InvalidParameter("quadratic coefficient g must be positive"));
        }
        if !(d.is_finite() && a.is_finite()) {
            return Err(CostError::InvalidParameter("quadratic coefficients must be finite"));
        }
        Ok(Self { g, d, a })
    }
}

impl LocalCost for QuadraticCost {
    fn value(&self, x: f64) -> f64 {
        self.g * x * x + self.d * x + self.a
    }

    fn gradient(&self, x: f64) -> f64 {
        2.0 * self.g * x + self.d
    }

    fn curvature_bound(&self) -> Result<f64, CostError> {
        Ok(self.g)
    }

    fn value_step(&self, x: f64, delta: f64) -> f64 {
        delta * (self.g * (2.0 * x + delta) + self.d)
    }
}

/// CPU scheduling cost `(x − ρ)² / (2 π_max)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CpuCost {
    pub pi_max: f64,
    pub rho: f64,
}

impl CpuCost {
    pub fn new(pi_max: f64, rho: f64) -> Result<Self, CostError> {
        if !(pi_max.is_finite() && pi_max > 0.0) {
            return Err(CostError::InvalidParameter("pi_max must be positive"));
        }
        if !(rho.is_finite() && rho > 0.0) {
            return Err(CostError::InvalidParameter("demand rho must be positive"));
        }
        Ok(Self { pi_max, rho })
    }
}

impl LocalCost for CpuCost {
    fn value(&self, x: f64) -> f64 {
        let e = x - self.rho;
        e * e / (2.0 * self.pi_max)
    }

    fn gradient(&self, x: f64) -> f64 {
        (x - self.rho) / self.pi_max
    }

    fn curvature_bound(&self) -> Result<f64, CostError> {
        Ok(1.0 / (2.0 * self.pi_max))
    }

    fn value_step(&self, x: f64, delta: f64) -> f64 {
        delta * (2.0 * (x - self.rho) + delta) / (2.0 * self.pi_max)
    }
}

/// `σ·max(x − M, 0)^c + σ·max(m − x, 0)^c`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HardBoxPenalty {
    pub lower: f64,
    pub upper: f64,
    pub sigma: f64,
    pub exponent: u32,
}

impl HardBoxPenalty {
    pub fn new(lower: f64, upper: f64, sigma: f64, exponent: u32) -> Result<Self, CostError> {
        check_box(lower, upper, sigma)?;
        if exponent < 2 {
            return Err(CostError::InvalidParameter("penalty exponent must be at least 2"));
        }
        Ok(Self {
            lower,
            upper,
            sigma,
            exponent,
        })
    }
}

fn check_box(lower: f64, upper: f64, sigma: f64) -> Result<(), CostError> {
    if !(lower.is_finite() && upper.is_finite() && lower <= upper) {
        return Err(CostError::InvalidParameter("box bounds must satisfy m <= M"));
    }
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(CostError::InvalidParameter("penalty weight sigma must be positive"));
    }
    Ok(())
}

fn powi(x: f64, c: u32) -> f64 {
    (0..c).fold(1.0, |acc, _| acc * x)
}

/// `a^c − b^c` for `a, b ≥ 0`, with `a − b` supplied separately so it can be
/// computed from the original coordinates.
fn power_difference(a: f64, b: f64, a_minus_b: f64, c: u32) -> f64 {
    if a == 0.0 || b == 0.0 {
        return powi(a, c) - powi(b, c);
    }
    let sum: f64 = (0..c).map(|k| powi(a, c - 1 - k) * powi(b, k)).sum();
    a_minus_b * sum
}

impl LocalCost for HardBoxPenalty {
    fn value(&self, x: f64) -> f64 {
        let over = (x - self.upper).max(0.0);
        let under = (self.lower - x).max(0.0);
        self.sigma * powi(over, self.exponent) + self.sigma * powi(under, self.exponent)
    }

    fn gradient(&self, x: f64) -> f64 {
        let c = self.exponent;
        let over = (x - self.upper).max(0.0);
        let under = (self.lower - x).max(0.0);
        c as f64 * self.sigma * (powi(over, c - 1) - powi(under, c - 1))
    }

    fn curvature_bound(&self) -> Result<f64, CostError> {
        match self.exponent {
            // sup f″ = 2σ, halved
            2 => Ok(self.sigma),
            _ => Err(CostError::UnboundedCurvature),
        }
    }

    fn value_step(&self, x: f64, delta: f64) -> f64 {
        let c = self.exponent;
        let to = x + delta;
        let over = power_difference(
            (to - self.upper).max(0.0),
            (x - self.upper).max(0.0),
            delta,
            c,
        );
        let under = power_difference(
            (self.lower - to).max(0.0),
            (self.lower - x).max(0.0),
            -delta,
            c,
        );
        self.sigma * over + self.sigma * under
    }
}

/// `(σ/α)·log(1 + e^{α(x − M)}) + (σ/α)·log(1 + e^{α(m − x)})`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SmoothLogPenalty {
    pub lower: f64,
    pub upper: f64,
    pub sigma: f64,
    pub alpha: f64,
}

impl SmoothLogPenalty {
    pub fn new(lower: f64, upper: f64, sigma: f64, alpha: f64) -> Result<Self, CostError> {
        check_box(lower, upper, sigma)?;
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(CostError::InvalidParameter("sharpness alpha must be positive"));
        }
        Ok(Self {
            lower,
            upper,
            sigma,
            alpha,
        })
    }
}

/// `log(1 + eᵗ)` without overflow.
fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + libm::log1p(libm::exp(-t))
    } else {
        libm::log1p(libm::exp(t))
    }
}

fn logistic(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + libm::exp(-t))
    } else {
        let e = libm::exp(t);
        e / (1.0 + e)
    }
}

/// `softplus(t + δ) − softplus(t)`.
fn softplus_change(t: f64, delta: f64) -> f64 {
    if delta.abs() > 30.0 {
        return softplus(t + delta) - softplus(t);
    }
    libm::log1p(logistic(t) * libm::expm1(delta))
}

impl LocalCost for SmoothLogPenalty {
    fn value(&self, x: f64) -> f64 {
        let s = self.sigma / self.alpha;
        s * softplus(self.alpha * (x - self.upper)) + s * softplus(self.alpha * (self.lower - x))
    }

    fn gradient(&self, x: f64) -> f64 {
        self.sigma * logistic(self.alpha * (x - self.upper))
            - self.sigma * logistic(self.alpha * (self.lower - x))
    }

    fn curvature_bound(&self) -> Result<f64, CostError> {
        // each side contributes at most σα/4 to f″; halve the sum of both
        Ok(self.sigma * self.alpha / 4.0)
    }

    fn value_step(&self, x: f64, delta: f64) -> f64 {
        let s = self.sigma / self.alpha;
        let t = self.alpha * delta;
        s * softplus_change(self.alpha * (x - self.upper), t)
            + s * softplus_change(self.alpha * (self.lower - x), -t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "type", rename_all = "snake_case"))]
pub enum BaseCost {
    Quadratic(QuadraticCost),
    Cpu(CpuCost),
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "type", rename_all = "snake_case"))]
pub enum Penalty {
    Hard(HardBoxPenalty),
    SmoothLog(SmoothLogPenalty),
}

macro_rules! dispatch {
    ($self:expr, $inner:ident => $body:expr, $($variant:path),+) => {
        match $self {
            $($variant($inner) => $body,)+
        }
    };
}

impl LocalCost for BaseCost {
    fn value(&self, x: f64) -> f64 {
        dispatch!(self, c => c.value(x), BaseCost::Quadratic, BaseCost::Cpu)
    }
    fn gradient(&self, x: f64) -> f64 {
        dispatch!(self, c => c.gradient(x), BaseCost::Quadratic, BaseCost::Cpu)
    }
    fn curvature_bound(&self) -> Result<f64, CostError> {
        dispatch!(self, c => c.curvature_bound(), BaseCost::Quadratic, BaseCost::Cpu)
    }
    fn value_step(&self, x: f64, delta: f64) -> f64 {
        dispatch!(self, c => c.value_step(x, delta), BaseCost::Quadratic, BaseCost::Cpu)
    }
}

impl LocalCost for Penalty {
    fn value(&self, x: f64) -> f64 {
        dispatch!(self, p => p.value(x), Penalty::Hard, Penalty::SmoothLog)
    }
    fn gradient(&self, x: f64) -> f64 {
        dispatch!(self, p => p.gradient(x), Penalty::Hard, Penalty::SmoothLog)
    }
    fn curvature_bound(&self) -> Result<f64, CostError> {
        dispatch!(self, p => p.curvature_bound(), Penalty::Hard, Penalty::SmoothLog)
    }
    fn value_step(&self, x: f64, delta: f64) -> f64 {
        dispatch!(self, p => p.value_step(x, delta), Penalty::Hard, Penalty::SmoothLog)
    }
}

/// `f(x) = base(s·x) + penalty(s·x)` with input scale `s` (1 unless the cost
/// came out of [`normalize_problem`]).
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CompositeCost {
    pub base: BaseCost,
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub penalty: Option<Penalty>,
    #[cfg_attr(feature = "serde", serde(default = "unit_scale"))]
    pub input_scale: f64,
}

#[cfg(feature = "serde")]
fn unit_scale() -> f64 {
    1.0
}

impl CompositeCost {
    pub fn new(base: BaseCost, penalty: Option<Penalty>) -> Self {
        Self {
            base,
            penalty,
            input_scale: 1.0,
        }
    }

    pub fn quadratic(g: f64, d: f64, a: f64) -> Result<Self, CostError> {
        Ok(Self::new(BaseCost::Quadratic(QuadraticCost::new(g, d, a)?), None))
    }

    pub fn cpu(pi_max: f64, rho: f64) -> Result<Self, CostError> {
        Ok(Self::new(BaseCost::Cpu(CpuCost::new(pi_max, rho)?), None))
    }

    pub fn with_penalty(mut self, penalty: Penalty) -> Self {
        self.penalty = Some(penalty);
        self
    }

    /// Closed-form solution of `f′(x) = λ` when there is no penalty term.
    pub fn inverse_gradient_closed_form(&self, lambda: f64) -> Option<f64> {
        if self.penalty.is_some() {
            return None;
        }
        let s = self.input_scale;
        // f′(x) = s·base′(s·x)
        let inner = lambda / s;
        let z = match self.base {
            BaseCost::Quadratic(q) => (inner - q.d) / (2.0 * q.g),
            BaseCost::Cpu(c) => inner * c.pi_max + c.rho,
        };
        Some(z / s)
    }
}

impl LocalCost for CompositeCost {
    fn value(&self, x: f64) -> f64 {
        let z = self.input_scale * x;
        self.base.value(z) + self.penalty.map_or(0.0, |p| p.value(z))
    }

    fn gradient(&self, x: f64) -> f64 {
        let z = self.input_scale * x;
        self.input_scale * (self.base.gradient(z) + self.penalty.map_or(0.0, |p| p.gradient(z)))
    }

    fn curvature_bound(&self) -> Result<f64, CostError> {
        let mut u = self.base.curvature_bound()?;
        if let Some(p) = &self.penalty {
            u += p.curvature_bound()?;
        }
        Ok(self.input_scale * self.input_scale * u)
    }

    fn value_step(&self, x: f64, delta: f64) -> f64 {
        let s = self.input_scale;
        let (z, dz) = (s * x, s * delta);
        self.base.value_step(z, dz) + self.penalty.map_or(0.0, |p| p.value_step(z, dz))
    }
}

/// One cost and one preset demand `b_i` per agent.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Problem {
    costs: Vec<CompositeCost>,
    demands: Vec<f64>,
}

impl Problem {
    pub fn new(costs: Vec<CompositeCost>, demands: Vec<f64>) -> Result<Self, CostError> {
        if costs.is_empty() {
            return Err(CostError::EmptyProblem);
        }
        if costs.len() != demands.len() {
            return Err(CostError::LengthMismatch {
                costs: costs.len(),
                other: demands.len(),
            });
        }
        if demands.iter().any(|b| !b.is_finite()) {
            return Err(CostError::InvalidParameter("demands must be finite"));
        }
        Ok(Self { costs, demands })
    }

    pub fn n(&self) -> usize {
        self.costs.len()
    }

    pub fn costs(&self) -> &[CompositeCost] {
        &self.costs
    }

    pub fn demands(&self) -> &[f64] {
        &self.demands
    }

    pub fn total_demand(&self) -> f64 {
        self.demands.iter().sum()
    }

    /// Replaces the per-agent split of the demand.
    pub fn with_demands(self, demands: Vec<f64>) -> Result<Self, CostError> {
        Self::new(self.costs, demands)
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.costs.iter().zip(x).map(|(c, &xi)| c.value(xi)).sum()
    }

    pub fn gradients(&self, x: &[f64]) -> Vec<f64> {
        self.costs.iter().zip(x).map(|(c, &xi)| c.gradient(xi)).collect()
    }

    /// `F(x + δ) − F(x)` accumulated per agent via [`LocalCost::value_step`].
    pub fn value_step(&self, x: &[f64], delta: &[f64]) -> f64 {
        self.costs
            .iter()
            .zip(x.iter().zip(delta))
            .map(|(c, (&xi, &di))| c.value_step(xi, di))
            .sum()
    }

    /// The single `u` shared by all agents: the largest per-agent bound.
    pub fn curvature_bound(&self) -> Result<f64, CostError> {
        self.costs
            .iter()
            .try_fold(0.0_f64, |u, c| Ok(u.max(c.curvature_bound()?)))
    }
}

/// Rewrites `min Σ f̃_i(z_i) s.t. aᵀz = b` as `min Σ f_i(x_i) s.t. Σ x_i = b`
/// with `x_i = a_i z_i` and `f_i(x) = f̃_i(x / a_i)`. The total demand is split
/// uniformly; use [`Problem::with_demands`] for another split.
pub fn normalize_problem(
    weights: &[f64],
    raw_costs: &[CompositeCost],
    total_demand: f64,
) -> Result<Problem, CostError> {
    if weights.len() != raw_costs.len() {
        return Err(CostError::LengthMismatch {
            costs: raw_costs.len(),
            other: weights.len(),
        });
    }
    if let Some(i) = weights.iter().position(|a| !(a.is_finite() && *a > 0.0)) {
        return Err(CostError::NonpositiveWeight(i));
    }
    let n = raw_costs.len();
    let costs = raw_costs
        .iter()
        .zip(weights)
        .map(|(c, &a)| CompositeCost {
            input_scale: c.input_scale / a,
            ..*c
        })
        .collect();
    Problem::new(costs, alloc::vec![total_demand / n as f64; n])
}

/// Maps a solution of the normalised problem back to `z_i = x_i / a_i`.
pub fn denormalize(weights: &[f64], x: &[f64]) -> Vec<f64> {
    x.iter().zip(weights).map(|(xi, a)| xi / a).collect()
}

/// Lower end used for the open side of `(0, hi]` parameter ranges.
pub const OPEN_LOWER: f64 = 1e-9;

/// Random quadratic costs with hard box penalties: `g ∈ (0, 0.3]`,
/// `d ∈ (0, 10]`, `a ∈ (0, 10]`, box `[10, 110]`, `σ = 1`, `c = 2`, `b_i = 50`.
pub fn sample_academic_costs(n: usize, seed: u64) -> Result<Problem, CostError> {
    if n < 2 {
        return Err(CostError::InvalidParameter("need at least 2 agents"));
    }
    let penalty = Penalty::Hard(HardBoxPenalty::new(10.0, 110.0, 1.0, 2)?);
    let mut r = rng::seeded(seed);
    let costs = (0..n)
        .map(|_| {
            let g = rng::half_open_above(&mut r, OPEN_LOWER, 0.3);
            let d = rng::half_open_above(&mut r, OPEN_LOWER, 10.0);
            let a = rng::half_open_above(&mut r, OPEN_LOWER, 10.0);
            CompositeCost::quadratic(g, d, a).map(|c| c.with_penalty(penalty))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Problem::new(costs, alloc::vec![50.0; n])
}

/// Parameters of the CPU scheduling instance.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CpuInstance {
    pub pi_max: f64,
    pub rho_min: f64,
    pub rho_max: f64,
    pub total_demand: f64,
    /// Upper box bound as a fraction of `pi_max`; the lower bound is 0.
    pub box_fraction: f64,
    pub sigma: f64,
    pub alpha: f64,
}

impl Default for CpuInstance {
    fn default() -> Self {
        Self {
            pi_max: 100.0,
            rho_min: 15.0,
            rho_max: 35.0,
            total_demand: 2500.0,
            box_fraction: 0.6,
            sigma: 4.0,
            alpha: 2.0,
        }
    }
}

/// CPU costs with demands `ρ_i` drawn uniformly from `[ρ_min, ρ_max]` and then
/// rescaled so that `Σ ρ_i` equals the total demand exactly up to rounding.
/// The initial allocation `b_i` is the uniform split of the total demand.
pub fn sample_cpu_problem(n: usize, seed: u64, inst: &CpuInstance) -> Result<Problem, CostError> {
    if n < 2 {
        return Err(CostError::InvalidParameter("need at least 2 agents"));
    }
    if !(inst.rho_min > 0.0 && inst.rho_min <= inst.rho_max) {
        return Err(CostError::InvalidParameter("demand range must be positive and ordered"));
    }
    let penalty = Penalty::SmoothLog(SmoothLogPenalty::new(
        0.0,
        inst.box_fraction * inst.pi_max,
        inst.sigma,
        inst.alpha,
    )?);
    let mut r = rng::seeded(seed);
    let raw: Vec<f64> = (0..n)
        .map(|_| rng::uniform(&mut r, inst.rho_min, inst.rho_max))
        .collect();
    let scale = inst.total_demand / raw.iter().sum::<f64>();
    let costs = raw
        .iter()
        .map(|rho| CompositeCost::cpu(inst.pi_max, rho * scale).map(|c| c.with_penalty(penalty)))
        .collect::<Result<Vec<_>, _>>()?;
    Problem::new(costs, alloc::vec![inst.total_demand / n as f64; n])
}
