//! Ground truth and convergence bounds for the distributed protocol.
//!
//! [`solve_oracle`] solves the separable problem centrally by bisection on
//! the common gradient value `λ` (at the optimum every `∂f_i(x*_i)` equals
//! `λ*`). [`step_bound`] gives the admissible step rate for a graph spectrum,
//! a channel map and a delay bound.

use alloc::vec::Vec;
use core::fmt;

use crate::costs::{CompositeCost, CostError, LocalCost, Problem};
use crate::graph::SpectralInfo;
use crate::nonlinearity::{MapError, SectorMap};
use crate::protocol::Trace;

#[derive(Debug, Clone, PartialEq)]
pub enum AnalysisError {
    /// `λ` (or an inverse gradient) could not be bracketed within the
    /// configured range; the costs are probably malformed.
    BracketFailure,
    InvalidInput(&'static str),
    DimensionMismatch { expected: usize, found: usize },
    Cost(CostError),
    Map(MapError),
}

impl fmt::Display for AnalysisError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::BracketFailure => write!(f, "could not bracket the optimal multiplier"),
            Self::InvalidInput(what) => write!(f, "invalid input: {what}"),
            Self::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Self::Cost(e) => write!(f, "{e}"),
            Self::Map(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for AnalysisError {}

impl From<CostError> for AnalysisError {
    fn from(e: CostError) -> Self {
        Self::Cost(e)
    }
}

impl From<MapError> for AnalysisError {
    fn from(e: MapError) -> Self {
        Self::Map(e)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimalSolution {
    pub x_star: Vec<f64>,
    pub f_star: f64,
    /// Common gradient value at the optimum.
    pub lambda_star: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleConfig {
    /// Early exit once `|Σ x_i(λ) − Σ b_i| ≤ tol`. Zero bisects to full precision.
    pub tol: f64,
    /// Largest `|x|` explored while bracketing.
    pub max_abs_x: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            tol: 0.0,
            max_abs_x: 1e12,
        }
    }
}

const MAX_BISECTIONS: usize = 2_000;

/// Bisects a nondecreasing function `h` on `[lo, hi]` with `h(lo) ≤ 0 ≤ h(hi)`
/// down to adjacent floats; returns the endpoint with the smaller `|h|`.
fn bisect(mut lo: f64, mut hi: f64, tol: f64, mut h: impl FnMut(f64) -> f64) -> f64 {
    let (mut h_lo, mut h_hi) = (h(lo), h(hi));
    for _ in 0..MAX_BISECTIONS {
        let mid = lo + (hi - lo) / 2.0;
        if mid <= lo || mid >= hi {
            break;
        }
        let hm = h(mid);
        if hm.abs() <= tol {
            return mid;
        }
        if hm < 0.0 {
            lo = mid;
            h_lo = hm;
        } else {
            hi = mid;
            h_hi = hm;
        }
    }
    if h_lo.abs() <= h_hi.abs() {
        lo
    } else {
        hi
    }
}

/// Solves `∂f(x) = λ` for one strictly convex cost.
pub fn inverse_gradient(cost: &CompositeCost, lambda: f64, max_abs_x: f64) -> Option<f64> {
    if let Some(x) = cost.inverse_gradient_closed_form(lambda) {
        return x.is_finite().then_some(x);
    }
    let (mut lo, mut hi) = (-1.0_f64, 1.0_f64);
    while cost.gradient(lo) > lambda {
        lo *= 2.0;
        if lo < -max_abs_x {
            return None;
        }
    }
    while cost.gradient(hi) < lambda {
        hi *= 2.0;
        if hi > max_abs_x {
            return None;
        }
    }
    Some(bisect(lo, hi, 0.0, |x| cost.gradient(x) - lambda))
}

pub fn solve_oracle(problem: &Problem, tol: f64) -> Result<OptimalSolution, AnalysisError> {
    solve_oracle_with(problem, &OracleConfig { tol, ..OracleConfig::default() })
}

pub fn solve_oracle_with(
    problem: &Problem,
    cfg: &OracleConfig,
) -> Result<OptimalSolution, AnalysisError> {
    let costs = problem.costs();
    let total = problem.total_demand();
    let allocation = |lambda: f64| -> Option<Vec<f64>> {
        costs
            .iter()
            .map(|c| inverse_gradient(c, lambda, cfg.max_abs_x))
            .collect()
    };
    let excess = |lambda: f64| -> Option<f64> {
        let x = allocation(lambda)?;
        Some(x.iter().sum::<f64>() - total)
    };

    let mut range = 1.0 + problem.demands().iter().fold(0.0_f64, |m, b| m.max(b.abs()));
    let (lam_lo, lam_hi) = loop {
        if range > cfg.max_abs_x {
            return Err(AnalysisError::BracketFailure);
        }
        let lo = costs.iter().map(|c| c.gradient(-range)).fold(f64::INFINITY, f64::min);
        let hi = costs.iter().map(|c| c.gradient(range)).fold(f64::NEG_INFINITY, f64::max);
        match (excess(lo), excess(hi)) {
            (Some(a), Some(b)) if a <= 0.0 && b >= 0.0 => break (lo, hi),
            _ => range *= 2.0,
        }
    };

    let mut failed = false;
    let lambda = bisect(lam_lo, lam_hi, cfg.tol, |l| {
        excess(l).unwrap_or_else(|| {
            failed = true;
            0.0
        })
    });
    if failed {
        return Err(AnalysisError::BracketFailure);
    }
    let x_star = allocation(lambda).ok_or(AnalysisError::BracketFailure)?;
    Ok(OptimalSolution {
        f_star: problem.value(&x_star),
        x_star,
        lambda_star: lambda,
    })
}

/// Admissible step rates: convergence is guaranteed for step rates strictly
/// below `eta_bar` without delays and strictly below `eta_tau_bar` with
/// delays bounded by `tau_bar`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepBound {
    pub eta_bar: f64,
    pub eta_tau_bar: f64,
    pub kappa: f64,
    pub big_k: f64,
    pub lambda2: f64,
    pub lambda_n: f64,
    pub u: f64,
    pub tau_bar: usize,
}

fn next_down(v: f64) -> f64 {
    debug_assert!(v > 0.0 && v.is_finite());
    f64::from_bits(v.to_bits() - 1)
}

/// `η̄ = κλ₂ / (u λ_n² 𝒦²)` and `η̄_τ = η̄ / (τ̄ + 1)`.
///
/// Both are nudged down by at most a couple of ulps so that
/// `η̄_τ · (τ̄+1) == η̄` and `η̄ / (τ̄+1) == η̄_τ` hold exactly in floating point.
pub fn step_bound(
    kappa: f64,
    big_k: f64,
    lambda2: f64,
    lambda_n: f64,
    u: f64,
    tau_bar: usize,
) -> Result<StepBound, AnalysisError> {
    for v in [kappa, big_k, lambda2, lambda_n, u] {
        if !(v.is_finite() && v > 0.0) {
            return Err(AnalysisError::InvalidInput("bound parameters must be positive"));
        }
    }
    if kappa > big_k || lambda2 > lambda_n {
        return Err(AnalysisError::InvalidInput("need kappa <= K and lambda2 <= lambda_n"));
    }
    let raw = kappa * lambda2 / (u * lambda_n * lambda_n * big_k * big_k);
    let d = (tau_bar + 1) as f64;
    let mut q = raw / d;
    while !(q * d <= raw && (q * d) / d == q) {
        q = next_down(q);
    }
    Ok(StepBound {
        eta_bar: q * d,
        eta_tau_bar: q,
        kappa,
        big_k,
        lambda2,
        lambda_n,
        u,
        tau_bar,
    })
}

/// [`step_bound`] with `κ, 𝒦` taken from the map and `u` from the problem.
pub fn bound_for(
    problem: &Problem,
    map: &SectorMap,
    spectrum: &SpectralInfo,
    tau_bar: usize,
) -> Result<StepBound, AnalysisError> {
    let (kappa, big_k) = map.sector_bounds()?;
    let u = problem.curvature_bound()?;
    step_bound(kappa, big_k, spectrum.lambda2, spectrum.lambda_n, u, tau_bar)
}

/// `F(x(k)) − F(x*)` for every recorded round.
pub fn residual(trace: &Trace, opt: &OptimalSolution) -> Result<Vec<f64>, AnalysisError> {
    if trace.n != opt.x_star.len() {
        return Err(AnalysisError::DimensionMismatch {
            expected: opt.x_star.len(),
            found: trace.n,
        });
    }
    Ok(trace.rows.iter().map(|r| r.cost - opt.f_star).collect())
}

/// `max_i ∂f_i(x_i) − min_i ∂f_i(x_i)`.
pub fn gradient_dispersion(problem: &Problem, x: &[f64]) -> f64 {
    let (lo, hi) = problem
        .costs()
        .iter()
        .zip(x)
        .map(|(c, &xi)| c.gradient(xi))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), g| {
            (lo.min(g), hi.max(g))
        });
    if lo > hi {
        0.0
    } else {
        hi - lo
    }
}

/// `|Σ_i (x_i − b_i)|`.
pub fn feasibility_gap(problem: &Problem, x: &[f64]) -> f64 {
    x.iter()
        .zip(problem.demands())
        .map(|(xi, b)| xi - b)
        .sum::<f64>()
        .abs()
}

/// First index at which `series[k] ≤ rel_tol · series[0]`.
pub fn rounds_to_tolerance(series: &[f64], rel_tol: f64) -> Option<usize> {
    let first = *series.first()?;
    series.iter().position(|&r| r <= rel_tol * first)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::costs::{CpuCost, BaseCost};
    use alloc::vec;

    #[test]
    fn oracle_two_quadratics() {
        // x² and 2x² with Σx = 3: 2x₁ = 4x₂ = λ → x = (2, 1), λ = 4
        let p = Problem::new(
            vec![
                CompositeCost::quadratic(1.0, 0.0, 0.0).unwrap(),
                CompositeCost::quadratic(2.0, 0.0, 0.0).unwrap(),
            ],
            vec![1.5, 1.5],
        )
        .unwrap();
        let s = solve_oracle(&p, 0.0).unwrap();
        assert!((s.lambda_star - 4.0).abs() < 1e-12);
        assert!((s.x_star[0] - 2.0).abs() < 1e-12);
        assert!((s.x_star[1] - 1.0).abs() < 1e-12);
        assert!((s.f_star - 6.0).abs() < 1e-12);
    }

    #[test]
    fn oracle_symmetric_problem() {
        let c = CompositeCost::quadratic(0.2, 1.0, 3.0).unwrap();
        let p = Problem::new(vec![c; 5], vec![7.0; 5]).unwrap();
        let s = solve_oracle(&p, 0.0).unwrap();
        for x in &s.x_star {
            assert!((x - 7.0).abs() < 1e-10);
        }
    }

    #[test]
    fn oracle_cpu_without_penalty_returns_demands() {
        let rhos = [12.0, 30.0, 25.5, 18.0];
        let costs: Vec<_> = rhos
            .iter()
            .map(|&r| CompositeCost::cpu(100.0, r).unwrap())
            .collect();
        let p = Problem::new(costs, vec![rhos.iter().sum::<f64>() / 4.0; 4]).unwrap();
        let s = solve_oracle(&p, 0.0).unwrap();
        for (x, r) in s.x_star.iter().zip(&rhos) {
            assert!((x - r).abs() < 1e-10);
        }
        assert!(s.f_star.abs() < 1e-20);
    }

    #[test]
    fn oracle_with_penalties_uses_bisection() {
        let p = crate::costs::sample_academic_costs(20, 4).unwrap();
        let s = solve_oracle(&p, 0.0).unwrap();
        assert!(feasibility_gap(&p, &s.x_star) <= 1e-10 * p.total_demand());
        assert!(gradient_dispersion(&p, &s.x_star) <= 1e-8);
    }

    #[test]
    fn inverse_gradient_bracket_failure() {
        let c = CompositeCost::new(BaseCost::Cpu(CpuCost { pi_max: 1.0, rho: 1.0 }), None);
        let with_pen = c.with_penalty(crate::costs::Penalty::SmoothLog(
            crate::costs::SmoothLogPenalty::new(0.0, 1.0, 1.0, 1.0).unwrap(),
        ));
        assert!(inverse_gradient(&with_pen, 1e30, 1e6).is_none());
        assert!(inverse_gradient(&with_pen, 0.3, 1e6).is_some());
    }

    #[test]
    fn step_bound_examples() {
        let b = step_bound(1.0, 1.0, 2.0, 2.0, 1.0, 0).unwrap();
        assert_eq!(b.eta_bar, 0.5);
        assert_eq!(b.eta_tau_bar, 0.5);
        let b = step_bound(1.0, 1.0, 2.0, 2.0, 1.0, 1).unwrap();
        assert_eq!(b.eta_tau_bar, 0.25);
        assert_eq!(b.eta_bar, 0.5);
        let b1 = step_bound(1.0, 1.0, 3.0, 3.0, 0.5, 0).unwrap();
        let b2 = step_bound(1.0, 1.0, 6.0, 6.0, 0.5, 0).unwrap();
        assert!((b1.eta_bar - 1.0 / 1.5).abs() < 1e-15);
        assert!(b2.eta_bar < b1.eta_bar);
    }

    #[test]
    fn step_bound_rejects_nonpositive() {
        assert!(step_bound(0.0, 1.0, 1.0, 1.0, 1.0, 0).is_err());
        assert!(step_bound(1.0, 1.0, 1.0, 1.0, -1.0, 0).is_err());
        assert!(step_bound(1.0, 1.0, 2.0, 1.0, 1.0, 0).is_err());
    }

    #[test]
    fn dispersion_and_gap() {
        let c = CompositeCost::quadratic(1.0, 0.0, 0.0).unwrap();
        let p = Problem::new(vec![c, c], vec![1.0, 2.0]).unwrap();
        assert_eq!(gradient_dispersion(&p, &[1.0, 2.0]), 2.0);
        assert_eq!(feasibility_gap(&p, &[1.0, 2.0]), 0.0);
        assert_eq!(feasibility_gap(&p, &[1.5, 2.0]), 0.5);
    }

    #[test]
    fn residual_checks_dimensions() {
        let c = CompositeCost::quadratic(1.0, 0.0, 0.0).unwrap();
        let p = Problem::new(vec![c, c], vec![1.0, 1.0]).unwrap();
        let opt = solve_oracle(&p, 0.0).unwrap();
        let mut t = Trace::new(3, 2.0);
        assert!(residual(&t, &opt).is_err());
        t.n = 2;
        t.rows.push(crate::protocol::TraceRow {
            k: 0,
            cost: p.value(&opt.x_star),
            feas_gap: 0.0,
            dispersion: 0.0,
            edges: 0,
            msgs: 0,
            x: opt.x_star.clone(),
            y: vec![0.0; 2],
        });
        assert_eq!(residual(&t, &opt).unwrap(), vec![0.0]);
    }

    #[test]
    fn rounds_to_tolerance_finds_first_hit() {
        assert_eq!(rounds_to_tolerance(&[1.0, 0.5, 0.01, 0.001], 0.01), Some(2));
        assert_eq!(rounds_to_tolerance(&[1.0, 0.5], 0.01), None);
        assert_eq!(rounds_to_tolerance(&[], 0.01), None);
    }
}
