//! Iterative regularization: CGNE on the normal equations and truncated
//! Newton-CG, both stopped by the discrepancy principle.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::sqrt;

/// Inner product on parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ParamSpace {
    /// `⟨a, b⟩ = aᵀ M b`
    #[default]
    L2,
    /// `⟨a, b⟩ = aᵀ L b` with the Dirichlet vector Laplacian `L`.
    H10,
}

impl ParamSpace {
    pub fn name(self) -> &'static str {
        match self {
            ParamSpace::L2 => "L2",
            ParamSpace::H10 => "H10",
        }
    }
}

/// A bounded linear map between two coefficient spaces with Gram-matrix
/// inner products. `adjoint` is the Hilbert adjoint with respect to
/// `param_inner` and `data_inner`.
pub trait LinearForward {
    fn param_dim(&self) -> usize;
    fn data_dim(&self) -> usize;
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>>;
    fn adjoint(&self, y: &[f64]) -> Result<Vec<f64>>;
    fn param_inner(&self, a: &[f64], b: &[f64]) -> f64;
    fn data_inner(&self, a: &[f64], b: &[f64]) -> f64;

    fn param_norm(&self, a: &[f64]) -> f64 {
        sqrt(self.param_inner(a, a).max(0.0))
    }

    fn data_norm(&self, a: &[f64]) -> f64 {
        sqrt(self.data_inner(a, a).max(0.0))
    }
}

impl<T: LinearForward + ?Sized> LinearForward for &T {
    fn param_dim(&self) -> usize {
        (**self).param_dim()
    }
    fn data_dim(&self) -> usize {
        (**self).data_dim()
    }
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        (**self).apply(x)
    }
    fn adjoint(&self, y: &[f64]) -> Result<Vec<f64>> {
        (**self).adjoint(y)
    }
    fn param_inner(&self, a: &[f64], b: &[f64]) -> f64 {
        (**self).param_inner(a, b)
    }
    fn data_inner(&self, a: &[f64], b: &[f64]) -> f64 {
        (**self).data_inner(a, b)
    }
}

/// A nonlinear forward map that can be evaluated and linearized in one go.
pub trait NonlinearForward {
    type Linearization<'a>: LinearForward
    where
        Self: 'a;

    fn param_dim(&self) -> usize;
    fn data_dim(&self) -> usize;
    fn data_inner(&self, a: &[f64], b: &[f64]) -> f64;

    /// Returns `S(x)` and the derivative at `x`. `previous` is the
    /// linearization at the last iterate and may be used for warm starts.
    fn linearize<'a>(
        &'a self,
        x: &[f64],
        previous: Option<&Self::Linearization<'a>>,
    ) -> Result<(Vec<f64>, Self::Linearization<'a>)>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InversionConfig {
    pub tau: f64,
    pub delta: f64,
    pub rho: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    pub param_space: ParamSpace,
    pub seed: u64,
    /// Absolute residual tolerance used when `tau · delta` is smaller.
    pub residual_floor: f64,
}

impl Default for InversionConfig {
    fn default() -> Self {
        Self {
            tau: 1.2,
            delta: 0.0,
            rho: 0.7,
            max_outer: 30,
            max_inner: 200,
            param_space: ParamSpace::L2,
            seed: 0,
            residual_floor: 1e-14,
        }
    }
}

impl InversionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 1.0) {
            return Err(Error::InvalidArgument("tau must exceed 1"));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::InvalidArgument("rho must lie in (0, 1)"));
        }
        if !(self.delta >= 0.0) {
            return Err(Error::InvalidArgument("delta must be non-negative"));
        }
        if !(self.residual_floor >= 0.0) {
            return Err(Error::InvalidArgument("residual floor must be non-negative"));
        }
        Ok(())
    }

    pub fn target(&self) -> f64 {
        (self.tau * self.delta).max(self.residual_floor)
    }
}

/// `‖r‖ ≤ τδ`, with `τδ` raised to the residual floor.
pub fn discrepancy_reached(residual_norm: f64, cfg: &InversionConfig) -> bool {
    residual_norm <= cfg.target()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Discrepancy,
    MaxIter,
    /// A forward solve failed; the last good iterate is returned.
    Aborted,
}

impl StopReason {
    pub fn name(self) -> &'static str {
        match self {
            StopReason::Discrepancy => "DISCREPANCY",
            StopReason::MaxIter => "MAX_ITER",
            StopReason::Aborted => "ABORTED",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub outer_iterations: usize,
    pub inner_iterations_per_outer: Vec<usize>,
    /// Data residual norms, starting with the initial iterate.
    pub residual_history: Vec<f64>,
    /// Relative errors in percent, filled when a monitor is supplied.
    pub error_history: Vec<f64>,
    pub stop_reason: StopReason,
    pub breakdown: bool,
    pub failure: Option<Error>,
    pub wall_time_seconds: Option<f64>,
    pub final_relative_error: Option<f64>,
}

impl SolveReport {
    fn new() -> Self {
        Self {
            outer_iterations: 0,
            inner_iterations_per_outer: Vec::new(),
            residual_history: Vec::new(),
            error_history: Vec::new(),
            stop_reason: StopReason::MaxIter,
            breakdown: false,
            failure: None,
            wall_time_seconds: None,
            final_relative_error: None,
        }
    }

    pub fn final_residual(&self) -> f64 {
        self.residual_history.last().copied().unwrap_or(0.0)
    }

    /// Iteration index with the smallest recorded error.
    pub fn best_iteration(&self) -> Option<usize> {
        self.error_history
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
    }
}

/// Optional per-iterate error functional, e.g. the relative error against a
/// known ground truth.
pub type Monitor<'m> = Option<&'m dyn Fn(&[f64]) -> f64>;

struct Cgls {
    x: Vec<f64>,
    iterations: usize,
    residuals: Vec<f64>,
    errors: Vec<f64>,
    reached: bool,
    breakdown: bool,
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// CG on `A*A x = A*y` from `x = 0`, stopped once `‖y − Ax‖ ≤ target`.
fn cgls<A: LinearForward + ?Sized>(op: &A, y: &[f64], target: f64, max_iter: usize, monitor: Monitor<'_>) -> Result<Cgls> {
    if y.len() != op.data_dim() {
        return Err(Error::InvalidArgument("data length does not match the operator"));
    }
    let mut x = vec![0.0; op.param_dim()];
    let mut r = y.to_vec();
    let mut out = Cgls {
        x: Vec::new(),
        iterations: 0,
        residuals: vec![op.data_norm(&r)],
        errors: Vec::new(),
        reached: false,
        breakdown: false,
    };
    if let Some(m) = monitor {
        out.errors.push(m(&x));
    }
    if out.residuals[0] <= target {
        out.reached = true;
        out.x = x;
        return Ok(out);
    }
    let mut s = op.adjoint(&r)?;
    let mut p = s.clone();
    let mut gamma = op.param_inner(&s, &s);
    while out.iterations < max_iter {
        if !(gamma > 0.0) {
            out.breakdown = true;
            break;
        }
        let q = op.apply(&p)?;
        let qq = op.data_inner(&q, &q);
        if !(qq > 0.0) {
            out.breakdown = true;
            break;
        }
        let alpha = gamma / qq;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &q, &mut r);
        out.iterations += 1;
        let rn = op.data_norm(&r);
        out.residuals.push(rn);
        if let Some(m) = monitor {
            out.errors.push(m(&x));
        }
        if rn <= target {
            out.reached = true;
            break;
        }
        s = op.adjoint(&r)?;
        let gamma_new = op.param_inner(&s, &s);
        let beta = gamma_new / gamma;
        gamma = gamma_new;
        for (pi, si) in p.iter_mut().zip(&s) {
            *pi = si + beta * *pi;
        }
    }
    out.x = x;
    Ok(out)
}

/// CGNE for `A t = u^δ`. Returns the first iterate meeting the discrepancy
/// principle or the `max_inner` iterate.
pub fn cgne<A: LinearForward + ?Sized>(
    op: &A,
    data: &[f64],
    cfg: &InversionConfig,
    monitor: Monitor<'_>,
) -> Result<(Vec<f64>, SolveReport)> {
    cfg.validate()?;
    let run = cgls(op, data, cfg.target(), cfg.max_inner, monitor)?;
    let mut report = SolveReport::new();
    report.outer_iterations = run.iterations;
    report.residual_history = run.residuals;
    report.error_history = run.errors;
    report.breakdown = run.breakdown;
    report.stop_reason = if run.reached { StopReason::Discrepancy } else { StopReason::MaxIter };
    report.final_relative_error = report.error_history.last().copied();
    Ok((run.x, report))
}

/// Truncated Newton-CG. Each outer step solves the linearized problem with
/// CGNE until its residual drops below `ρ · ‖S(x_k) − u^δ‖`.
pub fn newton_cg<N: NonlinearForward + ?Sized>(
    op: &N,
    data: &[f64],
    cfg: &InversionConfig,
    x0: Option<&[f64]>,
    monitor: Monitor<'_>,
) -> Result<(Vec<f64>, SolveReport)> {
    cfg.validate()?;
    if data.len() != op.data_dim() {
        return Err(Error::InvalidArgument("data length does not match the operator"));
    }
    let mut x = match x0 {
        Some(v) if v.len() != op.param_dim() => {
            return Err(Error::InvalidArgument("initial guess length does not match the operator"))
        }
        Some(v) => v.to_vec(),
        None => vec![0.0; op.param_dim()],
    };
    let mut report = SolveReport::new();
    let (mut y, mut lin) = op.linearize(&x, None)?;
    loop {
        let r: Vec<f64> = data.iter().zip(&y).map(|(d, s)| d - s).collect();
        let rn = sqrt(op.data_inner(&r, &r).max(0.0));
        report.residual_history.push(rn);
        if let Some(m) = monitor {
            report.error_history.push(m(&x));
        }
        if discrepancy_reached(rn, cfg) {
            report.stop_reason = StopReason::Discrepancy;
            break;
        }
        if report.outer_iterations >= cfg.max_outer {
            report.stop_reason = StopReason::MaxIter;
            break;
        }
        let inner = match cgls(&lin, &r, cfg.rho * rn, cfg.max_inner, None) {
            Ok(v) => v,
            Err(e) => {
                report.stop_reason = StopReason::Aborted;
                report.failure = Some(e);
                break;
            }
        };
        report.breakdown |= inner.breakdown;
        report.inner_iterations_per_outer.push(inner.iterations);
        report.outer_iterations += 1;
        let mut trial = x.clone();
        axpy(1.0, &inner.x, &mut trial);
        match op.linearize(&trial, Some(&lin)) {
            Ok((ny, nl)) => {
                x = trial;
                y = ny;
                lin = nl;
            }
            Err(e) => {
                report.stop_reason = StopReason::Aborted;
                report.failure = Some(e);
                break;
            }
        }
    }
    report.final_relative_error = report.error_history.last().copied();
    Ok((x, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Diagonal operator with Euclidean inner products.
    struct Diag(Vec<f64>);

    impl LinearForward for Diag {
        fn param_dim(&self) -> usize {
            self.0.len()
        }
        fn data_dim(&self) -> usize {
            self.0.len()
        }
        fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
            Ok(x.iter().zip(&self.0).map(|(a, b)| a * b).collect())
        }
        fn adjoint(&self, y: &[f64]) -> Result<Vec<f64>> {
            self.apply(y)
        }
        fn param_inner(&self, a: &[f64], b: &[f64]) -> f64 {
            a.iter().zip(b).map(|(x, y)| x * y).sum()
        }
        fn data_inner(&self, a: &[f64], b: &[f64]) -> f64 {
            self.param_inner(a, b)
        }
    }

    #[test]
    fn discrepancy_boundary_convention() {
        let cfg = InversionConfig {
            tau: 1.2,
            delta: 1.0,
            ..Default::default()
        };
        assert!(discrepancy_reached(0.0, &cfg));
        assert!(discrepancy_reached(1.2, &cfg));
        assert!(!discrepancy_reached(1.3, &cfg));
    }

    #[test]
    fn config_validation() {
        let bad_tau = InversionConfig {
            tau: 1.0,
            ..Default::default()
        };
        assert!(bad_tau.validate().is_err());
        let bad_rho = InversionConfig {
            rho: 1.0,
            ..Default::default()
        };
        assert!(bad_rho.validate().is_err());
        assert!(InversionConfig::default().validate().is_ok());
    }

    #[test]
    fn zero_data_stops_immediately() {
        let op = Diag(vec![1.0, 2.0, 3.0]);
        let (x, rep) = cgne(&op, &[0.0; 3], &InversionConfig::default(), None).unwrap();
        assert_eq!(x, vec![0.0; 3]);
        assert_eq!(rep.outer_iterations, 0);
        assert_eq!(rep.stop_reason, StopReason::Discrepancy);
    }

    #[test]
    fn cgne_solves_diagonal_in_distinct_eigenvalue_count() {
        let op = Diag(vec![1.0, 2.0, 2.0, 3.0]);
        let y = [1.0, -1.0, 0.5, 2.0];
        let (x, rep) = cgne(&op, &y, &InversionConfig::default(), None).unwrap();
        assert!(rep.outer_iterations <= 3);
        for i in 0..4 {
            assert!((x[i] - y[i] / op.0[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn residual_history_decreases() {
        let op = Diag((1..=30).map(|k| 1.0 / k as f64).collect());
        let y: Vec<f64> = (0..30).map(|k| (k as f64).sin()).collect();
        let cfg = InversionConfig {
            max_inner: 25,
            ..Default::default()
        };
        let (_, rep) = cgne(&op, &y, &cfg, None).unwrap();
        for w in rep.residual_history.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }
    }
}
