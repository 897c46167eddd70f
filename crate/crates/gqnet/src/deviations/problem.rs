//! Precomputed per-target data and the pointwise rate function.
//!
//! For a fixed target node `i` and threshold `b`, the rate of the
//! pinned two-constraint overflow event at times `(t, s)` is
//!
//! ```text
//! I(t,s) = [b - (mu_i - lambda_bar_i) t_i]^2 / (2 Var Abar(t-t_i, t))          (first case)
//!        = [b - (mu_i - lambda_bar_i) t_i - c(t,s)]^2 / (2 Var Abar(s, t))     (second case)
//!        = first + [k(t,s) - c(t,s)]^2 / (2 Var(Abar(s,t) | Abar(t-t_i,t)))    (third case)
//! ```
//!
//! selected by comparing the conditional expectations `k` and `h`
//! against the drift correction `c`. The same value is recoverable as
//! the minimum of a two-constraint quadratic program over the 2x2
//! covariance of the pinned increments, which [`qp_oracle`] computes
//! independently of the case logic.

use crate::kernel::{IncrementSpec, MfBmKernel};
use crate::network::{Network, PathSet};

use super::{DeviationsError, VARIANCE_FLOOR};

/// Which branch of the piecewise rate function produced a value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseTag {
    /// `k < c`: the single-constraint value.
    Case1,
    /// `h > c`: the shifted single-constraint value.
    Case2,
    /// Both constraints bind.
    Case3,
    /// `s = t - t_i` (detected through a vanishing conditioning variance).
    Boundary,
}

impl CaseTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            CaseTag::Case1 => "case1",
            CaseTag::Case2 => "case2",
            CaseTag::Case3 => "case3",
            CaseTag::Boundary => "boundary",
        }
    }

    /// Whether the value came from the first branch (including the
    /// degenerate `s = t - t_i` point).
    pub fn is_first_branch(&self) -> bool {
        matches!(self, CaseTag::Case1 | CaseTag::Boundary)
    }
}

/// Solution of the two-constraint quadratic program.
#[derive(Debug, Clone)]
pub struct QpSolution {
    pub value: f64,
    pub y: f64,
    pub z: f64,
    /// Whether the respective constraint holds with equality at the
    /// optimum. At least one is always active.
    pub y_active: bool,
    pub z_active: bool,
}

/// Everything that depends only on `(net, kernel, target, b)`.
#[derive(Debug, Clone)]
pub struct RateProblem<'a> {
    pub(crate) kernel: &'a MfBmKernel,
    pub(crate) target: usize,
    pub(crate) b: f64,
    pub(crate) paths: PathSet,
    pub(crate) lambda_bar_i: f64,
    /// `mu_i - lambda_bar_i`.
    pub(crate) mu_slack: f64,
    /// Coefficient of `t_i` in the drift correction `c`.
    c_coeff_trivial: f64,
    /// Per-path coefficient of `(t_r - s_r)` in `c` (zero at the trivial
    /// index), weights included.
    c_coeff: Vec<f64>,
}

impl<'a> RateProblem<'a> {
    pub fn new(
        net: &'a Network,
        kernel: &'a MfBmKernel,
        target: usize,
        b: f64,
    ) -> Result<Self, DeviationsError> {
        if !(b > 0.0) || !b.is_finite() {
            return Err(DeviationsError::BadThreshold(b));
        }
        if kernel.node_count() != net.node_count() {
            return Err(DeviationsError::Kernel(
                crate::kernel::KernelError::DimensionMismatch {
                    k: net.node_count(),
                },
            ));
        }
        let report = net.validate()?;
        if !report.near_critical.is_empty() {
            return Err(DeviationsError::Network(
                crate::network::NetworkError::Unstable {
                    node: report.near_critical[0],
                    slack: report.slack[report.near_critical[0]],
                },
            ));
        }
        let paths = PathSet::for_target(net, target)?;
        let lambda_bar = report.lambda_bar;
        let lambda_bar_i = lambda_bar[target];
        let mu_slack = net.mu(target) - lambda_bar_i;

        let inbound_drain = |node: usize| -> f64 {
            net.inbound(node)
                .iter()
                .map(|&j| net.mu(j) * net.split(j, node))
                .sum()
        };
        let c_coeff_trivial = lambda_bar_i - net.lambda(target) - inbound_drain(target);
        let c_coeff: Vec<f64> = (0..paths.len())
            .map(|idx| {
                if idx == paths.trivial_index() {
                    0.0
                } else {
                    let n1 = paths.first_node(idx);
                    (net.mu(n1) - net.lambda(n1) - inbound_drain(n1)) * paths.weight(idx)
                }
            })
            .collect();

        Ok(RateProblem {
            kernel,
            target,
            b,
            paths,
            lambda_bar_i,
            mu_slack,
            c_coeff_trivial,
            c_coeff,
        })
    }

    pub fn paths(&self) -> &PathSet {
        &self.paths
    }

    pub fn lambda_bar(&self) -> f64 {
        self.lambda_bar_i
    }

    pub fn mu_slack(&self) -> f64 {
        self.mu_slack
    }

    pub fn threshold(&self) -> f64 {
        self.b
    }

    fn t_i(&self, t: &[f64]) -> f64 {
        t[self.paths.trivial_index()]
    }

    /// `b - (mu_i - lambda_bar_i) t_i`.
    pub fn shifted_threshold(&self, t: &[f64]) -> f64 {
        self.b - self.mu_slack * self.t_i(t)
    }

    /// The drift correction `c(t, s)`; zero at `s = t - t_i`.
    pub fn c(&self, t: &[f64], s: &[f64]) -> f64 {
        let mut acc = self.c_coeff_trivial * self.t_i(t);
        for idx in 0..self.paths.len() {
            acc += self.c_coeff[idx] * (t[idx] - s[idx]);
        }
        acc
    }

    /// Combination `Abar(t - t_i, t)`: per-path increments over
    /// `(t_r - t_i, t_r]`.
    pub fn spec_tt(&self, t: &[f64]) -> IncrementSpec {
        let ti = self.t_i(t);
        let starts: Vec<f64> = t.iter().map(|&v| v - ti).collect();
        IncrementSpec::from_time_vectors(&self.paths, &starts, t)
    }

    /// Combination `Abar(s, t)`.
    pub fn spec_st(&self, t: &[f64], s: &[f64]) -> IncrementSpec {
        IncrementSpec::from_time_vectors(&self.paths, s, t)
    }

    /// Combination `Abar(t - t_i, s)`.
    pub fn spec_ts(&self, t: &[f64], s: &[f64]) -> IncrementSpec {
        let ti = self.t_i(t);
        let starts: Vec<f64> = t.iter().map(|&v| v - ti).collect();
        IncrementSpec::from_time_vectors(&self.paths, &starts, s)
    }

    /// Combination `Abar(a, b)` for two arbitrary time vectors.
    pub fn spec_between(&self, from: &[f64], to: &[f64]) -> IncrementSpec {
        IncrementSpec::from_time_vectors(&self.paths, from, to)
    }

    pub fn var(&self, spec: &IncrementSpec) -> f64 {
        self.kernel.cov_combination(spec, spec)
    }

    pub fn cov(&self, a: &IncrementSpec, b: &IncrementSpec) -> f64 {
        self.kernel.cov_combination(a, b)
    }

    /// Membership of `t` in the closure of the ordered cone: `t_i <= 0`
    /// and `t_r <= t_{r_+}`.
    pub fn check_t_domain(&self, t: &[f64]) -> Result<(), DeviationsError> {
        if t.len() != self.paths.len() {
            return Err(DeviationsError::DomainViolation(format!(
                "time vector has {} entries, path set has {}",
                t.len(),
                self.paths.len()
            )));
        }
        let tol = 1e-9 * (1.0 + self.t_i(t).abs());
        if self.t_i(t) > tol {
            return Err(DeviationsError::DomainViolation(format!(
                "t_i = {} must be <= 0",
                self.t_i(t)
            )));
        }
        for idx in 0..t.len() {
            if let Some(parent) = self.paths.parent(idx) {
                if t[idx] > t[parent] + tol {
                    return Err(DeviationsError::DomainViolation(format!(
                        "ordering violated: t[{:?}] = {} > t[{:?}] = {}",
                        self.paths.path(idx),
                        t[idx],
                        self.paths.path(parent),
                        t[parent]
                    )));
                }
            }
        }
        Ok(())
    }

    /// Membership of `s` in the closure of the companion cone for `t`:
    /// `s_i = 0` and `t_r <= s_r <= s_{r_+}`.
    pub fn check_s_domain(&self, t: &[f64], s: &[f64]) -> Result<(), DeviationsError> {
        if s.len() != self.paths.len() {
            return Err(DeviationsError::DomainViolation(format!(
                "time vector has {} entries, path set has {}",
                s.len(),
                self.paths.len()
            )));
        }
        let tol = 1e-9 * (1.0 + self.t_i(t).abs());
        if s[self.paths.trivial_index()].abs() > tol {
            return Err(DeviationsError::DomainViolation(format!(
                "s_i = {} must be 0",
                s[self.paths.trivial_index()]
            )));
        }
        for idx in 0..s.len() {
            if let Some(parent) = self.paths.parent(idx) {
                if s[idx] < t[idx] - tol || s[idx] > s[parent] + tol {
                    return Err(DeviationsError::DomainViolation(format!(
                        "s[{:?}] = {} outside [t_r, s_parent] = [{}, {}]",
                        self.paths.path(idx),
                        s[idx],
                        t[idx],
                        s[parent]
                    )));
                }
            }
        }
        Ok(())
    }

    /// The boundary companion vector `s = t - t_i`.
    pub fn boundary_s(&self, t: &[f64]) -> Vec<f64> {
        let ti = self.t_i(t);
        t.iter().map(|&v| v - ti).collect()
    }

    /// Conditional mean `k(t,s)` of `Abar(t-t_i, s)` given the pinned
    /// first constraint.
    pub fn k_value(&self, t: &[f64], s: &[f64]) -> Result<f64, DeviationsError> {
        let spec_tt = self.spec_tt(t);
        let v1 = self.var(&spec_tt);
        if v1 < VARIANCE_FLOOR {
            return Err(DeviationsError::DegenerateVariance(
                "Var(Abar(t - t_i, t)) vanishes".into(),
            ));
        }
        let spec_ts = self.spec_ts(t, s);
        Ok(self.cov(&spec_tt, &spec_ts) / v1 * self.shifted_threshold(t))
    }

    /// Conditional mean `h(t,s)` of `Abar(t-t_i, s)` given the pinned
    /// second constraint.
    pub fn h_value(&self, t: &[f64], s: &[f64]) -> Result<f64, DeviationsError> {
        let spec_st = self.spec_st(t, s);
        let v2 = self.var(&spec_st);
        if v2 < VARIANCE_FLOOR {
            return Err(DeviationsError::DegenerateVariance(
                "Var(Abar(s, t)) vanishes".into(),
            ));
        }
        let spec_ts = self.spec_ts(t, s);
        let z0 = self.shifted_threshold(t) - self.c(t, s);
        Ok(self.cov(&spec_st, &spec_ts) / v2 * z0)
    }

    /// Evaluates the piecewise rate function at `(t, s)`.
    pub fn rate_value(&self, t: &[f64], s: &[f64]) -> Result<(f64, CaseTag), DeviationsError> {
        let fixed = AtFixedT::new(self, t.to_vec())?;
        fixed.eval(s)
    }

    /// Independent route to the same value: minimize the quadratic form
    /// of the pinned pair over the two half-line constraints.
    pub fn qp_value(&self, t: &[f64], s: &[f64]) -> Result<QpSolution, DeviationsError> {
        let spec_tt = self.spec_tt(t);
        let spec_st = self.spec_st(t, s);
        let v1 = self.var(&spec_tt);
        let v2 = self.var(&spec_st);
        let c12 = self.cov(&spec_tt, &spec_st);
        let det = v1 * v2 - c12 * c12;
        if det < VARIANCE_FLOOR * v1.max(v2).max(1.0) {
            return Err(DeviationsError::SingularCovariance);
        }
        let y0 = self.shifted_threshold(t);
        let z0 = y0 - self.c(t, s);
        // Lambda(y,z) = (v2 y^2 - 2 c12 y z + v1 z^2) / (2 det)
        let objective = |y: f64, z: f64| (v2 * y * y - 2.0 * c12 * y * z + v1 * z * z) / (2.0 * det);

        // The unconstrained minimum (0,0) is infeasible since y0 >= b > 0,
        // so the optimum lies on one of three active sets; each candidate
        // below is the facet-restricted minimizer, filtered by feasibility.
        let mut best: Option<QpSolution> = None;
        let mut consider = |y: f64, z: f64, y_active: bool, z_active: bool| {
            let sol = QpSolution {
                value: objective(y, z),
                y,
                z,
                y_active,
                z_active,
            };
            if best.as_ref().map_or(true, |b| sol.value < b.value) {
                best = Some(sol);
            }
        };
        consider(y0, z0, true, true);
        let z_free = c12 / v1 * y0;
        if z_free >= z0 {
            consider(y0, z_free, true, false);
        }
        let y_free = c12 / v2 * z0;
        if y_free >= y0 {
            consider(y_free, z0, false, true);
        }
        Ok(best.expect("the fully active candidate is always feasible"))
    }
}

/// Per-`t` cache for the inner optimization over `s`: the first-branch
/// spec and its variance do not depend on `s`.
pub(crate) struct AtFixedT<'p, 'a> {
    pub(crate) prob: &'p RateProblem<'a>,
    pub(crate) t: Vec<f64>,
    pub(crate) spec_tt: IncrementSpec,
    pub(crate) v1: f64,
    pub(crate) y0: f64,
    pub(crate) case1_value: f64,
}

impl<'p, 'a> AtFixedT<'p, 'a> {
    pub(crate) fn new(prob: &'p RateProblem<'a>, t: Vec<f64>) -> Result<Self, DeviationsError> {
        let spec_tt = prob.spec_tt(&t);
        let v1 = prob.var(&spec_tt);
        if v1 < VARIANCE_FLOOR {
            return Err(DeviationsError::DegenerateVariance(
                "Var(Abar(t - t_i, t)) vanishes; t_i may be zero".into(),
            ));
        }
        let y0 = prob.shifted_threshold(&t);
        let case1_value = y0 * y0 / (2.0 * v1);
        Ok(AtFixedT {
            prob,
            t,
            spec_tt,
            v1,
            y0,
            case1_value,
        })
    }

    pub(crate) fn eval(&self, s: &[f64]) -> Result<(f64, CaseTag), DeviationsError> {
        let spec_ts = self.prob.spec_ts(&self.t, s);
        let vts = self.prob.var(&spec_ts);
        if vts < VARIANCE_FLOOR {
            // s coincides with t - t_i up to degeneracy.
            return Ok((self.case1_value, CaseTag::Boundary));
        }
        let c = self.prob.c(&self.t, s);
        let k = self.prob.cov(&self.spec_tt, &spec_ts) / self.v1 * self.y0;
        if k < c {
            return Ok((self.case1_value, CaseTag::Case1));
        }
        let spec_st = self.prob.spec_st(&self.t, s);
        let v2 = self.prob.var(&spec_st);
        if v2 < VARIANCE_FLOOR {
            return Err(DeviationsError::DegenerateVariance(
                "Var(Abar(s, t)) vanishes".into(),
            ));
        }
        let z0 = self.y0 - c;
        let h = self.prob.cov(&spec_st, &spec_ts) / v2 * z0;
        if h > c {
            return Ok((z0 * z0 / (2.0 * v2), CaseTag::Case2));
        }
        let c12 = self.prob.cov(&self.spec_tt, &spec_st);
        let v_cond = v2 - c12 * c12 / self.v1;
        if v_cond < VARIANCE_FLOOR {
            return Err(DeviationsError::DegenerateVariance(
                "conditional variance of Abar(s,t) given Abar(t-t_i,t) vanishes".into(),
            ));
        }
        let diff = k - c;
        Ok((
            self.case1_value + diff * diff / (2.0 * v_cond),
            CaseTag::Case3,
        ))
    }
}

fn problem<'a>(
    net: &'a Network,
    kernel: &'a MfBmKernel,
    target: usize,
    b: f64,
) -> Result<RateProblem<'a>, DeviationsError> {
    RateProblem::new(net, kernel, target, b)
}

/// Drift correction `c_i(t, s)`.
pub fn c_fun(
    net: &Network,
    kernel: &MfBmKernel,
    target: usize,
    t: &[f64],
    s: &[f64],
) -> Result<f64, DeviationsError> {
    // The threshold does not enter c; any positive value builds the problem.
    let prob = problem(net, kernel, target, 1.0)?;
    prob.check_t_domain(t)?;
    prob.check_s_domain(t, s)?;
    Ok(prob.c(t, s))
}

/// Conditional-mean function `k_b^i(t, s)`.
pub fn k_fun(
    net: &Network,
    kernel: &MfBmKernel,
    target: usize,
    b: f64,
    t: &[f64],
    s: &[f64],
) -> Result<f64, DeviationsError> {
    let prob = problem(net, kernel, target, b)?;
    prob.check_t_domain(t)?;
    prob.check_s_domain(t, s)?;
    prob.k_value(t, s)
}

/// Conditional-mean function `h_b^i(t, s)`.
pub fn h_fun(
    net: &Network,
    kernel: &MfBmKernel,
    target: usize,
    b: f64,
    t: &[f64],
    s: &[f64],
) -> Result<f64, DeviationsError> {
    let prob = problem(net, kernel, target, b)?;
    prob.check_t_domain(t)?;
    prob.check_s_domain(t, s)?;
    prob.h_value(t, s)
}

/// Piecewise rate function `I_b^i(t, s)` with its active branch.
pub fn rate_case_value(
    net: &Network,
    kernel: &MfBmKernel,
    target: usize,
    b: f64,
    t: &[f64],
    s: &[f64],
) -> Result<(f64, CaseTag), DeviationsError> {
    let prob = problem(net, kernel, target, b)?;
    prob.check_t_domain(t)?;
    prob.check_s_domain(t, s)?;
    prob.rate_value(t, s)
}

/// Two-constraint quadratic-program route to `I_b^i(t, s)`.
pub fn qp_oracle(
    net: &Network,
    kernel: &MfBmKernel,
    target: usize,
    b: f64,
    t: &[f64],
    s: &[f64],
) -> Result<QpSolution, DeviationsError> {
    let prob = problem(net, kernel, target, b)?;
    prob.check_t_domain(t)?;
    prob.check_s_domain(t, s)?;
    prob.qp_value(t, s)
}
