//! Most probable overflow trajectories: the conditional-expectation
//! Gaussian paths that achieve the rate-function infimum, sampled on a
//! uniform grid. Available for the first branch (one pinned constraint)
//! and the third branch (two pinned constraints); the second branch has
//! no explicit form here.

use crate::kernel::{IncrementSpec, MfBmKernel};
use crate::network::Network;

use super::optimize::DecayResult;
use super::problem::{CaseTag, RateProblem};
use super::{DeviationsError, VARIANCE_FLOOR};

/// Uniform sampling grid for emitted trajectories.
#[derive(Debug, Clone, Copy)]
pub struct GridSpec {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl GridSpec {
    pub fn times(&self) -> Result<Vec<f64>, DeviationsError> {
        if !(self.step > 0.0) || !self.start.is_finite() || !self.stop.is_finite() {
            return Err(DeviationsError::DomainViolation(
                "grid requires finite start/stop and positive step".into(),
            ));
        }
        if self.stop < self.start {
            return Err(DeviationsError::DomainViolation(
                "grid stop must not precede start".into(),
            ));
        }
        let count = ((self.stop - self.start) / self.step).round() as usize + 1;
        if count > 2_000_000 {
            return Err(DeviationsError::DomainViolation(format!(
                "grid would contain {count} points"
            )));
        }
        Ok((0..count).map(|m| self.start + m as f64 * self.step).collect())
    }
}

/// Per-node sampled values of a most probable path; `values[j][m]` is
/// node `j` at `times[m]`. All trajectories vanish at time zero.
#[derive(Debug, Clone)]
pub struct MeanPath {
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

/// Conditional-mean trajectory achieving the optimized rate.
pub fn most_probable_path(
    net: &Network,
    kernel: &MfBmKernel,
    target: usize,
    b: f64,
    result: &DecayResult,
    grid: &GridSpec,
) -> Result<MeanPath, DeviationsError> {
    let prob = RateProblem::new(net, kernel, target, b)?;
    prob.check_t_domain(&result.optimizer_t)?;
    prob.check_s_domain(&result.optimizer_t, &result.optimizer_s)?;
    let times = grid.times()?;
    let t_star = &result.optimizer_t;

    let spec_tt = prob.spec_tt(t_star);
    let v1 = prob.var(&spec_tt);
    if v1 < VARIANCE_FLOOR {
        return Err(DeviationsError::DegenerateVariance(
            "Var(Abar(t - t_i, t)) vanishes at the optimizer".into(),
        ));
    }
    let y0 = prob.shifted_threshold(t_star);

    // Coefficients of the pinned combinations in the conditional mean.
    let (coef_tt, coef_ts, spec_ts): (f64, f64, Option<IncrementSpec>) = match result.active_case {
        CaseTag::Case1 | CaseTag::Boundary => (y0 / v1, 0.0, None),
        CaseTag::Case3 => {
            let s_star = &result.optimizer_s;
            let spec_ts = prob.spec_ts(t_star, s_star);
            let v22 = prob.var(&spec_ts);
            let v12 = prob.cov(&spec_tt, &spec_ts);
            let det = v1 * v22 - v12 * v12;
            if det < VARIANCE_FLOOR * v1.max(v22).max(1.0) {
                return Err(DeviationsError::SingularCovariance);
            }
            let c_star = prob.c(t_star, s_star);
            let theta1 = (v22 * y0 - v12 * c_star) / det;
            let theta2 = (v1 * c_star - v12 * y0) / det;
            (theta1, theta2, Some(spec_ts))
        }
        CaseTag::Case2 => {
            return Err(DeviationsError::UnsupportedCase(
                "no explicit trajectory is emitted for the second branch".into(),
            ))
        }
    };

    let k = net.node_count();
    let mut values = vec![vec![0.0; times.len()]; k];
    for (j, node_values) in values.iter_mut().enumerate() {
        for (m, &tau) in times.iter().enumerate() {
            if tau == 0.0 {
                continue;
            }
            let probe = IncrementSpec::single(j, 0.0, tau);
            let mut v = coef_tt * prob.cov(&probe, &spec_tt);
            if let Some(ref ts) = spec_ts {
                v += coef_ts * prob.cov(&probe, ts);
            }
            node_values[m] = v;
        }
    }
    Ok(MeanPath { times, values })
}
