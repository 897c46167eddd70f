//! The inf-sup decay bound: minimize over the ordered cone of upstream
//! busy-period start times `t`, with an inner maximization over the
//! companion cone of `s`.
//!
//! Constraints are enforced by construction. The outer vector is
//! parameterized by `t_i = -exp(g_0)` and nonnegative gaps
//! `t_r = t_{r_+} - exp(g_r)` optimized in log space; the inner vector
//! by fractions `s_r = t_r + beta_r (s_{r_+} - t_r)` with `beta`
//! clamped to `[0,1]`. Any feasible `t` upper-bounds the infimum, so
//! the returned value is a certified lower bound on the decay rate up
//! to the tolerance of the inner maximization.

use crate::kernel::MfBmKernel;
use crate::network::Network;
use crate::optim::{self, low_discrepancy_point, NmOptions};

use super::problem::{AtFixedT, CaseTag, RateProblem};
use super::tightness::Tightness;
use super::DeviationsError;

/// Smallest gap handled in log space.
pub(crate) const GAP_FLOOR: f64 = 1e-12;
/// Clamp for log-space coordinates, keeping `exp` finite and sane.
const LOG_CLAMP: f64 = 38.0;

#[derive(Debug, Clone)]
pub struct DecayOptions {
    /// Number of outer multi-starts.
    pub starts: usize,
    pub outer_max_iters: usize,
    pub inner_max_iters: usize,
    /// Multi-starts for the inner maximization over `s`.
    pub inner_starts: usize,
    /// Relative tolerance for both simplex stages.
    pub tol: f64,
    /// Reserved for start jitter; the default start grid is deterministic.
    pub seed: u64,
    /// Optional warm start: a known good `t` vector (e.g. from a nearby
    /// parameter point) prepended to the start list.
    pub hint_t: Option<Vec<f64>>,
}

impl Default for DecayOptions {
    fn default() -> Self {
        DecayOptions {
            starts: 16,
            outer_max_iters: 400,
            inner_max_iters: 220,
            inner_starts: 3,
            tol: 1e-10,
            seed: 0,
            hint_t: None,
        }
    }
}

impl DecayOptions {
    /// A cheaper profile for parameter sweeps.
    pub fn quick() -> Self {
        DecayOptions {
            starts: 4,
            outer_max_iters: 150,
            inner_max_iters: 100,
            inner_starts: 2,
            ..Default::default()
        }
    }

    /// The quick profile warm-started from a known optimizer.
    pub fn quick_from(t: &[f64]) -> Self {
        DecayOptions {
            starts: 2,
            hint_t: Some(t.to_vec()),
            ..DecayOptions::quick()
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct OptimizerDiagnostics {
    pub starts: usize,
    pub converged_starts: usize,
    pub best_start: usize,
    pub outer_evaluations: usize,
    pub inner_evaluations: usize,
}

/// Outcome of the decay-rate optimization at one node.
#[derive(Debug, Clone)]
pub struct DecayResult {
    /// Decay exponent in nats per source.
    pub exponent: f64,
    /// Optimizing start-time vector, aligned with the path set.
    pub optimizer_t: Vec<f64>,
    /// Optimizing companion vector.
    pub optimizer_s: Vec<f64>,
    pub active_case: CaseTag,
    /// Certificate status; `LowerBoundOnly` until a tightness check runs.
    pub tightness: Tightness,
    pub diagnostics: OptimizerDiagnostics,
}

/// Builds `t` from log-space coordinates, parents before children.
pub(crate) fn t_from_log_coords(prob: &RateProblem, g: &[f64]) -> Vec<f64> {
    let paths = prob.paths();
    let mut t = vec![0.0; paths.len()];
    for &idx in paths.eval_order() {
        let gi = g[idx].clamp(-LOG_CLAMP, LOG_CLAMP);
        match paths.parent(idx) {
            None => t[idx] = -gi.exp(),
            Some(parent) => t[idx] = t[parent] - gi.exp().max(0.0),
        }
    }
    t
}

/// Inverse of [`t_from_log_coords`] with gaps floored at [`GAP_FLOOR`].
pub(crate) fn log_coords_from_t(prob: &RateProblem, t: &[f64]) -> Vec<f64> {
    let paths = prob.paths();
    let mut g = vec![0.0; paths.len()];
    for &idx in paths.eval_order() {
        let raw = match paths.parent(idx) {
            None => -t[idx],
            Some(parent) => t[parent] - t[idx],
        };
        g[idx] = raw.max(GAP_FLOOR).ln();
    }
    g
}

/// Builds `s` from clamped fractions of the admissible intervals.
pub(crate) fn s_from_fractions(prob: &RateProblem, t: &[f64], beta: &[f64]) -> Vec<f64> {
    let paths = prob.paths();
    let mut s = vec![0.0; paths.len()];
    for &idx in paths.eval_order() {
        match paths.parent(idx) {
            None => s[idx] = 0.0,
            Some(parent) => {
                let frac = beta[idx].clamp(0.0, 1.0);
                s[idx] = t[idx] + frac * (s[parent] - t[idx]);
            }
        }
    }
    s
}

pub(crate) struct InnerSup {
    pub value: f64,
    pub s: Vec<f64>,
    pub evaluations: usize,
}

/// Maximizes the rate function over the companion cone at fixed `t`.
/// The boundary companion `s = t - t_i` always participates, so the
/// result dominates the first-branch value.
pub(crate) fn inner_sup(
    fixed: &AtFixedT,
    opts: &DecayOptions,
) -> Result<InnerSup, DeviationsError> {
    let prob = fixed.prob;
    let d = prob.paths().nontrivial_count();
    let boundary = prob.boundary_s(&fixed.t);
    if d == 0 {
        return Ok(InnerSup {
            value: fixed.case1_value,
            s: boundary,
            evaluations: 1,
        });
    }

    let mut evaluations = 0usize;
    let eval_beta = |beta: &[f64], evaluations: &mut usize| -> f64 {
        *evaluations += 1;
        // beta is indexed by path position; the trivial coordinate is unused.
        let s = s_from_fractions(prob, &fixed.t, beta);
        match fixed.eval(&s) {
            Ok((v, _)) => v,
            Err(_) => f64::NEG_INFINITY,
        }
    };

    let mut best_value = fixed.case1_value;
    let mut best_s = boundary;

    let n = prob.paths().len();
    if d == 1 {
        // One companion coordinate: scan plus golden-section refinement
        // is cheaper and just as reliable as a simplex here.
        let coord = (0..n)
            .find(|&idx| prob.paths().parent(idx).is_some())
            .expect("d == 1 implies one non-trivial path");
        let eval1 = |beta: f64, evals: &mut usize| -> f64 {
            let mut full = vec![0.0; n];
            full[coord] = beta;
            eval_beta(&full, evals)
        };
        let mut scan_best = (0.5, f64::NEG_INFINITY);
        for grid_idx in 0..=16 {
            let beta = grid_idx as f64 / 16.0;
            let v = eval1(beta, &mut evaluations);
            if v > scan_best.1 {
                scan_best = (beta, v);
            }
        }
        let lo = (scan_best.0 - 1.0 / 16.0).max(0.0);
        let hi = (scan_best.0 + 1.0 / 16.0).min(1.0);
        let (beta_star, neg_value) = optim::golden_section(
            |beta| -eval1(beta, &mut evaluations),
            lo,
            hi,
            1e-10,
            opts.inner_max_iters,
        );
        if -neg_value > best_value {
            best_value = -neg_value;
            let mut full = vec![0.0; n];
            full[coord] = beta_star;
            best_s = s_from_fractions(prob, &fixed.t, &full);
        }
        return Ok(InnerSup {
            value: best_value,
            s: best_s,
            evaluations,
        });
    }

    let mut starts: Vec<Vec<f64>> = vec![vec![0.5; n], vec![0.999; n], vec![0.001; n]];
    for extra in 3..opts.inner_starts {
        let h = low_discrepancy_point(extra as u64, d);
        let mut beta = vec![0.5; n];
        let mut di = 0;
        for idx in 0..n {
            if prob.paths().parent(idx).is_some() {
                beta[idx] = h[di];
                di += 1;
            }
        }
        starts.push(beta);
    }
    starts.truncate(opts.inner_starts.max(1));

    let nm_opts = NmOptions {
        max_iters: opts.inner_max_iters,
        f_tol: opts.tol,
        x_tol: 1e-10,
    };
    for start in starts {
        let scale = vec![0.25; n];
        let result = optim::nelder_mead(
            |beta| -eval_beta(beta, &mut evaluations),
            &start,
            &scale,
            nm_opts,
        );
        if -result.value > best_value {
            best_value = -result.value;
            best_s = s_from_fractions(prob, &fixed.t, &result.x);
        }
    }

    Ok(InnerSup {
        value: best_value,
        s: best_s,
        evaluations,
    })
}

/// The inner maximization on its own: `sup_s I(t, s)` at a fixed `t`,
/// returning the value and the maximizing companion vector.
pub fn rate_sup_over_s(
    net: &Network,
    kernel: &MfBmKernel,
    target: usize,
    b: f64,
    t: &[f64],
    opts: &DecayOptions,
) -> Result<(f64, Vec<f64>), DeviationsError> {
    let prob = RateProblem::new(net, kernel, target, b)?;
    prob.check_t_domain(t)?;
    let fixed = AtFixedT::new(&prob, t.to_vec())?;
    let sup = inner_sup(&fixed, opts)?;
    Ok((sup.value, sup.s))
}

/// Deterministic outer start list: log-spaced scalings of the
/// isolated-node heuristic, alternating coincident and spread gaps.
fn outer_starts(prob: &RateProblem, opts: &DecayOptions) -> Vec<Vec<f64>> {
    let h = prob.kernel.hurst(prob.target);
    let tau_heur = (prob.b / prob.mu_slack) * (h / (1.0 - h)).max(1e-3);
    let n = prob.paths().len();
    let d = prob.paths().nontrivial_count();
    let count = opts.starts.max(2);
    let mut starts = Vec::with_capacity(count + 1);
    if let Some(hint) = &opts.hint_t {
        if hint.len() == n && prob.check_t_domain(hint).is_ok() {
            starts.push(log_coords_from_t(prob, hint));
        }
    }
    for idx in 0..count {
        let u = if count == 1 {
            0.0
        } else {
            -1.0 + 2.0 * idx as f64 / (count - 1) as f64
        };
        let tau = tau_heur * 10f64.powf(u);
        let mut g = vec![0.0; n];
        for pos in 0..n {
            if pos == prob.paths().trivial_index() {
                g[pos] = tau.ln();
            } else if idx % 2 == 0 {
                g[pos] = GAP_FLOOR.ln();
            } else {
                g[pos] = (tau / (d as f64 + 1.0)).ln();
            }
        }
        starts.push(g);
    }
    starts
}

/// Numerically solves the inf-sup problem for the decay rate of the
/// overflow probability at `target`.
pub fn decay_lower_bound(
    net: &Network,
    kernel: &MfBmKernel,
    target: usize,
    b: f64,
    opts: &DecayOptions,
) -> Result<DecayResult, DeviationsError> {
    let prob = RateProblem::new(net, kernel, target, b)?;
    let mut diagnostics = OptimizerDiagnostics::default();

    let mut inner_evaluations = 0usize;
    let mut outer_evaluations = 0usize;
    let objective = |g: &[f64], inner_ev: &mut usize, outer_ev: &mut usize| -> f64 {
        *outer_ev += 1;
        let t = t_from_log_coords(&prob, g);
        let fixed = match AtFixedT::new(&prob, t) {
            Ok(f) => f,
            Err(_) => return f64::INFINITY,
        };
        match inner_sup(&fixed, opts) {
            Ok(sup) => {
                *inner_ev += sup.evaluations;
                sup.value
            }
            Err(_) => f64::INFINITY,
        }
    };

    let starts = outer_starts(&prob, opts);
    diagnostics.starts = starts.len();
    let nm_opts = NmOptions {
        max_iters: opts.outer_max_iters,
        f_tol: opts.tol,
        x_tol: 1e-9,
    };
    let mut best: Option<(f64, Vec<f64>, usize)> = None;
    for (idx, start) in starts.iter().enumerate() {
        let scale = vec![0.35; start.len()];
        let result = optim::nelder_mead(
            |g| objective(g, &mut inner_evaluations, &mut outer_evaluations),
            start,
            &scale,
            nm_opts,
        );
        if result.converged {
            diagnostics.converged_starts += 1;
        }
        if result.value.is_finite()
            && best.as_ref().map_or(true, |(v, _, _)| result.value < *v)
        {
            best = Some((result.value, result.x, idx));
        }
    }

    let (_, best_g, best_start) = best.ok_or_else(|| {
        DeviationsError::OptimizerFailure(
            "no start produced a finite inf-sup value within the budget".into(),
        )
    })?;

    // Polish from the incumbent with a tighter simplex.
    let polish = optim::nelder_mead(
        |g| objective(g, &mut inner_evaluations, &mut outer_evaluations),
        &best_g,
        &vec![0.05; best_g.len()],
        NmOptions {
            max_iters: opts.outer_max_iters,
            f_tol: opts.tol * 0.1,
            x_tol: 1e-10,
        },
    );

    diagnostics.best_start = best_start;
    diagnostics.outer_evaluations = outer_evaluations;
    diagnostics.inner_evaluations = inner_evaluations;

    let t_star = t_from_log_coords(&prob, &polish.x);
    let fixed = AtFixedT::new(&prob, t_star.clone())?;
    let sup = inner_sup(&fixed, opts)?;
    let (_, active_case) = fixed.eval(&sup.s)?;

    if !sup.value.is_finite() {
        return Err(DeviationsError::OptimizerFailure(
            "inf-sup value is not finite at the reported optimizer".into(),
        ));
    }

    Ok(DecayResult {
        exponent: sup.value,
        optimizer_t: t_star,
        optimizer_s: sup.s,
        active_case,
        tightness: Tightness::LowerBoundOnly,
        diagnostics,
    })
}
