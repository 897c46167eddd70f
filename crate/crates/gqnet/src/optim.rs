//! Derivative-free minimizers used by the rate-function optimization:
//! a Nelder-Mead simplex, a golden-section line search, and a Halton
//! low-discrepancy sequence for condition-violation sweeps.
//!
//! The objectives these serve are piecewise smooth with case switches,
//! so everything here avoids gradients. All routines are deterministic.

/// Outcome of a simplex minimization.
#[derive(Debug, Clone)]
pub struct NmResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
    pub iters: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct NmOptions {
    pub max_iters: usize,
    /// Relative spread of simplex function values at which to stop.
    pub f_tol: f64,
    /// Absolute spread of simplex vertices at which to stop.
    pub x_tol: f64,
}

impl Default for NmOptions {
    fn default() -> Self {
        NmOptions {
            max_iters: 400,
            f_tol: 1e-12,
            x_tol: 1e-11,
        }
    }
}

/// Nelder-Mead downhill simplex. `scale` sets the initial simplex edge
/// per coordinate; any constraint handling (clamping, reparameterization)
/// belongs inside `f`.
pub fn nelder_mead<F>(mut f: F, x0: &[f64], scale: &[f64], opts: NmOptions) -> NmResult
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    assert_eq!(scale.len(), n);
    if n == 0 {
        let value = f(x0);
        return NmResult {
            x: Vec::new(),
            value,
            evals: 1,
            iters: 0,
            converged: true,
        };
    }
    let (alpha, gamma, rho, shrink) = (1.0, 2.0, 0.5, 0.5);
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += if scale[i] != 0.0 { scale[i] } else { 1e-3 };
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| eval(v, &mut evals)).collect();

    let mut iters = 0usize;
    let mut converged = false;
    while iters < opts.max_iters {
        iters += 1;
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
        let reorder_s: Vec<Vec<f64>> = order.iter().map(|&i| simplex[i].clone()).collect();
        let reorder_v: Vec<f64> = order.iter().map(|&i| values[i]).collect();
        simplex = reorder_s;
        values = reorder_v;

        let f_best = values[0];
        let f_worst = values[n];
        let f_spread = (f_worst - f_best).abs();
        let x_spread = (0..n)
            .map(|d| {
                simplex
                    .iter()
                    .map(|v| v[d])
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
                        (lo.min(x), hi.max(x))
                    })
            })
            .map(|(lo, hi)| hi - lo)
            .fold(0.0f64, f64::max);
        if f_spread <= opts.f_tol * (1.0 + f_best.abs()) && x_spread <= opts.x_tol {
            converged = true;
            break;
        }

        let centroid: Vec<f64> = (0..n)
            .map(|d| simplex[..n].iter().map(|v| v[d]).sum::<f64>() / n as f64)
            .collect();
        let reflect: Vec<f64> = (0..n)
            .map(|d| centroid[d] + alpha * (centroid[d] - simplex[n][d]))
            .collect();
        let f_reflect = eval(&reflect, &mut evals);

        if f_reflect < values[0] {
            let expand: Vec<f64> = (0..n)
                .map(|d| centroid[d] + gamma * (reflect[d] - centroid[d]))
                .collect();
            let f_expand = eval(&expand, &mut evals);
            if f_expand < f_reflect {
                simplex[n] = expand;
                values[n] = f_expand;
            } else {
                simplex[n] = reflect;
                values[n] = f_reflect;
            }
        } else if f_reflect < values[n - 1] {
            simplex[n] = reflect;
            values[n] = f_reflect;
        } else {
            let (base, f_base) = if f_reflect < values[n] {
                (reflect.clone(), f_reflect)
            } else {
                (simplex[n].clone(), values[n])
            };
            let contract: Vec<f64> = (0..n)
                .map(|d| centroid[d] + rho * (base[d] - centroid[d]))
                .collect();
            let f_contract = eval(&contract, &mut evals);
            if f_contract < f_base {
                simplex[n] = contract;
                values[n] = f_contract;
            } else {
                for i in 1..=n {
                    let v: Vec<f64> = (0..n)
                        .map(|d| simplex[0][d] + shrink * (simplex[i][d] - simplex[0][d]))
                        .collect();
                    values[i] = eval(&v, &mut evals);
                    simplex[i] = v;
                }
            }
        }
    }

    let mut best = 0;
    for i in 1..=n {
        if values[i] < values[best] {
            best = i;
        }
    }
    NmResult {
        x: simplex[best].clone(),
        value: values[best],
        evals,
        iters,
        converged,
    }
}

/// Golden-section minimization of a unimodal `f` on `[a, b]`.
pub fn golden_section<F>(mut f: F, a: f64, b: f64, tol: f64, max_iters: usize) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    let inv_phi = 0.5 * (5.0_f64.sqrt() - 1.0);
    let (mut lo, mut hi) = (a.min(b), a.max(b));
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..max_iters {
        if (hi - lo).abs() <= tol * (1.0 + lo.abs() + hi.abs()) {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Root of `x^{d+1} = x + 1`, the base of the `R_d` low-discrepancy
/// sequence (golden ratio for `d = 1`, plastic number for `d = 2`).
fn harmonious_number(d: usize) -> f64 {
    let p = (d + 1) as f64;
    let mut x = 1.5f64;
    for _ in 0..64 {
        x = (x + 1.0).powf(1.0 / p);
    }
    x
}

/// `idx`-th point (1-based) of the additive-recurrence `R_d` sequence in
/// `dims` dimensions, each coordinate in `(0, 1)`. Works in any dimension.
pub fn low_discrepancy_point(idx: u64, dims: usize) -> Vec<f64> {
    assert!(dims > 0);
    let phi = harmonious_number(dims);
    (0..dims)
        .map(|d| {
            let alpha = phi.powi(-(d as i32 + 1));
            let v = 0.5 + alpha * idx as f64;
            let frac = v - v.floor();
            // Keep strictly interior for callers that divide by coordinates.
            frac.clamp(1e-12, 1.0 - 1e-12)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_bowl_minimum() {
        let f = |x: &[f64]| (x[0] - 1.0).powi(2) + 2.0 * (x[1] + 0.5).powi(2);
        let r = nelder_mead(f, &[3.0, 3.0], &[0.5, 0.5], NmOptions::default());
        assert!(r.converged);
        assert!((r.x[0] - 1.0).abs() < 1e-6, "x0 = {}", r.x[0]);
        assert!((r.x[1] + 0.5).abs() < 1e-6, "x1 = {}", r.x[1]);
        assert!(r.value < 1e-11);
    }

    #[test]
    fn zero_dimensional_objective() {
        let r = nelder_mead(|_| 7.0, &[], &[], NmOptions::default());
        assert_eq!(r.value, 7.0);
        assert!(r.converged);
    }

    #[test]
    fn golden_section_quartic() {
        let (x, v) = golden_section(|x| (x - 0.3).powi(4), -2.0, 5.0, 1e-12, 200);
        assert!((x - 0.3).abs() < 1e-3);
        assert!(v < 1e-11);
    }

    #[test]
    fn low_discrepancy_points_fill_unit_cube() {
        // Interior, deterministic, and reasonably spread: the 1-D gaps of
        // the first 64 points must be well below the uniform-random worst
        // case.
        let mut xs: Vec<f64> = (1..=64).map(|i| low_discrepancy_point(i, 1)[0]).collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!(xs.iter().all(|&x| x > 0.0 && x < 1.0));
        let max_gap = xs
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0f64, f64::max);
        assert!(max_gap < 0.08, "max gap {max_gap}");
        for dims in [2usize, 5, 17] {
            let p = low_discrepancy_point(7, dims);
            assert_eq!(p.len(), dims);
            assert!(p.iter().all(|&x| x > 0.0 && x < 1.0));
        }
    }
}
