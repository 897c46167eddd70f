#![allow(dead_code)]

//! Shared generators for randomized test sweeps. Everything is seeded
//! ChaCha, so failures reproduce.

use gqnet::deviations::RateProblem;
use gqnet::{MfBmKernel, Network};
use rand::Rng;
use rand_chacha::ChaCha12Rng;

/// A random stable DAG on up to `max_nodes` nodes whose target path set
/// stays small enough for the optimizer sweeps.
pub fn random_stable_network(
    rng: &mut ChaCha12Rng,
    max_nodes: usize,
    max_paths: usize,
) -> (Network, usize) {
    loop {
        let k = rng.random_range(2..=max_nodes);
        let mut edges = Vec::new();
        let mut raw = vec![vec![0.0f64; k]; k];
        for i in 0..k {
            for j in (i + 1)..k {
                if rng.random_bool(0.45) {
                    raw[i][j] = rng.random_range(0.2..1.0);
                }
            }
        }
        for row in raw.iter_mut() {
            let sum: f64 = row.iter().sum();
            if sum > 0.95 {
                for v in row.iter_mut() {
                    *v *= 0.95 / sum;
                }
            }
        }
        for (i, row) in raw.iter().enumerate() {
            for (j, &p) in row.iter().enumerate() {
                if p > 0.0 {
                    edges.push((i, j, p));
                }
            }
        }
        let lambda: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..1.2)).collect();
        // Effective rates along the node order (edges only go forward).
        let mut bar = lambda.clone();
        for j in 0..k {
            for i in 0..j {
                if raw[i][j] > 0.0 {
                    bar[j] += raw[i][j] * bar[i];
                }
            }
        }
        let mu: Vec<f64> = bar
            .iter()
            .map(|&lb| lb + rng.random_range(0.3..1.5))
            .collect();
        let net = match Network::new(mu, lambda, &edges) {
            Ok(n) => n,
            Err(_) => continue,
        };
        if net.validate().is_err() {
            continue;
        }
        // Target the sink-most node with at least one inbound path when
        // possible, keeping the path set small.
        let target = k - 1;
        match net.enumerate_paths(target, 1) {
            Ok(paths) if paths.len() <= max_paths => return (net, target),
            _ => continue,
        }
    }
}

/// Independent-coordinate kernel with per-node Hurst indices in the
/// given range (always admissible).
pub fn random_independent_kernel(
    rng: &mut ChaCha12Rng,
    k: usize,
    hurst_lo: f64,
    hurst_hi: f64,
) -> MfBmKernel {
    let hurst: Vec<f64> = (0..k).map(|_| rng.random_range(hurst_lo..hurst_hi)).collect();
    let sigma: Vec<f64> = (0..k).map(|_| rng.random_range(0.5..2.0)).collect();
    MfBmKernel::independent(hurst, sigma).unwrap()
}

/// Equal-Hurst kernel with a random nonnegative-definite correlation
/// matrix (built from random factors, then floored at zero), admissible
/// by the Kronecker structure of the equal-Hurst case.
pub fn random_equal_hurst_kernel(rng: &mut ChaCha12Rng, k: usize, h: f64) -> MfBmKernel {
    let sigma: Vec<f64> = (0..k).map(|_| rng.random_range(0.5..2.0)).collect();
    // rho = normalized Gram of random nonnegative factor rows.
    let m = k + 2;
    let factors: Vec<Vec<f64>> = (0..k)
        .map(|_| (0..m).map(|_| rng.random_range(0.0..1.0)).collect())
        .collect();
    let mut rho = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in 0..k {
            let dot: f64 = factors[i].iter().zip(&factors[j]).map(|(a, b)| a * b).sum();
            let ni: f64 = factors[i].iter().map(|a| a * a).sum::<f64>().sqrt();
            let nj: f64 = factors[j].iter().map(|a| a * a).sum::<f64>().sqrt();
            rho[i][j] = if i == j { 1.0 } else { dot / (ni * nj) };
        }
    }
    let eta = vec![vec![0.0; k]; k];
    MfBmKernel::new(vec![h; k], sigma, rho, eta).unwrap()
}

/// A random point of the ordered start-time cone for the target's path
/// set, with its companion vector.
pub fn random_cone_point(
    rng: &mut ChaCha12Rng,
    prob: &RateProblem,
) -> (Vec<f64>, Vec<f64>) {
    let paths = prob.paths();
    let n = paths.len();
    let mut t = vec![0.0; n];
    for &idx in paths.eval_order() {
        match paths.parent(idx) {
            None => t[idx] = -rng.random_range(0.2..3.0),
            Some(parent) => t[idx] = t[parent] - rng.random_range(0.05..1.5),
        }
    }
    let mut s = vec![0.0; n];
    for &idx in paths.eval_order() {
        match paths.parent(idx) {
            None => s[idx] = 0.0,
            Some(parent) => {
                let frac: f64 = rng.random_range(0.05..0.95);
                s[idx] = t[idx] + frac * (s[parent] - t[idx]);
            }
        }
    }
    (t, s)
}
