//! Acyclic queueing-network topology: routing, directed paths ending at a
//! target node, effective arrival rates, and stability validation.
//!
//! Node ids are dense 0-based integers. Routing is stored as a dense
//! `k×k` matrix of split fractions; the implicit leave fraction at node
//! `i` is `1 - sum_j p[i][j]`.

use thiserror::Error;

/// Default cap on the number of materialized paths ending at one node.
pub const DEFAULT_PATH_CAP: usize = 64;

/// Tolerance below which a routing row sum may exceed one (float slop).
const ROUTING_SUM_SLOP: f64 = 1e-12;

/// Relative slack threshold for the near-critical stability warning.
const NEAR_CRITICAL_REL: f64 = 1e-9;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum NetworkError {
    #[error("node count must be positive")]
    EmptyNetwork,
    #[error("node {node}: service rate must be positive (got {value})")]
    BadServiceRate { node: usize, value: f64 },
    #[error("node {node}: drift must be nonnegative and finite (got {value})")]
    BadDrift { node: usize, value: f64 },
    #[error("edge ({from},{to}): split fraction must lie in (0,1] (got {p})")]
    BadSplitFraction { from: usize, to: usize, p: f64 },
    #[error("edge ({from},{to}): node id out of range (k = {k})")]
    EdgeOutOfRange { from: usize, to: usize, k: usize },
    #[error("edge ({from},{to}) declared twice")]
    DuplicateEdge { from: usize, to: usize },
    #[error("self-loop at node {node} is not allowed")]
    SelfLoop { node: usize },
    #[error("node {node}: outgoing split fractions sum to {sum} > 1")]
    RoutingRowExceedsOne { node: usize, sum: f64 },
    #[error("routing graph contains a directed cycle")]
    CyclicGraph,
    #[error("node {node} is unstable: mu - lambda_bar = {slack} <= 0")]
    Unstable { node: usize, slack: f64 },
    #[error("sequence is not a directed path of this network")]
    InvalidPath,
    #[error("node {node}: {count} paths end here, exceeding the cap of {cap}")]
    TooManyPaths { node: usize, count: usize, cap: usize },
    #[error("node id {node} out of range (k = {k})")]
    NodeOutOfRange { node: usize, k: usize },
}

/// A directed path, stored as its node sequence. The last entry is the
/// target node; the trivial path `(i)` has length one and weight one.
pub type Path = Vec<usize>;

/// Acyclic network of single-server fluid queues with deterministic
/// routing splits.
#[derive(Debug, Clone)]
pub struct Network {
    mu: Vec<f64>,
    lambda: Vec<f64>,
    routing: Vec<Vec<f64>>,
    path_cap: usize,
}

/// Result of [`Network::validate`]: per-node effective rates and slacks.
#[derive(Debug, Clone)]
pub struct ValidationReport {
    /// A topological order certifying acyclicity.
    pub topo_order: Vec<usize>,
    /// Effective arrival rate `lambda_bar` per node.
    pub lambda_bar: Vec<f64>,
    /// Stability slack `mu - lambda_bar` per node (strictly positive).
    pub slack: Vec<f64>,
    /// Nodes whose slack is below `1e-9 * mu` (stable but near critical).
    pub near_critical: Vec<usize>,
}

/// Effective rate and aggregate variance of one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeAggregates {
    pub lambda_bar: f64,
    pub sigma_bar_sq: f64,
}

impl Network {
    /// Builds a network from per-node rates and an explicit edge list.
    /// Field ranges and routing row sums are checked here; acyclicity
    /// and stability are checked by [`Network::validate`].
    pub fn new(
        mu: Vec<f64>,
        lambda: Vec<f64>,
        edges: &[(usize, usize, f64)],
    ) -> Result<Self, NetworkError> {
        let k = mu.len();
        if k == 0 {
            return Err(NetworkError::EmptyNetwork);
        }
        assert_eq!(lambda.len(), k, "mu and lambda must have equal length");
        for (i, &m) in mu.iter().enumerate() {
            if !(m > 0.0) || !m.is_finite() {
                return Err(NetworkError::BadServiceRate { node: i, value: m });
            }
        }
        for (i, &l) in lambda.iter().enumerate() {
            if !(l >= 0.0) || !l.is_finite() {
                return Err(NetworkError::BadDrift { node: i, value: l });
            }
        }
        let mut routing = vec![vec![0.0; k]; k];
        for &(from, to, p) in edges {
            if from >= k || to >= k {
                return Err(NetworkError::EdgeOutOfRange { from, to, k });
            }
            if from == to {
                return Err(NetworkError::SelfLoop { node: from });
            }
            if !(p > 0.0 && p <= 1.0) {
                return Err(NetworkError::BadSplitFraction { from, to, p });
            }
            if routing[from][to] != 0.0 {
                return Err(NetworkError::DuplicateEdge { from, to });
            }
            routing[from][to] = p;
        }
        for i in 0..k {
            let sum: f64 = routing[i].iter().sum();
            if sum > 1.0 + ROUTING_SUM_SLOP {
                return Err(NetworkError::RoutingRowExceedsOne { node: i, sum });
            }
        }
        Ok(Network {
            mu,
            lambda,
            routing,
            path_cap: DEFAULT_PATH_CAP,
        })
    }

    /// Overrides the cap on materialized path-set sizes.
    pub fn with_path_cap(mut self, cap: usize) -> Self {
        self.path_cap = cap.max(1);
        self
    }

    pub fn node_count(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self, i: usize) -> f64 {
        self.mu[i]
    }

    pub fn lambda(&self, i: usize) -> f64 {
        self.lambda[i]
    }

    /// Split fraction on edge `(i,j)`; zero when the edge is absent.
    pub fn split(&self, i: usize, j: usize) -> f64 {
        self.routing[i][j]
    }

    /// Fraction of work departing node `i` that leaves the network.
    pub fn leave_fraction(&self, i: usize) -> f64 {
        (1.0 - self.routing[i].iter().sum::<f64>()).max(0.0)
    }

    pub fn path_cap(&self) -> usize {
        self.path_cap
    }

    /// Inbound neighbors of `i`.
    pub fn inbound(&self, i: usize) -> Vec<usize> {
        (0..self.node_count())
            .filter(|&j| self.routing[j][i] > 0.0)
            .collect()
    }

    fn check_node(&self, i: usize) -> Result<(), NetworkError> {
        if i >= self.node_count() {
            return Err(NetworkError::NodeOutOfRange {
                node: i,
                k: self.node_count(),
            });
        }
        Ok(())
    }

    /// Kahn topological order over the edge set, or `CyclicGraph`.
    pub fn topo_order(&self) -> Result<Vec<usize>, NetworkError> {
        let k = self.node_count();
        let mut indegree = vec![0usize; k];
        for i in 0..k {
            for j in 0..k {
                if self.routing[i][j] > 0.0 {
                    indegree[j] += 1;
                }
            }
        }
        let mut ready: Vec<usize> = (0..k).filter(|&i| indegree[i] == 0).collect();
        let mut order = Vec::with_capacity(k);
        while let Some(i) = ready.pop() {
            order.push(i);
            for j in 0..k {
                if self.routing[i][j] > 0.0 {
                    indegree[j] -= 1;
                    if indegree[j] == 0 {
                        ready.push(j);
                    }
                }
            }
        }
        if order.len() != k {
            return Err(NetworkError::CyclicGraph);
        }
        Ok(order)
    }

    /// Effective arrival rates, solved in topological order via the fixed
    /// point `lambda_bar[i] = lambda[i] + sum_j p[j][i] lambda_bar[j]`.
    pub fn lambda_bar(&self) -> Result<Vec<f64>, NetworkError> {
        let order = self.topo_order()?;
        let mut bar = vec![0.0; self.node_count()];
        for &i in &order {
            let mut v = self.lambda[i];
            for j in self.inbound(i) {
                v += self.routing[j][i] * bar[j];
            }
            bar[i] = v;
        }
        Ok(bar)
    }

    /// Checks acyclicity and per-node stability `lambda_bar < mu`.
    pub fn validate(&self) -> Result<ValidationReport, NetworkError> {
        let topo_order = self.topo_order()?;
        let lambda_bar = self.lambda_bar()?;
        let mut slack = Vec::with_capacity(self.node_count());
        let mut near_critical = Vec::new();
        for i in 0..self.node_count() {
            let s = self.mu[i] - lambda_bar[i];
            if s <= 0.0 {
                return Err(NetworkError::Unstable { node: i, slack: s });
            }
            if s < NEAR_CRITICAL_REL * self.mu[i] {
                near_critical.push(i);
            }
            slack.push(s);
        }
        Ok(ValidationReport {
            topo_order,
            lambda_bar,
            slack,
            near_critical,
        })
    }

    /// All directed paths with at least `min_len` nodes ending at `target`,
    /// in lexicographic order on node sequences.
    pub fn enumerate_paths(&self, target: usize, min_len: usize) -> Result<Vec<Path>, NetworkError> {
        self.check_node(target)?;
        assert!(min_len >= 1, "min_len must be at least 1");
        let mut out = Vec::new();
        let mut current = vec![target];
        self.extend_backward(&mut current, &mut out)?;
        out.retain(|r| r.len() >= min_len);
        out.sort();
        Ok(out)
    }

    fn extend_backward(&self, current: &mut Path, out: &mut Vec<Path>) -> Result<(), NetworkError> {
        out.push(current.clone());
        if out.len() > self.path_cap {
            let target = *current.last().unwrap();
            return Err(NetworkError::TooManyPaths {
                node: target,
                count: out.len(),
                cap: self.path_cap,
            });
        }
        let head = current[0];
        for j in self.inbound(head) {
            // A DAG admits no repeated nodes on a directed path, so no
            // visited check is needed; the recursion terminates.
            current.insert(0, j);
            self.extend_backward(current, out)?;
            current.remove(0);
        }
        Ok(())
    }

    /// Product of split fractions along consecutive edges of `r`;
    /// the trivial path has weight one.
    pub fn path_weight(&self, r: &[usize]) -> Result<f64, NetworkError> {
        if r.is_empty() {
            return Err(NetworkError::InvalidPath);
        }
        for &v in r {
            self.check_node(v)?;
        }
        let mut w = 1.0;
        for pair in r.windows(2) {
            let p = self.routing[pair[0]][pair[1]];
            if p == 0.0 {
                return Err(NetworkError::InvalidPath);
            }
            w *= p;
        }
        Ok(w)
    }

    /// Effective rate and aggregate mfBm variance of node `i`.
    ///
    /// `sigma` and `rho` are the per-node volatilities and the instantaneous
    /// correlation matrix of the input processes.
    pub fn node_aggregates(
        &self,
        sigma: &[f64],
        rho: &[Vec<f64>],
        i: usize,
    ) -> Result<NodeAggregates, NetworkError> {
        self.check_node(i)?;
        let lambda_bar = self.lambda_bar()?[i];
        let paths = PathSet::for_target(self, i)?;
        let mut var = sigma[i] * sigma[i];
        for a in 0..paths.len() {
            if a == paths.trivial_index() {
                continue;
            }
            let na = paths.first_node(a);
            let mut term = 2.0 * sigma[na] * sigma[i] * rho[na][i];
            for b in 0..paths.len() {
                if b == paths.trivial_index() {
                    continue;
                }
                let nb = paths.first_node(b);
                term += sigma[na] * sigma[nb] * rho[na][nb] * paths.weight(b);
            }
            var += term * paths.weight(a);
        }
        Ok(NodeAggregates {
            lambda_bar,
            sigma_bar_sq: var,
        })
    }
}

/// The materialized set `P_1(i)` of all directed paths ending at a fixed
/// target, with weights and the parent links `r -> r_+` used to express
/// the ordered time cones.
#[derive(Debug, Clone)]
pub struct PathSet {
    target: usize,
    paths: Vec<Path>,
    weights: Vec<f64>,
    first_nodes: Vec<usize>,
    /// Index of `r_+` (the path with the first node removed); `None` for
    /// the trivial path.
    parents: Vec<Option<usize>>,
    trivial: usize,
    /// Indices ordered so every parent precedes its children.
    eval_order: Vec<usize>,
}

impl PathSet {
    pub fn for_target(net: &Network, target: usize) -> Result<Self, NetworkError> {
        let paths = net.enumerate_paths(target, 1)?;
        let weights: Vec<f64> = paths
            .iter()
            .map(|r| net.path_weight(r))
            .collect::<Result<_, _>>()?;
        let first_nodes: Vec<usize> = paths.iter().map(|r| r[0]).collect();
        let find = |seq: &[usize]| paths.iter().position(|p| p == seq);
        let mut parents = Vec::with_capacity(paths.len());
        let mut trivial = None;
        for (idx, r) in paths.iter().enumerate() {
            if r.len() == 1 {
                trivial = Some(idx);
                parents.push(None);
            } else {
                let parent = find(&r[1..]).expect("parent path must be enumerated");
                parents.push(Some(parent));
            }
        }
        let mut eval_order: Vec<usize> = (0..paths.len()).collect();
        eval_order.sort_by_key(|&idx| (paths[idx].len(), paths[idx].clone()));
        Ok(PathSet {
            target,
            paths,
            weights,
            first_nodes,
            parents,
            trivial: trivial.expect("trivial path is always present"),
            eval_order,
        })
    }

    pub fn target(&self) -> usize {
        self.target
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn path(&self, idx: usize) -> &Path {
        &self.paths[idx]
    }

    pub fn paths(&self) -> &[Path] {
        &self.paths
    }

    pub fn weight(&self, idx: usize) -> f64 {
        self.weights[idx]
    }

    pub fn first_node(&self, idx: usize) -> usize {
        self.first_nodes[idx]
    }

    pub fn parent(&self, idx: usize) -> Option<usize> {
        self.parents[idx]
    }

    /// Index of the trivial path `(target)`.
    pub fn trivial_index(&self) -> usize {
        self.trivial
    }

    /// Path indices in parent-before-child order.
    pub fn eval_order(&self) -> &[usize] {
        &self.eval_order
    }

    /// Number of non-trivial paths, i.e. `|P_2(target)|`.
    pub fn nontrivial_count(&self) -> usize {
        self.len() - 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tandem(mu: [f64; 2], lambda: [f64; 2]) -> Network {
        Network::new(mu.to_vec(), lambda.to_vec(), &[(0, 1, 1.0)]).unwrap()
    }

    #[test]
    fn tandem_is_stable_with_unit_slacks() {
        let net = tandem([2.0, 2.0], [1.0, 0.0]);
        let report = net.validate().unwrap();
        assert_eq!(report.lambda_bar, vec![1.0, 1.0]);
        assert_eq!(report.slack, vec![1.0, 1.0]);
        assert!(report.near_critical.is_empty());
    }

    #[test]
    fn critical_service_rate_is_unstable() {
        let net = tandem([2.0, 1.0], [1.0, 0.0]);
        match net.validate() {
            Err(NetworkError::Unstable { node: 1, slack }) => assert_eq!(slack, 0.0),
            other => panic!("expected Unstable(1, 0), got {other:?}"),
        }
    }

    #[test]
    fn two_cycle_is_rejected() {
        let net = Network::new(
            vec![2.0, 2.0],
            vec![1.0, 0.0],
            &[(0, 1, 0.5), (1, 0, 0.5)],
        )
        .unwrap();
        assert_eq!(net.topo_order(), Err(NetworkError::CyclicGraph));
    }

    #[test]
    fn routing_row_above_one_is_rejected() {
        let err = Network::new(
            vec![1.0, 1.0, 1.0],
            vec![0.1; 3],
            &[(0, 1, 0.7), (0, 2, 0.7)],
        )
        .unwrap_err();
        assert!(matches!(err, NetworkError::RoutingRowExceedsOne { node: 0, .. }));
    }

    #[test]
    fn tandem_path_sets() {
        let net = tandem([2.0, 2.0], [1.0, 0.0]);
        assert_eq!(net.enumerate_paths(1, 1).unwrap(), vec![vec![0, 1], vec![1]]);
        assert_eq!(net.enumerate_paths(1, 2).unwrap(), vec![vec![0, 1]]);
    }

    #[test]
    fn diamond_paths_match_dfs_oracle() {
        // 0 -> 1, 0 -> 2, 1 -> 3, 2 -> 3
        let net = Network::new(
            vec![4.0; 4],
            vec![1.0, 0.0, 0.0, 0.0],
            &[(0, 1, 0.5), (0, 2, 0.5), (1, 3, 1.0), (2, 3, 1.0)],
        )
        .unwrap();
        let got = net.enumerate_paths(3, 2).unwrap();
        let expected: Vec<Path> = vec![vec![0, 1, 3], vec![0, 2, 3], vec![1, 3], vec![2, 3]];
        assert_eq!(got, expected);
    }

    #[test]
    fn path_weights() {
        let net = Network::new(
            vec![4.0; 4],
            vec![1.0, 0.0, 0.0, 0.0],
            &[(0, 1, 0.5), (1, 3, 0.4), (0, 2, 0.3)],
        )
        .unwrap();
        assert_eq!(net.path_weight(&[1]).unwrap(), 1.0);
        assert_eq!(net.path_weight(&[0, 1]).unwrap(), 0.5);
        assert!((net.path_weight(&[0, 1, 3]).unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(net.path_weight(&[0, 3]), Err(NetworkError::InvalidPath));
    }

    #[test]
    fn lambda_bar_sums_weighted_paths() {
        let net = Network::new(vec![4.0, 4.0], vec![1.0, 0.5], &[(0, 1, 1.0)]).unwrap();
        let bar = net.lambda_bar().unwrap();
        assert!((bar[1] - 1.5).abs() < 1e-15);
    }

    #[test]
    fn isolated_node_aggregates() {
        let net = Network::new(vec![3.0], vec![1.0], &[]).unwrap();
        let agg = net
            .node_aggregates(&[2.0], &[vec![1.0]], 0)
            .unwrap();
        assert_eq!(agg.lambda_bar, 1.0);
        assert_eq!(agg.sigma_bar_sq, 4.0);
    }

    #[test]
    fn tandem_aggregate_variance_independent_inputs() {
        let net = tandem([4.0, 2.0], [1.0, 0.0]);
        let rho = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let agg = net.node_aggregates(&[1.0, 1.0], &rho, 1).unwrap();
        assert!((agg.sigma_bar_sq - 2.0).abs() < 1e-15);
    }

    #[test]
    fn path_cap_is_enforced() {
        // Complete DAG on 8 nodes has 2^6 = 64 paths into the last node
        // from node 0 alone; the default cap of 64 must trip.
        let mut edges = Vec::new();
        for i in 0..8usize {
            for j in (i + 1)..8usize {
                edges.push((i, j, 1.0 / 8.0));
            }
        }
        let net = Network::new(vec![10.0; 8], vec![0.1; 8], &edges).unwrap();
        let err = net.enumerate_paths(7, 1).unwrap_err();
        assert!(matches!(err, NetworkError::TooManyPaths { .. }));
        let relaxed = net.clone().with_path_cap(1 << 10);
        assert!(relaxed.enumerate_paths(7, 1).is_ok());
    }

    #[test]
    fn pathset_parents_and_order() {
        let net = Network::new(
            vec![4.0; 3],
            vec![1.0, 0.0, 0.0],
            &[(0, 1, 0.5), (1, 2, 0.5), (0, 2, 0.5)],
        )
        .unwrap();
        let ps = PathSet::for_target(&net, 2).unwrap();
        // P_1(2) = {(2), (0,2), (1,2), (0,1,2)}
        assert_eq!(ps.len(), 4);
        let trivial = ps.trivial_index();
        assert_eq!(ps.path(trivial), &vec![2]);
        for idx in 0..ps.len() {
            match ps.parent(idx) {
                None => assert_eq!(idx, trivial),
                Some(p) => assert_eq!(ps.path(p).as_slice(), &ps.path(idx)[1..]),
            }
        }
        // Parents precede children in eval order.
        let pos: Vec<usize> = {
            let mut pos = vec![0; ps.len()];
            for (rank, &idx) in ps.eval_order().iter().enumerate() {
                pos[idx] = rank;
            }
            pos
        };
        for idx in 0..ps.len() {
            if let Some(p) = ps.parent(idx) {
                assert!(pos[p] < pos[idx]);
            }
        }
    }
}
