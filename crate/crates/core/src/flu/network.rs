//! Undirected contact networks and the configuration-model generator.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::rng::RngStream;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    /// Contact intensity rate.
    pub lambda: f64,
}

/// Immutable simple graph with per-edge intensities. Edges are stored with
/// `i < j` in the order they were given.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawNetwork", into = "RawNetwork")]
pub struct ContactNetwork {
    nodes: usize,
    edges: Vec<Edge>,
    /// `(neighbor, edge index)` per node.
    adjacency: Vec<Vec<(usize, usize)>>,
}

#[derive(Serialize, Deserialize)]
struct RawNetwork {
    nodes: usize,
    edges: Vec<Edge>,
}

impl TryFrom<RawNetwork> for ContactNetwork {
    type Error = Error;
    fn try_from(raw: RawNetwork) -> Result<Self> {
        Self::from_edges(raw.nodes, raw.edges)
    }
}

impl From<ContactNetwork> for RawNetwork {
    fn from(n: ContactNetwork) -> Self {
        Self {
            nodes: n.nodes,
            edges: n.edges,
        }
    }
}

impl ContactNetwork {
    pub fn from_edges(nodes: usize, edges: Vec<Edge>) -> Result<Self> {
        ensure!(nodes >= 2, "a contact network needs at least 2 nodes");
        let mut seen = BTreeSet::new();
        let mut adjacency = vec![Vec::new(); nodes];
        let mut normalized = Vec::with_capacity(edges.len());
        for (idx, e) in edges.into_iter().enumerate() {
            ensure!(e.i < nodes && e.j < nodes, "edge {idx} ({}, {}) names a missing node", e.i, e.j);
            ensure!(e.i != e.j, "edge {idx} is a self-loop on node {}", e.i);
            ensure!(
                e.lambda.is_finite() && e.lambda > 0.0,
                "edge {idx} has non-positive intensity {}",
                e.lambda
            );
            let (i, j) = (e.i.min(e.j), e.i.max(e.j));
            ensure!(seen.insert((i, j)), "edge ({i}, {j}) appears twice");
            adjacency[i].push((j, idx));
            adjacency[j].push((i, idx));
            normalized.push(Edge { i, j, lambda: e.lambda });
        }
        Ok(Self {
            nodes,
            edges: normalized,
            adjacency,
        })
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn neighbors(&self, node: usize) -> &[(usize, usize)] {
        &self.adjacency[node]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.adjacency[node].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.adjacency.iter().map(Vec::len).collect()
    }

    pub fn mean_degree(&self) -> f64 {
        2.0 * self.edges.len() as f64 / self.nodes as f64
    }

    /// Same graph with every intensity set to `lambda`.
    pub fn with_uniform_lambda(&self, lambda: f64) -> Result<Self> {
        let edges = self.edges.iter().map(|e| Edge { lambda, ..*e }).collect();
        Self::from_edges(self.nodes, edges)
    }
}

/// Degree distribution of a generated network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DegreeSpec {
    /// Ring where every node links to its `k / 2` nearest neighbors on each
    /// side.
    RingLattice { k: usize },
    Regular { degree: usize },
    Poisson { mean: f64 },
    /// `P(k) ~ k^-exponent` on `min_degree..=max_degree`.
    PowerLaw {
        exponent: f64,
        min_degree: usize,
        max_degree: usize,
    },
    Explicit { degrees: Vec<usize> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSpec {
    pub nodes: usize,
    pub degrees: DegreeSpec,
    /// Intensity given to every generated edge.
    pub lambda: f64,
}

impl Default for NetworkSpec {
    fn default() -> Self {
        Self {
            nodes: 2000,
            degrees: DegreeSpec::PowerLaw {
                exponent: 2.5,
                min_degree: 2,
                max_degree: 60,
            },
            lambda: 0.5,
        }
    }
}

impl DegreeSpec {
    /// Mean of the target distribution.
    pub fn expected_mean(&self, nodes: usize) -> f64 {
        match self {
            Self::RingLattice { k } => *k as f64,
            Self::Regular { degree } => *degree as f64,
            Self::Poisson { mean } => *mean,
            Self::PowerLaw {
                exponent,
                min_degree,
                max_degree,
            } => {
                let (mut z, mut m) = (0.0, 0.0);
                for k in *min_degree..=*max_degree {
                    let w = libm::pow(k as f64, -exponent);
                    z += w;
                    m += k as f64 * w;
                }
                m / z
            }
            Self::Explicit { degrees } => {
                degrees.iter().sum::<usize>() as f64 / nodes.max(1) as f64
            }
        }
    }

    fn validate(&self, nodes: usize) -> Result<()> {
        match self {
            Self::RingLattice { k } => ensure!(
                *k >= 2 && k % 2 == 0 && *k < nodes,
                "ring lattice needs an even k in 2..{nodes}"
            ),
            Self::Regular { degree } => ensure!(
                *degree < nodes && (degree * nodes).is_multiple_of(2),
                "no {degree}-regular graph on {nodes} nodes"
            ),
            Self::Poisson { mean } => ensure!(
                mean.is_finite() && *mean > 0.0 && *mean <= 100.0,
                "Poisson mean {mean} outside (0, 100]"
            ),
            Self::PowerLaw {
                exponent,
                min_degree,
                max_degree,
            } => ensure!(
                exponent.is_finite()
                    && *exponent > 0.0
                    && *min_degree >= 1
                    && min_degree <= max_degree
                    && *max_degree < nodes,
                "invalid power-law degree range"
            ),
            Self::Explicit { degrees } => {
                ensure!(degrees.len() == nodes, "{} degrees for {nodes} nodes", degrees.len());
                if !is_graphical(degrees) {
                    return Err(Error::NotGraphical(format!("{degrees:?}")));
                }
            }
        }
        Ok(())
    }
}

/// Erdős–Gallai test.
pub fn is_graphical(degrees: &[usize]) -> bool {
    let mut d = degrees.to_vec();
    if d.iter().sum::<usize>() % 2 == 1 {
        return false;
    }
    d.sort_unstable_by(|a, b| b.cmp(a));
    let n = d.len();
    if d.first().is_some_and(|&top| top >= n) {
        return false;
    }
    let mut lhs = 0;
    for k in 1..=n {
        lhs += d[k - 1];
        let rhs = k * (k - 1) + d[k..].iter().map(|&x| x.min(k)).sum::<usize>();
        if lhs > rhs {
            return false;
        }
    }
    true
}

fn sample_poisson(mean: f64, rng: &mut RngStream) -> usize {
    let limit = libm::exp(-mean);
    let mut k = 0;
    let mut p = rng.uniform();
    while p > limit {
        k += 1;
        p *= rng.uniform();
    }
    k
}

fn sample_degrees(spec: &DegreeSpec, nodes: usize, rng: &mut RngStream) -> Vec<usize> {
    match spec {
        DegreeSpec::RingLattice { k } => vec![*k; nodes],
        DegreeSpec::Regular { degree } => vec![*degree; nodes],
        DegreeSpec::Poisson { mean } => (0..nodes).map(|_| sample_poisson(*mean, rng)).collect(),
        DegreeSpec::PowerLaw {
            exponent,
            min_degree,
            max_degree,
        } => {
            let weights: Vec<f64> = (*min_degree..=*max_degree)
                .map(|k| libm::pow(k as f64, -exponent))
                .collect();
            let total: f64 = weights.iter().sum();
            let mut cdf = Vec::with_capacity(weights.len());
            let mut acc = 0.0;
            for w in &weights {
                acc += w / total;
                cdf.push(acc);
            }
            (0..nodes)
                .map(|_| {
                    let u = rng.uniform();
                    min_degree + cdf.partition_point(|&c| c < u).min(weights.len() - 1)
                })
                .collect()
        }
        DegreeSpec::Explicit { degrees } => degrees.clone(),
    }
}

/// Erased configuration model: stubs are paired uniformly at random and
/// self-loops and repeated pairs are dropped.
fn configuration_model(degrees: &[usize], lambda: f64, rng: &mut RngStream) -> Result<ContactNetwork> {
    let mut stubs: Vec<usize> = degrees
        .iter()
        .enumerate()
        .flat_map(|(node, &d)| core::iter::repeat_n(node, d))
        .collect();
    rng.shuffle(&mut stubs);
    let mut seen = BTreeSet::new();
    let mut edges = Vec::with_capacity(stubs.len() / 2);
    let mut erased = 0usize;
    for pair in stubs.chunks_exact(2) {
        let (i, j) = (pair[0].min(pair[1]), pair[0].max(pair[1]));
        if i == j || !seen.insert((i, j)) {
            erased += 1;
            continue;
        }
        edges.push(Edge { i, j, lambda });
    }
    if erased > 0 {
        log::debug!("configuration model erased {erased} self-loops or multi-edges");
    }
    ContactNetwork::from_edges(degrees.len(), edges)
}

pub fn generate_network(spec: &NetworkSpec, rng: &mut RngStream) -> Result<ContactNetwork> {
    ensure!(spec.nodes >= 2, "a contact network needs at least 2 nodes");
    ensure!(
        spec.lambda.is_finite() && spec.lambda > 0.0,
        "edge intensity {} must be positive",
        spec.lambda
    );
    spec.degrees.validate(spec.nodes)?;
    if let DegreeSpec::RingLattice { k } = spec.degrees {
        let n = spec.nodes;
        let edges = (0..n)
            .flat_map(|i| (1..=k / 2).map(move |d| (i, (i + d) % n)))
            .map(|(i, j)| Edge {
                i,
                j,
                lambda: spec.lambda,
            })
            .collect();
        return ContactNetwork::from_edges(n, edges);
    }
    let mut degrees = sample_degrees(&spec.degrees, spec.nodes, rng);
    if degrees.iter().sum::<usize>() % 2 == 1 {
        // Sampled sequences only: bump one random node to make the stub
        // count even.
        let node = rng.below(spec.nodes);
        degrees[node] += 1;
    }
    configuration_model(&degrees, spec.lambda, rng)
}
