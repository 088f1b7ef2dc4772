//! Seasonal SIR epidemic as bond percolation on the contact network.
//!
//! Every season draws one uniform per agent for vaccine protection and one
//! per edge for transmission, whatever the decisions were. Two runs that
//! differ only in some decisions therefore share all other randomness.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::rng::RngStream;

use super::network::ContactNetwork;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransmissionParams {
    /// Rate at which infectious contact ends; `1 / gamma_rec` is the
    /// infectious duration.
    pub gamma_rec: f64,
    pub efficacy: f64,
    /// Half-width of an optional per-season uniform efficacy draw. Zero
    /// keeps efficacy constant.
    pub efficacy_spread: f64,
    pub seed_infections: usize,
}

impl Default for TransmissionParams {
    fn default() -> Self {
        Self {
            gamma_rec: 1.0,
            efficacy: 0.6,
            efficacy_spread: 0.0,
            seed_infections: 5,
        }
    }
}

impl TransmissionParams {
    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.gamma_rec.is_finite() && self.gamma_rec > 0.0,
            "recovery rate {} must be positive",
            self.gamma_rec
        );
        ensure!(
            (0.0..=1.0).contains(&self.efficacy),
            "efficacy {} outside [0, 1]",
            self.efficacy
        );
        ensure!(
            self.efficacy_spread >= 0.0
                && self.efficacy - self.efficacy_spread >= 0.0
                && self.efficacy + self.efficacy_spread <= 1.0,
            "efficacy range leaves [0, 1]"
        );
        Ok(())
    }
}

/// `T = 1 - exp(-lambda / gamma)`.
pub fn edge_activation_prob(lambda: f64, gamma_rec: f64) -> f64 {
    -libm::expm1(-lambda / gamma_rec)
}

/// Each vaccinated agent is protected with probability `efficacy`.
pub fn apply_vaccination(vaccinated: &[bool], efficacy: f64, rng: &mut RngStream) -> Vec<bool> {
    vaccinated
        .iter()
        .map(|&v| {
            let u = rng.uniform();
            v && u < efficacy
        })
        .collect()
}

/// The first `count` non-immune nodes of a uniform random permutation.
pub fn choose_seeds(immune: &[bool], count: usize, rng: &mut RngStream) -> Vec<usize> {
    let mut order: Vec<usize> = (0..immune.len()).collect();
    rng.shuffle(&mut order);
    order.into_iter().filter(|&i| !immune[i]).take(count).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SirState {
    Susceptible,
    Infected,
    Recovered,
}

/// Compartment sizes; immune agents are counted apart from `S`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SirCounts {
    pub susceptible: usize,
    pub infected: usize,
    pub recovered: usize,
    pub immune: usize,
}

impl SirCounts {
    pub fn total(&self) -> usize {
        self.susceptible + self.infected + self.recovered + self.immune
    }
}

/// Result of one epidemic.
#[derive(Clone, Debug, PartialEq)]
pub struct Epidemic {
    pub infected: Vec<bool>,
    /// Seeds actually used after replacing immune ones.
    pub seeds: Vec<usize>,
    pub attack_rate: f64,
}

pub fn run_sir_season(
    network: &ContactNetwork,
    immune: &[bool],
    seeds: &[usize],
    params: &TransmissionParams,
    rng: &mut RngStream,
) -> Result<Epidemic> {
    run_sir_season_with(network, immune, seeds, params, rng, |_, _| {})
}

/// Percolation epidemic from `seeds`. `probe` sees the compartment counts and
/// states after seeding and after every recovery.
pub fn run_sir_season_with(
    network: &ContactNetwork,
    immune: &[bool],
    seeds: &[usize],
    params: &TransmissionParams,
    rng: &mut RngStream,
    mut probe: impl FnMut(&SirCounts, &[SirState]),
) -> Result<Epidemic> {
    let n = network.nodes();
    ensure!(immune.len() == n, "{} immunity flags for {n} nodes", immune.len());
    ensure!(seeds.iter().all(|&s| s < n), "seed outside the network");

    let active: Vec<bool> = network
        .edges()
        .iter()
        .map(|e| {
            let u = rng.uniform();
            u < edge_activation_prob(e.lambda, params.gamma_rec) && !immune[e.i] && !immune[e.j]
        })
        .collect();

    let mut state = vec![SirState::Susceptible; n];
    let n_immune = immune.iter().filter(|&&x| x).count();
    let mut counts = SirCounts {
        susceptible: n - n_immune,
        immune: n_immune,
        ..SirCounts::default()
    };
    let mut used = Vec::with_capacity(seeds.len());
    let mut queue = VecDeque::new();
    fn infect(node: usize, state: &mut [SirState], counts: &mut SirCounts, queue: &mut VecDeque<usize>) {
        state[node] = SirState::Infected;
        counts.susceptible -= 1;
        counts.infected += 1;
        queue.push_back(node);
    }

    let mut replaced = 0;
    for &s in seeds {
        let target = if immune[s] || state[s] != SirState::Susceptible {
            replaced += 1;
            let candidates: Vec<usize> = (0..n)
                .filter(|&i| !immune[i] && state[i] == SirState::Susceptible)
                .collect();
            if candidates.is_empty() {
                continue;
            }
            candidates[rng.below(candidates.len())]
        } else {
            s
        };
        infect(target, &mut state, &mut counts, &mut queue);
        used.push(target);
    }
    if replaced > 0 {
        log::info!("{replaced} seed(s) were immune or repeated and were redrawn");
    }
    probe(&counts, &state);

    while let Some(node) = queue.pop_front() {
        for &(nb, edge) in network.neighbors(node) {
            if active[edge] && state[nb] == SirState::Susceptible {
                infect(nb, &mut state, &mut counts, &mut queue);
            }
        }
        state[node] = SirState::Recovered;
        counts.infected -= 1;
        counts.recovered += 1;
        probe(&counts, &state);
    }

    let infected: Vec<bool> = state.iter().map(|s| *s == SirState::Recovered).collect();
    Ok(Epidemic {
        attack_rate: counts.recovered as f64 / n as f64,
        infected,
        seeds: used,
    })
}

/// Two readings of `R0 = <<k>_m> <T>`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct R0Estimate {
    pub mean_t: f64,
    /// `<k> <T>`.
    pub mean_degree: f64,
    /// `(<k^2> / <k> - 1) <T>`.
    pub excess_degree: f64,
}

pub fn estimate_r0(network: &ContactNetwork, params: &TransmissionParams) -> R0Estimate {
    let edges = network.edges();
    let mean_t = if edges.is_empty() {
        0.0
    } else {
        edges
            .iter()
            .map(|e| edge_activation_prob(e.lambda, params.gamma_rec))
            .sum::<f64>()
            / edges.len() as f64
    };
    let degrees = network.degrees();
    let n = degrees.len() as f64;
    let k1 = degrees.iter().sum::<usize>() as f64 / n;
    let k2 = degrees.iter().map(|&d| (d * d) as f64).sum::<f64>() / n;
    let excess = if k1 > 0.0 { k2 / k1 - 1.0 } else { 0.0 };
    R0Estimate {
        mean_t,
        mean_degree: k1 * mean_t,
        excess_degree: excess * mean_t,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flu::network::Edge;

    fn graph(n: usize, pairs: &[(usize, usize)], lambda: f64) -> ContactNetwork {
        ContactNetwork::from_edges(
            n,
            pairs.iter().map(|&(i, j)| Edge { i, j, lambda }).collect(),
        )
        .unwrap()
    }

    /// `lambda` that gives transmission probability `t` at `gamma = 1`.
    fn lambda_for(t: f64) -> f64 {
        -libm::log(1.0 - t)
    }

    #[test]
    fn activation_probability() {
        assert!((edge_activation_prob(1.0, 1.0) - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
        assert!((edge_activation_prob(2.0, 2.0) - 0.632_120_558_828_557_7).abs() < 1e-15);
        assert!(edge_activation_prob(1e-12, 1.0) < 1e-11);
        assert!(edge_activation_prob(0.5, 1.0) < edge_activation_prob(0.6, 1.0));
        assert!(edge_activation_prob(0.5, 1.0) > edge_activation_prob(0.5, 1.1));
    }

    #[test]
    fn vaccination_efficacy() {
        let vacc = vec![true; 10_000];
        let mut rng = RngStream::new(1, "v");
        assert!(apply_vaccination(&vacc, 1.0, &mut rng).iter().all(|&x| x));
        assert!(apply_vaccination(&vacc, 0.0, &mut rng).iter().all(|&x| !x));
        let frac = apply_vaccination(&vacc, 0.6, &mut rng).iter().filter(|&&x| x).count() as f64 / 1e4;
        assert!((frac - 0.6).abs() < 0.02, "{frac}");
        assert!(apply_vaccination(&[false; 50], 1.0, &mut rng).iter().all(|&x| !x));
    }

    #[test]
    fn zero_seeds_and_complete_graph() {
        let p = TransmissionParams::default();
        let pairs: Vec<(usize, usize)> = (0..6).flat_map(|i| (i + 1..6).map(move |j| (i, j))).collect();
        let g = graph(6, &pairs, 1e3);
        let mut rng = RngStream::new(0, "s");
        let none = run_sir_season(&g, &[false; 6], &[], &p, &mut rng).unwrap();
        assert_eq!(none.attack_rate, 0.0);
        let mut immune = [false; 6];
        immune[4] = true;
        let all = run_sir_season(&g, &immune, &[0], &p, &mut rng).unwrap();
        assert_eq!(all.infected, vec![true, true, true, true, false, true]);
    }

    #[test]
    fn line_graph_product_oracle() {
        let g = graph(3, &[(0, 1), (1, 2)], lambda_for(0.5));
        let p = TransmissionParams::default();
        let mut rng = RngStream::new(5, "line");
        let reps = 100_000;
        let hits = (0..reps)
            .filter(|_| run_sir_season(&g, &[false; 3], &[0], &p, &mut rng).unwrap().infected[2])
            .count();
        let freq = hits as f64 / reps as f64;
        assert!((freq - 0.25).abs() < 0.01, "{freq}");
    }

    /// Infection probability of every node by enumerating all edge patterns.
    fn exact_infection(g: &ContactNetwork, t: &[f64], immune: &[bool], seed: usize) -> Vec<f64> {
        let m = g.edges().len();
        let mut probs = vec![0.0; g.nodes()];
        for mask in 0u32..(1 << m) {
            let mut w = 1.0;
            for (b, &tb) in t.iter().enumerate() {
                w *= if mask >> b & 1 == 1 { tb } else { 1.0 - tb };
            }
            let mut reached = vec![false; g.nodes()];
            reached[seed] = true;
            let mut changed = true;
            while changed {
                changed = false;
                for (b, e) in g.edges().iter().enumerate() {
                    if mask >> b & 1 == 0 || immune[e.i] || immune[e.j] {
                        continue;
                    }
                    if reached[e.i] != reached[e.j] {
                        reached[e.i] = true;
                        reached[e.j] = true;
                        changed = true;
                    }
                }
            }
            for (p, r) in probs.iter_mut().zip(&reached) {
                if *r {
                    *p += w;
                }
            }
        }
        probs
    }

    #[test]
    fn percolation_matches_enumeration() {
        let cases: Vec<(usize, Vec<(usize, usize)>, Vec<bool>)> = vec![
            (4, vec![(0, 1), (1, 2), (2, 3), (3, 0)], vec![false; 4]),
            (5, vec![(0, 1), (0, 2), (1, 2), (2, 3), (3, 4), (1, 4)], vec![false, false, false, true, false]),
            (6, vec![(0, 1), (1, 2), (2, 0), (2, 3), (3, 4), (4, 5), (5, 3), (0, 5)], vec![false; 6]),
        ];
        let reps = 100_000;
        for (case, (n, pairs, immune)) in cases.into_iter().enumerate() {
            let ts: Vec<f64> = (0..pairs.len()).map(|b| 0.2 + 0.1 * (b % 6) as f64).collect();
            let edges = pairs
                .iter()
                .zip(&ts)
                .map(|(&(i, j), &t)| Edge { i, j, lambda: lambda_for(t) })
                .collect();
            let g = ContactNetwork::from_edges(n, edges).unwrap();
            let exact = exact_infection(&g, &ts, &immune, 0);
            let p = TransmissionParams::default();
            let mut rng = RngStream::new(case as u64, "perc");
            let mut counts = vec![0usize; n];
            for _ in 0..reps {
                let ep = run_sir_season(&g, &immune, &[0], &p, &mut rng).unwrap();
                for (c, &i) in counts.iter_mut().zip(&ep.infected) {
                    *c += usize::from(i);
                }
            }
            for node in 0..n {
                let q = exact[node].clamp(0.0, 1.0);
                let f = counts[node] as f64 / reps as f64;
                let se = (q * (1.0 - q) / reps as f64).sqrt();
                assert!(
                    (f - q).abs() <= 3.0 * se + 1e-12,
                    "case {case} node {node}: {f} vs exact {q} (se {se})"
                );
            }
        }
    }

    #[test]
    fn conservation_probe() {
        let spec = super::super::network::NetworkSpec::default();
        let g = super::super::network::generate_network(&spec, &mut RngStream::new(2, "g")).unwrap();
        let mut rng = RngStream::new(3, "vac");
        let immune = apply_vaccination(&vec![true; g.nodes()], 0.3, &mut rng);
        let seeds = choose_seeds(&immune, 5, &mut rng);
        let p = TransmissionParams::default();
        let mut probes = 0;
        run_sir_season_with(&g, &immune, &seeds, &p, &mut rng, |c, states| {
            probes += 1;
            assert_eq!(c.total(), g.nodes());
            let infected = states.iter().filter(|s| **s == SirState::Infected).count();
            assert_eq!(infected, c.infected);
        })
        .unwrap();
        assert!(probes > 1);
    }

    #[test]
    fn immune_seeds_are_redrawn() {
        let g = graph(4, &[(0, 1), (1, 2), (2, 3)], 1.0);
        let ep = run_sir_season(
            &g,
            &[true, false, false, false],
            &[0],
            &TransmissionParams::default(),
            &mut RngStream::new(0, "r"),
        )
        .unwrap();
        assert_eq!(ep.seeds.len(), 1);
        assert_ne!(ep.seeds[0], 0);
        assert!(!ep.infected[0]);
    }

    #[test]
    fn seeds_avoid_immune_nodes() {
        let mut immune = vec![false; 100];
        for i in (0..100).step_by(2) {
            immune[i] = true;
        }
        let s = choose_seeds(&immune, 5, &mut RngStream::new(1, "seed"));
        assert_eq!(s.len(), 5);
        assert!(s.iter().all(|&i| !immune[i]));
    }

    #[test]
    fn r0_variants() {
        let p = TransmissionParams::default();
        let t = edge_activation_prob(0.3, 1.0);
        let ring = graph(10, &(0..10).map(|i| (i, (i + 1) % 10)).collect::<Vec<_>>(), 0.3);
        let r = estimate_r0(&ring, &p);
        assert!((r.mean_degree - 2.0 * t).abs() < 1e-12);
        assert!((r.excess_degree - t).abs() < 1e-12);
        // Star K_{1,n}: <k> = 2n/(n+1), excess = (n-1)/2.
        let n = 8;
        let star = graph(n + 1, &(1..=n).map(|j| (0, j)).collect::<Vec<_>>(), 0.3);
        let r = estimate_r0(&star, &p);
        assert!((r.mean_degree - 2.0 * n as f64 / (n as f64 + 1.0) * t).abs() < 1e-12);
        assert!((r.excess_degree - (n as f64 - 1.0) / 2.0 * t).abs() < 1e-12);
        let tiny = estimate_r0(&ring.with_uniform_lambda(1e-12).unwrap(), &p);
        assert!(tiny.mean_degree < 1e-10);
    }
}
