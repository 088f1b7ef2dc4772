//! Adaptive vaccination behavior of default agents.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};

/// Evaluation `delta(vaccinated, infected)` of the four season outcomes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeltaTable {
    pub vacc_infected: f64,
    pub vacc_healthy: f64,
    pub unvacc_infected: f64,
    pub unvacc_healthy: f64,
}

impl Default for DeltaTable {
    fn default() -> Self {
        Self {
            vacc_infected: 0.1,
            vacc_healthy: 0.9,
            unvacc_infected: 1.0,
            unvacc_healthy: 0.0,
        }
    }
}

impl DeltaTable {
    pub fn get(&self, vaccinated: bool, infected: bool) -> f64 {
        match (vaccinated, infected) {
            (true, true) => self.vacc_infected,
            (true, false) => self.vacc_healthy,
            (false, true) => self.unvacc_infected,
            (false, false) => self.unvacc_healthy,
        }
    }

    /// Values in [`Outcome::index`] order.
    pub fn values(&self) -> [f64; 4] {
        [
            self.vacc_infected,
            self.vacc_healthy,
            self.unvacc_infected,
            self.unvacc_healthy,
        ]
    }

    pub fn validate(&self) -> Result<()> {
        for v in self.values() {
            ensure!((0.0..=1.0).contains(&v), "delta value {v} outside [0, 1]");
        }
        Ok(())
    }
}

/// One season's decision and result for an agent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Outcome {
    pub vaccinated: bool,
    pub infected: bool,
}

impl Outcome {
    /// 0: vaccinated and infected, 1: vaccinated and healthy,
    /// 2: unvaccinated and infected, 3: unvaccinated and healthy.
    pub fn index(&self) -> usize {
        usize::from(!self.vaccinated) * 2 + usize::from(!self.infected)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BehaviorParams {
    pub beta_a: f64,
    pub beta_b: f64,
    pub beta_c: f64,
    pub omega_pe: f64,
    pub omega_sn: f64,
    /// Memory discount.
    pub s: f64,
    pub delta: DeltaTable,
    /// Vaccination probability in the first season, before any evaluation.
    pub prior_coverage: f64,
}

impl Default for BehaviorParams {
    fn default() -> Self {
        Self {
            beta_a: 1.0,
            beta_b: 0.0,
            beta_c: 0.0,
            omega_pe: 0.5,
            omega_sn: 0.5,
            s: 0.7,
            delta: DeltaTable::default(),
            prior_coverage: 0.4,
        }
    }
}

impl BehaviorParams {
    pub fn validate(&self) -> Result<()> {
        let betas = [self.beta_a, self.beta_b, self.beta_c];
        ensure!(
            betas.iter().all(|&b| b >= 0.0) && (betas.iter().sum::<f64>() - 1.0).abs() < 1e-9,
            "beta coefficients {betas:?} are not convex"
        );
        ensure!(
            self.omega_pe >= 0.0
                && self.omega_sn >= 0.0
                && (self.omega_pe + self.omega_sn - 1.0).abs() < 1e-9,
            "evaluation weights must be non-negative and sum to 1"
        );
        ensure!((0.0..=1.0).contains(&self.s), "memory discount {} outside [0, 1]", self.s);
        ensure!(
            (0.0..=1.0).contains(&self.prior_coverage),
            "prior coverage {} outside [0, 1]",
            self.prior_coverage
        );
        self.delta.validate()
    }
}

/// `N(s) = (1 - s^n) / (1 - s)`, the largest value `V_n` can take; `n` at
/// `s = 1`.
pub fn nsum(s: f64, n: u32) -> f64 {
    if s == 1.0 {
        return f64::from(n);
    }
    // expm1/log keeps full precision as s approaches 1.
    libm::expm1(f64::from(n) * libm::log(s)) / (s - 1.0)
}

pub fn evaluate_personal(outcome: Outcome, table: &DeltaTable) -> f64 {
    table.get(outcome.vaccinated, outcome.infected)
}

/// Outcome-weighted mean of the table over the alters' outcome
/// proportions (see [`Outcome::index`] for the order).
pub fn evaluate_social(proportions: &[f64; 4], table: &DeltaTable) -> Result<f64> {
    let total: f64 = proportions.iter().sum();
    ensure!(
        (total - 1.0).abs() <= 1e-9 && proportions.iter().all(|&p| p >= 0.0),
        "alter proportions {proportions:?} do not form a distribution"
    );
    Ok(proportions.iter().zip(table.values()).map(|(p, d)| p * d).sum())
}

pub fn combine_evaluations(delta_pe: f64, delta_sn: f64, omega_pe: f64, omega_sn: f64) -> f64 {
    omega_pe * delta_pe + omega_sn * delta_sn
}

/// `V_n = s V_(n-1) + Delta_(n-1)`.
pub fn update_experience(v_prev: f64, delta: f64, s: f64) -> f64 {
    s * v_prev + delta
}

/// `V_n / N(s)`, clamped against rounding.
pub fn propensity(v: f64, s: f64, n: u32) -> f64 {
    if n == 0 {
        return 0.0;
    }
    (v / nsum(s, n)).clamp(0.0, 1.0)
}

/// `w = beta_a upsilon + beta_b phi + beta_c psi`.
pub fn vaccination_probability(params: &BehaviorParams, upsilon: f64, phi: f64, psi: f64) -> f64 {
    (params.beta_a * upsilon + params.beta_b * phi + params.beta_c * psi).clamp(0.0, 1.0)
}

/// Behavioral state of one individual.
///
/// Only the latest outcome and per-outcome tallies are kept; the discounted
/// experience `V` already summarizes the rest.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FluAgent {
    pub id: usize,
    /// Pro-vaccination experience `V_n`.
    pub v: f64,
    /// Number of evaluations folded into `v`.
    pub evaluations: u32,
    pub last: Option<Outcome>,
    /// Seasons spent in each outcome, by [`Outcome::index`].
    pub tallies: [u32; 4],
    /// HCW influence `phi`; zero in the simplified model.
    pub phi: f64,
    /// Stationary factors `psi`; zero in the simplified model.
    pub psi: f64,
}

impl FluAgent {
    pub fn new(id: usize) -> Self {
        Self {
            id,
            ..Self::default()
        }
    }

    pub fn propensity(&self, s: f64) -> f64 {
        propensity(self.v, s, self.evaluations)
    }

    /// Probability of vaccinating this season; the prior before any
    /// evaluation.
    pub fn vaccination_probability(&self, params: &BehaviorParams) -> f64 {
        if self.evaluations == 0 {
            return params.prior_coverage;
        }
        vaccination_probability(params, self.propensity(params.s), self.phi, self.psi)
    }

    pub fn record(&mut self, outcome: Outcome) {
        self.last = Some(outcome);
        self.tallies[outcome.index()] += 1;
    }

    /// Folds the season's evaluation into `V`.
    pub fn learn(&mut self, delta: f64, s: f64) {
        self.v = update_experience(self.v, delta, s);
        self.evaluations += 1;
    }
}
