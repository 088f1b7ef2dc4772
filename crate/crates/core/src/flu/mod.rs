//! Seasonal influenza vaccination model on a contact network.

mod behavior;
mod model;
mod network;
mod transmission;

pub use behavior::{
    combine_evaluations, evaluate_personal, evaluate_social, nsum, propensity, update_experience,
    vaccination_probability, BehaviorParams, DeltaTable, FluAgent, Outcome,
};
pub use model::{burn_in, BurnInConfig, FluEnv, FluModel, SeasonOutcome, FLU_OBS_DIM};
pub use network::{generate_network, is_graphical, ContactNetwork, DegreeSpec, Edge, NetworkSpec};
pub use transmission::{
    apply_vaccination, choose_seeds, edge_activation_prob, estimate_r0, run_sir_season,
    run_sir_season_with, Epidemic, R0Estimate, SirCounts, SirState, TransmissionParams,
};
