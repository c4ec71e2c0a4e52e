//! Risk-based filtering of multi-agent driving datasets.
//!
//! Each agent's future is predicted at constant speed along its recorded path
//! with Gaussian position uncertainty that grows with the horizon. Pairwise
//! collision probabilities come from the overlap of those Gaussians and are
//! integrated under a survival weighting into one risk value per ordered pair.
//! The resulting per-scenario graph is searched for first-order pairs and
//! second-order chains whose risks reach a threshold.

pub mod analysis;
pub mod baselines;
pub mod config;
pub mod geometry;
pub mod graph;
pub mod path;
pub mod pipeline;
pub mod prediction;
pub mod report;
pub mod risk;
pub mod scenario;

pub use config::{FilterConfig, SecondOrderRule};
pub use graph::{
    build_graph, eligible_pair, retrieve_first_order, retrieve_second_order, valuable_users,
    FirstOrderSituation, InteractionGraph, RiskEdge, SecondOrderSituation,
};
pub use path::{extract_path, Path};
pub use prediction::{predict_mixture, GaussianComponent, MixturePrediction};
pub use risk::{gaussian_overlap, pair_risk, RiskError, RiskValue};
pub use scenario::{parse_scenario, RoadUserType, Scenario, ScenarioError, Track};
