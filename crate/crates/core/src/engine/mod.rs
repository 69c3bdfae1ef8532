//! The simulation loop and its outputs.

pub mod config;
pub mod metrics;
pub mod record;
pub mod sim;

pub use config::{ApLayout, ConfigError, HandheldConfig, ScenarioConfig};
pub use metrics::{compute_metrics, compute_metrics_with, GlobalMetrics, MetricsReport, NodeMetrics};
pub use record::{HolderStep, Outcome, Received, StepAction, TransactionRecord};
pub use sim::{run_simulation, RngStream, Simulation, SimulationError, SimulationOutput};
