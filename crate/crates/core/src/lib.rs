//! Simulator and optimizer for integrated sensing and communication with a
//! simultaneously transmitting and reflecting surface (STARS) that senses
//! target echoes on its own elements.
//!
//! The crate is organized along the signal chain:
//!
//! - [`scene`]: scenario description, array geometry and steering vectors.
//! - [`channel`]: seeded channel synthesis.
//! - [`stars`]: element roles, coefficients and the two-phase schedule.
//! - [`sensing`]: echo model, Fisher information, CRB, MUSIC and echo SNR.
//! - [`comms`]: uplink MMSE SINR and rates.
//! - [`optim`]: CRB minimization under QoS constraints and the dual-RIS baseline.

pub mod channel;
pub mod comms;
pub mod error;
pub mod linalg;
pub mod optim;
pub mod rng;
pub mod scene;
pub mod sensing;
pub mod serial;
pub mod stars;

pub use channel::{synthesize_channels, ChannelSet};
pub use comms::{cascaded_uplink_channel, uplink_sinrs, RateReport};
pub use error::{Error, Result};
pub use linalg::{CMat, CVec};
pub use optim::{
    alternating_optimize, optimize_baseline_dual_ris, optimize_covariance, optimize_mode_selection,
    optimize_phases, optimize_power_split, project_psd_trace, OptimResult,
};
pub use scene::{
    default_paper_scenario, parse_scenario, serialize_scenario, ArrayGeometry, Implementation, Region,
    ScenarioConfig, SensingPattern, Target, User,
};
pub use sensing::{
    echo_snapshots, echo_snr_comparison, fisher_information, monte_carlo_rmse, music_estimate, root_crb_degrees,
    EchoSnapshots, FisherInfo, RootCrb,
};
pub use stars::{passive_matrix, phase_schedule, project_feasible, ElementState, Role, StarsProfile};
