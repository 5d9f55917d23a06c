//! Shared fixtures for the kernel benchmarks.

use stars_isac::optim::initial_profile;
use stars_isac::{default_paper_scenario, synthesize_channels, ChannelSet, Region, ScenarioConfig, StarsProfile};

/// Default scenario, its channels for seed 1 and a seeded reflection-phase profile.
pub fn default_fixture() -> (ScenarioConfig, ChannelSet, StarsProfile) {
    let config = default_paper_scenario();
    let channels = synthesize_channels(&config, 1).expect("default scenario synthesizes");
    let profile = initial_profile(&config, Region::Reflection, None, 0.0, 1).expect("default profile");
    (config, channels, profile)
}
