//! Dual-RIS baseline: a reflecting-only and a transmitting-only surface of
//! half size each, co-located with the STARS aperture.

use super::alternating::{alternating_optimize_from, AoSettings};
use super::{implementation_rho, random_phases, OptimResult};
use crate::channel::ChannelSet;
use crate::error::{config_err, Result};
use crate::scene::{Region, ScenarioConfig};
use crate::stars::{assign_roles, StarsProfile};

/// Profile of the surface active in the `side` phase. The reflecting RIS holds
/// the first `M/2` raster positions and the transmitting RIS the rest; each
/// gets half of the sensing elements (rounded up) in the configured pattern.
pub fn baseline_profile(config: &ScenarioConfig, side: Region, seed: u64) -> Result<StarsProfile> {
    let m = config.element_count();
    if m % 2 != 0 {
        return Err(config_err(
            "stars_rows",
            format!("the dual-RIS baseline needs an even element count, got {m}"),
        ));
    }
    let half = m / 2;
    let sensing = config.sensing_element_count.div_ceil(2).min(half);
    let roles = assign_roles(half, sensing, config.sensing_pattern)?;
    let indices: Vec<usize> = match side {
        Region::Reflection => (0..half).collect(),
        Region::Transmission => (half..m).collect(),
    };
    let phases = random_phases(seed, "baseline_phases", side as u64, half);
    Ok(StarsProfile::full_mode(
        config.implementation,
        &indices,
        &roles,
        side,
        &phases,
        implementation_rho(config),
    ))
}

/// Same alternating optimization as the STARS system, run on the half-size
/// surface matching the configured phase.
pub fn optimize_baseline_dual_ris(config: &ScenarioConfig, channels: &ChannelSet, seed: u64) -> Result<OptimResult> {
    let init = baseline_profile(config, config.phase, seed)?;
    let mut result = alternating_optimize_from(config, channels, &init, None, seed, &AoSettings::default())?;
    result
        .wall_notes
        .push(format!("dual-RIS baseline: {} active elements", init.len()));
    Ok(result)
}
