//! Echo SNR at the surface's own sensing receiver versus a BS receiver that
//! would hear the echo only after one more pass through the surface.

use serde::{Deserialize, Serialize};

use super::{check_covariance, EchoModel};
use crate::channel::{bs_link_gain, ChannelSet};
use crate::error::Result;
use crate::linalg::CMat;
use crate::scene::{Region, ScenarioConfig};
use crate::stars::StarsProfile;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EchoSnr {
    pub snr_at_stars_db: f64,
    pub snr_at_bs_db: f64,
    /// Power gain of the surface-to-BS hop.
    pub return_hop_gain: f64,
    /// Fraction of the echo power the surface re-radiates towards the BS.
    pub reradiated_fraction: f64,
}

fn to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Per-element echo SNR at the sensing aperture, `sum_l ||mu_l||^2 / (L M_s sigma^2)`,
/// and the same quantity at a BS receiver whose echo additionally crosses the
/// surface (fraction `f` re-radiated on the BS side) and the surface-to-BS hop.
pub fn echo_snr_comparison(
    config: &ScenarioConfig,
    channels: &ChannelSet,
    profile: &StarsProfile,
    r_x: &CMat,
    target_id: usize,
) -> Result<EchoSnr> {
    check_covariance(config, r_x)?;
    profile.check_feasible()?;
    let model = EchoModel::new(config, channels, profile, target_id)?;
    let r_y = model.extended_covariance(r_x);
    let illumination = model.illumination_power(profile, &r_y);
    let echo = model.alpha.norm_sqr() * illumination;
    let aperture = model.aperture[0].norm_squared() / model.sensing_count() as f64;
    let snr_stars = echo * aperture / config.noise_power_sensing;

    let back = config.targets[target_id].region.path_to(Region::Reflection);
    let fraction = profile
        .elements
        .iter()
        .map(|e| e.beta(back).powi(2))
        .sum::<f64>()
        / config.element_count() as f64;
    let hop = bs_link_gain(config)?;
    let snr_bs = echo * hop * fraction / config.noise_power_bs;
    Ok(EchoSnr {
        snr_at_stars_db: to_db(snr_stars),
        snr_at_bs_db: to_db(snr_bs),
        return_hop_gain: hop,
        reradiated_fraction: fraction,
    })
}
