//! Pathloss and Rician channel synthesis for one scenario realization.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{complex_gaussian, stream};
use crate::scene::{steering_vector, Region, ScenarioConfig};

/// Rician factors at or above this are treated as pure line of sight.
pub const LOS_ONLY_KAPPA: f64 = 1e12;

/// All complex links of one realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSet {
    /// `G`, STARS elements x BS antennas.
    #[serde(with = "crate::serial::cmat")]
    pub bs_to_stars: DMatrix<Complex64>,
    /// `h_u` for every user, one entry per STARS element.
    #[serde(with = "crate::serial::cvec_list")]
    pub user_to_stars: Vec<DVector<Complex64>>,
    pub user_regions: Vec<Region>,
    /// `d_k`: pathloss-scaled steering of each target over the STARS aperture.
    #[serde(with = "crate::serial::cvec_list")]
    pub target_steering: Vec<DVector<Complex64>>,
    pub realization_seed: u64,
}

impl ChannelSet {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("channel serialization is infallible")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            path: format!("line {} column {}", e.line(), e.column()),
            message: e.to_string(),
        })
    }
}

/// Distance power law `10^(ref/10) * d^(-exponent)`.
pub fn pathloss_gain(distance: f64, exponent: f64, ref_gain_db: f64) -> Result<f64> {
    if !(distance > 0.0) {
        return Err(Error::Domain(format!("distance must be positive, got {distance}")));
    }
    Ok(10f64.powf(ref_gain_db / 10.0) * distance.powf(-exponent))
}

/// Power gain of the BS-STARS hop.
pub fn bs_link_gain(config: &ScenarioConfig) -> Result<f64> {
    let pl = &config.pathloss;
    pathloss_gain(config.bs_link.distance, pl.exp_bs_stars, pl.ref_gain_db)
}

/// One-way power gain between the STARS and target `k`.
pub fn target_link_gain(config: &ScenarioConfig, k: usize) -> Result<f64> {
    let pl = &config.pathloss;
    pathloss_gain(config.targets[k].distance, pl.exp_stars_target, pl.ref_gain_db)
}

/// Complex echo coefficient of target `k` on the return hop. Together with the
/// outbound amplitude folded into `d_k` the two-way factor is `rcs * PL`.
pub fn echo_gain(config: &ScenarioConfig, k: usize) -> Result<Complex64> {
    Ok(config.targets[k].rcs_gain * target_link_gain(config, k)?.sqrt())
}

fn rician_weights(kappa: f64) -> (f64, f64) {
    if kappa >= LOS_ONLY_KAPPA {
        (1.0, 0.0)
    } else {
        ((kappa / (kappa + 1.0)).sqrt(), (1.0 / (kappa + 1.0)).sqrt())
    }
}

/// Line-of-sight part of `G` (unit-modulus outer product, unscaled).
pub fn bs_los_component(config: &ScenarioConfig) -> Result<DMatrix<Complex64>> {
    let link = &config.bs_link;
    let at_stars = steering_vector(
        &config.stars_geometry(),
        link.arrival_azimuth,
        link.arrival_elevation,
    )?;
    let at_bs = steering_vector(
        &config.bs_geometry(),
        link.departure_azimuth,
        link.departure_elevation,
    )?;
    Ok(&at_stars * at_bs.transpose())
}

/// Synthesizes `G`, every `h_u` and every `d_k`. Each link draws from its own
/// seeded stream, so adding users leaves the existing links unchanged.
pub fn synthesize_channels(config: &ScenarioConfig, seed: u64) -> Result<ChannelSet> {
    config.validate()?;
    let stars = config.stars_geometry();
    let m = stars.len();
    let n = config.bs_antennas;
    let (w_los, w_nlos) = rician_weights(config.rician_kappa);

    let bs_amp = bs_link_gain(config)?.sqrt();
    let los = bs_los_component(config)?;
    let mut rng = stream(seed, "bs_link", 0);
    let mut bs_to_stars = DMatrix::zeros(m, n);
    for c in 0..n {
        for r in 0..m {
            let scattered = complex_gaussian(&mut rng);
            bs_to_stars[(r, c)] = (los[(r, c)] * w_los + scattered * w_nlos) * bs_amp;
        }
    }

    let pl = &config.pathloss;
    let mut user_to_stars = Vec::with_capacity(config.users.len());
    for (u, user) in config.users.iter().enumerate() {
        let amp = pathloss_gain(user.distance, pl.exp_user_stars, pl.ref_gain_db)?.sqrt();
        let a = steering_vector(&stars, user.azimuth, user.elevation)?;
        let mut rng = stream(seed, "user_link", u as u64);
        let h = a.map(|z| (z * w_los + complex_gaussian(&mut rng) * w_nlos) * amp);
        user_to_stars.push(h);
    }

    let mut target_steering = Vec::with_capacity(config.targets.len());
    for (k, t) in config.targets.iter().enumerate() {
        let amp = target_link_gain(config, k)?.sqrt();
        target_steering.push(steering_vector(&stars, t.azimuth, t.elevation)? * Complex64::from(amp));
    }

    Ok(ChannelSet {
        bs_to_stars,
        user_to_stars,
        user_regions: config.users.iter().map(|u| u.region).collect(),
        target_steering,
        realization_seed: seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::default_paper_scenario;
    use approx::assert_relative_eq;

    #[test]
    fn pathloss_examples() {
        assert_relative_eq!(pathloss_gain(1.0, 3.7, -30.0).unwrap(), 1e-3, max_relative = 1e-12);
        assert_relative_eq!(pathloss_gain(10.0, 2.0, -30.0).unwrap(), 1e-5, max_relative = 1e-12);
        let near = pathloss_gain(7.0, 2.0, -30.0).unwrap();
        let far = pathloss_gain(14.0, 2.0, -30.0).unwrap();
        assert_relative_eq!(near / far, 4.0, max_relative = 1e-12);
        assert!(pathloss_gain(0.0, 2.0, -30.0).is_err());
        assert!(pathloss_gain(-1.0, 2.0, -30.0).is_err());
    }

    #[test]
    fn los_limit_is_rank_one() {
        let mut c = default_paper_scenario();
        c.rician_kappa = LOS_ONLY_KAPPA;
        let ch = synthesize_channels(&c, 3).unwrap();
        let sv = ch.bs_to_stars.clone().singular_values();
        assert!(sv[1] / sv[0] < 1e-12, "{sv}");
        let amp = bs_link_gain(&c).unwrap().sqrt();
        for col in ch.bs_to_stars.column_iter() {
            assert_relative_eq!(col.norm(), (c.element_count() as f64).sqrt() * amp, max_relative = 1e-12);
        }
    }

    #[test]
    fn synthesis_is_deterministic() {
        let c = default_paper_scenario();
        let a = synthesize_channels(&c, 11).unwrap();
        let b = synthesize_channels(&c, 11).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, synthesize_channels(&c, 12).unwrap());
    }

    #[test]
    fn target_steering_has_common_modulus() {
        let c = default_paper_scenario();
        let ch = synthesize_channels(&c, 1).unwrap();
        for (k, d) in ch.target_steering.iter().enumerate() {
            let amp = target_link_gain(&c, k).unwrap().sqrt();
            assert!(d.iter().all(|z| (z.norm() - amp).abs() < 1e-15));
        }
    }

    #[test]
    fn json_dump_round_trips() {
        let c = default_paper_scenario();
        let ch = synthesize_channels(&c, 5).unwrap();
        let text = ch.to_json();
        assert!(text.contains("[["));
        assert_eq!(ChannelSet::from_json(&text).unwrap(), ch);
    }
}
