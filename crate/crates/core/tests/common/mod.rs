//! Random small instances shared by the integration tests.
#![allow(dead_code)]

pub mod checks;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use stars_isac::optim::initial_profile;
use stars_isac::scene::{BsLink, Pathloss};
use stars_isac::*;

pub struct Instance {
    pub config: ScenarioConfig,
    pub channels: ChannelSet,
    pub profile: StarsProfile,
    pub r_x: CMat,
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn cgauss(rng: &mut impl Rng) -> Complex64 {
    Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

/// Random PSD matrix with trace `power * fill`, `fill` in (0.2, 1].
pub fn random_covariance(rng: &mut impl Rng, n: usize, power: f64) -> CMat {
    let a = DMatrix::from_fn(n, n, |_, _| cgauss(rng));
    let r = &a * a.adjoint();
    let tr: f64 = r.diagonal().iter().map(|z| z.re).sum();
    let fill: f64 = rng.random_range(0.2..1.0);
    r * Complex64::from(power * fill / tr)
}

/// Small scenario (`M <= 6`, `N_t <= 4`) with unit-scale gains so that FIM
/// entries are O(1), random users, targets, implementation and phases.
pub fn random_instance(seed: u64) -> Instance {
    let mut rng = rng(seed);
    let (rows, cols) = [(1, 2), (1, 3), (2, 2), (2, 3), (3, 2), (1, 4)][rng.random_range(0..6)];
    let m = rows * cols;
    let implementation = [Implementation::Se, Implementation::Mse, Implementation::Pse][rng.random_range(0..3)];
    let side = if rng.random_bool(0.5) { Region::Reflection } else { Region::Transmission };
    let mut users = Vec::new();
    for region in [Region::Reflection, Region::Transmission] {
        for _ in 0..rng.random_range(0..3) {
            users.push(User {
                azimuth: rng.random_range(0.0..360f64).to_radians(),
                elevation: rng.random_range(10.0..85f64).to_radians(),
                distance: rng.random_range(1.0..3.0),
                region,
                tx_power: rng.random_range(0.1..1.0),
            });
        }
    }
    let target = |rng: &mut ChaCha8Rng, region| Target {
        azimuth: rng.random_range(0.0..360f64).to_radians(),
        elevation: rng.random_range(10.0..80f64).to_radians(),
        distance: rng.random_range(1.0..2.0),
        rcs_gain: Complex64::new(rng.random_range(0.5..1.5), rng.random_range(-0.5..0.5)),
        region,
    };
    let targets = vec![target(&mut rng, Region::Reflection), target(&mut rng, Region::Transmission)];
    let config = ScenarioConfig {
        bs_antennas: rng.random_range(1..=4),
        stars_rows: rows,
        stars_cols: cols,
        sensing_element_count: rng.random_range(1..m),
        sensing_pattern: if rng.random_bool(0.5) {
            SensingPattern::Block
        } else {
            SensingPattern::Interleaved
        },
        implementation,
        users,
        targets,
        bs_power_budget: rng.random_range(0.5..2.0),
        noise_power_sensing: rng.random_range(0.5..2.0),
        noise_power_bs: rng.random_range(0.05..0.2),
        qos_rate: 0.5,
        pathloss: Pathloss {
            ref_gain_db: 0.0,
            ..Pathloss::default()
        },
        rician_kappa: rng.random_range(0.5..10.0),
        snapshots: rng.random_range(8..40),
        user_echo_enabled: rng.random_bool(0.5),
        phase: side,
        bs_link: BsLink {
            distance: rng.random_range(1.0..2.0),
            arrival_azimuth: rng.random_range(0.0..6.28),
            arrival_elevation: rng.random_range(0.2..1.4),
            departure_azimuth: rng.random_range(0.0..6.28),
            departure_elevation: rng.random_range(0.2..1.4),
        },
        pin_sensing_count: true,
        shared_rho: rng.random_range(0.1..0.9),
        phase_restarts: 1,
    };
    config.validate().unwrap();
    let channels = synthesize_channels(&config, seed).unwrap();
    let rho = config.shared_rho;
    let profile = initial_profile(&config, side, None, rho, seed).unwrap();
    let r_x = random_covariance(&mut rng, config.bs_antennas, config.bs_power_budget);
    Instance {
        config,
        channels,
        profile,
        r_x,
    }
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}
