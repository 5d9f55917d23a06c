//! Echo snapshots, MUSIC, echo SNR and channel statistics.

use nalgebra::DMatrix;
use num_complex::Complex64;

use stars_isac::channel::{bs_link_gain, pathloss_gain};
use stars_isac::linalg::hermitian_eigen;
use stars_isac::optim::{initial_profile, rank_one_illumination};
use stars_isac::sensing::{echo_snr_comparison, EchoModel};
use stars_isac::*;

struct Setup {
    config: ScenarioConfig,
    channels: ChannelSet,
    profile: StarsProfile,
    r_x: CMat,
}

/// Default scenario with a contiguous 2x5 sensing block and rank-one
/// illumination of the reflection-side target.
fn block_setup(seed: u64) -> Setup {
    let mut config = default_paper_scenario();
    config.sensing_element_count = 10;
    config.sensing_pattern = SensingPattern::Block;
    let channels = synthesize_channels(&config, seed).unwrap();
    let profile = initial_profile(&config, Region::Reflection, None, 0.0, seed).unwrap();
    let model = EchoModel::new(&config, &channels, &profile, 0).unwrap();
    let r_x = rank_one_illumination(&model, &profile, config.bs_power_budget).unwrap();
    Setup {
        config,
        channels,
        profile,
        r_x,
    }
}

fn snapshots(s: &Setup, seed: u64) -> EchoSnapshots {
    echo_snapshots(&s.config, &s.channels, &s.profile, &s.r_x, 0, seed).unwrap()
}

#[test]
fn noiseless_sample_covariance_is_rank_one() {
    let mut s = block_setup(1);
    s.config.noise_power_sensing = 1e-30;
    let snaps = snapshots(&s, 3);
    let l = snaps.data.ncols() as f64;
    let cov = &snaps.data * snaps.data.adjoint() / Complex64::from(l);
    let (values, _) = hermitian_eigen(&cov);
    let top = values[values.len() - 1];
    assert!(values[values.len() - 2] < 1e-10 * top, "{values:?}");
}

#[test]
fn snapshots_are_deterministic_per_seed() {
    let s = block_setup(2);
    assert_eq!(snapshots(&s, 11), snapshots(&s, 11));
    assert_ne!(snapshots(&s, 11).data, snapshots(&s, 12).data);
}

#[test]
fn sensing_noise_has_the_configured_power() {
    // Subtracting noiseless snapshots isolates the noise draw of each seed.
    let s = block_setup(1);
    let mut quiet = block_setup(1);
    quiet.config.noise_power_sensing = 1e-40;
    let sigma2 = s.config.noise_power_sensing;
    let mut total = 0.0;
    let mut count = 0;
    for seed in 0..20 {
        let noise = snapshots(&s, seed).data - snapshots(&quiet, seed).data;
        total += noise.iter().map(|z| z.norm_sqr()).sum::<f64>();
        count += noise.len();
    }
    assert!(count >= 10_000);
    let ratio = total / count as f64 / sigma2;
    assert!((ratio - 1.0).abs() < 0.03, "noise power ratio {ratio}");
}

#[test]
fn music_is_exact_without_noise() {
    for (az, el) in [(342.0, 30.0), (341.37, 31.29), (12.5, 55.25)] {
        let mut s = block_setup(4);
        s.config.noise_power_sensing = 1e-30;
        s.config.targets[0].azimuth = f64::to_radians(az);
        s.config.targets[0].elevation = f64::to_radians(el);
        let snaps = snapshots(&s, 5);
        let est = music_estimate(&snaps, &snaps.geometry, 1.0).unwrap();
        assert!((est.azimuth_deg - az).abs() < 1e-4, "az {az}: {est:?}");
        assert!((est.elevation_deg - el).abs() < 1e-4, "el {el}: {est:?}");
    }
}

#[test]
fn music_needs_two_sensing_elements() {
    let mut s = block_setup(1);
    s.config.sensing_element_count = 1;
    s.profile = initial_profile(&s.config, Region::Reflection, None, 0.0, 1).unwrap();
    let snaps = snapshots(&s, 1);
    assert_eq!(
        music_estimate(&snaps, &snaps.geometry, 1.0),
        Err(Error::SubspaceUndefined(1))
    );
}

#[test]
fn monte_carlo_rmse_is_reproducible() {
    let s = block_setup(3);
    let run = || monte_carlo_rmse(&s.config, &s.channels, &s.profile, &s.r_x, 0, 12, 9).unwrap();
    let a = run();
    assert_eq!(a, run());
    assert_eq!(a.trials, 12);
    assert!(a.rmse_az_deg > 0.0 && a.rmse_el_deg > 0.0);
}

#[test]
fn echo_snr_gap_is_the_extra_hop_loss() {
    let mut toy = default_paper_scenario();
    toy.bs_antennas = 2;
    toy.stars_rows = 1;
    toy.stars_cols = 5;
    toy.sensing_element_count = 1;
    toy.users.clear();
    toy.noise_power_bs = toy.noise_power_sensing;
    toy.bs_link.distance = 7.0;
    let mut channels = synthesize_channels(&toy, 0).unwrap();
    channels.bs_to_stars = DMatrix::from_element(5, 2, Complex64::new(1.0, 0.0));
    let profile = initial_profile(&toy, Region::Reflection, None, 0.0, 0).unwrap();
    let r_x = CMat::identity(2, 2) * Complex64::from(toy.bs_power_budget / 2.0);
    let snr = echo_snr_comparison(&toy, &channels, &profile, &r_x, 0).unwrap();
    // Four of five elements re-radiate; the hop follows the BS-surface power law.
    let hop = 1e-3 * 7f64.powf(-2.2);
    assert!((snr.return_hop_gain - hop).abs() < 1e-15);
    assert!((snr.reradiated_fraction - 0.8).abs() < 1e-15);
    let gap = snr.snr_at_stars_db - snr.snr_at_bs_db;
    assert!((gap + 10.0 * (hop * 0.8).log10()).abs() < 1e-9, "gap {gap}");
}

#[test]
fn nothing_reradiated_means_no_echo_at_the_bs() {
    let config = default_paper_scenario();
    let channels = synthesize_channels(&config, 1).unwrap();
    let m = config.element_count();
    let indices: Vec<usize> = (0..m).collect();
    let profile = StarsProfile::full_mode(
        Implementation::Se,
        &indices,
        &vec![Role::Sensing; m],
        Region::Reflection,
        &vec![0.0; m],
        0.0,
    );
    let r_x = CMat::identity(20, 20) * Complex64::from(config.bs_power_budget / 20.0);
    let snr = echo_snr_comparison(&config, &channels, &profile, &r_x, 0).unwrap();
    assert_eq!(snr.reradiated_fraction, 0.0);
    assert_eq!(snr.snr_at_bs_db, f64::NEG_INFINITY);
}

#[test]
fn bs_link_power_matches_the_pathloss_on_average() {
    let config = default_paper_scenario();
    let gain = bs_link_gain(&config).unwrap();
    assert_eq!(gain, pathloss_gain(config.bs_link.distance, 2.2, -30.0).unwrap());
    let seeds = 2000;
    let entries = (config.element_count() * config.bs_antennas) as f64;
    let mean: f64 = (0..seeds)
        .map(|s| synthesize_channels(&config, s).unwrap().bs_to_stars.norm_squared())
        .sum::<f64>()
        / seeds as f64;
    let ratio = mean / (entries * gain);
    assert!((ratio - 1.0).abs() < 0.02, "mean |G|^2 / (N M PL) = {ratio}");
}

#[test]
fn user_links_have_per_entry_pathloss_power() {
    let config = default_paper_scenario();
    let pl = pathloss_gain(20.0, 2.4, -30.0).unwrap();
    let seeds = 500;
    let mut total = 0.0;
    let mut count = 0;
    for s in 0..seeds {
        for h in synthesize_channels(&config, s).unwrap().user_to_stars {
            total += h.norm_squared();
            count += h.len();
        }
    }
    let ratio = total / count as f64 / pl;
    assert!((ratio - 1.0).abs() < 0.02, "per-entry power ratio {ratio}");
}
