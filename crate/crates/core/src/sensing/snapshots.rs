//! Noisy echo snapshots drawn from the echo model.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use super::{check_covariance, EchoModel};
use crate::channel::ChannelSet;
use crate::error::Result;
use crate::linalg::{psd_sqrt, CMat};
use crate::rng::{complex_gaussian, stream};
use crate::scene::{ArrayGeometry, ScenarioConfig};
use crate::serial;
use crate::stars::StarsProfile;

/// Ground truth behind a snapshot set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetTruth {
    pub target_id: usize,
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
    pub alpha: Complex64,
}

/// `M_s x L` echo samples at the sensing aperture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EchoSnapshots {
    #[serde(with = "serial::cmat")]
    pub data: CMat,
    pub truth: TargetTruth,
    pub seed: u64,
    /// Geometry of the sensing elements, in the row order of `data`.
    pub geometry: ArrayGeometry,
    /// Amplitude weight applied by each sensing element to its captured signal.
    pub weights: Vec<f64>,
}

/// `n x l` probing/symbol matrix with sample covariance `(1/L) W W^H = I`.
///
/// When `L >= n` the rows are distinct DFT sequences, which makes the sample
/// covariance exact. Otherwise rows are seeded QPSK symbols.
pub fn probing_waveform(n: usize, l: usize, seed: u64) -> CMat {
    if l >= n {
        CMat::from_fn(n, l, |r, c| {
            let k = (r * c) % l;
            Complex64::from_polar(1.0, -TAU * k as f64 / l as f64)
        })
    } else {
        let mut rng = stream(seed, "waveform", 0);
        CMat::from_fn(n, l, |_, _| {
            let q: u8 = rng.random_range(0..4);
            Complex64::from_polar(1.0, TAU * (f64::from(q) + 0.5) / 4.0)
        })
    }
}

/// Draws `L` noisy snapshots of target `target_id`.
///
/// The BS waveform is `R_x^{1/2} W` and user symbols are further rows of the
/// same probing matrix, so the stacked sources have sample covariance
/// `blkdiag(R_x, I)` whenever `L` is at least the number of sources.
pub fn echo_snapshots(
    config: &ScenarioConfig,
    channels: &ChannelSet,
    profile: &StarsProfile,
    r_x: &CMat,
    target_id: usize,
    seed: u64,
) -> Result<EchoSnapshots> {
    check_covariance(config, r_x)?;
    profile.check_feasible()?;
    let model = EchoModel::new(config, channels, profile, target_id)?;
    let g = &model.source_vectors(profile)[0];
    let n = config.bs_antennas;
    let sources = model.source_count();
    let l = config.snapshots;

    let w = probing_waveform(sources, l, seed);
    let mut y = w.clone();
    let x = psd_sqrt(r_x) * w.rows(0, n);
    y.rows_mut(0, n).copy_from(&x);
    let z = y.transpose() * g;

    let a = &model.aperture[0];
    let mut data = a * (z.transpose() * model.alpha);
    let sigma = config.noise_power_sensing.sqrt();
    let mut rng = stream(seed, "sensing_noise", target_id as u64);
    for c in 0..l {
        for r in 0..data.nrows() {
            data[(r, c)] += complex_gaussian(&mut rng) * sigma;
        }
    }

    let target = &config.targets[target_id];
    Ok(EchoSnapshots {
        data,
        truth: TargetTruth {
            target_id,
            azimuth_deg: target.azimuth.to_degrees(),
            elevation_deg: target.elevation.to_degrees(),
            alpha: model.alpha,
        },
        seed,
        geometry: model.sensing_geometry.clone(),
        weights: model.sensing_weights.clone(),
    })
}
