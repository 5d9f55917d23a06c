//! 2D MUSIC direction finding on the sensing aperture and a Monte Carlo RMSE harness.

use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::snapshots::{echo_snapshots, EchoSnapshots};
use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigen, CMat, CVec};
use crate::rng::derive_seed;
use crate::scene::{ArrayGeometry, ScenarioConfig};
use crate::stars::StarsProfile;

/// Grid resolution used by [`monte_carlo_rmse`].
pub const DEFAULT_GRID_DEG: f64 = 1.0;

const MAX_REFINE_STEPS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoaEstimate {
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloRmse {
    pub rmse_az_deg: f64,
    pub rmse_el_deg: f64,
    pub trials: usize,
}

/// Weighted response evaluated for any elevation, including slightly past
/// zenith so the refinement stencil never has to be truncated.
fn response(geom: &ArrayGeometry, weights: &[f64], az_deg: f64, el_deg: f64) -> CVec {
    let (sa, ca) = az_deg.to_radians().sin_cos();
    let se = el_deg.to_radians().sin();
    let (u, v) = (se * ca, se * sa);
    CVec::from_iterator(
        geom.len(),
        geom.element_positions
            .iter()
            .zip(weights)
            .map(|(&(x, y), &w)| Complex64::from_polar(w, PI * (x * u + y * v))),
    )
}

/// Projection of the response onto the noise subspace:
/// `||a||^2 - |e_1^H a|^2`, minimized at the source direction.
struct NullSpectrum<'a> {
    geom: &'a ArrayGeometry,
    weights: &'a [f64],
    signal: CVec,
}

impl NullSpectrum<'_> {
    fn at(&self, az_deg: f64, el_deg: f64) -> f64 {
        let a = response(self.geom, self.weights, az_deg, el_deg);
        let proj: Complex64 = self.signal.iter().zip(a.iter()).map(|(e, x)| e.conj() * x).sum();
        a.norm_squared() - proj.norm_sqr()
    }
}

/// MUSIC estimate for a single source: grid minimum of the null spectrum over
/// azimuth `[0, 360)` and elevation `(0, 90]`, followed by one quadratic
/// refinement fitted on shrinking 3x3 neighbourhoods of the grid minimum.
pub fn music_estimate(snapshots: &EchoSnapshots, geom: &ArrayGeometry, grid_deg: f64) -> Result<DoaEstimate> {
    let ms = snapshots.data.nrows();
    if ms < 2 || geom.len() < 2 {
        return Err(Error::SubspaceUndefined(ms.min(geom.len())));
    }
    if geom.len() != ms {
        return Err(Error::Domain(format!(
            "geometry has {} elements but the snapshots have {ms} rows",
            geom.len()
        )));
    }
    if !(grid_deg > 0.0 && grid_deg <= 45.0) {
        return Err(Error::Domain(format!("grid resolution {grid_deg} deg outside (0, 45]")));
    }
    let l = snapshots.data.ncols();
    if l < ms {
        log::warn!("MUSIC with {l} snapshots on {ms} elements; the sample covariance is rank deficient");
    }
    let weights: Vec<f64> = if snapshots.weights.len() == ms {
        snapshots.weights.clone()
    } else {
        vec![1.0; ms]
    };
    let cov: CMat = &snapshots.data * snapshots.data.adjoint() / Complex64::from(l as f64);
    let (_, vectors) = hermitian_eigen(&cov);
    let spectrum = NullSpectrum {
        geom,
        weights: &weights,
        signal: vectors.column(ms - 1).into_owned(),
    };

    let n_az = (360.0 / grid_deg).round() as usize;
    let n_el = (90.0 / grid_deg).floor() as usize;
    let azimuths: Vec<f64> = (0..n_az).map(|i| i as f64 * grid_deg).collect();
    let elevations: Vec<f64> = (0..n_el).map(|k| 90.0 - k as f64 * grid_deg).filter(|&e| e > 0.0).collect();

    let (best_az, best_el, best) = azimuths
        .par_iter()
        .map(|&az| {
            elevations
                .iter()
                .map(|&el| (az, el, spectrum.at(az, el)))
                .fold((az, 90.0, f64::INFINITY), |acc, c| if c.2 < acc.2 { c } else { acc })
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold((0.0, 90.0, f64::INFINITY), |acc, c| if c.2 < acc.2 { c } else { acc });

    // Newton steps on a quadratic fitted to a 3x3 stencil, with backtracking.
    // The stencil follows the step length so the fit stays local; it shrinks
    // when no step along the fitted direction improves.
    let floor = 1e-12 * weights.len() as f64;
    let (mut az, mut el, mut f0) = (best_az, best_el, best);
    let mut h = grid_deg;
    for _ in 0..MAX_REFINE_STEPS {
        if h < grid_deg * 1e-6 {
            break;
        }
        let step = quadratic_step(&spectrum, az, el, f0, h, grid_deg) * h;
        let mut moved = None;
        let mut t = 1.0;
        for _ in 0..12 {
            let (cand_az, cand_el) = (az + t * step[0], (el + t * step[1]).min(90.0));
            if cand_el > 0.0 {
                let value = spectrum.at(cand_az, cand_el);
                if value < f0 - floor {
                    moved = Some((cand_az, cand_el, value, t * step.amax()));
                    break;
                }
            }
            t *= 0.5;
        }
        match moved {
            Some((a, e, v, len)) => {
                (az, el, f0) = (a, e, v);
                h = (2.0 * len).clamp(grid_deg * 1e-6, grid_deg);
            }
            None => h /= 4.0,
        }
    }
    Ok(DoaEstimate {
        azimuth_deg: az.rem_euclid(360.0),
        elevation_deg: el,
    })
}

/// Step, in units of `h`, towards the minimum of the quadratic fitted at
/// `(az, el)`: the Newton step when the fit is convex and the step is at most
/// a grid cell long, otherwise per-axis steps clamped to half a stencil.
fn quadratic_step(spectrum: &NullSpectrum<'_>, az: f64, el: f64, f0: f64, h: f64, grid: f64) -> Vector2<f64> {
    let f = |da: f64, de: f64| spectrum.at(az + da * h, el + de * h);
    let (fpa, fma, fpe, fme) = (f(1.0, 0.0), f(-1.0, 0.0), f(0.0, 1.0), f(0.0, -1.0));
    let grad = Vector2::new((fpa - fma) / 2.0, (fpe - fme) / 2.0);
    let haa = fpa - 2.0 * f0 + fma;
    let hee = fpe - 2.0 * f0 + fme;
    let hae = (f(1.0, 1.0) - f(1.0, -1.0) - f(-1.0, 1.0) + f(-1.0, -1.0)) / 4.0;
    let hess = Matrix2::new(haa, hae, hae, hee);
    let newton = if hess.determinant() > 0.0 && haa > 0.0 {
        hess.try_inverse().map(|inv| -(inv * grad))
    } else {
        None
    };
    match newton {
        Some(s) if s.amax() * h <= grid => s,
        _ => Vector2::new(axis_step(grad[0], haa), axis_step(grad[1], hee)),
    }
}

fn axis_step(grad: f64, curvature: f64) -> f64 {
    if curvature > 0.0 {
        (-grad / curvature).clamp(-0.5, 0.5)
    } else {
        0.0
    }
}

/// Signed azimuth difference wrapped to `(-180, 180]`.
pub fn azimuth_error_deg(estimate: f64, truth: f64) -> f64 {
    let d = (estimate - truth).rem_euclid(360.0);
    if d > 180.0 {
        d - 360.0
    } else {
        d
    }
}

/// RMSE of [`music_estimate`] over `trials` independently seeded snapshot sets.
///
/// Trial `i` uses the seed derived from `(master_seed, "trial", i)`, so the
/// first `n` trials are shared between runs of `n` and `2n` trials.
pub fn monte_carlo_rmse(
    config: &ScenarioConfig,
    channels: &ChannelSet,
    profile: &StarsProfile,
    r_x: &CMat,
    target_id: usize,
    trials: usize,
    master_seed: u64,
) -> Result<MonteCarloRmse> {
    monte_carlo_rmse_on_grid(config, channels, profile, r_x, target_id, trials, master_seed, DEFAULT_GRID_DEG)
}

/// [`monte_carlo_rmse`] with an explicit grid resolution.
#[allow(clippy::too_many_arguments)]
pub fn monte_carlo_rmse_on_grid(
    config: &ScenarioConfig,
    channels: &ChannelSet,
    profile: &StarsProfile,
    r_x: &CMat,
    target_id: usize,
    trials: usize,
    master_seed: u64,
    grid_deg: f64,
) -> Result<MonteCarloRmse> {
    if trials == 0 {
        return Err(Error::Domain("at least one trial is required".into()));
    }
    let errors: Vec<(f64, f64)> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let seed = derive_seed(master_seed, "trial", i as u64);
            let snaps = echo_snapshots(config, channels, profile, r_x, target_id, seed)?;
            let est = music_estimate(&snaps, &snaps.geometry, grid_deg)?;
            Ok((
                azimuth_error_deg(est.azimuth_deg, snaps.truth.azimuth_deg),
                est.elevation_deg - snaps.truth.elevation_deg,
            ))
        })
        .collect::<Result<_>>()?;
    let (sa, se) = errors
        .iter()
        .fold((0.0, 0.0), |(a, e), (da, de)| (a + da * da, e + de * de));
    Ok(MonteCarloRmse {
        rmse_az_deg: (sa / trials as f64).sqrt(),
        rmse_el_deg: (se / trials as f64).sqrt(),
        trials,
    })
}
