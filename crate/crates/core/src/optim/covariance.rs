//! Projected-gradient design of the BS sensing covariance.

use num_complex::Complex64;

use super::{azimuth_objective, project_psd_trace};
use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::linalg::{CMat, CVec};
use crate::scene::ScenarioConfig;
use crate::sensing::EchoModel;
use crate::stars::StarsProfile;

pub(crate) const MAX_STEPS: usize = 500;
const REL_TOL: f64 = 1e-7;
const MIN_STEP: f64 = 1e-12;

/// `P v v^H / ||v||^2` with `v = (d^T Theta G)^H`: all power along the
/// cascaded BS-to-target direction.
pub fn rank_one_illumination(model: &EchoModel, profile: &StarsProfile, power: f64) -> Result<CMat> {
    let n = model.bs_antennas;
    let bs_mode = model.source_modes.first().copied().unwrap_or(profile.active_side);
    let coeff = profile.coefficients(bs_mode);
    let mut row = CVec::zeros(n);
    for m in 0..profile.len() {
        let w = model.target[0][m] * coeff[m];
        for c in 0..n {
            row[c] += w * model.sources[(m, c)];
        }
    }
    let v = row.map(|z| z.conj());
    let norm2 = v.norm_squared();
    if !(norm2 > 0.0) {
        return Err(Error::Unidentifiable {
            target_id: model.target_id,
            reason: "the surface passes no BS power towards the target".into(),
        });
    }
    Ok((&v * v.adjoint()) * Complex64::from(power / norm2))
}

pub(crate) fn covariance_descent(
    model: &EchoModel,
    profile: &StarsProfile,
    power: f64,
    r_init: &CMat,
    max_steps: usize,
) -> Result<CMat> {
    let mut r = project_psd_trace(r_init, power);
    let mut value = azimuth_objective(model, profile, &r);
    if !value.is_finite() {
        log::debug!("covariance step: singular FIM at the initial point, using rank-one illumination");
        r = rank_one_illumination(model, profile, power)?;
        value = azimuth_objective(model, profile, &r);
        if !value.is_finite() {
            return Err(Error::Unidentifiable {
                target_id: model.target_id,
                reason: "Fisher information stays singular under rank-one illumination".into(),
            });
        }
    }
    for _ in 0..max_steps {
        let (_, grad) = model.root_crb_rx_gradient(profile, &r)?;
        let gnorm = grad.norm();
        if !(gnorm > 0.0) {
            break;
        }
        let direction = grad * Complex64::from(-power / gnorm);
        let mut step = 1.0;
        let mut accepted = None;
        while step >= MIN_STEP {
            let cand = project_psd_trace(&(&r + &direction * Complex64::from(step)), power);
            let v = azimuth_objective(model, profile, &cand);
            if v < value {
                accepted = Some((cand, v));
                break;
            }
            step *= 0.5;
        }
        let Some((cand, v)) = accepted else { break };
        let improvement = (value - v) / value;
        r = cand;
        value = v;
        if improvement < REL_TOL {
            break;
        }
    }
    Ok(r)
}

/// Minimizes the azimuth root-CRB over `{R_x >= 0, tr R_x <= P}` for a fixed
/// surface profile by projected gradient descent with backtracking. A
/// singular starting point is replaced by [`rank_one_illumination`].
pub fn optimize_covariance(
    config: &ScenarioConfig,
    channels: &ChannelSet,
    profile: &StarsProfile,
    r_x_init: &CMat,
) -> Result<CMat> {
    profile.check_feasible()?;
    let plan_target = super::target_for(config, profile.active_side)?;
    let model = EchoModel::new(config, channels, profile, plan_target)?;
    covariance_descent(&model, profile, config.bs_power_budget, r_x_init, MAX_STEPS)
}
