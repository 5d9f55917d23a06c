//! Phase design: penalized gradient descent over the active-side phases.
//!
//! Both gradients are analytic: the CRB part comes from the Fisher closed
//! form, the rate part from differentiating the MMSE SINR.

use rayon::prelude::*;

use super::{random_phases, target_for};
use crate::channel::ChannelSet;
use crate::comms::{rate_phase_gradients, served_rates};
use crate::error::Result;
use crate::linalg::CMat;
use crate::scene::ScenarioConfig;
use crate::sensing::EchoModel;
use crate::stars::{project_feasible, StarsProfile};

pub(crate) const MAX_STEPS: usize = 300;
const REL_TOL: f64 = 1e-6;
const MIN_STEP: f64 = 1e-10;

/// Penalized objective `rootCRB_az + penalty * sum_u max(0, R_min - rate_u)^2`.
pub(crate) struct PhaseObjective<'a> {
    pub config: &'a ScenarioConfig,
    pub channels: &'a ChannelSet,
    pub model: &'a EchoModel,
    pub r_y: CMat,
    pub penalty: f64,
}

impl PhaseObjective<'_> {
    pub fn value(&self, profile: &StarsProfile) -> f64 {
        let crb = match self.model.root_crb(profile, &self.r_y) {
            Ok(r) => r.azimuth_deg,
            Err(_) => return f64::INFINITY,
        };
        if self.penalty == 0.0 {
            return crb;
        }
        match served_rates(self.channels, profile, self.config) {
            Ok(rates) => crb + self.penalty * rates.shortfall(),
            Err(_) => f64::INFINITY,
        }
    }

    /// Objective value and its gradient over all profile elements.
    pub fn gradient(&self, profile: &StarsProfile) -> Result<(f64, Vec<f64>)> {
        let side = profile.active_side;
        let (crb, mut grad) = self.model.root_crb_phase_gradient(profile, &self.r_y, side)?;
        let mut value = crb;
        if self.penalty != 0.0 {
            let (rates, rate_grads) = rate_phase_gradients(self.channels, profile, self.config)?;
            value += self.penalty * rates.shortfall();
            for (u, row) in rate_grads.iter().enumerate() {
                let deficit = (-rates.qos_slack[u]).max(0.0);
                if deficit == 0.0 {
                    continue;
                }
                for (g, d) in grad.iter_mut().zip(row) {
                    *g -= 2.0 * self.penalty * deficit * d;
                }
            }
        }
        Ok((value, grad))
    }

    /// Normalized gradient descent with backtracking from `start`.
    pub fn descend(&self, start: &StarsProfile, max_steps: usize) -> (StarsProfile, f64) {
        let side = start.active_side;
        let vars = start.tunable(side);
        let mut profile = start.clone();
        let mut value = self.value(&profile);
        if vars.is_empty() || !value.is_finite() {
            return (profile, value);
        }
        let mut step = std::f64::consts::PI;
        for _ in 0..max_steps {
            let Ok((_, grad)) = self.gradient(&profile) else { break };
            let scale = vars.iter().map(|&i| grad[i].abs()).fold(0.0, f64::max);
            if !(scale > 0.0) {
                break;
            }
            let mut trial_step = (2.0 * step).min(std::f64::consts::PI);
            let mut accepted = None;
            while trial_step >= MIN_STEP {
                let mut cand = profile.clone();
                for &i in &vars {
                    let e = &mut cand.elements[i];
                    e.set_phi(side, e.phi(side) - trial_step * grad[i] / scale);
                }
                let cand = project_feasible(&cand);
                let v = self.value(&cand);
                if v < value {
                    accepted = Some((cand, v));
                    break;
                }
                trial_step *= 0.5;
            }
            let Some((cand, v)) = accepted else { break };
            let improvement = (value - v) / value.abs().max(f64::MIN_POSITIVE);
            profile = cand;
            value = v;
            step = trial_step;
            if improvement < REL_TOL {
                break;
            }
        }
        (profile, value)
    }
}

/// Best of a descent from `profile_init` and `restarts` descents from seeded
/// random phases. Starts run in parallel; ties resolve to the lower start index.
#[allow(clippy::too_many_arguments)]
pub fn optimize_phases_seeded(
    config: &ScenarioConfig,
    channels: &ChannelSet,
    profile_init: &StarsProfile,
    r_x: &CMat,
    penalty_weight: f64,
    restarts: usize,
    seed: u64,
) -> Result<StarsProfile> {
    let target_id = target_for(config, profile_init.active_side)?;
    let model = EchoModel::new(config, channels, profile_init, target_id)?;
    Ok(phase_search(config, channels, &model, profile_init, r_x, penalty_weight, restarts, seed, MAX_STEPS).0)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn phase_search(
    config: &ScenarioConfig,
    channels: &ChannelSet,
    model: &EchoModel,
    profile_init: &StarsProfile,
    r_x: &CMat,
    penalty_weight: f64,
    restarts: usize,
    seed: u64,
    max_steps: usize,
) -> (StarsProfile, f64) {
    let objective = PhaseObjective {
        config,
        channels,
        model,
        r_y: model.extended_covariance(r_x),
        penalty: penalty_weight,
    };
    let side = profile_init.active_side;
    if profile_init.tunable(side).is_empty() {
        let v = objective.value(profile_init);
        return (profile_init.clone(), v);
    }
    let runs: Vec<(StarsProfile, f64)> = (0..=restarts)
        .into_par_iter()
        .map(|k| {
            let start = if k == 0 {
                profile_init.clone()
            } else {
                let phases = random_phases(seed, "phase_restart", k as u64, profile_init.len());
                profile_init.with_phases(side, &phases)
            };
            objective.descend(&start, max_steps)
        })
        .collect();
    runs.into_iter()
        .fold(None, |best: Option<(StarsProfile, f64)>, run| match best {
            Some(b) if !(run.1 < b.1) => Some(b),
            _ => Some(run),
        })
        .expect("at least one start")
}

/// Minimizes `rootCRB_az + penalty * sum_u max(0, R_min - rate_u)^2` over the
/// active-side phases of the tunable elements, with the configured number of
/// random restarts (restart seed 0).
pub fn optimize_phases(
    config: &ScenarioConfig,
    channels: &ChannelSet,
    profile_init: &StarsProfile,
    r_x: &CMat,
    penalty_weight: f64,
) -> Result<StarsProfile> {
    optimize_phases_seeded(
        config,
        channels,
        profile_init,
        r_x,
        penalty_weight,
        config.phase_restarts,
        0,
    )
}
