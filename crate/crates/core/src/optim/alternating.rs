//! Alternating optimization with an outer QoS penalty loop.

use num_complex::Complex64;

use super::covariance::{self, covariance_descent};
use super::phases::{self, phase_search};
use super::{finish, implementation_rho, initial_profile, target_for, OptimResult};
use crate::channel::ChannelSet;
use crate::comms::served_rates;
use crate::error::Result;
use crate::linalg::CMat;
use crate::rng::derive_seed;
use crate::scene::ScenarioConfig;
use crate::sensing::EchoModel;
use crate::stars::StarsProfile;

/// Iteration budgets of [`alternating_optimize_from`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AoSettings {
    /// Outer (covariance + phase) iterations per penalty round.
    pub max_outer: usize,
    pub penalty_start: f64,
    pub penalty_growth: f64,
    pub penalty_rounds: usize,
    /// Random phase restarts on the first outer iteration; `None` uses the scenario's.
    pub restarts: Option<usize>,
    pub covariance_steps: usize,
    pub phase_steps: usize,
    /// Relative improvement of the outer objective below which a round ends.
    pub outer_tol: f64,
}

impl Default for AoSettings {
    fn default() -> Self {
        Self {
            max_outer: 30,
            penalty_start: 10.0,
            penalty_growth: 10.0,
            penalty_rounds: 10,
            restarts: None,
            covariance_steps: covariance::MAX_STEPS,
            phase_steps: phases::MAX_STEPS,
            outer_tol: 1e-5,
        }
    }
}

impl AoSettings {
    /// Cheap budget for scoring many candidate designs.
    pub fn short() -> Self {
        Self {
            max_outer: 2,
            penalty_rounds: 3,
            restarts: Some(0),
            covariance_steps: 60,
            phase_steps: 60,
            ..Self::default()
        }
    }
}

#[derive(Clone)]
struct Iterate {
    r_x: CMat,
    profile: StarsProfile,
    crb: f64,
    shortfall: f64,
    feasible: bool,
}

impl Iterate {
    fn penalized(&self, penalty: f64) -> f64 {
        self.crb + penalty * self.shortfall
    }
}

fn evaluate(
    config: &ScenarioConfig,
    channels: &ChannelSet,
    model: &EchoModel,
    r_x: CMat,
    profile: StarsProfile,
) -> Result<Iterate> {
    let crb = super::azimuth_objective(model, &profile, &r_x);
    let rates = served_rates(channels, &profile, config)?;
    Ok(Iterate {
        r_x,
        crb,
        shortfall: rates.shortfall(),
        feasible: rates.feasible,
        profile,
    })
}

/// Alternating optimization for the configured phase, starting from
/// `R_x = (P/N) I` and seeded random phases.
pub fn alternating_optimize(config: &ScenarioConfig, channels: &ChannelSet, seed: u64) -> Result<OptimResult> {
    let init = initial_profile(config, config.phase, None, implementation_rho(config), seed)?;
    alternating_optimize_from(config, channels, &init, None, seed, &AoSettings::default())
}

/// Alternating optimization from an explicit starting design.
///
/// Each outer iteration runs the covariance step and then the phase step on
/// the penalized objective `rootCRB_az + penalty * shortfall`; the outer
/// iterate is kept only if it lowers that objective. The penalty grows by
/// `penalty_growth` after every round that ends QoS-infeasible. The best
/// QoS-feasible iterate seen is returned (the last iterate when none is
/// feasible), and `objective_trace` records its root-CRB after every accepted
/// outer iteration.
pub fn alternating_optimize_from(
    config: &ScenarioConfig,
    channels: &ChannelSet,
    init: &StarsProfile,
    r_init: Option<&CMat>,
    seed: u64,
    settings: &AoSettings,
) -> Result<OptimResult> {
    init.check_feasible()?;
    let side = init.active_side;
    let target_id = target_for(config, side)?;
    let model = EchoModel::new(config, channels, init, target_id)?;
    let power = config.bs_power_budget;
    let n = config.bs_antennas;
    let r0 = match r_init {
        Some(r) => r.clone(),
        None => CMat::identity(n, n) * Complex64::from(power / n as f64),
    };
    let restarts = settings.restarts.unwrap_or(config.phase_restarts);

    let mut current = evaluate(config, channels, &model, r0, init.clone())?;
    let mut best: Option<Iterate> = None;
    let mut objective_trace = Vec::new();
    let mut shortfall_trace = vec![current.shortfall];
    let record = |it: &Iterate, best: &mut Option<Iterate>, trace: &mut Vec<f64>| {
        if it.feasible && best.as_ref().is_none_or(|b| it.crb < b.crb) {
            *best = Some(it.clone());
        }
        if let Some(b) = best.as_ref() {
            trace.push(b.crb);
        }
    };
    record(&current, &mut best, &mut objective_trace);

    let mut penalty = settings.penalty_start;
    let mut outer_iterations = 0;
    let mut converged = false;
    let mut rounds = 0;

    for round in 0..settings.penalty_rounds {
        rounds = round + 1;
        converged = false;
        for it in 0..settings.max_outer {
            outer_iterations += 1;
            let r_x = covariance_descent(&model, &current.profile, power, &current.r_x, settings.covariance_steps)?;
            let starts = if outer_iterations == 1 { restarts } else { 0 };
            let restart_seed = derive_seed(seed, "ao_phase_restart", (round * settings.max_outer + it) as u64);
            let (profile, _) = phase_search(
                config,
                channels,
                &model,
                &current.profile,
                &r_x,
                penalty,
                starts,
                restart_seed,
                settings.phase_steps,
            );
            let candidate = evaluate(config, channels, &model, r_x, profile)?;
            let (old, new) = (current.penalized(penalty), candidate.penalized(penalty));
            if !(new < old) {
                converged = true;
                break;
            }
            current = candidate;
            shortfall_trace.push(current.shortfall);
            record(&current, &mut best, &mut objective_trace);
            if (old - new) / old.abs().max(f64::MIN_POSITIVE) < settings.outer_tol {
                converged = true;
                break;
            }
        }
        if current.feasible {
            break;
        }
        penalty *= settings.penalty_growth;
    }

    let mut notes = vec![format!("penalty rounds {rounds}, final penalty weight {penalty:e}")];
    let chosen = match best {
        Some(b) => b,
        None => {
            notes.push(format!(
                "QoS not met after {rounds} penalty rounds; shortfall {:.3e}",
                current.shortfall
            ));
            current
        }
    };
    let (root_crb, rates) = finish(config, channels, &model, chosen.r_x.clone(), chosen.profile.clone())?;
    Ok(OptimResult {
        r_x: chosen.r_x,
        profile: chosen.profile,
        objective_trace,
        shortfall_trace,
        root_crb,
        feasible: rates.feasible,
        rates,
        converged,
        outer_iterations,
        phase: side,
        target_id,
        wall_notes: notes,
    })
}
