//! Joint design of the BS sensing covariance and the surface coefficients:
//! minimize the azimuth root-CRB of the phase's target subject to per-user
//! uplink rate targets.

mod alternating;
mod baseline;
mod covariance;
mod phases;
mod search;

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::channel::ChannelSet;
use crate::comms::{served_rates, RateReport};
use crate::error::Result;
use crate::linalg::{asymmetry, from_eigen, hermitian_eigen, hermitian_part, CMat};
use crate::rng::stream;
use crate::scene::{Implementation, Region, ScenarioConfig};
use crate::sensing::{EchoModel, RootCrb};
use crate::serial;
use crate::stars::{assign_roles, plan_for, Role, StarsProfile};

pub use alternating::{alternating_optimize, alternating_optimize_from, AoSettings};
pub use baseline::{baseline_profile, optimize_baseline_dual_ris};
pub use covariance::{optimize_covariance, rank_one_illumination};
pub use phases::{optimize_phases, optimize_phases_seeded};
pub use search::{golden_section_min, optimize_mode_selection, optimize_power_split, GoldenOutcome};

/// Outcome of one optimizer run for a single phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimResult {
    #[serde(with = "serial::cmat")]
    pub r_x: CMat,
    pub profile: StarsProfile,
    /// Azimuth root-CRB (degrees) of every accepted QoS-feasible outer iterate.
    pub objective_trace: Vec<f64>,
    /// QoS shortfall `sum_u max(0, R_min - rate_u)^2` of every accepted outer iterate.
    pub shortfall_trace: Vec<f64>,
    /// Root-CRB of the returned design.
    pub root_crb: RootCrb,
    pub rates: RateReport,
    pub converged: bool,
    pub outer_iterations: usize,
    pub feasible: bool,
    pub phase: Region,
    pub target_id: usize,
    pub wall_notes: Vec<String>,
}

impl OptimResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("optimizer results serialize")
    }

    /// Preference order between two designs: QoS-feasible first, then lower
    /// azimuth root-CRB, then lower shortfall.
    pub fn better_than(&self, other: &OptimResult) -> bool {
        match (self.feasible, other.feasible) {
            (true, false) => true,
            (false, true) => false,
            (true, true) => self.root_crb.azimuth_deg < other.root_crb.azimuth_deg,
            (false, false) => {
                let (a, b) = (self.rates.shortfall(), other.rates.shortfall());
                a < b || (a == b && self.root_crb.azimuth_deg < other.root_crb.azimuth_deg)
            }
        }
    }
}

/// Projection onto `{R : R >= 0, tr R <= P}` used by the covariance step:
/// negative eigenvalues are clamped to zero and the spectrum is rescaled by
/// `P / trace` when the trace exceeds the budget.
pub fn project_psd_trace(h: &CMat, power: f64) -> CMat {
    let skew = asymmetry(h);
    if skew > 1e-8 {
        log::warn!("project_psd_trace: input asymmetry {skew:.3e}, symmetrizing");
    }
    let (values, vectors) = hermitian_eigen(&hermitian_part(h));
    let mut clamped: Vec<f64> = values.iter().map(|v| v.max(0.0)).collect();
    let trace: f64 = clamped.iter().sum();
    if trace > power {
        let s = power / trace;
        clamped.iter_mut().for_each(|v| *v *= s);
    }
    from_eigen(&clamped, &vectors)
}

/// Azimuth root-CRB (degrees) or `+inf` when the target is unidentifiable.
pub(crate) fn azimuth_objective(model: &EchoModel, profile: &StarsProfile, r_x: &CMat) -> f64 {
    let r_y = model.extended_covariance(r_x);
    model
        .root_crb(profile, &r_y)
        .map(|r| r.azimuth_deg)
        .unwrap_or(f64::INFINITY)
}

/// Uniform random phases for `count` elements.
pub(crate) fn random_phases(seed: u64, purpose: &str, index: u64, count: usize) -> Vec<f64> {
    let mut rng = stream(seed, purpose, index);
    (0..count).map(|_| rng.random_range(0.0..TAU)).collect()
}

/// Starting profile for the configured implementation and phase: roles from
/// the configured sensing pattern (or `roles` when given), every re-radiating
/// element in the phase's full mode with seeded random phases.
pub fn initial_profile(
    config: &ScenarioConfig,
    side: Region,
    roles: Option<&[Role]>,
    rho: f64,
    seed: u64,
) -> Result<StarsProfile> {
    let m = config.element_count();
    let indices: Vec<usize> = (0..m).collect();
    let roles = match roles {
        Some(r) => r.to_vec(),
        None => assign_roles(m, config.sensing_element_count, config.sensing_pattern)?,
    };
    let phases = random_phases(seed, "initial_phases", side as u64, m);
    Ok(StarsProfile::full_mode(
        config.implementation,
        &indices,
        &roles,
        side,
        &phases,
        rho,
    ))
}

pub(crate) fn finish(
    config: &ScenarioConfig,
    channels: &ChannelSet,
    model: &EchoModel,
    r_x: CMat,
    profile: StarsProfile,
) -> Result<(RootCrb, RateReport)> {
    let r_y = model.extended_covariance(&r_x);
    let crb = model.root_crb(&profile, &r_y)?;
    let rates = served_rates(channels, &profile, config)?;
    Ok((crb, rates))
}

pub(crate) fn target_for(config: &ScenarioConfig, side: Region) -> Result<usize> {
    Ok(plan_for(config, side)?.target_id)
}

pub(crate) fn implementation_rho(config: &ScenarioConfig) -> f64 {
    match config.implementation {
        Implementation::Pse => config.shared_rho,
        _ => 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::trace_re;
    use num_complex::Complex64;

    fn diag(values: &[f64]) -> CMat {
        CMat::from_diagonal(&nalgebra::DVector::from_iterator(
            values.len(),
            values.iter().map(|&v| Complex64::from(v)),
        ))
    }

    #[test]
    fn projection_examples() {
        let feasible = diag(&[0.3, 0.2]);
        assert!((project_psd_trace(&feasible, 1.0) - &feasible).norm() < 1e-12);
        let clamped = project_psd_trace(&diag(&[2.0, -1.0]), 10.0);
        assert!((clamped - diag(&[2.0, 0.0])).norm() < 1e-12);
        let scaled = project_psd_trace(&CMat::identity(2, 2), 1.0);
        assert!((scaled.clone() - diag(&[0.5, 0.5])).norm() < 1e-12);
        assert!((trace_re(&scaled) - 1.0).abs() < 1e-12);
    }
}
