//! Implementation-specific outer searches: role assignment for mode-selection
//! surfaces and the shared splitting ratio for power-splitting surfaces.

use rayon::prelude::*;

use super::alternating::{alternating_optimize_from, AoSettings};
use super::{initial_profile, OptimResult};
use crate::channel::ChannelSet;
use crate::error::{config_err, Result};
use crate::scene::{Implementation, ScenarioConfig};
use crate::stars::{assign_roles, Role, StarsProfile};

const MAX_SWAPS: usize = 50;
const RHO_RANGE: (f64, f64) = (0.01, 0.99);
const RHO_TOL: f64 = 1e-3;
const FALLBACK_GRID: usize = 20;

fn require(config: &ScenarioConfig, implementation: Implementation) -> Result<()> {
    if config.implementation != implementation {
        return Err(config_err(
            "implementation",
            format!(
                "this search needs {} but the scenario uses {}",
                implementation.as_str(),
                config.implementation.as_str()
            ),
        ));
    }
    Ok(())
}

/// Profile with new roles, keeping the phases of `base`.
fn with_roles(config: &ScenarioConfig, base: &StarsProfile, roles: &[Role]) -> StarsProfile {
    let side = base.active_side;
    StarsProfile::full_mode(
        config.implementation,
        &base.indices(),
        roles,
        side,
        &base.phases(side),
        0.0,
    )
}

/// Role vectors one move away from `roles`: a sensing/passive exchange when
/// the sensing count is pinned, a single flip otherwise.
fn neighbours(roles: &[Role], pinned: bool) -> Vec<Vec<Role>> {
    let m = roles.len();
    let sensing = roles.iter().filter(|&&r| r == Role::Sensing).count();
    let mut out = Vec::new();
    if pinned {
        for i in (0..m).filter(|&i| roles[i] == Role::Sensing) {
            for j in (0..m).filter(|&j| roles[j] == Role::Passive) {
                let mut r = roles.to_vec();
                r.swap(i, j);
                out.push(r);
            }
        }
    } else {
        for i in 0..m {
            let mut r = roles.to_vec();
            match roles[i] {
                Role::Sensing if sensing > 1 => r[i] = Role::Passive,
                Role::Passive if sensing < m - 1 => r[i] = Role::Sensing,
                _ => continue,
            }
            out.push(r);
        }
    }
    out
}

/// Greedy role search for mode-selection surfaces.
///
/// Starting from the configured sensing pattern, every neighbouring role
/// assignment is scored by a short warm-started alternating optimization; the
/// best improving move is taken until none improves or 50 moves were made.
/// A full alternating optimization on the final roles follows, and the result
/// is never worse than the full optimization of the starting roles.
pub fn optimize_mode_selection(config: &ScenarioConfig, channels: &ChannelSet, seed: u64) -> Result<OptimResult> {
    require(config, Implementation::Mse)?;
    let m = config.element_count();
    let start_roles = assign_roles(m, config.sensing_element_count, config.sensing_pattern)?;
    let init = initial_profile(config, config.phase, Some(&start_roles), 0.0, seed)?;
    let settings = AoSettings::default();
    let start = alternating_optimize_from(config, channels, &init, None, seed, &settings)?;

    let short = AoSettings::short();
    let mut best = start.clone();
    let mut roles = start_roles;
    let mut swaps = 0;
    while swaps < MAX_SWAPS {
        let candidates = neighbours(&roles, config.pin_sensing_count);
        let scored: Vec<Option<OptimResult>> = candidates
            .par_iter()
            .map(|r| {
                let profile = with_roles(config, &best.profile, r);
                alternating_optimize_from(config, channels, &profile, Some(&best.r_x), seed, &short).ok()
            })
            .collect();
        let mut pick: Option<(usize, OptimResult)> = None;
        for (i, cand) in scored.into_iter().enumerate() {
            let Some(cand) = cand else { continue };
            let beats_pick = pick.as_ref().is_none_or(|(_, p)| cand.better_than(p));
            if cand.better_than(&best) && beats_pick {
                pick = Some((i, cand));
            }
        }
        let Some((i, cand)) = pick else { break };
        roles = candidates[i].clone();
        best = cand;
        swaps += 1;
    }

    let mut result = if swaps > 0 {
        let profile = with_roles(config, &best.profile, &roles);
        let full = alternating_optimize_from(config, channels, &profile, Some(&best.r_x), seed, &settings)?;
        if full.better_than(&start) {
            full
        } else {
            start
        }
    } else {
        start
    };
    result.wall_notes.push(format!(
        "mode selection: {swaps} role moves, {} sensing elements",
        result.profile.sensing_count()
    ));
    Ok(result)
}

/// Result of [`golden_section_min`].
#[derive(Debug, Clone, PartialEq)]
pub struct GoldenOutcome {
    pub x: f64,
    pub value: f64,
    /// Every `(x, f(x))` evaluated, in evaluation order.
    pub evaluations: Vec<(f64, f64)>,
    /// Whether the samples contradicted unimodality and the grid fallback ran.
    pub fallback: bool,
}

/// Golden-section minimization of `f` on `[a, b]` down to bracket width `tol`.
///
/// The endpoints are probed as well. If the samples are not valley shaped
/// (a sign of a non-unimodal `f`), a `grid`-point uniform grid is evaluated
/// and the best sample overall is returned.
pub fn golden_section_min<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64, grid: usize) -> GoldenOutcome {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut evals = Vec::new();
    let mut eval = |x: f64, evals: &mut Vec<(f64, f64)>| {
        let v = f(x);
        evals.push((x, v));
        v
    };
    eval(a, &mut evals);
    eval(b, &mut evals);
    let (mut lo, mut hi) = (a, b);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = eval(x1, &mut evals);
    let mut f2 = eval(x2, &mut evals);
    while hi - lo > tol {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = eval(x1, &mut evals);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = eval(x2, &mut evals);
        }
    }

    let fallback = !valley_shaped(&evals);
    if fallback {
        log::warn!("golden-section samples are not unimodal; falling back to a {grid}-point grid");
        for k in 0..grid {
            let x = a + (b - a) * k as f64 / (grid.max(2) - 1) as f64;
            eval(x, &mut evals);
        }
    }
    let (x, value) = evals
        .iter()
        .copied()
        .fold((f64::NAN, f64::INFINITY), |best, e| if e.1 < best.1 { e } else { best });
    GoldenOutcome {
        x,
        value,
        evaluations: evals,
        fallback,
    }
}

/// Whether samples sorted by abscissa fall then rise.
fn valley_shaped(evals: &[(f64, f64)]) -> bool {
    let mut pts = evals.to_vec();
    pts.sort_by(|p, q| p.0.total_cmp(&q.0));
    pts.dedup_by(|p, q| p.0 == q.0);
    let mut rising = false;
    for w in pts.windows(2) {
        if w[1].1 > w[0].1 {
            rising = true;
        } else if rising && w[1].1 < w[0].1 {
            return false;
        }
    }
    true
}

/// Scalar score for the splitting-ratio search: feasible designs by root-CRB,
/// infeasible ones ranked after every feasible design.
fn split_score(result: &Result<OptimResult>) -> f64 {
    match result {
        Ok(r) if r.feasible => r.root_crb.azimuth_deg,
        Ok(r) => 1e6 * (1.0 + r.rates.shortfall()) + r.root_crb.azimuth_deg,
        Err(_) => f64::INFINITY,
    }
}

/// Golden-section search over the shared splitting ratio in `[0.01, 0.99]`,
/// with a full alternating optimization at every evaluated ratio.
pub fn optimize_power_split(config: &ScenarioConfig, channels: &ChannelSet, seed: u64) -> Result<OptimResult> {
    require(config, Implementation::Pse)?;
    let settings = AoSettings::default();
    let mut results: Vec<(f64, Result<OptimResult>)> = Vec::new();
    let outcome = golden_section_min(
        |rho| {
            if let Some((_, r)) = results.iter().find(|(x, _)| *x == rho) {
                return split_score(r);
            }
            let run = initial_profile(config, config.phase, None, rho, seed)
                .and_then(|init| alternating_optimize_from(config, channels, &init, None, seed, &settings));
            let score = split_score(&run);
            results.push((rho, run));
            score
        },
        RHO_RANGE.0,
        RHO_RANGE.1,
        RHO_TOL,
        FALLBACK_GRID,
    );
    let (_, best) = results
        .into_iter()
        .find(|(x, _)| *x == outcome.x)
        .expect("the best ratio was evaluated");
    let mut best = best?;
    best.wall_notes.push(format!(
        "power split: shared rho {:.4} after {} evaluations{}",
        outcome.x,
        outcome.evaluations.len(),
        if outcome.fallback { ", grid fallback used" } else { "" }
    ));
    Ok(best)
}
