//! STARS element state: roles, transmission/reflection coefficients,
//! power-splitting ratios and the two-phase schedule.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_1_SQRT_2, TAU};

use crate::error::{config_err, Error, Result};
use crate::scene::{Implementation, Region, ScenarioConfig, SensingPattern};

/// Tolerance on the energy-conservation equalities.
pub const ENERGY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    /// Re-radiates all incident power.
    Passive,
    /// Absorbs all incident power into the sensing receiver.
    Sensing,
    /// Power-splitting element: re-radiates `1 - rho`, senses `rho`.
    Split,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElementState {
    /// Position index on the STARS aperture.
    pub index: usize,
    pub role: Role,
    pub beta_t: f64,
    pub beta_r: f64,
    pub phi_t: f64,
    pub phi_r: f64,
    pub rho: f64,
}

impl ElementState {
    fn amplitude_budget(&self) -> f64 {
        match self.role {
            Role::Passive => 1.0,
            Role::Sensing => 0.0,
            Role::Split => 1.0 - self.rho,
        }
    }

    /// Fraction of the incident power delivered to the sensing receiver.
    pub fn sensing_fraction(&self) -> f64 {
        match self.role {
            Role::Passive => 0.0,
            Role::Sensing => 1.0,
            Role::Split => self.rho,
        }
    }

    pub fn beta(&self, side: Region) -> f64 {
        match side {
            Region::Reflection => self.beta_r,
            Region::Transmission => self.beta_t,
        }
    }

    pub fn phi(&self, side: Region) -> f64 {
        match side {
            Region::Reflection => self.phi_r,
            Region::Transmission => self.phi_t,
        }
    }

    pub fn set_phi(&mut self, side: Region, phi: f64) {
        match side {
            Region::Reflection => self.phi_r = phi,
            Region::Transmission => self.phi_t = phi,
        }
    }

    pub fn coefficient(&self, side: Region) -> Complex64 {
        Complex64::from_polar(self.beta(side), self.phi(side))
    }
}

/// Per-element configuration of one surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StarsProfile {
    pub implementation: Implementation,
    /// Side whose users are served and whose phases are optimized.
    pub active_side: Region,
    pub elements: Vec<ElementState>,
}

fn wrap_phase(phi: f64) -> f64 {
    let w = phi.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

impl StarsProfile {
    /// Full-reflection or full-transmission profile: every re-radiating element
    /// puts its whole amplitude budget on `side` with the given phases.
    ///
    /// `indices` are aperture positions and `roles` their roles; for
    /// [`Implementation::Pse`] roles are ignored and every element splits with
    /// ratio `rho`.
    pub fn full_mode(
        implementation: Implementation,
        indices: &[usize],
        roles: &[Role],
        side: Region,
        phases: &[f64],
        rho: f64,
    ) -> Self {
        assert_eq!(indices.len(), phases.len());
        let elements = indices
            .iter()
            .zip(phases)
            .enumerate()
            .map(|(i, (&index, &phi))| {
                let (role, rho) = match implementation {
                    Implementation::Pse => (Role::Split, rho),
                    _ => (roles[i], 0.0),
                };
                let mut e = ElementState {
                    index,
                    role,
                    beta_t: 0.0,
                    beta_r: 0.0,
                    phi_t: 0.0,
                    phi_r: 0.0,
                    rho,
                };
                let amp = e.amplitude_budget().max(0.0).sqrt();
                match side {
                    Region::Reflection => e.beta_r = amp,
                    Region::Transmission => e.beta_t = amp,
                }
                e.set_phi(side, wrap_phase(phi));
                e
            })
            .collect();
        Self {
            implementation,
            active_side: side,
            elements,
        }
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn roles(&self) -> Vec<Role> {
        self.elements.iter().map(|e| e.role).collect()
    }

    pub fn indices(&self) -> Vec<usize> {
        self.elements.iter().map(|e| e.index).collect()
    }

    /// Number of elements feeding the sensing receiver.
    pub fn sensing_count(&self) -> usize {
        self.elements.iter().filter(|e| e.sensing_fraction() > 0.0).count()
    }

    /// Positions (in profile order) of elements whose `side` phase is a
    /// meaningful optimization variable.
    pub fn tunable(&self, side: Region) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.elements[i].role != Role::Sensing && self.elements[i].beta(side) > 0.0)
            .collect()
    }

    /// Elements violating energy conservation or their role constraints.
    pub fn violations(&self) -> Vec<usize> {
        self.elements
            .iter()
            .enumerate()
            .filter(|(_, e)| {
                let bounded = (0.0..=1.0).contains(&e.beta_t)
                    && (0.0..=1.0).contains(&e.beta_r)
                    && (0.0..=1.0).contains(&e.rho);
                let energy = e.beta_t * e.beta_t + e.beta_r * e.beta_r;
                let role_ok = match e.role {
                    Role::Split => true,
                    _ => e.rho == 0.0,
                };
                !(bounded && role_ok && (energy - e.amplitude_budget()).abs() <= ENERGY_TOL)
            })
            .map(|(i, _)| i)
            .collect()
    }

    pub fn check_feasible(&self) -> Result<()> {
        let bad = self.violations();
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Constraint {
                elements: bad,
                message: "energy conservation or role constraint violated".into(),
            })
        }
    }

    /// Diagonal of the `side` coefficient matrix, without feasibility checks.
    pub fn coefficients(&self, side: Region) -> DVector<Complex64> {
        DVector::from_iterator(self.len(), self.elements.iter().map(|e| e.coefficient(side)))
    }

    /// Sets the `side` phase of every element.
    pub fn with_phases(&self, side: Region, phases: &[f64]) -> Self {
        let mut p = self.clone();
        for (e, &phi) in p.elements.iter_mut().zip(phases) {
            e.set_phi(side, wrap_phase(phi));
        }
        p
    }

    pub fn phases(&self, side: Region) -> Vec<f64> {
        self.elements.iter().map(|e| e.phi(side)).collect()
    }
}

/// `diag(beta_side * exp(j*phi_side))` of a feasible profile.
pub fn passive_matrix(profile: &StarsProfile, side: Region) -> Result<DMatrix<Complex64>> {
    profile.check_feasible()?;
    Ok(DMatrix::from_diagonal(&profile.coefficients(side)))
}

/// Retraction onto the feasible set: phases wrapped to `[0, 2pi)`, `rho`
/// clamped to `[0, 1]`, amplitude pairs scaled radially onto
/// `beta_t^2 + beta_r^2 = 1 - rho` (zero for sensing elements).
pub fn project_feasible(profile: &StarsProfile) -> StarsProfile {
    let mut p = profile.clone();
    for e in &mut p.elements {
        e.phi_t = wrap_phase(e.phi_t);
        e.phi_r = wrap_phase(e.phi_r);
        e.rho = match e.role {
            Role::Split => e.rho.clamp(0.0, 1.0),
            _ => 0.0,
        };
        let target = e.amplitude_budget().max(0.0).sqrt();
        let (bt, br) = (e.beta_t.abs(), e.beta_r.abs());
        let radius = bt.hypot(br);
        if target == 0.0 {
            e.beta_t = 0.0;
            e.beta_r = 0.0;
        } else if radius == 0.0 {
            e.beta_t = target * FRAC_1_SQRT_2;
            e.beta_r = target * FRAC_1_SQRT_2;
        } else if (radius - target).abs() > ENERGY_TOL * 0.1 {
            e.beta_t = bt * target / radius;
            e.beta_r = br * target / radius;
        } else {
            e.beta_t = bt;
            e.beta_r = br;
        }
    }
    p
}

/// Sensing-role placement. Interleaved puts sensing elements at raster
/// indices `floor(i*M/M_s)`; block takes the first `M_s` indices.
pub fn assign_roles(total: usize, sensing: usize, pattern: SensingPattern) -> Result<Vec<Role>> {
    if sensing > total {
        return Err(config_err(
            "sensing_element_count",
            format!("{sensing} sensing elements requested on a {total}-element surface"),
        ));
    }
    let mut roles = vec![Role::Passive; total];
    match pattern {
        SensingPattern::Block => roles[..sensing].fill(Role::Sensing),
        SensingPattern::Interleaved => {
            for i in 0..sensing {
                roles[i * total / sensing] = Role::Sensing;
            }
        }
    }
    Ok(roles)
}

/// One time slot of the two-phase protocol.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhasePlan {
    /// Served region; passive elements run full-reflection or full-transmission accordingly.
    pub side: Region,
    pub target_id: usize,
    pub users: Vec<usize>,
}

/// Reflection phase first, then transmission; a side without a target is skipped.
pub fn phase_schedule(config: &ScenarioConfig) -> Result<Vec<PhasePlan>> {
    if config.targets.is_empty() {
        return Err(Error::Schedule("scenario has no targets".into()));
    }
    let plans: Vec<PhasePlan> = [Region::Reflection, Region::Transmission]
        .into_iter()
        .filter_map(|side| {
            config.target_on(side).map(|target_id| PhasePlan {
                side,
                target_id,
                users: config.users_on(side),
            })
        })
        .collect();
    if plans.is_empty() {
        return Err(Error::Schedule("no target on a schedulable side".into()));
    }
    Ok(plans)
}

/// Plan for the phase serving `side`.
pub fn plan_for(config: &ScenarioConfig, side: Region) -> Result<PhasePlan> {
    let target_id = config
        .target_on(side)
        .ok_or_else(|| Error::Schedule(format!("no target on the {} side", side.as_str())))?;
    Ok(PhasePlan {
        side,
        target_id,
        users: config.users_on(side),
    })
}
