//! Scenario description, array geometry and far-field steering vectors.
//!
//! Angles are held in radians and powers in watts. Scenario files carry
//! degrees and dBm and are converted on load.

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{config_err, Error, Result};

/// Side of the surface. The BS sits on the reflection side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Region {
    Reflection,
    Transmission,
}

impl Region {
    pub fn as_str(self) -> &'static str {
        match self {
            Region::Reflection => "reflection",
            Region::Transmission => "transmission",
        }
    }

    /// Surface mode that carries a wave from a source on `self` to a sink on `to`.
    pub fn path_to(self, to: Region) -> Region {
        if self == to {
            Region::Reflection
        } else {
            Region::Transmission
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SensingPattern {
    Interleaved,
    Block,
}

/// Sensing-at-STARS element architecture.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Implementation {
    /// Separated elements: fixed passive and sensing roles.
    #[serde(rename = "SE", alias = "se")]
    Se,
    /// Mode-selection elements: each element is either passive or sensing.
    #[serde(rename = "MSE", alias = "mse")]
    Mse,
    /// Power-splitting elements: every element re-radiates and senses.
    #[serde(rename = "PSE", alias = "pse")]
    Pse,
}

impl Implementation {
    pub fn as_str(self) -> &'static str {
        match self {
            Implementation::Se => "SE",
            Implementation::Mse => "MSE",
            Implementation::Pse => "PSE",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct User {
    pub azimuth: f64,
    pub elevation: f64,
    pub distance: f64,
    pub region: Region,
    /// Uplink transmit power in watts.
    pub tx_power: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Target {
    pub azimuth: f64,
    pub elevation: f64,
    pub distance: f64,
    pub rcs_gain: Complex64,
    pub region: Region,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Pathloss {
    /// Power gain at the 1 m reference distance, in dB.
    pub ref_gain_db: f64,
    pub exp_bs_stars: f64,
    pub exp_user_stars: f64,
    pub exp_stars_target: f64,
}

impl Default for Pathloss {
    fn default() -> Self {
        Self {
            ref_gain_db: -30.0,
            exp_bs_stars: 2.2,
            exp_user_stars: 2.4,
            exp_stars_target: 2.0,
        }
    }
}

/// Placement of the BS relative to the surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BsLink {
    pub distance: f64,
    /// Direction of the BS as seen from the surface.
    pub arrival_azimuth: f64,
    pub arrival_elevation: f64,
    /// Direction of the surface as seen from the BS array.
    pub departure_azimuth: f64,
    pub departure_elevation: f64,
}

/// Complete description of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub bs_antennas: usize,
    pub stars_rows: usize,
    pub stars_cols: usize,
    pub sensing_element_count: usize,
    pub sensing_pattern: SensingPattern,
    pub implementation: Implementation,
    pub users: Vec<User>,
    pub targets: Vec<Target>,
    pub bs_power_budget: f64,
    pub noise_power_sensing: f64,
    pub noise_power_bs: f64,
    pub qos_rate: f64,
    pub pathloss: Pathloss,
    pub rician_kappa: f64,
    pub snapshots: usize,
    pub user_echo_enabled: bool,
    pub phase: Region,
    pub bs_link: BsLink,
    /// Keep the sensing-element count fixed during mode selection.
    pub pin_sensing_count: bool,
    /// Power-splitting ratio used when it is not being optimized.
    pub shared_rho: f64,
    /// Random restarts of the phase step.
    pub phase_restarts: usize,
}

impl ScenarioConfig {
    pub fn element_count(&self) -> usize {
        self.stars_rows * self.stars_cols
    }

    pub fn passive_element_count(&self) -> usize {
        self.element_count().saturating_sub(self.sensing_element_count)
    }

    pub fn stars_geometry(&self) -> ArrayGeometry {
        ArrayGeometry::upa(self.stars_rows, self.stars_cols)
    }

    pub fn bs_geometry(&self) -> ArrayGeometry {
        ArrayGeometry::ula(self.bs_antennas)
    }

    /// Index of the first target on `region`.
    pub fn target_on(&self, region: Region) -> Option<usize> {
        self.targets.iter().position(|t| t.region == region)
    }

    /// Users transmitting while `region` is served.
    pub fn users_on(&self, region: Region) -> Vec<usize> {
        (0..self.users.len())
            .filter(|&u| self.users[u].region == region)
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.bs_antennas == 0 {
            return Err(config_err("bs_antennas", "must be at least 1"));
        }
        if self.stars_rows == 0 || self.stars_cols == 0 {
            return Err(config_err("stars_rows", "STARS grid must be non-empty"));
        }
        if self.sensing_element_count > self.element_count() {
            return Err(config_err(
                "sensing_element_count",
                format!(
                    "{} exceeds the {} STARS elements",
                    self.sensing_element_count,
                    self.element_count()
                ),
            ));
        }
        if self.snapshots == 0 {
            return Err(config_err("snapshots", "must be at least 1"));
        }
        positive("bs_power_budget", self.bs_power_budget)?;
        positive("noise_power_sensing", self.noise_power_sensing)?;
        positive("noise_power_bs", self.noise_power_bs)?;
        positive("bs_link.distance_m", self.bs_link.distance)?;
        if !(self.qos_rate >= 0.0 && self.qos_rate.is_finite()) {
            return Err(config_err("qos_rate", "must be finite and non-negative"));
        }
        if !(self.rician_kappa >= 0.0) {
            return Err(config_err("rician_kappa", "must be non-negative"));
        }
        if !(0.0..=1.0).contains(&self.shared_rho) {
            return Err(config_err("shared_rho", "must lie in [0, 1]"));
        }
        check_direction(
            "bs_link.arrival",
            self.bs_link.arrival_azimuth,
            self.bs_link.arrival_elevation,
        )?;
        check_direction(
            "bs_link.departure",
            self.bs_link.departure_azimuth,
            self.bs_link.departure_elevation,
        )?;
        for (i, u) in self.users.iter().enumerate() {
            check_direction(&format!("users[{i}]"), u.azimuth, u.elevation)?;
            positive(&format!("users[{i}].distance_m"), u.distance)?;
            positive(&format!("users[{i}].tx_power_dbm"), u.tx_power)?;
        }
        for (i, t) in self.targets.iter().enumerate() {
            check_direction(&format!("targets[{i}]"), t.azimuth, t.elevation)?;
            positive(&format!("targets[{i}].distance_m"), t.distance)?;
        }
        Ok(())
    }
}

fn positive(field: &str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(config_err(field, format!("must be positive and finite, got {value}")))
    }
}

fn check_direction(prefix: &str, azimuth: f64, elevation: f64) -> Result<()> {
    if !(0.0..2.0 * PI).contains(&azimuth) {
        return Err(config_err(
            format!("{prefix}.azimuth_deg"),
            format!("{:.6} deg outside [0, 360)", azimuth.to_degrees()),
        ));
    }
    if !(elevation > 0.0 && elevation <= PI / 2.0 + 1e-12) {
        return Err(config_err(
            format!("{prefix}.elevation_deg"),
            format!("{:.6} deg outside (0, 90]", elevation.to_degrees()),
        ));
    }
    Ok(())
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

/// Users placed on a circle at the default angles, alternating regions so the
/// reflection set mirrors the transmission set.
fn default_users() -> Vec<User> {
    [
        (30.0, Region::Reflection),
        (150.0, Region::Reflection),
        (210.0, Region::Transmission),
        (330.0, Region::Transmission),
    ]
    .into_iter()
    .map(|(az, region)| User {
        azimuth: f64::to_radians(az),
        elevation: 30f64.to_radians(),
        distance: 20.0,
        region,
        tx_power: dbm_to_watts(15.0),
    })
    .collect()
}

/// Nested user population for user-count sweeps: the first `n` users of a
/// seeded sequence on the 20 m circle, alternating reflection/transmission.
pub fn place_users(n: usize, seed: u64) -> Vec<User> {
    use rand::Rng;
    (0..n)
        .map(|i| {
            let mut rng = crate::rng::stream(seed, "user_placement", i as u64);
            let az: f64 = rng.random_range(0.0..360.0);
            User {
                azimuth: az.to_radians(),
                elevation: 30f64.to_radians(),
                distance: 20.0,
                region: if i % 2 == 0 {
                    Region::Reflection
                } else {
                    Region::Transmission
                },
                tx_power: dbm_to_watts(15.0),
            }
        })
        .collect()
}

/// The two-target, 20-antenna, 20-element case study.
pub fn default_paper_scenario() -> ScenarioConfig {
    ScenarioConfig {
        bs_antennas: 20,
        stars_rows: 4,
        stars_cols: 5,
        sensing_element_count: 4,
        sensing_pattern: SensingPattern::Interleaved,
        implementation: Implementation::Se,
        users: default_users(),
        targets: vec![
            Target {
                azimuth: 342f64.to_radians(),
                elevation: 30f64.to_radians(),
                distance: 10.0,
                rcs_gain: Complex64::new(1.0, 0.0),
                region: Region::Reflection,
            },
            Target {
                azimuth: 18f64.to_radians(),
                elevation: 30f64.to_radians(),
                distance: 10.0,
                rcs_gain: Complex64::new(1.0, 0.0),
                region: Region::Transmission,
            },
        ],
        bs_power_budget: dbm_to_watts(30.0),
        noise_power_sensing: dbm_to_watts(-80.0),
        noise_power_bs: dbm_to_watts(-80.0),
        qos_rate: 0.5,
        pathloss: Pathloss::default(),
        rician_kappa: 10.0,
        snapshots: 64,
        user_echo_enabled: false,
        phase: Region::Reflection,
        bs_link: BsLink {
            distance: 25.0,
            arrival_azimuth: 180f64.to_radians(),
            arrival_elevation: 60f64.to_radians(),
            departure_azimuth: 90f64.to_radians(),
            departure_elevation: 20f64.to_radians(),
        },
        pin_sensing_count: true,
        shared_rho: 0.5,
        phase_restarts: 4,
    }
}

// ---------------------------------------------------------------------------
// Scenario files
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct UserFile {
    azimuth_deg: f64,
    elevation_deg: f64,
    #[serde(default = "default_user_distance")]
    distance_m: f64,
    region: Region,
    #[serde(default = "default_user_power")]
    tx_power_dbm: f64,
}

fn default_user_distance() -> f64 {
    20.0
}

fn default_user_power() -> f64 {
    15.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TargetFile {
    azimuth_deg: f64,
    elevation_deg: f64,
    #[serde(default = "default_target_distance")]
    distance_m: f64,
    #[serde(default = "default_rcs")]
    rcs_gain: [f64; 2],
    region: Region,
}

fn default_target_distance() -> f64 {
    10.0
}

fn default_rcs() -> [f64; 2] {
    [1.0, 0.0]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct BsLinkFile {
    distance_m: f64,
    arrival_azimuth_deg: f64,
    arrival_elevation_deg: f64,
    departure_azimuth_deg: f64,
    departure_elevation_deg: f64,
}

impl Default for BsLinkFile {
    fn default() -> Self {
        let link = default_paper_scenario().bs_link;
        Self {
            distance_m: link.distance,
            arrival_azimuth_deg: file_degrees(link.arrival_azimuth),
            arrival_elevation_deg: file_degrees(link.arrival_elevation),
            departure_azimuth_deg: file_degrees(link.departure_azimuth),
            departure_elevation_deg: file_degrees(link.departure_elevation),
        }
    }
}

/// On-disk form of [`ScenarioConfig`]: degrees and dBm, every field optional.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ScenarioFile {
    bs_antennas: usize,
    stars_rows: usize,
    stars_cols: usize,
    sensing_element_count: usize,
    sensing_pattern: SensingPattern,
    implementation: Implementation,
    users: Vec<UserFile>,
    targets: Vec<TargetFile>,
    bs_power_budget_dbm: f64,
    noise_power_sensing_dbm: f64,
    noise_power_bs_dbm: f64,
    qos_rate: f64,
    pathloss: Pathloss,
    rician_kappa: f64,
    snapshots: usize,
    user_echo_enabled: bool,
    phase: Region,
    bs_link: BsLinkFile,
    pin_sensing_count: bool,
    shared_rho: f64,
    phase_restarts: usize,
}

impl Default for ScenarioFile {
    fn default() -> Self {
        ScenarioFile::from_config(&default_paper_scenario())
    }
}

/// Degrees for a scenario file, snapped to the nearest 1e-9 deg when that
/// value converts back to exactly the same radians.
fn file_degrees(rad: f64) -> f64 {
    let deg = rad.to_degrees();
    let snapped = (deg * 1e9).round() / 1e9;
    if snapped.to_radians() == rad {
        snapped
    } else {
        deg
    }
}

impl ScenarioFile {
    fn from_config(c: &ScenarioConfig) -> Self {
        Self {
            bs_antennas: c.bs_antennas,
            stars_rows: c.stars_rows,
            stars_cols: c.stars_cols,
            sensing_element_count: c.sensing_element_count,
            sensing_pattern: c.sensing_pattern,
            implementation: c.implementation,
            users: c
                .users
                .iter()
                .map(|u| UserFile {
                    azimuth_deg: file_degrees(u.azimuth),
                    elevation_deg: file_degrees(u.elevation),
                    distance_m: u.distance,
                    region: u.region,
                    tx_power_dbm: watts_to_dbm(u.tx_power),
                })
                .collect(),
            targets: c
                .targets
                .iter()
                .map(|t| TargetFile {
                    azimuth_deg: file_degrees(t.azimuth),
                    elevation_deg: file_degrees(t.elevation),
                    distance_m: t.distance,
                    rcs_gain: [t.rcs_gain.re, t.rcs_gain.im],
                    region: t.region,
                })
                .collect(),
            bs_power_budget_dbm: watts_to_dbm(c.bs_power_budget),
            noise_power_sensing_dbm: watts_to_dbm(c.noise_power_sensing),
            noise_power_bs_dbm: watts_to_dbm(c.noise_power_bs),
            qos_rate: c.qos_rate,
            pathloss: c.pathloss,
            rician_kappa: c.rician_kappa,
            snapshots: c.snapshots,
            user_echo_enabled: c.user_echo_enabled,
            phase: c.phase,
            bs_link: BsLinkFile {
                distance_m: c.bs_link.distance,
                arrival_azimuth_deg: file_degrees(c.bs_link.arrival_azimuth),
                arrival_elevation_deg: file_degrees(c.bs_link.arrival_elevation),
                departure_azimuth_deg: file_degrees(c.bs_link.departure_azimuth),
                departure_elevation_deg: file_degrees(c.bs_link.departure_elevation),
            },
            pin_sensing_count: c.pin_sensing_count,
            shared_rho: c.shared_rho,
            phase_restarts: c.phase_restarts,
        }
    }

    fn into_config(self) -> ScenarioConfig {
        ScenarioConfig {
            bs_antennas: self.bs_antennas,
            stars_rows: self.stars_rows,
            stars_cols: self.stars_cols,
            sensing_element_count: self.sensing_element_count,
            sensing_pattern: self.sensing_pattern,
            implementation: self.implementation,
            users: self
                .users
                .into_iter()
                .map(|u| User {
                    azimuth: u.azimuth_deg.to_radians(),
                    elevation: u.elevation_deg.to_radians(),
                    distance: u.distance_m,
                    region: u.region,
                    tx_power: dbm_to_watts(u.tx_power_dbm),
                })
                .collect(),
            targets: self
                .targets
                .into_iter()
                .map(|t| Target {
                    azimuth: t.azimuth_deg.to_radians(),
                    elevation: t.elevation_deg.to_radians(),
                    distance: t.distance_m,
                    rcs_gain: Complex64::new(t.rcs_gain[0], t.rcs_gain[1]),
                    region: t.region,
                })
                .collect(),
            bs_power_budget: dbm_to_watts(self.bs_power_budget_dbm),
            noise_power_sensing: dbm_to_watts(self.noise_power_sensing_dbm),
            noise_power_bs: dbm_to_watts(self.noise_power_bs_dbm),
            qos_rate: self.qos_rate,
            pathloss: self.pathloss,
            rician_kappa: self.rician_kappa,
            snapshots: self.snapshots,
            user_echo_enabled: self.user_echo_enabled,
            phase: self.phase,
            bs_link: BsLink {
                distance: self.bs_link.distance_m,
                arrival_azimuth: self.bs_link.arrival_azimuth_deg.to_radians(),
                arrival_elevation: self.bs_link.arrival_elevation_deg.to_radians(),
                departure_azimuth: self.bs_link.departure_azimuth_deg.to_radians(),
                departure_elevation: self.bs_link.departure_elevation_deg.to_radians(),
            },
            pin_sensing_count: self.pin_sensing_count,
            shared_rho: self.shared_rho,
            phase_restarts: self.phase_restarts,
        }
    }
}

/// Parses and validates a JSON scenario document. Omitted fields take the
/// values of [`default_paper_scenario`].
pub fn parse_scenario(text: &str) -> Result<ScenarioConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let file: ScenarioFile = serde_path_to_error::deserialize(de).map_err(|e| Error::Parse {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    let config = file.into_config();
    config.validate()?;
    Ok(config)
}

/// Renders a scenario as a JSON document accepted by [`parse_scenario`].
pub fn serialize_scenario(config: &ScenarioConfig) -> String {
    serde_json::to_string_pretty(&ScenarioFile::from_config(config))
        .expect("scenario file serialization is infallible")
}

// ---------------------------------------------------------------------------
// Geometry and steering
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ArrayKind {
    Ula,
    Upa,
}

/// Element positions in half-wavelength units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    pub element_positions: Vec<(f64, f64)>,
    pub kind: ArrayKind,
}

impl ArrayGeometry {
    /// Linear array along the y axis: element `n` at `(0, n)`.
    pub fn ula(n: usize) -> Self {
        Self {
            element_positions: (0..n).map(|i| (0.0, i as f64)).collect(),
            kind: ArrayKind::Ula,
        }
    }

    /// Planar `rows x cols` grid indexed in boustrophedon raster order:
    /// even rows run left to right, odd rows right to left. Element `m` sits at
    /// `(col, row)`.
    pub fn upa(rows: usize, cols: usize) -> Self {
        let element_positions = (0..rows * cols)
            .map(|m| {
                let row = m / cols;
                let offset = m % cols;
                let col = if row % 2 == 0 { offset } else { cols - 1 - offset };
                (col as f64, row as f64)
            })
            .collect();
        Self {
            element_positions,
            kind: ArrayKind::Upa,
        }
    }

    pub fn len(&self) -> usize {
        self.element_positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.element_positions.is_empty()
    }

    /// Geometry of the elements at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            element_positions: indices.iter().map(|&i| self.element_positions[i]).collect(),
            kind: self.kind,
        }
    }
}

/// Direction cosines `(u, v)` and their partial derivatives
/// `[(du/daz, du/del), (dv/daz, dv/del)]`.
pub fn direction_cosines(azimuth: f64, elevation: f64) -> ((f64, f64), [(f64, f64); 2]) {
    let (sa, ca) = azimuth.sin_cos();
    let (se, ce) = elevation.sin_cos();
    let uv = (se * ca, se * sa);
    let jac = [(-se * sa, ce * ca), (se * ca, ce * sa)];
    (uv, jac)
}

fn check_geometry(geom: &ArrayGeometry, elevation: f64) -> Result<()> {
    if geom.is_empty() {
        return Err(Error::EmptyGeometry);
    }
    if !(elevation.is_finite() && elevation <= PI / 2.0 + 1e-12) {
        return Err(Error::Domain(format!(
            "elevation {elevation} rad outside (0, pi/2]"
        )));
    }
    Ok(())
}

/// Far-field response `a_m = exp(j*pi*(x_m*u + y_m*v))`.
///
/// Elevation zero is accepted as the broadside limit; scenario validation
/// rejects it for physical directions.
pub fn steering_vector(geom: &ArrayGeometry, azimuth: f64, elevation: f64) -> Result<DVector<Complex64>> {
    check_geometry(geom, elevation)?;
    let ((u, v), _) = direction_cosines(azimuth, elevation);
    Ok(DVector::from_iterator(
        geom.len(),
        geom.element_positions
            .iter()
            .map(|&(x, y)| Complex64::from_polar(1.0, PI * (x * u + y * v))),
    ))
}

/// Analytic `(da/daz, da/del)`.
pub fn steering_derivatives(
    geom: &ArrayGeometry,
    azimuth: f64,
    elevation: f64,
) -> Result<(DVector<Complex64>, DVector<Complex64>)> {
    let a = steering_vector(geom, azimuth, elevation)?;
    let (_, [(du_az, du_el), (dv_az, dv_el)]) = direction_cosines(azimuth, elevation);
    let j_pi = Complex64::new(0.0, PI);
    let mut d_az = a.clone();
    let mut d_el = a;
    for (m, &(x, y)) in geom.element_positions.iter().enumerate() {
        d_az[m] *= j_pi * (x * du_az + y * dv_az);
        d_el[m] *= j_pi * (x * du_el + y * dv_el);
    }
    Ok((d_az, d_el))
}
