//! Uplink communication through the surface: cascaded channels, MMSE SINR
//! and rates against the QoS target.
//!
//! The BS cancels its own sensing waveform, so rates depend only on the
//! surface coefficients and the user powers.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::LN_2;

use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::linalg::{CMat, CVec, J};
use crate::scene::{Region, ScenarioConfig};
use crate::serial;
use crate::stars::StarsProfile;

/// Slack below which a user counts as violating its QoS target.
pub const QOS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    /// Served user ids, aligned with the per-user vectors.
    pub users: Vec<usize>,
    pub sinr: Vec<f64>,
    pub rate: Vec<f64>,
    pub qos_slack: Vec<f64>,
    /// Smallest rate; infinite (written as `null`) when nobody is served.
    #[serde(with = "serial::unbounded")]
    pub min_rate: f64,
    pub feasible: bool,
}

impl RateReport {
    fn from_sinr(users: Vec<usize>, sinr: Vec<f64>, qos: f64) -> Self {
        let rate: Vec<f64> = sinr.iter().map(|s| (1.0 + s).log2()).collect();
        let qos_slack: Vec<f64> = rate.iter().map(|r| r - qos).collect();
        let min_rate = rate.iter().copied().fold(f64::INFINITY, f64::min);
        let feasible = qos_slack.iter().all(|&s| s >= -QOS_TOL);
        Self {
            users,
            sinr,
            rate,
            qos_slack,
            min_rate,
            feasible,
        }
    }

    /// `sum_u max(0, R_min - rate_u)^2`.
    pub fn shortfall(&self) -> f64 {
        self.qos_slack.iter().map(|&s| (-s).max(0.0).powi(2)).sum()
    }
}

/// Surface coefficient seen by an uplink signal from `region` towards the BS.
fn uplink_side(region: Region) -> Region {
    region.path_to(Region::Reflection)
}

/// `f_u = G^T Theta h_u` over the elements of `profile`.
pub fn cascaded_uplink_channel(channels: &ChannelSet, profile: &StarsProfile, user_id: usize) -> Result<CVec> {
    let region = *channels
        .user_regions
        .get(user_id)
        .ok_or_else(|| Error::Domain(format!("no user with id {user_id}")))?;
    if region != profile.active_side {
        return Err(Error::Schedule(format!(
            "user {user_id} is on the {} side but the surface serves the {} side",
            region.as_str(),
            profile.active_side.as_str()
        )));
    }
    let coeff = profile.coefficients(uplink_side(region));
    let h = &channels.user_to_stars[user_id];
    let n = channels.bs_to_stars.ncols();
    let mut f = CVec::zeros(n);
    for (r, e) in profile.elements.iter().enumerate() {
        let w = coeff[r] * h[e.index];
        if w == Complex64::from(0.0) {
            continue;
        }
        f += channels.bs_to_stars.row(e.index).transpose() * w;
    }
    Ok(f)
}

struct UplinkState {
    users: Vec<usize>,
    powers: Vec<f64>,
    f: Vec<CVec>,
    /// `K_u^{-1} f_u`.
    z: Vec<CVec>,
    sinr: Vec<f64>,
}

fn uplink_state(channels: &ChannelSet, profile: &StarsProfile, config: &ScenarioConfig) -> Result<UplinkState> {
    let users = config.users_on(profile.active_side);
    let powers: Vec<f64> = users.iter().map(|&u| config.users[u].tx_power).collect();
    let f = users
        .iter()
        .map(|&u| cascaded_uplink_channel(channels, profile, u))
        .collect::<Result<Vec<_>>>()?;
    let n = channels.bs_to_stars.ncols();
    let noise = CMat::identity(n, n) * Complex64::from(config.noise_power_bs);
    let mut z = Vec::with_capacity(users.len());
    let mut sinr = Vec::with_capacity(users.len());
    for u in 0..users.len() {
        let mut k = noise.clone();
        for v in 0..users.len() {
            if v != u {
                k += (&f[v] * f[v].adjoint()) * Complex64::from(powers[v]);
            }
        }
        let zu = k
            .cholesky()
            .ok_or_else(|| Error::Domain("interference-plus-noise matrix is not positive definite".into()))?
            .solve(&f[u]);
        let q: Complex64 = f[u].iter().zip(zu.iter()).map(|(a, b)| a.conj() * b).sum();
        sinr.push(powers[u] * q.re.max(0.0));
        z.push(zu);
    }
    Ok(UplinkState {
        users,
        powers,
        f,
        z,
        sinr,
    })
}

/// MMSE SINR and rate of every user served in the profile's active phase.
pub fn uplink_sinrs(channels: &ChannelSet, profile: &StarsProfile, config: &ScenarioConfig) -> Result<RateReport> {
    let report = served_rates(channels, profile, config)?;
    if report.users.is_empty() {
        return Err(Error::Schedule(format!(
            "no user is served on the {} side",
            profile.active_side.as_str()
        )));
    }
    Ok(report)
}

/// Like [`uplink_sinrs`] but an empty user set yields an empty, feasible report.
pub fn served_rates(channels: &ChannelSet, profile: &StarsProfile, config: &ScenarioConfig) -> Result<RateReport> {
    let st = uplink_state(channels, profile, config)?;
    Ok(RateReport::from_sinr(st.users, st.sinr, config.qos_rate))
}

/// Rates and the gradient of every user's rate with respect to the phases of
/// the side carrying the served users' uplink, one row per served user.
pub fn rate_phase_gradients(
    channels: &ChannelSet,
    profile: &StarsProfile,
    config: &ScenarioConfig,
) -> Result<(RateReport, Vec<Vec<f64>>)> {
    let st = uplink_state(channels, profile, config)?;
    let side = uplink_side(profile.active_side);
    let coeff = profile.coefficients(side);
    let g = &channels.bs_to_stars;
    let nu = st.users.len();
    let mut grads = Vec::with_capacity(nu);
    for u in 0..nu {
        let zc = st.z[u].map(|x| x.conj());
        // gamma_m = G[m, :] conj(z_u), and the cross factors f_v^H z_u.
        let gamma: Vec<Complex64> = profile
            .elements
            .iter()
            .map(|e| g.row(e.index).iter().zip(zc.iter()).map(|(a, b)| a * b).sum())
            .collect();
        let cross: Vec<Complex64> = (0..nu)
            .map(|v| st.f[v].iter().zip(st.z[u].iter()).map(|(a, b)| a.conj() * b).sum())
            .collect();
        let factor = 1.0 / ((1.0 + st.sinr[u]) * LN_2);
        let row = profile
            .elements
            .iter()
            .enumerate()
            .map(|(m, e)| {
                let base = J * coeff[m] * gamma[m];
                let mut d = 2.0 * (base * channels.user_to_stars[st.users[u]][e.index]).re;
                for v in 0..nu {
                    if v != u {
                        let h = channels.user_to_stars[st.users[v]][e.index];
                        d -= st.powers[v] * 2.0 * (base * h * cross[v]).re;
                    }
                }
                st.powers[u] * d * factor
            })
            .collect();
        grads.push(row);
    }
    Ok((RateReport::from_sinr(st.users, st.sinr, config.qos_rate), grads))
}
