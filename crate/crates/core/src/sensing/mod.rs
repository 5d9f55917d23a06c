//! Echo model at the STARS sensing aperture, Fisher information and CRB.
//!
//! The noiseless echo of target `k` at snapshot `l` is
//!
//! ```text
//! mu_l = alpha * a_s(az, el) * z_l,    z_l = g(az, el)^T y_l
//! ```
//!
//! where `y_l` stacks the BS waveform `x_l` and (optionally) the unit-power
//! symbols of the served users, and `g_j = sum_m S[m, j] * c_{mode_j, m} * d_m`
//! runs each source through the STARS coefficient matching its path to the
//! target. With `R_y = blkdiag(R_x, I)` the sample covariance of `y_l`, the
//! Fisher information over `(az, el, Re alpha, Im alpha)` is
//!
//! ```text
//! F_ij = (2 L / sigma^2) * Re tr(A_i^H A_j R_y)
//! ```
//!
//! with `A_az = alpha (da_s/daz g^T + a_s dg/daz^T)`, `A_el` alike,
//! `A_re = a_s g^T` and `A_im = j a_s g^T`. Every trace is evaluated through
//! 3x3 Gram matrices of the sensing-side vectors `{a_s, da_s/daz, da_s/del}`
//! and source-side vectors `{g, dg/daz, dg/del}`.

pub mod music;
pub mod snapshots;
pub mod snr;

use nalgebra::{Matrix4, Vector4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::channel::{echo_gain, ChannelSet};
use crate::error::{Error, Result};
use crate::linalg::{asymmetry, extend_with_identity, is_psd, trace_re, CMat, CVec, J};
use crate::scene::{steering_derivatives, steering_vector, ArrayGeometry, Region, ScenarioConfig};
use crate::stars::StarsProfile;

pub use music::{monte_carlo_rmse, music_estimate, DoaEstimate, MonteCarloRmse};
pub use snapshots::{echo_snapshots, probing_waveform, EchoSnapshots, TargetTruth};
pub use snr::{echo_snr_comparison, EchoSnr};

/// Jacobi-scaled condition number above which a FIM counts as singular.
pub const MAX_FIM_CONDITION: f64 = 1e12;

/// Fisher information over `(azimuth rad, elevation rad, Re alpha, Im alpha)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FisherInfo {
    pub matrix: Matrix4<f64>,
    pub target_id: usize,
    pub snapshots_used: usize,
}

/// Square-root CRB of the two angles, in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RootCrb {
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
}

/// Precomputed geometry of one (surface, target) pair.
///
/// The sensing aperture is frozen from the profile passed to [`EchoModel::new`]:
/// rebuild the model when roles or splitting ratios change. Coefficients
/// (amplitudes and phases) are read from the profile passed to each method.
#[derive(Debug, Clone)]
pub struct EchoModel {
    pub target_id: usize,
    pub alpha: Complex64,
    /// Profile positions of the elements feeding the sensing receiver.
    pub sensing: Vec<usize>,
    /// Amplitude weight `sqrt(captured fraction)` per sensing element.
    pub sensing_weights: Vec<f64>,
    pub sensing_geometry: ArrayGeometry,
    /// `[a_s, da_s/daz, da_s/del]`, weighted.
    pub aperture: [CVec; 3],
    /// `[d, dd/daz, dd/del]` over the profile elements.
    pub target: [CVec; 3],
    /// Source columns: BS antennas, then `sqrt(p_u) h_u` of echoing users.
    pub sources: CMat,
    pub source_modes: Vec<Region>,
    pub echo_users: Vec<usize>,
    pub bs_antennas: usize,
    pub noise_power: f64,
    pub snapshots: usize,
}

fn inner(a: &CVec, b: &CVec) -> Complex64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// `(coefficient, sensing-vector index, source-vector index)` of each rank-one
/// piece of `A_i`.
fn derivative_terms(alpha: Complex64) -> [Vec<(Complex64, usize, usize)>; 4] {
    let one = Complex64::from(1.0);
    [
        vec![(alpha, 1, 0), (alpha, 0, 1)],
        vec![(alpha, 2, 0), (alpha, 0, 2)],
        vec![(one, 0, 0)],
        vec![(J, 0, 0)],
    ]
}

impl EchoModel {
    pub fn new(
        config: &ScenarioConfig,
        channels: &ChannelSet,
        profile: &StarsProfile,
        target_id: usize,
    ) -> Result<Self> {
        let target = config
            .targets
            .get(target_id)
            .ok_or_else(|| Error::Domain(format!("no target with id {target_id}")))?;
        let indices = profile.indices();
        let full = config.stars_geometry();
        if let Some(&bad) = indices.iter().find(|&&i| i >= full.len()) {
            return Err(Error::Domain(format!("profile element index {bad} outside the aperture")));
        }
        let geom = full.subset(&indices);

        let sensing: Vec<usize> = (0..profile.len())
            .filter(|&i| profile.elements[i].sensing_fraction() > 0.0)
            .collect();
        if sensing.is_empty() {
            return Err(Error::SensingImpossible);
        }
        let sensing_weights: Vec<f64> = sensing
            .iter()
            .map(|&i| profile.elements[i].sensing_fraction().sqrt())
            .collect();
        let sensing_geometry = geom.subset(&sensing);
        let a = steering_vector(&sensing_geometry, target.azimuth, target.elevation)?;
        let (a_az, a_el) = steering_derivatives(&sensing_geometry, target.azimuth, target.elevation)?;
        let weigh = |v: CVec| {
            CVec::from_iterator(v.len(), v.iter().zip(&sensing_weights).map(|(z, w)| z * *w))
        };
        let aperture = [weigh(a), weigh(a_az), weigh(a_el)];

        let d_amp = channels.target_steering[target_id][0].norm();
        let (d_az, d_el) = steering_derivatives(&geom, target.azimuth, target.elevation)?;
        let d = CVec::from_iterator(indices.len(), indices.iter().map(|&i| channels.target_steering[target_id][i]));
        let scale = Complex64::from(d_amp);
        let target_vecs = [d, d_az * scale, d_el * scale];

        let echo_users: Vec<usize> = if config.user_echo_enabled {
            config.users_on(profile.active_side)
        } else {
            Vec::new()
        };
        let n = config.bs_antennas;
        let mut sources = CMat::zeros(indices.len(), n + echo_users.len());
        for (r, &i) in indices.iter().enumerate() {
            for c in 0..n {
                sources[(r, c)] = channels.bs_to_stars[(i, c)];
            }
            for (k, &u) in echo_users.iter().enumerate() {
                sources[(r, n + k)] = channels.user_to_stars[u][i] * config.users[u].tx_power.sqrt();
            }
        }
        let mut source_modes = vec![Region::Reflection.path_to(target.region); n];
        source_modes.extend(echo_users.iter().map(|&u| config.users[u].region.path_to(target.region)));

        Ok(Self {
            target_id,
            alpha: echo_gain(config, target_id)?,
            sensing,
            sensing_weights,
            sensing_geometry,
            aperture,
            target: target_vecs,
            sources,
            source_modes,
            echo_users,
            bs_antennas: n,
            noise_power: config.noise_power_sensing,
            snapshots: config.snapshots,
        })
    }

    pub fn sensing_count(&self) -> usize {
        self.sensing.len()
    }

    pub fn source_count(&self) -> usize {
        self.sources.ncols()
    }

    fn scale(&self) -> f64 {
        2.0 * self.snapshots as f64 / self.noise_power
    }

    /// `blkdiag(R_x, I)` sized for the echoing users.
    pub fn extended_covariance(&self, r_x: &CMat) -> CMat {
        extend_with_identity(r_x, self.echo_users.len())
    }

    /// `[g, dg/daz, dg/del]` for the profile's current coefficients.
    pub fn source_vectors(&self, profile: &StarsProfile) -> [CVec; 3] {
        let coeff = [
            profile.coefficients(Region::Reflection),
            profile.coefficients(Region::Transmission),
        ];
        let weighted = |t: &CVec| -> [CVec; 2] {
            [coeff[0].component_mul(t), coeff[1].component_mul(t)]
        };
        let w: Vec<[CVec; 2]> = self.target.iter().map(weighted).collect();
        let ncols = self.source_count();
        std::array::from_fn(|k| {
            CVec::from_fn(ncols, |j, _| {
                let side = match self.source_modes[j] {
                    Region::Reflection => 0,
                    Region::Transmission => 1,
                };
                self.sources
                    .column(j)
                    .iter()
                    .zip(w[k][side].iter())
                    .map(|(s, x)| s * x)
                    .sum()
            })
        })
    }

    /// Per-snapshot mean amplitude gain: `(1/L) sum_l |z_l|^2 = g^T R_y conj(g)`.
    pub fn illumination_power(&self, profile: &StarsProfile, r_y: &CMat) -> f64 {
        let g = &self.source_vectors(profile)[0];
        let rg = r_y * g.map(|z| z.conj());
        g.iter().zip(rg.iter()).map(|(a, b)| a * b).sum::<Complex64>().re
    }

    fn grams(&self, y: &[CVec; 3], r_y: &CMat) -> ([[Complex64; 3]; 3], [[Complex64; 3]; 3]) {
        let x = &self.aperture;
        let mut sx = [[Complex64::from(0.0); 3]; 3];
        for a in 0..3 {
            for b in 0..3 {
                sx[a][b] = inner(&x[a], &x[b]);
            }
        }
        let ry_conj: Vec<CVec> = y.iter().map(|v| r_y * v.map(|z| z.conj())).collect();
        let mut ty = [[Complex64::from(0.0); 3]; 3];
        for c in 0..3 {
            for d in 0..3 {
                ty[c][d] = y[d].iter().zip(ry_conj[c].iter()).map(|(p, q)| p * q).sum();
            }
        }
        (sx, ty)
    }

    fn fim_from(&self, y: &[CVec; 3], r_y: &CMat) -> (Matrix4<f64>, [[Complex64; 3]; 3]) {
        let (sx, ty) = self.grams(y, r_y);
        let terms = derivative_terms(self.alpha);
        let k = self.scale();
        let mut f = Matrix4::zeros();
        for i in 0..4 {
            for j in i..4 {
                let mut acc = Complex64::from(0.0);
                for &(ci, xi, yi) in &terms[i] {
                    for &(cj, xj, yj) in &terms[j] {
                        acc += ci.conj() * cj * sx[xi][xj] * ty[yi][yj];
                    }
                }
                f[(i, j)] = k * acc.re;
                f[(j, i)] = f[(i, j)];
            }
        }
        (f, sx)
    }

    /// Closed-form Fisher information for covariance `R_y` of the stacked sources.
    pub fn fim(&self, profile: &StarsProfile, r_y: &CMat) -> Matrix4<f64> {
        let y = self.source_vectors(profile);
        self.fim_from(&y, r_y).0
    }

    /// `Omega_cd = sum conj(gamma_k) gamma_l Sx[x_k][x_l]` over the pieces of
    /// `C = sum_i w_i A_i`, grouped by source-vector index.
    fn omega(&self, w: &Vector4<f64>, sx: &[[Complex64; 3]; 3]) -> [[Complex64; 3]; 3] {
        let terms = derivative_terms(self.alpha);
        let pieces: Vec<(Complex64, usize, usize)> = terms
            .iter()
            .enumerate()
            .flat_map(|(i, ts)| ts.iter().map(move |&(c, x, y)| (c * w[i], x, y)))
            .collect();
        let mut om = [[Complex64::from(0.0); 3]; 3];
        for &(gk, xk, yk) in &pieces {
            for &(gl, xl, yl) in &pieces {
                om[yk][yl] += gk.conj() * gl * sx[xk][xl];
            }
        }
        om
    }

    /// Azimuth root-CRB in degrees and its gradient with respect to `R_x`.
    ///
    /// The gradient `G` is Hermitian and satisfies
    /// `d rootCRB = Re tr(G dR_x)` for Hermitian perturbations.
    pub fn root_crb_rx_gradient(&self, profile: &StarsProfile, r_x: &CMat) -> Result<(f64, CMat)> {
        let r_y = self.extended_covariance(r_x);
        let y = self.source_vectors(profile);
        let (f, sx) = self.fim_from(&y, &r_y);
        let inv = invert_fim(&f, self.target_id)?;
        let crb = inv[(0, 0)];
        let w: Vector4<f64> = inv.column(0).into();
        let om = self.omega(&w, &sx);
        let n = self.bs_antennas;
        let mut m = CMat::zeros(n, n);
        for c in 0..3 {
            for d in 0..3 {
                if om[c][d] == Complex64::from(0.0) {
                    continue;
                }
                let yc = y[c].rows(0, n).map(|z| z.conj());
                let yd = y[d].rows(0, n);
                m += (&yc * yd.transpose()) * om[c][d];
            }
        }
        let root = crb.sqrt();
        let factor = -self.scale() * (180.0 / PI) / (2.0 * root);
        Ok(((180.0 / PI) * root, m * Complex64::from(factor)))
    }

    /// Azimuth root-CRB in degrees and its gradient with respect to the
    /// `side` phase of every profile element.
    pub fn root_crb_phase_gradient(
        &self,
        profile: &StarsProfile,
        r_y: &CMat,
        side: Region,
    ) -> Result<(f64, Vec<f64>)> {
        let y = self.source_vectors(profile);
        let (f, sx) = self.fim_from(&y, r_y);
        let inv = invert_fim(&f, self.target_id)?;
        let crb = inv[(0, 0)];
        let w: Vector4<f64> = inv.column(0).into();
        let om = self.omega(&w, &sx);

        let ybar: Vec<CVec> = y.iter().map(|v| v.map(|z| z.conj())).collect();
        let mask: Vec<bool> = self.source_modes.iter().map(|&m| m == side).collect();
        let coeff = profile.coefficients(side);
        let mut acc = CVec::zeros(profile.len());
        for c in 0..3 {
            let mut inner_sum = CVec::zeros(self.source_count());
            for d in 0..3 {
                inner_sum += &ybar[d] * om[d][c];
            }
            let zeta = r_y * inner_sum;
            for m in 0..profile.len() {
                let s: Complex64 = (0..self.source_count())
                    .filter(|&j| mask[j])
                    .map(|j| self.sources[(m, j)] * zeta[j])
                    .sum();
                acc[m] += self.target[c][m] * s;
            }
        }
        let root = crb.sqrt();
        let factor = -2.0 * self.scale() * (180.0 / PI) / (2.0 * root);
        let grad = (0..profile.len())
            .map(|m| factor * (J * coeff[m] * acc[m]).re)
            .collect();
        Ok(((180.0 / PI) * root, grad))
    }

    /// Root-CRB of both angles for source covariance `R_y`.
    pub fn root_crb(&self, profile: &StarsProfile, r_y: &CMat) -> Result<RootCrb> {
        root_crb_from_matrix(&self.fim(profile, r_y), self.target_id)
    }
}

/// Inverse of a FIM after a scale-invariant conditioning check.
pub fn invert_fim(f: &Matrix4<f64>, target_id: usize) -> Result<Matrix4<f64>> {
    let unidentifiable = |reason: String| Error::Unidentifiable { target_id, reason };
    let diag = f.diagonal();
    if diag.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(unidentifiable("Fisher information has a non-positive diagonal".into()));
    }
    let s = diag.map(|v| 1.0 / v.sqrt());
    let scaled = Matrix4::from_fn(|i, j| f[(i, j)] * s[i] * s[j]);
    let eig = scaled.symmetric_eigen().eigenvalues;
    let max = eig.max();
    let min = eig.min();
    if !(min > max / MAX_FIM_CONDITION) {
        return Err(unidentifiable(format!(
            "scaled Fisher information condition number {:.3e} exceeds {:.0e}",
            max / min,
            MAX_FIM_CONDITION
        )));
    }
    let inv = scaled
        .try_inverse()
        .ok_or_else(|| unidentifiable("Fisher information is not invertible".into()))?;
    Ok(Matrix4::from_fn(|i, j| inv[(i, j)] * s[i] * s[j]))
}

fn root_crb_from_matrix(f: &Matrix4<f64>, target_id: usize) -> Result<RootCrb> {
    let inv = invert_fim(f, target_id)?;
    Ok(RootCrb {
        azimuth_deg: inv[(0, 0)].sqrt().to_degrees(),
        elevation_deg: inv[(1, 1)].sqrt().to_degrees(),
    })
}

/// `(180/pi) * sqrt` of the two angle entries of the inverse FIM.
pub fn root_crb_degrees(fim: &FisherInfo) -> Result<RootCrb> {
    root_crb_from_matrix(&fim.matrix, fim.target_id)
}

/// Checks that `R_x` is a Hermitian PSD matrix within the power budget.
pub fn check_covariance(config: &ScenarioConfig, r_x: &CMat) -> Result<()> {
    let n = config.bs_antennas;
    if r_x.nrows() != n || r_x.ncols() != n {
        return Err(Error::Domain(format!(
            "covariance is {}x{}, expected {n}x{n}",
            r_x.nrows(),
            r_x.ncols()
        )));
    }
    if asymmetry(r_x) > 1e-8 {
        return Err(Error::Domain("covariance is not Hermitian".into()));
    }
    if !is_psd(r_x, 1e-9) {
        return Err(Error::Domain("covariance is not positive semidefinite".into()));
    }
    let p = config.bs_power_budget;
    if trace_re(r_x) > p + 1e-9 * p.max(1.0) {
        return Err(Error::Domain(format!(
            "covariance trace {} exceeds the power budget {p}",
            trace_re(r_x)
        )));
    }
    Ok(())
}

/// Fisher information of target `target_id` seen by the profile's sensing aperture.
pub fn fisher_information(
    config: &ScenarioConfig,
    channels: &ChannelSet,
    profile: &StarsProfile,
    r_x: &CMat,
    target_id: usize,
) -> Result<FisherInfo> {
    check_covariance(config, r_x)?;
    profile.check_feasible()?;
    let model = EchoModel::new(config, channels, profile, target_id)?;
    let r_y = model.extended_covariance(r_x);
    Ok(FisherInfo {
        matrix: model.fim(profile, &r_y),
        target_id,
        snapshots_used: config.snapshots,
    })
}
