//! Oracle and invariant checks shared by the core tests and the CLI
//! acceptance target. Each returns the worst observed error, or a message
//! naming the first failing instance.

use nalgebra::{DMatrix, DVector, Matrix4};
use num_complex::Complex64;
use rand::Rng;
use std::f64::consts::PI;

use stars_isac::comms::{rate_phase_gradients, served_rates};
use stars_isac::linalg::{hermitian_eigen, psd_sqrt};
use stars_isac::sensing::{probing_waveform, EchoModel};
use stars_isac::*;

use super::{cgauss, random_covariance, random_instance, rng, Instance};

pub type Check = std::result::Result<f64, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

/// Parameters `(az, el, Re alpha, Im alpha)`.
pub type Params = [f64; 4];

/// Noiseless echo means for snapshots `y` (sources x L), written out term by
/// term from the signal model.
pub fn echo_means(inst: &Instance, target_id: usize, p: Params, y: &DMatrix<Complex64>) -> Vec<DVector<Complex64>> {
    let cfg = &inst.config;
    let prof = &inst.profile;
    let target = &cfg.targets[target_id];
    let geom = cfg.stars_geometry();
    let (u, v) = (p[1].sin() * p[0].cos(), p[1].sin() * p[0].sin());
    let phase = |m: usize| {
        let (x, yy) = geom.element_positions[m];
        Complex64::from_polar(1.0, PI * (x * u + yy * v))
    };
    let amp = (10f64.powf(cfg.pathloss.ref_gain_db / 10.0) * target.distance.powf(-cfg.pathloss.exp_stars_target)).sqrt();
    let alpha = Complex64::new(p[2], p[3]);

    let sensing: Vec<(usize, f64)> = prof
        .elements
        .iter()
        .filter(|e| e.sensing_fraction() > 0.0)
        .map(|e| (e.index, e.sensing_fraction().sqrt()))
        .collect();

    let echoing: Vec<usize> = if cfg.user_echo_enabled {
        (0..cfg.users.len()).filter(|&u| cfg.users[u].region == prof.active_side).collect()
    } else {
        vec![]
    };
    let coeff_for = |same_side: bool, e: &ElementState| {
        if same_side {
            Complex64::from_polar(e.beta_r, e.phi_r)
        } else {
            Complex64::from_polar(e.beta_t, e.phi_t)
        }
    };
    // Cascaded source-to-target gains through the surface.
    let mut g = Vec::new();
    for n in 0..cfg.bs_antennas {
        let same = target.region == Region::Reflection;
        g.push(
            prof.elements
                .iter()
                .map(|e| inst.channels.bs_to_stars[(e.index, n)] * coeff_for(same, e) * phase(e.index) * amp)
                .sum::<Complex64>(),
        );
    }
    for &uid in &echoing {
        let same = cfg.users[uid].region == target.region;
        let s = cfg.users[uid].tx_power.sqrt();
        g.push(
            prof.elements
                .iter()
                .map(|e| inst.channels.user_to_stars[uid][e.index] * s * coeff_for(same, e) * phase(e.index) * amp)
                .sum::<Complex64>(),
        );
    }
    assert_eq!(g.len(), y.nrows());
    (0..y.ncols())
        .map(|l| {
            let z: Complex64 = (0..g.len()).map(|j| g[j] * y[(j, l)]).sum();
            DVector::from_iterator(sensing.len(), sensing.iter().map(|&(m, w)| alpha * phase(m) * w * z))
        })
        .collect()
}

/// Fisher information from central differences of [`echo_means`].
pub fn brute_fim(inst: &Instance, target_id: usize, y: &DMatrix<Complex64>) -> Matrix4<f64> {
    let t = &inst.config.targets[target_id];
    let amp = stars_isac::channel::echo_gain(&inst.config, target_id).unwrap();
    let p0: Params = [t.azimuth, t.elevation, amp.re, amp.im];
    let h = 1e-6;
    let derivs: Vec<Vec<DVector<Complex64>>> = (0..4)
        .map(|i| {
            let mut pp = p0;
            let mut pm = p0;
            pp[i] += h;
            pm[i] -= h;
            let a = echo_means(inst, target_id, pp, y);
            let b = echo_means(inst, target_id, pm, y);
            a.iter().zip(&b).map(|(x, z)| (x - z) / Complex64::from(2.0 * h)).collect()
        })
        .collect();
    let sigma2 = inst.config.noise_power_sensing;
    Matrix4::from_fn(|i, j| {
        (2.0 / sigma2) * derivs[i].iter().zip(&derivs[j]).map(|(a, b)| a.dotc(b).re).sum::<f64>()
    })
}

pub fn source_count(inst: &Instance) -> usize {
    let echo = if inst.config.user_echo_enabled {
        inst.config.users_on(inst.profile.active_side).len()
    } else {
        0
    };
    inst.config.bs_antennas + echo
}

pub fn relative(a: &Matrix4<f64>, b: &Matrix4<f64>) -> f64 {
    (a - b).norm() / b.norm()
}

/// Public [`fisher_information`] against the brute-force FIM built from the
/// same probing waveform, on random instances `seeds`.
pub fn fim_matches_brute_force(seeds: std::ops::Range<u64>, tol: f64) -> Check {
    let mut worst: f64 = 0.0;
    for seed in seeds {
        let inst = random_instance(seed);
        let tid = inst.config.target_on(inst.profile.active_side).unwrap();
        let fim = fisher_information(&inst.config, &inst.channels, &inst.profile, &inst.r_x, tid)
            .map_err(|e| format!("seed {seed}: {e}"))?;
        let n = inst.config.bs_antennas;
        let mut y = probing_waveform(source_count(&inst), inst.config.snapshots, seed);
        let x = psd_sqrt(&inst.r_x) * y.rows(0, n);
        y.rows_mut(0, n).copy_from(&x);
        let err = relative(&fim.matrix, &brute_fim(&inst, tid, &y));
        ensure!(err < tol, "seed {seed}: relative error {err:e}");
        worst = worst.max(err);
    }
    Ok(worst)
}

fn model_for(inst: &Instance) -> Option<EchoModel> {
    let tid = inst.config.target_on(inst.profile.active_side)?;
    EchoModel::new(&inst.config, &inst.channels, &inst.profile, tid).ok()
}

fn azimuth(model: &EchoModel, profile: &StarsProfile, r_x: &CMat) -> Option<f64> {
    let r_y = model.extended_covariance(r_x);
    model.root_crb(profile, &r_y).ok().map(|r| r.azimuth_deg)
}

fn with_four_antennas(seed: u64) -> Instance {
    let mut inst = random_instance(seed);
    inst.config.bs_antennas = 4;
    inst.channels = synthesize_channels(&inst.config, seed).unwrap();
    let mut r = rng(seed ^ 0x55);
    inst.r_x = random_covariance(&mut r, 4, inst.config.bs_power_budget);
    inst
}

/// Directional derivative of the azimuth root-CRB along a random Hermitian
/// direction against the covariance gradient, on `needed` identifiable instances.
pub fn covariance_gradient_check(needed: usize, tol: f64) -> Check {
    let mut passed = 0;
    let mut worst: f64 = 0.0;
    for seed in 0..400 {
        if passed == needed {
            break;
        }
        let inst = with_four_antennas(seed);
        let Some(model) = model_for(&inst) else { continue };
        let Ok((value, grad)) = model.root_crb_rx_gradient(&inst.profile, &inst.r_x) else {
            continue;
        };
        let direct = azimuth(&model, &inst.profile, &inst.r_x).unwrap();
        ensure!((value - direct).abs() < 1e-12 * value, "seed {seed}: value {value} vs {direct}");
        ensure!((&grad - grad.adjoint()).norm() < 1e-10 * grad.norm(), "seed {seed}: gradient not Hermitian");

        let mut r = rng(seed + 77);
        let a = DMatrix::from_fn(4, 4, |_, _| cgauss(&mut r));
        let e = (&a + a.adjoint()) * Complex64::from(0.5 / a.norm());
        let h = 1e-6 * inst.r_x.norm();
        let plus = azimuth(&model, &inst.profile, &(&inst.r_x + &e * Complex64::from(h))).unwrap();
        let minus = azimuth(&model, &inst.profile, &(&inst.r_x - &e * Complex64::from(h))).unwrap();
        let fd = (plus - minus) / (2.0 * h);
        let analytic = (&grad * &e).trace().re;
        let err = (fd - analytic).abs() / analytic.abs().max(1e-3 * value / inst.r_x.norm());
        ensure!(err < tol, "seed {seed}: fd {fd:e} analytic {analytic:e} err {err:e}");
        worst = worst.max(err);
        passed += 1;
    }
    ensure!(passed == needed, "only {passed} of {needed} instances were identifiable");
    Ok(worst)
}

/// Per-element phase derivatives of the azimuth root-CRB against central
/// differences, relative to the largest gradient entry.
pub fn phase_gradient_check(needed: usize, tol: f64) -> Check {
    let mut passed = 0;
    let mut worst: f64 = 0.0;
    for seed in 300..900 {
        if passed == needed {
            break;
        }
        let inst = random_instance(seed);
        let Some(model) = model_for(&inst) else { continue };
        let side = inst.profile.active_side;
        let r_y = model.extended_covariance(&inst.r_x);
        let Ok((value, grad)) = model.root_crb_phase_gradient(&inst.profile, &r_y, side) else {
            continue;
        };
        // A flat objective (e.g. one tunable element, where only the common
        // phase moves) carries no information beyond difference roundoff.
        let scale = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if scale < 1e-4 * value {
            continue;
        }
        let h = 1e-6;
        for m in inst.profile.tunable(side) {
            let mut ph = inst.profile.phases(side);
            ph[m] += h;
            let plus = azimuth(&model, &inst.profile.with_phases(side, &ph), &inst.r_x).unwrap();
            ph[m] -= 2.0 * h;
            let minus = azimuth(&model, &inst.profile.with_phases(side, &ph), &inst.r_x).unwrap();
            let fd = (plus - minus) / (2.0 * h);
            let err = (fd - grad[m]).abs() / scale;
            ensure!(err < tol, "seed {seed} element {m}: fd {fd:e} analytic {:e}", grad[m]);
            worst = worst.max(err);
        }
        passed += 1;
    }
    ensure!(passed == needed, "only {passed} of {needed} instances were informative");
    Ok(worst)
}

/// Phase derivatives of every served user's rate against central differences.
pub fn rate_gradient_check(needed: usize, tol: f64) -> Check {
    let mut passed = 0;
    let mut worst: f64 = 0.0;
    for seed in 600..1200 {
        if passed == needed {
            break;
        }
        let inst = random_instance(seed);
        let side = inst.profile.active_side;
        if inst.config.users_on(side).is_empty() {
            continue;
        }
        let (report, grads) =
            rate_phase_gradients(&inst.channels, &inst.profile, &inst.config).map_err(|e| format!("seed {seed}: {e}"))?;
        ensure!(report.users.len() == grads.len(), "seed {seed}: one gradient row per user");
        let informative = grads
            .iter()
            .zip(&report.rate)
            .all(|(row, r)| row.iter().fold(0.0f64, |m, g| m.max(g.abs())) > 1e-4 * r);
        if !informative {
            continue;
        }
        let h = 1e-6;
        for (u, row) in grads.iter().enumerate() {
            let scale = row.iter().fold(0.0f64, |m, g| m.max(g.abs()));
            for m in inst.profile.tunable(side) {
                let mut ph = inst.profile.phases(side);
                ph[m] += h;
                let plus = served_rates(&inst.channels, &inst.profile.with_phases(side, &ph), &inst.config).unwrap();
                ph[m] -= 2.0 * h;
                let minus = served_rates(&inst.channels, &inst.profile.with_phases(side, &ph), &inst.config).unwrap();
                let fd = (plus.rate[u] - minus.rate[u]) / (2.0 * h);
                let err = (fd - row[m]).abs() / scale;
                ensure!(err < tol, "seed {seed} user {u} element {m}: fd {fd:e} analytic {:e}", row[m]);
                worst = worst.max(err);
            }
        }
        passed += 1;
    }
    ensure!(passed == needed, "only {passed} of {needed} instances had informative rate gradients");
    Ok(worst)
}

/// `project_feasible` lands on the energy-conservation surface of every role,
/// is idempotent, and leaves feasible profiles untouched. Returns the worst
/// energy residual.
pub fn energy_conservation_check(cases: u64) -> Check {
    let mut worst: f64 = 0.0;
    for seed in 0..cases {
        let mut r = rng(seed + 5000);
        let inst = random_instance(seed);
        ensure!(inst.profile.check_feasible().is_ok(), "seed {seed}: initial profile infeasible");
        let mut p = inst.profile.clone();
        for e in &mut p.elements {
            e.beta_t = r.random_range(-2.0..2.0);
            e.beta_r = r.random_range(-2.0..2.0);
            e.phi_t = r.random_range(-20.0..20.0);
            e.phi_r = r.random_range(-20.0..20.0);
            if e.role == Role::Split {
                e.rho = r.random_range(-0.5..1.5);
            }
        }
        let q = project_feasible(&p);
        ensure!(q.check_feasible().is_ok(), "seed {seed}: projection infeasible at {:?}", q.violations());
        for e in &q.elements {
            let budget = 1.0 - e.sensing_fraction();
            let energy = e.beta_t.powi(2) + e.beta_r.powi(2);
            worst = worst.max((energy - budget).abs());
            ensure!(energy <= 1.0 + 1e-12, "seed {seed}: element {} re-radiates {energy}", e.index);
            ensure!(
                (0.0..std::f64::consts::TAU).contains(&e.phi_t) && (0.0..std::f64::consts::TAU).contains(&e.phi_r),
                "seed {seed}: phases not wrapped"
            );
        }
        ensure!(project_feasible(&q) == q, "seed {seed}: projection not idempotent");
        ensure!(project_feasible(&inst.profile) == inst.profile, "seed {seed}: feasible profile moved");
    }
    Ok(worst)
}

/// `project_psd_trace` returns a PSD matrix within the trace budget, fixes
/// feasible points, and is no farther from the input than any other feasible
/// test point. Returns the worst constraint residual.
pub fn psd_projection_check(cases: u64) -> Check {
    let mut worst: f64 = 0.0;
    for seed in 0..cases {
        let mut r = rng(seed + 7000);
        let n = r.random_range(1..6);
        let power = r.random_range(0.1..3.0);
        let a = DMatrix::from_fn(n, n, |_, _| cgauss(&mut r) * 2.0);
        let h = (&a + a.adjoint()) * Complex64::from(0.5);
        let p = project_psd_trace(&h, power);
        let (values, _) = hermitian_eigen(&p);
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let trace: f64 = p.diagonal().iter().map(|z| z.re).sum();
        ensure!(min > -1e-10, "seed {seed}: eigenvalue {min}");
        ensure!(trace <= power * (1.0 + 1e-10), "seed {seed}: trace {trace} above {power}");
        ensure!((&p - p.adjoint()).norm() < 1e-10, "seed {seed}: not Hermitian");
        worst = worst.max((-min).max(0.0)).max((trace - power).max(0.0));
        let d = (&h - &p).norm();
        for _ in 0..20 {
            let q = random_covariance(&mut r, n, power);
            ensure!((&h - &q).norm() >= d - 1e-9, "seed {seed}: a feasible point is closer than the projection");
        }
        let fixed = project_psd_trace(&p, power);
        ensure!((&fixed - &p).norm() < 1e-9 * (1.0 + p.norm()), "seed {seed}: projection not idempotent");
    }
    Ok(worst)
}

/// FIM symmetry, positive semidefiniteness, linearity in `R_x` without user
/// echo, and root-CRB scaling by `1/sqrt(c)`. Returns the worst relative
/// linearity error.
pub fn fim_structure_check(cases: u64) -> Check {
    let mut worst: f64 = 0.0;
    for seed in 0..cases {
        let mut inst = random_instance(seed + 9000);
        let tid = inst.config.target_on(inst.profile.active_side).unwrap();
        let f = fisher_information(&inst.config, &inst.channels, &inst.profile, &inst.r_x, tid)
            .map_err(|e| format!("seed {seed}: {e}"))?
            .matrix;
        ensure!((f - f.transpose()).norm() <= 1e-12 * f.norm(), "seed {seed}: FIM not symmetric");
        let min = f.symmetric_eigenvalues().min();
        ensure!(min >= -1e-9 * f.norm(), "seed {seed}: FIM eigenvalue {min}");

        inst.config.user_echo_enabled = false;
        let c = rng(seed).random_range(0.1..0.9);
        let base = fisher_information(&inst.config, &inst.channels, &inst.profile, &inst.r_x, tid).unwrap();
        let scaled_rx = &inst.r_x * Complex64::from(c);
        let scaled = fisher_information(&inst.config, &inst.channels, &inst.profile, &scaled_rx, tid).unwrap();
        let err = relative(&scaled.matrix, &(base.matrix * c));
        ensure!(err < 1e-12, "seed {seed}: FIM(cR) != c FIM(R), error {err:e}");
        worst = worst.max(err);
        if let (Ok(a), Ok(b)) = (root_crb_degrees(&base), root_crb_degrees(&scaled)) {
            let ratio = b.azimuth_deg / a.azimuth_deg * c.sqrt();
            ensure!((ratio - 1.0).abs() < 1e-9, "seed {seed}: root-CRB scaled by {ratio} sqrt(c)");
            worst = worst.max((ratio - 1.0).abs());
        }
    }
    Ok(worst)
}

/// Adding a co-served user never raises an existing user's MMSE SINR, and a
/// common phase rotation of the surface leaves every SINR unchanged. Returns
/// the worst relative rotation residual.
pub fn sinr_monotonicity_check(cases: u64) -> Check {
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for seed in 0..cases {
        let inst = random_instance(seed + 11000);
        let side = inst.profile.active_side;
        let served = inst.config.users_on(side);
        if served.len() < 2 {
            continue;
        }
        let full = served_rates(&inst.channels, &inst.profile, &inst.config).unwrap();
        // Drop the last served user.
        let mut fewer = inst.config.clone();
        fewer.users.remove(*served.last().unwrap());
        let channels = synthesize_channels(&fewer, seed + 11000).unwrap();
        let reduced = served_rates(&channels, &inst.profile, &fewer).unwrap();
        ensure!(
            channels.bs_to_stars == inst.channels.bs_to_stars,
            "seed {seed}: BS link changed with the user set"
        );
        for (k, &uid) in reduced.users.iter().enumerate() {
            let j = full.users.iter().position(|&x| x == uid).unwrap();
            ensure!(
                full.sinr[j] <= reduced.sinr[k] * (1.0 + 1e-10),
                "seed {seed}: user {uid} SINR {} with more users vs {}",
                full.sinr[j],
                reduced.sinr[k]
            );
        }
        let shift = rng(seed).random_range(0.0..6.0);
        let rotated: Vec<f64> = inst.profile.phases(side).iter().map(|p| p + shift).collect();
        let turned = served_rates(&inst.channels, &inst.profile.with_phases(side, &rotated), &inst.config).unwrap();
        for (a, b) in full.sinr.iter().zip(&turned.sinr) {
            let err = (a - b).abs() / a.abs().max(1e-300);
            ensure!(err < 1e-9, "seed {seed}: common rotation changed SINR by {err:e}");
            worst = worst.max(err);
        }
        checked += 1;
    }
    ensure!(checked >= 10, "only {checked} instances served two users");
    Ok(worst)
}
