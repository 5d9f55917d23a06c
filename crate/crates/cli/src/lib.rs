//! Experiment runner behind the `stars-isac` binary: scenario loading,
//! parameter sweeps, the dual-RIS comparison and the CRB/MUSIC consistency
//! harness. Every command writes CSV rows (and, where a design is produced,
//! a JSON document next to the CSV).

use rayon::prelude::*;
use serde::Serialize;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use thiserror::Error;

use stars_isac::optim::{initial_profile, rank_one_illumination};
use stars_isac::scene::{dbm_to_watts, place_users};
use stars_isac::sensing::{echo_snr_comparison, monte_carlo_rmse, EchoModel};
use stars_isac::{
    alternating_optimize, default_paper_scenario, fisher_information, optimize_baseline_dual_ris,
    optimize_mode_selection, optimize_power_split, parse_scenario, root_crb_degrees, synthesize_channels,
    ChannelSet, Implementation, OptimResult, Region, ScenarioConfig,
};

/// Errors surfaced by the runner. All map to exit status 1.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Sim(#[from] stars_isac::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, CliError>;

/// Which phases of the two-phase protocol to optimize.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum PhaseChoice {
    Reflection,
    Transmission,
    Both,
}

impl PhaseChoice {
    pub fn sides(self) -> Vec<Region> {
        match self {
            PhaseChoice::Reflection => vec![Region::Reflection],
            PhaseChoice::Transmission => vec![Region::Transmission],
            PhaseChoice::Both => vec![Region::Reflection, Region::Transmission],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ImplChoice {
    Se,
    Mse,
    Pse,
}

impl From<ImplChoice> for Implementation {
    fn from(c: ImplChoice) -> Self {
        match c {
            ImplChoice::Se => Implementation::Se,
            ImplChoice::Mse => Implementation::Mse,
            ImplChoice::Pse => Implementation::Pse,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
#[clap(rename_all = "snake_case")]
pub enum Axis {
    /// BS transmit power in dBm.
    Power,
    /// Sensing elements at a fixed total element count.
    SensingElements,
    /// Number of users, placed by a seeded nested sequence.
    Users,
}

impl Axis {
    pub fn as_str(self) -> &'static str {
        match self {
            Axis::Power => "power",
            Axis::SensingElements => "sensing_elements",
            Axis::Users => "users",
        }
    }
}

/// Inclusive `start:stop:step` range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeSpec {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl RangeSpec {
    pub fn values(&self) -> Vec<f64> {
        let count = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        (0..count).map(|i| self.start + i as f64 * self.step).collect()
    }
}

impl FromStr for RangeSpec {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || CliError::Usage(format!("range `{s}` is not start:stop:step"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let nums: Vec<f64> = parts
            .iter()
            .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        let (start, stop, step) = (nums[0], nums[1], nums[2]);
        if !nums.iter().all(|v| v.is_finite()) {
            return Err(bad());
        }
        if step <= 0.0 {
            return Err(CliError::Usage(format!("range `{s}` needs a positive step")));
        }
        if stop < start {
            return Err(CliError::Usage(format!("range `{s}` is empty or inverted")));
        }
        Ok(Self { start, stop, step })
    }
}

/// One CSV row: a single optimized phase at one sweep point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRecord {
    pub sweep_name: String,
    pub sweep_value: f64,
    pub phase: String,
    pub implementation: String,
    pub root_crb_az_deg: f64,
    pub root_crb_el_deg: f64,
    /// Empty when the phase serves no users.
    pub min_rate: Option<f64>,
    pub feasible: bool,
    pub outer_iterations: usize,
    pub seed: u64,
}

/// Column order of [`SweepRecord`] rows.
pub const SWEEP_HEADER: [&str; 10] = [
    "sweep_name",
    "sweep_value",
    "phase",
    "implementation",
    "root_crb_az_deg",
    "root_crb_el_deg",
    "min_rate",
    "feasible",
    "outer_iterations",
    "seed",
];

impl SweepRecord {
    fn from_result(name: &str, value: f64, system: &str, seed: u64, r: &OptimResult) -> Self {
        Self {
            sweep_name: name.to_string(),
            sweep_value: value,
            phase: r.phase.as_str().to_string(),
            implementation: system.to_string(),
            root_crb_az_deg: r.root_crb.azimuth_deg,
            root_crb_el_deg: r.root_crb.elevation_deg,
            min_rate: r.rates.min_rate.is_finite().then_some(r.rates.min_rate),
            feasible: r.feasible,
            outer_iterations: r.outer_iterations,
            seed,
        }
    }
}

/// Designs behind a CSV, written as the JSON companion file.
#[derive(Debug, Clone, Serialize)]
pub struct ResultEntry {
    pub system: String,
    pub sweep_value: f64,
    pub result: OptimResult,
}

/// Rows and designs produced by a command.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub records: Vec<SweepRecord>,
    pub results: Vec<ResultEntry>,
}

impl RunOutput {
    pub fn all_feasible(&self) -> bool {
        self.records.iter().all(|r| r.feasible)
    }

    /// Exit status contract: 0 when every row is feasible, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.all_feasible() {
            0
        } else {
            2
        }
    }
}

/// Settings shared by every command.
#[derive(Debug, Clone)]
pub struct Common {
    pub scenario: Option<PathBuf>,
    pub seed: u64,
    pub out: PathBuf,
    pub implementation: Option<ImplChoice>,
    pub phase: PhaseChoice,
}

/// Reads a scenario file, or the built-in default scenario when no path is given.
pub fn load_scenario(path: Option<&Path>) -> Result<ScenarioConfig> {
    match path {
        None => Ok(default_paper_scenario()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|source| CliError::Io {
                path: p.to_path_buf(),
                source,
            })?;
            Ok(parse_scenario(&text)?)
        }
    }
}

fn scenario_for(common: &Common) -> Result<ScenarioConfig> {
    let mut config = load_scenario(common.scenario.as_deref())?;
    if let Some(i) = common.implementation {
        config.implementation = i.into();
    }
    Ok(config)
}

/// Runs the optimizer matching the configured implementation for one phase.
pub fn optimize_phase(config: &ScenarioConfig, channels: &ChannelSet, side: Region, seed: u64) -> Result<OptimResult> {
    let mut config = config.clone();
    config.phase = side;
    let result = match config.implementation {
        Implementation::Se => alternating_optimize(&config, channels, seed)?,
        Implementation::Mse => optimize_mode_selection(&config, channels, seed)?,
        Implementation::Pse => optimize_power_split(&config, channels, seed)?,
    };
    Ok(result)
}

fn baseline_phase(config: &ScenarioConfig, channels: &ChannelSet, side: Region, seed: u64) -> Result<OptimResult> {
    let mut config = config.clone();
    config.phase = side;
    Ok(optimize_baseline_dual_ris(&config, channels, seed)?)
}

/// Sides of `choice` that carry a target in `config`.
fn served_sides(config: &ScenarioConfig, choice: PhaseChoice) -> Result<Vec<Region>> {
    let sides: Vec<Region> = choice
        .sides()
        .into_iter()
        .filter(|&s| config.target_on(s).is_some())
        .collect();
    if sides.is_empty() {
        return Err(CliError::Usage("no target on the requested phase".into()));
    }
    Ok(sides)
}

/// STARS (and, with `baseline`, dual-RIS) rows for every requested phase of
/// one scenario on one channel draw.
fn evaluate_point(
    config: &ScenarioConfig,
    channels: &ChannelSet,
    sides: &[Region],
    baseline: bool,
    sweep: (&str, f64),
    seed: u64,
) -> Result<RunOutput> {
    let mut records = Vec::new();
    let mut results = Vec::new();
    let system = config.implementation.as_str();
    for &side in sides {
        let r = optimize_phase(config, channels, side, seed)?;
        records.push(SweepRecord::from_result(sweep.0, sweep.1, system, seed, &r));
        results.push(ResultEntry {
            system: system.to_string(),
            sweep_value: sweep.1,
            result: r,
        });
    }
    if baseline {
        for &side in sides {
            let r = baseline_phase(config, channels, side, seed)?;
            records.push(SweepRecord::from_result(sweep.0, sweep.1, "dual_ris", seed, &r));
            results.push(ResultEntry {
                system: "dual_ris".to_string(),
                sweep_value: sweep.1,
                result: r,
            });
        }
    }
    Ok(RunOutput { records, results })
}

/// Optimizes every scheduled phase of the scenario.
pub fn cmd_run(common: &Common, baseline: bool) -> Result<RunOutput> {
    let config = scenario_for(common)?;
    let channels = synthesize_channels(&config, common.seed)?;
    let sides = served_sides(&config, common.phase)?;
    let out = evaluate_point(&config, &channels, &sides, baseline, ("run", 0.0), common.seed)?;
    write_outputs(&common.out, &out)?;
    Ok(out)
}

/// STARS and dual-RIS designs on identical channels and seeds.
pub fn cmd_compare_baseline(common: &Common) -> Result<RunOutput> {
    let config = scenario_for(common)?;
    let channels = synthesize_channels(&config, common.seed)?;
    let sides = served_sides(&config, common.phase)?;
    let out = evaluate_point(&config, &channels, &sides, true, ("compare_baseline", 0.0), common.seed)?;
    write_outputs(&common.out, &out)?;
    Ok(out)
}

/// Scenario at one point of a sweep.
pub fn sweep_point(base: &ScenarioConfig, axis: Axis, value: f64, seed: u64) -> Result<ScenarioConfig> {
    let mut config = base.clone();
    let count = || -> Result<usize> {
        if value < 0.0 || value.fract() != 0.0 {
            return Err(CliError::Usage(format!("{} takes whole counts, got {value}", axis.as_str())));
        }
        Ok(value as usize)
    };
    match axis {
        Axis::Power => config.bs_power_budget = dbm_to_watts(value),
        Axis::SensingElements => config.sensing_element_count = count()?,
        Axis::Users => config.users = place_users(count()?, seed),
    }
    config.validate()?;
    Ok(config)
}

/// One optimization per sweep point and phase. Channels are drawn once from
/// the base scenario, except on the users axis where the user links change.
pub fn cmd_sweep(common: &Common, axis: Axis, range: RangeSpec, baseline: bool) -> Result<RunOutput> {
    let base = scenario_for(common)?;
    let values = range.values();
    let configs: Vec<ScenarioConfig> = values
        .iter()
        .map(|&v| sweep_point(&base, axis, v, common.seed))
        .collect::<Result<_>>()?;
    let sides = served_sides(&base, common.phase)?;
    let shared = synthesize_channels(&base, common.seed)?;
    let points: Vec<RunOutput> = configs
        .par_iter()
        .zip(&values)
        .map(|(config, &v)| {
            let own;
            let channels = if axis == Axis::Users {
                own = synthesize_channels(config, common.seed)?;
                &own
            } else {
                &shared
            };
            evaluate_point(config, channels, &sides, baseline, (axis.as_str(), v), common.seed)
        })
        .collect::<Result<_>>()?;
    let mut out = RunOutput {
        records: Vec::new(),
        results: Vec::new(),
    };
    for p in points {
        out.records.extend(p.records);
        out.results.extend(p.results);
    }
    write_outputs(&common.out, &out)?;
    Ok(out)
}

/// One SNR point of the bound-versus-estimator comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationRow {
    pub snr_db: f64,
    pub root_crb_az_deg: f64,
    pub root_crb_el_deg: f64,
    pub music_rmse_az_deg: f64,
    pub music_rmse_el_deg: f64,
}

/// Default per-element echo SNR points of `validate`, in dB.
pub const VALIDATE_SNR: &str = "-5:25:5";

/// Root-CRB against MUSIC RMSE as the per-element echo SNR at the surface is
/// swept by scaling the sensing noise power. The reflection phase (or the
/// first requested phase) is illuminated by the rank-one covariance that
/// maximizes the echo power, with the starting surface phases of `seed`.
pub fn cmd_validate(common: &Common, trials: usize, snr: RangeSpec) -> Result<Vec<ValidationRow>> {
    if trials < 10 {
        return Err(CliError::Usage(format!("validate needs at least 10 trials, got {trials}")));
    }
    let config = scenario_for(common)?;
    let side = served_sides(&config, common.phase)?[0];
    let target_id = config.target_on(side).expect("served side has a target");
    let channels = synthesize_channels(&config, common.seed)?;
    let profile = initial_profile(&config, side, None, 0.0, common.seed)?;
    let model = EchoModel::new(&config, &channels, &profile, target_id)?;
    let r_x = rank_one_illumination(&model, &profile, config.bs_power_budget)?;
    let reference = echo_snr_comparison(&config, &channels, &profile, &r_x, target_id)?.snr_at_stars_db;

    let mut rows = Vec::new();
    for snr_db in snr.values() {
        let mut point = config.clone();
        point.noise_power_sensing = config.noise_power_sensing * 10f64.powf((reference - snr_db) / 10.0);
        let fim = fisher_information(&point, &channels, &profile, &r_x, target_id)?;
        let crb = root_crb_degrees(&fim)?;
        let mc = monte_carlo_rmse(&point, &channels, &profile, &r_x, target_id, trials, common.seed)?;
        rows.push(ValidationRow {
            snr_db,
            root_crb_az_deg: crb.azimuth_deg,
            root_crb_el_deg: crb.elevation_deg,
            music_rmse_az_deg: mc.rmse_az_deg,
            music_rmse_el_deg: mc.rmse_el_deg,
        });
    }
    write_csv(&common.out, &rows)?;
    Ok(rows)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

/// Path of the JSON companion of a CSV output.
pub fn json_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

fn write_outputs(path: &Path, out: &RunOutput) -> Result<()> {
    if out.records.is_empty() {
        // csv writes the header together with the first row.
        fs::write(path, SWEEP_HEADER.join(",") + "\n").map_err(io_err(path))?;
    } else {
        write_csv(path, &out.records)?;
    }
    let json = serde_json::to_string_pretty(&out.results).expect("results serialize");
    let jp = json_path(path);
    fs::write(&jp, json + "\n").map_err(io_err(&jp))?;
    Ok(())
}
