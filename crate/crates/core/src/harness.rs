//! Experiment driver: runs a scenario in one of several modes over seeded
//! repeats and writes CSV reports.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path as FsPath, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use thiserror::Error;

use crate::engine::{run_continuous, run_to_completion, EngineError, SimState, Termination};
use crate::ffa::{fast_forward_with, write_jump_csv, FfaError, IpParams, JumpRecord, JumpRequest};
use crate::fog::{run_fogged, write_fog_csv, FogEvent, FogWorld};
use crate::geom::Vec2;
use crate::metrics::{avg_error, mean_dif, simulation_stats, MetricsError, RunStats};
use crate::scenario::{parse_scenario, FogSpec, Scenario, ScenarioError};

pub const DEFAULT_REPEATS: usize = 5;
/// Upper bound on the mean jump error accepted by `--check`, meters.
pub const CHECK_ERROR_BOUND: f64 = 2.5;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("scenario: {0}")]
    Scenario(#[from] ScenarioError),
    #[error("cannot read scenario {path}: {source}")]
    ScenarioFile { path: PathBuf, source: io::Error },
    #[error("engine: {0}")]
    Engine(#[from] EngineError),
    #[error("fast-forward: {0}")]
    Ffa(#[from] FfaError),
    #[error("metrics: {0}")]
    Metrics(#[from] MetricsError),
    #[error("frame limit {limit} reached before the stop frame {stop}")]
    StopNotReached { stop: u64, limit: u64 },
    #[error("bad value for {var}: {value:?}")]
    BadOverride { var: &'static str, value: String },
    #[error("check failed: {0}")]
    Check(String),
    #[error("i/o on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("csv on {path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
}

impl HarnessError {
    /// Process exit code: 1 for bad input, 3 for failed checks, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Scenario(_)
            | HarnessError::ScenarioFile { .. }
            | HarnessError::BadOverride { .. } => 1,
            HarnessError::Check(_) => 3,
            _ => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Continuous,
    Ffa,
    Compare,
    Fog,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Continuous => "continuous",
            Mode::Ffa => "ffa",
            Mode::Compare => "compare",
            Mode::Fog => "fog",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentPlan {
    pub scenario: Scenario,
    /// Label used in the `sim_id` column.
    pub sim_id: String,
    pub mode: Mode,
    pub repeats: usize,
    /// Base seed; repeat `r` runs with `seed + r`. Defaults to the
    /// scenario's seed.
    pub seed: Option<u64>,
    pub out_dir: PathBuf,
    pub check: bool,
}

impl ExperimentPlan {
    pub fn from_file(path: &FsPath, mode: Mode, out_dir: PathBuf) -> Result<Self, HarnessError> {
        let text = fs::read_to_string(path).map_err(|source| HarnessError::ScenarioFile {
            path: path.to_path_buf(),
            source,
        })?;
        let scenario = parse_scenario(&text)?;
        let sim_id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "scenario".to_string());
        Ok(ExperimentPlan {
            scenario,
            sim_id,
            mode,
            repeats: DEFAULT_REPEATS,
            seed: None,
            out_dir,
            check: false,
        })
    }

    fn base_seed(&self) -> u64 {
        self.seed.unwrap_or(self.scenario.world.seed)
    }
}

/// Applies `CROWDFF_WEIBULL_K`, `CROWDFF_WEIBULL_LAMBDA` and
/// `CROWDFF_FOG_SUBDIVISION` using `lookup` as the environment.
pub fn apply_overrides(
    scenario: &mut Scenario,
    lookup: impl Fn(&str) -> Option<String>,
) -> Result<(), HarnessError> {
    fn parse<T: std::str::FromStr>(var: &'static str, value: String) -> Result<T, HarnessError> {
        value
            .trim()
            .parse()
            .map_err(|_| HarnessError::BadOverride { var, value })
    }
    if let Some(v) = lookup("CROWDFF_WEIBULL_K") {
        scenario.ff.weibull_k = parse("CROWDFF_WEIBULL_K", v)?;
    }
    if let Some(v) = lookup("CROWDFF_WEIBULL_LAMBDA") {
        scenario.ff.weibull_lambda = parse("CROWDFF_WEIBULL_LAMBDA", v)?;
    }
    if let Some(v) = lookup("CROWDFF_FOG_SUBDIVISION") {
        let s: u32 = parse("CROWDFF_FOG_SUBDIVISION", v)?;
        scenario.fog.get_or_insert_with(FogSpec::default).subdivision = s;
    }
    scenario.validate()?;
    Ok(())
}

fn run_to_stop(state: &mut SimState) -> Result<(), HarnessError> {
    let stop = state.scenario.ff.stop_frame;
    match run_continuous(state, |s| s.frame >= stop) {
        Termination::Satisfied => Ok(()),
        Termination::FrameLimit => Err(HarnessError::StopNotReached {
            stop,
            limit: state.scenario.world.max_frames,
        }),
    }
}

fn ids_and(positions: Vec<Vec2>) -> Vec<(usize, Vec2)> {
    positions.into_iter().enumerate().collect()
}

/// One continuous run together with its fast-forwarded twin.
#[derive(Debug, Clone)]
pub struct CompareOutcome {
    pub seed: u64,
    pub bc_stop: Vec<Vec2>,
    pub bc_target: Vec<Vec2>,
    pub ffa_target: Vec<Vec2>,
    pub jumps: Vec<JumpRecord>,
    pub avg_error: f64,
    pub mean_dif: Option<f64>,
    pub dif_excluded: Vec<usize>,
    /// Present when both runs were continued to completion.
    pub continuous: Option<(RunStats, SimState)>,
    pub fast_forwarded: Option<(RunStats, SimState)>,
}

/// Runs to the stop frame, forks, advances the continuous branch to the
/// target frame and jumps the other. With `complete`, both branches then
/// run until every agent arrives or the frame limit hits.
pub fn compare_run(
    scenario: Arc<Scenario>,
    seed: u64,
    ip: &IpParams,
    complete: bool,
) -> Result<CompareOutcome, HarnessError> {
    let request = JumpRequest::from_spec(&scenario.ff);
    let mut bc = SimState::with_seed(scenario, seed)?;
    run_to_stop(&mut bc)?;
    let bc_stop = bc.positions();
    let mut ffa = bc.clone();

    let target = request.target_frame;
    run_continuous(&mut bc, |s| s.frame >= target);
    let bc_target = bc.positions();

    let jumps = fast_forward_with(&mut ffa, request, ip)?;
    let ffa_target = ffa.positions();

    let avg_error = avg_error(&ids_and(bc_target.clone()), &ids_and(ffa_target.clone()))?;
    let entries: Vec<_> = (0..bc_stop.len())
        .map(|i| (i, bc_stop[i], bc_target[i], ffa_target[i]))
        .collect();
    let dif = mean_dif(&entries);

    let (continuous, fast_forwarded) = if complete {
        run_to_completion(&mut bc);
        run_to_completion(&mut ffa);
        (
            Some((simulation_stats(&bc.trajectory), bc)),
            Some((simulation_stats(&ffa.trajectory), ffa)),
        )
    } else {
        (None, None)
    };

    Ok(CompareOutcome {
        seed,
        bc_stop,
        bc_target,
        ffa_target,
        jumps,
        avg_error,
        mean_dif: dif.mean,
        dif_excluded: dif.excluded,
        continuous,
        fast_forwarded,
    })
}

/// Continuous run to completion.
pub fn continuous_run(scenario: Arc<Scenario>, seed: u64) -> Result<(RunStats, SimState), HarnessError> {
    let mut state = SimState::with_seed(scenario, seed)?;
    run_to_completion(&mut state);
    Ok((simulation_stats(&state.trajectory), state))
}

/// Runs to the stop frame, jumps, then runs to completion.
pub fn ffa_run(
    scenario: Arc<Scenario>,
    seed: u64,
    ip: &IpParams,
) -> Result<(RunStats, SimState, Vec<JumpRecord>), HarnessError> {
    let request = JumpRequest::from_spec(&scenario.ff);
    let mut state = SimState::with_seed(scenario, seed)?;
    run_to_stop(&mut state)?;
    let jumps = fast_forward_with(&mut state, request, ip)?;
    run_to_completion(&mut state);
    Ok((simulation_stats(&state.trajectory), state, jumps))
}

/// Fogged run to completion.
pub fn fog_run(
    scenario: Arc<Scenario>,
    seed: u64,
) -> Result<(RunStats, SimState, Vec<FogEvent>), HarnessError> {
    let spec = scenario.fog.clone().unwrap_or_default();
    let request = JumpRequest::from_spec(&scenario.ff);
    let mut state = SimState::with_seed(scenario, seed)?;
    let mut world = FogWorld::new(&state, &spec, request);
    run_fogged(&mut state, &mut world);
    Ok((simulation_stats(&state.trajectory), state, world.events))
}

/// One line of `summary.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub sim_id: String,
    pub repeat: usize,
    pub seed: u64,
    pub stats: RunStats,
    pub time_ffa_s: Option<f64>,
    pub avg_error_m: Option<f64>,
    pub mean_dif: Option<f64>,
    /// Frames the engine actually stepped in the fast-forwarded run.
    pub ffa_steps: Option<u64>,
    pub ffa_final_frame: Option<u64>,
}

impl SummaryRow {
    /// Frames saved by the jump are exactly the jump span.
    pub fn frame_accounting_holds(&self, span: u64) -> bool {
        match (self.ffa_steps, self.ffa_final_frame) {
            (Some(steps), Some(final_frame)) => steps + span == final_frame,
            _ => true,
        }
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

pub fn write_summary_csv<W: Write>(rows: &[SummaryRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "sim_id",
        "repeat",
        "time_s",
        "avg_speed",
        "avg_ang_var",
        "avg_dist",
        "time_ffa_s",
        "avg_error_m",
        "mean_dif",
        "frames_simulated",
        "frames_simulated_ffa",
    ])?;
    for r in rows {
        w.write_record([
            r.sim_id.clone(),
            r.repeat.to_string(),
            format!("{:.6}", r.stats.total_time),
            format!("{:.6}", r.stats.avg_speed),
            format!("{:.6}", r.stats.avg_ang_var),
            opt(r.stats.avg_dist),
            opt(r.time_ffa_s),
            opt(r.avg_error_m),
            opt(r.mean_dif),
            r.stats.frames_simulated.to_string(),
            r.ffa_steps.map(|f| f.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Group features of the run, one row per group with a personality.
pub fn write_groups_csv<W: Write>(state: &SimState, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["group_id", "psi", "omega", "beta", "zeta", "Psi", "leader_id"])?;
    let mut first_member = Vec::with_capacity(state.profiles.len());
    for gi in 0..state.profiles.len() {
        first_member.push(state.agents.iter().position(|a| a.group == gi));
    }
    for (gi, profile) in state.profiles.iter().enumerate() {
        let Some(p) = profile else { continue };
        let leader = match (p.leader, first_member[gi]) {
            (Some(idx), Some(first)) => (first + idx).to_string(),
            _ => String::new(),
        };
        w.write_record([
            gi.to_string(),
            format!("{:.6}", p.behaviors.walking_speed),
            format!("{:.6}", p.behaviors.leadership),
            format!("{:.6}", p.behaviors.impatience),
            format!("{:.6}", p.cohesion),
            format!("{:.6}", p.desired_speed),
            leader,
        ])?;
    }
    w.flush()?;
    Ok(())
}

struct RepeatArtifacts {
    row: SummaryRow,
    trajectories: Vec<(&'static str, SimState)>,
    jumps: Option<Vec<JumpRecord>>,
    fog_events: Option<Vec<FogEvent>>,
}

fn run_repeat(plan: &ExperimentPlan, scenario: &Arc<Scenario>, repeat: usize) -> Result<RepeatArtifacts, HarnessError> {
    let seed = plan.base_seed().wrapping_add(repeat as u64);
    let ip = IpParams::from(&scenario.ff);
    let mut row = SummaryRow {
        sim_id: plan.sim_id.clone(),
        repeat,
        seed,
        stats: RunStats {
            total_time: 0.0,
            avg_speed: 0.0,
            avg_ang_var: 0.0,
            avg_dist: None,
            frames_simulated: 0,
        },
        time_ffa_s: None,
        avg_error_m: None,
        mean_dif: None,
        ffa_steps: None,
        ffa_final_frame: None,
    };
    let out = match plan.mode {
        Mode::Continuous => {
            let (stats, state) = continuous_run(scenario.clone(), seed)?;
            row.stats = stats;
            RepeatArtifacts {
                row,
                trajectories: vec![("continuous", state)],
                jumps: None,
                fog_events: None,
            }
        }
        Mode::Ffa => {
            let (stats, state, jumps) = ffa_run(scenario.clone(), seed, &ip)?;
            row.time_ffa_s = Some(stats.total_time);
            row.ffa_steps = Some(state.trajectory.steps);
            row.ffa_final_frame = Some(state.trajectory.final_frame);
            row.stats = stats;
            RepeatArtifacts {
                row,
                trajectories: vec![("ffa", state)],
                jumps: Some(jumps),
                fog_events: None,
            }
        }
        Mode::Compare => {
            let c = compare_run(scenario.clone(), seed, &ip, true)?;
            let (bc_stats, bc) = c.continuous.expect("completed run");
            let (ffa_stats, ffa) = c.fast_forwarded.expect("completed run");
            row.stats = bc_stats;
            row.time_ffa_s = Some(ffa_stats.total_time);
            row.avg_error_m = Some(c.avg_error);
            row.mean_dif = c.mean_dif;
            row.ffa_steps = Some(ffa.trajectory.steps);
            row.ffa_final_frame = Some(ffa.trajectory.final_frame);
            RepeatArtifacts {
                row,
                trajectories: vec![("continuous", bc), ("ffa", ffa)],
                jumps: Some(c.jumps),
                fog_events: None,
            }
        }
        Mode::Fog => {
            let (stats, state, events) = fog_run(scenario.clone(), seed)?;
            row.stats = stats;
            RepeatArtifacts {
                row,
                trajectories: vec![("fog", state)],
                jumps: None,
                fog_events: Some(events),
            }
        }
    };
    Ok(out)
}

fn create(path: PathBuf) -> Result<(BufWriter<File>, PathBuf), HarnessError> {
    let f = File::create(&path).map_err(|source| HarnessError::Io {
        path: path.clone(),
        source,
    })?;
    Ok((BufWriter::new(f), path))
}

fn write_with<F>(path: PathBuf, f: F) -> Result<(), HarnessError>
where
    F: FnOnce(&mut BufWriter<File>) -> csv::Result<()>,
{
    let (mut w, path) = create(path)?;
    f(&mut w).map_err(|source| HarnessError::Csv {
        path: path.clone(),
        source,
    })?;
    w.flush().map_err(|source| HarnessError::Io { path, source })
}

/// Result of a full experiment.
#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub rows: Vec<SummaryRow>,
    pub files: Vec<PathBuf>,
}

/// Runs every repeat (in parallel), writes the reports into `out_dir` and,
/// with `check`, verifies the jump error bound and frame accounting.
pub fn run(plan: &ExperimentPlan) -> Result<ExperimentReport, HarnessError> {
    plan.scenario.validate()?;
    let scenario = Arc::new(plan.scenario.clone());
    fs::create_dir_all(&plan.out_dir).map_err(|source| HarnessError::Io {
        path: plan.out_dir.clone(),
        source,
    })?;

    let results: Vec<Result<RepeatArtifacts, HarnessError>> = (0..plan.repeats)
        .into_par_iter()
        .map(|r| run_repeat(plan, &scenario, r))
        .collect();

    let mut rows = Vec::with_capacity(plan.repeats);
    let mut files = Vec::new();
    for (r, result) in results.into_iter().enumerate() {
        let art = result?;
        for (label, state) in &art.trajectories {
            let p = plan.out_dir.join(format!("trajectory_{label}_r{r}.csv"));
            write_with(p.clone(), |w| state.trajectory.write_csv(w))?;
            files.push(p);
        }
        if r == 0 {
            if let Some((_, state)) = art.trajectories.first() {
                let p = plan.out_dir.join("groups.csv");
                write_with(p.clone(), |w| write_groups_csv(state, w))?;
                files.push(p);
            }
        }
        if let Some(jumps) = &art.jumps {
            let p = plan.out_dir.join(format!("jumps_r{r}.csv"));
            write_with(p.clone(), |w| write_jump_csv(jumps, w))?;
            files.push(p);
            if r == 0 {
                let dir = plan.out_dir.join("paths");
                fs::create_dir_all(&dir).map_err(|source| HarnessError::Io {
                    path: dir.clone(),
                    source,
                })?;
                for j in jumps {
                    let p = dir.join(format!("agent_{}.csv", j.agent_id));
                    write_with(p.clone(), |w| j.route.write_csv(w))?;
                    files.push(p);
                }
            }
        }
        if let Some(events) = &art.fog_events {
            let p = plan.out_dir.join(format!("fog_events_r{r}.csv"));
            write_with(p.clone(), |w| write_fog_csv(events, w))?;
            files.push(p);
        }
        rows.push(art.row);
    }
    let p = plan.out_dir.join("summary.csv");
    write_with(p.clone(), |w| write_summary_csv(&rows, w))?;
    files.push(p);

    if plan.check {
        check(plan, &rows)?;
    }
    Ok(ExperimentReport { rows, files })
}

fn check(plan: &ExperimentPlan, rows: &[SummaryRow]) -> Result<(), HarnessError> {
    let span = plan.scenario.ff.target_frame - plan.scenario.ff.stop_frame;
    for r in rows {
        if !r.frame_accounting_holds(span) {
            return Err(HarnessError::Check(format!(
                "repeat {}: {} stepped frames + {span} skipped != final frame {}",
                r.repeat,
                r.ffa_steps.unwrap_or(0),
                r.ffa_final_frame.unwrap_or(0)
            )));
        }
        if let Some(e) = r.avg_error_m {
            if e > CHECK_ERROR_BOUND {
                return Err(HarnessError::Check(format!(
                    "repeat {}: mean jump error {e:.3} m exceeds {CHECK_ERROR_BOUND} m",
                    r.repeat
                )));
            }
        }
    }
    Ok(())
}

/// Writes every built-in scenario as `<name>.json` into `out_dir`.
pub fn write_presets(out_dir: &FsPath) -> Result<Vec<PathBuf>, HarnessError> {
    fs::create_dir_all(out_dir).map_err(|source| HarnessError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let mut out = Vec::new();
    for (name, scenario) in crate::presets::presets() {
        let path = out_dir.join(format!("{name}.json"));
        fs::write(&path, scenario.to_json()).map_err(|source| HarnessError::Io {
            path: path.clone(),
            source,
        })?;
        out.push(path);
    }
    Ok(out)
}

/// Human-readable table of the summary rows.
pub fn format_table(rows: &[SummaryRow]) -> String {
    let mut s = format!(
        "{:<28} {:>3} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9}\n",
        "sim", "rep", "time_s", "speed", "ang_var", "dist", "time_ffa", "err_m", "dif"
    );
    let f = |v: Option<f64>| v.map(|x| format!("{x:.3}")).unwrap_or_else(|| "-".into());
    for r in rows {
        s.push_str(&format!(
            "{:<28} {:>3} {:>9.2} {:>9.3} {:>9.3} {:>9} {:>9} {:>9} {:>9}\n",
            r.sim_id,
            r.repeat,
            r.stats.total_time,
            r.stats.avg_speed,
            r.stats.avg_ang_var,
            f(r.stats.avg_dist),
            f(r.time_ffa_s),
            f(r.avg_error_m),
            f(r.mean_dif),
        ));
    }
    s
}
