//! Optimize, evaluate and analyze stages and the files they write.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use miub_core::evaluation::{
    ambiguity, autocorrelation, doppler_grid, mse_vs_scr, roc_curve, EstimationRun, RocCurve,
};
use miub_core::gmd::Scenario;
use miub_core::io;
use miub_core::objective::{MiObjective, MiubObjective, Objective, WsmObjective};
use miub_core::optimizer::{random_phase_code, rpc_search, run_pcdoa, run_pso, SearchSpace};
use miub_core::rng::{derive_key, purpose, stream};
use miub_core::waveform::Waveform;

use crate::config::{Algorithm, ExperimentConfig, ObjectiveKind};
use crate::error::{CliError, CliResult};
use crate::manifest::{ResultManifest, Role};
use crate::validation;

pub const WAVEFORM_FILE: &str = "waveform.txt";
pub const TRACE_FILE: &str = "trace.txt";
pub const ROC_FILE: &str = "roc.txt";
pub const ROC_RPC_FILE: &str = "roc_rpc.txt";
pub const MSE_FILE: &str = "mse.txt";
pub const AUTOCORR_FILE: &str = "autocorr.txt";
pub const AMBIGUITY_FILE: &str = "ambiguity.txt";
pub const VALIDATION_FILE: &str = "validation.txt";

/// Per-stage seed tags under the top-level seed.
pub mod stage {
    pub const OPTIMIZE: u64 = 1;
    pub const RPC_REFERENCE: u64 = 2;
    pub const DETECTION: u64 = 3;
    pub const ESTIMATION: u64 = 4;
    pub const VALIDATION: u64 = 5;
}

const STAGE_DOMAIN: u64 = 0x4D49_5542;

pub fn stage_seed(master: u64, tag: u64) -> u64 {
    derive_key(master, &[STAGE_DOMAIN, tag])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Optimize,
    Evaluate,
    Analyze,
    Validate,
    /// Optimize, evaluate and analyze.
    Run,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Optimize => "optimize",
            Command::Evaluate => "evaluate",
            Command::Analyze => "analyze",
            Command::Validate => "validate",
            Command::Run => "run",
        }
    }
}

/// Shared state of one invocation.
pub(crate) struct Context<'a> {
    pub config: &'a ExperimentConfig,
    pub dir: &'a Path,
    pub hash: String,
    pub manifest: ResultManifest,
}

impl<'a> Context<'a> {
    fn new(config: &'a ExperimentConfig, dir: &'a Path) -> CliResult<Self> {
        let hash = config.hash()?;
        std::fs::create_dir_all(dir).map_err(|source| CliError::Write { path: dir.into(), source })?;
        let manifest = ResultManifest::open(dir, &hash, config.seed);
        let ctx = Self { config, dir, hash, manifest };
        ctx.manifest.write(dir)?;
        Ok(ctx)
    }

    /// Provenance lines that open every result file.
    pub fn header(&self, extra: &[String]) -> Vec<String> {
        let mut h = vec![
            format!("miub {}", env!("CARGO_PKG_VERSION")),
            format!("config_hash: {}", self.hash),
            format!("seed: {}", self.config.seed),
        ];
        h.extend_from_slice(extra);
        h
    }

    /// Writes `name` through `body` and records it in the manifest.
    pub fn write_file(
        &mut self,
        name: &str,
        role: Role,
        body: impl FnOnce(&mut BufWriter<File>) -> miub_core::Result<()>,
    ) -> CliResult<()> {
        let path = self.dir.join(name);
        let file = File::create(&path).map_err(|source| CliError::Write { path: path.clone(), source })?;
        let mut w = BufWriter::new(file);
        body(&mut w)?;
        w.flush().map_err(|source| CliError::Write { path, source })?;
        self.manifest.add(name, role);
        self.manifest.write(self.dir)
    }

    fn stage_done(&mut self, name: &str) -> CliResult<()> {
        if !self.manifest.stages.iter().any(|s| s == name) {
            self.manifest.stages.push(name.to_string());
        }
        self.manifest.write(self.dir)
    }
}

/// Output directory: `--out`, then the config's `output_dir`, then `./out`.
pub fn resolve_output_dir(config: &ExperimentConfig, out: Option<&Path>) -> PathBuf {
    out.map(Path::to_path_buf).or_else(|| config.output_dir.clone()).unwrap_or_else(|| PathBuf::from("out"))
}

/// Runs the whole optimize → evaluate → analyze pipeline.
pub fn run_pipeline(config: &ExperimentConfig, out_dir: &Path) -> CliResult<ResultManifest> {
    execute(config, out_dir, Command::Run)
}

/// Runs one command. The manifest is rewritten after every file; if a stage
/// fails it stays flagged incomplete.
pub fn execute(config: &ExperimentConfig, out_dir: &Path, command: Command) -> CliResult<ResultManifest> {
    if command == Command::Validate {
        return validation::execute(config, out_dir);
    }
    let scenario = config.prepare()?;
    let mut ctx = Context::new(config, out_dir)?;

    let waveform = match command {
        Command::Optimize | Command::Run => {
            let w = optimize(&mut ctx, &scenario)?;
            ctx.stage_done("optimize")?;
            w
        }
        _ => load_waveform(&ctx, &scenario)?,
    };
    if matches!(command, Command::Evaluate | Command::Run) {
        evaluate(&mut ctx, &scenario, &waveform)?;
        ctx.stage_done("evaluate")?;
    }
    if matches!(command, Command::Analyze | Command::Run) {
        analyze(&mut ctx, &waveform)?;
        ctx.stage_done("analyze")?;
    }
    ctx.manifest.finish();
    ctx.manifest.write(out_dir)?;
    Ok(ctx.manifest)
}

pub fn make_objective(config: &ExperimentConfig, scenario: &Scenario) -> CliResult<Box<dyn Objective>> {
    Ok(match config.objective.kind {
        ObjectiveKind::Miub | ObjectiveKind::Rpc => Box::new(MiubObjective::new(scenario)?),
        ObjectiveKind::Mi => Box::new(MiObjective::new(scenario)?),
        ObjectiveKind::Wsm => Box::new(WsmObjective::new(scenario, config.objective.weight)?),
    })
}

/// A seeded random phase code for `scenario`.
pub fn reference_code(scenario: &Scenario, seed: u64) -> CliResult<Waveform> {
    let mut rng = stream(seed, &[purpose::RPC]);
    Ok(random_phase_code(scenario.code_len(), scenario.magnitude(), &mut rng)?)
}

fn optimize(ctx: &mut Context<'_>, scenario: &Scenario) -> CliResult<Waveform> {
    let config = ctx.config;
    let space = SearchSpace::from(scenario);
    let seed = stage_seed(config.seed, stage::OPTIMIZE);
    let objective = make_objective(config, scenario)?;
    let algorithm = if config.objective.kind == ObjectiveKind::Rpc { Algorithm::Rpc } else { config.optimizer.algorithm };

    let (waveform, fitness) = match (config.objective.kind, algorithm) {
        (ObjectiveKind::Rpc, _) => {
            let w = reference_code(scenario, seed)?;
            let f = objective.evaluate(&w)?;
            (w, f)
        }
        (_, Algorithm::Rpc) => {
            let search = rpc_search(&*objective, space, config.optimizer.rpc_draws, seed)?;
            (space.waveform(search.best.phases.clone())?, search.max())
        }
        (_, Algorithm::Pcdoa) => {
            let mut pc = config.optimizer.pcdoa.clone();
            pc.seed = seed;
            let trace = run_pcdoa(&*objective, space, &pc)?;
            let header = ctx.header(&[format!("algorithm: pcdoa, objective: {}", config.objective.kind)]);
            ctx.write_file(TRACE_FILE, Role::Trace, |w| io::write_trace(w, &header, &trace))?;
            (trace.best_waveform(space)?, trace.best_fitness())
        }
        (_, Algorithm::Pso) => {
            let mut pso = config.optimizer.pso.clone();
            pso.seed = seed;
            let trace = run_pso(&*objective, space, &pso)?;
            let header = ctx.header(&[format!("algorithm: pso, objective: {}", config.objective.kind)]);
            ctx.write_file(TRACE_FILE, Role::Trace, |w| io::write_trace(w, &header, &trace))?;
            (trace.best_waveform(space)?, trace.best_fitness())
        }
    };

    let header = ctx.header(&[
        format!("algorithm: {algorithm}, objective: {}", config.objective.kind),
        format!("fitness: {}", io::fmt_f64(fitness)),
    ]);
    ctx.write_file(WAVEFORM_FILE, Role::Waveform, |w| io::write_waveform_text(w, &header, &waveform))?;
    Ok(waveform)
}

/// Reads the waveform written by an earlier `optimize` with the same config.
fn load_waveform(ctx: &Context<'_>, scenario: &Scenario) -> CliResult<Waveform> {
    let path = ctx.dir.join(WAVEFORM_FILE);
    if !path.exists() {
        return Err(CliError::MissingInput(format!("{} not found; run `optimize` first", path.display())));
    }
    let open = || File::open(&path).map_err(|source| CliError::Read { path: path.clone(), source });
    let expected = format!("# config_hash: {}", ctx.hash);
    let matches = BufReader::new(open()?)
        .lines()
        .map_while(|l| l.ok())
        .take_while(|l| l.starts_with('#'))
        .any(|l| l == expected);
    if !matches {
        return Err(CliError::MissingInput(format!("{} was produced by a different config", path.display())));
    }
    let stored = io::read_waveform_text(BufReader::new(open()?))?;
    if stored.len() != scenario.code_len() {
        return Err(CliError::MissingInput(format!(
            "{} has {} samples, expected {}",
            path.display(),
            stored.len(),
            scenario.code_len()
        )));
    }
    // Rebuild from the phases so the modulus is exactly the configured one.
    Ok(SearchSpace::from(scenario).waveform(stored.phases().clone())?)
}

/// ROC restricted to the configured operating points.
pub fn roc_at_grid(roc: &RocCurve, pfa_grid: &[f64]) -> RocCurve {
    if pfa_grid.is_empty() {
        return roc.clone();
    }
    RocCurve {
        points: pfa_grid.iter().map(|&p| roc.operating_point(p)).collect(),
        trials_h0: roc.trials_h0,
        trials_h1: roc.trials_h1,
    }
}

fn evaluate(ctx: &mut Context<'_>, scenario: &Scenario, waveform: &Waveform) -> CliResult<()> {
    let config = ctx.config;
    let ev = &config.evaluation;
    let run = config.detection_run(stage_seed(config.seed, stage::DETECTION));
    let label = config.objective.kind.to_string();

    let roc = roc_at_grid(&roc_curve(scenario, waveform, &run)?, &ev.pfa_grid);
    let header = ctx.header(&[format!("waveform: {label}, scr_db: {}", io::fmt_f64(scenario.scr_db()))]);
    ctx.write_file(ROC_FILE, Role::Roc, |w| io::write_roc(w, &header, &roc))?;

    let mut waveforms = vec![(label, waveform.clone())];
    if ev.rpc_reference && config.objective.kind != ObjectiveKind::Rpc {
        let reference = reference_code(scenario, stage_seed(config.seed, stage::RPC_REFERENCE))?;
        let roc = roc_at_grid(&roc_curve(scenario, &reference, &run)?, &ev.pfa_grid);
        let header = ctx.header(&[format!("waveform: rpc, scr_db: {}", io::fmt_f64(scenario.scr_db()))]);
        ctx.write_file(ROC_RPC_FILE, Role::Roc, |w| io::write_roc(w, &header, &roc))?;
        waveforms.push(("rpc".to_string(), reference));
    }

    let grid = if ev.scr_grid.is_empty() { vec![scenario.scr_db()] } else { ev.scr_grid.clone() };
    let est = EstimationRun { trials: ev.mse_trials, seed: stage_seed(config.seed, stage::ESTIMATION) };
    let rows = mse_vs_scr(scenario, &grid, &waveforms, &est)?;
    let header = ctx.header(&[]);
    ctx.write_file(MSE_FILE, Role::Mse, |w| io::write_mse(w, &header, &rows))
}

fn analyze(ctx: &mut Context<'_>, waveform: &Waveform) -> CliResult<()> {
    let ac = autocorrelation(waveform);
    let header = ctx.header(&[]);
    ctx.write_file(AUTOCORR_FILE, Role::Autocorr, |w| io::write_autocorrelation(w, &header, &ac))?;

    let amb = ambiguity(waveform, &doppler_grid(ctx.config.evaluation.doppler_points))?;
    ctx.write_file(AMBIGUITY_FILE, Role::Ambiguity, |w| io::write_ambiguity(w, &header, &amb))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stage_seeds_are_distinct() {
        let tags = [stage::OPTIMIZE, stage::RPC_REFERENCE, stage::DETECTION, stage::ESTIMATION, stage::VALIDATION];
        let seeds: std::collections::HashSet<_> = tags.iter().map(|&t| stage_seed(11, t)).collect();
        assert_eq!(seeds.len(), tags.len());
        assert_ne!(stage_seed(11, stage::OPTIMIZE), stage_seed(12, stage::OPTIMIZE));
    }

    #[test]
    fn output_dir_precedence() {
        let mut c = ExperimentConfig::toy();
        assert_eq!(resolve_output_dir(&c, None), PathBuf::from("out"));
        c.output_dir = Some("from_config".into());
        assert_eq!(resolve_output_dir(&c, None), PathBuf::from("from_config"));
        assert_eq!(resolve_output_dir(&c, Some(Path::new("flag"))), PathBuf::from("flag"));
    }

    #[test]
    fn grid_roc_reports_requested_points() {
        let h0: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let h1: Vec<f64> = (0..100).map(|i| i as f64 + 50.0).collect();
        let roc = RocCurve::from_statistics(&h0, &h1, None).unwrap();
        let grid = roc_at_grid(&roc, &[0.01, 0.1]);
        assert_eq!(grid.points.len(), 2);
        assert!(grid.points.iter().zip([0.01, 0.1]).all(|(p, t)| p.pfa <= t));
        assert_eq!(roc_at_grid(&roc, &[]), roc);
    }
}
