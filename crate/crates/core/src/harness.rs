//! Experiment runner: reference generation, seeded batch runs, metric
//! aggregation and result files.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::{Arc, Mutex};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::energy::{EnergyError, EnergyModel, EnergyOptions, EvalCounter};
use crate::molmodel::{parse_molecule, MolError, Molecule, TorsionVector};
use crate::search::{self, PtmcConfig, RunResult, SearchConfig, SearchError, Termination};

/// Default minimum reference sweeps, per torsion.
pub const REFERENCE_MIN_SWEEPS_PER_TORSION: usize = 100_000;
pub const SUCCESS_THRESHOLD: f64 = 1.0;
pub const EARLY_STOP_THRESHOLD: f64 = 0.1;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot parse {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error(transparent)]
    Molecule(#[from] MolError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error("reference does not match molecule: {0}")]
    ReferenceMismatch(String),
    #[error("reference needs at least {min} sweeps, got {got}")]
    TooFewSweeps { min: usize, got: usize },
    #[error("invalid experiment configuration: {0}")]
    Config(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Vnd,
    Ls,
    LsVnd,
    Ptmc,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Vnd => "vnd",
            Method::Ls => "ls",
            Method::LsVnd => "ls_vnd",
            Method::Ptmc => "ptmc",
        }
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "vnd" => Ok(Method::Vnd),
            "ls" => Ok(Method::Ls),
            "ls_vnd" | "lsvnd" => Ok(Method::LsVnd),
            "ptmc" => Ok(Method::Ptmc),
            other => Err(format!("unknown method {other:?}")),
        }
    }
}

/// Loads a molecule file and builds its energy model.
pub fn load_model(path: &Path, opts: EnergyOptions) -> Result<EnergyModel, HarnessError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let spec = parse_molecule(&text)?;
    Ok(EnergyModel::new(Arc::new(Molecule::new(spec)), opts)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceProvenance {
    pub method: String,
    pub ptmc: PtmcConfig,
    pub scale_14: f64,
    pub pair_cap: f64,
    pub energy_evals: u64,
    pub wall_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRecord {
    pub torsions: TorsionVector,
    pub energy: f64,
    pub n_atoms: usize,
    pub n_torsions: usize,
    pub provenance: ReferenceProvenance,
}

impl ReferenceRecord {
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        serde_json::from_str(&text)
            .map_err(|e| HarnessError::Parse { path: path.to_path_buf(), message: e.to_string() })
    }

    pub fn save(&self, path: &Path) -> Result<(), HarnessError> {
        let text = serde_json::to_string_pretty(self).expect("reference serializes");
        fs::write(path, text + "\n").map_err(io_err(path))
    }

    /// Checks that the record belongs to `model` and that its energy is reproducible.
    pub fn check(&self, model: &EnergyModel) -> Result<(), HarnessError> {
        let mol = model.molecule();
        if self.n_atoms != mol.n_atoms()
            || self.n_torsions != mol.n_torsions()
            || self.torsions.len() != mol.n_torsions()
        {
            return Err(HarnessError::ReferenceMismatch(format!(
                "reference has {} atoms and {} torsions, molecule has {} and {}",
                self.n_atoms,
                self.n_torsions,
                mol.n_atoms(),
                mol.n_torsions()
            )));
        }
        let e = model.total_energy(&self.torsions, &mut EvalCounter::new())?;
        if (e - self.energy).abs() > 1e-9 * (1.0 + e.abs()) {
            return Err(HarnessError::ReferenceMismatch(format!("stored energy {} but vector gives {e}", self.energy)));
        }
        Ok(())
    }
}

/// Long PTMC run producing the reference conformation.
pub fn generate_reference(model: &EnergyModel, cfg: &PtmcConfig) -> Result<ReferenceRecord, HarnessError> {
    generate_reference_with_min(model, cfg, REFERENCE_MIN_SWEEPS_PER_TORSION)
}

pub fn generate_reference_with_min(
    model: &EnergyModel,
    cfg: &PtmcConfig,
    min_sweeps_per_torsion: usize,
) -> Result<ReferenceRecord, HarnessError> {
    let mol = model.molecule();
    let m = mol.n_torsions();
    let min = min_sweeps_per_torsion.saturating_mul(m);
    if cfg.sweeps < min {
        return Err(HarnessError::TooFewSweeps { min, got: cfg.sweeps });
    }
    let cfg = PtmcConfig { target_energy: None, ..cfg.clone() };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let r = search::ptmc(model, &cfg, &mut rng, None)?;
    // Re-score so the stored energy is exactly what the vector reproduces.
    let energy = model.total_energy(&r.best_t, &mut EvalCounter::new())?;
    Ok(ReferenceRecord {
        torsions: r.best_t,
        energy,
        n_atoms: mol.n_atoms(),
        n_torsions: m,
        provenance: ReferenceProvenance {
            method: "ptmc".into(),
            ptmc: cfg,
            scale_14: model.options().scale_14,
            pair_cap: model.options().pair_cap,
            energy_evals: r.energy_evals,
            wall_time: r.wall_time,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub molecule_path: Option<PathBuf>,
    /// Model label written to the metrics table.
    pub model: String,
    pub method: Method,
    pub search: SearchConfig,
    pub ptmc: PtmcConfig,
    pub runs: usize,
    pub reference_path: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub base_seed: u64,
    pub success_threshold: f64,
    pub early_stop_threshold: f64,
    /// Worker threads; `None` uses every available processor.
    pub workers: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            molecule_path: None,
            model: "molecule".into(),
            method: Method::Vnd,
            search: SearchConfig::default(),
            ptmc: PtmcConfig::default(),
            runs: 100,
            reference_path: None,
            output_dir: None,
            base_seed: 0,
            success_threshold: SUCCESS_THRESHOLD,
            early_stop_threshold: EARLY_STOP_THRESHOLD,
            workers: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run: usize,
    pub seed: u64,
    pub method: Method,
    pub s: usize,
    pub success: bool,
    pub best_energy: f64,
    pub best_t: TorsionVector,
    pub residual: f64,
    pub normalized_residual: f64,
    pub energy_evals: u64,
    pub evals_to_best: u64,
    pub wall_time: f64,
    pub time_to_best: f64,
    pub iterations: usize,
    pub terminated_by: Option<Termination>,
    pub trajectory: Vec<(usize, f64)>,
    /// Set when the run could not execute; the other fields are then placeholders.
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Percentiles {
    pub min: f64,
    pub p50: f64,
    pub p75: f64,
}

/// Linear-interpolated percentile of an ascending slice, `q` in [0, 1].
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of an empty sample");
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

impl Percentiles {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Option<Self> {
        let mut v: Vec<f64> = values.into_iter().collect();
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        Some(Percentiles { min: v[0], p50: percentile(&v, 0.5), p75: percentile(&v, 0.75) })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub method: Method,
    pub model: String,
    pub s: usize,
    pub runs: usize,
    /// Runs that failed to execute; they count as unsuccessful.
    pub failed_runs: usize,
    pub success_rate: f64,
    pub residual: Option<Percentiles>,
    pub normalized_residual: Option<Percentiles>,
    /// Mean evaluations needed to reach each run's best conformation.
    pub energy_evals: f64,
    pub tts: Option<Percentiles>,
    pub reference_energy: f64,
    /// Atom count used for normalization, hydrogens included.
    pub n_atoms: usize,
}

impl Metrics {
    pub fn aggregate(records: &[RunRecord], method: Method, model: &str, reference: &ReferenceRecord) -> Self {
        let ok: Vec<&RunRecord> = records.iter().filter(|r| r.error.is_none()).collect();
        let successes = ok.iter().filter(|r| r.success).count();
        let energy_evals =
            if ok.is_empty() { 0.0 } else { ok.iter().map(|r| r.evals_to_best as f64).sum::<f64>() / ok.len() as f64 };
        Metrics {
            method,
            model: model.to_string(),
            s: records.first().map_or(0, |r| r.s),
            runs: records.len(),
            failed_runs: records.len() - ok.len(),
            success_rate: if records.is_empty() { 0.0 } else { successes as f64 / records.len() as f64 },
            residual: Percentiles::of(ok.iter().map(|r| r.residual)),
            normalized_residual: Percentiles::of(ok.iter().map(|r| r.normalized_residual)),
            energy_evals,
            tts: Percentiles::of(ok.iter().map(|r| r.time_to_best)),
            reference_energy: reference.energy,
            n_atoms: reference.n_atoms,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Experiment {
    pub metrics: Metrics,
    /// Per-run records ordered by run index.
    pub records: Vec<RunRecord>,
}

fn execute_run(
    model: &EnergyModel,
    reference: &ReferenceRecord,
    cfg: &ExperimentConfig,
    run: usize,
) -> Result<RunResult, SearchError> {
    let seed = cfg.base_seed.wrapping_add(run as u64);
    let target = Some(reference.energy + cfg.early_stop_threshold);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let search_cfg =
        SearchConfig { seed, target_energy: target, reference_energy: Some(reference.energy), ..cfg.search.clone() };
    match cfg.method {
        Method::Ptmc => {
            let pc = PtmcConfig { seed, target_energy: target, ..cfg.ptmc.clone() };
            search::ptmc(model, &pc, &mut rng, None)
        }
        Method::Ls => search::local_search(model, &search_cfg, &mut rng, None),
        Method::Vnd => {
            let mut solver = search_cfg.solver.instantiate(seed);
            search::vnd(model, &search_cfg, solver.as_mut(), &mut rng, None)
        }
        Method::LsVnd => {
            let mut solver = search_cfg.solver.instantiate(seed);
            search::ls_vnd(model, &search_cfg, solver.as_mut(), &mut rng)
        }
    }
}

fn record_of(
    result: Result<RunResult, SearchError>,
    reference: &ReferenceRecord,
    cfg: &ExperimentConfig,
    run: usize,
) -> RunRecord {
    let seed = cfg.base_seed.wrapping_add(run as u64);
    let s = cfg.search.s;
    match result {
        Ok(r) => {
            let residual = r.best_energy - reference.energy;
            RunRecord {
                run,
                seed,
                method: cfg.method,
                s,
                success: residual <= cfg.success_threshold,
                best_energy: r.best_energy,
                best_t: r.best_t,
                residual,
                normalized_residual: residual / reference.n_atoms.max(1) as f64,
                energy_evals: r.energy_evals,
                evals_to_best: r.evals_to_best,
                wall_time: r.wall_time,
                time_to_best: r.time_to_best,
                iterations: r.iterations,
                terminated_by: Some(r.terminated_by),
                trajectory: r.trajectory,
                error: None,
            }
        }
        Err(e) => RunRecord {
            run,
            seed,
            method: cfg.method,
            s,
            success: false,
            best_energy: f64::NAN,
            best_t: TorsionVector(Vec::new()),
            residual: f64::NAN,
            normalized_residual: f64::NAN,
            energy_evals: 0,
            evals_to_best: 0,
            wall_time: 0.0,
            time_to_best: 0.0,
            iterations: 0,
            terminated_by: None,
            trajectory: Vec::new(),
            error: Some(e.to_string()),
        },
    }
}

/// Worker count: explicit value, then `CONFSEARCH_WORKERS`, then all processors.
pub fn resolve_workers(explicit: Option<usize>) -> usize {
    explicit
        .or_else(|| std::env::var("CONFSEARCH_WORKERS").ok().and_then(|v| v.trim().parse().ok()))
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Runs `cfg.runs` seeded runs against `reference` and aggregates them.
/// With an output directory, records stream to `runs.jsonl` as runs finish.
pub fn run_experiment(
    model: &EnergyModel,
    reference: &ReferenceRecord,
    cfg: &ExperimentConfig,
) -> Result<Experiment, HarnessError> {
    if cfg.runs == 0 {
        return Err(HarnessError::Config("runs must be at least 1".into()));
    }
    reference.check(model)?;
    cfg.search.validate()?;
    if cfg.method == Method::Ptmc {
        cfg.ptmc.validate()?;
    }
    let sink = match &cfg.output_dir {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(io_err(dir))?;
            let path = dir.join("runs.jsonl");
            Some((Mutex::new(BufWriter::new(File::create(&path).map_err(io_err(&path))?)), path))
        }
        None => None,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(resolve_workers(cfg.workers))
        .build()
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    let records: Result<Vec<RunRecord>, HarnessError> = pool.install(|| {
        (0..cfg.runs)
            .into_par_iter()
            .map(|run| {
                let rec = record_of(execute_run(model, reference, cfg, run), reference, cfg, run);
                if let Some((w, path)) = &sink {
                    let line = serde_json::to_string(&rec).expect("record serializes");
                    let mut w = w.lock().expect("writer lock");
                    writeln!(w, "{line}").and_then(|_| w.flush()).map_err(io_err(path))?;
                }
                Ok(rec)
            })
            .collect()
    });
    let records = records?;
    let metrics = Metrics::aggregate(&records, cfg.method, &cfg.model, reference);
    if let Some(dir) = &cfg.output_dir {
        write_metrics(dir, std::slice::from_ref(&metrics))?;
    }
    Ok(Experiment { metrics, records })
}

/// Re-runs the experiment for each budget `s`, everything else fixed.
pub fn sweep_neighbourhood_size(
    model: &EnergyModel,
    reference: &ReferenceRecord,
    cfg: &ExperimentConfig,
    sizes: &[usize],
) -> Result<Vec<Experiment>, HarnessError> {
    if sizes.is_empty() {
        return Err(HarnessError::Config("no neighbourhood sizes given".into()));
    }
    let mut out = Vec::with_capacity(sizes.len());
    for &s in sizes {
        let mut c = cfg.clone();
        c.search.s = s;
        c.output_dir = cfg.output_dir.as_ref().map(|d| d.join(format!("s{s}")));
        out.push(run_experiment(model, reference, &c)?);
    }
    if let Some(dir) = &cfg.output_dir {
        let table: Vec<Metrics> = out.iter().map(|e| e.metrics.clone()).collect();
        write_metrics(dir, &table)?;
    }
    Ok(out)
}

#[derive(Serialize)]
struct MetricsRow<'a> {
    method: &'a str,
    model: &'a str,
    s: usize,
    success_rate: f64,
    energy_evals: f64,
    residual_min: Option<f64>,
    residual_p50: Option<f64>,
    residual_p75: Option<f64>,
    tts_min: Option<f64>,
    tts_p50: Option<f64>,
    tts_p75: Option<f64>,
}

/// Writes `metrics.csv` and `metrics.json` into `dir`.
pub fn write_metrics(dir: &Path, table: &[Metrics]) -> Result<(), HarnessError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let csv_path = dir.join("metrics.csv");
    let csv_err = |e: csv::Error| HarnessError::Parse { path: csv_path.clone(), message: e.to_string() };
    let mut w = csv::Writer::from_path(&csv_path).map_err(csv_err)?;
    for m in table {
        w.serialize(MetricsRow {
            method: m.method.label(),
            model: &m.model,
            s: m.s,
            success_rate: m.success_rate,
            energy_evals: m.energy_evals,
            residual_min: m.residual.map(|p| p.min),
            residual_p50: m.residual.map(|p| p.p50),
            residual_p75: m.residual.map(|p| p.p75),
            tts_min: m.tts.map(|p| p.min),
            tts_p50: m.tts.map(|p| p.p50),
            tts_p75: m.tts.map(|p| p.p75),
        })
        .map_err(csv_err)?;
    }
    w.flush().map_err(io_err(&csv_path))?;
    let json_path = dir.join("metrics.json");
    let body = match table {
        [one] => serde_json::to_string_pretty(one),
        many => serde_json::to_string_pretty(many),
    }
    .expect("metrics serialize");
    fs::write(&json_path, body + "\n").map_err(io_err(&json_path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentile_interpolates() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(percentile(&v, 0.0), 1.0);
        assert_eq!(percentile(&v, 0.5), 2.5);
        assert_eq!(percentile(&v, 0.75), 3.25);
        assert_eq!(percentile(&[7.0], 0.75), 7.0);
        assert!(Percentiles::of(Vec::new()).is_none());
    }

    #[test]
    fn method_names() {
        for m in [Method::Vnd, Method::Ls, Method::LsVnd, Method::Ptmc] {
            assert_eq!(m.label().parse::<Method>().unwrap(), m);
        }
        assert_eq!("lsvnd".parse::<Method>().unwrap(), Method::LsVnd);
        assert!("sgd".parse::<Method>().is_err());
    }

    #[test]
    fn workers_explicit_wins() {
        assert_eq!(resolve_workers(Some(3)), 3);
        assert!(resolve_workers(None) >= 1);
    }
}
