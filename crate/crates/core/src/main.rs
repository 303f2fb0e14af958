use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use confsearch::encoding::Penalty;
use confsearch::energy::{EnergyOptions, DEFAULT_PAIR_CAP};
use confsearch::harness::{
    generate_reference_with_min, load_model, run_experiment, sweep_neighbourhood_size, ExperimentConfig, HarnessError,
    Method, ReferenceRecord, REFERENCE_MIN_SWEEPS_PER_TORSION,
};
use confsearch::molmodel::{generate_alkane, generate_star, MoleculeSpec};
use confsearch::search::{PtmcConfig, SearchConfig};
use confsearch::solvers::{SaConfig, SolverKind, DEFAULT_EXACT_CAP};

#[derive(Parser)]
#[command(name = "confsearch", version, about = "Torsion-space conformer search")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a reference conformation with a long PTMC run.
    Reference {
        molecule: PathBuf,
        /// Total sweeps; defaults to the minimum for the molecule's torsion count.
        #[arg(long)]
        sweeps: Option<usize>,
        #[arg(long, default_value_t = 10)]
        replicas: usize,
        #[arg(long, default_value_t = 0.5)]
        tmin: f64,
        #[arg(long, default_value_t = 100.0)]
        tmax: f64,
        #[arg(long, default_value_t = 16)]
        d: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Minimum sweeps per torsion accepted for a reference.
        #[arg(long, default_value_t = REFERENCE_MIN_SWEEPS_PER_TORSION)]
        min_sweeps_per_torsion: usize,
        #[arg(long, default_value_t = 1.0)]
        scale_14: f64,
        #[arg(long, default_value_t = DEFAULT_PAIR_CAP)]
        pair_cap: f64,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Run a batch of seeded searches against a reference.
    Run {
        molecule: PathBuf,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value_t = 63)]
        s: usize,
    },
    /// Repeat a VND experiment for several neighbourhood budgets.
    SweepS {
        molecule: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<usize>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Write an n-carbon linear alkane in ideal staggered geometry.
    Alkane {
        #[arg(long)]
        carbons: usize,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Write a quaternary-carbon star with four n-alkyl arms.
    Star {
        #[arg(long, default_value_t = 3)]
        arm_len: usize,
        #[arg(short, long)]
        output: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, default_value = "vnd")]
    method: Method,
    #[arg(long, default_value = "exact")]
    solver: String,
    #[arg(long, default_value_t = 16)]
    d: usize,
    #[arg(long, default_value_t = 200)]
    max_iters: usize,
    #[arg(long, default_value_t = 10)]
    max_no_improve: usize,
    /// `auto` or a fixed penalty value.
    #[arg(long, default_value = "auto")]
    penalty: String,
    #[arg(long, default_value_t = 100)]
    runs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, required = true)]
    reference: PathBuf,
    #[arg(long)]
    remote_url: Option<String>,
    #[arg(long, default_value_t = 60.0)]
    remote_timeout: f64,
    #[arg(long, default_value_t = 5000)]
    sa_reads: usize,
    #[arg(long, default_value_t = 100)]
    sa_sweeps: usize,
    /// PTMC sweep budget per run.
    #[arg(long, default_value_t = 2000)]
    ptmc_sweeps: usize,
    #[arg(long, default_value_t = 10)]
    replicas: usize,
    #[arg(long, default_value_t = 0.5)]
    tmin: f64,
    #[arg(long, default_value_t = 100.0)]
    tmax: f64,
    #[arg(long, default_value_t = 1.0)]
    scale_14: f64,
    /// Ceiling on a single pair energy, kcal/mol.
    #[arg(long, default_value_t = DEFAULT_PAIR_CAP)]
    pair_cap: f64,
    #[arg(long, env = "CONFSEARCH_WORKERS")]
    workers: Option<usize>,
    #[arg(short, long)]
    output: PathBuf,
}

fn parse_penalty(s: &str) -> Result<Penalty, String> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(Penalty::Auto);
    }
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v > 0.0 => Ok(Penalty::Fixed(v)),
        _ => Err(format!("penalty must be `auto` or a positive number, got {s:?}")),
    }
}

fn solver_kind(a: &RunArgs) -> Result<SolverKind, String> {
    match a.solver.as_str() {
        "exact" => Ok(SolverKind::Exact { cap: DEFAULT_EXACT_CAP }),
        "sa" => {
            Ok(SolverKind::Sa(SaConfig { reads: a.sa_reads, sweeps: a.sa_sweeps, seed: a.seed, ..SaConfig::default() }))
        }
        "remote" => match &a.remote_url {
            Some(url) => Ok(SolverKind::Remote { endpoint: url.clone(), timeout_secs: a.remote_timeout }),
            None => Err("--solver remote needs --remote-url".into()),
        },
        other => Err(format!("unknown solver {other:?}")),
    }
}

fn experiment(molecule: &Path, a: &RunArgs, s: usize) -> Result<ExperimentConfig, String> {
    let model = molecule.file_stem().map_or_else(|| "molecule".into(), |n| n.to_string_lossy().into_owned());
    Ok(ExperimentConfig {
        molecule_path: Some(molecule.to_path_buf()),
        model,
        method: a.method,
        search: SearchConfig {
            d: a.d,
            s,
            max_iters: a.max_iters,
            max_no_improve: a.max_no_improve,
            penalty: parse_penalty(&a.penalty)?,
            solver: solver_kind(a)?,
            seed: a.seed,
            target_energy: None,
            reference_energy: None,
        },
        ptmc: PtmcConfig {
            replicas: a.replicas,
            sweeps: a.ptmc_sweeps,
            t_min: a.tmin,
            t_max: a.tmax,
            d: a.d,
            seed: a.seed,
            ..PtmcConfig::default()
        },
        runs: a.runs,
        reference_path: Some(a.reference.clone()),
        output_dir: Some(a.output.clone()),
        base_seed: a.seed,
        workers: a.workers,
        ..ExperimentConfig::default()
    })
}

fn print_table(rows: &[&confsearch::harness::Metrics]) {
    println!("method  model  s  success  evals  residual(min/50/75)  tts(min/50/75)");
    for m in rows {
        let r = m.residual.map_or("-".to_string(), |p| format!("{:.3}/{:.3}/{:.3}", p.min, p.p50, p.p75));
        let t = m.tts.map_or("-".to_string(), |p| format!("{:.3}/{:.3}/{:.3}", p.min, p.p50, p.p75));
        println!(
            "{}  {}  {}  {:.2}  {:.0}  {}  {}",
            m.method.label(),
            m.model,
            m.s,
            m.success_rate,
            m.energy_evals,
            r,
            t
        );
    }
}

fn write_spec(spec: &MoleculeSpec, output: &Path) -> Result<(), String> {
    fs::write(output, spec.to_text()).map_err(|e| format!("{}: {e}", output.display()))?;
    println!("{} atoms, {} torsions written to {}", spec.n_atoms(), spec.n_torsions(), output.display());
    Ok(())
}

fn run(cli: Cli) -> Result<(), String> {
    let err = |e: HarnessError| e.to_string();
    match cli.command {
        Command::Reference {
            molecule,
            sweeps,
            replicas,
            tmin,
            tmax,
            d,
            seed,
            min_sweeps_per_torsion,
            scale_14,
            pair_cap,
            output,
        } => {
            let model = load_model(&molecule, EnergyOptions { scale_14, pair_cap }).map_err(err)?;
            let m = model.molecule().n_torsions();
            let cfg = PtmcConfig {
                replicas,
                sweeps: sweeps.unwrap_or(min_sweeps_per_torsion * m),
                t_min: tmin,
                t_max: tmax,
                d,
                seed,
                ..PtmcConfig::default()
            };
            let rec = generate_reference_with_min(&model, &cfg, min_sweeps_per_torsion).map_err(err)?;
            rec.save(&output).map_err(err)?;
            println!("reference energy {:.6} kcal/mol written to {}", rec.energy, output.display());
        }
        Command::Run { molecule, run, s } => {
            let cfg = experiment(&molecule, &run, s)?;
            let model =
                load_model(&molecule, EnergyOptions { scale_14: run.scale_14, pair_cap: run.pair_cap }).map_err(err)?;
            let reference = ReferenceRecord::load(&run.reference).map_err(err)?;
            let exp = run_experiment(&model, &reference, &cfg).map_err(err)?;
            print_table(&[&exp.metrics]);
        }
        Command::SweepS { molecule, sizes, run } => {
            let cfg = experiment(&molecule, &run, sizes[0])?;
            let model =
                load_model(&molecule, EnergyOptions { scale_14: run.scale_14, pair_cap: run.pair_cap }).map_err(err)?;
            let reference = ReferenceRecord::load(&run.reference).map_err(err)?;
            let exps = sweep_neighbourhood_size(&model, &reference, &cfg, &sizes).map_err(err)?;
            print_table(&exps.iter().map(|e| &e.metrics).collect::<Vec<_>>());
        }
        Command::Alkane { carbons, output } => {
            write_spec(&generate_alkane(carbons).map_err(|e| e.to_string())?, &output)?;
        }
        Command::Star { arm_len, output } => {
            write_spec(&generate_star(arm_len).map_err(|e| e.to_string())?, &output)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
