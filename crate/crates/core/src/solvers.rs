//! QUBO minimizers.
//!
//! Every solver reports energies recomputed with [`QuboProblem::qubo_energy`]
//! and breaks ties toward the lexicographically smallest bitstring.

use std::cmp::Ordering;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoding::{qubo_to_ising, QuboProblem};

pub const DEFAULT_EXACT_CAP: u64 = 10_000_000;
pub const MAX_BRUTE_VARS: usize = 24;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("feasible space has {size} assignments, cap is {cap}")]
    TooLarge { size: u128, cap: u64 },
    #[error("brute force supports at most {max} variables, got {n}")]
    TooManyVariables { n: usize, max: usize },
    #[error("problem carries no one-hot layout")]
    NoLayout,
    #[error("network error: {0}")]
    Network(String),
    #[error("remote solver timed out")]
    Timeout,
    #[error("remote solver returned HTTP status {0}")]
    HttpStatus(u16),
    #[error("malformed remote response: {0}")]
    Malformed(String),
    #[error("sample has {got} bits, problem has {expected} variables")]
    BitsLength { expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverResult {
    pub best_bits: Vec<u8>,
    pub best_energy: f64,
    /// Best one-hot feasible sample, when the problem has a layout and one was seen.
    pub best_feasible: Option<(Vec<u8>, f64)>,
    pub samples_feasible: u64,
    pub samples_total: u64,
    pub wall_time: f64,
}

/// A pluggable QUBO minimizer.
pub trait QuboSolver: Send {
    fn name(&self) -> &'static str;
    fn solve(&mut self, q: &QuboProblem) -> Result<SolverResult, SolverError>;
}

fn order(e1: f64, b1: &[u8], e2: f64, b2: &[u8]) -> Ordering {
    e1.partial_cmp(&e2).unwrap_or(Ordering::Equal).then_with(|| b1.cmp(b2))
}

/// Running minimum under (energy, bits) order, plus feasibility bookkeeping.
struct Best<'q> {
    q: &'q QuboProblem,
    best: Option<(f64, Vec<u8>)>,
    feasible: Option<(f64, Vec<u8>)>,
    n_feasible: u64,
    n_total: u64,
}

impl<'q> Best<'q> {
    fn new(q: &'q QuboProblem) -> Self {
        Best { q, best: None, feasible: None, n_feasible: 0, n_total: 0 }
    }

    fn offer(&mut self, energy: f64, bits: &[u8]) {
        self.n_total += 1;
        let better = |slot: &Option<(f64, Vec<u8>)>| {
            slot.as_ref().map_or(true, |(e, b)| order(energy, bits, *e, b) == Ordering::Less)
        };
        if better(&self.best) {
            self.best = Some((energy, bits.to_vec()));
        }
        if self.q.layout.is_some() && self.q.is_feasible(bits) {
            self.n_feasible += 1;
            if better(&self.feasible) {
                self.feasible = Some((energy, bits.to_vec()));
            }
        }
    }

    fn finish(self, start: Instant) -> SolverResult {
        let (best_energy, best_bits) = self.best.expect("at least one sample offered");
        SolverResult {
            best_bits,
            best_energy,
            best_feasible: self.feasible.map(|(e, b)| (b, e)),
            samples_feasible: self.n_feasible,
            samples_total: self.n_total,
            wall_time: start.elapsed().as_secs_f64(),
        }
    }
}

fn tie_tolerance(q: &QuboProblem) -> f64 {
    let scale = q.offset.abs() + q.linear.iter().chain(q.quadratic.values()).map(|v| v.abs()).sum::<f64>();
    1e-9 * (1.0 + scale)
}

/// Minimum over the one-hot feasible assignments only.
pub fn solve_exact(q: &QuboProblem, cap: u64) -> Result<SolverResult, SolverError> {
    let start = Instant::now();
    let layout = q.layout.as_ref().ok_or(SolverError::NoLayout)?;
    let blocks = layout.blocks();
    let size: u128 = blocks.iter().map(|b| b.levels.len() as u128).product();
    if size > cap as u128 {
        return Err(SolverError::TooLarge { size, cap });
    }
    let dense = q.dense_quadratic();
    let n = q.n;
    let tol = tie_tolerance(q);
    let mut best: Option<(f64, Vec<u8>)> = None;
    let mut count = 0u64;
    let mut choice = vec![0usize; blocks.len()];
    let mut bits = vec![0u8; n];
    // Depth-first odometer with partial sums: partial[k] is the energy of blocks 0..k.
    let mut partial = vec![q.offset; blocks.len() + 1];
    let mut depth = 0usize;
    if blocks.is_empty() {
        let e = q.qubo_energy(&bits).expect("length matches");
        return Ok(SolverResult {
            best_bits: bits.clone(),
            best_energy: e,
            best_feasible: Some((bits, e)),
            samples_feasible: 1,
            samples_total: 1,
            wall_time: start.elapsed().as_secs_f64(),
        });
    }
    loop {
        let b = &blocks[depth];
        let var = b.offset + choice[depth];
        let mut e = partial[depth] + q.linear[var];
        for prev in 0..depth {
            let pv = blocks[prev].offset + choice[prev];
            e += dense[pv * n + var];
        }
        partial[depth + 1] = e;
        if depth + 1 < blocks.len() {
            depth += 1;
            choice[depth] = 0;
            continue;
        }
        count += 1;
        let candidate = match &best {
            None => true,
            Some((be, _)) => e <= be + tol,
        };
        if candidate {
            bits.iter_mut().for_each(|x| *x = 0);
            for (k, blk) in blocks.iter().enumerate() {
                bits[blk.offset + choice[k]] = 1;
            }
            let exact = q.qubo_energy(&bits).expect("length matches");
            if best.as_ref().map_or(true, |(be, bb)| order(exact, &bits, *be, bb) == Ordering::Less) {
                best = Some((exact, bits.clone()));
            }
        }
        // Advance the odometer.
        loop {
            choice[depth] += 1;
            if choice[depth] < blocks[depth].levels.len() {
                break;
            }
            if depth == 0 {
                let (e, b) = best.expect("nonempty feasible space");
                return Ok(SolverResult {
                    best_bits: b.clone(),
                    best_energy: e,
                    best_feasible: Some((b, e)),
                    samples_feasible: count,
                    samples_total: count,
                    wall_time: start.elapsed().as_secs_f64(),
                });
            }
            depth -= 1;
        }
    }
}

fn brute(q: &QuboProblem, feasible_only: bool) -> Result<SolverResult, SolverError> {
    let start = Instant::now();
    let n = q.n;
    if n > MAX_BRUTE_VARS {
        return Err(SolverError::TooManyVariables { n, max: MAX_BRUTE_VARS });
    }
    if feasible_only && q.layout.is_none() {
        return Err(SolverError::NoLayout);
    }
    let dense = q.dense_quadratic();
    let tol = tie_tolerance(q);
    let mut x = vec![0u8; n];
    let mut field = q.linear.clone();
    let mut e = q.offset;
    let mut tracker = Best::new(q);
    let mut best_e = f64::INFINITY;
    let total: u64 = 1u64 << n;
    for step in 0..total {
        if step > 0 {
            let i = step.trailing_zeros() as usize;
            let sign = if x[i] == 0 { 1.0 } else { -1.0 };
            e += sign * field[i];
            x[i] ^= 1;
            for j in 0..n {
                field[j] += sign * dense[i * n + j];
            }
        }
        if e <= best_e + tol && (!feasible_only || q.is_feasible(&x)) {
            let exact = q.qubo_energy(&x).expect("length matches");
            tracker.offer(exact, &x);
            best_e = best_e.min(exact);
        }
    }
    let mut r = tracker.finish(start);
    r.samples_total = total;
    Ok(r)
}

/// Exhaustive minimum over all `2^n` bitstrings (`n <= 24`).
pub fn solve_brute(q: &QuboProblem) -> Result<SolverResult, SolverError> {
    brute(q, false)
}

/// Exhaustive minimum over the one-hot feasible bitstrings, enumerated through all `2^n`.
pub fn solve_brute_feasible(q: &QuboProblem) -> Result<SolverResult, SolverError> {
    brute(q, true)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaConfig {
    pub reads: usize,
    pub sweeps: usize,
    /// Inverse temperatures in units of `1 / max|coefficient|` of the Ising image.
    pub beta_start: f64,
    pub beta_end: f64,
    pub seed: u64,
}

impl Default for SaConfig {
    fn default() -> Self {
        SaConfig { reads: 5000, sweeps: 100, beta_start: 0.1, beta_end: 10.0, seed: 0 }
    }
}

/// Geometric schedule of `sweeps` inverse temperatures.
pub fn geometric_betas(start: f64, end: f64, sweeps: usize) -> Vec<f64> {
    match sweeps {
        0 => Vec::new(),
        1 => vec![end],
        _ => (0..sweeps).map(|k| start * (end / start).powf(k as f64 / (sweeps - 1) as f64)).collect(),
    }
}

/// Independent single-spin-flip Metropolis anneals on the Ising image.
/// Read `r` uses ChaCha stream `r` of the configured seed.
pub fn solve_sa(q: &QuboProblem, cfg: &SaConfig) -> SolverResult {
    let start = Instant::now();
    let ising = qubo_to_ising(q);
    let n = ising.n();
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (&(a, b), &v) in &ising.j {
        adj[a].push((b, v));
        adj[b].push((a, v));
    }
    let scale = ising.h.iter().chain(ising.j.values()).fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = if scale > 0.0 { scale } else { 1.0 };
    let betas = geometric_betas(cfg.beta_start / scale, cfg.beta_end / scale, cfg.sweeps);
    let reads = cfg.reads.max(1);
    let samples: Vec<(f64, Vec<u8>)> = (0..reads)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(r as u64);
            let mut spins: Vec<i8> = (0..n).map(|_| if rng.gen::<bool>() { 1 } else { -1 }).collect();
            let mut field: Vec<f64> = ising.h.clone();
            for i in 0..n {
                for &(j, v) in &adj[i] {
                    field[i] += v * f64::from(spins[j]);
                }
            }
            for &beta in &betas {
                for i in 0..n {
                    let delta = -2.0 * f64::from(spins[i]) * field[i];
                    if delta <= 0.0 || rng.gen::<f64>() < (-beta * delta).exp() {
                        spins[i] = -spins[i];
                        let s = 2.0 * f64::from(spins[i]);
                        for &(j, v) in &adj[i] {
                            field[j] += v * s;
                        }
                    }
                }
            }
            let bits: Vec<u8> = spins.iter().map(|&s| u8::from(s > 0)).collect();
            (q.qubo_energy(&bits).expect("length matches"), bits)
        })
        .collect();
    let mut tracker = Best::new(q);
    for (e, b) in &samples {
        tracker.offer(*e, b);
    }
    tracker.finish(start)
}

#[derive(Debug, Deserialize)]
struct RemoteSample {
    bits: Vec<serde_json::Value>,
    #[allow(dead_code)]
    energy: Option<f64>,
}

#[derive(Debug, Deserialize)]
struct RemoteResponse {
    samples: Vec<RemoteSample>,
}

/// POSTs the QUBO document to `endpoint` and re-scores the returned samples
/// locally; the server's reported energies are ignored.
pub fn solve_remote(q: &QuboProblem, endpoint: &str, timeout: Duration) -> Result<SolverResult, SolverError> {
    let start = Instant::now();
    let agent: ureq::Agent =
        ureq::Agent::config_builder().timeout_global(Some(timeout)).http_status_as_error(false).build().into();
    let map_err = |e: ureq::Error| match e {
        ureq::Error::Timeout(_) => SolverError::Timeout,
        ureq::Error::Io(io) if io.kind() == std::io::ErrorKind::TimedOut => SolverError::Timeout,
        other => SolverError::Network(other.to_string()),
    };
    let mut resp = agent.post(endpoint).send_json(q.to_document()).map_err(map_err)?;
    let status = resp.status().as_u16();
    if !(200..300).contains(&status) {
        return Err(SolverError::HttpStatus(status));
    }
    let body = resp.body_mut().read_to_string().map_err(map_err)?;
    let parsed: RemoteResponse = serde_json::from_str(&body).map_err(|e| SolverError::Malformed(e.to_string()))?;
    if parsed.samples.is_empty() {
        return Err(SolverError::Malformed("no samples".into()));
    }
    let mut tracker = Best::new(q);
    for s in &parsed.samples {
        if s.bits.len() != q.n {
            return Err(SolverError::BitsLength { expected: q.n, got: s.bits.len() });
        }
        let bits = s
            .bits
            .iter()
            .map(|v| match v.as_u64() {
                Some(0) => Ok(0u8),
                Some(1) => Ok(1u8),
                _ => Err(SolverError::Malformed(format!("bit value {v}"))),
            })
            .collect::<Result<Vec<u8>, _>>()?;
        tracker.offer(q.qubo_energy(&bits).expect("length checked"), &bits);
    }
    Ok(tracker.finish(start))
}

pub struct ExactSolver {
    pub cap: u64,
}

impl Default for ExactSolver {
    fn default() -> Self {
        ExactSolver { cap: DEFAULT_EXACT_CAP }
    }
}

impl QuboSolver for ExactSolver {
    fn name(&self) -> &'static str {
        "exact"
    }

    fn solve(&mut self, q: &QuboProblem) -> Result<SolverResult, SolverError> {
        solve_exact(q, self.cap)
    }
}

/// Anneals with a fresh seed per call, derived from the base seed and call count.
pub struct SaSolver {
    pub cfg: SaConfig,
    calls: u64,
}

impl SaSolver {
    pub fn new(cfg: SaConfig) -> Self {
        SaSolver { cfg, calls: 0 }
    }
}

impl QuboSolver for SaSolver {
    fn name(&self) -> &'static str {
        "sa"
    }

    fn solve(&mut self, q: &QuboProblem) -> Result<SolverResult, SolverError> {
        let mut cfg = self.cfg;
        cfg.seed = self.cfg.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(self.calls);
        self.calls += 1;
        Ok(solve_sa(q, &cfg))
    }
}

pub struct RemoteSolver {
    pub endpoint: String,
    pub timeout: Duration,
}

impl QuboSolver for RemoteSolver {
    fn name(&self) -> &'static str {
        "remote"
    }

    fn solve(&mut self, q: &QuboProblem) -> Result<SolverResult, SolverError> {
        solve_remote(q, &self.endpoint, self.timeout)
    }
}

/// Serializable solver selection, instantiated once per run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SolverKind {
    Exact { cap: u64 },
    Sa(SaConfig),
    Remote { endpoint: String, timeout_secs: f64 },
}

impl SolverKind {
    pub fn exact() -> Self {
        SolverKind::Exact { cap: DEFAULT_EXACT_CAP }
    }

    pub fn label(&self) -> &'static str {
        match self {
            SolverKind::Exact { .. } => "exact",
            SolverKind::Sa(_) => "sa",
            SolverKind::Remote { .. } => "remote",
        }
    }

    /// A solver for one run; SA seeds are offset by the run seed.
    pub fn instantiate(&self, run_seed: u64) -> Box<dyn QuboSolver> {
        match self {
            SolverKind::Exact { cap } => Box::new(ExactSolver { cap: *cap }),
            SolverKind::Sa(cfg) => {
                let mut cfg = *cfg;
                cfg.seed = cfg.seed.wrapping_add(run_seed);
                Box::new(SaSolver::new(cfg))
            }
            SolverKind::Remote { endpoint, timeout_secs } => {
                Box::new(RemoteSolver { endpoint: endpoint.clone(), timeout: Duration::from_secs_f64(*timeout_secs) })
            }
        }
    }
}
