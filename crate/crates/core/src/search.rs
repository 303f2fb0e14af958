//! Search drivers: variable neighbourhood descent, single-torsion local
//! search, their hybrid, and parallel tempering Monte Carlo.

use std::sync::Arc;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoding::{
    build_neighbourhood_qubo, decode_bits, Discretization, EncodingError, NeighbourhoodQubo, OneHotLayout, Penalty,
};
use crate::energy::{EnergyError, EnergyModel, EvalCounter};
use crate::molmodel::{TorsionVector, Vec3};
use crate::neighbourhoods::{allocate_levels, neighbourhood_change, NeighbourhoodError, TorsionSubset};
use crate::solvers::{QuboSolver, SolverKind, SolverResult};

#[derive(Debug, Error, PartialEq)]
pub enum SearchError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Neighbourhood(#[from] NeighbourhoodError),
    #[error(transparent)]
    Encoding(#[from] EncodingError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Discretization level count.
    pub d: usize,
    /// Variable budget per neighbourhood QUBO.
    pub s: usize,
    pub max_iters: usize,
    /// Consecutive non-improving iterations before stopping.
    pub max_no_improve: usize,
    pub penalty: Penalty,
    pub solver: SolverKind,
    pub seed: u64,
    /// Stop as soon as the current energy is at or below this value.
    pub target_energy: Option<f64>,
    pub reference_energy: Option<f64>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            d: 16,
            s: 63,
            max_iters: 200,
            max_no_improve: 10,
            penalty: Penalty::Auto,
            solver: SolverKind::exact(),
            seed: 0,
            target_energy: None,
            reference_energy: None,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), SearchError> {
        if self.d < 2 {
            return Err(SearchError::Config(format!("d must be at least 2, got {}", self.d)));
        }
        if self.s < 2 {
            return Err(SearchError::Config(format!("s must be at least 2, got {}", self.s)));
        }
        if self.max_iters < 1 || self.max_no_improve < 1 {
            return Err(SearchError::Config("max_iters and max_no_improve must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    IterBudget,
    NoImprove,
    TargetReached,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub best_t: TorsionVector,
    pub best_energy: f64,
    /// (iteration, current energy after that iteration); entry 0 is the start.
    pub trajectory: Vec<(usize, f64)>,
    pub energy_evals: u64,
    /// Evaluations spent up to the moment the best conformation was first reached.
    pub evals_to_best: u64,
    pub wall_time: f64,
    /// Seconds from run start until the best conformation was first reached.
    pub time_to_best: f64,
    pub iterations: usize,
    pub terminated_by: Termination,
}

/// What one VND iteration did, for auditing.
#[derive(Debug)]
pub struct VndStep<'a> {
    pub iteration: usize,
    pub current_before: &'a TorsionVector,
    pub energy_before: f64,
    pub subset: &'a TorsionSubset,
    pub layout: &'a OneHotLayout,
    pub qubo: &'a NeighbourhoodQubo,
    pub solver_result: Option<&'a SolverResult>,
    /// Energy evaluations spent building this iteration's QUBO.
    pub build_evals: u64,
    pub accepted: bool,
    pub current_after: &'a TorsionVector,
}

/// Improvements smaller than this are treated as ties and rejected.
fn tie_tolerance(e: f64) -> f64 {
    1e-9 * (1.0 + e.abs())
}

fn random_vector<R: Rng + ?Sized>(m: usize, theta: &Discretization, rng: &mut R) -> TorsionVector {
    TorsionVector((0..m).map(|_| theta.values()[rng.gen_range(0..theta.d())]).collect())
}

fn check_init(t: &TorsionVector, m: usize, theta: &Discretization) -> Result<(), SearchError> {
    if t.len() != m {
        return Err(SearchError::Config(format!("initial vector has {} torsions, molecule has {m}", t.len())));
    }
    if let Some(&a) = t.as_slice().iter().find(|&&a| theta.index_of(a).is_none()) {
        return Err(SearchError::Config(format!("initial angle {a} is not a discretization level")));
    }
    Ok(())
}

struct Clock {
    start: Instant,
    best_at: f64,
    evals_at_best: u64,
}

impl Clock {
    fn new() -> Self {
        Clock { start: Instant::now(), best_at: 0.0, evals_at_best: 0 }
    }

    fn mark(&mut self, evals: u64) {
        self.best_at = self.start.elapsed().as_secs_f64();
        self.evals_at_best = evals;
    }

    fn elapsed(&self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }
}

/// Variable neighbourhood descent over two-torsion-dependent neighbourhoods.
pub fn vnd<R: Rng + ?Sized>(
    model: &EnergyModel,
    cfg: &SearchConfig,
    solver: &mut dyn QuboSolver,
    rng: &mut R,
    t_init: Option<TorsionVector>,
) -> Result<RunResult, SearchError> {
    vnd_observed(model, cfg, solver, rng, t_init, &mut |_| {})
}

/// [`vnd`] with a callback invoked after every iteration.
pub fn vnd_observed<R: Rng + ?Sized>(
    model: &EnergyModel,
    cfg: &SearchConfig,
    solver: &mut dyn QuboSolver,
    rng: &mut R,
    t_init: Option<TorsionVector>,
    observer: &mut dyn FnMut(&VndStep<'_>),
) -> Result<RunResult, SearchError> {
    cfg.validate()?;
    let clock = &mut Clock::new();
    let theta = Discretization::uniform(cfg.d)?;
    let graph = model.molecule().graph();
    let m = graph.n_torsions();
    let mut counter = EvalCounter::new();
    let mut current = match t_init {
        Some(t) => {
            check_init(&t, m, &theta)?;
            t
        }
        None => random_vector(m, &theta, rng),
    };
    let mut energy = model.total_energy(&current, &mut counter)?;
    clock.mark(counter.get());
    let mut trajectory = vec![(0, energy)];
    let reached = |e: f64| cfg.target_energy.is_some_and(|t| e <= t);
    let mut terminated_by = Termination::NoImprove;
    let (mut iter, mut no_improve) = (0usize, 0usize);
    if m > 0 && !reached(energy) {
        terminated_by = Termination::IterBudget;
        while iter < cfg.max_iters && no_improve < cfg.max_no_improve {
            iter += 1;
            let subset = neighbourhood_change(graph, rng);
            let layout = Arc::new(allocate_levels(&subset, cfg.s, &theta, &current, rng)?);
            let before = counter.get();
            let nq = build_neighbourhood_qubo(model, &current, &subset, &layout, cfg.penalty, &mut counter)?;
            let build_evals = counter.get() - before;
            let solved = solver.solve(&nq.qubo).ok();
            let candidate = solved.as_ref().and_then(|r| {
                if nq.qubo.is_feasible(&r.best_bits) {
                    Some((r.best_bits.clone(), r.best_energy))
                } else {
                    r.best_feasible.clone()
                }
            });
            let current_bits = layout.bits_for(&current).expect("layout holds the current levels");
            let current_q = nq.qubo.qubo_energy(&current_bits)?;
            let before_t = current.clone();
            let before_e = energy;
            let mut accepted = false;
            if let Some((bits, e)) = candidate {
                if e < current_q - tie_tolerance(current_q) {
                    current = decode_bits(&bits, &layout, &current)?;
                    energy = e;
                    accepted = true;
                }
            }
            if accepted {
                no_improve = 0;
                clock.mark(counter.get());
            } else {
                no_improve += 1;
            }
            trajectory.push((iter, energy));
            observer(&VndStep {
                iteration: iter,
                current_before: &before_t,
                energy_before: before_e,
                subset: &subset,
                layout: &layout,
                qubo: &nq,
                solver_result: solved.as_ref(),
                build_evals,
                accepted,
                current_after: &current,
            });
            if reached(energy) {
                terminated_by = Termination::TargetReached;
                break;
            }
        }
        if terminated_by != Termination::TargetReached && no_improve >= cfg.max_no_improve {
            terminated_by = Termination::NoImprove;
        }
    } else if reached(energy) {
        terminated_by = Termination::TargetReached;
    }
    // Re-score the final conformation with a full evaluation.
    let best_energy = if m > 0 { model.total_energy(&current, &mut counter)? } else { energy };
    Ok(RunResult {
        best_t: current,
        best_energy,
        trajectory,
        energy_evals: counter.get(),
        evals_to_best: clock.evals_at_best,
        wall_time: clock.elapsed(),
        time_to_best: clock.best_at,
        iterations: iter,
        terminated_by,
    })
}

/// Single-torsion descent: each pass visits the torsions in a fresh random
/// order and moves each to its best strictly improving level.
pub fn local_search<R: Rng + ?Sized>(
    model: &EnergyModel,
    cfg: &SearchConfig,
    rng: &mut R,
    t_init: Option<TorsionVector>,
) -> Result<RunResult, SearchError> {
    cfg.validate()?;
    let clock = &mut Clock::new();
    let theta = Discretization::uniform(cfg.d)?;
    let m = model.molecule().n_torsions();
    let mut counter = EvalCounter::new();
    let mut current = match t_init {
        Some(t) => {
            check_init(&t, m, &theta)?;
            t
        }
        None => random_vector(m, &theta, rng),
    };
    let mut buf: Vec<Vec3> = Vec::with_capacity(model.molecule().n_atoms());
    let mut energy = model.total_energy_into(current.as_slice(), &mut buf, &mut counter)?;
    clock.mark(counter.get());
    let mut trajectory = vec![(0, energy)];
    let reached = |e: f64| cfg.target_energy.is_some_and(|t| e <= t);
    let mut terminated_by = if reached(energy) { Termination::TargetReached } else { Termination::IterBudget };
    let mut passes = 0;
    let mut order: Vec<usize> = (0..m).collect();
    let mut trial = current.as_slice().to_vec();
    'passes: while terminated_by == Termination::IterBudget && passes < cfg.max_iters {
        if m == 0 {
            terminated_by = Termination::NoImprove;
            break;
        }
        passes += 1;
        order.shuffle(rng);
        let mut improved = false;
        for &i in &order {
            let here = current.as_slice()[i];
            let mut best: Option<(f64, f64)> = None;
            for &level in theta.values() {
                if theta.index_of(here) == theta.index_of(level) {
                    continue;
                }
                trial[i] = level;
                let e = model.total_energy_into(&trial, &mut buf, &mut counter)?;
                if best.map_or(true, |(be, _)| e < be) {
                    best = Some((e, level));
                }
            }
            match best {
                Some((e, level)) if e < energy - tie_tolerance(energy) => {
                    trial[i] = level;
                    current.0[i] = level;
                    energy = e;
                    improved = true;
                    clock.mark(counter.get());
                    if reached(energy) {
                        trajectory.push((passes, energy));
                        terminated_by = Termination::TargetReached;
                        break 'passes;
                    }
                }
                _ => trial[i] = here,
            }
        }
        trajectory.push((passes, energy));
        if !improved {
            terminated_by = Termination::NoImprove;
        }
    }
    Ok(RunResult {
        best_t: current,
        best_energy: energy,
        trajectory,
        energy_evals: counter.get(),
        evals_to_best: clock.evals_at_best,
        wall_time: clock.elapsed(),
        time_to_best: clock.best_at,
        iterations: passes,
        terminated_by,
    })
}

/// Local search from a random start, then VND seeded with its result.
pub fn ls_vnd<R: Rng + ?Sized>(
    model: &EnergyModel,
    cfg: &SearchConfig,
    solver: &mut dyn QuboSolver,
    rng: &mut R,
) -> Result<RunResult, SearchError> {
    let ls = local_search(model, cfg, rng, None)?;
    if ls.terminated_by == Termination::TargetReached {
        return Ok(ls);
    }
    let v = vnd(model, cfg, solver, rng, Some(ls.best_t.clone()))?;
    let offset = ls.iterations;
    let mut trajectory = ls.trajectory.clone();
    trajectory.extend(v.trajectory.iter().skip(1).map(|&(i, e)| (i + offset, e)));
    let improved = v.best_energy < ls.best_energy - tie_tolerance(ls.best_energy);
    let (time_to_best, evals_to_best) = if improved {
        (ls.wall_time + v.time_to_best, ls.energy_evals + v.evals_to_best)
    } else {
        (ls.time_to_best, ls.evals_to_best)
    };
    let (best_t, best_energy) =
        if improved || v.best_t == ls.best_t { (v.best_t, v.best_energy) } else { (ls.best_t, ls.best_energy) };
    Ok(RunResult {
        best_t,
        best_energy,
        trajectory,
        energy_evals: ls.energy_evals + v.energy_evals,
        evals_to_best,
        wall_time: ls.wall_time + v.wall_time,
        time_to_best,
        iterations: ls.iterations + v.iterations,
        terminated_by: v.terminated_by,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PtmcConfig {
    pub replicas: usize,
    pub sweeps: usize,
    /// Coldest and hottest temperatures, kcal/mol.
    pub t_min: f64,
    pub t_max: f64,
    /// Sweeps between replica-exchange rounds.
    pub exchange_interval: usize,
    pub d: usize,
    pub seed: u64,
    pub target_energy: Option<f64>,
}

impl Default for PtmcConfig {
    fn default() -> Self {
        PtmcConfig {
            replicas: 10,
            sweeps: 2000,
            t_min: 0.5,
            t_max: 100.0,
            exchange_interval: 1,
            d: 16,
            seed: 0,
            target_energy: None,
        }
    }
}

impl PtmcConfig {
    pub fn validate(&self) -> Result<(), SearchError> {
        if self.replicas < 2 {
            return Err(SearchError::Config("ptmc needs at least 2 replicas".into()));
        }
        if !(self.t_min > 0.0 && self.t_min < self.t_max) {
            return Err(SearchError::Config("ptmc needs 0 < t_min < t_max".into()));
        }
        if self.exchange_interval == 0 {
            return Err(SearchError::Config("exchange interval must be at least 1".into()));
        }
        Ok(())
    }

    /// Geometric temperature ladder from `t_min` to `t_max`.
    pub fn temperatures(&self) -> Vec<f64> {
        let r = self.replicas;
        (0..r).map(|k| self.t_min * (self.t_max / self.t_min).powf(k as f64 / (r - 1) as f64)).collect()
    }
}

/// Metropolis acceptance probability for an energy change at temperature `t`.
pub fn metropolis_probability(delta: f64, t: f64) -> f64 {
    if delta <= 0.0 {
        1.0
    } else {
        (-delta / t).exp()
    }
}

/// Swap probability for replicas at temperatures `ti`, `tj` with energies `ei`, `ej`.
pub fn exchange_probability(ti: f64, tj: f64, ei: f64, ej: f64) -> f64 {
    ((1.0 / ti - 1.0 / tj) * (ei - ej)).exp().min(1.0)
}

/// Replica ladder state, exposed so sampling statistics can be inspected.
pub struct PtmcState<'m> {
    model: &'m EnergyModel,
    theta: Discretization,
    temps: Vec<f64>,
    /// Level indices per replica, ordered by temperature slot.
    levels: Vec<Vec<usize>>,
    energies: Vec<f64>,
    counter: EvalCounter,
    buf: Vec<Vec3>,
    trial: Vec<f64>,
    pub best: (TorsionVector, f64),
    pub proposals: u64,
    pub accepted: u64,
    pub swaps_attempted: u64,
    pub swaps_accepted: u64,
}

impl<'m> PtmcState<'m> {
    pub fn new<R: Rng + ?Sized>(
        model: &'m EnergyModel,
        cfg: &PtmcConfig,
        t_init: Option<&TorsionVector>,
        rng: &mut R,
    ) -> Result<Self, SearchError> {
        cfg.validate()?;
        let theta = Discretization::uniform(cfg.d)?;
        let m = model.molecule().n_torsions();
        let temps = cfg.temperatures();
        let mut counter = EvalCounter::new();
        let mut buf = Vec::with_capacity(model.molecule().n_atoms());
        let mut levels = Vec::with_capacity(temps.len());
        let mut energies = Vec::with_capacity(temps.len());
        if let Some(t) = t_init {
            check_init(t, m, &theta)?;
        }
        for _ in 0..temps.len() {
            let lv: Vec<usize> = match t_init {
                Some(t) => t.as_slice().iter().map(|&a| theta.index_of(a).expect("checked")).collect(),
                None => (0..m).map(|_| rng.gen_range(0..theta.d())).collect(),
            };
            let angles: Vec<f64> = lv.iter().map(|&k| theta.values()[k]).collect();
            energies.push(model.total_energy_into(&angles, &mut buf, &mut counter)?);
            levels.push(lv);
        }
        let (bi, &be) = energies.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).expect("at least two replicas");
        let best_t = TorsionVector(levels[bi].iter().map(|&k| theta.values()[k]).collect());
        Ok(PtmcState {
            model,
            theta,
            temps,
            levels,
            energies,
            counter,
            buf,
            trial: vec![0.0; m],
            best: (best_t, be),
            proposals: 0,
            accepted: 0,
            swaps_attempted: 0,
            swaps_accepted: 0,
        })
    }

    pub fn temperatures(&self) -> &[f64] {
        &self.temps
    }

    /// Level indices of the replica currently at temperature slot `slot`.
    pub fn levels(&self, slot: usize) -> &[usize] {
        &self.levels[slot]
    }

    pub fn energy(&self, slot: usize) -> f64 {
        self.energies[slot]
    }

    pub fn evals(&self) -> u64 {
        self.counter.get()
    }

    /// One proposal per torsion per replica. Returns true if the best energy improved.
    pub fn sweep<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<bool, SearchError> {
        let m = self.trial.len();
        let d = self.theta.d();
        let mut improved = false;
        for slot in 0..self.temps.len() {
            for i in 0..m {
                let proposal = rng.gen_range(0..d);
                self.proposals += 1;
                if proposal == self.levels[slot][i] {
                    self.accepted += 1;
                    continue;
                }
                for (x, &k) in self.trial.iter_mut().zip(&self.levels[slot]) {
                    *x = self.theta.values()[k];
                }
                self.trial[i] = self.theta.values()[proposal];
                let e = self.model.total_energy_into(&self.trial, &mut self.buf, &mut self.counter)?;
                let delta = e - self.energies[slot];
                let p = metropolis_probability(delta, self.temps[slot]);
                if p >= 1.0 || rng.gen::<f64>() < p {
                    self.levels[slot][i] = proposal;
                    self.energies[slot] = e;
                    self.accepted += 1;
                    if e < self.best.1 {
                        self.best = (TorsionVector(self.trial.clone()), e);
                        improved = true;
                    }
                }
            }
        }
        Ok(improved)
    }

    /// Attempts swaps between every adjacent pair of temperature slots.
    pub fn exchange<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        for k in 0..self.temps.len() - 1 {
            self.swaps_attempted += 1;
            let p = exchange_probability(self.temps[k], self.temps[k + 1], self.energies[k], self.energies[k + 1]);
            if p >= 1.0 || rng.gen::<f64>() < p {
                self.levels.swap(k, k + 1);
                self.energies.swap(k, k + 1);
                self.swaps_accepted += 1;
            }
        }
    }
}

/// Parallel tempering over the discretized torsion grid.
pub fn ptmc<R: Rng + ?Sized>(
    model: &EnergyModel,
    cfg: &PtmcConfig,
    rng: &mut R,
    t_init: Option<TorsionVector>,
) -> Result<RunResult, SearchError> {
    let clock = &mut Clock::new();
    let mut state = PtmcState::new(model, cfg, t_init.as_ref(), rng)?;
    clock.mark(state.evals());
    let mut trajectory = vec![(0, state.best.1)];
    let reached = |e: f64| cfg.target_energy.is_some_and(|t| e <= t);
    let mut terminated_by = Termination::IterBudget;
    let mut sweeps = 0;
    if reached(state.best.1) {
        terminated_by = Termination::TargetReached;
    }
    while terminated_by == Termination::IterBudget && sweeps < cfg.sweeps && model.molecule().n_torsions() > 0 {
        sweeps += 1;
        if state.sweep(rng)? {
            clock.mark(state.evals());
            trajectory.push((sweeps, state.best.1));
            if reached(state.best.1) {
                terminated_by = Termination::TargetReached;
            }
        }
        if sweeps % cfg.exchange_interval == 0 {
            state.exchange(rng);
        }
    }
    Ok(RunResult {
        best_t: state.best.0.clone(),
        best_energy: state.best.1,
        trajectory,
        energy_evals: state.evals(),
        evals_to_best: clock.evals_at_best,
        wall_time: clock.elapsed(),
        time_to_best: clock.best_at,
        iterations: sweeps,
        terminated_by,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metropolis_limits() {
        assert_eq!(metropolis_probability(-5.0, 1.0), 1.0);
        assert_eq!(metropolis_probability(0.0, 1e-3), 1.0);
        assert!(metropolis_probability(1e3, 1e9) >= 0.999);
        assert!((exchange_probability(1.0, 2.0, 0.0, 0.0) - 1.0).abs() < 1e-15);
        assert!(exchange_probability(1.0, 2.0, -10.0, 0.0) < 1e-2);
    }

    #[test]
    fn ladder_is_geometric() {
        let cfg = PtmcConfig { replicas: 3, t_min: 1.0, t_max: 100.0, ..PtmcConfig::default() };
        let t = cfg.temperatures();
        assert!((t[1] - 10.0).abs() < 1e-12);
        assert_eq!(t[2], 100.0);
        assert!(PtmcConfig { replicas: 1, ..PtmcConfig::default() }.validate().is_err());
        assert!(PtmcConfig { t_min: 5.0, t_max: 1.0, ..PtmcConfig::default() }.validate().is_err());
    }

    #[test]
    fn config_validation() {
        assert!(SearchConfig { s: 1, ..SearchConfig::default() }.validate().is_err());
        assert!(SearchConfig { max_no_improve: 0, ..SearchConfig::default() }.validate().is_err());
        assert!(SearchConfig::default().validate().is_ok());
    }
}
