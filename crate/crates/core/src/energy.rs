//! Lennard-Jones 6-12 energy with the rigid-body pair decomposition.
//!
//! Every counted evaluation goes through an [`EvalCounter`] that callers must
//! pass in; there is no uncounted entry point for torsion-dependent energies.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::molmodel::{MolError, Molecule, TorsionVector, Vec3};
use crate::uff::{mix, UffTable};

/// Energy assigned to coincident atoms when no lower pair cap applies.
pub const CLASH_ENERGY: f64 = 1e12;
/// Default ceiling on a single pair energy. Every pair this high is a hard
/// clash (H-H under about 1 A); capping keeps QUBO coefficient ranges small
/// enough for double-precision one-hot penalties.
pub const DEFAULT_PAIR_CAP: f64 = 1e4;
/// Distances below this are treated as coincident atoms.
pub const MIN_DISTANCE: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum EnergyError {
    #[error("lj_pair: distance must be positive, got {0}")]
    Singular(f64),
    #[error(transparent)]
    Molecule(#[from] MolError),
    #[error("torsion {0} on the body path is not assigned")]
    IncompletePath(usize),
    #[error("uff type {0:?} missing from parameter table")]
    MissingParams(String),
}

/// Counts energy evaluations for reporting. Monotone within a run.
#[derive(Debug, Default, Clone, PartialEq, Eq, Serialize)]
pub struct EvalCounter {
    count: u64,
}

impl EvalCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self) -> u64 {
        self.count
    }

    fn bump(&mut self) {
        self.count += 1;
    }

    /// Folds another counter's total into this one.
    pub fn absorb(&mut self, other: &EvalCounter) {
        self.count += other.count;
    }
}

/// `epsilon * ((sigma/r)^12 - 2 (sigma/r)^6)`; minimum `-epsilon` at `r = sigma`.
pub fn lj_pair(epsilon: f64, sigma: f64, r: f64) -> Result<f64, EnergyError> {
    if !(r > 0.0) {
        return Err(EnergyError::Singular(r));
    }
    let s6 = (sigma / r).powi(6);
    Ok(epsilon * (s6 * s6 - 2.0 * s6))
}

#[inline]
fn clamped_pair(epsilon: f64, sigma: f64, r: f64, cap: f64) -> f64 {
    if r < MIN_DISTANCE {
        return CLASH_ENERGY.min(cap);
    }
    let s6 = (sigma / r).powi(6);
    (epsilon * (s6 * s6 - 2.0 * s6)).min(cap)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyOptions {
    /// Multiplier for pairs three bonds apart.
    pub scale_14: f64,
    /// Ceiling on any single pair energy at nonzero distance.
    pub pair_cap: f64,
}

impl Default for EnergyOptions {
    fn default() -> Self {
        EnergyOptions { scale_14: 1.0, pair_cap: DEFAULT_PAIR_CAP }
    }
}

/// One eligible atom pair with mixed parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairTerm {
    pub i: usize,
    pub j: usize,
    /// Mixed well depth, already multiplied by any 1-4 scale.
    pub epsilon: f64,
    pub sigma: f64,
    /// Bodies of `i` and `j`, ordered low to high.
    pub bodies: (usize, usize),
}

impl PairTerm {
    #[inline]
    fn energy(&self, pos: &[Vec3], cap: f64) -> f64 {
        clamped_pair(self.epsilon, self.sigma, (pos[self.i] - pos[self.j]).norm(), cap)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyBreakdown {
    /// Sum over pairs inside rigid bodies.
    pub constant: f64,
    /// Cross-body sums keyed by (low body, high body).
    pub pair_terms: BTreeMap<(usize, usize), f64>,
}

impl EnergyBreakdown {
    pub fn total(&self) -> f64 {
        self.constant + self.pair_terms.values().sum::<f64>()
    }
}

/// Memo of body-pair energies keyed by bodies and the path angles (1e-6 degree grid).
#[derive(Debug, Default, Clone)]
pub struct PairEnergyCache {
    map: HashMap<(usize, usize, Vec<i64>), f64>,
}

impl PairEnergyCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn clear(&mut self) {
        self.map.clear();
    }
}

pub fn quantize_angle(deg: f64) -> i64 {
    (deg * 1e6).round() as i64
}

/// Energy model bound to one molecule.
#[derive(Debug, Clone)]
pub struct EnergyModel {
    mol: Arc<Molecule>,
    /// All eligible pairs in atom order.
    pairs: Vec<PairTerm>,
    /// Cross-body pair indices grouped by body pair.
    groups: BTreeMap<(usize, usize), Vec<usize>>,
    constant: f64,
    opts: EnergyOptions,
}

impl EnergyModel {
    pub fn new(mol: Arc<Molecule>, opts: EnergyOptions) -> Result<Self, EnergyError> {
        Self::with_table(mol, opts, UffTable::bundled())
    }

    pub fn with_table(mol: Arc<Molecule>, opts: EnergyOptions, table: &UffTable) -> Result<Self, EnergyError> {
        let spec = mol.spec();
        let n = spec.n_atoms();
        let params = spec
            .atoms()
            .iter()
            .map(|a| table.get(&a.uff_type).ok_or_else(|| EnergyError::MissingParams(a.uff_type.clone())))
            .collect::<Result<Vec<_>, _>>()?;
        let adj = spec.neighbours();
        let body_of = mol.graph().body_of_atom();
        let mut pairs = Vec::new();
        let mut hops = vec![usize::MAX; n];
        for i in 0..n {
            // Bond separation from i, only needed up to three bonds.
            hops.iter_mut().for_each(|h| *h = usize::MAX);
            hops[i] = 0;
            let mut queue = VecDeque::from([i]);
            while let Some(u) = queue.pop_front() {
                if hops[u] == 3 {
                    continue;
                }
                for &v in &adj[u] {
                    if hops[v] == usize::MAX {
                        hops[v] = hops[u] + 1;
                        queue.push_back(v);
                    }
                }
            }
            for j in i + 1..n {
                let scale = match hops[j] {
                    1 | 2 => continue,
                    3 => opts.scale_14,
                    _ => 1.0,
                };
                if scale == 0.0 {
                    continue;
                }
                let m = mix(params[i], params[j]);
                let (bi, bj) = (body_of[i], body_of[j]);
                pairs.push(PairTerm {
                    i,
                    j,
                    epsilon: m.epsilon * scale,
                    sigma: m.sigma,
                    bodies: (bi.min(bj), bi.max(bj)),
                });
            }
        }
        let mut groups: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
        let input = mol.input_positions();
        let mut constant = 0.0;
        for (k, p) in pairs.iter().enumerate() {
            if p.bodies.0 == p.bodies.1 {
                constant += p.energy(input, opts.pair_cap);
            } else {
                groups.entry(p.bodies).or_default().push(k);
            }
        }
        Ok(EnergyModel { mol, pairs, groups, constant, opts })
    }

    pub fn molecule(&self) -> &Arc<Molecule> {
        &self.mol
    }

    pub fn options(&self) -> EnergyOptions {
        self.opts
    }

    pub fn pairs(&self) -> &[PairTerm] {
        &self.pairs
    }

    /// Body pairs that have at least one eligible cross pair.
    pub fn body_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.groups.keys().copied()
    }

    /// Sum of intra-body interactions; torsion invariant, computed once at construction.
    pub fn constant_energy(&self) -> f64 {
        self.constant
    }

    /// Full-molecule energy over every eligible pair at the realized geometry.
    pub fn total_energy(&self, t: &TorsionVector, counter: &mut EvalCounter) -> Result<f64, EnergyError> {
        let mut pos = Vec::with_capacity(self.mol.n_atoms());
        self.total_energy_into(t.as_slice(), &mut pos, counter)
    }

    /// As [`total_energy`](Self::total_energy) with a caller-provided coordinate buffer.
    pub fn total_energy_into(
        &self,
        angles: &[f64],
        pos: &mut Vec<Vec3>,
        counter: &mut EvalCounter,
    ) -> Result<f64, EnergyError> {
        self.mol.apply_into(angles, pos)?;
        counter.bump();
        Ok(self.pairs.iter().map(|p| p.energy(pos, self.opts.pair_cap)).sum())
    }

    /// Constant part plus every cross-body sum; one counted evaluation.
    pub fn breakdown(&self, t: &TorsionVector, counter: &mut EvalCounter) -> Result<EnergyBreakdown, EnergyError> {
        let conf = self.mol.apply_torsions(t)?;
        counter.bump();
        let pair_terms = self
            .groups
            .iter()
            .map(|(&key, idx)| {
                (key, idx.iter().map(|&k| self.pairs[k].energy(&conf.positions, self.opts.pair_cap)).sum())
            })
            .collect();
        Ok(EnergyBreakdown { constant: self.constant, pair_terms })
    }

    /// Interaction between bodies `a` and `b` given angles for the torsions on
    /// their connecting path. Other torsions do not affect the value.
    pub fn body_pair_energy(
        &self,
        a: usize,
        b: usize,
        t_ab: &BTreeMap<usize, f64>,
        cache: &mut PairEnergyCache,
        counter: &mut EvalCounter,
    ) -> Result<f64, EnergyError> {
        let path = self.mol.graph().torsion_path(a, b)?;
        let mut key_angles = Vec::with_capacity(path.len());
        let mut angles = vec![0.0; self.mol.n_torsions()];
        for &t in &path {
            let v = *t_ab.get(&t).ok_or(EnergyError::IncompletePath(t))?;
            angles[t] = v;
            key_angles.push(quantize_angle(v));
        }
        let key = (a.min(b), a.max(b), key_angles);
        if let Some(&v) = cache.map.get(&key) {
            return Ok(v);
        }
        let v = self.group_energy(&[(a.min(b), a.max(b))], &angles, counter)?;
        cache.map.insert(key, v);
        Ok(v)
    }

    /// Sum of cross-body interactions over the listed body pairs at the full
    /// torsion assignment `angles`. Counts as one evaluation.
    pub fn group_energy(
        &self,
        body_pairs: &[(usize, usize)],
        angles: &[f64],
        counter: &mut EvalCounter,
    ) -> Result<f64, EnergyError> {
        let mut pos = Vec::with_capacity(self.mol.n_atoms());
        self.mol.apply_into(angles, &mut pos)?;
        counter.bump();
        let mut sum = 0.0;
        for &(a, b) in body_pairs {
            if let Some(idx) = self.groups.get(&(a.min(b), a.max(b))) {
                sum += idx.iter().map(|&k| self.pairs[k].energy(&pos, self.opts.pair_cap)).sum::<f64>();
            }
        }
        Ok(sum)
    }
}
