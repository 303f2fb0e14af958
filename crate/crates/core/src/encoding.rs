//! One-hot QUBO encoding of a neighbourhood, Ising conversion and decoding.
//!
//! For a star-shaped contraction with hub `C` and leaves `L_i` (one per subset
//! torsion), the molecular energy splits into
//!
//! * a constant (intra-body terms),
//! * `U_i(theta)`: hub-to-leaf interactions of leaf `i`, plus the frozen
//!   internal cross terms of the leaf (and of the hub, on the first block),
//! * `U_ij(theta, theta')`: leaf-to-leaf interactions.
//!
//! Each coefficient family is shifted so its minimum is zero before the
//! penalty is added; the shifts move into the offset, which leaves every
//! feasible energy unchanged.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::energy::{EnergyError, EnergyModel, EvalCounter};
use crate::molmodel::TorsionVector;
use crate::neighbourhoods::{contract, NeighbourhoodError, TorsionSubset};

/// Two levels closer than this are the same level.
pub const LEVEL_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum EncodingError {
    #[error("discretization needs at least 2 levels, got {0}")]
    TooFewLevels(usize),
    #[error("discretization levels must be strictly increasing in [0, 360)")]
    BadLevels,
    #[error("one-hot layout is invalid: {0}")]
    BadLayout(String),
    #[error("bitstring has length {got}, expected {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("torsion {torsion}: {set} bits set in its one-hot block")]
    Infeasible { torsion: usize, set: usize },
    #[error("layout torsions {layout:?} do not match the subset {subset:?}")]
    SubsetMismatch { layout: Vec<usize>, subset: Vec<usize> },
    #[error("layout for torsion {torsion} does not contain its current angle {angle}")]
    CurrentMissing { torsion: usize, angle: f64 },
    #[error("quadratic key ({0}, {1}) out of range")]
    BadKey(usize, usize),
    #[error("coefficients must be finite")]
    NonFinite,
    #[error(transparent)]
    Neighbourhood(#[from] NeighbourhoodError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
}

/// Sorted set of allowed torsion angles, degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discretization {
    theta: Vec<f64>,
}

impl Discretization {
    /// `d` equally spaced levels starting at 0.
    pub fn uniform(d: usize) -> Result<Self, EncodingError> {
        Self::new((0..d).map(|k| k as f64 * 360.0 / d as f64).collect())
    }

    pub fn new(theta: Vec<f64>) -> Result<Self, EncodingError> {
        if theta.len() < 2 {
            return Err(EncodingError::TooFewLevels(theta.len()));
        }
        let in_range = theta.iter().all(|&v| (0.0..360.0).contains(&v));
        if !in_range || theta.windows(2).any(|w| w[0] >= w[1]) {
            return Err(EncodingError::BadLevels);
        }
        Ok(Discretization { theta })
    }

    pub fn d(&self) -> usize {
        self.theta.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.theta
    }

    pub fn index_of(&self, angle: f64) -> Option<usize> {
        let a = angle.rem_euclid(360.0);
        self.theta.iter().position(|&v| (v - a).abs() < LEVEL_TOLERANCE || (v - a).abs() > 360.0 - LEVEL_TOLERANCE)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneHotBlock {
    pub torsion: usize,
    pub levels: Vec<f64>,
    /// Index of the block's first variable.
    pub offset: usize,
}

/// Flat indexing of the binary variables `x_{ik}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneHotLayout {
    blocks: Vec<OneHotBlock>,
    n: usize,
}

impl OneHotLayout {
    pub fn new(blocks: Vec<(usize, Vec<f64>)>) -> Result<Self, EncodingError> {
        let mut out = Vec::with_capacity(blocks.len());
        let mut n = 0;
        for (torsion, levels) in blocks {
            if levels.is_empty() {
                return Err(EncodingError::BadLayout(format!("torsion {torsion} has no levels")));
            }
            if out.iter().any(|b: &OneHotBlock| b.torsion == torsion) {
                return Err(EncodingError::BadLayout(format!("torsion {torsion} appears twice")));
            }
            let len = levels.len();
            out.push(OneHotBlock { torsion, levels, offset: n });
            n += len;
        }
        Ok(OneHotLayout { blocks: out, n })
    }

    pub fn blocks(&self) -> &[OneHotBlock] {
        &self.blocks
    }

    pub fn n_vars(&self) -> usize {
        self.n
    }

    pub fn torsions(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.torsion).collect()
    }

    /// Exactly one bit set in every block.
    pub fn is_feasible(&self, bits: &[u8]) -> bool {
        bits.len() == self.n
            && self
                .blocks
                .iter()
                .all(|b| bits[b.offset..b.offset + b.levels.len()].iter().filter(|&&x| x != 0).count() == 1)
    }

    /// One-hot image of `t`, if every block holds the torsion's angle.
    pub fn bits_for(&self, t: &TorsionVector) -> Option<Vec<u8>> {
        let mut bits = vec![0u8; self.n];
        for b in &self.blocks {
            let angle = *t.as_slice().get(b.torsion)?;
            let k = level_position(&b.levels, angle)?;
            bits[b.offset + k] = 1;
        }
        Some(bits)
    }
}

fn level_position(levels: &[f64], angle: f64) -> Option<usize> {
    let a = angle.rem_euclid(360.0);
    levels.iter().position(|&v| (v - a).abs() < LEVEL_TOLERANCE || (v - a).abs() > 360.0 - LEVEL_TOLERANCE)
}

/// Wire form shared by QUBO and Ising documents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuboDocument {
    pub n: usize,
    pub linear: Vec<f64>,
    pub quadratic: Vec<(usize, usize, f64)>,
    pub offset: f64,
}

/// `offset + sum linear_i x_i + sum_{i<j} quadratic_ij x_i x_j` over `x` in {0,1}^n.
#[derive(Debug, Clone, PartialEq)]
pub struct QuboProblem {
    pub n: usize,
    pub linear: Vec<f64>,
    pub quadratic: BTreeMap<(usize, usize), f64>,
    pub offset: f64,
    pub layout: Option<Arc<OneHotLayout>>,
}

impl QuboProblem {
    pub fn new(n: usize) -> Self {
        QuboProblem { n, linear: vec![0.0; n], quadratic: BTreeMap::new(), offset: 0.0, layout: None }
    }

    /// Accumulates a quadratic term; `i == j` folds into the linear term.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        if i == j {
            self.linear[i] += v;
        } else {
            *self.quadratic.entry((i.min(j), i.max(j))).or_insert(0.0) += v;
        }
    }

    pub fn qubo_energy(&self, bits: &[u8]) -> Result<f64, EncodingError> {
        if bits.len() != self.n {
            return Err(EncodingError::LengthMismatch { expected: self.n, got: bits.len() });
        }
        let mut e = self.offset;
        for (x, a) in bits.iter().zip(&self.linear) {
            if *x != 0 {
                e += a;
            }
        }
        for (&(i, j), &b) in &self.quadratic {
            if bits[i] != 0 && bits[j] != 0 {
                e += b;
            }
        }
        Ok(e)
    }

    pub fn is_feasible(&self, bits: &[u8]) -> bool {
        self.layout.as_ref().map_or(true, |l| l.is_feasible(bits))
    }

    /// Largest coefficient magnitude over linear and quadratic terms.
    pub fn max_abs_coefficient(&self) -> f64 {
        self.linear.iter().chain(self.quadratic.values()).fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Row-major dense upper-triangular matrix of the quadratic terms.
    pub fn dense_quadratic(&self) -> Vec<f64> {
        let mut q = vec![0.0; self.n * self.n];
        for (&(i, j), &v) in &self.quadratic {
            q[i * self.n + j] = v;
            q[j * self.n + i] = v;
        }
        q
    }

    pub fn to_document(&self) -> QuboDocument {
        QuboDocument {
            n: self.n,
            linear: self.linear.clone(),
            quadratic: self.quadratic.iter().map(|(&(i, j), &v)| (i, j, v)).collect(),
            offset: self.offset,
        }
    }

    pub fn from_document(doc: &QuboDocument) -> Result<Self, EncodingError> {
        if doc.linear.len() != doc.n {
            return Err(EncodingError::LengthMismatch { expected: doc.n, got: doc.linear.len() });
        }
        let mut q = QuboProblem::new(doc.n);
        q.linear.clone_from(&doc.linear);
        q.offset = doc.offset;
        for &(i, j, v) in &doc.quadratic {
            if i >= doc.n || j >= doc.n {
                return Err(EncodingError::BadKey(i, j));
            }
            q.add(i, j, v);
        }
        if !(q.offset.is_finite() && q.linear.iter().chain(q.quadratic.values()).all(|v| v.is_finite())) {
            return Err(EncodingError::NonFinite);
        }
        Ok(q)
    }
}

/// Free-function form of [`QuboProblem::qubo_energy`].
pub fn qubo_energy(q: &QuboProblem, bits: &[u8]) -> Result<f64, EncodingError> {
    q.qubo_energy(bits)
}

/// `offset + sum h_i s_i + sum_{i<j} J_ij s_i s_j` over `s` in {-1,+1}^n.
#[derive(Debug, Clone, PartialEq)]
pub struct IsingProblem {
    pub h: Vec<f64>,
    pub j: BTreeMap<(usize, usize), f64>,
    pub offset: f64,
}

impl IsingProblem {
    pub fn n(&self) -> usize {
        self.h.len()
    }

    pub fn ising_energy(&self, spins: &[i8]) -> Result<f64, EncodingError> {
        if spins.len() != self.h.len() {
            return Err(EncodingError::LengthMismatch { expected: self.h.len(), got: spins.len() });
        }
        let mut e = self.offset;
        for (s, h) in spins.iter().zip(&self.h) {
            e += h * f64::from(*s);
        }
        for (&(a, b), &v) in &self.j {
            e += v * f64::from(spins[a] * spins[b]);
        }
        Ok(e)
    }

    pub fn to_document(&self) -> QuboDocument {
        QuboDocument {
            n: self.h.len(),
            linear: self.h.clone(),
            quadratic: self.j.iter().map(|(&(i, j), &v)| (i, j, v)).collect(),
            offset: self.offset,
        }
    }
}

/// Substitutes `x = (s + 1) / 2`.
pub fn qubo_to_ising(q: &QuboProblem) -> IsingProblem {
    let mut h: Vec<f64> = q.linear.iter().map(|a| a / 2.0).collect();
    let mut offset = q.offset + q.linear.iter().sum::<f64>() / 2.0;
    let mut j = BTreeMap::new();
    for (&(a, b), &v) in &q.quadratic {
        let quarter = v / 4.0;
        h[a] += quarter;
        h[b] += quarter;
        offset += quarter;
        j.insert((a, b), quarter);
    }
    IsingProblem { h, j, offset }
}

/// Replaces the subset torsions of `current` with the levels selected by `bits`.
pub fn decode_bits(
    bits: &[u8],
    layout: &OneHotLayout,
    current: &TorsionVector,
) -> Result<TorsionVector, EncodingError> {
    if bits.len() != layout.n_vars() {
        return Err(EncodingError::LengthMismatch { expected: layout.n_vars(), got: bits.len() });
    }
    let mut out = current.clone();
    for b in layout.blocks() {
        let block = &bits[b.offset..b.offset + b.levels.len()];
        let set = block.iter().filter(|&&x| x != 0).count();
        if set != 1 {
            return Err(EncodingError::Infeasible { torsion: b.torsion, set });
        }
        let k = block.iter().position(|&x| x != 0).expect("one bit set");
        *out.0.get_mut(b.torsion).ok_or(EncodingError::BadLayout(format!("torsion {} out of range", b.torsion)))? =
            b.levels[k];
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Penalty {
    /// `max(2, |subset|) * (coefficient range) + 1`.
    Auto,
    Fixed(f64),
}

/// Neighbourhood QUBO plus the values used to build it.
#[derive(Debug, Clone)]
pub struct NeighbourhoodQubo {
    pub qubo: QuboProblem,
    pub penalty: f64,
    /// Range of the shifted energy coefficients (their minimum is 0).
    pub coefficient_range: f64,
}

/// Builds the one-hot QUBO whose feasible minimum is the best torsion vector
/// in the neighbourhood of `current` spanned by `subset` and `layout`.
pub fn build_neighbourhood_qubo(
    model: &EnergyModel,
    current: &TorsionVector,
    subset: &TorsionSubset,
    layout: &Arc<OneHotLayout>,
    penalty: Penalty,
    counter: &mut EvalCounter,
) -> Result<NeighbourhoodQubo, EncodingError> {
    let graph = model.molecule().graph();
    let mut layout_torsions = layout.torsions();
    layout_torsions.sort_unstable();
    if layout_torsions != subset.torsions() {
        return Err(EncodingError::SubsetMismatch { layout: layout_torsions, subset: subset.torsions().to_vec() });
    }
    if current.len() != graph.n_torsions() {
        return Err(EnergyError::from(crate::molmodel::MolError::LengthMismatch {
            expected: graph.n_torsions(),
            got: current.len(),
        })
        .into());
    }
    for b in layout.blocks() {
        let angle = current.as_slice()[b.torsion];
        if level_position(&b.levels, angle).is_none() {
            return Err(EncodingError::CurrentMissing { torsion: b.torsion, angle });
        }
    }
    let contraction = contract(graph, subset.torsions())?;
    if !contraction.is_star() {
        return Err(NeighbourhoodError::NotStar.into());
    }
    let members = contraction.members();
    let center = contraction.center();
    let existing: std::collections::BTreeSet<(usize, usize)> = model.body_pairs().collect();
    let cross = |xs: &[usize], ys: &[usize]| -> Vec<(usize, usize)> {
        let mut v = Vec::new();
        for &a in xs {
            for &b in ys {
                let key = (a.min(b), a.max(b));
                if existing.contains(&key) {
                    v.push(key);
                }
            }
        }
        v
    };
    let internal = |xs: &[usize]| -> Vec<(usize, usize)> {
        let mut v = Vec::new();
        for (k, &a) in xs.iter().enumerate() {
            for &b in &xs[k + 1..] {
                if existing.contains(&(a, b)) {
                    v.push((a, b));
                }
            }
        }
        v
    };
    // Leaf super-vertex of each block, in layout order.
    let leaf: Vec<usize> = layout
        .blocks()
        .iter()
        .map(|b| {
            let &(_, u, v) = contraction.edges.iter().find(|e| e.0 == b.torsion).expect("subset edge");
            if Some(u) == center {
                v
            } else {
                u
            }
        })
        .collect();

    let mut angles = current.as_slice().to_vec();
    let blocks = layout.blocks();
    let mut lin: Vec<Vec<f64>> = Vec::with_capacity(blocks.len());
    for (bi, b) in blocks.iter().enumerate() {
        let mut pairs = cross(&members[center.expect("nonempty subset")], &members[leaf[bi]]);
        pairs.extend(internal(&members[leaf[bi]]));
        if bi == 0 {
            pairs.extend(internal(&members[center.expect("nonempty subset")]));
        }
        let mut vals = Vec::with_capacity(b.levels.len());
        for &theta in &b.levels {
            angles[b.torsion] = theta;
            vals.push(model.group_energy(&pairs, &angles, counter)?);
        }
        angles[b.torsion] = current.as_slice()[b.torsion];
        lin.push(vals);
    }
    let mut quad: Vec<((usize, usize), Vec<f64>)> = Vec::new();
    for bi in 0..blocks.len() {
        for bj in bi + 1..blocks.len() {
            let pairs = cross(&members[leaf[bi]], &members[leaf[bj]]);
            let (ti, tj) = (blocks[bi].torsion, blocks[bj].torsion);
            let mut vals = Vec::with_capacity(blocks[bi].levels.len() * blocks[bj].levels.len());
            for &a in &blocks[bi].levels {
                for &c in &blocks[bj].levels {
                    angles[ti] = a;
                    angles[tj] = c;
                    vals.push(model.group_energy(&pairs, &angles, counter)?);
                }
            }
            angles[ti] = current.as_slice()[ti];
            angles[tj] = current.as_slice()[tj];
            quad.push(((bi, bj), vals));
        }
    }

    let shift = |vals: &mut Vec<f64>| -> (f64, f64) {
        let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
        vals.iter_mut().for_each(|v| *v -= min);
        let max = vals.iter().copied().fold(0.0, f64::max);
        (min, max)
    };
    let mut base = model.constant_energy();
    let mut range: f64 = 0.0;
    for vals in lin.iter_mut() {
        let (min, max) = shift(vals);
        base += min;
        range = range.max(max);
    }
    for (_, vals) in quad.iter_mut() {
        let (min, max) = shift(vals);
        base += min;
        range = range.max(max);
    }
    let p = match penalty {
        Penalty::Auto => (blocks.len().max(2) as f64) * range + 1.0,
        Penalty::Fixed(p) => p,
    };

    let mut q = QuboProblem::new(layout.n_vars());
    q.offset = base + p * blocks.len() as f64;
    for (b, vals) in blocks.iter().zip(&lin) {
        for (k, v) in vals.iter().enumerate() {
            q.linear[b.offset + k] = v - p;
            for l in k + 1..vals.len() {
                q.add(b.offset + k, b.offset + l, 2.0 * p);
            }
        }
    }
    for ((bi, bj), vals) in &quad {
        let (a, c) = (&blocks[*bi], &blocks[*bj]);
        for k in 0..a.levels.len() {
            for l in 0..c.levels.len() {
                let v = vals[k * c.levels.len() + l];
                if v != 0.0 {
                    q.add(a.offset + k, c.offset + l, v);
                }
            }
        }
    }
    if !(q.offset.is_finite() && q.linear.iter().chain(q.quadratic.values()).all(|v| v.is_finite())) {
        return Err(EncodingError::NonFinite);
    }
    q.layout = Some(layout.clone());
    Ok(NeighbourhoodQubo { qubo: q, penalty: p, coefficient_range: range })
}
