//! Two-torsion-dependent neighbourhoods and level budgets.
//!
//! A torsion subset is two-torsion dependent when contracting every other
//! torsion edge of the rigid-body tree leaves a star: at most one super-vertex
//! with degree above one.

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use crate::encoding::{Discretization, OneHotLayout};
use crate::molmodel::{RigidBodyGraph, TorsionVector};
use crate::unionfind::UnionFind;

#[derive(Debug, Error, PartialEq)]
pub enum NeighbourhoodError {
    #[error("unknown torsion index {0}")]
    UnknownTorsion(usize),
    #[error("torsion {0} listed twice")]
    Duplicate(usize),
    #[error("torsion subset is not two-torsion dependent")]
    NotStar,
    #[error("budget s = {s} is smaller than the subset size {size}")]
    BudgetTooSmall { s: usize, size: usize },
    #[error("current angle {angle} of torsion {torsion} is not a discretization level")]
    OffGrid { torsion: usize, angle: f64 },
    #[error("torsion vector length {got} does not match {expected} torsions")]
    LengthMismatch { expected: usize, got: usize },
}

/// Result of contracting all edges outside a torsion subset.
#[derive(Debug, Clone, PartialEq)]
pub struct Contraction {
    /// Super-vertex label per original body.
    pub super_of_body: Vec<usize>,
    pub n_super: usize,
    /// Subset edges as (torsion, super u, super v).
    pub edges: Vec<(usize, usize, usize)>,
    pub degree: Vec<usize>,
}

impl Contraction {
    pub fn is_star(&self) -> bool {
        self.degree.iter().filter(|&&d| d > 1).count() <= 1
    }

    /// Members of each super-vertex, ascending body ids.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut m = vec![Vec::new(); self.n_super];
        for (b, &s) in self.super_of_body.iter().enumerate() {
            m[s].push(b);
        }
        m
    }

    /// Hub super-vertex: the one with degree above one, or for a single edge
    /// the endpoint holding the lowest body id.
    pub fn center(&self) -> Option<usize> {
        if let Some(c) = self.degree.iter().position(|&d| d > 1) {
            return Some(c);
        }
        self.edges.first().map(|&(_, u, v)| u.min(v))
    }
}

fn check_subset(graph: &RigidBodyGraph, subset: &[usize]) -> Result<(), NeighbourhoodError> {
    let mut seen = vec![false; graph.n_torsions()];
    for &t in subset {
        if t >= graph.n_torsions() {
            return Err(NeighbourhoodError::UnknownTorsion(t));
        }
        if std::mem::replace(&mut seen[t], true) {
            return Err(NeighbourhoodError::Duplicate(t));
        }
    }
    Ok(())
}

/// Contracts every torsion edge not in `subset` by union-find over body ids.
pub fn contract(graph: &RigidBodyGraph, subset: &[usize]) -> Result<Contraction, NeighbourhoodError> {
    check_subset(graph, subset)?;
    let mut keep = vec![false; graph.n_torsions()];
    for &t in subset {
        keep[t] = true;
    }
    let mut uf = UnionFind::new(graph.n_bodies());
    for e in graph.torsions() {
        if !keep[e.index] {
            uf.union(e.bodies.0, e.bodies.1);
        }
    }
    let (super_of_body, n_super) = uf.labels();
    let mut degree = vec![0; n_super];
    let mut edges = Vec::with_capacity(subset.len());
    let mut sorted = subset.to_vec();
    sorted.sort_unstable();
    for t in sorted {
        let (a, b) = graph.torsions()[t].bodies;
        let (u, v) = (super_of_body[a], super_of_body[b]);
        degree[u] += 1;
        degree[v] += 1;
        edges.push((t, u, v));
    }
    Ok(Contraction { super_of_body, n_super, edges, degree })
}

pub fn is_two_torsion_dependent(graph: &RigidBodyGraph, subset: &[usize]) -> Result<bool, NeighbourhoodError> {
    Ok(contract(graph, subset)?.is_star())
}

/// A two-torsion-dependent torsion set with its star centre.
#[derive(Debug, Clone, PartialEq)]
pub struct TorsionSubset {
    torsions: Vec<usize>,
    /// Lowest body id inside the hub super-vertex.
    center_body: Option<usize>,
}

impl TorsionSubset {
    pub fn new(graph: &RigidBodyGraph, torsions: &[usize]) -> Result<Self, NeighbourhoodError> {
        let c = contract(graph, torsions)?;
        if !c.is_star() {
            return Err(NeighbourhoodError::NotStar);
        }
        let center_body = c.center().and_then(|s| c.super_of_body.iter().position(|&x| x == s));
        let mut torsions = torsions.to_vec();
        torsions.sort_unstable();
        Ok(TorsionSubset { torsions, center_body })
    }

    /// Torsion indices, ascending.
    pub fn torsions(&self) -> &[usize] {
        &self.torsions
    }

    pub fn center_body(&self) -> Option<usize> {
        self.center_body
    }

    pub fn len(&self) -> usize {
        self.torsions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.torsions.is_empty()
    }
}

/// Random greedy maximal subset: shuffle the torsions, keep each one whose
/// addition preserves two-torsion dependency.
pub fn neighbourhood_change<R: Rng + ?Sized>(graph: &RigidBodyGraph, rng: &mut R) -> TorsionSubset {
    let mut order: Vec<usize> = (0..graph.n_torsions()).collect();
    order.shuffle(rng);
    let mut chosen: Vec<usize> = Vec::with_capacity(order.len());
    for t in order {
        chosen.push(t);
        if !is_two_torsion_dependent(graph, &chosen).expect("indices come from the graph") {
            chosen.pop();
        }
    }
    TorsionSubset::new(graph, &chosen).expect("greedy subset stays a star")
}

/// Block sizes for a budget `s` split over `m` torsions with at most `d` levels each.
pub fn split_budget(s: usize, m: usize, d: usize) -> Vec<usize> {
    if m == 0 {
        return Vec::new();
    }
    let mut sizes: Vec<usize> = (0..m).map(|i| s / m + usize::from(i < s % m)).collect();
    let mut surplus = 0;
    for size in sizes.iter_mut() {
        if *size > d {
            surplus += *size - d;
            *size = d;
        }
    }
    // Hand the surplus out one level at a time, in index order, to blocks below the cap.
    while surplus > 0 && sizes.iter().any(|&x| x < d) {
        for size in sizes.iter_mut() {
            if surplus == 0 {
                break;
            }
            if *size < d {
                *size += 1;
                surplus -= 1;
            }
        }
    }
    sizes
}

/// Chooses the level subset of every torsion in `subset`. Each block holds the
/// torsion's current level plus distinct levels drawn uniformly from the rest.
pub fn allocate_levels<R: Rng + ?Sized>(
    subset: &TorsionSubset,
    s: usize,
    theta: &Discretization,
    current: &TorsionVector,
    rng: &mut R,
) -> Result<OneHotLayout, NeighbourhoodError> {
    if s < subset.len() {
        return Err(NeighbourhoodError::BudgetTooSmall { s, size: subset.len() });
    }
    let sizes = split_budget(s, subset.len(), theta.d());
    let mut blocks = Vec::with_capacity(subset.len());
    for (&t, &size) in subset.torsions().iter().zip(&sizes) {
        let angle = *current
            .as_slice()
            .get(t)
            .ok_or(NeighbourhoodError::LengthMismatch { expected: t + 1, got: current.len() })?;
        let cur = theta.index_of(angle).ok_or(NeighbourhoodError::OffGrid { torsion: t, angle })?;
        let others: Vec<usize> = (0..theta.d()).filter(|&k| k != cur).collect();
        let mut picked: Vec<usize> = others.choose_multiple(rng, size - 1).copied().collect();
        picked.push(cur);
        picked.sort_unstable();
        blocks.push((t, picked.into_iter().map(|k| theta.values()[k]).collect()));
    }
    Ok(OneHotLayout::new(blocks).expect("blocks are nonempty and distinct"))
}

/// Neighbourhood size (product of block sizes) and the number of coefficient
/// evaluations needed to build its QUBO: all cross-block level pairs plus `s`.
pub fn neighbourhood_counts(layout: &OneHotLayout) -> (u128, u64) {
    let sizes: Vec<u64> = layout.blocks().iter().map(|b| b.levels.len() as u64).collect();
    let product = sizes.iter().map(|&x| x as u128).product();
    let s: u64 = sizes.iter().sum();
    let mut pairs = 0;
    for i in 0..sizes.len() {
        for j in i + 1..sizes.len() {
            pairs += sizes[i] * sizes[j];
        }
    }
    (product, pairs + s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashMap;

    fn path(m: usize) -> RigidBodyGraph {
        let edges: Vec<_> = (0..m).map(|i| (i, i + 1)).collect();
        RigidBodyGraph::from_edges(m + 1, &edges).unwrap()
    }

    fn star(m: usize) -> RigidBodyGraph {
        let edges: Vec<_> = (0..m).map(|i| (0, i + 1)).collect();
        RigidBodyGraph::from_edges(m + 1, &edges).unwrap()
    }

    #[test]
    fn path_of_three() {
        let g = path(3);
        assert!(!is_two_torsion_dependent(&g, &[0, 1, 2]).unwrap());
        assert!(is_two_torsion_dependent(&g, &[0, 2]).unwrap());
        assert!(is_two_torsion_dependent(&g, &[0, 1]).unwrap());
        assert!(is_two_torsion_dependent(&g, &[1, 2]).unwrap());
        assert_eq!(is_two_torsion_dependent(&g, &[5]), Err(NeighbourhoodError::UnknownTorsion(5)));
        assert_eq!(is_two_torsion_dependent(&g, &[1, 1]), Err(NeighbourhoodError::Duplicate(1)));
        let c = contract(&g, &[0, 2]).unwrap();
        assert_eq!(c.n_super, 3);
        assert_eq!(c.super_of_body[1], c.super_of_body[2]);
    }

    #[test]
    fn single_and_star() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g1 = path(1);
        for _ in 0..20 {
            assert_eq!(neighbourhood_change(&g1, &mut rng).torsions(), &[0]);
        }
        let g = star(5);
        for _ in 0..20 {
            let s = neighbourhood_change(&g, &mut rng);
            assert_eq!(s.torsions(), &[0, 1, 2, 3, 4]);
            assert_eq!(s.center_body(), Some(0));
        }
    }

    #[test]
    fn greedy_frequencies_on_three_path() {
        // Oracle: any two edges of a 3-path form a star and all three do not, so the
        // greedy rule keeps the first two torsions of the permutation. Each pair is
        // produced by 2 of the 6 permutations.
        let g = path(3);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut freq: HashMap<Vec<usize>, usize> = HashMap::new();
        for _ in 0..1000 {
            *freq.entry(neighbourhood_change(&g, &mut rng).torsions().to_vec()).or_default() += 1;
        }
        assert_eq!(freq.len(), 3);
        for key in [vec![0, 1], vec![0, 2], vec![1, 2]] {
            let f = freq[&key] as f64 / 1000.0;
            assert!((f - 1.0 / 3.0).abs() < 0.06, "{key:?}: {f}");
        }
    }

    #[test]
    fn budget_split() {
        assert_eq!(split_budget(63, 3, 32), vec![21, 21, 21]);
        assert_eq!(split_budget(63, 2, 32), vec![32, 31]);
        assert_eq!(split_budget(63, 2, 16), vec![16, 16]);
        assert_eq!(split_budget(10, 4, 16), vec![3, 3, 2, 2]);
        assert_eq!(split_budget(40, 3, 16), vec![14, 13, 13]);
        assert_eq!(split_budget(50, 3, 16), vec![16, 16, 16]);
    }

    #[test]
    fn allocate_contains_current() {
        let g = path(3);
        let theta = Discretization::uniform(32).unwrap();
        let subset = TorsionSubset::new(&g, &[0, 2]).unwrap();
        let current = TorsionVector(vec![45.0, 90.0, 337.5]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let layout = allocate_levels(&subset, 63, &theta, &current, &mut rng).unwrap();
        let sizes: Vec<usize> = layout.blocks().iter().map(|b| b.levels.len()).collect();
        assert_eq!(sizes, vec![32, 31]);
        assert_eq!(neighbourhood_counts(&layout).0, 992);
        assert!(layout.blocks()[1].levels.contains(&337.5));
        assert!(layout.bits_for(&current).is_some());
        assert_eq!(
            allocate_levels(&subset, 1, &theta, &current, &mut rng),
            Err(NeighbourhoodError::BudgetTooSmall { s: 1, size: 2 })
        );
        let off = TorsionVector(vec![1.0, 0.0, 0.0]);
        assert!(matches!(
            allocate_levels(&subset, 8, &theta, &off, &mut rng),
            Err(NeighbourhoodError::OffGrid { torsion: 0, .. })
        ));
    }

    #[test]
    fn counts() {
        let l = |sizes: &[usize]| {
            OneHotLayout::new(sizes.iter().enumerate().map(|(t, &n)| (t, (0..n).map(|k| k as f64).collect())).collect())
                .unwrap()
        };
        assert_eq!(neighbourhood_counts(&l(&[4, 4, 4])), (64, 60));
        assert_eq!(neighbourhood_counts(&l(&[16])), (16, 16));
        assert_eq!(neighbourhood_counts(&l(&[2, 2])), (4, 8));
        assert_eq!(neighbourhood_counts(&l(&[21, 21, 21])).0, 9261);
    }
}
