#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use rand::Rng;

use confsearch::encoding::{build_neighbourhood_qubo, Discretization, NeighbourhoodQubo, OneHotLayout, Penalty};
use confsearch::energy::{EnergyModel, EnergyOptions, EvalCounter};
use confsearch::molmodel::{generate_alkane, generate_star, Molecule, MoleculeSpec, TorsionVector, Vec3};
use confsearch::neighbourhoods::{allocate_levels, neighbourhood_change, TorsionSubset};

pub fn model_of(spec: MoleculeSpec) -> EnergyModel {
    EnergyModel::new(Arc::new(Molecule::new(spec)), EnergyOptions::default()).unwrap()
}

pub fn alkane(n: usize) -> EnergyModel {
    model_of(generate_alkane(n).unwrap())
}

pub fn star() -> EnergyModel {
    model_of(generate_star(3).unwrap())
}

pub fn data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

pub fn random_grid_vector<R: Rng>(m: usize, theta: &Discretization, rng: &mut R) -> TorsionVector {
    TorsionVector((0..m).map(|_| theta.values()[rng.gen_range(0..theta.d())]).collect())
}

pub fn random_angles<R: Rng>(m: usize, rng: &mut R) -> TorsionVector {
    TorsionVector((0..m).map(|_| rng.gen_range(-180.0..180.0)).collect())
}

/// Dihedral angle a-b-c-d in degrees, IUPAC sign convention.
pub fn dihedral(a: &Vec3, b: &Vec3, c: &Vec3, d: &Vec3) -> f64 {
    let b1 = b - a;
    let b2 = c - b;
    let b3 = d - c;
    let n1 = b1.cross(&b2);
    let n2 = b2.cross(&b3);
    let x = n1.dot(&n2);
    let y = b2.norm() * b1.dot(&n2);
    y.atan2(x).to_degrees()
}

pub fn wrap_deg(x: f64) -> f64 {
    let y = (x + 180.0).rem_euclid(360.0) - 180.0;
    if y == -180.0 {
        180.0
    } else {
        y
    }
}

/// Exhaustive grid minimum; returns (vector, energy).
pub fn grid_minimum(model: &EnergyModel, theta: &Discretization) -> (TorsionVector, f64) {
    let m = model.molecule().n_torsions();
    let d = theta.d();
    let mut idx = vec![0usize; m];
    let mut best: Option<(TorsionVector, f64)> = None;
    let mut counter = EvalCounter::new();
    loop {
        let t = TorsionVector(idx.iter().map(|&k| theta.values()[k]).collect());
        let e = model.total_energy(&t, &mut counter).unwrap();
        if best.as_ref().map_or(true, |b| e < b.1) {
            best = Some((t, e));
        }
        let mut k = 0;
        loop {
            if k == m {
                return best.unwrap();
            }
            idx[k] += 1;
            if idx[k] < d {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// Every vector in a layout's neighbourhood of `current`, in odometer order.
pub fn neighbourhood_vectors(layout: &OneHotLayout, current: &TorsionVector) -> Vec<TorsionVector> {
    let blocks = layout.blocks();
    let mut out = Vec::new();
    let mut idx = vec![0usize; blocks.len()];
    loop {
        let mut t = current.clone();
        for (b, &k) in blocks.iter().zip(&idx) {
            t.0[b.torsion] = b.levels[k];
        }
        out.push(t);
        let mut k = 0;
        loop {
            if k == blocks.len() {
                return out;
            }
            idx[k] += 1;
            if idx[k] < blocks[k].levels.len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// One-hot bits of the block level indices.
pub fn bits_of(layout: &OneHotLayout, idx: &[usize]) -> Vec<u8> {
    let mut bits = vec![0u8; layout.n_vars()];
    for (b, &k) in layout.blocks().iter().zip(idx) {
        bits[b.offset + k] = 1;
    }
    bits
}

pub struct Instance {
    pub model_name: &'static str,
    pub current: TorsionVector,
    pub subset: TorsionSubset,
    pub layout: Arc<OneHotLayout>,
    pub nq: NeighbourhoodQubo,
}

/// A randomized neighbourhood QUBO with at most `max_vars` variables.
pub fn random_instance<R: Rng>(models: &[(&'static str, EnergyModel)], max_vars: usize, rng: &mut R) -> Instance {
    let (name, model) = &models[rng.gen_range(0..models.len())];
    let graph = model.molecule().graph();
    let d = rng.gen_range(4..=12);
    let theta = Discretization::uniform(d).unwrap();
    let current = random_grid_vector(graph.n_torsions(), &theta, rng);
    let subset = neighbourhood_change(graph, rng);
    let lo = subset.len();
    let hi = max_vars.min(subset.len() * d).max(lo);
    let s = rng.gen_range(lo..=hi);
    let layout = Arc::new(allocate_levels(&subset, s, &theta, &current, rng).unwrap());
    let nq =
        build_neighbourhood_qubo(model, &current, &subset, &layout, Penalty::Auto, &mut EvalCounter::new()).unwrap();
    Instance { model_name: name, current, subset, layout, nq }
}

pub fn test_models() -> Vec<(&'static str, EnergyModel)> {
    vec![("butane", alkane(4)), ("pentane", alkane(5)), ("hexane", alkane(6)), ("decane", alkane(10)), ("star", star())]
}

pub fn model_named<'a>(models: &'a [(&'static str, EnergyModel)], name: &str) -> &'a EnergyModel {
    &models.iter().find(|(n, _)| *n == name).unwrap().1
}

pub fn is_monotone(trajectory: &[(usize, f64)]) -> bool {
    trajectory.windows(2).all(|w| w[1].1 <= w[0].1)
}
