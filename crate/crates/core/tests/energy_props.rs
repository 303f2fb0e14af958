mod common;

use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{alkane, random_angles, star};
use confsearch::energy::{lj_pair, EnergyModel, EnergyOptions, EvalCounter, PairEnergyCache, DEFAULT_PAIR_CAP};
use confsearch::molmodel::TorsionVector;
use confsearch::uff::{mix, UffTable};

fn decomposed(model: &EnergyModel, t: &TorsionVector, cache: &mut PairEnergyCache, counter: &mut EvalCounter) -> f64 {
    let g = model.molecule().graph();
    let mut sum = model.constant_energy();
    for a in 0..g.n_bodies() {
        for b in a + 1..g.n_bodies() {
            let path = g.torsion_path(a, b).unwrap();
            let t_ab: BTreeMap<usize, f64> = path.iter().map(|&k| (k, t.as_slice()[k])).collect();
            sum += model.body_pair_energy(a, b, &t_ab, cache, counter).unwrap();
        }
    }
    sum
}

#[test]
fn decomposition_identity_on_fixtures() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for model in [alkane(4), alkane(10), star()] {
        let m = model.molecule().n_torsions();
        for _ in 0..100 {
            let t = random_angles(m, &mut rng);
            let mut c = EvalCounter::new();
            let total = model.total_energy(&t, &mut c).unwrap();
            let sum = decomposed(&model, &t, &mut PairEnergyCache::new(), &mut c);
            assert!((total - sum).abs() <= 1e-9 * total.abs().max(1.0), "{total} vs {sum}");
        }
    }
}

#[test]
fn breakdown_matches_total() {
    let model = star();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let t = random_angles(8, &mut rng);
    let mut c = EvalCounter::new();
    let b = model.breakdown(&t, &mut c).unwrap();
    let total = model.total_energy(&t, &mut c).unwrap();
    assert!((b.total() - total).abs() <= 1e-9 * total.abs().max(1.0));
}

#[test]
fn cache_hits_do_not_count() {
    let model = alkane(6);
    let t = TorsionVector(vec![60.0, -60.0, 180.0]);
    let mut cache = PairEnergyCache::new();
    let mut c = EvalCounter::new();
    let first = decomposed(&model, &t, &mut cache, &mut c);
    let after_first = c.get();
    let second = decomposed(&model, &t, &mut cache, &mut c);
    assert_eq!(first, second);
    assert_eq!(c.get(), after_first);
    assert!(after_first > 0);
}

#[test]
fn clashes_are_capped() {
    let model = alkane(6);
    let mut worst: f64 = 0.0;
    let mut c = EvalCounter::new();
    for a in [0.0, 60.0, 120.0, 180.0, 240.0, 300.0] {
        for b in [0.0, 60.0, 120.0, 180.0, 240.0, 300.0] {
            worst = worst.max(model.total_energy(&TorsionVector(vec![a, 120.0, b]), &mut c).unwrap());
        }
    }
    assert!(worst.is_finite() && worst <= DEFAULT_PAIR_CAP * model.pairs().len() as f64);
    let open = EnergyModel::new(
        model.molecule().clone(),
        EnergyOptions { pair_cap: f64::INFINITY, ..EnergyOptions::default() },
    )
    .unwrap();
    let t = TorsionVector::zeros(3);
    assert_eq!(open.total_energy(&t, &mut c).unwrap(), model.total_energy(&t, &mut c).unwrap());
}

#[test]
fn lj_closed_form() {
    assert_eq!(lj_pair(0.3, 3.5, 3.5).unwrap(), -0.3);
    let v: f64 = lj_pair(1.0, 2.0, 1.0).unwrap();
    assert!((v - (4096.0 - 128.0)).abs() < 1e-9);
    let h = 1e-5;
    let dv = (lj_pair(0.2, 3.1, 3.1 + h).unwrap() - lj_pair(0.2, 3.1, 3.1 - h).unwrap()) / (2.0 * h);
    assert!(dv.abs() < 1e-6);
    assert!(lj_pair(0.2, 3.1, 0.0).is_err());
}

proptest! {
    #[test]
    fn mixing_symmetric(i in 0usize..40, j in 0usize..40) {
        let table = UffTable::bundled();
        let names = ["H_", "C_3", "C_R", "N_3", "O_3", "F_", "P_3+3", "S_3+2", "Cl", "Br", "I_", "Ti3+4", "Fe3+2", "Ru6+2"];
        let a = table.get(names[i % names.len()]).unwrap();
        let b = table.get(names[j % names.len()]).unwrap();
        prop_assert_eq!(mix(a, b), mix(b, a));
    }

    #[test]
    fn lj_minimum_is_minus_epsilon(eps in 0.01f64..1.0, sigma in 2.0f64..5.0, r in 1.0f64..8.0) {
        let v = lj_pair(eps, sigma, r).unwrap();
        prop_assert!(v >= -eps - 1e-12);
        prop_assert!((lj_pair(eps, sigma, sigma).unwrap() + eps).abs() < 1e-12);
    }
}
