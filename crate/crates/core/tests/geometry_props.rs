mod common;

use std::sync::Arc;

use proptest::prelude::*;

use common::{dihedral, wrap_deg};
use confsearch::molmodel::{generate_alkane, generate_star, partition_rigid_bodies, Molecule, TorsionVector};

fn molecules() -> Vec<Arc<Molecule>> {
    vec![
        Arc::new(Molecule::new(generate_alkane(4).unwrap())),
        Arc::new(Molecule::new(generate_alkane(10).unwrap())),
        Arc::new(Molecule::new(generate_star(3).unwrap())),
    ]
}

fn angles(m: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-360.0f64..360.0, m)
}

#[test]
fn partition_covers_atoms_and_forms_tree() {
    for mol in molecules() {
        let g = partition_rigid_bodies(mol.spec());
        let mut seen = vec![0usize; mol.n_atoms()];
        for b in g.bodies() {
            for &a in &b.atom_indices {
                seen[a] += 1;
            }
        }
        assert!(seen.iter().all(|&c| c == 1));
        assert_eq!(g.n_torsions() + 1, g.n_bodies());
        for a in 0..g.n_bodies() {
            assert!(g.torsion_path(0, a).is_ok());
        }
    }
}

#[test]
fn butane_dihedral_follows_torsion() {
    let mol = Molecule::new(generate_alkane(4).unwrap());
    let phi = |t: f64| {
        let c = mol.apply_torsions(&TorsionVector(vec![t])).unwrap();
        let p = &c.positions;
        dihedral(&p[0], &p[1], &p[2], &p[3])
    };
    assert!((wrap_deg(phi(0.0)) - 180.0).abs() < 1e-9);
    for t in [30.0, 120.0, -75.0, 180.0] {
        assert!((wrap_deg(phi(t) - phi(0.0) - t)).abs() < 1e-9, "t = {t}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rigid_bodies_stay_rigid(which in 0usize..3, seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mol = &molecules()[which];
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let t = TorsionVector((0..mol.n_torsions()).map(|_| rng.gen_range(-180.0..180.0)).collect());
        let c = mol.apply_torsions(&t).unwrap();
        let input = mol.input_positions();
        for b in mol.graph().bodies() {
            for &i in &b.atom_indices {
                for &j in &b.atom_indices {
                    let d0 = (input[i] - input[j]).norm();
                    let d1 = (c.positions[i] - c.positions[j]).norm();
                    prop_assert!((d0 - d1).abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn distances_depend_only_on_path(t in angles(8), bump in -180.0f64..180.0, a in 0usize..9, b in 0usize..9, k in 0usize..8) {
        let mol = Molecule::new(generate_star(3).unwrap());
        let g = mol.graph();
        let path = g.torsion_path(a, b).unwrap();
        prop_assume!(!path.contains(&k));
        let t0 = TorsionVector(t.clone());
        let mut t1 = t;
        t1[k] += bump;
        let c0 = mol.apply_torsions(&t0).unwrap();
        let c1 = mol.apply_torsions(&TorsionVector(t1)).unwrap();
        for &i in &g.bodies()[a].atom_indices {
            for &j in &g.bodies()[b].atom_indices {
                let d0 = (c0.positions[i] - c0.positions[j]).norm();
                let d1 = (c1.positions[i] - c1.positions[j]).norm();
                prop_assert!((d0 - d1).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn rotations_compose(t1 in angles(7), t2 in angles(7)) {
        let spec = generate_alkane(10).unwrap();
        let mol = Molecule::new(spec.clone());
        let first = mol.apply_torsions(&TorsionVector(t1.clone())).unwrap();
        let rebased = Molecule::new(spec.with_positions(&first.positions).unwrap());
        let two_step = rebased.apply_torsions(&TorsionVector(t2.clone())).unwrap();
        let sum: Vec<f64> = t1.iter().zip(&t2).map(|(a, b)| a + b).collect();
        let direct = mol.apply_torsions(&TorsionVector(sum)).unwrap();
        for (p, q) in two_step.positions.iter().zip(&direct.positions) {
            prop_assert!((p - q).norm() < 1e-8);
        }
    }
}
