mod common;

use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{alkane, star};
use confsearch::encoding::Discretization;
use confsearch::molmodel::TorsionVector;
use confsearch::neighbourhoods::{
    allocate_levels, contract, is_two_torsion_dependent, neighbourhood_change, split_budget, NeighbourhoodError,
};

/// Largest product over compositions of `s` into `m` parts in 1..=d.
fn best_product(s: usize, m: usize, d: usize) -> u64 {
    fn go(s: usize, m: usize, d: usize) -> Option<u64> {
        if m == 0 {
            return (s == 0).then_some(1);
        }
        (1..=d.min(s)).filter_map(|k| go(s - k, m - 1, d).map(|p| p * k as u64)).max()
    }
    go(s, m, d).unwrap_or(0)
}

#[test]
fn even_split_is_optimal() {
    for m in 1..=4 {
        for d in 2..=8 {
            for s in m..=20.min(m * d) {
                let sizes = split_budget(s, m, d);
                assert_eq!(sizes.iter().sum::<usize>(), s);
                assert!(sizes.iter().all(|&x| (1..=d).contains(&x)));
                let p: u64 = sizes.iter().map(|&x| x as u64).product();
                assert_eq!(p, best_product(s, m, d), "s={s} m={m} d={d}");
            }
        }
    }
}

#[test]
fn oversized_budget_saturates_grid() {
    assert_eq!(split_budget(100, 3, 16), vec![16, 16, 16]);
    assert_eq!(split_budget(40, 3, 16), vec![14, 13, 13]);
    assert_eq!(split_budget(40, 2, 16), vec![16, 16]);
}

#[test]
fn path_graph_pairs_all_occur() {
    // Hexane: three torsions in a chain.
    let model = alkane(6);
    let graph = model.molecule().graph();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut freq: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
    for _ in 0..3000 {
        *freq.entry(neighbourhood_change(graph, &mut rng).torsions().to_vec()).or_default() += 1;
    }
    assert_eq!(freq.keys().cloned().collect::<Vec<_>>(), vec![vec![0, 1], vec![0, 2], vec![1, 2]]);
    assert!(freq.values().all(|&c| c > 700));
}

#[test]
fn too_small_budget_is_an_error() {
    let model = star();
    let graph = model.molecule().graph();
    let theta = Discretization::uniform(8).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let subset = loop {
        let s = neighbourhood_change(graph, &mut rng);
        if s.len() > 2 {
            break s;
        }
    };
    let err = allocate_levels(&subset, 2, &theta, &TorsionVector::zeros(8), &mut rng).unwrap_err();
    assert_eq!(err, NeighbourhoodError::BudgetTooSmall { s: 2, size: subset.len() });
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn subsets_are_maximal_stars(seed in any::<u64>(), which in 0usize..3) {
        let model = [alkane(10), star(), alkane(6)].into_iter().nth(which).unwrap();
        let graph = model.molecule().graph();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let subset = neighbourhood_change(graph, &mut rng);
        let chosen = subset.torsions().to_vec();
        let c = contract(graph, &chosen).unwrap();
        prop_assert!(c.degree.iter().filter(|&&k| k > 1).count() <= 1);
        prop_assert!(is_two_torsion_dependent(graph, &chosen).unwrap());
        for t in 0..graph.n_torsions() {
            if chosen.contains(&t) {
                continue;
            }
            let mut bigger = chosen.clone();
            bigger.push(t);
            prop_assert!(!is_two_torsion_dependent(graph, &bigger).unwrap());
        }
    }

    #[test]
    fn allocation_keeps_current_level(seed in any::<u64>(), s in 8usize..70, d in 4usize..17) {
        let model = star();
        let graph = model.molecule().graph();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let theta = Discretization::uniform(d).unwrap();
        let current = common::random_grid_vector(graph.n_torsions(), &theta, &mut rng);
        let subset = neighbourhood_change(graph, &mut rng);
        prop_assume!(s >= subset.len());
        let layout = allocate_levels(&subset, s, &theta, &current, &mut rng).unwrap();
        let sizes = split_budget(s, subset.len(), d);
        for (b, &size) in layout.blocks().iter().zip(&sizes) {
            prop_assert_eq!(b.levels.len(), size);
            prop_assert!(b.levels.contains(&current.as_slice()[b.torsion]));
            prop_assert!(b.levels.windows(2).all(|w| w[0] < w[1]));
        }
        prop_assert_eq!(layout.n_vars(), s.min(subset.len() * d));
    }
}
