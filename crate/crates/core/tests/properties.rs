use appca::chain::ChainDiscovery;
use appca::linalg::{mul, orthonormal_basis};
use appca::metrics::subspace_distance;
use appca::{discover_chain, rank_select_ic, validate_chain, validate_layout, BlockLayout};
use faer::Mat;
use proptest::prelude::*;

fn layout_strategy() -> impl Strategy<Value = BlockLayout> {
    (1usize..6, 1usize..6)
        .prop_flat_map(|(g, b)| (Just(g), Just(b), prop::collection::vec(any::<bool>(), g * b)))
        .prop_filter_map("indicator needs full rows and columns", |(g, b, bits)| {
            let ind: Vec<Vec<bool>> = (0..g).map(|i| bits[i * b..(i + 1) * b].to_vec()).collect();
            BlockLayout::contiguous(&vec![3; g], &vec![2; b], ind).ok()
        })
}

// groups linked when they observe a common block
fn connected(layout: &BlockLayout) -> bool {
    let g = layout.num_groups();
    let mut seen = vec![false; g];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(a) = stack.pop() {
        for c in 0..g {
            let linked = (0..layout.num_blocks()).any(|b| layout.observes(a, b) && layout.observes(c, b));
            if !seen[c] && linked {
                seen[c] = true;
                stack.push(c);
            }
        }
    }
    seen.iter().all(|&s| s)
}

fn random_matrix(rows: usize, cols: usize, seed: u64) -> Mat<f64> {
    let mut k = seed.wrapping_add(0x9e3779b97f4a7c15);
    Mat::from_fn(rows, cols, |_, _| {
        k ^= k << 13;
        k ^= k >> 7;
        k ^= k << 17;
        (k >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn discovered_plans_validate(layout in layout_strategy()) {
        prop_assert!(validate_layout(&layout).is_empty());
        match discover_chain(&layout) {
            ChainDiscovery::Plan(plan) => {
                prop_assert!(validate_chain(&layout, &plan).is_empty(), "{:?}", plan);
                prop_assert!(connected(&layout));
            }
            ChainDiscovery::NoValidChain { .. } => prop_assert!(!connected(&layout)),
        }
    }

    #[test]
    fn shared_set_is_inside_every_group(layout in layout_strategy()) {
        let t = layout.shared_feature_set();
        for g in 0..layout.num_groups() {
            let v = layout.observed_features(g).unwrap();
            prop_assert!(t.is_subset(&v));
            prop_assert!(t.len() <= v.len());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn ic_recovers_exact_rank(rank in 1usize..6, seed in 0u64..1000) {
        let x = mul(random_matrix(40, rank, seed).as_ref(), random_matrix(rank, 30, seed + 1).as_ref());
        prop_assert_eq!(rank_select_ic(x.as_ref(), 8).unwrap(), rank);
    }

    #[test]
    fn subspace_distance_bounded(seed in 0u64..1000) {
        let a = orthonormal_basis(random_matrix(10, 3, seed).as_ref()).unwrap();
        let b = orthonormal_basis(random_matrix(10, 3, seed + 5).as_ref()).unwrap();
        let d = subspace_distance(a.as_ref(), b.as_ref()).unwrap();
        prop_assert!(d >= 0.0 && d <= (6f64).sqrt() + 1e-12);
    }
}
