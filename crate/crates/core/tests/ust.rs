use std::collections::HashMap;

use mated_crt::electrical::{coupled_exit, loop_erase, walk_until, wilson_ust, Network};
use mated_crt::rng::stream;

#[test]
fn triangle_trees_are_uniform() {
    let net = Network::new(3, vec![(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)]).unwrap();
    let mut rng = stream(5, "ust/triangle", 0);
    let mut counts: HashMap<Vec<usize>, usize> = HashMap::new();
    let samples = 60_000;
    for _ in 0..samples {
        let mut t = wilson_ust(&net, 1, &mut rng).unwrap();
        t.sort_unstable();
        *counts.entry(t).or_default() += 1;
    }
    assert_eq!(counts.len(), 3);
    for &c in counts.values() {
        assert!((c as f64 / samples as f64 - 1.0 / 3.0).abs() < 0.01);
    }
}

#[test]
fn weighted_edge_inclusion_matches_kirchhoff() {
    // Path 0–1–2 closed by a heavy edge (0, 2, 4): P[edge e in tree] = c_e·R_eff(e).
    // Trees: {01,12} weight 1, {01,02} weight 4, {12,02} weight 4.
    let net = Network::new(3, vec![(0, 1, 1.0), (1, 2, 1.0), (0, 2, 4.0)]).unwrap();
    let mut rng = stream(6, "ust/weighted", 0);
    let samples = 60_000;
    let with_heavy = (0..samples).filter(|_| wilson_ust(&net, 0, &mut rng).unwrap().contains(&2)).count();
    assert!((with_heavy as f64 / samples as f64 - 8.0 / 9.0).abs() < 0.01);
}

#[test]
fn loop_erasure_is_a_simple_path() {
    let grid = Network::new(
        9,
        vec![
            (0, 1, 1.0),
            (1, 2, 1.0),
            (3, 4, 1.0),
            (4, 5, 1.0),
            (6, 7, 1.0),
            (7, 8, 1.0),
            (0, 3, 1.0),
            (3, 6, 1.0),
            (1, 4, 1.0),
            (4, 7, 1.0),
            (2, 5, 1.0),
            (5, 8, 1.0),
        ],
    )
    .unwrap();
    let mut rng = stream(7, "ust/le", 0);
    for _ in 0..500 {
        let walk = walk_until(&grid, 4, |v| v == 0 || v == 8, &mut rng);
        let le = loop_erase(&walk);
        let mut seen = le.clone();
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen.len(), le.len());
        assert_eq!(le.first(), walk.first());
        assert_eq!(le.last(), walk.last());
    }
}

#[test]
fn coupled_exits_share_marginals() {
    // On the 4-cycle with target {0, 2} the exit from 1 is uniform; coupling keeps that marginal.
    let net = Network::new(4, (0..4).map(|i| (i, (i + 1) % 4, 1.0)).collect()).unwrap();
    let mut rng = stream(8, "ust/coupled", 0);
    let runs = 40_000;
    let zero = (0..runs).filter(|_| coupled_exit(&net, &[0, 2], 1, 3, &mut rng).unwrap().exit_x == 0).count();
    assert!((zero as f64 / runs as f64 - 0.5).abs() < 0.015);
}
