mod common;

use mated_crt::brownian::{sample_disk_excursion, ExcursionMethod, PathParams};
use mated_crt::electrical::Network;
use mated_crt::map::MatedCrtMap;
use mated_crt::tutte::{harmonicity_residual, hitting_distribution_net, tutte_embed, tutte_embed_net};
use num_complex::Complex64;
use proptest::prelude::*;

fn disk_map(n: usize, seed: u64) -> MatedCrtMap {
    let (path, _) =
        sample_disk_excursion(&PathParams::disk(1.0, n, seed).with_substeps(4), ExcursionMethod::local()).unwrap();
    MatedCrtMap::from_path(&path).unwrap()
}

/// The network with every vertex label shifted by `s` modulo `n`.
fn relabel(net: &Network, s: usize) -> Network {
    let n = net.n();
    Network::new(n, net.edges().iter().map(|&(u, v, c)| ((u + s) % n, (v + s) % n, c)).collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn hitting_distribution_matches_forward_solves(seed in 0u64..10_000, n in 4usize..=12) {
        let map = disk_map(n, seed);
        let net = Network::from_map(&map);
        let flags = map.boundary().unwrap().to_vec();
        for root in 0..map.n() {
            let hits = hitting_distribution_net(&net, &flags, root).unwrap();
            let oracle = common::hit_probabilities(&net, &flags, root);
            let total: f64 = hits.iter().map(|h| h.1).sum();
            prop_assert!((total - 1.0).abs() < 1e-9);
            for (a, b) in hits.iter().zip(&oracle) {
                prop_assert_eq!(a.0, b.0);
                prop_assert!((a.1 - b.1).abs() < 1e-9);
            }
        }
    }

    /// Cumulative arcs start at the smallest boundary label; a cyclic relabelling
    /// moves that start, which must only rotate the embedding.
    #[test]
    fn cyclic_relabelling_rotates_the_embedding(seed in 0u64..10_000, shift in 1usize..200) {
        let map = disk_map(200, seed);
        let net = Network::from_map(&map);
        let flags = map.boundary().unwrap().to_vec();
        let n = map.n();
        let Some(root) = (0..n).find(|&v| !flags[v]) else { return Ok(()) };
        let base = tutte_embed_net(&net, &flags, root).unwrap();
        let shifted_flags: Vec<bool> = (0..n).map(|v| flags[(v + n - shift) % n]).collect();
        let moved = tutte_embed_net(&relabel(&net, shift), &shifted_flags, (root + shift) % n).unwrap();
        let b0 = base.boundary_order[0];
        let rot: Complex64 = moved.positions[(b0 + shift) % n] / base.positions[b0];
        prop_assert!((rot.norm() - 1.0).abs() < 1e-9);
        for v in 0..n {
            prop_assert!((moved.positions[(v + shift) % n] - rot * base.positions[v]).norm() < 1e-8);
        }
    }
}

#[test]
fn sampled_embedding_is_harmonic_with_boundary_on_circle() {
    for (k, n) in [300usize, 2000].into_iter().enumerate() {
        let (path, _) =
            sample_disk_excursion(&PathParams::disk(1.2, n, 70 + k as u64), ExcursionMethod::local()).unwrap();
        let map = MatedCrtMap::from_path(&path).unwrap();
        let root = (n / 2..n).find(|&v| !map.is_boundary(v)).unwrap();
        let emb = tutte_embed(&map, root).unwrap();
        let net = Network::from_map(&map);
        assert!(harmonicity_residual(&emb, &net) < 1e-8);
        for &b in &emb.boundary_order {
            assert!((emb.positions[b].norm() - 1.0).abs() < 1e-9);
        }
        assert!(emb.positions.iter().all(|z| z.norm() <= 1.0 + 1e-9));
        assert!((emb.hitting_cdf.last().unwrap() - 1.0).abs() < 1e-9);
    }
}
