mod common;

use mated_crt::electrical::{
    dirichlet_energy, effective_resistance, exit_moment_check, expected_exit_time, green_function, harmonic_extension,
    sandwich_check, unit_current_flow, Network,
};
use mated_crt::rng::stream;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn net_strategy() -> impl Strategy<Value = (Network, u64)> {
    (2usize..=12, 0usize..16, any::<bool>(), any::<u64>()).prop_map(|(n, extra, unit, seed)| {
        let mut rng = stream(seed, "proptest/net", 0);
        (common::random_multigraph(n, extra, unit, &mut rng), seed)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn dirichlet_and_thomson((net, seed) in net_strategy()) {
        let n = net.n();
        let x = (seed % n as u64) as usize;
        let z: Vec<usize> = (0..n).filter(|&v| v != x && (v + seed as usize) % 3 != 0).collect();
        prop_assume!(!z.is_empty());
        let r = effective_resistance(&net, &[x], &z).unwrap();
        let mut bc = vec![None; n];
        bc[x] = Some(1.0);
        z.iter().for_each(|&v| bc[v] = Some(0.0));
        let f = harmonic_extension(&net, &bc).unwrap();
        prop_assert!((r * dirichlet_energy(&f, &net) - 1.0).abs() < 1e-9);
        let flow = unit_current_flow(&net, x, &z).unwrap();
        prop_assert!((flow.energy(&net) - r).abs() < 1e-9 * r.max(1.0));
        let div = flow.divergence(&net);
        prop_assert!((div[x] - 1.0).abs() < 1e-9);
        let into_z: f64 = z.iter().map(|&v| div[v]).sum();
        prop_assert!((into_z + 1.0).abs() < 1e-9);
    }

    #[test]
    fn rayleigh_monotonicity((net, seed) in net_strategy()) {
        let n = net.n();
        let (a, z) = (0, n - 1);
        let r = effective_resistance(&net, &[a], &[z]).unwrap();
        let e = (seed % net.n_edges() as u64) as usize;
        let cut = net.without_edge(e).unwrap();
        let r2 = effective_resistance(&cut, &[a], &[z]).unwrap();
        prop_assert!(r2 >= r * (1.0 - 1e-12));
    }

    #[test]
    fn exit_time_matches_absorbing_chain((net, seed) in net_strategy()) {
        let n = net.n();
        let region: Vec<usize> = (0..n).filter(|&v| (v as u64 + seed) % 4 != 0).collect();
        prop_assume!(!region.is_empty() && region.len() < n);
        let oracle = common::absorbing_exit_times(&net, &region);
        for (i, &x) in region.iter().enumerate() {
            let t = expected_exit_time(&net, &region, x).unwrap();
            prop_assert!((t - oracle[i]).abs() <= 1e-9 * oracle[i].max(1.0));
        }
    }

    #[test]
    fn second_moment_matches_chain_formula((net, seed) in net_strategy()) {
        let n = net.n();
        let region: Vec<usize> = (0..n).filter(|&v| v != (seed % n as u64) as usize).collect();
        // E[τ²] = (I − Q)⁻¹ (2t − 1) with t the mean exit times.
        let t = common::absorbing_exit_times(&net, &region);
        let p = common::transition_matrix(&net);
        let k = region.len();
        let mut m = DMatrix::<f64>::identity(k, k);
        for (i, &u) in region.iter().enumerate() {
            for (j, &v) in region.iter().enumerate() {
                m[(i, j)] -= p[(u, v)];
            }
        }
        let rhs = DVector::from_iterator(k, t.iter().map(|&x| 2.0 * x - 1.0));
        let second = m.lu().solve(&rhs).unwrap();
        for (i, &x) in region.iter().enumerate() {
            let check = exit_moment_check(&net, &region, x, 2).unwrap();
            prop_assert!((check.exact - second[i]).abs() <= 1e-8 * second[i].max(1.0));
            prop_assert!(check.exact <= check.bound * (1.0 + 1e-9));
        }
    }

    #[test]
    fn green_identity((net, seed) in net_strategy()) {
        // Σ_e c(f(u)−f(v))(g(u)−g(v)) = Σ_x f(x)·(Lg)(x), and Lg vanishes off A for harmonic g.
        let n = net.n();
        let mut rng = stream(seed, "proptest/green", 0);
        use rand::Rng;
        let f: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let bc: Vec<Option<f64>> = (0..n).map(|v| (v == 0 || v == n - 1 || v % 3 == 1).then(|| rng.random_range(-1.0..1.0))).collect();
        let g = harmonic_extension(&net, &bc).unwrap();
        let lhs: f64 = net.edges().iter().map(|&(u, v, c)| c * (f[u] - f[v]) * (g[u] - g[v])).sum();
        let lg = |x: usize| -> f64 { net.slots(x).iter().map(|s| s.conductance * (g[x] - g[s.to])).sum() };
        let rhs: f64 = (0..n).filter(|&x| bc[x].is_some()).map(|x| f[x] * lg(x)).sum();
        prop_assert!((lhs - rhs).abs() < 1e-10 * (1.0 + lhs.abs()));
    }

    #[test]
    fn resistance_sandwich_holds((net, seed) in net_strategy()) {
        let n = net.n();
        prop_assume!(n >= 3);
        let mut rng = stream(seed, "proptest/sandwich", 0);
        use rand::Rng;
        let b_len = rng.random_range(2..n);
        let a_len = rng.random_range(1..b_len);
        let verts: Vec<usize> = (0..n).collect();
        let r = sandwich_check(&net, &verts[..a_len], &verts[..b_len], 0).unwrap();
        prop_assert!(r.pass, "{:?}", r);
        if net.edges().iter().all(|e| e.2 == 1.0) {
            prop_assert!((r.delta - r.max_current).abs() < 1e-12);
        }
    }

    #[test]
    fn killed_green_function_is_symmetric((net, _) in net_strategy()) {
        // gr is the inverse of a symmetric matrix; visit counts are reversible instead
        let n = net.n();
        prop_assume!(n >= 3);
        let region: Vec<usize> = (1..n).collect();
        let rows: Vec<Vec<f64>> = region.iter().map(|&x| green_function(&net, &region, x).unwrap().gr).collect();
        for (i, &x) in region.iter().enumerate() {
            for (j, &y) in region.iter().enumerate() {
                let (a, b) = (rows[i][y], rows[j][x]);
                if a > 0.0 || b > 0.0 {
                    prop_assert!((a - b).abs() < 1e-9 * (1.0 + a.abs()), "gr({x},{y}) = {a}, gr({y},{x}) = {b}");
                    let (vx, vy) = (net.degree(y) * a, net.degree(x) * b);
                    prop_assert!((net.degree(x) * vx - net.degree(y) * vy).abs() < 1e-8 * (1.0 + vx.abs()));
                }
            }
        }
    }
}

#[test]
fn green_row_sum_is_exit_time_on_a_path() {
    // Walk on 0..=4 killed at both ends; E_2[τ] = 2·2 = 4.
    let net = Network::new(5, (1..5).map(|i| (i - 1, i, 1.0)).collect()).unwrap();
    let g = green_function(&net, &[1, 2, 3], 2).unwrap();
    assert!((g.expected_exit_time() - 4.0).abs() < 1e-12);
    assert!(g.gr.iter().all(|&v| v >= 0.0));
    assert!(g.gr[2] >= g.gr[1] && g.gr[2] >= g.gr[3]);
}

#[test]
fn disconnected_sets_have_infinite_resistance() {
    let net = Network::new(4, vec![(0, 1, 1.0), (2, 3, 1.0)]).unwrap();
    assert!(effective_resistance(&net, &[0], &[3]).unwrap().is_infinite());
}
