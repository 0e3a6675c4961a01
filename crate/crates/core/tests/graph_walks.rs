mod common;

use common::*;
use rand::Rng;
use tsnet::config::parse_config;
use tsnet::embed::{neighborhoods, simulate_walks, NeighborProbabilities, WalkConfig};
use tsnet::graph::*;
use tsnet::pipeline::solve;

#[test]
fn dirichlet_energy_is_twice_laplacian_form() {
    let mut rng = rng(41);
    for _ in 0..10 {
        let n = rng.random_range(3..=50);
        let g = random_strong_digraph(n, 2 * n, &mut rng);
        let p = transition_matrix(&g);
        let pi = walk_stationary_distribution(&p).unwrap();
        let l = combinatorial_laplacian(&p, pi.as_slice()).unwrap();
        for _ in 0..100 {
            let y: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let e = dirichlet_energy(&y, &p, pi.as_slice()).unwrap();
            let q = 2.0 * l.quadratic_form(&y);
            assert!(e >= 0.0);
            assert!((e - q).abs() <= 1e-10 * e.abs().max(1e-300), "{e} vs {q}");
        }
    }
}

#[test]
fn laplacian_is_symmetric_and_semidefinite() {
    let mut rng = rng(43);
    for _ in 0..5 {
        let n = rng.random_range(3..=25);
        let g = random_strong_digraph(n, n, &mut rng);
        let p = transition_matrix(&g);
        let pi = walk_stationary_distribution(&p).unwrap();
        let dense = combinatorial_laplacian(&p, pi.as_slice()).unwrap().to_dense();
        for i in 0..n {
            for j in 0..n {
                assert_eq!(dense[i][j], dense[j][i]);
            }
        }
        let eig = symmetric_eigenvalues(dense);
        assert!(eig.iter().all(|&x| x >= -1e-10), "{eig:?}");
        assert!(eig.iter().any(|&x| x.abs() < 1e-10), "constant vector is in the kernel");
    }
}

#[test]
fn directed_ring_by_hand() {
    let g = DirectedGraph::from_edges(2, vec![(0, 1, 1.0)]).unwrap();
    // current graphs forbid antiparallel pairs, so the smallest cycle has three nodes
    assert!(DirectedGraph::from_edges(2, vec![(0, 1, 1.0), (1, 0, 1.0)]).is_err());
    assert!(transition_matrix(&g).is_absorbing(1));
    let ring = DirectedGraph::from_edges(3, vec![(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0)]).unwrap();
    let p = transition_matrix(&ring);
    let pi = [1.0 / 3.0; 3];
    let l = combinatorial_laplacian(&p, &pi).unwrap().to_dense();
    assert!((l[0][0] - 1.0 / 3.0).abs() < 1e-15);
    assert!((l[0][1] + 1.0 / 6.0).abs() < 1e-15);
    assert!((l[0][2] + 1.0 / 6.0).abs() < 1e-15);
    let e = dirichlet_energy(&[1.0, 0.0, 0.0], &p, &pi).unwrap();
    assert!((e - 2.0 / 3.0).abs() < 1e-15);
    assert!(dirichlet_energy(&[2.5; 3], &p, &pi).unwrap().abs() < 1e-15);
}

#[test]
fn transition_rows_match_dense_normalisation() {
    let mut rng = rng(47);
    for _ in 0..10 {
        let n = rng.random_range(2..40);
        let g = random_dag(n, 0.2, &mut rng);
        let p = transition_matrix(&g);
        for u in 0..n {
            let total: f64 = (0..n).map(|v| g.weight(u, v)).sum();
            if total == 0.0 {
                assert!(p.is_absorbing(u));
                continue;
            }
            let s: f64 = p.row(u).map(|(_, x)| x).sum();
            assert!((s - 1.0).abs() <= 1e-12);
            for v in 0..n {
                assert!((p.get(u, v) - g.weight(u, v) / total).abs() <= 1e-15);
            }
        }
    }
}

#[test]
fn max_current_path_moves_toward_product() {
    let cfg = parse_config("model = \"double-well\"\nseed = 1\n[overrides]\nepsilon = 1.0\n").unwrap();
    let s = solve(&cfg).unwrap();
    let space = s.gen.space();
    let mut u = s.spec.reactant()[0];
    let mut steps = 0;
    while !s.spec.in_product(u) {
        let (v, _) = s.graph.out(u).max_by(|a, b| a.1.total_cmp(&b.1)).expect("path reaches the product");
        assert!(space.coords(v)[0] >= space.coords(u)[0] - 1e-12, "{:?} -> {:?}", space.coords(u), space.coords(v));
        u = v;
        steps += 1;
        assert!(steps < s.gen.len());
    }
    for (a, b, _) in s.graph.edges() {
        assert_eq!(s.graph.weight(b, a), 0.0);
    }
}

#[test]
fn edge_list_round_trip() {
    let mut rng = rng(53);
    let g = random_dag(12, 0.3, &mut rng);
    let mut buf = Vec::new();
    g.write_edge_list(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let edges: Vec<(usize, usize, f64)> = text
        .lines()
        .map(|l| {
            let f: Vec<&str> = l.split(' ').collect();
            (f[0].parse().unwrap(), f[1].parse().unwrap(), f[2].parse().unwrap())
        })
        .collect();
    assert_eq!(DirectedGraph::from_edges(12, edges).unwrap(), g);
}

fn first_steps(p: &TransitionMatrix, walks: usize, seed: u64) -> NeighborProbabilities {
    simulate_walks(p, &WalkConfig { num_walks_per_node: walks, walk_length: 1, rng_seed: seed }).unwrap()
}

#[test]
fn first_step_frequencies_are_binomial() {
    let mut rng = rng(59);
    for k in 0..10 {
        let g = random_strong_digraph(rng.random_range(3..30), 40, &mut rng);
        let p = transition_matrix(&g);
        let np = first_steps(&p, 100, k);
        for u in 0..p.num_nodes() {
            for (v, prob) in p.row(u) {
                let count = np.counts(u).iter().find(|c| c.0 == v).map_or(0, |c| c.1) as f64;
                let sd = (100.0 * prob * (1.0 - prob)).sqrt();
                assert!((count - 100.0 * prob).abs() <= 4.0 * sd + 1e-9, "{u}->{v}: {count} vs p {prob}");
            }
        }
    }
}

#[test]
fn weighted_pair_first_step() {
    let g = DirectedGraph::from_edges(3, vec![(0, 1, 3.0), (0, 2, 1.0)]).unwrap();
    let np = first_steps(&transition_matrix(&g), 100, 0);
    let c1 = np.counts(0)[0].1 as f64;
    assert!((c1 - 75.0).abs() <= 4.0 * (100.0f64 * 0.75 * 0.25).sqrt());
    assert_eq!(np.total(0), 100);
}

#[test]
fn neighbor_probabilities_are_normalised_and_deterministic() {
    let mut rng = rng(61);
    let g = random_strong_digraph(30, 30, &mut rng);
    let p = transition_matrix(&g);
    let cfg = WalkConfig { rng_seed: 9, ..WalkConfig::default() };
    let np = simulate_walks(&p, &cfg).unwrap();
    for u in 0..30 {
        let s: f64 = np.column(u).map(|(_, x)| x).sum();
        assert!((s - 1.0).abs() <= 1e-12);
        assert_eq!(np.total(u), 900);
    }
    assert_eq!(simulate_walks(&p, &cfg).unwrap(), np);
    let serial = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    assert_eq!(serial.install(|| simulate_walks(&p, &cfg).unwrap()), np);
    let other = simulate_walks(&p, &WalkConfig { rng_seed: 10, ..cfg }).unwrap();
    assert_ne!(other, np);
}

#[test]
fn walks_stop_at_sinks() {
    let g = DirectedGraph::from_edges(3, vec![(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
    let np = simulate_walks(&transition_matrix(&g), &WalkConfig::default()).unwrap();
    assert_eq!(np.counts(0), &[(1, 100), (2, 100)]);
    assert_eq!(np.total(2), 0);
}

#[test]
fn neighborhoods_filter_by_threshold() {
    let np = NeighborProbabilities::from_counts(
        4,
        vec![vec![(1, 50), (2, 30), (3, 15), (0, 5)], vec![(2, 10), (3, 90)], vec![(3, 1)], vec![]],
    )
    .unwrap();
    let n = neighborhoods(&np, 0.2).unwrap();
    assert_eq!(n, vec![vec![1, 2], vec![3], vec![3], vec![]]);
    let all = neighborhoods(&np, 0.0).unwrap();
    assert_eq!(all[0], vec![1, 2, 3]);
    let one = neighborhoods(&np, 1.0).unwrap();
    assert!(one.iter().all(|s| s.len() <= 1));
    assert!(neighborhoods(&np, 1.5).is_err());
}
