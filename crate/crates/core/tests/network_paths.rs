mod common;

use common::exhaustive_min_time;
use mobility_pricing::network::{BlendParams, FlowDensityParams, GridSpec, NetworkState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn congested(rows: usize, cols: usize, seed: u64) -> NetworkState {
    let mut net = NetworkState::build(GridSpec::new(rows, cols, 0.8).unwrap(), FlowDensityParams::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bg: Vec<f64> = (0..net.link_count()).map(|_| rng.random_range(0.0..4.0)).collect();
    net.update(&bg, &[], &BlendParams::default()).unwrap();
    net
}

#[test]
fn shortest_paths_match_exhaustive_enumeration() {
    for (rows, cols) in [(2, 2), (2, 3), (3, 3), (3, 4), (4, 4)] {
        for seed in 0..3 {
            let net = congested(rows, cols, seed);
            let n = net.grid().node_count();
            for o in 0..n {
                for d in 0..n {
                    let (best, count) = exhaustive_min_time(&net, o, d);
                    let p = net.shortest_path(o, d);
                    assert!(count >= 1);
                    assert!(
                        (p.travel_time - best).abs() < 1e-9,
                        "{rows}x{cols} {o}->{d}: {} vs {best}",
                        p.travel_time
                    );
                    if o == d {
                        assert!(p.nodes.is_empty());
                        continue;
                    }
                    assert_eq!((p.nodes[0], *p.nodes.last().unwrap()), (o, d));
                    let (mut km, mut min) = (0.0, 0.0);
                    for w in p.nodes.windows(2) {
                        let l = net.find_link(w[0], w[1]).expect("consecutive nodes are linked");
                        km += net.link(l).length_km;
                        min += net.link_state(l).travel_time;
                    }
                    assert!((km - p.distance).abs() < 1e-9 && (min - p.travel_time).abs() < 1e-9);
                }
            }
        }
    }
}

#[test]
fn corner_to_corner_path_count_on_four_by_four() {
    let net = congested(4, 4, 0);
    assert_eq!(exhaustive_min_time(&net, 0, 15).1, 184);
}

#[test]
fn tree_agrees_with_point_queries() {
    let net = congested(4, 4, 9);
    for o in 0..16 {
        let tree = net.tree(o);
        for d in 0..16 {
            let p = net.shortest_path(o, d);
            assert_eq!(tree.time_to(d), p.travel_time);
            assert_eq!(tree.distance_to(d), p.distance);
        }
    }
}
