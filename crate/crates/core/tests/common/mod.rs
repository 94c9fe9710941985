//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use mobility_pricing::choice::ServiceType;
use mobility_pricing::fleet::{Fleet, Position, StopKind, Vehicle};
use mobility_pricing::network::{NetworkState, NodeId};
use mobility_pricing::pricing::{PricingInstance, PricingOption, Sensitivity};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GOLDEN: f64 = 0.618_033_988_749_894_8;

/// Maximises a unimodal function on [lo, hi].
pub fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let mut a = hi - GOLDEN * (hi - lo);
    let mut b = lo + GOLDEN * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    while hi - lo > tol {
        if fa < fb {
            lo = a;
            a = b;
            fa = fb;
            b = lo + GOLDEN * (hi - lo);
            fb = f(b);
        } else {
            hi = b;
            b = a;
            fb = fa;
            a = hi - GOLDEN * (hi - lo);
            fa = f(a);
        }
    }
    let x = 0.5 * (lo + hi);
    (x, f(x))
}

/// Utility shift written out from the choice model, not taken from the library.
fn shift(sens: (f64, f64), delta: f64) -> f64 {
    if delta < 0.0 {
        -sens.0 * delta
    } else {
        -sens.1 * delta
    }
}

/// Plain data copy of a pricing problem.
#[derive(Debug, Clone)]
pub struct RawInstance {
    /// (base utility, margin, discount sensitivity, surge sensitivity)
    pub options: Vec<(f64, f64, f64, f64)>,
    pub v0: f64,
}

impl RawInstance {
    pub fn objective(&self, deltas: &[f64]) -> f64 {
        let mut num = 0.0;
        let mut den = self.v0;
        for (&(u, m, e1, e2), &d) in self.options.iter().zip(deltas) {
            let w = (u + shift((e1, e2), d)).exp();
            num += w * (m + d);
            den += w;
        }
        num / den
    }

    /// h(z), with the inner maximisation done per option by search.
    pub fn h(&self, z: f64) -> f64 {
        let inner: f64 = self
            .options
            .iter()
            .map(|&(u, m, e1, e2)| {
                let g = |d: f64| (u + shift((e1, e2), d)).exp() * (m - z + d);
                golden_max(g, -40.0, 40.0, 1e-12).1
            })
            .sum();
        inner - self.v0 * z
    }

    pub fn to_instance(&self) -> PricingInstance {
        let options = self
            .options
            .iter()
            .enumerate()
            .map(|(j, &(u, m, _, _))| PricingOption {
                service: if j == 0 {
                    ServiceType::Single
                } else {
                    ServiceType::Shared
                },
                fare: m + 1.0,
                cost: 1.0,
                travel_time: 10.0,
                base_utility: u,
                opportunity_cost: 0.0,
            })
            .collect();
        let sens = |j: usize| {
            self.options.get(j).map_or(
                Sensitivity {
                    discount: 1.0,
                    surge: 2.0,
                },
                |o| Sensitivity {
                    discount: o.2,
                    surge: o.3,
                },
            )
        };
        PricingInstance::new(options, self.v0, sens(0), sens(1)).expect("valid instance")
    }
}

/// Random instance with n options, wide enough to reach both discounts and surges.
pub fn random_instance(rng: &mut ChaCha8Rng, n: usize) -> RawInstance {
    let options = (0..n)
        .map(|_| {
            let fare = rng.random_range(0.5..5.0);
            let cost = rng.random_range(0.0..fare);
            let opp = rng.random_range(-2.0..2.0);
            let e1 = rng.random_range(0.3..1.5);
            let e2 = e1 + rng.random_range(0.1..2.0);
            (rng.random_range(-2.0..3.0), fare - cost - opp, e1, e2)
        })
        .collect();
    RawInstance {
        options,
        v0: rng.random_range(0.5..20.0),
    }
}

pub fn instances(seed: u64, count: usize) -> Vec<RawInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|i| random_instance(&mut rng, 1 + i % 2)).collect()
}

/// Brute force: grid over δ ∈ [−10, 10] at step 1e-3, golden-section
/// refinement around the best cell. For two options the second coordinate is
/// maximised by golden section for every grid value of the first.
pub fn brute_force_z(inst: &RawInstance) -> f64 {
    let step = 1e-3;
    let grid = (0..=20_000).map(|i| -10.0 + i as f64 * step);
    match inst.options.len() {
        1 => {
            let f = |d: f64| inst.objective(&[d]);
            let best = grid
                .map(|d| (d, f(d)))
                .fold((0.0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
            let (_, refined) = golden_max(f, best.0 - step, best.0 + step, 1e-12);
            refined.max(best.1)
        }
        2 => {
            let inner = |d1: f64| golden_max(|d2| inst.objective(&[d1, d2]), -10.0, 10.0, 1e-9).1;
            let best = grid
                .map(|d| (d, inner(d)))
                .fold((0.0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
            let (_, refined) = golden_max(inner, best.0 - step, best.0 + step, 1e-12);
            refined.max(best.1)
        }
        _ => unimplemented!("oracle covers one or two options"),
    }
}

/// Minimum travel time over every simple path, by depth-first enumeration.
pub fn exhaustive_min_time(net: &NetworkState, o: NodeId, d: NodeId) -> (f64, usize) {
    let n = net.grid().node_count();
    let mut out: Vec<Vec<(NodeId, f64)>> = vec![Vec::new(); n];
    for (id, l) in net.links().iter().enumerate() {
        out[l.from].push((l.to, net.link_state(id).travel_time));
    }
    let mut visited = vec![false; n];
    let mut best = f64::INFINITY;
    let mut paths = 0;
    fn dfs(
        at: NodeId,
        d: NodeId,
        t: f64,
        out: &[Vec<(NodeId, f64)>],
        visited: &mut [bool],
        best: &mut f64,
        paths: &mut usize,
    ) {
        if at == d {
            *paths += 1;
            *best = best.min(t);
            return;
        }
        visited[at] = true;
        for &(next, w) in &out[at] {
            if !visited[next] {
                dfs(next, d, t + w, out, visited, best, paths);
            }
        }
        visited[at] = false;
    }
    dfs(o, d, 0.0, &out, &mut visited, &mut best, &mut paths);
    if o == d {
        best = 0.0;
    }
    (best, paths)
}

/// Where a vehicle can next change route, with the distance and time to get there.
pub fn vehicle_anchor(v: &Vehicle, net: &NetworkState) -> (NodeId, f64, f64) {
    match v.position {
        Position::Node(n) => (n, 0.0, 0.0),
        Position::Link { link, progress_km } => {
            let l = net.link(link);
            let rest = l.length_km - progress_km;
            (l.to, rest, rest / net.link_state(link).speed * 60.0)
        }
    }
}

fn leg(net: &NetworkState, a: NodeId, b: NodeId) -> (f64, f64) {
    if a == b {
        return (0.0, 0.0);
    }
    let p = net.shortest_path(a, b);
    (p.distance, p.travel_time)
}

/// The cheapest feasible shared insertion over the whole fleet, by
/// enumerating every pickup/dropoff position pair of every eligible vehicle.
/// Returns (vehicle, added km) or None when nothing is feasible.
pub fn oracle_shared_insertion(
    fleet: &Fleet,
    net: &NetworkState,
    origin: NodeId,
    dest: NodeId,
) -> Option<(usize, f64)> {
    let rules = fleet.rules;
    let (direct_km, direct_min) = leg(net, origin, dest);
    let mut best: Option<(usize, f64)> = None;
    for v in &fleet.vehicles {
        let single_busy = !v.parties.is_empty() && v.parties.iter().any(|p| p.service == ServiceType::Single);
        if single_busy || v.parties.len() >= rules.capacity {
            continue;
        }
        let (anchor, off_km, off_min) = vehicle_anchor(v, net);
        let pickup_km = off_km + leg(net, anchor, origin).0;
        let limit = if v.parties.is_empty() {
            rules.idle_pickup_km
        } else {
            rules.shared_pickup_km
        };
        if pickup_km > limit + 1e-9 {
            continue;
        }
        // (request, node, is_pickup)
        let current: Vec<(u64, NodeId, bool)> = v
            .stops
            .iter()
            .map(|s| (s.request, s.node, s.kind == StopKind::Pickup))
            .collect();
        let route_km = |stops: &[(u64, NodeId, bool)]| -> Vec<(f64, f64)> {
            let mut at = anchor;
            let (mut km, mut min) = (off_km, off_min);
            stops
                .iter()
                .map(|&(_, node, _)| {
                    let (dk, dm) = leg(net, at, node);
                    km += dk;
                    min += dm;
                    at = node;
                    (km, min)
                })
                .collect()
        };
        let base = if current.is_empty() {
            0.0
        } else {
            route_km(&current).last().unwrap().0
        };
        let new_id = u64::MAX;
        for i in 0..=current.len() {
            for j in i + 1..=current.len() + 1 {
                let mut stops = current.clone();
                stops.insert(i, (new_id, origin, true));
                stops.insert(j, (new_id, dest, false));
                let cum = route_km(&stops);
                let mut ok = true;
                let mut check = |ride_km: f64, ride_min: f64, dk: f64, dm: f64| {
                    if ride_km - dk > rules.max_detour_km + 1e-9 || ride_min - dm > rules.max_detour_min + 1e-9 {
                        ok = false;
                    }
                };
                check(cum[j].0 - cum[i].0, cum[j].1 - cum[i].1, direct_km, direct_min);
                for p in &v.parties {
                    let drop = stops.iter().position(|s| s.0 == p.request && !s.2).unwrap();
                    match stops.iter().position(|s| s.0 == p.request && s.2) {
                        Some(pick) => check(
                            cum[drop].0 - cum[pick].0,
                            cum[drop].1 - cum[pick].1,
                            p.direct_km,
                            p.direct_min,
                        ),
                        None => check(
                            p.ride_km + cum[drop].0,
                            p.ride_min + cum[drop].1,
                            p.direct_km,
                            p.direct_min,
                        ),
                    }
                }
                if ok {
                    let added = cum.last().unwrap().0 - base;
                    if best.is_none_or(|b| added < b.1 - 1e-9) {
                        best = Some((v.id, added));
                    }
                }
            }
        }
    }
    best
}
