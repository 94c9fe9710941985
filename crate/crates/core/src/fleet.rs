//! Vehicles, trip offers and per-minute vehicle movement.
//!
//! A vehicle either idles at a node or works through an ordered list of
//! pickup/dropoff stops. Paths to the next stop are planned on the travel-time
//! snapshot current at confirmation and at every stop event.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::choice::ServiceType;
use crate::demand::Request;
use crate::error::{Error, Result};
use crate::network::{LinkId, NetworkState, NodeId};

const EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tariff {
    /// $ per trip
    pub base_fare: f64,
    /// $ per km
    pub distance_fare: f64,
    /// $ per minute
    pub time_fare: f64,
    /// Shared fare as a fraction of the single fare.
    pub shared_ratio: f64,
    /// Fuel cost, $ per km driven.
    pub fuel_cost: f64,
}

impl Default for Tariff {
    fn default() -> Self {
        Tariff {
            base_fare: 1.0,
            distance_fare: 0.25,
            time_fare: 0.01,
            shared_ratio: 0.6,
            fuel_cost: 0.07,
        }
    }
}

impl Tariff {
    pub fn validate(&self) -> Result<()> {
        let all = [self.base_fare, self.distance_fare, self.time_fare, self.fuel_cost];
        if all.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::config("tariff entries must be non-negative"));
        }
        if !(self.shared_ratio > 0.0 && self.shared_ratio <= 1.0) {
            return Err(Error::config("tariff.shared_ratio must lie in (0, 1]"));
        }
        Ok(())
    }

    pub fn single_fare(&self, distance_km: f64, minutes: f64) -> f64 {
        self.base_fare + self.distance_fare * distance_km + self.time_fare * minutes
    }

    pub fn fare(&self, service: ServiceType, distance_km: f64, minutes: f64) -> f64 {
        match service {
            ServiceType::Single => self.single_fare(distance_km, minutes),
            ServiceType::Shared => self.single_fare(distance_km, minutes) * self.shared_ratio,
        }
    }

    pub fn cost(&self, distance_km: f64) -> f64 {
        self.fuel_cost * distance_km
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OperationRules {
    /// Maximum parties assigned to one shared vehicle.
    pub capacity: usize,
    /// Pickup radius for empty vehicles, km.
    pub idle_pickup_km: f64,
    /// Pickup radius for non-empty shared vehicles, km.
    pub shared_pickup_km: f64,
    pub max_detour_km: f64,
    pub max_detour_min: f64,
}

impl Default for OperationRules {
    fn default() -> Self {
        OperationRules {
            capacity: 3,
            idle_pickup_km: 5.0,
            shared_pickup_km: 2.0,
            max_detour_km: 2.0,
            max_detour_min: 5.0,
        }
    }
}

impl OperationRules {
    pub fn validate(&self) -> Result<()> {
        if self.capacity == 0 {
            return Err(Error::config("fleet.capacity must be at least 1"));
        }
        let lims = [
            self.idle_pickup_km,
            self.shared_pickup_km,
            self.max_detour_km,
            self.max_detour_min,
        ];
        if lims.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::config("pickup and detour limits must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Position {
    Node(NodeId),
    Link { link: LinkId, progress_km: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopKind {
    Pickup,
    Dropoff,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Stop {
    pub node: NodeId,
    pub request: u64,
    pub kind: StopKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VehicleService {
    Idle,
    Single,
    Shared,
}

/// A confirmed trip and everything booked or observed about it.
#[derive(Debug, Clone, PartialEq)]
pub struct Party {
    pub request: u64,
    pub vehicle: usize,
    pub service: ServiceType,
    pub origin: NodeId,
    pub destination: NodeId,
    pub confirm_time: f64,
    pub pickup_time: Option<f64>,
    pub dropoff_time: Option<f64>,
    /// Standard fare f.
    pub fare: f64,
    /// Fare adjustment δ.
    pub adjustment: f64,
    /// Cost c attributed at booking.
    pub booked_cost: f64,
    /// Opportunity cost charged when pricing (zero for myopic pricing).
    pub opportunity_cost: f64,
    /// Direct shortest-path distance and time at booking.
    pub direct_km: f64,
    pub direct_min: f64,
    /// Estimates at booking: arrival time T minus request time, and pickup wait.
    pub est_travel_min: f64,
    pub est_pickup_min: f64,
    pub est_detour_km: f64,
    pub est_detour_min: f64,
    /// Distance and time travelled on board so far.
    pub ride_km: f64,
    pub ride_min: f64,
}

impl Party {
    pub fn booked_fare(&self) -> f64 {
        self.fare + self.adjustment
    }

    pub fn booked_profit(&self) -> f64 {
        self.fare + self.adjustment - self.booked_cost
    }

    fn on_board(&self) -> bool {
        self.pickup_time.is_some() && self.dropoff_time.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vehicle {
    pub id: usize,
    pub position: Position,
    pub service: VehicleService,
    pub parties: Vec<Party>,
    pub stops: VecDeque<Stop>,
    path: VecDeque<LinkId>,
    pub odometer_km: f64,
    pub busy_min: f64,
}

/// Where planning starts for a vehicle: the node it is at or heading to, plus
/// what is left of its current link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Anchor {
    pub node: NodeId,
    pub offset_km: f64,
    pub offset_min: f64,
}

impl Vehicle {
    pub fn new(id: usize, node: NodeId) -> Self {
        Vehicle {
            id,
            position: Position::Node(node),
            service: VehicleService::Idle,
            parties: Vec::new(),
            stops: VecDeque::new(),
            path: VecDeque::new(),
            odometer_km: 0.0,
            busy_min: 0.0,
        }
    }

    pub fn is_idle(&self) -> bool {
        self.service == VehicleService::Idle
    }

    pub fn has_spare_capacity(&self, rules: &OperationRules) -> bool {
        match self.service {
            VehicleService::Idle => true,
            VehicleService::Shared => self.parties.len() < rules.capacity,
            VehicleService::Single => false,
        }
    }

    pub fn anchor(&self, net: &NetworkState) -> Anchor {
        match self.position {
            Position::Node(node) => Anchor {
                node,
                offset_km: 0.0,
                offset_min: 0.0,
            },
            Position::Link { link, progress_km } => {
                let l = net.link(link);
                let rest = (l.length_km - progress_km).max(0.0);
                Anchor {
                    node: l.to,
                    offset_km: rest,
                    offset_min: rest / net.link_state(link).speed * 60.0,
                }
            }
        }
    }

    /// Planar position in km.
    pub fn location(&self, net: &NetworkState) -> (f64, f64) {
        match self.position {
            Position::Node(n) => net.grid().coords(n),
            Position::Link { link, progress_km } => {
                let l = net.link(link);
                let (ax, ay) = net.grid().coords(l.from);
                let (bx, by) = net.grid().coords(l.to);
                let f = (progress_km / l.length_km).clamp(0.0, 1.0);
                (ax + (bx - ax) * f, ay + (by - ay) * f)
            }
        }
    }

    /// Link the vehicle occupies, if it is between nodes.
    pub fn current_link(&self) -> Option<LinkId> {
        match self.position {
            Position::Link { link, .. } => Some(link),
            Position::Node(_) => None,
        }
    }

    fn replan(&mut self, net: &NetworkState) {
        self.path.clear();
        if let Some(stop) = self.stops.front() {
            let from = self.anchor(net).node;
            if from != stop.node {
                self.path = net.tree(from).links_to(stop.node, net.links()).into();
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TripOption {
    pub vehicle: usize,
    pub service: ServiceType,
    /// Standard fare f.
    pub fare: f64,
    /// Cost c attributed to the trip.
    pub cost: f64,
    /// Estimated arrival at the destination minus the request time, minutes.
    pub travel_time: f64,
    pub pickup_time: f64,
    pub pickup_km: f64,
    /// Direct trip distance and time.
    pub trip_km: f64,
    pub trip_min: f64,
    pub detour_km: f64,
    pub detour_min: f64,
    /// Largest detour over every party on the vehicle after insertion.
    pub max_party_detour_km: f64,
    pub max_party_detour_min: f64,
    /// Extra vehicle distance caused by serving the request.
    pub added_km: f64,
    pub stops: Vec<Stop>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeasibleSet {
    pub single: Option<TripOption>,
    pub shared: Option<TripOption>,
}

impl FeasibleSet {
    pub fn is_empty(&self) -> bool {
        self.single.is_none() && self.shared.is_none()
    }

    pub fn options(&self) -> impl Iterator<Item = &TripOption> {
        self.single.iter().chain(self.shared.iter())
    }

    pub fn get(&self, service: ServiceType) -> Option<&TripOption> {
        match service {
            ServiceType::Single => self.single.as_ref(),
            ServiceType::Shared => self.shared.as_ref(),
        }
    }
}

/// Facts about the requested trip that every option shares.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectTrip {
    pub distance_km: f64,
    pub minutes: f64,
}

impl DirectTrip {
    pub fn of(request: &Request, net: &NetworkState) -> Self {
        let tree = net.tree(request.origin);
        DirectTrip {
            distance_km: tree.distance_to(request.destination),
            minutes: tree.time_to(request.destination),
        }
    }
}

struct Rider {
    request: u64,
    picked: bool,
    ride_km: f64,
    ride_min: f64,
    direct_km: f64,
    direct_min: f64,
}

struct ScheduleEval {
    total_km: f64,
    cumulative: Vec<(f64, f64)>,
    max_detour_km: f64,
    max_detour_min: f64,
}

/// Cumulative (km, min) from the anchor to each stop.
fn cumulative(net: &NetworkState, anchor: &Anchor, stops: &[Stop]) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(stops.len());
    let (mut km, mut min) = (anchor.offset_km, anchor.offset_min);
    let mut at = anchor.node;
    for s in stops {
        let tree = net.tree(at);
        km += tree.distance_to(s.node);
        min += tree.time_to(s.node);
        out.push((km, min));
        at = s.node;
    }
    out
}

fn evaluate(net: &NetworkState, anchor: &Anchor, stops: &[Stop], riders: &[Rider]) -> ScheduleEval {
    let cum = cumulative(net, anchor, stops);
    let mut max_km = f64::NEG_INFINITY;
    let mut max_min = f64::NEG_INFINITY;
    for r in riders {
        let find = |kind| stops.iter().position(|s| s.request == r.request && s.kind == kind);
        let Some(drop) = find(StopKind::Dropoff) else {
            continue;
        };
        let (km, min) = if r.picked {
            (r.ride_km + cum[drop].0, r.ride_min + cum[drop].1)
        } else {
            let pick = find(StopKind::Pickup).expect("unpicked rider has a pickup stop");
            (cum[drop].0 - cum[pick].0, cum[drop].1 - cum[pick].1)
        };
        max_km = max_km.max(km - r.direct_km);
        max_min = max_min.max(min - r.direct_min);
    }
    ScheduleEval {
        total_km: cum.last().map_or(anchor.offset_km, |c| c.0),
        cumulative: cum,
        max_detour_km: max_km.max(0.0),
        max_detour_min: max_min.max(0.0),
    }
}

fn riders_of(vehicle: &Vehicle) -> Vec<Rider> {
    vehicle
        .parties
        .iter()
        .map(|p| Rider {
            request: p.request,
            picked: p.pickup_time.is_some(),
            ride_km: p.ride_km,
            ride_min: p.ride_min,
            direct_km: p.direct_km,
            direct_min: p.direct_min,
        })
        .collect()
}

/// Booking-time facts about a confirmed trip.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Booking {
    pub request: u64,
    pub vehicle: usize,
    pub service: ServiceType,
    pub booked_fare: f64,
    pub booked_cost: f64,
    pub direct_km: f64,
}

/// Result of re-checking the constraints right after a confirmation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfirmAudit {
    pub parties: usize,
    pub max_detour_km: f64,
    pub max_detour_min: f64,
    pub violation: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fleet {
    pub vehicles: Vec<Vehicle>,
    pub rules: OperationRules,
    /// Parties that have been dropped off.
    pub completed: Vec<Party>,
}

impl Fleet {
    pub fn new(start_nodes: &[NodeId], rules: OperationRules) -> Self {
        Fleet {
            vehicles: start_nodes
                .iter()
                .enumerate()
                .map(|(i, &n)| Vehicle::new(i, n))
                .collect(),
            rules,
            completed: Vec::new(),
        }
    }

    pub fn all_idle(&self) -> bool {
        self.vehicles.iter().all(Vehicle::is_idle)
    }

    pub fn occupied_links(&self) -> Vec<LinkId> {
        self.vehicles.iter().filter_map(Vehicle::current_link).collect()
    }

    pub fn active_parties(&self) -> impl Iterator<Item = &Party> {
        self.vehicles.iter().flat_map(|v| v.parties.iter())
    }

    pub fn total_distance_km(&self) -> f64 {
        self.vehicles.iter().map(|v| v.odometer_km).sum()
    }

    pub fn total_busy_min(&self) -> f64 {
        self.vehicles.iter().map(|v| v.busy_min).sum()
    }

    /// The best single offer and the best shared offer for a request.
    pub fn build_feasible_set(&self, request: &Request, net: &NetworkState, tariff: &Tariff) -> FeasibleSet {
        self.build_feasible_set_for(request, net, tariff, true, true)
    }

    /// Like [`Fleet::build_feasible_set`], skipping service types the caller
    /// will not offer.
    pub fn build_feasible_set_for(
        &self,
        request: &Request,
        net: &NetworkState,
        tariff: &Tariff,
        want_single: bool,
        want_shared: bool,
    ) -> FeasibleSet {
        let direct = DirectTrip::of(request, net);
        let mut single: Option<TripOption> = None;
        let mut shared: Option<TripOption> = None;
        for v in &self.vehicles {
            if !v.has_spare_capacity(&self.rules) {
                continue;
            }
            let anchor = v.anchor(net);
            let to_origin = net.tree(anchor.node);
            let pickup_km = anchor.offset_km + to_origin.distance_to(request.origin);
            let pickup_min = anchor.offset_min + to_origin.time_to(request.origin);
            let limit = if v.is_idle() {
                self.rules.idle_pickup_km
            } else {
                self.rules.shared_pickup_km
            };
            if pickup_km > limit + EPS {
                continue;
            }
            if want_single && v.is_idle() {
                let cand = self.single_option(v, request, &direct, pickup_km, pickup_min, tariff);
                let better = single.as_ref().is_none_or(|b| cand.pickup_time < b.pickup_time);
                if better {
                    single = Some(cand);
                }
            }
            if want_shared {
                if let Some(cand) = self.shared_option(v, &anchor, request, &direct, pickup_km, net, tariff) {
                    let better = shared.as_ref().is_none_or(|b| {
                        cand.added_km < b.added_km - EPS
                            || ((cand.added_km - b.added_km).abs() <= EPS && cand.travel_time < b.travel_time)
                    });
                    if better {
                        shared = Some(cand);
                    }
                }
            }
        }
        FeasibleSet { single, shared }
    }

    /// Single-service offer from an idle vehicle: drive to the origin, then
    /// straight to the destination.
    pub fn estimate_single(
        &self,
        vehicle: usize,
        request: &Request,
        net: &NetworkState,
        tariff: &Tariff,
    ) -> Option<TripOption> {
        let v = &self.vehicles[vehicle];
        if !v.is_idle() {
            return None;
        }
        let anchor = v.anchor(net);
        let tree = net.tree(anchor.node);
        let direct = DirectTrip::of(request, net);
        Some(self.single_option(
            v,
            request,
            &direct,
            anchor.offset_km + tree.distance_to(request.origin),
            anchor.offset_min + tree.time_to(request.origin),
            tariff,
        ))
    }

    fn single_option(
        &self,
        v: &Vehicle,
        request: &Request,
        direct: &DirectTrip,
        pickup_km: f64,
        pickup_min: f64,
        tariff: &Tariff,
    ) -> TripOption {
        let added = pickup_km + direct.distance_km;
        TripOption {
            vehicle: v.id,
            service: ServiceType::Single,
            fare: tariff.fare(ServiceType::Single, direct.distance_km, direct.minutes),
            cost: tariff.cost(added),
            travel_time: pickup_min + direct.minutes,
            pickup_time: pickup_min,
            pickup_km,
            trip_km: direct.distance_km,
            trip_min: direct.minutes,
            detour_km: 0.0,
            detour_min: 0.0,
            max_party_detour_km: 0.0,
            max_party_detour_min: 0.0,
            added_km: added,
            stops: vec![
                Stop {
                    node: request.origin,
                    request: request.id,
                    kind: StopKind::Pickup,
                },
                Stop {
                    node: request.destination,
                    request: request.id,
                    kind: StopKind::Dropoff,
                },
            ],
        }
    }

    /// Cheapest feasible insertion of the request into the vehicle's stop list.
    #[allow(clippy::too_many_arguments)]
    fn shared_option(
        &self,
        v: &Vehicle,
        anchor: &Anchor,
        request: &Request,
        direct: &DirectTrip,
        pickup_km: f64,
        net: &NetworkState,
        tariff: &Tariff,
    ) -> Option<TripOption> {
        let current: Vec<Stop> = v.stops.iter().copied().collect();
        let base_km = cumulative(net, anchor, &current)
            .last()
            .map_or(anchor.offset_km, |c| c.0);
        let base_km = if current.is_empty() { 0.0 } else { base_km };
        let mut riders = riders_of(v);
        riders.push(Rider {
            request: request.id,
            picked: false,
            ride_km: 0.0,
            ride_min: 0.0,
            direct_km: direct.distance_km,
            direct_min: direct.minutes,
        });
        let pickup = Stop {
            node: request.origin,
            request: request.id,
            kind: StopKind::Pickup,
        };
        let dropoff = Stop {
            node: request.destination,
            request: request.id,
            kind: StopKind::Dropoff,
        };
        let mut best: Option<(f64, f64, Vec<Stop>, ScheduleEval, usize, usize)> = None;
        let k = current.len();
        for i in 0..=k {
            for j in (i + 1)..=(k + 1) {
                let mut stops = current.clone();
                stops.insert(i, pickup);
                stops.insert(j, dropoff);
                let eval = evaluate(net, anchor, &stops, &riders);
                if eval.max_detour_km > self.rules.max_detour_km + EPS
                    || eval.max_detour_min > self.rules.max_detour_min + EPS
                {
                    continue;
                }
                let added = eval.total_km - base_km;
                let arrival = eval.cumulative[j].1;
                let better = best
                    .as_ref()
                    .is_none_or(|b| added < b.0 - EPS || ((added - b.0).abs() <= EPS && arrival < b.1));
                if better {
                    best = Some((added, arrival, stops, eval, i, j));
                }
            }
        }
        let (added, arrival, stops, eval, i, j) = best?;
        let ride_km = eval.cumulative[j].0 - eval.cumulative[i].0;
        let ride_min = eval.cumulative[j].1 - eval.cumulative[i].1;
        Some(TripOption {
            vehicle: v.id,
            service: ServiceType::Shared,
            fare: tariff.fare(ServiceType::Shared, direct.distance_km, direct.minutes),
            cost: tariff.cost(added),
            travel_time: arrival,
            pickup_time: eval.cumulative[i].1,
            pickup_km,
            trip_km: direct.distance_km,
            trip_min: direct.minutes,
            detour_km: (ride_km - direct.distance_km).max(0.0),
            detour_min: (ride_min - direct.minutes).max(0.0),
            max_party_detour_km: eval.max_detour_km,
            max_party_detour_min: eval.max_detour_min,
            added_km: added,
            stops,
        })
    }

    /// Books `option` at fare adjustment `adjustment` and re-plans the vehicle.
    pub fn confirm_trip(
        &mut self,
        request: &Request,
        option: &TripOption,
        adjustment: f64,
        opportunity_cost: f64,
        net: &NetworkState,
    ) -> (Booking, ConfirmAudit) {
        let rules = self.rules;
        let v = &mut self.vehicles[option.vehicle];
        v.parties.push(Party {
            request: request.id,
            vehicle: v.id,
            service: option.service,
            origin: request.origin,
            destination: request.destination,
            confirm_time: request.time as f64,
            pickup_time: None,
            dropoff_time: None,
            fare: option.fare,
            adjustment,
            booked_cost: option.cost,
            opportunity_cost,
            direct_km: option.trip_km,
            direct_min: option.trip_min,
            est_travel_min: option.travel_time,
            est_pickup_min: option.pickup_time,
            est_detour_km: option.detour_km,
            est_detour_min: option.detour_min,
            ride_km: 0.0,
            ride_min: 0.0,
        });
        v.stops = option.stops.iter().copied().collect();
        v.service = match option.service {
            ServiceType::Single => VehicleService::Single,
            ServiceType::Shared => VehicleService::Shared,
        };
        v.replan(net);

        let anchor = v.anchor(net);
        let stops: Vec<Stop> = v.stops.iter().copied().collect();
        let eval = evaluate(net, &anchor, &stops, &riders_of(v));
        let over_capacity = match v.service {
            VehicleService::Single => v.parties.len() > 1,
            _ => v.parties.len() > rules.capacity,
        };
        let audit = ConfirmAudit {
            parties: v.parties.len(),
            max_detour_km: eval.max_detour_km,
            max_detour_min: eval.max_detour_min,
            violation: over_capacity
                || (option.service == ServiceType::Shared
                    && (eval.max_detour_km > rules.max_detour_km + 1e-6
                        || eval.max_detour_min > rules.max_detour_min + 1e-6)),
        };
        let booking = Booking {
            request: request.id,
            vehicle: v.id,
            service: option.service,
            booked_fare: option.fare + adjustment,
            booked_cost: option.cost,
            direct_km: option.trip_km,
        };
        (booking, audit)
    }

    /// Moves every working vehicle for `dt` minutes starting at minute `now`,
    /// firing pickups and dropoffs as stop nodes are reached.
    pub fn advance(&mut self, net: &NetworkState, now: f64, dt: f64) {
        for v in &mut self.vehicles {
            advance_vehicle(v, &mut self.completed, net, now, dt);
        }
    }
}

fn fire_stops(v: &mut Vehicle, completed: &mut Vec<Party>, node: NodeId, at: f64) -> bool {
    let mut fired = false;
    while v.stops.front().is_some_and(|s| s.node == node) {
        let stop = v.stops.pop_front().expect("checked non-empty");
        fired = true;
        let Some(idx) = v.parties.iter().position(|p| p.request == stop.request) else {
            continue;
        };
        match stop.kind {
            StopKind::Pickup => v.parties[idx].pickup_time = Some(at),
            StopKind::Dropoff => {
                let mut p = v.parties.remove(idx);
                p.dropoff_time = Some(at);
                completed.push(p);
            }
        }
    }
    fired
}

fn advance_vehicle(v: &mut Vehicle, completed: &mut Vec<Party>, net: &NetworkState, now: f64, dt: f64) {
    if v.is_idle() {
        return;
    }
    let mut used = 0.0;
    loop {
        match v.position {
            Position::Node(node) => {
                if fire_stops(v, completed, node, now + used) {
                    if v.stops.is_empty() {
                        v.service = VehicleService::Idle;
                        v.path.clear();
                        return;
                    }
                    v.replan(net);
                }
                if dt - used <= EPS {
                    return;
                }
                let Some(link) = v.path.pop_front() else {
                    // next stop is here; handled on the next pass
                    if v.stops.front().is_some_and(|s| s.node == node) {
                        continue;
                    }
                    v.replan(net);
                    if v.path.is_empty() {
                        return;
                    }
                    continue;
                };
                debug_assert_eq!(net.link(link).from, node);
                v.position = Position::Link { link, progress_km: 0.0 };
            }
            Position::Link { link, progress_km } => {
                let l = net.link(link);
                let speed = net.link_state(link).speed;
                let rest = (l.length_km - progress_km).max(0.0);
                let need = rest / speed * 60.0;
                let budget = dt - used;
                let (km, min) = if need <= budget + EPS {
                    v.position = Position::Node(l.to);
                    (rest, need.min(budget))
                } else {
                    let km = speed * budget / 60.0;
                    v.position = Position::Link {
                        link,
                        progress_km: progress_km + km,
                    };
                    (km, budget)
                };
                used += min;
                v.odometer_km += km;
                v.busy_min += min;
                for p in v.parties.iter_mut().filter(|p| p.on_board()) {
                    p.ride_km += km;
                    p.ride_min += min;
                }
                if matches!(v.position, Position::Link { .. }) {
                    return;
                }
            }
        }
    }
}
