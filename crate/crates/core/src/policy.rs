//! Pricing strategies and the local features behind the rollout policy.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::choice::{option_utility, ChoiceParams, ServiceType};
use crate::demand::DemandSpec;
use crate::error::{Error, Result};
use crate::fleet::{FeasibleSet, Fleet, TripOption};
use crate::network::{NetworkState, NodeId};
use crate::pricing::{solve_pricing, PricingInstance, PricingOption, Sensitivity, SolverConfig};

pub const FEATURE_NAMES: [&str; 5] = [
    "demand_origin",
    "demand_destination",
    "supply_origin",
    "inv_speed_origin",
    "inv_speed_destination",
];

/// Features around a request's origin and destination.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LocalFeatures {
    /// Outflow demand intensity near the origin, requests per minute.
    pub demand_origin: f64,
    pub demand_destination: f64,
    /// Vehicles with spare capacity near the origin.
    pub supply_origin: f64,
    /// Mean inverse link speed near the origin, h/km.
    pub inv_speed_origin: f64,
    pub inv_speed_destination: f64,
}

impl LocalFeatures {
    pub fn to_array(&self) -> [f64; 5] {
        [
            self.demand_origin,
            self.demand_destination,
            self.supply_origin,
            self.inv_speed_origin,
            self.inv_speed_destination,
        ]
    }
}

/// Divisors that bring every feature to order one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureScale {
    pub demand: f64,
    pub supply: f64,
    pub inv_speed: f64,
}

impl FeatureScale {
    pub const IDENTITY: FeatureScale = FeatureScale {
        demand: 1.0,
        supply: 1.0,
        inv_speed: 1.0,
    };

    /// Scale from the daily mean per-node outflow, the fleet size and the
    /// free-flow speed.
    pub fn for_scenario(demand: &DemandSpec, fleet_size: usize, free_flow_speed: f64) -> Self {
        let nodes = demand.node_count().max(1) as f64;
        let steps = demand.horizon().max(1) as f64;
        let mean_outflow = demand.total() / nodes / steps;
        let positive = |v: f64| if v > 0.0 && v.is_finite() { v } else { 1.0 };
        FeatureScale {
            demand: positive(mean_outflow),
            supply: positive(fleet_size as f64),
            inv_speed: positive(1.0 / free_flow_speed),
        }
    }

    pub fn apply(&self, x: &LocalFeatures) -> [f64; 5] {
        [
            x.demand_origin / self.demand,
            x.demand_destination / self.demand,
            x.supply_origin / self.supply,
            x.inv_speed_origin / self.inv_speed,
            x.inv_speed_destination / self.inv_speed,
        ]
    }
}

/// Mean of 1/speed over links whose midpoint lies within `radius_km` of `node`.
fn local_inverse_speed(net: &NetworkState, node: NodeId, radius_km: f64) -> f64 {
    let (cx, cy) = net.grid().coords(node);
    let mut sum = 0.0;
    let mut count = 0usize;
    for (id, state) in net.link_states().iter().enumerate() {
        let (x, y) = net.link_midpoint(id);
        if (x - cx).hypot(y - cy) <= radius_km + 1e-9 {
            sum += 1.0 / state.speed;
            count += 1;
        }
    }
    if count == 0 {
        1.0 / net.flow_params().free_flow_speed
    } else {
        sum / count as f64
    }
}

pub fn compute_features(
    net: &NetworkState,
    demand: &DemandSpec,
    fleet: &Fleet,
    origin: NodeId,
    destination: NodeId,
    t: usize,
    radius_km: f64,
) -> LocalFeatures {
    let grid = net.grid();
    let (ox, oy) = grid.coords(origin);
    let supply = fleet
        .vehicles
        .iter()
        .filter(|v| v.has_spare_capacity(&fleet.rules))
        .filter(|v| {
            let (x, y) = v.location(net);
            (x - ox).hypot(y - oy) <= radius_km + 1e-9
        })
        .count();
    LocalFeatures {
        demand_origin: demand.local_demand_intensity(grid, origin, t, radius_km),
        demand_destination: demand.local_demand_intensity(grid, destination, t, radius_km),
        supply_origin: supply as f64,
        inv_speed_origin: local_inverse_speed(net, origin, radius_km),
        inv_speed_destination: local_inverse_speed(net, destination, radius_km),
    }
}

/// θ: one weight vector per service type over the five features.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PolicyParams {
    pub single: [f64; 5],
    pub shared: [f64; 5],
}

impl PolicyParams {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        if values.len() != 10 {
            return Err(Error::config(format!(
                "policy needs 10 parameters, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("policy parameters must be finite"));
        }
        let mut p = PolicyParams::zero();
        p.single.copy_from_slice(&values[..5]);
        p.shared.copy_from_slice(&values[5..]);
        Ok(p)
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.single.iter().chain(self.shared.iter()).copied().collect()
    }

    pub fn weights(&self, service: ServiceType) -> &[f64; 5] {
        match service {
            ServiceType::Single => &self.single,
            ServiceType::Shared => &self.shared,
        }
    }

    pub fn header() -> String {
        let names: Vec<String> = ["single", "shared"]
            .iter()
            .flat_map(|s| FEATURE_NAMES.iter().map(move |f| format!("{s}.{f}")))
            .collect();
        names.join(",")
    }

    pub fn to_text(&self) -> String {
        let vals: Vec<String> = self.to_vec().iter().map(|v| v.to_string()).collect();
        format!("{}\n{}\n", Self::header(), vals.join(","))
    }

    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
        let (hline, header) = lines
            .next()
            .ok_or_else(|| Error::parse(origin, 1, "empty parameter file"))?;
        if header.trim() != Self::header() {
            return Err(Error::parse(
                origin,
                hline + 1,
                format!("expected header `{}`", Self::header()),
            ));
        }
        let (vline, row) = lines
            .next()
            .ok_or_else(|| Error::parse(origin, hline + 2, "missing parameter values"))?;
        let values = row
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::parse(origin, vline + 1, format!("bad number: {e}")))?;
        if let Some((extra, _)) = lines.next() {
            return Err(Error::parse(origin, extra + 1, "unexpected extra line"));
        }
        Self::from_slice(&values).map_err(|e| Error::parse(origin, vline + 1, e.to_string()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Self::parse(&text, path)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }
}

/// Â(o, X̂ | θ) on already-scaled features.
pub fn opportunity_cost(service: ServiceType, features: &[f64; 5], theta: &PolicyParams) -> f64 {
    theta.weights(service).iter().zip(features).map(|(w, x)| w * x).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub enum Strategy {
    /// Single service only, standard fares.
    Single,
    /// Shared service only, standard fares.
    Shared,
    /// Both services, standard fares.
    Both,
    /// Myopic pricing.
    Myopic,
    /// Rollout pricing with linear opportunity costs.
    Rollout(PolicyParams),
    /// No service at all.
    None,
}

/// Strategy names without parameters, as accepted on the command line.
pub const STRATEGY_NAMES: [&str; 6] = ["S", "Sh", "S+Sh", "PM", "PO", "none"];

impl Strategy {
    pub fn label(&self) -> &'static str {
        match self {
            Strategy::Single => "S",
            Strategy::Shared => "Sh",
            Strategy::Both => "S+Sh",
            Strategy::Myopic => "PM",
            Strategy::Rollout(_) => "PO",
            Strategy::None => "none",
        }
    }

    pub fn offers(&self, service: ServiceType) -> bool {
        match self {
            Strategy::Single => service == ServiceType::Single,
            Strategy::Shared => service == ServiceType::Shared,
            Strategy::None => false,
            _ => true,
        }
    }

    pub fn is_pricing(&self) -> bool {
        matches!(self, Strategy::Myopic | Strategy::Rollout(_))
    }

    /// Parses a strategy name; `PO` takes its parameters from `theta`.
    pub fn from_name(name: &str, theta: Option<PolicyParams>) -> Result<Self> {
        Ok(match name.parse::<StrategyName>()? {
            StrategyName(Strategy::Rollout(_)) => {
                Strategy::Rollout(theta.ok_or_else(|| Error::config("strategy PO needs policy parameters (--theta)"))?)
            }
            StrategyName(s) => s,
        })
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// A parsed strategy name; `PO` parses with zero parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyName(pub Strategy);

impl FromStr for StrategyName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let st = match s.trim().to_ascii_lowercase().as_str() {
            "s" | "single" => Strategy::Single,
            "sh" | "shared" => Strategy::Shared,
            "s+sh" | "both" => Strategy::Both,
            "pm" | "myopic" => Strategy::Myopic,
            "po" | "rollout" => Strategy::Rollout(PolicyParams::zero()),
            "none" => Strategy::None,
            other => {
                return Err(Error::config(format!(
                    "unknown strategy `{other}` (expected one of {})",
                    STRATEGY_NAMES.join(", ")
                )))
            }
        };
        Ok(StrategyName(st))
    }
}

/// One option presented to the traveller.
#[derive(Debug, Clone, PartialEq)]
pub struct OfferedOption {
    pub option: TripOption,
    pub adjustment: f64,
    pub opportunity_cost: f64,
    /// Utility including the adjustment.
    pub utility: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Offer {
    pub options: Vec<OfferedOption>,
    /// Expected priced margin z*, zero for basic strategies.
    pub expected_value: f64,
}

impl Offer {
    pub fn is_empty(&self) -> bool {
        self.options.is_empty()
    }
}

/// Inputs a strategy may consult beyond the feasible set.
pub struct DecisionContext<'a> {
    pub choice: &'a ChoiceParams,
    /// V_0 for this request.
    pub rejection_weight: f64,
    pub solver: &'a SolverConfig,
    pub bounds: Option<(f64, f64)>,
    /// Scaled local features; evaluated only by the rollout policy.
    pub features: &'a dyn Fn() -> [f64; 5],
}

pub fn decide_offer(strategy: &Strategy, feasible: &FeasibleSet, ctx: &DecisionContext<'_>) -> Result<Offer> {
    let chosen: Vec<&TripOption> = feasible.options().filter(|o| strategy.offers(o.service)).collect();
    let base = |o: &TripOption| option_utility(o.service, o.fare, 0.0, o.travel_time, ctx.choice);
    if !strategy.is_pricing() || chosen.is_empty() {
        return Ok(Offer {
            options: chosen
                .into_iter()
                .map(|o| OfferedOption {
                    option: o.clone(),
                    adjustment: 0.0,
                    opportunity_cost: 0.0,
                    utility: base(o),
                })
                .collect(),
            expected_value: 0.0,
        });
    }
    let opp: Vec<f64> = match strategy {
        Strategy::Rollout(theta) => {
            let x = (ctx.features)();
            chosen.iter().map(|o| opportunity_cost(o.service, &x, theta)).collect()
        }
        _ => vec![0.0; chosen.len()],
    };
    let options = chosen
        .iter()
        .zip(&opp)
        .map(|(o, &a)| PricingOption {
            service: o.service,
            fare: o.fare,
            cost: o.cost,
            travel_time: o.travel_time,
            base_utility: base(o),
            opportunity_cost: a,
        })
        .collect();
    let sens = Sensitivity::from_choice(ctx.choice);
    let mut inst = PricingInstance::new(options, ctx.rejection_weight, sens, sens)?;
    if let Some((lo, hi)) = ctx.bounds {
        inst = inst.with_bounds(lo, hi)?;
    }
    let sol = solve_pricing(&inst, ctx.solver)?;
    Ok(Offer {
        options: chosen
            .into_iter()
            .zip(sol.adjustments.iter().zip(&opp))
            .map(|(o, (&d, &a))| OfferedOption {
                option: o.clone(),
                adjustment: d,
                opportunity_cost: a,
                utility: option_utility(o.service, o.fare, d, o.travel_time, ctx.choice),
            })
            .collect(),
        expected_value: sol.value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fleet::{OperationRules, Stop};
    use crate::network::{BlendParams, FlowDensityParams, GridSpec};

    fn net(rows: usize, cols: usize) -> NetworkState {
        NetworkState::build(GridSpec::new(rows, cols, 1.0).unwrap(), FlowDensityParams::default()).unwrap()
    }

    fn trip(service: ServiceType, fare: f64) -> TripOption {
        TripOption {
            vehicle: 0,
            service,
            fare,
            cost: 0.3,
            travel_time: 8.0,
            pickup_time: 2.0,
            pickup_km: 1.0,
            trip_km: 4.0,
            trip_min: 6.0,
            detour_km: 0.0,
            detour_min: 0.0,
            max_party_detour_km: 0.0,
            max_party_detour_min: 0.0,
            added_km: 5.0,
            stops: Vec::<Stop>::new(),
        }
    }

    fn ctx<'a>(choice: &'a ChoiceParams, solver: &'a SolverConfig, f: &'a dyn Fn() -> [f64; 5]) -> DecisionContext<'a> {
        DecisionContext {
            choice,
            rejection_weight: 6.6,
            solver,
            bounds: None,
            features: f,
        }
    }

    #[test]
    fn features_of_empty_free_flow_network() {
        let n = net(3, 3);
        let d = DemandSpec::empty(10, 9);
        let fleet = Fleet::new(&[], OperationRules::default());
        let x = compute_features(&n, &d, &fleet, 0, 8, 0, 2.0);
        assert_eq!(x.to_array(), [0.0, 0.0, 0.0, 1.0 / 60.0, 1.0 / 60.0]);
    }

    #[test]
    fn supply_counts_vehicles_within_radius() {
        // 5x5 grid: three vehicles within 2 km of node 0, one far away
        let n = net(5, 5);
        let d = DemandSpec::empty(10, 25);
        let fleet = Fleet::new(&[0, 1, 5, 24], OperationRules::default());
        let x = compute_features(&n, &d, &fleet, 0, 24, 0, 2.0);
        assert_eq!(x.supply_origin, 3.0);
    }

    #[test]
    fn inverse_speed_is_mean_of_inverses() {
        let mut n = net(2, 2);
        // links of a 2x2 grid: make half of them run at 20 km/h
        let mut bg = vec![0.0; n.link_count()];
        // speed 20 = 60·(6−k)/(5k) at k = 2.25
        for b in bg.iter_mut().take(n.link_count() / 2) {
            *b = 2.25;
        }
        let blend = BlendParams {
            market_exposure: 0.0,
            conversion_factor: 1.0,
        };
        n.update(&bg, &[], &blend).unwrap();
        let v = local_inverse_speed(&n, 0, 10.0);
        assert!((v - (1.0 / 60.0 + 1.0 / 20.0) / 2.0).abs() < 1e-12);
        assert!((v - 0.0333).abs() < 1e-4);
    }

    #[test]
    fn opportunity_cost_examples() {
        let x = [0.3, 2.0, 5.0, 0.02, 0.02];
        assert_eq!(opportunity_cost(ServiceType::Single, &x, &PolicyParams::zero()), 0.0);
        let mut th = PolicyParams::zero();
        th.single = [1.0, 0.0, 0.0, 0.0, 0.0];
        th.shared = [0.5, 0.5, -0.1, 10.0, 10.0];
        assert_eq!(opportunity_cost(ServiceType::Single, &x, &th), 0.3);
        assert!((opportunity_cost(ServiceType::Shared, &x, &th) - 1.05).abs() < 1e-12);
    }

    #[test]
    fn theta_text_round_trip() {
        let th = PolicyParams::from_slice(&[0.1, -2.5, 1e-17, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 1.0 / 3.0]).unwrap();
        let back = PolicyParams::parse(&th.to_text(), Path::new("t")).unwrap();
        assert_eq!(th, back);
        assert!(PolicyParams::parse("a,b\n1,2\n", Path::new("t")).is_err());
        let short = format!("{}\n1,2,3\n", PolicyParams::header());
        assert!(matches!(
            PolicyParams::parse(&short, Path::new("t")),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn strategy_names() {
        for name in STRATEGY_NAMES {
            let s = Strategy::from_name(name, Some(PolicyParams::zero())).unwrap();
            assert_eq!(s.label(), name);
        }
        assert!(Strategy::from_name("PO", None).is_err());
        assert!(Strategy::from_name("greedy", None).is_err());
    }

    #[test]
    fn basic_strategies_filter_and_never_adjust() {
        let choice = ChoiceParams::default();
        let solver = SolverConfig::default();
        let f = || [0.0; 5];
        let c = ctx(&choice, &solver, &f);
        let only_shared = FeasibleSet {
            single: None,
            shared: Some(trip(ServiceType::Shared, 1.4)),
        };
        assert!(decide_offer(&Strategy::Single, &only_shared, &c).unwrap().is_empty());
        let both = FeasibleSet {
            single: Some(trip(ServiceType::Single, 2.35)),
            shared: Some(trip(ServiceType::Shared, 1.41)),
        };
        for s in [Strategy::Single, Strategy::Shared, Strategy::Both] {
            let offer = decide_offer(&s, &both, &c).unwrap();
            assert!(offer.options.iter().all(|o| o.adjustment == 0.0));
            assert!(offer.options.iter().all(|o| s.offers(o.option.service)));
        }
        assert_eq!(decide_offer(&Strategy::Both, &both, &c).unwrap().options.len(), 2);
        assert!(decide_offer(&Strategy::None, &both, &c).unwrap().is_empty());
    }

    #[test]
    fn rollout_with_zero_theta_matches_myopic() {
        let choice = ChoiceParams::default();
        let solver = SolverConfig::default();
        let f = || [0.4, 1.2, 0.5, 1.0, 2.0];
        let c = ctx(&choice, &solver, &f);
        let both = FeasibleSet {
            single: Some(trip(ServiceType::Single, 2.35)),
            shared: Some(trip(ServiceType::Shared, 1.41)),
        };
        let pm = decide_offer(&Strategy::Myopic, &both, &c).unwrap();
        let po = decide_offer(&Strategy::Rollout(PolicyParams::zero()), &both, &c).unwrap();
        assert_eq!(pm, po);
        assert!(pm.expected_value > 0.0);
    }

    #[test]
    fn positive_opportunity_cost_raises_price() {
        let choice = ChoiceParams::default();
        let solver = SolverConfig::default();
        let f = || [1.0, 0.0, 0.0, 0.0, 0.0];
        let c = ctx(&choice, &solver, &f);
        let fs = FeasibleSet {
            single: Some(trip(ServiceType::Single, 2.35)),
            shared: None,
        };
        let pm = decide_offer(&Strategy::Myopic, &fs, &c).unwrap();
        let mut th = PolicyParams::zero();
        th.single[0] = 1.0;
        let po = decide_offer(&Strategy::Rollout(th), &fs, &c).unwrap();
        assert!(po.options[0].adjustment > pm.options[0].adjustment);
        assert_eq!(po.options[0].opportunity_cost, 1.0);
    }
}
