//! The minute-by-minute episode loop and its metrics.
//!
//! Each step samples new requests, builds and prices offers for them one at a
//! time, samples the traveller's choice, books accepted trips, moves the fleet
//! and finally refreshes link speeds. Demand, choices and the initial fleet
//! placement draw from separate random streams so that different strategies
//! see the same requests under the same seed.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::choice::{
    choice_probabilities, outside_utility, sample_choice, AlternativeUtilities, Choice, ChoiceParams, ServiceType,
};
use crate::demand::{scale_background, CongestionLevel, DemandSpec, Request};
use crate::error::{Error, Result};
use crate::fleet::{DirectTrip, FeasibleSet, Fleet, OperationRules, Party, Tariff};
use crate::network::{BackgroundProfile, BlendParams, FlowDensityParams, GridSpec, NetworkState};
use crate::policy::{compute_features, decide_offer, DecisionContext, FeatureScale, Strategy};
use crate::pricing::SolverConfig;

const DEMAND_STREAM: u64 = 0;
const CHOICE_STREAM: u64 = 1;
const PLACEMENT_STREAM: u64 = 2;

/// Which density weights link travel times in the congestion metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CongestionWeight {
    #[default]
    Blended,
    Background,
}

/// Everything an episode needs. Demand and background are shared between
/// episodes run in parallel.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub grid: GridSpec,
    pub flow: FlowDensityParams,
    pub blend: BlendParams,
    pub demand: Arc<DemandSpec>,
    base_background: Arc<BackgroundProfile>,
    background: Arc<BackgroundProfile>,
    pub congestion: CongestionLevel,
    pub tariff: Tariff,
    pub choice: ChoiceParams,
    pub rules: OperationRules,
    pub fleet_size: usize,
    pub horizon: usize,
    pub feature_radius_km: f64,
    pub solver: SolverConfig,
    pub adjustment_bounds: Option<(f64, f64)>,
    pub congestion_weight: CongestionWeight,
    /// Minutes allowed after the horizon for trips in progress to finish.
    pub drain_limit: usize,
    pub feature_scale: FeatureScale,
}

/// Optional knobs with defaults matching the command-line tool.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioParts {
    pub name: String,
    pub grid: GridSpec,
    pub flow: FlowDensityParams,
    pub blend: BlendParams,
    pub demand: DemandSpec,
    /// Background before the congestion factor is applied.
    pub background: BackgroundProfile,
    pub congestion: CongestionLevel,
    pub tariff: Tariff,
    pub choice: ChoiceParams,
    pub rules: OperationRules,
    pub fleet_size: usize,
    pub feature_radius_km: f64,
    pub solver: SolverConfig,
    pub adjustment_bounds: Option<(f64, f64)>,
    pub congestion_weight: CongestionWeight,
    pub drain_limit: usize,
}

impl Scenario {
    pub fn new(parts: ScenarioParts) -> Result<Self> {
        parts.grid.validate()?;
        parts.flow.validate()?;
        parts.blend.validate()?;
        parts.tariff.validate()?;
        parts.choice.validate()?;
        parts.rules.validate()?;
        if parts.fleet_size == 0 {
            return Err(Error::config("fleet size must be positive"));
        }
        if parts.demand.node_count() != parts.grid.node_count() {
            return Err(Error::config(format!(
                "demand covers {} nodes, grid has {}",
                parts.demand.node_count(),
                parts.grid.node_count()
            )));
        }
        if parts.background.link_count() != parts.grid.link_count() {
            return Err(Error::config(format!(
                "background covers {} links, grid has {}",
                parts.background.link_count(),
                parts.grid.link_count()
            )));
        }
        if !(parts.feature_radius_km > 0.0) {
            return Err(Error::config("feature radius must be positive"));
        }
        if !(parts.congestion.factor() >= 0.0) {
            return Err(Error::config("congestion factor must be non-negative"));
        }
        if let Some((lo, hi)) = parts.adjustment_bounds {
            if !(lo <= 0.0 && 0.0 <= hi) {
                return Err(Error::config("adjustment bounds must contain 0"));
            }
        }
        let horizon = parts.demand.horizon();
        if horizon == 0 {
            return Err(Error::config("horizon must be positive"));
        }
        let feature_scale = FeatureScale::for_scenario(&parts.demand, parts.fleet_size, parts.flow.free_flow_speed);
        let background = scale_background(&parts.background, parts.congestion);
        Ok(Scenario {
            name: parts.name,
            grid: parts.grid,
            flow: parts.flow,
            blend: parts.blend,
            demand: Arc::new(parts.demand),
            base_background: Arc::new(parts.background),
            background: Arc::new(background),
            congestion: parts.congestion,
            tariff: parts.tariff,
            choice: parts.choice,
            rules: parts.rules,
            fleet_size: parts.fleet_size,
            horizon,
            feature_radius_km: parts.feature_radius_km,
            solver: parts.solver,
            adjustment_bounds: parts.adjustment_bounds,
            congestion_weight: parts.congestion_weight,
            drain_limit: parts.drain_limit,
            feature_scale,
        })
    }

    /// The effective background after the congestion factor.
    pub fn background(&self) -> &BackgroundProfile {
        &self.background
    }

    pub fn with_congestion(&self, level: CongestionLevel) -> Scenario {
        let mut s = self.clone();
        s.congestion = level;
        s.background = Arc::new(scale_background(&self.base_background, level));
        s
    }

    /// The same scenario with a different demand spec.
    pub fn with_demand(&self, demand: DemandSpec) -> Result<Scenario> {
        if demand.node_count() != self.grid.node_count() || demand.horizon() == 0 {
            return Err(Error::config("demand does not match the grid"));
        }
        let mut s = self.clone();
        s.horizon = demand.horizon();
        s.feature_scale = FeatureScale::for_scenario(&demand, s.fleet_size, s.flow.free_flow_speed);
        s.demand = Arc::new(demand);
        Ok(s)
    }

    /// Label combining the scenario name and congestion level.
    pub fn setting(&self) -> String {
        format!("{}/{}", self.name, self.congestion.label())
    }
}

/// Per-day outcome of one episode.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EpisodeResult {
    pub profit: f64,
    pub revenue: f64,
    pub cost: f64,
    /// Σ (f + δ − c) with c as attributed at booking.
    pub booked_margin: f64,
    pub requests: usize,
    pub single: usize,
    pub shared: usize,
    pub original: usize,
    pub cancelled: usize,
    pub serviced_passengers: usize,
    /// Confirmed parties not picked up within the horizon.
    pub drained: usize,
    /// Parties still unfinished when the drain limit ran out.
    pub unfinished: usize,
    pub fleet_distance_km: f64,
    pub fleet_time_min: f64,
    pub trip_distance_km: f64,
    pub awt_min: Option<f64>,
    pub capacity: Option<f64>,
    pub t_ave: Option<f64>,
    pub delta_d_km: f64,
    pub mean_adjustment: Option<f64>,
    pub violations: usize,
}

pub const RESULT_FIELDS: [&str; 21] = [
    "profit",
    "revenue",
    "cost",
    "booked_margin",
    "requests",
    "single",
    "shared",
    "original",
    "cancelled",
    "serviced_passengers",
    "drained",
    "unfinished",
    "fleet_distance_km",
    "fleet_time_min",
    "trip_distance_km",
    "awt_min",
    "capacity",
    "t_ave",
    "delta_d_km",
    "mean_adjustment",
    "violations",
];

impl EpisodeResult {
    /// Field values in [`RESULT_FIELDS`] order, absent values as `None`.
    pub fn values(&self) -> [Option<f64>; 21] {
        let n = |v: usize| Some(v as f64);
        [
            Some(self.profit),
            Some(self.revenue),
            Some(self.cost),
            Some(self.booked_margin),
            n(self.requests),
            n(self.single),
            n(self.shared),
            n(self.original),
            n(self.cancelled),
            n(self.serviced_passengers),
            n(self.drained),
            n(self.unfinished),
            Some(self.fleet_distance_km),
            Some(self.fleet_time_min),
            Some(self.trip_distance_km),
            self.awt_min,
            self.capacity,
            self.t_ave,
            Some(self.delta_d_km),
            self.mean_adjustment,
            n(self.violations),
        ]
    }

    pub fn get(&self, field: &str) -> Option<f64> {
        RESULT_FIELDS
            .iter()
            .position(|f| *f == field)
            .and_then(|i| self.values()[i])
    }

    fn from_values(v: &[Option<f64>]) -> std::result::Result<Self, String> {
        let req = |i: usize| v[i].ok_or_else(|| format!("missing value for {}", RESULT_FIELDS[i]));
        let count = |i: usize| req(i).map(|x| x as usize);
        Ok(EpisodeResult {
            profit: req(0)?,
            revenue: req(1)?,
            cost: req(2)?,
            booked_margin: req(3)?,
            requests: count(4)?,
            single: count(5)?,
            shared: count(6)?,
            original: count(7)?,
            cancelled: count(8)?,
            serviced_passengers: count(9)?,
            drained: count(10)?,
            unfinished: count(11)?,
            fleet_distance_km: req(12)?,
            fleet_time_min: req(13)?,
            trip_distance_km: req(14)?,
            awt_min: v[15],
            capacity: v[16],
            t_ave: v[17],
            delta_d_km: req(18)?,
            mean_adjustment: v[19],
            violations: count(20)?,
        })
    }
}

/// One CSV row: an episode result with its setting, strategy and seed.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub setting: String,
    pub strategy: String,
    pub seed: u64,
    pub result: EpisodeResult,
}

impl EpisodeRecord {
    pub fn csv_header() -> String {
        format!("setting,strategy,seed,{}", RESULT_FIELDS.join(","))
    }

    pub fn to_csv_row(&self) -> String {
        let mut row = format!("{},{},{}", self.setting, self.strategy, self.seed);
        for v in self.result.values() {
            row.push(',');
            if let Some(x) = v {
                let _ = write!(row, "{x}");
            }
        }
        row
    }

    pub fn to_csv(records: &[EpisodeRecord]) -> String {
        let mut out = Self::csv_header();
        out.push('\n');
        for r in records {
            out.push_str(&r.to_csv_row());
            out.push('\n');
        }
        out
    }

    pub fn parse_csv(text: &str, origin: &Path) -> Result<Vec<EpisodeRecord>> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        match lines.next() {
            Some((_, h)) if h.trim() == Self::csv_header() => {}
            Some((i, _)) => {
                return Err(Error::parse(
                    origin,
                    i + 1,
                    "unexpected header; not an episode result file",
                ))
            }
            None => return Err(Error::parse(origin, 1, "empty result file")),
        }
        let mut out = Vec::new();
        for (i, line) in lines {
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 3 + RESULT_FIELDS.len() {
                return Err(Error::parse(
                    origin,
                    i + 1,
                    format!("expected {} columns, found {}", 3 + RESULT_FIELDS.len(), cols.len()),
                ));
            }
            let seed = cols[2]
                .trim()
                .parse::<u64>()
                .map_err(|e| Error::parse(origin, i + 1, format!("seed: {e}")))?;
            let mut vals = Vec::with_capacity(RESULT_FIELDS.len());
            for (k, c) in cols[3..].iter().enumerate() {
                let c = c.trim();
                vals.push(if c.is_empty() {
                    None
                } else {
                    Some(
                        c.parse::<f64>()
                            .map_err(|e| Error::parse(origin, i + 1, format!("{}: {e}", RESULT_FIELDS[k])))?,
                    )
                });
            }
            let result = EpisodeResult::from_values(&vals).map_err(|m| Error::parse(origin, i + 1, m))?;
            out.push(EpisodeRecord {
                setting: cols[0].to_string(),
                strategy: cols[1].to_string(),
                seed,
                result,
            });
        }
        Ok(out)
    }

    pub fn read_csv(path: &Path) -> Result<Vec<EpisodeRecord>> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Self::parse_csv(&text, path)
    }
}

/// Counts of the four possible request outcomes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct OutcomeCounts {
    pub single: usize,
    pub shared: usize,
    pub original: usize,
    pub cancelled: usize,
}

impl OutcomeCounts {
    pub fn total(&self) -> usize {
        self.single + self.shared + self.original + self.cancelled
    }
}

/// ρ = (M_s + M_sh + M_o) / total; absent without requests.
pub fn compute_capacity(c: &OutcomeCounts) -> Option<f64> {
    let total = c.total();
    (total > 0).then(|| (c.single + c.shared + c.original) as f64 / total as f64)
}

/// Running sums for the density-weighted mean per-km link travel time.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CongestionAccumulator {
    weighted: f64,
    weight: f64,
}

impl CongestionAccumulator {
    pub fn add(&mut self, density: f64, minutes_per_km: f64) {
        self.weighted += density * minutes_per_km;
        self.weight += density;
    }

    pub fn add_network(&mut self, net: &NetworkState, by: CongestionWeight) {
        for (l, s) in net.links().iter().zip(net.link_states()) {
            let k = match by {
                CongestionWeight::Blended => s.blended_density,
                CongestionWeight::Background => s.background_density,
            };
            self.add(k, s.travel_time / l.length_km);
        }
    }

    pub fn value(&self) -> Option<f64> {
        (self.weight > 0.0).then(|| self.weighted / self.weight)
    }
}

/// T_ave over `(density, minutes per km)` samples.
pub fn compute_congestion(samples: impl IntoIterator<Item = (f64, f64)>) -> Option<f64> {
    let mut acc = CongestionAccumulator::default();
    for (k, t) in samples {
        acc.add(k, t);
    }
    acc.value()
}

/// Δ_d = Σ direct trip distance − Σ fleet distance.
pub fn compute_sharing_efficiency(trip_distances_km: impl IntoIterator<Item = f64>, fleet_distance_km: f64) -> f64 {
    trip_distances_km.into_iter().sum::<f64>() - fleet_distance_km
}

/// Mean confirmation-to-pickup wait over parties picked up no later than
/// `cutoff`, together with the number excluded.
pub fn compute_awt<'a>(parties: impl IntoIterator<Item = &'a Party>, cutoff: f64) -> (Option<f64>, usize) {
    let mut sum = 0.0;
    let mut n = 0usize;
    let mut excluded = 0usize;
    for p in parties {
        match p.pickup_time {
            Some(t) if t <= cutoff => {
                sum += t - p.confirm_time;
                n += 1;
            }
            _ => excluded += 1,
        }
    }
    ((n > 0).then(|| sum / n as f64), excluded)
}

/// Per-step aggregates for the optional trace file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepTrace {
    pub t: usize,
    pub requests: usize,
    pub offered: usize,
    pub booked: usize,
    pub busy_vehicles: usize,
    pub mean_speed: f64,
    pub t_ave: Option<f64>,
    pub revenue: f64,
}

impl StepTrace {
    pub fn csv(trace: &[StepTrace]) -> String {
        let mut out = String::from("t,requests,offered,booked,busy_vehicles,mean_speed,t_ave,revenue\n");
        for s in trace {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                s.t,
                s.requests,
                s.offered,
                s.booked,
                s.busy_vehicles,
                s.mean_speed,
                s.t_ave.map(|v| v.to_string()).unwrap_or_default(),
                s.revenue
            );
        }
        out
    }
}

/// Writes parties as a per-trip CSV log.
pub fn trip_log_csv(parties: &[Party]) -> String {
    let mut out = String::from(
        "request,vehicle,service,origin,destination,confirm_time,pickup_time,dropoff_time,fare,adjustment,\
         booked_cost,opportunity_cost,direct_km,direct_min,est_travel_min,est_pickup_min,est_detour_km,\
         est_detour_min,ride_km,ride_min\n",
    );
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for p in parties {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            p.request,
            p.vehicle,
            p.service.as_str(),
            p.origin,
            p.destination,
            p.confirm_time,
            opt(p.pickup_time),
            opt(p.dropoff_time),
            p.fare,
            p.adjustment,
            p.booked_cost,
            p.opportunity_cost,
            p.direct_km,
            p.direct_min,
            p.est_travel_min,
            p.est_pickup_min,
            p.est_detour_km,
            p.est_detour_min,
            p.ride_km,
            p.ride_min
        );
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunOptions {
    pub record_trace: bool,
}

/// Checks made while the episode ran.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EpisodeAudit {
    pub max_parties: usize,
    pub max_detour_km: f64,
    pub max_detour_min: f64,
    pub violations: usize,
    /// Σ booked (f + δ) over every confirmed party.
    pub booked_revenue: f64,
    /// Distance summed over vehicle odometers.
    pub odometer_km: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeOutput {
    pub result: EpisodeResult,
    /// Every confirmed party, finished or not, in confirmation order.
    pub trips: Vec<Party>,
    pub trace: Vec<StepTrace>,
    pub audit: EpisodeAudit,
}

/// Mutable state of a running episode.
pub struct EpisodeState<'a> {
    scenario: &'a Scenario,
    strategy: &'a Strategy,
    pub network: NetworkState,
    pub fleet: Fleet,
    demand_rng: ChaCha8Rng,
    choice_rng: ChaCha8Rng,
    next_id: u64,
    pub counts: OutcomeCounts,
    pub revenue: f64,
    pub booked_margin: f64,
    adjustment_sum: f64,
    congestion: CongestionAccumulator,
    pub audit: EpisodeAudit,
    confirm_order: Vec<u64>,
    trace: Option<Vec<StepTrace>>,
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

impl<'a> EpisodeState<'a> {
    pub fn new(scenario: &'a Scenario, strategy: &'a Strategy, seed: u64, opts: RunOptions) -> Result<Self> {
        let mut network = NetworkState::build(scenario.grid, scenario.flow)?;
        network.update(scenario.background.at(0), &[], &scenario.blend)?;
        let mut placement = stream(seed, PLACEMENT_STREAM);
        let nodes = scenario.grid.node_count();
        let starts: Vec<usize> = (0..scenario.fleet_size)
            .map(|_| placement.random_range(0..nodes))
            .collect();
        let starts = if matches!(strategy, Strategy::None) {
            &[][..]
        } else {
            &starts[..]
        };
        Ok(EpisodeState {
            scenario,
            strategy,
            network,
            fleet: Fleet::new(starts, scenario.rules),
            demand_rng: stream(seed, DEMAND_STREAM),
            choice_rng: stream(seed, CHOICE_STREAM),
            next_id: 0,
            counts: OutcomeCounts::default(),
            revenue: 0.0,
            booked_margin: 0.0,
            adjustment_sum: 0.0,
            congestion: CongestionAccumulator::default(),
            audit: EpisodeAudit::default(),
            confirm_order: Vec::new(),
            trace: opts.record_trace.then(Vec::new),
        })
    }

    /// Handles one request: offer, choice and booking. Returns the choice made
    /// and the number of options offered.
    pub fn process_request(&mut self, request: &Request) -> Result<(Choice, usize)> {
        let sc = self.scenario;
        let fs = if matches!(self.strategy, Strategy::None) {
            FeasibleSet::default()
        } else {
            self.fleet.build_feasible_set_for(
                request,
                &self.network,
                &sc.tariff,
                self.strategy.offers(ServiceType::Single),
                self.strategy.offers(ServiceType::Shared),
            )
        };
        let direct = DirectTrip::of(request, &self.network);
        let outside = outside_utility(direct.minutes, sc.tariff.cost(direct.distance_km), &sc.choice);
        let (net, fleet) = (&self.network, &self.fleet);
        let features = || {
            let x = compute_features(
                net,
                &sc.demand,
                fleet,
                request.origin,
                request.destination,
                request.time,
                sc.feature_radius_km,
            );
            sc.feature_scale.apply(&x)
        };
        let ctx = DecisionContext {
            choice: &sc.choice,
            rejection_weight: outside.rejection_weight,
            solver: &sc.solver,
            bounds: sc.adjustment_bounds,
            features: &features,
        };
        let offer = decide_offer(self.strategy, &fs, &ctx)?;
        let probs = choice_probabilities(&AlternativeUtilities {
            offers: offer.options.iter().map(|o| o.utility).collect(),
            original: outside.original,
        });
        let choice = Choice::from_index(sample_choice(&probs, &mut self.choice_rng), offer.options.len());
        match choice {
            Choice::Offer(j) => {
                let chosen = &offer.options[j];
                let (booking, audit) = self.fleet.confirm_trip(
                    request,
                    &chosen.option,
                    chosen.adjustment,
                    chosen.opportunity_cost,
                    &self.network,
                );
                match booking.service {
                    ServiceType::Single => self.counts.single += 1,
                    ServiceType::Shared => self.counts.shared += 1,
                }
                self.revenue += booking.booked_fare;
                self.booked_margin += booking.booked_fare - booking.booked_cost;
                self.adjustment_sum += chosen.adjustment;
                self.confirm_order.push(booking.request);
                let a = &mut self.audit;
                a.booked_revenue += booking.booked_fare;
                a.max_parties = a.max_parties.max(audit.parties);
                if booking.service == ServiceType::Shared {
                    a.max_detour_km = a.max_detour_km.max(audit.max_detour_km);
                    a.max_detour_min = a.max_detour_min.max(audit.max_detour_min);
                }
                if audit.violation {
                    a.violations += 1;
                    log::warn!("request {}: constraint violation after confirmation", request.id);
                }
            }
            Choice::Original => self.counts.original += 1,
            Choice::Cancel => self.counts.cancelled += 1,
        }
        Ok((choice, offer.options.len()))
    }

    /// One minute: requests, movement, network refresh.
    pub fn step(&mut self, t: usize) -> Result<()> {
        let sc = self.scenario;
        let mut step_acc = CongestionAccumulator::default();
        step_acc.add_network(&self.network, sc.congestion_weight);
        self.congestion.weighted += step_acc.weighted;
        self.congestion.weight += step_acc.weight;

        let revenue_before = self.revenue;
        let requests = sc.demand.sample_requests(t, self.next_id, &mut self.demand_rng);
        self.next_id += requests.len() as u64;
        let mut offered = 0;
        let mut booked = 0;
        for r in &requests {
            let (choice, n) = self.process_request(r)?;
            offered += n;
            booked += matches!(choice, Choice::Offer(_)) as usize;
        }

        self.fleet.advance(&self.network, t as f64, 1.0);
        self.network
            .update(sc.background.at(t + 1), &self.fleet.occupied_links(), &sc.blend)?;

        if let Some(trace) = &mut self.trace {
            let states = self.network.link_states();
            trace.push(StepTrace {
                t,
                requests: requests.len(),
                offered,
                booked,
                busy_vehicles: self.fleet.vehicles.iter().filter(|v| !v.is_idle()).count(),
                mean_speed: states.iter().map(|s| s.speed).sum::<f64>() / states.len() as f64,
                t_ave: step_acc.value(),
                revenue: self.revenue - revenue_before,
            });
        }
        Ok(())
    }

    /// Lets trips in progress finish under frozen link speeds.
    fn drain(&mut self) {
        let h = self.scenario.horizon;
        for t in h..h + self.scenario.drain_limit {
            if self.fleet.all_idle() {
                break;
            }
            self.fleet.advance(&self.network, t as f64, 1.0);
        }
    }

    fn finish(mut self) -> EpisodeOutput {
        self.drain();
        let sc = self.scenario;
        let mut trips: Vec<Party> = self
            .fleet
            .completed
            .iter()
            .chain(self.fleet.active_parties())
            .cloned()
            .collect();
        let order: std::collections::HashMap<u64, usize> =
            self.confirm_order.iter().enumerate().map(|(i, &r)| (r, i)).collect();
        trips.sort_by_key(|p| order[&p.request]);

        let fleet_distance = self.fleet.total_distance_km();
        let cost = sc.tariff.cost(fleet_distance);
        let (awt, drained) = compute_awt(&trips, sc.horizon as f64);
        let trip_distance: f64 = trips.iter().map(|p| p.direct_km).sum();
        let serviced = self.counts.single + self.counts.shared;
        self.audit.odometer_km = fleet_distance;
        let result = EpisodeResult {
            profit: self.revenue - cost,
            revenue: self.revenue,
            cost,
            booked_margin: self.booked_margin,
            requests: self.counts.total(),
            single: self.counts.single,
            shared: self.counts.shared,
            original: self.counts.original,
            cancelled: self.counts.cancelled,
            serviced_passengers: serviced,
            drained,
            unfinished: self.fleet.active_parties().count(),
            fleet_distance_km: fleet_distance,
            fleet_time_min: self.fleet.total_busy_min(),
            trip_distance_km: trip_distance,
            awt_min: awt,
            capacity: compute_capacity(&self.counts),
            t_ave: self.congestion.value(),
            delta_d_km: compute_sharing_efficiency(trips.iter().map(|p| p.direct_km), fleet_distance),
            mean_adjustment: (serviced > 0).then(|| self.adjustment_sum / serviced as f64),
            violations: self.audit.violations,
        };
        EpisodeOutput {
            result,
            trips,
            trace: self.trace.unwrap_or_default(),
            audit: self.audit,
        }
    }
}

pub fn run_episode(scenario: &Scenario, strategy: &Strategy, seed: u64) -> Result<EpisodeResult> {
    Ok(run_episode_detailed(scenario, strategy, seed, RunOptions::default())?.result)
}

pub fn run_episode_detailed(
    scenario: &Scenario,
    strategy: &Strategy,
    seed: u64,
    opts: RunOptions,
) -> Result<EpisodeOutput> {
    let mut state = EpisodeState::new(scenario, strategy, seed, opts)?;
    for t in 0..scenario.horizon {
        state.step(t)?;
    }
    Ok(state.finish())
}
