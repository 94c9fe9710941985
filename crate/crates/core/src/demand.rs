//! Trip-request generation from origin-destination intensities.
//!
//! Intensities are stored as a sum of components, each an OD distribution
//! scaled by a per-step mass: λ_{od,t} = Σ_c mass_c(t) · w_c(o, d). Synthetic
//! shapes produce a handful of full-horizon components; specs loaded from a
//! file get one component per time step.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{BackgroundProfile, GridSpec, NetworkState, NodeId};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Request {
    pub id: u64,
    pub origin: NodeId,
    pub destination: NodeId,
    /// Minute step at which the request arrives.
    pub time: usize,
}

/// Normalised distribution over OD pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct OdPattern {
    pairs: Vec<(NodeId, NodeId)>,
    weights: Vec<f64>,
    cdf: Vec<f64>,
    /// Share of the pattern leaving each node.
    outflow: Vec<f64>,
}

impl OdPattern {
    /// Builds a pattern from non-negative raw weights; pairs with `o == d` or
    /// zero weight are dropped. Returns `None` when nothing is left.
    pub fn new(node_count: usize, raw: impl IntoIterator<Item = ((NodeId, NodeId), f64)>) -> Option<Self> {
        let mut pairs = Vec::new();
        let mut weights = Vec::new();
        for ((o, d), w) in raw {
            if o != d && w > 0.0 {
                pairs.push((o, d));
                weights.push(w);
            }
        }
        let total: f64 = weights.iter().sum();
        if pairs.is_empty() || !(total > 0.0) {
            return None;
        }
        let mut outflow = vec![0.0; node_count];
        let mut cdf = Vec::with_capacity(weights.len());
        let mut acc = 0.0;
        for (w, &(o, _)) in weights.iter_mut().zip(&pairs) {
            *w /= total;
            acc += *w;
            cdf.push(acc);
            outflow[o] += *w;
        }
        if let Some(last) = cdf.last_mut() {
            *last = 1.0;
        }
        Some(OdPattern {
            pairs,
            weights,
            cdf,
            outflow,
        })
    }

    pub fn pairs(&self) -> impl Iterator<Item = ((NodeId, NodeId), f64)> + '_ {
        self.pairs.iter().copied().zip(self.weights.iter().copied())
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> (NodeId, NodeId) {
        let u: f64 = rng.random();
        let idx = self.cdf.partition_point(|&c| c <= u).min(self.pairs.len() - 1);
        self.pairs[idx]
    }
}

#[derive(Debug, Clone, PartialEq)]
struct DemandComponent {
    pattern: Arc<OdPattern>,
    start: usize,
    masses: Vec<f64>,
}

impl DemandComponent {
    fn mass_at(&self, t: usize) -> f64 {
        t.checked_sub(self.start)
            .and_then(|i| self.masses.get(i))
            .copied()
            .unwrap_or(0.0)
    }
}

/// Expected request counts λ_{od,t} over a horizon of one-minute steps.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandSpec {
    horizon: usize,
    node_count: usize,
    components: Vec<DemandComponent>,
}

impl DemandSpec {
    /// A spec with no demand at all.
    pub fn empty(horizon: usize, node_count: usize) -> Self {
        DemandSpec {
            horizon,
            node_count,
            components: Vec::new(),
        }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    /// Σ over all (o, d, t) of λ_{od,t}.
    pub fn total(&self) -> f64 {
        self.components.iter().flat_map(|c| &c.masses).sum()
    }

    pub fn step_total(&self, t: usize) -> f64 {
        self.components.iter().map(|c| c.mass_at(t)).sum()
    }

    pub fn intensity(&self, origin: NodeId, dest: NodeId, t: usize) -> f64 {
        self.components
            .iter()
            .map(|c| {
                let m = c.mass_at(t);
                if m == 0.0 {
                    return 0.0;
                }
                c.pattern
                    .pairs()
                    .find(|&(p, _)| p == (origin, dest))
                    .map_or(0.0, |(_, w)| m * w)
            })
            .sum()
    }

    /// Total expected requests per minute leaving `node` at step `t`.
    pub fn outflow(&self, node: NodeId, t: usize) -> f64 {
        self.components
            .iter()
            .map(|c| c.mass_at(t) * c.pattern.outflow[node])
            .sum()
    }

    /// Scales every intensity so the daily total becomes `total`.
    pub fn rescaled(&self, total: f64) -> Result<Self> {
        let current = self.total();
        if !(current > 0.0) || !(total > 0.0) {
            return Err(Error::config("cannot rescale an empty demand spec"));
        }
        let k = total / current;
        let mut out = self.clone();
        for c in &mut out.components {
            c.masses.iter_mut().for_each(|m| *m *= k);
        }
        Ok(out)
    }

    /// Draws the requests arriving at step `t`. Each OD cell gets an independent
    /// Poisson count; this is realised as a Poisson total per component split
    /// over its pairs, which has the same joint law. Requests come back in
    /// random order with ids counting up from `first_id`.
    pub fn sample_requests<R: Rng + ?Sized>(&self, t: usize, first_id: u64, rng: &mut R) -> Vec<Request> {
        let mut out = Vec::new();
        for c in &self.components {
            let mass = c.mass_at(t);
            if !(mass > 0.0) {
                continue;
            }
            let n = Poisson::new(mass).map(|p| p.sample(rng)).unwrap_or(0.0) as usize;
            for _ in 0..n {
                let (origin, destination) = c.pattern.draw(rng);
                out.push(Request {
                    id: 0,
                    origin,
                    destination,
                    time: t,
                });
            }
        }
        out.shuffle(rng);
        for (i, r) in out.iter_mut().enumerate() {
            r.id = first_id + i as u64;
        }
        out
    }

    /// Mean outflow intensity over all nodes within `radius_km` of `node`.
    pub fn local_demand_intensity(&self, grid: &GridSpec, node: NodeId, t: usize, radius_km: f64) -> f64 {
        let nodes = grid.nodes_within(node, radius_km);
        self.mean_outflow(&nodes, t)
    }

    pub(crate) fn mean_outflow(&self, nodes: &[NodeId], t: usize) -> f64 {
        if nodes.is_empty() {
            return 0.0;
        }
        nodes.iter().map(|&n| self.outflow(n, t)).sum::<f64>() / nodes.len() as f64
    }

    /// Serialises as `time_step,origin,destination,intensity` records.
    pub fn to_text(&self) -> String {
        let mut out = String::from("time_step,origin,destination,intensity\n");
        for t in 0..self.horizon {
            let mut cells: BTreeMap<(NodeId, NodeId), f64> = BTreeMap::new();
            for c in &self.components {
                let m = c.mass_at(t);
                if m > 0.0 {
                    for (p, w) in c.pattern.pairs() {
                        *cells.entry(p).or_default() += m * w;
                    }
                }
            }
            for ((o, d), l) in cells {
                let _ = writeln!(out, "{t},{o},{d},{l}");
            }
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }

    /// Parses the record format written by [`DemandSpec::to_text`].
    pub fn parse(text: &str, node_count: usize, horizon: usize, origin: &Path) -> Result<Self> {
        let mut by_step: BTreeMap<usize, Vec<((NodeId, NodeId), f64)>> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with("time_step") {
                continue;
            }
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            let bad = |m: &str| Error::parse(origin, i + 1, m.to_string());
            if f.len() != 4 {
                return Err(bad("expected time_step,origin,destination,intensity"));
            }
            let t: usize = f[0].parse().map_err(|_| bad("time_step is not an integer"))?;
            let o: usize = f[1].parse().map_err(|_| bad("origin is not an integer"))?;
            let d: usize = f[2].parse().map_err(|_| bad("destination is not an integer"))?;
            let l: f64 = f[3].parse().map_err(|_| bad("intensity is not a number"))?;
            if t >= horizon {
                return Err(bad("time_step beyond the scenario horizon"));
            }
            if o >= node_count || d >= node_count {
                return Err(bad("node id out of range"));
            }
            if o == d {
                return Err(bad("origin equals destination"));
            }
            if !(l >= 0.0 && l.is_finite()) {
                return Err(bad("intensity must be non-negative"));
            }
            by_step.entry(t).or_default().push(((o, d), l));
        }
        let mut components = Vec::new();
        for (t, cells) in by_step {
            let mass: f64 = cells.iter().map(|c| c.1).sum();
            if let Some(pattern) = OdPattern::new(node_count, cells) {
                components.push(DemandComponent {
                    pattern: Arc::new(pattern),
                    start: t,
                    masses: vec![mass],
                });
            }
        }
        Ok(DemandSpec {
            horizon,
            node_count,
            components,
        })
    }

    pub fn read(path: &Path, node_count: usize, horizon: usize) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Self::parse(&text, node_count, horizon, path)
    }
}

/// One demand hotspot for synthetic generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hotspot {
    /// `[row, col]` the origins cluster around; uniform over the grid if absent.
    #[serde(default)]
    pub origin: Option<[usize; 2]>,
    /// `[row, col]` the destinations cluster around; uniform if absent.
    #[serde(default)]
    pub destination: Option<[usize; 2]>,
    /// Gaussian spread around the centres, km.
    #[serde(default = "default_spread")]
    pub spread_km: f64,
    /// Time-of-day weights; the horizon is cut into `profile.len()` equal bins.
    pub profile: Vec<f64>,
}

fn default_spread() -> f64 {
    1.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct DemandShape {
    pub hotspots: Vec<Hotspot>,
}

impl DemandShape {
    /// Uniform OD pattern with a flat time profile.
    pub fn uniform() -> Self {
        DemandShape {
            hotspots: vec![Hotspot {
                origin: None,
                destination: None,
                spread_km: default_spread(),
                profile: vec![1.0],
            }],
        }
    }
}

fn gaussian_weights(grid: &GridSpec, center: Option<[usize; 2]>, spread: f64) -> Result<Vec<f64>> {
    let n = grid.node_count();
    let Some([row, col]) = center else {
        return Ok(vec![1.0; n]);
    };
    if row >= grid.rows || col >= grid.cols {
        return Err(Error::config(format!(
            "demand hotspot centre [{row}, {col}] lies outside the grid"
        )));
    }
    if !(spread > 0.0) {
        return Err(Error::config("demand hotspot spread_km must be positive"));
    }
    let c = grid.node(row, col);
    Ok((0..n)
        .map(|m| {
            let r = grid.euclidean_km(c, m);
            (-(r * r) / (2.0 * spread * spread)).exp()
        })
        .collect())
}

fn profile_weight(profile: &[f64], t: usize, horizon: usize) -> f64 {
    let bin = (t * profile.len() / horizon).min(profile.len() - 1);
    profile[bin]
}

/// Builds a demand spec whose intensities sum to `total_requests` over the horizon.
pub fn synth_demand(shape: &DemandShape, grid: &GridSpec, total_requests: f64, horizon: usize) -> Result<DemandSpec> {
    if shape.hotspots.is_empty() {
        return Err(Error::config("demand shape has no hotspots"));
    }
    if !(total_requests > 0.0) {
        return Err(Error::config("demand total_requests must be positive"));
    }
    if horizon == 0 {
        return Err(Error::config("horizon must be positive"));
    }
    let n = grid.node_count();
    let mut parts = Vec::new();
    for h in &shape.hotspots {
        if h.profile.is_empty() || h.profile.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::config(
                "hotspot profile weights must be non-empty and non-negative",
            ));
        }
        let go = gaussian_weights(grid, h.origin, h.spread_km)?;
        let gd = gaussian_weights(grid, h.destination, h.spread_km)?;
        let raw = (0..n)
            .flat_map(|o| (0..n).map(move |d| (o, d)))
            .map(|(o, d)| ((o, d), go[o] * gd[d]));
        let pattern = OdPattern::new(n, raw).ok_or_else(|| Error::config("hotspot has no OD mass"))?;
        let weights: Vec<f64> = (0..horizon).map(|t| profile_weight(&h.profile, t, horizon)).collect();
        parts.push((pattern, weights));
    }
    let grand: f64 = parts.iter().flat_map(|p| &p.1).sum();
    if !(grand > 0.0) {
        return Err(Error::config("demand shape profile weights are all zero"));
    }
    let components = parts
        .into_iter()
        .map(|(pattern, weights)| DemandComponent {
            pattern: Arc::new(pattern),
            start: 0,
            masses: weights.into_iter().map(|w| total_requests * w / grand).collect(),
        })
        .collect();
    Ok(DemandSpec {
        horizon,
        node_count: n,
        components,
    })
}

/// Background congestion level ψ_C.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CongestionLevel {
    Named(NamedLevel),
    Factor(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NamedLevel {
    Low,
    Medium,
    High,
}

impl CongestionLevel {
    pub const LOW: CongestionLevel = CongestionLevel::Named(NamedLevel::Low);
    pub const MEDIUM: CongestionLevel = CongestionLevel::Named(NamedLevel::Medium);
    pub const HIGH: CongestionLevel = CongestionLevel::Named(NamedLevel::High);

    pub fn factor(self) -> f64 {
        match self {
            CongestionLevel::Named(NamedLevel::Low) => 0.8,
            CongestionLevel::Named(NamedLevel::Medium) => 1.0,
            CongestionLevel::Named(NamedLevel::High) => 1.2,
            CongestionLevel::Factor(f) => f,
        }
    }

    pub fn label(self) -> String {
        match self {
            CongestionLevel::Named(NamedLevel::Low) => "low".into(),
            CongestionLevel::Named(NamedLevel::Medium) => "medium".into(),
            CongestionLevel::Named(NamedLevel::High) => "high".into(),
            CongestionLevel::Factor(f) => format!("x{f}"),
        }
    }
}

impl Default for CongestionLevel {
    fn default() -> Self {
        CongestionLevel::MEDIUM
    }
}

pub fn scale_background(profile: &BackgroundProfile, level: CongestionLevel) -> BackgroundProfile {
    profile.scaled(level.factor())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimePeak {
    pub center_minute: f64,
    pub width_minutes: f64,
    pub amplitude: f64,
}

/// Synthetic background density: a base level raised towards the city centre
/// and during Gaussian time-of-day peaks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackgroundShape {
    pub base_density: f64,
    /// Relative extra density at the grid centre.
    pub center_boost: f64,
    /// Spatial spread of the centre boost, km; defaults to a third of the grid span.
    pub center_spread_km: Option<f64>,
    pub peaks: Vec<TimePeak>,
}

impl Default for BackgroundShape {
    fn default() -> Self {
        BackgroundShape {
            base_density: 1.0,
            center_boost: 0.5,
            center_spread_km: None,
            peaks: Vec::new(),
        }
    }
}

pub fn synth_background(shape: &BackgroundShape, network: &NetworkState, horizon: usize) -> Result<BackgroundProfile> {
    if !(shape.base_density >= 0.0) || !(shape.center_boost >= -1.0) {
        return Err(Error::config(
            "background base_density must be >= 0 and center_boost >= -1",
        ));
    }
    let grid = network.grid();
    let cx = (grid.cols - 1) as f64 * grid.link_length_km / 2.0;
    let cy = (grid.rows - 1) as f64 * grid.link_length_km / 2.0;
    let spread = shape
        .center_spread_km
        .unwrap_or(((grid.cols.max(grid.rows) - 1) as f64 * grid.link_length_km) / 3.0);
    if !(spread > 0.0) {
        return Err(Error::config("background center_spread_km must be positive"));
    }
    let spatial: Vec<f64> = (0..network.link_count())
        .map(|l| {
            let (x, y) = network.link_midpoint(l);
            let r2 = (x - cx).powi(2) + (y - cy).powi(2);
            shape.base_density * (1.0 + shape.center_boost * (-r2 / (2.0 * spread * spread)).exp())
        })
        .collect();
    let steps = (0..horizon.max(1))
        .map(|t| {
            let temporal: f64 = 1.0
                + shape
                    .peaks
                    .iter()
                    .map(|p| p.amplitude * (-((t as f64 - p.center_minute) / p.width_minutes).powi(2) / 2.0).exp())
                    .sum::<f64>();
            spatial.iter().map(|s| (s * temporal).max(0.0)).collect()
        })
        .collect();
    BackgroundProfile::new(steps)
}
