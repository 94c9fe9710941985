//! Grid road network with triangular flow-density congestion.
//!
//! Every link carries three densities: the background density coming from the
//! part of the population that is not simulated, the simulated vehicle count,
//! and the blend of the two that drives the link speed. Densities use the
//! rescaled units in which the free-flow limit is 1 and jam density is 6.

use std::cell::OnceCell;
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type NodeId = usize;
pub type LinkId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub rows: usize,
    pub cols: usize,
    /// Uniform link length in km.
    pub link_length_km: f64,
}

impl GridSpec {
    pub fn new(rows: usize, cols: usize, link_length_km: f64) -> Result<Self> {
        let spec = GridSpec {
            rows,
            cols,
            link_length_km,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows < 2 || self.cols < 2 {
            return Err(Error::config(format!(
                "grid.rows and grid.cols must be at least 2 (got {}x{})",
                self.rows, self.cols
            )));
        }
        if !(self.link_length_km > 0.0 && self.link_length_km.is_finite()) {
            return Err(Error::config(format!(
                "grid.link_length_km must be positive (got {})",
                self.link_length_km
            )));
        }
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.rows * self.cols
    }

    pub fn link_count(&self) -> usize {
        2 * (self.rows * (self.cols - 1) + self.cols * (self.rows - 1))
    }

    pub fn node(&self, row: usize, col: usize) -> NodeId {
        row * self.cols + col
    }

    /// Planar coordinates (x, y) of a node in km.
    pub fn coords(&self, node: NodeId) -> (f64, f64) {
        let row = node / self.cols;
        let col = node % self.cols;
        (col as f64 * self.link_length_km, row as f64 * self.link_length_km)
    }

    pub fn nearest_node(&self, x: f64, y: f64) -> NodeId {
        let col = (x / self.link_length_km).round().clamp(0.0, (self.cols - 1) as f64) as usize;
        let row = (y / self.link_length_km).round().clamp(0.0, (self.rows - 1) as f64) as usize;
        self.node(row, col)
    }

    pub fn euclidean_km(&self, a: NodeId, b: NodeId) -> f64 {
        let (ax, ay) = self.coords(a);
        let (bx, by) = self.coords(b);
        (ax - bx).hypot(ay - by)
    }

    /// Nodes whose Euclidean distance to `center` is at most `radius_km`.
    pub fn nodes_within(&self, center: NodeId, radius_km: f64) -> Vec<NodeId> {
        let (cx, cy) = self.coords(center);
        (0..self.node_count())
            .filter(|&n| {
                let (x, y) = self.coords(n);
                (x - cx).hypot(y - cy) <= radius_km + 1e-9
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowDensityParams {
    /// Free-flow speed v_m in km/h.
    pub free_flow_speed: f64,
    /// Density k_m at which the congested branch starts.
    pub critical_density: f64,
    /// Jam density k_c at which the flow reaches zero.
    pub jam_density: f64,
    /// Floor on link speed in km/h, so vehicles never stall at jam density.
    pub min_speed: f64,
}

impl Default for FlowDensityParams {
    fn default() -> Self {
        FlowDensityParams {
            free_flow_speed: 60.0,
            critical_density: 1.0,
            jam_density: 6.0,
            min_speed: 2.0,
        }
    }
}

impl FlowDensityParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.critical_density > 0.0 && self.critical_density < self.jam_density) {
            return Err(Error::config("flow: need 0 < critical_density < jam_density"));
        }
        if !(self.free_flow_speed > self.min_speed && self.min_speed > 0.0) {
            return Err(Error::config("flow: need free_flow_speed > min_speed > 0"));
        }
        Ok(())
    }
}

/// Link speed (km/h) for a blended density under the triangular fundamental diagram.
pub fn fd_speed(density: f64, fd: &FlowDensityParams) -> f64 {
    let k = density.max(0.0);
    if k < fd.critical_density {
        return fd.free_flow_speed;
    }
    if k >= fd.jam_density {
        return fd.min_speed;
    }
    let flow = fd.free_flow_speed * fd.critical_density * (fd.jam_density - k) / (fd.jam_density - fd.critical_density);
    (flow / k).clamp(fd.min_speed, fd.free_flow_speed)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlendParams {
    /// Market exposure φ: share of the population represented by the simulation.
    pub market_exposure: f64,
    /// Conversion factor k₀ from simulated vehicle counts to density units.
    pub conversion_factor: f64,
}

impl Default for BlendParams {
    fn default() -> Self {
        BlendParams {
            market_exposure: 0.4,
            conversion_factor: 0.8,
        }
    }
}

impl BlendParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.market_exposure) {
            return Err(Error::config("blend.market_exposure must lie in [0, 1]"));
        }
        if !(self.conversion_factor > 0.0) {
            return Err(Error::config("blend.conversion_factor must be positive"));
        }
        Ok(())
    }
}

pub fn blend_density(background: f64, simulated: f64, blend: &BlendParams) -> f64 {
    (1.0 - blend.market_exposure) * background + simulated / blend.conversion_factor
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Link {
    pub from: NodeId,
    pub to: NodeId,
    pub length_km: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkState {
    /// Number of simulated vehicles currently on the link.
    pub sim_density: f64,
    pub background_density: f64,
    pub blended_density: f64,
    /// km/h
    pub speed: f64,
    /// minutes
    pub travel_time: f64,
}

/// Shortest-time tree rooted at one node, on a frozen snapshot of link times.
#[derive(Debug, Clone)]
pub struct PathTree {
    source: NodeId,
    time: Vec<f64>,
    distance: Vec<f64>,
    parent: Vec<Option<LinkId>>,
}

impl PathTree {
    pub fn source(&self) -> NodeId {
        self.source
    }

    pub fn time_to(&self, node: NodeId) -> f64 {
        self.time[node]
    }

    pub fn distance_to(&self, node: NodeId) -> f64 {
        self.distance[node]
    }

    /// Links from the source to `node`, in travel order.
    pub fn links_to(&self, node: NodeId, links: &[Link]) -> Vec<LinkId> {
        let mut out = Vec::new();
        let mut cur = node;
        while let Some(l) = self.parent[cur] {
            out.push(l);
            cur = links[l].from;
        }
        out.reverse();
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathResult {
    /// Node sequence including both endpoints; empty when origin equals destination.
    pub nodes: Vec<NodeId>,
    pub travel_time: f64,
    pub distance: f64,
}

#[derive(Copy, Clone, PartialEq)]
struct HeapEntry {
    time: f64,
    node: NodeId,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone)]
pub struct NetworkState {
    grid: GridSpec,
    fd: FlowDensityParams,
    links: Vec<Link>,
    states: Vec<LinkState>,
    out_links: Vec<Vec<LinkId>>,
    trees: Vec<OnceCell<PathTree>>,
}

impl NetworkState {
    /// Builds a 4-connected grid with links in both directions, all at free flow.
    pub fn build(grid: GridSpec, fd: FlowDensityParams) -> Result<Self> {
        grid.validate()?;
        fd.validate()?;
        let mut links = Vec::with_capacity(grid.link_count());
        for row in 0..grid.rows {
            for col in 0..grid.cols {
                let n = grid.node(row, col);
                if col + 1 < grid.cols {
                    let m = grid.node(row, col + 1);
                    links.push((n, m));
                    links.push((m, n));
                }
                if row + 1 < grid.rows {
                    let m = grid.node(row + 1, col);
                    links.push((n, m));
                    links.push((m, n));
                }
            }
        }
        let links: Vec<Link> = links
            .into_iter()
            .map(|(from, to)| Link {
                from,
                to,
                length_km: grid.link_length_km,
            })
            .collect();
        let mut out_links = vec![Vec::new(); grid.node_count()];
        for (id, l) in links.iter().enumerate() {
            out_links[l.from].push(id);
        }
        let free = LinkState {
            sim_density: 0.0,
            background_density: 0.0,
            blended_density: 0.0,
            speed: fd.free_flow_speed,
            travel_time: grid.link_length_km / fd.free_flow_speed * 60.0,
        };
        Ok(NetworkState {
            grid,
            fd,
            states: vec![free; links.len()],
            links,
            out_links,
            trees: vec![OnceCell::new(); grid.node_count()],
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn flow_params(&self) -> &FlowDensityParams {
        &self.fd
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn link(&self, id: LinkId) -> &Link {
        &self.links[id]
    }

    pub fn link_state(&self, id: LinkId) -> &LinkState {
        &self.states[id]
    }

    pub fn link_states(&self) -> &[LinkState] {
        &self.states
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    pub fn find_link(&self, from: NodeId, to: NodeId) -> Option<LinkId> {
        self.out_links
            .get(from)?
            .iter()
            .copied()
            .find(|&l| self.links[l].to == to)
    }

    /// Midpoint of a link in planar km coordinates.
    pub fn link_midpoint(&self, id: LinkId) -> (f64, f64) {
        let l = &self.links[id];
        let (ax, ay) = self.grid.coords(l.from);
        let (bx, by) = self.grid.coords(l.to);
        ((ax + bx) / 2.0, (ay + by) / 2.0)
    }

    /// Recomputes every link from its background density and the links occupied
    /// by moving vehicles (one entry per vehicle).
    pub fn update(&mut self, background: &[f64], occupied_links: &[LinkId], blend: &BlendParams) -> Result<()> {
        if background.len() != self.links.len() {
            return Err(Error::config(format!(
                "background profile has {} links, network has {}",
                background.len(),
                self.links.len()
            )));
        }
        let mut counts = vec![0usize; self.links.len()];
        for &l in occupied_links {
            *counts.get_mut(l).ok_or(Error::UnknownLink(l))? += 1;
        }
        for (id, st) in self.states.iter_mut().enumerate() {
            let k_sim = counts[id] as f64;
            let k_bg = background[id].max(0.0);
            let k_hat = blend_density(k_bg, k_sim, blend);
            let speed = fd_speed(k_hat, &self.fd);
            *st = LinkState {
                sim_density: k_sim,
                background_density: k_bg,
                blended_density: k_hat,
                speed,
                travel_time: self.links[id].length_km / speed * 60.0,
            };
        }
        for t in &mut self.trees {
            t.take();
        }
        Ok(())
    }

    /// Shortest-time tree from `source`, cached until the next update.
    pub fn tree(&self, source: NodeId) -> &PathTree {
        self.trees[source].get_or_init(|| self.dijkstra(source))
    }

    pub fn shortest_path(&self, origin: NodeId, dest: NodeId) -> PathResult {
        if origin == dest {
            return PathResult {
                nodes: Vec::new(),
                travel_time: 0.0,
                distance: 0.0,
            };
        }
        let tree = self.tree(origin);
        let links = tree.links_to(dest, &self.links);
        let mut nodes = Vec::with_capacity(links.len() + 1);
        nodes.push(origin);
        nodes.extend(links.iter().map(|&l| self.links[l].to));
        PathResult {
            nodes,
            travel_time: tree.time_to(dest),
            distance: tree.distance_to(dest),
        }
    }

    fn dijkstra(&self, source: NodeId) -> PathTree {
        let n = self.grid.node_count();
        let mut time = vec![f64::INFINITY; n];
        let mut distance = vec![f64::INFINITY; n];
        let mut parent = vec![None; n];
        let mut heap = BinaryHeap::new();
        time[source] = 0.0;
        distance[source] = 0.0;
        heap.push(HeapEntry {
            time: 0.0,
            node: source,
        });
        while let Some(HeapEntry { time: t, node }) = heap.pop() {
            if t > time[node] {
                continue;
            }
            for &l in &self.out_links[node] {
                let link = &self.links[l];
                let nt = t + self.states[l].travel_time;
                if nt < time[link.to] {
                    time[link.to] = nt;
                    distance[link.to] = distance[node] + link.length_km;
                    parent[link.to] = Some(l);
                    heap.push(HeapEntry {
                        time: nt,
                        node: link.to,
                    });
                }
            }
        }
        PathTree {
            source,
            time,
            distance,
            parent,
        }
    }
}

/// Background density per (time step, link).
#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundProfile {
    link_count: usize,
    steps: Vec<Vec<f64>>,
}

impl BackgroundProfile {
    pub fn new(steps: Vec<Vec<f64>>) -> Result<Self> {
        let link_count = steps
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::config("background profile needs at least one time step"))?;
        if steps.iter().any(|s| s.len() != link_count) {
            return Err(Error::config("background profile rows differ in link count"));
        }
        if steps.iter().flatten().any(|&d| !(d >= 0.0 && d.is_finite())) {
            return Err(Error::config("background densities must be finite and non-negative"));
        }
        Ok(BackgroundProfile { link_count, steps })
    }

    pub fn zeros(link_count: usize) -> Self {
        BackgroundProfile {
            link_count,
            steps: vec![vec![0.0; link_count]],
        }
    }

    pub fn link_count(&self) -> usize {
        self.link_count
    }

    pub fn step_count(&self) -> usize {
        self.steps.len()
    }

    /// Densities at step `t`; steps past the end repeat the last one.
    pub fn at(&self, t: usize) -> &[f64] {
        &self.steps[t.min(self.steps.len() - 1)]
    }

    pub fn scaled(&self, factor: f64) -> Self {
        BackgroundProfile {
            link_count: self.link_count,
            steps: self
                .steps
                .iter()
                .map(|s| s.iter().map(|d| d * factor).collect())
                .collect(),
        }
    }

    /// Parses `time_step,link_id,density` records. A link with no record at some
    /// step takes its value from the nearest earlier step (zero if none).
    pub fn parse(text: &str, link_count: usize, origin: &Path) -> Result<Self> {
        let mut records: Vec<(usize, usize, f64)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with("time_step") {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(Error::parse(origin, i + 1, "expected time_step,link_id,density"));
            }
            let t: usize = fields[0]
                .parse()
                .map_err(|_| Error::parse(origin, i + 1, "time_step is not an integer"))?;
            let l: usize = fields[1]
                .parse()
                .map_err(|_| Error::parse(origin, i + 1, "link_id is not an integer"))?;
            let d: f64 = fields[2]
                .parse()
                .map_err(|_| Error::parse(origin, i + 1, "density is not a number"))?;
            if l >= link_count {
                return Err(Error::parse(
                    origin,
                    i + 1,
                    format!("link_id {l} out of range (network has {link_count} links)"),
                ));
            }
            if !(d >= 0.0 && d.is_finite()) {
                return Err(Error::parse(origin, i + 1, "density must be non-negative"));
            }
            records.push((t, l, d));
        }
        let horizon = records.iter().map(|r| r.0 + 1).max().unwrap_or(1);
        let mut explicit = vec![vec![None; link_count]; horizon];
        for (t, l, d) in records {
            explicit[t][l] = Some(d);
        }
        let mut steps = Vec::with_capacity(horizon);
        let mut last = vec![0.0; link_count];
        for row in explicit {
            for (l, v) in row.into_iter().enumerate() {
                if let Some(d) = v {
                    last[l] = d;
                }
            }
            steps.push(last.clone());
        }
        Ok(BackgroundProfile { link_count, steps })
    }

    pub fn read(path: &Path, link_count: usize) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Self::parse(&text, link_count, path)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("time_step,link_id,density\n");
        for (t, row) in self.steps.iter().enumerate() {
            for (l, d) in row.iter().enumerate() {
                let _ = writeln!(out, "{t},{l},{d}");
            }
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }
}
