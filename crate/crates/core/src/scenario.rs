//! Scenario files and the built-in presets.
//!
//! A scenario file is TOML. Its optional `preset` key (`"desk"` or `"paper"`,
//! default `"desk"`) selects the base values; every other key in the file
//! overrides the preset, with tables merged key by key. Relative paths to
//! demand or background files resolve against the scenario file's directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::choice::ChoiceParams;
use crate::demand::{
    synth_background, synth_demand, BackgroundShape, CongestionLevel, DemandShape, DemandSpec, Hotspot, TimePeak,
};
use crate::engine::{CongestionWeight, Scenario, ScenarioParts};
use crate::error::{Error, Result};
use crate::fleet::{OperationRules, Tariff};
use crate::network::{BackgroundProfile, BlendParams, FlowDensityParams, GridSpec, NetworkState};
use crate::pricing::SolverConfig;

pub const PRESETS: [&str; 2] = ["desk", "paper"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemandSection {
    /// Intensity file (`time_step,origin,destination,intensity`); when set,
    /// it is rescaled to `demand_total` and `hotspots` are ignored.
    pub file: Option<PathBuf>,
    pub hotspots: Vec<Hotspot>,
}

impl Default for DemandSection {
    fn default() -> Self {
        DemandSection {
            file: None,
            hotspots: DemandShape::uniform().hotspots,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackgroundSection {
    /// Density file (`time_step,link_id,density`); overrides the shape.
    pub file: Option<PathBuf>,
    pub base_density: f64,
    pub center_boost: f64,
    pub center_spread_km: Option<f64>,
    pub peaks: Vec<TimePeak>,
}

impl Default for BackgroundSection {
    fn default() -> Self {
        let s = BackgroundShape::default();
        BackgroundSection {
            file: None,
            base_density: s.base_density,
            center_boost: s.center_boost,
            center_spread_km: s.center_spread_km,
            peaks: s.peaks,
        }
    }
}

impl BackgroundSection {
    pub fn shape(&self) -> BackgroundShape {
        BackgroundShape {
            base_density: self.base_density,
            center_boost: self.center_boost,
            center_spread_km: self.center_spread_km,
            peaks: self.peaks.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioFile {
    pub preset: Option<String>,
    pub name: String,
    /// Minutes simulated per episode.
    pub horizon: usize,
    pub fleet_size: usize,
    /// Expected number of requests over the horizon, M.
    pub demand_total: f64,
    pub congestion: CongestionLevel,
    pub feature_radius_km: f64,
    pub drain_limit: usize,
    pub congestion_weight: CongestionWeight,
    pub adjustment_bounds: Option<[f64; 2]>,
    pub grid: GridSpec,
    pub flow: FlowDensityParams,
    pub blend: BlendParams,
    pub tariff: Tariff,
    pub choice: ChoiceParams,
    pub fleet: OperationRules,
    pub solver: SolverConfig,
    pub demand: DemandSection,
    pub background: BackgroundSection,
}

impl Default for ScenarioFile {
    fn default() -> Self {
        ScenarioFile::desk()
    }
}

fn peak(center_minute: f64, width_minutes: f64, amplitude: f64) -> TimePeak {
    TimePeak {
        center_minute,
        width_minutes,
        amplitude,
    }
}

impl ScenarioFile {
    /// Small city for tests and quick experiments: 5×5 grid, 20 vehicles,
    /// 2000 expected requests over eight hours.
    pub fn desk() -> Self {
        ScenarioFile {
            preset: None,
            name: "desk".into(),
            horizon: 480,
            fleet_size: 20,
            demand_total: 2000.0,
            congestion: CongestionLevel::MEDIUM,
            feature_radius_km: 2.0,
            drain_limit: 720,
            congestion_weight: CongestionWeight::Blended,
            adjustment_bounds: None,
            grid: GridSpec {
                rows: 5,
                cols: 5,
                link_length_km: 1.0,
            },
            flow: FlowDensityParams::default(),
            blend: BlendParams {
                market_exposure: 0.4,
                conversion_factor: 0.8,
            },
            tariff: Tariff::default(),
            choice: ChoiceParams {
                original_cost_factor: 5.0,
                ..ChoiceParams::default()
            },
            fleet: OperationRules::default(),
            solver: SolverConfig::default(),
            demand: DemandSection {
                file: None,
                hotspots: vec![
                    Hotspot {
                        origin: None,
                        destination: None,
                        spread_km: 1.5,
                        profile: vec![1.0],
                    },
                    Hotspot {
                        origin: None,
                        destination: Some([2, 2]),
                        spread_km: 1.5,
                        profile: vec![1.0, 2.0, 1.0, 0.2, 0.2, 0.2, 0.2, 0.2],
                    },
                    Hotspot {
                        origin: Some([2, 2]),
                        destination: None,
                        spread_km: 1.5,
                        profile: vec![0.2, 0.2, 0.2, 0.2, 0.2, 1.0, 2.0, 1.0],
                    },
                ],
            },
            background: BackgroundSection {
                file: None,
                base_density: 1.2,
                center_boost: 0.8,
                center_spread_km: None,
                peaks: vec![peak(90.0, 45.0, 0.4), peak(390.0, 45.0, 0.4)],
            },
        }
    }

    /// Full-day city at the scale of the published experiments.
    pub fn paper() -> Self {
        let mut s = ScenarioFile::desk();
        s.name = "paper".into();
        s.horizon = 1440;
        s.fleet_size = 1000;
        s.demand_total = 100_000.0;
        s.grid = GridSpec {
            rows: 10,
            cols: 10,
            link_length_km: 1.0,
        };
        s.choice.original_cost_factor = 2.5;
        s.blend.conversion_factor = 0.95;
        s.demand.hotspots = vec![
            Hotspot {
                origin: None,
                destination: None,
                spread_km: 3.0,
                profile: vec![0.2, 0.2, 0.4, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.2, 0.8, 0.4],
            },
            Hotspot {
                origin: None,
                destination: Some([4, 5]),
                spread_km: 2.5,
                profile: vec![0.0, 0.0, 0.0, 2.0, 0.5, 0.2, 0.2, 0.2, 0.2, 0.2, 0.0, 0.0],
            },
            Hotspot {
                origin: Some([4, 5]),
                destination: None,
                spread_km: 2.5,
                profile: vec![0.0, 0.0, 0.0, 0.2, 0.2, 0.2, 0.2, 0.2, 0.5, 2.0, 0.5, 0.0],
            },
        ];
        s.background.peaks = vec![peak(480.0, 90.0, 0.5), peak(1080.0, 90.0, 0.5)];
        s
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "desk" => Ok(ScenarioFile::desk()),
            "paper" => Ok(ScenarioFile::paper()),
            other => Err(Error::config(format!(
                "unknown preset `{other}` (expected one of {})",
                PRESETS.join(", ")
            ))),
        }
    }

    /// Parses a scenario file, merging it over its preset.
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e| Error::toml(text, origin, &e))?;
        let preset_name = match table.get("preset") {
            None => "desk".to_string(),
            Some(toml::Value::String(s)) => s.clone(),
            Some(_) => {
                let line = text
                    .lines()
                    .position(|l| l.trim_start().starts_with("preset"))
                    .unwrap_or(0);
                return Err(Error::parse(origin, line + 1, "preset must be a string"));
            }
        };
        let base = ScenarioFile::preset(&preset_name).map_err(|e| {
            let line = text
                .lines()
                .position(|l| l.trim_start().starts_with("preset"))
                .unwrap_or(0);
            Error::parse(origin, line + 1, e.to_string())
        })?;
        let mut merged = toml::Table::try_from(&base).expect("preset serialises");
        merge(&mut merged, table);
        let merged_text = toml::to_string(&merged).expect("table serialises");
        let file: ScenarioFile = toml::from_str(&merged_text).map_err(|e| Error::toml(text, origin, &e))?;
        Ok(file)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        let mut file = Self::parse(&text, path)?;
        let dir = path.parent().unwrap_or(Path::new("."));
        for f in [&mut file.demand.file, &mut file.background.file].into_iter().flatten() {
            if f.is_relative() {
                *f = dir.join(&*f);
            }
        }
        Ok(file)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serialises")
    }

    pub fn build(&self) -> Result<Scenario> {
        self.grid.validate()?;
        if self.horizon == 0 {
            return Err(Error::config("horizon must be positive"));
        }
        let network = NetworkState::build(self.grid, self.flow)?;
        let demand = match &self.demand.file {
            Some(path) => DemandSpec::read(path, self.grid.node_count(), self.horizon)?.rescaled(self.demand_total)?,
            None => synth_demand(
                &DemandShape {
                    hotspots: self.demand.hotspots.clone(),
                },
                &self.grid,
                self.demand_total,
                self.horizon,
            )?,
        };
        let background = match &self.background.file {
            Some(path) => BackgroundProfile::read(path, self.grid.link_count())?,
            None => synth_background(&self.background.shape(), &network, self.horizon)?,
        };
        Scenario::new(ScenarioParts {
            name: self.name.clone(),
            grid: self.grid,
            flow: self.flow,
            blend: self.blend,
            demand,
            background,
            congestion: self.congestion,
            tariff: self.tariff,
            choice: self.choice,
            rules: self.fleet,
            fleet_size: self.fleet_size,
            feature_radius_km: self.feature_radius_km,
            solver: self.solver,
            adjustment_bounds: self.adjustment_bounds.map(|[a, b]| (a, b)),
            congestion_weight: self.congestion_weight,
            drain_limit: self.drain_limit,
        })
    }
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// One point of the published experiment grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub fleet_size: usize,
    pub shared_ratio: f64,
    pub original_cost_factor: f64,
    pub market_exposure: f64,
    pub congestion: CongestionLevel,
}

impl GridPoint {
    pub fn label(&self) -> String {
        format!(
            "N{}_rsh{}_bfo{}_phi{}_{}",
            self.fleet_size,
            self.shared_ratio,
            self.original_cost_factor,
            self.market_exposure,
            self.congestion.label()
        )
    }

    /// Conversion factor k₀ paired with the original-mode cost factor.
    pub fn conversion_factor(&self) -> f64 {
        if self.original_cost_factor >= 5.0 {
            0.8
        } else {
            0.95
        }
    }

    pub fn apply(&self, base: &ScenarioFile) -> ScenarioFile {
        let mut s = base.clone();
        s.name = self.label();
        s.fleet_size = self.fleet_size;
        s.tariff.shared_ratio = self.shared_ratio;
        s.choice.original_cost_factor = self.original_cost_factor;
        s.blend.market_exposure = self.market_exposure;
        s.blend.conversion_factor = self.conversion_factor();
        s.congestion = self.congestion;
        s
    }
}

/// Every combination of fleet size, shared fare ratio, original-mode cost
/// factor, market exposure and congestion level used in the published grid.
pub fn paper_grid() -> Vec<GridPoint> {
    let mut out = Vec::new();
    for fleet_size in [500, 750, 1000, 1250] {
        for shared_ratio in [0.4, 0.6, 0.8] {
            for original_cost_factor in [2.5, 5.0] {
                for market_exposure in [0.1, 0.2, 0.4] {
                    for congestion in [CongestionLevel::LOW, CongestionLevel::MEDIUM, CongestionLevel::HIGH] {
                        out.push(GridPoint {
                            fleet_size,
                            shared_ratio,
                            original_cost_factor,
                            market_exposure,
                            congestion,
                        });
                    }
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_build() {
        let desk = ScenarioFile::desk().build().unwrap();
        assert_eq!(desk.grid.node_count(), 25);
        assert_eq!(desk.fleet_size, 20);
        assert_eq!(desk.horizon, 480);
        assert!((desk.demand.total() - 2000.0).abs() < 1e-6);
        let paper = ScenarioFile::paper();
        assert_eq!((paper.grid.rows, paper.fleet_size, paper.horizon), (10, 1000, 1440));
        assert_eq!(paper.demand_total, 100_000.0);
    }

    #[test]
    fn file_overrides_preset_key_by_key() {
        let text = "preset = \"paper\"\nfleet_size = 500\n[tariff]\nshared_ratio = 0.8\n";
        let f = ScenarioFile::parse(text, Path::new("s.toml")).unwrap();
        assert_eq!(f.fleet_size, 500);
        assert_eq!(f.tariff.shared_ratio, 0.8);
        assert_eq!(f.tariff.base_fare, 1.0);
        assert_eq!(f.grid.rows, 10);
        assert_eq!(f.preset.as_deref(), Some("paper"));
    }

    #[test]
    fn round_trip_is_lossless() {
        let f = ScenarioFile::paper();
        let back = ScenarioFile::parse(&f.to_toml(), Path::new("s.toml")).unwrap();
        assert_eq!(back.grid, f.grid);
        assert_eq!(back.demand, f.demand);
        assert_eq!(back.background, f.background);
        assert_eq!(back.choice, f.choice);
    }

    #[test]
    fn errors_name_the_line() {
        let err = ScenarioFile::parse("fleet_size = 5\n[tariff]\nbase_fair = 2\n", Path::new("s.toml")).unwrap_err();
        match err {
            Error::Parse { line, message, .. } => {
                assert_eq!(line, 3);
                assert!(message.contains("base_fair"));
            }
            other => panic!("unexpected {other}"),
        }
        let err = ScenarioFile::parse("fleet_size = \"many\"\n", Path::new("s.toml")).unwrap_err();
        assert!(err.is_usage());
        assert!(ScenarioFile::parse("preset = \"huge\"\n", Path::new("s.toml")).is_err());
    }

    #[test]
    fn invalid_values_are_config_errors() {
        let mut f = ScenarioFile::desk();
        f.fleet_size = 0;
        assert!(f.build().unwrap_err().is_usage());
        let mut f = ScenarioFile::desk();
        f.flow.critical_density = 7.0;
        assert!(f.build().unwrap_err().is_usage());
    }

    #[test]
    fn published_grid_enumeration() {
        let g = paper_grid();
        assert_eq!(g.len(), 4 * 3 * 2 * 3 * 3);
        let p = g.iter().find(|p| p.original_cost_factor == 2.5).unwrap();
        assert_eq!(p.conversion_factor(), 0.95);
        let p = g.iter().find(|p| p.original_cost_factor == 5.0).unwrap();
        let s = p.apply(&ScenarioFile::paper());
        assert_eq!(s.blend.conversion_factor, 0.8);
        assert_eq!(s.choice.original_cost_factor, 5.0);
    }
}
