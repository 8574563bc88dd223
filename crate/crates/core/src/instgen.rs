//! Seeded synthetic instances over a Puerto-Rico-sized bounding box.

use std::fmt;
use std::str::FromStr;

use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::LogNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{geodesic_minutes, Community, Instance, Site, TruckEdge};
use crate::scenariogen::budget_count;

pub const LAT_RANGE: (f64, f64) = (17.93, 18.52);
pub const LON_RANGE: (f64, f64) = (-67.27, -65.59);
/// San Juan.
pub const DEPOT: (f64, f64) = (18.4655, -66.1057);
pub const NUM_REGIONS: usize = 10;
pub const DEMAND_RANGE: (f64, f64) = (2.0, 15.0);
/// Share of communities drawn inside the focus quadrant.
pub const FOCUS_SHARE: f64 = 0.7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Focus {
    Nw,
    Ne,
    Sw,
    Se,
    Uniform,
}

impl FromStr for Focus {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "nw" => Ok(Focus::Nw),
            "ne" => Ok(Focus::Ne),
            "sw" => Ok(Focus::Sw),
            "se" => Ok(Focus::Se),
            "uniform" => Ok(Focus::Uniform),
            other => Err(format!("unknown focus '{other}' (nw, ne, sw, se, uniform)")),
        }
    }
}

impl fmt::Display for Focus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Focus::Nw => "nw",
            Focus::Ne => "ne",
            Focus::Sw => "sw",
            Focus::Se => "se",
            Focus::Uniform => "uniform",
        };
        f.write_str(s)
    }
}

impl Focus {
    /// (lat range, lon range) of the quadrant.
    fn quadrant(self) -> Option<((f64, f64), (f64, f64))> {
        let mid_lat = (LAT_RANGE.0 + LAT_RANGE.1) / 2.0;
        let mid_lon = (LON_RANGE.0 + LON_RANGE.1) / 2.0;
        let north = (mid_lat, LAT_RANGE.1);
        let south = (LAT_RANGE.0, mid_lat);
        let west = (LON_RANGE.0, mid_lon);
        let east = (mid_lon, LON_RANGE.1);
        match self {
            Focus::Nw => Some((north, west)),
            Focus::Ne => Some((north, east)),
            Focus::Sw => Some((south, west)),
            Focus::Se => Some((south, east)),
            Focus::Uniform => None,
        }
    }

    fn contains(self, lat: f64, lon: f64) -> bool {
        match self.quadrant() {
            None => true,
            Some(((a, b), (c, d))) => lat >= a && lat <= b && lon >= c && lon <= d,
        }
    }
}

/// A row of an imported community table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationRecord {
    pub id: u32,
    pub latitude: f64,
    pub longitude: f64,
    pub population: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    pub seed: u64,
    pub communities: usize,
    pub satellites: usize,
    pub focus: Focus,
    /// 1: uniform 50% deviation; 2: strongest in the east; 3: strongest in the west.
    pub level: u8,
    pub gamma_pct: f64,
    pub gamma_region_pct: f64,
    pub num_trucks: usize,
    pub drones_per_truck: usize,
    pub range_miles: f64,
    pub max_load: f64,
    pub drone_speed_mph: f64,
    pub truck_speed_mph: f64,
    pub epsilon: f64,
    /// Satellites closer than this get a direct road between them.
    pub road_threshold_miles: f64,
    /// Sample communities from this table instead of the bounding box.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub population_table: Option<Vec<PopulationRecord>>,
}

impl Default for GenSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            communities: 60,
            satellites: 8,
            focus: Focus::Uniform,
            level: 1,
            gamma_pct: 50.0,
            gamma_region_pct: 50.0,
            num_trucks: 4,
            drones_per_truck: 4,
            range_miles: 35.0,
            max_load: 25.0,
            drone_speed_mph: 60.0,
            truck_speed_mph: 60.0,
            epsilon: 1.0,
            road_threshold_miles: 30.0,
            population_table: None,
        }
    }
}

impl GenSpec {
    pub fn check(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Spec(m.to_string()));
        if self.communities == 0 {
            return bad("community count must be positive");
        }
        if self.satellites == 0 {
            return bad("satellite count must be positive");
        }
        if self.num_trucks == 0 || self.drones_per_truck == 0 {
            return bad("truck and drone counts must be positive");
        }
        if !(1..=3).contains(&self.level) {
            return bad("disaster level must be 1, 2 or 3");
        }
        for (name, p) in [("gamma", self.gamma_pct), ("gamma-region", self.gamma_region_pct)] {
            if !(0.0..=100.0).contains(&p) {
                return Err(Error::Spec(format!("{name} percentage {p} outside [0, 100]")));
            }
        }
        for (name, v) in [
            ("range", self.range_miles),
            ("load", self.max_load),
            ("drone speed", self.drone_speed_mph),
            ("truck speed", self.truck_speed_mph),
            ("epsilon", self.epsilon),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Spec(format!("{name} must be positive")));
            }
        }
        if let Some(t) = &self.population_table {
            if t.len() < self.communities {
                return Err(Error::Spec(format!("table has {} rows, {} communities requested", t.len(), self.communities)));
            }
        }
        Ok(())
    }
}

/// Ten equal-width longitude bands over the points' extent, 0 = east.
/// Bands are half-open on their eastern edge except the easternmost.
pub fn assign_regions(lons: &[f64]) -> Vec<usize> {
    let lo = lons.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = lons.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / NUM_REGIONS as f64;
    lons.iter()
        .map(|&lon| {
            if !(width > 0.0) {
                return 0;
            }
            let from_west = (((lon - lo) / width).floor() as usize).min(NUM_REGIONS - 1);
            NUM_REGIONS - 1 - from_west
        })
        .collect()
}

/// Linear map of populations onto the demand range; the midpoint when all
/// populations are equal.
pub fn normalize_demand(pop: &[f64]) -> Vec<f64> {
    let lo = pop.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = pop.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (a, b) = DEMAND_RANGE;
    pop.iter()
        .map(|&p| if hi > lo { (a + (b - a) * (p - lo) / (hi - lo)).clamp(a, b) } else { (a + b) / 2.0 })
        .collect()
}

/// Q̂ / Q̄ for a region under a disaster level.
pub fn deviation_fraction(level: u8, region: usize) -> f64 {
    match level {
        1 => 0.5,
        2 => (NUM_REGIONS - 1 - region.min(NUM_REGIONS - 1)) as f64 / 10.0,
        _ => region.min(NUM_REGIONS - 1) as f64 / 10.0,
    }
}

fn sample_box(rng: &mut ChaCha8Rng, focus: Focus) -> (f64, f64) {
    let ((la, lb), (oa, ob)) = match focus.quadrant() {
        Some(q) if rng.gen_bool(FOCUS_SHARE) => q,
        _ => (LAT_RANGE, LON_RANGE),
    };
    (rng.gen_range(la..=lb), rng.gen_range(oa..=ob))
}

fn sample_table(rng: &mut ChaCha8Rng, spec: &GenSpec, table: &[PopulationRecord]) -> Result<Vec<PopulationRecord>> {
    let mut pool: Vec<PopulationRecord> = table.to_vec();
    let mut picked = Vec::with_capacity(spec.communities);
    let boost = match spec.focus {
        Focus::Uniform => 1.0,
        _ => FOCUS_SHARE / (1.0 - FOCUS_SHARE),
    };
    for _ in 0..spec.communities {
        let weights: Vec<f64> = pool
            .iter()
            .map(|r| if spec.focus != Focus::Uniform && spec.focus.contains(r.latitude, r.longitude) { boost } else { 1.0 })
            .collect();
        let dist = WeightedIndex::new(&weights).map_err(|e| Error::Spec(e.to_string()))?;
        picked.push(pool.swap_remove(dist.sample(rng)));
    }
    picked.sort_by_key(|r| r.id);
    Ok(picked)
}

fn place_satellites(rng: &mut ChaCha8Rng, n: usize) -> Vec<(f64, f64)> {
    let height = LAT_RANGE.1 - LAT_RANGE.0;
    let width = LON_RANGE.1 - LON_RANGE.0;
    let aspect = width * DEPOT.0.to_radians().cos() / height;
    let cols = ((n as f64 * aspect).sqrt().round() as usize).clamp(1, n);
    let rows = n.div_ceil(cols);
    let mut out = Vec::with_capacity(n);
    for r in 0..rows {
        let in_row = n / rows + usize::from(r < n % rows);
        let cell_h = height / rows as f64;
        let cell_w = width / in_row as f64;
        for k in 0..in_row {
            let lat = LAT_RANGE.0 + cell_h * (r as f64 + 0.5 + rng.gen_range(-0.25..0.25));
            let lon = LON_RANGE.0 + cell_w * (k as f64 + 0.5 + rng.gen_range(-0.25..0.25));
            out.push((lat, lon));
        }
    }
    out
}

pub fn generate(spec: &GenSpec) -> Result<Instance> {
    spec.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let records: Vec<PopulationRecord> = match &spec.population_table {
        Some(table) => sample_table(&mut rng, spec, table)?,
        None => {
            let pop = LogNormal::new(8.5, 1.0).map_err(|e| Error::Spec(e.to_string()))?;
            (0..spec.communities)
                .map(|i| {
                    let (lat, lon) = sample_box(&mut rng, spec.focus);
                    PopulationRecord { id: i as u32 + 1, latitude: lat, longitude: lon, population: pop.sample(&mut rng) }
                })
                .collect()
        }
    };
    let demand = normalize_demand(&records.iter().map(|r| r.population).collect::<Vec<_>>());
    let regions = assign_regions(&records.iter().map(|r| r.longitude).collect::<Vec<_>>());
    let communities: Vec<Community> = records
        .iter()
        .enumerate()
        .map(|(i, r)| Community {
            id: r.id,
            lat: r.latitude,
            lon: r.longitude,
            region: regions[i],
            nominal_demand: demand[i],
            max_deviation: deviation_fraction(spec.level, regions[i]) * demand[i],
            delay_cost: 1.0,
            miss_cost: 10_000.0,
            shortage_cost: rng.gen_range(10.0..=1000.0),
        })
        .collect();

    let depot = Site { id: 0, lat: DEPOT.0, lon: DEPOT.1 };
    let satellites: Vec<Site> = place_satellites(&mut rng, spec.satellites)
        .into_iter()
        .enumerate()
        .map(|(k, (lat, lon))| Site { id: k as u32 + 1, lat, lon })
        .collect();
    let speed = spec.truck_speed_mph;
    let mut truck_edges = Vec::new();
    for s in &satellites {
        truck_edges.push(TruckEdge { from: depot.id, to: s.id, minutes: geodesic_minutes(depot.pos(), s.pos(), speed)? });
    }
    let threshold_min = spec.road_threshold_miles / speed * 60.0;
    for (i, a) in satellites.iter().enumerate() {
        for b in &satellites[i + 1..] {
            let t = geodesic_minutes(a.pos(), b.pos(), speed)?;
            if t <= threshold_min {
                truck_edges.push(TruckEdge { from: a.id, to: b.id, minutes: t });
            }
        }
    }

    let n = communities.len();
    let gamma_region = (0..NUM_REGIONS)
        .map(|a| budget_count(spec.gamma_region_pct, communities.iter().filter(|c| c.region == a).count()))
        .collect();
    let mut inst = Instance {
        depot,
        satellites,
        communities,
        truck_edges,
        drone_speed_mph: spec.drone_speed_mph,
        truck_speed_mph: spec.truck_speed_mph,
        flying_range_min: spec.range_miles / spec.drone_speed_mph * 60.0,
        max_load: spec.max_load,
        num_trucks: spec.num_trucks,
        drones_per_truck: spec.drones_per_truck,
        gamma_total: budget_count(spec.gamma_pct, n),
        gamma_region,
        epsilon: spec.epsilon,
        big_m: 0.0,
    };
    inst.big_m = inst.default_big_m();
    Ok(inst)
}
