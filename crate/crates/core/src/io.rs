//! File formats: instance, run report and routes as versioned JSON, route
//! geometry as GeoJSON, and the community CSV import.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::driver::RunReport;
use crate::error::{Error, Result};
use crate::instgen::PopulationRecord;
use crate::master::MasterSolution;
use crate::model::{Instance, DEPOT_NODE};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize)]
struct Versioned<T> {
    schema_version: u32,
    #[serde(flatten)]
    body: T,
}

fn to_json<T: Serialize + Clone>(body: &T) -> Result<String> {
    let v = Versioned { schema_version: SCHEMA_VERSION, body: body.clone() };
    serde_json::to_string_pretty(&v).map_err(|e| Error::Parse(e.to_string()))
}

#[derive(Deserialize)]
struct Header {
    schema_version: u32,
}

fn parse_error(what: &str, e: serde_json::Error) -> Error {
    let msg = e.to_string();
    let msg = msg.rsplit_once(" at line ").map_or(msg.as_str(), |(m, _)| m);
    Error::Parse(format!("{what}: line {} column {}: {msg}", e.line(), e.column()))
}

// the body is parsed on its own, not through a flattened wrapper, so type
// errors keep their position in the file
fn from_json<T: DeserializeOwned>(text: &str, what: &str) -> Result<T> {
    let h: Header = serde_json::from_str(text).map_err(|e| parse_error(what, e))?;
    if h.schema_version != SCHEMA_VERSION {
        return Err(Error::Parse(format!(
            "{what}: schema_version {} is not supported (expected {SCHEMA_VERSION})",
            h.schema_version
        )));
    }
    serde_json::from_str(text).map_err(|e| parse_error(what, e))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

pub fn instance_to_string(inst: &Instance) -> Result<String> {
    to_json(inst)
}

pub fn instance_from_str(text: &str) -> Result<Instance> {
    from_json(text, "instance")
}

pub fn write_instance(path: &Path, inst: &Instance) -> Result<()> {
    Ok(fs::write(path, instance_to_string(inst)? + "\n")?)
}

pub fn read_instance(path: &Path) -> Result<Instance> {
    from_json(&read(path)?, &path.display().to_string())
}

pub fn report_to_string(rep: &RunReport) -> Result<String> {
    to_json(rep)
}

pub fn report_from_str(text: &str) -> Result<RunReport> {
    from_json(text, "report")
}

pub fn write_report(path: &Path, rep: &RunReport) -> Result<()> {
    Ok(fs::write(path, report_to_string(rep)? + "\n")?)
}

pub fn read_report(path: &Path) -> Result<RunReport> {
    from_json(&read(path)?, &path.display().to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruckStop {
    pub node_id: u32,
    pub arrival: f64,
    pub idle: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruckTour {
    pub truck: usize,
    /// Depot first and last.
    pub stops: Vec<TruckStop>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroneVisit {
    pub community_id: u32,
    /// Clock time: truck arrival at the satellite plus flight time.
    pub arrival: f64,
    /// Units delivered per scenario in Ω′.
    pub delivered: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroneSortie {
    pub satellite_id: u32,
    pub slot: usize,
    pub launch: f64,
    pub land: f64,
    pub visits: Vec<DroneVisit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutesFile {
    pub trucks: Vec<TruckTour>,
    pub drones: Vec<DroneSortie>,
    pub missed_community_ids: Vec<u32>,
}

/// Splits the used truck arcs into depot-to-depot tours, taking the
/// lowest-numbered unused successor at each step.
pub fn truck_tours(sol: &MasterSolution) -> Vec<Vec<usize>> {
    let mut unused: Vec<(usize, usize)> = sol.arcs_used.clone();
    unused.sort();
    let mut tours = Vec::new();
    while let Some(k) = unused.iter().position(|a| a.0 == DEPOT_NODE) {
        let (_, mut cur) = unused.remove(k);
        let mut tour = vec![DEPOT_NODE, cur];
        while cur != DEPOT_NODE {
            match unused.iter().position(|a| a.0 == cur) {
                Some(k) => {
                    cur = unused.remove(k).1;
                    tour.push(cur);
                }
                None => break,
            }
        }
        tours.push(tour);
    }
    tours
}

pub fn routes_file(inst: &Instance, sol: &MasterSolution) -> RoutesFile {
    let trucks = truck_tours(sol)
        .into_iter()
        .enumerate()
        .map(|(truck, nodes)| TruckTour {
            truck,
            stops: nodes
                .into_iter()
                .map(|n| {
                    let (arrival, idle) =
                        if n == DEPOT_NODE { (0.0, 0.0) } else { (sol.satellite_arrival[n - 1], sol.idle[n - 1]) };
                    TruckStop { node_id: inst.node_id(n), arrival, idle }
                })
                .collect(),
        })
        .collect();
    let drones = sol
        .assignments
        .iter()
        .map(|a| {
            let t0 = sol.satellite_arrival[a.satellite];
            DroneSortie {
                satellite_id: inst.satellites[a.satellite].id,
                slot: a.slot,
                launch: t0,
                land: t0 + a.route.duration,
                visits: a
                    .route
                    .visits
                    .iter()
                    .enumerate()
                    .map(|(k, &c)| DroneVisit {
                        community_id: inst.communities[c].id,
                        arrival: t0 + a.route.visit_times[k],
                        delivered: a.route.deliveries.iter().map(|d| d[k]).collect(),
                    })
                    .collect(),
            }
        })
        .collect();
    let missed_community_ids =
        sol.missed.iter().enumerate().filter(|(_, &j)| j).map(|(c, _)| inst.communities[c].id).collect();
    RoutesFile { trucks, drones, missed_community_ids }
}

pub fn routes_to_string(routes: &RoutesFile) -> Result<String> {
    to_json(routes)
}

pub fn routes_from_str(text: &str) -> Result<RoutesFile> {
    from_json(text, "routes")
}

/// GeoJSON FeatureCollection: sites as points, truck tours and drone
/// sorties as line strings. Coordinates are `[lon, lat]`.
pub fn geometry(inst: &Instance, sol: &MasterSolution) -> Value {
    let pt = |lat: f64, lon: f64| json!([lon, lat]);
    let mut features = Vec::new();
    features.push(json!({
        "type": "Feature",
        "geometry": {"type": "Point", "coordinates": pt(inst.depot.lat, inst.depot.lon)},
        "properties": {"kind": "depot", "id": inst.depot.id}
    }));
    for (s, site) in inst.satellites.iter().enumerate() {
        features.push(json!({
            "type": "Feature",
            "geometry": {"type": "Point", "coordinates": pt(site.lat, site.lon)},
            "properties": {"kind": "satellite", "id": site.id, "visited": sol.visited(s)}
        }));
    }
    for (c, com) in inst.communities.iter().enumerate() {
        features.push(json!({
            "type": "Feature",
            "geometry": {"type": "Point", "coordinates": pt(com.lat, com.lon)},
            "properties": {"kind": "community", "id": com.id, "region": com.region, "missed": sol.missed[c]}
        }));
    }
    for (k, tour) in truck_tours(sol).iter().enumerate() {
        let coords: Vec<Value> = tour.iter().map(|&n| {
            let p = inst.node_pos(n);
            pt(p.lat, p.lon)
        }).collect();
        features.push(json!({
            "type": "Feature",
            "geometry": {"type": "LineString", "coordinates": coords},
            "properties": {"kind": "truck", "truck": k}
        }));
    }
    for a in &sol.assignments {
        let sat = &inst.satellites[a.satellite];
        let mut coords = vec![pt(sat.lat, sat.lon)];
        coords.extend(a.route.visits.iter().map(|&c| pt(inst.communities[c].lat, inst.communities[c].lon)));
        coords.push(pt(sat.lat, sat.lon));
        features.push(json!({
            "type": "Feature",
            "geometry": {"type": "LineString", "coordinates": coords},
            "properties": {"kind": "drone", "satellite": sat.id, "slot": a.slot, "duration": a.route.duration}
        }));
    }
    json!({"type": "FeatureCollection", "features": features})
}

/// Reads `id,latitude,longitude,population` rows (header required).
pub fn read_population_csv(path: &Path) -> Result<Vec<PopulationRecord>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize().enumerate() {
        let rec: PopulationRecord =
            row.map_err(|e| Error::Parse(format!("{}: record {}: {e}", path.display(), i + 1)))?;
        out.push(rec);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instgen::{generate, GenSpec};
    use std::io::Write;

    #[test]
    fn instance_round_trip() {
        let inst = generate(&GenSpec { seed: 11, communities: 12, ..GenSpec::default() }).unwrap();
        let text = instance_to_string(&inst).unwrap();
        assert!(text.contains("\"schema_version\": 1"));
        assert_eq!(instance_from_str(&text).unwrap(), inst);
    }

    #[test]
    fn malformed_instance_reports_line() {
        let inst = generate(&GenSpec { seed: 11, communities: 3, ..GenSpec::default() }).unwrap();
        let text = instance_to_string(&inst).unwrap().replace("\"max_load\": 25.0", "\"max_load\": \"heavy\"");
        let err = instance_from_str(&text).unwrap_err().to_string();
        assert!(err.contains("line"), "{err}");
        let wrong = instance_to_string(&inst).unwrap().replace("\"schema_version\": 1", "\"schema_version\": 9");
        assert!(instance_from_str(&wrong).is_err());
    }

    #[test]
    fn csv_import() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "id,latitude,longitude,population\n1,18.1,-66.2,1200\n2,18.3,-66.9,450").unwrap();
        let rows = read_population_csv(f.path()).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1], PopulationRecord { id: 2, latitude: 18.3, longitude: -66.9, population: 450.0 });
        let mut bad = tempfile::NamedTempFile::new().unwrap();
        writeln!(bad, "id,latitude,longitude,population\n1,north,-66.2,1200").unwrap();
        assert!(read_population_csv(bad.path()).is_err());
    }

    #[test]
    fn tours_split_at_depot() {
        let sol = MasterSolution {
            arcs_used: vec![(0, 2), (2, 0), (0, 1), (1, 3), (3, 0)],
            assignments: vec![],
            missed: vec![],
            satellite_arrival: vec![0.0; 3],
            idle: vec![0.0; 3],
            service_time: vec![],
            shortfall: vec![],
            recourse_cost: 0.0,
            objective: 0.0,
        };
        assert_eq!(truck_tours(&sol), vec![vec![0, 1, 3, 0], vec![0, 2, 0]]);
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(32))]

        #[test]
        fn generated_instances_round_trip(seed in 0u64..100_000, communities in 1usize..30) {
            let inst = generate(&GenSpec { seed, communities, ..GenSpec::default() }).unwrap();
            let text = instance_to_string(&inst).unwrap();
            proptest::prop_assert_eq!(instance_from_str(&text).unwrap(), inst);
        }
    }
}
