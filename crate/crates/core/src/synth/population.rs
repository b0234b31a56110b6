//! Agents with home and workplace anchors.

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geodata::{GeoPoint, GeographyHierarchy, Level, Zone};

use super::scenario::ScenarioConfig;
use super::substream;

/// Share of workplaces placed in the agent's own county.
const SAME_COUNTY_WORK_SHARE: f64 = 0.8;

#[derive(Debug, Clone, PartialEq)]
pub struct Workplace {
    pub zone_id: String,
    pub point: GeoPoint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    /// Position in the population; keys the agent's random substream.
    pub index: usize,
    pub device_id: String,
    pub home_county: String,
    pub home_zone: String,
    pub home: GeoPoint,
    pub work: Option<Workplace>,
}

pub fn device_id(index: usize) -> String {
    format!("d{index:07}")
}

/// Uniform point inside a zone by rejection from its bounding box.
pub fn uniform_point_in(zone: &Zone, rng: &mut impl Rng) -> GeoPoint {
    let b = zone.polygon.bbox();
    for _ in 0..10_000 {
        let p = GeoPoint {
            lat: rng.gen_range(b.min_lat..b.max_lat),
            lon: rng.gen_range(b.min_lon..b.max_lon),
        };
        if zone.polygon.containment(p) == crate::geodata::Containment::Inside {
            return p;
        }
    }
    let v = zone.polygon.vertices();
    GeoPoint {
        lat: v.iter().map(|p| p.lat).sum::<f64>() / v.len() as f64,
        lon: v.iter().map(|p| p.lon).sum::<f64>() / v.len() as f64,
    }
}

/// Index into `zones` drawn in proportion to population, uniform if all are empty.
pub fn pick_by_population(zones: &[&Zone], rng: &mut impl Rng) -> usize {
    match WeightedIndex::new(zones.iter().map(|z| z.population)) {
        Ok(w) => w.sample(rng),
        Err(_) => rng.gen_range(0..zones.len()),
    }
}

/// Builds the population. Each agent lives at a uniform point of a leaf zone
/// drawn by population within its county; a `worker_share` of agents also get
/// a workplace in another zone.
pub fn generate_population(geo: &GeographyHierarchy, scenario: &ScenarioConfig) -> Result<Vec<Agent>> {
    let mut rng: ChaCha8Rng = substream(scenario.seed, 0, 0);
    let counties: Vec<&Zone> = geo.zones_at(Level::County).collect();
    let mut leaves = Vec::with_capacity(counties.len());
    for c in &counties {
        let l = geo.leaves_under(&c.zone_id)?;
        if l.is_empty() {
            return Err(Error::config("geography", format!("county `{}` has no leaf zones", c.zone_id)));
        }
        leaves.push(l);
    }
    let counts: Vec<usize> = match (scenario.agents_per_county, scenario.total_agents) {
        (Some(n), _) => vec![n; counties.len()],
        (None, Some(total)) => {
            let mut counts = vec![0; counties.len()];
            if total > 0 {
                let w = WeightedIndex::new(counties.iter().map(|c| c.population))
                    .map_err(|_| Error::config("total_agents", "the geography has no population"))?;
                for _ in 0..total {
                    counts[w.sample(&mut rng)] += 1;
                }
            }
            counts
        }
        (None, None) => return Err(Error::config("agents_per_county", "no agent count given")),
    };
    let all_leaves: Vec<&Zone> = geo.leaves().collect();

    let mut agents = Vec::with_capacity(counts.iter().sum());
    for ((county, county_leaves), &n) in counties.iter().zip(&leaves).zip(&counts) {
        for _ in 0..n {
            let home_zone = county_leaves[pick_by_population(county_leaves, &mut rng)];
            let home = uniform_point_in(home_zone, &mut rng);
            let work = if rng.gen_bool(scenario.worker_share) {
                let same: Vec<&Zone> = county_leaves.iter().copied().filter(|z| z.zone_id != home_zone.zone_id).collect();
                let other: Vec<&Zone> = all_leaves
                    .iter()
                    .copied()
                    .filter(|z| !county_leaves.iter().any(|c| c.zone_id == z.zone_id))
                    .collect();
                let pool = match (rng.gen_bool(SAME_COUNTY_WORK_SHARE), same.is_empty(), other.is_empty()) {
                    (_, true, true) => None,
                    (true, false, _) | (false, false, true) => Some(same),
                    _ => Some(other),
                };
                pool.map(|p| {
                    let z = p[rng.gen_range(0..p.len())];
                    Workplace {
                        zone_id: z.zone_id.clone(),
                        point: uniform_point_in(z, &mut rng),
                    }
                })
            } else {
                None
            };
            let index = agents.len();
            agents.push(Agent {
                index,
                device_id: device_id(index),
                home_county: county.zone_id.clone(),
                home_zone: home_zone.zone_id.clone(),
                home,
                work,
            });
        }
    }
    Ok(agents)
}
