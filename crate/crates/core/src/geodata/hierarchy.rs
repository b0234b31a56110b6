use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::polygon::{BBox, Containment, Ring};
use super::GeoPoint;
use crate::error::{Error, Result};

/// Administrative level, ordered from coarsest to finest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Nation,
    State,
    County,
    Zone,
}

impl Level {
    pub const ALL: [Level; 4] = [Level::Nation, Level::State, Level::County, Level::Zone];

    pub fn as_str(self) -> &'static str {
        match self {
            Level::Nation => "nation",
            Level::State => "state",
            Level::County => "county",
            Level::Zone => "zone",
        }
    }

    fn index(self) -> usize {
        self as usize
    }

    fn parent(self) -> Option<Level> {
        match self {
            Level::Nation => None,
            Level::State => Some(Level::Nation),
            Level::County => Some(Level::State),
            Level::Zone => Some(Level::County),
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Level {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nation" => Ok(Level::Nation),
            "state" => Ok(Level::State),
            "county" => Ok(Level::County),
            "zone" => Ok(Level::Zone),
            other => Err(Error::Argument(format!("unknown level `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Zone {
    pub zone_id: String,
    pub level: Level,
    pub parent_id: Option<String>,
    pub polygon: Ring,
    pub population: u64,
}

/// Validated, immutable nation → state → county → zone hierarchy.
#[derive(Debug, Clone)]
pub struct GeographyHierarchy {
    /// Sorted by `zone_id`.
    zones: Vec<Zone>,
    by_id: HashMap<String, usize>,
    /// `ancestors[i][level]` is the index of zone `i`'s ancestor at `level`.
    ancestors: Vec<[Option<usize>; 4]>,
    children: Vec<Vec<usize>>,
    /// Leaf zone indices, ascending by id.
    leaves: Vec<usize>,
    index: GridIndex,
}

/// Leaf pairs are probed with this many sample points when checking overlap.
const OVERLAP_SAMPLES: usize = 64;

impl GeographyHierarchy {
    pub fn new(mut zones: Vec<Zone>) -> Result<Self> {
        zones.sort_by(|a, b| a.zone_id.cmp(&b.zone_id));
        let mut by_id = HashMap::with_capacity(zones.len());
        for (i, z) in zones.iter().enumerate() {
            if z.zone_id.is_empty() {
                return Err(Error::Geography("empty zone_id".into()));
            }
            if by_id.insert(z.zone_id.clone(), i).is_some() {
                return Err(Error::Geography(format!("duplicate zone_id `{}`", z.zone_id)));
            }
        }

        let nations: Vec<_> = zones.iter().filter(|z| z.level == Level::Nation).collect();
        if nations.len() != 1 {
            return Err(Error::Geography(format!(
                "expected exactly one nation-level zone, found {}",
                nations.len()
            )));
        }

        let mut children = vec![Vec::new(); zones.len()];
        let mut parent_of = vec![None; zones.len()];
        for (i, z) in zones.iter().enumerate() {
            match (z.level.parent(), &z.parent_id) {
                (None, None) => {}
                (None, Some(p)) => {
                    return Err(Error::Geography(format!("nation `{}` has parent `{p}`", z.zone_id)))
                }
                (Some(_), None) => {
                    return Err(Error::Geography(format!("orphan zone `{}` has no parent_id", z.zone_id)))
                }
                (Some(expected), Some(p)) => {
                    let &pi = by_id.get(p).ok_or_else(|| {
                        Error::Geography(format!("zone `{}` references unknown parent `{p}`", z.zone_id))
                    })?;
                    if zones[pi].level != expected {
                        return Err(Error::Geography(format!(
                            "zone `{}` ({}) has parent `{p}` at level {}, expected {expected}",
                            z.zone_id, z.level, zones[pi].level
                        )));
                    }
                    children[pi].push(i);
                    parent_of[i] = Some(pi);
                }
            }
        }

        // Parent levels strictly decrease, so every chain reaches the nation.
        let ancestors: Vec<[Option<usize>; 4]> = (0..zones.len())
            .map(|i| {
                let mut out = [None; 4];
                let mut cur = Some(i);
                while let Some(c) = cur {
                    out[zones[c].level.index()] = Some(c);
                    cur = parent_of[c];
                }
                out
            })
            .collect();

        for (i, z) in zones.iter().enumerate() {
            if z.level == Level::Zone {
                continue;
            }
            let sum: u64 = children[i].iter().map(|&c| zones[c].population).sum();
            if sum != z.population {
                return Err(Error::Geography(format!(
                    "{} `{}` population {} differs from the sum of its children ({sum})",
                    z.level, z.zone_id, z.population
                )));
            }
        }

        let leaves: Vec<usize> = (0..zones.len()).filter(|&i| zones[i].level == Level::Zone).collect();
        let index = GridIndex::build(&zones, &leaves);
        let geo = GeographyHierarchy {
            zones,
            by_id,
            ancestors,
            children,
            leaves,
            index,
        };
        geo.check_leaf_overlap()?;
        Ok(geo)
    }

    fn check_leaf_overlap(&self) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0f6e0);
        for (k, &a) in self.leaves.iter().enumerate() {
            let ra = &self.zones[a].polygon;
            for &b in &self.leaves[k + 1..] {
                let rb = &self.zones[b].polygon;
                let Some(bx) = ra.bbox().intersection(rb.bbox()) else {
                    continue;
                };
                let both = |p: GeoPoint| {
                    ra.containment(p) == Containment::Inside && rb.containment(p) == Containment::Inside
                };
                let vertex_hit = ra.vertices().iter().any(|&v| rb.containment(v) == Containment::Inside)
                    || rb.vertices().iter().any(|&v| ra.containment(v) == Containment::Inside);
                let sample_hit = (0..OVERLAP_SAMPLES).any(|_| {
                    both(GeoPoint {
                        lat: rng.gen_range(bx.min_lat..=bx.max_lat),
                        lon: rng.gen_range(bx.min_lon..=bx.max_lon),
                    })
                });
                if vertex_hit || sample_hit {
                    return Err(Error::Geography(format!(
                        "leaf zones `{}` and `{}` overlap",
                        self.zones[a].zone_id, self.zones[b].zone_id
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn zone(&self, zone_id: &str) -> Option<&Zone> {
        self.by_id.get(zone_id).map(|&i| &self.zones[i])
    }

    fn require(&self, zone_id: &str) -> Result<usize> {
        self.by_id
            .get(zone_id)
            .copied()
            .ok_or_else(|| Error::UnknownZone(zone_id.to_owned()))
    }

    /// All zones, ascending by id.
    pub fn zones(&self) -> &[Zone] {
        &self.zones
    }

    pub fn zones_at(&self, level: Level) -> impl Iterator<Item = &Zone> + '_ {
        self.zones.iter().filter(move |z| z.level == level)
    }

    pub fn leaves(&self) -> impl Iterator<Item = &Zone> + '_ {
        self.leaves.iter().map(|&i| &self.zones[i])
    }

    pub fn children(&self, zone_id: &str) -> Result<Vec<&Zone>> {
        let i = self.require(zone_id)?;
        Ok(self.children[i].iter().map(|&c| &self.zones[c]).collect())
    }

    /// Leaf zones beneath `zone_id` (itself if it is a leaf), ascending by id.
    pub fn leaves_under(&self, zone_id: &str) -> Result<Vec<&Zone>> {
        let i = self.require(zone_id)?;
        let level = self.zones[i].level;
        Ok(self
            .leaves
            .iter()
            .filter(|&&l| self.ancestors[l][level.index()] == Some(i))
            .map(|&l| &self.zones[l])
            .collect())
    }

    pub fn nation(&self) -> &Zone {
        self.zones_at(Level::Nation).next().expect("validated: one nation")
    }

    /// Walks the parent chain of `zone_id` up to `level`.
    pub fn ancestor(&self, zone_id: &str, level: Level) -> Result<&str> {
        let i = self.require(zone_id)?;
        let own = self.zones[i].level;
        if level > own {
            return Err(Error::Argument(format!(
                "level {level} is below {own} zone `{zone_id}`"
            )));
        }
        let a = self.ancestors[i][level.index()].expect("validated chain");
        Ok(&self.zones[a].zone_id)
    }

    /// Leaf zone covering `p`; boundary points go to the smallest zone id.
    pub fn assign_zone(&self, p: GeoPoint) -> Option<&str> {
        // Candidates come back in ascending leaf index, i.e. ascending id.
        self.index
            .candidates(p)
            .iter()
            .map(|&i| &self.zones[i as usize])
            .find(|z| z.polygon.containment(p).covers())
            .map(|z| z.zone_id.as_str())
    }

    pub fn covers(&self, p: GeoPoint) -> bool {
        self.assign_zone(p).is_some()
    }

    pub fn population(&self, zone_id: &str) -> Result<u64> {
        Ok(self.zones[self.require(zone_id)?].population)
    }
}

/// Uniform grid over the leaf bounding boxes.
#[derive(Debug, Clone)]
struct GridIndex {
    bbox: Option<BBox>,
    nx: usize,
    ny: usize,
    cells: Vec<Vec<u32>>,
}

impl GridIndex {
    fn build(zones: &[Zone], leaves: &[usize]) -> Self {
        let bbox = leaves
            .iter()
            .map(|&i| *zones[i].polygon.bbox())
            .reduce(|a, b| a.union(&b));
        let Some(bb) = bbox else {
            return GridIndex {
                bbox: None,
                nx: 0,
                ny: 0,
                cells: Vec::new(),
            };
        };
        let side = ((leaves.len() as f64).sqrt().ceil() as usize * 2).clamp(1, 512);
        let (nx, ny) = (side, side);
        let mut cells = vec![Vec::new(); nx * ny];
        let tmp = GridIndex {
            bbox,
            nx,
            ny,
            cells: Vec::new(),
        };
        for &i in leaves {
            let b = zones[i].polygon.bbox();
            let (x0, y0) = tmp.cell_of(b.min_lon, b.min_lat, &bb);
            let (x1, y1) = tmp.cell_of(b.max_lon, b.max_lat, &bb);
            for y in y0..=y1 {
                for x in x0..=x1 {
                    cells[y * nx + x].push(i as u32);
                }
            }
        }
        GridIndex { bbox, nx, ny, cells }
    }

    fn cell_of(&self, lon: f64, lat: f64, bb: &BBox) -> (usize, usize) {
        let fx = (lon - bb.min_lon) / (bb.max_lon - bb.min_lon).max(f64::MIN_POSITIVE);
        let fy = (lat - bb.min_lat) / (bb.max_lat - bb.min_lat).max(f64::MIN_POSITIVE);
        let x = ((fx * self.nx as f64) as usize).min(self.nx - 1);
        let y = ((fy * self.ny as f64) as usize).min(self.ny - 1);
        (x, y)
    }

    fn candidates(&self, p: GeoPoint) -> &[u32] {
        match &self.bbox {
            Some(bb) if bb.contains(p) => {
                let (x, y) = self.cell_of(p.lon, p.lat, bb);
                &self.cells[y * self.nx + x]
            }
            _ => &[],
        }
    }
}
