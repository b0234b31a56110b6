//! Planar ring geometry in (lon, lat) coordinate space.

use super::GeoPoint;

/// Tolerance, in degrees, for deciding that a point lies on a ring edge.
const BOUNDARY_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Containment {
    Inside,
    Boundary,
    Outside,
}

impl Containment {
    pub fn covers(self) -> bool {
        !matches!(self, Containment::Outside)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub min_lat: f64,
    pub min_lon: f64,
    pub max_lat: f64,
    pub max_lon: f64,
}

impl BBox {
    pub fn contains(&self, p: GeoPoint) -> bool {
        p.lat >= self.min_lat && p.lat <= self.max_lat && p.lon >= self.min_lon && p.lon <= self.max_lon
    }

    pub fn intersection(&self, other: &BBox) -> Option<BBox> {
        let b = BBox {
            min_lat: self.min_lat.max(other.min_lat),
            min_lon: self.min_lon.max(other.min_lon),
            max_lat: self.max_lat.min(other.max_lat),
            max_lon: self.max_lon.min(other.max_lon),
        };
        (b.min_lat <= b.max_lat && b.min_lon <= b.max_lon).then_some(b)
    }

    pub fn union(&self, other: &BBox) -> BBox {
        BBox {
            min_lat: self.min_lat.min(other.min_lat),
            min_lon: self.min_lon.min(other.min_lon),
            max_lat: self.max_lat.max(other.max_lat),
            max_lon: self.max_lon.max(other.max_lon),
        }
    }
}

/// A simple polygon stored without the closing vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct Ring {
    vertices: Vec<GeoPoint>,
    bbox: BBox,
}

impl Ring {
    /// Builds a ring from an open or closed vertex list, checking that it has at
    /// least three distinct vertices and no self-intersections.
    pub fn new(mut vertices: Vec<GeoPoint>) -> Result<Self, String> {
        if vertices.len() > 1 && vertices.first() == vertices.last() {
            vertices.pop();
        }
        let mut distinct: Vec<(u64, u64)> = vertices
            .iter()
            .map(|p| (p.lat.to_bits(), p.lon.to_bits()))
            .collect();
        distinct.sort_unstable();
        distinct.dedup();
        if distinct.len() < 3 {
            return Err(format!("ring has {} distinct vertices, need at least 3", distinct.len()));
        }
        if let Some(p) = vertices.iter().find(|p| !p.is_valid()) {
            return Err(format!("vertex ({}, {}) out of range", p.lat, p.lon));
        }
        let bbox = vertices.iter().fold(
            BBox {
                min_lat: f64::INFINITY,
                min_lon: f64::INFINITY,
                max_lat: f64::NEG_INFINITY,
                max_lon: f64::NEG_INFINITY,
            },
            |b, p| BBox {
                min_lat: b.min_lat.min(p.lat),
                min_lon: b.min_lon.min(p.lon),
                max_lat: b.max_lat.max(p.lat),
                max_lon: b.max_lon.max(p.lon),
            },
        );
        let ring = Ring { vertices, bbox };
        if let Some((i, j)) = ring.self_intersection() {
            return Err(format!("ring self-intersects at edges {i} and {j}"));
        }
        Ok(ring)
    }

    /// Axis-aligned rectangle, counter-clockwise from the south-west corner.
    pub fn rectangle(min_lat: f64, min_lon: f64, max_lat: f64, max_lon: f64) -> Result<Self, String> {
        Ring::new(vec![
            GeoPoint { lat: min_lat, lon: min_lon },
            GeoPoint { lat: min_lat, lon: max_lon },
            GeoPoint { lat: max_lat, lon: max_lon },
            GeoPoint { lat: max_lat, lon: min_lon },
        ])
    }

    pub fn vertices(&self) -> &[GeoPoint] {
        &self.vertices
    }

    pub fn bbox(&self) -> &BBox {
        &self.bbox
    }

    fn edges(&self) -> impl Iterator<Item = (GeoPoint, GeoPoint)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// Even-odd containment with explicit boundary detection.
    pub fn containment(&self, p: GeoPoint) -> Containment {
        if !self.bbox.contains(p) {
            return Containment::Outside;
        }
        let mut inside = false;
        for (a, b) in self.edges() {
            if on_segment(p, a, b) {
                return Containment::Boundary;
            }
            if (a.lat > p.lat) != (b.lat > p.lat) {
                let x = a.lon + (p.lat - a.lat) / (b.lat - a.lat) * (b.lon - a.lon);
                if p.lon < x {
                    inside = !inside;
                }
            }
        }
        if inside {
            Containment::Inside
        } else {
            Containment::Outside
        }
    }

    /// Planar area in square degrees (shoelace).
    pub fn area_deg2(&self) -> f64 {
        self.edges()
            .map(|(a, b)| a.lon * b.lat - b.lon * a.lat)
            .sum::<f64>()
            .abs()
            * 0.5
    }

    fn self_intersection(&self) -> Option<(usize, usize)> {
        let n = self.vertices.len();
        let edges: Vec<_> = self.edges().collect();
        for i in 0..n {
            for j in (i + 1)..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                if adjacent {
                    continue;
                }
                if segments_intersect(edges[i].0, edges[i].1, edges[j].0, edges[j].1) {
                    return Some((i, j));
                }
            }
        }
        None
    }
}

fn cross(o: GeoPoint, a: GeoPoint, b: GeoPoint) -> f64 {
    (a.lon - o.lon) * (b.lat - o.lat) - (a.lat - o.lat) * (b.lon - o.lon)
}

fn on_segment(p: GeoPoint, a: GeoPoint, b: GeoPoint) -> bool {
    let len = ((b.lon - a.lon).powi(2) + (b.lat - a.lat).powi(2)).sqrt();
    if cross(a, b, p).abs() > BOUNDARY_EPS * len.max(1.0) {
        return false;
    }
    p.lon >= a.lon.min(b.lon) - BOUNDARY_EPS
        && p.lon <= a.lon.max(b.lon) + BOUNDARY_EPS
        && p.lat >= a.lat.min(b.lat) - BOUNDARY_EPS
        && p.lat <= a.lat.max(b.lat) + BOUNDARY_EPS
}

fn segments_intersect(a: GeoPoint, b: GeoPoint, c: GeoPoint, d: GeoPoint) -> bool {
    let d1 = cross(c, d, a);
    let d2 = cross(c, d, b);
    let d3 = cross(a, b, c);
    let d4 = cross(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    on_segment(a, c, d) || on_segment(b, c, d) || on_segment(c, a, b) || on_segment(d, a, b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gp(lat: f64, lon: f64) -> GeoPoint {
        GeoPoint { lat, lon }
    }

    #[test]
    fn square_containment() {
        let sq = Ring::rectangle(0.0, 0.0, 1.0, 1.0).unwrap();
        assert_eq!(sq.containment(gp(0.5, 0.5)), Containment::Inside);
        assert_eq!(sq.containment(gp(1.5, 0.5)), Containment::Outside);
        assert_eq!(sq.containment(gp(0.0, 0.5)), Containment::Boundary);
        assert_eq!(sq.containment(gp(1.0, 1.0)), Containment::Boundary);
        assert!((sq.area_deg2() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn concave_ring() {
        // U shape opening north.
        let u = Ring::new(vec![
            gp(0.0, 0.0),
            gp(0.0, 3.0),
            gp(3.0, 3.0),
            gp(3.0, 2.0),
            gp(1.0, 2.0),
            gp(1.0, 1.0),
            gp(3.0, 1.0),
            gp(3.0, 0.0),
        ])
        .unwrap();
        assert_eq!(u.containment(gp(2.0, 1.5)), Containment::Outside);
        assert_eq!(u.containment(gp(2.0, 0.5)), Containment::Inside);
        assert_eq!(u.containment(gp(0.5, 1.5)), Containment::Inside);
    }

    #[test]
    fn rejects_degenerate_and_bowtie() {
        assert!(Ring::new(vec![gp(0.0, 0.0), gp(1.0, 1.0), gp(0.0, 0.0)]).is_err());
        let bowtie = Ring::new(vec![gp(0.0, 0.0), gp(1.0, 1.0), gp(1.0, 0.0), gp(0.0, 1.0)]);
        assert!(bowtie.is_err());
        let closed = Ring::new(vec![gp(0.0, 0.0), gp(0.0, 1.0), gp(1.0, 1.0), gp(0.0, 0.0)]).unwrap();
        assert_eq!(closed.vertices().len(), 3);
    }
}
