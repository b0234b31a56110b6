use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean Earth radius used for every great-circle distance in the crate.
pub const EARTH_RADIUS_KM: f64 = 6371.0;

/// Kilometres per degree of latitude on the reference sphere.
pub const KM_PER_DEGREE: f64 = EARTH_RADIUS_KM * std::f64::consts::PI / 180.0;

/// A WGS84-style coordinate in decimal degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    /// Validated constructor: both coordinates finite and in range.
    pub fn new(lat: f64, lon: f64) -> Result<Self> {
        if !lat.is_finite() || !(-90.0..=90.0).contains(&lat) {
            return Err(Error::Argument(format!("latitude {lat} out of range")));
        }
        if !lon.is_finite() || !(-180.0..=180.0).contains(&lon) {
            return Err(Error::Argument(format!("longitude {lon} out of range")));
        }
        Ok(Self { lat, lon })
    }

    pub fn is_valid(&self) -> bool {
        Self::new(self.lat, self.lon).is_ok()
    }

    /// Point displaced by local metric offsets (equirectangular approximation).
    pub fn offset_m(&self, north_m: f64, east_m: f64) -> GeoPoint {
        let dlat = north_m / (KM_PER_DEGREE * 1000.0);
        let dlon = east_m / (KM_PER_DEGREE * 1000.0 * self.lat.to_radians().cos());
        GeoPoint {
            lat: self.lat + dlat,
            lon: self.lon + dlon,
        }
    }

    /// Linear interpolation in coordinate space, `f` in [0, 1].
    pub fn lerp(&self, other: &GeoPoint, f: f64) -> GeoPoint {
        GeoPoint {
            lat: self.lat + (other.lat - self.lat) * f,
            lon: self.lon + (other.lon - self.lon) * f,
        }
    }
}

/// Great-circle distance in kilometres (haversine form, R = 6371.0 km).
pub fn haversine_km(a: GeoPoint, b: GeoPoint) -> f64 {
    let (lat1, lat2) = (a.lat.to_radians(), b.lat.to_radians());
    let dlat = lat2 - lat1;
    let dlon = (b.lon - a.lon).to_radians();
    let h = (dlat * 0.5).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon * 0.5).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

/// Unweighted mean of coordinates. Adequate for clusters a few hundred metres wide.
pub fn centroid<'a>(points: impl IntoIterator<Item = &'a GeoPoint>) -> Option<GeoPoint> {
    let (mut lat, mut lon, mut n) = (0.0, 0.0, 0usize);
    for p in points {
        lat += p.lat;
        lon += p.lon;
        n += 1;
    }
    (n > 0).then(|| GeoPoint {
        lat: lat / n as f64,
        lon: lon / n as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(lat: f64, lon: f64) -> GeoPoint {
        GeoPoint::new(lat, lon).unwrap()
    }

    /// Spherical law of cosines, an independent route to the same distance.
    fn cosine_law_km(a: GeoPoint, b: GeoPoint) -> f64 {
        let (la, lb) = (a.lat.to_radians(), b.lat.to_radians());
        let c = la.sin() * lb.sin() + la.cos() * lb.cos() * (b.lon - a.lon).to_radians().cos();
        EARTH_RADIUS_KM * c.clamp(-1.0, 1.0).acos()
    }

    #[test]
    fn haversine_examples() {
        assert_eq!(haversine_km(p(10.0, 20.0), p(10.0, 20.0)), 0.0);
        let one_degree = haversine_km(p(0.0, 0.0), p(0.0, 1.0));
        assert!((one_degree - cosine_law_km(p(0.0, 0.0), p(0.0, 1.0))).abs() < 1e-9);
        assert!((one_degree - 111.195).abs() < 0.001, "{one_degree}");
        let antipodal = haversine_km(p(0.0, 0.0), p(0.0, 180.0));
        assert!((antipodal - std::f64::consts::PI * EARTH_RADIUS_KM).abs() < 1e-9);
        assert!((antipodal - 20015.087).abs() < 0.01);
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(GeoPoint::new(123.0, 0.0).is_err());
        assert!(GeoPoint::new(0.0, -180.5).is_err());
        assert!(GeoPoint::new(f64::NAN, 0.0).is_err());
        assert!(GeoPoint::new(-90.0, 180.0).is_ok());
    }

    #[test]
    fn offsets_are_metric() {
        let o = p(39.0, -77.0);
        let n = o.offset_m(1000.0, 0.0);
        let e = o.offset_m(0.0, 1000.0);
        assert!((haversine_km(o, n) - 1.0).abs() < 1e-6);
        assert!((haversine_km(o, e) - 1.0).abs() < 1e-3);
    }

    fn point() -> impl Strategy<Value = GeoPoint> {
        (-90.0..=90.0f64, -180.0..=180.0f64).prop_map(|(lat, lon)| GeoPoint { lat, lon })
    }

    proptest! {
        #[test]
        fn triangle_inequality(a in point(), b in point(), c in point()) {
            let ab = haversine_km(a, b);
            let bc = haversine_km(b, c);
            let ac = haversine_km(a, c);
            prop_assert!(ac <= ab + bc + 1e-9);
        }

        #[test]
        fn symmetric_and_bounded(a in point(), b in point()) {
            let d = haversine_km(a, b);
            prop_assert!(d >= 0.0);
            prop_assert!(d <= std::f64::consts::PI * EARTH_RADIUS_KM + 1e-9);
            prop_assert_eq!(d, haversine_km(b, a));
        }
    }
}
