//! Intermediate CSV dumps for debugging and decoupled runs.

use std::io::Write;

use super::{DeviceProfile, Stay, Trip};
use crate::error::Result;

pub fn write_stays_csv<'a>(w: impl Write, stays: impl IntoIterator<Item = &'a Stay>) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["device_id", "zone_id", "lat", "lon", "start", "end", "ping_count"])?;
    for s in stays {
        out.write_record([
            s.device_id.clone(),
            s.zone_id.clone().unwrap_or_default(),
            s.centroid.lat.to_string(),
            s.centroid.lon.to_string(),
            s.start.to_string(),
            s.end.to_string(),
            s.ping_count.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_trips_csv<'a>(w: impl Write, trips: impl IntoIterator<Item = &'a Trip>) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "device_id",
        "origin_zone",
        "dest_zone",
        "depart",
        "arrive",
        "distance_km",
        "purpose",
        "crosses_county",
        "trip_date",
    ])?;
    for t in trips {
        out.write_record([
            t.device_id.clone(),
            t.origin_zone.clone().unwrap_or_default(),
            t.dest_zone.clone().unwrap_or_default(),
            t.depart.to_string(),
            t.arrive.to_string(),
            t.distance_km.to_string(),
            t.purpose.as_str().to_owned(),
            t.crosses_county.to_string(),
            t.trip_date.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_profiles_csv<'a>(w: impl Write, profiles: impl IntoIterator<Item = &'a DeviceProfile>) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["device_id", "home_zone", "work_zone", "home_lat", "home_lon", "observed_days"])?;
    for p in profiles {
        out.write_record([
            p.device_id.clone(),
            p.home_zone.clone(),
            p.work_zone.clone().unwrap_or_default(),
            p.home_anchor.lat.to_string(),
            p.home_anchor.lon.to_string(),
            p.observed_days.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}
