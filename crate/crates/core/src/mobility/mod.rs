//! Stays, home/work anchors, trips and stay-at-home days for one device at a time.
//!
//! Everything here is a pure function of one device's cleaned pings, so the
//! pipeline runs devices independently and merges results in device-id order.

mod days;
mod dump;
mod profile;
mod stays;
mod trips;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

pub use days::{device_days, is_staying_home, DeviceDay, HomeStatus, HOME_RADIUS_KM};
pub use dump::{write_profiles_csv, write_stays_csv, write_trips_csv};
pub use profile::{impute_home, impute_work, AnchorParams, DeviceProfile, HomeAnchor};
pub use stays::{detect_stays, Stay, StayParams};
pub use trips::{county_of, extract_trips, path_km, Purpose, Trip};

use crate::geodata::GeographyHierarchy;
use crate::ingest::DeviceTrace;
use crate::time::LocalClock;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MobilityConfig {
    pub stay_radius_m: f64,
    pub min_dwell_s: i64,
    #[serde(flatten)]
    pub anchors: AnchorParams,
    #[serde(skip)]
    pub clock: LocalClock,
}

impl Default for MobilityConfig {
    fn default() -> Self {
        Self {
            stay_radius_m: 300.0,
            min_dwell_s: 300,
            anchors: AnchorParams::default(),
            clock: LocalClock::default(),
        }
    }
}

impl MobilityConfig {
    pub fn stay_params(&self) -> StayParams {
        StayParams {
            radius_m: self.stay_radius_m,
            min_dwell_s: self.min_dwell_s,
        }
    }
}

/// Everything inferred for one device.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceOutcome {
    pub device_id: String,
    pub stays: Vec<Stay>,
    pub profile: Option<DeviceProfile>,
    pub trips: Vec<Trip>,
    pub days: Vec<DeviceDay>,
}

/// Distinct local dates with at least one ping, ascending.
pub fn observed_dates(trace: &DeviceTrace, clock: &LocalClock) -> Vec<NaiveDate> {
    let mut dates: Vec<NaiveDate> = trace.fixes.iter().map(|f| clock.date(f.timestamp)).collect();
    dates.dedup();
    dates
}

/// Runs stay detection, anchor imputation, trip extraction and the daily
/// stay-at-home rule on one cleaned trace.
pub fn process_device(trace: &DeviceTrace, cfg: &MobilityConfig, geo: &GeographyHierarchy) -> DeviceOutcome {
    let clock = cfg.clock;
    let stays = detect_stays(&trace.device_id, &trace.fixes, cfg.stay_params(), geo);
    let dates = observed_dates(trace, &clock);
    let profile = impute_home(&stays, &clock, &cfg.anchors).map(|home| DeviceProfile {
        device_id: trace.device_id.clone(),
        work_zone: impute_work(&stays, &home.zone_id, &clock, &cfg.anchors),
        home_zone: home.zone_id,
        home_anchor: home.anchor,
        observed_days: dates.len(),
    });
    let trips = extract_trips(&stays, &trace.fixes, profile.as_ref(), geo, &clock);
    let days = device_days(&trace.device_id, &dates, &trips, profile.as_ref());
    DeviceOutcome {
        device_id: trace.device_id.clone(),
        stays,
        profile,
        trips,
        days,
    }
}
