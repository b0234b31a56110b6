use chrono::NaiveDate;

use super::{DeviceProfile, Purpose, Trip};
use crate::geodata::haversine_km;

/// Distance from home beyond which a trip endpoint means the device left home (one mile).
pub const HOME_RADIUS_KM: f64 = 1.61;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HomeStatus {
    StayedHome,
    LeftHome,
    Unobserved,
}

/// Stay-at-home rule: every trip of the day keeps both endpoints within
/// [`HOME_RADIUS_KM`] of the home anchor.
pub fn is_staying_home<'a>(
    trips: impl IntoIterator<Item = &'a Trip>,
    profile: Option<&DeviceProfile>,
    observed: bool,
) -> HomeStatus {
    let Some(profile) = profile else {
        return HomeStatus::Unobserved;
    };
    if !observed {
        return HomeStatus::Unobserved;
    }
    let home = profile.home_anchor;
    let away = trips
        .into_iter()
        .any(|t| haversine_km(home, t.origin).max(haversine_km(home, t.dest)) > HOME_RADIUS_KM);
    if away {
        HomeStatus::LeftHome
    } else {
        HomeStatus::StayedHome
    }
}

/// One observed local day of one device.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceDay {
    pub device_id: String,
    pub date: NaiveDate,
    /// Indices into the device's trip list, departing on `date`.
    pub trips: Vec<usize>,
    pub status: HomeStatus,
    pub km_traveled: f64,
    pub work_trips: u32,
    pub nonwork_trips: u32,
}

/// Builds a [`DeviceDay`] for every date in `observed_dates` (ascending).
pub fn device_days(
    device_id: &str,
    observed_dates: &[NaiveDate],
    trips: &[Trip],
    profile: Option<&DeviceProfile>,
) -> Vec<DeviceDay> {
    observed_dates
        .iter()
        .map(|&date| {
            let idx: Vec<usize> = (0..trips.len()).filter(|&i| trips[i].trip_date == date).collect();
            let day_trips = idx.iter().map(|&i| &trips[i]);
            let status = is_staying_home(day_trips.clone(), profile, true);
            let work = day_trips.clone().filter(|t| t.purpose == Purpose::Work).count() as u32;
            DeviceDay {
                device_id: device_id.to_owned(),
                date,
                km_traveled: day_trips.clone().map(|t| t.distance_km).sum(),
                work_trips: work,
                nonwork_trips: idx.len() as u32 - work,
                trips: idx,
                status,
            }
        })
        .collect()
}
