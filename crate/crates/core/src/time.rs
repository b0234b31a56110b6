//! Local calendar arithmetic over epoch seconds with a fixed UTC offset.

use chrono::{Datelike, NaiveDate, Weekday};

pub const SECONDS_PER_DAY: i64 = 86_400;

/// Converts epoch seconds to local dates and seconds-of-day under a fixed offset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LocalClock {
    pub utc_offset_s: i64,
}

impl LocalClock {
    pub fn new(utc_offset_s: i64) -> Self {
        Self { utc_offset_s }
    }

    pub fn local_seconds(&self, t: i64) -> i64 {
        t + self.utc_offset_s
    }

    /// Local calendar date containing epoch second `t`.
    pub fn date(&self, t: i64) -> NaiveDate {
        date_from_day_number(self.local_seconds(t).div_euclid(SECONDS_PER_DAY))
    }

    /// Epoch second at which local `date` begins.
    pub fn day_start(&self, date: NaiveDate) -> i64 {
        day_number(date) * SECONDS_PER_DAY - self.utc_offset_s
    }

    /// Epoch second of `date` at local `seconds_of_day` (may exceed one day).
    pub fn at(&self, date: NaiveDate, seconds_of_day: i64) -> i64 {
        self.day_start(date) + seconds_of_day
    }
}

/// Days since 1970-01-01.
pub fn day_number(date: NaiveDate) -> i64 {
    i64::from(date.num_days_from_ce()) - i64::from(EPOCH_DAYS_FROM_CE)
}

pub fn date_from_day_number(n: i64) -> NaiveDate {
    NaiveDate::from_num_days_from_ce_opt((n + i64::from(EPOCH_DAYS_FROM_CE)) as i32)
        .expect("date within chrono range")
}

const EPOCH_DAYS_FROM_CE: i32 = 719_163;

pub fn is_weekday(date: NaiveDate) -> bool {
    !matches!(date.weekday(), Weekday::Sat | Weekday::Sun)
}

/// Inclusive date range iterator.
pub fn dates(start: NaiveDate, end: NaiveDate) -> impl Iterator<Item = NaiveDate> {
    start.iter_days().take_while(move |d| *d <= end)
}

/// Length in seconds of the overlap between `[a0, a1)` and `[b0, b1)`.
pub fn overlap(a0: i64, a1: i64, b0: i64, b1: i64) -> i64 {
    (a1.min(b1) - a0.max(b0)).max(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epoch_and_offsets() {
        let utc = LocalClock::default();
        let d = NaiveDate::from_ymd_opt(1970, 1, 1).unwrap();
        assert_eq!(day_number(d), 0);
        assert_eq!(utc.date(0), d);
        assert_eq!(utc.date(-1), d.pred_opt().unwrap());
        let feb1 = NaiveDate::from_ymd_opt(2020, 2, 1).unwrap();
        assert_eq!(utc.day_start(feb1), 1_580_515_200);
        let est = LocalClock::new(-5 * 3600);
        // 03:00 UTC on Feb 1 is still Jan 31 at UTC-5.
        assert_eq!(est.date(1_580_515_200 + 3 * 3600), feb1.pred_opt().unwrap());
        assert_eq!(est.date(est.day_start(feb1)), feb1);
    }

    #[test]
    fn weekdays_and_overlap() {
        let feb1 = NaiveDate::from_ymd_opt(2020, 2, 1).unwrap();
        assert!(!is_weekday(feb1));
        assert!(is_weekday(feb1.succ_opt().unwrap().succ_opt().unwrap()));
        assert_eq!(dates(feb1, feb1).count(), 1);
        assert_eq!(overlap(0, 10, 5, 20), 5);
        assert_eq!(overlap(0, 10, 10, 20), 0);
    }
}
