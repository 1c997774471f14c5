//! UTC timestamps at millisecond precision.
//!
//! Both timelines use the same representation: `T` (when a fact held in the
//! world) and `T'` (when the engine recorded it). Values are stored as epoch
//! milliseconds and rendered as ISO 8601 with a `Z` suffix.

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicI64, Ordering};

use chrono::{DateTime, Datelike, Duration, NaiveDate, NaiveDateTime, TimeZone, Timelike, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid timestamp {0:?}")]
pub struct TimestampParseError(pub String);

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Timestamp(i64);

impl Timestamp {
    pub const fn from_millis(ms: i64) -> Self {
        Timestamp(ms)
    }

    pub const fn as_millis(self) -> i64 {
        self.0
    }

    pub fn now() -> Self {
        Timestamp(Utc::now().timestamp_millis())
    }

    /// Midnight UTC on the given calendar date.
    pub fn from_ymd(year: i32, month: u32, day: u32) -> Option<Self> {
        NaiveDate::from_ymd_opt(year, month, day)
            .and_then(|d| d.and_hms_opt(0, 0, 0))
            .map(|dt| Timestamp(Utc.from_utc_datetime(&dt).timestamp_millis()))
    }

    pub fn to_datetime(self) -> DateTime<Utc> {
        DateTime::from_timestamp_millis(self.0).unwrap_or(DateTime::<Utc>::MIN_UTC)
    }

    pub fn from_datetime(dt: DateTime<Utc>) -> Self {
        Timestamp(dt.timestamp_millis())
    }

    /// Accepts RFC 3339 with any offset, a naive `YYYY-MM-DDTHH:MM:SS[.f]`
    /// (taken as UTC), or a bare `YYYY-MM-DD`. Sub-millisecond digits are
    /// truncated.
    pub fn parse(s: &str) -> Result<Self, TimestampParseError> {
        let s = s.trim();
        if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
            return Ok(Timestamp(dt.with_timezone(&Utc).timestamp_millis()));
        }
        for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"] {
            if let Ok(ndt) = NaiveDateTime::parse_from_str(s, fmt) {
                return Ok(Timestamp(Utc.from_utc_datetime(&ndt).timestamp_millis()));
            }
        }
        if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
            if let Some(ndt) = d.and_hms_opt(0, 0, 0) {
                return Ok(Timestamp(Utc.from_utc_datetime(&ndt).timestamp_millis()));
            }
        }
        Err(TimestampParseError(s.to_string()))
    }

    /// `YYYY-MM-DDTHH:MM:SS.mmmZ`
    pub fn to_iso(self) -> String {
        self.to_datetime().format("%Y-%m-%dT%H:%M:%S%.3fZ").to_string()
    }

    pub fn is_midnight(self) -> bool {
        let dt = self.to_datetime();
        dt.hour() == 0 && dt.minute() == 0 && dt.second() == 0 && dt.timestamp_subsec_millis() == 0
    }

    /// Date only at midnight UTC, the full timestamp otherwise.
    pub fn to_display_date(self) -> String {
        if self.is_midnight() {
            self.to_datetime().format("%Y-%m-%d").to_string()
        } else {
            self.to_iso()
        }
    }

    pub fn minus_days(self, days: i64) -> Self {
        Timestamp(self.0 - days * 86_400_000)
    }

    /// Calendar-aware month subtraction; the day is clamped to the target
    /// month's length.
    pub fn minus_months(self, months: i64) -> Self {
        let dt = self.to_datetime();
        let total = dt.year() as i64 * 12 + dt.month0() as i64 - months;
        let year = total.div_euclid(12) as i32;
        let month0 = total.rem_euclid(12) as u32;
        let mut day = dt.day();
        let date = loop {
            if let Some(d) = NaiveDate::from_ymd_opt(year, month0 + 1, day) {
                break d;
            }
            day -= 1;
        };
        let ndt = date.and_time(dt.time());
        Timestamp(Utc.from_utc_datetime(&ndt).timestamp_millis())
    }

    pub fn plus(self, d: Duration) -> Self {
        Timestamp(self.0 + d.num_milliseconds())
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_iso())
    }
}

impl FromStr for Timestamp {
    type Err = TimestampParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Timestamp::parse(s)
    }
}

// Human-readable formats carry ISO strings; binary formats carry the raw i64.
impl Serialize for Timestamp {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        if serializer.is_human_readable() {
            serializer.serialize_str(&self.to_iso())
        } else {
            serializer.serialize_i64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Timestamp {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        if deserializer.is_human_readable() {
            let s = String::deserialize(deserializer)?;
            Timestamp::parse(&s).map_err(serde::de::Error::custom)
        } else {
            i64::deserialize(deserializer).map(Timestamp)
        }
    }
}

/// Source of `T'` instants.
pub trait Clock: Send + Sync {
    fn now(&self) -> Timestamp;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> Timestamp {
        Timestamp::now()
    }
}

/// Deterministic clock: starts at a fixed instant and advances by `step_ms`
/// on every read.
#[derive(Debug)]
pub struct ManualClock {
    next: AtomicI64,
    step_ms: i64,
}

impl ManualClock {
    pub fn new(start: Timestamp, step_ms: i64) -> Self {
        ManualClock {
            next: AtomicI64::new(start.as_millis()),
            step_ms,
        }
    }
}

impl Clock for ManualClock {
    fn now(&self) -> Timestamp {
        Timestamp(self.next.fetch_add(self.step_ms, Ordering::SeqCst))
    }
}
