use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate, Weekday};
use serde::{Deserialize, Serialize};

use super::TsError;

/// ISO-8601 week: the key every weekly table and series is indexed by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct WeekKey {
    iso_year: i32,
    iso_week: u32,
}

impl WeekKey {
    pub fn new(iso_year: i32, iso_week: u32) -> Result<Self, TsError> {
        NaiveDate::from_isoywd_opt(iso_year, iso_week, Weekday::Mon)
            .map(|_| Self { iso_year, iso_week })
            .ok_or(TsError::InvalidWeek { iso_year, iso_week })
    }

    /// The ISO week containing `date`.
    pub fn from_date(date: NaiveDate) -> Self {
        let w = date.iso_week();
        Self {
            iso_year: w.year(),
            iso_week: w.week(),
        }
    }

    pub fn iso_year(&self) -> i32 {
        self.iso_year
    }

    pub fn iso_week(&self) -> u32 {
        self.iso_week
    }

    /// Monday of this week.
    pub fn monday(&self) -> NaiveDate {
        NaiveDate::from_isoywd_opt(self.iso_year, self.iso_week, Weekday::Mon)
            .expect("validated at construction")
    }

    pub fn succ(&self) -> Self {
        Self::from_date(self.monday() + chrono::Duration::days(7))
    }

    pub fn pred(&self) -> Self {
        Self::from_date(self.monday() - chrono::Duration::days(7))
    }

    /// Signed number of weeks from `self` to `other`.
    pub fn weeks_until(&self, other: WeekKey) -> i64 {
        (other.monday() - self.monday()).num_days() / 7
    }
}

impl fmt::Display for WeekKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-W{:02}", self.iso_year, self.iso_week)
    }
}

impl From<WeekKey> for String {
    fn from(w: WeekKey) -> Self {
        w.to_string()
    }
}

impl TryFrom<String> for WeekKey {
    type Error = TsError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl FromStr for WeekKey {
    type Err = TsError;

    /// Accepts `2019-W05` or the Monday date `2019-01-28`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || TsError::ParseWeek(s.to_string());
        if let Some((y, w)) = s.split_once("-W") {
            let y = y.parse().map_err(|_| bad())?;
            let w = w.parse().map_err(|_| bad())?;
            return WeekKey::new(y, w);
        }
        let date = NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(|_| bad())?;
        if date.weekday() != Weekday::Mon {
            return Err(bad());
        }
        Ok(WeekKey::from_date(date))
    }
}
