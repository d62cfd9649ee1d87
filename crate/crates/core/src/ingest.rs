//! File adapters for the four weekly sources, daily-to-weekly weather
//! aggregation, week-keyed merging and gap validation.
//!
//! All sources are UTF-8, comma separated, with a header row:
//!
//! | source                 | columns                         |
//! |------------------------|---------------------------------|
//! | `weather_daily`        | `date,tavg_c,prcp_mm`           |
//! | `search_trends_weekly` | `week_start,disease,volume`     |
//! | `tweet_counts_weekly`  | `week_start,keyword,count`      |
//! | `incidence_weekly`     | `week_start,disease,cases`      |
//!
//! `week_start` is the Monday of the ISO week as `YYYY-MM-DD`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate, Weekday};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::timeseries::{Disease, WeekKey};

/// Weeks with fewer observed days than this are flagged partial.
pub const MIN_FULL_WEEK_DAYS: usize = 4;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum IngestError {
    #[error("line {line}: {reason}")]
    Parse { line: u64, reason: String },
    #[error("line {line}: unknown disease or keyword {name:?}")]
    UnknownDisease { line: u64, name: String },
    #[error("{source_kind} has no rows for {disease}")]
    DiseaseMismatch {
        source_kind: SourceKind,
        disease: Disease,
    },
    #[error("gap of two or more weeks starting at {0}")]
    GapTooLong(WeekKey),
    #[error("week {0} has no earlier observation to fill from")]
    LeadingGap(WeekKey),
    #[error("duplicate week {0}")]
    DuplicateWeek(WeekKey),
    #[error("weeks out of order at {0}")]
    Unsorted(WeekKey),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    WeatherDaily,
    SearchTrendsWeekly,
    TweetCountsWeekly,
    IncidenceWeekly,
}

impl SourceKind {
    pub fn header(&self) -> [&'static str; 3] {
        match self {
            SourceKind::WeatherDaily => ["date", "tavg_c", "prcp_mm"],
            SourceKind::SearchTrendsWeekly => ["week_start", "disease", "volume"],
            SourceKind::TweetCountsWeekly => ["week_start", "keyword", "count"],
            SourceKind::IncidenceWeekly => ["week_start", "disease", "cases"],
        }
    }
}

impl fmt::Display for SourceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SourceKind::WeatherDaily => "weather_daily",
            SourceKind::SearchTrendsWeekly => "search_trends_weekly",
            SourceKind::TweetCountsWeekly => "tweet_counts_weekly",
            SourceKind::IncidenceWeekly => "incidence_weekly",
        })
    }
}

impl FromStr for SourceKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "weather_daily" => Ok(SourceKind::WeatherDaily),
            "search_trends_weekly" => Ok(SourceKind::SearchTrendsWeekly),
            "tweet_counts_weekly" => Ok(SourceKind::TweetCountsWeekly),
            "incidence_weekly" => Ok(SourceKind::IncidenceWeekly),
            other => Err(format!("unknown source kind {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DailyWeather {
    pub date: NaiveDate,
    pub tavg_c: f64,
    pub prcp_mm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrendRow {
    pub week: WeekKey,
    pub disease: Disease,
    pub volume: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TweetRow {
    pub week: WeekKey,
    pub keyword: String,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IncidenceRow {
    pub week: WeekKey,
    pub disease: Disease,
    pub cases: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SourceRows {
    Weather(Vec<DailyWeather>),
    Trends(Vec<TrendRow>),
    Tweets(Vec<TweetRow>),
    Incidence(Vec<IncidenceRow>),
}

impl SourceRows {
    pub fn len(&self) -> usize {
        match self {
            SourceRows::Weather(v) => v.len(),
            SourceRows::Trends(v) => v.len(),
            SourceRows::Tweets(v) => v.len(),
            SourceRows::Incidence(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Tweet keywords tracked per disease; influenza counts both spellings.
pub fn tweet_keywords(disease: Disease) -> &'static [&'static str] {
    match disease {
        Disease::Influenza => &["flu", "influenza"],
        Disease::Malaria => &["malaria"],
        Disease::Hepatitis => &["hepatitis"],
    }
}

const KNOWN_KEYWORDS: [&str; 4] = ["flu", "influenza", "malaria", "hepatitis"];

fn records(kind: SourceKind, content: &str) -> Result<Vec<(u64, Vec<String>)>, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(content.as_bytes());
    let header = reader.headers().map_err(|e| IngestError::Parse {
        line: 1,
        reason: e.to_string(),
    })?;
    let expected = kind.header();
    if !header.is_empty() && header.iter().ne(expected.iter().copied()) {
        return Err(IngestError::Parse {
            line: 1,
            reason: format!("expected header {}", expected.join(",")),
        });
    }
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| IngestError::Parse {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            reason: e.to_string(),
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.iter().all(str::is_empty) {
            continue;
        }
        if rec.len() != 3 {
            return Err(IngestError::Parse {
                line,
                reason: format!("expected 3 fields, found {}", rec.len()),
            });
        }
        out.push((line, rec.iter().map(str::to_string).collect()));
    }
    Ok(out)
}

fn parse_date(line: u64, s: &str) -> Result<NaiveDate, IngestError> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(|_| IngestError::Parse {
        line,
        reason: format!("invalid date {s:?}"),
    })
}

fn parse_week_start(line: u64, s: &str) -> Result<WeekKey, IngestError> {
    let date = parse_date(line, s)?;
    if date.weekday() != Weekday::Mon {
        return Err(IngestError::Parse {
            line,
            reason: format!("week_start {s} is not a Monday"),
        });
    }
    Ok(WeekKey::from_date(date))
}

fn parse_real(line: u64, field: &str, s: &str) -> Result<f64, IngestError> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(IngestError::Parse {
            line,
            reason: format!("{field}: invalid number {s:?}"),
        }),
    }
}

fn parse_count(line: u64, field: &str, s: &str) -> Result<u64, IngestError> {
    s.parse::<u64>().map_err(|_| IngestError::Parse {
        line,
        reason: format!("{field}: invalid non-negative integer {s:?}"),
    })
}

fn parse_disease(line: u64, s: &str) -> Result<Disease, IngestError> {
    s.parse().map_err(|_| IngestError::UnknownDisease {
        line,
        name: s.to_string(),
    })
}

pub fn parse_source(kind: SourceKind, content: &str) -> Result<SourceRows, IngestError> {
    let recs = records(kind, content)?;
    Ok(match kind {
        SourceKind::WeatherDaily => SourceRows::Weather(
            recs.iter()
                .map(|(line, f)| {
                    Ok(DailyWeather {
                        date: parse_date(*line, &f[0])?,
                        tavg_c: parse_real(*line, "tavg_c", &f[1])?,
                        prcp_mm: parse_real(*line, "prcp_mm", &f[2])?,
                    })
                })
                .collect::<Result<_, IngestError>>()?,
        ),
        SourceKind::SearchTrendsWeekly => SourceRows::Trends(
            recs.iter()
                .map(|(line, f)| {
                    let volume = parse_real(*line, "volume", &f[2])?;
                    if !(0.0..=100.0).contains(&volume) {
                        return Err(IngestError::Parse {
                            line: *line,
                            reason: format!("volume {volume} outside 0-100"),
                        });
                    }
                    Ok(TrendRow {
                        week: parse_week_start(*line, &f[0])?,
                        disease: parse_disease(*line, &f[1])?,
                        volume,
                    })
                })
                .collect::<Result<_, IngestError>>()?,
        ),
        SourceKind::TweetCountsWeekly => SourceRows::Tweets(
            recs.iter()
                .map(|(line, f)| {
                    let keyword = f[1].to_ascii_lowercase();
                    if !KNOWN_KEYWORDS.contains(&keyword.as_str()) {
                        return Err(IngestError::UnknownDisease {
                            line: *line,
                            name: f[1].clone(),
                        });
                    }
                    Ok(TweetRow {
                        week: parse_week_start(*line, &f[0])?,
                        keyword,
                        count: parse_count(*line, "count", &f[2])?,
                    })
                })
                .collect::<Result<_, IngestError>>()?,
        ),
        SourceKind::IncidenceWeekly => SourceRows::Incidence(
            recs.iter()
                .map(|(line, f)| {
                    Ok(IncidenceRow {
                        week: parse_week_start(*line, &f[0])?,
                        disease: parse_disease(*line, &f[1])?,
                        cases: parse_count(*line, "cases", &f[2])?,
                    })
                })
                .collect::<Result<_, IngestError>>()?,
        ),
    })
}

fn write_csv(header: [&str; 3], rows: impl Iterator<Item = [String; 3]>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

pub fn write_weather(rows: &[DailyWeather]) -> String {
    write_csv(
        SourceKind::WeatherDaily.header(),
        rows.iter().map(|r| {
            [
                r.date.format("%Y-%m-%d").to_string(),
                r.tavg_c.to_string(),
                r.prcp_mm.to_string(),
            ]
        }),
    )
}

pub fn write_trends(rows: &[TrendRow]) -> String {
    write_csv(
        SourceKind::SearchTrendsWeekly.header(),
        rows.iter().map(|r| {
            [
                r.week.monday().to_string(),
                r.disease.to_string(),
                r.volume.to_string(),
            ]
        }),
    )
}

pub fn write_tweets(rows: &[TweetRow]) -> String {
    write_csv(
        SourceKind::TweetCountsWeekly.header(),
        rows.iter()
            .map(|r| [r.week.monday().to_string(), r.keyword.clone(), r.count.to_string()]),
    )
}

pub fn write_incidence(rows: &[IncidenceRow]) -> String {
    write_csv(
        SourceKind::IncidenceWeekly.header(),
        rows.iter().map(|r| {
            [
                r.week.monday().to_string(),
                r.disease.to_string(),
                r.cases.to_string(),
            ]
        }),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeeklyWeather {
    pub week: WeekKey,
    /// Mean daily average temperature, °C.
    pub temperature: f64,
    /// Mean daily precipitation, mm.
    pub precipitation: f64,
    pub days: usize,
    pub partial: bool,
}

/// Groups daily rows by ISO week and averages both variables over the days present.
pub fn aggregate_daily_to_weekly(daily: &[DailyWeather]) -> Vec<WeeklyWeather> {
    let mut groups: BTreeMap<WeekKey, (f64, f64, usize)> = BTreeMap::new();
    for row in daily {
        let g = groups.entry(WeekKey::from_date(row.date)).or_default();
        g.0 += row.tavg_c;
        g.1 += row.prcp_mm;
        g.2 += 1;
    }
    groups
        .into_iter()
        .map(|(week, (t, p, n))| WeeklyWeather {
            week,
            temperature: t / n as f64,
            precipitation: p / n as f64,
            days: n,
            partial: n < MIN_FULL_WEEK_DAYS,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergedWeek {
    pub week: WeekKey,
    pub precipitation: f64,
    pub temperature: f64,
    pub search_volume: f64,
    pub tweet_count: u64,
    pub cases: u64,
    /// Filled forward from the previous week during validation.
    pub imputed: bool,
}

/// One week of the merged calendar: complete, or a gap naming the missing sources.
#[derive(Debug, Clone, PartialEq)]
pub enum MergeSlot {
    Complete(MergedWeek),
    Gap {
        week: WeekKey,
        missing: Vec<SourceKind>,
    },
}

impl MergeSlot {
    pub fn week(&self) -> WeekKey {
        match self {
            MergeSlot::Complete(m) => m.week,
            MergeSlot::Gap { week, .. } => *week,
        }
    }
}

fn keyed<T: Clone>(
    rows: impl Iterator<Item = (WeekKey, T)>,
) -> Result<BTreeMap<WeekKey, T>, IngestError> {
    let mut map = BTreeMap::new();
    for (week, v) in rows {
        if map.insert(week, v).is_some() {
            return Err(IngestError::DuplicateWeek(week));
        }
    }
    Ok(map)
}

/// Aligns the four sources on week keys for `disease`. Every week between the
/// earliest and latest key seen in any source is emitted, as a gap when some
/// source lacks it.
pub fn merge_weekly(
    disease: Disease,
    weather: &[WeeklyWeather],
    trends: &[TrendRow],
    tweets: &[TweetRow],
    incidence: &[IncidenceRow],
) -> Result<Vec<MergeSlot>, IngestError> {
    let trends: Vec<&TrendRow> = trends.iter().filter(|r| r.disease == disease).collect();
    let incidence: Vec<&IncidenceRow> = incidence.iter().filter(|r| r.disease == disease).collect();
    let keywords = tweet_keywords(disease);
    let tweets: Vec<&TweetRow> = tweets
        .iter()
        .filter(|r| keywords.contains(&r.keyword.as_str()))
        .collect();

    for (kind, empty) in [
        (SourceKind::SearchTrendsWeekly, trends.is_empty()),
        (SourceKind::TweetCountsWeekly, tweets.is_empty()),
        (SourceKind::IncidenceWeekly, incidence.is_empty()),
    ] {
        if empty {
            return Err(IngestError::DiseaseMismatch {
                source_kind: kind,
                disease,
            });
        }
    }

    let weather_map = keyed(weather.iter().map(|w| (w.week, (w.temperature, w.precipitation))))?;
    let trend_map = keyed(trends.iter().map(|r| (r.week, r.volume)))?;
    let incidence_map = keyed(incidence.iter().map(|r| (r.week, r.cases)))?;
    let mut tweet_map: BTreeMap<WeekKey, u64> = BTreeMap::new();
    let mut seen_keyword = std::collections::HashSet::new();
    for r in &tweets {
        if !seen_keyword.insert((r.week, r.keyword.as_str())) {
            return Err(IngestError::DuplicateWeek(r.week));
        }
        *tweet_map.entry(r.week).or_default() += r.count;
    }

    let first = [
        weather_map.keys().next(),
        trend_map.keys().next(),
        tweet_map.keys().next(),
        incidence_map.keys().next(),
    ]
    .into_iter()
    .flatten()
    .min()
    .copied();
    let last = [
        weather_map.keys().next_back(),
        trend_map.keys().next_back(),
        tweet_map.keys().next_back(),
        incidence_map.keys().next_back(),
    ]
    .into_iter()
    .flatten()
    .max()
    .copied();
    let (Some(first), Some(last)) = (first, last) else {
        return Ok(vec![]);
    };

    let mut out = Vec::new();
    let mut week = first;
    loop {
        let w = weather_map.get(&week);
        let t = trend_map.get(&week);
        let tw = tweet_map.get(&week);
        let inc = incidence_map.get(&week);
        out.push(match (w, t, tw, inc) {
            (Some(&(temperature, precipitation)), Some(&search_volume), Some(&tweet_count), Some(&cases)) => {
                MergeSlot::Complete(MergedWeek {
                    week,
                    precipitation,
                    temperature,
                    search_volume,
                    tweet_count,
                    cases,
                    imputed: false,
                })
            }
            _ => {
                let missing = [
                    (SourceKind::WeatherDaily, w.is_none()),
                    (SourceKind::SearchTrendsWeekly, t.is_none()),
                    (SourceKind::TweetCountsWeekly, tw.is_none()),
                    (SourceKind::IncidenceWeekly, inc.is_none()),
                ]
                .into_iter()
                .filter_map(|(k, m)| m.then_some(k))
                .collect();
                MergeSlot::Gap { week, missing }
            }
        });
        if week == last {
            break;
        }
        week = week.succ();
    }
    Ok(out)
}

/// Forward-fills isolated single-week gaps; longer runs, duplicates and
/// disorder are errors.
pub fn validate_and_impute(slots: &[MergeSlot]) -> Result<Vec<MergedWeek>, IngestError> {
    let mut out: Vec<MergedWeek> = Vec::with_capacity(slots.len());
    let mut pending_gap: Option<WeekKey> = None;
    let mut prev_week: Option<WeekKey> = None;

    for slot in slots {
        let week = slot.week();
        if let Some(prev) = prev_week {
            if week == prev {
                return Err(IngestError::DuplicateWeek(week));
            }
            if week < prev {
                return Err(IngestError::Unsorted(week));
            }
            if prev.succ() != week {
                // keys skipped entirely count as missing weeks
                return Err(IngestError::GapTooLong(prev.succ()));
            }
        }
        prev_week = Some(week);

        match slot {
            MergeSlot::Complete(m) => {
                if let Some(gap) = pending_gap.take() {
                    let previous = out.last().ok_or(IngestError::LeadingGap(gap))?;
                    out.push(MergedWeek {
                        week: gap,
                        imputed: true,
                        ..previous.clone()
                    });
                }
                out.push(m.clone());
            }
            MergeSlot::Gap { week, .. } => {
                if let Some(gap) = pending_gap {
                    return Err(IngestError::GapTooLong(gap));
                }
                if out.is_empty() {
                    return Err(IngestError::LeadingGap(*week));
                }
                pending_gap = Some(*week);
            }
        }
    }
    if let Some(gap) = pending_gap {
        // a trailing gap has a previous week; fill it like an interior one
        let previous = out.last().ok_or(IngestError::LeadingGap(gap))?.clone();
        out.push(MergedWeek {
            week: gap,
            imputed: true,
            ..previous
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wk(y: i32, w: u32) -> WeekKey {
        WeekKey::new(y, w).unwrap()
    }

    #[test]
    fn parses_weather_row() {
        let rows = parse_source(SourceKind::WeatherDaily, "date,tavg_c,prcp_mm\n2019-01-07,3.5,1.2\n")
            .unwrap();
        assert_eq!(
            rows,
            SourceRows::Weather(vec![DailyWeather {
                date: NaiveDate::from_ymd_opt(2019, 1, 7).unwrap(),
                tavg_c: 3.5,
                prcp_mm: 1.2
            }])
        );
    }

    #[test]
    fn header_only_is_empty() {
        for kind in [
            SourceKind::WeatherDaily,
            SourceKind::SearchTrendsWeekly,
            SourceKind::TweetCountsWeekly,
            SourceKind::IncidenceWeekly,
        ] {
            let content = format!("{}\n", kind.header().join(","));
            assert!(parse_source(kind, &content).unwrap().is_empty());
        }
    }

    #[test]
    fn malformed_line_reports_its_number() {
        let err = parse_source(SourceKind::WeatherDaily, "date,tavg_c,prcp_mm\n2019-01-07,abc,1.2\n")
            .unwrap_err();
        assert!(matches!(err, IngestError::Parse { line: 2, .. }), "{err:?}");

        let err = parse_source(
            SourceKind::IncidenceWeekly,
            "week_start,disease,cases\n2019-01-07,malaria,3\n2019-01-14,malaria,-1\n",
        )
        .unwrap_err();
        assert!(matches!(err, IngestError::Parse { line: 3, .. }), "{err:?}");
    }

    #[test]
    fn unknown_disease_and_keyword() {
        let err = parse_source(
            SourceKind::SearchTrendsWeekly,
            "week_start,disease,volume\n2019-01-07,cholera,30\n",
        )
        .unwrap_err();
        assert!(matches!(err, IngestError::UnknownDisease { line: 2, .. }));
        let err = parse_source(
            SourceKind::TweetCountsWeekly,
            "week_start,keyword,count\n2019-01-07,cough,30\n",
        )
        .unwrap_err();
        assert!(matches!(err, IngestError::UnknownDisease { .. }));
    }

    #[test]
    fn week_start_must_be_monday() {
        let err = parse_source(
            SourceKind::IncidenceWeekly,
            "week_start,disease,cases\n2019-01-08,malaria,3\n",
        )
        .unwrap_err();
        assert!(matches!(err, IngestError::Parse { line: 2, .. }));
    }

    #[test]
    fn wrong_header_rejected() {
        let err = parse_source(SourceKind::WeatherDaily, "day,t,p\n").unwrap_err();
        assert!(matches!(err, IngestError::Parse { line: 1, .. }));
    }

    fn days(temps: &[f64], prcp: &[f64]) -> Vec<DailyWeather> {
        let monday = NaiveDate::from_ymd_opt(2019, 1, 7).unwrap();
        temps
            .iter()
            .zip(prcp)
            .enumerate()
            .map(|(i, (t, p))| DailyWeather {
                date: monday + chrono::Duration::days(i as i64),
                tavg_c: *t,
                prcp_mm: *p,
            })
            .collect()
    }

    #[test]
    fn weekly_means() {
        let w = aggregate_daily_to_weekly(&days(
            &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
            &[0.0, 0.0, 7.0, 0.0, 0.0, 0.0, 0.0],
        ));
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].temperature, 3.0);
        assert_eq!(w[0].precipitation, 1.0);
        assert!(!w[0].partial);

        let w = aggregate_daily_to_weekly(&days(&[1.0, 2.0, 3.0], &[0.0; 3]));
        assert!(w[0].partial);
        assert_eq!(w[0].days, 3);
    }

    #[test]
    fn constant_week_round_trips() {
        let w = aggregate_daily_to_weekly(&days(&[4.25; 7], &[1.5; 7]));
        assert_eq!((w[0].temperature, w[0].precipitation), (4.25, 1.5));
    }

    struct Fixture {
        weather: Vec<WeeklyWeather>,
        trends: Vec<TrendRow>,
        tweets: Vec<TweetRow>,
        incidence: Vec<IncidenceRow>,
    }

    fn fixture(disease: Disease, weeks: u32) -> Fixture {
        let mut f = Fixture {
            weather: vec![],
            trends: vec![],
            tweets: vec![],
            incidence: vec![],
        };
        for w in 1..=weeks {
            let week = wk(2019, w);
            f.weather.push(WeeklyWeather {
                week,
                temperature: w as f64,
                precipitation: 0.5,
                days: 7,
                partial: false,
            });
            f.trends.push(TrendRow {
                week,
                disease,
                volume: 40.0,
            });
            for kw in tweet_keywords(disease) {
                f.tweets.push(TweetRow {
                    week,
                    keyword: kw.to_string(),
                    count: if *kw == "flu" { 10 } else { 4 },
                });
            }
            f.incidence.push(IncidenceRow {
                week,
                disease,
                cases: w as u64,
            });
        }
        f
    }

    #[test]
    fn influenza_tweets_sum_both_keywords() {
        let f = fixture(Disease::Influenza, 1);
        let slots = merge_weekly(Disease::Influenza, &f.weather, &f.trends, &f.tweets, &f.incidence)
            .unwrap();
        let MergeSlot::Complete(m) = &slots[0] else { panic!("gap") };
        assert_eq!(m.tweet_count, 14);
    }

    #[test]
    fn full_year_merges_to_52_weeks() {
        let f = fixture(Disease::Malaria, 52);
        let slots =
            merge_weekly(Disease::Malaria, &f.weather, &f.trends, &f.tweets, &f.incidence).unwrap();
        assert_eq!(slots.len(), 52);
        assert!(slots.iter().all(|s| matches!(s, MergeSlot::Complete(_))));
        assert!(slots.windows(2).all(|w| w[0].week() < w[1].week()));
    }

    #[test]
    fn missing_trend_week_becomes_gap() {
        let mut f = fixture(Disease::Malaria, 52);
        f.trends.retain(|r| r.week != wk(2019, 30));
        let slots =
            merge_weekly(Disease::Malaria, &f.weather, &f.trends, &f.tweets, &f.incidence).unwrap();
        assert_eq!(
            slots[29],
            MergeSlot::Gap {
                week: wk(2019, 30),
                missing: vec![SourceKind::SearchTrendsWeekly]
            }
        );
        let clean = validate_and_impute(&slots).unwrap();
        assert_eq!(clean.len(), 52);
        assert!(clean[29].imputed);
        assert_eq!(clean[29].week, wk(2019, 30));
        assert_eq!(clean[29].cases, clean[28].cases);
    }

    #[test]
    fn disease_mismatch() {
        let f = fixture(Disease::Malaria, 3);
        let err = merge_weekly(Disease::Hepatitis, &f.weather, &f.trends, &f.tweets, &f.incidence)
            .unwrap_err();
        assert!(matches!(err, IngestError::DiseaseMismatch { .. }));
    }

    fn complete(week: WeekKey, cases: u64) -> MergeSlot {
        MergeSlot::Complete(MergedWeek {
            week,
            precipitation: 1.0,
            temperature: 2.0,
            search_volume: 3.0,
            tweet_count: 4,
            cases,
            imputed: false,
        })
    }

    fn gap(week: WeekKey) -> MergeSlot {
        MergeSlot::Gap {
            week,
            missing: vec![SourceKind::WeatherDaily],
        }
    }

    #[test]
    fn validation_rules() {
        let ok = validate_and_impute(&[complete(wk(2019, 1), 5), gap(wk(2019, 2)), complete(wk(2019, 3), 7)])
            .unwrap();
        assert_eq!(ok.len(), 3);
        assert!(ok[1].imputed && ok[1].cases == 5);

        let err = validate_and_impute(&[
            complete(wk(2019, 1), 5),
            gap(wk(2019, 2)),
            gap(wk(2019, 3)),
            complete(wk(2019, 4), 7),
        ])
        .unwrap_err();
        assert_eq!(err, IngestError::GapTooLong(wk(2019, 2)));

        let err = validate_and_impute(&[complete(wk(2019, 1), 5), complete(wk(2019, 1), 6)]).unwrap_err();
        assert_eq!(err, IngestError::DuplicateWeek(wk(2019, 1)));

        let err = validate_and_impute(&[gap(wk(2019, 1)), complete(wk(2019, 2), 6)]).unwrap_err();
        assert_eq!(err, IngestError::LeadingGap(wk(2019, 1)));
    }

    #[test]
    fn validation_never_invents_weeks_outside_range() {
        let slots = vec![complete(wk(2019, 10), 1), gap(wk(2019, 11)), complete(wk(2019, 12), 2)];
        let clean = validate_and_impute(&slots).unwrap();
        assert_eq!(clean.first().unwrap().week, wk(2019, 10));
        assert_eq!(clean.last().unwrap().week, wk(2019, 12));
    }

    #[test]
    fn writers_round_trip_through_parser() {
        let f = fixture(Disease::Influenza, 3);
        let text = write_trends(&f.trends);
        assert_eq!(
            parse_source(SourceKind::SearchTrendsWeekly, &text).unwrap(),
            SourceRows::Trends(f.trends.clone())
        );
        let text = write_tweets(&f.tweets);
        assert_eq!(
            parse_source(SourceKind::TweetCountsWeekly, &text).unwrap(),
            SourceRows::Tweets(f.tweets.clone())
        );
    }
}
