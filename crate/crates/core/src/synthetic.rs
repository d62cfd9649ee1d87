//! Seeded synthetic data: ARMA simulations for estimator checks and a
//! multi-source weekly surveillance dataset for demos.

use chrono::{Duration, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ingest::{DailyWeather, IncidenceRow, TrendRow, TweetRow};
use crate::timeseries::{Disease, WeekKey};

/// Standard normal draw via Box-Muller.
pub fn normal(rng: &mut impl Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// `y_t = alpha + sum ar_i y_{t-i} + e_t + sum ma_j e_{t-j}` with unit-normal shocks,
/// after discarding a 200-step burn-in.
pub fn simulate_arma(alpha: f64, ar: &[f64], ma: &[f64], n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let burn = 200;
    let total = n + burn;
    let mut y = vec![0.0; total];
    let mut e = vec![0.0; total];
    for t in 0..total {
        e[t] = normal(&mut rng);
        let mut v = alpha + e[t];
        for (i, b) in ar.iter().enumerate() {
            if t > i {
                v += b * y[t - 1 - i];
            }
        }
        for (j, phi) in ma.iter().enumerate() {
            if t > j {
                v += phi * e[t - 1 - j];
            }
        }
        y[t] = v;
    }
    y.split_off(burn)
}

/// Cumulative sum of unit-normal noise.
pub fn random_walk(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut level = 0.0;
    (0..n)
        .map(|_| {
            level += normal(&mut rng);
            level
        })
        .collect()
}

/// All four raw sources for one synthetic surveillance history.
#[derive(Debug, Clone, Default)]
pub struct DemoSources {
    pub weather: Vec<DailyWeather>,
    pub trends: Vec<TrendRow>,
    pub tweets: Vec<TweetRow>,
    pub incidence: Vec<IncidenceRow>,
}

struct Profile {
    base: f64,
    amplitude: f64,
    peak_week: f64,
    noise: f64,
}

fn profile(disease: Disease) -> Profile {
    match disease {
        Disease::Influenza => Profile {
            base: 180.0,
            amplitude: 900.0,
            peak_week: 6.0,
            noise: 60.0,
        },
        Disease::Malaria => Profile {
            base: 6.0,
            amplitude: 10.0,
            peak_week: 32.0,
            noise: 2.0,
        },
        Disease::Hepatitis => Profile {
            base: 20.0,
            amplitude: 8.0,
            peak_week: 20.0,
            noise: 3.0,
        },
    }
}

/// Generates `weeks` weeks of daily weather and weekly trends, tweets and
/// incidence for all three diseases, starting at the ISO week of `start`.
pub fn demo_sources(start: WeekKey, weeks: usize, seed: u64) -> DemoSources {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = DemoSources::default();
    let first_day: NaiveDate = start.monday();

    for day in 0..weeks * 7 {
        let date = first_day + Duration::days(day as i64);
        let phase = 2.0 * std::f64::consts::PI * (day as f64 / 365.25);
        // coldest around late January
        let tavg = 12.0 - 12.0 * (phase - 0.35).cos() + 2.5 * normal(&mut rng);
        let prcp = if rng.gen_bool(0.35) {
            rng.gen_range(0.0f64..18.0)
        } else {
            0.0
        };
        out.weather.push(DailyWeather {
            date,
            tavg_c: (tavg * 10.0).round() / 10.0,
            prcp_mm: (prcp * 10.0).round() / 10.0,
        });
    }

    let mut week = start;
    for w in 0..weeks {
        let week_of_year = week.iso_week() as f64;
        for disease in Disease::ALL {
            let p = profile(disease);
            let season = (2.0 * std::f64::consts::PI * (week_of_year - p.peak_week) / 52.0).cos();
            let seasonal = p.base + p.amplitude * season.max(0.0).powi(2);
            let trend = 1.0 + 0.1 * (w as f64 / weeks as f64);
            let cases = (seasonal * trend + p.noise * normal(&mut rng)).round().max(0.0);
            out.incidence.push(IncidenceRow {
                week,
                disease,
                cases: cases as u64,
            });

            let ratio = (cases / (p.base + p.amplitude)).min(1.0);
            let volume = (15.0 + 70.0 * ratio + 6.0 * normal(&mut rng)).clamp(0.0, 100.0).round();
            out.trends.push(TrendRow {
                week,
                disease,
                volume,
            });

            let tweet_base = 40.0 + 400.0 * ratio;
            match disease {
                Disease::Influenza => {
                    let total = (tweet_base + 30.0 * normal(&mut rng)).max(0.0);
                    let flu = (total * 0.7).round() as u64;
                    let influenza = (total * 0.3).round() as u64;
                    out.tweets.push(TweetRow {
                        week,
                        keyword: "flu".into(),
                        count: flu,
                    });
                    out.tweets.push(TweetRow {
                        week,
                        keyword: "influenza".into(),
                        count: influenza,
                    });
                }
                other => {
                    let count = (tweet_base * 0.3 + 10.0 * normal(&mut rng)).max(0.0).round() as u64;
                    out.tweets.push(TweetRow {
                        week,
                        keyword: other.as_str().into(),
                        count,
                    });
                }
            }
        }
        week = week.succ();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simulations_are_seeded() {
        assert_eq!(simulate_arma(0.0, &[0.5], &[], 50, 3), simulate_arma(0.0, &[0.5], &[], 50, 3));
        assert_ne!(random_walk(50, 1), random_walk(50, 2));
    }

    #[test]
    fn normal_draws_have_unit_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let xs: Vec<f64> = (0..20_000).map(|_| normal(&mut rng)).collect();
        let m = xs.iter().sum::<f64>() / xs.len() as f64;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64;
        assert!(m.abs() < 0.03);
        assert!((v - 1.0).abs() < 0.05);
    }

    #[test]
    fn demo_sources_cover_every_week() {
        let start = WeekKey::new(2017, 1).unwrap();
        let s = demo_sources(start, 10, 7);
        assert_eq!(s.weather.len(), 70);
        assert_eq!(s.incidence.len(), 30);
        assert_eq!(s.trends.len(), 30);
        // two keywords for influenza, one each otherwise
        assert_eq!(s.tweets.len(), 40);
    }
}
