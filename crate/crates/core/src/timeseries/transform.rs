use super::{TsError, WeeklySeries};

/// Sequence length fed to the recurrent forecaster.
pub const DEFAULT_WINDOW: usize = 5;

/// Applies first differencing `d` times.
pub fn difference(values: &[f64], d: usize) -> Result<Vec<f64>, TsError> {
    if values.len() <= d {
        return Err(TsError::TooShort {
            required: d + 1,
            actual: values.len(),
        });
    }
    let mut out = values.to_vec();
    for _ in 0..d {
        out = out.windows(2).map(|w| w[1] - w[0]).collect();
    }
    Ok(out)
}

/// Inverse of [`difference`]: `seeds` are the last `d` values of the undifferenced
/// history, where `d = seeds.len()`, and `diffs` continue that history.
pub fn integrate(diffs: &[f64], seeds: &[f64], d: usize) -> Result<Vec<f64>, TsError> {
    if seeds.len() != d {
        return Err(TsError::SeedMismatch {
            expected: d,
            actual: seeds.len(),
        });
    }
    // Last value of the seed history at each differencing level 0..d.
    let mut level_last = Vec::with_capacity(d);
    let mut level = seeds.to_vec();
    for _ in 0..d {
        level_last.push(*level.last().expect("level k has d - k >= 1 values"));
        level = level.windows(2).map(|w| w[1] - w[0]).collect();
    }

    let mut out = diffs.to_vec();
    for &last in level_last.iter().rev() {
        let mut acc = last;
        for v in out.iter_mut() {
            acc += *v;
            *v = acc;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub input: Vec<f64>,
    pub target: f64,
}

/// Stride-1 sliding windows; yields `values.len() - window` samples.
pub fn make_windows(values: &[f64], window: usize) -> Result<Vec<Window>, TsError> {
    if window == 0 {
        return Err(TsError::InvalidParameter("window must be positive".into()));
    }
    if values.len() < window + 1 {
        return Err(TsError::TooShort {
            required: window + 1,
            actual: values.len(),
        });
    }
    Ok(values
        .windows(window + 1)
        .map(|w| Window {
            input: w[..window].to_vec(),
            target: w[window],
        })
        .collect())
}

/// Number of leading points kept for training: `ceil((1 - f) * n)`.
pub fn split_index(n: usize, test_fraction: f64) -> Result<usize, TsError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(TsError::InvalidParameter(format!(
            "test fraction {test_fraction} outside (0, 1)"
        )));
    }
    // Guard against representation error turning an exact product into ceil(x + ulp).
    let train = ((1.0 - test_fraction) * n as f64 - 1e-9).ceil() as usize;
    Ok(train.min(n))
}

/// Earliest `ceil((1 - f) * n)` points for training, the rest for testing.
pub fn split_chronological(
    series: &WeeklySeries,
    test_fraction: f64,
) -> Result<(WeeklySeries, WeeklySeries), TsError> {
    if series.len() < 8 {
        return Err(TsError::TooShort {
            required: 8,
            actual: series.len(),
        });
    }
    let at = split_index(series.len(), test_fraction)?;
    Ok(series.split_at(at))
}
