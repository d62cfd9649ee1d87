//! Flat `key=value` text record for fitted ARIMA models.
//!
//! ```text
//! format=arima-v1
//! order=1,1,3
//! alpha=0.25
//! ar=0.5
//! ma=0.1,-0.2,0.05
//! sigma2=1.5
//! n_obs=195
//! sse=288.0
//! converged=true
//! ```
//!
//! Coefficient lists are comma separated and may be empty. Floats use the
//! shortest representation that parses back to the same bits.

use std::collections::HashMap;

use super::{ArimaError, ArimaModel, ArimaOrder};

pub const FORMAT_TAG: &str = "arima-v1";

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

pub fn write_model(model: &ArimaModel) -> String {
    let o = model.order;
    format!(
        "format={FORMAT_TAG}\norder={},{},{}\nalpha={}\nar={}\nma={}\nsigma2={}\nn_obs={}\nsse={}\nconverged={}\n",
        o.p(),
        o.d(),
        o.q(),
        model.alpha,
        join(&model.ar_coeffs),
        join(&model.ma_coeffs),
        model.sigma2,
        model.n_obs,
        model.sse,
        model.converged,
    )
}

fn parse_list(s: &str) -> Result<Vec<f64>, ArimaError> {
    if s.trim().is_empty() {
        return Ok(vec![]);
    }
    s.split(',')
        .map(|x| {
            x.trim()
                .parse::<f64>()
                .map_err(|_| ArimaError::Format(format!("bad number {x:?}")))
        })
        .collect()
}

pub fn read_model(text: &str) -> Result<ArimaModel, ArimaError> {
    let mut fields = HashMap::new();
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| ArimaError::Format(format!("line without '=': {line:?}")))?;
        fields.insert(k.trim(), v.trim());
    }
    let get = |k: &str| {
        fields
            .get(k)
            .copied()
            .ok_or_else(|| ArimaError::Format(format!("missing field {k}")))
    };
    let num = |k: &str| -> Result<f64, ArimaError> {
        get(k)?
            .parse()
            .map_err(|_| ArimaError::Format(format!("bad value for {k}")))
    };

    if get("format")? != FORMAT_TAG {
        return Err(ArimaError::Format(format!("unsupported format {:?}", get("format")?)));
    }
    let parts: Vec<usize> = get("order")?
        .split(',')
        .map(|x| x.trim().parse())
        .collect::<Result<_, _>>()
        .map_err(|_| ArimaError::Format("bad order".into()))?;
    let [p, d, q] = parts[..] else {
        return Err(ArimaError::Format("order needs three integers".into()));
    };
    let order = ArimaOrder::new(p, d, q)?;
    let mut model =
        ArimaModel::with_coefficients(order, num("alpha")?, parse_list(get("ar")?)?, parse_list(get("ma")?)?)?;
    model.sigma2 = num("sigma2")?;
    model.sse = num("sse")?;
    model.n_obs = get("n_obs")?
        .parse()
        .map_err(|_| ArimaError::Format("bad n_obs".into()))?;
    model.converged = get("converged")?
        .parse()
        .map_err(|_| ArimaError::Format("bad converged flag".into()))?;
    Ok(model)
}
