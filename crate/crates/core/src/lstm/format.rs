//! Text tensor dump for trained networks.
//!
//! ```text
//! format=lstm-v1
//! layers=64,32
//! dense=32
//! window=5
//! seed=7
//! scaler=12,840
//! tensor layer0.w_f 64 65
//! 0.0123 -0.044 ...
//! ```
//!
//! `scaler=none` when no scaler is attached. Each `tensor` header gives the name and
//! row/column counts; the next line holds the row-major values. Floats use the
//! shortest representation that parses back to the same bits.

use super::{LstmError, LstmNetwork, NetworkConfig};
use crate::timeseries::ScalerParams;

pub const FORMAT_TAG: &str = "lstm-v1";

fn bad(msg: impl Into<String>) -> LstmError {
    LstmError::Format(msg.into())
}

pub fn write_network(net: &LstmNetwork, scaler: Option<&ScalerParams>) -> String {
    let c = &net.config;
    let layers: Vec<String> = c.layer_units.iter().map(|u| u.to_string()).collect();
    let scaler = scaler.map_or("none".to_string(), |s| format!("{},{}", s.min_value, s.max_value));
    let mut out = format!(
        "format={FORMAT_TAG}\nlayers={}\ndense={}\nwindow={}\nseed={}\nscaler={scaler}\n",
        layers.join(","),
        c.dense_units,
        c.window,
        c.seed
    );
    for ((name, rows, cols), values) in net.tensor_shapes().into_iter().zip(net.tensors()) {
        out.push_str(&format!("tensor {name} {rows} {cols}\n"));
        let line: Vec<String> = values.iter().map(|v| v.to_string()).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

fn header<'a>(lines: &mut impl Iterator<Item = &'a str>, key: &str) -> Result<&'a str, LstmError> {
    let line = lines.next().ok_or_else(|| bad(format!("missing {key}")))?;
    line.strip_prefix(key)
        .and_then(|r| r.strip_prefix('='))
        .ok_or_else(|| bad(format!("expected {key}=..., found {line:?}")))
}

fn parse<T: std::str::FromStr>(s: &str, what: &str) -> Result<T, LstmError> {
    s.trim().parse().map_err(|_| bad(format!("bad {what}: {s:?}")))
}

pub fn read_network(text: &str) -> Result<(LstmNetwork, Option<ScalerParams>), LstmError> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    let tag = header(&mut lines, "format")?;
    if tag != FORMAT_TAG {
        return Err(bad(format!("unsupported format {tag:?}")));
    }
    let layer_units = header(&mut lines, "layers")?
        .split(',')
        .map(|u| parse(u, "layer size"))
        .collect::<Result<Vec<usize>, _>>()?;
    let config = NetworkConfig {
        layer_units,
        dense_units: parse(header(&mut lines, "dense")?, "dense size")?,
        window: parse(header(&mut lines, "window")?, "window")?,
        seed: parse(header(&mut lines, "seed")?, "seed")?,
    };
    let scaler = match header(&mut lines, "scaler")? {
        "none" => None,
        s => {
            let (lo, hi) = s.split_once(',').ok_or_else(|| bad("scaler needs min,max"))?;
            Some(ScalerParams::new(parse(lo, "scaler min")?, parse(hi, "scaler max")?)?)
        }
    };

    let mut net = LstmNetwork::zeros(config)?;
    let shapes = net.tensor_shapes();
    for ((name, rows, cols), slot) in shapes.into_iter().zip(net.tensors_mut()) {
        let head = lines.next().ok_or_else(|| bad(format!("missing tensor {name}")))?;
        let expected = format!("tensor {name} {rows} {cols}");
        if head != expected {
            return Err(LstmError::ShapeMismatch(format!("expected {expected:?}, found {head:?}")));
        }
        let values = lines.next().unwrap_or("");
        let parsed = values
            .split_ascii_whitespace()
            .map(|v| parse::<f64>(v, "tensor value"))
            .collect::<Result<Vec<_>, _>>()?;
        if parsed.len() != slot.len() {
            return Err(LstmError::ShapeMismatch(format!(
                "{name} has {} values, expected {}",
                parsed.len(),
                slot.len()
            )));
        }
        slot.copy_from_slice(&parsed);
    }
    if let Some(extra) = lines.next() {
        return Err(bad(format!("trailing content {extra:?}")));
    }
    Ok((net, scaler))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(seed: u64) -> LstmNetwork {
        LstmNetwork::new(NetworkConfig {
            layer_units: vec![3, 2],
            dense_units: 2,
            window: 4,
            seed,
        })
        .unwrap()
    }

    #[test]
    fn round_trips_bit_exact() {
        let net = tiny(11);
        let scaler = ScalerParams::new(0.1 + 0.2, 1.0 / 3.0 * 100.0).unwrap();
        let (back, s) = read_network(&write_network(&net, Some(&scaler))).unwrap();
        assert_eq!(s, Some(scaler));
        for (a, b) in net.tensors().iter().zip(back.tensors()) {
            let bits_a: Vec<u64> = a.iter().map(|v| v.to_bits()).collect();
            let bits_b: Vec<u64> = b.iter().map(|v| v.to_bits()).collect();
            assert_eq!(bits_a, bits_b);
        }
        assert_eq!(back, net);

        let (_, none) = read_network(&write_network(&net, None)).unwrap();
        assert_eq!(none, None);
    }

    #[test]
    fn rejects_truncated_and_reshaped_records() {
        let text = write_network(&tiny(1), None);
        let cut: String = text.lines().take(8).collect::<Vec<_>>().join("\n");
        assert!(read_network(&cut).is_err());

        let reshaped = text.replace("layers=3,2", "layers=4,2");
        assert!(matches!(read_network(&reshaped), Err(LstmError::ShapeMismatch(_))));

        assert!(read_network(&text.replace("lstm-v1", "lstm-v0")).is_err());
    }
}
