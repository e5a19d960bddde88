//! Summary assembly from emitted artifact files.

use serde_json::{json, Value};

use crate::error::Error;
use crate::evolution::{fit_decay, EnergyTrace};
use crate::spectral::fit_envelope;

/// Parse a CSV with a header row into named f64 columns ("inf" allowed).
fn parse_csv(path: &str) -> Result<(Vec<String>, Vec<Vec<f64>>), Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::MalformedInput {
        path: path.into(),
        msg: e.to_string(),
    })?;
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| Error::MalformedInput {
            path: path.into(),
            msg: "empty file".into(),
        })?
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();
    let mut rows = Vec::new();
    for (k, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: Result<Vec<f64>, _> = line
            .split(',')
            .map(|s| {
                let t = s.trim();
                if t == "inf" {
                    Ok(f64::INFINITY)
                } else {
                    t.parse::<f64>()
                }
            })
            .collect();
        let row = row.map_err(|e| Error::MalformedInput {
            path: path.into(),
            msg: format!("line {}: {e}", k + 2),
        })?;
        if row.len() != header.len() {
            return Err(Error::MalformedInput {
                path: path.into(),
                msg: format!(
                    "line {}: {} fields, expected {}",
                    k + 2,
                    row.len(),
                    header.len()
                ),
            });
        }
        rows.push(row);
    }
    Ok((header, rows))
}

fn column(header: &[String], rows: &[Vec<f64>], name: &str, path: &str) -> Result<Vec<f64>, Error> {
    let idx = header
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::MalformedInput {
            path: path.into(),
            msg: format!("missing column {name}"),
        })?;
    Ok(rows.iter().map(|r| r[idx]).collect())
}

/// Trace summary; an empty (row-free) trace is an error per the contract.
fn trace_section(path: &str) -> Result<Value, Error> {
    let (header, rows) = parse_csv(path)?;
    if rows.is_empty() {
        return Err(Error::MalformedInput {
            path: path.into(),
            msg: "trace has no samples".into(),
        });
    }
    let t = column(&header, &rows, "t", path)?;
    let e = column(&header, &rows, "energy", path)?;
    let cum = column(&header, &rows, "cumulative_dissipation", path)?;
    let e0 = e[0];
    let scale = e0.max(1e-300);
    let mut monotone = true;
    for k in 1..e.len() {
        if e[k] > e[k - 1] + 1e-10 * scale {
            monotone = false;
        }
    }
    let identity_max = (0..e.len())
        .map(|k| (e[k] - e0 + cum[k]).abs())
        .fold(0.0, f64::max);

    let trace = EnergyTrace {
        times: t.clone(),
        energy: e.clone(),
        cumulative_dissipation: cum,
        dt: if t.len() > 1 { t[1] - t[0] } else { 0.0 },
        scheme: "file".into(),
    };
    let decay = match fit_decay(&trace, 1) {
        Ok(fit) => json!({
            "log_law_c": fit.c_fit,
            "log_law_residual": fit.residual,
            "exp_rate": fit.exp_rate,
            "exp_residual": fit.exp_residual,
        }),
        Err(_) => Value::Null,
    };
    Ok(json!({
        "initial_energy": e0,
        "final_energy": e.last().unwrap(),
        "monotone": monotone,
        "identity_residual_max": identity_max,
        "identity_residual_rel": identity_max / scale,
        "decay_fit": decay,
    }))
}

fn spectrum_section(path: &str) -> Result<Value, Error> {
    let (header, rows) = parse_csv(path)?;
    if rows.is_empty() {
        return Err(Error::MalformedInput {
            path: path.into(),
            msg: "spectrum has no rows".into(),
        });
    }
    let re = column(&header, &rows, "re", path)?;
    let im = column(&header, &rows, "im", path)?;
    let max_re = re.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min_abs_re = re.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min);
    let max_abs_im = im.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let min_abs = re
        .iter()
        .zip(&im)
        .map(|(r, i)| (r * r + i * i).sqrt())
        .fold(f64::INFINITY, f64::min);
    Ok(json!({
        "count": rows.len(),
        "max_real_part": max_re,
        "min_abs_real_part": min_abs_re,
        "max_abs_imag": max_abs_im,
        "min_modulus": min_abs,
    }))
}

fn resolvent_section(path: &str) -> Result<Value, Error> {
    let (header, rows) = parse_csv(path)?;
    let mu = column(&header, &rows, "mu", path)?;
    let norm = column(&header, &rows, "norm", path)?;
    let finite: Vec<(f64, f64)> = mu
        .iter()
        .zip(&norm)
        .filter(|(_, n)| n.is_finite())
        .map(|(m, n)| (m.abs(), n.ln()))
        .collect();
    let env = fit_envelope(&finite);
    Ok(json!({
        "samples": rows.len(),
        "finite_samples": finite.len(),
        "max_norm": norm.iter().cloned().filter(|n| n.is_finite()).fold(0.0, f64::max),
        "has_singular_sentinel": norm.iter().any(|n| n.is_infinite()),
        "envelope": env.map(|e| json!({"c_a": e.c_a, "c_b": e.c_b})).unwrap_or(Value::Null),
    }))
}

fn ratio_section(path: &str) -> Result<Value, Error> {
    let (header, rows) = parse_csv(path)?;
    if rows.is_empty() {
        return Err(Error::MalformedInput {
            path: path.into(),
            msg: "ratio sweep has no rows".into(),
        });
    }
    let ratio = column(&header, &rows, "ratio", path)?;
    let max = ratio.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = ratio.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(json!({
        "points": rows.len(),
        "ratio_min": min,
        "ratio_max": max,
        "max_over_min": if min > 0.0 { max / min } else { f64::NAN },
    }))
}

fn weights_section(path: &str) -> Result<Value, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::MalformedInput {
        path: path.into(),
        msg: e.to_string(),
    })?;
    serde_json::from_str(&text).map_err(|e| Error::MalformedInput {
        path: path.into(),
        msg: e.to_string(),
    })
}

/// Build the summary document. Each input is optional: an absent path (or a
/// path to a file that does not exist) yields an explicit null section; a
/// present but ill-formed file is an error.
pub fn build_summary(
    trace: Option<&str>,
    eig: Option<&str>,
    sweep: Option<&str>,
    ratio: Option<&str>,
    weights: Option<&str>,
) -> Result<Value, Error> {
    let section =
        |path: Option<&str>, f: &dyn Fn(&str) -> Result<Value, Error>| -> Result<Value, Error> {
            match path {
                None => Ok(Value::Null),
                Some(p) if !std::path::Path::new(p).exists() => Ok(Value::Null),
                Some(p) => f(p),
            }
        };
    Ok(json!({
        "energy": section(trace, &trace_section)?,
        "spectrum": section(eig, &spectrum_section)?,
        "resolvent": section(sweep, &resolvent_section)?,
        "carleman_ratio": section(ratio, &ratio_section)?,
        "weights": section(weights, &weights_section)?,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_files_become_null_sections() {
        let v = build_summary(None, None, Some("/nonexistent/sweep.csv"), None, None).unwrap();
        assert!(v["resolvent"].is_null());
        assert!(v["energy"].is_null());
    }

    #[test]
    fn empty_trace_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("trace.csv");
        std::fs::write(&p, "t,energy,cumulative_dissipation,identity_residual\n").unwrap();
        let err = build_summary(Some(p.to_str().unwrap()), None, None, None, None);
        assert!(err.is_err());
    }

    #[test]
    fn malformed_csv_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("eig.csv");
        std::fs::write(&p, "re,im\n1.0,not-a-number\n").unwrap();
        assert!(build_summary(None, Some(p.to_str().unwrap()), None, None, None).is_err());
    }
}
