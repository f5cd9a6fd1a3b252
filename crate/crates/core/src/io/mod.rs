//! File formats: trajectory CSV, real-number formatting and the strict JSON
//! configuration schemas read by the command-line tool.

pub mod config;

use std::path::Path;

use crate::chain::Trajectory;
use crate::error::{invalid, Error, Result};

/// Largest trajectory accepted from a file.
pub const MAX_TRAJECTORY_ROWS: usize = 10_000_000;

/// 17 significant digits, `.` decimal separator, round-trips every `f64`.
pub fn fmt_real(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{x:.16e}")
    }
}

/// Parses a real written by [`fmt_real`] or any plain decimal literal.
pub fn parse_real(s: &str) -> Result<f64> {
    match s.trim() {
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        "NaN" => Ok(f64::NAN),
        t => t.parse::<f64>().map_err(|_| Error::Parse(format!("not a real number: {t:?}"))),
    }
}

/// Serde adapter for reals that may be infinite or NaN: finite values are
/// JSON numbers, the rest the strings `"inf"`, `"-inf"`, `"NaN"`.
pub mod extended_real {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else {
            s.serialize_str(&super::fmt_real(*x))
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(x),
            Repr::Text(t) if matches!(t.as_str(), "inf" | "-inf" | "NaN") => {
                super::parse_real(&t).map_err(de::Error::custom)
            }
            Repr::Text(t) => Err(de::Error::custom(format!("not a real number: {t:?}"))),
        }
    }
}

/// Writes CSV text from a header and rows of cells.
pub fn csv_string<I, R>(header: &[&str], rows: I) -> Result<String>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Columns `t, x_1, …, x_d`; `t` runs from 1.
pub fn trajectory_to_csv(traj: &Trajectory) -> Result<String> {
    let mut header = vec!["t".to_string()];
    header.extend((1..=traj.dim).map(|j| format!("x_{j}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    csv_string(
        &header,
        (1..=traj.len()).map(|t| {
            let mut row = vec![t.to_string()];
            row.extend(traj.state(t).iter().map(|&v| fmt_real(v)));
            row
        }),
    )
}

/// Reads the format written by [`trajectory_to_csv`]. The `t` column must be
/// `1, 2, …` and every state must be finite.
pub fn trajectory_from_csv(text: &str) -> Result<Trajectory> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(text.as_bytes());
    let header = r.headers()?.clone();
    if header.len() < 2 || &header[0] != "t" {
        return invalid!("trajectory header must start with t followed by x_1..x_d");
    }
    let dim = header.len() - 1;
    for (j, name) in header.iter().skip(1).enumerate() {
        if name != format!("x_{}", j + 1) {
            return invalid!("column {} must be named x_{}, found {name:?}", j + 2, j + 1);
        }
    }
    if dim > crate::chain::dist::MAX_DIMENSION {
        return invalid!("trajectory dimension {dim} exceeds {}", crate::chain::dist::MAX_DIMENSION);
    }
    let mut states = Vec::new();
    for (row_idx, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() != dim + 1 {
            return invalid!("row {} has {} fields, expected {}", row_idx + 1, rec.len(), dim + 1);
        }
        if row_idx >= MAX_TRAJECTORY_ROWS {
            return invalid!("trajectory exceeds {MAX_TRAJECTORY_ROWS} rows");
        }
        let t: usize = rec[0].parse().map_err(|_| Error::Parse(format!("bad time index {:?}", &rec[0])))?;
        if t != row_idx + 1 {
            return invalid!("time index {t} at row {}, expected {}", row_idx + 1, row_idx + 1);
        }
        for cell in rec.iter().skip(1) {
            let v = parse_real(cell)?;
            if !v.is_finite() {
                return invalid!("non-finite state {cell:?} at t = {t}");
            }
            states.push(v);
        }
    }
    if states.is_empty() {
        return invalid!("trajectory has no rows");
    }
    Trajectory::from_states(states, dim)
}

pub fn read_trajectory(path: &Path) -> Result<Trajectory> {
    trajectory_from_csv(&std::fs::read_to_string(path)?)
}

/// Writes `contents` to `dir/name`, creating `dir` if needed.
pub fn write_output(dir: &Path, name: &str, contents: &str) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(name), contents)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn extended_reals_round_trip() {
        #[derive(Debug, PartialEq, serde::Serialize, serde::Deserialize)]
        struct W(#[serde(with = "extended_real")] f64);
        for x in [0.0, -1.5, f64::INFINITY, f64::NEG_INFINITY] {
            let text = serde_json::to_string(&W(x)).unwrap();
            assert_eq!(serde_json::from_str::<W>(&text).unwrap(), W(x));
        }
        assert_eq!(serde_json::to_string(&W(f64::INFINITY)).unwrap(), r#""inf""#);
        assert!(serde_json::from_str::<W>(r#""NaN""#).unwrap().0.is_nan());
        assert!(serde_json::from_str::<W>(r#""1.5""#).is_err());
    }

    #[test]
    fn real_format() {
        assert_eq!(fmt_real(1.0), "1.0000000000000000e0");
        assert_eq!(fmt_real(-0.1), "-1.0000000000000001e-1");
        assert_eq!(fmt_real(f64::INFINITY), "inf");
        assert_eq!(parse_real("1.0000000000000000e0").unwrap(), 1.0);
        assert!(parse_real("1,5").is_err());
    }

    #[test]
    fn trajectory_round_trip() {
        let t = Trajectory::from_states(vec![0.1, -2.0, 3.5, 1e-300, 7.0, 8.0], 2).unwrap();
        let text = trajectory_to_csv(&t).unwrap();
        assert!(text.starts_with("t,x_1,x_2\n1,"));
        let back = trajectory_from_csv(&text).unwrap();
        assert_eq!(back.states, t.states);
        assert_eq!(back.dim, 2);
    }

    #[test]
    fn trajectory_rejections() {
        assert!(trajectory_from_csv("t,x_1\n").is_err());
        assert!(trajectory_from_csv("t,y\n1,0.5\n").is_err());
        assert!(trajectory_from_csv("t,x_1\n2,0.5\n").is_err());
        assert!(trajectory_from_csv("t,x_1\n1,inf\n").is_err());
        assert!(trajectory_from_csv("t,x_1\n1,0.5,3\n").is_err());
        assert!(trajectory_from_csv("x_1\n0.5\n").is_err());
        assert_eq!(trajectory_from_csv("t, x_1\n1, 2.5\n2,3\n").unwrap().states, vec![2.5, 3.0]);
    }

    proptest! {
        #[test]
        fn fmt_real_round_trips(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
            prop_assert_eq!(parse_real(&fmt_real(x)).unwrap().to_bits(), x.to_bits());
        }
    }
}
