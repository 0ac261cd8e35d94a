//! TSPLIB `EUC_2D` node-coordinate files, optimum sidecars and tour files.
//!
//! File indices are 1-based; everything in memory and every file this crate
//! writes uses 0-based city indices.

use super::{City, TspInstance};
use crate::error::{Error, Result};
use std::fmt::Write as _;

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Splits `KEY : value` (colon optional surrounding whitespace).
fn header_kv(line: &str) -> Option<(&str, &str)> {
    let (k, v) = line.split_once(':')?;
    Some((k.trim(), v.trim()))
}

pub fn parse_tsplib(bytes: &[u8]) -> Result<TspInstance> {
    let text = std::str::from_utf8(bytes).map_err(|e| parse_err(0, format!("not UTF-8: {e}")))?;
    let mut name: Option<String> = None;
    let mut dimension: Option<usize> = None;
    let mut weight_type: Option<String> = None;
    let mut cities = Vec::new();
    let mut in_coords = false;
    let mut last_line = 0;

    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        last_line = lineno;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if line == "EOF" {
            break;
        }
        if in_coords {
            let mut parts = line.split_whitespace();
            let (Some(idx), Some(x), Some(y)) = (parts.next(), parts.next(), parts.next()) else {
                // another section begins
                if line.chars().next().is_some_and(|c| c.is_ascii_alphabetic()) {
                    in_coords = false;
                    continue;
                }
                return Err(parse_err(lineno, "expected `index x y`"));
            };
            idx.parse::<i64>()
                .map_err(|_| parse_err(lineno, format!("non-numeric node index `{idx}`")))?;
            let x: f64 = x
                .parse()
                .map_err(|_| parse_err(lineno, format!("non-numeric coordinate `{x}`")))?;
            let y: f64 = y
                .parse()
                .map_err(|_| parse_err(lineno, format!("non-numeric coordinate `{y}`")))?;
            if !x.is_finite() || !y.is_finite() {
                return Err(parse_err(lineno, "non-finite coordinate"));
            }
            cities.push(City::new(x, y));
            continue;
        }
        if line.starts_with("NODE_COORD_SECTION") {
            in_coords = true;
            continue;
        }
        if let Some((key, value)) = header_kv(line) {
            match key {
                "NAME" => name = Some(value.to_string()),
                "DIMENSION" => {
                    dimension = Some(value.parse().map_err(|_| {
                        parse_err(lineno, format!("DIMENSION is not a count: `{value}`"))
                    })?)
                }
                "EDGE_WEIGHT_TYPE" => {
                    if value != "EUC_2D" {
                        return Err(parse_err(
                            lineno,
                            format!("unsupported EDGE_WEIGHT_TYPE `{value}` (only EUC_2D)"),
                        ));
                    }
                    weight_type = Some(value.to_string());
                }
                _ => {}
            }
        } else if line.ends_with("_SECTION") {
            return Err(parse_err(lineno, format!("unsupported section `{line}`")));
        }
    }

    let name = name.ok_or_else(|| parse_err(last_line, "missing NAME"))?;
    let dimension = dimension.ok_or_else(|| parse_err(last_line, "missing DIMENSION"))?;
    if weight_type.is_none() {
        return Err(parse_err(last_line, "missing EDGE_WEIGHT_TYPE"));
    }
    if cities.is_empty() && dimension > 0 {
        return Err(parse_err(last_line, "missing NODE_COORD_SECTION"));
    }
    if cities.len() != dimension {
        return Err(parse_err(
            last_line,
            format!(
                "coordinate count mismatch: DIMENSION {dimension}, found {}",
                cities.len()
            ),
        ));
    }
    TspInstance::new(name, cities)
}

/// Writes an instance back as TSPLIB `EUC_2D`. Coordinates use Rust's
/// shortest round-trip float formatting, so parsing the output is exact.
pub fn write_tsplib(instance: &TspInstance) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "NAME : {}", instance.name());
    let _ = writeln!(s, "TYPE : TSP");
    let _ = writeln!(s, "DIMENSION : {}", instance.len());
    let _ = writeln!(s, "EDGE_WEIGHT_TYPE : EUC_2D");
    let _ = writeln!(s, "NODE_COORD_SECTION");
    for (i, c) in instance.cities().iter().enumerate() {
        let _ = writeln!(s, "{} {:?} {:?}", i + 1, c.x, c.y);
    }
    s.push_str("EOF\n");
    s
}

/// Parses `name optimum` lines; blank lines and `#` comments are skipped.
pub fn parse_sidecar(text: &str) -> Result<Vec<(String, f64)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let (Some(name), Some(opt), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(parse_err(i + 1, "expected `name optimum`"));
        };
        let opt: f64 = opt
            .parse()
            .map_err(|_| parse_err(i + 1, format!("optimum is not a number: `{opt}`")))?;
        out.push((name.to_string(), opt));
    }
    Ok(out)
}

/// A tour file as written by [`write_tour`].
#[derive(Debug, Clone, PartialEq)]
pub struct TourFile {
    pub name: String,
    pub order: Vec<usize>,
}

impl TourFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut name = String::new();
        let mut order = Vec::new();
        let mut in_section = false;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if in_section {
                if line == "-1" || line == "EOF" {
                    break;
                }
                order.push(
                    line.parse()
                        .map_err(|_| parse_err(i + 1, format!("bad tour entry `{line}`")))?,
                );
            } else if line == "TOUR_SECTION" {
                in_section = true;
            } else if let Some(("NAME", v)) = header_kv(line) {
                name = v.to_string();
            }
        }
        Ok(Self { name, order })
    }
}

/// TSPLIB-style tour file with 0-based indices (stated in the COMMENT line).
pub fn write_tour(name: &str, order: &[usize], length: f64) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "NAME : {name}");
    let _ = writeln!(s, "COMMENT : length {length:?}; city indices are 0-based");
    let _ = writeln!(s, "TYPE : TOUR");
    let _ = writeln!(s, "DIMENSION : {}", order.len());
    let _ = writeln!(s, "TOUR_SECTION");
    for c in order {
        let _ = writeln!(s, "{c}");
    }
    s.push_str("-1\nEOF\n");
    s
}
