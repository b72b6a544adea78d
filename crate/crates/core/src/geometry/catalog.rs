//! Named test domains.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::{Point2, Rotation2};
use serde::{Deserialize, Serialize};

use super::{LipschitzChart, PolygonDomain};
use crate::{Error, Result};

/// Catalog entry with its parameters; deserializes from
/// `{ name = "sawtooth-square", teeth = 8, slope = 1.0 }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DomainSpec {
    Square {
        #[serde(default = "one")]
        side: f64,
    },
    RegularNgon {
        n: usize,
        #[serde(default = "one")]
        r: f64,
    },
    Lshape {
        #[serde(default = "one")]
        side: f64,
    },
    SawtoothSquare {
        teeth: usize,
        slope: f64,
    },
    KochPrefractal {
        level: u32,
        #[serde(default = "one")]
        side: f64,
    },
}

fn one() -> f64 {
    1.0
}

/// Builds a catalog domain from its name and a flat parameter map.
pub fn make_domain(name: &str, params: &BTreeMap<String, f64>) -> Result<PolygonDomain> {
    let mut obj = serde_json::Map::new();
    obj.insert("name".into(), name.into());
    for (k, v) in params {
        // integer-valued parameters are passed through as integers
        let value = if v.fract() == 0.0 && v.abs() < 1e15 && matches!(k.as_str(), "n" | "teeth" | "level") {
            serde_json::Value::from(*v as i64)
        } else {
            serde_json::Value::from(*v)
        };
        obj.insert(k.clone(), value);
    }
    let spec: DomainSpec = serde_json::from_value(serde_json::Value::Object(obj)).map_err(|e| {
        let msg = e.to_string();
        if msg.contains("unknown variant") {
            Error::UnknownName(name.to_string())
        } else {
            Error::InvalidParameter(msg)
        }
    })?;
    spec.build()
}

impl DomainSpec {
    pub fn build(&self) -> Result<PolygonDomain> {
        match *self {
            DomainSpec::Square { side } => {
                positive("side", side)?;
                PolygonDomain::new(
                    "square",
                    vec![
                        Point2::new(0.0, 0.0),
                        Point2::new(side, 0.0),
                        Point2::new(side, side),
                        Point2::new(0.0, side),
                    ],
                )
            }
            DomainSpec::RegularNgon { n, r } => {
                if n < 3 {
                    return Err(Error::InvalidParameter(format!("ngon needs n >= 3, got {n}")));
                }
                positive("r", r)?;
                let vertices = (0..n)
                    .map(|k| {
                        let t = 2.0 * PI * k as f64 / n as f64;
                        Point2::new(r * t.cos(), r * t.sin())
                    })
                    .collect();
                PolygonDomain::new(format!("regular-{n}-gon"), vertices)
            }
            DomainSpec::Lshape { side } => {
                positive("side", side)?;
                let h = 0.5 * side;
                PolygonDomain::new(
                    "lshape",
                    vec![
                        Point2::new(0.0, 0.0),
                        Point2::new(side, 0.0),
                        Point2::new(side, h),
                        Point2::new(h, h),
                        Point2::new(h, side),
                        Point2::new(0.0, side),
                    ],
                )
            }
            DomainSpec::SawtoothSquare { teeth, slope } => sawtooth_square(teeth, slope),
            DomainSpec::KochPrefractal { level, side } => koch(level, side),
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
    }
}

/// Unit square whose top side is a zigzag of `teeth` teeth with slopes `±slope`
/// (amplitude `slope / (2 teeth)`, pointing outward). The zigzag is registered
/// as a graph chart.
fn sawtooth_square(teeth: usize, slope: f64) -> Result<PolygonDomain> {
    if teeth == 0 {
        return Err(Error::InvalidParameter("sawtooth needs teeth >= 1".into()));
    }
    positive("slope", slope)?;
    let m = 2 * teeth;
    let amp = slope / m as f64;
    let breakpoints: Vec<(f64, f64)> = (0..=m)
        .map(|j| {
            let x = j as f64 / m as f64;
            let y = if j % 2 == 1 { 1.0 + amp } else { 1.0 };
            (x, y)
        })
        .collect();
    let mut vertices = vec![Point2::new(0.0, 0.0), Point2::new(1.0, 0.0)];
    vertices.extend(breakpoints.iter().rev().map(|&(x, y)| Point2::new(x, y)));
    // the top-left corner (0, 1) is the last breakpoint; the left side closes the loop
    let chart = LipschitzChart::new(breakpoints)?;
    PolygonDomain::new("sawtooth-square", vertices)?.with_chart(2..2 + m, chart)
}

/// Level-`level` Koch snowflake on an equilateral triangle of the given side.
fn koch(level: u32, side: f64) -> Result<PolygonDomain> {
    if level > 4 {
        return Err(Error::InvalidParameter(format!(
            "koch level must be in [0, 4], got {level}"
        )));
    }
    positive("side", side)?;
    let mut pts = vec![
        Point2::new(0.0, 0.0),
        Point2::new(side, 0.0),
        Point2::new(0.5 * side, 0.5 * 3f64.sqrt() * side),
    ];
    // clockwise turn puts the bump outside a counterclockwise polygon
    let turn = Rotation2::new(-PI / 3.0);
    for _ in 0..level {
        let n = pts.len();
        let mut next = Vec::with_capacity(4 * n);
        for i in 0..n {
            let (p, q) = (pts[i], pts[(i + 1) % n]);
            let d = (q - p) / 3.0;
            let a = p + d;
            let b = p + 2.0 * d;
            next.push(p);
            next.push(a);
            next.push(a + turn * d);
            next.push(b);
        }
        pts = next;
    }
    PolygonDomain::new(format!("koch-{level}"), pts)
}
