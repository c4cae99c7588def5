//! Group actions on images: integer translation, rotation about the image
//! center and reflection. All out-of-frame pixels are filled with zero.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{Grid, Image};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    /// Left-right mirror (columns reversed).
    Horizontal,
    /// Up-down mirror (rows reversed).
    Vertical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GroupTransform {
    Identity,
    /// Content moves `dx` columns right and `dy` rows down.
    Translation { dx: i32, dy: i32 },
    /// Clockwise rotation in degrees, within (-360, 360).
    Rotation { degrees: f64 },
    Reflection { axis: Axis },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Translation,
    Rotation,
    Reflection,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::Translation, Family::Rotation, Family::Reflection];

    pub fn name(self) -> &'static str {
        match self {
            Family::Translation => "translation",
            Family::Rotation => "rotation",
            Family::Reflection => "reflection",
        }
    }
}

impl GroupTransform {
    pub fn translation(dx: i32, dy: i32) -> Self {
        GroupTransform::Translation { dx, dy }
    }

    pub fn rotation(degrees: f64) -> Result<Self> {
        if !(degrees.is_finite() && degrees > -360.0 && degrees < 360.0) {
            return Err(Error::param(format!("rotation angle {degrees} outside (-360, 360)")));
        }
        Ok(GroupTransform::Rotation { degrees })
    }

    pub fn reflection(axis: Axis) -> Self {
        GroupTransform::Reflection { axis }
    }

    pub fn inverse(&self) -> Self {
        match *self {
            GroupTransform::Translation { dx, dy } => GroupTransform::Translation { dx: -dx, dy: -dy },
            GroupTransform::Rotation { degrees } => GroupTransform::Rotation { degrees: -degrees },
            other => other,
        }
    }

    pub fn family(&self) -> Option<Family> {
        match self {
            GroupTransform::Identity => None,
            GroupTransform::Translation { .. } => Some(Family::Translation),
            GroupTransform::Rotation { .. } => Some(Family::Rotation),
            GroupTransform::Reflection { .. } => Some(Family::Reflection),
        }
    }
}

/// The audit sweep for a transformation family: translations by 1..=5
/// pixels along +x, -x, +y, -y; clockwise rotations 10..=90 degrees in
/// steps of 10; both reflections.
pub fn sweep_family(family: Family) -> Vec<GroupTransform> {
    match family {
        Family::Translation => {
            let mut out = Vec::with_capacity(20);
            for (ux, uy) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
                for k in 1..=5 {
                    out.push(GroupTransform::translation(ux * k, uy * k));
                }
            }
            out
        }
        Family::Rotation => {
            (1..=9).map(|k| GroupTransform::Rotation { degrees: f64::from(k * 10) }).collect()
        }
        Family::Reflection => vec![
            GroupTransform::reflection(Axis::Horizontal),
            GroupTransform::reflection(Axis::Vertical),
        ],
    }
}

/// Apply to an arbitrary real-valued grid (no clamping).
pub fn apply_grid(t: &GroupTransform, x: &Grid) -> Grid {
    let (h, w) = (x.height, x.width);
    let values = match *t {
        GroupTransform::Identity => x.values.clone(),
        GroupTransform::Translation { dx, dy } => {
            let mut out = vec![0.0; h * w];
            for r in 0..h {
                let sr = r as i64 - i64::from(dy);
                if sr < 0 || sr >= h as i64 {
                    continue;
                }
                for c in 0..w {
                    let sc = c as i64 - i64::from(dx);
                    if sc >= 0 && sc < w as i64 {
                        out[r * w + c] = x.values[sr as usize * w + sc as usize];
                    }
                }
            }
            out
        }
        GroupTransform::Reflection { axis } => {
            let mut out = Vec::with_capacity(h * w);
            for r in 0..h {
                for c in 0..w {
                    let (sr, sc) = match axis {
                        Axis::Horizontal => (r, w - 1 - c),
                        Axis::Vertical => (h - 1 - r, c),
                    };
                    out.push(x.values[sr * w + sc]);
                }
            }
            out
        }
        GroupTransform::Rotation { degrees } => rotate(x, degrees),
    };
    Grid { height: h, width: w, values }
}

/// `(cos, sin)` of a clockwise angle, exact for multiples of 90 degrees.
fn cos_sin(degrees: f64) -> (f64, f64) {
    if degrees % 90.0 == 0.0 {
        match ((degrees / 90.0) as i64).rem_euclid(4) {
            0 => (1.0, 0.0),
            1 => (0.0, 1.0),
            2 => (-1.0, 0.0),
            _ => (0.0, -1.0),
        }
    } else {
        let rad = degrees.to_radians();
        (rad.cos(), rad.sin())
    }
}

/// Bilinear sample with zero outside the frame. Exact at integer positions.
fn sample_zero(x: &Grid, row: f64, col: f64) -> f64 {
    let (r0, c0) = (row.floor(), col.floor());
    let (fr, fc) = (row - r0, col - c0);
    let at = |r: f64, c: f64| {
        if r < 0.0 || c < 0.0 || r >= x.height as f64 || c >= x.width as f64 {
            0.0
        } else {
            x.values[r as usize * x.width + c as usize]
        }
    };
    let top = at(r0, c0) * (1.0 - fc) + at(r0, c0 + 1.0) * fc;
    let bottom = at(r0 + 1.0, c0) * (1.0 - fc) + at(r0 + 1.0, c0 + 1.0) * fc;
    top * (1.0 - fr) + bottom * fr
}

fn rotate(x: &Grid, degrees: f64) -> Vec<f64> {
    let (h, w) = (x.height, x.width);
    let (cy, cx) = ((h as f64 - 1.0) / 2.0, (w as f64 - 1.0) / 2.0);
    let (cos, sin) = cos_sin(degrees);
    let mut out = Vec::with_capacity(h * w);
    for r in 0..h {
        let ny = r as f64 - cy;
        for c in 0..w {
            let nx = c as f64 - cx;
            // inverse of the clockwise map (x, y) -> (x cos - y sin, x sin + y cos)
            let sx = nx * cos + ny * sin;
            let sy = -nx * sin + ny * cos;
            out.push(sample_zero(x, cy + sy, cx + sx));
        }
    }
    out
}

/// Apply a transform to an image. Interpolated values are clamped to `[0, 1]`.
pub fn apply(t: &GroupTransform, x: &Image) -> Image {
    let g = apply_grid(t, &x.to_grid());
    Image::from_clamped(g.height, g.width, g.values).expect("transform preserves dimensions")
}

impl fmt::Display for GroupTransform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let signed = |v: i32| if v > 0 { format!("+{v}") } else { v.to_string() };
        match *self {
            GroupTransform::Identity => write!(f, "id"),
            GroupTransform::Translation { dx, dy } => write!(f, "t({},{})", signed(dx), signed(dy)),
            GroupTransform::Rotation { degrees } => write!(f, "r({degrees})"),
            GroupTransform::Reflection { axis: Axis::Horizontal } => write!(f, "f(h)"),
            GroupTransform::Reflection { axis: Axis::Vertical } => write!(f, "f(v)"),
        }
    }
}

impl FromStr for GroupTransform {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::format(format!("unrecognized transform `{s}`"));
        let s = s.trim();
        if s == "id" {
            return Ok(GroupTransform::Identity);
        }
        let inner = |prefix: &str| s.strip_prefix(prefix).and_then(|r| r.strip_suffix(')'));
        if let Some(args) = inner("t(") {
            let (a, b) = args.split_once(',').ok_or_else(bad)?;
            let parse = |v: &str| v.trim().trim_start_matches('+').parse::<i32>().map_err(|_| bad());
            return Ok(GroupTransform::translation(parse(a)?, parse(b)?));
        }
        if let Some(arg) = inner("r(") {
            return GroupTransform::rotation(arg.trim().parse().map_err(|_| bad())?);
        }
        match inner("f(") {
            Some("h") => Ok(GroupTransform::reflection(Axis::Horizontal)),
            Some("v") => Ok(GroupTransform::reflection(Axis::Vertical)),
            _ => Err(bad()),
        }
    }
}
