use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Provenance, Representation};
use crate::data::{Grid, Image};
use crate::error::{Error, Result};
use crate::seeding::rng;

const MAX_ATTEMPTS: usize = 100;

/// One radial Gaussian bump `a * exp(-(|u| - c)^2 / (2 sigma^2))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub a: f64,
    pub c: f64,
    pub sigma: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct IeneoSpec {
    radius: usize,
    bumps: Vec<Bump>,
    seed: Option<u64>,
}

/// A radially symmetric convolution kernel with unit L1 mass.
///
/// Serialized as `{radius, bumps: [{a, c, sigma}], seed}`; the kernel grid
/// is re-realized from the bumps on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "IeneoSpec", into = "IeneoSpec")]
pub struct IeneoOperator {
    radius: usize,
    bumps: Vec<Bump>,
    seed: Option<u64>,
    kernel: Vec<f64>,
}

impl From<IeneoOperator> for IeneoSpec {
    fn from(op: IeneoOperator) -> Self {
        IeneoSpec { radius: op.radius, bumps: op.bumps, seed: op.seed }
    }
}

impl TryFrom<IeneoSpec> for IeneoOperator {
    type Error = Error;

    fn try_from(spec: IeneoSpec) -> Result<Self> {
        IeneoOperator::from_bumps(spec.radius, spec.bumps, spec.seed)
    }
}

/// Unnormalized radial profile on the `(2r+1)^2` grid.
fn realize(radius: usize, bumps: &[Bump]) -> Vec<f64> {
    let r = radius as i64;
    let mut kernel = Vec::with_capacity((2 * radius + 1).pow(2));
    for dy in -r..=r {
        for dx in -r..=r {
            // depends on dx^2 + dy^2 only, so exactly symmetric on the grid
            let dist = ((dx * dx + dy * dy) as f64).sqrt();
            kernel.push(
                bumps
                    .iter()
                    .map(|b| b.a * (-(dist - b.c).powi(2) / (2.0 * b.sigma * b.sigma)).exp())
                    .sum(),
            );
        }
    }
    kernel
}

impl IeneoOperator {
    /// Realize and L1-normalize a kernel from explicit bump parameters.
    pub fn from_bumps(radius: usize, bumps: Vec<Bump>, seed: Option<u64>) -> Result<Self> {
        if radius == 0 {
            return Err(Error::param("IENEO radius must be at least 1"));
        }
        if bumps.is_empty() {
            return Err(Error::param("IENEO needs at least one bump"));
        }
        if let Some(b) = bumps.iter().find(|b| !(b.sigma > 0.0 && b.c >= 0.0 && b.a.is_finite())) {
            return Err(Error::param(format!("invalid bump {b:?}")));
        }
        let mut kernel = realize(radius, &bumps);
        let l1: f64 = kernel.iter().map(|v| v.abs()).sum();
        if !(l1 >= 1e-12) {
            return Err(Error::Sampling(format!("degenerate kernel with L1 mass {l1:e}")));
        }
        for v in &mut kernel {
            *v /= l1;
        }
        Ok(IeneoOperator { radius, bumps, seed, kernel })
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn bumps(&self) -> &[Bump] {
        &self.bumps
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// Side length of the kernel grid, `2 * radius + 1`.
    pub fn width(&self) -> usize {
        2 * self.radius + 1
    }

    /// Row-major kernel, center at `(radius, radius)`.
    pub fn kernel(&self) -> &[f64] {
        &self.kernel
    }

    pub fn kernel_at(&self, dy: i64, dx: i64) -> f64 {
        let r = self.radius as i64;
        self.kernel[((dy + r) * (2 * r + 1) + dx + r) as usize]
    }

    /// Compact description for reports.
    pub fn summary(&self) -> String {
        let bumps: Vec<String> = self
            .bumps
            .iter()
            .map(|b| format!("({:.3},{:.3},{:.3})", b.a, b.c, b.sigma))
            .collect();
        format!("radius={} bumps=[{}]", self.radius, bumps.join(" "))
    }
}

/// Sample a random operator: `1..=max_bumps` bumps with `a ~ U[-1, 1]`,
/// `c ~ U[0, radius]`, `sigma ~ U[0.3, radius/2]`. Degenerate kernels are
/// resampled from the same stream, at most 100 times.
pub fn sample_ieneo(radius: usize, max_bumps: usize, seed: u64) -> Result<IeneoOperator> {
    if radius == 0 || max_bumps == 0 {
        return Err(Error::param("radius and max_bumps must be at least 1"));
    }
    let mut rng = rng(seed);
    let r = radius as f64;
    let sigma_hi = (r / 2.0).max(0.3);
    for _ in 0..MAX_ATTEMPTS {
        let m = rng.gen_range(1..=max_bumps);
        let bumps: Vec<Bump> = (0..m)
            .map(|_| Bump {
                a: rng.gen_range(-1.0..=1.0),
                c: rng.gen_range(0.0..=r),
                sigma: rng.gen_range(0.3..=sigma_hi),
            })
            .collect();
        match IeneoOperator::from_bumps(radius, bumps, Some(seed)) {
            Ok(op) => return Ok(op),
            Err(Error::Sampling(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::Sampling(format!("no non-degenerate kernel after {MAX_ATTEMPTS} attempts")))
}

/// "Same"-size convolution with zero padding on an arbitrary grid.
pub fn apply_ieneo_grid(op: &IeneoOperator, x: &Grid) -> Result<Grid> {
    if op.radius >= x.height.min(x.width) {
        return Err(Error::input(format!(
            "kernel radius {} does not fit a {}x{} image",
            op.radius, x.height, x.width
        )));
    }
    let (h, w) = (x.height as i64, x.width as i64);
    let r = op.radius as i64;
    let kw = 2 * r + 1;
    let mut out = vec![0.0; x.values.len()];
    for i in 0..h {
        for j in 0..w {
            let mut acc = 0.0;
            for dy in (-r).max(i - h + 1)..=r.min(i) {
                let row = ((i - dy) * w) as usize;
                let krow = ((dy + r) * kw + r) as usize;
                for dx in (-r).max(j - w + 1)..=r.min(j) {
                    acc += op.kernel[(krow as i64 + dx) as usize] * x.values[row + (j - dx) as usize];
                }
            }
            out[(i * w + j) as usize] = acc;
        }
    }
    Ok(Grid { height: x.height, width: x.width, values: out })
}

/// Equivariant representation: the operator response flattened to
/// `height * width` values. No nonlinearity is applied.
pub fn apply_ieneo(op: &IeneoOperator, x: &Image) -> Result<Representation> {
    let g = apply_ieneo_grid(op, &x.to_grid())?;
    Representation::new(g.values, Provenance::Equivariant, x.height().max(x.width()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sampling_is_deterministic_and_normalized() {
        let a = sample_ieneo(4, 3, 99).unwrap();
        let b = sample_ieneo(4, 3, 99).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, sample_ieneo(4, 3, 100).unwrap());
        let l1: f64 = a.kernel().iter().map(|v| v.abs()).sum();
        assert!((l1 - 1.0).abs() <= 1e-12);
        assert!(a.bumps().len() <= 3);
        for bump in a.bumps() {
            assert!((-1.0..=1.0).contains(&bump.a));
            assert!((0.0..=4.0).contains(&bump.c));
            assert!((0.3..=2.0).contains(&bump.sigma));
        }
    }

    #[test]
    fn kernel_has_square_symmetries() {
        for seed in 0..20 {
            let op = sample_ieneo(3, 3, seed).unwrap();
            let r = 3i64;
            for dy in -r..=r {
                for dx in -r..=r {
                    let v = op.kernel_at(dy, dx);
                    assert_eq!(v, op.kernel_at(dx, -dy), "quarter turn");
                    assert_eq!(v, op.kernel_at(dy, -dx), "mirror");
                    assert_eq!(v, op.kernel_at(-dy, dx), "flip");
                }
            }
        }
    }

    #[test]
    fn impulse_response_is_the_kernel() {
        let op = sample_ieneo(2, 2, 5).unwrap();
        let x = Image::from_fn(9, 9, |r, c| if (r, c) == (4, 4) { 1.0 } else { 0.0 }).unwrap();
        let y = apply_ieneo_grid(&op, &x.to_grid()).unwrap();
        for r in 0..9i64 {
            for c in 0..9i64 {
                let expect = if (r - 4).abs() <= 2 && (c - 4).abs() <= 2 { op.kernel_at(r - 4, c - 4) } else { 0.0 };
                assert_eq!(y.get(r as usize, c as usize), expect);
            }
        }
    }

    #[test]
    fn output_length_and_radius_check() {
        let op = sample_ieneo(4, 3, 1).unwrap();
        let x = Image::constant(28, 28, 0.5).unwrap();
        assert_eq!(apply_ieneo(&op, &x).unwrap().len(), 784);
        let small = Image::constant(4, 4, 0.5).unwrap();
        assert!(matches!(apply_ieneo(&op, &small), Err(Error::Input(_))));
    }

    #[test]
    fn non_expansive_in_sup_norm() {
        let op = sample_ieneo(3, 3, 8).unwrap();
        let x = Image::from_fn(12, 12, |r, c| ((r * 7 + c * 3) % 10) as f64 / 10.0).unwrap();
        let y = Image::from_fn(12, 12, |r, c| (x.get(r, c) + if (r + c) % 2 == 0 { 0.3 } else { -0.3 }).clamp(0.0, 1.0)).unwrap();
        let dx = x.to_grid().max_abs_diff(&y.to_grid());
        assert!(dx <= 0.3 + 1e-12);
        let fx = apply_ieneo_grid(&op, &x.to_grid()).unwrap();
        let fy = apply_ieneo_grid(&op, &y.to_grid()).unwrap();
        assert!(fx.max_abs_diff(&fy) <= dx + 1e-12);
    }

    #[test]
    fn json_round_trip_re_realizes_kernel() {
        let op = sample_ieneo(4, 3, 42).unwrap();
        let json = serde_json::to_string(&op).unwrap();
        assert!(json.contains("\"radius\":4") && json.contains("\"seed\":42") && !json.contains("kernel"));
        let back: IeneoOperator = serde_json::from_str(&json).unwrap();
        assert_eq!(back, op);
    }

    #[test]
    fn degenerate_bumps_rejected() {
        let zero = vec![Bump { a: 0.0, c: 1.0, sigma: 1.0 }];
        assert!(matches!(IeneoOperator::from_bumps(2, zero, None), Err(Error::Sampling(_))));
        assert!(IeneoOperator::from_bumps(0, vec![Bump { a: 1.0, c: 0.0, sigma: 1.0 }], None).is_err());
    }
}
