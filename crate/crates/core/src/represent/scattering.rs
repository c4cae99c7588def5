use std::f64::consts::PI;

use rustfft::num_complex::Complex;

use super::fft::Fft2;
use super::{Provenance, Representation};
use crate::data::Image;
use crate::error::{Error, Result};

/// Morlet wavelets at `j` dyadic scales and `l` orientations plus a
/// Gaussian low-pass, all stored in the frequency domain for circular
/// convolution on a `side`x`side` grid.
#[derive(Debug, Clone)]
pub struct FilterBank {
    side: usize,
    scales: u32,
    orientations: u32,
    /// `psi[j * orientations + l]`
    psi: Vec<Vec<Complex<f64>>>,
    phi: Vec<Complex<f64>>,
    fft: Fft2,
}

/// Periodized anisotropic Gabor filter centered at the origin, following
/// the usual scattering conventions (`slant` squeezes the envelope across
/// the wave direction).
fn gabor(side: usize, sigma: f64, theta: f64, xi: f64, slant: f64) -> Vec<Complex<f64>> {
    let (cos, sin) = (theta.cos(), theta.sin());
    let s2 = slant * slant;
    let denom = 2.0 * sigma * sigma;
    let c00 = (cos * cos + s2 * sin * sin) / denom;
    let c01 = cos * sin * (1.0 - s2) / denom;
    let c11 = (sin * sin + s2 * cos * cos) / denom;
    let norm = 2.0 * PI * sigma * sigma / slant;
    let n = side as f64;
    let mut out = vec![Complex::new(0.0, 0.0); side * side];
    for r in 0..side {
        for c in 0..side {
            let mut acc = Complex::new(0.0, 0.0);
            for er in -2i32..=2 {
                let x = r as f64 + f64::from(er) * n;
                for ec in -2i32..=2 {
                    let y = c as f64 + f64::from(ec) * n;
                    let env = -(c00 * x * x + 2.0 * c01 * x * y + c11 * y * y);
                    let phase = xi * (x * cos + y * sin);
                    acc += Complex::from_polar(env.exp(), phase);
                }
            }
            out[r * side + c] = acc / norm;
        }
    }
    out
}

fn morlet(side: usize, sigma: f64, theta: f64, xi: f64, slant: f64) -> Vec<Complex<f64>> {
    let wave = gabor(side, sigma, theta, xi, slant);
    let envelope = gabor(side, sigma, theta, 0.0, slant);
    let k = wave.iter().sum::<Complex<f64>>() / envelope.iter().sum::<Complex<f64>>();
    wave.iter().zip(&envelope).map(|(w, e)| w - k * e).collect()
}

/// Build the scattering filter bank.
///
/// Scale `j` uses envelope width `0.8 * 2^j` and center frequency
/// `3pi/4 / 2^j`; orientations are `k*pi/l`. The low-pass has width
/// `0.8 * 2^(scales-1)` and unit spatial sum.
pub fn build_filter_bank(side: usize, scales: u32, orientations: u32) -> Result<FilterBank> {
    if scales == 0 || orientations == 0 {
        return Err(Error::param("filter bank needs at least one scale and one orientation"));
    }
    if scales >= usize::BITS || side < (1usize << scales) {
        return Err(Error::param(format!("side {side} is smaller than 2^{scales}")));
    }
    let fft = Fft2::new(side);
    let slant = 4.0 / f64::from(orientations);
    let mut psi = Vec::with_capacity((scales * orientations) as usize);
    for j in 0..scales {
        let sigma = 0.8 * 2f64.powi(j as i32);
        let xi = 0.75 * PI / 2f64.powi(j as i32);
        for l in 0..orientations {
            let theta = f64::from(l) * PI / f64::from(orientations);
            let mut filter = morlet(side, sigma, theta, xi, slant);
            fft.forward(&mut filter);
            psi.push(filter);
        }
    }
    let mut phi = gabor(side, 0.8 * 2f64.powi(scales as i32 - 1), 0.0, 0.0, 1.0);
    let total: f64 = phi.iter().map(|v| v.re).sum();
    for v in &mut phi {
        *v = Complex::new(v.re / total, 0.0);
    }
    fft.forward(&mut phi);
    Ok(FilterBank { side, scales, orientations, psi, phi, fft })
}

impl FilterBank {
    pub fn side(&self) -> usize {
        self.side
    }

    pub fn scales(&self) -> u32 {
        self.scales
    }

    pub fn orientations(&self) -> u32 {
        self.orientations
    }

    pub fn band_pass_count(&self) -> usize {
        self.psi.len()
    }

    /// Subsampling step `2^scales`.
    pub fn stride(&self) -> usize {
        1 << self.scales
    }

    /// Samples per axis after subsampling.
    pub fn output_side(&self) -> usize {
        self.side.div_ceil(self.stride())
    }

    /// Length of the flat scattering vector for the given order.
    pub fn output_len(&self, order: u8) -> usize {
        let channels = if order == 0 { 1 } else { 1 + self.psi.len() };
        channels * self.output_side() * self.output_side()
    }

    fn spatial(&self, mut freq: Vec<Complex<f64>>) -> Vec<Complex<f64>> {
        self.fft.inverse(&mut freq);
        freq
    }

    /// Spatial-domain band-pass filter `(scale, orientation)`.
    pub fn band_pass_spatial(&self, scale: u32, orientation: u32) -> Vec<Complex<f64>> {
        self.spatial(self.psi[(scale * self.orientations + orientation) as usize].clone())
    }

    /// Spatial-domain low-pass filter.
    pub fn low_pass_spatial(&self) -> Vec<f64> {
        self.spatial(self.phi.clone()).iter().map(|v| v.re).collect()
    }

    /// Low-pass filter the spectrum `spec` and subsample the real part.
    fn low_pass_subsampled(&self, spec: &mut [Complex<f64>], out: &mut Vec<f64>) {
        for (s, p) in spec.iter_mut().zip(&self.phi) {
            *s *= p;
        }
        self.fft.inverse(spec);
        let step = self.stride();
        for r in (0..self.side).step_by(step) {
            for c in (0..self.side).step_by(step) {
                out.push(spec[r * self.side + c].re);
            }
        }
    }
}

/// Scattering coefficients of order 0 (`x * phi`) or 1 (additionally
/// `|x * psi_{j,l}| * phi` for every band-pass), subsampled by `2^J` and
/// concatenated channel by channel.
pub fn scatter(x: &Image, bank: &FilterBank, order: u8) -> Result<Representation> {
    if order > 1 {
        return Err(Error::param(format!("scattering order {order} not supported (use 0 or 1)")));
    }
    if x.height() != bank.side || x.width() != bank.side {
        return Err(Error::input(format!(
            "image is {}x{} but the filter bank expects {}x{}",
            x.height(),
            x.width(),
            bank.side,
            bank.side
        )));
    }
    let spectrum = bank.fft.forward_real(x.pixels());
    let mut out = Vec::with_capacity(bank.output_len(order));
    bank.low_pass_subsampled(&mut spectrum.clone(), &mut out);
    if order == 1 {
        let mut work = vec![Complex::new(0.0, 0.0); spectrum.len()];
        for psi in &bank.psi {
            for ((w, s), p) in work.iter_mut().zip(&spectrum).zip(psi) {
                *w = s * p;
            }
            bank.fft.inverse(&mut work);
            for w in work.iter_mut() {
                *w = Complex::new(w.norm(), 0.0);
            }
            bank.fft.forward(&mut work);
            bank.low_pass_subsampled(&mut work, &mut out);
        }
    }
    Representation::new(out, Provenance::Invariant, bank.side)
}
