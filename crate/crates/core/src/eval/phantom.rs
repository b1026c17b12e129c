//! Seeded generator for layered B-scan-like phantoms: a piecewise-smooth
//! tissue slab with undulating internal layers, a bright membrane band, and
//! multiplicative speckle. Acceptance and sweep runs use these instead of
//! clinical data.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::raster::Image;

#[derive(Debug, Clone)]
pub struct PhantomParams {
    pub width: usize,
    pub height: usize,
    /// Internal tissue layers above the membrane.
    pub n_layers: usize,
    /// Multiplicative speckle sigma (samples clipped to 3 sigma).
    pub noise_sigma: f64,
    /// Extra depth (pixels) of the slab center at the image edges.
    pub curvature: f64,
    /// Amplitude (pixels) of the sinusoidal layer undulation.
    pub wave_amp: f64,
    /// Period (pixels) of the undulation.
    pub wave_period: f64,
}

impl Default for PhantomParams {
    fn default() -> Self {
        PhantomParams {
            width: 512,
            height: 192,
            n_layers: 4,
            noise_sigma: 0.03,
            curvature: 10.0,
            wave_amp: 5.0,
            wave_period: 140.0,
        }
    }
}

impl PhantomParams {
    pub fn with_size(mut self, width: usize, height: usize) -> Self {
        self.width = width;
        self.height = height;
        self
    }
}

/// Standard normal via Box-Muller, clipped to [-3, 3].
fn randn(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.random::<f64>().max(1e-12);
    let u2: f64 = rng.random();
    let g = (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
    g.clamp(-3.0, 3.0)
}

pub fn generate(params: &PhantomParams, seed: u64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = params.width;
    let h = params.height;
    let hf = h as f64;

    let phase1 = rng.random::<f64>() * std::f64::consts::TAU;
    let phase2 = rng.random::<f64>() * std::f64::consts::TAU;
    let phase3 = rng.random::<f64>() * std::f64::consts::TAU;
    let top0 = hf * (0.15 + 0.06 * rng.random::<f64>());
    let thickness = hf * (0.52 + 0.06 * rng.random::<f64>());

    // Per-layer base intensities, brightest at the membrane.
    let mut layer_vals: Vec<f64> = (0..params.n_layers)
        .map(|k| {
            let base = if k % 2 == 0 { 0.62 } else { 0.34 };
            base + 0.08 * (rng.random::<f64>() - 0.5)
        })
        .collect();
    layer_vals.push(0.5); // thin zone between last layer and membrane

    let cx = (w.max(2) - 1) as f64 / 2.0;
    let omega = std::f64::consts::TAU / params.wave_period;

    // Slab top depth per column: parabola plus undulation.
    let top: Vec<f64> = (0..w)
        .map(|x| {
            let t = (x as f64 - cx) / cx.max(1.0);
            top0 + params.curvature * t * t + params.wave_amp * (omega * x as f64 + phase1).sin()
        })
        .collect();

    let mut img = Image::zeros(w, h);
    for x in 0..w {
        let t0 = top[x];
        let t1 = t0 + thickness;
        // Membrane band occupies the bottom 4 rows of the slab.
        let membrane_top = t1 - 4.0;
        // Lateral illumination modulation.
        let lateral = 0.88 + 0.12 * (omega * 0.37 * x as f64 + phase2).sin();
        for y in 0..h {
            let yf = y as f64;
            let base = if yf < t0 {
                0.04
            } else if yf >= t1 {
                0.08
            } else if yf >= membrane_top {
                0.97
            } else {
                // Undulating internal boundaries at fixed fractions.
                let frac = (yf - t0) / (membrane_top - t0).max(1.0);
                let wob = 0.03 * (omega * 1.7 * x as f64 + phase3 + yf * 0.05).sin();
                let idx = (((frac + wob).clamp(0.0, 0.999)) * layer_vals.len() as f64) as usize;
                layer_vals[idx.min(layer_vals.len() - 1)]
            };
            let speckled = base * lateral * (1.0 + params.noise_sigma * randn(&mut rng));
            img.set(x, y, speckled.clamp(0.01, 0.99));
        }
    }
    img
}

/// Seeded corpus of phantoms with shared parameters.
pub fn corpus(params: &PhantomParams, count: usize, seed: u64) -> Vec<Image> {
    (0..count)
        .map(|i| generate(params, seed.wrapping_add(i as u64).wrapping_mul(0x9e37_79b9)))
        .collect()
}
