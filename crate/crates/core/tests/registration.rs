use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scenewatch_core::registration::{data_residual, estimate_flow, FlowParams};
use scenewatch_core::GrayImage;

/// Smooth random texture evaluated analytically so that shifted copies have
/// no border artefacts.
struct Texture {
    waves: Vec<(f64, f64, f64, f64)>,
}

impl Texture {
    fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let waves = (0..12)
            .map(|_| {
                let period: f64 = rng.random_range(10.0..28.0);
                let angle: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                let k = std::f64::consts::TAU / period;
                (k * angle.cos(), k * angle.sin(), rng.random_range(0.0..std::f64::consts::TAU), rng.random_range(0.5..1.0))
            })
            .collect();
        Self { waves }
    }

    fn eval(&self, x: f64, y: f64) -> f32 {
        let total: f64 = self.waves.iter().map(|w| w.3).sum();
        let s: f64 = self.waves.iter().map(|&(kx, ky, ph, a)| a * (kx * x + ky * y + ph).sin()).sum();
        (0.5 + 0.45 * s / total * 2.0).clamp(0.0, 1.0) as f32
    }

    fn image(&self, size: usize, shift: (f64, f64)) -> GrayImage {
        GrayImage::from_fn(size, size, |x, y| self.eval(x as f64 - shift.0, y as f64 - shift.1))
    }
}

fn interior_epe(flow: &scenewatch_core::registration::FlowField, s: (f64, f64), crop: usize) -> f64 {
    let mut acc = 0.0;
    let mut n = 0;
    for y in crop..flow.height - crop {
        for x in crop..flow.width - crop {
            let (u, v) = flow.at(x, y);
            acc += ((u as f64 - s.0).powi(2) + (v as f64 - s.1).powi(2)).sqrt();
            n += 1;
        }
    }
    acc / n as f64
}

#[test]
fn identity_registration_is_near_zero() {
    let tex = Texture::new(3);
    let img = tex.image(64, (0.0, 0.0));
    let flow = estimate_flow(&img, &img, &FlowParams::default()).unwrap();
    let mean: f64 = flow
        .du
        .iter()
        .zip(&flow.dv)
        .map(|(u, v)| ((u * u + v * v) as f64).sqrt())
        .sum::<f64>()
        / flow.du.len() as f64;
    assert!(mean < 1e-2, "{mean}");
}

#[test]
fn recovers_horizontal_translation() {
    let tex = Texture::new(11);
    let query = tex.image(64, (0.0, 0.0));
    let reference = tex.image(64, (3.0, 0.0));
    let flow = estimate_flow(&query, &reference, &FlowParams::default()).unwrap();
    let (mut su, mut sv, mut n) = (0.0, 0.0, 0.0);
    for y in 8..56 {
        for x in 8..56 {
            let (u, v) = flow.at(x, y);
            su += u as f64;
            sv += v as f64;
            n += 1.0;
        }
    }
    let (mu, mv) = (su / n, sv / n);
    assert!((mu - 3.0).abs() < 0.5 && mv.abs() < 0.5, "mean flow ({mu}, {mv})");
    assert!(data_residual(&query, &reference, &flow) <= data_residual(&query, &reference, &FlowField::zeros(64, 64)));
}

use scenewatch_core::registration::FlowField;

#[test]
fn seeded_shifts_recovered_and_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for seed in 0..6u64 {
        let s = (rng.random_range(-3i32..=3) as f64, rng.random_range(-3i32..=3) as f64);
        let tex = Texture::new(1000 + seed);
        let query = tex.image(64, (0.0, 0.0));
        let reference = tex.image(64, s);
        let flow = estimate_flow(&query, &reference, &FlowParams::default()).unwrap();
        let epe = interior_epe(&flow, s, 8);
        assert!(epe < 0.5, "seed {seed} shift {s:?} epe {epe}");
        let again = estimate_flow(&query, &reference, &FlowParams::default()).unwrap();
        assert_eq!(flow, again);
    }
}
