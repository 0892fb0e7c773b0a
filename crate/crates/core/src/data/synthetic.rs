//! Separable stand-in data: each class has its own base hue and blob shape.

use crate::data::dataset::{Dataset, NUM_CLASSES, PATCH_BYTES, PATCH_SIDE};
use crate::rng::{SeededRng, Stream};

const HUE_JITTER_DEG: f64 = 15.0;
const NOISE_SD: f64 = 12.0;

/// HSV (hue in degrees, s and v in `[0, 1]`) to RGB in `[0, 1]`.
fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [f64; 3] {
    let h = h.rem_euclid(360.0) / 60.0;
    let c = v * s;
    let x = c * (1.0 - (h % 2.0 - 1.0).abs());
    let (r, g, b) = match h as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    [r + m, g + m, b + m]
}

/// Blob coverage at pixel `(y, x)` relative to a centre `(cy, cx)`.
fn inside(class: usize, dy: f64, dx: f64, radius: f64, angle: f64) -> bool {
    let (s, c) = angle.sin_cos();
    let u = c * dx + s * dy;
    let v = -s * dx + c * dy;
    match class {
        // Round nucleus.
        0 => u * u + v * v <= radius * radius,
        // Spindle.
        1 => (u / (radius * 1.6)).powi(2) + (v / (radius * 0.35)).powi(2) <= 1.0,
        // Small dense dot.
        2 => u * u + v * v <= (radius * 0.5).powi(2),
        // Ring.
        _ => {
            let r2 = u * u + v * v;
            r2 <= radius * radius && r2 >= (radius * 0.6).powi(2)
        }
    }
}

fn sample(class: usize, rng: &mut SeededRng) -> Vec<u8> {
    let hue = 90.0 * class as f64 + HUE_JITTER_DEG * (2.0 * rng.next_f64() - 1.0);
    let background = hsv_to_rgb(hue, 0.25, 0.85);
    let blob = hsv_to_rgb(hue, 0.8, 0.55);
    let half = PATCH_SIDE as f64 / 2.0;
    let cy = half + 3.0 * (2.0 * rng.next_f64() - 1.0);
    let cx = half + 3.0 * (2.0 * rng.next_f64() - 1.0);
    let radius = 7.0 + 2.0 * rng.next_f64();
    let angle = std::f64::consts::PI * rng.next_f64();
    let mut out = Vec::with_capacity(PATCH_BYTES);
    for y in 0..PATCH_SIDE {
        for x in 0..PATCH_SIDE {
            let colour = if inside(
                class,
                y as f64 + 0.5 - cy,
                x as f64 + 0.5 - cx,
                radius,
                angle,
            ) {
                blob
            } else {
                background
            };
            for ch in colour {
                let v = 255.0 * ch + NOISE_SD * rng.standard_normal();
                out.push(v.round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    out
}

/// `4 * n_per_class` patches with labels cycling `0, 1, 2, 3`. The same seed
/// always produces the same bytes.
pub fn synthetic_dataset(seed: u64, n_per_class: usize) -> Dataset {
    let mut rng = SeededRng::stream(seed, Stream::Synthetic);
    let total = n_per_class * NUM_CLASSES;
    let mut pixels = Vec::with_capacity(total * PATCH_BYTES);
    let mut labels = Vec::with_capacity(total);
    for i in 0..total {
        let class = i % NUM_CLASSES;
        pixels.extend(sample(class, &mut rng));
        labels.push(class as u8);
    }
    Dataset::new(pixels, labels).expect("generator emits valid patches")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean_hue(patch: &[u8]) -> f64 {
        let mut rgb = [0.0; 3];
        for px in patch.chunks_exact(3) {
            for (acc, &v) in rgb.iter_mut().zip(px) {
                *acc += v as f64;
            }
        }
        let [r, g, b] = rgb;
        let (max, min) = (r.max(g).max(b), r.min(g).min(b));
        let d = max - min;
        let h = if max == r {
            60.0 * ((g - b) / d)
        } else if max == g {
            60.0 * ((b - r) / d + 2.0)
        } else {
            60.0 * ((r - g) / d + 4.0)
        };
        h.rem_euclid(360.0)
    }

    fn angular_diff(a: f64, b: f64) -> f64 {
        let d = (a - b).rem_euclid(360.0);
        d.min(360.0 - d)
    }

    #[test]
    fn hsv_primaries() {
        assert_eq!(hsv_to_rgb(0.0, 1.0, 1.0), [1.0, 0.0, 0.0]);
        assert_eq!(hsv_to_rgb(120.0, 1.0, 1.0), [0.0, 1.0, 0.0]);
        assert_eq!(hsv_to_rgb(240.0, 1.0, 1.0), [0.0, 0.0, 1.0]);
        assert_eq!(hsv_to_rgb(77.0, 0.0, 0.5), [0.5, 0.5, 0.5]);
    }

    #[test]
    fn deterministic_and_balanced() {
        let a = synthetic_dataset(3, 5);
        assert_eq!(a, synthetic_dataset(3, 5));
        assert_ne!(a, synthetic_dataset(4, 5));
        assert_eq!(a.class_counts(), [5; 4]);
    }

    #[test]
    fn hues_are_well_separated() {
        let ds = synthetic_dataset(11, 60);
        let mut worst_spread: f64 = 0.0;
        let mut centres = [0.0; 4];
        for (c, centre) in centres.iter_mut().enumerate() {
            let hues: Vec<f64> = (0..ds.len())
                .filter(|&i| ds.label(i) == c)
                .map(|i| mean_hue(ds.patch(i)))
                .collect();
            *centre = 90.0 * c as f64;
            let var = hues
                .iter()
                .map(|&h| angular_diff(h, *centre).powi(2))
                .sum::<f64>()
                / hues.len() as f64;
            worst_spread = worst_spread.max(var.sqrt());
        }
        for a in 0..4 {
            for b in a + 1..4 {
                assert!(
                    angular_diff(centres[a], centres[b]) >= 4.0 * worst_spread,
                    "spread {worst_spread}"
                );
            }
        }
    }
}
