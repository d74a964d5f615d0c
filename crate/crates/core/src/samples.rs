//! Manufactured densities and maps with known properties, used by tests, the
//! command-line tool and the collar experiment.

use crate::domain_geom::Domain;
use crate::error::Result;
use crate::field_core::{Fill, ScalarField};
use crate::flow_transport::{GridMap, Interp};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

/// `exp(−1/(1−t²))` on `|t| < 1`, 0 elsewhere.
pub fn bump(t: f64) -> f64 {
    if t.abs() < 1.0 {
        (-1.0 / (1.0 - t * t)).exp()
    } else {
        0.0
    }
}

/// Derivative of [`bump`].
pub fn bump_derivative(t: f64) -> f64 {
    if t.abs() < 1.0 {
        let s = 1.0 - t * t;
        -2.0 * t / (s * s) * bump(t)
    } else {
        0.0
    }
}

/// Zero-mean radial profile on the plane supported in `ρ < radius`:
/// `B(ρ/R) − 4 B(2ρ/R)`, scaled to the value −1 at the centre.
pub fn radial_zero_mean(rho: f64, radius: f64) -> f64 {
    let t = rho / radius;
    (bump(t) - 4.0 * bump(2.0 * t)) / (3.0 * (-1.0f64).exp())
}

/// Single-scale zero-mean radial profile on the plane supported in
/// `ρ < radius`: `B(t)(1 − c t²)` with `t = ρ/R`, scaled to 1 at the centre.
pub fn radial_smooth(rho: f64, radius: f64) -> f64 {
    // ∫ B t dt / ∫ B t³ dt over [0, 1]
    const C: f64 = 3.826_854_673_316_793;
    let t = rho / radius;
    bump(t) * (1.0 - C * t * t) / (-1.0f64).exp()
}

/// Zero-mean even profile on the line supported in `|x − c| < radius`:
/// `B(t) − 2 B(2t)`, scaled to −1 at the centre.
pub fn even_zero_mean(x: f64, center: f64, radius: f64) -> f64 {
    let t = (x - center) / radius;
    (bump(t) - 2.0 * bump(2.0 * t)) / (-1.0f64).exp()
}

/// Odd profile `t B(t)` on the line, scaled to a maximum of 1.
pub fn odd_zero_mean(x: f64, center: f64, radius: f64) -> f64 {
    const PEAK: f64 = 0.132_059_281_855_560_93;
    let t = (x - center) / radius;
    t * bump(t) / PEAK
}

/// Zero-mean dipole on the plane supported in `ρ < radius`: the odd line
/// profile `t B(t)` along the first axis times the radial bump, scaled to a
/// maximum of 1. Its divergence-free complement does not vanish outside the
/// support, unlike a radial profile.
pub fn dipole(dx: f64, dy: f64, radius: f64) -> f64 {
    const PEAK: f64 = 0.132_059_281_855_560_93;
    dx / radius * bump(dx.hypot(dy) / radius) / PEAK
}

/// `1 + amplitude · radial_zero_mean(|x − center|, radius)`.
pub fn radial_density(
    domain: &Arc<Domain>,
    amplitude: f64,
    center: [f64; 2],
    radius: f64,
) -> ScalarField {
    ScalarField::from_fn(domain, Fill::One, |x, y| {
        let rho = (x - center[0]).hypot(y - center[1]);
        1.0 + amplitude * radial_zero_mean(rho, radius)
    })
}

/// `1 + amplitude · radial_smooth(|x − center|, radius)`.
pub fn smooth_density(
    domain: &Arc<Domain>,
    amplitude: f64,
    center: [f64; 2],
    radius: f64,
) -> ScalarField {
    ScalarField::from_fn(domain, Fill::One, |x, y| {
        let rho = (x - center[0]).hypot(y - center[1]);
        1.0 + amplitude * radial_smooth(rho, radius)
    })
}

/// The five interval fixtures on `[0, 1]`: (amplitude, density).
pub fn interval_fixtures(domain: &Arc<Domain>) -> Vec<(f64, ScalarField)> {
    let shapes: [(f64, Box<dyn Fn(f64) -> f64>); 5] = [
        (0.05, Box::new(|x| even_zero_mean(x, 0.5, 0.2))),
        (0.1, Box::new(|x| odd_zero_mean(x, 0.45, 0.15))),
        (0.2, Box::new(|x| even_zero_mean(x, 0.4, 0.15))),
        (0.3, Box::new(|x| even_zero_mean(x, 0.5, 0.2))),
        (
            0.5,
            Box::new(|x| 0.5 * even_zero_mean(x, 0.6, 0.15) + 0.5 * odd_zero_mean(x, 0.35, 0.1)),
        ),
    ];
    shapes
        .into_iter()
        .map(|(a, s)| (a, ScalarField::from_fn(domain, Fill::One, move |x, _| 1.0 + a * s(x))))
        .collect()
}

/// Sum of `terms` zero-mean radial bumps with seeded centres, radii and
/// signs, all supported in `|x| < support`, scaled to `max |f − 1| =
/// amplitude` over the nodes.
pub fn seeded_density(
    domain: &Arc<Domain>,
    seed: u64,
    amplitude: f64,
    terms: usize,
    support: f64,
) -> ScalarField {
    seeded_density_at(domain, seed, amplitude, terms, [0.0, 0.0], support)
}

/// [`seeded_density`] with the bumps supported in `|x − center| < support`.
pub fn seeded_density_at(
    domain: &Arc<Domain>,
    seed: u64,
    amplitude: f64,
    terms: usize,
    center: [f64; 2],
    support: f64,
) -> ScalarField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let parts: Vec<([f64; 2], f64, f64)> = (0..terms)
        .map(|_| {
            let radius = support * rng.gen_range(0.35..0.6);
            let reach = support - radius;
            let (c, s) = rng.gen_range(0.0..std::f64::consts::TAU).sin_cos();
            let r = reach * rng.gen_range(0.0f64..1.0).sqrt();
            let weight = if rng.gen_bool(0.5) { 1.0 } else { -1.0 } * rng.gen_range(0.5..1.0);
            ([center[0] + r * c, center[1] + r * s], radius, weight)
        })
        .collect();
    let excess = ScalarField::from_fn(domain, Fill::Zero, |x, y| {
        parts
            .iter()
            .map(|&(c, radius, w)| w * radial_zero_mean((x - c[0]).hypot(y - c[1]), radius))
            .sum()
    });
    let scale = excess.max_abs();
    let a = if scale > 0.0 { amplitude / scale } else { 0.0 };
    excess.map(Fill::One, |v| 1.0 + a * v)
}

/// Sum of `terms` even and odd line profiles with seeded centres, radii,
/// signs and parities, all supported in `|x − center| < support`, scaled to
/// `max |f − 1| = amplitude` over the nodes.
pub fn seeded_interval_density(
    domain: &Arc<Domain>,
    seed: u64,
    amplitude: f64,
    terms: usize,
    center: f64,
    support: f64,
) -> ScalarField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let parts: Vec<(f64, f64, f64, bool)> = (0..terms)
        .map(|_| {
            let radius = support * rng.gen_range(0.35..0.6);
            let c = center + (support - radius) * rng.gen_range(-1.0..1.0);
            let weight = if rng.gen_bool(0.5) { 1.0 } else { -1.0 } * rng.gen_range(0.5..1.0);
            (c, radius, weight, rng.gen_bool(0.5))
        })
        .collect();
    let excess = ScalarField::from_fn(domain, Fill::Zero, |x, _| {
        parts
            .iter()
            .map(|&(c, radius, w, odd)| {
                let p = if odd {
                    odd_zero_mean(x, c, radius)
                } else {
                    even_zero_mean(x, c, radius)
                };
                w * p
            })
            .sum()
    });
    let scale = excess.max_abs();
    let a = if scale > 0.0 { amplitude / scale } else { 0.0 };
    excess.map(Fill::One, |v| 1.0 + a * v)
}

/// Radial squeeze `x ↦ x (1 + a B(|x|/R))` about the origin; the identity
/// outside `|x| < R`.
pub fn radial_squeeze(domain: &Arc<Domain>, amplitude: f64, radius: f64) -> Result<GridMap> {
    Ok(GridMap::from_fn(domain, Interp::Bicubic, |x, y| {
        let g = 1.0 + amplitude * bump(x.hypot(y) / radius);
        [x * g, y * g]
    }))
}

/// Analytic Jacobian determinant of [`radial_squeeze`]: `g (g + ρ g')`.
pub fn radial_squeeze_det(x: f64, y: f64, amplitude: f64, radius: f64) -> f64 {
    let rho = x.hypot(y);
    let g = 1.0 + amplitude * bump(rho / radius);
    let dg = amplitude * bump_derivative(rho / radius) / radius;
    g * (g + rho * dg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(a + i as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn profiles_have_zero_mean() {
        let radial = simpson(|r| r * radial_zero_mean(r, 0.4), 0.0, 0.4, 4000);
        assert!(radial.abs() < 1e-12, "{radial}");
        let smooth = simpson(|r| r * radial_smooth(r, 0.7), 0.0, 0.7, 4000);
        assert!(smooth.abs() < 1e-12, "{smooth}");
        let even = simpson(|x| even_zero_mean(x, 0.5, 0.2), 0.3, 0.7, 4000);
        assert!(even.abs() < 1e-12, "{even}");
        let odd = simpson(|x| odd_zero_mean(x, 0.5, 0.2), 0.3, 0.7, 4000);
        assert!(odd.abs() < 1e-12, "{odd}");
    }

    #[test]
    fn profile_scales() {
        assert!((radial_zero_mean(0.0, 1.0) + 1.0).abs() < 1e-15);
        assert!((even_zero_mean(0.5, 0.5, 1.0) + 1.0).abs() < 1e-15);
        let peak = (0..10_000)
            .map(|i| odd_zero_mean(i as f64 / 10_000.0, 0.0, 1.0))
            .fold(0.0, f64::max);
        assert!((peak - 1.0).abs() < 1e-6, "{peak}");
    }

    #[test]
    fn squeeze_det_matches_difference_quotient() {
        let (a, r) = (0.2, 0.5);
        let map = |x: f64, y: f64| {
            let g = 1.0 + a * bump(x.hypot(y) / r);
            [x * g, y * g]
        };
        let e = 1e-6;
        for &(x, y) in &[(0.1, 0.2), (-0.3, 0.05), (0.0, 0.0)] {
            let px = map(x + e, y);
            let mx = map(x - e, y);
            let py = map(x, y + e);
            let my = map(x, y - e);
            let j = [
                [(px[0] - mx[0]) / (2.0 * e), (py[0] - my[0]) / (2.0 * e)],
                [(px[1] - mx[1]) / (2.0 * e), (py[1] - my[1]) / (2.0 * e)],
            ];
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            assert!((det - radial_squeeze_det(x, y, a, r)).abs() < 1e-8);
        }
    }
}
