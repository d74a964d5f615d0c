use jacshape_core::div_solver::{
    extend_primitive, solve_div_basic, solve_div_collar, solve_div_collar_detailed, solve_neumann,
    stream_primitive, StreamPrimitive,
};
use jacshape_core::domain_geom::{build_domain, collar, CollarSpec, Domain, ShapeSpec};
use jacshape_core::field_core::{
    divergence, holder_norm, holder_norm_vector, integrate, rotated_gradient, Fill, ScalarField,
    VectorField,
};
use jacshape_core::samples::{radial_smooth, radial_zero_mean, seeded_density};
use jacshape_core::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::sync::Arc;

fn disk(n: usize) -> Arc<Domain> {
    build_domain(&ShapeSpec::unit_disk(), n).unwrap()
}

fn square(n: usize) -> Arc<Domain> {
    build_domain(&ShapeSpec::unit_square(), n).unwrap()
}

/// Zero-mean radial datum supported in `|x| < radius`.
fn radial_datum(d: &Arc<Domain>, radius: f64) -> ScalarField {
    ScalarField::from_fn(d, Fill::Zero, |x, y| radial_zero_mean(x.hypot(y), radius))
}

/// In-mask nodes whose whole 3×3 neighbourhood is in-mask and off the band,
/// at distance more than `margin` beyond the collar.
fn deep_interior(c: &CollarSpec, margin: f64) -> Vec<usize> {
    let d = &c.domain;
    (0..d.len())
        .filter(|&k| d.mask[k] && d.sdist[k] < -c.epsilon - margin)
        .collect()
}

#[test]
fn neumann_zero_datum_gives_zero_potential() {
    let sol = solve_neumann(&ScalarField::zeros(&disk(32))).unwrap();
    assert_eq!(sol.potential.max_abs(), 0.0);
    let u = solve_div_basic(&ScalarField::zeros(&disk(32))).unwrap();
    assert_eq!(u.max_norm(), 0.0);
}

#[test]
fn neumann_cosine_on_the_square() {
    let err = |n: usize| {
        let d = square(n);
        let h = ScalarField::from_fn(&d, Fill::Zero, |x, _| (PI * x).cos());
        let sol = solve_neumann(&h).unwrap();
        assert!(integrate(&sol.potential).abs() < 1e-10);
        d.inside_nodes()
            .into_iter()
            .map(|k| {
                let x = d.grid.point(k)[0];
                (sol.potential.values[k] + (PI * x).cos() / (PI * PI)).abs()
            })
            .fold(0.0, f64::max)
    };
    let (coarse, fine) = (err(32), err(64));
    assert!(coarse < 1e-3, "{coarse}");
    assert!(coarse / fine > 3.5, "{coarse} {fine}");
}

#[test]
fn neumann_residual_is_second_order() {
    let err = |n: usize| {
        let d = disk(n);
        let h = ScalarField::from_fn(&d, Fill::Zero, |x, y| {
            radial_smooth((x - 0.2).hypot(y), 0.6) - 0.7 * radial_smooth(x.hypot(y + 0.3), 0.5)
        });
        let u = solve_div_basic(&h).unwrap();
        let div = divergence(&u).unwrap();
        let mean = d.inside_nodes().iter().map(|&k| h.values[k]).sum::<f64>()
            / d.inside_nodes().len() as f64;
        d.inside_nodes()
            .into_iter()
            .filter(|&k| d.sdist[k] < -0.1)
            .map(|k| (div.values[k] - h.values[k] + mean).abs())
            .fold(0.0, f64::max)
    };
    let (a, b) = (err(64), err(128));
    assert!(a / b > 3.5, "{a} {b}");
}

#[test]
fn neumann_rejects_a_large_mean() {
    let d = disk(32);
    assert!(matches!(
        solve_neumann(&ScalarField::ones(&d)),
        Err(Error::InconsistentDatum { .. })
    ));
}

#[test]
fn basic_solution_on_the_interval_is_the_running_integral() {
    let d = build_domain(&ShapeSpec::unit_interval(), 200).unwrap();
    let h = ScalarField::from_fn(&d, Fill::Zero, |x, _| (2.0 * PI * x).sin());
    let u = solve_div_basic(&h).unwrap();
    let hg = d.h();
    let inside = d.inside_nodes();
    let mean = inside.iter().map(|&k| h.values[k]).sum::<f64>() / inside.len() as f64;
    // face flux to the right of node k is h·Σ_{j ≤ k} (h_j − mean)
    let mut face = 0.0;
    let mut prev = 0.0;
    for &k in &inside {
        face += hg * (h.values[k] - mean);
        let oracle = 0.5 * (prev + face);
        assert!((u.comps[0][k] - oracle).abs() < 1e-10, "node {k}");
        prev = face;
    }
}

#[test]
fn flux_through_a_contour_equals_enclosed_datum() {
    let d = disk(64);
    let g = &d.grid;
    let h = radial_datum(&d, 0.3).map(Fill::Zero, |v| v + 0.0);
    let shifted = ScalarField::from_fn(&d, Fill::Zero, |x, y| {
        radial_zero_mean((x - 0.2).hypot(y + 0.1), 0.3)
    });
    let h = h.zip_map(&shifted, Fill::Zero, |a, b| a + 2.0 * b).unwrap();
    let u = solve_div_basic(&h).unwrap();
    let inside = d.inside_nodes();
    let mean = inside.iter().map(|&k| h.values[k]).sum::<f64>() / inside.len() as f64;
    let hg = g.h;
    for half in [0.55, 0.7] {
        let inside_box = |k: usize| {
            let p = g.point(k);
            p[0].abs() < half && p[1].abs() < half
        };
        let mut flux = 0.0;
        for k in 0..d.len() {
            if !inside_box(k) {
                continue;
            }
            for axis in 0..2 {
                for dir in [-1isize, 1] {
                    let q = g.neighbor(k, axis, dir).unwrap();
                    if !inside_box(q) {
                        flux += dir as f64 * hg * 0.5 * (u.comps[axis][k] + u.comps[axis][q]);
                    }
                }
            }
        }
        let enclosed: f64 = (0..d.len())
            .filter(|&k| inside_box(k))
            .map(|k| hg * hg * (h.values[k] - mean))
            .sum();
        let ring: f64 = (0..d.len())
            .filter(|&k| inside_box(k) && g.neighbors(k).any(|q| !inside_box(q)))
            .count() as f64;
        // the node-averaged flux differs from the face flux by O(mean h²) per contour node
        let slack = 1e-6 + 4.0 * ring * hg * hg * mean.abs();
        assert!((flux - enclosed).abs() < slack, "{flux} {enclosed}");
    }
}

#[test]
fn stream_primitive_of_zero_is_zero() {
    let d = disk(32);
    let c = collar(&d, 0.2).unwrap();
    let gp = stream_primitive(&VectorField::zeros(&d), &c).unwrap();
    assert_eq!(gp.gamma.max_abs(), 0.0);
}

#[test]
fn stream_primitive_recovers_a_known_stream_function() {
    for n in [32, 64] {
        let d = disk(n);
        let c = collar(&d, 0.2).unwrap();
        // rotated gradient of x² − y²
        let u0 = VectorField::from_fn(&d, |x, y| [-2.0 * y, -2.0 * x]);
        let gp = stream_primitive(&u0, &c).unwrap();
        let exact = |k: usize| {
            let p = d.grid.point(k);
            p[0] * p[0] - p[1] * p[1]
        };
        let shift = exact(gp.base_node) - gp.gamma.values[gp.base_node];
        let worst = c
            .band_nodes()
            .into_iter()
            .map(|k| (gp.gamma.values[k] + shift - exact(k)).abs())
            .fold(0.0, f64::max);
        assert!(worst < 10.0 * d.h() * d.h(), "{n}: {worst}");
    }
}

#[test]
fn net_flux_around_the_annulus_is_rejected() {
    let d = disk(48);
    let c = collar(&d, 0.2).unwrap();
    // divergence free on the band with flux 2π through every loop
    let u0 = VectorField::from_fn(&d, |x, y| {
        let r2 = x * x + y * y;
        [x / r2, y / r2]
    });
    assert!(matches!(stream_primitive(&u0, &c), Err(Error::NonzeroPeriod { .. })));
}

#[test]
fn constant_band_data_extend_to_a_constant() {
    let d = disk(32);
    let c = collar(&d, 0.2).unwrap();
    let gamma = ScalarField::from_fn(&d, Fill::Zero, |_, _| 0.0);
    let values = (0..d.len()).map(|k| if c.band[k] { 1.5 } else { gamma.values[k] }).collect();
    let gp = StreamPrimitive {
        gamma: ScalarField::from_values(&d, values, Fill::Zero).unwrap(),
        base_node: c.band_nodes()[0],
        closedness_residual: 0.0,
        band: c.band.clone(),
    };
    let ext = extend_primitive(&gp).unwrap();
    for k in d.inside_nodes() {
        assert!((ext.values[k] - 1.5).abs() < 1e-8, "{}", ext.values[k]);
    }
}

#[test]
fn extension_keeps_band_values_bit_exact() {
    let d = disk(48);
    let c = collar(&d, 0.2).unwrap();
    let u0 = VectorField::from_fn(&d, |x, y| [-2.0 * y, -2.0 * x]);
    let gp = stream_primitive(&u0, &c).unwrap();
    let ext = extend_primitive(&gp).unwrap();
    for k in c.band_nodes() {
        assert_eq!(ext.values[k], gp.gamma.values[k]);
    }
}

#[test]
fn correction_field_is_divergence_free() {
    let d = disk(48);
    let c = collar(&d, 0.2).unwrap();
    let u0 = VectorField::from_fn(&d, |x, y| [-2.0 * y + x * x, -2.0 * x - 2.0 * x * y]);
    let gp = stream_primitive(&u0, &c).unwrap();
    let ext = extend_primitive(&gp).unwrap();
    let div = divergence(&rotated_gradient(&ext).unwrap()).unwrap();
    let worst = d
        .inside_nodes()
        .into_iter()
        .filter(|&k| {
            let g = &d.grid;
            g.neighbors(k).all(|q| d.mask[q] && g.neighbors(q).all(|r| d.mask[r]))
        })
        .map(|k| div.values[k].abs())
        .fold(0.0, f64::max);
    assert!(worst < 1e-10, "{worst}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn extension_obeys_the_maximum_principle(seed in any::<u64>()) {
        let d = disk(24);
        let c = collar(&d, 0.25).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values: Vec<f64> = (0..d.len())
            .map(|k| if c.band[k] { rng.gen_range(-1.0..1.0) } else { 0.0 })
            .collect();
        let gp = StreamPrimitive {
            gamma: ScalarField::from_values(&d, values.clone(), Fill::Zero).unwrap(),
            base_node: c.band_nodes()[0],
            closedness_residual: 0.0,
            band: c.band.clone(),
        };
        let ext = extend_primitive(&gp).unwrap();
        let band = c.band_nodes();
        let lo = band.iter().map(|&k| values[k]).fold(f64::INFINITY, f64::min);
        let hi = band.iter().map(|&k| values[k]).fold(f64::NEG_INFINITY, f64::max);
        for k in d.inside_nodes() {
            prop_assert!(ext.values[k] >= lo - 1e-9 && ext.values[k] <= hi + 1e-9);
        }
    }

    #[test]
    fn collar_solve_is_linear(seed in 0u64..1000) {
        let d = disk(32);
        let c = collar(&d, 0.15).unwrap();
        let excess = |s: u64| seeded_density(&d, s, 0.3, 3, 0.6).map(Fill::Zero, |v| v - 1.0);
        let (h1, h2) = (excess(seed), excess(seed + 1000));
        let sum = h1.zip_map(&h2, Fill::Zero, |a, b| a + b).unwrap();
        let u1 = solve_div_collar(&h1, &c).unwrap();
        let u2 = solve_div_collar(&h2, &c).unwrap();
        let u = solve_div_collar(&sum, &c).unwrap();
        let combined = u1.axpy(1.0, &u2).unwrap();
        let diff = u.axpy(-1.0, &combined).unwrap().max_norm();
        prop_assert!(diff <= 1e-8 * u.max_norm().max(1e-300), "{diff}");
    }
}

#[test]
fn collar_solve_of_zero_is_zero() {
    let d = disk(32);
    let c = collar(&d, 0.15).unwrap();
    assert_eq!(solve_div_collar(&ScalarField::zeros(&d), &c).unwrap().max_norm(), 0.0);
}

#[test]
fn collar_solve_rejects_band_datum() {
    let d = disk(32);
    let c = collar(&d, 0.15).unwrap();
    let h = ScalarField::from_fn(&d, Fill::Zero, |x, y| radial_zero_mean(x.hypot(y), 1.5));
    assert!(matches!(solve_div_collar(&h, &c), Err(Error::Precondition(_))));
}

#[test]
fn collar_solve_vanishes_on_the_band_and_converges_inside() {
    let mut scaled = Vec::new();
    for n in [32, 64, 128] {
        let d = disk(n);
        let c = collar(&d, 0.15).unwrap();
        let h = radial_datum(&d, 0.5);
        let sol = solve_div_collar_detailed(&h, &c).unwrap();
        let hg = d.h();
        let band = sol.u.max_norm_on(&c.band);
        let tol_support = (10.0 * sol.closedness_residual).max(hg * hg);
        assert!(band <= tol_support, "{n}: band {band}");
        let div = divergence(&sol.u).unwrap();
        let err = deep_interior(&c, 0.1)
            .into_iter()
            .map(|k| (div.values[k] - h.values[k]).abs())
            .fold(0.0, f64::max);
        scaled.push(err / (hg * hg));
    }
    for w in scaled.windows(2) {
        assert!(w[1] <= 1.5 * w[0] && w[1] >= w[0] / 4.0, "{scaled:?}");
    }
}

#[test]
fn collar_solve_on_the_interval_converges_to_the_running_integral() {
    use jacshape_core::samples::even_zero_mean;
    let err = |n: usize| {
        let d = build_domain(&ShapeSpec::unit_interval(), n).unwrap();
        let c = collar(&d, 0.1).unwrap();
        let h = ScalarField::from_fn(&d, Fill::Zero, |x, _| even_zero_mean(x, 0.5, 0.3));
        let u = solve_div_collar(&h, &c).unwrap();
        assert!(c.band_nodes().iter().all(|&k| u.comps[0][k].abs() < 1e-6));
        // midpoint rule on a much finer grid
        let fine = 2000;
        let step = d.h() / fine as f64;
        let mut acc = 0.0;
        let mut worst = 0.0f64;
        for (i, k) in d.inside_nodes().into_iter().enumerate() {
            let left = d.grid.point(k)[0] - d.h();
            if i > 0 {
                acc += (0..fine)
                    .map(|j| step * even_zero_mean(left + (j as f64 + 0.5) * step, 0.5, 0.3))
                    .sum::<f64>();
            } else {
                assert!(left.abs() < 1e-12);
            }
            worst = worst.max((u.comps[0][k] - acc).abs());
        }
        worst
    };
    let (a, b) = (err(200), err(400));
    assert!(b < 1e-6, "{b}");
    assert!(a / b > 8.0, "{a} {b}");
}

#[test]
fn norm_ratio_is_stable_under_refinement() {
    let ratio = |n: usize| {
        let d = disk(n);
        let c = collar(&d, 0.15).unwrap();
        let h = radial_datum(&d, 0.5);
        let u = solve_div_collar(&h, &c).unwrap();
        holder_norm_vector(&u, 1, 0.5).unwrap().value / holder_norm(&h, 0, 0.5).unwrap().value
    };
    let (a, b) = (ratio(48), ratio(96));
    assert!((b / a - 1.0).abs() <= 0.2, "{a} {b}");
}

#[test]
fn multiply_connected_domain_is_unsupported() {
    let n = 40;
    let inside = (0..n * n)
        .map(|k| {
            let (i, j) = (k % n, k / n);
            let outer = (2..38).contains(&i) && (2..38).contains(&j);
            let hole = (17..23).contains(&i) && (17..23).contains(&j);
            outer && !hole
        })
        .collect();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ring.pgm");
    jacshape_core::domain_geom::raster::Raster::new(n, n, inside)
        .unwrap()
        .write_pgm(&path)
        .unwrap();
    let d = build_domain(&ShapeSpec::MaskFile { path }, 40).unwrap();
    let c = collar(&d, 0.05).unwrap();
    assert!(matches!(
        solve_div_collar(&ScalarField::zeros(&d), &c),
        Err(Error::UnsupportedTopology { components: 2 })
    ));
}
