//! Property tests for invariants that hold for every admissible input.

use proptest::prelude::*;

use pohozaev_core::blowup_constructor::*;
use pohozaev_core::bubble_analysis::*;
use pohozaev_core::domain_geometry::*;
use pohozaev_core::elliptic_core::*;
use pohozaev_core::green::*;
use pohozaev_core::jet::Jet;
use pohozaev_core::pohozaev::*;
use pohozaev_core::vec3::{self, Point};

fn interior_point(max_r: f64) -> impl Strategy<Value = Point> {
    (0.0..max_r, -1.0f64..1.0, 0.0..std::f64::consts::TAU).prop_map(|(r, z, phi)| {
        let s = (1.0 - z * z).sqrt();
        [r * s * phi.cos(), r * s * phi.sin(), r * z]
    })
}

fn seeded(s: f64) -> Jet {
    Jet::new(s, [1.0, 0.0, 0.0], 0.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// `U′ = s⁻³U³` and `U″ = −3s⁻⁴U⁵` for the radial profile `U(s) = s(1 + s²)^{-1/2}`.
    #[test]
    fn profile_u_derivatives(s in 1e-3f64..1e3) {
        let u = profile_u(seeded(s));
        let d2 = -u.lap;
        prop_assert!((u.g[0] - u.v.powi(3) / s.powi(3)).abs() <= 1e-12 * u.g[0].abs());
        prop_assert!((d2 + 3.0 * u.v.powi(5) / s.powi(4)).abs() <= 1e-11 * d2.abs());
    }

    /// `V = 1 − U′` exactly, computed without cancellation.
    #[test]
    fn profile_v_complements_u_prime(s in 1e-4f64..1e4) {
        let v = profile_v(seeded(s)).v;
        let up = profile_u_prime(seeded(s)).v;
        prop_assert!((v + up - 1.0).abs() < 1e-15);
        prop_assert!(v > 0.0 && v < 1.0);
    }

    /// The cutoff takes values in `[0, 1]` and does not increase with the radius.
    #[test]
    fn cutoff_is_monotone(inner in 0.05f64..0.4, width in 0.05f64..0.4, r in 0.0f64..1.0, dr in 0.0f64..0.1) {
        let c = Cutoff::new(inner, inner + width).unwrap();
        let (a, b) = (c.value(r), c.value(r + dr));
        prop_assert!((0.0..=1.0).contains(&a) && b <= a + 1e-15);
    }

    /// Critical scaling: `μ^{-1/2}U((x − c)/μ)` is the bubble of height `μ^{-1/2}`.
    #[test]
    fn bubble_scaling(mu in 1e-3f64..10.0, p in interior_point(3.0), c in interior_point(1.0)) {
        let scaled = vec3::scale(vec3::sub(p, c), 1.0 / mu);
        let lhs = standard_bubble(p, c, mu);
        let rhs = mu.powf(-0.5) * standard_bubble(scaled, [0.0; 3], 1.0);
        prop_assert!((lhs - rhs).abs() <= 1e-13 * lhs);
        let j = standard_bubble_jet(p, c, mu);
        prop_assert!((j.lap - j.v.powi(5)).abs() <= 1e-10 * j.v.powi(5));
    }

    /// The closed-form Green function is symmetric and vanishes on the sphere.
    #[test]
    fn images_green_symmetry(x in interior_point(0.9), y in interior_point(0.9), w in interior_point(1.0)) {
        prop_assume!(vec3::dist(x, y) > 1e-3 && vec3::norm(w) > 1e-3);
        let gx = GreenField::images(x, 1.0).unwrap();
        let gy = GreenField::images(y, 1.0).unwrap();
        let (a, b) = (gx.value(y), gy.value(x));
        prop_assert!((a - b).abs() <= 1e-12 * a.abs());
        prop_assert!(gx.value(vec3::normalize(w)).abs() < 1e-10);
        let (m, _) = gx.regular(x);
        prop_assert!((m + 1.0 / (1.0 - vec3::norm2(x))).abs() < 1e-12 * m.abs());
    }

    /// Converting an expansion between normalizations and back is the identity.
    #[test]
    fn normalization_round_trip(m in -10.0f64..0.0, g in interior_point(5.0)) {
        let e = GreenExpansion {
            source: [0.0; 3],
            mass: m,
            grad_regular: g,
            h_at_source: 0.0,
            normalization: Normalization::Scaled,
            fit_residual: 0.0,
            shell_residuals: Vec::new(),
        };
        let back = e.convert(Normalization::Unit).convert(Normalization::Scaled);
        prop_assert!((back.mass - m).abs() <= 1e-15 * m.abs());
        prop_assert!(vec3::dist(back.grad_regular, g) <= 1e-15 * vec3::norm(g).max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    /// The translation identity holds for bubbles in any ball, since they solve `ΔU = U⁵`.
    #[test]
    fn bubble_satisfies_translation_identity(mu in 0.2f64..2.0, radius in 0.5f64..2.0) {
        let d = Domain::ball(radius).unwrap();
        let f = AnalyticField {
            f: move |p: Point| standard_bubble(p, [0.0; 3], mu),
            grad: move |p: Point| standard_bubble_jet(p, [0.0; 3], mu).g,
        };
        let r = evaluate_identity_p1(&f, &CoefficientH::zero(), &d, &IdentityOptions::default());
        prop_assert!((r.lhs - r.rhs).abs() <= 1e-7 * (r.boundary_b1.abs() + r.boundary_b2.abs()));
    }

    /// With `h ≡ 0` the Green–Pohožaev sum is negative for every configuration.
    #[test]
    fn green_pohozaev_sum_is_negative(
        pts in proptest::collection::vec(interior_point(0.85), 1..=3),
        w in proptest::collection::vec(0.01f64..1.0, 3),
    ) {
        for i in 0..pts.len() {
            for j in 0..i {
                prop_assume!(vec3::dist(pts[i], pts[j]) > 0.05);
            }
        }
        let d = Domain::unit_ball();
        let weights = w[..pts.len()].to_vec();
        let config = BubbleConfiguration::new(pts.clone(), weights, &d).unwrap();
        let fields: Vec<GreenField> = pts.iter().map(|&x| GreenField::images(x, 1.0).unwrap()).collect();
        let e = combined_expansions(&config, &fields, &d, &FitOptions::default()).unwrap();
        prop_assert!(green_pohozaev_sum(&config, &e).unwrap() < 0.0);
    }

    /// `3u⁵ − Δu = h̃u` holds pointwise by construction, and the radial family is positive.
    #[test]
    fn radial_family_residual_is_consistent(log_eps in -4.0f64..-1.5, r in 1e-4f64..0.999) {
        let eps = 10f64.powf(log_eps);
        let p = RadialFamilyParams::new(&CoefficientH::zero(), eps, &GreenOptions::default()).unwrap();
        let x = [r, 0.0, 0.0];
        let s = residual_at(&p, &CoefficientH::zero(), x);
        let j = p.jet(x);
        prop_assert!(s.u > 0.0);
        prop_assert!((3.0 * j.v.powi(5) - j.lap - s.h_tilde * j.v).abs() <= 1e-12 * (3.0 * j.v.powi(5)).abs().max(j.lap.abs()));
    }

    /// Extraction is a deterministic function of the sampled field.
    #[test]
    fn extraction_is_deterministic(c in interior_point(0.5), mu in 5e-3f64..2e-2) {
        let d = Domain::unit_ball();
        let u = move |p: Point| standard_bubble(p, c, mu);
        let opts = ExtractionOptions { spacing: 1.0 / 32.0, ..ExtractionOptions::default() };
        let a = extract_concentration_points(&u, &d, &opts).unwrap();
        let b = extract_concentration_points(&u, &d, &opts).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert!(a.separation_holds(&d));
    }
}
