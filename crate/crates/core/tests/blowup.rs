//! Behaviour of the blowing-up families against closed-form data on balls.

use std::f64::consts::PI;

use pohozaev_core::blowup_constructor::*;
use pohozaev_core::domain_geometry::*;
use pohozaev_core::elliptic_core::*;
use pohozaev_core::green::*;
use pohozaev_core::jet::Jet;
use pohozaev_core::vec3::{self, Point};

fn balanced() -> TwoBubbleParams {
    balance_configuration(&CoefficientH::zero(), &Domain::unit_ball(), &BalanceOptions::default()).unwrap()
}

/// `G(x, y)` on the unit ball by images.
fn images(x: Point, y: Point) -> f64 {
    let nx = vec3::norm(x);
    let reg = if nx == 0.0 { -1.0 } else { -1.0 / (nx * vec3::dist(y, vec3::scale(x, 1.0 / (nx * nx)))) };
    1.0 / vec3::dist(x, y) + reg
}

#[test]
fn far_field_is_the_sum_of_two_bubbles() {
    let p = balanced().with_eps(1e-2).unwrap();
    let f = two_bubble_family(&p).unwrap();
    let u = |e: f64, g: f64| e.powf(-0.5) * (e * g) / (1.0 + e * e * g * g).sqrt();
    for y in [[0.0, 0.6, 0.0], [-0.5, -0.2, 0.3], [0.25, 0.0, 0.4]] {
        let expect = u(p.eps, images(p.x1, y)) + u(p.lambda * p.eps, images(p.x2, y));
        assert!((f.value(y) - expect).abs() < 1e-12 * expect);
    }
}

#[test]
fn value_at_the_first_centre_matches_the_closed_assembly() {
    let p = balanced().with_eps(1e-2).unwrap();
    let f = two_bubble_family(&p).unwrap();
    let (e, le) = (p.eps, p.lambda * p.eps);
    let g2 = images(p.x2, p.x1);
    // own bubble → ε^{-1/2}, V → 1, W → −21/4 with h = 0, Z → 0; the second bubble is outside its cutoff
    let expect = e.powf(-0.5) + p.gamma1 * e.sqrt() - 1.5 * p.gamma1 * p.gamma1 * e.powf(1.5)
        + le.powf(-0.5) * (le * g2) / (1.0 + le * le * g2 * g2).sqrt();
    assert!((f.value(p.x1) - expect).abs() < 1e-8);
    // and the limit is approached continuously
    let near = f.value(vec3::axpy(p.x1, 1e-9, [0.0, 0.0, 1.0]));
    assert!((near - expect).abs() < 1e-5 * expect);
}

#[test]
fn two_bubble_family_is_positive_on_a_dense_sample() {
    let d = Domain::unit_ball();
    for eps in [1e-2, 1e-3] {
        let p = balanced().with_eps(eps).unwrap();
        let f = two_bubble_family(&p).unwrap();
        let s = StratifiedSample::new(&d, &p, eps, 100_000, 0).unwrap();
        let n = s.norms(&f, &CoefficientH::zero());
        assert!(n.positive && n.min_u > 0.0, "ε = {eps}: min u = {}", n.min_u);
    }
}

#[test]
fn exact_piece_identities_hold() {
    let r = verify_piece_identities(&balanced(), 1e-2).unwrap();
    assert!(r.exact_residual("U").unwrap() < 1e-8);
    assert!(r.exact_residual("V_radial").unwrap() < 1e-6);
    assert!(r.exact_residual("U_tilde").unwrap() < 1e-8);
}

#[test]
fn psi_is_a_positive_fraction_away_from_the_core() {
    for eps in [1e-2f64, 1e-3, 1e-5] {
        for k in 0..200 {
            let s = 2.0 * eps * (1e3 / eps).powf(k as f64 / 199.0);
            let v = profile_psi(eps, Jet::constant(s)).v;
            assert!(v > 0.0 && v <= 1.0, "ψ_{eps}({s}) = {v}");
        }
    }
    // ψ_ε(s) → 1 as ε → 0 at fixed s
    let at = |eps: f64| profile_psi(eps, Jet::constant(0.3)).v;
    assert!(1.0 - at(1e-8) < 1.0 - at(1e-4) && 1.0 - at(1e-4) < 1.0 - at(1e-2));
}

#[test]
fn log_cutoff_ends() {
    let p = RadialFamilyParams::new(&CoefficientH::zero(), 1e-3, &GreenOptions::default()).unwrap();
    assert_eq!(p.eta_eps([0.0; 3]).v, 1.0);
    for r in [0.5, 0.6, 0.99] {
        assert_eq!(p.eta_eps([0.0, r, 0.0]).v, 0.0);
    }
}

#[test]
fn w_profile_limits() {
    assert!((profile_w_derivatives(1e-12).0 + PI).abs() < 1e-9);
    assert!((profile_w_derivatives(1e9).0 + 21.0 / 4.0).abs() < 1e-12);
    // agrees with the plain formula where that one is well conditioned
    for k in 0..60 {
        let s = 10f64.powf(-2.0 + 4.0 * k as f64 / 59.0);
        let u = s / (1.0 + s * s).sqrt();
        let plain = -13.0 / 4.0 * u + 8.0 * (2.0 * u.powi(3) - u) * u.ln() - 2.0 * (1.0 / u - 8.0 * u + 8.0 * u.powi(3)) * s * (1.0 / s).atan();
        let (w, _, _) = profile_w_derivatives(s);
        assert!((w - plain).abs() < 1e-11 * plain.abs(), "W({s}) = {w} vs {plain}");
    }
}

#[test]
fn balancing_is_invariant_under_dilation() {
    let base = balanced();
    let r1 = vec3::norm(base.x2);
    for radius in [0.5, 2.0, 3.0] {
        let d = Domain::ball(radius).unwrap();
        let p = balance_configuration(&CoefficientH::zero(), &d, &BalanceOptions::default()).unwrap();
        assert!((p.lambda - base.lambda).abs() < 1e-9, "R = {radius}: λ = {}", p.lambda);
        assert!((vec3::norm(p.x2) / radius - r1).abs() < 1e-9);
    }
}

#[test]
fn residual_of_an_exact_solution_is_its_potential() {
    let h = CoefficientH::Constant(-PI * PI / 2.0);
    let RadialSearch::Found { profile, .. } = find_radial_solution(&h, &SearchOptions::default()).unwrap() else {
        panic!("no radial solution")
    };
    // the shooting solution solves Δu + hu = u⁵, so 3^{-1/4}u has residual potential h
    let c = 3f64.powf(-0.25);
    let scale = |v: &[f64]| v.iter().map(|x| x * c).collect::<Vec<_>>();
    let scaled = ScalarFieldRadial::from_samples(profile.grid.clone(), scale(&profile.values), scale(&profile.derivs));
    let n = residual_potential_fd(&scaled, &h).unwrap();
    assert!(n.positive);
    assert!(n.l3_norm < 1e-3, "L³ deviation {}", n.l3_norm);
}

#[test]
fn radial_family_positive_and_sweep_decreasing() {
    let s = instability_sweep(SweepMode::Radial, &CoefficientH::Constant(1.0), &Domain::unit_ball(), &[1e-2, 1e-3], &SweepOptions::default()).unwrap();
    assert!(s.positivity_ok() && s.l3_strictly_decreasing());
    assert!(s.to_csv().starts_with("eps,l3_norm,linf_norm,min_u,balance_residual_1,balance_residual_2\n"));
}

#[test]
fn invalid_inputs_are_rejected() {
    let d = Domain::unit_ball();
    assert!(matches!(
        instability_sweep(SweepMode::Radial, &CoefficientH::zero(), &d, &[1e-3, 1e-2], &SweepOptions::default()),
        Err(ConstructionError::Input(_))
    ));
    assert!(Cutoff::new(0.5, 0.25).is_err());
    let opts = BalanceOptions { candidates: vec![[0.0; 3]], ..BalanceOptions::default() };
    // a positive mass at every candidate leaves nothing to balance
    let r = balance_configuration(&CoefficientH::Constant(-PI * PI / 2.0 + 1.0), &d, &opts);
    assert!(matches!(r, Err(ConstructionError::NoNegativeMass(1))), "{r:?}");
}
