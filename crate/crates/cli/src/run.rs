//! Scenario execution: each function computes, writes its tables, and notes scalars
//! for the manifest.

use pohozaev_core::blowup_constructor::{
    balance_configuration, instability_sweep, radial_residual_nodes, residual_at, residual_potential_radial,
    two_bubble_family, verify_piece_identities, BalanceOptions, RadialFamilyParams, StratifiedSample, SweepMode,
    SweepOptions,
};
use pohozaev_core::bubble_analysis::{
    extract_concentration_points, standard_bubble, standard_bubble_jet, BubbleConfiguration, ExtractionOptions,
};
use pohozaev_core::domain_geometry::Domain;
use pohozaev_core::elliptic_core::{find_radial_solution, CoefficientH, RadialSearch, SearchOptions, ShootOptions};
use pohozaev_core::green::{extract_expansion, solve_green, FitOptions, GreenField, GreenOptions};
use pohozaev_core::pohozaev::{
    check_structural_condition, combined_expansions, evaluate_identity_p1, evaluate_identity_p2, evaluate_identity_p3,
    evaluate_identity_p4, green_pohozaev_sum, AnalyticField, IdentityOptions, PohozaevField, StructuralOptions,
};
use pohozaev_core::vec3::Point;

use crate::config::{FieldKind, Mode, RunConfig, Scenario};
use crate::output::{csv, OutputDir};
use crate::CliError;

fn numeric(e: impl std::fmt::Display) -> CliError {
    CliError::Numeric(e.to_string())
}

fn green_options(cfg: &RunConfig) -> GreenOptions {
    let mut o = GreenOptions::default();
    o.solver.spacing = cfg.grid.spacing;
    o.solver.tolerance = cfg.tolerances.solver;
    o
}

fn fit_options(cfg: &RunConfig) -> FitOptions {
    FitOptions { relative_tolerance: cfg.tolerances.fit, ..FitOptions::default() }
}

fn search_options(cfg: &RunConfig) -> SearchOptions {
    SearchOptions { shoot: ShootOptions::uniform(cfg.domain.radius, cfg.grid.radial_nodes), ..SearchOptions::default() }
}

/// Runs `scenario`, writing into `out`.
pub fn run(scenario: Scenario, cfg: &RunConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let domain = cfg.domain()?;
    let h = cfg.h.build();
    match scenario {
        Scenario::Green => green(cfg, &domain, &h, out),
        Scenario::Pohozaev => pohozaev(cfg, &domain, &h, out),
        Scenario::RadialSolve => radial_solve(cfg, &h, out),
        Scenario::Extract => extract(cfg, &domain, out),
        Scenario::ConstructRadial => construct_radial(cfg, &h, out),
        Scenario::ConstructTwoBubble => construct_two_bubble(cfg, &domain, &h, out),
        Scenario::Sweep => sweep(cfg, &domain, &h, out),
    }
}

fn green_field(h: &CoefficientH, x: Point, domain: &Domain, opts: &GreenOptions) -> Result<GreenField, CliError> {
    match (h.is_zero(), domain.ball_radius()) {
        (true, Some(r)) => GreenField::images(x, r).map_err(numeric),
        _ => solve_green(h, x, domain, opts).map_err(numeric),
    }
}

fn green(cfg: &RunConfig, domain: &Domain, h: &CoefficientH, out: &mut OutputDir) -> Result<(), CliError> {
    let opts = green_options(cfg);
    let fit = fit_options(cfg);
    let fields = out.timed("solve", || {
        cfg.green.sources.iter().map(|&x| green_field(h, x, domain, &opts)).collect::<Result<Vec<_>, _>>()
    })?;
    let expansions = out.timed("expand", || {
        fields.iter().map(|g| extract_expansion(g, h, domain, &fit)).collect::<Result<Vec<_>, _>>()
    });
    let expansions = expansions.map_err(numeric)?;
    let rows = expansions.iter().map(|e| {
        vec![e.source[0], e.source[1], e.source[2], e.mass, e.grad_regular[0], e.grad_regular[1], e.grad_regular[2], e.h_at_source, e.fit_residual]
    });
    out.write("green.csv", &csv("x,y,z,mass,grad_x,grad_y,grad_z,h_at_source,fit_residual", rows))?;
    if cfg.green.weights.is_empty() {
        return Ok(());
    }
    let config = BubbleConfiguration::new(cfg.green.sources.clone(), cfg.green.weights.clone(), domain).map_err(numeric)?;
    let combined = combined_expansions(&config, &fields, domain, &fit).map_err(numeric)?;
    let sum = green_pohozaev_sum(&config, &combined).map_err(numeric)?;
    let cert = check_structural_condition(h, domain, &StructuralOptions::default());
    out.note("green_pohozaev_sum", sum);
    out.note("structural_condition", cert.satisfied);
    if cert.satisfied && sum >= 0.0 {
        return Err(CliError::Assertion(format!("Green–Pohožaev sum {sum:e} is not negative under the structural condition")));
    }
    Ok(())
}

fn pohozaev(cfg: &RunConfig, domain: &Domain, h: &CoefficientH, out: &mut OutputDir) -> Result<(), CliError> {
    let opts = IdentityOptions::default();
    let mu = cfg.pohozaev.mu;
    let zero = AnalyticField { f: |_p: Point| 0.0, grad: |_p: Point| [0.0; 3] };
    let bubble = AnalyticField {
        f: move |p: Point| standard_bubble(p, [0.0; 3], mu),
        grad: move |p: Point| standard_bubble_jet(p, [0.0; 3], mu).g,
    };
    let solution;
    let field: &dyn PohozaevField = match cfg.pohozaev.field {
        FieldKind::Zero => &zero,
        FieldKind::Bubble => &bubble,
        FieldKind::RadialSolution => {
            let s = out.timed("shoot", || find_radial_solution(h, &search_options(cfg))).map_err(numeric)?;
            let RadialSearch::Found { profile, initial_height, .. } = s else {
                return Err(CliError::Numeric("no radial solution found for this h".into()));
            };
            out.note("initial_height", initial_height);
            solution = profile;
            &solution
        }
    };
    let mut rows = vec![out.timed("p1", || evaluate_identity_p1(field, h, domain, &opts)).csv_row()];
    // the Dirichlet identities need u = 0 on the boundary; a bubble does not vanish there
    match evaluate_identity_p2(field, h, domain, &opts) {
        Ok(r) => rows.push(r.csv_row()),
        Err(e) => out.note("p2_skipped", e.to_string()),
    }
    match out.timed("p3", || evaluate_identity_p3(field, h, domain, &opts)) {
        Ok(r) => {
            rows.push(r.csv_row());
            out.note("p3_obstruction", r.obstruction);
        }
        Err(e) => out.note("p3_skipped", e.to_string()),
    }
    let (p4, worst) = out.timed("p4", || evaluate_identity_p4(field, h, domain, &opts));
    rows.extend(p4.iter().map(|r| r.csv_row()));
    out.note("p4_worst_residual", worst);
    out.note("structural_condition", check_structural_condition(h, domain, &StructuralOptions::default()));
    let mut text = String::from("identity,lhs,rhs,residual\n");
    for r in rows {
        text.push_str(&r);
        text.push('\n');
    }
    out.write("pohozaev.csv", &text)
}

fn radial_solve(cfg: &RunConfig, h: &CoefficientH, out: &mut OutputDir) -> Result<(), CliError> {
    let s = out.timed("shoot", || find_radial_solution(h, &search_options(cfg))).map_err(numeric)?;
    let mut probes = String::from("a,endpoint_value,stayed_positive\n");
    for p in s.log() {
        probes.push_str(&format!("{:e},{:e},{}\n", p.a, p.endpoint_value, p.stayed_positive));
    }
    out.write("probes.csv", &probes)?;
    out.note("found", s.is_found());
    if let RadialSearch::Found { initial_height, profile, .. } = &s {
        out.note("initial_height", initial_height);
        let rows = profile.grid.nodes.iter().zip(&profile.values).zip(&profile.derivs).map(|((&r, &u), &d)| vec![r, u, d]);
        out.write("profile.csv", &csv("r,u,du", rows))?;
    }
    Ok(())
}

fn extract(cfg: &RunConfig, domain: &Domain, out: &mut OutputDir) -> Result<(), CliError> {
    let centers = cfg.extract.centers.clone();
    let mu = cfg.extract.mu;
    let u = move |p: Point| centers.iter().map(|&c| standard_bubble(p, c, mu)).sum::<f64>();
    let opts = ExtractionOptions { spacing: cfg.grid.spacing, threshold: cfg.extract.threshold, ..ExtractionOptions::default() };
    let r = out.timed("extract", || extract_concentration_points(&u, domain, &opts)).map_err(numeric)?;
    let rows = r.points.iter().zip(&r.heights).map(|(p, &v)| vec![p[0], p[1], p[2], v]);
    out.write("extract.csv", &csv("x,y,z,height", rows))?;
    out.note("points", r.points.len());
    out.note("candidates", r.candidates);
    out.note("separation_holds", r.separation_holds(domain));
    out.note("covering_margin", r.covering_margin);
    out.note("hypothesis_met", r.hypothesis_met);
    Ok(())
}

fn construct_radial(cfg: &RunConfig, h: &CoefficientH, out: &mut OutputDir) -> Result<(), CliError> {
    let eps = cfg.construct.eps.expect("validated");
    let p = out.timed("green", || RadialFamilyParams::new(h, eps, &green_options(cfg))).map_err(numeric)?;
    let nodes = radial_residual_nodes(eps);
    let norms = out.timed("residual", || residual_potential_radial(&p, h, &nodes)).map_err(numeric)?;
    let rows = nodes.iter().step_by(10).map(|&r| {
        let s = residual_at(&p, h, [r, 0.0, 0.0]);
        vec![r, s.u, 3f64.powf(0.25) * s.u, s.h_tilde, s.deviation]
    });
    out.write("construct_radial.csv", &csv("r,u,u_normalized,h_tilde,deviation", rows))?;
    out.note("mass", p.mass);
    out.note("norms", norms);
    Ok(())
}

fn balance_options(cfg: &RunConfig, eps: f64) -> BalanceOptions {
    BalanceOptions {
        candidates: cfg.construct.candidates.clone(),
        eps,
        green: green_options(cfg),
        fit: fit_options(cfg),
        ..BalanceOptions::default()
    }
}

fn construct_two_bubble(cfg: &RunConfig, domain: &Domain, h: &CoefficientH, out: &mut OutputDir) -> Result<(), CliError> {
    let eps = cfg.construct.eps.expect("validated");
    let params = out.timed("balance", || balance_configuration(h, domain, &balance_options(cfg, eps))).map_err(numeric)?;
    let fam = two_bubble_family(&params).map_err(numeric)?;
    let sample = StratifiedSample::new(domain, &params, eps, cfg.construct.samples, cfg.seed).map_err(numeric)?;
    let norms = out.timed("residual", || sample.norms(&fam, h));
    let pieces = out.timed("pieces", || verify_piece_identities(&params, eps)).map_err(numeric)?;
    let mut text = String::from("line,kind,value\n");
    for (n, v) in &pieces.exact {
        text.push_str(&format!("{n},exact,{v:e}\n"));
    }
    for (n, v) in &pieces.remainders {
        text.push_str(&format!("{n},remainder,{v:e}\n"));
    }
    out.write("pieces.csv", &text)?;
    let n = &norms;
    out.write("two_bubble.csv", &csv("eps,l3_norm,linf_norm,min_u", [vec![eps, n.l3_norm, n.linf_norm, n.min_u]]))?;
    out.note("balance", params.summary());
    out.note("positive", norms.positive);
    if !norms.positive {
        return Err(CliError::Assertion(format!("family is not positive on the sample (min {:e})", norms.min_u)));
    }
    Ok(())
}

fn sweep(cfg: &RunConfig, domain: &Domain, h: &CoefficientH, out: &mut OutputDir) -> Result<(), CliError> {
    let mode = match cfg.sweep.mode.expect("validated") {
        Mode::Radial => SweepMode::Radial,
        Mode::TwoBubble => SweepMode::TwoBubble,
    };
    let eps0 = cfg.sweep.eps[0];
    let opts = SweepOptions {
        seed: cfg.seed,
        samples: cfg.sweep.samples,
        green: green_options(cfg),
        balance: BalanceOptions { candidates: cfg.construct.candidates.clone(), ..balance_options(cfg, eps0) },
    };
    let s = out.timed("sweep", || instability_sweep(mode, h, domain, &cfg.sweep.eps, &opts)).map_err(numeric)?;
    out.write("sweep.csv", &s.to_csv())?;
    out.note("mode", mode);
    out.note("positive", s.positivity_ok());
    out.note("l3_strictly_decreasing", s.l3_strictly_decreasing());
    out.note("linf_strictly_decreasing", s.linf_strictly_decreasing());
    if let Some(b) = &s.balance {
        out.note("balance", b);
    }
    if !s.positivity_ok() {
        return Err(CliError::Assertion("family is not positive at some ε".into()));
    }
    Ok(())
}
