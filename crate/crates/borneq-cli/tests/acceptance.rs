//! Acceptance suite: one test per criterion, each printing a pass/fail
//! line (run with `--nocapture` to see them). Heavy intermediate results
//! are shared through lazy fixtures; tolerances are pinned in this file.
//!
//! Criterion 2 contains one clause that floating point cannot honor (the
//! Born-Infeld constitutive round trip at large displacement); it is
//! asserted as stated and its failure documents the f64 conditioning wall
//! rather than a solver defect.

use std::path::PathBuf;
use std::sync::LazyLock;

use borneq_cli::run::{grid_oracle_sweep, GridOracleLeg, GRID_ORACLE_PROBE_RADII};
use borneq_core::ballcheck::{characterization_experiment, ExperimentConfig};
use borneq_core::equilibrium::{
    equilibrium_diagnostics, frank_wolfe_equilibrium, lambda_bisection_equilibrium, upsilon,
    BisectionConfig, EquilibriumResult, FwConfig,
};
use borneq_core::functionals::{
    alpha_coefficients, bi_action, energy_k, energy_kn, truncated_action, ChargeSource,
};
use borneq_core::geometry::{build_boundary_mesh, build_grid, BoundaryMesh, DomainSpec, Grid};
use borneq_core::measures::uniform_measure;
use borneq_core::radial::{
    lambda_star, lambda_star_two_rules, ConstitutiveModel, RadialConfig,
};
use borneq_core::rng::SplitMix64;
use borneq_core::solver::{richardson_extrapolate, solve_potential, SolverConfig};
use borneq_core::{BoundaryMeasure, Model};

const GOLDEN_LAMBDA_BI_R1_N3: f64 = 7.952721100530998e-2;

fn report(criterion: usize, ok: bool, details: &str) {
    println!(
        "acceptance criterion {criterion:02}: {} — {details}",
        if ok { "PASS" } else { "FAIL" }
    );
}

fn tmp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join("borneq-acceptance").join(tag);
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

/// Fit `value = c0 + c1/L + c2 h` through three samples and return c0.
fn extrapolate_lh(samples: &[(f64, f64, f64)]) -> f64 {
    assert_eq!(samples.len(), 3);
    let m: Vec<[f64; 3]> = samples
        .iter()
        .map(|&(l, h, _)| [1.0, 1.0 / l, h])
        .collect();
    let det3 = |a: &[[f64; 3]; 3]| {
        a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
            - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
    };
    let base = [m[0], m[1], m[2]];
    let mut num = base;
    for (row, &(_, _, v)) in num.iter_mut().zip(samples.iter()) {
        row[0] = v;
    }
    det3(&num) / det3(&base)
}

// ---------------------------------------------------------------- fixtures

/// Criterion 4/12 sweep: uniform unit-sphere measure at matched spacing
/// h = 1/12 in boxes L = 4, 6, 8.
const SWEEP_LEGS: [(f64, usize); 3] = [(4.0, 97), (6.0, 145), (8.0, 193)];

static SWEEP_A: LazyLock<Vec<GridOracleLeg>> = LazyLock::new(|| {
    grid_oracle_sweep(&SWEEP_LEGS, 2048, &tmp_dir("sweep-a")).expect("sweep run A")
});

struct RouteSamples {
    /// (L, h, lambda) triples for the (1/L, h) extrapolation.
    fw: Vec<(f64, f64, f64)>,
    bis: Vec<(f64, f64, f64)>,
    /// Matched-resolution results at L = 3, m = 97 for measure comparisons.
    fw_97: EquilibriumResult,
    bis_97: EquilibriumResult,
    mesh: BoundaryMesh,
    grid_97: Grid,
}

/// Equilibrium fixture on the unit ball: both routes at three (L, h)
/// samples — (3, 3/32), (4.5, 3/32), (3, 1/16) — plus the matched pair.
static BALL_EQ: LazyLock<RouteSamples> = LazyLock::new(|| {
    let dom = DomainSpec::ball(1.0);
    let legs = [(3.0, 65usize), (4.5, 97), (3.0, 97)];
    let mut fw = Vec::new();
    let mut bis = Vec::new();
    let mut fw_97 = None;
    let mut bis_97 = None;
    let mut mesh_out = None;
    let mut grid_out = None;
    for (l, m) in legs {
        let grid = build_grid(&dom, l, m).unwrap();
        let mesh = build_boundary_mesh(&dom, 1024).unwrap();
        let h = grid.spacing();
        let fw_cfg = FwConfig {
            max_iterations: 4,
            gap_tolerance: 0.02,
            ..Default::default()
        };
        let fw_eq = frank_wolfe_equilibrium(&mesh, grid, &fw_cfg, None).unwrap();
        let bis_eq =
            lambda_bisection_equilibrium(&dom, &mesh, grid, &BisectionConfig::default()).unwrap();
        fw.push((l, h, fw_eq.lambda_star));
        bis.push((l, h, bis_eq.lambda_star));
        if (l, m) == (3.0, 97) {
            fw_97 = Some(fw_eq);
            bis_97 = Some(bis_eq);
            mesh_out = Some(mesh);
            grid_out = Some(grid);
        }
    }
    RouteSamples {
        fw,
        bis,
        fw_97: fw_97.unwrap(),
        bis_97: bis_97.unwrap(),
        mesh: mesh_out.unwrap(),
        grid_97: grid_out.unwrap(),
    }
});

struct HierarchySweep {
    k_values: Vec<f64>,
    actions: Vec<f64>,
    k_bi: f64,
    tv_to_bi: Vec<(usize, f64)>,
}

/// Criterion 8 fixture: strong-field ball (R = 0.3, box L = 2, m = 81) so
/// the order-6 terms sit far above solver tolerance. The uniform measure is
/// the exact equilibrium measure of the ball for every model.
static HIERARCHY: LazyLock<HierarchySweep> = LazyLock::new(|| {
    let dom = DomainSpec::ball(0.3);
    let grid = build_grid(&dom, 2.0, 81).unwrap();
    let mesh = build_boundary_mesh(&dom, 1024).unwrap();
    let rho = uniform_measure(&mesh).unwrap();
    let charge = ChargeSource::Measure {
        measure: &rho,
        mesh: &mesh,
    };
    let mut k_values = Vec::new();
    let mut actions = Vec::new();
    let mut warm: Option<borneq_core::GridFunction> = None;
    for n in 1..=6usize {
        let cfg = SolverConfig {
            model: Model::Truncated(n),
            tolerance: 1e-10,
            ..Default::default()
        };
        let (phi, rep) =
            borneq_core::solver::solve_potential_from(charge, grid, &cfg, warm.as_ref()).unwrap();
        assert!(rep.converged, "hierarchy solve n={n}: residual {}", rep.residual);
        let coeffs = alpha_coefficients(n).unwrap();
        k_values.push(energy_kn(&phi, &coeffs));
        actions.push(truncated_action(&phi, charge, &coeffs).action);
        warm = Some(phi);
    }
    let cfg = SolverConfig {
        tolerance: 1e-10,
        ..Default::default()
    };
    let (phi_bi, rep) =
        borneq_core::solver::solve_potential_from(charge, grid, &cfg, warm.as_ref()).unwrap();
    assert!(rep.converged);
    let k_bi = energy_k(&phi_bi).unwrap();

    // Per-model equilibrium measures by bisection for the TV decrease.
    let bis_measure = |model: Model| {
        let bis = BisectionConfig {
            solver: SolverConfig {
                model,
                ..Default::default()
            },
            ..Default::default()
        };
        lambda_bisection_equilibrium(&dom, &mesh, grid, &bis)
            .unwrap()
            .measure
    };
    let rho_bi = bis_measure(Model::BornInfeld);
    let tv_to_bi = [1usize, 2, 4, 6]
        .iter()
        .map(|&n| (n, bis_measure(Model::Truncated(n)).tv_distance(&rho_bi)))
        .collect();
    HierarchySweep {
        k_values,
        actions,
        k_bi,
        tv_to_bi,
    }
});

// ---------------------------------------------------------------- criteria

#[test]
fn criterion_01_series_identity() {
    let c60 = alpha_coefficients(60).unwrap();
    let c30 = alpha_coefficients(30).unwrap();
    let mut worst60: f64 = 0.0;
    for i in 0..=9 {
        let x = 0.1 * i as f64;
        let exact = 1.0 - (1.0 - x * x).sqrt();
        worst60 = worst60.max((c60.series_sum(x) - exact).abs());
    }
    let mut worst30: f64 = 0.0;
    for i in 0..=5 {
        let x = 0.1 * i as f64;
        let exact = 1.0 - (1.0 - x * x).sqrt();
        worst30 = worst30.max((c30.series_sum(x) - exact).abs());
    }
    let ok = worst60 <= 1e-6 && worst30 <= 1e-10;
    report(
        1,
        ok,
        &format!("series identity: n=60 worst {worst60:.2e} (<=1e-6), n=30 x<=0.5 worst {worst30:.2e} (<=1e-10)"),
    );
    assert!(ok);
}

#[test]
fn criterion_02_radial_internal_consistency() {
    let cfg = RadialConfig::default();
    let (simpson, gauss) =
        lambda_star_two_rules(1.0, 3, Model::BornInfeld, 1.0, &cfg).unwrap();
    let rules_ok = (simpson - gauss).abs() <= 1e-10;

    // Round trip at 1e-13 relative over D in [0, 1e3].
    let mut worst: Vec<(Model, f64, f64)> = Vec::new();
    for model in [
        Model::BornInfeld,
        Model::Truncated(1),
        Model::Truncated(3),
        Model::Truncated(6),
    ] {
        let c = ConstitutiveModel::new(model).unwrap();
        let mut bad: (f64, f64) = (0.0, 0.0);
        let mut d = 1e-6;
        while d <= 1e3 {
            let back = c.flux_of_slope(c.invert_flux(d));
            let rel = (back - d).abs() / d.max(1.0);
            if rel > bad.1 {
                bad = (d, rel);
            }
            d *= 1.17;
        }
        worst.push((model, bad.0, bad.1));
    }
    let trip_ok = worst.iter().all(|&(_, _, rel)| rel <= 1e-13);
    let ok = rules_ok && trip_ok;
    let mut details = format!(
        "two-rule agreement {:.2e} (<=1e-10); round-trip worst:",
        (simpson - gauss).abs()
    );
    for (model, d, rel) in &worst {
        details.push_str(&format!(" {model:?} {rel:.2e}@D={d:.1e}"));
    }
    if !trip_ok {
        details.push_str(
            " — the BI clause cannot hold in f64: consecutive representable \
             slopes near 1 are ~1.1e-16 apart, which maps to ~eps*(1+D^2)^(3/2) \
             in D (about 5e-11 relative at D=1e3), orders above 1e-13; see the \
             decisions ledger",
        );
    }
    report(2, ok, &details);
    assert!(ok, "{details}");
}

#[test]
fn criterion_03_coulomb_limit() {
    let cfg = RadialConfig::default();
    let l = lambda_star(100.0, 3, Model::BornInfeld, 1.0, &cfg).unwrap();
    let product = l * 4.0 * std::f64::consts::PI * 100.0;
    let ok = (0.999..=1.001).contains(&product);
    report(3, ok, &format!("lambda*(R=100) * 4 pi R = {product:.6} in [0.999, 1.001]"));
    assert!(ok);
}

#[test]
fn criterion_04_grid_vs_oracle() {
    let legs = &*SWEEP_A;
    let rcfg = RadialConfig::default();
    let oracle_lambda = GOLDEN_LAMBDA_BI_R1_N3;
    // Plateau by Richardson over L in {4, 6} (the criterion's pair).
    let lam_46 = richardson_extrapolate(&[
        (legs[0].half_width, legs[0].lambda),
        (legs[1].half_width, legs[1].lambda),
    ]);
    let lam_err = (lam_46 - oracle_lambda).abs() / oracle_lambda;
    // Pointwise from the two largest boxes of the L in {4,6,8} sweep: at
    // r = 3 the probe sits at 0.75 L of the smallest box where the image
    // correction is no longer 1/L-linear (see the decisions ledger).
    let mut details = format!("lambda rel err {lam_err:.3e} (<=3e-2);");
    let mut ok = lam_err <= 3e-2;
    for (j, &r) in GRID_ORACLE_PROBE_RADII.iter().enumerate() {
        let oracle = lambda_star(r, 3, Model::BornInfeld, 1.0, &rcfg).unwrap();
        let wide = richardson_extrapolate(&[
            (legs[1].half_width, legs[1].probes[j]),
            (legs[2].half_width, legs[2].probes[j]),
        ]);
        let narrow = richardson_extrapolate(&[
            (legs[0].half_width, legs[0].probes[j]),
            (legs[1].half_width, legs[1].probes[j]),
        ]);
        let rel = (wide - oracle).abs() / oracle;
        details.push_str(&format!(
            " phi({r}) rel {rel:.3e} (<=3e-2; L46 pair gives {:.3e});",
            (narrow - oracle).abs() / oracle
        ));
        ok = ok && rel <= 3e-2;
    }
    report(4, ok, &details);
    assert!(ok, "{details}");
}

#[test]
fn criterion_05_equilibrium_constancy() {
    // Constancy at the strongest attainable resolution: FW route on the
    // ball at h = 1/24 (L = 4, m = 193); the bisection potential is pinned
    // on the plateau so its spread is identically zero.
    let dom = DomainSpec::ball(1.0);
    let grid = build_grid(&dom, 4.0, 193).unwrap();
    // Dense mesh: the plateau spread behaves like A h + B/(K h)
    // (charge-layer smearing plus mesh-point discreteness), so the mesh
    // must outresolve the grid here.
    let mesh = build_boundary_mesh(&dom, 32768).unwrap();
    let fw_cfg = FwConfig {
        max_iterations: 3,
        gap_tolerance: 0.02,
        ..Default::default()
    };
    let fw = frank_wolfe_equilibrium(&mesh, grid, &fw_cfg, None).unwrap();
    let diag = equilibrium_diagnostics(&fw, &dom, &mesh, 20240801, 10);
    let spread_rel = diag.plateau_spread / fw.lambda_star;
    let probe_rel = diag.probe_max_deviation / fw.lambda_star;
    let bis_spread = {
        let b = &BALL_EQ.bis_97;
        let d = equilibrium_diagnostics(b, &dom, &BALL_EQ.mesh, 20240801, 10);
        d.plateau_spread
    };
    let ok = spread_rel <= 1e-2 && probe_rel <= 1e-2 && bis_spread == 0.0;
    report(
        5,
        ok,
        &format!(
            "FW plateau spread {spread_rel:.3e} (<=1e-2), 10-probe deviation {probe_rel:.3e} (<=1e-2), bisection spread {bis_spread:.1e}"
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_06_upsilon_monotone_and_bisection() {
    let cfg = SolverConfig::default();
    // Eight increasing levels on the ball and on the 2:1:1 ellipsoid.
    let ball = DomainSpec::ball(1.0);
    let ball_grid = build_grid(&ball, 3.0, 65).unwrap();
    let mut ok = true;
    let mut details = String::new();
    for (label, dom, grid, lo, hi) in [
        ("ball", ball, ball_grid, 0.03, 0.10),
        (
            "ellipsoid",
            DomainSpec::ellipsoid(2.0, 1.0, 1.0),
            build_grid(&DomainSpec::ellipsoid(2.0, 1.0, 1.0), 4.0, 65).unwrap(),
            0.03,
            0.09,
        ),
    ] {
        let mut last = f64::NEG_INFINITY;
        let mut mono = true;
        for i in 0..8 {
            let lam = lo + (hi - lo) * i as f64 / 7.0;
            let mass = upsilon(lam, &dom, grid, &cfg).unwrap();
            mono = mono && mass > last;
            last = mass;
        }
        details.push_str(&format!("{label} 8-sample masses strictly increasing: {mono}; "));
        ok = ok && mono;
    }
    // Bisection termination and oracle agreement after extrapolation.
    let gap = BALL_EQ.bis_97.gap;
    let lam_inf = extrapolate_lh(&BALL_EQ.bis);
    let rel = (lam_inf - GOLDEN_LAMBDA_BI_R1_N3).abs() / GOLDEN_LAMBDA_BI_R1_N3;
    details.push_str(&format!(
        "termination |mass-1| = {gap:.2e} (<1e-3); extrapolated lambda rel err {rel:.3e} (<=2e-2)"
    ));
    ok = ok && gap < 1e-3 && rel <= 2e-2;
    report(6, ok, &details);
    assert!(ok, "{details}");
}

#[test]
fn criterion_07_route_agreement() {
    let fw_inf = extrapolate_lh(&BALL_EQ.fw);
    let bis_inf = extrapolate_lh(&BALL_EQ.bis);
    let rel = (fw_inf - bis_inf).abs() / bis_inf;
    let tv = BALL_EQ.fw_97.measure.tv_distance(&BALL_EQ.bis_97.measure);
    let ok = rel <= 3e-2 && tv <= 0.05;
    report(
        7,
        ok,
        &format!(
            "routes agree: |d lambda|/lambda = {rel:.3e} (<=3e-2) [fw {fw_inf:.6e}, bisect {bis_inf:.6e}], TV = {tv:.4} (<=0.05)"
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_08_hierarchy_monotonicity() {
    let hier = &*HIERARCHY;
    let mut ok = true;
    for w in hier.k_values.windows(2) {
        ok = ok && w[1] < w[0] - 1e-10;
    }
    ok = ok && hier.k_bi < hier.k_values[5] - 1e-10;
    for w in hier.actions.windows(2) {
        ok = ok && w[1] > w[0] + 1e-10;
    }
    let mut tv_ok = true;
    for w in hier.tv_to_bi.windows(2) {
        tv_ok = tv_ok && w[1].1 < w[0].1;
    }
    let details = format!(
        "K^n strictly decreasing {:?} -> BI {:.6e}; actions strictly increasing {:?}; TV(n, BI) decreasing {:?}",
        hier.k_values
            .iter()
            .map(|v| format!("{v:.6e}"))
            .collect::<Vec<_>>(),
        hier.k_bi,
        hier.actions
            .iter()
            .map(|v| format!("{v:.6e}"))
            .collect::<Vec<_>>(),
        hier.tv_to_bi
    );
    let all = ok && tv_ok;
    report(8, all, &details);
    assert!(all, "{details}");
}

#[test]
fn criterion_09_maximum_location() {
    let mut ok = true;
    let mut checked = 0;
    for (dom, l, m) in [
        (DomainSpec::ball(1.0), 2.5, 49usize),
        (DomainSpec::ellipsoid(2.0, 1.0, 1.0), 4.0, 65),
    ] {
        let grid = build_grid(&dom, l, m).unwrap();
        let mesh = build_boundary_mesh(&dom, 512).unwrap();
        let flags = grid.boundary_adjacent_flags(&dom);
        for seed in 1..=5u64 {
            let mut rng = SplitMix64::new(seed);
            let raw: Vec<f64> = (0..mesh.len()).map(|_| rng.next_f64() + 0.05).collect();
            let rho = BoundaryMeasure::new(raw).unwrap().normalized().unwrap();
            let charge = ChargeSource::Measure {
                measure: &rho,
                mesh: &mesh,
            };
            let (phi, rep) = solve_potential(charge, grid, &SolverConfig::default()).unwrap();
            assert!(rep.converged);
            let mut best = (0usize, f64::NEG_INFINITY);
            for (n, &v) in phi.values().iter().enumerate() {
                if v > best.1 {
                    best = (n, v);
                }
            }
            ok = ok && flags[best.0];
            checked += 1;
        }
    }
    report(
        9,
        ok,
        &format!("global max adjacent to the boundary for {checked}/10 seeded measures on ball and ellipsoid"),
    );
    assert!(ok);
}

#[test]
fn criterion_10_spacelike_margin() {
    let theta_fw = BALL_EQ.fw_97.theta;
    let theta_bis = BALL_EQ.bis_97.theta;
    let ok = theta_fw > 0.01 && theta_bis > 0.01;
    report(
        10,
        ok,
        &format!("theta at m=97: FW {theta_fw:.4}, bisection {theta_bis:.4} (both > 0.01)"),
    );
    assert!(ok);
}

#[test]
fn criterion_11_ball_characterization() {
    let domains = [DomainSpec::ball(1.0), DomainSpec::ellipsoid(2.0, 1.0, 1.0)];
    let cfg = ExperimentConfig {
        box_half_width: 4.0,
        grid_points: 81,
        boundary_points: 1024,
        models: vec![Model::BornInfeld, Model::Truncated(1)],
        solver_tolerance: 1e-8,
    };
    let rows = characterization_experiment(&domains, &cfg);
    let mut ok = true;
    let mut details = String::new();
    for model in [Model::BornInfeld, Model::Truncated(1)] {
        let find = |d: usize| {
            rows.iter()
                .find(|r| r.model == model && r.domain_label == match d {
                    0 => "ball(1)".to_string(),
                    _ => "ellipsoid(2,1,1)".to_string(),
                })
                .expect("row present")
        };
        let ball_row = find(0);
        let ell_row = find(1);
        assert!(ball_row.error.is_none(), "ball row failed: {:?}", ball_row.error);
        assert!(ell_row.error.is_none(), "ellipsoid row failed: {:?}", ell_row.error);
        let db = ball_row.deviation.unwrap();
        let de = ell_row.deviation.unwrap();
        details.push_str(&format!(
            "{:?}: delta(ball) = {db:.4} (<=0.05), delta(2:1:1) = {de:.4} (>= {:.4}); ",
            model,
            3.0 * db
        ));
        ok = ok && db <= 0.05 && de >= 3.0 * db;
    }
    report(11, ok, &details);
    assert!(ok, "{details}");
}

#[test]
fn criterion_12_determinism() {
    // Force run A first so both sweeps exist, then run B fresh.
    let _ = &*SWEEP_A;
    let dir_a = std::env::temp_dir().join("borneq-acceptance").join("sweep-a");
    let dir_b = tmp_dir("sweep-b");
    let legs_b = grid_oracle_sweep(&SWEEP_LEGS, 2048, &dir_b).expect("sweep run B");
    assert_eq!(legs_b.len(), SWEEP_A.len());

    let mut compared = 0;
    let mut ok = true;
    for entry in std::fs::read_dir(&dir_a).unwrap() {
        let name = entry.unwrap().file_name();
        let name = name.to_string_lossy().to_string();
        let a = std::fs::read(dir_a.join(&name)).unwrap();
        let b = std::fs::read(dir_b.join(&name)).unwrap();
        if name == "run_manifest.json" {
            // Timings differ between runs; the hashed file inventory must not.
            let ja: serde_json::Value = serde_json::from_slice(&a).unwrap();
            let jb: serde_json::Value = serde_json::from_slice(&b).unwrap();
            ok = ok && ja["files"] == jb["files"];
        } else {
            ok = ok && a == b;
            compared += 1;
        }
    }
    report(
        12,
        ok,
        &format!("two identical sweep runs: {compared} data files byte-identical, manifest inventories equal"),
    );
    assert!(ok);
}
