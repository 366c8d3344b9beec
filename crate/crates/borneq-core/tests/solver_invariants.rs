//! Solver behavior on small grids: the named edge cases of the potential
//! solves, normal derivatives, and cross-checks against the radial oracle.

use borneq_core::functionals::{
    alpha_coefficients, bi_action, energy_k, energy_kn, truncated_action, ChargeSource,
};
use borneq_core::geometry::{build_boundary_mesh, build_grid, DomainSpec, GridFunction};
use borneq_core::measures::{mollify, uniform_measure};
use borneq_core::radial::{radial_potential, RadialConfig};
use borneq_core::solver::{
    measure_from_normal_derivative, normal_derivative, richardson_extrapolate,
    solve_exterior_dirichlet, solve_potential, SolverConfig,
};
use borneq_core::rng::SplitMix64;
use borneq_core::Model;

fn ball_oracle() -> borneq_core::radial::RadialProfile {
    radial_potential(1.0, 3, Model::BornInfeld, 1.0, &RadialConfig::default()).unwrap()
}

/// Oracle potential at radius r for the unit ball, unit charge.
fn oracle_phi(r: f64) -> f64 {
    borneq_core::radial::lambda_star(r.max(1.0), 3, Model::BornInfeld, 1.0, &RadialConfig::default())
        .unwrap()
}

#[test]
fn solve_is_symmetric_under_axis_permutation_and_reflection() {
    // A measure symmetric under x <-> y and x -> -x: four symmetric Diracs.
    let dom = DomainSpec::ball(1.0);
    let grid = build_grid(&dom, 2.5, 41).unwrap();
    let pts = [
        [0.6, 0.0, 0.0],
        [-0.6, 0.0, 0.0],
        [0.0, 0.6, 0.0],
        [0.0, -0.6, 0.0],
    ];
    let mesh = borneq_core::geometry::BoundaryMesh {
        points: pts.to_vec(),
        weights: vec![1.0; 4],
        normals: pts
            .iter()
            .map(|p| {
                let n = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
                [p[0] / n, p[1] / n, p[2] / n]
            })
            .collect(),
    };
    let rho = uniform_measure(&mesh).unwrap();
    let charge = ChargeSource::Measure {
        measure: &rho,
        mesh: &mesh,
    };
    let (phi, rep) = solve_potential(charge, grid, &SolverConfig::default()).unwrap();
    assert!(rep.converged);
    let h = grid.spacing();
    let m = grid.points_per_axis();
    let mut max_swap: f64 = 0.0;
    let mut max_reflect: f64 = 0.0;
    for k in 0..m {
        for j in 0..m {
            for i in 0..m {
                let v = phi.values()[grid.node_index(i, j, k)];
                max_swap = max_swap.max((v - phi.values()[grid.node_index(j, i, k)]).abs());
                max_reflect =
                    max_reflect.max((v - phi.values()[grid.node_index(m - 1 - i, j, k)]).abs());
            }
        }
    }
    let scale = phi.max_value();
    // Axis swap is an exact symmetry of the forward-difference functional.
    assert!(max_swap <= 1e-7 * scale, "swap asymmetry {max_swap}");
    // Reflection maps forward onto backward differences: agreement only up
    // to the O(h^2) collocation offset of the discretization.
    assert!(
        max_reflect <= 4.0 * h * h * scale.max(1.0),
        "reflection asymmetry {max_reflect} (h^2 = {})",
        h * h
    );
}

#[test]
fn exterior_monotone_in_lambda_and_bounded() {
    let dom = DomainSpec::ball(1.0);
    let grid = build_grid(&dom, 2.5, 33).unwrap();
    let cfg = SolverConfig::default();
    let (phi1, _) = solve_exterior_dirichlet(0.05, &dom, grid, &cfg).unwrap();
    let (phi2, _) = solve_exterior_dirichlet(0.08, &dom, grid, &cfg).unwrap();
    let mut worst: f64 = 0.0;
    for (a, b) in phi1.values().iter().zip(phi2.values().iter()) {
        worst = worst.min(b - a);
        assert!(*a >= -1e-9 && *a <= 0.05 + 1e-9, "max principle violated: {a}");
    }
    assert!(worst >= -1e-6, "monotonicity violated by {worst}");
}

#[test]
fn exterior_vanishing_lambda_limit() {
    let dom = DomainSpec::ball(1.0);
    let grid = build_grid(&dom, 2.5, 17).unwrap();
    let (phi, _) = solve_exterior_dirichlet(1e-8, &dom, grid, &SolverConfig::default()).unwrap();
    assert!(phi.max_value() <= 1e-8 + 1e-20);
}

#[test]
fn max_at_boundary_for_random_measures() {
    // Global max of phi_rho sits on nodes adjacent to the charged surface.
    for dom in [DomainSpec::ball(1.0), DomainSpec::ellipsoid(1.4, 1.0, 0.8)] {
        let grid = build_grid(&dom, 2.5, 33).unwrap();
        let mesh = build_boundary_mesh(&dom, 256).unwrap();
        let flags = grid.boundary_adjacent_flags(&dom);
        for seed in 0..3u64 {
            let mut rng = SplitMix64::new(seed);
            let raw: Vec<f64> = (0..mesh.len()).map(|_| rng.next_f64() * 2.0).collect();
            let rho = borneq_core::BoundaryMeasure::new(raw).unwrap().normalized().unwrap();
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
            assert!(
                flags[best.0],
                "seed {seed} {dom:?}: max at non-boundary node {}",
                best.0
            );
        }
    }
}

#[test]
fn continuous_dependence_on_mollification_radius() {
    let dom = DomainSpec::ball(1.0);
    let grid = build_grid(&dom, 2.5, 41).unwrap();
    let h = grid.spacing();
    let mesh = build_boundary_mesh(&dom, 512).unwrap();
    let rho = uniform_measure(&mesh).unwrap();
    let cfg = SolverConfig::default();
    let f8 = mollify(&rho, &mesh, 8.0 * h, grid).unwrap();
    let f4 = mollify(&rho, &mesh, 4.0 * h, grid).unwrap();
    let (phi8, _) = solve_potential(ChargeSource::Density(&f8), grid, &cfg).unwrap();
    let (phi4, _) = solve_potential(ChargeSource::Density(&f4), grid, &cfg).unwrap();
    let mut sup: f64 = 0.0;
    for (a, b) in phi8.values().iter().zip(phi4.values().iter()) {
        sup = sup.max((a - b).abs());
    }
    // Sup distance of the two potentials is O(eps); the constant is modest
    // because the measures share all their mass.
    assert!(sup <= 1.5 * 8.0 * h * 0.1, "sup diff {sup} too large for eps = {}", 8.0 * h);
    assert!(sup > 0.0);
}

#[test]
fn interp_and_mollified_pairings_agree() {
    let dom = DomainSpec::ball(1.0);
    let grid = build_grid(&dom, 2.5, 41).unwrap();
    let h = grid.spacing();
    let eps = 4.0 * h;
    let mesh = build_boundary_mesh(&dom, 512).unwrap();
    let rho = uniform_measure(&mesh).unwrap();
    let f = mollify(&rho, &mesh, eps, grid).unwrap();
    let mut phi = GridFunction::zeros(grid);
    for n in 0..grid.n_nodes() {
        let p = grid.position(n);
        phi.values_mut()[n] = (0.3 * p[0]).sin() * (-0.2 * (p[1] + p[2])).exp();
    }
    let interp = ChargeSource::Measure {
        measure: &rho,
        mesh: &mesh,
    }
    .pairing(&phi);
    let moll = ChargeSource::Density(&f).pairing(&phi);
    assert!(
        (interp - moll).abs() <= 0.5 * (eps + h * h),
        "pairings differ by {} at eps = {eps}",
        (interp - moll).abs()
    );
}

#[test]
fn normal_derivative_matches_oracle_on_analytic_field() {
    // The op contract tested on exact radial data placed on the grid:
    // recovered d_nu phi ~ -|grad phi|(R) uniformly within 5%.
    let dom = DomainSpec::ball(1.0);
    let grid = build_grid(&dom, 3.0, 49).unwrap();
    let oracle = ball_oracle();
    let s_surface = oracle.slope[0];
    let mut phi = GridFunction::zeros(grid);
    for n in 0..grid.n_nodes() {
        let p = grid.position(n);
        let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
        phi.values_mut()[n] = if r <= 1.0 {
            oracle.lambda_star
        } else {
            oracle_phi(r)
        };
    }
    let mesh = build_boundary_mesh(&dom, 256).unwrap();
    let d = normal_derivative(&phi, &mesh, Some(oracle.lambda_star)).unwrap();
    for (i, &s) in d.iter().enumerate() {
        assert!(
            (-s - s_surface).abs() <= 0.05 * s_surface,
            "point {i}: slope {} vs oracle {s_surface}",
            -s
        );
    }
    // Flux measure of the oracle field: unit mass within 2%, density
    // constant within 5%.
    let rho = measure_from_normal_derivative(&d, &mesh, Model::BornInfeld).unwrap();
    assert!((rho.total_mass() - 1.0).abs() <= 0.02, "mass {}", rho.total_mass());
    let d0 = rho.weights()[0] / mesh.weights[0];
    for i in 0..mesh.len() {
        let di = rho.weights()[i] / mesh.weights[i];
        assert!((di - d0).abs() <= 0.05 * d0, "density wobble at {i}");
    }
}

#[test]
fn exterior_solve_normal_flux_negative_and_oracle_close_after_richardson() {
    let dom = DomainSpec::ball(1.0);
    let oracle = ball_oracle();
    let mesh = build_boundary_mesh(&dom, 256).unwrap();
    let mut means = Vec::new();
    for (l, m) in [(2.5, 41usize), (3.75, 61)] {
        let grid = build_grid(&dom, l, m).unwrap();
        let (phi, _) =
            solve_exterior_dirichlet(oracle.lambda_star, &dom, grid, &SolverConfig::default())
                .unwrap();
        let d = normal_derivative(&phi, &mesh, None).unwrap();
        assert!(d.iter().all(|&s| s < 0.0), "outward derivative not negative");
        means.push((l, -d.iter().sum::<f64>() / d.len() as f64));
    }
    let extrapolated = richardson_extrapolate(&means);
    let rel = (extrapolated - oracle.slope[0]).abs() / oracle.slope[0];
    assert!(rel <= 0.05, "extrapolated slope off by {rel}");
}

#[test]
fn model_ordering_at_fixed_measure() {
    // Strong-field ball so the high-order terms are far above tolerance.
    let dom = DomainSpec::ball(0.3);
    let grid = build_grid(&dom, 1.5, 49).unwrap();
    let mesh = build_boundary_mesh(&dom, 512).unwrap();
    let rho = uniform_measure(&mesh).unwrap();
    let charge = ChargeSource::Measure {
        measure: &rho,
        mesh: &mesh,
    };
    let mut actions = Vec::new();
    let mut ks = Vec::new();
    for n in 1..=6usize {
        let cfg = SolverConfig {
            model: Model::Truncated(n),
            tolerance: 1e-10,
            ..Default::default()
        };
        let (phi, rep) = solve_potential(charge, grid, &cfg).unwrap();
        assert!(rep.converged, "n={n} residual {}", rep.residual);
        let coeffs = alpha_coefficients(n).unwrap();
        actions.push(truncated_action(&phi, charge, &coeffs).action);
        ks.push(energy_kn(&phi, &coeffs));
    }
    for w in actions.windows(2) {
        assert!(w[1] > w[0] + 1e-10, "action ordering violated: {w:?}");
    }
    for w in ks.windows(2) {
        assert!(w[1] < w[0] - 1e-10, "K ordering violated: {w:?}");
    }
    // BI sits below the whole K hierarchy.
    let cfg = SolverConfig {
        tolerance: 1e-10,
        ..Default::default()
    };
    let (phi_bi, _) = solve_potential(charge, grid, &cfg).unwrap();
    let k_bi = energy_k(&phi_bi).unwrap();
    assert!(k_bi < *ks.last().unwrap());
    let a_bi = bi_action(&phi_bi, charge).unwrap();
    assert!(a_bi.action < 0.0, "minimizer action not negative");
}
