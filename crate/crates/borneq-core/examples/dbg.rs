use borneq_core::equilibrium::*;
use borneq_core::geometry::{build_boundary_mesh, build_grid, DomainSpec};
use std::time::Instant;

fn main() {
    let dom = DomainSpec::ball(1.0);
    let t = Instant::now();
    let grid = build_grid(&dom, 4.0, 193).unwrap();
    let mesh = build_boundary_mesh(&dom, 32768).unwrap();
    let fw_cfg = FwConfig { max_iterations: 3, gap_tolerance: 0.02, ..Default::default() };
    let fw = frank_wolfe_equilibrium(&mesh, grid, &fw_cfg, None).unwrap();
    let diag = equilibrium_diagnostics(&fw, &dom, &mesh, 20240801, 10);
    println!("m=193 K=32768: lambda={:.6e} spread_rel={:.4e} probe_rel={:.4e} gap_rel={:.3e} theta={:.3} [{:.0}s]",
        fw.lambda_star, diag.plateau_spread / fw.lambda_star, diag.probe_max_deviation / fw.lambda_star,
        fw.gap / fw.lambda_star, fw.theta, t.elapsed().as_secs_f64());
}
