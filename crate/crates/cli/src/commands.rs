//! Command implementations. Exit-code contract: 0 = all checks passed,
//! 1 = a validation check failed, 2 = configuration or parse error.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use obstop::bsde::{solve_rbsde, ObstacleSpec};
use obstop::driver::DriverSpec;
use obstop::export::{
    write_boundary_csv, write_convergence_csv, write_mc_summary, write_paths_csv,
    write_surface_csv, ConvergenceRow,
};
use obstop::model::ScalarFn;
use obstop::numerics::log_log_slope;
use obstop::paths::{simulate, TimeGrid};
use obstop::pide::{extract_stopping_region, solve_pidvi, SpaceGrid, ValueSurface};
use obstop::validate::{
    apriori_gap_check, cross_validate, growth_and_continuity_check, monotonicity_suite,
    strict_comparison_check, EstimateConstants, ProbeGrid,
};
use obstop::{bsde::PayoffFn, FullDriver, McParams};

use crate::manifest::RunManifest;
use crate::spec::LoadedSpec;
use crate::{Axis, Engine, SuiteCheck};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

pub struct Outcome {
    pub exit_code: i32,
}

fn write_file(
    dir: &Path,
    name: &str,
    manifest: &mut RunManifest,
    body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> anyhow::Result<PathBuf> {
    let path = dir.join(name);
    let mut w = BufWriter::new(File::create(&path)?);
    body(&mut w)?;
    w.flush()?;
    manifest.outputs.push(name.to_string());
    Ok(path)
}

fn solve_surface(spec: &LoadedSpec) -> anyhow::Result<(ValueSurface, TimeGrid, SpaceGrid)> {
    let tgrid = TimeGrid::new(spec.problem.t0, spec.problem.obstacle.horizon, spec.disc.n_steps)?;
    let sgrid =
        SpaceGrid::new(spec.x_domain.0, spec.x_domain.1, spec.disc.n_nodes, spec.disc.boundary)?;
    let surface = solve_pidvi(
        &spec.problem.model,
        &spec.problem.driver,
        &spec.problem.obstacle,
        &tgrid,
        &sgrid,
        spec.disc.scheme,
        spec.disc.n_picard,
    )?;
    Ok((surface, tgrid, sgrid))
}

pub fn cmd_solve(
    spec: &LoadedSpec,
    engine: Engine,
    out_dir: &Path,
    dump_paths: bool,
    command_line: String,
) -> anyhow::Result<Outcome> {
    fs::create_dir_all(out_dir)?;
    let mut manifest = RunManifest::new(&spec.source, command_line);
    let mut exit = EXIT_OK;

    let surface = if matches!(engine, Engine::Pide | Engine::Both) {
        let (surface, ..) = solve_surface(spec)?;
        let region = extract_stopping_region(&surface, &spec.problem.obstacle, spec.tol.band_tol);
        write_file(out_dir, "surface.csv", &mut manifest, |w| {
            write_surface_csv(w, &surface, &spec.problem.obstacle, &region)
        })?;
        write_file(out_dir, "boundary.csv", &mut manifest, |w| {
            write_boundary_csv(w, &surface, &region)
        })?;
        Some(surface)
    } else {
        None
    };

    if matches!(engine, Engine::Mc | Engine::Both) {
        let grid =
            TimeGrid::new(spec.problem.t0, spec.problem.obstacle.horizon, spec.disc.mc_steps)?;
        let bundle = simulate(
            &spec.problem.model,
            spec.problem.t0,
            spec.problem.x0,
            &grid,
            spec.disc.n_paths,
            spec.disc.seed,
        )?;
        let sol = solve_rbsde(
            &spec.problem.driver,
            &spec.problem.model,
            &bundle,
            &spec.problem.obstacle,
            &spec.disc.basis,
            spec.disc.n_picard,
        )?;
        write_file(out_dir, "mc_summary.txt", &mut manifest, |w| write_mc_summary(w, &sol))?;
        if dump_paths {
            write_file(out_dir, "paths.csv", &mut manifest, |w| write_paths_csv(w, &bundle))?;
        }
    }

    if let (Engine::Both, Some(surface)) = (engine, &surface) {
        let mc = spec.disc.mc_params();
        let report = cross_validate(
            surface,
            &spec.problem,
            &mc,
            spec.tol.crossval_probes,
            spec.tol.crossval,
            spec.disc.seed,
        )?;
        write_file(out_dir, "crossval.txt", &mut manifest, |w| {
            write!(w, "{report}")
        })?;
        println!("{report}");
        if !report.pass {
            exit = EXIT_VALIDATION_FAILED;
        }
    }

    let rendered = manifest.render();
    fs::write(out_dir.join("manifest.txt"), rendered)?;
    Ok(Outcome { exit_code: exit })
}

pub fn cmd_validate(
    spec: &LoadedSpec,
    suite: &[SuiteCheck],
    out_dir: &Path,
    command_line: String,
) -> anyhow::Result<Outcome> {
    fs::create_dir_all(out_dir)?;
    let mut manifest = RunManifest::new(&spec.source, command_line);
    let mut all_pass = true;
    let mut report = String::new();

    let vmc = McParams {
        n_paths: spec.validate.n_paths,
        n_steps: spec.validate.n_steps,
        seed: spec.validate.seed,
        basis: spec.disc.basis.clone(),
        n_picard: spec.disc.n_picard,
    };

    for check in suite {
        match check {
            SuiteCheck::Crossval => {
                let (surface, ..) = solve_surface(spec)?;
                let mc = spec.disc.mc_params();
                let r = cross_validate(
                    &surface,
                    &spec.problem,
                    &mc,
                    spec.tol.crossval_probes,
                    spec.tol.crossval,
                    spec.disc.seed,
                )?;
                all_pass &= r.pass;
                report.push_str(&r.to_string());
            }
            SuiteCheck::Apriori => {
                // Perturbation pair: a bounded driver bump and a payoff
                // shift, both deterministic in the seed.
                let d2 = &spec.problem.driver;
                let base = d2.spec.f_bar.clone();
                let amp = 0.05;
                let d1 = FullDriver {
                    spec: DriverSpec {
                        f_bar: Arc::new(move |t, x, y, z, l| {
                            base(t, x, y, z, l) + amp * (y + 0.5 * z + 0.25 * l + x).cos()
                        }),
                        gamma: d2.spec.gamma.clone(),
                        lipschitz_c: d2.spec.lipschitz_c + amp * 1.75,
                        monotone_r: 0.0,
                        growth_p: d2.spec.growth_p,
                    },
                    mode: d2.mode,
                };
                let ob2 = &spec.problem.obstacle;
                let shift = 0.05;
                let h2 = ob2.h.clone();
                let g2 = ob2.g.clone();
                let ob1 = ObstacleSpec::new(
                    Arc::new(move |t, x| h2(t, x) + shift) as PayoffFn,
                    Arc::new(move |x| g2(x) + shift) as ScalarFn,
                    ob2.horizon,
                    ob2.growth_p,
                    ob2.growth_c + shift,
                    ob2.bounded,
                    spec.x_domain,
                )?;
                let constants = EstimateConstants::tight(d1.spec.lipschitz_c)?;
                let r = apriori_gap_check(
                    &spec.problem.model,
                    &d1,
                    d2,
                    &ob1,
                    ob2,
                    spec.problem.t0,
                    spec.problem.x0,
                    &constants,
                    &vmc,
                )?;
                all_pass &= r.pass;
                report.push_str(&r.to_string());
            }
            SuiteCheck::Strict => {
                let g = spec.problem.obstacle.g.clone();
                let r = strict_comparison_check(
                    &spec.problem.driver,
                    spec.tol.strict_epsilon,
                    move |x| g(x),
                    &spec.problem.model,
                    spec.problem.t0,
                    spec.problem.x0,
                    &vmc,
                )?;
                all_pass &= r.pass;
                report.push_str(&r.to_string());
            }
            SuiteCheck::Growth => {
                let t0 = spec.problem.t0;
                let horizon = spec.problem.obstacle.horizon;
                let (x_lo, x_hi) = spec.x_domain;
                let span = x_hi - x_lo;
                let probe_grid = ProbeGrid {
                    t_range: (t0, t0 + 0.4 * (horizon - t0)),
                    x_range: (x_lo + 0.3 * span, x_lo + 0.7 * span),
                    nt: 2,
                    nx: 2,
                };
                let r = growth_and_continuity_check(&spec.problem, &probe_grid, &vmc)?;
                all_pass &= r.pass;
                report.push_str(&r.to_string());
            }
            SuiteCheck::Monotone => {
                let r = monotonicity_suite(
                    &spec.problem.driver,
                    &spec.problem.model,
                    spec.problem.t0,
                    spec.problem.x0,
                    spec.problem.obstacle.horizon,
                    spec.validate.n_cases,
                    spec.validate.seed,
                    &vmc,
                )?;
                all_pass &= r.pass;
                report.push_str(&r.to_string());
            }
        }
    }

    print!("{report}");
    write_file(out_dir, "report.txt", &mut manifest, |w| w.write_all(report.as_bytes()))?;
    let rendered = manifest.render();
    fs::write(out_dir.join("manifest.txt"), rendered)?;
    Ok(Outcome { exit_code: if all_pass { EXIT_OK } else { EXIT_VALIDATION_FAILED } })
}

pub fn cmd_converge(
    spec: &LoadedSpec,
    axis: Axis,
    levels: usize,
    out_dir: &Path,
    command_line: String,
) -> anyhow::Result<Outcome> {
    fs::create_dir_all(out_dir)?;
    let mut manifest = RunManifest::new(&spec.source, command_line);
    let levels = levels.max(1);
    let t0 = spec.problem.t0;
    let x0 = spec.problem.x0;
    let horizon = spec.problem.obstacle.horizon;

    let mut rows: Vec<ConvergenceRow> = Vec::new();
    for level in 0..levels {
        let factor = 1usize << level;
        let start = Instant::now();
        let (parameter, value) = match axis {
            Axis::Dt => {
                let n_steps = spec.disc.n_steps * factor;
                let tgrid = TimeGrid::new(t0, horizon, n_steps)?;
                let sgrid = SpaceGrid::new(
                    spec.x_domain.0,
                    spec.x_domain.1,
                    spec.disc.n_nodes,
                    spec.disc.boundary,
                )?;
                let s = solve_pidvi(
                    &spec.problem.model,
                    &spec.problem.driver,
                    &spec.problem.obstacle,
                    &tgrid,
                    &sgrid,
                    spec.disc.scheme,
                    spec.disc.n_picard,
                )?;
                (tgrid.dt(), s.interpolate(t0, x0)?)
            }
            Axis::Dx => {
                let n_nodes = (spec.disc.n_nodes - 1) * factor + 1;
                let tgrid = TimeGrid::new(t0, horizon, spec.disc.n_steps)?;
                let sgrid = SpaceGrid::new(
                    spec.x_domain.0,
                    spec.x_domain.1,
                    n_nodes,
                    spec.disc.boundary,
                )?;
                let s = solve_pidvi(
                    &spec.problem.model,
                    &spec.problem.driver,
                    &spec.problem.obstacle,
                    &tgrid,
                    &sgrid,
                    spec.disc.scheme,
                    spec.disc.n_picard,
                )?;
                (sgrid.dx(), s.interpolate(t0, x0)?)
            }
            Axis::Paths => {
                let n_paths = spec.disc.n_paths * factor;
                let mc = McParams { n_paths, ..spec.disc.mc_params() };
                let grid = TimeGrid::new(t0, horizon, mc.n_steps)?;
                let bundle =
                    simulate(&spec.problem.model, t0, x0, &grid, mc.n_paths, mc.seed)?;
                let sol = solve_rbsde(
                    &spec.problem.driver,
                    &spec.problem.model,
                    &bundle,
                    &spec.problem.obstacle,
                    &mc.basis,
                    mc.n_picard,
                )?;
                (n_paths as f64, sol.value_at_origin)
            }
            Axis::Quad => {
                // Requires a density-backed measure to be meaningful;
                // atom measures reproduce themselves at every level.
                let n_quad = spec.disc.n_quad * factor;
                let respec = crate::spec::build_spec_with_quad(&spec.source, n_quad)
                    .map_err(|e| anyhow::anyhow!("re-quadrature failed: {e}"))?;
                let tgrid = TimeGrid::new(t0, horizon, spec.disc.n_steps)?;
                let sgrid = SpaceGrid::new(
                    spec.x_domain.0,
                    spec.x_domain.1,
                    spec.disc.n_nodes,
                    spec.disc.boundary,
                )?;
                let s = solve_pidvi(
                    &respec.problem.model,
                    &respec.problem.driver,
                    &respec.problem.obstacle,
                    &tgrid,
                    &sgrid,
                    spec.disc.scheme,
                    spec.disc.n_picard,
                )?;
                (n_quad as f64, s.interpolate(t0, x0)?)
            }
        };
        rows.push(ConvergenceRow {
            level,
            parameter,
            value_at_probe: value,
            diff_from_finest: 0.0,
            runtime_ms: start.elapsed().as_millis(),
        });
    }
    let finest = rows.last().expect("levels >= 1").value_at_probe;
    for r in &mut rows {
        r.diff_from_finest = (r.value_at_probe - finest).abs();
    }
    // Fit on all but the finest level (its diff is identically zero).
    let slope = if rows.len() >= 3 {
        let xs: Vec<f64> = rows[..rows.len() - 1].iter().map(|r| r.parameter).collect();
        let ys: Vec<f64> = rows[..rows.len() - 1].iter().map(|r| r.diff_from_finest).collect();
        log_log_slope(&xs, &ys)
    } else {
        f64::NAN
    };

    write_file(out_dir, "convergence.csv", &mut manifest, |w| {
        write_convergence_csv(w, &rows, slope)
    })?;
    let rendered = manifest.render();
    fs::write(out_dir.join("manifest.txt"), rendered)?;
    println!(
        "convergence axis {:?}: {} levels, slope {slope:.3}",
        axis,
        rows.len()
    );
    Ok(Outcome { exit_code: EXIT_OK })
}
