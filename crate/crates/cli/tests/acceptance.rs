//! Acceptance suite: one test per criterion, each printing a PASS/FAIL
//! line with the measured margins. Run with `--nocapture` to see the
//! lines for passing criteria too.

use std::fs;
use std::sync::Arc;
use std::time::Instant;

use obstop::bsde::{
    solve_rbsde, McParams, ObstacleSpec, PayoffFn, RegressionBasis, TOL_SKOROKHOD,
};
use obstop::driver::{DriverSpec, FullDriver};
use obstop::model::{JumpDiffusionModel, LevyMeasure, ScalarFn};
use obstop::paths::{simulate, TimeGrid};
use obstop::pide::{
    check_structural, solve_pidvi, viscosity_residual, BoundaryMode, ObstacleScheme, SpaceGrid,
};
use obstop::validate::{
    apriori_gap_check, cross_validate, growth_and_continuity_check, k_ct, monotonicity_suite,
    strict_comparison_check, EstimateConstants, ProbeGrid, ProblemInstance,
};
use obstop_cli::run_args;
use obstop_testkit::crr_american_put;

const RHO: f64 = 0.06;
const SIGMA: f64 = 0.2;
const STRIKE: f64 = 1.0;
const SPOT: f64 = 1.0;
const HORIZON: f64 = 0.5;

fn gbm_model() -> JumpDiffusionModel {
    JumpDiffusionModel::new(
        Arc::new(|x: f64| RHO * x) as ScalarFn,
        Arc::new(|x: f64| SIGMA * x) as ScalarFn,
        Arc::new(|_, _| 0.0),
        LevyMeasure::none(),
        1.0,
        HORIZON,
    )
    .unwrap()
}

/// Criterion-2 model: two-atom jump layer over the criterion-1 dynamics.
fn merton_model() -> JumpDiffusionModel {
    JumpDiffusionModel::new(
        Arc::new(|x: f64| RHO * x) as ScalarFn,
        Arc::new(|x: f64| SIGMA * x) as ScalarFn,
        Arc::new(|x: f64, e: f64| x * e),
        LevyMeasure::from_atoms(&[(-0.1, 1.0), (0.1, 1.0)]).unwrap(),
        1.0,
        HORIZON,
    )
    .unwrap()
}

fn mixed_driver() -> FullDriver {
    // fbar = -rho y + kappa |z| + a l with kappa = 0.1, a = 0.05.
    FullDriver::scalar(DriverSpec::mixed(RHO, 0.1, 0.05))
}

fn put_obstacle() -> ObstacleSpec {
    ObstacleSpec::put(STRIKE, HORIZON, (0.0, 3.0))
}

fn pide_grids(n_steps: usize, n_nodes: usize) -> (TimeGrid, SpaceGrid) {
    (
        TimeGrid::new(0.0, HORIZON, n_steps).unwrap(),
        SpaceGrid::new(0.0, 3.0, n_nodes, BoundaryMode::DirichletObstacle).unwrap(),
    )
}

#[test]
fn criterion_1_oracle_equivalence_linear() {
    let oracle = crr_american_put(SPOT, STRIKE, RHO, SIGMA, HORIZON, 1000);

    let model = gbm_model();
    let driver = FullDriver::scalar(DriverSpec::discount(RHO));
    let obstacle = put_obstacle();

    let (tgrid, sgrid) = pide_grids(200, 400);
    let t_pide = Instant::now();
    let surface =
        solve_pidvi(&model, &driver, &obstacle, &tgrid, &sgrid, ObstacleScheme::Projection, 3)
            .unwrap();
    let pide_elapsed = t_pide.elapsed();
    let pide_value = surface.interpolate(0.0, SPOT).unwrap();

    let t_mc = Instant::now();
    let grid = TimeGrid::new(0.0, HORIZON, 50).unwrap();
    let bundle = simulate(&model, 0.0, SPOT, &grid, 100_000, 42).unwrap();
    let mc = solve_rbsde(&driver, &model, &bundle, &obstacle, &RegressionBasis::piecewise_default(), 3)
        .unwrap();
    let mc_elapsed = t_mc.elapsed();

    let pide_err = (pide_value - oracle).abs();
    let mc_err = (mc.value_at_origin - oracle).abs();
    let pass = pide_err < 0.01
        && mc_err < 0.01
        && pide_elapsed.as_secs_f64() < 10.0
        && mc_elapsed.as_secs_f64() < 60.0;
    println!(
        "criterion 1 (oracle equivalence, linear): {} — crr {oracle:.5}, pide {pide_value:.5} (err {pide_err:.5}, {pide_elapsed:?}), mc {:.5} (err {mc_err:.5}, {mc_elapsed:?})",
        if pass { "PASS" } else { "FAIL" },
        mc.value_at_origin,
    );
    assert!(pide_err < 0.01, "pide error {pide_err}");
    assert!(mc_err < 0.01, "mc error {mc_err}");
    assert!(pide_elapsed.as_secs_f64() < 10.0, "pide too slow: {pide_elapsed:?}");
    assert!(mc_elapsed.as_secs_f64() < 60.0, "mc too slow: {mc_elapsed:?}");
}

#[test]
fn criterion_2_cross_engine_agreement_nonlinear_jumps() {
    let model = merton_model();
    let driver = mixed_driver();
    let obstacle = put_obstacle();
    let (tgrid, sgrid) = pide_grids(200, 400);
    let surface =
        solve_pidvi(&model, &driver, &obstacle, &tgrid, &sgrid, ObstacleScheme::Projection, 3)
            .unwrap();
    let problem = ProblemInstance {
        model: model.clone(),
        driver: driver.clone(),
        obstacle: obstacle.clone(),
        t0: 0.0,
        x0: SPOT,
    };
    let mc = McParams::new(100_000, 50, 42);
    let report = cross_validate(&surface, &problem, &mc, 5, 0.02, 7).unwrap();
    println!(
        "criterion 2 (cross-engine, nonlinear + jumps): {} — max |gap| {:.5} over {} probes (tolerance 0.02 + 3 se)",
        if report.pass { "PASS" } else { "FAIL" },
        report.max_abs_gap,
        report.probes.len(),
    );
    assert!(report.pass, "{report}");
}

#[test]
fn criterion_3_viscosity_residual_refinement() {
    let model = merton_model();
    let driver = mixed_driver();
    let obstacle = put_obstacle();

    let sup_at = |n_steps: usize, n_nodes: usize| {
        let (tgrid, sgrid) = pide_grids(n_steps, n_nodes);
        let s =
            solve_pidvi(&model, &driver, &obstacle, &tgrid, &sgrid, ObstacleScheme::Projection, 3)
                .unwrap();
        viscosity_residual(&s, &model, &driver, &obstacle).unwrap().sup_norm
    };
    // One simultaneous halving of (dt, dx) from the criterion-2 lattice:
    // 400 -> 799 nodes exactly halves dx.
    let coarse = sup_at(200, 400);
    let fine = sup_at(400, 799);
    let ratio = coarse / fine;

    // Constant benchmark: residual vanishes off the obstacle band.
    let cmodel = gbm_model();
    let cdriver = FullDriver::scalar(DriverSpec::discount(RHO));
    let cobstacle = ObstacleSpec::constant(1.0, HORIZON);
    let (tgrid, sgrid) = pide_grids(100, 200);
    let csurf = solve_pidvi(
        &cmodel, &cdriver, &cobstacle, &tgrid, &sgrid, ObstacleScheme::Projection, 3,
    )
    .unwrap();
    let constant_sup = viscosity_residual(&csurf, &cmodel, &cdriver, &cobstacle)
        .unwrap()
        .sup_norm;

    let pass = ratio >= 1.5 && constant_sup <= 1e-10;
    println!(
        "criterion 3 (viscosity residual): {} — sup {coarse:.3e} -> {fine:.3e} (ratio {ratio:.2} >= 1.5), constant benchmark sup {constant_sup:.1e} <= 1e-10",
        if pass { "PASS" } else { "FAIL" },
    );
    assert!(ratio >= 1.5, "refinement ratio {ratio}");
    assert!(constant_sup <= 1e-10, "constant-benchmark residual {constant_sup}");
}

#[test]
fn criterion_4_structural_invariants_exact() {
    // Monte Carlo side, on the criterion-2 problem.
    let model = merton_model();
    let driver = mixed_driver();
    let obstacle = put_obstacle();
    let grid = TimeGrid::new(0.0, HORIZON, 50).unwrap();
    let bundle = simulate(&model, 0.0, SPOT, &grid, 20_000, 42).unwrap();
    let sol = solve_rbsde(&driver, &model, &bundle, &obstacle, &RegressionBasis::piecewise_default(), 3)
        .unwrap();
    let st = sol.structural.expect("reflected solves carry structural checks");

    // Deterministic side, criterion-1 and criterion-2 problems.
    let (tgrid, sgrid) = pide_grids(200, 400);
    let surface =
        solve_pidvi(&model, &driver, &obstacle, &tgrid, &sgrid, ObstacleScheme::Projection, 3)
            .unwrap();
    let pst = check_structural(&surface, &obstacle);

    let pass = st.terminal_exact
        && st.max_obstacle_violation <= 1e-12
        && st.min_a_increment >= 0.0
        && st.max_skorokhod_product <= TOL_SKOROKHOD
        && pst.terminal_exact
        && pst.max_obstacle_violation <= 1e-12;
    println!(
        "criterion 4 (structural invariants): {} — mc: terminal_exact {}, obstacle violation {:.1e}, min a {:.1e}, skorokhod {:.1e}; pide: terminal_exact {}, violation {:.1e}",
        if pass { "PASS" } else { "FAIL" },
        st.terminal_exact,
        st.max_obstacle_violation,
        st.min_a_increment,
        st.max_skorokhod_product,
        pst.terminal_exact,
        pst.max_obstacle_violation,
    );
    assert!(st.terminal_exact);
    assert!(st.max_obstacle_violation <= 1e-12);
    assert!(st.min_a_increment >= 0.0);
    assert!(st.max_skorokhod_product <= TOL_SKOROKHOD);
    assert!(pst.terminal_exact);
    assert!(pst.max_obstacle_violation <= 1e-12);
}

#[test]
fn criterion_5_apriori_estimate_twenty_seeds() {
    let start = Instant::now();
    let model = gbm_model();
    let constants = EstimateConstants::tight(1.2).unwrap();
    let mut all_pass = true;
    for seed in 0..20u64 {
        // Seeded bounded perturbations of driver and obstacle.
        let amp = 0.02 + 0.08 * ((seed as f64) * 0.37).fract();
        let w = 1.0 + (seed % 5) as f64;
        let shift = 0.1 * ((seed as f64) * 0.61).fract();
        let d2 = DriverSpec::discount(RHO);
        let base = d2.f_bar.clone();
        let d1 = DriverSpec {
            f_bar: Arc::new(move |t, x, y, z, l| {
                base(t, x, y, z, l) + amp * (w * (y + 0.5 * z + 0.25 * l) + x).cos()
            }),
            gamma: d2.gamma.clone(),
            lipschitz_c: 1.2,
            monotone_r: 0.0,
            growth_p: 0,
        };
        let h1: PayoffFn = Arc::new(move |_, x: f64| (STRIKE - x).max(0.0) + shift);
        let g1: ScalarFn = Arc::new(move |x: f64| (STRIKE - x).max(0.0) + shift);
        let ob1 = ObstacleSpec::new(h1, g1, HORIZON, 1, 2.0, true, (0.0, 3.0)).unwrap();
        let ob2 = put_obstacle();
        let mc = McParams::new(2000, 25, 9000 + seed);
        let r = apriori_gap_check(
            &model,
            &FullDriver::scalar(d1),
            &FullDriver::scalar(d2),
            &ob1,
            &ob2,
            0.0,
            SPOT,
            &constants,
            &mc,
        )
        .unwrap();
        if !r.pass {
            all_pass = false;
            eprintln!("seed {seed} failed: {r}");
        }
    }
    let elapsed = start.elapsed();
    let pass = all_pass && elapsed.as_secs_f64() < 300.0;
    println!(
        "criterion 5 (a-priori estimate, 20 seeds): {} — all inequalities hold, runtime {elapsed:?} < 5 min",
        if pass { "PASS" } else { "FAIL" },
    );
    assert!(all_pass);
    assert!(elapsed.as_secs_f64() < 300.0, "too slow: {elapsed:?}");
}

#[test]
fn criterion_6_strict_comparison_scaling() {
    // Main case: discounting driver, put terminal position.
    let model = gbm_model();
    let driver = FullDriver::scalar(DriverSpec::discount(RHO));
    let mc = McParams::new(10_000, 25, 42);
    let r = strict_comparison_check(
        &driver,
        0.1,
        |x| (STRIKE - x).max(0.0),
        &model,
        0.0,
        SPOT,
        &mc,
    )
    .unwrap();
    // r.gap corresponds to eps = 0.1, r.gap_half to eps = 0.05.
    let ratio = r.gap / r.gap_half;
    let positive = r.gap > 3.0 * r.gap_stderr && r.gap_half > 3.0 * r.gap_half_stderr;

    // Trivial closed form: f2 = 0, terminal 0 gives gap = eps (T - t0).
    let zero_driver = FullDriver::scalar(DriverSpec::zero());
    let r0 = strict_comparison_check(&zero_driver, 0.1, |_| 0.0, &model, 0.0, SPOT, &mc).unwrap();
    let exact = 0.1 * HORIZON;
    let exact_ok = (r0.gap - exact).abs() <= 1e-12;

    let pass = (1.6..=2.4).contains(&ratio) && positive && exact_ok;
    println!(
        "criterion 6 (strict comparison): {} — gap(0.1)/gap(0.05) = {ratio:.3} in [1.6, 2.4], gaps positive beyond 3 se, zero-driver gap {:.2e} = eps*T within 1e-12",
        if pass { "PASS" } else { "FAIL" },
        (r0.gap - exact).abs(),
    );
    assert!((1.6..=2.4).contains(&ratio), "ratio {ratio}");
    assert!(positive, "gaps not positive beyond noise: {r}");
    assert!(exact_ok, "zero-driver gap {} vs {exact}", r0.gap);
}

#[test]
fn criterion_7_risk_measure_monotonicity() {
    let model = gbm_model();
    let driver = mixed_driver();
    let mc = McParams::new(4000, 20, 42);
    let report =
        monotonicity_suite(&driver, &model, 0.0, SPOT, HORIZON, 20, 4242, &mc).unwrap();
    println!(
        "criterion 7 (risk-measure monotonicity): {} — {} ordered pairs, {} violations beyond 3 se",
        if report.pass { "PASS" } else { "FAIL" },
        report.cases.len(),
        report.violations,
    );
    assert_eq!(report.violations, 0, "{report}");
}

#[test]
fn criterion_8_growth_and_boundedness() {
    // Bounded benchmark: |h| <= 0.8, g = 1, f = 0 (declared Lipschitz
    // constant 1 for the growth constant).
    let model = gbm_model();
    let driver = FullDriver::scalar(DriverSpec::zero());
    let h: PayoffFn = Arc::new(|_, x: f64| 0.5 + 0.3 * x.cos());
    let g: ScalarFn = Arc::new(|_| 1.0);
    let obstacle = ObstacleSpec::new(h, g, HORIZON, 0, 1.0, true, (0.0, 3.0)).unwrap();

    // Deterministic surface: sup over the whole lattice.
    let (tgrid, sgrid) = pide_grids(100, 200);
    let surface =
        solve_pidvi(&model, &driver, &obstacle, &tgrid, &sgrid, ObstacleScheme::Projection, 3)
            .unwrap();
    let mut sup_u = 0.0_f64;
    for k in 0..=100 {
        for j in 0..200 {
            sup_u = sup_u.max(surface.value(k, j).abs());
        }
    }
    // sup hbar = 1 (g = 1 dominates h <= 0.8): with f = 0 the scheme is
    // a max-preserving convex combination, so u <= sup hbar exactly.
    let sup_hbar = 1.0;
    let max_principle_ok = sup_u <= sup_hbar + 1e-12;

    // Probabilistic growth bound with the estimated right side.
    let problem = ProblemInstance { model, driver, obstacle, t0: 0.0, x0: SPOT };
    let probe_grid = ProbeGrid { t_range: (0.0, 0.2), x_range: (0.5, 1.8), nt: 2, nx: 2 };
    let mc = McParams::new(3000, 20, 42);
    let report = growth_and_continuity_check(&problem, &probe_grid, &mc).unwrap();
    let kct_bound = (k_ct(1.0, HORIZON) * 1.0).sqrt(); // rhs >= sup hbar^2 = 1
    let bound_ok = sup_u <= kct_bound;

    let pass = max_principle_ok && bound_ok && report.pass;
    println!(
        "criterion 8 (growth/boundedness): {} — sup|u| = {sup_u:.6} <= sup hbar = 1 (exact, f = 0) and <= K^(1/2) rhs^(1/2) = {kct_bound:.3}; probe report: growth {}, continuity {}, bounded {:?}",
        if pass { "PASS" } else { "FAIL" },
        report.growth_pass,
        report.continuity_pass,
        report.bounded_pass,
    );
    assert!(max_principle_ok, "sup |u| = {sup_u} exceeds sup hbar");
    assert!(bound_ok, "sup |u| = {sup_u} exceeds {kct_bound}");
    assert!(report.pass, "{report}");
}

#[test]
fn criterion_9_reproducibility_across_thread_counts() {
    let dir = std::env::temp_dir().join(format!("obstop-accept9-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    let spec_path = dir.join("spec.conf");
    fs::write(
        &spec_path,
        r#"
[model]
preset = merton-two-point
rate = 0.06
sigma = 0.2
jump_size = 0.1
jump_intensity = 2.0

[driver]
preset = mixed
rho = 0.06
kappa = 0.1
jump_weight = 0.05

[obstacle]
h = put 1.0
g = put 1.0

[problem]
horizon = 0.5
x0 = 1.0
x_min = 0.0
x_max = 3.0

[discretization]
n_nodes = 200
n_steps = 100
mc_steps = 25
n_paths = 20000
seed = 42
"#,
    )
    .unwrap();
    for (threads, sub) in [("1", "run1"), ("8", "run8")] {
        let code = run_args([
            "obstop",
            "solve",
            "--spec",
            spec_path.to_str().unwrap(),
            "--engine",
            "both",
            "--out",
            dir.join(sub).to_str().unwrap(),
            "--threads",
            threads,
        ]);
        assert_eq!(code, 0, "solve failed with --threads {threads}");
    }
    let a = fs::read(dir.join("run1/surface.csv")).unwrap();
    let b = fs::read(dir.join("run8/surface.csv")).unwrap();
    let surf_ok = a == b;
    let ma = fs::read(dir.join("run1/mc_summary.txt")).unwrap();
    let mb = fs::read(dir.join("run8/mc_summary.txt")).unwrap();
    let mc_ok = ma == mb;
    println!(
        "criterion 9 (reproducibility): {} — surface.csv byte-identical across --threads 1/8: {surf_ok}; mc_summary.txt identical: {mc_ok}",
        if surf_ok && mc_ok { "PASS" } else { "FAIL" },
    );
    assert!(surf_ok, "surface.csv differs across thread counts");
    assert!(mc_ok, "mc_summary.txt differs across thread counts");
}
