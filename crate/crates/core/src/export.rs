//! CSV and report emission.
//!
//! All floating-point fields are written with 17 significant digits so
//! files round-trip bit-exactly and golden comparisons are byte-stable.

use std::io::{self, Write};

use crate::bsde::{ObstacleSpec, RbsdeSolution};
use crate::paths::PathBundle;
use crate::pide::{ExerciseRegion, ValueSurface};

/// 17-significant-digit decimal rendering (round-trip exact for f64).
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// `surface.csv`: one row per lattice point with the obstacle value and
/// the exercise flag.
pub fn write_surface_csv<W: Write>(
    w: &mut W,
    surface: &ValueSurface,
    obstacle: &ObstacleSpec,
    region: &ExerciseRegion,
) -> io::Result<()> {
    writeln!(w, "t,x,u,h,in_region")?;
    let n = surface.tgrid.n_steps();
    let m = surface.sgrid.n_nodes;
    for k in 0..=n {
        let t = surface.tgrid.point(k);
        let row = &region.intervals[k];
        for j in 0..m {
            let x = surface.sgrid.nodes[j];
            let in_region = row.iter().any(|&(a, b)| a <= j && j <= b);
            writeln!(
                w,
                "{},{},{},{},{}",
                fmt_f64(t),
                fmt_f64(x),
                fmt_f64(surface.value(k, j)),
                fmt_f64(obstacle.h_bar(t, x)),
                u8::from(in_region)
            )?;
        }
    }
    Ok(())
}

/// `boundary.csv`: one row per exercise interval per time index.
pub fn write_boundary_csv<W: Write>(
    w: &mut W,
    surface: &ValueSurface,
    region: &ExerciseRegion,
) -> io::Result<()> {
    writeln!(w, "step,t,x_lower,x_upper")?;
    for (k, row) in region.intervals.iter().enumerate() {
        let t = surface.tgrid.point(k);
        for &(a, b) in row {
            writeln!(
                w,
                "{},{},{},{}",
                k,
                fmt_f64(t),
                fmt_f64(surface.sgrid.nodes[a]),
                fmt_f64(surface.sgrid.nodes[b])
            )?;
        }
    }
    Ok(())
}

/// `paths.csv`: the simulated states, one row per (path, step).
pub fn write_paths_csv<W: Write>(w: &mut W, bundle: &PathBundle) -> io::Result<()> {
    writeln!(w, "path,step,time,state")?;
    for p in 0..bundle.n_paths {
        for k in 0..=bundle.grid.n_steps() {
            writeln!(
                w,
                "{},{},{},{}",
                p,
                k,
                fmt_f64(bundle.grid.point(k)),
                fmt_f64(bundle.states.get(p, k))
            )?;
        }
    }
    Ok(())
}

/// Structured summary record of a reflected Monte Carlo solve.
pub fn write_mc_summary<W: Write>(w: &mut W, sol: &RbsdeSolution) -> io::Result<()> {
    writeln!(w, "value = {}", fmt_f64(sol.value_at_origin))?;
    writeln!(w, "stderr = {}", fmt_f64(sol.stderr))?;
    writeln!(w, "mean_stop_time = {}", fmt_f64(sol.mean_stop_time()))?;
    writeln!(w, "fraction_stopped_early = {}", fmt_f64(sol.fraction_stopped_early()))?;
    writeln!(w, "picard_warnings = {}", sol.warnings.len())?;
    if let Some(st) = &sol.structural {
        writeln!(w, "max_obstacle_violation = {}", fmt_f64(st.max_obstacle_violation))?;
        writeln!(w, "min_a_increment = {}", fmt_f64(st.min_a_increment))?;
        writeln!(w, "max_skorokhod_product = {}", fmt_f64(st.max_skorokhod_product))?;
        writeln!(w, "terminal_exact = {}", st.terminal_exact)?;
    }
    Ok(())
}

/// One row of a convergence study.
#[derive(Clone, Debug)]
pub struct ConvergenceRow {
    pub level: usize,
    pub parameter: f64,
    pub value_at_probe: f64,
    pub diff_from_finest: f64,
    pub runtime_ms: u128,
}

pub fn write_convergence_csv<W: Write>(
    w: &mut W,
    rows: &[ConvergenceRow],
    slope: f64,
) -> io::Result<()> {
    writeln!(w, "level,parameter,value_at_probe,diff_from_finest,runtime_ms")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.level,
            fmt_f64(r.parameter),
            fmt_f64(r.value_at_probe),
            fmt_f64(r.diff_from_finest),
            r.runtime_ms
        )?;
    }
    writeln!(w, "# loglog_slope = {}", fmt_f64(slope))?;
    Ok(())
}
