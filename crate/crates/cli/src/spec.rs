//! Problem-spec files: a flat, sectioned `key = value` format.
//!
//! ```text
//! # American put benchmark
//! [model]
//! preset = gbm
//! rate = 0.06
//! sigma = 0.2
//!
//! [driver]
//! preset = discount
//! rho = 0.06
//!
//! [obstacle]
//! h = put 1.0
//! g = put 1.0
//!
//! [problem]
//! t0 = 0.0
//! horizon = 0.5
//! x0 = 1.0
//! x_min = 0.0
//! x_max = 3.0
//!
//! [discretization]
//! n_nodes = 400
//! n_steps = 200
//! mc_steps = 50
//! n_paths = 100000
//! seed = 42
//! ```
//!
//! Unknown sections or keys, malformed lines and out-of-range values are
//! reported with their line number.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use obstop::bsde::{McParams, ObstacleSpec, PayoffFn, RegressionBasis};
use obstop::driver::{DriverSpec, FullDriver};
use obstop::model::{JumpDiffusionModel, LevyMeasure, MarkFn, ScalarFn};
use obstop::pide::{BoundaryMode, ObstacleScheme};
use obstop::validate::ProblemInstance;

#[derive(Debug)]
pub struct SpecError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for SpecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {}", self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

impl std::error::Error for SpecError {}

fn err_at(line: usize, message: impl Into<String>) -> SpecError {
    SpecError { line: Some(line), message: message.into() }
}

fn err(message: impl Into<String>) -> SpecError {
    SpecError { line: None, message: message.into() }
}

/// Raw parsed file: per section, per key, the (line, values) list in file
/// order (repeatable keys keep every occurrence).
#[derive(Debug, Default)]
struct RawSpec {
    sections: BTreeMap<String, Vec<(String, usize, String)>>,
}

const KNOWN_SECTIONS: &[&str] =
    &["model", "driver", "obstacle", "problem", "discretization", "tolerances", "validate"];

fn parse_raw(text: &str) -> Result<RawSpec, SpecError> {
    let mut raw = RawSpec::default();
    let mut section: Option<String> = None;
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| err_at(line_no, "unterminated section header"))?
                .trim()
                .to_string();
            if !KNOWN_SECTIONS.contains(&name.as_str()) {
                return Err(err_at(line_no, format!("unknown section [{name}]")));
            }
            section = Some(name);
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err_at(line_no, format!("expected `key = value`, got `{line}`")))?;
        let section = section
            .clone()
            .ok_or_else(|| err_at(line_no, "key outside of any [section]"))?;
        raw.sections.entry(section).or_default().push((
            key.trim().to_string(),
            line_no,
            value.trim().to_string(),
        ));
    }
    Ok(raw)
}

/// One section's keys with consumption tracking, so leftovers can be
/// reported as unknown keys.
struct Section {
    name: String,
    entries: Vec<(String, usize, String, std::cell::Cell<bool>)>,
}

impl Section {
    fn new(name: &str, raw: &mut RawSpec) -> Self {
        let entries = raw
            .sections
            .remove(name)
            .unwrap_or_default()
            .into_iter()
            .map(|(k, l, v)| (k, l, v, std::cell::Cell::new(false)))
            .collect();
        Self { name: name.to_string(), entries }
    }

    fn get(&self, key: &str) -> Option<(usize, &str)> {
        self.entries.iter().rev().find(|(k, ..)| k == key).map(|(_, l, v, used)| {
            used.set(true);
            (*l, v.as_str())
        })
    }

    fn get_all(&self, key: &str) -> Vec<(usize, &str)> {
        self.entries
            .iter()
            .filter(|(k, ..)| k == key)
            .map(|(_, l, v, used)| {
                used.set(true);
                (*l, v.as_str())
            })
            .collect()
    }

    fn f64_or(&self, key: &str, default: f64) -> Result<f64, SpecError> {
        match self.get(key) {
            None => Ok(default),
            Some((line, v)) => v
                .parse::<f64>()
                .map_err(|_| err_at(line, format!("`{key}` must be a number, got `{v}`"))),
        }
    }

    fn f64_required(&self, key: &str) -> Result<f64, SpecError> {
        self.get(key)
            .ok_or_else(|| err(format!("[{}] is missing required key `{key}`", self.name)))
            .and_then(|(line, v)| {
                v.parse::<f64>()
                    .map_err(|_| err_at(line, format!("`{key}` must be a number, got `{v}`")))
            })
    }

    fn usize_or(&self, key: &str, default: usize) -> Result<usize, SpecError> {
        match self.get(key) {
            None => Ok(default),
            Some((line, v)) => v
                .parse::<usize>()
                .map_err(|_| err_at(line, format!("`{key}` must be a positive integer, got `{v}`"))),
        }
    }

    fn u64_or(&self, key: &str, default: u64) -> Result<u64, SpecError> {
        match self.get(key) {
            None => Ok(default),
            Some((line, v)) => v
                .parse::<u64>()
                .map_err(|_| err_at(line, format!("`{key}` must be an integer, got `{v}`"))),
        }
    }

    fn bool_or(&self, key: &str, default: bool) -> Result<bool, SpecError> {
        match self.get(key) {
            None => Ok(default),
            Some((line, v)) => match v {
                "true" => Ok(true),
                "false" => Ok(false),
                _ => Err(err_at(line, format!("`{key}` must be true or false, got `{v}`"))),
            },
        }
    }

    fn check_consumed(&self) -> Result<(), SpecError> {
        for (k, l, _, used) in &self.entries {
            if !used.get() {
                return Err(err_at(*l, format!("unknown key `{k}` in [{}]", self.name)));
            }
        }
        Ok(())
    }
}

/// Discretization block shared by both engines.
#[derive(Clone, Debug)]
pub struct Discretization {
    pub n_nodes: usize,
    pub n_steps: usize,
    pub mc_steps: usize,
    pub n_paths: usize,
    pub n_quad: usize,
    pub basis: RegressionBasis,
    pub n_picard: usize,
    pub seed: u64,
    pub scheme: ObstacleScheme,
    pub boundary: BoundaryMode,
}

impl Discretization {
    pub fn mc_params(&self) -> McParams {
        McParams {
            n_paths: self.n_paths,
            n_steps: self.mc_steps,
            seed: self.seed,
            basis: self.basis.clone(),
            n_picard: self.n_picard,
        }
    }
}

/// Tolerances and probe counts of the validation checks.
#[derive(Clone, Debug)]
pub struct Tolerances {
    pub crossval: f64,
    pub crossval_probes: usize,
    pub band_tol: f64,
    pub strict_epsilon: f64,
}

/// Reduced Monte Carlo settings for the probe-heavy validation checks.
#[derive(Clone, Debug)]
pub struct ValidateParams {
    pub n_paths: usize,
    pub n_steps: usize,
    pub n_cases: usize,
    pub seed: u64,
}

/// Everything a command needs, built from one spec file.
#[derive(Debug)]
pub struct LoadedSpec {
    pub problem: ProblemInstance,
    pub disc: Discretization,
    pub tol: Tolerances,
    pub validate: ValidateParams,
    pub x_domain: (f64, f64),
    /// Raw file bytes, hashed into the manifest.
    pub source: String,
}

pub fn load_spec(path: &Path, seed_override: Option<u64>) -> Result<LoadedSpec, SpecError> {
    let source = std::fs::read_to_string(path)
        .map_err(|e| err(format!("cannot read {}: {e}", path.display())))?;
    let spec = build_spec(&source, seed_override)?;
    Ok(LoadedSpec { source, ..spec })
}

pub fn build_spec(source: &str, seed_override: Option<u64>) -> Result<LoadedSpec, SpecError> {
    build_spec_inner(source, seed_override, None)
}

/// Rebuild with a different quadrature resolution (used by the
/// convergence study along the quadrature axis).
pub fn build_spec_with_quad(source: &str, n_quad: usize) -> Result<LoadedSpec, SpecError> {
    build_spec_inner(source, None, Some(n_quad))
}

fn build_spec_inner(
    source: &str,
    seed_override: Option<u64>,
    quad_override: Option<usize>,
) -> Result<LoadedSpec, SpecError> {
    let mut raw = parse_raw(source)?;
    let model_s = Section::new("model", &mut raw);
    let driver_s = Section::new("driver", &mut raw);
    let obstacle_s = Section::new("obstacle", &mut raw);
    let problem_s = Section::new("problem", &mut raw);
    let disc_s = Section::new("discretization", &mut raw);
    let tol_s = Section::new("tolerances", &mut raw);
    let validate_s = Section::new("validate", &mut raw);

    // [problem]
    let t0 = problem_s.f64_or("t0", 0.0)?;
    let horizon = problem_s.f64_required("horizon")?;
    let x0 = problem_s.f64_required("x0")?;
    let x_min = problem_s.f64_required("x_min")?;
    let x_max = problem_s.f64_required("x_max")?;
    let time_ok = t0.is_finite() && horizon.is_finite() && horizon > t0;
    if !time_ok {
        return Err(err(format!("[problem] needs horizon > t0, got {t0} .. {horizon}")));
    }
    let domain_ok = x_min.is_finite() && x_max.is_finite() && x_min < x_max;
    if !domain_ok {
        return Err(err(format!("[problem] needs x_min < x_max, got {x_min} .. {x_max}")));
    }
    if !(x_min <= x0 && x0 <= x_max) {
        return Err(err(format!("[problem] x0 = {x0} outside [{x_min}, {x_max}]")));
    }

    // [discretization]
    let n_quad = quad_override.unwrap_or(disc_s.usize_or("n_quad", 16)?);
    let disc = Discretization {
        n_nodes: disc_s.usize_or("n_nodes", 400)?,
        n_steps: disc_s.usize_or("n_steps", 200)?,
        mc_steps: disc_s.usize_or("mc_steps", 50)?,
        n_paths: disc_s.usize_or("n_paths", 100_000)?,
        n_quad,
        basis: match disc_s.get("basis") {
            None => RegressionBasis::PiecewiseLinear { n_bins: disc_s.usize_or("basis_size", 20)? },
            Some((line, v)) => match v {
                "piecewise-linear" => {
                    RegressionBasis::PiecewiseLinear { n_bins: disc_s.usize_or("basis_size", 20)? }
                }
                "polynomial" => {
                    RegressionBasis::GlobalPolynomial { degree: disc_s.usize_or("basis_size", 4)? }
                }
                _ => return Err(err_at(line, format!("unknown basis `{v}`"))),
            },
        },
        n_picard: disc_s.usize_or("n_picard", 3)?,
        seed: seed_override.unwrap_or(disc_s.u64_or("seed", 42)?),
        scheme: match disc_s.get("scheme") {
            None => ObstacleScheme::Projection,
            Some((line, v)) => match v {
                "projection" => ObstacleScheme::Projection,
                "penalization" => ObstacleScheme::Penalization {
                    pen_param: disc_s.f64_or("pen_param", 1e4)?,
                },
                _ => return Err(err_at(line, format!("unknown scheme `{v}`"))),
            },
        },
        boundary: match disc_s.get("boundary") {
            None => BoundaryMode::DirichletObstacle,
            Some((line, v)) => match v {
                "dirichlet-obstacle" => BoundaryMode::DirichletObstacle,
                "linear-extrapolation" => BoundaryMode::LinearExtrapolation,
                _ => return Err(err_at(line, format!("unknown boundary mode `{v}`"))),
            },
        },
    };
    if disc.n_paths == 0 || disc.n_steps == 0 || disc.mc_steps == 0 || disc.n_nodes < 3 {
        return Err(err("[discretization] counts must be positive (n_nodes >= 3)"));
    }

    // [model]
    let lipschitz_c = model_s.f64_or("lipschitz_c", 1.0)?;
    let model = build_model(&model_s, lipschitz_c, horizon, n_quad)?;

    // [driver]
    let driver = build_driver(&driver_s)?;

    // [obstacle]
    let obstacle = build_obstacle(&obstacle_s, horizon, (x_min, x_max))?;

    // [tolerances]
    let tol = Tolerances {
        crossval: tol_s.f64_or("crossval", 0.02)?,
        crossval_probes: tol_s.usize_or("crossval_probes", 5)?,
        band_tol: tol_s.f64_or("band_tol", 1e-9)?,
        strict_epsilon: tol_s.f64_or("strict_epsilon", 0.1)?,
    };

    // [validate]
    let validate = ValidateParams {
        n_paths: validate_s.usize_or("n_paths", 4000)?,
        n_steps: validate_s.usize_or("n_steps", 25)?,
        n_cases: validate_s.usize_or("n_cases", 20)?,
        seed: validate_s.u64_or("seed", disc.seed)?,
    };

    for s in [&model_s, &driver_s, &obstacle_s, &problem_s, &disc_s, &tol_s, &validate_s] {
        s.check_consumed()?;
    }

    Ok(LoadedSpec {
        problem: ProblemInstance { model, driver, obstacle, t0, x0 },
        disc,
        tol,
        validate,
        x_domain: (x_min, x_max),
        source: String::new(),
    })
}

fn build_model(
    s: &Section,
    lipschitz_c: f64,
    horizon: f64,
    n_quad: usize,
) -> Result<JumpDiffusionModel, SpecError> {
    let (line, preset) = s
        .get("preset")
        .ok_or_else(|| err("[model] is missing required key `preset`"))?;
    let rate = s.f64_or("rate", 0.0)?;
    let sigma = s.f64_or("sigma", 0.2)?;
    let drift: ScalarFn = Arc::new(move |x: f64| rate * x);
    let diffusion: ScalarFn = Arc::new(move |x: f64| sigma * x);
    let proportional_jump: MarkFn = Arc::new(|x: f64, e: f64| x * e);

    let (levy, jump_size): (LevyMeasure, MarkFn) = match preset {
        "gbm" => (LevyMeasure::none(), Arc::new(|_, _| 0.0)),
        "merton-two-point" => {
            let size = s.f64_or("jump_size", 0.1)?;
            let intensity = s.f64_or("jump_intensity", 2.0)?;
            if size == 0.0 || intensity <= 0.0 {
                return Err(err("[model] merton-two-point needs jump_size != 0 and jump_intensity > 0"));
            }
            (
                LevyMeasure::from_atoms(&[(-size, intensity / 2.0), (size, intensity / 2.0)])
                    .map_err(|e| err(format!("[model] {e}")))?,
                proportional_jump,
            )
        }
        "uniform-jumps" => {
            let lo = s.f64_required("jump_support_min")?;
            let hi = s.f64_required("jump_support_max")?;
            let intensity = s.f64_or("jump_intensity", 1.0)?;
            let width = hi - lo;
            if width <= 0.0 || intensity <= 0.0 {
                return Err(err("[model] uniform-jumps needs jump_support_min < jump_support_max and jump_intensity > 0"));
            }
            let density = intensity / width;
            (
                LevyMeasure::from_density(|_| density, (lo, hi), n_quad)
                    .map_err(|e| err(format!("[model] {e}")))?,
                proportional_jump,
            )
        }
        "custom-table" => {
            let mut parts: Vec<LevyMeasure> = Vec::new();
            let atom_rows = s.get_all("atom");
            if !atom_rows.is_empty() {
                let mut atoms = Vec::new();
                for (line, v) in atom_rows {
                    let fields: Vec<&str> = v.split_whitespace().collect();
                    if fields.len() != 2 {
                        return Err(err_at(line, format!("`atom` needs `mark weight`, got `{v}`")));
                    }
                    let mark: f64 = fields[0]
                        .parse()
                        .map_err(|_| err_at(line, "atom mark must be a number"))?;
                    let weight: f64 = fields[1]
                        .parse()
                        .map_err(|_| err_at(line, "atom weight must be a number"))?;
                    atoms.push((mark, weight));
                }
                parts.push(
                    LevyMeasure::from_atoms(&atoms).map_err(|e| err(format!("[model] {e}")))?,
                );
            }
            let density_rows = s.get_all("density_point");
            if !density_rows.is_empty() {
                parts.push(density_table(density_rows, n_quad)?);
            }
            if parts.is_empty() {
                return Err(err("[model] custom-table needs `atom` or `density_point` rows"));
            }
            let levy = parts
                .into_iter()
                .reduce(|a, b| LevyMeasure::union(&a, &b))
                .expect("nonempty");
            (levy, proportional_jump)
        }
        other => return Err(err_at(line, format!("unknown model preset `{other}`"))),
    };

    JumpDiffusionModel::new(drift, diffusion, jump_size, levy, lipschitz_c, horizon)
        .map_err(|e| err(format!("[model] {e}")))
}

/// Tabulated density rows `density_point = mark value`: piecewise-linear
/// density, discretized per sign-homogeneous support piece.
fn density_table(rows: Vec<(usize, &str)>, n_quad: usize) -> Result<LevyMeasure, SpecError> {
    let mut pts: Vec<(f64, f64)> = Vec::new();
    for (line, v) in rows {
        let fields: Vec<&str> = v.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(err_at(line, format!("`density_point` needs `mark value`, got `{v}`")));
        }
        let mark: f64 =
            fields[0].parse().map_err(|_| err_at(line, "density mark must be a number"))?;
        let val: f64 =
            fields[1].parse().map_err(|_| err_at(line, "density value must be a number"))?;
        if mark == 0.0 {
            return Err(err_at(line, "density mark must be nonzero"));
        }
        let val_ok = val.is_finite() && val >= 0.0;
        if !val_ok {
            return Err(err_at(line, "density value must be nonnegative"));
        }
        pts.push((mark, val));
    }
    pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let interp = move |pts: Vec<(f64, f64)>| -> Option<LevyMeasure> {
        if pts.len() < 2 {
            return None;
        }
        let lo = pts[0].0;
        let hi = pts[pts.len() - 1].0;
        let f = move |e: f64| -> f64 {
            let i = pts.partition_point(|p| p.0 < e).clamp(1, pts.len() - 1);
            let (x0, y0) = pts[i - 1];
            let (x1, y1) = pts[i];
            y0 + (y1 - y0) * (e - x0) / (x1 - x0)
        };
        LevyMeasure::from_density(f, (lo, hi), n_quad).ok()
    };
    let neg: Vec<(f64, f64)> = pts.iter().copied().filter(|p| p.0 < 0.0).collect();
    let pos: Vec<(f64, f64)> = pts.iter().copied().filter(|p| p.0 > 0.0).collect();
    let parts: Vec<LevyMeasure> =
        [interp(neg), interp(pos)].into_iter().flatten().collect();
    parts
        .into_iter()
        .reduce(|a, b| LevyMeasure::union(&a, &b))
        .ok_or_else(|| err("density table needs at least two points on one side of zero"))
}

fn build_driver(s: &Section) -> Result<FullDriver, SpecError> {
    let (line, preset) = s
        .get("preset")
        .ok_or_else(|| err("[driver] is missing required key `preset`"))?;
    let rho = s.f64_or("rho", 0.0)?;
    let kappa = s.f64_or("kappa", 0.0)?;
    let a = s.f64_or("jump_weight", 0.0)?;
    let spec = match preset {
        "zero" => DriverSpec::zero(),
        "discount" => DriverSpec::discount(rho),
        "ambiguity" => DriverSpec::ambiguity(rho, kappa),
        "jump-sensitive" => DriverSpec::jump_sensitive(rho, a),
        "mixed" => DriverSpec::mixed(rho, kappa, a),
        other => return Err(err_at(line, format!("unknown driver preset `{other}`"))),
    };
    Ok(FullDriver::scalar(spec))
}

fn payoff_from(
    value: &str,
    line: usize,
) -> Result<(PayoffFn, ScalarFn, f64, bool), SpecError> {
    let fields: Vec<&str> = value.split_whitespace().collect();
    match fields.as_slice() {
        ["put", k] => {
            let strike: f64 =
                k.parse().map_err(|_| err_at(line, "put strike must be a number"))?;
            let h: PayoffFn = Arc::new(move |_, x: f64| (strike - x).max(0.0));
            let g: ScalarFn = Arc::new(move |x: f64| (strike - x).max(0.0));
            Ok((h, g, strike.abs().max(1.0), true))
        }
        ["call", k] => {
            let strike: f64 =
                k.parse().map_err(|_| err_at(line, "call strike must be a number"))?;
            let h: PayoffFn = Arc::new(move |_, x: f64| (x - strike).max(0.0));
            let g: ScalarFn = Arc::new(move |x: f64| (x - strike).max(0.0));
            Ok((h, g, strike.abs().max(1.0), false))
        }
        ["constant", c] => {
            let c: f64 = c.parse().map_err(|_| err_at(line, "constant must be a number"))?;
            let h: PayoffFn = Arc::new(move |_, _| c);
            let g: ScalarFn = Arc::new(move |_| c);
            Ok((h, g, c.abs().max(1.0), true))
        }
        _ => Err(err_at(
            line,
            format!("payoff must be `put K`, `call K` or `constant c`, got `{value}`"),
        )),
    }
}

fn build_obstacle(
    s: &Section,
    horizon: f64,
    domain: (f64, f64),
) -> Result<ObstacleSpec, SpecError> {
    let (h_line, h_val) =
        s.get("h").ok_or_else(|| err("[obstacle] is missing required key `h`"))?;
    let (g_line, g_val) =
        s.get("g").ok_or_else(|| err("[obstacle] is missing required key `g`"))?;
    let (h, _, hc, h_bounded) = payoff_from(h_val, h_line)?;
    let (_, g, gc, g_bounded) = payoff_from(g_val, g_line)?;
    let bounded = s.bool_or("bounded", h_bounded && g_bounded)?;
    let growth_p = s.usize_or("growth_p", 1)? as u32;
    let growth_c = s.f64_or("growth_c", hc.max(gc))?;
    ObstacleSpec::new(h, g, horizon, growth_p, growth_c, bounded, domain)
        .map_err(|e| err(format!("[obstacle] {e}")))
}
