//! Line-oriented scenario configuration.
//!
//! Each non-empty line is `section.key = value`; `#` starts a comment. A key
//! given twice keeps the later value, so a preset can be refined by
//! appending lines. Every problem is reported with its line number.
//!
//! Numbers may carry a unit word: `model.total_mass = 0.9 critical`,
//! `time.t_end = 2 bound`, `output.r_probe = 0.05 r0`.

use std::collections::BTreeMap;
use std::path::PathBuf;

use crate::error::ConfigErrors;
use crate::evolution::DriftMode;
use crate::radial::{Coefficients, RadialFunction};

/// A total mass, absolute or as a multiple of the critical mass
/// `a_min^{d/2}·M_c⋆`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MassSpec {
    Absolute(f64),
    Critical(f64),
}

/// End of the time horizon, in original time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Horizon {
    Absolute(f64),
    /// Multiple of the blow-up time bound `μ^{2/d−1}T⋆`.
    Bound(f64),
    /// Multiple of the barrier collapse time, converted to original time.
    Collapse(f64),
    /// Multiple of `σR^d/(d·a_min·M)` for the fitted supersolution radius.
    Characteristic(f64),
}

/// Radius of the mass probe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProbeSpec {
    Absolute(f64),
    /// Multiple of the barrier radius `R₀`.
    BarrierRadius(f64),
    /// Multiple of `r_max`.
    DomainRadius(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DriftChoice {
    /// Closed form when `γ ≡ 0`, field solve otherwise.
    Auto,
    Fixed(DriftMode),
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialData {
    /// Extremal profile at `radius` (default `R₀`) carrying the total mass.
    BarrierScaled { radius: Option<f64> },
    /// `exp(−r²/w²)`, normalized to the total mass.
    GaussianBump { width: f64 },
    /// Uniform density on `[inner, outer]`.
    Annulus { inner: f64, outer: f64 },
    /// Uniform ball of radius `spike_radius` plus a uniform shell.
    SpikePlusShell {
        spike_radius: f64,
        spike_mass: MassSpec,
        shell_inner: f64,
        shell_outer: f64,
        shell_mass: MassSpec,
    },
    /// Density knots `(r, u)`, linear in between and zero beyond the last,
    /// rescaled to the total mass when one is given.
    Table { knots: Vec<(f64, f64)> },
    /// Porous-medium self-similar solution at time `t0`.
    Barenblatt { c: f64, t0: f64 },
}

impl InitialData {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Self::BarrierScaled { .. } => "barrier_scaled",
            Self::GaussianBump { .. } => "gaussian_bump",
            Self::Annulus { .. } => "annulus",
            Self::SpikePlusShell { .. } => "spike_plus_shell",
            Self::Table { .. } => "table",
            Self::Barenblatt { .. } => "barenblatt",
        }
    }

    /// Whether the data family is scaled by `model.total_mass`.
    pub fn takes_total_mass(&self) -> bool {
        !matches!(self, Self::SpikePlusShell { .. } | Self::Barenblatt { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSection {
    pub d: usize,
    pub total_mass: Option<MassSpec>,
    pub mu: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSection {
    pub r_max: f64,
    pub n_cells: usize,
    /// Ratio of the outermost to the innermost cell width; 1 is uniform.
    pub grading: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSection {
    pub t_end: Horizon,
    pub cfl: f64,
    pub dt_min: f64,
    /// Absolute density threshold; overrides `blowup_factor`.
    pub u_blowup: Option<f64>,
    /// Threshold as a multiple of the initial peak density.
    pub blowup_factor: f64,
    pub drift: DriftChoice,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BarrierSection {
    pub r0: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SupersolutionSection {
    /// First radius tried when fitting; halved until the data is ordered.
    pub start_radius: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSection {
    pub path: Option<PathBuf>,
    pub cadence: usize,
    pub r_probe: ProbeSpec,
    pub track_energy: bool,
}

/// A fully validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub model: ModelSection,
    pub coefficients: Coefficients,
    pub grid: GridSection,
    pub time: TimeSection,
    pub initial: InitialData,
    pub barrier: Option<BarrierSection>,
    pub supersolution: Option<SupersolutionSection>,
    pub output: OutputSection,
}

/// Every accepted key with a one-line description, in documentation order.
pub const KEYS: &[(&str, &str)] = &[
    ("scenario.name", "label used for the default CSV file name (default: scenario)"),
    ("model.d", "dimension, at least 3 (required)"),
    ("model.total_mass", "total mass, absolute or `x critical` (default: 0.9 critical)"),
    ("model.mu", "mass ratio of the rescaled frame in (0, 1] (default: 1, or M_c/M0 with a barrier)"),
    ("coefficients.a", "`c`, `poly c0 c1 ...` or `table r:a r:a ...` (default: 1)"),
    ("coefficients.a_clamp", "`lo hi` bounds applied to a"),
    ("coefficients.gamma", "same syntax as a (default: 0)"),
    ("coefficients.gamma_clamp", "`lo hi` bounds applied to gamma"),
    ("coefficients.monotone_radius", "require a nondecreasing on [0, value]"),
    ("grid.r_max", "outer radius (default: 2)"),
    ("grid.n_cells", "number of cells (default: 200)"),
    ("grid.grading", "outer to inner cell width ratio (default: 1)"),
    ("time.t_end", "horizon: absolute, `x bound`, `x collapse` or `x characteristic` (default: 1)"),
    ("time.cfl", "step safety factor in (0, 1] (default: 0.4)"),
    ("time.dt_min", "smallest admissible step (default: 1e-12)"),
    ("time.u_blowup", "absolute blow-up density threshold"),
    ("time.blowup_factor", "blow-up threshold as a multiple of the initial peak (default: 1e6)"),
    ("time.drift", "auto, closed, field or off (default: auto)"),
    ("initial.kind", "barrier_scaled, gaussian_bump, annulus, spike_plus_shell, table or barenblatt (default: gaussian_bump)"),
    ("initial.radius", "barrier_scaled: profile radius (default: barrier.r0)"),
    ("initial.width", "gaussian_bump: width (default: 0.25)"),
    ("initial.inner", "annulus: inner radius"),
    ("initial.outer", "annulus: outer radius"),
    ("initial.spike_radius", "spike_plus_shell: spike radius"),
    ("initial.spike_mass", "spike_plus_shell: spike mass, absolute or `x critical`"),
    ("initial.shell_inner", "spike_plus_shell: shell inner radius"),
    ("initial.shell_outer", "spike_plus_shell: shell outer radius"),
    ("initial.shell_mass", "spike_plus_shell: shell mass, absolute or `x critical`"),
    ("initial.table", "table: density knots `r:u r:u ...`"),
    ("initial.c", "barenblatt: constant C (default: 1)"),
    ("initial.t0", "barenblatt: starting time (default: 1)"),
    ("barrier.r0", "collapsing barrier radius R0; enables the barrier monitor"),
    ("supersolution.start_radius", "first radius of the fitted fixed supersolution; enables its monitor"),
    ("output.path", "CSV file (default: <scenario.name>.csv)"),
    ("output.cadence", "steps between rows (default: 100)"),
    ("output.r_probe", "mass probe radius: absolute, `x r0` or `x r_max` (default: 0.05 r0, else 0.05 r_max)"),
    ("output.track_energy", "check the free energy after every step (default: false)"),
];

struct Entry {
    line: usize,
    value: String,
}

struct Reader {
    entries: BTreeMap<String, Entry>,
    errors: ConfigErrors,
}

fn split_unit(value: &str) -> (&str, Option<&str>) {
    let mut parts = value.split_whitespace();
    let number = parts.next().unwrap_or("");
    (number, parts.next())
}

impl Reader {
    fn new(text: &str) -> Self {
        let mut entries = BTreeMap::new();
        let mut errors = ConfigErrors::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                errors.push(line, format!("expected `section.key = value`, found `{content}`"));
                continue;
            };
            let (key, value) = (key.trim(), value.trim());
            if !key.contains('.') {
                errors.push(line, format!("key `{key}` has no section"));
                continue;
            }
            if !KEYS.iter().any(|(k, _)| *k == key) {
                errors.push(line, format!("unknown key `{key}`"));
                continue;
            }
            if value.is_empty() {
                errors.push(line, format!("`{key}` has no value"));
                continue;
            }
            entries.insert(
                key.to_string(),
                Entry {
                    line,
                    value: value.to_string(),
                },
            );
        }
        Self { entries, errors }
    }

    fn has_section(&self, section: &str) -> bool {
        self.entries.keys().any(|k| k.split('.').next() == Some(section))
    }

    fn line(&self, key: &str) -> usize {
        self.entries.get(key).map_or(0, |e| e.line)
    }

    fn raw(&self, key: &str) -> Option<(usize, &str)> {
        self.entries.get(key).map(|e| (e.line, e.value.as_str()))
    }

    fn number(&mut self, key: &str) -> Option<f64> {
        let (line, value) = self.raw(key)?;
        match value.parse::<f64>() {
            Ok(x) if x.is_finite() => Some(x),
            _ => {
                self.errors.push(line, format!("`{key}` must be a finite number (got `{value}`)"));
                None
            }
        }
    }

    /// Number checked against a predicate, reporting `rule` on failure.
    fn checked(&mut self, key: &str, default: Option<f64>, ok: impl Fn(f64) -> bool, rule: &str) -> Option<f64> {
        let line = self.line(key);
        let value = self.number(key).or(default)?;
        if ok(value) {
            Some(value)
        } else {
            self.errors.push(line, format!("{key} {rule} (got {value})"));
            None
        }
    }

    fn positive(&mut self, key: &str, default: Option<f64>) -> Option<f64> {
        self.checked(key, default, |x| x > 0.0, "must be positive")
    }

    fn required_positive(&mut self, key: &str, what: &str) -> Option<f64> {
        if self.raw(key).is_none() {
            self.errors.push(0, format!("{what} requires `{key}`"));
            return None;
        }
        self.positive(key, None)
    }

    fn with_unit(&mut self, key: &str, units: &[&str]) -> Option<(f64, Option<String>)> {
        let (line, value) = self.raw(key)?;
        let (number, unit) = split_unit(value);
        let unit = unit.map(str::to_string);
        if value.split_whitespace().count() > 2 {
            self.errors.push(line, format!("`{key}` takes a number and at most one unit (got `{value}`)"));
            return None;
        }
        let x = match number.parse::<f64>() {
            Ok(x) if x.is_finite() => x,
            _ => {
                self.errors.push(line, format!("`{key}` must start with a finite number (got `{value}`)"));
                return None;
            }
        };
        if let Some(u) = &unit {
            if !units.contains(&u.as_str()) {
                self.errors.push(
                    line,
                    format!("unknown unit `{u}` for `{key}`; expected one of: {}", units.join(", ")),
                );
                return None;
            }
        }
        Some((x, unit))
    }

    fn mass_spec(&mut self, key: &str) -> Option<MassSpec> {
        let line = self.line(key);
        let (x, unit) = self.with_unit(key, &["critical"])?;
        if !(x > 0.0) {
            self.errors.push(line, format!("{key} must be positive (got {x})"));
            return None;
        }
        Some(match unit {
            Some(_) => MassSpec::Critical(x),
            None => MassSpec::Absolute(x),
        })
    }

    fn function(&mut self, key: &str, clamp_key: &str, default: f64) -> Option<RadialFunction> {
        let base = match self.raw(key) {
            None => RadialFunction::Constant(default),
            Some((line, value)) => {
                let value = value.to_string();
                parse_function(&value).map_err(|m| self.errors.push(line, format!("{key}: {m}"))).ok()?
            }
        };
        match self.raw(clamp_key) {
            None => Some(base),
            Some((line, value)) => {
                let bounds: Vec<Option<f64>> = value.split_whitespace().map(|t| t.parse().ok()).collect();
                match bounds.as_slice() {
                    [Some(lo), Some(hi)] if lo <= hi => Some(RadialFunction::clamped(base, *lo, *hi)),
                    _ => {
                        self.errors.push(line, format!("{clamp_key} must be two numbers `lo hi` with lo ≤ hi"));
                        None
                    }
                }
            }
        }
    }
}

fn parse_knots(tokens: &[&str]) -> std::result::Result<Vec<(f64, f64)>, String> {
    tokens
        .iter()
        .map(|t| {
            let (r, v) = t.split_once(':').ok_or_else(|| format!("knot `{t}` is not `r:value`"))?;
            let r: f64 = r.parse().map_err(|_| format!("knot radius `{r}` is not a number"))?;
            let v: f64 = v.parse().map_err(|_| format!("knot value `{v}` is not a number"))?;
            Ok((r, v))
        })
        .collect()
}

fn parse_function(value: &str) -> std::result::Result<RadialFunction, String> {
    let tokens: Vec<&str> = value.split_whitespace().collect();
    match tokens.as_slice() {
        [single] => single
            .parse::<f64>()
            .map(RadialFunction::Constant)
            .map_err(|_| format!("`{single}` is not a number")),
        ["poly", coeffs @ ..] if !coeffs.is_empty() => coeffs
            .iter()
            .map(|c| c.parse::<f64>().map_err(|_| format!("coefficient `{c}` is not a number")))
            .collect::<std::result::Result<Vec<_>, _>>()
            .map(RadialFunction::Polynomial),
        ["table", knots @ ..] if !knots.is_empty() => {
            RadialFunction::table(parse_knots(knots)?).map_err(|e| e.to_string())
        }
        _ => Err(format!("expected a number, `poly c0 c1 ...` or `table r:v ...` (got `{value}`)")),
    }
}

/// Parse and validate a configuration, collecting every problem.
pub fn parse_config(text: &str) -> std::result::Result<ScenarioConfig, ConfigErrors> {
    let mut rd = Reader::new(text);

    if !rd.has_section("model") {
        rd.errors.push(0, "missing section `model`");
    } else if rd.raw("model.d").is_none() {
        rd.errors.push(0, "missing key `model.d`");
    }
    let d = match rd.raw("model.d") {
        None => None,
        Some((line, value)) => match value.parse::<i64>() {
            Ok(d) if d >= 3 => Some(d as usize),
            Ok(_) => {
                rd.errors.push(line, format!("d must be ≥ 3 (got {value})"));
                None
            }
            Err(_) => {
                rd.errors.push(line, format!("d must be an integer ≥ 3 (got `{value}`)"));
                None
            }
        },
    };
    let total_mass = if rd.raw("model.total_mass").is_some() {
        rd.mass_spec("model.total_mass")
    } else {
        None
    };
    let mu = rd.checked("model.mu", None, |x| x > 0.0 && x <= 1.0, "must lie in (0, 1]");

    let a = rd.function("coefficients.a", "coefficients.a_clamp", 1.0);
    let gamma = rd.function("coefficients.gamma", "coefficients.gamma_clamp", 0.0);
    let monotone_radius = rd.positive("coefficients.monotone_radius", None);

    let r_max = rd.positive("grid.r_max", Some(2.0));
    let n_cells = match rd.raw("grid.n_cells") {
        None => Some(200),
        Some((line, value)) => match value.parse::<usize>() {
            Ok(n) if n >= 2 => Some(n),
            _ => {
                rd.errors.push(line, format!("grid.n_cells must be an integer ≥ 2 (got `{value}`)"));
                None
            }
        },
    };
    let grading = rd.checked("grid.grading", Some(1.0), |x| x >= 1.0, "must be at least 1");

    let t_end = match rd.raw("time.t_end") {
        None => Some(Horizon::Absolute(1.0)),
        Some(_) => {
            let line = rd.line("time.t_end");
            match rd.with_unit("time.t_end", &["bound", "collapse", "characteristic"]) {
                Some((x, _)) if !(x >= 0.0) => {
                    rd.errors.push(line, format!("time.t_end must be nonnegative (got {x})"));
                    None
                }
                Some((x, None)) => Some(Horizon::Absolute(x)),
                Some((x, Some(u))) => Some(match u.as_str() {
                    "bound" => Horizon::Bound(x),
                    "collapse" => Horizon::Collapse(x),
                    _ => Horizon::Characteristic(x),
                }),
                None => None,
            }
        }
    };
    let cfl = rd.checked("time.cfl", Some(0.4), |x| x > 0.0 && x <= 1.0, "must lie in (0, 1]");
    let dt_min = rd.checked("time.dt_min", Some(1e-12), |x| x >= 0.0, "must be nonnegative");
    let u_blowup = rd.positive("time.u_blowup", None);
    let blowup_factor = rd.checked("time.blowup_factor", Some(1e6), |x| x > 1.0, "must exceed 1");
    let drift = match rd.raw("time.drift") {
        None | Some((_, "auto")) => Some(DriftChoice::Auto),
        Some((_, "closed")) => Some(DriftChoice::Fixed(DriftMode::Closed)),
        Some((_, "field")) => Some(DriftChoice::Fixed(DriftMode::Field)),
        Some((_, "off")) => Some(DriftChoice::Fixed(DriftMode::Off)),
        Some((line, other)) => {
            rd.errors.push(line, format!("time.drift must be auto, closed, field or off (got `{other}`)"));
            None
        }
    };

    let initial = parse_initial(&mut rd);

    let barrier = if rd.raw("barrier.r0").is_some() {
        rd.positive("barrier.r0", None).map(|r0| BarrierSection { r0 })
    } else {
        None
    };
    let supersolution = if rd.raw("supersolution.start_radius").is_some() {
        rd.positive("supersolution.start_radius", None)
            .map(|start_radius| SupersolutionSection { start_radius })
    } else {
        None
    };

    let path = rd.raw("output.path").map(|(_, v)| PathBuf::from(v));
    let cadence = match rd.raw("output.cadence") {
        None => Some(100),
        Some((line, value)) => match value.parse::<usize>() {
            Ok(c) if c >= 1 => Some(c),
            _ => {
                rd.errors.push(line, format!("output.cadence must be a positive integer (got `{value}`)"));
                None
            }
        },
    };
    let r_probe = match rd.raw("output.r_probe") {
        None if barrier.is_some() => Some(ProbeSpec::BarrierRadius(0.05)),
        None => Some(ProbeSpec::DomainRadius(0.05)),
        Some(_) => {
            let line = rd.line("output.r_probe");
            match rd.with_unit("output.r_probe", &["r0", "r_max"]) {
                Some((x, _)) if !(x > 0.0) => {
                    rd.errors.push(line, format!("output.r_probe must be positive (got {x})"));
                    None
                }
                Some((x, None)) => Some(ProbeSpec::Absolute(x)),
                Some((x, Some(u))) if u == "r0" => Some(ProbeSpec::BarrierRadius(x)),
                Some((x, Some(_))) => Some(ProbeSpec::DomainRadius(x)),
                None => None,
            }
        }
    };
    let track_energy = match rd.raw("output.track_energy") {
        None | Some((_, "false")) => Some(false),
        Some((_, "true")) => Some(true),
        Some((line, other)) => {
            rd.errors.push(line, format!("output.track_energy must be true or false (got `{other}`)"));
            None
        }
    };
    let name = rd.raw("scenario.name").map_or("scenario".to_string(), |(_, v)| v.to_string());

    // Cross-field rules.
    if let (Some(init), Some(_)) = (&initial, total_mass) {
        if !init.takes_total_mass() {
            rd.errors.push(
                rd.line("model.total_mass"),
                format!("initial.kind = {} fixes its own mass; remove model.total_mass", init.kind_name()),
            );
        }
    }
    if barrier.is_some() && mu.is_some() && total_mass.is_some() {
        rd.errors.push(
            rd.line("model.mu"),
            "with a barrier, give either model.mu or model.total_mass, not both (μ = M_c/M0)",
        );
    }
    if barrier.is_some() && supersolution.is_some() {
        rd.errors.push(rd.line("supersolution.start_radius"), "barrier and supersolution monitors are exclusive");
    }
    if let (Some(b), Some(r)) = (&barrier, r_max) {
        if b.r0 > r {
            rd.errors.push(rd.line("barrier.r0"), format!("barrier.r0 = {} lies outside grid.r_max = {r}", b.r0));
        }
    }
    if let Some(Horizon::Bound(_) | Horizon::Collapse(_)) = t_end {
        if barrier.is_none() {
            rd.errors.push(rd.line("time.t_end"), "time.t_end in `bound` or `collapse` units needs barrier.r0");
        }
    }
    if let Some(Horizon::Characteristic(_)) = t_end {
        if supersolution.is_none() {
            rd.errors.push(
                rd.line("time.t_end"),
                "time.t_end in `characteristic` units needs supersolution.start_radius",
            );
        }
    }
    if let Some(ProbeSpec::BarrierRadius(_)) = r_probe {
        if barrier.is_none() {
            rd.errors.push(rd.line("output.r_probe"), "output.r_probe in `r0` units needs barrier.r0");
        }
    }
    if let Some(InitialData::BarrierScaled { radius: None }) = initial {
        if barrier.is_none() {
            rd.errors.push(rd.line("initial.kind"), "barrier_scaled needs initial.radius or barrier.r0");
        }
    }
    if let (Some(DriftChoice::Fixed(DriftMode::Closed)), Some(g)) = (drift, &gamma) {
        if !g.is_identically_zero() {
            rd.errors.push(rd.line("time.drift"), "time.drift = closed requires gamma ≡ 0");
        }
    }

    if !rd.errors.is_empty() {
        return Err(rd.errors);
    }
    // Every field is Some once no error was recorded.
    let mut coefficients = Coefficients::new(a.unwrap(), gamma.unwrap());
    coefficients.monotone_radius = monotone_radius;
    Ok(ScenarioConfig {
        name,
        model: ModelSection {
            d: d.unwrap(),
            total_mass,
            mu,
        },
        coefficients,
        grid: GridSection {
            r_max: r_max.unwrap(),
            n_cells: n_cells.unwrap(),
            grading: grading.unwrap(),
        },
        time: TimeSection {
            t_end: t_end.unwrap(),
            cfl: cfl.unwrap(),
            dt_min: dt_min.unwrap(),
            u_blowup,
            blowup_factor: blowup_factor.unwrap(),
            drift: drift.unwrap(),
        },
        initial: initial.unwrap(),
        barrier,
        supersolution,
        output: OutputSection {
            path,
            cadence: cadence.unwrap(),
            r_probe: r_probe.unwrap(),
            track_energy: track_energy.unwrap(),
        },
    })
}

fn parse_initial(rd: &mut Reader) -> Option<InitialData> {
    let kind = rd.raw("initial.kind").map_or("gaussian_bump".to_string(), |(_, v)| v.to_string());
    let line = rd.line("initial.kind");
    let what = format!("initial.kind = {kind}");
    Some(match kind.as_str() {
        "barrier_scaled" => InitialData::BarrierScaled {
            radius: if rd.raw("initial.radius").is_some() {
                Some(rd.positive("initial.radius", None)?)
            } else {
                None
            },
        },
        "gaussian_bump" => InitialData::GaussianBump {
            width: rd.positive("initial.width", Some(0.25))?,
        },
        "annulus" => {
            let inner = rd.checked("initial.inner", None, |x| x >= 0.0, "must be nonnegative");
            let outer = rd.required_positive("initial.outer", &what);
            if rd.raw("initial.inner").is_none() {
                rd.errors.push(0, format!("{what} requires `initial.inner`"));
            }
            let (inner, outer) = (inner?, outer?);
            if inner >= outer {
                rd.errors.push(rd.line("initial.outer"), "initial.outer must exceed initial.inner");
                return None;
            }
            InitialData::Annulus { inner, outer }
        }
        "spike_plus_shell" => {
            let spike_radius = rd.required_positive("initial.spike_radius", &what);
            let shell_inner = rd.required_positive("initial.shell_inner", &what);
            let shell_outer = rd.required_positive("initial.shell_outer", &what);
            let mut mass = |key: &str| {
                if rd.raw(key).is_none() {
                    rd.errors.push(0, format!("{what} requires `{key}`"));
                    None
                } else {
                    rd.mass_spec(key)
                }
            };
            let spike_mass = mass("initial.spike_mass");
            let shell_mass = mass("initial.shell_mass");
            let (spike_radius, shell_inner, shell_outer) = (spike_radius?, shell_inner?, shell_outer?);
            if !(spike_radius <= shell_inner && shell_inner < shell_outer) {
                rd.errors.push(
                    rd.line("initial.shell_inner"),
                    "need spike_radius ≤ shell_inner < shell_outer",
                );
                return None;
            }
            InitialData::SpikePlusShell {
                spike_radius,
                spike_mass: spike_mass?,
                shell_inner,
                shell_outer,
                shell_mass: shell_mass?,
            }
        }
        "table" => {
            let Some((tline, value)) = rd.raw("initial.table") else {
                rd.errors.push(0, format!("{what} requires `initial.table`"));
                return None;
            };
            let tokens: Vec<String> = value.split_whitespace().map(str::to_string).collect();
            let refs: Vec<&str> = tokens.iter().map(String::as_str).collect();
            match parse_knots(&refs) {
                Ok(knots)
                    if knots.windows(2).all(|w| w[1].0 > w[0].0)
                        && knots.iter().all(|&(r, u)| r >= 0.0 && u >= 0.0) =>
                {
                    InitialData::Table { knots }
                }
                Ok(_) => {
                    rd.errors.push(tline, "initial.table needs increasing radii and nonnegative densities");
                    return None;
                }
                Err(m) => {
                    rd.errors.push(tline, format!("initial.table: {m}"));
                    return None;
                }
            }
        }
        "barenblatt" => InitialData::Barenblatt {
            c: rd.positive("initial.c", Some(1.0))?,
            t0: rd.positive("initial.t0", Some(1.0))?,
        },
        other => {
            rd.errors.push(
                line,
                format!(
                    "initial.kind must be barrier_scaled, gaussian_bump, annulus, spike_plus_shell, table or barenblatt (got `{other}`)"
                ),
            );
            return None;
        }
    })
}

/// Render a config back to text that parses to the same value.
pub fn render_config(cfg: &ScenarioConfig) -> String {
    fn function(f: &RadialFunction) -> (String, Option<String>) {
        match f {
            RadialFunction::Constant(c) => (format!("{c:e}"), None),
            RadialFunction::Polynomial(c) => (
                format!("poly {}", c.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(" ")),
                None,
            ),
            RadialFunction::Table(k) => (
                format!(
                    "table {}",
                    k.iter().map(|(r, v)| format!("{r:e}:{v:e}")).collect::<Vec<_>>().join(" ")
                ),
                None,
            ),
            RadialFunction::Clamped { inner, lo, hi } => (function(inner).0, Some(format!("{lo:e} {hi:e}"))),
        }
    }
    fn mass(m: MassSpec) -> String {
        match m {
            MassSpec::Absolute(x) => format!("{x:e}"),
            MassSpec::Critical(x) => format!("{x:e} critical"),
        }
    }
    let mut out = Vec::new();
    out.push(format!("scenario.name = {}", cfg.name));
    out.push(format!("model.d = {}", cfg.model.d));
    if let Some(m) = cfg.model.total_mass {
        out.push(format!("model.total_mass = {}", mass(m)));
    }
    if let Some(mu) = cfg.model.mu {
        out.push(format!("model.mu = {mu:e}"));
    }
    let (a, a_clamp) = function(&cfg.coefficients.a);
    out.push(format!("coefficients.a = {a}"));
    if let Some(c) = a_clamp {
        out.push(format!("coefficients.a_clamp = {c}"));
    }
    let (g, g_clamp) = function(&cfg.coefficients.gamma);
    out.push(format!("coefficients.gamma = {g}"));
    if let Some(c) = g_clamp {
        out.push(format!("coefficients.gamma_clamp = {c}"));
    }
    if let Some(r) = cfg.coefficients.monotone_radius {
        out.push(format!("coefficients.monotone_radius = {r:e}"));
    }
    out.push(format!("grid.r_max = {:e}", cfg.grid.r_max));
    out.push(format!("grid.n_cells = {}", cfg.grid.n_cells));
    out.push(format!("grid.grading = {:e}", cfg.grid.grading));
    out.push(format!(
        "time.t_end = {}",
        match cfg.time.t_end {
            Horizon::Absolute(x) => format!("{x:e}"),
            Horizon::Bound(x) => format!("{x:e} bound"),
            Horizon::Collapse(x) => format!("{x:e} collapse"),
            Horizon::Characteristic(x) => format!("{x:e} characteristic"),
        }
    ));
    out.push(format!("time.cfl = {:e}", cfg.time.cfl));
    out.push(format!("time.dt_min = {:e}", cfg.time.dt_min));
    if let Some(u) = cfg.time.u_blowup {
        out.push(format!("time.u_blowup = {u:e}"));
    }
    out.push(format!("time.blowup_factor = {:e}", cfg.time.blowup_factor));
    out.push(format!(
        "time.drift = {}",
        match cfg.time.drift {
            DriftChoice::Auto => "auto",
            DriftChoice::Fixed(DriftMode::Closed) => "closed",
            DriftChoice::Fixed(DriftMode::Field) => "field",
            DriftChoice::Fixed(DriftMode::Off) => "off",
        }
    ));
    out.push(format!("initial.kind = {}", cfg.initial.kind_name()));
    match &cfg.initial {
        InitialData::BarrierScaled { radius } => {
            if let Some(r) = radius {
                out.push(format!("initial.radius = {r:e}"));
            }
        }
        InitialData::GaussianBump { width } => out.push(format!("initial.width = {width:e}")),
        InitialData::Annulus { inner, outer } => {
            out.push(format!("initial.inner = {inner:e}"));
            out.push(format!("initial.outer = {outer:e}"));
        }
        InitialData::SpikePlusShell {
            spike_radius,
            spike_mass,
            shell_inner,
            shell_outer,
            shell_mass,
        } => {
            out.push(format!("initial.spike_radius = {spike_radius:e}"));
            out.push(format!("initial.spike_mass = {}", mass(*spike_mass)));
            out.push(format!("initial.shell_inner = {shell_inner:e}"));
            out.push(format!("initial.shell_outer = {shell_outer:e}"));
            out.push(format!("initial.shell_mass = {}", mass(*shell_mass)));
        }
        InitialData::Table { knots } => out.push(format!(
            "initial.table = {}",
            knots.iter().map(|(r, u)| format!("{r:e}:{u:e}")).collect::<Vec<_>>().join(" ")
        )),
        InitialData::Barenblatt { c, t0 } => {
            out.push(format!("initial.c = {c:e}"));
            out.push(format!("initial.t0 = {t0:e}"));
        }
    }
    if let Some(b) = &cfg.barrier {
        out.push(format!("barrier.r0 = {:e}", b.r0));
    }
    if let Some(s) = &cfg.supersolution {
        out.push(format!("supersolution.start_radius = {:e}", s.start_radius));
    }
    if let Some(p) = &cfg.output.path {
        out.push(format!("output.path = {}", p.display()));
    }
    out.push(format!("output.cadence = {}", cfg.output.cadence));
    out.push(format!(
        "output.r_probe = {}",
        match cfg.output.r_probe {
            ProbeSpec::Absolute(x) => format!("{x:e}"),
            ProbeSpec::BarrierRadius(x) => format!("{x:e} r0"),
            ProbeSpec::DomainRadius(x) => format!("{x:e} r_max"),
        }
    ));
    out.push(format!("output.track_energy = {}", cfg.output.track_energy));
    out.join("\n") + "\n"
}
