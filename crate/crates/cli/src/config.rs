//! Run configuration: TOML schema, defaults and validation.
//!
//! ```toml
//! version = 1          # schema version, optional
//! D = 1.0              # required, > 0
//! seed = 0
//! output = "bcsgl-out"
//!
//! [potential]
//! family = "gaussian_well"   # or "square_well", "custom_sampled"
//! depth = 2.0                # well depth, >= 0 (the well is -depth)
//! width = 1.0
//! mu = 1.0
//! dim = 1
//!
//! [[fields.W]]               # W(x) = Σ cos·cos(2πk·x) + sin·sin(2πk·x)
//! k = 1
//! cos = 0.5
//!
//! [[fields.A]]               # same form, plus the vector component
//! component = 0
//! k = 1
//! cos = 0.3
//!
//! [[fields.psi]]             # optional ψ for the trace sweeps: ψ̂_k = re + i·im
//! k = 0
//! re = 0.8
//!
//! [grids]
//! n_max = 32                 # GL bandwidth
//! xi_nodes = 16              # Bloch momenta per fiber sweep
//! h_list = [0.125, 0.0625, 0.03125, 0.015625]
//! gap = { cutoff = 12.0, n_points = 512 }
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use bcsgl::bdg::{DEFAULT_H_LIST, DEFAULT_XI_NODES};
use bcsgl::gap::{MomentumGrid, PotentialFamily, PotentialSpec};
use bcsgl::gl::{TorusField, TorusVectorField};

pub const CONFIG_VERSION: i64 = 1;
pub const DEFAULT_OUTPUT: &str = "bcsgl-out";
pub const DEFAULT_N_MAX: usize = 32;

/// One violated constraint, named by its dotted config key.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigIssue {
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.key, self.message)
    }
}

/// Real Fourier term `cos·cos(2πk·x) + sin·sin(2πk·x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealMode {
    pub component: usize,
    pub k: Vec<i64>,
    pub cos: f64,
    pub sin: f64,
}

/// Complex coefficient `re + i·im` of `e^{2πik·x}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexMode {
    pub k: Vec<i64>,
    pub re: f64,
    pub im: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldConfig {
    #[serde(rename = "W")]
    pub w: Vec<RealMode>,
    #[serde(rename = "A")]
    pub a: Vec<RealMode>,
    pub psi: Option<Vec<ComplexMode>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub gap: MomentumGrid,
    pub n_max: usize,
    pub xi_nodes: usize,
    pub h_list: Vec<f64>,
}

/// Validated configuration with every default filled in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub version: i64,
    pub potential: PotentialSpec,
    #[serde(rename = "D")]
    pub d: f64,
    pub fields: FieldConfig,
    pub grids: GridConfig,
    pub output: PathBuf,
    pub seed: u64,
    /// Summability sums `Σ|ĉ_k|` and `Σ|ĉ_k|(1+|k|)` of each field.
    pub checks: BTreeMap<String, f64>,
}

/// Command-line values that replace config entries before validation.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub output: Option<PathBuf>,
    pub seed: Option<u64>,
    pub h_list: Option<Vec<f64>>,
}

impl Overrides {
    fn apply(&self, table: &mut Table) {
        if let Some(o) = &self.output {
            table.insert("output".into(), Value::String(o.display().to_string()));
        }
        if let Some(s) = self.seed {
            table.insert("seed".into(), Value::Integer(s as i64));
        }
        if let Some(h) = &self.h_list {
            let grids = table
                .entry("grids")
                .or_insert_with(|| Value::Table(Table::new()));
            if let Value::Table(g) = grids {
                g.insert(
                    "h_list".into(),
                    Value::Array(h.iter().map(|v| Value::Float(*v)).collect()),
                );
            }
        }
    }
}

/// Parses `"a,b,c"` as used by `--h-list`.
pub fn parse_h_list(text: &str) -> Result<Vec<f64>, String> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| format!("`{}`: {e}", s.trim()))
        })
        .collect()
}

pub fn validate_config(path: &Path) -> Result<RunConfig, Vec<ConfigIssue>> {
    validate_config_with(path, &Overrides::default())
}

pub fn validate_config_with(
    path: &Path,
    overrides: &Overrides,
) -> Result<RunConfig, Vec<ConfigIssue>> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        vec![ConfigIssue {
            key: "--config".into(),
            message: format!("cannot read {}: {e}", path.display()),
        }]
    })?;
    validate_str(&text, overrides)
}

pub fn validate_str(text: &str, overrides: &Overrides) -> Result<RunConfig, Vec<ConfigIssue>> {
    let mut table: Table = text.parse().map_err(|e: toml::de::Error| {
        vec![ConfigIssue {
            key: "(syntax)".into(),
            message: e.message().to_string(),
        }]
    })?;
    overrides.apply(&mut table);
    let mut r = Reader::default();
    let config = r.run_config(&table);
    match config {
        Some(c) if r.issues.is_empty() => Ok(c),
        _ => Err(r.issues),
    }
}

#[derive(Default)]
struct Reader {
    issues: Vec<ConfigIssue>,
}

fn join(prefix: &str, key: &str) -> String {
    if prefix.is_empty() {
        key.to_string()
    } else {
        format!("{prefix}.{key}")
    }
}

impl Reader {
    fn issue(&mut self, key: impl Into<String>, message: impl Into<String>) {
        self.issues.push(ConfigIssue {
            key: key.into(),
            message: message.into(),
        });
    }

    fn unknown(&mut self, t: &Table, prefix: &str, allowed: &[&str]) {
        for k in t.keys() {
            if !allowed.contains(&k.as_str()) {
                self.issue(join(prefix, k), "unknown key");
            }
        }
    }

    fn float(&mut self, t: &Table, prefix: &str, key: &str) -> Option<f64> {
        let v = t.get(key)?;
        let x = match v {
            Value::Float(x) => *x,
            Value::Integer(i) => *i as f64,
            other => {
                self.issue(
                    join(prefix, key),
                    format!("expected a number, got {}", other.type_str()),
                );
                return None;
            }
        };
        if !x.is_finite() {
            self.issue(join(prefix, key), "must be finite");
            return None;
        }
        Some(x)
    }

    fn int(&mut self, t: &Table, prefix: &str, key: &str) -> Option<i64> {
        match t.get(key)? {
            Value::Integer(i) => Some(*i),
            other => {
                self.issue(
                    join(prefix, key),
                    format!("expected an integer, got {}", other.type_str()),
                );
                None
            }
        }
    }

    fn count(&mut self, t: &Table, prefix: &str, key: &str, min: i64) -> Option<usize> {
        let v = self.int(t, prefix, key)?;
        if v < min {
            self.issue(
                join(prefix, key),
                format!("must be at least {min}, got {v}"),
            );
            return None;
        }
        Some(v as usize)
    }

    fn table<'a>(&mut self, t: &'a Table, prefix: &str, key: &str) -> Option<&'a Table> {
        match t.get(key)? {
            Value::Table(s) => Some(s),
            other => {
                self.issue(
                    join(prefix, key),
                    format!("expected a table, got {}", other.type_str()),
                );
                None
            }
        }
    }

    fn array<'a>(&mut self, t: &'a Table, prefix: &str, key: &str) -> Option<&'a [Value]> {
        match t.get(key)? {
            Value::Array(a) => Some(a),
            other => {
                self.issue(
                    join(prefix, key),
                    format!("expected an array, got {}", other.type_str()),
                );
                None
            }
        }
    }

    fn run_config(&mut self, t: &Table) -> Option<RunConfig> {
        self.unknown(
            t,
            "",
            &[
                "version",
                "D",
                "seed",
                "output",
                "potential",
                "fields",
                "grids",
            ],
        );
        let version = self.int(t, "", "version").unwrap_or(CONFIG_VERSION);
        if version != CONFIG_VERSION {
            self.issue(
                "version",
                format!("unsupported schema version {version}, expected {CONFIG_VERSION}"),
            );
        }
        let d = match self.float(t, "", "D") {
            Some(d) if d > 0.0 => Some(d),
            Some(d) => {
                self.issue("D", format!("must be positive, got {d}"));
                None
            }
            None if !t.contains_key("D") => {
                self.issue("D", "missing required key");
                None
            }
            None => None,
        };
        let seed = match self.int(t, "", "seed") {
            Some(s) if s >= 0 => s as u64,
            Some(s) => {
                self.issue("seed", format!("must be nonnegative, got {s}"));
                0
            }
            None => 0,
        };
        let output = match t.get("output") {
            None => PathBuf::from(DEFAULT_OUTPUT),
            Some(Value::String(s)) if !s.is_empty() => PathBuf::from(s),
            Some(_) => {
                self.issue("output", "expected a nonempty path string");
                PathBuf::from(DEFAULT_OUTPUT)
            }
        };
        let potential = match self.table(t, "", "potential") {
            Some(p) => self.potential(p),
            None => {
                if !t.contains_key("potential") {
                    self.issue("potential", "missing required table");
                }
                None
            }
        };
        let dim = potential.as_ref().map_or(1, |p| p.dim);
        let empty = Table::new();
        let fields_t = self.table(t, "", "fields").unwrap_or(&empty);
        let fields = self.fields(fields_t, dim);
        let grids_t = self.table(t, "", "grids").unwrap_or(&empty);
        let grids = self.grids(grids_t, potential.as_ref());

        let (potential, d, fields, grids) = (potential?, d?, fields?, grids?);
        let mut checks = BTreeMap::new();
        let (w, a) = fields.build(dim);
        let mut record = |name: &str, f: &TorusField| {
            let (s0, s1) = f.summability();
            checks.insert(format!("fields.{name}.sum_abs"), s0);
            checks.insert(format!("fields.{name}.sum_abs_weighted"), s1);
        };
        record("W", &w);
        for (j, c) in a.components.iter().enumerate() {
            record(&format!("A.{j}"), c);
        }
        if let Some(psi) = fields.psi_field(dim) {
            record("psi", &psi);
        }
        Some(RunConfig {
            version,
            potential,
            d,
            fields,
            grids,
            output,
            seed,
            checks,
        })
    }

    fn potential(&mut self, t: &Table) -> Option<PotentialSpec> {
        let p = "potential";
        let family = match t.get("family") {
            None => "gaussian_well".to_string(),
            Some(Value::String(s)) => s.clone(),
            Some(_) => {
                self.issue("potential.family", "expected a string");
                return None;
            }
        };
        let before = self.issues.len();
        let mu = self.float(t, p, "mu").unwrap_or(1.0);
        let dim = self.count(t, p, "dim", 1).unwrap_or(1);
        if dim > 3 {
            self.issue("potential.dim", format!("must be 1, 2 or 3, got {dim}"));
        }
        let family = match family.as_str() {
            "gaussian_well" | "square_well" => {
                self.unknown(t, p, &["family", "depth", "width", "mu", "dim"]);
                let depth = self.float(t, p, "depth");
                if depth.is_none() && !t.contains_key("depth") {
                    self.issue("potential.depth", "missing required key");
                }
                if let Some(v) = depth.filter(|v| *v < 0.0) {
                    self.issue(
                        "potential.depth",
                        format!("well depth must be nonnegative (attractive well), got {v}"),
                    );
                }
                let width = self.float(t, p, "width").unwrap_or(1.0);
                if width <= 0.0 {
                    self.issue("potential.width", format!("must be positive, got {width}"));
                }
                let depth = depth?;
                if family == "gaussian_well" {
                    PotentialFamily::GaussianWell { depth, width }
                } else {
                    PotentialFamily::SquareWell { depth, width }
                }
            }
            "custom_sampled" => {
                self.unknown(t, p, &["family", "spacing", "values", "mu", "dim"]);
                let spacing = self.float(t, p, "spacing");
                match spacing {
                    None if !t.contains_key("spacing") => {
                        self.issue("potential.spacing", "missing required key")
                    }
                    Some(s) if s <= 0.0 => {
                        self.issue("potential.spacing", format!("must be positive, got {s}"))
                    }
                    _ => {}
                }
                let values = match self.array(t, p, "values") {
                    Some(vals) => {
                        let mut out = Vec::new();
                        for (i, v) in vals.iter().enumerate() {
                            match v.as_float().or(v.as_integer().map(|i| i as f64)) {
                                Some(x) if x.is_finite() => out.push(x),
                                _ => self.issue(
                                    format!("potential.values[{i}]"),
                                    "expected a finite number",
                                ),
                            }
                        }
                        if out.len() < 2 {
                            self.issue("potential.values", "need at least two samples");
                        }
                        Some(out)
                    }
                    None => {
                        if !t.contains_key("values") {
                            self.issue("potential.values", "missing required key");
                        }
                        None
                    }
                };
                PotentialFamily::CustomSampled {
                    spacing: spacing?,
                    values: values?,
                }
            }
            other => {
                self.issue(
                    "potential.family",
                    format!(
                        "unknown family `{other}`; expected gaussian_well, square_well or custom_sampled"
                    ),
                );
                return None;
            }
        };
        if self.issues.len() > before {
            return None;
        }
        let spec = PotentialSpec { family, mu, dim };
        if let Err(e) = spec.validate() {
            self.issue("potential", e.to_string());
            return None;
        }
        Some(spec)
    }

    fn wavevector(&mut self, t: &Table, prefix: &str, dim: usize) -> Option<Vec<i64>> {
        let key = join(prefix, "k");
        let k = match t.get("k") {
            Some(Value::Integer(i)) => vec![*i],
            Some(Value::Array(a)) => {
                let k: Option<Vec<i64>> = a.iter().map(|v| v.as_integer()).collect();
                match k {
                    Some(k) => k,
                    None => {
                        self.issue(key, "expected integers");
                        return None;
                    }
                }
            }
            Some(_) => {
                self.issue(key, "expected an integer or an array of integers");
                return None;
            }
            None => {
                self.issue(key, "missing required key");
                return None;
            }
        };
        if k.len() != dim {
            self.issue(key, format!("needs {dim} entries, got {}", k.len()));
            return None;
        }
        Some(k)
    }

    fn real_modes(&mut self, t: &Table, name: &str, dim: usize, vector: bool) -> Vec<RealMode> {
        let Some(items) = self.array(t, "fields", name) else {
            return Vec::new();
        };
        let mut out = Vec::new();
        for (i, item) in items.iter().enumerate() {
            let prefix = format!("fields.{name}[{i}]");
            let Some(m) = item.as_table() else {
                self.issue(prefix, "expected a table");
                continue;
            };
            let allowed: &[&str] = if vector {
                &["component", "k", "cos", "sin"]
            } else {
                &["k", "cos", "sin"]
            };
            self.unknown(m, &prefix, allowed);
            let component = if vector {
                self.count(m, &prefix, "component", 0).unwrap_or(0)
            } else {
                0
            };
            if component >= dim {
                self.issue(
                    join(&prefix, "component"),
                    format!("must be below the dimension {dim}"),
                );
            }
            let k = self.wavevector(m, &prefix, dim);
            if let Some(k) = &k {
                // cos/sin terms are indexed by half of Z^d
                let first = k.iter().find(|v| **v != 0);
                if first.is_some_and(|v| *v < 0) {
                    self.issue(
                        join(&prefix, "k"),
                        "first nonzero entry must be positive; use sin = -sin for the mirror mode",
                    );
                }
            }
            let cos = self.float(m, &prefix, "cos").unwrap_or(0.0);
            let sin = self.float(m, &prefix, "sin").unwrap_or(0.0);
            if let Some(k) = k {
                out.push(RealMode {
                    component,
                    k,
                    cos,
                    sin,
                });
            }
        }
        out
    }

    fn fields(&mut self, t: &Table, dim: usize) -> Option<FieldConfig> {
        self.unknown(t, "fields", &["W", "A", "psi"]);
        let before = self.issues.len();
        let w = self.real_modes(t, "W", dim, false);
        let a = self.real_modes(t, "A", dim, true);
        let psi = self.array(t, "fields", "psi").map(|items| {
            let mut out = Vec::new();
            for (i, item) in items.iter().enumerate() {
                let prefix = format!("fields.psi[{i}]");
                let Some(m) = item.as_table() else {
                    self.issue(prefix, "expected a table");
                    continue;
                };
                self.unknown(m, &prefix, &["k", "re", "im"]);
                let k = self.wavevector(m, &prefix, dim);
                let re = self.float(m, &prefix, "re").unwrap_or(0.0);
                let im = self.float(m, &prefix, "im").unwrap_or(0.0);
                if let Some(k) = k {
                    out.push(ComplexMode { k, re, im });
                }
            }
            out
        });
        if self.issues.len() > before {
            return None;
        }
        Some(FieldConfig { w, a, psi })
    }

    fn grids(&mut self, t: &Table, spec: Option<&PotentialSpec>) -> Option<GridConfig> {
        self.unknown(t, "grids", &["gap", "n_max", "xi_nodes", "h_list"]);
        let before = self.issues.len();
        let n_max = self.count(t, "grids", "n_max", 1).unwrap_or(DEFAULT_N_MAX);
        let xi_nodes = self
            .count(t, "grids", "xi_nodes", 1)
            .unwrap_or(DEFAULT_XI_NODES);
        let h_list = match self.array(t, "grids", "h_list") {
            None => DEFAULT_H_LIST.to_vec(),
            Some(items) => {
                let h: Vec<Option<f64>> = items
                    .iter()
                    .map(|v| v.as_float().or(v.as_integer().map(|i| i as f64)))
                    .collect();
                if h.iter().any(|v| v.is_none()) {
                    self.issue("grids.h_list", "expected numbers");
                }
                h.into_iter().flatten().collect()
            }
        };
        if h_list
            .iter()
            .any(|h| !(h.is_finite() && *h > 0.0 && *h < 1.0))
        {
            self.issue("grids.h_list", "entries must lie in (0, 1)");
        }
        if h_list.windows(2).any(|w| w[1] >= w[0]) {
            self.issue("grids.h_list", "must be strictly decreasing");
        }
        if h_list.len() < 3 {
            self.issue(
                "grids.h_list",
                format!("order fits need at least 3 values, got {}", h_list.len()),
            );
        }
        let gap = match (self.table(t, "grids", "gap"), spec) {
            (_, None) => None,
            (None, Some(spec)) => Some(MomentumGrid::default_for(spec)),
            (Some(g), Some(spec)) => {
                self.unknown(g, "grids.gap", &["cutoff", "n_points"]);
                let default = MomentumGrid::default_for(spec);
                let grid = MomentumGrid {
                    cutoff: self
                        .float(g, "grids.gap", "cutoff")
                        .unwrap_or(default.cutoff),
                    n_points: self
                        .count(g, "grids.gap", "n_points", 8)
                        .unwrap_or(default.n_points),
                };
                let required = MomentumGrid::required_cutoff(spec);
                if !(grid.cutoff >= required) {
                    self.issue(
                        "grids.gap.cutoff",
                        format!("must be at least {required:.4} for this potential"),
                    );
                }
                Some(grid)
            }
        };
        if self.issues.len() > before {
            return None;
        }
        Some(GridConfig {
            gap: gap?,
            n_max,
            xi_nodes,
            h_list,
        })
    }
}

impl FieldConfig {
    fn real_field(modes: &[RealMode], dim: usize, component: usize) -> TorusField {
        let mut coeffs = Vec::new();
        for m in modes.iter().filter(|m| m.component == component) {
            if m.k.iter().all(|v| *v == 0) {
                coeffs.push((m.k.clone(), Complex64::new(m.cos, 0.0)));
            } else {
                let c = Complex64::new(0.5 * m.cos, -0.5 * m.sin);
                coeffs.push((m.k.clone(), c));
                coeffs.push((m.k.iter().map(|v| -v).collect(), c.conj()));
            }
        }
        if coeffs.is_empty() {
            return TorusField::zeros(dim, 0);
        }
        TorusField::from_modes(dim, &coeffs)
    }

    /// `W` and `A` as Fourier series.
    pub fn build(&self, dim: usize) -> (TorusField, TorusVectorField) {
        let w = Self::real_field(&self.w, dim, 0);
        let a = TorusVectorField {
            components: (0..dim)
                .map(|j| Self::real_field(&self.a, dim, j))
                .collect(),
        };
        (w, a)
    }

    pub fn psi_field(&self, dim: usize) -> Option<TorusField> {
        let modes: Vec<(Vec<i64>, Complex64)> = self
            .psi
            .as_ref()?
            .iter()
            .map(|m| (m.k.clone(), Complex64::new(m.re, m.im)))
            .collect();
        Some(if modes.is_empty() {
            TorusField::zeros(dim, 0)
        } else {
            TorusField::from_modes(dim, &modes)
        })
    }
}
