//! Stage orchestration with an on-disk cache.
//!
//! Every artifact is written as `{"stage", "key", "result"}` where `key` is
//! the SHA-256 of the stage's inputs together with its upstream keys. A stage
//! whose artifact already carries the current key is loaded instead of
//! recomputed; any change to an input changes the key, so stale artifacts are
//! never reused.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use bcsgl::bdg::{
    alpha_delta_distance, coverage_radius, h_sweep, real_space_alpha0, semiclassical_trace,
    trial_state_energy, BdgError, BdgFields, FiberBasis, FiberSystem, SweepPoint, SweepReport,
};
use bcsgl::coeffs::{b3_sech_form, compute_coefficients, GLCoefficients};
use bcsgl::gap::{find_tc, normalize, GapError, GapSolution};
use bcsgl::gl::{minimize, GLError, GLOptions, GLState, TorusField};

use crate::config::RunConfig;

/// Expansion residual must decay at least this fast.
pub const TRACE_ORDER_MIN: f64 = 4.5;
/// Allowed relative mismatch of `(lhs - h²E1)/h⁴` against `E2` at the last `h`.
pub const E2_REL_TOL: f64 = 0.05;
pub const ALPHA_ORDER_MIN: f64 = 2.3;
/// Allowed relative drift of the leading-term norm between the last two `h`.
pub const LEADING_NORM_TOL: f64 = 0.05;
pub const ENERGY_ORDER_MIN: f64 = 0.8;
/// Relative slack below `E^GL - B3` tolerated before a trial energy counts as
/// violating the upper bound.
pub const UPPER_BOUND_SLACK: f64 = 0.01;
/// Real-space step and Fourier quadrature step for `α₀(r)`.
pub const PAIR_GRID: (f64, f64) = (0.005, 0.005);

/// A failed stage, serialized as the run's error document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageError {
    pub stage: String,
    pub kind: String,
    pub message: String,
}

impl StageError {
    fn new(stage: &str, kind: &str, message: impl ToString) -> Self {
        StageError {
            stage: stage.into(),
            kind: kind.into(),
            message: message.to_string(),
        }
    }

    fn io(stage: &str, e: impl ToString) -> Self {
        Self::new(stage, "io", e)
    }

    fn gap(e: GapError) -> Self {
        let kind = match e {
            GapError::NoPairing { .. } => "no_pairing",
            _ => "numerical",
        };
        Self::new("gap", kind, e)
    }

    fn gl(e: GLError) -> Self {
        let kind = match e {
            GLError::NotConverged { .. } => "not_converged",
            _ => "numerical",
        };
        Self::new("gl", kind, e)
    }

    fn bdg(stage: &str, e: BdgError) -> Self {
        let kind = match e {
            BdgError::TooFewPoints { .. } => "too_few_points",
            BdgError::Unsupported(_) => "unsupported",
            _ => "numerical",
        };
        Self::new(stage, kind, e)
    }
}

impl std::fmt::Display for StageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "stage {} failed ({}): {}",
            self.stage, self.kind, self.message
        )
    }
}

impl std::error::Error for StageError {}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Artifact<T> {
    stage: String,
    key: String,
    result: T,
}

/// Normalized coefficients together with their consistency checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoeffsResult {
    pub coefficients: GLCoefficients,
    pub normalization_residual: f64,
    pub b3_sech_form: f64,
}

/// A sweep with the criteria it was judged by.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOutcome {
    pub report: SweepReport,
    pub criteria: BTreeMap<String, f64>,
    pub passed: bool,
    pub summary: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum SweepKind {
    Trace,
    Alpha,
    Energy,
}

impl SweepKind {
    pub const ALL: [SweepKind; 3] = [SweepKind::Trace, SweepKind::Alpha, SweepKind::Energy];

    pub fn name(self) -> &'static str {
        match self {
            SweepKind::Trace => "trace_expansion",
            SweepKind::Alpha => "alpha_distance",
            SweepKind::Energy => "trial_energy",
        }
    }
}

fn hash_of(parts: &impl Serialize) -> String {
    let bytes = serde_json::to_vec(parts).expect("config values serialize");
    format!("{:x}", Sha256::digest(bytes))
}

/// Runs stages on demand, each at most once, reading and writing the cache
/// under the output directory.
pub struct Pipeline {
    pub config: RunConfig,
    pub out: PathBuf,
    /// Stages loaded from the cache, in order of first use.
    pub cache_hits: Vec<String>,
    /// Stages computed in this run.
    pub computed: Vec<String>,
    gap: Option<(String, GapSolution)>,
    coeffs: Option<(String, CoeffsResult)>,
    gl: Option<(String, GLState)>,
    sweeps: BTreeMap<SweepKind, SweepOutcome>,
}

impl Pipeline {
    pub fn new(config: RunConfig) -> Self {
        let out = config.output.clone();
        Pipeline {
            config,
            out,
            cache_hits: Vec::new(),
            computed: Vec::new(),
            gap: None,
            coeffs: None,
            gl: None,
            sweeps: BTreeMap::new(),
        }
    }

    pub fn config_hash(&self) -> String {
        hash_of(&self.config)
    }

    fn cached<T: Serialize + DeserializeOwned>(
        &mut self,
        stage: &str,
        file: &Path,
        key: &str,
        compute: impl FnOnce(&mut Self) -> Result<T, StageError>,
    ) -> Result<T, StageError> {
        let path = self.out.join(file);
        if let Ok(text) = fs::read_to_string(&path) {
            if let Ok(a) = serde_json::from_str::<Artifact<T>>(&text) {
                if a.key == key && a.stage == stage {
                    self.cache_hits.push(stage.into());
                    return Ok(a.result);
                }
            }
        }
        let result = compute(self)?;
        let artifact = Artifact {
            stage: stage.to_string(),
            key: key.to_string(),
            result,
        };
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| StageError::io(stage, e))?;
        }
        let text = serde_json::to_string_pretty(&artifact).map_err(|e| StageError::io(stage, e))?;
        fs::write(&path, text + "\n").map_err(|e| StageError::io(stage, e))?;
        self.computed.push(stage.into());
        Ok(artifact.result)
    }

    pub fn gap(&mut self) -> Result<&GapSolution, StageError> {
        if self.gap.is_none() {
            let key = hash_of(&("gap", &self.config.potential, &self.config.grids.gap));
            let (spec, grid) = (self.config.potential.clone(), self.config.grids.gap);
            let sol = self.cached("gap", Path::new("gap.json"), &key, |_| {
                find_tc(&spec, &grid).map_err(StageError::gap)
            })?;
            self.gap = Some((key, sol));
        }
        Ok(&self.gap.as_ref().unwrap().1)
    }

    /// The gap solution rescaled for the configured `D`.
    pub fn normalized(&mut self) -> Result<GapSolution, StageError> {
        let d = self.config.d;
        let sol = self.gap()?;
        normalize(sol, d).map_err(|e| StageError::new("coeffs", "numerical", e))
    }

    pub fn coeffs(&mut self) -> Result<&CoeffsResult, StageError> {
        if self.coeffs.is_none() {
            let norm = self.normalized()?;
            let key = hash_of(&("coeffs", &self.gap.as_ref().unwrap().0, self.config.d));
            let res = self.cached("coeffs", Path::new("coeffs.json"), &key, |_| {
                let err = |e: bcsgl::coeffs::CoeffError| StageError::new("coeffs", "numerical", e);
                Ok(CoeffsResult {
                    coefficients: compute_coefficients(&norm).map_err(err)?,
                    normalization_residual: norm.normalization_residual().unwrap_or(f64::NAN),
                    b3_sech_form: b3_sech_form(&norm).map_err(err)?,
                })
            })?;
            self.coeffs = Some((key, res));
        }
        Ok(&self.coeffs.as_ref().unwrap().1)
    }

    fn gl_options(&self) -> GLOptions {
        GLOptions {
            n_max: self.config.grids.n_max,
            seed: self.config.seed,
            ..GLOptions::default()
        }
    }

    pub fn gl(&mut self) -> Result<&GLState, StageError> {
        if self.gl.is_none() {
            let coef = self.coeffs()?.coefficients.clone();
            let opts = self.gl_options();
            let key = hash_of(&(
                "gl",
                &self.coeffs.as_ref().unwrap().0,
                &self.config.fields.w,
                &self.config.fields.a,
                &opts,
            ));
            let (w, a) = self.config.fields.build(self.config.potential.dim);
            let state = self.cached("gl", Path::new("gl.json"), &key, |_| {
                minimize(&a, &w, &coef, &opts).map_err(StageError::gl)
            })?;
            self.gl = Some((key, state));
        }
        Ok(&self.gl.as_ref().unwrap().1)
    }

    /// Order parameter for the trace sweeps: the configured ψ if any,
    /// otherwise the GL minimizer. Returns it with the cache key it depends on.
    fn sweep_psi(&mut self) -> Result<(TorusField, String), StageError> {
        let dim = self.config.potential.dim;
        match self.config.fields.psi_field(dim) {
            Some(psi) => Ok((psi, hash_of(&self.config.fields.psi))),
            None => {
                let psi = self.gl()?.psi.clone();
                Ok((psi, self.gl.as_ref().unwrap().0.clone()))
            }
        }
    }

    pub fn sweep(&mut self, kind: SweepKind) -> Result<&SweepOutcome, StageError> {
        if !self.sweeps.contains_key(&kind) {
            let stage = kind.name();
            let norm = self.normalized()?;
            let coef = self.coeffs()?.coefficients.clone();
            let (psi, upstream, gl_energy) = match kind {
                SweepKind::Energy => {
                    let gl = self.gl()?;
                    let (psi, e) = (gl.psi.clone(), gl.energy);
                    (psi, self.gl.as_ref().unwrap().0.clone(), e)
                }
                _ => {
                    let (psi, key) = self.sweep_psi()?;
                    (psi, key, f64::NAN)
                }
            };
            let grids = &self.config.grids;
            let key = hash_of(&(
                stage,
                &self.coeffs.as_ref().unwrap().0,
                &upstream,
                &grids.h_list,
                grids.xi_nodes,
                &self.config.fields.w,
                &self.config.fields.a,
            ));
            let dim = self.config.potential.dim;
            let (w, a) = self.config.fields.build(dim);
            let fields = BdgFields::new(psi, a, w).map_err(|e| StageError::bdg(stage, e))?;
            let (h_list, xi_nodes, d) = (grids.h_list.clone(), grids.xi_nodes, self.config.d);
            let file = PathBuf::from("sweeps").join(format!("{stage}.json"));
            let outcome = self.cached(stage, &file, &key, |_| {
                let r = match kind {
                    SweepKind::Trace => trace_sweep(&norm, &fields, &h_list, xi_nodes),
                    SweepKind::Alpha => alpha_sweep(&norm, &fields, &h_list, xi_nodes),
                    SweepKind::Energy => {
                        energy_sweep(&norm, &fields, gl_energy - coef.b3, d, &h_list, xi_nodes)
                    }
                };
                r.map_err(|e| StageError::bdg(stage, e))
            })?;
            self.sweeps.insert(kind, outcome);
        }
        Ok(&self.sweeps[&kind])
    }

    /// CSV of every sweep computed so far, in a fixed order.
    pub fn report_csv(&self) -> String {
        let mut out = String::from("sweep,h,observable,target,residual\n");
        for s in self.sweeps.values() {
            for line in s.report.to_csv().lines().skip(1) {
                out.push_str(line);
                out.push('\n');
            }
        }
        out
    }

    pub fn write_report(&self) -> Result<PathBuf, StageError> {
        let path = self.out.join("report.csv");
        fs::create_dir_all(&self.out).map_err(|e| StageError::io("report", e))?;
        fs::write(&path, self.report_csv()).map_err(|e| StageError::io("report", e))?;
        Ok(path)
    }

    pub fn write_config(&self) -> Result<(), StageError> {
        fs::create_dir_all(&self.out).map_err(|e| StageError::io("config", e))?;
        let text =
            serde_json::to_string_pretty(&self.config).map_err(|e| StageError::io("config", e))?;
        fs::write(self.out.join("config.json"), text + "\n")
            .map_err(|e| StageError::io("config", e))
    }

    /// Every sweep run so far passed its criteria.
    pub fn all_passed(&self) -> bool {
        self.sweeps.values().all(|s| s.passed)
    }
}

fn system<'a>(
    sol: &'a GapSolution,
    fields: &BdgFields,
    h: f64,
    xi_nodes: usize,
) -> Result<FiberSystem<'a>, BdgError> {
    let basis = FiberBasis::covering(h, coverage_radius(sol), xi_nodes)?;
    FiberSystem::new(basis, sol, fields.clone())
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn list(v: &[f64]) -> String {
    v.iter()
        .map(|x| format!("{x:.3e}"))
        .collect::<Vec<_>>()
        .join(", ")
}

/// `lhs - h²E1 - h⁴E2` over `h_list` at `β = β_c`.
pub fn trace_sweep(
    sol: &GapSolution,
    fields: &BdgFields,
    h_list: &[f64],
    xi_nodes: usize,
) -> Result<SweepOutcome, BdgError> {
    let beta = sol.beta_c;
    let report = h_sweep(
        SweepKind::Trace.name(),
        h_list,
        BTreeMap::from([("beta".to_string(), beta)]),
        |h| {
            let x = semiclassical_trace(&system(sol, fields, h, xi_nodes)?, beta)?;
            let details = BTreeMap::from([
                ("lhs".to_string(), x.lhs),
                ("e1_term".to_string(), x.e1_term),
                ("e2_term".to_string(), x.e2_term),
                ("ratio".to_string(), (x.lhs - x.e1_term) / h.powi(4)),
                ("e2".to_string(), x.e2_term / h.powi(4)),
            ]);
            Ok(SweepPoint {
                h,
                observable: x.residual,
                target: x.e2_term / h.powi(4),
                residual: x.residual,
                details,
            })
        },
    )?;
    let last = report.points.last().expect("fit needs points");
    let e2_err = rel(last.details["ratio"], last.details["e2"]);
    let passed = report.fitted_order >= TRACE_ORDER_MIN && e2_err < E2_REL_TOL;
    let summary = format!(
        "residuals [{}]; order {:.2} (need {TRACE_ORDER_MIN}); E2 mismatch {:.2}% at h = {}",
        list(&report.observed),
        report.fitted_order,
        100.0 * e2_err,
        last.h
    );
    Ok(SweepOutcome {
        criteria: BTreeMap::from([
            ("fitted_order".to_string(), report.fitted_order),
            ("e2_rel_err".to_string(), e2_err),
        ]),
        report,
        passed,
        summary,
    })
}

/// `‖α_Δ - (h/2)(ψφ + φψ)‖_{H¹}` over `h_list` at `β = β_c`.
pub fn alpha_sweep(
    sol: &GapSolution,
    fields: &BdgFields,
    h_list: &[f64],
    xi_nodes: usize,
) -> Result<SweepOutcome, BdgError> {
    let beta = sol.beta_c;
    let report = h_sweep(
        SweepKind::Alpha.name(),
        h_list,
        BTreeMap::from([("beta".to_string(), beta)]),
        |h| {
            let d = alpha_delta_distance(&system(sol, fields, h, xi_nodes)?, beta)?;
            let details =
                BTreeMap::from([("l2_leading_sq_over_h".to_string(), d.l2_leading.powi(2) / h)]);
            Ok(SweepPoint {
                h,
                observable: d.h1_distance,
                target: 0.0,
                residual: d.h1_distance,
                details,
            })
        },
    )?;
    let l2: Vec<f64> = report
        .points
        .iter()
        .map(|p| p.details["l2_leading_sq_over_h"])
        .collect();
    let n = l2.len();
    let drift = rel(l2[n - 1], l2[n - 2]);
    let passed = report.fitted_order >= ALPHA_ORDER_MIN && drift < LEADING_NORM_TOL;
    let summary = format!(
        "H1 distances [{}]; order {:.2} (need {ALPHA_ORDER_MIN}); leading norm drift {:.2}%",
        list(&report.observed),
        report.fitted_order,
        100.0 * drift
    );
    Ok(SweepOutcome {
        criteria: BTreeMap::from([
            ("fitted_order".to_string(), report.fitted_order),
            ("leading_norm_drift".to_string(), drift),
        ]),
        report,
        passed,
        summary,
    })
}

/// `Φ(h) - (E^GL - B3)` over `h_list` at `T = T_c(1 - h²D)`.
pub fn energy_sweep(
    sol: &GapSolution,
    fields: &BdgFields,
    target: f64,
    d_param: f64,
    h_list: &[f64],
    xi_nodes: usize,
) -> Result<SweepOutcome, BdgError> {
    let pair = real_space_alpha0(sol, PAIR_GRID.0, PAIR_GRID.1)?;
    let report = h_sweep(
        SweepKind::Energy.name(),
        h_list,
        BTreeMap::from([("gl_minus_b3".to_string(), target)]),
        |h| {
            let e = trial_state_energy(sol, fields, h, d_param, xi_nodes, &pair)?;
            let diff = e.scaled - target;
            let details = BTreeMap::from([
                ("phi".to_string(), e.scaled),
                ("trace_term".to_string(), e.trace_term),
                ("interaction_term".to_string(), e.interaction_term),
                ("pair_term".to_string(), e.pair_term),
            ]);
            Ok(SweepPoint {
                h,
                observable: diff,
                target,
                residual: diff,
                details,
            })
        },
    )?;
    let floor = -UPPER_BOUND_SLACK * target.abs();
    let above = report.observed.iter().all(|&d| d >= floor);
    let decreasing = report.observed.windows(2).all(|w| w[1].abs() < w[0].abs());
    let passed = above && decreasing && report.fitted_order >= ENERGY_ORDER_MIN;
    let summary = format!(
        "Phi - (E_GL - B3) = [{}]; order {:.2} (need {ENERGY_ORDER_MIN}); above bound {above}; decreasing {decreasing}",
        list(&report.observed),
        report.fitted_order
    );
    Ok(SweepOutcome {
        criteria: BTreeMap::from([
            ("fitted_order".to_string(), report.fitted_order),
            ("above_bound".to_string(), above as u8 as f64),
            ("decreasing".to_string(), decreasing as u8 as f64),
        ]),
        report,
        passed,
        summary,
    })
}
