//! Run configuration: TOML (or JSON) with an optional named preset
//! underneath. Every error carries the dotted path of the offending key.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::presets;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    /// Dotted key path, or the file name for syntax and IO errors.
    pub path: String,
    pub message: String,
}

impl ConfigError {
    fn at(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
#[derive(Default)]
pub struct RunConfig {
    pub preset: Option<String>,
    pub seed: u64,
    pub problem: ProblemConfig,
    pub parameterization: ParamConfig,
    pub smoothing: SmoothingConfig,
    pub optimizer: OptimizerConfig,
    pub output: OutputConfig,
}


#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    Annulus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceConfig {
    Gaussian { center: [f64; 2], width: f64 },
    Linear { gradient: [f64; 2], offset: f64 },
    Constant { value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reference {
    /// Zero target state.
    Zero,
    /// Evaluated on the undeformed baseline.
    Baseline,
    /// Evaluated at the initial design.
    Initial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ValueOrReference<T> {
    Value(T),
    Reference(Reference),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProblemConfig {
    pub kind: ProblemKind,
    /// Surface nodes on the unit circle.
    pub n_s: usize,
    pub layers: usize,
    pub outer_radius: f64,
    pub coupling: f64,
    pub omega: Option<f64>,
    pub gamma: f64,
    pub source: SourceConfig,
    /// Surface target state: explicit values, `"zero"` or `"baseline"`.
    pub target: ValueOrReference<Vec<f64>>,
    /// Area equality: a value, `"baseline"` or `"initial"`; absent disables it.
    pub area_target: Option<ValueOrReference<f64>>,
    /// Node radius lower bound; absent disables it.
    pub radius_min: Option<f64>,
    pub center: [f64; 2],
    pub solver_tol: f64,
    pub solver_max_iter: usize,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        Self {
            kind: ProblemKind::Annulus,
            n_s: 32,
            layers: 4,
            outer_radius: 3.0,
            coupling: 1.0,
            omega: None,
            gamma: 0.05,
            source: SourceConfig::Gaussian {
                center: [1.6, 0.4],
                width: 0.8,
            },
            target: ValueOrReference::Reference(Reference::Zero),
            area_target: None,
            radius_min: None,
            center: [0.0, 0.0],
            solver_tol: 1e-12,
            solver_max_iter: 100_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    HicksHenne,
    Ffd,
    NonlinearRadial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisKind {
    Fourier,
    Nodal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisConfig {
    X,
    Y,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadialModes {
    /// `[k, a, b]` adds `a cos kθ + b sin kθ` at every node angle θ.
    pub radial_modes: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialDesign {
    Values(Vec<f64>),
    Modes(RadialModes),
    Reference(Reference),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParamConfig {
    pub kind: ParamKind,
    /// Hicks–Henne: bumps per side at uniform peaks, unless `peaks` is set.
    pub per_side: usize,
    pub peaks: Option<Vec<f64>>,
    pub exponent: f64,
    /// FFD lattice and box margin.
    pub nx: usize,
    pub ny: usize,
    pub margin: f64,
    pub axis: AxisConfig,
    /// Radial map basis.
    pub basis: BasisKind,
    pub modes: usize,
    pub alpha: f64,
    /// `"zero"`, explicit values, or radial modes (nodal radial only).
    pub initial: InitialDesign,
}

impl Default for ParamConfig {
    fn default() -> Self {
        Self {
            kind: ParamKind::HicksHenne,
            per_side: 6,
            peaks: None,
            exponent: 3.0,
            nx: 4,
            ny: 3,
            margin: 0.1,
            axis: AxisConfig::Y,
            basis: BasisKind::Fourier,
            modes: 3,
            alpha: 0.0,
            initial: InitialDesign::Reference(Reference::Zero),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormulationConfig {
    Surface,
    Volume,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SmoothingConfig {
    pub eps1: f64,
    pub eps2: f64,
    pub eps3: f64,
    pub formulation: FormulationConfig,
    pub identity_as_matrix: bool,
}

impl Default for SmoothingConfig {
    fn default() -> Self {
        Self {
            eps1: 0.1,
            eps2: 0.05,
            eps3: 0.01,
            formulation: FormulationConfig::Surface,
            identity_as_matrix: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    SqpEq,
    SqpMixed,
    GradDesc,
    Oneshot,
    OneshotConstrained,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::SqpEq => "sqp_eq",
            Algorithm::SqpMixed => "sqp_mixed",
            Algorithm::GradDesc => "grad_desc",
            Algorithm::Oneshot => "oneshot",
            Algorithm::OneshotConstrained => "oneshot_constrained",
        }
    }

    pub fn is_oneshot(self) -> bool {
        matches!(self, Algorithm::Oneshot | Algorithm::OneshotConstrained)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HessianKind {
    Sobolev,
    Identity,
    FiniteDifference,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Auto {
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RegularizationConfig {
    Fixed(f64),
    Auto(Auto),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    pub algorithm: Algorithm,
    pub hessian: HessianKind,
    /// `B = identity_scale · I` for the identity model.
    pub identity_scale: f64,
    pub fd_step: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Piggyback steps per outer iteration.
    pub inner_steps: usize,
    /// `‖v‖_∞` bound; One Shot defaults to 5e-3, SQP to none.
    pub max_design_update: Option<f64>,
    /// Gradient-descent step length.
    pub step: f64,
    pub regularization: RegularizationConfig,
    pub adjoint_carryover: bool,
    pub warm_start: bool,
    pub divergence_factor: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::SqpMixed,
            hessian: HessianKind::Sobolev,
            identity_scale: 1.0,
            fd_step: 1e-4,
            tol: 1e-6,
            max_iter: 200,
            inner_steps: 10,
            max_design_update: None,
            step: 0.1,
            regularization: RegularizationConfig::Auto(Auto::Auto),
            adjoint_carryover: true,
            warm_start: true,
            divergence_factor: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub directory: String,
    /// Record wall-clock times; off keeps every artifact byte-reproducible.
    pub timing: bool,
    pub dump_volume: bool,
    pub dump_operators: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: "shapeopt-out".into(),
            timing: false,
            dump_volume: false,
            dump_operators: false,
        }
    }
}

/// Name of the environment variable that overrides `output.directory`.
pub const OUTPUT_DIR_ENV: &str = "SHAPEOPT_OUTPUT_DIR";

/// Recursive merge; objects combine key by key, anything else in `top`
/// replaces `base`. An object whose `kind` differs replaces the old one
/// entirely, so stale variant keys do not leak through.
pub fn deep_merge(base: &mut Value, top: Value) {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) if t.get("kind").is_none_or(|k| b.get("kind").is_none_or(|bk| bk == k)) => {
            for (k, v) in t {
                match b.get_mut(&k) {
                    Some(slot) => deep_merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

pub fn parse_toml_value(text: &str, origin: &str) -> Result<Value, ConfigError> {
    let v: toml::Value = toml::from_str(text).map_err(|e| ConfigError::at(origin, e.to_string()))?;
    serde_json::to_value(v).map_err(|e| ConfigError::at(origin, e.to_string()))
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let origin = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::at(&origin, e.to_string()))?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let value = if is_json {
            serde_json::from_str(&text).map_err(|e| ConfigError::at(&origin, e.to_string()))?
        } else {
            parse_toml_value(&text, &origin)?
        };
        Self::from_value(value)
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Self::from_value(parse_toml_value(text, "<config>")?)
    }

    /// Resolves the preset, deserializes and validates.
    pub fn from_value(value: Value) -> Result<Self, ConfigError> {
        let mut merged = match value.get("preset") {
            None | Some(Value::Null) => Value::Object(Default::default()),
            Some(Value::String(name)) => {
                let text = presets::preset_toml(name).ok_or_else(|| {
                    ConfigError::at(
                        "preset",
                        format!("unknown preset `{name}`; available: {}", presets::names().join(", ")),
                    )
                })?;
                parse_toml_value(text, "preset")?
            }
            Some(_) => return Err(ConfigError::at("preset", "expected a preset name")),
        };
        deep_merge(&mut merged, value);
        let cfg: RunConfig = serde_path_to_error::deserialize(merged).map_err(|e| {
            let path = e.path().to_string();
            ConfigError::at(if path == "." { "<root>".into() } else { path }, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        fn check(ok: bool, path: &str, msg: impl FnOnce() -> String) -> Result<(), ConfigError> {
            if ok {
                Ok(())
            } else {
                Err(ConfigError::at(path, msg()))
            }
        }
        fn positive(x: f64, path: &str) -> Result<(), ConfigError> {
            check(x > 0.0 && x.is_finite(), path, || format!("must be positive and finite, got {x}"))
        }
        fn non_negative(x: f64, path: &str) -> Result<(), ConfigError> {
            check(x >= 0.0 && x.is_finite(), path, || format!("must be non-negative and finite, got {x}"))
        }

        let pr = &self.problem;
        check(pr.n_s >= 3, "problem.n_s", || format!("need at least 3 surface nodes, got {}", pr.n_s))?;
        check(pr.layers >= 1, "problem.layers", || "need at least one layer".into())?;
        check(pr.outer_radius > 1.0 && pr.outer_radius.is_finite(), "problem.outer_radius", || {
            format!("must exceed the unit surface radius, got {}", pr.outer_radius)
        })?;
        non_negative(pr.coupling, "problem.coupling")?;
        if let Some(w) = pr.omega {
            check(w > 0.0 && w <= 1.0, "problem.omega", || format!("must lie in (0, 1], got {w}"))?;
        }
        non_negative(pr.gamma, "problem.gamma")?;
        match &pr.source {
            SourceConfig::Gaussian { width, .. } => positive(*width, "problem.source.width")?,
            SourceConfig::Linear { .. } | SourceConfig::Constant { .. } => {}
        }
        match &pr.target {
            ValueOrReference::Value(t) => check(t.len() == pr.n_s, "problem.target", || {
                format!("expected {} values, got {}", pr.n_s, t.len())
            })?,
            ValueOrReference::Reference(r) => check(*r != Reference::Initial, "problem.target", || {
                "use `zero`, `baseline` or explicit values".into()
            })?,
        }
        if let Some(ValueOrReference::Reference(Reference::Zero)) = pr.area_target {
            return Err(ConfigError::at("problem.area_target", "use a value, `baseline` or `initial`"));
        }
        if let Some(r) = pr.radius_min {
            positive(r, "problem.radius_min")?;
        }
        positive(pr.solver_tol, "problem.solver_tol")?;
        check(pr.solver_max_iter >= 1, "problem.solver_max_iter", || "must be at least 1".into())?;

        let pa = &self.parameterization;
        match pa.kind {
            ParamKind::HicksHenne => {
                check(pa.exponent >= 1.0 && pa.exponent.is_finite(), "parameterization.exponent", || {
                    format!("must be at least 1, got {}", pa.exponent)
                })?;
                match &pa.peaks {
                    Some(peaks) => {
                        check(!peaks.is_empty(), "parameterization.peaks", || "must not be empty".into())?;
                        for (i, x) in peaks.iter().enumerate() {
                            check(*x > 0.0 && *x < 1.0, &format!("parameterization.peaks[{i}]"), || {
                                format!("must lie in (0, 1), got {x}")
                            })?;
                        }
                    }
                    None => check(pa.per_side >= 1, "parameterization.per_side", || "must be at least 1".into())?,
                }
            }
            ParamKind::Ffd => {
                check(pa.nx >= 2, "parameterization.nx", || format!("must be at least 2, got {}", pa.nx))?;
                check(pa.ny >= 2, "parameterization.ny", || format!("must be at least 2, got {}", pa.ny))?;
                positive(pa.margin, "parameterization.margin")?;
            }
            ParamKind::NonlinearRadial => {
                if pa.basis == BasisKind::Fourier {
                    check(pa.modes >= 1, "parameterization.modes", || "must be at least 1".into())?;
                }
                check(pa.alpha.is_finite(), "parameterization.alpha", || "must be finite".into())?;
            }
        }
        match &pa.initial {
            InitialDesign::Values(v) => {
                for (i, x) in v.iter().enumerate() {
                    check(x.is_finite(), &format!("parameterization.initial[{i}]"), || "must be finite".into())?;
                }
            }
            InitialDesign::Modes(m) => {
                check(pa.kind == ParamKind::NonlinearRadial && pa.basis == BasisKind::Nodal, "parameterization.initial", || {
                    "radial modes need the nodal radial parameterization".into()
                })?;
                for (i, [k, a, b]) in m.radial_modes.iter().enumerate() {
                    check(k.fract() == 0.0 && *k >= 0.0 && a.is_finite() && b.is_finite(), &format!(
                        "parameterization.initial.radial_modes[{i}]"
                    ), || "expected [non-negative integer k, a, b]".into())?;
                }
            }
            InitialDesign::Reference(r) => check(*r == Reference::Zero, "parameterization.initial", || {
                "use `zero`, explicit values or radial modes".into()
            })?,
        }

        let sm = &self.smoothing;
        non_negative(sm.eps1, "smoothing.eps1")?;
        non_negative(sm.eps2, "smoothing.eps2")?;
        non_negative(sm.eps3, "smoothing.eps3")?;
        if self.optimizer.hessian == HessianKind::Sobolev {
            check(sm.eps1 + sm.eps2 + sm.eps3 > 0.0, "smoothing", || "weights must not all vanish".into())?;
        }

        let op = &self.optimizer;
        positive(op.identity_scale, "optimizer.identity_scale")?;
        positive(op.fd_step, "optimizer.fd_step")?;
        non_negative(op.tol, "optimizer.tol")?;
        check(op.inner_steps >= 1, "optimizer.inner_steps", || "must be at least 1".into())?;
        if let Some(b) = op.max_design_update {
            check(b > 0.0, "optimizer.max_design_update", || format!("must be positive, got {b}"))?;
        }
        positive(op.step, "optimizer.step")?;
        if let RegularizationConfig::Fixed(c) = op.regularization {
            non_negative(c, "optimizer.regularization")?;
        }
        check(op.divergence_factor > 1.0, "optimizer.divergence_factor", || {
            format!("must exceed 1, got {}", op.divergence_factor)
        })?;
        check(!self.output.directory.is_empty(), "output.directory", || "must not be empty".into())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = RunConfig::from_toml("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn paths_in_errors() {
        let e = RunConfig::from_toml("[smoothing]\neps2 = -1.0\n").unwrap_err();
        assert_eq!(e.path, "smoothing.eps2");
        let e = RunConfig::from_toml("[smoothing]\neps2 = \"x\"\n").unwrap_err();
        assert_eq!(e.path, "smoothing.eps2");
        let e = RunConfig::from_toml("[optimizer]\nalgorithm = \"bfgs\"\n").unwrap_err();
        assert_eq!(e.path, "optimizer.algorithm");
        let e = RunConfig::from_toml("[problem]\nbogus = 1\n").unwrap_err();
        assert!(e.path.starts_with("problem"), "{e}");
        let e = RunConfig::from_toml("preset = \"nope\"\n").unwrap_err();
        assert_eq!(e.path, "preset");
        let e = RunConfig::from_toml("[parameterization]\npeaks = [0.5, 1.5]\n").unwrap_err();
        assert_eq!(e.path, "parameterization.peaks[1]");
    }

    #[test]
    fn file_overrides_preset() {
        let cfg = RunConfig::from_toml("preset = \"naca-analogue-sobolev\"\n[smoothing]\neps2 = 0.5\n").unwrap();
        assert_eq!(cfg.smoothing.eps1, 1.0);
        assert_eq!(cfg.smoothing.eps2, 0.5);
    }

    #[test]
    fn merge_is_recursive() {
        let mut a = serde_json::json!({"x": {"y": 1, "z": 2}, "w": [1]});
        deep_merge(&mut a, serde_json::json!({"x": {"y": 3}, "w": [2, 3]}));
        assert_eq!(a, serde_json::json!({"x": {"y": 3, "z": 2}, "w": [2, 3]}));
        let mut s = serde_json::json!({"source": {"kind": "gaussian", "width": 1.0}});
        deep_merge(&mut s, serde_json::json!({"source": {"kind": "constant", "value": 2.0}}));
        assert_eq!(s, serde_json::json!({"source": {"kind": "constant", "value": 2.0}}));
    }
}
