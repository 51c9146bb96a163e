//! Experiment configuration: JSON file, flag overrides, validation.

use std::path::PathBuf;

use gfperc_core::events::{
    AnnulusMode, AnnulusSpec, CrossingSpec, Detector, GoodPointSpec, GoodVariant, SlabEventSpec,
    SproutsSpec,
};
use gfperc_core::fieldgen::{make_kernel, GridGeometry, KernelSpec, SamplerConfig, MIN_WAVES};
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Context};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Sample,
    Estimate,
    Sweep,
    Bisect,
    Validate,
    Renorm,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Sample => "sample",
            Self::Estimate => "estimate",
            Self::Sweep => "sweep",
            Self::Bisect => "bisect",
            Self::Validate => "validate",
            Self::Renorm => "renorm",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct DetectorChoice {
    pub name: String,
    /// Full parameters; when absent they are built from `R` and `level`.
    #[serde(default)]
    pub params: Option<Value>,
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema, clap::ValueEnum,
)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum KernelChoice {
    BargmannFock,
    Series,
    PlaneWaves,
}

fn default_h() -> f64 {
    0.25
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct SamplerParams {
    #[serde(default = "bf")]
    pub kernel: KernelChoice,
    #[serde(default)]
    pub dim: Option<usize>,
    /// Sampled box; defaults to the detector's extent.
    #[serde(default)]
    pub lo: Option<Vec<f64>>,
    #[serde(default)]
    pub hi: Option<Vec<f64>>,
    #[serde(default = "default_h")]
    pub h: f64,
    /// Truncation radius; untruncated when absent.
    #[serde(default)]
    pub r: Option<f64>,
    #[serde(default)]
    pub coupled: bool,
    #[serde(default)]
    pub num_waves: Option<usize>,
}

fn bf() -> KernelChoice {
    KernelChoice::BargmannFock
}

impl Default for SamplerParams {
    fn default() -> Self {
        Self {
            kernel: bf(),
            dim: None,
            lo: None,
            hi: None,
            h: default_h(),
            r: None,
            coupled: false,
            num_waves: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct SweepParams {
    pub levels: Vec<f64>,
    #[serde(default)]
    pub common_rng: bool,
}

fn half() -> f64 {
    0.5
}

fn default_bracket() -> (f64, f64) {
    (-0.5, 0.5)
}

fn default_tol() -> f64 {
    0.02
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct BisectParams {
    #[serde(default = "half")]
    pub target: f64,
    #[serde(default = "default_bracket")]
    pub bracket: (f64, f64),
    #[serde(default = "default_tol")]
    pub tol: f64,
}

impl Default for BisectParams {
    fn default() -> Self {
        Self {
            target: half(),
            bracket: default_bracket(),
            tol: default_tol(),
        }
    }
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema, clap::ValueEnum,
)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    Covariance,
    Fkg,
    Truncation,
    Sprinkling,
    Kacrice,
    Duality,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ValidateParams {
    pub check: Check,
    #[serde(default)]
    pub lags: Option<Vec<f64>>,
    /// Sprinkling shift.
    #[serde(default)]
    pub t: Option<f64>,
    #[serde(default)]
    pub radii: Option<Vec<f64>>,
    #[serde(default)]
    pub threshold_const: Option<f64>,
    /// Event pairs for the association check.
    #[serde(default)]
    pub pairs: Option<Vec<(DetectorChoice, DetectorChoice)>>,
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema, clap::ValueEnum,
)]
#[serde(rename_all = "snake_case")]
pub enum RenormAction {
    Verify,
    Simulate,
}

/// Bounds on `P[H_n^c]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum HMode {
    Cap,
    Eps { r: f64, gamma: f64, beta: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct RenormParams {
    pub action: RenormAction,
    #[serde(default)]
    pub lambda: Option<u64>,
    #[serde(default)]
    pub rho: Option<u64>,
    #[serde(default)]
    pub sigma: Option<u64>,
    #[serde(default)]
    pub d: Option<usize>,
    /// Absolute `q0`; the cap `qbar0` when absent.
    #[serde(default)]
    pub q0: Option<f64>,
    #[serde(default)]
    pub hmode: Option<HMode>,
    #[serde(default)]
    pub nmax: Option<usize>,
    #[serde(default)]
    pub trials: Option<u64>,
    #[serde(default)]
    pub pairs: Option<usize>,
    #[serde(default)]
    pub p_g0: Option<f64>,
    #[serde(default)]
    pub p_h: Option<f64>,
}

fn default_n() -> u64 {
    1000
}

/// Everything needed to reproduce a run. `workers` and `out` do not affect
/// results and are left out of the hash.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Command,
    #[serde(default)]
    pub detector: Option<DetectorChoice>,
    #[serde(default)]
    pub sampler: SamplerParams,
    #[serde(default = "default_n")]
    pub n: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, rename = "R")]
    pub scale: Option<f64>,
    #[serde(default)]
    pub level: f64,
    /// Record wall-clock time in CSV rows (breaks bitwise reproducibility).
    #[serde(default)]
    pub timing: bool,
    #[serde(default)]
    pub sweep: Option<SweepParams>,
    #[serde(default)]
    pub bisect: Option<BisectParams>,
    #[serde(default)]
    pub validate: Option<ValidateParams>,
    #[serde(default)]
    pub renorm: Option<RenormParams>,
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

/// Parses a config value, reporting the failing field path.
pub fn parse(value: Value) -> Result<ExperimentConfig, CliError> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        CliError::config(
            if path == "." { String::new() } else { path },
            e.inner().to_string(),
        )
    })
}

pub fn parse_text(text: &str) -> Result<ExperimentConfig, CliError> {
    let value: Value = serde_json::from_str(text).map_err(|e| {
        CliError::config(
            "",
            format!(
                "malformed JSON at line {}, column {}: {e}",
                e.line(),
                e.column()
            ),
        )
    })?;
    parse(value)
}

/// Sets `value[path...] = v`, creating objects along the way.
pub fn set_path(value: &mut Value, path: &[&str], v: Value) -> Result<(), CliError> {
    let mut cur = value;
    for (i, key) in path.iter().enumerate() {
        let obj = match cur {
            Value::Object(m) => m,
            Value::Null => {
                *cur = Value::Object(Map::new());
                cur.as_object_mut().expect("object")
            }
            _ => return Err(CliError::config(path[..i].join("."), "expected an object")),
        };
        if i + 1 == path.len() {
            obj.insert(key.to_string(), v);
            return Ok(());
        }
        cur = obj.entry(key.to_string()).or_insert(Value::Null);
    }
    Ok(())
}

impl ExperimentConfig {
    /// SHA-256 of the canonical JSON without `workers` and `out`.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.workers = None;
        c.out = None;
        let bytes = serde_json::to_vec(&c).expect("config serializes");
        format!("{:x}", Sha256::digest(&bytes))
    }

    pub fn scale_or(&self, default: f64) -> f64 {
        self.scale.unwrap_or(default)
    }

    pub fn detector(&self) -> Result<Detector, CliError> {
        let choice = self
            .detector
            .as_ref()
            .ok_or_else(|| CliError::config("detector", "this command needs a detector"))?;
        resolve_detector(
            choice,
            self.scale_or(10.0),
            self.level,
            self.sampler.dim,
            "detector",
        )
    }

    /// Sampler covering `det` (or the explicit box).
    pub fn sampler_for(&self, det: Option<&Detector>) -> Result<SamplerConfig, CliError> {
        let sp = &self.sampler;
        let dim = match (det.and_then(Detector::dim), sp.dim) {
            (Some(a), Some(b)) if a != b => {
                return Err(CliError::config(
                    "sampler.dim",
                    format!("detector needs dimension {a}, sampler has {b}"),
                ))
            }
            (a, b) => a.or(b).unwrap_or(2),
        };
        let (lo, hi) = match (&sp.lo, &sp.hi) {
            (Some(lo), Some(hi)) => (lo.clone(), hi.clone()),
            (None, None) => match det.and_then(Detector::extent) {
                Some(e) => e,
                None => {
                    let w = self.scale_or(4.0);
                    (vec![-w; dim], vec![w; dim])
                }
            },
            _ => {
                return Err(CliError::config(
                    "sampler.lo",
                    "give both lo and hi, or neither",
                ))
            }
        };
        if lo.len() != dim || hi.len() != dim {
            return Err(CliError::config(
                "sampler.lo",
                format!("box must be {dim}-dimensional"),
            ));
        }
        let coupled = sp.coupled || det.is_some_and(Detector::needs_coupled);
        let spec = KernelSpec::bargmann_fock(dim);
        let r = match (sp.r, det) {
            (Some(r), _) => Some(r),
            (None, Some(Detector::GoodPoint(g))) => Some(g.truncation_radius(spec.r_q())),
            _ => None,
        };
        match sp.kernel {
            KernelChoice::BargmannFock => {
                let kernel = make_kernel(spec, r).at("sampler.r")?;
                let pad = if coupled {
                    kernel.untruncated().support_radius()
                } else {
                    kernel.support_radius()
                };
                let grid = GridGeometry::snapped(&lo, &hi, sp.h, pad).at("sampler")?;
                Ok(SamplerConfig::Convolution {
                    kernel,
                    grid,
                    coupled,
                })
            }
            KernelChoice::Series | KernelChoice::PlaneWaves if coupled || r.is_some() => {
                Err(CliError::config(
                    "sampler.kernel",
                    "truncation and coupling need the bargmann_fock convolution sampler",
                ))
            }
            KernelChoice::Series => Ok(SamplerConfig::Series {
                grid: GridGeometry::snapped(&lo, &hi, sp.h, 0.0).at("sampler")?,
                degree: None,
            }),
            KernelChoice::PlaneWaves => Ok(SamplerConfig::PlaneWaves {
                grid: GridGeometry::snapped(&lo, &hi, sp.h, 0.0).at("sampler")?,
                num_waves: sp.num_waves.unwrap_or(MIN_WAVES),
            }),
        }
    }
}

/// Builds a detector from explicit parameters or from `(R, level)`.
pub fn resolve_detector(
    choice: &DetectorChoice,
    scale: f64,
    level: f64,
    dim: Option<usize>,
    path: &str,
) -> Result<Detector, CliError> {
    if let Some(p) = &choice.params {
        return Detector::from_name(&choice.name, p.clone()).at(&format!("{path}.params"));
    }
    let r = scale;
    let origin = vec![0.0; dim.unwrap_or(2)];
    let d = match choice.name.as_str() {
        "crossing" => Detector::Crossing(CrossingSpec::square(r, level)),
        "complement_crossing" => Detector::ComplementCrossing(CrossingSpec::square(r, level)),
        "annulus" => Detector::Annulus(AnnulusSpec::new(origin, 1.0, r, AnnulusMode::Arm, level)),
        "two_arms" => Detector::TwoArms {
            center: vec![0.0; 3],
            r_inner: 1.0,
            r_outer: r,
            level,
        },
        "orthogonal_squares" => Detector::OrthogonalSquares { r, level },
        "uniqueness" => Detector::Uniqueness(SlabEventSpec::scaled(r, 0.5, 0.25).shifted(level)),
        "sprouts" => Detector::Sprouts(SproutsSpec::new(r, 0.5, 0.2).shifted(level)),
        "good_point" => Detector::GoodPoint(
            GoodPointSpec::new(r, 0.25, 0.2, 0.5, GoodVariant::Planar).shifted(level),
        ),
        "component_count" => Detector::ComponentCount {
            center: origin,
            radius: r,
            level,
        },
        "point_value" => Detector::PointValue {
            point: origin,
            level,
        },
        "coin" => Detector::Coin { p: 0.5 },
        "contact_points" => {
            return Err(CliError::config(
                format!("{path}.params"),
                "contact_points needs explicit params (path, rho, scale)",
            ))
        }
        other => {
            return Err(CliError::config(
                format!("{path}.name"),
                format!("unknown detector `{other}`"),
            ))
        }
    };
    Ok(d)
}

/// Parameters of a detector as stored in CSV rows.
pub fn params_json(det: &Detector) -> String {
    let v = serde_json::to_value(det).expect("detector serializes");
    match v {
        Value::Object(m) => m
            .into_iter()
            .next()
            .map(|(_, p)| p.to_string())
            .unwrap_or_default(),
        other => other.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn errors_carry_field_paths() {
        let e = parse(json!({"command": "estimate", "sampler": {"h": "x"}})).unwrap_err();
        assert_eq!(e.path, "sampler.h");
        let e = parse(json!({"command": "estimate", "bogus": 1})).unwrap_err();
        assert!(e.message.contains("bogus"));
        let e = parse(json!({"command": "nope"})).unwrap_err();
        assert_eq!(e.path, "command");
        assert!(parse_text("{not json")
            .unwrap_err()
            .message
            .contains("malformed"));
    }

    #[test]
    fn overrides_and_hash() {
        let mut v = json!({"command": "estimate"});
        set_path(&mut v, &["sampler", "h"], json!(0.5)).unwrap();
        set_path(&mut v, &["n"], json!(7)).unwrap();
        let c = parse(v).unwrap();
        assert_eq!((c.sampler.h, c.n), (0.5, 7));
        let mut d = c.clone();
        d.workers = Some(3);
        d.out = Some("x".into());
        assert_eq!(c.hash(), d.hash());
        d.seed = 1;
        assert_ne!(c.hash(), d.hash());
    }

    #[test]
    fn default_detector_and_box() {
        let c = parse(json!({"command": "estimate", "detector": {"name": "crossing"}, "R": 10.0}))
            .unwrap();
        let det = c.detector().unwrap();
        assert_eq!(det, Detector::Crossing(CrossingSpec::square(10.0, 0.0)));
        let s = c.sampler_for(Some(&det)).unwrap();
        assert_eq!(s.grid().lo, vec![0.0, 0.0]);
        assert_eq!(s.grid().hi, vec![10.0, 10.0]);
        let bad = parse(json!({"command": "estimate", "detector": {"name": "nope"}})).unwrap();
        assert_eq!(bad.detector().unwrap_err().path, "detector.name");
        let bad = parse(
            json!({"command": "estimate", "detector": {"name": "crossing", "params": {"lo": 1}}}),
        )
        .unwrap();
        assert_eq!(bad.detector().unwrap_err().path, "detector.params");
    }
}
