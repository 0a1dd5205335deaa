//! Instance configuration files.
//!
//! ```json
//! {
//!   "schema": "cframe-config/1",
//!   "frame": {"builtin": "example_2_3", "N": 6, "alpha": 1.0, "r": 2, "gauss": 32},
//!   "K": {"builtin": "coordinate_projection_r", "r": 2},
//!   "seed": 42
//! }
//! ```
//!
//! Operators are either serialized `ModuleOperator`s or one of the builtins
//! `identity`, `alpha_identity {alpha}`, `coordinate_projection_r {r}` and
//! `diagonal {values}` (one value per flattened coordinate, block by block,
//! each a real or `[re, im]`).

use std::path::Path;

use anyhow::{anyhow, bail, Context};
use cframe::frames::{self, SampledFrameFamily};
use cframe::module::BlockDiagonal;
use cframe::{
    AlgebraSignature, CMatrix, Instance, ModuleOperator, ModuleVector, QuadratureRule, RuleSpec, Tolerances, C64,
};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer};
use serde_json::Value;

/// Name of the builtin frame family.
pub const HARMONIC_RAMP: &str = "example_2_3";
pub const CONFIG_SCHEMA: &str = "cframe-config/1";

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceConfig {
    /// Optional; must be `cframe-config/1` when present.
    pub schema: Option<String>,
    pub signature: Option<AlgebraSignature>,
    pub rank: Option<usize>,
    pub quadrature: Option<RuleSpec>,
    pub frame: FrameSpec,
    #[serde(rename = "C")]
    pub c: Option<Value>,
    #[serde(rename = "K")]
    pub k: Option<Value>,
    #[serde(rename = "T")]
    pub t: Option<Value>,
    #[serde(rename = "M")]
    pub m: Option<Value>,
    #[serde(default)]
    pub tolerances: Tolerances,
    pub seed: Option<u64>,
    pub assert_bounds: Option<AssertedBounds>,
    pub a_candidate: Option<f64>,
}

/// A builtin family when the object has a `builtin` key, explicit vectors
/// otherwise.
#[derive(Debug)]
pub enum FrameSpec {
    Builtin(RampSpec),
    Explicit(ExplicitFrame),
}

impl<'de> Deserialize<'de> for FrameSpec {
    fn deserialize<D: Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let v = Value::deserialize(de)?;
        let parsed = if v.get("builtin").is_some() {
            serde_path_to_error::deserialize(v).map(FrameSpec::Builtin)
        } else {
            serde_path_to_error::deserialize(v).map(FrameSpec::Explicit)
        };
        parsed.map_err(|e| {
            let path = e.path().to_string();
            D::Error::custom(format!("{} (at `{path}`)", e.into_inner()))
        })
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RampSpec {
    pub builtin: String,
    #[serde(rename = "N")]
    pub size: usize,
    pub alpha: f64,
    /// Default projection rank for `K`.
    pub r: Option<usize>,
    /// Gauss–Legendre order on `[0, 1]` when no quadrature is given.
    pub gauss: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitFrame {
    pub rule: Option<RuleSpec>,
    pub vectors: Vec<ModuleVector>,
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssertedBounds {
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
}

/// Everything a command needs, validated.
#[derive(Debug)]
pub struct Loaded {
    pub instance: Instance,
    pub seed: Option<u64>,
    pub assert_bounds: Option<(f64, f64)>,
    pub a_candidate: Option<f64>,
}

const DEFAULT_GAUSS: usize = 32;

pub fn parse(text: &str) -> anyhow::Result<InstanceConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        anyhow!("invalid config at `{path}`: {}", e.into_inner())
    })
}

pub fn load(path: &Path, tol_override: Option<f64>) -> anyhow::Result<Loaded> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    parse(&text)?.resolve(tol_override)
}

impl InstanceConfig {
    pub fn resolve(self, tol_override: Option<f64>) -> anyhow::Result<Loaded> {
        if let Some(schema) = &self.schema {
            if schema != CONFIG_SCHEMA {
                bail!("schema: unsupported `{schema}` (expected `{CONFIG_SCHEMA}`)");
            }
        }
        let mut tol = self.tolerances;
        if let Some(x) = tol_override {
            if !(x.is_finite() && x > 0.0) {
                bail!("--tol must be a positive number, got {x}");
            }
            tol.psd = x;
            tol.slack = x;
        }
        let top_rule = self.quadrature.as_ref().map(|r| r.build()).transpose().context("quadrature")?;

        let (family, default_c, default_k) = match &self.frame {
            FrameSpec::Builtin(spec) => {
                if spec.builtin != HARMONIC_RAMP {
                    bail!("frame.builtin: unknown builtin `{}` (expected `{HARMONIC_RAMP}`)", spec.builtin);
                }
                let rule = match (top_rule, spec.gauss) {
                    (Some(_), Some(_)) => bail!("frame.gauss conflicts with the top-level quadrature"),
                    (Some(rule), None) => rule,
                    (None, n) => cframe::quadrature::gauss_legendre(n.unwrap_or(DEFAULT_GAUSS), 0.0, 1.0)
                        .context("frame.gauss")?,
                };
                let ramp = frames::harmonic_ramp(spec.size, spec.alpha, rule).context("frame")?;
                let k = spec.r.map(|r| ramp.projection(r)).transpose().context("frame.r")?;
                (ramp.family, Some(ramp.controller), k)
            }
            FrameSpec::Explicit(ex) => {
                let rule: QuadratureRule = match (&ex.rule, top_rule) {
                    (Some(spec), _) => spec.build().context("frame.rule")?,
                    (None, Some(rule)) => rule,
                    (None, None) => bail!("frame: explicit vectors need `frame.rule` or a top-level `quadrature`"),
                };
                let family = SampledFrameFamily::new(rule, ex.vectors.clone()).context("frame.vectors")?;
                (family, None, None)
            }
        };

        if let Some(sig) = &self.signature {
            if sig != family.signature() {
                bail!(
                    "signature: {:?} does not match the frame's {:?}",
                    sig.block_dims(),
                    family.signature().block_dims()
                );
            }
        }
        if let Some(d) = self.rank {
            if d != family.rank() {
                bail!("rank: {d} does not match the frame's rank {}", family.rank());
            }
        }

        let sig = family.signature().clone();
        let d = family.rank();
        let op = |name: &str, v: &Option<Value>| -> anyhow::Result<Option<ModuleOperator>> {
            v.as_ref().map(|v| operator(v, &sig, d).with_context(|| format!("operator {name}"))).transpose()
        };
        let c = op("C", &self.c)?.or(default_c).unwrap_or_else(|| ModuleOperator::identity(&sig, d));
        let k = op("K", &self.k)?.or(default_k).ok_or_else(|| anyhow!("K: missing (give an operator or `frame.r`)"))?;
        let t = op("T", &self.t)?;
        let m = op("M", &self.m)?;

        let instance = Instance::new(family, c, k, t, m, tol).context("instance")?;
        Ok(Loaded {
            instance,
            seed: self.seed,
            assert_bounds: self.assert_bounds.map(|b| (b.a, b.b)),
            a_candidate: self.a_candidate,
        })
    }
}

fn number(v: &Value, field: &str) -> anyhow::Result<f64> {
    v.get(field)
        .ok_or_else(|| anyhow!("missing field `{field}`"))?
        .as_f64()
        .ok_or_else(|| anyhow!("`{field}` must be a number"))
}

fn complex(v: &Value) -> anyhow::Result<C64> {
    match v {
        Value::Number(n) => Ok(C64::new(n.as_f64().expect("finite JSON number"), 0.0)),
        Value::Array(parts) if parts.len() == 2 => {
            let re = parts[0].as_f64().ok_or_else(|| anyhow!("real part must be a number"))?;
            let im = parts[1].as_f64().ok_or_else(|| anyhow!("imaginary part must be a number"))?;
            Ok(C64::new(re, im))
        }
        other => bail!("expected a number or [re, im], got {other}"),
    }
}

fn operator(v: &Value, sig: &AlgebraSignature, d: usize) -> anyhow::Result<ModuleOperator> {
    let Some(name) = v.get("builtin") else {
        let op: ModuleOperator = serde_json::from_value(v.clone())?;
        if op.signature() != sig || op.rank() != d {
            bail!(
                "shape {:?} × {} does not match the frame's {:?} × {d}",
                op.signature().block_dims(),
                op.rank(),
                sig.block_dims()
            );
        }
        return Ok(op);
    };
    let name = name.as_str().ok_or_else(|| anyhow!("`builtin` must be a string"))?;
    Ok(match name {
        "identity" => ModuleOperator::identity(sig, d),
        "alpha_identity" => ModuleOperator::scalar(sig, d, C64::new(number(v, "alpha")?, 0.0)),
        "coordinate_projection_r" => {
            if d != 1 || !sig.is_commutative() {
                bail!("coordinate_projection_r needs a rank-one module over a commutative algebra");
            }
            let r = v.get("r").and_then(Value::as_u64).ok_or_else(|| anyhow!("`r` must be a positive integer"))?;
            frames::coordinate_projection(sig.num_blocks(), r as usize)?
        }
        "diagonal" => {
            let values =
                v.get("values").and_then(Value::as_array).ok_or_else(|| anyhow!("`values` must be an array"))?;
            let dim: usize = sig.block_dims().iter().map(|n| n * d).sum();
            if values.len() != dim {
                bail!("`values` has {} entries, expected {dim} (one per flattened coordinate)", values.len());
            }
            let values = values.iter().map(complex).collect::<anyhow::Result<Vec<_>>>()?;
            let mut offset = 0;
            let blocks = sig
                .block_dims()
                .iter()
                .map(|&n| {
                    let m = n * d;
                    let blk =
                        CMatrix::from_fn(m, m, |i, j| if i == j { values[offset + i] } else { C64::new(0.0, 0.0) });
                    offset += m;
                    blk
                })
                .collect();
            ModuleOperator::unflatten(sig, d, &BlockDiagonal::new(blocks))?
        }
        other => bail!("unknown builtin `{other}`"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn resolve(text: &str) -> anyhow::Result<Loaded> {
        parse(text)?.resolve(None)
    }

    #[test]
    fn ramp_defaults() {
        let l = resolve(r#"{"frame": {"builtin": "example_2_3", "N": 4, "alpha": 2.0, "r": 2}}"#).unwrap();
        let b = l.instance.controlled_bounds().unwrap();
        assert!((b.lower - 1.0 / 12.0).abs() < 1e-10);
        assert!((b.upper - 2.0 / 3.0).abs() < 1e-10);
        assert_eq!(l.instance.family().rule().len(), DEFAULT_GAUSS);
    }

    #[test]
    fn malformed_fields_are_named() {
        let err = resolve(r#"{"frame": {"builtin": "example_2_3", "N": "six", "alpha": 1.0}}"#).unwrap_err();
        assert!(err.to_string().contains("frame"), "{err}");
        let err = resolve(r#"{"frame": {"builtin": "example_2_3", "N": 4, "alpha": 1.0}, "tolerances": {"psd": "x"}}"#)
            .unwrap_err();
        assert!(err.to_string().contains("tolerances.psd"), "{err}");
        let err = resolve(r#"{"frame": {"builtin": "example_2_3", "N": 4, "alpha": 1.0}, "K": {"builtin": "spiral"}}"#)
            .unwrap_err();
        assert!(format!("{err:#}").contains("operator K"), "{err:#}");
        let err = resolve(r#"{"frame": {"builtin": "example_2_3", "N": 4, "alpha": 1.0}}"#).unwrap_err();
        assert!(err.to_string().contains("K"));
        assert!(parse("{").is_err());
    }

    #[test]
    fn diagonal_and_explicit_frames() {
        let text = r#"{
            "quadrature": {"type": "counting", "n": 2},
            "frame": {"vectors": [
                {"signature": [1, 1], "rank": 1, "entries": [[[[[1, 0]]], [[[0, 0]]]]]},
                {"signature": [1, 1], "rank": 1, "entries": [[[[[0, 0]]], [[[2, 0]]]]]}
            ]},
            "C": {"builtin": "diagonal", "values": [1, [3, 0]]},
            "K": {"builtin": "identity"}
        }"#;
        let l = resolve(text).unwrap();
        let b = l.instance.controlled_bounds().unwrap();
        // S = diag(1, 4), C = diag(1, 3): S_C = diag(1, 12), KCK* = diag(1, 3)
        assert!((b.upper - 12.0).abs() < 1e-12);
        assert!((b.lower - 1.0).abs() < 1e-12);
        let bad = text.replace("[1, [3, 0]]", "[1]");
        assert!(resolve(&bad).is_err());
    }

    #[test]
    fn signature_and_rank_must_agree() {
        let err = resolve(r#"{"signature": [2], "frame": {"builtin": "example_2_3", "N": 3, "alpha": 1.0, "r": 1}}"#)
            .unwrap_err();
        assert!(err.to_string().starts_with("signature"));
        let err =
            resolve(r#"{"rank": 2, "frame": {"builtin": "example_2_3", "N": 3, "alpha": 1.0, "r": 1}}"#).unwrap_err();
        assert!(err.to_string().starts_with("rank"));
    }
}
