use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::imaging::{MomentCentering, NormalMethod, Shape};
use crate::material::Material;
use crate::post::InterfaceGradient;
use crate::solver::SolverConfig;
use crate::tensor::{det3, Tensor2};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaterialModel {
    #[default]
    NeoHookean,
    Linear,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialSpec {
    #[serde(default)]
    pub model: MaterialModel,
    pub young: f64,
    pub poisson: f64,
}

impl MaterialSpec {
    pub fn build(&self) -> Result<Material> {
        match self.model {
            MaterialModel::NeoHookean => Material::neo_hookean(self.young, self.poisson),
            MaterialModel::Linear => Material::linear(self.young, self.poisson),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialTable {
    /// Inclusion.
    pub plus: MaterialSpec,
    /// Matrix.
    pub minus: MaterialSpec,
}

impl Default for MaterialTable {
    fn default() -> Self {
        Self {
            plus: MaterialSpec { model: MaterialModel::NeoHookean, young: 10.0, poisson: 0.3 },
            minus: MaterialSpec { model: MaterialModel::NeoHookean, young: 1.0, poisson: 0.0 },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NormalsConfig {
    pub method: NormalMethod,
    pub centering: MomentCentering,
    /// Compare against the analytic normal of `geometry` when it has one.
    pub oracle: bool,
}

impl Default for NormalsConfig {
    fn default() -> Self {
        Self { method: NormalMethod::SecondMoment, centering: MomentCentering::WeightedCentroid, oracle: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SliceSpec {
    /// `"F"` or `"P"`.
    pub field: String,
    pub component: [usize; 2],
    pub axis: usize,
    pub index: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PostConfig {
    pub interface_gradient: InterfaceGradient,
    pub slices: Vec<SliceSpec>,
    /// Reference `P̄` for the relative error report.
    pub reference: Option<[[f64; 3]; 3]>,
}

impl Default for PostConfig {
    fn default() -> Self {
        Self {
            interface_gradient: InterfaceGradient::Midpoint,
            slices: vec![SliceSpec { field: "P".into(), component: [0, 1], axis: 2, index: 0 }],
            reference: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    /// `sphere-desk` or `desk` (sphere, octahedron, cross-ply, fiber).
    pub suite: String,
    /// Fine resolution per axis of the generated images and the reference.
    pub resolution: usize,
    pub factors: Vec<[usize; 3]>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self { suite: "sphere-desk".into(), resolution: 128, factors: vec![[8, 8, 8], [16, 8, 4]] }
    }
}

/// Full pipeline configuration. Missing keys take their defaults, unknown
/// keys are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub geometry: Option<Shape>,
    /// Existing image header; takes precedence over `geometry`.
    pub image: Option<PathBuf>,
    pub resolution: [usize; 3],
    pub lengths: [f64; 3],
    pub factors: [usize; 3],
    pub normals: NormalsConfig,
    pub materials: MaterialTable,
    /// Macroscopic deformation gradient, row-major.
    pub loading: [[f64; 3]; 3],
    pub solver: SolverConfig,
    pub post: PostConfig,
    pub bench: BenchConfig,
    pub output: PathBuf,
    /// Replaces the seed of random geometries.
    pub seed: Option<u64>,
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            geometry: Some(Shape::Sphere { radius: 0.4, center: None }),
            image: None,
            resolution: [256; 3],
            lengths: [1.0; 3],
            factors: [8; 3],
            normals: NormalsConfig::default(),
            materials: MaterialTable::default(),
            loading: [[1.0, 0.5, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            solver: SolverConfig::default(),
            post: PostConfig::default(),
            bench: BenchConfig::default(),
            output: PathBuf::from("out"),
            seed: None,
            threads: None,
        }
    }
}

impl RunConfig {
    pub fn loading_tensor(&self) -> Tensor2 {
        let l = &self.loading;
        Tensor2::new(l[0][0], l[0][1], l[0][2], l[1][0], l[1][1], l[1][2], l[2][0], l[2][1], l[2][2])
    }

    /// Geometry with the global seed applied.
    pub fn effective_geometry(&self) -> Option<Shape> {
        let mut g = self.geometry.clone()?;
        if let (Shape::FiberPack { seed, .. }, Some(s)) = (&mut g, self.seed) {
            *seed = s;
        }
        Some(g)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::ConfigInvalid(m));
        let det = det3(&self.loading_tensor());
        if !(det > 0.0 && det.is_finite()) {
            return bad(format!("loading must have positive determinant, got {det:e}"));
        }
        if self.resolution.iter().any(|&n| n == 0) || self.factors.iter().any(|&n| n == 0) {
            return bad("resolution and factors must be positive".into());
        }
        if self.lengths.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return bad(format!("lengths {:?} must be positive", self.lengths));
        }
        if self.geometry.is_none() && self.image.is_none() {
            return bad("either geometry or image must be given".into());
        }
        if self.threads == Some(0) {
            return bad("threads must be at least 1".into());
        }
        for (name, m) in [("plus", &self.materials.plus), ("minus", &self.materials.minus)] {
            m.build().map_err(|e| Error::ConfigInvalid(format!("material {name}: {e}")))?;
        }
        for s in &self.post.slices {
            if !matches!(s.field.as_str(), "F" | "P") || s.component.iter().any(|&c| c > 2) || s.axis > 2 {
                return bad(format!("invalid slice {s:?}"));
            }
        }
        if !matches!(self.bench.suite.as_str(), "sphere-desk" | "desk") {
            return bad(format!("unknown bench suite {:?}", self.bench.suite));
        }
        self.solver.validate()
    }

    /// Reads a JSON config (or starts from the defaults), applies
    /// `KEY=VALUE` overrides on dotted paths, and validates.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut v = match path {
            Some(p) => {
                if !p.exists() {
                    return Err(Error::UpstreamArtifactMissing(p.to_path_buf()));
                }
                serde_json::from_slice::<Value>(&std::fs::read(p)?).map_err(|e| Error::ConfigInvalid(format!("{}: {e}", p.display())))?
            }
            None => serde_json::to_value(Self::default())?,
        };
        for o in overrides {
            apply_override(&mut v, o)?;
        }
        let cfg: Self = serde_json::from_value(v).map_err(|e| Error::ConfigInvalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Sets `a.b.c` in `v` to the JSON-parsed value, or to the raw string when it
/// is not valid JSON. Missing intermediate objects are created.
pub fn apply_override(v: &mut Value, spec: &str) -> Result<()> {
    let (key, raw) = spec.split_once('=').ok_or_else(|| Error::ConfigInvalid(format!("override {spec:?} is not KEY=VALUE")))?;
    if key.is_empty() {
        return Err(Error::ConfigInvalid(format!("override {spec:?} has an empty key")));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut cur = v;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if !cur.is_object() {
            *cur = Value::Object(Default::default());
        }
        let map = cur.as_object_mut().unwrap();
        if i + 1 == parts.len() {
            map.insert(part.to_string(), value);
            return Ok(());
        }
        cur = map.entry(part.to_string()).or_insert(Value::Null);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_and_validate() {
        let c = RunConfig::default();
        c.validate().unwrap();
        let s = serde_json::to_string(&c).unwrap();
        let back: RunConfig = serde_json::from_str(&s).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn overrides_and_rejections() {
        let c = RunConfig::load(None, &["solver.tol_equilibrium=1e-6".into(), "factors=[4,4,4]".into(), "solver.green=staggered".into()]).unwrap();
        assert_eq!(c.solver.tol_equilibrium, 1e-6);
        assert_eq!(c.factors, [4, 4, 4]);
        assert!(matches!(RunConfig::load(None, &["solver.tolerance=1".into()]), Err(Error::ConfigInvalid(_))));
        assert!(matches!(RunConfig::load(None, &["loading=[[1,0,0],[0,1,0],[0,0,-1]]".into()]), Err(Error::ConfigInvalid(_))));
        assert!(matches!(RunConfig::load(None, &["materials.plus.poisson=0.5".into()]), Err(Error::ConfigInvalid(_))));
        assert!(matches!(RunConfig::load(None, &["solver.material_eval=dfmg".into()]), Err(Error::ConfigInvalid(_))));
        assert!(RunConfig::load(None, &["noequals".into()]).is_err());
        let c = RunConfig::load(None, &["geometry={\"shape\":\"fiber_pack\",\"seed\":1,\"count\":3,\"radius\":0.1,\"length\":0.5,\"orientation_spread\":0.1}".into(), "seed=9".into()]).unwrap();
        assert!(matches!(c.effective_geometry(), Some(Shape::FiberPack { seed: 9, .. })));
    }
}
