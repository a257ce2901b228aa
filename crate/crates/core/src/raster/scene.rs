//! Scene description and the version-1 JSON scene format.

use std::collections::HashSet;
use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Vec3 = [f64; 3];

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("malformed JSON: {0}")]
    MalformedJson(serde_json::Error),
    #[error("schema violation: {0}")]
    Schema(String),
    #[error("invalid `{field}`: {message}")]
    Invariant { field: String, message: String },
}

impl SceneError {
    fn invariant(field: impl Into<String>, message: impl Into<String>) -> Self {
        SceneError::Invariant { field: field.into(), message: message.into() }
    }
}

impl From<serde_json::Error> for SceneError {
    fn from(e: serde_json::Error) -> Self {
        use serde_json::error::Category;
        match e.classify() {
            Category::Io => SceneError::Io(e.into()),
            Category::Syntax | Category::Eof => SceneError::MalformedJson(e),
            Category::Data => SceneError::Schema(e.to_string()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Camera {
    pub eye: Vec3,
    pub look_at: Vec3,
    pub up: Vec3,
    pub fov_deg: f64,
    pub near: f64,
    pub far: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum AlphaMode {
    Constant(f32),
    PerPixelRandom { min: f32, max: f32, seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TriangleMesh {
    pub object_id: u32,
    pub vertices: Vec<Vec3>,
    /// Linear RGB per vertex.
    pub colors: Vec<[f32; 3]>,
    pub triangles: Vec<[u32; 3]>,
    pub alpha: AlphaMode,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    pub camera: Camera,
    pub meshes: Vec<TriangleMesh>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneFile {
    version: u32,
    camera: Camera,
    meshes: Vec<TriangleMesh>,
}

pub const SCENE_FORMAT_VERSION: u32 = 1;

pub(crate) fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub(crate) fn normalize(a: Vec3) -> Vec3 {
    let len = dot(a, a).sqrt();
    [a[0] / len, a[1] / len, a[2] / len]
}

fn finite3(v: &Vec3) -> bool {
    v.iter().all(|c| c.is_finite())
}

impl Camera {
    pub fn validate(&self) -> Result<(), SceneError> {
        for (name, v) in [("camera.eye", &self.eye), ("camera.look_at", &self.look_at), ("camera.up", &self.up)] {
            if !finite3(v) {
                return Err(SceneError::invariant(name, "components must be finite"));
            }
        }
        let view = sub(self.look_at, self.eye);
        if dot(view, view) == 0.0 {
            return Err(SceneError::invariant("camera.look_at", "must differ from eye"));
        }
        let c = cross(normalize(view), self.up);
        if dot(self.up, self.up) == 0.0 || dot(c, c).sqrt() < 1e-9 * dot(self.up, self.up).sqrt() {
            return Err(SceneError::invariant("camera.up", "must not be parallel to the view direction"));
        }
        if !(self.fov_deg > 0.0 && self.fov_deg < 180.0) {
            return Err(SceneError::invariant("camera.fov_deg", "must lie in (0, 180)"));
        }
        if !(self.near > 0.0 && self.near.is_finite()) {
            return Err(SceneError::invariant("camera.near", "must be positive"));
        }
        if !(self.far > self.near && self.far.is_finite()) {
            return Err(SceneError::invariant("camera.far", "must be greater than near"));
        }
        Ok(())
    }
}

impl AlphaMode {
    fn validate(&self, field: &str) -> Result<(), SceneError> {
        let unit = |a: f32| (0.0..=1.0).contains(&a);
        match *self {
            AlphaMode::Constant(a) if !unit(a) => {
                Err(SceneError::invariant(format!("{field}.constant"), format!("{a} outside [0, 1]")))
            }
            AlphaMode::PerPixelRandom { min, max, .. } if !(unit(min) && unit(max) && min <= max) => Err(
                SceneError::invariant(format!("{field}.per_pixel_random"), format!("need 0 <= min ({min}) <= max ({max}) <= 1")),
            ),
            _ => Ok(()),
        }
    }
}

impl TriangleMesh {
    fn validate(&self, index: usize) -> Result<(), SceneError> {
        let field = |name: &str| format!("meshes[{index}].{name}");
        if self.colors.len() != self.vertices.len() {
            return Err(SceneError::invariant(
                field("colors"),
                format!("{} colors for {} vertices", self.colors.len(), self.vertices.len()),
            ));
        }
        if let Some(i) = self.vertices.iter().position(|v| !finite3(v)) {
            return Err(SceneError::invariant(field(&format!("vertices[{i}]")), "components must be finite"));
        }
        if let Some(i) = self.colors.iter().position(|c| !c.iter().all(|v| (0.0..=1.0).contains(v))) {
            return Err(SceneError::invariant(field(&format!("colors[{i}]")), "channels must lie in [0, 1]"));
        }
        let n = self.vertices.len() as u32;
        if let Some(i) = self.triangles.iter().position(|t| t.iter().any(|&v| v >= n)) {
            return Err(SceneError::invariant(
                field(&format!("triangles[{i}]")),
                format!("index out of range for {n} vertices"),
            ));
        }
        self.alpha.validate(&field("alpha"))
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }
}

impl Scene {
    /// Checks every invariant, naming the first offending field.
    pub fn validate(&self) -> Result<(), SceneError> {
        self.camera.validate()?;
        let mut ids = HashSet::new();
        for (i, mesh) in self.meshes.iter().enumerate() {
            mesh.validate(i)?;
            if !ids.insert(mesh.object_id) {
                return Err(SceneError::invariant(
                    format!("meshes[{i}].object_id"),
                    format!("duplicate object id {}", mesh.object_id),
                ));
            }
        }
        Ok(())
    }

    pub fn triangle_count(&self) -> usize {
        self.meshes.iter().map(TriangleMesh::triangle_count).sum()
    }

    pub fn from_json(text: &str) -> Result<Scene, SceneError> {
        let file: SceneFile = serde_json::from_str(text)?;
        if file.version != SCENE_FORMAT_VERSION {
            return Err(SceneError::Schema(format!("unsupported scene version {}", file.version)));
        }
        let scene = Scene { camera: file.camera, meshes: file.meshes };
        scene.validate()?;
        Ok(scene)
    }

    pub fn to_json(&self) -> String {
        let file = SceneFile { version: SCENE_FORMAT_VERSION, camera: self.camera.clone(), meshes: self.meshes.clone() };
        serde_json::to_string_pretty(&file).expect("scene serialization cannot fail")
    }
}

pub fn load_scene(path: impl AsRef<Path>) -> Result<Scene, SceneError> {
    Scene::from_json(&fs::read_to_string(path)?)
}

pub fn save_scene(scene: &Scene, path: impl AsRef<Path>) -> Result<(), SceneError> {
    fs::write(path, scene.to_json())?;
    Ok(())
}
