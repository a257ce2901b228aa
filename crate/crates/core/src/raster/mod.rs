//! Scene description, rasterization into per-pixel fragment lists and the
//! procedural layered-scene generator.

mod hash;
mod layered;
mod rasterize;
mod scene;

pub use hash::{per_pixel_unit, splitmix64};
pub use layered::{gen_layered_scene, layered_camera, MAX_LAYERS};
pub use rasterize::{rasterize_scene, SUBPIXEL_BITS};
pub use scene::{load_scene, save_scene, AlphaMode, Camera, Scene, SceneError, TriangleMesh, Vec3, SCENE_FORMAT_VERSION};
