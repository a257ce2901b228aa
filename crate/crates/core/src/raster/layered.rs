//! Procedural layered scenes: stacks of camera-facing, color-varying quads
//! with per-pixel random opacity.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::hash::splitmix64;
use super::scene::{AlphaMode, Camera, Scene, SceneError, TriangleMesh};

pub const MAX_LAYERS: usize = 64;
/// Grid cells per quad side; vertex colors vary over the grid.
const GRID: usize = 16;
/// Quad half extent relative to the frustum half height at its depth.
/// Covers viewports with aspect ratio up to this value.
const COVERAGE: f64 = 3.0;
/// Per-vertex color jitter around each layer's base color.
const COLOR_JITTER: f32 = 0.3;

pub fn layered_camera() -> Camera {
    Camera { eye: [0.0; 3], look_at: [0.0, 0.0, -1.0], up: [0.0, 1.0, 0.0], fov_deg: 60.0, near: 0.1, far: 100.0 }
}

/// Builds `layers` full-screen quads at distinct depths.
///
/// Depths, submission order and the per-pixel opacity seed derive from
/// `seed`; vertex colors derive from `palette_seed`.
pub fn gen_layered_scene(
    seed: u64,
    layers: usize,
    alpha_min: f32,
    alpha_max: f32,
    palette_seed: u64,
) -> Result<Scene, SceneError> {
    if !(1..=MAX_LAYERS).contains(&layers) {
        return Err(SceneError::Invariant {
            field: "layers".into(),
            message: format!("{layers} outside [1, {MAX_LAYERS}]"),
        });
    }
    if !((0.0..=1.0).contains(&alpha_min) && (0.0..=1.0).contains(&alpha_max) && alpha_min <= alpha_max) {
        return Err(SceneError::Invariant {
            field: "alpha".into(),
            message: format!("need 0 <= alpha_min ({alpha_min}) <= alpha_max ({alpha_max}) <= 1"),
        });
    }

    let camera = layered_camera();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut palette = ChaCha8Rng::seed_from_u64(palette_seed);
    let alpha_seed = splitmix64(seed ^ 0x5EED_A1FA_0000_0001);

    // one depth slot per layer in [0.02, 0.98] of the normalized range, jittered inside the slot
    let depths: Vec<f64> = (0..layers)
        .map(|k| {
            let u = 0.02 + 0.96 * (k as f64 + 0.25 + 0.5 * rng.gen::<f64>()) / layers as f64;
            camera.near + u * (camera.far - camera.near)
        })
        .collect();
    let mut order: Vec<usize> = (0..layers).collect();
    order.shuffle(&mut rng);

    let tan_half = (camera.fov_deg.to_radians() * 0.5).tan();
    let meshes = order
        .iter()
        .enumerate()
        .map(|(submit, &slot)| {
            let d = depths[slot];
            let half = d * tan_half * COVERAGE;
            let base: [f32; 3] = [palette.gen(), palette.gen(), palette.gen()];
            let mut vertices = Vec::with_capacity((GRID + 1) * (GRID + 1));
            let mut colors = Vec::with_capacity(vertices.capacity());
            for j in 0..=GRID {
                for i in 0..=GRID {
                    let x = -half + 2.0 * half * i as f64 / GRID as f64;
                    let y = -half + 2.0 * half * j as f64 / GRID as f64;
                    vertices.push([x, y, -d]);
                    colors.push(base.map(|c| {
                        (c + palette.gen_range(-COLOR_JITTER..=COLOR_JITTER)).clamp(0.0, 1.0)
                    }));
                }
            }
            let mut triangles = Vec::with_capacity(GRID * GRID * 2);
            for j in 0..GRID {
                for i in 0..GRID {
                    let v = (j * (GRID + 1) + i) as u32;
                    let row = (GRID + 1) as u32;
                    triangles.push([v, v + 1, v + row + 1]);
                    triangles.push([v, v + row + 1, v + row]);
                }
            }
            TriangleMesh {
                object_id: submit as u32,
                vertices,
                colors,
                triangles,
                alpha: AlphaMode::PerPixelRandom { min: alpha_min, max: alpha_max, seed: alpha_seed },
            }
        })
        .collect();

    let scene = Scene { camera, meshes };
    scene.validate()?;
    Ok(scene)
}
