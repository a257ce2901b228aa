//! Scanline-free edge-function rasterizer producing a full A-buffer.
//!
//! Screen positions are snapped to a fixed-point grid with
//! [`SUBPIXEL_BITS`] fractional bits and edge functions are evaluated exactly
//! in integer arithmetic, so the top-left rule is watertight along shared
//! edges. Pixels are sampled at their centers `(x + 0.5, y + 0.5)`.

use rayon::prelude::*;

use super::hash::per_pixel_unit;
use super::scene::{cross, dot, normalize, sub, AlphaMode, Camera, Scene, Vec3};
use crate::color::Rgb;
use crate::fragment::{Fragment, FrameFragmentBuffer, PixelFragments};

pub const SUBPIXEL_BITS: u32 = 8;
const ONE: i64 = 1 << SUBPIXEL_BITS;
const HALF: i64 = ONE / 2;
/// Snapped coordinates beyond this magnitude are rejected so edge products fit in i128.
const MAX_FIXED: f64 = (1u64 << 52) as f64;
const ROWS_PER_BAND: usize = 8;

#[derive(Clone, Copy, Debug)]
struct ViewVertex {
    x: f64,
    y: f64,
    /// Distance along the view direction.
    d: f64,
    color: [f64; 3],
}

impl ViewVertex {
    fn lerp(a: &ViewVertex, b: &ViewVertex, t: f64) -> ViewVertex {
        let l = |p: f64, q: f64| p + (q - p) * t;
        ViewVertex {
            x: l(a.x, b.x),
            y: l(a.y, b.y),
            d: l(a.d, b.d),
            color: [l(a.color[0], b.color[0]), l(a.color[1], b.color[1]), l(a.color[2], b.color[2])],
        }
    }
}

struct ViewTransform {
    eye: Vec3,
    right: Vec3,
    up: Vec3,
    forward: Vec3,
    tan_half_fov: f64,
    near: f64,
    far: f64,
}

impl ViewTransform {
    fn new(cam: &Camera) -> Self {
        let forward = normalize(sub(cam.look_at, cam.eye));
        let right = normalize(cross(forward, cam.up));
        let up = cross(right, forward);
        Self {
            eye: cam.eye,
            right,
            up,
            forward,
            tan_half_fov: (cam.fov_deg.to_radians() * 0.5).tan(),
            near: cam.near,
            far: cam.far,
        }
    }

    fn to_view(&self, p: Vec3, color: [f32; 3]) -> ViewVertex {
        let rel = sub(p, self.eye);
        ViewVertex {
            x: dot(rel, self.right),
            y: dot(rel, self.up),
            d: dot(rel, self.forward),
            color: color.map(f64::from),
        }
    }
}

/// A screen-space triangle ready for coverage tests.
struct TriangleSetup {
    /// Snapped positions, positive orientation.
    pos: [[i64; 2]; 3],
    area: i128,
    top_left: [bool; 3],
    inv_d: [f64; 3],
    color_over_d: [[f64; 3]; 3],
    x_range: (usize, usize),
    y_range: (usize, usize),
    object_id: u32,
    alpha: AlphaMode,
}

#[inline]
fn edge(a: [i64; 2], b: [i64; 2], p: [i64; 2]) -> i128 {
    (b[0] - a[0]) as i128 * (p[1] - a[1]) as i128 - (b[1] - a[1]) as i128 * (p[0] - a[0]) as i128
}

/// Top-left edge test for positively oriented triangles in y-down screen space.
#[inline]
fn is_top_left(a: [i64; 2], b: [i64; 2]) -> bool {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    dy < 0 || (dy == 0 && dx > 0)
}

/// Sutherland-Hodgman clip of a triangle against `d >= near`.
fn clip_near(tri: [ViewVertex; 3], near: f64) -> Vec<ViewVertex> {
    let mut out = Vec::with_capacity(4);
    for i in 0..3 {
        let a = &tri[i];
        let b = &tri[(i + 1) % 3];
        let a_in = a.d >= near;
        let b_in = b.d >= near;
        if a_in {
            out.push(*a);
        }
        if a_in != b_in {
            let t = (near - a.d) / (b.d - a.d);
            let mut v = ViewVertex::lerp(a, b, t);
            v.d = near;
            out.push(v);
        }
    }
    out
}

fn setup_triangle(
    verts: [ViewVertex; 3],
    view: &ViewTransform,
    width: usize,
    height: usize,
    object_id: u32,
    alpha: AlphaMode,
) -> Option<TriangleSetup> {
    let aspect = width as f64 / height as f64;
    let mut pos = [[0i64; 2]; 3];
    for (p, v) in pos.iter_mut().zip(&verts) {
        let ndc_x = v.x / (v.d * view.tan_half_fov * aspect);
        let ndc_y = v.y / (v.d * view.tan_half_fov);
        let sx = (ndc_x * 0.5 + 0.5) * width as f64 * ONE as f64;
        let sy = (0.5 - ndc_y * 0.5) * height as f64 * ONE as f64;
        if !(sx.abs() < MAX_FIXED && sy.abs() < MAX_FIXED) {
            return None;
        }
        *p = [sx.round() as i64, sy.round() as i64];
    }
    let mut order = [0usize, 1, 2];
    let mut area = edge(pos[0], pos[1], pos[2]);
    if area == 0 {
        return None;
    }
    if area < 0 {
        order.swap(1, 2);
        pos.swap(1, 2);
        area = -area;
    }
    let verts = order.map(|i| verts[i]);

    let min_x = pos.iter().map(|p| p[0]).min().unwrap();
    let max_x = pos.iter().map(|p| p[0]).max().unwrap();
    let min_y = pos.iter().map(|p| p[1]).min().unwrap();
    let max_y = pos.iter().map(|p| p[1]).max().unwrap();
    // pixel x covers centers x*ONE + HALF in [min, max]
    let first = |lo: i64, limit: usize| ((lo - HALF + ONE - 1).div_euclid(ONE)).clamp(0, limit as i64) as usize;
    let last = |hi: i64, limit: usize| ((hi - HALF).div_euclid(ONE) + 1).clamp(0, limit as i64) as usize;
    let x_range = (first(min_x, width), last(max_x, width));
    let y_range = (first(min_y, height), last(max_y, height));
    if x_range.0 >= x_range.1 || y_range.0 >= y_range.1 {
        return None;
    }

    let inv_d = verts.map(|v| 1.0 / v.d);
    let color_over_d = [0, 1, 2].map(|i| verts[i].color.map(|c| c * inv_d[i]));
    Some(TriangleSetup {
        pos,
        area,
        top_left: [
            is_top_left(pos[1], pos[2]),
            is_top_left(pos[2], pos[0]),
            is_top_left(pos[0], pos[1]),
        ],
        inv_d,
        color_over_d,
        x_range,
        y_range,
        object_id,
        alpha,
    })
}

fn build_setups(scene: &Scene, width: usize, height: usize) -> Vec<TriangleSetup> {
    let view = ViewTransform::new(&scene.camera);
    let mut setups = Vec::new();
    for mesh in &scene.meshes {
        let vv: Vec<ViewVertex> =
            mesh.vertices.iter().zip(&mesh.colors).map(|(p, c)| view.to_view(*p, *c)).collect();
        for tri in &mesh.triangles {
            let t = tri.map(|i| vv[i as usize]);
            if t.iter().all(|v| v.d > view.far) || t.iter().all(|v| v.d < view.near) {
                continue;
            }
            let poly = clip_near(t, view.near);
            for k in 1..poly.len().saturating_sub(1) {
                if let Some(s) =
                    setup_triangle([poly[0], poly[k], poly[k + 1]], &view, width, height, mesh.object_id, mesh.alpha)
                {
                    setups.push(s);
                }
            }
        }
    }
    setups
}

fn fragment_alpha(mode: AlphaMode, object_id: u32, pixel_index: u64) -> f32 {
    match mode {
        AlphaMode::Constant(a) => a,
        AlphaMode::PerPixelRandom { min, max, seed } => {
            let u = per_pixel_unit(seed, object_id, pixel_index);
            let (min, max) = (f64::from(min), f64::from(max));
            (min + u * (max - min)) as f32
        }
    }
}

fn rasterize_band(
    setups: &[TriangleSetup],
    band: &mut [PixelFragments],
    first_row: usize,
    width: usize,
    near: f64,
    far: f64,
) {
    let rows = band.len() / width;
    let row_end = first_row + rows;
    let depth_range = far - near;
    let tol = near * 1e-9;
    for s in setups {
        let y0 = s.y_range.0.max(first_row);
        let y1 = s.y_range.1.min(row_end);
        if y0 >= y1 {
            continue;
        }
        let (x0, x1) = s.x_range;
        let [p0, p1, p2] = s.pos;
        let area = s.area as f64;
        for y in y0..y1 {
            let py = y as i64 * ONE + HALF;
            let start = [x0 as i64 * ONE + HALF, py];
            let mut w = [edge(p1, p2, start), edge(p2, p0, start), edge(p0, p1, start)];
            // stepping one pixel in x changes each edge by -(dy) * ONE
            let step = [
                -((p2[1] - p1[1]) as i128) * ONE as i128,
                -((p0[1] - p2[1]) as i128) * ONE as i128,
                -((p1[1] - p0[1]) as i128) * ONE as i128,
            ];
            for x in x0..x1 {
                let inside = (0..3).all(|i| w[i] > 0 || (w[i] == 0 && s.top_left[i]));
                if inside {
                    let l = [w[0] as f64 / area, w[1] as f64 / area, w[2] as f64 / area];
                    let inv_d = l[0] * s.inv_d[0] + l[1] * s.inv_d[1] + l[2] * s.inv_d[2];
                    let d = 1.0 / inv_d;
                    if d >= near - tol && d <= far + tol {
                        let c = [0, 1, 2].map(|ch| {
                            (l[0] * s.color_over_d[0][ch] + l[1] * s.color_over_d[1][ch] + l[2] * s.color_over_d[2][ch])
                                * d
                        });
                        let z = ((d - near) / depth_range).clamp(0.0, 1.0) as f32;
                        let color = Rgb::new(c[0] as f32, c[1] as f32, c[2] as f32).clamp01();
                        let pixel_index = (y * width + x) as u64;
                        let px = &mut band[(y - first_row) * width + x];
                        let seq = px.len() as u32;
                        px.push(Fragment { z, color, alpha: fragment_alpha(s.alpha, s.object_id, pixel_index), seq });
                    }
                }
                for i in 0..3 {
                    w[i] += step[i];
                }
            }
        }
    }
}

/// Rasterizes every triangle of `scene` into per-pixel fragment lists.
///
/// Fragments keep submission order (mesh, triangle) in each list; `seq`
/// records that order. The output is identical for any thread count.
///
/// # Panics
///
/// Panics on a zero dimension or an invalid camera; scenes from
/// [`super::load_scene`] are always valid.
pub fn rasterize_scene(scene: &Scene, width: usize, height: usize) -> FrameFragmentBuffer {
    assert!(width >= 1 && height >= 1, "frame dimensions must be at least 1x1");
    scene.camera.validate().expect("invalid camera");
    let setups = build_setups(scene, width, height);
    let (near, far) = (scene.camera.near, scene.camera.far);
    let mut pixels = vec![PixelFragments::new(); width * height];
    pixels.par_chunks_mut(width * ROWS_PER_BAND).enumerate().for_each(|(band, chunk)| {
        rasterize_band(&setups, chunk, band * ROWS_PER_BAND, width, near, far);
    });
    FrameFragmentBuffer::from_pixels(width, height, pixels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::scene::TriangleMesh;

    fn camera() -> Camera {
        Camera { eye: [0.0; 3], look_at: [0.0, 0.0, -1.0], up: [0.0, 1.0, 0.0], fov_deg: 90.0, near: 1.0, far: 11.0 }
    }

    fn quad(object_id: u32, d: f64, half: f64, alpha: AlphaMode) -> TriangleMesh {
        TriangleMesh {
            object_id,
            vertices: vec![[-half, -half, -d], [half, -half, -d], [half, half, -d], [-half, half, -d]],
            colors: vec![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 1.0, 1.0]],
            triangles: vec![[0, 1, 2], [0, 2, 3]],
            alpha,
        }
    }

    #[test]
    fn full_screen_quad_no_double_hits() {
        let scene = Scene { camera: camera(), meshes: vec![quad(0, 2.0, 4.0, AlphaMode::Constant(0.5))] };
        let frame = rasterize_scene(&scene, 37, 23);
        for px in frame.pixels() {
            assert_eq!(px.len(), 1);
            assert_eq!(px.fragments()[0].alpha, 0.5);
        }
    }

    #[test]
    fn exact_quad_edges_on_pixel_centers_are_watertight() {
        // quad spanning exactly the viewport: half extent == d * tan(45 deg)
        // the diagonal passes through pixel centers on a square frame
        let scene = Scene { camera: camera(), meshes: vec![quad(0, 2.0, 2.0, AlphaMode::Constant(1.0))] };
        let frame = rasterize_scene(&scene, 16, 16);
        assert!(frame.pixels().iter().all(|p| p.len() == 1));
    }

    #[test]
    fn stacked_quads_have_increasing_depth() {
        let meshes = (0..5).map(|i| quad(i, 2.0 + i as f64, 20.0, AlphaMode::Constant(0.3))).collect();
        let frame = rasterize_scene(&Scene { camera: camera(), meshes }, 20, 10);
        for px in frame.pixels() {
            assert_eq!(px.len(), 5);
            let zs: Vec<f32> = px.fragments().iter().map(|f| f.z).collect();
            assert!(zs.windows(2).all(|w| w[0] < w[1]), "{zs:?}");
            let seqs: Vec<u32> = px.fragments().iter().map(|f| f.seq).collect();
            assert_eq!(seqs, vec![0, 1, 2, 3, 4]);
        }
    }

    #[test]
    fn linear_depth_mapping() {
        let scene = Scene { camera: camera(), meshes: vec![quad(0, 6.0, 20.0, AlphaMode::Constant(0.3))] };
        let frame = rasterize_scene(&scene, 8, 8);
        for px in frame.pixels() {
            assert!((px.fragments()[0].z - 0.5).abs() < 1e-6);
        }
    }

    #[test]
    fn behind_far_plane_emits_nothing() {
        let scene = Scene { camera: camera(), meshes: vec![quad(0, 12.0, 40.0, AlphaMode::Constant(0.5))] };
        assert_eq!(rasterize_scene(&scene, 16, 16).fragment_count(), 0);
    }

    #[test]
    fn behind_camera_emits_nothing() {
        let scene = Scene { camera: camera(), meshes: vec![quad(0, -3.0, 40.0, AlphaMode::Constant(0.5))] };
        assert_eq!(rasterize_scene(&scene, 16, 16).fragment_count(), 0);
    }

    #[test]
    fn degenerate_triangle_emits_nothing() {
        let mesh = TriangleMesh {
            object_id: 0,
            vertices: vec![[-1.0, -1.0, -2.0], [0.0, 0.0, -2.0], [1.0, 1.0, -2.0]],
            colors: vec![[1.0; 3]; 3],
            triangles: vec![[0, 1, 2]],
            alpha: AlphaMode::Constant(1.0),
        };
        assert_eq!(rasterize_scene(&Scene { camera: camera(), meshes: vec![mesh] }, 16, 16).fragment_count(), 0);
    }

    #[test]
    fn near_plane_crossing_triangle_is_clipped() {
        // one vertex behind the camera; the visible part still covers pixels at d >= near
        let mesh = TriangleMesh {
            object_id: 0,
            vertices: vec![[-5.0, -0.5, -3.0], [5.0, -0.5, -3.0], [0.0, -0.5, 2.0]],
            colors: vec![[1.0; 3]; 3],
            triangles: vec![[0, 1, 2]],
            alpha: AlphaMode::Constant(1.0),
        };
        let frame = rasterize_scene(&Scene { camera: camera(), meshes: vec![mesh] }, 32, 32);
        assert!(frame.fragment_count() > 0);
        assert!(frame.pixels().iter().flat_map(|p| p.fragments()).all(|f| f.is_valid()));
    }

    #[test]
    fn perspective_correct_color_on_slanted_quad() {
        // The quad recedes in depth; perspective-correct interpolation keeps the color at the
        // screen-space midpoint biased towards the near edge.
        let mesh = TriangleMesh {
            object_id: 0,
            vertices: vec![[-50.0, -1.0, -1.5], [50.0, -1.0, -1.5], [50.0, -1.0, -10.0], [-50.0, -1.0, -10.0]],
            colors: vec![[1.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, 1.0]],
            triangles: vec![[0, 1, 2], [0, 2, 3]],
            alpha: AlphaMode::Constant(1.0),
        };
        let frame = rasterize_scene(&Scene { camera: camera(), meshes: vec![mesh] }, 8, 64);
        // view depth d maps to screen y = 32 + 32 / d (pixels); red at d=1.5, blue at d=10
        for y in 36..53 {
            let px = frame.pixel(4, y);
            assert_eq!(px.len(), 1, "row {y}");
            let f = px.fragments()[0];
            let sy = y as f64 + 0.5;
            let d = 32.0 / (sy - 32.0);
            let t = (d - 1.5) / 8.5; // linear in view space
            // vertex snapping to 1/256 px shifts the plane slightly; affine interpolation would be off by ~0.3
            assert!((f.color.b as f64 - t).abs() < 1e-3, "row {y}: {} vs {t}", f.color.b);
            assert!((f.z as f64 - (d - 1.0) / 10.0).abs() < 5e-4, "row {y}: z {} vs {}", f.z, (d - 1.0) / 10.0);
        }
    }
}
