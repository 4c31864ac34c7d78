//! First-person column raycaster. One ray per image column; every surface
//! (room sides, obstacles, movable objects, the agent's own arm) becomes a
//! vertical slab whose screen height follows 1/distance. Pixels carry both a
//! shaded RGB color and a hidden object-id used only for ground truth.
//!
//! Surfaces occupy fixed height bands in world units (room sides span the
//! full unit wall height, objects sit on the floor, the arm hovers at eye
//! level), so movables appear in the lower half of the image and the arm
//! crosses the horizon — close to the eye it dominates the view, which is
//! exactly what makes arm-only differences visible to the mask predictor.

use crate::geom::{ray_capsule, ray_segment, Vec2};
use crate::world::{fk, MovableObject, WorldSpec, WorldState};

/// Nothing beyond this distance is drawn (meters).
pub const FAR_CLIP: f64 = 25.0;

/// Height bands in world units (room sides span [0, 1]).
const WALL_Z: (f64, f64) = (0.0, 1.0);
const OBJECT_Z: (f64, f64) = (0.0, 0.35);
const ARM_Z: (f64, f64) = (0.30, 0.55);

const CEILING_COLOR: [u8; 3] = [170, 175, 185];
const FLOOR_COLOR: [u8; 3] = [70, 70, 75];
const ARM_COLOR: [u8; 3] = [230, 120, 40];
/// West, east, south, north room sides get distinct muted tones so that a
/// teleported agent sees an unmistakably different backdrop.
const SIDE_COLORS: [[u8; 3]; 4] = [
    [140, 120, 100],
    [100, 125, 145],
    [125, 140, 105],
    [150, 110, 120],
];

/// Camera intrinsics for the renderer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Camera {
    /// Horizontal field of view, degrees; must lie in (10, 170).
    pub fov_deg: f64,
    pub width: usize,
    pub height: usize,
    /// Eye height as a fraction of the unit wall height.
    pub eye_height_fraction: f64,
}

impl Camera {
    pub fn new(fov_deg: f64, width: usize, height: usize) -> Camera {
        let cam = Camera { fov_deg, width, height, eye_height_fraction: 0.5 };
        cam.validate();
        cam
    }

    pub fn validate(&self) {
        assert!(
            self.fov_deg > 10.0 && self.fov_deg < 170.0,
            "fov {} outside (10, 170)",
            self.fov_deg
        );
        assert!(self.width >= 8 && self.height >= 8, "image must be at least 8x8");
    }
}

impl Default for Camera {
    fn default() -> Self {
        Camera::new(45.0, 64, 64)
    }
}

/// Rendered first-person view: RGB bytes plus the hidden per-pixel id
/// buffer (0 = background/immovable/arm, otherwise a movable object id).
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub width: usize,
    pub height: usize,
    /// Row-major, 3 bytes per pixel.
    pub rgb: Vec<u8>,
    /// Row-major, one id per pixel.
    pub ids: Vec<u16>,
}

impl Observation {
    pub fn id_at(&self, x: usize, y: usize) -> u16 {
        self.ids[y * self.width + x]
    }

    /// Fraction of pixels whose RGB differs in any channel.
    pub fn diff_fraction(&self, other: &Observation) -> f64 {
        assert_eq!(
            (self.width, self.height),
            (other.width, other.height),
            "observation dimensions differ"
        );
        let n = self.width * self.height;
        let mut differing = 0usize;
        for p in 0..n {
            if self.rgb[3 * p..3 * p + 3] != other.rgb[3 * p..3 * p + 3] {
                differing += 1;
            }
        }
        differing as f64 / n as f64
    }

    /// Ids of movable objects visible in this view, ascending.
    pub fn visible_ids(&self) -> Vec<u16> {
        let mut ids: Vec<u16> = self.ids.iter().copied().filter(|id| *id != 0).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }
}

/// Binary image mask; the output vocabulary of the mask predictor.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    pub width: usize,
    pub height: usize,
    /// Row-major, values 0 or 1.
    pub bits: Vec<u8>,
}

impl Mask {
    pub fn zeros(width: usize, height: usize) -> Mask {
        Mask { width, height, bits: vec![0; width * height] }
    }

    pub fn ones(width: usize, height: usize) -> Mask {
        Mask { width, height, bits: vec![1; width * height] }
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|b| **b != 0).count()
    }

    pub fn positive_fraction(&self) -> f64 {
        self.count_ones() as f64 / (self.width * self.height) as f64
    }
}

/// Errors from mask/image plumbing.
#[derive(Debug, thiserror::Error)]
pub enum RenderError {
    #[error("dimension mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("bad image file: {0}")]
    BadImage(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One slab candidate along a column's ray.
struct Hit {
    t: f64,
    z: (f64, f64),
    color: [u8; 3],
    id: u16,
}

fn shade(color: [u8; 3], t: f64) -> [u8; 3] {
    let s = (1.0 / (1.0 + 0.3 * t)).clamp(0.2, 1.0);
    [
        (color[0] as f64 * s).round() as u8,
        (color[1] as f64 * s).round() as u8,
        (color[2] as f64 * s).round() as u8,
    ]
}

/// Render the agent's first-person view of a state.
pub fn render(state: &WorldState, spec: &WorldSpec, cam: &Camera) -> Observation {
    cam.validate();
    let (w, h) = (cam.width, cam.height);
    let mut obs = Observation { width: w, height: h, rgb: vec![0; w * h * 3], ids: vec![0; w * h] };

    // Background: ceiling above the horizon, floor below.
    for y in 0..h {
        let color = if y < h / 2 { CEILING_COLOR } else { FLOOR_COLOR };
        for x in 0..w {
            obs.rgb[3 * (y * w + x)..3 * (y * w + x) + 3].copy_from_slice(&color);
        }
    }

    let eye = state.agent.base.position;
    let half_fov = (cam.fov_deg.to_radians()) / 2.0;
    let dir = Vec2::from_angle(state.agent.base.heading);
    let plane = dir.perp() * half_fov.tan();
    // Focal length in pixels; square pixels, so vertical spans use it too.
    let focal = (w as f64 / 2.0) / half_fov.tan();
    let eye_z = cam.eye_height_fraction * WALL_Z.1;

    // Static per-render geometry.
    let sides = spec.bounds.sides(); // [south, east, north, west] by construction order
    let side_colors = [SIDE_COLORS[2], SIDE_COLORS[1], SIDE_COLORS[3], SIDE_COLORS[0]];
    let movable_polys: Vec<(u16, [u8; 3], Vec<Vec2>)> = spec
        .movables
        .iter()
        .map(|m| {
            let pose = state.movable_poses[&m.id];
            (m.id as u16, m.color, MovableObject::world_verts(&m.shape, &pose))
        })
        .collect();
    let arm = fk(&state.agent);

    let mut hits: Vec<Hit> = Vec::with_capacity(16);
    for x in 0..w {
        let camx = 2.0 * (x as f64 + 0.5) / w as f64 - 1.0;
        let ray = dir + plane * camx;
        hits.clear();

        for (i, (a, b)) in sides.iter().enumerate() {
            if let Some(t) = ray_segment(eye, ray, *a, *b) {
                hits.push(Hit { t, z: WALL_Z, color: side_colors[i], id: 0 });
            }
        }
        for obstacle in &spec.immovable {
            if let Some(t) = nearest_polygon_hit(eye, ray, &obstacle.verts) {
                hits.push(Hit { t, z: WALL_Z, color: obstacle.color, id: 0 });
            }
        }
        for (id, color, verts) in &movable_polys {
            if let Some(t) = nearest_polygon_hit(eye, ray, verts) {
                hits.push(Hit { t, z: OBJECT_Z, color: *color, id: *id });
            }
        }
        for (a, b) in &arm {
            if let Some(t) = ray_capsule(eye, ray, *a, *b, state.agent.arm_radius) {
                hits.push(Hit { t, z: ARM_Z, color: ARM_COLOR, id: 0 });
            }
        }

        // Painter's algorithm: draw far to near so the nearest surface wins
        // every pixel it covers. Sorting is made total (and so deterministic)
        // by the collection index tiebreak.
        hits.retain(|hit| hit.t > 1e-9 && hit.t <= FAR_CLIP);
        hits.sort_by(|p, q| {
            q.t.partial_cmp(&p.t).expect("ray distances are finite")
        });
        for hit in &hits {
            let y_top = h as f64 / 2.0 + (eye_z - hit.z.1) * focal / hit.t;
            let y_bot = h as f64 / 2.0 + (eye_z - hit.z.0) * focal / hit.t;
            let y0 = (y_top.round() as i64).max(0) as usize;
            let y1 = (y_bot.round() as i64).clamp(0, h as i64) as usize;
            let color = shade(hit.color, hit.t);
            for y in y0..y1 {
                let p = y * w + x;
                obs.rgb[3 * p..3 * p + 3].copy_from_slice(&color);
                obs.ids[p] = hit.id;
            }
        }
    }
    obs
}

/// Nearest front-face intersection of a ray with a convex polygon outline.
fn nearest_polygon_hit(origin: Vec2, ray: Vec2, verts: &[Vec2]) -> Option<f64> {
    let n = verts.len();
    let mut best: Option<f64> = None;
    for i in 0..n {
        if let Some(t) = ray_segment(origin, ray, verts[i], verts[(i + 1) % n]) {
            best = Some(match best {
                Some(old) if old <= t => old,
                _ => t,
            });
        }
    }
    best
}

/// Ground-truth difference masks: a pixel is set iff its id belongs to the
/// moved set in that observation.
pub fn gt_masks(
    ids1: &Observation,
    ids2: &Observation,
    moved_ids: &[u32],
) -> Result<(Mask, Mask), RenderError> {
    if (ids1.width, ids1.height) != (ids2.width, ids2.height) {
        return Err(RenderError::DimensionMismatch(
            ids1.width, ids1.height, ids2.width, ids2.height,
        ));
    }
    let mark = |obs: &Observation| Mask {
        width: obs.width,
        height: obs.height,
        bits: obs
            .ids
            .iter()
            .map(|id| u8::from(*id != 0 && moved_ids.contains(&(*id as u32))))
            .collect(),
    };
    Ok((mark(ids1), mark(ids2)))
}

// --- PPM / PGM serialization -------------------------------------------------

/// Encode an observation's RGB as binary PPM (P6). Id buffers are never
/// serialized here; they are ground-truth-only.
pub fn ppm_bytes(obs: &Observation) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", obs.width, obs.height).into_bytes();
    out.extend_from_slice(&obs.rgb);
    out
}

/// Decode a binary PPM (P6) produced by [`ppm_bytes`]. The id buffer comes
/// back all zeros.
pub fn ppm_parse(bytes: &[u8]) -> Result<Observation, RenderError> {
    let (w, h, data) = parse_netpbm(bytes, b"P6", 3)?;
    Ok(Observation { width: w, height: h, rgb: data, ids: vec![0; w * h] })
}

/// Encode a mask as binary PGM (P5) with values {0, 255}.
pub fn pgm_bytes(mask: &Mask) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", mask.width, mask.height).into_bytes();
    out.extend(mask.bits.iter().map(|b| if *b != 0 { 255u8 } else { 0 }));
    out
}

/// Decode a binary PGM (P5); any value above 127 counts as set.
pub fn pgm_parse(bytes: &[u8]) -> Result<Mask, RenderError> {
    let (w, h, data) = parse_netpbm(bytes, b"P5", 1)?;
    Ok(Mask { width: w, height: h, bits: data.iter().map(|v| u8::from(*v > 127)).collect() })
}

/// Write grayscale bytes (0-255) as a PGM; used for heatmaps.
pub fn pgm_bytes_gray(width: usize, height: usize, gray: &[u8]) -> Vec<u8> {
    assert_eq!(gray.len(), width * height);
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(gray);
    out
}

fn parse_netpbm(
    bytes: &[u8],
    magic: &[u8],
    channels: usize,
) -> Result<(usize, usize, Vec<u8>), RenderError> {
    let bad = |m: &str| RenderError::BadImage(m.into());
    // Header: magic, width, height, maxval as whitespace-separated tokens,
    // then a single whitespace byte, then raw data.
    let mut pos = 0usize;
    let mut token = |bytes: &[u8]| -> Result<Vec<u8>, RenderError> {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        Ok(bytes[start..pos].to_vec())
    };
    if token(bytes)? != magic {
        return Err(bad("wrong magic"));
    }
    let parse_dim = |tok: Vec<u8>| -> Result<usize, RenderError> {
        String::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse::<usize>().ok())
            .ok_or_else(|| bad("bad header number"))
    };
    let w = parse_dim(token(bytes)?)?;
    let h = parse_dim(token(bytes)?)?;
    let maxval = parse_dim(token(bytes)?)?;
    if maxval != 255 {
        return Err(bad("only maxval 255 supported"));
    }
    let data_start = pos + 1; // exactly one whitespace separates header and data
    let expect = w * h * channels;
    if bytes.len() < data_start + expect {
        return Err(bad("truncated pixel data"));
    }
    Ok((w, h, bytes[data_start..data_start + expect].to_vec()))
}
