//! Two hand-built rooms used throughout the crate.
//!
//! `studio` is a compact 6x6 m training room: four immovable furniture
//! blocks, a narrow two-lipped shelf slot along the north side, and four
//! movable rectangles. `loft` is a larger 7x7 m room with different
//! furniture, a vertical aisle, and twenty movables whose shape templates
//! (triangles, trapezoids, pentagons, hexagons, rhombi) share nothing with
//! the studio's rectangles, so models trained in one room have never seen
//! the other's objects.
//!
//! Alongside the worlds, [`Curated`] records hand-checked sampling regions:
//! a free patch where arm sweeps touch nothing, the slot corridor where
//! sweeps clamp on walls, push targets for object-contact starts, and
//! commutation-map cells whose expected behaviour (quiet vs. clamping) was
//! verified against the room geometry.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geom::{
    collide_capsule_polygon, disc_polygon_separation, polygon_polygon_distance, Bounds, Pose,
    Vec2,
};
use crate::world::{
    fk, ActionLimits, AgentConfig, MovableObject, Obstacle, World, WorldError, WorldSpec,
};

/// Axis-aligned rectangle for sampling agent base poses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub x: (f64, f64),
    pub y: (f64, f64),
    pub heading: (f64, f64),
}

/// Hand-checked sampling data for one room.
#[derive(Debug, Clone, PartialEq)]
pub struct Curated {
    /// Base poses whose arm sweeps stay clear of walls and objects.
    pub free: Region,
    /// Base poses inside a slot whose side walls clamp most arm sweeps.
    pub wall: Region,
    /// Movable ids worth aiming the arm at for contact starts.
    pub push_targets: Vec<u32>,
    /// Base-to-target distance range for contact starts, metres.
    pub push_distance: (f64, f64),
    /// Map cell centers expected to stay quiet (low disagreement rate).
    pub open_cells: Vec<(f64, f64)>,
    /// Map cell centers inside the slot (high disagreement rate).
    pub wall_cells: Vec<(f64, f64)>,
}

/// The shared agent: 0.30 m disc base, two-link arm (0.45 m + 0.35 m) of
/// radius 0.06 m, anchored at the base perimeter.
fn agent_at(x: f64, y: f64, heading: f64) -> AgentConfig {
    AgentConfig {
        base: Pose::new(x, y, heading),
        joints: vec![0.0, 0.0],
        link_lengths: vec![0.45, 0.35],
        base_radius: 0.30,
        arm_radius: 0.06,
        joint_limits: vec![(-2.6, 2.6), (-2.4, 2.4)],
    }
}

/// Axis-aligned block obstacle from min/max corners, ccw winding.
fn block(x0: f64, y0: f64, x1: f64, y1: f64, color: [u8; 3]) -> Obstacle {
    Obstacle {
        verts: vec![
            Vec2::new(x0, y0),
            Vec2::new(x1, y0),
            Vec2::new(x1, y1),
            Vec2::new(x0, y1),
        ],
        color,
    }
}

/// Centered rectangle template with the given half-extents.
fn rect(hw: f64, hh: f64) -> Vec<Vec2> {
    vec![
        Vec2::new(-hw, -hh),
        Vec2::new(hw, -hh),
        Vec2::new(hw, hh),
        Vec2::new(-hw, hh),
    ]
}

/// The training room. The shelf slot between the two lips spans
/// y in [1.40, 2.10] (0.70 m, against a 0.60 m base plus margins), so a
/// centred agent fits but most arm sweeps clamp on a lip.
pub fn studio() -> Result<World, WorldError> {
    let movables = vec![
        MovableObject {
            id: 1,
            shape: rect(0.22, 0.16),
            pose: Pose::new(-2.30, 2.30, 0.3),
            color: [200, 60, 60],
        },
        MovableObject {
            id: 2,
            shape: rect(0.18, 0.18),
            pose: Pose::new(2.30, 0.00, 0.0),
            color: [60, 180, 60],
        },
        MovableObject {
            id: 3,
            shape: rect(0.26, 0.14),
            pose: Pose::new(-0.30, -2.60, -0.7),
            color: [60, 90, 200],
        },
        MovableObject {
            id: 4,
            shape: rect(0.15, 0.24),
            pose: Pose::new(2.40, -2.30, 1.1),
            color: [210, 200, 70],
        },
    ];
    World::new(WorldSpec {
        name: "studio".into(),
        bounds: Bounds::new(-3.0, -3.0, 3.0, 3.0),
        immovable: vec![
            block(-3.0, -0.4, -2.2, 0.4, [138, 118, 98]), // west wall stub
            block(-1.7, 0.9, -0.9, 1.7, [122, 122, 128]), // pillar
            block(-1.8, -2.35, -0.6, -1.9, [110, 96, 84]), // desk
            block(0.2, 2.10, 1.8, 2.40, [126, 118, 96]), // shelf, upper lip
            block(0.2, 1.10, 1.8, 1.40, [118, 126, 96]), // shelf, lower lip
        ],
        movables,
        initial_agent: agent_at(0.0, -0.8, 0.0),
        limits: ActionLimits::default(),
    })
}

/// Sampling data for [`studio`]. The wall region and cells sit inside the
/// shelf slot; the free patch is the south-central clearing, at least an
/// arm's reach (1.16 m) from every block, wall and movable.
pub fn studio_curated() -> Curated {
    Curated {
        free: Region {
            x: (0.2, 1.4),
            y: (-1.35, -0.55),
            heading: (-PI, PI),
        },
        wall: Region {
            x: (0.25, 1.55),
            y: (1.73, 1.77),
            heading: (-0.2, 0.2),
        },
        push_targets: vec![1, 2, 3, 4],
        push_distance: (0.55, 0.95),
        open_cells: vec![
            (0.25, -0.75),
            (0.75, -0.75),
            (1.25, -0.75),
            (0.25, -1.25),
            (0.75, -1.25),
            (1.25, -1.25),
        ],
        wall_cells: vec![(0.25, 1.75), (0.75, 1.75)],
    }
}

/// Loft shape templates: five non-rectangular convex families, four sizes
/// each. Index `i` in 0..20 picks family `i % 5` at scale `i / 5`.
fn loft_shape(i: usize) -> Vec<Vec2> {
    let s = [0.8, 1.0, 1.2, 1.4][i / 5];
    match i % 5 {
        0 => vec![
            Vec2::new(0.24 * s, 0.0),
            Vec2::new(-0.12 * s, 0.15 * s),
            Vec2::new(-0.12 * s, -0.15 * s),
        ],
        1 => vec![
            Vec2::new(-0.22 * s, -0.13 * s),
            Vec2::new(0.22 * s, -0.13 * s),
            Vec2::new(0.12 * s, 0.13 * s),
            Vec2::new(-0.12 * s, 0.13 * s),
        ],
        2 => ngon(0.19 * s, 5),
        3 => ngon(0.17 * s, 6),
        _ => vec![
            Vec2::new(0.24 * s, 0.0),
            Vec2::new(0.0, 0.15 * s),
            Vec2::new(-0.24 * s, 0.0),
            Vec2::new(0.0, -0.15 * s),
        ],
    }
}

/// Regular n-gon of circumradius `r`, first vertex pointing +y, ccw.
fn ngon(r: f64, n: usize) -> Vec<Vec2> {
    (0..n)
        .map(|k| {
            let a = std::f64::consts::TAU * k as f64 / n as f64 + std::f64::consts::FRAC_PI_2;
            Vec2::new(r * a.cos(), r * a.sin())
        })
        .collect()
}

const LOFT_PALETTE: [[u8; 3]; 20] = [
    [204, 62, 62],
    [62, 170, 62],
    [70, 96, 204],
    [208, 196, 72],
    [180, 80, 190],
    [70, 190, 188],
    [150, 200, 70],
    [120, 120, 220],
    [96, 170, 110],
    [200, 100, 130],
    [210, 170, 100],
    [80, 140, 200],
    [220, 110, 90],
    [110, 210, 160],
    [170, 90, 220],
    [90, 180, 230],
    [190, 210, 120],
    [140, 110, 90],
    [230, 90, 150],
    [100, 200, 90],
];

/// True when `verts` keeps at least `gap` clearance from the walls, the
/// obstacles, every already-placed polygon and the agent's start colliders.
fn placement_clear(
    verts: &[Vec2],
    bounds: &Bounds,
    obstacles: &[Obstacle],
    placed: &[Vec<Vec2>],
    agent: &AgentConfig,
    gap: f64,
) -> bool {
    if verts.iter().any(|v| !bounds.contains_with_margin(*v, gap)) {
        return false;
    }
    if obstacles
        .iter()
        .any(|o| polygon_polygon_distance(&o.verts, verts) < gap)
    {
        return false;
    }
    if placed.iter().any(|p| polygon_polygon_distance(p, verts) < gap) {
        return false;
    }
    if disc_polygon_separation(agent.base.position, agent.base_radius + gap, verts) <= 0.0 {
        return false;
    }
    fk(agent)
        .iter()
        .all(|(a, b)| collide_capsule_polygon(*a, *b, agent.arm_radius + gap, verts).is_none())
}

/// The generalization room: bigger, different furniture, twenty movables
/// with shape templates disjoint from the studio's. Object poses are drawn
/// from a fixed-seed generator and rejection-placed, so the layout is
/// deterministic and validated like any hand-written one.
pub fn loft() -> Result<World, WorldError> {
    let bounds = Bounds::new(-3.5, -3.5, 3.5, 3.5);
    let immovable = vec![
        block(-2.0, 2.6, 2.0, 3.0, [130, 112, 94]),    // gallery bar
        block(-2.5, -1.6, -2.2, 0.4, [124, 124, 130]), // aisle, west side
        block(-1.5, -1.6, -1.2, 0.4, [124, 124, 130]), // aisle, east side
        block(1.2, -2.8, 2.6, -2.2, [112, 98, 86]),    // low slab
        block(1.8, 0.9, 2.4, 1.5, [126, 118, 100]),    // square pier
    ];
    let agent = agent_at(2.6, 2.0, PI);
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let mut movables = Vec::new();
    let mut placed: Vec<Vec<Vec2>> = Vec::new();
    for i in 0..20usize {
        let shape = loft_shape(i);
        let mut pose = None;
        for _ in 0..4000 {
            let candidate = Pose::new(
                rng.gen_range(-3.1..3.1),
                rng.gen_range(-3.1..3.1),
                rng.gen_range(-PI..PI),
            );
            let verts = MovableObject::world_verts(&shape, &candidate);
            if placement_clear(&verts, &bounds, &immovable, &placed, &agent, 0.06) {
                placed.push(verts);
                pose = Some(candidate);
                break;
            }
        }
        movables.push(MovableObject {
            id: (i + 1) as u32,
            shape,
            pose: pose.expect("loft is far from full; placement cannot fail"),
            color: LOFT_PALETTE[i],
        });
    }
    World::new(WorldSpec {
        name: "loft".into(),
        bounds,
        immovable,
        movables,
        initial_agent: agent,
        limits: ActionLimits::default(),
    })
}

/// Sampling data for [`loft`]. The wall region is the vertical aisle
/// between the two side walls (0.70 m wide), traversed heading +y.
pub fn loft_curated() -> Curated {
    Curated {
        free: Region {
            x: (-0.4, 0.6),
            y: (-1.3, 0.3),
            heading: (-PI, PI),
        },
        wall: Region {
            x: (-1.87, -1.83),
            y: (-1.45, -0.35),
            heading: (PI / 2.0 - 0.2, PI / 2.0 + 0.2),
        },
        push_targets: (1..=20).collect(),
        push_distance: (0.55, 0.95),
        open_cells: Vec::new(),
        wall_cells: Vec::new(),
    }
}
