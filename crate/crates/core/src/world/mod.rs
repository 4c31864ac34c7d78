//! Deterministic 2D kinematic world: an articulated agent (disc base plus a
//! two-link arm), immovable polygonal obstacles, and pushable convex movable
//! objects inside a rectangular room.
//!
//! Every number stored in a [`WorldState`] lives on a fixed lattice of
//! spacing 2^-40 (see [`quantize`]). Per-substep motion deltas are quantized
//! once and then added; because sums of lattice points this small are exact
//! in f64, replaying the same motions in any order yields bit-identical
//! states whenever nothing was clamped. That exactness is what lets the
//! experiment layer treat "identical final state" as a meaningful label.

pub mod file;

use std::collections::BTreeMap;

use crate::geom::{
    collide_capsule_polygon, collide_disc_polygon, is_convex_ccw, polygon_area, polygons_overlap,
    Bounds, Contact, Pose, Vec2,
};

/// Position tolerance for equality-adjacent checks (meters).
pub const POSITION_TOL: f64 = 1e-6;
/// Angle tolerance for equality-adjacent checks (radians).
pub const ANGLE_TOL: f64 = 1e-9;

/// Substep displacement bound: no contact point moves more than this per
/// substep (meters).
const SUBSTEP_DISP: f64 = 0.01;
/// Minimum substeps per step.
const MIN_SUBSTEPS: usize = 10;
/// Penetration slack treated as resting contact rather than collision.
const CONTACT_EPS: f64 = 1e-9;

const LATTICE_SCALE: f64 = 1099511627776.0; // 2^40
const LATTICE_INV: f64 = 1.0 / LATTICE_SCALE;

/// Snap a value to the state lattice (spacing 2^-40, ties away from zero).
#[inline]
pub fn quantize(x: f64) -> f64 {
    (x * LATTICE_SCALE).round() * LATTICE_INV
}

/// Pi snapped to the lattice; headings live in [-PI_Q, PI_Q).
pub fn pi_q() -> f64 {
    quantize(std::f64::consts::PI)
}

/// Wrap a lattice angle into [-PI_Q, PI_Q) using exact lattice arithmetic
/// (adding/subtracting 2*PI_Q never rounds for values this small).
pub fn normalize_angle_q(mut a: f64) -> f64 {
    let pi = pi_q();
    let two_pi = 2.0 * pi;
    while a >= pi {
        a -= two_pi;
    }
    while a < -pi {
        a += two_pi;
    }
    a
}

fn quantize_pose(p: Pose) -> Pose {
    Pose {
        position: Vec2::new(quantize(p.position.x), quantize(p.position.y)),
        heading: normalize_angle_q(quantize(p.heading)),
    }
}

/// Errors from world construction, stepping and state restoration.
#[derive(Debug, thiserror::Error, PartialEq)]
pub enum WorldError {
    #[error("action dof index {0} out of range (agent has {1} dofs)")]
    InvalidDof(usize, usize),
    #[error("action velocity {velocity} exceeds limit {limit} for dof {dof}")]
    VelocityLimit { dof: usize, velocity: f64, limit: f64 },
    #[error("state does not belong to this world spec: {0}")]
    SpecMismatch(String),
    #[error("invalid world spec: {0}")]
    InvalidSpec(String),
}

/// Per-dof velocity magnitude limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionLimits {
    /// Base rotation, radians/s.
    pub max_base_rotate: f64,
    /// Base translation, m/s.
    pub max_base_translate: f64,
    /// Any arm joint, radians/s.
    pub max_joint: f64,
}

impl Default for ActionLimits {
    fn default() -> Self {
        ActionLimits {
            max_base_rotate: 1.5,
            max_base_translate: 1.0,
            max_joint: 2.2,
        }
    }
}

/// The agent's full configuration: a disc base with heading plus a chain of
/// revolute arm joints. Dof 0 rotates the base, dof 1 translates it along
/// its heading, dof 2.. drive the arm joints in order.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentConfig {
    pub base: Pose,
    pub joints: Vec<f64>,
    pub link_lengths: Vec<f64>,
    pub base_radius: f64,
    pub arm_radius: f64,
    /// Per-joint [lo, hi] mechanical stops, radians.
    pub joint_limits: Vec<(f64, f64)>,
}

impl AgentConfig {
    /// Number of actuated dofs: base rotate, base translate, one per joint.
    pub fn dof_count(&self) -> usize {
        2 + self.joints.len()
    }

    /// Maximum distance from base center any agent point can reach.
    pub fn reach(&self) -> f64 {
        self.base_radius + self.link_lengths.iter().sum::<f64>() + self.arm_radius
    }

    fn quantized(mut self) -> Self {
        self.base = quantize_pose(self.base);
        for j in &mut self.joints {
            *j = quantize(*j);
        }
        for (lo, hi) in &mut self.joint_limits {
            *lo = quantize(*lo);
            *hi = quantize(*hi);
        }
        self
    }

    fn validate(&self) -> Result<(), WorldError> {
        let bad = |m: String| Err(WorldError::InvalidSpec(m));
        if self.joints.len() != self.link_lengths.len()
            || self.joints.len() != self.joint_limits.len()
        {
            return bad(format!(
                "joint/link/limit counts disagree: {}/{}/{}",
                self.joints.len(),
                self.link_lengths.len(),
                self.joint_limits.len()
            ));
        }
        if self.joints.is_empty() {
            return bad("agent needs at least one arm joint".into());
        }
        if self.base_radius <= 0.0 || self.arm_radius <= 0.0 {
            return bad("base_radius and arm_radius must be positive".into());
        }
        if self.link_lengths.iter().any(|l| *l <= 0.0) {
            return bad("link lengths must be positive".into());
        }
        for (k, (j, (lo, hi))) in self.joints.iter().zip(&self.joint_limits).enumerate() {
            if lo >= hi {
                return bad(format!("joint {k} limits inverted: [{lo}, {hi}]"));
            }
            if j < lo || j > hi {
                return bad(format!("joint {k} value {j} outside limits [{lo}, {hi}]"));
            }
        }
        if !self.base.position.is_finite() || !self.base.heading.is_finite() {
            return bad("agent pose must be finite".into());
        }
        Ok(())
    }
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            base: Pose::new(0.0, 0.0, 0.0),
            joints: vec![0.0, 0.0],
            link_lengths: vec![0.45, 0.35],
            base_radius: 0.30,
            arm_radius: 0.06,
            joint_limits: vec![(-2.6, 2.6), (-2.4, 2.4)],
        }
    }
}

/// An immovable obstacle: convex polygon plus render color.
#[derive(Debug, Clone, PartialEq)]
pub struct Obstacle {
    pub verts: Vec<Vec2>,
    pub color: [u8; 3],
}

/// A pushable object: convex polygon in local coordinates, posed in the
/// world, with a stable positive id (0 is reserved for background).
#[derive(Debug, Clone, PartialEq)]
pub struct MovableObject {
    pub id: u32,
    pub shape: Vec<Vec2>,
    pub pose: Pose,
    pub color: [u8; 3],
}

impl MovableObject {
    /// Shape vertices transformed by a pose into world coordinates.
    pub fn world_verts(shape: &[Vec2], pose: &Pose) -> Vec<Vec2> {
        shape.iter().map(|v| pose.transform(*v)).collect()
    }
}

/// Static description of a world: room bounds, obstacles, movable-object
/// templates (with initial poses) and the initial agent configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldSpec {
    pub name: String,
    pub bounds: Bounds,
    pub immovable: Vec<Obstacle>,
    pub movables: Vec<MovableObject>,
    pub initial_agent: AgentConfig,
    pub limits: ActionLimits,
}

impl WorldSpec {
    pub fn movable(&self, id: u32) -> Option<&MovableObject> {
        self.movables.iter().find(|m| m.id == id)
    }
}

/// Everything that changes during simulation, plus contact flags accumulated
/// since the last [`WorldState::reset_contact_flags`].
#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub agent: AgentConfig,
    pub movable_poses: BTreeMap<u32, Pose>,
    pub immovable_contact: bool,
    pub movable_contact: bool,
}

impl WorldState {
    pub fn reset_contact_flags(&mut self) {
        self.immovable_contact = false;
        self.movable_contact = false;
    }
}

/// One motor command: a single dof driven at a constant velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Action {
    pub dof_index: usize,
    /// radians/s for rotational dofs, m/s for the translation dof.
    pub velocity: f64,
}

/// What a step touched.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ContactReport {
    pub immovable: bool,
    /// Ids of objects displaced during the step, ascending.
    pub moved: Vec<u32>,
}

/// A validated world: the spec plus a live state.
#[derive(Debug, Clone)]
pub struct World {
    spec: WorldSpec,
    state: WorldState,
}

impl World {
    /// Validate a spec and build the initial state from it. All state
    /// numbers are snapped to the lattice here so stepping stays exact.
    pub fn new(mut spec: WorldSpec) -> Result<World, WorldError> {
        let bad = |m: String| Err(WorldError::InvalidSpec(m));
        if spec.bounds.width() <= 0.0 || spec.bounds.height() <= 0.0 {
            return bad("bounds must have positive extent".into());
        }
        spec.initial_agent = spec.initial_agent.clone().quantized();
        spec.initial_agent.validate()?;
        for obs in &spec.immovable {
            if obs.verts.len() < 3 || !is_convex_ccw(&obs.verts) {
                return bad("obstacle polygons must be convex with ccw winding".into());
            }
            if obs.verts.iter().any(|v| !spec.bounds.contains(*v)) {
                return bad("obstacle extends outside bounds".into());
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        for mv in &mut spec.movables {
            if mv.id == 0 {
                return bad("movable id 0 is reserved for background".into());
            }
            if !seen.insert(mv.id) {
                return bad(format!("duplicate movable id {}", mv.id));
            }
            if mv.shape.len() < 3 || !is_convex_ccw(&mv.shape) {
                return bad(format!("movable {} must be convex ccw", mv.id));
            }
            if polygon_area(&mv.shape) <= 1e-9 {
                return bad(format!("movable {} has ~zero area", mv.id));
            }
            mv.pose = quantize_pose(mv.pose);
        }
        let state = WorldState {
            agent: spec.initial_agent.clone(),
            movable_poses: spec.movables.iter().map(|m| (m.id, m.pose)).collect(),
            immovable_contact: false,
            movable_contact: false,
        };
        let world = World { spec, state };
        world.check_initial_placement()?;
        Ok(world)
    }

    fn check_initial_placement(&self) -> Result<(), WorldError> {
        let bad = |m: String| Err(WorldError::InvalidSpec(m));
        if agent_immovable_penetration(&self.state.agent, &self.spec) > CONTACT_EPS {
            return bad("initial agent placement intersects immovable geometry".into());
        }
        let polys: Vec<(u32, Vec<Vec2>)> = self
            .spec
            .movables
            .iter()
            .map(|m| (m.id, MovableObject::world_verts(&m.shape, &m.pose)))
            .collect();
        for (id, verts) in &polys {
            if object_immovable_penetration(verts, &self.spec) > CONTACT_EPS {
                return bad(format!("movable {id} intersects immovable geometry"));
            }
            for collider in agent_colliders(&self.state.agent) {
                if collider.contact(verts).is_some() {
                    return bad(format!("movable {id} intersects the agent"));
                }
            }
        }
        for i in 0..polys.len() {
            for j in i + 1..polys.len() {
                if polygons_overlap(&polys[i].1, &polys[j].1).is_some() {
                    return bad(format!(
                        "movables {} and {} interpenetrate",
                        polys[i].0, polys[j].0
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn spec(&self) -> &WorldSpec {
        &self.spec
    }

    pub fn state(&self) -> &WorldState {
        &self.state
    }

    pub fn state_mut(&mut self) -> &mut WorldState {
        &mut self.state
    }

    /// Bit-exact copy of the live state.
    pub fn snapshot(&self) -> WorldState {
        self.state.clone()
    }

    /// Replace the live state after checking it belongs to this spec.
    pub fn restore(&mut self, snapshot: &WorldState) -> Result<(), WorldError> {
        validate_state(snapshot, &self.spec)?;
        self.state = snapshot.clone();
        Ok(())
    }

    /// Step the live world, accumulating contact flags into the state.
    pub fn step_mut(&mut self, action: Action, dt: f64) -> Result<ContactReport, WorldError> {
        let (next, report) = step(&self.state, &self.spec, action, dt)?;
        self.state = next;
        Ok(report)
    }
}

/// Check that a state structurally matches a spec (joint counts, static
/// agent parameters, movable id set).
pub fn validate_state(state: &WorldState, spec: &WorldSpec) -> Result<(), WorldError> {
    let init = &spec.initial_agent;
    let a = &state.agent;
    if a.joints.len() != init.joints.len()
        || a.link_lengths != init.link_lengths
        || a.base_radius != init.base_radius
        || a.arm_radius != init.arm_radius
        || a.joint_limits != init.joint_limits
    {
        return Err(WorldError::SpecMismatch(
            "agent static parameters differ from spec".into(),
        ));
    }
    let spec_ids: Vec<u32> = spec.movables.iter().map(|m| m.id).collect();
    let state_ids: Vec<u32> = state.movable_poses.keys().copied().collect();
    let mut sorted = spec_ids.clone();
    sorted.sort_unstable();
    if sorted != state_ids {
        return Err(WorldError::SpecMismatch(format!(
            "movable id sets differ: spec {sorted:?}, state {state_ids:?}"
        )));
    }
    Ok(())
}

/// True when the agent pose in `state` overlaps immovable geometry, the room
/// sides, or any movable object, with `margin` meters of required clearance.
/// Placement samplers want strictly free poses rather than the touching
/// contact the stepper tolerates, hence the explicit margin.
pub fn agent_placement_blocked(state: &WorldState, spec: &WorldSpec, margin: f64) -> bool {
    let mut inflated = state.agent.clone();
    inflated.base_radius += margin;
    inflated.arm_radius += margin;
    if agent_immovable_penetration(&inflated, spec) > 0.0 {
        return true;
    }
    for (id, pose) in &state.movable_poses {
        let obj = match spec.movable(*id) {
            Some(o) => o,
            None => return true,
        };
        let verts = MovableObject::world_verts(&obj.shape, pose);
        for collider in agent_colliders(&inflated) {
            if collider.contact(&verts).is_some() {
                return true;
            }
        }
    }
    false
}

/// True when placing movable `id` at `pose` would come within `margin`
/// meters of the room sides, immovable geometry, another movable (at its
/// pose in `state`), or the agent.
pub fn object_placement_blocked(
    state: &WorldState,
    spec: &WorldSpec,
    id: u32,
    pose: &Pose,
    margin: f64,
) -> bool {
    let obj = match spec.movable(id) {
        Some(o) => o,
        None => return true,
    };
    let verts = MovableObject::world_verts(&obj.shape, pose);
    for v in &verts {
        if spec.bounds.inner_distance(*v) < margin {
            return true;
        }
    }
    for obs in &spec.immovable {
        if crate::geom::polygon_polygon_distance(&verts, &obs.verts) < margin {
            return true;
        }
    }
    for (other_id, other_pose) in &state.movable_poses {
        if *other_id == id {
            continue;
        }
        let other = match spec.movable(*other_id) {
            Some(o) => o,
            None => return true,
        };
        let other_verts = MovableObject::world_verts(&other.shape, other_pose);
        if crate::geom::polygon_polygon_distance(&verts, &other_verts) < margin {
            return true;
        }
    }
    let mut inflated = state.agent.clone();
    inflated.base_radius += margin;
    inflated.arm_radius += margin;
    for collider in agent_colliders(&inflated) {
        if collider.contact(&verts).is_some() {
            return true;
        }
    }
    false
}

/// Forward kinematics: world-space arm segments, one per joint. Joint 0
/// both places the anchor on the base perimeter and sets the first link's
/// direction; later joints are relative to the previous link.
pub fn fk(agent: &AgentConfig) -> Vec<(Vec2, Vec2)> {
    let mut segments = Vec::with_capacity(agent.joints.len());
    let mut angle = agent.base.heading + agent.joints[0];
    let mut point = agent.base.position + Vec2::from_angle(angle) * agent.base_radius;
    for (k, len) in agent.link_lengths.iter().enumerate() {
        if k > 0 {
            angle += agent.joints[k];
        }
        let next = point + Vec2::from_angle(angle) * *len;
        segments.push((point, next));
        point = next;
    }
    segments
}

/// An agent collision shape: the base disc or one arm capsule.
enum ColliderShape {
    Disc { center: Vec2, radius: f64 },
    Capsule { a: Vec2, b: Vec2, radius: f64 },
}

impl ColliderShape {
    /// Contact with a convex polygon; normal points out of the polygon
    /// toward this collider.
    fn contact(&self, verts: &[Vec2]) -> Option<Contact> {
        match self {
            ColliderShape::Disc { center, radius } => {
                collide_disc_polygon(*center, *radius, verts)
            }
            ColliderShape::Capsule { a, b, radius } => {
                collide_capsule_polygon(*a, *b, *radius, verts)
            }
        }
    }

    /// Penetration depth past the room sides (0 when fully inside).
    fn bounds_penetration(&self, bounds: &Bounds) -> f64 {
        match self {
            ColliderShape::Disc { center, radius } => {
                (radius - bounds.inner_distance(*center)).max(0.0)
            }
            ColliderShape::Capsule { a, b, radius } => {
                let da = bounds.inner_distance(*a);
                let db = bounds.inner_distance(*b);
                (radius - da.min(db)).max(0.0)
            }
        }
    }
}

fn agent_colliders(agent: &AgentConfig) -> Vec<ColliderShape> {
    let mut shapes = vec![ColliderShape::Disc {
        center: agent.base.position,
        radius: agent.base_radius,
    }];
    for (a, b) in fk(agent) {
        shapes.push(ColliderShape::Capsule {
            a,
            b,
            radius: agent.arm_radius,
        });
    }
    shapes
}

/// Deepest agent-vs-immovable penetration (obstacles and room sides).
fn agent_immovable_penetration(agent: &AgentConfig, spec: &WorldSpec) -> f64 {
    let mut worst = 0.0_f64;
    for shape in agent_colliders(agent) {
        worst = worst.max(shape.bounds_penetration(&spec.bounds));
        for obs in &spec.immovable {
            if let Some(c) = shape.contact(&obs.verts) {
                worst = worst.max(c.depth);
            }
        }
    }
    worst
}

/// Deepest object-vs-immovable penetration (obstacles and room sides).
fn object_immovable_penetration(verts: &[Vec2], spec: &WorldSpec) -> f64 {
    let mut worst = 0.0_f64;
    for v in verts {
        worst = worst.max(-spec.bounds.inner_distance(*v));
    }
    for obs in &spec.immovable {
        if let Some(depth) = polygons_overlap(verts, &obs.verts) {
            worst = worst.max(depth);
        }
    }
    worst
}

/// Apply one action for `dt` seconds. Quasi-static integration in substeps:
/// motion into immovable geometry is clamped (substep reverted), movable
/// objects in the way are translated along the contact normal by the
/// penetration depth, and an object pinned against immovable geometry blocks
/// the agent instead of moving.
pub fn step(
    state: &WorldState,
    spec: &WorldSpec,
    action: Action,
    dt: f64,
) -> Result<(WorldState, ContactReport), WorldError> {
    assert!(dt > 0.0, "step requires dt > 0");
    let agent = &state.agent;
    let dofs = agent.dof_count();
    if action.dof_index >= dofs {
        return Err(WorldError::InvalidDof(action.dof_index, dofs));
    }
    let limit = match action.dof_index {
        0 => spec.limits.max_base_rotate,
        1 => spec.limits.max_base_translate,
        _ => spec.limits.max_joint,
    };
    if action.velocity.abs() > limit {
        return Err(WorldError::VelocityLimit {
            dof: action.dof_index,
            velocity: action.velocity,
            limit,
        });
    }

    // Largest displacement any contact point can see over the whole step.
    let lever = match action.dof_index {
        0 => agent.reach(),
        1 => 1.0,
        2 => agent.link_lengths.iter().sum::<f64>() + agent.arm_radius,
        k => {
            agent.link_lengths[k - 2..].iter().sum::<f64>() + agent.arm_radius
        }
    };
    let max_disp = action.velocity.abs() * dt * lever;
    let n = MIN_SUBSTEPS.max((max_disp / SUBSTEP_DISP).ceil() as usize);
    step_substeps(state, spec, action, dt, n)
}

/// Integration core with an explicit substep count (exposed within the
/// crate so tests can run a much finer integration as an oracle).
pub(crate) fn step_substeps(
    state: &WorldState,
    spec: &WorldSpec,
    action: Action,
    dt: f64,
    n: usize,
) -> Result<(WorldState, ContactReport), WorldError> {
    let delta = quantize(action.velocity * dt / n as f64);
    let mut cur = state.clone();
    let mut report = ContactReport::default();
    let mut moved: std::collections::BTreeSet<u32> = std::collections::BTreeSet::new();

    for _ in 0..n {
        // Tentative agent config for this substep.
        let mut agent = cur.agent.clone();
        match action.dof_index {
            0 => {
                agent.base.heading = normalize_angle_q(agent.base.heading + delta);
            }
            1 => {
                let h = agent.base.heading;
                let dx = quantize(delta * h.cos());
                let dy = quantize(delta * h.sin());
                agent.base.position.x += dx;
                agent.base.position.y += dy;
            }
            k => {
                let j = k - 2;
                let (lo, hi) = agent.joint_limits[j];
                // Mechanical stop: clamp silently (a limit is not a wall).
                agent.joints[j] = (agent.joints[j] + delta).clamp(lo, hi);
            }
        }

        // Immovable geometry blocks the agent outright.
        if agent_immovable_penetration(&agent, spec) > CONTACT_EPS {
            report.immovable = true;
            cur.immovable_contact = true;
            // Identical substeps from an unchanged state stay blocked.
            break;
        }

        // Push movable objects out of the way; a pinned object cancels the
        // whole substep.
        let colliders = agent_colliders(&agent);
        let mut new_poses = cur.movable_poses.clone();
        let mut pushed: Vec<u32> = Vec::new();
        let mut pinned = false;
        'objects: for mv in &spec.movables {
            let pose = new_poses.get_mut(&mv.id).expect("validated id set");
            for shape in &colliders {
                let verts = MovableObject::world_verts(&mv.shape, pose);
                if let Some(c) = shape.contact(&verts) {
                    // Normal points toward the agent; push the other way.
                    let push = -c.normal * c.depth;
                    let mut cand = *pose;
                    cand.position.x += quantize(push.x);
                    cand.position.y += quantize(push.y);
                    let cand_verts = MovableObject::world_verts(&mv.shape, &cand);
                    if object_immovable_penetration(&cand_verts, spec) > CONTACT_EPS {
                        pinned = true;
                        break 'objects;
                    }
                    *pose = cand;
                    if !pushed.contains(&mv.id) {
                        pushed.push(mv.id);
                    }
                }
            }
        }
        if pinned {
            // Object trapped between agent and immovable geometry: block
            // the agent and leave everything as it was.
            report.immovable = true;
            cur.immovable_contact = true;
            break;
        }
        cur.agent = agent;
        cur.movable_poses = new_poses;
        if !pushed.is_empty() {
            cur.movable_contact = true;
            moved.extend(pushed);
        }
    }

    report.moved = moved.into_iter().collect();
    Ok((cur, report))
}
