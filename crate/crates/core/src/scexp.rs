//! SC-experiments: play one action sequence in two different orders from a
//! bit-identical start state and compare where the world ends up.
//!
//! In free space the two rollouts land on exactly the same state (the world
//! integrates on a lattice, so sums of the same motion deltas commute
//! bit-for-bit). An immovable obstacle breaks that symmetry by clamping one
//! ordering differently from the other, and a movable object records the
//! interaction in its own displaced pose. Comparing the two final states
//! therefore yields the ground-truth outcome label for free.

use std::collections::BTreeSet;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bytesio::{ByteReader, ByteWriter};
use crate::render::{ppm_bytes, ppm_parse, render, Camera, Observation};
use crate::world::{validate_state, step, Action, World, WorldError, WorldState};
use crate::geom::angle_diff;

/// Outcome label of an SC-experiment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    /// The two orderings commuted: identical final states.
    Identical,
    /// The agent itself ended up elsewhere (it hit something immovable, or
    /// its actions inherently do not commute).
    Different,
    /// The agent's trajectory commuted but these objects got displaced.
    MovedObject(BTreeSet<u32>),
}

/// Agent-config tolerance for outcome labeling: max |Δ| over pose
/// components (m or rad).
pub const AGENT_TOL: f64 = 1e-4;
/// Object pose tolerance for outcome labeling (m / rad).
pub const OBJECT_POSE_TOL: f64 = 1e-3;

/// An ordered list of single-dof motor commands, each applied for `dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionSequence {
    pub actions: Vec<Action>,
    pub dt: f64,
}

/// How experiment sequences are sampled.
#[derive(Debug, Clone, PartialEq)]
pub struct SeqConfig {
    /// Dofs the sampler may drive (default: the arm joint nearest the base).
    pub dof_set: Vec<usize>,
    pub length: usize,
    /// Velocity amplitude range; the sign is drawn separately.
    pub amp_range: (f64, f64),
    /// Seconds each action is applied.
    pub dt: f64,
}

impl Default for SeqConfig {
    fn default() -> Self {
        SeqConfig { dof_set: vec![2], length: 20, amp_range: (0.5, 2.0), dt: 0.1 }
    }
}

/// One complete SC-experiment with ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SCRecord {
    pub start: WorldState,
    pub seq: ActionSequence,
    /// Permutation applied for the second rollout.
    pub order2: Vec<usize>,
    pub obs1: Observation,
    pub obs2: Observation,
    pub finals: (WorldState, WorldState),
    pub gt: Outcome,
}

/// Errors from the experiment layer.
#[derive(Debug, thiserror::Error)]
pub enum ScexpError {
    #[error("dof set must not be empty")]
    EmptyDofSet,
    #[error("invalid sequence config: {0}")]
    BadConfig(String),
    #[error("order2 must be a non-identity permutation of 0..{0}")]
    BadPermutation(usize),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error("state comparison across different structures: {0}")]
    SpecMismatch(String),
    #[error("bad SC record file: {0}")]
    BadFile(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<crate::bytesio::Truncated> for ScexpError {
    fn from(e: crate::bytesio::Truncated) -> Self {
        ScexpError::BadFile(e.to_string())
    }
}

/// Sample a random action sequence: each action draws its dof uniformly
/// from the dof set, a uniform sign, and a uniform amplitude.
pub fn sample_sequence(seed: u64, cfg: &SeqConfig) -> Result<ActionSequence, ScexpError> {
    if cfg.dof_set.is_empty() {
        return Err(ScexpError::EmptyDofSet);
    }
    if cfg.length < 2 {
        return Err(ScexpError::BadConfig(format!("length {} < 2", cfg.length)));
    }
    if !(cfg.amp_range.0 > 0.0 && cfg.amp_range.1 >= cfg.amp_range.0) {
        return Err(ScexpError::BadConfig(format!("bad amp_range {:?}", cfg.amp_range)));
    }
    if cfg.dt <= 0.0 {
        return Err(ScexpError::BadConfig(format!("bad dt {}", cfg.dt)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let actions = (0..cfg.length)
        .map(|_| {
            let dof_index = cfg.dof_set[rng.gen_range(0..cfg.dof_set.len())];
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let amp = rng.gen_range(cfg.amp_range.0..=cfg.amp_range.1);
            Action { dof_index, velocity: sign * amp }
        })
        .collect();
    Ok(ActionSequence { actions, dt: cfg.dt })
}

/// The default second ordering: play the sequence backwards.
pub fn reverse_permutation(len: usize) -> Vec<usize> {
    (0..len).rev().collect()
}

fn check_permutation(order2: &[usize], len: usize) -> Result<(), ScexpError> {
    let mut seen = vec![false; len];
    if order2.len() != len {
        return Err(ScexpError::BadPermutation(len));
    }
    for &i in order2 {
        if i >= len || seen[i] {
            return Err(ScexpError::BadPermutation(len));
        }
        seen[i] = true;
    }
    if order2.iter().copied().eq(0..len) {
        return Err(ScexpError::BadPermutation(len));
    }
    Ok(())
}

fn rollout(
    world: &World,
    start: &WorldState,
    seq: &ActionSequence,
    order: impl Iterator<Item = usize>,
) -> Result<WorldState, ScexpError> {
    let mut state = start.clone();
    state.reset_contact_flags();
    for i in order {
        let (next, _) = step(&state, world.spec(), seq.actions[i], seq.dt)?;
        state = next;
    }
    Ok(state)
}

/// Run one SC-experiment: both rollouts from the same start, renders of the
/// two final states, and the ground-truth label. Pure with respect to the
/// world: the live state is untouched.
pub fn run_experiment(
    world: &World,
    start: &WorldState,
    seq: &ActionSequence,
    order2: &[usize],
    cam: &Camera,
) -> Result<SCRecord, ScexpError> {
    validate_state(start, world.spec())?;
    check_permutation(order2, seq.actions.len())?;
    let final1 = rollout(world, start, seq, 0..seq.actions.len())?;
    let final2 = rollout(world, start, seq, order2.iter().copied())?;
    let obs1 = render(&final1, world.spec(), cam);
    let obs2 = render(&final2, world.spec(), cam);
    let gt = label_outcome(&final1, &final2)?;
    Ok(SCRecord {
        start: start.clone(),
        seq: seq.clone(),
        order2: order2.to_vec(),
        obs1,
        obs2,
        finals: (final1, final2),
        gt,
    })
}

/// Compare two final states into an outcome label. Contact flags are
/// bookkeeping, not state: they are ignored here.
///
/// Priority: any agent-config difference beyond tolerance labels the whole
/// experiment Different, even if objects also moved — a moved object only
/// counts when the agent's own trajectory commuted.
pub fn label_outcome(final1: &WorldState, final2: &WorldState) -> Result<Outcome, ScexpError> {
    let (a, b) = (&final1.agent, &final2.agent);
    if a.joints.len() != b.joints.len() {
        return Err(ScexpError::SpecMismatch("joint counts differ".into()));
    }
    let keys1: Vec<u32> = final1.movable_poses.keys().copied().collect();
    let keys2: Vec<u32> = final2.movable_poses.keys().copied().collect();
    if keys1 != keys2 {
        return Err(ScexpError::SpecMismatch("movable id sets differ".into()));
    }

    let mut agent_delta = (a.base.position.x - b.base.position.x)
        .abs()
        .max((a.base.position.y - b.base.position.y).abs());
    agent_delta = agent_delta.max(angle_diff(a.base.heading, b.base.heading).abs());
    for (ja, jb) in a.joints.iter().zip(&b.joints) {
        agent_delta = agent_delta.max((ja - jb).abs());
    }
    if agent_delta > AGENT_TOL {
        return Ok(Outcome::Different);
    }

    let mut moved = BTreeSet::new();
    for (id, p1) in &final1.movable_poses {
        let p2 = &final2.movable_poses[id];
        let dpos = (p1.position - p2.position).norm();
        let dang = angle_diff(p1.heading, p2.heading).abs();
        if dpos > OBJECT_POSE_TOL || dang > OBJECT_POSE_TOL {
            moved.insert(*id);
        }
    }
    if moved.is_empty() {
        Ok(Outcome::Identical)
    } else {
        Ok(Outcome::MovedObject(moved))
    }
}

// --- SCRC batch serialization ------------------------------------------------

/// The fields of an SC record that survive a round-trip through an SCRC
/// batch file (final states are omitted; they replay deterministically
/// from the start state and sequence; id buffers are ground-truth-only).
#[derive(Debug, Clone, PartialEq)]
pub struct ScrcEntry {
    pub start: WorldState,
    pub seq: ActionSequence,
    pub order2: Vec<usize>,
    pub obs1: Observation,
    pub obs2: Observation,
    pub gt: Outcome,
}

impl From<&SCRecord> for ScrcEntry {
    fn from(r: &SCRecord) -> Self {
        let mut obs1 = r.obs1.clone();
        let mut obs2 = r.obs2.clone();
        obs1.ids.iter_mut().for_each(|id| *id = 0);
        obs2.ids.iter_mut().for_each(|id| *id = 0);
        ScrcEntry {
            start: r.start.clone(),
            seq: r.seq.clone(),
            order2: r.order2.clone(),
            obs1,
            obs2,
            gt: r.gt.clone(),
        }
    }
}

const SCRC_MAGIC: &[u8; 4] = b"SCRC";
const SCRC_VERSION: u8 = 1;

fn write_state(w: &mut ByteWriter, s: &WorldState) {
    let a = &s.agent;
    w.f64(a.base.position.x);
    w.f64(a.base.position.y);
    w.f64(a.base.heading);
    w.u32(a.joints.len() as u32);
    for j in &a.joints {
        w.f64(*j);
    }
    for l in &a.link_lengths {
        w.f64(*l);
    }
    for (lo, hi) in &a.joint_limits {
        w.f64(*lo);
        w.f64(*hi);
    }
    w.f64(a.base_radius);
    w.f64(a.arm_radius);
    w.u32(s.movable_poses.len() as u32);
    for (id, p) in &s.movable_poses {
        w.u32(*id);
        w.f64(p.position.x);
        w.f64(p.position.y);
        w.f64(p.heading);
    }
    w.u8(s.immovable_contact as u8);
    w.u8(s.movable_contact as u8);
}

fn read_state(r: &mut ByteReader) -> Result<WorldState, ScexpError> {
    use crate::geom::{Pose, Vec2};
    use crate::world::AgentConfig;
    let x = r.f64()?;
    let y = r.f64()?;
    let heading = r.f64()?;
    let nj = r.u32()? as usize;
    if nj > 64 {
        return Err(ScexpError::BadFile(format!("implausible joint count {nj}")));
    }
    let mut joints = Vec::with_capacity(nj);
    for _ in 0..nj {
        joints.push(r.f64()?);
    }
    let mut link_lengths = Vec::with_capacity(nj);
    for _ in 0..nj {
        link_lengths.push(r.f64()?);
    }
    let mut joint_limits = Vec::with_capacity(nj);
    for _ in 0..nj {
        let lo = r.f64()?;
        let hi = r.f64()?;
        joint_limits.push((lo, hi));
    }
    let base_radius = r.f64()?;
    let arm_radius = r.f64()?;
    let agent = AgentConfig {
        base: Pose { position: Vec2::new(x, y), heading },
        joints,
        link_lengths,
        base_radius,
        arm_radius,
        joint_limits,
    };
    let nm = r.u32()? as usize;
    let mut movable_poses = std::collections::BTreeMap::new();
    for _ in 0..nm {
        let id = r.u32()?;
        let px = r.f64()?;
        let py = r.f64()?;
        let ph = r.f64()?;
        movable_poses.insert(id, Pose { position: Vec2::new(px, py), heading: ph });
    }
    let immovable_contact = r.u8()? != 0;
    let movable_contact = r.u8()? != 0;
    Ok(WorldState { agent, movable_poses, immovable_contact, movable_contact })
}

/// Serialize a batch of SC records (see [`ScrcEntry`] for what survives).
pub fn scrc_bytes(records: &[ScrcEntry]) -> Vec<u8> {
    let mut w = ByteWriter::new();
    w.raw(SCRC_MAGIC);
    w.u8(SCRC_VERSION);
    w.u32(records.len() as u32);
    for rec in records {
        let mut body = ByteWriter::new();
        write_state(&mut body, &rec.start);
        body.f64(rec.seq.dt);
        body.u32(rec.seq.actions.len() as u32);
        for a in &rec.seq.actions {
            body.u32(a.dof_index as u32);
            body.f64(a.velocity);
        }
        for i in &rec.order2 {
            body.u32(*i as u32);
        }
        body.chunk(&ppm_bytes(&rec.obs1));
        body.chunk(&ppm_bytes(&rec.obs2));
        match &rec.gt {
            Outcome::Identical => body.u8(0),
            Outcome::Different => body.u8(1),
            Outcome::MovedObject(ids) => {
                body.u8(2);
                body.u32(ids.len() as u32);
                for id in ids {
                    body.u32(*id);
                }
            }
        }
        w.chunk(&body.buf);
    }
    w.buf
}

/// Parse a batch written by [`scrc_bytes`].
pub fn scrc_parse(bytes: &[u8]) -> Result<Vec<ScrcEntry>, ScexpError> {
    let mut r = ByteReader::new(bytes);
    if r.take(4)? != SCRC_MAGIC {
        return Err(ScexpError::BadFile("wrong magic".into()));
    }
    if r.u8()? != SCRC_VERSION {
        return Err(ScexpError::BadFile("unsupported version".into()));
    }
    let count = r.u32()? as usize;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let body = r.chunk()?;
        let mut b = ByteReader::new(body);
        let start = read_state(&mut b)?;
        let dt = b.f64()?;
        let len = b.u32()? as usize;
        if len > 100_000 {
            return Err(ScexpError::BadFile("implausible sequence length".into()));
        }
        let mut actions = Vec::with_capacity(len);
        for _ in 0..len {
            let dof_index = b.u32()? as usize;
            let velocity = b.f64()?;
            actions.push(Action { dof_index, velocity });
        }
        let mut order2 = Vec::with_capacity(len);
        for _ in 0..len {
            order2.push(b.u32()? as usize);
        }
        let obs1 = ppm_parse(b.chunk()?).map_err(|e| ScexpError::BadFile(e.to_string()))?;
        let obs2 = ppm_parse(b.chunk()?).map_err(|e| ScexpError::BadFile(e.to_string()))?;
        let gt = match b.u8()? {
            0 => Outcome::Identical,
            1 => Outcome::Different,
            2 => {
                let n = b.u32()? as usize;
                let mut ids = BTreeSet::new();
                for _ in 0..n {
                    ids.insert(b.u32()?);
                }
                Outcome::MovedObject(ids)
            }
            tag => return Err(ScexpError::BadFile(format!("unknown outcome tag {tag}"))),
        };
        out.push(ScrcEntry { start, seq: ActionSequence { actions, dt }, order2, obs1, obs2, gt });
    }
    Ok(out)
}
