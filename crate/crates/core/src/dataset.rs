//! Procedural training data for the mask predictor.
//!
//! Three scenarios, mirroring what SC-experiments produce at inference time:
//!
//! * **NoDifference** — one placement rendered twice; target masks all zeros.
//! * **CompletelyDifferent** — two agent states rendered in the same room;
//!   target masks all ones however small the visible difference. A third of
//!   the pairs re-pose the arm, a third nudge the base (the residue of
//!   order-dependent collisions), a third teleport to an independent
//!   placement, so coverage runs from a handful of changed pixels to a
//!   wholly different view.
//! * **MovedObjects** — same placement, a few movable objects perturbed;
//!   targets are the objects' silhouettes in each view.
//!
//! Generation is deterministic: tuple `i` of a dataset uses an independent
//! RNG stream derived from `(seed, i)`, so any prefix or single tuple can be
//! regenerated without replaying the rest.

use std::collections::BTreeSet;
use std::io::Write as _;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bytesio::{ByteReader, ByteWriter};
use crate::geom::Pose;
use crate::render::{
    gt_masks, pgm_bytes, pgm_parse, ppm_bytes, ppm_parse, render, Camera, Mask, Observation,
    RenderError,
};
use crate::world::file::{format_manifest, spec_fingerprint};
use crate::world::{
    agent_placement_blocked, normalize_angle_q, object_placement_blocked, quantize, World,
    WorldState,
};

/// Which generator produced a tuple.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    NoDifference,
    CompletelyDifferent,
    MovedObjects,
}

/// One training tuple: two observations and their target masks.
///
/// `moved_ids` is in-memory provenance for MovedObjects tuples (empty for
/// the other scenarios). It is not serialized, and neither are the
/// observations' id buffers: training data must not leak ground-truth ids.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskTuple {
    pub obs1: Observation,
    pub obs2: Observation,
    pub mask1: Mask,
    pub mask2: Mask,
    pub scenario: Scenario,
    pub moved_ids: Vec<u32>,
}

/// Requested tuple counts per scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScenarioCounts {
    pub no_difference: usize,
    pub completely_different: usize,
    pub moved_objects: usize,
}

impl ScenarioCounts {
    /// Split a total as evenly as possible, remainder to the earlier classes.
    pub fn balanced(total: usize) -> Self {
        let base = total / 3;
        let rem = total % 3;
        ScenarioCounts {
            no_difference: base + usize::from(rem > 0),
            completely_different: base + usize::from(rem > 1),
            moved_objects: base,
        }
    }

    pub fn total(&self) -> usize {
        self.no_difference + self.completely_different + self.moved_objects
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("placement failure: {0}")]
    PlacementFailure(String),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error("bad dataset file: {0}")]
    BadFile(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<crate::bytesio::Truncated> for DatasetError {
    fn from(e: crate::bytesio::Truncated) -> Self {
        DatasetError::BadFile(e.to_string())
    }
}

/// Attempts before a generator gives up on a world as unplaceable.
const PLACEMENT_RETRIES: usize = 200;
/// Attempts at one perturbation before the whole placement is retried.
const PERTURB_RETRIES: usize = 40;
/// Attempts at a perturbed different pair before falling back to teleport.
const PAIR_RETRIES: usize = 60;
/// Required clearance for sampled placements (meters).
const PLACEMENT_MARGIN: f64 = 0.02;
/// Minimum pixels an object needs in view to be picked for perturbation.
const MIN_OBJECT_PIXELS: usize = 16;
/// Perturbation translation range (meters).
pub const PERTURB_TRANSLATION: (f64, f64) = (0.02, 0.20);
/// Perturbation rotation limit (radians, symmetric).
pub const PERTURB_ROTATION: f64 = std::f64::consts::FRAC_PI_4;
/// Base-nudge translation range for different pairs (meters).
pub const NUDGE_TRANSLATION: (f64, f64) = (0.02, 0.30);
/// Base-nudge rotation limit for different pairs (radians, symmetric).
pub const NUDGE_ROTATION: f64 = 0.5;
/// Joint delta for subtly re-posed arm pairs (radians, symmetric).
pub const ARM_DELTA: f64 = 0.5;

/// Sample a collision-free agent placement: base position and heading
/// uniform over the room, joints uniform within their limits, movables at
/// their spec poses. Quantized like every world state.
fn sample_agent_state(
    world: &World,
    rng: &mut ChaCha8Rng,
) -> Result<WorldState, DatasetError> {
    let spec = world.spec();
    let b = &spec.bounds;
    let r = spec.initial_agent.base_radius + PLACEMENT_MARGIN;
    for _ in 0..PLACEMENT_RETRIES {
        let mut state = world.snapshot();
        state.agent.base.position.x = quantize(rng.gen_range(b.min.x + r..b.max.x - r));
        state.agent.base.position.y = quantize(rng.gen_range(b.min.y + r..b.max.y - r));
        state.agent.base.heading =
            normalize_angle_q(rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI));
        for (j, (lo, hi)) in state.agent.joint_limits.clone().iter().enumerate() {
            state.agent.joints[j] = quantize(rng.gen_range(*lo..*hi));
        }
        if !agent_placement_blocked(&state, spec, PLACEMENT_MARGIN) {
            return Ok(state);
        }
    }
    Err(DatasetError::PlacementFailure(format!(
        "no collision-free agent placement in {PLACEMENT_RETRIES} attempts"
    )))
}

/// Re-sample only the arm joints of `state`, keeping the base put.
fn resample_joints(
    state: &WorldState,
    world: &World,
    rng: &mut ChaCha8Rng,
) -> Option<WorldState> {
    for _ in 0..PERTURB_RETRIES {
        let mut next = state.clone();
        for (j, (lo, hi)) in next.agent.joint_limits.clone().iter().enumerate() {
            next.agent.joints[j] = quantize(rng.gen_range(*lo..*hi));
        }
        if !agent_placement_blocked(&next, world.spec(), PLACEMENT_MARGIN) {
            return Some(next);
        }
    }
    None
}

/// Re-pose the arm near its current configuration: every joint shifted by
/// at most [`ARM_DELTA`] and clamped to its limits.
fn perturb_joints(
    state: &WorldState,
    world: &World,
    rng: &mut ChaCha8Rng,
) -> Option<WorldState> {
    for _ in 0..PERTURB_RETRIES {
        let mut next = state.clone();
        for (j, (lo, hi)) in next.agent.joint_limits.clone().iter().enumerate() {
            let shifted = state.agent.joints[j] + rng.gen_range(-ARM_DELTA..=ARM_DELTA);
            next.agent.joints[j] = quantize(shifted.clamp(*lo, *hi));
        }
        if !agent_placement_blocked(&next, world.spec(), PLACEMENT_MARGIN) {
            return Some(next);
        }
    }
    None
}

/// Shift the base a short way and turn it a little, keeping the joints.
fn nudge_base(
    state: &WorldState,
    world: &World,
    rng: &mut ChaCha8Rng,
) -> Option<WorldState> {
    for _ in 0..PERTURB_RETRIES {
        let mut next = state.clone();
        let dir = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
        let dist = rng.gen_range(NUDGE_TRANSLATION.0..=NUDGE_TRANSLATION.1);
        next.agent.base.position.x = quantize(state.agent.base.position.x + dist * dir.cos());
        next.agent.base.position.y = quantize(state.agent.base.position.y + dist * dir.sin());
        next.agent.base.heading = normalize_angle_q(
            state.agent.base.heading + rng.gen_range(-NUDGE_ROTATION..=NUDGE_ROTATION),
        );
        if !agent_placement_blocked(&next, world.spec(), PLACEMENT_MARGIN) {
            return Some(next);
        }
    }
    None
}

/// Same view twice; nothing moved, so the targets are all zeros.
pub fn gen_no_difference(
    world: &World,
    cam: &Camera,
    rng: &mut ChaCha8Rng,
) -> Result<MaskTuple, DatasetError> {
    let state = sample_agent_state(world, rng)?;
    let obs = render(&state, world.spec(), cam);
    Ok(MaskTuple {
        obs1: obs.clone(),
        obs2: obs,
        mask1: Mask::zeros(cam.width, cam.height),
        mask2: Mask::zeros(cam.width, cam.height),
        scenario: Scenario::NoDifference,
        moved_ids: vec![],
    })
}

/// Two views of the same world whose agent states differ; the targets are
/// all ones.
///
/// The pairs mirror the ways a non-commuting order pair leaves the agent: a
/// third re-pose the arm (subtly or wholesale — a blocked experiment changes
/// nothing but the arm, and the predictor must still answer "everything"),
/// a third nudge the base the way order-dependent collisions do, and a
/// third teleport to an independent placement. Any visible difference
/// qualifies, down to a handful of pixels; only pairs that render
/// identically are rejected, because invisible change is unlearnable.
pub fn gen_completely_different(
    world: &World,
    cam: &Camera,
    rng: &mut ChaCha8Rng,
) -> Result<MaskTuple, DatasetError> {
    let mode = rng.gen_range(0..3u8);
    let state1 = sample_agent_state(world, rng)?;
    let obs1 = render(&state1, world.spec(), cam);

    if mode < 2 {
        for _ in 0..PAIR_RETRIES {
            let state2 = match mode {
                0 if rng.gen_bool(0.5) => resample_joints(&state1, world, rng),
                0 => perturb_joints(&state1, world, rng),
                _ => nudge_base(&state1, world, rng),
            };
            let Some(state2) = state2 else { break };
            let obs2 = render(&state2, world.spec(), cam);
            if obs1.rgb != obs2.rgb {
                return Ok(different_tuple(cam, obs1, obs2));
            }
        }
    }
    // Teleport mode, and the fallback when perturbation keeps rendering
    // identically (an out-of-view arm, a fully clamped pose).
    for _ in 0..PLACEMENT_RETRIES {
        let state2 = sample_agent_state(world, rng)?;
        let obs2 = render(&state2, world.spec(), cam);
        if obs1.rgb != obs2.rgb {
            return Ok(different_tuple(cam, obs1, obs2));
        }
    }
    Err(DatasetError::PlacementFailure(
        "no visibly distinct placement pair".into(),
    ))
}

fn different_tuple(cam: &Camera, obs1: Observation, obs2: Observation) -> MaskTuple {
    MaskTuple {
        obs1,
        obs2,
        mask1: Mask::ones(cam.width, cam.height),
        mask2: Mask::ones(cam.width, cam.height),
        scenario: Scenario::CompletelyDifferent,
        moved_ids: vec![],
    }
}

/// Same placement, `1..=k_max` visible movables perturbed in place; targets
/// are the moved objects' silhouettes in each view.
pub fn gen_moved_objects(
    world: &World,
    cam: &Camera,
    rng: &mut ChaCha8Rng,
    k_max: usize,
) -> Result<MaskTuple, DatasetError> {
    let spec = world.spec();
    if spec.movables.is_empty() {
        return Err(DatasetError::PlacementFailure(
            "world has no movable objects".into(),
        ));
    }
    let k_max = k_max.max(1);

    'attempt: for _ in 0..PLACEMENT_RETRIES {
        let state1 = sample_agent_state(world, rng)?;
        let obs1 = render(&state1, spec, cam);

        // Objects prominent enough in the first view to be worth moving.
        let mut pixels_per_id = std::collections::BTreeMap::new();
        for id in &obs1.ids {
            if *id != 0 {
                *pixels_per_id.entry(*id as u32).or_insert(0usize) += 1;
            }
        }
        let mut candidates: Vec<u32> = pixels_per_id
            .iter()
            .filter(|(_, px)| **px >= MIN_OBJECT_PIXELS)
            .map(|(id, _)| *id)
            .collect();
        if candidates.is_empty() {
            continue;
        }

        let k = rng.gen_range(1..=k_max.min(candidates.len()));
        // Partial Fisher-Yates: the first k entries become the moved set.
        for i in 0..k {
            let j = rng.gen_range(i..candidates.len());
            candidates.swap(i, j);
        }
        let moved: BTreeSet<u32> = candidates[..k].iter().copied().collect();

        let mut state2 = state1.clone();
        for id in &moved {
            let mut placed = false;
            for _ in 0..PERTURB_RETRIES {
                let pose = state2.movable_poses[id];
                let dir = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
                let dist = rng.gen_range(PERTURB_TRANSLATION.0..=PERTURB_TRANSLATION.1);
                let dtheta = rng.gen_range(-PERTURB_ROTATION..=PERTURB_ROTATION);
                let candidate = Pose {
                    position: crate::geom::Vec2::new(
                        quantize(pose.position.x + dist * dir.cos()),
                        quantize(pose.position.y + dist * dir.sin()),
                    ),
                    heading: normalize_angle_q(pose.heading + dtheta),
                };
                if !object_placement_blocked(&state2, spec, *id, &candidate, 0.01) {
                    state2.movable_poses.insert(*id, candidate);
                    placed = true;
                    break;
                }
            }
            if !placed {
                continue 'attempt;
            }
        }

        let obs2 = render(&state2, spec, cam);
        // Every moved object must stay in view, and the perturbation must
        // actually show: a sub-pixel far-field nudge would pair identical
        // images with nonzero targets and teach the predictor to hallucinate.
        let visible2 = obs2.visible_ids();
        if !moved.iter().all(|id| visible2.contains(&(*id as u16))) {
            continue;
        }
        if obs1.rgb == obs2.rgb {
            continue;
        }
        let moved_vec: Vec<u32> = moved.iter().copied().collect();
        let (mask1, mask2) = gt_masks(&obs1, &obs2, &moved_vec)?;
        return Ok(MaskTuple {
            obs1,
            obs2,
            mask1,
            mask2,
            scenario: Scenario::MovedObjects,
            moved_ids: moved_vec,
        });
    }
    Err(DatasetError::PlacementFailure(format!(
        "no valid moved-objects tuple in {PLACEMENT_RETRIES} attempts"
    )))
}

/// RNG for tuple `index` of a dataset: same key, independent stream.
pub fn tuple_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Generate `counts` tuples in scenario order (NoDifference block first,
/// then CompletelyDifferent, then MovedObjects). Deterministic in (seed).
pub fn generate_tuples(
    world: &World,
    cam: &Camera,
    counts: &ScenarioCounts,
    k_max: usize,
    seed: u64,
) -> Result<Vec<MaskTuple>, DatasetError> {
    let mut tuples = Vec::with_capacity(counts.total());
    for index in 0..counts.total() {
        let mut rng = tuple_rng(seed, index as u64);
        let tuple = if index < counts.no_difference {
            gen_no_difference(world, cam, &mut rng)?
        } else if index < counts.no_difference + counts.completely_different {
            gen_completely_different(world, cam, &mut rng)?
        } else {
            gen_moved_objects(world, cam, &mut rng, k_max)?
        };
        tuples.push(tuple);
    }
    Ok(tuples)
}

// --- SCDS serialization ------------------------------------------------------

const SCDS_MAGIC: &[u8; 4] = b"SCDS";
const SCDS_VERSION: u8 = 1;

fn scenario_tag(s: Scenario) -> u8 {
    match s {
        Scenario::NoDifference => 0,
        Scenario::CompletelyDifferent => 1,
        Scenario::MovedObjects => 2,
    }
}

/// Serialize tuples (RGB + masks only; id buffers and provenance dropped).
pub fn dataset_bytes(tuples: &[MaskTuple], cam: &Camera) -> Vec<u8> {
    let mut w = ByteWriter::new();
    w.raw(SCDS_MAGIC);
    w.u8(SCDS_VERSION);
    w.f64(cam.fov_deg);
    w.u32(cam.width as u32);
    w.u32(cam.height as u32);
    w.f64(cam.eye_height_fraction);
    w.u32(tuples.len() as u32);
    for t in tuples {
        w.u8(scenario_tag(t.scenario));
        w.chunk(&ppm_bytes(&t.obs1));
        w.chunk(&ppm_bytes(&t.obs2));
        w.chunk(&pgm_bytes(&t.mask1));
        w.chunk(&pgm_bytes(&t.mask2));
    }
    w.buf
}

/// Parse a dataset written by [`dataset_bytes`]. Observations come back
/// with zeroed id buffers and tuples with empty `moved_ids`; those fields
/// are deliberately not stored.
pub fn dataset_parse(bytes: &[u8]) -> Result<(Camera, Vec<MaskTuple>), DatasetError> {
    let mut r = ByteReader::new(bytes);
    if r.take(4)? != SCDS_MAGIC {
        return Err(DatasetError::BadFile("wrong magic".into()));
    }
    if r.u8()? != SCDS_VERSION {
        return Err(DatasetError::BadFile("unsupported version".into()));
    }
    let fov_deg = r.f64()?;
    let width = r.u32()? as usize;
    let height = r.u32()? as usize;
    let eye_height_fraction = r.f64()?;
    if !(fov_deg > 10.0 && fov_deg < 170.0)
        || !(8..=4096).contains(&width)
        || !(8..=4096).contains(&height)
        || !(0.0..=1.0).contains(&eye_height_fraction)
    {
        return Err(DatasetError::BadFile("implausible camera header".into()));
    }
    let cam = Camera { fov_deg, width, height, eye_height_fraction };
    let count = r.u32()? as usize;
    let mut tuples = Vec::with_capacity(count.min(1 << 20));
    for _ in 0..count {
        let scenario = match r.u8()? {
            0 => Scenario::NoDifference,
            1 => Scenario::CompletelyDifferent,
            2 => Scenario::MovedObjects,
            tag => return Err(DatasetError::BadFile(format!("unknown scenario tag {tag}"))),
        };
        let obs1 = ppm_parse(r.chunk()?)?;
        let obs2 = ppm_parse(r.chunk()?)?;
        let mask1 = pgm_parse(r.chunk()?)?;
        let mask2 = pgm_parse(r.chunk()?)?;
        for obs in [&obs1, &obs2] {
            if (obs.width, obs.height) != (cam.width, cam.height) {
                return Err(DatasetError::BadFile("tuple dimensions disagree with header".into()));
            }
        }
        for mask in [&mask1, &mask2] {
            if (mask.width, mask.height) != (cam.width, cam.height) {
                return Err(DatasetError::BadFile("tuple dimensions disagree with header".into()));
            }
        }
        tuples.push(MaskTuple { obs1, obs2, mask1, mask2, scenario, moved_ids: vec![] });
    }
    if !r.done() {
        return Err(DatasetError::BadFile("trailing bytes after last tuple".into()));
    }
    Ok((cam, tuples))
}

/// Generate a dataset, write it to `out_path` with a `.manifest` text file
/// beside it, and return the manifest text. Byte-reproducible from
/// (world spec, camera, counts, k_max, seed).
pub fn build_dataset(
    world: &World,
    cam: &Camera,
    counts: &ScenarioCounts,
    k_max: usize,
    seed: u64,
    out_path: &Path,
) -> Result<String, DatasetError> {
    let tuples = generate_tuples(world, cam, counts, k_max, seed)?;
    let bytes = dataset_bytes(&tuples, cam);
    let mut entries = std::collections::BTreeMap::new();
    entries.insert("format".into(), "SCDS v1".into());
    entries.insert("world".into(), world.spec().name.clone());
    entries.insert("world_fingerprint".into(), format!("{:016x}", spec_fingerprint(world.spec())));
    entries.insert("seed".into(), seed.to_string());
    entries.insert("k_max".into(), k_max.to_string());
    entries.insert("camera_fov_deg".into(), cam.fov_deg.to_string());
    entries.insert("camera_width".into(), cam.width.to_string());
    entries.insert("camera_height".into(), cam.height.to_string());
    entries.insert("count_no_difference".into(), counts.no_difference.to_string());
    entries.insert("count_completely_different".into(), counts.completely_different.to_string());
    entries.insert("count_moved_objects".into(), counts.moved_objects.to_string());
    entries.insert("count_total".into(), counts.total().to_string());
    let manifest = format_manifest(&entries);

    let mut f = std::fs::File::create(out_path)?;
    f.write_all(&bytes)?;
    std::fs::write(out_path.with_extension("manifest"), &manifest)?;
    Ok(manifest)
}
