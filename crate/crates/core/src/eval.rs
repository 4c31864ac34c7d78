//! Metrics and the fixed test harnesses: mask IoU, balanced SC-experiment
//! test sets drawn from a room's curated start regions, per-class outcome
//! accuracy reports, and the constructed translation pairs that expose the
//! two-blob artifact of plain frame differencing.
//!
//! Test tuples are labeled by the simulator itself, so the harness can
//! demand exact closure from an oracle predictor: every kept tuple's
//! ground-truth masks are unambiguous (empty, full, or a single in-view
//! blob whose positive fraction sits strictly between the decision cut
//! points). Candidates that fail that bar are rejected and counted, never
//! silently kept.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geom::{Pose, Vec2};
use crate::layouts::{Curated, Region};
use crate::maskpred::Tensor;
use crate::render::{gt_masks, render, Camera, Mask, Observation, RenderError};
use crate::scexp::{
    reverse_permutation, run_experiment, sample_sequence, Outcome, SCRecord, ScexpError,
    SeqConfig,
};
use crate::scod::{
    classify, extract_detection, largest_component, MaskPredictor, OutcomeKind,
    OutcomeThresholds, ScodError, BINARIZE_AT,
};
use crate::world::{
    agent_placement_blocked, normalize_angle_q, object_placement_blocked, quantize, World,
};

/// Attempts per requested tuple before the harness gives up.
const TUPLE_ATTEMPTS: usize = 600;
/// Attempts to find one collision-free start inside a region.
const START_ATTEMPTS: usize = 120;
/// Required clearance for sampled starts (meters).
const START_MARGIN: f64 = 0.02;
/// Heading jitter around "facing the object" for push starts (radians).
const PUSH_HEADING_JITTER: f64 = 0.3;
/// Translation range for constructed single-object moves (meters); the low
/// end clears a typical object silhouette so old and new never overlap.
const CONSTRUCTED_TRANSLATION: (f64, f64) = (0.25, 0.60);
/// Minimum visible pixels for an object picked in constructed pairs.
const CONSTRUCTED_MIN_PIXELS: usize = 20;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("mask dimensions differ: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("test-set construction failed: {0}")]
    PlacementFailure(String),
    #[error(transparent)]
    Experiment(#[from] ScexpError),
    #[error(transparent)]
    Inference(#[from] ScodError),
    #[error(transparent)]
    Render(#[from] RenderError),
}

/// Intersection over union of two binary masks. Two empty masks score 1.0:
/// predicting "nothing moved" when nothing moved is exactly right.
pub fn iou(a: &Mask, b: &Mask) -> Result<f64, EvalError> {
    if (a.width, a.height) != (b.width, b.height) {
        return Err(EvalError::DimensionMismatch(a.width, a.height, b.width, b.height));
    }
    let mut inter = 0u64;
    let mut union = 0u64;
    for (&x, &y) in a.bits.iter().zip(&b.bits) {
        inter += u64::from(x != 0 && y != 0);
        union += u64::from(x != 0 || y != 0);
    }
    Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
}

/// A labeled set of SC-experiments, balanced across the three outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct TestSet {
    pub records: Vec<SCRecord>,
    pub cam: Camera,
    /// MovedObject candidates dropped because their ground-truth masks were
    /// threshold-marginal (out of the decision band) or multi-component.
    pub marginal_rejected: u32,
}

/// Per-class split of a requested size: remainder pixels go to Identical
/// then Different, so 50 becomes 17/17/16 and multiples of 3 split evenly.
fn class_split(count: usize) -> [usize; 3] {
    let base = count / 3;
    let rem = count % 3;
    [base + usize::from(rem > 0), base + usize::from(rem > 1), base]
}

fn sample_in_region(
    world: &World,
    region: &Region,
    zero_joints: bool,
    rng: &mut ChaCha8Rng,
) -> Option<crate::world::WorldState> {
    let spec = world.spec();
    for _ in 0..START_ATTEMPTS {
        let mut state = world.snapshot();
        state.agent.base.position.x = quantize(rng.gen_range(region.x.0..region.x.1));
        state.agent.base.position.y = quantize(rng.gen_range(region.y.0..region.y.1));
        state.agent.base.heading =
            normalize_angle_q(quantize(rng.gen_range(region.heading.0..region.heading.1)));
        for j in 0..state.agent.joints.len() {
            state.agent.joints[j] = if zero_joints {
                0.0
            } else {
                let (lo, hi) = state.agent.joint_limits[j];
                quantize(rng.gen_range(lo..hi))
            };
        }
        if !agent_placement_blocked(&state, spec, START_MARGIN) {
            return Some(state);
        }
    }
    None
}

/// A start pose an arm's sweep away from a curated push target, facing it.
fn sample_push_start(
    world: &World,
    curated: &Curated,
    rng: &mut ChaCha8Rng,
) -> Option<crate::world::WorldState> {
    let spec = world.spec();
    for _ in 0..START_ATTEMPTS {
        let id = curated.push_targets[rng.gen_range(0..curated.push_targets.len())];
        let target = spec.movable(id).expect("curated push target exists").pose.position;
        let approach = rng.gen_range(-PI..PI);
        let dist = rng.gen_range(curated.push_distance.0..curated.push_distance.1);
        let jitter = rng.gen_range(-PUSH_HEADING_JITTER..PUSH_HEADING_JITTER);
        let mut state = world.snapshot();
        state.agent.base.position.x = quantize(target.x + approach.cos() * dist);
        state.agent.base.position.y = quantize(target.y + approach.sin() * dist);
        state.agent.base.heading = normalize_angle_q(quantize(approach + PI + jitter));
        state.agent.joints = vec![0.0; state.agent.joints.len()];
        if !agent_placement_blocked(&state, spec, START_MARGIN) {
            return Some(state);
        }
    }
    None
}

/// Is this ground-truth moved-object tuple unambiguous enough to keep?
/// Both masks must be a single connected blob whose positive fraction sits
/// strictly inside the decision band.
fn moved_masks_clean(record: &SCRecord, thresholds: &OutcomeThresholds) -> bool {
    let Outcome::MovedObject(ids) = &record.gt else {
        return false;
    };
    let ids: Vec<u32> = ids.iter().copied().collect();
    let Ok((m1, m2)) = gt_masks(&record.obs1, &record.obs2, &ids) else {
        return false;
    };
    [m1, m2].iter().all(|m| {
        let f = m.bits.iter().filter(|&&b| b != 0).count() as f64 / m.bits.len() as f64;
        thresholds.low < f && f < thresholds.high && extract_detection(m).len() == 1
    })
}

/// Build one balanced, simulator-labeled test set from a room's curated
/// start regions. Free starts use random joints, slot and push starts keep
/// the arm straight; every candidate experiment is kept only if its
/// ground-truth class matches the slot being filled (and, for moved
/// objects, its masks are clean).
pub fn build_test_set(
    world: &World,
    curated: &Curated,
    cam: &Camera,
    count: usize,
    thresholds: &OutcomeThresholds,
    seq_cfg: &SeqConfig,
    seed: u64,
) -> Result<TestSet, EvalError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let wanted = class_split(count);
    let classes = [OutcomeKind::Identical, OutcomeKind::Different, OutcomeKind::MovedObject];
    let mut records = Vec::with_capacity(count);
    let mut marginal_rejected = 0u32;
    for (class, &need) in classes.iter().zip(&wanted) {
        let mut have = 0usize;
        let mut attempts = 0usize;
        while have < need {
            attempts += 1;
            if attempts > TUPLE_ATTEMPTS * need {
                return Err(EvalError::PlacementFailure(format!(
                    "only {have} of {need} {class} tuples after {attempts} attempts"
                )));
            }
            let start = match class {
                OutcomeKind::Identical => sample_in_region(world, &curated.free, false, &mut rng),
                OutcomeKind::Different => sample_in_region(world, &curated.wall, true, &mut rng),
                OutcomeKind::MovedObject => sample_push_start(world, curated, &mut rng),
            };
            let Some(start) = start else { continue };
            let seq = sample_sequence(rng.gen::<u64>(), seq_cfg)?;
            let order2 = reverse_permutation(seq.actions.len());
            let record = run_experiment(world, &start, &seq, &order2, cam)?;
            if OutcomeKind::of(&record.gt) != *class {
                continue;
            }
            if *class == OutcomeKind::MovedObject && !moved_masks_clean(&record, thresholds) {
                marginal_rejected += 1;
                continue;
            }
            records.push(record);
            have += 1;
        }
    }
    Ok(TestSet { records, cam: *cam, marginal_rejected })
}

/// The two standard sets: 50 tuples in the training room at fov 45, and 150
/// in the held-out room (different furniture, disjoint object shapes) at
/// fov 90.
pub fn build_test_sets(
    train: (&World, &Curated),
    gen: (&World, &Curated),
    thresholds: &OutcomeThresholds,
    seq_cfg: &SeqConfig,
    seed: u64,
) -> Result<(TestSet, TestSet), EvalError> {
    let in_dist = build_test_set(
        train.0,
        train.1,
        &Camera::new(45.0, 64, 64),
        50,
        thresholds,
        seq_cfg,
        seed,
    )?;
    let gen_set = build_test_set(
        gen.0,
        gen.1,
        &Camera::new(90.0, 64, 64),
        150,
        thresholds,
        seq_cfg,
        seed ^ 0x9e3779b97f4a7c15,
    )?;
    Ok((in_dist, gen_set))
}

/// Accuracy tally for one outcome class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ClassStats {
    pub total: u32,
    pub correct: u32,
}

impl ClassStats {
    pub fn accuracy(&self) -> Option<f64> {
        (self.total > 0).then(|| f64::from(self.correct) / f64::from(self.total))
    }
}

/// Scores for one predictor over one test set.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub predictor: String,
    pub thresholds: OutcomeThresholds,
    pub identical: ClassStats,
    pub different: ClassStats,
    pub moved: ClassStats,
    /// Mean over ground-truth MovedObject tuples of the largest-component
    /// prediction's IoU against the ground-truth mask (both frames
    /// averaged); `None` when the set has no such tuples.
    pub mean_iou: Option<f64>,
}

impl EvalReport {
    pub fn class(&self, kind: OutcomeKind) -> &ClassStats {
        match kind {
            OutcomeKind::Identical => &self.identical,
            OutcomeKind::Different => &self.different,
            OutcomeKind::MovedObject => &self.moved,
        }
    }

    pub fn total(&self) -> u32 {
        self.identical.total + self.different.total + self.moved.total
    }

    /// One `metric,value` pair per line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,value\n");
        writeln!(out, "predictor,{}", self.predictor).unwrap();
        writeln!(out, "low,{}", self.thresholds.low).unwrap();
        writeln!(out, "high,{}", self.thresholds.high).unwrap();
        for (name, stats) in [
            ("identical", &self.identical),
            ("different", &self.different),
            ("moved_object", &self.moved),
        ] {
            writeln!(out, "{name}_total,{}", stats.total).unwrap();
            writeln!(out, "{name}_correct,{}", stats.correct).unwrap();
            match stats.accuracy() {
                Some(a) => writeln!(out, "{name}_accuracy,{a:.6}").unwrap(),
                None => writeln!(out, "{name}_accuracy,").unwrap(),
            }
        }
        match self.mean_iou {
            Some(v) => writeln!(out, "mean_iou,{v:.6}").unwrap(),
            None => writeln!(out, "mean_iou,").unwrap(),
        }
        out
    }

    /// Human-readable table.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "predictor: {} (low={}, high={})\n{:<14}{:>6}{:>9}{:>10}\n",
            self.predictor, self.thresholds.low, self.thresholds.high,
            "outcome", "n", "correct", "accuracy",
        );
        for (name, stats) in [
            ("identical", &self.identical),
            ("different", &self.different),
            ("moved-object", &self.moved),
        ] {
            let acc = stats
                .accuracy()
                .map_or_else(|| "-".into(), |a| format!("{a:.3}"));
            writeln!(out, "{name:<14}{:>6}{:>9}{acc:>10}", stats.total, stats.correct).unwrap();
        }
        match self.mean_iou {
            Some(v) => writeln!(out, "mean IoU over moved-object tuples: {v:.3}").unwrap(),
            None => writeln!(out, "mean IoU over moved-object tuples: -").unwrap(),
        }
        out
    }
}

/// Binarized prediction mask.
fn prob_mask(probs: &Tensor) -> Mask {
    Mask {
        width: probs.shape[1],
        height: probs.shape[0],
        bits: probs.data.iter().map(|&p| u8::from(p > BINARIZE_AT)).collect(),
    }
}

/// Score a predictor over a test set: per-class outcome accuracy, plus mask
/// IoU on the ground-truth moved-object tuples (largest predicted component
/// against the ground-truth mask, both frames averaged).
pub fn evaluate(
    predictor: &dyn MaskPredictor,
    set: &TestSet,
    thresholds: &OutcomeThresholds,
) -> Result<EvalReport, EvalError> {
    let mut report = EvalReport {
        predictor: predictor.name().to_string(),
        thresholds: *thresholds,
        identical: ClassStats::default(),
        different: ClassStats::default(),
        moved: ClassStats::default(),
        mean_iou: None,
    };
    let mut iou_sum = 0.0;
    let mut iou_n = 0u32;
    for record in &set.records {
        let (p1, p2) = predictor.predict(record)?;
        let predicted = classify(&p1, &p2, thresholds, BINARIZE_AT)?;
        let gt_kind = OutcomeKind::of(&record.gt);
        let stats = match gt_kind {
            OutcomeKind::Identical => &mut report.identical,
            OutcomeKind::Different => &mut report.different,
            OutcomeKind::MovedObject => &mut report.moved,
        };
        stats.total += 1;
        stats.correct += u32::from(predicted == gt_kind);
        if let Outcome::MovedObject(ids) = &record.gt {
            let ids: Vec<u32> = ids.iter().copied().collect();
            let (gt1, gt2) = gt_masks(&record.obs1, &record.obs2, &ids)?;
            let i1 = iou(&largest_component(&prob_mask(&p1)), &gt1)?;
            let i2 = iou(&largest_component(&prob_mask(&p2)), &gt2)?;
            iou_sum += 0.5 * (i1 + i2);
            iou_n += 1;
        }
    }
    if iou_n > 0 {
        report.mean_iou = Some(iou_sum / f64::from(iou_n));
    }
    Ok(report)
}

/// One constructed single-object translation: the same standing agent views
/// the world before and after one object is teleported sideways, far enough
/// that the silhouettes do not touch on screen.
#[derive(Debug, Clone, PartialEq)]
pub struct TranslationPair {
    pub obs1: Observation,
    pub obs2: Observation,
    pub gt1: Mask,
    pub gt2: Mask,
}

/// Chebyshev-dilate `a` by one pixel and test overlap with `b`: true when
/// the masks touch or abut (8-adjacency), which would merge their blobs.
fn masks_touch(a: &Mask, b: &Mask) -> bool {
    let (w, h) = (a.width as isize, a.height as isize);
    for y in 0..h {
        for x in 0..w {
            if a.bits[(y * w + x) as usize] == 0 {
                continue;
            }
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx >= 0 && ny >= 0 && nx < w && ny < h
                        && b.bits[(ny * w + nx) as usize] != 0
                    {
                        return true;
                    }
                }
            }
        }
    }
    false
}

/// Build `count` constructed translation pairs. Each keeps ground-truth
/// masks that are one connected blob per frame, on-screen, and separated,
/// so any extra structure in a differencing baseline's output is the
/// baseline's own artifact.
pub fn constructed_translation_pairs(
    world: &World,
    cam: &Camera,
    count: usize,
    seed: u64,
) -> Result<Vec<TranslationPair>, EvalError> {
    let spec = world.spec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::with_capacity(count);
    let mut attempts = 0usize;
    while pairs.len() < count {
        attempts += 1;
        if attempts > TUPLE_ATTEMPTS * count {
            return Err(EvalError::PlacementFailure(format!(
                "built {} of {count} translation pairs after {attempts} attempts",
                pairs.len()
            )));
        }
        // A fresh standing viewpoint anywhere in the room.
        let region = Region {
            x: (spec.bounds.min.x + 0.5, spec.bounds.max.x - 0.5),
            y: (spec.bounds.min.y + 0.5, spec.bounds.max.y - 0.5),
            heading: (-PI, PI),
        };
        let Some(state) = sample_in_region(world, &region, false, &mut rng) else {
            continue;
        };
        let obs1 = render(&state, spec, cam);
        // Pick a clearly visible object and slide it.
        let visible: Vec<u32> = spec
            .movables
            .iter()
            .map(|m| m.id)
            .filter(|&id| {
                obs1.ids.iter().filter(|&&p| u32::from(p) == id).count() >= CONSTRUCTED_MIN_PIXELS
            })
            .collect();
        if visible.is_empty() {
            continue;
        }
        let id = visible[rng.gen_range(0..visible.len())];
        let dir = rng.gen_range(-PI..PI);
        let dist = rng.gen_range(CONSTRUCTED_TRANSLATION.0..CONSTRUCTED_TRANSLATION.1);
        let old_pose = state.movable_poses[&id];
        let new_pose = Pose {
            position: Vec2::new(
                quantize(old_pose.position.x + dir.cos() * dist),
                quantize(old_pose.position.y + dir.sin() * dist),
            ),
            heading: old_pose.heading,
        };
        if object_placement_blocked(&state, spec, id, &new_pose, 0.01) {
            continue;
        }
        let mut moved = state.clone();
        moved.movable_poses.insert(id, new_pose);
        let obs2 = render(&moved, spec, cam);
        let (gt1, gt2) = gt_masks(&obs1, &obs2, &[id])?;
        let one_blob = |m: &Mask| extract_detection(m).len() == 1;
        if !(one_blob(&gt1) && one_blob(&gt2)) || masks_touch(&gt1, &gt2) {
            continue;
        }
        pairs.push(TranslationPair { obs1, obs2, gt1, gt2 });
    }
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layouts::{loft, loft_curated, studio, studio_curated};
    use crate::maskpred::naive_subtract;
    use crate::scod::OraclePredictor;

    fn random_mask(rng: &mut ChaCha8Rng, w: usize, h: usize, density: f64) -> Mask {
        Mask {
            width: w,
            height: h,
            bits: (0..w * h).map(|_| u8::from(rng.gen::<f64>() < density)).collect(),
        }
    }

    #[test]
    fn iou_basics() {
        let mut a = Mask::zeros(8, 8);
        a.bits[3] = 1;
        a.bits[9] = 1;
        assert_eq!(iou(&a, &a).unwrap(), 1.0);
        let mut b = Mask::zeros(8, 8);
        b.bits[20] = 1;
        assert_eq!(iou(&a, &b).unwrap(), 0.0);
        assert_eq!(iou(&Mask::zeros(8, 8), &Mask::zeros(8, 8)).unwrap(), 1.0);
        assert!(matches!(
            iou(&a, &Mask::zeros(4, 4)),
            Err(EvalError::DimensionMismatch(..))
        ));
    }

    /// The hand-rolled counting loop must agree exactly with a set-based
    /// oracle on a thousand random pairs, and be symmetric.
    #[test]
    fn iou_matches_set_oracle_on_1000_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..1000 {
            let a = random_mask(&mut rng, 16, 16, 0.3);
            let b = random_mask(&mut rng, 16, 16, 0.3);
            let sa: std::collections::BTreeSet<usize> =
                (0..256).filter(|&i| a.bits[i] != 0).collect();
            let sb: std::collections::BTreeSet<usize> =
                (0..256).filter(|&i| b.bits[i] != 0).collect();
            let union = sa.union(&sb).count();
            let want = if union == 0 {
                1.0
            } else {
                sa.intersection(&sb).count() as f64 / union as f64
            };
            let got = iou(&a, &b).unwrap();
            assert_eq!(got, want);
            assert_eq!(got, iou(&b, &a).unwrap());
        }
    }

    #[test]
    fn iou_never_drops_when_adding_true_positives() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let gt = random_mask(&mut rng, 12, 12, 0.4);
        let mut pred = Mask::zeros(12, 12);
        let mut last = iou(&pred, &gt).unwrap();
        for i in 0..gt.bits.len() {
            if gt.bits[i] != 0 {
                pred.bits[i] = 1;
                let now = iou(&pred, &gt).unwrap();
                assert!(now >= last);
                last = now;
            }
        }
        assert_eq!(last, 1.0);
    }

    #[test]
    fn class_split_matches_documented_shares() {
        assert_eq!(class_split(50), [17, 17, 16]);
        assert_eq!(class_split(150), [50, 50, 50]);
        assert_eq!(class_split(12), [4, 4, 4]);
    }

    /// A small balanced set: classes come out as requested, labels are the
    /// simulator's, construction is deterministic, and the oracle scores
    /// perfectly on it.
    #[test]
    fn small_studio_set_is_balanced_and_oracle_scores_perfectly() {
        let world = studio().unwrap();
        let curated = studio_curated();
        let cam = Camera::new(45.0, 48, 48);
        let thresholds = OutcomeThresholds::default();
        let seq_cfg = SeqConfig::default();
        let set =
            build_test_set(&world, &curated, &cam, 12, &thresholds, &seq_cfg, 5).unwrap();
        assert_eq!(set.records.len(), 12);
        let of = |k: OutcomeKind| {
            set.records.iter().filter(|r| OutcomeKind::of(&r.gt) == k).count()
        };
        assert_eq!(of(OutcomeKind::Identical), 4);
        assert_eq!(of(OutcomeKind::Different), 4);
        assert_eq!(of(OutcomeKind::MovedObject), 4);

        let again =
            build_test_set(&world, &curated, &cam, 12, &thresholds, &seq_cfg, 5).unwrap();
        assert_eq!(set, again);

        let report = evaluate(&OraclePredictor, &set, &thresholds).unwrap();
        assert_eq!(report.total(), 12);
        assert_eq!(report.identical.accuracy(), Some(1.0));
        assert_eq!(report.different.accuracy(), Some(1.0));
        assert_eq!(report.moved.accuracy(), Some(1.0));
        assert_eq!(report.mean_iou, Some(1.0));
    }

    #[test]
    fn loft_set_works_at_fov_90() {
        let world = loft().unwrap();
        let curated = loft_curated();
        let cam = Camera::new(90.0, 48, 48);
        let set = build_test_set(
            &world,
            &curated,
            &cam,
            6,
            &OutcomeThresholds::default(),
            &SeqConfig::default(),
            9,
        )
        .unwrap();
        assert_eq!(set.records.len(), 6);
        let report = evaluate(&OraclePredictor, &set, &OutcomeThresholds::default()).unwrap();
        assert_eq!(report.total(), 6);
        assert_eq!(report.identical.accuracy(), Some(1.0));
        assert_eq!(report.different.accuracy(), Some(1.0));
        assert_eq!(report.moved.accuracy(), Some(1.0));
    }

    /// Spec'd degenerate predictor: all-zero masks look like "identical"
    /// everywhere, so they ace the Identical class and fail Different.
    struct ZeroPredictor;
    impl MaskPredictor for ZeroPredictor {
        fn predict(&self, record: &SCRecord) -> Result<(Tensor, Tensor), ScodError> {
            let shape = vec![record.obs1.height, record.obs1.width];
            Ok((Tensor::zeros(shape.clone()), Tensor::zeros(shape)))
        }
        fn name(&self) -> &'static str {
            "zero"
        }
    }

    #[test]
    fn zero_predictor_accuracy_pattern_and_report_accounting() {
        let world = studio().unwrap();
        let set = build_test_set(
            &world,
            &studio_curated(),
            &Camera::new(45.0, 32, 32),
            9,
            &OutcomeThresholds::default(),
            &SeqConfig::default(),
            2,
        )
        .unwrap();
        let report = evaluate(&ZeroPredictor, &set, &OutcomeThresholds::default()).unwrap();
        assert_eq!(report.identical.accuracy(), Some(1.0));
        assert_eq!(report.different.accuracy(), Some(0.0));
        assert_eq!(report.moved.accuracy(), Some(0.0));
        assert_eq!(report.mean_iou, Some(0.0));
        assert_eq!(report.total(), 9);

        let csv = report.to_csv();
        assert!(csv.contains("identical_accuracy,1.000000"));
        assert!(csv.contains("different_accuracy,0.000000"));
        assert!(csv.lines().count() >= 13);
        let text = report.to_text();
        assert!(text.contains("identical"));
        assert!(text.contains("mean IoU"));
    }

    /// The constructed pairs carry one clean blob per frame, and plain
    /// differencing splits almost every pair into two blobs (the object's
    /// old and new silhouettes).
    #[test]
    fn constructed_pairs_expose_the_two_blob_artifact() {
        let world = studio().unwrap();
        let cam = Camera::new(45.0, 64, 64);
        let pairs = constructed_translation_pairs(&world, &cam, 10, 8).unwrap();
        assert_eq!(pairs.len(), 10);
        assert_eq!(pairs, constructed_translation_pairs(&world, &cam, 10, 8).unwrap());
        let mut two_blob = 0;
        for p in &pairs {
            assert_eq!(extract_detection(&p.gt1).len(), 1);
            assert_eq!(extract_detection(&p.gt2).len(), 1);
            assert!(!masks_touch(&p.gt1, &p.gt2));
            let (n1, n2) = naive_subtract(&p.obs1, &p.obs2, 12).unwrap();
            assert_eq!(n1, n2, "differencing cannot tell the frames apart");
            if extract_detection(&n1).len() == 2 {
                two_blob += 1;
            }
        }
        assert!(two_blob >= 8, "only {two_blob} of 10 pairs split into two blobs");
    }
}
