//! Release gates for the assembled pipeline, one test per criterion.
//!
//! These run the system end to end — build the evaluation sets, train the
//! predictor on a full procedural dataset, sweep the commutation map — and
//! hold the results to fixed quality bars. The expensive artifacts (the
//! test sets and the trained parameters) are built once and shared across
//! tests through `OnceLock`, so the suite works the same under any test
//! ordering or thread count.

use std::sync::OnceLock;
use std::time::Instant;

use scod_core::dataset::{generate_tuples, dataset_bytes, ScenarioCounts};
use scod_core::eval::{build_test_sets, constructed_translation_pairs, evaluate, iou, EvalReport, TestSet};
use scod_core::layouts::{loft, loft_curated, studio, studio_curated};
use scod_core::maskpred::{
    backward, bce_loss, naive_subtract, params_bytes, train_tuples, tuple_tensors, Arch,
    ModelParams, Tensor, TrainConfig, BCE_EPSILON,
};
use scod_core::render::Mask;
use scod_core::scexp::{reverse_permutation, run_experiment, sample_sequence};
use scod_core::scod::{
    commutation_map, extract_detection, LearnedPredictor, NaivePredictor, OraclePredictor,
};
use scod_core::{Camera, GridConfig, OutcomeThresholds, SeqConfig, Vec2};

const EVAL_SEED: u64 = 3;
const DATASET_SEED: u64 = 7;
const MAP_SEED: u64 = 13;

fn thresholds() -> OutcomeThresholds {
    OutcomeThresholds::default()
}

fn eval_camera() -> Camera {
    Camera::new(45.0, 64, 64)
}

// --- shared fixtures ---------------------------------------------------------

struct Sets {
    in_dist: TestSet,
    gen: TestSet,
    build_secs: f64,
}

fn sets() -> &'static Sets {
    static CELL: OnceLock<Sets> = OnceLock::new();
    CELL.get_or_init(|| {
        let t0 = Instant::now();
        let studio = studio().unwrap();
        let loft = loft().unwrap();
        let (in_dist, gen) = build_test_sets(
            (&studio, &studio_curated()),
            (&loft, &loft_curated()),
            &thresholds(),
            &SeqConfig::default(),
            EVAL_SEED,
        )
        .expect("test-set construction");
        Sets { in_dist, gen, build_secs: t0.elapsed().as_secs_f64() }
    })
}

struct Trained {
    params: ModelParams,
    train_secs: f64,
}

fn train_config() -> TrainConfig {
    TrainConfig {
        epochs: 14,
        batch_size: 4,
        learning_rate: 3e-3,
        seed: DATASET_SEED,
        validation_fraction: 0.1,
        swap_augment: true,
    }
}

fn trained() -> &'static Trained {
    static CELL: OnceLock<Trained> = OnceLock::new();
    CELL.get_or_init(|| {
        let world = studio().unwrap();
        let cam = eval_camera();
        let counts = ScenarioCounts::balanced(4000);
        let tuples = generate_tuples(&world, &cam, &counts, 2, DATASET_SEED).unwrap();
        let t0 = Instant::now();
        let result = train_tuples(&tuples, &Arch::small(cam.width, cam.height), &train_config())
            .expect("training");
        Trained { params: result.params, train_secs: t0.elapsed().as_secs_f64() }
    })
}

fn learned_reports() -> &'static (EvalReport, EvalReport) {
    static CELL: OnceLock<(EvalReport, EvalReport)> = OnceLock::new();
    CELL.get_or_init(|| {
        let predictor = LearnedPredictor { params: trained().params.clone() };
        let s = sets();
        (
            evaluate(&predictor, &s.in_dist, &thresholds()).unwrap(),
            evaluate(&predictor, &s.gen, &thresholds()).unwrap(),
        )
    })
}

// --- criteria ----------------------------------------------------------------

/// Closing the loop over ground-truth masks must reproduce the simulator's
/// own labels: every outcome correct and every mask IoU exactly 1 on both
/// evaluation sets (threshold-marginal tuples are excluded and counted
/// during set construction), in under a minute.
#[test]
fn oracle_closure_is_exact_on_both_test_sets() {
    let t0 = Instant::now();
    let s = sets();
    assert_eq!(s.in_dist.records.len(), 50);
    assert_eq!(s.gen.records.len(), 150);
    for (label, set) in [("in-dist", &s.in_dist), ("generalization", &s.gen)] {
        let report = evaluate(&OraclePredictor, set, &thresholds()).unwrap();
        assert_eq!(report.identical.accuracy(), Some(1.0), "{label} identical");
        assert_eq!(report.different.accuracy(), Some(1.0), "{label} different");
        assert_eq!(report.moved.accuracy(), Some(1.0), "{label} moved-object");
        assert_eq!(report.mean_iou, Some(1.0), "{label} IoU");
    }
    let secs = s.build_secs + t0.elapsed().as_secs_f64();
    assert!(secs < 60.0, "oracle closure took {secs:.1} s");
    println!(
        "oracle closure exact on {}+{} tuples ({}+{} marginal excluded) in {secs:.1} s",
        s.in_dist.records.len(),
        s.gen.records.len(),
        s.in_dist.marginal_rejected,
        s.gen.marginal_rejected,
    );
}

/// The trained predictor must reach the in-distribution quality bar —
/// movable-mask IoU >= 0.80, Different accuracy >= 0.90, Identical
/// accuracy >= 0.95 — with training finishing within 30 CPU-minutes.
#[test]
fn learned_predictor_meets_in_distribution_targets() {
    let tr = trained();
    assert!(
        tr.train_secs < 1800.0,
        "training took {:.0} s, budget is 1800 s",
        tr.train_secs
    );
    let (in_dist, _) = learned_reports();
    let iou = in_dist.mean_iou.expect("in-dist set has moved tuples");
    let diff = in_dist.different.accuracy().unwrap();
    let ident = in_dist.identical.accuracy().unwrap();
    println!(
        "in-dist: IoU {iou:.3}, different {diff:.3}, identical {ident:.3}, trained in {:.0} s",
        tr.train_secs
    );
    assert!(iou >= 0.80, "movable IoU {iou:.3} < 0.80");
    assert!(diff >= 0.90, "Different accuracy {diff:.3} < 0.90");
    assert!(ident >= 0.95, "Identical accuracy {ident:.3} < 0.95");
}

/// On the held-out room (different furniture, twenty unseen object shapes,
/// a 90-degree lens), the movable IoU may degrade by at most 0.20 and the
/// Identical/Different accuracies must stay at or above 0.85.
#[test]
fn learned_predictor_generalizes_to_the_unseen_room() {
    let (in_dist, gen) = learned_reports();
    let iou_in = in_dist.mean_iou.unwrap();
    let iou_gen = gen.mean_iou.expect("generalization set has moved tuples");
    let ident = gen.identical.accuracy().unwrap();
    let diff = gen.different.accuracy().unwrap();
    println!(
        "generalization: IoU {iou_gen:.3} (in-dist {iou_in:.3}), identical {ident:.3}, different {diff:.3}"
    );
    assert!(
        iou_in - iou_gen <= 0.20,
        "IoU dropped {:.3} ({iou_in:.3} -> {iou_gen:.3})",
        iou_in - iou_gen
    );
    assert!(ident >= 0.85, "Identical accuracy {ident:.3} < 0.85");
    assert!(diff >= 0.85, "Different accuracy {diff:.3} < 0.85");
}

/// The learned predictor must beat thresholded frame differencing by a
/// clear margin on moved-object masks: the baseline cannot attribute a
/// change to the right frame, so its masks carry both silhouettes.
#[test]
fn learned_masks_beat_naive_subtraction() {
    let (in_dist, _) = learned_reports();
    let naive = evaluate(&NaivePredictor::default(), &sets().in_dist, &thresholds()).unwrap();
    let learned_iou = in_dist.mean_iou.unwrap();
    let naive_iou = naive.mean_iou.unwrap();
    println!("moved-object IoU: learned {learned_iou:.3} vs naive {naive_iou:.3}");
    assert!(
        learned_iou - naive_iou >= 0.15,
        "learned {learned_iou:.3} beats naive {naive_iou:.3} by less than 0.15"
    );
}

/// On clean single-object translations whose silhouettes do not overlap,
/// frame differencing produces a two-blob mask (old and new position) in
/// at least 90% of cases, while the true per-frame masks are single blobs.
#[test]
fn naive_subtraction_splits_clean_translations_in_two() {
    let t0 = Instant::now();
    let world = studio().unwrap();
    let pairs = constructed_translation_pairs(&world, &eval_camera(), 50, EVAL_SEED).unwrap();
    assert_eq!(pairs.len(), 50);
    let mut two_blob = 0;
    for pair in &pairs {
        assert_eq!(extract_detection(&pair.gt1).len(), 1, "gt1 must be one blob");
        assert_eq!(extract_detection(&pair.gt2).len(), 1, "gt2 must be one blob");
        let (union, _) = naive_subtract(&pair.obs1, &pair.obs2, NaivePredictor::default().threshold)
            .unwrap();
        if extract_detection(&union).len() == 2 {
            two_blob += 1;
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    println!("two-blob artifact in {two_blob}/50 translations, {secs:.1} s");
    assert!(two_blob >= 45, "two-blob artifact in only {two_blob}/50 cases");
    assert!(secs < 60.0, "constructed-translation check took {secs:.1} s");
}

/// The commutation map over the furnished room must separate free space
/// from wall-adjacent cells: mean p_different <= 0.2 over curated open
/// cells and >= 0.6 over curated wall cells at 40 trials per cell, and the
/// rendered heatmap must show open cells strictly lighter on average.
#[test]
fn commutation_map_separates_free_space_from_walls() {
    let t0 = Instant::now();
    let world = studio().unwrap();
    let curated = studio_curated();
    let grid = GridConfig::covering(&world.spec().bounds, 12);
    let map = commutation_map(
        &world,
        &grid,
        40,
        &SeqConfig::default(),
        &OraclePredictor,
        &thresholds(),
        &eval_camera(),
        MAP_SEED,
    )
    .unwrap();

    let mean_p = |cells: &[(f64, f64)]| -> f64 {
        let ps: Vec<f64> = cells
            .iter()
            .map(|&(x, y)| map.at(x, y).unwrap().p_different().expect("probe cell reachable"))
            .collect();
        ps.iter().sum::<f64>() / ps.len() as f64
    };
    let open = mean_p(&curated.open_cells);
    let wall = mean_p(&curated.wall_cells);

    // Pixel brightness straight from the exported image.
    let pgm = map.to_pgm();
    let header = format!("P5\n{} {}\n255\n", grid.nx, grid.ny);
    assert!(pgm.starts_with(header.as_bytes()));
    let data = &pgm[header.len()..];
    let mean_pixel = |cells: &[(f64, f64)]| -> f64 {
        let vals: Vec<f64> = cells
            .iter()
            .map(|&(x, y)| {
                let (ix, iy) = grid.cell_containing(Vec2::new(x, y)).unwrap();
                data[(grid.ny - 1 - iy) * grid.nx + ix] as f64
            })
            .collect();
        vals.iter().sum::<f64>() / vals.len() as f64
    };
    let open_px = mean_pixel(&curated.open_cells);
    let wall_px = mean_pixel(&curated.wall_cells);

    let secs = t0.elapsed().as_secs_f64();
    println!(
        "map: open p {open:.3} (pixel {open_px:.0}), wall p {wall:.3} (pixel {wall_px:.0}), {secs:.0} s"
    );
    assert!(open <= 0.2, "open-space mean p_different {open:.3} > 0.2");
    assert!(wall >= 0.6, "wall-adjacent mean p_different {wall:.3} < 0.6");
    assert!(open_px > wall_px, "open cells not lighter: {open_px:.0} vs {wall_px:.0}");
    assert!(secs < 600.0, "map took {secs:.0} s, budget is 600 s");
}

/// Numeric kernels against independent references: the mask IoU against a
/// set-based loop, the cross-entropy against a direct summation, and the
/// assembled network's gradients against central finite differences.
#[test]
fn numerics_agree_with_reference_oracles() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);

    // IoU: exact agreement with an index-set oracle on 1000 random pairs.
    for _ in 0..1000 {
        let (w, h) = (rng.gen_range(1..12), rng.gen_range(1..12));
        let mask = |rng: &mut rand_chacha::ChaCha8Rng| Mask {
            width: w,
            height: h,
            bits: (0..w * h).map(|_| u8::from(rng.gen_bool(0.4))).collect(),
        };
        let (a, b) = (mask(&mut rng), mask(&mut rng));
        let inter = a.bits.iter().zip(&b.bits).filter(|(x, y)| **x == 1 && **y == 1).count();
        let union = a.bits.iter().zip(&b.bits).filter(|(x, y)| **x == 1 || **y == 1).count();
        let expect = if union == 0 { 1.0 } else { inter as f64 / union as f64 };
        assert_eq!(iou(&a, &b).unwrap(), expect);
    }

    // Cross-entropy: within 1e-9 of the unfused summation.
    let (w, h) = (9, 7);
    let prob = Tensor::new(
        vec![h, w],
        (0..w * h).map(|_| rng.gen_range(0.0..1.0)).collect(),
    );
    let target = Mask {
        width: w,
        height: h,
        bits: (0..w * h).map(|_| u8::from(rng.gen_bool(0.5))).collect(),
    };
    let mut direct = 0.0;
    for (p, t) in prob.data.iter().zip(&target.bits) {
        let p = p.clamp(BCE_EPSILON, 1.0 - BCE_EPSILON);
        let t = f64::from(*t);
        direct -= t * p.ln() + (1.0 - t) * (1.0 - p).ln();
    }
    direct /= (w * h) as f64;
    let fused = bce_loss(&prob, &target).unwrap();
    assert!((fused - direct).abs() <= 1e-9, "bce {fused} vs direct {direct}");

    // Whole-network gradients: probe two parameters per tensor (the
    // largest-gradient one and the first) against central differences.
    // The chain runs through every layer type the model has.
    let world = studio().unwrap();
    let cam = Camera::new(45.0, 16, 16);
    let counts = ScenarioCounts { no_difference: 1, completely_different: 1, moved_objects: 1 };
    let tuples = generate_tuples(&world, &cam, &counts, 1, 5).unwrap();
    let batch: Vec<(Tensor, Tensor)> = tuples
        .iter()
        .map(|t| tuple_tensors(t, false).unwrap())
        .collect();
    let params = scod_core::maskpred::init_params(&Arch::small(16, 16), 12).unwrap();
    let (_, grads) = backward(&params, &batch).unwrap();

    let h_step = 1e-4;
    let mut checked = 0;
    for (ti, (name, tensor)) in params.tensors.iter().enumerate() {
        let argmax = (0..tensor.numel())
            .max_by(|a, b| grads[ti].data[*a].abs().total_cmp(&grads[ti].data[*b].abs()))
            .unwrap();
        for idx in [0, argmax] {
            let analytic = grads[ti].data[idx];
            let probe = |delta: f64| -> f64 {
                let mut p = params.clone();
                p.tensors[ti].1.data[idx] += delta;
                backward(&p, &batch).unwrap().0
            };
            let fd = (probe(h_step) - probe(-h_step)) / (2.0 * h_step);
            let rel = (fd - analytic).abs() / analytic.abs().max(fd.abs()).max(1e-8);
            assert!(
                rel <= 1e-4,
                "{name}[{idx}]: analytic {analytic:.3e} vs finite-difference {fd:.3e} (rel {rel:.2e})"
            );
            checked += 1;
        }
    }
    println!("gradient probes passed: {checked} across {} tensors", params.tensors.len());
}

/// Bit-level reproducibility: replaying an experiment, regenerating a
/// dataset, and retraining from the same seeds must all produce identical
/// bytes.
#[test]
fn experiments_datasets_and_training_are_reproducible() {
    let world = studio().unwrap();
    let cam = Camera::new(45.0, 32, 32);

    // Same experiment twice: every field identical.
    let seq = sample_sequence(21, &SeqConfig::default()).unwrap();
    let order2 = reverse_permutation(seq.actions.len());
    let start = world.snapshot();
    let a = run_experiment(&world, &start, &seq, &order2, &cam).unwrap();
    let b = run_experiment(&world, &start, &seq, &order2, &cam).unwrap();
    assert_eq!(a, b, "experiment replay must be bit-identical");

    // Same dataset seed twice: identical file bytes.
    let counts = ScenarioCounts::balanced(12);
    let t1 = generate_tuples(&world, &cam, &counts, 2, 31).unwrap();
    let t2 = generate_tuples(&world, &cam, &counts, 2, 31).unwrap();
    assert_eq!(dataset_bytes(&t1, &cam), dataset_bytes(&t2, &cam));

    // Same training config twice: identical parameter bytes.
    let cfg = TrainConfig { epochs: 2, batch_size: 4, ..TrainConfig::default() };
    let arch = Arch::small(32, 32);
    let r1 = train_tuples(&t1, &arch, &cfg).unwrap();
    let r2 = train_tuples(&t1, &arch, &cfg).unwrap();
    assert_eq!(params_bytes(&r1.params), params_bytes(&r2.params));
    assert_eq!(r1.log_csv, r2.log_csv);
}
