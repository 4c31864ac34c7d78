//! Per-tuple diagnostic over the evaluation sets: positive fractions and
//! moved-object IoU for a trained parameter file, grouped by true outcome.
//! Usage: cargo run --example diag -- <params.scnp>

use scod_core::eval::{build_test_sets, iou};
use scod_core::layouts::{loft, loft_curated, studio, studio_curated};
use scod_core::maskpred::load_params;
use scod_core::render::{Mask, Observation};
use scod_core::scexp::SCRecord;
use scod_core::scod::{classify, MaskPredictor, OraclePredictor, OutcomeKind, BINARIZE_AT};
use scod_core::{OutcomeThresholds, SeqConfig};

fn positive_fraction(t: &scod_core::maskpred::Tensor) -> f64 {
    t.data.iter().filter(|&&p| p > BINARIZE_AT).count() as f64 / t.numel() as f64
}

fn prob_mask(t: &scod_core::maskpred::Tensor) -> Mask {
    Mask {
        width: t.shape[1],
        height: t.shape[0],
        bits: t.data.iter().map(|&p| u8::from(p > BINARIZE_AT)).collect(),
    }
}

/// Arm pixels: color proportional to the arm's base hue under the distance
/// shade (ratios g/r = 120/230, b/r = 40/230, r >= 230 * 0.2).
fn arm_pixels(obs: &Observation) -> Vec<bool> {
    (0..obs.width * obs.height)
        .map(|p| {
            let r = obs.rgb[3 * p] as f64;
            let g = obs.rgb[3 * p + 1] as f64;
            let b = obs.rgb[3 * p + 2] as f64;
            r >= 45.0 && (g - r * 120.0 / 230.0).abs() <= 2.0 && (b - r * 40.0 / 230.0).abs() <= 2.0
        })
        .collect()
}

/// Min Chebyshev distance from any set pixel of `from` to any set pixel of
/// `to` (capped at 99; 99 when either side is empty).
fn min_dist(from: &[bool], to: &[bool], w: usize) -> usize {
    let fs: Vec<(i64, i64)> = from
        .iter()
        .enumerate()
        .filter(|(_, v)| **v)
        .map(|(p, _)| ((p % w) as i64, (p / w) as i64))
        .collect();
    let ts: Vec<(i64, i64)> = to
        .iter()
        .enumerate()
        .filter(|(_, v)| **v)
        .map(|(p, _)| ((p % w) as i64, (p / w) as i64))
        .collect();
    let mut best = 99usize;
    for (fx, fy) in &fs {
        for (tx, ty) in &ts {
            let d = (fx - tx).abs().max((fy - ty).abs()) as usize;
            if d < best {
                best = d;
            }
        }
    }
    best
}

fn dump(label: &str, records: &[SCRecord], params: &scod_core::maskpred::ModelParams) {
    let th = OutcomeThresholds::default();
    println!("== {label} ==");
    for kind in [OutcomeKind::Identical, OutcomeKind::Different, OutcomeKind::MovedObject] {
        let mut rows: Vec<String> = Vec::new();
        for r in records.iter().filter(|r| OutcomeKind::of(&r.gt) == kind) {
            let npx = r.obs1.width * r.obs1.height;
            let changed: Vec<bool> = (0..npx)
                .map(|p| r.obs1.rgb[3 * p..3 * p + 3] != r.obs2.rgb[3 * p..3 * p + 3])
                .collect();
            let raw_diff = changed.iter().filter(|c| **c).count() as f64 / npx as f64;
            let (p1, p2) = scod_core::maskpred::forward(params, &r.obs1, &r.obs2).unwrap();
            let (f1, f2) = (positive_fraction(&p1), positive_fraction(&p2));
            let mean_p = (p1.data.iter().sum::<f64>() + p2.data.iter().sum::<f64>())
                / (p1.numel() + p2.numel()) as f64;
            let pred = classify(&p1, &p2, &th, BINARIZE_AT).unwrap();
            let mut extra = String::new();
            if kind == OutcomeKind::MovedObject {
                let (g1, g2) = OraclePredictor.predict(r).unwrap();
                let i1 = iou(&prob_mask(&p1), &prob_mask(&g1)).unwrap();
                let i2 = iou(&prob_mask(&p2), &prob_mask(&g2)).unwrap();
                let gt_frac = positive_fraction(&g1);
                // Per frame: how much of the silhouette visibly changed, and
                // how close the silhouette sits to arm pixels.
                let mut per_frame = String::new();
                for (g, obs) in [(&g1, &r.obs1), (&g2, &r.obs2)] {
                    let gt: Vec<bool> = g.data.iter().map(|&v| v > 0.5).collect();
                    let gt_n = gt.iter().filter(|v| **v).count().max(1);
                    let chg_in = gt.iter().zip(&changed).filter(|(g, c)| **g && **c).count();
                    let arm = arm_pixels(obs);
                    let d = min_dist(&gt, &arm, obs.width);
                    per_frame.push_str(&format!(
                        " [chg={:.2} armd={d}]",
                        chg_in as f64 / gt_n as f64
                    ));
                }
                extra = format!(" iou={i1:.3}/{i2:.3} gt_frac={gt_frac:.3}{per_frame}");
            } else if kind == OutcomeKind::Different {
                // What fraction of the changed pixels are arm-colored in
                // either frame (the cue separating arm motion from objects).
                let arm1 = arm_pixels(&r.obs1);
                let arm2 = arm_pixels(&r.obs2);
                let chg_n = changed.iter().filter(|c| **c).count().max(1);
                let chg_arm = (0..npx)
                    .filter(|&p| changed[p] && (arm1[p] || arm2[p]))
                    .count();
                extra = format!(" armfrac={:.2}", chg_arm as f64 / chg_n as f64);
            }
            rows.push(format!(
                "  raw={raw_diff:.3} f=({f1:.3},{f2:.3}) meanp={mean_p:.3} pred={pred:?}{extra}"
            ));
        }
        println!(" {kind:?} ({} tuples)", rows.len());
        for row in rows {
            println!("{row}");
        }
    }
}

fn main() {
    let params_path = std::env::args().nth(1).expect("params path");
    let params = load_params(std::path::Path::new(&params_path)).unwrap();
    let studio_w = studio().unwrap();
    let loft_w = loft().unwrap();
    let (in_dist, gen) = build_test_sets(
        (&studio_w, &studio_curated()),
        (&loft_w, &loft_curated()),
        &OutcomeThresholds::default(),
        &SeqConfig::default(),
        3,
    )
    .unwrap();
    dump("in-dist", &in_dist.records, &params);
    dump("generalization", &gen.records, &params);
}
