//! Dump PPM mosaics (obs1 | obs2 | changed | gt1 | gt2 | pred1 | pred2) for
//! every moved-object tuple of both evaluation sets.
//! Usage: cargo run --example tiles -- <params.scnp> <outdir>

use scod_core::eval::build_test_sets;
use scod_core::layouts::{loft, loft_curated, studio, studio_curated};
use scod_core::maskpred::{forward, load_params, ModelParams, Tensor};
use scod_core::scexp::SCRecord;
use scod_core::scod::{MaskPredictor, OraclePredictor, OutcomeKind};
use scod_core::{OutcomeThresholds, SeqConfig};

fn mask_rgb(t: &Tensor, w: usize, h: usize) -> Vec<u8> {
    let mut rgb = vec![0u8; 3 * w * h];
    for p in 0..w * h {
        let v = (t.data[p].clamp(0.0, 1.0) * 255.0) as u8;
        rgb[3 * p] = v;
        rgb[3 * p + 1] = v;
        rgb[3 * p + 2] = v;
    }
    rgb
}

fn dump(records: &[SCRecord], params: &ModelParams, outdir: &str, tag: &str) {
    let mut idx = 0;
    for r in records.iter().filter(|r| OutcomeKind::of(&r.gt) == OutcomeKind::MovedObject) {
        let (w, h) = (r.obs1.width, r.obs1.height);
        let changed: Vec<u8> = (0..w * h)
            .flat_map(|p| {
                let c = if r.obs1.rgb[3 * p..3 * p + 3] != r.obs2.rgb[3 * p..3 * p + 3] {
                    255
                } else {
                    0
                };
                [c, c, c]
            })
            .collect();
        let (g1, g2) = OraclePredictor.predict(r).unwrap();
        let (p1, p2) = forward(params, &r.obs1, &r.obs2).unwrap();
        let tiles: Vec<Vec<u8>> = vec![
            r.obs1.rgb.clone(),
            r.obs2.rgb.clone(),
            changed,
            mask_rgb(&g1, w, h),
            mask_rgb(&g2, w, h),
            mask_rgb(&p1, w, h),
            mask_rgb(&p2, w, h),
        ];
        let sep = 2usize;
        let mw = tiles.len() * (w + sep) - sep;
        let mut mosaic = vec![40u8; 3 * mw * h];
        for (t, tile) in tiles.iter().enumerate() {
            let x0 = t * (w + sep);
            for y in 0..h {
                for x in 0..w {
                    let src = 3 * (y * w + x);
                    let dst = 3 * (y * mw + x0 + x);
                    mosaic[dst..dst + 3].copy_from_slice(&tile[src..src + 3]);
                }
            }
        }
        let path = format!("{outdir}/{tag}_moved_{idx:02}.ppm");
        let mut out = format!("P6\n{mw} {h}\n255\n").into_bytes();
        out.extend_from_slice(&mosaic);
        std::fs::write(&path, out).unwrap();
        idx += 1;
    }
    eprintln!("{tag}: wrote {idx} mosaics");
}

fn main() {
    let params_path = std::env::args().nth(1).expect("params path");
    let outdir = std::env::args().nth(2).expect("output dir");
    std::fs::create_dir_all(&outdir).unwrap();
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
    dump(&in_dist.records, &params, &outdir, "indist");
    dump(&gen.records, &params, &outdir, "gen");
}
