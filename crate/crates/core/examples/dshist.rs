use scod_core::dataset::{dataset_parse, Scenario};

fn main() {
    let path = std::env::args().nth(1).expect("usage: dshist <dataset.scds>");
    let bytes = std::fs::read(&path).expect("read dataset");
    let (_, tuples) = dataset_parse(&bytes).expect("parse dataset");
    for scen in [Scenario::NoDifference, Scenario::CompletelyDifferent, Scenario::MovedObjects] {
        let mut fracs: Vec<f64> = tuples
            .iter()
            .filter(|t| t.scenario == scen)
            .map(|t| {
                let n = t.obs1.width * t.obs1.height;
                let diff = (0..n)
                    .filter(|p| t.obs1.rgb[3 * p..3 * p + 3] != t.obs2.rgb[3 * p..3 * p + 3])
                    .count();
                diff as f64 / n as f64
            })
            .collect();
        fracs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let pct = |q: f64| fracs[((fracs.len() - 1) as f64 * q) as usize];
        println!(
            "{:?} n={} min={:.4} p10={:.4} p25={:.4} p50={:.4} p75={:.4} p90={:.4} max={:.4}",
            scen,
            fracs.len(),
            fracs[0],
            pct(0.10),
            pct(0.25),
            pct(0.50),
            pct(0.75),
            pct(0.90),
            fracs[fracs.len() - 1]
        );
        let below = |x: f64| fracs.iter().filter(|f| **f < x).count();
        println!(
            "  <0.02: {}  <0.05: {}  <0.10: {}  <0.25: {}  <0.60: {}",
            below(0.02),
            below(0.05),
            below(0.10),
            below(0.25),
            below(0.60)
        );
    }
}
