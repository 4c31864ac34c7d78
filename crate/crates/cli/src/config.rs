//! Run configuration: a sectioned `key = value` text file.
//!
//! Every knob the pipeline has lives here, with one source of truth for the
//! defaults. Unknown sections or keys are hard errors — a typo must never
//! silently fall back to a default. Relative paths are resolved against the
//! config file's own directory, so a config can ship with the repository
//! and be invoked from anywhere. Each subcommand re-serializes the
//! effective configuration (file plus flag overrides) into its output
//! directory, which keeps runs reproducible from their artifacts alone.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use scod_core::maskpred::TrainConfig;
use scod_core::render::Camera;
use scod_core::scexp::SeqConfig;
use scod_core::scod::OutcomeThresholds;

/// Everything a subcommand needs, post-parse and range-checked.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Training room world file.
    pub train_world: PathBuf,
    /// Held-out room world file (evaluation only).
    pub gen_world: PathBuf,
    pub fov_deg: f64,
    pub width: usize,
    pub height: usize,
    pub seq: SeqConfig,
    /// Total dataset tuples, split evenly across the three scenarios.
    pub tuples: usize,
    /// Most objects one moved-objects tuple may displace.
    pub k_max: usize,
    pub train: TrainConfig,
    pub thresholds: OutcomeThresholds,
    /// Commutation-map grid is `grid_n` by `grid_n` over the room bounds.
    pub grid_n: usize,
    pub trials_per_cell: u32,
    /// Master seed; every randomized subcommand requires one.
    pub seed: u64,
    /// Output directory, created on demand.
    pub out: PathBuf,
}

impl RunConfig {
    pub fn camera(&self) -> Camera {
        let mut cam = Camera::new(self.fov_deg, self.width, self.height);
        cam.eye_height_fraction = 0.5;
        cam
    }

    /// Canonical serialization with resolved paths; parses back to an
    /// equal config (exactly so when the paths are absolute).
    pub fn render(&self) -> String {
        let mut s = String::new();
        writeln!(s, "[world]").unwrap();
        writeln!(s, "train = {}", self.train_world.display()).unwrap();
        writeln!(s, "gen = {}", self.gen_world.display()).unwrap();
        writeln!(s, "\n[camera]").unwrap();
        writeln!(s, "fov_deg = {}", self.fov_deg).unwrap();
        writeln!(s, "width = {}", self.width).unwrap();
        writeln!(s, "height = {}", self.height).unwrap();
        writeln!(s, "\n[sequence]").unwrap();
        let dofs: Vec<String> = self.seq.dof_set.iter().map(usize::to_string).collect();
        writeln!(s, "dofs = {}", dofs.join(",")).unwrap();
        writeln!(s, "length = {}", self.seq.length).unwrap();
        writeln!(s, "amp_min = {}", self.seq.amp_range.0).unwrap();
        writeln!(s, "amp_max = {}", self.seq.amp_range.1).unwrap();
        writeln!(s, "dt = {}", self.seq.dt).unwrap();
        writeln!(s, "\n[dataset]").unwrap();
        writeln!(s, "tuples = {}", self.tuples).unwrap();
        writeln!(s, "k_max = {}", self.k_max).unwrap();
        writeln!(s, "\n[train]").unwrap();
        writeln!(s, "epochs = {}", self.train.epochs).unwrap();
        writeln!(s, "batch_size = {}", self.train.batch_size).unwrap();
        writeln!(s, "learning_rate = {}", self.train.learning_rate).unwrap();
        writeln!(s, "validation_fraction = {}", self.train.validation_fraction).unwrap();
        writeln!(s, "swap_augment = {}", self.train.swap_augment).unwrap();
        writeln!(s, "\n[thresholds]").unwrap();
        writeln!(s, "low = {}", self.thresholds.low).unwrap();
        writeln!(s, "high = {}", self.thresholds.high).unwrap();
        writeln!(s, "\n[map]").unwrap();
        writeln!(s, "grid_n = {}", self.grid_n).unwrap();
        writeln!(s, "trials_per_cell = {}", self.trials_per_cell).unwrap();
        writeln!(s, "\n[run]").unwrap();
        writeln!(s, "seed = {}", self.seed).unwrap();
        writeln!(s, "out = {}", self.out.display()).unwrap();
        s
    }
}

/// Parse and validate a config file.
pub fn load_config(path: &Path) -> Result<RunConfig, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config(&text, base).map_err(|e| format!("{}: {e}", path.display()))
}

fn parse_config(text: &str, base: &Path) -> Result<RunConfig, String> {
    // Defaults for everything except the required world paths and seed.
    let mut train_world: Option<PathBuf> = None;
    let mut gen_world: Option<PathBuf> = None;
    let mut seed: Option<u64> = None;
    let mut out: Option<PathBuf> = None;
    let mut cfg = RunConfig {
        train_world: PathBuf::new(),
        gen_world: PathBuf::new(),
        fov_deg: 45.0,
        width: 64,
        height: 64,
        seq: SeqConfig::default(),
        tuples: 4000,
        k_max: 2,
        train: TrainConfig::default(),
        thresholds: OutcomeThresholds::default(),
        grid_n: 12,
        trials_per_cell: 40,
        seed: 0,
        out: PathBuf::from("out"),
    };

    let mut section = String::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let at = |msg: String| format!("line {}: {msg}", idx + 1);
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| at("unterminated section header".into()))?;
            const SECTIONS: [&str; 8] = [
                "world", "camera", "sequence", "dataset", "train", "thresholds", "map", "run",
            ];
            if !SECTIONS.contains(&name) {
                return Err(at(format!("unknown section [{name}]")));
            }
            section = name.to_string();
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| at("expected `key = value`".into()))?;
        let bad = |e: String| at(format!("{section}.{key}: {e}"));
        macro_rules! num {
            () => {
                value.parse().map_err(|e| bad(format!("{e}")))?
            };
        }
        match (section.as_str(), key) {
            ("world", "train") => train_world = Some(base.join(value)),
            ("world", "gen") => gen_world = Some(base.join(value)),
            ("camera", "fov_deg") => cfg.fov_deg = num!(),
            ("camera", "width") => cfg.width = num!(),
            ("camera", "height") => cfg.height = num!(),
            ("sequence", "dofs") => {
                cfg.seq.dof_set = value
                    .split(',')
                    .map(|d| d.trim().parse().map_err(|e| bad(format!("{e}"))))
                    .collect::<Result<_, _>>()?;
            }
            ("sequence", "length") => cfg.seq.length = num!(),
            ("sequence", "amp_min") => cfg.seq.amp_range.0 = num!(),
            ("sequence", "amp_max") => cfg.seq.amp_range.1 = num!(),
            ("sequence", "dt") => cfg.seq.dt = num!(),
            ("dataset", "tuples") => cfg.tuples = num!(),
            ("dataset", "k_max") => cfg.k_max = num!(),
            ("train", "epochs") => cfg.train.epochs = num!(),
            ("train", "batch_size") => cfg.train.batch_size = num!(),
            ("train", "learning_rate") => cfg.train.learning_rate = num!(),
            ("train", "validation_fraction") => cfg.train.validation_fraction = num!(),
            ("train", "swap_augment") => cfg.train.swap_augment = num!(),
            ("thresholds", "low") => cfg.thresholds.low = num!(),
            ("thresholds", "high") => cfg.thresholds.high = num!(),
            ("map", "grid_n") => cfg.grid_n = num!(),
            ("map", "trials_per_cell") => cfg.trials_per_cell = num!(),
            ("run", "seed") => seed = Some(num!()),
            ("run", "out") => out = Some(base.join(value)),
            _ => {
                return Err(at(if section.is_empty() {
                    format!("key `{key}` before any section")
                } else {
                    format!("unknown key `{key}` in [{section}]")
                }))
            }
        }
    }

    cfg.train_world = train_world.ok_or("missing required key world.train")?;
    cfg.gen_world = gen_world.ok_or("missing required key world.gen")?;
    cfg.seed = seed.ok_or("missing required key run.seed (randomized runs need an explicit seed)")?;
    cfg.out = out.unwrap_or_else(|| base.join("out"));

    for path in [&cfg.train_world, &cfg.gen_world] {
        if !path.is_file() {
            return Err(format!("world file does not exist: {}", path.display()));
        }
    }
    if !(10.0 < cfg.fov_deg && cfg.fov_deg < 170.0) {
        return Err(format!("camera.fov_deg {} outside (10, 170)", cfg.fov_deg));
    }
    if !(8..=4096).contains(&cfg.width) || !(8..=4096).contains(&cfg.height) {
        return Err("camera dimensions must be within 8..=4096".into());
    }
    if cfg.tuples == 0 || cfg.k_max == 0 || cfg.grid_n == 0 || cfg.trials_per_cell == 0 {
        return Err("dataset.tuples, dataset.k_max, map.grid_n and map.trials_per_cell must be positive".into());
    }
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn repo_root() -> PathBuf {
        Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
    }

    fn minimal(extra: &str) -> String {
        let root = repo_root();
        format!(
            "[world]\ntrain = {root}/layouts/studio.world\ngen = {root}/layouts/loft.world\n\
             [run]\nseed = 3\n{extra}",
            root = root.display()
        )
    }

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg = parse_config(&minimal(""), Path::new(".")).unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!((cfg.width, cfg.height), (64, 64));
        assert_eq!(cfg.tuples, 4000);
        assert_eq!(cfg.thresholds, OutcomeThresholds::default());
        assert_eq!(cfg.out, Path::new(".").join("out"));
    }

    #[test]
    fn unknown_keys_and_sections_are_rejected() {
        let err = parse_config(&minimal("[dataset]\ntuplez = 4\n"), Path::new(".")).unwrap_err();
        assert!(err.contains("unknown key `tuplez`"), "{err}");
        let err = parse_config(&minimal("[cameraz]\n"), Path::new(".")).unwrap_err();
        assert!(err.contains("unknown section"), "{err}");
        let err = parse_config("x = 1\n", Path::new(".")).unwrap_err();
        assert!(err.contains("before any section"), "{err}");
    }

    #[test]
    fn required_keys_are_enforced() {
        let err = parse_config("[run]\nseed = 1\n", Path::new(".")).unwrap_err();
        assert!(err.contains("world.train"), "{err}");
        let root = repo_root();
        let text = format!(
            "[world]\ntrain = {r}/layouts/studio.world\ngen = {r}/layouts/loft.world\n",
            r = root.display()
        );
        let err = parse_config(&text, Path::new(".")).unwrap_err();
        assert!(err.contains("run.seed"), "{err}");
    }

    #[test]
    fn missing_world_file_is_an_error() {
        let text = "[world]\ntrain = nope.world\ngen = nope.world\n[run]\nseed = 1\n";
        let err = parse_config(text, Path::new("/tmp")).unwrap_err();
        assert!(err.contains("does not exist"), "{err}");
    }

    #[test]
    fn comments_values_and_overrides_parse() {
        let text = minimal(
            "[sequence]\ndofs = 2,3  # both arm joints\nlength = 10\n\
             [train]\nswap_augment = true\n[camera]\nwidth = 32\nheight = 32\n",
        );
        let cfg = parse_config(&text, Path::new(".")).unwrap();
        assert_eq!(cfg.seq.dof_set, vec![2, 3]);
        assert_eq!(cfg.seq.length, 10);
        assert!(cfg.train.swap_augment);
        assert_eq!(cfg.width, 32);
    }

    #[test]
    fn render_round_trips() {
        // Absolute out path so re-joining against the base is a no-op.
        let text = minimal("[camera]\nwidth = 32\nheight = 16\n[map]\ngrid_n = 6\n[run]\nout = /tmp/scod-out\n");
        let cfg = parse_config(&text, Path::new(".")).unwrap();
        let again = parse_config(&cfg.render(), Path::new(".")).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn out_of_range_values_are_rejected() {
        for extra in [
            "[camera]\nfov_deg = 5\n",
            "[camera]\nwidth = 4\n",
            "[dataset]\ntuples = 0\n",
            "[map]\ntrials_per_cell = 0\n",
        ] {
            assert!(parse_config(&minimal(extra), Path::new(".")).is_err(), "{extra}");
        }
    }
}
