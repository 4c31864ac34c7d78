//! Text format for world specs: a sectioned key-value file with one
//! `[world]` section, one `[agent]` section, and any number of `[obstacle]`
//! and `[movable]` sections. Unknown sections or keys are errors, so typos
//! fail loudly instead of silently falling back to defaults.
//!
//! ```text
//! [world]
//! name = studio
//! bounds = -3 -3 3 3          # min_x min_y max_x max_y
//!
//! [agent]
//! position = 0 0
//! heading = 0
//! base_radius = 0.3
//! arm_radius = 0.06
//! link_lengths = 0.45 0.35
//! joints = 0 0
//! joint_limits = -2.6 2.6 -2.4 2.4
//! max_base_rotate = 1.5
//! max_base_translate = 1.0
//! max_joint = 2.2
//!
//! [obstacle]
//! color = 120 120 125
//! verts = 0.9 0.9  1.7 0.9  1.7 1.7  0.9 1.7
//!
//! [movable]
//! id = 1
//! color = 200 60 60
//! pose = 0.8 0.4 0.3          # x y heading
//! verts = -0.14 -0.11  0.14 -0.11  0.14 0.11  -0.14 0.11
//! ```
//!
//! Floats are written with Rust's shortest round-trip formatting, so
//! `parse(format(spec)) == spec` exactly.

use std::collections::BTreeMap;
use std::path::Path;

use crate::geom::{Bounds, Pose, Vec2};
use crate::world::{ActionLimits, AgentConfig, MovableObject, Obstacle, WorldSpec};

/// Errors from reading or writing world spec files.
#[derive(Debug, thiserror::Error)]
pub enum FileError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn err<T>(line: usize, msg: impl Into<String>) -> Result<T, FileError> {
    Err(FileError::Parse { line, msg: msg.into() })
}

/// One parsed section: header name plus key/value pairs with line numbers.
struct Section {
    name: String,
    line: usize,
    entries: Vec<(String, String, usize)>,
}

impl Section {
    fn take(&mut self, key: &str) -> Option<(String, usize)> {
        let idx = self.entries.iter().position(|(k, _, _)| k == key)?;
        let (_, v, line) = self.entries.remove(idx);
        Some((v, line))
    }

    fn require(&mut self, key: &str) -> Result<(String, usize), FileError> {
        self.take(key)
            .ok_or_else(|| FileError::Parse {
                line: self.line,
                msg: format!("[{}] section missing required key `{}`", self.name, key),
            })
    }

    fn reject_leftovers(&self) -> Result<(), FileError> {
        if let Some((k, _, line)) = self.entries.first() {
            return err(*line, format!("unknown key `{k}` in [{}] section", self.name));
        }
        Ok(())
    }
}

fn split_sections(text: &str) -> Result<Vec<Section>, FileError> {
    let mut sections: Vec<Section> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or(FileError::Parse { line: line_no, msg: "unterminated section header".into() })?
                .trim()
                .to_string();
            sections.push(Section { name, line: line_no, entries: Vec::new() });
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or(FileError::Parse { line: line_no, msg: format!("expected `key = value`, got `{line}`") })?;
        let section = sections
            .last_mut()
            .ok_or(FileError::Parse { line: line_no, msg: "key/value before any [section] header".into() })?;
        section
            .entries
            .push((key.trim().to_string(), value.trim().to_string(), line_no));
    }
    Ok(sections)
}

fn parse_floats(value: &str, line: usize) -> Result<Vec<f64>, FileError> {
    value
        .split_whitespace()
        .map(|tok| {
            tok.parse::<f64>()
                .map_err(|_| FileError::Parse { line, msg: format!("`{tok}` is not a number") })
        })
        .collect()
}

fn parse_n_floats(value: &str, line: usize, n: usize, what: &str) -> Result<Vec<f64>, FileError> {
    let v = parse_floats(value, line)?;
    if v.len() != n {
        return err(line, format!("{what} expects {n} numbers, got {}", v.len()));
    }
    Ok(v)
}

fn parse_color(value: &str, line: usize) -> Result<[u8; 3], FileError> {
    let parts: Vec<&str> = value.split_whitespace().collect();
    if parts.len() != 3 {
        return err(line, format!("color expects 3 components, got {}", parts.len()));
    }
    let mut rgb = [0u8; 3];
    for (slot, tok) in rgb.iter_mut().zip(&parts) {
        *slot = tok
            .parse::<u8>()
            .map_err(|_| FileError::Parse { line, msg: format!("`{tok}` is not a byte (0-255)") })?;
    }
    Ok(rgb)
}

fn parse_verts(value: &str, line: usize) -> Result<Vec<Vec2>, FileError> {
    let nums = parse_floats(value, line)?;
    if nums.len() < 6 || nums.len() % 2 != 0 {
        return err(line, format!("verts expects an even count of ≥6 numbers, got {}", nums.len()));
    }
    Ok(nums.chunks(2).map(|c| Vec2::new(c[0], c[1])).collect())
}

/// Parse a world spec from file text. The result still goes through
/// [`crate::world::World::new`] for geometric validation.
pub fn parse_world_spec(text: &str) -> Result<WorldSpec, FileError> {
    let sections = split_sections(text)?;
    let mut world_sec: Option<Section> = None;
    let mut agent_sec: Option<Section> = None;
    let mut obstacles: Vec<Section> = Vec::new();
    let mut movables: Vec<Section> = Vec::new();
    for sec in sections {
        match sec.name.as_str() {
            "world" if world_sec.is_none() => world_sec = Some(sec),
            "agent" if agent_sec.is_none() => agent_sec = Some(sec),
            "world" | "agent" => return err(sec.line, format!("duplicate [{}] section", sec.name)),
            "obstacle" => obstacles.push(sec),
            "movable" => movables.push(sec),
            other => return err(sec.line, format!("unknown section [{other}]")),
        }
    }
    let mut world_sec = world_sec.ok_or(FileError::Parse { line: 1, msg: "missing [world] section".into() })?;
    let mut agent_sec = agent_sec.ok_or(FileError::Parse { line: 1, msg: "missing [agent] section".into() })?;

    let name = world_sec.require("name")?.0;
    let (bounds_v, bounds_line) = world_sec.require("bounds")?;
    let b = parse_n_floats(&bounds_v, bounds_line, 4, "bounds")?;
    let bounds = Bounds::new(b[0], b[1], b[2], b[3]);
    world_sec.reject_leftovers()?;

    let (pos_v, pos_line) = agent_sec.require("position")?;
    let pos = parse_n_floats(&pos_v, pos_line, 2, "position")?;
    let (heading_v, heading_line) = agent_sec.require("heading")?;
    let heading = parse_n_floats(&heading_v, heading_line, 1, "heading")?[0];
    let (br_v, br_line) = agent_sec.require("base_radius")?;
    let base_radius = parse_n_floats(&br_v, br_line, 1, "base_radius")?[0];
    let (ar_v, ar_line) = agent_sec.require("arm_radius")?;
    let arm_radius = parse_n_floats(&ar_v, ar_line, 1, "arm_radius")?[0];
    let (ll_v, ll_line) = agent_sec.require("link_lengths")?;
    let link_lengths = parse_floats(&ll_v, ll_line)?;
    let (j_v, j_line) = agent_sec.require("joints")?;
    let joints = parse_floats(&j_v, j_line)?;
    let (jl_v, jl_line) = agent_sec.require("joint_limits")?;
    let jl = parse_floats(&jl_v, jl_line)?;
    if jl.len() != 2 * joints.len() {
        return err(jl_line, format!("joint_limits expects {} numbers (lo hi per joint), got {}", 2 * joints.len(), jl.len()));
    }
    let joint_limits = jl.chunks(2).map(|c| (c[0], c[1])).collect();
    let (mbr_v, mbr_line) = agent_sec.require("max_base_rotate")?;
    let max_base_rotate = parse_n_floats(&mbr_v, mbr_line, 1, "max_base_rotate")?[0];
    let (mbt_v, mbt_line) = agent_sec.require("max_base_translate")?;
    let max_base_translate = parse_n_floats(&mbt_v, mbt_line, 1, "max_base_translate")?[0];
    let (mj_v, mj_line) = agent_sec.require("max_joint")?;
    let max_joint = parse_n_floats(&mj_v, mj_line, 1, "max_joint")?[0];
    agent_sec.reject_leftovers()?;

    let mut immovable = Vec::with_capacity(obstacles.len());
    for mut sec in obstacles {
        let (color_v, color_line) = sec.require("color")?;
        let color = parse_color(&color_v, color_line)?;
        let (verts_v, verts_line) = sec.require("verts")?;
        let verts = parse_verts(&verts_v, verts_line)?;
        sec.reject_leftovers()?;
        immovable.push(Obstacle { verts, color });
    }

    let mut movable_objs = Vec::with_capacity(movables.len());
    for mut sec in movables {
        let (id_v, id_line) = sec.require("id")?;
        let id = id_v
            .trim()
            .parse::<u32>()
            .map_err(|_| FileError::Parse { line: id_line, msg: format!("`{id_v}` is not a valid id") })?;
        let (color_v, color_line) = sec.require("color")?;
        let color = parse_color(&color_v, color_line)?;
        let (pose_v, pose_line) = sec.require("pose")?;
        let p = parse_n_floats(&pose_v, pose_line, 3, "pose")?;
        let (verts_v, verts_line) = sec.require("verts")?;
        let shape = parse_verts(&verts_v, verts_line)?;
        sec.reject_leftovers()?;
        movable_objs.push(MovableObject {
            id,
            shape,
            pose: Pose { position: Vec2::new(p[0], p[1]), heading: p[2] },
            color,
        });
    }

    Ok(WorldSpec {
        name,
        bounds,
        immovable,
        movables: movable_objs,
        initial_agent: AgentConfig {
            base: Pose { position: Vec2::new(pos[0], pos[1]), heading },
            joints,
            link_lengths,
            base_radius,
            arm_radius,
            joint_limits,
        },
        limits: ActionLimits { max_base_rotate, max_base_translate, max_joint },
    })
}

fn fmt_floats(vals: impl IntoIterator<Item = f64>) -> String {
    vals.into_iter()
        .map(|v| format!("{v}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn fmt_verts(verts: &[Vec2]) -> String {
    verts
        .iter()
        .map(|v| format!("{} {}", v.x, v.y))
        .collect::<Vec<_>>()
        .join("  ")
}

/// Render a spec back to file text; inverse of [`parse_world_spec`].
pub fn format_world_spec(spec: &WorldSpec) -> String {
    let mut out = String::new();
    let a = &spec.initial_agent;
    out.push_str("[world]\n");
    out.push_str(&format!("name = {}\n", spec.name));
    out.push_str(&format!(
        "bounds = {}\n",
        fmt_floats([spec.bounds.min.x, spec.bounds.min.y, spec.bounds.max.x, spec.bounds.max.y])
    ));
    out.push_str("\n[agent]\n");
    out.push_str(&format!("position = {} {}\n", a.base.position.x, a.base.position.y));
    out.push_str(&format!("heading = {}\n", a.base.heading));
    out.push_str(&format!("base_radius = {}\n", a.base_radius));
    out.push_str(&format!("arm_radius = {}\n", a.arm_radius));
    out.push_str(&format!("link_lengths = {}\n", fmt_floats(a.link_lengths.iter().copied())));
    out.push_str(&format!("joints = {}\n", fmt_floats(a.joints.iter().copied())));
    out.push_str(&format!(
        "joint_limits = {}\n",
        fmt_floats(a.joint_limits.iter().flat_map(|(lo, hi)| [*lo, *hi]))
    ));
    out.push_str(&format!("max_base_rotate = {}\n", spec.limits.max_base_rotate));
    out.push_str(&format!("max_base_translate = {}\n", spec.limits.max_base_translate));
    out.push_str(&format!("max_joint = {}\n", spec.limits.max_joint));
    for obs in &spec.immovable {
        out.push_str("\n[obstacle]\n");
        out.push_str(&format!("color = {} {} {}\n", obs.color[0], obs.color[1], obs.color[2]));
        out.push_str(&format!("verts = {}\n", fmt_verts(&obs.verts)));
    }
    for mv in &spec.movables {
        out.push_str("\n[movable]\n");
        out.push_str(&format!("id = {}\n", mv.id));
        out.push_str(&format!("color = {} {} {}\n", mv.color[0], mv.color[1], mv.color[2]));
        out.push_str(&format!(
            "pose = {} {} {}\n",
            mv.pose.position.x, mv.pose.position.y, mv.pose.heading
        ));
        out.push_str(&format!("verts = {}\n", fmt_verts(&mv.shape)));
    }
    out
}

/// Read and parse a world spec file.
pub fn load_world_spec(path: impl AsRef<Path>) -> Result<WorldSpec, FileError> {
    let text = std::fs::read_to_string(path)?;
    parse_world_spec(&text)
}

/// Write a spec as file text.
pub fn save_world_spec(spec: &WorldSpec, path: impl AsRef<Path>) -> Result<(), FileError> {
    std::fs::write(path, format_world_spec(spec))?;
    Ok(())
}

/// Stable 64-bit FNV-1a hash of a spec's file form, for manifests.
pub fn spec_fingerprint(spec: &WorldSpec) -> u64 {
    let text = format_world_spec(spec);
    let mut hash = 0xcbf29ce484222325u64;
    for b in text.bytes() {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

/// Key-value manifest text used by dataset and eval outputs.
pub fn format_manifest(entries: &BTreeMap<String, String>) -> String {
    let mut out = String::new();
    for (k, v) in entries {
        out.push_str(&format!("{k} = {v}\n"));
    }
    out
}
