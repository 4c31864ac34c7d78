//! Sensory-commutativity object discovery.
//!
//! An embodied agent plays a short random action sequence in two different
//! orders from the same start state and compares the resulting first-person
//! views. Free space leaves the views identical, immovable structure makes
//! them differ everywhere, and a movable object it bumped differs only on the
//! object's silhouettes. A mask predictor trained on such experiences, plus a
//! small amount of post-processing, turns this into object detection without
//! any human labels.
//!
//! The crate bundles the deterministic 2D world simulator, the first-person
//! renderer, the experiment driver, the procedural dataset generator, a
//! from-scratch CNN mask predictor, the commutativity-map builder and the
//! evaluation harness. The `scod` CLI crate wires these into subcommands.

mod bytesio;
pub mod dataset;
pub mod eval;
pub mod geom;
pub mod layouts;
pub mod maskpred;
pub mod render;
pub mod scexp;
pub mod scod;
pub mod world;

pub use geom::{Bounds, Contact, Pose, Vec2};
pub use render::{Camera, Mask, Observation};
pub use scexp::{ActionSequence, Outcome, SCRecord, SeqConfig};
pub use scod::{CommutationMap, GridConfig, MaskPredictor, OutcomeKind, OutcomeThresholds};
pub use world::{Action, World, WorldError, WorldSpec, WorldState};
