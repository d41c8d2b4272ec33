//! Floor-plan inference from walk trajectories on a discrete grid: the grid
//! representation, a procedural room generator, a walk simulator, boundary
//! graphs, post-processing, metrics and the three-stage cascade.

pub mod boundgraph;
pub mod dfpg;
pub mod error;
pub mod gen;
pub mod metrics;
pub mod pipeline;
pub mod raster;
pub mod regularize;
pub mod simwalk;

pub use dfpg::{CellLabel, CellMap, Dfpg, GridSpec, SegmentId, SegmentLabel, Trajectory};
pub use error::{Error, Result};
pub use gen::{generate_room, GenConfig};
pub use pipeline::{run_cascade, CascadeConfig, FloorPlan, Models};
pub use simwalk::{simulate_walk, SimConfig};
