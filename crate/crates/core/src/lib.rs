//! Multi-drone pedestrian surveillance at desk scale: a seeded scene
//! simulator, per-frame camera recalibration, view registration, bird's-eye
//! occupancy fusion, BEV tracking and CLEAR/identity metrics.

pub mod assignment;
pub mod calib;
pub mod error;
pub mod evalmetrics;
pub mod fuse;
pub mod geometry;
pub mod io;
pub mod pipeline;
pub mod register;
pub mod simworld;
pub mod track;

pub use error::{Error, Result};
pub use geometry::{
    ground_homography, image_to_ground, project_point, CameraIntrinsics, CameraPose, GroundHomography, Homography, ProjectionMatrix,
    WorldGrid,
};
pub use simworld::{Dataset, PositionRecord, ScenarioConfig};
