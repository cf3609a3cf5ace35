//! Seeded simulation of the surveillance scene: arena, walking pedestrians,
//! an optional obstruction, ground checkerboards, and patrolling drones with
//! PID-steered gimbals.

pub mod capture;
pub mod config;
pub mod control;
pub mod dataset;
pub mod los;
pub mod world;

pub use capture::{capture_frame, capture_rng, CaptureTruth, FeatureSet, FrameCapture, PedestrianObservation, Scene};
pub use config::{Airspace, CameraSpec, Checkerboard, ScenarioConfig};
pub use control::{pid_step, velocity_command, PidGains, PidState};
pub use dataset::{generate, generate_dataset, CalibRecord, Dataset, PositionRecord};
pub use los::{line_of_sight, Aabb};
pub use world::{DroneState, Landmark, Pedestrian, WorldState};
