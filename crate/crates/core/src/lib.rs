//! Engine for a two-party haptic handshake.
//!
//! Both parties' finger flexion and wrist motion are sensed, exchanged over an
//! unreliable datagram link and rendered as a seven-site skin-deformation
//! intensity distribution. Sessions can be recorded and replayed
//! deterministically, and recorded handshakes feed an analysis pipeline
//! (five handshake features, PCA to three dimensions, Ward clustering) that
//! produces an emotion map used to classify new handshakes.

pub mod analysis;
pub mod bus;
pub mod config;
pub mod console;
pub mod model;
pub mod profile;
pub mod protocol;
pub mod recording;

pub use model::{
    grip_from_angles, stimulus_distribution, update_phase, ContactPhase, Grip, GripCalibration,
    JointAngles, MappingParams, SiteGroup, SiteId, StimulusDistribution,
};
