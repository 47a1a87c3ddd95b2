//! Emotion analysis: five handshake features per recording, z-scoring, PCA
//! to three dimensions, Ward clustering and the resulting emotion map.

mod features;
pub mod linalg;
mod map;
mod pca;
mod synth;
mod ward;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

pub use features::{extract_features, segment_clasp, ClaspEpisode, HandshakeFeatures, MIN_EPISODE_SAMPLES};
pub use map::{
    build_emotion_map, build_emotion_map_from_features, classify, classify_features,
    Classification, ClusterInfo, EmotionMap, MapConfig, MemberAssignment, MAP_EXTENSION,
};
pub use pca::{pca_fit, pca_fit_components, standardize, PcaModel, StandardizationParams};
pub use synth::{
    default_synth_spec, load_dataset, profile_for_features, session_from_profile, synth_dataset,
    write_dataset, ModeSpec, SynthSpec, TRIALS_PER_EMOTION, VIRTUAL_PARTICIPANTS,
};
pub use ward::{cut, ward_linkage, Dendrogram, Merge};

pub const FEATURE_COUNT: usize = 5;
pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "grip_strength",
    "grip_speed",
    "swing_range",
    "swing_speed",
    "duration",
];

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("segmentation: {0}")]
    Segmentation(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("degenerate rank {rank} (need at least {needed})")]
    DegenerateRank { rank: usize, needed: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("infeasible synthetic spec: {0}")]
    Infeasible(String),
    #[error("emotion map: {0}")]
    Map(String),
    #[error("recording {path}: {source}")]
    Recording {
        path: String,
        #[source]
        source: crate::recording::RecordingError,
    },
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// The four target emotions, in tie-break order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Emotion {
    Angry,
    Happy,
    Relaxed,
    Sad,
}

impl Emotion {
    pub const ALL: [Emotion; 4] = [Emotion::Angry, Emotion::Happy, Emotion::Relaxed, Emotion::Sad];

    pub fn name(self) -> &'static str {
        match self {
            Emotion::Angry => "angry",
            Emotion::Happy => "happy",
            Emotion::Relaxed => "relaxed",
            Emotion::Sad => "sad",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Emotion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error)]
#[error("unknown emotion {0:?} (expected angry, happy, relaxed or sad)")]
pub struct UnknownEmotion(String);

impl FromStr for Emotion {
    type Err = UnknownEmotion;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "angry" => Ok(Emotion::Angry),
            "happy" => Ok(Emotion::Happy),
            "relaxed" => Ok(Emotion::Relaxed),
            "sad" => Ok(Emotion::Sad),
            _ => Err(UnknownEmotion(s.to_string())),
        }
    }
}
