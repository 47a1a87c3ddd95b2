//! The five handshake features, computed from one recorded clasp episode.
//!
//! * `grip_strength`: peak own grip during the clasp.
//! * `grip_speed`: peak rate of change of own grip while closing, after a
//!   trailing 5-sample moving average, in 1/s.
//! * `swing_range`: peak-to-peak wrist displacement along the direction of
//!   largest wrist-position variance during the clasp, in m.
//! * `swing_speed`: mean absolute wrist velocity along that direction over
//!   the clasp, in m/s.
//! * `duration`: clasp start to release, in s.
//!
//! The clasp is located by re-running the tick rule over the recording, so
//! it always agrees with what the session rendered.

use super::linalg::{covariance, dot, symmetric_eigen};
use super::{AnalysisError, FEATURE_COUNT};
use crate::model::{ContactPhase, Grip};
use crate::recording::{RecordBody, SessionRecording};
use crate::protocol::SessionEngine;

/// Fewest local samples a clasp may contain.
pub const MIN_EPISODE_SAMPLES: usize = 10;
const SMOOTHING_WINDOW: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HandshakeFeatures {
    pub grip_strength: f64,
    pub grip_speed: f64,
    pub swing_range: f64,
    pub swing_speed: f64,
    pub duration: f64,
}

impl HandshakeFeatures {
    pub fn to_array(&self) -> [f64; FEATURE_COUNT] {
        [
            self.grip_strength,
            self.grip_speed,
            self.swing_range,
            self.swing_speed,
            self.duration,
        ]
    }

    pub fn from_array(a: [f64; FEATURE_COUNT]) -> Self {
        Self {
            grip_strength: a[0],
            grip_speed: a[1],
            swing_range: a[2],
            swing_speed: a[3],
            duration: a[4],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClaspEpisode {
    /// First tick rendered as Clasped.
    pub t_clasp_us: u64,
    /// First tick after the clasp rendered as Released.
    pub t_release_us: u64,
}

/// Finds the single clasp episode of a recording.
pub fn segment_clasp(rec: &SessionRecording) -> Result<ClaspEpisode, AnalysisError> {
    let mut engine = SessionEngine::new(rec.header.settings);
    let mut episodes: Vec<(u64, Option<u64>)> = Vec::new();
    for r in rec.records() {
        match &r.body {
            RecordBody::Remote(s) => {
                engine.ingest(*s, r.t_us);
            }
            RecordBody::Local(s) => {
                let prev = engine.phase();
                let out = engine.tick(s, r.t_us);
                match (prev, out.phase) {
                    (ContactPhase::Idle, ContactPhase::Clasped) => episodes.push((r.t_us, None)),
                    (ContactPhase::Clasped, ContactPhase::Released) => {
                        if let Some(last) = episodes.last_mut() {
                            last.1 = Some(r.t_us);
                        }
                    }
                    _ => {}
                }
            }
            _ => {}
        }
    }
    match episodes.as_slice() {
        [] => Err(AnalysisError::Segmentation("no clasp episode".into())),
        [(start, Some(end))] => Ok(ClaspEpisode {
            t_clasp_us: *start,
            t_release_us: *end,
        }),
        [(_, None)] => Err(AnalysisError::Segmentation(
            "clasp episode never released".into(),
        )),
        many => Err(AnalysisError::Segmentation(format!(
            "{} clasp episodes, expected exactly one",
            many.len()
        ))),
    }
}

pub fn extract_features(rec: &SessionRecording) -> Result<HandshakeFeatures, AnalysisError> {
    let episode = segment_clasp(rec)?;
    let samples: Vec<(f64, f64, [f64; 3])> = rec
        .local_samples()
        .map(|(t, s)| {
            (
                t as f64 / 1e6,
                Grip::from_milli(s.grip_milli).value(),
                s.wrist_mm.map(|mm| f64::from(mm) / 1000.0),
            )
        })
        .collect();
    let t0 = episode.t_clasp_us as f64 / 1e6;
    let t1 = episode.t_release_us as f64 / 1e6;
    let in_clasp: Vec<usize> = samples
        .iter()
        .enumerate()
        .filter(|(_, (t, _, _))| *t >= t0 && *t <= t1)
        .map(|(i, _)| i)
        .collect();
    if in_clasp.len() < MIN_EPISODE_SAMPLES {
        return Err(AnalysisError::InsufficientData(format!(
            "clasp spans {} samples, need {}",
            in_clasp.len(),
            MIN_EPISODE_SAMPLES
        )));
    }
    let first = in_clasp[0];
    let last = *in_clasp.last().expect("non-empty");

    // peak grip and where it is first reached
    let mut i_peak = first;
    for i in first..=last {
        if samples[i].1 > samples[i_peak].1 {
            i_peak = i;
        }
    }
    let grip_strength = samples[i_peak].1;

    // smoothed closing rate
    let smoothed: Vec<Option<f64>> = (0..samples.len())
        .map(|i| {
            (i + 1 >= SMOOTHING_WINDOW).then(|| {
                samples[i + 1 - SMOOTHING_WINDOW..=i]
                    .iter()
                    .map(|s| s.1)
                    .sum::<f64>()
                    / SMOOTHING_WINDOW as f64
            })
        })
        .collect();
    let ramp_end = (i_peak + SMOOTHING_WINDOW - 1).min(samples.len() - 1);
    let mut grip_speed: f64 = 0.0;
    for i in 0..ramp_end {
        if let (Some(a), Some(b)) = (smoothed[i], smoothed[i + 1]) {
            let dt = samples[i + 1].0 - samples[i].0;
            if dt > 0.0 {
                grip_speed = grip_speed.max((b - a) / dt);
            }
        }
    }

    // swing along the principal direction of wrist motion
    let positions: Vec<Vec<f64>> = in_clasp.iter().map(|&i| samples[i].2.to_vec()).collect();
    let eig = symmetric_eigen(&covariance(&positions))?;
    let axis = &eig.vectors[0];
    let projected: Vec<f64> = positions.iter().map(|p| dot(p, axis)).collect();
    let (lo, hi) = projected
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let mut swing_range = hi - lo;
    let travel: f64 = projected.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
    let span = samples[last].0 - samples[first].0;
    let mut swing_speed = if span > 0.0 { travel / span } else { 0.0 };
    // a motionless wrist projects to a constant up to rounding
    if swing_range < 1e-12 {
        swing_range = 0.0;
        swing_speed = 0.0;
    }

    Ok(HandshakeFeatures {
        grip_strength,
        grip_speed,
        swing_range,
        swing_speed,
        duration: t1 - t0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::session_from_profile;
    use crate::profile::HandshakeProfile;
    use crate::protocol::SessionSettings;

    fn features_of(p: HandshakeProfile) -> Result<HandshakeFeatures, AnalysisError> {
        let rec = session_from_profile(&p, "t", "p", None, SessionSettings::default()).unwrap();
        extract_features(&rec)
    }

    #[test]
    fn motionless_wrist() {
        let f = features_of(HandshakeProfile {
            swing_amplitude_m: 0.0,
            ..HandshakeProfile::default()
        })
        .unwrap();
        assert_eq!(f.swing_range, 0.0);
        assert_eq!(f.swing_speed, 0.0);
        assert_eq!(f.grip_strength, 1.0);
    }

    #[test]
    fn weak_grip_is_a_segmentation_error() {
        let err = features_of(HandshakeProfile {
            peak_grip: 0.15,
            ..HandshakeProfile::default()
        })
        .unwrap_err();
        assert!(matches!(err, AnalysisError::Segmentation(_)));
    }

    #[test]
    fn very_short_clasp_is_insufficient() {
        let err = features_of(HandshakeProfile {
            peak_grip: 0.25,
            close_speed: 10.0,
            open_speed: 10.0,
            hold_s: 0.0,
            ..HandshakeProfile::default()
        })
        .unwrap_err();
        assert!(matches!(err, AnalysisError::InsufficientData(_)), "{err:?}");
    }

    #[test]
    fn two_handshakes_rejected() {
        use crate::recording::Record;
        let p = HandshakeProfile::default();
        let rec = session_from_profile(&p, "t", "p", None, SessionSettings::default()).unwrap();
        // splice a second copy after the first, shifted in time
        let shift = rec.last_t_us().unwrap() + 10_000;
        let mut doubled = rec.clone();
        for r in rec.records() {
            let mut r: Record = r.clone();
            r.t_us += shift;
            if let RecordBody::Stimulus(ref mut out) = r.body {
                out.t_us += shift;
            }
            if let RecordBody::Local(ref mut s) | RecordBody::Remote(ref mut s) = r.body {
                s.seq += 100_000;
            }
            doubled.append(r).unwrap();
        }
        assert!(matches!(
            extract_features(&doubled),
            Err(AnalysisError::Segmentation(_))
        ));
    }

    #[test]
    fn unreleased_clasp_rejected() {
        let p = HandshakeProfile {
            hold_s: 5.0,
            ..HandshakeProfile::default()
        };
        let rec = session_from_profile(&p, "t", "p", None, SessionSettings::default()).unwrap();
        let mut cut = SessionRecording::new(rec.header.clone());
        for r in rec.records().iter().filter(|r| r.t_us < 2_000_000) {
            cut.append(r.clone()).unwrap();
        }
        assert!(matches!(
            segment_clasp(&cut),
            Err(AnalysisError::Segmentation(_))
        ));
    }
}
