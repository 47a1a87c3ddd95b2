//! Synthetic labeled handshake dataset.
//!
//! Each (emotion, mode) pair has feature means and spreads. A trial draws
//! a feature vector, converts it to a scripted [`HandshakeProfile`] whose
//! features equal the draw in continuous time, and records a full loopback
//! session of that profile against an identical counterpart.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::features::HandshakeFeatures;
use super::{AnalysisError, Emotion, FEATURE_COUNT};
use crate::model::MappingParams;
use crate::profile::{HandshakeProfile, RepeatingProfile};
use crate::protocol::harness::{run_pair, PairConfig};
use crate::protocol::SessionSettings;
use crate::recording::{NoPacing, RecordingHeader, SessionRecording, EXTENSION};

pub const VIRTUAL_PARTICIPANTS: usize = 10;
pub const TRIALS_PER_EMOTION: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeSpec {
    pub emotion: Emotion,
    /// 1 or 2.
    pub subtendency: u8,
    /// Feature means in `FEATURE_NAMES` order.
    pub mean: [f64; FEATURE_COUNT],
    /// Standard deviations, same order and units.
    pub spread: [f64; FEATURE_COUNT],
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub modes: Vec<ModeSpec>,
    pub settings: SessionSettings,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), AnalysisError> {
        if self.modes.len() != 8 {
            return Err(AnalysisError::Infeasible(format!(
                "expected 8 modes, got {}",
                self.modes.len()
            )));
        }
        for e in Emotion::ALL {
            for sub in 1..=2 {
                let n = self
                    .modes
                    .iter()
                    .filter(|m| m.emotion == e && m.subtendency == sub)
                    .count();
                if n != 1 {
                    return Err(AnalysisError::Infeasible(format!(
                        "{e} mode {sub} defined {n} times"
                    )));
                }
            }
        }
        for m in &self.modes {
            if m.spread.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
                return Err(AnalysisError::Infeasible(format!(
                    "{} mode {}: spreads must be finite and non-negative",
                    m.emotion, m.subtendency
                )));
            }
            profile_for_features(&HandshakeFeatures::from_array(m.mean), &self.settings.mapping)
                .map_err(|e| {
                    AnalysisError::Infeasible(format!("{} mode {}: {e}", m.emotion, m.subtendency))
                })?;
        }
        Ok(())
    }

    fn mode(&self, e: Emotion, sub: u8) -> &ModeSpec {
        self.modes
            .iter()
            .find(|m| m.emotion == e && m.subtendency == sub)
            .expect("validated synth settings")
    }
}

/// Eight modes, two per emotion, separated by many spreads in every
/// standardized direction that matters.
pub fn default_synth_spec() -> SynthSpec {
    // grip_strength, grip_speed, swing_range, swing_speed, duration
    let table: [(Emotion, u8, [f64; FEATURE_COUNT]); 8] = [
        (Emotion::Angry, 1, [0.95, 6.0, 0.20, 1.2, 1.5]),
        (Emotion::Angry, 2, [0.90, 5.5, 0.16, 1.0, 2.2]),
        (Emotion::Happy, 1, [0.65, 3.0, 0.30, 1.4, 3.0]),
        (Emotion::Happy, 2, [0.60, 2.6, 0.26, 1.1, 3.8]),
        (Emotion::Relaxed, 1, [0.45, 1.6, 0.12, 0.30, 4.0]),
        (Emotion::Relaxed, 2, [0.50, 2.0, 0.14, 0.40, 3.0]),
        (Emotion::Sad, 1, [0.25, 1.0, 0.08, 0.12, 5.0]),
        (Emotion::Sad, 2, [0.30, 1.2, 0.08, 0.16, 6.5]),
    ];
    SynthSpec {
        modes: table
            .iter()
            .map(|&(emotion, subtendency, mean)| ModeSpec {
                emotion,
                subtendency,
                mean,
                spread: mean.map(|m| 0.02 * m),
            })
            .collect(),
        settings: SessionSettings::default(),
    }
}

/// Scripted handshake whose continuous-time features are exactly `f`
/// under the given clasp thresholds.
///
/// Grip closes and opens at `grip_speed` up to `grip_strength`; the hold
/// is sized so the clasp lasts `duration`. The wrist swings with amplitude
/// `swing_range / 2`, at the frequency whose total travel over the clasp
/// equals `swing_speed * duration`.
pub fn profile_for_features(
    f: &HandshakeFeatures,
    mapping: &MappingParams,
) -> Result<HandshakeProfile, AnalysisError> {
    let bad = |why: String| Err(AnalysisError::Infeasible(why));
    if f.to_array().iter().any(|v| !v.is_finite()) {
        return bad("non-finite feature".into());
    }
    if f.grip_strength <= mapping.contact_on || f.grip_strength > 1.0 {
        return bad(format!(
            "grip strength {} must lie in ({}, 1]",
            f.grip_strength, mapping.contact_on
        ));
    }
    if f.grip_speed <= 0.0 {
        return bad(format!("grip speed {} must be positive", f.grip_speed));
    }
    let closing = (f.grip_strength - mapping.contact_on) / f.grip_speed;
    let opening = (f.grip_strength - mapping.contact_off) / f.grip_speed;
    let hold = f.duration - closing - opening;
    if hold < 0.0 {
        return bad(format!(
            "duration {} too short for grip {} at speed {} (hold would be {hold:.3} s)",
            f.duration, f.grip_strength, f.grip_speed
        ));
    }
    if f.swing_range < 0.0 || f.swing_speed < 0.0 {
        return bad("negative swing feature".into());
    }
    let amplitude = f.swing_range / 2.0;
    let freq = if amplitude == 0.0 {
        if f.swing_speed > 0.0 {
            return bad("swing speed without swing range".into());
        }
        0.0
    } else {
        // travel over x half-periods of A cos is A (2 floor(x) + 1 - cos(pi frac(x)))
        let y = f.swing_speed * f.duration / amplitude;
        if y < 2.0 {
            return bad(format!(
                "swing speed {} too low to cover range {} within {} s",
                f.swing_speed, f.swing_range, f.duration
            ));
        }
        let whole = (y / 2.0).floor();
        let rem = y - 2.0 * whole;
        let half_periods = whole + (1.0 - rem).clamp(-1.0, 1.0).acos() / PI;
        half_periods / (2.0 * f.duration)
    };
    Ok(HandshakeProfile {
        peak_grip: f.grip_strength,
        close_speed: f.grip_speed,
        open_speed: f.grip_speed,
        hold_s: hold,
        swing_amplitude_m: amplitude,
        swing_freq_hz: freq,
        contact_on: mapping.contact_on,
        contact_off: mapping.contact_off,
        ..HandshakeProfile::default()
    })
}

/// Records one loopback session of `profile` against itself.
pub fn session_from_profile(
    profile: &HandshakeProfile,
    recording_id: &str,
    participant: &str,
    label: Option<Emotion>,
    settings: SessionSettings,
) -> Result<SessionRecording, AnalysisError> {
    profile.validate().map_err(AnalysisError::Infeasible)?;
    let mut header = RecordingHeader::new(recording_id, participant, settings);
    header.label = label;
    header
        .validate()
        .map_err(|e| AnalysisError::InvalidInput(e.to_string()))?;
    let total = profile.total_s();
    let script = RepeatingProfile {
        profile: *profile,
        period_s: total + 1.0,
    };
    let mut cfg = PairConfig::loopback(script, script, (total * 1e6).ceil() as u64);
    cfg.settings_a = settings;
    cfg.settings_b = settings;
    let mut rec = SessionRecording::new(header);
    run_pair(&cfg, Some(&mut rec), &mut NoPacing)
        .map_err(|e| AnalysisError::InvalidInput(e.to_string()))?;
    Ok(rec)
}

fn random_axis(rng: &mut ChaCha8Rng) -> [f64; 3] {
    loop {
        let v: [f64; 3] = std::array::from_fn(|_| StandardNormal.sample(rng));
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-6 {
            return v.map(|x| x / n);
        }
    }
}

/// The labeled dataset: every virtual participant performs every emotion
/// `TRIALS_PER_EMOTION` times. Odd-numbered participants express each
/// emotion in its first mode, even-numbered ones in its second.
pub fn synth_dataset(seed: u64, spec: &SynthSpec) -> Result<Vec<SessionRecording>, AnalysisError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut jobs = Vec::new();
    for p in 1..=VIRTUAL_PARTICIPANTS {
        let sub = if p % 2 == 1 { 1 } else { 2 };
        for e in Emotion::ALL {
            let mode = spec.mode(e, sub);
            for t in 1..=TRIALS_PER_EMOTION {
                let drawn: [f64; FEATURE_COUNT] = std::array::from_fn(|j| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    mode.mean[j] + mode.spread[j] * z
                });
                let mut f = HandshakeFeatures::from_array(drawn);
                // the strongest modes sit close to a full grip
                f.grip_strength = f.grip_strength.min(1.0);
                let mut profile = profile_for_features(&f, &spec.settings.mapping)?;
                profile.swing_axis = random_axis(&mut rng);
                profile.preroll_s = rng.random_range(0.2..0.5);
                let id = format!("p{p:02}_{e}_t{t}");
                jobs.push((profile, id, format!("p{p:02}"), e));
            }
        }
    }
    use rayon::prelude::*;
    jobs.par_iter()
        .map(|(profile, id, participant, e)| {
            session_from_profile(profile, id, participant, Some(*e), spec.settings)
        })
        .collect()
}

/// Writes each recording to `<dir>/<recording_id>.hsrec`.
pub fn write_dataset(dir: &Path, recordings: &[SessionRecording]) -> Result<(), AnalysisError> {
    std::fs::create_dir_all(dir)?;
    for rec in recordings {
        let path = dir.join(format!("{}.{EXTENSION}", rec.header.recording_id));
        rec.save(&path).map_err(|source| AnalysisError::Recording {
            path: path.display().to_string(),
            source,
        })?;
    }
    Ok(())
}

/// Loads every `.hsrec` file in `dir`, in file-name order.
pub fn load_dataset(dir: &Path) -> Result<Vec<SessionRecording>, AnalysisError> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == EXTENSION) && p.is_file())
        .collect();
    paths.sort();
    use rayon::prelude::*;
    paths
        .par_iter()
        .map(|path| {
            SessionRecording::load(path).map_err(|source| AnalysisError::Recording {
                path: path.display().to_string(),
                source,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_round_trip_timing() {
        let f = HandshakeFeatures {
            grip_strength: 0.8,
            grip_speed: 4.0,
            swing_range: 0.1,
            swing_speed: 0.5,
            duration: 2.0,
        };
        let m = MappingParams::default();
        let p = profile_for_features(&f, &m).unwrap();
        let d = p.t_contact_off().unwrap() - p.t_contact_on().unwrap();
        assert!((d - 2.0).abs() < 1e-12);
        // whole number of half periods: travel 1.0 = 20 * 0.05
        assert!((p.swing_freq_hz - 2.5).abs() < 1e-12);
    }

    #[test]
    fn infeasible_features() {
        let m = MappingParams::default();
        let mut f = HandshakeFeatures {
            grip_strength: 0.9,
            grip_speed: 1.0,
            swing_range: 0.1,
            swing_speed: 0.5,
            duration: 1.0,
        };
        assert!(matches!(profile_for_features(&f, &m), Err(AnalysisError::Infeasible(_))));
        f.duration = 3.0;
        assert!(profile_for_features(&f, &m).is_ok());
        f.grip_strength = 0.15;
        assert!(profile_for_features(&f, &m).is_err());
        f.grip_strength = 0.9;
        f.swing_speed = 0.01;
        assert!(profile_for_features(&f, &m).is_err());
    }

    #[test]
    fn default_spec_is_valid() {
        default_synth_spec().validate().unwrap();
        let mut spec = default_synth_spec();
        spec.modes.pop();
        assert!(spec.validate().is_err());
    }
}
