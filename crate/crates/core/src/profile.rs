//! Scripted hand motion: a grip ramp-hold-release with a wrist swing.
//!
//! Stands in for a second human in loopback sessions and generates the
//! sensor-level sessions of the synthetic dataset.

use rand::Rng;

use crate::model::{Grip, MappingParams};

/// One handshake as continuous-time grip and wrist trajectories.
///
/// Grip is 0 until `preroll_s`, rises linearly at `close_speed` to
/// `peak_grip`, holds for `hold_s`, then falls at `open_speed` back to 0.
/// The wrist swings as `amplitude * cos(2 pi f (t - t_on))` along
/// `swing_axis` while the grip is above the clasp thresholds (from the
/// moment it reaches `contact_on` until it falls to `contact_off`), and
/// rests at the swing's end points outside that window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HandshakeProfile {
    pub preroll_s: f64,
    pub peak_grip: f64,
    /// 1/s
    pub close_speed: f64,
    pub hold_s: f64,
    /// 1/s
    pub open_speed: f64,
    pub swing_amplitude_m: f64,
    pub swing_freq_hz: f64,
    /// Unit vector.
    pub swing_axis: [f64; 3],
    pub wrist_origin_m: [f64; 3],
    pub contact_on: f64,
    pub contact_off: f64,
    /// Time after the grip returns to zero before the session ends.
    pub postroll_s: f64,
}

impl Default for HandshakeProfile {
    fn default() -> Self {
        let m = MappingParams::default();
        Self {
            preroll_s: 0.3,
            peak_grip: 1.0,
            close_speed: 2.0,
            hold_s: 2.0,
            open_speed: 2.0,
            swing_amplitude_m: 0.05,
            swing_freq_hz: 2.0,
            swing_axis: [0.0, 1.0, 0.0],
            wrist_origin_m: [0.3, 1.0, 0.2],
            contact_on: m.contact_on,
            contact_off: m.contact_off,
            postroll_s: 0.5,
        }
    }
}

impl HandshakeProfile {
    pub fn validate(&self) -> Result<(), String> {
        let finite = [
            self.preroll_s,
            self.peak_grip,
            self.close_speed,
            self.hold_s,
            self.open_speed,
            self.swing_amplitude_m,
            self.swing_freq_hz,
            self.postroll_s,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err("non-finite profile parameter".into());
        }
        if self.preroll_s < 0.0 || self.hold_s < 0.0 || self.postroll_s < 0.0 {
            return Err("negative duration in profile".into());
        }
        if !(0.0..=1.0).contains(&self.peak_grip) {
            return Err(format!("peak grip {} outside [0, 1]", self.peak_grip));
        }
        if self.close_speed <= 0.0 || self.open_speed <= 0.0 {
            return Err("grip speeds must be positive".into());
        }
        if self.swing_amplitude_m < 0.0 || self.swing_freq_hz < 0.0 {
            return Err("swing amplitude and frequency must be non-negative".into());
        }
        let norm = self.swing_axis.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-9 {
            return Err("swing axis must be a unit vector".into());
        }
        Ok(())
    }

    pub fn t_peak(&self) -> f64 {
        self.preroll_s + self.peak_grip / self.close_speed
    }

    pub fn t_open_start(&self) -> f64 {
        self.t_peak() + self.hold_s
    }

    pub fn t_open_end(&self) -> f64 {
        self.t_open_start() + self.peak_grip / self.open_speed
    }

    pub fn total_s(&self) -> f64 {
        self.t_open_end() + self.postroll_s
    }

    /// Time the grip first reaches `contact_on` (None if it never does).
    pub fn t_contact_on(&self) -> Option<f64> {
        (self.peak_grip >= self.contact_on)
            .then(|| self.preroll_s + self.contact_on / self.close_speed)
    }

    /// Time the grip falls back to `contact_off` after the hold.
    pub fn t_contact_off(&self) -> Option<f64> {
        self.t_contact_on()
            .map(|_| self.t_open_start() + (self.peak_grip - self.contact_off) / self.open_speed)
    }

    pub fn grip_at(&self, t: f64) -> Grip {
        let g = if t < self.preroll_s {
            0.0
        } else if t < self.t_peak() {
            (t - self.preroll_s) * self.close_speed
        } else if t < self.t_open_start() {
            self.peak_grip
        } else if t < self.t_open_end() {
            self.peak_grip - (t - self.t_open_start()) * self.open_speed
        } else {
            0.0
        };
        Grip::saturating(g)
    }

    /// Signed displacement along the swing axis.
    pub fn swing_at(&self, t: f64) -> f64 {
        let (Some(on), Some(off)) = (self.t_contact_on(), self.t_contact_off()) else {
            return self.swing_amplitude_m;
        };
        let tc = t.clamp(on, off);
        self.swing_amplitude_m * (std::f64::consts::TAU * self.swing_freq_hz * (tc - on)).cos()
    }

    pub fn wrist_at(&self, t: f64) -> [f64; 3] {
        let s = self.swing_at(t);
        std::array::from_fn(|i| self.wrist_origin_m[i] + s * self.swing_axis[i])
    }

    pub fn wrist_mm_at(&self, t: f64) -> [i32; 3] {
        self.wrist_at(t).map(|m| (m * 1000.0).round() as i32)
    }
}

/// A profile repeated every `period_s` seconds, for long sessions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RepeatingProfile {
    pub profile: HandshakeProfile,
    pub period_s: f64,
}

impl RepeatingProfile {
    pub fn grip_at(&self, t: f64) -> Grip {
        self.profile.grip_at(t.rem_euclid(self.period_s))
    }

    pub fn wrist_mm_at(&self, t: f64) -> [i32; 3] {
        self.profile.wrist_mm_at(t.rem_euclid(self.period_s))
    }

    /// A randomized counterpart: one clasp per period, repeating back to back.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let profile = HandshakeProfile {
            preroll_s: rng.random_range(0.0..0.5),
            peak_grip: rng.random_range(0.3..1.0),
            close_speed: rng.random_range(1.0..6.0),
            hold_s: rng.random_range(0.2..2.0),
            open_speed: rng.random_range(1.0..6.0),
            swing_amplitude_m: rng.random_range(0.0..0.1),
            swing_freq_hz: rng.random_range(0.5..4.0),
            ..HandshakeProfile::default()
        };
        Self {
            profile,
            period_s: profile.total_s(),
        }
    }
}
