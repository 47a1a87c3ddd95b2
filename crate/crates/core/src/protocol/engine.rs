//! Per-peer session state and the tick rule.

use std::collections::BTreeMap;

use thiserror::Error;

use super::wire::{SensorSample, WireMessage};
use crate::model::{
    grip_from_angles, stimulus_distribution, update_phase, ContactPhase, Grip, GripCalibration,
    JointAngles, MappingParams, ModelError, StimulusDistribution,
};

pub const DEFAULT_TICK_US: u64 = 10_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ClockError {
    #[error("timestamp regression in clock exchange")]
    TimestampRegression,
}

/// Four-timestamp offset estimate `((t2 - t1) + (t3 - t4)) / 2`, truncated
/// toward zero. Positive means the remote clock is ahead.
pub fn clock_offset(t1: u64, t2: u64, t3: u64, t4: u64) -> Result<i64, ClockError> {
    if t4 < t1 || t3 < t2 {
        return Err(ClockError::TimestampRegression);
    }
    let sum = (i128::from(t2) - i128::from(t1)) + (i128::from(t3) - i128::from(t4));
    Ok((sum / 2) as i64)
}

/// How long remote grip is trusted after the last accepted sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LossPolicy {
    /// Full value held up to this staleness.
    pub hold_us: u64,
    /// Linear fade reaches zero at this staleness.
    pub fade_us: u64,
}

impl Default for LossPolicy {
    fn default() -> Self {
        Self {
            hold_us: 150_000,
            fade_us: 500_000,
        }
    }
}

impl LossPolicy {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.fade_us <= self.hold_us {
            return Err(ModelError::InvalidParams(format!(
                "fade window ({} us) must end after the hold window ({} us)",
                self.fade_us, self.hold_us
            )));
        }
        Ok(())
    }

    /// Opponent grip after applying hold-then-fade, and whether it is stale.
    pub fn apply(&self, last: Grip, staleness_us: u64) -> (Grip, bool) {
        if staleness_us <= self.hold_us {
            (last, false)
        } else if staleness_us <= self.fade_us {
            let window = (self.fade_us - self.hold_us) as f64;
            let into = (staleness_us - self.hold_us) as f64;
            (Grip::saturating(last.value() * (1.0 - into / window)), true)
        } else {
            (Grip::ZERO, true)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ingest {
    Accepted,
    /// Late or duplicate sequence number.
    Dropped,
}

/// What we know about the other party.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RemoteState {
    pub latest: Option<SensorSample>,
    /// Local receive time of `latest`.
    pub t_recv_us: u64,
    /// Smoothed clock offset (remote minus local), once any exchange completed.
    pub offset_us: Option<i64>,
    pub accepted: u64,
    pub dropped: u64,
}

impl RemoteState {
    /// Last-value-wins: a sample is taken only if its sequence number is
    /// newer than everything seen so far.
    pub fn ingest(&mut self, sample: SensorSample, now: u64) -> Ingest {
        match self.latest {
            Some(prev) if sample.seq <= prev.seq => {
                self.dropped += 1;
                Ingest::Dropped
            }
            _ => {
                self.latest = Some(sample);
                self.t_recv_us = now;
                self.accepted += 1;
                Ingest::Accepted
            }
        }
    }

    pub fn staleness(&self, now: u64) -> Option<u64> {
        self.latest.map(|_| now.saturating_sub(self.t_recv_us))
    }

    /// Folds a raw offset sample into the exponential moving average
    /// (alpha = 0.1, integer arithmetic). The first sample seeds the average.
    pub fn record_offset(&mut self, sample_us: i64) {
        self.offset_us = Some(match self.offset_us {
            None => sample_us,
            Some(prev) => prev + (sample_us - prev) / 10,
        });
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TickOutput {
    pub t_us: u64,
    pub phase: ContactPhase,
    pub dist: StimulusDistribution,
    pub own_grip: Grip,
    pub opp_grip: Grip,
    pub stale: bool,
}

/// One tick of the rendering rule: resolve the opponent's grip under the
/// loss policy, advance the phase, map to the seven sites.
pub fn tick(
    own: &SensorSample,
    remote: &RemoteState,
    prev_phase: ContactPhase,
    p: &MappingParams,
    loss: &LossPolicy,
    now: u64,
) -> TickOutput {
    let own_grip = Grip::from_milli(own.grip_milli);
    let (opp_grip, stale) = match (remote.latest, remote.staleness(now)) {
        (Some(s), Some(age)) => loss.apply(Grip::from_milli(s.grip_milli), age),
        _ => (Grip::ZERO, false),
    };
    let phase = update_phase(own_grip, opp_grip, prev_phase, p);
    TickOutput {
        t_us: now,
        phase,
        dist: stimulus_distribution(own_grip, opp_grip, phase, p),
        own_grip,
        opp_grip,
        stale,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SessionSettings {
    pub mapping: MappingParams,
    pub calibration: GripCalibration,
    pub loss: LossPolicy,
}

/// Session state for one party. Owned by a single tick loop; network input
/// arrives as already-decoded messages through [`SessionEngine::handle`].
#[derive(Debug, Clone)]
pub struct SessionEngine {
    settings: SessionSettings,
    remote: RemoteState,
    phase: ContactPhase,
    next_seq: u32,
    next_nonce: u32,
    pending_pings: BTreeMap<u32, u64>,
    peer_hello: Option<(u32, u16)>,
    peer_bye: bool,
    clock_rejects: u64,
}

impl SessionEngine {
    pub fn new(settings: SessionSettings) -> Self {
        Self {
            settings,
            remote: RemoteState::default(),
            phase: ContactPhase::Idle,
            next_seq: 0,
            next_nonce: 0,
            pending_pings: BTreeMap::new(),
            peer_hello: None,
            peer_bye: false,
            clock_rejects: 0,
        }
    }

    pub fn settings(&self) -> &SessionSettings {
        &self.settings
    }

    pub fn remote(&self) -> &RemoteState {
        &self.remote
    }

    pub fn phase(&self) -> ContactPhase {
        self.phase
    }

    pub fn peer_hello(&self) -> Option<(u32, u16)> {
        self.peer_hello
    }

    pub fn peer_said_bye(&self) -> bool {
        self.peer_bye
    }

    pub fn clock_rejects(&self) -> u64 {
        self.clock_rejects
    }

    /// Builds the next outgoing sample from raw joint angles.
    pub fn sample_from_angles(
        &mut self,
        angles: JointAngles,
        wrist_mm: [i32; 3],
        now: u64,
    ) -> Result<SensorSample, ModelError> {
        let grip = grip_from_angles(angles, &self.settings.calibration)?;
        Ok(self.sample_with_grip(angles, grip, wrist_mm, now))
    }

    /// Builds the next outgoing sample when the grip is already known
    /// (scripted input, console input). Angles are carried for display.
    pub fn sample_with_grip(
        &mut self,
        angles: JointAngles,
        grip: Grip,
        wrist_mm: [i32; 3],
        now: u64,
    ) -> SensorSample {
        let seq = self.next_seq;
        self.next_seq = self.next_seq.wrapping_add(1);
        let cdeg = |deg: f64| (deg * 100.0).round().clamp(i16::MIN as f64, i16::MAX as f64) as i16;
        SensorSample {
            seq,
            t_send_us: now,
            thumb_cdeg: cdeg(angles.thumb_ip_deg),
            middle_cdeg: cdeg(angles.middle_pip_deg),
            grip_milli: grip.to_milli(),
            wrist_mm,
            phase: self.phase.as_u8(),
        }
    }

    pub fn ingest(&mut self, sample: SensorSample, now: u64) -> Ingest {
        self.remote.ingest(sample, now)
    }

    pub fn next_ping(&mut self, now: u64) -> WireMessage {
        let nonce = self.next_nonce;
        self.next_nonce = self.next_nonce.wrapping_add(1);
        self.pending_pings.insert(nonce, now);
        // bound the table if pongs are being lost
        while self.pending_pings.len() > 16 {
            let oldest = *self.pending_pings.keys().next().expect("non-empty");
            self.pending_pings.remove(&oldest);
        }
        WireMessage::ClockPing { nonce, t1: now }
    }

    /// Applies one decoded message received at local time `now`. Returns a
    /// reply to send back, if any.
    pub fn handle(&mut self, msg: WireMessage, now: u64) -> Option<WireMessage> {
        match msg {
            WireMessage::Sensor(s) => {
                self.ingest(s, now);
                None
            }
            WireMessage::ClockPing { nonce, t1 } => Some(WireMessage::ClockPong {
                nonce,
                t1,
                t2: now,
                t3: now,
            }),
            WireMessage::ClockPong { nonce, t1, t2, t3 } => {
                if self.pending_pings.remove(&nonce) != Some(t1) {
                    self.clock_rejects += 1;
                    return None;
                }
                match clock_offset(t1, t2, t3, now) {
                    Ok(off) => self.remote.record_offset(off),
                    Err(_) => self.clock_rejects += 1,
                }
                None
            }
            WireMessage::Hello { peer_id, tick_hz } => {
                self.peer_hello = Some((peer_id, tick_hz));
                None
            }
            WireMessage::Bye => {
                self.peer_bye = true;
                None
            }
        }
    }

    pub fn tick(&mut self, own: &SensorSample, now: u64) -> TickOutput {
        let out = tick(
            own,
            &self.remote,
            self.phase,
            &self.settings.mapping,
            &self.settings.loss,
            now,
        );
        self.phase = out.phase;
        out
    }
}
