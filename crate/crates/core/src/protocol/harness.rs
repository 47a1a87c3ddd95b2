//! In-process two-peer session over a simulated datagram link.
//!
//! Used for loopback sessions against a scripted counterpart and for the
//! network impairment harness (loss, delay jitter, corruption). Time is
//! virtual: every datagram carries a delivery time on peer A's clock and is
//! handed to the receiver in time order, so a run is fully determined by its
//! configuration and seed. A [`Pacer`] can stretch the run to wall-clock time.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::{decode_message, encode_message, SessionEngine, SessionSettings, WireMessage};
use crate::model::{ContactPhase, JointAngles};
use crate::profile::RepeatingProfile;
use crate::recording::{Pacer, Record, RecordSink, RecordingError, EVENT_CLASP, EVENT_RELEASE, MEDIA_START};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid harness configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Recording(#[from] RecordingError),
}

/// One-way link behaviour, applied independently in both directions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkImpairment {
    /// Probability a datagram is dropped.
    pub loss: f64,
    /// Mean one-way delay.
    pub delay_us: u64,
    /// Delay is uniform in `delay_us ± jitter_us`.
    pub jitter_us: u64,
    /// Probability one random byte of a datagram is flipped.
    pub corrupt: f64,
}

impl LinkImpairment {
    pub const PERFECT: LinkImpairment = LinkImpairment {
        loss: 0.0,
        delay_us: 0,
        jitter_us: 0,
        corrupt: 0.0,
    };

    pub fn validate(&self) -> Result<(), HarnessError> {
        for (name, p) in [("loss", self.loss), ("corrupt", self.corrupt)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(HarnessError::Config(format!("{name} probability {p} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairConfig {
    pub settings_a: SessionSettings,
    pub settings_b: SessionSettings,
    /// Peer A's own hand.
    pub script_a: RepeatingProfile,
    /// The counterpart's hand.
    pub script_b: RepeatingProfile,
    pub link: LinkImpairment,
    pub tick_us: u64,
    /// Ticks run for `[0, duration_us)`.
    pub duration_us: u64,
    /// Peer B stops transmitting from this time on (A clock).
    pub silence_at_us: Option<u64>,
    pub ping_interval_us: u64,
    /// B's clock minus A's clock.
    pub clock_skew_us: i64,
    pub seed: u64,
}

impl PairConfig {
    pub fn loopback(script_a: RepeatingProfile, script_b: RepeatingProfile, duration_us: u64) -> Self {
        Self {
            settings_a: SessionSettings::default(),
            settings_b: SessionSettings::default(),
            script_a,
            script_b,
            link: LinkImpairment::PERFECT,
            tick_us: super::DEFAULT_TICK_US,
            duration_us,
            silence_at_us: None,
            ping_interval_us: 1_000_000,
            clock_skew_us: 0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PairReport {
    pub ticks: u64,
    /// Ticks evaluated while B was still transmitting.
    pub active_ticks: u64,
    /// Of those, ticks where A rendered with stale remote state.
    pub stale_ticks: u64,
    pub datagrams_sent: u64,
    pub datagrams_lost: u64,
    pub datagrams_corrupted: u64,
    pub datagrams_delivered: u64,
    pub decode_errors: BTreeMap<String, u64>,
    pub accepted_a: u64,
    pub dropped_a: u64,
    pub clasp_episodes_a: u64,
    pub last_receipt_us: Option<u64>,
    /// Delay from A's last accepted sample to the first tick from which A's
    /// distribution stays all-zero until the end of the run.
    pub zero_after_last_receipt_us: Option<u64>,
    pub offset_estimate_us: Option<i64>,
    pub max_abs_intensity: f64,
}

impl PairReport {
    pub fn stale_fraction(&self) -> f64 {
        if self.active_ticks == 0 {
            0.0
        } else {
            self.stale_ticks as f64 / self.active_ticks as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Peer {
    A,
    B,
}

/// (deliver_at, ordinal, destination, bytes), earliest first.
type InFlight = Reverse<(u64, u64, Peer, Vec<u8>)>;

struct Link {
    impairment: LinkImpairment,
    rng: ChaCha8Rng,
    queue: BinaryHeap<InFlight>,
    ordinal: u64,
    sent: u64,
    lost: u64,
    corrupted: u64,
}

impl Link {
    fn send(&mut self, to: Peer, msg: &WireMessage, now: u64) {
        self.sent += 1;
        let imp = self.impairment;
        if imp.loss > 0.0 && self.rng.random::<f64>() < imp.loss {
            self.lost += 1;
            return;
        }
        let mut bytes = encode_message(msg);
        if imp.corrupt > 0.0 && self.rng.random::<f64>() < imp.corrupt {
            let i = self.rng.random_range(0..bytes.len());
            let flip: u8 = self.rng.random_range(1..=255);
            bytes[i] ^= flip;
            self.corrupted += 1;
        }
        let delay = if imp.jitter_us > 0 {
            let lo = imp.delay_us.saturating_sub(imp.jitter_us);
            let hi = imp.delay_us + imp.jitter_us;
            self.rng.random_range(lo..=hi)
        } else {
            imp.delay_us
        };
        self.ordinal += 1;
        self.queue
            .push(Reverse((now + delay, self.ordinal, to, bytes)));
    }

    fn pop_due(&mut self, now: u64) -> Option<(u64, Peer, Vec<u8>)> {
        match self.queue.peek() {
            Some(Reverse((at, ..))) if *at <= now => {
                let Reverse((at, _, to, bytes)) = self.queue.pop().expect("peeked");
                Some((at, to, bytes))
            }
            _ => None,
        }
    }
}

fn b_clock(t_a: u64, skew: i64) -> u64 {
    (t_a as i64 + skew).max(0) as u64
}

/// Runs a two-peer session and records peer A's view into `recorder`.
pub fn run_pair(
    cfg: &PairConfig,
    mut recorder: Option<&mut dyn RecordSink>,
    pacer: &mut dyn Pacer,
) -> Result<PairReport, HarnessError> {
    cfg.link.validate()?;
    if cfg.tick_us == 0 {
        return Err(HarnessError::Config("tick period must be positive".into()));
    }
    cfg.script_a
        .profile
        .validate()
        .and(cfg.script_b.profile.validate())
        .map_err(HarnessError::Config)?;
    let mut a = SessionEngine::new(cfg.settings_a);
    let mut b = SessionEngine::new(cfg.settings_b);
    let mut link = Link {
        impairment: cfg.link,
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        queue: BinaryHeap::new(),
        ordinal: 0,
        sent: 0,
        lost: 0,
        corrupted: 0,
    };
    let mut report = PairReport::default();
    // last tick time at which A's distribution was non-zero
    let mut last_nonzero: Option<u64> = None;
    let mut tick_times: Vec<u64> = Vec::new();

    if let Some(r) = recorder.as_deref_mut() {
        r.record(Record::event(0, MEDIA_START))?;
    }
    a.handle(WireMessage::Hello { peer_id: 2, tick_hz: 0 }, 0);

    let mut t = 0u64;
    while t < cfg.duration_us {
        pacer.wait_until(t);
        let secs = t as f64 / 1e6;
        let b_active = cfg.silence_at_us.is_none_or(|s| t < s);

        let sample_a = {
            let grip = cfg.script_a.grip_at(secs);
            let angles = cfg.settings_a.calibration.angles_for_grip(grip);
            a.sample_with_grip(angles, grip, cfg.script_a.wrist_mm_at(secs), t)
        };
        let sample_b = {
            let grip = cfg.script_b.grip_at(secs);
            let angles: JointAngles = cfg.settings_b.calibration.angles_for_grip(grip);
            b.sample_with_grip(angles, grip, cfg.script_b.wrist_mm_at(secs), b_clock(t, cfg.clock_skew_us))
        };

        link.send(Peer::B, &WireMessage::Sensor(sample_a), t);
        if b_active {
            link.send(Peer::A, &WireMessage::Sensor(sample_b), t);
        }
        if cfg.ping_interval_us > 0 && t.is_multiple_of(cfg.ping_interval_us) {
            let ping = a.next_ping(t);
            link.send(Peer::B, &ping, t);
            if b_active {
                let ping = b.next_ping(b_clock(t, cfg.clock_skew_us));
                link.send(Peer::A, &ping, t);
            }
        }

        while let Some((at, to, bytes)) = link.pop_due(t) {
            report.datagrams_delivered += 1;
            let msg = match decode_message(&bytes) {
                Ok(m) => m,
                Err(e) => {
                    *report
                        .decode_errors
                        .entry(e.category().to_string())
                        .or_default() += 1;
                    continue;
                }
            };
            match to {
                Peer::A => {
                    if let (WireMessage::Sensor(s), Some(r)) = (&msg, recorder.as_deref_mut()) {
                        r.record(Record::remote(at, *s))?;
                    }
                    if let Some(reply) = a.handle(msg, at) {
                        link.send(Peer::B, &reply, at);
                    }
                }
                Peer::B => {
                    let reply = b.handle(msg, b_clock(at, cfg.clock_skew_us));
                    let silent = cfg.silence_at_us.is_some_and(|s| at >= s);
                    if let (Some(reply), false) = (reply, silent) {
                        link.send(Peer::A, &reply, at);
                    }
                }
            }
        }

        let prev_phase = a.phase();
        let out = a.tick(&sample_a, t);
        b.tick(&sample_b, b_clock(t, cfg.clock_skew_us));
        if let Some(r) = recorder.as_deref_mut() {
            r.record(Record::local(t, sample_a))?;
            r.record(Record::stimulus(out))?;
            if prev_phase != out.phase {
                match out.phase {
                    ContactPhase::Clasped => r.record(Record::event(t, EVENT_CLASP))?,
                    ContactPhase::Released => r.record(Record::event(t, EVENT_RELEASE))?,
                    ContactPhase::Idle => {}
                }
            }
        }
        if prev_phase != ContactPhase::Clasped && out.phase == ContactPhase::Clasped {
            report.clasp_episodes_a += 1;
        }
        report.ticks += 1;
        if b_active {
            report.active_ticks += 1;
            report.stale_ticks += u64::from(out.stale);
        }
        if !out.dist.is_zero() {
            last_nonzero = Some(t);
        }
        let peak = out.dist.intensity.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        report.max_abs_intensity = report.max_abs_intensity.max(peak);
        tick_times.push(t);
        t += cfg.tick_us;
    }

    report.datagrams_sent = link.sent;
    report.datagrams_lost = link.lost;
    report.datagrams_corrupted = link.corrupted;
    report.accepted_a = a.remote().accepted;
    report.dropped_a = a.remote().dropped;
    report.offset_estimate_us = a.remote().offset_us;
    if a.remote().latest.is_some() {
        let last = a.remote().t_recv_us;
        report.last_receipt_us = Some(last);
        let zero_from = match last_nonzero {
            None => tick_times.iter().copied().find(|&tt| tt >= last),
            Some(nz) => tick_times.iter().copied().find(|&tt| tt > nz),
        };
        report.zero_after_last_receipt_us = zero_from.map(|z| z.saturating_sub(last));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::HandshakeProfile;
    use crate::recording::{replay, NoPacing, NullSink, RecordingHeader, SessionRecording};

    fn script(period_s: f64) -> RepeatingProfile {
        RepeatingProfile {
            profile: HandshakeProfile::default(),
            period_s,
        }
    }

    #[test]
    fn perfect_loopback_single_clasp() {
        let cfg = PairConfig::loopback(script(10.0), script(10.0), 4_500_000);
        let mut rec = SessionRecording::new(RecordingHeader::new("t", "p", cfg.settings_a));
        let report = run_pair(&cfg, Some(&mut rec), &mut NoPacing).unwrap();
        assert_eq!(report.ticks, 450);
        assert_eq!(report.clasp_episodes_a, 1);
        assert_eq!(report.stale_ticks, 0);
        assert_eq!(report.dropped_a, 0);
        assert_eq!(report.max_abs_intensity, 1.0);
        let replayed = replay(&rec, &mut NullSink, &mut NoPacing, 1.0).unwrap();
        assert!(replayed.is_consistent());
        assert_eq!(replayed.trace.len(), 450);
        assert_eq!(replayed.events[0].name, MEDIA_START);
    }

    #[test]
    fn same_seed_same_report() {
        let mut cfg = PairConfig::loopback(script(4.0), script(4.5), 6_000_000);
        cfg.link = LinkImpairment {
            loss: 0.2,
            delay_us: 40_000,
            jitter_us: 30_000,
            corrupt: 0.05,
        };
        cfg.seed = 99;
        let r1 = run_pair(&cfg, None, &mut NoPacing).unwrap();
        let r2 = run_pair(&cfg, None, &mut NoPacing).unwrap();
        assert_eq!(r1, r2);
        assert!(r1.datagrams_lost > 0);
        assert!(r1.dropped_a > 0, "jitter should reorder some datagrams");
        assert!(!r1.decode_errors.is_empty());
    }

    #[test]
    fn clock_offset_estimated() {
        let mut cfg = PairConfig::loopback(script(4.0), script(4.0), 5_000_000);
        cfg.clock_skew_us = 12_345;
        cfg.link.delay_us = 20_000;
        let r = run_pair(&cfg, None, &mut NoPacing).unwrap();
        assert_eq!(r.offset_estimate_us, Some(12_345));
    }

    #[test]
    fn silence_drains_to_zero() {
        // A keeps gripping; B stops mid-hold
        let hold = HandshakeProfile {
            hold_s: 30.0,
            ..HandshakeProfile::default()
        };
        let s = RepeatingProfile {
            profile: hold,
            period_s: 100.0,
        };
        let mut cfg = PairConfig::loopback(s, s, 3_000_000);
        cfg.silence_at_us = Some(2_000_000);
        let r = run_pair(&cfg, None, &mut NoPacing).unwrap();
        let z = r.zero_after_last_receipt_us.unwrap();
        assert!(z <= 500_000, "took {z} us");
        assert!(z > 150_000);
    }

    #[test]
    fn rejects_bad_config() {
        let mut cfg = PairConfig::loopback(script(4.0), script(4.0), 1_000);
        cfg.link.loss = 1.5;
        assert!(run_pair(&cfg, None, &mut NoPacing).is_err());
        let mut cfg = PairConfig::loopback(script(4.0), script(4.0), 1_000);
        cfg.tick_us = 0;
        assert!(run_pair(&cfg, None, &mut NoPacing).is_err());
    }
}
