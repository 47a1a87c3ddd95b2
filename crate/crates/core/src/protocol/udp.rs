//! Live session over UDP.
//!
//! A receive thread decodes datagrams from the configured peer and hands
//! them to the tick loop through a bounded channel; the tick loop owns all
//! session state.

use std::collections::BTreeMap;
use std::io;
use std::net::{SocketAddr, UdpSocket};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{sync_channel, Receiver, TrySendError};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use super::harness::HarnessError;
use super::{decode_message, encode_message, SessionEngine, SessionSettings, WireMessage};
use crate::model::ContactPhase;
use crate::profile::RepeatingProfile;
use crate::recording::{Record, RecordSink, EVENT_CLASP, EVENT_RELEASE, MEDIA_START};

#[derive(Debug, Clone, Copy)]
pub struct UdpSessionConfig {
    pub peer: SocketAddr,
    pub settings: SessionSettings,
    /// Source of this side's hand motion.
    pub script: RepeatingProfile,
    pub tick_us: u64,
    pub duration_us: u64,
    pub ping_interval_us: u64,
    pub peer_id: u32,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct UdpReport {
    pub ticks: u64,
    pub stale_ticks: u64,
    pub clasp_episodes: u64,
    pub received: u64,
    pub accepted: u64,
    pub dropped: u64,
    pub foreign_datagrams: u64,
    pub overflowed: u64,
    pub decode_errors: BTreeMap<String, u64>,
    pub offset_estimate_us: Option<i64>,
    pub peer_said_bye: bool,
}

enum Inbound {
    Message(u64, WireMessage),
    Malformed(&'static str),
    Foreign,
}

fn spawn_receiver(
    socket: UdpSocket,
    peer: SocketAddr,
    start: Instant,
    stop: Arc<AtomicBool>,
) -> (Receiver<Inbound>, thread::JoinHandle<u64>) {
    let (tx, rx) = sync_channel::<Inbound>(1024);
    let handle = thread::spawn(move || {
        let mut overflow = 0u64;
        let mut buf = [0u8; 2048];
        while !stop.load(Ordering::Relaxed) {
            let (n, from) = match socket.recv_from(&mut buf) {
                Ok(v) => v,
                Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => continue,
                Err(_) => continue,
            };
            let now = start.elapsed().as_micros() as u64;
            let item = if from != peer {
                Inbound::Foreign
            } else {
                match decode_message(&buf[..n]) {
                    Ok(m) => Inbound::Message(now, m),
                    Err(e) => Inbound::Malformed(e.category()),
                }
            };
            match tx.try_send(item) {
                Ok(()) => {}
                Err(TrySendError::Full(_)) => overflow += 1,
                Err(TrySendError::Disconnected(_)) => break,
            }
        }
        overflow
    });
    (rx, handle)
}

/// Runs this side of a live session in real time until `duration_us`.
pub fn run_udp_session(
    socket: UdpSocket,
    cfg: &UdpSessionConfig,
    mut recorder: Option<&mut dyn RecordSink>,
) -> Result<UdpReport, HarnessError> {
    if cfg.tick_us == 0 {
        return Err(HarnessError::Config("tick period must be positive".into()));
    }
    let io_err = |e: io::Error| HarnessError::Config(format!("socket: {e}"));
    socket
        .set_read_timeout(Some(Duration::from_millis(20)))
        .map_err(io_err)?;
    let send_socket = socket.try_clone().map_err(io_err)?;
    let start = Instant::now();
    let stop = Arc::new(AtomicBool::new(false));
    let (rx, handle) = spawn_receiver(socket, cfg.peer, start, stop.clone());

    let send = |msg: &WireMessage| {
        // datagram loss is part of the contract; send errors are not fatal
        let _ = send_socket.send_to(&encode_message(msg), cfg.peer);
    };

    let mut engine = SessionEngine::new(cfg.settings);
    let mut report = UdpReport::default();
    send(&WireMessage::Hello {
        peer_id: cfg.peer_id,
        tick_hz: (1_000_000 / cfg.tick_us).min(u64::from(u16::MAX)) as u16,
    });
    if let Some(r) = recorder.as_deref_mut() {
        r.record(Record::event(0, MEDIA_START))?;
    }

    let mut t = 0u64;
    let mut last_t = 0u64;
    while t < cfg.duration_us {
        let target = start + Duration::from_micros(t);
        let now = Instant::now();
        if target > now {
            thread::sleep(target - now);
        }
        for item in rx.try_iter() {
            match item {
                Inbound::Message(at, msg) => {
                    report.received += 1;
                    let at = at.clamp(last_t, t);
                    if let (WireMessage::Sensor(s), Some(r)) = (&msg, recorder.as_deref_mut()) {
                        r.record(Record::remote(at, *s))?;
                    }
                    if let Some(reply) = engine.handle(msg, at) {
                        send(&reply);
                    }
                    last_t = at;
                }
                Inbound::Malformed(cat) => {
                    *report.decode_errors.entry(cat.to_string()).or_default() += 1;
                }
                Inbound::Foreign => report.foreign_datagrams += 1,
            }
        }

        let secs = t as f64 / 1e6;
        let grip = cfg.script.grip_at(secs);
        let angles = cfg.settings.calibration.angles_for_grip(grip);
        let sample = engine.sample_with_grip(angles, grip, cfg.script.wrist_mm_at(secs), t);
        send(&WireMessage::Sensor(sample));
        if cfg.ping_interval_us > 0 && t.is_multiple_of(cfg.ping_interval_us) {
            let ping = engine.next_ping(t);
            send(&ping);
        }

        let prev = engine.phase();
        let out = engine.tick(&sample, t);
        if let Some(r) = recorder.as_deref_mut() {
            r.record(Record::local(t, sample))?;
            r.record(Record::stimulus(out))?;
            if prev != out.phase {
                match out.phase {
                    ContactPhase::Clasped => r.record(Record::event(t, EVENT_CLASP))?,
                    ContactPhase::Released => r.record(Record::event(t, EVENT_RELEASE))?,
                    ContactPhase::Idle => {}
                }
            }
        }
        if prev != ContactPhase::Clasped && out.phase == ContactPhase::Clasped {
            report.clasp_episodes += 1;
        }
        report.ticks += 1;
        report.stale_ticks += u64::from(out.stale);
        last_t = t;
        t += cfg.tick_us;
    }

    send(&WireMessage::Bye);
    stop.store(true, Ordering::Relaxed);
    report.overflowed = handle.join().unwrap_or(0);
    report.accepted = engine.remote().accepted;
    report.dropped = engine.remote().dropped;
    report.offset_estimate_us = engine.remote().offset_us;
    report.peer_said_bye = engine.peer_said_bye();
    Ok(report)
}
