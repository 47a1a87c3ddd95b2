use std::fs::File;
use std::io::BufWriter;
use std::net::{SocketAddr, ToSocketAddrs, UdpSocket};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::Context as _;
use handshake_core::analysis::Emotion;
use handshake_core::profile::{HandshakeProfile, RepeatingProfile};
use handshake_core::protocol::harness::{run_pair, LinkImpairment, PairConfig, PairReport};
use handshake_core::protocol::udp::{run_udp_session, UdpSessionConfig};
use handshake_core::protocol::SessionSettings;
use handshake_core::recording::{
    NoPacing, Pacer, RealTimePacer, RecordingHeader, RecordingWriter,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::args::{ProfileArgs, SessionArgs, SimulateNetArgs};
use crate::{usage, CmdResult, Context, Failure};

/// Stale ticks must stay under this share of the active ticks.
const MAX_STALE_FRACTION: f64 = 0.05;
/// Distribution must be all-zero this long after the last received sample.
const MAX_ZERO_AFTER_US: u64 = 500_000;

pub fn script(p: &ProfileArgs, settings: &SessionSettings) -> Result<RepeatingProfile, Failure> {
    let profile = HandshakeProfile {
        peak_grip: p.peak_grip,
        hold_s: p.hold_s,
        close_speed: p.grip_speed,
        open_speed: p.grip_speed,
        swing_amplitude_m: p.swing_mm / 1000.0,
        swing_freq_hz: p.swing_hz,
        contact_on: settings.mapping.contact_on,
        contact_off: settings.mapping.contact_off,
        ..HandshakeProfile::default()
    };
    profile.validate().map_err(|e| usage(format!("scripted hand: {e}")))?;
    let period_s = p.period_s.unwrap_or(profile.total_s() + 0.7);
    if !(period_s.is_finite() && period_s > 0.0) {
        return Err(usage(format!("--period-s must be positive, got {period_s}")));
    }
    Ok(RepeatingProfile { profile, period_s })
}

pub fn seconds_to_us(name: &str, s: f64) -> Result<u64, Failure> {
    if !(s.is_finite() && s > 0.0 && s < 1e7) {
        return Err(usage(format!("{name} must be a positive number of seconds, got {s}")));
    }
    Ok((s * 1e6).round() as u64)
}

fn tick_us(hz: u32) -> Result<u64, Failure> {
    if hz == 0 || hz > 10_000 {
        return Err(usage(format!("--tick-hz must lie in 1..=10000, got {hz}")));
    }
    Ok(1_000_000 / u64::from(hz))
}

fn open_recording(
    path: &Path,
    id: Option<&str>,
    participant: &str,
    label: Option<Emotion>,
    settings: SessionSettings,
) -> Result<RecordingWriter<BufWriter<File>>, Failure> {
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("session");
    let mut header = RecordingHeader::new(id.unwrap_or(stem), participant, settings);
    header.label = label;
    header.start_unix_ms = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0);
    header.validate().map_err(|e| usage(format!("recording header: {e}")))?;
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(RecordingWriter::new(BufWriter::new(file), &header)?)
}

fn emit_pair_report(ctx: &Context, kind: &str, r: &PairReport, recorded: Option<&Path>) {
    let decode_errors: u64 = r.decode_errors.values().sum();
    let text = format!(
        "ticks {}  stale {:.2}%  clasps {}  accepted {}  dropped {}  lost {}  corrupted {}  decode errors {}  zero after silence {}{}",
        r.ticks,
        100.0 * r.stale_fraction(),
        r.clasp_episodes_a,
        r.accepted_a,
        r.dropped_a,
        r.datagrams_lost,
        r.datagrams_corrupted,
        decode_errors,
        r.zero_after_last_receipt_us
            .map_or("n/a".to_string(), |us| format!("{:.0} ms", us as f64 / 1000.0)),
        recorded.map_or(String::new(), |p| format!("  recorded {}", p.display())),
    );
    ctx.out.emit(
        kind,
        json!({
            "ticks": r.ticks,
            "active_ticks": r.active_ticks,
            "stale_ticks": r.stale_ticks,
            "stale_fraction": r.stale_fraction(),
            "clasp_episodes": r.clasp_episodes_a,
            "accepted": r.accepted_a,
            "dropped": r.dropped_a,
            "datagrams_sent": r.datagrams_sent,
            "datagrams_lost": r.datagrams_lost,
            "datagrams_corrupted": r.datagrams_corrupted,
            "decode_errors": r.decode_errors,
            "zero_after_silence_us": r.zero_after_last_receipt_us,
            "offset_estimate_us": r.offset_estimate_us,
            "recording": recorded.map(|p| p.display().to_string()),
        }),
        text,
    );
}

pub fn session(ctx: &Context, a: SessionArgs) -> CmdResult {
    let mut settings = ctx.settings();
    if let Some(ms) = a.hold_ms {
        settings.loss.hold_us = ms * 1000;
    }
    if let Some(ms) = a.fade_ms {
        settings.loss.fade_us = ms * 1000;
    }
    settings
        .loss
        .validate()
        .map_err(|e| usage(format!("loss policy: {e}")))?;
    let own = script(&a.profile, &settings)?;
    let duration_us = seconds_to_us("--duration", a.duration)?;
    let tick_us = tick_us(a.tick_hz)?;
    let mut writer = match &a.record {
        Some(p) => Some(open_recording(p, a.id.as_deref(), &a.participant, a.label, settings)?),
        None => None,
    };

    if a.loopback {
        let counterpart = match a.seed {
            Some(seed) => RepeatingProfile::random(&mut ChaCha8Rng::seed_from_u64(seed)),
            None => own,
        };
        let mut cfg = PairConfig::loopback(own, counterpart, duration_us);
        cfg.settings_a = settings;
        cfg.settings_b = settings;
        cfg.tick_us = tick_us;
        cfg.seed = a.seed.unwrap_or(0);
        let mut pacer: Box<dyn Pacer> = if a.fast {
            Box::new(NoPacing)
        } else {
            Box::new(RealTimePacer::default())
        };
        let report = run_pair(
            &cfg,
            writer.as_mut().map(|w| w as &mut dyn handshake_core::recording::RecordSink),
            pacer.as_mut(),
        )?;
        if let Some(w) = writer {
            w.into_inner()?;
        }
        emit_pair_report(ctx, "session", &report, a.record.as_deref());
        return Ok(());
    }

    let peer_text = a.peer.as_deref().expect("clap requires --peer without --loopback");
    let peer: SocketAddr = peer_text
        .to_socket_addrs()
        .map_err(|e| usage(format!("--peer {peer_text}: {e}")))?
        .next()
        .ok_or_else(|| usage(format!("--peer {peer_text}: no address")))?;
    let listen = parse_listen(&a.listen)?;
    let socket = UdpSocket::bind(listen).with_context(|| format!("binding {listen}"))?;
    eprintln!(
        "listening on {}, peer {peer}",
        socket.local_addr().map_or(listen, |a| a)
    );
    let cfg = UdpSessionConfig {
        peer,
        settings,
        script: own,
        tick_us,
        duration_us,
        ping_interval_us: 1_000_000,
        peer_id: a.peer_id,
    };
    let r = run_udp_session(
        socket,
        &cfg,
        writer.as_mut().map(|w| w as &mut dyn handshake_core::recording::RecordSink),
    )?;
    if let Some(w) = writer {
        w.into_inner()?;
    }
    let decode_errors: u64 = r.decode_errors.values().sum();
    let stale = if r.ticks == 0 { 0.0 } else { r.stale_ticks as f64 / r.ticks as f64 };
    ctx.out.emit(
        "session",
        json!({
            "ticks": r.ticks,
            "stale_ticks": r.stale_ticks,
            "stale_fraction": stale,
            "clasp_episodes": r.clasp_episodes,
            "received": r.received,
            "accepted": r.accepted,
            "dropped": r.dropped,
            "foreign_datagrams": r.foreign_datagrams,
            "overflowed": r.overflowed,
            "decode_errors": r.decode_errors,
            "offset_estimate_us": r.offset_estimate_us,
            "peer_said_bye": r.peer_said_bye,
            "recording": a.record.as_ref().map(|p| p.display().to_string()),
        }),
        format!(
            "ticks {}  stale {:.2}%  clasps {}  received {}  accepted {}  dropped {}  decode errors {}  clock offset {}",
            r.ticks,
            100.0 * stale,
            r.clasp_episodes,
            r.received,
            r.accepted,
            r.dropped,
            decode_errors,
            r.offset_estimate_us
                .map_or("unknown".to_string(), |us| format!("{us} us")),
        ),
    );
    Ok(())
}

fn parse_listen(s: &str) -> Result<SocketAddr, Failure> {
    if let Ok(port) = s.parse::<u16>() {
        return Ok(SocketAddr::from(([0, 0, 0, 0], port)));
    }
    s.parse()
        .map_err(|_| usage(format!("--listen {s}: expected a port or IP:PORT")))
}

/// Parses `MEAN±JITTER` with an optional unit (`ms` default, `us`, `s`)
/// into microseconds. `+-` and `+/-` stand in for `±`; the jitter part may
/// be omitted.
pub fn parse_delay(s: &str) -> Result<(u64, u64), String> {
    let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let (unit, scale) = [("ms", 1e3), ("us", 1.0), ("µs", 1.0), ("s", 1e6)]
        .into_iter()
        .find(|(u, _)| compact.ends_with(u))
        .unwrap_or(("", 1e3));
    let body = &compact[..compact.len() - unit.len()];
    let (mean, jitter) = match ["±", "+/-", "+-"].iter().find_map(|sep| body.split_once(sep)) {
        Some((m, j)) => (m, Some(j)),
        None => (body, None),
    };
    let num = |t: &str| -> Result<u64, String> {
        let t = t.strip_suffix(unit).unwrap_or(t);
        let v: f64 = t.parse().map_err(|_| format!("{s:?}: {t:?} is not a number"))?;
        if !(v.is_finite() && v >= 0.0) {
            return Err(format!("{s:?}: delays must be non-negative"));
        }
        Ok((v * scale).round() as u64)
    };
    Ok((num(mean)?, jitter.map(num).transpose()?.unwrap_or(0)))
}

pub fn simulate_net(ctx: &Context, a: SimulateNetArgs) -> CmdResult {
    let settings = ctx.settings();
    let (delay_us, jitter_us) = parse_delay(&a.jitter).map_err(|e| usage(format!("--jitter {e}")))?;
    let link = LinkImpairment {
        loss: a.loss,
        delay_us,
        jitter_us,
        corrupt: a.corrupt,
    };
    let own = script(&a.profile, &settings)?;
    let active_us = seconds_to_us("--duration", a.duration)?;
    let tail_us = if a.tail == 0.0 { 0 } else { seconds_to_us("--tail", a.tail)? };
    let mut cfg = PairConfig::loopback(own, own, active_us + tail_us);
    cfg.settings_a = settings;
    cfg.settings_b = settings;
    cfg.link = link;
    cfg.tick_us = tick_us(a.tick_hz)?;
    cfg.silence_at_us = Some(active_us);
    cfg.clock_skew_us = a.skew_us;
    cfg.seed = a.seed;
    let mut writer = match &a.record {
        Some(p) => Some(open_recording(p, None, "sim", None, settings)?),
        None => None,
    };
    let report = run_pair(
        &cfg,
        writer.as_mut().map(|w| w as &mut dyn handshake_core::recording::RecordSink),
        &mut NoPacing,
    )
    .map_err(|e| match e {
        handshake_core::protocol::harness::HarnessError::Config(m) => usage(m),
        other => Failure::Data(other.into()),
    })?;
    if let Some(w) = writer {
        w.into_inner()?;
    }
    emit_pair_report(ctx, "simulate_net", &report, a.record.as_deref());
    if a.check {
        let stale_ok = report.stale_fraction() < MAX_STALE_FRACTION;
        let zero_ok = tail_us == 0
            || report
                .zero_after_last_receipt_us
                .is_some_and(|us| us <= MAX_ZERO_AFTER_US);
        if !(stale_ok && zero_ok) {
            return Err(Failure::Data(anyhow::anyhow!(
                "link check failed: stale fraction {:.4} (limit {MAX_STALE_FRACTION}), zero after silence {:?} us (limit {MAX_ZERO_AFTER_US})",
                report.stale_fraction(),
                report.zero_after_last_receipt_us
            )));
        }
    }
    Ok(())
}
