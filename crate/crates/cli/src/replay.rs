use std::fs::File;
use std::io::{BufWriter, Write};

use anyhow::Context as _;
use handshake_core::bus::{default_channels, CaptureLog, SimDevice};
use handshake_core::recording::{
    replay as run_replay, ActuatorSink, NoPacing, Pacer, RealTimePacer, ReplayError,
    SessionRecording,
};
use serde_json::json;

use crate::args::{BusKind, ReplayArgs};
use crate::{usage, CmdResult, Context, Failure};

fn same_file(a: &std::path::Path, b: &std::path::Path) -> bool {
    match (a.canonicalize(), b.canonicalize()) {
        (Ok(x), Ok(y)) => x == y,
        _ => a == b,
    }
}

pub fn replay(ctx: &Context, a: ReplayArgs) -> CmdResult {
    if !(a.speed.is_finite() && a.speed > 0.0) {
        return Err(usage(format!("--speed must be positive, got {}", a.speed)));
    }
    for out in [&a.capture_out, &a.trace_out].into_iter().flatten() {
        if same_file(out, &a.file) {
            return Err(usage(format!("refusing to overwrite the input {}", a.file.display())));
        }
    }
    let mut rec = SessionRecording::load(&a.file)
        .with_context(|| format!("loading {}", a.file.display()))?;
    if a.audition {
        rec.header.settings = ctx.settings();
    }
    let mut pacer: Box<dyn Pacer> = if a.instant {
        Box::new(NoPacing)
    } else {
        Box::new(RealTimePacer::default())
    };
    let channels = default_channels();

    let (report, frames, bus_summary) = match a.bus {
        BusKind::Sim => {
            let mut dev = SimDevice::new(&channels, 0);
            let mut sink = ActuatorSink::new(channels, &mut dev);
            let report = run_replay(&rec, &mut sink, pacer.as_mut(), a.speed).map_err(replay_failure)?;
            let frames = sink.frames_sent;
            if let Some(t) = rec.last_t_us() {
                dev.advance(t);
            }
            let summary = json!({
                "device": "sim",
                "rejected": dev.rejected(),
                "final_positions": dev.positions(),
            });
            (report, frames, summary)
        }
        BusKind::Capture => {
            let path = a.capture_out.as_ref().expect("clap requires --capture-out");
            let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
            let mut log = CaptureLog::new(BufWriter::new(file));
            let mut sink = ActuatorSink::new(channels, &mut log);
            let report = run_replay(&rec, &mut sink, pacer.as_mut(), a.speed).map_err(replay_failure)?;
            let frames = sink.frames_sent;
            log.into_inner()
                .with_context(|| format!("writing {}", path.display()))?;
            (report, frames, json!({"device": "capture", "path": path.display().to_string()}))
        }
    };

    if let Some(path) = &a.trace_out {
        let mut f = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
        f.write_all(report.trace_text().as_bytes())?;
        f.flush()?;
    }

    let first_mismatch = report.mismatches.first().map(|m| m.record_index + 2);
    ctx.out.emit(
        "replay",
        json!({
            "recording": rec.header.recording_id,
            "ticks": report.trace.len(),
            "stored_stimuli": report.stored_stimuli,
            "mismatches": report.mismatches.len(),
            "first_mismatch_line": first_mismatch,
            "consistent": report.is_consistent(),
            "events": report.events.iter().map(|e| json!({"name": e.name, "t_us": e.t_us})).collect::<Vec<_>>(),
            "frames_sent": frames,
            "bus": bus_summary,
            "speed": a.speed,
            "audition": a.audition,
        }),
        format!(
            "{}: {} ticks, {} stored stimuli, {} mismatches, {} bus frames, {} events",
            rec.header.recording_id,
            report.trace.len(),
            report.stored_stimuli,
            report.mismatches.len(),
            frames,
            report.events.len()
        ),
    );
    if !a.audition && !report.is_consistent() {
        return Err(Failure::Data(anyhow::anyhow!(
            "{}: recomputed stimuli differ from the stored ones ({} mismatches, first at line {})",
            a.file.display(),
            report.mismatches.len(),
            first_mismatch.unwrap_or(0)
        )));
    }
    Ok(())
}

fn replay_failure(e: ReplayError) -> Failure {
    match e {
        ReplayError::InvalidSpeed(s) => usage(format!("invalid speed {s}")),
        other => Failure::Data(other.into()),
    }
}
