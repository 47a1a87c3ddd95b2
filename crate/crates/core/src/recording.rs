//! Session recordings (`.hsrec`) and deterministic replay.
//!
//! A recording is a text file. Line one is the header, every further line is
//! one record:
//!
//! ```text
//! #hsrec version=1 recording=<id> participant=<id> label=<emotion|none> start_unix_ms=<u64>
//!        finger_gain=<f64> palm_gain=<f64> contact_on=<f64> contact_off=<f64>
//!        thumb_base_group=<finger|palm> thumb_open_deg=<f64> thumb_closed_deg=<f64>
//!        middle_open_deg=<f64> middle_closed_deg=<f64> thumb_weight=<f64>
//!        hold_us=<u64> fade_us=<u64>
//! <t_us> local  seq=<u32> ts=<u64> thumb=<i16> middle=<i16> grip=<u16> wrist=<i32>,<i32>,<i32> phase=<u8>
//! <t_us> remote seq=... (same fields as local)
//! <t_us> stim   phase=<idle|clasped|released> own=<f64> opp=<f64> stale=<0|1> dist=<f64>,...(7)
//! <t_us> event  name=<token>
//! ```
//!
//! (The header is a single line; it is wrapped above for reading.) Fields are
//! separated by single spaces, `t_us` is session-relative and
//! non-decreasing. Sample fields are the integer wire values. Floats use the
//! shortest representation that parses back to the same value, so a
//! serialized stimulus line is a byte-exact fingerprint of a tick.
//!
//! Replay re-runs the tick rule on the recorded local and remote samples.
//! Stored `stim` lines are never played back; they are compared against the
//! recomputed ticks and any disagreement is reported.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{self, BufRead, Write};
use std::path::Path;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::analysis::Emotion;
use crate::model::{ContactPhase, Grip, GripCalibration, MappingParams, StimulusDistribution};
use crate::protocol::{LossPolicy, SensorSample, SessionEngine, SessionSettings, TickOutput};

pub const FORMAT_VERSION: u32 = 1;
pub const EXTENSION: &str = "hsrec";
/// Event name reserved for the playback video cue.
pub const MEDIA_START: &str = "media_start";
pub const EVENT_CLASP: &str = "clasp";
pub const EVENT_RELEASE: &str = "release";

#[derive(Debug, Error)]
pub enum RecordingError {
    #[error("record at t={t_us} us precedes previous record at t={last_us} us")]
    TimeRegression { t_us: u64, last_us: u64 },
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("invalid field: {0}")]
    InvalidField(String),
    #[error("recording i/o: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecordingHeader {
    pub version: u32,
    pub recording_id: String,
    pub participant: String,
    pub label: Option<Emotion>,
    pub start_unix_ms: u64,
    pub settings: SessionSettings,
}

impl RecordingHeader {
    pub fn new(recording_id: &str, participant: &str, settings: SessionSettings) -> Self {
        Self {
            version: FORMAT_VERSION,
            recording_id: recording_id.to_string(),
            participant: participant.to_string(),
            label: None,
            start_unix_ms: 0,
            settings,
        }
    }

    pub fn validate(&self) -> Result<(), RecordingError> {
        check_token("recording", &self.recording_id)?;
        check_token("participant", &self.participant)?;
        self.settings
            .mapping
            .validate()
            .and_then(|_| self.settings.calibration.validate())
            .and_then(|_| self.settings.loss.validate())
            .map_err(|e| RecordingError::InvalidField(e.to_string()))
    }
}

fn check_token(what: &str, s: &str) -> Result<(), RecordingError> {
    if s.is_empty() || s.chars().any(|c| c.is_whitespace() || c == '=' || c == ',') {
        Err(RecordingError::InvalidField(format!(
            "{what} {s:?} must be a non-empty token without whitespace, '=' or ','"
        )))
    } else {
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimelineEvent {
    pub t_us: u64,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RecordBody {
    Local(SensorSample),
    Remote(SensorSample),
    Stimulus(TickOutput),
    Event(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub t_us: u64,
    pub body: RecordBody,
}

impl Record {
    pub fn local(t_us: u64, s: SensorSample) -> Self {
        Self {
            t_us,
            body: RecordBody::Local(s),
        }
    }
    pub fn remote(t_us: u64, s: SensorSample) -> Self {
        Self {
            t_us,
            body: RecordBody::Remote(s),
        }
    }
    /// Stimulus record; its time is the tick's time.
    pub fn stimulus(out: TickOutput) -> Self {
        Self {
            t_us: out.t_us,
            body: RecordBody::Stimulus(out),
        }
    }
    pub fn event(t_us: u64, name: &str) -> Self {
        Self {
            t_us,
            body: RecordBody::Event(name.to_string()),
        }
    }

    pub fn validate(&self) -> Result<(), RecordingError> {
        match &self.body {
            RecordBody::Local(s) | RecordBody::Remote(s) => {
                if s.grip_milli > 1000 {
                    return Err(RecordingError::InvalidField("grip above 1000".into()));
                }
                Ok(())
            }
            RecordBody::Event(name) => check_token("event name", name),
            RecordBody::Stimulus(out) => {
                if out.t_us != self.t_us {
                    return Err(RecordingError::InvalidField(
                        "stimulus time differs from record time".into(),
                    ));
                }
                Ok(())
            }
        }
    }
}

/// Anything records can be appended to.
pub trait RecordSink {
    fn record(&mut self, record: Record) -> Result<(), RecordingError>;
}

/// In-memory recording.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionRecording {
    pub header: RecordingHeader,
    records: Vec<Record>,
}

impl SessionRecording {
    pub fn new(header: RecordingHeader) -> Self {
        Self {
            header,
            records: Vec::new(),
        }
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn last_t_us(&self) -> Option<u64> {
        self.records.last().map(|r| r.t_us)
    }

    /// Appends a record; ties in time are allowed, regressions are not.
    pub fn append(&mut self, record: Record) -> Result<(), RecordingError> {
        record.validate()?;
        if let Some(last) = self.last_t_us() {
            if record.t_us < last {
                return Err(RecordingError::TimeRegression {
                    t_us: record.t_us,
                    last_us: last,
                });
            }
        }
        self.records.push(record);
        Ok(())
    }

    pub fn stored_stimuli(&self) -> Vec<TickOutput> {
        self.records
            .iter()
            .filter_map(|r| match &r.body {
                RecordBody::Stimulus(out) => Some(*out),
                _ => None,
            })
            .collect()
    }

    pub fn local_samples(&self) -> impl Iterator<Item = (u64, &SensorSample)> {
        self.records.iter().filter_map(|r| match &r.body {
            RecordBody::Local(s) => Some((r.t_us, s)),
            _ => None,
        })
    }

    pub fn events(&self) -> Vec<TimelineEvent> {
        self.records
            .iter()
            .filter_map(|r| match &r.body {
                RecordBody::Event(name) => Some(TimelineEvent {
                    t_us: r.t_us,
                    name: name.clone(),
                }),
                _ => None,
            })
            .collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = header_line(&self.header);
        out.push('\n');
        for r in &self.records {
            out.push_str(&record_line(r));
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, RecordingError> {
        Self::read(io::Cursor::new(text))
    }

    pub fn read<R: BufRead>(r: R) -> Result<Self, RecordingError> {
        let mut lines = r.lines();
        let first = lines.next().ok_or(RecordingError::Parse {
            line: 1,
            reason: "missing header".into(),
        })??;
        let header = parse_header(&first).map_err(|reason| RecordingError::Parse { line: 1, reason })?;
        let mut rec = SessionRecording::new(header);
        for (idx, line) in lines.enumerate() {
            let line_no = idx + 2;
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let record = parse_record(&line).map_err(|reason| RecordingError::Parse {
                line: line_no,
                reason,
            })?;
            rec.append(record).map_err(|e| RecordingError::Parse {
                line: line_no,
                reason: e.to_string(),
            })?;
        }
        Ok(rec)
    }

    pub fn load(path: &Path) -> Result<Self, RecordingError> {
        let f = std::fs::File::open(path)?;
        Self::read(io::BufReader::new(f))
    }

    pub fn save(&self, path: &Path) -> Result<(), RecordingError> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

impl RecordSink for SessionRecording {
    fn record(&mut self, record: Record) -> Result<(), RecordingError> {
        self.append(record)
    }
}

/// Streams a recording to any writer, one line per appended record.
pub struct RecordingWriter<W: Write> {
    out: W,
    last_t_us: Option<u64>,
}

impl<W: Write> RecordingWriter<W> {
    pub fn new(mut out: W, header: &RecordingHeader) -> Result<Self, RecordingError> {
        header.validate()?;
        writeln!(out, "{}", header_line(header))?;
        Ok(Self {
            out,
            last_t_us: None,
        })
    }

    pub fn flush(&mut self) -> Result<(), RecordingError> {
        self.out.flush()?;
        Ok(())
    }

    pub fn into_inner(mut self) -> Result<W, RecordingError> {
        self.out.flush()?;
        Ok(self.out)
    }
}

impl<W: Write> RecordSink for RecordingWriter<W> {
    fn record(&mut self, record: Record) -> Result<(), RecordingError> {
        record.validate()?;
        if let Some(last) = self.last_t_us {
            if record.t_us < last {
                return Err(RecordingError::TimeRegression {
                    t_us: record.t_us,
                    last_us: last,
                });
            }
        }
        writeln!(self.out, "{}", record_line(&record))?;
        self.last_t_us = Some(record.t_us);
        Ok(())
    }
}

/// Fans one record stream out to two sinks.
pub struct TeeSink<'a, A: RecordSink + ?Sized, B: RecordSink + ?Sized>(pub &'a mut A, pub &'a mut B);

impl<A: RecordSink + ?Sized, B: RecordSink + ?Sized> RecordSink for TeeSink<'_, A, B> {
    fn record(&mut self, record: Record) -> Result<(), RecordingError> {
        self.0.record(record.clone())?;
        self.1.record(record)
    }
}

fn header_line(h: &RecordingHeader) -> String {
    let m = &h.settings.mapping;
    let c = &h.settings.calibration;
    let l = &h.settings.loss;
    format!(
        "#hsrec version={} recording={} participant={} label={} start_unix_ms={} \
         finger_gain={} palm_gain={} contact_on={} contact_off={} thumb_base_group={} \
         thumb_open_deg={} thumb_closed_deg={} middle_open_deg={} middle_closed_deg={} \
         thumb_weight={} hold_us={} fade_us={}",
        h.version,
        h.recording_id,
        h.participant,
        h.label.map_or("none", |e| e.name()),
        h.start_unix_ms,
        m.finger_gain,
        m.palm_gain,
        m.contact_on,
        m.contact_off,
        m.thumb_base_group,
        c.thumb_open_deg,
        c.thumb_closed_deg,
        c.middle_open_deg,
        c.middle_closed_deg,
        c.thumb_weight,
        l.hold_us,
        l.fade_us,
    )
}

fn sample_fields(s: &SensorSample) -> String {
    format!(
        "seq={} ts={} thumb={} middle={} grip={} wrist={},{},{} phase={}",
        s.seq,
        s.t_send_us,
        s.thumb_cdeg,
        s.middle_cdeg,
        s.grip_milli,
        s.wrist_mm[0],
        s.wrist_mm[1],
        s.wrist_mm[2],
        s.phase
    )
}

/// Canonical text of a tick, as stored in `stim` lines (without the time).
pub fn stimulus_fields(out: &TickOutput) -> String {
    let mut s = format!(
        "phase={} own={} opp={} stale={} dist=",
        out.phase,
        out.own_grip.value(),
        out.opp_grip.value(),
        u8::from(out.stale)
    );
    for (i, v) in out.dist.intensity.iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        let _ = write!(s, "{v}");
    }
    s
}

pub fn record_line(r: &Record) -> String {
    match &r.body {
        RecordBody::Local(s) => format!("{} local {}", r.t_us, sample_fields(s)),
        RecordBody::Remote(s) => format!("{} remote {}", r.t_us, sample_fields(s)),
        RecordBody::Stimulus(out) => format!("{} stim {}", r.t_us, stimulus_fields(out)),
        RecordBody::Event(name) => format!("{} event name={}", r.t_us, name),
    }
}

/// Splits `k=v` tokens, rejecting duplicates and tokens without `=`.
fn kv_map<'a>(tokens: impl Iterator<Item = &'a str>) -> Result<BTreeMap<&'a str, &'a str>, String> {
    let mut map = BTreeMap::new();
    for tok in tokens {
        let (k, v) = tok
            .split_once('=')
            .ok_or_else(|| format!("expected key=value, found {tok:?}"))?;
        if map.insert(k, v).is_some() {
            return Err(format!("duplicate key {k:?}"));
        }
    }
    Ok(map)
}

struct Fields<'a> {
    map: BTreeMap<&'a str, &'a str>,
}

impl<'a> Fields<'a> {
    fn take(&mut self, key: &str) -> Result<&'a str, String> {
        self.map
            .remove(key)
            .ok_or_else(|| format!("missing key {key:?}"))
    }

    fn num<T: std::str::FromStr>(&mut self, key: &str) -> Result<T, String> {
        let v = self.take(key)?;
        v.parse::<T>()
            .map_err(|_| format!("{key}: cannot parse {v:?}"))
    }

    fn finish(self) -> Result<(), String> {
        match self.map.keys().next() {
            Some(k) => Err(format!("unknown key {k:?}")),
            None => Ok(()),
        }
    }
}

fn parse_header(line: &str) -> Result<RecordingHeader, String> {
    let mut tokens = line.split(' ');
    if tokens.next() != Some("#hsrec") {
        return Err("header must start with #hsrec".into());
    }
    let mut f = Fields {
        map: kv_map(tokens)?,
    };
    let version: u32 = f.num("version")?;
    if version != FORMAT_VERSION {
        return Err(format!("unsupported format version {version}"));
    }
    let recording_id = f.take("recording")?.to_string();
    let participant = f.take("participant")?.to_string();
    let label = match f.take("label")? {
        "none" => None,
        other => Some(other.parse::<Emotion>().map_err(|e| e.to_string())?),
    };
    let start_unix_ms = f.num("start_unix_ms")?;
    let mapping = MappingParams {
        finger_gain: f.num("finger_gain")?,
        palm_gain: f.num("palm_gain")?,
        contact_on: f.num("contact_on")?,
        contact_off: f.num("contact_off")?,
        thumb_base_group: f.take("thumb_base_group")?.parse().map_err(|e: crate::model::ModelError| e.to_string())?,
    };
    let calibration = GripCalibration {
        thumb_open_deg: f.num("thumb_open_deg")?,
        thumb_closed_deg: f.num("thumb_closed_deg")?,
        middle_open_deg: f.num("middle_open_deg")?,
        middle_closed_deg: f.num("middle_closed_deg")?,
        thumb_weight: f.num("thumb_weight")?,
    };
    let loss = LossPolicy {
        hold_us: f.num("hold_us")?,
        fade_us: f.num("fade_us")?,
    };
    f.finish()?;
    let header = RecordingHeader {
        version,
        recording_id,
        participant,
        label,
        start_unix_ms,
        settings: SessionSettings {
            mapping,
            calibration,
            loss,
        },
    };
    header.validate().map_err(|e| e.to_string())?;
    Ok(header)
}

fn parse_sample(f: &mut Fields<'_>) -> Result<SensorSample, String> {
    let wrist_raw = f.take("wrist")?;
    let parts: Vec<&str> = wrist_raw.split(',').collect();
    if parts.len() != 3 {
        return Err(format!("wrist needs 3 components, found {wrist_raw:?}"));
    }
    let mut wrist_mm = [0i32; 3];
    for (dst, p) in wrist_mm.iter_mut().zip(parts) {
        *dst = p.parse().map_err(|_| format!("wrist: cannot parse {p:?}"))?;
    }
    Ok(SensorSample {
        seq: f.num("seq")?,
        t_send_us: f.num("ts")?,
        thumb_cdeg: f.num("thumb")?,
        middle_cdeg: f.num("middle")?,
        grip_milli: f.num("grip")?,
        wrist_mm,
        phase: f.num("phase")?,
    })
}

fn parse_unit(f: &mut Fields<'_>, key: &str) -> Result<f64, String> {
    let v: f64 = f.num(key)?;
    if !(0.0..=1.0).contains(&v) {
        return Err(format!("{key} = {v} outside [0, 1]"));
    }
    Ok(v)
}

fn parse_record(line: &str) -> Result<Record, String> {
    let mut tokens = line.split(' ');
    let t_us: u64 = tokens
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or("record must start with an integer time")?;
    let kind = tokens.next().ok_or("missing record kind")?;
    let mut f = Fields {
        map: kv_map(tokens)?,
    };
    let body = match kind {
        "local" => RecordBody::Local(parse_sample(&mut f)?),
        "remote" => RecordBody::Remote(parse_sample(&mut f)?),
        "stim" => {
            let phase: ContactPhase = f.take("phase")?.parse().map_err(|e: crate::model::ModelError| e.to_string())?;
            let own = parse_unit(&mut f, "own")?;
            let opp = parse_unit(&mut f, "opp")?;
            let stale = match f.take("stale")? {
                "0" => false,
                "1" => true,
                other => return Err(format!("stale must be 0 or 1, found {other:?}")),
            };
            let dist_raw = f.take("dist")?;
            let parts: Vec<&str> = dist_raw.split(',').collect();
            if parts.len() != 7 {
                return Err(format!("dist needs 7 values, found {}", parts.len()));
            }
            let mut dist = StimulusDistribution::ZERO;
            for (dst, p) in dist.intensity.iter_mut().zip(parts) {
                let v: f64 = p.parse().map_err(|_| format!("dist: cannot parse {p:?}"))?;
                if !(0.0..=1.0).contains(&v) {
                    return Err(format!("dist value {v} outside [0, 1]"));
                }
                *dst = v;
            }
            RecordBody::Stimulus(TickOutput {
                t_us,
                phase,
                dist,
                own_grip: Grip::saturating(own),
                opp_grip: Grip::saturating(opp),
                stale,
            })
        }
        "event" => RecordBody::Event(f.take("name")?.to_string()),
        other => return Err(format!("unknown record kind {other:?}")),
    };
    f.finish()?;
    let record = Record { t_us, body };
    record.validate().map_err(|e| e.to_string())?;
    Ok(record)
}

// ---------------------------------------------------------------------------
// Replay

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("replay speed must be positive and finite, got {0}")]
    InvalidSpeed(f64),
    #[error("corrupt record #{index} (line {line}): {reason}")]
    Corrupt {
        index: usize,
        line: usize,
        reason: String,
    },
    #[error("sink failed at t={t_us} us: {reason}")]
    Sink { t_us: u64, reason: String },
}

/// Receives replayed output.
pub trait ReplaySink {
    fn stimulus(&mut self, out: &TickOutput) -> Result<(), String>;
    fn event(&mut self, _event: &TimelineEvent) -> Result<(), String> {
        Ok(())
    }
}

/// Discards everything.
pub struct NullSink;

impl ReplaySink for NullSink {
    fn stimulus(&mut self, _out: &TickOutput) -> Result<(), String> {
        Ok(())
    }
}

/// Waits until a wall-clock offset (microseconds since replay start).
pub trait Pacer {
    fn wait_until(&mut self, offset_us: u64);
}

/// Returns immediately.
pub struct NoPacing;

impl Pacer for NoPacing {
    fn wait_until(&mut self, _offset_us: u64) {}
}

/// Sleeps against a monotonic clock started on the first call.
#[derive(Default)]
pub struct RealTimePacer {
    start: Option<Instant>,
}

impl Pacer for RealTimePacer {
    fn wait_until(&mut self, offset_us: u64) {
        let start = *self.start.get_or_insert_with(Instant::now);
        let target = start + Duration::from_micros(offset_us);
        let now = Instant::now();
        if target > now {
            std::thread::sleep(target - now);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Mismatch {
    pub record_index: usize,
    pub t_us: u64,
}

#[derive(Debug, Clone, Default)]
pub struct ReplayReport {
    /// Recomputed ticks, one per local sample.
    pub trace: Vec<TickOutput>,
    /// Wall-clock offset at which each tick was delivered.
    pub delivery_us: Vec<u64>,
    pub events: Vec<TimelineEvent>,
    pub stored_stimuli: usize,
    /// Stored stimulus records that disagree with the recomputation.
    pub mismatches: Vec<Mismatch>,
}

impl ReplayReport {
    pub fn is_consistent(&self) -> bool {
        self.mismatches.is_empty()
    }

    /// Canonical text of the recomputed trace, one tick per line.
    pub fn trace_text(&self) -> String {
        let mut s = String::new();
        for out in &self.trace {
            let _ = writeln!(s, "{} {}", out.t_us, stimulus_fields(out));
        }
        s
    }
}

fn scaled(t_us: u64, speed: f64) -> u64 {
    (t_us as f64 / speed).round() as u64
}

/// Re-runs the tick rule over a recording, delivering ticks and events to
/// `sink` paced at `t_us / speed`.
pub fn replay(
    rec: &SessionRecording,
    sink: &mut dyn ReplaySink,
    pacer: &mut dyn Pacer,
    speed: f64,
) -> Result<ReplayReport, ReplayError> {
    if !(speed.is_finite() && speed > 0.0) {
        return Err(ReplayError::InvalidSpeed(speed));
    }
    let mut engine = SessionEngine::new(rec.header.settings);
    let mut report = ReplayReport::default();
    let mut last_tick: Option<(usize, TickOutput)> = None;
    for (index, r) in rec.records().iter().enumerate() {
        let corrupt = |reason: &str| ReplayError::Corrupt {
            index,
            line: index + 2,
            reason: reason.to_string(),
        };
        match &r.body {
            RecordBody::Remote(s) => {
                engine.ingest(*s, r.t_us);
            }
            RecordBody::Local(s) => {
                let out = engine.tick(s, r.t_us);
                let at = scaled(r.t_us, speed);
                pacer.wait_until(at);
                sink.stimulus(&out).map_err(|reason| ReplayError::Sink {
                    t_us: r.t_us,
                    reason,
                })?;
                report.trace.push(out);
                report.delivery_us.push(at);
                last_tick = Some((index, out));
            }
            RecordBody::Stimulus(stored) => {
                report.stored_stimuli += 1;
                let Some((_, recomputed)) = last_tick.take() else {
                    return Err(corrupt("stimulus record without a preceding local sample"));
                };
                if recomputed.t_us != r.t_us {
                    return Err(corrupt("stimulus record time differs from its tick"));
                }
                if stimulus_fields(&recomputed) != stimulus_fields(stored) {
                    report.mismatches.push(Mismatch {
                        record_index: index,
                        t_us: r.t_us,
                    });
                }
            }
            RecordBody::Event(name) => {
                let ev = TimelineEvent {
                    t_us: r.t_us,
                    name: name.clone(),
                };
                pacer.wait_until(scaled(r.t_us, speed));
                sink.event(&ev).map_err(|reason| ReplayError::Sink {
                    t_us: r.t_us,
                    reason,
                })?;
                report.events.push(ev);
            }
        }
    }
    Ok(report)
}

/// Drives the actuator path: each replayed tick is scheduled onto the bus.
pub struct ActuatorSink<'a, S: crate::bus::ByteSink + ?Sized> {
    pub channels: [crate::bus::ChannelConfig; 7],
    pub bus: &'a mut S,
    pub frames_sent: u64,
}

impl<'a, S: crate::bus::ByteSink + ?Sized> ActuatorSink<'a, S> {
    pub fn new(channels: [crate::bus::ChannelConfig; 7], bus: &'a mut S) -> Self {
        Self {
            channels,
            bus,
            frames_sent: 0,
        }
    }
}

impl<S: crate::bus::ByteSink + ?Sized> ReplaySink for ActuatorSink<'_, S> {
    fn stimulus(&mut self, out: &TickOutput) -> Result<(), String> {
        let frames = crate::bus::schedule(&out.dist, &self.channels).map_err(|e| e.to_string())?;
        for f in &frames {
            self.bus.send(f, out.t_us).map_err(|e| e.to_string())?;
            self.frames_sent += 1;
        }
        Ok(())
    }
}
