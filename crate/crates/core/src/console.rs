//! Server side of the browser console, free of any I/O.
//!
//! Clients exchange JSON text messages ([`ConsoleMessage`]) with a
//! [`ConsoleHub`]. A live session has two roles, `a` and `b`; each role's
//! latest input becomes its sensor sample every tick and is delivered to the
//! other role's engine over a lossless in-process link. A client may
//! instead join in replay mode and receive a stored recording's stimulus
//! and timeline events at their recorded times.
//!
//! The caller owns the clock and the transport: feed client text through
//! [`ConsoleHub::handle_text`], call [`ConsoleHub::tick`] every
//! [`TICK_US`], and forward what comes back.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::analysis::{classify, EmotionMap};
use crate::model::{ContactPhase, Grip, SiteId};
use crate::protocol::{SessionEngine, SessionSettings, TickOutput, DEFAULT_TICK_US};
use crate::recording::{Record, RecordBody, RecordingHeader, SessionRecording, EVENT_CLASP, EVENT_RELEASE};

pub const PROTOCOL_VERSION: u32 = 1;
pub const TICK_US: u64 = DEFAULT_TICK_US;
/// Minimum spacing of state messages to one client (at most 30 per second).
pub const STATE_INTERVAL_US: u64 = 33_334;
/// Idle history kept for feature extraction of the next clasp.
const IDLE_HISTORY_US: u64 = 5_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    A,
    B,
}

impl Role {
    pub fn other(self) -> Role {
        match self {
            Role::A => Role::B,
            Role::B => Role::A,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ConsoleMessage {
    /// Client: current hand state. `grip` in [0, 1].
    Input { grip: f64, wrist_mm: [i32; 3] },
    /// Client: join a live session, or replay a stored recording.
    Join {
        session: String,
        role: Role,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        replay: Option<String>,
    },
    Joined {
        session: String,
        role: Role,
        version: u32,
    },
    State {
        t_us: u64,
        phase: ContactPhase,
        dist: [f64; SiteId::COUNT],
        own_grip: f64,
        opp_grip: f64,
        stale: bool,
    },
    Classified {
        emotion: String,
        subtendency: u8,
        distance: f64,
    },
    Event { name: String, t_us: u64 },
    Error { reason: String },
}

impl ConsoleMessage {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("console messages always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        serde_json::from_str(text).map_err(|e| format!("malformed message: {e}"))
    }

    pub fn state(out: &TickOutput, t_us: u64) -> Self {
        ConsoleMessage::State {
            t_us,
            phase: out.phase,
            dist: out.dist.intensity,
            own_grip: out.own_grip.value(),
            opp_grip: out.opp_grip.value(),
            stale: out.stale,
        }
    }

    fn error(reason: impl Into<String>) -> Self {
        ConsoleMessage::Error {
            reason: reason.into(),
        }
    }
}

impl Serialize for ContactPhase {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for ContactPhase {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

pub type ClientId = u64;

struct Seat {
    client: ClientId,
    engine: SessionEngine,
    grip: Grip,
    wrist_mm: [i32; 3],
    last_state_us: Option<u64>,
    /// Own view since the last return to idle, for classification.
    history: VecDeque<Record>,
}

struct LiveSession {
    t0: u64,
    seats: BTreeMap<Role, Seat>,
}

struct ReplayStream {
    rec: SessionRecording,
    next: usize,
    t0: u64,
    last_state_us: Option<u64>,
    pending_state: Option<(u64, TickOutput)>,
}

enum ClientState {
    Unjoined,
    Live { session: String, role: Role },
    Replay(Box<ReplayStream>),
}

pub struct ConsoleHub {
    settings: SessionSettings,
    map: Option<EmotionMap>,
    recordings: BTreeMap<String, SessionRecording>,
    sessions: BTreeMap<String, LiveSession>,
    clients: BTreeMap<ClientId, ClientState>,
    next_client: ClientId,
}

impl ConsoleHub {
    pub fn new(settings: SessionSettings, map: Option<EmotionMap>) -> Self {
        Self {
            settings,
            map,
            recordings: BTreeMap::new(),
            sessions: BTreeMap::new(),
            clients: BTreeMap::new(),
            next_client: 1,
        }
    }

    /// Makes a recording available for replay joins under its recording id.
    pub fn add_recording(&mut self, rec: SessionRecording) {
        self.recordings.insert(rec.header.recording_id.clone(), rec);
    }

    pub fn recording_ids(&self) -> impl Iterator<Item = &str> {
        self.recordings.keys().map(String::as_str)
    }

    pub fn connect(&mut self) -> ClientId {
        let id = self.next_client;
        self.next_client += 1;
        self.clients.insert(id, ClientState::Unjoined);
        id
    }

    pub fn disconnect(&mut self, id: ClientId) {
        if let Some(ClientState::Live { session, role }) = self.clients.remove(&id) {
            if let Some(s) = self.sessions.get_mut(&session) {
                s.seats.remove(&role);
                if s.seats.is_empty() {
                    self.sessions.remove(&session);
                }
            }
        }
    }

    /// Handles one text message from a client and returns the immediate
    /// replies to that client.
    pub fn handle_text(&mut self, id: ClientId, text: &str, now_us: u64) -> Vec<ConsoleMessage> {
        match ConsoleMessage::from_json(text) {
            Ok(msg) => self.handle(id, msg, now_us),
            Err(reason) => vec![ConsoleMessage::error(reason)],
        }
    }

    pub fn handle(&mut self, id: ClientId, msg: ConsoleMessage, now_us: u64) -> Vec<ConsoleMessage> {
        let Some(state) = self.clients.get(&id) else {
            return vec![ConsoleMessage::error("unknown client")];
        };
        match msg {
            ConsoleMessage::Join { session, role, replay } => {
                if !matches!(state, ClientState::Unjoined) {
                    return vec![ConsoleMessage::error("already joined")];
                }
                if let Some(rec_id) = replay {
                    let Some(rec) = self.recordings.get(&rec_id) else {
                        return vec![ConsoleMessage::error(format!("no recording {rec_id:?}"))];
                    };
                    self.clients.insert(
                        id,
                        ClientState::Replay(Box::new(ReplayStream {
                            rec: rec.clone(),
                            next: 0,
                            t0: now_us,
                            last_state_us: None,
                            pending_state: None,
                        })),
                    );
                    return vec![joined(session, role)];
                }
                let live = self.sessions.entry(session.clone()).or_insert_with(|| LiveSession {
                    t0: now_us,
                    seats: BTreeMap::new(),
                });
                if live.seats.len() >= 2 {
                    return vec![ConsoleMessage::error(format!("session {session:?} is full"))];
                }
                if live.seats.contains_key(&role) {
                    return vec![ConsoleMessage::error(format!(
                        "role {role:?} in session {session:?} is taken"
                    ))];
                }
                live.seats.insert(
                    role,
                    Seat {
                        client: id,
                        engine: SessionEngine::new(self.settings),
                        grip: Grip::ZERO,
                        wrist_mm: [0; 3],
                        last_state_us: None,
                        history: VecDeque::new(),
                    },
                );
                self.clients.insert(
                    id,
                    ClientState::Live {
                        session: session.clone(),
                        role,
                    },
                );
                vec![joined(session, role)]
            }
            ConsoleMessage::Input { grip, wrist_mm } => {
                let ClientState::Live { session, role } = state else {
                    return vec![ConsoleMessage::error("input before joining a live session")];
                };
                let Ok(grip) = Grip::new(grip) else {
                    return vec![ConsoleMessage::error(format!("grip {grip} outside [0, 1]"))];
                };
                if let Some(seat) = self
                    .sessions
                    .get_mut(session)
                    .and_then(|s| s.seats.get_mut(role))
                {
                    seat.grip = grip;
                    seat.wrist_mm = wrist_mm;
                }
                vec![]
            }
            _ => vec![ConsoleMessage::error("message type is server-to-client only")],
        }
    }

    /// Advances every session and replay stream to `now_us` and returns the
    /// messages to deliver.
    pub fn tick(&mut self, now_us: u64) -> Vec<(ClientId, ConsoleMessage)> {
        let mut out = Vec::new();
        for live in self.sessions.values_mut() {
            tick_session(live, &self.settings, self.map.as_ref(), now_us, &mut out);
        }
        for (&id, state) in self.clients.iter_mut() {
            if let ClientState::Replay(stream) = state {
                stream.advance(id, now_us, &mut out);
            }
        }
        out
    }
}

fn joined(session: String, role: Role) -> ConsoleMessage {
    ConsoleMessage::Joined {
        session,
        role,
        version: PROTOCOL_VERSION,
    }
}

fn tick_session(
    live: &mut LiveSession,
    settings: &SessionSettings,
    map: Option<&EmotionMap>,
    now_us: u64,
    out: &mut Vec<(ClientId, ConsoleMessage)>,
) {
    let t = now_us.saturating_sub(live.t0);
    let mut samples = BTreeMap::new();
    for (&role, seat) in live.seats.iter_mut() {
        let angles = settings.calibration.angles_for_grip(seat.grip);
        let s = seat.engine.sample_with_grip(angles, seat.grip, seat.wrist_mm, t);
        samples.insert(role, s);
    }
    for (&role, seat) in live.seats.iter_mut() {
        if let Some(s) = samples.get(&role.other()) {
            seat.engine.ingest(*s, t);
            seat.history.push_back(Record::remote(t, *s));
        }
        let own = samples[&role];
        let prev = seat.engine.phase();
        let state = seat.engine.tick(&own, t);
        seat.history.push_back(Record::local(t, own));
        seat.history.push_back(Record::stimulus(state));

        if prev != state.phase {
            let name = match state.phase {
                ContactPhase::Clasped => Some(EVENT_CLASP),
                ContactPhase::Released => Some(EVENT_RELEASE),
                ContactPhase::Idle => None,
            };
            if let Some(name) = name {
                out.push((
                    seat.client,
                    ConsoleMessage::Event {
                        name: name.to_string(),
                        t_us: t,
                    },
                ));
            }
        }
        if prev == ContactPhase::Clasped && state.phase == ContactPhase::Released {
            if let Some(map) = map {
                out.push((seat.client, classify_history(map, settings, &seat.history)));
            }
        }
        if state.phase == ContactPhase::Idle {
            while seat
                .history
                .front()
                .is_some_and(|r| r.t_us + IDLE_HISTORY_US < t)
            {
                seat.history.pop_front();
            }
            // drop everything from the finished episode
            if prev == ContactPhase::Released {
                seat.history.retain(|r| r.t_us >= t);
            }
        }
        if seat
            .last_state_us
            .is_none_or(|last| t >= last + STATE_INTERVAL_US)
        {
            seat.last_state_us = Some(t);
            out.push((seat.client, ConsoleMessage::state(&state, t)));
        }
    }
}

fn classify_history(map: &EmotionMap, settings: &SessionSettings, history: &VecDeque<Record>) -> ConsoleMessage {
    let mut rec = SessionRecording::new(RecordingHeader::new("console", "console", *settings));
    for r in history {
        if rec.append(r.clone()).is_err() {
            return ConsoleMessage::error("internal: console history out of order");
        }
    }
    match classify(map, &rec) {
        Ok(c) => ConsoleMessage::Classified {
            emotion: c.emotion.to_string(),
            subtendency: c.subtendency,
            distance: c.distance,
        },
        Err(e) => ConsoleMessage::error(format!("classification failed: {e}")),
    }
}

impl ReplayStream {
    fn advance(&mut self, id: ClientId, now_us: u64, out: &mut Vec<(ClientId, ConsoleMessage)>) {
        let elapsed = now_us.saturating_sub(self.t0);
        let records = self.rec.records();
        while let Some(r) = records.get(self.next).filter(|r| r.t_us <= elapsed) {
            match &r.body {
                RecordBody::Stimulus(s) => self.pending_state = Some((r.t_us, *s)),
                RecordBody::Event(name) => out.push((
                    id,
                    ConsoleMessage::Event {
                        name: name.clone(),
                        t_us: r.t_us,
                    },
                )),
                _ => {}
            }
            self.next += 1;
        }
        let finished = self.next >= records.len();
        if let Some((t, s)) = self.pending_state {
            if finished || self.last_state_us.is_none_or(|last| elapsed >= last + STATE_INTERVAL_US) {
                self.last_state_us = Some(elapsed);
                self.pending_state = None;
                out.push((id, ConsoleMessage::state(&s, t)));
            }
        }
    }
}
