//! Two-peer real-time session protocol.
//!
//! Peers exchange sensor samples over an unreliable, unordered datagram
//! transport at the tick rate. Each peer renders on its own clock: remote
//! state is last-value-wins, held for a short window and then faded out when
//! the peer goes quiet. Clock offset is estimated for recording alignment
//! only and never gates a tick.

mod engine;
pub mod harness;
pub mod udp;
mod wire;

pub use engine::{
    clock_offset, tick, ClockError, Ingest, LossPolicy, RemoteState, SessionEngine,
    SessionSettings, TickOutput, DEFAULT_TICK_US,
};
pub use wire::{
    decode_message, encode_message, DecodeError, SensorSample, WireMessage, MAGIC, MAX_DATAGRAM,
    SENSOR_PAYLOAD_LEN, TYPE_BYE, TYPE_CLOCK_PING, TYPE_CLOCK_PONG, TYPE_HELLO, TYPE_SENSOR,
    VERSION,
};
