//! Governed human-AI reasoning sessions.
//!
//! A session walks the loop *human abstraction → model articulation → human
//! reflection* under a [`protocol::ModePolicy`]. Every accepted move is written
//! to a SHA-256 hash-chained trace ([`ledger`]), from which the epistemic
//! telemetry in [`metrics`] is computed. [`experiment`] replays scripted agents
//! through control and treatment arms; [`backend`] supplies model articulations.

pub mod backend;
pub mod canonical;
pub mod clock;
pub mod config;
pub mod decimal;
pub mod engine;
pub mod experiment;
pub mod ledger;
pub mod metrics;
pub mod protocol;

pub use clock::{Clock, IdSource, ManualClock, SequentialIds, SystemClock, UuidIds};
pub use decimal::Fixed4;
pub use engine::{Engine, EngineError};
pub use ledger::{Actor, Payload, TraceEvent};
pub use protocol::{
    GovernedSession, ModePolicy, Phase, ProtocolError, ReasoningMode, ReflectionAction, Session,
};
