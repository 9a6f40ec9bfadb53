//! The simulated serial link: framing, payload codecs, timing, faults and transcripts.

mod frame;
pub mod free_running;
mod link;
pub mod payload;
mod transcript;

use thiserror::Error;

pub use frame::{
    decode_stream, encode_frame, fletcher16, DecodeDiagnostics, Decoded, Frame, FrameType, FRAME_OVERHEAD,
    MAX_PAYLOAD, START_OF_FRAME,
};
pub use link::{
    channel_transfer, receive, Direction, Endpoint, FaultSpec, FaultyChannel, Inbox, Link, LinkConfig,
    LinkStats, Reception, SendOutcome, SimTime, TimedByte, Transfer, VirtualClock,
};
pub use transcript::{Transcript, TranscriptEntry};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WireError {
    #[error("payload of {0} bytes exceeds the {MAX_PAYLOAD}-byte limit")]
    PayloadTooLong(usize),
    #[error("{0} entries do not fit in one payload")]
    TooManyEntries(usize),
    #[error("payload is empty")]
    EmptyPayload,
    #[error("payload declares {count} entries but carries {body} body bytes")]
    LengthMismatch { count: usize, body: usize },
    #[error("unknown outcome code {0}")]
    BadOutcome(u8),
    #[error("unknown status flags {0:#04x}")]
    BadFlags(u8),
    #[error("unknown channel id {0}")]
    UnknownChannel(u8),
    #[error("{name}: {reason}")]
    InvalidConfig {
        name: &'static str,
        reason: &'static str,
    },
    #[error("malformed transcript line: {0}")]
    BadTranscript(&'static str),
    #[error("link endpoint disconnected")]
    Disconnected,
}
