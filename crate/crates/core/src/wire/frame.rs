//! Frame layout and stream decoding.
//!
//! ```text
//! 0x7E | type | seq | len (u16 LE) | payload[len] | c1 | c2
//! ```
//!
//! `(c1, c2)` is Fletcher-16 over `type ‖ seq ‖ len ‖ payload`. There is no
//! byte stuffing: the decoder resynchronizes by dropping one byte and
//! rescanning for the next start byte whenever a candidate frame is rejected.

use serde::Serialize;

use super::WireError;

pub const START_OF_FRAME: u8 = 0x7E;
pub const MAX_PAYLOAD: usize = 250;
/// Start byte, type, seq, two length bytes and two checksum bytes.
pub const FRAME_OVERHEAD: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
#[repr(u8)]
pub enum FrameType {
    TestBatch = 0x01,
    Result = 0x02,
    Ack = 0x03,
    Nack = 0x04,
    Status = 0x05,
}

impl FrameType {
    pub fn from_byte(b: u8) -> Option<FrameType> {
        match b {
            0x01 => Some(FrameType::TestBatch),
            0x02 => Some(FrameType::Result),
            0x03 => Some(FrameType::Ack),
            0x04 => Some(FrameType::Nack),
            0x05 => Some(FrameType::Status),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Frame {
    kind: FrameType,
    seq: u8,
    payload: Vec<u8>,
}

impl Frame {
    pub fn new(kind: FrameType, seq: u8, payload: Vec<u8>) -> Result<Frame, WireError> {
        if payload.len() > MAX_PAYLOAD {
            return Err(WireError::PayloadTooLong(payload.len()));
        }
        Ok(Frame { kind, seq, payload })
    }

    pub fn ack(seq: u8) -> Frame {
        Frame {
            kind: FrameType::Ack,
            seq,
            payload: Vec::new(),
        }
    }

    pub fn nack(seq: u8) -> Frame {
        Frame {
            kind: FrameType::Nack,
            seq,
            payload: Vec::new(),
        }
    }

    pub fn kind(&self) -> FrameType {
        self.kind
    }

    pub fn seq(&self) -> u8 {
        self.seq
    }

    pub fn payload(&self) -> &[u8] {
        &self.payload
    }

    pub fn encoded_len(&self) -> usize {
        FRAME_OVERHEAD + self.payload.len()
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        out.push(START_OF_FRAME);
        out.push(self.kind as u8);
        out.push(self.seq);
        out.extend_from_slice(&(self.payload.len() as u16).to_le_bytes());
        out.extend_from_slice(&self.payload);
        let (c1, c2) = fletcher16(&out[1..]);
        out.push(c1);
        out.push(c2);
        out
    }
}

/// Fletcher-16 with both running sums starting at zero, modulus 255.
pub fn fletcher16(data: &[u8]) -> (u8, u8) {
    let (mut sum1, mut sum2) = (0u16, 0u16);
    for &b in data {
        sum1 = (sum1 + u16::from(b)) % 255;
        sum2 = (sum2 + sum1) % 255;
    }
    (sum1 as u8, sum2 as u8)
}

pub fn encode_frame(frame: &Frame) -> Vec<u8> {
    frame.encode()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct DecodeDiagnostics {
    /// Candidate frames abandoned because of an unknown type or an oversized length.
    pub resyncs: u32,
    pub checksum_failures: u32,
    /// Candidates that ran past the end of the input.
    pub truncated: u32,
    /// Bytes skipped while hunting for a start byte.
    pub skipped_bytes: u32,
}

impl DecodeDiagnostics {
    pub fn is_clean(&self) -> bool {
        *self == DecodeDiagnostics::default()
    }

    /// Evidence that a frame was on the wire but arrived damaged.
    pub fn saw_garbled_frame(&self) -> bool {
        self.checksum_failures > 0 || self.resyncs > 0 || self.truncated > 0
    }

    pub fn merge(&mut self, other: &DecodeDiagnostics) {
        self.resyncs += other.resyncs;
        self.checksum_failures += other.checksum_failures;
        self.truncated += other.truncated;
        self.skipped_bytes += other.skipped_bytes;
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Decoded {
    pub frames: Vec<Frame>,
    /// Offset one past the last byte of each frame in `frames`.
    pub ends: Vec<usize>,
    pub diagnostics: DecodeDiagnostics,
}

/// Extracts every valid frame from `bytes`, resynchronizing after any damage.
pub fn decode_stream(bytes: &[u8]) -> Decoded {
    let mut out = Decoded::default();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] != START_OF_FRAME {
            out.diagnostics.skipped_bytes += 1;
            i += 1;
            continue;
        }
        let rest = &bytes[i..];
        if rest.len() < FRAME_OVERHEAD {
            out.diagnostics.truncated += 1;
            i += 1;
            continue;
        }
        let Some(kind) = FrameType::from_byte(rest[1]) else {
            out.diagnostics.resyncs += 1;
            i += 1;
            continue;
        };
        let len = usize::from(u16::from_le_bytes([rest[3], rest[4]]));
        if len > MAX_PAYLOAD {
            out.diagnostics.resyncs += 1;
            i += 1;
            continue;
        }
        let total = FRAME_OVERHEAD + len;
        if rest.len() < total {
            out.diagnostics.truncated += 1;
            i += 1;
            continue;
        }
        let (c1, c2) = fletcher16(&rest[1..5 + len]);
        if (c1, c2) != (rest[5 + len], rest[6 + len]) {
            out.diagnostics.checksum_failures += 1;
            i += 1;
            continue;
        }
        out.frames.push(Frame {
            kind,
            seq: rest[2],
            payload: rest[5..5 + len].to_vec(),
        });
        i += total;
        out.ends.push(i);
    }
    out
}
