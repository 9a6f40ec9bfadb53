//! Frame transcript: one line per frame put on the wire.
//!
//! ```text
//! <seconds>.<nanoseconds> <T>A|A>T> <hex bytes as sent>
//! ```

use std::fmt::Write as _;

use super::frame::{decode_stream, Frame, FrameType};
use super::link::{Direction, SimTime};
use super::WireError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TranscriptEntry {
    /// Start of transmission.
    pub at: SimTime,
    pub direction: Direction,
    pub bytes: Vec<u8>,
}

impl TranscriptEntry {
    pub fn to_line(&self) -> String {
        format!(
            "{} {} {}",
            self.at,
            self.direction.tag(),
            hex::encode(&self.bytes)
        )
    }

    pub fn parse_line(line: &str) -> Result<TranscriptEntry, WireError> {
        let bad = |reason: &'static str| WireError::BadTranscript(reason);
        let mut parts = line.split_ascii_whitespace();
        let (Some(ts), Some(dir), Some(hex_bytes), None) =
            (parts.next(), parts.next(), parts.next(), parts.next())
        else {
            return Err(bad("expected three fields"));
        };
        let (secs, nanos) = ts
            .split_once('.')
            .ok_or(bad("timestamp needs a fractional part"))?;
        if nanos.len() != 9 || !nanos.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad("timestamp needs nine fractional digits"));
        }
        let secs: u64 = secs.parse().map_err(|_| bad("bad seconds"))?;
        let nanos: u64 = nanos.parse().map_err(|_| bad("bad nanoseconds"))?;
        let at = secs
            .checked_mul(1_000_000_000)
            .and_then(|s| s.checked_add(nanos))
            .ok_or(bad("timestamp overflow"))?;
        let direction = Direction::from_tag(dir).ok_or(bad("unknown direction"))?;
        let bytes = hex::decode(hex_bytes).map_err(|_| bad("bad hex"))?;
        Ok(TranscriptEntry {
            at: SimTime(at),
            direction,
            bytes,
        })
    }

    /// The frame as it was sent; transcripts record bytes before fault injection.
    pub fn frame(&self) -> Option<Frame> {
        decode_stream(&self.bytes).frames.into_iter().next()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Transcript {
    entries: Vec<TranscriptEntry>,
}

impl Transcript {
    pub fn push(&mut self, entry: TranscriptEntry) {
        self.entries.push(entry);
    }

    pub fn entries(&self) -> &[TranscriptEntry] {
        &self.entries
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            let _ = writeln!(out, "{}", e.to_line());
        }
        out
    }

    /// Parses a rendered transcript. Blank lines are ignored.
    pub fn parse(text: &str) -> Result<Transcript, (usize, WireError)> {
        let entries = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(n, l)| TranscriptEntry::parse_line(l).map_err(|e| (n + 1, e)))
            .collect::<Result<_, _>>()?;
        Ok(Transcript { entries })
    }

    /// Start times of every TEST_BATCH transmission.
    pub fn test_batch_times(&self) -> impl Iterator<Item = SimTime> + '_ {
        self.entries
            .iter()
            .filter(|e| e.direction == Direction::ToAgent)
            .filter(|e| e.frame().is_some_and(|f| f.kind() == FrameType::TestBatch))
            .map(|e| e.at)
    }
}
