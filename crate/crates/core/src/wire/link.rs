//! Lockstep simulation of the serial link: byte timing on a virtual clock,
//! seeded fault injection, and stop-and-wait delivery with ACK/NACK.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::frame::{decode_stream, DecodeDiagnostics, Frame, FrameType, START_OF_FRAME};
use super::transcript::{Transcript, TranscriptEntry};
use super::WireError;

/// Virtual time in nanoseconds since the start of a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SimTime(pub u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub fn from_ms(ms: f64) -> SimTime {
        SimTime((ms * 1e6).round() as u64)
    }

    pub fn from_secs(s: u64) -> SimTime {
        SimTime(s * 1_000_000_000)
    }

    pub fn as_nanos(self) -> u64 {
        self.0
    }

    pub fn as_ms(self) -> f64 {
        self.0 as f64 / 1e6
    }

    pub fn plus(self, ns: u64) -> SimTime {
        SimTime(self.0 + ns)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:09}", self.0 / 1_000_000_000, self.0 % 1_000_000_000)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct VirtualClock {
    now: SimTime,
}

impl VirtualClock {
    pub fn now(&self) -> SimTime {
        self.now
    }

    /// Moves the clock forward to `t`; never moves it back.
    pub fn advance_to(&mut self, t: SimTime) {
        self.now = self.now.max(t);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinkConfig {
    pub baud: u32,
    pub inter_byte_timeout_ms: f64,
    pub ack_timeout_ms: f64,
    pub max_retransmits: u32,
}

impl Default for LinkConfig {
    fn default() -> Self {
        LinkConfig {
            baud: 9600,
            inter_byte_timeout_ms: 50.0,
            ack_timeout_ms: 200.0,
            max_retransmits: 3,
        }
    }
}

impl LinkConfig {
    pub fn validate(&self) -> Result<(), WireError> {
        if self.baud == 0 {
            return Err(WireError::InvalidConfig {
                name: "link.baud",
                reason: "must be positive",
            });
        }
        for (name, v) in [
            ("link.inter_byte_timeout_ms", self.inter_byte_timeout_ms),
            ("link.ack_timeout_ms", self.ack_timeout_ms),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(WireError::InvalidConfig {
                    name,
                    reason: "must be positive and finite",
                });
            }
        }
        if self.max_retransmits == 0 {
            return Err(WireError::InvalidConfig {
                name: "link.max_retransmits",
                reason: "must be positive",
            });
        }
        Ok(())
    }

    /// Time from the start of transmission to the end of byte `index` (8N1: ten bits per byte).
    pub fn byte_end_offset_ns(&self, index: usize) -> u64 {
        ((index as u128 + 1) * 10 * 1_000_000_000 / u128::from(self.baud)) as u64
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FaultSpec {
    pub corrupt_byte_prob: f64,
    pub drop_frame_prob: f64,
    pub delay_jitter_max_ms: f64,
    pub rng_seed: u64,
}

impl FaultSpec {
    pub fn clean() -> FaultSpec {
        FaultSpec::default()
    }

    pub fn validate(&self) -> Result<(), WireError> {
        for (name, p) in [
            ("faults.corrupt_byte_prob", self.corrupt_byte_prob),
            ("faults.drop_frame_prob", self.drop_frame_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(WireError::InvalidConfig {
                    name,
                    reason: "must lie in [0, 1]",
                });
            }
        }
        if !(self.delay_jitter_max_ms >= 0.0 && self.delay_jitter_max_ms.is_finite()) {
            return Err(WireError::InvalidConfig {
                name: "faults.delay_jitter_max_ms",
                reason: "must be finite and non-negative",
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimedByte {
    pub byte: u8,
    pub at: SimTime,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transfer {
    pub delivered: Vec<TimedByte>,
    pub dropped: bool,
    pub corrupted_bytes: u32,
    /// When the sender finished putting the frame on the wire.
    pub end: SimTime,
}

/// One direction of the link with its own seeded fault stream.
#[derive(Debug, Clone)]
pub struct FaultyChannel {
    spec: FaultSpec,
    rng: ChaCha8Rng,
    forced_drops: u32,
}

impl FaultyChannel {
    pub fn new(spec: FaultSpec) -> FaultyChannel {
        FaultyChannel {
            rng: ChaCha8Rng::seed_from_u64(spec.rng_seed),
            spec,
            forced_drops: 0,
        }
    }

    pub fn spec(&self) -> &FaultSpec {
        &self.spec
    }

    /// Drops the next `n` frames regardless of the configured probability.
    pub fn force_drops(&mut self, n: u32) {
        self.forced_drops += n;
    }

    /// Puts `bytes` on the wire starting at `start`.
    ///
    /// Drop decisions draw once per frame; jitter and corruption draw per
    /// byte, and only when their parameter is non-zero.
    pub fn transfer(&mut self, bytes: &[u8], start: SimTime, link: &LinkConfig) -> Transfer {
        let nominal_end = start.plus(if bytes.is_empty() {
            0
        } else {
            link.byte_end_offset_ns(bytes.len() - 1)
        });
        let forced = self.forced_drops > 0;
        if forced {
            self.forced_drops -= 1;
        }
        let dropped = if self.spec.drop_frame_prob > 0.0 {
            let draw: f64 = self.rng.random();
            forced || draw < self.spec.drop_frame_prob
        } else {
            forced
        };
        if dropped {
            return Transfer {
                delivered: Vec::new(),
                dropped: true,
                corrupted_bytes: 0,
                end: nominal_end,
            };
        }

        let jitter_max_ns = (self.spec.delay_jitter_max_ms * 1e6).round() as u64;
        let mut delivered = Vec::with_capacity(bytes.len());
        let mut corrupted_bytes = 0;
        let mut jitter_total = 0u64;
        for (i, &b) in bytes.iter().enumerate() {
            if jitter_max_ns > 0 {
                jitter_total += self.rng.random_range(0..=jitter_max_ns);
            }
            let mut byte = b;
            if self.spec.corrupt_byte_prob > 0.0 && self.rng.random::<f64>() < self.spec.corrupt_byte_prob {
                byte ^= self.rng.random_range(1..=255u8);
                corrupted_bytes += 1;
            }
            delivered.push(TimedByte {
                byte,
                at: start.plus(link.byte_end_offset_ns(i) + jitter_total),
            });
        }
        let end = delivered.last().map_or(start, |b| b.at);
        Transfer {
            delivered,
            dropped: false,
            corrupted_bytes,
            end,
        }
    }
}

/// Delivers `bytes` through `channel`; see [`FaultyChannel::transfer`].
pub fn channel_transfer(
    bytes: &[u8],
    link: &LinkConfig,
    channel: &mut FaultyChannel,
    clock: &mut VirtualClock,
) -> Transfer {
    let t = channel.transfer(bytes, clock.now(), link);
    clock.advance_to(t.end);
    t
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Reception {
    /// Valid frames with the arrival time of their last byte.
    pub frames: Vec<(Frame, SimTime)>,
    pub diagnostics: DecodeDiagnostics,
    /// Bursts cut short by an inter-byte gap longer than the timeout.
    pub timeouts: u32,
}

/// Receiver side of a transfer: splits on inter-byte timeouts, then decodes each burst.
pub fn receive(delivered: &[TimedByte], link: &LinkConfig) -> Reception {
    let timeout_ns = (link.inter_byte_timeout_ms * 1e6).round() as u64;
    let mut out = Reception::default();
    let mut burst_start = 0;
    for i in 0..=delivered.len() {
        let split = i == delivered.len()
            || (i > burst_start && delivered[i].at.0 - delivered[i - 1].at.0 > timeout_ns);
        if !split {
            continue;
        }
        if i < delivered.len() {
            out.timeouts += 1;
        }
        let burst = &delivered[burst_start..i];
        let bytes: Vec<u8> = burst.iter().map(|b| b.byte).collect();
        let decoded = decode_stream(&bytes);
        out.diagnostics.merge(&decoded.diagnostics);
        for (frame, end) in decoded.frames.into_iter().zip(decoded.ends) {
            out.frames.push((frame, burst[end - 1].at));
        }
        burst_start = i;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Direction {
    /// Testing agent to agent under test.
    ToAgent,
    /// Agent under test to testing agent.
    ToTester,
}

impl Direction {
    pub fn reverse(self) -> Direction {
        match self {
            Direction::ToAgent => Direction::ToTester,
            Direction::ToTester => Direction::ToAgent,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Direction::ToAgent => "T>A",
            Direction::ToTester => "A>T",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Direction> {
        match tag {
            "T>A" => Some(Direction::ToAgent),
            "A>T" => Some(Direction::ToTester),
            _ => None,
        }
    }

    fn index(self) -> usize {
        match self {
            Direction::ToAgent => 0,
            Direction::ToTester => 1,
        }
    }
}

/// Application layer of the receiving side of a [`Link::reliable_send`].
pub trait Endpoint {
    /// Handles a newly accepted (non-duplicate) frame and optionally produces
    /// an application reply for the caller to send back.
    fn on_frame(&mut self, frame: &Frame, now: SimTime) -> Option<Frame>;
}

/// An endpoint that just keeps the frames it is given.
#[derive(Debug, Default)]
pub struct Inbox {
    pub frames: Vec<Frame>,
}

impl Endpoint for Inbox {
    fn on_frame(&mut self, frame: &Frame, _now: SimTime) -> Option<Frame> {
        self.frames.push(frame.clone());
        None
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SendOutcome {
    Delivered { retransmits: u32, reply: Option<Frame> },
    Lost { attempts: u32 },
}

impl SendOutcome {
    pub fn is_delivered(&self) -> bool {
        matches!(self, SendOutcome::Delivered { .. })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkStats {
    /// Every frame put on the wire, including retransmissions and ACK/NACK.
    pub frames_sent: u64,
    pub retransmits: u64,
    /// Frames abandoned after exhausting retransmissions.
    pub lost: u64,
    pub tester_tx_bytes: u64,
    pub tester_rx_bytes: u64,
    pub checksum_failures: u64,
}

impl LinkStats {
    pub fn since(&self, earlier: &LinkStats) -> LinkStats {
        LinkStats {
            frames_sent: self.frames_sent - earlier.frames_sent,
            retransmits: self.retransmits - earlier.retransmits,
            lost: self.lost - earlier.lost,
            tester_tx_bytes: self.tester_tx_bytes - earlier.tester_tx_bytes,
            tester_rx_bytes: self.tester_rx_bytes - earlier.tester_rx_bytes,
            checksum_failures: self.checksum_failures - earlier.checksum_failures,
        }
    }
}

/// Duplex link between the testing agent and one agent under test.
#[derive(Debug, Clone)]
pub struct Link {
    config: LinkConfig,
    channels: [FaultyChannel; 2],
    clock: VirtualClock,
    stats: LinkStats,
    last_accepted: [Option<(FrameType, u8)>; 2],
    transcript: Transcript,
}

impl Link {
    /// Both directions use `faults`; the return path gets a derived seed.
    pub fn new(config: LinkConfig, faults: FaultSpec) -> Link {
        let reverse = FaultSpec {
            rng_seed: faults.rng_seed ^ 0x9E37_79B9_7F4A_7C15,
            ..faults
        };
        Link::with_directions(config, faults, reverse)
    }

    pub fn with_directions(config: LinkConfig, to_agent: FaultSpec, to_tester: FaultSpec) -> Link {
        Link {
            config,
            channels: [FaultyChannel::new(to_agent), FaultyChannel::new(to_tester)],
            clock: VirtualClock::default(),
            stats: LinkStats::default(),
            last_accepted: [None, None],
            transcript: Transcript::default(),
        }
    }

    pub fn config(&self) -> &LinkConfig {
        &self.config
    }

    pub fn now(&self) -> SimTime {
        self.clock.now()
    }

    pub fn advance_to(&mut self, t: SimTime) {
        self.clock.advance_to(t);
    }

    pub fn stats(&self) -> &LinkStats {
        &self.stats
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    pub fn channel_mut(&mut self, direction: Direction) -> &mut FaultyChannel {
        &mut self.channels[direction.index()]
    }

    /// Puts one frame on the wire in `direction` and returns what the far side received.
    fn transmit(&mut self, direction: Direction, frame: &Frame, start: SimTime) -> (Transfer, Reception) {
        let bytes = frame.encode();
        self.transcript.push(TranscriptEntry {
            at: start,
            direction,
            bytes: bytes.clone(),
        });
        self.stats.frames_sent += 1;
        if direction == Direction::ToAgent {
            self.stats.tester_tx_bytes += bytes.len() as u64;
        }
        let transfer = self.channels[direction.index()].transfer(&bytes, start, &self.config);
        if direction == Direction::ToTester {
            self.stats.tester_rx_bytes += transfer.delivered.len() as u64;
        }
        let reception = receive(&transfer.delivered, &self.config);
        self.stats.checksum_failures += u64::from(reception.diagnostics.checksum_failures);
        (transfer, reception)
    }

    /// Stop-and-wait delivery of `frame` to `peer`.
    ///
    /// Each attempt waits up to `ack_timeout_ms` after the last byte leaves for
    /// a matching ACK. A matching NACK triggers an immediate retransmission.
    /// Duplicates caused by lost ACKs are re-acknowledged but not handed to
    /// `peer` again.
    pub fn reliable_send(
        &mut self,
        direction: Direction,
        frame: &Frame,
        peer: &mut dyn Endpoint,
    ) -> SendOutcome {
        let ack_timeout_ns = SimTime::from_ms(self.config.ack_timeout_ms).0;
        let mut reply = None;
        let attempts = self.config.max_retransmits + 1;
        for attempt in 0..attempts {
            if attempt > 0 {
                self.stats.retransmits += 1;
            }
            let (transfer, reception) = self.transmit(direction, frame, self.clock.now());
            let deadline = transfer.end.plus(ack_timeout_ns);

            let accepted = reception
                .frames
                .iter()
                .find(|(f, _)| f.kind() == frame.kind() && f.seq() == frame.seq())
                .map(|&(_, at)| at);
            let response = match accepted {
                Some(at) => {
                    let key = Some((frame.kind(), frame.seq()));
                    let slot = &mut self.last_accepted[direction.index()];
                    if *slot != key {
                        *slot = key;
                        reply = peer.on_frame(frame, at);
                    }
                    Some((Frame::ack(frame.seq()), at))
                }
                None if reception.diagnostics.saw_garbled_frame() || reception.timeouts > 0 => {
                    let seq = garbled_seq(&transfer);
                    let at = transfer.delivered.last().map_or(transfer.end, |b| b.at);
                    seq.map(|s| (Frame::nack(s), at))
                }
                None => None,
            };

            if let Some((control, at)) = response {
                let back = direction.reverse();
                let (_, control_rx) = self.transmit(back, &control, at);
                let answered = control_rx.frames.iter().find(|(f, at)| {
                    f.seq() == frame.seq()
                        && *at <= deadline
                        && matches!(f.kind(), FrameType::Ack | FrameType::Nack)
                });
                match answered {
                    Some((f, at)) if f.kind() == FrameType::Ack => {
                        self.clock.advance_to(*at);
                        return SendOutcome::Delivered {
                            retransmits: attempt,
                            reply,
                        };
                    }
                    Some((_, at)) => {
                        self.clock.advance_to(*at);
                        continue;
                    }
                    None => {}
                }
            }
            self.clock.advance_to(deadline);
        }
        self.stats.lost += 1;
        SendOutcome::Lost { attempts }
    }
}

fn garbled_seq(transfer: &Transfer) -> Option<u8> {
    let bytes = &transfer.delivered;
    let start = bytes.iter().position(|b| b.byte == START_OF_FRAME)?;
    bytes.get(start + 2).map(|b| b.byte)
}
