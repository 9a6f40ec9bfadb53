//! Free-running transport: each endpoint owns one [`Port`] on its own thread.
//!
//! The two byte queues are the only shared state; each has exactly one
//! producer and one consumer. Timeouts are wall-clock, so this mode is not
//! deterministic and the lockstep [`Link`](super::Link) is used for campaigns.

use std::collections::VecDeque;
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::time::{Duration, Instant};

use super::frame::{decode_stream, Frame, FrameType, FRAME_OVERHEAD, MAX_PAYLOAD};
use super::link::{Endpoint, FaultSpec, FaultyChannel, LinkConfig, SendOutcome, SimTime};
use super::WireError;

pub struct Port {
    config: LinkConfig,
    outgoing: Sender<Vec<u8>>,
    incoming: Receiver<Vec<u8>>,
    faults: FaultyChannel,
    buffer: Vec<u8>,
    pending: VecDeque<Frame>,
    last_accepted: Option<(FrameType, u8)>,
    seq: u8,
    epoch: Instant,
}

/// Two connected ports. `a_faults` applies to bytes sent by the first port.
pub fn duplex(config: LinkConfig, a_faults: FaultSpec, b_faults: FaultSpec) -> (Port, Port) {
    let (a_tx, b_rx) = mpsc::channel();
    let (b_tx, a_rx) = mpsc::channel();
    let epoch = Instant::now();
    let port = |outgoing, incoming, faults| Port {
        config,
        outgoing,
        incoming,
        faults: FaultyChannel::new(faults),
        buffer: Vec::new(),
        pending: VecDeque::new(),
        last_accepted: None,
        seq: 0,
        epoch,
    };
    (port(a_tx, a_rx, a_faults), port(b_tx, b_rx, b_faults))
}

impl Port {
    fn now(&self) -> SimTime {
        SimTime(self.epoch.elapsed().as_nanos() as u64)
    }

    /// Next originating sequence number for this endpoint.
    pub fn next_seq(&mut self) -> u8 {
        let s = self.seq;
        self.seq = self.seq.wrapping_add(1);
        s
    }

    fn put(&mut self, frame: &Frame) -> Result<(), WireError> {
        let transfer = self.faults.transfer(&frame.encode(), self.now(), &self.config);
        if transfer.dropped {
            return Ok(());
        }
        let bytes = transfer.delivered.into_iter().map(|b| b.byte).collect();
        self.outgoing.send(bytes).map_err(|_| WireError::Disconnected)
    }

    /// Waits up to `timeout` for bytes and returns any frames completed by them.
    fn pull(&mut self, timeout: Duration) -> Result<Vec<Frame>, WireError> {
        let gap = Duration::from_secs_f64(self.config.inter_byte_timeout_ms / 1e3);
        match self.incoming.recv_timeout(timeout) {
            Ok(chunk) => self.buffer.extend(chunk),
            Err(RecvTimeoutError::Timeout) => {
                if timeout >= gap {
                    // Idle longer than the inter-byte timeout: abandon partial frames.
                    self.buffer.clear();
                }
                return Ok(Vec::new());
            }
            Err(RecvTimeoutError::Disconnected) => return Err(WireError::Disconnected),
        }
        let decoded = decode_stream(&self.buffer);
        let consumed = decoded.ends.last().copied().unwrap_or(0);
        self.buffer.drain(..consumed);
        if self.buffer.len() > 2 * (FRAME_OVERHEAD + MAX_PAYLOAD) {
            let excess = self.buffer.len() - (FRAME_OVERHEAD + MAX_PAYLOAD);
            self.buffer.drain(..excess);
        }
        Ok(decoded.frames)
    }

    /// Acknowledges data frames, queueing new ones; returns control frames.
    fn absorb(&mut self, frames: Vec<Frame>) -> Result<Vec<Frame>, WireError> {
        let mut control = Vec::new();
        for f in frames {
            match f.kind() {
                FrameType::Ack | FrameType::Nack => control.push(f),
                _ => {
                    self.put(&Frame::ack(f.seq()))?;
                    let key = Some((f.kind(), f.seq()));
                    if self.last_accepted != key {
                        self.last_accepted = key;
                        self.pending.push_back(f);
                    }
                }
            }
        }
        Ok(control)
    }

    pub fn reliable_send(&mut self, frame: &Frame) -> Result<SendOutcome, WireError> {
        let ack_timeout = Duration::from_secs_f64(self.config.ack_timeout_ms / 1e3);
        let attempts = self.config.max_retransmits + 1;
        for attempt in 0..attempts {
            self.put(frame)?;
            let deadline = Instant::now() + ack_timeout;
            'wait: loop {
                let left = deadline.saturating_duration_since(Instant::now());
                if left.is_zero() {
                    break 'wait;
                }
                let frames = self.pull(left)?;
                for c in self.absorb(frames)? {
                    if c.seq() != frame.seq() {
                        continue;
                    }
                    if c.kind() == FrameType::Ack {
                        return Ok(SendOutcome::Delivered {
                            retransmits: attempt,
                            reply: None,
                        });
                    }
                    break 'wait;
                }
            }
        }
        Ok(SendOutcome::Lost { attempts })
    }

    /// Waits up to `timeout` for the next data frame from the peer.
    pub fn recv(&mut self, timeout: Duration) -> Result<Option<Frame>, WireError> {
        let deadline = Instant::now() + timeout;
        loop {
            if let Some(f) = self.pending.pop_front() {
                return Ok(Some(f));
            }
            let left = deadline.saturating_duration_since(Instant::now());
            if left.is_zero() {
                return Ok(None);
            }
            let frames = self.pull(left)?;
            self.absorb(frames)?;
        }
    }

    /// Runs `endpoint` until the peer disconnects, sending back every reply it produces.
    pub fn serve<E: Endpoint>(mut self, mut endpoint: E) -> E {
        loop {
            match self.recv(Duration::from_millis(50)) {
                Ok(Some(frame)) => {
                    let now = self.now();
                    if let Some(reply) = endpoint.on_frame(&frame, now) {
                        if self.reliable_send(&reply).is_err() {
                            return endpoint;
                        }
                    }
                }
                Ok(None) => {}
                Err(_) => return endpoint,
            }
        }
    }
}
