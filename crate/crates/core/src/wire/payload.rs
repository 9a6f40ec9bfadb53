//! Application payloads carried inside frames. Values are IEEE-754 binary32, little-endian.

use serde::Serialize;

use super::WireError;
use crate::catalog::{Channel, Outcome};

/// Largest number of tests that fit in one TEST_BATCH payload.
pub const MAX_TESTS_PER_BATCH: usize = (super::MAX_PAYLOAD - 1) / 5;

pub const FLAG_CRITICAL: u8 = 0b01;
pub const FLAG_BUSY: u8 = 0b10;

/// `count` then `[template_id, f32 value]` per test.
pub fn encode_test_batch(tests: &[(u8, f64)]) -> Result<Vec<u8>, WireError> {
    if tests.len() > MAX_TESTS_PER_BATCH {
        return Err(WireError::TooManyEntries(tests.len()));
    }
    let mut out = Vec::with_capacity(1 + 5 * tests.len());
    out.push(tests.len() as u8);
    for &(id, value) in tests {
        out.push(id);
        out.extend_from_slice(&(value as f32).to_le_bytes());
    }
    Ok(out)
}

pub fn decode_test_batch(payload: &[u8]) -> Result<Vec<(u8, f64)>, WireError> {
    let (&count, body) = payload.split_first().ok_or(WireError::EmptyPayload)?;
    let count = usize::from(count);
    if body.len() != 5 * count {
        return Err(WireError::LengthMismatch {
            count,
            body: body.len(),
        });
    }
    Ok(body
        .chunks_exact(5)
        .map(|c| (c[0], f64::from(f32::from_le_bytes([c[1], c[2], c[3], c[4]]))))
        .collect())
}

/// `count` then `[template_id, outcome]` per test.
pub fn encode_result(results: &[(u8, Outcome)]) -> Result<Vec<u8>, WireError> {
    if results.len() > usize::from(u8::MAX) || 1 + 2 * results.len() > super::MAX_PAYLOAD {
        return Err(WireError::TooManyEntries(results.len()));
    }
    let mut out = Vec::with_capacity(1 + 2 * results.len());
    out.push(results.len() as u8);
    for &(id, outcome) in results {
        out.push(id);
        out.push(outcome.code());
    }
    Ok(out)
}

pub fn decode_result(payload: &[u8]) -> Result<Vec<(u8, Outcome)>, WireError> {
    let (&count, body) = payload.split_first().ok_or(WireError::EmptyPayload)?;
    let count = usize::from(count);
    if body.len() != 2 * count {
        return Err(WireError::LengthMismatch {
            count,
            body: body.len(),
        });
    }
    body.chunks_exact(2)
        .map(|c| {
            Outcome::from_code(c[1])
                .map(|o| (c[0], o))
                .ok_or(WireError::BadOutcome(c[1]))
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct StatusReport {
    pub critical: bool,
    pub busy: bool,
    /// Effective readings in ascending channel order.
    pub readings: Vec<(Channel, f64)>,
}

impl StatusReport {
    pub fn flags(&self) -> u8 {
        let mut f = 0;
        if self.critical {
            f |= FLAG_CRITICAL;
        }
        if self.busy {
            f |= FLAG_BUSY;
        }
        f
    }

    pub fn channels(&self) -> impl Iterator<Item = Channel> + '_ {
        self.readings.iter().map(|&(c, _)| c)
    }

    pub fn reading(&self, channel: Channel) -> Option<f64> {
        self.readings
            .iter()
            .find(|&&(c, _)| c == channel)
            .map(|&(_, v)| v)
    }
}

/// `flags` then `[channel_id, f32 value]` per channel.
pub fn encode_status(report: &StatusReport) -> Result<Vec<u8>, WireError> {
    if 1 + 5 * report.readings.len() > super::MAX_PAYLOAD {
        return Err(WireError::TooManyEntries(report.readings.len()));
    }
    let mut out = vec![report.flags()];
    for &(channel, value) in &report.readings {
        out.push(channel.id());
        out.extend_from_slice(&(value as f32).to_le_bytes());
    }
    Ok(out)
}

pub fn decode_status(payload: &[u8]) -> Result<StatusReport, WireError> {
    let (&flags, body) = payload.split_first().ok_or(WireError::EmptyPayload)?;
    if flags & !(FLAG_CRITICAL | FLAG_BUSY) != 0 {
        return Err(WireError::BadFlags(flags));
    }
    if body.len() % 5 != 0 {
        return Err(WireError::LengthMismatch {
            count: body.len() / 5,
            body: body.len(),
        });
    }
    let readings = body
        .chunks_exact(5)
        .map(|c| {
            Channel::from_id(c[0])
                .map(|ch| (ch, f64::from(f32::from_le_bytes([c[1], c[2], c[3], c[4]]))))
                .ok_or(WireError::UnknownChannel(c[0]))
        })
        .collect::<Result<_, _>>()?;
    Ok(StatusReport {
        critical: flags & FLAG_CRITICAL != 0,
        busy: flags & FLAG_BUSY != 0,
        readings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn test_batch_layout() {
        let bytes = encode_test_batch(&[(0, 25.0)]).unwrap();
        assert_eq!(bytes, vec![1, 0, 0x00, 0x00, 0xC8, 0x41]);
        assert_eq!(decode_test_batch(&bytes).unwrap(), vec![(0, 25.0)]);
        assert_eq!(encode_test_batch(&[]).unwrap(), vec![0]);
    }

    #[test]
    fn test_batch_capacity() {
        let full: Vec<(u8, f64)> = (0..MAX_TESTS_PER_BATCH as u8).map(|i| (i, 1.0)).collect();
        assert!(encode_test_batch(&full).unwrap().len() <= super::super::MAX_PAYLOAD);
        let over: Vec<(u8, f64)> = (0..=MAX_TESTS_PER_BATCH as u8).map(|i| (i, 1.0)).collect();
        assert!(encode_test_batch(&over).is_err());
    }

    #[test]
    fn malformed_payloads_are_rejected() {
        assert_eq!(decode_test_batch(&[]), Err(WireError::EmptyPayload));
        assert!(decode_test_batch(&[2, 0, 0, 0, 0, 0]).is_err());
        assert_eq!(decode_result(&[1, 0, 7]), Err(WireError::BadOutcome(7)));
        assert_eq!(decode_status(&[0x04]), Err(WireError::BadFlags(4)));
        assert_eq!(
            decode_status(&[0, 42, 0, 0, 0, 0]),
            Err(WireError::UnknownChannel(42))
        );
    }

    #[test]
    fn result_layout() {
        let bytes = encode_result(&[(0, Outcome::Pass), (3, Outcome::Fail), (9, Outcome::Error)]).unwrap();
        assert_eq!(bytes, vec![3, 0, 0, 3, 1, 9, 2]);
        assert_eq!(decode_result(&bytes).unwrap().len(), 3);
    }

    #[test]
    fn status_layout() {
        let report = StatusReport {
            critical: true,
            busy: false,
            readings: vec![(Channel::Temperature, 22.5), (Channel::Co, 100.0)],
        };
        let bytes = encode_status(&report).unwrap();
        assert_eq!(bytes[0], FLAG_CRITICAL);
        assert_eq!(bytes[1], 0);
        assert_eq!(bytes[6], 2);
        assert_eq!(decode_status(&bytes).unwrap(), report);
    }

    proptest! {
        #[test]
        fn f32_values_survive_the_wire(
            tests in prop::collection::vec((any::<u8>(), -1.0e9f32..1.0e9f32), 0..MAX_TESTS_PER_BATCH)
        ) {
            let pairs: Vec<(u8, f64)> = tests.iter().map(|&(i, v)| (i, f64::from(v))).collect();
            let decoded = decode_test_batch(&encode_test_batch(&pairs).unwrap()).unwrap();
            prop_assert_eq!(decoded, pairs);
        }

        #[test]
        fn decoders_never_panic(bytes in prop::collection::vec(any::<u8>(), 0..300)) {
            let _ = decode_test_batch(&bytes);
            let _ = decode_result(&bytes);
            let _ = decode_status(&bytes);
        }
    }
}
