use greenroom::agent::{Agent, FaultKind, FirmwareFault, Scenario};
use greenroom::catalog::{Catalog, Channel, Outcome};
use greenroom::wire::payload::{decode_result, decode_status, encode_test_batch};
use greenroom::wire::{Frame, FrameType, SimTime};
use proptest::prelude::*;

// Independent copy of the accepted ranges, by template id.
const BOUNDS: [(f64, f64); 20] = [
    (-40.0, 85.0),
    (0.0, 100.0),
    (0.0, 50.0),
    (400.0, 5000.0),
    (870.0, 1085.0),
    (0.0, 120_000.0),
    (0.0, 100.0),
    (3.0, 5.5),
    (0.0, 100.0),
    (256.0, 2.0e9),
    (-2.0, 2.0),
    (-5.0, 5.0),
    (-10.0, 10.0),
    (-1.0, 1.0),
    (-10_000.0, 10_000.0),
    (0.0, 200.0),
    (0.0, 3.0),
    (0.0, 250.0),
    (0.0, 8.0),
    (0.0, 2000.0),
];

fn oracle(id: u8, v: f64) -> Outcome {
    let (lo, hi) = BOUNDS[usize::from(id)];
    if lo <= v && v <= hi {
        Outcome::Pass
    } else {
        Outcome::Fail
    }
}

fn agent(s: &Scenario) -> Agent {
    Agent::new(s, &Catalog::standard()).unwrap()
}

/// Sends one batch through the agent's frame handler and returns its outcomes.
fn judge(a: &mut Agent, tests: &[(u8, f64)]) -> Vec<(u8, Outcome)> {
    let frame = Frame::new(FrameType::TestBatch, 0, encode_test_batch(tests).unwrap()).unwrap();
    let reply = a.handle_frame(&frame, SimTime::ZERO);
    assert_eq!(reply.kind(), FrameType::Result);
    decode_result(reply.payload()).unwrap()
}

/// 41 points per template spanning the widened generation range, plus both bounds.
fn grid(id: u8) -> Vec<f64> {
    let (lo, hi) = BOUNDS[usize::from(id)];
    let w = hi - lo;
    let mut v: Vec<f64> = (0..=40)
        .map(|i| lo - 0.5 * w + 2.0 * w * f64::from(i) / 40.0)
        .collect();
    v.extend([lo, hi]);
    v.into_iter().map(|x| f64::from(x as f32)).collect()
}

#[test]
fn fault_free_firmware_matches_the_oracle() {
    let mut a = agent(&Scenario::default());
    for id in 0..20u8 {
        for chunk in grid(id).chunks(40) {
            let tests: Vec<_> = chunk.iter().map(|&v| (id, v)).collect();
            for ((rid, got), &(_, v)) in judge(&mut a, &tests).into_iter().zip(&tests) {
                assert_eq!(rid, id);
                assert_eq!(got, oracle(id, v), "template {id} at {v}");
            }
        }
    }
}

#[test]
fn boundary_shift_disagrees_exactly_on_the_shifted_band() {
    let s = Scenario {
        faults: vec![FirmwareFault {
            template_id: 0,
            kind: FaultKind::BoundaryShift,
            magnitude: 5.0,
        }],
        ..Scenario::default()
    };
    let mut a = agent(&s);
    // 1000 points over [-102.5, 147.5), the generation range of template 0.
    let values: Vec<f64> = (0..1000).map(|i| -102.5 + 0.25 * f64::from(i)).collect();
    let mut disagreeing = Vec::new();
    for chunk in values.chunks(40) {
        let tests: Vec<_> = chunk.iter().map(|&v| (0u8, v)).collect();
        for ((_, got), &(_, v)) in judge(&mut a, &tests).into_iter().zip(&tests) {
            if got != oracle(0, v) {
                disagreeing.push(v);
            }
        }
    }
    assert!(disagreeing.iter().all(|&v| v > 85.0 && v <= 90.0));
    // (85, 90] at 0.25 spacing holds 20 grid points.
    assert_eq!(disagreeing.len(), 20);
}

#[test]
fn inverted_humidity_flips_only_template_one() {
    let mut a = agent(&Scenario::builtin("inverted-humidity").unwrap());
    for id in 0..20u8 {
        let tests: Vec<_> = grid(id).into_iter().skip(3).map(|v| (id, v)).collect();
        for ((_, got), &(_, v)) in judge(&mut a, &tests).into_iter().zip(&tests) {
            if id == 1 {
                assert_ne!(got, oracle(id, v), "{v}");
            } else {
                assert_eq!(got, oracle(id, v));
            }
        }
    }
}

fn reported_co(a: &mut Agent, now: SimTime) -> f64 {
    let reply = a.handle_frame(&Frame::new(FrameType::Status, 0, Vec::new()).unwrap(), now);
    decode_status(reply.payload())
        .unwrap()
        .reading(Channel::Co)
        .unwrap()
}

#[test]
fn injection_lasts_exactly_its_duration() {
    let mut s = Scenario::default();
    for m in &mut s.environment.channels {
        m.noise_sigma = 0.0;
    }
    let mut a = agent(&s);
    a.inject_sensor_value(Channel::Co, 77.0, 5).unwrap();
    let mut seen = Vec::new();
    for tick in 0..8u64 {
        let now = SimTime(tick * 1_000_000_000);
        a.sync_to(now);
        seen.push(reported_co(&mut a, now));
    }
    assert_eq!(seen, [77.0, 77.0, 77.0, 77.0, 77.0, 5.0, 5.0, 5.0]);
}

#[test]
fn co_spike_raises_critical_for_its_window() {
    let mut a = agent(&Scenario::builtin("co-spike").unwrap());
    let critical_at = |a: &mut Agent, tick: u64| {
        let now = SimTime(tick * 1_000_000_000);
        a.sync_to(now);
        let reply = a.handle_frame(&Frame::new(FrameType::Status, 0, Vec::new()).unwrap(), now);
        decode_status(reply.payload()).unwrap().critical
    };
    assert!(!critical_at(&mut a, 99));
    assert!(critical_at(&mut a, 100));
    assert!(critical_at(&mut a, 200));
    assert!(!critical_at(&mut a, 201));
}

proptest! {
    #[test]
    fn firmware_agrees_with_oracle_on_random_batches(
        tests in prop::collection::vec((0u8..20, -1.0e6..1.0e6f64), 1..40)
    ) {
        let tests: Vec<_> = tests.into_iter().map(|(id, v)| (id, f64::from(v as f32))).collect();
        let mut a = agent(&Scenario::default());
        for ((rid, got), &(id, v)) in judge(&mut a, &tests).into_iter().zip(&tests) {
            prop_assert_eq!(rid, id);
            prop_assert_eq!(got, oracle(id, v));
        }
    }

    #[test]
    fn malformed_batches_get_nack(payload in prop::collection::vec(any::<u8>(), 0..60)) {
        let mut a = agent(&Scenario::default());
        let frame = Frame::new(FrameType::TestBatch, 7, payload.clone()).unwrap();
        let reply = a.handle_frame(&frame, SimTime::ZERO);
        let valid = greenroom::wire::payload::decode_test_batch(&payload)
            .ok()
            .is_some_and(|p| Catalog::standard().decode_batch(p).is_ok());
        prop_assert_eq!(reply.kind() == FrameType::Result, valid);
        if !valid {
            prop_assert_eq!(reply.kind(), FrameType::Nack);
            prop_assert_eq!(reply.seq(), 7);
        }
    }
}
