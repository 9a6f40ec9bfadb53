use std::collections::BTreeMap;

use greenroom::agent::Scenario;
use greenroom::config::{CampaignConfig, SearchMode};
use greenroom::orchestrator::{Campaign, GenerationRecord, BUDGET_WINDOW};
use greenroom::runlog::ff_consistent;
use greenroom::wire::payload::decode_status;
use greenroom::wire::{Direction, FaultSpec, FrameType, Transcript};
use proptest::prelude::*;

fn run(config: CampaignConfig, scenario: Scenario) -> (Vec<GenerationRecord>, Transcript, Campaign) {
    let mut records = Vec::new();
    let mut campaign = Campaign::new(config, scenario).unwrap();
    campaign.run(&mut records).unwrap();
    let transcript = campaign.link().transcript().clone();
    (records, transcript, campaign)
}

/// Each distinct TEST_BATCH with the flags of the last STATUS reply that reached the tester before it.
fn batches_with_known_status(t: &Transcript) -> Vec<(u64, u8, Option<u8>)> {
    let mut last_flags = None;
    let mut seen = BTreeMap::new();
    for e in t.entries() {
        let Some(f) = e.frame() else { continue };
        match (e.direction, f.kind()) {
            (Direction::ToTester, FrameType::Status) => {
                last_flags = decode_status(f.payload()).ok().map(|s| s.flags());
            }
            (Direction::ToAgent, FrameType::TestBatch) => {
                seen.entry(f.seq()).or_insert((e.at.0, f.seq(), last_flags));
            }
            _ => {}
        }
    }
    let mut v: Vec<_> = seen.into_values().collect();
    v.sort();
    v
}

fn first_transmissions(t: &Transcript) -> Vec<u64> {
    // Sequence numbers wrap, so a new batch is one whose seq differs from the previous batch.
    let mut out = Vec::new();
    let mut prev = None;
    for e in t.entries() {
        let Some(f) = e.frame() else { continue };
        if e.direction == Direction::ToAgent && f.kind() == FrameType::TestBatch && prev != Some(f.seq()) {
            out.push(e.at.0);
            prev = Some(f.seq());
        }
    }
    out
}

fn max_in_any_window(times: &[u64]) -> usize {
    let mut best = 0;
    let mut lo = 0;
    for hi in 0..times.len() {
        while times[hi] - times[lo] >= BUDGET_WINDOW.0 {
            lo += 1;
        }
        best = best.max(hi - lo + 1);
    }
    best
}

fn small(mode: SearchMode, seed: u64, generations: usize) -> CampaignConfig {
    let mut c = CampaignConfig {
        mode,
        ..CampaignConfig::default()
    };
    c.search.rng_seed = seed;
    c.search.generations = generations;
    c
}

#[test]
fn fault_free_clean_campaign_never_fails_a_test() {
    let (records, _, campaign) = run(small(SearchMode::GenerationalGa, 1, 10), Scenario::default());
    assert_eq!(records.len(), 10);
    let worst = records
        .iter()
        .flat_map(|r| &r.individuals)
        .map(|i| i.fail_frac)
        .fold(0.0, f64::max);
    assert_eq!(worst, 0.0);
    assert_eq!(campaign.summary().first_disagreement_generation, None);
}

#[test]
fn boundary_shift_is_found_and_pinned_to_template_zero() {
    let mut c = small(SearchMode::GenerationalGa, 0, 50);
    c.stop_on_first_disagreement = true;
    let (records, _, campaign) = run(c, Scenario::builtin("boundary-shift-t0").unwrap());
    let g = campaign.summary().first_disagreement_generation.expect("found");
    assert_eq!(records.last().unwrap().generation, g);
    for v in records
        .iter()
        .flat_map(|r| &r.individuals)
        .flat_map(|i| &i.verdicts)
    {
        if v.disagrees() {
            assert_eq!(v.template_id, 0);
            assert!(v.value > 85.0 && v.value <= 90.0, "{}", v.value);
        }
    }
}

#[test]
fn identical_configs_give_identical_records() {
    let mut c = small(SearchMode::GenerationalGa, 9, 4);
    c.faults = FaultSpec {
        corrupt_byte_prob: 0.005,
        drop_frame_prob: 0.1,
        delay_jitter_max_ms: 3.0,
        rng_seed: 12,
    };
    let (a, ta, _) = run(c.clone(), Scenario::builtin("co-spike").unwrap());
    let (b, tb, _) = run(c, Scenario::builtin("co-spike").unwrap());
    assert_eq!(a, b);
    assert_eq!(ta.render(), tb.render());
}

#[test]
fn gate_holds_through_the_co_spike() {
    let (records, t, _) = run(
        small(SearchMode::GenerationalGa, 2, 8),
        Scenario::builtin("co-spike").unwrap(),
    );
    let batches = batches_with_known_status(&t);
    assert!(!batches.is_empty());
    for (at, seq, flags) in &batches {
        assert!(
            flags.is_some_and(|f| f == 0),
            "batch {seq} at {at} sent under status {flags:?}"
        );
    }
    assert!(records.iter().map(|r| r.deferrals).sum::<u64>() > 0);
}

#[test]
fn tight_budget_is_respected() {
    let mut c = small(SearchMode::GenerationalGa, 4, 3);
    c.budget_per_minute = 7;
    let (_, t, _) = run(c, Scenario::default());
    let times = first_transmissions(&t);
    assert_eq!(times.len(), 60);
    assert_eq!(max_in_any_window(&times), 7);
}

#[test]
fn gate_that_never_opens_aborts() {
    let mut s = Scenario::default();
    s.environment.channels[0].initial = 40.0;
    s.environment.channels[0].max = 45.0;
    let mut c = small(SearchMode::GenerationalGa, 0, 2);
    c.max_defer_ms = 5_000.0;
    let mut records = Vec::new();
    let err = Campaign::new(c, s).unwrap().run(&mut records).unwrap_err();
    assert!(err.to_string().contains("safety gate"), "{err}");
    assert!(records.is_empty());
}

#[test]
fn generational_memory_is_bounded_by_two_populations() {
    let (records, _, _) = run(small(SearchMode::GenerationalGa, 5, 5), Scenario::default());
    assert!(records.iter().all(|r| r.genomes_in_memory <= 40));
    assert!(records[..4].iter().all(|r| r.genomes_in_memory == 40));
}

#[test]
fn lost_individuals_score_novelty_only() {
    let mut c = small(SearchMode::GenerationalGa, 3, 3);
    c.faults = FaultSpec {
        drop_frame_prob: 0.6,
        rng_seed: 8,
        ..FaultSpec::clean()
    };
    let (records, _, campaign) = run(c, Scenario::builtin("boundary-shift-t0").unwrap());
    let lost: Vec<_> = records
        .iter()
        .flat_map(|r| &r.individuals)
        .filter(|i| i.lost)
        .collect();
    assert!(!lost.is_empty());
    let w = campaign.effective_weights();
    for i in lost {
        assert!(i.verdicts.is_empty());
        assert_eq!(i.fail_frac, 0.0);
        assert_eq!(i.ff, w.alpha_novelty() * (i.novelty_raw / 20f64.sqrt()).min(1.0));
    }
}

fn arb_mode() -> impl Strategy<Value = SearchMode> {
    prop_oneof![
        Just(SearchMode::GenerationalGa),
        Just(SearchMode::OnePlusOne),
        Just(SearchMode::RandomSearch)
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn campaign_invariants(
        mode in arb_mode(),
        seed in 0u64..1000,
        fault_seed in 0u64..1000,
        drop in 0.0..0.3f64,
        corrupt in 0.0..0.02f64,
        budget in 3u32..40,
        scenario in prop::sample::select(vec!["nominal", "co-spike", "boundary-shift-t0", "inverted-humidity"]),
    ) {
        let mut c = small(mode, seed, if mode == SearchMode::OnePlusOne { 25 } else { 3 });
        c.search.population_size = 6;
        c.budget_per_minute = budget;
        c.faults = FaultSpec { corrupt_byte_prob: corrupt, drop_frame_prob: drop, delay_jitter_max_ms: 0.0, rng_seed: fault_seed };
        let mut records = Vec::new();
        let mut campaign = Campaign::new(c.clone(), Scenario::builtin(scenario).unwrap()).unwrap();
        let _ = campaign.run(&mut records);

        for (i, r) in records.iter().enumerate() {
            prop_assert_eq!(r.generation, i as u64);
            prop_assert_eq!(r.energy.recompute_total(&c.energy), r.energy.total_uj);
        }
        for w in records.windows(2) {
            prop_assert!(w[0].energy.total_uj <= w[1].energy.total_uj);
            prop_assert!(w[0].virtual_time_ns <= w[1].virtual_time_ns);
        }
        prop_assert!(ff_consistent(&records, &campaign.effective_weights()));
        if mode == SearchMode::OnePlusOne {
            prop_assert!(records.iter().all(|r| r.genomes_in_memory <= 2));
        }

        let t = campaign.link().transcript();
        prop_assert!(max_in_any_window(&first_transmissions(t)) <= budget as usize);
        for (_, _, flags) in batches_with_known_status(t) {
            prop_assert!(flags.is_none_or(|f| f == 0));
        }
    }
}
