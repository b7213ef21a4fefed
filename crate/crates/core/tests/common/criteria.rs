//! Acceptance checks, shared by the integration tests and the acceptance
//! target. Each panics on the first violation and otherwise returns what it
//! measured.

use std::time::{Duration, Instant};

use penloop_core::experiment::{load_agent, load_backend_script, load_corpus, render_table, run_paired, ExperimentReport};
use penloop_core::ledger::{import_jsonl, verify_jsonl, ChainStatus, LedgerError};
use penloop_core::metrics::{
    compute_session_metrics, confidence_calibration, edit_distance, engagement_score, reasoning_quality_index,
    semantic_revision_distance, CalibrationInput, MetricsError, RqiWeights, Theta, TraceTally,
};
use penloop_core::Phase;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{build_f1, build_f1_prime, fixture, oracle, random};

pub const FIXTURE_TRACES: [&str; 2] = ["f1.trace.jsonl", "f1-prime.trace.jsonl"];

/// `count` random walks over random modes and policies.
pub fn walks(seed: u64, count: usize) -> Vec<random::Walk> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let policy = if rng.random_bool(0.5) { Some(rng.random::<[u8; 3]>()) } else { None };
            let len = rng.random_range(0..90);
            let choices: Vec<u8> = (0..len).map(|_| rng.random()).collect();
            random::walk(random::config(rng.random(), policy), &choices)
        })
        .collect()
}

/// Finalization succeeds iff no gate is unmet and the independent verdict
/// agrees. Returns the number of finalization attempts checked.
pub fn gate_soundness(walks: &[random::Walk]) -> usize {
    let mut attempts = 0;
    for walk in walks {
        for f in walk.steps.iter().filter_map(|s| s.finalize.as_ref()) {
            assert_eq!(f.succeeded, f.gates_empty, "{walk:?}");
            assert_eq!(f.gates_empty, f.oracle_ok, "{walk:?}");
            attempts += 1;
        }
        if walk.session.session().phase == Phase::Finalized {
            let last_ok = walk.steps.iter().rev().find(|s| s.ok).unwrap();
            assert_eq!(last_ok.op, "request_finalization");
        }
    }
    attempts
}

/// Every accepted call writes exactly one non-cue record; refused calls
/// write none. Returns the number of accepted calls checked.
pub fn minimal_record(walks: &[random::Walk]) -> usize {
    let mut accepted = 0;
    for walk in walks {
        for step in &walk.steps {
            if step.ok {
                assert!(step.appended >= 1, "{} appended nothing", step.op);
                assert_eq!(step.human_appended, 1, "{} must write exactly one record", step.op);
                accepted += 1;
            } else {
                assert_eq!(step.human_appended, 0, "failed {} wrote a record", step.op);
            }
        }
    }
    accepted
}

/// The bundled fixtures plus six random walks with at least five events.
pub fn tamper_corpus() -> Vec<Vec<u8>> {
    let mut traces: Vec<Vec<u8>> = FIXTURE_TRACES.iter().map(|n| std::fs::read(fixture(n)).unwrap()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    while traces.len() < 8 {
        let choices: Vec<u8> = (0..40).map(|_| rng.random()).collect();
        let walk = random::walk(random::config(rng.random(), None), &choices);
        if walk.session.events().len() > 4 {
            traces.push(walk.session.export_trace());
        }
    }
    traces
}

fn line_of(bytes: &[u8], index: usize) -> u64 {
    1 + bytes[..index].iter().filter(|b| **b == b'\n').count() as u64
}

/// Detected at `line`: either as a chain break or as an unparseable line.
pub fn detected_at(result: Result<ChainStatus, LedgerError>, line: u64) -> bool {
    match result {
        Ok(ChainStatus::Broken { first_break }) => first_break == line,
        Err(LedgerError::Malformed { line: at, .. }) => at == line,
        _ => false,
    }
}

/// Random single-bit flips and byte replacements; each must be reported at
/// the line it hit. Returns the number of mutations checked.
pub fn raw_mutations(rounds: usize, seed: u64) -> usize {
    let traces = tamper_corpus();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for round in 0..rounds {
        let original = &traces[round % traces.len()];
        let mut bytes = original.clone();
        let i = rng.random_range(0..bytes.len());
        if rng.random_bool(0.5) {
            bytes[i] ^= 1 << rng.random_range(0..8);
        } else {
            let mut b: u8 = rng.random();
            while b == original[i] {
                b = rng.random();
            }
            bytes[i] = b;
        }
        let line = line_of(original, i);
        assert!(
            detected_at(verify_jsonl(&bytes), line),
            "byte {i} (line {line}) of trace {} went undetected: {:?}",
            round % traces.len(),
            verify_jsonl(&bytes)
        );
    }
    rounds
}

/// Every exported line is canonical per the oracle and its stored hash
/// equals the oracle's. Returns the number of event hashes compared.
pub fn hash_agreement(bytes: &[u8], name: &str) -> usize {
    let lines: Vec<&str> = std::str::from_utf8(bytes).unwrap().lines().collect();
    let values = oracle::parse_jsonl(bytes);
    assert_eq!(lines.len(), values.len());
    let mut prev = "0".repeat(64);
    for (line, value) in lines.iter().zip(&values) {
        assert_eq!(oracle::canonical(value), *line, "{name}: export is not canonical");
        assert_eq!(value["prev_hash"].as_str().unwrap(), prev, "{name}");
        let hash = oracle::event_hash(value);
        assert_eq!(value["hash"].as_str().unwrap(), hash, "{name} seq {}", value["seq"]);
        prev = hash;
    }
    assert_eq!(verify_jsonl(bytes).unwrap(), ChainStatus::Intact);
    values.len()
}

/// Fixture files, freshly built fixtures and random walks.
pub fn hash_determinism(walks: &[random::Walk]) -> usize {
    let mut compared = 0;
    for name in FIXTURE_TRACES {
        compared += hash_agreement(&std::fs::read(fixture(name)).unwrap(), name);
    }
    compared += hash_agreement(&build_f1().export_trace(), "f1 (rebuilt)");
    compared += hash_agreement(&build_f1_prime().export_trace(), "f1-prime (rebuilt)");
    for walk in walks {
        compared += hash_agreement(&walk.session.export_trace(), "walk");
    }
    compared
}

/// Every metric of one exported trace equals the brute-force recomputation.
pub fn assert_matches_oracle(bytes: &[u8]) {
    let events = import_jsonl(bytes).unwrap();
    let o = oracle::recompute(&oracle::parse_jsonl(bytes));
    let computed = compute_session_metrics(&events, Theta::DEFAULT, Some(0.5), None);
    if o.correction.1 == 0 {
        assert!(matches!(computed, Err(MetricsError::NoArticulations)));
        return;
    }
    let m = computed.unwrap();
    assert_eq!(m.reflection_depth, o.reflection_depth);
    assert_eq!(m.correction_ratio, o.correction_ratio());
    assert_eq!(m.falsification_events, o.falsification_events);
    assert_eq!(m.branch_count, o.branch_count);
    assert_eq!(m.uncertainty_tag_count, o.uncertainty_tag_count);
    assert_eq!(m.s2_engagement, o.s2());
    assert_eq!(m.mean_revision_distance, o.mean_distance());
    assert_eq!(m.max_revision_distance, o.max_distance());
    let d = f64::from(o.reflection_depth);
    let rqi = (d / (d + 3.0) + o.correction_ratio() + 0.5) / 3.0;
    assert!((m.rqi.unwrap() - rqi).abs() < 1e-12);
}

fn token_list(rng: &mut ChaCha8Rng) -> Vec<String> {
    const VOCAB: [&str; 5] = ["a", "b", "c", "d", "e"];
    let n = rng.random_range(0..12);
    (0..n).map(|_| VOCAB[rng.random_range(0..VOCAB.len())].to_string()).collect()
}

pub const CALIBRATION_TOLERANCE: f64 = 1e-9;

#[derive(Debug)]
pub struct MetricOracleCounts {
    pub traces: usize,
    pub distance_pairs: usize,
    pub calibration_sets: usize,
}

/// F1 and the given random traces against the trace oracle; random token
/// pairs against the DP edit distance; random confidence sets against the
/// rank-correlation oracle.
pub fn metric_oracle(walks: &[random::Walk], seed: u64, pairs: usize) -> MetricOracleCounts {
    assert_matches_oracle(&build_f1().export_trace());
    for walk in walks {
        let bytes = walk.session.export_trace();
        assert_matches_oracle(&bytes);
        assert_eq!(walk.session.tally(), TraceTally::from_events(&import_jsonl(&bytes).unwrap()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..pairs {
        let (a, b) = (token_list(&mut rng), token_list(&mut rng));
        let edits = oracle::levenshtein(&a, &b);
        assert_eq!(edit_distance(&a, &b), edits);
        let n = a.len().max(b.len());
        let expected = if n == 0 { 0.0 } else { edits as f64 / n as f64 };
        assert_eq!(semantic_revision_distance(&a, &b), expected);
    }
    let mut calibration_sets = 0;
    for _ in 0..pairs {
        let n = rng.random_range(3..30);
        let input: Vec<(f64, bool)> =
            (0..n).map(|_| (f64::from(rng.random_range(0u8..=10)) / 10.0, rng.random_bool(0.5))).collect();
        let xs: Vec<f64> = input.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = input.iter().map(|p| f64::from(u8::from(p.1))).collect();
        let degenerate = xs.iter().all(|x| *x == xs[0]) || ys.iter().all(|y| *y == ys[0]);
        match confidence_calibration(&CalibrationInput::new(input)) {
            Ok(r) => {
                assert!(!degenerate);
                assert!((r - oracle::spearman(&xs, &ys)).abs() < CALIBRATION_TOLERANCE);
                calibration_sets += 1;
            }
            Err(MetricsError::ZeroVariance) => assert!(degenerate),
            Err(e) => panic!("unexpected {e}"),
        }
    }
    MetricOracleCounts {
        traces: walks.len() + 1,
        distance_pairs: pairs,
        calibration_sets,
    }
}

/// Distance symmetry, identity and range; ratio and score bounds; RQI
/// monotonicity and range; strict growth of s2. Returns the number of
/// randomized cases.
pub fn bounds(walks: &[random::Walk], seed: u64, cases: usize) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..cases {
        let (a, b) = (token_list(&mut rng), token_list(&mut rng));
        let d = semantic_revision_distance(&a, &b);
        assert_eq!(semantic_revision_distance(&a, &a), 0.0);
        assert_eq!(d, semantic_revision_distance(&b, &a));
        assert!((0.0..=1.0).contains(&d));

        let depth = rng.random_range(0u32..50);
        let (cr, acc, bump) = (rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>() / 2.0);
        let (x, y) = {
            let (p, q) = (rng.random_range(0u32..=100), rng.random_range(0u32..=100));
            (p.min(q), p.max(q))
        };
        let w = RqiWeights::new([f64::from(x) / 100.0, f64::from(y - x) / 100.0, f64::from(100 - y) / 100.0]).unwrap();
        let base = reasoning_quality_index(depth, cr, acc, w).unwrap();
        assert!((0.0..=1.0).contains(&base));
        let eps = 1e-12;
        assert!(reasoning_quality_index(depth + 1, cr, acc, w).unwrap() + eps >= base);
        assert!(reasoning_quality_index(depth, (cr + bump).min(1.0), acc, w).unwrap() + eps >= base);
        assert!(reasoning_quality_index(depth, cr, (acc + bump).min(1.0), w).unwrap() + eps >= base);

        let e = rng.random_range(0u32..10_000);
        let s = engagement_score(e);
        assert!((0.0..1.0).contains(&s));
        assert!(engagement_score(e + 1) > s);
    }
    for walk in walks {
        let tally = walk.session.tally();
        if let Ok(r) = tally.correction_ratio(Theta::DEFAULT) {
            assert!((0.0..=1.0).contains(&r));
        }
        assert!((0.0..1.0).contains(&tally.s2_engagement(Theta::DEFAULT)));
    }
    cases + walks.len()
}

pub fn run_c1(agent: &str, seed: u64) -> ExperimentReport {
    let corpus = load_corpus(&fixture("c1.corpus.json")).unwrap();
    let agent = load_agent(&fixture(agent)).unwrap();
    let script = load_backend_script(&fixture("c1.backend.json")).unwrap();
    run_paired(&corpus, &agent, &script, seed).unwrap().report
}

fn row(report: &ExperimentReport, h: &str) -> [Option<String>; 3] {
    let r = report.delta(h).unwrap();
    [r.control, r.treatment, r.delta].map(|v| v.map(|v| v.to_string()))
}

/// Values derived by walking the scripted credulous transcripts by hand.
pub fn credulous_expectations() -> Vec<(&'static str, [Option<String>; 3])> {
    let s = |x: &str| Some(x.to_string());
    let control = 8.0 / (42.0f64 * 32.0).sqrt();
    let treatment = (1.0f64 / 3.0).sqrt();
    let h2_delta = format!("{:.4}", (treatment * 1e4).round() / 1e4 - (control * 1e4).round() / 1e4);
    vec![
        ("H1", [s("1.0000"), s("0.2500"), s("-0.7500")]),
        ("H2", [s(&format!("{control:.4}")), s(&format!("{treatment:.4}")), s(&h2_delta)]),
        ("H4", [s("1.0000"), s("0.2500"), s("-0.7500")]),
        ("H5", [s("1.0000"), s("1.2500"), s("0.2500")]),
    ]
}

/// Run C1 with the credulous agent twice; check the derived values, the
/// expected directions, byte-identical reports, and the time budget.
pub fn harness_reproduction(seed: u64) -> (Duration, String) {
    let started = Instant::now();
    let first = run_c1("credulous.agent.json", seed);
    let second = run_c1("credulous.agent.json", seed);
    let elapsed = started.elapsed();
    assert_eq!(first.to_canonical_json(), second.to_canonical_json());
    assert_eq!(render_table(&first), render_table(&second));
    for (h, expected) in credulous_expectations() {
        assert_eq!(row(&first, h), expected, "{h}");
        assert!(first.delta(h).unwrap().matches_expectation(), "{h} direction");
    }
    assert!(elapsed < Duration::from_secs(30), "took {elapsed:?}");
    let summary = ["H1", "H2", "H4", "H5"]
        .iter()
        .map(|h| {
            let r = first.delta(h).unwrap();
            format!("{h} {}", r.delta.map(|d| d.to_string()).unwrap_or_default())
        })
        .collect::<Vec<_>>()
        .join(", ");
    (elapsed, summary)
}
