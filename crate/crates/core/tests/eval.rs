mod common;

use std::collections::BTreeMap;
use std::io::Write;

use common::bundled_assets;
use num_rational::Ratio;
use proptest::prelude::*;
use puzzlegen::dataset::{build_sample, Assets, DatasetConfig};
use puzzlegen::eval::{
    breakdown, evaluate_response, mean_relative_error, parse_answer, read_records, relative_error_exact, run_agent,
    run_responses_file, score, write_records, write_report, Agent, BreakdownKey, Parsed,
};
use puzzlegen::{Decimal, Error, OptionMode, PuzzleSample, TaskId};

fn samples(assets: &Assets, mode: OptionMode, per_task: u64) -> Vec<PuzzleSample> {
    let cfg = DatasetConfig::new(17, mode);
    TaskId::ALL
        .into_iter()
        .filter(|t| !(mode == OptionMode::DirectAnswer && *t == TaskId::Jigsaw))
        .flat_map(|t| (0..per_task).map(move |i| (t, i)))
        .map(|(t, i)| build_sample(&cfg, assets, t, i).unwrap().sample)
        .collect()
}

fn first(samples: &[PuzzleSample], task: TaskId) -> &PuzzleSample {
    samples.iter().find(|s| s.task == task).unwrap()
}

fn dec(s: &str) -> Decimal {
    s.parse().unwrap()
}

#[test]
fn parse_rules() {
    let assets = bundled_assets();
    let fixed = samples(&assets, OptionMode::FixedOption, 2);
    let direct = samples(&assets, OptionMode::DirectAnswer, 2);
    let hm = first(&fixed, TaskId::HanziMatrix);
    assert_eq!(parse_answer("The answer is (C).", hm), Parsed::Choice("C".into()));
    assert_eq!(parse_answer("B or C", hm), Parsed::Choice("B".into()));
    assert_eq!(parse_answer("answer: d", hm), Parsed::Choice("D".into()));
    assert_eq!(parse_answer("I am not sure", hm), Parsed::Unparsed);

    let ws = first(&fixed, TaskId::WordSearch);
    assert_eq!(parse_answer("yes, the word appears in row 2", ws), Parsed::Choice("A".into()));
    let wsd = first(&direct, TaskId::WordSearch);
    assert_eq!(parse_answer("yes, the word appears in row 2", wsd), Parsed::YesNo(true));
    assert_eq!(parse_answer("No.", wsd), Parsed::YesNo(false));

    let gsd = first(&direct, TaskId::GridSum);
    assert_eq!(parse_answer("approximately 45.5 or so", gsd), Parsed::Number(dec("45.5")));
    assert_eq!(parse_answer("-12.25 is the total", gsd), Parsed::Number(dec("-12.25")));
    assert_eq!(parse_answer("no idea", gsd), Parsed::Unparsed);
}

#[test]
fn relative_error_unit_cases() {
    let e1 = relative_error_exact(&Decimal::from_int(12), &Decimal::from_int(10));
    let e2 = relative_error_exact(&dec("7.25"), &dec("7.25"));
    let e3 = relative_error_exact(&Decimal::from_int(3), &Decimal::from_int(0));
    assert_eq!(e1, Ratio::new(1, 5));
    assert_eq!(e2, Ratio::from_integer(0));
    assert_eq!(e3, Ratio::from_integer(3));
    let mre = mean_relative_error(&[e1, e2, e3]).unwrap();
    assert_eq!(format!("{}/{}", mre.numer(), mre.denom()), "16/15");
    assert!(mean_relative_error(&[]).is_none());
}

#[test]
fn mean_relative_error_survives_many_denominators() {
    // The harmonic sum over 1..5000 overflows i128 denominators.
    let terms: Vec<Ratio<i128>> = (1..5000).map(|k| Ratio::new(1, k)).collect();
    let mre = mean_relative_error(&terms).unwrap();
    let approx: f64 = (1..5000).map(|k| 1.0 / k as f64).sum::<f64>() / 4999.0;
    let scale = num_bigint::BigInt::from(10u64.pow(15));
    let scaled: i64 = ((mre.numer() * scale) / mre.denom()).try_into().unwrap();
    assert!((scaled as f64 / 1e15 - approx).abs() < 1e-12, "{scaled} vs {approx}");
}

proptest! {
    #[test]
    fn equal_prediction_has_zero_error(units in -1_000_000i64..1_000_000, places in 0u8..3) {
        let y = Decimal::new(units, places);
        prop_assert_eq!(relative_error_exact(&y, &y), Ratio::from_integer(0));
    }

    #[test]
    fn scaling_leaves_unclamped_terms_unchanged(y in 1i64..10_000, yhat in -10_000i64..10_000, c in 1i64..50) {
        let a = relative_error_exact(&Decimal::from_int(yhat), &Decimal::from_int(y));
        let b = relative_error_exact(&Decimal::from_int(yhat * c), &Decimal::from_int(y * c));
        prop_assert_eq!(a, b);
    }
}

#[test]
fn oracle_is_perfect_in_every_mode() {
    let assets = bundled_assets();
    for mode in OptionMode::ALL {
        let s = samples(&assets, mode, 8);
        let report = score(&run_agent(&s, Agent::Oracle, 0), &s).unwrap();
        for (task, m) in &report.per_task {
            assert_eq!(m.accuracy, 1.0, "{mode} {task}");
            if mode == OptionMode::DirectAnswer && task.is_numeric() {
                assert_eq!(m.mre, Some(0.0));
                assert_eq!(m.mre_exact.as_deref(), Some("0/1"));
            } else {
                assert_eq!(m.mre, None);
            }
        }
        assert_eq!(report.overall, 1.0);
        assert_eq!(report.mre_denominator, "max(|y|, 1)");
    }
}

#[test]
fn field_and_overall_averages() {
    let assets = bundled_assets();
    let s = samples(&assets, OptionMode::FixedOption, 10);
    let report = score(&run_agent(&s, Agent::Random, 3), &s).unwrap();
    let acc = |t| report.accuracy(t).unwrap();
    let vr = (acc(TaskId::IconConnect) + acc(TaskId::HanziMatrix)) / 2.0;
    assert!((report.fields["visual_recognition"] - vr).abs() < 1e-12);
    let mean: f64 = TaskId::ALL.iter().map(|&t| acc(t)).sum::<f64>() / 6.0;
    assert!((report.overall - mean).abs() < 1e-12);
    assert_eq!(report.fields.len(), 3);
}

#[test]
fn constant_b_exposes_fixed_positions() {
    let assets = bundled_assets();
    let s = samples(&assets, OptionMode::FixedOption, 10);
    let report = score(&run_agent(&s, Agent::Constant('B'), 0), &s).unwrap();
    for (task, m) in &report.per_task {
        if *task != TaskId::WordSearch {
            assert_eq!(m.accuracy, 1.0, "{task}");
        }
    }
}

#[test]
fn unparsed_direct_answer_counts_as_full_error() {
    let assets = bundled_assets();
    let direct = samples(&assets, OptionMode::DirectAnswer, 3);
    let dh = first(&direct, TaskId::DifferenceHunt);
    let rec = evaluate_response(dh, "m", Some("cannot tell".into()));
    assert_eq!(rec.parsed, Parsed::Unparsed);
    assert!(!rec.correct);
    assert_eq!(rec.relative_error, Some(1.0));
    let none = evaluate_response(dh, "m", None);
    assert_eq!(none.relative_error, Some(1.0));
    let ws = first(&direct, TaskId::WordSearch);
    assert_eq!(evaluate_response(ws, "m", Some("yes".into())).relative_error, None);
}

#[test]
fn scoring_is_reproducible_through_records_file() {
    let assets = bundled_assets();
    let s = samples(&assets, OptionMode::RandomizedOption, 6);
    let records = run_agent(&s, Agent::Random, 9);
    assert_eq!(records, run_agent(&s, Agent::Random, 9));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.jsonl");
    write_records(&path, &records).unwrap();
    let back = read_records(&path).unwrap();
    assert_eq!(back, records);
    assert_eq!(score(&back, &s).unwrap(), score(&records, &s).unwrap());
    let report = write_report(&dir.path().join("rep"), &records, &s).unwrap();
    for f in ["summary.json", "per_task.csv", "breakdown_grid_n.csv", "breakdown_resolution.csv", "breakdown_level.csv"] {
        assert!(dir.path().join("rep").join(f).is_file(), "{f}");
    }
    assert_eq!(report, score(&records, &s).unwrap());
}

#[test]
fn orphan_records_are_rejected() {
    let assets = bundled_assets();
    let s = samples(&assets, OptionMode::FixedOption, 1);
    let mut records = run_agent(&s, Agent::Oracle, 0);
    records[0].sample_id = "Nope-000000".into();
    assert!(matches!(score(&records, &s), Err(Error::OrphanRecord(_))));
}

#[test]
fn breakdown_tables() {
    let assets = bundled_assets();
    let cfg = DatasetConfig::new(5, OptionMode::FixedOption);
    let s: Vec<PuzzleSample> =
        (0..70).map(|i| build_sample(&cfg, &assets, TaskId::GridSum, i).unwrap().sample).collect();
    let rows = breakdown(&run_agent(&s, Agent::Oracle, 0), &s, BreakdownKey::GridN).unwrap();
    let ns: Vec<u32> = rows.iter().map(|r| r.value).collect();
    assert_eq!(ns, (3..=9).collect::<Vec<_>>());
    assert!(rows.iter().all(|r| r.accuracy == 1.0));
    assert_eq!(rows.iter().map(|r| r.samples).sum::<usize>(), 70);
    let err = breakdown(&run_agent(&s, Agent::Oracle, 0), &s, BreakdownKey::Level).unwrap_err();
    assert!(matches!(err, Error::InapplicableKey(_)));
    assert!(matches!(
        breakdown(&run_agent(&s, Agent::Oracle, 0), &s, BreakdownKey::Resolution),
        Err(Error::InapplicableKey(_))
    ));
}

#[test]
fn random_agent_is_flat_across_grid_sizes() {
    let assets = bundled_assets();
    let cfg = DatasetConfig::new(8, OptionMode::RandomizedOption);
    let s: Vec<PuzzleSample> =
        (0..1400).map(|i| build_sample(&cfg, &assets, TaskId::GridSum, i).unwrap().sample).collect();
    let rows = breakdown(&run_agent(&s, Agent::Random, 1), &s, BreakdownKey::GridN).unwrap();
    for r in rows {
        // About 200 samples per n: three standard deviations is about 0.09.
        assert!((r.accuracy - 0.25).abs() < 0.1, "n={} acc={}", r.value, r.accuracy);
    }
}

#[test]
fn responses_file_mode() {
    let assets = bundled_assets();
    let s = samples(&assets, OptionMode::FixedOption, 2);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("resp.jsonl");
    let mut f = std::fs::File::create(&path).unwrap();
    writeln!(f, "{}", serde_json::json!({"sample_id": s[0].id, "raw_response": "(B)"})).unwrap();
    writeln!(f, "{}", serde_json::json!({"id": s[1].id, "response": "A"})).unwrap();
    drop(f);
    let records = run_responses_file(&path, "offline", &s).unwrap();
    assert_eq!(records.len(), s.len());
    let by_id: BTreeMap<&str, _> = records.iter().map(|r| (r.sample_id.as_str(), r)).collect();
    assert!(by_id[s[0].id.as_str()].correct);
    assert!(!by_id[s[1].id.as_str()].correct);
    assert_eq!(by_id[s[2].id.as_str()].raw_response, None);
    assert_eq!(by_id[s[2].id.as_str()].parsed, Parsed::Unparsed);

    std::fs::write(&path, r#"{"sample_id": "Ghost-000001", "raw_response": "A"}"#).unwrap();
    assert!(matches!(run_responses_file(&path, "offline", &s), Err(Error::OrphanRecord(_))));
}

#[test]
fn agent_names_parse() {
    assert_eq!("oracle".parse::<Agent>().unwrap(), Agent::Oracle);
    assert_eq!("random".parse::<Agent>().unwrap(), Agent::Random);
    assert_eq!("constant:B".parse::<Agent>().unwrap(), Agent::Constant('B'));
    assert_eq!("constant-c".parse::<Agent>().unwrap().name(), "constant-C");
    assert!("constant:Z".parse::<Agent>().is_err());
    assert!("telepath".parse::<Agent>().is_err());
}
