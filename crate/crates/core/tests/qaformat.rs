mod common;

use std::collections::BTreeMap;

use common::{bundled_assets, rng};
use puzzlegen::dataset::{build_sample, DatasetConfig};
use puzzlegen::qaformat::{
    arrange_options, build_question, derive_options, render_prompt, OptionValues, PromptTemplates, LABELS,
};
use puzzlegen::rules::{design_word_search, GridSumRule, PuzzleRule};
use puzzlegen::{Decimal, Error, GridSpec, OptionMode, TaskId};
use puzzlegen::pools::{Precision, SignMode};

fn values(v: &[&str], correct: usize) -> OptionValues {
    OptionValues {
        values: v.iter().map(|s| s.to_string()).collect(),
        correct,
    }
}

fn sum_rule(sum: Decimal) -> PuzzleRule {
    PuzzleRule::GridSum(GridSumRule {
        grid: GridSpec::grid_task(3).unwrap(),
        values: vec![vec![Decimal::zero(2); 3]; 3],
        sign_mode: SignMode::Negative,
        precision: Precision::TwoDecimal,
        sum,
    })
}

#[test]
fn questions_follow_templates() {
    let grid = GridSpec::grid_task(4).unwrap();
    let ws = design_word_search("CAT", &grid, true, &mut rng(0)).unwrap();
    assert_eq!(build_question(&PuzzleRule::WordSearch(ws)), "Does this grid image contain the word 'CAT'?");
    assert_eq!(
        build_question(&sum_rule(Decimal::zero(0))),
        "What is the sum of all the numbers in the grid image?"
    );
    let assets = bundled_assets();
    let cfg = DatasetConfig::new(1, OptionMode::FixedOption);
    let dh = build_sample(&cfg, &assets, TaskId::DifferenceHunt, 0).unwrap().sample;
    assert_eq!(dh.question, "How many differences are there between these two images?");
    let ic = build_sample(&cfg, &assets, TaskId::IconConnect, 0).unwrap().sample;
    assert!(ic.question.starts_with("How many times does the icon '"), "{}", ic.question);
}

#[test]
fn count_and_sum_option_values() {
    let assets = bundled_assets();
    let cfg = DatasetConfig::new(1, OptionMode::FixedOption);
    let s = (0..200)
        .map(|i| build_sample(&cfg, &assets, TaskId::HanziMatrix, i).unwrap().sample)
        .find(|s| s.ground_truth.display() == "4")
        .unwrap();
    let v = derive_options(&s.rule);
    assert_eq!(v.values, ["3", "4", "5", "6"]);
    assert_eq!(v.correct_value(), "4");

    let v = derive_options(&sum_rule(Decimal::new(-1250, 2)));
    assert_eq!(v.values, ["-22.50", "-12.50", "-2.50", "7.50"]);
    assert_eq!(v.correct_value(), "-12.50");
}

#[test]
fn word_search_absent_is_no() {
    let grid = GridSpec::grid_task(5).unwrap();
    let ws = design_word_search("DOG", &grid, false, &mut rng(1)).unwrap();
    assert_eq!(derive_options(&PuzzleRule::WordSearch(ws)).correct_value(), "No");
}

#[test]
fn fixed_mode_puts_answer_at_b() {
    let a = arrange_options(TaskId::HanziMatrix, &values(&["3", "4", "5", "6"], 1), OptionMode::FixedOption, &mut rng(0))
        .unwrap();
    assert_eq!(a.correct_label.as_deref(), Some("B"));
    assert_eq!(a.entries["B"], "4");
    assert_eq!(a.labels(), ["A", "B", "C", "D"]);
    // Distractors ascend numerically, so "-2.50" sorts after "-22.50".
    let a = arrange_options(
        TaskId::GridSum,
        &values(&["-22.50", "-12.50", "-2.50", "7.50"], 2),
        OptionMode::FixedOption,
        &mut rng(0),
    )
    .unwrap();
    let shown: Vec<&str> = a.entries.values().map(String::as_str).collect();
    assert_eq!(shown, ["-22.50", "-2.50", "-12.50", "7.50"]);
}

#[test]
fn fixed_word_search_keeps_yes_at_a() {
    for correct in [0, 1] {
        let a = arrange_options(TaskId::WordSearch, &values(&["Yes", "No"], correct), OptionMode::FixedOption, &mut rng(0))
            .unwrap();
        assert_eq!(a.entries["A"], "Yes");
        assert_eq!(a.entries["B"], "No");
        assert_eq!(a.correct_label.as_deref(), Some(["A", "B"][correct]));
    }
}

#[test]
fn direct_mode_has_no_options_and_no_jigsaw() {
    let v = values(&["3", "4", "5", "6"], 1);
    let a = arrange_options(TaskId::GridSum, &v, OptionMode::DirectAnswer, &mut rng(0)).unwrap();
    assert!(a.entries.is_empty() && a.correct_label.is_none());
    let err = arrange_options(TaskId::Jigsaw, &v, OptionMode::DirectAnswer, &mut rng(0)).unwrap_err();
    assert!(matches!(err, Error::DirectAnswerUnsupported(TaskId::Jigsaw)));
}

#[test]
fn randomized_labels_are_balanced() {
    let v = values(&["3", "4", "5", "6"], 1);
    let trials = 10_000u64;
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    for seed in 0..trials {
        let a = arrange_options(TaskId::IconConnect, &v, OptionMode::RandomizedOption, &mut rng(seed)).unwrap();
        assert_eq!(a.entries[a.correct_label.as_ref().unwrap()], "4");
        *counts.entry(a.correct_label.unwrap()).or_default() += 1;
    }
    let expected = trials as f64 / 4.0;
    let mut chi2 = 0.0;
    for l in LABELS {
        let c = counts[l] as f64;
        assert!((c / trials as f64 - 0.25).abs() <= 0.015, "{l}: {c}");
        chi2 += (c - expected).powi(2) / expected;
    }
    // 99th percentile of chi-square with 3 degrees of freedom.
    assert!(chi2 < 11.345, "chi2 {chi2}");
}

#[test]
fn prompt_layouts() {
    let assets = bundled_assets();
    let fixed = DatasetConfig::new(2, OptionMode::FixedOption);
    let gs = build_sample(&fixed, &assets, TaskId::GridSum, 0).unwrap().sample;
    let p = render_prompt(&gs);
    let option_lines: Vec<&str> = p.text.lines().filter(|l| l.starts_with('(')).collect();
    assert_eq!(option_lines.len(), 4);
    for (line, label) in option_lines.iter().zip(LABELS) {
        assert!(line.starts_with(&format!("({label}) ")), "{line}");
    }
    assert_eq!(p.text.lines().next(), Some("Answer with the option letter only."));
    assert_eq!(p.images, gs.image_refs);

    let direct = DatasetConfig::new(2, OptionMode::DirectAnswer);
    let ws = build_sample(&direct, &assets, TaskId::WordSearch, 0).unwrap().sample;
    let p = render_prompt(&ws);
    assert!(!p.text.lines().any(|l| l.starts_with('(')));
    assert_eq!(p.text.lines().next(), Some("Answer Yes or No."));
    let gsd = build_sample(&direct, &assets, TaskId::GridSum, 0).unwrap().sample;
    assert_eq!(render_prompt(&gsd).text.lines().next(), Some("Answer with a number only."));

    let js = build_sample(&fixed, &assets, TaskId::Jigsaw, 0).unwrap().sample;
    let p = render_prompt(&js);
    assert_eq!(p.images.len(), 5);
    assert!(p.images[0].ends_with("_incomplete.png"));
    for k in 0..4 {
        assert!(p.images[k + 1].ends_with(&format!("_tile{k}.png")));
    }
    assert!(p.text.contains("(A) image 2") && p.text.contains("(D) image 5"));

    let dh = build_sample(&fixed, &assets, TaskId::DifferenceHunt, 0).unwrap().sample;
    let p = render_prompt(&dh);
    assert!(p.images[1].ends_with("_pair.png"));
}

#[test]
fn templates_can_be_overridden() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("templates.toml");
    std::fs::write(&path, "grid_sum = \"Add them up.\"\noption_line = \"{label}: {text}\"\n").unwrap();
    let t = PromptTemplates::load(&path).unwrap();
    assert_eq!(t.build_question(&sum_rule(Decimal::zero(0))), "Add them up.");
    assert_eq!(t.hanzi_matrix, PromptTemplates::default().hanzi_matrix);
    std::fs::write(&path, "grid_sum = 3\n").unwrap();
    assert!(matches!(PromptTemplates::load(&path), Err(Error::Config(_))));
}
