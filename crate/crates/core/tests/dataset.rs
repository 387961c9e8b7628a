mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use common::rng;
use puzzlegen::dataset::{
    generate_dataset, hash_directory, image_hashes, prepare_output, refresh_from_images, verify_dataset,
    DatasetConfig, RefreshConfig, TaskCounts, IMAGES_DIR, REJECTIONS_FILE, SNAPSHOT_FILE,
};
use puzzlegen::pools::scene::write_scene_pool;
use puzzlegen::rules::PuzzleRule;
use puzzlegen::sample::{read_manifest, write_manifest, MANIFEST_FILE};
use puzzlegen::{Error, GroundTruth, OptionMode, PuzzleSample, TaskId};

fn small(seed: u64, mode: OptionMode, per_task: usize) -> DatasetConfig {
    DatasetConfig::new(seed, mode).with_counts(TaskCounts::uniform(per_task))
}

fn manifest(dir: &Path) -> Vec<PuzzleSample> {
    read_manifest(&dir.join(MANIFEST_FILE)).unwrap()
}

#[test]
fn word_search_only_is_balanced() {
    let dir = tempfile::tempdir().unwrap();
    let mut counts = TaskCounts::zero();
    counts.set(TaskId::WordSearch, 10);
    let cfg = DatasetConfig::new(7, OptionMode::FixedOption).with_counts(counts);
    let summary = generate_dataset(&cfg, dir.path()).unwrap();
    assert_eq!(summary.samples, 10);
    let samples = manifest(dir.path());
    let yes = samples.iter().filter(|s| s.ground_truth == GroundTruth::YesNo(true)).count();
    assert_eq!((yes, samples.len() - yes), (5, 5));
    assert!(samples.iter().all(|s| s.task == TaskId::WordSearch));
}

#[test]
fn same_seed_same_bytes_different_seed_fresh_images() {
    let root = tempfile::tempdir().unwrap();
    let (a, b, c) = (root.path().join("a"), root.path().join("b"), root.path().join("c"));
    generate_dataset(&small(7, OptionMode::FixedOption, 4), &a).unwrap();
    generate_dataset(&small(7, OptionMode::FixedOption, 4), &b).unwrap();
    generate_dataset(&small(8, OptionMode::FixedOption, 4), &c).unwrap();
    assert_eq!(hash_directory(&a).unwrap(), hash_directory(&b).unwrap());
    let ha: BTreeSet<String> = image_hashes(&a).unwrap().into_values().collect();
    let hc: BTreeSet<String> = image_hashes(&c).unwrap().into_values().collect();
    assert!(ha.is_disjoint(&hc));
    for f in [MANIFEST_FILE, REJECTIONS_FILE, SNAPSHOT_FILE] {
        assert!(a.join(f).is_file(), "{f}");
    }
}

#[test]
fn fresh_dataset_verifies_in_every_mode() {
    for mode in OptionMode::ALL {
        let dir = tempfile::tempdir().unwrap();
        generate_dataset(&small(11, mode, 6), dir.path()).unwrap();
        let report = verify_dataset(dir.path()).unwrap();
        assert!(report.all_passed(), "{mode}: {:?}", report.failures);
        assert!(report.rendered);
        let expected = if mode == OptionMode::DirectAnswer { 30 } else { 36 };
        assert_eq!(report.total, expected);
    }
}

#[test]
fn fixed_mode_positions_and_difficulty_fields() {
    let dir = tempfile::tempdir().unwrap();
    generate_dataset(&small(3, OptionMode::FixedOption, 10), dir.path()).unwrap();
    for s in manifest(dir.path()) {
        let opts = s.options.as_ref().unwrap();
        match s.task {
            TaskId::WordSearch => assert_eq!(opts.entries["A"], "Yes"),
            _ => assert_eq!(opts.correct_label.as_deref(), Some("B"), "{}", s.id),
        }
        if s.task.is_grid_task() {
            let n = s.difficulty.grid_n.unwrap();
            assert_eq!(s.difficulty.cell_px, Some(512 / n));
            assert_eq!(s.difficulty.resolution, 512);
        }
        if s.task == TaskId::DifferenceHunt {
            assert!((1..=5).contains(&s.difficulty.level.unwrap()));
        }
    }
}

#[test]
fn corrupted_ground_truth_is_pinpointed() {
    let dir = tempfile::tempdir().unwrap();
    generate_dataset(&small(5, OptionMode::FixedOption, 3), dir.path()).unwrap();
    let mut samples = manifest(dir.path());
    let victim = samples[4].id.clone();
    samples[4].ground_truth = match &samples[4].ground_truth {
        GroundTruth::Count(m) => GroundTruth::Count(m + 1),
        other => panic!("expected a count, got {other:?}"),
    };
    write_manifest(&dir.path().join(MANIFEST_FILE), &samples).unwrap();
    let report = verify_dataset(dir.path()).unwrap();
    let ids: Vec<&str> = report.failures.iter().map(|f| f.id.as_str()).collect();
    assert_eq!(ids, [victim.as_str()]);
    assert!(!report.all_passed());
}

#[test]
fn tampered_image_and_orphans_are_caught() {
    let dir = tempfile::tempdir().unwrap();
    generate_dataset(&small(5, OptionMode::RandomizedOption, 2), dir.path()).unwrap();
    let samples = manifest(dir.path());
    let gs = samples.iter().find(|s| s.task == TaskId::GridSum).unwrap();
    let dh = samples.iter().find(|s| s.task == TaskId::DifferenceHunt).unwrap();
    for target in [&gs.image_refs[0], &dh.image_refs[1]] {
        let path = dir.path().join(target);
        let mut img = image::open(&path).unwrap().to_rgb8();
        img.get_pixel_mut(3, 3).0 = [1, 2, 3];
        img.save(&path).unwrap();
    }
    std::fs::write(dir.path().join(IMAGES_DIR).join("GridSum").join("stray.png"), b"x").unwrap();
    let report = verify_dataset(dir.path()).unwrap();
    let ids: BTreeSet<&str> = report.failures.iter().map(|f| f.id.as_str()).collect();
    assert_eq!(ids, BTreeSet::from([gs.id.as_str(), dh.id.as_str()]));
    assert_eq!(report.orphans, ["images/GridSum/stray.png"]);
}

#[test]
fn empty_directory_has_no_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let err = verify_dataset(dir.path()).unwrap_err();
    assert!(matches!(err, Error::ManifestMissing(_)));
    assert!(err.to_string().contains("manifest missing"));
}

#[test]
fn output_directory_guard() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("keep"), "x").unwrap();
    assert!(matches!(prepare_output(dir.path(), false), Err(Error::OutputNotEmpty(_))));
    assert!(dir.path().join("keep").exists());
    prepare_output(dir.path(), true).unwrap();
    assert!(std::fs::read_dir(dir.path()).unwrap().next().is_none());
}

#[test]
fn config_roundtrip_and_validation() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.toml");
    std::fs::write(&path, "master_seed = 99\nmode = \"randomized-option\"\n[counts]\njigsaw = 0\n").unwrap();
    let cfg = DatasetConfig::load(&path).unwrap();
    assert_eq!(cfg.master_seed, 99);
    assert_eq!(cfg.mode, OptionMode::RandomizedOption);
    assert_eq!(cfg.counts.get(TaskId::Jigsaw), 0);
    assert_eq!(cfg.counts.get(TaskId::IconConnect), 2000);
    assert_eq!(TaskCounts::default().total(), 11_840);
    let empty = DatasetConfig::new(0, OptionMode::FixedOption).with_counts(TaskCounts::zero());
    assert!(matches!(empty.validate(), Err(Error::Config(_))));
}

fn refresh_cfg(images: &Path, jigsaw: usize, dh: usize) -> RefreshConfig {
    RefreshConfig {
        images: images.to_path_buf(),
        captions: None,
        tasks: vec![TaskId::Jigsaw, TaskId::DifferenceHunt],
        jigsaw,
        difference_hunt: dh,
        mode: OptionMode::FixedOption,
        master_seed: 4,
    }
}

fn source_of(s: &PuzzleSample) -> &str {
    match &s.rule {
        PuzzleRule::Jigsaw(r) => &r.source_image,
        PuzzleRule::DifferenceHunt(r) => &r.source_image,
        _ => unreachable!(),
    }
}

#[test]
fn refresh_draws_sources_from_the_pool() {
    let root = tempfile::tempdir().unwrap();
    let pool = root.path().join("pool");
    write_scene_pool(&pool, 50, 300, &mut rng(1)).unwrap();
    let out = root.path().join("out");
    let summary = refresh_from_images(&refresh_cfg(&pool, 100, 0), &out).unwrap();
    assert_eq!(summary.per_task["Jigsaw"], 100);
    let ids: BTreeSet<String> = (0..50).map(|i| format!("scene-{i:04}")).collect();
    let samples = manifest(&out);
    assert_eq!(samples.len(), 100);
    for s in &samples {
        assert!(ids.contains(source_of(s)));
        if let PuzzleRule::Jigsaw(r) = &s.rule {
            assert!(r.source_caption.as_deref().is_some_and(|c| c.starts_with("procedural scene")));
        }
    }
    assert!(verify_dataset(&out).unwrap().all_passed());
}

#[test]
fn refresh_rejects_other_tasks_and_empty_pools() {
    let root = tempfile::tempdir().unwrap();
    let mut cfg = refresh_cfg(root.path(), 5, 5);
    cfg.tasks = vec![TaskId::GridSum];
    assert!(matches!(cfg.to_dataset_config(), Err(Error::Config(_))));
    let empty = root.path().join("empty");
    std::fs::create_dir_all(&empty).unwrap();
    assert!(refresh_from_images(&refresh_cfg(&empty, 5, 5), &root.path().join("o")).is_err());
}

#[test]
fn refresh_over_flat_images_fails_instead_of_looping() {
    let root = tempfile::tempdir().unwrap();
    let pool = root.path().join("flat");
    std::fs::create_dir_all(&pool).unwrap();
    for i in 0..3 {
        image::RgbImage::from_pixel(256, 256, image::Rgb([40 * i, 80, 120])).save(pool.join(format!("f{i}.png"))).unwrap();
    }
    let err = refresh_from_images(&refresh_cfg(&pool, 2, 0), &root.path().join("o")).unwrap_err();
    assert!(matches!(err, Error::Rejected(_)), "{err}");
}

/// Two pools of equal size under one seed: the same layout decisions
/// (segmentation, tile grid, missing tile, region count and level) recur, and
/// only the source ids differ.
#[test]
fn refresh_over_two_pools_reproduces_layouts() {
    let root = tempfile::tempdir().unwrap();
    let (pa, pb) = (root.path().join("A"), root.path().join("B"));
    write_scene_pool(&pa, 20, 300, &mut rng(10)).unwrap();
    write_scene_pool(&pb, 20, 300, &mut rng(20)).unwrap();
    let mut outputs = BTreeMap::new();
    for (name, pool) in [("A", &pa), ("B", &pb)] {
        for (task, label) in [(TaskId::Jigsaw, "Jigsaw"), (TaskId::DifferenceHunt, "DiffHunt")] {
            let mut cfg = refresh_cfg(pool, 0, 0);
            cfg.tasks = vec![task];
            if task == TaskId::Jigsaw {
                cfg.jigsaw = 30;
            } else {
                cfg.difference_hunt = 30;
            }
            let out = root.path().join(format!("{label}-{name}"));
            refresh_from_images(&cfg, &out).unwrap();
            assert!(verify_dataset(&out).unwrap().all_passed(), "{label}-{name}");
            outputs.insert(format!("{label}-{name}"), manifest(&out));
        }
    }
    assert_eq!(outputs.len(), 4);
    for label in ["Jigsaw", "DiffHunt"] {
        let a: BTreeMap<u64, &PuzzleSample> = outputs[&format!("{label}-A")].iter().map(|s| (s.seed_index, s)).collect();
        let b = &outputs[&format!("{label}-B")];
        let mut compared = 0;
        for sb in b {
            let Some(sa) = a.get(&sb.seed_index) else { continue };
            compared += 1;
            assert_eq!(sa.difficulty, sb.difficulty, "{}", sb.id);
            assert_eq!(source_of(sa).replace("scene-", ""), source_of(sb).replace("scene-", ""));
            match (&sa.rule, &sb.rule) {
                (PuzzleRule::Jigsaw(x), PuzzleRule::Jigsaw(y)) => {
                    assert_eq!((&x.boundaries, x.missing_index), (&y.boundaries, y.missing_index));
                }
                (PuzzleRule::DifferenceHunt(x), PuzzleRule::DifferenceHunt(y)) => {
                    assert_eq!((x.level, x.m), (y.level, y.m));
                }
                _ => unreachable!(),
            }
        }
        assert!(compared >= 25, "{label}: only {compared} shared indices");
    }
}
