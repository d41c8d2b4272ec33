use proptest::prelude::*;
use walkplan_core::boundgraph::extract_boundary_loop;
use walkplan_core::dfpg::SegmentLabel;
use walkplan_core::metrics::align_by_bbox;
use walkplan_core::pipeline::dataset::{read_dataset, split_sizes, write_dataset};
use walkplan_core::pipeline::training::{
    door_sample, train_cascade, transfer_door_labels, CascadeTrainConfig,
};
use walkplan_core::pipeline::{
    build_dataset, render_svg, rle_decode, rle_encode, structural_violations, Dataset,
    DatasetConfig,
};
use walkplan_core::{
    generate_room, run_cascade, simulate_walk, CascadeConfig, CellMap, FloorPlan, GenConfig,
    Models, SimConfig,
};

fn small_dataset(count: usize, seed: u64) -> (Dataset, DatasetConfig) {
    let cfg = DatasetConfig {
        count,
        seed,
        ..DatasetConfig::default()
    };
    (build_dataset(&cfg).unwrap(), cfg)
}

#[test]
fn ground_truth_plans_are_sound_and_round_trip() {
    for seed in 0..30 {
        let room = generate_room(&GenConfig::with_seed(seed)).unwrap();
        let plan = FloorPlan::from_dfpg(&room).unwrap();
        assert!(
            structural_violations(&plan, 4).is_empty(),
            "seed {seed}: {:?}",
            structural_violations(&plan, 4)
        );
        assert_eq!(
            FloorPlan::from_json(&plan.to_json().unwrap()).unwrap(),
            plan
        );
        let back = plan.to_dfpg().unwrap();
        assert_eq!(back.interior_mask(), room.interior_mask());
        assert_eq!(back.furniture_mask(), room.furniture_mask());
        assert_eq!(back.door_runs().len(), room.door_runs().len());
    }
}

#[test]
fn wall_polyline_has_corners_plus_one_vertices() {
    for seed in 0..10 {
        let room = generate_room(&GenConfig::with_seed(seed)).unwrap();
        let traj = simulate_walk(&room, &SimConfig::with_seed(seed)).unwrap();
        let plan = FloorPlan::from_dfpg(&room).unwrap();
        let svg = render_svg(&plan, Some(&traj)).unwrap();
        assert_eq!(svg, render_svg(&plan, Some(&traj)).unwrap());
        let walls = svg
            .lines()
            .find(|l| l.contains(r#"class="walls""#))
            .unwrap();
        let points = walls
            .split("points=\"")
            .nth(1)
            .unwrap()
            .split('"')
            .next()
            .unwrap();
        let corners = plan.boundary_loop().unwrap().corners().len();
        assert_eq!(
            points.split_whitespace().count(),
            corners + 1,
            "seed {seed}"
        );
        assert_eq!(svg.matches(r#"class="door""#).count(), plan.doors.len());
    }
}

#[test]
fn dataset_splits_are_sized_disjoint_and_persist() {
    let (ds, cfg) = small_dataset(20, 7);
    assert_eq!(split_sizes(20, cfg.split), (16, 2, 2));
    assert_eq!((ds.train.len(), ds.val.len(), ds.test.len()), (16, 2, 2));
    assert!(ds.splits_disjoint());
    for s in ds.all() {
        let g = door_sample(s, 0.5).unwrap();
        assert!(g.targets.contains(&1), "{} has no door target", s.id);
    }
    let dir = tempfile::tempdir().unwrap();
    write_dataset(&ds, &cfg, dir.path()).unwrap();
    let (back, back_cfg) = read_dataset(dir.path()).unwrap();
    assert_eq!(back, ds);
    assert_eq!(back_cfg, cfg);
}

#[test]
fn alignment_undoes_a_translation() {
    let room = generate_room(&GenConfig::with_seed(11)).unwrap();
    let plan = FloorPlan::from_dfpg(&room).unwrap();
    for (dx, dy) in [(3, 0), (-2, 1), (0, -4)] {
        let moved = plan.translated(dx, dy).unwrap();
        assert_eq!(align_by_bbox(&moved, &room).unwrap(), plan);
    }
}

#[test]
fn door_labels_transfer_to_a_grown_footprint() {
    let room = generate_room(&GenConfig::with_seed(5)).unwrap();
    let n = room.n();
    let inside = room.interior_mask();
    // Grow the footprint by one cell in every 4-direction.
    let grown: Vec<bool> = (0..n * n)
        .map(|i| {
            let (r, c) = (i / n, i % n);
            inside[i]
                || (r > 0 && inside[i - n])
                || (r + 1 < n && inside[i + n])
                || (c > 0 && inside[i - 1])
                || (c + 1 < n && inside[i + 1])
        })
        .collect();
    let lp = extract_boundary_loop(&CellMap::from_mask(n, &grown)).unwrap();
    let labels = transfer_door_labels(&lp, &room, 2);
    let doors = labels.iter().filter(|&&l| l == SegmentLabel::Door).count();
    let gt: usize = room.door_runs().iter().map(Vec::len).sum();
    assert!(doors >= gt, "{doors} transferred of {gt}");
    assert!(transfer_door_labels(&lp, &room, 0)
        .iter()
        .all(|&l| l == SegmentLabel::Wall));
}

#[test]
fn cascade_is_deterministic_and_sound() {
    let (ds, _) = small_dataset(12, 3);
    let mut cfg = CascadeTrainConfig::with_seed(3);
    for t in [
        &mut cfg.interior_train,
        &mut cfg.door_train,
        &mut cfg.furniture_train,
    ] {
        t.epochs = 2;
    }
    cfg.interior_net.base_features = 4;
    cfg.furniture_net.base_features = 4;
    let (models, _) = train_cascade(&ds.train, &ds.val, &cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    models.save(dir.path()).unwrap();
    let reloaded = Models::load(dir.path()).unwrap();
    let cascade = CascadeConfig::default();
    for s in &ds.train {
        let a = run_cascade(&s.traj, &models, s.room.grid(), &cascade);
        let b = run_cascade(&s.traj, &reloaded, s.room.grid(), &cascade);
        match (a, b) {
            (Ok(a), Ok(b)) => {
                assert_eq!(a, b);
                assert!(structural_violations(&a, cascade.door_width).is_empty());
            }
            (Err(a), Err(b)) => assert_eq!(a.to_string(), b.to_string()),
            (a, b) => panic!("{}: {:?} vs {:?}", s.id, a.is_ok(), b.is_ok()),
        }
    }
}

proptest! {
    #[test]
    fn rle_round_trips(mask in proptest::collection::vec(any::<bool>(), 0..300)) {
        let runs = rle_encode(&mask);
        prop_assert_eq!(runs.iter().sum::<usize>(), mask.len());
        prop_assert_eq!(rle_decode(&runs, mask.len()).unwrap(), mask);
    }
}
