use proptest::prelude::*;
use walkplan_core::dfpg::point_segment_distance;
use walkplan_core::simwalk::{door_targets, in_free_space};
use walkplan_core::{generate_room, simulate_walk, GenConfig, SimConfig};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn walks_stay_free_pass_doors_and_replay(room_seed in 0u64..10_000, walk_seed in any::<u64>()) {
        let room = generate_room(&GenConfig::with_seed(room_seed)).unwrap();
        let sim = SimConfig::with_seed(walk_seed);
        let traj = simulate_walk(&room, &sim).unwrap();
        prop_assert!(traj.len() >= 2);
        prop_assert!(in_free_space(&room, &traj));
        let grid = room.grid();
        for (r, c) in door_targets(&room) {
            let p = grid.cell_center(r, c);
            let d = traj.points.windows(2).map(|w| point_segment_distance(p, w[0], w[1])).fold(f64::INFINITY, f64::min);
            prop_assert!(d < 1e-9, "door cell ({}, {}) missed by {} m", r, c, d);
        }
        prop_assert_eq!(simulate_walk(&room, &sim).unwrap(), traj);
    }
}

#[test]
fn different_seeds_give_different_walks() {
    let room = generate_room(&GenConfig::with_seed(3)).unwrap();
    let a = simulate_walk(&room, &SimConfig::with_seed(1)).unwrap();
    let b = simulate_walk(&room, &SimConfig::with_seed(2)).unwrap();
    assert_ne!(a, b);
}
