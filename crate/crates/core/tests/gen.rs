use walkplan_core::dfpg::{derive_free_map, derive_interior_map};
use walkplan_core::gen::{check_room, DOOR_WIDTH};
use walkplan_core::raster::count_components4;
use walkplan_core::{generate_room, CellLabel, GenConfig};

#[test]
fn thousand_rooms_are_valid_with_connected_free_space() {
    for seed in 0..1000 {
        let g = generate_room(&GenConfig::with_seed(seed)).unwrap();
        check_room(&g).unwrap_or_else(|e| panic!("seed {seed}: {e}"));
        assert_eq!(count_components4(&g.free_mask(), g.n()), 1, "seed {seed}");
        assert!(g.door_runs().iter().all(|d| d.len() == DOOR_WIDTH));
    }
}

#[test]
fn derived_maps_count_labels() {
    for seed in 0..50 {
        let g = generate_room(&GenConfig::with_seed(seed)).unwrap();
        let inside = g.cells().iter().filter(|&&c| c == CellLabel::In).count();
        let furn = g.cells().iter().filter(|&&c| c == CellLabel::Furn).count();
        assert!(furn > 0);
        assert_eq!(derive_interior_map(&g).sum(), (inside + furn) as f64);
        assert_eq!(derive_free_map(&g).sum(), inside as f64);
    }
}

#[test]
fn rooms_respect_side_limits() {
    for seed in 0..100 {
        let g = generate_room(&GenConfig::with_seed(seed)).unwrap();
        let n = g.n();
        let mask = g.interior_mask();
        let rows: Vec<usize> = (0..n).filter(|r| (0..n).any(|c| mask[r * n + c])).collect();
        let cols: Vec<usize> = (0..n).filter(|c| (0..n).any(|r| mask[r * n + c])).collect();
        let h = rows.last().unwrap() - rows[0] + 1;
        let w = cols.last().unwrap() - cols[0] + 1;
        assert!(
            (12..=40).contains(&h) && (12..=40).contains(&w),
            "seed {seed}: {h}x{w}"
        );
    }
}
