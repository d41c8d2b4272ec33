use walkplan_core::pipeline::training::interior_sample;
use walkplan_core::pipeline::RoomSample;
use walkplan_core::{generate_room, simulate_walk, GenConfig, SimConfig};
use walkplan_nn::{curriculum_train, evaluate_all, EncDec, EncDecConfig, SegSample, TrainConfig};

fn corpus(seeds: std::ops::Range<u64>, max_concavities: Option<usize>) -> Vec<SegSample> {
    seeds
        .map(|seed| {
            let mut gen = GenConfig::with_seed(seed);
            if let Some(k) = max_concavities {
                gen.max_concavities = k;
            }
            let room = generate_room(&gen).unwrap();
            let traj = simulate_walk(&room, &SimConfig::with_seed(seed)).unwrap();
            let s = RoomSample::new(seed as usize, room, traj).unwrap();
            interior_sample(&s, 0.5).unwrap()
        })
        .collect()
}

#[test]
fn easy_phase_helps_on_toy_corpus() {
    // 50 rooms: 25 rectangles, 20 with notches, 5 validation.
    let easy = corpus(0..25, Some(0));
    let hard = corpus(1000..1020, None);
    let val = corpus(2000..2005, None);
    let net_cfg = EncDecConfig {
        base_features: 4,
        ..EncDecConfig::new(1, 2)
    };
    let mut wins = 0;
    for seed in 0..5 {
        let phase = |lr, seed| TrainConfig {
            lr,
            epochs: 3,
            seed,
            ..TrainConfig::default()
        };
        let (cfg_easy, cfg_hard) = (phase(0.005, seed), phase(0.0001, seed + 100));

        let mut both = EncDec::new(net_cfg.clone(), seed).unwrap();
        curriculum_train(&mut both, &easy, &hard, &val, &cfg_easy, &cfg_hard).unwrap();
        let mut alone = EncDec::new(net_cfg.clone(), seed).unwrap();
        curriculum_train(&mut alone, &[], &hard, &val, &cfg_easy, &cfg_hard).unwrap();

        let a = evaluate_all(&both, &val).unwrap().accuracy();
        let b = evaluate_all(&alone, &val).unwrap().accuracy();
        println!("seed {seed}: curriculum {a:.4}, hard only {b:.4}");
        wins += usize::from(a >= b);
    }
    assert!(wins >= 3, "curriculum won {wins} of 5 seeds");
}
