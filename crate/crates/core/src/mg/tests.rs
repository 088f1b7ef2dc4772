use super::*;
use alloc::vec;
use proptest::prelude::*;

fn default_only(n: usize, m: usize, k: usize, horizon: usize) -> GameConfig {
    GameConfig {
        n_agents: n,
        memory_m: m,
        strategies_k: k,
        horizon,
        rl_agent_ids: vec![],
        rl_window: m,
    }
}

fn play_all(game: &mut MinorityGame, seed: u64) -> Vec<MgStep> {
    game.reset(seed);
    (0..game.config().horizon).map(|_| game.play(&[]).unwrap()).collect()
}

#[test]
fn outcome_examples() {
    let mut coin = RngStream::new(0, "coin");
    assert_eq!(minority_outcome(&[0, 0, 1], &mut coin), (1, false));
    assert_eq!(minority_outcome(&[1, 1, 1, 1], &mut coin), (0, false));
    let before = coin.counter();
    let (_, tie) = minority_outcome(&[0, 0, 1, 1], &mut coin);
    assert!(tie);
    assert!(coin.counter() > before);
}

#[test]
fn tie_coin_takes_both_sides() {
    let mut seen = [false; 2];
    for seed in 0..64 {
        let mut coin = RngStream::new(seed, "coin");
        let (g, tie) = minority_outcome(&[0, 1], &mut coin);
        assert!(tie);
        seen[g as usize] = true;
    }
    assert_eq!(seen, [true, true]);
}

#[test]
fn rewards() {
    assert_eq!(mg_reward(1, 1, false), 1.0);
    assert_eq!(mg_reward(0, 1, false), 0.0);
    assert_eq!(mg_reward(1, 1, true), 0.0);
}

#[test]
fn observation_is_newest_first() {
    // Winners in time order 1, 0, 1, 1: newest first that is 1, 1, 0.
    let mut h = HistoryWindow::from_bits(&[0, 0, 0, 0]);
    for w in [1, 0, 1, 1] {
        h.push(w);
    }
    assert_eq!(mg_rl_observation(&h, 3).unwrap(), vec![1.0, 1.0, 0.0]);
    assert!(mg_rl_observation(&h, 5).is_err());
}

#[test]
fn config_validation() {
    let ok = GameConfig::default();
    ok.validate().unwrap();
    for bad in [
        GameConfig { n_agents: 1, ..ok.clone() },
        GameConfig { memory_m: 0, ..ok.clone() },
        GameConfig { strategies_k: 0, ..ok.clone() },
        GameConfig { rl_window: 0, ..ok.clone() },
        GameConfig { rl_agent_ids: vec![301], ..ok.clone() },
        GameConfig { rl_agent_ids: vec![3, 3], ..ok.clone() },
    ] {
        assert!(bad.validate().is_err(), "{bad:?}");
    }
}

#[test]
fn step_contract() {
    let mut g = MinorityGame::new(GameConfig::default(), 1).unwrap();
    assert!(g.step(&[0]).is_err(), "step before reset");
    let obs = g.reset(2);
    assert_eq!(obs, vec![obs[0].clone()]);
    assert_eq!(obs[0].len(), 3);
    assert!(g.step(&[]).is_err());
    assert!(g.step(&[2]).is_err());
    let mut last = None;
    for _ in 0..500 {
        last = Some(g.step(&[1]).unwrap());
    }
    assert!(last.unwrap().done);
    assert!(g.step(&[1]).is_err(), "step after done");
}

#[test]
fn learner_counts_in_attendance() {
    let cfg = GameConfig {
        n_agents: 5,
        rl_agent_ids: vec![2],
        ..GameConfig::default()
    };
    let mut g = MinorityGame::new(cfg, 3).unwrap();
    g.reset(0);
    let a = g.clone().play(&[0]).unwrap();
    let b = g.play(&[1]).unwrap();
    assert_eq!(a.actions[2], 0);
    assert_eq!(b.attendance, a.attendance + 1);
}

#[test]
fn reward_conservation_and_score_bounds() {
    let mut g = MinorityGame::new(default_only(301, 2, 2, 200), 11).unwrap();
    let steps = play_all(&mut g, 5);
    for s in &steps {
        let winners = s.actions.iter().filter(|&&a| mg_reward(a, s.minority, s.tie) > 0.0).count();
        let minority_size = s.actions.iter().filter(|&&a| a == s.minority).count();
        assert_eq!(winners, minority_size);
        assert!(2 * winners < 301);
    }
    for a in g.population() {
        assert!(a.strategies.iter().all(|s| s.score <= 200));
    }
}

/// Re-scores every table from the recorded histories and minorities.
#[test]
fn replay_oracle_reproduces_scores() {
    let cfg = GameConfig {
        n_agents: 41,
        memory_m: 3,
        strategies_k: 3,
        horizon: 150,
        rl_agent_ids: vec![4, 17],
        rl_window: 5,
    };
    let mut g = MinorityGame::new(cfg, 8).unwrap();
    let mut history = g.reset(9)[0].clone();
    let mut records = Vec::new();
    let mut rng = RngStream::new(0, "learners");
    for _ in 0..150 {
        let acts = [rng.below(2), rng.below(2)];
        let r = g.step(&acts).unwrap();
        let s = g.last_step().unwrap().clone();
        records.push((history.clone(), s.minority));
        history = r.observations[0].clone();
    }
    for agent in g.population() {
        for table in &agent.strategies {
            let mut score = 0;
            for (h, minority) in &records {
                let idx = (0..3).map(|j| (h[j] as usize) << j).sum::<usize>();
                if table.actions()[idx] == *minority {
                    score += 1;
                }
            }
            assert_eq!(table.score, score);
        }
    }
}

#[test]
fn reset_clears_scores_and_is_deterministic() {
    let mut g = MinorityGame::new(default_only(101, 2, 2, 100), 4).unwrap();
    let a = play_all(&mut g, 7);
    let b = play_all(&mut g, 7);
    assert_eq!(a, b);
    g.reset(7);
    assert!(g.population().iter().all(|p| p.strategies.iter().all(|s| s.score == 0)));
}

#[test]
fn population_independent_of_learner_seats() {
    let base = default_only(20, 2, 2, 10);
    let g0 = MinorityGame::new(base.clone(), 5).unwrap();
    let g1 = MinorityGame::new(
        GameConfig {
            rl_agent_ids: vec![0],
            ..base
        },
        5,
    )
    .unwrap();
    assert_eq!(&g0.population()[1..], g1.population());
}

#[test]
fn resample_changes_books() {
    let mut g = MinorityGame::new(default_only(50, 2, 2, 10), 1).unwrap();
    let before = g.population().to_vec();
    g.resample(2).unwrap();
    assert_ne!(before, g.population());
    g.resample(1).unwrap();
    assert_eq!(before, g.population());
}

#[test]
fn sampled_populations_are_periodic() {
    for pop in 0..10 {
        let mut g = MinorityGame::new(default_only(301, 2, 2, 400), pop).unwrap();
        let steps = play_all(&mut g, pop + 100);
        let attendance: Vec<usize> = steps.iter().map(|s| s.attendance).collect();
        let c = find_cycle(&attendance, 32).expect("periodic attendance");
        assert!(c.detected_at() <= 64, "population {pop}: {c:?}");
    }
}

fn mirror_check(n: usize, m: usize, k: usize, pop: u64, seed: u64) -> core::result::Result<(), TestCaseError> {
    let mut g = MinorityGame::new(default_only(n, m, k, 60), pop).unwrap();
    let mut mirror = g.mirrored();
    let h = HistoryWindow::random(m, &mut RngStream::new(seed, "h"));
    g.reset_with_history(seed, h.clone()).unwrap();
    mirror.reset_with_history(seed, h.flipped()).unwrap();
    for _ in 0..60 {
        let a = g.play(&[]).unwrap();
        let b = mirror.play(&[]).unwrap();
        prop_assert_eq!(a.tie, b.tie);
        prop_assert_eq!(a.attendance, n - b.attendance);
        prop_assert!(a.actions.iter().zip(&b.actions).all(|(x, y)| x ^ y == 1));
        if !a.tie {
            prop_assert_eq!(a.minority ^ 1, b.minority);
        }
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn bit_flip_mirror(half in 1usize..40, m in 1usize..4, k in 1usize..4, pop: u64, seed: u64) {
        // Odd N keeps the tie coin out of the comparison.
        mirror_check(2 * half + 1, m, k, pop, seed)?;
    }

    #[test]
    fn scores_bounded_and_monotone(n in 2usize..30, m in 1usize..4, k in 1usize..4, pop: u64) {
        let mut g = MinorityGame::new(default_only(n, m, k, 40), pop).unwrap();
        g.reset(pop ^ 1);
        let mut prev: Vec<u64> = g.population().iter().flat_map(|a| a.strategies.iter().map(|s| s.score)).collect();
        for t in 1..=40u64 {
            g.play(&[]).unwrap();
            let now: Vec<u64> = g.population().iter().flat_map(|a| a.strategies.iter().map(|s| s.score)).collect();
            for (p, q) in prev.iter().zip(&now) {
                prop_assert!(*q == *p || *q == *p + 1);
                prop_assert!(*q <= t);
            }
            prev = now;
        }
    }
}

#[test]
fn pivotal_learner_always_loses() {
    let cfg = GameConfig {
        n_agents: 3,
        memory_m: 1,
        strategies_k: 1,
        horizon: 4,
        rl_agent_ids: vec![1],
        rl_window: 1,
    };
    let books = vec![
        BasicAgent { strategies: vec![StrategyTable::from_actions(vec![0, 0])], initial: 0 },
        BasicAgent { strategies: vec![StrategyTable::from_actions(vec![1, 1])], initial: 0 },
    ];
    let mut g = MinorityGame::with_population(cfg, books).unwrap();
    g.reset(0);
    for a in [0, 1, 0, 1] {
        let r = g.step(&[a]).unwrap();
        assert_eq!(r.rewards, vec![0.0]);
        assert_eq!(r.summary[4], 1.0);
    }
}
