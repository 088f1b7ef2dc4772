//! Minority-game experiments.

use rlabm_core::mg::{find_cycle, matches_pattern, GameConfig, HistoryWindow, MinorityGame};
use rlabm_core::nn::{standard_specs, MlpParams, PolicyActor};
use rlabm_core::rl::{collect_episode, mac_train_step, Algorithm, CentralCritic, Learner};
use rlabm_core::sim::{run_episode, Environment, EpisodeTrace, Observation, StepResult};
use rlabm_core::{Result as SimResult, RngStream};
use serde_json::Map;

use super::{derive_seeds, par_trials, put, RunOutput};
use crate::analysis::{mean, mean_ci, rolling_mean};
use crate::error::HarnessResult;
use crate::io::TraceKind;
use crate::metrics::MetricsTable;
use crate::spec::{MgMultiSpec, MgResampledSpec, MgSingleSpec};

/// A game that always starts from the same warm-up history.
struct FixedStart<'a> {
    game: &'a mut MinorityGame,
    history: HistoryWindow,
}

impl Environment for FixedStart<'_> {
    fn num_agents(&self) -> usize {
        self.game.num_agents()
    }

    fn observation_dim(&self) -> usize {
        self.game.observation_dim()
    }

    fn num_actions(&self) -> usize {
        self.game.num_actions()
    }

    fn summary_columns(&self) -> Vec<String> {
        self.game.summary_columns()
    }

    fn describe(&self) -> String {
        self.game.describe()
    }

    fn reset(&mut self, seed: u64) -> Vec<Observation> {
        self.game
            .reset_with_history(seed, self.history.clone())
            .expect("history length matches config")
    }

    fn step(&mut self, actions: &[usize]) -> SimResult<StepResult> {
        self.game.step(actions)
    }
}

/// The warm-up history `MinorityGame::reset(seed)` draws.
pub fn start_history(cfg: &GameConfig, seed: u64) -> HistoryWindow {
    HistoryWindow::random(cfg.history_len(), &mut RngStream::new(seed, "mg/history"))
}

/// Greedy play of a frozen single-learner policy.
pub fn greedy_episode<E: Environment + ?Sized>(env: &mut E, actor: &MlpParams, horizon: usize, seed: u64) -> SimResult<EpisodeTrace> {
    let mut p = PolicyActor::new(actor.clone());
    p.greedy = true;
    run_episode(env, &mut [p], horizon, seed)
}

pub fn win_rate(trace: &EpisodeTrace) -> f64 {
    trace.mean_rewards().first().copied().unwrap_or(0.0)
}

/// Whether the default seats split evenly at any step, which makes the
/// learner pivotal and caps its win rate below 1.
pub fn tie_degenerate(trace: &EpisodeTrace) -> bool {
    trace
        .column("default_split_tie")
        .is_some_and(|c| c.iter().any(|&x| x > 0.0))
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

struct SingleTrial {
    table: MetricsTable,
    trace: EpisodeTrace,
    policy: MlpParams,
}

pub fn single_fixed(spec: &MgSingleSpec, seed: u64, run_id: &str) -> HarnessResult<RunOutput> {
    let trial_seeds = derive_seeds(seed, "mg/single-fixed", spec.trials);
    let trials = par_trials(spec.trials, |t| single_trial(spec, t, trial_seeds[t]))?;

    let mut metrics = MetricsTable::new(run_id);
    let mut summary = Map::new();
    let finals: Vec<f64> = trials
        .iter()
        .enumerate()
        .map(|(i, t)| t.table.get(i, "final_win_rate").unwrap_or(0.0))
        .collect();
    put(&mut summary, "trials_at_0.99", finals.iter().filter(|&&w| w >= 0.99).count());
    put(&mut summary, "mean_final_win_rate", mean(&finals));
    for t in &trials {
        metrics.extend(t.table.clone());
    }

    // The generalization sweep freezes the best-trained policy (earliest
    // trial on ties), so a population the learner never mastered does not
    // stand in for "trained".
    let best = (0..finals.len()).fold(0, |b, i| if finals[i] > finals[b] { i } else { b });
    put(&mut summary, "generalization_policy_trial", best);
    let first = &trials[best];
    if spec.generalization_populations > 0 {
        let gen = generalization(&spec.game, &first.policy, spec.generalization_populations, seed, run_id, best)?;
        let wins = gen.values("gen_win_rate");
        put(&mut summary, "generalization_mean_win_rate", mean(&wins));
        put(&mut summary, "generalization_below_0.9", wins.iter().filter(|&&w| w < 0.9).count());
        metrics.extend(gen);
    }
    Ok(RunOutput {
        metrics,
        trace: Some((first.trace.clone(), TraceKind::MinorityGame)),
        policies: vec![first.policy.clone()],
        trial_seeds,
        summary,
    })
}

fn single_trial(spec: &MgSingleSpec, trial: usize, seed: u64) -> HarnessResult<SingleTrial> {
    let mut s = RngStream::new(seed, "trial");
    let pop_seed = s.next_seed();
    let reset_seed = s.next_seed();
    let mut init = s.fork("init")?;
    let cfg = &spec.game;
    let horizon = cfg.horizon;
    let epochs = spec.train.epochs;
    let mut game = MinorityGame::new(cfg.clone(), pop_seed)?;
    let mut learner = Learner::new(cfg.rl_window, 2, &spec.train, &mut init)?;
    let mut table = MetricsTable::new("");

    for e in 0..epochs {
        if e % spec.eval_every == 0 {
            let tr = greedy_episode(&mut game, &learner.actor, horizon, reset_seed)?;
            table.push(trial, e, "eval_win_rate", win_rate(&tr));
        }
        let (tr, bufs) = collect_episode(&mut game, &mut [learner.policy()], horizon, reset_seed, false)?;
        table.push(trial, e, "train_reward", win_rate(&tr));
        let st = learner.update(&bufs[0], &spec.train)?;
        table.push(trial, e, "actor_loss", st.actor_loss);
        table.push(trial, e, "critic_loss", st.critic_loss);
    }

    let trace = greedy_episode(&mut game, &learner.actor, horizon, reset_seed)?;
    let final_rate = win_rate(&trace);
    table.push(trial, epochs, "eval_win_rate", final_rate);
    table.push(trial, epochs, "final_win_rate", final_rate);
    table.push(trial, epochs, "tie_degenerate", flag(tie_degenerate(&trace)));

    let attendance = trace.column("attendance").unwrap_or_default();
    let winners: Vec<u8> = trace.column("minority").unwrap_or_default().iter().map(|&x| x as u8).collect();
    match find_cycle(&attendance, spec.max_period) {
        Some(c) => {
            table.push(trial, epochs, "cycle_found", 1.0);
            table.push(trial, epochs, "cycle_period", c.period as f64);
            table.push(trial, epochs, "cycle_detected_at", c.detected_at() as f64);
            let one = &winners[c.start..c.start + c.period];
            table.push(trial, epochs, "pattern_match", flag(cycle_matches(one, &spec.pattern)));
        }
        None => table.push(trial, epochs, "cycle_found", 0.0),
    }

    // Same population and start with every bit relabeled.
    let mut mirror = game.mirrored();
    let flipped = start_history(cfg, reset_seed).flipped();
    let mut env = FixedStart {
        game: &mut mirror,
        history: flipped,
    };
    let mt = greedy_episode(&mut env, &learner.actor, horizon, reset_seed)?;
    table.push(trial, epochs, "mirror_win_rate", win_rate(&mt));

    Ok(SingleTrial {
        table,
        trace,
        policy: learner.actor,
    })
}

/// Whether a winner cycle is `pattern` repeated, up to rotation and
/// relabeling.
pub fn cycle_matches(cycle: &[u8], pattern: &[u8]) -> bool {
    if pattern.is_empty() || cycle.is_empty() {
        return false;
    }
    // A cycle found with a shorter period than the pattern still matches
    // when the pattern is that cycle repeated.
    let unrolled: Vec<u8> = if pattern.len().is_multiple_of(cycle.len()) {
        cycle.iter().copied().cycle().take(pattern.len()).collect()
    } else {
        cycle.to_vec()
    };
    matches_pattern(&unrolled, pattern)
}

/// Frozen `policy` against `populations` freshly drawn populations.
/// Rows are filed under `trial` with the population index as epoch.
pub fn generalization(
    cfg: &GameConfig,
    policy: &MlpParams,
    populations: usize,
    seed: u64,
    run_id: &str,
    trial: usize,
) -> HarnessResult<MetricsTable> {
    let seeds = derive_seeds(seed, "mg/generalization", populations);
    let rows = par_trials(populations, |p| {
        let mut s = RngStream::new(seeds[p], "population");
        let mut game = MinorityGame::new(cfg.clone(), s.next_seed())?;
        let tr = greedy_episode(&mut game, policy, cfg.horizon, s.next_seed())?;
        let total: f64 = tr.steps.iter().map(|st| st.rewards[0]).sum();
        Ok((win_rate(&tr), total, tie_degenerate(&tr)))
    })?;
    let mut table = MetricsTable::new(run_id);
    for (p, (w, total, degenerate)) in rows.into_iter().enumerate() {
        table.push(trial, p, "gen_win_rate", w);
        table.push(trial, p, "gen_total_reward", total);
        table.push(trial, p, "gen_tie_degenerate", flag(degenerate));
    }
    Ok(table)
}

/// Attendance periodicity of `populations` default-only games.
pub fn periodicity(cfg: &GameConfig, populations: usize, max_period: usize, pattern: &[u8], seed: u64, run_id: &str) -> HarnessResult<MetricsTable> {
    let cfg = GameConfig {
        rl_agent_ids: Vec::new(),
        ..cfg.clone()
    };
    let seeds = derive_seeds(seed, "mg/periodicity", populations);
    let rows = par_trials(populations, |p| {
        let mut s = RngStream::new(seeds[p], "population");
        let mut game = MinorityGame::new(cfg.clone(), s.next_seed())?;
        game.reset(s.next_seed());
        let mut attendance = Vec::with_capacity(cfg.horizon);
        let mut winners = Vec::with_capacity(cfg.horizon);
        for _ in 0..cfg.horizon {
            let st = game.play(&[])?;
            attendance.push(st.attendance);
            winners.push(st.minority);
        }
        Ok(find_cycle(&attendance, max_period).map(|c| {
            let one = winners[c.start..c.start + c.period].to_vec();
            (c, cycle_matches(&one, pattern))
        }))
    })?;
    let mut table = MetricsTable::new(run_id);
    for (p, r) in rows.into_iter().enumerate() {
        match r {
            Some((c, matched)) => {
                table.push(p, 0, "cycle_found", 1.0);
                table.push(p, 0, "cycle_period", c.period as f64);
                table.push(p, 0, "cycle_detected_at", c.detected_at() as f64);
                table.push(p, 0, "pattern_match", flag(matched));
            }
            None => table.push(p, 0, "cycle_found", 0.0),
        }
    }
    Ok(table)
}

pub fn resampled(spec: &MgResampledSpec, seed: u64, run_id: &str) -> HarnessResult<RunOutput> {
    let cfg = &spec.game;
    let horizon = cfg.horizon;
    let mut s = RngStream::new(seed, "mg/resampled");
    let mut init = s.fork("init")?;
    let mut learner = Learner::new(cfg.rl_window, 2, &spec.train, &mut init)?;
    let mut metrics = MetricsTable::new(run_id);
    let mut wins = Vec::new();
    let mut clean = Vec::new();
    let mut last = None;
    for e in 0..spec.train.epochs {
        let pop_seed = s.next_seed();
        let reset_seed = s.next_seed();
        let mut game = MinorityGame::new(cfg.clone(), pop_seed)?;
        // Evaluated before training on it: the learner has never seen this
        // population.
        let tr = greedy_episode(&mut game, &learner.actor, horizon, reset_seed)?;
        let w = win_rate(&tr);
        let degenerate = tie_degenerate(&tr);
        metrics.push(0, e, "win_rate", w);
        metrics.push(0, e, "tie_degenerate", flag(degenerate));
        wins.push(w);
        if !degenerate {
            clean.push((e, w));
        }
        let (ttr, bufs) = collect_episode(&mut game, &mut [learner.policy()], horizon, reset_seed, false)?;
        metrics.push(0, e, "train_reward", win_rate(&ttr));
        learner.update(&bufs[0], &spec.train)?;
        last = Some(tr);
    }
    let k = spec.rolling_window;
    for (i, r) in rolling_mean(&wins, k).into_iter().enumerate() {
        metrics.push(0, i + k - 1, "rolling_win_rate", r);
    }
    let clean_rates: Vec<f64> = clean.iter().map(|c| c.1).collect();
    for (i, r) in rolling_mean(&clean_rates, k).into_iter().enumerate() {
        metrics.push(0, clean[i + k - 1].0, "rolling_win_rate_clean", r);
    }
    let mut summary = Map::new();
    let tail = &clean_rates[clean_rates.len().saturating_sub(100)..];
    put(&mut summary, "plateau_clean_last100", mean(tail));
    put(&mut summary, "tie_degenerate_epochs", wins.len() - clean.len());
    Ok(RunOutput {
        metrics,
        trace: last.map(|t| (t, TraceKind::MinorityGame)),
        policies: vec![learner.actor],
        trial_seeds: vec![seed],
        summary,
    })
}

struct MultiReplicate {
    table: MetricsTable,
    improvement: f64,
    actors: Vec<MlpParams>,
    trace: EpisodeTrace,
}

pub fn multi(spec: &MgMultiSpec, seed: u64, run_id: &str) -> HarnessResult<RunOutput> {
    let trial_seeds = derive_seeds(seed, "mg/multi", spec.replicates);
    let reps = par_trials(spec.replicates, |r| multi_replicate(spec, r, trial_seeds[r]))?;
    let mut metrics = MetricsTable::new(run_id);
    let improvements: Vec<f64> = reps.iter().map(|r| r.improvement).collect();
    for r in &reps {
        metrics.extend(r.table.clone());
    }
    let ci = mean_ci(&improvements, 0.95);
    let mut summary = Map::new();
    put(&mut summary, "mean_improvement", ci.mean);
    put(&mut summary, "improvement_ci95_lo", ci.lo);
    put(&mut summary, "improvement_ci95_hi", ci.hi);
    let first = reps.into_iter().next().expect("at least one replicate");
    Ok(RunOutput {
        metrics,
        trace: Some((first.trace, TraceKind::MinorityGame)),
        policies: first.actors,
        trial_seeds,
        summary,
    })
}

fn multi_replicate(spec: &MgMultiSpec, rep: usize, seed: u64) -> HarnessResult<MultiReplicate> {
    let cfg = &spec.game;
    let n = cfg.rl_agent_ids.len();
    let obs = cfg.rl_window;
    let train = &spec.train;
    let mut s = RngStream::new(seed, "replicate");
    let mut game = MinorityGame::new(cfg.clone(), s.next_seed())?;
    let eval_seeds: Vec<u64> = (0..spec.eval_episodes).map(|_| s.next_seed()).collect();
    let mut init = s.fork("init")?;
    let specs = standard_specs(obs, &train.hidden, 2);
    let template = MlpParams::init(&specs, &mut init)?;
    let mut learners: Vec<Learner> = (0..n)
        .map(|i| -> HarnessResult<Learner> {
            let mut l = Learner::new(obs, 2, train, &mut init)?;
            if !spec.independent_init || i == 0 {
                l.actor = template.clone();
            }
            Ok(l)
        })
        .collect::<HarnessResult<_>>()?;
    let mut critic = if train.algorithm == Algorithm::Mac {
        Some(CentralCritic::new(n, obs, 2, &train.hidden, true, &mut init)?)
    } else {
        None
    };
    let mut table = MetricsTable::new("");

    let pre = multi_eval(&mut game, &learners, &eval_seeds, rep, "pre", &mut table)?;
    let mut train_seeds = s.fork("train")?;
    for e in 0..train.epochs {
        let mut actors: Vec<PolicyActor> = learners.iter().map(Learner::policy).collect();
        let (tr, bufs) = collect_episode(&mut game, &mut actors, cfg.horizon, train_seeds.next_seed(), critic.is_some())?;
        table.push(rep, e, "train_reward", mean(&tr.mean_rewards()));
        match critic.as_mut() {
            Some(c) => {
                let mut actors: Vec<MlpParams> = learners.iter().map(|l| l.actor.clone()).collect();
                let st = mac_train_step(&mut actors, c, &bufs, train)?;
                for (l, a) in learners.iter_mut().zip(actors) {
                    l.actor = a;
                }
                table.push(rep, e, "central_loss", st.central_loss);
            }
            None => {
                for (l, b) in learners.iter_mut().zip(&bufs) {
                    l.update(b, train)?;
                }
            }
        }
    }
    let post = multi_eval(&mut game, &learners, &eval_seeds, rep, "post", &mut table)?;
    table.push(rep, train.epochs, "improvement", post - pre);
    let mut actors: Vec<PolicyActor> = learners.iter().map(Learner::policy).collect();
    let trace = run_episode(&mut game, &mut actors, cfg.horizon, eval_seeds[0])?;
    Ok(MultiReplicate {
        table,
        improvement: post - pre,
        actors: learners.into_iter().map(|l| l.actor).collect(),
        trace,
    })
}

/// Plays the evaluation episodes with sampling policies; returns the mean
/// learner reward.
fn multi_eval(game: &mut MinorityGame, learners: &[Learner], seeds: &[u64], rep: usize, tag: &str, table: &mut MetricsTable) -> HarnessResult<f64> {
    let mut all = Vec::new();
    for (j, &sd) in seeds.iter().enumerate() {
        let mut actors: Vec<PolicyActor> = learners.iter().map(Learner::policy).collect();
        let tr = run_episode(game, &mut actors, game.config().horizon, sd)?;
        let per_agent = tr.mean_rewards();
        for (i, r) in per_agent.iter().enumerate() {
            table.push(rep, j, format!("{tag}_reward/agent-{i}"), *r);
        }
        let agg = mean(&per_agent);
        table.push(rep, j, format!("{tag}_reward"), agg);
        table.push(rep, j, format!("{tag}_default_win_rate"), mean(&tr.column("default_win_rate").unwrap_or_default()));
        all.push(agg);
    }
    Ok(mean(&all))
}
