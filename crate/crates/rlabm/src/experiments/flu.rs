//! Influenza vaccination experiments.

use rlabm_core::flu::{burn_in, generate_network, ContactNetwork, FluEnv, FluModel, FLU_OBS_DIM};
use rlabm_core::nn::{standard_specs, MlpParams, PolicyActor};
use rlabm_core::rl::{collect_episode, mac_train_step, Algorithm, CentralCritic, Learner, TrainConfig};
use rlabm_core::sim::{run_episode, EpisodeTrace, FixedActor};
use rlabm_core::RngStream;
use serde_json::Map;

use super::{derive_seeds, par_trials, put, RunOutput};
use crate::analysis::{
    average_matrices, correlation_matrix, independent_null_max_corr, max_off_diagonal_abs, mean, mean_ci, quantile,
};
use crate::error::{HarnessError, HarnessResult};
use crate::io::{read_network, TraceKind};
use crate::metrics::MetricsTable;
use crate::spec::{FluDegreeSpec, FluSetup, FluSingleSpec};

/// The network named by `setup`: the edge list when one is given, otherwise
/// a fresh draw from `rng`.
pub fn network(setup: &FluSetup, rng: &mut RngStream) -> HarnessResult<ContactNetwork> {
    match &setup.network_path {
        Some(p) => read_network(p, None),
        None => Ok(generate_network(&setup.network, rng)?),
    }
}

/// Default-model population on `net`, burned in to stationarity.
pub fn burned_in(setup: &FluSetup, net: ContactNetwork, seed: u64) -> HarnessResult<(FluModel, usize)> {
    let mut m = FluModel::new(net, setup.behavior.clone(), setup.transmission.clone())?;
    let seasons = burn_in(&mut m, &setup.burn_in, seed)?;
    Ok((m, seasons))
}

/// Outcome of one evaluation run.
#[derive(Clone, Debug)]
pub struct FluEval {
    /// Mean uninfected-season rate over learners.
    pub uninfected: f64,
    pub vaccination: f64,
    /// Per-learner vaccination series (1 = vaccinated).
    pub actions: Vec<Vec<f64>>,
    pub trace: EpisodeTrace,
}

/// Plays `seasons` seasons from the environment's start with sampling
/// policies.
pub fn evaluate(env: &FluEnv, actors: &[MlpParams], seasons: usize, seed: u64) -> HarnessResult<FluEval> {
    let mut e = env.clone();
    e.set_horizon(seasons);
    let mut pa: Vec<PolicyActor> = actors.iter().cloned().map(PolicyActor::new).collect();
    let trace = run_episode(&mut e, &mut pa, seasons, seed)?;
    Ok(summarize_eval(trace, actors.len()))
}

/// The same seasons with the learners' nodes left to the default model.
pub fn evaluate_twin(env: &FluEnv, seasons: usize, seed: u64) -> HarnessResult<f64> {
    let mut twin = env.autonomous_twin();
    twin.set_horizon(seasons);
    let n = env.rl_nodes().len();
    let mut fixed = vec![FixedActor(0); n];
    let trace = run_episode(&mut twin, &mut fixed, seasons, seed)?;
    Ok(mean(&trace.mean_rewards()))
}

fn summarize_eval(trace: EpisodeTrace, n: usize) -> FluEval {
    let actions: Vec<Vec<f64>> = (0..n)
        .map(|i| trace.steps.iter().map(|s| s.actions[i] as f64).collect())
        .collect();
    let vaccination = mean(&actions.iter().map(|a| mean(a)).collect::<Vec<_>>());
    FluEval {
        uninfected: mean(&trace.mean_rewards()),
        vaccination,
        actions,
        trace,
    }
}

struct SingleReplicate {
    table: MetricsTable,
    advantage: f64,
    policy: MlpParams,
    trace: EpisodeTrace,
}

pub fn single(spec: &FluSingleSpec, seed: u64, run_id: &str) -> HarnessResult<RunOutput> {
    let trial_seeds = derive_seeds(seed, "flu/single", spec.replicates);
    let reps = par_trials(spec.replicates, |r| single_replicate(spec, r, trial_seeds[r]))?;
    let mut metrics = MetricsTable::new(run_id);
    for r in &reps {
        metrics.extend(r.table.clone());
    }
    let adv: Vec<f64> = reps.iter().map(|r| r.advantage).collect();
    let mut summary = Map::new();
    put(&mut summary, "replicates_ahead_by_0.01", adv.iter().filter(|&&a| a >= 0.01).count());
    put(&mut summary, "mean_advantage", mean(&adv));
    if spec.ablation_efficacy.is_some() {
        put(&mut summary, "mean_ablation_advantage", mean(&metrics.values("ablation_advantage")));
    }
    let first = reps.into_iter().next().expect("at least one replicate");
    Ok(RunOutput {
        metrics,
        trace: Some((first.trace, TraceKind::Flu)),
        policies: vec![first.policy],
        trial_seeds,
        summary,
    })
}

fn single_replicate(spec: &FluSingleSpec, rep: usize, seed: u64) -> HarnessResult<SingleReplicate> {
    let mut s = RngStream::new(seed, "replicate");
    let net = network(&spec.flu, &mut s.fork("network")?)?;
    let burn_seed = s.next_seed();
    let node = s.below(net.nodes());
    let init_seed = s.next_seed();
    let train_seed = s.next_seed();
    let eval_seed = s.next_seed();
    let mut table = MetricsTable::new("");
    table.push(rep, 0, "node_degree", net.degree(node) as f64);

    let (outcome, seasons) = train_single(spec, &spec.flu, net.clone(), node, burn_seed, init_seed, train_seed, eval_seed, rep, Some(&mut table))?;
    table.push(rep, 0, "burn_in_seasons", seasons as f64);
    let advantage = outcome.post.uninfected - outcome.twin;
    let e = spec.train.epochs;
    table.push(rep, e, "pre_uninfected_rate", outcome.pre.uninfected);
    table.push(rep, e, "pre_vaccination_rate", outcome.pre.vaccination);
    table.push(rep, e, "post_uninfected_rate", outcome.post.uninfected);
    table.push(rep, e, "post_vaccination_rate", outcome.post.vaccination);
    table.push(rep, e, "default_uninfected_rate", outcome.twin);
    table.push(rep, e, "advantage", advantage);

    if let Some(eff) = spec.ablation_efficacy {
        let mut setup = spec.flu.clone();
        setup.transmission.efficacy = eff;
        let (abl, _) = train_single(spec, &setup, net, node, burn_seed, init_seed, train_seed, eval_seed, rep, None)?;
        table.push(rep, e, "ablation_post_uninfected_rate", abl.post.uninfected);
        table.push(rep, e, "ablation_default_uninfected_rate", abl.twin);
        table.push(rep, e, "ablation_advantage", abl.post.uninfected - abl.twin);
    }
    Ok(SingleReplicate {
        table,
        advantage,
        policy: outcome.policy,
        trace: outcome.post.trace,
    })
}

struct SingleOutcome {
    pre: FluEval,
    post: FluEval,
    twin: f64,
    policy: MlpParams,
}

#[allow(clippy::too_many_arguments)]
fn train_single(
    spec: &FluSingleSpec,
    setup: &FluSetup,
    net: ContactNetwork,
    node: usize,
    burn_seed: u64,
    init_seed: u64,
    train_seed: u64,
    eval_seed: u64,
    rep: usize,
    mut table: Option<&mut MetricsTable>,
) -> HarnessResult<(SingleOutcome, usize)> {
    let (model, seasons) = burned_in(setup, net, burn_seed)?;
    let mut env = FluEnv::new(model, vec![node], spec.episode_seasons)?;
    let mut learner = Learner::new(FLU_OBS_DIM, 2, &spec.train, &mut RngStream::new(init_seed, "init"))?;
    let pre = evaluate(&env, &[learner.actor.clone()], spec.eval_seasons, eval_seed)?;
    let mut seeds = RngStream::new(train_seed, "train");
    for e in 0..spec.train.epochs {
        let (tr, bufs) = collect_episode(&mut env, &mut [learner.policy()], spec.episode_seasons, seeds.next_seed(), false)?;
        if let Some(t) = table.as_deref_mut() {
            t.push(rep, e, "train_reward", mean(&tr.mean_rewards()));
        }
        learner.update(&bufs[0], &spec.train)?;
    }
    let post = evaluate(&env, &[learner.actor.clone()], spec.eval_seasons, eval_seed)?;
    let twin = evaluate_twin(&env, spec.eval_seasons, eval_seed)?;
    Ok((
        SingleOutcome {
            pre,
            post,
            twin,
            policy: learner.actor,
        },
        seasons,
    ))
}

/// Nodes with degree at most the first quartile and at least the third.
pub fn degree_quartile_nodes(net: &ContactNetwork) -> (Vec<usize>, Vec<usize>, usize, usize) {
    let deg = net.degrees();
    let mut sorted = deg.clone();
    sorted.sort_unstable();
    let q1 = sorted[sorted.len() / 4];
    let q3 = sorted[3 * sorted.len() / 4];
    let low = (0..deg.len()).filter(|&i| deg[i] <= q1).collect();
    let high = (0..deg.len()).filter(|&i| deg[i] >= q3).collect();
    (low, high, q1, q3)
}

struct DegreeReplicate {
    table: MetricsTable,
    improvement: [f64; 2],
    sync: [f64; 2],
    actors: Vec<MlpParams>,
    trace: EpisodeTrace,
}

pub fn degree(spec: &FluDegreeSpec, seed: u64, run_id: &str) -> HarnessResult<RunOutput> {
    let trial_seeds = derive_seeds(seed, "flu/degree", spec.replicates);
    let reps = par_trials(spec.replicates, |r| degree_replicate(spec, r, trial_seeds[r]))?;
    let mut metrics = MetricsTable::new(run_id);
    for r in &reps {
        metrics.extend(r.table.clone());
    }
    let mut summary = Map::new();
    for (k, name) in ["low", "high"].iter().enumerate() {
        let imp: Vec<f64> = reps.iter().map(|r| r.improvement[k]).collect();
        let ci = mean_ci(&imp, 0.95);
        put(&mut summary, &format!("{name}_mean_improvement"), ci.mean);
        put(&mut summary, &format!("{name}_improvement_ci95_lo"), ci.lo);
        put(&mut summary, &format!("{name}_improvement_ci95_hi"), ci.hi);
        let sync: Vec<f64> = reps.iter().map(|r| r.sync[k]).collect();
        put(&mut summary, &format!("{name}_max_sync_corr"), sync.iter().copied().fold(0.0, f64::max));
    }
    let diff: Vec<f64> = reps.iter().map(|r| r.improvement[0] - r.improvement[1]).collect();
    let ci = mean_ci(&diff, 0.95);
    put(&mut summary, "low_minus_high_improvement", ci.mean);
    put(&mut summary, "low_minus_high_ci95_lo", ci.lo);
    put(&mut summary, "low_minus_high_ci95_hi", ci.hi);
    let first = reps.into_iter().next().expect("at least one replicate");
    Ok(RunOutput {
        metrics,
        trace: Some((first.trace, TraceKind::Flu)),
        policies: first.actors,
        trial_seeds,
        summary,
    })
}

fn degree_replicate(spec: &FluDegreeSpec, rep: usize, seed: u64) -> HarnessResult<DegreeReplicate> {
    let mut s = RngStream::new(seed, "replicate");
    let net = network(&spec.flu, &mut s.fork("network")?)?;
    let (model, _) = burned_in(&spec.flu, net, s.next_seed())?;
    let (mut low, mut high, q1, q3) = degree_quartile_nodes(&model.network);
    let n = spec.ensemble_size;
    if low.len() < n || high.len() < n {
        return Err(HarnessError::config(format!(
            "ensemble_size {n} exceeds the quartile groups ({} low, {} high)",
            low.len(),
            high.len()
        )));
    }
    let mut pick = s.fork("pick")?;
    pick.shuffle(&mut low);
    pick.shuffle(&mut high);
    low.truncate(n);
    high.truncate(n);
    let template = MlpParams::init(
        &standard_specs(FLU_OBS_DIM, &spec.train.hidden, 2),
        &mut s.fork("template")?,
    )?;
    let eval_seed = s.next_seed();
    let sync_seeds: Vec<u64> = (0..spec.sync_runs).map(|_| s.next_seed()).collect();
    let critic_seed = s.next_seed();
    let train_seed = s.next_seed();
    let null_seed = s.next_seed();

    let mut table = MetricsTable::new("");
    table.push(rep, 0, "degree_q1", q1 as f64);
    table.push(rep, 0, "degree_q3", q3 as f64);
    let mut improvement = [0.0; 2];
    let mut sync = [0.0; 2];
    let mut kept = None;
    for (k, (name, nodes)) in [("low", low), ("high", high)].into_iter().enumerate() {
        let mean_degree = mean(&nodes.iter().map(|&i| model.network.degree(i) as f64).collect::<Vec<_>>());
        table.push(rep, 0, format!("{name}/mean_degree"), mean_degree);
        let mut env = FluEnv::new(model.clone(), nodes, spec.episode_seasons)?;
        let mut actors = vec![template.clone(); n];
        let pre = evaluate(&env, &actors, spec.eval_seasons, eval_seed)?;
        train_ensemble(spec, &mut env, &mut actors, critic_seed, train_seed, rep, name, &mut table)?;
        let post = evaluate(&env, &actors, spec.eval_seasons, eval_seed)?;
        let e = spec.train.epochs;
        table.push(rep, e, format!("{name}/pre_uninfected_rate"), pre.uninfected);
        table.push(rep, e, format!("{name}/pre_infection_rate"), 1.0 - pre.uninfected);
        table.push(rep, e, format!("{name}/pre_vaccination_rate"), pre.vaccination);
        table.push(rep, e, format!("{name}/post_uninfected_rate"), post.uninfected);
        table.push(rep, e, format!("{name}/post_vaccination_rate"), post.vaccination);
        table.push(rep, e, format!("{name}/improvement"), post.uninfected - pre.uninfected);
        improvement[k] = post.uninfected - pre.uninfected;

        // Synchronization: average the action correlation matrices of
        // independent post-training runs and compare the largest
        // off-diagonal entry with agents acting independently at the same
        // per-agent rates.
        let mut mats = Vec::new();
        let mut rates = vec![0.0; n];
        for &sd in &sync_seeds {
            let ev = evaluate(&env, &actors, spec.eval_seasons, sd)?;
            for (r, a) in rates.iter_mut().zip(&ev.actions) {
                *r += mean(a) / sync_seeds.len() as f64;
            }
            mats.push(correlation_matrix(&ev.actions));
        }
        let observed = max_off_diagonal_abs(&average_matrices(&mats));
        let null = independent_null_max_corr(&rates, spec.eval_seasons, spec.sync_runs, spec.null_draws, null_seed);
        table.push(rep, e, format!("{name}/sync_max_abs_corr"), observed);
        table.push(rep, e, format!("{name}/sync_null_q95"), quantile(&null, 0.95));
        table.push(rep, e, format!("{name}/sync_null_median"), quantile(&null, 0.5));
        sync[k] = observed;
        if kept.is_none() {
            kept = Some((actors.clone(), post.trace));
        }
    }
    let (actors, trace) = kept.expect("two ensembles");
    Ok(DegreeReplicate {
        table,
        improvement,
        sync,
        actors,
        trace,
    })
}

#[allow(clippy::too_many_arguments)]
fn train_ensemble(
    spec: &FluDegreeSpec,
    env: &mut FluEnv,
    actors: &mut [MlpParams],
    critic_seed: u64,
    train_seed: u64,
    rep: usize,
    name: &str,
    table: &mut MetricsTable,
) -> HarnessResult<()> {
    let train: &TrainConfig = &spec.train;
    let n = actors.len();
    let mut seeds = RngStream::new(train_seed, "train");
    if train.algorithm == Algorithm::Mac {
        let mut critic = CentralCritic::new(n, FLU_OBS_DIM, 2, &train.hidden, true, &mut RngStream::new(critic_seed, "critic"))?;
        for e in 0..train.epochs {
            let mut pa: Vec<PolicyActor> = actors.iter().cloned().map(PolicyActor::new).collect();
            let (tr, bufs) = collect_episode(env, &mut pa, spec.episode_seasons, seeds.next_seed(), true)?;
            table.push(rep, e, format!("{name}/train_reward"), mean(&tr.mean_rewards()));
            let st = mac_train_step(actors, &mut critic, &bufs, train)?;
            table.push(rep, e, format!("{name}/central_loss"), st.central_loss);
        }
    } else {
        let mut rng = RngStream::new(critic_seed, "critic");
        let mut learners: Vec<Learner> = actors
            .iter()
            .map(|a| -> HarnessResult<Learner> {
                let mut l = Learner::new(FLU_OBS_DIM, 2, train, &mut rng)?;
                l.actor = a.clone();
                Ok(l)
            })
            .collect::<HarnessResult<_>>()?;
        for e in 0..train.epochs {
            let mut pa: Vec<PolicyActor> = learners.iter().map(Learner::policy).collect();
            let (tr, bufs) = collect_episode(env, &mut pa, spec.episode_seasons, seeds.next_seed(), false)?;
            table.push(rep, e, format!("{name}/train_reward"), mean(&tr.mean_rewards()));
            for (l, b) in learners.iter_mut().zip(&bufs) {
                l.update(b, train)?;
            }
        }
        for (a, l) in actors.iter_mut().zip(learners) {
            *a = l.actor;
        }
    }
    Ok(())
}
