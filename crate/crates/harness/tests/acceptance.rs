//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Pass criterion numbers as arguments to run a subset, e.g.
//! `cargo test -p gsc-harness --test acceptance -- 1 9`.

#[path = "../../core/tests/support/mod.rs"]
mod support;

#[path = "../../nn/tests/common/mod.rs"]
mod nn_common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::Instant;

use gsc_core::environment::{Environment, Scenario, ScenarioConfig};
use gsc_core::replay::collate;
use gsc_core::simulator::{post_process, reward, reward_from_counts, ActionTensor, Simulator};
use gsc_core::topology::{ActionMask, LinkSpec, NetworkTopology, NodeSpec};
use gsc_core::traffic::{ArrivalProcess, ArrivalStream, TrafficConfig};
use gsc_harness::{
    evaluate, evaluate_or_record, new_agent, train, AgentKind, EvalProtocol, GreedyPolicy, HarnessError, Policy,
    RandomPolicy, TrainConfig,
};
use gsc_nn::agent::{AgentError, DdpgAgent, Hyperparams};
use gsc_nn::embedder::{Embedder, EmbedderConfig, GatLayer, GraphTensors};
use gsc_nn::tape::Tape;
use gsc_nn::{gradcheck, ParameterSet};
use nn_common::oracle::dense_gat;
use nn_common::{permute_observation, random_observation, random_permutation};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::stepped::{random_scenario, run_stepped, SmallScenario};

type Outcome = Result<String, String>;

/// Seeds averaged by the two learning experiments.
const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];
/// Gradient steps per episode in the learning experiments. One update costs
/// about 0.3 s on a single core at batch 100, which rules out the default of
/// 64 within the runtime target. The unseen-topology run trades episodes for
/// updates: 900 updates either way, fewer simulated windows.
const SEEN_ETA: usize = 1;
const GEN4_ETA: usize = 6;
const GEN4_EPISODES: usize = 150;

fn scenarios() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/scenarios")
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn random_raw<R: Rng>(rng: &mut R, mask: &ActionMask) -> ActionTensor {
    let mut raw = ActionTensor::zeros(mask.chain_length(), mask.v_max());
    let style = rng.random_range(0..4);
    let valid: Vec<usize> = mask.valid_indices().collect();
    for &f in &valid {
        raw.as_mut_slice()[f] = match style {
            0 => rng.random::<f64>(),
            // everything below the cutoff: the argmax fallback
            1 => rng.random_range(1e-6..0.1),
            // a few tall entries over a floor of small ones
            2 => {
                if rng.random_bool(0.1) {
                    rng.random_range(0.5..=1.0)
                } else {
                    rng.random_range(1e-6..0.12)
                }
            }
            // clipped exploration output: some exact zeros and ones
            _ => (rng.random::<f64>() + rng.random_range(-0.3..0.3)).clamp(0.0, 1.0),
        };
    }
    // a row needs some mass to be a distribution; see `zero_row_convention`
    let n = mask.num_nodes();
    let vmax = mask.v_max();
    for i in 0..mask.chain_length() {
        for j in 0..n {
            let row = &mut raw.as_mut_slice()[(i * vmax + j) * vmax..(i * vmax + j) * vmax + n];
            if row.iter().all(|&v| v == 0.0) {
                row[rng.random_range(0..n)] = rng.random_range(1e-6..=1.0);
            }
        }
    }
    raw
}

fn c1_eq1_enforcement() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut rows = 0u64;
    for a in 0..10_000 {
        let n = rng.random_range(1..=64);
        let chain = 3;
        let mask = ActionMask::new(n, chain, 64);
        let raw = random_raw(&mut rng, &mask);
        let x = post_process(&raw, &mask, 0.1).map_err(|e| e.to_string())?;
        let dense = x.to_dense();
        for i in 0..chain {
            for j in 0..64 {
                let row = &dense[(i * 64 + j) * 64..(i * 64 + j + 1) * 64];
                if j >= n {
                    ensure(row.iter().all(|&v| v == 0.0), || format!("action {a}: row ({i},{j}) outside the mask"))?;
                    continue;
                }
                rows += 1;
                let sum: f64 = row.iter().sum();
                ensure((sum - 1.0).abs() <= 1e-6, || format!("action {a}: row ({i},{j}) sums to {sum}"))?;
                ensure(row.iter().all(|&v| v == 0.0 || v >= 0.1), || format!("action {a}: row ({i},{j}) has a share < 0.1"))?;
                ensure(row[n..].iter().all(|&v| v == 0.0), || format!("action {a}: row ({i},{j}) leaves the mask"))?;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 30.0, || format!("took {secs:.1} s"))?;
    Ok(format!("10000 actions, {rows} rows checked in {secs:.1} s"))
}

fn line_topology(caps: &[f64]) -> NetworkTopology {
    let nodes = caps
        .iter()
        .enumerate()
        .map(|(id, &capacity)| NodeSpec {
            id,
            capacity,
            is_ingress: id == 0,
        })
        .collect();
    let links = (1..caps.len())
        .map(|b| LinkSpec {
            a: b - 1,
            b,
            bandwidth: 3.0,
            delay: 2.0,
        })
        .collect();
    NetworkTopology::new("line", nodes, links).expect("valid line")
}

/// Random-policy windows on the bundled scenarios and on each traffic model.
fn simulated_windows() -> Result<(u64, Vec<f64>), String> {
    let mut list = Vec::new();
    for name in ["abilene_fixed.toml", "gen4_train.toml", "gen4_eval.toml"] {
        list.push(ScenarioConfig::load(scenarios().join(name)).map_err(|e| e.to_string())?);
    }
    for process in [
        ArrivalProcess::Poisson { mean_interval: 1.5 },
        ArrivalProcess::mmpp_default(),
        ArrivalProcess::Fixed { interval: 0.5 },
    ] {
        let mut s = Scenario::single("line", line_topology(&[2.0, 1.0, 3.0, 0.0]), TrafficConfig::new(process));
        s.episode_length = 50;
        list.push(s);
    }
    let mut windows = 0;
    let mut rewards = Vec::new();
    for (si, sc) in list.iter().enumerate() {
        let mut env = Environment::new(sc.clone(), 40 + si as u64).map_err(|e| e.to_string())?;
        let mut policy = RandomPolicy::for_scenario(sc);
        let mut rng = ChaCha8Rng::seed_from_u64(si as u64);
        let mut obs = env.reset().map_err(|e| e.to_string())?;
        for _ in 0..300 {
            let a = policy.act(&obs, &mut rng).map_err(|e| e.to_string())?;
            let out = env.step(&a).map_err(|e| e.to_string())?;
            ensure(out.snapshot.is_conserving(), || format!("{}: flow conservation broken: {:?}", sc.name, out.snapshot))?;
            ensure(out.reward == reward(&out.snapshot), || "step reward differs from the snapshot reward".into())?;
            rewards.push(out.reward);
            windows += 1;
            obs = if out.done { env.reset().map_err(|e| e.to_string())? } else { out.observation };
        }
    }
    Ok((windows, rewards))
}

fn c2_reward() -> Outcome {
    ensure(reward_from_counts(10, 0) == 1.0, || "(10, 0) is not 1".into())?;
    ensure((reward_from_counts(30, 10) - 0.5).abs() < 1e-15, || "(30, 10) is not 0.5".into())?;
    ensure(reward_from_counts(0, 0) == 0.0, || "(0, 0) is not 0".into())?;
    let (windows, rewards) = simulated_windows()?;
    ensure(rewards.iter().all(|r| (-1.0..=1.0).contains(r)), || "reward out of [-1, 1]".into())?;
    let lo = rewards.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = rewards.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(format!("{windows} windows, reward range [{lo:.3}, {hi:.3}]"))
}

fn c3_gat_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut worst, mut worst_sum) = (0.0f64, 0.0f64);
    for i in 0..200 {
        let n = rng.random_range(1..=5);
        let obs = random_observation(&mut rng, n, 0.5, 3, 8);
        let mut params = ParameterSet::new(1000 + i);
        let layer = GatLayer::new(&mut params, "gat", 3, 6, 2);
        let g = GraphTensors::from_observation(&obs);
        let tape = Tape::new();
        let p = params.bind(&tape, false);
        let x = tape.constant(g.node_features.clone());
        let e = tape.constant(g.edge_features.clone());
        let (alpha, out) = layer.forward_with_attention(&tape, &p, x, e, &g);
        let (alpha_ref, out_ref) = dense_gat(&params, &layer, &g.node_features, &g);
        worst = worst.max(tape.value(out).max_abs_diff(&out_ref));
        worst = worst.max(max_diff(tape.value(alpha).as_slice(), &alpha_ref));
        let mut sums = vec![0.0; g.num_nodes()];
        for (k, &a) in tape.value(alpha).as_slice().iter().enumerate() {
            sums[g.dst[k]] += a;
        }
        worst_sum = sums.iter().map(|s| (s - 1.0).abs()).fold(worst_sum, f64::max);
    }
    ensure(worst <= 1e-10, || format!("max deviation from the dense oracle {worst:e}"))?;
    ensure(worst_sum <= 1e-9, || format!("attention sums off by {worst_sum:e}"))?;
    Ok(format!("200 graphs, oracle deviation {worst:.1e}, attention sum error {worst_sum:.1e}"))
}

fn c4_permutation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut params = ParameterSet::new(44);
    let emb = Embedder::new(EmbedderConfig::default(), &mut params, "e");
    let (mut pooled_dev, mut node_dev) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let n = rng.random_range(2..=20);
        let obs = random_observation(&mut rng, n, 0.3, 3, 32);
        let perm = random_permutation(&mut rng, n);
        let (nodes, pooled) = emb.embed(&params, &GraphTensors::from_observation(&obs));
        let (pnodes, ppooled) = emb.embed(&params, &GraphTensors::from_observation(&permute_observation(&obs, &perm)));
        pooled_dev = pooled_dev.max(pooled.max_abs_diff(&ppooled));
        for (v, &pv) in perm.iter().enumerate() {
            node_dev = node_dev.max(max_diff(nodes.row(v), pnodes.row(pv)));
        }
    }
    ensure(pooled_dev <= 1e-9, || format!("pooled embedding moved by {pooled_dev:e}"))?;
    ensure(node_dev <= 1e-9, || format!("node embeddings not equivariant: {node_dev:e}"))?;
    Ok(format!("100 permutations, pooled {pooled_dev:.1e}, nodes {node_dev:.1e}"))
}

fn c5_gradcheck() -> Outcome {
    ensure(gradcheck::SUITE_STEP == 1e-5, || "finite difference step is not 1e-5".into())?;
    let mut parts = Vec::new();
    let mut failed = Vec::new();
    for (name, report) in gradcheck::suite() {
        parts.push(format!("{name} {:.1e}", report.max_rel_error));
        if !report.passes(1e-4) {
            failed.push(format!("{name}: {report:?}"));
        }
    }
    ensure(failed.is_empty(), || failed.join("; "))?;
    Ok(parts.join(", "))
}

fn c6_batching() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut params = ParameterSet::new(66);
    let emb = Embedder::new(EmbedderConfig::default(), &mut params, "e");
    let graphs: Vec<_> = (0..8)
        .map(|_| {
            let n = rng.random_range(1..=16);
            random_observation(&mut rng, n, 0.3, 3, 16)
        })
        .collect();
    let batch = collate(&graphs);
    let (nodes, pooled) = emb.embed(&params, &GraphTensors::from_batch(&batch));
    let mut worst = 0.0f64;
    for (gi, obs) in graphs.iter().enumerate() {
        let (n1, p1) = emb.embed(&params, &GraphTensors::from_observation(obs));
        let off = batch.node_offsets[gi];
        for v in 0..obs.num_nodes() {
            worst = worst.max(max_diff(n1.row(v), nodes.row(off + v)));
        }
        worst = worst.max(max_diff(p1.row(0), pooled.row(gi)));
    }
    ensure(worst <= 1e-9, || format!("batched passes differ by {worst:e}"))?;
    Ok(format!("8 graphs, max deviation {worst:.1e}"))
}

fn engine_counts(sc: &SmallScenario, windows: usize) -> Result<(u64, u64), String> {
    let mut sim = Simulator::new(sc.topology.clone(), sc.chain.clone(), sc.seed).with_audit();
    let mp = sc.horizon / windows as f64;
    let (mut succ, mut drop) = (0, 0);
    for w in 0..windows {
        let (t0, t1) = (w as f64 * mp, (w + 1) as f64 * mp);
        let flows = sc
            .flows
            .iter()
            .filter(|f| f.arrival_time >= t0 && f.arrival_time < t1)
            .cloned()
            .collect();
        let snap = sim.run_window(&sc.x, flows, mp).map_err(|e| e.to_string())?;
        ensure(snap.is_conserving(), || format!("conservation broken: {snap:?}"))?;
        succ += snap.succ_count;
        drop += snap.drop_count;
    }
    ensure(sim.audit_violations() == 0, || "reservation audit failed".into())?;
    Ok((succ, drop))
}

fn c7_simulator_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut succ, mut drop) = (0, 0);
    for case in 0..50 {
        let sc = random_scenario(&mut rng, 50.0);
        let expected = run_stepped(&sc);
        for windows in [1, 5] {
            let got = engine_counts(&sc, windows)?;
            ensure(got == expected, || format!("case {case} ({windows} windows): engine {got:?}, oracle {expected:?}"))?;
        }
        succ += expected.0;
        drop += expected.1;
    }
    let (windows, _) = simulated_windows()?;
    Ok(format!(
        "50 scenarios agree ({succ} succ, {drop} drop); conservation held on 500 oracle windows and {windows} environment windows"
    ))
}

fn c8_traffic() -> Outcome {
    let mut stream = ArrivalStream::new(&ArrivalProcess::Poisson { mean_interval: 10.0 }, 8).map_err(|e| e.to_string())?;
    let mut total = 0.0;
    for _ in 0..100_000 {
        total += stream.next_interarrival().map_err(|e| format!("{e:?}"))?;
    }
    let mean = total / 1e5;
    let poisson_err = (mean - 10.0).abs() / 10.0;
    ensure(poisson_err <= 0.02, || format!("Poisson mean interval {mean}"))?;

    let mmpp = ArrivalProcess::mmpp_default();
    let analytic = mmpp.stationary_rate().ok_or("MMPP has no stationary rate")?;
    let mut stream = ArrivalStream::new(&mmpp, 9).map_err(|e| e.to_string())?;
    let horizon = 2e6;
    let (mut t, mut count) = (0.0, 0u64);
    loop {
        t += stream.next_interarrival().map_err(|e| format!("{e:?}"))?;
        if t > horizon {
            break;
        }
        count += 1;
    }
    let rate = count as f64 / horizon;
    let mmpp_err = (rate - analytic).abs() / analytic;
    ensure(mmpp_err <= 0.05, || format!("MMPP rate {rate}, analytic {analytic}"))?;
    Ok(format!(
        "Poisson mean {mean:.4} ({:.2}%), MMPP rate {rate:.5} vs {analytic:.5} ({:.2}%)",
        100.0 * poisson_err,
        100.0 * mmpp_err
    ))
}

fn c9_soft_update() -> Outcome {
    let sc = Scenario::single(
        "line",
        line_topology(&[2.0, 1.0, 3.0]),
        TrafficConfig::new(ArrivalProcess::Fixed { interval: 5.0 }),
    );
    let mut checked = 0;
    for tau in [0.0, 1e-4, 0.5, 1.0] {
        let hp = Hyperparams { tau, ..Hyperparams::default() };
        let mut agent = new_agent(AgentKind::Gsc, &sc, hp, 9);
        // make the online sets differ from the targets
        let mut rng = ChaCha8Rng::seed_from_u64(90);
        for t in agent.actor_params_mut().tensors_mut().iter_mut() {
            t.as_mut_slice().iter_mut().for_each(|v| *v += rng.random_range(-0.5..0.5));
        }
        for t in agent.critic_params_mut().tensors_mut().iter_mut() {
            t.as_mut_slice().iter_mut().for_each(|v| *v += rng.random_range(-0.5..0.5));
        }
        let before = (agent.actor_target().clone(), agent.critic_target().clone());
        agent.soft_update().map_err(|e| e.to_string())?;
        let pairs = [
            (agent.actor_params(), &before.0, agent.actor_target()),
            (agent.critic_params(), &before.1, agent.critic_target()),
        ];
        for (online, old, new) in pairs {
            for ((o, t), n) in online.tensors().iter().zip(old.tensors()).zip(new.tensors()) {
                for ((&o, &t), &n) in o.as_slice().iter().zip(t.as_slice()).zip(n.as_slice()) {
                    ensure(n == tau * o + (1.0 - tau) * t, || format!("tau {tau}: {n} != {tau} * {o} + (1 - {tau}) * {t}"))?;
                    checked += 1;
                }
            }
        }
        if tau == 0.0 {
            ensure(agent.actor_target() == &before.0, || "tau 0 moved the target".into())?;
        }
        if tau == 1.0 {
            ensure(agent.actor_target().tensors() == agent.actor_params().tensors(), || "tau 1 did not copy".into())?;
        }
    }
    Ok(format!("{checked} scalars bit-exact for tau in {{0, 1e-4, 0.5, 1}}"))
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Trains one GSC agent per seed and evaluates each greedily.
fn trained_means(
    train_sc: &Scenario,
    eval_sc: &Scenario,
    episodes: usize,
    eta: usize,
    protocol: &EvalProtocol,
) -> Result<Vec<f64>, String> {
    let mut out = Vec::new();
    for &seed in &SEEDS {
        let start = Instant::now();
        let mut agent = new_agent(AgentKind::Gsc, train_sc, Hyperparams::default(), seed);
        let cfg = TrainConfig {
            episodes,
            warmup: 200,
            eta,
            seed,
        };
        let report = train(&mut agent, train_sc, &cfg, |_, _| {}).map_err(|e| e.to_string())?;
        let rec = evaluate(&mut GreedyPolicy::new("gsc", &agent), eval_sc, protocol).map_err(|e| e.to_string())?;
        let m = rec.mean.ok_or("evaluation produced no mean")?;
        println!(
            "INFO   seed {seed}: {} gradient steps, last training episode {:.3}, evaluation {m:.4} ({:.0} s)",
            report.gradient_steps,
            report.curve.last().copied().unwrap_or(f64::NAN),
            start.elapsed().as_secs_f64()
        );
        out.push(m);
    }
    Ok(out)
}

fn random_mean(sc: &Scenario, protocol: &EvalProtocol) -> Result<f64, String> {
    evaluate(&mut RandomPolicy::for_scenario(sc), sc, protocol)
        .map_err(|e| e.to_string())?
        .mean
        .ok_or_else(|| "no random mean".into())
}

fn c10_seen_learning() -> Outcome {
    let sc = ScenarioConfig::load(scenarios().join("abilene_fixed.toml")).map_err(|e| e.to_string())?;
    ensure(sc.episode_length == 200 && sc.monitoring_period == 100.0, || "scenario is not L = 200, MP = 100".into())?;
    ensure(sc.variants.len() == 1 && sc.variants[0].ingress_nodes().len() == 1, || "expected one ingress node".into())?;
    let protocol = EvalProtocol {
        seed: 1010,
        ..EvalProtocol::default()
    };
    let random = random_mean(&sc, &protocol)?;
    let trained = trained_means(&sc, &sc, 300, SEEN_ETA, &protocol)?;
    let gsc = mean(&trained);
    let margin = gsc - random;
    ensure(margin >= 0.2, || format!("GSC {gsc:.4} vs random {random:.4}: margin {margin:.4} < 0.2"))?;
    Ok(format!("GSC {gsc:.4} vs random {random:.4} over 5 seeds, margin {margin:.4}"))
}

fn c11_gen4() -> Outcome {
    let train_sc = ScenarioConfig::load(scenarios().join("gen4_train.toml")).map_err(|e| e.to_string())?;
    let eval_sc = ScenarioConfig::load(scenarios().join("gen4_eval.toml")).map_err(|e| e.to_string())?;
    let names = |s: &Scenario| {
        let mut v: Vec<String> = s.variants.iter().map(|t| t.name().to_string()).collect();
        v.dedup();
        v
    };
    println!("INFO   training topologies {:?}, evaluation topologies {:?}", names(&train_sc), names(&eval_sc));
    ensure(names(&eval_sc).iter().all(|n| !names(&train_sc).contains(n)), || "evaluation topology was seen in training".into())?;

    // the flattened baseline is sized for one topology and fails on the switch
    let claranet = train_sc.variants[0].name().to_string();
    let mut first = train_sc.clone();
    first.variants.retain(|t| t.name() == claranet);
    let mut flat = new_agent(AgentKind::Flat, &first, Hyperparams::default(), 0);
    let cfg = TrainConfig {
        episodes: 2,
        warmup: 200,
        eta: 1,
        seed: 0,
    };
    train(&mut flat, &first, &cfg, |_, _| {}).map_err(|e| e.to_string())?;
    let quick = EvalProtocol {
        repetitions: 1,
        windows: 1,
        seed: 0,
    };
    let rec = evaluate_or_record(&mut GreedyPolicy::new("flat-ddpg", &flat), &eval_sc, &quick).map_err(|e| e.to_string())?;
    ensure(rec.is_unsupported(), || format!("flat baseline ran on the unseen topology: {rec:?}"))?;
    let mut rotating = new_agent(AgentKind::Flat, &train_sc, Hyperparams::default(), 0);
    let rotation = train(&mut rotating, &train_sc, &TrainConfig { episodes: 20, ..cfg }, |_, _| {});
    ensure(
        matches!(rotation, Err(HarnessError::Agent(AgentError::UnsupportedCapability(_)))),
        || format!("flat baseline trained across the topology rotation: {:?}", rotation.map(|r| r.env_steps)),
    )?;
    println!("INFO   flat baseline: {}", rec.error.unwrap_or_default());

    let protocol = EvalProtocol {
        seed: 1111,
        ..EvalProtocol::default()
    };
    let random = random_mean(&eval_sc, &protocol)?;
    let trained = trained_means(&train_sc, &eval_sc, GEN4_EPISODES, GEN4_ETA, &protocol)?;
    let gsc = mean(&trained);
    let above = trained.iter().filter(|&&m| m > random).count();
    ensure(gsc > random, || format!("GSC {gsc:.4} is not above random {random:.4} ({above}/5 seeds above)"))?;
    Ok(format!("GSC {gsc:.4} vs random {random:.4} on the unseen topology, {above}/5 seeds above; flat baseline unsupported"))
}

fn c12_counters() -> Outcome {
    let mut sc = Scenario::single(
        "line",
        line_topology(&[3.0, 2.0, 4.0]),
        TrafficConfig::new(ArrivalProcess::Poisson { mean_interval: 6.0 }),
    );
    sc.episode_length = 5;
    let mut parts = Vec::new();
    for (warmup, eta, episodes) in [(0, 1, 4), (12, 3, 6), (25, 2, 5)] {
        let mut agent: DdpgAgent = new_agent(AgentKind::Gsc, &sc, Hyperparams::default(), 12);
        let cfg = TrainConfig {
            episodes,
            warmup,
            eta,
            seed: 12,
        };
        let r = train(&mut agent, &sc, &cfg, |_, _| {}).map_err(|e| e.to_string())?;
        let after = (1..=episodes).filter(|e| e * sc.episode_length >= warmup).count() as u64;
        ensure(r.episodes_after_warmup == after, || format!("W={warmup}: {} episodes after warm-up, expected {after}", r.episodes_after_warmup))?;
        ensure(r.gradient_steps == eta as u64 * after, || format!("W={warmup}: {} gradient steps", r.gradient_steps))?;
        ensure(r.target_updates == r.gradient_steps, || format!("W={warmup}: {} target updates", r.target_updates))?;
        ensure(agent.gradient_steps() == r.gradient_steps, || "agent counter disagrees with the report".into())?;
        parts.push(format!("(W={warmup}, eta={eta}, N_EP={episodes}) -> {} steps", r.gradient_steps));
    }
    Ok(parts.join(", "))
}

/// Rows without any positive raw mass are left empty, so their flows drop.
fn zero_row_convention() -> String {
    let mask = ActionMask::new(3, 3, 4);
    let x = post_process(&ActionTensor::zeros(3, 4), &mask, 0.1).expect("valid shape");
    let empty = x.to_dense().iter().all(|&v| v == 0.0);
    format!("an all-zero raw action stays all-zero after post-processing: {empty}")
}

fn main() {
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let criteria: [(usize, &str, fn() -> Outcome); 12] = [
        (1, "scheduling tensor constraints", c1_eq1_enforcement),
        (2, "reward bounds and convention", c2_reward),
        (3, "GATv2 dense oracle", c3_gat_oracle),
        (4, "permutation properties", c4_permutation),
        (5, "gradient checks", c5_gradcheck),
        (6, "batching equivalence", c6_batching),
        (7, "simulator oracle and conservation", c7_simulator_oracle),
        (8, "traffic statistics", c8_traffic),
        (9, "soft update exactness", c9_soft_update),
        (10, "learning on a seen scenario", c10_seen_learning),
        (11, "unseen topology", c11_gen4),
        (12, "training loop counters", c12_counters),
    ];
    let mut failures = 0;
    for (n, name, check) in criteria {
        if !only.is_empty() && !only.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS #{n} {name}: {detail} [{secs:.1} s]"),
            Err(detail) => {
                failures += 1;
                println!("FAIL #{n} {name}: {detail} [{secs:.1} s]");
            }
        }
    }
    if only.is_empty() || only.contains(&1) {
        println!("INFO   {}", zero_row_convention());
    }
    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
}
