//! One test per acceptance criterion. Each prints a single
//! `criterion N: PASS|FAIL ...` line before asserting.
//!
//! Criteria 4, 5, 6 and the trained half of 7 train agents for hours on one
//! core and are `#[ignore]`d; run them with
//!
//! ```text
//! PIDROP_ACCEPTANCE_DIR=acceptance_runs cargo test --release --test acceptance -- --ignored --nocapture
//! ```
//!
//! Runs left in `PIDROP_ACCEPTANCE_DIR` are reused when their config
//! snapshot matches, so 5, 6 and 7 share training.

mod common;

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pidrop::agent::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, AgentVariant, ForwardCtx, NetworkDims, VariantParams,
    VariantTag,
};
use pidrop::env::{GridLayout, LayoutConfig, ObsKind, STEP_REWARD};
use pidrop::eval::{
    class_weights, confusion_outputs, evaluate_policy, train_linear_probe, ActivationDataset, ActivationConfig,
    CollectionMode, ProbeConfig, ShortestPathPolicy,
};
use pidrop::experiment::{late_mean_return, mean_se, run_seeds, ExperimentConfig, CONFIG_SNAPSHOT};
use pidrop::nn::Parameterized;
use pidrop::stochastic::{apply_pi_dropout, ib_penalty, sample_noise, Mode, VarianceField};
use pidrop::trainer::{checkpoint_name, read_jsonl, train_run, EvalRecord, RunSpec, TrainConfig, EVAL_FILE};

fn report(n: u32, pass: bool, detail: &str) {
    println!("criterion {n}: {} {detail}", if pass { "PASS" } else { "FAIL" });
}

#[test]
fn criterion_1_environment_oracle() {
    let layout = common::layout();
    let dist = common::bfs_distances(&layout, layout.goal_cell);
    let rep = evaluate_policy(&layout, &mut ShortestPathPolicy).unwrap();
    let mut bad = Vec::new();
    for o in &rep.per_start {
        let d = dist[o.start.row * layout.width + o.start.col].expect("start reachable");
        let want = 10.0 + STEP_REWARD * d as f64;
        if o.steps != d || !o.reached_goal || (o.ret - want).abs() > 1e-9 {
            bad.push(format!("{}: {} steps, return {} (d = {d})", o.start, o.steps, o.ret));
        }
    }
    let pass = rep.per_start.len() == 72 && bad.is_empty();
    report(1, pass, &format!("{} starts, {} mismatches", rep.per_start.len(), bad.len()));
    assert!(pass, "{bad:?}");
}

#[test]
fn criterion_2_layer_mathematics() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    // Evaluation mode is the identity, bit for bit.
    let z: Vec<f64> = (0..257).map(|_| rng.random_range(-5.0..5.0)).collect();
    let alpha = VarianceField::from_values((0..257).map(|_| rng.random_range(0.01..1.0)).collect()).unwrap();
    let (out, noise) = apply_pi_dropout(&z, &alpha, Mode::Eval, &mut rng).unwrap();
    let identity = noise.is_none() && out.iter().zip(&z).all(|(a, b)| a.to_bits() == b.to_bits());

    let pen = ib_penalty(&VarianceField::from_values(vec![(-1.0f64).exp(); 7]).unwrap()).unwrap().value;
    let pen_ok = (pen - 1.0).abs() <= 1e-12;

    let half = VarianceField::from_values(vec![0.5; 1_000_000]).unwrap();
    let draws = sample_noise(&half, &mut ChaCha8Rng::seed_from_u64(20));
    let mc = draws.epsilon.iter().sum::<f64>() / draws.epsilon.len() as f64;
    let mc_ok = (mc / 0.125f64.exp() - 1.0).abs() < 0.01;

    // Full network, every variant, every weight.
    let teacher = common::tiny(VariantTag::Oracle, 99);
    let mut worst = (0.0f64, String::new());
    let mut checked = 0;
    for tag in VariantTag::ALL {
        let params = VariantParams {
            beta: 0.3,
            naive_anneal_episodes: 10,
            ..VariantParams::default()
        };
        let online = common::net(AgentVariant::standard(tag), common::tiny_dims(), params, 5);
        let target = common::net(AgentVariant::standard(tag), common::tiny_dims(), params, 6);
        let buffer = common::random_buffer(&online, 6, 11);
        let batch = common::batch_for(&online, &buffer, 3, 7, 12);
        let t = (tag == VariantTag::Dis).then_some(&teacher);
        // Episode 5 of 10 puts ND's mask halfway.
        let r = common::fd_check(&online, &target, t, &batch, common::settings(Mode::Train, 5), 13, &[1e-4, 1e-6], 1e-6);
        checked += r.checked;
        if r.max_rel > worst.0 {
            worst = (r.max_rel, format!("{tag}: {}", r.worst));
        }
    }
    let fd_ok = worst.0 < 1e-4;
    let pass = identity && pen_ok && mc_ok && fd_ok;
    report(
        2,
        pass,
        &format!(
            "eval identity {identity}, penalty(1/e) = {pen}, MC mean / e^0.125 = {:.5}, \
             {checked} weights max FD rel err {:.2e}",
            mc / 0.125f64.exp(),
            worst.0
        ),
    );
    assert!(pass, "worst FD: {}", worst.1);
}

#[test]
fn criterion_3_eval_privilege_blindness() {
    let layout = common::layout();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut all = true;
    for tag in VariantTag::ALL {
        let net = common::net(AgentVariant::standard(tag), NetworkDims::default(), VariantParams::default(), 30);
        let mut fuzzed = net.clone();
        for p in fuzzed.branch_params_mut() {
            for v in &mut p.value {
                *v = rng.random_range(-10.0..10.0);
            }
        }
        let pi_len = net.pi_len().unwrap_or(layout.obs_len(ObsKind::Fs));
        let mut same = true;
        for start in layout.enumerate_start_positions().iter().step_by(7) {
            let x = layout.observe(*start, net.variant.x_kind).unwrap();
            let junk: Vec<f64> = (0..pi_len).map(|_| rng.random_range(-100.0..100.0)).collect();
            let h: Vec<f64> = (0..net.hidden_size()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut r1 = ChaCha8Rng::seed_from_u64(1);
            let mut r2 = ChaCha8Rng::seed_from_u64(2);
            let a = net.forward(&x.data, None, &h, &mut ForwardCtx::new(Mode::Eval, 0, &mut r1)).unwrap();
            let b = fuzzed
                .forward(&x.data, Some(&junk), &h, &mut ForwardCtx::new(Mode::Eval, 0, &mut r2))
                .unwrap();
            same &= a.q.iter().zip(&b.q).all(|(p, q)| p.to_bits() == q.to_bits());
            same &= a.h_next.iter().zip(&b.h_next).all(|(p, q)| p.to_bits() == q.to_bits());
        }
        println!("  {}: {}", net.variant.label(), if same { "bit-identical" } else { "DIFFERS" });
        all &= same;
    }
    report(3, all, "eval-mode Q under fuzzed x* and branch weights, all variants");
    assert!(all);
}

fn cached_run(root: &Path, variant: AgentVariant, seed: u64, episodes: usize) -> (Vec<EvalRecord>, PathBuf) {
    let mut cfg = ExperimentConfig {
        variant: variant.tag,
        x: Some(variant.x_kind),
        pi: variant.pi_kind,
        seeds: vec![seed],
        out: root.to_path_buf(),
        ..ExperimentConfig::default()
    };
    cfg.train.total_episodes = episodes;
    let cfg = cfg.resolved().unwrap();
    let dir = cfg.run_dir(seed).unwrap();
    let evals = |d: &Path| read_jsonl::<EvalRecord>(&d.join(EVAL_FILE)).ok();
    let reusable = ExperimentConfig::load(&dir.join(CONFIG_SNAPSHOT)).is_ok_and(|c| c == cfg)
        && evals(&dir).is_some_and(|e| e.last().is_some_and(|r| r.episode == episodes));
    if reusable {
        println!("  reusing {}", dir.display());
    } else {
        run_seeds(&cfg, false).unwrap();
    }
    (evals(&dir).unwrap(), dir.join(checkpoint_name(episodes)))
}

#[test]
#[ignore = "about an hour per seed on one core"]
fn criterion_4_oracle_learnability() {
    let (root, _tmp) = common::acceptance_root();
    let layout = common::layout();
    let dist = common::bfs_distances(&layout, layout.goal_cell);
    let starts = layout.enumerate_start_positions();
    let optimal = starts
        .iter()
        .map(|s| 10.0 + STEP_REWARD * dist[s.row * layout.width + s.col].unwrap() as f64)
        .sum::<f64>()
        / starts.len() as f64;
    let mut pass = true;
    let mut lines = Vec::new();
    for seed in [0, 1] {
        let (evals, _) = cached_run(&root, AgentVariant::standard(VariantTag::Oracle), seed, 3000);
        let last = evals.last().unwrap();
        let ok = (optimal - last.mean_return) <= 1.0 && last.success_rate == 1.0;
        pass &= ok;
        lines.push(format!(
            "seed {seed}: mean return {:.3} (optimal {optimal:.3}), success {:.3}",
            last.mean_return, last.success_rate
        ));
    }
    report(4, pass, &lines.join("; "));
    assert!(pass);
}

struct Battery {
    label: String,
    late: Vec<f64>,
    left_success: Vec<f64>,
    evals: Vec<Vec<EvalRecord>>,
}

fn battery(root: &Path, variant: AgentVariant, seeds: &[u64], episodes: usize, late_after: usize) -> Battery {
    let layout = common::layout();
    let mut b = Battery {
        label: variant.label(),
        late: Vec::new(),
        left_success: Vec::new(),
        evals: Vec::new(),
    };
    for &seed in seeds {
        let (evals, _) = cached_run(root, variant, seed, episodes);
        b.late.push(late_mean_return(&evals, late_after).unwrap());
        let last = evals.last().unwrap();
        let left: Vec<_> = last.per_start.iter().filter(|o| layout.room_of(o.start) == Some(0)).collect();
        b.left_success.push(left.iter().filter(|o| o.reached_goal).count() as f64 / left.len() as f64);
        b.evals.push(evals);
    }
    b
}

fn pooled_se(a: &[f64], b: &[f64]) -> f64 {
    let (_, sa) = mean_se(a);
    let (_, sb) = mean_se(b);
    (sa * sa + sb * sb).sqrt()
}

const SEEDS: [u64; 3] = [0, 1, 2];
const LONG: usize = 10_000;

fn variant(tag: VariantTag, x: ObsKind, pi: Option<ObsKind>) -> AgentVariant {
    AgentVariant::new(tag, x, pi).unwrap()
}

#[test]
#[ignore = "many hours on one core"]
fn criterion_5_method_ordering() {
    let (root, _tmp) = common::acceptance_root();
    let late_after = LONG - 2000;
    let pid = battery(&root, variant(VariantTag::PiD, ObsKind::Ego5, Some(ObsKind::Fs)), &SEEDS, LONG, late_after);
    let drqn = battery(&root, variant(VariantTag::Drqn, ObsKind::Ego5, None), &SEEDS, LONG, late_after);
    let id = battery(&root, variant(VariantTag::ID, ObsKind::Ego5, None), &SEEDS, LONG, late_after);
    let m = |v: &[f64]| mean_se(v).0;
    let se_pd = pooled_se(&pid.late, &drqn.late);
    let se_id = pooled_se(&id.late, &drqn.late);
    let above = m(&pid.late) - m(&drqn.late) > se_pd;
    let level = (m(&id.late) - m(&drqn.late)).abs() <= se_id;
    let left = pid.left_success.iter().zip(&drqn.left_success).all(|(p, d)| p >= d);
    let pass = above && level && left;
    report(
        5,
        pass,
        &format!(
            "{} {:.3} vs {} {:.3} (pooled SE {se_pd:.3}); {} {:.3} (pooled SE {se_id:.3}); \
             left-room success {:?} vs {:?}",
            pid.label,
            m(&pid.late),
            drqn.label,
            m(&drqn.late),
            id.label,
            m(&id.late),
            pid.left_success,
            drqn.left_success
        ),
    );
    assert!(pass);
}

/// First eval checkpoint at which every start reaches the goal.
fn first_solved(evals: &[EvalRecord]) -> Option<usize> {
    evals.iter().find(|e| e.success_rate == 1.0).map(|e| e.episode)
}

#[test]
#[ignore = "many hours on one core"]
fn criterion_6_subgoal_generality() {
    let (root, _tmp) = common::acceptance_root();
    let sg = battery(&root, variant(VariantTag::PiD, ObsKind::Ego5, Some(ObsKind::Sg)), &SEEDS, LONG, LONG - 2000);
    let fs = battery(&root, variant(VariantTag::PiD, ObsKind::Ego5, Some(ObsKind::Fs)), &SEEDS, LONG, LONG - 2000);
    let mut wins = 0;
    let mut lines = Vec::new();
    for (i, seed) in SEEDS.iter().enumerate() {
        let a = first_solved(&sg.evals[i]);
        let b = first_solved(&fs.evals[i]);
        let no_later = match (a, b) {
            (Some(a), Some(b)) => a <= b,
            (Some(_), None) => true,
            (None, _) => false,
        };
        wins += no_later as usize;
        lines.push(format!("seed {seed}: SG {a:?} FS {b:?}"));
    }
    let pass = 2 * wins > SEEDS.len();
    let unanimous = wins == 0 || wins == SEEDS.len();
    let note = if unanimous { "" } else { " (seeds disagree, report only)" };
    report(6, pass, &format!("{}{note}", lines.join("; ")));
    if unanimous {
        assert!(pass);
    }
}

#[test]
fn criterion_7_probe_pipeline() {
    let layout = common::layout();
    let w = class_weights(&[10, 30]);
    let weights_ok = w == vec![40.0 / 20.0, 40.0 / 60.0];

    // One-hot activations: every visit of floor cell k is the unit vector e_k.
    let k = layout.floor_cells().len();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for c in 0..k {
        for _ in 0..rng.random_range(3..9) {
            let mut row = vec![0.0; k];
            row[c] = 1.0;
            features.extend(row);
            labels.push(c as u32);
        }
    }
    let data = ActivationDataset::new(CollectionMode::TestTime, k, features, labels).unwrap();
    let probe = train_linear_probe(&data, k, &ProbeConfig::default()).unwrap();
    let acc_ok = probe.weighted_accuracy == 1.0 && probe.accuracy == 1.0;
    let conf = confusion_outputs(&probe.model, &data, &layout).unwrap();
    let rows_ok = (0..k).all(|t| (conf.matrix[t * k..(t + 1) * k].iter().sum::<f64>() - 1.0).abs() <= 1e-9);
    let r = conf.rooms;
    let room_ok = (0..r).all(|i| (conf.room_matrix[i * r..(i + 1) * r].iter().sum::<f64>() - 1.0).abs() <= 1e-9)
        && conf.room_matrix.iter().all(|v| *v >= 0.0);
    let pass = weights_ok && acc_ok && rows_ok && room_ok;
    report(
        7,
        pass,
        &format!(
            "weights {w:?}, one-hot weighted accuracy {}, confusion rows stochastic {rows_ok}, \
             room matrix stochastic {room_ok}",
            probe.weighted_accuracy
        ),
    );
    assert!(pass);
}

#[test]
#[ignore = "needs the trained agents of criterion 5"]
fn criterion_7_trained_probe_ordering() {
    let (root, _tmp) = common::acceptance_root();
    let layout = common::layout();
    let mut acc = Vec::new();
    for v in [
        variant(VariantTag::Drqn, ObsKind::Ego5, None),
        variant(VariantTag::Aux, ObsKind::Ego5, None),
        variant(VariantTag::PiD, ObsKind::Ego5, Some(ObsKind::Fs)),
    ] {
        let mut per_seed = Vec::new();
        for &seed in &SEEDS {
            let (_, ckpt) = cached_run(&root, v, seed, LONG);
            let net = load_checkpoint(&ckpt).unwrap().network;
            let cfg = ActivationConfig::default();
            let data = pidrop::eval::collect_activations(&net, &layout, CollectionMode::TestTime, &cfg).unwrap();
            let probe = train_linear_probe(&data, layout.floor_cells().len(), &ProbeConfig::default()).unwrap();
            per_seed.push(probe.weighted_accuracy);
        }
        acc.push((v.label(), mean_se(&per_seed).0));
    }
    let pass = acc[1].1 > acc[0].1 && acc[1].1 > acc[2].1;
    report(
        7,
        pass,
        &format!("trained probe weighted accuracy {acc:?}"),
    );
    assert!(pass);
}

#[test]
fn criterion_8_determinism() {
    let layout_cfg = LayoutConfig::default();
    let train = TrainConfig {
        total_episodes: 100,
        eval_every: 50,
        ..TrainConfig::default()
    };
    let run = || {
        train_run(
            RunSpec {
                layout: &layout_cfg,
                train: &train,
                variant: AgentVariant::standard(VariantTag::PiD),
                dims: NetworkDims::default(),
                seed: 8,
                teacher: None,
                out_dir: None,
            },
            None,
        )
        .unwrap()
    };
    let a = run();
    let b = run();
    let metrics_same = serde_json::to_string(&a.metrics.episodes).unwrap()
        == serde_json::to_string(&b.metrics.episodes).unwrap()
        && a.metrics.episodes.len() == 100;

    let layout = GridLayout::build(&layout_cfg).unwrap();
    let bytes = encode_checkpoint(&a.network, &layout_cfg, 100).unwrap();
    let restored = decode_checkpoint(&bytes).unwrap().network;
    let mut same_forward = restored.params().iter().zip(a.network.params()).all(|(p, q)| p.value == q.value);
    for start in layout.enumerate_start_positions() {
        let x = layout.observe(*start, ObsKind::Ego5).unwrap();
        let h = a.network.initial_hidden(1);
        let mut r = ChaCha8Rng::seed_from_u64(0);
        let p = a.network.forward(&x.data, None, &h, &mut ForwardCtx::new(Mode::Eval, 0, &mut r)).unwrap();
        let q = restored.forward(&x.data, None, &h, &mut ForwardCtx::new(Mode::Eval, 0, &mut r)).unwrap();
        same_forward &= p.q.iter().zip(&q.q).all(|(u, v)| u.to_bits() == v.to_bits());
    }
    let pass = metrics_same && same_forward;
    report(
        8,
        pass,
        &format!("first 100 episodes identical {metrics_same}, checkpoint round trip bit-identical {same_forward}"),
    );
    assert!(pass);
}
