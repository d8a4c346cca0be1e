mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use pidrop::agent::{AgentNetwork, ForwardCtx, VariantParams, VariantTag, AgentVariant};
use pidrop::env::LayoutConfig;
use pidrop::nn::Parameterized;
use pidrop::stochastic::Mode;
use pidrop::trainer::{
    td_loss, total_loss, train_run, LossSettings, Nets, RunSpec, TrainConfig, WindowBatch,
};

/// Mean squared TD error rebuilt one frame at a time: each window is run
/// step by step from a zero state by both networks, no batching involved.
fn stepwise_td(online: &AgentNetwork, target: &AgentNetwork, batch: &WindowBatch, burn: usize, gamma: f64) -> f64 {
    let n = batch.batch;
    let xl = batch.x_len;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut sum = 0.0;
    let mut count = 0;
    for b in 0..n {
        let frame = |s: usize| &batch.x[(s * n + b) * xl..(s * n + b + 1) * xl];
        let mut ho = online.initial_hidden(1);
        let mut ht = target.initial_hidden(1);
        let mut q_online = Vec::new();
        let mut q_target = Vec::new();
        for s in 0..=batch.steps {
            let t = target.forward(frame(s), None, &ht, &mut ForwardCtx::new(Mode::Eval, 0, &mut rng)).unwrap();
            q_target.push(t.q);
            ht = t.h_next;
            if s < batch.steps {
                let o = online.forward(frame(s), None, &ho, &mut ForwardCtx::new(Mode::Eval, 0, &mut rng)).unwrap();
                q_online.push(o.q);
                ho = o.h_next;
            }
        }
        for s in burn..batch.steps {
            let f = s * n + b;
            if !batch.valid[f] {
                continue;
            }
            let next_max = q_target[s + 1].iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let y = if batch.terminated[f] {
                batch.rewards[f]
            } else {
                batch.rewards[f] + gamma * next_max
            };
            sum += (q_online[s][batch.actions[f]] - y).powi(2);
            count += 1;
        }
    }
    sum / count as f64
}

#[test]
fn td_loss_matches_a_stepwise_recomputation() {
    let online = common::tiny(VariantTag::Drqn, 3);
    let target = common::tiny(VariantTag::Drqn, 4);
    let buffer = common::random_buffer(&online, 16, 7);
    let batch = common::batch_for(&online, &buffer, 6, 20, 8);
    for burn in [0, 4] {
        let s = LossSettings {
            burn_in: burn,
            ..common::settings(Mode::Eval, 0)
        };
        let got = td_loss((&online, &target, None), &batch, s, &mut ChaCha8Rng::seed_from_u64(1))
            .unwrap()
            .unwrap();
        let want = stepwise_td(&online, &target, &batch, burn, 0.99);
        assert!((got - want).abs() <= 1e-9 * want.abs().max(1.0), "burn {burn}: {got} vs {want}");
    }
}

fn components(tag: VariantTag, params: VariantParams, mode: Mode) -> pidrop::trainer::LossComponents {
    let online = common::net(AgentVariant::standard(tag), common::tiny_dims(), params, 5);
    let target = online.clone();
    let teacher = (tag == VariantTag::Dis).then(|| common::tiny(VariantTag::Oracle, 6));
    let buffer = common::random_buffer(&online, 10, 11);
    let batch = common::batch_for(&online, &buffer, 4, 20, 12);
    let mut scratch = online.clone();
    total_loss(
        Nets {
            online: &mut scratch,
            target: &target,
            teacher: teacher.as_ref(),
        },
        &batch,
        LossSettings {
            burn_in: 4,
            ..common::settings(mode, 10)
        },
        &mut ChaCha8Rng::seed_from_u64(13),
        false,
    )
    .unwrap()
    .unwrap()
}

#[test]
fn components_add_up() {
    for tag in VariantTag::ALL {
        let c = components(tag, VariantParams { beta: 0.3, ..VariantParams::default() }, Mode::Train);
        assert!((c.total - (c.td + c.pen + c.aux + c.dis)).abs() <= 1e-9, "{tag}");
        assert_eq!(c.pen > 0.0, matches!(tag, VariantTag::PiD | VariantTag::ID), "{tag}");
        assert_eq!(c.aux > 0.0, tag == VariantTag::Aux, "{tag}");
        assert_eq!(c.dis > 0.0, tag == VariantTag::Dis, "{tag}");
    }
    let c = components(VariantTag::PiD, VariantParams { beta: 0.0, ..VariantParams::default() }, Mode::Train);
    assert_eq!(c.total, c.td);
}

#[test]
fn eval_mode_leaves_the_privileged_branch_untrained() {
    let params = VariantParams {
        beta: 0.0,
        ..VariantParams::default()
    };
    let online = common::net(AgentVariant::standard(VariantTag::PiD), common::tiny_dims(), params, 9);
    let target = online.clone();
    let buffer = common::random_buffer(&online, 10, 14);
    let batch = common::batch_for(&online, &buffer, 4, 20, 15);
    let mut branch_names: Vec<String> = online.clone().branch_params_mut().iter().map(|p| p.name.clone()).collect();
    branch_names.sort();
    assert!(!branch_names.is_empty());

    let grads = |mode| {
        let mut net = online.clone();
        net.zero_grad();
        total_loss(
            Nets {
                online: &mut net,
                target: &target,
                teacher: None,
            },
            &batch,
            common::settings(mode, 0),
            &mut ChaCha8Rng::seed_from_u64(16),
            true,
        )
        .unwrap()
        .unwrap();
        net.params()
            .iter()
            .filter(|p| branch_names.binary_search(&p.name).is_ok())
            .map(|p| p.grad.iter().map(|g| g.abs()).sum::<f64>())
            .sum::<f64>()
    };
    assert_eq!(grads(Mode::Eval), 0.0);
    assert!(grads(Mode::Train) > 0.0);
}

#[test]
fn short_run_logs_every_episode() {
    let train = TrainConfig {
        total_episodes: 50,
        min_fill: 5,
        batch_size: 4,
        eval_every: 25,
        ..TrainConfig::default()
    };
    let dir = tempfile::tempdir().unwrap();
    let out = train_run(
        RunSpec {
            layout: &LayoutConfig::default(),
            train: &train,
            variant: AgentVariant::standard(VariantTag::PiD),
            dims: common::tiny_dims(),
            seed: 3,
            teacher: None,
            out_dir: Some(dir.path()),
        },
        None,
    )
    .unwrap();
    let m = &out.metrics;
    assert_eq!(m.episodes.len(), 50);
    assert!(m.episodes.iter().enumerate().all(|(i, e)| e.episode == i));
    assert!(m.episodes[..4].iter().all(|e| e.loss_total.is_none()));
    assert!(m.episodes[4..].iter().all(|e| e.loss_td.is_some() && e.loss_pen.is_some()));
    assert_eq!(m.evals.iter().map(|e| e.episode).collect::<Vec<_>>(), vec![25, 50]);
    for e in &m.episodes {
        assert!(e.length >= 1 && e.length <= 100);
        assert!(e.ret <= 9.9 && e.ret >= -10.0 - 1e-9);
    }
    let lines = common::read_file(&dir.path().join("metrics.jsonl")).lines().count();
    assert_eq!(lines, 50);
    assert_eq!(common::read_file(&dir.path().join("eval.jsonl")).lines().count(), 2);
}
