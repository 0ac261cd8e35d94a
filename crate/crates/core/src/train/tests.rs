use super::*;
use crate::ptrnet::{CriticModel, PtrNetModel};

fn tiny_config() -> TrainConfig {
    TrainConfig {
        model: ModelConfig::small(8),
        batch_size: 4,
        n_cities: 6,
        max_steps: 20,
        eval_every: 5,
        eval_set_size: 16,
        seed: 3,
        ..TrainConfig::full()
    }
}

fn batch(n: usize, count: usize, seed: u64) -> Vec<Vec<City>> {
    random_batch(n, count, &RngStream::new(seed))
}

/// Pins the critic output to `value` for every input.
fn constant_critic(critic: &mut CriticModel, value: f64) {
    critic.output.w.values.iter_mut().for_each(|w| *w = 0.0);
    critic.output.b.values[0] = value;
}

fn sampled_length(actor: &PtrNetModel, coords: &[City], rng: &RngStream) -> (Vec<usize>, f64) {
    let enc = encode(actor, coords).unwrap();
    let t = rollout(actor, &enc, Policy::Sample(&mut rng.derive(0))).unwrap();
    let l = order_length(coords, &t.chosen, DistanceMode::EuclideanExact);
    (t.chosen, l)
}

fn forced_log_prob(actor: &PtrNetModel, coords: &[City], order: &[usize]) -> f64 {
    let enc = encode(actor, coords).unwrap();
    rollout(actor, &enc, Policy::Forced(order)).unwrap().log_prob
}

#[test]
fn critic_mse_by_hand() {
    let preds: [f64; 2] = [3.0, 4.0];
    let actual: [f64; 2] = [5.0, 2.0];
    let loss = preds.iter().zip(&actual).map(|(b, l)| (b - l).powi(2)).sum::<f64>() / 2.0;
    assert_eq!(loss, 4.0);
    // same value through the critic path with a constant critic
    let mut critic = CriticModel::new(ModelConfig::small(4), &mut RngStream::new(0));
    let b = batch(5, 2, 1);
    constant_critic(&mut critic, 3.0);
    let l0 = critic_loss(&critic, &b[..1], &[5.0]).unwrap();
    constant_critic(&mut critic, 4.0);
    let l1 = critic_loss(&critic, &b[1..], &[2.0]).unwrap();
    assert_eq!((l0 + l1) / 2.0, 4.0);
}

#[test]
fn zero_advantage_leaves_actor_unchanged() {
    let cfg = tiny_config();
    let mut actor = PtrNetModel::new(cfg.model, &mut RngStream::new(1));
    let mut critic = CriticModel::new(cfg.model, &mut RngStream::new(2));
    let b = batch(6, 1, 4);
    let rng = RngStream::new(5);
    let (_, length) = sampled_length(&actor, &b[0], &rng);
    constant_critic(&mut critic, length);
    let before = actor.clone();
    let stats = reinforce_step(&mut actor, &mut critic, &b, &rng, &cfg, 0).unwrap();
    assert_eq!(stats.critic_loss, 0.0);
    for (p, q) in actor.params().iter().zip(before.params()) {
        assert_eq!(p.values, q.values, "{}", p.name);
    }
}

#[test]
fn update_direction_follows_advantage_sign() {
    let cfg = tiny_config();
    for (offset, should_drop) in [(-1.0, true), (1.0, false)] {
        let mut actor = PtrNetModel::new(cfg.model, &mut RngStream::new(6));
        let mut critic = CriticModel::new(cfg.model, &mut RngStream::new(7));
        let b = batch(6, 1, 8);
        let rng = RngStream::new(9);
        let (order, length) = sampled_length(&actor, &b[0], &rng);
        // baseline below the sampled length => positive advantage
        constant_critic(&mut critic, length + offset);
        let before = forced_log_prob(&actor, &b[0], &order);
        reinforce_step(&mut actor, &mut critic, &b, &rng, &cfg, 0).unwrap();
        let after = forced_log_prob(&actor, &b[0], &order);
        assert_eq!(after < before, should_drop, "offset {offset}: {before} -> {after}");
    }
}

#[test]
fn full_loss_gradient_matches_finite_differences() {
    let cfg = ModelConfig::small(8);
    let mut actor = PtrNetModel::new(cfg, &mut RngStream::new(10));
    let mut critic = CriticModel::new(cfg, &mut RngStream::new(11));
    critic.hidden_layer.b.values.iter_mut().for_each(|b| *b = 0.5);
    let b = batch(4, 2, 12);
    let rng = RngStream::new(13);
    let (ga, gc, _) = reinforce_gradients(&actor, &critic, &b, &rng, false).unwrap();

    let trajectories: Vec<(Vec<usize>, f64)> = (0..2)
        .map(|i| {
            let enc = encode(&actor, &b[i]).unwrap();
            let t = rollout(&actor, &enc, Policy::Sample(&mut rng.derive(i as u64))).unwrap();
            let l = order_length(&b[i], &t.chosen, DistanceMode::EuclideanExact);
            (t.chosen, l)
        })
        .collect();
    let baselines: Vec<f64> = b.iter().map(|c| critic_forward(&critic, c).unwrap()).collect();
    let actor_loss = |a: &PtrNetModel| {
        (0..2)
            .map(|i| (trajectories[i].1 - baselines[i]) * forced_log_prob(a, &b[i], &trajectories[i].0))
            .sum::<f64>()
            / 2.0
    };
    let critic_loss_fn = |c: &CriticModel| {
        (0..2)
            .map(|i| (critic_forward(c, &b[i]).unwrap() - trajectories[i].1).powi(2))
            .sum::<f64>()
            / 2.0
    };
    let h = 1e-5;
    let check = |fd: f64, an: f64, what: &str| {
        assert!((fd - an).abs() <= 1e-3 * fd.abs().max(an.abs()).max(1e-6), "{what}: fd {fd} analytic {an}");
    };
    let analytic = ga.flatten();
    let mut k = 0;
    for pi in 0..actor.params().len() {
        for j in 0..actor.params()[pi].len() {
            let orig = actor.params()[pi].values[j];
            actor.params_mut()[pi].values[j] = orig + h;
            let up = actor_loss(&actor);
            actor.params_mut()[pi].values[j] = orig - h;
            let down = actor_loss(&actor);
            actor.params_mut()[pi].values[j] = orig;
            check((up - down) / (2.0 * h), analytic[k], &actor.params()[pi].name);
            k += 1;
        }
    }
    let analytic = gc.flatten();
    let mut k = 0;
    for pi in 0..critic.params().len() {
        for j in 0..critic.params()[pi].len() {
            let orig = critic.params()[pi].values[j];
            critic.params_mut()[pi].values[j] = orig + h;
            let up = critic_loss_fn(&critic);
            critic.params_mut()[pi].values[j] = orig - h;
            let down = critic_loss_fn(&critic);
            critic.params_mut()[pi].values[j] = orig;
            check((up - down) / (2.0 * h), analytic[k], &critic.params()[pi].name);
            k += 1;
        }
    }
}

fn frozen_regression(lr0: f64) -> Vec<f64> {
    let cfg = ModelConfig::small(32);
    let mut critic = CriticModel::new(cfg, &mut RngStream::new(14));
    let b = batch(20, 32, 15);
    let actor = PtrNetModel::new(cfg, &mut RngStream::new(16));
    let targets: Vec<f64> = b
        .iter()
        .enumerate()
        .map(|(i, c)| sampled_length(&actor, c, &RngStream::new(17).derive(i as u64)).1)
        .collect();
    let adam = AdamConfig {
        lr0,
        ..AdamConfig::default()
    };
    let mut losses = Vec::new();
    for step in 0..200 {
        losses.push(critic_step(&mut critic, &b, &targets, &adam, Some(2.0), step).unwrap());
    }
    losses.push(critic_loss(&critic, &b, &targets).unwrap());
    losses
}

#[test]
fn critic_only_steps_cut_loss_by_ninety_percent() {
    let losses = frozen_regression(0.003);
    let (first, last) = (losses[0], *losses.last().unwrap());
    assert!(last <= 0.1 * first, "loss {first} -> {last}");
}

#[test]
fn critic_loss_is_mostly_non_increasing() {
    // At lr >= 5e-4 Adam jitters around the floor once the intercept is
    // fitted; the descent phase is what this checks.
    let losses = frozen_regression(0.0002);
    let non_increasing = losses.windows(2).filter(|w| w[1] <= w[0]).count();
    assert!(non_increasing as f64 >= 0.95 * 200.0, "{non_increasing}/200 non-increasing");
    assert!(losses[200] < losses[0]);
}

#[test]
fn zero_steps_returns_initial_models() {
    let cfg = TrainConfig {
        max_steps: 0,
        ..tiny_config()
    };
    let (actor, critic, log) = train(&cfg).unwrap();
    assert!(log.records.is_empty());
    assert_eq!(log.to_csv(), "step,sample_mean,greedy_mean,critic_loss\n");
    let master = RngStream::new(cfg.seed);
    assert_eq!(actor, PtrNetModel::new(cfg.model, &mut master.derive(0)));
    assert_eq!(critic, CriticModel::new(cfg.model, &mut master.derive(1)));
}

#[test]
fn training_is_deterministic() {
    let cfg = tiny_config();
    let (a1, _, l1) = train(&cfg).unwrap();
    let (a2, _, l2) = train(&cfg).unwrap();
    assert_eq!(l1.to_csv(), l2.to_csv());
    assert_eq!(a1, a2);
    let steps: Vec<usize> = l1.records.iter().map(|r| r.step).collect();
    assert_eq!(steps, vec![0, 5, 10, 15, 20]);
}

#[test]
fn short_training_improves_on_initialization() {
    let cfg = TrainConfig {
        model: ModelConfig::small(32),
        batch_size: 32,
        n_cities: 20,
        max_steps: 200,
        eval_every: 100,
        eval_set_size: 64,
        seed: 21,
        ..TrainConfig::full()
    };
    let (_, _, log) = train(&cfg).unwrap();
    let first = log.records.first().unwrap();
    let last = log.records.last().unwrap();
    assert!(last.greedy_mean <= first.greedy_mean, "{first:?} -> {last:?}");
    assert!(log.records.windows(2).all(|w| w[0].step < w[1].step));
}

#[test]
fn config_validation() {
    assert!(TrainConfig { batch_size: 0, ..tiny_config() }.validate().is_err());
    assert!(TrainConfig { n_cities: 1, ..tiny_config() }.validate().is_err());
    let p = TrainConfig::full();
    assert_eq!((p.batch_size, p.model.hidden, p.model.embed, p.max_steps), (64, 128, 128, 20_000));
    assert_eq!((p.adam_actor.lr0, p.adam_actor.decay_factor, p.adam_actor.decay_every), (0.001, 0.96, 5000));
}

mod checkpoints {
    use super::*;
    use crate::train::checkpoint::{decode_checkpoint, encode_checkpoint};

    #[test]
    fn round_trip_is_bit_exact() {
        let cfg = tiny_config();
        let actor = PtrNetModel::new(cfg.model, &mut RngStream::new(30));
        let critic = CriticModel::new(cfg.model, &mut RngStream::new(31));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        save_checkpoint(&path, &actor, &critic, &cfg, 17).unwrap();
        let back = load_checkpoint(&path).unwrap();
        assert_eq!(back.actor, actor);
        assert_eq!(back.critic, critic);
        assert_eq!(back.config, cfg);
        assert_eq!(back.step, 17);
    }

    #[test]
    fn wrong_magic_is_a_version_error() {
        let err = decode_checkpoint(b"XXXX\nembed 4\n").unwrap_err().to_string();
        assert!(err.contains("unsupported version"), "{err}");
    }

    #[test]
    fn mismatched_width_names_the_block() {
        let cfg = tiny_config();
        let actor = PtrNetModel::new(cfg.model, &mut RngStream::new(30));
        let critic = CriticModel::new(cfg.model, &mut RngStream::new(31));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        save_checkpoint(&path, &actor, &critic, &cfg, 0).unwrap();
        let expected = ModelConfig {
            hidden: 16,
            ..cfg.model
        };
        let err = load_checkpoint_expecting(&path, &expected).unwrap_err().to_string();
        assert!(err.contains("actor.encoder.w_ih"), "{err}");
    }

    #[test]
    fn truncation_is_detected() {
        let cfg = tiny_config();
        let actor = PtrNetModel::new(cfg.model, &mut RngStream::new(30));
        let critic = CriticModel::new(cfg.model, &mut RngStream::new(31));
        let bytes = encode_checkpoint(&actor, &critic, &cfg, 0).unwrap();
        let err = decode_checkpoint(&bytes[..bytes.len() - 5]).unwrap_err().to_string();
        assert!(err.contains("truncated"), "{err}");
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(decode_checkpoint(&extra).is_err());
    }
}
