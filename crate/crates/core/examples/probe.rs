//! Scratch harness for tuning the training pipeline end to end.

use std::time::Instant;

use introspect_core::analysis::{embed_latents, episodes_to_threshold, label_structure_score, moving_average_success, EmbedMethod};
use introspect_core::bbrl::{
    fe_forward, reactive_forward, train_actor_critic, train_behaviour_stage, AcTrainConfig, ActorCritic,
    FeatureExtractor, ReactiveNetwork, StageConfig, StageProgress,
};
use introspect_core::env::{BehaviourId, PickPlaceEnv};
use introspect_core::introspection::{
    collect_activation_dataset, split_dataset, train_vae, vae_encode, TrainVaeConfig, WiringVariant,
};
use introspect_core::nn::AdamParams;
use introspect_core::rng::{stream_rng, substream_rng, Stream};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let what = args.first().map(String::as_str).unwrap_or("all");
    let env = PickPlaceEnv::default();

    let t0 = Instant::now();
    let (fe, rn) = train_stages(&env);
    eprintln!("[stages] trained in {:.1?}", t0.elapsed());

    if what == "stages" {
        return;
    }

    // greedy reactive rollouts with the scripted schedule
    let t = Instant::now();
    let mut ok = 0;
    let n_eval = 200;
    let mut eval_rng = stream_rng(1000, Stream::EnvReset);
    for _ in 0..n_eval {
        let (mut state, mut obs) = env.reset(&mut eval_rng);
        loop {
            let b = env.scripted_behaviour_schedule(&state);
            let (features, _) = fe_forward(&fe, &obs);
            let action = reactive_forward(&rn, &features, b);
            let (next, nobs, _r, done) = env.step(&state, b, &action);
            state = next;
            obs = nobs;
            if done {
                break;
            }
        }
        if env.success(&state) {
            ok += 1;
        }
    }
    eprintln!("[reactive] greedy scripted success {}/{} in {:.1?}", ok, n_eval, t.elapsed());

    // activation statistics
    let t = Instant::now();
    let ds = collect_activation_dataset(&env, &fe, 300, 0.0, "probe", 42);
    let dim = ds.activation_dim();
    let n = ds.len();
    let mut mean = vec![0.0; dim];
    for r in &ds.records {
        for (m, a) in mean.iter_mut().zip(&r.activations) {
            *m += a;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut var_sum = 0.0;
    for r in &ds.records {
        for (m, a) in mean.iter().zip(&r.activations) {
            var_sum += (a - m) * (a - m);
        }
    }
    var_sum /= n as f64;
    eprintln!(
        "[collect] {} records, total activation variance {:.3} (per-dim {:.5}) in {:.1?}",
        n,
        var_sum,
        var_sum / dim as f64,
        t.elapsed()
    );

    if what == "collect" {
        return;
    }

    // VAE training
    let t = Instant::now();
    let vae_cfg = TrainVaeConfig { epochs: 30, seed: 7, ..Default::default() };
    let (vae, curves) = train_vae(&ds, &vae_cfg).unwrap();
    eprintln!(
        "[vae] 30 epochs in {:.1?}; train {:.4} -> {:.4}; val {:.4} -> {:.4}",
        t.elapsed(),
        curves[0].train,
        curves.last().unwrap().train,
        curves[0].validation,
        curves.last().unwrap().validation
    );

    // latent structure on validation split
    let mut split_rng = substream_rng(7, Stream::DataOrder, 0);
    let (_, val_idx) = split_dataset(&ds, 0.8, &mut split_rng);
    let latents: Vec<(Vec<f64>, BehaviourId)> = val_idx
        .iter()
        .map(|&i| {
            let r = &ds.records[i];
            (vae_encode(&vae, &r.activations).mu, r.behaviour)
        })
        .collect();
    let mu_var: f64 = {
        let d = latents[0].0.len();
        let mut mean = vec![0.0; d];
        for (v, _) in &latents {
            for (m, x) in mean.iter_mut().zip(v) {
                *m += x;
            }
        }
        for m in &mut mean {
            *m /= latents.len() as f64;
        }
        let mut s = 0.0;
        for (v, _) in &latents {
            for (m, x) in mean.iter().zip(v) {
                s += (x - m) * (x - m);
            }
        }
        s / latents.len() as f64
    };
    let emb = embed_latents(&latents, &EmbedMethod::Pca);
    let score = label_structure_score(&emb, 15);
    eprintln!("[latent] mu total variance {mu_var:.5}; pca structure score {score:.3} over {} points", latents.len());

    if what == "vae" {
        return;
    }

    // actor-critic probes over learning rates and value coefficients
    let lrs: Vec<f64> = if args.len() > 1 {
        args[1..].iter().map(|a| a.parse().unwrap()).collect()
    } else {
        vec![1e-3, 3e-3, 1e-2]
    };
    for &lr in &lrs {
        for (variant, label) in
            [(WiringVariant::Baseline, "baseline"), (WiringVariant::MeansLogvar, "means-logvar")]
        {
            for seed in [1u64, 2] {
                let t = Instant::now();
                let latent_dim = if variant.needs_vae() { vae.latent_dim() } else { 0 };
                let input_dim = variant.input_dim(fe.feature_dim(), latent_dim);
                let mut ac = ActorCritic::new(input_dim, 64, 1.0, &mut stream_rng(seed, Stream::Init));
                let cfg = AcTrainConfig {
                    episodes: 2000,
                    seed,
                    adam: AdamParams::with_learning_rate(lr),
                    ..Default::default()
                };
                let vae_ref = variant.needs_vae().then_some(&vae);
                let log = train_actor_critic(&env, &fe, &rn, &mut ac, variant, vae_ref, &cfg);
                let curve = moving_average_success(&log, 100);
                let to80 = episodes_to_threshold(&curve, 80.0);
                let final_ma = curve.last().unwrap().1;
                let succ_total: usize = log.episodes.iter().filter(|e| e.success).count();
                eprintln!(
                    "[ac {label} lr {lr} seed {seed}] to80 {:?}, final MA {:.1}%, succ {}/2000, in {:.1?}",
                    to80,
                    final_ma,
                    succ_total,
                    t.elapsed()
                );
            }
        }
    }
}

fn train_stages(env: &PickPlaceEnv) -> (FeatureExtractor, ReactiveNetwork) {
    let mut init = stream_rng(5, Stream::Init);
    let mut fe = FeatureExtractor::new(13, 128, 128, 16.0, &mut init);
    let mut rn = ReactiveNetwork::new(128, 64, env.cfg.max_step, 1.0, &mut init);
    let mut progress = StageProgress::new();
    for b in BehaviourId::ALL {
        let cfg = StageConfig { episodes: 500, seed: 5, ..Default::default() };
        let result = train_behaviour_stage(b, env, &mut fe, &mut rn, &cfg, &mut progress);
        let head: f64 = result.losses[..20].iter().sum::<f64>() / 20.0;
        let tail: f64 = result.losses[result.losses.len() - 20..].iter().sum::<f64>() / 20.0;
        eprintln!("[stage {}] loss {head:.6} -> {tail:.6} (ratio {:.3})", b.label(), tail / head);
    }
    (fe, rn)
}
