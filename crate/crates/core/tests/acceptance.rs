//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.
//!
//! Set `WMRFT_ACCEPTANCE=1,2,3` to run a subset.

use std::collections::BTreeSet;
use std::sync::OnceLock;
use std::time::Instant;

use rand::Rng as _;
use wmrft_core::fm_policy::{
    fm_loss_and_grad, pretrain_policy, sample_ode, OdePolicy, PolicyNets, PolicyTrainConfig, TimestepDistribution,
};
use wmrft_core::nn::checkpoint::Checkpoint;
use wmrft_core::nn::{gradient_check, AdamW, AdamWConfig, GradCheckOptions, SIGMA_FLOOR};
use wmrft_core::rft::{
    group_advantages, grpo_loss_and_grad, rft_step, run_rft, verified_reward, ClipConfig, ClipForm, GroupBatch,
    GrpoWeights, MetricsRecord, RewardConfig, RewardContext, RewardKind, RftConfig, RftState, RftSummary,
};
use wmrft_core::rng;
use wmrft_core::sde_policy::{logprob_grad, logprob_under, policy_ratio, sample_sde, SigmaNet};
use wmrft_core::toyworld::{
    dataset::encode_dataset, evaluate_success, generate_dataset, ChunkRecord, DatasetHeader, EnvConfig,
    ExpertChunkPolicy, PerturbMode, PerturbSpec, RandomChunkPolicy,
};
use wmrft_core::world_model::{
    train_world_model, transitions, wm_eval_metrics, PerceptualProxy, PerceptualProxyConfig, WmTrainConfig,
    WorldModel,
};
use wmrft_core::ActionChunk;

const DATA_SEED: u64 = 1;
const HELDOUT_SEED: u64 = 2;
const WM_INIT_SEED: u64 = 3;
const WM_TRAIN_SEED: u64 = 5;
const POLICY_INIT_SEED: u64 = 7;
const POLICY_TRAIN_SEED: u64 = 11;
const RFT_SEED: u64 = 42;
const EVAL_SEED: u64 = 2024;
const INSTANCES: u64 = 20;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn small_env() -> EnvConfig {
    EnvConfig {
        frame_size: 8,
        chunk_len: 4,
        ..Default::default()
    }
}

fn proxy() -> PerceptualProxy {
    PerceptualProxy::new(&PerceptualProxyConfig::default()).unwrap()
}

fn uniform_chunk(env: &EnvConfig, seed: u64) -> ActionChunk {
    let mut r = rng::seeded(seed);
    let v = (0..env.chunk_width()).map(|_| r.random_range(-1.0..=1.0)).collect();
    ActionChunk::from_vec(env.chunk_len, env.action_dim, v).unwrap()
}

/// Shifts parameters slightly so ratios move off 1 but stay inside the clip.
fn nudge(nets: &PolicyNets, sigma: &SigmaNet, scale: f64) -> (PolicyNets, SigmaNet) {
    let mut n = nets.clone();
    let mut s = sigma.clone();
    for (j, p) in n.flow_head.params_mut().iter_mut().enumerate() {
        *p += scale * ((j as f64) * 0.37).sin();
    }
    for (j, p) in s.net.params_mut().iter_mut().enumerate() {
        *p += scale * ((j as f64) * 0.11).cos();
    }
    (n, s)
}

fn group_at(nets: &PolicyNets, sigma: &SigmaNet, rec: &ChunkRecord, rewards: Vec<f64>, k: usize, seed: u64) -> GroupBatch {
    let ctx = RewardContext::from_record(rec, RewardKind::ActionL1, None).unwrap();
    let traces = (0..rewards.len())
        .map(|n| sample_sde(nets, sigma, &ctx.obs, k, rng::derive_seed(seed, &[n as u64]), 0).unwrap())
        .collect();
    GroupBatch::new(ctx, traces, rewards).unwrap()
}

fn criterion_1() -> Verdict {
    let env = small_env();
    let recs = generate_dataset(&env, 8, &PerturbSpec::none(), 0.02, 31).unwrap();
    let td = TimestepDistribution::uniform();
    let opts = |seed| GradCheckOptions {
        max_coords: 16,
        seed,
        ..Default::default()
    };
    let mut worst = [0.0f64; 4];
    for i in 0..INSTANCES {
        let mut r = rng::seeded(900 + i);
        let pick = |r: &mut rng::Rng, n: usize| -> Vec<&ChunkRecord> {
            (0..n).map(|_| &recs[r.random_range(0..recs.len())]).collect()
        };

        let wm = WorldModel::new(&env, 100 + i).unwrap();
        let batch_recs = pick(&mut r, 2);
        let owned: Vec<ChunkRecord> = batch_recs.iter().map(|&x| x.clone()).collect();
        let batch: Vec<_> = transitions(&owned).into_iter().step_by(3).collect();
        let (_, g) = wm.loss_and_grad(&batch).unwrap();
        worst[0] = worst[0].max(gradient_check(
            wm.net().params().as_slice(),
            &g,
            |p| {
                let mut m = wm.clone();
                m.net_mut().params_mut().copy_from_slice(p);
                m.loss_and_grad(&batch).unwrap().0
            },
            &opts(i),
        ));

        let nets = PolicyNets::new(&env, 200 + i).unwrap();
        let fm_batch = pick(&mut r, 3);
        let out = fm_loss_and_grad(&nets, &fm_batch, &td, i).unwrap();
        let fe = gradient_check(
            nets.flow_head.params().as_slice(),
            &out.flow_grad,
            |p| {
                let mut n = nets.clone();
                n.flow_head.params_mut().copy_from_slice(p);
                fm_loss_and_grad(&n, &fm_batch, &td, i).unwrap().loss
            },
            &opts(i),
        );
        let ee = gradient_check(
            nets.encoder.params().as_slice(),
            &out.encoder_grad,
            |p| {
                let mut n = nets.clone();
                n.encoder.params_mut().copy_from_slice(p);
                fm_loss_and_grad(&n, &fm_batch, &td, i).unwrap().loss
            },
            &opts(i),
        );
        worst[1] = worst[1].max(fe).max(ee);

        let sigma = SigmaNet::new(&env, 300 + i, 0.1 + 0.02 * i as f64).unwrap();
        let rec = pick(&mut r, 1)[0];
        let trace = sample_sde(&nets, &sigma, &rec.observation(), 4, 400 + i, 0).unwrap();
        let (n2, s2) = nudge(&nets, &sigma, 1e-3);
        let mut fg = vec![0.0; n2.flow_head.param_count()];
        let mut sg = vec![0.0; s2.net.param_count()];
        logprob_grad(&n2, &s2, &trace, 1.0, &mut fg, &mut sg).unwrap();
        let le = gradient_check(
            n2.flow_head.params().as_slice(),
            &fg,
            |p| {
                let mut n = n2.clone();
                n.flow_head.params_mut().copy_from_slice(p);
                logprob_under(&n, &s2, &trace).unwrap()
            },
            &opts(i),
        );
        let ls = gradient_check(
            s2.net.params().as_slice(),
            &sg,
            |p| {
                let mut s = s2.clone();
                s.net.params_mut().copy_from_slice(p);
                logprob_under(&n2, &s, &trace).unwrap()
            },
            &opts(i),
        );
        worst[2] = worst[2].max(le).max(ls);

        let form = if i % 2 == 0 { ClipForm::PaperClipOnly } else { ClipForm::PpoMin };
        let rewards: Vec<f64> = (0..3).map(|_| -r.random_range(0.0..1.0)).collect();
        let groups = vec![group_at(&nets, &sigma, rec, rewards, 4, 500 + i)];
        let sft = pick(&mut r, 2);
        let w = GrpoWeights {
            clip: ClipConfig { epsilon: 0.2, form },
            lambda_mse: 0.05,
            entropy_coef: 0.01,
        };
        let (n3, s3) = nudge(&nets, &sigma, 2e-4);
        let out = grpo_loss_and_grad(&n3, &s3, &groups, &w, &sft, &td, i).unwrap();
        let ge = gradient_check(
            n3.flow_head.params().as_slice(),
            &out.flow_grad,
            |p| {
                let mut n = n3.clone();
                n.flow_head.params_mut().copy_from_slice(p);
                grpo_loss_and_grad(&n, &s3, &groups, &w, &sft, &td, i).unwrap().total
            },
            &opts(i),
        );
        let gs = gradient_check(
            s3.net.params().as_slice(),
            &out.sigma_grad,
            |p| {
                let mut s = s3.clone();
                s.net.params_mut().copy_from_slice(p);
                grpo_loss_and_grad(&n3, &s, &groups, &w, &sft, &td, i).unwrap().total
            },
            &opts(i),
        );
        worst[3] = worst[3].max(ge).max(gs);
    }
    let pass = worst.iter().all(|&e| e < 1e-3);
    verdict(
        pass,
        format!(
            "max rel err over {INSTANCES} instances: wm {:.1e}, fm {:.1e}, logp {:.1e}, grpo {:.1e} (< 1e-3)",
            worst[0], worst[1], worst[2], worst[3]
        ),
    )
}

fn criterion_2() -> Verdict {
    let env = small_env();
    let recs = generate_dataset(&env, 6, &PerturbSpec::none(), 0.02, 32).unwrap();
    let td = TimestepDistribution::uniform();
    let mut adv_mean = 0.0f64;
    let mut ratio_dev = 0.0f64;
    let mut surrogate = 0.0f64;
    let mut shift = 0.0f64;
    let mut clip_ok = true;
    for i in 0..INSTANCES {
        let mut r = rng::seeded(1000 + i);
        let n = r.random_range(2..=16);
        let rewards: Vec<f64> = (0..n).map(|_| -r.random_range(0.0..10.0)).collect();
        let (_, adv) = group_advantages(&rewards).unwrap();
        adv_mean = adv_mean.max((adv.iter().sum::<f64>() / n as f64).abs());

        let nets = PolicyNets::new(&env, 1100 + i).unwrap();
        let sigma = SigmaNet::new(&env, 1200 + i, r.random_range(0.01..0.5)).unwrap();
        let groups: Vec<GroupBatch> = (0..2)
            .map(|c| {
                let rw: Vec<f64> = (0..4).map(|_| -r.random_range(0.0..1.0)).collect();
                group_at(&nets, &sigma, &recs[(i as usize + c) % recs.len()], rw, 4, 1300 + 10 * i + c as u64)
            })
            .collect();
        for g in &groups {
            for t in &g.traces {
                let ratio = policy_ratio(logprob_under(&nets, &sigma, t).unwrap(), t.mean_logp).unwrap();
                ratio_dev = ratio_dev.max((ratio - 1.0).abs());
            }
        }
        let w = GrpoWeights {
            clip: ClipConfig::default(),
            lambda_mse: 0.0,
            entropy_coef: 0.0,
        };
        let out = grpo_loss_and_grad(&nets, &sigma, &groups, &w, &[], &td, 0).unwrap();
        surrogate = surrogate.max(out.surrogate_loss.abs());

        let c = r.random_range(-5.0..5.0);
        let shifted: Vec<GroupBatch> = groups
            .iter()
            .map(|g| GroupBatch::new(g.context.clone(), g.traces.clone(), g.rewards.iter().map(|x| x + c).collect()).unwrap())
            .collect();
        let (n2, s2) = nudge(&nets, &sigma, 1e-4);
        let a = grpo_loss_and_grad(&n2, &s2, &groups, &w, &[], &td, 0).unwrap();
        let b = grpo_loss_and_grad(&n2, &s2, &shifted, &w, &[], &td, 0).unwrap();
        for (x, y) in a.flow_grad.iter().zip(&b.flow_grad).chain(a.sigma_grad.iter().zip(&b.sigma_grad)) {
            shift = shift.max((x - y).abs());
        }

        let eps = r.random_range(0.01..0.9);
        let cc = ClipConfig {
            epsilon: eps,
            ..Default::default()
        };
        for _ in 0..1000 {
            let ratio = (r.random_range(-14.0f64..14.0)).exp();
            let v = cc.clip(ratio);
            clip_ok &= (1.0 - eps..=1.0 + eps).contains(&v);
        }
    }
    let pass = adv_mean < 1e-9 && ratio_dev < 1e-10 && surrogate < 1e-8 && shift < 1e-8 && clip_ok;
    verdict(
        pass,
        format!(
            "adv mean {adv_mean:.1e}, |ratio-1| {ratio_dev:.1e}, surrogate {surrogate:.1e}, shift {shift:.1e}, clip in range {clip_ok}"
        ),
    )
}

fn criterion_3() -> Verdict {
    let env = EnvConfig::default();
    let recs = generate_dataset(&env, 10, &PerturbSpec::none(), 0.02, 33).unwrap();
    let nets = &PolicyNets::new(&env, 34).unwrap();
    let sigma = SigmaNet::constant(&env, SIGMA_FLOOR + 1e-12).unwrap();
    let mut worst = 0.0f64;
    for (i, rec) in recs.iter().take(20).enumerate() {
        let obs = rec.observation();
        let seed = 3000 + i as u64;
        let ode = sample_ode(nets, &obs, 10, seed).unwrap();
        let sde = sample_sde(nets, &sigma, &obs, 10, seed, 0).unwrap();
        worst = worst.max(sde.states[10].max_abs_diff(&ode.raw));
    }
    verdict(worst < 1e-2, format!("max inf-norm gap over 20 contexts {worst:.2e} (< 1e-2)"))
}

/// Shared Stage-I artifacts on the default environment.
struct StageOne {
    train: Vec<ChunkRecord>,
    heldout: Vec<ChunkRecord>,
    wm: WorldModel,
    wm_secs: f64,
    sft: PolicyNets,
    full: PolicyNets,
    policy_secs: f64,
}

fn stage_one() -> &'static StageOne {
    static CELL: OnceLock<StageOne> = OnceLock::new();
    CELL.get_or_init(|| {
        let env = EnvConfig::default();
        let none = PerturbSpec::none();
        let train = generate_dataset(&env, 500, &none, 0.02, DATA_SEED).unwrap();
        let heldout = generate_dataset(&env, 50, &none, 0.02, HELDOUT_SEED).unwrap();

        let t = Instant::now();
        let wcfg = WmTrainConfig::default();
        let mut wm = WorldModel::new(&env, WM_INIT_SEED).unwrap();
        let mut opt = AdamW::new(wm.net().param_count(), AdamWConfig::with_lr(wcfg.lr));
        train_world_model(&mut wm, &mut opt, &train, &wcfg, WM_TRAIN_SEED, 0, |_, _, _, _| Ok(())).unwrap();
        let wm_secs = t.elapsed().as_secs_f64();

        let t = Instant::now();
        let pcfg = PolicyTrainConfig::default();
        let sft_steps = pcfg.steps / 4;
        let mut nets = PolicyNets::new(&env, POLICY_INIT_SEED).unwrap();
        let mut eo = AdamW::new(nets.encoder.param_count(), AdamWConfig::with_lr(pcfg.lr));
        let mut fo = AdamW::new(nets.flow_head.param_count(), AdamWConfig::with_lr(pcfg.lr));
        let mut sft = None;
        pretrain_policy(&mut nets, &mut eo, &mut fo, &train, &pcfg, POLICY_TRAIN_SEED, 0, |step, _, n, _, _| {
            if step + 1 == sft_steps {
                sft = Some(n.clone());
            }
            Ok(())
        })
        .unwrap();
        StageOne {
            train,
            heldout,
            wm,
            wm_secs,
            sft: sft.unwrap(),
            full: nets,
            policy_secs: t.elapsed().as_secs_f64(),
        }
    })
}

fn criterion_4() -> Verdict {
    let s = stage_one();
    let m = wm_eval_metrics(&s.wm, &s.heldout, &proxy()).unwrap();
    let pass = m.mse <= 0.01 && m.psnr_db >= 20.0 && s.wm_secs < 600.0;
    verdict(
        pass,
        format!(
            "held-out {}-frame rollouts: mse {:.4} (<= 0.01), psnr {:.2} dB (>= 20), trained in {:.0} s (< 600)",
            m.frames, m.mse, m.psnr_db, s.wm_secs
        ),
    )
}

fn criterion_5() -> Verdict {
    let s = stage_one();
    let env = EnvConfig::default();
    let none = PerturbSpec::none();
    let policy = OdePolicy {
        nets: &s.full,
        k_steps: 10,
    };
    let sr = evaluate_success(&policy, &env, &none, 50, EVAL_SEED).unwrap();
    let expert = evaluate_success(&ExpertChunkPolicy { cfg: env.clone() }, &env, &none, 50, EVAL_SEED).unwrap();
    let random = evaluate_success(&RandomChunkPolicy { cfg: env.clone() }, &env, &none, 50, EVAL_SEED).unwrap();
    let pass = sr >= 0.8 && expert == 1.0 && random < 0.2 && s.policy_secs < 600.0;
    verdict(
        pass,
        format!(
            "policy SR {sr:.2} (>= 0.80), expert {expert:.2}, random {random:.2}, trained in {:.0} s (< 600)",
            s.policy_secs
        ),
    )
}

struct RftRun {
    summary: RftSummary,
    secs: f64,
}

fn rft_run(kind: RewardKind) -> RftRun {
    let s = stage_one();
    let env = EnvConfig::default();
    let cfg = RftConfig::default();
    let reward = RewardConfig {
        kind,
        ..Default::default()
    };
    let t = Instant::now();
    let mut state = RftState::new(s.sft.clone(), &env, &cfg, RFT_SEED).unwrap();
    let summary = run_rft(
        &mut state,
        Some(&s.wm),
        &proxy(),
        &s.train,
        &env,
        &cfg,
        &reward,
        &PolicyTrainConfig::default().timestep,
        RFT_SEED,
        |_, _| Ok(()),
    )
    .unwrap();
    RftRun {
        summary,
        secs: t.elapsed().as_secs_f64(),
    }
}

fn r3_run() -> &'static RftRun {
    static CELL: OnceLock<RftRun> = OnceLock::new();
    CELL.get_or_init(|| rft_run(RewardKind::WmVsWm))
}

fn criterion_6() -> Verdict {
    let run = r3_run();
    let u = &run.summary.suites["unperturbed"];
    let pass = u.delta >= 0.05 && run.secs < 45.0 * 60.0;
    verdict(
        pass,
        format!(
            "unperturbed SR {:.2} -> {:.2} (delta {:+.2}, >= +0.05) over {} episodes, {} steps in {:.0} s",
            u.pre_sr, u.post_sr, u.delta, run.summary.episodes, run.summary.steps, run.secs
        ),
    )
}

fn criterion_7() -> Verdict {
    let run = r3_run();
    let mut held = 0;
    let mut parts = Vec::new();
    for fam in PerturbMode::FAMILIES {
        let name = format!("{}_minor", fam.name());
        let r = &run.summary.suites[&name];
        held += (r.post_sr >= r.pre_sr) as usize;
        parts.push(format!("{name} {:.2}->{:.2}", r.pre_sr, r.post_sr));
    }
    verdict(held >= 3, format!("{held}/4 families not worse (>= 3): {}", parts.join(", ")))
}

fn criterion_8() -> Verdict {
    let sr = |run: &RftRun| run.summary.suites["unperturbed"].post_sr;
    let r3 = sr(r3_run());
    let r2 = sr(&rft_run(RewardKind::WmVsDataset));
    let r1 = sr(&rft_run(RewardKind::ActionL1));
    verdict(
        r3 >= r1 && r3 >= r2,
        format!("final unperturbed SR: R3 {r3:.2}, R2 {r2:.2}, R1 {r1:.2} (R3 >= both)"),
    )
}

fn criterion_9() -> Verdict {
    let s = stage_one();
    let env = EnvConfig::default();
    let p = proxy();
    let cfg = RewardConfig::default();
    let mut r = rng::seeded(9000);
    let mut wins = 0;
    for c in 0..100u64 {
        let rec = &s.heldout[r.random_range(0..s.heldout.len())];
        let ctx = RewardContext::from_record(rec, RewardKind::WmVsWm, Some(&s.wm)).unwrap();
        let good = verified_reward(&cfg, Some(&s.wm), &p, &ctx, &rec.actions).unwrap();
        let bad = verified_reward(&cfg, Some(&s.wm), &p, &ctx, &uniform_chunk(&env, 9100 + c)).unwrap();
        wins += (good > bad) as usize;
    }
    verdict(wins >= 95, format!("R3(reference) > R3(random) in {wins}/100 contexts (>= 95)"))
}

fn criterion_10() -> Verdict {
    let env = small_env();
    let none = PerturbSpec::none();
    let header = DatasetHeader::of(&env);
    let data = || encode_dataset(header, &generate_dataset(&env, 12, &none, 0.02, 77).unwrap()).unwrap();
    let dataset_same = data() == data();
    let recs = generate_dataset(&env, 12, &none, 0.02, 77).unwrap();

    let wm_ckpt = || {
        let cfg = WmTrainConfig {
            steps: 30,
            ..Default::default()
        };
        let mut wm = WorldModel::new(&env, 1).unwrap();
        let mut opt = AdamW::new(wm.net().param_count(), AdamWConfig::with_lr(cfg.lr));
        let mut losses = Vec::new();
        train_world_model(&mut wm, &mut opt, &recs, &cfg, 2, 0, |_, l, _, _| {
            losses.push(l);
            Ok(())
        })
        .unwrap();
        (wm.write_into(Checkpoint::new()).with_optimizer("opt", &opt).to_bytes(), losses)
    };
    let pol_ckpt = || {
        let cfg = PolicyTrainConfig {
            steps: 30,
            batch_size: 8,
            ..Default::default()
        };
        let mut nets = PolicyNets::new(&env, 3).unwrap();
        let mut eo = AdamW::new(nets.encoder.param_count(), AdamWConfig::with_lr(cfg.lr));
        let mut fo = AdamW::new(nets.flow_head.param_count(), AdamWConfig::with_lr(cfg.lr));
        let mut losses = Vec::new();
        pretrain_policy(&mut nets, &mut eo, &mut fo, &recs, &cfg, 4, 0, |_, l, _, _, _| {
            losses.push(l);
            Ok(())
        })
        .unwrap();
        (nets.write_into(Checkpoint::new()).to_bytes(), losses)
    };
    let checkpoints_same = wm_ckpt() == wm_ckpt() && pol_ckpt() == pol_ckpt();

    let wm = WorldModel::new(&env, 5).unwrap();
    let p = proxy();
    let cfg = RftConfig {
        group_size: 4,
        batch_contexts: 4,
        ..Default::default()
    };
    let reward = RewardConfig::default();
    let td = TimestepDistribution::uniform();
    let start = RftState::new(PolicyNets::new(&env, 6).unwrap(), &env, &cfg, 7).unwrap();
    let rft = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let mut s = start.clone();
            let rows: Vec<MetricsRecord> = (0..3)
                .map(|step| rft_step(&mut s, Some(&wm), &p, &recs, &cfg, &reward, &td, 8, step).unwrap())
                .collect();
            let sr = evaluate_success(
                &OdePolicy {
                    nets: &s.nets,
                    k_steps: 10,
                },
                &env,
                &none,
                8,
                9,
            )
            .unwrap();
            let metrics: Vec<String> = rows.iter().map(|r| format!("{r:?}")).collect();
            (s.to_checkpoint().to_bytes(), metrics, sr)
        })
    };
    let single = rft(1);
    let rft_repeat = single == rft(1);
    let threads_same = single == rft(4);
    verdict(
        dataset_same && checkpoints_same && rft_repeat && threads_same,
        format!(
            "dataset {dataset_same}, stage-I checkpoints {checkpoints_same}, stage-II repeat {rft_repeat}, 1 vs 4 threads {threads_same}"
        ),
    )
}

fn main() {
    let selected: Option<BTreeSet<u32>> = std::env::var("WMRFT_ACCEPTANCE")
        .ok()
        .map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect());
    let criteria: [(u32, fn() -> Verdict); 10] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
        (10, criterion_10),
    ];
    let mut failed = Vec::new();
    for (id, f) in criteria {
        if selected.as_ref().is_some_and(|s| !s.contains(&id)) {
            continue;
        }
        let t = Instant::now();
        let v = f();
        let status = if v.pass { "PASS" } else { "FAIL" };
        println!("criterion {id:>2}: {status}  {}  [{:.1} s]", v.detail, t.elapsed().as_secs_f64());
        if !v.pass {
            failed.push(id);
        }
    }
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
