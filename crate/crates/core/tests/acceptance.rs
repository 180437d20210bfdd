//! Acceptance suite: prints one PASS/FAIL line per criterion.
//!
//! Criteria 1-5, 9 and 10 are exact properties and make the run fail when
//! they do not hold. Criteria 6-8 are scaled-down learning experiments; their
//! outcome is reported as measured and does not change the exit status.

mod common;

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use rand::seq::IndexedRandom;
use rand::Rng;
use rewardkit::eval::{collect_records, kendall_tau, pairwise_accuracy, roc_auc, spearman_rho};
use rewardkit::refine::{gae, pretrain_policy, refine, BcConfig, Policy, RefineModality, RefineOutcome};
use rewardkit::reward::{remote_reward, OracleBackend, OracleNoise, RewardBackend, RewardModality, RewardQuery, StubServer};
use rewardkit::sim::collect_demonstrations;
use rewardkit::training::{
    completion_bce, completion_bce_grad, dpo_loss, dpo_loss_grad, head_input, progress_nll, progress_nll_grad, train_head,
    HeadBackend, HeadConfig, HeadDataset,
};
use rewardkit::trajectory::dataset_samples;
use rewardkit::{grid, rng, EvalRecord, MetricsReport, ProgressSample, RefineConfig};
use serde_json::{json, Value};

const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

struct Outcome {
    pass: bool,
    detail: String,
}

fn report(n: usize, title: &str, outcome: &Outcome, elapsed: Duration) {
    let verdict = if outcome.pass { "PASS" } else { "FAIL" };
    println!("criterion {n:>2} {verdict} {title}: {} ({:.1} s)", outcome.detail, elapsed.as_secs_f64());
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let out = f();
    (out, t.elapsed())
}

fn opt_diff(a: Option<f64>, b: Option<f64>) -> f64 {
    match (a, b) {
        (Some(x), Some(y)) => (x - y).abs(),
        (None, None) => 0.0,
        _ => f64::INFINITY,
    }
}

// ---------------------------------------------------------------- criterion 1

fn brute_kendall(x: &[f64], y: &[f64]) -> Option<f64> {
    let (mut c, mut d, mut tx, mut ty) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..x.len() {
        for j in 0..i {
            let (dx, dy) = (x[i] - x[j], y[i] - y[j]);
            match (dx == 0.0, dy == 0.0) {
                (true, true) => {}
                (true, false) => tx += 1.0,
                (false, true) => ty += 1.0,
                (false, false) if (dx > 0.0) == (dy > 0.0) => c += 1.0,
                (false, false) => d += 1.0,
            }
        }
    }
    let denom: f64 = (c + d + tx) * (c + d + ty);
    (x.len() >= 2 && denom > 0.0).then(|| (c - d) / denom.sqrt())
}

fn brute_ranks(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|v| {
            let below = x.iter().filter(|u| *u < v).count() as f64;
            let equal = x.iter().filter(|u| *u == v).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect()
}

fn brute_spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() < 2 {
        return None;
    }
    let (rx, ry) = (brute_ranks(x), brute_ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let sxy: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = rx.iter().map(|a| (a - mx) * (a - mx)).sum();
    let syy: f64 = ry.iter().map(|b| (b - my) * (b - my)).sum();
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}

fn brute_auc(scores: &[f64], labels: &[bool]) -> Option<f64> {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for i in 0..scores.len() {
        for j in 0..scores.len() {
            if labels[i] && !labels[j] {
                pairs += 1.0;
                wins += if scores[i] > scores[j] {
                    1.0
                } else if scores[i] == scores[j] {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    (pairs > 0.0).then(|| wins / pairs)
}

fn brute_pairwise(records: &[EvalRecord]) -> Option<f64> {
    let (mut score, mut pairs) = (0.0, 0.0);
    for i in 0..records.len() {
        for j in 0..i {
            let (a, b) = (&records[i], &records[j]);
            if a.trajectory_id != b.trajectory_id || a.label == b.label {
                continue;
            }
            pairs += 1.0;
            let (dl, dp) = (a.label - b.label, a.predicted - b.predicted);
            score += if dp == 0.0 {
                0.5
            } else if (dl > 0.0) == (dp > 0.0) {
                1.0
            } else {
                0.0
            };
        }
    }
    (pairs > 0.0).then(|| score / pairs)
}

/// Mixes grid values (many ties) with continuous values.
fn random_values(r: &mut impl Rng, n: usize) -> Vec<f64> {
    let tied = r.random_bool(0.5);
    (0..n)
        .map(|_| if tied { grid::value(r.random_range(0..grid::LEVELS)) } else { r.random::<f64>() })
        .collect()
}

fn metric_equivalence() -> Outcome {
    let mut r = rng::seeded(101);
    let mut worst = BTreeMap::from([("kendall_tau", 0.0f64), ("spearman_rho", 0.0), ("roc_auc", 0.0), ("pairwise_acc", 0.0)]);
    for _ in 0..200 {
        let n = r.random_range(1..=30);
        let (x, y) = (random_values(&mut r, n), random_values(&mut r, n));
        let classes: Vec<bool> = (0..n).map(|_| r.random_bool(0.4)).collect();
        let records: Vec<EvalRecord> = (0..n)
            .map(|i| EvalRecord {
                trajectory_id: format!("t{}", r.random_range(0..3)),
                step: i,
                predicted: x[i],
                label: y[i],
                success: None,
                p_true: None,
            })
            .collect();
        let diffs = [
            ("kendall_tau", opt_diff(kendall_tau(&x, &y), brute_kendall(&x, &y))),
            ("spearman_rho", opt_diff(spearman_rho(&x, &y), brute_spearman(&x, &y))),
            ("roc_auc", opt_diff(roc_auc(&x, &classes), brute_auc(&x, &classes))),
            ("pairwise_acc", opt_diff(pairwise_accuracy(&records), brute_pairwise(&records))),
        ];
        for (name, d) in diffs {
            let w = worst.get_mut(name).unwrap();
            *w = w.max(d);
        }
    }
    let max = worst.values().cloned().fold(0.0, f64::max);
    Outcome {
        pass: max <= 1e-12,
        detail: format!("200 instances, max abs diff {max:.1e} {worst:?}"),
    }
}

// ---------------------------------------------------------------- criterion 2

fn direct_gae(rewards: &[f64], values: &[f64], last: f64, dones: &[bool], gamma: f64, lambda: f64) -> Vec<f64> {
    let n = rewards.len();
    let next = |t: usize| if t + 1 < n { values[t + 1] } else { last };
    let delta: Vec<f64> =
        (0..n).map(|t| rewards[t] + if dones[t] { 0.0 } else { gamma * next(t) } - values[t]).collect();
    (0..n)
        .map(|t| {
            let mut sum = 0.0;
            for (l, k) in (t..n).enumerate() {
                sum += (gamma * lambda).powi(l as i32) * delta[k];
                if dones[k] {
                    break;
                }
            }
            sum
        })
        .collect()
}

/// Discounted reward-to-go, bootstrapped from `last` unless an episode ends.
fn reward_to_go(rewards: &[f64], last: f64, dones: &[bool], gamma: f64, t: usize) -> f64 {
    let mut sum = 0.0;
    for (l, k) in (t..rewards.len()).enumerate() {
        sum += gamma.powi(l as i32) * rewards[k];
        if dones[k] {
            return sum;
        }
    }
    sum + gamma.powi((rewards.len() - t) as i32) * last
}

fn gae_equivalence() -> Outcome {
    let mut r = rng::seeded(202);
    let (mut direct, mut collapse, mut to_go) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..500 {
        let n = r.random_range(1..=64);
        let rewards: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
        let values: Vec<f64> = (0..n).map(|_| r.random_range(-2.0..2.0)).collect();
        let dones: Vec<bool> = (0..n).map(|_| r.random_bool(0.1)).collect();
        let last = r.random_range(-2.0..2.0);
        let gamma = r.random_range(0.8..1.0);
        let lambda = r.random_range(0.0..=1.0);

        let (adv, _) = gae(&rewards, &values, last, &dones, gamma, lambda).unwrap();
        let reference = direct_gae(&rewards, &values, last, &dones, gamma, lambda);
        for (a, b) in adv.iter().zip(&reference) {
            direct = direct.max((a - b).abs());
        }

        let (adv0, _) = gae(&rewards, &values, last, &dones, gamma, 0.0).unwrap();
        for t in 0..n {
            let next = if t + 1 < n { values[t + 1] } else { last };
            let delta = rewards[t] + if dones[t] { 0.0 } else { gamma * next } - values[t];
            collapse = collapse.max((adv0[t] - delta).abs());
        }

        let (_, returns1) = gae(&rewards, &values, last, &dones, gamma, 1.0).unwrap();
        for (t, ret) in returns1.iter().enumerate() {
            to_go = to_go.max((ret - reward_to_go(&rewards, last, &dones, gamma, t)).abs());
        }
    }
    Outcome {
        pass: direct <= 1e-12 && collapse <= 1e-10 && to_go <= 1e-10,
        detail: format!("500 instances, direct sum {direct:.1e}, lambda=0 {collapse:.1e}, lambda=1 {to_go:.1e}"),
    }
}

// ---------------------------------------------------------------- criterion 3

fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

fn loss_correctness() -> Outcome {
    const H: f64 = 1e-5;
    let mut r = rng::seeded(303);
    let mut ln2 = 0.0f64;
    let (mut dpo, mut nll, mut bce) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..100 {
        let (w, l) = (r.random_range(-6.0..0.0), r.random_range(-6.0..0.0));
        let beta = r.random_range(0.05..2.0);
        ln2 = ln2.max((dpo_loss(w, l, w, l, beta).unwrap() - std::f64::consts::LN_2).abs());

        let (wr, lr) = (r.random_range(-6.0..0.0), r.random_range(-6.0..0.0));
        let (gw, gl) = dpo_loss_grad(w, l, wr, lr, beta).unwrap();
        let fw = (dpo_loss(w + H, l, wr, lr, beta).unwrap() - dpo_loss(w - H, l, wr, lr, beta).unwrap()) / (2.0 * H);
        let fl = (dpo_loss(w, l + H, wr, lr, beta).unwrap() - dpo_loss(w, l - H, wr, lr, beta).unwrap()) / (2.0 * H);
        dpo = dpo.max(rel_err(gw, fw)).max(rel_err(gl, fl));

        let logits: Vec<f64> = (0..grid::LEVELS).map(|_| r.random_range(-3.0..3.0)).collect();
        let label = grid::value(r.random_range(0..grid::LEVELS));
        let g = progress_nll_grad(&logits, label).unwrap();
        for k in 0..grid::LEVELS {
            let (mut up, mut down) = (logits.clone(), logits.clone());
            up[k] += H;
            down[k] -= H;
            let fd = (progress_nll(&up, label).unwrap() - progress_nll(&down, label).unwrap()) / (2.0 * H);
            nll = nll.max(rel_err(g[k], fd));
        }

        let z = r.random_range(-6.0..6.0);
        let y = if r.random_bool(0.5) { 1.0 } else { 0.0 };
        let fd = (completion_bce(z + H, y) - completion_bce(z - H, y)) / (2.0 * H);
        bce = bce.max(rel_err(completion_bce_grad(z, y), fd));
    }
    Outcome {
        pass: ln2 <= 1e-12 && dpo <= 1e-4 && nll <= 1e-4 && bce <= 1e-4,
        detail: format!("|dpo(ref) - ln 2| {ln2:.1e}; max rel err dpo {dpo:.1e}, progress {nll:.1e}, completion {bce:.1e}"),
    }
}

// ---------------------------------------------------------------- criterion 4

fn oracle_quality() -> (Outcome, Value) {
    let trajs = common::expert_trajectories(40, 80, 0.02);
    let oracle = OracleBackend::noise_free();
    let report = |m| MetricsReport::compute(m, &collect_records(&oracle, m, &trajs, 10).unwrap());
    let (prog, comp, cont) =
        (report(RewardModality::Progress), report(RewardModality::Completion), report(RewardModality::Contrastive));
    let get = |r: &MetricsReport, k: &str| r.get(k).unwrap_or(f64::NAN);
    let (mae, mae_true, pair) = (get(&prog, "mae"), get(&prog, "mae_true"), get(&prog, "pairwise_acc_gap_0.1"));
    let (auc, dir) = (get(&comp, "roc_auc"), get(&cont, "direction_acc_moving"));
    let outcome = Outcome {
        pass: mae <= 0.05 && mae_true <= 0.05 && pair == 1.0 && auc == 1.0 && dir == 1.0,
        detail: format!(
            "{} trajectories: mae {mae:.4}, mae vs true progress {mae_true:.4}, pairwise(gap>0.1) {pair}, completion auc {auc}, direction acc (moving) {dir}",
            prog.n_trajectories
        ),
    };
    let files = json!({"progress": prog, "completion": comp, "contrastive": cont});
    (outcome, files)
}

// ---------------------------------------------------------------- criterion 5

fn hold_violations(out: &RefineOutcome, k: usize, max_steps: usize, weight: f64) -> (usize, Vec<usize>) {
    let mut violations = 0;
    let mut counts = Vec::new();
    for t in &out.rollouts {
        let acting = &t.frames[..max_steps.min(t.frames.len())];
        let queried: Vec<usize> = acting.iter().filter(|f| f.queried == Some(true)).map(|f| f.index).collect();
        counts.push(queried.len());
        if t.frames.len() != max_steps + 1 || queried != (0..max_steps).step_by(k).collect::<Vec<_>>() {
            violations += 1;
            continue;
        }
        for window in acting.chunks(k) {
            let expected = weight * grid::quantize(window[0].true_progress.unwrap_or(f64::NAN));
            if window.iter().any(|f| f.reward != Some(expected)) {
                violations += 1;
            }
        }
    }
    (violations, counts)
}

fn interval_hold() -> (Outcome, Value) {
    let policy = common::cloned_policy(7, 5, 0.0, 50);
    let base = RefineConfig {
        iterations: 1,
        n_envs: 16,
        minibatch_size: 240,
        ppo_epochs: 1,
        eval_episodes: 10,
        log_rollouts: true,
        modality: RefineModality::Prog,
        seed: 7,
        ..RefineConfig::default()
    };
    let oracle = OracleBackend::noise_free();
    let mut summary = json!({});
    let mut pass = true;
    let mut detail = Vec::new();
    for k in [10, 1] {
        let cfg = RefineConfig { query_interval: k, ..base.clone() };
        let out = refine(policy.clone(), &common::env(7), &oracle, &cfg).unwrap();
        let (violations, counts) = hold_violations(&out, k, cfg.steps_per_env, cfg.weight);
        let expected = 60 / k;
        let ok = violations == 0 && !counts.is_empty() && counts.iter().all(|c| *c == expected);
        pass &= ok;
        detail.push(format!("K={k}: {} episodes, queries/episode {:?}, violations {violations}", counts.len(), unique(&counts)));
        summary[format!("k{k}")] = json!({"queries": counts, "violations": violations});
    }
    (Outcome { pass, detail: detail.join("; ") }, summary)
}

fn unique(xs: &[usize]) -> Vec<usize> {
    let mut u = xs.to_vec();
    u.sort_unstable();
    u.dedup();
    u
}

// ------------------------------------------------------------ criteria 6 to 8

/// Behaviour-cloned starting policy of one seed: 20 demonstrations with
/// expert noise 0.02.
fn bc_policy(seed: u64) -> Policy {
    let env = common::env(seed);
    let demos = collect_demonstrations(&env, 20, 0.02).unwrap();
    let bc = BcConfig { seed, ..BcConfig::default() };
    pretrain_policy(&env, &demos, &bc, RefineConfig::default().init_log_std).unwrap()
}

fn refine_seed(policy: &Policy, seed: u64, modality: RefineModality, backend: &dyn RewardBackend) -> Vec<f64> {
    let cfg = RefineConfig { modality, seed, iterations: 30, ..RefineConfig::default() };
    refine(policy.clone(), &common::env(seed), backend, &cfg).unwrap().curve()
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn pct(xs: &[f64]) -> String {
    xs.iter().map(|x| format!("{:.1}", 100.0 * x)).collect::<Vec<_>>().join("/")
}

struct Experiments {
    policies: Vec<Policy>,
    baseline: Vec<f64>,
    prog: Vec<f64>,
    prog_curves: Vec<Vec<f64>>,
}

fn end_to_end() -> (Outcome, Value, Experiments) {
    let policies: Vec<Policy> = SEEDS.iter().map(|&s| bc_policy(s)).collect();
    let curves: Vec<Vec<f64>> = SEEDS
        .iter()
        .zip(&policies)
        .map(|(&s, p)| refine_seed(p, s, RefineModality::Prog, &OracleBackend::noise_free()))
        .collect();
    let baseline: Vec<f64> = curves.iter().map(|c| c[0]).collect();
    let prog: Vec<f64> = curves.iter().map(|c| *c.last().unwrap()).collect();
    let improved = baseline.iter().zip(&prog).filter(|(b, f)| *f - *b >= 0.10 - 1e-12).count();
    let outcome = Outcome {
        pass: improved >= 4,
        detail: format!(
            "BC {} -> refined {} %, >= 10 points on {improved}/5 seeds",
            pct(&baseline),
            pct(&prog)
        ),
    };
    let files = json!({"seeds": SEEDS, "curves": curves});
    (outcome, files, Experiments { policies, baseline, prog, prog_curves: curves })
}

fn reward_ordering(x: &Experiments) -> (Outcome, Value) {
    let env_curves: Vec<Vec<f64>> = SEEDS
        .iter()
        .zip(&x.policies)
        .map(|(&s, p)| refine_seed(p, s, RefineModality::Env, &OracleBackend::noise_free()))
        .collect();
    let degraded_curves: Vec<Vec<f64>> = SEEDS
        .iter()
        .zip(&x.policies)
        .map(|(&s, p)| {
            let noise = OracleNoise { progress_sigma: 0.3, contrastive_flip_p: 0.3, seed: s, ..OracleNoise::default() };
            refine_seed(p, s, RefineModality::Prog, &OracleBackend::new(noise))
        })
        .collect();
    let finals = |cs: &[Vec<f64>]| cs.iter().map(|c| *c.last().unwrap()).collect::<Vec<f64>>();
    let (env, degraded) = (finals(&env_curves), finals(&degraded_curves));
    let (m_env, m_prog, m_deg) = (mean(&env), mean(&x.prog), mean(&degraded));
    let outcome = Outcome {
        pass: m_env >= m_prog && m_prog >= m_deg && m_env - m_deg >= 0.05,
        detail: format!(
            "mean final success env {:.2} % ({}), prog {:.2} % ({}), degraded {:.2} % ({}); outer gap {:.2} points",
            100.0 * m_env,
            pct(&env),
            100.0 * m_prog,
            pct(&x.prog),
            100.0 * m_deg,
            pct(&degraded),
            100.0 * (m_env - m_deg)
        ),
    };
    let files = json!({"env": env_curves, "prog": x.prog_curves, "degraded": degraded_curves});
    (outcome, files)
}

fn head_accuracy(head: &rewardkit::RewardHead, samples: &[ProgressSample]) -> f64 {
    let hits = samples
        .iter()
        .filter(|s| {
            let input = head_input(RewardModality::Progress, &s.observation, None, s.anchor.as_deref());
            (head.predict(&input).unwrap() - s.progress_label).abs() <= 0.1 + 1e-9
        })
        .count();
    hits as f64 / samples.len() as f64
}

fn head_substitution(x: &Experiments) -> (Outcome, Value) {
    let env = rewardkit::EnvConfig { seed: 1000, ..rewardkit::EnvConfig::default() };
    let demos = collect_demonstrations(&env, 200, 0.0).unwrap();
    let samples = dataset_samples(&demos, grid::LEVELS).unwrap();
    let (train, held_out) = samples.split_at(2002);
    let head = train_head(RewardModality::Progress, &HeadDataset::Samples(train.to_vec()), &HeadConfig::default()).unwrap();
    let acc = head_accuracy(&head, held_out);
    let backend = HeadBackend::new(head);
    let curves: Vec<Vec<f64>> = SEEDS
        .iter()
        .zip(&x.policies)
        .map(|(&s, p)| refine_seed(p, s, RefineModality::Prog, &backend))
        .collect();
    let finals: Vec<f64> = curves.iter().map(|c| *c.last().unwrap()).collect();
    let improved = x.baseline.iter().zip(&finals).filter(|(b, f)| *f - *b >= 0.05 - 1e-12).count();
    let outcome = Outcome {
        pass: acc >= 0.8 && improved >= 3,
        detail: format!(
            "head trained on {} samples, held-out Acc@0.1 {acc:.3} ({} samples); BC {} -> refined {} %, >= 5 points on {improved}/5 seeds",
            train.len(),
            held_out.len(),
            pct(&x.baseline),
            pct(&finals)
        ),
    };
    let files = json!({"held_out_acc": acc, "curves": curves});
    (outcome, files)
}

// ---------------------------------------------------------------- criterion 9

fn rogue_server(reward: f64) -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap().to_string();
    thread::spawn(move || {
        for stream in listener.incoming().flatten() {
            let mut line = String::new();
            if BufReader::new(&stream).read_line(&mut line).is_err() {
                continue;
            }
            let q: Value = serde_json::from_str(&line).unwrap_or(Value::Null);
            let reply = json!({"id": q["id"], "reward": reward, "valid": true, "latency_ms": 0.0});
            let _ = writeln!(&stream, "{reply}");
        }
    });
    addr
}

fn wire_conformance() -> Outcome {
    let trajs = common::expert_trajectories(9, 10, 0.02);
    let noise = OracleNoise { progress_sigma: 0.1, contrastive_flip_p: 0.2, completion_fp: 0.1, completion_fn: 0.1, seed: 9 };
    let oracle = Arc::new(OracleBackend::new(noise).with_table(common::table(&trajs)));
    let server = StubServer::bind(oracle.clone(), "127.0.0.1:0").unwrap().spawn().unwrap();
    let addr = server.local_addr().to_string();

    let obs: Vec<Vec<f64>> = trajs.iter().flat_map(|t| t.frames.iter().map(|f| f.observation.clone())).collect();
    let mut r = rng::seeded(909);
    let queries: Vec<RewardQuery> = (0..1000)
        .map(|i| {
            let m = *RewardModality::ALL.choose(&mut r).unwrap();
            let mut q = RewardQuery::new(format!("q{i:04}"), m, "pick", obs.choose(&mut r).unwrap().clone());
            if m == RewardModality::Contrastive {
                q = q.with_previous(obs.choose(&mut r).unwrap().clone());
            }
            q
        })
        .collect();
    let queries = Arc::new(queries);
    let workers: Vec<_> = (0..8)
        .map(|w| {
            let (queries, addr, oracle) = (Arc::clone(&queries), addr.clone(), Arc::clone(&oracle));
            thread::spawn(move || {
                let (mut mismatched, mut illegal, mut failed) = (0, 0, 0);
                for q in queries.iter().skip(w).step_by(8) {
                    match remote_reward(q, &addr, 5000) {
                        Ok(resp) => {
                            let local = oracle.evaluate(q).unwrap();
                            mismatched += usize::from(resp.request_id != q.request_id || resp.reward != local.reward);
                            illegal += usize::from(!resp.valid || !q.modality.is_legal(resp.reward));
                        }
                        Err(_) => failed += 1,
                    }
                }
                (mismatched, illegal, failed)
            })
        })
        .collect();
    let (mut mismatched, mut illegal, mut failed) = (0, 0, 0);
    for w in workers {
        let (m, i, f) = w.join().unwrap();
        mismatched += m;
        illegal += i;
        failed += f;
    }

    let cases = [
        (RewardModality::Progress, 1.37, 1.0),
        (RewardModality::Progress, 0.37, 0.4),
        (RewardModality::Progress, -0.2, 0.0),
        (RewardModality::Completion, 0.4, 0.0),
        (RewardModality::Contrastive, -3.0, -1.0),
        (RewardModality::Contrastive, 0.2, 0.0),
    ];
    let mut injection_errors = 0;
    for (m, injected, expected) in cases {
        let mut q = RewardQuery::new("inject", m, "pick", vec![0.5; 7]);
        if m == RewardModality::Contrastive {
            q = q.with_previous(vec![0.4; 7]);
        }
        match remote_reward(&q, &rogue_server(injected), 2000) {
            Ok(resp) if !resp.valid && resp.reward == expected => {}
            _ => injection_errors += 1,
        }
    }
    Outcome {
        pass: mismatched + illegal + failed + injection_errors == 0,
        detail: format!(
            "1000 queries over 8 connections: {mismatched} id/value mismatches, {illegal} illegal, {failed} failed; {} injection cases, {injection_errors} wrong",
            cases.len()
        ),
    }
}

// --------------------------------------------------------------------- driver

/// Runs criteria 4-8 and returns their outcomes and metric files.
fn run_learning_criteria(log: bool) -> Vec<(usize, &'static str, Outcome, Value, Duration)> {
    let mut out = Vec::new();
    let mut push = |n, title, (outcome, files): (Outcome, Value), elapsed: Duration| {
        if log {
            report(n, title, &outcome, elapsed);
        }
        out.push((n, title, outcome, files, elapsed));
    };
    let (o, t) = timed(oracle_quality);
    push(4, "noise-free oracle quality", o, t);
    let (o, t) = timed(interval_hold);
    push(5, "interval-hold contract", o, t);
    let ((o6, f6, x), t) = timed(end_to_end);
    push(6, "end-to-end refinement", (o6, f6), t);
    let (o, t) = timed(|| reward_ordering(&x));
    push(7, "reward-quality ordering", o, t);
    let (o, t) = timed(|| head_substitution(&x));
    push(8, "trained-head substitution", o, t);
    out
}

fn main() {
    // Honour `cargo test <filter>` and `--list` like the default harness.
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    if let Some(filter) = args.iter().find(|a| !a.starts_with('-')) {
        if !"acceptance".contains(filter.as_str()) {
            return;
        }
    }

    let mut hard_failures = Vec::new();
    let mut passed = 0;
    let mut record = |n: usize, pass: bool, hard: bool| {
        if pass {
            passed += 1;
        } else if hard {
            hard_failures.push(n);
        }
    };

    let (o, t) = timed(metric_equivalence);
    let o = Outcome { pass: o.pass && t < Duration::from_secs(10), ..o };
    report(1, "metric-oracle equivalence", &o, t);
    record(1, o.pass, true);

    let (o, t) = timed(gae_equivalence);
    let o = Outcome { pass: o.pass && t < Duration::from_secs(5), ..o };
    report(2, "GAE equivalence", &o, t);
    record(2, o.pass, true);

    let (o, t) = timed(loss_correctness);
    let o = Outcome { pass: o.pass && t < Duration::from_secs(30), ..o };
    report(3, "loss correctness", &o, t);
    record(3, o.pass, true);

    let first = run_learning_criteria(true);
    for (n, _, o, _, _) in &first {
        record(*n, o.pass, matches!(n, 4 | 5));
    }

    let (o, t) = timed(wire_conformance);
    let o = Outcome { pass: o.pass && t < Duration::from_secs(30), ..o };
    report(9, "wire protocol conformance", &o, t);
    record(9, o.pass, true);

    // Criterion 10: rerun 4-8 and compare the metric files byte for byte.
    let dir = tempfile::tempdir().unwrap();
    let (second, t) = timed(|| run_learning_criteria(false));
    let mut differing = Vec::new();
    for ((n, _, _, a, _), (_, _, _, b, _)) in first.iter().zip(&second) {
        let (pa, pb) = (dir.path().join(format!("c{n}-a.json")), dir.path().join(format!("c{n}-b.json")));
        std::fs::write(&pa, serde_json::to_string_pretty(a).unwrap()).unwrap();
        std::fs::write(&pb, serde_json::to_string_pretty(b).unwrap()).unwrap();
        if std::fs::read(&pa).unwrap() != std::fs::read(&pb).unwrap() {
            differing.push(*n);
        }
    }
    let o = Outcome {
        pass: differing.is_empty(),
        detail: format!("reran criteria 4-8; metric files differing: {differing:?}"),
    };
    report(10, "determinism", &o, t);
    record(10, o.pass, true);

    println!("acceptance: {passed}/10 criteria passed");
    if !hard_failures.is_empty() {
        eprintln!("exact criteria failed: {hard_failures:?}");
        std::process::exit(1);
    }
}
