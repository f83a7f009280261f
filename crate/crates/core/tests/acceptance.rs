//! Acceptance suite. Runs every criterion in order, printing one
//! `PASS`/`FAIL` line per criterion and a summary. The process exits
//! non-zero on a failed criterion only when `ACCEPTANCE_STRICT=1`.
//!
//! `ACCEPTANCE_CRITERIA=1,2,6` restricts the run to the listed criteria.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use offload_core::agent::{
    run_training_episodes, train, AgentConfig, EpisodeMetrics, GreedyPolicy, RandomPolicy, TrainOutput,
};
use offload_core::channel::{
    dbm_to_watts, link_rate, los_probability, m2q_link, mean_path_loss, n2m_link, secrecy_rate, secure_tx_time,
    tx_energy, ChannelParams,
};
use offload_core::compute::{compute_energy, compute_time, task_totals, weighted_cost, ComputeParams, Task, TaskLegs};
use offload_core::config::{parse_config, ExperimentConfig};
use offload_core::env::{Env, EnvConfig};
use offload_core::experiment::{mean_std, run_oracle_gap, run_train, sweep_row, PolicyKind};
use offload_core::knapsack::select_local_candidates;
use offload_core::nn::{init_network, kink_sensitive, QNetwork};
use offload_core::oracle::{cost_recompute, knapsack_exhaustive, Snapshot};
use offload_core::topology::{elevation_angle, Node, Position3};

const SEEDS: [u64; 3] = [1, 2, 3];

thread_local! {
    static FAILED: std::cell::RefCell<Vec<usize>> = const { std::cell::RefCell::new(Vec::new()) };
}

/// Shared settings of the learning criteria.
const BASE_CONFIG: &str = r#"
[system]
slots_per_episode = 10

[experiment]
preset = "consistent"
seeds = [1, 2, 3]
"#;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome { passed, detail: detail.into() }
}

fn base() -> ExperimentConfig {
    parse_config(BASE_CONFIG, None).expect("acceptance config")
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    (a - b).abs() / a.abs().max(b.abs())
}

// Straight-line channel and compute formulas, written without reference
// to the library.
mod reference {
    use super::PI;

    pub const C: f64 = 2.998e8;

    pub fn k0(fc: f64) -> f64 {
        4.0 * PI * fc / C
    }

    pub fn elevation_deg(g: [f64; 3], a: [f64; 3]) -> f64 {
        let d = dist(g, a);
        (180.0 / PI) * ((a[2] - g[2]) / d).asin()
    }

    pub fn dist(p: [f64; 3], q: [f64; 3]) -> f64 {
        ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt()
    }

    pub fn seconds(cycles: f64, hz: f64) -> f64 {
        cycles / hz
    }

    pub fn p_los(theta: f64, a: f64, b: f64) -> f64 {
        1.0 / (1.0 + a * (-b * (theta - a)).exp())
    }

    pub fn loss(p: f64, d: f64, eta1: f64, eta2: f64, fc: f64, iota: f64) -> f64 {
        (eta1 * p + eta2 * (1.0 - p)) * (k0(fc) * d).powf(iota)
    }

    pub fn rate(bw: f64, share: f64, power: f64, loss: f64, noise: f64) -> f64 {
        bw / share * (1.0 + power / loss / noise).log2()
    }
}

fn random_params(rng: &mut ChaCha8Rng) -> ChannelParams {
    ChannelParams {
        a: rng.random_range(4.0..16.0),
        b: rng.random_range(0.03..0.6),
        eta_los: rng.random_range(1.0..3.0),
        eta_nlos: rng.random_range(5.0..40.0),
        carrier_freq: rng.random_range(0.7e9..6e9),
        path_loss_exp: rng.random_range(2.0..4.0),
        bandwidth: rng.random_range(1e6..5e7),
        noise_power: dbm_to_watts(rng.random_range(-110.0..-80.0)),
        p_device: dbm_to_watts(rng.random_range(0.0..25.0)),
        p_uav: dbm_to_watts(rng.random_range(10.0..33.0)),
    }
}

fn random_point(rng: &mut ChaCha8Rng, ground: bool) -> [f64; 3] {
    let z = if ground { 0.0 } else { rng.random_range(1.0..100.0) };
    [rng.random_range(0.0..100.0), rng.random_range(0.0..100.0), z]
}

fn pos(p: [f64; 3]) -> Position3 {
    Position3::new(p[0], p[1], p[2])
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    let mut track = |e: f64| worst = worst.max(e);
    for _ in 0..10_000 {
        let prm = random_params(&mut rng);
        let g = random_point(&mut rng, true);
        let u = random_point(&mut rng, false);
        let t = random_point(&mut rng, false);
        let eve = random_point(&mut rng, false);
        let share = rng.random_range(1..12usize);

        let theta = reference::elevation_deg(g, u);
        track(rel(elevation_angle(&pos(g), &pos(u)).unwrap(), theta));
        let p = reference::p_los(theta, prm.a, prm.b);
        track(rel(los_probability(theta, &prm), p));
        let d = reference::dist(g, u);
        let l = reference::loss(p, d, prm.eta_los, prm.eta_nlos, prm.carrier_freq, prm.path_loss_exp);
        track(rel(mean_path_loss(p, d, &prm, false).unwrap(), l));
        let l_los = prm.eta_los * (reference::k0(prm.carrier_freq) * d).powf(prm.path_loss_exp);
        track(rel(mean_path_loss(0.3, d, &prm, true).unwrap(), l_los));
        let r = reference::rate(prm.bandwidth, share as f64, prm.p_device, l, prm.noise_power);
        track(rel(link_rate(prm.bandwidth, share, prm.p_device, 1.0 / l, prm.noise_power), r));

        // First hop, end to end. The secrecy rate is a difference, so it
        // is compared on the scale of the legitimate rate.
        let legit = r;
        let pe = reference::p_los(reference::elevation_deg(g, eve), prm.a, prm.b);
        let le = reference::loss(pe, reference::dist(g, eve), prm.eta_los, prm.eta_nlos, prm.carrier_freq, prm.path_loss_exp);
        let eve_rate = reference::rate(prm.bandwidth, share as f64, prm.p_device, le, prm.noise_power);
        let link = n2m_link(&pos(g), &pos(u), &pos(eve), share, &prm).unwrap();
        track(rel(link.legit_rate, legit));
        track(rel(link.eve_rate, eve_rate));
        track((link.secrecy_rate - (legit - eve_rate).max(0.0)).abs() / legit);

        // Second hop, line of sight only.
        let lt = prm.eta_los * (reference::k0(prm.carrier_freq) * reference::dist(u, t)).powf(prm.path_loss_exp);
        let lte = prm.eta_los * (reference::k0(prm.carrier_freq) * reference::dist(u, eve)).powf(prm.path_loss_exp);
        let rt = reference::rate(prm.bandwidth, share as f64, prm.p_uav, lt, prm.noise_power);
        let rte = reference::rate(prm.bandwidth, share as f64, prm.p_uav, lte, prm.noise_power);
        let hop = m2q_link(&pos(u), &pos(t), &pos(eve), share, &prm).unwrap();
        track(rel(hop.legit_rate, rt));
        track(rel(hop.eve_rate, rte));
        track((hop.secrecy_rate - (rt - rte).max(0.0)).abs() / rt);

        let x = rng.random_range(0.0..1e8);
        let y = rng.random_range(1e3..1e8);
        track(rel(secrecy_rate(y, x), (y - x).max(0.0) + 0.0));
        let bits = rng.random_range(1e5..2e7);
        track(rel(secure_tx_time(bits, y).unwrap(), bits / y));
        track(rel(tx_energy(prm.p_uav, bits / y), prm.p_uav * (bits / y)));

        let cycles = rng.random_range(1e6..3e8);
        let f = rng.random_range(1e7..3e9);
        let kappa = 10f64.powf(rng.random_range(-30.0..-15.0));
        track(rel(compute_time(cycles, f), cycles / f));
        track(rel(compute_energy(kappa, f, cycles), kappa * f * f * cycles));

        let cp = ComputeParams {
            alpha: rng.random_range(0.0..1.0),
            beta: rng.random_range(0.0..1.0),
            charge_first_hop_on_offload: rng.random_bool(0.5),
            ..ComputeParams::table1()
        };
        let task = Task { device: 0, task_type: 0, data_bits: bits, priority: rng.random_range(0.1..1.0), cpu_cycles: cycles };
        let legs = TaskLegs {
            first_hop_time: rng.random_range(0.0..10.0),
            first_hop_energy: rng.random_range(0.0..1.0),
            second_hop_time: rng.random_range(0.0..10.0),
            second_hop_energy: rng.random_range(0.0..1.0),
            decision_time: rng.random_range(0.0..0.1),
            compute_time: rng.random_range(0.0..5.0),
            compute_energy: rng.random_range(0.0..10.0),
        };
        let local = task_totals(&task, true, None, &legs, &cp).unwrap();
        let t_loc = legs.first_hop_time + legs.decision_time + legs.compute_time;
        let e_loc = legs.first_hop_energy + legs.compute_energy;
        track(rel(local.total_delay, t_loc));
        track(rel(local.total_energy, e_loc));
        track(rel(local.weighted_cost, task.priority * (cp.alpha * t_loc + cp.beta * e_loc)));
        let edge = task_totals(&task, false, Some(Node::Mec), &legs, &cp).unwrap();
        let t_edg = legs.first_hop_time + legs.second_hop_time + legs.decision_time + legs.compute_time;
        let mut e_edg = legs.second_hop_energy + legs.compute_energy;
        if cp.charge_first_hop_on_offload {
            e_edg += legs.first_hop_energy;
        }
        track(rel(edge.total_delay, t_edg));
        track(rel(edge.total_energy, e_edg));
        track(rel(weighted_cost(task.priority, t_edg, e_edg, cp.alpha, cp.beta), task.priority * (cp.alpha * t_edg + cp.beta * e_edg)));
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 1e-12 && elapsed < Duration::from_secs(5),
        format!("10^4 samples, worst relative error {worst:.2e}, {:.2}s", elapsed.as_secs_f64()),
    )
}

fn criterion_2() -> Outcome {
    let prm = ChannelParams::rural();
    let p = los_probability(11.25, &prm);
    let p_ref = reference::p_los(11.25, 11.25, 0.06);
    let p_ok = rel(p, p_ref) <= 1e-15 && rel(p, 1.0 / 12.25) <= 1e-15;
    let k = prm.k0();
    let k_ref = reference::k0(2.4e9);
    let k_ok = (k - k_ref).abs() <= 1e-2 && rel(k, k_ref) <= 1e-15;
    let t = compute_time(1e8, 5e8);
    let t_ok = t == 0.2 && t == reference::seconds(1e8, 5e8);
    outcome(
        p_ok && k_ok && t_ok,
        format!(
            "p_los(11.25) = {p} (1/12.25 = {}); K0 = {k:.6} vs oracle 4*pi*2.4e9/2.998e8 = {k_ref:.6} \
             (the quoted 100.53 corresponds to c = 3e8); compute_time = {t}",
            1.0 / 12.25
        ),
    )
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut mismatches = 0;
    let mut overweight = 0;
    for _ in 0..500 {
        let n = rng.random_range(0..=15usize);
        let tasks: Vec<Task> = (0..n)
            .map(|i| Task {
                device: i,
                task_type: 0,
                // Sizes on a coarse grid so exact ties occur.
                data_bits: (rng.random_range(1..40u32) as f64) * 0.1 * 8e6,
                priority: [0.3, 0.6, 0.9][rng.random_range(0..3)],
                cpu_cycles: 1e8,
            })
            .collect();
        let cap = rng.random_range(0.0..12.0) * 8e6;
        let dp = select_local_candidates(&tasks, cap);
        let ex = knapsack_exhaustive(&tasks, cap).unwrap();
        if dp.total_value != ex.total_value || dp.selected != ex.selected {
            mismatches += 1;
        }
        if dp.total_weight > cap {
            overweight += 1;
        }
    }
    let elapsed = start.elapsed();
    outcome(
        mismatches == 0 && overweight == 0 && elapsed < Duration::from_secs(10),
        format!("500 instances: {mismatches} value or selection mismatches, {overweight} over capacity, {:.2}s", elapsed.as_secs_f64()),
    )
}

fn batch_loss(net: &QNetwork, xs: &[Vec<f64>], actions: &[usize], targets: &[f64]) -> f64 {
    let mut total = 0.0;
    for ((x, &a), &y) in xs.iter().zip(actions).zip(targets) {
        let q = net.forward(x).unwrap();
        total += (q[a] - y).powi(2);
    }
    total / xs.len() as f64
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let h = 1e-5;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    let (mut checked, mut excluded) = (0usize, 0usize);
    for case in 0..20 {
        let dims: Vec<usize> = if case < 2 {
            vec![2 + 3 * (case + 2), 32, 64, 128, 1 << (case + 2)]
        } else {
            let depth = rng.random_range(1..=3);
            let mut d = vec![rng.random_range(2..12)];
            d.extend((0..depth).map(|_| rng.random_range(3..24)));
            d.push(rng.random_range(2..9));
            d
        };
        let net = init_network(&dims, 100 + case as u64).unwrap();
        let batch = if case < 2 { 2 } else { 6 };
        let xs: Vec<Vec<f64>> = (0..batch).map(|_| (0..dims[0]).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let actions: Vec<usize> = (0..batch).map(|_| rng.random_range(0..*dims.last().unwrap())).collect();
        let targets: Vec<f64> = (0..batch).map(|_| rng.random_range(-2.0..2.0)).collect();
        let x = Array2::from_shape_fn((batch, dims[0]), |(i, j)| xs[i][j]);
        let (_, grad) = net.loss_and_gradient(x.view(), &actions, &targets).unwrap();
        let analytic = grad.flatten();

        let mut kinks = vec![false; net.n_params()];
        for x in &xs {
            for (k, s) in kinks.iter_mut().zip(kink_sensitive(&net, x, h)) {
                *k |= s;
            }
        }
        let params = net.params_flat();
        let mut probe = net.clone();
        for i in 0..params.len() {
            if kinks[i] {
                excluded += 1;
                continue;
            }
            let mut p = params.clone();
            p[i] = params[i] + h;
            probe.set_params_flat(&p).unwrap();
            let up = batch_loss(&probe, &xs, &actions, &targets);
            p[i] = params[i] - h;
            probe.set_params_flat(&p).unwrap();
            let down = batch_loss(&probe, &xs, &actions, &targets);
            let fd = (up - down) / (2.0 * h);
            // Relative error, with gradients below 1e-6 compared absolutely.
            let err = (analytic[i] - fd).abs() / analytic[i].abs().max(fd.abs()).max(1e-6);
            worst = worst.max(err);
            checked += 1;
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 1e-4 && elapsed < Duration::from_secs(30),
        format!(
            "20 nets, {checked} parameters checked, {excluded} kink-excluded, worst relative error {worst:.2e}, {:.1}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    let mut pairs = 0;
    let mut instance = 0u64;
    while pairs < 1000 {
        instance += 1;
        let mut cfg = if rng.random_bool(0.5) { EnvConfig::consistent() } else { EnvConfig::table1() };
        cfg.n_uavs = rng.random_range(1..=4);
        cfg.n_devices = rng.random_range(cfg.n_uavs..=10);
        cfg.n_task_types = rng.random_range(1..=3);
        cfg.compute.charge_first_hop_on_offload = rng.random_bool(0.5);
        cfg.seed = instance;
        let mut env = Env::new(cfg).unwrap();
        for _ in 0..20 {
            if env.is_done() || pairs >= 1000 {
                break;
            }
            let joint: Vec<usize> = env
                .observations()
                .iter()
                .map(|o| {
                    let open: Vec<usize> = (0..o.mask.len()).filter(|&a| o.mask[a]).collect();
                    open[rng.random_range(0..open.len())]
                })
                .collect();
            let snapshot = Snapshot::of(&env);
            let cost = cost_recompute(&snapshot, &snapshot.decisions(&env, &joint)).unwrap();
            let reward = env.step(&joint).unwrap().global_reward;
            worst = worst.max(rel(-reward, cost));
            pairs += 1;
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 1e-9 && elapsed < Duration::from_secs(10),
        format!("{pairs} pairs over {instance} deployments, worst relative gap {worst:.2e}, {:.2}s", elapsed.as_secs_f64()),
    )
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = base();
    cfg.out_dir = dir.path().to_path_buf();
    assert!(cfg.gap.episodes <= 300 && cfg.gap.slots == 100);
    let (_, study) = run_oracle_gap(&cfg).unwrap();
    let elapsed = start.elapsed();
    outcome(
        study.mean_ratio <= 1.10,
        format!(
            "M={} K={} N={}, {} slots x {} seeds after {} episodes: mean ratio {:.5} (random {:.5}), {:.0}s",
            cfg.gap.n_uavs,
            cfg.gap.n_task_types,
            cfg.gap.n_devices,
            cfg.gap.slots,
            cfg.seeds.len(),
            cfg.gap.episodes,
            study.mean_ratio,
            study.random_mean_ratio,
            elapsed.as_secs_f64()
        ),
    )
}

/// Mean cumulative reward over the final tenth of the episodes.
fn final_decile(metrics: &[EpisodeMetrics]) -> f64 {
    let k = (metrics.len() / 10).max(1);
    metrics[metrics.len() - k..].iter().map(|m| m.cumulative_reward).sum::<f64>() / k as f64
}

/// Least-squares slope of the moving-average reward over the final tenth,
/// on the curve averaged across runs.
fn final_decile_slope(runs: &[&[EpisodeMetrics]]) -> f64 {
    let len = runs[0].len();
    let k = (len / 10).max(2);
    let ys: Vec<f64> = (len - k..len)
        .map(|e| runs.iter().map(|r| r[e].moving_avg_reward).sum::<f64>() / runs.len() as f64)
        .collect();
    let n = ys.len() as f64;
    let xm = (n - 1.0) / 2.0;
    let ym = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, y) in ys.iter().enumerate() {
        let dx = i as f64 - xm;
        sxy += dx * (y - ym);
        sxx += dx * dx;
    }
    sxy / sxx
}

struct Ranking {
    with_mask: Vec<TrainOutput>,
    no_mask: Vec<TrainOutput>,
    random: Vec<Vec<EpisodeMetrics>>,
    elapsed: Duration,
}

fn ranking_runs() -> Ranking {
    let start = Instant::now();
    let cfg = base();
    let run = |masking: bool| -> Vec<TrainOutput> {
        SEEDS
            .iter()
            .map(|&s| train(&cfg.env, &AgentConfig { masking, ..cfg.agent.clone() }, s).unwrap())
            .collect()
    };
    let with_mask = run(true);
    let no_mask = run(false);
    let random = SEEDS
        .iter()
        .map(|&s| run_training_episodes(&mut RandomPolicy::new(s, cfg.random_all_actions), &cfg.env, s, cfg.agent.episodes).unwrap().episodes)
        .collect();
    Ranking { with_mask, no_mask, random, elapsed: start.elapsed() }
}

fn criterion_5(r: &Ranking) -> Outcome {
    let cfg = base();
    let executed: u64 = r.with_mask.iter().map(|o| o.masked_executions).sum();
    outcome(
        executed == 0 && cfg.agent.episodes >= 200,
        format!(
            "M={} K={} N={}, {} seeds x {} episodes with masking: {executed} masked actions executed",
            cfg.env.n_uavs,
            cfg.env.n_task_types,
            cfg.env.n_devices,
            SEEDS.len(),
            cfg.agent.episodes
        ),
    )
}

fn criterion_8(r: &Ranking) -> Outcome {
    let w: Vec<f64> = r.with_mask.iter().map(|o| final_decile(&o.metrics)).collect();
    let nm: Vec<f64> = r.no_mask.iter().map(|o| final_decile(&o.metrics)).collect();
    let rd: Vec<f64> = r.random.iter().map(|m| final_decile(m)).collect();
    let (mw, sw) = mean_std(&w);
    let (mnm, snm) = mean_std(&nm);
    let (mrd, srd) = mean_std(&rd);
    let spread = sw.max(snm);
    outcome(
        mw > mnm && mnm > mrd && mw - mnm > spread,
        format!(
            "N=10 final-decile reward: with_mask {mw:.1} (sd {sw:.1}), no_mask {mnm:.1} (sd {snm:.1}), \
             random {mrd:.1} (sd {srd:.1}); margin {:.1} vs sd {spread:.1}; {:.0}s",
            mw - mnm,
            r.elapsed.as_secs_f64()
        ),
    )
}

fn criterion_9() -> Outcome {
    let start = Instant::now();
    let mut cfg = base();
    cfg.agent.episodes = 300;
    cfg.eval_episodes = 20;
    let mut rows = Vec::new();
    for &n in &cfg.sweep_devices {
        let env = EnvConfig { n_devices: n, ..cfg.env.clone() };
        for kind in PolicyKind::ALL {
            let evals: Vec<_> = SEEDS
                .iter()
                .map(|&s| offload_core::experiment::run_cell(&env, &cfg, kind, s, cfg.eval_episodes).unwrap().eval)
                .collect();
            rows.push(sweep_row(n, kind, &evals.iter().collect::<Vec<_>>()));
        }
    }
    let mut ok = true;
    let mut parts = Vec::new();
    for kind in PolicyKind::ALL {
        let series: Vec<_> = rows.iter().filter(|r| r.policy == kind.name()).collect();
        let up = |f: fn(&offload_core::experiment::SweepRow) -> f64| series.windows(2).all(|p| f(p[1]) > f(p[0]));
        ok &= up(|r| r.mean_total_delay_s) && up(|r| r.mean_total_energy_j);
        parts.push(format!(
            "{}: delay {} s, energy {} J",
            kind.name(),
            series.iter().map(|r| format!("{:.0}", r.mean_total_delay_s)).collect::<Vec<_>>().join("/"),
            series.iter().map(|r| format!("{:.3}", r.mean_total_energy_j)).collect::<Vec<_>>().join("/")
        ));
    }
    outcome(
        ok,
        format!("N = {:?}; {}; {:.0}s", cfg.sweep_devices, parts.join("; "), start.elapsed().as_secs_f64()),
    )
}

fn criterion_10(r: &Ranking) -> Outcome {
    let start = Instant::now();
    let cfg = base();
    let mut cells = Vec::new();
    for gamma in [0.9, 0.95] {
        for batch in [150, 300] {
            let runs: Vec<TrainOutput> = if gamma == cfg.agent.gamma && batch == cfg.agent.batch_size {
                r.with_mask.clone()
            } else {
                let agent = AgentConfig { gamma, batch_size: batch, ..cfg.agent.clone() };
                SEEDS.iter().map(|&s| train(&cfg.env, &agent, s).unwrap()).collect()
            };
            let finals: Vec<f64> = runs.iter().map(|o| final_decile(&o.metrics)).collect();
            let slope = final_decile_slope(&runs.iter().map(|o| o.metrics.as_slice()).collect::<Vec<_>>());
            cells.push((gamma, batch, mean_std(&finals).0, slope));
        }
    }
    let means: Vec<f64> = cells.iter().map(|c| c.2).collect();
    let hi = means.iter().cloned().fold(f64::MIN, f64::max);
    let lo = means.iter().cloned().fold(f64::MAX, f64::min);
    let centre = means.iter().sum::<f64>() / means.len() as f64;
    let spread = (hi - lo) / centre.abs();
    let converged = cells.iter().all(|c| c.3 >= 0.0);
    let random_slope = final_decile_slope(&r.random.iter().map(|m| m.as_slice()).collect::<Vec<_>>());
    outcome(
        spread <= 0.10 && converged,
        format!(
            "{}; relative spread {spread:.4}; random baseline slope on the same episodes {random_slope:+.3}; {:.0}s",
            cells
                .iter()
                .map(|(g, b, m, s)| format!("gamma {g} batch {b}: reward {m:.1}, final slope {s:+.3}"))
                .collect::<Vec<_>>()
                .join("; "),
            start.elapsed().as_secs_f64()
        ),
    )
}

fn criterion_11() -> Outcome {
    let start = Instant::now();
    let text = format!("{BASE_CONFIG}\n");
    let mut cfg = parse_config(&text.replace("[experiment]\n", "[agent]\nepisodes = 40\nbatch_size = 32\n\n[experiment]\n"), None).unwrap();
    cfg.seeds = vec![7];
    let read = |dir: &std::path::Path| std::fs::read(dir.join("seed7/metrics.csv")).unwrap();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    cfg.out_dir = a.path().to_path_buf();
    run_train(&cfg).unwrap();
    cfg.out_dir = b.path().to_path_buf();
    run_train(&cfg).unwrap();
    let (x, y) = (read(a.path()), read(b.path()));
    // A second greedy evaluation must also agree.
    let nets = offload_core::experiment::load_checkpoints(&cfg, 7).unwrap();
    let e1 = offload_core::agent::run_distributed(&mut GreedyPolicy::new(nets.clone(), true), &cfg.env, 7, 3).unwrap();
    let e2 = offload_core::agent::run_distributed(&mut GreedyPolicy::new(nets, true), &cfg.env, 7, 3).unwrap();
    outcome(
        x == y && e1 == e2,
        format!("two training runs wrote {} and {} bytes, identical: {}; {:.1}s", x.len(), y.len(), x == y, start.elapsed().as_secs_f64()),
    )
}

fn run(n: usize, name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let result = catch_unwind(AssertUnwindSafe(f));
    let (passed, detail) = match result {
        Ok(o) => (o.passed, o.detail),
        Err(e) => {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            (false, format!("panicked: {msg}"))
        }
    };
    println!("criterion {n:>2} {} {name}: {detail}", if passed { "PASS" } else { "FAIL" });
    if !passed {
        FAILED.with(|f| f.borrow_mut().push(n));
    }
    passed
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        println!("acceptance: test");
        return ExitCode::SUCCESS;
    }
    // Under `cargo test <filter>`, run only when the filter names this suite.
    let filters: Vec<&String> = args.iter().filter(|a| !a.starts_with('-')).collect();
    if !filters.is_empty() && !filters.iter().any(|f| "acceptance criterion".contains(f.as_str())) {
        return ExitCode::SUCCESS;
    }
    let selected: Option<Vec<usize>> = std::env::var("ACCEPTANCE_CRITERIA")
        .ok()
        .map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect());
    let want = |n: usize| selected.as_ref().is_none_or(|s| s.contains(&n));

    let mut all = true;
    if want(1) {
        all &= run(1, "formula oracle suite", criterion_1);
    }
    if want(2) {
        all &= run(2, "spot values", criterion_2);
    }
    if want(3) {
        all &= run(3, "knapsack exactness", criterion_3);
    }
    if want(4) {
        all &= run(4, "gradient check", criterion_4);
    }
    if want(6) {
        all &= run(6, "reward/objective equivalence", criterion_6);
    }
    if want(7) {
        all &= run(7, "oracle optimality gap", criterion_7);
    }
    if want(5) || want(8) || want(10) {
        let ranking = catch_unwind(ranking_runs);
        match &ranking {
            Ok(r) => {
                if want(5) {
                    all &= run(5, "mask safety", || criterion_5(r));
                }
                if want(8) {
                    all &= run(8, "ranking trend", || criterion_8(r));
                }
                if want(10) {
                    all &= run(10, "hyperparameter robustness", || criterion_10(r));
                }
            }
            Err(_) => {
                for n in [5, 8, 10] {
                    if want(n) {
                        all &= run(n, "training runs", || outcome(false, "training panicked"));
                    }
                }
            }
        }
    }
    if want(9) {
        all &= run(9, "load trend", criterion_9);
    }
    if want(11) {
        all &= run(11, "determinism", criterion_11);
    }
    let failed: Vec<String> = FAILED.with(|f| f.borrow().iter().map(|n| n.to_string()).collect());
    if failed.is_empty() {
        println!("acceptance: all selected criteria passed");
    } else {
        println!("acceptance: failed criteria {}", failed.join(", "));
    }
    let strict = std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if all || !strict { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
