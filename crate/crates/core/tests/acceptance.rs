//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use safejam::checkpoint::Checkpoint;
use safejam::env::{ActionVector, ModeMachine, SensingMode};
use safejam::harness::{run_inference, run_training, RunTrace, TrainingRun};
use safejam::output::{write_figure, write_trace, Figure};
use safejam::shield::{correct_action, kkt_report, solve_relaxed};
use safejam::RunConfig;

const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

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

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut worst_x, mut worst_obj, mut worst_kkt) = (0.0f64, 0.0f64, 0.0f64);
    let mut dual_ok = true;
    for _ in 0..1000 {
        let n = 8;
        let k: Vec<f64> = (0..n)
            .map(|_| loop {
                let k: f64 = rng.gen_range(-3.0..=3.0);
                if k.abs() >= 1e-6 {
                    break k;
                }
            })
            .collect();
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..=2.0)).collect();
        let a = ActionVector::one_hot(rng.gen_range(1..=n), n).unwrap();
        let res = correct_action(&a, &b, &k, 0.5).unwrap();
        let mut grid_obj = 0.0;
        let mut closed_obj = 0.0;
        for c in 0..n {
            let an = a.entries()[c];
            let x = common::grid_channel(an, b[c], k[c]);
            worst_x = worst_x.max((x - res.relaxed[c]).abs() / x.abs().max(1.0));
            grid_obj += (x - an).powi(2);
            closed_obj += (res.relaxed[c] - an).powi(2);
        }
        worst_obj = worst_obj.max((grid_obj - closed_obj).abs() / f64::max(1.0, grid_obj));
        dual_ok &= res.multipliers.iter().all(|&l| l >= 0.0);
        let rep = kkt_report(a.entries(), &b, &k, &solve_relaxed(a.entries(), &b, &k));
        worst_kkt = worst_kkt.max(rep.slackness).max(rep.dual);
    }
    let elapsed = start.elapsed();
    let pass = worst_x <= 1e-6 && worst_obj <= 1e-6 && worst_kkt <= 1e-9 && dual_ok && elapsed < Duration::from_secs(10);
    verdict(
        pass,
        format!(
            "KKT closed form vs grid oracle, 1000 instances: solution err {worst_x:.1e}, objective err {worst_obj:.1e}, \
             slackness/dual {worst_kkt:.1e}, {:.2}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_2() -> Verdict {
    let start = Instant::now();
    let sequences = common::all_sequences(6);
    let mut checked = 0usize;
    let mut mismatches = 0usize;
    for mode in [SensingMode::Searching, SensingMode::Tracking] {
        for seq in &sequences {
            let mut machine = ModeMachine::with_history(mode, &[]);
            let got: Vec<SensingMode> = seq.iter().map(|&d| machine.observe(d)).collect();
            checked += 1;
            if got != common::direct_modes(mode, &[], seq) {
                mismatches += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    verdict(
        mismatches == 0 && elapsed < Duration::from_secs(1),
        format!(
            "mode machine vs direct rule encoding: {checked} sequences (length <= 6), {mismatches} mismatches, {:.3}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_3() -> Verdict {
    let worst = |v: Vec<f64>| v.into_iter().fold(0.0, f64::max);
    let actor = worst(common::draws::actor(100, 31));
    let critic = worst(common::draws::critic(100, 32));
    let constraint = worst(common::draws::constraint(100, 33));
    verdict(
        actor < 1e-4 && critic < 1e-4 && constraint < 1e-4,
        format!(
            "finite differences (h=1e-5), 100 draws each: actor {actor:.1e}, critic {critic:.1e}, constraint {constraint:.1e}"
        ),
    )
}

struct SeedRun {
    seed: u64,
    training: TrainingRun,
    inference: RunTrace,
    elapsed: Duration,
}

fn train_and_infer(cfg: &RunConfig) -> SeedRun {
    let start = Instant::now();
    let training = run_training(cfg).expect("training runs");
    let mut rng = training.rng.clone();
    let inference = run_inference(&training.artifacts, cfg, &mut rng).expect("inference runs");
    SeedRun {
        seed: cfg.seed,
        training,
        inference,
        elapsed: start.elapsed(),
    }
}

fn config(seed: u64, shield: bool) -> RunConfig {
    RunConfig {
        seed,
        shield,
        ..RunConfig::default()
    }
}

fn converged(run: &SeedRun) -> bool {
    run.inference.success_percent() == Some(100.0)
}

fn criterion_4(runs: &[SeedRun], cfg: &RunConfig) -> Verdict {
    let wins = runs.iter().filter(|r| converged(r)).count();
    let slowest = runs.iter().map(|r| r.elapsed).max().unwrap_or_default();
    let rates: Vec<String> = runs
        .iter()
        .map(|r| match r.inference.success_percent() {
            Some(p) => format!("seed {}: {p:.1}%", r.seed),
            None => format!("seed {}: n/a", r.seed),
        })
        .collect();
    let pass = wins >= 4
        && cfg.train_episodes <= 5000
        && cfg.inference_timeslots >= 1000
        && slowest < Duration::from_secs(300);
    verdict(
        pass,
        format!(
            "convergence: {wins}/5 seeds at 100% over {} inference slots after {} episodes ({}); slowest seed {:.1}s",
            cfg.inference_timeslots,
            cfg.train_episodes,
            rates.join(", "),
            slowest.as_secs_f64()
        ),
    )
}

fn criterion_5(runs: &[SeedRun], unshielded: &SeedRun) -> Verdict {
    let shielded: Vec<usize> = runs.iter().map(|r| r.inference.conflicts()).collect();
    let open = unshielded.inference.conflicts();
    verdict(
        shielded.iter().all(|&c| c == 0) && open > 0,
        format!(
            "safety: shield on conflicts per seed {shielded:?} over {} slots; shield off conflicts {open}",
            unshielded.inference.len()
        ),
    )
}

fn criterion_6(runs: &[SeedRun]) -> Verdict {
    let conv: Vec<&SeedRun> = runs.iter().filter(|r| converged(r)).collect();
    let shares: Vec<String> = conv
        .iter()
        .map(|r| {
            let searching = r.inference.records.iter().filter(|x| x.mode == 1 && x.mode_after == 1).count();
            format!("seed {}: {searching}/{}", r.seed, r.inference.len())
        })
        .collect();
    let all = conv
        .iter()
        .all(|r| r.inference.records.iter().all(|x| x.mode == 1 && x.mode_after == 1));
    verdict(
        !conv.is_empty() && all,
        format!("mode occupancy (converged shield-on seeds), searching slots: {}", shares.join(", ")),
    )
}

/// Share of slots whose executed channel is safe-optimal per the closed-form
/// sweeps: the sensor's channel, or anything but the user's on a collision.
fn schedule_agreement(trace: &RunTrace) -> f64 {
    let ok = trace
        .records
        .iter()
        .filter(|r| {
            let (sensor, user) = common::safe_optimal(r.slot, 8);
            let executed = r.executed as u64;
            if sensor == user {
                executed != user
            } else {
                executed == sensor
            }
        })
        .count();
    ok as f64 / trace.len().max(1) as f64
}

fn criterion_7(runs: &[SeedRun]) -> Verdict {
    let conv: Vec<&SeedRun> = runs.iter().filter(|r| converged(r)).collect();
    let agreements: Vec<f64> = conv.iter().map(|r| schedule_agreement(&r.inference)).collect();
    let listed: Vec<String> = conv
        .iter()
        .zip(&agreements)
        .map(|(r, a)| format!("seed {}: {:.1}%", r.seed, a * 100.0))
        .collect();
    verdict(
        !conv.is_empty() && agreements.iter().all(|&a| a >= 0.99),
        format!("schedule oracle agreement: {}", listed.join(", ")),
    )
}

fn csv_bytes(trace: &RunTrace) -> Vec<u8> {
    let mut buf = Vec::new();
    write_trace(&mut buf, trace).unwrap();
    for fig in Figure::ALL {
        write_figure(&mut buf, trace, fig).unwrap();
    }
    buf
}

fn criterion_8(first: &SeedRun, repeat: &SeedRun) -> Verdict {
    let same_training = first.training.trace == repeat.training.trace
        && first.training.artifacts == repeat.training.artifacts
        && csv_bytes(&first.training.trace) == csv_bytes(&repeat.training.trace);
    let same_inference = csv_bytes(&first.inference) == csv_bytes(&repeat.inference);

    let cfg = config(first.seed, true);
    let ckpt = Checkpoint::new(
        cfg.clone(),
        first.training.artifacts.clone(),
        first.training.rng.clone(),
        first.training.episodes,
        first.training.trace.len() as u64,
    );
    let restored = Checkpoint::from_json(&ckpt.to_json().unwrap()).unwrap();
    let mut rng = restored.rng.clone();
    let replay = run_inference(&restored.artifacts, &restored.config, &mut rng).unwrap();
    let round_trip = restored == ckpt && csv_bytes(&replay) == csv_bytes(&first.inference);
    verdict(
        same_training && same_inference && round_trip,
        format!(
            "determinism: repeated seed {} identical training {same_training}, inference {same_inference}; \
             checkpoint round trip replays inference {round_trip}",
            first.seed
        ),
    )
}

fn main() -> ExitCode {
    let mut verdicts = vec![criterion_1(), criterion_2(), criterion_3()];

    let (runs, unshielded, repeat) = std::thread::scope(|scope| {
        let shielded: Vec<_> = SEEDS
            .iter()
            .map(|&s| scope.spawn(move || train_and_infer(&config(s, true))))
            .collect();
        let open = scope.spawn(|| train_and_infer(&config(SEEDS[0], false)));
        let repeat = scope.spawn(|| train_and_infer(&config(SEEDS[0], true)));
        (
            shielded.into_iter().map(|h| h.join().unwrap()).collect::<Vec<_>>(),
            open.join().unwrap(),
            repeat.join().unwrap(),
        )
    });
    let cfg = RunConfig::default();
    verdicts.push(criterion_4(&runs, &cfg));
    verdicts.push(criterion_5(&runs, &unshielded));
    verdicts.push(criterion_6(&runs));
    verdicts.push(criterion_7(&runs));
    verdicts.push(criterion_8(&runs[0], &repeat));

    let mut failed = 0;
    for (i, v) in verdicts.iter().enumerate() {
        println!("criterion {}: {} | {}", i + 1, if v.pass { "PASS" } else { "FAIL" }, v.detail);
        failed += usize::from(!v.pass);
    }
    println!("acceptance: {}/{} criteria passed", verdicts.len() - failed, verdicts.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
