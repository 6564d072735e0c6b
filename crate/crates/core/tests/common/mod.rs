//! Independent oracles shared by the integration and acceptance tests.
//! Nothing here calls into the code under test for the quantity it checks.

#![allow(dead_code)]

use safejam::env::SensingMode;
use safejam::RunConfig;

/// Brute-force minimiser of `(x - a)^2` subject to `b + k*x <= 1`: a uniform
/// grid over a box that contains the answer, then repeated local refinement
/// around the best feasible grid point.
pub fn grid_channel(a: f64, b: f64, k: f64) -> f64 {
    let feasible = |x: f64| b + k * x <= 1.0;
    let edge = (1.0 - b) / k;
    let mut lo = a.min(edge) - 1.0;
    let mut hi = a.max(edge) + 1.0;
    let width = hi - lo;
    let mut points = ((width / 1e-4).ceil() as usize).clamp(1_000, 200_000);
    let mut best = f64::NAN;
    loop {
        let step = (hi - lo) / points as f64;
        let mut best_obj = f64::INFINITY;
        for i in 0..=points {
            let x = lo + step * i as f64;
            if feasible(x) {
                let obj = (x - a) * (x - a);
                if obj < best_obj {
                    best_obj = obj;
                    best = x;
                }
            }
        }
        assert!(best.is_finite(), "grid found no feasible point");
        if step <= 1e-14 * best.abs().max(1.0) {
            return best;
        }
        lo = best - 2.0 * step;
        hi = best + 2.0 * step;
        points = 1_000;
    }
}

/// Joint brute force over two channels on a 2-D grid with refinement.
pub fn grid_pair(a: [f64; 2], b: [f64; 2], k: [f64; 2]) -> [f64; 2] {
    let feasible = |x: [f64; 2]| (0..2).all(|n| b[n] + k[n] * x[n] <= 1.0);
    let mut lo = [0.0; 2];
    let mut hi = [0.0; 2];
    for n in 0..2 {
        let edge = (1.0 - b[n]) / k[n];
        lo[n] = a[n].min(edge) - 1.0;
        hi[n] = a[n].max(edge) + 1.0;
    }
    let mut points = 400usize;
    let mut best = [f64::NAN; 2];
    loop {
        let step = [(hi[0] - lo[0]) / points as f64, (hi[1] - lo[1]) / points as f64];
        let mut best_obj = f64::INFINITY;
        for i in 0..=points {
            for j in 0..=points {
                let x = [lo[0] + step[0] * i as f64, lo[1] + step[1] * j as f64];
                if feasible(x) {
                    let obj = (x[0] - a[0]).powi(2) + (x[1] - a[1]).powi(2);
                    if obj < best_obj {
                        best_obj = obj;
                        best = x;
                    }
                }
            }
        }
        assert!(best[0].is_finite(), "grid found no feasible point");
        if (0..2).all(|n| step[n] <= 1e-13 * best[n].abs().max(1.0)) {
            return best;
        }
        for n in 0..2 {
            lo[n] = best[n] - 2.0 * step[n];
            hi[n] = best[n] + 2.0 * step[n];
        }
        points = 40;
    }
}

/// Mode sequence produced by the transition rules written straight from
/// their prose statement. Detections are kept since the last mode change.
///
/// - searching: the third hit among the last four detections starts tracking
/// - tracking: the second hit among the last three detections locks on
/// - tracking: four misses in a row fall back to searching
/// - lock-on never changes
pub fn direct_modes(start: SensingMode, initial: &[bool], seq: &[bool]) -> Vec<SensingMode> {
    let mut mode = start;
    let mut since: Vec<bool> = initial.to_vec();
    let mut out = Vec::with_capacity(seq.len());
    for &d in seq {
        if mode != SensingMode::LockOn {
            since.push(d);
            let tail = |w: usize| &since[since.len().saturating_sub(w)..];
            let hits = |w: usize| tail(w).iter().filter(|&&x| x).count();
            let next = match mode {
                SensingMode::Searching if d && hits(4) >= 3 => SensingMode::Tracking,
                SensingMode::Tracking if d && hits(3) >= 2 => SensingMode::LockOn,
                SensingMode::Tracking if since.len() >= 4 && hits(4) == 0 => SensingMode::Searching,
                m => m,
            };
            if next != mode {
                mode = next;
                since.clear();
            }
        }
        out.push(mode);
    }
    out
}

/// Every boolean sequence of length `0..=max_len`.
pub fn all_sequences(max_len: usize) -> Vec<Vec<bool>> {
    let mut out = vec![Vec::new()];
    for len in 1..=max_len {
        for bits in 0..(1u32 << len) {
            out.push((0..len).map(|i| bits >> i & 1 == 1).collect());
        }
    }
    out
}

/// Central-difference gradient of `f` at `params` with step `h`.
pub fn numeric_gradient(params: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut p = params.to_vec();
    (0..p.len())
        .map(|i| {
            let orig = p[i];
            p[i] = orig + h;
            let up = f(&p);
            p[i] = orig - h;
            let down = f(&p);
            p[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `‖a − b‖ / max(‖a‖, ‖b‖)`.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let scale = norm(a).max(norm(b));
    if scale == 0.0 {
        0.0
    } else {
        norm(&diff) / scale
    }
}

/// Safe-optimal set for the reference schedules, computed straight from
/// the sweep formulas: the sensor climbs one channel per slot, the user
/// descends one.
pub fn safe_optimal(slot: u64, channels: u64) -> (u64, u64) {
    let sensor = (slot - 1) % channels + 1;
    let user = ((channels as i64 - slot as i64 - 1).rem_euclid(channels as i64) + 1) as u64;
    (sensor, user)
}

/// Small, fast configuration for pipeline tests.
pub fn quick_config() -> RunConfig {
    RunConfig::parse(
        "train_episodes = 40\n\
         inference_timeslots = 300\n\
         constraint_warmup_steps = 400\n\
         constraint_epochs = 20\n\
         constraint_refresh_interval = 10\n\
         constraint_refresh_epochs = 2\n\
         actor_hidden = 16\n\
         critic_hidden = 16\n\
         constraint_hidden = 16\n",
    )
    .expect("quick config parses")
}

pub mod draws {
    //! Random parameter/state draws for finite-difference gradient checks.

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use safejam::agent::{critic_loss, critic_loss_grad, log_prob, log_prob_grad, PolicyParams, StateEncoding, ValueParams};
    use safejam::env::{ActionVector, Scenario, SensingMode, SpectrumState};
    use safejam::nn::Mlp;
    use safejam::shield::{constraint_loss, constraint_loss_grad, ConstraintModel, ConstraintSample};

    use super::{numeric_gradient, relative_error};

    pub const H: f64 = 1e-5;

    fn random_state(rng: &mut ChaCha8Rng) -> SpectrumState {
        let mode = match rng.gen_range(0..3) {
            0 => SensingMode::Searching,
            1 => SensingMode::Tracking,
            _ => SensingMode::LockOn,
        };
        let prev = rng.gen_range(1..=8);
        Scenario::reference().observe(rng.gen_range(1..=64), ActionVector::one_hot(prev, 8).unwrap(), mode)
    }

    /// Init plus uniform noise so draws cover more than the initial scale.
    fn jitter(net: &mut Mlp, rng: &mut ChaCha8Rng) {
        let scale = rng.gen_range(0.0..0.5);
        for p in net.params_mut() {
            *p += rng.gen_range(-scale..=scale);
        }
    }

    /// Relative error of `∇ log π(a|s)` for `draws` random settings.
    pub fn actor(draws: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..draws)
            .map(|_| {
                let mut theta = PolicyParams::init(8, 64, &mut rng);
                jitter(&mut theta.net, &mut rng);
                let s = StateEncoding::encode(&random_state(&mut rng));
                let ch = rng.gen_range(1..=8);
                let analytic = log_prob_grad(&theta, &s, ch);
                let mut probe = theta.clone();
                let numeric = numeric_gradient(theta.net.params(), H, |p| {
                    probe.net.params_mut().copy_from_slice(p);
                    log_prob(&probe, &s, ch)
                });
                relative_error(&analytic, &numeric)
            })
            .collect()
    }

    /// Relative error of the critic's loss gradient (target held fixed).
    pub fn critic(draws: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..draws)
            .map(|_| {
                let mut w = ValueParams::init(8, 64, &mut rng);
                jitter(&mut w.net, &mut rng);
                let s = StateEncoding::encode(&random_state(&mut rng));
                let target = rng.gen_range(-10.0..10.0);
                let analytic = critic_loss_grad(&w, &s, target);
                let mut probe = w.clone();
                let numeric = numeric_gradient(w.net.params(), H, |p| {
                    probe.net.params_mut().copy_from_slice(p);
                    critic_loss(&probe, &s, target)
                });
                relative_error(&analytic, &numeric)
            })
            .collect()
    }

    /// Relative error of the surrogate-residual gradient on random batches.
    pub fn constraint(draws: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..draws)
            .map(|_| {
                let mut model = ConstraintModel::init(8, 32, &mut rng);
                jitter(&mut model.net, &mut rng);
                let batch: Vec<ConstraintSample> = (0..4)
                    .map(|_| {
                        let s = random_state(&mut rng);
                        let a = ActionVector::one_hot(rng.gen_range(1..=8), 8).unwrap();
                        let next = random_state(&mut rng);
                        ConstraintSample::new(&s, &a, &next)
                    })
                    .collect();
                let analytic = constraint_loss_grad(&model, &batch);
                let mut probe = model.clone();
                let numeric = numeric_gradient(model.net.params(), H, |p| {
                    probe.net.params_mut().copy_from_slice(p);
                    constraint_loss(&probe, &batch)
                });
                relative_error(&analytic, &numeric)
            })
            .collect()
    }
}
