//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits non-zero
//! if any criterion fails.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use irs_tucker::channel::synthesize_channels;
use irs_tucker::estimators::{design_pilots, simulate_rx, to_tensor, tucker_als, tucker_hosvd, Factors};
use irs_tucker::estimators::{ls_estimate, AlsOptions};
use irs_tucker::sim::presets::{preset_plan, Preset};
use irs_tucker::sim::{run_experiment, trial_rng, ExperimentOutcome, ExperimentSpec};
use irs_tucker::tensor::{khatri_rao, kron, Tensor3};
use irs_tucker::{Algorithm, CMatrix, SweepValue, SystemConfig};

use common::{brute_tucker, max_abs_diff, rand_mat, rand_tensor, rng};
use rand_chacha::ChaCha8Rng;

const TRIALS: usize = 500;
const CONVERGENCE_TRIALS: usize = 200;

struct Verdict {
    id: u8,
    title: &'static str,
    pass: bool,
    detail: String,
}

fn db_gap(o: &ExperimentOutcome, at: f64, worse: Algorithm, better: Algorithm) -> f64 {
    let v = SweepValue::Scalar(at);
    let get = |a| o.point(&v, a).and_then(|p| p.nmse_db).expect("point present");
    get(worse) - get(better)
}

fn within(x: f64, centre: f64, tol: f64) -> bool {
    (x - centre).abs() <= tol
}

fn with_trials(mut e: ExperimentSpec, trials: usize) -> ExperimentSpec {
    e.trials = trials;
    e
}

fn crit1_noiseless() -> Verdict {
    let start = Instant::now();
    let mut e = with_trials(preset_plan(Preset::Fig3).unwrap().experiments.remove(0), 20);
    e.name = "noiseless".into();
    e.sweep_values = vec![SweepValue::Scalar(f64::INFINITY)];
    let o = run_experiment(&e).unwrap();
    let worst = Algorithm::ALL
        .iter()
        .map(|&a| (a, o.point(&e.sweep_values[0], a).unwrap().nmse_db.unwrap()))
        .fold((Algorithm::Ls, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
    let elapsed = start.elapsed();
    Verdict {
        id: 1,
        title: "noiseless exactness",
        pass: worst.1 <= -160.0 && elapsed < Duration::from_secs(10),
        detail: format!("worst {} at {:.1} dB, {:.2} s", worst.0, worst.1, elapsed.as_secs_f64()),
    }
}

fn crit2_fig3(o: &ExperimentOutcome, elapsed: Duration) -> Verdict {
    use Algorithm::*;
    let gaps = [
        ("ALS-vs-LS", db_gap(o, 30.0, Ls, Als), 10.0, 2.0),
        ("HOSVD-vs-LS", db_gap(o, 30.0, Ls, Hosvd), 10.0, 2.0),
        ("ALS-vs-KRF", db_gap(o, 30.0, Krf, Als), 5.0, 2.0),
        ("HOSVD-vs-KRF", db_gap(o, 30.0, Krf, Hosvd), 5.0, 2.0),
        ("ALS-vs-HOSVD", db_gap(o, 30.0, Hosvd, Als), 1.0, 1.0),
    ];
    let pass = gaps.iter().all(|&(_, g, c, t)| within(g, c, t)) && elapsed < Duration::from_secs(300);
    let detail = gaps
        .iter()
        .map(|(name, g, c, t)| format!("{name} {g:.2} dB (want {c}±{t})"))
        .collect::<Vec<_>>()
        .join(", ");
    Verdict {
        id: 2,
        title: "SNR sweep gaps at 30 dB",
        pass,
        detail: format!("{detail}; {:.1} s", elapsed.as_secs_f64()),
    }
}

fn slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

fn crit3_slope(o: &ExperimentOutcome) -> Verdict {
    let pts: Vec<(f64, f64)> = o
        .nmse_curve(Algorithm::Ls)
        .into_iter()
        .map(|(v, db)| match v {
            SweepValue::Scalar(x) => (x, db),
            SweepValue::Pair(_) => unreachable!(),
        })
        .collect();
    let s = slope(&pts);
    Verdict {
        id: 3,
        title: "LS NMSE-SNR slope",
        pass: (-1.2..=-0.8).contains(&s),
        detail: format!("slope {s:.4} dB/dB"),
    }
}

fn crit4_rician() -> Verdict {
    let e = with_trials(preset_plan(Preset::Fig2).unwrap().experiments.remove(0), TRIALS);
    let o = run_experiment(&e).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for a in Algorithm::ALL {
        let curve: Vec<f64> = o.nmse_curve(a).into_iter().map(|(_, db)| db).collect();
        let strict = curve.windows(2).all(|w| w[1] < w[0]);
        pass &= strict;
        let shown: Vec<String> = curve.iter().map(|d| format!("{d:.2}")).collect();
        parts.push(format!("{a} [{}]{}", shown.join(" "), if strict { "" } else { " not decreasing" }));
    }
    Verdict {
        id: 4,
        title: "Rician-factor trend",
        pass,
        detail: parts.join("; "),
    }
}

fn iteration_curve(e: ExperimentSpec) -> Vec<f64> {
    let o = run_experiment(&with_trials(e, CONVERGENCE_TRIALS)).unwrap();
    o.points.iter().map(|p| p.mean_iterations).collect()
}

fn non_increasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] <= w[0])
}

fn fmt_curve(xs: &[f64]) -> String {
    xs.iter().map(|x| format!("{x:.1}")).collect::<Vec<_>>().join(" ")
}

fn crit5_convergence() -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    let mut at_zero = Vec::new();
    for e in preset_plan(Preset::Fig4).unwrap().experiments {
        let name = e.name.clone();
        let curve = iteration_curve(e);
        let ok = non_increasing(&curve);
        pass &= ok;
        at_zero.push(curve[0]);
        parts.push(format!("{name} vs SNR [{}]{}", fmt_curve(&curve), if ok { "" } else { " rises" }));
    }
    let paths_ok = at_zero.last().unwrap() > at_zero.first().unwrap();
    pass &= paths_ok;
    parts.push(format!(
        "(4,4) {:.1} vs (1,1) {:.1} at 0 dB{}",
        at_zero.last().unwrap(),
        at_zero.first().unwrap(),
        if paths_ok { "" } else { " not larger" }
    ));
    for e in preset_plan(Preset::Fig5).unwrap().experiments {
        let name = e.name.clone();
        let curve = iteration_curve(e);
        let ok = non_increasing(&curve);
        pass &= ok;
        parts.push(format!("{name} vs N [{}]{}", fmt_curve(&curve), if ok { "" } else { " rises" }));
    }
    Verdict {
        id: 5,
        title: "ALS iteration trends",
        pass,
        detail: parts.join("; "),
    }
}

/// Received LS tensor for one random noisy instance of `cfg`.
fn noisy_ls_tensor(cfg: &SystemConfig, trial: usize) -> (Tensor3, ChaCha8Rng) {
    let mut rng = trial_rng(cfg.seed, trial);
    let ch = synthesize_channels(cfg, &mut rng).unwrap();
    let pd = design_pilots(cfg).unwrap();
    let rx = simulate_rx(&ch, &pd, cfg.snr_db, &mut rng).unwrap();
    let ls = ls_estimate(&rx.stacked(), &pd, cfg.bs_antennas).unwrap();
    (to_tensor(&ls.r_hat, cfg.bs_antennas, cfg.ue_antennas).unwrap(), rng)
}

fn random_instance_config(i: usize) -> SystemConfig {
    let shapes = [(1, 4), (2, 2), (1, 1), (2, 1)];
    let (l1, l2) = shapes[i % shapes.len()];
    SystemConfig {
        bs_paths: l1,
        ue_paths: l2,
        snr_db: (i % 7) as f64 * 5.0,
        seed: 6000 + i as u64,
        ..SystemConfig::base()
    }
}

fn crit6_descent() -> Verdict {
    let mut worst = f64::NEG_INFINITY;
    for i in 0..1000 {
        let cfg = random_instance_config(i);
        let (x, mut rng) = noisy_ls_tensor(&cfg, i);
        let est = tucker_als(&x, cfg.bs_paths, cfg.ue_paths, &AlsOptions::default(), &mut rng).unwrap();
        for w in est.error_trace.windows(2) {
            worst = worst.max(w[1] - w[0]);
        }
    }
    Verdict {
        id: 6,
        title: "ALS monotone descent",
        pass: worst <= 1e-12,
        detail: format!("largest step-to-step increase {worst:.3e} over 1000 instances"),
    }
}

fn crit7_tensor_oracles() -> Verdict {
    let mut r = rng(7);
    let mut worst_roundtrip = 0.0_f64;
    let mut worst_nmode = 0.0_f64;
    let mut worst_identity = 0.0_f64;
    for d1 in 1..=4 {
        for d2 in 1..=4 {
            for d3 in 1..=4 {
                let dims = [d1, d2, d3];
                let x = rand_tensor(&mut r, dims);
                for mode in 1..=3 {
                    let back = Tensor3::fold(&x.unfold(mode).unwrap(), mode, dims).unwrap();
                    worst_roundtrip = worst_roundtrip.max(back.distance_sqr(&x).unwrap().sqrt());
                }
                let g = rand_tensor(&mut r, [2, 3, 2]);
                let a = [rand_mat(&mut r, d1, 2), rand_mat(&mut r, d2, 3), rand_mat(&mut r, d3, 2)];
                let fast = g.tucker_product(&a[0], &a[1], &a[2]).unwrap();
                let slow = brute_tucker(&g, [&a[0], &a[1], &a[2]]);
                worst_nmode = worst_nmode.max(fast.distance_sqr(&slow).unwrap().sqrt());
            }
        }
    }
    for _ in 0..50 {
        // (A kron B)(C kron D) = AC kron BD and (A kron B)(C kr D) = AC kr BD
        let (a, b) = (rand_mat(&mut r, 3, 2), rand_mat(&mut r, 2, 4));
        let (c, d) = (rand_mat(&mut r, 2, 3), rand_mat(&mut r, 4, 3));
        let lhs = kron(&a, &b) * kron(&c, &d);
        worst_identity = worst_identity.max(max_abs_diff(&lhs, &kron(&(&a * &c), &(&b * &d))));
        let lhs = kron(&a, &b) * khatri_rao(&c, &d).unwrap();
        worst_identity = worst_identity.max(max_abs_diff(&lhs, &khatri_rao(&(&a * &c), &(&b * &d)).unwrap()));
    }
    let mut worst_channel = 0.0_f64;
    for seed in 0..50 {
        let cfg = SystemConfig {
            bs_paths: 1 + (seed as usize % 2),
            ue_paths: 2,
            ..SystemConfig::base()
        };
        let ch = synthesize_channels(&cfg, &mut rng(seed)).unwrap();
        let core = irs_tucker::tensor::build_core_tensor(&ch.core_vector(), cfg.bs_paths, cfg.ue_paths).unwrap();
        let model = core.tucker_product(&ch.a_rx, &ch.a_tx.conjugate(), &ch.p_b).unwrap();
        let rel = (model.distance_sqr(&ch.r_tensor).unwrap() / ch.r_tensor.norm_sqr()).sqrt();
        worst_channel = worst_channel.max(rel);
    }
    let pass = worst_roundtrip == 0.0 && worst_nmode <= 1e-12 && worst_identity <= 1e-12 && worst_channel <= 1e-10;
    Verdict {
        id: 7,
        title: "tensor-algebra oracles",
        pass,
        detail: format!(
            "fold/unfold {worst_roundtrip:.1e}, n-mode vs triple loop {worst_nmode:.1e}, \
             Kronecker/Khatri-Rao {worst_identity:.1e}, channel Tucker identity {worst_channel:.1e}"
        ),
    }
}

fn crit8_hosvd_orthonormality() -> Verdict {
    let mut worst = 0.0_f64;
    let mut runs = 0;
    let configs = (0..500).map(random_instance_config).chain((0..100).map(|i| SystemConfig {
        bs_antennas: 8,
        ue_antennas: 8,
        slots: 128,
        bs_paths: 4,
        ue_paths: 4,
        snr_db: 0.0,
        seed: 9000 + i,
        ..SystemConfig::base()
    }));
    for (i, cfg) in configs.enumerate() {
        let (x, _) = noisy_ls_tensor(&cfg, i);
        let est = tucker_hosvd(&x, cfg.bs_paths, cfg.ue_paths).unwrap();
        let Some(Factors::Tucker(f)) = est.factors else {
            panic!("HOSVD returns Tucker factors");
        };
        for u in [&f.a_rx, &f.a_tx, &f.p_b] {
            let gram = u.adjoint() * u;
            let eye = CMatrix::identity(u.ncols(), u.ncols());
            worst = worst.max(max_abs_diff(&gram, &eye));
        }
        runs += 1;
    }
    Verdict {
        id: 8,
        title: "HOSVD factor orthonormality",
        pass: worst <= 1e-10,
        detail: format!("max |U^H U - I| {worst:.2e} over {runs} runs"),
    }
}

fn crit9_complexity() -> Verdict {
    let e = preset_plan(Preset::Fig6).unwrap().experiments.remove(0);
    let o = run_experiment(&e).unwrap();
    let mut worst_ratio = 0.0_f64;
    let mut ls_dominates = true;
    for v in &e.sweep_values {
        let ls = o.point(v, Algorithm::Ls).unwrap().flops as f64;
        for a in Algorithm::ALL {
            let total = o.point(v, a).unwrap().flops as f64;
            worst_ratio = worst_ratio.max(total / ls);
            // the shared LS step must be the largest single term
            ls_dominates &= total - ls <= ls;
        }
    }
    Verdict {
        id: 9,
        title: "complexity model",
        pass: worst_ratio <= 2.0 && ls_dominates,
        detail: format!("max flops ratio to LS {worst_ratio:.3}"),
    }
}

fn main() -> ExitCode {
    let start = Instant::now();
    let fig3 = with_trials(preset_plan(Preset::Fig3).unwrap().experiments.remove(0), TRIALS);
    let fig3_start = Instant::now();
    let fig3_outcome = run_experiment(&fig3).unwrap();
    let fig3_elapsed = fig3_start.elapsed();
    let verdicts = [
        crit1_noiseless(),
        crit2_fig3(&fig3_outcome, fig3_elapsed),
        crit3_slope(&fig3_outcome),
        crit4_rician(),
        crit5_convergence(),
        crit6_descent(),
        crit7_tensor_oracles(),
        crit8_hosvd_orthonormality(),
        crit9_complexity(),
    ];
    let mut failed = 0;
    for v in &verdicts {
        println!("[{}] {}. {}: {}", if v.pass { "PASS" } else { "FAIL" }, v.id, v.title, v.detail);
        failed += usize::from(!v.pass);
    }
    println!(
        "acceptance: {} of {} criteria passed in {:.1} s",
        verdicts.len() - failed,
        verdicts.len(),
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
