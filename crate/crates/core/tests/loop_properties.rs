use escal_core::beamformer::QWord;
use escal_core::escal::{Fx, HighPass, LoopConfig, SelfCalLoop};
use escal_core::oracle::{code_distance, oracle_single};
use escal_core::scenario::{simulate, DeformationTrajectory, InitMode, Scenario};
use escal_core::Complex64;
use proptest::prelude::*;

/// Discrete first-order high-pass `alpha (1 - z^-1) / (1 - alpha z^-1)`.
fn hpf_response(alpha: f64, omega: f64) -> Complex64 {
    let z_inv = Complex64::from_polar(1.0, -omega);
    alpha * (1.0 - z_inv) / (1.0 - alpha * z_inv)
}

#[test]
fn hpf_gain_at_dither_frequency() {
    let cfg = LoopConfig::default();
    let ts = cfg.tick_period();
    let mut h = HighPass::new(cfg.hpf_cutoff, ts);
    let omega = cfg.omega_p * ts;
    let amp = 8.0;
    let mut peak: f64 = 0.0;
    for n in 0..128 * 40 {
        let y = h
            .step(Fx::from_f64(amp * (omega * n as f64).sin()))
            .0
            .to_f64();
        if n >= 128 * 30 {
            peak = peak.max(y.abs());
        }
    }
    let ratio = cfg.omega_p / cfg.hpf_cutoff;
    let analog = ratio / (1.0 + ratio * ratio).sqrt();
    assert!((analog - 0.98639).abs() < 1e-5);
    assert!(
        (peak / amp - analog).abs() <= 0.03 * analog,
        "{}",
        peak / amp
    );
}

/// Per-period means of the demodulated product with the estimate frozen at
/// `center` and the objective `f`.
fn demod_means<F: FnMut(u8) -> f64>(
    cfg: &LoopConfig,
    center: u8,
    periods: usize,
    mut f: F,
) -> Vec<f64> {
    let frozen = LoopConfig {
        a_v: 0.0,
        ..cfg.clone()
    };
    let mut l = SelfCalLoop::new(frozen, center).unwrap();
    let len = cfg.lut_len;
    let mut code = l.perturbed_code();
    // let the HPF settle for four periods
    for _ in 0..4 * len {
        code = l.step(QWord::quantize(f(code)).unwrap());
    }
    (0..periods)
        .map(|_| {
            let mut sum = 0.0;
            for _ in 0..len {
                code = l.step(QWord::quantize(f(code)).unwrap());
                sum += l.state().last_demod.to_f64();
            }
            sum / len as f64
        })
        .collect()
}

#[test]
fn demodulated_mean_matches_taylor_term() {
    let cfg = LoopConfig::default();
    let ts = cfg.tick_period();
    let alpha = HighPass::new(cfg.hpf_cutoff, ts).alpha();
    let omega = cfg.omega_p * ts;
    // the reference is one tick ahead of the sample it multiplies
    let x_bar =
        cfg.a_phi / 2.0 * (hpf_response(alpha, omega) * Complex64::from_polar(1.0, -omega)).re;
    let curvature = 1.0 / 1000.0;
    let f = |c: u8| 20.0 - curvature * (f64::from(c) - 128.0).powi(2);
    for center in [40u8, 70, 100, 156, 190, 215] {
        let slope = -2.0 * curvature * (f64::from(center) - 128.0);
        let means = demod_means(&cfg, center, 4, f);
        let mean = means.iter().sum::<f64>() / means.len() as f64;
        let expect = x_bar * slope;
        assert!(
            (mean - expect).abs() <= 0.05 * expect.abs(),
            "center {center}: {mean} vs {expect}"
        );
    }
}

fn two_element(radius: f64, theta_deg: f64) -> Scenario {
    let mut s = Scenario::headline();
    s.rows = 1;
    s.trajectory = DeformationTrajectory::Static { r0: radius };
    s.aoa_rad = theta_deg.to_radians();
    s.loops.truncate(1);
    s.loop_elements = vec![1];
    s
}

#[test]
fn demodulated_sign_follows_finite_difference() {
    let s = two_element(0.38, 10.0);
    let cfg = s.loops[0].clone();
    let digitizer = s.digitizer().unwrap();
    let (best, curve) = oracle_single(&s, 0.38, &[0, 0], 0).unwrap();
    let worst = curve
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i as u8)
        .unwrap();
    let margin = cfg.a_phi as u8;
    let mut checked = 0;
    for center in (0..=255u8).step_by(3) {
        if code_distance(center, best) < margin || code_distance(center, worst) < margin {
            continue;
        }
        let fd =
            curve[usize::from(center.wrapping_add(1))] - curve[usize::from(center.wrapping_sub(1))];
        let means = demod_means(&cfg, center, 2, |c| {
            digitizer.scale * s.objective_at(0.38, &[0, c]).unwrap()
        });
        let mean = means.iter().sum::<f64>() / 2.0;
        assert_eq!(mean > 0.0, fd > 0.0, "code {center}: demod {mean}, fd {fd}");
        checked += 1;
    }
    assert!(checked > 40);
}

#[test]
fn steady_state_is_bounded_at_optimum() {
    let s0 = two_element(0.5, -20.0);
    let (best, _) = oracle_single(&s0, 0.5, &[0, 0], 0).unwrap();
    let s = Scenario {
        init: InitMode::Codes(vec![0, best]),
        tick_budget: 128 * 60,
        ..s0
    };
    let a_phi = s.loops[0].a_phi;
    let run = simulate(&s).unwrap();
    for row in &run.trace {
        assert!(
            code_distance(row.codes[0], best) <= 2,
            "tick {} code {}",
            row.tick,
            row.codes[0]
        );
        assert!(f64::from(code_distance(row.perturbed[0], best)) <= a_phi.ceil() + 2.0);
    }
    assert!(code_distance(run.summary.final_codes[1], best) <= 1);
    assert!(run.summary.converged);
    assert_eq!(run.summary.saturation_count, 0);
}

#[test]
fn shared_dither_frequency_stalls_three_loops() {
    use escal_core::escal::FrequencyPlan;
    let s = Scenario {
        loops: LoopConfig::defaults(3, FrequencyPlan::Shared),
        ..Scenario::headline()
    };
    let run = simulate(&s).unwrap();
    // every loop integrates the same product, so the codes stay proportional
    // to the loop gains and cannot reach the joint optimum
    let last = run.trace.last().unwrap();
    assert!(last.accumulator.windows(2).all(|w| w[0] == w[1]));
    assert!(
        run.summary.final_error_deg > 1.5,
        "{}",
        run.summary.final_error_deg
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn single_loop_reaches_oracle_from_basin(
        radius in 0.3f64..1.0,
        theta in -45.0f64..45.0,
        offset in -96i32..=96,
    ) {
        let s0 = two_element(radius, theta);
        let (best, _) = oracle_single(&s0, radius, &[0, 0], 0).unwrap();
        let init = (i32::from(best) + offset).rem_euclid(256) as u8;
        let s = Scenario {
            init: InitMode::Codes(vec![0, init]),
            tick_budget: 30_000,
            stop_on_convergence: true,
            ..s0
        };
        let run = simulate(&s).unwrap();
        prop_assert!(run.summary.converged);
        prop_assert!(code_distance(run.summary.final_codes[1], best) <= 2,
            "best {} got {}", best, run.summary.final_codes[1]);
    }

    #[test]
    fn hpf_never_amplifies_a_sine(amp in 0.5f64..20.0, ratio in 1.5f64..10.0) {
        let ts = LoopConfig::default().tick_period();
        let mut h = HighPass::new(5.0, ts);
        let omega = 5.0 * ratio * ts;
        for n in 0..4000 {
            let y = h.step(Fx::from_f64(amp * (omega * n as f64).sin())).0.to_f64();
            if n > 2000 {
                prop_assert!(y.abs() <= amp * 1.001 + 1e-4);
            }
        }
    }
}

#[test]
fn lut_walk_covers_one_period() {
    let cfg = LoopConfig::default();
    let mut l = SelfCalLoop::new(cfg.clone(), 0).unwrap();
    let mut seen = vec![false; cfg.lut_len];
    for _ in 0..cfg.lut_len {
        l.step(QWord::default());
        let i = l.state().lut_index();
        assert!(i < cfg.lut_len);
        seen[i] = true;
    }
    assert!(seen.iter().all(|&s| s));
    assert_eq!(l.state().lut_index(), 0);
}
