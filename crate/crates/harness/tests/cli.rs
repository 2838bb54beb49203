use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use escal_core::scenario::Scenario;
use escal_harness::config::{InitFile, Radius, TrajectoryFile};
use escal_harness::modes::{sweep, uncompensated_decreasing, SWEEP_RADII_M};
use escal_harness::output::{read_trace, write_trace, SummaryFile};
use escal_harness::ScenarioFile;
use proptest::prelude::*;

fn scenario_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

fn escal(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_escal"))
        .args(args)
        .output()
        .expect("spawn escal")
}

fn headline_arg() -> String {
    scenario_path("headline.toml").to_str().unwrap().to_string()
}

#[test]
fn shipped_headline_file_is_the_headline_scenario() {
    let f = ScenarioFile::load(&scenario_path("headline.toml"), &[]).unwrap();
    assert_eq!(f.scenario().unwrap(), Scenario::headline());
    let f = ScenarioFile::load(&scenario_path("step.toml"), &[]).unwrap();
    assert_eq!(f.scenario().unwrap(), Scenario::step_flat_to_headline());
}

#[test]
fn run_writes_trace_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = escal(&[
        "--scenario",
        &headline_arg(),
        "--out",
        out,
        "--require-converged",
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let summary: SummaryFile =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap())
            .unwrap();
    assert!(summary.final_error_deg < 1.5);
    assert!(summary.converged);
    assert_eq!(Scenario::from(&summary.config), Scenario::headline());
    let trace = read_trace(std::fs::File::open(dir.path().join("trace.csv")).unwrap()).unwrap();
    assert_eq!(trace.len() as u64, summary.ticks_run);
}

#[test]
fn seed_flag_reaches_the_noise_stream() {
    let dir = tempfile::tempdir().unwrap();
    let run = |seed: &str, sub: &str| {
        let out = dir.path().join(sub);
        let o = escal(&[
            "--scenario",
            &headline_arg(),
            "--out",
            out.to_str().unwrap(),
            "--set",
            "noise.enabled=true",
            "--set",
            "tick_budget=600",
            "--seed",
            seed,
        ]);
        assert_eq!(
            o.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&o.stderr)
        );
        std::fs::read_to_string(out.join("trace.csv")).unwrap()
    };
    let a = run("5", "a");
    assert_eq!(a, run("5", "b"));
    assert_ne!(a, run("6", "c"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();
    let h = headline_arg();
    // usage and configuration problems
    assert_eq!(escal(&["--out", out]).status.code(), Some(1));
    assert_eq!(
        escal(&["--scenario", &h, "--mode", "dance"]).status.code(),
        Some(1)
    );
    assert_eq!(
        escal(&["--scenario", "/nonexistent.toml", "--out", out])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        escal(&["--scenario", &h, "--out", out, "--set", "seed"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        escal(&["--scenario", &h, "--out", out, "--set", "spacing_m=-0.1"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(escal(&["--help"]).status.code(), Some(0));
    // output directory below a regular file
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let bad_out = blocker.join("sub");
    assert_eq!(
        escal(&["--scenario", &h, "--out", bad_out.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
    // a few hundred ticks are not enough to converge
    let o = escal(&[
        "--scenario",
        &h,
        "--out",
        out,
        "--set",
        "tick_budget=300",
        "--require-converged",
    ]);
    assert_eq!(o.status.code(), Some(3));
    let o = escal(&["--scenario", &h, "--out", out, "--set", "tick_budget=300"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn selftest_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = escal(&["--mode", "selftest", "--out", dir.path().to_str().unwrap()]);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(o.status.code(), Some(0), "{stdout}");
    assert!(!stdout.contains("FAIL"));
}

#[test]
fn sweep_error_shrinks_with_radius() {
    let dir = tempfile::tempdir().unwrap();
    let rows = sweep(&Scenario::headline(), dir.path()).unwrap();
    assert_eq!(rows.len(), SWEEP_RADII_M.len());
    assert!(uncompensated_decreasing(&rows), "{rows:?}");
    // geometry alone predicts the order: the tilt is d / 2R
    for r in &rows {
        let predicted = (0.093 / (2.0 * r.radius_m)).to_degrees();
        assert!(
            (r.uncompensated_error_deg - predicted).abs() <= 0.15,
            "{r:?} vs {predicted}"
        );
        assert!(r.final_error_deg < 1.5, "{r:?}");
    }
    for r in SWEEP_RADII_M {
        assert!(dir.path().join(format!("R{r}_summary.json")).exists());
        assert!(dir.path().join(format!("R{r}_trace.csv")).exists());
    }
}

#[test]
fn oracle_and_pattern_modes_write_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    assert_eq!(
        escal(&[
            "--scenario",
            &headline_arg(),
            "--out",
            d,
            "--mode",
            "oracle"
        ])
        .status
        .code(),
        Some(0)
    );
    for f in [
        "oracle.json",
        "oracle_loop_1.csv",
        "oracle_loop_2.csv",
        "oracle_loop_3.csv",
    ] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let curve = std::fs::read_to_string(dir.path().join("oracle_loop_1.csv")).unwrap();
    assert_eq!(curve.lines().count(), 257);
    assert_eq!(
        escal(&[
            "--scenario",
            &headline_arg(),
            "--out",
            d,
            "--mode",
            "pattern"
        ])
        .status
        .code(),
        Some(0)
    );
    let pattern = std::fs::read_to_string(dir.path().join("pattern.csv")).unwrap();
    assert_eq!(
        pattern.lines().next(),
        Some("angle_deg,flat,uncompensated,corrected")
    );
    assert_eq!(pattern.lines().count(), 1802);
    // the oracle is only defined for a fixed radius
    let step = scenario_path("step.toml");
    let o = escal(&[
        "--scenario",
        step.to_str().unwrap(),
        "--out",
        d,
        "--mode",
        "oracle",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn simulated_trace_round_trips_exactly() {
    let s = Scenario {
        tick_budget: 700,
        ..Scenario::step_flat_to_headline()
    };
    let s = Scenario {
        trajectory: escal_core::scenario::DeformationTrajectory::Step {
            r0: f64::INFINITY,
            r1: 0.38,
            step_tick: 350,
        },
        ..s
    };
    let run = escal_core::scenario::simulate(&s).unwrap();
    let mut buf = Vec::new();
    write_trace(&mut buf, &run.trace).unwrap();
    let back = read_trace(buf.as_slice()).unwrap();
    assert_eq!(back, run.trace);
    for (a, b) in run.trace.iter().zip(&back) {
        assert_eq!(a.error_deg.to_bits(), b.error_deg.to_bits());
        assert_eq!(a.radius_m.to_bits(), b.radius_m.to_bits());
    }
}

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![
        -1e300f64..1e300,
        -1.0f64..1.0,
        Just(0.1 + 0.2),
        Just(f64::MIN_POSITIVE),
        Just(5e-324),
        Just(f64::MAX),
    ]
}

fn radius() -> impl Strategy<Value = Radius> {
    prop_oneof![Just(Radius(f64::INFINITY)), (1e-3f64..1e6).prop_map(Radius)]
}

fn trajectory() -> impl Strategy<Value = TrajectoryFile> {
    prop_oneof![
        radius().prop_map(|r0_m| TrajectoryFile::Static { r0_m }),
        (radius(), radius(), any::<u64>()).prop_map(|(r0_m, r1_m, step_tick)| {
            TrajectoryFile::Step {
                r0_m,
                r1_m,
                step_tick,
            }
        }),
        (finite(), finite(), finite()).prop_map(|(a, b, c)| TrajectoryFile::Sinusoidal {
            r0_m: a,
            vib_amplitude_m: b,
            vib_freq_hz: c,
        }),
    ]
}

fn init() -> impl Strategy<Value = InitFile> {
    prop_oneof![
        Just(InitFile::Nominal),
        Just(InitFile::Coarse),
        proptest::collection::vec(any::<u8>(), 1..6).prop_map(|codes| InitFile::Codes { codes }),
    ]
}

fn scenario_file() -> impl Strategy<Value = ScenarioFile> {
    (
        (
            1usize..4,
            1usize..5,
            finite(),
            finite(),
            proptest::option::of(finite()),
            finite(),
            finite(),
        ),
        (
            any::<u8>(),
            any::<u8>(),
            1usize..64,
            any::<u64>(),
            any::<u64>(),
            any::<bool>(),
            finite(),
        ),
        (trajectory(), init(), any::<bool>(), finite()),
        proptest::collection::vec(
            (finite(), finite(), finite(), finite(), finite(), 1usize..4),
            0..4,
        ),
    )
        .prop_map(|(a, b, c, loops)| {
            let mut f = ScenarioFile::from(&Scenario::headline());
            (
                f.rows,
                f.columns,
                f.spacing_m,
                f.freq_rf_hz,
                f.freq_lo_hz,
                f.aoa_rad,
                f.amplitude,
            ) = a;
            (
                f.gain_code,
                f.delay_code,
                f.dwell_samples,
                f.tick_budget,
                f.seed,
                f.stop_on_convergence,
                f.pattern_step_deg,
            ) = b;
            (f.trajectory, f.init, f.noise.enabled, f.noise.snr_db) = c;
            let template = f.loops[0].clone();
            f.loops = loops
                .into_iter()
                .map(
                    |(w, h, a_phi, a_v, psi, element)| escal_harness::config::LoopFile {
                        omega_p_rad_s: w,
                        hpf_cutoff_rad_s: h,
                        a_phi_lsb: a_phi,
                        a_v,
                        psi_rad: psi,
                        element,
                        ..template.clone()
                    },
                )
                .collect();
            f
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn scenario_toml_round_trips(f in scenario_file()) {
        let text = f.to_toml().unwrap();
        let back = ScenarioFile::from_toml(&text).unwrap();
        prop_assert_eq!(&back, &f);
        // and through the core type
        prop_assert_eq!(ScenarioFile::from(&Scenario::from(&back)), f);
    }
}
