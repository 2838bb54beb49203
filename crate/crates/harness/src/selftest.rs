//! Fast invariant checks runnable from the command line.

use std::f64::consts::PI;
use std::path::Path;

use escal_core::beamformer::QWord;
use escal_core::escal::{Fx, HighPass, LoopConfig, Lut};
use escal_core::geometry::{chord_length, path_delta, ArrayGeometry};
use escal_core::oracle::oracle_single;
use escal_core::scenario::{simulate, DeformationTrajectory, InitMode, Scenario};

use crate::config::ScenarioFile;
use crate::output::{read_trace, write_trace};

type Check = fn(&Scenario, &Path) -> Result<(), String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn config_round_trip(scn: &Scenario, _: &Path) -> Result<(), String> {
    let text = ScenarioFile::from(scn)
        .to_toml()
        .map_err(|e| e.to_string())?;
    let back = ScenarioFile::from_toml(&text).map_err(|e| e.to_string())?;
    ensure(Scenario::from(&back) == *scn, || {
        "scenario changed after a TOML round trip".into()
    })
}

fn chord_identity(_: &Scenario, _: &Path) -> Result<(), String> {
    let mut worst: f64 = 0.0;
    for i in 1..=40 {
        let r = 0.1 * f64::from(i);
        for j in 0..40 {
            let theta = f64::from(j) * PI / 80.0;
            let phi = theta * 0.37;
            let closed = r * (theta - phi).cos() - r * theta.cos();
            let chord = chord_length(r, phi).map_err(|e| e.to_string())?
                * (PI / 2.0 - theta + phi / 2.0).cos();
            worst = worst
                .max((closed - chord).abs())
                .max((closed - path_delta(r, theta, phi)).abs());
        }
    }
    ensure(worst <= 1e-12, || format!("worst residual {worst}"))
}

fn flat_limit(_: &Scenario, _: &Path) -> Result<(), String> {
    let d = 0.0714;
    let g = ArrayGeometry::linear(2, d, 1e6 * d).map_err(|e| e.to_string())?;
    for deg in [-60.0f64, 0.0, 30.0, 85.0] {
        let t = deg.to_radians();
        let rel = (g.path_delta(1, t) - d * t.sin()).abs() / d;
        ensure(rel <= 1e-6, || format!("theta {deg}: {rel}"))?;
    }
    Ok(())
}

fn qword_round_trip(_: &Scenario, _: &Path) -> Result<(), String> {
    for raw in i16::MIN..=i16::MAX {
        let x = f64::from(raw) / 1024.0;
        let q = QWord::quantize(x).map_err(|e| e.to_string())?;
        ensure(q.raw() == raw && q.value() == x, || format!("{x}"))?;
    }
    ensure(
        QWord::quantize(1e6)
            .map(|q| q == QWord::MAX)
            .unwrap_or(false),
        || "no positive saturation".into(),
    )?;
    ensure(
        QWord::quantize(-1e6)
            .map(|q| q == QWord::MIN)
            .unwrap_or(false),
        || "no negative saturation".into(),
    )
}

fn lut_quarter(_: &Scenario, _: &Path) -> Result<(), String> {
    let lut = Lut::new(128, 17).map_err(|e| e.to_string())?;
    let v = lut.get(32).map_err(|e| e.to_string())?.value();
    ensure(v == 1.0, || format!("quarter entry {v}"))
}

fn hpf_gain(_: &Scenario, _: &Path) -> Result<(), String> {
    let cfg = LoopConfig::default();
    let ts = cfg.tick_period();
    let mut h = HighPass::new(cfg.hpf_cutoff, ts);
    let mut peak: f64 = 0.0;
    for n in 0..128 * 40 {
        let y = h
            .step(Fx::from_f64(8.0 * (cfg.omega_p * ts * f64::from(n)).sin()))
            .0
            .to_f64();
        if n >= 128 * 30 {
            peak = peak.max(y.abs());
        }
    }
    let ratio = cfg.omega_p / cfg.hpf_cutoff;
    let analog = ratio / (1.0 + ratio * ratio).sqrt();
    ensure((peak / 8.0 - analog).abs() <= 0.03 * analog, || {
        format!("{} vs {analog}", peak / 8.0)
    })
}

fn flat_oracle_is_zero(scn: &Scenario, _: &Path) -> Result<(), String> {
    let flat = Scenario {
        aoa_rad: 0.0,
        ..scn.clone()
    };
    let zeros = vec![0; flat.n_elements()];
    for i in 0..flat.loops.len() {
        let (best, _) =
            oracle_single(&flat, f64::INFINITY, &zeros, i).map_err(|e| e.to_string())?;
        ensure(best == 0, || format!("loop {i}: best code {best}"))?;
    }
    Ok(())
}

fn short(scn: &Scenario) -> Scenario {
    Scenario {
        tick_budget: scn.tick_budget.min(1024),
        stop_on_convergence: false,
        ..scn.clone()
    }
}

fn deterministic(scn: &Scenario, _: &Path) -> Result<(), String> {
    let s = short(scn);
    let a = simulate(&s).map_err(|e| e.to_string())?;
    let b = simulate(&s).map_err(|e| e.to_string())?;
    ensure(a == b, || "two identical runs differ".into())
}

fn open_loop_is_stationary(scn: &Scenario, _: &Path) -> Result<(), String> {
    let r0 = scn.trajectory.radius_at(0, scn.tick_period());
    let s = Scenario {
        trajectory: DeformationTrajectory::Static { r0 },
        loops: Vec::new(),
        loop_elements: Vec::new(),
        init: match &scn.init {
            InitMode::Codes(c) => InitMode::Codes(c.clone()),
            _ => InitMode::Nominal,
        },
        noise: escal_core::signal::NoiseConfig {
            enabled: false,
            ..scn.noise
        },
        ..short(scn)
    };
    let run = simulate(&s).map_err(|e| e.to_string())?;
    let first = run.trace[0].objective_q;
    ensure(run.trace.iter().all(|r| r.objective_q == first), || {
        "objective drifts with loops off".into()
    })
}

fn csv_round_trip(scn: &Scenario, dir: &Path) -> Result<(), String> {
    let run = simulate(&short(scn)).map_err(|e| e.to_string())?;
    let path = dir.join("selftest_trace.csv");
    let mut buf = Vec::new();
    write_trace(&mut buf, &run.trace).map_err(|e| e.to_string())?;
    std::fs::write(&path, &buf).map_err(|e| e.to_string())?;
    let back = read_trace(std::fs::File::open(&path).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    ensure(back == run.trace, || {
        "trace changed after a CSV round trip".into()
    })
}

pub const CHECKS: [(&str, Check); 10] = [
    ("config round trip", config_round_trip),
    ("chord identity", chord_identity),
    ("flat limit", flat_limit),
    ("QWord round trip and saturation", qword_round_trip),
    ("LUT quarter period", lut_quarter),
    ("HPF gain at dither frequency", hpf_gain),
    ("flat broadside oracle", flat_oracle_is_zero),
    ("deterministic runs", deterministic),
    ("open-loop stationarity", open_loop_is_stationary),
    ("CSV round trip", csv_round_trip),
];

/// Runs every check, prints one line each and returns the failure count.
pub fn run_all(scn: &Scenario, dir: &Path) -> usize {
    let mut failed = 0;
    for (name, check) in CHECKS {
        match check(scn, dir) {
            Ok(()) => println!("PASS {name}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why}");
            }
        }
    }
    failed
}
