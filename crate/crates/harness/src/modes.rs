use std::fs;
use std::path::{Path, PathBuf};

use escal_core::geometry::Pattern;
use escal_core::oracle::{local_maxima, oracle_joint, oracle_single};
use escal_core::scenario::{pattern_sweep, simulate, DeformationTrajectory, RunResult, Scenario};
use serde::Serialize;

use crate::config::{Radius, ScenarioFile};
use crate::error::HarnessError;
use crate::output::{write_json, write_table, write_trace_file, SummaryFile};

/// Radii visited by the sweep mode.
pub const SWEEP_RADII_M: [f64; 4] = [0.3, 0.38, 0.5, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Run,
    Sweep,
    Oracle,
    Pattern,
    SelfTest,
}

/// Everything one invocation needs.
#[derive(Debug, Clone)]
pub struct RunManifest {
    pub config: ScenarioFile,
    pub out_dir: PathBuf,
    pub mode: Mode,
    pub require_converged: bool,
}

impl RunManifest {
    pub fn execute(&self) -> Result<(), HarnessError> {
        let scn = self.config.scenario()?;
        prepare_dir(&self.out_dir)?;
        match self.mode {
            Mode::Run => {
                let result = run(&scn, &self.config, &self.out_dir, "")?;
                let s = &result.summary;
                println!(
                    "final_error_deg={:.2} uncompensated_error_deg={:.2} converged={} ticks_to_converge={} saturations={}",
                    s.final_error_deg,
                    s.uncompensated_error_deg,
                    s.converged,
                    s.ticks_to_converge.map_or("none".into(), |t| t.to_string()),
                    s.saturation_count
                );
                if self.require_converged && !s.converged {
                    return Err(HarnessError::NotConverged(s.ticks_run));
                }
                Ok(())
            }
            Mode::Sweep => {
                let rows = sweep(&scn, &self.out_dir)?;
                for r in &rows {
                    println!(
                        "R_m={} uncompensated_error_deg={:.2} final_error_deg={:.2} converged={}",
                        r.radius_m, r.uncompensated_error_deg, r.final_error_deg, r.converged
                    );
                }
                println!(
                    "uncompensated error decreasing with R: {}",
                    uncompensated_decreasing(&rows)
                );
                if self.require_converged && rows.iter().any(|r| !r.converged) {
                    return Err(HarnessError::NotConverged(scn.tick_budget));
                }
                Ok(())
            }
            Mode::Oracle => {
                let o = oracle(&scn, &self.out_dir)?;
                println!(
                    "radius_m={} joint codes={:?} objective={} evaluations={}",
                    o.radius_m.0, o.joint_codes, o.joint_objective, o.evaluations
                );
                Ok(())
            }
            Mode::Pattern => {
                let p = pattern(&scn, &self.config, &self.out_dir)?;
                println!(
                    "peaks: flat={} uncompensated={} corrected={} (target {})",
                    p.flat_peak_deg, p.uncompensated_peak_deg, p.corrected_peak_deg, p.target_deg
                );
                Ok(())
            }
            Mode::SelfTest => {
                let failed = crate::selftest::run_all(&scn, &self.out_dir);
                if failed == 0 {
                    Ok(())
                } else {
                    Err(HarnessError::SelfTest(failed))
                }
            }
        }
    }
}

fn prepare_dir(dir: &Path) -> Result<(), HarnessError> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    // fail early on a read-only directory rather than after a long run
    let probe = dir.join(".escal-write-probe");
    fs::write(&probe, b"").map_err(|e| HarnessError::io(dir, e))?;
    let _ = fs::remove_file(probe);
    Ok(())
}

/// Simulates and writes `{prefix}trace.csv` and `{prefix}summary.json`.
pub fn run(
    scn: &Scenario,
    config: &ScenarioFile,
    dir: &Path,
    prefix: &str,
) -> Result<RunResult, HarnessError> {
    let result = simulate(scn)?;
    write_trace_file(&dir.join(format!("{prefix}trace.csv")), &result.trace)?;
    write_json(
        &dir.join(format!("{prefix}summary.json")),
        &SummaryFile::new(&result.summary, config.clone()),
    )?;
    Ok(result)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub radius_m: f64,
    pub uncompensated_error_deg: f64,
    pub final_error_deg: f64,
    pub converged: bool,
    pub ticks_to_converge: Option<u64>,
}

pub fn uncompensated_decreasing(rows: &[SweepRow]) -> bool {
    rows.windows(2).all(|w| {
        w[1].radius_m > w[0].radius_m && w[1].uncompensated_error_deg < w[0].uncompensated_error_deg
    })
}

/// One static run per radius in [`SWEEP_RADII_M`], in parallel.
pub fn sweep(scn: &Scenario, dir: &Path) -> Result<Vec<SweepRow>, HarnessError> {
    let results: Vec<Result<SweepRow, HarnessError>> = std::thread::scope(|s| {
        let handles: Vec<_> = SWEEP_RADII_M
            .iter()
            .map(|&r| {
                s.spawn(move || {
                    let one = Scenario {
                        trajectory: DeformationTrajectory::Static { r0: r },
                        ..scn.clone()
                    };
                    let config = ScenarioFile::from(&one);
                    let res = run(&one, &config, dir, &format!("R{r}_"))?;
                    Ok(SweepRow {
                        radius_m: r,
                        uncompensated_error_deg: res.summary.uncompensated_error_deg,
                        final_error_deg: res.summary.final_error_deg,
                        converged: res.summary.converged,
                        ticks_to_converge: res.summary.ticks_to_converge,
                    })
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sweep worker panicked"))
            .collect()
    });
    let rows = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    write_json(&dir.join("sweep.json"), &rows)?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleLoop {
    pub element: usize,
    pub best_code: u8,
    pub local_maxima: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub radius_m: Radius,
    pub base_codes: Vec<u8>,
    pub loops: Vec<OracleLoop>,
    pub joint_codes: Vec<u8>,
    pub joint_element_codes: Vec<u8>,
    pub joint_objective: f64,
    pub evaluations: u64,
}

/// Per-loop 256-code curves and the joint optimum, noise-free, around the
/// scenario's initial codes.
pub fn oracle(scn: &Scenario, dir: &Path) -> Result<OracleReport, HarnessError> {
    let DeformationTrajectory::Static { r0 } = scn.trajectory else {
        return Err(HarnessError::Config(
            "oracle mode needs a static trajectory".into(),
        ));
    };
    let base = scn.initial_codes()?;
    let mut loops = Vec::new();
    for (i, &element) in scn.loop_elements.iter().enumerate() {
        let (best_code, curve) = oracle_single(scn, r0, &base, i)?;
        write_table(
            &dir.join(format!("oracle_loop_{}.csv", i + 1)),
            &["code", "objective"],
            curve.iter().enumerate().map(|(c, &v)| vec![c as f64, v]),
        )?;
        loops.push(OracleLoop {
            element,
            best_code,
            local_maxima: local_maxima(&curve).len(),
        });
    }
    let joint = oracle_joint(scn, r0, &base)?;
    let report = OracleReport {
        radius_m: Radius(r0),
        base_codes: base,
        loops,
        joint_codes: joint.codes,
        joint_element_codes: joint.element_codes,
        joint_objective: joint.objective,
        evaluations: joint.evaluations,
    };
    write_json(&dir.join("oracle.json"), &report)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PatternReport {
    pub target_deg: f64,
    pub radius_m: Radius,
    pub flat_peak_deg: f64,
    pub uncompensated_peak_deg: f64,
    pub corrected_peak_deg: f64,
    pub flat_half_power_width_deg: f64,
    pub uncompensated_half_power_width_deg: f64,
    pub corrected_half_power_width_deg: f64,
}

/// Runs the calibration, then samples three patterns: flat sheet with
/// nominal codes, bent sheet with nominal codes, bent sheet with the
/// calibrated codes.
pub fn pattern(
    scn: &Scenario,
    config: &ScenarioFile,
    dir: &Path,
) -> Result<PatternReport, HarnessError> {
    let result = run(scn, config, dir, "")?;
    let r = result.summary.final_radius_m;
    let step = scn.pattern_step_deg;
    let nominal = scn.nominal_codes()?;
    let flat = pattern_sweep(scn, f64::INFINITY, &nominal, step)?;
    let bent = pattern_sweep(scn, r, &nominal, step)?;
    let corrected = pattern_sweep(scn, r, &result.summary.final_codes, step)?;
    write_table(
        &dir.join("pattern.csv"),
        &["angle_deg", "flat", "uncompensated", "corrected"],
        (0..flat.angles_deg.len()).map(|i| {
            vec![
                flat.angles_deg[i],
                flat.values[i],
                bent.values[i],
                corrected.values[i],
            ]
        }),
    )?;
    let target = scn.aoa_rad.to_degrees();
    let peak = |p: &Pattern| p.peak_deg(target);
    let width = |p: &Pattern| p.half_power_width_deg(target);
    let report = PatternReport {
        target_deg: target,
        radius_m: Radius(r),
        flat_peak_deg: peak(&flat)?,
        uncompensated_peak_deg: peak(&bent)?,
        corrected_peak_deg: peak(&corrected)?,
        flat_half_power_width_deg: width(&flat)?,
        uncompensated_half_power_width_deg: width(&bent)?,
        corrected_half_power_width_deg: width(&corrected)?,
    };
    write_json(&dir.join("pattern.json"), &report)?;
    Ok(report)
}
