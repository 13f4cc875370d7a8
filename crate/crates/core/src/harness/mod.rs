//! Experiment orchestration: every runner writes its data files into a run
//! directory, evaluates its checks and finishes with a manifest.

pub mod config;
pub mod manifest;
pub mod report;
pub mod trace;
pub mod vision_check;

use std::io::Write;

pub use config::{ExperimentConfig, ExperimentKind};
pub use manifest::{all_passed, Check, RunDir};
pub use report::{
    baseline_grid, displacement_envelope, envelope_bands, evaluate_policy, zero_crossing_coverage, DisplacementReport,
    DisplacementRow, EnvelopeBand, MethodSummary, POLICY,
};
pub use trace::{path_trace, replay_actions, Trace};

use crate::paths::PathKind;
use crate::policy::PolicyWeights;
use crate::reward::lift_target;
use crate::sim::{b_min, StripParams};
use crate::trainer::envelope::summarize;
use crate::trainer::{fold_height_envelope, train_with, write_ledger, write_stats, TrainingRun};
use crate::vision::{loop_closure, Camera};
use crate::{Error, Result};

/// Largest allowed jump of the touch position between neighbouring k, m.
pub const ENVELOPE_CONTINUITY: f64 = 0.005;
pub const LOOP_CLOSURE_FRACTION: f64 = 0.99;
pub const HOMOGRAPHY_TOLERANCE: f64 = 1e-6;

/// Checks of a finished run.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub checks: Vec<Check>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        all_passed(&self.checks)
    }
}

fn load_weights(config: &ExperimentConfig) -> Result<PolicyWeights> {
    match &config.weights {
        Some(p) => PolicyWeights::load(p),
        None => Err(Error::InvalidConfig(format!("`{}` needs policy weights", config.kind))),
    }
}

fn base(config: &ExperimentConfig) -> &StripParams {
    &config.trainer.strip
}

pub fn run(config: &ExperimentConfig) -> Result<Outcome> {
    config.validate()?;
    let mut dir = RunDir::create(&config.out_dir)?;
    dir.write_text("config.txt", &config.to_kv().to_string())?;
    let checks = match config.kind {
        ExperimentKind::Train => run_train(config, &mut dir, config.verify_replay)?,
        ExperimentKind::Baseline => run_baseline(config, &mut dir)?,
        ExperimentKind::Sweep => run_sweep(config, &mut dir)?,
        ExperimentKind::Evaluate => run_evaluate(config, &mut dir)?,
        ExperimentKind::Trace => run_trace(config, &mut dir)?,
        ExperimentKind::RenderCheck => run_render_check(config, &mut dir)?,
    };
    write_summary(&mut dir, &checks)?;
    dir.write_manifest(config.kind.name(), config.seed, &config.to_kv(), &checks)?;
    Ok(Outcome { checks })
}

fn write_summary(dir: &mut RunDir, checks: &[Check]) -> Result<()> {
    let text: String = checks.iter().map(|c| c.line() + "\n").collect();
    dir.write_text("summary.txt", &text)
}

/// Checks that only need the finished run.
pub fn training_checks(run: &TrainingRun) -> Vec<Check> {
    let monotone = run.stats.windows(2).all(|w| w[1].best_so_far >= w[0].best_so_far);
    let crn = !run.config.common_thetas
        || (0..run.stats.len()).all(|g| {
            let first = run.thetas_of(g, 0);
            (1..run.config.population).all(|c| run.thetas_of(g, c) == first)
        });
    let again = run.reevaluate_best();
    vec![
        Check::new("best_so_far_monotone", monotone, format!("{} generations", run.stats.len())),
        Check::new(
            "common_random_numbers",
            crn,
            if run.config.common_thetas { "every candidate of a generation saw the same theta batch" } else { "disabled" },
        ),
        Check::new(
            "elitist_consistency",
            again.to_bits() == run.best_fitness.to_bits(),
            format!("stored {} re-evaluated {}", run.best_fitness, again),
        ),
    ]
}

/// Trains with incremental ledger and stats output. With `verify_replay`
/// the run is repeated and the ledgers compared bit for bit.
pub fn run_train(config: &ExperimentConfig, dir: &mut RunDir, verify_replay: bool) -> Result<Vec<Check>> {
    let mut ledger = dir.append_file("ledger.csv")?;
    let mut stats = dir.append_file("stats.csv")?;
    let mut first = true;
    let run = train_with(&config.trainer, &config.prior, |s, rows| {
        write_ledger(rows, &mut ledger, first)?;
        write_stats(std::slice::from_ref(s), &mut stats, first)?;
        first = false;
        Ok(())
    })?;
    dir.write_text("config_snapshot.txt", &run.config_snapshot().to_string())?;
    dir.write_text("best_weights.txt", &run.best_weights.to_text())?;
    dir.write_text("mean_weights.txt", &run.final_mean.to_text())?;
    let mut checks = training_checks(&run);
    if verify_replay {
        let again = crate::trainer::replay(&run)?;
        checks.push(Check::new(
            "ledger_replay",
            run.ledger_matches(&again),
            format!("{} ledger rows", run.ledger.len()),
        ));
    }
    Ok(checks)
}

pub fn baseline_sign_check(report: &DisplacementReport, name: &str) -> Check {
    let tri: Vec<&DisplacementRow> = report.rows_of(PathKind::Triangular.name()).collect();
    let circ: Vec<&DisplacementRow> = report.rows_of(PathKind::Circular.name()).collect();
    let tri_ok = tri.iter().filter(|r| r.touched && r.d < 0.0).count();
    let circ_ok = circ.iter().filter(|r| r.touched && r.d > 0.0).count();
    Check::new(
        name,
        !tri.is_empty() && tri_ok == tri.len() && circ_ok == circ.len() && !circ.is_empty(),
        format!(
            "triangular d<0 on {tri_ok}/{}, circular d>0 on {circ_ok}/{}",
            tri.len(),
            circ.len()
        ),
    )
}

pub fn run_baseline(config: &ExperimentConfig, dir: &mut RunDir) -> Result<Vec<Check>> {
    let report = baseline_grid(&config.prior, base(config), &config.trainer.episode, config.grid_k, config.grid_b);
    report.write_rows(dir.create_file("baselines.csv")?)?;
    report.write_summary(dir.create_file("baseline_summary.csv")?)?;
    Ok(vec![baseline_sign_check(&report, "baseline_sign_structure")])
}

pub fn envelope_checks(rows: &[crate::trainer::EnvelopeRow], n_b: usize, strip_length: f64) -> Vec<Check> {
    let summary = summarize(rows, n_b);
    let widths: Vec<String> = summary.iter().map(|s| format!("z={}: {:.4} m", s.z, s.width())).collect();
    let jumps = summary.iter().map(|s| s.max_k_jump).fold(0.0, f64::max);
    let in_bounds = rows
        .iter()
        .filter(|r| r.touched)
        .all(|r| r.x_touch > 0.0 && r.x_touch < strip_length);
    let censored: usize = summary.iter().map(|s| s.censored).sum();
    vec![
        Check::new("envelope_heights", summary.len() >= 3, format!("{} heights", summary.len())),
        Check::new(
            "envelope_width",
            !summary.is_empty() && summary.iter().all(|s| s.touched > 0 && s.width() > 0.0),
            widths.join(", "),
        ),
        Check::new(
            "envelope_continuity",
            jumps < ENVELOPE_CONTINUITY,
            format!("largest jump between neighbouring k {:.5} m", jumps),
        ),
        Check::new(
            "envelope_touch_bounds",
            in_bounds,
            format!("touched rows inside (0, L); {censored} censored rows kept"),
        ),
    ]
}

/// Fold-height envelope, plus the displacement envelope when weights are given.
pub fn run_sweep(config: &ExperimentConfig, dir: &mut RunDir) -> Result<Vec<Check>> {
    let rows = fold_height_envelope(&config.prior, base(config), &config.heights, config.envelope_k, config.envelope_b)?;
    report::write_csv(&rows, dir.create_file("fold_height_envelope.csv")?)?;
    report::write_csv(&summarize(&rows, config.envelope_b), dir.create_file("fold_height_summary.csv")?)?;
    let mut checks = envelope_checks(&rows, config.envelope_b, base(config).strip_length);
    if config.weights.is_some() {
        let weights = load_weights(config)?;
        let env = displacement_envelope(
            &weights,
            &config.prior,
            base(config),
            &config.trainer.episode,
            config.grid_k,
            config.grid_b,
        );
        env.write_rows(dir.create_file("displacement_envelope.csv")?)?;
        let bands = envelope_bands(&env);
        report::write_csv(&bands, dir.create_file("displacement_bands.csv")?)?;
        checks.push(coverage_check(&bands));
    }
    Ok(checks)
}

/// Reports, without requiring it, how many k bands contain `d = 0`.
pub fn coverage_check(bands: &[EnvelopeBand]) -> Check {
    let with_zero: Vec<String> = bands.iter().filter(|b| b.contains_zero).map(|b| format!("{:.3}", b.k)).collect();
    Check::new(
        "displacement_envelope_reported",
        !bands.is_empty(),
        format!(
            "zero crossing at {}/{} stiffness values (coverage {:.2}){}",
            with_zero.len(),
            bands.len(),
            zero_crossing_coverage(bands),
            if with_zero.is_empty() { String::new() } else { format!(": k = {}", with_zero.join(" ")) }
        ),
    )
}

pub fn policy_checks(report: &DisplacementReport) -> Vec<Check> {
    let p = report.summary_of(POLICY);
    let t = report.summary_of(PathKind::Triangular.name());
    let c = report.summary_of(PathKind::Circular.name());
    let better = t.mean_abs_d.min(c.mean_abs_d);
    let beats = p.touched == p.runs && p.mean_abs_d < t.mean_abs_d && p.mean_abs_d < c.mean_abs_d;
    vec![
        baseline_sign_check(report, "baseline_signs_held_out"),
        Check::new("policy_touched", p.touched == p.runs, format!("{}/{} episodes touched", p.touched, p.runs)),
        Check::new(
            "policy_beats_baselines",
            beats,
            format!(
                "mean |d|: policy {:.5}, triangular {:.5}, circular {:.5}",
                p.mean_abs_d, t.mean_abs_d, c.mean_abs_d
            ),
        ),
        Check::new(
            "policy_half_of_best_baseline",
            beats && p.mean_abs_d < 0.5 * better,
            format!("policy {:.5} vs 0.5 x {:.5}", p.mean_abs_d, better),
        ),
    ]
}

pub fn run_evaluate(config: &ExperimentConfig, dir: &mut RunDir) -> Result<Vec<Check>> {
    let weights = load_weights(config)?;
    let report = evaluate_policy(
        &weights,
        &config.prior,
        base(config),
        &config.trainer.episode,
        config.eval_samples,
        config.seed,
    );
    report.write_rows(dir.create_file("evaluation.csv")?)?;
    report.write_summary(dir.create_file("evaluation_summary.csv")?)?;
    Ok(policy_checks(&report))
}

pub fn run_trace(config: &ExperimentConfig, dir: &mut RunDir) -> Result<Vec<Check>> {
    let weights = load_weights(config)?;
    let episode = &config.trainer.episode;
    let mut traces = Vec::new();
    for &k in &config.trace_k {
        let params = base(config).with_material(k, b_min(k) * config.prior.damping_span.sqrt());
        let trace = path_trace(&weights, &params, episode)?;
        trace.write_points(dir.create_file(&format!("trace_k{k}.csv"))?)?;
        trace.write_steps(dir.create_file(&format!("trace_k{k}_steps.csv"))?)?;
        traces.push(trace);
    }
    let mut checks = Vec::new();
    let replayed = traces
        .iter()
        .map(|t| Ok(trace::states_identical(&replay_actions(t, episode)?, &t.states)))
        .collect::<Result<Vec<bool>>>()?;
    checks.push(Check::new(
        "trace_replay",
        replayed.iter().all(|r| *r),
        format!("{}/{} traces reproduced from their logged actions", replayed.iter().filter(|r| **r).count(), replayed.len()),
    ));
    let start_ok = traces.iter().all(|t| t.start.gripper == lift_target(&t.params, episode.lift_height));
    checks.push(Check::new(
        "trace_start",
        start_ok,
        format!("closed loop starts at {:?}", traces.first().map(|t| t.start.gripper)),
    ));
    if traces.len() >= 2 {
        let diff = trace::path_difference(&traces[0], &traces[traces.len() - 1]);
        checks.push(Check::new(
            "trace_adaptation",
            diff > 0.0,
            format!("largest gripper path difference {diff:.5} m between k extremes"),
        ));
    }
    Ok(checks)
}

pub fn run_render_check(config: &ExperimentConfig, dir: &mut RunDir) -> Result<Vec<Check>> {
    let weights = match &config.weights {
        Some(_) => Some(load_weights(config)?),
        None => None,
    };
    let camera = Camera::canonical();
    camera.homography.save(&dir.path("canonical_homography.txt"))?;
    let states = vision_check::folding_states(
        &config.prior,
        base(config),
        &config.trainer.episode,
        weights.as_ref(),
        config.vision_states,
        config.seed,
    )?;
    let report = loop_closure(&camera, base(config), &states)?;
    if let Some(s) = states.first() {
        camera.render(s)?.save_ppm(&dir.path("sample_render.ppm"))?;
    }
    {
        let mut w = dir.create_file("loop_closure.csv")?;
        writeln!(w, "state,error_px").map_err(|e| Error::io("loop_closure.csv", e))?;
        for (i, e) in report.errors_px.iter().enumerate() {
            writeln!(w, "{i},{e}").map_err(|e| Error::io("loop_closure.csv", e))?;
        }
        w.flush().map_err(|e| Error::io("loop_closure.csv", e))?;
    }
    let recovery = vision_check::homography_recovery_error(50, 12, config.seed)?;
    Ok(vec![
        Check::new(
            "vision_loop_closure",
            report.fraction_within() >= LOOP_CLOSURE_FRACTION,
            format!(
                "{}/{} states within 1 pixel-equivalent ({:.3}), {} without contact, median error {:.2} px",
                report.within_one_pixel,
                report.states,
                report.fraction_within(),
                report.no_contact,
                median(&report.errors_px)
            ),
        ),
        Check::new(
            "homography_recovery",
            recovery < HOMOGRAPHY_TOLERANCE,
            format!("largest element error {recovery:e}"),
        ),
    ])
}

fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}
