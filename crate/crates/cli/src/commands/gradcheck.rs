use rand::Rng;
use scarbench::augment::rng::{derive_seed, stream_rng};
use scarbench::loss::{check_gradient, LossConfig};
use scarbench::{Mask, ScoreMap};

use super::loss::resolve_config;
use crate::fail::{CmdResult, Failure};
use crate::output::{csv_bytes, fmt_float, OutDir, ReportBuilder};
use crate::GradcheckArgs;

pub(crate) const GRADCHECK_FILE: &str = "gradcheck.csv";

const SIDE: usize = 8;

/// Weight configurations checked when none is given explicitly.
pub(crate) const DEFAULT_CONFIGS: [[f64; 3]; 4] = [
    [1.0, 0.0, 0.0],
    [0.0, 1.0, 0.0],
    [0.0, 0.0, 1.0],
    [0.2, 0.2, 0.6],
];

/// Scores uniform in [-3, 3]; roughly 30% foreground with at least one
/// foreground pixel so the soft target exists.
pub(crate) fn random_instance(seed: u64, trial: u64) -> (ScoreMap, Mask) {
    let mut rng = stream_rng(seed, trial);
    let scores = (0..SIDE * SIDE)
        .map(|_| rng.random_range(-3.0..=3.0))
        .collect();
    let mut bits: Vec<u8> = (0..SIDE * SIDE)
        .map(|_| u8::from(rng.random_bool(0.3)))
        .collect();
    let forced = rng.random_range(0..SIDE * SIDE);
    bits[forced] = 1;
    (
        ScoreMap::new(SIDE, SIDE, scores).expect("finite scores"),
        Mask::new(SIDE, SIDE, bits).expect("binary mask"),
    )
}

struct ConfigResult {
    weights: [f64; 3],
    max_rel: f64,
    max_abs: f64,
}

fn check_config(c: &LossConfig, seed: u64, trials: usize, step: f64) -> CmdResult<ConfigResult> {
    let mut r = ConfigResult {
        weights: [c.w_dice, c.w_ce, c.w_kl],
        max_rel: 0.0,
        max_abs: 0.0,
    };
    for t in 0..trials as u64 {
        let (s, m) = random_instance(seed, t);
        let g = check_gradient(&s, &m, c, step).map_err(Failure::internal)?;
        r.max_rel = r.max_rel.max(g.max_rel_error);
        r.max_abs = r.max_abs.max(g.max_abs_error);
    }
    Ok(r)
}

pub(crate) fn run(a: GradcheckArgs) -> CmdResult<()> {
    let report = ReportBuilder::start("gradcheck", a.seed);
    if a.trials == 0 {
        return Err(Failure::usage(anyhow::anyhow!(
            "--trials must be at least 1"
        )));
    }
    if !(a.step.is_finite() && a.step > 0.0) {
        return Err(Failure::usage(anyhow::anyhow!("--step must be positive")));
    }
    let base = resolve_config(&a.loss)?;
    let configs: Vec<LossConfig> = if a.loss.weights.is_some() || a.loss.config.is_some() {
        vec![base]
    } else {
        DEFAULT_CONFIGS
            .iter()
            .map(|&[w_dice, w_ce, w_kl]| LossConfig {
                w_dice,
                w_ce,
                w_kl,
                ..base
            })
            .collect()
    };

    let mut results = Vec::new();
    for (k, c) in configs.iter().enumerate() {
        let r = check_config(c, derive_seed(a.seed, k as u64), a.trials, a.step)?;
        let [d, e, l] = r.weights.map(fmt_float);
        println!(
            "weights={d},{e},{l} trials={} max_rel_error={:e} max_abs_error={:e}",
            a.trials, r.max_rel, r.max_abs
        );
        results.push(r);
    }
    let worst = results.iter().map(|r| r.max_rel).fold(0.0, f64::max);
    let pass = worst <= a.tolerance;
    println!(
        "max relative error: {worst:e} (tolerance {:e}) {}",
        a.tolerance,
        if pass { "PASS" } else { "FAIL" }
    );

    if let Some(dir) = &a.out_dir {
        let mut out = OutDir::create(dir)?;
        let rows: Vec<Vec<String>> = results
            .iter()
            .map(|r| {
                let mut row: Vec<String> = r.weights.map(fmt_float).to_vec();
                row.extend([
                    a.trials.to_string(),
                    fmt_float(r.max_rel),
                    fmt_float(r.max_abs),
                ]);
                row
            })
            .collect();
        let header = [
            "w_dice",
            "w_ce",
            "w_kl",
            "trials",
            "max_rel_error",
            "max_abs_error",
        ];
        out.write(GRADCHECK_FILE, &csv_bytes(&header, &rows)?)?;
        let outputs = out.outputs();
        out.write_report(&report.finish(
            configs.len() * a.trials,
            Vec::new(),
            Vec::new(),
            outputs,
        ))?;
    }
    if pass {
        Ok(())
    } else {
        Err(Failure::internal(anyhow::anyhow!(
            "analytic gradient disagrees with finite differences: {worst:e} > {:e}",
            a.tolerance
        )))
    }
}
