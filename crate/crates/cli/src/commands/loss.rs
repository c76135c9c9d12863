use std::fs;

use anyhow::Context;
use scarbench::io::{load_mask, load_scores};
use scarbench::loss::{loss_terms, LossConfig, LossTerms};
use scarbench::CaseRecord;

use super::{header, id_cells};
use crate::fail::{CmdResult, Failure};
use crate::output::{csv_bytes, fmt_float, fmt_opt, OutDir, ReportBuilder};
use crate::{for_each_case, load_cases, skipped_notes, LossArgs, LossOptions};

pub(crate) const LOSS_FILE: &str = "loss.csv";

const COLUMNS: [&str; 4] = ["dice", "bce", "kl", "total"];

/// Defaults, then the `--config` file, then individual flags.
pub(crate) fn resolve_config(o: &LossOptions) -> CmdResult<LossConfig> {
    let mut c = match &o.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| {
                Failure::usage(anyhow::anyhow!(
                    "cannot read config {}: {e}",
                    path.display()
                ))
            })?;
            serde_json::from_str(&text)
                .with_context(|| format!("invalid loss config {}", path.display()))
                .map_err(Failure::usage)?
        }
        None => LossConfig::default(),
    };
    if let Some([w_dice, w_ce, w_kl]) = o.weights {
        c.w_dice = w_dice;
        c.w_ce = w_ce;
        c.w_kl = w_kl;
    }
    if let Some(sigma) = o.sigma {
        c.sigma = sigma;
    }
    c.validate().map_err(Failure::usage)?;
    Ok(c)
}

fn case_loss(c: &CaseRecord, config: &LossConfig) -> anyhow::Result<LossTerms> {
    let scores_path = c
        .scores_path
        .as_deref()
        .context("manifest entry has no scores")?;
    let target = load_mask(&c.mask_path)?;
    let scores = load_scores(scores_path, target.width(), target.height())?;
    Ok(loss_terms(&scores, &target, config)?)
}

pub(crate) fn run(a: LossArgs) -> CmdResult<()> {
    let report = ReportBuilder::start("loss", 0);
    let config = resolve_config(&a.loss)?;
    let cases = load_cases(&a.batch.manifest)?;
    let mut out = OutDir::create(&a.batch.out_dir)?;
    let outcomes = for_each_case(&cases, a.batch.workers, |_, c: &CaseRecord| {
        case_loss(c, &config)
    })?;

    let rows: Vec<Vec<String>> = cases
        .iter()
        .zip(&outcomes)
        .filter_map(|(c, o)| {
            let t = o.as_ref().ok()?;
            let mut row = id_cells(c);
            row.extend([
                fmt_float(t.dice),
                fmt_float(t.bce),
                fmt_opt(t.kl),
                fmt_float(t.total),
            ]);
            Some(row)
        })
        .collect();
    out.write(LOSS_FILE, &csv_bytes(&header(&COLUMNS), &rows)?)?;

    let outputs = out.outputs();
    out.write_report(&report.finish(cases.len(), skipped_notes(&outcomes), Vec::new(), outputs))
}
