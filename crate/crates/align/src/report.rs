//! Report files written by `run`.
//!
//! | file                          | content                                              |
//! |-------------------------------|------------------------------------------------------|
//! | `report.txt`                  | aligned tables: medians, ratios, tests, emphasis     |
//! | `report.json`                 | the same data, machine-readable                      |
//! | `scores.csv`                  | one row per scored frame and method                  |
//! | `skipped.csv`                 | frames left out, with the reason                     |
//! | `emphasis_<a>_minus_<b>.csv`  | class ranking for each method pair                   |
//! | `emergent/<frame_id>.pgm`     | emergent-feature maps                                |
//! | `models/driving.toml`, `.bin` | the trained head on its backbone, when one is trained |
//!
//! Every file is a pure function of the pipeline output, so identical runs
//! give identical bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model_io::save_model;
use crate::pgm::save_grayscale;
use crate::pipeline::{AnovaSummary, EmphasisSummary, MedianRow, MethodSummary, PipelineOutput, SkipRow};
use crate::records::save_scores;

fn num(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |x| format!("{x:.6}"))
}

fn pval(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |x| format!("{x:.4e}"))
}

fn median_table(out: &mut String, title: &str, rows: &[(&str, &MedianRow)]) {
    let w = rows.iter().map(|r| r.0.len()).max().unwrap_or(6).max(6);
    let _ = writeln!(out, "{title}");
    let _ = writeln!(out, "{:<w$}  {:>10}  {:>10}  {:>11}  {:>10}", "method", "all", "attentive", "inattentive", "ratio");
    for (name, m) in rows {
        let _ = writeln!(
            out,
            "{:<w$}  {:>10}  {:>10}  {:>11}  {:>10}",
            name,
            num(m.all),
            num(m.attentive),
            num(m.inattentive),
            num(m.ratio)
        );
    }
    out.push('\n');
}

fn rank_tests(out: &mut String, rows: &[MethodSummary]) {
    let w = rows.iter().map(|r| r.method.len()).max().unwrap_or(6).max(6);
    let _ = writeln!(out, "Mann-Whitney U on ln(cosine), attentive vs inattentive, two-sided");
    let _ = writeln!(
        out,
        "{:<w$}  {:>6}  {:>7}  {:>8}  {:>12}  {:>12}  {:>11}  computation",
        "method", "n_att", "n_inatt", "excluded", "U_att", "U_inatt", "p"
    );
    for s in rows {
        let t = &s.mann_whitney;
        match &t.result {
            Some(r) => {
                let _ = writeln!(
                    out,
                    "{:<w$}  {:>6}  {:>7}  {:>8}  {:>12.1}  {:>12.1}  {:>11}  {}",
                    s.method,
                    t.n_attentive,
                    t.n_inattentive,
                    t.excluded_non_positive,
                    r.u_attentive,
                    r.u_inattentive,
                    pval(Some(r.p_value)),
                    r.computation
                );
            }
            None => {
                let _ = writeln!(
                    out,
                    "{:<w$}  {:>6}  {:>7}  {:>8}  {}",
                    s.method,
                    t.n_attentive,
                    t.n_inattentive,
                    t.excluded_non_positive,
                    t.note.as_deref().unwrap_or("n/a")
                );
            }
        }
    }
    out.push('\n');
}

fn anova_table(out: &mut String, rows: &[AnovaSummary]) {
    let _ = writeln!(out, "One-way ANOVA across methods");
    let _ = writeln!(out, "{:<8}  {:>12}  {:>5}  {:>6}  {:>11}", "metric", "F", "df_b", "df_w", "p");
    for a in rows {
        match (a.f, a.df_between, a.df_within) {
            (Some(f), Some(b), Some(w)) => {
                let _ = writeln!(out, "{:<8}  {:>12.4}  {:>5}  {:>6}  {:>11}", a.metric, f, b, w, pval(a.p_value));
            }
            _ => {
                let _ = writeln!(out, "{:<8}  {}", a.metric, a.note.as_deref().unwrap_or("n/a"));
            }
        }
    }
    out.push('\n');
}

fn emphasis_table(out: &mut String, e: &EmphasisSummary) {
    let _ = writeln!(out, "Class emphasis difference: {} - {}", e.minuend, e.subtrahend);
    let w = e.classes.iter().map(|c| c.class_name.len()).max().unwrap_or(5).max(5);
    let _ = writeln!(out, "{:>4}  {:<w$}  {:>14}  {:>6}", "rank", "class", "mean_diff", "n");
    for (i, c) in e.classes.iter().enumerate() {
        let _ = writeln!(out, "{:>4}  {:<w$}  {:>14.6e}  {:>6}", i + 1, c.class_name, c.mean_diff, c.n_observations);
    }
    let _ = writeln!(
        out,
        "skipped: {} low-confidence detections, {} empty boxes, {} zero-mass frames",
        e.skipped_low_confidence, e.skipped_empty_box, e.skipped_zero_mass_frames
    );
    out.push('\n');
}

pub fn render_text(o: &PipelineOutput) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "salience-align report");
    let _ = writeln!(out, "seed: {}", o.seed);
    let _ = writeln!(out, "filter: {:?} ({})", o.filter, o.predicate);
    let _ = writeln!(out, "resolution: {}", o.resolution);
    let _ = writeln!(out, "lrp rule: {}", o.lrp_rule);
    let _ = writeln!(
        out,
        "frames: {} in manifest, {} after filter, {} scored, {} skipped",
        o.n_records,
        o.n_filtered,
        o.n_scored,
        o.skipped.len()
    );
    if let Some(t) = &o.training {
        let _ = writeln!(
            out,
            "trained head: base {}, {} frames, {} epochs, batch {}, lr {}, final loss {}",
            t.base,
            t.n_frames,
            t.epochs,
            t.batch_size,
            t.learning_rate,
            t.loss_trace.last().map_or_else(|| "n/a".into(), |l| format!("{l:.6e}"))
        );
    }
    out.push('\n');
    let cos: Vec<_> = o.summaries.iter().map(|s| (s.method.as_str(), &s.cosine)).collect();
    median_table(&mut out, "Cosine similarity, median", &cos);
    let sp: Vec<_> = o.summaries.iter().map(|s| (s.method.as_str(), &s.spearman)).collect();
    median_table(&mut out, "Spearman rank correlation, median", &sp);
    rank_tests(&mut out, &o.summaries);
    anova_table(&mut out, &o.anova);
    for e in &o.emphasis {
        emphasis_table(&mut out, e);
    }
    if !o.notes.is_empty() {
        let _ = writeln!(out, "notes:");
        for n in &o.notes {
            let _ = writeln!(out, "  {n}");
        }
    }
    out
}

/// Machine-readable summary for the `stats` subcommand: tab-separated, one record per line.
///
/// ```text
/// median       method metric all attentive inattentive ratio
/// mannwhitney  method n_att n_inatt excluded U_att U_inatt p computation
/// anova        metric F df_between df_within p
/// ```
///
/// Missing values print as `NA`; numbers use the shortest exact representation.
pub fn render_stats(summaries: &[MethodSummary], anova: &[AnovaSummary]) -> String {
    let f = |v: Option<f64>| v.map_or_else(|| "NA".into(), |x| format!("{x:?}"));
    let mut out = String::new();
    for s in summaries {
        for (metric, m) in [("cosine", &s.cosine), ("spearman", &s.spearman)] {
            let _ = writeln!(
                out,
                "median\t{}\t{metric}\t{}\t{}\t{}\t{}",
                s.method,
                f(m.all),
                f(m.attentive),
                f(m.inattentive),
                f(m.ratio)
            );
        }
    }
    for s in summaries {
        let t = &s.mann_whitney;
        let r = t.result.as_ref();
        let _ = writeln!(
            out,
            "mannwhitney\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            s.method,
            t.n_attentive,
            t.n_inattentive,
            t.excluded_non_positive,
            f(r.map(|r| r.u_attentive)),
            f(r.map(|r| r.u_inattentive)),
            f(r.map(|r| r.p_value)),
            r.map_or("NA", |r| r.computation)
        );
    }
    for a in anova {
        let d = |v: Option<usize>| v.map_or_else(|| "NA".into(), |x| x.to_string());
        let _ = writeln!(
            out,
            "anova\t{}\t{}\t{}\t{}\t{}",
            a.metric,
            f(a.f),
            d(a.df_between),
            d(a.df_within),
            f(a.p_value)
        );
    }
    out
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn save_csv<T: serde::Serialize>(rows: &[T], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::parse(path, e.to_string()))?;
    for r in rows {
        w.serialize(r).map_err(|e| Error::parse(path, e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn emphasis_file_name(e: &EmphasisSummary) -> String {
    format!("emphasis_{}_minus_{}.csv", e.minuend, e.subtrahend)
}

pub fn write_report(o: &PipelineOutput, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write(&dir.join("report.txt"), render_text(o))?;
    let json = serde_json::to_string_pretty(o).map_err(|e| Error::Internal(e.to_string()))?;
    write(&dir.join("report.json"), json + "\n")?;
    save_scores(&o.scores, dir.join("scores.csv"))?;
    if o.skipped.is_empty() {
        write(&dir.join("skipped.csv"), "frame_id,reason\n")?;
    } else {
        save_csv::<SkipRow>(&o.skipped, &dir.join("skipped.csv"))?;
    }
    for e in &o.emphasis {
        let path = dir.join(emphasis_file_name(e));
        if e.classes.is_empty() {
            write(&path, "class_name,mean_diff,n_observations\n")?;
        } else {
            save_csv(&e.classes, &path)?;
        }
    }
    if !o.emergent.is_empty() {
        let sub = dir.join("emergent");
        fs::create_dir_all(&sub).map_err(|e| Error::io(&sub, e))?;
        for (id, map) in &o.emergent {
            save_grayscale(map, sub.join(format!("{id}.pgm")))?;
        }
    }
    if let Some(m) = &o.trained_model {
        let sub = dir.join("models");
        fs::create_dir_all(&sub).map_err(|e| Error::io(&sub, e))?;
        save_model(m, sub.join(format!("{}.toml", m.name())))?;
    }
    Ok(())
}
