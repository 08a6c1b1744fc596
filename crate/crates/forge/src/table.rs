//! Rendering result tables and ingesting externally produced scores.
//!
//! Long-format CSV, one line per cell:
//!
//! ```text
//! dataset,row,scheme,meteor,rouge1
//! reddit_tifu,SUM,seq,0.231,0.402
//! reddit_tifu,baseline,,0.087,0.301
//! ```
//!
//! `row` is a combination label (`CLS`, `SUM+NLI+RC+`, `ALL`) or `baseline`.
//! Metric columns may be any subset; metrics that are absent are stored as 0
//! (BERTScore as missing).

use std::path::Path;

use mtlforge_core::{
    Baseline, ExperimentPlan, FamilyId, MetricField, MetricReport, ResultsTable, RqTag, RunRecord, SchemeConfig,
    SchemeKind,
};
use serde::Serialize;

use crate::error::{Error, Result};

/// Inverse of `combination_label`. A `+` directly after `RC` belongs to the
/// label (`RC+`), so `NLI+RC+` is NLI with RC+ and `RC+RC+` is RC with RC+.
pub fn parse_label(label: &str) -> std::result::Result<Vec<FamilyId>, String> {
    let label = label.trim();
    if label.eq_ignore_ascii_case("ALL") {
        return Ok(FamilyId::ALL.to_vec());
    }
    let parts: Vec<&str> = label.split('+').collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < parts.len() {
        let p = parts[i].trim();
        let family = if p.eq_ignore_ascii_case("RC") && parts.get(i + 1).is_some_and(|n| n.trim().is_empty()) {
            i += 1;
            FamilyId::RcPlus
        } else {
            p.parse::<FamilyId>().map_err(|_| format!("unknown family `{p}` in label `{label}`"))?
        };
        if out.contains(&family) {
            return Err(format!("family {family} repeated in label `{label}`"));
        }
        out.push(family);
        i += 1;
    }
    out.sort();
    Ok(out)
}

fn fmt_value(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{v:.3}"))
}

/// Aligned plain text. `*x*` marks a column maximum and `_x_` the dataset
/// maximum; tied cells carry the same marks.
pub fn render_text(t: &ResultsTable) -> String {
    let ns = t.schemes.len();
    let mut grid: Vec<Vec<String>> = Vec::new();
    let mut head1 = vec![String::new()];
    let mut head2 = vec![t.metric.title().to_string()];
    for d in &t.datasets {
        for (i, s) in t.schemes.iter().enumerate() {
            head1.push(if i == 0 { d.clone() } else { String::new() });
            head2.push(s.short().to_string());
        }
    }
    grid.push(head1);
    grid.push(head2);
    for (r, label) in t.rows.iter().enumerate() {
        let mut line = vec![label.clone()];
        for c in 0..t.column_count() {
            let mut s = fmt_value(t.cells[r][c]);
            if t.is_underlined(r, c) {
                s = format!("_{s}_");
            }
            if t.is_bold(r, c) {
                s = format!("*{s}*");
            }
            line.push(s);
        }
        grid.push(line);
    }
    if t.baseline.iter().any(Option::is_some) {
        let mut line = vec!["baseline".to_string()];
        line.extend(t.baseline.iter().map(|v| fmt_value(*v)));
        grid.push(line);
    }
    let ncols = 1 + t.datasets.len() * ns;
    let widths: Vec<usize> =
        (0..ncols).map(|c| grid.iter().map(|l| l[c].chars().count()).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for line in &grid {
        let cells: Vec<String> = line
            .iter()
            .enumerate()
            .map(|(c, s)| if c == 0 { format!("{s:<w$}", w = widths[c]) } else { format!("{s:>w$}", w = widths[c]) })
            .collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
    }
    out
}

pub fn render_json(t: &ResultsTable) -> String {
    serde_json::to_string_pretty(t).expect("table serializes") + "\n"
}

/// Long-format CSV of the table's cells and baselines.
pub fn render_csv(t: &ResultsTable) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let metric = t.metric.name();
    w.write_record(["dataset", "row", "scheme", metric]).expect("in-memory write");
    let ns = t.schemes.len();
    for (d, dataset) in t.datasets.iter().enumerate() {
        for (r, row) in t.rows.iter().enumerate() {
            for (s, scheme) in t.schemes.iter().enumerate() {
                let v = t.cells[r][d * ns + s].map(|v| v.to_string()).unwrap_or_default();
                w.write_record([dataset.as_str(), row, scheme.short(), &v]).expect("in-memory write");
            }
        }
        if let Some(b) = t.baseline[d * ns] {
            w.write_record([dataset.as_str(), "baseline", "", &b.to_string()]).expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("flush to memory")).expect("csv is utf-8")
}

#[derive(Debug, Default, Clone, PartialEq, Serialize)]
pub struct Ingested {
    pub records: Vec<RunRecord>,
    pub baselines: Vec<Baseline>,
}

fn report_from(values: &[(MetricField, f64)]) -> MetricReport {
    let mut r = MetricReport { bertscore_f: None, bleu: 0.0, meteor: 0.0, rouge1_f: 0.0, rouge2_f: 0.0, rouge_l_f: 0.0 };
    for &(f, v) in values {
        match f {
            MetricField::BertScore => r.bertscore_f = Some(v),
            MetricField::Bleu => r.bleu = v,
            MetricField::Meteor => r.meteor = v,
            MetricField::Rouge1 => r.rouge1_f = v,
            MetricField::Rouge2 => r.rouge2_f = v,
            MetricField::RougeL => r.rouge_l_f = v,
        }
    }
    r
}

/// Reads long-format CSV into records and baselines. `path` labels errors.
pub fn ingest_csv(text: &str, path: &Path) -> Result<Ingested> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(|e| Error::format(path, e))?.clone();
    let col = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let (Some(dc), Some(rc), Some(sc)) = (col("dataset"), col("row"), col("scheme")) else {
        return Err(Error::format(path, "header must name dataset, row and scheme columns"));
    };
    let metrics: Vec<(usize, MetricField)> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| ![dc, rc, sc].contains(i))
        .map(|(i, h)| h.parse::<MetricField>().map(|m| (i, m)).map_err(|e| Error::line(path, 1, e)))
        .collect::<Result<_>>()?;
    let mut out = Ingested::default();
    for (n, rec) in rdr.records().enumerate() {
        let line = n + 2;
        let rec = rec.map_err(|e| Error::line(path, line, e))?;
        let values = metrics
            .iter()
            .filter(|(i, _)| !rec[*i].is_empty())
            .map(|&(i, m)| {
                rec[i].parse::<f64>().map(|v| (m, v)).map_err(|_| Error::line(path, line, format!("bad {m} value `{}`", &rec[i])))
            })
            .collect::<Result<Vec<_>>>()?;
        let report = report_from(&values);
        let dataset = rec[dc].to_string();
        if rec[rc].eq_ignore_ascii_case("baseline") {
            out.baselines.push(Baseline { dataset, report });
            continue;
        }
        let families = parse_label(&rec[rc]).map_err(|e| Error::line(path, line, e))?;
        let kind: SchemeKind = rec[sc].parse().map_err(|e| Error::line(path, line, e))?;
        let scheme = SchemeConfig::new(kind, families.len());
        let plan = ExperimentPlan::new(RqTag::Custom, &families, scheme, dataset)?;
        out.records.push(RunRecord {
            plan,
            report,
            wall_time: None,
            manifest_digest: String::new(),
            trainer: "ingested".into(),
            prefinetune_batches: 0,
            finetune_batches: 0,
        });
    }
    Ok(out)
}
