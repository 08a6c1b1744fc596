#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mtlforge::table::ingest_csv;
use mtlforge_core::{tabulate, MetricField, ResultsTable};

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mtlforge"))
}

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// `(row label, scheme, dataset)`
pub type Cell = (&'static str, &'static str, &'static str);

/// A reference METEOR grid with its highlighted cells, ties included.
pub struct MarkedGrid {
    pub file: &'static str,
    pub bold: &'static [Cell],
    pub underline: &'static [Cell],
    /// Winning underline cell and value per dataset.
    pub underline_winner: &'static [(Cell, f64)],
}

const R: &str = "reddit_tifu";
const A: &str = "arxiv";

pub const GRIDS: [MarkedGrid; 4] = [
    MarkedGrid {
        file: "rq1_meteor.csv",
        bold: &[
            ("SUM", "seq", R),
            ("RC", "sim", R),
            ("SUM", "sim", R),
            ("SUM", "cMTL", R),
            ("SUM", "seq", A),
            ("RC+", "sim", A),
            ("CLS", "cMTL", A),
            ("SUM", "cMTL", A),
        ],
        underline: &[("RC", "sim", R), ("SUM", "sim", R), ("RC+", "sim", A)],
        underline_winner: &[(("RC", "sim", R), 0.235), (("RC+", "sim", A), 0.289)],
    },
    MarkedGrid {
        file: "rq2_meteor.csv",
        bold: &[
            ("SUM+RC", "seq", R),
            ("SUM+CLS", "sim", R),
            ("SUM+NLI", "sim", R),
            ("SUM+CMNS", "cMTL", R),
            ("SUM+RC", "cMTL", R),
            ("SUM+RC+", "cMTL", R),
            ("SUM+CLS", "seq", A),
            ("SUM+RC", "seq", A),
            ("SUM+NLI", "sim", A),
            ("SUM+CMNS", "cMTL", A),
        ],
        underline: &[("SUM+CMNS", "cMTL", R), ("SUM+RC", "cMTL", R), ("SUM+RC+", "cMTL", R), ("SUM+CMNS", "cMTL", A)],
        underline_winner: &[(("SUM+CMNS", "cMTL", R), 0.234), (("SUM+CMNS", "cMTL", A), 0.288)],
    },
    MarkedGrid {
        file: "rq3_meteor.csv",
        bold: &[
            ("NLI+RC+", "seq", R),
            ("NLI+RC+", "sim", R),
            ("CMNS+RC+", "cMTL", R),
            ("CLS+RC", "seq", A),
            ("RC+RC+", "seq", A),
            ("NLI+RC+", "sim", A),
            ("CLS+RC+", "cMTL", A),
        ],
        underline: &[("NLI+RC+", "sim", R), ("NLI+RC+", "sim", A)],
        underline_winner: &[(("NLI+RC+", "sim", R), 0.234), (("NLI+RC+", "sim", A), 0.290)],
    },
    MarkedGrid {
        file: "rq4_meteor.csv",
        bold: &[
            ("SUM+CLS+RC", "seq", R),
            ("SUM+CLS+RC+", "seq", R),
            ("SUM+CMNS+NLI", "sim", R),
            ("SUM+CMNS+RC", "cMTL", R),
        ],
        underline: &[("SUM+CMNS+NLI", "sim", R)],
        underline_winner: &[(("SUM+CMNS+NLI", "sim", R), 0.236)],
    },
];

pub fn load_grid(file: &str) -> ResultsTable {
    let path = fixture(file);
    let text = std::fs::read_to_string(&path).unwrap();
    let ing = ingest_csv(&text, &path).unwrap();
    tabulate(&ing.records, MetricField::Meteor, &ing.baselines).unwrap()
}

fn cell_of(t: &ResultsTable, row: usize, col: usize) -> (String, String, String) {
    let ns = t.schemes.len();
    (t.rows[row].clone(), t.schemes[col % ns].short().to_string(), t.datasets[col / ns].clone())
}

fn owned(cells: &[Cell]) -> BTreeSet<(String, String, String)> {
    cells.iter().map(|(r, s, d)| (r.to_string(), s.to_string(), d.to_string())).collect()
}

/// Compares every highlighted cell of `t` with `g`; the error lists the differences.
pub fn check_marks(t: &ResultsTable, g: &MarkedGrid) -> Result<(), String> {
    let mut bold = BTreeSet::new();
    let mut underline = BTreeSet::new();
    for row in 0..t.rows.len() {
        for col in 0..t.column_count() {
            if t.is_bold(row, col) {
                bold.insert(cell_of(t, row, col));
            }
            if t.is_underlined(row, col) {
                underline.insert(cell_of(t, row, col));
            }
        }
    }
    let mut problems = Vec::new();
    if bold != owned(g.bold) {
        problems.push(format!("bold {bold:?} != {:?}", owned(g.bold)));
    }
    if underline != owned(g.underline) {
        problems.push(format!("underline {underline:?} != {:?}", owned(g.underline)));
    }
    for (d, ((row, scheme, dataset), value)) in g.underline_winner.iter().enumerate() {
        let Some((r, c)) = t.underline[d] else {
            problems.push(format!("no underline for {dataset}"));
            continue;
        };
        let got = cell_of(t, r, c);
        if got != (row.to_string(), scheme.to_string(), dataset.to_string()) || t.cells[r][c] != Some(*value) {
            problems.push(format!("underline winner {got:?} = {:?}, expected {row}/{scheme}/{dataset} = {value}", t.cells[r][c]));
        }
    }
    for col in 0..t.column_count() {
        if t.bold[col].is_none() {
            problems.push(format!("column {col} has no bold cell"));
        }
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(problems.join("; "))
    }
}

/// Writes a synthetic registry with one downstream set and a config into `dir`.
pub fn synth(dir: &Path, extra_config: &str) -> PathBuf {
    let o = run(bin().args(["synth", "--per-task", "12", "--eval-size", "6", "--downstream", "reddit_tifu", "--dir"]).arg(dir));
    assert!(o.status.success(), "{}", stderr(&o));
    let config = dir.join("config.toml");
    let mut text = std::fs::read_to_string(&config).unwrap();
    text.push_str(extra_config);
    std::fs::write(&config, text).unwrap();
    config
}
