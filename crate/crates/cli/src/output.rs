//! Deterministic persistence: CSV tables, the summary report, the plot
//! script and the partial-results marker.

use std::fs;
use std::io;
use std::path::Path;

/// Name of the file left behind when a run aborts.
pub const PARTIAL_MARKER: &str = "PARTIAL";

/// Scientific notation with `precision` significant digits.
pub fn fmt_float(x: f64, precision: usize) -> String {
    if x.is_finite() {
        format!("{:.*e}", precision.saturating_sub(1), x)
    } else {
        format!("{x}")
    }
}

/// A CSV table built row by row with a fixed float format.
#[derive(Debug, Clone)]
pub struct Table {
    precision: usize,
    text: String,
}

/// One CSV cell.
pub enum Cell<'a> {
    F(f64),
    U(usize),
    B(bool),
    S(&'a str),
    Empty,
}

impl Table {
    pub fn new(header: &[&str], precision: usize) -> Self {
        Self { precision, text: format!("{}\n", header.join(",")) }
    }

    pub fn row(&mut self, cells: &[Cell<'_>]) {
        let parts: Vec<String> = cells
            .iter()
            .map(|c| match c {
                Cell::F(x) => fmt_float(*x, self.precision),
                Cell::U(n) => n.to_string(),
                Cell::B(b) => b.to_string(),
                Cell::S(s) => s.to_string(),
                Cell::Empty => String::new(),
            })
            .collect();
        self.text.push_str(&parts.join(","));
        self.text.push('\n');
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn write(&self, path: &Path) -> io::Result<()> {
        fs::write(path, &self.text)
    }
}

/// Writes the marker recording why a run stopped early.
pub fn mark_partial(dir: &Path, reason: &str) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(PARTIAL_MARKER), format!("run aborted: {reason}\n"))
}

/// Prepares a clean output directory (removes a stale marker).
pub fn prepare_dir(dir: &Path) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    match fs::remove_file(dir.join(PARTIAL_MARKER)) {
        Err(e) if e.kind() != io::ErrorKind::NotFound => Err(e),
        _ => Ok(()),
    }
}

pub const PLOT_SCRIPT: &str = r#"#!/usr/bin/env python3
"""Plots whichever result tables are present next to this script."""
import csv
import math
import os
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))


def read(name):
    path = os.path.join(here, name)
    if not os.path.exists(path):
        return None
    with open(path) as f:
        return list(csv.DictReader(f))


def positive(rows, x, y):
    pts = [(float(r[x]), float(r[y])) for r in rows if r[y] and float(r[y]) > 0]
    return [p[0] for p in pts], [p[1] for p in pts]


made = []
levels = read("levels.csv")
if levels:
    fig, ax = plt.subplots()
    ax.semilogy(*positive(levels, "k", "U_k"), "o-", label="U_k")
    ax.semilogy(*positive(levels, "k", "tail_measure"), "s--", label="measure{|u| >= 2 C_k}")
    ax.set_xlabel("k")
    ax.legend()
    fig.savefig(os.path.join(here, "levels.png"), dpi=120)
    made.append("levels.png")

extrema = read("extrema.csv")
if extrema:
    fig, ax = plt.subplots()
    ax.plot([float(r["t"]) for r in extrema], [float(r["sup_abs"]) for r in extrema])
    ax.set_xlabel("t")
    ax.set_ylabel("sup |u|")
    fig.savefig(os.path.join(here, "extrema.png"), dpi=120)
    made.append("extrema.png")

sweep = read("sweep.csv")
if sweep:
    fig, ax = plt.subplots()
    floors = [float(r["floor"]) for r in sweep]
    xs = [f if f > 0 else min([g for g in floors if g > 0] or [1.0]) / 10 for f in floors]
    ax.semilogx(xs, [float(r["sup_after_t0"]) for r in sweep], "o-")
    ax.set_xlabel("density floor (0 drawn one decade left)")
    ax.set_ylabel("sup_{t >= t0} |theta|")
    fig.savefig(os.path.join(here, "sweep.png"), dpi=120)
    made.append("sweep.png")

trace = read("trace.csv")
if trace:
    fig, ax = plt.subplots()
    ax.semilogy(*positive(trace, "k", "U_k"), ".-")
    ax.set_xlabel("k")
    ax.set_ylabel("U_k (saturated recursion)")
    fig.savefig(os.path.join(here, "trace.png"), dpi=120)
    made.append("trace.png")

print("wrote", ", ".join(made) if made else "nothing", file=sys.stderr)
"#;

pub fn write_plot_script(dir: &Path) -> io::Result<()> {
    fs::write(dir.join("plot.py"), PLOT_SCRIPT)
}
