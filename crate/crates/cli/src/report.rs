//! Consolidated, plot-ready report tables built from run artifacts only.

use std::fmt::Write as _;

use anyhow::{bail, Context, Result};

use crate::commands::{EVAL_ITERATIONS_CSV, EVAL_SUMMARY_CSV, SENSITIVITY_CSV};
use crate::rundir::RunDir;

pub const EPB_RELIABILITY: &str = "report/epb_reliability.csv";
pub const SENSITIVITY: &str = "report/sensitivity.csv";
pub const ACCURACY: &str = "report/accuracy.csv";

const METHOD_ORDER: [&str; 3] = ["DT", "IGDT", "CL-DIGDT"];

/// Header-keyed rows of a plain comma-separated file.
struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn parse(name: &str, text: &str) -> Result<Table> {
        let mut lines = text.lines().filter(|l| !l.is_empty());
        let header: Vec<String> = lines
            .next()
            .with_context(|| format!("{name} is empty"))?
            .split(',')
            .map(str::to_string)
            .collect();
        let rows: Vec<Vec<String>> = lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
        if let Some(r) = rows.iter().find(|r| r.len() != header.len()) {
            bail!("{name}: row {:?} does not match header", r);
        }
        Ok(Table { header, rows })
    }

    fn col(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .with_context(|| format!("column {name} missing"))
    }
}

fn fixed(cell: &str, digits: usize) -> Result<String> {
    if cell.is_empty() {
        return Ok(String::new());
    }
    let v: f64 = cell.parse().with_context(|| format!("bad number {cell:?}"))?;
    Ok(format!("{v:.digits$}"))
}

pub fn emit_report(dir: &RunDir) -> Result<()> {
    dir.require(&[EVAL_SUMMARY_CSV, EVAL_ITERATIONS_CSV, SENSITIVITY_CSV])?;
    dir.write(EPB_RELIABILITY, &epb_table(&Table::parse(EVAL_SUMMARY_CSV, &dir.read(EVAL_SUMMARY_CSV)?)?)?)?;
    dir.write(SENSITIVITY, &sensitivity_table(&Table::parse(SENSITIVITY_CSV, &dir.read(SENSITIVITY_CSV)?)?)?)?;
    dir.write(ACCURACY, &accuracy_table(&Table::parse(EVAL_ITERATIONS_CSV, &dir.read(EVAL_ITERATIONS_CSV)?)?)?)?;
    println!("wrote {EPB_RELIABILITY}, {SENSITIVITY}, {ACCURACY}");
    Ok(())
}

fn epb_table(t: &Table) -> Result<String> {
    let (m, f, e, r, n) = (
        t.col("method")?,
        t.col("first_stage_cost")?,
        t.col("epb")?,
        t.col("reliability")?,
        t.col("nf")?,
    );
    let mut rows: Vec<&Vec<String>> = t.rows.iter().collect();
    let rank = |name: &str| METHOD_ORDER.iter().position(|x| *x == name).unwrap_or(METHOD_ORDER.len());
    rows.sort_by(|a, b| (rank(&a[m]), &a[m]).cmp(&(rank(&b[m]), &b[m])));
    let mut s = String::from("method,first_stage_cost,epb,reliability,nf\n");
    for row in rows {
        writeln!(s, "{},{},{},{},{}", row[m], fixed(&row[f], 2)?, fixed(&row[e], 2)?, fixed(&row[r], 4)?, row[n])?;
    }
    Ok(s)
}

fn sensitivity_table(t: &Table) -> Result<String> {
    let (sg, d, a) = (t.col("sigma")?, t.col("delta_star")?, t.col("alpha_star")?);
    let mut s = String::from("sigma,delta_star,alpha_star\n");
    for row in &t.rows {
        writeln!(s, "{},{},{}", fixed(&row[sg], 2)?, fixed(&row[d], 6)?, fixed(&row[a], 6)?)?;
    }
    Ok(s)
}

fn accuracy_table(t: &Table) -> Result<String> {
    let (it, a, lb, ub, e, r) = (
        t.col("iteration")?,
        t.col("incumbent_alpha")?,
        t.col("lb")?,
        t.col("ub")?,
        t.col("epb")?,
        t.col("reliability")?,
    );
    let mut s = String::from("iteration,incumbent_alpha,range,epb,reliability\n");
    for row in &t.rows {
        let k: usize = row[it].parse().with_context(|| format!("bad iteration {:?}", row[it]))?;
        let digits = k + 1;
        writeln!(
            s,
            "{},{},{}-{},{},{}",
            k,
            fixed(&row[a], digits)?,
            fixed(&row[lb], digits)?,
            fixed(&row[ub], digits)?,
            fixed(&row[e], 2)?,
            fixed(&row[r], 4)?
        )?;
    }
    Ok(s)
}
