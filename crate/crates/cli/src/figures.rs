//! Plot-ready data from experiment CSVs: columns `x, y, y_err, series, prediction`.

use std::collections::HashMap;
use std::io::Read;
use std::str::FromStr;

use serde::Serialize;

use crate::RunError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Figure {
    /// Scalar sweep: AUC against k per budget, with predictions.
    Fig1a,
    /// Top-K sweep: AUC against k per budget.
    Fig1b,
    /// Estimator calibration: null false-positive rate against theta.
    Fig3a,
    /// Estimator calibration: mean estimated coalition size against theta at k_true = 10.
    Fig3b,
    /// Same-tenant against external coalitions under shared index access.
    #[value(name = "figA1", alias = "figa1")]
    FigA1,
}

impl FromStr for Figure {
    type Err = RunError;
    fn from_str(s: &str) -> Result<Self, RunError> {
        <Figure as clap::ValueEnum>::from_str(s, true).map_err(|_| RunError::Input(format!("unknown figure {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FigureRow {
    pub x: f64,
    pub y: f64,
    pub y_err: Option<f64>,
    pub series: String,
    pub prediction: Option<f64>,
}

struct Table {
    cols: HashMap<String, usize>,
    rows: Vec<csv::StringRecord>,
}

impl Table {
    fn read(input: impl Read) -> Result<Self, RunError> {
        let mut r = csv::Reader::from_reader(input);
        let cols = r
            .headers()?
            .iter()
            .enumerate()
            .map(|(i, h)| (h.to_owned(), i))
            .collect();
        let rows = r.records().collect::<Result<_, _>>()?;
        Ok(Table { cols, rows })
    }

    fn require(&self, names: &[&str]) -> Result<(), RunError> {
        let missing: Vec<&str> = names.iter().copied().filter(|n| !self.cols.contains_key(*n)).collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(RunError::Input(format!("input is missing columns: {}", missing.join(", "))))
        }
    }

    fn raw<'a>(&self, row: &'a csv::StringRecord, col: &str) -> &'a str {
        row.get(self.cols[col]).unwrap_or("")
    }

    fn num(&self, row: &csv::StringRecord, col: &str) -> Result<f64, RunError> {
        let s = self.raw(row, col);
        s.parse()
            .map_err(|_| RunError::Input(format!("column {col}: {s:?} is not a number")))
    }

    fn opt(&self, row: &csv::StringRecord, col: &str) -> Result<Option<f64>, RunError> {
        match self.cols.get(col).map(|_| self.raw(row, col)) {
            None | Some("") => Ok(None),
            Some(_) => self.num(row, col).map(Some),
        }
    }
}

/// `eps_acc=4` whether the input wrote `4` or `4.0`.
fn eps_label(t: &Table, r: &csv::StringRecord) -> Result<String, RunError> {
    Ok(format!("eps_acc={}", t.num(r, "eps_acc")?))
}

fn auc_vs_k(t: &Table) -> Result<Vec<FigureRow>, RunError> {
    t.require(&["k", "eps_acc", "auc", "delong_se"])?;
    let mut rows = Vec::new();
    let mut predictions = Vec::new();
    for r in &t.rows {
        let series = eps_label(t, r)?;
        let x = t.num(r, "k")?;
        let prediction = t.opt(r, "predicted_auc")?;
        rows.push(FigureRow {
            x,
            y: t.num(r, "auc")?,
            y_err: Some(t.num(r, "delong_se")?),
            series: series.clone(),
            prediction,
        });
        if let Some(p) = prediction {
            predictions.push(FigureRow {
                x,
                y: p,
                y_err: None,
                series: format!("{series} predicted"),
                prediction: Some(p),
            });
        }
    }
    rows.extend(predictions);
    Ok(rows)
}

fn null_fpr(t: &Table) -> Result<Vec<FigureRow>, RunError> {
    t.require(&["theta", "null_fpr", "trials"])?;
    t.rows
        .iter()
        .map(|r| {
            let p = t.num(r, "null_fpr")?;
            let n = t.num(r, "trials")?;
            Ok(FigureRow {
                x: t.num(r, "theta")?,
                y: p,
                y_err: Some((p * (1.0 - p) / n).sqrt()),
                series: "null_fpr".into(),
                prediction: None,
            })
        })
        .collect()
}

fn khat_vs_theta(t: &Table) -> Result<Vec<FigureRow>, RunError> {
    t.require(&["pattern", "k_true", "theta", "mean_khat"])?;
    let mut out = Vec::new();
    for r in &t.rows {
        if t.raw(r, "k_true") != "10" {
            continue;
        }
        out.push(FigureRow {
            x: t.num(r, "theta")?,
            y: t.num(r, "mean_khat")?,
            y_err: None,
            series: t.raw(r, "pattern").to_owned(),
            prediction: None,
        });
    }
    Ok(out)
}

fn regimes(t: &Table) -> Result<Vec<FigureRow>, RunError> {
    t.require(&["k", "eps_acc", "auc_same", "se_same", "auc_external", "se_external"])?;
    let mut same = Vec::new();
    let mut ext = Vec::new();
    for r in &t.rows {
        let eps = eps_label(t, r)?;
        let x = t.num(r, "k")?;
        same.push(FigureRow {
            x,
            y: t.num(r, "auc_same")?,
            y_err: Some(t.num(r, "se_same")?),
            series: format!("same_tenant {eps}"),
            prediction: None,
        });
        ext.push(FigureRow {
            x,
            y: t.num(r, "auc_external")?,
            y_err: Some(t.num(r, "se_external")?),
            series: format!("external {eps}"),
            prediction: None,
        });
    }
    same.extend(ext);
    Ok(same)
}

/// Plot rows for `figure`. Input with no header yields no rows.
pub fn figure_rows(input: impl Read, figure: Figure) -> Result<Vec<FigureRow>, RunError> {
    let t = Table::read(input)?;
    if t.cols.is_empty() || (t.cols.len() == 1 && t.cols.contains_key("")) {
        return Ok(Vec::new());
    }
    match figure {
        Figure::Fig1a | Figure::Fig1b => auc_vs_k(&t),
        Figure::Fig3a => null_fpr(&t),
        Figure::Fig3b => khat_vs_theta(&t),
        Figure::FigA1 => regimes(&t),
    }
}

/// CSV bytes with the header always present.
pub fn figure_csv(rows: &[FigureRow]) -> Result<Vec<u8>, RunError> {
    if rows.is_empty() {
        return Ok(b"x,y,y_err,series,prediction\n".to_vec());
    }
    crate::output::csv_bytes(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_input_gives_header_only() {
        let rows = figure_rows(&b""[..], Figure::Fig1a).unwrap();
        assert!(rows.is_empty());
        assert_eq!(figure_csv(&rows).unwrap(), b"x,y,y_err,series,prediction\n");
    }

    #[test]
    fn missing_columns_are_reported() {
        let e = figure_rows(&b"k,auc\n1,0.5\n"[..], Figure::Fig1a).unwrap_err();
        assert!(e.to_string().contains("eps_acc"), "{e}");
    }

    #[test]
    fn predictions_become_extra_rows() {
        let csv = "k,eps_acc,auc,delong_se,predicted_auc\n1,4,0.53,0.004,0.531\n20,4,0.64,0.004,\n";
        let rows = figure_rows(csv.as_bytes(), Figure::Fig1a).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[2].series, "eps_acc=4 predicted");
        assert_eq!(rows[2].y, 0.531);
        assert_eq!(rows[1].prediction, None);
    }
}
