//! Population comparison of two therapy arms over the same cohort.

use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::metrics::MetricsReport;
use super::stats::paired_t_test;
use crate::error::{Error, Result};

pub const SIGNIFICANCE_LEVEL: f64 = 0.05;

/// Table rows, in reporting order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Metric {
    Min,
    Max,
    Mean,
    PctBelow54,
    PctBelow70,
    PctInRange,
    PctAbove180,
    PctAbove250,
    AvgDailyBolus,
    AvgDailyBasal,
}

impl Metric {
    pub const ALL: [Metric; 10] = [
        Metric::Min,
        Metric::Max,
        Metric::Mean,
        Metric::PctBelow54,
        Metric::PctBelow70,
        Metric::PctInRange,
        Metric::PctAbove180,
        Metric::PctAbove250,
        Metric::AvgDailyBolus,
        Metric::AvgDailyBasal,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Metric::Min => "min [mg/dL]",
            Metric::Max => "max [mg/dL]",
            Metric::Mean => "mean [mg/dL]",
            Metric::PctBelow54 => "% time < 54 [mg/dL]",
            Metric::PctBelow70 => "% time < 70 [mg/dL]",
            Metric::PctInRange => "% time in [70, 180] [mg/dL]",
            Metric::PctAbove180 => "% time > 180 [mg/dL]",
            Metric::PctAbove250 => "% time > 250 [mg/dL]",
            Metric::AvgDailyBolus => "Avg Daily Bolus [U]",
            Metric::AvgDailyBasal => "Avg Daily Basal [U]",
        }
    }

    pub fn of(self, r: &MetricsReport) -> f64 {
        match self {
            Metric::Min => r.min,
            Metric::Max => r.max,
            Metric::Mean => r.mean,
            Metric::PctBelow54 => r.pct_below_54,
            Metric::PctBelow70 => r.pct_below_70,
            Metric::PctInRange => r.pct_in_70_180,
            Metric::PctAbove180 => r.pct_above_180,
            Metric::PctAbove250 => r.pct_above_250,
            Metric::AvgDailyBolus => r.avg_daily_bolus,
            Metric::AvgDailyBasal => r.avg_daily_basal,
        }
    }
}

/// Per-patient reports of one arm.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmReports {
    pub label: String,
    pub patients: Vec<(u32, MetricsReport)>,
}

impl ArmReports {
    pub fn values(&self, metric: Metric) -> Vec<f64> {
        self.patients.iter().map(|(_, r)| metric.of(r)).collect()
    }

    pub fn summary(&self, metric: Metric) -> Summary {
        Summary::of(&self.values(metric))
    }
}

/// Population mean and sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
}

impl Summary {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let std = if xs.len() > 1 { (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() } else { 0.0 };
        Self { mean, std }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Significance {
    P(f64),
    /// Every paired difference is the same non-zero constant.
    Degenerate,
}

impl Significance {
    pub fn is_significant(self) -> bool {
        matches!(self, Significance::P(p) if p <= SIGNIFICANCE_LEVEL)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub metric: Metric,
    pub a: Summary,
    pub b: Option<Summary>,
    pub p: Option<Significance>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonTable {
    pub label_a: String,
    pub label_b: Option<String>,
    pub rows: Vec<ComparisonRow>,
}

/// Paired p-value for one metric. All-zero differences give p = 1, matching
/// how identical columns are usually reported.
fn paired_significance(a: &[f64], b: &[f64]) -> Result<Significance> {
    match paired_t_test(a, b) {
        Ok(t) => Ok(Significance::P(t.p)),
        Err(Error::Degenerate(_)) => {
            if a.iter().zip(b).all(|(x, y)| x == y) {
                Ok(Significance::P(1.0))
            } else {
                Ok(Significance::Degenerate)
            }
        }
        Err(e) => Err(e),
    }
}

pub fn compare_arms(a: &ArmReports, b: &ArmReports) -> Result<ComparisonTable> {
    let ids_a: Vec<u32> = a.patients.iter().map(|(id, _)| *id).collect();
    let ids_b: Vec<u32> = b.patients.iter().map(|(id, _)| *id).collect();
    if ids_a != ids_b {
        return Err(Error::InvalidArgument(format!("arms cover different cohorts: {} has {ids_a:?}, {} has {ids_b:?}", a.label, b.label)));
    }
    let rows = Metric::ALL
        .into_iter()
        .map(|metric| {
            let (va, vb) = (a.values(metric), b.values(metric));
            Ok(ComparisonRow { metric, a: Summary::of(&va), b: Some(Summary::of(&vb)), p: Some(paired_significance(&va, &vb)?) })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ComparisonTable { label_a: a.label.clone(), label_b: Some(b.label.clone()), rows })
}

/// Single-arm table: summaries only.
pub fn summarize_arm(a: &ArmReports) -> Result<ComparisonTable> {
    if a.patients.is_empty() {
        return Err(Error::Empty("arm reports"));
    }
    let rows = Metric::ALL.into_iter().map(|metric| ComparisonRow { metric, a: a.summary(metric), b: None, p: None }).collect();
    Ok(ComparisonTable { label_a: a.label.clone(), label_b: None, rows })
}

fn fmt_p(p: Option<Significance>) -> String {
    match p {
        Some(Significance::P(p)) => format!("{p:.4}"),
        Some(Significance::Degenerate) => "degenerate".into(),
        None => String::new(),
    }
}

impl ComparisonTable {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["metric".to_string(), format!("{}_mean", self.label_a), format!("{}_std", self.label_a)];
        if let Some(b) = &self.label_b {
            header.extend([format!("{b}_mean"), format!("{b}_std"), "p_value".into(), "significant".into()]);
        }
        out.write_record(&header)?;
        for row in &self.rows {
            let mut rec = vec![row.metric.label().to_string(), row.a.mean.to_string(), row.a.std.to_string()];
            if let Some(b) = row.b {
                rec.extend([b.mean.to_string(), b.std.to_string(), fmt_p(row.p)]);
                rec.push(row.p.is_some_and(Significance::is_significant).to_string());
            }
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Aligned plain-text rendering; significant p-values are starred.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let b_label = self.label_b.as_deref();
        let _ = write!(s, "{:<30}{:>22}", "Metric", self.label_a);
        if let Some(b) = b_label {
            let _ = write!(s, "{:>22}{:>12}", b, "p-value");
        }
        s.push('\n');
        for row in &self.rows {
            let _ = write!(s, "{:<30}{:>22}", row.metric.label(), format!("{:.2} ± {:.2}", row.a.mean, row.a.std));
            if let Some(b) = row.b {
                let star = if row.p.is_some_and(Significance::is_significant) { "*" } else { "" };
                let _ = write!(s, "{:>22}{:>12}", format!("{:.2} ± {:.2}", b.mean, b.std), format!("{}{star}", fmt_p(row.p)));
            }
            s.push('\n');
        }
        s
    }
}
