//! Weekly glycemic statistics.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::sim::{CgmTrace, DoseKind, DoseLog};
use crate::MINUTES_PER_DAY;

/// Inclusive range of 1-based simulation days; day k covers minutes
/// `[(k-1)·1440, k·1440)`. The default is the second week, days 8–14.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalWindow {
    pub first_day: u32,
    pub last_day: u32,
}

impl Default for EvalWindow {
    fn default() -> Self {
        Self { first_day: 8, last_day: 14 }
    }
}

impl EvalWindow {
    pub fn new(first_day: u32, last_day: u32) -> Result<Self> {
        let w = Self { first_day, last_day };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.first_day >= 1 && self.first_day <= self.last_day, || {
            format!("empty evaluation window: days {}..={}", self.first_day, self.last_day)
        })
    }

    pub fn days(&self) -> u32 {
        self.last_day + 1 - self.first_day
    }

    pub fn minutes(&self) -> Range<usize> {
        let m = MINUTES_PER_DAY as usize;
        (self.first_day as usize - 1) * m..self.last_day as usize * m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub pct_below_54: f64,
    pub pct_below_70: f64,
    pub pct_in_70_180: f64,
    pub pct_above_180: f64,
    pub pct_above_250: f64,
    pub avg_daily_bolus: f64,
    pub avg_daily_basal: f64,
}

/// Mergeable glucose statistics. In range is the closed band [70, 180] so
/// that below-70, in-range and above-180 partition every reading; severe
/// bands are strict (< 54, > 250).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlucoseAccumulator {
    pub n: usize,
    pub sum: f64,
    pub min: f64,
    pub max: f64,
    pub below_54: usize,
    pub below_70: usize,
    pub in_range: usize,
    pub above_180: usize,
    pub above_250: usize,
}

impl Default for GlucoseAccumulator {
    fn default() -> Self {
        Self {
            n: 0,
            sum: 0.0,
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
            below_54: 0,
            below_70: 0,
            in_range: 0,
            above_180: 0,
            above_250: 0,
        }
    }
}

impl GlucoseAccumulator {
    pub fn push(&mut self, g: f64) {
        self.n += 1;
        self.sum += g;
        self.min = self.min.min(g);
        self.max = self.max.max(g);
        self.below_54 += (g < 54.0) as usize;
        self.below_70 += (g < 70.0) as usize;
        self.in_range += (70.0..=180.0).contains(&g) as usize;
        self.above_180 += (g > 180.0) as usize;
        self.above_250 += (g > 250.0) as usize;
    }

    pub fn extend<'a>(&mut self, samples: impl IntoIterator<Item = &'a f64>) {
        samples.into_iter().for_each(|&g| self.push(g));
    }

    pub fn merge(&mut self, other: &Self) {
        self.n += other.n;
        self.sum += other.sum;
        self.min = self.min.min(other.min);
        self.max = self.max.max(other.max);
        self.below_54 += other.below_54;
        self.below_70 += other.below_70;
        self.in_range += other.in_range;
        self.above_180 += other.above_180;
        self.above_250 += other.above_250;
    }

    fn pct(&self, count: usize) -> f64 {
        100.0 * count as f64 / self.n as f64
    }

    /// Glucose part of a report; dose averages are left at zero.
    pub fn report(&self) -> Result<MetricsReport> {
        if self.n == 0 {
            return Err(Error::Empty("evaluation window"));
        }
        Ok(MetricsReport {
            min: self.min,
            max: self.max,
            mean: self.sum / self.n as f64,
            pct_below_54: self.pct(self.below_54),
            pct_below_70: self.pct(self.below_70),
            pct_in_70_180: self.pct(self.in_range),
            pct_above_180: self.pct(self.above_180),
            pct_above_250: self.pct(self.above_250),
            avg_daily_bolus: 0.0,
            avg_daily_basal: 0.0,
        })
    }
}

pub fn glycemic_metrics(trace: &CgmTrace, doses: &DoseLog, window: EvalWindow) -> Result<MetricsReport> {
    window.validate()?;
    let range = window.minutes();
    ensure(trace.samples.len() >= range.end, || format!("trace has {} samples; window needs {}", trace.samples.len(), range.end))?;
    let mut acc = GlucoseAccumulator::default();
    acc.extend(&trace.samples[range.clone()]);
    let mut report = acc.report()?;

    let (lo, hi) = (range.start as f64, range.end as f64);
    let in_window =
        |kind: DoseKind| -> f64 { doses.events.iter().filter(|e| e.kind == kind && e.t >= lo && e.t < hi).map(|e| e.amount).sum() };
    let days = window.days() as f64;
    report.avg_daily_bolus = in_window(DoseKind::RapidBolus) / days;
    report.avg_daily_basal = in_window(DoseKind::LongBasal) / days;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::DoseEvent;
    use proptest::prelude::*;

    fn week_window() -> EvalWindow {
        EvalWindow::new(1, 7).unwrap()
    }

    #[test]
    fn constant_trace() {
        let trace = CgmTrace { samples: vec![125.0; 7 * 1440] };
        let r = glycemic_metrics(&trace, &DoseLog::default(), week_window()).unwrap();
        assert_eq!((r.min, r.max, r.mean), (125.0, 125.0, 125.0));
        assert_eq!(r.pct_in_70_180, 100.0);
        assert_eq!(r.pct_below_54 + r.pct_below_70 + r.pct_above_180 + r.pct_above_250, 0.0);
    }

    #[test]
    fn half_low_half_high() {
        let n = 7 * 1440;
        let samples = (0..n).map(|k| if k % 2 == 0 { 60.0 } else { 200.0 }).collect();
        let r = glycemic_metrics(&CgmTrace { samples }, &DoseLog::default(), week_window()).unwrap();
        assert_eq!(r.pct_below_70, 50.0);
        assert_eq!(r.pct_above_180, 50.0);
        assert_eq!(r.pct_in_70_180, 0.0);
        assert_eq!(r.pct_below_54, 0.0);
    }

    #[test]
    fn daily_dose_averages() {
        let mut events = Vec::new();
        for d in 0..7 {
            let t0 = d as f64 * 1440.0;
            events.push(DoseEvent { t: t0, kind: DoseKind::LongBasal, amount: 28.0 });
            for k in 0..3 {
                events.push(DoseEvent { t: t0 + 10.0 + 360.0 * k as f64, kind: DoseKind::RapidBolus, amount: 5.0 });
            }
        }
        // outside the window
        events.push(DoseEvent { t: 7.0 * 1440.0, kind: DoseKind::LongBasal, amount: 99.0 });
        let trace = CgmTrace { samples: vec![125.0; 8 * 1440] };
        let r = glycemic_metrics(&trace, &DoseLog { events }, week_window()).unwrap();
        assert!((r.avg_daily_basal - 28.0).abs() < 1e-12);
        assert!((r.avg_daily_bolus - 15.0).abs() < 1e-12);
    }

    #[test]
    fn window_bookkeeping() {
        let w = EvalWindow::default();
        assert_eq!(w.days(), 7);
        assert_eq!(w.minutes(), 7 * 1440..14 * 1440);
        assert!(EvalWindow::new(5, 4).is_err());
        assert!(EvalWindow::new(0, 4).is_err());
    }

    #[test]
    fn short_trace_is_rejected() {
        let trace = CgmTrace { samples: vec![125.0; 100] };
        assert!(glycemic_metrics(&trace, &DoseLog::default(), week_window()).is_err());
    }

    #[test]
    fn boundary_readings_are_in_range() {
        let mut acc = GlucoseAccumulator::default();
        acc.extend(&[70.0, 180.0, 54.0, 250.0]);
        let r = acc.report().unwrap();
        // 70 and 180 are in range; 54 and 250 are outside it but not severe
        assert_eq!(r.pct_in_70_180, 50.0);
        assert_eq!((r.pct_below_70, r.pct_above_180), (25.0, 25.0));
        assert_eq!(r.pct_below_54 + r.pct_above_250, 0.0);
    }

    proptest! {
        #[test]
        fn bands_partition(xs in prop::collection::vec(20.0..420.0f64, 1..500)) {
            let mut acc = GlucoseAccumulator::default();
            acc.extend(&xs);
            let r = acc.report().unwrap();
            prop_assert!((r.pct_below_70 + r.pct_in_70_180 + r.pct_above_180 - 100.0).abs() < 1e-9);
            prop_assert!(r.pct_below_54 <= r.pct_below_70);
            prop_assert!(r.pct_above_250 <= r.pct_above_180);
        }

        #[test]
        fn chunking_invariant(xs in prop::collection::vec(20.0..420.0f64, 2..500), cut in any::<usize>()) {
            let cut = 1 + cut % (xs.len() - 1);
            let mut whole = GlucoseAccumulator::default();
            whole.extend(&xs);
            let (mut a, mut b) = (GlucoseAccumulator::default(), GlucoseAccumulator::default());
            a.extend(&xs[..cut]);
            b.extend(&xs[cut..]);
            a.merge(&b);
            let (rw, rc) = (whole.report().unwrap(), a.report().unwrap());
            prop_assert_eq!(rw.min, rc.min);
            prop_assert_eq!(rw.max, rc.max);
            prop_assert!((rw.mean - rc.mean).abs() < 1e-9);
            prop_assert_eq!(rw.pct_in_70_180, rc.pct_in_70_180);
            prop_assert_eq!(rw.pct_below_54, rc.pct_below_54);
            prop_assert_eq!(rw.pct_above_250, rc.pct_above_250);
        }
    }
}
