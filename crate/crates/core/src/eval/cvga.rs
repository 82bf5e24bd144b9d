//! Control-variability grid analysis.
//!
//! Each patient-week becomes one point: x is the minimum glucose clamped to
//! [50, 110] mg/dL (drawn with 110 on the left), y the maximum clamped to
//! [110, 400] mg/dL. The 3×3 grid has column edges at 110/90/70/50 and row
//! edges at 110/180/300/400. Readings sitting exactly on an edge belong to
//! the less severe cell.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::metrics::EvalWindow;
use crate::error::{ensure, Error, Result};
use crate::sim::CgmTrace;

pub const X_RANGE: (f64, f64) = (50.0, 110.0);
pub const Y_RANGE: (f64, f64) = (110.0, 400.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CvgaZone {
    A,
    LowerB,
    B,
    UpperB,
    LowerC,
    UpperC,
    LowerD,
    UpperD,
    E,
}

impl CvgaZone {
    pub const ALL: [CvgaZone; 9] = [
        CvgaZone::A,
        CvgaZone::LowerB,
        CvgaZone::B,
        CvgaZone::UpperB,
        CvgaZone::LowerC,
        CvgaZone::UpperC,
        CvgaZone::LowerD,
        CvgaZone::UpperD,
        CvgaZone::E,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CvgaZone::A => "A",
            CvgaZone::LowerB => "LowerB",
            CvgaZone::B => "B",
            CvgaZone::UpperB => "UpperB",
            CvgaZone::LowerC => "LowerC",
            CvgaZone::UpperC => "UpperC",
            CvgaZone::LowerD => "LowerD",
            CvgaZone::UpperD => "UpperD",
            CvgaZone::E => "E",
        }
    }

    /// (column, row) of the zone; column 0 is min BG in [90, 110], row 0 is
    /// max BG in [110, 180].
    pub fn cell(self) -> (usize, usize) {
        match self {
            CvgaZone::A => (0, 0),
            CvgaZone::LowerB => (1, 0),
            CvgaZone::LowerC => (2, 0),
            CvgaZone::UpperB => (0, 1),
            CvgaZone::B => (1, 1),
            CvgaZone::LowerD => (2, 1),
            CvgaZone::UpperC => (0, 2),
            CvgaZone::UpperD => (1, 2),
            CvgaZone::E => (2, 2),
        }
    }
}

impl fmt::Display for CvgaZone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CvgaZone {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CvgaZone::ALL.into_iter().find(|z| z.as_str() == s.trim()).ok_or_else(|| Error::InvalidArgument(format!("unknown CVGA zone `{s}`")))
    }
}

const GRID: [[CvgaZone; 3]; 3] = [
    [CvgaZone::A, CvgaZone::LowerB, CvgaZone::LowerC],
    [CvgaZone::UpperB, CvgaZone::B, CvgaZone::LowerD],
    [CvgaZone::UpperC, CvgaZone::UpperD, CvgaZone::E],
];

/// Zone of an already clamped point.
pub fn cvga_zone(x: f64, y: f64) -> CvgaZone {
    let col = if x >= 90.0 {
        0
    } else if x >= 70.0 {
        1
    } else {
        2
    };
    let row = if y <= 180.0 {
        0
    } else if y <= 300.0 {
        1
    } else {
        2
    };
    GRID[row][col]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvgaPoint {
    pub x: f64,
    pub y: f64,
    pub zone: CvgaZone,
}

impl CvgaPoint {
    pub fn from_extremes(min_bg: f64, max_bg: f64) -> Self {
        let x = min_bg.clamp(X_RANGE.0, X_RANGE.1);
        let y = max_bg.clamp(Y_RANGE.0, Y_RANGE.1);
        Self { x, y, zone: cvga_zone(x, y) }
    }
}

pub fn cvga_point(trace: &CgmTrace, window: EvalWindow) -> Result<CvgaPoint> {
    window.validate()?;
    let range = window.minutes();
    ensure(trace.samples.len() >= range.end, || format!("trace has {} samples; window needs {}", trace.samples.len(), range.end))?;
    let slice = &trace.samples[range];
    let min = slice.iter().copied().fold(f64::INFINITY, f64::min);
    let max = slice.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(CvgaPoint::from_extremes(min, max))
}

/// One row of the CVGA CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvgaRecord {
    pub patient_id: u32,
    pub arm: String,
    pub x: f64,
    pub y: f64,
    pub zone: CvgaZone,
}

pub fn write_cvga_csv<W: Write>(records: &[CvgaRecord], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["patient_id", "arm", "x", "y", "zone"])?;
    for r in records {
        out.write_record([r.patient_id.to_string(), r.arm.clone(), r.x.to_string(), r.y.to_string(), r.zone.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_cvga_csv<R: Read>(r: R) -> Result<Vec<CvgaRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let mut out = Vec::new();
    for row in rdr.deserialize::<(u32, String, f64, f64, String)>() {
        let (patient_id, arm, x, y, zone) = row?;
        out.push(CvgaRecord { patient_id, arm, x, y, zone: zone.parse()? });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zone_fixtures() {
        assert_eq!(CvgaPoint::from_extremes(100.0, 150.0).zone, CvgaZone::A);
        assert_eq!(CvgaPoint::from_extremes(60.0, 350.0).zone, CvgaZone::E);
        assert_eq!(CvgaPoint::from_extremes(95.0, 250.0).zone, CvgaZone::UpperB);
        assert_eq!(CvgaPoint::from_extremes(80.0, 250.0).zone, CvgaZone::B);
        assert_eq!(CvgaPoint::from_extremes(80.0, 150.0).zone, CvgaZone::LowerB);
        assert_eq!(CvgaPoint::from_extremes(60.0, 150.0).zone, CvgaZone::LowerC);
        assert_eq!(CvgaPoint::from_extremes(100.0, 350.0).zone, CvgaZone::UpperC);
        assert_eq!(CvgaPoint::from_extremes(60.0, 250.0).zone, CvgaZone::LowerD);
        assert_eq!(CvgaPoint::from_extremes(80.0, 350.0).zone, CvgaZone::UpperD);
    }

    #[test]
    fn clamping_happens_before_lookup() {
        let p = CvgaPoint::from_extremes(20.0, 900.0);
        assert_eq!((p.x, p.y, p.zone), (50.0, 400.0, CvgaZone::E));
        let p = CvgaPoint::from_extremes(130.0, 100.0);
        assert_eq!((p.x, p.y, p.zone), (110.0, 110.0, CvgaZone::A));
    }

    /// Independent lookup from the cell table, with closed boundaries
    /// (a point on an edge matches both neighbours).
    fn table_zones(x: f64, y: f64) -> Vec<CvgaZone> {
        let cols = [(90.0, 110.0), (70.0, 90.0), (50.0, 70.0)];
        let rows = [(110.0, 180.0), (180.0, 300.0), (300.0, 400.0)];
        let table = [
            ((0, 0), CvgaZone::A),
            ((1, 0), CvgaZone::LowerB),
            ((0, 1), CvgaZone::UpperB),
            ((1, 1), CvgaZone::B),
            ((2, 0), CvgaZone::LowerC),
            ((0, 2), CvgaZone::UpperC),
            ((2, 1), CvgaZone::LowerD),
            ((1, 2), CvgaZone::UpperD),
            ((2, 2), CvgaZone::E),
        ];
        table
            .iter()
            .filter(|((c, r), _)| {
                let (xl, xh) = cols[*c];
                let (yl, yh) = rows[*r];
                x >= xl && x <= xh && y >= yl && y <= yh
            })
            .map(|(_, z)| *z)
            .collect()
    }

    #[test]
    fn grid_sweep_partitions_the_rectangle() {
        let mut counts = std::collections::HashMap::new();
        for xi in 50..=110 {
            for yi in 110..=400 {
                let (x, y) = (xi as f64, yi as f64);
                let z = cvga_zone(x, y);
                let candidates = table_zones(x, y);
                assert!(!candidates.is_empty(), "gap at ({x}, {y})");
                assert!(candidates.contains(&z), "({x}, {y}) -> {z}, table says {candidates:?}");
                // interior points belong to exactly one cell
                if ![50, 70, 90, 110].contains(&xi) && ![110, 180, 300, 400].contains(&yi) {
                    assert_eq!(candidates.len(), 1);
                }
                *counts.entry(z).or_insert(0usize) += 1;
            }
        }
        assert_eq!(counts.values().sum::<usize>(), 61 * 291);
        assert_eq!(counts.len(), 9);
        for z in CvgaZone::ALL {
            let (c, r) = z.cell();
            assert_eq!(GRID[r][c], z);
        }
    }

    #[test]
    fn edges_go_to_the_less_severe_zone() {
        assert_eq!(cvga_zone(90.0, 180.0), CvgaZone::A);
        assert_eq!(cvga_zone(70.0, 180.0), CvgaZone::LowerB);
        assert_eq!(cvga_zone(90.0, 300.0), CvgaZone::UpperB);
        assert_eq!(cvga_zone(70.0, 300.0), CvgaZone::B);
    }

    #[test]
    fn point_from_trace_window() {
        let mut samples = vec![125.0; 14 * 1440];
        samples[100] = 20.0; // first week, ignored
        samples[8 * 1440] = 85.0;
        samples[9 * 1440] = 260.0;
        let p = cvga_point(&CgmTrace { samples }, EvalWindow::default()).unwrap();
        assert_eq!((p.x, p.y, p.zone), (85.0, 260.0, CvgaZone::B));
    }

    #[test]
    fn csv_round_trip() {
        let recs = vec![
            CvgaRecord { patient_id: 0, arm: "conventional".into(), x: 95.5, y: 210.0, zone: CvgaZone::UpperB },
            CvgaRecord { patient_id: 1, arm: "rl".into(), x: 50.0, y: 400.0, zone: CvgaZone::E },
        ];
        let mut buf = Vec::new();
        write_cvga_csv(&recs, &mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("patient_id,arm,x,y,zone\n"));
        assert_eq!(read_cvga_csv(buf.as_slice()).unwrap(), recs);
    }
}
