//! Glycemic metrics, CVGA and arm comparison.

mod compare;
mod cvga;
mod metrics;
mod stats;
mod svg;

pub use compare::{
    compare_arms, summarize_arm, ArmReports, ComparisonRow, ComparisonTable, Metric, Significance, Summary, SIGNIFICANCE_LEVEL,
};
pub use cvga::{cvga_point, cvga_zone, read_cvga_csv, write_cvga_csv, CvgaPoint, CvgaRecord, CvgaZone, X_RANGE, Y_RANGE};
pub use metrics::{glycemic_metrics, EvalWindow, GlucoseAccumulator, MetricsReport};
pub use stats::{ln_gamma, paired_t_test, regularized_incomplete_beta, student_t_two_sided_p, PairedTTest};
pub use svg::render_cvga_svg;
