use std::fmt::Write;

use super::{SegMetrics, SliceResult};

/// Column order follows the usual skull-stripping results table.
pub const SUMMARY_HEADER: &str = "dataset,split,n,dice,dhd,acc,sens,spec,failures";

const SLICE_HEADER: &str = "patient,slice,brain_pixels,included,dice,dhd,acc,sens,spec,failure,phase_error";

fn num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        format!("{v:.4}")
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, num)
}

pub fn summary_csv(rows: &[(&str, &str, &SegMetrics)]) -> String {
    let mut out = format!("{SUMMARY_HEADER}\n");
    for (dataset, split, m) in rows {
        writeln!(
            out,
            "{dataset},{split},{},{},{},{},{},{},{}",
            m.n_slices,
            num(m.dice),
            num(m.dhd),
            num(m.accuracy),
            num(m.sensitivity),
            num(m.specificity),
            m.failures
        )
        .unwrap();
    }
    out
}

pub fn per_slice_csv(results: &[SliceResult]) -> String {
    let mut out = format!("{SLICE_HEADER}\n");
    for r in results {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.patient_id,
            r.slice_idx,
            r.brain_pixels,
            r.included as u8,
            num(r.dice),
            opt(r.dhd),
            num(r.accuracy),
            num(r.sensitivity),
            num(r.specificity),
            r.failure as u8,
            opt(r.phase_error)
        )
        .unwrap();
    }
    out
}
