//! Timing of the exact acquisitions on synthetic fronts.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::problems::{synthetic_front, FrontKind};
use crate::batch::BatchPrediction;
use crate::error::Result;
use crate::pareto::ParetoArchive;
use crate::qpoi::{QpoiEvaluator, Variant};

/// Radius of the synthetic fronts used for timing.
pub const SPEED_RADIUS: f64 = 10.0;

/// The fixed two-point prediction timed against each front.
///
/// Both objectives have standard deviation 2.5 at both points; the
/// within-objective correlations are 0.5 and -0.5.
pub fn speed_batch(kind: FrontKind) -> BatchPrediction {
    let mean = match kind {
        FrontKind::Convex => [[4.0, 8.0], [9.0, 7.0]],
        FrontKind::Concave => [[1.0, 5.0], [5.0, 1.0]],
    };
    BatchPrediction::pair(mean, [[2.5, 2.5], [2.5, 2.5]], [0.5, -0.5]).expect("valid fixed batch")
}

/// The variants shown in the timing table.
pub const TIMED_VARIANTS: [Variant; 5] = [Variant::Best, Variant::All, Variant::Mean, Variant::One, Variant::Worst];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub front: FrontKind,
    pub size: usize,
    pub variant: Variant,
    /// Median seconds per evaluation.
    pub seconds: f64,
    pub value: f64,
}

/// Median over `samples` of the mean time per call of `f`, where each sample
/// repeats the call until at least `min_time` has passed.
pub fn median_time<F: FnMut() -> Result<f64>>(mut f: F, samples: usize, min_time: Duration) -> Result<f64> {
    let mut times = Vec::with_capacity(samples.max(1));
    for _ in 0..samples.max(1) {
        let start = Instant::now();
        let mut calls = 0u32;
        loop {
            std::hint::black_box(f()?);
            calls += 1;
            if start.elapsed() >= min_time {
                break;
            }
        }
        times.push(start.elapsed().as_secs_f64() / f64::from(calls));
    }
    times.sort_by(f64::total_cmp);
    Ok(times[times.len() / 2])
}

/// Time of one exact evaluation of `variant`, stripes included, without
/// stripe pruning.
pub fn time_variant(
    archive: &ParetoArchive,
    batch: &BatchPrediction,
    variant: Variant,
    samples: usize,
    min_time: Duration,
) -> Result<f64> {
    median_time(
        || QpoiEvaluator::new(archive)?.exact(batch, variant),
        samples,
        min_time,
    )
}

/// Timing table for one front kind over the given sizes.
pub fn speedtest(kind: FrontKind, sizes: &[usize], samples: usize, min_time: Duration) -> Result<Vec<TimingRow>> {
    let batch = speed_batch(kind);
    let mut rows = Vec::new();
    for &size in sizes {
        let archive = synthetic_front(kind, size, SPEED_RADIUS)?;
        let ev = QpoiEvaluator::new(&archive)?;
        for variant in TIMED_VARIANTS {
            rows.push(TimingRow {
                front: kind,
                size,
                variant,
                seconds: time_variant(&archive, &batch, variant, samples, min_time)?,
                value: ev.exact(&batch, variant)?,
            });
        }
    }
    Ok(rows)
}

/// Plain-text table: one row per size, one column per variant.
pub fn format_timing_table(rows: &[TimingRow]) -> String {
    let mut out = String::from("front    |P|   ");
    for v in TIMED_VARIANTS {
        out.push_str(&format!("{:>14}", format!("{v} [s]")));
    }
    out.push('\n');
    let mut keys: Vec<(FrontKind, usize)> = rows.iter().map(|r| (r.front, r.size)).collect();
    keys.dedup();
    for (front, size) in keys {
        let name = match front {
            FrontKind::Convex => "convex",
            FrontKind::Concave => "concave",
        };
        out.push_str(&format!("{name:<8} {size:<5} "));
        for v in TIMED_VARIANTS {
            match rows.iter().find(|r| r.front == front && r.size == size && r.variant == v) {
                Some(r) => out.push_str(&format!("{:>14.3e}", r.seconds)),
                None => out.push_str(&format!("{:>14}", "-")),
            }
        }
        out.push('\n');
    }
    out
}
