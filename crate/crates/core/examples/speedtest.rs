//! Timing of the exact acquisitions as the front grows.

use std::time::Duration;

use mobgo::bench::{format_timing_table, speedtest, FrontKind};

fn main() -> mobgo::Result<()> {
    let mut rows = Vec::new();
    for kind in [FrontKind::Convex, FrontKind::Concave] {
        rows.extend(speedtest(kind, &[10, 100, 1000], 3, Duration::from_millis(20))?);
    }
    print!("{}", format_timing_table(&rows));
    let ratio = |v: mobgo::Variant| {
        let t = |n: usize| rows.iter().find(|r| r.front == FrontKind::Convex && r.size == n && r.variant == v).map(|r| r.seconds);
        t(100).zip(t(10)).map(|(a, b)| a / b).unwrap_or(f64::NAN)
    };
    println!("\nconvex, |P| 10 -> 100: all x{:.1}, best x{:.1}", ratio(mobgo::Variant::All), ratio(mobgo::Variant::Best));
    Ok(())
}
