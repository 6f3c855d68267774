//! Pareto archive maintenance, the stripe decomposition of the
//! non-dominated space and the 2-D hypervolume.

use mobgo::pareto::INFINITE_REFERENCE;
use mobgo::{dominates, hypervolume_2d, stripes, ParetoArchive};

fn main() -> mobgo::Result<()> {
    let mut archive = ParetoArchive::new(2);
    for y in [[3.0, 1.0], [1.0, 2.5], [2.5, 2.5], [2.0, 1.5], [4.0, 4.0]] {
        let kept = archive.insert(&y);
        println!("insert {y:?}: {}", if kept { "kept" } else { "dominated" });
    }
    println!("archive (ascending f1): {:?}", archive.points());
    println!("(1, 1) dominates (2, 1.5): {}", dominates(&[1.0, 1.0], &[2.0, 1.5])?);

    println!("\nstripes for r = +inf:");
    for (i, s) in stripes(&archive, INFINITE_REFERENCE)?.iter().enumerate() {
        println!("  {i}: ({:>5}, {:>5}] x ({:>5}, {:>5}]", s.lower[0], s.upper[0], s.lower[1], s.upper[1]);
    }

    let set = stripes(&archive, INFINITE_REFERENCE)?;
    for y in [[0.5, 10.0], [1.5, 2.0], [2.5, 1.2], [3.5, 0.2], [2.5, 2.0]] {
        println!("  {y:?} lies in stripe {:?}", set.locate(y));
    }

    let r = [5.0, 5.0];
    println!("\nHV w.r.t. {r:?} = {}", hypervolume_2d(&archive, r)?);
    Ok(())
}
