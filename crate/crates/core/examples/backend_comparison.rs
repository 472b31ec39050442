//! Tree and brute-force neighbour search give identical answers; this
//! prints how long each takes for a few dimensions.

use std::time::Instant;

use clipped_metrics::scenarios::gen_gaussian;
use clipped_metrics::{Backend, NeighborIndex};

fn main() -> clipped_metrics::Result<()> {
    let n = 4000;
    for d in [2, 4, 8, 16, 32] {
        let points = gen_gaussian(n, d, &vec![0.0; d], d as u64)?;
        let mut tables = Vec::new();
        for backend in [Backend::Tree, Backend::Brute] {
            let start = Instant::now();
            let index = NeighborIndex::build(&points, backend);
            let knn = index.knn_self(5)?;
            let within: usize = (0..n)
                .map(|i| index.count_within(points.row(i), knn.nth_distance(i, 5)).count())
                .sum();
            println!(
                "d={d:>2} {:>5}: {:>8.1} ms ({within} ball members)",
                backend.as_str(),
                start.elapsed().as_secs_f64() * 1e3
            );
            tables.push(knn);
        }
        assert_eq!(tables[0], tables[1], "backends disagree at d={d}");
        let auto = NeighborIndex::build(&points, Backend::Auto).backend();
        println!("d={d:>2}  auto picks {}", auto.as_str());
    }
    Ok(())
}
