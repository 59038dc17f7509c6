//! Rearrangement and isotonic projection of a non-monotone curve and of a
//! band around it.

use seriesqr::monotone::{monotonize, monotonize_band, Direction, GridFunction, MultiMode, Operator};

fn main() -> seriesqr::Result<()> {
    let u: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
    // a quantile curve with a crossing in the middle
    let raw: Vec<f64> = u.iter().map(|&x| 2.0 * x + 0.3 * (12.0 * x).sin()).collect();
    let f = GridFunction::new(vec![u.clone()], raw)?;
    let inc = [Direction::Increasing];
    let rearranged = monotonize(&f, Operator::Rearrange, MultiMode::default(), &inc)?;
    let isotonic = monotonize(&f, Operator::Isotonic, MultiMode::default(), &inc)?;
    println!("{:>4} {:>8} {:>10} {:>8}", "u", "raw", "rearrange", "isotonic");
    for i in 0..u.len() {
        println!("{:>4.1} {:>8.3} {:>10.3} {:>8.3}", u[i], f.values[i], rearranged.values[i], isotonic.values[i]);
    }

    let lower = GridFunction::new(vec![u.clone()], f.values.iter().map(|v| v - 0.2).collect())?;
    let upper = GridFunction::new(vec![u.clone()], f.values.iter().map(|v| v + 0.2).collect())?;
    let (lo, hi) = monotonize_band(&lower, &upper, Operator::Combination { lambda: 0.5 }, MultiMode::default(), &inc)?;
    println!("band after combination (lambda = 0.5):");
    for i in 0..u.len() {
        println!("{:>4.1} [{:>7.3}, {:>7.3}]", u[i], lo.values[i], hi.values[i]);
    }

    // two axes: (u, w) surface, increasing in both
    let w = vec![0.0, 0.5, 1.0];
    let surface: Vec<f64> = u.iter().flat_map(|&a| w.iter().map(move |&b| a + b - 0.4 * (a * b * 9.0).sin())).collect();
    let g = GridFunction::new(vec![u, w], surface)?;
    let m = monotonize(&g, Operator::Rearrange, MultiMode::AverageOverOrders, &[Direction::Increasing; 2])?;
    println!("surface monotone before: {}, after: {}", g.is_monotone(), m.is_monotone());
    Ok(())
}
