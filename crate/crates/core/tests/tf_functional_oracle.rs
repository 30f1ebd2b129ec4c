use std::time::Instant;

use heavy_atom::tf_atom::minimize_tf_functional;
use heavy_atom::{solve_universal_tf, LogGrid};

#[test]
fn shooting_energy_matches_functional_minimum() {
    let start = Instant::now();
    let universal = solve_universal_tf(1e-8).unwrap();
    let solve_time = start.elapsed();
    let atom = heavy_atom::build_atom(1.0, std::sync::Arc::new(universal)).unwrap();
    let grid = LogGrid::new(1e-11, 2e3, 700).unwrap();
    let minimum = minimize_tf_functional(&grid).unwrap();
    println!(
        "{minimum:?} shooting {:?} in {solve_time:?}",
        atom.energies().total
    );
    assert!((minimum.electrons - 1.0).abs() < 1e-4);
    let relative = (minimum.energy / atom.energies().total - 1.0).abs();
    assert!(relative < 1e-4, "relative difference {relative:e}");
    assert!(solve_time.as_secs_f64() < 5.0);
}
