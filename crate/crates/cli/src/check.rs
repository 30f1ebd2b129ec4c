//! The invariant suite behind `heavy-atom check`.

use std::sync::Arc;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::Serialize;

use heavy_atom::exchange_hole::{ball_mass, hole_radius, scan_centers, TabulatedDensity};
use heavy_atom::relativistic_kernels::{
    embedding_multipliers, kernel_weights, kinetic_concavity_gap, kinetic_energy,
    normalization_factor, projector_identity_check, PROJECTOR_TOLERANCE,
};
use heavy_atom::semiclassical_lower::{negative_part, xi_max};
use heavy_atom::{build_atom, DispersionParams, Result, TfUniversalSolution};

/// One invariant evaluated over a set of cases.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub cases: usize,
    pub violations: usize,
    pub max_deviation: f64,
    pub tolerance: f64,
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

struct Tally {
    name: &'static str,
    tolerance: f64,
    cases: usize,
    violations: usize,
    max_deviation: f64,
}

impl Tally {
    fn new(name: &'static str, tolerance: f64) -> Self {
        Self {
            name,
            tolerance,
            cases: 0,
            violations: 0,
            max_deviation: 0.0,
        }
    }

    fn record(&mut self, deviation: f64) {
        self.cases += 1;
        if deviation.is_nan() || deviation > self.tolerance {
            self.violations += 1;
        }
        self.max_deviation = self.max_deviation.max(if deviation.is_nan() {
            f64::INFINITY
        } else {
            deviation
        });
    }

    fn finish(self) -> CheckOutcome {
        CheckOutcome {
            name: self.name,
            cases: self.cases,
            violations: self.violations,
            max_deviation: self.max_deviation,
            tolerance: self.tolerance,
        }
    }
}

const CHECK_CHARGES: [f64; 4] = [1.0, 10.0, 100.0, 1000.0];
const CHECK_KAPPAS: [f64; 3] = [0.1, 0.5, 0.9];

fn momenta(c: f64) -> impl Iterator<Item = f64> {
    (0..=200).map(move |i| c * 10f64.powf(-6.0 + 12.0 * i as f64 / 200.0))
}

fn dispersion_checks(out: &mut Vec<CheckOutcome>) -> Result<()> {
    let mut unitarity = Tally::new("embedding_unitarity", 1e-12);
    let mut normalization = Tally::new("normalization_lower_bound", 0.0);
    let mut concavity = Tally::new("concavity_gap_nonnegative", 0.0);
    let mut xi_roots = Tally::new("xi_max_root", 1e-10);
    let mut kernel = Tally::new("w1_dominated_by_bound", 1e-12);
    for z in CHECK_CHARGES {
        for kappa in CHECK_KAPPAS {
            let params = DispersionParams::for_atom(z, kappa)?;
            let c = params.c();
            for p in momenta(c) {
                let (m1, m2) = embedding_multipliers(p, &params)?;
                unitarity.record((m1 * m1 + m2 * m2 - 1.0).abs());
                let floor = 2f64.sqrt() * c * c;
                normalization.record((floor - normalization_factor(p, &params)?).max(0.0) / floor);
                concavity.record((-kinetic_concavity_gap(p, &params)?).max(0.0));
                let v = kinetic_energy(p, &params)?;
                if v > 0.0 {
                    xi_roots.record((kinetic_energy(xi_max(v, c), &params)? - v).abs() / v);
                }
                for q in [0.3 * p, p, 7.0 * p] {
                    let w = kernel_weights(p, q, &params)?;
                    kernel.record((w.w1 - w.w1_bound).max(0.0) / w.w1_bound.max(f64::MIN_POSITIVE));
                }
            }
        }
    }
    out.extend([unitarity, normalization, concavity, xi_roots, kernel].map(Tally::finish));
    Ok(())
}

fn projector_checks(out: &mut Vec<CheckOutcome>) -> Result<()> {
    let mut tally = Tally::new("projector_identities", PROJECTOR_TOLERANCE);
    let mut rng = ChaCha12Rng::seed_from_u64(0x5eed);
    for z in CHECK_CHARGES {
        let params = DispersionParams::for_atom(z, 0.5)?;
        for _ in 0..128 {
            let scale = params.c() * 10f64.powf(rng.random_range(-3.0..2.0));
            let xi = Vector3::from_fn(|_, _| scale * (2.0 * rng.random::<f64>() - 1.0));
            tally.record(projector_identity_check(&xi, &params)?.max_deviation);
        }
    }
    out.push(tally.finish());
    Ok(())
}

fn atom_checks(universal: &Arc<TfUniversalSolution>, out: &mut Vec<CheckOutcome>) -> Result<()> {
    let u = universal.checks();
    let mut solver = Tally::new("universal_solution", 0.0);
    solver.record(if u.integrators_agree && u.monotone_positive {
        0.0
    } else {
        1.0
    });

    let mut relation = Tally::new("tf_relation_pointwise", 1e-5);
    let mut density_bound = Tally::new("tf_density_bound_pointwise", 0.0);
    let mut count = Tally::new("electron_count", 1e-6);
    let mut scaling = Tally::new("energy_scaling", 1e-6);
    let unit = build_atom(1.0, universal.clone())?;
    let unit_energy = unit.energies();
    for z in CHECK_CHARGES.into_iter().chain([1e4]) {
        let atom = build_atom(z, universal.clone())?;
        let c = atom.checks();
        relation.record(c.tf_relation_error);
        density_bound.record(if c.density_bound_holds { 0.0 } else { 1.0 });
        count.record(c.neutrality_error);
        let e = atom.energies();
        let factor = z.powf(7.0 / 3.0);
        scaling.record((e.total / (unit_energy.total * factor) - 1.0).abs());
        scaling.record((e.repulsion / (unit_energy.repulsion * factor) - 1.0).abs());
    }

    let mut hole = Tally::new("hole_mass_one_half", 1e-6);
    let atom = build_atom(100.0, universal.clone())?;
    let density = TabulatedDensity::new(atom.density().clone());
    for s in scan_centers(100.0, 16) {
        let radius = hole_radius(&density, s)?;
        hole.record((ball_mass(&density, s, radius)? - 0.5).abs());
    }

    let mut negative = Tally::new("negative_part_split", 0.0);
    for i in -50..=50 {
        let t = i as f64 * 0.37;
        let neg = negative_part(t);
        negative.record(if neg <= 0.0 && neg + t.max(0.0) == t {
            0.0
        } else {
            1.0
        });
    }
    out.extend(
        [
            solver,
            relation,
            density_bound,
            count,
            scaling,
            hole,
            negative,
        ]
        .map(Tally::finish),
    );
    Ok(())
}

/// Runs every invariant; a violation is reported, not raised.
pub fn run_checks(universal: &Arc<TfUniversalSolution>) -> Result<Vec<CheckOutcome>> {
    let mut out = Vec::new();
    dispersion_checks(&mut out)?;
    projector_checks(&mut out)?;
    atom_checks(universal, &mut out)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use heavy_atom::solve_universal_tf;

    #[test]
    fn all_invariants_hold() {
        let universal = Arc::new(solve_universal_tf(1e-8).unwrap());
        let outcomes = run_checks(&universal).unwrap();
        assert!(outcomes.len() >= 10);
        for o in &outcomes {
            assert!(o.passed(), "{o:?}");
            assert!(o.cases > 0);
        }
    }
}
