//! Numerical machinery for comparing the relativistic ground-state energy of
//! heavy neutral atoms with the Thomas-Fermi energy: the TF atom itself,
//! coherent-state trial densities, relativistic kernel bounds, exchange-hole
//! potentials and the semiclassical lower bound.

pub mod bound_integrals;
pub mod coherent_phase_space;
pub mod error;
pub mod exchange_hole;
pub mod ode;
pub mod quadrature;
pub mod radial;
pub mod relativistic_kernels;
pub mod semiclassical_lower;
pub mod tf_atom;

pub use bound_integrals::{
    upper_bound_total, BoundContext, BoundTermReport, Evaluation, Mode, ScalingFit, TermId,
    UpperBound,
};
pub use coherent_phase_space::{default_shape, PhaseSpaceOccupation, ShapeFunction};
pub use error::{Error, Result};
pub use exchange_hole::{HoleProfile, HoleScanRow, RadialDensity, SupScan, TabulatedDensity};
pub use radial::{LogGrid, RadialFunction};
pub use relativistic_kernels::{DispersionParams, KernelWeights, KAPPA_CRIT};
pub use semiclassical_lower::{convergence_study, LowerBoundReport, SandwichRow, SandwichTable};
pub use tf_atom::{build_atom, solve_universal_tf, SmearedDensity, TfAtom, TfUniversalSolution};
