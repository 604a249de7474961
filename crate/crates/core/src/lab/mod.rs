//! Spectral discretization of the geometric momentum and Hamiltonian on
//! periodic surfaces (circle, torus) and numerical checks of operator identities.

mod evolve;
mod grid;
mod identities;
mod operator;

pub use evolve::{
    evolve_state, evolve_wavepacket, hbar_scaling, packet_state, EhrenfestRow, EhrenfestTrace, ScalingStudy,
    TimeGrid, WavePacket,
};
pub use grid::{build_grid, test_states, LabSurface, NodeGeometry, ParamSurfaceGrid, TestConfig};
pub use identities::{
    check_identity, classify_series, convergence_slope, grid_family, residual_on_testspace, verify_suite,
    Comparison, IdentityCheckConfig, IdentityId, IdentityVerdict, Verdict, Witness,
};
pub use operator::{
    angular_derivative, build_hamiltonian, build_laplace_beltrami, build_momentum, build_surface_gradient, commutator,
    geometric_potential, HamiltonianForm, LinearOperator, DENSE_LIMIT,
};
