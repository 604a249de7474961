//! Curvature-induced quantum quantities on implicit hypersurfaces.
//!
//! The crate is organised bottom-up:
//!
//! * [`expr`] and [`jet`] parse surface expressions `f(x) = 0` and propagate
//!   truncated Taylor jets through them;
//! * [`geometry`] turns jets of `f` into the unit normal field and every
//!   curvature quantity built from it (mean curvature, `(n_{i,j})²`, `∇²M`,
//!   `∇²_LB M`, geometric potential and force);
//! * [`optim`] searches those fields for extrema on the surface;
//! * [`classical`] integrates constrained classical motion and checks the
//!   centripetal force law along trajectories;
//! * [`lab`] discretizes the geometric momentum and Hamiltonian on periodic
//!   surfaces and checks operator identities numerically.

pub mod classical;
pub mod error;
pub mod expr;
pub mod geometry;
pub mod jet;
pub mod lab;
pub mod optim;
pub mod surface;

pub use classical::{
    convergence_study, force_residual, geodesic_form_residual, integrate, ConvergenceStudy, GeodesicResidual,
    IntegratorConfig, ResidualSeries, Trajectory, TrajectoryState,
};
pub use error::{Error, ErrorClass, Result};
pub use expr::{parse_expression, Bindings, Expression};
pub use geometry::{
    curvature_sample, lb_laplacian_mean_curvature, normal_jet, project_to_surface, sample_field,
    si_force_magnitude, split_residual, tangent_frame, CurvatureSample, ExtensionPolicy, ForceEstimate, NormalJet,
    PhysicalScale, Sampling, ScalarField,
};
pub use jet::{evaluate_jet, jet_partial, Jet, MultiIndex};
pub use surface::{builtin_surface, CatalogSurface, SurfaceSpec};
pub use lab::{
    build_grid, build_hamiltonian, build_momentum, check_identity, evolve_wavepacket, hbar_scaling, verify_suite,
    HamiltonianForm, IdentityCheckConfig, IdentityId, IdentityVerdict, LabSurface, ParamSurfaceGrid, TestConfig,
    Verdict, WavePacket,
};
pub use optim::{
    classify_critical_point, extremum_report, find_critical_points, Classification, CriticalKind, CriticalPoint,
    CriticalSet, ExtremumReport, OptimConfig, RankedPoint, StartDiagnostic,
};
