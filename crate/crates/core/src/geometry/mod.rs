//! Normal fields and curvature quantities of implicit hypersurfaces.
//!
//! Sign conventions: the normal is `∇f/|∇f|` (outward for the catalog), the
//! mean curvature is `M = -n_{i,i}` (a sphere of radius `a` has `M = -2/a`),
//! and the shape tensor is `n_{i,j} = ∂_j n_i`. Energies are reported in units
//! of `ħ²/4μ`: `vg_geom = M²/2 - (n_{i,j})²` and `chi_geom = -∇²M`.

mod numeric;
mod project;
mod sampling;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jet::{Jet, Taylor};
use crate::surface::SurfaceSpec;

pub use numeric::{distance_normal, PRECISION_LOSS_THRESHOLD};
pub use project::project_to_surface;
pub use sampling::{sample_field, samples_to_csv, Sampling};

/// Reduced Planck constant in J·s.
pub const HBAR: f64 = 1.054571817e-34;

/// Points with `|f|` above this are rejected as off-surface.
pub const ON_SURFACE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ExtensionPolicy {
    /// `n = ∇f/|∇f|` for whatever `f` is.
    GradientNormalized,
    /// Normal field of the signed distance to the surface.
    #[default]
    SignedDistance,
}

impl ExtensionPolicy {
    pub fn parse(s: &str) -> Result<ExtensionPolicy> {
        match s {
            "gradient-normalized" | "gradient" | "GradientNormalized" => Ok(ExtensionPolicy::GradientNormalized),
            "signed-distance" | "sdf" | "SignedDistance" => Ok(ExtensionPolicy::SignedDistance),
            other => Err(Error::InvalidInput(format!("unknown extension policy `{other}`"))),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ExtensionPolicy::GradientNormalized => "gradient-normalized",
            ExtensionPolicy::SignedDistance => "signed-distance",
        }
    }
}

/// Derivative tables of each unit-normal component around one point.
#[derive(Debug, Clone)]
pub struct NormalJet {
    pub point: Vec<f64>,
    pub policy: ExtensionPolicy,
    /// One jet per component `n_i`.
    pub components: Vec<Jet>,
    /// False when the tables come from finite differences.
    pub exact: bool,
    /// Dimensionless Richardson disagreement (zero for exact jets).
    pub error_estimate: f64,
}

impl NormalJet {
    pub fn order(&self) -> usize {
        self.components[0].degree()
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn n(&self) -> Vec<f64> {
        self.components.iter().map(Jet::value).collect()
    }

    /// `n_{i,axes...}`, e.g. `partial(i, &[l, j])` is `n_{i,l,j}`.
    pub fn partial(&self, i: usize, axes: &[usize]) -> f64 {
        self.components[i].d(axes)
    }

    pub fn shape_tensor(&self) -> Vec<Vec<f64>> {
        let d = self.dim();
        (0..d).map(|i| (0..d).map(|j| self.partial(i, &[j])).collect()).collect()
    }

    fn field(&self) -> NormalField {
        NormalField {
            n: self.components.iter().map(Jet::to_taylor).collect(),
        }
    }
}

/// Exact normal field Taylor polynomials of degree `order` (no surface check).
fn exact_normal_taylors(spec: &SurfaceSpec, point: &[f64], policy: ExtensionPolicy, order: usize) -> Result<Vec<Taylor>> {
    let f = spec.taylor(point, order + 1)?;
    let grads: Vec<Taylor> = (0..spec.dim).map(|i| f.derivative(i)).collect();
    if policy == ExtensionPolicy::SignedDistance && spec.is_signed_distance {
        return Ok(grads);
    }
    let norm2 = grads
        .iter()
        .skip(1)
        .fold(grads[0].square(), |acc, g| acc.add(&g.square()));
    let inv = norm2.sqrt()?.recip()?;
    Ok(grads.iter().map(|g| g.mul(&inv)).collect())
}

fn uses_exact_jets(spec: &SurfaceSpec, policy: ExtensionPolicy) -> bool {
    policy == ExtensionPolicy::GradientNormalized || spec.is_signed_distance
}

fn check_on_surface(spec: &SurfaceSpec, point: &[f64]) -> Result<()> {
    if point.len() != spec.dim {
        return Err(Error::InvalidInput(format!(
            "point has {} coordinates, surface has {}",
            point.len(),
            spec.dim
        )));
    }
    let f = spec.eval(point)?;
    if f.abs() >= ON_SURFACE_TOL {
        return Err(Error::InvalidInput(format!("point is off the surface (|f| = {:e})", f.abs())));
    }
    Ok(())
}

/// Local length scale used for finite-difference steps.
fn local_scale(spec: &SurfaceSpec, point: &[f64]) -> Result<f64> {
    let n = exact_normal_taylors(spec, point, ExtensionPolicy::GradientNormalized, 1)?;
    let shape: Vec<Vec<f64>> = n.iter().map(|ni| (0..spec.dim).map(|j| ni.derivative(j).value()).collect()).collect();
    let kappa_max = principal_curvatures(&shape, &n.iter().map(Taylor::value).collect::<Vec<_>>())
        .iter()
        .fold(0.0f64, |m, k| m.max(k.abs()));
    Ok(if kappa_max > 0.0 {
        (1.0 / kappa_max).min(spec.feature_scale)
    } else {
        spec.feature_scale
    })
}

/// Jets of the unit normal field up to `order` derivatives.
///
/// Orders up to 4 are available for exact policies; the numeric
/// signed-distance route supports up to 3.
pub fn normal_jet(spec: &SurfaceSpec, point: &[f64], policy: ExtensionPolicy, order: usize) -> Result<NormalJet> {
    check_on_surface(spec, point)?;
    if uses_exact_jets(spec, policy) {
        if order > 4 {
            return Err(Error::InvalidInput(format!("normal jet order {order} above 4")));
        }
        let n = exact_normal_taylors(spec, point, policy, order)?;
        return Ok(NormalJet {
            point: point.to_vec(),
            policy,
            components: n.iter().map(Taylor::to_jet).collect(),
            exact: true,
            error_estimate: 0.0,
        });
    }
    if order > 3 {
        return Err(Error::InvalidInput(format!("numeric normal jet order {order} above 3")));
    }
    let scale = local_scale(spec, point)?;
    let (components, error_estimate) = numeric::numeric_normal_jets(spec, point, order, scale)?;
    Ok(NormalJet {
        point: point.to_vec(),
        policy,
        components,
        exact: false,
        error_estimate,
    })
}

/// Scalar fields derived from a normal-field polynomial.
struct NormalField {
    n: Vec<Taylor>,
}

fn laplacian(p: &Taylor) -> Taylor {
    let dim = p.dim();
    (1..dim).fold(p.derivative(0).derivative(0), |acc, j| acc.add(&p.derivative(j).derivative(j)))
}

impl NormalField {
    fn dim(&self) -> usize {
        self.n.len()
    }

    fn values(&self) -> Vec<f64> {
        self.n.iter().map(Taylor::value).collect()
    }

    /// `M = -n_{i,i}`.
    fn mean_curvature(&self) -> Taylor {
        let div = (1..self.dim()).fold(self.n[0].derivative(0), |acc, i| acc.add(&self.n[i].derivative(i)));
        div.neg()
    }

    /// `(n_{i,j})²`.
    fn s2(&self) -> Taylor {
        let d = self.dim();
        let mut acc: Option<Taylor> = None;
        for i in 0..d {
            for j in 0..d {
                let t = self.n[i].derivative(j).square();
                acc = Some(match acc {
                    None => t,
                    Some(a) => a.add(&t),
                });
            }
        }
        acc.expect("dimension at least 1")
    }

    fn normal_derivative(&self, p: &Taylor) -> f64 {
        let n = self.values();
        (0..self.dim()).map(|k| n[k] * p.derivative(k).value()).sum()
    }

    /// `Σ_i (∂_i - n_i n_k ∂_k)(∂_i M - n_i n_l ∂_l M)` at the point.
    fn lb_laplacian_of_mean(&self) -> f64 {
        let d = self.dim();
        let m = self.mean_curvature();
        let grad_m: Vec<Taylor> = (0..d).map(|i| m.derivative(i)).collect();
        let n_dot_grad = (1..d).fold(self.n[0].mul(&grad_m[0]), |acc, l| acc.add(&self.n[l].mul(&grad_m[l])));
        let tangential: Vec<Taylor> = (0..d).map(|i| grad_m[i].sub(&self.n[i].mul(&n_dot_grad))).collect();
        let n0 = self.values();
        let mut total = 0.0;
        for i in 0..d {
            let along: Vec<f64> = (0..d).map(|k| tangential[i].derivative(k).value()).collect();
            let normal_part: f64 = (0..d).map(|k| n0[k] * along[k]).sum();
            total += along[i] - n0[i] * normal_part;
        }
        total
    }
}

/// Orthonormal basis of the tangent space `n^⊥`.
pub fn tangent_frame(n: &[f64]) -> Vec<Vec<f64>> {
    let d = n.len();
    let mut frame: Vec<Vec<f64>> = Vec::with_capacity(d - 1);
    let mut axes: Vec<usize> = (0..d).collect();
    // axes least aligned with n first
    axes.sort_by(|&a, &b| n[a].abs().total_cmp(&n[b].abs()));
    for &axis in &axes {
        if frame.len() == d - 1 {
            break;
        }
        let mut v = vec![0.0; d];
        v[axis] = 1.0;
        for basis in std::iter::once(n).chain(frame.iter().map(Vec::as_slice)) {
            let dot: f64 = v.iter().zip(basis).map(|(a, b)| a * b).sum();
            for k in 0..d {
                v[k] -= dot * basis[k];
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            frame.push(v.iter().map(|x| x / norm).collect());
        }
    }
    frame
}

/// Principal curvatures: eigenvalues of the symmetrized shape tensor with the
/// eigenvalue whose eigenvector is most parallel to `n` removed, descending.
pub fn principal_curvatures(shape: &[Vec<f64>], n: &[f64]) -> Vec<f64> {
    let d = n.len();
    let sym = DMatrix::from_fn(d, d, |i, j| 0.5 * (shape[i][j] + shape[j][i]));
    let eig = SymmetricEigen::new(sym);
    let normal_slot = (0..d)
        .max_by(|&a, &b| {
            let pa: f64 = (0..d).map(|k| eig.eigenvectors[(k, a)] * n[k]).sum::<f64>().abs();
            let pb: f64 = (0..d).map(|k| eig.eigenvectors[(k, b)] * n[k]).sum::<f64>().abs();
            pa.total_cmp(&pb)
        })
        .expect("non-empty");
    let mut kappa: Vec<f64> = (0..d).filter(|&k| k != normal_slot).map(|k| eig.eigenvalues[k]).collect();
    kappa.sort_by(|a, b| b.total_cmp(a));
    kappa
}

/// Per-point geometric record.
#[derive(Debug, Clone, Serialize)]
pub struct CurvatureSample {
    pub x: Vec<f64>,
    pub n: Vec<f64>,
    #[serde(rename = "M")]
    pub mean_curvature: f64,
    #[serde(rename = "S2")]
    pub s2: f64,
    pub kappa: Vec<f64>,
    #[serde(rename = "lapM")]
    pub lap_m: f64,
    #[serde(rename = "lapLB_M")]
    pub lap_lb_m: f64,
    pub vg_geom: f64,
    pub chi_geom: f64,
    #[serde(skip)]
    pub shape: Vec<Vec<f64>>,
    #[serde(skip)]
    pub policy: ExtensionPolicy,
    #[serde(skip)]
    pub error_estimate: f64,
}

impl CurvatureSample {
    fn from_normal_jet(nj: &NormalJet) -> CurvatureSample {
        let field = nj.field();
        let m = field.mean_curvature();
        let s2 = field.s2();
        let n = nj.n();
        let shape = nj.shape_tensor();
        let lap_m = laplacian(&m).value();
        let kappa = principal_curvatures(&shape, &n);
        CurvatureSample {
            x: nj.point.clone(),
            mean_curvature: m.value(),
            s2: s2.value(),
            kappa,
            lap_m,
            lap_lb_m: field.lb_laplacian_of_mean(),
            vg_geom: 0.5 * m.value() * m.value() - s2.value(),
            chi_geom: -lap_m,
            shape,
            n,
            policy: nj.policy,
            error_estimate: nj.error_estimate,
        }
    }

    /// `V_G` in joules for a given physical scale.
    pub fn geometric_potential(&self, scale: &PhysicalScale) -> f64 {
        scale.hbar * scale.hbar / (4.0 * scale.mass) * self.vg_geom / (scale.length * scale.length)
    }
}

pub fn curvature_sample(spec: &SurfaceSpec, point: &[f64], policy: ExtensionPolicy) -> Result<CurvatureSample> {
    let nj = normal_jet(spec, point, policy, 3)?;
    Ok(CurvatureSample::from_normal_jet(&nj))
}

/// Intrinsic Laplacian of the mean curvature, `∇²_LB M`.
pub fn lb_laplacian_mean_curvature(spec: &SurfaceSpec, point: &[f64], policy: ExtensionPolicy) -> Result<f64> {
    Ok(normal_jet(spec, point, policy, 3)?.field().lb_laplacian_of_mean())
}

/// Terms of `∇²M = ∇²_LB M + ∂_n(M²/2 - (n_{i,j})²)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SplitReport {
    #[serde(rename = "lapM")]
    pub lap_m: f64,
    #[serde(rename = "lapLB_M")]
    pub lap_lb_m: f64,
    /// `∂_n (M²/2 - S2)`.
    pub normal_term: f64,
    /// `lapM - lapLB_M - normal_term`, the identity as written.
    pub residual: f64,
    /// `lapM - lapLB_M + normal_term`, the identity with the normal term negated.
    pub flipped_residual: f64,
}

pub fn split_report(spec: &SurfaceSpec, point: &[f64], policy: ExtensionPolicy) -> Result<SplitReport> {
    let nj = normal_jet(spec, point, policy, 3)?;
    let field = nj.field();
    let m = field.mean_curvature();
    let potential = m.square().scale(0.5).sub(&field.s2());
    let lap_m = laplacian(&m).value();
    let lap_lb_m = field.lb_laplacian_of_mean();
    let normal_term = field.normal_derivative(&potential);
    Ok(SplitReport {
        lap_m,
        lap_lb_m,
        normal_term,
        residual: lap_m - lap_lb_m - normal_term,
        flipped_residual: lap_m - lap_lb_m + normal_term,
    })
}

/// `lapM - lapLB_M - ∂_n(M²/2 - S2)`; requires the signed-distance policy.
pub fn split_residual(spec: &SurfaceSpec, point: &[f64], policy: ExtensionPolicy) -> Result<f64> {
    if policy != ExtensionPolicy::SignedDistance {
        return Err(Error::InvalidInput("split residual is defined for the signed-distance extension".into()));
    }
    Ok(split_report(spec, point, policy)?.residual)
}

/// Scalar curvature fields that can be searched for extrema.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScalarField {
    #[serde(rename = "lapM")]
    LapM,
    #[serde(rename = "vg_geom")]
    VgGeom,
    #[serde(rename = "M")]
    MeanCurvature,
}

impl ScalarField {
    pub fn parse(s: &str) -> Result<ScalarField> {
        match s {
            "lapM" | "lapm" => Ok(ScalarField::LapM),
            "vg_geom" | "vg" => Ok(ScalarField::VgGeom),
            "M" | "mean" => Ok(ScalarField::MeanCurvature),
            other => Err(Error::InvalidInput(format!("unknown field `{other}`"))),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ScalarField::LapM => "lapM",
            ScalarField::VgGeom => "vg_geom",
            ScalarField::MeanCurvature => "M",
        }
    }

    pub fn pick(self, s: &CurvatureSample) -> f64 {
        match self {
            ScalarField::LapM => s.lap_m,
            ScalarField::VgGeom => s.vg_geom,
            ScalarField::MeanCurvature => s.mean_curvature,
        }
    }
}

/// Value and ambient gradient of a scalar field, from exact jets.
///
/// Returns `None` when the policy needs the numeric distance route.
pub fn field_value_and_gradient(
    spec: &SurfaceSpec,
    point: &[f64],
    policy: ExtensionPolicy,
    field: ScalarField,
) -> Result<Option<(f64, Vec<f64>)>> {
    if !uses_exact_jets(spec, policy) {
        return Ok(None);
    }
    let order = match field {
        ScalarField::LapM => 4,
        ScalarField::VgGeom | ScalarField::MeanCurvature => 2,
    };
    let nf = NormalField {
        n: exact_normal_taylors(spec, point, policy, order)?,
    };
    let m = nf.mean_curvature();
    let poly = match field {
        ScalarField::LapM => laplacian(&m),
        ScalarField::VgGeom => m.square().scale(0.5).sub(&nf.s2()),
        ScalarField::MeanCurvature => m,
    };
    let grad = (0..spec.dim).map(|k| poly.derivative(k).value()).collect();
    Ok(Some((poly.value(), grad)))
}

/// Field value at a surface point under any policy.
pub fn field_value(spec: &SurfaceSpec, point: &[f64], policy: ExtensionPolicy, field: ScalarField) -> Result<f64> {
    if let Some((v, _)) = field_value_and_gradient(spec, point, policy, field)? {
        return Ok(v);
    }
    Ok(field.pick(&curvature_sample(spec, point, policy)?))
}

/// Mass, ħ and the physical length of one model unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhysicalScale {
    /// kg
    pub mass: f64,
    /// J·s
    pub hbar: f64,
    /// metres per model unit
    pub length: f64,
}

impl PhysicalScale {
    pub fn new(mass: f64, length: f64) -> Result<PhysicalScale> {
        PhysicalScale::with_hbar(mass, length, HBAR)
    }

    pub fn with_hbar(mass: f64, length: f64, hbar: f64) -> Result<PhysicalScale> {
        for (name, v) in [("mass", mass), ("length", length), ("hbar", hbar)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidInput(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(PhysicalScale { mass, hbar, length })
    }

    /// `ħ²/(μ L³)` in newtons: the order-of-magnitude force for curvature `1/L`.
    pub fn curvature_force_scale(&self) -> f64 {
        self.hbar * self.hbar / (self.mass * self.length.powi(3))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ForceEstimate {
    /// Newtons, along the surface normal.
    pub vector: Vec<f64>,
    pub magnitude: f64,
    pub magnitude_pn: f64,
}

/// `χ_g = -(ħ²/4μ) ∇²M n` in SI units.
pub fn si_force_magnitude(sample: &CurvatureSample, scale: &PhysicalScale) -> ForceEstimate {
    let coeff = -scale.hbar * scale.hbar / (4.0 * scale.mass) * sample.lap_m / scale.length.powi(3);
    let vector: Vec<f64> = sample.n.iter().map(|ni| coeff * ni).collect();
    let magnitude = vector.iter().map(|v| v * v).sum::<f64>().sqrt();
    ForceEstimate {
        vector,
        magnitude,
        magnitude_pn: magnitude * 1e12,
    }
}
