//! Extrema of scalar curvature fields on the constraint surface.
//!
//! Each start runs a projected ascent and a projected descent with
//! backtracking, followed by a Newton polish in a tangent frame. Fields with
//! exact jets use their ambient gradient projected onto the tangent space.
//! Under the numeric distance route the field is only available pointwise, so
//! the exact-jet critical set (gradient-normalized extension) seeds
//! finite-difference Newton polishing on the numeric field.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{
    field_value, field_value_and_gradient, project_to_surface, tangent_frame, ExtensionPolicy, ScalarField,
};
use crate::surface::SurfaceSpec;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimConfig {
    pub starts: usize,
    pub seed: u64,
    /// Projected-gradient tolerance, relative to `(1 + |value|) / feature scale`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for OptimConfig {
    fn default() -> Self {
        OptimConfig {
            starts: 16,
            seed: 1,
            tol: 1e-8,
            max_iter: 400,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CriticalKind {
    Max,
    Min,
    Saddle,
    DegenerateOrbit,
}

impl CriticalKind {
    pub fn label(self) -> &'static str {
        match self {
            CriticalKind::Max => "max",
            CriticalKind::Min => "min",
            CriticalKind::Saddle => "saddle",
            CriticalKind::DegenerateOrbit => "degenerate-orbit",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Classification {
    pub kind: CriticalKind,
    /// Type of the non-degenerate directions when some are degenerate.
    pub transverse: Option<CriticalKind>,
    pub eigenvalues: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalPoint {
    pub location: Vec<f64>,
    pub value: f64,
    pub class: CriticalKind,
    pub transverse: Option<CriticalKind>,
    pub grad_norm: f64,
    pub multiplicity: usize,
    pub orbit: Option<String>,
    pub hessian_eigenvalues: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StartDiagnostic {
    pub start: Vec<f64>,
    pub direction: &'static str,
    pub converged: bool,
    pub iterations: usize,
    pub grad_norm: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalSet {
    pub field: ScalarField,
    pub policy: ExtensionPolicy,
    pub points: Vec<CriticalPoint>,
    pub diagnostics: Vec<StartDiagnostic>,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn unit_normal(spec: &SurfaceSpec, x: &[f64]) -> Result<Vec<f64>> {
    let (_, g) = spec.gradient(x)?;
    let gn = norm(&g);
    Ok(g.iter().map(|v| v / gn).collect())
}

fn offset(x: &[f64], frame: &[Vec<f64>], xi: &[f64]) -> Vec<f64> {
    let mut y = x.to_vec();
    for (t, c) in frame.iter().zip(xi) {
        for k in 0..y.len() {
            y[k] += c * t[k];
        }
    }
    y
}

struct Objective<'a> {
    spec: &'a SurfaceSpec,
    field: ScalarField,
    policy: ExtensionPolicy,
    exact: bool,
    scale: f64,
}

impl Objective<'_> {
    fn new(spec: &SurfaceSpec, field: ScalarField, policy: ExtensionPolicy) -> Result<Objective<'_>> {
        let probe = spec
            .parametric_point(0.1, 0.1)
            .map(Ok)
            .unwrap_or_else(|| first_surface_point(spec))?;
        let exact = field_value_and_gradient(spec, &probe, policy, field)?.is_some();
        Ok(Objective {
            spec,
            field,
            policy,
            exact,
            scale: spec.feature_scale,
        })
    }

    fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        project_to_surface(self.spec, x, 1e-13)
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        field_value(self.spec, x, self.policy, self.field)
    }

    fn fd_step(&self) -> f64 {
        if self.exact {
            1e-4 * self.scale
        } else {
            1e-2 * self.scale
        }
    }

    /// Tangential gradient in the given frame.
    fn gradient(&self, x: &[f64], frame: &[Vec<f64>]) -> Result<Vec<f64>> {
        if self.exact {
            let (_, g) = field_value_and_gradient(self.spec, x, self.policy, self.field)?
                .expect("exact objective");
            return Ok(frame.iter().map(|t| t.iter().zip(&g).map(|(a, b)| a * b).sum()).collect());
        }
        let h = 1e-3 * self.scale;
        let mut out = Vec::with_capacity(frame.len());
        for a in 0..frame.len() {
            let mut xi = vec![0.0; frame.len()];
            xi[a] = h;
            let fp = self.value(&self.project(&offset(x, frame, &xi))?)?;
            xi[a] = -h;
            let fm = self.value(&self.project(&offset(x, frame, &xi))?)?;
            out.push((fp - fm) / (2.0 * h));
        }
        Ok(out)
    }

    /// Second-difference matrix of `ξ ↦ F(π(x + Tξ))` at `ξ = 0`.
    fn hessian(&self, x: &[f64], frame: &[Vec<f64>]) -> Result<Vec<f64>> {
        let m = frame.len();
        let h = self.fd_step();
        let phi = |xi: &[f64]| -> Result<f64> { self.value(&self.project(&offset(x, frame, xi))?) };
        let f0 = self.value(x)?;
        let mut hess = DMatrix::<f64>::zeros(m, m);
        for a in 0..m {
            let mut xi = vec![0.0; m];
            xi[a] = h;
            let fp = phi(&xi)?;
            xi[a] = -h;
            let fm = phi(&xi)?;
            hess[(a, a)] = (fp - 2.0 * f0 + fm) / (h * h);
            for b in 0..a {
                let mut corners = [0.0; 4];
                for (slot, (sa, sb)) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)].into_iter().enumerate() {
                    let mut xi = vec![0.0; m];
                    xi[a] = sa * h;
                    xi[b] = sb * h;
                    corners[slot] = phi(&xi)?;
                }
                let v = (corners[0] - corners[1] - corners[2] + corners[3]) / (4.0 * h * h);
                hess[(a, b)] = v;
                hess[(b, a)] = v;
            }
        }
        Ok(hess.as_slice().to_vec())
    }

    /// Relative size below which a Hessian eigenvalue counts as zero.
    fn degeneracy(&self) -> f64 {
        if self.exact {
            1e-6
        } else {
            1e-3
        }
    }

    fn tolerance(&self, value: f64, tol: f64) -> f64 {
        let floor = if self.exact { tol } else { tol.max(1e-5) };
        floor * (1.0 + value.abs()) / self.scale
    }
}

fn first_surface_point(spec: &SurfaceSpec) -> Result<Vec<f64>> {
    let centre: Vec<f64> = spec.bounds.iter().map(|(lo, hi)| 0.5 * (lo + hi) + 0.123 * (hi - lo)).collect();
    project_to_surface(spec, &centre, 1e-12)
}

fn start_points(spec: &SurfaceSpec, cfg: &OptimConfig) -> Result<Vec<Vec<f64>>> {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut pts = Vec::with_capacity(cfg.starts);
    let mut attempts = 0;
    while pts.len() < cfg.starts {
        attempts += 1;
        if attempts > 50 * cfg.starts.max(1) {
            return Err(Error::NoCriticalPointFound("could not place start points on the surface".into()));
        }
        let x: Vec<f64> = spec.bounds.iter().map(|&(lo, hi)| rng.random_range(lo..hi)).collect();
        if let Ok(y) = project_to_surface(spec, &x, 1e-12) {
            if y.iter().zip(&spec.bounds).all(|(v, (lo, hi))| *v >= *lo && *v <= *hi) {
                pts.push(y);
            }
        }
    }
    // catalog surfaces also get a meridian of parametric seeds
    for k in 0..8 {
        if let Some(p) = spec.parametric_point((k as f64 + 0.5) / 8.0, 0.137) {
            pts.push(p);
        }
    }
    Ok(pts)
}

struct RunOutcome {
    x: Vec<f64>,
    value: f64,
    grad_norm: f64,
    iterations: usize,
    converged: bool,
}

/// Projected ascent (`sign = 1`) or descent (`sign = -1`) with backtracking.
fn climb(obj: &Objective<'_>, start: &[f64], sign: f64, cfg: &OptimConfig) -> Result<RunOutcome> {
    let mut x = start.to_vec();
    let mut v = obj.value(&x)?;
    let mut step = 0.1 * obj.scale;
    let coarse = cfg.tol.sqrt();
    let mut iterations = 0;
    let mut grad_norm;
    loop {
        let frame = tangent_frame(&unit_normal(obj.spec, &x)?);
        let g = obj.gradient(&x, &frame)?;
        grad_norm = norm(&g);
        if grad_norm <= obj.tolerance(v, coarse) || iterations >= cfg.max_iter {
            break;
        }
        iterations += 1;
        let dir: Vec<f64> = g.iter().map(|c| sign * c / grad_norm).collect();
        let mut accepted = false;
        while step >= 1e-12 * obj.scale {
            let trial = obj.project(&offset(&x, &frame, &dir.iter().map(|c| c * step).collect::<Vec<_>>()));
            if let Ok(trial) = trial {
                let vt = obj.value(&trial)?;
                if sign * (vt - v) > 0.0 {
                    x = trial;
                    v = vt;
                    step = (2.0 * step).min(0.5 * obj.scale);
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    polish(obj, &x, cfg, iterations)
}

/// Newton iterations on the tangential gradient.
fn polish(obj: &Objective<'_>, start: &[f64], cfg: &OptimConfig, mut iterations: usize) -> Result<RunOutcome> {
    let mut x = start.to_vec();
    let mut v = obj.value(&x)?;
    let mut frame = tangent_frame(&unit_normal(obj.spec, &x)?);
    let mut g = obj.gradient(&x, &frame)?;
    for _ in 0..30 {
        // exact gradients are polished well below tolerance, numeric ones only to it
        let target = if obj.exact { 1e-3 } else { 1.0 };
        if norm(&g) <= target * obj.tolerance(v, cfg.tol) {
            break;
        }
        iterations += 1;
        let m = frame.len();
        let hess = DMatrix::from_column_slice(m, m, &obj.hessian(&x, &frame)?);
        let eig = SymmetricEigen::new(hess);
        let lmax = eig.eigenvalues.iter().fold(0.0f64, |a, l| a.max(l.abs()));
        let cutoff = obj.degeneracy() * lmax;
        let mut xi = vec![0.0; m];
        for k in 0..m {
            let l = eig.eigenvalues[k];
            if l.abs() <= cutoff {
                continue;
            }
            let coef: f64 = (0..m).map(|a| eig.eigenvectors[(a, k)] * g[a]).sum::<f64>() / l;
            for a in 0..m {
                xi[a] -= coef * eig.eigenvectors[(a, k)];
            }
        }
        let len = norm(&xi);
        if len > 0.1 * obj.scale {
            xi.iter_mut().for_each(|c| *c *= 0.1 * obj.scale / len);
        }
        // damped Newton: halve until the gradient shrinks
        let mut next = None;
        for _ in 0..6 {
            if let Ok(y) = obj.project(&offset(&x, &frame, &xi)) {
                let fy = tangent_frame(&unit_normal(obj.spec, &y)?);
                if let Ok(gy) = obj.gradient(&y, &fy) {
                    if norm(&gy) < norm(&g) {
                        next = Some((y, fy, gy));
                        break;
                    }
                }
            }
            xi.iter_mut().for_each(|c| *c *= 0.5);
        }
        let Some((y, fy, gy)) = next else { break };
        x = y;
        frame = fy;
        g = gy;
        v = obj.value(&x)?;
    }
    let grad_norm = norm(&g);
    Ok(RunOutcome {
        converged: grad_norm <= obj.tolerance(v, cfg.tol),
        x,
        value: v,
        grad_norm,
        iterations,
    })
}

fn classify_with(obj: &Objective<'_>, point: &[f64]) -> Result<Classification> {
    let frame = tangent_frame(&unit_normal(obj.spec, point)?);
    let m = frame.len();
    let hess = DMatrix::from_column_slice(m, m, &obj.hessian(point, &frame)?);
    let mut eigenvalues: Vec<f64> = SymmetricEigen::new(hess).eigenvalues.iter().copied().collect();
    eigenvalues.sort_by(|a, b| a.total_cmp(b));
    let lmax = eigenvalues.iter().fold(0.0f64, |a, l| a.max(l.abs()));
    let zero = obj.degeneracy() * lmax.max(1.0);
    let signs: Vec<i8> = eigenvalues
        .iter()
        .map(|&l| if l.abs() < zero { 0 } else if l > 0.0 { 1 } else { -1 })
        .collect();
    let definite = |s: &[i8]| -> Option<CriticalKind> {
        let nz: Vec<i8> = s.iter().copied().filter(|&v| v != 0).collect();
        if nz.is_empty() {
            None
        } else if nz.iter().all(|&v| v < 0) {
            Some(CriticalKind::Max)
        } else if nz.iter().all(|&v| v > 0) {
            Some(CriticalKind::Min)
        } else {
            Some(CriticalKind::Saddle)
        }
    };
    let transverse = definite(&signs);
    Ok(if signs.contains(&0) {
        Classification {
            kind: CriticalKind::DegenerateOrbit,
            transverse,
            eigenvalues,
        }
    } else {
        Classification {
            kind: transverse.expect("non-degenerate"),
            transverse: None,
            eigenvalues,
        }
    })
}

/// Classification from eigenvalues of the tangential second-difference matrix.
pub fn classify_critical_point(
    spec: &SurfaceSpec,
    point: &[f64],
    field: ScalarField,
    policy: ExtensionPolicy,
) -> Result<Classification> {
    let obj = Objective::new(spec, field, policy)?;
    classify_with(&obj, point)
}

fn round_label(v: f64) -> f64 {
    let r = (v * 1e6).round() / 1e6;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

/// Multistart search for critical points of `field` on the surface.
pub fn find_critical_points(
    spec: &SurfaceSpec,
    field: ScalarField,
    policy: ExtensionPolicy,
    cfg: &OptimConfig,
) -> Result<CriticalSet> {
    if cfg.starts == 0 || cfg.tol <= 0.0 || cfg.max_iter == 0 {
        return Err(Error::InvalidInput("starts, tol and max_iter must be positive".into()));
    }
    let obj = Objective::new(spec, field, policy)?;
    let starts = start_points(spec, cfg)?;

    // constant field: every point is critical
    let values: Vec<f64> = starts.iter().map(|p| obj.value(p)).collect::<Result<_>>()?;
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    let flat_tol = if obj.exact { 1e-9 } else { 1e-6 };
    if hi - lo <= flat_tol * (1.0 + hi.abs().max(lo.abs())) {
        let grads: Vec<f64> = starts
            .iter()
            .map(|p| Ok(norm(&obj.gradient(p, &tangent_frame(&unit_normal(spec, p)?))?)))
            .collect::<Result<_>>()?;
        let worst = grads.iter().fold(0.0f64, |a, g| a.max(*g));
        if worst <= obj.tolerance(hi, cfg.tol.sqrt()) {
            let classification = classify_with(&obj, &starts[0])?;
            return Ok(CriticalSet {
                field,
                policy,
                points: vec![CriticalPoint {
                    location: starts[0].clone(),
                    value: values[0],
                    class: CriticalKind::DegenerateOrbit,
                    transverse: classification.transverse,
                    grad_norm: grads[0],
                    multiplicity: starts.len(),
                    orbit: Some("whole surface".into()),
                    hessian_eigenvalues: classification.eigenvalues,
                }],
                diagnostics: Vec::new(),
            });
        }
    }

    let runs: Vec<(Vec<f64>, &'static str, Result<RunOutcome>)> = if obj.exact {
        starts
            .par_iter()
            .flat_map_iter(|s| {
                [(1.0, "ascent"), (-1.0, "descent")]
                    .into_iter()
                    .map(move |(sign, label)| (s, sign, label))
            })
            .map(|(s, sign, label)| (s.clone(), label, climb(&obj, s, sign, cfg)))
            .collect()
    } else {
        let seeds = find_critical_points(spec, field, ExtensionPolicy::GradientNormalized, cfg)?;
        if seeds.points.len() == 1 && seeds.points[0].orbit.as_deref() == Some("whole surface") {
            let p = &seeds.points[0];
            let v = obj.value(&p.location)?;
            let frame = tangent_frame(&unit_normal(spec, &p.location)?);
            let g = norm(&obj.gradient(&p.location, &frame)?);
            return Ok(CriticalSet {
                field,
                policy,
                points: vec![CriticalPoint {
                    value: v,
                    grad_norm: g,
                    ..p.clone()
                }],
                diagnostics: Vec::new(),
            });
        }
        seeds
            .points
            .par_iter()
            .map(|p| (p.location.clone(), "seeded", polish(&obj, &p.location, cfg, 0)))
            .collect()
    };

    let mut diagnostics = Vec::with_capacity(runs.len());
    let mut converged: Vec<RunOutcome> = Vec::new();
    for (start, direction, outcome) in runs {
        match outcome {
            Ok(o) => {
                diagnostics.push(StartDiagnostic {
                    start,
                    direction,
                    converged: o.converged,
                    iterations: o.iterations,
                    grad_norm: o.grad_norm,
                    value: o.value,
                });
                if o.converged {
                    converged.push(o);
                }
            }
            Err(_) => diagnostics.push(StartDiagnostic {
                start,
                direction,
                converged: false,
                iterations: 0,
                grad_norm: f64::NAN,
                value: f64::NAN,
            }),
        }
    }
    if converged.is_empty() {
        return Err(Error::NoCriticalPointFound(format!("{} runs, none converged", diagnostics.len())));
    }

    // merge duplicates
    let merge_dist = 1e-5 * spec.feature_scale;
    let mut merged: Vec<(RunOutcome, usize)> = Vec::new();
    for o in converged {
        if let Some(slot) = merged.iter_mut().find(|(m, _)| {
            norm(&m.x.iter().zip(&o.x).map(|(a, b)| a - b).collect::<Vec<_>>()) < merge_dist
        }) {
            slot.1 += 1;
            if o.grad_norm < slot.0.grad_norm {
                slot.0 = o;
            }
        } else {
            merged.push((o, 1));
        }
    }

    // collapse rotation orbits about the z axis
    let mut points: Vec<CriticalPoint> = Vec::new();
    if spec.is_axisymmetric() && spec.dim == 3 {
        let mut groups: Vec<(f64, f64, RunOutcome, usize)> = Vec::new();
        for (o, count) in merged {
            let rho = o.x[0].hypot(o.x[1]);
            let z = o.x[2];
            if let Some(g) = groups
                .iter_mut()
                .find(|g| (g.0 - rho).abs() < merge_dist && (g.1 - z).abs() < merge_dist)
            {
                g.3 += count;
                if o.grad_norm < g.2.grad_norm {
                    g.2 = o;
                }
            } else {
                groups.push((rho, z, o, count));
            }
        }
        for (rho, z, o, count) in groups {
            if rho > 1e-6 * spec.feature_scale {
                // representative at azimuth zero
                let rep = obj.project(&[rho, 0.0, z])?;
                let value = obj.value(&rep)?;
                let frame = tangent_frame(&unit_normal(spec, &rep)?);
                let grad_norm = norm(&obj.gradient(&rep, &frame)?);
                let c = classify_with(&obj, &rep)?;
                points.push(CriticalPoint {
                    location: rep,
                    value,
                    class: CriticalKind::DegenerateOrbit,
                    transverse: if c.kind == CriticalKind::DegenerateOrbit { c.transverse } else { Some(c.kind) },
                    grad_norm,
                    multiplicity: count,
                    orbit: Some(format!("circle z={}, ρ={}", round_label(z), round_label(rho))),
                    hessian_eigenvalues: c.eigenvalues,
                });
            } else {
                points.push(point_record(&obj, o, count)?);
            }
        }
    } else {
        for (o, count) in merged {
            points.push(point_record(&obj, o, count)?);
        }
    }
    points.sort_by(|a, b| b.value.total_cmp(&a.value).then_with(|| {
        a.location
            .iter()
            .zip(&b.location)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    }));
    Ok(CriticalSet {
        field,
        policy,
        points,
        diagnostics,
    })
}

fn point_record(obj: &Objective<'_>, o: RunOutcome, multiplicity: usize) -> Result<CriticalPoint> {
    let c = classify_with(obj, &o.x)?;
    Ok(CriticalPoint {
        location: o.x,
        value: o.value,
        class: c.kind,
        transverse: c.transverse,
        grad_norm: o.grad_norm,
        multiplicity,
        orbit: None,
        hessian_eigenvalues: c.eigenvalues,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedPoint {
    pub location: Vec<f64>,
    pub value: f64,
    pub magnitude: f64,
    pub class: CriticalKind,
    pub orbit: Option<String>,
}

/// Signed and magnitude rankings of a critical set.
///
/// Both tables are reported so that "maximum" can be read either as the
/// largest signed value or the largest magnitude.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtremumReport {
    pub field: ScalarField,
    pub policy: ExtensionPolicy,
    pub points: Vec<CriticalPoint>,
    pub signed_max: Option<RankedPoint>,
    pub signed_min: Option<RankedPoint>,
    pub by_magnitude: Vec<RankedPoint>,
}

pub fn extremum_report(set: &CriticalSet) -> ExtremumReport {
    let ranked: Vec<RankedPoint> = set
        .points
        .iter()
        .map(|p| RankedPoint {
            location: p.location.clone(),
            value: p.value,
            magnitude: p.value.abs(),
            class: p.class,
            orbit: p.orbit.clone(),
        })
        .collect();
    let pick = |better: &dyn Fn(f64, f64) -> bool| -> Option<RankedPoint> {
        ranked
            .iter()
            .fold(None::<&RankedPoint>, |best, p| match best {
                Some(b) if !better(p.value, b.value) => Some(b),
                _ => Some(p),
            })
            .cloned()
    };
    let mut by_magnitude = ranked.clone();
    by_magnitude.sort_by(|a, b| b.magnitude.total_cmp(&a.magnitude));
    ExtremumReport {
        field: set.field,
        policy: set.policy,
        points: set.points.clone(),
        signed_max: pick(&|a, b| a > b),
        signed_min: pick(&|a, b| a < b),
        by_magnitude,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Bindings;
    use crate::surface::builtin_surface;

    fn b(pairs: &[(&str, f64)]) -> Bindings {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    /// Dense meridian sweep of a field, returning (argmin u, min, argmax u, max).
    fn sweep(spec: &SurfaceSpec, field: ScalarField, policy: ExtensionPolicy, n: usize) -> (f64, f64, f64, f64) {
        let mut out = (0.0, f64::INFINITY, 0.0, f64::NEG_INFINITY);
        for k in 0..=n {
            let u = 0.5 * k as f64 / n as f64;
            let p = spec.parametric_point(u, 0.0).unwrap();
            let v = field_value(spec, &p, policy, field).unwrap();
            if v < out.1 {
                out = (u, v, out.2, out.3);
            }
            if v > out.3 {
                out = (out.0, out.1, u, v);
            }
        }
        out
    }

    #[test]
    fn prolate_poles_are_lap_m_maxima() {
        let s = builtin_surface("spheroid", &b(&[("a", 1.0), ("b", 2.0)])).unwrap();
        let set = find_critical_points(&s, ScalarField::LapM, ExtensionPolicy::GradientNormalized, &OptimConfig::default())
            .unwrap();
        let poles: Vec<&CriticalPoint> = set.points.iter().filter(|p| p.orbit.is_none()).collect();
        assert_eq!(poles.len(), 2, "{:?}", set.points);
        for p in &poles {
            assert!(p.location[0].abs() < 1e-6 && p.location[1].abs() < 1e-6);
            assert!((p.location[2].abs() - 2.0).abs() < 1e-6);
            assert_eq!(p.class, CriticalKind::Max);
        }
        let (_, _, umax, vmax) = sweep(&s, ScalarField::LapM, ExtensionPolicy::GradientNormalized, 400);
        assert!(umax == 0.0 || umax == 0.5);
        assert!((poles[0].value - vmax).abs() < 1e-9 * vmax.abs());
    }

    #[test]
    fn torus_inner_circle_is_an_orbit() {
        let s = builtin_surface("torus", &b(&[("R", 2.0), ("r", 1.0)])).unwrap();
        let set = find_critical_points(&s, ScalarField::LapM, ExtensionPolicy::SignedDistance, &OptimConfig::default())
            .unwrap();
        let inner = set
            .points
            .iter()
            .find(|p| p.orbit.as_deref() == Some("circle z=0, ρ=1"))
            .expect("inner circle orbit");
        assert_eq!(inner.class, CriticalKind::DegenerateOrbit);
        assert_eq!(inner.transverse, Some(CriticalKind::Min));
        let (_, vmin, _, _) = sweep(&s, ScalarField::LapM, ExtensionPolicy::SignedDistance, 400);
        assert!((inner.value - vmin).abs() < 1e-9);
        assert!((inner.value + 2.0).abs() < 1e-10);
        let near_zero = inner.hessian_eigenvalues.iter().filter(|l| l.abs() < 1e-6).count();
        assert_eq!(near_zero, 1);
    }

    #[test]
    fn sphere_field_is_whole_surface() {
        let s = builtin_surface("sphere", &b(&[("a", 1.0)])).unwrap();
        let set = find_critical_points(&s, ScalarField::LapM, ExtensionPolicy::SignedDistance, &OptimConfig::default())
            .unwrap();
        assert_eq!(set.points.len(), 1);
        assert_eq!(set.points[0].orbit.as_deref(), Some("whole surface"));
        assert_eq!(set.points[0].class, CriticalKind::DegenerateOrbit);
        assert!(set.points[0].value.abs() < 1e-10);
    }

    #[test]
    fn plane_mean_curvature_is_degenerate() {
        let s = builtin_surface("plane", &Bindings::new()).unwrap();
        let c = classify_critical_point(&s, &[0.3, -0.2, 0.0], ScalarField::MeanCurvature, ExtensionPolicy::SignedDistance)
            .unwrap();
        assert_eq!(c.kind, CriticalKind::DegenerateOrbit);
        assert_eq!(c.transverse, None);
        assert!(c.eigenvalues.iter().all(|l| l.abs() < 1e-12));
    }

    #[test]
    fn search_is_deterministic() {
        let s = builtin_surface("torus", &b(&[("R", 2.0), ("r", 1.0)])).unwrap();
        let cfg = OptimConfig {
            starts: 6,
            seed: 9,
            ..OptimConfig::default()
        };
        let a = find_critical_points(&s, ScalarField::VgGeom, ExtensionPolicy::SignedDistance, &cfg).unwrap();
        let b2 = find_critical_points(&s, ScalarField::VgGeom, ExtensionPolicy::SignedDistance, &cfg).unwrap();
        assert_eq!(a, b2);
        for p in &a.points {
            assert!(s.eval(&p.location).unwrap().abs() < 1e-9);
        }
    }

    #[test]
    fn report_ranks_by_sign_and_magnitude() {
        let s = builtin_surface("torus", &b(&[("R", 2.0), ("r", 1.0)])).unwrap();
        let set = find_critical_points(&s, ScalarField::LapM, ExtensionPolicy::SignedDistance, &OptimConfig::default())
            .unwrap();
        let r = extremum_report(&set);
        let min = r.signed_min.unwrap();
        assert_eq!(min.orbit.as_deref(), Some("circle z=0, ρ=1"));
        assert_eq!(r.by_magnitude[0].orbit, min.orbit);
        assert!(r.signed_max.unwrap().value >= min.value);
    }
}
