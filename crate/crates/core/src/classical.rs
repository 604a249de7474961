//! Constrained classical motion on `f = 0`.
//!
//! The integrator is RATTLE for a free particle: a drift with the constraint
//! force along `∇f(x_n)` solving `f(x_{n+1}) = 0`, then an exact tangential
//! projection of the momentum at the new point.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{normal_jet, ExtensionPolicy};
use crate::surface::SurfaceSpec;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryState {
    pub x: Vec<f64>,
    pub p: Vec<f64>,
    pub t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub steps: usize,
    pub constraint_tol: f64,
    pub mass: f64,
}

impl IntegratorConfig {
    pub fn new(dt: f64, steps: usize, mass: f64) -> IntegratorConfig {
        IntegratorConfig {
            dt,
            steps,
            constraint_tol: 1e-12,
            mass,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<TrajectoryState>,
    pub dt: f64,
    pub mass: f64,
    pub f_residuals: Vec<f64>,
    pub tangency_residuals: Vec<f64>,
}

impl Trajectory {
    pub fn energies(&self) -> Vec<f64> {
        self.states.iter().map(|s| dot(&s.p, &s.p) / (2.0 * self.mass)).collect()
    }

    /// Largest relative deviation of the kinetic energy from its initial value.
    pub fn energy_drift(&self) -> f64 {
        let e = self.energies();
        let e0 = e[0];
        let scale = if e0 > 0.0 { e0 } else { 1.0 };
        e.iter().fold(0.0f64, |m, v| m.max((v - e0).abs() / scale))
    }

    /// CSV with columns `t, x1.., p1.., energy, f_residual, tangency_residual`.
    pub fn to_csv(&self) -> String {
        let dim = self.states.first().map_or(0, |s| s.x.len());
        let mut cols = vec!["t".to_string()];
        cols.extend((1..=dim).map(|i| format!("x{i}")));
        cols.extend((1..=dim).map(|i| format!("p{i}")));
        cols.extend(["energy", "f_residual", "tangency_residual"].map(String::from));
        let mut out = cols.join(",");
        out.push('\n');
        for (k, s) in self.states.iter().enumerate() {
            let mut row = vec![format!("{:.16e}", s.t)];
            row.extend(s.x.iter().chain(&s.p).map(|v| format!("{v:.16e}")));
            row.push(format!("{:.16e}", dot(&s.p, &s.p) / (2.0 * self.mass)));
            row.push(format!("{:.16e}", self.f_residuals[k]));
            row.push(format!("{:.16e}", self.tangency_residuals[k]));
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn unit_normal(spec: &SurfaceSpec, x: &[f64]) -> Result<Vec<f64>> {
    let (_, g) = spec.gradient(x)?;
    let gn = norm(&g);
    if gn == 0.0 {
        return Err(Error::ProjectionFailure("vanishing gradient".into()));
    }
    Ok(g.iter().map(|v| v / gn).collect())
}

fn tangency_tol(p: &[f64], tol: f64) -> f64 {
    1e3 * tol * norm(p).max(1.0)
}

/// RATTLE trajectory with `steps + 1` states.
pub fn integrate(spec: &SurfaceSpec, initial: &TrajectoryState, cfg: &IntegratorConfig) -> Result<Trajectory> {
    if !(cfg.dt > 0.0) || cfg.steps == 0 || !(cfg.mass > 0.0) || !(cfg.constraint_tol > 0.0) {
        return Err(Error::InvalidInput("dt, steps, mass and constraint tolerance must be positive".into()));
    }
    if initial.x.len() != spec.dim || initial.p.len() != spec.dim {
        return Err(Error::InvalidInput("state dimension does not match the surface".into()));
    }
    let f0 = spec.eval(&initial.x)?.abs();
    if f0 >= cfg.constraint_tol.max(1e-12) * 10.0 {
        return Err(Error::InvalidInput(format!("initial point is off the surface (|f| = {f0:e})")));
    }
    let n0 = unit_normal(spec, &initial.x)?;
    let t0 = dot(&n0, &initial.p).abs();
    if t0 > tangency_tol(&initial.p, cfg.constraint_tol) {
        return Err(Error::InvalidInput(format!("initial momentum is not tangent (|n·p| = {t0:e})")));
    }

    let d = spec.dim;
    let mut states = Vec::with_capacity(cfg.steps + 1);
    let mut f_res = Vec::with_capacity(cfg.steps + 1);
    let mut tan_res = Vec::with_capacity(cfg.steps + 1);
    states.push(initial.clone());
    f_res.push(f0);
    tan_res.push(t0);
    let mut x = initial.x.clone();
    let mut p = initial.p.clone();
    for step in 1..=cfg.steps {
        let (_, g0) = spec.gradient(&x)?;
        let drift: Vec<f64> = (0..d).map(|i| x[i] + cfg.dt * p[i] / cfg.mass).collect();
        // scalar Newton for the multiplier along ∇f(x_n)
        let mut lambda = 0.0;
        let mut y = drift.clone();
        let mut converged = false;
        for _ in 0..50 {
            let (f, g) = spec.gradient(&y)?;
            let slope = dot(&g, &g0);
            if slope == 0.0 {
                break;
            }
            lambda += f / slope;
            y = (0..d).map(|i| drift[i] - lambda * g0[i]).collect();
            // one step past the tolerance leaves |f| at rounding level
            if f.abs() < cfg.constraint_tol {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::ProjectionFailure(format!("constraint solve failed at step {step}")));
        }
        let moved = lambda.abs() * norm(&g0);
        let limit = 0.5 * cfg.dt * norm(&p) / cfg.mass;
        if moved > limit && moved > cfg.constraint_tol {
            return Err(Error::StepTooLarge { moved, limit });
        }
        let half: Vec<f64> = (0..d).map(|i| cfg.mass * (y[i] - x[i]) / cfg.dt).collect();
        let n1 = unit_normal(spec, &y)?;
        let pn = dot(&n1, &half);
        p = (0..d).map(|i| half[i] - n1[i] * pn).collect();
        x = y;
        let fr = spec.eval(&x)?.abs();
        let tr = dot(&n1, &p).abs();
        if fr >= cfg.constraint_tol || tr > tangency_tol(&p, cfg.constraint_tol) {
            return Err(Error::ProjectionFailure(format!(
                "residuals above tolerance at step {step} (|f| = {fr:e}, |n·p| = {tr:e})"
            )));
        }
        f_res.push(fr);
        tan_res.push(tr);
        states.push(TrajectoryState {
            x: x.clone(),
            p: p.clone(),
            t: initial.t + step as f64 * cfg.dt,
        });
    }
    Ok(Trajectory {
        states,
        dt: cfg.dt,
        mass: cfg.mass,
        f_residuals: f_res,
        tangency_residuals: tan_res,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualSeries {
    /// Residual norm at interior steps `1..len-1`.
    pub per_step: Vec<f64>,
    pub max: f64,
    pub rms: f64,
}

impl ResidualSeries {
    fn from_values(per_step: Vec<f64>) -> ResidualSeries {
        let max = per_step.iter().fold(0.0f64, |m, v| m.max(*v));
        let rms = (per_step.iter().map(|v| v * v).sum::<f64>() / per_step.len().max(1) as f64).sqrt();
        ResidualSeries { per_step, max, rms }
    }
}

fn shape_tensor(spec: &SurfaceSpec, x: &[f64]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let nj = normal_jet(spec, x, ExtensionPolicy::GradientNormalized, 1)?;
    Ok((nj.n(), nj.shape_tensor()))
}

fn quadratic(s: &[Vec<f64>], a: &[f64]) -> f64 {
    (0..a.len())
        .map(|i| (0..a.len()).map(|j| a[i] * s[i][j] * a[j]).sum::<f64>())
        .sum()
}

fn central_difference(traj: &Trajectory, k: usize, scale: f64) -> Vec<f64> {
    let (a, b) = (&traj.states[k - 1].p, &traj.states[k + 1].p);
    a.iter().zip(b).map(|(u, v)| (v - u) / (2.0 * traj.dt * scale)).collect()
}

/// `dp/dt + n (p·∇n·p)/μ` along the trajectory.
pub fn force_residual(spec: &SurfaceSpec, traj: &Trajectory, mass: f64) -> Result<ResidualSeries> {
    if traj.states.len() < 3 {
        return Err(Error::TooFewSteps(traj.states.len()));
    }
    let mut out = Vec::with_capacity(traj.states.len() - 2);
    for k in 1..traj.states.len() - 1 {
        let s = &traj.states[k];
        let (n, shape) = shape_tensor(spec, &s.x)?;
        let q = quadratic(&shape, &s.p) / mass;
        let dp = central_difference(traj, k, 1.0);
        let r: Vec<f64> = dp.iter().zip(&n).map(|(d, ni)| d + ni * q).collect();
        out.push(norm(&r));
    }
    Ok(ResidualSeries::from_values(out))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeodesicResidual {
    pub residual: ResidualSeries,
    /// Normal curvature along the velocity, `v̂·∇n·v̂`, per interior step.
    pub curvature: Vec<f64>,
    /// Largest `|dv/dt - n v²/R|`, the law with the opposite sign.
    pub flipped_max: f64,
}

/// `|dv/dt + n v²/R|` with `1/R = v̂·∇n·v̂`.
pub fn geodesic_form_residual(spec: &SurfaceSpec, traj: &Trajectory, mass: f64) -> Result<GeodesicResidual> {
    if traj.states.len() < 3 {
        return Err(Error::TooFewSteps(traj.states.len()));
    }
    let mut res = Vec::new();
    let mut curvature = Vec::new();
    let mut flipped_max = 0.0f64;
    for k in 1..traj.states.len() - 1 {
        let s = &traj.states[k];
        let v: Vec<f64> = s.p.iter().map(|c| c / mass).collect();
        let speed = norm(&v);
        if speed == 0.0 {
            return Err(Error::ZeroVelocity(k));
        }
        let vhat: Vec<f64> = v.iter().map(|c| c / speed).collect();
        let (n, shape) = shape_tensor(spec, &s.x)?;
        let inv_r = quadratic(&shape, &vhat);
        let dv = central_difference(traj, k, mass);
        let term: Vec<f64> = n.iter().map(|ni| ni * speed * speed * inv_r).collect();
        res.push(norm(&dv.iter().zip(&term).map(|(a, b)| a + b).collect::<Vec<_>>()));
        flipped_max = flipped_max.max(norm(&dv.iter().zip(&term).map(|(a, b)| a - b).collect::<Vec<_>>()));
        curvature.push(inv_r);
    }
    Ok(GeodesicResidual {
        residual: ResidualSeries::from_values(res),
        curvature,
        flipped_max,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceStudy {
    pub dts: Vec<f64>,
    pub force_max: Vec<f64>,
    pub geodesic_max: Vec<f64>,
    pub energy_drift: Vec<f64>,
    /// `log2` ratios of successive force residuals.
    pub orders: Vec<f64>,
}

impl ConvergenceStudy {
    /// Second order, or already at the rounding floor.
    pub fn second_order(&self, floor: f64) -> bool {
        let at_floor = self.force_max.iter().all(|r| *r < floor);
        at_floor || self.orders.iter().all(|o| *o >= 1.9)
    }
}

/// Force and geodesic residuals for a fixed end time over a sequence of steps.
pub fn convergence_study(
    spec: &SurfaceSpec,
    initial: &TrajectoryState,
    end_time: f64,
    dts: &[f64],
    mass: f64,
) -> Result<ConvergenceStudy> {
    let mut study = ConvergenceStudy {
        dts: dts.to_vec(),
        force_max: Vec::new(),
        geodesic_max: Vec::new(),
        energy_drift: Vec::new(),
        orders: Vec::new(),
    };
    for &dt in dts {
        let steps = (end_time / dt).round() as usize;
        let traj = integrate(spec, initial, &IntegratorConfig::new(dt, steps, mass))?;
        study.force_max.push(force_residual(spec, &traj, mass)?.max);
        study.geodesic_max.push(geodesic_form_residual(spec, &traj, mass)?.residual.max);
        study.energy_drift.push(traj.energy_drift());
    }
    for w in study.force_max.windows(2) {
        study.orders.push((w[0] / w[1]).log2());
    }
    Ok(study)
}
