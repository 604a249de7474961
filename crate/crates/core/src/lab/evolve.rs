use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::grid::{LabSurface, ParamSurfaceGrid};
use super::operator::{build_hamiltonian, build_momentum, HamiltonianForm, LinearOperator};
use crate::error::{Error, Result};

/// Gaussian packet in the angles, `|ψ|²` with standard deviation `width`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WavePacket {
    pub center: Vec<f64>,
    pub width: f64,
    /// Integer mode numbers per angle.
    pub momentum: Vec<i64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeGrid {
    pub dt: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EhrenfestRow {
    pub t: f64,
    pub mean_p: Vec<f64>,
    pub dmean_p_dt: Vec<f64>,
    /// `−(1/2μ)⟨n_j p·∇n·p + p·∇n·p n_j⟩`
    pub centripetal_term: Vec<f64>,
    /// `−(ħ²/4μ)⟨∇²M n_j⟩`
    pub quantum_term: Vec<f64>,
    /// `⟨F_j⟩/(2μiħ)`, the part of `[p_j, p²]` that vanishes classically.
    pub f_term: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EhrenfestTrace {
    pub hbar: f64,
    pub mass: f64,
    pub rows: Vec<EhrenfestRow>,
    pub max_norm_drift: f64,
    /// `rms‖d⟨p⟩/dt − centripetal − quantum‖ / rms‖d⟨p⟩/dt‖`
    pub closure_error: f64,
}

fn fmt_row(values: &[f64]) -> impl Iterator<Item = String> + '_ {
    values.iter().map(|v| format!("{v:.16e}"))
}

impl EhrenfestTrace {
    pub fn to_csv(&self) -> String {
        let d = self.rows.first().map_or(0, |r| r.mean_p.len());
        let mut cols = vec!["t".to_string()];
        for name in ["mean_p", "dmean_p_dt", "centripetal_term", "quantum_term", "f_term"] {
            cols.extend((1..=d).map(|j| format!("{name}_{j}")));
        }
        let mut out = cols.join(",");
        out.push('\n');
        for r in &self.rows {
            let mut fields = vec![format!("{:.16e}", r.t)];
            for v in [&r.mean_p, &r.dmean_p_dt, &r.centripetal_term, &r.quantum_term, &r.f_term] {
                fields.extend(fmt_row(v));
            }
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }

    /// Time average of `‖term‖` for the centripetal and quantum columns.
    pub fn mean_term_magnitudes(&self) -> (f64, f64) {
        let k = self.rows.len().max(1) as f64;
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let c = self.rows.iter().map(|r| norm(&r.centripetal_term)).sum::<f64>() / k;
        let q = self.rows.iter().map(|r| norm(&r.quantum_term)).sum::<f64>() / k;
        (c, q)
    }
}

fn wrap(x: f64) -> f64 {
    (x + PI).rem_euclid(2.0 * PI) - PI
}

pub fn packet_state(grid: &ParamSurfaceGrid, packet: &WavePacket) -> Result<Vec<Complex64>> {
    let pd = grid.sizes.len();
    if packet.center.len() != pd || packet.momentum.len() != pd {
        return Err(Error::InvalidInput(format!("packet needs {pd} angles")));
    }
    let spacing = grid.sizes.iter().map(|&n| 2.0 * PI / n as f64).fold(0.0, f64::max);
    if !(packet.width >= 4.0 * spacing && packet.width <= 0.5) {
        return Err(Error::InvalidInput(format!(
            "packet width {} must lie between 4 grid spacings ({:.3e}) and 0.5 rad",
            packet.width,
            4.0 * spacing
        )));
    }
    let psi: Vec<Complex64> = grid
        .angles
        .iter()
        .map(|u| {
            let mut env = 0.0;
            let mut phase = 0.0;
            for a in 0..pd {
                let du = wrap(u[a] - packet.center[a]);
                env += du * du / (4.0 * packet.width * packet.width);
                phase += packet.momentum[a] as f64 * u[a];
            }
            Complex64::from_polar((-env).exp(), phase)
        })
        .collect();
    let nrm = grid.norm(&psi);
    Ok(psi.into_iter().map(|v| v / nrm).collect())
}

enum Propagator {
    Dense(DMatrix<Complex64>),
    Krylov { h: LinearOperator, dt: f64, hbar: f64 },
}

const KRYLOV_DIM: usize = 24;

impl Propagator {
    fn new(grid: &Arc<ParamSurfaceGrid>, h: &LinearOperator, dt: f64, hbar: f64) -> Result<Propagator> {
        let uniform = grid.weights.iter().all(|w| (w - grid.weights[0]).abs() <= 1e-14 * w.abs());
        if uniform && h.dense_materializable() {
            let m = h.to_dense()?;
            let herm = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
            let eig = SymmetricEigen::new(herm);
            let phases = DVector::from_iterator(
                eig.eigenvalues.len(),
                eig.eigenvalues.iter().map(|l| Complex64::from_polar(1.0, -l * dt / hbar)),
            );
            let v = &eig.eigenvectors;
            let u = v * DMatrix::from_diagonal(&phases) * v.adjoint();
            Ok(Propagator::Dense(u))
        } else {
            Ok(Propagator::Krylov {
                h: h.clone(),
                dt,
                hbar,
            })
        }
    }

    fn step(&self, grid: &ParamSurfaceGrid, psi: &[Complex64]) -> Vec<Complex64> {
        match self {
            Propagator::Dense(u) => (u * DVector::from_column_slice(psi)).as_slice().to_vec(),
            Propagator::Krylov { h, dt, hbar } => lanczos_step(grid, h, psi, *dt / *hbar),
        }
    }
}

/// `exp(−iHτ)ψ` from a Lanczos basis orthonormal under the quadrature weights.
///
/// The basis grows until the last expansion coefficient times the next
/// off-diagonal entry drops below rounding.
fn lanczos_step(grid: &ParamSurfaceGrid, h: &LinearOperator, psi: &[Complex64], tau: f64) -> Vec<Complex64> {
    let beta0 = grid.norm(psi);
    let mut basis: Vec<Vec<Complex64>> = vec![psi.iter().map(|v| v / beta0).collect()];
    let mut alpha = Vec::new();
    let mut beta = Vec::new();
    let coeffs = loop {
        let k = alpha.len();
        let mut w = h.apply(&basis[k]);
        alpha.push(grid.inner(&basis[k], &w).re);
        // full reorthogonalization keeps the basis orthonormal to rounding
        for v in &basis {
            let c = grid.inner(v, &w);
            for (x, y) in w.iter_mut().zip(v) {
                *x -= c * y;
            }
        }
        let b = grid.norm(&w);
        let coeffs = tridiagonal_exponential(&alpha, &beta, tau);
        let tail = coeffs.last().unwrap().norm() * b;
        if alpha.len() == KRYLOV_DIM || b < 1e-13 || (alpha.len() >= 3 && tail < 1e-15) {
            break coeffs;
        }
        beta.push(b);
        basis.push(w.into_iter().map(|x| x / b).collect());
    };
    let mut out = vec![Complex64::new(0.0, 0.0); psi.len()];
    for (c, v) in coeffs.iter().zip(&basis) {
        for (o, x) in out.iter_mut().zip(v) {
            *o += c * x * beta0;
        }
    }
    out
}

/// `exp(−iTτ) e₁` for the symmetric tridiagonal `T`.
fn tridiagonal_exponential(alpha: &[f64], beta: &[f64], tau: f64) -> Vec<Complex64> {
    let m = alpha.len();
    let t = DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            alpha[i]
        } else if i + 1 == j {
            beta[i]
        } else if j + 1 == i {
            beta[j]
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(t);
    let q = &eig.eigenvectors;
    (0..m)
        .map(|i| {
            (0..m)
                .map(|k| q[(i, k)] * q[(0, k)] * Complex64::from_polar(1.0, -eig.eigenvalues[k] * tau))
                .sum()
        })
        .collect()
}

/// Expectation values along the evolution.
///
/// Each `p_j` is symmetric under the quadrature weights, so one momentum factor
/// is moved onto the bra and every term follows from `p_l ψ` and `p_k p_l ψ`.
struct Observables {
    grid: Arc<ParamSurfaceGrid>,
    p: Vec<LinearOperator>,
    mass: f64,
    quantum: Vec<Vec<f64>>,
}

impl Observables {
    fn new(grid: &Arc<ParamSurfaceGrid>, hbar: f64, mass: f64) -> Observables {
        let geo = &grid.geometry;
        let lap_m = geo.lap_m();
        let c = hbar * hbar / (4.0 * mass);
        let quantum = (0..grid.dim())
            .map(|j| lap_m.iter().zip(geo.n(j)).map(|(l, n)| -c * l * n).collect())
            .collect();
        Observables {
            grid: grid.clone(),
            p: build_momentum(grid, hbar),
            mass,
            quantum,
        }
    }

    fn measure(&self, psi: &[Complex64]) -> [Vec<f64>; 4] {
        let (grid, geo, d) = (&*self.grid, &self.grid.geometry, self.grid.dim());
        let scaled = |c: &[f64], v: &[Complex64]| -> Vec<Complex64> { v.iter().zip(c).map(|(a, b)| a * b).collect() };
        let phi: Vec<Vec<Complex64>> = self.p.iter().map(|p| p.apply(psi)).collect();
        let chi: Vec<Vec<Vec<Complex64>>> = self.p.iter().map(|pk| phi.iter().map(|f| pk.apply(f)).collect()).collect();
        let mut q_psi = vec![Complex64::new(0.0, 0.0); psi.len()];
        for i in 0..d {
            for l in 0..d {
                for (o, v) in q_psi.iter_mut().zip(self.p[i].apply(&scaled(geo.dn(i, l), &phi[l]))) {
                    *o += v;
                }
            }
        }
        let density: Vec<f64> = psi.iter().zip(&grid.weights).map(|(v, w)| v.norm_sqr() * w).collect();
        let mean_p = (0..d).map(|j| grid.inner(psi, &phi[j]).re).collect();
        // −(1/2μ)⟨n_j Q + Q n_j⟩ = −(1/μ) Re⟨n_j ψ, Qψ⟩
        let centripetal = (0..d)
            .map(|j| -grid.inner(&scaled(geo.n(j), psi), &q_psi).re / self.mass)
            .collect();
        let quantum = self.quantum.iter().map(|q| q.iter().zip(&density).map(|(a, b)| a * b).sum()).collect();
        let f = (0..d)
            .map(|j| {
                let mut s = 0.0;
                for k in 0..d {
                    for l in 0..d {
                        let c: Vec<f64> = geo.dn(j, l).iter().zip(geo.n(k)).map(|(a, b)| a * b).collect();
                        // c p_l p_k + p_k p_l c, then p_l c p_k + p_k c p_l
                        s += 2.0 * grid.inner(psi, &scaled(&c, &chi[l][k])).re;
                        s += 2.0 * grid.inner(&phi[l], &scaled(&c, &phi[k])).re;
                    }
                }
                // F_j/(2μiħ) with F_j = (iħ/2)Σ{…}
                0.25 * s / self.mass
            })
            .collect();
        [mean_p, centripetal, quantum, f]
    }
}

/// Evolves an arbitrary initial state with the Laplace–Beltrami Hamiltonian.
///
/// Uniform-weight grids up to the dense limit use the exact eigen-propagator;
/// others use a Lanczos exponential per step.
pub fn evolve_state(
    grid: &Arc<ParamSurfaceGrid>,
    psi0: &[Complex64],
    time: TimeGrid,
    hbar: f64,
    mass: f64,
) -> Result<EhrenfestTrace> {
    if time.steps < 2 || !(time.dt > 0.0) || !(hbar > 0.0) || !(mass > 0.0) {
        return Err(Error::InvalidInput("need dt, hbar, mass > 0 and at least 2 steps".into()));
    }
    if psi0.len() != grid.len() {
        return Err(Error::InvalidInput("initial state does not match the grid".into()));
    }
    let h = build_hamiltonian(grid, hbar, mass, HamiltonianForm::LaplaceBeltrami);
    let prop = Propagator::new(grid, &h, time.dt, hbar)?;
    let obs = Observables::new(grid, hbar, mass);
    let norm0 = grid.norm(psi0);
    let mut psi = psi0.to_vec();
    let mut samples = vec![obs.measure(&psi)];
    let mut max_drift = 0.0f64;
    for _ in 0..time.steps {
        psi = prop.step(grid, &psi);
        let drift = (grid.norm(&psi) - norm0).abs() / norm0;
        max_drift = max_drift.max(drift);
        if drift > 1e-6 {
            return Err(Error::NormDrift(drift));
        }
        samples.push(obs.measure(&psi));
    }
    let d = grid.dim();
    let mut rows = Vec::new();
    let (mut num, mut den) = (0.0, 0.0);
    for k in 1..time.steps {
        let dp: Vec<f64> = (0..d)
            .map(|j| (samples[k + 1][0][j] - samples[k - 1][0][j]) / (2.0 * time.dt))
            .collect();
        let [mean_p, cent, quant, f] = samples[k].clone();
        for j in 0..d {
            num += (dp[j] - cent[j] - quant[j]).powi(2);
            den += dp[j].powi(2);
        }
        rows.push(EhrenfestRow {
            t: k as f64 * time.dt,
            mean_p,
            dmean_p_dt: dp,
            centripetal_term: cent,
            quantum_term: quant,
            f_term: f,
        });
    }
    let closure_error = if den > 0.0 { (num / den).sqrt() } else { num.sqrt() };
    Ok(EhrenfestTrace {
        hbar,
        mass,
        rows,
        max_norm_drift: max_drift,
        closure_error,
    })
}

pub fn evolve_wavepacket(
    grid: &Arc<ParamSurfaceGrid>,
    packet: &WavePacket,
    time: TimeGrid,
    hbar: f64,
    mass: f64,
) -> Result<EhrenfestTrace> {
    let psi = packet_state(grid, packet)?;
    evolve_state(grid, &psi, time, hbar, mass)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingStudy {
    pub hbars: Vec<f64>,
    pub centripetal: Vec<f64>,
    pub quantum: Vec<f64>,
    pub closure_errors: Vec<f64>,
    pub centripetal_slope: f64,
    pub quantum_slope: f64,
}

/// Circle packets at fixed classical momentum `ħm / a` while `ħ` varies.
pub fn hbar_scaling(
    grid: &Arc<ParamSurfaceGrid>,
    hbars: &[f64],
    classical_momentum: f64,
    width: f64,
    time: TimeGrid,
    mass: f64,
) -> Result<ScalingStudy> {
    let LabSurface::Circle { a } = grid.surface else {
        return Err(Error::UnsupportedSurface("the scaling study runs on the circle".into()));
    };
    let traces = hbars
        .par_iter()
        .map(|&hbar| {
            let m = (classical_momentum * a / hbar).round() as i64;
            let packet = WavePacket {
                center: vec![0.0],
                width,
                momentum: vec![m],
            };
            evolve_wavepacket(grid, &packet, time, hbar, mass)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut study = ScalingStudy {
        hbars: hbars.to_vec(),
        centripetal: Vec::new(),
        quantum: Vec::new(),
        closure_errors: Vec::new(),
        centripetal_slope: 0.0,
        quantum_slope: 0.0,
    };
    for t in &traces {
        let (c, q) = t.mean_term_magnitudes();
        study.centripetal.push(c);
        study.quantum.push(q);
        study.closure_errors.push(t.closure_error);
    }
    let slope = |ys: &[f64]| {
        let xs: Vec<f64> = hbars.iter().map(|h| h.ln()).collect();
        let ys: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
        let k = xs.len() as f64;
        let (mx, my) = (xs.iter().sum::<f64>() / k, ys.iter().sum::<f64>() / k);
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        sxy / sxx
    };
    study.centripetal_slope = slope(&study.centripetal);
    study.quantum_slope = slope(&study.quantum);
    Ok(study)
}
