use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use super::grid::ParamSurfaceGrid;
use crate::error::{Error, Result};

/// Largest grid dimension that may be materialized as a dense matrix.
pub const DENSE_LIMIT: usize = 4096;

type Action = dyn Fn(&[Complex64]) -> Vec<Complex64> + Send + Sync;

/// Matrix-free linear map on complex grid functions.
#[derive(Clone)]
pub struct LinearOperator {
    dim: usize,
    action: Arc<Action>,
}

impl fmt::Debug for LinearOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LinearOperator(dim = {})", self.dim)
    }
}

impl LinearOperator {
    pub fn new(dim: usize, action: impl Fn(&[Complex64]) -> Vec<Complex64> + Send + Sync + 'static) -> LinearOperator {
        LinearOperator {
            dim,
            action: Arc::new(action),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn apply(&self, psi: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(psi.len(), self.dim, "operator applied to a function of the wrong length");
        (self.action)(psi)
    }

    pub fn identity(dim: usize) -> LinearOperator {
        LinearOperator::new(dim, |psi| psi.to_vec())
    }

    pub fn zero(dim: usize) -> LinearOperator {
        LinearOperator::new(dim, |psi| vec![Complex64::new(0.0, 0.0); psi.len()])
    }

    /// Pointwise multiplication.
    pub fn multiply(values: Vec<Complex64>) -> LinearOperator {
        LinearOperator::new(values.len(), move |psi| psi.iter().zip(&values).map(|(a, b)| a * b).collect())
    }

    pub fn multiply_real(values: Vec<f64>) -> LinearOperator {
        LinearOperator::new(values.len(), move |psi| psi.iter().zip(&values).map(|(a, b)| a * b).collect())
    }

    /// `self ∘ inner`
    pub fn compose(&self, inner: &LinearOperator) -> LinearOperator {
        let (a, b) = (self.clone(), inner.clone());
        LinearOperator::new(self.dim, move |psi| a.apply(&b.apply(psi)))
    }

    pub fn scale(&self, c: Complex64) -> LinearOperator {
        let a = self.clone();
        LinearOperator::new(self.dim, move |psi| a.apply(psi).into_iter().map(|v| v * c).collect())
    }

    pub fn sum(dim: usize, terms: &[LinearOperator]) -> LinearOperator {
        let terms = terms.to_vec();
        LinearOperator::new(dim, move |psi| {
            let mut out = vec![Complex64::new(0.0, 0.0); psi.len()];
            for t in &terms {
                for (o, v) in out.iter_mut().zip(t.apply(psi)) {
                    *o += v;
                }
            }
            out
        })
    }

    pub fn dense_materializable(&self) -> bool {
        self.dim <= DENSE_LIMIT
    }

    /// Column `k` is the image of the `k`-th unit vector.
    pub fn to_dense(&self) -> Result<DMatrix<Complex64>> {
        if !self.dense_materializable() {
            return Err(Error::InvalidInput(format!(
                "dimension {} is above the dense limit {DENSE_LIMIT}",
                self.dim
            )));
        }
        let mut m = DMatrix::zeros(self.dim, self.dim);
        let mut e = vec![Complex64::new(0.0, 0.0); self.dim];
        for k in 0..self.dim {
            e[k] = Complex64::new(1.0, 0.0);
            for (i, v) in self.apply(&e).into_iter().enumerate() {
                m[(i, k)] = v;
            }
            e[k] = Complex64::new(0.0, 0.0);
        }
        Ok(m)
    }
}

impl Add for &LinearOperator {
    type Output = LinearOperator;
    fn add(self, rhs: &LinearOperator) -> LinearOperator {
        LinearOperator::sum(self.dim, &[self.clone(), rhs.clone()])
    }
}

impl Sub for &LinearOperator {
    type Output = LinearOperator;
    fn sub(self, rhs: &LinearOperator) -> LinearOperator {
        LinearOperator::sum(self.dim, &[self.clone(), -rhs])
    }
}

impl Neg for &LinearOperator {
    type Output = LinearOperator;
    fn neg(self) -> LinearOperator {
        self.scale(Complex64::new(-1.0, 0.0))
    }
}

/// Composition.
impl Mul for &LinearOperator {
    type Output = LinearOperator;
    fn mul(self, rhs: &LinearOperator) -> LinearOperator {
        self.compose(rhs)
    }
}

impl Mul<Complex64> for &LinearOperator {
    type Output = LinearOperator;
    fn mul(self, c: Complex64) -> LinearOperator {
        self.scale(c)
    }
}

/// `ψ ↦ A(Bψ) − B(Aψ)`
pub fn commutator(a: &LinearOperator, b: &LinearOperator) -> LinearOperator {
    &(a * b) - &(b * a)
}

/// Spectral `∂/∂u^axis` on the grid.
pub fn angular_derivative(grid: &Arc<ParamSurfaceGrid>, axis: usize) -> LinearOperator {
    let g = grid.clone();
    LinearOperator::new(grid.len(), move |psi| g.derivative(axis, psi))
}

/// Cartesian components `(∇_S)_i = Σ_a g^{aa} (∂x_i/∂u^a) ∂_a`.
pub fn build_surface_gradient(grid: &Arc<ParamSurfaceGrid>) -> Vec<LinearOperator> {
    (0..grid.dim())
        .map(|i| {
            let g = grid.clone();
            LinearOperator::new(grid.len(), move |psi| {
                let mut out = vec![Complex64::new(0.0, 0.0); psi.len()];
                for a in 0..g.sizes.len() {
                    let d = g.derivative(a, psi);
                    for (p, o) in out.iter_mut().enumerate() {
                        *o += d[p] * g.dual[a][i][p];
                    }
                }
                out
            })
        })
        .collect()
}

/// Geometric momentum `p_j = −iħ((∇_S)_j + M n_j / 2)`.
pub fn build_momentum(grid: &Arc<ParamSurfaceGrid>, hbar: f64) -> Vec<LinearOperator> {
    let m = grid.geometry.mean_curvature();
    build_surface_gradient(grid)
        .into_iter()
        .enumerate()
        .map(|(j, grad)| {
            let half: Vec<f64> = m.iter().zip(grid.geometry.n(j)).map(|(a, b)| 0.5 * a * b).collect();
            let sum = &grad + &LinearOperator::multiply_real(half);
            sum.scale(Complex64::new(0.0, -hbar))
        })
        .collect()
}

/// `(1/√g) ∂_a(√g g^{aa} ∂_a)`
pub fn build_laplace_beltrami(grid: &Arc<ParamSurfaceGrid>) -> LinearOperator {
    let g = grid.clone();
    LinearOperator::new(grid.len(), move |psi| {
        let mut out = vec![Complex64::new(0.0, 0.0); psi.len()];
        for a in 0..g.sizes.len() {
            let flux: Vec<Complex64> = g
                .derivative(a, psi)
                .into_iter()
                .enumerate()
                .map(|(p, v)| v * g.sqrt_g[p] * g.inv_metric[a][p])
                .collect();
            for (p, v) in g.derivative(a, &flux).into_iter().enumerate() {
                out[p] += v / g.sqrt_g[p];
            }
        }
        out
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum HamiltonianForm {
    /// `−(ħ²/2μ)∇²_LB + V_G`
    #[serde(rename = "lb")]
    LaplaceBeltrami,
    /// `p²/2μ − (ħ²/4μ)(n_{i,j})²`
    Momentum,
}

impl HamiltonianForm {
    pub fn parse(s: &str) -> Result<HamiltonianForm> {
        match s {
            "lb" | "LB" => Ok(HamiltonianForm::LaplaceBeltrami),
            "momentum" => Ok(HamiltonianForm::Momentum),
            other => Err(Error::InvalidInput(format!("unknown Hamiltonian form `{other}`"))),
        }
    }
}

/// Geometric potential `(ħ²/4μ)(M²/2 − (n_{i,j})²)` at the nodes.
pub fn geometric_potential(grid: &ParamSurfaceGrid, hbar: f64, mass: f64) -> Vec<f64> {
    let c = hbar * hbar / (4.0 * mass);
    let m = grid.geometry.mean_curvature();
    grid.geometry
        .s2()
        .iter()
        .zip(&m)
        .map(|(s, m)| c * (0.5 * m * m - s))
        .collect()
}

pub fn build_hamiltonian(grid: &Arc<ParamSurfaceGrid>, hbar: f64, mass: f64, form: HamiltonianForm) -> LinearOperator {
    match form {
        HamiltonianForm::LaplaceBeltrami => {
            let kinetic = build_laplace_beltrami(grid).scale(Complex64::new(-hbar * hbar / (2.0 * mass), 0.0));
            &kinetic + &LinearOperator::multiply_real(geometric_potential(grid, hbar, mass))
        }
        HamiltonianForm::Momentum => {
            let p = build_momentum(grid, hbar);
            let squares: Vec<LinearOperator> = p.iter().map(|pj| pj * pj).collect();
            let kinetic = LinearOperator::sum(grid.len(), &squares).scale(Complex64::new(1.0 / (2.0 * mass), 0.0));
            let c = hbar * hbar / (4.0 * mass);
            let s2: Vec<f64> = grid.geometry.s2().iter().map(|s| -c * s).collect();
            &kinetic + &LinearOperator::multiply_real(s2)
        }
    }
}
