use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::Bindings;
use crate::geometry::{normal_jet, ExtensionPolicy};
use crate::surface::{builtin_surface, CatalogSurface, SurfaceSpec};

/// Periodic surfaces the lab can discretize.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LabSurface {
    Circle { a: f64 },
    Torus { major: f64, minor: f64 },
}

impl LabSurface {
    pub fn from_spec(spec: &SurfaceSpec) -> Result<LabSurface> {
        match spec.catalog {
            Some(CatalogSurface::Circle { a }) => Ok(LabSurface::Circle { a }),
            Some(CatalogSurface::Torus { major, minor }) => Ok(LabSurface::Torus { major, minor }),
            _ => Err(Error::UnsupportedSurface(format!(
                "`{}` has no periodic parametrization (circle and torus only)",
                spec.name
            ))),
        }
    }

    pub fn spec(&self) -> Result<SurfaceSpec> {
        let mut b = Bindings::new();
        match *self {
            LabSurface::Circle { a } => {
                b.insert("a".into(), a);
                builtin_surface("circle", &b)
            }
            LabSurface::Torus { major, minor } => {
                b.insert("R".into(), major);
                b.insert("r".into(), minor);
                builtin_surface("torus", &b)
            }
        }
    }

    /// Number of angles.
    pub fn param_dim(&self) -> usize {
        match self {
            LabSurface::Circle { .. } => 1,
            LabSurface::Torus { .. } => 2,
        }
    }

    /// Ambient dimension.
    pub fn dim(&self) -> usize {
        self.param_dim() + 1
    }

    pub fn area(&self) -> f64 {
        match *self {
            LabSurface::Circle { a } => 2.0 * PI * a,
            LabSurface::Torus { major, minor } => 4.0 * PI * PI * major * minor,
        }
    }

    pub fn label(&self) -> String {
        match *self {
            LabSurface::Circle { a } => format!("circle(a={a})"),
            LabSurface::Torus { major, minor } => format!("torus(R={major}, r={minor})"),
        }
    }
}

/// Normal-field derivatives at every node, stored component-major.
#[derive(Debug, Clone)]
pub struct NodeGeometry {
    dim: usize,
    n: Vec<Vec<f64>>,
    d1: Vec<Vec<f64>>,
    d2: Vec<Vec<f64>>,
    d3: Vec<Vec<f64>>,
}

impl NodeGeometry {
    pub fn n(&self, i: usize) -> &[f64] {
        &self.n[i]
    }

    /// `n_{i,l}`
    pub fn dn(&self, i: usize, l: usize) -> &[f64] {
        &self.d1[i * self.dim + l]
    }

    /// `n_{i,l,j}`
    pub fn d2n(&self, i: usize, l: usize, j: usize) -> &[f64] {
        &self.d2[(i * self.dim + l) * self.dim + j]
    }

    /// `n_{i,l,j,k}`
    pub fn d3n(&self, i: usize, l: usize, j: usize, k: usize) -> &[f64] {
        &self.d3[((i * self.dim + l) * self.dim + j) * self.dim + k]
    }

    fn nodes(&self) -> usize {
        self.n[0].len()
    }

    fn sum_over<F: Fn(usize) -> f64>(&self, f: F) -> Vec<f64> {
        (0..self.nodes()).map(f).collect()
    }

    /// `M = -n_{i,i}`
    pub fn mean_curvature(&self) -> Vec<f64> {
        let d = self.dim;
        self.sum_over(|p| -(0..d).map(|i| self.dn(i, i)[p]).sum::<f64>())
    }

    /// `(n_{i,j})²`
    pub fn s2(&self) -> Vec<f64> {
        self.sum_over(|p| self.d1.iter().map(|c| c[p] * c[p]).sum())
    }

    /// `∇²M = -n_{i,i,j,j}`
    pub fn lap_m(&self) -> Vec<f64> {
        let d = self.dim;
        self.sum_over(|p| {
            -(0..d)
                .flat_map(|i| (0..d).map(move |j| (i, j)))
                .map(|(i, j)| self.d3n(i, i, j, j)[p])
                .sum::<f64>()
        })
    }
}

/// Uniform periodic grid over the angles of a circle or torus.
///
/// Nodes are stored with the last angle fastest: torus index `iθ·nφ + iφ`.
pub struct ParamSurfaceGrid {
    pub surface: LabSurface,
    /// `[n]` for the circle, `[nθ, nφ]` for the torus.
    pub sizes: Vec<usize>,
    pub angles: Vec<Vec<f64>>,
    pub points: Vec<Vec<f64>>,
    pub sqrt_g: Vec<f64>,
    /// Quadrature weights `√g Δu`.
    pub weights: Vec<f64>,
    /// Diagonal inverse metric `g^{aa}`, indexed `[a][node]`.
    pub inv_metric: Vec<Vec<f64>>,
    /// `g^{aa} ∂x_i/∂u^a`, indexed `[a][i][node]`.
    pub dual: Vec<Vec<Vec<f64>>>,
    pub geometry: NodeGeometry,
    ffts: Vec<(Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>)>,
}

impl fmt::Debug for ParamSurfaceGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ParamSurfaceGrid")
            .field("surface", &self.surface)
            .field("sizes", &self.sizes)
            .finish_non_exhaustive()
    }
}

/// Builds the grid and pulls signed-distance normal jets of order 3 at every node.
pub fn build_grid(surface: LabSurface, sizes: &[usize]) -> Result<Arc<ParamSurfaceGrid>> {
    if sizes.len() != surface.param_dim() {
        return Err(Error::InvalidInput(format!(
            "{} needs {} grid sizes, got {}",
            surface.label(),
            surface.param_dim(),
            sizes.len()
        )));
    }
    if let Some(bad) = sizes.iter().find(|&&n| n < 16 || !n.is_power_of_two()) {
        return Err(Error::InvalidInput(format!("grid size {bad} is not a power of two >= 16")));
    }
    let spec = surface.spec()?;
    let total: usize = sizes.iter().product();
    let steps: Vec<f64> = sizes.iter().map(|&n| 2.0 * PI / n as f64).collect();
    let cell: f64 = steps.iter().product();
    let mut angles = Vec::with_capacity(total);
    let mut points = Vec::with_capacity(total);
    let mut sqrt_g = Vec::with_capacity(total);
    let pd = surface.param_dim();
    let dim = surface.dim();
    let mut inv_metric = vec![Vec::with_capacity(total); pd];
    let mut dual = vec![vec![Vec::with_capacity(total); dim]; pd];
    for idx in 0..total {
        let u: Vec<f64> = match pd {
            1 => vec![idx as f64 * steps[0]],
            _ => vec![(idx / sizes[1]) as f64 * steps[0], (idx % sizes[1]) as f64 * steps[1]],
        };
        let (x, tangents, rg) = match surface {
            LabSurface::Circle { a } => {
                let (s, c) = u[0].sin_cos();
                (vec![a * c, a * s], vec![vec![-a * s, a * c]], a)
            }
            LabSurface::Torus { major, minor } => {
                let (st, ct) = u[0].sin_cos();
                let (sp, cp) = u[1].sin_cos();
                let rho = major + minor * ct;
                (
                    vec![rho * cp, rho * sp, minor * st],
                    vec![vec![-minor * st * cp, -minor * st * sp, minor * ct], vec![-rho * sp, rho * cp, 0.0]],
                    minor * rho,
                )
            }
        };
        for (a, t) in tangents.iter().enumerate() {
            let g: f64 = t.iter().map(|v| v * v).sum();
            inv_metric[a].push(1.0 / g);
            for i in 0..dim {
                dual[a][i].push(t[i] / g);
            }
        }
        angles.push(u);
        points.push(x);
        sqrt_g.push(rg);
    }
    let weights = sqrt_g.iter().map(|g| g * cell).collect();
    let geometry = node_geometry(&spec, &points)?;
    let mut planner = FftPlanner::new();
    let ffts = sizes
        .iter()
        .map(|&n| (planner.plan_fft_forward(n), planner.plan_fft_inverse(n)))
        .collect();
    Ok(Arc::new(ParamSurfaceGrid {
        surface,
        sizes: sizes.to_vec(),
        angles,
        points,
        sqrt_g,
        weights,
        inv_metric,
        dual,
        geometry,
        ffts,
    }))
}

fn node_geometry(spec: &SurfaceSpec, points: &[Vec<f64>]) -> Result<NodeGeometry> {
    let dim = spec.dim;
    let jets = points
        .par_iter()
        .map(|x| normal_jet(spec, x, ExtensionPolicy::SignedDistance, 3))
        .collect::<Result<Vec<_>>>()?;
    let table = |axes_of: &dyn Fn(usize) -> (usize, Vec<usize>), count: usize| -> Vec<Vec<f64>> {
        (0..count)
            .map(|c| {
                let (i, axes) = axes_of(c);
                jets.iter().map(|j| j.partial(i, &axes)).collect()
            })
            .collect()
    };
    let n = table(&|c| (c, vec![]), dim);
    let d1 = table(&|c| (c / dim, vec![c % dim]), dim * dim);
    let d2 = table(&|c| (c / (dim * dim), vec![(c / dim) % dim, c % dim]), dim.pow(3));
    let d3 = table(
        &|c| (c / dim.pow(3), vec![(c / (dim * dim)) % dim, (c / dim) % dim, c % dim]),
        dim.pow(4),
    );
    Ok(NodeGeometry { dim, n, d1, d2, d3 })
}

fn frequency(k: usize, n: usize) -> f64 {
    if k < n / 2 {
        k as f64
    } else if k == n / 2 {
        0.0
    } else {
        k as f64 - n as f64
    }
}

impl ParamSurfaceGrid {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.surface.dim()
    }

    pub fn label(&self) -> String {
        self.sizes.iter().map(|n| n.to_string()).collect::<Vec<_>>().join("x")
    }

    fn line_layout(&self, axis: usize) -> (usize, usize, Vec<usize>) {
        let last = *self.sizes.last().unwrap();
        if self.sizes.len() == 1 {
            return (self.sizes[0], 1, vec![0]);
        }
        match axis {
            0 => (self.sizes[0], last, (0..last).collect()),
            _ => (last, 1, (0..self.sizes[0]).map(|i| i * last).collect()),
        }
    }

    /// Transforms every line along `axis`, applies `f(bin, values)` in frequency space, and returns.
    fn spectral_pass(&self, axis: usize, psi: &[Complex64], f: impl Fn(usize, &mut Complex64)) -> Vec<Complex64> {
        let (len, stride, starts) = self.line_layout(axis);
        let (fwd, inv) = &self.ffts[axis];
        let mut out = vec![Complex64::new(0.0, 0.0); psi.len()];
        let mut buf = vec![Complex64::new(0.0, 0.0); len];
        let scale = 1.0 / len as f64;
        for s in starts {
            for (k, b) in buf.iter_mut().enumerate() {
                *b = psi[s + k * stride];
            }
            fwd.process(&mut buf);
            for (k, b) in buf.iter_mut().enumerate() {
                f(k, b);
            }
            inv.process(&mut buf);
            for (k, b) in buf.iter().enumerate() {
                out[s + k * stride] = b * scale;
            }
        }
        out
    }

    /// Spectral `∂/∂u^axis` with the Nyquist mode removed.
    pub fn derivative(&self, axis: usize, psi: &[Complex64]) -> Vec<Complex64> {
        let n = self.sizes[axis];
        self.spectral_pass(axis, psi, |k, b| *b *= Complex64::new(0.0, frequency(k, n)))
    }

    /// Surface gradient of a real nodal field, as `[i][node]`.
    pub fn gradient_of_values(&self, values: &[f64]) -> Vec<Vec<f64>> {
        let c: Vec<Complex64> = values.iter().map(|v| Complex64::new(*v, 0.0)).collect();
        let parts: Vec<Vec<Complex64>> = (0..self.sizes.len()).map(|a| self.derivative(a, &c)).collect();
        (0..self.dim())
            .map(|i| {
                (0..self.len())
                    .map(|p| (0..parts.len()).map(|a| self.dual[a][i][p] * parts[a][p].re).sum())
                    .collect()
            })
            .collect()
    }

    /// `Σ w conj(a) b`
    pub fn inner(&self, a: &[Complex64], b: &[Complex64]) -> Complex64 {
        a.iter().zip(b).zip(&self.weights).map(|((x, y), w)| x.conj() * y * w).sum()
    }

    pub fn norm(&self, a: &[Complex64]) -> f64 {
        a.iter().zip(&self.weights).map(|(x, w)| x.norm_sqr() * w).sum::<f64>().sqrt()
    }

    /// Grid function with the given Fourier coefficients, keyed by signed mode numbers.
    pub fn from_modes(&self, modes: &[(Vec<i64>, Complex64)]) -> Vec<Complex64> {
        let mut spec = vec![Complex64::new(0.0, 0.0); self.len()];
        let last = *self.sizes.last().unwrap();
        for (m, c) in modes {
            let idx: Vec<usize> = m
                .iter()
                .zip(&self.sizes)
                .map(|(&k, &n)| k.rem_euclid(n as i64) as usize)
                .collect();
            let flat = if idx.len() == 1 { idx[0] } else { idx[0] * last + idx[1] };
            spec[flat] += c;
        }
        let mut out = spec;
        // unnormalized inverse transforms sum the modes directly
        for axis in 0..self.sizes.len() {
            let (len, stride, starts) = self.line_layout(axis);
            let (_, inv) = &self.ffts[axis];
            let mut buf = vec![Complex64::new(0.0, 0.0); len];
            for s in starts {
                for (k, b) in buf.iter_mut().enumerate() {
                    *b = out[s + k * stride];
                }
                inv.process(&mut buf);
                for (k, b) in buf.iter().enumerate() {
                    out[s + k * stride] = *b;
                }
            }
        }
        out
    }
}

/// Random band-limited states for operator comparisons.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TestConfig {
    pub count: usize,
    pub seed: u64,
    /// Fraction of the resolvable modes that carry coefficients.
    pub band_fraction: f64,
}

impl Default for TestConfig {
    fn default() -> TestConfig {
        TestConfig {
            count: 6,
            seed: 7,
            band_fraction: 1.0 / 3.0,
        }
    }
}

fn mode_seed(seed: u64, state: usize, m: &[i64]) -> u64 {
    let mut h = seed ^ 0x9e37_79b9_7f4a_7c15;
    for v in std::iter::once(state as i64).chain(m.iter().copied()) {
        h = (h ^ v as u64).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        h ^= h >> 31;
    }
    h
}

/// Unit-norm test states.
///
/// Each Fourier coefficient is drawn from its own seeded stream, so a mode has
/// the same coefficient on every grid and refinements compare like with like.
/// Amplitudes fall off as `(1+|m|)^-2` per angle.
pub fn test_states(grid: &ParamSurfaceGrid, cfg: &TestConfig) -> Vec<Vec<Complex64>> {
    let bands: Vec<i64> = grid
        .sizes
        .iter()
        .map(|&n| ((cfg.band_fraction * n as f64 / 2.0).floor() as i64).max(1))
        .collect();
    let mode_list: Vec<Vec<i64>> = match bands.len() {
        1 => (-bands[0]..=bands[0]).map(|m| vec![m]).collect(),
        _ => (-bands[0]..=bands[0])
            .flat_map(|a| (-bands[1]..=bands[1]).map(move |b| vec![a, b]))
            .collect(),
    };
    (0..cfg.count)
        .map(|s| {
            let modes: Vec<(Vec<i64>, Complex64)> = mode_list
                .iter()
                .map(|m| {
                    let mut rng = ChaCha8Rng::seed_from_u64(mode_seed(cfg.seed, s, m));
                    let env: f64 = m.iter().map(|k| (1.0 + k.abs() as f64).powi(-2)).product();
                    let c = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                    (m.clone(), c * env)
                })
                .collect();
            let psi = grid.from_modes(&modes);
            let nrm = grid.norm(&psi);
            psi.into_iter().map(|v| v / nrm).collect()
        })
        .collect()
}
