use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::surface::SurfaceSpec;

const MAX_ITER: usize = 100;

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Closest point on `f = 0` to `point`.
///
/// Newton steps along `∇f` bring the iterate onto the surface, then Newton on
/// the Lagrange system `y - p - λ∇f(y) = 0, f(y) = 0` removes the tangential
/// offset. The result satisfies `|f(y)| < tol` and `y - p ∥ ∇f(y)`.
pub fn project_to_surface(spec: &SurfaceSpec, point: &[f64], tol: f64) -> Result<Vec<f64>> {
    let n = spec.dim;
    if point.len() != n {
        return Err(Error::InvalidInput(format!("point has {} coordinates, surface has {n}", point.len())));
    }
    let mut y = point.to_vec();
    let mut iterations = 0;
    let mut residual = f64::INFINITY;

    // onto the surface
    while iterations < MAX_ITER {
        iterations += 1;
        let (f, g) = spec.gradient(&y)?;
        residual = f.abs();
        let g2: f64 = g.iter().map(|v| v * v).sum();
        if g2 == 0.0 {
            return Err(Error::NoConvergence { iterations, residual });
        }
        if residual < 1e-3 * spec.feature_scale {
            break;
        }
        for i in 0..n {
            y[i] -= f * g[i] / g2;
        }
    }

    // closest-point polish
    let (_, g) = spec.gradient(&y)?;
    let g2: f64 = g.iter().map(|v| v * v).sum();
    let mut lambda: f64 = (0..n).map(|i| (y[i] - point[i]) * g[i]).sum::<f64>() / g2;
    let scale = spec.feature_scale.max(norm(point)).max(1.0);
    while iterations < MAX_ITER {
        iterations += 1;
        let (f, g, h) = spec.second_order(&y)?;
        let r1: Vec<f64> = (0..n).map(|i| y[i] - point[i] - lambda * g[i]).collect();
        residual = f.abs().max(norm(&r1));
        let mut jac = DMatrix::<f64>::zeros(n + 1, n + 1);
        let mut rhs = DVector::<f64>::zeros(n + 1);
        for i in 0..n {
            for j in 0..n {
                jac[(i, j)] = if i == j { 1.0 } else { 0.0 } - lambda * h[i][j];
            }
            jac[(i, n)] = -g[i];
            jac[(n, i)] = g[i];
            rhs[i] = -r1[i];
        }
        rhs[n] = -f;
        let step = jac
            .lu()
            .solve(&rhs)
            .ok_or(Error::NoConvergence { iterations, residual })?;
        for i in 0..n {
            y[i] += step[i];
        }
        lambda += step[n];
        let dy = norm(&step.as_slice()[..n]);
        if dy <= 4.0 * f64::EPSILON * scale {
            let (f, g) = spec.gradient(&y)?;
            if f.abs() < tol && parallel_to_normal(&y, point, &g) {
                return Ok(y);
            }
        }
    }
    let (f, g) = spec.gradient(&y)?;
    if f.abs() < tol && parallel_to_normal(&y, point, &g) {
        return Ok(y);
    }
    Err(Error::NoConvergence { iterations, residual })
}

fn parallel_to_normal(y: &[f64], p: &[f64], g: &[f64]) -> bool {
    let d: Vec<f64> = y.iter().zip(p).map(|(a, b)| a - b).collect();
    let dn = norm(&d);
    if dn < 1e-12 {
        return true;
    }
    let gn = norm(g);
    let cos = (d.iter().zip(g).map(|(a, b)| a * b).sum::<f64>() / (dn * gn)).abs();
    // angle below 1e-6 rad
    cos >= (1e-6f64).cos() - 1e-15
}
