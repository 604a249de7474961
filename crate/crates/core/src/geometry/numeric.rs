//! Finite-difference jets of the signed-distance normal field for surfaces
//! whose expression is not itself a distance function.
//!
//! The gradient of the distance function at `x` is the unit normal at the
//! closest surface point, so derivatives of `n` are taken directly from that
//! field. Each derivative of order `k` (of `n`, i.e. order `k + 1` of the
//! distance) uses a tensor-product central stencil with step
//! `h = ε^(1/(k+4)) · scale` and one Richardson level (`h`, `h/2`).

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::jet::{total_degree, Basis, Jet, MultiIndex};
use crate::surface::SurfaceSpec;

use super::project::project_to_surface;

/// Second-order central stencils for derivative orders 0..=4.
fn stencil(order: usize) -> &'static [(i32, f64)] {
    match order {
        0 => &[(0, 1.0)],
        1 => &[(-1, -0.5), (1, 0.5)],
        2 => &[(-1, 1.0), (0, -2.0), (1, 1.0)],
        3 => &[(-2, -0.5), (-1, 1.0), (1, -1.0), (2, 0.5)],
        4 => &[(-2, 1.0), (-1, -4.0), (0, 6.0), (1, -4.0), (2, 1.0)],
        _ => panic!("no stencil for order {order}"),
    }
}

/// Threshold on the dimensionless Richardson disagreement.
pub const PRECISION_LOSS_THRESHOLD: f64 = 1e-3;

/// Unit normal of the closest surface point, oriented along `∇f`.
pub fn distance_normal(spec: &SurfaceSpec, x: &[f64]) -> Result<Vec<f64>> {
    let y = project_to_surface(spec, x, 1e-13)?;
    let (_, g) = spec.gradient(&y)?;
    let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok(g.iter().map(|v| v / norm).collect())
}

struct FieldCache<'a> {
    spec: &'a SurfaceSpec,
    center: &'a [f64],
    values: HashMap<(u64, Vec<i32>), Vec<f64>>,
}

impl FieldCache<'_> {
    fn at(&mut self, h: f64, offsets: &[i32]) -> Result<&Vec<f64>> {
        let key = (h.to_bits(), offsets.to_vec());
        if !self.values.contains_key(&key) {
            let x: Vec<f64> = self
                .center
                .iter()
                .zip(offsets)
                .map(|(c, &o)| c + h * f64::from(o))
                .collect();
            let n = distance_normal(self.spec, &x)?;
            self.values.insert(key.clone(), n);
        }
        Ok(&self.values[&key])
    }
}

fn stencil_apply(cache: &mut FieldCache<'_>, alpha: &MultiIndex, dim: usize, h: f64) -> Result<Vec<f64>> {
    let order = total_degree(alpha);
    let per_axis: Vec<&[(i32, f64)]> = (0..dim).map(|v| stencil(alpha[v] as usize)).collect();
    let mut acc = vec![0.0; dim];
    let mut idx = vec![0usize; dim];
    loop {
        let mut weight = 1.0;
        let mut offsets = vec![0i32; dim];
        for v in 0..dim {
            let (o, w) = per_axis[v][idx[v]];
            offsets[v] = o;
            weight *= w;
        }
        let n = cache.at(h, &offsets)?;
        for i in 0..dim {
            acc[i] += weight * n[i];
        }
        // odometer
        let mut v = 0;
        loop {
            if v == dim {
                let scale = h.powi(order as i32);
                return Ok(acc.iter().map(|a| a / scale).collect());
            }
            idx[v] += 1;
            if idx[v] < per_axis[v].len() {
                break;
            }
            idx[v] = 0;
            v += 1;
        }
    }
}

/// Numeric jets of each normal component up to `order`, plus the largest
/// dimensionless Richardson disagreement.
pub fn numeric_normal_jets(spec: &SurfaceSpec, point: &[f64], order: usize, scale: f64) -> Result<(Vec<Jet>, f64)> {
    let dim = spec.dim;
    let basis = Basis::get(dim, order);
    let mut cache = FieldCache {
        spec,
        center: point,
        values: HashMap::new(),
    };
    let mut tables = vec![vec![0.0; basis.len()]; dim];
    let mut worst: f64 = 0.0;
    for (slot, alpha) in basis.indices().iter().enumerate() {
        let k = total_degree(alpha);
        if k == 0 {
            let n = cache.at(0.0, &vec![0; dim])?.clone();
            for i in 0..dim {
                tables[i][slot] = n[i];
            }
            continue;
        }
        let h = f64::EPSILON.powf(1.0 / (k as f64 + 4.0)) * scale;
        let coarse = stencil_apply(&mut cache, alpha, dim, h)?;
        let fine = stencil_apply(&mut cache, alpha, dim, 0.5 * h)?;
        for i in 0..dim {
            tables[i][slot] = (4.0 * fine[i] - coarse[i]) / 3.0;
            let est = (fine[i] - coarse[i]).abs() / 3.0 * scale.powi(k as i32);
            worst = worst.max(est);
        }
    }
    if worst > PRECISION_LOSS_THRESHOLD {
        return Err(Error::PrecisionLoss { estimate: worst });
    }
    let jets = tables
        .into_iter()
        .map(|t| Jet::from_values(dim, order, t))
        .collect::<Result<Vec<_>>>()?;
    Ok((jets, worst))
}
