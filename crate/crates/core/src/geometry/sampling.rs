use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::surface::SurfaceSpec;

use super::{curvature_sample, project_to_surface, CurvatureSample, ExtensionPolicy, ON_SURFACE_TOL};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sampling {
    /// `nu × nv` nodes of the catalog parametrization (`nv = 1` gives a single meridian).
    Parametric { nu: usize, nv: usize },
    /// Uniform points in the bounding box, projected onto the surface.
    Random { count: usize, seed: u64 },
}

const MAX_ATTEMPTS_PER_SAMPLE: usize = 50;

fn sample_points(spec: &SurfaceSpec, sampling: Sampling) -> Result<Vec<Vec<f64>>> {
    match sampling {
        Sampling::Parametric { nu, nv } => {
            if spec.catalog.is_none() {
                return Err(Error::InvalidInput("parametric sampling needs a catalog surface".into()));
            }
            let nv = nv.max(1);
            let mut pts = Vec::with_capacity(nu * nv);
            for i in 0..nu {
                for j in 0..nv {
                    let p = spec
                        .parametric_point(i as f64 / nu as f64, j as f64 / nv as f64)
                        .expect("catalog surface");
                    pts.push(p);
                }
            }
            Ok(pts)
        }
        Sampling::Random { count, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut pts = Vec::with_capacity(count);
            let mut attempts = 0;
            while pts.len() < count {
                attempts += 1;
                if attempts > MAX_ATTEMPTS_PER_SAMPLE * count.max(1) {
                    return Err(Error::NoConvergence {
                        iterations: attempts,
                        residual: f64::NAN,
                    });
                }
                let x: Vec<f64> = spec.bounds.iter().map(|&(lo, hi)| rng.random_range(lo..hi)).collect();
                if let Ok(y) = project_to_surface(spec, &x, 1e-12) {
                    if y.iter().zip(&spec.bounds).all(|(v, (lo, hi))| *v >= *lo && *v <= *hi) {
                        pts.push(y);
                    }
                }
            }
            Ok(pts)
        }
    }
}

/// Curvature records over a deterministic set of surface points.
pub fn sample_field(spec: &SurfaceSpec, policy: ExtensionPolicy, sampling: Sampling) -> Result<Vec<CurvatureSample>> {
    let points = sample_points(spec, sampling)?;
    for p in &points {
        let f = spec.eval(p)?;
        debug_assert!(f.abs() < ON_SURFACE_TOL);
    }
    points.par_iter().map(|p| curvature_sample(spec, p, policy)).collect()
}

/// Flat CSV with a header row; vectors are expanded as `x1, x2, ...`.
pub fn samples_to_csv(samples: &[CurvatureSample]) -> String {
    let Some(first) = samples.first() else {
        return "x1,n1,M,S2,lapM,lapLB_M,vg_geom,chi_geom\n".to_string();
    };
    let dim = first.x.len();
    let nk = first.kappa.len();
    let mut cols: Vec<String> = Vec::new();
    cols.extend((1..=dim).map(|i| format!("x{i}")));
    cols.extend((1..=dim).map(|i| format!("n{i}")));
    cols.push("M".into());
    cols.push("S2".into());
    cols.extend((1..=nk).map(|i| format!("kappa{i}")));
    for c in ["lapM", "lapLB_M", "vg_geom", "chi_geom"] {
        cols.push(c.into());
    }
    let mut out = cols.join(",");
    out.push('\n');
    for s in samples {
        let mut row: Vec<String> = Vec::new();
        row.extend(s.x.iter().map(|v| format!("{v:.16e}")));
        row.extend(s.n.iter().map(|v| format!("{v:.16e}")));
        row.push(format!("{:.16e}", s.mean_curvature));
        row.push(format!("{:.16e}", s.s2));
        row.extend(s.kappa.iter().map(|v| format!("{v:.16e}")));
        for v in [s.lap_m, s.lap_lb_m, s.vg_geom, s.chi_geom] {
            row.push(format!("{v:.16e}"));
        }
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}
