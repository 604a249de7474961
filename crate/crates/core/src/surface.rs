//! Surface descriptions: parsed expressions and the built-in catalog.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{parse_expression, Bindings, Expression};
use crate::jet::{evaluate_taylor, Taylor};

/// Catalog entries carry their parameters so callers can use exact parametrizations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CatalogSurface {
    Circle { a: f64 },
    Sphere { a: f64 },
    Cylinder { a: f64 },
    Spheroid { a: f64, b: f64 },
    #[serde(rename = "torus")]
    Torus { major: f64, minor: f64 },
    Plane,
}

#[derive(Debug, Clone)]
pub struct SurfaceSpec {
    pub name: String,
    pub expr: Expression,
    pub dim: usize,
    pub params: Bindings,
    /// `|∇f| = 1` holds identically near the surface.
    pub is_signed_distance: bool,
    pub catalog: Option<CatalogSurface>,
    /// Characteristic length (smallest radius of curvature scale).
    pub feature_scale: f64,
    /// Region used for random sampling and multistart.
    pub bounds: Vec<(f64, f64)>,
}

impl SurfaceSpec {
    /// A user-supplied expression surface. Parameters must be bound.
    pub fn from_expression(
        name: &str,
        text: &str,
        dim: usize,
        params: Bindings,
        is_signed_distance: bool,
        bounds: Vec<(f64, f64)>,
    ) -> Result<SurfaceSpec> {
        if !(2..=4).contains(&dim) {
            return Err(Error::InvalidInput(format!("surface dimension {dim} outside 2..=4")));
        }
        if bounds.len() != dim {
            return Err(Error::InvalidInput("bounding box must have one interval per axis".into()));
        }
        let expr = parse_expression(text)?;
        expr.check_bindings(dim, &params)?;
        Ok(SurfaceSpec {
            name: name.to_string(),
            expr,
            dim,
            params,
            is_signed_distance,
            catalog: None,
            feature_scale: 1.0,
            bounds,
        })
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        self.expr.eval(x, &self.params)
    }

    pub fn taylor(&self, x: &[f64], degree: usize) -> Result<Taylor> {
        evaluate_taylor(&self.expr, x, degree, &self.params)
    }

    /// Value, gradient and Hessian of `f` at `x`.
    pub fn second_order(&self, x: &[f64]) -> Result<(f64, Vec<f64>, Vec<Vec<f64>>)> {
        let jet = self.taylor(x, 2)?.to_jet();
        let n = self.dim;
        let grad = (0..n).map(|i| jet.d(&[i])).collect();
        let hess = (0..n).map(|i| (0..n).map(|j| jet.d(&[i, j])).collect()).collect();
        Ok((jet.value(), grad, hess))
    }

    pub fn gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let jet = self.taylor(x, 1)?.to_jet();
        Ok((jet.value(), (0..self.dim).map(|i| jet.d(&[i])).collect()))
    }

    /// Catalog surfaces that are invariant under rotation about the z axis.
    pub fn is_axisymmetric(&self) -> bool {
        matches!(
            self.catalog,
            Some(CatalogSurface::Sphere { .. })
                | Some(CatalogSurface::Cylinder { .. })
                | Some(CatalogSurface::Spheroid { .. })
                | Some(CatalogSurface::Torus { .. })
        )
    }

    /// Exact surface point for catalog parameters `(u, v)` in `[0, 1)²`.
    ///
    /// Circle uses `u` only; sphere/spheroid map `u` to the polar angle and
    /// `v` to the azimuth; torus maps `u` to the tube angle (0 on the outer
    /// equator) and `v` to the azimuth.
    pub fn parametric_point(&self, u: f64, v: f64) -> Option<Vec<f64>> {
        let (tu, tv) = (2.0 * PI * u, 2.0 * PI * v);
        Some(match self.catalog? {
            CatalogSurface::Circle { a } => vec![a * tu.cos(), a * tu.sin()],
            CatalogSurface::Sphere { a } => {
                let polar = PI * u;
                vec![a * polar.sin() * tv.cos(), a * polar.sin() * tv.sin(), a * polar.cos()]
            }
            CatalogSurface::Spheroid { a, b } => {
                let polar = PI * u;
                vec![a * polar.sin() * tv.cos(), a * polar.sin() * tv.sin(), b * polar.cos()]
            }
            CatalogSurface::Cylinder { a } => vec![a * tv.cos(), a * tv.sin(), 2.0 * a * (2.0 * u - 1.0)],
            CatalogSurface::Torus { major, minor } => {
                let rho = major + minor * tu.cos();
                vec![rho * tv.cos(), rho * tv.sin(), minor * tu.sin()]
            }
            CatalogSurface::Plane => vec![4.0 * u - 2.0, 4.0 * v - 2.0, 0.0],
        })
    }
}

fn param(params: &Bindings, key: &str) -> Result<f64> {
    let v = *params
        .get(key)
        .ok_or_else(|| Error::InvalidParameters(format!("missing parameter `{key}`")))?;
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::InvalidParameters(format!("parameter `{key}` must be positive, got {v}")));
    }
    Ok(v)
}

fn cube(half: f64, dim: usize) -> Vec<(f64, f64)> {
    vec![(-half, half); dim]
}

/// Built-in catalog surface.
///
/// Names and parameters: `circle(a)` (N = 2), `sphere(a)`, `cylinder(a)`,
/// `spheroid(a, b)` (the quadric `(x²+y²)/a² + z²/b² = 1`), `torus(R, r)` with
/// `r < R`, and `plane` (`z = 0`). Everything except the spheroid is emitted as
/// an exact signed-distance expression.
pub fn builtin_surface(name: &str, params: &Bindings) -> Result<SurfaceSpec> {
    let mut bound = Bindings::new();
    let (text, dim, sdf, catalog, scale, bounds) = match name {
        "circle" => {
            let a = param(params, "a")?;
            bound.insert("a".into(), a);
            ("sqrt(x^2 + y^2) - a", 2, true, CatalogSurface::Circle { a }, a, cube(1.5 * a, 2))
        }
        "sphere" => {
            let a = param(params, "a")?;
            bound.insert("a".into(), a);
            ("sqrt(x^2 + y^2 + z^2) - a", 3, true, CatalogSurface::Sphere { a }, a, cube(1.5 * a, 3))
        }
        "cylinder" => {
            let a = param(params, "a")?;
            bound.insert("a".into(), a);
            (
                "sqrt(x^2 + y^2) - a",
                3,
                true,
                CatalogSurface::Cylinder { a },
                a,
                vec![(-1.5 * a, 1.5 * a), (-1.5 * a, 1.5 * a), (-2.0 * a, 2.0 * a)],
            )
        }
        "spheroid" => {
            let a = param(params, "a")?;
            let b = param(params, "b")?;
            bound.insert("a".into(), a);
            bound.insert("b".into(), b);
            let h = 1.5 * a.max(b);
            (
                "(x^2 + y^2)/a^2 + z^2/b^2 - 1",
                3,
                false,
                CatalogSurface::Spheroid { a, b },
                a.min(b),
                vec![(-h, h), (-h, h), (-h, h)],
            )
        }
        "torus" => {
            let major = param(params, "R")?;
            let minor = param(params, "r")?;
            if minor >= major {
                return Err(Error::InvalidParameters(format!(
                    "torus needs tube radius r < R, got r = {minor}, R = {major}"
                )));
            }
            bound.insert("R".into(), major);
            bound.insert("r".into(), minor);
            let h = 1.2 * (major + minor);
            (
                "sqrt((sqrt(x^2 + y^2) - R)^2 + z^2) - r",
                3,
                true,
                CatalogSurface::Torus { major, minor },
                minor,
                vec![(-h, h), (-h, h), (-1.5 * minor, 1.5 * minor)],
            )
        }
        "plane" => ("z", 3, true, CatalogSurface::Plane, 1.0, cube(2.0, 3)),
        other => return Err(Error::UnknownSurface(other.to_string())),
    };
    let expr = parse_expression(text)?;
    Ok(SurfaceSpec {
        name: name.to_string(),
        expr,
        dim,
        params: bound,
        is_signed_distance: sdf,
        catalog: Some(catalog),
        feature_scale: scale,
        bounds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(pairs: &[(&str, f64)]) -> Bindings {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn sphere_is_signed_distance() {
        let s = builtin_surface("sphere", &b(&[("a", 1.0)])).unwrap();
        assert!(s.is_signed_distance);
        assert!((s.eval(&[0.0, 2.0, 0.0]).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn torus_parameter_order() {
        assert!(matches!(
            builtin_surface("torus", &b(&[("R", 1.0), ("r", 2.0)])),
            Err(Error::InvalidParameters(_))
        ));
        assert!(matches!(
            builtin_surface("torus", &b(&[("R", 2.0), ("r", 2.0)])),
            Err(Error::InvalidParameters(_))
        ));
        let t = builtin_surface("torus", &b(&[("R", 2.0), ("r", 1.0)])).unwrap();
        assert!(t.eval(&[3.0, 0.0, 0.0]).unwrap().abs() < 1e-15);
    }

    #[test]
    fn unknown_and_invalid() {
        assert!(matches!(builtin_surface("klein", &Bindings::new()), Err(Error::UnknownSurface(_))));
        assert!(matches!(
            builtin_surface("sphere", &b(&[("a", -1.0)])),
            Err(Error::InvalidParameters(_))
        ));
        assert!(matches!(builtin_surface("spheroid", &b(&[("a", 1.0)])), Err(Error::InvalidParameters(_))));
    }

    #[test]
    fn parametric_points_lie_on_surface() {
        let cases = [
            builtin_surface("circle", &b(&[("a", 1.3)])).unwrap(),
            builtin_surface("sphere", &b(&[("a", 0.7)])).unwrap(),
            builtin_surface("spheroid", &b(&[("a", 1.0), ("b", 2.0)])).unwrap(),
            builtin_surface("torus", &b(&[("R", 2.0), ("r", 1.0)])).unwrap(),
            builtin_surface("cylinder", &b(&[("a", 1.0)])).unwrap(),
            builtin_surface("plane", &Bindings::new()).unwrap(),
        ];
        for s in &cases {
            for k in 0..7 {
                let p = s.parametric_point(0.13 * k as f64 + 0.05, 0.31 * k as f64).unwrap();
                assert!(s.eval(&p).unwrap().abs() < 1e-14, "{} {p:?}", s.name);
            }
        }
    }
}
