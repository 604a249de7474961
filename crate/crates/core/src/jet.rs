//! Truncated multivariate Taylor arithmetic.
//!
//! Two representations share one monomial basis:
//!
//! * [`Taylor`] holds normalized coefficients `c_α = ∂^α f / α!`, which is the
//!   form in which products are plain Cauchy convolutions. All arithmetic and
//!   elementary-function composition happen here.
//! * [`Jet`] holds raw partial derivatives `∂^α f`. This is the public,
//!   portable table.
//!
//! Multi-indices are ordered graded-lexicographically: by total degree first,
//! then by exponent tuple in descending lexicographic order, so in three
//! variables the degree-2 block reads `xx, xy, xz, yy, yz, zz`. Because the
//! order is graded, truncating to a lower degree is taking a prefix.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};
use crate::expr::{BinOp, Bindings, Expression, Func};

pub const MAX_DIM: usize = 4;
pub const MAX_DEGREE: usize = 7;
pub const DEFAULT_DEGREE: usize = 5;

pub type MultiIndex = [u8; MAX_DIM];

/// Monomial table for a given (dimension, degree) pair.
#[derive(Debug)]
pub struct Basis {
    dim: usize,
    degree: usize,
    indices: Vec<MultiIndex>,
    lookup: HashMap<MultiIndex, usize>,
    /// `(i, j, k)` with `indices[i] + indices[j] == indices[k]`, all within degree.
    products: Vec<(u32, u32, u32)>,
}

fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

pub fn total_degree(alpha: &MultiIndex) -> usize {
    alpha.iter().map(|&a| a as usize).sum()
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// `α!` as a float.
pub fn multi_factorial(alpha: &MultiIndex) -> f64 {
    alpha.iter().map(|&a| factorial(a as usize)).product()
}

impl Basis {
    /// Shared, cached basis.
    pub fn get(dim: usize, degree: usize) -> Arc<Basis> {
        static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<Basis>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().expect("basis cache poisoned");
        guard
            .entry((dim, degree))
            .or_insert_with(|| Arc::new(Basis::build(dim, degree)))
            .clone()
    }

    fn build(dim: usize, degree: usize) -> Basis {
        assert!((1..=MAX_DIM).contains(&dim), "dimension {dim} out of range");
        let mut indices = Vec::with_capacity(binomial(dim + degree, degree));
        for d in 0..=degree {
            let mut block = Vec::new();
            let mut alpha = [0u8; MAX_DIM];
            compositions(d, 0, dim, &mut alpha, &mut block);
            indices.extend(block);
        }
        let lookup: HashMap<MultiIndex, usize> =
            indices.iter().enumerate().map(|(i, a)| (*a, i)).collect();
        let mut products = Vec::new();
        for (i, a) in indices.iter().enumerate() {
            let da = total_degree(a);
            for (j, b) in indices.iter().enumerate() {
                if da + total_degree(b) > degree {
                    // graded order: every later b has at least this degree
                    if total_degree(b) > degree - da {
                        break;
                    }
                    continue;
                }
                let mut c = [0u8; MAX_DIM];
                for v in 0..MAX_DIM {
                    c[v] = a[v] + b[v];
                }
                products.push((i as u32, j as u32, lookup[&c] as u32));
            }
        }
        Basis {
            dim,
            degree,
            indices,
            lookup,
            products,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn index_of(&self, alpha: &MultiIndex) -> Option<usize> {
        self.lookup.get(alpha).copied()
    }

    /// Number of entries with total degree ≤ `d`.
    pub fn prefix_len(&self, d: usize) -> usize {
        binomial(self.dim + d, d)
    }
}

/// Exponent tuples of total degree `remaining` over variables `v..dim`, x-heavy first.
fn compositions(remaining: usize, v: usize, dim: usize, alpha: &mut MultiIndex, out: &mut Vec<MultiIndex>) {
    if v == dim - 1 {
        alpha[v] = remaining as u8;
        out.push(*alpha);
        alpha[v] = 0;
        return;
    }
    for k in (0..=remaining).rev() {
        alpha[v] = k as u8;
        compositions(remaining - k, v + 1, dim, alpha, out);
    }
    alpha[v] = 0;
}

/// Builds a multi-index from a slice of exponents.
pub fn multi_index(exponents: &[u8]) -> MultiIndex {
    let mut a = [0u8; MAX_DIM];
    a[..exponents.len()].copy_from_slice(exponents);
    a
}

/// Multi-index with one derivative along each listed axis.
pub fn axes_index(axes: &[usize]) -> MultiIndex {
    let mut a = [0u8; MAX_DIM];
    for &v in axes {
        a[v] += 1;
    }
    a
}

/// Truncated Taylor polynomial with normalized coefficients.
#[derive(Debug, Clone)]
pub struct Taylor {
    basis: Arc<Basis>,
    coeffs: Vec<f64>,
}

impl PartialEq for Taylor {
    fn eq(&self, other: &Self) -> bool {
        self.basis.dim == other.basis.dim
            && self.basis.degree == other.basis.degree
            && self.coeffs == other.coeffs
    }
}

impl Taylor {
    pub fn constant(basis: &Arc<Basis>, value: f64) -> Taylor {
        let mut coeffs = vec![0.0; basis.len()];
        coeffs[0] = value;
        Taylor {
            basis: basis.clone(),
            coeffs,
        }
    }

    /// The coordinate `x_var` expanded around `at`.
    pub fn variable(basis: &Arc<Basis>, var: usize, at: f64) -> Taylor {
        let mut t = Taylor::constant(basis, at);
        if basis.degree >= 1 {
            t.coeffs[1 + var] = 1.0;
        }
        t
    }

    pub fn from_coeffs(basis: &Arc<Basis>, coeffs: Vec<f64>) -> Taylor {
        assert_eq!(coeffs.len(), basis.len());
        Taylor {
            basis: basis.clone(),
            coeffs,
        }
    }

    pub fn basis(&self) -> &Arc<Basis> {
        &self.basis
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn dim(&self) -> usize {
        self.basis.dim
    }

    pub fn degree(&self) -> usize {
        self.basis.degree
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    /// Normalized coefficient for `alpha`, zero if beyond the degree.
    pub fn coeff(&self, alpha: &MultiIndex) -> f64 {
        self.basis.index_of(alpha).map_or(0.0, |i| self.coeffs[i])
    }

    /// Raw partial derivative `∂^α` at the expansion point.
    pub fn partial(&self, alpha: &MultiIndex) -> f64 {
        self.coeff(alpha) * multi_factorial(alpha)
    }

    fn zip_with(&self, other: &Taylor, f: impl Fn(f64, f64) -> f64) -> Taylor {
        let (a, b) = self.common(other);
        let coeffs = a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| f(*x, *y)).collect();
        Taylor {
            basis: a.basis.clone(),
            coeffs,
        }
    }

    /// Brings both operands to the smaller degree.
    fn common<'a>(&'a self, other: &'a Taylor) -> (std::borrow::Cow<'a, Taylor>, std::borrow::Cow<'a, Taylor>) {
        use std::borrow::Cow;
        assert_eq!(self.dim(), other.dim(), "dimension mismatch");
        match self.degree().cmp(&other.degree()) {
            std::cmp::Ordering::Equal => (Cow::Borrowed(self), Cow::Borrowed(other)),
            std::cmp::Ordering::Less => (Cow::Borrowed(self), Cow::Owned(other.truncate(self.degree()))),
            std::cmp::Ordering::Greater => (Cow::Owned(self.truncate(other.degree())), Cow::Borrowed(other)),
        }
    }

    pub fn add(&self, other: &Taylor) -> Taylor {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Taylor) -> Taylor {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> Taylor {
        Taylor {
            basis: self.basis.clone(),
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    pub fn neg(&self) -> Taylor {
        self.scale(-1.0)
    }

    pub fn add_scalar(&self, s: f64) -> Taylor {
        let mut t = self.clone();
        t.coeffs[0] += s;
        t
    }

    /// Truncated Cauchy product.
    pub fn mul(&self, other: &Taylor) -> Taylor {
        let (a, b) = self.common(other);
        let mut out = vec![0.0; a.coeffs.len()];
        for &(i, j, k) in &a.basis.products {
            out[k as usize] += a.coeffs[i as usize] * b.coeffs[j as usize];
        }
        Taylor {
            basis: a.basis.clone(),
            coeffs: out,
        }
    }

    pub fn square(&self) -> Taylor {
        self.mul(self)
    }

    /// Lower-degree view (prefix of the graded table).
    pub fn truncate(&self, degree: usize) -> Taylor {
        assert!(degree <= self.degree());
        let basis = Basis::get(self.dim(), degree);
        Taylor {
            coeffs: self.coeffs[..basis.len()].to_vec(),
            basis,
        }
    }

    /// `∂/∂x_var`, one degree lower.
    pub fn derivative(&self, var: usize) -> Taylor {
        assert!(self.degree() >= 1, "cannot differentiate a degree-0 series");
        let basis = Basis::get(self.dim(), self.degree() - 1);
        let coeffs = basis
            .indices
            .iter()
            .map(|beta| {
                let mut up = *beta;
                up[var] += 1;
                self.coeff(&up) * f64::from(up[var])
            })
            .collect();
        Taylor { basis, coeffs }
    }

    /// `Σ_k g_k h^k` where `h = self - self.value()` and `g_k` are the Taylor
    /// coefficients of a univariate function at `self.value()`.
    pub fn compose(&self, g: &[f64]) -> Taylor {
        let mut h = self.clone();
        h.coeffs[0] = 0.0;
        let d = self.degree();
        let mut acc = Taylor::constant(&self.basis, g[d.min(g.len() - 1)]);
        for k in (0..d).rev() {
            acc = acc.mul(&h).add_scalar(g[k]);
        }
        acc
    }

    pub fn recip(&self) -> Result<Taylor> {
        let v = self.value();
        if v == 0.0 {
            return Err(Error::DivisionByZeroLeadingTerm);
        }
        let g: Vec<f64> = (0..=self.degree())
            .map(|k| (-1f64).powi(k as i32) / v.powi(k as i32 + 1))
            .collect();
        Ok(self.compose(&g))
    }

    pub fn div(&self, other: &Taylor) -> Result<Taylor> {
        Ok(self.mul(&other.recip()?))
    }

    pub fn sqrt(&self) -> Result<Taylor> {
        let v = self.value();
        if v <= 0.0 {
            return Err(Error::Domain(format!("sqrt of non-positive leading value {v}")));
        }
        // binom(1/2, k) v^(1/2 - k)
        let mut g = Vec::with_capacity(self.degree() + 1);
        let mut binom = 1.0;
        for k in 0..=self.degree() {
            if k > 0 {
                binom *= (0.5 - (k as f64 - 1.0)) / k as f64;
            }
            g.push(binom * v.powf(0.5 - k as f64));
        }
        Ok(self.compose(&g))
    }

    pub fn exp(&self) -> Taylor {
        let e = self.value().exp();
        let g: Vec<f64> = (0..=self.degree()).map(|k| e / factorial(k)).collect();
        self.compose(&g)
    }

    pub fn ln(&self) -> Result<Taylor> {
        let v = self.value();
        if v <= 0.0 {
            return Err(Error::Domain(format!("log of non-positive leading value {v}")));
        }
        let g: Vec<f64> = (0..=self.degree())
            .map(|k| {
                if k == 0 {
                    v.ln()
                } else {
                    (-1f64).powi(k as i32 + 1) / (k as f64 * v.powi(k as i32))
                }
            })
            .collect();
        Ok(self.compose(&g))
    }

    pub fn sin(&self) -> Taylor {
        let (s, c) = self.value().sin_cos();
        let cycle = [s, c, -s, -c];
        let g: Vec<f64> = (0..=self.degree()).map(|k| cycle[k % 4] / factorial(k)).collect();
        self.compose(&g)
    }

    pub fn cos(&self) -> Taylor {
        let (s, c) = self.value().sin_cos();
        let cycle = [c, -s, -c, s];
        let g: Vec<f64> = (0..=self.degree()).map(|k| cycle[k % 4] / factorial(k)).collect();
        self.compose(&g)
    }

    pub fn powi(&self, n: i32) -> Result<Taylor> {
        if n < 0 {
            return self.recip()?.powi(-n);
        }
        let mut result = Taylor::constant(&self.basis, 1.0);
        let mut base = self.clone();
        let mut e = n as u32;
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.square();
            }
        }
        Ok(result)
    }

    pub fn to_jet(&self) -> Jet {
        Jet {
            values: self
                .basis
                .indices
                .iter()
                .zip(&self.coeffs)
                .map(|(a, c)| c * multi_factorial(a))
                .collect(),
            basis: self.basis.clone(),
        }
    }
}

/// Raw partial derivatives `∂^α f` for all `|α| ≤ degree`.
#[derive(Debug, Clone)]
pub struct Jet {
    basis: Arc<Basis>,
    values: Vec<f64>,
}

impl Jet {
    pub fn from_values(dim: usize, degree: usize, values: Vec<f64>) -> Result<Jet> {
        let basis = Basis::get(dim, degree);
        if values.len() != basis.len() {
            return Err(Error::InvalidInput(format!(
                "jet table needs {} entries, got {}",
                basis.len(),
                values.len()
            )));
        }
        Ok(Jet { basis, values })
    }

    pub fn dim(&self) -> usize {
        self.basis.dim
    }

    pub fn degree(&self) -> usize {
        self.basis.degree
    }

    pub fn basis(&self) -> &Arc<Basis> {
        &self.basis
    }

    /// Values in graded-lexicographic order.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self) -> f64 {
        self.values[0]
    }

    pub fn to_taylor(&self) -> Taylor {
        Taylor {
            coeffs: self
                .basis
                .indices
                .iter()
                .zip(&self.values)
                .map(|(a, v)| v / multi_factorial(a))
                .collect(),
            basis: self.basis.clone(),
        }
    }

    /// `∂^α f`, or [`Error::OrderExceeded`] when `|α|` is above the degree.
    pub fn partial(&self, alpha: &MultiIndex) -> Result<f64> {
        let order = total_degree(alpha);
        if order > self.degree() || alpha[self.dim()..].iter().any(|&a| a != 0) {
            return Err(Error::OrderExceeded {
                requested: order,
                degree: self.degree(),
            });
        }
        Ok(self.values[self.basis.lookup[alpha]])
    }

    /// Partial along a list of axes, e.g. `&[0, 0, 2]` for `∂x∂x∂z`.
    pub fn d(&self, axes: &[usize]) -> f64 {
        self.values[self.basis.lookup[&axes_index(axes)]]
    }
}

/// Free-function form of [`Jet::partial`].
pub fn jet_partial(jet: &Jet, alpha: &MultiIndex) -> Result<f64> {
    jet.partial(alpha)
}

/// Propagates a Taylor expansion of `expr` at `point` through the tree.
pub fn evaluate_taylor(expr: &Expression, point: &[f64], degree: usize, params: &Bindings) -> Result<Taylor> {
    let dim = point.len();
    if !(1..=MAX_DIM).contains(&dim) {
        return Err(Error::InvalidInput(format!("dimension {dim} outside 1..={MAX_DIM}")));
    }
    if degree > MAX_DEGREE {
        return Err(Error::InvalidInput(format!("jet degree {degree} above {MAX_DEGREE}")));
    }
    expr.check_bindings(dim, params)?;
    let basis = Basis::get(dim, degree);
    eval_node(expr, point, &basis, params)
}

fn eval_node(expr: &Expression, point: &[f64], basis: &Arc<Basis>, params: &Bindings) -> Result<Taylor> {
    Ok(match expr {
        Expression::Num(v) => Taylor::constant(basis, *v),
        Expression::Var(i) => Taylor::variable(basis, *i, point[*i]),
        Expression::Param(p) => Taylor::constant(basis, params[p]),
        Expression::Neg(a) => eval_node(a, point, basis, params)?.neg(),
        Expression::Binary(op, a, b) => {
            let a = eval_node(a, point, basis, params)?;
            let b = eval_node(b, point, basis, params)?;
            match op {
                BinOp::Add => a.add(&b),
                BinOp::Sub => a.sub(&b),
                BinOp::Mul => a.mul(&b),
                BinOp::Div => a.div(&b)?,
            }
        }
        Expression::Pow(a, n) => eval_node(a, point, basis, params)?.powi(*n)?,
        Expression::Call(f, a) => {
            let a = eval_node(a, point, basis, params)?;
            match f {
                Func::Sqrt => a.sqrt()?,
                Func::Sin => a.sin(),
                Func::Cos => a.cos(),
                Func::Exp => a.exp(),
                Func::Log => a.ln()?,
            }
        }
    })
}

/// All partial derivatives of `expr` at `point` up to total order `degree`.
pub fn evaluate_jet(expr: &Expression, point: &[f64], degree: usize, params: &Bindings) -> Result<Jet> {
    if point.len() < 2 {
        return Err(Error::InvalidInput("jets need dimension 2..=4".into()));
    }
    Ok(evaluate_taylor(expr, point, degree, params)?.to_jet())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expression;

    fn jet(text: &str, point: &[f64], degree: usize) -> Jet {
        evaluate_jet(&parse_expression(text).unwrap(), point, degree, &Bindings::new()).unwrap()
    }

    #[test]
    fn table_length_is_binomial() {
        for dim in 1..=4 {
            for degree in 0..=7 {
                assert_eq!(Basis::get(dim, degree).len(), binomial(dim + degree, degree));
            }
        }
    }

    #[test]
    fn graded_lex_order_in_three_variables() {
        let b = Basis::get(3, 2);
        let got: Vec<[u8; 3]> = b.indices().iter().map(|a| [a[0], a[1], a[2]]).collect();
        assert_eq!(
            got,
            vec![
                [0, 0, 0],
                [1, 0, 0],
                [0, 1, 0],
                [0, 0, 1],
                [2, 0, 0],
                [1, 1, 0],
                [1, 0, 1],
                [0, 2, 0],
                [0, 1, 1],
                [0, 0, 2]
            ]
        );
    }

    #[test]
    fn square_of_x_at_three() {
        let e = parse_expression("x^2").unwrap();
        let t = evaluate_taylor(&e, &[3.0], 2, &Bindings::new()).unwrap().to_jet();
        assert_eq!(t.values(), &[9.0, 6.0, 2.0]);
    }

    #[test]
    fn constant_mixed_and_sine_partials() {
        assert_eq!(jet("5", &[0.3, 0.1, 0.2], 3).partial(&multi_index(&[0, 0, 0])).unwrap(), 5.0);
        assert_eq!(jet("x*y", &[2.0, 3.0], 3).partial(&multi_index(&[1, 1])).unwrap(), 1.0);
        let s = jet("sin(x)", &[0.0, 0.0], 4);
        assert!((s.partial(&multi_index(&[3, 0])).unwrap() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn order_exceeded() {
        let j = jet("x*y", &[1.0, 1.0], 2);
        assert!(matches!(
            j.partial(&multi_index(&[2, 1])),
            Err(Error::OrderExceeded { requested: 3, degree: 2 })
        ));
    }

    #[test]
    fn sphere_distance_derivatives_at_pole_of_x() {
        let j = jet("sqrt(x^2+y^2+z^2) - 1", &[1.0, 0.0, 0.0], 3);
        assert!((j.d(&[0]) - 1.0).abs() < 1e-15);
        assert!((j.d(&[1, 1]) - 1.0).abs() < 1e-15);
        assert!(j.d(&[0, 0]).abs() < 1e-15);
    }

    #[test]
    fn domain_errors() {
        let e = parse_expression("sqrt(x)").unwrap();
        assert!(matches!(
            evaluate_jet(&e, &[-1.0, 0.0], 2, &Bindings::new()),
            Err(Error::Domain(_))
        ));
        let e = parse_expression("log(x - 1)").unwrap();
        assert!(matches!(
            evaluate_jet(&e, &[1.0, 0.0], 2, &Bindings::new()),
            Err(Error::Domain(_))
        ));
        let e = parse_expression("1 / x").unwrap();
        assert!(matches!(
            evaluate_jet(&e, &[0.0, 0.0], 2, &Bindings::new()),
            Err(Error::DivisionByZeroLeadingTerm)
        ));
    }

    #[test]
    fn composition_identities() {
        // exp(log(u)) == u and sin^2 + cos^2 == 1 through degree 6
        let p = [0.7, -0.4, 0.2];
        let u = jet("x^2 + y*z + 2", &p, 6);
        let v = jet("exp(log(x^2 + y*z + 2))", &p, 6);
        for (a, b) in u.values().iter().zip(v.values()) {
            assert!((a - b).abs() < 1e-11 * (1.0 + a.abs()), "{a} vs {b}");
        }
        let w = jet("sin(x*y+z)^2 + cos(x*y+z)^2", &p, 6);
        assert!((w.value() - 1.0).abs() < 1e-14);
        assert!(w.values()[1..].iter().all(|c| c.abs() < 1e-11));
        let q = jet("sqrt(x^2+3)^2 - x^2", &p, 6);
        assert!((q.value() - 3.0).abs() < 1e-13);
        assert!(q.values()[1..].iter().all(|c| c.abs() < 1e-11));
    }

    #[test]
    fn derivative_and_truncate_agree_with_jet_shift() {
        let t = evaluate_taylor(&parse_expression("x^3*y + z^2*x").unwrap(), &[1.0, 2.0, 3.0], 4, &Bindings::new())
            .unwrap();
        let dx = t.derivative(0);
        // ∂x f = 3x^2 y + z^2 -> 6 + 9 = 15; ∂x∂y f = 3x^2 = 3
        assert!((dx.value() - 15.0).abs() < 1e-14);
        assert!((dx.partial(&axes_index(&[1])) - 3.0).abs() < 1e-14);
        assert_eq!(t.truncate(2).coeffs(), &t.coeffs()[..10]);
    }
}
