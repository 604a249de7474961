use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::grid::{build_grid, test_states, LabSurface, ParamSurfaceGrid, TestConfig};
use super::operator::{build_hamiltonian, build_momentum, commutator, HamiltonianForm, LinearOperator};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Confirmed,
    Refuted,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum IdentityId {
    #[serde(rename = "EQ3_MAIN")]
    Eq3Main,
    #[serde(rename = "EQ8_PP")]
    Eq8Pp,
    #[serde(rename = "EQ10_SCALAR")]
    Eq10Scalar,
    #[serde(rename = "EQ11_F_SIMPL")]
    Eq11FSimpl,
    #[serde(rename = "EQ13_G_SIMPL")]
    Eq13GSimpl,
    #[serde(rename = "FG_DECOMP")]
    FgDecomp,
    #[serde(rename = "H_FORMS")]
    HForms,
    #[serde(rename = "HERMITICITY")]
    Hermiticity,
}

impl IdentityId {
    pub const ALL: [IdentityId; 8] = [
        IdentityId::Eq3Main,
        IdentityId::Eq8Pp,
        IdentityId::Eq10Scalar,
        IdentityId::Eq11FSimpl,
        IdentityId::Eq13GSimpl,
        IdentityId::FgDecomp,
        IdentityId::HForms,
        IdentityId::Hermiticity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            IdentityId::Eq3Main => "EQ3_MAIN",
            IdentityId::Eq8Pp => "EQ8_PP",
            IdentityId::Eq10Scalar => "EQ10_SCALAR",
            IdentityId::Eq11FSimpl => "EQ11_F_SIMPL",
            IdentityId::Eq13GSimpl => "EQ13_G_SIMPL",
            IdentityId::FgDecomp => "FG_DECOMP",
            IdentityId::HForms => "H_FORMS",
            IdentityId::Hermiticity => "HERMITICITY",
        }
    }

    pub fn parse(s: &str) -> Result<IdentityId> {
        IdentityId::ALL
            .into_iter()
            .find(|id| id.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidInput(format!("unknown identity `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityCheckConfig {
    pub hbar: f64,
    pub mass: f64,
    pub tol: f64,
    pub tests: TestConfig,
}

impl Default for IdentityCheckConfig {
    fn default() -> IdentityCheckConfig {
        IdentityCheckConfig {
            hbar: 1.0,
            mass: 1.0,
            tol: 1e-8,
            tests: TestConfig::default(),
        }
    }
}

/// One pair of expressions compared across the grid family.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub label: String,
    pub residuals: Vec<f64>,
    pub slope: f64,
    pub verdict: Verdict,
    /// Real `α` minimizing `‖L − αR‖` on the finest grid.
    pub fit_factor: f64,
    /// `max ‖(L − αR)ψ‖ / ‖Lψ‖` on the finest grid.
    pub fit_residual: f64,
}

/// Test state achieving the largest residual on the finest grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub grid: String,
    pub case: String,
    pub state: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityVerdict {
    pub identity: String,
    pub surface: String,
    pub grids: Vec<String>,
    pub residuals: Vec<f64>,
    pub slope: f64,
    pub verdict: Verdict,
    pub tol: f64,
    pub witness: Witness,
    pub comparisons: Vec<Comparison>,
    pub notes: Vec<String>,
}

/// `max_ψ ‖(A − B)ψ‖ / ‖Bψ‖` over band-limited unit test states.
pub fn residual_on_testspace(a: &LinearOperator, b: &LinearOperator, grid: &ParamSurfaceGrid, tests: &TestConfig) -> f64 {
    test_states(grid, tests)
        .par_iter()
        .map(|psi| {
            let (av, bv) = (a.apply(psi), b.apply(psi));
            let diff: Vec<Complex64> = av.iter().zip(&bv).map(|(x, y)| x - y).collect();
            grid.norm(&diff) / grid.norm(&bv).max(f64::EPSILON)
        })
        .reduce(|| 0.0, f64::max)
}

/// Verdict from a residual series ordered coarse to fine.
pub fn classify_series(residuals: &[f64], tol: f64) -> Verdict {
    let monotone = residuals.windows(2).all(|w| w[1] <= 1.25 * w[0] || w[1] < tol);
    let (first, last) = (residuals[0], *residuals.last().unwrap());
    if !monotone {
        Verdict::Inconclusive
    } else if last < tol {
        Verdict::Confirmed
    } else if residuals.iter().all(|r| *r > 100.0 * tol) && last / first >= 0.25 {
        Verdict::Refuted
    } else {
        Verdict::Inconclusive
    }
}

/// Least-squares slope of `ln r` against `ln N`.
pub fn convergence_slope(sizes: &[usize], residuals: &[f64]) -> f64 {
    let xs: Vec<f64> = sizes.iter().map(|n| (*n as f64).ln()).collect();
    let ys: Vec<f64> = residuals.iter().map(|r| r.max(1e-300).ln()).collect();
    let k = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / k, ys.iter().sum::<f64>() / k);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// Builds the square grid family `n` (circle) or `n×n` (torus).
pub fn grid_family(surface: LabSurface, sizes: &[usize]) -> Result<Vec<Arc<ParamSurfaceGrid>>> {
    sizes
        .iter()
        .map(|&n| build_grid(surface, &vec![n; surface.param_dim()]))
        .collect()
}

struct Case {
    label: String,
    lhs: Vec<LinearOperator>,
    rhs: Vec<LinearOperator>,
    /// Extra terms that only widen the residual denominator.
    reference: Vec<LinearOperator>,
}

impl Case {
    fn new(label: impl Into<String>, lhs: Vec<LinearOperator>, rhs: Vec<LinearOperator>) -> Case {
        Case {
            label: label.into(),
            lhs,
            rhs,
            reference: Vec::new(),
        }
    }
}

struct CaseResult {
    residual: f64,
    case: String,
    state: usize,
    left: Vec<Complex64>,
    right: Vec<Complex64>,
}

fn evaluate_case(grid: &ParamSurfaceGrid, case: &Case, states: &[Vec<Complex64>]) -> Vec<CaseResult> {
    states
        .par_iter()
        .enumerate()
        .map(|(s, psi)| {
            let mut scale = f64::EPSILON;
            let mut total = |terms: &[LinearOperator]| {
                let mut acc = vec![Complex64::new(0.0, 0.0); psi.len()];
                for t in terms {
                    let v = t.apply(psi);
                    scale = scale.max(grid.norm(&v));
                    for (a, x) in acc.iter_mut().zip(v) {
                        *a += x;
                    }
                }
                acc
            };
            let l = total(&case.lhs);
            let r = total(&case.rhs);
            total(&case.reference);
            let diff: Vec<Complex64> = l.iter().zip(&r).map(|(a, b)| a - b).collect();
            CaseResult {
                residual: grid.norm(&diff) / scale,
                case: case.label.clone(),
                state: s,
                left: l,
                right: r,
            }
        })
        .collect()
}

fn hermiticity_residual(grid: &ParamSurfaceGrid, op: &LinearOperator, states: &[Vec<Complex64>]) -> Vec<(usize, f64)> {
    (0..states.len())
        .into_par_iter()
        .map(|s| {
            let (phi, psi) = (&states[s], &states[(s + 1) % states.len()]);
            let (aphi, apsi) = (op.apply(phi), op.apply(psi));
            let lhs = grid.inner(phi, &apsi);
            let rhs = grid.inner(&aphi, psi);
            let scale = (grid.norm(phi) * grid.norm(&apsi) + grid.norm(&aphi) * grid.norm(psi)).max(f64::EPSILON);
            (s, (lhs - rhs).norm() / scale)
        })
        .collect()
}

fn mult(v: Vec<f64>) -> LinearOperator {
    LinearOperator::multiply_real(v)
}

fn cmult(v: Vec<Complex64>) -> LinearOperator {
    LinearOperator::multiply(v)
}

fn i_times(c: f64) -> Complex64 {
    Complex64::new(0.0, c)
}

fn pointwise(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x * y).collect()
}

/// Operators and coefficient tables shared by the identity builders.
struct Kit {
    grid: Arc<ParamSurfaceGrid>,
    d: usize,
    hbar: f64,
    mass: f64,
    p: Vec<LinearOperator>,
}

impl Kit {
    fn new(grid: &Arc<ParamSurfaceGrid>, cfg: &IdentityCheckConfig) -> Kit {
        Kit {
            grid: grid.clone(),
            d: grid.dim(),
            hbar: cfg.hbar,
            mass: cfg.mass,
            p: build_momentum(grid, cfg.hbar),
        }
    }

    fn n(&self, j: usize) -> Vec<f64> {
        self.grid.geometry.n(j).to_vec()
    }

    fn nodes(&self) -> usize {
        self.grid.len()
    }

    /// `p·∇n·p = p_i n_{i,l} p_l`
    fn q(&self) -> LinearOperator {
        let mut terms = Vec::new();
        for i in 0..self.d {
            for l in 0..self.d {
                let c = mult(self.grid.geometry.dn(i, l).to_vec());
                terms.push(&(&self.p[i] * &c) * &self.p[l]);
            }
        }
        LinearOperator::sum(self.nodes(), &terms)
    }

    /// `n_{i,l} n_{i,l,j}`
    fn t(&self, j: usize) -> Vec<f64> {
        let g = &self.grid.geometry;
        (0..self.nodes())
            .map(|p| {
                let mut s = 0.0;
                for i in 0..self.d {
                    for l in 0..self.d {
                        s += g.dn(i, l)[p] * g.d2n(i, l, j)[p];
                    }
                }
                s
            })
            .collect()
    }

    /// `n_k n_{i,l} n_{i,l,j,k}`
    fn w(&self, j: usize) -> Vec<f64> {
        let g = &self.grid.geometry;
        (0..self.nodes())
            .map(|p| {
                let mut s = 0.0;
                for k in 0..self.d {
                    for i in 0..self.d {
                        for l in 0..self.d {
                            s += g.n(k)[p] * g.dn(i, l)[p] * g.d3n(i, l, j, k)[p];
                        }
                    }
                }
                s
            })
            .collect()
    }

    /// `n_{i,i,l,l}`
    fn n_iill(&self) -> Vec<f64> {
        self.grid.geometry.lap_m().iter().map(|v| -v).collect()
    }

    /// `factor · {c p_l p_k + p_l c p_k + p_k c p_l + p_k p_l c}` summed over `k, l`,
    /// as four grouped terms.
    fn symmetrized(&self, factor: Complex64, coef: impl Fn(usize, usize) -> Vec<f64>) -> Vec<LinearOperator> {
        let mut groups: Vec<Vec<LinearOperator>> = vec![Vec::new(); 4];
        for k in 0..self.d {
            for l in 0..self.d {
                let c = mult(coef(k, l));
                let (pk, pl) = (&self.p[k], &self.p[l]);
                groups[0].push(&(&c * pl) * pk);
                groups[1].push(&(pl * &c) * pk);
                groups[2].push(&(pk * &c) * pl);
                groups[3].push(&(pk * pl) * &c);
            }
        }
        groups
            .iter()
            .map(|g| LinearOperator::sum(self.nodes(), g).scale(factor))
            .collect()
    }

    fn f_literal(&self, j: usize) -> Vec<LinearOperator> {
        let g = &self.grid.geometry;
        self.symmetrized(i_times(0.5 * self.hbar), |k, l| pointwise(g.dn(j, l), g.n(k)))
    }

    fn g_literal(&self, j: usize) -> Vec<LinearOperator> {
        let g = &self.grid.geometry;
        self.symmetrized(i_times(-0.5 * self.hbar), |k, l| pointwise(g.n(j), g.dn(k, l)))
    }

    fn p_squared(&self) -> LinearOperator {
        let sq: Vec<LinearOperator> = self.p.iter().map(|pk| pk * pk).collect();
        LinearOperator::sum(self.nodes(), &sq)
    }

    fn axis(&self, j: usize) -> String {
        ["x", "y", "z", "w"][j].to_string()
    }
}

fn cases_for(id: IdentityId, kit: &Kit) -> Vec<Case> {
    let (d, hbar, mass) = (kit.d, kit.hbar, kit.mass);
    let c = hbar * hbar / (4.0 * mass);
    let grid = &kit.grid;
    match id {
        IdentityId::Eq3Main => {
            let h = build_hamiltonian(grid, hbar, mass, HamiltonianForm::LaplaceBeltrami);
            let q = kit.q();
            let lap_m = grid.geometry.lap_m();
            let inv = Complex64::new(1.0, 0.0) / i_times(hbar);
            (0..d)
                .map(|j| {
                    let nj = mult(kit.n(j));
                    let half = Complex64::new(-0.5 / mass, 0.0);
                    Case::new(
                        kit.axis(j),
                        vec![(&kit.p[j] * &h).scale(inv), (&h * &kit.p[j]).scale(-inv)],
                        vec![
                            (&nj * &q).scale(half),
                            (&q * &nj).scale(half),
                            mult(pointwise(&lap_m, &kit.n(j)).iter().map(|v| -c * v).collect()),
                        ],
                    )
                })
                .collect()
        }
        IdentityId::Eq8Pp => {
            let mut out = Vec::new();
            for i in 0..d {
                for j in i + 1..d {
                    let mut left = Vec::new();
                    let mut right = Vec::new();
                    for l in 0..d {
                        let g = &grid.geometry;
                        let a: Vec<f64> = (0..kit.nodes())
                            .map(|p| g.n(j)[p] * g.dn(i, l)[p] - g.n(i)[p] * g.dn(j, l)[p])
                            .collect();
                        let am = mult(a);
                        left.push(&am * &kit.p[l]);
                        right.push(&kit.p[l] * &am);
                    }
                    let f = i_times(0.5 * hbar);
                    out.push(Case::new(
                        format!("{}{}", kit.axis(i), kit.axis(j)),
                        vec![&kit.p[i] * &kit.p[j], -&(&kit.p[j] * &kit.p[i])],
                        vec![
                            LinearOperator::sum(kit.nodes(), &left).scale(f),
                            LinearOperator::sum(kit.nodes(), &right).scale(f),
                        ],
                    ));
                }
            }
            out
        }
        IdentityId::Eq11FSimpl => (0..d)
            .map(|j| {
                let t: Vec<Complex64> = kit.t(j).iter().map(|v| i_times(-hbar.powi(3) * v)).collect();
                Case::new(kit.axis(j), kit.f_literal(j), vec![cmult(t)])
            })
            .collect(),
        IdentityId::Eq13GSimpl => {
            let q = kit.q();
            let n4 = kit.n_iill();
            (0..d)
                .map(|j| {
                    let nj = mult(kit.n(j));
                    let (t, w) = (kit.t(j), kit.w(j));
                    let nv = kit.n(j);
                    let tail: Vec<Complex64> = (0..kit.nodes())
                        .map(|p| i_times(-hbar.powi(3) * (t[p] - 2.0 * nv[p] * w[p] - nv[p] * n4[p])))
                        .collect();
                    Case::new(
                        kit.axis(j),
                        kit.g_literal(j),
                        vec![
                            (&nj * &q).scale(i_times(-2.0 * hbar)),
                            (&q * &nj).scale(i_times(-2.0 * hbar)),
                            cmult(tail),
                        ],
                    )
                })
                .collect()
        }
        IdentityId::FgDecomp => {
            let p2 = kit.p_squared();
            (0..d)
                .map(|j| {
                    let mut lhs = kit.f_literal(j);
                    lhs.extend(kit.g_literal(j));
                    Case::new(kit.axis(j), lhs, vec![&kit.p[j] * &p2, -&(&p2 * &kit.p[j])])
                })
                .collect()
        }
        IdentityId::HForms => {
            let lb = build_hamiltonian(grid, hbar, mass, HamiltonianForm::LaplaceBeltrami);
            let mom = build_hamiltonian(grid, hbar, mass, HamiltonianForm::Momentum);
            vec![Case::new("H", vec![lb], vec![mom])]
        }
        IdentityId::Eq10Scalar | IdentityId::Hermiticity => unreachable!("handled separately"),
    }
}

/// Expressions `A = [p_j, cS2]`, `B` as printed, and `C = −iħ(∇_S)_j(cS2)`.
fn eq10_cases(kit: &Kit) -> [Vec<Case>; 3] {
    let c = kit.hbar * kit.hbar / (4.0 * kit.mass);
    let s2: Vec<f64> = kit.grid.geometry.s2().iter().map(|v| c * v).collect();
    let grad = kit.grid.gradient_of_values(&s2);
    let ts: Vec<Vec<f64>> = (0..kit.d).map(|j| kit.t(j)).collect();
    let mut ab = Vec::new();
    let mut ac = Vec::new();
    let mut bc = Vec::new();
    for j in 0..kit.d {
        let nj = kit.n(j);
        let a = commutator(&kit.p[j], &mult(s2.clone()));
        let a_terms = vec![&kit.p[j] * &mult(s2.clone()), -&(&mult(s2.clone()) * &kit.p[j])];
        let b: Vec<Complex64> = (0..kit.nodes())
            .map(|p| {
                let nt: f64 = (0..kit.d).map(|k| kit.grid.geometry.n(k)[p] * ts[k][p]).sum();
                i_times(2.0 * kit.hbar * c * (ts[j][p] - nj[p] * nt))
            })
            .collect();
        let cv: Vec<Complex64> = grad[j].iter().map(|g| i_times(-kit.hbar * g)).collect();
        let (bo, co) = (cmult(b), cmult(cv));
        let label = kit.axis(j);
        ab.push(Case::new(label.clone(), a_terms.clone(), vec![bo.clone()]));
        let mut case = Case::new(label.clone(), vec![a], vec![co.clone()]);
        case.reference = a_terms.clone();
        ac.push(case);
        let mut case = Case::new(label, vec![bo], vec![co]);
        case.reference = a_terms;
        bc.push(case);
    }
    [ab, ac, bc]
}

struct GridOutcome {
    residual: f64,
    witness: (String, usize),
    fit: f64,
    fit_residual: f64,
}

fn run_cases(grid: &ParamSurfaceGrid, cases: &[Case], states: &[Vec<Complex64>]) -> GridOutcome {
    let results: Vec<CaseResult> = cases.iter().flat_map(|c| evaluate_case(grid, c, states)).collect();
    let worst = results
        .iter()
        .max_by(|a, b| a.residual.total_cmp(&b.residual))
        .expect("at least one case");
    let cross: f64 = results.iter().map(|r| grid.inner(&r.right, &r.left).re).sum();
    let rhs_sq: f64 = results.iter().map(|r| grid.norm(&r.right).powi(2)).sum();
    let fit = if rhs_sq > 0.0 { cross / rhs_sq } else { 0.0 };
    let fit_residual = results
        .iter()
        .map(|r| {
            let d: Vec<Complex64> = r.left.iter().zip(&r.right).map(|(a, b)| a - b * fit).collect();
            grid.norm(&d) / grid.norm(&r.left).max(f64::EPSILON)
        })
        .fold(0.0, f64::max);
    GridOutcome {
        residual: worst.residual,
        witness: (worst.case.clone(), worst.state),
        fit,
        fit_residual,
    }
}

fn comparison(label: &str, sizes: &[usize], outcomes: &[GridOutcome], tol: f64) -> Comparison {
    let residuals: Vec<f64> = outcomes.iter().map(|o| o.residual).collect();
    Comparison {
        label: label.to_string(),
        slope: convergence_slope(sizes, &residuals),
        verdict: classify_series(&residuals, tol),
        fit_factor: outcomes.last().map_or(0.0, |o| o.fit),
        fit_residual: outcomes.last().map_or(0.0, |o| o.fit_residual),
        residuals,
    }
}

/// Checks one identity across a grid family (coarse to fine) of the same surface.
pub fn check_identity(
    grids: &[Arc<ParamSurfaceGrid>],
    id: IdentityId,
    cfg: &IdentityCheckConfig,
) -> Result<IdentityVerdict> {
    if grids.len() < 3 {
        return Err(Error::InvalidInput(format!("{} grids given, at least 3 are needed", grids.len())));
    }
    if grids.iter().any(|g| g.surface != grids[0].surface) {
        return Err(Error::InvalidInput("grid family mixes surfaces".into()));
    }
    if !(cfg.tol > 0.0 && cfg.hbar > 0.0 && cfg.mass > 0.0) {
        return Err(Error::InvalidInput("tolerance, hbar and mass must be positive".into()));
    }
    let sizes: Vec<usize> = grids.iter().map(|g| g.sizes[0]).collect();
    let mut notes = Vec::new();
    let mut comparisons = Vec::new();
    let primary: Vec<GridOutcome>;
    match id {
        IdentityId::Hermiticity => {
            primary = grids
                .iter()
                .map(|grid| {
                    let states = test_states(grid, &cfg.tests);
                    let kit = Kit::new(grid, cfg);
                    let mut ops: Vec<(String, LinearOperator)> =
                        kit.p.iter().enumerate().map(|(j, p)| (format!("p_{}", kit.axis(j)), p.clone())).collect();
                    ops.push((
                        "H".into(),
                        build_hamiltonian(grid, cfg.hbar, cfg.mass, HamiltonianForm::LaplaceBeltrami),
                    ));
                    let mut best = GridOutcome {
                        residual: 0.0,
                        witness: (String::new(), 0),
                        fit: 1.0,
                        fit_residual: 0.0,
                    };
                    for (label, op) in &ops {
                        for (s, r) in hermiticity_residual(grid, op, &states) {
                            if r >= best.residual {
                                best.residual = r;
                                best.witness = (label.clone(), s);
                            }
                        }
                    }
                    best
                })
                .collect();
            notes.push("⟨φ, Aψ⟩ against ⟨Aφ, ψ⟩ under the quadrature weights for every p_j and H".into());
        }
        IdentityId::Eq10Scalar => {
            let mut series: [Vec<GridOutcome>; 3] = [Vec::new(), Vec::new(), Vec::new()];
            let mut degenerate = false;
            for grid in grids {
                let states = test_states(grid, &cfg.tests);
                let kit = Kit::new(grid, cfg);
                let s2 = grid.geometry.s2();
                let (lo, hi) = s2.iter().fold((f64::MAX, f64::MIN), |(a, b), v| (a.min(*v), b.max(*v)));
                degenerate |= hi - lo <= 1e-12 * hi.abs().max(1.0);
                for (k, cases) in eq10_cases(&kit).iter().enumerate() {
                    series[k].push(run_cases(grid, cases, &states));
                }
            }
            let [ab, ac, bc] = series;
            for (label, s) in [("A~B", &ab), ("A~C", &ac), ("B~C", &bc)] {
                comparisons.push(comparison(label, &sizes, s, cfg.tol));
            }
            notes.push("A = [p_j, (ħ²/4μ)(n_{i,l})²] built as a commutator of operators".into());
            notes.push("B = 2iħ(ħ²/4μ)(n_{i,l}n_{i,l,j} − n_j n_k n_{i,l}n_{i,l,k}) as printed".into());
            notes.push("C = −iħ(∇_S)_j applied spectrally to the nodal values of (ħ²/4μ)(n_{i,l})²".into());
            let agreeing: Vec<&str> = comparisons
                .iter()
                .filter(|c| c.verdict == Verdict::Confirmed)
                .map(|c| c.label.as_str())
                .collect();
            notes.push(format!(
                "pairs that agree: {}",
                if agreeing.is_empty() { "none".to_string() } else { agreeing.join(", ") }
            ));
            if degenerate {
                notes.push(
                    "(n_{i,l})² is constant on this surface, so A, B and C all vanish and the sign question is not decided here"
                        .into(),
                );
            } else {
                notes.push(format!(
                    "best real factor with A ≈ α B on the finest grid: α = {:.6} (relative residual after the fit {:.1e})",
                    comparisons[0].fit_factor, comparisons[0].fit_residual
                ));
            }
            primary = ab;
        }
        _ => {
            primary = grids
                .iter()
                .map(|grid| {
                    let states = test_states(grid, &cfg.tests);
                    let kit = Kit::new(grid, cfg);
                    run_cases(grid, &cases_for(id, &kit), &states)
                })
                .collect();
        }
    }
    let main = comparison("printed", &sizes, &primary, cfg.tol);
    match id {
        IdentityId::Eq3Main => notes.push(
            "normal-field coefficients are signed-distance jets, so off-surface derivatives enter through n_{i,l,j}"
                .into(),
        ),
        IdentityId::Eq11FSimpl => notes.push(
            "left side is the symmetrized definition of F_j, right side the simplified −iħ³ n_{i,l}n_{i,l,j}".into(),
        ),
        IdentityId::Eq13GSimpl => notes.push(
            "right side includes the repeated-index term −2 n_j n_k n_{i,l}n_{i,l,j,k} as written".into(),
        ),
        IdentityId::FgDecomp => notes.push("F_j + G_j against the commutator [p_j, p_k p_k]".into()),
        _ => {}
    }
    if main.verdict == Verdict::Refuted && id != IdentityId::Hermiticity && id != IdentityId::Eq10Scalar {
        notes.push(format!(
            "best real factor with left ≈ α·right on the finest grid: α = {:.6} (relative residual after the fit {:.1e})",
            main.fit_factor, main.fit_residual
        ));
    }
    let finest = primary.last().unwrap();
    Ok(IdentityVerdict {
        identity: id.name().to_string(),
        surface: grids[0].surface.label(),
        grids: grids.iter().map(|g| g.label()).collect(),
        residuals: main.residuals.clone(),
        slope: main.slope,
        verdict: main.verdict,
        tol: cfg.tol,
        witness: Witness {
            grid: grids.last().unwrap().label(),
            case: finest.witness.0.clone(),
            state: finest.witness.1,
            seed: cfg.tests.seed,
        },
        comparisons,
        notes,
    })
}

/// Every identity on one grid family.
pub fn verify_suite(grids: &[Arc<ParamSurfaceGrid>], cfg: &IdentityCheckConfig) -> Result<Vec<IdentityVerdict>> {
    IdentityId::ALL.iter().map(|&id| check_identity(grids, id, cfg)).collect()
}
