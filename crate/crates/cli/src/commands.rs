use std::collections::BTreeMap;

use geomforce_core::expr::Expression;
use geomforce_core::lab::{grid_family, IdentityId};
use geomforce_core::*;
use serde_json::{json, Value};

use crate::args::*;
use crate::units::{parse_length, parse_mass, positive, Quantity};

/// What a command produced: the output body and the process exit code.
pub struct Outcome {
    pub body: String,
    pub code: i32,
}

impl Outcome {
    fn json(v: &Value) -> Outcome {
        Outcome {
            body: crate::output::to_json_text(v),
            code: 0,
        }
    }

    fn with_code(mut self, code: i32) -> Outcome {
        self.code = code;
        self
    }
}

/// A surface in model units together with the physical length of one unit.
struct Surface {
    spec: Option<SurfaceSpec>,
    length: f64,
}

fn to_value<T: serde::Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("report types serialize")
}

fn build_surface(args: &SurfaceArgs, allow_generic: bool) -> Result<Surface> {
    let radii: Vec<(&str, Option<Quantity>)> = [("a", &args.a), ("b", &args.b), ("R", &args.major), ("r", &args.minor)]
        .into_iter()
        .map(|(k, v)| Ok((k, v.as_deref().map(parse_length).transpose()?)))
        .collect::<Result<_>>()?;
    let length = match &args.length {
        Some(text) => positive(parse_length(text)?, "length")?,
        None => radii
            .iter()
            .filter_map(|(_, q)| *q)
            .find(Quantity::has_unit)
            .map(|q| positive(q, "length"))
            .transpose()?
            .unwrap_or(1.0),
    };
    let mut params = Bindings::new();
    for (k, q) in &radii {
        if let Some(q) = q {
            let v = if q.has_unit() { q.value / length } else { q.value };
            params.insert(k.to_string(), v);
        }
    }
    for binding in &args.params {
        let (k, v) = binding
            .split_once('=')
            .ok_or_else(|| Error::InvalidInput(format!("parameter binding `{binding}` is not NAME=VALUE")))?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| Error::InvalidInput(format!("parameter `{}` has a non-numeric value", k.trim())))?;
        params.insert(k.trim().to_string(), v);
    }
    let spec = match (args.surface.as_deref(), args.expr.as_deref()) {
        (Some(_), Some(_)) => {
            return Err(Error::InvalidInput("give either --surface or --expr, not both".into()));
        }
        (None, None) => return Err(Error::InvalidInput("a surface is required (--surface or --expr)".into())),
        (Some("generic"), None) if allow_generic => None,
        (Some(name), None) => Some(builtin_surface(name, &params)?),
        (None, Some(text)) => {
            if !(args.half_width.is_finite() && args.half_width > 0.0) {
                return Err(Error::InvalidInput("--half-width must be positive".into()));
            }
            let bounds = vec![(-args.half_width, args.half_width); args.dim];
            Some(SurfaceSpec::from_expression(
                "expression",
                text,
                args.dim,
                params,
                args.signed_distance,
                bounds,
            )?)
        }
    };
    Ok(Surface { spec, length })
}

fn surface_label(spec: &SurfaceSpec) -> Value {
    match spec.catalog {
        Some(c) => to_value(&c),
        None => json!({"kind": "expression", "expression": spec.expr.to_string(), "params": spec.params}),
    }
}

struct TreeStats {
    nodes: usize,
    depth: usize,
    variables: Vec<usize>,
    functions: Vec<&'static str>,
}

fn tree_stats(e: &Expression, depth: usize, st: &mut TreeStats) {
    st.nodes += 1;
    st.depth = st.depth.max(depth);
    match e {
        Expression::Num(_) | Expression::Param(_) => {}
        Expression::Var(i) => {
            if !st.variables.contains(i) {
                st.variables.push(*i);
            }
        }
        Expression::Neg(a) | Expression::Pow(a, _) => tree_stats(a, depth + 1, st),
        Expression::Call(f, a) => {
            if !st.functions.contains(&f.name()) {
                st.functions.push(f.name());
            }
            tree_stats(a, depth + 1, st);
        }
        Expression::Binary(_, a, b) => {
            tree_stats(a, depth + 1, st);
            tree_stats(b, depth + 1, st);
        }
    }
}

pub fn parse(args: &ParseArgs) -> Result<Outcome> {
    let e = parse_expression(&args.expression)?;
    let params = e.parameters();
    let dummy: Bindings = params.iter().map(|p| (p.clone(), 1.0)).collect();
    e.check_bindings(args.dim, &dummy)?;
    let mut st = TreeStats {
        nodes: 0,
        depth: 0,
        variables: Vec::new(),
        functions: Vec::new(),
    };
    tree_stats(&e, 1, &mut st);
    st.variables.sort_unstable();
    st.functions.sort_unstable();
    const NAMES: [&str; 4] = ["x", "y", "z", "w"];
    let vars: Vec<&str> = st.variables.iter().map(|&i| NAMES[i]).collect();
    Ok(Outcome::json(&json!({
        "expression": e.to_string(),
        "dim": args.dim,
        "nodes": st.nodes,
        "depth": st.depth,
        "variables": vars,
        "parameters": params,
        "functions": st.functions,
    })))
}

fn policy(args: &SurfaceArgs) -> Result<ExtensionPolicy> {
    ExtensionPolicy::parse(&args.policy)
}

fn require(spec: Option<SurfaceSpec>) -> Result<SurfaceSpec> {
    spec.ok_or_else(|| Error::InvalidInput("`generic` is only meaningful for the force command".into()))
}

pub fn fields(args: &FieldsArgs) -> Result<Outcome> {
    let spec = require(build_surface(&args.surface, false)?.spec)?;
    let pol = policy(&args.surface)?;
    let sampling = match args.sampling {
        SamplingKind::Parametric => Sampling::Parametric {
            nu: args.nu,
            nv: args.nv,
        },
        SamplingKind::Random => Sampling::Random {
            count: args.count,
            seed: args.seed,
        },
    };
    let samples = sample_field(&spec, pol, sampling)?;
    Ok(match args.format {
        Format::Csv => Outcome {
            body: geomforce_core::geometry::samples_to_csv(&samples),
            code: 0,
        },
        Format::Json => Outcome::json(&json!({
            "surface": surface_label(&spec),
            "policy": pol.label(),
            "samples": to_value(&samples),
        })),
    })
}

pub fn extrema(args: &ExtremaArgs) -> Result<Outcome> {
    let spec = require(build_surface(&args.surface, false)?.spec)?;
    let pol = policy(&args.surface)?;
    let field = geomforce_core::geometry::ScalarField::parse(&args.field)?;
    let cfg = OptimConfig {
        starts: args.starts,
        seed: args.seed,
        tol: args.tol,
        max_iter: args.max_iter,
    };
    let set = find_critical_points(&spec, field, pol, &cfg)?;
    let converged = set.diagnostics.iter().filter(|d| d.converged).count();
    Ok(Outcome::json(&json!({
        "surface": surface_label(&spec),
        "starts": set.diagnostics.len(),
        "converged_starts": converged,
        "report": to_value(&extremum_report(&set)),
    })))
}

fn unit(v: &[f64]) -> Vec<f64> {
    let n = v.iter().map(|c| c * c).sum::<f64>().sqrt();
    v.iter().map(|c| c / n).collect()
}

fn initial_state(spec: &SurfaceSpec, args: &ClassicalArgs) -> Result<TrajectoryState> {
    let x = match &args.x {
        Some(x) if x.len() != spec.dim => {
            return Err(Error::InvalidInput(format!("--x needs {} coordinates", spec.dim)));
        }
        Some(x) => project_to_surface(spec, x, 1e-13)?,
        None => spec
            .parametric_point(args.u, args.v)
            .ok_or_else(|| Error::InvalidInput("--x is required for expression surfaces".into()))?,
    };
    let n = unit(&spec.gradient(&x)?.1);
    let p = match &args.p {
        Some(p) if p.len() != spec.dim => {
            return Err(Error::InvalidInput(format!("--p needs {} components", spec.dim)));
        }
        Some(p) => {
            let pn: f64 = p.iter().zip(&n).map(|(a, b)| a * b).sum();
            p.iter().zip(&n).map(|(a, b)| a - pn * b).collect()
        }
        None => {
            let frame = tangent_frame(&n);
            let mut d = frame[0].clone();
            if let Some(t1) = frame.get(1) {
                d.iter_mut().zip(t1).for_each(|(a, b)| *a += 0.5 * b);
            }
            unit(&d).into_iter().map(|c| c * args.speed).collect()
        }
    };
    Ok(TrajectoryState { x, p, t: 0.0 })
}

pub fn classical(args: &ClassicalArgs) -> Result<(Outcome, Option<String>)> {
    let spec = require(build_surface(&args.surface, false)?.spec)?;
    let initial = initial_state(&spec, args)?;
    let cfg = IntegratorConfig::new(args.dt, args.steps, args.mass);
    let traj = integrate(&spec, &initial, &cfg)?;
    let force = force_residual(&spec, &traj, args.mass)?;
    let geo = geodesic_form_residual(&spec, &traj, args.mass)?;
    let fmax = traj.f_residuals.iter().cloned().fold(0.0, f64::max);
    let tmax = traj.tangency_residuals.iter().cloned().fold(0.0, f64::max);
    let mut report = json!({
        "surface": surface_label(&spec),
        "initial": {"x": initial.x, "p": initial.p},
        "dt": args.dt,
        "steps": args.steps,
        "mass": args.mass,
        "energy_drift": traj.energy_drift(),
        "max_constraint_residual": fmax,
        "max_tangency_residual": tmax,
        "force_residual": {"max": force.max, "rms": force.rms},
        "geodesic_residual": {"max": geo.residual.max, "rms": geo.residual.rms, "flipped_sign_max": geo.flipped_max},
    });
    if args.convergence {
        let dts = [4.0 * args.dt, 2.0 * args.dt, args.dt];
        let study = convergence_study(&spec, &initial, args.dt * args.steps as f64, &dts, args.mass)?;
        report["second_order"] = json!(study.second_order(1e-9));
        report["convergence"] = to_value(&study);
    }
    let csv = args.trajectory.as_ref().map(|_| traj.to_csv());
    Ok((Outcome::json(&report), csv))
}

fn lab_surface(name: &str, a: f64, major: f64, minor: f64) -> Result<LabSurface> {
    match name {
        "circle" => Ok(LabSurface::Circle { a }),
        "torus" => Ok(LabSurface::Torus { major, minor }),
        other => Err(Error::UnsupportedSurface(format!(
            "`{other}`: operator checks run on the circle and the torus"
        ))),
    }
}

/// Identities whose failure is a construction error rather than a finding.
const HARD: [IdentityId; 2] = [IdentityId::Hermiticity, IdentityId::HForms];

pub fn verify(args: &VerifyArgs) -> Result<Outcome> {
    let surface = lab_surface(&args.surface, args.a, args.major, args.minor)?;
    let ids = if args.identities.is_empty() {
        IdentityId::ALL.to_vec()
    } else {
        args.identities.iter().map(|s| IdentityId::parse(s)).collect::<Result<_>>()?
    };
    if !(args.tol > 0.0 && args.hbar > 0.0 && args.mass > 0.0) {
        return Err(Error::InvalidInput("tol, hbar and mass must be positive".into()));
    }
    if args.count == 0 || !(args.band > 0.0 && args.band <= 1.0) {
        return Err(Error::InvalidInput("--count must be positive and --band in (0, 1]".into()));
    }
    let grids = grid_family(surface, &args.grids)?;
    let cfg = IdentityCheckConfig {
        hbar: args.hbar,
        mass: args.mass,
        tol: args.tol,
        tests: TestConfig {
            count: args.count,
            seed: args.seed,
            band_fraction: args.band,
        },
    };
    let verdicts: Vec<IdentityVerdict> = ids
        .iter()
        .map(|&id| check_identity(&grids, id, &cfg))
        .collect::<Result<_>>()?;
    let mut hard = BTreeMap::new();
    let mut broken = false;
    for (id, v) in ids.iter().zip(&verdicts) {
        if HARD.contains(id) {
            hard.insert(id.name().to_string(), to_value(&v.verdict));
            broken |= v.verdict != Verdict::Confirmed;
        }
    }
    let mut tally = BTreeMap::<String, usize>::new();
    for v in &verdicts {
        *tally.entry(to_value(&v.verdict).as_str().unwrap_or("?").to_string()).or_default() += 1;
    }
    let report = json!({
        "surface": surface.label(),
        "grids": grids.iter().map(|g| g.label()).collect::<Vec<_>>(),
        "config": to_value(&cfg.tests),
        "hbar": args.hbar,
        "mass": args.mass,
        "tol": args.tol,
        "verdicts": to_value(&verdicts),
        "tally": tally,
        "hard_invariants": hard,
    });
    Ok(Outcome::json(&report).with_code(if broken { 3 } else { 0 }))
}

pub fn force(args: &ForceArgs) -> Result<Outcome> {
    let built = build_surface(&args.surface, true)?;
    let mass = positive(parse_mass(&args.mass)?, "mass")?;
    let scale = PhysicalScale::new(mass, built.length)?;
    let Some(spec) = built.spec else {
        if args.surface.length.is_none() && args.surface.a.is_none() {
            return Err(Error::InvalidInput("the generic estimate needs --curvature-scale".into()));
        }
        let f = scale.curvature_force_scale();
        return Ok(Outcome::json(&json!({
            "surface": "generic",
            "estimate": "hbar^2/(mass length^3)",
            "scale": to_value(&scale),
            "force_n": f,
            "force_pn": f * 1e12,
        })));
    };
    let pol = policy(&args.surface)?;
    let point = if args.at_extremum {
        let set = find_critical_points(
            &spec,
            geomforce_core::geometry::ScalarField::LapM,
            pol,
            &OptimConfig::default(),
        )?;
        let report = extremum_report(&set);
        report
            .by_magnitude
            .first()
            .map(|p| p.location.clone())
            .ok_or_else(|| Error::NoCriticalPointFound("no critical point of lapM".into()))?
    } else {
        match &args.point {
            Some(p) if p.len() != spec.dim => {
                return Err(Error::InvalidInput(format!("--point needs {} coordinates", spec.dim)));
            }
            Some(p) => project_to_surface(&spec, p, 1e-13)?,
            None => spec
                .parametric_point(args.u, args.v)
                .ok_or_else(|| Error::InvalidInput("--point is required for expression surfaces".into()))?,
        }
    };
    let sample = curvature_sample(&spec, &point, pol)?;
    let est = si_force_magnitude(&sample, &scale);
    let vanishes = sample.lap_m.abs() * spec.feature_scale.powi(3) < args.zero_tol;
    let chi_pn = if vanishes { 0.0 } else { est.magnitude_pn };
    Ok(Outcome::json(&json!({
        "surface": surface_label(&spec),
        "policy": pol.label(),
        "point": point,
        "lap_m": sample.lap_m,
        "vanishes": vanishes,
        "chi_g_pn": chi_pn,
        "chi_g_n": chi_pn * 1e-12,
        "computed_vector_n": est.vector,
        "computed_magnitude_pn": est.magnitude_pn,
        "scale": to_value(&scale),
    })))
}

pub fn ehrenfest(args: &EhrenfestArgs) -> Result<Outcome> {
    let surface = lab_surface(&args.surface, args.a, args.major, args.minor)?;
    let pd = surface.param_dim();
    let grid = build_grid(surface, &vec![args.n; pd])?;
    let center = if args.center.is_empty() { vec![0.0; pd] } else { args.center.clone() };
    let modes = if args.modes.is_empty() {
        if pd == 1 {
            vec![10]
        } else {
            vec![2, 5]
        }
    } else {
        args.modes.clone()
    };
    let packet = WavePacket {
        center,
        width: args.width,
        momentum: modes,
    };
    let time = geomforce_core::lab::TimeGrid {
        dt: args.dt,
        steps: args.steps,
    };
    let trace = evolve_wavepacket(&grid, &packet, time, args.hbar, args.mass)?;
    Ok(match args.format {
        Format::Csv => Outcome {
            body: trace.to_csv(),
            code: 0,
        },
        Format::Json => Outcome::json(&json!({
            "surface": surface.label(),
            "grid": grid.label(),
            "packet": to_value(&packet),
            "trace": to_value(&trace),
        })),
    })
}

pub fn report(args: &ReportArgs) -> Result<Outcome> {
    let mut inputs = Vec::new();
    let mut tally = BTreeMap::<String, usize>::new();
    for path in &args.inputs {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidInput(format!("cannot read `{}`: {e}", path.display())))?;
        let v: Value = serde_json::from_str(&text)
            .map_err(|e| Error::InvalidInput(format!("`{}` is not JSON: {e}", path.display())))?;
        if let Some(list) = v.get("verdicts").and_then(Value::as_array) {
            for item in list {
                if let Some(s) = item.get("verdict").and_then(Value::as_str) {
                    *tally.entry(s.to_string()).or_default() += 1;
                }
            }
        }
        inputs.push(json!({"path": path.display().to_string(), "content": v}));
    }
    Ok(Outcome::json(&json!({
        "inputs": inputs,
        "verdict_tally": tally,
    })))
}
