//! Named experiment runners over the core library.

use geninv_core::charts::{
    chart_derivative, chart_forward, chart_inverse, tangent_space_basis,
    verify_chart_maps_manifold, OperatorPoint,
};
use geninv_core::conjugacy::maps::{self, BUILTIN_MAPS};
use geninv_core::conjugacy::{build_conjugacy, central_difference, verify_conjugacy, JACOBIAN_TOL};
use geninv_core::frobenius::families::{self, BUILTIN_FAMILIES};
use geninv_core::frobenius::{
    cofinal_membership, integrability_residual, integrate_patch, verify_tangency,
};
use geninv_core::geninv::{
    check_equivalent_conditions, classify_rank_class, is_locally_fine, mp_convergence_along,
    nashed_chen_inverse, sweep_to_csv, transfer_radius, GenInverse, SampledFamily,
};
use geninv_core::linalg::{spectral_norm, vectorize};
use geninv_core::random;
use geninv_core::subspace::{subspace_intersection, Subspace};
use geninv_core::tolerance::GENINV_TOL;
use geninv_core::{Matrix, Vector, VERSION};
use serde_json::{json, Value};

use crate::config::{ConfigError, ExperimentConfig};
use crate::report::{Check, Report};

pub const EXPERIMENTS: [&str; 6] = [
    "mp-sweep",
    "conditions",
    "conjugacy",
    "chart",
    "frobenius",
    "cofinal",
];

/// Largest principal angle accepted between a patch and the distribution.
pub const TANGENCY_BOUND: f64 = 1e-5;

/// Closed-form error bound for the circle and paraboloid patches.
pub const CLOSED_FORM_BOUND: f64 = 1e-6;

/// Smallest path-dependence that marks a family as non-integrable.
pub const NON_INTEGRABLE_BOUND: f64 = 0.1;

/// Bound on the Moore–Penrose error at the last step of a rank-preserving sweep.
pub const SWEEP_FINAL_BOUND: f64 = 1e-5;

/// Lower bound on `‖T(t)⁺‖·‖T(t) − A‖` along a rank-raising sweep.
pub const SWEEP_BLOWUP_BOUND: f64 = 0.5;

#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{experiment}: {source}")]
    Module {
        experiment: String,
        #[source]
        source: geninv_core::Error,
    },
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

enum Failure {
    Config(ConfigError),
    Core(geninv_core::Error),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Self::Config(e)
    }
}

impl From<geninv_core::Error> for Failure {
    fn from(e: geninv_core::Error) -> Self {
        Self::Core(e)
    }
}

type Outcome = Result<(Value, Vec<Check>, Vec<(&'static str, String)>), Failure>;

pub fn run_experiment(config: &ExperimentConfig) -> Result<Report, LabError> {
    let outcome = match config.experiment.as_str() {
        "mp-sweep" => mp_sweep(config),
        "conditions" => conditions(config),
        "conjugacy" => conjugacy(config),
        "chart" => chart(config),
        "frobenius" => frobenius(config),
        "cofinal" => cofinal(config),
        other => {
            return Err(ConfigError::UnknownExperiment {
                name: other.to_string(),
            }
            .into())
        }
    };
    let (summary, checks, tables) = outcome.map_err(|f| match f {
        Failure::Config(e) => LabError::Config(e),
        Failure::Core(source) => LabError::Module {
            experiment: config.experiment.clone(),
            source,
        },
    })?;
    let mut report = Report {
        experiment: config.experiment.clone(),
        version: VERSION.to_string(),
        seed: config.seed,
        tolerances: config.tolerances,
        inputs: config.inputs.clone(),
        summary,
        checks,
        tables: Vec::new(),
        csv: Default::default(),
    };
    for (name, csv) in tables {
        report.add_table(name, csv);
    }
    Ok(report)
}

fn to_vec(v: &Vector) -> Vec<f64> {
    v.iter().copied().collect()
}

fn point_for(x: &Matrix, x_plus: Option<Matrix>) -> Result<OperatorPoint, Failure> {
    Ok(match x_plus {
        Some(xp) => OperatorPoint::with_inverse(GenInverse::from_pair(x, &xp, GENINV_TOL)?),
        None => OperatorPoint::new(x)?,
    })
}

/// Moore–Penrose errors along `t ↦ A + tΔ` (`"curve": "line"`) or along the
/// rank-preserving `t ↦ chart_inverse(A + tD)` with `D` the projection of
/// the direction onto `M(A)` (`"curve": "chart"`).
fn mp_sweep(config: &ExperimentConfig) -> Outcome {
    let inputs = config.inputs();
    let a = inputs.matrix("A")?;
    let (m, n) = a.shape();
    let direction = match inputs.opt_matrix("direction")? {
        Some(d) => d,
        None => {
            let d = random::gaussian_matrix(&mut random::seeded(config.seed), m, n);
            &d / spectral_norm(&d)
        }
    };
    let steps = inputs
        .opt_f64s("steps")?
        .unwrap_or_else(|| (1..=6).map(|k| 10f64.powi(-k)).collect());
    let curve = inputs.opt_string("curve")?.unwrap_or_else(|| "line".into());
    let point = OperatorPoint::new(&a)?;
    let base_rank = point.rank();

    let path: Box<dyn Fn(f64) -> geninv_core::Result<Matrix> + Sync> = match curve.as_str() {
        "line" => {
            geninv_core::linalg::ensure_shape(&direction, m, n, "direction")?;
            let d = direction.clone();
            let a = a.clone();
            Box::new(move |t| Ok(&a + &d * t))
        }
        "chart" => {
            geninv_core::linalg::ensure_shape(&direction, m, n, "direction")?;
            let d = tangent_space_basis(&point).project(&direction);
            let p = point.clone();
            Box::new(move |t| chart_inverse(&p, &(p.x() + &d * t)))
        }
        other => {
            return Err(Failure::Core(geninv_core::Error::InvalidInput(format!(
                "curve must be \"line\" or \"chart\", got {other:?}"
            ))))
        }
    };
    let rows = mp_convergence_along(&a, &steps, &path)?;

    let rank_preserved = rows.iter().all(|r| r.rank == base_rank);
    let monotone = rows.windows(2).all(|w| w[1].mp_error <= w[0].mp_error);
    let final_error = rows.last().map(|r| r.mp_error).unwrap_or(0.0);
    let mut blowup = f64::INFINITY;
    for r in &rows {
        let offset = spectral_norm(&(path(r.t)? - &a));
        blowup = blowup.min(r.pinv_norm * offset);
    }

    let mut checks = Vec::new();
    if rank_preserved {
        checks.push(Check::holds("mp_error decreases monotonically", monotone));
        checks.push(Check::at_most(
            "final mp_error",
            final_error,
            SWEEP_FINAL_BOUND,
        ));
    } else {
        checks.push(Check::at_least(
            "min ‖T(t)⁺‖·‖T(t)−A‖",
            blowup,
            SWEEP_BLOWUP_BOUND,
        ));
    }
    let summary = json!({
        "curve": curve,
        "base_rank": base_rank,
        "rank_preserved": rank_preserved,
        "monotone": monotone,
        "final_mp_error": final_error,
        "min_scaled_pinv_norm": blowup,
        "rows": rows,
    });
    Ok((summary, checks, vec![("sweep", sweep_to_csv(&rows))]))
}

/// The seven stability conditions for `T` relative to `(A, A⁺)`, the
/// perturbed inverse identities, and optionally the transfer to `A⊕`.
fn conditions(config: &ExperimentConfig) -> Outcome {
    let inputs = config.inputs();
    let tol = &config.tolerances;
    let a = inputs.matrix("A")?;
    let t = inputs.matrix("T")?;
    let g = match inputs.opt_matrix("A_plus")? {
        Some(ap) => GenInverse::from_pair(&a, &ap, GENINV_TOL)?,
        None => GenInverse::moore_penrose(&a)?,
    };
    let report = check_equivalent_conditions(&g, &t, tol)?;
    let p = nashed_chen_inverse(&g, &t, tol.margin)?;
    let m = a.nrows();
    let projected =
        spectral_norm(&((Matrix::identity(m, m) - g.a() * g.a_plus()) * &p.c_inverse * &t));
    let scale = (1.0 + spectral_norm(&t)) * (1.0 + spectral_norm(&p.b));
    let identity_gap = (p.residual - projected).abs();

    let mut checks = vec![
        Check::holds("seven conditions agree", report.consistent()),
        Check::at_most(
            "relative |‖TBT−T‖ − ‖(I−AA⁺)C⁻¹T‖|",
            identity_gap / scale,
            1e-10,
        ),
        Check::at_most("relative ‖BTB−B‖", p.outer_residual / scale, 1e-10),
    ];

    let mut summary = json!({
        "conditions": report,
        "all_hold": report.all_hold(),
        "consistent": report.consistent(),
        "ball_radius": g.ball_radius(),
        "rank_class_A": classify_rank_class(&a),
        "rank_class_T": classify_rank_class(&t),
        "perturbed_inverse": {
            "tbt_residual": p.residual,
            "projected_residual": projected,
            "btb_residual": p.outer_residual,
            "factorization_gap": p.factorization_gap,
        },
    });
    if let Some(a_oplus) = inputs.opt_matrix("A_oplus")? {
        let delta = transfer_radius(&g, &a_oplus)?;
        let distance = spectral_norm(&(&t - &a));
        let meet =
            subspace_intersection(&Subspace::range_of(&t), &Subspace::null_space_of(&a_oplus))?;
        let inside = distance < delta;
        if inside && report.all_hold() {
            checks.push(Check::holds("R(T) ∩ N(A⊕) = {0}", meet.is_zero()));
        }
        summary["transfer"] = json!({
            "radius": delta,
            "distance": distance,
            "inside": inside,
            "intersection_dim": meet.dim(),
        });
    }
    Ok((summary, checks, Vec::new()))
}

/// Conjugacy residual of a built-in map on samples around its base point,
/// alongside the locally-fine verdict on the same samples.
fn conjugacy(config: &ExperimentConfig) -> Outcome {
    let inputs = config.inputs();
    let tol = &config.tolerances;
    let name = inputs.string("map")?;
    let map = maps::builtin(&name, config.seed)?;
    let t0_plus = map.t0_plus();
    let pair = build_conjugacy(&map.map, &map.x0, &t0_plus, tol)?;
    let count = inputs.usize_or("samples", 100)?;
    let radius = inputs.f64_or("radius", 0.5 * pair.valid_radius)?;

    let mut rng = random::seeded(config.seed);
    let samples: Vec<Vector> = (0..count)
        .map(|_| &map.x0 + random::ball_point(&mut rng, map.x0.len(), radius))
        .collect();
    let max_residual = verify_conjugacy(&pair, &samples)?;

    let t0 = map.map.jacobian(&map.x0);
    let g = GenInverse::from_pair(&t0, &t0_plus, GENINV_TOL)?;
    let mut points = vec![map.x0.clone()];
    points.extend(samples);
    let family = SampledFamily::from_fn(points, 0, |x| map.map.jacobian(x))?;
    let fineness = is_locally_fine(&family, &g, tol)?;

    let dphi = central_difference(|x| pair.phi.eval(x), &map.x0, 1e-6);
    let n = dphi.nrows();
    let phi_identity_error = (&dphi - Matrix::identity(n, n)).norm() / (n as f64).sqrt();

    let mut checks = vec![
        Check::holds(
            "residual small iff locally fine",
            (max_residual <= tol.residual_tol) == fineness.fine,
        ),
        Check::at_most("φ'(x₀) − I", phi_identity_error, JACOBIAN_TOL),
    ];
    if map.constant_rank {
        checks.push(Check::at_most(
            "max_residual",
            max_residual,
            tol.residual_tol,
        ));
    }
    let summary = json!({
        "map": map.name,
        "x0": to_vec(&map.x0),
        "max_residual": max_residual,
        "locally_fine": fineness.fine,
        "witnesses": fineness.witnesses.len(),
        "constant_rank": map.constant_rank,
        "valid_radius": pair.valid_radius,
        "sample_radius": radius,
        "samples": count,
        "phi_identity_error": phi_identity_error,
    });
    Ok((summary, checks, Vec::new()))
}

/// Tangent and complement dimensions at `X`, chart round trips, and the
/// chart derivative against the identity and finite differences.
fn chart(config: &ExperimentConfig) -> Outcome {
    let inputs = config.inputs();
    let tol = &config.tolerances;
    let x = inputs.matrix("X")?;
    let p = point_for(&x, inputs.opt_matrix("X_plus")?)?;
    let samples = inputs.usize_or("samples", 200)?;
    let report = verify_chart_maps_manifold(&p, samples, config.seed, tol)?;

    let (m, n) = p.shape();
    let r = p.rank();
    let radius = p.gen_inv().ball_radius().min(10.0);
    let mut rng = random::seeded(config.seed ^ 0xd1ff);
    let mut identity_error: f64 = 0.0;
    let mut fd_error: f64 = 0.0;
    for _ in 0..20 {
        let dt = random::gaussian_matrix(&mut rng, m, n);
        let image = chart_derivative(&p, p.x(), &dt)?;
        identity_error = identity_error.max((&image - &dt).norm() / (1.0 + dt.norm()));

        let e = random::gaussian_matrix(&mut rng, m, n);
        let t = p.x() + &e * (0.3 * radius / spectral_norm(&e));
        let h = 1e-6 * radius.min(1.0);
        let fd =
            (chart_forward(&p, &(&t + &dt * h))? - chart_forward(&p, &(&t - &dt * h))?) / (2.0 * h);
        let exact = chart_derivative(&p, &t, &dt)?;
        fd_error = fd_error.max((&fd - &exact).norm() / exact.norm().max(1.0));
    }

    let dim_tangent = r * (m + n - r);
    let dim_complement = (m - r) * (n - r);
    let checks = vec![
        Check::holds("dim M(X) = r(m+n−r)", report.dim_tangent == dim_tangent),
        Check::holds(
            "dim 𝔼_X = (m−r)(n−r)",
            report.dim_complement == dim_complement,
        ),
        Check::at_most(
            "roundtrip_max_residual",
            report.roundtrip_max_residual,
            1e-10,
        ),
        Check::at_most(
            "tangency_max_residual",
            report.tangency_max_residual,
            tol.residual_tol,
        ),
        Check::holds(
            "every preimage keeps rank and avoids N(X⁺)",
            report.failures == 0,
        ),
        Check::at_most("derivative at X minus identity", identity_error, 1e-12),
        Check::at_most("derivative vs finite differences", fd_error, 1e-6),
    ];
    let mut summary = serde_json::to_value(report).expect("chart report serializes");
    summary["expected_dim_tangent"] = json!(dim_tangent);
    summary["expected_dim_complement"] = json!(dim_complement);
    summary["derivative_identity_error"] = json!(identity_error);
    summary["derivative_fd_error"] = json!(fd_error);
    Ok((summary, checks, Vec::new()))
}

/// Closed form of `ψ` for the families that have one.
fn closed_form(family: &str, v: &Vector) -> Option<Vector> {
    match family {
        "circle" => Some(Vector::from_element(1, (1.0 - v[0] * v[0]).sqrt())),
        "paraboloid" => Some(Vector::from_element(1, v[0] * v[0] + v[1] * v[1])),
        _ => None,
    }
}

/// Two polylines from `v0` to `target`: axis by axis in order and in
/// reverse order, or for a one-dimensional base a direct segment and an
/// overshooting detour.
fn integration_paths(v0: &Vector, target: &Vector) -> (Vec<Vector>, Vec<Vector>) {
    let k = v0.len();
    if k == 1 {
        let d = target - v0;
        return (
            vec![v0.clone(), target.clone()],
            vec![v0.clone(), v0 - &d * 0.6, v0 + &d * 1.4, target.clone()],
        );
    }
    let walk = |order: Vec<usize>| {
        let mut path = vec![v0.clone()];
        let mut cur = v0.clone();
        for i in order {
            cur[i] = target[i];
            path.push(cur.clone());
        }
        path
    };
    (walk((0..k).collect()), walk((0..k).rev().collect()))
}

/// Integrates a patch of a built-in family and measures tangency, path
/// dependence, and the closed-form error where one is known.
fn frobenius(config: &ExperimentConfig) -> Outcome {
    let inputs = config.inputs();
    let tol = &config.tolerances;
    let name = inputs
        .opt_string("family")?
        .unwrap_or_else(|| "circle".into());
    let fam = families::builtin(&name)?;
    let frame = fam.frame()?;
    let k = frame.m0().dim();
    let radius = inputs.f64_or("radius", if k == 1 { 0.9 } else { 0.25 })?;
    let v0 = frame.m0_coords(frame.base_point());
    let target = inputs
        .opt_vector("target")?
        .unwrap_or_else(|| v0.add_scalar(0.5));
    if target.len() != k {
        return Err(geninv_core::Error::Shape(format!("target must have length {k}")).into());
    }

    let patch = integrate_patch(&fam.family, &frame, radius, tol.grid_step, tol.ode_step)?;
    let angle = verify_tangency(&patch, &fam.family)?;
    let (path1, path2) = integration_paths(&v0, &target);
    let residual =
        integrability_residual(&fam.family, &frame, &target, (&path1, &path2), tol.ode_step)?;
    let max_error = closed_form(fam.name, &v0).map(|_| {
        patch
            .grid()
            .iter()
            .zip(patch.psi_values())
            .map(|(v, w)| (w - closed_form(fam.name, v).expect("closed form")).amax())
            .fold(0.0, f64::max)
    });

    let mut checks = Vec::new();
    if fam.integrable {
        checks.push(Check::at_most("max_tangency_angle", angle, TANGENCY_BOUND));
        checks.push(Check::at_most(
            "integrability_residual",
            residual,
            tol.residual_tol,
        ));
        if let Some(e) = max_error {
            checks.push(Check::at_most("max_error", e, CLOSED_FORM_BOUND));
        }
    } else {
        checks.push(Check::at_least(
            "integrability_residual",
            residual,
            NON_INTEGRABLE_BOUND,
        ));
    }
    let summary = json!({
        "family": fam.name,
        "integrable": fam.integrable,
        "x0": to_vec(frame.base_point()),
        "radius": radius,
        "grid_step": patch.grid_step(),
        "ode_step": patch.step(),
        "points": patch.len(),
        "target": to_vec(&target),
        "max_tangency_angle": angle,
        "integrability_residual": residual,
        "max_error": max_error,
    });
    Ok((summary, checks, vec![("patch", patch.to_csv())]))
}

/// Co-final membership of points given as vectors (`"points"`) or, for the
/// operator family, as matrices (`"operators"`, vectorized column-major).
fn cofinal(config: &ExperimentConfig) -> Outcome {
    let inputs = config.inputs();
    let name = inputs.string("family")?;
    let fam = families::builtin(&name)?;
    let frame = match inputs.opt_subspace("e_star")? {
        Some(e_star) => geninv_core::SplitFrame::new(&fam.family, &fam.x0, e_star)?,
        None => fam.frame()?,
    };
    let mut points = inputs.opt_vectors("points")?.unwrap_or_default();
    for op in inputs.opt_matrices("operators")?.unwrap_or_default() {
        points.push(vectorize(&op));
    }
    if points.is_empty() {
        return Err(geninv_core::Error::InvalidInput("no points or operators given".into()).into());
    }
    let results: Vec<bool> = points
        .iter()
        .map(|x| cofinal_membership(&fam.family, &frame, x))
        .collect::<geninv_core::Result<_>>()?;

    let mut checks = Vec::new();
    if let Some(expected) = inputs.opt_bools("expected")? {
        checks.push(Check::holds(
            "membership matches expected",
            expected == results,
        ));
    }
    let rows: Vec<Value> = points
        .iter()
        .zip(&results)
        .map(|(x, &c)| json!({"point": to_vec(x), "cofinal": c}))
        .collect();
    let summary = json!({
        "family": fam.name,
        "e_star_dim": frame.e_star().dim(),
        "results": rows,
    });
    Ok((summary, checks, Vec::new()))
}

/// Registered experiments, families and maps, one per line.
pub fn listing() -> String {
    let mut out = String::new();
    out.push_str("experiments:\n");
    for e in EXPERIMENTS {
        out.push_str(&format!("  {e}\n"));
    }
    out.push_str("families:\n");
    for f in BUILTIN_FAMILIES {
        out.push_str(&format!("  {f}\n"));
    }
    out.push_str("maps:\n");
    for m in BUILTIN_MAPS {
        out.push_str(&format!("  {m}\n"));
    }
    out
}
