use std::f64::consts::PI;

use carnot_cut::cutlocus::{
    classify, cut_distance, recover_covectors, sigma_gradients, sigma_psi, sigma_ray_root, ConjugateFlag,
    CutClassification, Multiplicity,
};
use carnot_cut::extremal::{endpoint_at_cut, geodesic, hamiltonian_flow};
use carnot_cut::group::{inverse, mul};
use carnot_cut::oracle::{direct_minimize, shoot, OracleConfig, OracleResult, Witness};
use carnot_cut::{Covector, GroupPoint, GroupShape, Mat, Vector, DEFAULT_SV_TOL};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use serde_json::{json, Value};

use crate::io::{coordinate_header, coordinates, csv_table, json_text, num, CovectorJson, PointJson};
use crate::{CliError, Format, OracleMethod, SampleMode};

/// Default agreement required by `geodesic --check`, relative to `max(1, |γ|∞)`.
pub const CHECK_TOL: f64 = 1e-8;
/// Zero-set tolerance for `sample sigma`.
pub const SIGMA_TOL: f64 = 1e-10;

/// Text to emit, plus a cross-check failure to report after emitting it.
pub struct Output {
    pub text: String,
    pub failure: Option<CliError>,
}

impl From<String> for Output {
    fn from(text: String) -> Self {
        Output { text, failure: None }
    }
}

/// RK4 steps for `hamiltonian_flow` to reach `CHECK_TOL` on `[0, s]`.
fn flow_steps(s: f64, cov: &Covector) -> usize {
    let rate = cov.tau.norm().max(cov.speed()).max(1.0);
    (2000.0 * s.abs() * rate).ceil().max(1.0) as usize
}

pub fn geodesic_cmd(cov: &Covector, times: &[f64], check: Option<f64>, format: Format) -> Result<Output, CliError> {
    if let Some(s) = times.iter().find(|s| !s.is_finite()) {
        return Err(CliError::Input(format!("time {s} is not finite")));
    }
    let points: Vec<GroupPoint> = times.iter().map(|&s| geodesic(s, cov)).collect();
    let mut failure = None;
    if let Some(tol) = check {
        for (&s, g) in times.iter().zip(&points) {
            let flow = hamiltonian_flow(s, cov, flow_steps(s, cov))?;
            let end = &flow.last().expect("flow has at least one state").0;
            let err = end.max_abs_diff(g) / g.to_flat().amax().max(1.0);
            if err > tol {
                failure = Some(CliError::Check(format!(
                    "closed form and Hamiltonian flow differ by {err:e} at s = {s} (tolerance {tol:e})"
                )));
                break;
            }
        }
    }
    let text = match format {
        Format::Json => json_text(
            &times
                .iter()
                .zip(&points)
                .map(|(&s, g)| json!({ "s": s, "point": PointJson::from_point(g) }))
                .collect::<Vec<_>>(),
        )?,
        Format::Csv => {
            let mut header = vec!["s".to_owned()];
            header.extend(coordinate_header(cov.shape()));
            let rows: Vec<Vec<String>> = times
                .iter()
                .zip(&points)
                .map(|(&s, g)| std::iter::once(num(s)).chain(coordinates(g)).collect())
                .collect();
            csv_table(&header, &rows)?
        }
    };
    Ok(Output { text, failure })
}

fn multiplicity_str(m: Multiplicity) -> &'static str {
    match m {
        Multiplicity::Unique => "unique",
        Multiplicity::Multiple => "multiple",
    }
}

fn conjugate_str(c: ConjugateFlag) -> &'static str {
    match c {
        ConjugateFlag::Yes => "yes",
        ConjugateFlag::No => "no",
        ConjugateFlag::Undecided => "undecided",
    }
}

#[derive(Serialize)]
struct Classification {
    verdict: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    multiplicity: Option<&'static str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    conjugate: Option<&'static str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    distance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    covector: Option<CovectorJson>,
}

fn classification(g: &GroupPoint, sv_tol: f64) -> Result<Classification, CliError> {
    Ok(match classify(g, sv_tol)? {
        CutClassification::NotCut => Classification {
            verdict: "not_cut",
            multiplicity: None,
            conjugate: None,
            distance: None,
            covector: None,
        },
        CutClassification::Cut {
            multiplicity,
            conjugate,
            distance,
        } => Classification {
            verdict: "cut",
            multiplicity: Some(multiplicity_str(multiplicity)),
            conjugate: Some(conjugate_str(conjugate)),
            distance: Some(distance),
            covector: Some(CovectorJson::from_covector(
                &recover_covectors(&g.x, &g.t, sv_tol)?.canonical_covector(),
            )),
        },
    })
}

/// `base⁻¹·g`, the point as seen from `base`.
pub fn relative(g: &GroupPoint, base: Option<&GroupPoint>) -> Result<GroupPoint, CliError> {
    match base {
        Some(b) => Ok(mul(&inverse(b), g)?),
        None => Ok(g.clone()),
    }
}

pub fn classify_cmd(g: &GroupPoint, sv_tol: f64, format: Format) -> Result<Output, CliError> {
    let c = classification(g, sv_tol)?;
    let text = match format {
        Format::Json => json_text(&c)?,
        Format::Csv => {
            let header: Vec<String> = ["verdict", "multiplicity", "conjugate", "distance"].map(String::from).to_vec();
            let row = vec![
                c.verdict.to_owned(),
                c.multiplicity.unwrap_or("").to_owned(),
                c.conjugate.unwrap_or("").to_owned(),
                c.distance.map(num).unwrap_or_default(),
            ];
            csv_table(&header, &[row])?
        }
    };
    Ok(text.into())
}

fn oracle_entry(res: &OracleResult) -> Value {
    let converged = res.converged().count();
    match &res.witness {
        Witness::Covector(c) => json!({
            "distance": res.distance,
            "residual": res.residual,
            "converged_starts": converged,
            "covector": CovectorJson::from_covector(c),
        }),
        Witness::Control(ctrl) => json!({
            "distance": res.distance,
            "residual": res.residual,
            "converged_starts": converged,
            "segments": ctrl.segments.len(),
        }),
    }
}

pub fn oracle_cmd(
    g: &GroupPoint,
    cfg: &OracleConfig,
    method: OracleMethod,
    compare: bool,
    format: Format,
) -> Result<Output, CliError> {
    let closed_form = if compare {
        if !classify(g, DEFAULT_SV_TOL)?.is_cut() {
            return Err(CliError::Domain(
                "--compare needs a cut point: the closed-form distance is known on the cut locus".into(),
            ));
        }
        Some(cut_distance(&g.x, &g.t, DEFAULT_SV_TOL)?)
    } else {
        None
    };
    let mut runs: Vec<(&'static str, Result<OracleResult, carnot_cut::Error>)> = Vec::new();
    if matches!(method, OracleMethod::Shoot | OracleMethod::Both) {
        runs.push(("shoot", shoot(g, cfg)));
    }
    if matches!(method, OracleMethod::Direct | OracleMethod::Both) {
        runs.push(("direct", direct_minimize(g, cfg)));
    }
    let mut failure = None;
    let mut report = serde_json::Map::new();
    let mut rows = Vec::new();
    for (name, run) in &runs {
        match run {
            Ok(res) => {
                let mut entry = oracle_entry(res);
                if let Some(d) = closed_form {
                    entry["closed_form"] = json!(d);
                    entry["delta"] = json!(res.distance - d);
                }
                rows.push(vec![
                    name.to_string(),
                    num(res.distance),
                    num(res.residual),
                    closed_form.map(num).unwrap_or_default(),
                    closed_form.map(|d| num(res.distance - d)).unwrap_or_default(),
                ]);
                report.insert(name.to_string(), entry);
            }
            Err(carnot_cut::Error::NoConvergence { best_residual }) => {
                report.insert(name.to_string(), json!({ "error": "no_convergence", "best_residual": best_residual }));
                rows.push(vec![name.to_string(), String::new(), num(*best_residual), String::new(), String::new()]);
                failure.get_or_insert(CliError::NoConvergence(format!(
                    "{name}: no start converged (best residual {best_residual:e})"
                )));
            }
            Err(e) => return Err(e.clone().into()),
        }
    }
    let text = match format {
        Format::Json => json_text(&Value::Object(report))?,
        Format::Csv => {
            let header = ["method", "distance", "residual", "closed_form", "delta"].map(String::from).to_vec();
            csv_table(&header, &rows)?
        }
    };
    Ok(Output { text, failure })
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn random_covector(rng: &mut ChaCha8Rng, shape: GroupShape) -> Covector {
    let GroupShape { q, p } = shape;
    Covector {
        xi: Mat::from_fn(q, p, |_, _| normal(rng)),
        eta: Vector::from_fn(p, |_, _| normal(rng)),
        tau: Vector::from_fn(q, |_, _| normal(rng)),
    }
}

fn classification_cells(c: &Classification) -> Vec<String> {
    vec![
        c.verdict.to_owned(),
        c.multiplicity.unwrap_or("").to_owned(),
        c.conjugate.unwrap_or("").to_owned(),
        c.distance.map(num).unwrap_or_default(),
    ]
}

/// Unit-speed covectors with `|τ| ≤ 2π`, so that `γ(1)` lies on the unit
/// sphere. Every fourth sample takes `|τ| = 2π` exactly, where the sphere
/// meets the cut locus.
fn sphere_samples(shape: GroupShape, count: usize, rng: &mut ChaCha8Rng) -> Result<Vec<GroupPoint>, CliError> {
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let mut cov = random_covector(rng, shape);
        if cov.speed() == 0.0 || cov.tau.norm() == 0.0 {
            continue;
        }
        cov = cov.unit_speed()?;
        let radius = if out.len() % 4 == 3 {
            2.0 * PI
        } else {
            2.0 * PI * rng.random::<f64>().powf(1.0 / shape.q as f64)
        };
        cov.tau *= radius / cov.tau.norm();
        out.push(geodesic(1.0, &cov));
    }
    Ok(out)
}

pub fn sample_cmd(
    shape: GroupShape,
    mode: SampleMode,
    count: usize,
    seed: u64,
    sv_tol: f64,
    format: Format,
) -> Result<Output, CliError> {
    if count == 0 {
        return Err(CliError::Input("--count must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut header = coordinate_header(shape);
    let mut records: Vec<(GroupPoint, Vec<String>)> = Vec::with_capacity(count);
    match mode {
        SampleMode::Sphere | SampleMode::Cutlocus => {
            header.extend(["verdict", "multiplicity", "conjugate", "distance"].map(String::from));
            let points = if mode == SampleMode::Sphere {
                sphere_samples(shape, count, &mut rng)?
            } else {
                (0..count)
                    .map(|i| {
                        let mut cov = random_covector(&mut rng, shape);
                        // Every third sample has η = 0, which reaches the
                        // unique-minimizer part of the cut locus.
                        if i % 3 == 2 {
                            cov.eta.fill(0.0);
                        }
                        endpoint_at_cut(&cov)
                    })
                    .collect::<Result<Vec<_>, _>>()?
            };
            for g in points {
                let cells = classification_cells(&classification(&g, sv_tol)?);
                records.push((g, cells));
            }
        }
        SampleMode::Sigma => {
            if shape.p != 1 || shape.q < 2 {
                return Err(CliError::Input(format!(
                    "sigma mode needs p = 1 and q ≥ 2, got shape {},{}",
                    shape.q, shape.p
                )));
            }
            header.extend(["psi", "discriminant"].map(String::from));
            let mut attempts = 0;
            while records.len() < count {
                attempts += 1;
                if attempts > 1000 * count {
                    return Err(CliError::Domain("too few rays met the zero set".into()));
                }
                let x = Vector::from_fn(shape.q, |_, _| normal(&mut rng));
                let d = Vector::from_fn(shape.q, |_, _| normal(&mut rng));
                let Some(r) = sigma_ray_root(&x, &d)? else { continue };
                let t = &d * r;
                let psi = sigma_psi(&x, &t)?;
                if psi.is_nan() || psi.abs() >= SIGMA_TOL {
                    continue;
                }
                let disc = sigma_gradients(&x, &t)?.discriminant;
                let g = GroupPoint::new(Mat::from_column_slice(shape.q, 1, x.as_slice()), Vector::zeros(1), t)?;
                records.push((g, vec![num(psi), num(disc)]));
            }
        }
    }
    let text = match format {
        Format::Csv => {
            let rows: Vec<Vec<String>> = records
                .iter()
                .map(|(g, extra)| coordinates(g).into_iter().chain(extra.iter().cloned()).collect())
                .collect();
            csv_table(&header, &rows)?
        }
        Format::Json => {
            let extra_names = &header[shape.dim()..];
            let rows: Vec<Value> = records
                .iter()
                .map(|(g, extra)| {
                    let mut row = serde_json::Map::new();
                    row.insert("point".into(), json!(PointJson::from_point(g)));
                    for (name, cell) in extra_names.iter().zip(extra) {
                        let value = cell
                            .parse::<f64>()
                            .map(|v| json!(v))
                            .unwrap_or_else(|_| if cell.is_empty() { Value::Null } else { json!(cell) });
                        row.insert(name.clone(), value);
                    }
                    Value::Object(row)
                })
                .collect();
            json_text(&rows)?
        }
    };
    Ok(text.into())
}
