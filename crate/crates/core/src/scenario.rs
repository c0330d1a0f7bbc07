//! Scenario files and reports.
//!
//! A scenario is one JSON object with a `kind`, an optional `seed`, optional
//! `tolerances` overrides and the kind-specific payload fields at top level.
//! Reports are deterministic: maps are ordered and nothing time-dependent is
//! serialized.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;
use serde::de::{self, DeserializeOwned, MapAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize};
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::flow::{integral_indices, integrate, lax_residual, poisson_bracket, FlowConfig};
use crate::geometry::MetricField;
use crate::holonomy::{verify_realization, RealizationOptions};
use crate::jordan::{JordanSpec, RealizedJordan};
use crate::linalg::{check_role, commutator, from_rows, rank, to_rows, BilinearForm, Role, ROLE_TOL};
use crate::poly::MatrixPolynomial;
use crate::projective::{
    bmk_check, comparison_tensor, constant_curvature_fit, curvature_operator, gbar_roundtrip, geodesic_coincidence,
    sectional_pair_space, RationalMetric, RoundSphere,
};
use crate::random;
use crate::sectional::{
    bianchi_residual, build_rep, centralizer, express_polynomial, sectional_residual, solution_space,
    spectrum_verify, uniqueness_test, SectionalRep,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    SectionalVerify,
    Spectrum,
    Flow,
    Holonomy,
    Projective,
    Uniqueness,
}

impl Kind {
    pub const ALL: [Kind; 6] =
        [Kind::SectionalVerify, Kind::Spectrum, Kind::Flow, Kind::Holonomy, Kind::Projective, Kind::Uniqueness];

    pub fn as_str(self) -> &'static str {
        match self {
            Kind::SectionalVerify => "sectional-verify",
            Kind::Spectrum => "spectrum",
            Kind::Flow => "flow",
            Kind::Holonomy => "holonomy",
            Kind::Projective => "projective",
            Kind::Uniqueness => "uniqueness",
        }
    }

    /// Name of the CLI subcommand running this kind.
    pub fn command(self) -> &'static str {
        match self {
            Kind::SectionalVerify => "verify",
            other => other.as_str(),
        }
    }

    /// Tolerance names with defaults and a one-line meaning.
    pub fn tolerance_defaults(self) -> &'static [(&'static str, f64, &'static str)] {
        match self {
            Kind::SectionalVerify => &[
                ("sectional", 1e-10, "max_X ||[R(X),A] - [X,B]|| / (1 + ||A|| + ||B||)"),
                ("symmetry", 1e-10, "trace-pairing self-adjointness of R"),
                ("bianchi", 1e-10, "normalized cyclic sum over random triples"),
                ("commute", 1e-10, "||[A,B]|| / (||A|| ||B||)"),
                ("poly_fit", 1e-9, "relative residual of B = q(A)"),
            ],
            Kind::Spectrum => &[("spectrum", 1e-8, "backward error of each predicted eigenvalue")],
            Kind::Flow => &[
                ("drift", 1e-6, "relative drift of nontrivial shift integrals"),
                ("energy", 1e-6, "relative drift of energy and Casimir"),
                ("bracket", 1e-9, "Poisson bracket of integral pairs relative to |x| times the gradient term sizes"),
                ("lax", 1e-11, "normalized Lax defect on the λ-grid"),
            ],
            Kind::Holonomy => &[
                ("algebraic", 1e-12, "extension-tensor identities relative to (1+||A||)(1+||B||)"),
                ("parallel", 1e-8, "||∇A|| at sample points"),
                ("curvature", 1e-8, "||R(0) - R_formal||"),
                ("fd", 1e-6, "finite-difference curvature at the origin"),
                ("cross", 1e-10, "second curvature implementation at the origin"),
            ],
            Kind::Projective => &[
                ("a_symmetry", 1e-12, "g-symmetry of the comparison tensor"),
                ("roundtrip", 1e-10, "relative error reconstructing ḡ from g and A"),
                ("compatibility", 1e-6, "max over coordinate directions of the ∇A equation"),
                ("bmk", 1e-6, "sectional identity for the curvature of g"),
                ("curvature_symmetry", 1e-10, "self-adjointness of the curvature operator"),
                ("constant_curvature", 1e-8, "||R - k id|| with fitted k"),
                ("hausdorff", 1e-4, "distance between geodesic point sets"),
            ],
            Kind::Uniqueness => &[
                ("consistency", 1e-8, "relative residual of the joint linear system"),
                ("scalar", 1e-9, "||R - k id|| relative fit and |k - expected|"),
            ],
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Tolerance overrides. Duplicate keys are rejected.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Tolerances(pub BTreeMap<String, f64>);

impl<'de> Deserialize<'de> for Tolerances {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = Tolerances;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a map from tolerance name to number")
            }
            fn visit_map<M: MapAccess<'de>>(self, mut m: M) -> std::result::Result<Tolerances, M::Error> {
                let mut out = BTreeMap::new();
                while let Some((k, v)) = m.next_entry::<String, f64>()? {
                    if out.contains_key(&k) {
                        return Err(de::Error::custom(format!("duplicate tolerance key `{k}`")));
                    }
                    out.insert(k, v);
                }
                Ok(Tolerances(out))
            }
        }
        d.deserialize_map(V)
    }
}

type Rows = Vec<Vec<f64>>;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RepInput {
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub basis: Option<String>,
    pub matrix: Rows,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyPayload {
    #[serde(default)]
    pub n: Option<usize>,
    pub jordan_spec: JordanSpec,
    #[serde(default)]
    pub p: Option<MatrixPolynomial>,
    /// Explicit `B`; defaults to `p(A)`.
    #[serde(default, rename = "B")]
    pub b: Option<Rows>,
    /// User-supplied operator; defaults to the operator built from `p`.
    #[serde(default)]
    pub r: Option<RepInput>,
    #[serde(default = "default_bianchi_samples")]
    pub bianchi_samples: usize,
}

fn default_bianchi_samples() -> usize {
    200
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumPayload {
    #[serde(default)]
    pub n: Option<usize>,
    pub jordan_spec: JordanSpec,
    pub p: MatrixPolynomial,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowPayload {
    #[serde(rename = "A")]
    pub a: Rows,
    pub p: MatrixPolynomial,
    #[serde(default)]
    pub g: Option<Rows>,
    pub x0: Rows,
    pub h: f64,
    #[serde(rename = "T")]
    pub t_end: f64,
    #[serde(default)]
    pub lambda_grid: Vec<f64>,
    #[serde(default)]
    pub sample_every: Option<usize>,
    #[serde(default = "default_bracket_points")]
    pub bracket_points: usize,
}

fn default_bracket_points() -> usize {
    10
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HolonomyPayload {
    #[serde(default)]
    pub n: Option<usize>,
    pub jordan_spec: JordanSpec,
    #[serde(default = "default_sample_points")]
    pub sample_points: usize,
    #[serde(default = "default_true")]
    pub fd_check: bool,
    #[serde(default = "default_fd_step")]
    pub fd_step: f64,
}

fn default_sample_points() -> usize {
    20
}

fn default_true() -> bool {
    true
}

fn default_fd_step() -> f64 {
    1e-4
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MetricSpec {
    Rational { coeffs: Vec<Vec<crate::projective::Rational>> },
    RoundSphere,
}

impl MetricSpec {
    pub fn build(&self) -> Result<Box<dyn MetricField>> {
        Ok(match self {
            MetricSpec::Rational { coeffs } => Box::new(RationalMetric::new(coeffs.clone())?),
            MetricSpec::RoundSphere => Box::new(RoundSphere),
        })
    }

    fn dim(&self) -> usize {
        match self {
            MetricSpec::Rational { coeffs } => coeffs.len(),
            MetricSpec::RoundSphere => 2,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeodesicSpec {
    #[serde(default)]
    pub origin: Option<Vec<f64>>,
    #[serde(default = "default_directions")]
    pub directions: usize,
    #[serde(default = "default_length")]
    pub length: f64,
    #[serde(default = "default_ds")]
    pub step: f64,
}

fn default_directions() -> usize {
    20
}

fn default_length() -> f64 {
    0.3
}

fn default_ds() -> f64 {
    1e-3
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectivePayload {
    pub metric_g: MetricSpec,
    #[serde(default)]
    pub metric_gbar: Option<MetricSpec>,
    pub domain_box: Vec<[f64; 2]>,
    #[serde(default)]
    pub points: Vec<Vec<f64>>,
    /// Extra points drawn uniformly from the box with the scenario seed.
    #[serde(default)]
    pub random_points: usize,
    #[serde(default)]
    pub geodesics: Option<GeodesicSpec>,
    /// Report the dimension of sectional pairs admitted by the curvature of `g`.
    #[serde(default)]
    pub pair_space: bool,
    #[serde(default)]
    pub expect_constant_curvature: bool,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniquenessExpect {
    #[serde(default)]
    pub solution_dimension: Option<usize>,
    #[serde(default)]
    pub scalar: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniquenessPayload {
    #[serde(rename = "A")]
    pub a: Rows,
    #[serde(rename = "B")]
    pub b: Rows,
    #[serde(rename = "A2")]
    pub a2: Rows,
    #[serde(rename = "B2")]
    pub b2: Rows,
    #[serde(default)]
    pub g: Option<Rows>,
    #[serde(default)]
    pub expect: UniquenessExpect,
}

#[derive(Debug, Clone)]
pub enum Payload {
    SectionalVerify(VerifyPayload),
    Spectrum(SpectrumPayload),
    Flow(FlowPayload),
    Holonomy(HolonomyPayload),
    Projective(ProjectivePayload),
    Uniqueness(UniquenessPayload),
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub kind: Kind,
    pub seed: u64,
    /// Effective tolerances: defaults merged with overrides.
    pub tolerances: BTreeMap<String, f64>,
    pub payload: Payload,
    /// The input document, echoed into the report.
    pub source: Value,
}

#[derive(Deserialize)]
struct Envelope {
    kind: Kind,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    tolerances: Tolerances,
    #[serde(flatten)]
    rest: Map<String, Value>,
}

fn json_path(p: &serde_path_to_error::Path) -> String {
    let s = p.to_string();
    if s == "." || s.is_empty() {
        "$".into()
    } else if s.starts_with('[') {
        format!("${s}")
    } else {
        format!("$.{s}")
    }
}

fn schema(path: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Schema { path: path.into(), message: message.into() }
}

fn strip_position(msg: String) -> String {
    match msg.find(" at line ") {
        Some(i) => msg[..i].to_string(),
        None => msg,
    }
}

fn parse_payload<T: DeserializeOwned>(rest: Map<String, Value>) -> Result<T> {
    serde_path_to_error::deserialize(Value::Object(rest))
        .map_err(|e| schema(json_path(e.path()), strip_position(e.inner().to_string())))
}

fn matrix(rows: &Rows, path: &str) -> Result<DMatrix<f64>> {
    let m = from_rows(rows).map_err(|e| schema(path, e.to_string()))?;
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(schema(path, format!("expected a non-empty square matrix, got {}x{}", m.nrows(), m.ncols())));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(schema(path, "non-finite entry"));
    }
    Ok(m)
}

fn sized(m: &DMatrix<f64>, n: usize, path: &str) -> Result<()> {
    if m.nrows() != n {
        return Err(schema(path, format!("expected {n}x{n}, got {}x{}", m.nrows(), m.ncols())));
    }
    Ok(())
}

fn check_spec(spec: &JordanSpec, n: Option<usize>) -> Result<()> {
    spec.validate().map_err(|e| schema("$.jordan_spec.blocks", e.to_string()))?;
    if let Some(n) = n {
        let total = spec.dim();
        if total != n {
            return Err(schema("$.jordan_spec.blocks", format!("block sizes sum to {total}, expected n = {n}")));
        }
    }
    Ok(())
}

fn form(rows: &Option<Rows>, n: usize, path: &str) -> Result<BilinearForm> {
    match rows {
        None => Ok(BilinearForm::identity(n)),
        Some(r) => {
            let m = matrix(r, path)?;
            sized(&m, n, path)?;
            BilinearForm::new(m).map_err(|e| schema(path, e.to_string()))
        }
    }
}

impl Payload {
    fn validate(&self) -> Result<()> {
        match self {
            Payload::SectionalVerify(p) => {
                check_spec(&p.jordan_spec, p.n)?;
                let n = p.jordan_spec.dim();
                if p.p.is_none() && p.b.is_none() {
                    return Err(schema("$", "one of `p` or `B` is required"));
                }
                if let Some(b) = &p.b {
                    sized(&matrix(b, "$.B")?, n, "$.B")?;
                }
                if let Some(r) = &p.r {
                    let d = n * (n - 1) / 2;
                    if r.basis.as_deref().is_some_and(|b| b != "lex-wedge") {
                        return Err(schema("$.r.basis", "only `lex-wedge` is supported"));
                    }
                    if r.n.is_some_and(|rn| rn != n) {
                        return Err(schema("$.r.n", format!("expected {n}")));
                    }
                    let m = from_rows(&r.matrix).map_err(|e| schema("$.r.matrix", e.to_string()))?;
                    if m.nrows() != d || m.ncols() != d {
                        return Err(schema("$.r.matrix", format!("expected {d}x{d}, got {}x{}", m.nrows(), m.ncols())));
                    }
                }
                Ok(())
            }
            Payload::Spectrum(p) => check_spec(&p.jordan_spec, p.n),
            Payload::Holonomy(p) => {
                check_spec(&p.jordan_spec, p.n)?;
                if !(p.fd_step > 0.0) {
                    return Err(schema("$.fd_step", "must be positive"));
                }
                Ok(())
            }
            Payload::Flow(p) => {
                let a = matrix(&p.a, "$.A")?;
                let n = a.nrows();
                sized(&matrix(&p.x0, "$.x0")?, n, "$.x0")?;
                form(&p.g, n, "$.g")?;
                if !(p.h > 0.0 && p.h.is_finite()) {
                    return Err(schema("$.h", "must be positive"));
                }
                if !(p.t_end > 0.0 && p.t_end.is_finite()) {
                    return Err(schema("$.T", "must be positive"));
                }
                Ok(())
            }
            Payload::Projective(p) => {
                let n = p.metric_g.dim();
                if n == 0 {
                    return Err(schema("$.metric_g.coeffs", "empty metric"));
                }
                if let Some(gb) = &p.metric_gbar {
                    if gb.dim() != n {
                        return Err(schema("$.metric_gbar", format!("dimension {} differs from metric_g ({n})", gb.dim())));
                    }
                    gb.build().map_err(|e| schema("$.metric_gbar.coeffs", e.to_string()))?;
                }
                p.metric_g.build().map_err(|e| schema("$.metric_g.coeffs", e.to_string()))?;
                if p.domain_box.len() != n {
                    return Err(schema("$.domain_box", format!("expected {n} intervals, got {}", p.domain_box.len())));
                }
                for (i, [lo, hi]) in p.domain_box.iter().enumerate() {
                    if !(lo < hi) {
                        return Err(schema(format!("$.domain_box[{i}]"), "empty interval"));
                    }
                }
                for (k, x) in p.points.iter().enumerate() {
                    let inside = x.len() == n && x.iter().zip(&p.domain_box).all(|(v, [lo, hi])| lo <= v && v <= hi);
                    if !inside {
                        return Err(schema(format!("$.points[{k}]"), "point outside the domain box"));
                    }
                }
                if let Some(geo) = &p.geodesics {
                    if let Some(o) = &geo.origin {
                        if o.len() != n {
                            return Err(schema("$.geodesics.origin", format!("expected {n} coordinates")));
                        }
                    }
                    if !(geo.length > 0.0 && geo.step > 0.0) || geo.directions == 0 {
                        return Err(schema("$.geodesics", "length, step and directions must be positive"));
                    }
                    if p.metric_gbar.is_none() {
                        return Err(schema("$.geodesics", "geodesic comparison needs metric_gbar"));
                    }
                }
                Ok(())
            }
            Payload::Uniqueness(p) => {
                let a = matrix(&p.a, "$.A")?;
                let n = a.nrows();
                for (rows, path) in [(&p.b, "$.B"), (&p.a2, "$.A2"), (&p.b2, "$.B2")] {
                    sized(&matrix(rows, path)?, n, path)?;
                }
                form(&p.g, n, "$.g")?;
                Ok(())
            }
        }
    }
}

/// Parse and validate a scenario document.
pub fn load_scenario(text: &str) -> Result<Scenario> {
    let source: Value = serde_json::from_str(text).map_err(|e| schema("$", strip_position(e.to_string())))?;
    let mut de = serde_json::Deserializer::from_str(text);
    let env: Envelope = serde_path_to_error::deserialize(&mut de)
        .map_err(|e| schema(json_path(e.path()), strip_position(e.inner().to_string())))?;
    let Envelope { kind, seed, tolerances, rest } = env;
    let payload = match kind {
        Kind::SectionalVerify => Payload::SectionalVerify(parse_payload(rest)?),
        Kind::Spectrum => Payload::Spectrum(parse_payload(rest)?),
        Kind::Flow => Payload::Flow(parse_payload(rest)?),
        Kind::Holonomy => Payload::Holonomy(parse_payload(rest)?),
        Kind::Projective => Payload::Projective(parse_payload(rest)?),
        Kind::Uniqueness => Payload::Uniqueness(parse_payload(rest)?),
    };
    payload.validate()?;

    let defaults = kind.tolerance_defaults();
    let mut effective: BTreeMap<String, f64> = defaults.iter().map(|(k, v, _)| (k.to_string(), *v)).collect();
    for (k, v) in tolerances.0 {
        if !effective.contains_key(&k) {
            let known: Vec<&str> = defaults.iter().map(|d| d.0).collect();
            return Err(schema(format!("$.tolerances.{k}"), format!("unknown tolerance for {kind}; expected one of {known:?}")));
        }
        if !(v > 0.0 && v.is_finite()) {
            return Err(schema(format!("$.tolerances.{k}"), "tolerance must be a positive number"));
        }
        effective.insert(k, v);
    }
    Ok(Scenario { kind, seed: seed.unwrap_or(0), tolerances: effective, payload, source })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub library: String,
    pub version: String,
    pub kind: Kind,
    pub seed: u64,
    pub scenario: Value,
    pub tolerances: BTreeMap<String, f64>,
    pub residuals: BTreeMap<String, f64>,
    pub verdicts: BTreeMap<String, bool>,
    pub details: Value,
    pub pass: bool,
    /// Wall-clock seconds. Left unset by [`run`] so that reports stay byte-identical.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runtime: Option<f64>,
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn failed(&self) -> Vec<&str> {
        self.verdicts.iter().filter(|(_, ok)| !**ok).map(|(k, _)| k.as_str()).collect()
    }
}

/// Exit status convention of the command-line harness.
pub fn exit_code(result: &Result<Report>) -> i32 {
    match result {
        Ok(r) if r.pass => 0,
        Ok(_) => 1,
        Err(Error::Schema { .. }) => 2,
        Err(_) => 1,
    }
}

#[derive(Default)]
struct Builder {
    residuals: BTreeMap<String, f64>,
    verdicts: BTreeMap<String, bool>,
}

impl Builder {
    /// Record a residual and its verdict against `tol`.
    fn check(&mut self, name: impl Into<String>, value: f64, tol: f64) {
        let name = name.into();
        self.verdicts.insert(name.clone(), value <= tol);
        self.residuals.insert(name, value);
    }

    fn residual(&mut self, name: impl Into<String>, value: f64) {
        self.residuals.insert(name.into(), value);
    }

    fn verdict(&mut self, name: impl Into<String>, ok: bool) {
        self.verdicts.insert(name.into(), ok);
    }
}

fn context(kind: Kind, e: Error) -> Error {
    match e {
        Error::Schema { .. } => e,
        other => Error::InvalidArgument(format!("{kind} scenario: {other}")),
    }
}

/// Run a validated scenario.
pub fn run(sc: &Scenario) -> Result<Report> {
    let tol = |k: &str| sc.tolerances[k];
    let mut b = Builder::default();
    let details = match &sc.payload {
        Payload::SectionalVerify(p) => run_verify(p, sc.seed, &tol, &mut b),
        Payload::Spectrum(p) => run_spectrum(p, &tol, &mut b),
        Payload::Flow(p) => run_flow(p, sc.seed, &tol, &mut b),
        Payload::Holonomy(p) => run_holonomy(p, sc.seed, &tol, &mut b),
        Payload::Projective(p) => run_projective(p, sc.seed, &tol, &mut b),
        Payload::Uniqueness(p) => run_uniqueness(p, &tol, &mut b),
    }
    .map_err(|e| context(sc.kind, e))?;
    let pass = b.verdicts.values().all(|v| *v);
    Ok(Report {
        library: env!("CARGO_PKG_NAME").to_string(),
        version: VERSION.to_string(),
        kind: sc.kind,
        seed: sc.seed,
        scenario: sc.source.clone(),
        tolerances: sc.tolerances.clone(),
        residuals: b.residuals,
        verdicts: b.verdicts,
        details,
        pass,
        runtime: None,
    })
}

/// Parse, then run.
pub fn run_text(text: &str) -> Result<Report> {
    run(&load_scenario(text)?)
}

fn realize(spec: &JordanSpec) -> Result<RealizedJordan> {
    spec.realize()
}

fn run_verify(p: &VerifyPayload, seed: u64, tol: &dyn Fn(&str) -> f64, b: &mut Builder) -> Result<Value> {
    let rj = realize(&p.jordan_spec)?;
    let (a, g) = (&rj.a, &rj.g);
    let bm = match (&p.b, &p.p) {
        (Some(rows), _) => from_rows(rows)?,
        (None, Some(poly)) => poly.eval_matrix(a),
        (None, None) => unreachable!("validated"),
    };
    check_role(&bm, Role::GSymmetric, g, ROLE_TOL)?;
    let user = p.r.is_some();
    let rep = match (&p.r, &p.p) {
        (Some(r), _) => SectionalRep::from_matrix(from_rows(&r.matrix)?, g)?,
        (None, Some(poly)) => build_rep(a, poly, g)?,
        (None, None) => {
            let (poly, _) = express_polynomial(a, &bm)?;
            build_rep(a, &poly, g)?
        }
    };
    b.check("sectional", sectional_residual(&rep, a, &bm), tol("sectional"));
    b.check("symmetry", rep.symmetry_residual(), tol("symmetry"));
    b.check("bianchi", bianchi_residual(&rep, g, p.bianchi_samples, seed), tol("bianchi"));
    let comm = commutator(a, &bm).norm() / (a.norm() * bm.norm()).max(f64::MIN_POSITIVE);
    b.check("commute", comm, tol("commute"));
    let fitted = match express_polynomial(a, &bm) {
        Ok((q, resid)) => {
            b.check("poly_fit", resid, tol("poly_fit"));
            Some(q)
        }
        Err(Error::NotCommuting { .. } | Error::NotPolynomial { .. }) => {
            b.verdict("poly_fit", false);
            None
        }
        Err(e) => return Err(e),
    };
    let cz = centralizer(a, g)?;
    let image_rank = rank(rep.matrix(), 1e-9);
    Ok(json!({
        "n": rj.dim(),
        "operator_dimension": rep.matrix().nrows(),
        "user_supplied": user,
        "centralizer_dimension": cz.dim(),
        "image_rank": image_rank,
        "at_most_two_blocks": rj.at_most_two_blocks(),
        "fitted_polynomial": fitted.map(|q| q.coeffs().to_vec()),
        "operator": rep.to_json(),
    }))
}

fn run_spectrum(p: &SpectrumPayload, tol: &dyn Fn(&str) -> f64, b: &mut Builder) -> Result<Value> {
    let rj = realize(&p.jordan_spec)?;
    let t = tol("spectrum");
    let rep = spectrum_verify(&rj, &p.p, t)?;
    let worst = rep.matches.iter().map(|m| m.backward_error).fold(0.0, f64::max);
    b.check("spectrum", worst, t);
    let split = rep.parts.iter().map(|p| p.invariance_residual).fold(0.0, f64::max);
    b.residual("invariant_split", split);
    let mut predicted: Vec<f64> = rep.matches.iter().map(|m| m.predicted).collect();
    predicted.sort_by(f64::total_cmp);
    Ok(json!({ "predicted": predicted, "report": rep }))
}

fn run_flow(p: &FlowPayload, seed: u64, tol: &dyn Fn(&str) -> f64, b: &mut Builder) -> Result<Value> {
    let a = from_rows(&p.a)?;
    let n = a.nrows();
    let g = form(&p.g, n, "$.g")?;
    let x0 = from_rows(&p.x0)?;
    check_role(&a, Role::GSymmetric, &g, ROLE_TOL)?;
    check_role(&x0, Role::GSkew, &g, ROLE_TOL)?;
    let rep = build_rep(&a, &p.p, &g)?;
    let mut cfg = FlowConfig::new(p.h, p.t_end);
    if let Some(e) = p.sample_every {
        cfg.sample_every = e;
    }
    let traj = integrate(&x0, &rep, &a, &g, cfg)?;
    let d = &traj.diagnostics;
    b.check("drift", d.max_integral_rel_drift, tol("drift"));
    b.check("energy", d.energy_rel_drift.max(d.casimir_rel_drift), tol("energy"));

    let bm = p.p.eval_matrix(&a);
    let lax = p
        .lambda_grid
        .iter()
        .map(|&l| lax_residual(&x0, &rep, &a, &bm, l))
        .fold(0.0, f64::max);
    if !p.lambda_grid.is_empty() {
        b.check("lax", lax, tol("lax"));
    }

    if p.bracket_points > 0 {
        let idx = integral_indices(n);
        let mut rng = random::rng(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..p.bracket_points {
            let x = random::g_skew(&mut rng, &g);
            for (i, f) in idx.iter().enumerate() {
                for h in &idx[i + 1..] {
                    let (v, scale) = poisson_bracket(*f, *h, &x, &a, &g);
                    if scale > 0.0 {
                        worst = worst.max(v.abs() / scale);
                    }
                }
            }
        }
        b.check("bracket", worst, tol("bracket"));
    }
    Ok(json!({
        "diagnostics": d,
        "final": { "t": traj.final_state.t, "x": to_rows(&traj.final_state.x) },
        "samples": traj.sample_rows(),
    }))
}

fn run_holonomy(p: &HolonomyPayload, seed: u64, tol: &dyn Fn(&str) -> f64, b: &mut Builder) -> Result<Value> {
    let rj = realize(&p.jordan_spec)?;
    let opts = RealizationOptions {
        sample_count: p.sample_points,
        seed,
        fd_check: p.fd_check,
        fd_step: p.fd_step,
        algebraic_tol: tol("algebraic"),
        parallel_tol: tol("parallel"),
        curvature_tol: tol("curvature"),
        fd_tol: tol("fd"),
        cross_tol: tol("cross"),
    };
    let rep = verify_realization(&rj, &opts)?;
    for (name, ok) in &rep.verdicts {
        b.verdict(name.clone(), *ok);
    }
    let e = &rep.extension;
    b.residual("eq_symmetric", e.eq_symmetric);
    b.residual("eq_parallel", e.eq_parallel);
    b.residual("eq_curvature", e.eq_curvature);
    b.residual("metric_symmetry", rep.metric_symmetry_residual);
    b.residual("bianchi", rep.berger.bianchi_residual);
    b.residual("image_in_centralizer", rep.berger.image_residual);
    b.residual("covariant_constancy", rep.covariant_constancy_residual);
    b.residual("curvature_at_origin", rep.curvature_residual);
    b.residual("curvature_cross_check", rep.cross_check_residual);
    if let Some(fd) = rep.fd_residual {
        b.residual("fd_hessian", fd);
    }
    Ok(json!({
        "n": rep.dim,
        "berger": rep.berger,
        "extension_scale": e.scale,
        "raw_symmetry_defect": rep.raw_symmetry_defect,
        "sample_radius": rep.sample_radius,
        "sample_points": p.sample_points,
    }))
}

fn run_projective(p: &ProjectivePayload, seed: u64, tol: &dyn Fn(&str) -> f64, b: &mut Builder) -> Result<Value> {
    let g = p.metric_g.build()?;
    let gbar = p.metric_gbar.as_ref().map(MetricSpec::build).transpose()?;
    let mut points = p.points.clone();
    let mut rng = random::rng(seed);
    for _ in 0..p.random_points {
        points.push(
            p.domain_box
                .iter()
                .map(|[lo, hi]| lo + (hi - lo) * (random::uniform(&mut rng) + 1.0) / 2.0)
                .collect(),
        );
    }

    let mut rows = Vec::new();
    let mut worst: BTreeMap<&str, f64> = BTreeMap::new();
    let mut bump = |k: &'static str, v: f64| {
        let e = worst.entry(k).or_insert(0.0);
        *e = e.max(v);
    };
    for x in &points {
        let r = curvature_operator(g.as_ref(), x)?;
        let (k, cc) = constant_curvature_fit(&r);
        bump("curvature_symmetry", r.symmetry_residual());
        let mut row = json!({ "point": x, "curvature_fit": k, "constant_curvature": cc });
        if p.expect_constant_curvature {
            bump("constant_curvature", cc);
        }
        if p.pair_space {
            let form = BilinearForm::new(g.metric(x)).map_err(|_| Error::SingularMetric { point: x.clone() })?;
            row["pair_space"] = json!(sectional_pair_space(&r, &form));
        }
        if let Some(gb) = &gbar {
            let ct = comparison_tensor(g.as_ref(), gb.as_ref(), x)?;
            let orig = gb.metric(x);
            let back = gbar_roundtrip(&g.metric(x), &ct.a)?;
            let rt = (back - &orig).norm() / orig.norm();
            let bmk = bmk_check(g.as_ref(), gb.as_ref(), x)?;
            bump("a_symmetry", ct.symmetry_residual);
            bump("roundtrip", rt);
            bump("compatibility", bmk.compatibility);
            bump("bmk", bmk.residual);
            row["a"] = json!(to_rows(&ct.a));
            row["b"] = json!(to_rows(&bmk.b));
            row["a_symmetry"] = json!(ct.symmetry_residual);
            row["roundtrip"] = json!(rt);
            row["compatibility"] = json!(bmk.compatibility);
            row["bmk"] = json!(bmk.residual);
        }
        rows.push(row);
    }
    if !points.is_empty() {
        for (k, v) in worst {
            b.check(k, v, tol(k));
        }
    }

    let geodesics = match (&p.geodesics, &gbar) {
        (Some(spec), Some(gb)) => {
            let origin = spec
                .origin
                .clone()
                .unwrap_or_else(|| p.domain_box.iter().map(|[lo, hi]| (lo + hi) / 2.0).collect());
            let rep = geodesic_coincidence(g.as_ref(), gb.as_ref(), &origin, spec.directions, spec.length, spec.step)?;
            b.check("hausdorff", rep.max_hausdorff, tol("hausdorff"));
            Some(json!({ "origin": origin, "report": rep }))
        }
        _ => None,
    };
    Ok(json!({ "points": rows, "geodesics": geodesics }))
}

fn run_uniqueness(p: &UniquenessPayload, tol: &dyn Fn(&str) -> f64, b: &mut Builder) -> Result<Value> {
    let a = from_rows(&p.a)?;
    let n = a.nrows();
    let g = form(&p.g, n, "$.g")?;
    let (bm, a2, b2) = (from_rows(&p.b)?, from_rows(&p.a2)?, from_rows(&p.b2)?);
    let first = solution_space(&a, &bm, &g)?.freedom_dimension;
    let second = solution_space(&a2, &b2, &g)?.freedom_dimension;
    let verdict = match uniqueness_test(&a, &bm, &a2, &b2, &g) {
        Ok(v) => v,
        Err(Error::NoCommonSectional { residual }) => {
            b.check("consistency", residual, tol("consistency"));
            return Ok(json!({ "first_freedom": first, "second_freedom": second, "verdict": Value::Null }));
        }
        Err(e) => return Err(e),
    };
    b.check("consistency", verdict.residual, tol("consistency"));
    b.residual("scalar_fit", verdict.scalar_residual);
    if let Some(d) = p.expect.solution_dimension {
        b.verdict("solution_dimension", verdict.solution_dimension == d);
    }
    if let Some(k) = p.expect.scalar {
        let err = (verdict.scalar - k).abs().max(verdict.scalar_residual);
        b.check("scalar", err, tol("scalar"));
    }
    Ok(json!({
        "first_freedom": first,
        "second_freedom": second,
        "verdict": verdict,
        "particular": to_rows(&verdict.particular),
    }))
}
