//! Exact comparisons between brute-force traces and closed forms.
//!
//! Each registered identity produces one or more cases, each a pair of
//! series that must agree coefficient by coefficient. Property suites run
//! seeded random instances of operator identities on the Fock space.

pub mod properties;

use serde::Serialize;

use crate::closedforms::{
    b_table, closed_ch1_l, closed_chk_l, closed_f0, closed_f1, closed_fk_point, extract_constants,
    first_order_bracket, point_series_from_b, a_lambda_trace, theta, theta_genpartitions, ExtractionModels,
    MultinomialRoute,
};
use crate::combinatorics::{enum_balanced, GenPartition};
use crate::error::{Error, Result};
use crate::fock::FockSpace;
use crate::operators::{oracle_f, oracle_trace_product, series_ch};
use crate::rational::{format_rational, frac, rat, Rational};
use crate::series::{euler_pow, ZQSeries};
use crate::surface::SurfaceModel;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
}

/// First coefficient where two series differ.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Mismatch {
    pub q: u32,
    pub z: Vec<i64>,
    pub left: String,
    pub right: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub identity: String,
    pub model: String,
    #[serde(rename = "Qmax")]
    pub qmax: u32,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mismatch: Option<Mismatch>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }

    fn failure(identity: &str, model: &str, qmax: u32, note: String) -> Self {
        Report {
            identity: identity.to_string(),
            model: model.to_string(),
            qmax,
            status: Status::Fail,
            mismatch: None,
            note: Some(note),
        }
    }
}

/// Exact comparison of two series of equal arity.
pub fn compare(identity: &str, model: &str, qmax: u32, left: &ZQSeries, right: &ZQSeries) -> Report {
    let (status, mismatch, note) = if left.nvars() != right.nvars() {
        (Status::Fail, None, Some(format!("arity {} vs {}", left.nvars(), right.nvars())))
    } else {
        match left.first_difference(right) {
            None => (Status::Pass, None, None),
            Some(((q, z), a, b)) => (
                Status::Fail,
                Some(Mismatch { q, z, left: format_rational(&a), right: format_rational(&b) }),
                None,
            ),
        }
    };
    Report { identity: identity.to_string(), model: model.to_string(), qmax, status, mismatch, note }
}

/// A labelled pair of series that must agree.
pub struct Case {
    pub label: String,
    pub left: ZQSeries,
    pub right: ZQSeries,
}

impl Case {
    fn new(label: impl Into<String>, left: ZQSeries, right: ZQSeries) -> Self {
        Case { label: label.into(), left, right }
    }
}

pub type IdentityFn = fn(&FockSpace, u32) -> Result<Vec<Case>>;

/// Registered identities, run per model.
pub const IDENTITIES: &[(&str, IdentityFn)] = &[
    ("gottsche", id_gottsche),
    ("F0-one", id_f0_one),
    ("F0", id_f0),
    ("F1", id_f1),
    ("F1-one", id_f1_one),
    ("Fk-point", id_fk_point),
    ("theta-equality", id_theta_equality),
    ("single-trace", id_single_trace),
    ("trace-without-w", id_trace_without_w),
    ("point-products", id_point_products),
    ("ch0", id_ch0),
];

/// Runs one identity on one model. A failed comparison or a computation
/// error yields a failing report; only an unknown name is an error.
pub fn run_identity(name: &str, space: &FockSpace, qmax: u32) -> Result<Vec<Report>> {
    let (_, f) = IDENTITIES
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| Error::Precondition(format!("unknown identity {name:?}")))?;
    let model = space.model().name().to_string();
    Ok(match f(space, qmax) {
        Ok(cases) => cases
            .iter()
            .map(|c| compare(&format!("{name}[{}]", c.label), &model, qmax, &c.left, &c.right))
            .collect(),
        Err(e) => vec![Report::failure(name, &model, qmax, e.to_string())],
    })
}

fn euler(model: &SurfaceModel, qmax: u32) -> ZQSeries {
    euler_pow(-model.chi(), qmax)
}

fn id_gottsche(space: &FockSpace, qmax: u32) -> Result<Vec<Case>> {
    let m = space.model();
    Ok(vec![Case::new("", oracle_f(space, &[], &[], qmax)?, euler(m, qmax).lift(1))])
}

fn id_f0_one(space: &FockSpace, qmax: u32) -> Result<Vec<Case>> {
    let m = space.model();
    let o = oracle_f(space, &[0], &[m.one()], qmax)?;
    Ok(vec![Case::new("q d/dq", o, euler(m, qmax).q_ddq().lift(1))])
}

fn standard_classes(m: &SurfaceModel) -> Vec<(String, crate::surface::CohClass)> {
    vec![
        ("1".to_string(), m.one()),
        ("K".to_string(), m.canonical()),
        ("e1".to_string(), m.e(1)),
        ("x".to_string(), m.point()),
    ]
}

fn id_f0(space: &FockSpace, qmax: u32) -> Result<Vec<Case>> {
    let m = space.model();
    standard_classes(m)
        .into_iter()
        .map(|(n, a)| Ok(Case::new(n, oracle_f(space, &[0], &[a.clone()], qmax)?, closed_f0(m, &a, qmax).lift(1))))
        .collect()
}

fn id_f1(space: &FockSpace, qmax: u32) -> Result<Vec<Case>> {
    let m = space.model();
    let mut out = Vec::new();
    for name in m.line_bundle_names().cloned().collect::<Vec<_>>() {
        let l = m.line_bundle(&name)?;
        out.push(Case::new(name, oracle_f(space, &[1], &[l.clone()], qmax)?, closed_f1(m, &l, qmax)?.lift(1)));
    }
    out.push(Case::new("x", oracle_f(space, &[1], &[m.point()], qmax)?, ZQSeries::zero(qmax, 1)));
    Ok(out)
}

/// `G_1(1_X)` equals the Euler product times `-<K, K>/2` times the first
/// order bracket sum.
fn id_f1_one(space: &FockSpace, qmax: u32) -> Result<Vec<Case>> {
    let m = space.model();
    let k = m.canonical();
    let c = -m.pair(&k, &k) / rat(2);
    let closed = &euler(m, qmax) * &first_order_bracket(qmax).scale(&c);
    Ok(vec![Case::new("", oracle_f(space, &[1], &[m.one()], qmax)?, closed.lift(1))])
}

fn id_fk_point(space: &FockSpace, qmax: u32) -> Result<Vec<Case>> {
    let m = space.model();
    (0..=4)
        .map(|k| {
            let o = oracle_f(space, &[k], &[m.point()], qmax)?;
            Ok(Case::new(format!("k={k}"), o, closed_fk_point(m, &rat(1), k, qmax).lift(1)))
        })
        .collect()
}

fn id_theta_equality(space: &FockSpace, qmax: u32) -> Result<Vec<Case>> {
    let m = space.model();
    let mut out = Vec::new();
    for (n, a) in standard_classes(m) {
        for k in 0..=4 {
            out.push(Case::new(format!("{n},k={k}"), theta(m, &a, k, qmax), theta_genpartitions(m, &a, k, qmax)));
        }
    }
    Ok(out)
}

/// Classes `1_X`, the first line bundle and `x`.
fn trace_classes(m: &SurfaceModel) -> Result<Vec<(String, crate::surface::CohClass)>> {
    let mut v = vec![("1".to_string(), m.one())];
    if let Some(name) = m.line_bundle_names().next() {
        v.push((name.clone(), m.line_bundle(name)?));
    }
    v.push(("x".to_string(), m.point()));
    Ok(v)
}

fn id_single_trace(space: &FockSpace, qmax: u32) -> Result<Vec<Case>> {
    let m = space.model();
    let mut out = Vec::new();
    for len in 1..=4 {
        for lam in enum_balanced(len, 4) {
            for (n, a) in trace_classes(m)? {
                let o = oracle_trace_product(space, &[lam.clone()], &[a.clone()], true, qmax)?;
                out.push(Case::new(format!("{lam},{n}"), o, a_lambda_trace(m, &lam, &a, qmax)));
            }
        }
    }
    Ok(out)
}

/// `Tr q^d a_{((-1)1)}(alpha)` without the vertex operator: zero for `x`
/// and `-chi q/(1-q)` times the Euler product for `1_X`.
fn id_trace_without_w(space: &FockSpace, qmax: u32) -> Result<Vec<Case>> {
    let m = space.model();
    let lam = GenPartition::from_parts(&[-1, 1]);
    let x = oracle_trace_product(space, &[lam.clone()], &[m.point()], false, qmax)?;
    let one = oracle_trace_product(space, &[lam], &[m.one()], false, qmax)?;
    let geo = crate::series::block_q(1, 1, 1, qmax).scale(&rat(-m.chi()));
    Ok(vec![
        Case::new("x", x, ZQSeries::zero(qmax, 1)),
        Case::new("1", one, (&euler(m, qmax) * &geo).lift(1)),
    ])
}

fn id_point_products(space: &FockSpace, qmax: u32) -> Result<Vec<Case>> {
    let m = space.model();
    let table = b_table(5, qmax, MultinomialRoute::Collapsed);
    let mut out = Vec::new();
    for k in 0..=4 {
        out.push(Case::new(format!("k={k}"), point_series_from_b(m, &[k], &table, qmax)?, closed_fk_point(m, &rat(1), k, qmax)));
    }
    for k1 in 0..=4 {
        for k2 in 0..=4 - k1 {
            let o = oracle_f(space, &[k1, k2], &[m.point(), m.point()], qmax)?;
            out.push(Case::new(format!("k={k1},{k2}"), o, point_series_from_b(m, &[k1, k2], &table, qmax)?.lift(1)));
        }
    }
    Ok(out)
}

fn id_ch0(space: &FockSpace, qmax: u32) -> Result<Vec<Case>> {
    let m = space.model();
    let mut out = Vec::new();
    for name in m.line_bundle_names().cloned().collect::<Vec<_>>() {
        let s = series_ch(space, &[name.as_str()], &[0], false, qmax)?;
        out.push(Case::new(name, s, euler(m, qmax).q_ddq()));
    }
    Ok(out)
}

/// Per-coefficient Lagrange interpolation in `chi`, evaluated at `target`.
///
/// The coefficient at `q^e` is taken to be a polynomial in `chi` of degree
/// at most `degree_bound(e)`. Samples beyond the first `degree_bound(e) + 1`
/// are used as checks.
pub fn chi_extrapolate(
    family: &[(i64, ZQSeries)],
    target: i64,
    degree_bound: &dyn Fn(u32) -> usize,
) -> Result<ZQSeries> {
    let (qmax, nvars) = match family.first() {
        Some((_, s)) => (s.qmax(), s.nvars()),
        None => return Err(Error::InsufficientSamples { q_exp: 0, needed: 1, got: 0 }),
    };
    let mut chis: Vec<i64> = family.iter().map(|(c, _)| *c).collect();
    chis.sort_unstable();
    chis.dedup();
    if chis.len() != family.len() {
        return Err(Error::Precondition("chi samples must be distinct".into()));
    }
    if family.iter().any(|(_, s)| s.qmax() != qmax || s.nvars() != nvars) {
        return Err(Error::Precondition("family members differ in truncation or arity".into()));
    }
    let mut keys: Vec<(u32, Vec<i64>)> = family.iter().flat_map(|(_, s)| s.terms().map(|(k, _)| k.clone())).collect();
    keys.sort();
    keys.dedup();
    for q in 0..=qmax {
        let needed = degree_bound(q) + 1;
        if family.len() < needed {
            return Err(Error::InsufficientSamples { q_exp: q, needed, got: family.len() });
        }
    }
    let mut out = ZQSeries::zero(qmax, nvars);
    for (q, z) in keys {
        let needed = degree_bound(q) + 1;
        let pts: Vec<(Rational, Rational)> = family
            .iter()
            .map(|(c, s)| (rat(*c), s.coeff(q, &z)))
            .collect();
        let (fit, check) = pts.split_at(needed);
        for (x, y) in check {
            if lagrange(fit, x) != *y {
                let chi = x.to_integer().try_into().unwrap_or(i64::MAX);
                return Err(Error::DegreeBoundViolated { q_exp: q, chi });
            }
        }
        out.add_term(q, z, lagrange(fit, &rat(target)));
    }
    Ok(out)
}

fn lagrange(pts: &[(Rational, Rational)], t: &Rational) -> Rational {
    let mut acc = Rational::from_integer(0.into());
    for (i, (xi, yi)) in pts.iter().enumerate() {
        let mut term = yi.clone();
        for (j, (xj, _)) in pts.iter().enumerate() {
            if i != j {
                term *= (t - xj) / (xi - xj);
            }
        }
        acc += term;
    }
    acc
}

/// Models named by preset or JSON file path, comma separated.
pub fn load_models(desc: &str) -> Result<Vec<SurfaceModel>> {
    desc.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            if std::path::Path::new(s).is_file() {
                let text = std::fs::read_to_string(s).map_err(|e| Error::Io(format!("{s}: {e}")))?;
                SurfaceModel::from_json(&text)
            } else {
                SurfaceModel::preset(s)
            }
        })
        .collect()
}

pub const SUITES: &[&str] = &["all", "fock", "identities", "constants", "abelian"];

/// Every registered identity on every model.
pub fn suite_identities(models: &[SurfaceModel], qmax: u32) -> Vec<Report> {
    let mut out = Vec::new();
    for m in models {
        let space = FockSpace::new(m.clone());
        for (name, _) in IDENTITIES {
            out.extend(run_identity(name, &space, qmax).expect("registered"));
        }
    }
    out
}

/// Seeded property suites on every model.
pub fn suite_fock(models: &[SurfaceModel], instances: usize, seed: u64) -> Vec<Report> {
    let mut out = Vec::new();
    for m in models {
        for p in properties::run_all(m, instances, seed) {
            out.push(p.report(m.name()));
        }
    }
    out
}

/// The `b` table and the constants recovered from traces.
pub fn suite_constants(qmax: u32) -> Vec<Report> {
    let mut out = Vec::new();
    let t = b_table(7, 6, MultinomialRoute::Collapsed);
    let expect = [(3, frac(-1, 3)), (5, frac(2, 5)), (7, frac(-5, 7))];
    for (i, v) in expect {
        out.push(value_report(&format!("b[({i})]"), t.b(i, 0), v));
    }
    for i in [2u32, 4, 6] {
        for j in 0..=6 {
            out.push(value_report(&format!("b[({i},1^{j})]"), t.b(i, j), rat(0)));
        }
    }
    let low = t.low_order_residuals.iter().all(|r| r.is_zero());
    out.push(value_report("b-low-order", rat(low as i64), rat(1)));
    let e = b_table(7, 6, MultinomialRoute::Enumerated);
    out.push(Report {
        status: if e.series == t.series { Status::Pass } else { Status::Fail },
        ..value_report("b-multinomial-routes", rat(0), rat(0))
    });
    out.extend(constants_extraction_reports(qmax, 5));
    out
}

fn value_report(identity: &str, got: Rational, want: Rational) -> Report {
    let s = |v: &Rational| ZQSeries::constant(v.clone(), 0, 0);
    compare(identity, "-", 0, &s(&got), &s(&want))
}

/// `g` against its bracket form, `g + h = 0`, and the two routes to `h`.
pub fn constants_extraction_reports(qmax: u32, extra_max: usize) -> Vec<Report> {
    let models = ExtractionModels::standard(extra_max);
    let name = models.g_model.name().to_string();
    match extract_constants(&models, qmax) {
        Err(e) => vec![Report::failure("constants-extraction", &name, qmax, e.to_string())],
        Ok(c) => {
            let g_closed = first_order_bracket(qmax).scale(&frac(1, 2));
            vec![
                compare("g-bracket", &name, qmax, &c.g, &g_closed),
                compare("g-plus-h", &name, qmax, &c.g_plus_h, &ZQSeries::zero(qmax, 0)),
                compare("h-two-routes", &name, qmax, &c.h_linear, &c.h_extrapolated),
                compare("f-vanishes", &name, qmax, &c.f, &ZQSeries::zero(qmax, 0)),
            ]
        }
    }
}

/// Abelian-surface statements reached by extrapolating padded families to
/// `chi = 0`.
pub fn suite_abelian(qmax: u32, extra_max: usize) -> Vec<Report> {
    let mut out = Vec::new();
    let flat = SurfaceModel::preset("minimal").expect("preset");
    let l = flat.line_bundle("L1").expect("preset line bundle");
    let ll = flat.pair(&l, &l);
    for k in 1..=3 {
        let label = format!("chkL[k={k}]");
        match extrapolated_ch(&flat, "L1", k, qmax, extra_max) {
            Ok(s) => out.push(compare(&label, flat.name(), qmax, &s, &closed_chk_l(&ll, k, qmax))),
            Err(e) => out.push(Report::failure(&label, flat.name(), qmax, e.to_string())),
        }
    }
    for preset in ["two-class", "kpos"] {
        let m = SurfaceModel::preset(preset).expect("preset");
        let k = m.canonical();
        let l = m.line_bundle("L1").expect("preset line bundle");
        let closed = closed_ch1_l(&m.pair(&k, &l), &m.pair(&k, &k), qmax);
        match extrapolated_ch(&m, "L1", 1, qmax, extra_max) {
            Ok(s) => out.push(compare("ch1L", m.name(), qmax, &s, &closed)),
            Err(e) => out.push(Report::failure("ch1L", m.name(), qmax, e.to_string())),
        }
    }
    out
}

/// `<ch_k(L)>` on `model` padded by `0..=extra_max` classes, extrapolated
/// to `chi = 0`.
pub fn extrapolated_ch(model: &SurfaceModel, l: &str, k: usize, qmax: u32, extra_max: usize) -> Result<ZQSeries> {
    let samples: Vec<(i64, ZQSeries)> = (0..=extra_max)
        .map(|e| {
            let m = model.padded(e);
            let space = FockSpace::new(m.clone());
            series_ch(&space, &[l], &[k], false, qmax).map(|s| (m.chi(), s))
        })
        .collect::<Result<_>>()?;
    chi_extrapolate(&samples, 0, &|e| e as usize)
}

/// Runs a named suite. Unknown names are an error.
pub fn run_suite(name: &str, models: &[SurfaceModel], qmax: u32) -> Result<Vec<Report>> {
    let mut out = Vec::new();
    let all = name == "all";
    if !SUITES.contains(&name) {
        return Err(Error::Precondition(format!("unknown suite {name:?}; expected one of {}", SUITES.join(", "))));
    }
    if all || name == "fock" {
        out.extend(suite_fock(models, 50, 0x5eed));
    }
    if all || name == "identities" {
        out.extend(suite_identities(models, qmax));
    }
    if all || name == "constants" {
        out.extend(suite_constants(qmax.min(5)));
    }
    if all || name == "abelian" {
        out.extend(suite_abelian(qmax.min(4), 5));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::Zero;

    fn poly_family(coeffs: &[i64], chis: &[i64]) -> Vec<(i64, ZQSeries)> {
        chis.iter()
            .map(|c| {
                let mut s = ZQSeries::zero(2, 0);
                let v: i64 = coeffs.iter().rev().fold(0, |acc, a| acc * c + a);
                s.add_term(2, vec![], rat(v));
                s.add_term(0, vec![], rat(7));
                (*c, s)
            })
            .collect()
    }

    #[test]
    fn extrapolation_of_polynomials() {
        let fam = poly_family(&[3, -2, 5], &[3, 4, 5, 6]);
        let s = chi_extrapolate(&fam, 0, &|e| e as usize).unwrap();
        assert_eq!(s.q_coeff(2), rat(3));
        assert_eq!(s.q_coeff(0), rat(7));
        for (c, x) in &fam {
            assert_eq!(&chi_extrapolate(&fam, *c, &|e| e as usize).unwrap(), x);
        }
        let linear = poly_family(&[0, 4], &[3, 4, 5]);
        assert!(chi_extrapolate(&linear, 0, &|e| e as usize).unwrap().q_coeff(2).is_zero());
    }

    #[test]
    fn extrapolation_errors() {
        let fam = poly_family(&[1, 1, 1], &[3, 4]);
        assert!(matches!(
            chi_extrapolate(&fam, 0, &|e| e as usize),
            Err(Error::InsufficientSamples { q_exp: 2, needed: 3, got: 2 })
        ));
        let cubic = poly_family(&[0, 0, 0, 1], &[1, 2, 3, 4]);
        assert!(matches!(
            chi_extrapolate(&cubic, 0, &|e| e as usize),
            Err(Error::DegreeBoundViolated { q_exp: 2, chi: 4 })
        ));
    }

    #[test]
    fn reports_first_difference() {
        let a = ZQSeries::one(3, 0);
        let mut b = ZQSeries::one(3, 0);
        b.add_term(2, vec![], frac(1, 2));
        let r = compare("x", "m", 3, &a, &b);
        assert_eq!(r.status, Status::Fail);
        let mm = r.mismatch.unwrap();
        assert_eq!((mm.q, mm.left.as_str(), mm.right.as_str()), (2, "0/1", "1/2"));
        let json = serde_json::to_value(compare("x", "m", 3, &a, &a)).unwrap();
        assert_eq!(json["status"], "pass");
        assert_eq!(json["Qmax"], 3);
        assert!(json.get("mismatch").is_none());
    }

    #[test]
    fn unknown_identity_is_an_error() {
        let space = FockSpace::new(SurfaceModel::preset("minimal").unwrap());
        assert!(run_identity("nope", &space, 2).is_err());
        assert!(run_suite("nope", &[], 2).is_err());
    }

    #[test]
    fn identities_small_order() {
        let m = SurfaceModel::preset("two-class").unwrap();
        for r in suite_identities(&[m], 3) {
            assert!(r.passed(), "{r:?}");
        }
    }
}
