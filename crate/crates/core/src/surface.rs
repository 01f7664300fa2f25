//! Even cohomology ring of a surface with exact intersection data.
//!
//! Basis order is `1_X, e_1, .., e_r, x` where `x` is the point class. The
//! ring is determined by the symmetric invertible pairing `P` on the middle
//! classes: `e_a e_b = P_ab x`, and all products of total degree above four
//! vanish. The Euler class is `e_X = chi x` with `chi = r + 2`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::{Arc, Mutex};

use num_traits::{One, Zero};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::rational::{format_rational, parse_rational, rat, Rational};

/// A class `c0 1_X + sum c2_a e_a + c4 x`, stored as basis coordinates.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CohClass {
    coords: Vec<Rational>,
}

impl CohClass {
    pub fn zero(r: usize) -> Self {
        CohClass { coords: vec![Rational::zero(); r + 2] }
    }

    pub fn basis(r: usize, i: usize) -> Self {
        let mut c = Self::zero(r);
        c.coords[i] = Rational::one();
        c
    }

    pub fn from_parts(c0: Rational, c2: Vec<Rational>, c4: Rational) -> Self {
        let mut coords = Vec::with_capacity(c2.len() + 2);
        coords.push(c0);
        coords.extend(c2);
        coords.push(c4);
        CohClass { coords }
    }

    pub fn r(&self) -> usize {
        self.coords.len() - 2
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coord(&self, i: usize) -> &Rational {
        &self.coords[i]
    }

    pub fn coords(&self) -> &[Rational] {
        &self.coords
    }

    pub fn c0(&self) -> &Rational {
        &self.coords[0]
    }

    pub fn c2(&self) -> &[Rational] {
        &self.coords[1..self.coords.len() - 1]
    }

    pub fn c4(&self) -> &Rational {
        &self.coords[self.coords.len() - 1]
    }

    pub fn is_zero(&self) -> bool {
        self.coords.iter().all(|c| c.is_zero())
    }

    /// Nonzero coordinates as `(basis index, coefficient)`.
    pub fn support(&self) -> impl Iterator<Item = (usize, &Rational)> {
        self.coords.iter().enumerate().filter(|(_, c)| !c.is_zero())
    }

    pub fn add(&self, other: &Self) -> Self {
        CohClass { coords: self.coords.iter().zip(&other.coords).map(|(a, b)| a + b).collect() }
    }

    pub fn sub(&self, other: &Self) -> Self {
        CohClass { coords: self.coords.iter().zip(&other.coords).map(|(a, b)| a - b).collect() }
    }

    pub fn scale(&self, c: &Rational) -> Self {
        CohClass { coords: self.coords.iter().map(|a| a * c).collect() }
    }

    /// Lowest cohomological degree present (0, 2 or 4); `None` for zero.
    pub fn min_degree(&self) -> Option<u32> {
        if !self.c0().is_zero() {
            Some(0)
        } else if self.c2().iter().any(|c| !c.is_zero()) {
            Some(2)
        } else if !self.c4().is_zero() {
            Some(4)
        } else {
            None
        }
    }
}

impl fmt::Display for CohClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let r = self.r();
        let mut parts = Vec::new();
        for (i, c) in self.support() {
            let name = basis_name(r, i);
            parts.push(format!("({c}){name}"));
        }
        if parts.is_empty() {
            write!(f, "0")
        } else {
            write!(f, "{}", parts.join(" + "))
        }
    }
}

pub fn basis_name(r: usize, i: usize) -> String {
    if i == 0 {
        "1".to_string()
    } else if i == r + 1 {
        "x".to_string()
    } else {
        format!("e{i}")
    }
}

/// One term of a Künneth decomposition: coefficient and basis index per slot.
pub type KunnethTerm = (Rational, Vec<usize>);

type DiagonalCache = Arc<Mutex<HashMap<(usize, usize), Arc<Vec<KunnethTerm>>>>>;

#[derive(Clone, Debug)]
pub struct SurfaceModel {
    name: String,
    r: usize,
    p: Matrix,
    k: Vec<Rational>,
    line_bundles: BTreeMap<String, Vec<Rational>>,
    gram_inv: Matrix,
    diag_cache: DiagonalCache,
}

impl SurfaceModel {
    pub fn new(
        name: &str,
        p: Matrix,
        k: Vec<Rational>,
        line_bundles: BTreeMap<String, Vec<Rational>>,
    ) -> Result<Self> {
        let r = p.len();
        if r == 0 {
            return Err(Error::BadModel("r must be at least 1".into()));
        }
        if p.iter().any(|row| row.len() != r) {
            return Err(Error::BadModel("P must be square".into()));
        }
        for i in 0..r {
            for j in 0..r {
                if p[i][j] != p[j][i] {
                    return Err(Error::BadModel("P must be symmetric".into()));
                }
            }
        }
        if linalg::inverse(&p).is_none() {
            return Err(Error::BadModel("P must be invertible".into()));
        }
        if k.len() != r {
            return Err(Error::BadModel(format!("K has length {}, expected {r}", k.len())));
        }
        for (n, v) in &line_bundles {
            if v.len() != r {
                return Err(Error::BadModel(format!("line bundle {n} has wrong length")));
            }
        }
        let mut model = SurfaceModel {
            name: name.to_string(),
            r,
            p,
            k,
            line_bundles,
            gram_inv: Vec::new(),
            diag_cache: Arc::new(Mutex::new(HashMap::new())),
        };
        let g = model.gram();
        model.gram_inv = linalg::inverse(&g).expect("full pairing is invertible when P is");
        Ok(model)
    }

    /// Built-in models: `minimal`, `two-class`, `three-class`, `kpos` and
    /// `kpos:<K.K>`.
    pub fn preset(desc: &str) -> Result<Self> {
        let (base, arg) = match desc.split_once(':') {
            Some((b, a)) => (b, Some(a)),
            None => (desc, None),
        };
        let diag = |d: &[i64]| -> Matrix {
            (0..d.len())
                .map(|i| (0..d.len()).map(|j| if i == j { rat(d[i]) } else { rat(0) }).collect())
                .collect()
        };
        let v = |d: &[i64]| d.iter().map(|x| rat(*x)).collect::<Vec<_>>();
        let mut lb = BTreeMap::new();
        match (base, arg) {
            ("minimal", None) => {
                lb.insert("L1".to_string(), v(&[1]));
                Self::new(desc, diag(&[1]), v(&[0]), lb)
            }
            ("two-class", None) => {
                lb.insert("L1".to_string(), v(&[1, 1]));
                lb.insert("L2".to_string(), v(&[1, 0]));
                Self::new(desc, diag(&[1, -1]), v(&[0, 1]), lb)
            }
            ("three-class", None) => {
                lb.insert("L1".to_string(), v(&[1, 1, 0]));
                lb.insert("L2".to_string(), v(&[0, 1, 1]));
                Self::new(desc, diag(&[1, -1, -1]), v(&[1, 0, 0]), lb)
            }
            ("kpos", a) => {
                let kk = match a {
                    Some(s) => parse_rational(s)?,
                    None => rat(1),
                };
                lb.insert("L1".to_string(), v(&[1]));
                Self::new(desc, vec![vec![kk]], v(&[1]), lb)
            }
            _ => Err(Error::BadModel(format!("unknown preset {desc:?}"))),
        }
    }

    pub const PRESETS: [&'static str; 4] = ["minimal", "two-class", "three-class", "kpos"];

    /// Reads `{r, P, K, lineBundles}` with `P` row-major (flat or nested).
    pub fn from_json(text: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(text).map_err(|e| Error::BadModel(e.to_string()))?;
        let r = v["r"].as_u64().ok_or_else(|| Error::BadModel("missing r".into()))? as usize;
        let entries = flatten_rationals(&v["P"])?;
        if entries.len() != r * r {
            return Err(Error::BadModel(format!("P needs {} entries", r * r)));
        }
        let p: Matrix = entries.chunks(r).map(|c| c.to_vec()).collect();
        let k = match v.get("K") {
            Some(kv) if !kv.is_null() => flatten_rationals(kv)?,
            _ => vec![Rational::zero(); r],
        };
        let mut lb = BTreeMap::new();
        if let Some(obj) = v.get("lineBundles").and_then(|o| o.as_object()) {
            for (name, vec) in obj {
                lb.insert(name.clone(), flatten_rationals(vec)?);
            }
        }
        let name = v.get("name").and_then(|n| n.as_str()).unwrap_or("custom");
        Self::new(name, p, k, lb)
    }

    pub fn to_json(&self) -> Value {
        let fmt = |xs: &[Rational]| xs.iter().map(format_rational).collect::<Vec<_>>();
        let p: Vec<String> = self.p.iter().flat_map(|row| fmt(row)).collect();
        let lb: serde_json::Map<String, Value> =
            self.line_bundles.iter().map(|(n, v)| (n.clone(), json!(fmt(v)))).collect();
        json!({"name": self.name, "r": self.r, "P": p, "K": fmt(&self.k), "lineBundles": lb})
    }

    /// The same model with `extra` further middle classes, orthogonal to
    /// everything else, with self-pairings alternating `-1, 1, ..`.
    ///
    /// Pairings among `K` and the line bundles are unchanged while `chi`
    /// grows by `extra`.
    pub fn padded(&self, extra: usize) -> Self {
        let r = self.r + extra;
        let mut p = vec![vec![Rational::zero(); r]; r];
        for i in 0..self.r {
            for j in 0..self.r {
                p[i][j] = self.p[i][j].clone();
            }
        }
        for t in 0..extra {
            p[self.r + t][self.r + t] = if t % 2 == 0 { rat(-1) } else { rat(1) };
        }
        let pad = |v: &[Rational]| {
            let mut v = v.to_vec();
            v.resize(r, Rational::zero());
            v
        };
        let lb = self.line_bundles.iter().map(|(n, v)| (n.clone(), pad(v))).collect();
        let name = if extra == 0 { self.name.clone() } else { format!("{}+{extra}", self.name) };
        Self::new(&name, p, pad(&self.k), lb).expect("padding preserves invertibility")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn dim(&self) -> usize {
        self.r + 2
    }

    pub fn chi(&self) -> i64 {
        self.r as i64 + 2
    }

    pub fn point_index(&self) -> usize {
        self.r + 1
    }

    pub fn pairing_matrix(&self) -> &Matrix {
        &self.p
    }

    pub fn one(&self) -> CohClass {
        CohClass::basis(self.r, 0)
    }

    pub fn point(&self) -> CohClass {
        CohClass::basis(self.r, self.r + 1)
    }

    /// The middle class `e_a`, `1 <= a <= r`.
    pub fn e(&self, a: usize) -> CohClass {
        assert!(a >= 1 && a <= self.r, "middle class index out of range");
        CohClass::basis(self.r, a)
    }

    pub fn middle(&self, v: &[Rational]) -> CohClass {
        CohClass::from_parts(Rational::zero(), v.to_vec(), Rational::zero())
    }

    pub fn canonical(&self) -> CohClass {
        self.middle(&self.k)
    }

    pub fn euler(&self) -> CohClass {
        self.point().scale(&rat(self.chi()))
    }

    pub fn line_bundle(&self, name: &str) -> Result<CohClass> {
        self.line_bundles
            .get(name)
            .map(|v| self.middle(v))
            .ok_or_else(|| Error::UnknownLineBundle(name.to_string()))
    }

    pub fn line_bundle_names(&self) -> impl Iterator<Item = &String> {
        self.line_bundles.keys()
    }

    /// Resolves `1`, `x`, `K`, `eX`, `e<a>` or a line-bundle name.
    pub fn class_by_name(&self, name: &str) -> Result<CohClass> {
        match name {
            "1" | "one" | "1_X" => Ok(self.one()),
            "x" | "point" => Ok(self.point()),
            "K" => Ok(self.canonical()),
            "eX" => Ok(self.euler()),
            _ => {
                if let Some(a) = name.strip_prefix('e').and_then(|s| s.parse::<usize>().ok()) {
                    if a >= 1 && a <= self.r {
                        return Ok(self.e(a));
                    }
                }
                self.line_bundle(name).map_err(|_| Error::UnknownClass(name.to_string()))
            }
        }
    }

    fn check(&self, a: &CohClass) {
        assert_eq!(a.r(), self.r, "class belongs to a different model");
    }

    pub fn middle_pair(&self, u: &[Rational], v: &[Rational]) -> Rational {
        let mut acc = Rational::zero();
        for i in 0..self.r {
            if u[i].is_zero() {
                continue;
            }
            for j in 0..self.r {
                if !v[j].is_zero() && !self.p[i][j].is_zero() {
                    acc += &u[i] * &self.p[i][j] * &v[j];
                }
            }
        }
        acc
    }

    pub fn cup(&self, a: &CohClass, b: &CohClass) -> CohClass {
        self.check(a);
        self.check(b);
        let (a0, a4) = (a.c0(), a.c4());
        let (b0, b4) = (b.c0(), b.c4());
        let c0 = a0 * b0;
        let c2: Vec<Rational> = a.c2().iter().zip(b.c2()).map(|(x, y)| a0 * y + b0 * x).collect();
        let c4 = a0 * b4 + a4 * b0 + self.middle_pair(a.c2(), b.c2());
        CohClass::from_parts(c0, c2, c4)
    }

    pub fn cup_pow(&self, a: &CohClass, m: u32) -> CohClass {
        let mut acc = self.one();
        for _ in 0..m {
            acc = self.cup(&acc, a);
        }
        acc
    }

    /// `<a, b>`: the point coefficient of `a b`.
    pub fn pair(&self, a: &CohClass, b: &CohClass) -> Rational {
        self.cup(a, b).c4().clone()
    }

    pub fn integral(&self, a: &CohClass) -> Rational {
        self.check(a);
        a.c4().clone()
    }

    /// The pairing on the full basis.
    pub fn gram(&self) -> Matrix {
        let d = self.dim();
        (0..d)
            .map(|i| {
                (0..d)
                    .map(|j| self.pair(&CohClass::basis(self.r, i), &CohClass::basis(self.r, j)))
                    .collect()
            })
            .collect()
    }

    pub fn basis_product(&self, i: usize, j: usize) -> CohClass {
        self.cup(&CohClass::basis(self.r, i), &CohClass::basis(self.r, j))
    }

    /// Künneth components of the push-forward of a basis class along the
    /// `l`-fold diagonal. `l = 0` gives the integral as an empty tensor.
    pub fn diagonal_basis(&self, l: usize, b: usize) -> Arc<Vec<KunnethTerm>> {
        if let Some(t) = self.diag_cache.lock().expect("diagonal cache").get(&(l, b)) {
            return t.clone();
        }
        let terms: Vec<KunnethTerm> = if l == 0 {
            let c = self.integral(&CohClass::basis(self.r, b));
            if c.is_zero() { vec![] } else { vec![(c, vec![])] }
        } else {
            // tau_l(b) = sum_ij Ginv_ij tau_{l-1}(b b_i) (x) b_j
            let mut acc: BTreeMap<Vec<usize>, Rational> = BTreeMap::new();
            for i in 0..self.dim() {
                let bi = self.basis_product(b, i);
                for (c, comp) in bi.support() {
                    let sub = self.diagonal_basis(l - 1, c);
                    for j in 0..self.dim() {
                        let g = &self.gram_inv[i][j];
                        if g.is_zero() {
                            continue;
                        }
                        for (coef, slots) in sub.iter() {
                            let mut key = slots.clone();
                            key.push(j);
                            *acc.entry(key).or_insert_with(Rational::zero) += coef * comp * g;
                        }
                    }
                }
            }
            acc.into_iter().filter(|(_, c)| !c.is_zero()).map(|(k, c)| (c, k)).collect()
        };
        let terms = Arc::new(terms);
        self.diag_cache.lock().expect("diagonal cache").insert((l, b), terms.clone());
        terms
    }

    /// Künneth components of the `l`-fold diagonal push-forward of `a`.
    pub fn diagonal(&self, l: usize, a: &CohClass) -> Vec<KunnethTerm> {
        self.check(a);
        let mut acc: BTreeMap<Vec<usize>, Rational> = BTreeMap::new();
        for (b, c) in a.support() {
            for (coef, slots) in self.diagonal_basis(l, b).iter() {
                *acc.entry(slots.clone()).or_insert_with(Rational::zero) += coef * c;
            }
        }
        acc.into_iter().filter(|(_, c)| !c.is_zero()).map(|(k, c)| (c, k)).collect()
    }
}

fn flatten_rationals(v: &Value) -> Result<Vec<Rational>> {
    let mut out = Vec::new();
    fn walk(v: &Value, out: &mut Vec<Rational>) -> Result<()> {
        match v {
            Value::Array(xs) => xs.iter().try_for_each(|x| walk(x, out)),
            Value::String(s) => {
                out.push(parse_rational(s)?);
                Ok(())
            }
            Value::Number(n) => {
                let i = n
                    .as_i64()
                    .ok_or_else(|| Error::BadModel(format!("non-integer number {n}; use \"p/q\"")))?;
                out.push(rat(i));
                Ok(())
            }
            other => Err(Error::BadModel(format!("expected rationals, got {other}"))),
        }
    }
    walk(v, &mut out)?;
    Ok(out)
}
