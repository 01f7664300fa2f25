//! Closed-form evaluations of the trace series as balanced bracket sums.
//!
//! The basic building block is the balanced bracket
//!
//! ```text
//! [S | T] = sum_{n_1 > .. > n_a, m_1 > .. > m_b, sum n_i s_i = sum m_j t_j}
//!           prod n_i^{e_i} q^{n_i s_i} / (1-q^{n_i})^{s_i}
//!         * prod m_j^{f_j} / (1-q^{m_j})^{t_j}
//! ```
//!
//! which is the `z^0` coefficient of a product of `(qz)^{n s}` and
//! `z^{-m t}` sums. Taking `z^0` through the balance constraint avoids
//! carrying `z` at all.

use std::collections::{BTreeMap, HashMap};

use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::Serialize;

use crate::combinatorics::{compositions, decreasing_with_weights, partitions, GenPartition};
use crate::error::{Error, Result};
use crate::rational::{factorial, format_rational, frac, rat, sigma1, Rational};
use crate::series::{block_q, euler_pow, ZQSeries};
use crate::surface::{CohClass, SurfaceModel};

/// One slot of a bracket: weight `w` and an extra factor `n^npow`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Slot {
    pub w: u32,
    pub npow: u32,
}

impl Slot {
    pub fn plain(w: u32) -> Self {
        Slot { w, npow: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BracketSignature {
    /// Slots carrying `q^{n s}`.
    pub s: Vec<Slot>,
    /// Slots without a `q` numerator.
    pub t: Vec<Slot>,
}

impl BracketSignature {
    pub fn plain(s: &[u64], t: &[u64]) -> Self {
        BracketSignature {
            s: s.iter().map(|w| Slot::plain(*w as u32)).collect(),
            t: t.iter().map(|w| Slot::plain(*w as u32)).collect(),
        }
    }
}

/// `q^{n a} / (1-q^n)^w` memoized at a fixed truncation order.
struct BlockCache {
    qmax: u32,
    map: HashMap<(u32, u32), ZQSeries>,
}

impl BlockCache {
    fn new(qmax: u32) -> Self {
        BlockCache { qmax, map: HashMap::new() }
    }

    fn inv(&mut self, n: u32, w: u32) -> &ZQSeries {
        let qmax = self.qmax;
        self.map.entry((n, w)).or_insert_with(|| block_q(n, w, 0, qmax))
    }
}

/// The balanced bracket `[S | T]` truncated at `q^qmax`.
pub fn mzv_bracket(sig: &BracketSignature, qmax: u32) -> ZQSeries {
    let mut cache = BlockCache::new(qmax);
    bracket_with(&mut cache, sig)
}

fn bracket_with(cache: &mut BlockCache, sig: &BracketSignature) -> ZQSeries {
    let qmax = cache.qmax;
    let mut out = ZQSeries::zero(qmax, 0);
    if sig.s.is_empty() && sig.t.is_empty() {
        return ZQSeries::one(qmax, 0);
    }
    if sig.s.is_empty() || sig.t.is_empty() {
        return out;
    }
    let sw: Vec<u64> = sig.s.iter().map(|s| s.w as u64).collect();
    let tw: Vec<u64> = sig.t.iter().map(|s| s.w as u64).collect();
    for balance in 1..=qmax as u64 {
        let ns = decreasing_with_weights(&sw, balance);
        if ns.is_empty() {
            continue;
        }
        let ms = decreasing_with_weights(&tw, balance);
        for n in &ns {
            for m in &ms {
                let mut coef = Rational::one();
                let mut prod = ZQSeries::one(qmax, 0);
                for (slot, v) in sig.s.iter().zip(n).chain(sig.t.iter().zip(m)) {
                    coef *= rat((*v as i64).pow(slot.npow));
                    prod = &prod * cache.inv(*v as u32, slot.w);
                }
                out = &out + &prod.shift(balance as u32, &[]).scale(&coef);
            }
        }
    }
    out
}

/// All `(s, t)` composition pairs with `a, b >= 1` and `sum s + sum t = total`.
pub fn composition_pairs(total: u64) -> Vec<(Vec<u64>, Vec<u64>)> {
    let mut out = Vec::new();
    for ssum in 1..total {
        let tsum = total - ssum;
        for a in 1..=ssum as usize {
            for s in compositions(ssum, a) {
                for b in 1..=tsum as usize {
                    for t in compositions(tsum, b) {
                        out.push((s.clone(), t));
                    }
                }
            }
        }
    }
    out
}

fn inv_fact(n: u64) -> Rational {
    Rational::new(BigInt::one(), factorial(n))
}

/// `prod (-1)^{s_i}/s_i! prod 1/t_j!`.
fn composition_weight(s: &[u64], t: &[u64]) -> Rational {
    let mut c = Rational::one();
    for x in s {
        c *= inv_fact(*x);
        if x % 2 == 1 {
            c = -c;
        }
    }
    for x in t {
        c *= inv_fact(*x);
    }
    c
}

/// `sum_{sum s + sum t = total} weight(s, t) f(sum s) [s | t]`.
fn weighted_bracket_sum(total: u64, qmax: u32, f: impl Fn(u64) -> Rational) -> ZQSeries {
    let mut cache = BlockCache::new(qmax);
    let mut out = ZQSeries::zero(qmax, 0);
    for (s, t) in composition_pairs(total) {
        let c = composition_weight(&s, &t) * f(s.iter().sum());
        if c.is_zero() {
            continue;
        }
        let b = bracket_with(&mut cache, &BracketSignature::plain(&s, &t));
        out = &out + &b.scale(&c);
    }
    out
}

/// `<(1_X - K)^m, alpha>`.
pub fn one_minus_k_pairing(model: &SurfaceModel, m: u64, alpha: &CohClass) -> Rational {
    let c = model.one().sub(&model.canonical());
    model.pair(&model.cup_pow(&c, m as u32), alpha)
}

/// The `z^0` part of the leading term, summed over ordered compositions.
pub fn theta(model: &SurfaceModel, alpha: &CohClass, k: usize, qmax: u32) -> ZQSeries {
    weighted_bracket_sum(k as u64 + 2, qmax, |m| one_minus_k_pairing(model, m, alpha)).scale(&rat(-1))
}

/// The same series summed over balanced generalized partitions of length
/// `k + 2`, one product of geometric factors per partition.
pub fn theta_genpartitions(model: &SurfaceModel, alpha: &CohClass, k: usize, qmax: u32) -> ZQSeries {
    let mut cache = BlockCache::new(qmax);
    let mut out = ZQSeries::zero(qmax, 0);
    for lam in crate::combinatorics::enum_balanced(k + 2, qmax as u64) {
        let npos: u64 = lam.multiplicities().iter().filter(|(p, _)| **p > 0).map(|(_, m)| *m as u64).sum();
        let c = one_minus_k_pairing(model, npos, alpha);
        if c.is_zero() {
            continue;
        }
        let p = leading_product(&mut cache, &lam);
        out = &out + &p.scale(&c);
    }
    out.scale(&rat(-1))
}

/// `prod_n (-1)^{m_n}/m_n! q^{n m_n}/(1-q^n)^{m_n} * 1/mt_n! 1/(1-q^n)^{mt_n}`
/// with `m_n`, `mt_n` the multiplicities of `n` and `-n`.
fn leading_product(cache: &mut BlockCache, lam: &GenPartition) -> ZQSeries {
    let qmax = cache.qmax;
    let mut ns: Vec<u32> = lam.multiplicities().keys().map(|p| p.unsigned_abs() as u32).collect();
    ns.sort_unstable();
    ns.dedup();
    let mut coef = Rational::one();
    let mut prod = ZQSeries::one(qmax, 0);
    let mut shift = 0u32;
    for n in ns {
        let m = lam.mult(n as i64);
        let mt = lam.mult(-(n as i64));
        coef *= inv_fact(m as u64) * inv_fact(mt as u64);
        if m % 2 == 1 {
            coef = -coef;
        }
        shift += n * m;
        if shift > qmax {
            return ZQSeries::zero(qmax, 0);
        }
        prod = &prod * cache.inv(n, m + mt);
    }
    prod.shift(shift, &[]).scale(&coef)
}

/// `sum_n q^n / (1-q^n)^2`.
fn sigma_series(qmax: u32) -> ZQSeries {
    mzv_bracket(&BracketSignature::plain(&[1], &[1]), qmax)
}

/// `sum_n n q^n / (1-q^n)`.
fn divisor_series(qmax: u32) -> ZQSeries {
    let mut s = ZQSeries::zero(qmax, 0);
    for n in 1..=qmax {
        s = &s + &crate::series::block_q(n, 1, 1, qmax).scale(&rat(n as i64));
    }
    s
}

/// `sum (n-1) q^n/(1-q^n)^2 + [1 | 2] + 2 [1 | 1,1]`.
pub fn first_order_bracket(qmax: u32) -> ZQSeries {
    let mut s = ZQSeries::zero(qmax, 0);
    for n in 2..=qmax {
        s = &s + &block_q(n, 2, 1, qmax).scale(&rat(n as i64 - 1));
    }
    let b12 = mzv_bracket(&BracketSignature::plain(&[1], &[2]), qmax);
    let b111 = mzv_bracket(&BracketSignature::plain(&[1], &[1, 1]), qmax);
    &(&s + &b12) + &b111.scale(&rat(2))
}

/// Generating series of `G_0(alpha)` against the total Chern class.
pub fn closed_f0(model: &SurfaceModel, alpha: &CohClass, qmax: u32) -> ZQSeries {
    let a = one_minus_k_pairing(model, 1, alpha);
    let e = model.pair(&model.euler(), alpha);
    let inner = &sigma_series(qmax).scale(&a) + &divisor_series(qmax).scale(&e);
    &euler_pow(-model.chi(), qmax) * &inner
}

/// Generating series of `G_1(alpha)`; needs `e_X alpha = 0`.
pub fn closed_f1(model: &SurfaceModel, alpha: &CohClass, qmax: u32) -> Result<ZQSeries> {
    if !model.cup(&model.euler(), alpha).is_zero() {
        return Err(Error::Precondition("closed_f1 needs e_X alpha = 0".into()));
    }
    let k = model.canonical();
    let kk = model.cup(&k, &k);
    let c = model.pair(&k.sub(&kk), alpha) / rat(2);
    Ok(&euler_pow(-model.chi(), qmax) * &first_order_bracket(qmax).scale(&c))
}

/// Generating series of `G_k(c x)` for the point class.
pub fn closed_fk_point(model: &SurfaceModel, c: &Rational, k: usize, qmax: u32) -> ZQSeries {
    let sum = weighted_bracket_sum(k as u64 + 2, qmax, |_| Rational::one());
    (&euler_pow(-model.chi(), qmax) * &sum).scale(&-c)
}

/// `<ch_k(L)>` on a surface with `K = 0` and `chi = 0`.
pub fn closed_chk_l(ll: &Rational, k: usize, qmax: u32) -> ZQSeries {
    if k < 2 {
        return ZQSeries::zero(qmax, 0);
    }
    weighted_bracket_sum(k as u64, qmax, |_| Rational::one()).scale(&(-ll / rat(2)))
}

/// `<ch_1(L)>` on a surface with `chi = 0`, from `<K, L>` and `<K, K>`.
pub fn closed_ch1_l(kl: &Rational, kk: &Rational, qmax: u32) -> ZQSeries {
    let a = sigma_series(qmax).scale(&-kl);
    let b = first_order_bracket(qmax).scale(&(-kk / rat(2)));
    &a + &b
}

/// `Tr q^d W a_lambda(alpha)/lambda!` as a leading product plus the
/// Euler-class correction from one matched pair `(-n, n)`. The result
/// carries `z^{|lambda|}` in one variable.
pub fn a_lambda_trace(model: &SurfaceModel, lambda: &GenPartition, alpha: &CohClass, qmax: u32) -> ZQSeries {
    let mut cache = BlockCache::new(qmax);
    let npos: u64 = lambda.multiplicities().iter().filter(|(p, _)| **p > 0).map(|(_, m)| *m as u64).sum();
    let lead = leading_product(&mut cache, lambda).scale(&one_minus_k_pairing(model, npos, alpha));
    let e = model.pair(&model.euler(), alpha);
    let mut corr = ZQSeries::zero(qmax, 0);
    if !e.is_zero() {
        let ns: Vec<i64> = lambda.multiplicities().keys().filter(|p| **p > 0).copied().collect();
        for n in ns {
            if lambda.mult(-n) == 0 {
                continue;
            }
            let rest = lambda.subtract(&GenPartition::from_parts(&[-n, n])).expect("pair present");
            let p = leading_product(&mut cache, &rest);
            let f = block_q(n as u32, 1, 1, qmax).scale(&rat(-n));
            corr = &corr + &(&f * &p);
        }
        corr = corr.scale(&e);
    }
    let total = &euler_pow(-model.chi(), qmax) * &(&lead + &corr);
    total.lift(1).shift(0, &[lambda.size()])
}

/// Where a table entry came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Seeded,
    Computed,
}

/// Universal constants indexed by the partition `(i, 1^j)`.
#[derive(Clone, Debug, Default)]
pub struct ConstantsTable {
    /// `(family, i, j) -> (value, provenance)`.
    pub entries: BTreeMap<(String, u32, u32), (Rational, Provenance)>,
}

#[derive(Serialize)]
struct ConstantRow {
    family: String,
    i: u32,
    j: u32,
    value: String,
    provenance: Provenance,
}

impl ConstantsTable {
    pub fn get(&self, family: &str, i: u32, j: u32) -> Option<&Rational> {
        self.entries.get(&(family.to_string(), i, j)).map(|(v, _)| v)
    }

    pub fn insert(&mut self, family: &str, i: u32, j: u32, v: Rational, p: Provenance) {
        self.entries.insert((family.to_string(), i, j), (v, p));
    }

    fn rows(&self) -> Vec<ConstantRow> {
        self.entries
            .iter()
            .map(|((f, i, j), (v, p))| ConstantRow {
                family: f.clone(),
                i: *i,
                j: *j,
                value: format_rational(v),
                provenance: *p,
            })
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.rows()).expect("rows serialize")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("family,i,j,value,provenance\n");
        for r in self.rows() {
            let p = match r.provenance {
                Provenance::Seeded => "seeded",
                Provenance::Computed => "computed",
            };
            out.push_str(&format!("{},{},{},{},{}\n", r.family, r.i, r.j, r.value, p));
        }
        out
    }
}

/// How to evaluate `sum_{t_0 + t_1 + .. = m} prod_j (c_j)^{t_j}/t_j!`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MultinomialRoute {
    /// `(sum_j c_j)^m / m!`.
    Collapsed,
    /// Explicit enumeration of the `t_j`.
    Enumerated,
}

/// The series `B_s = sum_j bt_{(s,1^j)} q^{s+j}` for `s = 1..=imax`, where
/// `bt_{(1,1^j)} = sigma_1(j+1)` and `bt_{(i,1^j)} = b_{(i,1^j)}` for
/// `i >= 2`, solved one `i` at a time.
#[derive(Clone, Debug)]
pub struct BTable {
    pub qmax: u32,
    pub series: Vec<ZQSeries>,
    /// Coefficients below `q^i` that the recursion produced for row `i`;
    /// all must vanish.
    pub low_order_residuals: Vec<ZQSeries>,
}

impl BTable {
    /// `B_s`, `s >= 1`.
    pub fn b_series(&self, s: usize) -> &ZQSeries {
        &self.series[s - 1]
    }

    /// `b_{(i,1^j)}`, including `i = 1` as `b_{(1^{j+1})}`.
    pub fn b(&self, i: u32, j: u32) -> Rational {
        let c = self.b_series(i as usize).q_coeff(i + j);
        if i == 1 {
            c / rat(j as i64 + 1)
        } else {
            c
        }
    }

    pub fn to_constants(&self, jmax: u32) -> ConstantsTable {
        let mut t = ConstantsTable::default();
        for i in 1..=self.series.len() as u32 {
            for j in 0..=jmax {
                if i + j > self.qmax {
                    continue;
                }
                let p = if i == 1 { Provenance::Seeded } else { Provenance::Computed };
                t.insert("b", i, j, self.b(i, j), p);
            }
        }
        t
    }
}

/// Solves for `b_{(i,1^j)}`, `2 <= i <= imax`, `j <= jmax`.
pub fn b_table(imax: u32, jmax: u32, route: MultinomialRoute) -> BTable {
    let qmax = imax + jmax;
    let mut b1 = ZQSeries::zero(qmax, 0);
    for j in 0..qmax {
        b1.add_term(1 + j, vec![], rat(sigma1(j as u64 + 1) as i64));
    }
    let mut series = vec![b1];
    let mut residuals = vec![ZQSeries::zero(qmax, 0)];
    for i in 2..=imax {
        let mut rhs = ZQSeries::zero(qmax, 0);
        for ms in multiplicity_vectors(i as u64 + 1, i as u64 - 1) {
            let weight: u64 = ms.iter().enumerate().map(|(s, m)| (s as u64 + 1) * m).sum();
            let mut term = ZQSeries::constant(inv_fact(weight), qmax, 0);
            for (s0, m) in ms.iter().enumerate() {
                if *m == 0 {
                    continue;
                }
                let s = s0 + 1;
                let bs = series[s0].scale(&rat(-(s as i64)));
                term = &term * &multinomial_power(&bs, *m, route, s as u32);
            }
            rhs = &rhs + &term;
        }
        let brackets = weighted_bracket_sum(i as u64 + 1, qmax, |_| Rational::one());
        let lhs = (&rhs - &brackets).scale(&Rational::from_integer(factorial(i as u64 - 1)));
        let mut bi = ZQSeries::zero(qmax, 0);
        let mut low = ZQSeries::zero(qmax, 0);
        for ((q, _), c) in lhs.terms() {
            if *q >= i {
                bi.add_term(*q, vec![], c.clone());
            } else {
                low.add_term(*q, vec![], c.clone());
            }
        }
        series.push(bi);
        residuals.push(low);
    }
    BTable { qmax, series, low_order_residuals: residuals }
}

/// Vectors `(m_1, .., m_smax)` with `sum (s+1) m_s = total`.
fn multiplicity_vectors(total: u64, smax: u64) -> Vec<Vec<u64>> {
    let mut out = Vec::new();
    for p in partitions(total) {
        if p.iter().any(|x| *x < 2 || *x - 1 > smax) {
            continue;
        }
        let mut ms = vec![0u64; smax as usize];
        for x in p {
            ms[(x - 2) as usize] += 1;
        }
        out.push(ms);
    }
    out
}

/// `sum_{sum_j t_j = m} prod_j (c_j q^{s+j})^{t_j}/t_j!` where
/// `series = sum_j c_j q^{s+j}`.
fn multinomial_power(series: &ZQSeries, m: u64, route: MultinomialRoute, s: u32) -> ZQSeries {
    let qmax = series.qmax();
    match route {
        MultinomialRoute::Collapsed => series.pow(m as u32).scale(&inv_fact(m)),
        MultinomialRoute::Enumerated => {
            let coeffs: Vec<(u32, Rational)> =
                (s..=qmax).map(|e| (e, series.q_coeff(e))).filter(|(_, c)| !c.is_zero()).collect();
            let mut out = ZQSeries::zero(qmax, 0);
            fn rec(
                coeffs: &[(u32, Rational)],
                idx: usize,
                left: u64,
                deg: u32,
                acc: Rational,
                qmax: u32,
                out: &mut ZQSeries,
            ) {
                if left == 0 {
                    out.add_term(deg, vec![], acc);
                    return;
                }
                if idx == coeffs.len() {
                    return;
                }
                let (e, c) = &coeffs[idx];
                let mut t = 0u64;
                let mut a = acc.clone();
                let mut d = deg;
                loop {
                    rec(coeffs, idx + 1, left - t, d, &a * inv_fact(t), qmax, out);
                    t += 1;
                    if t > left || d + e > qmax {
                        break;
                    }
                    a *= c;
                    d += e;
                }
            }
            rec(&coeffs, 0, m, 0, Rational::one(), qmax, &mut out);
            out
        }
    }
}

/// `F^{x,..,x}_{k_1,..,k_N}` from the table of `B_s`.
pub fn point_series_from_b(model: &SurfaceModel, ks: &[usize], table: &BTable, qmax: u32) -> Result<ZQSeries> {
    let smax = ks.iter().max().map_or(0, |k| k + 1);
    if smax > table.series.len() {
        return Err(Error::Precondition(format!("table needs rows up to i = {smax}")));
    }
    if qmax > table.qmax {
        return Err(Error::Precondition(format!("table truncated at q^{}", table.qmax)));
    }
    let per_factor: Vec<Vec<Vec<u64>>> =
        ks.iter().map(|k| multiplicity_vectors(*k as u64 + 2, *k as u64 + 1)).collect();
    let mut total = ZQSeries::zero(qmax, 0);
    let mut idx = vec![0usize; ks.len()];
    'outer: loop {
        let chosen: Vec<&Vec<u64>> = idx.iter().zip(&per_factor).map(|(i, v)| &v[*i]).collect();
        let mut coef = Rational::one();
        let mut ms = vec![0u64; smax];
        for m in &chosen {
            let weight: u64 = m.iter().enumerate().map(|(s, x)| (s as u64 + 1) * x).sum();
            coef *= inv_fact(weight);
            for (s, x) in m.iter().enumerate() {
                coef *= inv_fact(*x);
                ms[s] += x;
            }
        }
        let mut term = ZQSeries::constant(coef, qmax, 0);
        for (s0, m) in ms.iter().enumerate() {
            if *m > 0 {
                let bs = table.b_series(s0 + 1).truncate(qmax).scale(&rat(-(s0 as i64 + 1)));
                term = &term * &bs.pow(*m as u32);
            }
        }
        total = &total + &term;
        let mut i = 0;
        while i < idx.len() {
            if idx[i] + 1 < per_factor[i].len() {
                idx[i] += 1;
                continue 'outer;
            }
            idx[i] = 0;
            i += 1;
        }
        break;
    }
    let sign = if ks.len() % 2 == 0 { rat(1) } else { rat(-1) };
    Ok((&euler_pow(-model.chi(), qmax) * &total).scale(&sign))
}

/// The constants `g`, `h`, `f` attached to the partitions `(2, 1^j)`,
/// each as `sum_j c_{(2,1^j)} q^{2+j}`.
#[derive(Clone, Debug)]
pub struct ExtractedConstants {
    pub qmax: u32,
    pub g: ZQSeries,
    /// `h` from two models sharing `chi` with different `<K, K>`.
    pub h_linear: ZQSeries,
    /// `h` from the `1_X` series extrapolated to `chi = 0`.
    pub h_extrapolated: ZQSeries,
    pub f: ZQSeries,
    /// `g + h`, using the extrapolated `h`.
    pub g_plus_h: ZQSeries,
}

impl ExtractedConstants {
    pub fn to_table(&self) -> ConstantsTable {
        let mut t = ConstantsTable::default();
        for (family, s) in [("g", &self.g), ("h", &self.h_extrapolated), ("f", &self.f)] {
            for e in 2..=self.qmax {
                t.insert(family, 2, e - 2, s.q_coeff(e), Provenance::Computed);
            }
        }
        t
    }
}

/// Models feeding [`extract_constants`].
#[derive(Clone, Debug)]
pub struct ExtractionModels {
    /// Model and degree-2 class `L` with `<K, L> != 0`, for `g`.
    pub g_model: SurfaceModel,
    pub g_class: CohClass,
    /// Two models with equal `chi` and different `<K, K>`.
    pub kk_pair: [SurfaceModel; 2],
    /// Models with distinct `chi` and one common nonzero `<K, K>`.
    pub chi_family: Vec<SurfaceModel>,
}

impl ExtractionModels {
    /// `kpos` variants: `K = L = e_1` with `<K, K> = 1` or `2`, and the
    /// `<K, K> = 1` surface padded by up to `extra_max` orthogonal classes.
    pub fn standard(extra_max: usize) -> Self {
        let base = SurfaceModel::preset("kpos:1").expect("preset");
        let g_class = base.line_bundle("L1").expect("preset line bundle");
        ExtractionModels {
            g_model: base.clone(),
            g_class,
            kk_pair: [base.clone(), SurfaceModel::preset("kpos:2").expect("preset")],
            chi_family: (0..=extra_max).map(|e| base.padded(e)).collect(),
        }
    }
}

fn kk(model: &SurfaceModel) -> Rational {
    let k = model.canonical();
    model.pair(&k, &k)
}

/// `F^{1_X}_1` divided by the Euler product.
fn reduced_f1_one(model: &SurfaceModel, qmax: u32) -> Result<ZQSeries> {
    let space = crate::fock::FockSpace::new(model.clone());
    let f = crate::operators::oracle_f(&space, &[1], &[model.one()], qmax)?.coe_z0();
    Ok(&f * &euler_pow(model.chi(), qmax))
}

/// Recovers `g`, `h` and `f` on `(2, 1^j)` from brute-force traces of
/// `G_1(L)` and `G_1(1_X)`, where the reduced `G_1(1_X)` series is
/// `chi f + <K, K> h` and the reduced `G_1(L)` series is `<K, L> g`.
pub fn extract_constants(models: &ExtractionModels, qmax: u32) -> Result<ExtractedConstants> {
    let m = &models.g_model;
    let kl = m.pair(&m.canonical(), &models.g_class);
    if kl.is_zero() {
        return Err(Error::Underdetermined("<K, L> = 0 leaves g unconstrained".into()));
    }
    if !m.cup(&m.euler(), &models.g_class).is_zero() {
        return Err(Error::Precondition("g needs e_X L = 0".into()));
    }
    let space = crate::fock::FockSpace::new(m.clone());
    let fl = crate::operators::oracle_f(&space, &[1], &[models.g_class.clone()], qmax)?.coe_z0();
    let g = (&fl * &euler_pow(m.chi(), qmax)).scale(&(Rational::one() / kl));

    let [a, b] = &models.kk_pair;
    let (kka, kkb) = (kk(a), kk(b));
    if a.chi() != b.chi() || kka == kkb {
        return Err(Error::Underdetermined("need equal chi and distinct <K, K>".into()));
    }
    let fa = reduced_f1_one(a, qmax)?;
    let fb = reduced_f1_one(b, qmax)?;
    let h_linear = (&fb - &fa).scale(&(Rational::one() / (&kkb - &kka)));
    let f = (&fa - &h_linear.scale(&kka)).scale(&frac(1, a.chi()));

    let fam = &models.chi_family;
    let kk0 = fam.first().map(kk).unwrap_or_else(Rational::zero);
    if kk0.is_zero() || fam.iter().any(|x| kk(x) != kk0) {
        return Err(Error::Underdetermined("chi family needs one common nonzero <K, K>".into()));
    }
    let samples: Vec<(i64, ZQSeries)> = fam
        .iter()
        .map(|x| {
            let s = crate::fock::FockSpace::new(x.clone());
            crate::operators::oracle_f(&s, &[1], &[x.one()], qmax).map(|f| (x.chi(), f.coe_z0()))
        })
        .collect::<Result<_>>()?;
    let at_zero = crate::verify::chi_extrapolate(&samples, 0, &|e| e as usize)?;
    let h_extrapolated = at_zero.scale(&(Rational::one() / kk0));
    let g_plus_h = &g + &h_extrapolated;
    Ok(ExtractedConstants { qmax, g, h_linear, h_extrapolated, f, g_plus_h })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigma_bracket() {
        let b = mzv_bracket(&BracketSignature::plain(&[1], &[1]), 4);
        let expect = [0, 1, 3, 4, 7];
        for (n, e) in expect.iter().enumerate() {
            assert_eq!(b.q_coeff(n as u32), rat(*e));
        }
    }

    #[test]
    fn n_powers_in_brackets() {
        // sum_n n q^n/(1-q^n)^2 from an n-power on the q-carrying slot
        let sig = BracketSignature { s: vec![Slot { w: 1, npow: 1 }], t: vec![Slot::plain(1)] };
        let b = mzv_bracket(&sig, 5);
        let mut direct = ZQSeries::zero(5, 0);
        for n in 1..=5 {
            direct = &direct + &block_q(n, 2, 1, 5).scale(&rat(n as i64));
        }
        assert_eq!(b, direct);
    }

    /// Brute force `[S | T]` by expanding every factor as a full series and
    /// balancing the auxiliary exponent explicitly.
    fn brute_bracket(s: &[u32], t: &[u32], qmax: u32) -> ZQSeries {
        fn seqs(k: usize, hi: u32) -> Vec<Vec<u32>> {
            if k == 0 {
                return vec![vec![]];
            }
            let mut out = Vec::new();
            for rest in seqs(k - 1, hi) {
                for v in 1..=hi {
                    if rest.last().is_none_or(|l| *l > v) {
                        let mut r = rest.clone();
                        r.push(v);
                        out.push(r);
                    }
                }
            }
            out
        }
        let mut z = ZQSeries::zero(qmax, 1);
        for n in seqs(s.len(), qmax) {
            for m in seqs(t.len(), qmax) {
                let mut p = ZQSeries::one(qmax, 1);
                for (w, v) in s.iter().zip(&n) {
                    p = &p * &crate::series::block(*v, *w, *w, *w as i64, qmax);
                }
                for (w, v) in t.iter().zip(&m) {
                    p = &p * &crate::series::block(*v, *w, 0, -(*w as i64), qmax);
                }
                z = &z + &p;
            }
        }
        z.coe_z0()
    }

    #[test]
    fn brackets_match_brute_force() {
        for (s, t) in [(vec![1], vec![2]), (vec![1], vec![1, 1]), (vec![2, 1], vec![1]), (vec![1, 2], vec![3])] {
            let sig = BracketSignature {
                s: s.iter().map(|w| Slot::plain(*w)).collect(),
                t: t.iter().map(|w| Slot::plain(*w)).collect(),
            };
            assert_eq!(mzv_bracket(&sig, 7), brute_bracket(&s, &t, 7), "{s:?} | {t:?}");
        }
    }

    #[test]
    fn brackets_are_symmetric() {
        for (s, t) in composition_pairs(5) {
            let a = mzv_bracket(&BracketSignature::plain(&s, &t), 8);
            let b = mzv_bracket(&BracketSignature::plain(&t, &s), 8);
            assert_eq!(a, b);
        }
    }

    #[test]
    fn theta_routes_agree() {
        for preset in ["minimal", "two-class", "kpos:3"] {
            let m = SurfaceModel::preset(preset).unwrap();
            for alpha in [m.one(), m.point(), m.canonical(), m.e(1)] {
                for k in 0..=3 {
                    assert_eq!(theta(&m, &alpha, k, 6), theta_genpartitions(&m, &alpha, k, 6));
                }
            }
        }
    }

    #[test]
    fn odd_point_thetas_vanish() {
        let m = SurfaceModel::preset("minimal").unwrap();
        for k in [1, 3] {
            assert!(closed_fk_point(&m, &rat(1), k, 8).is_zero());
        }
        assert!(!closed_fk_point(&m, &rat(1), 2, 8).is_zero());
    }

    #[test]
    fn f0_point_is_sigma_series() {
        let m = SurfaceModel::preset("two-class").unwrap();
        let expect = &euler_pow(-4, 6) * &sigma_series(6);
        assert_eq!(closed_f0(&m, &m.point(), 6), expect);
        assert_eq!(closed_fk_point(&m, &rat(1), 0, 6), expect);
    }

    #[test]
    fn known_b_values() {
        let t = b_table(7, 4, MultinomialRoute::Collapsed);
        assert_eq!(t.b(3, 0), frac(-1, 3));
        assert_eq!(t.b(5, 0), frac(2, 5));
        assert_eq!(t.b(7, 0), frac(-5, 7));
        for j in 0..=4 {
            assert_eq!(t.b(1, j), Rational::new(BigInt::from(sigma1(j as u64 + 1)), BigInt::from(j + 1)));
            assert!(t.b(2, j).is_zero());
            assert!(t.b(4, j).is_zero());
            assert!(t.b(6, j).is_zero());
        }
        assert!(t.low_order_residuals.iter().all(|r| r.is_zero()));
    }

    #[test]
    fn multinomial_routes_agree() {
        let a = b_table(6, 4, MultinomialRoute::Collapsed);
        let b = b_table(6, 4, MultinomialRoute::Enumerated);
        assert_eq!(a.series, b.series);
    }

    #[test]
    fn point_series_single_matches_brackets() {
        let m = SurfaceModel::preset("two-class").unwrap();
        let t = b_table(5, 8, MultinomialRoute::Collapsed);
        for k in 0..=4 {
            assert_eq!(point_series_from_b(&m, &[k], &t, 8).unwrap(), closed_fk_point(&m, &rat(1), k, 8));
        }
    }

    #[test]
    fn constants_export() {
        let t = b_table(7, 4, MultinomialRoute::Collapsed).to_constants(4);
        let csv = t.to_csv();
        assert!(csv.contains("b,5,0,2/5,computed"));
        assert!(csv.contains("b,1,1,3/2,seeded"));
        assert_eq!(t.to_json(), t.clone().to_json());
    }

    #[test]
    fn theta_at_k0_is_sigma_series() {
        let m = SurfaceModel::preset("three-class").unwrap();
        assert_eq!(theta(&m, &m.point(), 0, 6), sigma_series(6));
    }

    #[test]
    fn unbalanced_trace_carries_z_power() {
        let m = SurfaceModel::preset("minimal").unwrap();
        let lam = GenPartition::from_parts(&[-2, 1]);
        let t = a_lambda_trace(&m, &lam, &m.point(), 4);
        assert!(t.terms().all(|((_, z), _)| z == &vec![-1]));
    }

    #[test]
    fn zero_pairing_is_underdetermined() {
        let mut models = ExtractionModels::standard(1);
        models.g_model = SurfaceModel::preset("minimal").unwrap();
        models.g_class = models.g_model.e(1);
        assert!(matches!(extract_constants(&models, 3), Err(Error::Underdetermined(_))));
        let mut same = ExtractionModels::standard(1);
        same.kk_pair[1] = same.kk_pair[0].clone();
        assert!(matches!(extract_constants(&same, 3), Err(Error::Underdetermined(_))));
    }

    mod against_oracle {
        use super::*;
        use crate::combinatorics::enum_balanced;
        use crate::fock::FockSpace;
        use crate::operators::{oracle_f, oracle_trace_product};

        #[test]
        fn single_trace_formula() {
            for preset in ["minimal", "two-class"] {
                let m = SurfaceModel::preset(preset).unwrap();
                let space = FockSpace::new(m.clone());
                let q = 4;
                for len in 1..=4 {
                    for lam in enum_balanced(len, q as u64) {
                        for alpha in [m.one(), m.point(), m.canonical()] {
                            let o = oracle_trace_product(&space, &[lam.clone()], &[alpha.clone()], true, q).unwrap();
                            assert_eq!(a_lambda_trace(&m, &lam, &alpha, q), o, "{preset} {lam} {alpha}");
                        }
                    }
                }
            }
        }

        #[test]
        fn closed_forms_match_traces() {
            let q = 4;
            for preset in ["minimal", "two-class", "kpos"] {
                let m = SurfaceModel::preset(preset).unwrap();
                let space = FockSpace::new(m.clone());
                for alpha in [m.one(), m.point(), m.canonical(), m.e(1)] {
                    let o = oracle_f(&space, &[0], &[alpha.clone()], q).unwrap();
                    assert_eq!(o.coe_z0(), closed_f0(&m, &alpha, q), "{preset} F0 {alpha}");
                }
                for alpha in [m.point(), m.canonical(), m.e(1)] {
                    let o = oracle_f(&space, &[1], &[alpha.clone()], q).unwrap();
                    assert_eq!(o.coe_z0(), closed_f1(&m, &alpha, q).unwrap(), "{preset} F1 {alpha}");
                }
                for k in 0..=3 {
                    let o = oracle_f(&space, &[k], &[m.point()], q).unwrap();
                    assert_eq!(o.coe_z0(), closed_fk_point(&m, &rat(1), k, q), "{preset} F{k}(x)");
                }
            }
        }

        #[test]
        fn probe_f1_one() {
            for preset in ["minimal", "two-class", "kpos", "kpos:2", "three-class"] {
                let m = SurfaceModel::preset(preset).unwrap();
                let space = FockSpace::new(m.clone());
                let o = oracle_f(&space, &[1], &[m.one()], 5).unwrap().coe_z0();
                let red = &o * &euler_pow(m.chi(), 5);
                eprintln!("{preset} chi={} raw={} reduced={}", m.chi(), o, red);
            }
        }
    }
}
