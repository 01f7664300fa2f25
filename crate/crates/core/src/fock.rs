//! Heisenberg algebra acting on the Fock space of a surface.
//!
//! A state is a linear combination of creation monomials
//! `a_{-n_1}(b_1) .. a_{-n_k}(b_k)|0>` with `b_i` basis classes. Creation
//! operators commute, so a monomial is a sorted multiset of `(n, b)`.
//! Commutators are `[a_m(u), a_n(v)] = -m delta_{m,-n} <u, v>`.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex, OnceLock};

use num_bigint::BigInt;
use num_traits::{One, Zero};
use rayon::prelude::*;

use crate::combinatorics::GenPartition;
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::rational::{rat, Rational};
use crate::series::ZQSeries;
use crate::surface::{CohClass, SurfaceModel};

/// `(n, b)`: the creation operator `a_{-n}` on basis class `b`.
pub type Factor = (u32, usize);

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Monomial(Vec<Factor>);

impl Monomial {
    pub fn vacuum() -> Self {
        Monomial(Vec::new())
    }

    pub fn from_factors(mut fs: Vec<Factor>) -> Self {
        assert!(fs.iter().all(|(n, _)| *n > 0), "creation factors need n >= 1");
        fs.sort_unstable();
        Monomial(fs)
    }

    pub fn factors(&self) -> &[Factor] {
        &self.0
    }

    pub fn weight(&self) -> u32 {
        self.0.iter().map(|(n, _)| n).sum()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Multiset of the `n` parts, ascending.
    pub fn shape(&self) -> Vec<u32> {
        let mut s: Vec<u32> = self.0.iter().map(|(n, _)| *n).collect();
        s.sort_unstable();
        s
    }

    pub fn count(&self, f: Factor) -> usize {
        self.0.iter().filter(|g| **g == f).count()
    }

    pub fn with(&self, f: Factor) -> Self {
        let mut v = self.0.clone();
        let pos = v.partition_point(|g| *g < f);
        v.insert(pos, f);
        Monomial(v)
    }

    pub fn with_all(&self, fs: &[Factor]) -> Self {
        let mut v = self.0.clone();
        v.extend_from_slice(fs);
        v.sort_unstable();
        Monomial(v)
    }

    /// Removes one copy of `f`; `None` if absent.
    pub fn without(&self, f: Factor) -> Option<Self> {
        let pos = self.0.iter().position(|g| *g == f)?;
        let mut v = self.0.clone();
        v.remove(pos);
        Some(Monomial(v))
    }

    /// Distinct factors with multiplicities.
    pub fn grouped(&self) -> Vec<(Factor, usize)> {
        let mut out: Vec<(Factor, usize)> = Vec::new();
        for f in &self.0 {
            match out.last_mut() {
                Some((g, c)) if g == f => *c += 1,
                _ => out.push((*f, 1)),
            }
        }
        out
    }

    /// `self / d` when `d` divides `self` as a multiset.
    pub fn divide(&self, d: &Monomial) -> Option<Monomial> {
        let mut rest = Vec::with_capacity(self.0.len());
        let mut j = 0;
        for f in &self.0 {
            if j < d.0.len() && d.0[j] == *f {
                j += 1;
            } else {
                if j < d.0.len() && d.0[j] < *f {
                    return None;
                }
                rest.push(*f);
            }
        }
        if j == d.0.len() {
            Some(Monomial(rest))
        } else {
            None
        }
    }
}

/// Keys of a linear combination of Fock states.
pub trait FockKey: Ord + Clone + Send + Sync {
    fn monomial(&self) -> &Monomial;
    fn replace(&self, m: Monomial) -> Self;
}

impl FockKey for Monomial {
    fn monomial(&self) -> &Monomial {
        self
    }
    fn replace(&self, m: Monomial) -> Self {
        m
    }
}

/// A state tagged with exponents of auxiliary variables `z_1..z_k`.
pub type ZKey = (Vec<i64>, Monomial);

impl FockKey for ZKey {
    fn monomial(&self) -> &Monomial {
        &self.1
    }
    fn replace(&self, m: Monomial) -> Self {
        (self.0.clone(), m)
    }
}

/// A finite linear combination with exact coefficients; zeros are pruned.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinComb<K: Ord> {
    terms: BTreeMap<K, Rational>,
}

impl<K: Ord> Default for LinComb<K> {
    fn default() -> Self {
        LinComb { terms: BTreeMap::new() }
    }
}

impl<K: Ord + Clone> LinComb<K> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn single(k: K, c: Rational) -> Self {
        let mut v = Self::new();
        v.add_term(k, c);
        v
    }

    pub fn add_term(&mut self, k: K, c: Rational) {
        if c.is_zero() {
            return;
        }
        match self.terms.get_mut(&k) {
            Some(v) => {
                *v += c;
                if v.is_zero() {
                    self.terms.remove(&k);
                }
            }
            None => {
                self.terms.insert(k, c);
            }
        }
    }

    pub fn add_scaled(&mut self, other: &Self, c: &Rational) {
        if c.is_zero() {
            return;
        }
        for (k, v) in &other.terms {
            self.add_term(k.clone(), v * c);
        }
    }

    pub fn scale(&self, c: &Rational) -> Self {
        let mut out = Self::new();
        out.add_scaled(self, c);
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.add_scaled(other, &-Rational::one());
        out
    }

    pub fn coeff(&self, k: &K) -> Rational {
        self.terms.get(k).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&K, &Rational)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

pub type FockVector = LinComb<Monomial>;
pub type ZFockVector = LinComb<ZKey>;

impl<K: FockKey> LinComb<K> {
    /// Applies a monomial-level linear map, keeping the rest of each key.
    pub fn act<F>(&self, f: F) -> Self
    where
        F: Fn(&Monomial, &mut dyn FnMut(Monomial, Rational)),
    {
        let mut out = Self::new();
        for (k, c) in &self.terms {
            f(k.monomial(), &mut |m, d| out.add_term(k.replace(m), c * d));
        }
        out
    }

    /// Terms whose monomial has the given weight.
    pub fn weight_part(&self, w: u32) -> Self {
        LinComb {
            terms: self
                .terms
                .iter()
                .filter(|(k, _)| k.monomial().weight() == w)
                .map(|(k, c)| (k.clone(), c.clone()))
                .collect(),
        }
    }

    pub fn max_weight(&self) -> u32 {
        self.terms.keys().map(|k| k.monomial().weight()).max().unwrap_or(0)
    }
}

impl FockVector {
    pub fn vacuum() -> Self {
        Self::single(Monomial::vacuum(), Rational::one())
    }

    pub fn basis(m: Monomial) -> Self {
        Self::single(m, Rational::one())
    }

    /// Tags every term with `z^0` in `nvars` variables.
    pub fn lift(&self, nvars: usize) -> ZFockVector {
        let mut out = ZFockVector::new();
        for (m, c) in self.iter() {
            out.add_term((vec![0; nvars], m.clone()), c.clone());
        }
        out
    }
}

impl ZFockVector {
    /// Multiplies by `c z^dz`.
    pub fn shift_z(&self, dz: &[i64], c: &Rational) -> Self {
        let mut out = Self::new();
        for ((z, m), v) in self.iter() {
            let z = z.iter().zip(dz).map(|(a, b)| a + b).collect();
            out.add_term((z, m.clone()), v * c);
        }
        out
    }

    /// The coefficient of a monomial as a Laurent polynomial in `z`.
    pub fn z_coeff(&self, m: &Monomial) -> BTreeMap<Vec<i64>, Rational> {
        self.iter()
            .filter(|((_, n), _)| n == m)
            .map(|((z, _), c)| (z.clone(), c.clone()))
            .collect()
    }
}

/// `<a, b_i>` for every basis index `i`.
pub fn pairings_with_basis(model: &SurfaceModel, a: &CohClass) -> Vec<Rational> {
    (0..model.dim())
        .map(|i| model.pair(a, &CohClass::basis(model.r(), i)))
        .collect()
}

/// `a_m(alpha)` on one monomial.
pub fn heisenberg_on_monomial(
    model: &SurfaceModel,
    m: i64,
    alpha: &CohClass,
    mono: &Monomial,
    emit: &mut dyn FnMut(Monomial, Rational),
) {
    if m < 0 {
        let n = (-m) as u32;
        for (b, c) in alpha.support() {
            emit(mono.with((n, b)), c.clone());
        }
    } else if m > 0 {
        let n = m as u32;
        let mut pairs: Option<Vec<Rational>> = None;
        for ((k, b), count) in mono.grouped() {
            if k != n {
                continue;
            }
            let p = pairs.get_or_insert_with(|| pairings_with_basis(model, alpha));
            if p[b].is_zero() {
                continue;
            }
            let c = rat(-(count as i64) * m) * &p[b];
            emit(mono.without((k, b)).expect("factor present"), c);
        }
    }
}

/// `a_m(alpha) v`. `a_0` acts as zero.
pub fn apply_heisenberg<K: FockKey>(
    model: &SurfaceModel,
    m: i64,
    alpha: &CohClass,
    v: &LinComb<K>,
) -> LinComb<K> {
    v.act(|mono, emit| heisenberg_on_monomial(model, m, alpha, mono, emit))
}

/// `(a_{p_1} .. a_{p_l})(alpha) v`: the diagonal push-forward of `alpha`
/// expanded in Künneth components, with slot `i` feeding `a_{p_i}` and the
/// rightmost operator applied first.
pub fn apply_ordered<K: FockKey>(
    model: &SurfaceModel,
    parts: &[i64],
    alpha: &CohClass,
    v: &LinComb<K>,
) -> LinComb<K> {
    let mut out = LinComb::new();
    for (coef, slots) in model.diagonal(parts.len(), alpha) {
        let mut w = v.clone();
        for (p, b) in parts.iter().zip(&slots).rev() {
            if w.is_zero() {
                break;
            }
            w = apply_heisenberg(model, *p, &CohClass::basis(model.r(), *b), &w);
        }
        out.add_scaled(&w, &coef);
    }
    out
}

/// `a_lambda(alpha) v` straight from the definition: Künneth expansion with
/// factors ordered `.. a_{-2} a_{-1} a_1 a_2 ..`.
pub fn apply_a_lambda_naive<K: FockKey>(
    model: &SurfaceModel,
    lambda: &GenPartition,
    alpha: &CohClass,
    v: &LinComb<K>,
) -> LinComb<K> {
    apply_ordered(model, &lambda.parts(), alpha, v)
}

/// `a_lambda(alpha) / lambda! v` on one monomial.
///
/// Annihilators are contracted against the monomial's factors first. What is
/// left of the diagonal class after contracting with classes `b_1..b_p` is
/// the diagonal push-forward of `alpha b_1 .. b_p`, which then feeds the
/// creation operators.
pub fn a_lambda_normalized_on_monomial(
    model: &SurfaceModel,
    lambda: &GenPartition,
    alpha: &CohClass,
    mono: &Monomial,
    emit: &mut dyn FnMut(Monomial, Rational),
) {
    let pos: Vec<(u32, u32)> = lambda
        .multiplicities()
        .iter()
        .filter(|(p, _)| **p > 0)
        .map(|(p, m)| (*p as u32, *m))
        .collect();
    let neg: Vec<u32> = lambda.parts().iter().filter(|p| **p < 0).map(|p| (-p) as u32).collect();
    let neg_fact: BigInt = lambda
        .multiplicities()
        .iter()
        .filter(|(p, _)| **p < 0)
        .fold(BigInt::one(), |acc, (_, m)| acc * crate::rational::factorial(*m as u64));
    let inv_neg = Rational::new(BigInt::one(), neg_fact);
    if (mono.weight() as u64) < lambda.pos_weight() {
        return;
    }
    let groups = mono.grouped();
    let mut removed: Vec<Factor> = Vec::new();
    select(model, &pos, 0, &groups, alpha.clone(), Rational::one(), &mut removed, &mut |gamma, c, removed| {
        let rest = remove_all(mono, removed);
        if neg.is_empty() {
            let v = model.integral(&gamma);
            if !v.is_zero() {
                emit(rest, c * v);
            }
            return;
        }
        let c = c * &inv_neg;
        for (b, gb) in gamma.support() {
            for (kc, slots) in model.diagonal_basis(neg.len(), b).iter() {
                let fs: Vec<Factor> = neg.iter().zip(slots).map(|(n, s)| (*n, *s)).collect();
                emit(rest.with_all(&fs), &c * gb * kc);
            }
        }
    });
}

fn remove_all(mono: &Monomial, removed: &[Factor]) -> Monomial {
    let mut sorted = removed.to_vec();
    sorted.sort_unstable();
    mono.divide(&Monomial(sorted)).expect("removed factors come from the monomial")
}

#[allow(clippy::too_many_arguments)]
fn select(
    model: &SurfaceModel,
    pos: &[(u32, u32)],
    idx: usize,
    groups: &[(Factor, usize)],
    gamma: CohClass,
    coef: Rational,
    removed: &mut Vec<Factor>,
    done: &mut dyn FnMut(CohClass, Rational, &[Factor]),
) {
    if gamma.is_zero() {
        return;
    }
    if idx == pos.len() {
        done(gamma, coef, removed);
        return;
    }
    let (n, m) = pos[idx];
    let avail: Vec<(usize, usize)> =
        groups.iter().filter(|((k, _), _)| *k == n).map(|((_, b), c)| (*b, *c)).collect();
    let total: usize = avail.iter().map(|(_, c)| c).sum();
    if total < m as usize {
        return;
    }
    let sign = rat(-(n as i64)).pow(m as i32);
    distribute(model, &avail, 0, m as usize, gamma, Rational::one(), removed, n, &mut |g, c, removed| {
        select(model, pos, idx + 1, groups, g, &coef * &sign * c, removed, done);
    });
}

#[allow(clippy::too_many_arguments)]
fn distribute(
    model: &SurfaceModel,
    avail: &[(usize, usize)],
    i: usize,
    left: usize,
    gamma: CohClass,
    coef: Rational,
    removed: &mut Vec<Factor>,
    n: u32,
    done: &mut dyn FnMut(CohClass, Rational, &mut Vec<Factor>),
) {
    if gamma.is_zero() {
        return;
    }
    if left == 0 {
        done(gamma, coef, removed);
        return;
    }
    if i == avail.len() {
        return;
    }
    let (b, cnt) = avail[i];
    let bclass = CohClass::basis(model.r(), b);
    let mut g = gamma;
    for j in 0..=left.min(cnt) {
        if j > 0 {
            g = model.cup(&g, &bclass);
            removed.push((n, b));
        }
        let c = &coef * Rational::from_integer(crate::rational::binomial(cnt as i64, j as i64));
        distribute(model, avail, i + 1, left - j, g.clone(), c, removed, n, done);
    }
    for _ in 0..left.min(cnt) {
        removed.pop();
    }
}

/// `a_lambda(alpha) / lambda! v`.
pub fn apply_a_lambda_normalized<K: FockKey>(
    model: &SurfaceModel,
    lambda: &GenPartition,
    alpha: &CohClass,
    v: &LinComb<K>,
) -> LinComb<K> {
    v.act(|mono, emit| a_lambda_normalized_on_monomial(model, lambda, alpha, mono, emit))
}

/// `a_lambda(alpha) v`.
pub fn apply_a_lambda<K: FockKey>(
    model: &SurfaceModel,
    lambda: &GenPartition,
    alpha: &CohClass,
    v: &LinComb<K>,
) -> LinComb<K> {
    let f = Rational::from_integer(lambda.factorial());
    apply_a_lambda_normalized(model, lambda, alpha, v).scale(&f)
}

/// `<v, |1>>` where `|1> = exp(a_{-1}(1_X))|0>`.
pub fn vacuum_to_one(model: &SurfaceModel, v: &FockVector) -> Rational {
    let with_one = pairings_with_basis(model, &model.one());
    let mut acc = Rational::zero();
    for (m, c) in v.iter() {
        let mut t = c.clone();
        for (n, b) in m.factors() {
            if *n != 1 {
                t = Rational::zero();
                break;
            }
            t *= &with_one[*b];
        }
        acc += t;
    }
    acc
}

/// Pairing-dual data for one weight space.
#[derive(Debug)]
pub struct WeightSpace {
    pub weight: u32,
    pub basis: Vec<Monomial>,
    index: HashMap<Monomial, usize>,
    block_of: Vec<usize>,
    blocks: Vec<GramBlock>,
}

/// Monomials sharing one shape; the pairing is block-diagonal by shape.
#[derive(Debug)]
struct GramBlock {
    members: Vec<usize>,
    gram: Matrix,
    inv: Matrix,
}

impl WeightSpace {
    pub fn index_of(&self, m: &Monomial) -> Option<usize> {
        self.index.get(m).copied()
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Gram matrix entry between two basis monomials.
    pub fn gram_entry(&self, i: usize, j: usize) -> Rational {
        let bi = self.block_of[i];
        if bi != self.block_of[j] {
            return Rational::zero();
        }
        let b = &self.blocks[bi];
        let pi = b.members.iter().position(|x| *x == i).expect("member");
        let pj = b.members.iter().position(|x| *x == j).expect("member");
        b.gram[pi][pj].clone()
    }

    /// The dual basis vector `u_j^v`, with `<u_i, u_j^v> = delta_ij`.
    pub fn dual(&self, j: usize) -> FockVector {
        let b = &self.blocks[self.block_of[j]];
        let pj = b.members.iter().position(|x| *x == j).expect("member");
        let mut v = FockVector::new();
        for (pk, k) in b.members.iter().enumerate() {
            v.add_term(self.basis[*k].clone(), b.inv[pk][pj].clone());
        }
        v
    }
}

/// The Fock space of a model with memoized weight spaces.
///
/// The memo is the only shared mutable state; each weight is computed at
/// most once even under concurrent access.
#[derive(Debug)]
pub struct FockSpace {
    model: SurfaceModel,
    spaces: Mutex<HashMap<u32, Arc<OnceLock<Result<Arc<WeightSpace>>>>>>,
}

impl FockSpace {
    pub fn new(model: SurfaceModel) -> Self {
        FockSpace { model, spaces: Mutex::new(HashMap::new()) }
    }

    pub fn model(&self) -> &SurfaceModel {
        &self.model
    }

    /// All creation monomials of weight `n`, sorted.
    pub fn basis(&self, n: u32) -> Vec<Monomial> {
        enumerate_basis(self.model.dim(), n)
    }

    pub fn weight_space(&self, n: u32) -> Result<Arc<WeightSpace>> {
        let cell = {
            let mut map = self.spaces.lock().expect("weight-space memo");
            map.entry(n).or_insert_with(|| Arc::new(OnceLock::new())).clone()
        };
        cell.get_or_init(|| self.build_weight_space(n).map(Arc::new)).clone()
    }

    fn build_weight_space(&self, n: u32) -> Result<WeightSpace> {
        let basis = self.basis(n);
        let index: HashMap<Monomial, usize> =
            basis.iter().enumerate().map(|(i, m)| (m.clone(), i)).collect();
        let mut by_shape: BTreeMap<Vec<u32>, Vec<usize>> = BTreeMap::new();
        for (i, m) in basis.iter().enumerate() {
            by_shape.entry(m.shape()).or_default().push(i);
        }
        let mut block_of = vec![0; basis.len()];
        let mut blocks = Vec::new();
        for members in by_shape.into_values() {
            let gram: Matrix = members
                .iter()
                .map(|i| members.iter().map(|j| self.pair_monomials(&basis[*i], &basis[*j])).collect())
                .collect();
            let inv = linalg::inverse(&gram).ok_or(Error::SingularGram(n as usize))?;
            for i in &members {
                block_of[*i] = blocks.len();
            }
            blocks.push(GramBlock { members, gram, inv });
        }
        Ok(WeightSpace { weight: n, basis, index, block_of, blocks })
    }

    /// `<u, w>` for creation monomials, using that the adjoint of `a_m(b)`
    /// is `(-1)^m a_{-m}(b)`.
    pub fn pair_monomials(&self, u: &Monomial, w: &Monomial) -> Rational {
        if u.shape() != w.shape() {
            return Rational::zero();
        }
        let mut v = FockVector::basis(w.clone());
        let mut sign = 1i64;
        for (n, b) in u.factors() {
            if n % 2 == 1 {
                sign = -sign;
            }
            v = apply_heisenberg(&self.model, *n as i64, &CohClass::basis(self.model.r(), *b), &v);
            if v.is_zero() {
                return Rational::zero();
            }
        }
        v.coeff(&Monomial::vacuum()) * rat(sign)
    }

    pub fn pair(&self, u: &FockVector, w: &FockVector) -> Rational {
        let mut acc = Rational::zero();
        for (a, ca) in u.iter() {
            for (b, cb) in w.iter() {
                if a.shape() == b.shape() {
                    acc += ca * cb * self.pair_monomials(a, b);
                }
            }
        }
        acc
    }

    /// `sum_j <O u_j, u_j^v> q^n` over the weight-`n` basis, read off through
    /// the Gram-dual basis. `op` returns states tagged with `nvars` `z`
    /// exponents.
    pub fn trace_block<F>(&self, n: u32, nvars: usize, qmax: u32, op: F) -> Result<ZQSeries>
    where
        F: Fn(&Monomial) -> ZFockVector + Sync,
    {
        let ws = self.weight_space(n)?;
        let parts: Vec<ZQSeries> = (0..ws.dim())
            .into_par_iter()
            .map(|j| {
                let image = op(&ws.basis[j]);
                let b = &ws.blocks[ws.block_of[j]];
                let pj = b.members.iter().position(|x| *x == j).expect("member");
                let mut s = ZQSeries::zero(qmax, nvars);
                for ((z, m), c) in image.iter() {
                    if m.weight() != n {
                        continue;
                    }
                    let Some(i) = ws.index_of(m) else { continue };
                    if ws.block_of[i] != ws.block_of[j] {
                        continue;
                    }
                    let pi = b.members.iter().position(|x| *x == i).expect("member");
                    // <u_i, u_j^v> = sum_k G_ik D_kj
                    let mut pairing = Rational::zero();
                    for pk in 0..b.members.len() {
                        pairing += &b.gram[pi][pk] * &b.inv[pk][pj];
                    }
                    s.add_term(n, z.clone(), c * pairing);
                }
                s
            })
            .collect();
        Ok(parts.into_iter().fold(ZQSeries::zero(qmax, nvars), |a, b| &a + &b))
    }
}

/// Sorted creation monomials of weight `n` over `dim` colours.
pub fn enumerate_basis(dim: usize, n: u32) -> Vec<Monomial> {
    let mut out = Vec::new();
    let mut cur: Vec<Factor> = Vec::new();
    // factors are generated in non-increasing (n, b) order
    fn rec(dim: usize, rest: u32, max: Factor, cur: &mut Vec<Factor>, out: &mut Vec<Monomial>) {
        if rest == 0 {
            out.push(Monomial::from_factors(cur.clone()));
            return;
        }
        for n in (1..=rest.min(max.0)).rev() {
            let top_b = if n == max.0 { max.1 } else { dim - 1 };
            for b in (0..=top_b).rev() {
                cur.push((n, b));
                rec(dim, rest - n, (n, b), cur, out);
                cur.pop();
            }
        }
    }
    rec(dim, n, (n.max(1), dim - 1), &mut cur, &mut out);
    out.sort();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::combinatorics::enum_balanced;
    use crate::series::euler_pow;
    use proptest::prelude::*;

    fn model() -> SurfaceModel {
        SurfaceModel::preset("two-class").unwrap()
    }

    #[test]
    fn basis_counts_match_euler_product() {
        for m in [SurfaceModel::preset("minimal").unwrap(), model()] {
            let e = euler_pow(-m.chi(), 6);
            for n in 0..=6 {
                assert_eq!(rat(enumerate_basis(m.dim(), n).len() as i64), e.q_coeff(n));
            }
        }
    }

    #[test]
    fn gram_examples() {
        let m = model();
        let fs = FockSpace::new(m.clone());
        let x = m.point_index();
        for a in 0..m.dim() {
            for b in 0..m.dim() {
                let got = fs.pair_monomials(
                    &Monomial::from_factors(vec![(1, a)]),
                    &Monomial::from_factors(vec![(1, b)]),
                );
                assert_eq!(got, m.gram()[a][b]);
            }
        }
        let u = Monomial::from_factors(vec![(2, 0)]);
        let w = Monomial::from_factors(vec![(2, x)]);
        assert_eq!(fs.pair_monomials(&u, &w), rat(-2));
    }

    #[test]
    fn gram_is_symmetric_and_dual_is_dual() {
        let fs = FockSpace::new(model());
        let ws = fs.weight_space(3).unwrap();
        for i in 0..ws.dim() {
            for j in 0..ws.dim() {
                assert_eq!(ws.gram_entry(i, j), ws.gram_entry(j, i));
            }
        }
        for j in (0..ws.dim()).step_by(7) {
            let d = ws.dual(j);
            for i in 0..ws.dim() {
                let p = fs.pair(&FockVector::basis(ws.basis[i].clone()), &d);
                assert_eq!(p, if i == j { rat(1) } else { rat(0) });
            }
        }
    }

    #[test]
    fn concurrent_memo_builds_once() {
        let fs = FockSpace::new(model());
        let spaces: Vec<_> = (0..8).into_par_iter().map(|_| fs.weight_space(3).unwrap()).collect();
        assert!(spaces.windows(2).all(|w| Arc::ptr_eq(&w[0], &w[1])));
    }

    #[test]
    fn trace_of_identity_is_euler_product() {
        let m = model();
        let fs = FockSpace::new(m.clone());
        let mut total = ZQSeries::zero(4, 0);
        for n in 0..=4 {
            let t = fs
                .trace_block(n, 0, 4, |u| FockVector::basis(u.clone()).lift(0))
                .unwrap();
            total = &total + &t;
        }
        assert_eq!(total, euler_pow(-m.chi(), 4));
    }

    #[test]
    fn vacuum_pairing() {
        let m = model();
        let x = m.point_index();
        let v = FockVector::basis(Monomial::from_factors(vec![(1, x), (1, x)]));
        assert_eq!(vacuum_to_one(&m, &v), rat(1));
        let w = FockVector::basis(Monomial::from_factors(vec![(2, x)]));
        assert_eq!(vacuum_to_one(&m, &w), rat(0));
        let u = FockVector::basis(Monomial::from_factors(vec![(1, 1)]));
        assert_eq!(vacuum_to_one(&m, &u), rat(0));
    }

    #[test]
    fn first_mode_cup_product() {
        // -(a_{-1} a_1)(alpha) acts on weight one as cup product by alpha
        let m = model();
        let lam = GenPartition::from_parts(&[-1, 1]);
        for a in 0..m.dim() {
            let alpha = CohClass::basis(m.r(), a);
            for b in 0..m.dim() {
                let v = FockVector::basis(Monomial::from_factors(vec![(1, b)]));
                let got = apply_a_lambda(&m, &lam, &alpha, &v).scale(&rat(-1));
                let prod = m.cup(&alpha, &CohClass::basis(m.r(), b));
                let mut expect = FockVector::new();
                for (c, k) in prod.support() {
                    expect.add_term(Monomial::from_factors(vec![(1, c)]), k.clone());
                }
                assert_eq!(got, expect);
            }
        }
    }

    #[test]
    fn fast_a_lambda_matches_definition() {
        let m = model();
        let basis: Vec<Monomial> = (0..=4).flat_map(|n| enumerate_basis(m.dim(), n)).collect();
        let classes: Vec<CohClass> = vec![
            m.one(),
            m.point(),
            m.e(1).add(&m.e(2).scale(&rat(2))),
            m.one().add(&m.e(2)).add(&m.point().scale(&rat(3))),
        ];
        let mut lambdas: Vec<GenPartition> = (2..=4).flat_map(|l| enum_balanced(l, 3)).collect();
        lambdas.push(GenPartition::from_parts(&[1, 2]));
        lambdas.push(GenPartition::from_parts(&[-1, -1, 2, 3]));
        lambdas.push(GenPartition::from_parts(&[-3]));
        lambdas.push(GenPartition::from_parts(&[1, 1]));
        for (t, u) in basis.iter().enumerate().step_by(5) {
            let v = FockVector::basis(u.clone());
            for lam in &lambdas {
                let alpha = &classes[t % classes.len()];
                let fast = apply_a_lambda(&m, lam, alpha, &v);
                let slow = apply_a_lambda_naive(&m, lam, alpha, &v);
                assert_eq!(fast, slow, "lambda {lam} on {u:?}");
            }
        }
    }

    fn arb_class(r: usize) -> impl Strategy<Value = CohClass> {
        prop::collection::vec(-2i64..=2, r + 2).prop_map(move |v| {
            CohClass::from_parts(rat(v[0]), v[1..=r].iter().map(|x| rat(*x)).collect(), rat(v[r + 1]))
        })
    }

    fn arb_state(dim: usize) -> impl Strategy<Value = FockVector> {
        prop::collection::vec((0u32..=3, any::<prop::sample::Index>(), -3i64..=3), 1..4).prop_map(
            move |ts| {
                let mut v = FockVector::new();
                for (w, idx, c) in ts {
                    let b = enumerate_basis(dim, w);
                    v.add_term(idx.get(&b).clone(), rat(c));
                }
                v
            },
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn commutator_relation(
            m1 in prop::sample::select(vec![-3i64, -2, -1, 1, 2, 3]),
            m2 in prop::sample::select(vec![-3i64, -2, -1, 1, 2, 3]),
            a in arb_class(2),
            b in arb_class(2),
            v in arb_state(4),
        ) {
            let m = model();
            let ab = apply_heisenberg(&m, m1, &a, &apply_heisenberg(&m, m2, &b, &v));
            let ba = apply_heisenberg(&m, m2, &b, &apply_heisenberg(&m, m1, &a, &v));
            let expect = if m1 == -m2 { v.scale(&(rat(-m1) * m.pair(&a, &b))) } else { FockVector::new() };
            prop_assert_eq!(ab.sub(&ba), expect);
        }

        #[test]
        fn adjoint_relation(
            n in 1i64..=3,
            a in arb_class(2),
            u in arb_state(4),
            w in arb_state(4),
        ) {
            // <a_{-n}(a) u, w> = (-1)^n <u, a_n(a) w>
            let m = model();
            let fs = FockSpace::new(m.clone());
            let lhs = fs.pair(&apply_heisenberg(&m, -n, &a, &u), &w);
            let rhs = fs.pair(&u, &apply_heisenberg(&m, n, &a, &w));
            let sign = if n % 2 == 0 { rat(1) } else { rat(-1) };
            prop_assert_eq!(lhs, rhs * sign);
        }
    }
}
