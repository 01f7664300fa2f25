//! Truncated power series in `q` with Laurent-polynomial coefficients in
//! auxiliary variables `z_1..z_k`.
//!
//! Terms are stored sparsely by `(q exponent, z exponents)`. Zero
//! coefficients are never stored, and every product silently drops terms
//! past the series' `q` truncation order.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{binomial, format_rational, parse_rational, rat, sigma1, Rational};

pub type TermKey = (u32, Vec<i64>);

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ZQSeries {
    qmax: u32,
    nvars: usize,
    terms: BTreeMap<TermKey, Rational>,
}

#[derive(Serialize, Deserialize)]
struct JsonTerm {
    q: u32,
    z: Vec<i64>,
    c: String,
}

impl ZQSeries {
    pub fn zero(qmax: u32, nvars: usize) -> Self {
        ZQSeries { qmax, nvars, terms: BTreeMap::new() }
    }

    pub fn constant(c: Rational, qmax: u32, nvars: usize) -> Self {
        let mut s = Self::zero(qmax, nvars);
        s.add_term(0, vec![0; nvars], c);
        s
    }

    pub fn one(qmax: u32, nvars: usize) -> Self {
        Self::constant(Rational::one(), qmax, nvars)
    }

    /// The single term `c q^q z^z`.
    pub fn monomial(q: u32, z: Vec<i64>, c: Rational, qmax: u32) -> Self {
        let mut s = Self::zero(qmax, z.len());
        s.add_term(q, z, c);
        s
    }

    pub fn qmax(&self) -> u32 {
        self.qmax
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&TermKey, &Rational)> {
        self.terms.iter()
    }

    pub fn coeff(&self, q: u32, z: &[i64]) -> Rational {
        self.terms
            .get(&(q, z.to_vec()))
            .cloned()
            .unwrap_or_else(Rational::zero)
    }

    /// Coefficient of `q^n` in a series without `z` variables.
    pub fn q_coeff(&self, n: u32) -> Rational {
        self.coeff(n, &vec![0; self.nvars])
    }

    /// Accumulates `c q^q z^z`, dropping it past the truncation order.
    ///
    /// # Panics
    /// If `z` does not have the series' arity.
    pub fn add_term(&mut self, q: u32, z: Vec<i64>, c: Rational) {
        assert_eq!(z.len(), self.nvars, "z-arity mismatch in add_term");
        if q > self.qmax || c.is_zero() {
            return;
        }
        let key = (q, z);
        match self.terms.get_mut(&key) {
            Some(v) => {
                *v += c;
                if v.is_zero() {
                    self.terms.remove(&key);
                }
            }
            None => {
                self.terms.insert(key, c);
            }
        }
    }

    fn check_arity(&self, other: &Self) -> Result<()> {
        if self.nvars != other.nvars {
            return Err(Error::ArityMismatch(self.nvars, other.nvars));
        }
        Ok(())
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self> {
        self.check_arity(other)?;
        let mut out = self.truncate(self.qmax.min(other.qmax));
        for ((q, z), c) in &other.terms {
            out.add_term(*q, z.clone(), c.clone());
        }
        Ok(out)
    }

    pub fn checked_sub(&self, other: &Self) -> Result<Self> {
        self.checked_add(&other.neg_ref())
    }

    pub fn checked_mul(&self, other: &Self) -> Result<Self> {
        self.check_arity(other)?;
        let qmax = self.qmax.min(other.qmax);
        let mut out = Self::zero(qmax, self.nvars);
        for ((q1, z1), c1) in &self.terms {
            if *q1 > qmax {
                break;
            }
            for ((q2, z2), c2) in &other.terms {
                if q1 + q2 > qmax {
                    break;
                }
                let z: Vec<i64> = z1.iter().zip(z2).map(|(a, b)| a + b).collect();
                out.add_term(q1 + q2, z, c1 * c2);
            }
        }
        Ok(out)
    }

    pub fn scale(&self, c: &Rational) -> Self {
        if c.is_zero() {
            return Self::zero(self.qmax, self.nvars);
        }
        ZQSeries {
            qmax: self.qmax,
            nvars: self.nvars,
            terms: self.terms.iter().map(|(k, v)| (k.clone(), v * c)).collect(),
        }
    }

    fn neg_ref(&self) -> Self {
        self.scale(&-Rational::one())
    }

    pub fn pow(&self, e: u32) -> Self {
        let mut acc = Self::one(self.qmax, self.nvars);
        for _ in 0..e {
            acc = &acc * self;
        }
        acc
    }

    /// Multiplies by the monomial `q^dq z^dz`.
    pub fn shift(&self, dq: u32, dz: &[i64]) -> Self {
        let mut out = Self::zero(self.qmax, self.nvars);
        for ((q, z), c) in &self.terms {
            let z = z.iter().zip(dz).map(|(a, b)| a + b).collect();
            out.add_term(q + dq, z, c.clone());
        }
        out
    }

    pub fn truncate(&self, qmax: u32) -> Self {
        ZQSeries {
            qmax,
            nvars: self.nvars,
            terms: self
                .terms
                .iter()
                .filter(|((q, _), _)| *q <= qmax)
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
        }
    }

    /// Appends `extra` new `z` variables, all with exponent zero.
    pub fn lift(&self, extra: usize) -> Self {
        ZQSeries {
            qmax: self.qmax,
            nvars: self.nvars + extra,
            terms: self
                .terms
                .iter()
                .map(|((q, z), c)| {
                    let mut z = z.clone();
                    z.resize(z.len() + extra, 0);
                    ((*q, z), c.clone())
                })
                .collect(),
        }
    }

    pub fn is_z_free(&self) -> bool {
        self.terms.keys().all(|(_, z)| z.iter().all(|e| *e == 0))
    }

    /// Keeps the `z^0` part and drops every `z` variable.
    pub fn coe_z0(&self) -> Self {
        let mut out = Self::zero(self.qmax, 0);
        for ((q, z), c) in &self.terms {
            if z.iter().all(|e| *e == 0) {
                out.add_term(*q, vec![], c.clone());
            }
        }
        out
    }

    /// Applies `q d/dq`.
    pub fn q_ddq(&self) -> Self {
        let mut out = Self::zero(self.qmax, self.nvars);
        for ((q, z), c) in &self.terms {
            out.add_term(*q, z.clone(), c * rat(*q as i64));
        }
        out
    }

    /// Evaluates every `z_i = 1`.
    pub fn z_to_one(&self) -> Self {
        let mut out = Self::zero(self.qmax, 0);
        for ((q, _), c) in &self.terms {
            out.add_term(*q, vec![], c.clone());
        }
        out
    }

    /// Serializes as an array of `{q, z, c}` objects in key order.
    pub fn to_json(&self) -> String {
        let terms: Vec<JsonTerm> = self
            .terms
            .iter()
            .map(|((q, z), c)| JsonTerm { q: *q, z: z.clone(), c: format_rational(c) })
            .collect();
        serde_json::to_string(&terms).expect("series terms always serialize")
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::from_str(&self.to_json()).expect("round trip through serde_json")
    }

    pub fn from_json(text: &str, qmax: u32, nvars: usize) -> Result<Self> {
        let terms: Vec<JsonTerm> =
            serde_json::from_str(text).map_err(|e| Error::BadSeries(e.to_string()))?;
        let mut out = Self::zero(qmax, nvars);
        for t in terms {
            if t.z.len() != nvars {
                return Err(Error::ArityMismatch(nvars, t.z.len()));
            }
            out.add_term(t.q, t.z, parse_rational(&t.c)?);
        }
        Ok(out)
    }

    /// First `(q, z)` key at which the two series differ, with both values.
    pub fn first_difference(&self, other: &Self) -> Option<(TermKey, Rational, Rational)> {
        let keys: std::collections::BTreeSet<&TermKey> =
            self.terms.keys().chain(other.terms.keys()).collect();
        for k in keys {
            let a = self.terms.get(k).cloned().unwrap_or_else(Rational::zero);
            let b = other.terms.get(k).cloned().unwrap_or_else(Rational::zero);
            if a != b {
                return Some((k.clone(), a, b));
            }
        }
        None
    }
}

impl fmt::Display for ZQSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0 + O(q^{})", self.qmax + 1);
        }
        let mut first = true;
        for ((q, z), c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({})q^{}", c, q)?;
            for (i, e) in z.iter().enumerate() {
                if *e != 0 {
                    write!(f, "z{}^{}", i + 1, e)?;
                }
            }
        }
        write!(f, " + O(q^{})", self.qmax + 1)
    }
}

macro_rules! forward_binop {
    ($tr:ident, $m:ident, $checked:ident) => {
        impl $tr<&ZQSeries> for &ZQSeries {
            type Output = ZQSeries;
            fn $m(self, rhs: &ZQSeries) -> ZQSeries {
                self.$checked(rhs).unwrap_or_else(|e| panic!("{e}"))
            }
        }
        impl $tr<ZQSeries> for ZQSeries {
            type Output = ZQSeries;
            fn $m(self, rhs: ZQSeries) -> ZQSeries {
                (&self).$m(&rhs)
            }
        }
    };
}

forward_binop!(Add, add, checked_add);
forward_binop!(Sub, sub, checked_sub);
forward_binop!(Mul, mul, checked_mul);

impl Neg for &ZQSeries {
    type Output = ZQSeries;
    fn neg(self) -> ZQSeries {
        self.neg_ref()
    }
}

impl Neg for ZQSeries {
    type Output = ZQSeries;
    fn neg(self) -> ZQSeries {
        self.neg_ref()
    }
}

/// `(q;q)_inf^c` truncated at `q^qmax`, without `z` variables.
///
/// Uses `n a_n = -c * sum_{k=1}^n sigma_1(k) a_{n-k}`, the logarithmic
/// derivative of the Euler product.
pub fn euler_pow(c: i64, qmax: u32) -> ZQSeries {
    let mut a: Vec<Rational> = vec![Rational::one()];
    for n in 1..=qmax as u64 {
        let mut acc = Rational::zero();
        for k in 1..=n {
            acc += &a[(n - k) as usize] * rat(sigma1(k) as i64);
        }
        a.push(acc * rat(-c) / rat(n as i64));
    }
    let mut s = ZQSeries::zero(qmax, 0);
    for (n, c) in a.into_iter().enumerate() {
        s.add_term(n as u32, vec![], c);
    }
    s
}

/// `q^(n a) z^(n z_step) / (1 - q^n)^w` in one `z` variable.
///
/// # Panics
/// If `n == 0`.
pub fn block(n: u32, w: u32, a: u32, z_step: i64, qmax: u32) -> ZQSeries {
    let mut s = ZQSeries::zero(qmax, 1);
    block_into(&mut s, n, w, a, vec![n as i64 * z_step], &Rational::one());
    s
}

/// `q^(n a) / (1 - q^n)^w` without `z` variables.
pub fn block_q(n: u32, w: u32, a: u32, qmax: u32) -> ZQSeries {
    let mut s = ZQSeries::zero(qmax, 0);
    block_into(&mut s, n, w, a, vec![], &Rational::one());
    s
}

fn block_into(s: &mut ZQSeries, n: u32, w: u32, a: u32, z: Vec<i64>, scale: &Rational) {
    assert!(n > 0, "block needs a positive index");
    let qmax = s.qmax();
    let mut j = 0u32;
    while n * (a + j) <= qmax {
        let c: BigInt = if w == 0 {
            if j == 0 { BigInt::one() } else { BigInt::zero() }
        } else {
            binomial((w + j - 1) as i64, j as i64)
        };
        s.add_term(n * (a + j), z.clone(), scale * Rational::from_integer(c));
        j += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::frac;
    use proptest::prelude::*;

    /// Partition-count oracle for `(q;q)^-1`.
    fn partition_counts(n: usize) -> Vec<i64> {
        let mut p = vec![0i64; n + 1];
        p[0] = 1;
        for part in 1..=n {
            for m in part..=n {
                p[m] += p[m - part];
            }
        }
        p
    }

    fn direct_euler(c: i64, qmax: u32) -> ZQSeries {
        let mut acc = ZQSeries::one(qmax, 0);
        for m in 1..=qmax {
            let factor = if c >= 0 {
                let mut f = ZQSeries::one(qmax, 0);
                f.add_term(m, vec![], -Rational::one());
                f.pow(c as u32)
            } else {
                block_q(m, (-c) as u32, 0, qmax)
            };
            acc = &acc * &factor;
        }
        acc
    }

    #[test]
    fn euler_pow_matches_partitions() {
        let p = partition_counts(10);
        let s = euler_pow(-1, 10);
        for n in 0..=10 {
            assert_eq!(s.q_coeff(n as u32), rat(p[n]));
        }
    }

    #[test]
    fn euler_pow_matches_direct_product() {
        for c in [-5, -3, -1, 0, 1, 2, 4] {
            assert_eq!(euler_pow(c, 8), direct_euler(c, 8), "c = {c}");
        }
    }

    #[test]
    fn euler_pow_three() {
        let s = euler_pow(-3, 4);
        let expected = [1, 3, 9, 22, 51];
        for (n, e) in expected.iter().enumerate() {
            assert_eq!(s.q_coeff(n as u32), rat(*e));
        }
    }

    #[test]
    fn block_geometric() {
        let s = block(1, 1, 1, 0, 3);
        for n in 1..=3 {
            assert_eq!(s.coeff(n, &[0]), rat(1));
        }
        assert_eq!(s.coeff(0, &[0]), rat(0));
        let t = block(2, 2, 1, 1, 6);
        assert_eq!(t.coeff(2, &[2]), rat(1));
        assert_eq!(t.coeff(4, &[2]), rat(2));
        assert_eq!(t.coeff(6, &[2]), rat(3));
    }

    #[test]
    fn zero_coefficients_pruned() {
        let mut s = ZQSeries::zero(4, 1);
        s.add_term(1, vec![2], rat(3));
        s.add_term(1, vec![2], rat(-3));
        assert!(s.is_zero());
        s.add_term(5, vec![0], rat(1));
        assert!(s.is_zero());
    }

    #[test]
    fn arity_mismatch_is_an_error() {
        let a = ZQSeries::one(3, 1);
        let b = ZQSeries::one(3, 0);
        assert_eq!(a.checked_add(&b), Err(Error::ArityMismatch(1, 0)));
        assert!(a.checked_mul(&b).is_err());
    }

    #[test]
    fn coe_z0_and_q_ddq() {
        let mut s = ZQSeries::zero(5, 1);
        s.add_term(2, vec![1], rat(4));
        s.add_term(3, vec![0], frac(1, 2));
        let c = s.coe_z0();
        assert_eq!(c.nvars(), 0);
        assert_eq!(c.q_coeff(3), frac(1, 2));
        assert_eq!(c.len(), 1);
        assert_eq!(s.q_ddq().coeff(2, &[1]), rat(8));
    }

    #[test]
    fn json_is_sorted_and_exact() {
        let mut s = ZQSeries::zero(5, 1);
        s.add_term(2, vec![1], frac(-3, 4));
        s.add_term(1, vec![-2], rat(5));
        s.add_term(1, vec![-3], rat(1));
        let j = s.to_json();
        assert_eq!(
            j,
            r#"[{"q":1,"z":[-3],"c":"1/1"},{"q":1,"z":[-2],"c":"5/1"},{"q":2,"z":[1],"c":"-3/4"}]"#
        );
        let back = ZQSeries::from_json(&j, 5, 1).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.to_json(), j);
    }

    fn arb_series(nvars: usize) -> impl Strategy<Value = ZQSeries> {
        prop::collection::vec(
            (0u32..=5, prop::collection::vec(-3i64..=3, nvars), -20i64..=20, 1i64..=6),
            0..8,
        )
        .prop_map(move |ts| {
            let mut s = ZQSeries::zero(5, nvars);
            for (q, z, n, d) in ts {
                s.add_term(q, z, frac(n, d));
            }
            s
        })
    }

    proptest! {
        #[test]
        fn json_round_trip(s in arb_series(2)) {
            let j = s.to_json();
            let back = ZQSeries::from_json(&j, 5, 2).unwrap();
            prop_assert_eq!(&back, &s);
            prop_assert_eq!(back.to_json(), j);
        }

        #[test]
        fn ring_laws(a in arb_series(1), b in arb_series(1), c in arb_series(1)) {
            prop_assert_eq!(&a * &b, &b * &a);
            prop_assert_eq!(&(&a * &b) * &c, &a * &(&b * &c));
            prop_assert_eq!(&a * &(&b + &c), &(&a * &b) + &(&a * &c));
            prop_assert!((&a - &a).is_zero());
        }

        #[test]
        fn euler_inverse(c in -6i64..=6) {
            let p = &euler_pow(c, 7) * &euler_pow(-c, 7);
            prop_assert_eq!(p, ZQSeries::one(7, 0));
        }
    }
}
