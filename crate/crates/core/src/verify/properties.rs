//! Seeded random instances of Fock-space operator identities.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Report, Status};
use crate::combinatorics::{enum_balanced, GenPartition};
use crate::fock::{
    apply_a_lambda_normalized, apply_heisenberg, apply_ordered, enumerate_basis, vacuum_to_one, FockSpace,
    FockVector, ZFockVector,
};
use crate::operators::{exp_mode, oracle_trace_product, times_one_minus_ratio, Side, VertexOp};
use crate::rational::{factorial, frac, rat, Rational};
use crate::surface::{CohClass, SurfaceModel};

/// Outcome of one property over many random instances.
#[derive(Clone, Debug)]
pub struct PropertyOutcome {
    pub name: &'static str,
    pub instances: usize,
    pub failures: Vec<String>,
}

impl PropertyOutcome {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn report(&self, model: &str) -> Report {
        let note = if self.failures.is_empty() {
            format!("{} instances", self.instances)
        } else {
            format!("{} of {} instances failed; first: {}", self.failures.len(), self.instances, self.failures[0])
        };
        Report {
            identity: format!("property:{}", self.name),
            model: model.to_string(),
            qmax: 0,
            status: if self.passed() { Status::Pass } else { Status::Fail },
            mismatch: None,
            note: Some(note),
        }
    }
}

type Property = fn(&SurfaceModel, &mut ChaCha8Rng) -> Option<String>;

pub const PROPERTIES: &[(&str, Property)] = &[
    ("commutator", commutator),
    ("tau-commutator", tau_commutator),
    ("tau-reorder", tau_reorder),
    ("gamma-same-side", gamma_same_side),
    ("gamma-exchange", gamma_exchange),
    ("comm-creation-exp", comm_creation_exp),
    ("comm-annihilation-exp", comm_annihilation_exp),
    ("splitting", splitting),
    ("trace-vanishing", trace_vanishing),
];

/// Runs `instances` random cases of one property. A returned string
/// describes a failing instance.
pub fn run_property(name: &'static str, model: &SurfaceModel, instances: usize, seed: u64) -> PropertyOutcome {
    let (_, f) = PROPERTIES.iter().find(|(n, _)| *n == name).expect("registered property");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let failures = (0..instances).filter_map(|i| f(model, &mut rng).map(|e| format!("#{i}: {e}"))).collect();
    PropertyOutcome { name, instances, failures }
}

pub fn run_all(model: &SurfaceModel, instances: usize, seed: u64) -> Vec<PropertyOutcome> {
    PROPERTIES.iter().map(|(n, _)| run_property(n, model, instances, seed)).collect()
}

fn random_class(model: &SurfaceModel, rng: &mut ChaCha8Rng, min_degree: usize) -> CohClass {
    let lo = match min_degree {
        0 => 0,
        2 => 1,
        _ => model.point_index(),
    };
    let mut c = CohClass::zero(model.r());
    for i in lo..model.dim() {
        c = c.add(&CohClass::basis(model.r(), i).scale(&rat(rng.gen_range(-2..=2))));
    }
    c
}

fn random_vector(model: &SurfaceModel, rng: &mut ChaCha8Rng, max_weight: u32) -> FockVector {
    let mut v = FockVector::new();
    for _ in 0..rng.gen_range(1..=3) {
        let w = rng.gen_range(0..=max_weight);
        let basis = enumerate_basis(model.dim(), w);
        let m = basis.choose(rng).expect("nonempty basis").clone();
        let c = [-3, -2, -1, 1, 2, 3].choose(rng).copied().unwrap_or(1);
        v.add_term(m, rat(c));
    }
    v
}

fn random_part(rng: &mut ChaCha8Rng, max: i64) -> i64 {
    let n = rng.gen_range(1..=max);
    if rng.gen_bool(0.5) {
        n
    } else {
        -n
    }
}

fn check<T: PartialEq + std::fmt::Debug>(what: String, a: T, b: T) -> Option<String> {
    (a != b).then(|| format!("{what}: {a:?} != {b:?}"))
}

/// `[a_m(alpha), a_n(beta)] = -m delta_{m,-n} <alpha, beta>`.
fn commutator(model: &SurfaceModel, rng: &mut ChaCha8Rng) -> Option<String> {
    let (m, n) = (random_part(rng, 3), random_part(rng, 3));
    let (a, b) = (random_class(model, rng, 0), random_class(model, rng, 0));
    let v = random_vector(model, rng, 3);
    let ab = apply_heisenberg(model, m, &a, &apply_heisenberg(model, n, &b, &v));
    let ba = apply_heisenberg(model, n, &b, &apply_heisenberg(model, m, &a, &v));
    let expect = if m == -n { v.scale(&(rat(-m) * model.pair(&a, &b))) } else { FockVector::new() };
    check(format!("m={m} n={n}"), ab.sub(&ba), expect)
}

/// Commutator of two Künneth products of Heisenberg operators.
fn tau_commutator(model: &SurfaceModel, rng: &mut ChaCha8Rng) -> Option<String> {
    let ns: Vec<i64> = (0..rng.gen_range(1..=3)).map(|_| random_part(rng, 2)).collect();
    let ms: Vec<i64> = (0..rng.gen_range(1..=3)).map(|_| random_part(rng, 2)).collect();
    let (a, b) = (random_class(model, rng, 0), random_class(model, rng, 0));
    let v = random_vector(model, rng, 2);
    let lhs = apply_ordered(model, &ns, &a, &apply_ordered(model, &ms, &b, &v))
        .sub(&apply_ordered(model, &ms, &b, &apply_ordered(model, &ns, &a, &v)));
    let ab = model.cup(&a, &b);
    let mut rhs = FockVector::new();
    for (t, nt) in ns.iter().enumerate() {
        for (j, mj) in ms.iter().enumerate() {
            if *nt != -mj {
                continue;
            }
            let mut parts: Vec<i64> = ms[..j].to_vec();
            parts.extend(ns.iter().enumerate().filter(|(u, _)| *u != t).map(|(_, p)| *p));
            parts.extend_from_slice(&ms[j + 1..]);
            rhs.add_scaled(&apply_ordered(model, &parts, &ab, &v), &rat(-nt));
        }
    }
    check(format!("n={ns:?} m={ms:?}"), lhs, rhs)
}

/// Swapping adjacent factors costs an Euler-class term.
fn tau_reorder(model: &SurfaceModel, rng: &mut ChaCha8Rng) -> Option<String> {
    let k = rng.gen_range(2..=4);
    let parts: Vec<i64> = (0..k).map(|_| random_part(rng, 2)).collect();
    let j = rng.gen_range(0..k - 1);
    let a = random_class(model, rng, 0);
    let v = random_vector(model, rng, 2);
    let lhs = apply_ordered(model, &parts, &a, &v);
    let mut swapped = parts.clone();
    swapped.swap(j, j + 1);
    let mut rhs = apply_ordered(model, &swapped, &a, &v);
    if parts[j] == -parts[j + 1] {
        let rest: Vec<i64> =
            parts.iter().enumerate().filter(|(s, _)| *s != j && *s != j + 1).map(|(_, p)| *p).collect();
        let ea = model.cup(&model.euler(), &a);
        rhs.add_scaled(&apply_ordered(model, &rest, &ea, &v), &rat(-parts[j]));
    }
    check(format!("parts={parts:?} j={j}"), lhs, rhs)
}

const VERTEX_QMAX: u32 = 4;

/// `Gamma_+` operators commute among themselves, and so do `Gamma_-`.
fn gamma_same_side(model: &SurfaceModel, rng: &mut ChaCha8Rng) -> Option<String> {
    let side = if rng.gen_bool(0.5) { Side::Plus } else { Side::Minus };
    let g1 = VertexOp { side, class: random_class(model, rng, 0), z_slot: 0 };
    let g2 = VertexOp { side, class: random_class(model, rng, 0), z_slot: 1 };
    let v = random_vector(model, rng, 2).lift(2);
    let a = g1.apply(model, &g2.apply(model, &v, VERTEX_QMAX), VERTEX_QMAX);
    let b = g2.apply(model, &g1.apply(model, &v, VERTEX_QMAX), VERTEX_QMAX);
    check(format!("{side:?}"), a, b)
}

/// `Gamma_+(L, x) Gamma_-(L', y) = (1 - y/x)^{<L, L'>} Gamma_-(L', y) Gamma_+(L, x)`,
/// compared in `y`-degrees unaffected by the weight cutoff.
fn gamma_exchange(model: &SurfaceModel, rng: &mut ChaCha8Rng) -> Option<String> {
    let l = random_class(model, rng, 0);
    let lp = random_class(model, rng, 0);
    let v0 = random_vector(model, rng, 2);
    let bound = (VERTEX_QMAX - v0.max_weight()) as i64;
    let v = v0.lift(2);
    let gp = VertexOp { side: Side::Plus, class: l.clone(), z_slot: 0 };
    let gm = VertexOp { side: Side::Minus, class: lp.clone(), z_slot: 1 };
    let lhs = gp.apply(model, &gm.apply(model, &v, VERTEX_QMAX), VERTEX_QMAX);
    let rhs0 = gm.apply(model, &gp.apply(model, &v, VERTEX_QMAX), VERTEX_QMAX);
    let rhs = times_one_minus_ratio(&rhs0, &model.pair(&l, &lp), 0, 1, bound as u64);
    let keep = |w: &ZFockVector| {
        let mut out = ZFockVector::new();
        for (k, c) in w.iter() {
            if k.0[1] <= bound {
                out.add_term(k.clone(), c.clone());
            }
        }
        out
    };
    check(format!("L={l} L'={lp}"), keep(&lhs), keep(&rhs))
}

fn random_lambda(rng: &mut ChaCha8Rng) -> GenPartition {
    let parts: Vec<i64> = (0..rng.gen_range(1..=3)).map(|_| random_part(rng, 2)).collect();
    GenPartition::from_parts(&parts)
}

fn repeat(n: i64, i: usize) -> GenPartition {
    GenPartition::from_parts(&vec![n; i])
}

fn inv_fact(i: usize) -> Rational {
    Rational::new(1.into(), factorial(i as u64))
}

/// Moving `a_lambda(alpha)/lambda!` past `exp(z^n/n a_{-n}(gamma))`.
fn comm_creation_exp(model: &SurfaceModel, rng: &mut ChaCha8Rng) -> Option<String> {
    let lam = random_lambda(rng);
    let n: i64 = rng.gen_range(1..=2);
    let (a, g) = (random_class(model, rng, 0), random_class(model, rng, 0));
    let v = random_vector(model, rng, 3).lift(1);
    let terms = 3usize;
    let big = u32::MAX;
    let ex = |w: &ZFockVector| exp_mode(model, -n, &g, 0, n, &frac(1, n), w, big, terms);
    let lhs = apply_a_lambda_normalized(model, &lam, &a, &ex(&v));
    let mut inner = ZFockVector::new();
    for i in 0..=lam.mult(n) as usize {
        let rest = lam.subtract(&repeat(n, i)).expect("enough parts");
        let gi = model.cup(&model.cup_pow(&g, i as u32), &a);
        let sign = if i % 2 == 1 { rat(-1) } else { rat(1) };
        let t = apply_a_lambda_normalized(model, &rest, &gi, &v).shift_z(&[n * i as i64], &(sign * inv_fact(i)));
        inner.add_scaled(&t, &rat(1));
    }
    let rhs = ex(&inner);
    let cut = n * terms as i64;
    let keep = |w: &ZFockVector| {
        let mut out = ZFockVector::new();
        for (k, c) in w.iter() {
            if k.0[0] <= cut {
                out.add_term(k.clone(), c.clone());
            }
        }
        out
    };
    check(format!("lambda={lam} n={n}"), keep(&lhs), keep(&rhs))
}

/// Moving `exp(z^n/n a_n(gamma))` past `a_lambda(alpha)/lambda!`.
fn comm_annihilation_exp(model: &SurfaceModel, rng: &mut ChaCha8Rng) -> Option<String> {
    let lam = random_lambda(rng);
    let n: i64 = rng.gen_range(1..=2);
    let (a, g) = (random_class(model, rng, 0), random_class(model, rng, 0));
    let v = random_vector(model, rng, 3).lift(1);
    let ex = |w: &ZFockVector| exp_mode(model, n, &g, 0, n, &frac(1, n), w, u32::MAX, usize::MAX);
    let lhs = ex(&apply_a_lambda_normalized(model, &lam, &a, &v));
    let ev = ex(&v);
    let mut rhs = ZFockVector::new();
    for i in 0..=lam.mult(-n) as usize {
        let rest = lam.subtract(&repeat(-n, i)).expect("enough parts");
        let gi = model.cup(&model.cup_pow(&g, i as u32), &a);
        let sign = if i % 2 == 1 { rat(-1) } else { rat(1) };
        let t = apply_a_lambda_normalized(model, &rest, &gi, &ev).shift_z(&[n * i as i64], &(sign * inv_fact(i)));
        rhs.add_scaled(&t, &rat(1));
    }
    check(format!("lambda={lam} n={n}"), lhs, rhs)
}

/// `<G w, |1>> = <G |0>, |1>> <w, |1>>` for creation products `G`.
fn splitting(model: &SurfaceModel, rng: &mut ChaCha8Rng) -> Option<String> {
    let mut g = FockVector::vacuum();
    let mut ops = Vec::new();
    for _ in 0..rng.gen_range(1..=3) {
        let n = rng.gen_range(1..=2i64);
        let pool = [model.one(), model.point(), random_class(model, rng, 0)];
        let c = pool.choose(rng).expect("nonempty").clone();
        ops.push((-n, c));
    }
    let w = random_vector(model, rng, 3);
    let mut gw = w.clone();
    for (n, c) in &ops {
        g = apply_heisenberg(model, *n, c, &g);
        gw = apply_heisenberg(model, *n, c, &gw);
    }
    let lhs = vacuum_to_one(model, &gw);
    let rhs = vacuum_to_one(model, &g) * vacuum_to_one(model, &w);
    check(format!("{} creators", ops.len()), lhs, rhs)
}

const TRACE_QMAX: u32 = 3;

/// Traces of products of `a_lambda` with every length at least 2 and every
/// class of degree at least 2 vanish.
fn trace_vanishing(model: &SurfaceModel, rng: &mut ChaCha8Rng) -> Option<String> {
    let count = rng.gen_range(1..=2);
    let lambdas: Vec<GenPartition> = if count == 1 {
        let pool: Vec<GenPartition> = (2..=3).flat_map(|l| enum_balanced(l, TRACE_QMAX as u64)).collect();
        vec![pool.choose(rng).expect("nonempty").clone()]
    } else {
        loop {
            let a = GenPartition::from_parts(&(0..rng.gen_range(2..=3)).map(|_| random_part(rng, 2)).collect::<Vec<_>>());
            let b = GenPartition::from_parts(&(0..rng.gen_range(2..=3)).map(|_| random_part(rng, 2)).collect::<Vec<_>>());
            if a.size() + b.size() == 0 {
                break vec![a, b];
            }
        }
    };
    let alphas: Vec<CohClass> = lambdas.iter().map(|_| random_class(model, rng, 2)).collect();
    let space = FockSpace::new(model.clone());
    match oracle_trace_product(&space, &lambdas, &alphas, false, TRACE_QMAX) {
        Ok(t) if t.is_zero() => None,
        Ok(t) => Some(format!("{lambdas:?}: {t}")),
        Err(e) => Some(e.to_string()),
    }
}
