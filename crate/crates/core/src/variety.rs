//! Point counts on affine fibers, and smoothness / tangency tests by
//! exhaustive search over `F_{p^j}`, `j <= k_max`.
//!
//! Every smoothness or tangency verdict produced by a finite scan is a
//! semi-decision: `Smooth` or `Good` only means no witness exists over the
//! fields that were searched.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::arith::{gcd, reduce_i64};
use crate::error::{check_budget, Result, XntError};
use crate::field::{ExtField, FiniteField};
use crate::poly::MultiPoly;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiberCountRecord {
    pub a: u64,
    pub b: Option<u64>,
    pub count: u64,
    /// `count - q^{n-1}` (single) or `count - q^{n-2}` (pair).
    pub deviation: f64,
    /// Deviation divided by `q^{(n-1)/2}` (single) or `q^{n/2 - 1}` (pair).
    pub normalized_deviation: f64,
}

impl FiberCountRecord {
    fn single(a: u64, count: u64, q: u64, n: usize) -> Self {
        let main = (q as f64).powi(n as i32 - 1);
        let deviation = count as f64 - main;
        let scale = (q as f64).powf((n as f64 - 1.0) / 2.0);
        FiberCountRecord {
            a,
            b: None,
            count,
            deviation,
            normalized_deviation: deviation / scale,
        }
    }

    fn pair(a: u64, b: u64, count: u64, q: u64, n: usize) -> Self {
        let main = (q as f64).powi(n as i32 - 2);
        let deviation = count as f64 - main;
        let scale = (q as f64).powf(n as f64 / 2.0 - 1.0);
        FiberCountRecord {
            a,
            b: Some(b),
            count,
            deviation,
            normalized_deviation: deviation / scale,
        }
    }
}

/// Calls `visit` on every point of `F_q^n` (odometer order, last coordinate fastest).
fn for_each_affine<K: FiniteField, V: FnMut(&[K::Elem])>(field: &K, n: usize, mut visit: V) {
    let q = field.order();
    let mut idx = vec![0u64; n];
    let mut pt: Vec<K::Elem> = vec![field.zero(); n];
    loop {
        visit(&pt);
        let mut i = n;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            idx[i] += 1;
            if idx[i] < q {
                pt[i] = field.element(idx[i]);
                break;
            }
            idx[i] = 0;
            pt[i] = field.zero();
        }
    }
}

/// Calls `visit` on a canonical representative of every point of
/// `P^{n-1}(F_q)` (first nonzero coordinate equal to one). Stops early when
/// `visit` returns `true`.
fn for_each_projective<K: FiniteField, V: FnMut(&[K::Elem]) -> bool>(
    field: &K,
    n: usize,
    mut visit: V,
) -> bool {
    for lead in 0..n {
        let tail = n - lead - 1;
        let mut pt = vec![field.zero(); n];
        pt[lead] = field.one();
        let mut stop = false;
        let mut scratch = pt.clone();
        for_each_affine(field, tail, |rest| {
            if stop {
                return;
            }
            scratch[lead + 1..].copy_from_slice(rest);
            stop = visit(&scratch);
        });
        if stop {
            return true;
        }
    }
    false
}

fn projective_size(q: u64, n: usize) -> u128 {
    (0..n).map(|i| (q as u128).pow(i as u32)).sum()
}

/// `N(a, F)` for every `a`, indexed by element index.
pub fn fiber_counts<K: FiniteField>(f: &MultiPoly, field: &K, budget: u128) -> Result<Vec<u64>> {
    let n = f.n_vars();
    check_budget((field.order() as u128).pow(n as u32), budget)?;
    let mut counts = vec![0u64; field.order() as usize];
    for_each_affine(field, n, |x| {
        counts[field.index(f.eval_in(field, x)) as usize] += 1
    });
    Ok(counts)
}

/// `N(a, b, F, G)` for every `(a, b)`, as `table[a][b]`.
pub fn pair_counts<K: FiniteField>(
    f: &MultiPoly,
    g: &MultiPoly,
    field: &K,
    budget: u128,
) -> Result<Vec<Vec<u64>>> {
    if f.n_vars() != g.n_vars() {
        return Err(XntError::input("F and G have different arities"));
    }
    let n = f.n_vars();
    check_budget(2 * (field.order() as u128).pow(n as u32), budget)?;
    let q = field.order() as usize;
    let mut table = vec![vec![0u64; q]; q];
    for_each_affine(field, n, |x| {
        let a = field.index(f.eval_in(field, x)) as usize;
        let b = field.index(g.eval_in(field, x)) as usize;
        table[a][b] += 1;
    });
    Ok(table)
}

/// `N(a, F)` or, with `g = Some((G, b))`, `N(a, b, F, G)` by exhaustive count.
pub fn count_affine_fiber<K: FiniteField>(
    f: &MultiPoly,
    a: K::Elem,
    field: &K,
    g: Option<(&MultiPoly, K::Elem)>,
    budget: u128,
) -> Result<FiberCountRecord> {
    let n = f.n_vars();
    let q = field.order();
    match g {
        None => {
            let counts = fiber_counts(f, field, budget)?;
            let ai = field.index(a);
            Ok(FiberCountRecord::single(ai, counts[ai as usize], q, n))
        }
        Some((g, b)) => {
            if g.n_vars() != n {
                return Err(XntError::input("F and G have different arities"));
            }
            check_budget(2 * (q as u128).pow(n as u32), budget)?;
            let mut count = 0u64;
            for_each_affine(field, n, |x| {
                if f.eval_in(field, x) == a && g.eval_in(field, x) == b {
                    count += 1;
                }
            });
            Ok(FiberCountRecord::pair(
                field.index(a),
                field.index(b),
                count,
                q,
                n,
            ))
        }
    }
}

/// Single-fiber records for all `a`.
pub fn fiber_records<K: FiniteField>(
    f: &MultiPoly,
    field: &K,
    budget: u128,
) -> Result<Vec<FiberCountRecord>> {
    let counts = fiber_counts(f, field, budget)?;
    Ok(counts
        .iter()
        .enumerate()
        .map(|(a, &c)| FiberCountRecord::single(a as u64, c, field.order(), f.n_vars()))
        .collect())
}

/// `N(a, b, F, G)` for fixed `a` and every `b`.
pub fn pair_records<K: FiniteField>(
    f: &MultiPoly,
    g: &MultiPoly,
    a: K::Elem,
    field: &K,
    budget: u128,
) -> Result<Vec<FiberCountRecord>> {
    let table = pair_counts(f, g, field, budget)?;
    let ai = field.index(a);
    Ok(table[ai as usize]
        .iter()
        .enumerate()
        .map(|(b, &c)| FiberCountRecord::pair(ai, b as u64, c, field.order(), f.n_vars()))
        .collect())
}

/// A point of projective space over `F_{p^degree}`, coordinates given as
/// element indices of [`ExtField::new`]`(p, degree)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectivePoint {
    pub p: u64,
    pub degree: u32,
    pub coords: Vec<u64>,
}

impl ProjectivePoint {
    /// Rescales so that the first nonzero coordinate is one.
    fn normalized(field: &ExtField, coords: &[u64]) -> Self {
        let lead = coords
            .iter()
            .copied()
            .find(|&c| c != 0)
            .expect("nonzero point");
        let inv = field.inv(lead).expect("nonzero");
        ProjectivePoint {
            p: field.characteristic(),
            degree: field.degree(),
            coords: coords.iter().map(|&c| field.mul(c, inv)).collect(),
        }
    }
}

impl fmt::Display for ProjectivePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = match ExtField::new(self.p, self.degree) {
            Ok(field) => self.coords.iter().map(|&c| field.format(c)).collect(),
            Err(_) => self.coords.iter().map(|c| c.to_string()).collect(),
        };
        write!(f, "[{}]", parts.join(":"))?;
        if self.degree > 1 {
            write!(f, " over F_{}^{}", self.p, self.degree)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum SmoothnessVerdict {
    /// No singular point over `F_{p^j}` for `j <= k_max`.
    Smooth {
        k_max: u32,
    },
    SingularAt(ProjectivePoint),
}

impl SmoothnessVerdict {
    pub fn is_smooth(&self) -> bool {
        matches!(self, SmoothnessVerdict::Smooth { .. })
    }
}

/// Searches common zeros of a homogeneous `F` and all its partials over
/// `F_{p^j}`, `j = 1..=k_max`.
pub fn smoothness_scan(
    f: &MultiPoly,
    p: u64,
    k_max: u32,
    budget: u128,
) -> Result<SmoothnessVerdict> {
    if !f.is_homogeneous() {
        return Err(XntError::input(
            "smoothness_scan needs a homogeneous polynomial",
        ));
    }
    if k_max == 0 {
        return Err(XntError::input("k_max must be >= 1"));
    }
    let n = f.n_vars();
    let fp = f.reduce_mod(p);
    let grad = fp.gradient();
    let mut needed = 0u128;
    for j in 1..=k_max {
        let q = p.checked_pow(j).ok_or(XntError::Overflow("field size"))?;
        needed += projective_size(q, n) * (n as u128 + 1);
    }
    check_budget(needed, budget)?;
    for j in 1..=k_max {
        let field = ExtField::new(p, j)?;
        let mut witness = None;
        for_each_projective(&field, n, |x| {
            if fp.eval_in(&field, x) == 0 && grad.iter().all(|g| g.eval_in(&field, x) == 0) {
                witness = Some(ProjectivePoint::normalized(&field, x));
                true
            } else {
                false
            }
        });
        if let Some(w) = witness {
            return Ok(SmoothnessVerdict::SingularAt(w));
        }
    }
    Ok(SmoothnessVerdict::Smooth { k_max })
}

/// Good reduction test for a homogeneous integer form at `p`: exact for
/// diagonal forms (`p` must not divide `d * prod c_i`), otherwise
/// [`smoothness_scan`] with the given `k_max`. The boolean is `true` when the
/// answer is only a semi-decision.
pub fn good_reduction(f: &MultiPoly, p: u64, k_max: u32, budget: u128) -> Result<(bool, bool)> {
    if let Some((coeffs, d)) = f.as_diagonal() {
        let bad = d as u64 % p == 0 || coeffs.iter().any(|&c| reduce_i64(c, p) == 0);
        return Ok((!bad, false));
    }
    Ok((smoothness_scan(f, p, k_max, budget)?.is_smooth(), true))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum UKind {
    ZeroType,
    Good,
    Bad,
}

/// Type of a frequency vector `u` relative to `V_p(F)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum UClass {
    /// `u = 0 mod p`.
    ZeroType,
    /// No tangency found; `searched_up_to` is `None` for an exact verdict.
    Good { searched_up_to: Option<u32> },
    /// The hyperplane `<x, u> = 0` is tangent to `V(F)` at the witness.
    Bad(ProjectivePoint),
}

impl UClass {
    pub fn kind(&self) -> UKind {
        match self {
            UClass::ZeroType => UKind::ZeroType,
            UClass::Good { .. } => UKind::Good,
            UClass::Bad(_) => UKind::Bad,
        }
    }
}

fn residues(u: &[i64], p: u64) -> Vec<u64> {
    u.iter().map(|&v| reduce_i64(v, p)).collect()
}

/// Classifies `u` by scanning the hyperplane `<x, u> = 0` over `F_{p^j}`,
/// `j <= k_max`, for `x` with `F(x) = 0` and `rank(grad F(x); u) <= 1`.
///
/// Assumes `V_p(F)` is smooth (see [`smoothness_scan`]).
pub fn classify_u(f: &MultiPoly, u: &[i64], p: u64, k_max: u32, budget: u128) -> Result<UClass> {
    let n = f.n_vars();
    if u.len() != n {
        return Err(XntError::input(format!(
            "u has length {} but F has {n} variables",
            u.len()
        )));
    }
    if !f.is_homogeneous() {
        return Err(XntError::input("classify_u needs a homogeneous polynomial"));
    }
    if k_max == 0 {
        return Err(XntError::input("k_max must be >= 1"));
    }
    let ur = residues(u, p);
    let Some(pivot) = ur.iter().position(|&c| c != 0) else {
        return Ok(UClass::ZeroType);
    };
    if n == 1 {
        return Ok(UClass::Good {
            searched_up_to: Some(k_max),
        });
    }
    let fp = f.reduce_mod(p);
    let grad = fp.gradient();
    let mut needed = 0u128;
    for j in 1..=k_max {
        let q = p.checked_pow(j).ok_or(XntError::Overflow("field size"))?;
        needed += projective_size(q, n - 1) * (n as u128 + 1);
    }
    check_budget(needed, budget)?;
    let free: Vec<usize> = (0..n).filter(|&i| i != pivot).collect();
    for j in 1..=k_max {
        let field = ExtField::new(p, j)?;
        let uf: Vec<u64> = ur.iter().map(|&c| field.element(c)).collect();
        let neg_inv_pivot = field.neg(field.inv(uf[pivot]).expect("nonzero pivot"));
        let mut x = vec![field.zero(); n];
        let mut witness = None;
        for_each_projective(&field, n - 1, |rest| {
            let mut s = field.zero();
            for (k, &i) in free.iter().enumerate() {
                x[i] = rest[k];
                s = field.add(s, field.mul(uf[i], rest[k]));
            }
            x[pivot] = field.mul(s, neg_inv_pivot);
            if fp.eval_in(&field, &x) != 0 {
                return false;
            }
            let g: Vec<u64> = grad.iter().map(|gi| gi.eval_in(&field, &x)).collect();
            let parallel = (0..n).all(|i| field.mul(g[i], uf[pivot]) == field.mul(g[pivot], uf[i]));
            if parallel {
                witness = Some(ProjectivePoint::normalized(&field, &x));
            }
            parallel
        });
        if let Some(w) = witness {
            return Ok(UClass::Bad(w));
        }
    }
    Ok(UClass::Good {
        searched_up_to: Some(k_max),
    })
}

/// Exact tangency test for a diagonal form `sum c_i X_i^d`.
///
/// A tangent point satisfies `x_i^{d-1} = u_i / (d c_i)` after scaling, and
/// then `F(x) = <x, u> / d`, so `u` is bad iff some choice of the
/// `(d-1)`-th roots gives `<x, u> = 0`. The roots are enumerated in the
/// smallest `F_{p^k}`, `k <= 4`, that contains all of them.
pub fn diagonal_dual_oracle(coeffs: &[i64], d: u32, u: &[i64], p: u64) -> Result<UClass> {
    if coeffs.len() != u.len() {
        return Err(XntError::input("u and coefficient vector differ in length"));
    }
    if d < 2 {
        return Err(XntError::input("diagonal oracle needs degree >= 2"));
    }
    if d as u64 % p == 0 || coeffs.iter().any(|&c| reduce_i64(c, p) == 0) {
        return Err(XntError::input(format!("p = {p} divides d * prod c_i")));
    }
    let ur = residues(u, p);
    if ur.iter().all(|&c| c == 0) {
        return Ok(UClass::ZeroType);
    }
    let base = ExtField::new(p, 1)?;
    let d_inv = |c: i64| {
        base.inv(base.mul(base.embed_int(d as i64), base.embed_int(c)))
            .expect("unit")
    };
    let w: Vec<u64> = ur
        .iter()
        .zip(coeffs)
        .map(|(&ui, &ci)| base.mul(ui, d_inv(ci)))
        .collect();

    if d == 2 {
        // x_i = u_i / (2 c_i); tangency iff sum u_i^2 / c_i = 0.
        let s = ur
            .iter()
            .zip(&w)
            .fold(0u64, |acc, (&ui, &wi)| base.add(acc, base.mul(ui, wi)));
        return Ok(if s == 0 {
            UClass::Bad(ProjectivePoint::normalized(&base, &w))
        } else {
            UClass::Good {
                searched_up_to: None,
            }
        });
    }

    // Distinct roots of x^{d-1} = w over the closure: (d-1) / p^v.
    let mut distinct = (d - 1) as u64;
    while distinct % p == 0 {
        distinct /= p;
    }
    let e = (d - 1) as u64;
    for k in 1..=4u32 {
        let Some(q) = p.checked_pow(k).filter(|&q| q <= 4_000_000) else {
            break;
        };
        if (q - 1) % distinct != 0 {
            continue;
        }
        let field = ExtField::new(p, k)?;
        let mut roots: Vec<Vec<u64>> = vec![Vec::new(); w.len()];
        for z in 0..q {
            let zp = field.pow(z, e);
            for (i, &wi) in w.iter().enumerate() {
                if wi != 0 && zp == wi {
                    roots[i].push(z);
                }
            }
        }
        let complete = w
            .iter()
            .zip(&roots)
            .all(|(&wi, r)| wi == 0 || r.len() as u64 == distinct);
        if !complete {
            continue;
        }
        for (i, r) in roots.iter_mut().enumerate() {
            if w[i] == 0 {
                r.push(0);
            }
        }
        let uf: Vec<u64> = ur.iter().map(|&c| field.element(c)).collect();
        let mut choice = vec![0usize; w.len()];
        loop {
            let x: Vec<u64> = choice
                .iter()
                .enumerate()
                .map(|(i, &c)| roots[i][c])
                .collect();
            let s = x
                .iter()
                .zip(&uf)
                .fold(0u64, |acc, (&xi, &ui)| field.add(acc, field.mul(xi, ui)));
            if s == 0 {
                return Ok(UClass::Bad(ProjectivePoint::normalized(&field, &x)));
            }
            let mut i = 0;
            loop {
                if i == choice.len() {
                    return Ok(UClass::Good {
                        searched_up_to: None,
                    });
                }
                choice[i] += 1;
                if choice[i] < roots[i].len() {
                    break;
                }
                choice[i] = 0;
                i += 1;
            }
        }
    }
    Err(XntError::Unsupported(format!(
        "roots of x^{e} = w need an extension of F_{p} beyond degree 4 (gcd(d-1, p-1) = {})",
        gcd(e, p - 1)
    )))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingularFiber {
    pub lambda: u64,
    /// Affine witness over `F_{p^degree}`.
    pub degree: u32,
    pub witness: Vec<u64>,
}

/// `lambda` in `F_p` for which `V(f - lambda)` (or `V(g) ∩ V(f - lambda)`)
/// has a singular point over `F_{p^j}`, `j <= k_max`.
///
/// With `g`, a point is singular on the intersection when `g(x) = 0` and
/// every 2x2 minor of the Jacobian `(grad f; grad g)` vanishes. The minors
/// do not involve `lambda` and are built once.
pub fn singular_fiber_scan(
    f: &MultiPoly,
    g: Option<&MultiPoly>,
    p: u64,
    k_max: u32,
    budget: u128,
) -> Result<Vec<SingularFiber>> {
    let n = f.n_vars();
    if let Some(g) = g {
        if g.n_vars() != n {
            return Err(XntError::input("f and g have different arities"));
        }
    }
    if k_max == 0 {
        return Err(XntError::input("k_max must be >= 1"));
    }
    let fp = f.reduce_mod(p);
    let gp = g.map(|g| g.reduce_mod(p));
    let conditions: Vec<MultiPoly> = match &gp {
        None => fp.gradient(),
        Some(gp) => {
            let (df, dg) = (fp.gradient(), gp.gradient());
            let mut minors = vec![gp.clone()];
            for i in 0..n {
                for k in i + 1..n {
                    let m = df[i].mul(&dg[k])?.sub(&df[k].mul(&dg[i])?)?;
                    if !m.is_zero() {
                        minors.push(m);
                    }
                }
            }
            minors
        }
    };
    let mut needed = 0u128;
    for j in 1..=k_max {
        let q = p.checked_pow(j).ok_or(XntError::Overflow("field size"))?;
        needed += (q as u128).pow(n as u32) * (conditions.len() as u128 + 1);
    }
    check_budget(needed, budget)?;
    let mut found: BTreeMap<u64, SingularFiber> = BTreeMap::new();
    for j in 1..=k_max {
        let field = ExtField::new(p, j)?;
        for_each_affine(&field, n, |x| {
            if conditions.iter().all(|c| c.eval_in(&field, x) == 0) {
                let v = fp.eval_in(&field, x);
                if field.in_base_field(v) {
                    found.entry(v).or_insert_with(|| SingularFiber {
                        lambda: v,
                        degree: j,
                        witness: x.to_vec(),
                    });
                }
            }
        });
    }
    Ok(found.into_values().collect())
}
