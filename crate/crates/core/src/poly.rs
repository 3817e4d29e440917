//! Sparse multivariate and dense univariate polynomials over `Z` or `Z/p`.
//!
//! Integer arithmetic is carried in `i128` with checked operations; any
//! overflow surfaces as [`XntError::Overflow`].

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::arith::{inv_mod, mul_mod, pow_mod, reduce_i128, reduce_i64};
use crate::error::{Result, XntError};
use crate::field::FiniteField;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Ring {
    Integers,
    ModP(u64),
}

impl Ring {
    fn normalize(self, c: i64) -> i64 {
        match self {
            Ring::Integers => c,
            Ring::ModP(p) => reduce_i64(c, p) as i64,
        }
    }

    fn normalize_wide(self, c: i128) -> Result<i64> {
        match self {
            Ring::Integers => i64::try_from(c).map_err(|_| XntError::Overflow("coefficient")),
            Ring::ModP(p) => Ok(reduce_i128(c, p) as i64),
        }
    }
}

fn ck_add(a: i128, b: i128) -> Result<i128> {
    a.checked_add(b)
        .ok_or(XntError::Overflow("integer addition"))
}

fn ck_mul(a: i128, b: i128) -> Result<i128> {
    a.checked_mul(b)
        .ok_or(XntError::Overflow("integer multiplication"))
}

fn ck_pow(mut base: i128, mut exp: u32) -> Result<i128> {
    let mut acc: i128 = 1;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = ck_mul(acc, base)?;
        }
        exp >>= 1;
        if exp > 0 {
            base = ck_mul(base, base)?;
        }
    }
    Ok(acc)
}

// ---------------------------------------------------------------------------
// Multivariate
// ---------------------------------------------------------------------------

/// Sparse polynomial in `n_vars` variables named `X{offset}, X{offset+1}, ...`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MultiPoly {
    n_vars: usize,
    var_offset: usize,
    terms: BTreeMap<Vec<u32>, i64>,
    ring: Ring,
}

impl MultiPoly {
    pub fn zero(n_vars: usize, ring: Ring) -> Self {
        MultiPoly {
            n_vars,
            var_offset: 0,
            terms: BTreeMap::new(),
            ring,
        }
    }

    pub fn constant(n_vars: usize, ring: Ring, c: i64) -> Self {
        let mut p = Self::zero(n_vars, ring);
        p.add_term(vec![0; n_vars], c);
        p
    }

    /// The variable at position `i`.
    pub fn var(n_vars: usize, ring: Ring, i: usize) -> Self {
        let mut e = vec![0; n_vars];
        e[i] = 1;
        let mut p = Self::zero(n_vars, ring);
        p.add_term(e, 1);
        p
    }

    pub fn from_terms<I>(n_vars: usize, ring: Ring, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<u32>, i64)>,
    {
        let mut p = Self::zero(n_vars, ring);
        for (e, c) in terms {
            if e.len() != n_vars {
                return Err(XntError::input(format!(
                    "exponent vector of length {} for {n_vars} variables",
                    e.len()
                )));
            }
            let cur = *p.terms.get(&e).unwrap_or(&0) as i128;
            let c = ring.normalize_wide(ck_add(cur, c as i128)?)?;
            p.terms.remove(&e);
            if c != 0 {
                p.terms.insert(e, c);
            }
        }
        Ok(p)
    }

    /// Diagonal form `sum_i c_i X_i^d`.
    pub fn diagonal(coeffs: &[i64], d: u32, ring: Ring) -> Self {
        let n = coeffs.len();
        let terms = coeffs.iter().enumerate().map(|(i, &c)| {
            let mut e = vec![0; n];
            e[i] = d;
            (e, c)
        });
        Self::from_terms(n, ring, terms).expect("well-formed diagonal")
    }

    fn add_term(&mut self, e: Vec<u32>, c: i64) {
        let c = self.ring.normalize(c);
        if c != 0 {
            self.terms.insert(e, c);
        }
    }

    pub fn with_var_offset(mut self, offset: usize) -> Self {
        self.var_offset = offset;
        self
    }

    pub fn var_offset(&self) -> usize {
        self.var_offset
    }

    /// Re-expresses `self` over the variables `X{offset} .. X{offset+n_vars-1}`,
    /// which must contain all of its own.
    pub fn in_frame(&self, offset: usize, n_vars: usize) -> Result<Self> {
        if self.var_offset < offset || self.var_offset + self.n_vars > offset + n_vars {
            return Err(XntError::input(format!(
                "{self} does not fit in the variables X{offset}..X{}",
                offset + n_vars - 1
            )));
        }
        let shift = self.var_offset - offset;
        let terms = self.terms.iter().map(|(e, &c)| {
            let mut v = vec![0; n_vars];
            v[shift..shift + e.len()].copy_from_slice(e);
            (v, c)
        });
        Ok(Self::from_terms(n_vars, self.ring, terms)?.with_var_offset(offset))
    }

    /// Both polynomials over the smallest common set of variables.
    pub fn common_frame(a: &Self, b: &Self) -> Result<(Self, Self)> {
        let lo = a.var_offset.min(b.var_offset);
        let hi = (a.var_offset + a.n_vars).max(b.var_offset + b.n_vars);
        Ok((a.in_frame(lo, hi - lo)?, b.in_frame(lo, hi - lo)?))
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn ring(&self) -> Ring {
        self.ring
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u32>, i64)> {
        self.terms.iter().map(|(e, &c)| (e, c))
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn total_degree(&self) -> u32 {
        self.terms.keys().map(|e| e.iter().sum()).max().unwrap_or(0)
    }

    pub fn is_homogeneous(&self) -> bool {
        let d = self.total_degree();
        self.terms.keys().all(|e| e.iter().sum::<u32>() == d)
    }

    /// Max absolute coefficient.
    pub fn height(&self) -> u64 {
        self.terms
            .values()
            .map(|c| c.unsigned_abs())
            .max()
            .unwrap_or(0)
    }

    /// `Some((c, d))` when the polynomial is `sum_i c_i X_i^d` with every `c_i != 0`.
    pub fn as_diagonal(&self) -> Option<(Vec<i64>, u32)> {
        if self.terms.len() != self.n_vars || self.n_vars == 0 {
            return None;
        }
        let d = self.total_degree();
        let mut coeffs = vec![0i64; self.n_vars];
        for (e, &c) in &self.terms {
            let nz: Vec<usize> = (0..self.n_vars).filter(|&i| e[i] != 0).collect();
            if nz.len() != 1 || e[nz[0]] != d || coeffs[nz[0]] != 0 {
                return None;
            }
            coeffs[nz[0]] = c;
        }
        Some((coeffs, d))
    }

    fn check_compat(&self, other: &MultiPoly) -> Result<()> {
        if self.n_vars != other.n_vars || self.ring != other.ring {
            return Err(XntError::input(
                "polynomials over different rings or arities",
            ));
        }
        Ok(())
    }

    pub fn add(&self, other: &MultiPoly) -> Result<MultiPoly> {
        self.check_compat(other)?;
        let mut out = self.clone();
        for (e, &c) in &other.terms {
            let cur = *out.terms.get(e).unwrap_or(&0) as i128;
            let v = self.ring.normalize_wide(ck_add(cur, c as i128)?)?;
            out.terms.remove(e);
            if v != 0 {
                out.terms.insert(e.clone(), v);
            }
        }
        Ok(out)
    }

    pub fn scale(&self, k: i64) -> Result<MultiPoly> {
        let mut out = Self::zero(self.n_vars, self.ring);
        out.var_offset = self.var_offset;
        for (e, &c) in &self.terms {
            let v = self.ring.normalize_wide(ck_mul(c as i128, k as i128)?)?;
            if v != 0 {
                out.terms.insert(e.clone(), v);
            }
        }
        Ok(out)
    }

    pub fn sub(&self, other: &MultiPoly) -> Result<MultiPoly> {
        self.add(&other.scale(-1)?)
    }

    pub fn mul(&self, other: &MultiPoly) -> Result<MultiPoly> {
        self.check_compat(other)?;
        let mut acc: BTreeMap<Vec<u32>, i128> = BTreeMap::new();
        for (e1, &c1) in &self.terms {
            for (e2, &c2) in &other.terms {
                let e: Vec<u32> = e1.iter().zip(e2).map(|(a, b)| a + b).collect();
                let slot = acc.entry(e).or_insert(0);
                *slot = ck_add(*slot, ck_mul(c1 as i128, c2 as i128)?)?;
                if let Ring::ModP(p) = self.ring {
                    *slot = reduce_i128(*slot, p) as i128;
                }
            }
        }
        let mut out = Self::zero(self.n_vars, self.ring);
        out.var_offset = self.var_offset;
        for (e, c) in acc {
            let v = self.ring.normalize_wide(c)?;
            if v != 0 {
                out.terms.insert(e, v);
            }
        }
        Ok(out)
    }

    /// Formal partial derivative in variable position `i`.
    pub fn derivative(&self, i: usize) -> MultiPoly {
        let mut out = Self::zero(self.n_vars, self.ring);
        out.var_offset = self.var_offset;
        for (e, &c) in &self.terms {
            if e[i] == 0 {
                continue;
            }
            let mut e2 = e.clone();
            e2[i] -= 1;
            let v = self
                .ring
                .normalize_wide(c as i128 * e[i] as i128)
                .expect("derivative coefficient fits after one multiplication by a u32");
            if v != 0 {
                out.terms.insert(e2, v);
            }
        }
        out
    }

    pub fn gradient(&self) -> Vec<MultiPoly> {
        (0..self.n_vars).map(|i| self.derivative(i)).collect()
    }

    /// Inserts a new variable at position `new_var` and multiplies each term
    /// by the power of it that makes the result homogeneous of the same degree.
    pub fn homogenize(&self, new_var: usize) -> Result<MultiPoly> {
        if new_var > self.n_vars {
            return Err(XntError::input(format!(
                "homogenizing variable {new_var} out of range"
            )));
        }
        let d = self.total_degree();
        let mut out = Self::zero(self.n_vars + 1, self.ring);
        out.var_offset = if new_var == 0 {
            self.var_offset.saturating_sub(1)
        } else {
            self.var_offset
        };
        for (e, &c) in &self.terms {
            let deg: u32 = e.iter().sum();
            let mut e2 = e.clone();
            e2.insert(new_var, d - deg);
            out.terms.insert(e2, c);
        }
        Ok(out)
    }

    /// Sets variable position `var` to 1 and removes it.
    pub fn dehomogenize(&self, var: usize) -> Result<MultiPoly> {
        let terms = self.terms.iter().map(|(e, &c)| {
            let mut e2 = e.clone();
            e2.remove(var);
            (e2, c)
        });
        let mut out = Self::from_terms(self.n_vars - 1, self.ring, terms)?;
        out.var_offset = if var == 0 {
            self.var_offset + 1
        } else {
            self.var_offset
        };
        Ok(out)
    }

    /// Coefficient reduction into `Z/p`.
    pub fn reduce_mod(&self, p: u64) -> MultiPoly {
        let mut out = Self::zero(self.n_vars, Ring::ModP(p));
        out.var_offset = self.var_offset;
        for (e, &c) in &self.terms {
            out.add_term(e.clone(), c);
        }
        out
    }

    fn check_arity(&self, len: usize) -> Result<()> {
        if len != self.n_vars {
            return Err(XntError::input(format!(
                "point of length {len} for a polynomial in {} variables",
                self.n_vars
            )));
        }
        Ok(())
    }

    /// Exact integer evaluation (coefficients read as integers).
    pub fn eval_int(&self, x: &[i64]) -> Result<i128> {
        self.check_arity(x.len())?;
        let mut acc: i128 = 0;
        for (e, &c) in &self.terms {
            let mut term = c as i128;
            for (xi, &ei) in x.iter().zip(e) {
                if ei > 0 {
                    term = ck_mul(term, ck_pow(*xi as i128, ei)?)?;
                }
            }
            acc = ck_add(acc, term)?;
        }
        if let Ring::ModP(p) = self.ring {
            acc = reduce_i128(acc, p) as i128;
        }
        Ok(acc)
    }

    /// Evaluation at residues mod `p`.
    pub fn eval_mod(&self, x: &[u64], p: u64) -> Result<u64> {
        self.check_arity(x.len())?;
        let mut acc = 0u64;
        for (e, &c) in &self.terms {
            let mut term = reduce_i64(c, p);
            for (xi, &ei) in x.iter().zip(e) {
                if ei > 0 {
                    term = mul_mod(term, pow_mod(*xi, ei as u64, p), p);
                }
            }
            acc = (acc + term) % p;
        }
        Ok(acc)
    }

    /// Evaluation over a finite field of the coefficient ring's characteristic.
    pub fn eval_in<K: FiniteField>(&self, field: &K, x: &[K::Elem]) -> K::Elem {
        debug_assert_eq!(x.len(), self.n_vars);
        let mut acc = field.zero();
        for (e, &c) in &self.terms {
            let mut term = field.embed_int(c);
            for (&xi, &ei) in x.iter().zip(e) {
                if ei > 0 {
                    term = field.mul(term, field.pow(xi, ei as u64));
                }
            }
            acc = field.add(acc, term);
        }
        acc
    }

    /// A reusable evaluator with per-variable power tables over `F_p`.
    pub fn compile_mod(&self, p: u64) -> ModPEvaluator {
        ModPEvaluator::new(self, p)
    }
}

/// Fast evaluator of a fixed polynomial at points of `F_p^n`.
#[derive(Clone, Debug)]
pub struct ModPEvaluator {
    p: u64,
    n_vars: usize,
    terms: Vec<(u64, Vec<(usize, u32)>)>,
    max_exp: u32,
}

impl ModPEvaluator {
    fn new(poly: &MultiPoly, p: u64) -> Self {
        let terms = poly
            .terms()
            .map(|(e, c)| {
                let vars = e
                    .iter()
                    .enumerate()
                    .filter(|(_, &k)| k > 0)
                    .map(|(i, &k)| (i, k))
                    .collect();
                (reduce_i64(c, p), vars)
            })
            .filter(|(c, _)| *c != 0)
            .collect();
        ModPEvaluator {
            p,
            n_vars: poly.n_vars(),
            terms,
            max_exp: poly.total_degree(),
        }
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    /// Table of `x^k mod p` for `x < p`, `k <= max_exp`.
    pub fn power_table(&self) -> Vec<Vec<u64>> {
        (0..self.p)
            .map(|x| {
                let mut row = Vec::with_capacity(self.max_exp as usize + 1);
                let mut v = 1 % self.p;
                for _ in 0..=self.max_exp {
                    row.push(v);
                    v = v * x % self.p;
                }
                row
            })
            .collect()
    }

    pub fn eval(&self, x: &[u64], powers: &[Vec<u64>]) -> u64 {
        let mut acc = 0u64;
        for (c, vars) in &self.terms {
            let mut t = *c;
            for &(i, k) in vars {
                t = t * powers[x[i] as usize][k as usize] % self.p;
            }
            acc += t;
        }
        acc % self.p
    }
}

impl fmt::Display for MultiPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        // Highest total degree first, then reverse-lexicographic exponents.
        let mut terms: Vec<(&Vec<u32>, &i64)> = self.terms.iter().collect();
        terms.sort_by(|a, b| {
            let da: u32 = a.0.iter().sum();
            let db: u32 = b.0.iter().sum();
            db.cmp(&da).then_with(|| b.0.cmp(a.0))
        });
        for (k, (e, &c)) in terms.into_iter().enumerate() {
            let mono: Vec<String> = e
                .iter()
                .enumerate()
                .filter(|(_, &ei)| ei > 0)
                .map(|(i, &ei)| {
                    let name = format!("X{}", i + self.var_offset);
                    if ei == 1 {
                        name
                    } else {
                        format!("{name}^{ei}")
                    }
                })
                .collect();
            let (neg, mag) = (c < 0, c.unsigned_abs());
            match (k, neg) {
                (0, true) => write!(f, "-")?,
                (0, false) => {}
                (_, true) => write!(f, " - ")?,
                (_, false) => write!(f, " + ")?,
            }
            if mono.is_empty() {
                write!(f, "{mag}")?;
            } else if mag == 1 {
                write!(f, "{}", mono.join("*"))?;
            } else {
                write!(f, "{mag}*{}", mono.join("*"))?;
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Univariate
// ---------------------------------------------------------------------------

/// Dense univariate polynomial, lowest degree first, no trailing zeros.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct UniPoly {
    coeffs: Vec<i64>,
    ring: Ring,
}

impl UniPoly {
    pub fn new(coeffs: Vec<i64>, ring: Ring) -> Self {
        let mut coeffs: Vec<i64> = coeffs.into_iter().map(|c| ring.normalize(c)).collect();
        while coeffs.last() == Some(&0) {
            coeffs.pop();
        }
        UniPoly { coeffs, ring }
    }

    pub fn int(coeffs: &[i64]) -> Self {
        Self::new(coeffs.to_vec(), Ring::Integers)
    }

    /// `T^d` over `Z`.
    pub fn monomial(d: usize) -> Self {
        let mut c = vec![0; d + 1];
        c[d] = 1;
        Self::int(&c)
    }

    pub fn coeffs(&self) -> &[i64] {
        &self.coeffs
    }

    pub fn ring(&self) -> Ring {
        self.ring
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn leading_coeff(&self) -> i64 {
        *self.coeffs.last().unwrap_or(&0)
    }

    pub fn height(&self) -> u64 {
        self.coeffs
            .iter()
            .map(|c| c.unsigned_abs())
            .max()
            .unwrap_or(0)
    }

    pub fn eval_int(&self, t: i64) -> Result<i128> {
        let mut acc: i128 = 0;
        for &c in self.coeffs.iter().rev() {
            acc = ck_add(ck_mul(acc, t as i128)?, c as i128)?;
        }
        if let Ring::ModP(p) = self.ring {
            acc = reduce_i128(acc, p) as i128;
        }
        Ok(acc)
    }

    pub fn eval_mod(&self, t: u64, p: u64) -> u64 {
        self.coeffs
            .iter()
            .rev()
            .fold(0u64, |acc, &c| (mul_mod(acc, t, p) + reduce_i64(c, p)) % p)
    }

    pub fn eval_in<K: FiniteField>(&self, field: &K, t: K::Elem) -> K::Elem {
        self.coeffs.iter().rev().fold(field.zero(), |acc, &c| {
            field.add(field.mul(acc, t), field.embed_int(c))
        })
    }

    pub fn derivative(&self) -> UniPoly {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, &c)| c * i as i64)
            .collect();
        UniPoly::new(coeffs, self.ring)
    }

    pub fn reduce_mod(&self, p: u64) -> UniPoly {
        UniPoly::new(self.coeffs.clone(), Ring::ModP(p))
    }

    /// `self - k`.
    pub fn sub_const(&self, k: i64) -> Result<UniPoly> {
        let mut c = self.coeffs.clone();
        if c.is_empty() {
            c.push(0);
        }
        c[0] = self.ring.normalize_wide(c[0] as i128 - k as i128)?;
        Ok(UniPoly::new(c, self.ring))
    }
}

impl fmt::Display for UniPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.coeffs.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (i, &c) in self.coeffs.iter().enumerate().rev() {
            if c == 0 {
                continue;
            }
            let (neg, mag) = (c < 0, c.unsigned_abs());
            match (first, neg) {
                (true, true) => write!(f, "-")?,
                (true, false) => {}
                (false, true) => write!(f, " - ")?,
                (false, false) => write!(f, " + ")?,
            }
            first = false;
            let mono = match i {
                0 => String::new(),
                1 => "T".to_string(),
                _ => format!("T^{i}"),
            };
            if mono.is_empty() {
                write!(f, "{mag}")?;
            } else if mag == 1 {
                write!(f, "{mono}")?;
            } else {
                write!(f, "{mag}*{mono}")?;
            }
        }
        Ok(())
    }
}

/// Determinant of an integer matrix by Bareiss fraction-free elimination.
fn bareiss_det(mut m: Vec<Vec<i128>>) -> Result<i128> {
    let n = m.len();
    if n == 0 {
        return Ok(1);
    }
    let mut sign: i128 = 1;
    let mut prev: i128 = 1;
    for k in 0..n - 1 {
        if m[k][k] == 0 {
            match (k + 1..n).find(|&r| m[r][k] != 0) {
                Some(r) => {
                    m.swap(k, r);
                    sign = -sign;
                }
                None => return Ok(0),
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let num = ck_mul(m[i][j], m[k][k])?
                    .checked_sub(ck_mul(m[i][k], m[k][j])?)
                    .ok_or(XntError::Overflow("Bareiss elimination"))?;
                m[i][j] = num / prev;
            }
            m[i][k] = 0;
        }
        prev = m[k][k];
    }
    Ok(sign * m[n - 1][n - 1])
}

/// Sylvester matrix of `a` (degree m) and `b` (degree n), size `m + n`.
pub fn sylvester_matrix(a: &UniPoly, b: &UniPoly) -> Vec<Vec<i128>> {
    let m = a.degree().unwrap_or(0);
    let n = b.degree().unwrap_or(0);
    let size = m + n;
    let mut rows = vec![vec![0i128; size]; size];
    // Coefficients listed from the top degree down.
    for r in 0..n {
        for (j, &c) in a.coeffs.iter().rev().enumerate() {
            rows[r][r + j] = c as i128;
        }
    }
    for r in 0..m {
        for (j, &c) in b.coeffs.iter().rev().enumerate() {
            rows[n + r][r + j] = c as i128;
        }
    }
    rows
}

fn poly_divrem_mod(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    let mut r = a.to_vec();
    let db = b.len() - 1;
    let inv = inv_mod(b[db], p).expect("nonzero leading coefficient mod prime");
    while r.len() > db && !r.is_empty() {
        let dr = r.len() - 1;
        let f = mul_mod(r[dr], inv, p);
        for i in 0..=db {
            let s = mul_mod(f, b[i], p);
            r[dr - db + i] = (r[dr - db + i] + p - s) % p;
        }
        while r.last() == Some(&0) {
            r.pop();
        }
    }
    r
}

fn resultant_mod(a: &[u64], b: &[u64], p: u64) -> u64 {
    let m = a.len() - 1;
    let n = b.len() - 1;
    if n == 0 {
        return pow_mod(b[0], m as u64, p);
    }
    if m == 0 {
        return pow_mod(a[0], n as u64, p);
    }
    let r = poly_divrem_mod(a, b, p);
    if r.is_empty() {
        return 0;
    }
    let dr = r.len() - 1;
    let sign = if (m * n) % 2 == 1 { p - 1 } else { 1 };
    let factor = mul_mod(sign, pow_mod(b[n], (m - dr) as u64, p), p);
    mul_mod(factor, resultant_mod(b, &r, p), p)
}

/// Sylvester resultant `Res(a, b) = det Syl(a, b) = lc(a)^{deg b} prod b(alpha)`.
///
/// Over `Z` this is an exact Bareiss determinant; over `Z/p` a Euclidean
/// remainder sequence. The mod-p result is returned as a residue in `[0, p)`.
pub fn resultant_uni(a: &UniPoly, b: &UniPoly) -> Result<i128> {
    if a.is_zero() || b.is_zero() {
        return Err(XntError::input("resultant of the zero polynomial"));
    }
    if a.ring != b.ring {
        return Err(XntError::input("resultant over mismatched rings"));
    }
    match a.ring {
        Ring::Integers => bareiss_det(sylvester_matrix(a, b)),
        Ring::ModP(p) => {
            let ua: Vec<u64> = a.coeffs.iter().map(|&c| c as u64).collect();
            let ub: Vec<u64> = b.coeffs.iter().map(|&c| c as u64).collect();
            Ok(resultant_mod(&ua, &ub, p) as i128)
        }
    }
}

/// `(-1)^{d(d-1)/2} Res(a, a') / lc(a)`.
pub fn discriminant_uni(a: &UniPoly) -> Result<i128> {
    let d = a
        .degree()
        .filter(|&d| d >= 1)
        .ok_or_else(|| XntError::input("discriminant needs degree >= 1"))?;
    if d == 1 {
        return Ok(1);
    }
    let da = a.derivative();
    let lc = a.leading_coeff();
    let sign_neg = (d * (d - 1) / 2) % 2 == 1;
    match a.ring {
        Ring::Integers => {
            if da.is_zero() {
                return Err(XntError::Degenerate("derivative vanishes".into()));
            }
            let r = resultant_uni(a, &da)?;
            if r % lc as i128 != 0 {
                return Err(XntError::Invariant(
                    "Res(a, a') not divisible by lc(a)".into(),
                ));
            }
            let q = r / lc as i128;
            Ok(if sign_neg { -q } else { q })
        }
        Ring::ModP(p) => {
            let inv = inv_mod(lc as u64, p).ok_or_else(|| {
                XntError::Degenerate(format!("leading coefficient {lc} not invertible mod {p}"))
            })?;
            if da.is_zero() {
                return Ok(0);
            }
            let r = resultant_uni(a, &da)? as u64;
            let v = mul_mod(r, inv, p);
            Ok(if sign_neg {
                ((p - v) % p) as i128
            } else {
                v as i128
            })
        }
    }
}

/// Discriminant of an integer polynomial reduced mod `p`; errors when `p | lc`.
pub fn discriminant_mod(a: &UniPoly, p: u64) -> Result<u64> {
    if reduce_i64(a.leading_coeff(), p) == 0 {
        return Err(XntError::Degenerate(format!(
            "leading coefficient {} not invertible mod {p}",
            a.leading_coeff()
        )));
    }
    Ok(discriminant_uni(&a.reduce_mod(p))? as u64)
}

/// `r(s) = Res_T(h(T) - s, h'(T))` over `F_p`, whose roots in `F_p` are the
/// critical values of `h` that lie in `F_p`.
///
/// Built by evaluating the resultant at `deg h` values of `s` and
/// interpolating; `r` has degree at most `deg h - 1`.
pub fn critical_value_poly(h: &UniPoly) -> Result<UniPoly> {
    let p = match h.ring {
        Ring::ModP(p) => p,
        Ring::Integers => return Err(XntError::input("critical_value_poly works over F_p")),
    };
    let d = h.degree().unwrap_or(0);
    if d < 2 {
        return Err(XntError::input("critical_value_poly needs deg h >= 2"));
    }
    let dh = h.derivative();
    if dh.is_zero() {
        return Err(XntError::Degenerate(format!(
            "h' vanishes identically mod {p}"
        )));
    }
    if (p as usize) < d {
        return Err(XntError::input(format!(
            "need at least deg h = {d} points in F_{p}"
        )));
    }
    let xs: Vec<u64> = (0..d as u64).collect();
    let ys: Vec<u64> = xs
        .iter()
        .map(|&s| resultant_uni(&h.sub_const(s as i64)?, &dh).map(|r| r as u64))
        .collect::<Result<_>>()?;
    let coeffs = lagrange_interpolate(&xs, &ys, p);
    Ok(UniPoly::new(
        coeffs.into_iter().map(|c| c as i64).collect(),
        Ring::ModP(p),
    ))
}

fn lagrange_interpolate(xs: &[u64], ys: &[u64], p: u64) -> Vec<u64> {
    let n = xs.len();
    let mut out = vec![0u64; n];
    for i in 0..n {
        // basis numerator prod_{j != i} (x - x_j)
        let mut basis = vec![1u64];
        let mut denom = 1u64;
        for j in 0..n {
            if j == i {
                continue;
            }
            let mut next = vec![0u64; basis.len() + 1];
            for (k, &c) in basis.iter().enumerate() {
                next[k + 1] = (next[k + 1] + c) % p;
                next[k] = (next[k] + p - mul_mod(c, xs[j], p)) % p;
            }
            basis = next;
            denom = mul_mod(denom, (xs[i] + p - xs[j]) % p, p);
        }
        let w = mul_mod(ys[i], inv_mod(denom, p).expect("distinct nodes"), p);
        for (k, &c) in basis.iter().enumerate() {
            out[k] = (out[k] + mul_mod(c, w, p)) % p;
        }
    }
    out
}

/// Roots of a polynomial over `F_p`, by exhaustive evaluation.
pub fn roots_mod_p(h: &UniPoly) -> Result<Vec<u64>> {
    match h.ring {
        Ring::ModP(p) => Ok((0..p).filter(|&s| h.eval_mod(s, p) == 0).collect()),
        Ring::Integers => Err(XntError::input("roots_mod_p needs a mod-p polynomial")),
    }
}

// ---------------------------------------------------------------------------
// Integer image of a univariate polynomial
// ---------------------------------------------------------------------------

/// Sorted table of `{f(t) : |t| <= t_max}` where `t_max` is large enough that
/// `|f(t)| > max_abs` for every `|t| > t_max`. Answers "is `n = f(t)` for some
/// integer `t`" for every `|n| <= max_abs`.
#[derive(Clone, Debug)]
pub struct IntegerImage {
    values: Vec<i128>,
    t_max: i64,
    max_abs: i128,
}

impl IntegerImage {
    pub fn new(f: &UniPoly, max_abs: i128) -> Result<Self> {
        let d = f
            .degree()
            .filter(|&d| d >= 1)
            .ok_or_else(|| XntError::input("image table needs deg f >= 1"))?;
        let t_max = cauchy_radius(f, max_abs, d)?;
        let mut values = Vec::with_capacity(2 * t_max as usize + 1);
        for t in -t_max..=t_max {
            let v = f.eval_int(t)?;
            if v.abs() <= max_abs {
                values.push(v);
            }
        }
        values.sort_unstable();
        values.dedup();
        Ok(IntegerImage {
            values,
            t_max,
            max_abs,
        })
    }

    pub fn t_max(&self) -> i64 {
        self.t_max
    }

    pub fn max_abs(&self) -> i128 {
        self.max_abs
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn contains(&self, n: i128) -> bool {
        debug_assert!(n.abs() <= self.max_abs, "query outside the certified range");
        self.values.binary_search(&n).is_ok()
    }
}

/// Radius beyond which `|f(t)| > bound`: with `S = sum_{i<d} |a_i|`, for
/// `|t| >= 2S/|a_d|` one has `|f(t)| >= |a_d| |t|^d / 2`.
fn cauchy_radius(f: &UniPoly, bound: i128, d: usize) -> Result<i64> {
    let lead = f.leading_coeff().unsigned_abs() as f64;
    let s: f64 = f.coeffs[..d].iter().map(|c| c.unsigned_abs() as f64).sum();
    let r0 = 1.0 + 2.0 * s / lead;
    let r1 = (2.0 * bound as f64 / lead).powf(1.0 / d as f64);
    let r = r0.max(r1).ceil() + 1.0;
    if r > 1e12 {
        return Err(XntError::Overflow("value-table radius"));
    }
    Ok(r as i64)
}

// ---------------------------------------------------------------------------
// Text format
// ---------------------------------------------------------------------------

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

#[derive(Debug)]
enum VarName {
    X(usize),
    T,
}

type RawTerm = (i128, Vec<(VarName, u32)>);

impl<'a> Parser<'a> {
    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(XntError::Parse {
            offset: self.pos,
            message: msg.into(),
        })
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn number(&mut self) -> Result<u128> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return self.err("expected a number");
        }
        std::str::from_utf8(&self.src[start..self.pos])
            .unwrap()
            .parse::<u128>()
            .or_else(|_| {
                self.pos = start;
                self.err("number too large")
            })
    }

    fn factor(&mut self) -> Result<Option<(VarName, u32)>> {
        match self.peek() {
            Some(b'X') | Some(b'x') => {
                self.pos += 1;
                let at = self.pos;
                if !self.src.get(self.pos).is_some_and(|c| c.is_ascii_digit()) {
                    return self.err("expected a variable index after X");
                }
                let idx = self.number()?;
                if idx > 64 {
                    self.pos = at;
                    return self.err("variable index too large");
                }
                let e = self.exponent()?;
                Ok(Some((VarName::X(idx as usize), e)))
            }
            Some(b'T') | Some(b't') => {
                self.pos += 1;
                let e = self.exponent()?;
                Ok(Some((VarName::T, e)))
            }
            _ => Ok(None),
        }
    }

    fn exponent(&mut self) -> Result<u32> {
        if self.peek() == Some(b'^') {
            self.pos += 1;
            if self.peek().is_none_or(|c| !c.is_ascii_digit()) {
                return self.err("expected an exponent after '^'");
            }
            let at = self.pos;
            let e = self.number()?;
            u32::try_from(e).or_else(|_| {
                self.pos = at;
                self.err("exponent too large")
            })
        } else {
            Ok(1)
        }
    }

    fn term(&mut self, sign: i128) -> Result<RawTerm> {
        let mut coeff: i128 = sign;
        let mut vars = Vec::new();
        let mut expect_factor = true;
        loop {
            match self.peek() {
                Some(c) if c.is_ascii_digit() => {
                    let at = self.pos;
                    let v = self.number()?;
                    coeff = i128::try_from(v)
                        .ok()
                        .and_then(|v| coeff.checked_mul(v))
                        .ok_or(XntError::Parse {
                            offset: at,
                            message: "coefficient too large".into(),
                        })?;
                    // A coefficient may be followed directly by a variable ("3X1").
                    if let Some(f) = self.factor()? {
                        vars.push(f);
                    }
                }
                _ => match self.factor()? {
                    Some(f) => vars.push(f),
                    None if expect_factor => return self.err("expected a coefficient or variable"),
                    None => break,
                },
            }
            expect_factor = self.peek() == Some(b'*');
            if !expect_factor {
                break;
            }
            self.pos += 1;
        }
        Ok((coeff, vars))
    }

    fn sum(&mut self) -> Result<Vec<RawTerm>> {
        let mut out = Vec::new();
        let mut sign: i128 = 1;
        if let Some(c @ (b'+' | b'-')) = self.peek() {
            self.pos += 1;
            sign = if c == b'-' { -1 } else { 1 };
        }
        loop {
            out.push(self.term(sign)?);
            match self.peek() {
                None => break,
                Some(b'+') => {
                    self.pos += 1;
                    sign = 1;
                }
                Some(b'-') => {
                    self.pos += 1;
                    sign = -1;
                }
                Some(c) => return self.err(format!("unexpected character '{}'", c as char)),
            }
        }
        Ok(out)
    }
}

/// Parses `"X1^2 + 3*X2^2 - 1"`-style integer polynomials.
///
/// The variables are `X0..Xmax` if `X0` occurs and `X1..Xmax` otherwise;
/// `T` is rejected here.
pub fn parse_multi(text: &str) -> Result<MultiPoly> {
    let mut parser = Parser {
        src: text.as_bytes(),
        pos: 0,
    };
    let raw = parser.sum()?;
    let mut max_idx = 0usize;
    let mut uses_x0 = false;
    let mut any_var = false;
    for (_, vars) in &raw {
        for (v, _) in vars {
            match v {
                VarName::X(i) => {
                    any_var = true;
                    max_idx = max_idx.max(*i);
                    uses_x0 |= *i == 0;
                }
                VarName::T => {
                    return Err(XntError::Parse {
                        offset: 0,
                        message: "variable T in a multivariate polynomial".into(),
                    })
                }
            }
        }
    }
    let offset = if uses_x0 || !any_var { 0 } else { 1 };
    let n_vars = if any_var { max_idx + 1 - offset } else { 1 };
    let mut terms = Vec::with_capacity(raw.len());
    for (c, vars) in raw {
        let mut e = vec![0u32; n_vars];
        for (v, k) in vars {
            if let VarName::X(i) = v {
                e[i - offset] += k;
            }
        }
        let c = i64::try_from(c).map_err(|_| XntError::Parse {
            offset: 0,
            message: "coefficient too large".into(),
        })?;
        terms.push((e, c));
    }
    Ok(MultiPoly::from_terms(n_vars, Ring::Integers, terms)?.with_var_offset(offset))
}

/// Parses a univariate integer polynomial in `T`.
pub fn parse_uni(text: &str) -> Result<UniPoly> {
    let mut parser = Parser {
        src: text.as_bytes(),
        pos: 0,
    };
    let raw = parser.sum()?;
    let mut acc: BTreeMap<usize, i128> = BTreeMap::new();
    for (c, vars) in raw {
        let mut deg = 0usize;
        for (v, k) in vars {
            match v {
                VarName::T => deg += k as usize,
                VarName::X(_) => {
                    return Err(XntError::Parse {
                        offset: 0,
                        message: "univariate polynomials use the variable T".into(),
                    })
                }
            }
        }
        let slot = acc.entry(deg).or_insert(0);
        *slot = ck_add(*slot, c)?;
    }
    let top = acc.keys().next_back().copied().unwrap_or(0);
    let mut coeffs = vec![0i64; top + 1];
    for (d, c) in acc {
        coeffs[d] = i64::try_from(c).map_err(|_| XntError::Overflow("coefficient"))?;
    }
    Ok(UniPoly::new(coeffs, Ring::Integers))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn common_frame_aligns_variables() {
        let f = parse_multi("X1^2 + X2^2 + X3^2").unwrap();
        let g = parse_multi("X1*X2").unwrap();
        let (f2, g2) = MultiPoly::common_frame(&f, &g).unwrap();
        assert_eq!((f2.n_vars(), g2.n_vars()), (3, 3));
        assert_eq!(f2, f);
        assert_eq!(g2.eval_int(&[2, 3, 5]).unwrap(), 6);
        let h = parse_multi("X0 + X2").unwrap();
        let (h2, g3) = MultiPoly::common_frame(&h, &g).unwrap();
        assert_eq!(h2.n_vars(), 3);
        assert_eq!(g3.eval_int(&[7, 2, 3]).unwrap(), 6);
        assert_eq!(g3.to_string(), "X1*X2");
    }
    use crate::field::{ExtField, PrimeField};
    use proptest::prelude::*;

    /// Laplace expansion, independent of the Bareiss and Euclidean paths.
    fn det_laplace(m: &[Vec<i128>]) -> i128 {
        let n = m.len();
        if n == 0 {
            return 1;
        }
        if n == 1 {
            return m[0][0];
        }
        let mut acc = 0;
        for j in 0..n {
            if m[0][j] == 0 {
                continue;
            }
            let minor: Vec<Vec<i128>> = m[1..]
                .iter()
                .map(|row| {
                    row.iter()
                        .enumerate()
                        .filter(|(c, _)| *c != j)
                        .map(|(_, &v)| v)
                        .collect()
                })
                .collect();
            let s = if j % 2 == 0 { 1 } else { -1 };
            acc += s * m[0][j] * det_laplace(&minor);
        }
        acc
    }

    fn x(n: usize, i: usize) -> MultiPoly {
        MultiPoly::var(n, Ring::Integers, i)
    }

    #[test]
    fn evaluation_examples() {
        let f = parse_multi("X1^2 + X2^2").unwrap();
        assert_eq!(f.n_vars(), 2);
        assert_eq!(f.eval_int(&[0, 0]).unwrap(), 0);
        assert_eq!(f.eval_mod(&[1, 2], 5).unwrap(), 0);
        let g = parse_multi("X1*X2*X3").unwrap();
        assert_eq!(g.eval_int(&[1, 1, 1]).unwrap(), 1);
        assert!(g.eval_int(&[1, 1]).is_err());
        let big = parse_multi("X0^40").unwrap();
        assert!(matches!(big.eval_int(&[10]), Err(XntError::Overflow(_))));
    }

    #[test]
    fn gradients() {
        let f = parse_multi("X1^2 + X2^2").unwrap();
        let g = f.gradient();
        assert_eq!(g[0], x(2, 0).scale(2).unwrap().with_var_offset(1));
        assert_eq!(g[1], x(2, 1).scale(2).unwrap().with_var_offset(1));
        let cube = parse_multi("X1^3").unwrap().reduce_mod(3);
        assert!(cube.gradient()[0].is_zero());
        let xy = parse_multi("X1*X2").unwrap();
        assert_eq!(xy.gradient()[0].to_string(), "X2");
        assert_eq!(xy.gradient()[1].to_string(), "X1");
    }

    #[test]
    fn homogenization() {
        let f = parse_multi("X1^2 + X2^2 - 1").unwrap();
        let h = f.homogenize(0).unwrap();
        assert_eq!(h, parse_multi("X1^2 + X2^2 - X0^2").unwrap());
        assert!(h.is_homogeneous());
        assert_eq!(h.dehomogenize(0).unwrap(), f);
        let q = parse_multi("X0^2 + X1*X2").unwrap();
        assert_eq!(q.homogenize(3).unwrap().dehomogenize(3).unwrap(), q);
        let c = parse_multi("X1^3 + X1").unwrap();
        assert_eq!(
            c.homogenize(0).unwrap(),
            parse_multi("X1^3 + X1*X0^2").unwrap()
        );
    }

    #[test]
    fn resultant_examples() {
        let a = UniPoly::int(&[-3, 1]);
        let b = UniPoly::int(&[-7, 1]);
        assert_eq!(resultant_uni(&a, &b).unwrap(), 3 - 7);
        for s in [-5i64, 0, 2, 6] {
            let a = UniPoly::int(&[-s, 0, 1]);
            let b = UniPoly::int(&[0, 2]);
            assert_eq!(resultant_uni(&a, &b).unwrap(), -4 * s as i128);
            assert_eq!(det_laplace(&sylvester_matrix(&a, &b)), -4 * s as i128);
        }
        let c = UniPoly::int(&[1, 0, 1]);
        assert_eq!(resultant_uni(&c, &c).unwrap(), 0);
        assert!(resultant_uni(&UniPoly::int(&[]), &c).is_err());
    }

    #[test]
    fn discriminant_examples() {
        for (b, c) in [(1i64, 1i64), (3, -4), (0, 5), (-7, 2)] {
            let a = UniPoly::int(&[c, b, 1]);
            assert_eq!(discriminant_uni(&a).unwrap(), (b * b - 4 * c) as i128);
        }
        assert_eq!(discriminant_uni(&UniPoly::int(&[-6, 0, 1])).unwrap(), 24);
        assert_eq!(discriminant_uni(&UniPoly::int(&[1, -2, 1])).unwrap(), 0);
        assert_eq!(
            discriminant_uni(&UniPoly::int(&[-1, 0, 0, 1])).unwrap(),
            -27
        );
        assert!(matches!(
            discriminant_mod(&UniPoly::int(&[1, 0, 5]), 5),
            Err(XntError::Degenerate(_))
        ));
        assert_eq!(
            discriminant_mod(&UniPoly::int(&[-6, 0, 1]), 7).unwrap(),
            24 % 7
        );
    }

    #[test]
    fn critical_values() {
        let sq = UniPoly::int(&[0, 0, 1]).reduce_mod(5);
        let r = critical_value_poly(&sq).unwrap();
        assert_eq!(r, UniPoly::new(vec![0, -4], Ring::ModP(5)));
        assert_eq!(roots_mod_p(&r).unwrap(), vec![0]);
        let h = UniPoly::int(&[0, -3, 0, 1]).reduce_mod(5);
        assert_eq!(
            roots_mod_p(&critical_value_poly(&h).unwrap()).unwrap(),
            vec![2, 3]
        );
        let h = UniPoly::int(&[1, 0, 1]).reduce_mod(7);
        assert_eq!(
            roots_mod_p(&critical_value_poly(&h).unwrap()).unwrap(),
            vec![1]
        );
        let deg = UniPoly::int(&[0, 0, 0, 1]).reduce_mod(3);
        assert!(matches!(
            critical_value_poly(&deg),
            Err(XntError::Degenerate(_))
        ));
    }

    /// Critical values found by brute force over F_{p^j}, j <= 4.
    fn critical_values_bruteforce(h: &UniPoly, p: u64) -> Vec<u64> {
        let hp = h.reduce_mod(p);
        let dh = hp.derivative();
        let mut out = std::collections::BTreeSet::new();
        for k in 1..=4u32 {
            if p.pow(k) > 20_000 {
                break;
            }
            let f = ExtField::new(p, k).unwrap();
            for z in 0..f.order() {
                if dh.eval_in(&f, z) == 0 {
                    let v = hp.eval_in(&f, z);
                    if f.in_base_field(v) {
                        out.insert(v);
                    }
                }
            }
        }
        out.into_iter().collect()
    }

    #[test]
    fn critical_values_match_extension_scan() {
        let bank = [
            vec![0i64, 0, 1],
            vec![0, -3, 0, 1],
            vec![1, 0, 0, 2],
            vec![0, 1, 0, 0, 1],
            vec![3, 1, -2, 0, 1, 1],
            vec![1, 2, 3, 4],
        ];
        for c in bank {
            let h = UniPoly::int(&c);
            for p in [7u64, 11, 13] {
                let r = critical_value_poly(&h.reduce_mod(p)).unwrap();
                assert_eq!(
                    roots_mod_p(&r).unwrap(),
                    critical_values_bruteforce(&h, p),
                    "h={h} p={p}"
                );
            }
        }
    }

    /// Common root of a and b in F_{p^j} for j <= 4 (sizes permitting).
    fn share_root(a: &UniPoly, b: &UniPoly, p: u64) -> bool {
        let cap = (a.degree().unwrap() * b.degree().unwrap()).min(4) as u32;
        (1..=cap).any(|k| {
            let f = ExtField::new(p, k).unwrap();
            (0..f.order()).any(|z| a.eval_in(&f, z) == 0 && b.eval_in(&f, z) == 0)
        })
    }

    proptest! {
        #[test]
        fn resultant_paths_agree(a in proptest::collection::vec(-6i64..6, 2..5),
                                 b in proptest::collection::vec(-6i64..6, 2..5)) {
            let a = UniPoly::int(&a);
            let b = UniPoly::int(&b);
            prop_assume!(!a.is_zero() && !b.is_zero());
            let r = resultant_uni(&a, &b).unwrap();
            prop_assert_eq!(r, det_laplace(&sylvester_matrix(&a, &b)));
            for p in [5u64, 7] {
                let (ap, bp) = (a.reduce_mod(p), b.reduce_mod(p));
                if ap.degree() == a.degree() && bp.degree() == b.degree() {
                    prop_assert_eq!(resultant_uni(&ap, &bp).unwrap() as u64, reduce_i128(r, p));
                }
            }
        }

        #[test]
        fn resultant_vanishes_iff_common_root(a in proptest::collection::vec(0i64..5, 2..4),
                                              b in proptest::collection::vec(0i64..5, 2..4)) {
            let p = 5;
            let a = UniPoly::new(a, Ring::ModP(p));
            let b = UniPoly::new(b, Ring::ModP(p));
            prop_assume!(a.degree().unwrap_or(0) >= 1 && b.degree().unwrap_or(0) >= 1);
            let r = resultant_uni(&a, &b).unwrap();
            prop_assert_eq!(r == 0, share_root(&a, &b, p));
        }

        #[test]
        fn reduction_commutes_with_evaluation(c in proptest::collection::vec(-50i64..50, 1..6),
                                             pt in proptest::collection::vec(-20i64..20, 3),
                                             pi in 0usize..4) {
            let p = [2u64, 3, 7, 101][pi];
            let terms = c.iter().enumerate().map(|(k, &ck)| {
                (vec![(k % 3) as u32, (k / 2) as u32, 1 + (k % 2) as u32], ck)
            });
            let f = MultiPoly::from_terms(3, Ring::Integers, terms).unwrap();
            let lifted: Vec<u64> = pt.iter().map(|&v| reduce_i64(v, p)).collect();
            let direct = reduce_i128(f.eval_int(&pt).unwrap(), p);
            prop_assert_eq!(f.reduce_mod(p).eval_mod(&lifted, p).unwrap(), direct);
            let fp = PrimeField::new(p).unwrap();
            prop_assert_eq!(f.eval_in(&fp, &lifted), direct);
            let ev = f.compile_mod(p);
            prop_assert_eq!(ev.eval(&lifted, &ev.power_table()), direct);
        }

        #[test]
        fn text_round_trip(c in proptest::collection::vec(-9i64..9, 1..6)) {
            let terms = c.iter().enumerate().map(|(k, &ck)| (vec![k as u32 % 3, (k as u32 + 1) % 2, 0], ck));
            // X0*X2 pins the variable range so the text form names all three variables.
            let pin = MultiPoly::var(3, Ring::Integers, 0).mul(&MultiPoly::var(3, Ring::Integers, 2)).unwrap();
            let f = MultiPoly::from_terms(3, Ring::Integers, terms).unwrap().add(&pin).unwrap();
            prop_assert_eq!(parse_multi(&f.to_string()).unwrap(), f);
        }
    }

    #[test]
    fn parse_errors_report_offsets() {
        match parse_multi("X1^^2") {
            Err(XntError::Parse { offset, .. }) => assert_eq!(offset, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse_multi("X1 + "), Err(XntError::Parse { .. })));
        assert!(matches!(
            parse_multi("X1 $ 2"),
            Err(XntError::Parse { offset: 3, .. })
        ));
        assert!(matches!(parse_uni("X1 + T"), Err(XntError::Parse { .. })));
        assert_eq!(
            parse_uni("T^3 - 3*T").unwrap(),
            UniPoly::int(&[0, -3, 0, 1])
        );
        assert_eq!(parse_uni("2T^3 + 1").unwrap(), UniPoly::int(&[1, 0, 0, 2]));
        assert_eq!(parse_multi("3X1 - X2").unwrap().to_string(), "3*X1 - X2");
    }

    #[test]
    fn diagonal_detection() {
        let f = parse_multi("X0^2 + 2*X1^2 - X2^2").unwrap();
        assert_eq!(f.as_diagonal(), Some((vec![1, 2, -1], 2)));
        assert_eq!(
            parse_multi("X0^2 + X0*X1 + X2^2").unwrap().as_diagonal(),
            None
        );
        assert_eq!(parse_multi("X0^2 + X1^3").unwrap().as_diagonal(), None);
    }

    #[test]
    fn integer_image_matches_divisor_search() {
        use rand::{Rng, SeedableRng};
        // Integer root of f(T) = n via the rational root theorem.
        fn has_integer_root(f: &UniPoly, n: i128) -> bool {
            let g = f.sub_const(n as i64).unwrap();
            let c0 = g.coeffs()[0] as i128;
            if c0 == 0 {
                return true;
            }
            let m = c0.unsigned_abs();
            let mut d = 1u128;
            while d * d <= m {
                if m % d == 0 {
                    for cand in [d, m / d] {
                        for s in [1i128, -1] {
                            if g.eval_int((s * cand as i128) as i64).unwrap() == 0 {
                                return true;
                            }
                        }
                    }
                }
                d += 1;
            }
            false
        }
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for coeffs in [
            vec![0i64, 0, 1],
            vec![0, 0, 0, 1],
            vec![0, -3, 0, 1],
            vec![0, 1, 0, 0, 1],
            vec![1, 0, 0, 2],
        ] {
            let f = UniPoly::int(&coeffs);
            let table = IntegerImage::new(&f, 1_000_000).unwrap();
            for _ in 0..2000 {
                let n: i128 = rng.gen_range(-1_000_000..=1_000_000);
                assert_eq!(table.contains(n), has_integer_root(&f, n), "f={f} n={n}");
            }
            for t in -20..=20 {
                assert!(table.contains(f.eval_int(t).unwrap()));
            }
        }
    }
}
