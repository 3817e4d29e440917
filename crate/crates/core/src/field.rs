//! Prime fields and small extension fields, with character evaluation.
//!
//! Elements of every field are addressed by an *index* in `[0, q)`. For
//! `F_p` the index is the residue itself; for `F_{p^k} = F_p[T]/(m(T))` the
//! index is the base-`p` number whose digits are the coefficients of the
//! element, lowest degree first. Base-field elements therefore have
//! index `< p` in either representation.

use std::f64::consts::TAU;
use std::fmt;

use num_complex::Complex64;

use crate::arith::{gcd, inv_mod, is_prime, mul_mod, pow_mod, primes_up_to, reduce_i64};
use crate::error::{Result, XntError};
use crate::trace::TraceFunction;

/// Largest prime for which a full discrete-log table is built.
pub const MAX_TABLE_PRIME: u64 = 1 << 21;

/// Largest supported extension degree.
pub const MAX_EXT_DEGREE: u32 = 4;

/// Arithmetic interface shared by [`PrimeField`] and [`ExtField`].
pub trait FiniteField: Sync {
    type Elem: Copy + Eq + fmt::Debug + Send + Sync;

    fn characteristic(&self) -> u64;
    fn degree(&self) -> u32;
    /// Field size `q = p^k`.
    fn order(&self) -> u64;

    fn zero(&self) -> Self::Elem;
    fn one(&self) -> Self::Elem;
    fn add(&self, a: Self::Elem, b: Self::Elem) -> Self::Elem;
    fn sub(&self, a: Self::Elem, b: Self::Elem) -> Self::Elem;
    fn neg(&self, a: Self::Elem) -> Self::Elem;
    fn mul(&self, a: Self::Elem, b: Self::Elem) -> Self::Elem;
    /// Image of an integer under `Z -> F_p -> F_q`.
    fn embed_int(&self, v: i64) -> Self::Elem;
    fn element(&self, index: u64) -> Self::Elem;
    fn index(&self, a: Self::Elem) -> u64;
    /// Absolute trace to `F_p`, as a residue in `[0, p)`.
    fn trace(&self, a: Self::Elem) -> u64;

    fn is_zero(&self, a: Self::Elem) -> bool {
        a == self.zero()
    }

    fn pow(&self, mut base: Self::Elem, mut exp: u64) -> Self::Elem {
        let mut acc = self.one();
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            exp >>= 1;
        }
        acc
    }

    fn inv(&self, a: Self::Elem) -> Option<Self::Elem> {
        if self.is_zero(a) {
            None
        } else {
            Some(self.pow(a, self.order() - 2))
        }
    }

    /// Whether `a` lies in the prime subfield.
    fn in_base_field(&self, a: Self::Elem) -> bool {
        self.index(a) < self.characteristic()
    }

    fn elements(&self) -> Box<dyn Iterator<Item = Self::Elem> + '_> {
        Box::new((0..self.order()).map(move |i| self.element(i)))
    }
}

/// `e^{2 pi i x}`.
pub fn e(x: f64) -> Complex64 {
    Complex64::from_polar(1.0, TAU * x)
}

/// `psi(x) = e(Tr(x)/p)`.
pub fn additive_char<K: FiniteField>(field: &K, x: K::Elem) -> Complex64 {
    e(field.trace(x) as f64 / field.characteristic() as f64)
}

/// Table of `psi` indexed by element index.
pub fn additive_char_table<K: FiniteField>(field: &K) -> Vec<Complex64> {
    let p = field.characteristic();
    let roots: Vec<Complex64> = (0..p).map(|k| e(k as f64 / p as f64)).collect();
    (0..field.order())
        .map(|i| roots[field.trace(field.element(i)) as usize])
        .collect()
}

/// Smallest generator of `(Z/p)^x`.
pub fn find_primitive_root(p: u64) -> Result<u64> {
    if !is_prime(p) {
        return Err(XntError::input(format!("{p} is not prime")));
    }
    if p == 2 {
        return Ok(1);
    }
    let order = p - 1;
    let mut factors = Vec::new();
    let mut m = order;
    for l in primes_up_to((order as f64).sqrt() as u64 + 1) {
        if m % l == 0 {
            factors.push(l);
            while m % l == 0 {
                m /= l;
            }
        }
    }
    if m > 1 {
        factors.push(m);
    }
    (2..p)
        .find(|&g| factors.iter().all(|&l| pow_mod(g, order / l, p) != 1))
        .ok_or_else(|| XntError::Invariant(format!("no primitive root mod {p}")))
}

/// `F_p` with a primitive root and full discrete-log table.
#[derive(Clone, Debug)]
pub struct PrimeField {
    p: u64,
    generator: u64,
    dlog: Vec<u32>,
    exp: Vec<u32>,
}

impl PrimeField {
    pub fn new(p: u64) -> Result<Self> {
        if !is_prime(p) {
            return Err(XntError::input(format!("{p} is not prime")));
        }
        if p > MAX_TABLE_PRIME {
            return Err(XntError::Unsupported(format!(
                "p = {p} exceeds the discrete-log table cap {MAX_TABLE_PRIME}"
            )));
        }
        let generator = find_primitive_root(p)?;
        let mut dlog = vec![u32::MAX; p as usize];
        let mut exp = Vec::with_capacity((p - 1) as usize);
        let mut x = 1u64;
        for k in 0..p - 1 {
            dlog[x as usize] = k as u32;
            exp.push(x as u32);
            x = mul_mod(x, generator, p);
        }
        Ok(PrimeField {
            p,
            generator,
            dlog,
            exp,
        })
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn generator(&self) -> u64 {
        self.generator
    }

    /// `k` in `[0, p-2]` with `g^k = u`.
    pub fn dlog(&self, u: u64) -> Result<u64> {
        let u = u % self.p;
        if u == 0 {
            return Err(XntError::Domain("discrete log of 0".into()));
        }
        Ok(self.dlog[u as usize] as u64)
    }

    pub fn exp(&self, k: u64) -> u64 {
        self.exp[(k % (self.p - 1)) as usize] as u64
    }

    /// The character `x -> e(j * dlog(x) / r)` of order dividing `r`, with `chi(0) = 0`.
    pub fn mult_char(&self, r: u64, j: u64) -> Result<TraceFunction> {
        if r == 0 || (self.p - 1) % r != 0 {
            return Err(XntError::input(format!(
                "character order {r} does not divide p - 1 = {}",
                self.p - 1
            )));
        }
        let j = j % r;
        let roots: Vec<Complex64> = (0..r).map(|k| e(k as f64 / r as f64)).collect();
        let mut values = vec![Complex64::new(0.0, 0.0); self.p as usize];
        for (x, v) in values.iter_mut().enumerate().skip(1) {
            let k = self.dlog[x] as u64;
            *v = roots[((j * k) % r) as usize];
        }
        let order = r / gcd(j, r);
        TraceFunction::new(values, format!("chi[r={r},j={j},ord={order}]"), 1.0)
    }

    /// Legendre symbol as a table.
    pub fn legendre(&self) -> Result<TraceFunction> {
        if self.p == 2 {
            return Err(XntError::input("Legendre symbol needs an odd prime"));
        }
        let mut t = self.mult_char(2, 1)?;
        t.set_label("legendre");
        Ok(t)
    }

    /// Whether `x` is a `d`-th power residue unit (Euler's criterion).
    pub fn is_power_residue(&self, x: u64, d: u64) -> bool {
        let x = x % self.p;
        x != 0 && pow_mod(x, (self.p - 1) / gcd(d, self.p - 1), self.p) == 1
    }
}

impl FiniteField for PrimeField {
    type Elem = u64;

    fn characteristic(&self) -> u64 {
        self.p
    }
    fn degree(&self) -> u32 {
        1
    }
    fn order(&self) -> u64 {
        self.p
    }
    fn zero(&self) -> u64 {
        0
    }
    fn one(&self) -> u64 {
        1 % self.p
    }
    #[inline]
    fn add(&self, a: u64, b: u64) -> u64 {
        let s = a + b;
        if s >= self.p {
            s - self.p
        } else {
            s
        }
    }
    #[inline]
    fn sub(&self, a: u64, b: u64) -> u64 {
        if a >= b {
            a - b
        } else {
            a + self.p - b
        }
    }
    fn neg(&self, a: u64) -> u64 {
        if a == 0 {
            0
        } else {
            self.p - a
        }
    }
    #[inline]
    fn mul(&self, a: u64, b: u64) -> u64 {
        mul_mod(a, b, self.p)
    }
    fn embed_int(&self, v: i64) -> u64 {
        reduce_i64(v, self.p)
    }
    fn element(&self, index: u64) -> u64 {
        index
    }
    fn index(&self, a: u64) -> u64 {
        a
    }
    fn trace(&self, a: u64) -> u64 {
        a
    }
    fn inv(&self, a: u64) -> Option<u64> {
        if a == 0 {
            None
        } else {
            Some(self.exp(self.p - 1 - self.dlog[a as usize] as u64))
        }
    }
}

/// `F_{p^k} = F_p[T]/(m(T))` for `k <= 4`.
#[derive(Clone, Debug)]
pub struct ExtField {
    base: PrimeField,
    k: u32,
    q: u64,
    /// Monic modulus, lowest degree first, length `k + 1`.
    modulus: Vec<u64>,
    /// `Tr(T^i)` for `i < k`; the trace is linear in the digits.
    trace_basis: Vec<u64>,
}

impl ExtField {
    /// Builds `F_{p^k}` with the lexicographically smallest monic irreducible
    /// modulus (ordered by the coefficient vector read from the top).
    pub fn new(p: u64, k: u32) -> Result<Self> {
        if k == 0 || k > MAX_EXT_DEGREE {
            return Err(XntError::Unsupported(format!(
                "extension degree {k} outside 1..={MAX_EXT_DEGREE}"
            )));
        }
        let base = PrimeField::new(p)?;
        let q = p
            .checked_pow(k)
            .filter(|&q| q <= u32::MAX as u64)
            .ok_or_else(|| XntError::Unsupported(format!("{p}^{k} is too large")))?;
        let modulus = if k == 1 {
            vec![0, 1]
        } else {
            (0..p.pow(k))
                .map(|idx| {
                    let mut c = digits(idx, p, k as usize);
                    c.push(1);
                    c
                })
                .find(|m| is_irreducible(m, p))
                .ok_or_else(|| {
                    XntError::Invariant(format!("no irreducible of degree {k} mod {p}"))
                })?
        };
        let mut field = ExtField {
            base,
            k,
            q,
            modulus,
            trace_basis: Vec::new(),
        };
        field.trace_basis = (0..k)
            .map(|i| {
                let t_i = field.element(p.pow(i));
                field.trace_slow(t_i)
            })
            .collect();
        Ok(field)
    }

    pub fn base(&self) -> &PrimeField {
        &self.base
    }

    /// Modulus coefficients, lowest degree first.
    pub fn modulus(&self) -> &[u64] {
        &self.modulus
    }

    /// Frobenius `x -> x^p`.
    pub fn frobenius(&self, x: u64) -> u64 {
        self.pow(x, self.base.p)
    }

    fn trace_slow(&self, x: u64) -> u64 {
        let mut acc = self.zero();
        let mut y = x;
        for _ in 0..self.k {
            acc = self.add(acc, y);
            y = self.frobenius(y);
        }
        debug_assert!(acc < self.base.p);
        acc
    }

    fn decode(&self, x: u64) -> [u64; MAX_EXT_DEGREE as usize] {
        let mut out = [0u64; MAX_EXT_DEGREE as usize];
        let mut x = x;
        for slot in out.iter_mut().take(self.k as usize) {
            *slot = x % self.base.p;
            x /= self.base.p;
        }
        out
    }

    fn encode(&self, c: &[u64]) -> u64 {
        c[..self.k as usize]
            .iter()
            .rev()
            .fold(0u64, |acc, &d| acc * self.base.p + d)
    }

    /// Renders an element as a polynomial in the generator `a`.
    pub fn format(&self, x: u64) -> String {
        if self.k == 1 {
            return x.to_string();
        }
        let c = self.decode(x);
        let parts: Vec<String> = (0..self.k as usize)
            .rev()
            .filter(|&i| c[i] != 0)
            .map(|i| match (i, c[i]) {
                (0, v) => v.to_string(),
                (1, 1) => "a".to_string(),
                (1, v) => format!("{v}a"),
                (_, 1) => format!("a^{i}"),
                (_, v) => format!("{v}a^{i}"),
            })
            .collect();
        if parts.is_empty() {
            "0".into()
        } else {
            parts.join("+")
        }
    }
}

fn digits(mut idx: u64, p: u64, len: usize) -> Vec<u64> {
    let mut out = Vec::with_capacity(len + 1);
    for _ in 0..len {
        out.push(idx % p);
        idx /= p;
    }
    out
}

/// Remainder of `a` by monic-or-not `b` over `F_p` (both lowest degree first).
fn poly_rem_mod(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    let mut r: Vec<u64> = a.to_vec();
    let db = b.iter().rposition(|&c| c != 0).expect("nonzero divisor");
    let lead_inv = inv_mod(b[db], p).expect("prime modulus");
    while let Some(dr) = r.iter().rposition(|&c| c != 0) {
        if dr < db {
            break;
        }
        let factor = mul_mod(r[dr], lead_inv, p);
        let shift = dr - db;
        for (i, &bc) in b.iter().enumerate().take(db + 1) {
            let sub = mul_mod(factor, bc, p);
            r[shift + i] = (r[shift + i] + p - sub) % p;
        }
    }
    r.truncate(r.iter().rposition(|&c| c != 0).map_or(0, |d| d + 1));
    r
}

/// Exhaustive factor search: a monic degree-`k` polynomial is irreducible iff
/// no monic polynomial of degree `1..=k/2` divides it.
fn is_irreducible(m: &[u64], p: u64) -> bool {
    let k = m.len() - 1;
    for deg in 1..=k / 2 {
        for idx in 0..p.pow(deg as u32) {
            let mut f = digits(idx, p, deg);
            f.push(1);
            if poly_rem_mod(m, &f, p).is_empty() {
                return false;
            }
        }
    }
    true
}

impl FiniteField for ExtField {
    type Elem = u64;

    fn characteristic(&self) -> u64 {
        self.base.p
    }
    fn degree(&self) -> u32 {
        self.k
    }
    fn order(&self) -> u64 {
        self.q
    }
    fn zero(&self) -> u64 {
        0
    }
    fn one(&self) -> u64 {
        1
    }
    fn add(&self, a: u64, b: u64) -> u64 {
        if self.k == 1 {
            return self.base.add(a, b);
        }
        let (x, y) = (self.decode(a), self.decode(b));
        let mut s = [0u64; MAX_EXT_DEGREE as usize];
        for i in 0..self.k as usize {
            s[i] = (x[i] + y[i]) % self.base.p;
        }
        self.encode(&s)
    }
    fn sub(&self, a: u64, b: u64) -> u64 {
        self.add(a, self.neg(b))
    }
    fn neg(&self, a: u64) -> u64 {
        if self.k == 1 {
            return self.base.neg(a);
        }
        let x = self.decode(a);
        let mut s = [0u64; MAX_EXT_DEGREE as usize];
        for i in 0..self.k as usize {
            s[i] = (self.base.p - x[i]) % self.base.p;
        }
        self.encode(&s)
    }
    fn mul(&self, a: u64, b: u64) -> u64 {
        if self.k == 1 {
            return self.base.mul(a, b);
        }
        let p = self.base.p;
        let k = self.k as usize;
        let (x, y) = (self.decode(a), self.decode(b));
        let mut prod = [0u64; 2 * MAX_EXT_DEGREE as usize];
        for i in 0..k {
            if x[i] == 0 {
                continue;
            }
            for j in 0..k {
                prod[i + j] = (prod[i + j] + x[i] * y[j]) % p;
            }
        }
        // Reduce with the monic modulus: T^k = -(m_0 + ... + m_{k-1} T^{k-1}).
        for top in (k..2 * k - 1).rev() {
            let c = prod[top];
            if c == 0 {
                continue;
            }
            prod[top] = 0;
            for i in 0..k {
                let pos = top - k + i;
                prod[pos] = (prod[pos] + p - (c * self.modulus[i]) % p) % p;
            }
        }
        self.encode(&prod)
    }
    fn embed_int(&self, v: i64) -> u64 {
        reduce_i64(v, self.base.p)
    }
    fn element(&self, index: u64) -> u64 {
        index
    }
    fn index(&self, a: u64) -> u64 {
        a
    }
    fn trace(&self, a: u64) -> u64 {
        if self.k == 1 {
            return a;
        }
        let p = self.base.p;
        let x = self.decode(a);
        (0..self.k as usize).fold(0u64, |acc, i| (acc + x[i] * self.trace_basis[i]) % p)
    }
}
