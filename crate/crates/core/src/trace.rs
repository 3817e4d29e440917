//! Trace functions as explicit complex tables on `F_q`, and the transforms
//! and moment diagnostics used on them.
//!
//! Tables are indexed by element index (see [`crate::field`]). The Fourier
//! normalisation is `FT(t)(y) = -q^{-1/2} sum_x psi(xy) t(x)`; transforming
//! with `psi` and then with `conj(psi)` returns the original table.

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Result, XntError};
use crate::field::{additive_char_table, FiniteField};

/// Slack allowed between a declared sup bound and the table.
pub const SUP_SLACK: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct TraceFunction {
    values: Vec<Complex64>,
    label: String,
    sup_bound: f64,
}

impl TraceFunction {
    pub fn new(values: Vec<Complex64>, label: impl Into<String>, sup_bound: f64) -> Result<Self> {
        let label = label.into();
        if values.is_empty() {
            return Err(XntError::input("empty trace table"));
        }
        let sup = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if sup > sup_bound + SUP_SLACK {
            return Err(XntError::Invariant(format!(
                "{label}: sup norm {sup} exceeds declared bound {sup_bound}"
            )));
        }
        Ok(TraceFunction {
            values,
            label,
            sup_bound,
        })
    }

    /// Table with the sup bound set to the observed sup norm.
    pub fn from_values(values: Vec<Complex64>, label: impl Into<String>) -> Result<Self> {
        let sup = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        Self::new(values, label, sup)
    }

    pub fn constant(q: u64, c: Complex64) -> Self {
        TraceFunction {
            values: vec![c; q as usize],
            label: format!("const[{c}]"),
            sup_bound: c.norm(),
        }
    }

    pub fn one(q: u64) -> Self {
        let mut t = Self::constant(q, Complex64::new(1.0, 0.0));
        t.label = "one".into();
        t
    }

    /// Indicator of the zero element.
    pub fn delta0(q: u64) -> Self {
        let mut values = vec![Complex64::new(0.0, 0.0); q as usize];
        values[0] = Complex64::new(1.0, 0.0);
        TraceFunction {
            values,
            label: "delta0".into(),
            sup_bound: 1.0,
        }
    }

    pub fn q(&self) -> u64 {
        self.values.len() as u64
    }

    pub fn value(&self, index: u64) -> Complex64 {
        self.values[index as usize]
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn set_label(&mut self, label: impl Into<String>) {
        self.label = label.into();
    }

    pub fn sup_bound(&self) -> f64 {
        self.sup_bound
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn conj(&self) -> Self {
        TraceFunction {
            values: self.values.iter().map(|v| v.conj()).collect(),
            label: format!("conj({})", self.label),
            sup_bound: self.sup_bound,
        }
    }

    /// `(1/q) sum_x |t(x)|^2`.
    pub fn second_moment(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() / self.q() as f64
    }

    /// `(1/q) sum_x t1(x) conj(t2(x))`.
    pub fn correlation(&self, other: &TraceFunction) -> Result<Complex64> {
        if self.q() != other.q() {
            return Err(XntError::input(format!(
                "correlation of tables of sizes {} and {}",
                self.q(),
                other.q()
            )));
        }
        let s: Complex64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b.conj())
            .sum();
        Ok(s / self.q() as f64)
    }

    /// CSV rows `a, re, im`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "a,re,im")?;
        for (a, v) in self.values.iter().enumerate() {
            writeln!(out, "{a},{:.17e},{:.17e}", v.re, v.im)?;
        }
        Ok(())
    }

    fn check_field<K: FiniteField>(&self, field: &K) -> Result<()> {
        if self.q() != field.order() {
            return Err(XntError::input(format!(
                "table of size {} used over a field of size {}",
                self.q(),
                field.order()
            )));
        }
        Ok(())
    }
}

/// Normalised hyper-Kloosterman sums
/// `Kl_m(a) = (-1)^{m-1} q^{-(m-1)/2} sum_{y_1...y_m = a} psi(y_1 + ... + y_m)`,
/// built by `m - 1` multiplicative convolutions of the unit-restricted `psi`.
pub fn kloosterman<K: FiniteField>(m: u32, field: &K) -> Result<TraceFunction> {
    if m == 0 {
        return Err(XntError::input("Kloosterman order must be >= 1"));
    }
    let q = field.order() as usize;
    let psi = additive_char_table(field);
    let units: Vec<K::Elem> = (1..q as u64).map(|i| field.element(i)).collect();
    let mut current = psi.clone();
    current[0] = Complex64::new(0.0, 0.0);
    for _ in 1..m {
        // next(b * y) += current(b) * psi(y), over units b, y.
        let next: Vec<Complex64> = {
            let mut acc = vec![Complex64::new(0.0, 0.0); q];
            for &b in &units {
                let cb = current[field.index(b) as usize];
                if cb == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for &y in &units {
                    let idx = field.index(field.mul(b, y)) as usize;
                    acc[idx] += cb * psi[field.index(y) as usize];
                }
            }
            acc
        };
        current = next;
    }
    let sign = if m % 2 == 1 { 1.0 } else { -1.0 };
    let scale = sign / (q as f64).powf((m as f64 - 1.0) / 2.0);
    let values = current.into_iter().map(|v| v * scale).collect();
    TraceFunction::new(values, format!("Kl_{m}"), m as f64)
}

fn transform_with<K, G>(
    t: &TraceFunction,
    field: &K,
    conjugate: bool,
    argument: G,
    label: String,
) -> Result<TraceFunction>
where
    K: FiniteField,
    G: Fn(K::Elem) -> K::Elem + Sync,
{
    t.check_field(field)?;
    let q = field.order();
    let psi = additive_char_table(field);
    let args: Vec<K::Elem> = (0..q).map(|i| argument(field.element(i))).collect();
    let scale = -1.0 / (q as f64).sqrt();
    let values: Vec<Complex64> = (0..q)
        .into_par_iter()
        .map(|yi| {
            let y = field.element(yi);
            let mut s = Complex64::new(0.0, 0.0);
            for (zi, &z) in args.iter().enumerate() {
                let tz = t.values[zi];
                if tz == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let ph = psi[field.index(field.mul(z, y)) as usize];
                s += tz * if conjugate { ph.conj() } else { ph };
            }
            s * scale
        })
        .collect();
    let l1: f64 = t.values.iter().map(|v| v.norm()).sum();
    TraceFunction::new(values, label, l1 / (q as f64).sqrt())
}

/// `FT(t)(y) = -q^{-1/2} sum_x psi(xy) t(x)`.
pub fn fourier_transform<K: FiniteField>(t: &TraceFunction, field: &K) -> Result<TraceFunction> {
    transform_with(t, field, false, |x| x, format!("FT({})", t.label))
}

/// Same as [`fourier_transform`] with `conj(psi)`; inverts it exactly.
pub fn fourier_transform_conj<K: FiniteField>(
    t: &TraceFunction,
    field: &K,
) -> Result<TraceFunction> {
    transform_with(t, field, true, |x| x, format!("FTbar({})", t.label))
}

/// `T_e(t)(y) = -q^{-1/2} sum_z psi(z^e y) t(z)`.
pub fn te_transform<K: FiniteField>(t: &TraceFunction, e: u64, field: &K) -> Result<TraceFunction> {
    if e == 0 {
        return Err(XntError::input("T_e needs e >= 1"));
    }
    transform_with(
        t,
        field,
        false,
        |z| field.pow(z, e),
        format!("T_{e}({})", t.label),
    )
}

/// `y -> t(y^d)`.
pub fn pullback_power<K: FiniteField>(
    t: &TraceFunction,
    d: u64,
    field: &K,
) -> Result<TraceFunction> {
    t.check_field(field)?;
    let values = (0..field.order())
        .map(|i| t.values[field.index(field.pow(field.element(i), d)) as usize])
        .collect();
    TraceFunction::new(values, format!("[x^{d}]*{}", t.label), t.sup_bound)
}

/// `y -> t(alpha y)`, `alpha != 0`.
pub fn pullback_scale<K: FiniteField>(
    t: &TraceFunction,
    alpha: K::Elem,
    field: &K,
) -> Result<TraceFunction> {
    t.check_field(field)?;
    if field.is_zero(alpha) {
        return Err(XntError::Domain("scaling pullback by 0".into()));
    }
    let values = (0..field.order())
        .map(|i| t.values[field.index(field.mul(alpha, field.element(i))) as usize])
        .collect();
    TraceFunction::new(
        values,
        format!("[x{}]*{}", field.index(alpha), t.label),
        t.sup_bound,
    )
}

/// Named trace functions over a prime field, as accepted on the command line:
/// `one`, `legendre`, `kl:M`, `char:R:J`, `psi`.
pub fn named_trace(spec: &str, field: &crate::field::PrimeField) -> Result<TraceFunction> {
    let parts: Vec<&str> = spec.split(':').collect();
    let num = |s: &str| -> Result<u64> {
        s.parse::<u64>()
            .map_err(|_| XntError::input(format!("bad number '{s}' in trace spec '{spec}'")))
    };
    match parts.as_slice() {
        ["one"] => Ok(TraceFunction::one(field.p())),
        ["legendre"] => field.legendre(),
        ["psi"] => TraceFunction::new(additive_char_table(field), "psi", 1.0),
        ["kl", m] => kloosterman(num(m)? as u32, field),
        ["char", r, j] => field.mult_char(num(r)?, num(j)?),
        _ => Err(XntError::input(format!(
            "unknown trace function '{spec}' (expected one|legendre|psi|kl:M|char:R:J)"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::primes_up_to;
    use crate::field::{e, ExtField, PrimeField};

    const EPS: f64 = 1e-9;

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    /// Independent enumeration of Kl_m over all m-tuples of units.
    fn kloosterman_bruteforce(m: u32, p: u64, a: u64) -> Complex64 {
        let mut s = Complex64::new(0.0, 0.0);
        let total = (p - 1).pow(m);
        for code in 0..total {
            let mut c = code;
            let (mut prod, mut sum) = (1u64, 0u64);
            for _ in 0..m {
                let y = c % (p - 1) + 1;
                c /= p - 1;
                prod = prod * y % p;
                sum = (sum + y) % p;
            }
            if prod == a % p {
                s += e(sum as f64 / p as f64);
            }
        }
        let sign = if m % 2 == 1 { 1.0 } else { -1.0 };
        s * sign / (p as f64).powf((m as f64 - 1.0) / 2.0)
    }

    #[test]
    fn kloosterman_matches_bruteforce() {
        for (m, p) in [(1u32, 7u64), (2, 3), (2, 11), (3, 7), (4, 5)] {
            let f = PrimeField::new(p).unwrap();
            let kl = kloosterman(m, &f).unwrap();
            for a in 0..p {
                assert!(
                    close(kl.value(a), kloosterman_bruteforce(m, p, a), 1e-10),
                    "m={m} p={p} a={a}"
                );
            }
        }
    }

    #[test]
    fn kloosterman_examples() {
        let f3 = PrimeField::new(3).unwrap();
        let kl2 = kloosterman(2, &f3).unwrap();
        assert!(close(
            kl2.value(1),
            Complex64::new(1.0 / 3f64.sqrt(), 0.0),
            1e-12
        ));
        let f7 = PrimeField::new(7).unwrap();
        let kl1 = kloosterman(1, &f7).unwrap();
        for a in 1..7 {
            assert!(close(kl1.value(a), e(a as f64 / 7.0), 1e-12));
        }
        for m in 1..=4 {
            assert_eq!(
                kloosterman(m, &f7).unwrap().value(0),
                Complex64::new(0.0, 0.0)
            );
        }
        assert!(kloosterman(0, &f7).is_err());
    }

    #[test]
    fn kloosterman_real_and_summing() {
        for p in primes_up_to(60).into_iter().skip(1) {
            let f = PrimeField::new(p).unwrap();
            let kl2 = kloosterman(2, &f).unwrap();
            assert!(kl2.values().iter().all(|v| v.im.abs() < EPS));
            let s: Complex64 = kl2.values().iter().sum();
            assert!(close(s, Complex64::new(-1.0 / (p as f64).sqrt(), 0.0), EPS));
        }
    }

    #[test]
    fn kloosterman_over_extension() {
        // Over F_9 the same definition with psi = e(Tr/3); still bounded by 2 q^{1/2}.
        let f = ExtField::new(3, 2).unwrap();
        let kl2 = kloosterman(2, &f).unwrap();
        assert!(kl2.sup_norm() <= 2.0 + EPS);
        let s: Complex64 = kl2.values().iter().sum();
        assert!(close(s, Complex64::new(-1.0 / 3.0, 0.0), EPS));
    }

    #[test]
    fn fourier_examples() {
        let f5 = PrimeField::new(5).unwrap();
        let ft1 = fourier_transform(&TraceFunction::one(5), &f5).unwrap();
        assert!(close(ft1.value(0), Complex64::new(-5f64.sqrt(), 0.0), EPS));
        assert!((1..5).all(|y| ft1.value(y).norm() < EPS));
        let ftd = fourier_transform(&TraceFunction::delta0(5), &f5).unwrap();
        assert!((0..5).all(|y| close(ftd.value(y), Complex64::new(-1.0 / 5f64.sqrt(), 0.0), EPS)));
        let ftl = fourier_transform(&f5.legendre().unwrap(), &f5).unwrap();
        assert!((1..5).all(|y| (ftl.value(y).norm() - 1.0).abs() < EPS));
    }

    #[test]
    fn fourier_round_trip_and_parseval() {
        let f = ExtField::new(3, 2).unwrap();
        let t = kloosterman(3, &f).unwrap();
        let back = fourier_transform_conj(&fourier_transform(&t, &f).unwrap(), &f).unwrap();
        for i in 0..9 {
            assert!(close(back.value(i), t.value(i), EPS));
        }
        let f13 = PrimeField::new(13).unwrap();
        let t = f13.mult_char(4, 1).unwrap();
        let ft = fourier_transform(&t, &f13).unwrap();
        assert!((ft.second_moment() - t.second_moment()).abs() < EPS);
    }

    #[test]
    fn te_transform_properties() {
        let f5 = PrimeField::new(5).unwrap();
        let t = kloosterman(2, &f5).unwrap();
        assert_eq!(
            te_transform(&t, 1, &f5).unwrap().values(),
            fourier_transform(&t, &f5).unwrap().values()
        );
        let g = te_transform(&TraceFunction::one(5), 2, &f5).unwrap();
        assert!((1..5).all(|y| (g.value(y).norm() - 1.0).abs() < EPS));
        let at0 = -t.values().iter().sum::<Complex64>() / 5f64.sqrt();
        for e_ in 1..6 {
            assert!(close(te_transform(&t, e_, &f5).unwrap().value(0), at0, EPS));
        }
    }

    #[test]
    fn scaling_commutes_with_te() {
        // T_e([x alpha]^* t)(x) = T_e(t)(alpha^{-e} x)
        let f = PrimeField::new(11).unwrap();
        let t = kloosterman(2, &f).unwrap();
        for e_ in 1..4u64 {
            let base = te_transform(&t, e_, &f).unwrap();
            for alpha in 1..11u64 {
                let lhs = te_transform(&pullback_scale(&t, alpha, &f).unwrap(), e_, &f).unwrap();
                let ainv_e = f.pow(f.inv(alpha).unwrap(), e_);
                for x in 0..11 {
                    assert!(close(lhs.value(x), base.value(f.mul(ainv_e, x)), EPS));
                }
            }
        }
        assert!(pullback_scale(&t, 0, &f).is_err());
    }

    #[test]
    fn pullback_examples() {
        let f5 = PrimeField::new(5).unwrap();
        let leg = f5.legendre().unwrap();
        assert_eq!(pullback_scale(&leg, 1, &f5).unwrap().values(), leg.values());
        let sq = pullback_power(&leg, 2, &f5).unwrap();
        assert_eq!(sq.value(0), Complex64::new(0.0, 0.0));
        assert!((1..5).all(|y| close(sq.value(y), Complex64::new(1.0, 0.0), EPS)));
    }

    #[test]
    fn moments_and_correlations() {
        assert!((TraceFunction::one(7).second_moment() - 1.0).abs() < EPS);
        let f13 = PrimeField::new(13).unwrap();
        let chi = f13.mult_char(3, 1).unwrap();
        let chi2 = f13.mult_char(3, 2).unwrap();
        assert!((chi.second_moment() - 12.0 / 13.0).abs() < EPS);
        assert!(close(
            chi.correlation(&chi).unwrap(),
            Complex64::new(12.0 / 13.0, 0.0),
            EPS
        ));
        assert!(chi.correlation(&chi2).unwrap().norm() < EPS);
        let kl = kloosterman(2, &f13).unwrap();
        assert!((kl.second_moment() - 1.0).abs() <= 3.0 / 13f64.sqrt());
        let f11 = PrimeField::new(11).unwrap();
        let kl = kloosterman(2, &f11).unwrap();
        let c = kl.correlation(&TraceFunction::one(11)).unwrap();
        assert!(close(c, Complex64::new(-(11f64).powf(-1.5), 0.0), EPS));
        assert!(c.norm() <= 2.0 / 11f64.sqrt());
        assert!(kl.correlation(&TraceFunction::one(13)).is_err());
    }

    #[test]
    fn declared_bound_is_enforced() {
        let v = vec![Complex64::new(2.0, 0.0); 3];
        assert!(TraceFunction::new(v.clone(), "x", 1.0).is_err());
        assert!(TraceFunction::new(v, "x", 2.0).is_ok());
    }

    #[test]
    fn csv_dump() {
        let mut buf = Vec::new();
        TraceFunction::one(3).write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.starts_with("a,re,im\n0,"));
    }

    #[test]
    fn named_traces() {
        let f = PrimeField::new(7).unwrap();
        assert_eq!(named_trace("kl:2", &f).unwrap().label(), "Kl_2");
        assert_eq!(named_trace("legendre", &f).unwrap().label(), "legendre");
        assert!(named_trace("char:3:1", &f).is_ok());
        assert!(named_trace("char:4:1", &f).is_err());
        assert!(named_trace("bogus", &f).is_err());
    }
}
