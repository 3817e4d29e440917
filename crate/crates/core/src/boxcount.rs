//! Counting `x` in `[-B, B]^{n+1}` with `f(t) = F(x)` solvable in integers,
//! together with the prime window, exceptional set, complete sums and
//! Poisson-summation checks used to bound that count.

use std::collections::BTreeMap;
use std::str::FromStr;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arith::{distinct_prime_factors, inv_mod, is_prime, primes_between, reduce_i64};
use crate::error::{check_budget, Result, XntError};
use crate::field::{e, PrimeField};
use crate::poly::{discriminant_uni, IntegerImage, MultiPoly, UniPoly};
use crate::sieve::{
    build_prime_data, detector, membership_filter, PrimeSummary, SieveConfig, SievePrimeData,
    ThresholdRule,
};
use crate::trace::TraceFunction;
use crate::variety::{classify_u, diagonal_dual_oracle, good_reduction, UClass, UKind};
use crate::weight::SmoothWeight;

#[derive(Clone, Debug)]
pub struct BoxProblem {
    f: UniPoly,
    form: MultiPoly,
    b: u64,
}

impl BoxProblem {
    pub fn new(f: UniPoly, form: MultiPoly, b: u64) -> Result<Self> {
        if f.degree().unwrap_or(0) < 2 {
            return Err(XntError::input("f must have degree >= 2"));
        }
        if form.total_degree() < 2 || !form.is_homogeneous() {
            return Err(XntError::input("F must be homogeneous of degree >= 2"));
        }
        if b > i64::MAX as u64 / 2 {
            return Err(XntError::input("box radius too large"));
        }
        Ok(BoxProblem { f, form, b })
    }

    pub fn f(&self) -> &UniPoly {
        &self.f
    }

    pub fn form(&self) -> &MultiPoly {
        &self.form
    }

    pub fn b(&self) -> u64 {
        self.b
    }

    /// Number of box variables, `n + 1`.
    pub fn num_vars(&self) -> usize {
        self.form.n_vars()
    }

    pub fn n(&self) -> usize {
        self.num_vars() - 1
    }

    pub fn d(&self) -> usize {
        self.f.degree().unwrap_or(0)
    }

    pub fn e(&self) -> u32 {
        self.form.total_degree()
    }

    pub fn num_points(&self) -> u128 {
        (2 * self.b as u128 + 1).saturating_pow(self.num_vars() as u32)
    }

    /// `sum |c| B^e`, an upper bound for `|F|` on the box.
    pub fn value_bound(&self) -> Result<i128> {
        let be = (self.b as i128)
            .checked_pow(self.e())
            .ok_or(XntError::Overflow("B^e"))?;
        self.form.terms().try_fold(0i128, |acc, (_, c)| {
            (c as i128)
                .abs()
                .checked_mul(be)
                .and_then(|v| acc.checked_add(v))
                .ok_or(XntError::Overflow("box bound"))
        })
    }

    pub fn image(&self) -> Result<IntegerImage> {
        IntegerImage::new(&self.f, self.value_bound()?)
    }

    pub fn summary(&self) -> ProblemSummary {
        ProblemSummary {
            f: self.f.to_string(),
            form: self.form.to_string(),
            b: self.b,
            num_vars: self.num_vars(),
            d: self.d(),
            e: self.e(),
            height_f: self.f.height(),
            height_form: self.form.height(),
        }
    }

    /// Folds `visit(F(x))` over the box, split by the first coordinate.
    fn box_fold<T, V>(&self, budget: u128, visit: V) -> Result<Vec<T>>
    where
        T: Send + Default,
        V: Fn(&mut T, i128) + Sync,
    {
        check_budget(self.num_points(), budget)?;
        self.value_bound()?;
        let b = self.b as i64;
        let n = self.num_vars();
        (-b..=b)
            .into_par_iter()
            .map(|x0| {
                let mut acc = T::default();
                let mut x = vec![-b; n];
                x[0] = x0;
                loop {
                    visit(&mut acc, self.form.eval_int(&x)?);
                    let mut i = n;
                    loop {
                        i -= 1;
                        if i == 0 {
                            return Ok(acc);
                        }
                        if x[i] < b {
                            x[i] += 1;
                            break;
                        }
                        x[i] = -b;
                    }
                }
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemSummary {
    pub f: String,
    pub form: String,
    pub b: u64,
    pub num_vars: usize,
    pub d: usize,
    pub e: u32,
    pub height_f: u64,
    pub height_form: u64,
}

/// `N(f, F, B)` by enumerating the box.
pub fn brute_count(problem: &BoxProblem, budget: u128) -> Result<u64> {
    let image = problem.image()?;
    let parts = problem.box_fold(budget, |acc: &mut u64, v| {
        if image.contains(v) {
            *acc += 1;
        }
    })?;
    Ok(parts.iter().sum())
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SieveCount {
    pub count: u64,
    pub rejected_by_sieve: u64,
    pub verified_exactly: u64,
    pub total_points: u64,
    pub rejection_ratio: f64,
}

/// Count with the sieve as a prefilter; survivors are checked exactly.
pub fn sieve_filtered_count(
    problem: &BoxProblem,
    data: &[SievePrimeData],
    budget: u128,
) -> Result<SieveCount> {
    let image = problem.image()?;
    let parts = problem.box_fold(budget, |acc: &mut SieveCount, v| {
        acc.total_points += 1;
        if !membership_filter(data, v) {
            acc.rejected_by_sieve += 1;
        } else {
            acc.verified_exactly += 1;
            if image.contains(v) {
                acc.count += 1;
            }
        }
    })?;
    let mut out = SieveCount::default();
    for p in &parts {
        out.count += p.count;
        out.rejected_by_sieve += p.rejected_by_sieve;
        out.verified_exactly += p.verified_exactly;
        out.total_points += p.total_points;
    }
    out.rejection_ratio = out.rejected_by_sieve as f64 / out.total_points.max(1) as f64;
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExcludedPrime {
    pub p: u64,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrimeWindow {
    /// `B^{(n+1)/(n+2)} (log B)^{1/(n+2)}`.
    pub q: f64,
    pub primes: Vec<u64>,
    pub excluded: Vec<ExcludedPrime>,
    /// Some good-reduction verdict came from a finite scan.
    pub semi_decided: bool,
    pub k_max: u32,
}

/// Primes in `[Q, 2Q]` with `f(F_p) != F_p` and good reduction for `V(F)`.
pub fn select_primes(problem: &BoxProblem, k_max: u32, budget: u128) -> Result<PrimeWindow> {
    if problem.b < 3 {
        return Err(XntError::input("the prime window needs B >= 3"));
    }
    let b = problem.b as f64;
    let m = problem.num_vars() as f64;
    let q = b.powf(m / (m + 1.0)) * b.ln().powf(1.0 / (m + 1.0));
    let (lo, hi) = (q.ceil() as u64, (2.0 * q).floor() as u64);
    let mut primes = Vec::new();
    let mut excluded = Vec::new();
    let mut semi_decided = false;
    for p in primes_between(lo, hi) {
        if p <= problem.d() as u64 {
            excluded.push(ExcludedPrime {
                p,
                reason: "p <= deg f".into(),
            });
            continue;
        }
        if !build_prime_data(&problem.f, p)?.in_ph() {
            excluded.push(ExcludedPrime {
                p,
                reason: "f surjective on F_p".into(),
            });
            continue;
        }
        let (good, semi) = good_reduction(&problem.form, p, k_max, budget)?;
        semi_decided |= semi;
        if !good {
            excluded.push(ExcludedPrime {
                p,
                reason: "bad reduction".into(),
            });
            continue;
        }
        primes.push(p);
    }
    if primes.is_empty() {
        return Err(XntError::input(format!(
            "no admissible prime in the window [{q:.2}, {:.2}]; increase B or pass an explicit prime list",
            2.0 * q
        )));
    }
    Ok(PrimeWindow {
        q,
        primes,
        excluded,
        semi_decided,
        k_max,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExceptionalSet {
    pub threshold: f64,
    /// Scanned range `[-M, M]`.
    pub range: i128,
    pub members: Vec<i128>,
}

/// `k` in `[-M, M]` with `#{p : k mod p in S_{f,p}} >= threshold`.
pub fn exceptional_set(
    problem: &BoxProblem,
    data: &[SievePrimeData],
    rule: ThresholdRule,
) -> Result<ExceptionalSet> {
    if data.is_empty() {
        return Err(XntError::input("exceptional set needs at least one prime"));
    }
    let threshold = rule.value(data.len(), problem.d());
    let range = problem.value_bound()?;
    let flags: Vec<Vec<bool>> = data
        .iter()
        .map(|dp| {
            let mut v = vec![false; dp.p as usize];
            for &s in &dp.exceptional {
                v[s as usize] = true;
            }
            v
        })
        .collect();
    let members = (-range..=range)
        .into_par_iter()
        .filter(|&k| {
            let c = data
                .iter()
                .zip(&flags)
                .filter(|(dp, fl)| fl[crate::arith::reduce_i128(k, dp.p) as usize])
                .count();
            c as f64 >= threshold
        })
        .collect();
    Ok(ExceptionalSet {
        threshold,
        range,
        members,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscProfile {
    pub k: i128,
    pub disc: i128,
    pub omega: usize,
    /// `disc = 0`: `k` is a critical value of `f`.
    pub critical: bool,
}

pub fn discriminant_profile(f: &UniPoly, k: i128) -> Result<DiscProfile> {
    let k64 = i64::try_from(k).map_err(|_| XntError::Overflow("shift k"))?;
    let disc = discriminant_uni(&f.sub_const(k64)?)?;
    Ok(DiscProfile {
        k,
        disc,
        omega: distinct_prime_factors(disc.unsigned_abs()).len(),
        critical: disc == 0,
    })
}

/// Values of `F mod p` on `F_p^{n+1}`, indexed lexicographically with the
/// last coordinate fastest.
#[derive(Clone, Debug)]
pub struct FormTable {
    p: u64,
    n_vars: usize,
    values: Vec<u32>,
}

impl FormTable {
    pub fn new(form: &MultiPoly, p: u64, budget: u128) -> Result<Self> {
        if !is_prime(p) {
            return Err(XntError::input(format!("{p} is not prime")));
        }
        let n = form.n_vars();
        let size = (p as u128)
            .checked_pow(n as u32)
            .ok_or(XntError::Overflow("table size"))?;
        check_budget(size, budget)?;
        let ev = form.compile_mod(p);
        let powers = ev.power_table();
        let inner = size as usize / p as usize;
        let values: Vec<u32> = (0..p)
            .into_par_iter()
            .flat_map_iter(|x0| {
                let mut x = vec![0u64; n];
                x[0] = x0;
                let mut out = Vec::with_capacity(inner);
                for _ in 0..inner {
                    out.push(ev.eval(&x, &powers) as u32);
                    for i in (1..n).rev() {
                        x[i] += 1;
                        if x[i] < p {
                            break;
                        }
                        x[i] = 0;
                    }
                }
                out
            })
            .collect();
        Ok(FormTable {
            p,
            n_vars: n,
            values,
        })
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn values(&self) -> &[u32] {
        &self.values
    }

    /// `N(a, F)` for all `a`.
    pub fn fiber_counts(&self) -> Vec<u64> {
        let mut c = vec![0u64; self.p as usize];
        for &v in &self.values {
            c[v as usize] += 1;
        }
        c
    }

    /// `g(u, t) = sum_a t(F(a)) e(<a, u>/p)`, with `u` given as residues.
    pub fn g(&self, t: &[Complex64], u: &[u64]) -> Complex64 {
        let p = self.p as usize;
        if u.iter().all(|&c| c == 0) {
            return self
                .fiber_counts()
                .iter()
                .zip(t)
                .map(|(&n, &tv)| tv * n as f64)
                .sum();
        }
        let psi: Vec<Complex64> = (0..p).map(|k| e(k as f64 / p as f64)).collect();
        let u: Vec<usize> = u.iter().map(|&c| c as usize).collect();
        let n = self.n_vars;
        let inner = self.values.len() / p;
        let partial: Vec<Complex64> = (0..p)
            .into_par_iter()
            .map(|x0| {
                let slice = &self.values[x0 * inner..(x0 + 1) * inner];
                let mut phase = u[0] * x0 % p;
                let mut digits = vec![0usize; n];
                let mut acc = Complex64::new(0.0, 0.0);
                for &v in slice {
                    acc += t[v as usize] * psi[phase];
                    // Each changed digit moves by +1 mod p, so the phase moves by u_i.
                    for i in (1..n).rev() {
                        phase = (phase + u[i]) % p;
                        digits[i] += 1;
                        if digits[i] < p {
                            break;
                        }
                        digits[i] = 0;
                    }
                }
                acc
            })
            .collect();
        partial.iter().sum()
    }
}

fn check_trace(t: &TraceFunction, p: u64) -> Result<()> {
    if t.q() != p {
        return Err(XntError::input(format!(
            "trace function lives on F_{} but p = {p}",
            t.q()
        )));
    }
    Ok(())
}

/// `g(u, t) = sum_{a in F_p^{n+1}} t(F(a)) e(<a, u>/p)`; grouped by fibers when `u = 0`.
pub fn complete_sum_g(
    form: &MultiPoly,
    t: &TraceFunction,
    u: &[i64],
    p: u64,
    budget: u128,
) -> Result<Complex64> {
    check_trace(t, p)?;
    if u.len() != form.n_vars() {
        return Err(XntError::input(format!(
            "u has length {} but F has {} variables",
            u.len(),
            form.n_vars()
        )));
    }
    let ur: Vec<u64> = u.iter().map(|&c| reduce_i64(c, p)).collect();
    if ur.iter().all(|&c| c == 0) {
        let field = PrimeField::new(p)?;
        let counts = crate::variety::fiber_counts(form, &field, budget)?;
        return Ok(counts
            .iter()
            .zip(t.values())
            .map(|(&n, &tv)| tv * n as f64)
            .sum());
    }
    Ok(FormTable::new(form, p, budget)?.g(t.values(), &ur))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrtRecord {
    pub lhs: Complex64,
    pub rhs: Complex64,
    pub abs_error: f64,
    pub rel_error: f64,
}

/// Compares the sum over `(Z/pq)^{n+1}` with `g(q' u, t_p) g(p' u, conj t_q)`,
/// `q' = q^{-1} mod p`, `p' = p^{-1} mod q`.
pub fn crt_factor_check(
    form: &MultiPoly,
    u: &[i64],
    p: u64,
    q: u64,
    t_p: &TraceFunction,
    t_q: &TraceFunction,
    budget: u128,
) -> Result<CrtRecord> {
    if p == q {
        return Err(XntError::input("crt_factor_check needs distinct primes"));
    }
    check_trace(t_p, p)?;
    check_trace(t_q, q)?;
    let n = form.n_vars();
    if u.len() != n {
        return Err(XntError::input(format!(
            "u has length {} but F has {n} variables",
            u.len()
        )));
    }
    let m = p * q;
    check_budget((m as u128).pow(n as u32), budget)?;
    let tab_p = FormTable::new(form, p, budget)?;
    let tab_q = FormTable::new(form, q, budget)?;
    let um: Vec<u64> = u.iter().map(|&c| reduce_i64(c, m)).collect();
    let psi: Vec<Complex64> = (0..m).map(|k| e(k as f64 / m as f64)).collect();
    let tq_conj: Vec<Complex64> = t_q.values().iter().map(|v| v.conj()).collect();
    let stride = |base: u64| -> Vec<usize> {
        let mut s = vec![1usize; n];
        for i in (0..n.saturating_sub(1)).rev() {
            s[i] = s[i + 1] * base as usize;
        }
        s
    };
    let (sp, sq) = (stride(p), stride(q));
    let inner = (m as usize).pow(n as u32 - 1);
    let partial: Vec<Complex64> = (0..m)
        .into_par_iter()
        .map(|a0| {
            let mut a = vec![0u64; n];
            a[0] = a0;
            let mut acc = Complex64::new(0.0, 0.0);
            for _ in 0..inner {
                let (mut ip, mut iq, mut ph) = (0usize, 0usize, 0u64);
                for i in 0..n {
                    ip += (a[i] % p) as usize * sp[i];
                    iq += (a[i] % q) as usize * sq[i];
                    ph = (ph + a[i] * um[i]) % m;
                }
                acc += t_p.values()[tab_p.values[ip] as usize]
                    * tq_conj[tab_q.values[iq] as usize]
                    * psi[ph as usize];
                for i in (1..n).rev() {
                    a[i] += 1;
                    if a[i] < m {
                        break;
                    }
                    a[i] = 0;
                }
            }
            acc
        })
        .collect();
    let lhs: Complex64 = partial.iter().sum();
    let qb = inv_mod(q % p, p).expect("distinct primes");
    let pb = inv_mod(p % q, q).expect("distinct primes");
    let up: Vec<u64> = u.iter().map(|&c| reduce_i64(c, p) * qb % p).collect();
    let uq: Vec<u64> = u.iter().map(|&c| reduce_i64(c, q) * pb % q).collect();
    let rhs = tab_p.g(t_p.values(), &up) * tab_q.g(&tq_conj, &uq);
    let abs_error = (lhs - rhs).norm();
    let rel_error = abs_error / lhs.norm().max(rhs.norm()).max(1.0);
    Ok(CrtRecord {
        lhs,
        rhs,
        abs_error,
        rel_error,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoissonRecord {
    pub b: f64,
    pub p: u64,
    pub q: u64,
    pub num_vars: usize,
    pub u_cutoff: u64,
    pub weight_sum: f64,
    pub direct: Complex64,
    pub poisson: Complex64,
    pub error: f64,
    pub tail_bound: f64,
}

/// Relative size of the analytic tail used when choosing the cutoff.
pub const AUTO_TAIL_FRACTION: f64 = 1e-4;
const FAR_TAIL_FRACTION: f64 = 1e-9;
const MAX_CUTOFF: u64 = 20_000;

/// Checks `sum_x W(x) c(x) = (pq)^{-(n+1)} sum_u g(u) W^(u/pq)` with
/// `c(x) = t_p(F(x)) conj(t_q(F(x)))`, truncated to `|u_i| <= u_cutoff`
/// (chosen automatically when `None`).
#[allow(clippy::too_many_arguments)]
pub fn poisson_compare(
    form: &MultiPoly,
    w: &SmoothWeight,
    p: u64,
    q: u64,
    t_p: &TraceFunction,
    t_q: &TraceFunction,
    u_cutoff: Option<u64>,
    budget: u128,
) -> Result<PoissonRecord> {
    if p == q {
        return Err(XntError::input("poisson_compare needs distinct primes"));
    }
    check_trace(t_p, p)?;
    check_trace(t_q, q)?;
    let n = form.n_vars();
    let m = p * q;
    let tab_p = FormTable::new(form, p, budget)?;
    let tab_q = FormTable::new(form, q, budget)?;
    let tq_conj: Vec<Complex64> = t_q.values().iter().map(|v| v.conj()).collect();
    let b = w.b();

    // Direct side.
    let r = b.ceil() as i64;
    let w1: Vec<f64> = (-r..=r)
        .map(|x| crate::weight::bump(x as f64 / b))
        .collect();
    let side = (2 * r + 1) as u128;
    check_budget(
        side.pow(n as u32) + 2 * (p as u128).pow(2 * n as u32),
        budget,
    )?;
    let stride = |base: u64| -> Vec<usize> {
        let mut s = vec![1usize; n];
        for i in (0..n.saturating_sub(1)).rev() {
            s[i] = s[i + 1] * base as usize;
        }
        s
    };
    let (sp, sq) = (stride(p), stride(q));
    let mut idx = vec![0usize; n];
    let (mut direct, mut weight_sum) = (Complex64::new(0.0, 0.0), 0.0);
    'outer: loop {
        let wx: f64 = idx.iter().map(|&i| w1[i]).product();
        if wx > 0.0 {
            let (mut ip, mut iq) = (0usize, 0usize);
            for k in 0..n {
                let x = idx[k] as i64 - r;
                ip += reduce_i64(x, p) as usize * sp[k];
                iq += reduce_i64(x, q) as usize * sq[k];
            }
            direct +=
                t_p.values()[tab_p.values[ip] as usize] * tq_conj[tab_q.values[iq] as usize] * wx;
            weight_sum += wx;
        }
        let mut k = n;
        loop {
            if k == 0 {
                break 'outer;
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < w1.len() {
                break;
            }
            idx[k] = 0;
        }
    }

    // g(u) for u mod pq via the CRT split of the local sums.
    let all = |base: u64| -> Vec<Vec<u64>> {
        let size = (base as usize).pow(n as u32);
        (0..size)
            .map(|mut c| {
                let mut v = vec![0u64; n];
                for i in (0..n).rev() {
                    v[i] = (c % base as usize) as u64;
                    c /= base as usize;
                }
                v
            })
            .collect()
    };
    let gp: Vec<Complex64> = all(p)
        .par_iter()
        .map(|u| tab_p.g(t_p.values(), u))
        .collect();
    let gq: Vec<Complex64> = all(q).par_iter().map(|u| tab_q.g(&tq_conj, u)).collect();
    let qb = inv_mod(q % p, p).expect("distinct primes");
    let pb = inv_mod(p % q, q).expect("distinct primes");
    let g_of = |u: &[i64]| -> Complex64 {
        let (mut ip, mut iq) = (0usize, 0usize);
        for k in 0..n {
            ip += (reduce_i64(u[k], p) * qb % p) as usize * sp[k];
            iq += (reduce_i64(u[k], q) * pb % q) as usize * sq[k];
        }
        gp[ip] * gq[iq]
    };

    // One-dimensional factors A(u) = B w^(B u / pq) and the far tail.
    let sup = t_p.sup_norm() * t_q.sup_norm();
    let scale = b / m as f64;
    let kappa = w.kappa() as i32;
    let env_tail = |u1: u64| {
        2.0 * b
            * w.m_kappa()
            * (1.0 / (2.0 * std::f64::consts::PI * scale)).powi(kappa)
            * (u1 as f64).powi(1 - kappa)
            / (kappa - 1) as f64
    };
    let mut u_far = 8u64;
    while env_tail(u_far) * sup > FAR_TAIL_FRACTION * weight_sum.max(1e-300) {
        u_far *= 2;
        if u_far > MAX_CUTOFF {
            return Err(XntError::Unsupported(
                "Fourier tail of the weight decays too slowly".into(),
            ));
        }
    }
    let a_vals: Vec<f64> = (0..=u_far)
        .into_par_iter()
        .map(|u| w.bump_hat(scale * u as f64).map(|v| b * v))
        .collect::<Result<_>>()?;
    let allowance = b * w.tol();
    // Upper bounds on |A(u)|: the computed value plus quadrature allowance,
    // or the decay envelope when that is smaller.
    let a_upper: Vec<f64> = a_vals
        .iter()
        .enumerate()
        .map(|(u, v)| (v.abs() + allowance).min(b * w.hat_envelope(scale * u as f64)))
        .collect();
    let prefix = |vals: &[f64], upto: u64| -> f64 {
        vals[0] + 2.0 * vals[1..=upto as usize].iter().sum::<f64>()
    };
    let a_lower: Vec<f64> = a_vals
        .iter()
        .map(|v| (v.abs() - allowance).max(0.0))
        .collect();
    let outer = prefix(&a_upper, u_far) + 2.0 * env_tail(u_far);
    let nn = n as i32;
    // (sum over all u of |A|)^n - (sum inside the box)^n.
    let truncation = |u: u64| sup * (outer.powi(nn) - prefix(&a_lower, u).powi(nn)).max(0.0);
    let u_cut = match u_cutoff {
        Some(u) => u.min(u_far),
        None => {
            let target = AUTO_TAIL_FRACTION * weight_sum;
            (0..=u_far)
                .find(|&u| truncation(u) <= target)
                .ok_or_else(|| {
                    XntError::Unsupported(format!(
                        "no cutoff up to {u_far} brings the Poisson tail below {target:.3e}"
                    ))
                })?
        }
    };

    let side_u = 2 * u_cut as usize + 1;
    check_budget((side_u as u128).pow(n as u32), budget)?;
    let mut uidx = vec![0usize; n];
    let mut sum = Complex64::new(0.0, 0.0);
    let mut u = vec![0i64; n];
    'uloop: loop {
        let mut wf = 1.0;
        for k in 0..n {
            u[k] = uidx[k] as i64 - u_cut as i64;
            wf *= a_vals[u[k].unsigned_abs() as usize];
        }
        sum += g_of(&u) * wf;
        let mut k = n;
        loop {
            if k == 0 {
                break 'uloop;
            }
            k -= 1;
            uidx[k] += 1;
            if uidx[k] < side_u {
                break;
            }
            uidx[k] = 0;
        }
    }
    let poisson = sum / (m as f64).powi(nn);
    // Quadrature errors inside the truncated box.
    let inside = a_vals[0].abs()
        + 2.0
            * a_vals[1..=u_cut as usize]
                .iter()
                .map(|v| v.abs())
                .sum::<f64>();
    let quad = sup * ((inside + side_u as f64 * allowance).powi(nn) - inside.powi(nn));
    let tail_bound = truncation(u_cut) + quad;
    let error = (direct - poisson).norm();
    let record = PoissonRecord {
        b,
        p,
        q,
        num_vars: n,
        u_cutoff: u_cut,
        weight_sum,
        direct,
        poisson,
        error,
        tail_bound,
    };
    if error > tail_bound + 1e-6 {
        return Err(XntError::Invariant(format!(
            "Poisson mismatch {error:e} exceeds tail bound {tail_bound:e} (p={p}, q={q}, U={u_cut})"
        )));
    }
    Ok(record)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub b: u64,
    pub count: u64,
    /// `N / (B^{n + 1/(n+2)} (log B)^{(n+1)/(n+2)})`.
    pub theorem_ratio: f64,
    /// `N / B^{n + 1/2}`.
    pub serre_ratio: f64,
}

impl BoundRow {
    pub fn new(b: u64, count: u64, num_vars: usize) -> Self {
        let n = num_vars as f64 - 1.0;
        let bf = b as f64;
        let theorem = bf.powf(n + 1.0 / (n + 2.0)) * bf.ln().powf((n + 1.0) / (n + 2.0));
        BoundRow {
            b,
            count,
            theorem_ratio: count as f64 / theorem,
            serre_ratio: count as f64 / bf.powf(n + 0.5),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundScan {
    pub rows: Vec<BoundRow>,
    /// max/min of the theorem ratio.
    pub spread: f64,
    /// `spread <= 10`.
    pub bounded: bool,
    /// Ratio against B^{n+1/2} non-increasing from the second grid point on (reported only).
    pub serre_decreasing: bool,
}

pub const BOUND_SPREAD_LIMIT: f64 = 10.0;

pub fn bound_ratio_scan(
    f: &UniPoly,
    form: &MultiPoly,
    grid: &[u64],
    budget: u128,
) -> Result<BoundScan> {
    if grid.iter().any(|&b| b < 2) {
        return Err(XntError::input(
            "bound scan needs B >= 2 (log B must be positive)",
        ));
    }
    let mut rows = Vec::with_capacity(grid.len());
    for &b in grid {
        let problem = BoxProblem::new(f.clone(), form.clone(), b)?;
        rows.push(BoundRow::new(
            b,
            brute_count(&problem, budget)?,
            form.n_vars(),
        ));
    }
    let ratios: Vec<f64> = rows.iter().map(|r| r.theorem_ratio).collect();
    let max = ratios.iter().copied().fold(f64::MIN, f64::max);
    let min = ratios.iter().copied().fold(f64::MAX, f64::min);
    let spread = if rows.is_empty() { 1.0 } else { max / min };
    let serre_decreasing = rows
        .windows(2)
        .skip(1)
        .all(|w| w[1].serre_ratio <= w[0].serre_ratio);
    Ok(BoundScan {
        rows,
        spread,
        bounded: spread <= BOUND_SPREAD_LIMIT,
        serre_decreasing,
    })
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassTally {
    pub p: u64,
    /// Search depth of the tangency scan; `None` when the diagonal oracle was exact.
    pub k_max: Option<u32>,
    pub zero_type: u64,
    pub good: u64,
    pub bad: u64,
    pub trace: Option<String>,
    /// Max of `|g(u)| / p^{n+1}` (u = 0), `/ p^{(n+1)/2}` (good) and
    /// `/ p^{(n+2)/2}` (bad), over projective representatives of `u`.
    pub max_zero: Option<f64>,
    pub max_good: Option<f64>,
    pub max_bad: Option<f64>,
}

/// Classifies every `u` in `F_p^{n+1}` (through projective representatives)
/// and, given `t`, records the normalized size of `g(u, t)` per class.
pub fn classification_tally(
    form: &MultiPoly,
    p: u64,
    k_max: u32,
    t: Option<&TraceFunction>,
    budget: u128,
) -> Result<ClassTally> {
    let n = form.n_vars();
    let diag = form
        .as_diagonal()
        .filter(|(c, d)| *d as u64 % p != 0 && c.iter().all(|&ci| reduce_i64(ci, p) != 0));
    let reps: Vec<Vec<i64>> = {
        let mut out = Vec::new();
        for lead in 0..n {
            let tail = n - lead - 1;
            for code in 0..(p as usize).pow(tail as u32) {
                let mut u = vec![0i64; n];
                u[lead] = 1;
                let mut c = code;
                for i in (lead + 1..n).rev() {
                    u[i] = (c % p as usize) as i64;
                    c /= p as usize;
                }
                out.push(u);
            }
        }
        out
    };
    let table = match t {
        Some(t) => {
            check_trace(t, p)?;
            check_budget(reps.len() as u128 * (p as u128).pow(n as u32), budget)?;
            Some(FormTable::new(form, p, budget)?)
        }
        None => None,
    };
    let classes: Vec<UKind> = reps
        .par_iter()
        .map(|u| match &diag {
            Some((c, d)) => diagonal_dual_oracle(c, *d, u, p).map(|c| c.kind()),
            None => classify_u(form, u, p, k_max, budget).map(|c: UClass| c.kind()),
        })
        .collect::<Result<_>>()?;
    let mut tally = ClassTally {
        p,
        k_max: if diag.is_some() { None } else { Some(k_max) },
        zero_type: 1,
        trace: t.map(|t| t.label().to_string()),
        ..Default::default()
    };
    for k in &classes {
        match k {
            UKind::Good => tally.good += p - 1,
            UKind::Bad => tally.bad += p - 1,
            UKind::ZeroType => unreachable!("representatives are nonzero"),
        }
    }
    if let (Some(table), Some(t)) = (&table, t) {
        let pf = p as f64;
        let nf = n as f64;
        tally.max_zero = Some(table.g(t.values(), &vec![0; n]).norm() / pf.powf(nf));
        let norms: Vec<f64> = reps
            .par_iter()
            .map(|u| {
                let ur: Vec<u64> = u.iter().map(|&c| c as u64).collect();
                table.g(t.values(), &ur).norm()
            })
            .collect();
        for (k, g) in classes.iter().zip(norms) {
            match k {
                UKind::Good => {
                    let v = g / pf.powf(nf / 2.0);
                    tally.max_good = Some(tally.max_good.map_or(v, |m| m.max(v)));
                }
                UKind::Bad => {
                    let v = g / pf.powf((nf + 1.0) / 2.0);
                    tally.max_bad = Some(tally.max_bad.map_or(v, |m| m.max(v)));
                }
                UKind::ZeroType => {}
            }
        }
    }
    Ok(tally)
}

/// The detector `D_p` as a trace function on `F_p`.
pub fn detector_trace(data: &SievePrimeData) -> Result<TraceFunction> {
    let values = (0..data.p)
        .map(|n| Complex64::new(detector(data, n as i128), 0.0))
        .collect();
    TraceFunction::new(values, format!("D_{}", data.p), 1.0)
}

/// Whether `f(t) = v` has an integer solution, by testing divisors of `f(0) - v`.
pub fn has_integer_root(f: &UniPoly, v: i128) -> Result<bool> {
    let v64 = i64::try_from(v).map_err(|_| XntError::Overflow("value"))?;
    let g = f.sub_const(v64)?;
    let a0 = g.eval_int(0)?;
    if a0 == 0 {
        return Ok(true);
    }
    let n = a0.unsigned_abs();
    let mut d: u128 = 1;
    while d * d <= n {
        if n % d == 0 {
            for c in [d, n / d] {
                for s in [c as i128, -(c as i128)] {
                    let Ok(t) = i64::try_from(s) else { continue };
                    if matches!(g.eval_int(t), Ok(0)) {
                        return Ok(true);
                    }
                }
            }
        }
        d += 1;
    }
    Ok(false)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpotCheck {
    pub seed: u64,
    pub draws: usize,
    pub mismatches: usize,
}

/// Random box points: table lookup against divisor-based root solving.
pub fn image_spot_check(problem: &BoxProblem, seed: u64, draws: usize) -> Result<SpotCheck> {
    let image = problem.image()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = problem.b as i64;
    let mut mismatches = 0;
    for _ in 0..draws {
        let x: Vec<i64> = (0..problem.num_vars())
            .map(|_| rng.gen_range(-b..=b))
            .collect();
        let v = problem.form.eval_int(&x)?;
        if image.contains(v) != has_integer_root(&problem.f, v)? {
            mismatches += 1;
        }
    }
    Ok(SpotCheck {
        seed,
        draws,
        mismatches,
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PrimePolicy {
    Auto,
    List(Vec<u64>),
}

impl FromStr for PrimePolicy {
    type Err = XntError;

    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(PrimePolicy::Auto);
        }
        let Some(rest) = s.strip_prefix("list:") else {
            return Err(XntError::input(format!(
                "prime policy '{s}' must be 'auto' or 'list:p1,p2,...'"
            )));
        };
        if rest.trim().is_empty() {
            return Err(XntError::input(
                "prime list is empty: give at least one prime, e.g. --primes list:5,7,11, or use --primes auto",
            ));
        }
        let primes = rest
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<u64>()
                    .map_err(|_| XntError::input(format!("bad prime '{t}' in list")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PrimePolicy::List(primes))
    }
}

#[derive(Clone, Debug)]
pub struct BoxOptions {
    pub primes: PrimePolicy,
    pub k_max: u32,
    pub threshold: ThresholdRule,
    pub budget: u128,
    pub seed: u64,
    pub spot_checks: usize,
    /// Classify all `u` at the smallest sieve prime and size `g(u, D_p)`.
    pub tallies: bool,
}

impl Default for BoxOptions {
    fn default() -> Self {
        BoxOptions {
            primes: PrimePolicy::Auto,
            k_max: 2,
            threshold: ThresholdRule::Lemma,
            budget: crate::error::DEFAULT_BUDGET,
            seed: 0,
            spot_checks: 10_000,
            tallies: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub tool_version: String,
    pub problem: ProblemSummary,
    pub exact_count: u64,
    pub sieve: SieveCount,
    pub window: Option<PrimeWindow>,
    pub primes: Vec<PrimeSummary>,
    pub threshold_rule: ThresholdRule,
    pub exceptional: ExceptionalSet,
    pub discriminants: Vec<DiscProfile>,
    pub tallies: Option<ClassTally>,
    pub bound: BoundRow,
    pub spot_checks: SpotCheck,
    /// Semi-decided verdicts, with their search depth.
    pub semi_decisions: Vec<String>,
    pub timings_ms: BTreeMap<String, f64>,
}

const MAX_DISC_PROFILES: usize = 64;

pub fn run_box_experiment(problem: &BoxProblem, opts: &BoxOptions) -> Result<ExperimentReport> {
    let mut timings = BTreeMap::new();
    let mut clock = |name: &str, start: Instant| {
        timings.insert(name.to_string(), start.elapsed().as_secs_f64() * 1e3);
    };
    let mut semi = Vec::new();

    let start = Instant::now();
    let (window, primes) = match &opts.primes {
        PrimePolicy::Auto => {
            let w = select_primes(problem, opts.k_max, opts.budget)?;
            if w.semi_decided {
                semi.push(format!(
                    "good reduction of V(F) checked by smoothness scan up to k_max = {}",
                    w.k_max
                ));
            }
            let primes = w.primes.clone();
            (Some(w), primes)
        }
        PrimePolicy::List(l) if l.is_empty() => return Err(XntError::input("prime list is empty")),
        PrimePolicy::List(l) => (None, l.clone()),
    };
    let config = SieveConfig::new(problem.f.clone(), primes, opts.threshold)?;
    let data = config.prime_data()?;
    clock("primes", start);

    let start = Instant::now();
    let exact_count = brute_count(problem, opts.budget)?;
    clock("brute_count", start);
    let start = Instant::now();
    let sieve = sieve_filtered_count(problem, &data, opts.budget)?;
    clock("sieve_count", start);
    if sieve.count != exact_count {
        return Err(XntError::Invariant(format!(
            "sieve-filtered count {} differs from exact count {exact_count}",
            sieve.count
        )));
    }

    let start = Instant::now();
    let exceptional = exceptional_set(problem, &data, opts.threshold)?;
    let discriminants = exceptional
        .members
        .iter()
        .take(MAX_DISC_PROFILES)
        .map(|&k| discriminant_profile(&problem.f, k))
        .collect::<Result<_>>()?;
    clock("exceptional", start);

    let start = Instant::now();
    let tallies = if opts.tallies {
        let dp = data
            .iter()
            .min_by_key(|d| d.p)
            .expect("nonempty prime list");
        let t = detector_trace(dp)?;
        let tally = classification_tally(&problem.form, dp.p, opts.k_max, Some(&t), opts.budget)?;
        if let Some(k) = tally.k_max {
            semi.push(format!(
                "u classification at p = {} by tangency scan up to k_max = {k}",
                dp.p
            ));
        }
        Some(tally)
    } else {
        None
    };
    clock("tallies", start);

    let start = Instant::now();
    let spot_checks = image_spot_check(problem, opts.seed, opts.spot_checks)?;
    clock("spot_checks", start);
    if spot_checks.mismatches > 0 {
        return Err(XntError::Invariant(format!(
            "{} image-table lookups disagree with direct root solving",
            spot_checks.mismatches
        )));
    }

    Ok(ExperimentReport {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        problem: problem.summary(),
        exact_count,
        sieve,
        window,
        primes: data.iter().map(|d| d.summary()).collect(),
        threshold_rule: opts.threshold,
        exceptional,
        discriminants,
        tallies,
        bound: BoundRow::new(problem.b, exact_count, problem.num_vars()),
        spot_checks,
        semi_decisions: semi,
        timings_ms: timings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::DEFAULT_BUDGET as BUDGET;
    use crate::poly::{parse_multi, parse_uni};

    fn quadric() -> MultiPoly {
        parse_multi("X0^2 + X1^2 + X2^2").unwrap()
    }

    /// Independent count: enumerate the box, test squares/cubes by root extraction.
    fn naive_count(f: &UniPoly, form: &MultiPoly, b: i64) -> u64 {
        let n = form.n_vars();
        let mut count = 0;
        let total = (2 * b + 1).pow(n as u32);
        for code in 0..total {
            let mut c = code;
            let x: Vec<i64> = (0..n)
                .map(|_| {
                    let v = c % (2 * b + 1) - b;
                    c /= 2 * b + 1;
                    v
                })
                .collect();
            let v = form.eval_int(&x).unwrap();
            if has_integer_root(f, v).unwrap() {
                count += 1;
            }
        }
        count
    }

    #[test]
    fn brute_count_examples() {
        for f in ["T^2", "T^3"] {
            let p = BoxProblem::new(parse_uni(f).unwrap(), quadric(), 1).unwrap();
            assert_eq!(brute_count(&p, BUDGET).unwrap(), 7);
        }
        let p = BoxProblem::new(parse_uni("T^2 + T").unwrap(), quadric(), 0).unwrap();
        assert_eq!(brute_count(&p, BUDGET).unwrap(), 1);
        let big = BoxProblem::new(parse_uni("T^2").unwrap(), quadric(), 1000).unwrap();
        assert!(matches!(
            brute_count(&big, 1000),
            Err(XntError::Budget { .. })
        ));
        for (f, form, b) in [
            ("T^2", "X0^2 + 2*X1^2", 6),
            ("T^3 - 3*T", "X0^3 + X1^3", 5),
            ("2*T^2 + 1", "X0*X1", 7),
        ] {
            let (f, form) = (parse_uni(f).unwrap(), parse_multi(form).unwrap());
            let p = BoxProblem::new(f.clone(), form.clone(), b).unwrap();
            assert_eq!(
                brute_count(&p, BUDGET).unwrap(),
                naive_count(&f, &form, b as i64)
            );
        }
    }

    #[test]
    fn sieve_count_matches_brute() {
        let f = parse_uni("T^2").unwrap();
        for b in [1u64, 5, 10] {
            let p = BoxProblem::new(f.clone(), quadric(), b).unwrap();
            let exact = brute_count(&p, BUDGET).unwrap();
            let cfg = SieveConfig::new(f.clone(), vec![3, 5, 7, 11], ThresholdRule::Lemma).unwrap();
            let s = sieve_filtered_count(&p, &cfg.prime_data().unwrap(), BUDGET).unwrap();
            assert_eq!(s.count, exact);
            if b == 10 {
                assert!(s.rejection_ratio > 0.0);
            }
            let none = sieve_filtered_count(&p, &[], BUDGET).unwrap();
            assert_eq!((none.count, none.rejection_ratio), (exact, 0.0));
        }
    }

    #[test]
    fn prime_window_example() {
        let p = BoxProblem::new(parse_uni("T^2").unwrap(), quadric(), 100).unwrap();
        let w = select_primes(&p, 2, BUDGET).unwrap();
        assert!((w.q - 46.3).abs() < 0.05, "{}", w.q);
        assert_eq!(w.primes, vec![47, 53, 59, 61, 67, 71, 73, 79, 83, 89]);
        assert!(!w.semi_decided);
        let small = BoxProblem::new(parse_uni("T^2").unwrap(), quadric(), 2).unwrap();
        assert!(select_primes(&small, 2, BUDGET).is_err());
        // T^2 is onto F_2 and the form X0^2 + 3 X1^2 + 5 X2^2 is singular mod 3 and 5.
        let tiny = BoxProblem::new(
            parse_uni("T^2").unwrap(),
            parse_multi("X0^2 + 3*X1^2 + 5*X2^2").unwrap(),
            5,
        )
        .unwrap();
        let w = select_primes(&tiny, 2, BUDGET).unwrap();
        assert!(w
            .excluded
            .iter()
            .any(|e| e.p == 5 && e.reason == "bad reduction"));
        assert!(!w.primes.contains(&2));
    }

    #[test]
    fn non_diagonal_bad_reduction_is_scanned() {
        // X0*X1 + X2^2 mod p is a smooth conic for odd p; add 7*X0^2 so 7 stays smooth but check flags.
        let form = parse_multi("X0*X1 + X1*X2 + X2*X0").unwrap();
        let p = BoxProblem::new(parse_uni("T^2").unwrap(), form, 30).unwrap();
        let w = select_primes(&p, 2, BUDGET).unwrap();
        assert!(w.semi_decided);
        // discriminant of this quadric is 2, so every odd window prime is good
        assert!(w.excluded.is_empty());
    }

    #[test]
    fn exceptional_set_example() {
        let p = BoxProblem::new(parse_uni("T^2").unwrap(), quadric(), 100).unwrap();
        let w = select_primes(&p, 2, BUDGET).unwrap();
        let cfg = SieveConfig::new(p.f().clone(), w.primes, ThresholdRule::Lemma).unwrap();
        let data = cfg.prime_data().unwrap();
        assert_eq!(
            exceptional_set(&p, &data, ThresholdRule::Lemma)
                .unwrap()
                .members,
            vec![0]
        );
        let few = &data[..1];
        // threshold 1/4 with one prime: every multiple of 47 counts
        let s = exceptional_set(&p, few, ThresholdRule::Lemma).unwrap();
        assert!(s.members.iter().all(|k| k % 47 == 0) && s.members.len() > 1);
        assert!(exceptional_set(&p, &[], ThresholdRule::Lemma).is_err());
    }

    #[test]
    fn discriminant_examples() {
        let t2 = parse_uni("T^2").unwrap();
        assert_eq!(
            discriminant_profile(&t2, 6).unwrap(),
            DiscProfile {
                k: 6,
                disc: 24,
                omega: 2,
                critical: false
            }
        );
        assert!(discriminant_profile(&t2, 0).unwrap().critical);
        let t3 = parse_uni("T^3").unwrap();
        let d = discriminant_profile(&t3, 1).unwrap();
        assert_eq!((d.disc, d.omega), (-27, 1));
    }

    /// Plain `p^{n+1}` loop with no fiber grouping and no odometer phase.
    fn g_direct(form: &MultiPoly, t: &TraceFunction, u: &[i64], p: u64) -> Complex64 {
        let n = form.n_vars();
        let mut s = Complex64::new(0.0, 0.0);
        for code in 0..p.pow(n as u32) {
            let mut c = code;
            let x: Vec<u64> = (0..n)
                .map(|_| {
                    let v = c % p;
                    c /= p;
                    v
                })
                .collect();
            let fx = form.eval_mod(&x, p).unwrap();
            let dot: u64 = x
                .iter()
                .zip(u)
                .map(|(&xi, &ui)| xi * reduce_i64(ui, p))
                .sum::<u64>()
                % p;
            s += t.value(fx) * e(dot as f64 / p as f64);
        }
        s
    }

    #[test]
    fn complete_sum_examples() {
        let f5 = PrimeField::new(5).unwrap();
        let one = TraceFunction::one(5);
        let g = complete_sum_g(&quadric(), &one, &[0, 0, 0], 5, BUDGET).unwrap();
        assert!((g - Complex64::new(125.0, 0.0)).norm() < 1e-9);
        let f3 = PrimeField::new(3).unwrap();
        let two = parse_multi("X1^2 + X2^2").unwrap();
        let g = complete_sum_g(&two, &f3.legendre().unwrap(), &[0, 0], 3, BUDGET).unwrap();
        assert!(g.norm() < 1e-12);
        let leg = f5.legendre().unwrap();
        for u in [[0i64, 0, 0], [1, 2, 0], [1, 0, 0], [3, 4, 2]] {
            let fast = complete_sum_g(&quadric(), &leg, &u, 5, BUDGET).unwrap();
            assert!((fast - g_direct(&quadric(), &leg, &u, 5)).norm() < 1e-9);
        }
        assert!(complete_sum_g(&quadric(), &leg, &[1, 2], 5, BUDGET).is_err());
        assert!(complete_sum_g(&quadric(), &leg, &[1, 2, 3], 7, BUDGET).is_err());
    }

    #[test]
    fn crt_examples() {
        let form = parse_multi("X0^2 + X1^2").unwrap();
        let l3 = PrimeField::new(3).unwrap().legendre().unwrap();
        let l5 = PrimeField::new(5).unwrap().legendre().unwrap();
        let r = crt_factor_check(&form, &[1, 1], 3, 5, &l3, &l5, BUDGET).unwrap();
        assert!(r.abs_error < 1e-9);
        let r0 = crt_factor_check(&form, &[0, 0], 3, 5, &l3, &l5, BUDGET).unwrap();
        let g0 = complete_sum_g(&form, &l3, &[0, 0], 3, BUDGET).unwrap()
            * complete_sum_g(&form, &l5.conj(), &[0, 0], 5, BUDGET).unwrap();
        assert!((r0.lhs - g0).norm() < 1e-9);
        let ones = crt_factor_check(
            &form,
            &[2, 7],
            3,
            5,
            &TraceFunction::one(3),
            &TraceFunction::one(5),
            BUDGET,
        )
        .unwrap();
        assert!(ones.abs_error < 1e-9);
        assert!(crt_factor_check(&form, &[1, 1], 3, 3, &l3, &l3, BUDGET).is_err());
    }

    #[test]
    fn poisson_examples() {
        let w = SmoothWeight::new(10.0).unwrap();
        let form = quadric();
        let (o3, o5) = (TraceFunction::one(3), TraceFunction::one(5));
        let r = poisson_compare(&form, &w, 3, 5, &o3, &o5, None, BUDGET).unwrap();
        assert!((r.direct.re - r.weight_sum).abs() < 1e-9);
        assert!(r.error <= r.tail_bound + 1e-6);
        let l3 = PrimeField::new(3).unwrap().legendre().unwrap();
        let l5 = PrimeField::new(5).unwrap().legendre().unwrap();
        let r = poisson_compare(&form, &w, 3, 5, &l3, &l5, None, BUDGET).unwrap();
        assert!(r.error <= r.tail_bound + 1e-6, "{r:?}");
        let r0 = poisson_compare(&form, &w, 3, 5, &o3, &o5, Some(0), BUDGET).unwrap();
        assert_eq!(r0.u_cutoff, 0);
        let expected = w.fourier(&[0.0, 0.0, 0.0]).unwrap();
        assert!((r0.poisson.re - expected).abs() < 1e-6);
    }

    #[test]
    fn bound_scan_small() {
        let s = bound_ratio_scan(&parse_uni("T^2").unwrap(), &quadric(), &[10], BUDGET).unwrap();
        assert!(s.bounded && s.spread == 1.0);
        assert!(bound_ratio_scan(&parse_uni("T^2").unwrap(), &quadric(), &[1], BUDGET).is_err());
    }

    #[test]
    fn tallies_count_every_u() {
        let leg = PrimeField::new(7).unwrap().legendre().unwrap();
        let t = classification_tally(&quadric(), 7, 2, Some(&leg), BUDGET).unwrap();
        assert_eq!(t.zero_type + t.good + t.bad, 343);
        assert!(t.k_max.is_none());
        // bad u: sum u_i^2 = 0 mod 7 with u != 0; the cone has 7^2 - 1 nonzero points
        assert_eq!(t.bad, 48);
        let nd = parse_multi("X0*X1 + X2^2").unwrap();
        let t = classification_tally(&nd, 5, 2, None, BUDGET).unwrap();
        assert_eq!(t.zero_type + t.good + t.bad, 125);
        assert_eq!(t.k_max, Some(2));
    }

    #[test]
    fn prime_policy_parsing() {
        assert_eq!("auto".parse::<PrimePolicy>().unwrap(), PrimePolicy::Auto);
        assert_eq!(
            "list:5,7".parse::<PrimePolicy>().unwrap(),
            PrimePolicy::List(vec![5, 7])
        );
        let err = "list:".parse::<PrimePolicy>().unwrap_err();
        assert!(err.to_string().contains("empty"));
        assert!("some".parse::<PrimePolicy>().is_err());
    }

    #[test]
    fn experiment_report() {
        let p = BoxProblem::new(parse_uni("T^2").unwrap(), quadric(), 20).unwrap();
        let opts = BoxOptions {
            spot_checks: 500,
            ..Default::default()
        };
        let r = run_box_experiment(&p, &opts).unwrap();
        assert_eq!(r.exact_count, r.sieve.count);
        assert!(r.tallies.is_some());
        assert_eq!(r.spot_checks.mismatches, 0);
    }
}
