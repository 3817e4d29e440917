//! Polynomial sieve with exact per-prime detectors.

use std::collections::{BTreeMap, BTreeSet};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arith::{exact_root, gcd, is_prime, reduce_i128};
use crate::error::{Result, XntError};
use crate::field::PrimeField;
use crate::poly::{critical_value_poly, roots_mod_p, IntegerImage, UniPoly};

#[derive(Clone, Debug, PartialEq)]
pub struct SievePrimeData {
    pub p: u64,
    /// Degree of `h` over `Z`.
    pub degree: usize,
    pub image: Vec<bool>,
    pub image_size: usize,
    /// Critical values of `h` over the closure that lie in `F_p`.
    pub exceptional: Vec<u64>,
    /// `nu[n] = #{x in F_p : h(x) = n}`.
    pub nu: Vec<u32>,
}

impl SievePrimeData {
    /// `h(F_p) != F_p`.
    pub fn in_ph(&self) -> bool {
        self.image_size < self.p as usize
    }

    /// `p - (p-1)/d`.
    pub fn image_bound(&self) -> f64 {
        self.p as f64 - (self.p - 1) as f64 / self.degree as f64
    }

    pub fn image_bound_holds(&self) -> bool {
        !self.in_ph() || self.image_size as f64 <= self.image_bound() + 1e-12
    }

    pub fn bound_tight(&self) -> bool {
        (self.image_size as f64 - self.image_bound()).abs() < 1e-12
    }

    pub fn contains(&self, n: i128) -> bool {
        self.image[reduce_i128(n, self.p) as usize]
    }

    fn is_exceptional(&self, n: i128) -> bool {
        self.exceptional
            .binary_search(&reduce_i128(n, self.p))
            .is_ok()
    }

    pub fn summary(&self) -> PrimeSummary {
        PrimeSummary {
            p: self.p,
            image_size: self.image_size,
            exceptional: self.exceptional.clone(),
            bound_tight: self.bound_tight(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrimeSummary {
    pub p: u64,
    pub image_size: usize,
    pub exceptional: Vec<u64>,
    pub bound_tight: bool,
}

pub fn build_prime_data(h: &UniPoly, p: u64) -> Result<SievePrimeData> {
    let degree = h.degree().unwrap_or(0);
    if !is_prime(p) {
        return Err(XntError::input(format!("{p} is not prime")));
    }
    if p <= degree as u64 {
        return Err(XntError::input(format!(
            "p = {p} must exceed deg h = {degree}"
        )));
    }
    let mut nu = vec![0u32; p as usize];
    for x in 0..p {
        nu[h.eval_mod(x, p) as usize] += 1;
    }
    let image: Vec<bool> = nu.iter().map(|&c| c > 0).collect();
    let image_size = image.iter().filter(|&&b| b).count();
    let hp = h.reduce_mod(p);
    let exceptional = match hp.degree() {
        Some(d) if d >= 2 => roots_mod_p(&critical_value_poly(&hp)?)?,
        _ => Vec::new(),
    };
    Ok(SievePrimeData {
        p,
        degree,
        image,
        image_size,
        exceptional,
        nu,
    })
}

/// `D_p(n) = 1_{h(F_p)}(n mod p) - |h(F_p)|/p`.
pub fn detector(data: &SievePrimeData, n: i128) -> f64 {
    let base = data.image_size as f64 / data.p as f64;
    if data.contains(n) {
        1.0 - base
    } else {
        -base
    }
}

/// Max over units `x` of `|1_{d-th power}(x) - (1/d)(1 + sum_{chi^d = 1, chi != 1} chi(x))|`.
pub fn power_decomposition_check(d: u64, p: u64) -> Result<f64> {
    if d == 0 || !is_prime(p) || (p - 1) % d != 0 {
        return Err(XntError::input(format!(
            "need d | p - 1 (d = {d}, p = {p})"
        )));
    }
    let field = PrimeField::new(p)?;
    let chars: Vec<_> = (1..d)
        .map(|j| field.mult_char(d, j))
        .collect::<Result<_>>()?;
    let mut worst = 0.0f64;
    for x in 1..p {
        let lhs = if field.is_power_residue(x, d) {
            1.0
        } else {
            0.0
        };
        let s: Complex64 = chars.iter().map(|c| c.value(x)).sum();
        let rhs = (Complex64::new(1.0, 0.0) + s) / d as f64;
        worst = worst.max((rhs - lhs).norm());
    }
    Ok(worst)
}

/// `alpha + (nu(n) - 1)(d - nu(n))`.
pub fn browning_weight(data: &SievePrimeData, n: i128, alpha: f64) -> f64 {
    let nu = data.nu[reduce_i128(n, data.p) as usize] as f64;
    alpha + (nu - 1.0) * (data.degree as f64 - nu)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdRule {
    /// `P / (2d)`.
    #[default]
    Lemma,
    /// `P / (2d log P)`.
    LogP,
}

impl ThresholdRule {
    pub fn value(self, num_primes: usize, d: usize) -> f64 {
        let pf = num_primes as f64;
        match self {
            ThresholdRule::Lemma => pf / (2.0 * d as f64),
            ThresholdRule::LogP => pf / (2.0 * d as f64 * pf.ln()),
        }
    }
}

impl std::str::FromStr for ThresholdRule {
    type Err = XntError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lemma" => Ok(ThresholdRule::Lemma),
            "logp" => Ok(ThresholdRule::LogP),
            _ => Err(XntError::input(format!(
                "unknown threshold rule '{s}' (expected lemma or logp)"
            ))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SieveConfig {
    h: UniPoly,
    primes: Vec<u64>,
    threshold: ThresholdRule,
}

impl SieveConfig {
    /// Checks `deg h >= 2` and that the primes are distinct and exceed `deg h`.
    /// Membership in `P_h` is checked by [`SieveConfig::prime_data`].
    pub fn new(h: UniPoly, primes: Vec<u64>, threshold: ThresholdRule) -> Result<Self> {
        let d = h.degree().unwrap_or(0);
        if d < 2 {
            return Err(XntError::input("sieve polynomial must have degree >= 2"));
        }
        let distinct: BTreeSet<u64> = primes.iter().copied().collect();
        if distinct.len() != primes.len() {
            return Err(XntError::input("sieve primes must be distinct"));
        }
        for &p in &primes {
            if !is_prime(p) || p <= d as u64 {
                return Err(XntError::input(format!(
                    "{p} is not a prime above deg h = {d}"
                )));
            }
        }
        Ok(SieveConfig {
            h,
            primes,
            threshold,
        })
    }

    pub fn h(&self) -> &UniPoly {
        &self.h
    }

    pub fn primes(&self) -> &[u64] {
        &self.primes
    }

    pub fn degree(&self) -> usize {
        self.h.degree().unwrap_or(0)
    }

    pub fn threshold_rule(&self) -> ThresholdRule {
        self.threshold
    }

    pub fn threshold(&self) -> f64 {
        self.threshold.value(self.primes.len(), self.degree())
    }

    /// Per-prime data, built in parallel; fails if some `p` has `h(F_p) = F_p`.
    pub fn prime_data(&self) -> Result<Vec<SievePrimeData>> {
        let data: Vec<SievePrimeData> = self
            .primes
            .par_iter()
            .map(|&p| build_prime_data(&self.h, p))
            .collect::<Result<_>>()?;
        if let Some(bad) = data.iter().find(|d| !d.in_ph()) {
            return Err(XntError::input(format!(
                "h is surjective on F_{}, so {} is not in P_h",
                bad.p, bad.p
            )));
        }
        Ok(data)
    }
}

/// `true` iff `n mod p` lies in `h(F_p)` for every prime; `false` proves `n` is not in `h(Z)`.
pub fn membership_filter(data: &[SievePrimeData], n: i128) -> bool {
    data.iter().all(|d| d.contains(n))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SieveLedger {
    pub num_primes: usize,
    pub degree: usize,
    pub total_weight: f64,
    /// `sum_{n in h(Z)} a(n)`.
    pub v_h: f64,
    /// `sum_n a(n) (sum_p D_p(n))^2`.
    pub sigma: f64,
    /// `sum_n a(n) sum_p D_p(n)^2`, at most `P * total_weight`.
    pub diagonal: f64,
    /// `sigma - diagonal`.
    pub cross: f64,
    /// `total_weight / P`.
    pub first_term: f64,
    /// `cross / P^2`.
    pub cross_term: f64,
    pub threshold: f64,
    pub hypothesis_ok: bool,
    pub hypothesis_failures: usize,
    /// No weight on `n = 0` or `|n| >= e^P`.
    pub support_ok: bool,
    /// `P^2 * V_h`.
    pub lhs: f64,
    /// `(2d)^2 * sigma`.
    pub rhs: f64,
    pub inequality_holds: bool,
}

fn check_weights(a: &BTreeMap<i128, f64>) -> Result<()> {
    match a.iter().find(|(_, &w)| !(w >= 0.0 && w.is_finite())) {
        Some((n, w)) => Err(XntError::input(format!(
            "weight a({n}) = {w} is not a finite nonnegative number"
        ))),
        None => Ok(()),
    }
}

fn support_ok(a: &BTreeMap<i128, f64>, num_primes: usize) -> bool {
    let cap = (num_primes as f64).exp();
    a.iter()
        .filter(|(_, &w)| w > 0.0)
        .all(|(&n, _)| n != 0 && (n as f64).abs() < cap)
}

/// Evaluates both sides of `P^2 V_h <= (2d)^2 Sigma`. Returns an invariant
/// error if the hypothesis holds but the inequality does not.
pub fn sieve_bound_eval(
    config: &SieveConfig,
    data: &[SievePrimeData],
    a: &BTreeMap<i128, f64>,
) -> Result<SieveLedger> {
    check_weights(a)?;
    if data.len() != config.primes().len() {
        return Err(XntError::input(
            "prime data does not match the sieve configuration",
        ));
    }
    let num_primes = data.len();
    let d = config.degree();
    let threshold = config.threshold();
    let max_abs = a.keys().map(|n| n.abs()).max().unwrap_or(0);
    let image = IntegerImage::new(config.h(), max_abs)?;

    let (mut total_weight, mut v_h, mut sigma, mut diagonal) = (0.0, 0.0, 0.0, 0.0);
    let mut hypothesis_failures = 0usize;
    for (&n, &w) in a {
        if w == 0.0 {
            continue;
        }
        let dets: Vec<f64> = data.iter().map(|dp| detector(dp, n)).collect();
        let s: f64 = dets.iter().sum();
        total_weight += w;
        sigma += w * s * s;
        diagonal += w * dets.iter().map(|x| x * x).sum::<f64>();
        if image.contains(n) {
            v_h += w;
            let s_count = data.iter().filter(|dp| dp.is_exceptional(n)).count() as f64;
            if s_count < threshold && s < threshold - 1e-12 {
                hypothesis_failures += 1;
            }
        }
    }
    let pf = num_primes as f64;
    let lhs = pf * pf * v_h;
    let rhs = (2.0 * d as f64).powi(2) * sigma;
    let inequality_holds = lhs <= rhs * (1.0 + 1e-12) + 1e-12;
    let ledger = SieveLedger {
        num_primes,
        degree: d,
        total_weight,
        v_h,
        sigma,
        diagonal,
        cross: sigma - diagonal,
        first_term: if num_primes > 0 {
            total_weight / pf
        } else {
            f64::INFINITY
        },
        cross_term: if num_primes > 0 {
            (sigma - diagonal) / (pf * pf)
        } else {
            f64::INFINITY
        },
        threshold,
        hypothesis_ok: hypothesis_failures == 0,
        hypothesis_failures,
        support_ok: support_ok(a, num_primes),
        lhs,
        rhs,
        inequality_holds,
    };
    if ledger.hypothesis_ok && !ledger.inequality_holds {
        return Err(XntError::Invariant(format!(
            "sieve inequality failed: P^2 V_h = {lhs} > (2d)^2 Sigma = {rhs}"
        )));
    }
    Ok(ledger)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerSieveRhs {
    pub num_primes: usize,
    pub v_h: f64,
    /// `P^{-1} sum a(n)`.
    pub first_term: f64,
    /// `P^{-2} sum_{p != q} sum_{chi, chi'} |sum_n a(n) chi(n) conj(chi'(n))|`.
    pub cross_term: f64,
    pub rhs: f64,
    /// `v_h / rhs`; bounded in `P` when the support condition holds.
    pub ratio: f64,
    pub support_ok: bool,
}

/// Right-hand side of the power sieve for `h = T^d` with the nontrivial
/// characters of order dividing `d` at each prime.
pub fn power_sieve_rhs(d: u32, primes: &[u64], a: &BTreeMap<i128, f64>) -> Result<PowerSieveRhs> {
    check_weights(a)?;
    if d < 2 || primes.is_empty() {
        return Err(XntError::input("need d >= 2 and at least one prime"));
    }
    let mut chars: Vec<Vec<Vec<Complex64>>> = Vec::with_capacity(primes.len());
    for &p in primes {
        let field = PrimeField::new(p)?;
        let r = gcd(d as u64, p - 1);
        let cs = (1..r)
            .map(|j| field.mult_char(r, j).map(|t| t.values().to_vec()))
            .collect::<Result<_>>()?;
        chars.push(cs);
    }
    let support: Vec<(i128, f64)> = a
        .iter()
        .filter(|(_, &w)| w > 0.0)
        .map(|(&n, &w)| (n, w))
        .collect();
    let total: f64 = support.iter().map(|(_, w)| w).sum();
    let mut cross = 0.0;
    for (i, &p) in primes.iter().enumerate() {
        for (k, &q) in primes.iter().enumerate() {
            if i == k {
                continue;
            }
            for cp in &chars[i] {
                for cq in &chars[k] {
                    let s: Complex64 = support
                        .iter()
                        .map(|&(n, w)| {
                            cp[reduce_i128(n, p) as usize]
                                * cq[reduce_i128(n, q) as usize].conj()
                                * w
                        })
                        .sum();
                    cross += s.norm();
                }
            }
        }
    }
    let v_h: f64 = support
        .iter()
        .filter(|(n, _)| exact_root(*n, d).is_some())
        .map(|(_, w)| w)
        .sum();
    let pf = primes.len() as f64;
    let rhs = total / pf + cross / (pf * pf);
    Ok(PowerSieveRhs {
        num_primes: primes.len(),
        v_h,
        first_term: total / pf,
        cross_term: cross / (pf * pf),
        rhs,
        ratio: if rhs > 0.0 { v_h / rhs } else { f64::INFINITY },
        support_ok: support_ok(a, primes.len()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::primes_between;

    fn t2() -> UniPoly {
        UniPoly::int(&[0, 0, 1])
    }

    #[test]
    fn prime_data_examples() {
        let d = build_prime_data(&t2(), 7).unwrap();
        let image: Vec<u64> = (0..7).filter(|&n| d.image[n as usize]).collect();
        assert_eq!(image, vec![0, 1, 2, 4]);
        assert_eq!(d.image_size, 4);
        assert!(d.bound_tight());
        assert_eq!(d.exceptional, vec![0]);
        assert_eq!(d.nu.iter().sum::<u32>(), 7);
        let c = build_prime_data(&UniPoly::int(&[0, -3, 0, 1]), 5).unwrap();
        assert_eq!(c.exceptional, vec![2, 3]);
        assert!(build_prime_data(&t2(), 2).is_err());
    }

    #[test]
    fn detector_examples() {
        let d = build_prime_data(&t2(), 7).unwrap();
        assert!((detector(&d, 3) + 4.0 / 7.0).abs() < 1e-15);
        assert!((detector(&d, 4) - 3.0 / 7.0).abs() < 1e-15);
        assert!(detector(&d, 4) >= 6.0 / 14.0 - 1e-15);
        for n in -20i128..20 {
            assert_eq!(detector(&d, n), detector(&d, n + 7));
        }
    }

    #[test]
    fn power_decomposition() {
        assert!(power_decomposition_check(2, 5).unwrap() < 1e-12);
        assert!(power_decomposition_check(3, 7).unwrap() < 1e-9);
        assert!(power_decomposition_check(3, 5).is_err());
        let f5 = PrimeField::new(5).unwrap();
        let chi = f5.mult_char(2, 1).unwrap();
        assert!(((1.0 + chi.value(2).re) / 2.0).abs() < 1e-15);
        assert!(((1.0 + chi.value(4).re) / 2.0 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn browning_examples() {
        let d = build_prime_data(&t2(), 5).unwrap();
        assert_eq!(browning_weight(&d, 4, 0.0), 0.0);
        assert_eq!(browning_weight(&d, 2, 1.0), -1.0);
        let lin_like = build_prime_data(&UniPoly::int(&[0, 0, 0, 1]), 5).unwrap();
        // cubing is a bijection on F_5, so nu = 1 everywhere
        assert_eq!(browning_weight(&lin_like, 3, 0.75), 0.75);
    }

    #[test]
    fn filter_examples() {
        let cfg = SieveConfig::new(t2(), vec![3, 7], ThresholdRule::Lemma).unwrap();
        let data = cfg.prime_data().unwrap();
        assert!(!membership_filter(&data, 10));
        assert!(membership_filter(&data, 9));
        assert!(membership_filter(&data, 0));
        assert!(SieveConfig::new(t2(), vec![3, 3], ThresholdRule::Lemma).is_err());
        // cubing is bijective on F_5
        let cubes =
            SieveConfig::new(UniPoly::int(&[0, 0, 0, 1]), vec![5], ThresholdRule::Lemma).unwrap();
        assert!(cubes.prime_data().is_err());
    }

    #[test]
    fn thresholds() {
        assert_eq!(ThresholdRule::Lemma.value(8, 2), 2.0);
        assert!((ThresholdRule::LogP.value(8, 2) - 2.0 / 8f64.ln()).abs() < 1e-15);
        assert_eq!(
            "logp".parse::<ThresholdRule>().unwrap(),
            ThresholdRule::LogP
        );
        assert!("other".parse::<ThresholdRule>().is_err());
    }

    #[test]
    fn squares_sequence_satisfies_inequality() {
        let primes: Vec<u64> = primes_between(20, 60).into_iter().take(8).collect();
        assert_eq!(primes.len(), 8);
        let cfg = SieveConfig::new(t2(), primes, ThresholdRule::Lemma).unwrap();
        let data = cfg.prime_data().unwrap();
        let a: BTreeMap<i128, f64> = (1..=50i128).map(|k| (k * k, 1.0)).collect();
        let l = sieve_bound_eval(&cfg, &data, &a).unwrap();
        assert!(l.hypothesis_ok && l.inequality_holds);
        assert_eq!(l.v_h, 50.0);
        assert!(l.diagonal <= 8.0 * l.total_weight);
        let non_values: BTreeMap<i128, f64> = [(2i128, 1.0), (3, 2.0)].into_iter().collect();
        assert_eq!(sieve_bound_eval(&cfg, &data, &non_values).unwrap().v_h, 0.0);
        let negative: BTreeMap<i128, f64> = [(4i128, -1.0)].into_iter().collect();
        assert!(sieve_bound_eval(&cfg, &data, &negative).is_err());
    }

    #[test]
    fn power_sieve_failure_mode() {
        let primes = vec![5u64, 13, 17, 29];
        let m: i128 = primes.iter().map(|&p| p as i128).product();
        let a: BTreeMap<i128, f64> = [(m * m, 1.0)].into_iter().collect();
        let r = power_sieve_rhs(2, &primes, &a).unwrap();
        assert_eq!(r.v_h, 1.0);
        assert!((r.rhs - 0.25).abs() < 1e-12);
        assert!((r.ratio - 4.0).abs() < 1e-12);
        assert!(!r.support_ok);
    }
}
