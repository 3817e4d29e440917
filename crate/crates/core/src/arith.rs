//! Word-sized modular arithmetic and small-prime utilities.

pub fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

pub fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    if m == 1 {
        return 0;
    }
    let mut acc = 1u64;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let r = a % b;
        a = b;
        b = r;
    }
    a
}

/// Inverse of `a` modulo `m`, if it exists.
pub fn inv_mod(a: u64, m: u64) -> Option<u64> {
    let (mut old_r, mut r) = (a as i128 % m as i128, m as i128);
    let (mut old_s, mut s) = (1i128, 0i128);
    while r != 0 {
        let q = old_r / r;
        (old_r, r) = (r, old_r - q * r);
        (old_s, s) = (s, old_s - q * s);
    }
    if old_r != 1 {
        return None;
    }
    Some(old_s.rem_euclid(m as i128) as u64)
}

/// Reduces a signed integer into `[0, m)`.
pub fn reduce_i128(v: i128, m: u64) -> u64 {
    v.rem_euclid(m as i128) as u64
}

pub fn reduce_i64(v: i64, m: u64) -> u64 {
    (v as i128).rem_euclid(m as i128) as u64
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for small in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n % small == 0 {
            return n == small;
        }
    }
    // Deterministic Miller-Rabin for all 64-bit inputs.
    let d = (n - 1) >> (n - 1).trailing_zeros();
    let s = (n - 1).trailing_zeros();
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// All primes `<= limit` (Eratosthenes).
pub fn primes_up_to(limit: u64) -> Vec<u64> {
    if limit < 2 {
        return Vec::new();
    }
    let n = limit as usize;
    let mut composite = vec![false; n + 1];
    let mut out = Vec::new();
    for i in 2..=n {
        if !composite[i] {
            out.push(i as u64);
            let mut j = i * i;
            while j <= n {
                composite[j] = true;
                j += i;
            }
        }
    }
    out
}

/// Primes in the closed interval `[lo, hi]`.
pub fn primes_between(lo: u64, hi: u64) -> Vec<u64> {
    primes_up_to(hi).into_iter().filter(|&p| p >= lo).collect()
}

/// Distinct prime factors of `n` by trial division, ascending.
pub fn distinct_prime_factors(mut n: u128) -> Vec<u128> {
    let mut out = Vec::new();
    let mut d: u128 = 2;
    while d * d <= n {
        if n % d == 0 {
            out.push(d);
            while n % d == 0 {
                n /= d;
            }
        }
        d += if d == 2 { 1 } else { 2 };
    }
    if n > 1 {
        out.push(n);
    }
    out
}

/// `Some(r)` with `r^d = n` when `n` is a perfect `d`-th power (`d >= 1`).
pub fn exact_root(n: i128, d: u32) -> Option<i128> {
    if d == 0 {
        return None;
    }
    if n < 0 && d % 2 == 0 {
        return None;
    }
    let m = n.unsigned_abs();
    let guess = (m as f64).powf(1.0 / d as f64).round() as i128;
    for r in (guess - 2).max(0)..=guess + 2 {
        if (r as u128).checked_pow(d) == Some(m) {
            return Some(if n < 0 { -r } else { r });
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn primality_matches_sieve() {
        let sieve = primes_up_to(5000);
        let direct: Vec<u64> = (0..=5000).filter(|&n| is_prime(n)).collect();
        assert_eq!(sieve, direct);
        assert!(is_prime(1_000_000_007));
        assert!(!is_prime(1_000_000_007 * 3));
    }

    #[test]
    fn inverses() {
        for p in [5u64, 7, 101] {
            for a in 1..p {
                assert_eq!(mul_mod(a, inv_mod(a, p).unwrap(), p), 1);
            }
        }
        assert_eq!(inv_mod(6, 9), None);
    }

    #[test]
    fn factors() {
        assert_eq!(distinct_prime_factors(24), vec![2, 3]);
        assert_eq!(distinct_prime_factors(27), vec![3]);
        assert_eq!(distinct_prime_factors(1), Vec::<u128>::new());
        assert_eq!(distinct_prime_factors(97 * 97 * 2), vec![2, 97]);
    }

    #[test]
    fn exact_roots() {
        assert_eq!(exact_root(1_000_000_000_000, 2), Some(1_000_000));
        assert_eq!(exact_root(-27, 3), Some(-3));
        assert_eq!(exact_root(-4, 2), None);
        assert_eq!(exact_root(0, 5), Some(0));
        assert_eq!(exact_root(999_999_999_999, 2), None);
        let m: i128 = 5 * 13 * 17 * 29 * 37 * 41;
        assert_eq!(exact_root(m * m, 2), Some(m));
    }
}
