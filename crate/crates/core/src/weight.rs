//! Smooth box weight `W(x) = prod_i w(x_i / B)` with `w(t) = exp(-1/(1-t^2))`
//! and its Fourier transform.

use std::f64::consts::PI;

use crate::error::{Result, XntError};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for i in 0..7 {
        let dx = h * XGK[i];
        let s = f(c - dx) + f(c + dx);
        k += WGK[i] * s;
        if i % 2 == 1 {
            g += WG[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Adaptive Gauss-Kronrod 7-15 on `[a, b]` split first into `panels` equal
/// pieces, to absolute tolerance `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64, panels: usize) -> Result<f64> {
    const MAX_INTERVALS: usize = 200_000;
    let panels = panels.max(1);
    let width = (b - a) / panels as f64;
    let mut stack: Vec<(f64, f64, f64)> = (0..panels)
        .map(|i| {
            let lo = a + width * i as f64;
            let hi = if i + 1 == panels { b } else { lo + width };
            (lo, hi, tol * (hi - lo) / (b - a))
        })
        .collect();
    let mut total = 0.0;
    let mut processed = 0usize;
    while let Some((lo, hi, t)) = stack.pop() {
        processed += 1;
        if processed > MAX_INTERVALS {
            return Err(XntError::Quadrature(format!(
                "no convergence on [{a}, {b}] to {tol}"
            )));
        }
        let (v, err) = gk15(&f, lo, hi);
        if err <= t || hi - lo < 1e-12 * (b - a) {
            total += v;
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((lo, mid, 0.5 * t));
            stack.push((mid, hi, 0.5 * t));
        }
    }
    Ok(total)
}

/// `exp(-1/(1-t^2))` on `(-1, 1)`, zero outside.
pub fn bump(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - t * t)).exp()
    }
}

/// Coefficients (low to high) of `P_k` with `w^{(k)} = w P_k / (1-t^2)^{2k}`.
pub fn derivative_numerator(k: u32) -> Vec<f64> {
    let mut pk = vec![1.0];
    let s = [1.0, 0.0, -1.0];
    for j in 0..k {
        // P_{j+1} = P_j' s^2 + 4 j t s P_j - 2 t P_j
        let dp: Vec<f64> = pk
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, &c)| c * i as f64)
            .collect();
        let s2 = poly_mul(&s, &s);
        let ts = poly_mul(&[0.0, 4.0 * j as f64], &s);
        let a = poly_mul(&dp, &s2);
        let b = poly_mul(&ts, &pk);
        let c = poly_mul(&[0.0, -2.0], &pk);
        let len = a.len().max(b.len()).max(c.len());
        pk = (0..len)
            .map(|i| a.get(i).unwrap_or(&0.0) + b.get(i).unwrap_or(&0.0) + c.get(i).unwrap_or(&0.0))
            .collect();
    }
    pk
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn horner(c: &[f64], t: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &x| acc * t + x)
}

/// `w^{(k)}(t)`.
pub fn bump_derivative(k: u32, t: f64) -> f64 {
    bump_derivative_with(&derivative_numerator(k), k, t)
}

fn bump_derivative_with(pk: &[f64], k: u32, t: f64) -> f64 {
    let w = bump(t);
    if w == 0.0 {
        return 0.0;
    }
    let s = 1.0 - t * t;
    w * horner(pk, t) / s.powi(2 * k as i32)
}

#[derive(Clone, Debug)]
pub struct SmoothWeight {
    b: f64,
    tol: f64,
    kappa: u32,
    /// `int |w^{(kappa)}|`.
    m_kappa: f64,
}

impl SmoothWeight {
    pub const DEFAULT_TOL: f64 = 1e-10;
    pub const DEFAULT_KAPPA: u32 = 4;

    pub fn new(b: f64) -> Result<Self> {
        Self::with_kappa(b, Self::DEFAULT_KAPPA)
    }

    pub fn with_kappa(b: f64, kappa: u32) -> Result<Self> {
        if !(b > 0.0 && b.is_finite()) {
            return Err(XntError::input(format!(
                "box radius must be positive, got {b}"
            )));
        }
        if kappa < 2 {
            return Err(XntError::input("decay order kappa must be >= 2"));
        }
        let pk = derivative_numerator(kappa);
        let m_kappa = integrate(
            |t| bump_derivative_with(&pk, kappa, t).abs(),
            -1.0,
            1.0,
            1e-9,
            64,
        )?;
        Ok(SmoothWeight {
            b,
            tol: Self::DEFAULT_TOL,
            kappa,
            m_kappa,
        })
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn kappa(&self) -> u32 {
        self.kappa
    }

    pub fn m_kappa(&self) -> f64 {
        self.m_kappa
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        x.iter().map(|&xi| bump(xi / self.b)).product()
    }

    /// `w^(eta) = int w(t) cos(2 pi t eta) dt`.
    pub fn bump_hat(&self, eta: f64) -> Result<f64> {
        let panels = (4.0 * eta.abs()).ceil() as usize + 8;
        integrate(
            |t| bump(t) * (2.0 * PI * t * eta).cos(),
            -1.0,
            1.0,
            self.tol,
            panels,
        )
    }

    /// `|w^(eta)| <= min(w^(0), M_kappa / (2 pi |eta|)^kappa)`.
    pub fn hat_envelope(&self, eta: f64) -> f64 {
        let zero = 0.443_993_816_168_079_4;
        if eta == 0.0 {
            return zero;
        }
        zero.min(self.m_kappa / (2.0 * PI * eta.abs()).powi(self.kappa as i32))
    }

    /// `W^(xi) = prod_i B w^(B xi_i)`.
    pub fn fourier(&self, xi: &[f64]) -> Result<f64> {
        xi.iter().try_fold(1.0, |acc, &x| {
            Ok(acc * self.b * self.bump_hat(self.b * x)?)
        })
    }

    /// `sum_{|m| < B} w(m/B)`, the one-dimensional lattice mass.
    pub fn lattice_sum_1d(&self) -> f64 {
        let r = self.b.ceil() as i64;
        (-r..=r).map(|m| bump(m as f64 / self.b)).sum()
    }
}
