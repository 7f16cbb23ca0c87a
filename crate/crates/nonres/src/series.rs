//! Truncated series arithmetic.
//!
//! Three representations carry the whole pipeline:
//!
//! * [`RadialSeries`]: real polynomial in the amplitude `r`, truncated at a
//!   fixed order. Truncation is propagated conservatively: binary ops keep
//!   `min` of the operands' orders.
//! * [`FtSeries`]: finite Fourier sum in the angles `(phi, S)` whose
//!   coefficients are complex radial series. Only one representative of
//!   each conjugate mode pair is stored, so every `FtSeries` is a real
//!   function by construction.
//! * [`LogPolynomial`]: polynomial in `tau = log t`, the coefficient ring
//!   of the asymptotic expansions.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::tol;

// ---------------------------------------------------------------------------
// Radial series
// ---------------------------------------------------------------------------

/// Real polynomial `a_0 + a_1 r + ... + a_T r^T` truncated at order `T`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialSeries {
    /// Coefficient of `r^j` at index `j`; never empty.
    pub coeffs: Vec<f64>,
}

impl RadialSeries {
    pub fn zero(trunc: usize) -> Self {
        RadialSeries { coeffs: vec![0.0; trunc + 1] }
    }

    pub fn constant(value: f64, trunc: usize) -> Self {
        let mut s = Self::zero(trunc);
        s.coeffs[0] = value;
        s
    }

    /// `value * r^power`, zero if `power > trunc`.
    pub fn monomial(value: f64, power: usize, trunc: usize) -> Self {
        let mut s = Self::zero(trunc);
        if power <= trunc {
            s.coeffs[power] = value;
        }
        s
    }

    pub fn from_coeffs(coeffs: Vec<f64>) -> Self {
        assert!(!coeffs.is_empty());
        RadialSeries { coeffs }
    }

    pub fn trunc(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Drop coefficients above `trunc`.
    pub fn truncated(&self, trunc: usize) -> Self {
        let mut c = self.coeffs.clone();
        c.truncate(trunc + 1);
        if c.is_empty() {
            c.push(0.0);
        }
        RadialSeries { coeffs: c }
    }

    /// Extend with zeros up to `trunc`. Only valid when the series is known
    /// to be an exact polynomial, not a truncation of something longer.
    pub fn padded(&self, trunc: usize) -> Self {
        let mut c = self.coeffs.clone();
        c.resize(trunc.max(self.trunc()) + 1, 0.0);
        RadialSeries { coeffs: c }
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.coeffs.len().min(other.coeffs.len());
        let mut c = vec![0.0; n];
        for j in 0..n {
            c[j] = self.coeffs[j] + other.coeffs[j];
        }
        RadialSeries { coeffs: c }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, factor: f64) -> Self {
        RadialSeries { coeffs: self.coeffs.iter().map(|c| c * factor).collect() }
    }

    /// Truncated product; the result is valid to `min` of the input orders.
    pub fn mul(&self, other: &Self) -> Self {
        let n = self.coeffs.len().min(other.coeffs.len());
        let mut c = vec![0.0; n];
        for (i, a) in self.coeffs.iter().enumerate().take(n) {
            if *a == 0.0 {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate().take(n - i) {
                c[i + j] += a * b;
            }
        }
        RadialSeries { coeffs: c }
    }

    /// Multiplicative inverse. Fails when the constant term is below `zero_thr`.
    ///
    /// Recurrence: `c_0 = 1/a_0`, `c_n = -(1/a_0) * sum_{k=1..n} a_k c_{n-k}`.
    pub fn reciprocal(&self, zero_thr: f64) -> Result<Self> {
        let a0 = self.coeffs[0];
        if a0.abs() <= zero_thr {
            return Err(Error::ZeroConstantTerm { value: a0 });
        }
        let n = self.coeffs.len();
        let mut c = vec![0.0; n];
        c[0] = 1.0 / a0;
        for j in 1..n {
            let mut acc = 0.0;
            for k in 1..=j {
                acc += self.coeffs[k] * c[j - k];
            }
            c[j] = -acc / a0;
        }
        Ok(RadialSeries { coeffs: c })
    }

    /// d/dr; the result is valid to one order less.
    pub fn derivative(&self) -> Self {
        if self.coeffs.len() == 1 {
            return Self::zero(0);
        }
        let c = (1..self.coeffs.len()).map(|j| self.coeffs[j] * j as f64).collect();
        RadialSeries { coeffs: c }
    }

    /// Division by `r`: requires the constant term to be negligible.
    pub fn shift_down(&self, zero_thr: f64) -> Result<Self> {
        if self.coeffs[0].abs() > zero_thr {
            return Err(Error::DivisionByR { k1: 0, k2: 0, coeff: self.coeffs[0] });
        }
        if self.coeffs.len() == 1 {
            return Ok(Self::zero(0));
        }
        Ok(RadialSeries { coeffs: self.coeffs[1..].to_vec() })
    }

    /// Multiplication by `r`.
    pub fn shift_up(&self) -> Self {
        let mut c = vec![0.0];
        c.extend_from_slice(&self.coeffs);
        RadialSeries { coeffs: c }
    }

    pub fn eval(&self, r: f64) -> f64 {
        let mut acc = 0.0;
        for c in self.coeffs.iter().rev() {
            acc = acc * r + c;
        }
        acc
    }

    pub fn norm_inf(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// First power with coefficient above `zero_thr`, with that coefficient.
    pub fn leading_power(&self, zero_thr: f64) -> Option<(usize, f64)> {
        self.coeffs
            .iter()
            .enumerate()
            .find(|(_, c)| c.abs() > zero_thr)
            .map(|(j, c)| (j, *c))
    }

    pub fn is_zero(&self, zero_thr: f64) -> bool {
        self.leading_power(zero_thr).is_none()
    }
}

/// Truncated product of radial series.
pub fn rs_mul(a: &RadialSeries, b: &RadialSeries) -> RadialSeries {
    a.mul(b)
}

/// Multiplicative inverse of a radial series.
pub fn rs_reciprocal(a: &RadialSeries, zero_thr: f64) -> Result<RadialSeries> {
    a.reciprocal(zero_thr)
}

// ---------------------------------------------------------------------------
// Complex radial series
// ---------------------------------------------------------------------------

/// Complex-valued radial series, the coefficient of one Fourier mode.
#[derive(Debug, Clone)]
pub struct CSeries {
    pub re: RadialSeries,
    pub im: RadialSeries,
}

impl CSeries {
    pub fn zero(trunc: usize) -> Self {
        CSeries { re: RadialSeries::zero(trunc), im: RadialSeries::zero(trunc) }
    }

    pub fn from_re(re: RadialSeries) -> Self {
        let trunc = re.trunc();
        CSeries { re, im: RadialSeries::zero(trunc) }
    }

    pub fn new(re: RadialSeries, im: RadialSeries) -> Self {
        CSeries { re, im }
    }

    pub fn trunc(&self) -> usize {
        self.re.trunc().min(self.im.trunc())
    }

    pub fn truncated(&self, trunc: usize) -> Self {
        CSeries { re: self.re.truncated(trunc), im: self.im.truncated(trunc) }
    }

    pub fn conj(&self) -> Self {
        CSeries { re: self.re.clone(), im: self.im.scale(-1.0) }
    }

    pub fn add(&self, other: &Self) -> Self {
        CSeries { re: self.re.add(&other.re), im: self.im.add(&other.im) }
    }

    pub fn scale(&self, factor: f64) -> Self {
        CSeries { re: self.re.scale(factor), im: self.im.scale(factor) }
    }

    /// Multiply by the complex scalar `c_re + i c_im`.
    pub fn scale_complex(&self, c_re: f64, c_im: f64) -> Self {
        CSeries {
            re: self.re.scale(c_re).sub(&self.im.scale(c_im)),
            im: self.re.scale(c_im).add(&self.im.scale(c_re)),
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        CSeries {
            re: self.re.mul(&other.re).sub(&self.im.mul(&other.im)),
            im: self.re.mul(&other.im).add(&self.im.mul(&other.re)),
        }
    }

    pub fn mul_rs(&self, rs: &RadialSeries) -> Self {
        CSeries { re: self.re.mul(rs), im: self.im.mul(rs) }
    }

    pub fn derivative_r(&self) -> Self {
        CSeries { re: self.re.derivative(), im: self.im.derivative() }
    }

    pub fn shift_down(&self, zero_thr: f64) -> Result<Self> {
        Ok(CSeries { re: self.re.shift_down(zero_thr)?, im: self.im.shift_down(zero_thr)? })
    }

    pub fn eval(&self, r: f64) -> (f64, f64) {
        (self.re.eval(r), self.im.eval(r))
    }

    pub fn norm_inf(&self) -> f64 {
        self.re.norm_inf().max(self.im.norm_inf())
    }
}

// ---------------------------------------------------------------------------
// Fourier series in (phi, S)
// ---------------------------------------------------------------------------

/// Differentiation variable for [`ft_diff`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    R,
    Phi,
    S,
}

fn canonical(k1: i32, k2: i32) -> bool {
    k1 > 0 || (k1 == 0 && k2 >= 0)
}

/// Real function `sum_{(k1,k2)} c_{k1,k2}(r) exp(i (k1 phi + k2 S))`.
///
/// Only modes with `k1 > 0`, or `k1 = 0 && k2 >= 0`, are stored; the
/// conjugate partner of each is implicit. All stored coefficients share the
/// truncation order `trunc`.
#[derive(Debug, Clone)]
pub struct FtSeries {
    modes: BTreeMap<(i32, i32), CSeries>,
    trunc: usize,
}

impl FtSeries {
    pub fn zero(trunc: usize) -> Self {
        FtSeries { modes: BTreeMap::new(), trunc }
    }

    pub fn trunc(&self) -> usize {
        self.trunc
    }

    /// Accumulate a mode coefficient, folding non-canonical keys onto their
    /// conjugate representative.
    pub fn add_mode(&mut self, k1: i32, k2: i32, c: &CSeries) {
        let (key, val) = if canonical(k1, k2) {
            ((k1, k2), c.clone())
        } else {
            ((-k1, -k2), c.conj())
        };
        let val = val.truncated(self.trunc);
        let trunc = self.trunc;
        self.modes
            .entry(key)
            .and_modify(|existing| *existing = existing.add(&val))
            .or_insert_with(|| CSeries::zero(trunc).add(&val));
    }

    /// Add `coeff(r) * cos(k1 phi + k2 S)`.
    pub fn add_cos(&mut self, k1: i32, k2: i32, coeff: &RadialSeries) {
        if k1 == 0 && k2 == 0 {
            self.add_mode(0, 0, &CSeries::from_re(coeff.clone()));
        } else {
            self.add_mode(k1, k2, &CSeries::from_re(coeff.scale(0.5)));
        }
    }

    /// Add `coeff(r) * sin(k1 phi + k2 S)`.
    pub fn add_sin(&mut self, k1: i32, k2: i32, coeff: &RadialSeries) {
        if k1 == 0 && k2 == 0 {
            return;
        }
        let half = RadialSeries::zero(coeff.trunc());
        self.add_mode(k1, k2, &CSeries::new(half, coeff.scale(-0.5)));
    }

    pub fn get(&self, k1: i32, k2: i32) -> Option<&CSeries> {
        self.modes.get(&(k1, k2))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(i32, i32), &CSeries)> {
        self.modes.iter()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    /// Drop modes whose coefficients are all exactly zero.
    pub fn pruned(mut self) -> Self {
        self.modes.retain(|_, c| c.norm_inf() != 0.0);
        self
    }

    pub fn add(&self, other: &Self) -> Self {
        let trunc = self.trunc.min(other.trunc);
        let mut out = FtSeries::zero(trunc);
        for (&(k1, k2), c) in &self.modes {
            out.add_mode(k1, k2, &c.truncated(trunc));
        }
        for (&(k1, k2), c) in &other.modes {
            out.add_mode(k1, k2, &c.truncated(trunc));
        }
        out.pruned()
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, factor: f64) -> Self {
        let mut out = FtSeries::zero(self.trunc);
        for (&(k1, k2), c) in &self.modes {
            out.add_mode(k1, k2, &c.scale(factor));
        }
        out
    }

    /// Multiply by a real radial series.
    pub fn mul_rs(&self, rs: &RadialSeries) -> Self {
        let trunc = self.trunc.min(rs.trunc());
        let mut out = FtSeries::zero(trunc);
        for (&(k1, k2), c) in &self.modes {
            out.add_mode(k1, k2, &c.mul_rs(rs));
        }
        out.pruned()
    }

    /// Expand to the full mode list including implicit conjugates.
    fn full_modes(&self) -> Vec<((i32, i32), CSeries)> {
        let mut out = Vec::with_capacity(2 * self.modes.len());
        for (&(k1, k2), c) in &self.modes {
            out.push(((k1, k2), c.clone()));
            if (k1, k2) != (0, 0) {
                out.push(((-k1, -k2), c.conj()));
            }
        }
        out
    }

    /// Product of two Fourier series; modes with `|k1| > k1_clip` are dropped.
    pub fn mul(&self, other: &Self, k1_clip: i32) -> Self {
        let trunc = self.trunc.min(other.trunc);
        let a = self.full_modes();
        let b = other.full_modes();
        let mut out = FtSeries::zero(trunc);
        for ((ak1, ak2), ac) in &a {
            for ((bk1, bk2), bc) in &b {
                let (k1, k2) = (ak1 + bk1, ak2 + bk2);
                if k1.abs() > k1_clip {
                    continue;
                }
                // Non-canonical products are exact conjugates of canonical
                // ones; computing only the canonical half avoids double work.
                if !canonical(k1, k2) {
                    continue;
                }
                out.add_mode(k1, k2, &ac.mul(bc));
            }
        }
        out.pruned()
    }

    /// Partial derivative in `r`, `phi`, or `S`.
    pub fn diff(&self, var: Var) -> Self {
        match var {
            Var::R => {
                let trunc = self.trunc.saturating_sub(1);
                let mut out = FtSeries::zero(trunc);
                for (&(k1, k2), c) in &self.modes {
                    out.add_mode(k1, k2, &c.derivative_r());
                }
                out.pruned()
            }
            Var::Phi => {
                let mut out = FtSeries::zero(self.trunc);
                for (&(k1, k2), c) in &self.modes {
                    out.add_mode(k1, k2, &c.scale_complex(0.0, k1 as f64));
                }
                out.pruned()
            }
            Var::S => {
                let mut out = FtSeries::zero(self.trunc);
                for (&(k1, k2), c) in &self.modes {
                    out.add_mode(k1, k2, &c.scale_complex(0.0, k2 as f64));
                }
                out.pruned()
            }
        }
    }

    /// Mean over both angles: the (0,0) coefficient, which must be real.
    pub fn average(&self, zero_thr: f64) -> Result<RadialSeries> {
        match self.modes.get(&(0, 0)) {
            None => Ok(RadialSeries::zero(self.trunc)),
            Some(c) => {
                let imag_norm = c.im.norm_inf();
                if imag_norm > zero_thr {
                    return Err(Error::NonRealMean { imag_norm });
                }
                Ok(c.re.clone())
            }
        }
    }

    /// Error unless the mean is negligible.
    pub fn check_mean_free(&self, zero_thr: f64) -> Result<()> {
        if let Some(c) = self.modes.get(&(0, 0)) {
            let norm = c.norm_inf();
            if norm > zero_thr {
                return Err(Error::NonzeroMean { norm });
            }
        }
        Ok(())
    }

    /// Remove the (0,0) mode.
    pub fn zero_mean(mut self) -> Self {
        self.modes.remove(&(0, 0));
        self
    }

    /// Divide by `r`: every mode must vanish at `r = 0`.
    pub fn div_r(&self, zero_thr: f64) -> Result<Self> {
        let trunc = self.trunc.saturating_sub(1);
        let mut out = FtSeries::zero(trunc);
        for (&(k1, k2), c) in &self.modes {
            let shifted = c.shift_down(zero_thr).map_err(|e| match e {
                Error::DivisionByR { coeff, .. } => Error::DivisionByR { k1, k2, coeff },
                other => other,
            })?;
            out.add_mode(k1, k2, &shifted);
        }
        Ok(out.pruned())
    }

    /// Point evaluation.
    pub fn eval(&self, r: f64, phi: f64, s: f64) -> f64 {
        let mut acc = 0.0;
        for (&(k1, k2), c) in &self.modes {
            let (re, im) = c.eval(r);
            if (k1, k2) == (0, 0) {
                acc += re;
            } else {
                let theta = k1 as f64 * phi + k2 as f64 * s;
                acc += 2.0 * (re * theta.cos() - im * theta.sin());
            }
        }
        acc
    }

    pub fn norm_inf(&self) -> f64 {
        self.modes.values().fold(0.0, |m, c| m.max(c.norm_inf()))
    }

    /// Largest constant-in-`r` coefficient over all modes; zero iff the
    /// function is O(r).
    pub fn max_const_coeff(&self) -> f64 {
        self.modes
            .values()
            .fold(0.0, |m: f64, c| m.max(c.re.coeffs[0].abs()).max(c.im.coeffs[0].abs()))
    }

    /// All stored `(k1, k2)` keys.
    pub fn mode_keys(&self) -> Vec<(i32, i32)> {
        self.modes.keys().copied().collect()
    }
}

/// Product of Fourier series with the default band limit.
pub fn ft_mul(a: &FtSeries, b: &FtSeries) -> FtSeries {
    a.mul(b, tol::K1_CLIP)
}

/// Partial derivative of a Fourier series.
pub fn ft_diff(a: &FtSeries, var: Var) -> FtSeries {
    a.diff(var)
}

/// Mean over both angles.
pub fn ft_average(a: &FtSeries, zero_thr: f64) -> Result<RadialSeries> {
    a.average(zero_thr)
}

/// Point evaluation of a Fourier series.
pub fn ft_eval(a: &FtSeries, r: f64, phi: f64, s: f64) -> f64 {
    a.eval(r, phi, s)
}

// ---------------------------------------------------------------------------
// Log-polynomials and the scalar linear ODE
// ---------------------------------------------------------------------------

/// Polynomial in `tau = log t`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogPolynomial {
    /// Coefficient of `tau^j` at index `j`; never empty.
    pub coeffs: Vec<f64>,
}

impl LogPolynomial {
    pub fn zero() -> Self {
        LogPolynomial { coeffs: vec![0.0] }
    }

    pub fn constant(value: f64) -> Self {
        LogPolynomial { coeffs: vec![value] }
    }

    pub fn from_coeffs(coeffs: Vec<f64>) -> Self {
        assert!(!coeffs.is_empty());
        LogPolynomial { coeffs }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn eval(&self, tau: f64) -> f64 {
        let mut acc = 0.0;
        for c in self.coeffs.iter().rev() {
            acc = acc * tau + c;
        }
        acc
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        let mut c = vec![0.0; n];
        for (j, a) in self.coeffs.iter().enumerate() {
            c[j] += a;
        }
        for (j, b) in other.coeffs.iter().enumerate() {
            c[j] += b;
        }
        LogPolynomial { coeffs: c }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, factor: f64) -> Self {
        LogPolynomial { coeffs: self.coeffs.iter().map(|c| c * factor).collect() }
    }

    /// Product; fails if the degree would exceed the cap.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        let deg = self.degree() + other.degree();
        if deg > tol::LOG_DEGREE_CAP {
            return Err(Error::NoConvergence {
                what: format!("log-polynomial degree {deg} exceeds cap {}", tol::LOG_DEGREE_CAP),
            });
        }
        let mut c = vec![0.0; deg + 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                c[i + j] += a * b;
            }
        }
        Ok(LogPolynomial { coeffs: c })
    }

    /// d/dtau.
    pub fn derivative(&self) -> Self {
        if self.coeffs.len() == 1 {
            return Self::zero();
        }
        let c = (1..self.coeffs.len()).map(|j| self.coeffs[j] * j as f64).collect();
        LogPolynomial { coeffs: c }
    }

    /// Antiderivative vanishing at `tau = 0`; fails at the degree cap.
    pub fn antiderivative(&self) -> Result<Self> {
        if self.degree() + 1 > tol::LOG_DEGREE_CAP {
            return Err(Error::NoConvergence {
                what: format!(
                    "antiderivative degree {} exceeds cap {}",
                    self.degree() + 1,
                    tol::LOG_DEGREE_CAP
                ),
            });
        }
        let mut c = vec![0.0; self.coeffs.len() + 1];
        for (j, a) in self.coeffs.iter().enumerate() {
            c[j + 1] = a / (j as f64 + 1.0);
        }
        Ok(LogPolynomial { coeffs: c })
    }

    pub fn norm_inf(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn is_zero(&self, zero_thr: f64) -> bool {
        self.norm_inf() <= zero_thr
    }

    /// Drop trailing coefficients that are exactly zero.
    pub fn trimmed(mut self) -> Self {
        while self.coeffs.len() > 1 && *self.coeffs.last().unwrap() == 0.0 {
            self.coeffs.pop();
        }
        self
    }
}

/// Solution branch for the scalar linear ODE in log time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OdeCase {
    /// `mu != 0`, solution is the unique polynomial particular solution.
    Algebraic,
    /// `mu = 0`, solution is the antiderivative from `tau_star`.
    Marginal,
    /// `mu != 0`; same polynomial particular solution as `Algebraic`,
    /// obtained from the integral representation.
    Integral,
}

/// Pick the branch from the coefficient: `Marginal` inside the zero
/// threshold, `Algebraic` for negative, `Integral` for positive.
pub fn lp_case_for(mu: f64, zero_thr: f64) -> OdeCase {
    if mu.abs() <= zero_thr {
        OdeCase::Marginal
    } else if mu < 0.0 {
        OdeCase::Algebraic
    } else {
        OdeCase::Integral
    }
}

/// Solve `xi'(tau) - mu * xi(tau) = b(tau)` for a polynomial `xi`.
///
/// For `mu != 0` the unique polynomial solution is
/// `xi = -(1/mu) * sum_i b^(i) / mu^i`. For the marginal case `mu = 0`
/// the solution is the antiderivative of `b` vanishing at `tau_star`.
pub fn lp_solve_linear_ode(
    mu: f64,
    b: &LogPolynomial,
    case: OdeCase,
    tau_star: f64,
) -> Result<LogPolynomial> {
    match case {
        OdeCase::Algebraic | OdeCase::Integral => {
            if mu.abs() <= tol::ZERO_COEFF {
                return Err(Error::DegenerateCoefficient {
                    what: format!("linear ODE coefficient {mu:e} too close to zero"),
                });
            }
            let mut acc = LogPolynomial::zero();
            let mut term = b.clone();
            let mut factor = -1.0 / mu;
            loop {
                acc = acc.add(&term.scale(factor));
                if term.degree() == 0 {
                    break;
                }
                term = term.derivative();
                factor /= mu;
            }
            Ok(acc.trimmed())
        }
        OdeCase::Marginal => {
            let anti = b.antiderivative()?;
            let shift = anti.eval(tau_star);
            Ok(anti.sub(&LogPolynomial::constant(shift)).trimmed())
        }
    }
}

// ---------------------------------------------------------------------------
// Graded expansions in the time scale eps = t^(-1/q)
// ---------------------------------------------------------------------------

/// Collection of Fourier series graded by the power of `t^(-1/q)`.
#[derive(Debug, Clone)]
pub struct EpsExpansion {
    pub terms: BTreeMap<usize, FtSeries>,
    pub q: u32,
}

impl EpsExpansion {
    pub fn new(q: u32) -> Self {
        EpsExpansion { terms: BTreeMap::new(), q }
    }

    pub fn insert(&mut self, order: usize, term: FtSeries) {
        if term.is_empty() {
            return;
        }
        match self.terms.get_mut(&order) {
            Some(existing) => *existing = existing.add(&term),
            None => {
                self.terms.insert(order, term);
            }
        }
    }

    pub fn get(&self, order: usize) -> Option<&FtSeries> {
        self.terms.get(&order)
    }

    pub fn max_order(&self) -> usize {
        self.terms.keys().next_back().copied().unwrap_or(0)
    }

    /// Graded product, truncated at `max_order`.
    pub fn mul(&self, other: &Self, max_order: usize, k1_clip: i32) -> Self {
        let mut out = EpsExpansion::new(self.q);
        for (&i, a) in &self.terms {
            for (&j, b) in &other.terms {
                if i + j > max_order {
                    continue;
                }
                out.insert(i + j, a.mul(b, k1_clip));
            }
        }
        out
    }

    /// Point evaluation of the full sum at time `t`.
    pub fn eval(&self, r: f64, phi: f64, s: f64, t: f64) -> f64 {
        let eps = t.powf(-1.0 / self.q as f64);
        let mut acc = 0.0;
        for (&k, term) in &self.terms {
            acc += eps.powi(k as i32) * term.eval(r, phi, s);
        }
        acc
    }
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const TOL: f64 = 1e-12;

    fn random_rs(rng: &mut ChaCha8Rng, trunc: usize) -> RadialSeries {
        RadialSeries::from_coeffs((0..=trunc).map(|_| rng.gen_range(-1.0..1.0)).collect())
    }

    fn random_cs(rng: &mut ChaCha8Rng, trunc: usize) -> CSeries {
        CSeries::new(random_rs(rng, trunc), random_rs(rng, trunc))
    }

    fn random_ft(rng: &mut ChaCha8Rng, trunc: usize) -> FtSeries {
        let mut ft = FtSeries::zero(trunc);
        ft.add_mode(0, 0, &CSeries::from_re(random_rs(rng, trunc)));
        for &(k1, k2) in &[(1, 0), (0, 1), (2, -1), (3, 2)] {
            ft.add_mode(k1, k2, &random_cs(rng, trunc));
        }
        ft
    }

    #[test]
    fn radial_ring_axioms() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let a = random_rs(&mut rng, 6);
            let b = random_rs(&mut rng, 6);
            let c = random_rs(&mut rng, 6);
            let left = a.add(&b).mul(&c);
            let right = a.mul(&c).add(&b.mul(&c));
            for j in 0..=6 {
                assert!((left.coeffs[j] - right.coeffs[j]).abs() < TOL);
            }
            let ab = a.mul(&b);
            let ba = b.mul(&a);
            for j in 0..=6 {
                assert!((ab.coeffs[j] - ba.coeffs[j]).abs() < TOL);
            }
            let assoc_l = a.mul(&b).mul(&c);
            let assoc_r = a.mul(&b.mul(&c));
            for j in 0..=6 {
                assert!((assoc_l.coeffs[j] - assoc_r.coeffs[j]).abs() < TOL);
            }
        }
    }

    #[test]
    fn radial_reciprocal_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..100 {
            let mut a = random_rs(&mut rng, 8);
            a.coeffs[0] = rng.gen_range(0.5..1.5) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let inv = a.reciprocal(tol::ZERO_COEFF).unwrap();
            let prod = a.mul(&inv);
            assert!((prod.coeffs[0] - 1.0).abs() < 1e-10);
            for j in 1..=8 {
                assert!(prod.coeffs[j].abs() < 1e-10, "order {j}: {}", prod.coeffs[j]);
            }
        }
    }

    #[test]
    fn radial_reciprocal_rejects_zero_constant() {
        let a = RadialSeries::from_coeffs(vec![0.0, 1.0]);
        assert!(matches!(
            a.reciprocal(tol::ZERO_COEFF),
            Err(Error::ZeroConstantTerm { .. })
        ));
    }

    #[test]
    fn radial_shift_down_requires_vanishing_constant() {
        let ok = RadialSeries::from_coeffs(vec![0.0, 2.0, 3.0]);
        let shifted = ok.shift_down(tol::ZERO_COEFF).unwrap();
        assert_eq!(shifted.coeffs, vec![2.0, 3.0]);
        let bad = RadialSeries::from_coeffs(vec![0.5, 2.0]);
        assert!(matches!(
            bad.shift_down(tol::ZERO_COEFF),
            Err(Error::DivisionByR { .. })
        ));
    }

    #[test]
    fn product_eval_consistency() {
        // Inputs occupy only half the truncation budget so the truncated
        // product is exact and must match pointwise multiplication.
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..100 {
            let a = random_rs(&mut rng, 4).padded(8);
            let b = random_rs(&mut rng, 4).padded(8);
            let prod = a.mul(&b);
            let r = rng.gen_range(-1.0..1.0);
            assert!((prod.eval(r) - a.eval(r) * b.eval(r)).abs() < TOL);
        }
    }

    /// Independent evaluator: expand into the full complex mode list and sum
    /// complex exponentials directly.
    fn ft_eval_oracle(ft: &FtSeries, r: f64, phi: f64, s: f64) -> f64 {
        let mut acc_re = 0.0;
        for ((k1, k2), c) in ft.full_modes() {
            let (cre, cim) = c.eval(r);
            let theta = k1 as f64 * phi + k2 as f64 * s;
            acc_re += cre * theta.cos() - cim * theta.sin();
        }
        acc_re
    }

    #[test]
    fn ft_eval_matches_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..100 {
            let ft = random_ft(&mut rng, 6);
            let r = rng.gen_range(-1.0..1.0);
            let phi = rng.gen_range(0.0..std::f64::consts::TAU);
            let s = rng.gen_range(0.0..std::f64::consts::TAU);
            let direct = ft.eval(r, phi, s);
            let oracle = ft_eval_oracle(&ft, r, phi, s);
            assert!((direct - oracle).abs() < 1e-11, "{direct} vs {oracle}");
        }
    }

    #[test]
    fn ft_product_matches_pointwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        for _ in 0..100 {
            let a = {
                let mut ft = FtSeries::zero(8);
                ft.add_mode(0, 0, &CSeries::from_re(random_rs(&mut rng, 3).padded(8)));
                ft.add_mode(1, 0, &random_cs(&mut rng, 3).truncated(3));
                let c = random_cs(&mut rng, 3);
                ft.add_mode(
                    2,
                    -1,
                    &CSeries::new(c.re.padded(8), c.im.padded(8)),
                );
                ft
            };
            // Rebuild with padded coefficients so products stay exact.
            let mut a_pad = FtSeries::zero(8);
            for (&(k1, k2), c) in a.iter() {
                a_pad.add_mode(k1, k2, &CSeries::new(c.re.padded(8), c.im.padded(8)));
            }
            let mut b_pad = FtSeries::zero(8);
            b_pad.add_mode(0, 1, &random_cs(&mut rng, 3));
            b_pad.add_mode(1, 1, &random_cs(&mut rng, 3));
            let mut b_full = FtSeries::zero(8);
            for (&(k1, k2), c) in b_pad.iter() {
                b_full.add_mode(k1, k2, &CSeries::new(c.re.padded(8), c.im.padded(8)));
            }
            let prod = a_pad.mul(&b_full, tol::K1_CLIP);
            let r = rng.gen_range(-0.9..0.9);
            let phi = rng.gen_range(0.0..std::f64::consts::TAU);
            let s = rng.gen_range(0.0..std::f64::consts::TAU);
            let lhs = prod.eval(r, phi, s);
            let rhs = a_pad.eval(r, phi, s) * b_full.eval(r, phi, s);
            assert!((lhs - rhs).abs() < 1e-10, "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn ft_diff_phi_and_s_are_mean_free() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        for _ in 0..20 {
            let ft = random_ft(&mut rng, 5);
            for var in [Var::Phi, Var::S] {
                let d = ft.diff(var);
                let mean = d.average(tol::ZERO_COEFF).unwrap();
                assert!(mean.norm_inf() <= tol::ZERO_COEFF);
            }
        }
    }

    #[test]
    fn ft_diff_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let ft = random_ft(&mut rng, 5);
        let (r, phi, s) = (0.4, 1.1, 2.3);
        let h = 1e-6;
        let dphi = (ft.eval(r, phi + h, s) - ft.eval(r, phi - h, s)) / (2.0 * h);
        assert!((ft.diff(Var::Phi).eval(r, phi, s) - dphi).abs() < 1e-6);
        let ds = (ft.eval(r, phi, s + h) - ft.eval(r, phi, s - h)) / (2.0 * h);
        assert!((ft.diff(Var::S).eval(r, phi, s) - ds).abs() < 1e-6);
        let dr = (ft.eval(r + h, phi, s) - ft.eval(r - h, phi, s)) / (2.0 * h);
        assert!((ft.diff(Var::R).eval(r, phi, s) - dr).abs() < 1e-4);
    }

    #[test]
    fn ft_cos_sin_builders() {
        let coeff = RadialSeries::from_coeffs(vec![0.0, 1.0, 0.5]);
        let mut ft = FtSeries::zero(2);
        ft.add_cos(2, 0, &coeff);
        ft.add_sin(1, -1, &coeff);
        let (r, phi, s): (f64, f64, f64) = (0.7, 0.9, 1.7);
        let expected = coeff.eval(r) * ((2.0 * phi).cos() + (phi - s).sin());
        assert!((ft.eval(r, phi, s) - expected).abs() < TOL);
    }

    #[test]
    fn lp_solve_substitution() {
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        for _ in 0..100 {
            let b = LogPolynomial::from_coeffs((0..=4).map(|_| rng.gen_range(-1.0..1.0)).collect());
            let mu = rng.gen_range(0.3..2.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let case = lp_case_for(mu, tol::ZERO_COEFF);
            let xi = lp_solve_linear_ode(mu, &b, case, 0.0).unwrap();
            // xi' - mu xi - b must vanish coefficient-wise.
            let resid = xi.derivative().sub(&xi.scale(mu)).sub(&b);
            assert!(resid.norm_inf() < 1e-10, "residual {}", resid.norm_inf());
        }
    }

    #[test]
    fn lp_solve_marginal_integrates_from_tau_star() {
        let b = LogPolynomial::from_coeffs(vec![2.0, -1.0, 3.0]);
        let tau_star = 1.75;
        let xi = lp_solve_linear_ode(0.0, &b, OdeCase::Marginal, tau_star).unwrap();
        let resid = xi.derivative().sub(&b);
        assert!(resid.norm_inf() < TOL);
        assert!(xi.eval(tau_star).abs() < TOL);
    }

    #[test]
    fn lp_degree_cap_enforced() {
        let b = LogPolynomial::from_coeffs(vec![1.0; tol::LOG_DEGREE_CAP + 1]);
        assert!(matches!(
            b.antiderivative(),
            Err(Error::NoConvergence { .. })
        ));
    }

    #[test]
    fn eps_expansion_graded_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let mut a = EpsExpansion::new(2);
        a.insert(1, random_ft(&mut rng, 6));
        a.insert(2, random_ft(&mut rng, 6));
        let mut b = EpsExpansion::new(2);
        b.insert(1, random_ft(&mut rng, 6));
        let prod = a.mul(&b, 3, tol::K1_CLIP);
        assert!(prod.get(2).is_some());
        assert!(prod.get(3).is_some());
        assert!(prod.get(4).is_none());
    }
}
