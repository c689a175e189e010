//! Truncated Taylor series ("jets") in one and two variables.
//!
//! A [`Jet2`] holds the coefficients `c[i][j]` of `Σ c_ij x^i μ^j` for
//! `i + j <= degree`. All arithmetic truncates silently at the jet degree, so
//! results are exact through that degree for analytic inputs. Derivatives at
//! the expansion point are recovered as `i! j! c_ij`.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use thiserror::Error;

/// Default truncation degree; enough for every coefficient formula that
/// involves fifth derivatives plus the composition used for second iterates.
pub const DEFAULT_DEGREE: usize = 7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum JetError {
    #[error("jet degree mismatch: {0} vs {1}")]
    DegreeMismatch(usize, usize),
    #[error("jet degree must be at least 1")]
    ZeroDegree,
    #[error("non-finite jet coefficient at ({0}, {1})")]
    NonFinite(usize, usize),
    #[error("{0} is not analytic at the expansion point (constant term {1})")]
    NotAnalytic(&'static str, f64),
    #[error("inner jet must have zero constant term for composition (found {0})")]
    NonZeroConstant(f64),
}

#[inline]
fn tri_index(i: usize, j: usize) -> usize {
    let t = i + j;
    t * (t + 1) / 2 + j
}

#[inline]
fn tri_len(degree: usize) -> usize {
    (degree + 1) * (degree + 2) / 2
}

pub(crate) fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// Bivariate truncated Taylor series about `(x, μ) = (0, 0)`.
#[derive(Clone, PartialEq)]
pub struct Jet2 {
    degree: usize,
    coeffs: Vec<f64>,
}

impl Jet2 {
    pub fn zero(degree: usize) -> Self {
        Self {
            degree,
            coeffs: vec![0.0; tri_len(degree)],
        }
    }

    pub fn constant(degree: usize, c: f64) -> Self {
        let mut j = Self::zero(degree);
        j.coeffs[0] = c;
        j
    }

    /// The coordinate `x` (plus an optional constant offset).
    pub fn var_x(degree: usize) -> Self {
        let mut j = Self::zero(degree);
        if degree >= 1 {
            j.coeffs[tri_index(1, 0)] = 1.0;
        }
        j
    }

    pub fn var_mu(degree: usize) -> Self {
        let mut j = Self::zero(degree);
        if degree >= 1 {
            j.coeffs[tri_index(0, 1)] = 1.0;
        }
        j
    }

    /// Builds a jet from `((i, j), c_ij)` terms. Terms beyond the degree are dropped.
    pub fn from_terms<I>(degree: usize, terms: I) -> Result<Self, JetError>
    where
        I: IntoIterator<Item = ((usize, usize), f64)>,
    {
        if degree == 0 {
            return Err(JetError::ZeroDegree);
        }
        let mut j = Self::zero(degree);
        for ((a, b), c) in terms {
            if !c.is_finite() {
                return Err(JetError::NonFinite(a, b));
            }
            if a + b <= degree {
                j.coeffs[tri_index(a, b)] += c;
            }
        }
        Ok(j)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Coefficient of `x^i μ^j`; zero beyond the truncation degree.
    pub fn coeff(&self, i: usize, j: usize) -> f64 {
        if i + j > self.degree {
            0.0
        } else {
            self.coeffs[tri_index(i, j)]
        }
    }

    pub fn set_coeff(&mut self, i: usize, j: usize, c: f64) {
        assert!(i + j <= self.degree, "({i}, {j}) beyond jet degree {}", self.degree);
        self.coeffs[tri_index(i, j)] = c;
    }

    pub fn constant_term(&self) -> f64 {
        self.coeffs[0]
    }

    /// Partial derivative `∂^{i+j} f / ∂x^i ∂μ^j` at the expansion point.
    pub fn deriv(&self, i: usize, j: usize) -> f64 {
        factorial(i) * factorial(j) * self.coeff(i, j)
    }

    /// Every stored derivative, ordered by total degree then μ-order.
    pub fn derivs(&self) -> Vec<((usize, usize), f64)> {
        self.terms().map(|((i, j), _)| ((i, j), self.deriv(i, j))).collect()
    }

    /// Iterates `((i, j), c_ij)` over the triangular table.
    pub fn terms(&self) -> impl Iterator<Item = ((usize, usize), f64)> + '_ {
        (0..=self.degree).flat_map(move |t| {
            (0..=t).map(move |j| ((t - j, j), self.coeffs[tri_index(t - j, j)]))
        })
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    fn check_degree(&self, other: &Self) -> Result<(), JetError> {
        if self.degree != other.degree {
            Err(JetError::DegreeMismatch(self.degree, other.degree))
        } else {
            Ok(())
        }
    }

    pub fn try_add(&self, other: &Self) -> Result<Self, JetError> {
        self.check_degree(other)?;
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect();
        Ok(Self { degree: self.degree, coeffs })
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self, JetError> {
        self.check_degree(other)?;
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a - b).collect();
        Ok(Self { degree: self.degree, coeffs })
    }

    /// Truncated Cauchy product.
    pub fn try_mul(&self, other: &Self) -> Result<Self, JetError> {
        self.check_degree(other)?;
        let d = self.degree;
        let mut out = Self::zero(d);
        for ta in 0..=d {
            for ja in 0..=ta {
                let a = self.coeffs[tri_index(ta - ja, ja)];
                if a == 0.0 {
                    continue;
                }
                for tb in 0..=(d - ta) {
                    for jb in 0..=tb {
                        let b = other.coeffs[tri_index(tb - jb, jb)];
                        if b != 0.0 {
                            out.coeffs[tri_index(ta - ja + tb - jb, ja + jb)] += a * b;
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            degree: self.degree,
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    pub fn add_constant(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.coeffs[0] += c;
        out
    }

    /// Evaluates the truncated polynomial at `(x, μ)`.
    pub fn eval(&self, x: f64, mu: f64) -> f64 {
        // Horner in x over μ-polynomials.
        let mut acc = 0.0;
        for i in (0..=self.degree).rev() {
            let mut inner = 0.0;
            for j in (0..=(self.degree - i)).rev() {
                inner = inner * mu + self.coeffs[tri_index(i, j)];
            }
            acc = acc * x + inner;
        }
        acc
    }

    /// `∂/∂x` of the truncated polynomial; the result keeps the same degree
    /// with a zero top-degree shell.
    pub fn diff_x(&self) -> Self {
        let mut out = Self::zero(self.degree);
        for ((i, j), c) in self.terms() {
            if i >= 1 {
                out.coeffs[tri_index(i - 1, j)] = c * i as f64;
            }
        }
        out
    }

    /// Composes a univariate power series `Σ a_k t^k` with `self - c0`, where
    /// `a_k` are the Taylor coefficients of the outer function about `c0`, the
    /// constant term of `self`.
    pub fn compose_series(&self, outer: &[f64]) -> Self {
        let c0 = self.constant_term();
        let t = self.add_constant(-c0);
        let n = outer.len().min(self.degree + 1);
        let mut acc = Self::constant(self.degree, outer.get(n.wrapping_sub(1)).copied().unwrap_or(0.0));
        for k in (0..n.saturating_sub(1)).rev() {
            acc = (&acc * &t).add_constant(outer[k]);
        }
        acc
    }

    /// Substitutes `inner(x, μ)` for `x` in `self`, keeping `μ`:
    /// `(self ∘ inner)(x, μ) = self(inner(x, μ), μ)`.
    pub fn compose_x(&self, inner: &Self) -> Result<Self, JetError> {
        self.check_degree(inner)?;
        let c0 = inner.constant_term();
        if c0 != 0.0 {
            return Err(JetError::NonZeroConstant(c0));
        }
        let d = self.degree;
        let mu = Self::var_mu(d);
        let mut mu_pows = vec![Self::constant(d, 1.0)];
        for k in 1..=d {
            mu_pows.push(&mu_pows[k - 1] * &mu);
        }
        let mut out = Self::zero(d);
        let mut inner_pow = Self::constant(d, 1.0);
        for i in 0..=d {
            for j in 0..=(d - i) {
                let c = self.coeff(i, j);
                if c != 0.0 {
                    out = &out + &(&inner_pow * &mu_pows[j]).scale(c);
                }
            }
            inner_pow = &inner_pow * inner;
        }
        Ok(out)
    }

    /// Multiplicative inverse; requires a non-zero constant term.
    pub fn recip(&self) -> Result<Self, JetError> {
        let c = self.constant_term();
        if c == 0.0 {
            return Err(JetError::NotAnalytic("1/(.)", c));
        }
        let coeffs: Vec<f64> = (0..=self.degree)
            .map(|k| if k % 2 == 0 { 1.0 } else { -1.0 } / c.powi(k as i32 + 1))
            .collect();
        Ok(self.compose_series(&coeffs))
    }

    pub fn try_div(&self, other: &Self) -> Result<Self, JetError> {
        self.try_mul(&other.recip()?)
    }

    pub fn powi(&self, n: i32) -> Result<Self, JetError> {
        if n < 0 {
            return self.recip()?.powi(-n);
        }
        let mut base = self.clone();
        let mut acc = Self::constant(self.degree, 1.0);
        let mut e = n as u32;
        while e > 0 {
            if e & 1 == 1 {
                acc = &acc * &base;
            }
            e >>= 1;
            if e > 0 {
                base = &base * &base;
            }
        }
        Ok(acc)
    }

    pub fn exp(&self) -> Self {
        let e = self.constant_term().exp();
        let coeffs: Vec<f64> = (0..=self.degree).map(|k| e / factorial(k)).collect();
        self.compose_series(&coeffs)
    }

    pub fn ln(&self) -> Result<Self, JetError> {
        let c = self.constant_term();
        if c <= 0.0 {
            return Err(JetError::NotAnalytic("log", c));
        }
        let mut coeffs = vec![c.ln()];
        for k in 1..=self.degree {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            coeffs.push(sign / (k as f64 * c.powi(k as i32)));
        }
        Ok(self.compose_series(&coeffs))
    }

    pub fn sqrt(&self) -> Result<Self, JetError> {
        let c = self.constant_term();
        if c <= 0.0 {
            return Err(JetError::NotAnalytic("sqrt", c));
        }
        // sqrt(c + t) = sqrt(c) Σ binom(1/2, k) (t/c)^k
        let mut coeffs = Vec::with_capacity(self.degree + 1);
        let mut binom = 1.0;
        for k in 0..=self.degree {
            if k > 0 {
                binom *= (0.5 - (k as f64 - 1.0)) / k as f64;
            }
            coeffs.push(c.sqrt() * binom / c.powi(k as i32));
        }
        Ok(self.compose_series(&coeffs))
    }

    fn cyclic(&self, values: [f64; 4]) -> Self {
        let coeffs: Vec<f64> = (0..=self.degree).map(|k| values[k % 4] / factorial(k)).collect();
        self.compose_series(&coeffs)
    }

    pub fn sin(&self) -> Self {
        let (s, c) = self.constant_term().sin_cos();
        self.cyclic([s, c, -s, -c])
    }

    pub fn cos(&self) -> Self {
        let (s, c) = self.constant_term().sin_cos();
        self.cyclic([c, -s, -c, s])
    }

    pub fn tan(&self) -> Result<Self, JetError> {
        self.sin().try_div(&self.cos())
    }

    pub fn sinh(&self) -> Self {
        let a = self.constant_term();
        self.cyclic([a.sinh(), a.cosh(), a.sinh(), a.cosh()])
    }

    pub fn cosh(&self) -> Self {
        let a = self.constant_term();
        self.cyclic([a.cosh(), a.sinh(), a.cosh(), a.sinh()])
    }

    pub fn tanh(&self) -> Result<Self, JetError> {
        self.sinh().try_div(&self.cosh())
    }

    /// Restricts to `μ = 0`: the univariate series in `x`.
    pub fn x_slice(&self) -> Jet1 {
        Jet1::new((0..=self.degree).map(|i| self.coeff(i, 0)).collect())
    }

    /// Reflects `x → -x` and negates the value: `c_ij → (-1)^{i+1} c_ij`.
    pub fn flip_x(&self) -> Self {
        let mut out = self.clone();
        for ((i, j), c) in self.terms() {
            out.coeffs[tri_index(i, j)] = if i % 2 == 0 { -c } else { c };
        }
        out
    }

    /// Reflects `μ → -μ`: `c_ij → (-1)^j c_ij`.
    pub fn flip_mu(&self) -> Self {
        let mut out = self.clone();
        for ((i, j), c) in self.terms() {
            out.coeffs[tri_index(i, j)] = if j % 2 == 0 { c } else { -c };
        }
        out
    }
}

impl fmt::Debug for Jet2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Jet2(deg {}) [", self.degree)?;
        let mut first = true;
        for ((i, j), c) in self.terms() {
            if c != 0.0 {
                if !first {
                    write!(f, ", ")?;
                }
                write!(f, "x^{i}mu^{j}: {c}")?;
                first = false;
            }
        }
        write!(f, "]")
    }
}

impl Add for &Jet2 {
    type Output = Jet2;
    fn add(self, rhs: &Jet2) -> Jet2 {
        self.try_add(rhs).expect("jet degree mismatch")
    }
}

impl Sub for &Jet2 {
    type Output = Jet2;
    fn sub(self, rhs: &Jet2) -> Jet2 {
        self.try_sub(rhs).expect("jet degree mismatch")
    }
}

impl Mul for &Jet2 {
    type Output = Jet2;
    fn mul(self, rhs: &Jet2) -> Jet2 {
        self.try_mul(rhs).expect("jet degree mismatch")
    }
}

impl Neg for &Jet2 {
    type Output = Jet2;
    fn neg(self) -> Jet2 {
        self.scale(-1.0)
    }
}

/// Univariate truncated series, used for branch locations and multipliers
/// expanded in the branch parameter (`m = √μ` or `μ` itself).
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct Jet1 {
    coeffs: Vec<f64>,
}

impl Jet1 {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn coeff(&self, k: usize) -> f64 {
        self.coeffs.get(k).copied().unwrap_or(0.0)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c)
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }
}
