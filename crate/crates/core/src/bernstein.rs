//! Bernstein polynomial algebra.
//!
//! Indices follow the 1-based convention `1 <= i <= mu + 1`, so that
//! `B_i^mu(xi) = binom(mu, i-1) xi^(i-1) (1-xi)^(mu-i+1)`.

use crate::error::{Error, Result};

/// Largest degree covered by the cached binomial table.
pub const MAX_BINOMIAL_DEGREE: usize = 12;

const fn pascal_table() -> [[u64; MAX_BINOMIAL_DEGREE + 1]; MAX_BINOMIAL_DEGREE + 1] {
    let mut t = [[0u64; MAX_BINOMIAL_DEGREE + 1]; MAX_BINOMIAL_DEGREE + 1];
    let mut n = 0;
    while n <= MAX_BINOMIAL_DEGREE {
        t[n][0] = 1;
        let mut k = 1;
        while k <= n {
            t[n][k] = t[n - 1][k - 1] + if k < n { t[n - 1][k] } else { 0 };
            k += 1;
        }
        n += 1;
    }
    t
}

static PASCAL: [[u64; MAX_BINOMIAL_DEGREE + 1]; MAX_BINOMIAL_DEGREE + 1] = pascal_table();

/// Binomial coefficient `binom(n, k)` from the Pascal table, as `f64`.
///
/// Returns 0 for `k > n`. Panics if `n` exceeds [`MAX_BINOMIAL_DEGREE`].
#[inline]
pub fn binomial(n: usize, k: usize) -> f64 {
    assert!(n <= MAX_BINOMIAL_DEGREE, "binomial table only covers degree <= {MAX_BINOMIAL_DEGREE}");
    if k > n {
        0.0
    } else {
        PASCAL[n][k] as f64
    }
}

/// A univariate Bernstein basis function, identified by its 1-based index and degree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BernsteinIndex {
    i: usize,
    mu: usize,
}

impl BernsteinIndex {
    pub fn new(i: usize, mu: usize) -> Result<Self> {
        if i == 0 || i > mu + 1 {
            return Err(Error::InvalidArgument(format!(
                "Bernstein index {i} out of range 1..={} for degree {mu}",
                mu + 1
            )));
        }
        if mu > MAX_BINOMIAL_DEGREE {
            return Err(Error::InvalidArgument(format!(
                "Bernstein degree {mu} exceeds supported maximum {MAX_BINOMIAL_DEGREE}"
            )));
        }
        Ok(Self { i, mu })
    }

    #[inline]
    pub fn index(&self) -> usize {
        self.i
    }

    #[inline]
    pub fn degree(&self) -> usize {
        self.mu
    }
}

/// Evaluates `B_i^mu(xi)`.
pub fn bernstein_eval(idx: BernsteinIndex, xi: f64) -> f64 {
    let k = idx.i - 1;
    let mu = idx.mu;
    binomial(mu, k) * xi.powi(k as i32) * (1.0 - xi).powi((mu - k) as i32)
}

/// All `mu + 1` Bernstein values of degree `mu` at `xi`, in index order.
pub fn bernstein_all(mu: usize, xi: f64) -> Vec<f64> {
    let mut out = vec![0.0; mu + 1];
    bernstein_all_into(mu, xi, &mut out);
    out
}

/// Writes the `mu + 1` Bernstein values into `out` via the triangular recurrence.
pub fn bernstein_all_into(mu: usize, xi: f64, out: &mut [f64]) {
    debug_assert!(out.len() > mu);
    let s = 1.0 - xi;
    out[0] = 1.0;
    for j in 1..=mu {
        let mut saved = 0.0;
        for k in 0..j {
            let tmp = out[k];
            out[k] = saved + s * tmp;
            saved = xi * tmp;
        }
        out[j] = saved;
    }
}

/// Product of two univariate Bernstein polynomials.
///
/// `B_i^lambda * B_j^mu = c * B_{i+j-1}^{lambda+mu}` with
/// `c = binom(lambda, i-1) binom(mu, j-1) / binom(lambda+mu, i+j-2)`.
pub fn bernstein_product(a: BernsteinIndex, b: BernsteinIndex) -> Result<(BernsteinIndex, f64)> {
    let deg = a.mu + b.mu;
    let idx = BernsteinIndex::new(a.i + b.i - 1, deg)?;
    let coeff = binomial(a.mu, a.i - 1) * binomial(b.mu, b.i - 1) / binomial(deg, a.i + b.i - 2);
    Ok((idx, coeff))
}

/// Bivariate product, taken per direction.
pub fn bernstein_product_2d(
    a: [BernsteinIndex; 2],
    b: [BernsteinIndex; 2],
) -> Result<([BernsteinIndex; 2], f64)> {
    let (i1, c1) = bernstein_product(a[0], b[0])?;
    let (i2, c2) = bernstein_product(a[1], b[1])?;
    Ok(([i1, i2], c1 * c2))
}
