//! Closed-form loss factors and security bounds.
//!
//! Every quantity is computed as an exact rational while its numerator and
//! denominator stay under [`Bounds::bit_limit`] bits. Past that point the
//! value is carried as a base-2 logarithm, rounded up for upper bounds and
//! down for lower bounds.

mod report;
mod value;

pub use report::{BoundEntry, BoundReport, Params, TheoremTag};
pub use value::{rational_bits, ExactValue, Rounding, DEFAULT_BIT_LIMIT};

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

/// Rational upper bound on e², used wherever the simplified constant
/// `8e²` appears.
pub fn e_squared_upper() -> BigRational {
    BigRational::new(BigInt::from(739), BigInt::from(100))
}

/// Loop-length guard for log-domain sums over `t = 0..=k`.
const MAX_LOG_TERMS: u64 = 1 << 24;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundsError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("A(k={k}, q={q}, c={c}) is zero; the reprogramming distribution has no mass")]
    ZeroMass { k: u64, q: u64, c: u64 },
    #[error("k={k} must divide both q={q} and c={c}")]
    IndivisibleBudget { k: u64, q: u64, c: u64 },
    #[error("classical budget v={v} exhausts the search space of size {n}")]
    DomainExhausted { v: u64, n: u64 },
    #[error("parameter {0} too large for the log-domain evaluator")]
    TooLarge(&'static str),
}

/// Both forms of the simplified hybrid loss.
#[derive(Clone, Debug, PartialEq)]
pub struct SimplifiedLoss {
    /// `(8e²(q²/k² + c/k))^k` with e² replaced by its rational upper bound.
    pub bare: ExactValue,
    /// `2^{2k}·k·bare`.
    pub full: ExactValue,
}

/// Success of the staged multi-image algorithm, with and without the cap.
#[derive(Clone, Debug, PartialEq)]
pub struct AlgorithmSuccess {
    pub capped: ExactValue,
    pub raw: ExactValue,
}

/// Bound evaluator carrying the exact-arithmetic bit limit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Bounds {
    pub bit_limit: u64,
}

impl Default for Bounds {
    fn default() -> Self {
        Bounds {
            bit_limit: DEFAULT_BIT_LIMIT,
        }
    }
}

/// Exact binomial coefficient; zero when `k > n`.
pub fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

/// `log2 C(n, k)`, `-inf` when `k > n`.
pub fn log2_binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    let k = k.min(n - k);
    if k == 0 {
        return 0.0;
    }
    let ln = if k <= 100_000 {
        let mut s = 0.0f64;
        for i in 0..k {
            s += ((n - i) as f64).ln() - ((i + 1) as f64).ln();
        }
        s
    } else {
        ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
    };
    ln / std::f64::consts::LN_2
}

fn log2_sum(terms: impl IntoIterator<Item = f64>) -> f64 {
    let terms: Vec<f64> = terms.into_iter().collect();
    let hi = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + terms.iter().map(|t| (t - hi).exp2()).sum::<f64>().log2()
}

fn ratio(n: impl Into<BigInt>, d: impl Into<BigInt>) -> BigRational {
    BigRational::new(n.into(), d.into())
}

fn int(n: impl Into<BigInt>) -> BigRational {
    BigRational::from_integer(n.into())
}

fn big(n: BigUint) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

fn check_probability(p: &BigRational) -> Result<(), BoundsError> {
    if p.is_negative() || *p > BigRational::one() {
        return Err(BoundsError::InvalidParams(format!("p = {p} is outside [0, 1]")));
    }
    Ok(())
}

fn check_k(k: u64) -> Result<(), BoundsError> {
    if k == 0 {
        return Err(BoundsError::InvalidParams("k must be at least 1".into()));
    }
    Ok(())
}

/// `log2` of a rational in `[0, 1]`, `-inf` at zero.
fn log2_prob(p: &BigRational) -> f64 {
    ExactValue::Exact(p.clone()).log2()
}

impl Bounds {
    pub fn new(bit_limit: u64) -> Self {
        Bounds { bit_limit }
    }

    fn exact_fits(&self, log2_estimate: f64) -> bool {
        // small slack so borderline values take the exact route
        log2_estimate.abs() + 2.0 < self.bit_limit as f64
    }

    fn log2_a_term(q: u64, c: u64, k: u64, t: u64) -> f64 {
        2.0 * log2_binomial(q, t) + log2_binomial(k, t) + log2_binomial(c, k - t)
    }

    /// `Σ_t C(q,t)²·C(k,t)·C(c,k−t)`.
    pub fn capital_a(&self, k: u64, q: u64, c: u64) -> Result<ExactValue, BoundsError> {
        check_k(k)?;
        let estimate = (0..=k.min(q))
            .map(|t| Self::log2_a_term(q, c, k, t))
            .fold(f64::NEG_INFINITY, f64::max)
            + ((k + 1) as f64).log2();
        if estimate == f64::NEG_INFINITY || self.exact_fits(estimate) {
            return Ok(ExactValue::from_biguint(capital_a_exact(k, q, c)));
        }
        if k > MAX_LOG_TERMS {
            return Err(BoundsError::TooLarge("k"));
        }
        let log2 = log2_sum((0..=k.min(q)).map(|t| Self::log2_a_term(q, c, k, t)));
        Ok(ExactValue::from_log2(Rounding::Up.nudge(log2)))
    }

    /// Reprogramming-count distribution `α_t`, `t = 0..=k`.
    pub fn alpha_distribution(
        &self,
        k: u64,
        q: u64,
        c: u64,
    ) -> Result<Vec<ExactValue>, BoundsError> {
        check_k(k)?;
        let a = self.capital_a(k, q, c)?;
        if a.is_zero() {
            return Err(BoundsError::ZeroMass { k, q, c });
        }
        if let ExactValue::Exact(total) = &a {
            let total = total.clone();
            return Ok(alpha_terms_exact(k, q, c)
                .into_iter()
                .map(|term| ExactValue::Exact(big(term) / &total))
                .collect());
        }
        let log_a = a.log2();
        Ok((0..=k)
            .map(|t| {
                if t > q || k - t > c {
                    ExactValue::zero()
                } else {
                    let l = Self::log2_a_term(q, c, k, t) - log_a;
                    ExactValue::from_log2(l.min(0.0))
                }
            })
            .collect())
    }

    /// `2^{2k}·k·A(k,q,c)`, the multiplicative loss of the hybrid simulator.
    pub fn hybrid_loss_exact(&self, k: u64, q: u64, c: u64) -> Result<ExactValue, BoundsError> {
        let a = self.capital_a(k, q, c)?;
        let factor = ExactValue::from_biguint((BigUint::one() << (2 * k)) * k);
        let factor = factor.fit(self.bit_limit, Rounding::Up);
        Ok(factor.mul(&a, Rounding::Up).fit(self.bit_limit, Rounding::Up))
    }

    /// `(8e²(q²/k² + c/k))^k` and the full loss `2^{2k}·k·(…)^k`.
    pub fn hybrid_loss_simplified(
        &self,
        k: u64,
        q: u64,
        c: u64,
    ) -> Result<SimplifiedLoss, BoundsError> {
        check_k(k)?;
        let inner = ratio(BigInt::from(q) * q, BigInt::from(k) * k) + ratio(c, k);
        let base = int(8) * e_squared_upper() * inner;
        let base_log2 = ExactValue::Exact(base.clone()).log2();
        let bare = if base.is_zero() {
            ExactValue::zero()
        } else if self.exact_fits(base_log2 * k as f64 + 4.0) {
            ExactValue::Exact(base).pow(k, Rounding::Up)
        } else {
            ExactValue::from_log2(Rounding::Up.nudge(base_log2 * k as f64))
        };
        let factor = ExactValue::from_biguint((BigUint::one() << (2 * k)) * k)
            .fit(self.bit_limit, Rounding::Up);
        let full = factor.mul(&bare, Rounding::Up).fit(self.bit_limit, Rounding::Up);
        Ok(SimplifiedLoss {
            bare: bare.fit(self.bit_limit, Rounding::Up),
            full,
        })
    }

    /// `(2q+1)^{2k}`, the loss of the purely quantum measure-and-reprogram.
    pub fn dfm_loss(&self, k: u64, q: u64) -> Result<ExactValue, BoundsError> {
        check_k(k)?;
        let base = 2 * q + 1;
        let log2 = (base as f64).log2() * (2 * k) as f64;
        if self.exact_fits(log2) {
            let v = num_traits::pow(BigUint::from(base), (2 * k) as usize);
            Ok(ExactValue::from_biguint(v))
        } else {
            Ok(ExactValue::from_log2(Rounding::Up.nudge(log2)))
        }
    }

    /// Ratio of the noisy proof chain:
    /// `k·Σ p^{k−t}(1−p)^t C(T,t) C(k,t)` over `Σ p^{k−t}(1−p)^t / C(T,k)`.
    pub fn noisy_loss_exact(
        &self,
        p: &BigRational,
        total: u64,
        k: u64,
    ) -> Result<ExactValue, BoundsError> {
        check_k(k)?;
        check_probability(p)?;
        if k > total {
            return Err(BoundsError::InvalidParams(format!(
                "k = {k} exceeds the query count T = {total}"
            )));
        }
        let estimate = log2_binomial(total, k) * 2.0 + (k as f64) * 2.0 + (k as f64).log2();
        let p_bits = rational_bits(p) as f64 * k as f64;
        if self.exact_fits(estimate + p_bits) {
            let q = BigRational::one() - p;
            let mut numer = BigRational::zero();
            let mut denom = BigRational::zero();
            for t in 0..=k {
                let w = num_traits::Pow::pow(p, (k - t) as i32)
                    * num_traits::Pow::pow(&q, t as i32);
                numer += &w * big(binomial(total, t) * binomial(k, t));
                denom += w;
            }
            let numer = numer * int(k);
            let denom = denom / big(binomial(total, k));
            return Ok(ExactValue::Exact(numer / denom).fit(self.bit_limit, Rounding::Up));
        }
        if k > MAX_LOG_TERMS {
            return Err(BoundsError::TooLarge("k"));
        }
        let lp = log2_prob(p);
        let lq = log2_prob(&(BigRational::one() - p));
        let weight = |t: u64| {
            let a = if k - t == 0 { 0.0 } else { lp * (k - t) as f64 };
            let b = if t == 0 { 0.0 } else { lq * t as f64 };
            a + b
        };
        let numer = (k as f64).log2()
            + log2_sum((0..=k).map(|t| weight(t) + log2_binomial(total, t) + log2_binomial(k, t)));
        let denom = log2_sum((0..=k).map(weight)) - log2_binomial(total, k);
        Ok(ExactValue::from_log2(Rounding::Up.nudge(numer - denom)))
    }

    /// `C(T,k)·(((1−p)·T·k)^k + k)`, the noisy loss with implementation constant 1.
    pub fn noisy_loss_asymptotic(
        &self,
        p: &BigRational,
        total: u64,
        k: u64,
    ) -> Result<ExactValue, BoundsError> {
        check_k(k)?;
        check_probability(p)?;
        if k > total {
            return Err(BoundsError::InvalidParams(format!(
                "k = {k} exceeds the query count T = {total}"
            )));
        }
        let q = BigRational::one() - p;
        let base = &q * int(BigInt::from(total) * k);
        let base_log2 = ExactValue::Exact(base.clone()).log2();
        let estimate = log2_binomial(total, k) + (base_log2 * k as f64).max((k as f64).log2()) + 1.0;
        if self.exact_fits(estimate + rational_bits(&q) as f64 * k as f64) {
            let v = big(binomial(total, k))
                * (num_traits::Pow::pow(&base, k as i32) + int(k));
            return Ok(ExactValue::Exact(v).fit(self.bit_limit, Rounding::Up));
        }
        let inner = log2_sum([base_log2 * k as f64, (k as f64).log2()]);
        Ok(ExactValue::from_log2(Rounding::Up.nudge(
            log2_binomial(total, k) + inner,
        )))
    }

    /// Noise parameter and query count of the noisy algorithm simulating a
    /// depth-`d` algorithm with `T` queries.
    pub fn bounded_depth_params(&self, d: u64, total: u64) -> Result<(BigRational, u64), BoundsError> {
        if d == 0 {
            return Err(BoundsError::InvalidParams("depth must be at least 1".into()));
        }
        Ok((ratio(1, d), 2 * total))
    }

    /// Uncapped `loss·p(R)`.
    pub fn lifting_bound_raw(
        &self,
        k: u64,
        q: u64,
        c: u64,
        p_r: &ExactValue,
    ) -> Result<ExactValue, BoundsError> {
        check_unit(p_r)?;
        let loss = self.hybrid_loss_exact(k, q, c)?;
        Ok(loss.mul(p_r, Rounding::Up).fit(self.bit_limit, Rounding::Up))
    }

    /// `min(1, 2^{2k}·k·A(k,q,c)·p(R))`.
    pub fn lifting_bound(
        &self,
        k: u64,
        q: u64,
        c: u64,
        p_r: &ExactValue,
    ) -> Result<ExactValue, BoundsError> {
        Ok(self.lifting_bound_raw(k, q, c, p_r)?.cap_at_one())
    }

    /// Direct-product bound: the single-instance lifting bound to the `g`-th power.
    pub fn dpt_bound(
        &self,
        g: u64,
        k: u64,
        q: u64,
        c: u64,
        p_r: &ExactValue,
    ) -> Result<ExactValue, BoundsError> {
        if g == 0 {
            return Err(BoundsError::InvalidParams("g must be at least 1".into()));
        }
        let single = self.lifting_bound(k, q, c, p_r)?;
        Ok(single.pow(g, Rounding::Up).fit(self.bit_limit, Rounding::Up))
    }

    /// Classical-advice bound `4·(loss(k, S·q, S·c)·p(R_MIS^S))^{1/S}`, capped at 1.
    pub fn advice_bound(
        &self,
        k: u64,
        q: u64,
        c: u64,
        s: u64,
        p_r_mis: &ExactValue,
    ) -> Result<ExactValue, BoundsError> {
        if s == 0 {
            return Err(BoundsError::InvalidParams("advice length S must be at least 1".into()));
        }
        check_unit(p_r_mis)?;
        if p_r_mis.is_zero() {
            return Ok(ExactValue::zero());
        }
        let loss = self.hybrid_loss_exact(k, s * q, s * c)?;
        let inner = loss.mul(p_r_mis, Rounding::Up);
        if s == 1 {
            let v = ExactValue::from_integer(4).mul(&inner, Rounding::Up);
            return Ok(v.cap_at_one().fit(self.bit_limit, Rounding::Up));
        }
        let log2 = 2.0 + inner.log2() / s as f64;
        if log2 >= 0.0 {
            return Ok(ExactValue::one());
        }
        Ok(ExactValue::from_log2(Rounding::Up.nudge(log2)).cap_at_one())
    }

    /// Salted-game bound `min(1, 4S/K + loss·p(R))`.
    pub fn salted_bound(
        &self,
        k: u64,
        q: u64,
        c: u64,
        s: u64,
        salts: u64,
        p_r: &ExactValue,
    ) -> Result<ExactValue, BoundsError> {
        if salts == 0 {
            return Err(BoundsError::InvalidParams("salt space K must be at least 1".into()));
        }
        let advice_term = ExactValue::ratio(4 * BigInt::from(s), salts);
        let lifting = self.lifting_bound(k, q, c, p_r)?;
        Ok(advice_term
            .add(&lifting, Rounding::Up)
            .cap_at_one()
            .fit(self.bit_limit, Rounding::Up))
    }

    /// `k!·(v+u²)^k / (2^k·N^k)` with `u = q/k`, `v = c/k`.
    ///
    /// The capped value is 1 whenever `v + u² > N`.
    pub fn multi_image_alg_success(
        &self,
        k: u64,
        q: u64,
        c: u64,
        n: u64,
    ) -> Result<AlgorithmSuccess, BoundsError> {
        check_k(k)?;
        if n == 0 {
            return Err(BoundsError::InvalidParams("N must be at least 1".into()));
        }
        if !q.is_multiple_of(k) || !c.is_multiple_of(k) {
            return Err(BoundsError::IndivisibleBudget { k, q, c });
        }
        let (u, v) = (q / k, c / k);
        let mass = BigUint::from(v) + BigUint::from(u) * u;
        let log2 = log2_factorial(k) + k as f64 * (biguint_log2_f(&mass) - 1.0 - (n as f64).log2());
        let raw = if mass.is_zero() {
            ExactValue::zero()
        } else if self.exact_fits(log2.abs() + k as f64 * ((n as f64).log2() + 1.0)) {
            let numer = factorial(k) * num_traits::pow(mass.clone(), k as usize);
            let denom = num_traits::pow(BigUint::from(2 * n), k as usize);
            ExactValue::Exact(ratio(BigInt::from(numer), BigInt::from(denom)))
        } else {
            ExactValue::from_log2(Rounding::Down.nudge(log2))
        };
        let capped = if mass > BigUint::from(n) {
            ExactValue::one()
        } else {
            raw.cap_at_one()
        };
        Ok(AlgorithmSuccess { capped, raw })
    }

    /// `(v/N + u²/(N−v)) / 2`, the success floor of a single-target hybrid search.
    pub fn hybrid_search_floor(&self, u: u64, v: u64, n: u64) -> Result<ExactValue, BoundsError> {
        if v >= n {
            return Err(BoundsError::DomainExhausted { v, n });
        }
        let value = (ratio(v, n) + ratio(BigInt::from(u) * u, n - v)) / int(2);
        Ok(ExactValue::Exact(value))
    }
}

fn check_unit(p: &ExactValue) -> Result<(), BoundsError> {
    if p.is_negative() || p.cmp_value(&ExactValue::one()) == std::cmp::Ordering::Greater {
        return Err(BoundsError::InvalidParams(format!("p(R) = {p} is outside [0, 1]")));
    }
    Ok(())
}

fn capital_a_exact(k: u64, q: u64, c: u64) -> BigUint {
    alpha_terms_exact(k, q, c).into_iter().sum()
}

/// Unnormalized `α_t` weights `C(q,t)²·C(k,t)·C(c,k−t)`.
fn alpha_terms_exact(k: u64, q: u64, c: u64) -> Vec<BigUint> {
    (0..=k)
        .map(|t| {
            let cq = binomial(q, t);
            if cq.is_zero() {
                return BigUint::zero();
            }
            &cq * &cq * binomial(k, t) * binomial(c, k - t)
        })
        .collect()
}

fn factorial(n: u64) -> BigUint {
    (1..=n).fold(BigUint::one(), |acc, i| acc * i)
}

fn log2_factorial(n: u64) -> f64 {
    if n <= 100_000 {
        (1..=n).map(|i| (i as f64).log2()).sum()
    } else {
        ln_gamma(n as f64 + 1.0) / std::f64::consts::LN_2
    }
}

fn biguint_log2_f(n: &BigUint) -> f64 {
    match n.to_f64() {
        Some(v) if v.is_finite() => v.log2(),
        _ => value::biguint_log2(n),
    }
}

macro_rules! free_fn {
    ($(#[$m:meta])* $name:ident ( $($arg:ident : $ty:ty),* ) -> $ret:ty) => {
        $(#[$m])*
        pub fn $name($($arg: $ty),*) -> $ret {
            Bounds::default().$name($($arg),*)
        }
    };
}

free_fn!(
    /// [`Bounds::capital_a`] at the default bit limit.
    capital_a(k: u64, q: u64, c: u64) -> Result<ExactValue, BoundsError>
);
free_fn!(alpha_distribution(k: u64, q: u64, c: u64) -> Result<Vec<ExactValue>, BoundsError>);
free_fn!(hybrid_loss_exact(k: u64, q: u64, c: u64) -> Result<ExactValue, BoundsError>);
free_fn!(hybrid_loss_simplified(k: u64, q: u64, c: u64) -> Result<SimplifiedLoss, BoundsError>);
free_fn!(dfm_loss(k: u64, q: u64) -> Result<ExactValue, BoundsError>);
free_fn!(noisy_loss_exact(p: &BigRational, total: u64, k: u64) -> Result<ExactValue, BoundsError>);
free_fn!(noisy_loss_asymptotic(p: &BigRational, total: u64, k: u64) -> Result<ExactValue, BoundsError>);
free_fn!(bounded_depth_params(d: u64, total: u64) -> Result<(BigRational, u64), BoundsError>);
free_fn!(lifting_bound(k: u64, q: u64, c: u64, p_r: &ExactValue) -> Result<ExactValue, BoundsError>);
free_fn!(dpt_bound(g: u64, k: u64, q: u64, c: u64, p_r: &ExactValue) -> Result<ExactValue, BoundsError>);
free_fn!(advice_bound(k: u64, q: u64, c: u64, s: u64, p_r_mis: &ExactValue) -> Result<ExactValue, BoundsError>);
free_fn!(salted_bound(k: u64, q: u64, c: u64, s: u64, salts: u64, p_r: &ExactValue) -> Result<ExactValue, BoundsError>);
free_fn!(multi_image_alg_success(k: u64, q: u64, c: u64, n: u64) -> Result<AlgorithmSuccess, BoundsError>);
free_fn!(hybrid_search_floor(u: u64, v: u64, n: u64) -> Result<ExactValue, BoundsError>);

#[cfg(test)]
mod tests;
