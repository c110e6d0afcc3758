//! Finite-field point-count oracle via the Harder-Narasimhan recursion.
//!
//! An independent verification channel: for an acyclic quiver, primitive
//! dimension vector and generic stability, the semistable moduli space is a
//! smooth projective variety whose point count over `F_q` is a polynomial in
//! `q`, and its value at `q = 1` is the Euler characteristic, which equals
//! the DT invariant. All rational-function arithmetic is exact.

use std::collections::HashMap;

use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::quiver::{walls_and_chamber, DimVector, Quiver, QuiverError, StabilityPoint};
use crate::rational::fmt_rat;
use crate::{Int, Rat};

#[derive(Debug, Error)]
pub enum OracleError {
    #[error(transparent)]
    Quiver(#[from] QuiverError),
    #[error("oracle requires an acyclic quiver")]
    NotAcyclic,
    #[error("oracle requires a primitive dimension vector, got {0} with divisibility {1}")]
    NotPrimitive(DimVector, i64),
    #[error("theta is not generic for gamma: theta vanishes on wall normal {0}")]
    NonGenericTheta(DimVector),
    #[error("point count is not a polynomial: {0}")]
    NotPolynomial(String),
    #[error("point count has a non-admissible coefficient {coeff} at degree {degree}")]
    BadCoefficient { degree: usize, coeff: String },
}

/// Dense univariate polynomial over `Q`, coefficients lowest degree first,
/// no trailing zeros.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Poly(Vec<Rat>);

impl Poly {
    pub fn zero() -> Self {
        Poly(Vec::new())
    }

    pub fn one() -> Self {
        Poly(vec![Rat::one()])
    }

    pub fn from_coeffs(coeffs: Vec<Rat>) -> Self {
        let mut p = Poly(coeffs);
        p.trim();
        p
    }

    /// The monomial `q^k`.
    pub fn q_pow(k: usize) -> Self {
        let mut c = vec![Rat::zero(); k + 1];
        c[k] = Rat::one();
        Poly(c)
    }

    fn trim(&mut self) {
        while self.0.last().map_or(false, |c| c.is_zero()) {
            self.0.pop();
        }
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn degree(&self) -> Option<usize> {
        self.0.len().checked_sub(1)
    }

    pub fn coeffs(&self) -> &[Rat] {
        &self.0
    }

    pub fn leading(&self) -> Option<&Rat> {
        self.0.last()
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut c = vec![Rat::zero(); self.0.len().max(other.0.len())];
        for (i, a) in self.0.iter().enumerate() {
            c[i] += a;
        }
        for (i, b) in other.0.iter().enumerate() {
            c[i] += b;
        }
        Poly::from_coeffs(c)
    }

    pub fn neg(&self) -> Poly {
        Poly(self.0.iter().map(|c| -c).collect())
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        if self.is_zero() || other.is_zero() {
            return Poly::zero();
        }
        let mut c = vec![Rat::zero(); self.0.len() + other.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in other.0.iter().enumerate() {
                c[i + j] += a * b;
            }
        }
        Poly::from_coeffs(c)
    }

    pub fn scale(&self, s: &Rat) -> Poly {
        Poly::from_coeffs(self.0.iter().map(|c| c * s).collect())
    }

    /// Euclidean division; panics on a zero divisor.
    pub fn divrem(&self, divisor: &Poly) -> (Poly, Poly) {
        assert!(!divisor.is_zero(), "division by zero polynomial");
        let mut rem = self.0.clone();
        let dd = divisor.0.len() - 1;
        let lead = divisor.0.last().unwrap();
        if rem.len() <= dd {
            return (Poly::zero(), Poly(rem));
        }
        let mut quot = vec![Rat::zero(); rem.len() - dd];
        for i in (dd..rem.len()).rev() {
            let c = &rem[i] / lead;
            if c.is_zero() {
                continue;
            }
            for (j, b) in divisor.0.iter().enumerate() {
                let t = &c * b;
                rem[i - dd + j] -= t;
            }
            quot[i - dd] = c;
        }
        (Poly::from_coeffs(quot), Poly::from_coeffs(rem))
    }

    /// Monic gcd.
    pub fn gcd(&self, other: &Poly) -> Poly {
        let mut a = self.clone();
        let mut b = other.clone();
        while !b.is_zero() {
            let (_, r) = a.divrem(&b);
            a = b;
            b = r;
        }
        a.make_monic()
    }

    fn make_monic(mut self) -> Poly {
        if let Some(lead) = self.0.last().cloned() {
            for c in &mut self.0 {
                *c /= &lead;
            }
        }
        self
    }

    pub fn eval(&self, x: &Rat) -> Rat {
        let mut acc = Rat::zero();
        for c in self.0.iter().rev() {
            acc = acc * x + c;
        }
        acc
    }

    /// Human-readable rendering, highest degree first, e.g. `q^2 + q + 1`.
    pub fn render(&self) -> String {
        if self.is_zero() {
            return "0".to_string();
        }
        let mut parts = Vec::new();
        for (i, c) in self.0.iter().enumerate().rev() {
            if c.is_zero() {
                continue;
            }
            let mono = match i {
                0 => String::new(),
                1 => "q".to_string(),
                _ => format!("q^{i}"),
            };
            let abs = fmt_rat(&c.abs());
            let body = if mono.is_empty() {
                abs
            } else if abs == "1" {
                mono
            } else {
                format!("{abs}*{mono}")
            };
            if parts.is_empty() {
                parts.push(if c.is_negative() {
                    format!("-{body}")
                } else {
                    body
                });
            } else {
                parts.push(format!("{} {}", if c.is_negative() { "-" } else { "+" }, body));
            }
        }
        parts.join(" ")
    }
}

/// Rational function in one variable `q`, kept reduced with monic
/// denominator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RationalFunctionQ {
    num: Poly,
    den: Poly,
}

impl RationalFunctionQ {
    pub fn new(num: Poly, den: Poly) -> Self {
        assert!(!den.is_zero(), "zero denominator");
        if num.is_zero() {
            return RationalFunctionQ {
                num: Poly::zero(),
                den: Poly::one(),
            };
        }
        let g = num.gcd(&den);
        let (num, r) = num.divrem(&g);
        debug_assert!(r.is_zero());
        let (den, r) = den.divrem(&g);
        debug_assert!(r.is_zero());
        let lead = den.leading().expect("nonzero denominator").clone();
        RationalFunctionQ {
            num: num.scale(&(Rat::one() / &lead)),
            den: den.scale(&(Rat::one() / lead)),
        }
    }

    pub fn zero() -> Self {
        RationalFunctionQ::new(Poly::zero(), Poly::one())
    }

    pub fn one() -> Self {
        RationalFunctionQ::new(Poly::one(), Poly::one())
    }

    pub fn from_poly(p: Poly) -> Self {
        RationalFunctionQ::new(p, Poly::one())
    }

    /// `q^k` for any integer `k`, negative powers as `1/q^{-k}`.
    pub fn q_pow(k: i64) -> Self {
        if k >= 0 {
            RationalFunctionQ::new(Poly::q_pow(k as usize), Poly::one())
        } else {
            RationalFunctionQ::new(Poly::one(), Poly::q_pow((-k) as usize))
        }
    }

    pub fn numerator(&self) -> &Poly {
        &self.num
    }

    pub fn denominator(&self) -> &Poly {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn add(&self, other: &Self) -> Self {
        RationalFunctionQ::new(
            self.num.mul(&other.den).add(&other.num.mul(&self.den)),
            self.den.mul(&other.den),
        )
    }

    pub fn sub(&self, other: &Self) -> Self {
        RationalFunctionQ::new(
            self.num.mul(&other.den).sub(&other.num.mul(&self.den)),
            self.den.mul(&other.den),
        )
    }

    pub fn mul(&self, other: &Self) -> Self {
        RationalFunctionQ::new(self.num.mul(&other.num), self.den.mul(&other.den))
    }

    /// The polynomial this reduces to, when it does.
    pub fn as_polynomial(&self) -> Option<Poly> {
        if self.den == Poly::one() {
            Some(self.num.clone())
        } else {
            None
        }
    }

    pub fn render(&self) -> String {
        if self.den == Poly::one() {
            self.num.render()
        } else {
            format!("({}) / ({})", self.num.render(), self.den.render())
        }
    }
}

/// `|GL_n(F_q)| = prod_{k=0}^{n-1} (q^n - q^k)` as a polynomial.
fn gl_order(n: usize) -> Poly {
    let mut p = Poly::one();
    for k in 0..n {
        p = p.mul(&Poly::q_pow(n).sub(&Poly::q_pow(k)));
    }
    p
}

/// Memoizing oracle for a fixed quiver and slope covector.
pub struct Oracle<'a> {
    quiver: &'a Quiver,
    theta: StabilityPoint,
    ss_cache: HashMap<DimVector, RationalFunctionQ>,
}

impl<'a> Oracle<'a> {
    pub fn new(quiver: &'a Quiver, theta: StabilityPoint) -> Self {
        Oracle {
            quiver,
            theta,
            ss_cache: HashMap::new(),
        }
    }

    /// Slope `mu(d) = theta(d) / sum_i d_i`.
    fn slope(&self, d: &DimVector) -> Rat {
        self.theta.eval(d) / Rat::from_integer(Int::from(d.coord_sum()))
    }

    /// Stacky count of all representations of dimension `g`:
    /// `q^{sum a_ij g_i g_j} / prod_i |GL_{g_i}|`.
    pub fn count_all(&self, g: &DimVector) -> Result<RationalFunctionQ, OracleError> {
        let d = self.quiver.vertex_count();
        if g.len() != d {
            return Err(OracleError::Quiver(QuiverError::DimensionMismatch {
                expected: d,
                got: g.len(),
            }));
        }
        let mut exp: i64 = 0;
        for i in 0..d {
            for j in 0..d {
                exp += self.quiver.arrows(i, j) * g[i] * g[j];
            }
        }
        let mut den = Poly::one();
        for i in 0..d {
            den = den.mul(&gl_order(g[i] as usize));
        }
        Ok(RationalFunctionQ::q_pow(exp).mul(&RationalFunctionQ::new(Poly::one(), den)))
    }

    /// Stacky count of semistable representations, via the HN recursion:
    /// the all-representations count is the sum over tuples `(d^1,...,d^s)`
    /// of strictly decreasing slope summing to `g` of
    /// `q^{-sum_{k<l} chi(d^l, d^k)} * prod_k ss(d^k)`; subtract the `s >= 2`
    /// strata.
    pub fn count_ss(&mut self, g: &DimVector) -> Result<RationalFunctionQ, OracleError> {
        if let Some(v) = self.ss_cache.get(g) {
            return Ok(v.clone());
        }
        let all = self.count_all(g)?;
        // strata with a proper first part of slope above every later part
        let mut strata = RationalFunctionQ::zero();
        for first in proper_nonzero_subvectors(g) {
            let rest = g.sub(&first);
            let tail = self.hn_tail(&rest, &self.slope(&first), &first)?;
            if tail.is_zero() {
                continue;
            }
            let ssf = self.count_ss(&first)?;
            strata = strata.add(&ssf.mul(&tail));
        }
        let ss = all.sub(&strata);
        self.ss_cache.insert(g.clone(), ss.clone());
        Ok(ss)
    }

    /// Sum over nonempty tuples `(d^1,...,d^t)` summing to `rest` with
    /// slopes strictly decreasing and all below `bound`, of
    /// `prod_j q^{-chi(d^j, acc_j)} ss(d^j)` where `acc_j` accumulates the
    /// parts chosen before `d^j` (including the parts outside this call).
    fn hn_tail(
        &mut self,
        rest: &DimVector,
        bound: &Rat,
        acc: &DimVector,
    ) -> Result<RationalFunctionQ, OracleError> {
        if rest.is_zero() {
            return Ok(RationalFunctionQ::one());
        }
        let mut sum = RationalFunctionQ::zero();
        let mut candidates = proper_nonzero_subvectors(rest);
        candidates.push(rest.clone());
        for d in candidates {
            if &self.slope(&d) >= bound {
                continue;
            }
            let chi = self.quiver.euler_form(&d, acc)?;
            let ssd = self.count_ss(&d)?;
            let tail = self.hn_tail(&rest.sub(&d), &self.slope(&d), &acc.add(&d))?;
            if tail.is_zero() {
                continue;
            }
            sum = sum.add(&RationalFunctionQ::q_pow(-chi).mul(&ssd).mul(&tail));
        }
        Ok(sum)
    }
}

/// Point count of the stable moduli space `M_g^theta` over `F_q`:
/// `(q-1) * count_ss(g)`, valid for acyclic quivers, primitive `g` and
/// generic `theta`; asserted to be a polynomial with nonnegative integer
/// coefficients.
pub fn stable_point_count(
    q: &Quiver,
    g: &DimVector,
    theta: &StabilityPoint,
) -> Result<Poly, OracleError> {
    if !q.is_acyclic() {
        return Err(OracleError::NotAcyclic);
    }
    let div = crate::quiver::divisibility(g)?;
    if div != 1 {
        return Err(OracleError::NotPrimitive(g.clone(), div));
    }
    let chamber = walls_and_chamber(q, g, theta)?;
    if !chamber.generic {
        let normal = chamber
            .violated_normal(theta)
            .expect("non-generic theta vanishes on some wall normal")
            .clone();
        return Err(OracleError::NonGenericTheta(normal));
    }
    let mut oracle = Oracle::new(q, theta.clone());
    let ss = oracle.count_ss(g)?;
    let qm1 = RationalFunctionQ::from_poly(Poly::from_coeffs(vec![
        -Rat::one(),
        Rat::one(),
    ]));
    let count = qm1.mul(&ss);
    let poly = count
        .as_polynomial()
        .ok_or_else(|| OracleError::NotPolynomial(count.render()))?;
    for (i, c) in poly.coeffs().iter().enumerate() {
        if !c.denom().is_one() || c.is_negative() {
            return Err(OracleError::BadCoefficient {
                degree: i,
                coeff: fmt_rat(c),
            });
        }
    }
    Ok(poly)
}

/// Euler characteristic of `M_g^theta`: the point count evaluated at `q=1`.
pub fn euler_char(
    q: &Quiver,
    g: &DimVector,
    theta: &StabilityPoint,
) -> Result<Int, OracleError> {
    let poly = stable_point_count(q, g, theta)?;
    let v = poly.eval(&Rat::one());
    Ok(v.to_integer())
}

/// Nonzero vectors `0 < v < g` coordinatewise (excluding `g` itself).
fn proper_nonzero_subvectors(g: &DimVector) -> Vec<DimVector> {
    let mut out = Vec::new();
    let mut cur = vec![0i64; g.len()];
    'outer: loop {
        let mut i = 0;
        loop {
            if i == g.len() {
                break 'outer;
            }
            if cur[i] < g[i] {
                cur[i] += 1;
                for c in cur.iter_mut().take(i) {
                    *c = 0;
                }
                break;
            }
            i += 1;
        }
        let v = DimVector(cur.clone());
        if v != *g {
            out.push(v);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    fn dv(v: &[i64]) -> DimVector {
        DimVector(v.to_vec())
    }

    fn sp(v: &[i64]) -> StabilityPoint {
        StabilityPoint::from_integers(v)
    }

    fn poly(coeffs: &[i64]) -> Poly {
        Poly::from_coeffs(coeffs.iter().map(|&c| rat(c)).collect())
    }

    #[test]
    fn poly_arithmetic() {
        let a = poly(&[1, 1]); // 1 + q
        let b = poly(&[-1, 1]); // q - 1
        assert_eq!(a.mul(&b), poly(&[-1, 0, 1]));
        let (quot, rem) = poly(&[-1, 0, 1]).divrem(&a);
        assert_eq!(quot, b);
        assert!(rem.is_zero());
        let g = poly(&[-1, 0, 1]).gcd(&poly(&[-1, 1]));
        assert_eq!(g, poly(&[-1, 1]));
        assert_eq!(poly(&[1, 1, 1]).eval(&rat(1)), rat(3));
        assert_eq!(poly(&[1, 1, 1]).render(), "q^2 + q + 1");
    }

    #[test]
    fn rational_function_reduces() {
        // (q^2 - 1)/(q - 1) = q + 1
        let f = RationalFunctionQ::new(poly(&[-1, 0, 1]), poly(&[-1, 1]));
        assert_eq!(f.as_polynomial().unwrap(), poly(&[1, 1]));
        // monic denominator: (q+1)/(2q+2) = 1/2
        let f = RationalFunctionQ::new(poly(&[1, 1]), poly(&[2, 2]));
        assert_eq!(f.as_polynomial().unwrap(), Poly::from_coeffs(vec![Rat::new(
            Int::from(1),
            Int::from(2)
        )]));
    }

    #[test]
    fn gl_orders() {
        assert_eq!(gl_order(0), Poly::one());
        assert_eq!(gl_order(1), poly(&[-1, 1]));
        // |GL_2| = (q^2-1)(q^2-q)
        assert_eq!(gl_order(2), poly(&[-1, 0, 1]).mul(&poly(&[0, -1, 1])));
    }

    #[test]
    fn count_all_examples() {
        let q = Quiver::kronecker(3);
        let oracle = Oracle::new(&q, sp(&[0, 0]));
        // e1 -> 1/(q-1)
        assert_eq!(
            oracle.count_all(&dv(&[1, 0])).unwrap(),
            RationalFunctionQ::new(Poly::one(), poly(&[-1, 1]))
        );
        // (1,1) -> q^3/(q-1)^2
        assert_eq!(
            oracle.count_all(&dv(&[1, 1])).unwrap(),
            RationalFunctionQ::new(Poly::q_pow(3), poly(&[-1, 1]).mul(&poly(&[-1, 1])))
        );
        // g = 0 -> 1
        assert_eq!(oracle.count_all(&dv(&[0, 0])).unwrap(), RationalFunctionQ::one());
    }

    #[test]
    fn zero_slope_ss_equals_all() {
        let q = Quiver::kronecker(2);
        let mut oracle = Oracle::new(&q, sp(&[0, 0]));
        for g in [dv(&[1, 1]), dv(&[2, 1]), dv(&[2, 2])] {
            assert_eq!(oracle.count_ss(&g).unwrap(), oracle.count_all(&g).unwrap());
        }
    }

    #[test]
    fn kronecker_ss_hand_value() {
        // (q^n - 1)/(q - 1)^2 for g=(1,1), theta=(1,-1)
        for n in 1..=4 {
            let q = Quiver::kronecker(n);
            let mut oracle = Oracle::new(&q, sp(&[1, -1]));
            let ss = oracle.count_ss(&dv(&[1, 1])).unwrap();
            let mut num = vec![rat(-1)];
            num.extend(std::iter::repeat(rat(0)).take(n as usize - 1));
            num.push(rat(1));
            let expect = RationalFunctionQ::new(
                Poly::from_coeffs(num),
                poly(&[-1, 1]).mul(&poly(&[-1, 1])),
            );
            assert_eq!(ss, expect);
        }
    }

    #[test]
    fn hn_conservation() {
        // re-sum the recursion: all(g) = sum over strictly-decreasing-slope
        // tuples of the product side
        let q = Quiver::kronecker(3);
        let theta = sp(&[1, -1]);
        for g in [dv(&[1, 1]), dv(&[1, 2]), dv(&[2, 2])] {
            let mut oracle = Oracle::new(&q, theta.clone());
            let all = oracle.count_all(&g).unwrap();
            // resum = ss(g) + proper first-part strata = hn_tail with bound +inf
            let mut resum = oracle.count_ss(&g).unwrap();
            let mut firsts = proper_nonzero_subvectors(&g);
            firsts.sort();
            for first in firsts {
                let rest = g.sub(&first);
                let bound = oracle.slope(&first);
                let tail = oracle.hn_tail(&rest, &bound, &first).unwrap();
                let ssf = oracle.count_ss(&first).unwrap();
                resum = resum.add(&ssf.mul(&tail));
            }
            assert_eq!(resum, all);
        }
    }

    #[test]
    fn stable_counts() {
        for n in 1..=4 {
            let q = Quiver::kronecker(n);
            let count = stable_point_count(&q, &dv(&[1, 1]), &sp(&[1, -1])).unwrap();
            assert_eq!(count, poly(&vec![1; n as usize]));
        }
        let q = Quiver::kronecker(3);
        let count = stable_point_count(&q, &dv(&[1, 2]), &sp(&[2, -1])).unwrap();
        assert_eq!(count, poly(&[1, 1, 1]));
        let q = Quiver::kronecker(2);
        let count = stable_point_count(&q, &dv(&[1, 2]), &sp(&[2, -1])).unwrap();
        assert_eq!(count, poly(&[1]));
    }

    #[test]
    fn euler_chars() {
        for n in 1..=6 {
            let q = Quiver::kronecker(n);
            assert_eq!(
                euler_char(&q, &dv(&[1, 1]), &sp(&[1, -1])).unwrap(),
                Int::from(n)
            );
            assert_eq!(
                euler_char(&q, &dv(&[1, 1]), &sp(&[-1, 1])).unwrap(),
                Int::from(0)
            );
        }
        let q = Quiver::kronecker(3);
        assert_eq!(euler_char(&q, &dv(&[1, 2]), &sp(&[2, -1])).unwrap(), Int::from(3));
    }

    #[test]
    fn preconditions_enforced() {
        let q = Quiver::kronecker(2);
        assert!(matches!(
            stable_point_count(&q, &dv(&[2, 2]), &sp(&[1, -1])),
            Err(OracleError::NotPrimitive(_, 2))
        ));
        assert!(matches!(
            stable_point_count(&q, &dv(&[1, 1]), &sp(&[0, 0])),
            Err(OracleError::NonGenericTheta(_))
        ));
        let cyc = Quiver::new(vec![vec![0, 1], vec![1, 0]]).unwrap();
        assert!(matches!(
            stable_point_count(&cyc, &dv(&[1, 2]), &sp(&[2, -1])),
            Err(OracleError::NotAcyclic)
        ));
    }
}
