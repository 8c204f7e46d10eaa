//! Independent reference computations: fixed-point big-integer erf for the
//! HL-Gauss transform, exact-rational EOP by subset enumeration and exact
//! suffix returns.
#![allow(dead_code)]

use num_bigint::{BigInt, Sign};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Fractional bits of the fixed-point representation.
const BITS: u32 = 320;

/// A real number `n / 2^BITS`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Fixed(BigInt);

impl Fixed {
    pub fn from_f64(x: f64) -> Self {
        assert!(x.is_finite());
        let r = BigRational::from_float(x).expect("finite");
        Fixed((r.numer() << BITS) / r.denom())
    }

    pub fn from_int(i: i64) -> Self {
        Fixed(BigInt::from(i) << BITS)
    }

    pub fn to_f64(&self) -> f64 {
        // exact rational then one rounding
        BigRational::new(self.0.clone(), BigInt::one() << BITS)
            .to_f64()
            .expect("representable")
    }

    pub fn add(&self, o: &Fixed) -> Fixed {
        Fixed(&self.0 + &o.0)
    }

    pub fn sub(&self, o: &Fixed) -> Fixed {
        Fixed(&self.0 - &o.0)
    }

    pub fn mul(&self, o: &Fixed) -> Fixed {
        Fixed((&self.0 * &o.0) >> BITS)
    }

    pub fn div(&self, o: &Fixed) -> Fixed {
        Fixed((&self.0 << BITS) / &o.0)
    }

    pub fn div_int(&self, d: i64) -> Fixed {
        Fixed(&self.0 / d)
    }

    pub fn sqrt(&self) -> Fixed {
        assert!(self.0.sign() != Sign::Minus);
        Fixed((&self.0 << BITS).sqrt())
    }

    fn is_negligible(&self) -> bool {
        self.0.abs() < BigInt::from(16)
    }
}

/// `atan(1 / x)` by its alternating series.
fn atan_inv(x: i64) -> Fixed {
    let x2 = x * x;
    let mut power = Fixed::from_int(1).div_int(x);
    let mut sum = power.clone();
    let mut n = 1i64;
    loop {
        power = power.div_int(x2);
        let term = power.div_int(2 * n + 1);
        if term.is_negligible() {
            return sum;
        }
        sum = if n % 2 == 1 { sum.sub(&term) } else { sum.add(&term) };
        n += 1;
    }
}

pub fn pi() -> Fixed {
    atan_inv(5).mul(&Fixed::from_int(16)).sub(&atan_inv(239).mul(&Fixed::from_int(4)))
}

/// Maclaurin series `2/sqrt(pi) * sum (-1)^n z^(2n+1) / (n! (2n+1))`.
pub fn erf(z: &Fixed) -> Fixed {
    let z2 = z.mul(z);
    let mut p = z.clone();
    let mut sum = z.clone();
    let mut n = 1i64;
    loop {
        p = Fixed(-(p.mul(&z2).0)).div_int(n);
        let term = p.div_int(2 * n + 1);
        sum = sum.add(&term);
        if term.is_negligible() && n > 2 {
            break;
        }
        n += 1;
    }
    sum.mul(&Fixed::from_int(2)).div(&pi().sqrt())
}

/// The HL-Gauss bin masses for `target`, evaluated with every input taken
/// as the exact value of its f64 representation.
pub fn hl_gauss_probs(target: f64, edges: &[f64], sigma: f64, guard: f64) -> Vec<f64> {
    let scale = Fixed::from_f64(sigma).mul(&Fixed::from_int(2).sqrt());
    let t = Fixed::from_f64(target);
    let cdf: Vec<Fixed> = edges
        .iter()
        .map(|&e| erf(&Fixed::from_f64(e).sub(&t).div(&scale)))
        .collect();
    let norm = cdf[cdf.len() - 1].sub(&cdf[0]).add(&Fixed::from_f64(guard));
    cdf.windows(2).map(|w| w[1].sub(&w[0]).div(&norm).to_f64()).collect()
}

pub fn rational(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite")
}

/// Expected max of a uniform `k`-subset, enumerating every subset.
pub fn eop_enumerated(scores: &[BigRational], k: usize) -> BigRational {
    let n = scores.len();
    let mut total = BigRational::zero();
    let mut count = 0u64;
    for mask in 0u32..(1u32 << n) {
        if mask.count_ones() as usize != k {
            continue;
        }
        let best = (0..n)
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| &scores[i])
            .max()
            .expect("k >= 1")
            .clone();
        total += best;
        count += 1;
    }
    total / BigRational::from_integer(BigInt::from(count))
}

/// The order-statistic closed form evaluated in exact arithmetic.
pub fn eop_closed_form_exact(scores: &[BigRational], k: usize, binomial: impl Fn(usize, usize) -> u128) -> BigRational {
    let mut sorted = scores.to_vec();
    sorted.sort();
    let mut acc = BigRational::zero();
    for (i, s) in sorted.iter().enumerate().skip(k - 1) {
        acc += s * BigRational::from_integer(BigInt::from(binomial(i, k - 1)));
    }
    acc / BigRational::from_integer(BigInt::from(binomial(sorted.len(), k)))
}

/// Every discounted suffix return of one episode, each summed forward from
/// its start in exact arithmetic.
pub fn suffix_returns(rewards: &[f32], gamma: f64) -> Vec<BigRational> {
    let g = rational(gamma);
    (0..rewards.len())
        .map(|start| {
            let mut disc = BigRational::one();
            let mut sum = BigRational::zero();
            for &r in &rewards[start..] {
                sum += &disc * rational(f64::from(r));
                disc *= &g;
            }
            sum
        })
        .collect()
}
