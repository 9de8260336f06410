//! Exact coefficient fields for span computations.
//!
//! `PrimeField` keeps residues in Montgomery form, so multiplication is two
//! 64x64 products and no 128-bit division. `RationalField` is the slow exact
//! reference.

use std::fmt;
use std::hash::Hash;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::Rng;

use crate::error::{Error, Result};

/// 2^61 - 1.
pub const PRIME_1: u64 = 2_305_843_009_213_693_951;
/// 2^60 - 93.
pub const PRIME_2: u64 = 1_152_921_504_606_846_883;

pub trait Field: Clone + Send + Sync + fmt::Debug {
    type Elem: Clone + PartialEq + Eq + Hash + fmt::Debug + Send + Sync;

    fn zero(&self) -> Self::Elem;
    fn one(&self) -> Self::Elem;
    #[allow(clippy::wrong_self_convention)] // elements depend on the modulus
    fn from_u64(&self, x: u64) -> Self::Elem;
    fn is_zero(&self, a: &Self::Elem) -> bool;
    fn add(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn sub(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn mul(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn neg(&self, a: &Self::Elem) -> Self::Elem;
    /// Panics on zero.
    fn inv(&self, a: &Self::Elem) -> Self::Elem;
    fn random<R: Rng + ?Sized>(&self, rng: &mut R) -> Self::Elem;
    fn describe(&self) -> String;

    /// `dst -= f * src`.
    fn sub_scaled(&self, dst: &mut [Self::Elem], f: &Self::Elem, src: &[Self::Elem]) {
        for (d, s) in dst.iter_mut().zip(src) {
            if !self.is_zero(s) {
                *d = self.sub(d, &self.mul(f, s));
            }
        }
    }

    fn scale(&self, v: &mut [Self::Elem], f: &Self::Elem) {
        for x in v.iter_mut() {
            *x = self.mul(x, f);
        }
    }

    /// `acc += a * b`.
    fn mul_add(&self, acc: &mut Self::Elem, a: &Self::Elem, b: &Self::Elem) {
        *acc = self.add(acc, &self.mul(a, b));
    }
}

/// Deterministic Miller–Rabin for 64-bit inputs.
pub fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    const BASES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    for p in BASES {
        if n.is_multiple_of(p) {
            return n == p;
        }
    }
    let mulmod = |a: u64, b: u64| ((a as u128 * b as u128) % n as u128) as u64;
    let powmod = |mut b: u64, mut e: u64| {
        let mut r = 1u64;
        while e > 0 {
            if e & 1 == 1 {
                r = mulmod(r, b);
            }
            b = mulmod(b, b);
            e >>= 1;
        }
        r
    };
    let s = (n - 1).trailing_zeros();
    let d = (n - 1) >> s;
    'witness: for a in BASES {
        let mut x = powmod(a, d);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mulmod(x, x);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Integers modulo an odd prime below 2^63, in Montgomery representation
/// with R = 2^64.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PrimeField {
    p: u64,
    /// -p^{-1} mod 2^64
    p_neg_inv: u64,
    /// R^2 mod p
    r2: u64,
}

impl PrimeField {
    pub fn new(p: u64) -> Result<Self> {
        if !(3..1 << 63).contains(&p) || !is_prime_u64(p) {
            return Err(Error::Precondition(format!(
                "{p} is not an odd prime below 2^63"
            )));
        }
        // Newton iteration for p^{-1} mod 2^64.
        let mut inv: u64 = 1;
        for _ in 0..6 {
            inv = inv.wrapping_mul(2u64.wrapping_sub(p.wrapping_mul(inv)));
        }
        let r1 = ((1u128 << 64) % p as u128) as u64;
        let r2 = ((r1 as u128 * r1 as u128) % p as u128) as u64;
        Ok(PrimeField {
            p,
            p_neg_inv: inv.wrapping_neg(),
            r2,
        })
    }

    pub fn modulus(&self) -> u64 {
        self.p
    }

    #[inline(always)]
    fn redc(&self, t: u128) -> u64 {
        let m = (t as u64).wrapping_mul(self.p_neg_inv);
        let u = ((t + m as u128 * self.p as u128) >> 64) as u64;
        if u >= self.p {
            u - self.p
        } else {
            u
        }
    }

    #[inline(always)]
    fn mont_mul(&self, a: u64, b: u64) -> u64 {
        self.redc(a as u128 * b as u128)
    }

    #[inline(always)]
    fn mont_add(&self, a: u64, b: u64) -> u64 {
        let s = a + b;
        if s >= self.p {
            s - self.p
        } else {
            s
        }
    }

    #[inline(always)]
    fn mont_sub(&self, a: u64, b: u64) -> u64 {
        if a >= b {
            a - b
        } else {
            a + self.p - b
        }
    }

    /// Leaves Montgomery form.
    pub fn to_u64(&self, a: u64) -> u64 {
        self.redc(a as u128)
    }
}

impl Field for PrimeField {
    type Elem = u64;

    fn zero(&self) -> u64 {
        0
    }

    fn one(&self) -> u64 {
        self.from_u64(1)
    }

    fn from_u64(&self, x: u64) -> u64 {
        self.mont_mul(x % self.p, self.r2)
    }

    #[inline(always)]
    fn is_zero(&self, a: &u64) -> bool {
        *a == 0
    }

    #[inline(always)]
    fn add(&self, a: &u64, b: &u64) -> u64 {
        self.mont_add(*a, *b)
    }

    #[inline(always)]
    fn sub(&self, a: &u64, b: &u64) -> u64 {
        self.mont_sub(*a, *b)
    }

    #[inline(always)]
    fn mul(&self, a: &u64, b: &u64) -> u64 {
        self.mont_mul(*a, *b)
    }

    fn neg(&self, a: &u64) -> u64 {
        if *a == 0 {
            0
        } else {
            self.p - a
        }
    }

    fn inv(&self, a: &u64) -> u64 {
        assert!(*a != 0, "inverse of zero");
        let mut base = *a;
        let mut e = self.p - 2;
        let mut r = self.one();
        while e > 0 {
            if e & 1 == 1 {
                r = self.mont_mul(r, base);
            }
            base = self.mont_mul(base, base);
            e >>= 1;
        }
        r
    }

    fn random<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        // any residue is a valid Montgomery representative
        rng.random_range(0..self.p)
    }

    fn describe(&self) -> String {
        format!("prime({})", self.p)
    }

    fn sub_scaled(&self, dst: &mut [u64], f: &u64, src: &[u64]) {
        let f = *f;
        for (d, &s) in dst.iter_mut().zip(src) {
            if s != 0 {
                *d = self.mont_sub(*d, self.mont_mul(f, s));
            }
        }
    }

    #[inline(always)]
    fn mul_add(&self, acc: &mut u64, a: &u64, b: &u64) {
        *acc = self.mont_add(*acc, self.mont_mul(*a, *b));
    }
}

/// Exact rationals.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RationalField;

impl Field for RationalField {
    type Elem = BigRational;

    fn zero(&self) -> BigRational {
        BigRational::zero()
    }

    fn one(&self) -> BigRational {
        BigRational::one()
    }

    fn from_u64(&self, x: u64) -> BigRational {
        BigRational::from_integer(BigInt::from(x))
    }

    fn is_zero(&self, a: &BigRational) -> bool {
        a.is_zero()
    }

    fn add(&self, a: &BigRational, b: &BigRational) -> BigRational {
        a + b
    }

    fn sub(&self, a: &BigRational, b: &BigRational) -> BigRational {
        a - b
    }

    fn mul(&self, a: &BigRational, b: &BigRational) -> BigRational {
        a * b
    }

    fn neg(&self, a: &BigRational) -> BigRational {
        -a
    }

    fn inv(&self, a: &BigRational) -> BigRational {
        assert!(!a.is_zero(), "inverse of zero");
        a.recip()
    }

    fn random<R: Rng + ?Sized>(&self, rng: &mut R) -> BigRational {
        self.from_u64(rng.random_range(1..=1 << 20))
    }

    fn describe(&self) -> String {
        "rational".into()
    }
}
