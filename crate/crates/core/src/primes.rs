//! Small prime utilities: sieving, primality by trial division and
//! factorization with an explicit cap.

use crate::error::{Error, Result};

/// Default upper limit for [`factorize`].
pub const FACTORIZATION_CAP: u64 = 1_000_000_000;

/// All primes `p <= limit`, ascending.
pub fn primes_up_to(limit: u64) -> Vec<u64> {
    if limit < 2 {
        return Vec::new();
    }
    let n = limit as usize;
    let mut composite = vec![false; n + 1];
    let mut out = Vec::new();
    for i in 2..=n {
        if composite[i] {
            continue;
        }
        out.push(i as u64);
        let mut j = i * i;
        while j <= n {
            composite[j] = true;
            j += i;
        }
    }
    out
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n.is_multiple_of(2) {
        return n == 2;
    }
    let mut d = 3u64;
    while d.saturating_mul(d) <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 2;
    }
    true
}

/// `NotPrime` unless `p` is prime.
pub fn require_prime(p: u64) -> Result<()> {
    if is_prime(p) {
        Ok(())
    } else {
        Err(Error::NotPrime(p))
    }
}

/// Trial-division factorization of `1 <= n < cap` into ascending `(p, e)`.
pub fn factorize(n: u64, cap: u64) -> Result<Vec<(u64, u32)>> {
    if n == 0 || n >= cap {
        return Err(Error::FactorizationCap { n, cap });
    }
    let mut out = Vec::new();
    let mut rest = n;
    let mut d = 2u64;
    while d * d <= rest {
        if rest.is_multiple_of(d) {
            let mut e = 0;
            while rest.is_multiple_of(d) {
                rest /= d;
                e += 1;
            }
            out.push((d, e));
        }
        d += if d == 2 { 1 } else { 2 };
    }
    if rest > 1 {
        out.push((rest, 1));
    }
    Ok(out)
}

/// If `q = p^e` with `p` prime and `e >= 1`, returns `(p, e)`.
pub fn as_prime_power(q: u64) -> Option<(u64, u32)> {
    match factorize(q, u64::MAX).ok()?.as_slice() {
        [(p, e)] => Some((*p, *e)),
        _ => None,
    }
}
