//! Linear solves for expected hitting times: E = cost + P·E on transient
//! states, E = 0 on absorbing ones.
//!
//! Float mode is dense Gaussian elimination with partial pivoting.  Rational
//! mode eliminates the same dense system modulo several 62-bit primes,
//! combines the residues with the Chinese remainder theorem, lifts each value
//! to a fraction by rational reconstruction, and finally substitutes the
//! candidate solution back into the chain equations in exact big-rational
//! arithmetic.  A wrong lift cannot survive that substitution, it only costs
//! another round of primes.  Direct fraction elimination was rejected:
//! intermediate denominators explode even on mid-size chains, while one
//! modular elimination is pure u64 work.

use num::bigint::BigInt;
use num::integer::Integer;
use num::rational::BigRational;
use num::{One, Signed, ToPrimitive, Zero};

use crate::chain::{Chain, Kernel};
use crate::{Error, Result};

/// Transient-count cap for the dense matrix; past this the allocation alone
/// is hundreds of megabytes and the cubic elimination takes hours.
pub(crate) const MAX_TRANSIENTS: usize = 6000;

const PRIME_CAP: usize = 64;

// ---------------------------------------------------------------- f64 path

pub(crate) fn solve_f64(chain: &Chain, param: f64) -> Result<Vec<f64>> {
    let (trans, back) = chain.transients();
    let s = trans.len();
    if s > MAX_TRANSIENTS {
        return Err(Error::MemoryGuard { transients: s });
    }
    let mut values = vec![0.0f64; chain.states.len()];
    if s == 0 {
        return Ok(values);
    }
    let w = s + 1;
    let mut a = vec![0.0f64; s * w];
    for (ti, &si) in trans.iter().enumerate() {
        let row = &chain.rows[si as usize];
        let m = row.tokens as i32;
        let base = ti * w;
        a[base + ti] = 1.0;
        a[base + s] = match chain.kernel {
            Kernel::Sync => 1.0,
            Kernel::Async => 1.0 / (row.tokens as f64 * param),
        };
        for arc in &row.arcs {
            let p = match chain.kernel {
                Kernel::Sync => {
                    arc.count as f64
                        * param.powi(arc.movers as i32)
                        * (1.0 - param).powi(m - arc.movers as i32)
                }
                Kernel::Async => arc.count as f64 / row.tokens as f64,
            };
            if let Some(tj) = back[arc.succ as usize] {
                a[base + tj as usize] -= p;
            }
        }
    }
    let x = gauss_f64(&mut a, s)?;
    for (ti, &si) in trans.iter().enumerate() {
        values[si as usize] = x[ti];
    }
    Ok(values)
}

fn gauss_f64(a: &mut [f64], s: usize) -> Result<Vec<f64>> {
    let w = s + 1;
    for col in 0..s {
        let mut piv = col;
        let mut best = a[col * w + col].abs();
        for r in col + 1..s {
            let v = a[r * w + col].abs();
            if v > best {
                best = v;
                piv = r;
            }
        }
        if best == 0.0 {
            return Err(Error::Solve("singular transition system".into()));
        }
        if piv != col {
            for k in col..w {
                a.swap(col * w + k, piv * w + k);
            }
        }
        let d = a[col * w + col];
        for r in col + 1..s {
            let f = a[r * w + col] / d;
            if f == 0.0 {
                continue;
            }
            a[r * w + col] = 0.0;
            for k in col + 1..w {
                a[r * w + k] -= f * a[col * w + k];
            }
        }
    }
    let mut x = vec![0.0f64; s];
    for col in (0..s).rev() {
        let mut acc = a[col * w + s];
        for k in col + 1..s {
            acc -= a[col * w + k] * x[k];
        }
        x[col] = acc / a[col * w + col];
    }
    Ok(x)
}

// ------------------------------------------------------------- u64 mod p

fn mulmod(a: u64, b: u64, p: u64) -> u64 {
    ((a as u128 * b as u128) % p as u128) as u64
}

fn powmod(mut b: u64, mut e: u64, p: u64) -> u64 {
    let mut acc = 1u64;
    b %= p;
    while e > 0 {
        if e & 1 == 1 {
            acc = mulmod(acc, b, p);
        }
        b = mulmod(b, b, p);
        e >>= 1;
    }
    acc
}

fn invmod(a: u64, p: u64) -> u64 {
    debug_assert!(a % p != 0);
    powmod(a, p - 2, p)
}

fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for &q in &[2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n == q {
            return true;
        }
        if n % q == 0 {
            return false;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d % 2 == 0 {
        d /= 2;
        s += 1;
    }
    // deterministic witness set for every 64-bit candidate
    'witness: for &a in &[2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = powmod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 0..s - 1 {
            x = mulmod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

fn big_mod(x: &BigInt, p: u64) -> u64 {
    x.mod_floor(&BigInt::from(p))
        .to_u64()
        .expect("residue fits u64")
}

/// Solve the chain equations modulo `p`.  Returns one residue per transient
/// state, or None when the prime is unusable (a kernel denominator or an
/// elimination pivot vanishes mod p).
fn solve_mod_p(
    chain: &Chain,
    trans: &[u32],
    back: &[Option<u32>],
    num: &BigInt,
    den: &BigInt,
    p: u64,
) -> Option<Vec<u64>> {
    let s = trans.len();
    let w = s + 1;
    let num_p = big_mod(num, p);
    let den_p = big_mod(den, p);
    if den_p == 0 {
        return None;
    }

    let max_m = chain.rows.iter().map(|r| r.tokens).max().unwrap_or(1) as usize;
    // per-kernel tables: probability of an arc given (movers, tokens)
    let (r_pow, q_pow) = match chain.kernel {
        Kernel::Sync => {
            let r_p = mulmod(num_p, invmod(den_p, p), p);
            let q_p = (1 + p - r_p) % p;
            let mut rp = vec![1u64; max_m + 1];
            let mut qp = vec![1u64; max_m + 1];
            for k in 1..=max_m {
                rp[k] = mulmod(rp[k - 1], r_p, p);
                qp[k] = mulmod(qp[k - 1], q_p, p);
            }
            (rp, qp)
        }
        Kernel::Async => (Vec::new(), Vec::new()),
    };

    let mut a = vec![0u64; s * w];
    for (ti, &si) in trans.iter().enumerate() {
        let row = &chain.rows[si as usize];
        let m = row.tokens as usize;
        let base = ti * w;
        a[base + ti] = 1;
        a[base + s] = match chain.kernel {
            Kernel::Sync => 1,
            Kernel::Async => {
                // cost 1/(m·λ) = den/(m·num)
                let d = mulmod(m as u64 % p, num_p, p);
                if d == 0 {
                    return None;
                }
                mulmod(den_p, invmod(d, p), p)
            }
        };
        let inv_m = match chain.kernel {
            Kernel::Sync => 0,
            Kernel::Async => invmod(m as u64 % p, p),
        };
        for arc in &row.arcs {
            let prob = match chain.kernel {
                Kernel::Sync => {
                    let k = arc.movers as usize;
                    mulmod(arc.count % p, mulmod(r_pow[k], q_pow[m - k], p), p)
                }
                Kernel::Async => mulmod(arc.count % p, inv_m, p),
            };
            if let Some(tj) = back[arc.succ as usize] {
                let cell = &mut a[base + tj as usize];
                *cell = (*cell + p - prob) % p;
            }
        }
    }

    // forward elimination
    for col in 0..s {
        let mut piv = None;
        for r in col..s {
            if a[r * w + col] != 0 {
                piv = Some(r);
                break;
            }
        }
        let piv = piv?;
        if piv != col {
            for k in col..w {
                a.swap(col * w + k, piv * w + k);
            }
        }
        let inv_d = invmod(a[col * w + col], p);
        for r in col + 1..s {
            let lead = a[r * w + col];
            if lead == 0 {
                continue;
            }
            let f = mulmod(lead, inv_d, p);
            a[r * w + col] = 0;
            for k in col + 1..w {
                let sub = mulmod(f, a[col * w + k], p);
                let cell = &mut a[r * w + k];
                *cell = (*cell + p - sub) % p;
            }
        }
    }
    // back substitution
    let mut x = vec![0u64; s];
    for col in (0..s).rev() {
        let mut acc = a[col * w + s];
        for k in col + 1..s {
            let sub = mulmod(a[col * w + k], x[k], p);
            acc = (acc + p - sub) % p;
        }
        x[col] = mulmod(acc, invmod(a[col * w + col], p), p);
    }
    Some(x)
}

/// Lift residue `x` mod `q` to a fraction with numerator and denominator
/// bounded by sqrt(q/2), the classical half-extended Euclid walk.
fn rational_reconstruct(x: &BigInt, q: &BigInt) -> Option<BigRational> {
    let bound = (q / 2i32).sqrt();
    let mut r0 = q.clone();
    let mut r1 = x.mod_floor(q);
    let mut t0 = BigInt::zero();
    let mut t1 = BigInt::one();
    while r1 > bound {
        let quo = &r0 / &r1;
        let r2 = &r0 - &quo * &r1;
        let t2 = &t0 - &quo * &t1;
        r0 = r1;
        r1 = r2;
        t0 = t1;
        t1 = t2;
    }
    if t1.is_zero() {
        return None;
    }
    let (mut num, mut den) = (r1, t1);
    if den.is_negative() {
        num = -num;
        den = -den;
    }
    if den > bound {
        return None;
    }
    let g = num.gcd(&den);
    if !g.is_one() {
        num /= &g;
        den /= &g;
    }
    Some(BigRational::new(num, den))
}

/// Substitute a candidate solution into every chain equation using exact
/// arithmetic.  True means the candidate IS the hitting-time vector.
fn verify_exact(
    chain: &Chain,
    trans: &[u32],
    back: &[Option<u32>],
    param: &BigRational,
    vals: &[BigRational],
) -> bool {
    let max_m = chain.rows.iter().map(|r| r.tokens).max().unwrap_or(1) as usize;
    let one = BigRational::one();
    let (r_pow, q_pow) = match chain.kernel {
        Kernel::Sync => {
            let q = &one - param;
            let mut rp = vec![one.clone(); max_m + 1];
            let mut qp = vec![one.clone(); max_m + 1];
            for k in 1..=max_m {
                rp[k] = &rp[k - 1] * param;
                qp[k] = &qp[k - 1] * &q;
            }
            (rp, qp)
        }
        Kernel::Async => (Vec::new(), Vec::new()),
    };
    for (ti, &si) in trans.iter().enumerate() {
        let row = &chain.rows[si as usize];
        let m = row.tokens as usize;
        let cost = match chain.kernel {
            Kernel::Sync => one.clone(),
            Kernel::Async => BigRational::new(BigInt::one(), BigInt::from(m as u64)) / param,
        };
        let mut acc = vals[ti].clone() - cost;
        for arc in &row.arcs {
            let Some(tj) = back[arc.succ as usize] else {
                continue;
            };
            let prob = match chain.kernel {
                Kernel::Sync => {
                    let k = arc.movers as usize;
                    BigRational::from_integer(BigInt::from(arc.count)) * &r_pow[k] * &q_pow[m - k]
                }
                Kernel::Async => BigRational::new(BigInt::from(arc.count), BigInt::from(m as u64)),
            };
            acc -= prob * &vals[tj as usize];
        }
        if !acc.is_zero() {
            return false;
        }
    }
    true
}

pub(crate) fn solve_exact(chain: &Chain, param: &BigRational) -> Result<Vec<BigRational>> {
    let (trans, back) = chain.transients();
    let s = trans.len();
    if s > MAX_TRANSIENTS {
        return Err(Error::MemoryGuard { transients: s });
    }
    let zero = BigRational::zero();
    let mut values = vec![zero; chain.states.len()];
    if s == 0 {
        return Ok(values);
    }

    let num = param.numer().clone();
    let den = param.denom().clone();

    // residues per transient, combined over the primes used so far
    let mut residue: Vec<BigInt> = vec![BigInt::zero(); s];
    let mut modulus = BigInt::one();
    let mut used = 0usize;
    let mut checkpoints = [1usize, 2, 4, 8, 16, 32, PRIME_CAP].into_iter();
    let mut next_check = checkpoints.next().unwrap();

    let mut candidate = (1u64 << 62) - 1;
    while used < PRIME_CAP {
        // next prime below 2^62
        while !is_prime(candidate) {
            candidate -= 2;
        }
        let p = candidate;
        candidate -= 2;

        let Some(xs) = solve_mod_p(chain, &trans, &back, &num, &den, p) else {
            continue; // unusable prime, try another
        };
        let inv_q = invmod(big_mod(&modulus, p), p);
        for (res, &xp) in residue.iter_mut().zip(xs.iter()) {
            let cur = big_mod(res, p);
            let delta = mulmod((xp + p - cur) % p, inv_q, p);
            *res += &modulus * BigInt::from(delta);
        }
        modulus *= BigInt::from(p);
        used += 1;

        if used < next_check {
            continue;
        }
        next_check = checkpoints.next().unwrap_or(PRIME_CAP);

        let lifted: Option<Vec<BigRational>> = residue
            .iter()
            .map(|r| rational_reconstruct(r, &modulus))
            .collect();
        if let Some(vals) = lifted {
            if verify_exact(chain, &trans, &back, param, &vals) {
                for (ti, &si) in trans.iter().enumerate() {
                    values[si as usize] = vals[ti].clone();
                }
                return Ok(values);
            }
        }
    }
    Err(Error::Solve(format!(
        "rational lift failed to stabilize within {PRIME_CAP} primes"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn miller_rabin_agrees_with_trial_division() {
        let slow = |n: u64| -> bool {
            if n < 2 {
                return false;
            }
            let mut d = 2;
            while d * d <= n {
                if n % d == 0 {
                    return false;
                }
                d += 1;
            }
            true
        };
        for n in 0..2000u64 {
            assert_eq!(is_prime(n), slow(n), "n = {n}");
        }
        assert!(is_prime((1 << 61) - 1)); // Mersenne prime
        assert!(!is_prime((1 << 62) - 1)); // 3 · 715827883 · 2147483647
    }

    #[test]
    fn reconstruction_recovers_simple_fractions() {
        let p = (1u64 << 62) - 57; // any large prime works for the test
        assert!(is_prime(p));
        let q = BigInt::from(p);
        for (a, b) in [(1i64, 3i64), (44, 15), (2000, 377), (-7, 11)] {
            let target = BigRational::new(BigInt::from(a), BigInt::from(b));
            let residue = {
                let num = big_mod(&BigInt::from(a), p);
                let den = big_mod(&BigInt::from(b), p);
                BigInt::from(mulmod(num, invmod(den, p), p))
            };
            let lifted = rational_reconstruct(&residue, &q).unwrap();
            assert_eq!(lifted, target);
        }
    }
}
