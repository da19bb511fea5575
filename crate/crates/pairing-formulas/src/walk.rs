use std::f64::consts::PI;

use num::{BigInt, BigRational};
use ring_core::Direction;

use crate::driver::Kahan;
use crate::{Error, Result};

/// Eigenfunction weight of mode j for the absorbed pair walk:
/// sin(j pi y) sin(j pi u) / (1 - cos(j pi u)), with u the lattice spacing.
pub fn g(j: usize, y: f64, u: f64) -> f64 {
    let ju = j as f64 * PI * u;
    (j as f64 * PI * y).sin() * ju.sin() / (1.0 - ju.cos())
}

/// Per-step decay of mode j: 1 - 2r(1-r)(1 - cos(j pi u)).  Lies in [0, 1)
/// for every j in 1..1/u because 4r(1-r) <= 1.
pub fn h(j: usize, u: f64, r: f64) -> f64 {
    1.0 - 2.0 * r * (1.0 - r) * (1.0 - (j as f64 * PI * u).cos())
}

fn check_distance(z: usize, n: usize) -> Result<()> {
    if z < 1 || z >= n {
        return Err(Error::InvalidInput(format!(
            "pair distance {z} outside 1..={}",
            n - 1
        )));
    }
    Ok(())
}

/// Probability that a pair at clockwise distance z collides the given way:
/// down (the distance closes to 0) with probability 1 - z/n, up (it grows
/// to n) with probability z/n.  Gambler's ruin for the symmetric walk.
pub fn absorption_prob(z: usize, n: usize, direction: Direction) -> Result<f64> {
    check_distance(z, n)?;
    Ok(match direction {
        Direction::Down => 1.0 - z as f64 / n as f64,
        Direction::Up => z as f64 / n as f64,
    })
}

/// Exact-fraction form of `absorption_prob`.
pub fn absorption_prob_rational(z: usize, n: usize, direction: Direction) -> Result<BigRational> {
    check_distance(z, n)?;
    let num = match direction {
        Direction::Down => n - z,
        Direction::Up => z,
    };
    Ok(BigRational::new(BigInt::from(num), BigInt::from(n)))
}

/// P(the pair is still alive after t synchronous rounds AND eventually
/// collides at directed distance 0), for a pair started at directed
/// distance z_d: (1/n) sum over modes j of g(j, z_d/n; 1/n) h(j; 1/n)^t.
/// At t = 0 this is the plain absorption probability 1 - z_d/n.
pub fn pair_survival(z_d: usize, n: usize, r: f64, t: u64) -> f64 {
    assert!(
        z_d >= 1 && z_d < n,
        "directed distance {z_d} outside 1..{n}"
    );
    assert!(r > 0.0 && r < 1.0, "pass probability {r} outside (0,1)");
    let u = 1.0 / n as f64;
    let y = z_d as f64 * u;
    let mut acc = Kahan::new();
    for j in 1..n {
        acc.add(g(j, y, u) * h(j, u, r).powf(t as f64));
    }
    u * acc.sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_weight_reference_points() {
        // sin(pi/3)^2 / (1 - cos(pi/3)) = (3/4) / (1/2)
        assert!((g(1, 1.0 / 3.0, 1.0 / 3.0) - 1.5).abs() < 1e-12);
        // r = 1/2, u = 1/2: 1 - 0.5 (1 - cos(pi/2))
        assert!((h(1, 0.5, 0.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn absorption_examples_and_complement() {
        assert!((absorption_prob(3, 9, Direction::Down).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!((absorption_prob(3, 9, Direction::Up).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        for z in 1..9 {
            let down = absorption_prob(z, 9, Direction::Down).unwrap();
            let up = absorption_prob(z, 9, Direction::Up).unwrap();
            assert!((down + up - 1.0).abs() < 1e-15);
        }
        let exact = absorption_prob_rational(3, 9, Direction::Down).unwrap();
        assert_eq!(exact, BigRational::new(BigInt::from(2), BigInt::from(3)));
    }

    #[test]
    fn out_of_range_distance_rejected() {
        assert!(absorption_prob(0, 9, Direction::Down).is_err());
        assert!(absorption_prob(9, 9, Direction::Up).is_err());
        assert!(absorption_prob_rational(10, 9, Direction::Up).is_err());
    }

    #[test]
    fn survival_at_zero_matches_absorption() {
        for r in [0.3, 0.5] {
            for z in 1..9 {
                let s = pair_survival(z, 9, r, 0);
                let p = 1.0 - z as f64 / 9.0;
                assert!((s - p).abs() < 1e-12, "z={z} r={r}: {s} vs {p}");
            }
        }
    }

    #[test]
    fn survival_decreases_and_stays_in_range() {
        let p = absorption_prob(3, 9, Direction::Down).unwrap();
        let mut prev = f64::INFINITY;
        for t in 0..=200 {
            let s = pair_survival(3, 9, 0.5, t);
            assert!(s >= -1e-12 && s <= p + 1e-12, "t={t}: {s}");
            assert!(s <= prev + 1e-12, "t={t} not monotone");
            prev = s;
        }
        assert!(prev < 0.01, "survival should be nearly gone by t=200");
    }
}
