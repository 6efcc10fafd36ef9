use std::f64::consts::{PI, TAU};

/// Reduce an angle to [0, 2π).
#[inline]
pub fn reduce(theta: f64) -> f64 {
    let r = theta.rem_euclid(TAU);
    // rem_euclid can return exactly TAU for tiny negative inputs
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Shortest distance between two angles on the circle, in [0, π].
#[inline]
pub fn circular_distance(a: f64, b: f64) -> f64 {
    let d = reduce(a - b);
    d.min(TAU - d)
}

/// Whether `theta` lies in the closed arc running counter-clockwise from
/// `start` to `end`.
pub fn in_arc(theta: f64, start: f64, end: f64) -> bool {
    let span = reduce(end - start);
    let offset = reduce(theta - start);
    if span == 0.0 && reduce(end) != reduce(start) {
        return false;
    }
    // full-circle arcs come in with end - start = 2π
    if (end - start - TAU).abs() < 1e-15 {
        return true;
    }
    offset <= span
}

/// Wrap into (−π, π].
#[inline]
pub fn wrap_pi(theta: f64) -> f64 {
    let r = reduce(theta);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reduce_range() {
        assert_eq!(reduce(0.0), 0.0);
        assert!((reduce(-0.5) - (TAU - 0.5)).abs() < 1e-15);
        assert!((reduce(7.0) - (7.0 - TAU)).abs() < 1e-15);
        assert!(reduce(-1e-300) < TAU);
    }

    #[test]
    fn arcs_across_zero() {
        assert!(in_arc(0.1, TAU - 0.2, 0.3));
        assert!(!in_arc(0.5, TAU - 0.2, 0.3));
        assert!(in_arc(3.0, 0.0, TAU));
    }

    #[test]
    fn distance_is_symmetric() {
        assert!((circular_distance(0.1, TAU - 0.1) - 0.2).abs() < 1e-14);
        assert!((circular_distance(TAU - 0.1, 0.1) - 0.2).abs() < 1e-14);
    }
}
