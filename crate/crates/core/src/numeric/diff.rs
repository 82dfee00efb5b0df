//! Fourth-order central difference stencils and Richardson extrapolation.

/// First derivative from samples at `-2s, -s, +s, +2s`.
pub fn d1(f: [f64; 4], s: f64) -> f64 {
    let [m2, m1, p1, p2] = f;
    (-p2 + 8.0 * p1 - 8.0 * m1 + m2) / (12.0 * s)
}

/// Second derivative from samples at `-2s, -s, 0, +s, +2s`.
pub fn d2(f: [f64; 5], s: f64) -> f64 {
    let [m2, m1, c, p1, p2] = f;
    (-p2 + 16.0 * p1 - 30.0 * c + 16.0 * m1 - m2) / (12.0 * s * s)
}

/// Third derivative from samples at `-3s..=3s` (the centre sample is unused).
pub fn d3(f: [f64; 7], s: f64) -> f64 {
    let [m3, m2, m1, _, p1, p2, p3] = f;
    (-p3 + 8.0 * p2 - 13.0 * p1 + 13.0 * m1 - 8.0 * m2 + m3) / (8.0 * s.powi(3))
}

/// Fourth derivative from samples at `-3s..=3s`.
pub fn d4(f: [f64; 7], s: f64) -> f64 {
    let [m3, m2, m1, c, p1, p2, p3] = f;
    (-p3 + 12.0 * p2 - 39.0 * p1 + 56.0 * c - 39.0 * m1 + 12.0 * m2 - m3) / (6.0 * s.powi(4))
}

/// Derivative of order `k <= 4` by the stencils above, sampling `f` at `x + m s`.
pub fn derivative<F: FnMut(f64) -> f64>(mut f: F, x: f64, s: f64, k: usize) -> f64 {
    let mut at = |m: i32| f(x + m as f64 * s);
    match k {
        0 => at(0),
        1 => d1([at(-2), at(-1), at(1), at(2)], s),
        2 => d2([at(-2), at(-1), at(0), at(1), at(2)], s),
        3 => d3([at(-3), at(-2), at(-1), 0.0, at(1), at(2), at(3)], s),
        4 => d4([at(-3), at(-2), at(-1), at(0), at(1), at(2), at(3)], s),
        _ => panic!("derivative order {k} unsupported"),
    }
}

/// Combines estimates at steps `s` and `s/2` of a method with error `O(s^order)`.
pub fn richardson(coarse: f64, fine: f64, order: i32) -> f64 {
    let r = 2f64.powi(order);
    (r * fine - coarse) / (r - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stencils_are_exact_on_low_degree_polynomials() {
        let p = |x: f64| 1.0 + x - 2.0 * x * x + 0.5 * x.powi(3) + 0.25 * x.powi(4);
        let x = 0.7;
        assert!((derivative(p, x, 0.1, 1) - (1.0 - 4.0 * x + 1.5 * x * x + x.powi(3))).abs() < 1e-11);
        assert!((derivative(p, x, 0.1, 2) - (-4.0 + 3.0 * x + 3.0 * x * x)).abs() < 1e-10);
        assert!((derivative(p, x, 0.1, 3) - (3.0 + 6.0 * x)).abs() < 1e-9);
        assert!((derivative(p, x, 0.1, 4) - 6.0).abs() < 1e-8);
    }

    #[test]
    fn stencils_converge_at_fourth_order() {
        let err = |s: f64| (derivative(f64::sin, 0.4, s, 2) + 0.4f64.sin()).abs();
        let ratio = err(0.1) / err(0.05);
        assert!((ratio - 16.0).abs() < 0.5, "ratio {ratio}");
    }

    #[test]
    fn richardson_cancels_leading_term() {
        let coarse = 1.0 + 0.5f64.powi(4);
        let fine = 1.0 + 0.25f64.powi(4);
        assert!((richardson(coarse, fine, 4) - 1.0).abs() < 1e-15);
    }
}
