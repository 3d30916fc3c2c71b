//! Gauss-Legendre nodes and weights on [-1, 1].

/// Nodes and weights of the n-point Gauss-Legendre rule, by Newton iteration
/// on the Legendre recurrence. Accurate to machine precision for the small n
/// used here.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for k in 0..n {
        // Tricomi initial guess.
        let mut x = (std::f64::consts::PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[k] = x;
        weights[k] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    nodes.reverse();
    weights.reverse();
    (nodes, weights)
}

/// Value and derivative of the Legendre polynomial P_n at x.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for m in 2..=n {
        let m = m as f64;
        let p2 = ((2.0 * m - 1.0) * x * p1 - (m - 1.0) * p0) / m;
        p0 = p1;
        p1 = p2;
    }
    let d = (n as f64) * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn integrates_polynomials_exactly() {
        // n points are exact through degree 2n-1.
        let (x, w) = gauss_legendre(8);
        let moment = |p: i32| -> f64 { x.iter().zip(&w).map(|(&x, &w)| w * x.powi(p)).sum() };
        assert_relative_eq!(moment(0), 2.0, epsilon = 1e-14);
        assert_relative_eq!(moment(14), 2.0 / 15.0, epsilon = 1e-14);
        assert!(moment(7).abs() < 1e-15);
    }

    #[test]
    fn integrates_cosine() {
        let (x, w) = gauss_legendre(16);
        let v: f64 = x.iter().zip(&w).map(|(&x, &w)| w * x.cos()).sum();
        assert_relative_eq!(v, 2.0 * 1.0f64.sin(), epsilon = 1e-14);
    }
}
