//! Hermite polynomials scaled by `1/sqrt(2^n n!)`.
//!
//! The scaled polynomials `h_n(u) = H_n(u) / sqrt(2^n n!)` obey
//! `h_{n+1} = sqrt(2/(n+1)) u h_n - sqrt(n/(n+1)) h_{n-1}`, which stays well
//! conditioned far beyond the orders used here. The Gaussian envelope is kept
//! separate so quadrature can factor it out.

/// Fills `out[0..=n_max]` with `h_0(u) ..= h_{n_max}(u)`.
pub fn scaled_hermite_into(u: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    if out.len() == 1 {
        return;
    }
    out[1] = std::f64::consts::SQRT_2 * u;
    for n in 1..out.len() - 1 {
        let nf = n as f64;
        out[n + 1] = (2.0 / (nf + 1.0)).sqrt() * u * out[n] - (nf / (nf + 1.0)).sqrt() * out[n - 1];
    }
}

/// `H_n(u) / sqrt(2^n n!)` for a single order.
pub fn scaled_hermite(n: usize, u: f64) -> f64 {
    let mut prev = 0.0;
    let mut cur = 1.0;
    for k in 0..n {
        let kf = k as f64;
        let next = (2.0 / (kf + 1.0)).sqrt() * u * cur - (kf / (kf + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Physicists' Hermite polynomial `H_n(u)` by the unscaled recurrence.
pub fn hermite(n: usize, u: f64) -> f64 {
    let mut prev = 0.0;
    let mut cur = 1.0;
    for k in 0..n {
        let next = 2.0 * u * cur - 2.0 * k as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn low_orders() {
        assert_eq!(hermite(0, 0.3), 1.0);
        assert_eq!(hermite(1, 0.3), 0.6);
        assert!((hermite(2, 0.3) - (4.0 * 0.09 - 2.0)).abs() < 1e-15);
        assert!((hermite(3, 0.5) - (8.0 * 0.125 - 12.0 * 0.5)).abs() < 1e-14);
    }

    #[test]
    fn scaled_matches_unscaled() {
        let mut buf = [0.0; 17];
        for &u in &[-2.3, -0.4, 0.0, 0.9, 3.1] {
            scaled_hermite_into(u, &mut buf);
            let mut norm = 1.0f64;
            for (n, &h) in buf.iter().enumerate() {
                if n > 0 {
                    norm *= 2.0 * n as f64;
                }
                let expect = hermite(n, u) / norm.sqrt();
                assert!((h - expect).abs() <= 1e-12 * expect.abs().max(1.0), "n={n} u={u}");
                assert!((scaled_hermite(n, u) - h).abs() <= 1e-13 * h.abs().max(1.0));
            }
        }
    }
}
