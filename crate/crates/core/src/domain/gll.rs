//! Gauss–Lobatto–Legendre nodes on [-1, 1].

/// Returns the `n` Gauss–Lobatto–Legendre nodes in ascending order.
///
/// The nodes are the endpoints ±1 together with the roots of P'_{n-1}.
/// Endpoints are exact and the set is symmetrized about zero.
pub fn gll_nodes(n: usize) -> Vec<f64> {
    assert!(n >= 2, "GLL rule needs at least two nodes");
    let degree = n - 1;
    // Chebyshev–Gauss–Lobatto initial guess, refined by Newton on
    // (1 - x^2) P'_N(x) through the Legendre recurrence.
    let mut x: Vec<f64> = (0..n)
        .map(|i| (std::f64::consts::PI * i as f64 / degree as f64).cos())
        .collect();
    for _ in 0..100 {
        let mut max_step: f64 = 0.0;
        for xi in x.iter_mut() {
            let (p_n, p_nm1) = legendre_pair(degree, *xi);
            let step = (*xi * p_n - p_nm1) / (n as f64 * p_n);
            *xi -= step;
            max_step = max_step.max(step.abs());
        }
        if max_step < 1e-16 {
            break;
        }
    }
    x.reverse();
    x[0] = -1.0;
    x[n - 1] = 1.0;
    for i in 0..n / 2 {
        let sym = 0.5 * (x[n - 1 - i] - x[i]);
        x[i] = -sym;
        x[n - 1 - i] = sym;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    x
}

/// (P_N(x), P_{N-1}(x)).
fn legendre_pair(degree: usize, x: f64) -> (f64, f64) {
    let mut prev = 1.0;
    let mut cur = x;
    if degree == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=degree {
        let next = ((2 * k - 1) as f64 * x * cur - (k - 1) as f64 * prev) / k as f64;
        prev = cur;
        cur = next;
    }
    (cur, prev)
}
