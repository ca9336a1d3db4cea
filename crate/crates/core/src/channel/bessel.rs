//! Bessel functions of the first kind, integer order.
//!
//! Small arguments use the ascending power series. Larger arguments use
//! Miller's backward recurrence normalised by `J₀ + 2ΣJ₂ₖ = 1`, which stays
//! accurate for every order and for arguments well past where the series
//! loses digits to cancellation.

const SERIES_MAX_ARG: f64 = 6.0;
const RESCALE_AT: f64 = 1e250;

/// `J_n(x)`.
pub fn bessel_j(n: u32, x: f64) -> f64 {
    if x == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    if x < 0.0 {
        let v = bessel_j(n, -x);
        return if n % 2 == 1 { -v } else { v };
    }
    if x <= SERIES_MAX_ARG {
        series(n, x)
    } else {
        miller(n, x)
    }
}

fn series(n: u32, x: f64) -> f64 {
    let half = 0.5 * x;
    let q = half * half;
    // (x/2)^n / n!
    let mut term = 1.0;
    for i in 1..=n {
        term *= half / i as f64;
    }
    let mut sum = term;
    for k in 1..200 {
        let kf = k as f64;
        term *= -q / (kf * (kf + n as f64));
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

fn miller(n: u32, x: f64) -> f64 {
    let top = (n as f64).max(x);
    let mut start = (top + 30.0 + 12.0 * top.cbrt()) as usize;
    start += start % 2;
    let mut next = 0.0; // J_{k+1}
    let mut cur = 1e-300; // J_k
    let mut norm = 0.0;
    let mut wanted = 0.0;
    for k in (1..=start).rev() {
        // J_{k-1} = (2k/x) J_k - J_{k+1}
        let prev = 2.0 * k as f64 / x * cur - next;
        next = cur;
        cur = prev;
        if k - 1 == n as usize {
            wanted = cur;
        }
        if (k - 1) % 2 == 0 && k - 1 > 0 {
            norm += 2.0 * cur;
        }
        if cur.abs() > RESCALE_AT {
            cur /= RESCALE_AT;
            next /= RESCALE_AT;
            norm /= RESCALE_AT;
            wanted /= RESCALE_AT;
        }
    }
    norm += cur; // J_0
    wanted / norm
}
