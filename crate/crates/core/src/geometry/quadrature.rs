//! Adaptive Gauss–Legendre quadrature.

use std::sync::LazyLock;

const ORDER: usize = 10;
const MAX_DEPTH: u32 = 40;

struct Rule {
    nodes: [f64; ORDER],
    weights: [f64; ORDER],
}

static RULE: LazyLock<Rule> = LazyLock::new(legendre_rule);

/// Nodes and weights on [-1, 1] via Newton iteration on P_n.
fn legendre_rule() -> Rule {
    let n = ORDER;
    let mut nodes = [0.0; ORDER];
    let mut weights = [0.0; ORDER];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    Rule { nodes, weights }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

fn fixed<const M: usize, F: Fn(f64) -> [f64; M]>(f: &F, a: f64, b: f64) -> [f64; M] {
    let rule = &*RULE;
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut acc = [0.0; M];
    for (x, w) in rule.nodes.iter().zip(rule.weights.iter()) {
        let v = f(mid + half * x);
        for (a, v) in acc.iter_mut().zip(v) {
            *a += w * v;
        }
    }
    for a in acc.iter_mut() {
        *a *= half;
    }
    acc
}

/// Integrates a vector-valued function over `[a, b]` until every component
/// agrees between one panel and its two halves to within `tol`.
pub fn integrate<const M: usize, F: Fn(f64) -> [f64; M]>(
    f: F,
    a: f64,
    b: f64,
    tol: f64,
) -> [f64; M] {
    if a == b {
        return [0.0; M];
    }
    let whole = fixed(&f, a, b);
    refine(&f, a, b, whole, tol, 0)
}

fn refine<const M: usize, F: Fn(f64) -> [f64; M]>(
    f: &F,
    a: f64,
    b: f64,
    whole: [f64; M],
    tol: f64,
    depth: u32,
) -> [f64; M] {
    let m = 0.5 * (a + b);
    let left = fixed(f, a, m);
    let right = fixed(f, m, b);
    let mut split = [0.0; M];
    let mut err: f64 = 0.0;
    for k in 0..M {
        split[k] = left[k] + right[k];
        err = err.max((split[k] - whole[k]).abs());
    }
    if err <= tol || depth >= MAX_DEPTH {
        return split;
    }
    let l = refine(f, a, m, left, 0.5 * tol, depth + 1);
    let r = refine(f, m, b, right, 0.5 * tol, depth + 1);
    let mut out = [0.0; M];
    for k in 0..M {
        out[k] = l[k] + r[k];
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_two() {
        let s: f64 = RULE.weights.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
    }

    #[test]
    fn polynomials_are_exact() {
        let [v] = integrate(|x| [x.powi(19) + 3.0 * x * x], 0.0, 2.0, 1e-12);
        let exact = 2f64.powi(20) / 20.0 + 8.0;
        assert!((v - exact).abs() < 1e-8 * exact);
    }

    #[test]
    fn oscillatory_integrand() {
        let [s, c] = integrate(|x| [(40.0 * x).sin(), (40.0 * x).cos()], 0.0, 3.0, 1e-12);
        assert!((s - (1.0 - (120f64).cos()) / 40.0).abs() < 1e-10);
        assert!((c - (120f64).sin() / 40.0).abs() < 1e-10);
    }
}
