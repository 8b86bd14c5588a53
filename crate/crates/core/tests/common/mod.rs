#![allow(dead_code)] // each test target uses its own subset of the oracles

//! Independent numeric oracles for the integration tests. Everything here
//! deliberately avoids the library's own factorization and sampling paths:
//! determinants by cofactor expansion, inverses by Gauss–Jordan,
//! eigenvalues by Jacobi rotations, and integrals by composite Simpson.

use wde_core::mat::Mat;

/// Determinant by cofactor expansion along the first row. Exponential cost;
/// fine for the d ≤ 8 oracle sizes.
pub fn cofactor_det(m: &Mat<f64>) -> f64 {
    let n = m.nrows();
    assert!(m.is_square());
    if n == 1 {
        return m[(0, 0)];
    }
    let mut det = 0.0;
    for j in 0..n {
        let rows: Vec<usize> = (1..n).collect();
        let cols: Vec<usize> = (0..n).filter(|&c| c != j).collect();
        let minor = m.select(&rows, &cols);
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        det += sign * m[(0, j)] * cofactor_det(&minor);
    }
    det
}

/// Dense inverse via Gauss–Jordan elimination with partial pivoting.
pub fn gauss_jordan_inverse(m: &Mat<f64>) -> Mat<f64> {
    let n = m.nrows();
    assert!(m.is_square());
    let mut a = m.clone();
    let mut inv = Mat::<f64>::identity(n);
    for col in 0..n {
        let mut pivot = col;
        for r in col + 1..n {
            if a[(r, col)].abs() > a[(pivot, col)].abs() {
                pivot = r;
            }
        }
        assert!(a[(pivot, col)].abs() > 1e-14, "singular matrix in oracle");
        if pivot != col {
            for j in 0..n {
                let (x, y) = (a[(col, j)], a[(pivot, j)]);
                a[(col, j)] = y;
                a[(pivot, j)] = x;
                let (x, y) = (inv[(col, j)], inv[(pivot, j)]);
                inv[(col, j)] = y;
                inv[(pivot, j)] = x;
            }
        }
        let p = a[(col, col)];
        for j in 0..n {
            a[(col, j)] /= p;
            inv[(col, j)] /= p;
        }
        for r in 0..n {
            if r != col {
                let factor = a[(r, col)];
                for j in 0..n {
                    a[(r, j)] -= factor * a[(col, j)];
                    inv[(r, j)] -= factor * inv[(col, j)];
                }
            }
        }
    }
    inv
}

/// Eigenvalues of a symmetric matrix by the cyclic Jacobi method.
pub fn jacobi_eigenvalues(m: &Mat<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut a = m.clone();
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                off += a[(i, j)] * a[(i, j)];
            }
        }
        if off.sqrt() < 1e-13 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[(p, q)].abs() < 1e-15 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    eig.sort_by(|x, y| x.partial_cmp(y).unwrap());
    eig
}

/// Composite Simpson quadrature on `[a, b]`.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
    let n = intervals + intervals % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let x = a + h * i as f64;
        s += f(x) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// Expectation of `g` against a one-dimensional centered normal with
/// variance `var`, by quadrature over ±12 standard deviations.
pub fn gauss_expect_1d(g: impl Fn(f64) -> f64, mean: f64, var: f64) -> f64 {
    let sd = var.sqrt();
    let density = |x: f64| {
        (-((x - mean) * (x - mean)) / (2.0 * var)).exp()
            / (sd * (2.0 * std::f64::consts::PI).sqrt())
    };
    simpson(
        |x| g(x) * density(x),
        mean - 12.0 * sd,
        mean + 12.0 * sd,
        4000,
    )
}
