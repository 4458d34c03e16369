//! Small self-contained numerical kernels: 3×3 complex linear algebra,
//! cubic root finding, Gauss–Hermite quadrature, trapezoidal integration,
//! a fixed-step RK4 for affine complex systems, and 1-D minimization.

use num_complex::Complex64;

pub type C64 = Complex64;

/// Dense 3×3 complex matrix, row major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat3(pub [[C64; 3]; 3]);

impl Mat3 {
    pub fn mul_vec(&self, v: &[C64; 3]) -> [C64; 3] {
        let m = &self.0;
        [
            m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
            m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
            m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
        ]
    }

    pub fn trace(&self) -> C64 {
        self.0[0][0] + self.0[1][1] + self.0[2][2]
    }

    /// Sum of the three principal 2×2 minors.
    pub fn minor_sum(&self) -> C64 {
        let m = &self.0;
        (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            + (m[0][0] * m[2][2] - m[0][2] * m[2][0])
            + (m[0][0] * m[1][1] - m[0][1] * m[1][0])
    }

    pub fn det(&self) -> C64 {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Adjugate (transpose of the cofactor matrix).
    pub fn adjugate(&self) -> Mat3 {
        let m = &self.0;
        let c = |r1: usize, r2: usize, c1: usize, c2: usize| {
            m[r1][c1] * m[r2][c2] - m[r1][c2] * m[r2][c1]
        };
        Mat3([
            [c(1, 2, 1, 2), -c(0, 2, 1, 2), c(0, 1, 1, 2)],
            [-c(1, 2, 0, 2), c(0, 2, 0, 2), -c(0, 1, 0, 2)],
            [c(1, 2, 0, 1), -c(0, 2, 0, 1), c(0, 1, 0, 1)],
        ])
    }
}

/// Solve `m x = rhs` by Gaussian elimination with partial pivoting.
/// Panics on a numerically singular matrix; callers only pass resolvents
/// evaluated off the spectrum, which are always regular.
pub fn solve3(m: &Mat3, rhs: &[C64; 3]) -> [C64; 3] {
    let mut a = m.0;
    let mut b = *rhs;
    for col in 0..3 {
        let pivot = (col..3)
            .max_by(|&i, &j| {
                a[i][col]
                    .norm_sqr()
                    .partial_cmp(&a[j][col].norm_sqr())
                    .unwrap()
            })
            .unwrap();
        if a[pivot][col].norm_sqr() == 0.0 {
            panic!("solve3: singular matrix");
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        let pivot_row = a[col];
        for row in (col + 1)..3 {
            let f = a[row][col] / pivot_row[col];
            for (entry, pv) in a[row].iter_mut().zip(&pivot_row).skip(col) {
                *entry -= f * *pv;
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [C64::new(0.0, 0.0); 3];
    for row in (0..3).rev() {
        let mut s = b[row];
        for k in (row + 1)..3 {
            s -= a[row][k] * x[k];
        }
        x[row] = s / a[row][row];
    }
    x
}

/// Roots of `z³ + a z² + b z + c` with complex coefficients (Cardano with a
/// cancellation-safe branch choice, then two Newton polish steps per root).
pub fn cubic_roots(a: C64, b: C64, c: C64) -> [C64; 3] {
    let third = 1.0 / 3.0;
    let shift = a * third;
    // depressed cubic t³ + p t + q, z = t − a/3
    let p = b - a * a * third;
    let q = a * (2.0 * a * a / 27.0 - b * third) + c;

    let roots = if p.norm() == 0.0 && q.norm() == 0.0 {
        [C64::new(0.0, 0.0); 3]
    } else {
        let d = (q * q * 0.25 + p * p * p / 27.0).sqrt();
        let w1 = -q * 0.5 + d;
        let w2 = -q * 0.5 - d;
        let w = if w1.norm() >= w2.norm() { w1 } else { w2 };
        let u = w.powf(third);
        let v = if u.norm() > 0.0 {
            -p / (u * 3.0)
        } else {
            C64::new(0.0, 0.0)
        };
        let omega = C64::new(-0.5, 0.75f64.sqrt());
        let omega2 = omega.conj();
        [u + v, omega * u + omega2 * v, omega2 * u + omega * v]
    };

    let poly = |z: C64| ((z + a) * z + b) * z + c;
    let dpoly = |z: C64| (3.0 * z + 2.0 * a) * z + b;
    let mut out = [C64::new(0.0, 0.0); 3];
    for (i, t) in roots.iter().enumerate() {
        let mut z = t - shift;
        for _ in 0..2 {
            let dp = dpoly(z);
            if dp.norm() > 0.0 {
                z -= poly(z) / dp;
            }
        }
        out[i] = z;
    }
    out
}

/// Nodes and weights of n-point Gauss–Hermite quadrature for the weight
/// e^{−x²}, so that ∫ e^{−x²} f(x) dx ≈ Σ wᵢ f(xᵢ). Newton iteration on
/// the orthonormal Hermite recurrence.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0f64; n];
    let mut weights = vec![0.0f64; n];
    let nf = n as f64;
    let mut x = 0.0f64;
    for i in 0..n.div_ceil(2) {
        x = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => x - 1.14 * nf.powf(0.426) / x,
            2 => 1.86 * x - 0.86 * nodes[0],
            3 => 1.91 * x - 0.91 * nodes[1],
            _ => 2.0 * x - nodes[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..200 {
            let mut p1 = std::f64::consts::PI.powf(-0.25);
            let mut p2 = 0.0f64;
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = x * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let dx = p1 / pp;
            x -= dx;
            if dx.abs() <= 1e-15 * (1.0 + x.abs()) {
                break;
            }
        }
        nodes[i] = x;
        nodes[n - 1 - i] = -x;
        weights[i] = 2.0 / (pp * pp);
        weights[n - 1 - i] = weights[i];
    }
    // ascending order
    nodes.reverse();
    weights.reverse();
    (nodes, weights)
}

/// Trapezoidal integral of samples `ys` over (possibly non-uniform) `xs`.
pub fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let mut acc = 0.0;
    for i in 1..xs.len() {
        acc += 0.5 * (ys[i] + ys[i - 1]) * (xs[i] - xs[i - 1]);
    }
    acc
}

/// Fixed-step RK4 for the affine system dy/dt = m·y + b. Calls `observe`
/// with (step index, y) at every step, including step 0 with y0.
pub fn rk4_affine<F: FnMut(usize, &[C64; 3])>(
    m: &Mat3,
    b: &[C64; 3],
    y0: [C64; 3],
    dt: f64,
    steps: usize,
    mut observe: F,
) {
    let f = |y: &[C64; 3]| {
        let my = m.mul_vec(y);
        [my[0] + b[0], my[1] + b[1], my[2] + b[2]]
    };
    let mut y = y0;
    observe(0, &y);
    for s in 1..=steps {
        let k1 = f(&y);
        let y2 = add_scaled(&y, &k1, 0.5 * dt);
        let k2 = f(&y2);
        let y3 = add_scaled(&y, &k2, 0.5 * dt);
        let k3 = f(&y3);
        let y4 = add_scaled(&y, &k3, dt);
        let k4 = f(&y4);
        for i in 0..3 {
            y[i] += (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) * (dt / 6.0);
        }
        observe(s, &y);
    }
}

fn add_scaled(y: &[C64; 3], k: &[C64; 3], h: f64) -> [C64; 3] {
    [y[0] + k[0] * h, y[1] + k[1] * h, y[2] + k[2] * h]
}

/// Golden-section minimum of a unimodal function on [a, b].
pub fn golden_section_min<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let (mut a, mut b) = (a, b);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol * (1.0 + a.abs() + b.abs()) {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve3_recovers_known_solution() {
        let m = Mat3([
            [C64::new(2.0, 1.0), C64::new(0.0, 0.0), C64::new(1.0, 0.0)],
            [C64::new(0.0, -1.0), C64::new(3.0, 0.0), C64::new(0.5, 0.5)],
            [C64::new(1.0, 0.0), C64::new(0.0, 2.0), C64::new(-1.0, 1.0)],
        ]);
        let x = [C64::new(1.0, -2.0), C64::new(0.5, 0.0), C64::new(-3.0, 1.0)];
        let rhs = m.mul_vec(&x);
        let got = solve3(&m, &rhs);
        for i in 0..3 {
            assert!((got[i] - x[i]).norm() < 1e-12);
        }
    }

    #[test]
    fn cubic_roots_match_constructed_polynomial() {
        let r = [C64::new(-1.0, 2.0), C64::new(3.0, 0.0), C64::new(0.0, -4.0)];
        let a = -(r[0] + r[1] + r[2]);
        let b = r[0] * r[1] + r[0] * r[2] + r[1] * r[2];
        let c = -r[0] * r[1] * r[2];
        let mut got = cubic_roots(a, b, c).to_vec();
        for want in r {
            let (i, _) = got
                .iter()
                .enumerate()
                .min_by(|(_, x), (_, y)| {
                    (*x - want).norm().partial_cmp(&(*y - want).norm()).unwrap()
                })
                .unwrap();
            assert!((got[i] - want).norm() < 1e-10);
            got.remove(i);
        }
    }

    #[test]
    fn cubic_roots_near_double_root_stay_finite() {
        // (z + 1)²(z − 2) with a 1e-9 split
        let r0 = C64::new(-1.0, 0.0);
        let r1 = C64::new(-1.0 + 1e-9, 0.0);
        let r2 = C64::new(2.0, 0.0);
        let a = -(r0 + r1 + r2);
        let b = r0 * r1 + r0 * r2 + r1 * r2;
        let c = -r0 * r1 * r2;
        for z in cubic_roots(a, b, c) {
            assert!(z.re.is_finite() && z.im.is_finite());
        }
    }

    #[test]
    fn gauss_hermite_matches_moments() {
        let (x, w) = gauss_hermite(15);
        let total: f64 = w.iter().sum();
        assert!((total - std::f64::consts::PI.sqrt()).abs() < 1e-12);
        // ∫ e^{−x²} x² dx = √π / 2
        let m2: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi * xi).sum();
        assert!((m2 - std::f64::consts::PI.sqrt() / 2.0).abs() < 1e-12);
        // exact for polynomials up to degree 29
        let m14: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(14)).sum();
        // ∫ e^{−x²} x^{2k} = √π (2k−1)!! / 2^k, k = 7
        let want = std::f64::consts::PI.sqrt() * (135135.0 / 128.0);
        assert!((m14 - want).abs() < 1e-9 * want);
    }

    #[test]
    fn rk4_matches_scalar_exponential() {
        // decouple: dy0/dt = −y0, y0(0) = 1
        let m = Mat3([
            [C64::new(-1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)],
            [C64::new(0.0, 0.0), C64::new(-2.0, 0.0), C64::new(0.0, 0.0)],
            [C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(-3.0, 0.0)],
        ]);
        let b = [C64::new(0.0, 0.0); 3];
        let y0 = [C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::new(1.0, 0.0)];
        let mut last = y0;
        rk4_affine(&m, &b, y0, 1e-3, 1000, |_, y| last = *y);
        assert!((last[0].re - (-1.0f64).exp()).abs() < 1e-10);
        assert!((last[1].re - (-2.0f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn golden_section_finds_parabola_minimum() {
        // argmin resolution of comparison-based search is ~√ε of the scale
        let x = golden_section_min(|x| (x - 1.7).powi(2) + 3.0, -10.0, 10.0, 1e-12);
        assert!((x - 1.7).abs() < 1e-6);
    }
}
