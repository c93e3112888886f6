//! Gaussian quadrature rules (Legendre, Hermite, Laguerre).
//!
//! Nodes are computed in `f64` (Newton iteration for Legendre and Laguerre,
//! Golub–Welsch for Hermite) and converted to the target scalar afterwards.

use crate::scalar::Scalar;

/// A quadrature rule as parallel node/weight vectors.
#[derive(Debug, Clone)]
pub struct Rule<T> {
    pub nodes: Vec<T>,
    pub weights: Vec<T>,
}

impl<T: Scalar> Rule<T> {
    fn from_f64(nodes: Vec<f64>, weights: Vec<f64>) -> Self {
        Self {
            nodes: nodes.into_iter().map(T::lit).collect(),
            weights: weights.into_iter().map(T::lit).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (T, T)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }
}

/// Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre<T: Scalar>(n: usize) -> Rule<T> {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
            }
            pp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        w[n - 1 - i] = w[i];
    }
    Rule::from_f64(x, w)
}

/// Gauss–Hermite rule for the standard normal weight: `E[f(Z)] ≈ Σ w_k f(z_k)`.
/// Weights sum to one.
pub fn gauss_hermite_normal<T: Scalar>(n: usize) -> Rule<T> {
    assert!(n >= 1, "Gauss-Hermite rule needs at least one node");
    // probabilists' Hermite recurrence: He_{k+1} = x He_k - k He_{k-1}
    let off: Vec<f64> = (1..n).map(|k| (k as f64).sqrt()).collect();
    let (mut x, mut w) = golub_welsch(vec![0.0; n], &off, 1.0);
    // symmetrize away rounding noise
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let node = 0.5 * (x[j] - x[i]);
        let weight = 0.5 * (w[i] + w[j]);
        x[i] = -node;
        x[j] = node;
        w[i] = weight;
        w[j] = weight;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    Rule::from_f64(x, w)
}

/// Golub–Welsch: nodes are the eigenvalues of the symmetric tridiagonal
/// Jacobi matrix, weights `mu0 * v_0²` from the normalized eigenvectors.
fn golub_welsch(mut diag: Vec<f64>, offdiag: &[f64], mu0: f64) -> (Vec<f64>, Vec<f64>) {
    let n = diag.len();
    let mut e = vec![0.0; n];
    e[..n - 1].copy_from_slice(&offdiag[..n - 1]);
    // first row of the accumulated rotations
    let mut z = vec![0.0; n];
    z[0] = 1.0;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = diag[m].abs() + diag[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            assert!(iter < 100, "tridiagonal QL failed to converge");
            let mut g = (diag[l + 1] - diag[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = diag[m] - diag[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            for i in (l..m).rev() {
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    diag[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = diag[i + 1] - p;
                r = (diag[i] - g) * s + 2.0 * c * b;
                p = s * r;
                diag[i + 1] = g + p;
                g = c * r - b;
                let zf = z[i + 1];
                z[i + 1] = s * z[i] + c * zf;
                z[i] = c * z[i] - s * zf;
            }
            if deflated {
                continue;
            }
            diag[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    let mut pairs: Vec<(f64, f64)> = diag.into_iter().zip(z.into_iter().map(|v| mu0 * v * v)).collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite eigenvalues"));
    pairs.into_iter().unzip()
}

/// Gauss–Laguerre rule for the weight `e^{-u}` on `[0, ∞)`.
pub fn gauss_laguerre<T: Scalar>(n: usize) -> Rule<T> {
    assert!(n >= 1, "Gauss-Laguerre rule needs at least one node");
    let nf = n as f64;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut z = 0.0;
    for i in 0..n {
        z = match i {
            0 => 3.0 / (1.0 + 2.4 * nf),
            1 => z + 15.0 / (1.0 + 2.5 * nf),
            _ => {
                let ai = (i - 1) as f64;
                z + ((1.0 + 2.55 * ai) / (1.9 * ai)) * (z - x[i - 2])
            }
        };
        let mut pp = 0.0;
        let mut p2 = 0.0;
        for _ in 0..200 {
            let mut p1 = 1.0;
            p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = ((2.0 * jf + 1.0 - z) * p2 - jf * p3) / (jf + 1.0);
            }
            pp = (nf * p1 - nf * p2) / z;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-14 * z1.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        w[i] = -1.0 / (pp * nf * p2);
    }
    Rule::from_f64(x, w)
}

/// Composite Gauss–Legendre integral of `f` over `[a, b]`, split at the given
/// interior breakpoints and further into `panels` equal pieces per segment.
pub fn integrate_panels<T, F>(f: F, a: T, b: T, breaks: &[T], panels: usize, rule: &Rule<T>) -> T
where
    T: Scalar,
    F: Fn(T) -> T,
{
    let mut cuts: Vec<T> = Vec::with_capacity(breaks.len() + 2);
    cuts.push(a);
    cuts.extend(breaks.iter().copied().filter(|&x| x > a && x < b));
    cuts.push(b);
    cuts.sort_by(|x, y| x.partial_cmp(y).expect("finite breakpoints"));
    let half = T::lit(0.5);
    let np = T::from_usize(panels.max(1)).unwrap();
    let mut total = T::zero();
    for seg in cuts.windows(2) {
        let width = (seg[1] - seg[0]) / np;
        if width <= T::zero() {
            continue;
        }
        for p in 0..panels.max(1) {
            let lo = seg[0] + width * T::from_usize(p).unwrap();
            let mid = lo + half * width;
            let rad = half * width;
            let mut acc = T::zero();
            for (x, w) in rule.iter() {
                acc += w * f(mid + rad * x);
            }
            total += acc * rad;
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_integrates_polynomials_exactly() {
        let rule = gauss_legendre::<f64>(8);
        let s: f64 = rule.iter().map(|(x, w)| w * x.powi(14)).sum();
        assert!((s - 2.0 / 15.0).abs() < 1e-14);
    }

    #[test]
    fn hermite_moments_match_standard_normal() {
        for n in [1, 2, 5, 64, 128, 256] {
            let rule = gauss_hermite_normal::<f64>(n);
            let m0: f64 = rule.weights.iter().sum();
            assert!((m0 - 1.0).abs() < 1e-13, "n={n} mass {m0}");
            if n >= 2 {
                let m2: f64 = rule.iter().map(|(z, w)| w * z * z).sum();
                assert!((m2 - 1.0).abs() < 1e-12, "n={n} second moment {m2}");
            }
            if n >= 3 {
                let m4: f64 = rule.iter().map(|(z, w)| w * z.powi(4)).sum();
                assert!((m4 - 3.0).abs() < 1e-11, "n={n} fourth moment {m4}");
            }
        }
    }

    #[test]
    fn hermite_nodes_ascend() {
        let rule = gauss_hermite_normal::<f64>(64);
        assert!(rule.nodes.windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn hermite_lognormal_mgf() {
        // E[exp(aZ - a^2/2)] = 1
        let rule = gauss_hermite_normal::<f64>(64);
        for a in [0.1, 1.0, 3.0, 6.0] {
            let v: f64 = rule.iter().map(|(z, w)| w * (a * z - 0.5 * a * a).exp()).sum();
            assert!((v - 1.0).abs() < 1e-12, "a={a} gives {v}");
        }
    }

    #[test]
    fn laguerre_moments() {
        let rule = gauss_laguerre::<f64>(32);
        for k in 0..8 {
            let v: f64 = rule.iter().map(|(u, w)| w * u.powi(k)).sum();
            let fact: f64 = (1..=k).map(|i| i as f64).product();
            assert!((v / fact - 1.0).abs() < 1e-12, "k={k}");
        }
    }

    #[test]
    fn composite_handles_kinks() {
        let rule = gauss_legendre::<f64>(8);
        let v = integrate_panels(|x: f64| (x - 0.3).max(0.0), 0.0, 1.0, &[0.3], 2, &rule);
        assert!((v - 0.245).abs() < 1e-15);
    }
}
