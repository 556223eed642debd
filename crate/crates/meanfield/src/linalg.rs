//! Small dense-matrix helpers for Jacobian blocks (d <= 6).

/// Euclidean norm of a vector.
pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Euclidean distance between two points of equal dimension.
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Spectral norm of a dense row-major `rows x cols` matrix.
///
/// Computed as the square root of the largest eigenvalue of `A^T A`,
/// obtained by cyclic Jacobi sweeps. The blocks this crate handles are
/// tiny (d <= 6), so the O(c^3) sweep cost is irrelevant; Jacobi gives
/// deterministic results and full accuracy on symmetric matrices.
pub fn spectral_norm(a: &[f64], rows: usize, cols: usize) -> f64 {
    debug_assert_eq!(a.len(), rows * cols);
    if rows == 0 || cols == 0 {
        return 0.0;
    }
    if rows == 1 || cols == 1 {
        return norm(a);
    }
    // Gram matrix G = A^T A (cols x cols), symmetric positive semidefinite.
    let n = cols;
    let mut g = vec![0.0_f64; n * n];
    for i in 0..n {
        for j in i..n {
            let mut s = 0.0;
            for r in 0..rows {
                s += a[r * cols + i] * a[r * cols + j];
            }
            g[i * n + j] = s;
            g[j * n + i] = s;
        }
    }
    symmetric_max_eigenvalue(&mut g, n).max(0.0).sqrt()
}

/// Largest eigenvalue of a symmetric matrix via cyclic Jacobi rotations.
fn symmetric_max_eigenvalue(g: &mut [f64], n: usize) -> f64 {
    for _sweep in 0..64 {
        let mut off = 0.0_f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off += g[p * n + q].abs();
            }
        }
        if off < 1e-300 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = g[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let app = g[p * n + p];
                let aqq = g[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let gpk = g[p * n + k];
                    let gqk = g[q * n + k];
                    g[p * n + k] = c * gpk - s * gqk;
                    g[q * n + k] = s * gpk + c * gqk;
                }
                for k in 0..n {
                    let gkp = g[k * n + p];
                    let gkq = g[k * n + q];
                    g[k * n + p] = c * gkp - s * gkq;
                    g[k * n + q] = s * gkp + c * gkq;
                }
            }
        }
    }
    (0..n).map(|i| g[i * n + i]).fold(f64::NEG_INFINITY, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectral_norm_of_identity_is_one() {
        let eye = [1.0, 0.0, 0.0, 1.0];
        assert!((spectral_norm(&eye, 2, 2) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn spectral_norm_of_rotation_is_one() {
        let (c, s) = (0.6_f64, 0.8_f64);
        let rot = [c, -s, s, c];
        assert!((spectral_norm(&rot, 2, 2) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn spectral_norm_of_diag_picks_max() {
        let m = [3.0, 0.0, 0.0, 0.0, -7.0, 0.0, 0.0, 0.0, 2.0];
        assert!((spectral_norm(&m, 3, 3) - 7.0).abs() < 1e-12);
    }

    #[test]
    fn spectral_norm_matches_hand_svd_2x2() {
        // A = [[1, 2], [0, 1]]: sigma_max^2 = (6 + sqrt(32)) / 2? Compute
        // via characteristic polynomial of A^T A = [[1,2],[2,5]]:
        // lambda = (6 +- sqrt(36-4))/2 = 3 +- sqrt(8).
        let a = [1.0, 2.0, 0.0, 1.0];
        let expected = (3.0_f64 + 8.0_f64.sqrt()).sqrt();
        assert!((spectral_norm(&a, 2, 2) - expected).abs() < 1e-12);
    }

    #[test]
    fn rectangular_block_norm() {
        // 1x3 row vector: spectral norm equals Euclidean norm.
        let a = [3.0, 4.0, 12.0];
        assert!((spectral_norm(&a, 1, 3) - 13.0).abs() < 1e-12);
    }
}
