//! Small dense symmetric eigenproblems (cyclic Jacobi).

use crate::math::sqrt;

/// Eigenvalues (ascending) and matching unit eigenvectors of a symmetric
/// `D x D` matrix.
pub fn symmetric_eigen<const D: usize>(mut a: [[f64; D]; D]) -> ([f64; D], [[f64; D]; D]) {
    let mut v = [[0.0; D]; D];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _sweep in 0..64 {
        let mut off = 0.0;
        for i in 0..D {
            for j in (i + 1)..D {
                off += a[i][j] * a[i][j];
            }
        }
        let scale: f64 = (0..D).map(|i| a[i][i] * a[i][i]).sum::<f64>() + off;
        if off <= 1e-30 * scale || off == 0.0 {
            break;
        }
        for p in 0..D {
            for q in (p + 1)..D {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + sqrt(theta * theta + 1.0));
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..D {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..D {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let vp = row[p];
                    let vq = row[q];
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let mut idx: [usize; D] = core::array::from_fn(|i| i);
    idx.sort_by(|&i, &j| a[i][i].total_cmp(&a[j][j]));
    let values = core::array::from_fn(|k| a[idx[k]][idx[k]]);
    let vectors = core::array::from_fn(|k| core::array::from_fn(|r| v[r][idx[k]]));
    (values, vectors)
}
