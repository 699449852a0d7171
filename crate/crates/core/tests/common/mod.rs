//! Independent oracles shared by the integration tests. Apart from the
//! `golden` driver, nothing here calls into the production kernels.

#![allow(dead_code)]

pub mod frozen;
pub mod golden;

/// O(N²) recurrence: for every i, the smallest Euclidean distance to any j
/// with |i - j| >= w.
pub fn brute_recurrence(rows: &[Vec<f64>], w: usize) -> Vec<f64> {
    let n = rows.len();
    let mut out = vec![f64::INFINITY; n];
    for i in 0..n {
        for j in 0..n {
            if i.abs_diff(j) >= w {
                let mut acc = 0.0;
                for (a, b) in rows[i].iter().zip(&rows[j]) {
                    acc += (a - b) * (a - b);
                }
                out[i] = out[i].min(acc.sqrt());
            }
        }
    }
    out
}

pub fn rows_of(features: &[f64], dim: usize) -> Vec<Vec<f64>> {
    features.chunks(dim).map(<[f64]>::to_vec).collect()
}

/// Sample covariance (divides by n - 1) of row vectors.
pub fn covariance(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = rows.len();
    let d = rows[0].len();
    let mean: Vec<f64> = (0..d)
        .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n as f64)
        .collect();
    let mut c = vec![vec![0.0; d]; d];
    for r in rows {
        for a in 0..d {
            for b in 0..d {
                c[a][b] += (r[a] - mean[a]) * (r[b] - mean[b]);
            }
        }
    }
    for row in &mut c {
        for v in row.iter_mut() {
            *v /= (n - 1) as f64;
        }
    }
    c
}

/// Cyclic Jacobi eigenvalues of a symmetric matrix, sorted descending.
#[allow(clippy::needless_range_loop)]
pub fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|p| (0..n).filter(move |&q| q != p).map(move |q| (p, q)))
            .map(|(p, q)| a[p][q] * a[p][q])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    ev.sort_by(|x, y| y.total_cmp(x));
    ev
}

/// Smallest n whose leading eigenvalues reach `threshold` of the total.
pub fn dims_for_threshold(eigenvalues: &[f64], threshold: f64) -> usize {
    let clamped: Vec<f64> = eigenvalues.iter().map(|v| v.max(0.0)).collect();
    let total: f64 = clamped.iter().sum();
    let mut acc = 0.0;
    for (i, v) in clamped.iter().enumerate() {
        acc += v / total;
        if acc >= threshold {
            return i + 1;
        }
    }
    clamped.len()
}

/// Orthonormal 2-frame in `dim` dimensions built by Gram–Schmidt from two
/// fixed dense vectors.
pub fn orthonormal_frame(dim: usize, count: usize) -> Vec<Vec<f64>> {
    let mut frame: Vec<Vec<f64>> = Vec::new();
    for f in 0..count {
        let mut v: Vec<f64> = (0..dim)
            .map(|j| ((j + 1) as f64 * (f as f64 + 1.3)).sin() + 0.1 * f as f64)
            .collect();
        for u in &frame {
            let dot: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
            for (x, y) in v.iter_mut().zip(u) {
                *x -= dot * y;
            }
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= n);
        frame.push(v);
    }
    frame
}

/// Deterministic pseudo-random values in [-1, 1) (64-bit LCG), for tests
/// that want fixed data without touching the production RNG.
pub fn lcg_values(seed: u64, n: usize) -> Vec<f64> {
    let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    (0..n)
        .map(|_| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        })
        .collect()
}
