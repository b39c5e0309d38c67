//! Euclidean projections onto the supported cones.

const JACOBI_TOL: f64 = 1e-11;
const JACOBI_MAX_SWEEPS: usize = 30;

/// Projection onto `{(t, x) : t ≥ ‖x‖₂}`; `v[0]` is `t`.
pub fn project_soc(v: &[f64]) -> Vec<f64> {
    let mut out = v.to_vec();
    project_soc_in_place(&mut out);
    out
}

pub(crate) fn project_soc_in_place(v: &mut [f64]) {
    if v.is_empty() {
        return;
    }
    let t = v[0];
    let norm = v[1..].iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm <= t {
        return;
    }
    if norm <= -t {
        v.iter_mut().for_each(|x| *x = 0.0);
        return;
    }
    let alpha = 0.5 * (t + norm);
    v[0] = alpha;
    let k = alpha / norm;
    v[1..].iter_mut().for_each(|x| *x *= k);
}

/// Length of the symmetric vectorization of an `n × n` matrix.
pub fn svec_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Side of the matrix whose vectorization has length `len`.
pub fn svec_side(len: usize) -> usize {
    let mut n = 0;
    while svec_len(n) < len {
        n += 1;
    }
    assert_eq!(svec_len(n), len, "not a triangular number: {len}");
    n
}

/// Position of entry `(i, j)`, `i ≥ j`, in the lower-triangle column-major
/// vectorization.
pub fn svec_index(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i >= j { (i, j) } else { (j, i) };
    // columns before j hold n, n-1, ..., n-j+1 entries
    j * n - j * j.saturating_sub(1) / 2 + (i - j)
}

/// Lower-triangle column-major vectorization with off-diagonals scaled by √2,
/// so `⟨svec A, svec B⟩ = tr(AB)`.
pub fn svec(n: usize, a: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(svec_len(n));
    for j in 0..n {
        for i in j..n {
            let v = a[i * n + j];
            out.push(if i == j { v } else { v * std::f64::consts::SQRT_2 });
        }
    }
    out
}

/// Inverse of [`svec`]: dense row-major symmetric matrix.
pub fn smat(n: usize, v: &[f64]) -> Vec<f64> {
    let mut a = vec![0.0; n * n];
    let mut k = 0;
    for j in 0..n {
        for i in j..n {
            let x = if i == j {
                v[k]
            } else {
                v[k] / std::f64::consts::SQRT_2
            };
            a[i * n + j] = x;
            a[j * n + i] = x;
            k += 1;
        }
    }
    a
}

/// Cyclic Jacobi eigendecomposition of a dense symmetric matrix.
/// Returns eigenvalues and row-major eigenvectors (column `k` pairs with
/// eigenvalue `k`).
pub fn jacobi_eigen(n: usize, a: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut m = a.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let scale = m.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    for _ in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i * n + j] * m[i * n + j])
            .sum::<f64>()
            .sqrt();
        if off <= JACOBI_TOL * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (m[q * n + q] - m[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = m[k * n + p];
                    let akq = m[k * n + q];
                    m[k * n + p] = c * akp - s * akq;
                    m[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = m[p * n + k];
                    let aqk = m[q * n + k];
                    m[p * n + k] = c * apk - s * aqk;
                    m[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let eig = (0..n).map(|i| m[i * n + i]).collect();
    (eig, v)
}

/// Projection of a vectorized symmetric matrix onto the PSD cone.
pub fn project_psd(v: &[f64]) -> Vec<f64> {
    let mut out = v.to_vec();
    project_psd_in_place(&mut out);
    out
}

pub(crate) fn project_psd_in_place(v: &mut [f64]) {
    let n = svec_side(v.len());
    if n == 0 {
        return;
    }
    if n == 1 {
        v[0] = v[0].max(0.0);
        return;
    }
    let a = smat(n, v);
    let (eig, vecs) = jacobi_eigen(n, &a);
    if eig.iter().all(|&l| l >= 0.0) {
        return;
    }
    let mut p = vec![0.0; n * n];
    for (k, &l) in eig.iter().enumerate() {
        if l <= 0.0 {
            continue;
        }
        for i in 0..n {
            let vik = vecs[i * n + k] * l;
            for j in 0..=i {
                p[i * n + j] += vik * vecs[j * n + k];
            }
        }
    }
    for i in 0..n {
        for j in 0..i {
            p[j * n + i] = p[i * n + j];
        }
    }
    v.copy_from_slice(&svec(n, &p));
}
