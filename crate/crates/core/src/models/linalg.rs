use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
pub(crate) fn cholesky(a: &Array2<f64>) -> Option<Array2<f64>> {
    let n = a.nrows();
    let mut l = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        let mut d = a[[j, j]];
        for k in 0..j {
            d -= l[[j, k]] * l[[j, k]];
        }
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        let d = d.sqrt();
        l[[j, j]] = d;
        for i in j + 1..n {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = s / d;
        }
    }
    Some(l)
}

/// Solves `L Lᵀ x = b` given the Cholesky factor `L`.
pub(crate) fn cholesky_solve(l: &Array2<f64>, b: ArrayView1<f64>) -> Array1<f64> {
    let n = l.nrows();
    let mut y = Array1::<f64>::zeros(n);
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[[i, k]] * y[k];
        }
        y[i] = s / l[[i, i]];
    }
    let mut x = Array1::<f64>::zeros(n);
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[[k, i]] * x[k];
        }
        x[i] = s / l[[i, i]];
    }
    x
}

/// Solves a symmetric positive-definite system, adding diagonal jitter if
/// the factorization breaks down numerically.
pub(crate) fn spd_solve(a: &Array2<f64>, b: ArrayView1<f64>) -> Option<Array1<f64>> {
    if let Some(l) = cholesky(a) {
        return Some(cholesky_solve(&l, b));
    }
    let scale = a.diag().iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let mut jitter = scale * 1e-12;
    for _ in 0..8 {
        let mut aj = a.clone();
        aj.diag_mut().mapv_inplace(|v| v + jitter);
        if let Some(l) = cholesky(&aj) {
            return Some(cholesky_solve(&l, b));
        }
        jitter *= 100.0;
    }
    None
}

/// `Xᵀ X` exploiting symmetry.
pub(crate) fn gram_t(x: ArrayView2<f64>) -> Array2<f64> {
    x.t().dot(&x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn solves_a_small_system() {
        let a = array![[4.0, 2.0], [2.0, 3.0]];
        let x = spd_solve(&a, array![2.0, 1.0].view()).unwrap();
        let back = a.dot(&x);
        assert!((back[0] - 2.0).abs() < 1e-14 && (back[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_indefinite() {
        assert!(cholesky(&array![[1.0, 2.0], [2.0, 1.0]]).is_none());
    }
}
