//! Small dense linear algebra helpers shared by the estimators.

use nalgebra::{DMatrix, DVector};

/// Smallest right singular vector of `m` together with the singular values
/// sorted in decreasing order. Wide matrices are padded with zero rows so the
/// full right basis is available.
pub(crate) fn null_vector(m: &DMatrix<f64>) -> (DVector<f64>, Vec<f64>) {
    let (basis, sv) = right_basis(m);
    let n = basis.ncols();
    (basis.column(n - 1).into_owned(), sv)
}

/// Right singular vectors as columns, ordered by decreasing singular value,
/// plus the singular values (zero-padded to the column count).
pub(crate) fn right_basis(m: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>) {
    let cols = m.ncols();
    let padded = if m.nrows() < cols {
        let mut p = DMatrix::zeros(cols, cols);
        p.rows_mut(0, m.nrows()).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let mut basis = DMatrix::zeros(cols, cols);
    let mut sv = Vec::with_capacity(cols);
    for (k, &i) in order.iter().enumerate() {
        basis.set_column(k, &v_t.row(i).transpose());
        sv.push(svd.singular_values[i]);
    }
    (basis, sv)
}

/// Scale every row to unit norm; zero rows are left alone.
pub(crate) fn normalize_rows(m: &mut DMatrix<f64>) {
    for mut row in m.row_iter_mut() {
        let n = row.norm();
        if n > 0.0 {
            row /= n;
        }
    }
}

/// Real roots of `a x^2 + b x + c`, using the cancellation-free form.
/// Discriminants in `[-clamp, 0)` count as a double root.
/// Returns `Err(disc)` when the roots are complex.
pub(crate) fn quadratic_roots(a: f64, b: f64, c: f64, clamp: f64) -> Result<Vec<f64>, f64> {
    if a == 0.0 {
        if b == 0.0 {
            return Ok(Vec::new());
        }
        return Ok(vec![-c / b]);
    }
    let mut disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        if disc >= -clamp {
            disc = 0.0;
        } else {
            return Err(disc);
        }
    }
    let sq = disc.sqrt();
    let q = -0.5 * (b + b.signum() * sq);
    if q == 0.0 {
        return Ok(vec![0.0, 0.0]);
    }
    Ok(vec![q / a, c / q])
}

/// Reduced row echelon form with partial pivoting; entries within `tol` of
/// an integer are snapped to it.
pub(crate) fn rref(mut m: DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let (rows, cols) = m.shape();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let (piv, val) = (r..rows)
            .map(|i| (i, m[(i, c)].abs()))
            .fold((r, -1.0), |best, x| if x.1 > best.1 { x } else { best });
        if val < 1e-9 {
            continue;
        }
        m.swap_rows(r, piv);
        let p = m[(r, c)];
        for j in 0..cols {
            m[(r, j)] /= p;
        }
        for i in 0..rows {
            if i != r {
                let f = m[(i, c)];
                if f != 0.0 {
                    for j in 0..cols {
                        let v = m[(r, j)];
                        m[(i, j)] -= f * v;
                    }
                }
            }
        }
        r += 1;
    }
    for v in m.iter_mut() {
        let rounded = v.round();
        if (*v - rounded).abs() < tol {
            *v = rounded;
        }
    }
    m
}

/// Deterministic 64-bit mixing (splitmix64 finalizer) for deriving
/// independent seeds from a master seed and an index.
pub fn mix_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
