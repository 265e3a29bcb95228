//! Dense LU with partial pivoting. Circuit matrices here are a couple of
//! dozen unknowns at most, so a dense in-place factorization is fastest.

#[derive(Debug, Clone)]
pub(crate) struct DenseMatrix {
    pub dim: usize,
    pub data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(dim: usize) -> Self {
        DenseMatrix {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    #[inline]
    pub fn add(&mut self, row: usize, col: usize, v: f64) {
        self.data[row * self.dim + col] += v;
    }

    pub fn copy_from(&mut self, other: &DenseMatrix) {
        self.data.copy_from_slice(&other.data);
    }

    /// `out = self * x`
    #[cfg(test)]
    pub fn mul_vec(&self, x: &[f64], out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate() {
            let row = &self.data[r * self.dim..(r + 1) * self.dim];
            *o = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }
}

/// Solves `a x = b` in place, destroying `a`; the solution overwrites `b`.
/// Returns `false` if the matrix is numerically singular.
pub(crate) fn lu_solve_in_place(a: &mut DenseMatrix, b: &mut [f64], perm: &mut [usize]) -> bool {
    let n = a.dim;
    let m = &mut a.data;
    for (i, p) in perm.iter_mut().enumerate() {
        *p = i;
    }
    for k in 0..n {
        let mut pivot = k;
        let mut best = m[k * n + k].abs();
        for r in k + 1..n {
            let v = m[r * n + k].abs();
            if v > best {
                best = v;
                pivot = r;
            }
        }
        if best == 0.0 || !best.is_finite() {
            return false;
        }
        if pivot != k {
            for c in 0..n {
                m.swap(k * n + c, pivot * n + c);
            }
            b.swap(k, pivot);
            perm.swap(k, pivot);
        }
        let inv = 1.0 / m[k * n + k];
        for r in k + 1..n {
            let factor = m[r * n + k] * inv;
            if factor != 0.0 {
                m[r * n + k] = factor;
                for c in k + 1..n {
                    m[r * n + c] -= factor * m[k * n + c];
                }
                b[r] -= factor * b[k];
            }
        }
    }
    for k in (0..n).rev() {
        let mut s = b[k];
        for c in k + 1..n {
            s -= m[k * n + c] * b[c];
        }
        b[k] = s / m[k * n + k];
    }
    true
}
