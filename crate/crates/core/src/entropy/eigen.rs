//! Dense square matrices and the cyclic Jacobi eigenvalue solver.

use crate::{Error, Result};

/// Row-major dense square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(n: usize) -> Self {
        SquareMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::invalid(format!(
                "matrix is not square: {n} rows but a row of length {}",
                bad.len()
            )));
        }
        Ok(SquareMatrix {
            n,
            data: rows.concat(),
        })
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        SquareMatrix { n, data }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        SquareMatrix {
            n: self.n,
            data: self.data.iter().map(|x| x * factor).collect(),
        }
    }

    pub fn matmul(&self, other: &SquareMatrix) -> SquareMatrix {
        assert_eq!(self.n, other.n, "matmul dimension mismatch");
        let n = self.n;
        let mut out = SquareMatrix::zeros(n);
        for i in 0..n {
            let out_row = &mut out.data[i * n..(i + 1) * n];
            for (l, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, b) in out_row.iter_mut().zip(other.row(l)) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `tr(self · other)` without forming the product.
    pub fn trace_of_product(&self, other: &SquareMatrix) -> f64 {
        assert_eq!(self.n, other.n, "trace_of_product dimension mismatch");
        let n = self.n;
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                acc += self[(i, j)] * other[(j, i)];
            }
        }
        acc
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.n).all(|i| (i + 1..self.n).all(|j| (self[(i, j)] - self[(j, i)]).abs() <= tol))
    }

    fn off_diagonal_norm(&self) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                if i != j {
                    acc += self[(i, j)] * self[(i, j)];
                }
            }
        }
        acc.sqrt()
    }
}

impl std::ops::Index<(usize, usize)> for SquareMatrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for SquareMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

const SYMMETRY_TOL: f64 = 1e-10;
const RELATIVE_OFF_TOL: f64 = 1e-12;
const MAX_SWEEPS: usize = 100;

/// All eigenvalues of a symmetric matrix, sorted descending.
///
/// Cyclic Jacobi: each sweep visits every `(p, q)` pair above the diagonal and
/// applies the plane rotation that zeroes `a[p][q]`. Iteration stops once the
/// off-diagonal Frobenius norm drops below `1e-12 · ‖m‖_F`.
pub fn symmetric_eigenvalues(m: &SquareMatrix) -> Result<Vec<f64>> {
    if !m.is_symmetric(SYMMETRY_TOL) {
        return Err(Error::invalid("matrix is not symmetric within 1e-10"));
    }
    let n = m.n();
    let mut a = m.clone();
    let target = RELATIVE_OFF_TOL * m.frobenius_norm();

    // If every off-diagonal entry were below this, the off-diagonal norm
    // would already be below `target`, so skipping them cannot stall.
    let skip_below = target / n as f64;
    let mut converged = a.off_diagonal_norm() <= target;
    let mut sweeps = 0;
    while !converged {
        if sweeps == MAX_SWEEPS {
            return Err(Error::NumericalFailure(format!(
                "Jacobi did not converge in {MAX_SWEEPS} sweeps (off-diagonal norm {:e})",
                a.off_diagonal_norm()
            )));
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[(p, q)].abs() >= skip_below {
                    rotate(&mut a, p, q);
                }
            }
        }
        sweeps += 1;
        converged = a.off_diagonal_norm() <= target;
    }

    let mut eig: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    eig.sort_by(|x, y| y.total_cmp(x));
    Ok(eig)
}

/// Zeroes `a[p][q]` by a Jacobi rotation, keeping `a` symmetric.
fn rotate(a: &mut SquareMatrix, p: usize, q: usize) {
    let apq = a[(p, q)];
    if apq == 0.0 {
        return;
    }
    let app = a[(p, p)];
    let aqq = a[(q, q)];
    let theta = (aqq - app) / (2.0 * apq);
    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    let n = a.n();

    let data = a.as_mut_slice();
    let (head, tail) = data.split_at_mut(q * n);
    let row_p = &mut head[p * n..(p + 1) * n];
    let row_q = &mut tail[..n];
    for (x, y) in row_p.iter_mut().zip(row_q.iter_mut()) {
        let (apk, aqk) = (*x, *y);
        *x = c * apk - s * aqk;
        *y = s * apk + c * aqk;
    }
    for k in 0..n {
        if k != p && k != q {
            data[k * n + p] = data[p * n + k];
            data[k * n + q] = data[q * n + k];
        }
    }
    data[p * n + p] = app - t * apq;
    data[q * n + q] = aqq + t * apq;
    data[p * n + q] = 0.0;
    data[q * n + p] = 0.0;
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_and_diagonal() {
        assert_eq!(symmetric_eigenvalues(&SquareMatrix::identity(3)).unwrap(), vec![1.0; 3]);
        let d = SquareMatrix::from_rows(&[
            vec![3.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 2.0],
        ])
        .unwrap();
        assert_eq!(symmetric_eigenvalues(&d).unwrap(), vec![3.0, 2.0, 1.0]);
    }

    #[test]
    fn two_by_two_by_hand() {
        // det([[2-l,1],[1,2-l]]) = (l-3)(l-1)
        let m = SquareMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let e = symmetric_eigenvalues(&m).unwrap();
        assert!((e[0] - 3.0).abs() < 1e-14 && (e[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_asymmetric() {
        let m = SquareMatrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(symmetric_eigenvalues(&m), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn trace_and_frobenius_preserved() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 30;
        let mut m = SquareMatrix::zeros(n);
        for i in 0..n {
            for j in i..n {
                let v: f64 = rng.random_range(-1.0..1.0);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        let e = symmetric_eigenvalues(&m).unwrap();
        let sum: f64 = e.iter().sum();
        let sq: f64 = e.iter().map(|x| x * x).sum();
        assert!((sum - m.trace()).abs() < 1e-10);
        assert!((sq - m.frobenius_norm().powi(2)).abs() < 1e-10);
        assert!(e.windows(2).all(|w| w[0] >= w[1]));
        // tr(M^3) = sum of cubes
        let m3 = m.matmul(&m).trace_of_product(&m);
        let cubes: f64 = e.iter().map(|x| x * x * x).sum();
        assert!((m3 - cubes).abs() < 1e-9);
    }
}
