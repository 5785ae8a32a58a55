//! Dense and sparse symmetric kernels shared by the assembly, solver and
//! optimizer modules.
//!
//! Everything here is sized for desk-scale problems: dense factorizations are
//! always acceptable and the sparse type only exists to keep assembled FE
//! operators compact.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use crate::error::{check_len, Error, Result};
use crate::math::{self, sqrt};

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, v) in values.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from row slices; all rows must share one length.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Self {
            rows: rows.len(),
            cols,
            data,
        }
    }

    /// Builds a matrix whose columns are the given vectors.
    pub fn from_columns(rows: usize, columns: &[Vec<f64>]) -> Self {
        let mut m = Self::zeros(rows, columns.len());
        for (j, c) in columns.iter().enumerate() {
            assert_eq!(c.len(), rows);
            for (i, v) in c.iter().enumerate() {
                m[(i, j)] = *v;
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Mat {
        Mat::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| math::dot(self.row(i), x)).collect()
    }

    /// `selfᵀ x`
    pub fn tmatvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.rows);
        let mut y = vec![0.0; self.cols];
        for (i, xi) in x.iter().enumerate() {
            math::axpy(*xi, self.row(i), &mut y);
        }
        y
    }

    pub fn matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows);
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a != 0.0 {
                    let (src, dst) = (other.row(k), &mut out.data[i * other.cols..(i + 1) * other.cols]);
                    math::axpy(a, src, dst);
                }
            }
        }
        out
    }

    /// `selfᵀ · other · self` for a square `other`.
    pub fn congruence(&self, other: &Mat) -> Mat {
        self.transpose().matmul(&other.matmul(self))
    }

    pub fn scaled(&self, s: f64) -> Mat {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn add(&self, other: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &Mat) -> Mat {
        self.add(&other.scaled(-1.0))
    }

    pub fn add_diagonal(&mut self, c: f64) {
        for i in 0..self.rows.min(self.cols) {
            self[(i, i)] += c;
        }
    }

    pub fn max_abs(&self) -> f64 {
        math::norm_inf(&self.data)
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn symmetry_defect(&self) -> f64 {
        let mut d = 0.0_f64;
        for i in 0..self.rows {
            for j in 0..i {
                d = d.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        d
    }

    /// `(A + Aᵀ)/2`
    pub fn symmetrized(&self) -> Mat {
        Mat::from_fn(self.rows, self.cols, |i, j| 0.5 * (self[(i, j)] + self[(j, i)]))
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|v| *v == 0.0)
    }

    /// Submatrix formed from the given row and column indices.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Mat {
        Mat::from_fn(rows.len(), cols.len(), |i, j| self[(rows[i], cols[j])])
    }
}

impl Index<(usize, usize)> for Mat {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Mat {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

/// Symmetric sparse matrix storing the lower triangle row by row.
#[derive(Clone, Debug, PartialEq)]
pub struct SymSparse {
    n: usize,
    row_start: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

/// Accumulates symmetric entries; duplicates are summed.
#[derive(Clone, Debug, Default)]
pub struct SymSparseBuilder {
    n: usize,
    triplets: Vec<(usize, usize, f64)>,
}

impl SymSparseBuilder {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            triplets: Vec::new(),
        }
    }

    /// Adds `v` at `(i, j)` (and implicitly at `(j, i)`).
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(i < self.n && j < self.n);
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        self.triplets.push((r, c, v));
    }

    pub fn build(mut self) -> SymSparse {
        self.triplets.sort_by_key(|a| (a.0, a.1));
        let mut row_start = vec![0; self.n + 1];
        let mut cols = Vec::new();
        let mut vals: Vec<f64> = Vec::new();
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in self.triplets {
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_start[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..self.n {
            row_start[i + 1] += row_start[i];
        }
        SymSparse {
            n: self.n,
            row_start,
            cols,
            vals,
        }
    }
}

impl SymSparse {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz_lower(&self) -> usize {
        self.vals.len()
    }

    /// Iterates the stored lower-triangle entries `(i, j, v)` with `j <= i`.
    pub fn lower_entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| {
            (self.row_start[i]..self.row_start[i + 1]).map(move |k| (i, self.cols[k], self.vals[k]))
        })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        let range = self.row_start[r]..self.row_start[r + 1];
        match self.cols[range.clone()].binary_search(&c) {
            Ok(k) => self.vals[range.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        y.iter_mut().for_each(|v| *v = 0.0);
        for (i, j, v) in self.lower_entries() {
            y[i] += v * x[j];
            if i != j {
                y[j] += v * x[i];
            }
        }
    }

    pub fn to_dense(&self) -> Mat {
        let mut m = Mat::zeros(self.n, self.n);
        for (i, j, v) in self.lower_entries() {
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
        m
    }

    /// `a·self + b·other`
    pub fn combine(&self, a: f64, other: &SymSparse, b: f64) -> SymSparse {
        assert_eq!(self.n, other.n);
        let mut builder = SymSparseBuilder::new(self.n);
        for (i, j, v) in self.lower_entries() {
            builder.add(i, j, a * v);
        }
        for (i, j, v) in other.lower_entries() {
            builder.add(i, j, b * v);
        }
        builder.build()
    }

    /// Row sums of the full symmetric matrix.
    pub fn row_sums(&self) -> Vec<f64> {
        self.matvec(&vec![1.0; self.n])
    }

    /// Maximum absolute row sum of the full symmetric matrix.
    pub fn abs_row_sum_max(&self) -> f64 {
        let mut sums = vec![0.0; self.n];
        for (i, j, v) in self.lower_entries() {
            sums[i] += v.abs();
            if i != j {
                sums[j] += v.abs();
            }
        }
        sums.into_iter().fold(0.0, f64::max)
    }

    /// Symmetric restriction to the kept indices (rows and columns deleted
    /// together).
    pub fn restrict(&self, keep: &[usize]) -> SymSparse {
        let mut map = vec![usize::MAX; self.n];
        for (new, old) in keep.iter().enumerate() {
            map[*old] = new;
        }
        let mut builder = SymSparseBuilder::new(keep.len());
        for (i, j, v) in self.lower_entries() {
            if map[i] != usize::MAX && map[j] != usize::MAX {
                builder.add(map[i], map[j], v);
            }
        }
        builder.build()
    }
}

fn singular_threshold(a: &Mat) -> f64 {
    let scale = a.max_abs();
    (a.rows() as f64) * f64::EPSILON * scale.max(f64::MIN_POSITIVE)
}

/// Cholesky factor `A = L Lᵀ` of a symmetric positive definite matrix.
#[derive(Clone, Debug)]
pub struct Cholesky {
    l: Mat,
}

impl Cholesky {
    pub fn factor(a: &Mat) -> Result<Self> {
        check_len("cholesky (square)", a.rows(), a.cols())?;
        let n = a.rows();
        let tiny = singular_threshold(a);
        let mut l = Mat::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !(d > tiny) {
                return Err(Error::NotPositiveDefinite { pivot: j });
            }
            let djj = sqrt(d);
            l[(j, j)] = djj;
            for i in j + 1..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / djj;
            }
        }
        Ok(Self { l })
    }

    pub fn lower(&self) -> &Mat {
        &self.l
    }

    /// Solves `L y = b`.
    pub fn forward(&self, b: &[f64]) -> Vec<f64> {
        let n = self.l.rows();
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= self.l[(i, k)] * y[k];
            }
            y[i] = s / self.l[(i, i)];
        }
        y
    }

    /// Solves `Lᵀ x = y`.
    pub fn backward(&self, y: &[f64]) -> Vec<f64> {
        let n = self.l.rows();
        let mut x = y.to_vec();
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..n {
                s -= self.l[(k, i)] * x[k];
            }
            x[i] = s / self.l[(i, i)];
        }
        x
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.l.rows());
        self.backward(&self.forward(b))
    }
}

#[derive(Clone, Copy, Debug)]
enum Pivot {
    One,
    Two,
}

/// Symmetric-indefinite factorization `P A Pᵀ = L D Lᵀ` with Bunch–Kaufman
/// partial pivoting (1×1 and 2×2 diagonal blocks).
#[derive(Clone, Debug)]
pub struct Ldlt {
    /// Unit lower factor below the diagonal, D blocks on and next to it.
    work: Mat,
    perm: Vec<usize>,
    blocks: Vec<(usize, Pivot)>,
}

impl Ldlt {
    pub fn factor(a: &Mat) -> Result<Self> {
        check_len("ldlt (square)", a.rows(), a.cols())?;
        let n = a.rows();
        let tiny = singular_threshold(a);
        let alpha = (1.0 + sqrt(17.0)) / 8.0;
        let mut w = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut blocks = Vec::new();
        let mut k = 0;
        while k < n {
            let absakk = w[(k, k)].abs();
            let (mut imax, mut colmax) = (k, 0.0_f64);
            for i in k + 1..n {
                if w[(i, k)].abs() > colmax {
                    colmax = w[(i, k)].abs();
                    imax = i;
                }
            }
            if absakk.max(colmax) <= tiny {
                return Err(Error::Singular { pivot: k });
            }
            let (kp, step) = if absakk >= alpha * colmax {
                (k, Pivot::One)
            } else {
                let mut rowmax = 0.0_f64;
                for j in k..n {
                    if j != imax {
                        rowmax = rowmax.max(w[(imax, j)].abs());
                    }
                }
                if absakk * rowmax >= alpha * colmax * colmax {
                    (k, Pivot::One)
                } else if w[(imax, imax)].abs() >= alpha * rowmax {
                    (imax, Pivot::One)
                } else {
                    (imax, Pivot::Two)
                }
            };
            let kk = match step {
                Pivot::One => k,
                Pivot::Two => k + 1,
            };
            if kp != kk {
                swap_sym(&mut w, kk, kp);
                perm.swap(kk, kp);
            }
            match step {
                Pivot::One => {
                    let d = w[(k, k)];
                    if d.abs() <= tiny {
                        return Err(Error::Singular { pivot: k });
                    }
                    for i in k + 1..n {
                        let wik = w[(i, k)];
                        for j in k + 1..=i {
                            let v = w[(i, j)] - wik * w[(j, k)] / d;
                            w[(i, j)] = v;
                            w[(j, i)] = v;
                        }
                    }
                    for i in k + 1..n {
                        w[(i, k)] /= d;
                    }
                    blocks.push((k, Pivot::One));
                    k += 1;
                }
                Pivot::Two => {
                    let (d11, d21, d22) = (w[(k, k)], w[(k + 1, k)], w[(k + 1, k + 1)]);
                    let det = d11 * d22 - d21 * d21;
                    if det.abs() <= tiny * tiny {
                        return Err(Error::Singular { pivot: k });
                    }
                    let (i11, i21, i22) = (d22 / det, -d21 / det, d11 / det);
                    for i in k + 2..n {
                        let (a0, a1) = (w[(i, k)], w[(i, k + 1)]);
                        let (l0, l1) = (a0 * i11 + a1 * i21, a0 * i21 + a1 * i22);
                        for j in k + 2..=i {
                            let v = w[(i, j)] - l0 * w[(j, k)] - l1 * w[(j, k + 1)];
                            w[(i, j)] = v;
                            w[(j, i)] = v;
                        }
                    }
                    for i in k + 2..n {
                        let (a0, a1) = (w[(i, k)], w[(i, k + 1)]);
                        w[(i, k)] = a0 * i11 + a1 * i21;
                        w[(i, k + 1)] = a0 * i21 + a1 * i22;
                    }
                    blocks.push((k, Pivot::Two));
                    k += 2;
                }
            }
        }
        Ok(Self {
            work: w,
            perm,
            blocks,
        })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.perm.len();
        assert_eq!(b.len(), n);
        let w = &self.work;
        let mut y: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        // L z = y, with 2×2 blocks having an identity diagonal block.
        for &(k, piv) in &self.blocks {
            let width = match piv {
                Pivot::One => 1,
                Pivot::Two => 2,
            };
            for c in k..k + width {
                let yc = y[c];
                for i in k + width..n {
                    y[i] -= w[(i, c)] * yc;
                }
            }
        }
        for &(k, piv) in &self.blocks {
            match piv {
                Pivot::One => y[k] /= w[(k, k)],
                Pivot::Two => {
                    let (d11, d21, d22) = (w[(k, k)], w[(k + 1, k)], w[(k + 1, k + 1)]);
                    let det = d11 * d22 - d21 * d21;
                    let (a, b2) = (y[k], y[k + 1]);
                    y[k] = (d22 * a - d21 * b2) / det;
                    y[k + 1] = (d11 * b2 - d21 * a) / det;
                }
            }
        }
        for &(k, piv) in self.blocks.iter().rev() {
            let width = match piv {
                Pivot::One => 1,
                Pivot::Two => 2,
            };
            for c in k..k + width {
                let mut s = y[c];
                for i in k + width..n {
                    s -= w[(i, c)] * y[i];
                }
                y[c] = s;
            }
        }
        let mut x = vec![0.0; n];
        for (i, &p) in self.perm.iter().enumerate() {
            x[p] = y[i];
        }
        x
    }

    /// Number of negative eigenvalues of the factored matrix (Sylvester
    /// inertia of D).
    pub fn negative_eigenvalues(&self) -> usize {
        let w = &self.work;
        self.blocks
            .iter()
            .map(|&(k, piv)| match piv {
                Pivot::One => usize::from(w[(k, k)] < 0.0),
                Pivot::Two => {
                    let (d11, d21, d22) = (w[(k, k)], w[(k + 1, k)], w[(k + 1, k + 1)]);
                    let det = d11 * d22 - d21 * d21;
                    if det < 0.0 {
                        1
                    } else if d11 + d22 < 0.0 {
                        2
                    } else {
                        0
                    }
                }
            })
            .sum()
    }
}

fn swap_sym(w: &mut Mat, a: usize, b: usize) {
    let n = w.rows();
    for j in 0..n {
        let t = w[(a, j)];
        w[(a, j)] = w[(b, j)];
        w[(b, j)] = t;
    }
    for i in 0..n {
        let t = w[(i, a)];
        w[(i, a)] = w[(i, b)];
        w[(i, b)] = t;
    }
}

/// Matrix argument for [`sym_solve`].
#[derive(Clone, Copy, Debug)]
pub enum SymMatrix<'a> {
    Dense(&'a Mat),
    Sparse(&'a SymSparse),
}

/// Solves a symmetric system through the symmetric-indefinite factorization
/// (which also covers the SPD case). Sparse inputs take the dense path.
pub fn sym_solve(matrix: SymMatrix<'_>, rhs: &[f64]) -> Result<Vec<f64>> {
    let dense;
    let a = match matrix {
        SymMatrix::Dense(a) => a,
        SymMatrix::Sparse(s) => {
            dense = s.to_dense();
            &dense
        }
    };
    check_len("sym_solve rhs", a.rows(), rhs.len())?;
    Ok(Ldlt::factor(a)?.solve(rhs))
}

/// SPD solve via Cholesky.
pub fn spd_solve(a: &Mat, rhs: &[f64]) -> Result<Vec<f64>> {
    check_len("spd_solve rhs", a.rows(), rhs.len())?;
    Ok(Cholesky::factor(a)?.solve(rhs))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerEstimate {
    /// Dominant eigenvalue (signed Rayleigh quotient).
    pub value: f64,
    pub iterations: usize,
    /// False when `max_iter` was reached before the estimate settled.
    pub converged: bool,
}

/// Power iteration for the eigenvalue of largest magnitude of a symmetric
/// operator given as `apply(x, y)` writing `y = A x`.
pub fn power_iteration(
    n: usize,
    apply: impl Fn(&[f64], &mut [f64]),
    tol: f64,
    max_iter: usize,
) -> PowerEstimate {
    // Deterministic start with components along every mode of the usual
    // operators.
    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * math::sin(1.0 + i as f64)).collect();
    let nx = math::norm2(&x);
    x.iter_mut().for_each(|v| *v /= nx);
    let mut y = vec![0.0; n];
    let mut value = 0.0;
    for it in 1..=max_iter {
        apply(&x, &mut y);
        let rq = math::dot(&x, &y);
        let ny = math::norm2(&y);
        if ny == 0.0 {
            return PowerEstimate {
                value: 0.0,
                iterations: it,
                converged: true,
            };
        }
        let settled = it > 1 && (rq - value).abs() <= tol * rq.abs();
        value = rq;
        if settled {
            return PowerEstimate {
                value,
                iterations: it,
                converged: true,
            };
        }
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = yi / ny;
        }
    }
    PowerEstimate {
        value,
        iterations: max_iter,
        converged: false,
    }
}

#[derive(Clone, Debug)]
pub struct EigenPairs {
    /// Ascending.
    pub values: Vec<f64>,
    /// Column `j` pairs with `values[j]`; normalized so `vᵀ B v = 1`.
    pub vectors: Mat,
}

/// Jacobi eigenvalue method for a dense symmetric matrix.
pub fn symmetric_eigen(a: &Mat) -> Result<EigenPairs> {
    check_len("symmetric_eigen (square)", a.rows(), a.cols())?;
    let n = a.rows();
    let mut m = a.symmetrized();
    let mut v = Mat::identity(n);
    let scale = m.max_abs().max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in 0..i {
                off += m[(i, j)] * m[(i, j)];
            }
        }
        if sqrt(off) <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + sqrt(theta * theta + 1.0));
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[(k, p)], m[(k, q)]);
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[(p, k)], m[(q, k)]);
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].partial_cmp(&m[(j, j)]).unwrap_or(core::cmp::Ordering::Equal));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let vectors = Mat::from_fn(n, n, |i, j| v[(i, order[j])]);
    Ok(EigenPairs { values, vectors })
}

/// Dense generalized symmetric eigensolve `A v = λ B v` with `B` SPD,
/// reduced to a standard problem through the Cholesky factor of `B`.
pub fn generalized_eigen(a: &Mat, b: &Mat) -> Result<EigenPairs> {
    const LIMIT: usize = 256;
    if a.rows() > LIMIT {
        return Err(Error::TooLarge {
            size: a.rows(),
            limit: LIMIT,
        });
    }
    check_len("generalized_eigen (square)", a.rows(), a.cols())?;
    check_len("generalized_eigen (B dim)", a.rows(), b.rows())?;
    let n = a.rows();
    let chol = Cholesky::factor(b)?;
    // C = L⁻¹ A L⁻ᵀ, built column by column.
    let mut linv_a = Mat::zeros(n, n);
    for j in 0..n {
        let col = chol.forward(&a.column(j));
        for i in 0..n {
            linv_a[(i, j)] = col[i];
        }
    }
    let mut c = Mat::zeros(n, n);
    for i in 0..n {
        let row = chol.forward(linv_a.row(i));
        for j in 0..n {
            c[(i, j)] = row[j];
        }
    }
    let std = symmetric_eigen(&c)?;
    let mut vectors = Mat::zeros(n, n);
    for j in 0..n {
        let v = chol.backward(&std.vectors.column(j));
        for i in 0..n {
            vectors[(i, j)] = v[i];
        }
    }
    Ok(EigenPairs {
        values: std.values,
        vectors,
    })
}
