//! Positive-definite matrix algebra: factorization, determinants,
//! sub-matrices, Schur complements, rank-one updates, structured (Toeplitz)
//! constructors and seeded random generation.

use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::scalar::{reconstruction_tol, symmetry_tol, Scalar};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Symmetric positive-definite matrix with its lower Cholesky factor
/// (`C = L·Lᵀ`) computed at construction. Instances are immutable.
#[derive(Clone, Debug, Serialize)]
pub struct PdMatrix<T> {
    mat: Mat<T>,
    chol: Mat<T>,
    log_det: T,
}

impl<T: Scalar> PdMatrix<T> {
    /// Validate symmetry, factorize, and check the reconstruction
    /// `‖L·Lᵀ − C‖_max` against the input scale.
    pub fn try_new(mat: Mat<T>) -> Result<Self> {
        if !mat.is_square() || mat.nrows() == 0 {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} is not a nonempty square matrix",
                mat.nrows(),
                mat.ncols()
            )));
        }
        let scale = mat.max_abs().max(T::one());
        if !mat.is_symmetric_within(symmetry_tol::<T>() * scale) {
            return Err(Error::NotSymmetric);
        }
        let mat = mat.symmetrized();
        let chol = cholesky(&mat)?;
        let recon = chol.matmul(&chol.transpose());
        if recon.sub(&mat).max_abs() > reconstruction_tol::<T>() * scale {
            return Err(Error::NotPositiveDefinite);
        }
        let mut log_det = T::zero();
        for i in 0..mat.nrows() {
            log_det += chol[(i, i)].ln();
        }
        log_det += log_det;
        Ok(Self { mat, chol, log_det })
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn entries(&self) -> &Mat<T> {
        &self.mat
    }

    pub fn chol_lower(&self) -> &Mat<T> {
        &self.chol
    }

    /// Natural-log determinant, `2·Σ ln L_ii`.
    pub fn log_det(&self) -> T {
        self.log_det
    }

    /// Solve `C·x = b` via the two triangular systems.
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.dim();
        assert_eq!(b.len(), n);
        let mut y = vec![T::zero(); n];
        for i in 0..n {
            let mut s = b[i];
            for j in 0..i {
                s -= self.chol[(i, j)] * y[j];
            }
            y[i] = s / self.chol[(i, i)];
        }
        let mut x = vec![T::zero(); n];
        for i in (0..n).rev() {
            let mut s = y[i];
            for j in (i + 1)..n {
                s -= self.chol[(j, i)] * x[j];
            }
            x[i] = s / self.chol[(i, i)];
        }
        x
    }

    pub fn inverse(&self) -> Mat<T> {
        let n = self.dim();
        let mut inv = Mat::zeros(n, n);
        let mut e = vec![T::zero(); n];
        for j in 0..n {
            e[j] = T::one();
            let col = self.solve(&e);
            e[j] = T::zero();
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        inv.symmetrized()
    }

    /// Quadratic form `xᵀ·C⁻¹·x` via one triangular solve.
    pub fn quad_inv(&self, x: &[T]) -> T {
        let n = self.dim();
        assert_eq!(x.len(), n);
        let mut y = vec![T::zero(); n];
        let mut q = T::zero();
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.chol[(i, j)] * y[j];
            }
            y[i] = s / self.chol[(i, i)];
            q += y[i] * y[i];
        }
        q
    }

    /// Log density of the zero-mean normal with this covariance.
    pub fn log_pdf(&self, x: &[T]) -> T {
        let d = T::from_usize(self.dim()).unwrap();
        let two = T::c(2.0);
        -(d * T::c(std::f64::consts::TAU).ln() + self.log_det() + self.quad_inv(x)) / two
    }

    pub fn pdf(&self, x: &[T]) -> T {
        self.log_pdf(x).exp()
    }

    /// Map an i.i.d. standard-normal vector through the factor: `x = L·g`.
    pub fn correlate(&self, g: &[T], out: &mut [T]) {
        let n = self.dim();
        assert_eq!(g.len(), n);
        assert_eq!(out.len(), n);
        for i in 0..n {
            let mut s = T::zero();
            for j in 0..=i {
                s += self.chol[(i, j)] * g[j];
            }
            out[i] = s;
        }
    }

    /// Principal sub-matrix on `S`, itself positive definite.
    pub fn submatrix(&self, s: &IndexSet) -> Result<PdMatrix<T>> {
        if s.dim() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "index set over {} elements applied to a {}-dim matrix",
                s.dim(),
                self.dim()
            )));
        }
        PdMatrix::try_new(self.mat.select(s.members(), s.members()))
    }

    pub fn leading(&self, k: usize) -> Result<PdMatrix<T>> {
        let idx: Vec<usize> = (0..k).collect();
        self.submatrix(&IndexSet::new(self.dim(), idx)?)
    }

    /// Block split at `p`: regression matrix `D = C_cross·(C_tail)⁻¹`
    /// (coefficients of the first block on the last) and the Schur
    /// complement `K = C_head − D·C_crossᵀ`, the conditional covariance.
    pub fn conditional_params(&self, p: usize) -> Result<(Mat<T>, PdMatrix<T>)> {
        let d = self.dim();
        if p == 0 || p >= d {
            return Err(Error::IndexOutOfRange);
        }
        let tail: Vec<usize> = (p..d).collect();
        let head: Vec<usize> = (0..p).collect();
        self.regression_onto(&head, &tail)
    }

    /// Regression of coordinates `on` onto coordinates `given`:
    /// returns `(R, K)` with `E[X_on | X_given = x] = R·x` and conditional
    /// covariance `K` (Schur complement), both under this covariance.
    pub fn regression_onto(&self, on: &[usize], given: &[usize]) -> Result<(Mat<T>, PdMatrix<T>)> {
        let c_gg = PdMatrix::try_new(self.mat.select(given, given))?;
        let c_og = self.mat.select(on, given);
        let inv_gg = c_gg.inverse();
        let r = c_og.matmul(&inv_gg);
        let k = self
            .mat
            .select(on, on)
            .sub(&r.matmul(&c_og.transpose()))
            .symmetrized();
        Ok((r, PdMatrix::try_new(k)?))
    }

    /// Conditional law of the complement of `s` given the coordinates in `s`:
    /// `(R, K)` with mean map `R·x(S)` and covariance `K`.
    pub fn cond_given(&self, s: &IndexSet) -> Result<(Mat<T>, PdMatrix<T>)> {
        let comp = s.complement_members();
        if comp.is_empty() {
            return Err(Error::EmptyIndexSet);
        }
        self.regression_onto(&comp, s.members())
    }
}

/// Plain lower Cholesky; fails when a pivot is not strictly positive.
fn cholesky<T: Scalar>(a: &Mat<T>) -> Result<Mat<T>> {
    let n = a.nrows();
    let mut l = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            if i == j {
                if s <= T::zero() || !s.is_finite() {
                    return Err(Error::NotPositiveDefinite);
                }
                l[(i, j)] = s.sqrt();
            } else {
                l[(i, j)] = s / l[(j, j)];
            }
        }
    }
    Ok(l)
}

/// Cholesky-like factor for positive SEMI-definite matrices: columns with a
/// negligible pivot are zeroed instead of failing. Used to sample from
/// degenerate conditional covariances (e.g. rank-one summands).
pub fn psd_factor<T: Scalar>(a: &Mat<T>) -> Result<Mat<T>> {
    let n = a.nrows();
    let scale = a.max_abs().max(T::one());
    let tol = symmetry_tol::<T>() * T::c(1e3) * scale;
    let mut l: Mat<T> = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            if i == j {
                if s < -tol || !s.is_finite() {
                    return Err(Error::NotPositiveDefinite);
                }
                l[(i, j)] = if s > tol { s.sqrt() } else { T::zero() };
            } else {
                l[(i, j)] = if l[(j, j)] > T::zero() {
                    s / l[(j, j)]
                } else {
                    T::zero()
                };
            }
        }
    }
    Ok(l)
}

/// Strictly increasing set of zero-based coordinate indices inside an
/// ambient dimension.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct IndexSet {
    dim: usize,
    members: Vec<usize>,
}

impl IndexSet {
    pub fn new(dim: usize, members: Vec<usize>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::EmptyIndexSet);
        }
        for w in members.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::InvalidScenario(
                    "index set members must be strictly increasing".into(),
                ));
            }
        }
        if *members.last().unwrap() >= dim {
            return Err(Error::IndexOutOfRange);
        }
        Ok(Self { dim, members })
    }

    pub fn from_bitmask(dim: usize, mask: u64) -> Result<Self> {
        let members: Vec<usize> = (0..dim).filter(|i| mask >> i & 1 == 1).collect();
        Self::new(dim, members)
    }

    pub fn full(dim: usize) -> Self {
        Self {
            dim,
            members: (0..dim).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.members.len() == self.dim
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn complement_members(&self) -> Vec<usize> {
        (0..self.dim)
            .filter(|i| !self.members.contains(i))
            .collect()
    }

    pub fn complement(&self) -> Result<IndexSet> {
        IndexSet::new(self.dim, self.complement_members())
    }

    pub fn bitmask(&self) -> u64 {
        self.members.iter().fold(0u64, |m, &i| m | 1 << i)
    }
}

/// Cyclic distance on `{0,…,d−1}`: `min(|j−i|, d−|j−i|)`.
pub fn cyclic_distance(d: usize, i: usize, j: usize) -> usize {
    let gap = i.abs_diff(j);
    gap.min(d - gap)
}

/// Toeplitz constructor: entry `(i,j)` is `lags[|i−j|]` (or, when `cyclic`,
/// `lags[dist_d(i,j)]`), with lags beyond the supplied list taken as zero.
/// The result must pass the positive-definiteness check.
pub fn toeplitz<T: Scalar>(dim: usize, lags: &[T], cyclic: bool) -> Result<PdMatrix<T>> {
    if lags.is_empty() || lags.len() > dim {
        return Err(Error::DimensionMismatch(format!(
            "{} lags for dimension {}",
            lags.len(),
            dim
        )));
    }
    let at = |k: usize| if k < lags.len() { lags[k] } else { T::zero() };
    let mat = Mat::from_fn(dim, dim, |i, j| {
        let k = if cyclic {
            cyclic_distance(dim, i, j)
        } else {
            i.abs_diff(j)
        };
        at(k)
    });
    PdMatrix::try_new(mat)
}

/// Whether a matrix is Toeplitz (constant along diagonals) within `tol`.
pub fn is_toeplitz<T: Scalar>(m: &Mat<T>, tol: T) -> bool {
    if !m.is_square() {
        return false;
    }
    let d = m.nrows();
    for i in 1..d {
        for j in 1..d {
            if (m[(i, j)] - m[(i - 1, j - 1)]).abs() > tol {
                return false;
            }
        }
    }
    true
}

/// Whether a matrix is cyclic Toeplitz (constant along cyclic distance
/// classes) within `tol`.
pub fn is_cyclic_toeplitz<T: Scalar>(m: &Mat<T>, tol: T) -> bool {
    if !m.is_square() {
        return false;
    }
    let d = m.nrows();
    for i in 0..d {
        for j in 0..d {
            let k = cyclic_distance(d, i, j);
            if (m[(i, j)] - m[(0, k)]).abs() > tol {
                return false;
            }
        }
    }
    true
}

/// Seeded Wishart-style draw: `(1/d)·M·Mᵀ + 1e−3·I` with `M` a d×d matrix of
/// standard normals. Deterministic in the seed.
pub fn random_pd<T: Scalar>(d: usize, seed: u64) -> PdMatrix<T> {
    assert!(d >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = Mat::from_fn(d, d, |_, _| T::standard_normal(&mut rng));
    let mut c = m
        .matmul(&m.transpose())
        .scaled(T::one() / T::from_usize(d).unwrap());
    for i in 0..d {
        c[(i, i)] += T::c(1e-3);
    }
    PdMatrix::try_new(c).expect("ridge-regularized Gram matrix is positive definite")
}

/// Decompose a symmetric matrix as `σ·v·vᵀ` with `‖v‖ = 1`; errors when the
/// matrix is not rank one within a relative tolerance.
pub fn rank_one_decompose<T: Scalar>(e: &Mat<T>) -> Result<(T, Vec<T>)> {
    let scale = e.max_abs();
    if !e.is_square() || scale == T::zero() {
        return Err(Error::NotRankOne);
    }
    if !e.is_symmetric_within(symmetry_tol::<T>() * T::c(1e3) * scale) {
        return Err(Error::NotSymmetric);
    }
    let n = e.nrows();
    // The column of largest norm spans the range of a rank-one matrix.
    let mut best = 0;
    let mut best_norm = T::zero();
    for j in 0..n {
        let norm = (0..n).fold(T::zero(), |s, i| s + e[(i, j)] * e[(i, j)]);
        if norm > best_norm {
            best_norm = norm;
            best = j;
        }
    }
    let mut v: Vec<T> = (0..n).map(|i| e[(i, best)]).collect();
    let norm = best_norm.sqrt();
    for x in v.iter_mut() {
        *x /= norm;
    }
    // sigma = vᵀ·E·v for the unit candidate direction.
    let sigma = e.quad(&v);
    let recon = Mat::outer(&v, &v).scaled(sigma);
    if recon.sub(e).max_abs() > T::c(1e-8) * scale {
        return Err(Error::NotRankOne);
    }
    Ok((sigma, v))
}

/// `(G + E)⁻¹ = G⁻¹ − G⁻¹·E·G⁻¹ / (1 + g)` with `g = tr(E·G⁻¹)`, for a
/// rank-one symmetric update `E`. Errors when `1 + g` vanishes.
pub fn sherman_morrison_inverse<T: Scalar>(g_mat: &PdMatrix<T>, e: &Mat<T>) -> Result<Mat<T>> {
    if e.nrows() != g_mat.dim() || e.ncols() != g_mat.dim() {
        return Err(Error::DimensionMismatch(format!(
            "update is {}x{}, matrix is {}-dimensional",
            e.nrows(),
            e.ncols(),
            g_mat.dim()
        )));
    }
    rank_one_decompose(e)?;
    let g_inv = g_mat.inverse();
    let g_trace = e.trace_product(&g_inv);
    let denom = T::one() + g_trace;
    if denom.abs() < T::c(1e-12) {
        return Err(Error::SingularUpdate);
    }
    let correction = g_inv.matmul(e).matmul(&g_inv).scaled(T::one() / denom);
    Ok(g_inv.sub(&correction).symmetrized())
}

/// Covariance of the dependence-broken Gaussian in which the coordinate
/// groups `a` and `b` are made conditionally independent given `r`
/// (all indices local to `c`, jointly a partition of `0..c.dim`).
/// The cross block becomes `C[a,R]·C[R,R]⁻¹·C[R,b]`; with `r` empty the
/// cross block is zeroed.
pub fn broken_cov<T: Scalar>(c: &Mat<T>, r: &[usize], a: &[usize], b: &[usize]) -> Result<Mat<T>> {
    let mut out = c.clone();
    let cross = if r.is_empty() {
        Mat::zeros(a.len(), b.len())
    } else {
        let c_rr = PdMatrix::try_new(c.select(r, r))?;
        c.select(a, r)
            .matmul(&c_rr.inverse())
            .matmul(&c.select(r, b))
    };
    for (ia, &i) in a.iter().enumerate() {
        for (jb, &j) in b.iter().enumerate() {
            out[(i, j)] = cross[(ia, jb)];
            out[(j, i)] = cross[(ia, jb)];
        }
    }
    Ok(out)
}

/// All subsets of `{0,…,d−1}` of cardinality `k`, as bitmasks in increasing
/// order. `d` is capped by the enumeration guard at the call sites.
pub fn subsets_of_size(d: usize, k: usize) -> Vec<u64> {
    let mut out = Vec::new();
    for mask in 1u64..(1 << d) {
        if mask.count_ones() as usize == k {
            out.push(mask);
        }
    }
    out
}
