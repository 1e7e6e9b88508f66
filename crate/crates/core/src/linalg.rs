//! Dense kernels: truncated SVD, orthonormal bases, row-space projectors and
//! least-squares transforms.
//!
//! Every routine runs sequentially, so identical inputs give identical output
//! bits. Singular vectors follow one sign convention: the entry of largest
//! magnitude in each left singular vector is positive (ties go to the lowest
//! row index), and the matching right vector is flipped with it.

use faer::linalg::matmul::matmul;
use faer::{Accum, Mat, MatRef, Par};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Relative singular-value threshold below which a matrix is treated as rank deficient.
pub const RANK_TOL: f64 = 1e-10;

/// Matrices whose smaller dimension is at most this are decomposed densely.
const DENSE_LIMIT: usize = 256;
const OVERSAMPLE: usize = 10;
const MAX_ITER: usize = 200;
const SUBSPACE_TOL: f64 = 1e-11;
const TIE_TOL: f64 = 1e-12;
const START_SEED: u64 = 0x0A9C_A5EE_D000_0001;

/// `a * b`, sequential.
pub fn mul(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> Mat<f64> {
    let mut out = Mat::zeros(a.nrows(), b.ncols());
    matmul(out.as_mut(), Accum::Replace, a, b, 1.0, Par::Seq);
    out
}

/// `aᵀ * b`, sequential.
pub fn tmul(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> Mat<f64> {
    mul(a.transpose(), b)
}

pub fn frobenius(a: MatRef<'_, f64>) -> f64 {
    a.norm_l2()
}

pub fn scaled(a: MatRef<'_, f64>, c: f64) -> Mat<f64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| c * a[(i, j)])
}

pub fn sub(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> Mat<f64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] - b[(i, j)])
}

/// Copies the rows of `a` listed in `rows`, in that order.
pub fn select_rows(a: MatRef<'_, f64>, rows: &[usize]) -> Mat<f64> {
    Mat::from_fn(rows.len(), a.ncols(), |i, j| a[(rows[i], j)])
}

/// Copies the columns of `a` listed in `cols`, in that order.
pub fn select_cols(a: MatRef<'_, f64>, cols: &[usize]) -> Mat<f64> {
    Mat::from_fn(a.nrows(), cols.len(), |i, j| a[(i, cols[j])])
}

/// Leading singular triplets of a matrix.
#[derive(Debug, Clone)]
pub struct TruncatedSvd {
    /// rows × r, orthonormal columns.
    pub u: Mat<f64>,
    /// r values, nonincreasing.
    pub s: Vec<f64>,
    /// cols × r, orthonormal columns.
    pub v: Mat<f64>,
}

impl TruncatedSvd {
    pub fn rank(&self) -> usize {
        self.s.len()
    }

    /// `U diag(S) Vᵀ`.
    pub fn reconstruct(&self) -> Mat<f64> {
        let us = Mat::from_fn(self.u.nrows(), self.s.len(), |i, j| self.u[(i, j)] * self.s[j]);
        mul(us.as_ref(), self.v.as_ref().transpose())
    }
}

/// Which algorithm `svd_top_r_with` uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SvdMethod {
    /// Dense below a size threshold, block subspace iteration above it.
    Auto,
    /// Full thin SVD, then truncation.
    Dense,
    /// Block subspace iteration with Rayleigh–Ritz extraction.
    Iterative,
}

/// Top-`r` singular triplets of `x`.
pub fn svd_top_r(x: MatRef<'_, f64>, r: usize) -> Result<TruncatedSvd> {
    svd_top_r_with(x, r, SvdMethod::Auto)
}

pub fn svd_top_r_with(x: MatRef<'_, f64>, r: usize, method: SvdMethod) -> Result<TruncatedSvd> {
    let (m, n) = (x.nrows(), x.ncols());
    let min_dim = m.min(n);
    if r == 0 || r > min_dim {
        return Err(Error::Domain(format!(
            "rank {r} out of range for a {m}x{n} matrix"
        )));
    }
    for j in 0..n {
        for i in 0..m {
            if !x[(i, j)].is_finite() {
                return Err(Error::Data(format!(
                    "non-finite entry at ({}, {})",
                    i + 1,
                    j + 1
                )));
            }
        }
    }
    let iterative = match method {
        SvdMethod::Dense => false,
        SvdMethod::Iterative => true,
        SvdMethod::Auto => min_dim > DENSE_LIMIT && r + OVERSAMPLE <= min_dim / 4,
    };
    let mut out = if iterative {
        subspace_iteration(x, r)?
    } else {
        dense_top_r(x, r)?
    };
    fix_signs(&mut out);
    Ok(out)
}

fn dense_top_r(x: MatRef<'_, f64>, r: usize) -> Result<TruncatedSvd> {
    let svd = x
        .thin_svd()
        .map_err(|e| Error::Data(format!("SVD failed to converge: {e:?}")))?;
    let s: Vec<f64> = svd.S().column_vector().iter().take(r).copied().collect();
    Ok(TruncatedSvd {
        u: svd.U().subcols(0, r).to_owned(),
        s,
        v: svd.V().subcols(0, r).to_owned(),
    })
}

fn gaussian(rows: usize, cols: usize, seed: u64) -> Mat<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Mat::zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            out[(i, j)] = StandardNormal.sample(&mut rng);
        }
    }
    out
}

fn thin_q(a: MatRef<'_, f64>) -> Mat<f64> {
    a.qr().compute_thin_Q()
}

/// Block subspace iteration from a fixed Gaussian start. Stops when the
/// leading `r`-dimensional left subspace moves by less than `SUBSPACE_TOL`
/// between sweeps, or after `MAX_ITER` sweeps with the current estimate.
fn subspace_iteration(x: MatRef<'_, f64>, r: usize) -> Result<TruncatedSvd> {
    let (m, n) = (x.nrows(), x.ncols());
    let k = (r + OVERSAMPLE).min(m.min(n));
    let omega = gaussian(n, k, START_SEED ^ ((m as u64) << 32) ^ n as u64);
    let mut q = thin_q(mul(x, omega.as_ref()).as_ref());
    let mut prev: Option<Mat<f64>> = None;
    let mut result = None;
    for _ in 0..MAX_ITER {
        let z = tmul(x, q.as_ref());
        let qv = thin_q(z.as_ref());
        let y = mul(x, qv.as_ref());
        let svd = y
            .thin_svd()
            .map_err(|e| Error::Data(format!("SVD failed to converge: {e:?}")))?;
        let u = svd.U().to_owned();
        let ur = u.as_ref().subcols(0, r);
        let moved = match &prev {
            Some(p) => {
                let proj = mul(p.as_ref(), tmul(p.as_ref(), ur).as_ref());
                frobenius(sub(ur, proj.as_ref()).as_ref())
            }
            None => f64::INFINITY,
        };
        let s: Vec<f64> = svd.S().column_vector().iter().take(r).copied().collect();
        let v = mul(qv.as_ref(), svd.V().subcols(0, r));
        let done = moved <= SUBSPACE_TOL;
        result = Some(TruncatedSvd {
            u: ur.to_owned(),
            s,
            v,
        });
        if done {
            break;
        }
        prev = Some(ur.to_owned());
        q = u;
    }
    Ok(result.expect("at least one sweep runs"))
}

fn fix_signs(svd: &mut TruncatedSvd) {
    for j in 0..svd.s.len() {
        let mut best = 0usize;
        let mut best_abs = -1.0;
        for i in 0..svd.u.nrows() {
            let a = svd.u[(i, j)].abs();
            // magnitudes within a few ulps count as tied
            if a > best_abs * (1.0 + TIE_TOL) {
                best_abs = a;
                best = i;
            }
        }
        if svd.u[(best, j)] < 0.0 {
            for i in 0..svd.u.nrows() {
                svd.u[(i, j)] = -svd.u[(i, j)];
            }
            for i in 0..svd.v.nrows() {
                svd.v[(i, j)] = -svd.v[(i, j)];
            }
        }
    }
}

/// Orthonormal basis of the column space of `x`, taken from its SVD.
/// Fails when `x` is numerically rank deficient.
pub fn orthonormal_basis(x: MatRef<'_, f64>) -> Result<Mat<f64>> {
    let r = x.ncols();
    if r == 0 || r > x.nrows() {
        return Err(Error::Domain(format!(
            "cannot take an orthonormal basis of {} columns in dimension {}",
            r,
            x.nrows()
        )));
    }
    let svd = svd_top_r_with(x, r, SvdMethod::Dense)?;
    let largest = svd.s[0];
    let smallest = svd.s[r - 1];
    if !(smallest > RANK_TOL * largest) {
        return Err(Error::Conditioning {
            smallest,
            largest,
            step: None,
        });
    }
    Ok(svd.u)
}

/// Orthogonal projector onto the span of an orthonormal basis, applied
/// without forming the n×n matrix.
#[derive(Debug, Clone)]
pub struct Projector {
    basis: Mat<f64>,
}

impl Projector {
    /// `basis` must have orthonormal columns (checked to 1e-8).
    pub fn new(basis: Mat<f64>) -> Result<Self> {
        let dev = orthonormality_defect(basis.as_ref());
        if dev > 1e-8 {
            return Err(Error::Domain(format!(
                "projector basis is not orthonormal (max deviation {dev:e})"
            )));
        }
        Ok(Projector { basis })
    }

    pub fn basis(&self) -> MatRef<'_, f64> {
        self.basis.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn apply(&self, x: MatRef<'_, f64>) -> Result<Mat<f64>> {
        project_rows(self, x)
    }
}

/// `max |BᵀB − I|`.
pub fn orthonormality_defect(b: MatRef<'_, f64>) -> f64 {
    let g = tmul(b, b);
    let mut worst = 0.0f64;
    for j in 0..g.ncols() {
        for i in 0..g.nrows() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - target).abs());
        }
    }
    worst
}

/// `basis (basisᵀ x)`.
pub fn project_rows(p: &Projector, x: MatRef<'_, f64>) -> Result<Mat<f64>> {
    if p.basis.nrows() != x.nrows() {
        return Err(Error::Domain(format!(
            "projector acts on dimension {}, matrix has {} rows",
            p.basis.nrows(),
            x.nrows()
        )));
    }
    let coef = tmul(p.basis.as_ref(), x);
    Ok(mul(p.basis.as_ref(), coef.as_ref()))
}

/// Least-squares transform `W = argmin ‖B W − A‖_F`, using the
/// pseudo-inverse of `B` when it is numerically rank deficient.
pub fn ls_transform(b: MatRef<'_, f64>, a: MatRef<'_, f64>) -> Result<Mat<f64>> {
    ls_transform_with(b, a, true)
}

/// As [`ls_transform`]; with `pseudo_inverse = false` a rank-deficient `B`
/// is reported as a conditioning error.
pub fn ls_transform_with(
    b: MatRef<'_, f64>,
    a: MatRef<'_, f64>,
    pseudo_inverse: bool,
) -> Result<Mat<f64>> {
    if b.nrows() != a.nrows() {
        return Err(Error::Domain(format!(
            "least squares needs matching rows, got {} and {}",
            b.nrows(),
            a.nrows()
        )));
    }
    let r = b.ncols();
    if r == 0 || r > b.nrows() {
        return Err(Error::Domain(format!(
            "least squares with {} unknowns and {} equations is not supported",
            r,
            b.nrows()
        )));
    }
    let svd = svd_top_r_with(b, r, SvdMethod::Dense)?;
    let largest = svd.s[0];
    let cutoff = RANK_TOL * largest;
    let smallest = svd.s[r - 1];
    if !(smallest > cutoff) && !pseudo_inverse {
        return Err(Error::Conditioning {
            smallest,
            largest,
            step: None,
        });
    }
    // W = V S⁺ Uᵀ A
    let mut uta = tmul(svd.u.as_ref(), a);
    for i in 0..r {
        let inv = if svd.s[i] > cutoff && svd.s[i] > 0.0 {
            1.0 / svd.s[i]
        } else {
            0.0
        };
        for j in 0..uta.ncols() {
            uta[(i, j)] *= inv;
        }
    }
    Ok(mul(svd.v.as_ref(), uta.as_ref()))
}

/// Top `r` left singular vectors of `left * right` where `left` is n×k with
/// small k. Exact: `left = Q R_l`, so the product is `Q (R_l right)` and
/// only a k×m matrix is decomposed.
pub fn factored_left_vectors(
    left: MatRef<'_, f64>,
    right: MatRef<'_, f64>,
    r: usize,
) -> Result<TruncatedSvd> {
    if left.ncols() != right.nrows() {
        return Err(Error::Domain("factor shapes do not chain".into()));
    }
    if left.ncols() > left.nrows() {
        return Err(Error::Domain(
            "left factor must have at least as many rows as columns".into(),
        ));
    }
    let qr = left.qr();
    let q = qr.compute_thin_Q();
    let rl = qr.thin_R().to_owned();
    // thin_R may carry nonzero strictly-lower garbage in some storage layouts; zero it.
    let rl = Mat::from_fn(rl.nrows(), rl.ncols(), |i, j| if i <= j { rl[(i, j)] } else { 0.0 });
    let core = mul(rl.as_ref(), right);
    let small = svd_top_r_with(core.as_ref(), r, SvdMethod::Dense)?;
    let mut out = TruncatedSvd {
        u: mul(q.as_ref(), small.u.as_ref()),
        s: small.s,
        v: small.v,
    };
    fix_signs(&mut out);
    Ok(out)
}
