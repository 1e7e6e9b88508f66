//! Error measures, rank selection and rate fitting.

use faer::{Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::embedding::Embedding;
use crate::error::{Error, Result};
use crate::linalg::{frobenius, ls_transform, mul, orthonormality_defect, sub, svd_top_r, tmul};

/// Scaled-orthonormality tolerance under which the projector form is reported.
const SCALED_ORTHO_TOL: f64 = 1e-8;
const IDENTITY_TOL: f64 = 1e-8;

/// Result of [`alignment_error`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    /// `‖Θ̂H* − Θ‖_F`.
    pub raw_error: f64,
    /// `raw_error / ‖Θ‖_F`.
    pub normalized: f64,
    /// Minimising transform, row-major.
    pub h_star: Vec<Vec<f64>>,
    /// `‖(I − P_Û)Θ‖_F`, present when `Θ̂ᵀΘ̂ = nI`.
    pub projector_form: Option<f64>,
}

/// `min_H ‖Θ̂H − Θ‖_F` over all r×r `H`, with Θ̂ rows put in subject order.
pub fn alignment_error(theta_hat: &Embedding, theta: MatRef<'_, f64>) -> Result<ErrorReport> {
    let ordered = theta_hat.in_subject_order()?;
    alignment_error_matrix(ordered.as_ref(), theta)
}

pub fn alignment_error_matrix(theta_hat: MatRef<'_, f64>, theta: MatRef<'_, f64>) -> Result<ErrorReport> {
    if theta_hat.nrows() != theta.nrows() {
        return Err(Error::Domain(format!(
            "estimate has {} rows, truth has {}",
            theta_hat.nrows(),
            theta.nrows()
        )));
    }
    let n = theta.nrows();
    if n == 0 || theta_hat.ncols() == 0 || theta_hat.ncols() > n {
        return Err(Error::Domain(format!(
            "cannot align a {}x{} estimate",
            theta_hat.nrows(),
            theta_hat.ncols()
        )));
    }
    let norm = frobenius(theta);
    if !(norm > 0.0) {
        return Err(Error::Domain("truth has zero norm".into()));
    }
    let h = ls_transform(theta_hat, theta)?;
    let raw = frobenius(sub(mul(theta_hat, h.as_ref()).as_ref(), theta).as_ref());

    let inv_root = 1.0 / (n as f64).sqrt();
    let u = Mat::from_fn(n, theta_hat.ncols(), |i, j| inv_root * theta_hat[(i, j)]);
    let projector_form = if orthonormality_defect(u.as_ref()) <= SCALED_ORTHO_TOL {
        let pf = frobenius(sub(theta, mul(u.as_ref(), tmul(u.as_ref(), theta).as_ref()).as_ref()).as_ref());
        if (raw - pf).abs() > IDENTITY_TOL * (1.0 + norm) {
            return Err(Error::Consistency(format!(
                "least-squares error {raw:e} differs from projector form {pf:e}"
            )));
        }
        Some(pf)
    } else {
        None
    };
    Ok(ErrorReport {
        raw_error: raw,
        normalized: raw / norm,
        h_star: (0..h.nrows())
            .map(|i| (0..h.ncols()).map(|j| h[(i, j)]).collect())
            .collect(),
        projector_form,
    })
}

/// `‖P₁ − P₂‖_F` for orthonormal bases of equal row count, from
/// `‖(I − P₂)U₁‖² + ‖(I − P₁)U₂‖²`.
pub fn subspace_distance(u1: MatRef<'_, f64>, u2: MatRef<'_, f64>) -> Result<f64> {
    if u1.nrows() != u2.nrows() {
        return Err(Error::Domain(format!(
            "bases live in dimensions {} and {}",
            u1.nrows(),
            u2.nrows()
        )));
    }
    for (name, u) in [("first", u1), ("second", u2)] {
        let d = orthonormality_defect(u);
        if d > 1e-6 {
            return Err(Error::Domain(format!(
                "{name} basis is not orthonormal (max deviation {d:e})"
            )));
        }
    }
    let c = tmul(u1, u2);
    let r1 = sub(u1, mul(u2, c.as_ref().transpose()).as_ref());
    let r2 = sub(u2, mul(u1, c.as_ref()).as_ref());
    Ok(frobenius(r1.as_ref()).hypot(frobenius(r2.as_ref())))
}

/// `IC(r) = ln V(r) + r · (n+p)/(np) · ln(np/(n+p))` for `r = 1..=r_max`,
/// with `V(r)` the mean squared residual of the rank-r approximation.
/// A residual that vanishes (relative to 1e-13 of the total energy) gives
/// `-inf`.
pub fn ic_values(x: MatRef<'_, f64>, r_max: usize) -> Result<Vec<f64>> {
    let (n, p) = (x.nrows(), x.ncols());
    if r_max == 0 || 2 * r_max > n.min(p) {
        return Err(Error::Domain(format!(
            "r_max = {r_max} must be between 1 and min(n, p)/2 = {}",
            n.min(p) / 2
        )));
    }
    let total = frobenius(x).powi(2);
    if !(total > 0.0) {
        return Err(Error::Domain("matrix is identically zero".into()));
    }
    let svd = svd_top_r(x, r_max)?;
    let (nf, pf) = (n as f64, p as f64);
    let penalty = (nf + pf) / (nf * pf) * (nf * pf / (nf + pf)).ln();
    let mut captured = 0.0;
    Ok(svd
        .s
        .iter()
        .enumerate()
        .map(|(k, s)| {
            captured += s * s;
            let resid = total - captured;
            if resid <= 1e-13 * total {
                f64::NEG_INFINITY
            } else {
                (resid / (nf * pf)).ln() + (k + 1) as f64 * penalty
            }
        })
        .collect())
}

/// Rank in `1..=r_max` minimising the information criterion; ties and
/// exact fits go to the smaller rank.
pub fn rank_select_ic(x: MatRef<'_, f64>, r_max: usize) -> Result<usize> {
    let ic = ic_values(x, r_max)?;
    let mut best = 0;
    for (k, v) in ic.iter().enumerate() {
        if *v < ic[best] {
            best = k;
        }
    }
    Ok(best + 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
}

/// Least-squares line through `(ln scale, ln error)`.
pub fn fit_loglog_slope(points: &[(f64, f64)]) -> Result<LogLogFit> {
    if points.len() < 3 {
        return Err(Error::Domain(format!(
            "slope fit needs at least 3 points, got {}",
            points.len()
        )));
    }
    if let Some((x, y)) = points.iter().find(|(x, y)| !(*x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite())) {
        return Err(Error::Domain(format!(
            "slope fit needs positive finite coordinates, got ({x}, {y})"
        )));
    }
    let k = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::Domain("slope fit needs at least two distinct scales".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Ok(LogLogFit {
        slope,
        intercept: my - slope * mx,
    })
}
