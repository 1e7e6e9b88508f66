use std::fmt;
use std::str::FromStr;

use faer::{Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::orthonormality_defect;

/// Estimator that produced an embedding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Appca,
    #[serde(alias = "appca-crossfit")]
    AppcaCrossfit,
    Chain,
    #[serde(alias = "shared-pca")]
    SharedPca,
    #[serde(alias = "two-step")]
    TwoStep,
    Oracle,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Appca,
        Method::AppcaCrossfit,
        Method::Chain,
        Method::SharedPca,
        Method::TwoStep,
        Method::Oracle,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Appca => "appca",
            Method::AppcaCrossfit => "appca_crossfit",
            Method::Chain => "chain",
            Method::SharedPca => "shared_pca",
            Method::TwoStep => "two_step",
            Method::Oracle => "oracle",
        }
    }

    /// Whether the estimator returns `√n` times an orthonormal basis.
    pub fn is_scaled_orthonormal(self) -> bool {
        !matches!(self, Method::TwoStep)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    /// Accepts snake_case and kebab-case spellings.
    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == norm)
            .ok_or_else(|| Error::Config(format!("unknown method '{s}'")))
    }
}

/// n×r subject representations.
#[derive(Debug, Clone)]
pub struct Embedding {
    pub theta_hat: Mat<f64>,
    pub rank: usize,
    pub method: Method,
    /// `row_index[k]` is the subject index of row `k` of `theta_hat`.
    pub row_index: Vec<usize>,
}

impl Embedding {
    /// Embedding whose rows are already in subject order.
    pub fn new(theta_hat: Mat<f64>, method: Method) -> Self {
        let n = theta_hat.nrows();
        Embedding {
            rank: theta_hat.ncols(),
            theta_hat,
            method,
            row_index: (0..n).collect(),
        }
    }

    /// `√n · basis`, rows in subject order.
    pub fn from_basis(basis: MatRef<'_, f64>, method: Method) -> Self {
        let scale = (basis.nrows() as f64).sqrt();
        let theta = Mat::from_fn(basis.nrows(), basis.ncols(), |i, j| scale * basis[(i, j)]);
        Embedding::new(theta, method)
    }

    pub fn n(&self) -> usize {
        self.theta_hat.nrows()
    }

    /// Rows rearranged so that row `i` belongs to subject `i`.
    pub fn in_subject_order(&self) -> Result<Mat<f64>> {
        let n = self.n();
        let mut seen = vec![false; n];
        for &i in &self.row_index {
            if i >= n || seen[i] {
                return Err(Error::Domain("row_index is not a permutation".into()));
            }
            seen[i] = true;
        }
        if self.row_index.len() != n {
            return Err(Error::Domain("row_index length differs from row count".into()));
        }
        let mut inverse = vec![0usize; n];
        for (k, &i) in self.row_index.iter().enumerate() {
            inverse[i] = k;
        }
        Ok(Mat::from_fn(n, self.rank, |i, j| self.theta_hat[(inverse[i], j)]))
    }

    /// `max |Θ̂ᵀΘ̂/n − I|`.
    pub fn scaled_orthonormality_defect(&self) -> f64 {
        let scale = 1.0 / (self.n() as f64).sqrt();
        let u = Mat::from_fn(self.n(), self.rank, |i, j| scale * self.theta_hat[(i, j)]);
        orthonormality_defect(u.as_ref())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names() {
        assert_eq!("appca-crossfit".parse::<Method>().unwrap(), Method::AppcaCrossfit);
        assert_eq!("shared_pca".parse::<Method>().unwrap(), Method::SharedPca);
        assert!("pca".parse::<Method>().is_err());
        assert_eq!(serde_json::to_string(&Method::TwoStep).unwrap(), "\"two_step\"");
    }

    #[test]
    fn subject_order_applies_permutation() {
        let theta = Mat::from_fn(3, 1, |i, _| i as f64);
        let mut e = Embedding::new(theta, Method::Oracle);
        e.row_index = vec![2, 0, 1];
        let ordered = e.in_subject_order().unwrap();
        assert_eq!(ordered[(2, 0)], 0.0);
        assert_eq!(ordered[(0, 0)], 1.0);
        e.row_index = vec![0, 0, 1];
        assert!(e.in_subject_order().is_err());
    }
}
