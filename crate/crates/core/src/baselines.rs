//! Comparison estimators: PCA on the shared columns, per-group PCA aligned
//! through feature embeddings, and PCA on the complete matrix.

use faer::{Mat, MatRef};

use crate::appca::check_rank;
use crate::embedding::{Embedding, Method};
use crate::error::{Error, Result};
use crate::layout::{BlockLayout, FeatureSet, MaskedMatrix};
use crate::linalg::{ls_transform, mul, select_rows, svd_top_r};

/// √n times the top-r left singular vectors of `X[·, T]`.
pub fn shared_pca_fit(x: &MaskedMatrix, r: usize) -> Result<Embedding> {
    let layout = x.layout();
    let t = layout.shared_feature_set();
    check_rank(r, || format!("shared feature set ({} features)", t.len()), t.len())?;
    check_rank(r, || format!("subject set ({} subjects)", layout.n), layout.n)?;
    let rows: Vec<usize> = (0..layout.n).collect();
    let sub = x.submatrix(&rows, t.indices())?;
    let svd = svd_top_r(sub.as_ref(), r)?;
    Ok(Embedding::from_basis(svd.u.as_ref(), Method::SharedPca))
}

/// √n times the top-r left singular vectors of the complete matrix.
pub fn oracle_fit(x_full: MatRef<'_, f64>, r: usize) -> Result<Embedding> {
    for j in 0..x_full.ncols() {
        for i in 0..x_full.nrows() {
            if x_full[(i, j)].is_nan() {
                return Err(Error::Domain(format!(
                    "oracle needs a fully observed matrix; cell ({}, {}) is masked",
                    i + 1,
                    j + 1
                )));
            }
        }
    }
    let svd = svd_top_r(x_full, r)?;
    Ok(Embedding::from_basis(svd.u.as_ref(), Method::Oracle))
}

/// Local PCA of one group on everything it observes.
#[derive(Debug, Clone)]
pub struct LocalPca {
    pub group: usize,
    /// Observed columns, matching the rows of `phi`.
    pub features: FeatureSet,
    /// `√n_g · Û` (n_g × r).
    pub theta: Mat<f64>,
    /// `V̂ diag(S) / √n_g` (|V_(g)| × r).
    pub phi: Mat<f64>,
}

impl LocalPca {
    /// Rows of `phi` for the given columns, which must be observed.
    pub fn phi_rows(&self, cols: &FeatureSet) -> Mat<f64> {
        let pos: Vec<usize> = cols
            .iter()
            .map(|j| {
                self.features
                    .indices()
                    .binary_search(&j)
                    .expect("column observed by the group")
            })
            .collect();
        select_rows(self.phi.as_ref(), &pos)
    }
}

pub fn local_pca(x: &MaskedMatrix, g: usize, r: usize) -> Result<LocalPca> {
    let layout = x.layout();
    let features = layout.observed_features(g)?;
    let rows = &layout.groups[g];
    check_rank(r, || format!("group {} ({} subjects)", g + 1, rows.len()), rows.len())?;
    check_rank(
        r,
        || format!("group {} ({} observed features)", g + 1, features.len()),
        features.len(),
    )?;
    let sub = x.submatrix(rows, features.indices())?;
    let svd = svd_top_r(sub.as_ref(), r)?;
    let root = (rows.len() as f64).sqrt();
    let theta = Mat::from_fn(rows.len(), r, |i, j| root * svd.u[(i, j)]);
    let phi = Mat::from_fn(features.len(), r, |i, j| svd.v[(i, j)] * svd.s[j] / root);
    Ok(LocalPca {
        group: g,
        features,
        theta,
        phi,
    })
}

/// One edge of the alignment tree: `group` is mapped into the coordinates of
/// the already aligned `parent` through their shared columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignmentStep {
    pub group: usize,
    pub parent: usize,
    pub shared: FeatureSet,
}

/// Greedy spanning tree rooted at `reference`. Each step links the unaligned
/// group with the most columns in common with some aligned group; ties go to
/// the lowest group, then the lowest parent.
pub fn alignment_tree(layout: &BlockLayout, reference: usize) -> Result<Vec<AlignmentStep>> {
    let g_count = layout.num_groups();
    if reference >= g_count {
        return Err(Error::Domain(format!(
            "reference group {} out of range (G = {g_count})",
            reference + 1
        )));
    }
    let feats = (0..g_count)
        .map(|g| layout.observed_features(g))
        .collect::<Result<Vec<_>>>()?;
    let mut aligned = vec![false; g_count];
    aligned[reference] = true;
    let mut steps = Vec::with_capacity(g_count - 1);
    for _ in 1..g_count {
        let mut best: Option<(usize, usize, usize)> = None;
        for g in (0..g_count).filter(|&g| !aligned[g]) {
            for h in (0..g_count).filter(|&h| aligned[h]) {
                let s = feats[g].intersection(&feats[h]).len();
                if s > 0 && best.is_none_or(|(bs, _, _)| s > bs) {
                    best = Some((s, g, h));
                }
            }
        }
        let Some((_, g, h)) = best else {
            let missing: Vec<String> = (0..g_count)
                .filter(|&g| !aligned[g])
                .map(|g| (g + 1).to_string())
                .collect();
            return Err(Error::AlignmentInfeasible(format!(
                "groups {} share no features with the groups aligned to group {}",
                missing.join(", "),
                reference + 1
            )));
        };
        aligned[g] = true;
        steps.push(AlignmentStep {
            group: g,
            parent: h,
            shared: feats[g].intersection(&feats[h]),
        });
    }
    Ok(steps)
}

/// `Ŵ` with `Φ̂_parent[S] Ŵᵀ ≈ Φ̂_child[S]`, so `Θ̂_child Ŵ` lives in the
/// parent's coordinates.
pub fn pairwise_transform(parent: &LocalPca, child: &LocalPca, shared: &FeatureSet) -> Result<Mat<f64>> {
    let a = parent.phi_rows(shared);
    let b = child.phi_rows(shared);
    Ok(ls_transform(a.as_ref(), b.as_ref())?.transpose().to_owned())
}

/// Stacks the local embeddings in subject order after composing the tree's
/// transforms. `transforms[k]` belongs to `steps[k]`.
pub fn assemble_two_step(
    layout: &BlockLayout,
    locals: &[LocalPca],
    reference: usize,
    steps: &[AlignmentStep],
    transforms: &[Mat<f64>],
) -> Result<Embedding> {
    if transforms.len() != steps.len() || locals.len() != layout.num_groups() {
        return Err(Error::Domain("alignment steps, transforms and groups disagree".into()));
    }
    let r = locals[reference].theta.ncols();
    let mut to_ref: Vec<Option<Mat<f64>>> = vec![None; locals.len()];
    to_ref[reference] = Some(Mat::identity(r, r));
    for (step, w) in steps.iter().zip(transforms) {
        let parent = to_ref[step.parent]
            .as_ref()
            .ok_or_else(|| Error::Domain("alignment step precedes its parent".into()))?;
        to_ref[step.group] = Some(mul(w.as_ref(), parent.as_ref()));
    }
    let mut theta = Mat::zeros(layout.n, r);
    for (g, local) in locals.iter().enumerate() {
        let w = to_ref[g]
            .as_ref()
            .ok_or_else(|| Error::Domain(format!("group {} is not aligned", g + 1)))?;
        let aligned = mul(local.theta.as_ref(), w.as_ref());
        for (k, &i) in layout.groups[g].iter().enumerate() {
            for j in 0..r {
                theta[(i, j)] = aligned[(k, j)];
            }
        }
    }
    Ok(Embedding::new(theta, Method::TwoStep))
}

/// Per-group PCA, each group mapped into the reference group's coordinates
/// by least squares on shared feature embeddings.
pub fn two_step_fit(x: &MaskedMatrix, r: usize, reference: usize) -> Result<Embedding> {
    let layout = x.layout();
    let steps = alignment_tree(layout, reference)?;
    let locals = (0..layout.num_groups())
        .map(|g| local_pca(x, g, r))
        .collect::<Result<Vec<_>>>()?;
    let transforms = steps
        .iter()
        .map(|s| pairwise_transform(&locals[s.parent], &locals[s.group], &s.shared))
        .collect::<Result<Vec<_>>>()?;
    assemble_two_step(layout, &locals, reference, &steps, &transforms)
}
