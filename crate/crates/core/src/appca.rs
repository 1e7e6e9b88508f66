//! Anchor projected PCA for layouts in which some feature set is observed by
//! every group.
//!
//! Stage 1 estimates an r-dimensional column space per group from everything
//! that group observes. Stage 2 projects the shared anchor columns of each
//! group onto its estimated space, stacks the projected blocks, and takes the
//! leading left singular vectors of the stack.
//!
//! The stacked matrix equals `L · C` where `L` is block diagonal in the
//! group bases and `C` holds the per-group coefficients `Ûᵍᵀ X[U_g, T]`.
//! The fit decomposes that factorisation instead of the dense n×|T| stack;
//! [`projected_anchor_matrix`] materialises the stack when it is needed.

use faer::Mat;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::embedding::{Embedding, Method};
use crate::error::{Error, Result};
use crate::layout::{FeatureSet, MaskedMatrix};
use crate::linalg::{factored_left_vectors, mul, svd_top_r, tmul};

/// Per-group orthonormal bases `Û⁽ᵍ⁾` (|U_g|×r), indexed by group.
#[derive(Debug, Clone)]
pub struct GroupSubspaces {
    pub bases: Vec<Mat<f64>>,
}

pub(crate) fn check_rank(rank: usize, what: impl FnOnce() -> String, available: usize) -> Result<()> {
    if available < rank {
        return Err(Error::RankFeasibility {
            rank,
            what: what(),
            available,
        });
    }
    Ok(())
}

/// Top-r left singular vectors of `X[U_g, cols]`.
fn group_basis(x: &MaskedMatrix, g: usize, cols: &FeatureSet, r: usize) -> Result<Mat<f64>> {
    let rows = &x.layout().groups[g];
    check_rank(r, || format!("group {} ({} subjects)", g + 1, rows.len()), rows.len())?;
    check_rank(
        r,
        || format!("group {} ({} observed features)", g + 1, cols.len()),
        cols.len(),
    )?;
    let sub = x.submatrix(rows, cols.indices())?;
    Ok(svd_top_r(sub.as_ref(), r)?.u)
}

/// Stage 1 for every group: `Û⁽ᵍ⁾ = SVD_r(X[U_g, V_(g)])`.
pub fn groupwise_subspaces(x: &MaskedMatrix, r: usize) -> Result<GroupSubspaces> {
    let layout = x.layout();
    let bases = (0..layout.num_groups())
        .map(|g| group_basis(x, g, &layout.observed_features(g)?, r))
        .collect::<Result<Vec<_>>>()?;
    Ok(GroupSubspaces { bases })
}

/// One projected anchor block: a group's basis and its coefficients on a set
/// of anchor columns.
struct ProjectedBlock<'a> {
    group: usize,
    basis: &'a Mat<f64>,
    coef: Mat<f64>,
    col_offset: usize,
}

/// Leading left singular vectors of the stacked projected anchor blocks,
/// rows indexed by `rows` (sorted subject indices).
fn top_left_of_blocks(
    x: &MaskedMatrix,
    rows: &[usize],
    blocks: &[ProjectedBlock<'_>],
    total_cols: usize,
    r: usize,
) -> Result<Mat<f64>> {
    let layout = x.layout();
    let mut pos = vec![usize::MAX; layout.n];
    for (k, &i) in rows.iter().enumerate() {
        pos[i] = k;
    }
    let width: usize = blocks.iter().map(|b| b.basis.ncols()).sum();
    if width <= rows.len() {
        let mut left = Mat::zeros(rows.len(), width);
        let mut right = Mat::zeros(width, total_cols);
        let mut off = 0;
        for b in blocks {
            let k = b.basis.ncols();
            for (local, &i) in layout.groups[b.group].iter().enumerate() {
                for c in 0..k {
                    left[(pos[i], off + c)] = b.basis[(local, c)];
                }
            }
            for c in 0..k {
                for j in 0..b.coef.ncols() {
                    right[(off + c, b.col_offset + j)] = b.coef[(c, j)];
                }
            }
            off += k;
        }
        Ok(factored_left_vectors(left.as_ref(), right.as_ref(), r)?.u)
    } else {
        let dense = materialize(x, rows, blocks, total_cols);
        Ok(svd_top_r(dense.as_ref(), r)?.u)
    }
}

fn materialize(
    x: &MaskedMatrix,
    rows: &[usize],
    blocks: &[ProjectedBlock<'_>],
    total_cols: usize,
) -> Mat<f64> {
    let layout = x.layout();
    let mut pos = vec![usize::MAX; layout.n];
    for (k, &i) in rows.iter().enumerate() {
        pos[i] = k;
    }
    let mut out = Mat::zeros(rows.len(), total_cols);
    for b in blocks {
        let proj = mul(b.basis.as_ref(), b.coef.as_ref());
        for (local, &i) in layout.groups[b.group].iter().enumerate() {
            for j in 0..proj.ncols() {
                out[(pos[i], b.col_offset + j)] = proj[(local, j)];
            }
        }
    }
    out
}

fn anchor_for(x: &MaskedMatrix, groups: &[usize], r: usize) -> Result<FeatureSet> {
    let t = x.layout().common_features(groups)?;
    if t.is_empty() {
        return Err(Error::NoSharedAnchor);
    }
    check_rank(r, || format!("shared anchor set ({} features)", t.len()), t.len())?;
    Ok(t)
}

/// Runs both stages on the subjects of `groups`. Returns the sorted subject
/// indices and the orthonormal n_S×r basis `Û` with rows in that order.
pub(crate) fn appca_basis(
    x: &MaskedMatrix,
    groups: &[usize],
    r: usize,
) -> Result<(Vec<usize>, Mat<f64>)> {
    let layout = x.layout();
    let t = anchor_for(x, groups, r)?;
    let bases = groups
        .iter()
        .map(|&g| group_basis(x, g, &layout.observed_features(g)?, r))
        .collect::<Result<Vec<_>>>()?;
    let blocks = groups
        .iter()
        .zip(&bases)
        .map(|(&g, basis)| {
            let anchor = x.submatrix(&layout.groups[g], t.indices())?;
            Ok(ProjectedBlock {
                group: g,
                basis,
                coef: tmul(basis.as_ref(), anchor.as_ref()),
                col_offset: 0,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let rows = layout.subjects_of(groups);
    let u = top_left_of_blocks(x, &rows, &blocks, t.len(), r)?;
    Ok((rows, u))
}

/// Anchor projected PCA over all groups. Requires a nonempty shared feature
/// set with at least `r` columns.
pub fn appca_fit(x: &MaskedMatrix, r: usize) -> Result<Embedding> {
    let groups: Vec<usize> = (0..x.layout().num_groups()).collect();
    let (_, u) = appca_basis(x, &groups, r)?;
    Ok(Embedding::from_basis(u.as_ref(), Method::Appca))
}

/// The stacked projected anchor matrix `X̃` (n×|T|, subject order).
pub fn projected_anchor_matrix(x: &MaskedMatrix, r: usize) -> Result<Mat<f64>> {
    let layout = x.layout();
    let groups: Vec<usize> = (0..layout.num_groups()).collect();
    let t = anchor_for(x, &groups, r)?;
    let subspaces = groupwise_subspaces(x, r)?;
    let blocks = groups
        .iter()
        .map(|&g| {
            let basis = &subspaces.bases[g];
            let anchor = x.submatrix(&layout.groups[g], t.indices())?;
            Ok(ProjectedBlock {
                group: g,
                basis,
                coef: tmul(basis.as_ref(), anchor.as_ref()),
                col_offset: 0,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<usize> = (0..layout.n).collect();
    Ok(materialize(x, &rows, &blocks, t.len()))
}

/// Seeded split of the anchor columns into two sorted halves.
pub fn split_anchor(t: &FeatureSet, seed: u64) -> (FeatureSet, FeatureSet) {
    let mut cols: Vec<usize> = t.indices().to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    cols.shuffle(&mut rng);
    let half = cols.len() / 2;
    (
        FeatureSet::new(cols[..half].iter().copied()),
        FeatureSet::new(cols[half..].iter().copied()),
    )
}

/// Cross-fitted anchor projected PCA.
///
/// The anchor columns are split into halves `T_a`, `T_b`. Group subspaces
/// fitted on `(V_(g) \ T) ∪ T_a` project `X[U_g, T_b]`, and symmetrically,
/// so no projector ever sees the anchor columns it is applied to. The two
/// projected halves are placed side by side (`T_b` columns first) and the
/// leading left singular vectors of the result are returned, scaled by `√n`.
pub fn appca_crossfit(x: &MaskedMatrix, r: usize, seed: u64) -> Result<Embedding> {
    let layout = x.layout();
    let groups: Vec<usize> = (0..layout.num_groups()).collect();
    let t = layout.shared_feature_set();
    if t.is_empty() {
        return Err(Error::NoSharedAnchor);
    }
    if t.len() < 2 * r {
        return Err(Error::FoldFeasibility {
            needed: 2 * r,
            available: t.len(),
        });
    }
    let (t_a, t_b) = split_anchor(&t, seed);

    let fold_bases = |fit_half: &FeatureSet| -> Result<Vec<Mat<f64>>> {
        groups
            .iter()
            .map(|&g| {
                let cols = layout.observed_features(g)?.difference(&t).union(fit_half);
                group_basis(x, g, &cols, r)
            })
            .collect()
    };
    let bases_a = fold_bases(&t_a)?;
    let bases_b = fold_bases(&t_b)?;

    let mut blocks = Vec::with_capacity(2 * groups.len());
    for (bases, target, offset) in [(&bases_a, &t_b, 0), (&bases_b, &t_a, t_b.len())] {
        for &g in &groups {
            let basis = &bases[g];
            let anchor = x.submatrix(&layout.groups[g], target.indices())?;
            blocks.push(ProjectedBlock {
                group: g,
                basis,
                coef: tmul(basis.as_ref(), anchor.as_ref()),
                col_offset: offset,
            });
        }
    }
    let rows: Vec<usize> = (0..layout.n).collect();
    let u = top_left_of_blocks(x, &rows, &blocks, t.len(), r)?;
    Ok(Embedding::from_basis(u.as_ref(), Method::AppcaCrossfit))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::BlockLayout;
    use crate::linalg::{frobenius, orthonormality_defect, select_rows, sub, svd_top_r_with, SvdMethod};
    use crate::testutil::{low_rank_instance, projector_distance, random};

    fn residual_outside(basis: &Mat<f64>, theta: &Mat<f64>) -> f64 {
        let proj = mul(basis.as_ref(), tmul(basis.as_ref(), theta.as_ref()).as_ref());
        frobenius(sub(theta.as_ref(), proj.as_ref()).as_ref())
    }

    #[test]
    fn noise_free_group_subspaces_contain_truth() {
        let (x, theta) = low_rank_instance(&[20, 25], &[10, 8, 9], &[[1, 1, 0], [1, 0, 1]], 3, 0.0, 1);
        let s = groupwise_subspaces(&x, 3).unwrap();
        for (g, basis) in s.bases.iter().enumerate() {
            assert!(orthonormality_defect(basis.as_ref()) <= 1e-10);
            let tg = select_rows(theta.as_ref(), &x.layout().groups[g]);
            assert!(residual_outside(basis, &tg) <= 1e-8 * frobenius(theta.as_ref()));
        }
    }

    #[test]
    fn single_block_rank_one_matches_direct_svd() {
        let layout = BlockLayout::contiguous(&[7], &[5], vec![vec![true]]).unwrap();
        let full = random(7, 5, 3);
        let x = MaskedMatrix::from_complete(&full, layout).unwrap();
        let s = groupwise_subspaces(&x, 1).unwrap();
        let oracle = svd_top_r_with(full.as_ref(), 1, SvdMethod::Dense).unwrap();
        assert!(projector_distance(&s.bases[0], &oracle.u) <= 1e-12);
    }

    #[test]
    fn masked_cells_do_not_matter() {
        let (mut x, _) = low_rank_instance(&[12, 12], &[6, 6, 6], &[[1, 1, 0], [1, 0, 1]], 2, 0.5, 4);
        let before = groupwise_subspaces(&x, 2).unwrap();
        let fit_before = appca_fit(&x, 2).unwrap();
        let noise = random(24, 18, 77);
        for i in 0..24 {
            for j in 0..18 {
                if !x.is_observed(i, j) {
                    x.raw_values_mut()[(i, j)] = 1e6 * noise[(i, j)];
                }
            }
        }
        let after = groupwise_subspaces(&x, 2).unwrap();
        assert_eq!(before.bases[0], after.bases[0]);
        assert_eq!(before.bases[1], after.bases[1]);
        assert_eq!(fit_before.theta_hat, appca_fit(&x, 2).unwrap().theta_hat);
    }

    #[test]
    fn rank_feasibility_names_group() {
        let (x, _) = low_rank_instance(&[2, 10], &[6, 6, 6], &[[1, 1, 0], [1, 0, 1]], 3, 1.0, 5);
        match groupwise_subspaces(&x, 3) {
            Err(Error::RankFeasibility { what, .. }) => assert!(what.contains("group 1")),
            other => panic!("expected rank error, got {other:?}"),
        }
    }

    #[test]
    fn anchor_errors() {
        let (x, _) = low_rank_instance(
            &[10, 10, 10],
            &[6, 6, 6],
            &[[1, 1, 0], [0, 1, 1], [1, 0, 1]],
            2,
            1.0,
            6,
        );
        assert!(matches!(appca_fit(&x, 2), Err(Error::NoSharedAnchor)));
        let (x, _) = low_rank_instance(&[10, 10], &[2, 6, 6], &[[1, 1, 0], [1, 0, 1]], 3, 1.0, 6);
        assert!(matches!(appca_fit(&x, 3), Err(Error::RankFeasibility { .. })));
        let (x, _) = low_rank_instance(&[10, 10], &[5, 6, 6], &[[1, 1, 0], [1, 0, 1]], 3, 1.0, 6);
        assert!(matches!(
            appca_crossfit(&x, 3, 0),
            Err(Error::FoldFeasibility { needed: 6, available: 5 })
        ));
    }

    #[test]
    fn noise_free_exact_recovery() {
        let (x, theta) = low_rank_instance(&[30, 30], &[15, 15, 15], &[[1, 1, 0], [1, 0, 1]], 4, 0.0, 8);
        for e in [appca_fit(&x, 4).unwrap(), appca_crossfit(&x, 4, 3).unwrap()] {
            assert!(e.scaled_orthonormality_defect() <= 1e-8);
            let u = crate::linalg::scaled(e.theta_hat.as_ref(), 1.0 / (60f64).sqrt());
            assert!(residual_outside(&u, &theta) <= 1e-6 * frobenius(theta.as_ref()));
        }
    }

    #[test]
    fn single_group_collapses_to_pca() {
        let layout = BlockLayout::contiguous(&[40], &[10, 12], vec![vec![true, true]]).unwrap();
        let full = random(40, 22, 9);
        let x = MaskedMatrix::from_complete(&full, layout).unwrap();
        let e = appca_fit(&x, 3).unwrap();
        let oracle = svd_top_r_with(full.as_ref(), 3, SvdMethod::Dense).unwrap();
        let u = crate::linalg::scaled(e.theta_hat.as_ref(), 1.0 / (40f64).sqrt());
        assert!(projector_distance(&u, &oracle.u) <= 1e-8);
    }

    #[test]
    fn stacked_matrix_rank_and_factored_agreement() {
        let (x, _) = low_rank_instance(&[25, 30], &[20, 10, 12], &[[1, 1, 0], [1, 0, 1]], 3, 1.0, 10);
        let stack = projected_anchor_matrix(&x, 3).unwrap();
        let sv = svd_top_r_with(stack.as_ref(), 7, SvdMethod::Dense).unwrap();
        assert!(sv.s[6] <= 1e-8 * sv.s[0]);
        let dense_u = svd_top_r_with(stack.as_ref(), 3, SvdMethod::Dense).unwrap().u;
        let fit = appca_fit(&x, 3).unwrap();
        let u = crate::linalg::scaled(fit.theta_hat.as_ref(), 1.0 / (55f64).sqrt());
        assert!(projector_distance(&u, &dense_u) <= 1e-10);
    }

    #[test]
    fn scale_invariance() {
        let (x, _) = low_rank_instance(&[20, 20], &[10, 10, 10], &[[1, 1, 0], [1, 0, 1]], 3, 1.0, 11);
        let a = appca_fit(&x, 3).unwrap();
        let scaled_values = crate::linalg::scaled(x.raw_values().as_ref(), 7.5);
        let y = MaskedMatrix::new(scaled_values, x.layout().clone()).unwrap();
        let b = appca_fit(&y, 3).unwrap();
        for i in 0..40 {
            for j in 0..3 {
                assert!((a.theta_hat[(i, j)] - b.theta_hat[(i, j)]).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn group_order_invariance() {
        let (x, _) = low_rank_instance(&[15, 18], &[10, 10, 10], &[[1, 1, 0], [1, 0, 1]], 3, 1.0, 12);
        let a = appca_fit(&x, 3).unwrap();
        let l = x.layout();
        let swapped = BlockLayout::new(
            l.n,
            l.p,
            vec![l.groups[1].clone(), l.groups[0].clone()],
            l.blocks.clone(),
            vec![l.indicator[1].clone(), l.indicator[0].clone()],
        )
        .unwrap();
        let y = MaskedMatrix::new(x.raw_values().clone(), swapped).unwrap();
        let b = appca_fit(&y, 3).unwrap();
        let ua = crate::linalg::scaled(a.theta_hat.as_ref(), 1.0 / (33f64).sqrt());
        let ub = crate::linalg::scaled(b.theta_hat.as_ref(), 1.0 / (33f64).sqrt());
        assert!(projector_distance(&ua, &ub) <= 1e-6);
    }

    #[test]
    fn crossfit_is_deterministic_per_seed() {
        let (x, _) = low_rank_instance(&[20, 20], &[16, 10, 10], &[[1, 1, 0], [1, 0, 1]], 3, 1.0, 13);
        let a = appca_crossfit(&x, 3, 42).unwrap();
        let b = appca_crossfit(&x, 3, 42).unwrap();
        assert_eq!(a.theta_hat, b.theta_hat);
        let t = x.layout().shared_feature_set();
        let (ta, tb) = split_anchor(&t, 42);
        assert_eq!(ta.len() + tb.len(), t.len());
        assert!(ta.intersection(&tb).is_empty());
        assert_eq!(split_anchor(&t, 42), (ta, tb));
    }
}
