//! Blockwise observation structure: subject groups, feature blocks and the
//! group-by-block indicator, plus the matrix type that binds data to a layout.
//!
//! Indices are zero-based in memory. The JSON file form uses one-based
//! indices for rows, columns and groups.

use std::collections::BTreeSet;
use std::fmt;

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A sorted, duplicate-free set of column indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct FeatureSet(Vec<usize>);

impl FeatureSet {
    pub fn new(indices: impl IntoIterator<Item = usize>) -> Self {
        let mut v: Vec<usize> = indices.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        FeatureSet(v)
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, j: usize) -> bool {
        self.0.binary_search(&j).is_ok()
    }

    pub fn intersection(&self, other: &FeatureSet) -> FeatureSet {
        FeatureSet(self.0.iter().copied().filter(|j| other.contains(*j)).collect())
    }

    pub fn union(&self, other: &FeatureSet) -> FeatureSet {
        FeatureSet::new(self.0.iter().chain(other.0.iter()).copied())
    }

    pub fn difference(&self, other: &FeatureSet) -> FeatureSet {
        FeatureSet(self.0.iter().copied().filter(|j| !other.contains(*j)).collect())
    }

    pub fn is_subset(&self, other: &FeatureSet) -> bool {
        self.0.iter().all(|j| other.contains(*j))
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }
}

impl From<Vec<usize>> for FeatureSet {
    fn from(v: Vec<usize>) -> Self {
        FeatureSet::new(v)
    }
}

/// Partition of subjects into groups and features into blocks, with the
/// G×B indicator of which group observes which block.
///
/// Fields are public so that malformed layouts can be built and inspected
/// with [`validate_layout`]; every estimator takes its layout through a
/// [`MaskedMatrix`], whose constructor rejects invalid layouts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockLayout {
    pub n: usize,
    pub p: usize,
    pub groups: Vec<Vec<usize>>,
    pub blocks: Vec<Vec<usize>>,
    pub indicator: Vec<Vec<bool>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Rows,
    Columns,
}

impl Axis {
    fn set_name(self) -> &'static str {
        match self {
            Axis::Rows => "group",
            Axis::Columns => "block",
        }
    }
}

/// One violated layout invariant. Displayed with one-based labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LayoutViolation {
    IndicatorShape {
        rows: usize,
        expected_rows: usize,
        bad_row: Option<usize>,
        expected_cols: usize,
    },
    IndexOutOfRange { axis: Axis, set: usize, index: usize, bound: usize },
    Overlapping { axis: Axis, index: usize, first: usize, second: usize },
    Uncovered { axis: Axis, index: usize },
    EmptySet { axis: Axis, set: usize },
    GroupObservesNothing { group: usize },
    OrphanBlock { block: usize },
}

impl fmt::Display for LayoutViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LayoutViolation::IndicatorShape {
                rows,
                expected_rows,
                bad_row,
                expected_cols,
            } => match bad_row {
                Some(g) => write!(
                    f,
                    "indicator shape: row {} does not have {expected_cols} entries",
                    g + 1
                ),
                None => write!(f, "indicator shape: {rows} rows, expected {expected_rows}"),
            },
            LayoutViolation::IndexOutOfRange {
                axis,
                set,
                index,
                bound,
            } => write!(
                f,
                "index out of range: {} {} contains index {} outside 1..={bound}",
                axis.set_name(),
                set + 1,
                index + 1
            ),
            LayoutViolation::Overlapping {
                axis,
                index,
                first,
                second,
            } => write!(
                f,
                "overlapping {}s: index {} belongs to {} {} and {} {}",
                axis.set_name(),
                index + 1,
                axis.set_name(),
                first + 1,
                axis.set_name(),
                second + 1
            ),
            LayoutViolation::Uncovered { axis, index } => {
                write!(f, "uncovered index: {} belongs to no {}", index + 1, axis.set_name())
            }
            LayoutViolation::EmptySet { axis, set } => {
                write!(f, "empty {}: {} {} has no members", axis.set_name(), axis.set_name(), set + 1)
            }
            LayoutViolation::GroupObservesNothing { group } => {
                write!(f, "unobserving group: group {} observes no block", group + 1)
            }
            LayoutViolation::OrphanBlock { block } => {
                write!(f, "orphan block: block {} is observed by no group", block + 1)
            }
        }
    }
}

fn check_partition(
    axis: Axis,
    sets: &[Vec<usize>],
    total: usize,
    out: &mut Vec<LayoutViolation>,
) {
    let mut owner: Vec<Option<usize>> = vec![None; total];
    for (s, members) in sets.iter().enumerate() {
        if members.is_empty() {
            out.push(LayoutViolation::EmptySet { axis, set: s });
        }
        for &i in members {
            if i >= total {
                out.push(LayoutViolation::IndexOutOfRange {
                    axis,
                    set: s,
                    index: i,
                    bound: total,
                });
                continue;
            }
            match owner[i] {
                Some(first) => out.push(LayoutViolation::Overlapping {
                    axis,
                    index: i,
                    first,
                    second: s,
                }),
                None => owner[i] = Some(s),
            }
        }
    }
    for (i, o) in owner.iter().enumerate() {
        if o.is_none() {
            out.push(LayoutViolation::Uncovered { axis, index: i });
        }
    }
}

/// Lists every violated layout invariant. An empty list means the layout is valid.
pub fn validate_layout(layout: &BlockLayout) -> Vec<LayoutViolation> {
    let mut out = Vec::new();
    check_partition(Axis::Rows, &layout.groups, layout.n, &mut out);
    check_partition(Axis::Columns, &layout.blocks, layout.p, &mut out);

    let g = layout.groups.len();
    let b = layout.blocks.len();
    if layout.indicator.len() != g {
        out.push(LayoutViolation::IndicatorShape {
            rows: layout.indicator.len(),
            expected_rows: g,
            bad_row: None,
            expected_cols: b,
        });
        return out;
    }
    let mut shape_ok = true;
    for (gi, row) in layout.indicator.iter().enumerate() {
        if row.len() != b {
            shape_ok = false;
            out.push(LayoutViolation::IndicatorShape {
                rows: g,
                expected_rows: g,
                bad_row: Some(gi),
                expected_cols: b,
            });
        }
    }
    if !shape_ok {
        return out;
    }
    for (gi, row) in layout.indicator.iter().enumerate() {
        if !row.iter().any(|&m| m) {
            out.push(LayoutViolation::GroupObservesNothing { group: gi });
        }
    }
    for bi in 0..b {
        if !layout.indicator.iter().any(|row| row[bi]) {
            out.push(LayoutViolation::OrphanBlock { block: bi });
        }
    }
    out
}

impl BlockLayout {
    /// Builds a layout and rejects it if any invariant is violated.
    /// Member lists are sorted.
    pub fn new(
        n: usize,
        p: usize,
        groups: Vec<Vec<usize>>,
        blocks: Vec<Vec<usize>>,
        indicator: Vec<Vec<bool>>,
    ) -> Result<Self> {
        let mut layout = BlockLayout {
            n,
            p,
            groups,
            blocks,
            indicator,
        };
        layout.groups.iter_mut().for_each(|s| s.sort_unstable());
        layout.blocks.iter_mut().for_each(|s| s.sort_unstable());
        layout.check()?;
        Ok(layout)
    }

    /// Layout with contiguous groups and blocks of the given sizes, in order.
    pub fn contiguous(
        group_sizes: &[usize],
        block_sizes: &[usize],
        indicator: Vec<Vec<bool>>,
    ) -> Result<Self> {
        fn ranges(sizes: &[usize]) -> Vec<Vec<usize>> {
            let mut start = 0;
            sizes
                .iter()
                .map(|&s| {
                    let r: Vec<usize> = (start..start + s).collect();
                    start += s;
                    r
                })
                .collect()
        }
        BlockLayout::new(
            group_sizes.iter().sum(),
            block_sizes.iter().sum(),
            ranges(group_sizes),
            ranges(block_sizes),
            indicator,
        )
    }

    /// Returns an error listing every violation, if any.
    pub fn check(&self) -> Result<()> {
        let v = validate_layout(self);
        if v.is_empty() {
            Ok(())
        } else {
            let msgs: Vec<String> = v.iter().map(|x| x.to_string()).collect();
            Err(Error::Domain(format!("invalid layout: {}", msgs.join("; "))))
        }
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn observes(&self, g: usize, b: usize) -> bool {
        self.indicator[g][b]
    }

    pub fn group_size(&self, g: usize) -> usize {
        self.groups[g].len()
    }

    /// V_(g): union of the blocks observed by group `g`.
    pub fn observed_features(&self, g: usize) -> Result<FeatureSet> {
        if g >= self.groups.len() {
            return Err(Error::Domain(format!(
                "group index {g} out of range for {} groups",
                self.groups.len()
            )));
        }
        Ok(FeatureSet::new(
            self.indicator[g]
                .iter()
                .enumerate()
                .filter(|(_, &m)| m)
                .flat_map(|(b, _)| self.blocks[b].iter().copied()),
        ))
    }

    /// Features observed by every group in `groups`. Empty when `groups` is empty.
    pub fn common_features(&self, groups: &[usize]) -> Result<FeatureSet> {
        let mut iter = groups.iter();
        let Some(&first) = iter.next() else {
            return Ok(FeatureSet::default());
        };
        let mut acc = self.observed_features(first)?;
        for &g in iter {
            acc = acc.intersection(&self.observed_features(g)?);
        }
        Ok(acc)
    }

    /// T: the features observed by every group. May be empty.
    pub fn shared_feature_set(&self) -> FeatureSet {
        let all: Vec<usize> = (0..self.groups.len()).collect();
        self.common_features(&all).unwrap_or_default()
    }

    /// Sorted subject indices of the union of `groups`.
    pub fn subjects_of(&self, groups: &[usize]) -> Vec<usize> {
        let mut rows: Vec<usize> = groups
            .iter()
            .flat_map(|&g| self.groups[g].iter().copied())
            .collect();
        rows.sort_unstable();
        rows.dedup();
        rows
    }

    /// Group index of each subject. Assumes a valid layout.
    pub fn row_groups(&self) -> Vec<usize> {
        let mut out = vec![usize::MAX; self.n];
        for (g, rows) in self.groups.iter().enumerate() {
            for &i in rows {
                out[i] = g;
            }
        }
        out
    }

    /// Block index of each feature. Assumes a valid layout.
    pub fn col_blocks(&self) -> Vec<usize> {
        let mut out = vec![usize::MAX; self.p];
        for (b, cols) in self.blocks.iter().enumerate() {
            for &j in cols {
                out[j] = b;
            }
        }
        out
    }

    /// True when every group observes every block.
    pub fn is_fully_observed(&self) -> bool {
        self.indicator.iter().all(|row| row.iter().all(|&m| m))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: LayoutFile = serde_json::from_str(text)?;
        let layout = file.into_layout()?;
        layout.check()?;
        Ok(layout)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&LayoutFile::from(self))?)
    }
}

/// On-disk layout schema. Member indices are one-based; the indicator is 0/1.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayoutFile {
    pub n: usize,
    pub p: usize,
    pub groups: Vec<Vec<usize>>,
    pub blocks: Vec<Vec<usize>>,
    pub indicator: Vec<Vec<u8>>,
}

impl LayoutFile {
    /// Converts to an in-memory layout without validating the partition
    /// structure, so that [`validate_layout`] can report on it.
    pub fn into_layout(self) -> Result<BlockLayout> {
        fn zero_based(sets: Vec<Vec<usize>>, what: &str) -> Result<Vec<Vec<usize>>> {
            sets.into_iter()
                .map(|s| {
                    s.into_iter()
                        .map(|i| {
                            i.checked_sub(1).ok_or_else(|| {
                                Error::Data(format!("{what} indices are one-based; found 0"))
                            })
                        })
                        .collect()
                })
                .collect()
        }
        let indicator = self
            .indicator
            .into_iter()
            .map(|row| {
                row.into_iter()
                    .map(|v| match v {
                        0 => Ok(false),
                        1 => Ok(true),
                        other => Err(Error::Data(format!("indicator entry {other} is not 0 or 1"))),
                    })
                    .collect()
            })
            .collect::<Result<Vec<Vec<bool>>>>()?;
        let mut layout = BlockLayout {
            n: self.n,
            p: self.p,
            groups: zero_based(self.groups, "group")?,
            blocks: zero_based(self.blocks, "block")?,
            indicator,
        };
        layout.groups.iter_mut().for_each(|s| s.sort_unstable());
        layout.blocks.iter_mut().for_each(|s| s.sort_unstable());
        Ok(layout)
    }
}

impl From<&BlockLayout> for LayoutFile {
    fn from(l: &BlockLayout) -> Self {
        let one_based =
            |sets: &[Vec<usize>]| sets.iter().map(|s| s.iter().map(|i| i + 1).collect()).collect();
        LayoutFile {
            n: l.n,
            p: l.p,
            groups: one_based(&l.groups),
            blocks: one_based(&l.blocks),
            indicator: l
                .indicator
                .iter()
                .map(|row| row.iter().map(|&m| m as u8).collect())
                .collect(),
        }
    }
}

/// A dense n×p matrix bound to a [`BlockLayout`]. Cells in unobserved
/// (group, block) pairs hold arbitrary values (NaN by convention) and are
/// never read by any estimator.
#[derive(Debug, Clone)]
pub struct MaskedMatrix {
    values: Mat<f64>,
    layout: BlockLayout,
    row_group: Vec<usize>,
    col_block: Vec<usize>,
}

impl MaskedMatrix {
    /// Binds `values` to `layout`. Observed cells must be finite.
    pub fn new(values: Mat<f64>, layout: BlockLayout) -> Result<Self> {
        layout.check()?;
        if values.nrows() != layout.n || values.ncols() != layout.p {
            return Err(Error::Domain(format!(
                "matrix is {}x{}, layout expects {}x{}",
                values.nrows(),
                values.ncols(),
                layout.n,
                layout.p
            )));
        }
        let row_group = layout.row_groups();
        let col_block = layout.col_blocks();
        for (g, rows) in layout.groups.iter().enumerate() {
            for (b, cols) in layout.blocks.iter().enumerate() {
                if !layout.indicator[g][b] {
                    continue;
                }
                for &j in cols {
                    for &i in rows {
                        if !values[(i, j)].is_finite() {
                            return Err(Error::Data(format!(
                                "non-finite value in observed cell (row {}, column {})",
                                i + 1,
                                j + 1
                            )));
                        }
                    }
                }
            }
        }
        Ok(MaskedMatrix {
            values,
            layout,
            row_group,
            col_block,
        })
    }

    /// Copies the observed blocks of a complete matrix and fills the rest with NaN.
    pub fn from_complete(full: &Mat<f64>, layout: BlockLayout) -> Result<Self> {
        layout.check()?;
        let row_group = layout.row_groups();
        let col_block = layout.col_blocks();
        if full.nrows() != layout.n || full.ncols() != layout.p {
            return Err(Error::Domain(format!(
                "matrix is {}x{}, layout expects {}x{}",
                full.nrows(),
                full.ncols(),
                layout.n,
                layout.p
            )));
        }
        let values = Mat::from_fn(layout.n, layout.p, |i, j| {
            if layout.indicator[row_group[i]][col_block[j]] {
                full[(i, j)]
            } else {
                f64::NAN
            }
        });
        MaskedMatrix::new(values, layout)
    }

    pub fn layout(&self) -> &BlockLayout {
        &self.layout
    }

    pub fn nrows(&self) -> usize {
        self.layout.n
    }

    pub fn ncols(&self) -> usize {
        self.layout.p
    }

    pub fn is_observed(&self, i: usize, j: usize) -> bool {
        self.layout.indicator[self.row_group[i]][self.col_block[j]]
    }

    /// Raw storage, including whatever the unobserved cells hold.
    pub fn raw_values(&self) -> &Mat<f64> {
        &self.values
    }

    /// Mutable raw storage. Intended for tests that perturb unobserved cells.
    pub fn raw_values_mut(&mut self) -> &mut Mat<f64> {
        &mut self.values
    }

    /// Gathers `X[rows, cols]`. Every selected cell must be observed.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Result<Mat<f64>> {
        let groups: BTreeSet<usize> = rows
            .iter()
            .map(|&i| {
                self.row_group
                    .get(i)
                    .copied()
                    .ok_or_else(|| Error::Domain(format!("row {i} out of range")))
            })
            .collect::<Result<_>>()?;
        let blocks: BTreeSet<usize> = cols
            .iter()
            .map(|&j| {
                self.col_block
                    .get(j)
                    .copied()
                    .ok_or_else(|| Error::Domain(format!("column {j} out of range")))
            })
            .collect::<Result<_>>()?;
        for &g in &groups {
            for &b in &blocks {
                if !self.layout.indicator[g][b] {
                    return Err(Error::Domain(format!(
                        "selection touches unobserved block (group {}, block {})",
                        g + 1,
                        b + 1
                    )));
                }
            }
        }
        Ok(Mat::from_fn(rows.len(), cols.len(), |a, c| {
            self.values[(rows[a], cols[c])]
        }))
    }

    /// The complete matrix, when every block is observed.
    pub fn full(&self) -> Result<Mat<f64>> {
        if !self.layout.is_fully_observed() {
            return Err(Error::Domain("matrix has unobserved blocks".into()));
        }
        Ok(self.values.clone())
    }

    /// The largest fully observed submatrix for group `g`: `X[U_g, V_(g)]`.
    pub fn group_observed(&self, g: usize) -> Result<Mat<f64>> {
        let cols = self.layout.observed_features(g)?;
        self.submatrix(&self.layout.groups[g], cols.indices())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn two_by_three(n: usize, p: usize) -> BlockLayout {
        BlockLayout::contiguous(
            &[n, n],
            &[p, p, p],
            vec![vec![true, true, false], vec![true, false, true]],
        )
        .unwrap()
    }

    fn cyclic(n: usize, p: usize) -> BlockLayout {
        BlockLayout::contiguous(
            &[n, n, n],
            &[p, p, p],
            vec![
                vec![true, true, false],
                vec![false, true, true],
                vec![true, false, true],
            ],
        )
        .unwrap()
    }

    #[test]
    fn observed_features_two_by_three() {
        let l = two_by_three(3, 2);
        assert_eq!(l.observed_features(0).unwrap().indices(), &[0, 1, 2, 3]);
        assert_eq!(l.observed_features(1).unwrap().indices(), &[0, 1, 4, 5]);
        assert!(matches!(l.observed_features(2), Err(Error::Domain(_))));
    }

    #[test]
    fn observed_features_single_group() {
        let l = BlockLayout::contiguous(&[4], &[2, 3], vec![vec![true, true]]).unwrap();
        assert_eq!(l.observed_features(0).unwrap().indices(), &[0, 1, 2, 3, 4]);
        assert_eq!(l.shared_feature_set(), l.observed_features(0).unwrap());
    }

    #[test]
    fn cyclic_second_group_and_empty_anchor() {
        let l = cyclic(2, 2);
        // group 2 (index 1) observes blocks 2 and 3
        assert_eq!(l.observed_features(1).unwrap().indices(), &[2, 3, 4, 5]);
        assert!(l.shared_feature_set().is_empty());
    }

    #[test]
    fn shared_set_two_by_three_is_first_block() {
        let l = two_by_three(3, 2);
        assert_eq!(l.shared_feature_set().indices(), &[0, 1]);
    }

    #[test]
    fn non_contiguous_sets() {
        let l = BlockLayout::new(
            4,
            4,
            vec![vec![3, 0], vec![1, 2]],
            vec![vec![0, 2], vec![1, 3]],
            vec![vec![true, true], vec![true, false]],
        )
        .unwrap();
        assert_eq!(l.groups[0], vec![0, 3]);
        assert_eq!(l.shared_feature_set().indices(), &[0, 2]);
        assert_eq!(l.row_groups(), vec![0, 1, 1, 0]);
    }

    #[test]
    fn validate_reports_violations() {
        let good = two_by_three(2, 2);
        assert!(validate_layout(&good).is_empty());

        let mut overlapping = good.clone();
        overlapping.groups[1][0] = 0;
        let v = validate_layout(&overlapping);
        assert_eq!(
            v.iter()
                .filter(|x| matches!(x, LayoutViolation::Overlapping { axis: Axis::Rows, .. }))
                .count(),
            1
        );
        assert!(v[0].to_string().starts_with("overlapping groups"));

        let mut orphan = good.clone();
        orphan.indicator[1][2] = false;
        let v = validate_layout(&orphan);
        assert_eq!(v, vec![LayoutViolation::OrphanBlock { block: 2 }]);

        let mut blind = good.clone();
        blind.indicator[0] = vec![false, false, false];
        assert!(validate_layout(&blind)
            .iter()
            .any(|x| matches!(x, LayoutViolation::GroupObservesNothing { group: 0 })));

        let mut short = good;
        short.indicator[0].pop();
        assert!(matches!(
            validate_layout(&short)[0],
            LayoutViolation::IndicatorShape { bad_row: Some(0), .. }
        ));
    }

    #[test]
    fn json_round_trip_is_one_based() {
        let l = two_by_three(2, 1);
        let text = l.to_json().unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["groups"][0], serde_json::json!([1, 2]));
        assert_eq!(v["indicator"][1], serde_json::json!([1, 0, 1]));
        assert_eq!(BlockLayout::from_json(&text).unwrap(), l);

        let bad = r#"{"n":1,"p":1,"groups":[[0]],"blocks":[[1]],"indicator":[[1]]}"#;
        assert!(matches!(BlockLayout::from_json(bad), Err(Error::Data(_))));
    }

    #[test]
    fn masked_matrix_guards_selection() {
        let l = two_by_three(2, 1);
        let full = Mat::from_fn(4, 3, |i, j| (i * 3 + j) as f64);
        let x = MaskedMatrix::from_complete(&full, l).unwrap();
        assert!(x.raw_values()[(0, 2)].is_nan());
        assert!(x.is_observed(0, 1) && !x.is_observed(0, 2));
        let sub = x.group_observed(1).unwrap();
        assert_eq!((sub.nrows(), sub.ncols()), (2, 2));
        assert_eq!(sub[(0, 1)], full[(2, 2)]);
        assert!(x.submatrix(&[0], &[2]).is_err());
        assert!(x.full().is_err());
    }

    #[test]
    fn masked_matrix_rejects_non_finite_observed() {
        let l = two_by_three(1, 1);
        let mut v = Mat::zeros(2, 3);
        v[(0, 2)] = f64::NAN; // masked: fine
        assert!(MaskedMatrix::new(v.clone(), l.clone()).is_ok());
        v[(0, 0)] = f64::INFINITY;
        assert!(matches!(MaskedMatrix::new(v, l), Err(Error::Data(_))));
    }

    use proptest::prelude::*;

    proptest! {
        #[test]
        fn shared_set_is_subset_of_every_group(
            ind in proptest::collection::vec(proptest::collection::vec(any::<bool>(), 4), 1..5)
        ) {
            let g = ind.len();
            let mut ind = ind;
            for (k, row) in ind.iter_mut().enumerate() {
                row[k % 4] = true;
            }
            for b in 0..4 {
                if !ind.iter().any(|r| r[b]) { ind[0][b] = true; }
            }
            let l = BlockLayout::contiguous(&vec![2; g], &[1, 2, 3, 1], ind).unwrap();
            let t = l.shared_feature_set();
            for gi in 0..g {
                let v = l.observed_features(gi).unwrap();
                prop_assert!(t.is_subset(&v));
                prop_assert!(t.len() <= v.len());
            }
            prop_assert_eq!(t, l.shared_feature_set());
        }
    }
}
