//! Chain linking over super-groups for layouts without a globally shared
//! feature set.
//!
//! Each super-group has its own inner anchor and is fitted with anchor
//! projected PCA. Consecutive super-groups share subjects (outer anchors);
//! the new super-group's basis is mapped onto the running estimate by least
//! squares on those shared rows, and only its new subjects are appended.

use std::fmt;

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::appca::appca_basis;
use crate::embedding::{Embedding, Method};
use crate::error::{Error, Result};
use crate::layout::BlockLayout;
use crate::linalg::{ls_transform, mul, orthonormal_basis, select_rows};

/// Ordered super-groups, each a list of zero-based group indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainPlan {
    pub supergroups: Vec<Vec<usize>>,
}

/// `{"supergroups": [[group, ...], ...]}` with one-based group labels.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainPlanFile {
    pub supergroups: Vec<Vec<usize>>,
}

impl ChainPlan {
    pub fn new(supergroups: Vec<Vec<usize>>) -> Self {
        ChainPlan { supergroups }
    }

    pub fn len(&self) -> usize {
        self.supergroups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.supergroups.is_empty()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ChainPlanFile = serde_json::from_str(text)?;
        let supergroups = file
            .supergroups
            .into_iter()
            .map(|s| {
                s.into_iter()
                    .map(|g| {
                        g.checked_sub(1).ok_or_else(|| {
                            Error::Data("chain plan group labels are one-based; found 0".into())
                        })
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        Ok(ChainPlan { supergroups })
    }

    pub fn to_file(&self) -> ChainPlanFile {
        ChainPlanFile {
            supergroups: self
                .supergroups
                .iter()
                .map(|s| s.iter().map(|g| g + 1).collect())
                .collect(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.to_file())?)
    }
}

/// A violated chain condition. Steps and groups display one-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ChainViolation {
    EmptyPlan,
    UnknownGroup { step: usize, group: usize },
    EmptySupergroup { step: usize },
    Anchoring { step: usize },
    SequentialOverlap { step: usize },
    Coverage { missing_groups: Vec<usize> },
}

impl fmt::Display for ChainViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChainViolation::EmptyPlan => write!(f, "plan has no super-groups"),
            ChainViolation::UnknownGroup { step, group } => {
                write!(f, "super-group {}: unknown group {}", step + 1, group + 1)
            }
            ChainViolation::EmptySupergroup { step } => {
                write!(f, "super-group {}: empty", step + 1)
            }
            ChainViolation::Anchoring { step } => write!(
                f,
                "super-group anchoring violated at k={}: no feature observed by all its groups",
                step + 1
            ),
            ChainViolation::SequentialOverlap { step } => write!(
                f,
                "sequential overlap violated at k={}: no subjects shared with earlier super-groups",
                step + 1
            ),
            ChainViolation::Coverage { missing_groups } => {
                let labels: Vec<String> = missing_groups.iter().map(|g| (g + 1).to_string()).collect();
                write!(f, "global coverage violated: groups {} not covered", labels.join(", "))
            }
        }
    }
}

/// Checks anchoring, sequential overlap and coverage. Empty = valid.
pub fn validate_chain(layout: &BlockLayout, plan: &ChainPlan) -> Vec<ChainViolation> {
    let mut out = Vec::new();
    if plan.is_empty() {
        out.push(ChainViolation::EmptyPlan);
        return out;
    }
    let g_count = layout.num_groups();
    let mut covered = vec![false; g_count];
    for (k, sg) in plan.supergroups.iter().enumerate() {
        if sg.is_empty() {
            out.push(ChainViolation::EmptySupergroup { step: k });
            continue;
        }
        let unknown: Vec<usize> = sg.iter().copied().filter(|&g| g >= g_count).collect();
        for &g in &unknown {
            out.push(ChainViolation::UnknownGroup { step: k, group: g });
        }
        if !unknown.is_empty() {
            continue;
        }
        match layout.common_features(sg) {
            Ok(t) if !t.is_empty() => {}
            _ => out.push(ChainViolation::Anchoring { step: k }),
        }
        // groups are disjoint and nonempty, so subject overlap means a shared group
        if k > 0 && !sg.iter().any(|&g| covered[g] && !layout.groups[g].is_empty()) {
            out.push(ChainViolation::SequentialOverlap { step: k });
        }
        for &g in sg {
            covered[g] = true;
        }
    }
    let missing: Vec<usize> = (0..g_count).filter(|&g| !covered[g]).collect();
    if !missing.is_empty() {
        out.push(ChainViolation::Coverage {
            missing_groups: missing,
        });
    }
    out
}

/// Result of [`discover_chain`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ChainDiscovery {
    Plan(ChainPlan),
    NoValidChain { reason: String },
}

impl ChainDiscovery {
    pub fn plan(self) -> Result<ChainPlan> {
        match self {
            ChainDiscovery::Plan(p) => Ok(p),
            ChainDiscovery::NoValidChain { reason } => Err(Error::InvalidPlan(reason)),
        }
    }
}

/// Greedy chain construction.
///
/// With a global anchor the plan is a single super-group. Otherwise the seed
/// is the pair of groups with the largest common feature set; each round then
/// covers one more group, either by adding it to an existing super-group
/// (keeping that super-group's anchor nonempty) or by opening a new
/// super-group that pairs it with an already covered group. The option with
/// the most shared features wins; ties prefer extending, then the lowest
/// group index, then the earliest super-group or lowest partner.
pub fn discover_chain(layout: &BlockLayout) -> ChainDiscovery {
    let g_count = layout.num_groups();
    if g_count == 0 {
        return ChainDiscovery::NoValidChain {
            reason: "layout has no groups".into(),
        };
    }
    if !layout.shared_feature_set().is_empty() {
        return ChainDiscovery::Plan(ChainPlan::new(vec![(0..g_count).collect()]));
    }
    let feats: Vec<_> = match (0..g_count)
        .map(|g| layout.observed_features(g))
        .collect::<Result<Vec<_>>>()
    {
        Ok(f) => f,
        Err(e) => {
            return ChainDiscovery::NoValidChain {
                reason: e.to_string(),
            }
        }
    };

    let mut best: Option<(usize, usize, usize)> = None;
    for a in 0..g_count {
        for b in a + 1..g_count {
            let shared = feats[a].intersection(&feats[b]).len();
            if shared > 0 && best.is_none_or(|(s, _, _)| shared > s) {
                best = Some((shared, a, b));
            }
        }
    }
    let Some((_, a, b)) = best else {
        return ChainDiscovery::NoValidChain {
            reason: "no two groups share a feature".into(),
        };
    };

    let mut supergroups = vec![vec![a, b]];
    let mut anchors = vec![feats[a].intersection(&feats[b])];
    let mut covered = vec![false; g_count];
    covered[a] = true;
    covered[b] = true;

    #[derive(Clone, Copy)]
    enum Move {
        Extend(usize),
        Open(usize),
    }
    while covered.iter().any(|c| !c) {
        // key: larger shared set, then extending, then lower group, then lower target
        let mut choice: Option<(usize, bool, usize, Move)> = None;
        let mut consider = |s: usize, extend: bool, g: usize, mv: Move| {
            if s == 0 {
                return;
            }
            let better = match &choice {
                None => true,
                Some((bs, bext, bg, _)) => (s, extend, std::cmp::Reverse(g)) > (*bs, *bext, std::cmp::Reverse(*bg)),
            };
            if better {
                choice = Some((s, extend, g, mv));
            }
        };
        for g in (0..g_count).filter(|&g| !covered[g]) {
            for (k, anchor) in anchors.iter().enumerate() {
                consider(anchor.intersection(&feats[g]).len(), true, g, Move::Extend(k));
            }
            for h in (0..g_count).filter(|&h| covered[h]) {
                consider(feats[h].intersection(&feats[g]).len(), false, g, Move::Open(h));
            }
        }
        let Some((_, _, g, mv)) = choice else {
            let missing: Vec<String> = (0..g_count)
                .filter(|&g| !covered[g])
                .map(|g| (g + 1).to_string())
                .collect();
            return ChainDiscovery::NoValidChain {
                reason: format!(
                    "groups {} share no features with any covered group",
                    missing.join(", ")
                ),
            };
        };
        match mv {
            Move::Extend(k) => {
                supergroups[k].push(g);
                anchors[k] = anchors[k].intersection(&feats[g]);
            }
            Move::Open(h) => {
                supergroups.push(vec![h, g]);
                anchors.push(feats[h].intersection(&feats[g]));
            }
        }
        covered[g] = true;
    }
    for sg in &mut supergroups {
        sg.sort_unstable();
    }
    ChainDiscovery::Plan(ChainPlan::new(supergroups))
}

/// Chain-linked anchor projected PCA.
pub fn chain_fit(x: &crate::layout::MaskedMatrix, plan: &ChainPlan, r: usize) -> Result<Embedding> {
    let layout = x.layout();
    let violations = validate_chain(layout, plan);
    if !violations.is_empty() {
        let msgs: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
        return Err(Error::InvalidPlan(msgs.join("; ")));
    }
    let n = layout.n;
    let with_step = |k: usize| {
        move |e: Error| match e {
            Error::Conditioning {
                smallest, largest, ..
            } => Error::Conditioning {
                smallest,
                largest,
                step: Some(k),
            },
            other => other,
        }
    };

    let (first_rows, first_u) = appca_basis(x, &plan.supergroups[0], r)?;
    let mut running = orthonormal_basis(first_u.as_ref()).map_err(with_step(1))?;
    let mut order = first_rows;
    // position of each subject in `running`, usize::MAX when not yet covered
    let mut pos = vec![usize::MAX; n];
    for (k, &i) in order.iter().enumerate() {
        pos[i] = k;
    }

    for (idx, sg) in plan.supergroups.iter().enumerate().skip(1) {
        let step = idx + 1;
        let (rows, u) = appca_basis(x, sg, r)?;
        let local = orthonormal_basis(u.as_ref()).map_err(with_step(step))?;

        let mut overlap_running = Vec::new();
        let mut overlap_local = Vec::new();
        let mut fresh_local = Vec::new();
        let mut fresh_subjects = Vec::new();
        for (li, &i) in rows.iter().enumerate() {
            if pos[i] != usize::MAX {
                overlap_running.push(pos[i]);
                overlap_local.push(li);
            } else {
                fresh_local.push(li);
                fresh_subjects.push(i);
            }
        }
        if overlap_running.len() < r {
            return Err(Error::OverlapFeasibility {
                step,
                rank: r,
                available: overlap_running.len(),
            });
        }
        let a = select_rows(running.as_ref(), &overlap_running);
        let b = select_rows(local.as_ref(), &overlap_local);
        let w = ls_transform(b.as_ref(), a.as_ref()).map_err(with_step(step))?;
        let appended = mul(select_rows(local.as_ref(), &fresh_local).as_ref(), w.as_ref());

        let old = running.nrows();
        let stacked = Mat::from_fn(old + appended.nrows(), r, |i, j| {
            if i < old {
                running[(i, j)]
            } else {
                appended[(i - old, j)]
            }
        });
        for (k, &i) in fresh_subjects.iter().enumerate() {
            pos[i] = old + k;
        }
        order.extend(fresh_subjects);
        running = orthonormal_basis(stacked.as_ref()).map_err(with_step(step))?;
    }

    debug_assert_eq!(order.len(), n);
    let ordered = Mat::from_fn(n, r, |i, j| running[(pos[i], j)]);
    Ok(Embedding::from_basis(ordered.as_ref(), Method::Chain))
}
