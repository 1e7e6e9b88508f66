//! Seeded synthetic data with blockwise missingness and heterogeneous
//! signal strength, and the replicate loop that scores every estimator.
//!
//! Randomness: `ChaCha8Rng::seed_from_u64(seed)`, with stream 0 for the
//! subject factors (row-major), stream 1 for the feature factors (row-major)
//! and stream 2 for the noise (column-major). Normal variates come from the
//! ziggurat sampler of `rand_distr::StandardNormal`.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use faer::Mat;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::appca::{appca_crossfit, appca_fit};
use crate::baselines::{oracle_fit, shared_pca_fit, two_step_fit};
use crate::chain::{chain_fit, discover_chain};
use crate::embedding::{Embedding, Method};
use crate::error::{Error, Result};
use crate::layout::{BlockLayout, MaskedMatrix};
use crate::linalg::mul;
use crate::metrics::{alignment_error, ErrorReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// Two groups, three blocks, block 1 shared.
    #[serde(alias = "2x3")]
    TwoByThree,
    /// Three groups, three blocks, cyclic observation, nothing shared.
    #[serde(alias = "3x3")]
    ThreeByThree,
    /// Indicator and weak-coordinate patterns supplied in the config.
    Custom,
}

impl Scenario {
    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::TwoByThree => "two_by_three",
            Scenario::ThreeByThree => "three_by_three",
            Scenario::Custom => "custom",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "2x3" | "two_by_three" => Ok(Scenario::TwoByThree),
            "3x3" | "three_by_three" => Ok(Scenario::ThreeByThree),
            "custom" => Ok(Scenario::Custom),
            _ => Err(Error::Config(format!("unknown scenario '{s}' (expected 2x3, 3x3 or custom)"))),
        }
    }
}

/// Observation pattern plus which coordinates are weakened per group
/// (scaled by `s`) and per block (scaled by `t`). All entries are 0/1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Design {
    pub indicator: Vec<Vec<u8>>,
    pub theta_weak: Vec<Vec<u8>>,
    pub phi_weak: Vec<Vec<u8>>,
}

fn pattern(rows: &[&[u8]]) -> Vec<Vec<u8>> {
    rows.iter().map(|r| r.to_vec()).collect()
}

impl Design {
    pub fn two_by_three() -> Self {
        Design {
            indicator: pattern(&[&[1, 1, 0], &[1, 0, 1]]),
            theta_weak: pattern(&[&[1, 1, 1, 0, 0, 0], &[0, 0, 0, 1, 1, 1]]),
            phi_weak: pattern(&[&[1; 6], &[0; 6], &[0; 6]]),
        }
    }

    pub fn three_by_three() -> Self {
        let cyc = pattern(&[&[1, 1, 0, 0, 0, 0], &[0, 0, 1, 1, 0, 0], &[0, 0, 0, 0, 1, 1]]);
        Design {
            indicator: pattern(&[&[1, 1, 0], &[0, 1, 1], &[1, 0, 1]]),
            theta_weak: cyc.clone(),
            phi_weak: cyc,
        }
    }

    pub fn groups(&self) -> usize {
        self.indicator.len()
    }

    pub fn blocks(&self) -> usize {
        self.indicator.first().map_or(0, |r| r.len())
    }

    fn check(&self, r: usize) -> Result<()> {
        let (g, b) = (self.groups(), self.blocks());
        let binary = |m: &Vec<Vec<u8>>| m.iter().flatten().all(|&v| v <= 1);
        if g == 0 || b == 0 || self.indicator.iter().any(|row| row.len() != b) {
            return Err(Error::Config("indicator must be a nonempty rectangular 0/1 matrix".into()));
        }
        if self.theta_weak.len() != g || self.theta_weak.iter().any(|row| row.len() != r) {
            return Err(Error::Config(format!("theta_weak must be {g}x{r}")));
        }
        if self.phi_weak.len() != b || self.phi_weak.iter().any(|row| row.len() != r) {
            return Err(Error::Config(format!("phi_weak must be {b}x{r}")));
        }
        if !(binary(&self.indicator) && binary(&self.theta_weak) && binary(&self.phi_weak)) {
            return Err(Error::Config("design entries must be 0 or 1".into()));
        }
        Ok(())
    }
}

fn default_rank() -> usize {
    6
}

fn default_noise() -> f64 {
    1.0
}

/// One simulation setting. `n` is the size of every group and `p` of every
/// block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub scenario: Scenario,
    pub n: usize,
    pub p: usize,
    #[serde(default = "default_rank")]
    pub r: usize,
    pub alpha: f64,
    pub beta: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_noise")]
    pub noise_sd: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub design: Option<Design>,
}

impl SimConfig {
    pub fn new(scenario: Scenario, n: usize, p: usize, alpha: f64, beta: f64, seed: u64) -> Self {
        SimConfig {
            scenario,
            n,
            p,
            r: 6,
            alpha,
            beta,
            seed,
            noise_sd: 1.0,
            design: None,
        }
    }

    /// Subject scaling `s = n^{(α−1)/2}`.
    pub fn s(&self) -> f64 {
        (self.n as f64).powf((self.alpha - 1.0) / 2.0)
    }

    /// Feature scaling `t = p^{(β−1)/2}`.
    pub fn t(&self) -> f64 {
        (self.p as f64).powf((self.beta - 1.0) / 2.0)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::Config(format!("{name} = {v} must lie in (0, 1]")));
            }
        }
        if self.r == 0 {
            return Err(Error::Config("rank must be positive".into()));
        }
        if self.n < self.r || self.p < self.r {
            return Err(Error::Config(format!(
                "n = {} and p = {} must both be at least r = {}",
                self.n, self.p, self.r
            )));
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(Error::Config(format!("noise_sd = {} must be finite and nonnegative", self.noise_sd)));
        }
        match self.scenario {
            Scenario::Custom => match &self.design {
                Some(d) => d.check(self.r),
                None => Err(Error::Config("custom scenario needs a design".into())),
            },
            _ if self.r != 6 => Err(Error::Config(format!(
                "scenario {} rescales 6 coordinates; r = {} is not supported",
                self.scenario, self.r
            ))),
            _ if self.design.is_some() => Err(Error::Config(format!(
                "scenario {} has a fixed design; use the custom scenario",
                self.scenario
            ))),
            _ => Ok(()),
        }
    }

    pub fn resolved_design(&self) -> Result<Design> {
        self.validate()?;
        Ok(match self.scenario {
            Scenario::TwoByThree => Design::two_by_three(),
            Scenario::ThreeByThree => Design::three_by_three(),
            Scenario::Custom => self.design.clone().expect("validated"),
        })
    }

    pub fn layout(&self) -> Result<BlockLayout> {
        let d = self.resolved_design()?;
        BlockLayout::contiguous(
            &vec![self.n; d.groups()],
            &vec![self.p; d.blocks()],
            d.indicator.iter().map(|row| row.iter().map(|&v| v == 1).collect()).collect(),
        )
        .map_err(|e| Error::Config(e.to_string()))
    }
}

/// Generated data and ground truth.
#[derive(Debug, Clone)]
pub struct SimInstance {
    pub x: MaskedMatrix,
    pub x_full: Mat<f64>,
    pub theta_true: Mat<f64>,
    pub layout: BlockLayout,
}

fn stream(seed: u64, k: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k);
    rng
}

/// Factor matrix with rows drawn in order and coordinate `j` of every row in
/// segment `seg` multiplied by `scale` when `weak[seg][j] == 1`.
fn factor(rng: &mut ChaCha8Rng, seg_size: usize, weak: &[Vec<u8>], scale: f64) -> Mat<f64> {
    let r = weak[0].len();
    let mut out = Mat::zeros(seg_size * weak.len(), r);
    for i in 0..out.nrows() {
        let w = &weak[i / seg_size];
        for j in 0..r {
            let z: f64 = StandardNormal.sample(rng);
            out[(i, j)] = if w[j] == 1 { scale * z } else { z };
        }
    }
    out
}

pub fn generate(cfg: &SimConfig) -> Result<SimInstance> {
    let design = cfg.resolved_design()?;
    let layout = cfg.layout()?;
    let theta = factor(&mut stream(cfg.seed, 0), cfg.n, &design.theta_weak, cfg.s());
    let phi = factor(&mut stream(cfg.seed, 1), cfg.p, &design.phi_weak, cfg.t());
    let mut x_full = mul(theta.as_ref(), phi.as_ref().transpose());
    if cfg.noise_sd > 0.0 {
        let mut rng = stream(cfg.seed, 2);
        for j in 0..x_full.ncols() {
            for i in 0..x_full.nrows() {
                let z: f64 = StandardNormal.sample(&mut rng);
                x_full[(i, j)] += cfg.noise_sd * z;
            }
        }
    }
    let x = MaskedMatrix::from_complete(&x_full, layout.clone())?;
    Ok(SimInstance {
        x,
        x_full,
        theta_true: theta,
        layout,
    })
}

/// Fits `method` on a simulated instance. Two-step uses group 1 as the
/// reference; cross-fitting splits with `seed`; chain discovers its plan.
pub fn fit_method(inst: &SimInstance, method: Method, r: usize, seed: u64) -> Result<Embedding> {
    match method {
        Method::Appca => appca_fit(&inst.x, r),
        Method::AppcaCrossfit => appca_crossfit(&inst.x, r, seed),
        Method::Chain => {
            let plan = discover_chain(&inst.layout).plan()?;
            chain_fit(&inst.x, &plan, r)
        }
        Method::SharedPca => shared_pca_fit(&inst.x, r),
        Method::TwoStep => two_step_fit(&inst.x, r, 0),
        Method::Oracle => oracle_fit(inst.x_full.as_ref(), r),
    }
}

/// One method's outcome on one replicate.
#[derive(Debug)]
pub struct CellResult {
    pub method: Method,
    pub report: Result<ErrorReport>,
    pub wall_time: f64,
}

/// Generates the instance for `cfg` and scores every method on it.
pub fn run_cell(cfg: &SimConfig, methods: &[Method]) -> Result<Vec<CellResult>> {
    let inst = generate(cfg)?;
    Ok(methods
        .iter()
        .map(|&method| {
            let start = Instant::now();
            let report = fit_method(&inst, method, cfg.r, cfg.seed)
                .and_then(|e| alignment_error(&e, inst.theta_true.as_ref()));
            CellResult {
                method,
                report,
                wall_time: start.elapsed().as_secs_f64(),
            }
        })
        .collect())
}

/// One replicate of one method. Failed cells carry `error` and no
/// `normalized_error`. `wall_time` is only filled when timing is requested,
/// since it would otherwise make reruns differ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub method: Method,
    pub scenario: Scenario,
    pub n: usize,
    pub p: usize,
    pub alpha: f64,
    pub beta: f64,
    pub seed: u64,
    pub normalized_error: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl RunRecord {
    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOptions {
    pub reps: usize,
    pub base_seed: u64,
    pub workers: usize,
    pub timing: bool,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        ExperimentOptions {
            reps: 1,
            base_seed: 0,
            workers: 1,
            timing: false,
        }
    }
}

/// Runs every (config, replicate) cell; replicate `k` uses seed
/// `base_seed + k` regardless of the config's own seed. Records come back
/// ordered by config, replicate and then the order of `methods`.
pub fn run_experiment(grid: &[SimConfig], methods: &[Method], opts: &ExperimentOptions) -> Result<Vec<RunRecord>> {
    if opts.workers == 0 {
        return Err(Error::Config("workers must be at least 1".into()));
    }
    for cfg in grid {
        cfg.validate()?;
    }
    let cells: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|c| (0..opts.reps).map(move |k| (c, k)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers)
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let per_cell: Vec<Vec<RunRecord>> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(c, k)| {
                let mut cfg = grid[c].clone();
                cfg.seed = opts.base_seed.wrapping_add(k as u64);
                let record = |method: Method, outcome: std::result::Result<f64, String>, t: f64| RunRecord {
                    method,
                    scenario: cfg.scenario,
                    n: cfg.n,
                    p: cfg.p,
                    alpha: cfg.alpha,
                    beta: cfg.beta,
                    seed: cfg.seed,
                    normalized_error: outcome.as_ref().ok().copied(),
                    wall_time: opts.timing.then_some(t),
                    error: outcome.err(),
                };
                match run_cell(&cfg, methods) {
                    Ok(results) => results
                        .into_iter()
                        .map(|res| {
                            let outcome = res.report.map(|r| r.normalized).map_err(|e| e.to_string());
                            record(res.method, outcome, res.wall_time)
                        })
                        .collect(),
                    Err(e) => methods.iter().map(|&m| record(m, Err(e.to_string()), 0.0)).collect(),
                }
            })
            .collect()
    });
    Ok(per_cell.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{svd_top_r, tmul};

    #[test]
    fn scaling_constants() {
        let mut cfg = SimConfig::new(Scenario::TwoByThree, 10_000, 100, 1.0, 0.5, 0);
        assert_eq!(cfg.s(), 1.0);
        cfg.alpha = 0.5;
        assert!((cfg.s() - 0.1).abs() <= 1e-15);
        assert!((cfg.t() - 100f64.powf(-0.25)).abs() <= 1e-15);
    }

    #[test]
    fn config_validation() {
        let ok = SimConfig::new(Scenario::TwoByThree, 20, 20, 0.5, 0.5, 0);
        assert!(ok.validate().is_ok());
        assert!(SimConfig { alpha: 1.5, ..ok.clone() }.validate().unwrap_err().to_string().contains("(0, 1]"));
        assert!(SimConfig { beta: 0.0, ..ok.clone() }.validate().is_err());
        assert!(SimConfig { r: 5, ..ok.clone() }.validate().is_err());
        assert!(SimConfig { n: 4, ..ok.clone() }.validate().is_err());
        let custom = SimConfig {
            scenario: Scenario::Custom,
            r: 2,
            design: Some(Design {
                indicator: vec![vec![1, 1], vec![1, 0]],
                theta_weak: vec![vec![1, 0], vec![0, 1]],
                phi_weak: vec![vec![1, 1], vec![0, 0]],
            }),
            ..ok.clone()
        };
        assert!(custom.validate().is_ok());
        assert_eq!(generate(&custom).unwrap().x_full.ncols(), 40);
        assert!(SimConfig { design: None, ..custom }.validate().is_err());
    }

    #[test]
    fn config_json_defaults_and_aliases() {
        let cfg: SimConfig = serde_json::from_str(r#"{"scenario":"3x3","n":50,"p":40,"alpha":0.5,"beta":1.0}"#).unwrap();
        assert_eq!(cfg.scenario, Scenario::ThreeByThree);
        assert_eq!((cfg.r, cfg.seed, cfg.noise_sd), (6, 0, 1.0));
        let back: SimConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn noise_free_has_rank_six() {
        for scenario in [Scenario::TwoByThree, Scenario::ThreeByThree] {
            let cfg = SimConfig {
                noise_sd: 0.0,
                ..SimConfig::new(scenario, 40, 30, 0.5, 0.5, 3)
            };
            let inst = generate(&cfg).unwrap();
            let s = svd_top_r(inst.x_full.as_ref(), 7).unwrap().s;
            assert!(s[6] <= 1e-10 * s[0], "{scenario}: {:?}", s);
            assert!(s[5] > 1e-6 * s[0]);
        }
    }

    #[test]
    fn masked_blocks_hold_sentinel_and_observed_match() {
        let inst = generate(&SimConfig::new(Scenario::ThreeByThree, 8, 7, 0.5, 0.5, 1)).unwrap();
        let v = inst.x.raw_values();
        for i in 0..24 {
            for j in 0..21 {
                if inst.x.is_observed(i, j) {
                    assert_eq!(v[(i, j)].to_bits(), inst.x_full[(i, j)].to_bits());
                } else {
                    assert!(v[(i, j)].is_nan());
                }
            }
        }
        assert!(inst.layout.shared_feature_set().is_empty());
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = SimConfig::new(Scenario::TwoByThree, 15, 10, 0.5, 0.5, 42);
        let a = generate(&cfg).unwrap();
        let b = generate(&cfg).unwrap();
        assert_eq!(a.x_full, b.x_full);
        assert_eq!(a.theta_true, b.theta_true);
        let c = generate(&SimConfig { seed: 43, ..cfg }).unwrap();
        assert_ne!(a.x_full, c.x_full);
    }

    #[test]
    fn subject_signal_scales_like_n_alpha() {
        for seed in 0..20 {
            let cfg = SimConfig::new(Scenario::TwoByThree, 500, 6, 0.5, 0.5, seed);
            let inst = generate(&cfg).unwrap();
            for g in 0..2 {
                let rows: Vec<usize> = inst.layout.groups[g].clone();
                let tg = crate::linalg::select_rows(inst.theta_true.as_ref(), &rows);
                let gram = tmul(tg.as_ref(), tg.as_ref());
                let eig = svd_top_r(gram.as_ref(), 6).unwrap().s;
                let ratio = eig[5] / (500f64).powf(0.5);
                assert!((0.25..=4.0).contains(&ratio), "seed {seed} group {g}: {ratio}");
            }
        }
    }

    #[test]
    fn oracle_cell_noise_free() {
        let cfg = SimConfig {
            noise_sd: 0.0,
            ..SimConfig::new(Scenario::TwoByThree, 30, 30, 0.5, 0.5, 0)
        };
        let recs = run_experiment(&[cfg], &[Method::Oracle], &ExperimentOptions::default()).unwrap();
        assert_eq!(recs.len(), 1);
        assert!(recs[0].normalized_error.unwrap() <= 1e-6);
        assert!(recs[0].wall_time.is_none());
    }

    #[test]
    fn failures_become_records_and_workers_do_not_matter() {
        let grid = [
            SimConfig::new(Scenario::ThreeByThree, 20, 20, 0.5, 0.5, 0),
            SimConfig::new(Scenario::TwoByThree, 20, 20, 0.5, 0.5, 0),
        ];
        let methods = [Method::SharedPca, Method::TwoStep, Method::Chain];
        let opts = ExperimentOptions {
            reps: 3,
            base_seed: 9,
            workers: 1,
            timing: false,
        };
        let one = run_experiment(&grid, &methods, &opts).unwrap();
        let four = run_experiment(&grid, &methods, &ExperimentOptions { workers: 4, ..opts }).unwrap();
        assert_eq!(one, four);
        assert_eq!(one.len(), 18);
        assert!(one[0].error.is_some() && one[0].method == Method::SharedPca);
        assert!(one[1].is_ok() && one[2].is_ok());
        assert_eq!(one[3].seed, 10);
        assert!(one[9..].iter().all(|r| r.is_ok()));
    }
}
