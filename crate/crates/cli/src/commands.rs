use std::fs;
use std::path::{Path, PathBuf};

use faer::Mat;
use serde::{Deserialize, Serialize};

use appca::chain::ChainDiscovery;
use appca::io::{read_matrix_file, write_atomic, write_matrix_file};
use appca::layout::LayoutFile;
use appca::metrics::{alignment_error_matrix, ic_values};
use appca::sweep::{slopes, slopes_csv, summarize, summary_csv, to_jsonl, GridSpec};
use appca::{
    appca_crossfit, appca_fit, chain_fit, discover_chain, generate, rank_select_ic, shared_pca_fit, two_step_fit,
    validate_chain, validate_layout, BlockLayout, ChainPlan, Error, MaskedMatrix, Method, Scenario, SimConfig,
};

use crate::manifest::{now, RunManifest};
use crate::{EvalArgs, FitArgs, ReplayArgs, SelectRankArgs, SimulateArgs, SweepArgs, ValidateArgs};

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_DATA: u8 = 3;
pub const EXIT_ALL_FAILED: u8 = 4;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn data(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_DATA,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_) => EXIT_USAGE,
            _ => EXIT_DATA,
        };
        let mut message = e.to_string();
        if matches!(e, Error::NoSharedAnchor) {
            message.push_str(" (try --method chain)");
        }
        Failure { code, message }
    }
}

type CmdResult = Result<(), Failure>;

fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::data(format!("{}: {e}", path.display())))
}

fn read_matrix(path: &Path) -> Result<Mat<f64>, Failure> {
    read_matrix_file(path).map_err(|e| Failure::data(format!("{}: {e}", path.display())))
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::data(format!("cannot create {}: {e}", dir.display())))
}

fn io_failure(path: &Path) -> impl Fn(Error) -> Failure + '_ {
    move |e| Failure::data(format!("{}: {e}", path.display()))
}

pub fn simulate(a: &SimulateArgs) -> CmdResult {
    let cfg = match &a.config {
        Some(path) => serde_json::from_str::<SimConfig>(&read_text(path)?)
            .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?,
        None => {
            let scenario: Scenario = a.scenario.parse()?;
            let need = |v: Option<f64>, name: &str| v.ok_or_else(|| Failure::usage(format!("--{name} is required")));
            SimConfig {
                r: a.r,
                noise_sd: a.noise_sd,
                ..SimConfig::new(
                    scenario,
                    a.n.ok_or_else(|| Failure::usage("--n is required"))?,
                    a.p.ok_or_else(|| Failure::usage("--p is required"))?,
                    need(a.alpha, "alpha")?,
                    need(a.beta, "beta")?,
                    a.seed,
                )
            }
        }
    };
    cfg.validate()?;
    run_simulate(&cfg, &a.out)
}

fn run_simulate(cfg: &SimConfig, out: &Path) -> CmdResult {
    let started = now();
    create_dir(out)?;
    let inst = generate(cfg)?;
    let files = ["X.csv", "X_full.csv", "theta_true.csv", "layout.json"];
    let p = |name: &str| out.join(name);
    write_matrix_file(&p(files[0]), inst.x.raw_values().as_ref()).map_err(io_failure(&p(files[0])))?;
    write_matrix_file(&p(files[1]), inst.x_full.as_ref()).map_err(io_failure(&p(files[1])))?;
    write_matrix_file(&p(files[2]), inst.theta_true.as_ref()).map_err(io_failure(&p(files[2])))?;
    let layout_json = format!("{}\n", inst.layout.to_json()?);
    write_atomic(&p(files[3]), layout_json.as_bytes()).map_err(io_failure(&p(files[3])))?;
    let config = serde_json::to_value(cfg).map_err(Error::from)?;
    RunManifest::new("simulate", config, vec![cfg.seed], started)
        .write(&p("manifest.json"), &files)
        .map_err(io_failure(&p("manifest.json")))?;
    Ok(())
}

fn load_masked(x: &Path, layout: &Path) -> Result<MaskedMatrix, Failure> {
    let layout = BlockLayout::from_json(&read_text(layout)?)?;
    let values = read_matrix(x)?;
    Ok(MaskedMatrix::new(values, layout)?)
}

/// Per-group rank choice on each group's observed submatrix; the largest wins.
fn auto_rank(x: &MaskedMatrix, r_max: usize) -> Result<(usize, Vec<usize>), Failure> {
    let layout = x.layout();
    let mut picks = Vec::new();
    for g in 0..layout.num_groups() {
        let sub = x.group_observed(g)?;
        let cap = r_max.min(sub.nrows().min(sub.ncols()) / 2);
        if cap == 0 {
            return Err(Failure::data(format!(
                "group {} is too small to select a rank",
                g + 1
            )));
        }
        picks.push(rank_select_ic(sub.as_ref(), cap)?);
    }
    Ok((*picks.iter().max().expect("at least one group"), picks))
}

#[derive(Debug, Serialize, Deserialize)]
struct FitEcho {
    x: PathBuf,
    layout: PathBuf,
    method: Method,
    rank: usize,
    rank_auto: Option<Vec<usize>>,
    plan: Option<serde_json::Value>,
    reference: Option<usize>,
    seed: Option<u64>,
}

pub fn fit(a: &FitArgs) -> CmdResult {
    let started = now();
    let method: Method = a.method.parse()?;
    if method == Method::Oracle {
        return Err(Failure::usage("the oracle needs the complete matrix; it is only available in simulations"));
    }
    if a.reference == 0 {
        return Err(Failure::usage("--reference is one-based"));
    }
    let x = load_masked(&a.x, &a.layout)?;
    let (rank, rank_auto) = if a.rank == "auto" {
        let (r, picks) = auto_rank(&x, a.r_max)?;
        (r, Some(picks))
    } else {
        let r: usize = a
            .rank
            .parse()
            .ok()
            .filter(|&r| r > 0)
            .ok_or_else(|| Failure::usage(format!("--rank must be a positive integer or auto, got '{}'", a.rank)))?;
        (r, None)
    };

    let mut plan_echo = None;
    let emb = match method {
        Method::Appca => appca_fit(&x, rank)?,
        Method::AppcaCrossfit => appca_crossfit(&x, rank, a.seed)?,
        Method::SharedPca => shared_pca_fit(&x, rank)?,
        Method::TwoStep => two_step_fit(&x, rank, a.reference - 1)?,
        Method::Chain => {
            let plan = if a.plan == "auto" {
                match discover_chain(x.layout()) {
                    ChainDiscovery::Plan(p) => p,
                    ChainDiscovery::NoValidChain { reason } => {
                        return Err(Failure::data(format!("no valid chain: {reason}")))
                    }
                }
            } else {
                ChainPlan::from_json(&read_text(Path::new(&a.plan))?)?
            };
            plan_echo = Some(serde_json::to_value(plan.to_file()).map_err(Error::from)?);
            chain_fit(&x, &plan, rank)?
        }
        Method::Oracle => unreachable!(),
    };

    create_dir(&a.out)?;
    let theta_path = a.out.join("theta_hat.csv");
    let ordered = emb.in_subject_order()?;
    write_matrix_file(&theta_path, ordered.as_ref()).map_err(io_failure(&theta_path))?;
    let echo = FitEcho {
        x: a.x.clone(),
        layout: a.layout.clone(),
        method,
        rank,
        rank_auto,
        plan: plan_echo,
        reference: (method == Method::TwoStep).then_some(a.reference),
        seed: (method == Method::AppcaCrossfit).then_some(a.seed),
    };
    let seeds = echo.seed.into_iter().collect();
    let manifest_path = a.out.join("manifest.json");
    RunManifest::new("fit", serde_json::to_value(&echo).map_err(Error::from)?, seeds, started)
        .write(&manifest_path, &["theta_hat.csv"])
        .map_err(io_failure(&manifest_path))?;
    Ok(())
}

pub fn eval(a: &EvalArgs) -> CmdResult {
    let theta_hat = read_matrix(&a.theta_hat)?;
    let theta = read_matrix(&a.theta_true)?;
    let report = alignment_error_matrix(theta_hat.as_ref(), theta.as_ref())?;
    let text = format!("{}\n", serde_json::to_string_pretty(&report).map_err(Error::from)?);
    match &a.out {
        Some(path) => write_atomic(path, text.as_bytes()).map_err(io_failure(path))?,
        None => print!("{text}"),
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct SweepEcho {
    grid: GridSpec,
    timing: bool,
}

pub fn sweep(a: &SweepArgs) -> CmdResult {
    let mut grid: GridSpec = serde_json::from_str(&read_text(&a.grid)?)
        .map_err(|e| Failure::usage(format!("{}: {e}", a.grid.display())))?;
    if let Some(w) = a.workers {
        grid.workers = w;
    }
    grid.check()?;
    run_sweep(grid, a.timing, &a.out)
}

fn run_sweep(grid: GridSpec, timing: bool, out: &Path) -> CmdResult {
    let started = now();
    create_dir(out)?;
    let records = grid.run(timing)?;
    let summary = summarize(&records);
    let files = ["results.jsonl", "summary.csv", "slopes.csv"];
    let contents = [
        to_jsonl(&records)?,
        summary_csv(&summary)?,
        slopes_csv(&slopes(&summary))?,
    ];
    for (name, text) in files.iter().zip(&contents) {
        let path = out.join(name);
        write_atomic(&path, text.as_bytes()).map_err(io_failure(&path))?;
    }
    let seeds = (0..grid.reps as u64).map(|k| grid.base_seed.wrapping_add(k)).collect();
    let echo = SweepEcho { grid, timing };
    let manifest_path = out.join("manifest.json");
    RunManifest::new("sweep", serde_json::to_value(&echo).map_err(Error::from)?, seeds, started)
        .write(&manifest_path, &files)
        .map_err(io_failure(&manifest_path))?;

    let failed = records.iter().filter(|r| !r.is_ok()).count();
    if failed > 0 {
        eprintln!("appca: {failed} of {} cells failed", records.len());
    }
    if !records.is_empty() && failed == records.len() {
        return Err(Failure {
            code: EXIT_ALL_FAILED,
            message: "every sweep cell failed".into(),
        });
    }
    Ok(())
}

pub fn replay(a: &ReplayArgs) -> CmdResult {
    let manifest = RunManifest::read(&a.manifest).map_err(io_failure(&a.manifest))?;
    let out = a.out.clone().unwrap_or_else(|| {
        a.manifest
            .parent()
            .filter(|d| !d.as_os_str().is_empty())
            .map_or_else(|| PathBuf::from("."), Path::to_path_buf)
    });
    let bad = |e: serde_json::Error| Failure::data(format!("{}: {e}", a.manifest.display()));
    match manifest.command.as_str() {
        "simulate" => {
            let cfg: SimConfig = serde_json::from_value(manifest.config).map_err(bad)?;
            cfg.validate()?;
            run_simulate(&cfg, &out)
        }
        "sweep" => {
            let mut echo: SweepEcho = serde_json::from_value(manifest.config).map_err(bad)?;
            if let Some(w) = a.workers {
                echo.grid.workers = w;
            }
            echo.grid.check()?;
            run_sweep(echo.grid, echo.timing, &out)
        }
        other => Err(Failure::usage(format!(
            "replay supports simulate and sweep manifests, not '{other}'"
        ))),
    }
}

#[derive(Debug, Serialize)]
struct RankReport {
    rank: usize,
    r_max: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    ic: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    per_group: Option<Vec<usize>>,
}

pub fn select_rank(a: &SelectRankArgs) -> CmdResult {
    let report = match &a.layout {
        Some(layout) => {
            let x = load_masked(&a.x, layout)?;
            let (rank, picks) = auto_rank(&x, a.r_max)?;
            RankReport {
                rank,
                r_max: a.r_max,
                ic: None,
                per_group: Some(picks),
            }
        }
        None => {
            let x = read_matrix(&a.x)?;
            for j in 0..x.ncols() {
                for i in 0..x.nrows() {
                    if !x[(i, j)].is_finite() {
                        return Err(Failure::data(format!(
                            "cell ({}, {}) is not finite; pass --layout for a masked matrix",
                            i + 1,
                            j + 1
                        )));
                    }
                }
            }
            let ic = ic_values(x.as_ref(), a.r_max)?;
            RankReport {
                rank: rank_select_ic(x.as_ref(), a.r_max)?,
                r_max: a.r_max,
                ic: Some(ic.into_iter().map(|v| if v.is_finite() { v } else { f64::MIN }).collect()),
                per_group: None,
            }
        }
    };
    println!("{}", serde_json::to_string(&report).map_err(Error::from)?);
    Ok(())
}

pub fn validate(a: &ValidateArgs) -> CmdResult {
    let file: LayoutFile = serde_json::from_str(&read_text(&a.layout)?)
        .map_err(|e| Failure::data(format!("{}: {e}", a.layout.display())))?;
    let layout = file.into_layout()?;
    let violations = validate_layout(&layout);
    if !violations.is_empty() {
        for v in &violations {
            println!("layout: {v}");
        }
        return Err(Failure::data(format!("layout has {} violation(s)", violations.len())));
    }
    let t = layout.shared_feature_set();
    println!(
        "layout: valid ({} subjects, {} features, {} groups, {} blocks, {} shared features)",
        layout.n,
        layout.p,
        layout.num_groups(),
        layout.num_blocks(),
        t.len()
    );
    if let Some(path) = &a.plan {
        let plan = ChainPlan::from_json(&read_text(path)?)?;
        let v = validate_chain(&layout, &plan);
        if !v.is_empty() {
            for x in &v {
                println!("plan: {x}");
            }
            return Err(Failure::data(format!("plan has {} violation(s)", v.len())));
        }
        println!("plan: valid ({} super-groups)", plan.len());
    }
    if a.discover {
        match discover_chain(&layout) {
            ChainDiscovery::Plan(plan) => println!("{}", plan.to_json()?),
            ChainDiscovery::NoValidChain { reason } => {
                return Err(Failure::data(format!("no valid chain: {reason}")))
            }
        }
    }
    Ok(())
}
