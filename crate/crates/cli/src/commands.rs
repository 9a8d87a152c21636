use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use mshlab_core::analysis::{classify_msh, MshReport};
use mshlab_core::capacity::{condenser_capacity, CapacitySummary, CondenserSpec};
use mshlab_core::checks::{
    capacity_properties_noise, check_capacity_properties, check_comparison, check_convergence, check_theorem1,
    check_weak_boundedness, comparison_noise, comparison_pair, convergence_noise, glued_max, theorem1_corpus,
    theorem1_noise, CheckOutcome,
};
use mshlab_core::config::{sample_spec, ExperimentConfig};
use mshlab_core::corpus::{corpus_member, psh_quadratic_family};
use mshlab_core::envelope::{solve_pmeasure, PMeasureSummary};
use mshlab_core::grid::{GridFunction, NodeMask, SetSpec};
use mshlab_core::hessian::hessian_density;
use mshlab_core::mshg::MshgGrid;

use crate::output::{append_rows, write_atomic, write_json, CapacityRow};

/// A configuration problem: reported with exit status 2.
#[derive(Debug)]
pub struct Usage(pub String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

pub struct Globals {
    pub config: Option<PathBuf>,
    pub out: PathBuf,
    pub resolution: Option<usize>,
    pub seed: Option<u64>,
}

impl Globals {
    pub fn load(&self, fallback: impl FnOnce() -> ExperimentConfig) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_path(path).map_err(|e| Usage(format!("{}: {e}", path.display())))?,
            None => fallback(),
        };
        if let Some(r) = self.resolution {
            cfg.resolution = r;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        cfg.validate().map_err(|e| Usage(e.to_string()))?;
        Ok(cfg)
    }

    fn require_config(&self, what: &str) -> Result<ExperimentConfig> {
        if self.config.is_none() {
            return Err(Usage(format!("{what} needs --config")).into());
        }
        self.load(|| unreachable!())
    }
}

fn required<'a, T>(v: &'a Option<T>, field: &str) -> Result<&'a T> {
    v.as_ref().ok_or_else(|| Usage(format!("config field `{field}` is required")).into())
}

#[derive(Serialize)]
struct HessianSummary {
    case_id: String,
    n: usize,
    k: usize,
    resolution: usize,
    h: f64,
    interior_nodes: usize,
    density_min: f64,
    density_max: f64,
    total_mass: f64,
}

pub fn hessian(g: &Globals) -> Result<()> {
    let cfg = g.require_config("hessian")?;
    let dom = cfg.domain_at(cfg.resolution)?;
    let u = cfg.sample(&dom).map_err(|e| Usage(e.to_string()))?;
    let k = cfg.order_k();
    let field = hessian_density(&u, k)?;
    let (hi, lo) = field.interior_range();
    let summary = HessianSummary {
        case_id: cfg.case_id.clone(),
        n: cfg.n,
        k,
        resolution: cfg.resolution,
        h: dom.h(),
        interior_nodes: dom.interior_count(),
        density_min: lo,
        density_max: hi,
        total_mass: field.total_mass(&NodeMask::interior(dom.clone()))?,
    };
    write_atomic(&g.out.join("density.mshg"), &MshgGrid::from_grid(&dom, field.density())?.to_bytes())?;
    write_json(&g.out.join("summary.json"), &summary)?;
    println!("density of order {k}: min {lo:.6e} max {hi:.6e} mass {:.6e}", summary.total_mass);
    Ok(())
}

#[derive(Serialize)]
struct MshEntry {
    id: String,
    expected_largest_m: Option<usize>,
    report: MshReport,
}

pub fn check_msh(g: &Globals) -> Result<()> {
    let cfg = g.require_config("check-msh")?;
    let dom = cfg.domain_at(cfg.resolution)?;
    let slack = cfg.tolerances.slack;
    let mut entries = Vec::new();
    if let Some(f) = &cfg.function {
        let u = sample_spec(f, &dom)?;
        entries.push(MshEntry { id: cfg.case_id.clone(), expected_largest_m: None, report: classify_msh(&u, slack)? });
    }
    for id in &cfg.corpus {
        let member = corpus_member(id)?;
        let u = sample_spec(&member.function, &dom)?;
        entries.push(MshEntry {
            id: id.clone(),
            expected_largest_m: Some(member.expected_largest_m),
            report: classify_msh(&u, slack)?,
        });
    }
    if entries.is_empty() {
        return Err(Usage("check-msh needs `function` or `corpus`".into()).into());
    }
    for e in &entries {
        println!("{}: largest m = {}", e.id, e.report.largest_m);
    }
    write_json(&g.out.join("msh_report.json"), &entries)
}

#[derive(Serialize)]
struct PMeasureOutput {
    case_id: String,
    resolution: usize,
    result: PMeasureSummary,
}

pub fn pmeasure(g: &Globals) -> Result<()> {
    let cfg = g.require_config("pmeasure")?;
    let dom = cfg.domain_at(cfg.resolution)?;
    let e = required(&cfg.set, "set")?.mask(&dom)?;
    let res = solve_pmeasure(&dom, &e, &cfg.envelope())?;
    let summary = res.summary();
    write_atomic(&g.out.join("omega.mshg"), &MshgGrid::from_grid(&dom, res.omega.values())?.to_bytes())?;
    write_json(
        &g.out.join("pmeasure.json"),
        &PMeasureOutput { case_id: cfg.case_id.clone(), resolution: cfg.resolution, result: summary },
    )?;
    println!("iterations {} stalled {} last update {:.3e}", res.iterations, res.stalled, res.last_update);
    Ok(())
}

#[derive(Serialize)]
struct CapacityOutput {
    case_id: String,
    resolution: usize,
    result: CapacitySummary,
}

pub fn capacity(g: &Globals) -> Result<()> {
    let cfg = g.require_config("capacity")?;
    let set = required(&cfg.set, "set")?;
    let resolutions = if cfg.resolutions.is_empty() { vec![cfg.resolution] } else { cfg.resolutions.clone() };
    let mut outputs = Vec::new();
    let mut rows = Vec::new();
    for res in resolutions {
        let dom = cfg.domain_at(res)?;
        let spec = CondenserSpec::new(dom.clone(), set.mask(&dom)?, cfg.m)?;
        let c = condenser_capacity(&spec, &cfg.envelope())?;
        println!("resolution {res}: capacity {:.6e}", c.value);
        rows.push(CapacityRow {
            case_id: cfg.case_id.clone(),
            n: cfg.n,
            m: cfg.m,
            h: c.h,
            value: c.value,
            iterations: c.iterations,
            residual: c.max_residual,
        });
        outputs.push(CapacityOutput { case_id: cfg.case_id.clone(), resolution: res, result: c.summary() });
    }
    write_json(&g.out.join("capacity.json"), &outputs)?;
    let csv = cfg.csv.clone().unwrap_or_else(|| "capacity.csv".to_string());
    append_rows(&g.out.join(csv), &rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Suite {
    T1,
    T7,
    T6,
    Props,
}

impl Suite {
    fn name(self) -> &'static str {
        match self {
            Suite::T1 => "t1",
            Suite::T7 => "t7",
            Suite::T6 => "t6",
            Suite::Props => "props",
        }
    }

    fn fallback(self) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new(2, if self == Suite::T6 || self == Suite::Props { 1 } else { 2 });
        cfg.case_id = self.name().to_string();
        if self == Suite::Props {
            cfg.resolution = 21;
        }
        cfg
    }
}

/// Run a checker suite; `Ok(true)` iff every outcome passed.
pub fn verify(g: &Globals, suite: Suite) -> Result<bool> {
    let cfg = g.load(|| suite.fallback())?;
    let outcomes = match suite {
        Suite::T1 => verify_t1(&cfg)?,
        Suite::T7 => verify_t7(&cfg)?,
        Suite::T6 => verify_t6(&cfg)?,
        Suite::Props => verify_props(&cfg)?,
    };
    for o in &outcomes {
        println!(
            "{} {}: lhs {:.6e} rhs {:.6e} margin {:.3e} noise {:.3e}",
            if o.passed { "PASS" } else { "FAIL" },
            o.name,
            o.lhs,
            o.rhs,
            o.margin,
            o.noise
        );
    }
    write_json(&g.out.join(format!("verify_{}.json", suite.name())), &outcomes)?;
    Ok(outcomes.iter().all(|o| o.passed))
}

fn tagged(mut o: CheckOutcome, ids: &[String]) -> CheckOutcome {
    o.context.corpus_ids.extend_from_slice(ids);
    o
}

fn verify_t1(cfg: &ExperimentConfig) -> Result<Vec<CheckOutcome>> {
    let r = cfg.radius.unwrap_or(0.8);
    let k = cfg.order_k();
    let dom = cfg.domain_at(cfg.resolution)?;
    let noise = theorem1_noise(cfg.n, cfg.m, r, cfg.calibration_pair())?;
    let cases = if cfg.functions.is_empty() {
        theorem1_corpus(cfg.n, k, if cfg.random_cases == 0 { 10 } else { cfg.random_cases }, cfg.seed)
    } else {
        vec![cfg.functions.clone()]
    };
    let mut out = Vec::new();
    for (i, specs) in cases.iter().enumerate() {
        let us = specs.iter().map(|s| sample_spec(s, &dom)).collect::<mshlab_core::Result<Vec<_>>>()?;
        out.push(tagged(check_theorem1(&us, r, cfg.m, noise)?, &[format!("case_{i}")]));
    }
    let mut degenerate = vec![GridFunction::constant(dom.clone(), 0.0)?];
    if k > 1 {
        let first = sample_spec(&cases[0][1], &dom)?;
        degenerate.extend(std::iter::repeat(first).take(k - 1));
    }
    out.push(tagged(check_theorem1(&degenerate, r, cfg.m, noise)?, &["zero_first".to_string()]));
    Ok(out)
}

fn verify_t7(cfg: &ExperimentConfig) -> Result<Vec<CheckOutcome>> {
    let dom = cfg.domain_at(cfg.resolution)?;
    let noise = comparison_noise(cfg.n, cfg.m, cfg.calibration_pair())?;
    let (u, v) = match (&cfg.function, &cfg.other) {
        (Some(u), Some(v)) => (sample_spec(u, &dom)?, sample_spec(v, &dom)?),
        (None, None) => comparison_pair(&dom)?,
        _ => return Err(Usage("t7 needs both `function` and `other`, or neither".into()).into()),
    };
    Ok(vec![tagged(check_comparison(&u, &v, cfg.m, noise)?, &[cfg.case_id.clone()])])
}

fn verify_t6(cfg: &ExperimentConfig) -> Result<Vec<CheckOutcome>> {
    let spec = cfg.function.clone().unwrap_or_else(|| glued_max(cfg.n));
    let set = cfg.set.clone().unwrap_or(SetSpec::Ball { center: vec![0.0; 2 * cfg.n], radius: cfg.radius.unwrap_or(0.5) });
    let deltas_h = if cfg.deltas_h.is_empty() { vec![8.0, 4.0, 2.0] } else { cfg.deltas_h.clone() };
    let noise = convergence_noise(&spec, cfg.n, cfg.m, &cfg.domain, &set, cfg.calibration_pair())?;
    let dom = cfg.domain_at(cfg.resolution)?;
    let u = sample_spec(&spec, &dom)?;
    let deltas: Vec<f64> = deltas_h.iter().map(|d| d * dom.h()).collect();
    let k = set.mask(&dom)?;
    Ok(vec![tagged(check_convergence(&u, cfg.m, &deltas, &k, noise)?, &[cfg.case_id.clone()])])
}

fn verify_props(cfg: &ExperimentConfig) -> Result<Vec<CheckOutcome>> {
    let noise = capacity_properties_noise(cfg.n, cfg.m, cfg.calibration_pair())?;
    let mut out = check_capacity_properties(cfg.n, cfg.m, cfg.resolution, noise)?;
    let dom = cfg.domain_at(cfg.resolution)?;
    let count = if cfg.random_cases == 0 { 5 } else { cfg.random_cases };
    for (i, spec) in psh_quadratic_family(cfg.n, count, cfg.seed).iter().enumerate() {
        let u = sample_spec(spec, &dom)?;
        let (hi, lo) = u.interior_range();
        let bound = hi.abs().max(lo.abs());
        out.push(tagged(check_weak_boundedness(&u, bound, cfg.m, cfg.radius.unwrap_or(0.8))?, &[format!("random_{i}")]));
    }
    Ok(out)
}

pub fn out_dir(p: &Path) -> Result<()> {
    std::fs::create_dir_all(p).with_context(|| format!("creating {}", p.display()))
}
