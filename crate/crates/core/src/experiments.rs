//! Experiment drivers behind the command-line harness.
//!
//! Each driver takes a parameter struct (strict serde, every field defaulted)
//! and a master seed, and returns named tables plus pass/fail checks. Rows
//! are produced in a fixed order, so output is independent of thread count.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cover::{build_v_grid, inclusion_probe_audit, non_regular_counterexample, sandwich_audit};
use crate::error::{invalid, Result};
use crate::geometry::{Ball, Vector};
use crate::lb_linear::{build_lb_instance, cap_identity_mismatch, run_adversarial_game, Learner};
use crate::model::{regularity_check, robust_loss_distribution, BoundedLinearClass, Hypothesis, Label, LabeledExample};
use crate::oracle_game::{
    anchor_symmetry_audit, build_query_instance, measure_bound_audit, run_query_game, threshold_scaling,
};
use crate::perturbation::{Region, RegionFamily};
use crate::rerm::{best_in_class, inflation_gap_audit, opt_profile, rerm_solve, tolrerm, RermOracle};
use crate::rng::{derived_rng, rng_from_seed, seed_derive, seed_derive_indexed};
use crate::robust_vc::{
    overhead_audit, overhead_instance, robust_vc_search, sauer_audit, union_of_balls_audit, vc_from_matrix,
    zero_one_matrix,
};
use crate::stats::{binomial_sigma, median, quantile};
use crate::tasks::{instance_seeds, random_regular_class, random_sandwich_case, random_tolerant_task, TaskShape};

/// The experiments the harness can run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    TolrermSweep,
    InflationGapAudit,
    SandwichAudit,
    LbLinearGame,
    OracleQuerySweep,
    RobustVcAudit,
    RegularityCheck,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::TolrermSweep,
        Experiment::InflationGapAudit,
        Experiment::SandwichAudit,
        Experiment::LbLinearGame,
        Experiment::OracleQuerySweep,
        Experiment::RobustVcAudit,
        Experiment::RegularityCheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::TolrermSweep => "tolrerm_sweep",
            Experiment::InflationGapAudit => "inflation_gap_audit",
            Experiment::SandwichAudit => "sandwich_audit",
            Experiment::LbLinearGame => "lb_linear_game",
            Experiment::OracleQuerySweep => "oracle_query_sweep",
            Experiment::RobustVcAudit => "robust_vc_audit",
            Experiment::RegularityCheck => "regularity_check",
        }
    }

    pub fn summary(self) -> &'static str {
        match self {
            Experiment::TolrermSweep => "tolerant robust ERM excess error across sample sizes",
            Experiment::InflationGapAudit => "frequency and mean of OPT jumps over a random inflation window",
            Experiment::SandwichAudit => "loss and set sandwiches for grid and union-of-balls middles",
            Experiment::LbLinearGame => "shattering construction and adversarial game for bounded halfspaces",
            Experiment::OracleQuerySweep => "sampling-oracle lower bound: measure, excess error, detection scaling",
            Experiment::RobustVcAudit => "robust VC search, Sauer and correspondence checks, overhead table",
            Experiment::RegularityCheck => "alpha-regularity certificates for halfspaces, spheres and tables",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One table cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Bool(bool),
    Text(String),
    Missing,
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Int(v) => write!(f, "{v}"),
            // shortest round-trip form, scientific outside [1e-4, 1e15)
            Cell::Float(v) if *v != 0.0 && v.is_finite() && !(1e-4..1e15).contains(&v.abs()) => write!(f, "{v:e}"),
            Cell::Float(v) => write!(f, "{v}"),
            Cell::Bool(v) => write!(f, "{v}"),
            Cell::Text(v) => f.write_str(v),
            Cell::Missing => Ok(()),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}
impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}
impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
    }
}
impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
    }
}
impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}
impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}
impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}
impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Missing, Into::into)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub description: String,
}

/// A named table with documented columns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, columns: &[(&str, &str)]) -> Self {
        Self {
            name: name.to_string(),
            columns: columns.iter().map(|(n, d)| Column { name: n.to_string(), description: d.to_string() }).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len(), "row width in table {}", self.name);
        self.rows.push(row);
    }
}

/// A named assertion with a human-readable detail line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &str, passed: bool, detail: String) -> Check {
    Check { name: name.to_string(), passed, detail }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutput {
    pub tables: Vec<Table>,
    pub checks: Vec<Check>,
}

impl ExperimentOutput {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

macro_rules! row {
    ($($x:expr),* $(,)?) => { vec![$(Cell::from($x)),*] };
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(name, "must be finite and positive"))
    }
}

fn nonzero(name: &'static str, v: usize) -> Result<()> {
    if v > 0 {
        Ok(())
    } else {
        Err(invalid(name, "must be positive"))
    }
}

fn unit_interval(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v <= 1.0 {
        Ok(())
    } else {
        Err(invalid(name, "must lie in (0, 1]"))
    }
}

// ---------------------------------------------------------------- tolrerm

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TolrermSweepParams {
    pub n_grid: Vec<usize>,
    pub eps: f64,
    pub delta: f64,
    pub gamma: f64,
    pub tasks: usize,
    pub trials_per_task: usize,
    pub shape: TaskShape,
}

impl Default for TolrermSweepParams {
    fn default() -> Self {
        Self {
            n_grid: vec![10, 30, 100, 300],
            eps: 0.1,
            delta: 0.1,
            gamma: 0.5,
            tasks: 20,
            trials_per_task: 10,
            shape: TaskShape::default(),
        }
    }
}

impl TolrermSweepParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_grid.is_empty() || self.n_grid.contains(&0) || self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("n_grid", "must be nonempty, positive and increasing"));
        }
        unit_interval("eps", self.eps)?;
        unit_interval("delta", self.delta)?;
        positive("gamma", self.gamma)?;
        nonzero("tasks", self.tasks)?;
        nonzero("trials_per_task", self.trials_per_task)
    }
}

/// For every task, `n` and trial: run the tolerant learner and compare its
/// robust loss on `U` with the best loss on `U^gamma` in the class.
pub fn run_tolrerm_sweep(p: &TolrermSweepParams, seed: u64) -> Result<ExperimentOutput> {
    p.validate()?;
    let tasks = instance_seeds(seed, "tolrerm/task", p.tasks)
        .into_iter()
        .map(|s| {
            let task = random_tolerant_task(&p.shape, s)?;
            let (_, bench) = best_in_class(&task.class, &task.family.expand(p.gamma)?, &task.dist)?;
            Ok((task, bench))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut trials = Table::new(
        "trials",
        &[
            ("task", "task index"),
            ("n", "sample size"),
            ("trial", "trial index within the task"),
            ("r_used", "inflation radius drawn by the learner"),
            ("loss_u", "robust loss of the output on the base family"),
            ("benchmark", "minimum over the class of robust loss on the gamma-expanded family"),
            ("excess", "loss_u minus benchmark"),
            ("success", "excess <= eps"),
        ],
    );
    let mut summary = Table::new(
        "summary",
        &[
            ("n", "sample size"),
            ("trials", "trials at this n"),
            ("success_fraction", "fraction of trials with excess <= eps"),
            ("excess_q10", "10% quantile of excess"),
            ("excess_median", "median excess"),
            ("excess_q90", "90% quantile of excess"),
            ("excess_mean", "mean excess"),
        ],
    );
    let mut medians = Vec::new();
    let mut last_fraction = 0.0;
    for &n in &p.n_grid {
        let jobs: Vec<(usize, usize)> =
            (0..p.tasks).flat_map(|t| (0..p.trials_per_task).map(move |k| (t, k))).collect();
        let results: Vec<(f64, f64)> = jobs
            .par_iter()
            .map(|&(t, k)| {
                let (task, _) = &tasks[t];
                let s = seed_derive_indexed(seed, &format!("tolrerm/run/{t}/{n}"), k as u64);
                let out = tolrerm(
                    &RermOracle::ExhaustiveFinite(task.class.clone()),
                    &task.family,
                    &task.dist,
                    p.eps,
                    p.delta,
                    p.gamma,
                    n,
                    s,
                )?;
                Ok((out.r_used, robust_loss_distribution(&out.hypothesis, &task.family, &task.dist)?))
            })
            .collect::<Result<_>>()?;
        let mut excesses = Vec::with_capacity(jobs.len());
        let mut successes = 0usize;
        for (&(t, k), &(r_used, loss)) in jobs.iter().zip(&results) {
            let bench = tasks[t].1;
            let excess = loss - bench;
            let ok = excess <= p.eps + 1e-12;
            successes += ok as usize;
            excesses.push(excess);
            trials.push(row![t, n, k, r_used, loss, bench, excess, ok]);
        }
        let frac = successes as f64 / jobs.len() as f64;
        let med = median(&excesses);
        medians.push(med);
        last_fraction = frac;
        summary.push(row![
            n,
            jobs.len(),
            frac,
            quantile(&excesses, 0.1),
            med,
            quantile(&excesses, 0.9),
            excesses.iter().sum::<f64>() / excesses.len() as f64,
        ]);
    }
    let n_max = *p.n_grid.last().expect("validated");
    let checks = vec![
        check(
            "success_fraction_at_max_n",
            last_fraction >= 1.0 - p.delta,
            format!("fraction {last_fraction:.4} at n = {n_max}, need >= {:.4}", 1.0 - p.delta),
        ),
        check("median_excess_nonincreasing", medians.windows(2).all(|w| w[1] <= w[0]), format!("medians {medians:?}")),
    ];
    Ok(ExperimentOutput { tables: vec![summary, trials], checks })
}

// ---------------------------------------------------------- inflation gap

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InflationGapParams {
    pub instances: usize,
    pub sample_size: usize,
    pub trials: usize,
    pub eps_grid: Vec<f64>,
    pub delta_grid: Vec<f64>,
    pub gamma: f64,
    /// Radii on which each profile is checked for monotonicity.
    pub profile_points: usize,
    pub shape: TaskShape,
}

impl Default for InflationGapParams {
    fn default() -> Self {
        Self {
            instances: 50,
            sample_size: 40,
            trials: 300,
            eps_grid: vec![0.1, 0.3],
            delta_grid: vec![0.1, 0.3],
            gamma: 1.0,
            profile_points: 41,
            shape: TaskShape::default(),
        }
    }
}

impl InflationGapParams {
    pub fn validate(&self) -> Result<()> {
        nonzero("instances", self.instances)?;
        nonzero("sample_size", self.sample_size)?;
        if self.trials < 100 {
            return Err(invalid("trials", "at least 100 trials are required"));
        }
        if self.eps_grid.is_empty() || self.delta_grid.is_empty() {
            return Err(invalid("eps_grid", "eps_grid and delta_grid must be nonempty"));
        }
        for &e in &self.eps_grid {
            unit_interval("eps_grid", e)?;
        }
        for &d in &self.delta_grid {
            unit_interval("delta_grid", d)?;
        }
        positive("gamma", self.gamma)?;
        if self.profile_points < 2 {
            return Err(invalid("profile_points", "need at least 2"));
        }
        Ok(())
    }
}

/// Exact OPT profiles of random finite-class instances, audited over the
/// random inflation window for every `(eps, delta)` pair.
pub fn run_inflation_gap(p: &InflationGapParams, seed: u64) -> Result<ExperimentOutput> {
    p.validate()?;
    let instances = instance_seeds(seed, "inflation/instance", p.instances)
        .into_iter()
        .map(|s| {
            let task = random_tolerant_task(&p.shape, s)?;
            let sample = task.dist.sample(p.sample_size, &mut derived_rng(s, "sample"));
            Ok((RermOracle::ExhaustiveFinite(task.class.clone()), task.family, sample))
        })
        .collect::<Result<Vec<_>>>()?;
    let grid: Vec<f64> = (0..p.profile_points).map(|i| p.gamma * i as f64 / (p.profile_points - 1) as f64).collect();
    let monotone_failures = instances
        .par_iter()
        .map(|(o, f, s)| Ok(opt_profile(o, f, s, &grid).is_err() as usize))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum::<usize>();

    let mut per_instance = Table::new(
        "instances",
        &[
            ("eps", "accuracy parameter"),
            ("delta", "confidence parameter"),
            ("instance", "instance index"),
            ("alpha", "window width eps*delta*gamma/7"),
            ("frequency", "fraction of draws with OPT^r - OPT^(r-alpha) <= eps/3"),
            ("mean_gap", "mean of OPT^r - OPT^(r-alpha)"),
            ("gap_bound", "alpha/(gamma-alpha)"),
        ],
    );
    let mut pooled = Table::new(
        "pooled",
        &[
            ("eps", "accuracy parameter"),
            ("delta", "confidence parameter"),
            ("draws", "total radius draws over all instances"),
            ("frequency", "pooled fraction of small gaps"),
            ("frequency_sigma", "binomial standard error of frequency"),
            ("target_frequency", "1 - delta/2"),
            ("mean_gap", "pooled mean gap"),
            ("mean_gap_sigma", "standard error of the pooled mean gap"),
            ("gap_bound", "alpha/(gamma-alpha)"),
            ("pass", "frequency >= target - 3 sigma and mean_gap <= bound + 3 sigma"),
        ],
    );
    let mut checks = vec![check(
        "profiles_monotone",
        monotone_failures == 0,
        format!("{monotone_failures} of {} profiles decreased on the radius grid", p.instances),
    )];
    for &eps in &p.eps_grid {
        for &delta in &p.delta_grid {
            let reports = instances
                .par_iter()
                .enumerate()
                .map(|(i, (oracle, family, sample))| {
                    let profile = |r: f64| rerm_solve(oracle, family, sample, r).map(|o| o.achieved_loss);
                    let s = seed_derive_indexed(seed, &format!("inflation/draws/{eps}/{delta}"), i as u64);
                    inflation_gap_audit(profile, eps, delta, p.gamma, p.trials, s)
                })
                .collect::<Result<Vec<_>>>()?;
            for (i, r) in reports.iter().enumerate() {
                per_instance.push(row![eps, delta, i, r.alpha, r.frequency, r.mean_gap, r.gap_bound]);
            }
            let k = reports.len() as f64;
            let draws = p.trials * reports.len();
            let freq = reports.iter().map(|r| r.frequency).sum::<f64>() / k;
            let freq_sigma = binomial_sigma(freq, draws);
            let gap = reports.iter().map(|r| r.mean_gap).sum::<f64>() / k;
            let gap_sigma = reports.iter().map(|r| r.mean_gap_sigma.powi(2)).sum::<f64>().sqrt() / k;
            let target = 1.0 - delta / 2.0;
            let bound = reports[0].gap_bound;
            let pass = freq >= target - 3.0 * freq_sigma && gap <= bound + 3.0 * gap_sigma;
            pooled.push(row![eps, delta, draws, freq, freq_sigma, target, gap, gap_sigma, bound, pass]);
            checks.push(check(
                &format!("gap_eps{eps}_delta{delta}"),
                pass,
                format!("frequency {freq:.4} (target {target:.3}), mean gap {gap:.5} (bound {bound:.5})"),
            ));
        }
    }
    Ok(ExperimentOutput { tables: vec![pooled, per_instance], checks })
}

// --------------------------------------------------------------- sandwich

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SandwichParams {
    /// Randomized cases per middle construction.
    pub cases: usize,
    /// Union-of-balls instances that get set-inclusion probes.
    pub inclusion_instances: usize,
    pub inclusion_probes: usize,
}

impl Default for SandwichParams {
    fn default() -> Self {
        Self { cases: 500, inclusion_instances: 20, inclusion_probes: 10_000 }
    }
}

impl SandwichParams {
    pub fn validate(&self) -> Result<()> {
        nonzero("cases", self.cases)?;
        nonzero("inclusion_probes", self.inclusion_probes)
    }
}

fn hypothesis_kind(h: &Hypothesis) -> &'static str {
    match h {
        Hypothesis::Linear { .. } => "linear",
        Hypothesis::SphereBoundary { .. } => "sphere",
        Hypothesis::Table(_) => "table",
    }
}

pub fn run_sandwich(p: &SandwichParams, seed: u64) -> Result<ExperimentOutput> {
    p.validate()?;
    let mut table = Table::new(
        "cases",
        &[
            ("case", "case index within its construction"),
            ("middle", "grid or balls"),
            ("hypothesis", "linear or sphere"),
            ("label", "example label"),
            ("middle_count", "points or balls in the middle region"),
            ("loss_lower", "robust loss on U^(r-alpha)"),
            ("loss_middle", "robust loss on V^r"),
            ("loss_upper", "robust loss on U^r"),
            ("certified", "regularity certificate passed (grid middles only)"),
            ("violation", "loss ordering broken"),
        ],
    );
    let mut checks = Vec::new();
    for (balls, name) in [(false, "grid"), (true, "balls")] {
        let seeds = instance_seeds(seed, &format!("sandwich/{name}"), p.cases);
        let rows = seeds
            .par_iter()
            .map(|&s| {
                let c = random_sandwich_case(balls, s)?;
                let rep = sandwich_audit(
                    &c.triple,
                    std::slice::from_ref(&c.hypothesis),
                    std::slice::from_ref(&c.example),
                    s,
                )?;
                let losses = [&c.triple.lower, &c.triple.middle, &c.triple.upper]
                    .map(|r| c.hypothesis.robust_violation(r, c.example.y).map(|v| v as usize));
                let [l, m, u] = losses;
                let certified = rep.certificates[0].as_ref().map(|cert| cert.passed());
                Ok((c, l?, m?, u?, certified, !rep.violations.is_empty()))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut violations = 0;
        let mut uncertified = 0;
        let mut spread = [0usize; 2];
        for (i, (c, l, m, u, cert, bad)) in rows.iter().enumerate() {
            violations += *bad as usize;
            uncertified += (*cert == Some(false)) as usize;
            spread[*u] += 1;
            table.push(row![
                i,
                name,
                hypothesis_kind(&c.hypothesis),
                c.example.y.sign() as i64,
                c.triple.middle_count(),
                *l,
                *m,
                *u,
                *cert,
                *bad,
            ]);
        }
        checks.push(check(
            &format!("{name}_sandwich"),
            violations == 0 && uncertified == 0,
            format!(
                "{violations} violations, {uncertified} uncertified hypotheses over {} cases (upper loss 0/1 split {spread:?})",
                p.cases
            ),
        ));
        if balls {
            let k = p.inclusion_instances.min(rows.len());
            let reps = rows[..k]
                .par_iter()
                .enumerate()
                .map(|(i, r)| {
                    inclusion_probe_audit(
                        &r.0.triple,
                        p.inclusion_probes,
                        seed_derive_indexed(seed, "sandwich/probe", i as u64),
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            let escapes: usize = reps.iter().map(|r| r.lower_escapes + r.middle_escapes).sum();
            checks.push(check(
                "balls_set_inclusion",
                escapes == 0,
                format!("{escapes} escapes over {k} instances with {} probes per set", p.inclusion_probes),
            ));
        }
    }
    // negative control: a table that is wrong on the lower region only
    let base = Region::ball(Vector::zeros(2), 0.3)?;
    let triple = build_v_grid(&base, 0.6, 0.2)?;
    let h = non_regular_counterexample(&triple, Label::Pos)?;
    let ex = LabeledExample::new(Vector::zeros(2), Label::Pos);
    let rep = sandwich_audit(&triple, &[h], &[ex], seed_derive(seed, "sandwich/control"))?;
    let caught = rep.violations.len() == 1 && !rep.violations[0].certified_regular;
    checks.push(check(
        "negative_control_detected",
        caught,
        format!("{} violations, losses {:?}", rep.violations.len(), rep.violations.first().map(|v| v.losses)),
    ));
    Ok(ExperimentOutput { tables: vec![table], checks })
}

// ------------------------------------------------------------ lb game

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LbGameParams {
    pub m: usize,
    pub d: usize,
    pub w_bound: f64,
    pub trials: usize,
    /// Anchors the learner sees; defaults to `m`.
    pub n_samples: Option<usize>,
    pub learners: Vec<Learner>,
    /// Size of the random net used for the positivity check.
    pub net_size: usize,
    pub cap_probes: usize,
}

impl Default for LbGameParams {
    fn default() -> Self {
        Self {
            m: 2,
            d: 2,
            w_bound: 1.0,
            trials: 10_000,
            n_samples: None,
            learners: vec![Learner::ErmLowestIndex, Learner::RandomConsistent, Learner::Omniscient],
            net_size: 10_000,
            cap_probes: 100_000,
        }
    }
}

impl LbGameParams {
    pub fn validate(&self) -> Result<()> {
        if !(1..=crate::lb_linear::MAX_M).contains(&self.m) {
            return Err(invalid("m", format!("must lie in 1..={}", crate::lb_linear::MAX_M)));
        }
        if self.d < 2 {
            return Err(invalid("d", "must be at least 2"));
        }
        positive("w_bound", self.w_bound)?;
        nonzero("trials", self.trials)?;
        nonzero("net_size", self.net_size)?;
        nonzero("cap_probes", self.cap_probes)
    }
}

pub fn run_lb_game(p: &LbGameParams, seed: u64) -> Result<ExperimentOutput> {
    p.validate()?;
    let inst = build_lb_instance(p.m, p.w_bound, p.d, seed_derive(seed, "lb/instance"))?;
    let mut checks = Vec::new();

    let stip2 = inst.shatter.stipulation2_exceptions();
    checks.push(check(
        "witness_negative_off_cell",
        stip2.is_empty(),
        format!(
            "{} (witness, cell) exceptions over {} cell samples",
            stip2.len(),
            inst.shatter.cells.iter().map(Vec::len).sum::<usize>()
        ),
    ));
    let net = BoundedLinearClass::new(p.w_bound, p.d)?.random_net(p.net_size, seed_derive(seed, "lb/net"));
    let stip1 = inst.shatter.stipulation1_failures(&net);
    checks.push(check(
        "net_positive_somewhere",
        stip1.is_empty(),
        format!("{} of {} net hypotheses negative on every cell sample", stip1.len(), p.net_size),
    ));
    let x = inst.shatter.cover.centers[0].scale(1.0 / (1.0 + inst.shatter.beta));
    let miss = cap_identity_mismatch(&x, p.w_bound, inst.shatter.beta, p.cap_probes, seed_derive(seed, "lb/cap"))?;
    checks.push(check("cap_identity", miss < 1e-3, format!("symmetric difference {miss:.2e}")));

    let table = inst.cross_loss_table()?;
    let cells = inst.cells();
    let realizable = (0..cells).filter(|&t| table[t][t] == 0.0).count();
    checks.push(check(
        "witnesses_realizable",
        realizable == cells,
        format!("{realizable} of {cells} witnesses have zero loss on their own distribution"),
    ));
    let mismatches = (0..cells)
        .flat_map(|t| (0..cells).map(move |s| (t, s)))
        .filter(|&(t, s)| table[t][s] != inst.cross_loss_formula(t, s))
        .count();
    checks.push(check(
        "cross_loss_formula",
        mismatches == 0,
        format!("{mismatches} of {} pairs differ from 1/2 - |T∩T'|/(2m)", cells * cells),
    ));

    let mut games = Table::new(
        "games",
        &[
            ("learner", "learning rule"),
            ("m", "subset size"),
            ("cells", "number of subsets"),
            ("n_samples", "anchors shown to the learner"),
            ("trials", "game rounds"),
            ("mean_loss", "mean robust loss of the output"),
            ("mean_sigma", "standard error of mean_loss"),
            ("freq_above_eighth", "fraction of rounds with loss > 1/8"),
            ("freq_sigma", "standard error of freq_above_eighth"),
        ],
    );
    let n_samples = p.n_samples.unwrap_or(p.m);
    for &learner in &p.learners {
        let label = serde_json::to_value(learner).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default();
        let g =
            run_adversarial_game(&inst, learner, n_samples, p.trials, seed_derive(seed, &format!("lb/game/{label}")))?;
        games.push(row![
            label.clone(),
            p.m,
            cells,
            n_samples,
            p.trials,
            g.mean_loss,
            g.mean_sigma,
            g.freq_loss_above_eighth,
            g.freq_sigma
        ]);
        if learner != Learner::Omniscient {
            checks.push(check(
                &format!("{label}_mean_loss"),
                g.mean_loss >= 0.25 - 3.0 * g.mean_sigma,
                format!("mean {:.4} +- {:.4}, need >= 0.25 - 3 sigma", g.mean_loss, g.mean_sigma),
            ));
            checks.push(check(
                &format!("{label}_tail"),
                g.freq_loss_above_eighth >= 1.0 / 7.0 - 3.0 * g.freq_sigma,
                format!(
                    "Pr[loss > 1/8] = {:.4} +- {:.4}, need >= 1/7 - 3 sigma",
                    g.freq_loss_above_eighth, g.freq_sigma
                ),
            ));
        }
    }
    let mut cross = Table::new(
        "cross_loss",
        &[
            ("t", "witness index"),
            ("s", "distribution index"),
            ("loss", "robust loss of witness t under distribution s"),
            ("formula", "1/2 - |T_t ∩ T_s|/(2m)"),
        ],
    );
    for (t, losses) in table.iter().enumerate() {
        for (s, &loss) in losses.iter().enumerate() {
            cross.push(row![t, s, loss, inst.cross_loss_formula(t, s)]);
        }
    }
    Ok(ExperimentOutput { tables: vec![games, cross], checks })
}

// ------------------------------------------------------------ oracle game

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleQueryParams {
    pub gamma: f64,
    pub diameters: Vec<f64>,
    pub dims: Vec<usize>,
    pub budgets: Vec<usize>,
    pub trials: usize,
    pub measure_samples: usize,
    pub symmetry_queries: usize,
    /// Query cap per trial in the threshold-scaling fit.
    pub scaling_max_budget: usize,
}

impl Default for OracleQueryParams {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            diameters: vec![20.0, 50.0, 110.0],
            dims: vec![1, 2, 3],
            budgets: vec![0, 1, 2, 5, 10, 20, 50, 100, 200, 500, 1000, 2000, 5000, 10_000],
            trials: 10_000,
            measure_samples: 1_000_000,
            symmetry_queries: 100_000,
            scaling_max_budget: 1_000_000,
        }
    }
}

impl OracleQueryParams {
    pub fn validate(&self) -> Result<()> {
        positive("gamma", self.gamma)?;
        if self.diameters.is_empty() || self.diameters.iter().any(|&d| d.is_nan() || d <= 10.0 * self.gamma) {
            return Err(invalid("diameters", "must be nonempty with every D > 10 gamma"));
        }
        if self.dims.is_empty() || self.dims.iter().any(|&d| d == 0 || d > 4) {
            return Err(invalid("dims", "must be nonempty and within 1..=4"));
        }
        if self.budgets.is_empty() || self.budgets.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("budgets", "must be nonempty and increasing"));
        }
        nonzero("trials", self.trials)?;
        nonzero("measure_samples", self.measure_samples)?;
        nonzero("symmetry_queries", self.symmetry_queries)?;
        nonzero("scaling_max_budget", self.scaling_max_budget)
    }
}

pub fn run_oracle_query(p: &OracleQueryParams, seed: u64) -> Result<ExperimentOutput> {
    p.validate()?;
    let mut sweep = Table::new(
        "sweep",
        &[
            ("d", "dimension"),
            ("diameter", "instance diameter D"),
            ("budget", "oracle queries k"),
            ("excess_error", "excess robust loss of the budget-k learner"),
            ("sigma", "standard error of excess_error"),
            ("ci_low", "95% Wilson lower limit"),
            ("ci_high", "95% Wilson upper limit"),
            ("lower_curve", "(1/4)(1 - bound)^k with the (3.5 gamma / D0)^d bound"),
        ],
    );
    let mut measure = Table::new(
        "measure",
        &[
            ("d", "dimension"),
            ("diameter", "instance diameter D"),
            ("samples", "uniform draws from V^gamma"),
            ("p_hat", "fraction outside U^gamma"),
            ("sigma", "binomial standard error"),
            ("bound", "(3.5 gamma / D0)^d"),
            ("volume_ratio_bound", "(3.5 gamma / (D0/2 + gamma))^d"),
            ("exact", "closed form in one dimension"),
            ("within_bound", "p_hat <= bound + 3 sigma"),
            ("within_volume_ratio_bound", "p_hat <= volume_ratio_bound + 3 sigma"),
        ],
    );
    let mut scaling = Table::new(
        "scaling",
        &[
            ("d", "dimension"),
            ("diameter", "instance diameter D"),
            ("d0_over_gamma", "D0 / gamma"),
            ("threshold", "smallest budget with excess error < 1/8"),
            ("slope", "least-squares slope of log threshold on log(D0/gamma)"),
        ],
    );
    let mut checks = Vec::new();
    let table_inst = build_query_instance(p.diameters[0], p.gamma, p.dims[0])?;
    let lt = table_inst.loss_table()?;
    checks.push(check(
        "loss_table",
        lt == [[0.0, 0.5], [1.0, 0.5]],
        format!("[[l_U(h1), l_U(h2)], [l_V(h1), l_V(h2)]] = {lt:?}"),
    ));
    let mut measure_bad = Vec::new();
    let mut ratio_bad = 0usize;
    let mut exact_ok = true;
    let mut zero_values = Vec::new();
    let mut curve_bad = Vec::new();
    let mut zero_ok = true;
    for &d in &p.dims {
        for (j, &diam) in p.diameters.iter().enumerate() {
            let inst = build_query_instance(diam, p.gamma, d)?;
            let cell = (d * 1000 + j) as u64;
            let m = measure_bound_audit(&inst, p.measure_samples, seed_derive_indexed(seed, "oracle/measure", cell))?;
            if !m.within_bound() {
                measure_bad.push(format!("(d={d}, D={diam}): {:.3e} > {:.3e}", m.p_hat, m.bound));
            }
            ratio_bad += !m.within_volume_ratio_bound() as usize;
            exact_ok &= m.matches_exact().unwrap_or(true);
            measure.push(row![
                d,
                diam,
                m.samples,
                m.p_hat,
                m.sigma,
                m.bound,
                m.volume_ratio_bound,
                m.exact,
                m.within_bound(),
                m.within_volume_ratio_bound()
            ]);
            let res = run_query_game(&inst, &p.budgets, p.trials, seed_derive_indexed(seed, "oracle/sweep", cell))?;
            let bound = inst.stated_bound();
            for (i, &k) in res.budgets.iter().enumerate() {
                let (lo, hi) = res.conf_intervals[i];
                sweep.push(row![
                    d,
                    diam,
                    k,
                    res.excess_error[i],
                    res.sigma[i],
                    lo,
                    hi,
                    0.25 * (1.0 - bound).powi(k as i32)
                ]);
            }
            if res.budgets[0] == 0 {
                zero_ok &= (res.excess_error[0] - 0.25).abs() <= 0.02;
                zero_values.push(res.excess_error[0]);
            }
            curve_bad.extend(res.lower_curve_violations(bound).into_iter().map(|k| (d, diam, k)));
        }
        let (points, slope) = threshold_scaling(
            &p.diameters,
            p.gamma,
            d,
            p.trials,
            p.scaling_max_budget,
            seed_derive_indexed(seed, "oracle/scaling", d as u64),
        )?;
        for pt in &points {
            scaling.push(row![d, pt.diameter, pt.d0_over_gamma, pt.threshold, slope]);
        }
        checks.push(check(
            &format!("threshold_slope_d{d}"),
            slope.is_some_and(|s| s >= d as f64 - 0.5),
            format!("slope {slope:?}, need >= {}", d as f64 - 0.5),
        ));
    }
    let sym = anchor_symmetry_audit(&table_inst, p.symmetry_queries, seed_derive(seed, "oracle/symmetry"))?;
    checks.push(check(
        "anchor_symmetry",
        sym.symmetric(),
        format!("detection frequency {:.5} at v vs {:.5} at -v", sym.freq_pos, sym.freq_neg),
    ));
    let cells = p.dims.len() * p.diameters.len();
    checks.push(check(
        "measure_bound",
        measure_bad.is_empty(),
        format!(
            "{} of {cells} cells exceed (3.5 gamma/D0)^d + 3 sigma {:?}; {ratio_bad} exceed the volume-ratio bound",
            measure_bad.len(),
            measure_bad
        ),
    ));
    checks.push(check(
        "measure_exact_1d",
        exact_ok,
        "one-dimensional p_hat within 3 sigma of the interval formula".into(),
    ));
    let zero_range = zero_values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    checks.push(check(
        "budget_zero_excess",
        zero_ok,
        format!("excess error at k = 0 spans [{:.4}, {:.4}], need 0.25 +- 0.02", zero_range.0, zero_range.1),
    ));
    checks.push(check(
        "excess_above_lower_curve",
        curve_bad.is_empty(),
        format!(
            "{} (d, D, k) cells more than 3 sigma below the curve: {:?}",
            curve_bad.len(),
            curve_bad.iter().take(8).collect::<Vec<_>>()
        ),
    ));
    Ok(ExperimentOutput { tables: vec![sweep, measure, scaling], checks })
}

// -------------------------------------------------------------- robust vc

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RobustVcParams {
    pub d_grid: Vec<usize>,
    pub k_grid: Vec<usize>,
    pub sauer_sizes: Vec<usize>,
    pub sauer_per_size: usize,
    pub equivalence_classes: usize,
    pub equivalence_universe: usize,
    pub union_samples: usize,
    pub subset_budget: u64,
}

impl Default for RobustVcParams {
    fn default() -> Self {
        Self {
            d_grid: vec![1, 2, 3],
            k_grid: vec![1, 2, 3],
            sauer_sizes: vec![1, 2, 3, 4],
            sauer_per_size: 200,
            equivalence_classes: 10,
            equivalence_universe: 8,
            union_samples: 20,
            subset_budget: crate::robust_vc::DEFAULT_SUBSET_BUDGET,
        }
    }
}

impl RobustVcParams {
    pub fn validate(&self) -> Result<()> {
        if self.d_grid.is_empty() || self.d_grid.iter().any(|d| !(1..=3).contains(d)) {
            return Err(invalid("d_grid", "entries must lie in 1..=3"));
        }
        if self.k_grid.is_empty() || self.k_grid.iter().any(|&k| k == 0 || k > 5) {
            return Err(invalid("k_grid", "entries must lie in 1..=5"));
        }
        if self.sauer_sizes.iter().any(|&m| m == 0 || m > 12) {
            return Err(invalid("sauer_sizes", "entries must lie in 1..=12"));
        }
        if !(1..=16).contains(&self.equivalence_universe) {
            return Err(invalid("equivalence_universe", "must lie in 1..=16"));
        }
        nonzero("sauer_per_size", self.sauer_per_size)?;
        nonzero("subset_budget", self.subset_budget as usize)
    }
}

pub fn run_robust_vc(p: &RobustVcParams, seed: u64) -> Result<ExperimentOutput> {
    p.validate()?;
    let mut checks = Vec::new();

    // robust VC with singleton regions against the plain 0-1 loss class
    let mut equiv = Table::new(
        "equivalence",
        &[
            ("class", "class index"),
            ("size", "hypotheses in the class"),
            ("robust_lower", "robust VC lower bound with singleton regions"),
            ("robust_upper", "certified robust VC upper bound"),
            ("zero_one_lower", "0-1 loss-class VC lower bound"),
            ("zero_one_upper", "certified 0-1 loss-class VC upper bound"),
            ("equal", "both certified and equal"),
        ],
    );
    let mut equal_all = true;
    let singletons = RegionFamily::uniform_balls(0.0)?;
    for (i, s) in instance_seeds(seed, "vc/equivalence", p.equivalence_classes).into_iter().enumerate() {
        let mut rng = rng_from_seed(s);
        let shape = TaskShape {
            linear_hypotheses: 6 + 2 * i,
            sphere_hypotheses: 2 + i,
            box_half_width: 2.0,
            ..TaskShape::default()
        };
        let class = random_regular_class(&shape, &mut rng)?;
        let universe: Vec<LabeledExample> = (0..p.equivalence_universe)
            .map(|j| {
                let x = Vector::from([
                    rand::Rng::random_range(&mut rng, -2.0..=2.0),
                    rand::Rng::random_range(&mut rng, -2.0..=2.0),
                ]);
                LabeledExample::new(x, if j % 2 == 0 { Label::Pos } else { Label::Neg })
            })
            .collect();
        let robust = robust_vc_search(&class, &singletons, &universe, universe.len(), p.subset_budget)?;
        let plain =
            vc_from_matrix(&zero_one_matrix(&class, &universe)?, universe.len(), universe.len(), p.subset_budget)?;
        let equal = robust.certified().is_some() && robust.certified() == plain.certified();
        equal_all &= equal;
        equiv.push(row![
            i,
            class.len(),
            robust.dimension_lower,
            robust.dimension_upper,
            plain.dimension_lower,
            plain.dimension_upper,
            equal
        ]);
    }
    checks.push(check(
        "singleton_equivalence",
        equal_all,
        format!("robust and 0-1 VC certified equal on all {} classes", p.equivalence_classes),
    ));

    // overhead table
    let rows = overhead_audit(&p.d_grid, &p.k_grid, seed_derive(seed, "vc/overhead"))?;
    let mut overhead = Table::new(
        "overhead",
        &[
            ("d", "ordinary VC dimension of the class"),
            ("k", "points per region"),
            ("vc_lower", "largest robustly shattered subset found"),
            ("vc_upper", "certified upper bound"),
            ("bound_value", "sum_{i<=d} C(km, i) at m = vc_upper"),
            ("pass", "2^m <= bound_value with a certified m"),
        ],
    );
    for r in &rows {
        overhead.push(row![r.d, r.k, r.vc_lower, r.vc_upper, r.bound_value, r.pass]);
    }
    let overhead_ok = rows.iter().all(|r| r.pass);
    checks.push(check("overhead_bound", overhead_ok, format!("{} (d, k) rows", rows.len())));

    // Sauer chain and the labeling-to-pattern correspondence
    let mut sauer = Table::new(
        "sauer",
        &[
            ("d", "ordinary VC dimension of the class"),
            ("k", "points per region"),
            ("m", "sample size"),
            ("samples", "samples scanned"),
            ("max_achieved", "largest loss-pattern count"),
            ("max_labelings", "largest labeling count on T"),
            ("worst_ratio", "largest achieved / (C |T|^v)"),
            ("sauer_violations", "samples breaking achieved <= labelings <= Phi_v(|T|) <= C |T|^v"),
            ("distinct_pattern_pairs", "hypothesis pairs with distinct loss patterns"),
            ("correspondence_violations", "labelings of T mapping to two loss patterns"),
        ],
    );
    let (mut sauer_bad, mut corr_bad, mut pairs_total) = (0usize, 0usize, 0u64);
    for &d in &p.d_grid {
        for &k in &p.k_grid {
            let (class, family, universe) = overhead_instance(d, k, seed_derive(seed, "vc/overhead"))?;
            let sizes: Vec<usize> = p.sauer_sizes.iter().copied().filter(|&m| m <= universe.len()).collect();
            let audits = sauer_audit(
                &class,
                &family,
                &universe,
                &sizes,
                p.sauer_per_size,
                seed_derive_indexed(seed, "vc/sauer", (d * 10 + k) as u64),
            )?;
            for &m in &sizes {
                let these: Vec<_> = audits.iter().filter(|a| a.sample.len() == m).collect();
                let bad = these.iter().filter(|a| !a.sauer_ok()).count();
                let corr = these.iter().map(|a| a.correspondence_violations).sum::<usize>();
                let pairs = these.iter().map(|a| a.distinct_pattern_pairs).sum::<u64>();
                sauer_bad += bad;
                corr_bad += corr;
                pairs_total += pairs;
                sauer.push(row![
                    d,
                    k,
                    m,
                    these.len(),
                    these.iter().map(|a| a.achieved_patterns).max(),
                    these.iter().map(|a| a.labelings_t).max(),
                    these.iter().map(|a| a.achieved_patterns as f64 / a.bound_value).fold(0.0, f64::max),
                    bad,
                    pairs,
                    corr
                ]);
            }
        }
    }
    checks.push(check("sauer_chain", sauer_bad == 0, format!("{sauer_bad} samples break the chain")));
    checks.push(check(
        "labeling_correspondence",
        corr_bad == 0,
        format!("{corr_bad} violations over {pairs_total} distinct-pattern pairs"),
    ));

    // union-of-balls regions against the single-ball class
    let class = BoundedLinearClass::new(4.0, 2)?.grid_net_2d(36, 17)?;
    let mut union_bad = 0;
    for s in instance_seeds(seed, "vc/union", p.union_samples) {
        let mut rng = rng_from_seed(s);
        let m = rand::Rng::random_range(&mut rng, 2..=3);
        let sample: Vec<(LabeledExample, Vec<Vector>)> = (0..m)
            .map(|j| {
                let x = Vector::from([
                    rand::Rng::random_range(&mut rng, -3.0..=3.0),
                    rand::Rng::random_range(&mut rng, -3.0..=3.0),
                ]);
                let other = x.add(&Vector::from([
                    rand::Rng::random_range(&mut rng, -1.0..=1.0),
                    rand::Rng::random_range(&mut rng, -1.0..=1.0),
                ]));
                (LabeledExample::new(x.clone(), if j % 2 == 0 { Label::Pos } else { Label::Neg }), vec![x, other])
            })
            .collect();
        let c = union_of_balls_audit(&class, 0.5, &sample)?;
        union_bad += !c.passed() as usize;
    }
    checks.push(check(
        "union_of_balls_patterns",
        union_bad == 0,
        format!("{union_bad} of {} samples exceed the single-ball Sauer bound", p.union_samples),
    ));
    Ok(ExperimentOutput { tables: vec![overhead, sauer, equiv], checks })
}

// ------------------------------------------------------------ regularity

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegularityParams {
    pub probes: usize,
    pub alphas: Vec<f64>,
    pub sphere_radius: f64,
}

impl Default for RegularityParams {
    fn default() -> Self {
        Self { probes: 2_000, alphas: vec![0.5, 1.0, 1.5, 2.0, 2.5, 10.0], sphere_radius: 2.0 }
    }
}

impl RegularityParams {
    pub fn validate(&self) -> Result<()> {
        nonzero("probes", self.probes)?;
        if self.alphas.is_empty() {
            return Err(invalid("alphas", "must be nonempty"));
        }
        for &a in &self.alphas {
            positive("alphas", a)?;
        }
        positive("sphere_radius", self.sphere_radius)
    }
}

/// Certificates on a ball around the origin that contains every boundary,
/// compared with the exact rule: halfspaces and sphere exteriors are always
/// regular, a sphere interior iff `alpha <= R`, and a table with an
/// exception never.
pub fn run_regularity(p: &RegularityParams, seed: u64) -> Result<ExperimentOutput> {
    p.validate()?;
    let r = p.sphere_radius;
    // (name, hypothesis, largest regular alpha); the table is regular for no alpha
    let cases = [
        ("linear", Hypothesis::linear(Vector::from([1.0, 0.0]), 0.0)?, f64::INFINITY),
        ("sphere_pos_inside", Hypothesis::sphere(Vector::zeros(2), r, Label::Pos)?, r),
        ("sphere_neg_inside", Hypothesis::sphere(Vector::zeros(2), r, Label::Neg)?, r),
        (
            "table_one_exception",
            Hypothesis::table(2, vec![(Vector::from([0.5, 0.5]), Label::Neg)], Label::Pos)?,
            f64::NEG_INFINITY,
        ),
    ];
    let domain = Ball::new(Vector::zeros(2), 2.0 * r + 1.0)?;
    let mut table = Table::new(
        "certificates",
        &[
            ("hypothesis", "hypothesis family"),
            ("alpha", "regularity radius"),
            ("probes", "points checked"),
            ("failures", "points with no constant alpha-ball"),
            ("passed", "certificate passed"),
            ("expected", "value under the exact rule"),
        ],
    );
    let mut mismatches = Vec::new();
    for (i, (name, h, max_alpha)) in cases.iter().enumerate() {
        for (j, &alpha) in p.alphas.iter().enumerate() {
            let cert = regularity_check(
                h,
                alpha,
                p.probes,
                &domain,
                seed_derive_indexed(seed, "regularity", (i * 100 + j) as u64),
            )?;
            let expected = alpha <= *max_alpha;
            if cert.passed() != expected {
                mismatches.push(format!("{name} at alpha {alpha}"));
            }
            table.push(row![*name, alpha, cert.probes, cert.failures.len(), cert.passed(), expected]);
        }
    }
    Ok(ExperimentOutput {
        tables: vec![table],
        checks: vec![check("certificates_match_rule", mismatches.is_empty(), format!("mismatches: {mismatches:?}"))],
    })
}

/// Parameters for any experiment.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Params {
    TolrermSweep(TolrermSweepParams),
    InflationGap(InflationGapParams),
    Sandwich(SandwichParams),
    LbGame(LbGameParams),
    OracleQuery(OracleQueryParams),
    RobustVc(RobustVcParams),
    Regularity(RegularityParams),
}

impl Params {
    pub fn default_for(e: Experiment) -> Params {
        match e {
            Experiment::TolrermSweep => Params::TolrermSweep(Default::default()),
            Experiment::InflationGapAudit => Params::InflationGap(Default::default()),
            Experiment::SandwichAudit => Params::Sandwich(Default::default()),
            Experiment::LbLinearGame => Params::LbGame(Default::default()),
            Experiment::OracleQuerySweep => Params::OracleQuery(Default::default()),
            Experiment::RobustVcAudit => Params::RobustVc(Default::default()),
            Experiment::RegularityCheck => Params::Regularity(Default::default()),
        }
    }

    /// Strict parse of an experiment's parameter map; missing keys take defaults.
    pub fn from_json(e: Experiment, value: serde_json::Value) -> serde_json::Result<Params> {
        use serde_json::from_value as parse;
        Ok(match e {
            Experiment::TolrermSweep => Params::TolrermSweep(parse(value)?),
            Experiment::InflationGapAudit => Params::InflationGap(parse(value)?),
            Experiment::SandwichAudit => Params::Sandwich(parse(value)?),
            Experiment::LbLinearGame => Params::LbGame(parse(value)?),
            Experiment::OracleQuerySweep => Params::OracleQuery(parse(value)?),
            Experiment::RobustVcAudit => Params::RobustVc(parse(value)?),
            Experiment::RegularityCheck => Params::Regularity(parse(value)?),
        })
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Params::TolrermSweep(p) => p.validate(),
            Params::InflationGap(p) => p.validate(),
            Params::Sandwich(p) => p.validate(),
            Params::LbGame(p) => p.validate(),
            Params::OracleQuery(p) => p.validate(),
            Params::RobustVc(p) => p.validate(),
            Params::Regularity(p) => p.validate(),
        }
    }
}

pub fn run(params: &Params, seed: u64) -> Result<ExperimentOutput> {
    match params {
        Params::TolrermSweep(p) => run_tolrerm_sweep(p, seed),
        Params::InflationGap(p) => run_inflation_gap(p, seed),
        Params::Sandwich(p) => run_sandwich(p, seed),
        Params::LbGame(p) => run_lb_game(p, seed),
        Params::OracleQuery(p) => run_oracle_query(p, seed),
        Params::RobustVc(p) => run_robust_vc(p, seed),
        Params::Regularity(p) => run_regularity(p, seed),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_cells_round_trip() {
        for v in [0.0, 0.25, 1e-3, 1.2e-9, 5.8e-300, 3e20, -4e-7] {
            let s = Cell::Float(v).to_string();
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
            assert!(s.len() < 26, "{s}");
        }
    }

    #[test]
    fn names_round_trip() {
        for e in Experiment::ALL {
            let v = serde_json::to_value(e).unwrap();
            assert_eq!(v.as_str().unwrap(), e.name());
        }
    }

    #[test]
    fn regularity_matches_rule() {
        let out = run_regularity(&RegularityParams { probes: 300, ..Default::default() }, 1).unwrap();
        assert!(out.passed(), "{:?}", out.checks);
    }

    #[test]
    fn small_sandwich_run() {
        let p = SandwichParams { cases: 20, inclusion_instances: 2, inclusion_probes: 500 };
        let out = run_sandwich(&p, 3).unwrap();
        assert!(out.passed(), "{:?}", out.checks);
        assert_eq!(out.tables[0].rows.len(), 40);
    }

    #[test]
    fn params_parse_strictly() {
        let v = serde_json::json!({"cases": 3});
        let Params::Sandwich(p) = Params::from_json(Experiment::SandwichAudit, v).unwrap() else { panic!() };
        assert_eq!(p.cases, 3);
        assert_eq!(p.inclusion_probes, 10_000);
        let bad = serde_json::json!({"cases": 3, "typo": 1});
        assert!(Params::from_json(Experiment::SandwichAudit, bad).is_err());
        let int_for_float = serde_json::json!({"gamma": 1});
        assert!(Params::from_json(Experiment::OracleQuerySweep, int_for_float).is_ok());
    }

    #[test]
    fn invalid_params_rejected() {
        let p = TolrermSweepParams { gamma: -1.0, ..Default::default() };
        assert!(run_tolrerm_sweep(&p, 0).is_err());
        let p = OracleQueryParams { diameters: vec![5.0], ..Default::default() };
        assert!(p.validate().is_err());
    }
}
