//! Query lower bound for learners that only see perturbation sets through a
//! uniform sampling oracle.
//!
//! Two anchors `±v` carry balls `U_x = B(x, D0/2)`. The alternative family
//! `V_x = U_x ∪ B(±v', 5γ/2)` adds a small ball near the origin that makes the
//! two regions overlap, which flips the optimal classifier. A learner can
//! only tell the families apart by drawing a point outside `U^γ`, and that
//! region has small measure.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{Ball, Vector};
use crate::model::{robust_loss_distribution, DiscreteDistribution, FiniteClass, Hypothesis, Label, LabeledExample};
use crate::perturbation::{Region, RegionFamily, RegionSampler};
use crate::rng::{rng_from_seed, seed_derive_indexed};
use crate::stats::{binomial_sigma, ols_slope, wilson_interval, Z95};

/// The two-anchor construction for diameter `D` and tolerance `gamma`.
#[derive(Clone, Debug, PartialEq)]
pub struct QueryInstance {
    pub diameter: f64,
    pub gamma: f64,
    pub d: usize,
    /// `D0 = D - 9 gamma`.
    pub d0: f64,
    /// `v = (D0/2 + 4 gamma) e1`.
    pub v: Vector,
    /// `v' = 2 gamma e1`.
    pub v_prime: Vector,
    pub family_u: RegionFamily,
    pub family_u_gamma: RegionFamily,
    pub family_v: RegionFamily,
    pub family_v_gamma: RegionFamily,
    /// `h1 = sgn <e1, .>` and `h2 = sgn(<e1, .> - D0 - 4 gamma)`.
    pub class: FiniteClass,
    /// Uniform on `(v, +1)` and `(-v, -1)`.
    pub distribution: DiscreteDistribution,
}

pub fn build_query_instance(diameter: f64, gamma: f64, d: usize) -> Result<QueryInstance> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(invalid("gamma", "must be finite and positive"));
    }
    if !(diameter.is_finite() && diameter > 10.0 * gamma) {
        return Err(invalid("D", format!("need D > 10 gamma, got D = {diameter}, gamma = {gamma}")));
    }
    if d == 0 {
        return Err(invalid("d", "must be at least 1"));
    }
    let d0 = diameter - 9.0 * gamma;
    let e1 = Vector::basis(d, 0);
    let v = e1.scale(d0 / 2.0 + 4.0 * gamma);
    let v_prime = e1.scale(2.0 * gamma);

    let mut family_u = RegionFamily::new();
    let mut family_v = RegionFamily::new();
    for sign in [1.0, -1.0] {
        let x = v.scale(sign);
        let xp = v_prime.scale(sign);
        family_u.insert(x.clone(), Region::ball(x.clone(), d0 / 2.0)?)?;
        family_v.insert(
            x.clone(),
            Region::union_of_balls(vec![Ball::new(x.clone(), d0 / 2.0)?, Ball::new(xp, 2.5 * gamma)?])?,
        )?;
    }
    let family_u_gamma = family_u.expand(gamma)?;
    let family_v_gamma = family_v.expand(gamma)?;

    let class = FiniteClass::new(vec![
        Hypothesis::linear(e1.clone(), 0.0)?,
        Hypothesis::linear(e1.clone(), -(d0 + 4.0 * gamma))?,
    ])?;
    let distribution = DiscreteDistribution::new(vec![
        (LabeledExample::new(v.clone(), Label::Pos), 0.5),
        (LabeledExample::new(v.scale(-1.0), Label::Neg), 0.5),
    ])?;
    let inst = QueryInstance {
        diameter,
        gamma,
        d,
        d0,
        v,
        v_prime,
        family_u,
        family_u_gamma,
        family_v,
        family_v_gamma,
        class,
        distribution,
    };
    inst.check_geometry()?;
    Ok(inst)
}

impl QueryInstance {
    pub fn anchors(&self) -> [Vector; 2] {
        [self.v.clone(), self.v.scale(-1.0)]
    }

    fn balls(family: &RegionFamily, x: &Vector) -> Vec<Ball> {
        match family.assigned(x).expect("anchor assigned") {
            Region::Ball(b) => vec![b.clone()],
            Region::UnionOfBalls(bs) => bs.clone(),
            other => unreachable!("unexpected region {other:?}"),
        }
    }

    /// Disjoint `U` regions, intersecting `V` regions, and every `U` region
    /// inside its `U^gamma`, all by center-distance arithmetic.
    pub fn check_geometry(&self) -> Result<()> {
        let [a, b] = self.anchors();
        let u_a = Self::balls(&self.family_u, &a);
        let u_b = Self::balls(&self.family_u, &b);
        if u_a[0].intersects(&u_b[0]) {
            return Err(Error::AuditFailure("U regions of the two anchors intersect".into()));
        }
        let v_a = Self::balls(&self.family_v, &a);
        let v_b = Self::balls(&self.family_v, &b);
        if !v_a.iter().any(|p| v_b.iter().any(|q| p.intersects(q))) {
            return Err(Error::AuditFailure("V regions of the two anchors are disjoint".into()));
        }
        for x in [&a, &b] {
            let u = &Self::balls(&self.family_u, x)[0];
            let ug = &Self::balls(&self.family_u_gamma, x)[0];
            if u.center != ug.center || u.radius > ug.radius {
                return Err(Error::AuditFailure("U is not inside U^gamma".into()));
            }
        }
        Ok(())
    }

    /// `[[l_U(h1), l_U(h2)], [l_V(h1), l_V(h2)]]` under the instance distribution.
    pub fn loss_table(&self) -> Result<[[f64; 2]; 2]> {
        let mut t = [[0.0; 2]; 2];
        for (row, fam) in [&self.family_u, &self.family_v].into_iter().enumerate() {
            for (col, h) in self.class.hypotheses().iter().enumerate() {
                t[row][col] = robust_loss_distribution(h, fam, &self.distribution)?;
            }
        }
        Ok(t)
    }

    /// The `U^gamma` ball of an anchor.
    pub fn u_gamma_ball(&self, x: &Vector) -> Ball {
        Self::balls(&self.family_u_gamma, x).remove(0)
    }

    /// `(3.5 gamma)^d / D0^d`.
    pub fn stated_bound(&self) -> f64 {
        (3.5 * self.gamma / self.d0).powi(self.d as i32)
    }

    /// `(3.5 gamma)^d / (D0/2 + gamma)^d`: the small ball's volume over the `U^gamma` volume.
    pub fn volume_ratio_bound(&self) -> f64 {
        (3.5 * self.gamma / (self.d0 / 2.0 + self.gamma)).powi(self.d as i32)
    }
}

/// Monte-Carlo estimate of the `V^gamma`-uniform mass of `V^gamma \ U^gamma`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureAudit {
    pub diameter: f64,
    pub gamma: f64,
    pub d: usize,
    pub samples: usize,
    pub p_hat: f64,
    pub sigma: f64,
    /// `(3.5 gamma)^d / D0^d`.
    pub bound: f64,
    /// `(3.5 gamma)^d / (D0/2 + gamma)^d`.
    pub volume_ratio_bound: f64,
    /// Closed-form value in one dimension.
    pub exact: Option<f64>,
}

impl MeasureAudit {
    pub fn within_bound(&self) -> bool {
        self.p_hat <= self.bound + 3.0 * self.sigma
    }

    pub fn within_volume_ratio_bound(&self) -> bool {
        self.p_hat <= self.volume_ratio_bound + 3.0 * self.sigma
    }

    pub fn matches_exact(&self) -> Option<bool> {
        self.exact.map(|e| (self.p_hat - e).abs() <= 3.0 * self.sigma.max(binomial_sigma(e, self.samples)))
    }
}

/// Total length of a union of closed intervals.
fn union_length(mut iv: Vec<(f64, f64)>) -> f64 {
    iv.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut total = 0.0;
    let mut cur: Option<(f64, f64)> = None;
    for (lo, hi) in iv {
        match cur {
            Some((cl, ch)) if lo <= ch => cur = Some((cl, ch.max(hi))),
            Some((cl, ch)) => {
                total += ch - cl;
                cur = Some((lo, hi));
            }
            None => cur = Some((lo, hi)),
        }
    }
    total + cur.map_or(0.0, |(l, h)| h - l)
}

pub fn measure_bound_audit(inst: &QueryInstance, n_mc: usize, seed: u64) -> Result<MeasureAudit> {
    if inst.d > 4 {
        return Err(invalid("d", "volume estimates are limited to d <= 4"));
    }
    if n_mc == 0 {
        return Err(invalid("n_mc", "must be positive"));
    }
    let x = inst.v.clone();
    let vg = inst.family_v_gamma.assigned(&x).expect("anchor assigned").clone();
    let ug = inst.u_gamma_ball(&x);
    let chunks = 64usize;
    let per = n_mc.div_ceil(chunks);
    let outside: usize = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let take = per.min(n_mc.saturating_sub(c * per));
            let mut rng = rng_from_seed(seed_derive_indexed(seed, "measure/chunk", c as u64));
            let mut sampler = RegionSampler::new(&vg)?;
            let mut k = 0;
            for _ in 0..take {
                k += !ug.contains(&sampler.sample(&mut rng)?) as usize;
            }
            Ok(k)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum();
    let p_hat = outside as f64 / n_mc as f64;
    let exact = (inst.d == 1).then(|| {
        let Region::UnionOfBalls(bs) = &vg else { unreachable!() };
        let total = union_length(
            bs.iter().map(|b| (b.center.coords()[0] - b.radius, b.center.coords()[0] + b.radius)).collect(),
        );
        let inside = 2.0 * ug.radius;
        (total - inside) / total
    });
    Ok(MeasureAudit {
        diameter: inst.diameter,
        gamma: inst.gamma,
        d: inst.d,
        samples: n_mc,
        p_hat,
        sigma: binomial_sigma(p_hat, n_mc),
        bound: inst.stated_bound(),
        volume_ratio_bound: inst.volume_ratio_bound(),
        exact,
    })
}

/// Query index (1-based) of the first oracle draw from a `V` region that lies
/// outside `U^gamma`, querying `v` and `-v` alternately; `None` if no draw
/// among the first `max_queries` is outside.
pub fn first_detection<R: Rng + ?Sized>(
    inst: &QueryInstance,
    max_queries: usize,
    rng: &mut R,
) -> Result<Option<usize>> {
    let anchors = inst.anchors();
    let regions: Vec<&Region> = anchors.iter().map(|x| inst.family_v.assigned(x).expect("assigned")).collect();
    let mut samplers = regions.iter().map(|r| RegionSampler::new(r)).collect::<Result<Vec<_>>>()?;
    let shells: Vec<Ball> = anchors.iter().map(|x| inst.u_gamma_ball(x)).collect();
    for q in 0..max_queries {
        let a = q % 2;
        let z = samplers[a].sample(rng)?;
        if !shells[a].contains(&z) {
            return Ok(Some(q + 1));
        }
    }
    Ok(None)
}

/// Excess error per query budget.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuerySweepResult {
    pub budgets: Vec<usize>,
    pub excess_error: Vec<f64>,
    pub sigma: Vec<f64>,
    pub conf_intervals: Vec<(f64, f64)>,
    pub trials: usize,
    /// Trials where the adversary chose `V`.
    pub v_trials: usize,
    /// Detection query per trial (`None`: `U` chosen or never detected).
    pub detections: Vec<Option<usize>>,
}

impl QuerySweepResult {
    /// Smallest `k` with excess error below `level`, from the per-trial
    /// detection times; `None` if the cap was reached first.
    pub fn budget_below(&self, level: f64) -> Option<usize> {
        let n = self.trials as f64;
        let mut times: Vec<usize> = self.detections.iter().flatten().copied().collect();
        times.sort_unstable();
        let mut undetected = self.v_trials;
        if 0.5 * undetected as f64 / n < level {
            return Some(0);
        }
        for t in times {
            undetected -= 1;
            if 0.5 * undetected as f64 / n < level {
                return Some(t);
            }
        }
        None
    }

    /// Budgets at which the excess error falls more than `3 sigma` below
    /// `(1/4)(1 - bound)^k`. `sigma` is the binomial standard error at the
    /// curve value itself, which stays meaningful when no miss is observed.
    pub fn lower_curve_violations(&self, bound: f64) -> Vec<usize> {
        self.budgets
            .iter()
            .zip(&self.excess_error)
            .filter(|(&k, &e)| {
                let curve = 0.25 * (1.0 - bound).powi(k as i32);
                e < curve - 3.0 * 0.5 * binomial_sigma(2.0 * curve, self.trials)
            })
            .map(|(&k, _)| k)
            .collect()
    }

    /// Adjacent budget pairs where the curve rises by more than `3 sigma`.
    pub fn monotonicity_violations(&self) -> Vec<(usize, usize)> {
        (1..self.budgets.len())
            .filter(|&i| {
                let s = (self.sigma[i].powi(2) + self.sigma[i - 1].powi(2)).sqrt();
                self.excess_error[i] > self.excess_error[i - 1] + 3.0 * s
            })
            .map(|i| (self.budgets[i - 1], self.budgets[i]))
            .collect()
    }
}

/// Per trial the adversary picks `U` or `V` with probability 1/2. With `U`
/// every oracle draw lies in `U ⊆ U^gamma`, so nothing is detected. With `V`
/// the learner queries until a draw leaves `U^gamma`. A learner with budget
/// `k` outputs `h2` iff it detected within `k` queries, so its excess error
/// is `1/2` exactly when `V` was chosen and nothing was detected.
pub fn run_query_game(inst: &QueryInstance, budgets: &[usize], trials: usize, seed: u64) -> Result<QuerySweepResult> {
    if budgets.is_empty() || budgets.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("budgets", "must be nonempty and increasing"));
    }
    if trials == 0 {
        return Err(invalid("trials", "must be positive"));
    }
    let cap = *budgets.last().expect("nonempty");
    let outcomes: Vec<(bool, Option<usize>)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng_from_seed(seed_derive_indexed(seed, "query/trial", t as u64));
            let chose_v = rng.random::<bool>();
            if !chose_v {
                return Ok((false, None));
            }
            Ok((true, first_detection(inst, cap, &mut rng)?))
        })
        .collect::<Result<_>>()?;
    let v_trials = outcomes.iter().filter(|o| o.0).count();
    let mut excess_error = Vec::new();
    let mut sigma = Vec::new();
    let mut conf_intervals = Vec::new();
    for &k in budgets {
        let missed = outcomes.iter().filter(|(v, det)| *v && det.is_none_or(|t| t > k)).count();
        let q = missed as f64 / trials as f64;
        excess_error.push(0.5 * q);
        sigma.push(0.5 * binomial_sigma(q, trials));
        let (lo, hi) = wilson_interval(missed, trials, Z95);
        conf_intervals.push((0.5 * lo, 0.5 * hi));
    }
    Ok(QuerySweepResult {
        budgets: budgets.to_vec(),
        excess_error,
        sigma,
        conf_intervals,
        trials,
        v_trials,
        detections: outcomes.into_iter().map(|(_, d)| d).collect(),
    })
}

/// Detection frequencies for single queries at `v` and at `-v`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnchorSymmetry {
    pub queries_per_anchor: usize,
    pub freq_pos: f64,
    pub freq_neg: f64,
    pub sigma_diff: f64,
}

impl AnchorSymmetry {
    pub fn symmetric(&self) -> bool {
        (self.freq_pos - self.freq_neg).abs() <= 3.0 * self.sigma_diff
    }
}

pub fn anchor_symmetry_audit(inst: &QueryInstance, n: usize, seed: u64) -> Result<AnchorSymmetry> {
    let anchors = inst.anchors();
    let freqs: Vec<f64> = anchors
        .par_iter()
        .enumerate()
        .map(|(a, x)| {
            let mut rng = rng_from_seed(seed_derive_indexed(seed, "symmetry/anchor", a as u64));
            let region = inst.family_v.assigned(x).expect("assigned");
            let shell = inst.u_gamma_ball(x);
            let mut sampler = RegionSampler::new(region)?;
            let mut hits = 0usize;
            for _ in 0..n {
                hits += !shell.contains(&sampler.sample(&mut rng)?) as usize;
            }
            Ok(hits as f64 / n as f64)
        })
        .collect::<Result<_>>()?;
    let pooled = 0.5 * (freqs[0] + freqs[1]);
    Ok(AnchorSymmetry {
        queries_per_anchor: n,
        freq_pos: freqs[0],
        freq_neg: freqs[1],
        sigma_diff: (2.0 * pooled * (1.0 - pooled) / n as f64).sqrt(),
    })
}

/// One row of the detection-threshold scaling fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPoint {
    pub diameter: f64,
    pub d0_over_gamma: f64,
    pub threshold: Option<usize>,
}

/// Budget at which the excess error first drops below 1/8, across diameters,
/// and the least-squares slope of `log threshold` against `log(D0/gamma)`.
pub fn threshold_scaling(
    diameters: &[f64],
    gamma: f64,
    d: usize,
    trials: usize,
    max_budget: usize,
    seed: u64,
) -> Result<(Vec<ThresholdPoint>, Option<f64>)> {
    let mut points = Vec::new();
    for (i, &diam) in diameters.iter().enumerate() {
        let inst = build_query_instance(diam, gamma, d)?;
        let res = run_query_game(&inst, &[0, max_budget], trials, seed_derive_indexed(seed, "scaling", i as u64))?;
        points.push(ThresholdPoint {
            diameter: diam,
            d0_over_gamma: inst.d0 / gamma,
            threshold: res.budget_below(0.125),
        });
    }
    let fitted: Option<Vec<(f64, f64)>> = points
        .iter()
        .map(|p| p.threshold.filter(|&t| t > 0).map(|t| (p.d0_over_gamma.ln(), (t as f64).ln())))
        .collect();
    let slope = fitted.filter(|f| f.len() >= 2).map(|f| {
        let (xs, ys): (Vec<f64>, Vec<f64>) = f.into_iter().unzip();
        ols_slope(&xs, &ys)
    });
    Ok((points, slope))
}
