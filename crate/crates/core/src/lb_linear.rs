//! Lower bound for proper robust ERM with bounded linear classifiers.
//!
//! A greedy net of the sphere of radius `W(1+beta)` splits it into Voronoi
//! cells `Z_1..Z_M`. The halfspace tangent to the radius-`W` sphere below the
//! `i`-th net point is positive on a cap of that net point only, so it is
//! negative on every other cell, while every `W`-bounded halfspace is positive
//! somewhere on the outer sphere. Cells indexed by the `m`-subsets `T` of
//! `{0..3m}` then define regions `U_{x_i} = ∪_{T ∋ i} Z_T` on which any proper
//! learner seeing `m` draws from a random `2m` anchors does badly.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{greedy_sphere_cover, SphereCover, Vector};
use crate::model::{robust_loss_distribution, DiscreteDistribution, FiniteClass, Hypothesis, Label, LabeledExample};
use crate::perturbation::{Region, RegionFamily};
use crate::rng::{rng_from_seed, seed_derive, seed_derive_indexed};
use crate::stats::binomial;

/// Relative tolerance for "on the sphere".
pub const SPHERE_TOL: f64 = 1e-9;
/// Sphere samples drawn per greedy center when realizing the cells.
pub const SAMPLES_PER_CELL: usize = 200;
/// Initial `beta` and the number of halvings tried.
pub const BETA_START: f64 = 0.25;
pub const MAX_HALVINGS: usize = 40;

/// Net separation `2W sqrt(2 beta (beta + 1))`.
pub fn beta_mesh(w_bound: f64, beta: f64) -> f64 {
    2.0 * w_bound * (2.0 * beta * (beta + 1.0)).sqrt()
}

/// Chord radius `W sqrt(2 beta (beta + 1))` of the positive cap of a tangent halfspace.
pub fn cap_radius(w_bound: f64, beta: f64) -> f64 {
    0.5 * beta_mesh(w_bound, beta)
}

/// The halfspace `<x/|x|, .> >= W`, tangent to the radius-`W` sphere at `x`.
pub fn tangent_hypothesis(x: &Vector, w_bound: f64) -> Result<Hypothesis> {
    let norm = x.norm();
    if (norm - w_bound).abs() > SPHERE_TOL * w_bound {
        return Err(Error::NotOnSphere { norm, radius: w_bound });
    }
    Hypothesis::linear(x.scale(1.0 / norm), -w_bound)
}

/// Cells on the sphere of radius `W(1+beta)` with their tangent witnesses.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShatterFamily {
    pub w_bound: f64,
    pub beta: f64,
    pub m_cells: usize,
    /// Sampled cells; cell `i` contains the net point `cover.centers[i]`.
    pub cells: Vec<Vec<Vector>>,
    pub cover: SphereCover,
    /// Witness `i` is positive on the cap around net point `i` only.
    pub witnesses: Vec<Hypothesis>,
}

impl ShatterFamily {
    pub fn dim(&self) -> usize {
        self.cover.dim()
    }

    pub fn outer_radius(&self) -> f64 {
        self.w_bound * (1.0 + self.beta)
    }

    /// Pairs `(i, j)`, `i != j`, where witness `i` is positive on a sample of cell `j`.
    pub fn stipulation2_exceptions(&self) -> Vec<(usize, usize)> {
        let mut bad = Vec::new();
        for (i, h) in self.witnesses.iter().enumerate() {
            for (j, cell) in self.cells.iter().enumerate() {
                if i != j && cell.iter().any(|z| h.predict_unchecked(z) == Label::Pos) {
                    bad.push((i, j));
                }
            }
        }
        bad
    }

    /// Indices of class members that are negative on every cell sample.
    pub fn stipulation1_failures(&self, net: &FiniteClass) -> Vec<usize> {
        net.hypotheses()
            .par_iter()
            .enumerate()
            .filter(|(_, h)| !self.cells.iter().any(|cell| cell.iter().any(|z| h.predict_unchecked(z) == Label::Pos)))
            .map(|(i, _)| i)
            .collect()
    }
}

/// Builds `M` cells by halving `beta` from 0.25 until the greedy net of the
/// outer sphere has at least `M` points. Surplus cells merge into the last.
pub fn build_shatter_family(w_bound: f64, d: usize, m_cells: usize, seed: u64) -> Result<ShatterFamily> {
    if d < 2 {
        return Err(invalid("d", "the construction needs d >= 2"));
    }
    if m_cells == 0 {
        return Err(invalid("M", "need at least one cell"));
    }
    if !(w_bound.is_finite() && w_bound > 0.0) {
        return Err(invalid("W", "must be finite and positive"));
    }
    let mut beta = BETA_START;
    let mut cover = None;
    let mut achieved = 0;
    for step in 0..=MAX_HALVINGS {
        let c = greedy_sphere_cover(
            d,
            w_bound * (1.0 + beta),
            beta_mesh(w_bound, beta),
            seed_derive_indexed(seed, "shatter/cover", step as u64),
        )?;
        achieved = c.centers.len();
        if achieved >= m_cells {
            cover = Some(c);
            break;
        }
        beta /= 2.0;
    }
    let cover = cover.ok_or(Error::BetaUnderflow { achieved, requested: m_cells })?;

    let n_centers = cover.centers.len();
    let mut cells: Vec<Vec<Vector>> = cover.centers.iter().map(|c| vec![c.clone()]).collect();
    let mut rng = rng_from_seed(seed_derive(seed, "shatter/cells"));
    for _ in 0..SAMPLES_PER_CELL * n_centers {
        let z = cover.sample_sphere(&mut rng);
        cells[cover.nearest(&z)].push(z);
    }
    let surplus: Vec<Vector> = cells.drain(m_cells..).flatten().collect();
    cells[m_cells - 1].extend(surplus);

    let witnesses = cover.centers[..m_cells]
        .iter()
        .map(|z| tangent_hypothesis(&z.scale(1.0 / (1.0 + beta)), w_bound))
        .collect::<Result<Vec<_>>>()?;
    let family = ShatterFamily { w_bound, beta, m_cells, cells, cover, witnesses };
    let bad = family.stipulation2_exceptions();
    if !bad.is_empty() {
        return Err(Error::AuditFailure(format!("witness positive off its cell: {bad:?}")));
    }
    Ok(family)
}

/// Fraction of `n` outer-sphere samples where "tangent at `x` is positive"
/// and "within the cap radius of `(1+beta) x`" disagree.
pub fn cap_identity_mismatch(x: &Vector, w_bound: f64, beta: f64, n: usize, seed: u64) -> Result<f64> {
    let h = tangent_hypothesis(x, w_bound)?;
    let apex = x.scale(1.0 + beta);
    let rad = cap_radius(w_bound, beta);
    let mut rng = rng_from_seed(seed);
    let mut bad = 0usize;
    for _ in 0..n {
        let z = crate::geometry::sample_unit_sphere(x.dim(), &mut rng).scale(w_bound * (1.0 + beta));
        let by_h = h.predict_unchecked(&z) == Label::Pos;
        let by_cap = z.dist(&apex) <= rad;
        bad += (by_h != by_cap) as usize;
    }
    Ok(bad as f64 / n as f64)
}

/// All `m`-subsets of `{0..n}` in lexicographic order.
pub fn k_subsets(n: usize, m: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..m).collect();
    if m > n {
        return out;
    }
    loop {
        out.push(cur.clone());
        let Some(i) = (0..m).rev().find(|&i| cur[i] < n - m + i) else { return out };
        cur[i] += 1;
        for j in i + 1..m {
            cur[j] = cur[j - 1] + 1;
        }
    }
}

/// The instance with `3m` anchors and one cell per `m`-subset.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearLbInstance {
    pub m: usize,
    pub shatter: ShatterFamily,
    /// `subsets[t]` is the index set `T` of cell `t`.
    pub subsets: Vec<Vec<usize>>,
    pub anchors: Vec<Vector>,
    pub family: RegionFamily,
}

/// Largest `m` accepted by [`build_lb_instance`] (`C(9, 3) = 84` cells).
pub const MAX_M: usize = 3;

pub fn build_lb_instance(m: usize, w_bound: f64, d: usize, seed: u64) -> Result<LinearLbInstance> {
    if m == 0 || m > MAX_M {
        return Err(invalid("m", format!("must lie in 1..={MAX_M}")));
    }
    let n = 3 * m;
    let m_cells = binomial(n as u64, m as u64) as usize;
    let shatter = build_shatter_family(w_bound, d, m_cells, seed)?;
    let subsets = k_subsets(n, m);
    let mut family = RegionFamily::new();
    let mut anchors = Vec::with_capacity(n);
    for i in 0..n {
        let owning: Vec<usize> = (0..m_cells).filter(|&t| subsets[t].contains(&i)).collect();
        let points: Vec<Vector> = owning.iter().flat_map(|&t| shatter.cells[t].iter().cloned()).collect();
        // the i-th sample of the first owning cell keeps anchors distinct
        let anchor = shatter.cells[owning[0]][i + 1].clone();
        family.insert(anchor.clone(), Region::finite_points(points)?)?;
        anchors.push(anchor);
    }
    let inst = LinearLbInstance { m, shatter, subsets, anchors, family };
    if !inst.family.anchors_outside().is_empty() {
        return Err(Error::AuditFailure("anchor outside its region".into()));
    }
    let bad = inst.audit_witness_robustness()?;
    if !bad.is_empty() {
        return Err(Error::AuditFailure(format!("witness not robust off its subset: {bad:?}")));
    }
    Ok(inst)
}

impl LinearLbInstance {
    pub fn cells(&self) -> usize {
        self.subsets.len()
    }

    pub fn witness(&self, t: usize) -> &Hypothesis {
        &self.shatter.witnesses[t]
    }

    fn robust_violation_at(&self, h: &Hypothesis, i: usize) -> Result<bool> {
        let region = self.family.assigned(&self.anchors[i]).expect("anchor assigned");
        h.robust_violation(region, Label::Neg)
    }

    /// `(t, i)` with `i ∉ T_t` where witness `t` is not robustly correct.
    pub fn audit_witness_robustness(&self) -> Result<Vec<(usize, usize)>> {
        let mut bad = Vec::new();
        for t in 0..self.cells() {
            for i in 0..3 * self.m {
                if !self.subsets[t].contains(&i) && self.robust_violation_at(self.witness(t), i)? {
                    bad.push((t, i));
                }
            }
        }
        Ok(bad)
    }

    /// Indices of class members whose non-robust anchors contain no full subset `T`.
    pub fn audit_full_subset(&self, net: &FiniteClass) -> Result<Vec<usize>> {
        let flags: Vec<Option<usize>> = net
            .hypotheses()
            .par_iter()
            .enumerate()
            .map(|(k, h)| {
                let lacks: Vec<bool> =
                    (0..3 * self.m).map(|i| self.robust_violation_at(h, i)).collect::<Result<_>>()?;
                let covered = self.subsets.iter().any(|t| t.iter().all(|&i| lacks[i]));
                Ok((!covered).then_some(k))
            })
            .collect::<Result<_>>()?;
        Ok(flags.into_iter().flatten().collect())
    }

    /// Uniform distribution on the `2m` anchors outside `T_t`, all labeled `-1`.
    pub fn distribution(&self, t: usize) -> Result<DiscreteDistribution> {
        let ex: Vec<LabeledExample> = (0..3 * self.m)
            .filter(|i| !self.subsets[t].contains(i))
            .map(|i| LabeledExample::new(self.anchors[i].clone(), Label::Neg))
            .collect();
        DiscreteDistribution::uniform(ex)
    }

    /// `table[t][s] = l_U(h_t, D_s)`, by direct robust-loss evaluation.
    pub fn cross_loss_table(&self) -> Result<Vec<Vec<f64>>> {
        let dists = (0..self.cells()).map(|s| self.distribution(s)).collect::<Result<Vec<_>>>()?;
        (0..self.cells())
            .into_par_iter()
            .map(|t| dists.iter().map(|d| robust_loss_distribution(self.witness(t), &self.family, d)).collect())
            .collect()
    }

    /// `1/2 - |T ∩ T'| / (2m)`.
    pub fn cross_loss_formula(&self, t: usize, s: usize) -> f64 {
        let common = self.subsets[t].iter().filter(|i| self.subsets[s].contains(i)).count();
        0.5 - common as f64 / (2.0 * self.m as f64)
    }
}

/// Proper learners that output one of the witnesses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Learner {
    /// Lowest-index witness with zero empirical robust loss.
    ErmLowestIndex,
    /// Uniformly random witness with zero empirical robust loss.
    RandomConsistent,
    /// Told the true subset (control).
    Omniscient,
}

impl Learner {
    /// Index of the output witness given observed anchors and the truth.
    fn choose<R: Rng + ?Sized>(self, subsets: &[Vec<usize>], seen: &[usize], truth: usize, rng: &mut R) -> usize {
        let consistent = |t: &Vec<usize>| seen.iter().all(|i| !t.contains(i));
        match self {
            Learner::Omniscient => truth,
            Learner::ErmLowestIndex => subsets.iter().position(consistent).expect("truth is consistent"),
            Learner::RandomConsistent => {
                let ok: Vec<usize> = (0..subsets.len()).filter(|&t| consistent(&subsets[t])).collect();
                ok[rng.random_range(0..ok.len())]
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameResult {
    pub trials: usize,
    pub loss_samples: Vec<f64>,
    pub mean_loss: f64,
    pub mean_sigma: f64,
    pub freq_loss_above_eighth: f64,
    pub freq_sigma: f64,
}

/// Per trial: draw `T`, draw `n_samples` anchors from `D_T`, let the learner
/// pick a witness, and record its exact robust loss under `D_T`.
pub fn run_adversarial_game(
    inst: &LinearLbInstance,
    learner: Learner,
    n_samples: usize,
    trials: usize,
    seed: u64,
) -> Result<GameResult> {
    if trials == 0 {
        return Err(invalid("trials", "must be positive"));
    }
    let table = inst.cross_loss_table()?;
    let n = 3 * inst.m;
    let loss_samples: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|k| {
            let mut rng = rng_from_seed(seed_derive_indexed(seed, "game/trial", k as u64));
            let truth = rng.random_range(0..inst.cells());
            let outside: Vec<usize> = (0..n).filter(|i| !inst.subsets[truth].contains(i)).collect();
            let seen: Vec<usize> = (0..n_samples).map(|_| outside[rng.random_range(0..outside.len())]).collect();
            let pick = learner.choose(&inst.subsets, &seen, truth, &mut rng);
            table[pick][truth]
        })
        .collect();
    Ok(summarize(loss_samples))
}

fn summarize(loss_samples: Vec<f64>) -> GameResult {
    let n = loss_samples.len() as f64;
    let mean = loss_samples.iter().sum::<f64>() / n;
    let var = loss_samples.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    let freq = loss_samples.iter().filter(|&&l| l > 0.125).count() as f64 / n;
    GameResult {
        trials: loss_samples.len(),
        mean_loss: mean,
        mean_sigma: (var / n).sqrt(),
        freq_loss_above_eighth: freq,
        freq_sigma: (freq * (1.0 - freq) / n).sqrt(),
        loss_samples,
    }
}

/// Exact expected loss and tail probability of a deterministic learner,
/// by enumerating every subset and every ordered sample (small `m` only).
pub fn exact_game_value(m: usize, learner: Learner) -> Result<(f64, f64)> {
    if m == 0 || m > 2 || learner == Learner::RandomConsistent {
        return Err(invalid("m", "exact enumeration covers deterministic learners with m <= 2"));
    }
    let n = 3 * m;
    let subsets = k_subsets(n, m);
    let mut rng = rng_from_seed(0);
    let (mut total, mut tail, mut count) = (0.0, 0.0, 0.0);
    for (truth, t) in subsets.iter().enumerate() {
        let outside: Vec<usize> = (0..n).filter(|i| !t.contains(i)).collect();
        let draws = outside.len().pow(m as u32);
        for code in 0..draws {
            let mut c = code;
            let seen: Vec<usize> = (0..m)
                .map(|_| {
                    let v = outside[c % outside.len()];
                    c /= outside.len();
                    v
                })
                .collect();
            let pick = learner.choose(&subsets, &seen, truth, &mut rng);
            let common = subsets[pick].iter().filter(|i| t.contains(i)).count();
            let loss = 0.5 - common as f64 / (2.0 * m as f64);
            total += loss;
            tail += (loss > 0.125) as u8 as f64;
            count += 1.0;
        }
    }
    Ok((total / count, tail / count))
}
