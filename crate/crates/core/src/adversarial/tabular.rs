//! Exact equilibrium analysis on small finite joints `q(x, y, z, v)`.
//!
//! A deterministic extractor on a finite `x` space is characterized by the
//! partition it induces, so extractors are represented as a group id per
//! `x`. Optimal players then have closed forms (conditional distributions
//! given the group), and every loss can be compared against conditional
//! entropies computed by direct summation over the joint.

use std::collections::BTreeMap;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nnet::PROB_FLOOR;
use crate::profile::PropagationProfile;
use crate::rng::{self, rng_from_seed};

use super::model::{AdversarialModel, DenseExtractor, Head};
use super::train::{refit_adversaries, tail_mean, train_from, TrainConfig};

pub const MAX_X: usize = 8;
pub const MAX_ZV: usize = 3;
const Y: usize = 2;

/// A joint distribution over `x in 0..n_x`, binary `y`, `z in 0..n_z`,
/// `v in 0..n_v`, stored flat in `(x, y, z, v)` row-major order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularJoint {
    pub name: String,
    pub n_x: usize,
    pub n_z: usize,
    pub n_v: usize,
    pub q: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cell {
    pub x: usize,
    pub y: usize,
    pub z: usize,
    pub v: usize,
}

impl TabularJoint {
    pub fn new(name: &str, n_x: usize, n_z: usize, n_v: usize, q: Vec<f64>) -> Result<Self> {
        let j = TabularJoint {
            name: name.into(),
            n_x,
            n_z,
            n_v,
            q,
        };
        j.validate()?;
        Ok(j)
    }

    /// `q(x) q(y|x) q(z|x) q(v|x)`: labels conditionally independent given `x`.
    pub fn from_factors(name: &str, px: &[f64], py1: &[f64], pz: &[Vec<f64>], pv: &[Vec<f64>]) -> Result<Self> {
        let n_x = px.len();
        if py1.len() != n_x || pz.len() != n_x || pv.len() != n_x {
            return Err(Error::InvalidDistribution("factor tables disagree on the size of x".into()));
        }
        let (n_z, n_v) = (pz[0].len(), pv[0].len());
        let mut q = Vec::with_capacity(n_x * Y * n_z * n_v);
        for x in 0..n_x {
            for y in 0..Y {
                let py = if y == 1 { py1[x] } else { 1.0 - py1[x] };
                for z in 0..n_z {
                    for v in 0..n_v {
                        q.push(px[x] * py * pz[x][z] * pv[x][v]);
                    }
                }
            }
        }
        TabularJoint::new(name, n_x, n_z, n_v, q)
    }

    /// A seeded random joint with every cell positive.
    pub fn random(n_x: usize, n_z: usize, n_v: usize, seed: u64) -> Result<Self> {
        let mut rng = rng_from_seed(seed);
        let raw: Vec<f64> = (0..n_x * Y * n_z * n_v).map(|_| rng.random_range(0.05..1.0)).collect();
        let total: f64 = raw.iter().sum();
        TabularJoint::new(&format!("random-{seed}"), n_x, n_z, n_v, raw.into_iter().map(|v| v / total).collect())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidDistribution(m));
        if self.n_x == 0 || self.n_x > MAX_X || self.n_z == 0 || self.n_z > MAX_ZV || self.n_v == 0 || self.n_v > MAX_ZV {
            return bad(format!(
                "sizes n_x={} n_z={} n_v={} outside 1..={MAX_X} / 1..={MAX_ZV}",
                self.n_x, self.n_z, self.n_v
            ));
        }
        if self.q.len() != self.n_x * Y * self.n_z * self.n_v {
            return bad(format!("{} probabilities for a {}x2x{}x{} joint", self.q.len(), self.n_x, self.n_z, self.n_v));
        }
        if self.q.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return bad("probabilities must be finite and non-negative".into());
        }
        let s: f64 = self.q.iter().sum();
        if (s - 1.0).abs() > 1e-9 {
            return bad(format!("probabilities sum to {s}"));
        }
        Ok(())
    }

    pub fn cells(&self) -> impl Iterator<Item = (Cell, f64)> + '_ {
        let (nz, nv) = (self.n_z, self.n_v);
        self.q.iter().enumerate().map(move |(i, &p)| {
            let v = i % nv;
            let z = (i / nv) % nz;
            let y = (i / (nv * nz)) % Y;
            let x = i / (nv * nz * Y);
            (Cell { x, y, z, v }, p)
        })
    }

    pub fn px(&self) -> Vec<f64> {
        let mut px = vec![0.0; self.n_x];
        for (c, p) in self.cells() {
            px[c.x] += p;
        }
        px
    }

    /// `q(y | x)` per `x`; rows of zero-mass `x` are uniform.
    pub fn qy_given_x(&self) -> Vec<[f64; 2]> {
        let mut t = vec![[0.0; 2]; self.n_x];
        for (c, p) in self.cells() {
            t[c.x][c.y] += p;
        }
        for row in &mut t {
            let s = row[0] + row[1];
            *row = if s > 0.0 { [row[0] / s, row[1] / s] } else { [0.5, 0.5] };
        }
        t
    }

    /// Group ids of the best-representation extractor `E*(x) = q_y(.|x)`:
    /// `x` values with equal conditionals (within 1e-12) share a group.
    pub fn best_partition(&self) -> Vec<usize> {
        partition_by(&self.qy_given_x())
    }

    /// `H(A | B)` by direct summation, `-sum q(a, b) ln(q(a, b) / q(b))`.
    pub fn cond_entropy(&self, a: impl Fn(Cell) -> usize, b: impl Fn(Cell) -> usize) -> f64 {
        let mut joint: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        let mut marg: BTreeMap<usize, f64> = BTreeMap::new();
        for (c, p) in self.cells() {
            *joint.entry((a(c), b(c))).or_insert(0.0) += p;
            *marg.entry(b(c)).or_insert(0.0) += p;
        }
        joint
            .iter()
            .filter(|(_, &p)| p > 0.0)
            .map(|(&(_, bk), &p)| -p * (p / marg[&bk]).ln())
            .sum()
    }

    pub fn entropy_y(&self) -> f64 {
        self.cond_entropy(|c| c.y, |_| 0)
    }

    pub fn h_y_given_x(&self) -> f64 {
        self.cond_entropy(|c| c.y, |c| c.x)
    }

    /// Group id of `q_y(.|E(x))` for each `x`, given the extractor partition.
    pub fn qy_partition(&self, partition: &[usize]) -> Vec<usize> {
        partition_by(&self.qy_given_group(partition))
    }

    /// `q(y | E(x))` for each `x`.
    pub fn qy_given_group(&self, partition: &[usize]) -> Vec<[f64; 2]> {
        let mut g: BTreeMap<usize, [f64; 2]> = BTreeMap::new();
        for (c, p) in self.cells() {
            g.entry(partition[c.x]).or_insert([0.0; 2])[c.y] += p;
        }
        (0..self.n_x)
            .map(|x| {
                let r = g[&partition[x]];
                let s = r[0] + r[1];
                if s > 0.0 {
                    [r[0] / s, r[1] / s]
                } else {
                    [0.5, 0.5]
                }
            })
            .collect()
    }

    /// `q(label | key(x))` as a table indexed by `x`.
    fn conditional_table(&self, key: &[usize], label: impl Fn(Cell) -> usize, n: usize) -> Vec<Vec<f64>> {
        let mut g: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        for (c, p) in self.cells() {
            g.entry(key[c.x]).or_insert_with(|| vec![0.0; n])[label(c)] += p;
        }
        (0..self.n_x)
            .map(|x| {
                let r = &g[&key[x]];
                let s: f64 = r.iter().sum();
                r.iter().map(|v| if s > 0.0 { v / s } else { 1.0 / n as f64 }).collect()
            })
            .collect()
    }

    /// Expected log-loss of a player whose output for `x` is `table[x]`.
    fn expected_loss(&self, table: &[Vec<f64>], label: impl Fn(Cell) -> usize) -> f64 {
        self.cells()
            .filter(|(_, p)| *p > 0.0)
            .map(|(c, p)| -p * table[c.x][label(c)].max(PROB_FLOOR).ln())
            .sum()
    }

    /// Minimizes a player's expected loss by golden-section search, group by
    /// group, without using the closed form.
    fn brute_force_loss(&self, key: &[usize], label: impl Fn(Cell) -> usize, n: usize) -> f64 {
        let mut mass: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        for (c, p) in self.cells() {
            mass.entry(key[c.x]).or_insert_with(|| vec![0.0; n])[label(c)] += p;
        }
        mass.values().map(|m| minimize_categorical_loss(m)).sum()
    }

    /// Closed-form optimal players, entropies and brute-force optima for the
    /// extractor given by `partition`.
    pub fn player_check(&self, partition: &[usize]) -> PlayerCheck {
        // P is a function of E(x), so conditioning on (E(x), P) is
        // conditioning on E(x).
        let key = partition;
        let p_table = self.conditional_table(key, |c| c.y, Y);
        let d_table = self.conditional_table(key, |c| c.z, self.n_z);
        let c_table = self.conditional_table(key, |c| c.v, self.n_v);
        PlayerCheck {
            loss_p: self.expected_loss(&p_table, |c| c.y),
            h_y_given_e: self.cond_entropy(|c| c.y, |c| key[c.x]),
            brute_p: self.brute_force_loss(key, |c| c.y, Y),
            loss_d: self.expected_loss(&d_table, |c| c.z),
            h_z_given_e: self.cond_entropy(|c| c.z, |c| key[c.x]),
            brute_d: self.brute_force_loss(key, |c| c.z, self.n_z),
            loss_c: self.expected_loss(&c_table, |c| c.v),
            h_v_given_e: self.cond_entropy(|c| c.v, |c| key[c.x]),
            brute_c: self.brute_force_loss(key, |c| c.v, self.n_v),
        }
    }
}

/// Assigns equal ids to rows equal within 1e-12, in first-seen order.
fn partition_by(rows: &[[f64; 2]]) -> Vec<usize> {
    let mut reps: Vec<[f64; 2]> = Vec::new();
    rows.iter()
        .map(|r| {
            if let Some(i) = reps.iter().position(|s| (s[0] - r[0]).abs() < 1e-12 && (s[1] - r[1]).abs() < 1e-12) {
                i
            } else {
                reps.push(*r);
                reps.len() - 1
            }
        })
        .collect()
}

fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - g * (hi - lo);
    let mut b = lo + g * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    for _ in 0..200 {
        if fa < fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - g * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + g * (hi - lo);
            fb = f(b);
        }
    }
    f((lo + hi) / 2.0)
}

/// `min over p in simplex of -sum m_k ln p_k`, with `p` parametrized by
/// stick breaking so the objective separates into one-dimensional searches.
fn minimize_categorical_loss(m: &[f64]) -> f64 {
    let eps = 1e-15;
    let mut total = 0.0;
    for k in 0..m.len().saturating_sub(1) {
        let here = m[k];
        let rest: f64 = m[k + 1..].iter().sum();
        total += golden_section(
            |t| {
                let a = if here > 0.0 { -here * t.ln() } else { 0.0 };
                let b = if rest > 0.0 { -rest * (1.0 - t).ln() } else { 0.0 };
                a + b
            },
            eps,
            1.0 - eps,
        );
    }
    total
}

/// Losses of the three optimal players for one extractor, three ways.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlayerCheck {
    pub loss_p: f64,
    pub h_y_given_e: f64,
    pub brute_p: f64,
    pub loss_d: f64,
    pub h_z_given_e: f64,
    pub brute_d: f64,
    pub loss_c: f64,
    pub h_v_given_e: f64,
    pub brute_c: f64,
}

impl PlayerCheck {
    pub fn max_error(&self) -> f64 {
        [
            self.loss_p - self.h_y_given_e,
            self.brute_p - self.h_y_given_e,
            self.loss_d - self.h_z_given_e,
            self.brute_d - self.h_z_given_e,
            self.loss_c - self.h_v_given_e,
            self.brute_c - self.h_v_given_e,
        ]
        .iter()
        .fold(0.0, |m, d| m.max(d.abs()))
    }
}

/// Outcome of [`tabular_equilibrium_check`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumReport {
    pub joint: String,
    pub h_y: f64,
    pub h_y_given_x: f64,
    /// Optimal players on the identity extractor `E(x) = x`.
    pub identity: PlayerCheck,
    /// Optimal players on `E*(x) = q_y(.|x)`.
    pub best: PlayerCheck,
    /// `H(y | E*(x))`; equals `h_y_given_x` at the optimum.
    pub h_y_given_best: f64,
    /// `H(z | E*(x), q_y(.|E*(x)))` and `H(z | q_y(.|E*(x)))`.
    pub h_z_given_best_and_qy: f64,
    pub h_z_given_qy: f64,
    pub h_v_given_best_and_qy: f64,
    pub h_v_given_qy: f64,
    /// Largest deviation of the optimal outputs on `E*` from
    /// `q_y(.|x)`, `q_z(.|q_y(.|x))` and `q_v(.|q_y(.|x))`.
    pub optimal_output_deviation: f64,
}

impl EquilibriumReport {
    pub fn max_error(&self) -> f64 {
        [
            self.identity.max_error(),
            self.best.max_error(),
            (self.h_y_given_best - self.h_y_given_x).abs(),
            (self.h_z_given_best_and_qy - self.h_z_given_qy).abs(),
            (self.h_v_given_best_and_qy - self.h_v_given_qy).abs(),
            self.optimal_output_deviation,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.max_error() <= tol
    }
}

/// One named comparison of a computed quantity against its target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedCheck {
    pub name: String,
    pub value: f64,
    pub target: f64,
    pub error: f64,
}

impl NamedCheck {
    fn new(name: impl Into<String>, value: f64, target: f64) -> Self {
        NamedCheck { name: name.into(), value, target, error: (value - target).abs() }
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.error <= tol
    }
}

impl PlayerCheck {
    fn named(&self, extractor: &str) -> Vec<NamedCheck> {
        vec![
            NamedCheck::new(format!("optimal predictor loss = H(y|E), {extractor}"), self.loss_p, self.h_y_given_e),
            NamedCheck::new(format!("searched predictor minimum = H(y|E), {extractor}"), self.brute_p, self.h_y_given_e),
            NamedCheck::new(format!("optimal discriminator loss = H(z|E), {extractor}"), self.loss_d, self.h_z_given_e),
            NamedCheck::new(format!("searched discriminator minimum = H(z|E), {extractor}"), self.brute_d, self.h_z_given_e),
            NamedCheck::new(format!("optimal classifier loss = H(v|E), {extractor}"), self.loss_c, self.h_v_given_e),
            NamedCheck::new(format!("searched classifier minimum = H(v|E), {extractor}"), self.brute_c, self.h_v_given_e),
        ]
    }
}

impl EquilibriumReport {
    /// Every comparison behind [`EquilibriumReport::max_error`], by name.
    pub fn checks(&self) -> Vec<NamedCheck> {
        let mut out = self.identity.named("identity extractor");
        out.extend(self.best.named("best-representation extractor"));
        out.extend([
            NamedCheck::new("best representation is lossless: H(y|E*) = H(y|x)", self.h_y_given_best, self.h_y_given_x),
            NamedCheck::new("z carries nothing beyond q_y: H(z|E*,q_y) = H(z|q_y)", self.h_z_given_best_and_qy, self.h_z_given_qy),
            NamedCheck::new("v carries nothing beyond q_y: H(v|E*,q_y) = H(v|q_y)", self.h_v_given_best_and_qy, self.h_v_given_qy),
            NamedCheck::new("optimal outputs on E* equal q_y, q_z|q_y, q_v|q_y", self.optimal_output_deviation, 0.0),
        ]);
        out
    }
}

pub fn tabular_equilibrium_check(q: &TabularJoint) -> Result<EquilibriumReport> {
    q.validate()?;
    let identity: Vec<usize> = (0..q.n_x).collect();
    let best = q.best_partition();
    let qy_key = q.qy_partition(&best);
    // Pair (E*(x), q_y-group) encoded as one key.
    let both: Vec<usize> = best.iter().zip(&qy_key).map(|(e, k)| e * MAX_X + k).collect();

    let qy_x = q.qy_given_x();
    let p_best = q.conditional_table(&best, |c| c.y, Y);
    let d_best = q.conditional_table(&best, |c| c.z, q.n_z);
    let c_best = q.conditional_table(&best, |c| c.v, q.n_v);
    let d_ref = q.conditional_table(&qy_key, |c| c.z, q.n_z);
    let c_ref = q.conditional_table(&qy_key, |c| c.v, q.n_v);
    let mut dev: f64 = 0.0;
    for x in 0..q.n_x {
        for y in 0..Y {
            dev = dev.max((p_best[x][y] - qy_x[x][y]).abs());
        }
        for (a, b) in d_best[x].iter().zip(&d_ref[x]).chain(c_best[x].iter().zip(&c_ref[x])) {
            dev = dev.max((a - b).abs());
        }
    }

    Ok(EquilibriumReport {
        joint: q.name.clone(),
        h_y: q.entropy_y(),
        h_y_given_x: q.h_y_given_x(),
        identity: q.player_check(&identity),
        best: q.player_check(&best),
        h_y_given_best: q.cond_entropy(|c| c.y, |c| best[c.x]),
        h_z_given_best_and_qy: q.cond_entropy(|c| c.z, |c| both[c.x]),
        h_z_given_qy: q.cond_entropy(|c| c.z, |c| qy_key[c.x]),
        h_v_given_best_and_qy: q.cond_entropy(|c| c.v, |c| both[c.x]),
        h_v_given_qy: q.cond_entropy(|c| c.v, |c| qy_key[c.x]),
        optimal_output_deviation: dev,
    })
}

/// Settings for [`gradient_training_vs_oracle`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TabularTrainConfig {
    pub samples: usize,
    pub representation: usize,
    pub train: TrainConfig,
    /// Iterations of adversary-only retraining on the frozen extractor.
    pub refit_iters: usize,
}

impl Default for TabularTrainConfig {
    fn default() -> Self {
        TabularTrainConfig {
            samples: 20_000,
            representation: 4,
            refit_iters: 3000,
            train: TrainConfig {
                lr_e: 0.2,
                lr_p: 0.5,
                lr_d: 0.5,
                lr_c: 0.5,
                batch: 128,
                outer_iters: 10_000,
                ..TrainConfig::default()
            },
        }
    }
}

/// Trained-model losses against their oracle targets, all in nats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientOracleReport {
    pub joint: String,
    pub alpha: f64,
    pub beta: f64,
    /// Empirical training losses averaged over the final `tail` iterations.
    pub l_p: f64,
    pub l_d: f64,
    pub l_c: f64,
    pub tail: usize,
    /// Population losses of the final players under `q`.
    pub final_l_p: f64,
    pub final_l_d: f64,
    pub final_l_c: f64,
    /// Population losses of D and C after refitting them on the frozen
    /// final extractor and predictor. Values well below the targets mean the
    /// representation still carries z or v information that the jointly
    /// trained adversaries were not exploiting at the end of training.
    pub refit_l_d: f64,
    pub refit_l_c: f64,
    /// `H(y|x)`, `H(z | q_y(.|x))`, `H(v | q_y(.|x))`.
    pub target_p: f64,
    pub target_d: f64,
    pub target_c: f64,
}

impl GradientOracleReport {
    pub fn max_gap(&self) -> f64 {
        [self.l_p - self.target_p, self.l_d - self.target_d, self.l_c - self.target_c]
            .into_iter()
            .fold(0.0, |m, d| m.max(d.abs()))
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.max_gap() <= tol
    }
}

pub type TabularModel = AdversarialModel<DenseExtractor>;

/// One dense layer per player: a linear extractor on one-hot `x` and
/// softmax heads without hidden layers.
pub fn tiny_model(q: &TabularJoint, representation: usize, seed: u64) -> TabularModel {
    let mut r = rng::stream(seed, 0);
    AdversarialModel {
        extractor: DenseExtractor::new(q.n_x, representation, &mut r),
        predictor: Head::new(representation, None, Y, &mut r),
        discriminator: Head::new(representation + Y, None, q.n_z, &mut r),
        classifier: Head::new(representation + Y, None, q.n_v, &mut r),
    }
}

fn one_hot(n: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[i] = 1.0;
    v
}

/// Draws `n` labeled one-hot samples from `q`.
pub fn sample_joint(q: &TabularJoint, n: usize, seed: u64) -> Vec<PropagationProfile> {
    let cells: Vec<(Cell, f64)> = q.cells().collect();
    let mut rng = rng::stream(seed, 2);
    (0..n)
        .map(|_| {
            let mut u: f64 = rng.random();
            let mut pick = cells[cells.len() - 1].0;
            for (c, p) in &cells {
                if u < *p {
                    pick = *c;
                    break;
                }
                u -= p;
            }
            PropagationProfile {
                features: one_hot(q.n_x, pick.x),
                y: pick.y,
                z: pick.z,
                v: pick.v,
            }
        })
        .collect()
}

/// Expected `(L_P, L_D, L_C)` of `model` under `q`, by summation.
pub fn population_losses(q: &TabularJoint, model: &TabularModel) -> Result<(f64, f64, f64)> {
    let (mut lp, mut ld, mut lc) = (0.0, 0.0, 0.0);
    for (c, p) in q.cells() {
        if p == 0.0 {
            continue;
        }
        let out = model.forward(&one_hot(q.n_x, c.x))?;
        lp -= p * out.p_y[c.y].max(PROB_FLOOR).ln();
        ld -= p * out.d_z[c.z].max(PROB_FLOOR).ln();
        lc -= p * out.c_v[c.v].max(PROB_FLOOR).ln();
    }
    Ok((lp, ld, lc))
}

/// Trains the tiny model on samples from `q` with the alternating procedure
/// and compares its population losses with the oracle entropies.
pub fn gradient_training_vs_oracle(q: &TabularJoint, cfg: &TabularTrainConfig) -> Result<(GradientOracleReport, TabularModel)> {
    let report = tabular_equilibrium_check(q)?;
    let data = sample_joint(q, cfg.samples, cfg.train.seed);
    let model = tiny_model(q, cfg.representation, cfg.train.seed);
    let out = train_from(model, &data, &cfg.train, |_| {})?;
    let tail = (cfg.train.outer_iters / 5).max(1);
    let mean = tail_mean(&out.history, tail).expect("history is non-empty");
    let trained = out.model;
    let (final_l_p, final_l_d, final_l_c) = population_losses(q, &trained)?;
    let mut refit = trained.clone();
    refit_adversaries(&mut refit, &data, cfg.train.lr_d, cfg.refit_iters, cfg.train.batch, cfg.train.seed)?;
    let (_, refit_l_d, refit_l_c) = population_losses(q, &refit)?;
    Ok((
        GradientOracleReport {
            joint: q.name.clone(),
            alpha: cfg.train.alpha,
            beta: cfg.train.beta,
            l_p: mean.l_p,
            l_d: mean.l_d,
            l_c: mean.l_c,
            tail,
            final_l_p,
            final_l_d,
            final_l_c,
            refit_l_d,
            refit_l_c,
            target_p: report.h_y_given_x,
            target_d: report.h_z_given_qy,
            target_c: report.h_v_given_qy,
        },
        trained,
    ))
}

/// Probability of `y = 1` for `x in {0, 1}` (and of `y = 0` for `x in {2, 3}`)
/// in [`published_joint`], chosen so that `H(y|x) = 0.3250` nats.
pub const PUBLISHED_PY: f64 = 0.099_967;

/// The fixed test joint: four equiprobable `x`, labels conditionally
/// independent given `x`. `x = 0, 1` share `q(y|x)` but differ in `z` and
/// `v`, as do `x = 2, 3`, so the best representation must merge them.
pub fn published_joint() -> TabularJoint {
    let p = PUBLISHED_PY;
    TabularJoint::from_factors(
        "published",
        &[0.25; 4],
        &[p, p, 1.0 - p, 1.0 - p],
        &[vec![0.8, 0.2], vec![0.3, 0.7], vec![0.75, 0.25], vec![0.25, 0.75]],
        &[vec![0.6, 0.4], vec![0.2, 0.8], vec![0.5, 0.5], vec![0.9, 0.1]],
    )
    .expect("published joint is valid")
}

/// `y` independent of `x`.
pub fn independent_joint() -> TabularJoint {
    TabularJoint::from_factors(
        "independent",
        &[0.3, 0.2, 0.4, 0.1],
        &[0.3; 4],
        &[vec![0.7, 0.3], vec![0.2, 0.8], vec![0.5, 0.5], vec![0.1, 0.9]],
        &[vec![0.5, 0.5], vec![0.4, 0.6], vec![0.8, 0.2], vec![0.3, 0.7]],
    )
    .expect("independent joint is valid")
}

/// `y = f(x)` deterministic; three-valued `z` and `v`.
pub fn deterministic_joint() -> TabularJoint {
    TabularJoint::from_factors(
        "deterministic",
        &[0.25, 0.25, 0.25, 0.25],
        &[1.0, 0.0, 1.0, 0.0],
        &[vec![0.6, 0.3, 0.1], vec![0.2, 0.2, 0.6], vec![0.3, 0.3, 0.4], vec![0.1, 0.8, 0.1]],
        &[vec![0.2, 0.5, 0.3], vec![0.4, 0.4, 0.2], vec![0.7, 0.2, 0.1], vec![0.3, 0.3, 0.4]],
    )
    .expect("deterministic joint is valid")
}

/// The built-in joints exercised by the theory check.
pub fn builtin_joints() -> Vec<TabularJoint> {
    vec![
        published_joint(),
        independent_joint(),
        deterministic_joint(),
        TabularJoint::random(4, 2, 2, 7).expect("random joint is valid"),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binary_entropy(p: f64) -> f64 {
        let h = |p: f64| if p > 0.0 { -p * p.ln() } else { 0.0 };
        h(p) + h(1.0 - p)
    }

    #[test]
    fn published_joint_entropy() {
        let q = published_joint();
        assert!((q.h_y_given_x() - 0.3250).abs() < 5e-5, "{}", q.h_y_given_x());
        assert!((q.h_y_given_x() - binary_entropy(PUBLISHED_PY)).abs() < 1e-12);
        assert_eq!(q.best_partition(), vec![0, 0, 1, 1]);
    }

    #[test]
    fn named_checks_cover_max_error() {
        for q in builtin_joints() {
            let r = tabular_equilibrium_check(&q).unwrap();
            let checks = r.checks();
            assert_eq!(checks.len(), 16);
            let worst = checks.iter().map(|c| c.error).fold(0.0, f64::max);
            assert_eq!(worst, r.max_error());
            assert!(checks.iter().all(|c| c.passes(1e-6)), "{}", q.name);
        }
    }

    #[test]
    fn invalid_joints_rejected() {
        assert!(TabularJoint::new("bad", 1, 1, 1, vec![0.5, 0.6]).is_err());
        assert!(TabularJoint::new("bad", 1, 1, 1, vec![-0.5, 1.5]).is_err());
        assert!(TabularJoint::new("bad", 9, 1, 1, vec![1.0 / 18.0; 18]).is_err());
        assert!(TabularJoint::new("bad", 1, 1, 1, vec![1.0]).is_err());
    }

    #[test]
    fn independence_gives_marginal_entropy() {
        let q = independent_joint();
        let r = tabular_equilibrium_check(&q).unwrap();
        assert!((r.h_y_given_x - r.h_y).abs() < 1e-12);
        assert!((r.identity.loss_p - binary_entropy(0.3)).abs() < 1e-12);
        // Any extractor, including one that merges everything.
        assert!((q.player_check(&[0, 0, 0, 0]).loss_p - r.h_y).abs() < 1e-12);
    }

    #[test]
    fn deterministic_label_has_zero_predictor_loss() {
        let r = tabular_equilibrium_check(&deterministic_joint()).unwrap();
        assert!(r.identity.loss_p.abs() < 1e-12);
        assert!(r.best.loss_p.abs() < 1e-12);
        assert!(r.best.brute_p.abs() < 1e-6);
    }

    #[test]
    fn random_joint_brute_force_matches() {
        for seed in 0..5 {
            let q = TabularJoint::random(4, 3, 2, seed).unwrap();
            let r = tabular_equilibrium_check(&q).unwrap();
            assert!(r.passes(1e-6), "{r:?}");
            for part in [vec![0, 0, 1, 1], vec![0, 1, 0, 2], vec![0, 0, 0, 0]] {
                assert!(q.player_check(&part).max_error() < 1e-6);
            }
        }
    }

    #[test]
    fn merging_reduces_adversary_information() {
        let r = tabular_equilibrium_check(&published_joint()).unwrap();
        assert!(r.identity.loss_d < r.best.loss_d - 0.05);
        assert!((r.best.loss_d - r.h_z_given_qy).abs() < 1e-12);
        assert!(r.passes(1e-9));
    }

    #[test]
    fn sampling_matches_joint() {
        let q = published_joint();
        let s = sample_joint(&q, 20_000, 1);
        let on = s.iter().filter(|p| p.y == 1).count() as f64 / s.len() as f64;
        assert!((on - 0.5).abs() < 0.02);
        assert_eq!(s, sample_joint(&q, 20_000, 1));
    }
}
