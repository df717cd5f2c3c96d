//! Support-function search over auxiliary policies.
//!
//! For each weight direction `(w_y, w_z)` on the positive quarter circle the
//! search maximizes the support value of a policy's rate polytope by random
//! restarts followed by coordinate-wise pattern search on softmax logits.
//! The final policy of every restart contributes its polytope to the hull, so
//! adding restarts can only grow the region.
//!
//! Directions are processed in parallel but merged in index order, and every
//! `(direction, restart)` pair owns its own ChaCha stream, so the output does
//! not depend on the number of worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channel::{AuxPolicy, GeneralChannel, SemiDetChannel};
use crate::error::{Error, Result};
use crate::prob::{entropy_of, CondKernel};
use crate::region::{polytope_from_triple, union_hull, BoundTriple, ConvexRegion2D};

/// Largest `|X| |S| + 1` the search accepts.
pub const MAX_U_CAP: usize = 32;

/// Improvements smaller than this are treated as ties (first found wins).
const IMPROVEMENT_EPS: f64 = 1e-12;

const INITIAL_STEP: f64 = 1.0;
const MIN_STEP: f64 = 1e-4;
const INIT_LOGIT_RANGE: f64 = 4.0;
/// Logit assigned to impossible `(y, s)` pairs in selection mode.
const MASKED: f64 = f64::NEG_INFINITY;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchConfig {
    pub weight_sweep_count: usize,
    pub random_restarts: usize,
    /// Maximum number of coordinate passes per local refinement.
    pub local_steps: usize,
    pub seed: u64,
    /// A pass gaining less than this (in bits) halves the step size.
    pub tolerance: f64,
    /// Search `P_{YU|S}` plus a deterministic selection `x = g(y, u, s)`
    /// instead of a free `P_{XU|S}`.
    pub selection_mode: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            weight_sweep_count: 64,
            random_restarts: 50,
            local_steps: 200,
            seed: 0,
            tolerance: 1e-9,
            selection_mode: false,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.weight_sweep_count == 0 || self.random_restarts == 0 || self.local_steps == 0 {
            return Err(Error::InvalidArgument(
                "weight_sweep_count, random_restarts and local_steps must all be at least 1".into(),
            ));
        }
        if self.tolerance.is_nan() || self.tolerance <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        Ok(())
    }

    /// Unit weight vectors spread over the positive quarter circle, both axes included.
    pub fn directions(&self) -> Vec<(f64, f64)> {
        let k = self.weight_sweep_count;
        if k == 1 {
            let h = std::f64::consts::FRAC_1_SQRT_2;
            return vec![(h, h)];
        }
        (0..k)
            .map(|i| {
                let th = std::f64::consts::FRAC_PI_2 * i as f64 / (k - 1) as f64;
                // exact axes at the endpoints
                match i {
                    0 => (1.0, 0.0),
                    _ if i == k - 1 => (0.0, 1.0),
                    _ => (th.cos(), th.sin()),
                }
            })
            .collect()
    }
}

/// Best policy found along one weight direction.
#[derive(Debug, Clone)]
pub struct DirectionBest {
    pub weights: (f64, f64),
    pub value: f64,
    pub triple: BoundTriple,
    pub policy: AuxPolicy,
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub region: ConvexRegion2D,
    pub best: Vec<DirectionBest>,
}

/// Channel data needed to evaluate bound triples quickly.
///
/// Works for general channels through the `(y | x, s)` and `(z | x, s)`
/// marginals; `a` is `I(X;Y|S) = H(Y|S) - H(Y|X,S)`, which is `H(Y|S)` when
/// `Y` is deterministic.
#[derive(Debug, Clone)]
pub(crate) struct TripleModel {
    xs: usize,
    ys: usize,
    zs: usize,
    ss: usize,
    p_s: Vec<f64>,
    wy: Vec<f64>,
    wz: Vec<f64>,
    h_y_row: Vec<f64>,
    h_s: f64,
}

impl TripleModel {
    pub(crate) fn from_semidet(ch: &SemiDetChannel) -> Self {
        let (xs, ys, zs, ss) = (ch.x_size(), ch.y_size(), ch.z_size(), ch.s_size());
        let mut wy = vec![0.0; xs * ss * ys];
        let mut wz = Vec::with_capacity(xs * ss * zs);
        for x in 0..xs {
            for s in 0..ss {
                wy[(x * ss + s) * ys + ch.f(x, s)] = 1.0;
                wz.extend_from_slice(ch.w_row(x, s));
            }
        }
        TripleModel {
            xs,
            ys,
            zs,
            ss,
            p_s: ch.p_s().as_slice().to_vec(),
            wy,
            wz,
            h_y_row: vec![0.0; xs * ss],
            h_s: ch.p_s().entropy(),
        }
    }

    pub(crate) fn from_general(ch: &GeneralChannel) -> Self {
        let (xs, ys, zs, ss) = (ch.x_size(), ch.y_size(), ch.z_size(), ch.s_size());
        let mut wy = Vec::with_capacity(xs * ss * ys);
        let mut wz = Vec::with_capacity(xs * ss * zs);
        let mut h_y_row = Vec::with_capacity(xs * ss);
        for x in 0..xs {
            for s in 0..ss {
                let mut my = ch.y_marginal(x, s);
                // a deterministic Y row summed from W can land a ulp off 1;
                // snap it so semideterministic channels evaluate identically
                // through either model
                let mut support = my.iter_mut().filter(|q| **q > 0.0);
                if let (Some(only), None) = (support.next(), support.next()) {
                    *only = 1.0;
                }
                h_y_row.push(entropy_of(&my));
                wy.extend(my);
                wz.extend(ch.z_marginal(x, s));
            }
        }
        TripleModel {
            xs,
            ys,
            zs,
            ss,
            p_s: ch.p_s().as_slice().to_vec(),
            wy,
            wz,
            h_y_row,
            h_s: ch.p_s().entropy(),
        }
    }

    /// Triple for a row-major `P_{XU|S}` (rows `s`, columns `(x, u)`).
    pub(crate) fn eval(&self, us: usize, kernel: &[f64]) -> BoundTriple {
        let (xs, ys, zs, ss) = (self.xs, self.ys, self.zs, self.ss);
        let mut p_ys = vec![0.0; ys * ss];
        let mut p_us = vec![0.0; us * ss];
        let mut p_usy = vec![0.0; us * ss * ys];
        let mut p_uz = vec![0.0; us * zs];
        let mut h_y_given_xs = 0.0;
        for s in 0..ss {
            let ps = self.p_s[s];
            let row = &kernel[s * xs * us..(s + 1) * xs * us];
            for x in 0..xs {
                let r = x * ss + s;
                let wy = &self.wy[r * ys..(r + 1) * ys];
                let wz = &self.wz[r * zs..(r + 1) * zs];
                let mut p_xs = 0.0;
                for u in 0..us {
                    let m = ps * row[x * us + u];
                    if m == 0.0 {
                        continue;
                    }
                    p_xs += m;
                    p_us[u * ss + s] += m;
                    let base = (u * ss + s) * ys;
                    for (y, &q) in wy.iter().enumerate() {
                        p_usy[base + y] += m * q;
                    }
                    for (z, &q) in wz.iter().enumerate() {
                        p_uz[u * zs + z] += m * q;
                    }
                }
                h_y_given_xs += p_xs * self.h_y_row[r];
                for (y, &q) in wy.iter().enumerate() {
                    p_ys[y * ss + s] += p_xs * q;
                }
            }
        }
        let p_u: Vec<f64> = (0..us).map(|u| p_us[u * ss..(u + 1) * ss].iter().sum()).collect();
        let p_z: Vec<f64> = (0..zs).map(|z| (0..us).map(|u| p_uz[u * zs + z]).sum()).collect();
        let h_u = entropy_of(&p_u);
        let h_ys = entropy_of(&p_ys);
        let a = h_ys - self.h_s - h_y_given_xs;
        let i_uz = h_u + entropy_of(&p_z) - entropy_of(&p_uz);
        let i_us = h_u + self.h_s - entropy_of(&p_us);
        let i_usy = h_u + h_ys - entropy_of(&p_usy);
        BoundTriple::new(a, i_uz - i_us, a + i_uz - i_usy)
    }
}

/// Selection-mode structure: which inputs are consistent with each `(y, s)`.
struct Selection {
    ys: usize,
    /// `valid[y * ss + s]` lists the `x` with `f(x, s) = y`.
    valid: Vec<Vec<usize>>,
}

impl Selection {
    fn new(ch: &SemiDetChannel) -> Self {
        let (ys, ss) = (ch.y_size(), ch.s_size());
        let mut valid = vec![Vec::new(); ys * ss];
        for x in 0..ch.x_size() {
            for s in 0..ss {
                valid[ch.f(x, s) * ss + s].push(x);
            }
        }
        Selection { ys, valid }
    }
}

struct Space<'a> {
    model: &'a TripleModel,
    us: usize,
    selection: Option<Selection>,
}

/// Point in the search space: softmax logits per state row and, in
/// selection mode, the choice index into `valid` for every `(y, u, s)`.
#[derive(Clone)]
struct Candidate {
    logits: Vec<f64>,
    choice: Vec<usize>,
}

impl Space<'_> {
    fn row_len(&self) -> usize {
        match &self.selection {
            None => self.model.xs * self.us,
            Some(sel) => sel.ys * self.us,
        }
    }

    fn random(&self, rng: &mut ChaCha8Rng) -> Candidate {
        let ss = self.model.ss;
        let row = self.row_len();
        let mut logits: Vec<f64> = (0..ss * row)
            .map(|_| rng.gen_range(-INIT_LOGIT_RANGE..INIT_LOGIT_RANGE))
            .collect();
        let mut choice = Vec::new();
        if let Some(sel) = &self.selection {
            for s in 0..ss {
                for y in 0..sel.ys {
                    if sel.valid[y * ss + s].is_empty() {
                        for u in 0..self.us {
                            logits[s * row + y * self.us + u] = MASKED;
                        }
                    }
                }
            }
            // choice indexed (y, u, s)
            for y in 0..sel.ys {
                for _u in 0..self.us {
                    for s in 0..ss {
                        let n = sel.valid[y * ss + s].len().max(1);
                        choice.push(rng.gen_range(0..n));
                    }
                }
            }
        }
        Candidate { logits, choice }
    }

    fn kernel(&self, c: &Candidate) -> Vec<f64> {
        let (xs, ss, us) = (self.model.xs, self.model.ss, self.us);
        let row = self.row_len();
        let mut probs = vec![0.0; ss * row];
        for s in 0..ss {
            let l = &c.logits[s * row..(s + 1) * row];
            let max = l.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let out = &mut probs[s * row..(s + 1) * row];
            let mut total = 0.0;
            for (o, &v) in out.iter_mut().zip(l) {
                *o = if v == MASKED { 0.0 } else { (v - max).exp() };
                total += *o;
            }
            for o in out.iter_mut() {
                *o /= total;
            }
        }
        match &self.selection {
            None => probs,
            Some(sel) => {
                let mut k = vec![0.0; ss * xs * us];
                for s in 0..ss {
                    for y in 0..sel.ys {
                        let valid = &sel.valid[y * ss + s];
                        if valid.is_empty() {
                            continue;
                        }
                        for u in 0..us {
                            let x = valid[c.choice[(y * us + u) * ss + s]];
                            k[s * xs * us + x * us + u] += probs[s * row + y * us + u];
                        }
                    }
                }
                k
            }
        }
    }

    fn triple(&self, c: &Candidate) -> BoundTriple {
        self.model.eval(self.us, &self.kernel(c))
    }

    /// Pattern search on `w . corner(polytope)`.
    fn refine(&self, mut c: Candidate, w: (f64, f64), cfg: &SearchConfig) -> (Candidate, f64) {
        let value = |c: &Candidate| self.triple(c).support(w.0, w.1);
        let mut best = value(&c);
        let mut step = INITIAL_STEP;
        for _ in 0..cfg.local_steps {
            if step < MIN_STEP {
                break;
            }
            let start = best;
            for j in 0..c.logits.len() {
                if c.logits[j] == MASKED {
                    continue;
                }
                for dir in [1.0, -1.0] {
                    let old = c.logits[j];
                    c.logits[j] = old + dir * step;
                    let v = value(&c);
                    if v > best + IMPROVEMENT_EPS {
                        best = v;
                        break;
                    }
                    c.logits[j] = old;
                }
            }
            if let Some(sel) = &self.selection {
                let (ss, us) = (self.model.ss, self.us);
                for y in 0..sel.ys {
                    for u in 0..us {
                        for s in 0..ss {
                            let i = (y * us + u) * ss + s;
                            let n = sel.valid[y * ss + s].len();
                            let old = c.choice[i];
                            for alt in (0..n).filter(|&a| a != old) {
                                c.choice[i] = alt;
                                let v = value(&c);
                                if v > best + IMPROVEMENT_EPS {
                                    best = v;
                                    break;
                                }
                                c.choice[i] = old;
                            }
                        }
                    }
                }
            }
            if best - start < cfg.tolerance {
                step *= 0.5;
            }
        }
        (c, best)
    }

    fn policy(&self, c: &Candidate) -> AuxPolicy {
        let (xs, ss, us) = (self.model.xs, self.model.ss, self.us);
        let kernel = CondKernel::new(ss, xs * us, renormalized(self.kernel(c), xs * us))
            .expect("softmax rows are normalized");
        AuxPolicy::new(us, kernel).expect("shape fixed by the space")
    }
}

/// Rescales each row so its sum is 1 to the last bit that matters.
fn renormalized(mut k: Vec<f64>, row: usize) -> Vec<f64> {
    for r in k.chunks_mut(row) {
        let t: f64 = r.iter().sum();
        r.iter_mut().for_each(|v| *v /= t);
    }
    k
}

pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub(crate) fn run_search(
    model: &TripleModel,
    us: usize,
    cfg: &SearchConfig,
    selection: Option<&SemiDetChannel>,
) -> Result<SearchOutcome> {
    if us > MAX_U_CAP {
        return Err(Error::Guard(format!(
            "|X|*|S|+1 = {us} exceeds the search limit of {MAX_U_CAP}"
        )));
    }
    let space = Space {
        model,
        us,
        selection: selection.map(Selection::new),
    };
    let restarts = cfg.random_restarts as u64;
    let dirs = cfg.directions();
    let per_direction: Vec<(DirectionBest, Vec<BoundTriple>)> = dirs
        .par_iter()
        .enumerate()
        .map(|(i, &w)| {
            let mut triples = Vec::with_capacity(cfg.random_restarts);
            let mut best: Option<(f64, Candidate, BoundTriple)> = None;
            for r in 0..restarts {
                let mut rng = stream_rng(cfg.seed, i as u64 * restarts + r);
                let start = space.random(&mut rng);
                let (c, v) = space.refine(start, w, cfg);
                let t = space.triple(&c);
                triples.push(t);
                if best.as_ref().is_none_or(|(bv, _, _)| v > *bv + IMPROVEMENT_EPS) {
                    best = Some((v, c, t));
                }
            }
            let (value, c, triple) = best.expect("at least one restart");
            let witness = DirectionBest {
                weights: w,
                value,
                triple,
                policy: space.policy(&c),
            };
            (witness, triples)
        })
        .collect();

    let mut parts = Vec::new();
    let mut best = Vec::with_capacity(per_direction.len());
    for (witness, triples) in per_direction {
        parts.extend(triples.into_iter().map(polytope_from_triple));
        best.push(witness);
    }
    Ok(SearchOutcome {
        region: union_hull(&parts)?,
        best,
    })
}
