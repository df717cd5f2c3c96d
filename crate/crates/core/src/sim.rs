//! Monte Carlo simulation of the binned random coding scheme.
//!
//! The encoder looks for a `y`-tuple in bin `m_y` and a `u`-tuple in bin
//! `m_z` that are jointly strongly typical with the state sequence, then
//! sends `x = g(y, u, s)` letter by letter, so the deterministic receiver
//! sees the chosen `y`-tuple exactly. The deterministic receiver looks its
//! sequence up in the `y`-bins; the other receiver searches the `u`-bins for
//! a tuple jointly typical with its output.
//!
//! One codebook is drawn per run (ChaCha stream 0 of the seed); trial `i`
//! draws its state, messages and channel noise from stream `i + 1`, so the
//! report does not depend on how trials are spread over threads.

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{SelectionPolicy, SemiDetChannel};
use crate::error::{Error, Result};
use crate::prob::JointDist;
use crate::search::stream_rng;

/// Largest number of tuples in either codebook, and largest number of
/// `(l_y, l_z)` pairs the encoder may scan.
pub const MAX_CODEBOOK_TUPLES: u64 = 1 << 22;

/// Largest alphabet the simulator handles (symbols are stored as bytes).
pub const MAX_SIM_ALPHABET: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: usize,
    pub rate_y: f64,
    pub rate_z: f64,
    pub cover_rate_y: f64,
    pub cover_rate_z: f64,
    pub epsilon: f64,
    pub trials: usize,
    pub seed: u64,
}

/// Bin and tuple counts, `floor(2^{nR})` each.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BookSizes {
    pub y_bins: usize,
    pub y_per_bin: usize,
    pub u_bins: usize,
    pub u_per_bin: usize,
}

fn count(n: usize, rate: f64) -> u64 {
    // a hair of slack so that e.g. 10 * 0.7 = 7.000000000000001 floors to 2^7
    let v = (n as f64 * rate).exp2() * (1.0 + 1e-12);
    if v >= u64::MAX as f64 {
        u64::MAX
    } else {
        v.floor() as u64
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidArgument("block length n must be at least 1".into()));
        }
        for (name, r) in [
            ("rate_y", self.rate_y),
            ("rate_z", self.rate_z),
            ("cover_rate_y", self.cover_rate_y),
            ("cover_rate_z", self.cover_rate_z),
        ] {
            if !(r.is_finite() && r >= 0.0) {
                return Err(Error::InvalidArgument(format!("{name} must be a nonnegative number, got {r}")));
            }
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::InvalidArgument(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        let [yb, yl, ub, ul] = [self.rate_y, self.cover_rate_y, self.rate_z, self.cover_rate_z].map(|r| count(self.n, r));
        let limit = MAX_CODEBOOK_TUPLES;
        let checks = [
            ("y-codebook 2^{n(R_y + cover_rate_y)}", yb.checked_mul(yl)),
            ("u-codebook 2^{n(R_z + cover_rate_z)}", ub.checked_mul(ul)),
            ("encoder search 2^{n(cover_rate_y + cover_rate_z)}", yl.checked_mul(ul)),
        ];
        for (what, size) in checks {
            match size {
                Some(s) if s <= limit => {}
                _ => {
                    return Err(Error::Guard(format!(
                        "{what} = {} tuples exceeds the limit of 2^22 = {limit}; lower n or the rates",
                        size.map_or_else(|| "overflow".to_string(), |s| s.to_string())
                    )))
                }
            }
        }
        Ok(())
    }

    pub fn sizes(&self) -> Result<BookSizes> {
        self.validate()?;
        let c = |r| count(self.n, r) as usize;
        Ok(BookSizes {
            y_bins: c(self.rate_y),
            y_per_bin: c(self.cover_rate_y),
            u_bins: c(self.rate_z),
            u_per_bin: c(self.cover_rate_z),
        })
    }
}

/// Strong typicality test on flat tables, reused across many sequences.
#[derive(Debug, Clone)]
pub(crate) struct Typicality {
    sizes: Vec<usize>,
    probs: Vec<f64>,
    eps: f64,
}

impl Typicality {
    pub(crate) fn new(sizes: Vec<usize>, probs: Vec<f64>, eps: f64) -> Self {
        debug_assert_eq!(sizes.iter().product::<usize>(), probs.len());
        Typicality { sizes, probs, eps }
    }

    /// `seqs` are in axis order and all of the same length.
    pub(crate) fn check(&self, seqs: &[&[u8]], counts: &mut Vec<u32>) -> bool {
        let n = seqs[0].len();
        counts.clear();
        counts.resize(self.probs.len(), 0);
        for i in 0..n {
            let mut flat = 0;
            for (seq, &size) in seqs.iter().zip(&self.sizes) {
                flat = flat * size + seq[i] as usize;
            }
            if self.probs[flat] == 0.0 {
                return false;
            }
            counts[flat] += 1;
        }
        let n = n as f64;
        self.probs.iter().zip(counts.iter()).all(|(&p, &c)| {
            let dev = (c as f64 - n * p).abs();
            dev <= self.eps * n * p * (1.0 + 1e-12) + 1e-12
        })
    }
}

/// True iff every symbol tuple's empirical frequency is within `eps * P(a)`
/// of `P(a)` and no tuple outside the support of `joint` occurs.
///
/// `seqs` holds one sequence per axis of `joint`, in the joint's axis order.
pub fn strongly_typical(seqs: &[&[usize]], joint: &JointDist, eps: f64) -> Result<bool> {
    let sizes: Vec<usize> = joint.axes().iter().map(|a| a.size).collect();
    if seqs.len() != sizes.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} sequences for a joint over {} axes",
            seqs.len(),
            sizes.len()
        )));
    }
    let n = seqs[0].len();
    if seqs.iter().any(|s| s.len() != n) {
        return Err(Error::DimensionMismatch("sequences differ in length".into()));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("typicality needs nonempty sequences".into()));
    }
    let mut bytes = Vec::with_capacity(seqs.len());
    for (seq, (a, &size)) in seqs.iter().zip(joint.axes().iter().zip(&sizes)) {
        if size > MAX_SIM_ALPHABET {
            return Err(Error::Guard(format!("|{}| = {size} exceeds {MAX_SIM_ALPHABET}", a.name)));
        }
        if let Some(&bad) = seq.iter().find(|&&v| v >= size) {
            return Err(Error::DimensionMismatch(format!("symbol {bad} outside |{}| = {size}", a.name)));
        }
        bytes.push(seq.iter().map(|&v| v as u8).collect::<Vec<u8>>());
    }
    let refs: Vec<&[u8]> = bytes.iter().map(|b| b.as_slice()).collect();
    let t = Typicality::new(sizes, joint.mass().to_vec(), eps);
    Ok(t.check(&refs, &mut Vec::new()))
}

/// Binned `y`- and `u`-tuples plus a lookup table from `y`-tuples to bins.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    n: usize,
    sizes: BookSizes,
    y_alphabet: usize,
    y_tuples: Vec<u8>,
    u_tuples: Vec<u8>,
    /// Sorted `(packed y-tuple, bin)`; `COLLISION` marks tuples in several bins.
    y_index: Vec<(u128, u32)>,
}

const COLLISION: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum DecodeError {
    #[error("collision")]
    Collision,
    #[error("not-found")]
    NotFound,
}

impl Codebook {
    /// Builds a codebook from explicit tuples, `y_tuples[(m_y * y_per_bin + l_y) * n + i]`
    /// and likewise for `u_tuples`.
    pub fn from_tuples(
        n: usize,
        sizes: BookSizes,
        y_alphabet: usize,
        y_tuples: Vec<u8>,
        u_tuples: Vec<u8>,
    ) -> Result<Self> {
        let ny = sizes.y_bins * sizes.y_per_bin * n;
        let nu = sizes.u_bins * sizes.u_per_bin * n;
        if y_tuples.len() != ny || u_tuples.len() != nu {
            return Err(Error::DimensionMismatch(format!(
                "codebook needs {ny} y-symbols and {nu} u-symbols, got {} and {}",
                y_tuples.len(),
                u_tuples.len()
            )));
        }
        if (y_alphabet.max(2) as f64).log2() * n as f64 > 128.0 {
            return Err(Error::Guard(format!(
                "|Y|^n = {y_alphabet}^{n} is too large to index y-tuples (limit 2^128)"
            )));
        }
        if let Some(&bad) = y_tuples.iter().find(|&&v| v as usize >= y_alphabet) {
            return Err(Error::DimensionMismatch(format!("y-symbol {bad} outside |Y| = {y_alphabet}")));
        }
        let mut y_index: Vec<(u128, u32)> = y_tuples
            .chunks(n.max(1))
            .enumerate()
            .map(|(k, t)| (pack(t, y_alphabet), (k / sizes.y_per_bin) as u32))
            .collect();
        y_index.sort_unstable();
        y_index.dedup();
        let mut merged: Vec<(u128, u32)> = Vec::with_capacity(y_index.len());
        for (key, bin) in y_index {
            match merged.last_mut() {
                Some(last) if last.0 == key => last.1 = COLLISION,
                _ => merged.push((key, bin)),
            }
        }
        Ok(Codebook {
            n,
            sizes,
            y_alphabet,
            y_tuples,
            u_tuples,
            y_index: merged,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn sizes(&self) -> BookSizes {
        self.sizes
    }

    pub fn y_tuple(&self, m_y: usize, l_y: usize) -> &[u8] {
        let k = m_y * self.sizes.y_per_bin + l_y;
        &self.y_tuples[k * self.n..(k + 1) * self.n]
    }

    pub fn u_tuple(&self, m_z: usize, l_z: usize) -> &[u8] {
        let k = m_z * self.sizes.u_per_bin + l_z;
        &self.u_tuples[k * self.n..(k + 1) * self.n]
    }
}

fn pack(seq: &[u8], alphabet: usize) -> u128 {
    seq.iter().fold(0u128, |acc, &v| acc * alphabet as u128 + v as u128)
}

fn draw_iid(rng: &mut ChaCha8Rng, dist: &WeightedIndex<f64>, len: usize) -> Vec<u8> {
    (0..len).map(|_| dist.sample(rng) as u8).collect()
}

fn weighted(p: &[f64], what: &str) -> Result<WeightedIndex<f64>> {
    WeightedIndex::new(p).map_err(|e| Error::InvalidArgument(format!("cannot sample from {what}: {e}")))
}

/// IID tuples from `p_y` and `p_u`, all drawn from the given stream in a
/// fixed order (all `y`-tuples, then all `u`-tuples).
pub fn generate_codebook(p_y: &[f64], p_u: &[f64], cfg: &SimConfig, rng: &mut ChaCha8Rng) -> Result<Codebook> {
    let sizes = cfg.sizes()?;
    for (p, name) in [(p_y, "Y"), (p_u, "U")] {
        if p.len() > MAX_SIM_ALPHABET {
            return Err(Error::Guard(format!("|{name}| = {} exceeds {MAX_SIM_ALPHABET}", p.len())));
        }
    }
    let dy = weighted(p_y, "P_Y")?;
    let du = weighted(p_u, "P_U")?;
    let y = draw_iid(rng, &dy, sizes.y_bins * sizes.y_per_bin * cfg.n);
    let u = draw_iid(rng, &du, sizes.u_bins * sizes.u_per_bin * cfg.n);
    Codebook::from_tuples(cfg.n, sizes, p_y.len(), y, u)
}

/// Channel and selection policy in the form the simulator needs.
#[derive(Debug, Clone)]
pub struct SimModel {
    ys: usize,
    us: usize,
    ss: usize,
    zs: usize,
    p_y: Vec<f64>,
    p_u: Vec<f64>,
    p_s: Vec<f64>,
    /// `(y, u, s)`
    p_yus: Vec<f64>,
    /// `(y, s)` and `(u, s)` marginals, used to prefilter candidates
    p_ys: Vec<f64>,
    p_us: Vec<f64>,
    /// `(u, z)`
    p_uz: Vec<f64>,
    /// `(y * |U| + u) * |S| + s`
    g: Vec<u8>,
    /// `x * |S| + s`
    f: Vec<u8>,
    w_rows: Vec<WeightedIndex<f64>>,
}

impl SimModel {
    pub fn new(ch: &SemiDetChannel, pol: &SelectionPolicy) -> Result<Self> {
        pol.validate(ch)?;
        let (xs, ys, zs, ss, us) = (ch.x_size(), ch.y_size(), ch.z_size(), ch.s_size(), pol.u_size());
        for (name, size) in [("X", xs), ("Y", ys), ("Z", zs), ("S", ss), ("U", us)] {
            if size > MAX_SIM_ALPHABET {
                return Err(Error::Guard(format!("|{name}| = {size} exceeds {MAX_SIM_ALPHABET}")));
            }
        }
        let p_s = ch.p_s().as_slice().to_vec();
        let mut p_yus = vec![0.0; ys * us * ss];
        let mut p_uz = vec![0.0; us * zs];
        for y in 0..ys {
            for u in 0..us {
                for s in 0..ss {
                    let m = p_s[s] * pol.p_yu_given_s().get(s, y * us + u);
                    p_yus[(y * us + u) * ss + s] = m;
                    if m > 0.0 {
                        for (z, &w) in ch.w_row(pol.g(y, u, s), s).iter().enumerate() {
                            p_uz[u * zs + z] += m * w;
                        }
                    }
                }
            }
        }
        let mut p_y = vec![0.0; ys];
        let mut p_u = vec![0.0; us];
        let mut p_ys = vec![0.0; ys * ss];
        let mut p_us = vec![0.0; us * ss];
        for y in 0..ys {
            for u in 0..us {
                for s in 0..ss {
                    let m = p_yus[(y * us + u) * ss + s];
                    p_y[y] += m;
                    p_u[u] += m;
                    p_ys[y * ss + s] += m;
                    p_us[u * ss + s] += m;
                }
            }
        }
        let w_rows = (0..xs * ss)
            .map(|r| weighted(ch.w_row(r / ss, r % ss), "W(z|x,s)"))
            .collect::<Result<Vec<_>>>()?;
        Ok(SimModel {
            ys,
            us,
            ss,
            zs,
            p_y,
            p_u,
            p_s,
            p_yus,
            p_ys,
            p_us,
            p_uz,
            g: pol.g_table().iter().map(|&x| x as u8).collect(),
            f: ch.f_table().iter().map(|&y| y as u8).collect(),
            w_rows,
        })
    }

    pub fn p_y(&self) -> &[f64] {
        &self.p_y
    }

    pub fn p_u(&self) -> &[f64] {
        &self.p_u
    }

    fn g(&self, y: u8, u: u8, s: u8) -> u8 {
        self.g[(y as usize * self.us + u as usize) * self.ss + s as usize]
    }
}

/// Result of one encoding attempt.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Encoded {
    pub x: Vec<u8>,
    /// `(l_y, l_z)` of the chosen pair, when covering succeeded.
    pub chosen: Option<(usize, usize)>,
}

impl Encoded {
    pub fn encoder_ok(&self) -> bool {
        self.chosen.is_some()
    }
}

/// Scans `(l_y, l_z)` lexicographically for the first pair jointly typical
/// with `s_seq` under `P_{YUS}`; sends the all-zero codeword if none is.
pub fn encode(cb: &Codebook, model: &SimModel, eps: f64, m_y: usize, m_z: usize, s_seq: &[u8]) -> Encoded {
    let sz = cb.sizes();
    let yus = Typicality::new(vec![model.ys, model.us, model.ss], model.p_yus.clone(), eps);
    let ys = Typicality::new(vec![model.ys, model.ss], model.p_ys.clone(), eps);
    let us = Typicality::new(vec![model.us, model.ss], model.p_us.clone(), eps);
    let mut counts = Vec::new();
    // joint typicality implies typicality of each pair marginal at the same
    // slack, so candidates failing those can be skipped without changing the
    // outcome
    let u_ok: Vec<usize> = (0..sz.u_per_bin)
        .filter(|&l| us.check(&[cb.u_tuple(m_z, l), s_seq], &mut counts))
        .collect();
    if !u_ok.is_empty() {
        for l_y in 0..sz.y_per_bin {
            let y = cb.y_tuple(m_y, l_y);
            if !ys.check(&[y, s_seq], &mut counts) {
                continue;
            }
            for &l_z in &u_ok {
                let u = cb.u_tuple(m_z, l_z);
                if yus.check(&[y, u, s_seq], &mut counts) {
                    let x = (0..s_seq.len()).map(|i| model.g(y[i], u[i], s_seq[i])).collect();
                    return Encoded {
                        x,
                        chosen: Some((l_y, l_z)),
                    };
                }
            }
        }
    }
    Encoded {
        x: vec![0; s_seq.len()],
        chosen: None,
    }
}

/// The unique `y`-bin containing `y_seq`.
pub fn decode_det(cb: &Codebook, y_seq: &[u8]) -> std::result::Result<usize, DecodeError> {
    if y_seq.len() != cb.n || y_seq.iter().any(|&v| v as usize >= cb.y_alphabet) {
        return Err(DecodeError::NotFound);
    }
    let key = pack(y_seq, cb.y_alphabet);
    match cb.y_index.binary_search_by(|e| e.0.cmp(&key)) {
        Ok(i) if cb.y_index[i].1 == COLLISION => Err(DecodeError::Collision),
        Ok(i) => Ok(cb.y_index[i].1 as usize),
        Err(_) => Err(DecodeError::NotFound),
    }
}

/// The unique `u`-bin holding a tuple jointly typical with `z_seq` under
/// `P_{UZ}` at slack `2 eps`.
pub fn decode_nondet(cb: &Codebook, model: &SimModel, eps: f64, z_seq: &[u8]) -> std::result::Result<usize, DecodeError> {
    let uz = Typicality::new(vec![model.us, model.zs], model.p_uz.clone(), 2.0 * eps);
    let mut counts = Vec::new();
    let sz = cb.sizes();
    let mut found = None;
    for m in 0..sz.u_bins {
        let hit = (0..sz.u_per_bin).any(|l| uz.check(&[cb.u_tuple(m, l), z_seq], &mut counts));
        if hit {
            if found.is_some() {
                return Err(DecodeError::Collision);
            }
            found = Some(m);
        }
    }
    found.ok_or(DecodeError::NotFound)
}

/// Outcome of one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialOutcome {
    pub encoder_ok: bool,
    pub det_ok: bool,
    pub nondet_ok: bool,
}

/// Empirical error rates over a run. With zero trials every rate is zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub n: usize,
    pub trials: usize,
    pub encoder_fail_rate: f64,
    pub det_err_rate: f64,
    pub nondet_err_rate: f64,
    /// Either receiver decoded the wrong message.
    pub overall_err_rate: f64,
    pub seed: u64,
}

impl SimReport {
    /// `key = value` lines in a fixed field order.
    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("flat struct of numbers")
    }
}

fn run_one(cb: &Codebook, model: &SimModel, cfg: &SimConfig, rng: &mut ChaCha8Rng) -> Result<TrialOutcome> {
    let n = cfg.n;
    let sz = cb.sizes();
    let ds = weighted(&model.p_s, "P_S")?;
    let s_seq = draw_iid(rng, &ds, n);
    let m_y = rng.gen_range(0..sz.y_bins);
    let m_z = rng.gen_range(0..sz.u_bins);
    let enc = encode(cb, model, cfg.epsilon, m_y, m_z, &s_seq);
    let mut y_seq = Vec::with_capacity(n);
    let mut z_seq = Vec::with_capacity(n);
    for (&x, &s) in enc.x.iter().zip(&s_seq) {
        let r = x as usize * model.ss + s as usize;
        y_seq.push(model.f[r]);
        z_seq.push(model.w_rows[r].sample(rng) as u8);
    }
    if let Some((l_y, _)) = enc.chosen {
        debug_assert_eq!(y_seq, cb.y_tuple(m_y, l_y));
    }
    Ok(TrialOutcome {
        encoder_ok: enc.encoder_ok(),
        det_ok: decode_det(cb, &y_seq) == Ok(m_y),
        nondet_ok: decode_nondet(cb, model, cfg.epsilon, &z_seq) == Ok(m_z),
    })
}

/// Per-trial outcomes, in trial order.
pub fn run_trial_outcomes(ch: &SemiDetChannel, pol: &SelectionPolicy, cfg: &SimConfig) -> Result<Vec<TrialOutcome>> {
    cfg.validate()?;
    let model = SimModel::new(ch, pol)?;
    if cfg.trials == 0 {
        return Ok(Vec::new());
    }
    let cb = generate_codebook(&model.p_y, &model.p_u, cfg, &mut stream_rng(cfg.seed, 0))?;
    (0..cfg.trials)
        .into_par_iter()
        .map(|i| run_one(&cb, &model, cfg, &mut stream_rng(cfg.seed, i as u64 + 1)))
        .collect()
}

pub fn run_trials(ch: &SemiDetChannel, pol: &SelectionPolicy, cfg: &SimConfig) -> Result<SimReport> {
    let outcomes = run_trial_outcomes(ch, pol, cfg)?;
    let rate = |bad: usize| if cfg.trials == 0 { 0.0 } else { bad as f64 / cfg.trials as f64 };
    let count = |pred: fn(&TrialOutcome) -> bool| outcomes.iter().filter(|o| pred(o)).count();
    Ok(SimReport {
        n: cfg.n,
        trials: cfg.trials,
        encoder_fail_rate: rate(count(|o| !o.encoder_ok)),
        det_err_rate: rate(count(|o| !o.det_ok)),
        nondet_err_rate: rate(count(|o| !o.nondet_ok)),
        overall_err_rate: rate(count(|o| !(o.det_ok && o.nondet_ok))),
        seed: cfg.seed,
    })
}
