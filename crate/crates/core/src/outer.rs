//! Outer bounds for general state-dependent broadcast channels.
//!
//! [`outer_triple`] replaces `H(Y|S)` by `I(X;Y|S)` and otherwise mirrors
//! the inner bound; on semideterministic channels the two coincide. The
//! search-based [`outer_region_estimate`] can only under-cover the true outer
//! region, so its output carries the [`ESTIMATE_MARKER`].
//!
//! [`causal_outer_region`] handles causal state knowledge: the encoder picks a
//! strategy letter `t: S -> X` and the region is the hull of rectangles
//! `[0, I(T;Y)] x [0, I(T;Z)]` over distributions on strategy letters.

use rand::Rng;
use rayon::prelude::*;

use crate::channel::{joint_from_general, AuxPolicy, GeneralChannel};
use crate::error::{Error, Result};
use crate::prob::AxisName::{S, U, X, Y, Z};
use crate::prob::entropy_of;
use crate::region::{BoundTriple, ConvexRegion2D, RatePair};
use crate::search::{run_search, stream_rng, DirectionBest, SearchConfig, TripleModel};

/// Metadata tag attached to every search-based outer region.
pub const ESTIMATE_MARKER: &str = "lower-bound-of-outer-bound";

/// Largest number of strategy letters `|X|^|S|` the causal search accepts.
pub const MAX_STRATEGIES: usize = 256;

/// `(I(X;Y|S), I(U;Z) - I(U;S), I(X;Y|S) + I(U;Z) - I(U;S,Y))`.
pub fn outer_triple(ch: &GeneralChannel, pol: &AuxPolicy) -> Result<BoundTriple> {
    let j = joint_from_general(ch, pol)?;
    let a = j.conditional_mutual_info(&[X], &[Y], &[S])?;
    let i_uz = j.mutual_info(&[U], &[Z])?;
    let b = i_uz - j.mutual_info(&[U], &[S])?;
    let c = a + i_uz - j.mutual_info(&[U], &[S, Y])?;
    Ok(BoundTriple::new(a, b, c))
}

#[derive(Debug, Clone)]
pub struct OuterEstimate {
    pub region: ConvexRegion2D,
    /// Always [`ESTIMATE_MARKER`].
    pub estimate: &'static str,
    pub best: Vec<DirectionBest>,
}

/// Hull of the outer-bound polytopes of every searched policy, with
/// `|U| = |X| |S| + 1`.
pub fn outer_region_estimate(ch: &GeneralChannel, cfg: &SearchConfig) -> Result<OuterEstimate> {
    cfg.validate()?;
    if cfg.selection_mode {
        return Err(Error::InvalidArgument(
            "selection mode needs a deterministic Y and is not available for general channels".into(),
        ));
    }
    let model = TripleModel::from_general(ch);
    let out = run_search(&model, ch.u_cap(), cfg, None)?;
    Ok(OuterEstimate {
        region: out.region,
        estimate: ESTIMATE_MARKER,
        best: out.best,
    })
}

/// A deterministic map `S -> X`, numbered in mixed radix with the digit for
/// `s = 0` least significant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StrategyLetter {
    pub index: usize,
    pub table: Vec<usize>,
}

impl StrategyLetter {
    pub fn decode(index: usize, x_size: usize, s_size: usize) -> Result<Self> {
        let count = strategy_count(x_size, s_size)?;
        if index >= count {
            return Err(Error::InvalidArgument(format!(
                "strategy index {index} out of range 0..{count}"
            )));
        }
        let mut rest = index;
        let table = (0..s_size)
            .map(|_| {
                let x = rest % x_size;
                rest /= x_size;
                x
            })
            .collect();
        Ok(StrategyLetter { index, table })
    }

    pub fn encode(table: &[usize], x_size: usize) -> usize {
        table.iter().rev().fold(0, |acc, &x| acc * x_size + x)
    }
}

fn strategy_count(x_size: usize, s_size: usize) -> Result<usize> {
    u32::try_from(s_size)
        .ok()
        .and_then(|s| x_size.checked_pow(s))
        .filter(|&n| n <= MAX_STRATEGIES)
        .ok_or_else(|| {
            Error::Guard(format!(
                "|X|^|S| = {x_size}^{s_size} exceeds the strategy limit of {MAX_STRATEGIES}"
            ))
        })
}

/// All strategy letters in index order.
pub fn strategy_letters(x_size: usize, s_size: usize) -> Result<Vec<StrategyLetter>> {
    let n = strategy_count(x_size, s_size)?;
    (0..n).map(|i| StrategyLetter::decode(i, x_size, s_size)).collect()
}

/// The channel seen through strategy letters: `P(y|t)` and `P(z|t)`.
struct StrategyChannel {
    ys: usize,
    zs: usize,
    p_y: Vec<f64>,
    p_z: Vec<f64>,
}

impl StrategyChannel {
    fn new(ch: &GeneralChannel, letters: &[StrategyLetter]) -> Self {
        let (ys, zs) = (ch.y_size(), ch.z_size());
        let mut p_y = vec![0.0; letters.len() * ys];
        let mut p_z = vec![0.0; letters.len() * zs];
        for (t, letter) in letters.iter().enumerate() {
            for (s, &x) in letter.table.iter().enumerate() {
                let ps = ch.p_s().as_slice()[s];
                for (y, q) in ch.y_marginal(x, s).into_iter().enumerate() {
                    p_y[t * ys + y] += ps * q;
                }
                for (z, q) in ch.z_marginal(x, s).into_iter().enumerate() {
                    p_z[t * zs + z] += ps * q;
                }
            }
        }
        StrategyChannel { ys, zs, p_y, p_z }
    }

    fn letters(&self) -> usize {
        self.p_y.len() / self.ys
    }

    /// `(I(T;Y), I(T;Z))` in bits.
    fn rates(&self, p_t: &[f64]) -> RatePair {
        RatePair::new(
            mutual_info_through(p_t, &self.p_y, self.ys),
            mutual_info_through(p_t, &self.p_z, self.zs),
        )
    }

    /// Per-letter divergences `D(P_{Y|t} || P_Y)` and `D(P_{Z|t} || P_Z)`,
    /// weighted and summed.
    fn gradient(&self, p_t: &[f64], w: (f64, f64)) -> Vec<f64> {
        let dy = divergences(p_t, &self.p_y, self.ys);
        let dz = divergences(p_t, &self.p_z, self.zs);
        dy.iter().zip(&dz).map(|(a, b)| w.0 * a + w.1 * b).collect()
    }
}

fn output_marginal(p_t: &[f64], kernel: &[f64], width: usize) -> Vec<f64> {
    let mut out = vec![0.0; width];
    for (t, &pt) in p_t.iter().enumerate() {
        for (o, &k) in out.iter_mut().zip(&kernel[t * width..(t + 1) * width]) {
            *o += pt * k;
        }
    }
    out
}

fn mutual_info_through(p_t: &[f64], kernel: &[f64], width: usize) -> f64 {
    let h_out = entropy_of(&output_marginal(p_t, kernel, width));
    let h_cond: f64 = p_t
        .iter()
        .enumerate()
        .filter(|(_, &pt)| pt > 0.0)
        .map(|(t, &pt)| pt * entropy_of(&kernel[t * width..(t + 1) * width]))
        .sum();
    h_out - h_cond
}

fn divergences(p_t: &[f64], kernel: &[f64], width: usize) -> Vec<f64> {
    let q = output_marginal(p_t, kernel, width);
    kernel
        .chunks(width)
        .map(|row| {
            row.iter()
                .zip(&q)
                .filter(|(&r, _)| r > 0.0)
                .map(|(&r, &qv)| if qv > 0.0 { r * (r / qv).log2() } else { f64::INFINITY })
                .sum()
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct CausalOutcome {
    pub region: ConvexRegion2D,
    pub strategies: Vec<StrategyLetter>,
}

/// Hull of `[0, I(T;Y)] x [0, I(T;Z)]` over distributions on strategy letters.
///
/// Every uniform mixture of at most two letters is evaluated exactly; each
/// weight direction then runs multiplicative (mirror) ascent from the best
/// of those and from `random_restarts` random points of the simplex.
pub fn causal_outer_search(ch: &GeneralChannel, cfg: &SearchConfig) -> Result<CausalOutcome> {
    cfg.validate()?;
    let strategies = strategy_letters(ch.x_size(), ch.s_size())?;
    let sc = StrategyChannel::new(ch, &strategies);
    let n = sc.letters();

    let mut seeds = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        for j in i..n {
            let mut p = vec![0.0; n];
            p[i] += 0.5;
            p[j] += 0.5;
            seeds.push(p);
        }
    }
    let seed_rates: Vec<RatePair> = seeds.iter().map(|p| sc.rates(p)).collect();

    let dirs = cfg.directions();
    let restarts = cfg.random_restarts as u64;
    let per_direction: Vec<Vec<RatePair>> = dirs
        .par_iter()
        .enumerate()
        .map(|(i, &w)| {
            let score = |r: RatePair| w.0 * r.r_y + w.1 * r.r_z;
            let first = (0..seeds.len())
                .fold(0, |best, k| if score(seed_rates[k]) > score(seed_rates[best]) + 1e-12 { k } else { best });
            let mut found = vec![ascend(&sc, seeds[first].clone(), w, cfg)];
            for r in 0..restarts {
                let mut rng = stream_rng(cfg.seed, i as u64 * restarts + r);
                let raw: Vec<f64> = (0..n).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
                let total: f64 = raw.iter().sum();
                let start = raw.iter().map(|v| v / total).collect();
                found.push(ascend(&sc, start, w, cfg));
            }
            found
        })
        .collect();

    let mut pts = vec![RatePair::ORIGIN];
    let corners = seed_rates.into_iter().chain(per_direction.into_iter().flatten());
    for c in corners {
        let c = RatePair::new(c.r_y.max(0.0), c.r_z.max(0.0));
        pts.extend([c, RatePair::new(c.r_y, 0.0), RatePair::new(0.0, c.r_z)]);
    }
    Ok(CausalOutcome {
        region: ConvexRegion2D::hull(&pts)?,
        strategies,
    })
}

/// [`causal_outer_search`] without the strategy list.
pub fn causal_outer_region(ch: &GeneralChannel, cfg: &SearchConfig) -> Result<ConvexRegion2D> {
    Ok(causal_outer_search(ch, cfg)?.region)
}

/// Exponentiated-gradient ascent on `w_y I(T;Y) + w_z I(T;Z)`, which is
/// concave in `P_T`. Steps that do not improve are halved.
fn ascend(sc: &StrategyChannel, mut p: Vec<f64>, w: (f64, f64), cfg: &SearchConfig) -> RatePair {
    let value = |p: &[f64]| {
        let r = sc.rates(p);
        w.0 * r.r_y + w.1 * r.r_z
    };
    let mut best = value(&p);
    let mut eta = 1.0;
    for _ in 0..cfg.local_steps {
        let g = sc.gradient(&p, w);
        let top = g.iter().copied().filter(|v| v.is_finite()).fold(0.0, f64::max);
        let mut next: Vec<f64> = p
            .iter()
            .zip(&g)
            .map(|(&pt, &gt)| pt * (eta * (gt.min(top) - top)).exp2())
            .collect();
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|v| *v /= total);
        let v = value(&next);
        if v > best {
            let gain = v - best;
            best = v;
            p = next;
            if gain < cfg.tolerance {
                break;
            }
        } else {
            eta *= 0.5;
            if eta < 1e-6 {
                break;
            }
        }
    }
    sc.rates(&p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::binary::{build_channel, bsc_policy, causal_region, BinaryExampleParams};
    use crate::capacity::bound_triple;
    use crate::prob::{binary_entropy, CondKernel, ProbVec};
    use crate::region::hausdorff;
    use approx::assert_abs_diff_eq;

    fn example(p: f64) -> GeneralChannel {
        build_channel(BinaryExampleParams::new(0.5, p).unwrap())
            .unwrap()
            .to_general()
    }

    #[test]
    fn matches_inner_triple_on_binary_example() {
        let semi = build_channel(BinaryExampleParams::new(0.5, 0.2).unwrap()).unwrap();
        let pol = bsc_policy(0.1).unwrap();
        let o = outer_triple(&semi.to_general(), &pol).unwrap();
        let i = bound_triple(&semi, &pol).unwrap();
        assert_abs_diff_eq!(o.a, i.a, epsilon = 1e-12);
        assert_abs_diff_eq!(o.b, i.b, epsilon = 1e-12);
        assert_abs_diff_eq!(o.c, i.c, epsilon = 1e-12);
        assert_abs_diff_eq!(o.b, 0.1732536, epsilon = 1e-7);
    }

    #[test]
    fn constant_u_gives_b_zero() {
        let k = CondKernel::from_rows(vec![vec![0.5, 0.5], vec![0.2, 0.8]]).unwrap();
        let t = outer_triple(&example(0.2), &AuxPolicy::new(1, k).unwrap()).unwrap();
        assert_abs_diff_eq!(t.b, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(t.c, t.a, epsilon = 1e-12);
    }

    #[test]
    fn fast_model_matches_joint_route_for_noisy_y() {
        // Y noisy, so I(X;Y|S) < H(Y|S)
        let rows = vec![
            vec![0.5, 0.1, 0.3, 0.1],
            vec![0.1, 0.2, 0.3, 0.4],
            vec![0.25, 0.25, 0.4, 0.1],
            vec![0.0, 0.6, 0.1, 0.3],
        ];
        let ch = GeneralChannel::new(2, 2, 2, CondKernel::from_rows(rows).unwrap(), ProbVec::new(vec![0.3, 0.7]).unwrap())
            .unwrap();
        let k = CondKernel::from_rows(vec![vec![0.1, 0.2, 0.3, 0.4], vec![0.4, 0.0, 0.5, 0.1]]).unwrap();
        let pol = AuxPolicy::new(2, k).unwrap();
        let slow = outer_triple(&ch, &pol).unwrap();
        let fast = TripleModel::from_general(&ch).eval(2, pol.kernel().as_slice());
        assert_abs_diff_eq!(slow.a, fast.a, epsilon = 1e-12);
        assert_abs_diff_eq!(slow.b, fast.b, epsilon = 1e-12);
        assert_abs_diff_eq!(slow.c, fast.c, epsilon = 1e-12);
    }

    #[test]
    fn y_independent_of_input_has_no_y_extent() {
        let row = vec![0.1, 0.2, 0.3, 0.4];
        let ch = GeneralChannel::new(
            2,
            2,
            2,
            CondKernel::from_rows(vec![row.clone(), vec![0.4, 0.0, 0.6, 0.0], row.clone(), vec![0.0, 0.4, 0.0, 0.6]]).unwrap(),
            ProbVec::new(vec![0.5, 0.5]).unwrap(),
        )
        .unwrap();
        // (x=0,s=0) and (x=1,s=0) share P(y) = (0.4, 0.6); so do s=1 rows
        let cfg = SearchConfig {
            weight_sweep_count: 4,
            random_restarts: 2,
            local_steps: 20,
            ..SearchConfig::default()
        };
        let est = outer_region_estimate(&ch, &cfg).unwrap();
        assert_eq!(est.estimate, ESTIMATE_MARKER);
        assert!(est.region.max_along(1.0, 0.0) < 1e-9);
    }

    #[test]
    fn strategy_indexing() {
        let all = strategy_letters(2, 2).unwrap();
        assert_eq!(all.len(), 4);
        assert_eq!(all[2].table, vec![0, 1]);
        assert_eq!(all[1].table, vec![1, 0]);
        for l in &all {
            assert_eq!(StrategyLetter::encode(&l.table, 2), l.index);
        }
        let t = StrategyLetter::decode(5, 3, 2).unwrap();
        assert_eq!(t.table, vec![2, 1]);
        assert!(strategy_letters(2, 9).is_err());
        assert!(strategy_letters(4, 4).is_ok());
        assert!(matches!(strategy_letters(3, 6), Err(Error::Guard(_))));
    }

    #[test]
    fn identity_strategy_carries_nothing() {
        let ch = example(0.2);
        let letters = strategy_letters(2, 2).unwrap();
        let sc = StrategyChannel::new(&ch, &letters);
        let r = sc.rates(&[0.0, 0.0, 1.0, 0.0]);
        assert_abs_diff_eq!(r.r_y, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.r_z, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn causal_binary_is_the_triangle() {
        let cfg = SearchConfig {
            weight_sweep_count: 16,
            random_restarts: 4,
            ..SearchConfig::default()
        };
        for p in [0.1, 0.2, 0.35] {
            let out = causal_outer_search(&example(p), &cfg).unwrap();
            assert_eq!(out.strategies.len(), 4);
            let want = causal_region(p).unwrap();
            let d = hausdorff(&out.region, &want);
            assert!(d < 1e-9, "p = {p}: {d}");
        }
        let k = 1.0 - binary_entropy(0.2).unwrap();
        assert_abs_diff_eq!(k, 0.2780719051126377, epsilon = 1e-15);
    }

    #[test]
    fn point_mass_rectangles_are_inside() {
        let rows = vec![
            vec![0.5, 0.1, 0.3, 0.1, 0.0, 0.0],
            vec![0.1, 0.2, 0.3, 0.1, 0.2, 0.1],
            vec![0.25, 0.25, 0.1, 0.1, 0.2, 0.1],
            vec![0.0, 0.6, 0.1, 0.1, 0.1, 0.1],
            vec![0.3, 0.3, 0.0, 0.1, 0.2, 0.1],
            vec![0.0, 0.0, 0.5, 0.5, 0.0, 0.0],
        ];
        let ch = GeneralChannel::new(
            3,
            3,
            2,
            CondKernel::from_rows(rows).unwrap(),
            ProbVec::new(vec![0.6, 0.4]).unwrap(),
        )
        .unwrap();
        let cfg = SearchConfig {
            weight_sweep_count: 8,
            random_restarts: 3,
            ..SearchConfig::default()
        };
        let out = causal_outer_search(&ch, &cfg).unwrap();
        assert_eq!(out.strategies.len(), 9);
        let sc = StrategyChannel::new(&ch, &out.strategies);
        for t in 0..9 {
            let mut p = vec![0.0; 9];
            p[t] = 1.0;
            assert!(out.region.distance(sc.rates(&p)) < 1e-12);
        }
    }

    #[test]
    fn state_free_reduces_to_input_letters() {
        // |S| = 1: strategies are inputs; Y = x, Z = x through BSC(0.1)
        let ch = GeneralChannel::new(
            2,
            2,
            2,
            CondKernel::from_rows(vec![vec![0.9, 0.1, 0.0, 0.0], vec![0.0, 0.0, 0.1, 0.9]]).unwrap(),
            ProbVec::new(vec![1.0]).unwrap(),
        )
        .unwrap();
        let cfg = SearchConfig {
            weight_sweep_count: 8,
            random_restarts: 2,
            ..SearchConfig::default()
        };
        let out = causal_outer_search(&ch, &cfg).unwrap();
        assert_eq!(out.strategies.len(), 2);
        // uniform input maximizes both; the hull is one rectangle
        let rect = ConvexRegion2D::hull(&[
            RatePair::ORIGIN,
            RatePair::new(1.0, 0.0),
            RatePair::new(0.0, 1.0 - binary_entropy(0.1).unwrap()),
            RatePair::new(1.0, 1.0 - binary_entropy(0.1).unwrap()),
        ])
        .unwrap();
        assert!(hausdorff(&out.region, &rect) < 1e-9);
    }
}
