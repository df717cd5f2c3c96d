//! Inner (capacity) region of a semideterministic channel.
//!
//! For a policy `P_{XU|S}` the rate pairs satisfy
//!
//! ```text
//! R_y       <= H(Y|S)
//! R_z       <= I(U;Z) - I(U;S)
//! R_y + R_z <= H(Y|S) + I(U;Z) - I(U;S,Y)
//! ```
//!
//! and the region is the convex hull of the union over policies. The search
//! traces that hull through its support function; see [`crate::search`].

use crate::channel::{joint_from_policy, AuxPolicy, SemiDetChannel};
use crate::error::Result;
use crate::prob::AxisName::{S, U, Y, Z};
use crate::region::{BoundTriple, ConvexRegion2D};
use crate::search::{run_search, SearchConfig, SearchOutcome, TripleModel};

/// `(H(Y|S), I(U;Z) - I(U;S), H(Y|S) + I(U;Z) - I(U;S,Y))` for one policy.
pub fn bound_triple(ch: &SemiDetChannel, pol: &AuxPolicy) -> Result<BoundTriple> {
    let j = joint_from_policy(ch, pol)?;
    let a = j.conditional_entropy(&[Y], &[S])?;
    let i_uz = j.mutual_info(&[U], &[Z])?;
    let b = i_uz - j.mutual_info(&[U], &[S])?;
    let c = a + i_uz - j.mutual_info(&[U], &[S, Y])?;
    Ok(BoundTriple::new(a, b, c))
}

/// Search-based inner region, with per-direction witnesses.
pub fn inner_region_search(ch: &SemiDetChannel, cfg: &SearchConfig) -> Result<SearchOutcome> {
    cfg.validate()?;
    let model = TripleModel::from_semidet(ch);
    run_search(&model, ch.u_cap(), cfg, cfg.selection_mode.then_some(ch))
}

/// Convex hull of the rate regions of every policy visited by the search,
/// with `|U| = |X| |S| + 1`.
pub fn inner_region(ch: &SemiDetChannel, cfg: &SearchConfig) -> Result<ConvexRegion2D> {
    Ok(inner_region_search(ch, cfg)?.region)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::binary::{self, build_channel, bsc_policy, BinaryExampleParams};
    use crate::prob::binary_entropy;
    use crate::prob::{CondKernel, ProbVec};
    use crate::region::{hausdorff, RatePair};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn example() -> SemiDetChannel {
        build_channel(BinaryExampleParams::new(0.5, 0.2).unwrap()).unwrap()
    }

    #[test]
    fn bsc_construction_triple() {
        // b = 1 - Hb(0.26), c = 1 + (1 - Hb(0.26)) - (1 - Hb(0.1))
        let hb26 = binary_entropy(0.26).unwrap();
        let hb1 = binary_entropy(0.1).unwrap();
        let t = bound_triple(&example(), &bsc_policy(0.1).unwrap()).unwrap();
        assert_abs_diff_eq!(t.a, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(t.b, 1.0 - hb26, epsilon = 1e-12);
        assert_abs_diff_eq!(t.c, 1.0 + (1.0 - hb26) - (1.0 - hb1), epsilon = 1e-12);
        assert_abs_diff_eq!(t.b, 0.1732536, epsilon = 1e-7);
        assert_abs_diff_eq!(t.c, 0.6422492, epsilon = 1e-7);

        let half = bound_triple(&example(), &bsc_policy(0.5).unwrap()).unwrap();
        assert_abs_diff_eq!(half.a, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(half.b, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(half.c, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn constant_u_gives_b_zero_c_equals_a() {
        let k = CondKernel::from_rows(vec![vec![0.3, 0.7], vec![0.6, 0.4]]).unwrap();
        let pol = AuxPolicy::new(1, k).unwrap();
        let t = bound_triple(&example(), &pol).unwrap();
        assert_abs_diff_eq!(t.b, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(t.c, t.a, epsilon = 1e-12);
    }

    pub(crate) fn random_semidet(rng: &mut ChaCha8Rng, y_size: usize, z_size: usize) -> SemiDetChannel {
        let f = (0..4).map(|_| rng.gen_range(0..y_size)).collect();
        let rows = (0..4)
            .map(|_| {
                let raw: Vec<f64> = (0..z_size).map(|_| rng.gen::<f64>() + 1e-3).collect();
                let t: f64 = raw.iter().sum();
                raw.iter().map(|r| r / t).collect()
            })
            .collect();
        let q = rng.gen_range(0.05..0.95);
        SemiDetChannel::new(
            y_size,
            f,
            CondKernel::from_rows(rows).unwrap(),
            ProbVec::new(vec![q, 1.0 - q]).unwrap(),
        )
        .unwrap()
    }

    pub(crate) fn random_policy(rng: &mut ChaCha8Rng, x: usize, s: usize, u: usize) -> AuxPolicy {
        let rows = (0..s)
            .map(|_| {
                let raw: Vec<f64> = (0..x * u)
                    .map(|_| if rng.gen_bool(0.2) { 0.0 } else { rng.gen::<f64>() })
                    .collect();
                let t: f64 = raw.iter().sum::<f64>().max(1e-300);
                if t <= 1e-300 {
                    let mut r = vec![0.0; x * u];
                    r[0] = 1.0;
                    r
                } else {
                    raw.iter().map(|r| r / t).collect()
                }
            })
            .collect();
        AuxPolicy::new(u, CondKernel::from_rows(rows).unwrap()).unwrap()
    }

    #[test]
    fn fast_triple_matches_joint_route() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let ch = random_semidet(&mut rng, 2, 3);
            let pol = random_policy(&mut rng, 2, 2, 5);
            let slow = bound_triple(&ch, &pol).unwrap();
            let fast = TripleModel::from_semidet(&ch).eval(pol.u_size(), pol.kernel().as_slice());
            assert_abs_diff_eq!(slow.a, fast.a, epsilon = 1e-12);
            assert_abs_diff_eq!(slow.b, fast.b, epsilon = 1e-12);
            assert_abs_diff_eq!(slow.c, fast.c, epsilon = 1e-12);
        }
    }

    #[test]
    fn triple_relations_hold() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let ch = random_semidet(&mut rng, 2, 3);
            let pol = random_policy(&mut rng, 2, 2, 3);
            let t = bound_triple(&ch, &pol).unwrap();
            assert!(t.a >= -1e-12);
            assert!(t.c <= t.a + t.b + 1e-10);
        }
    }

    #[test]
    fn state_blind_z_gives_segment() {
        // W(z | x, s) independent of x
        let rows = vec![vec![0.3, 0.7], vec![0.6, 0.4], vec![0.3, 0.7], vec![0.6, 0.4]];
        let ch = SemiDetChannel::new(
            2,
            vec![0, 1, 1, 0],
            CondKernel::from_rows(rows).unwrap(),
            ProbVec::new(vec![0.5, 0.5]).unwrap(),
        )
        .unwrap();
        let cfg = SearchConfig {
            weight_sweep_count: 8,
            random_restarts: 4,
            ..SearchConfig::default()
        };
        let r = inner_region(&ch, &cfg).unwrap();
        let want = ConvexRegion2D::hull(&[RatePair::ORIGIN, RatePair::new(1.0, 0.0)]).unwrap();
        assert!(hausdorff(&r, &want) < 1e-6, "{r:?}");
    }

    #[test]
    fn fully_deterministic_channel_reaches_both_axes() {
        // no state; Y = Z = x
        let ch = SemiDetChannel::new(
            2,
            vec![0, 1],
            CondKernel::from_rows(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap(),
            ProbVec::new(vec![1.0]).unwrap(),
        )
        .unwrap();
        let cfg = SearchConfig {
            weight_sweep_count: 8,
            random_restarts: 6,
            ..SearchConfig::default()
        };
        let r = inner_region(&ch, &cfg).unwrap();
        assert!(r.distance(RatePair::new(1.0, 0.0)) < 1e-4);
        assert!(r.distance(RatePair::new(0.0, 1.0)) < 1e-4);
        // brute force over a coarse grid of policies never leaves R_y + R_z <= 1
        assert!(r.max_along(1.0, 1.0) <= 1.0 + 1e-9);
    }

    #[test]
    fn binary_example_close_to_closed_form() {
        let cfg = SearchConfig {
            weight_sweep_count: 16,
            random_restarts: 8,
            ..SearchConfig::default()
        };
        let r = inner_region(&example(), &cfg).unwrap();
        let closed = binary::noncausal_region(0.2, 1 << 16).unwrap();
        let d = r.vertices().iter().map(|&v| closed.distance(v)).fold(0.0, f64::max);
        assert!(d < 1e-6, "{d}");
        assert!(hausdorff(&r, &closed) < 0.03, "{}", hausdorff(&r, &closed));
    }

    #[test]
    fn deterministic_and_monotone_in_restarts() {
        let base = SearchConfig {
            weight_sweep_count: 6,
            random_restarts: 3,
            local_steps: 40,
            seed: 99,
            ..SearchConfig::default()
        };
        let a = inner_region(&example(), &base).unwrap();
        let b = inner_region(&example(), &base).unwrap();
        assert_eq!(a, b);
        let more = inner_region(&example(), &SearchConfig { random_restarts: 6, ..base }).unwrap();
        assert!(a.is_within(&more, 1e-12));
    }

    #[test]
    fn selection_mode_also_traces_region() {
        let cfg = SearchConfig {
            weight_sweep_count: 12,
            random_restarts: 6,
            selection_mode: true,
            ..SearchConfig::default()
        };
        let r = inner_region(&example(), &cfg).unwrap();
        let closed = binary::noncausal_region(0.2, 1 << 16).unwrap();
        let d = r.vertices().iter().map(|&v| closed.distance(v)).fold(0.0, f64::max);
        assert!(d < 1e-6, "{d}");
        assert!(hausdorff(&r, &closed) < 0.05, "{}", hausdorff(&r, &closed));
    }

    #[test]
    fn guard_rejects_large_alphabets() {
        let rows = vec![vec![1.0]; 32];
        let ch = SemiDetChannel::new(
            1,
            vec![0; 32],
            CondKernel::from_rows(rows).unwrap(),
            ProbVec::new(vec![0.5, 0.5]).unwrap(),
        )
        .unwrap();
        assert!(matches!(
            inner_region(&ch, &SearchConfig::default()),
            Err(crate::Error::Guard(_))
        ));
    }
}
