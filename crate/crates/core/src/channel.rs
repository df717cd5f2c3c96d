//! Channel and auxiliary-policy types.
//!
//! Index conventions (row-major everywhere):
//! - channel rows are indexed by `(x, s)` as `x * s_size + s`;
//! - general-channel columns are `(y, z)` as `y * z_size + z`;
//! - policy rows are indexed by `s`, columns by `(x, u)` as `x * u_size + u`
//!   (or `(y, u)` for a selection policy);
//! - the selection map `g` is indexed by `(y, u, s)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::prob::{Axis, AxisName, CondKernel, JointDist, ProbVec};

/// `Y = f(x, S)` to one receiver, `Z ~ W(z | x, S)` to the other.
#[derive(Debug, Clone, PartialEq)]
pub struct SemiDetChannel {
    x_size: usize,
    y_size: usize,
    z_size: usize,
    s_size: usize,
    f: Vec<usize>,
    w: CondKernel,
    p_s: ProbVec,
}

impl SemiDetChannel {
    pub fn new(y_size: usize, f: Vec<usize>, w: CondKernel, p_s: ProbVec) -> Result<Self> {
        let s_size = p_s.len();
        let z_size = w.cols();
        if !w.rows().is_multiple_of(s_size) {
            return Err(Error::DimensionMismatch(format!(
                "W has {} rows, not a multiple of |S| = {s_size}",
                w.rows()
            )));
        }
        let x_size = w.rows() / s_size;
        if f.len() != x_size * s_size {
            return Err(Error::DimensionMismatch(format!(
                "f has {} entries, expected |X|*|S| = {}",
                f.len(),
                x_size * s_size
            )));
        }
        if let Some((i, &y)) = f.iter().enumerate().find(|(_, &y)| y >= y_size) {
            return Err(Error::DimensionMismatch(format!(
                "f entry {i} maps to y = {y}, outside |Y| = {y_size}"
            )));
        }
        Ok(SemiDetChannel {
            x_size,
            y_size,
            z_size,
            s_size,
            f,
            w,
            p_s,
        })
    }

    pub fn x_size(&self) -> usize {
        self.x_size
    }
    pub fn y_size(&self) -> usize {
        self.y_size
    }
    pub fn z_size(&self) -> usize {
        self.z_size
    }
    pub fn s_size(&self) -> usize {
        self.s_size
    }
    pub fn p_s(&self) -> &ProbVec {
        &self.p_s
    }
    pub fn w(&self) -> &CondKernel {
        &self.w
    }
    pub fn f_table(&self) -> &[usize] {
        &self.f
    }

    pub fn f(&self, x: usize, s: usize) -> usize {
        self.f[x * self.s_size + s]
    }

    pub fn w_row(&self, x: usize, s: usize) -> &[f64] {
        self.w.row(x * self.s_size + s)
    }

    /// Cardinality cap on `U`: `|X| |S| + 1`.
    pub fn u_cap(&self) -> usize {
        self.x_size * self.s_size + 1
    }

    /// The same channel described by a joint kernel `W(y, z | x, s)`.
    pub fn to_general(&self) -> GeneralChannel {
        let cols = self.y_size * self.z_size;
        let mut data = vec![0.0; self.x_size * self.s_size * cols];
        for x in 0..self.x_size {
            for s in 0..self.s_size {
                let r = x * self.s_size + s;
                let y = self.f(x, s);
                for (z, &p) in self.w_row(x, s).iter().enumerate() {
                    data[r * cols + y * self.z_size + z] = p;
                }
            }
        }
        GeneralChannel {
            x_size: self.x_size,
            y_size: self.y_size,
            z_size: self.z_size,
            s_size: self.s_size,
            w: CondKernel::new(self.x_size * self.s_size, cols, data)
                .expect("embedding preserves row sums"),
            p_s: self.p_s.clone(),
        }
    }
}

/// `(Y, Z) ~ W(y, z | x, s)` with state law `P_S`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralChannel {
    x_size: usize,
    y_size: usize,
    z_size: usize,
    s_size: usize,
    w: CondKernel,
    p_s: ProbVec,
}

impl GeneralChannel {
    pub fn new(x_size: usize, y_size: usize, z_size: usize, w: CondKernel, p_s: ProbVec) -> Result<Self> {
        let s_size = p_s.len();
        if w.rows() != x_size * s_size || w.cols() != y_size * z_size {
            return Err(Error::DimensionMismatch(format!(
                "W is {}x{}, expected {}x{}",
                w.rows(),
                w.cols(),
                x_size * s_size,
                y_size * z_size
            )));
        }
        Ok(GeneralChannel {
            x_size,
            y_size,
            z_size,
            s_size,
            w,
            p_s,
        })
    }

    pub fn x_size(&self) -> usize {
        self.x_size
    }
    pub fn y_size(&self) -> usize {
        self.y_size
    }
    pub fn z_size(&self) -> usize {
        self.z_size
    }
    pub fn s_size(&self) -> usize {
        self.s_size
    }
    pub fn p_s(&self) -> &ProbVec {
        &self.p_s
    }
    pub fn w(&self) -> &CondKernel {
        &self.w
    }

    pub fn w_row(&self, x: usize, s: usize) -> &[f64] {
        self.w.row(x * self.s_size + s)
    }

    pub fn u_cap(&self) -> usize {
        self.x_size * self.s_size + 1
    }

    /// `P(y | x, s)`, summing out `z`.
    pub fn y_marginal(&self, x: usize, s: usize) -> Vec<f64> {
        self.w_row(x, s)
            .chunks(self.z_size)
            .map(|c| c.iter().sum())
            .collect()
    }

    /// `P(z | x, s)`, summing out `y`.
    pub fn z_marginal(&self, x: usize, s: usize) -> Vec<f64> {
        let row = self.w_row(x, s);
        (0..self.z_size)
            .map(|z| (0..self.y_size).map(|y| row[y * self.z_size + z]).sum())
            .collect()
    }
}

/// A kernel `P_{XU|S}` with a declared `U` alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxPolicy {
    u_size: usize,
    kernel: CondKernel,
}

impl AuxPolicy {
    pub fn new(u_size: usize, kernel: CondKernel) -> Result<Self> {
        if u_size == 0 || !kernel.cols().is_multiple_of(u_size) {
            return Err(Error::DimensionMismatch(format!(
                "policy has {} columns, not a positive multiple of |U| = {u_size}",
                kernel.cols()
            )));
        }
        Ok(AuxPolicy { u_size, kernel })
    }

    /// `X = U` uniform over `x_size` letters, independent of `S`.
    pub fn identity_uniform(x_size: usize, s_size: usize) -> Self {
        let mut row = vec![0.0; x_size * x_size];
        for x in 0..x_size {
            row[x * x_size + x] = 1.0 / x_size as f64;
        }
        let data = (0..s_size).flat_map(|_| row.iter().copied()).collect();
        AuxPolicy::new(x_size, CondKernel::new(s_size, x_size * x_size, data).unwrap()).unwrap()
    }

    /// Rows drawn uniformly from the simplex (normalized exponentials),
    /// reproducible per seed.
    pub fn random(x_size: usize, s_size: usize, u_size: usize, seed: u64) -> Result<Self> {
        if x_size == 0 || s_size == 0 || u_size == 0 {
            return Err(Error::InvalidArgument("random policy needs nonempty alphabets".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cols = x_size * u_size;
        let mut data = Vec::with_capacity(s_size * cols);
        for _ in 0..s_size {
            let raw: Vec<f64> = (0..cols).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
            let total: f64 = raw.iter().sum();
            data.extend(raw.iter().map(|v| v / total));
        }
        AuxPolicy::new(u_size, CondKernel::new(s_size, cols, data)?)
    }

    /// `P_{XU|S}` of a joint over `(X, S, U)` and possibly more axes. States
    /// of zero probability get the point mass at `(x, u) = (0, 0)`.
    pub fn from_joint(joint: &JointDist) -> Result<Self> {
        let m = joint.marginalize(&[AxisName::X, AxisName::S, AxisName::U])?;
        let (xs, ss, us) = (
            m.axis_size(AxisName::X)?,
            m.axis_size(AxisName::S)?,
            m.axis_size(AxisName::U)?,
        );
        let pos = [AxisName::X, AxisName::S, AxisName::U].map(|a| m.position(a).expect("kept axis"));
        let mut data = vec![0.0; ss * xs * us];
        let mut idx = [0; 3];
        for x in 0..xs {
            for s in 0..ss {
                for u in 0..us {
                    idx[pos[0]] = x;
                    idx[pos[1]] = s;
                    idx[pos[2]] = u;
                    data[s * xs * us + x * us + u] = m.prob(&idx);
                }
            }
        }
        for row in data.chunks_mut(xs * us) {
            let total: f64 = row.iter().sum();
            if total > 0.0 {
                row.iter_mut().for_each(|v| *v /= total);
            } else {
                row[0] = 1.0;
            }
        }
        AuxPolicy::new(us, CondKernel::new(ss, xs * us, data)?)
    }

    pub fn u_size(&self) -> usize {
        self.u_size
    }

    pub fn x_size(&self) -> usize {
        self.kernel.cols() / self.u_size
    }

    pub fn s_size(&self) -> usize {
        self.kernel.rows()
    }

    pub fn kernel(&self) -> &CondKernel {
        &self.kernel
    }

    /// `P(x, u | s)`.
    pub fn prob(&self, x: usize, u: usize, s: usize) -> f64 {
        self.kernel.get(s, x * self.u_size + u)
    }

    fn check_against(&self, x_size: usize, s_size: usize) -> Result<()> {
        if self.x_size() != x_size || self.s_size() != s_size {
            return Err(Error::DimensionMismatch(format!(
                "policy is over |X| = {}, |S| = {} but channel has |X| = {x_size}, |S| = {s_size}",
                self.x_size(),
                self.s_size()
            )));
        }
        Ok(())
    }

    pub(crate) fn check_semidet(&self, ch: &SemiDetChannel) -> Result<()> {
        self.check_against(ch.x_size(), ch.s_size())
    }

    pub(crate) fn check_general(&self, ch: &GeneralChannel) -> Result<()> {
        self.check_against(ch.x_size(), ch.s_size())
    }
}

/// A policy in selection form: a kernel `P_{YU|S}` plus a map
/// `x = g(y, u, s)` that must reproduce `y = f(x, s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionPolicy {
    u_size: usize,
    p_yu_given_s: CondKernel,
    g: Vec<usize>,
}

impl SelectionPolicy {
    pub fn new(u_size: usize, p_yu_given_s: CondKernel, g: Vec<usize>) -> Result<Self> {
        if u_size == 0 || !p_yu_given_s.cols().is_multiple_of(u_size) {
            return Err(Error::DimensionMismatch(format!(
                "selection policy has {} columns, not a positive multiple of |U| = {u_size}",
                p_yu_given_s.cols()
            )));
        }
        let expected = p_yu_given_s.cols() * p_yu_given_s.rows();
        if g.len() != expected {
            return Err(Error::DimensionMismatch(format!(
                "g has {} entries, expected |Y|*|U|*|S| = {expected}",
                g.len()
            )));
        }
        Ok(SelectionPolicy {
            u_size,
            p_yu_given_s,
            g,
        })
    }

    pub fn u_size(&self) -> usize {
        self.u_size
    }
    pub fn y_size(&self) -> usize {
        self.p_yu_given_s.cols() / self.u_size
    }
    pub fn s_size(&self) -> usize {
        self.p_yu_given_s.rows()
    }
    pub fn p_yu_given_s(&self) -> &CondKernel {
        &self.p_yu_given_s
    }
    pub fn g_table(&self) -> &[usize] {
        &self.g
    }

    pub fn g(&self, y: usize, u: usize, s: usize) -> usize {
        self.g[(y * self.u_size + u) * self.s_size() + s]
    }

    /// Checks that `g` only selects inputs consistent with `y = f(x, s)`
    /// wherever `P_{YU|S}` puts mass.
    pub fn validate(&self, ch: &SemiDetChannel) -> Result<()> {
        if self.y_size() != ch.y_size() || self.s_size() != ch.s_size() {
            return Err(Error::DimensionMismatch(format!(
                "selection policy is over |Y| = {}, |S| = {} but channel has |Y| = {}, |S| = {}",
                self.y_size(),
                self.s_size(),
                ch.y_size(),
                ch.s_size()
            )));
        }
        for s in 0..self.s_size() {
            for y in 0..self.y_size() {
                for u in 0..self.u_size {
                    let x = self.g(y, u, s);
                    if x >= ch.x_size() {
                        return Err(Error::DimensionMismatch(format!(
                            "g({y}, {u}, {s}) = {x} outside |X| = {}",
                            ch.x_size()
                        )));
                    }
                    let p = self.p_yu_given_s.get(s, y * self.u_size + u);
                    if p > 0.0 && ch.f(x, s) != y {
                        return Err(Error::InvalidArgument(format!(
                            "g({y}, {u}, {s}) = {x} but f({x}, {s}) = {} != {y}",
                            ch.f(x, s)
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// The equivalent `P_{XU|S}`.
    pub fn to_aux(&self, x_size: usize) -> AuxPolicy {
        let u = self.u_size;
        let mut data = vec![0.0; self.s_size() * x_size * u];
        for s in 0..self.s_size() {
            for y in 0..self.y_size() {
                for uu in 0..u {
                    let x = self.g(y, uu, s);
                    data[s * x_size * u + x * u + uu] += self.p_yu_given_s.get(s, y * u + uu);
                }
            }
        }
        AuxPolicy::new(u, CondKernel::new(self.s_size(), x_size * u, data).expect("row sums preserved"))
            .expect("shape preserved")
    }
}

/// `P_S(s) P_{XU|S}(x, u | s) 1{y = f(x, s)} W(z | x, s)` over axes
/// `(X, Y, Z, S, U)`.
pub fn joint_from_policy(ch: &SemiDetChannel, pol: &AuxPolicy) -> Result<JointDist> {
    pol.check_semidet(ch)?;
    let (xs, ys, zs, ss, us) = (ch.x_size(), ch.y_size(), ch.z_size(), ch.s_size(), pol.u_size());
    let mut mass = vec![0.0; xs * ys * zs * ss * us];
    for x in 0..xs {
        for s in 0..ss {
            let y = ch.f(x, s);
            for (z, &wz) in ch.w_row(x, s).iter().enumerate() {
                for u in 0..us {
                    let idx = (((x * ys + y) * zs + z) * ss + s) * us + u;
                    mass[idx] = ch.p_s()[s] * pol.prob(x, u, s) * wz;
                }
            }
        }
    }
    JointDist::new(
        vec![
            Axis::new(AxisName::X, xs),
            Axis::new(AxisName::Y, ys),
            Axis::new(AxisName::Z, zs),
            Axis::new(AxisName::S, ss),
            Axis::new(AxisName::U, us),
        ],
        mass,
    )
}

/// `P_S(s) P_{XU|S}(x, u | s) W(y, z | x, s)` over axes `(X, Y, Z, S, U)`.
pub fn joint_from_general(ch: &GeneralChannel, pol: &AuxPolicy) -> Result<JointDist> {
    pol.check_general(ch)?;
    let (xs, ys, zs, ss, us) = (ch.x_size(), ch.y_size(), ch.z_size(), ch.s_size(), pol.u_size());
    let mut mass = vec![0.0; xs * ys * zs * ss * us];
    for x in 0..xs {
        for s in 0..ss {
            let row = ch.w_row(x, s);
            for y in 0..ys {
                for z in 0..zs {
                    let wyz = row[y * zs + z];
                    for u in 0..us {
                        let idx = (((x * ys + y) * zs + z) * ss + s) * us + u;
                        mass[idx] = ch.p_s()[s] * pol.prob(x, u, s) * wyz;
                    }
                }
            }
        }
    }
    JointDist::new(
        vec![
            Axis::new(AxisName::X, xs),
            Axis::new(AxisName::Y, ys),
            Axis::new(AxisName::Z, zs),
            Axis::new(AxisName::S, ss),
            Axis::new(AxisName::U, us),
        ],
        mass,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::binary::{build_channel, BinaryExampleParams};
    use approx::assert_abs_diff_eq;
    use AxisName::*;

    fn example() -> SemiDetChannel {
        build_channel(BinaryExampleParams::new(0.5, 0.2).unwrap()).unwrap()
    }

    #[test]
    fn joint_has_state_marginal_and_support() {
        let ch = example();
        let pol = AuxPolicy::identity_uniform(2, 2);
        let j = joint_from_policy(&ch, &pol).unwrap();
        let s = j.marginalize(&[S]).unwrap();
        assert_eq!(s.mass(), ch.p_s().as_slice());
        assert_abs_diff_eq!(j.conditional_entropy(&[Y], &[S]).unwrap(), 1.0, epsilon = 1e-12);
        for x in 0..2 {
            for y in 0..2 {
                for z in 0..2 {
                    for st in 0..2 {
                        for u in 0..2 {
                            if y != ch.f(x, st) {
                                assert_eq!(j.prob(&[x, y, z, st, u]), 0.0);
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn degenerate_policy_gives_point_mass_slices() {
        let ch = example();
        // X = 1, U = 0 regardless of S
        let k = CondKernel::from_rows(vec![vec![0.0, 1.0], vec![0.0, 1.0]]).unwrap();
        let pol = AuxPolicy::new(1, k).unwrap();
        let j = joint_from_policy(&ch, &pol).unwrap();
        assert_abs_diff_eq!(j.conditional_entropy(&[X, U], &[S]).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(j.conditional_entropy(&[Y], &[S]).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(j.mass().iter().sum::<f64>(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let ch = example();
        let pol = AuxPolicy::identity_uniform(3, 2);
        assert!(matches!(joint_from_policy(&ch, &pol), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn general_embedding_matches_semidet_joint() {
        let ch = example();
        let pol = AuxPolicy::identity_uniform(2, 2);
        let a = joint_from_policy(&ch, &pol).unwrap();
        let b = joint_from_general(&ch.to_general(), &pol).unwrap();
        for (p, q) in a.mass().iter().zip(b.mass()) {
            assert_abs_diff_eq!(p, q, epsilon = 1e-15);
        }
    }

    #[test]
    fn selection_policy_round_trips_to_aux() {
        let ch = example();
        // U uniform, Y = U xor S, g(y, u, s) = y xor s
        let rows = vec![vec![0.5, 0.0, 0.0, 0.5], vec![0.0, 0.5, 0.5, 0.0]];
        let g = (0..8)
            .map(|i| {
                let (y, s) = (i / 4, i % 2);
                y ^ s
            })
            .collect();
        let sel = SelectionPolicy::new(2, CondKernel::from_rows(rows).unwrap(), g).unwrap();
        sel.validate(&ch).unwrap();
        let aux = sel.to_aux(2);
        // X = U
        for s in 0..2 {
            for x in 0..2 {
                for u in 0..2 {
                    let want = if x == u { 0.5 } else { 0.0 };
                    assert_eq!(aux.prob(x, u, s), want);
                }
            }
        }
    }

    #[test]
    fn selection_policy_rejects_inconsistent_g() {
        let ch = example();
        let rows = vec![vec![0.25; 4], vec![0.25; 4]];
        let sel = SelectionPolicy::new(2, CondKernel::from_rows(rows).unwrap(), vec![0; 8]).unwrap();
        assert!(sel.validate(&ch).is_err());
    }

    #[test]
    fn random_policy_is_reproducible_and_recoverable() {
        let a = AuxPolicy::random(2, 3, 4, 17).unwrap();
        assert_eq!(a, AuxPolicy::random(2, 3, 4, 17).unwrap());
        assert_ne!(a, AuxPolicy::random(2, 3, 4, 18).unwrap());
        let ch = SemiDetChannel::new(
            2,
            vec![0, 1, 1, 0, 1, 1],
            CondKernel::from_rows(vec![vec![1.0]; 6]).unwrap(),
            ProbVec::new(vec![0.2, 0.3, 0.5]).unwrap(),
        )
        .unwrap();
        let back = AuxPolicy::from_joint(&joint_from_policy(&ch, &a).unwrap()).unwrap();
        for (x, y) in back.kernel().as_slice().iter().zip(a.kernel().as_slice()) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
