//! Finite-alphabet probability tensors and information measures.
//!
//! A [`JointDist`] is a dense, row-major tensor over a small set of named
//! axes (`X`, `Y`, `Z`, `S`, `U`). Every information quantity used by the
//! rate-region code reduces to entropies of marginals of such a tensor, so
//! this module is deliberately small: marginalize, take entropies, combine.
//!
//! All logarithms are base 2 and `0 log 0 = 0`.

use std::fmt;

use crate::error::{Error, Result};

/// Tolerance on `|sum - 1|` accepted when building distributions.
pub const NORMALIZATION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AxisName {
    X,
    Y,
    Z,
    S,
    U,
}

impl fmt::Display for AxisName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            AxisName::X => "X",
            AxisName::Y => "Y",
            AxisName::Z => "Z",
            AxisName::S => "S",
            AxisName::U => "U",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Axis {
    pub name: AxisName,
    pub size: usize,
}

impl Axis {
    pub fn new(name: AxisName, size: usize) -> Self {
        Axis { name, size }
    }
}

fn check_probability(value: f64, context: impl FnOnce() -> String) -> Result<()> {
    if value.is_finite() && (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::InvalidProbability {
            value,
            context: context(),
        })
    }
}

fn check_sum(values: &[f64], context: impl FnOnce() -> String) -> Result<()> {
    let sum: f64 = values.iter().sum();
    if (sum - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::NotNormalized {
            sum,
            context: context(),
        });
    }
    Ok(())
}

/// A probability vector: nonnegative entries summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVec(Vec<f64>);

impl ProbVec {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::DimensionMismatch("empty probability vector".into()));
        }
        for (i, &p) in probs.iter().enumerate() {
            check_probability(p, || format!("entry {i}"))?;
        }
        check_sum(&probs, || "probability vector".into())?;
        Ok(ProbVec(probs))
    }

    pub fn uniform(size: usize) -> Self {
        assert!(size > 0, "uniform distribution needs a nonempty alphabet");
        ProbVec(vec![1.0 / size as f64; size])
    }

    pub fn point_mass(size: usize, at: usize) -> Self {
        assert!(at < size);
        let mut v = vec![0.0; size];
        v[at] = 1.0;
        ProbVec(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn entropy(&self) -> f64 {
        entropy_of(&self.0)
    }
}

impl std::ops::Index<usize> for ProbVec {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// A conditional kernel stored as a dense row-major matrix.
///
/// Row `r` is the distribution of the target tuple given conditioning tuple
/// `r`; how tuples map to flat indices is the caller's convention (always
/// row-major over the declared axes in this crate).
#[derive(Debug, Clone, PartialEq)]
pub struct CondKernel {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CondKernel {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::DimensionMismatch("kernel with zero rows or columns".into()));
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "kernel {rows}x{cols} needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        for r in 0..rows {
            let row = &data[r * cols..(r + 1) * cols];
            for (c, &p) in row.iter().enumerate() {
                check_probability(p, || format!("kernel row {r}, column {c}"))?;
            }
            check_sum(row, || format!("kernel row {r}"))?;
        }
        Ok(CondKernel { rows, cols, data })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        let cols = rows.first().map_or(0, Vec::len);
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != cols) {
            return Err(Error::DimensionMismatch(format!(
                "kernel row {i} has {} columns, expected {cols}",
                r.len()
            )));
        }
        CondKernel::new(n, cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Dense joint distribution over named axes, row-major (last axis fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct JointDist {
    axes: Vec<Axis>,
    mass: Vec<f64>,
}

impl JointDist {
    pub fn new(axes: Vec<Axis>, mass: Vec<f64>) -> Result<Self> {
        let dist = Self::new_unchecked_sum(axes, mass)?;
        check_sum(&dist.mass, || "joint distribution".into())?;
        Ok(dist)
    }

    /// Validates shape and entry signs but not the total mass; used where
    /// the caller already guarantees normalization by construction.
    pub(crate) fn new_unchecked_sum(axes: Vec<Axis>, mass: Vec<f64>) -> Result<Self> {
        for (i, a) in axes.iter().enumerate() {
            if a.size == 0 {
                return Err(Error::EmptyAlphabet(a.name));
            }
            if axes[..i].iter().any(|b| b.name == a.name) {
                return Err(Error::DuplicateAxis(a.name));
            }
        }
        let expected: usize = axes.iter().map(|a| a.size).product();
        if mass.len() != expected {
            return Err(Error::DimensionMismatch(format!(
                "tensor over {} axes needs {expected} entries, got {}",
                axes.len(),
                mass.len()
            )));
        }
        if let Some(&bad) = mass.iter().find(|&&m| !(m.is_finite() && m >= 0.0)) {
            return Err(Error::InvalidProbability {
                value: bad,
                context: "joint mass".into(),
            });
        }
        Ok(JointDist { axes, mass })
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn position(&self, name: AxisName) -> Result<usize> {
        self.axes
            .iter()
            .position(|a| a.name == name)
            .ok_or(Error::UnknownAxis(name))
    }

    pub fn axis_size(&self, name: AxisName) -> Result<usize> {
        Ok(self.axes[self.position(name)?].size)
    }

    pub fn has_axis(&self, name: AxisName) -> bool {
        self.axes.iter().any(|a| a.name == name)
    }

    /// Probability of one full index tuple, given in axis order.
    pub fn prob(&self, index: &[usize]) -> f64 {
        debug_assert_eq!(index.len(), self.axes.len());
        let mut flat = 0;
        for (a, &i) in self.axes.iter().zip(index) {
            debug_assert!(i < a.size);
            flat = flat * a.size + i;
        }
        self.mass[flat]
    }

    fn keep_mask(&self, keep: &[AxisName]) -> Result<Vec<bool>> {
        let mut mask = vec![false; self.axes.len()];
        for &name in keep {
            let p = self.position(name)?;
            if mask[p] {
                return Err(Error::DuplicateAxis(name));
            }
            mask[p] = true;
        }
        Ok(mask)
    }

    /// Marginal mass over the axes flagged in `mask`, in original axis order.
    fn marginal_mass(&self, mask: &[bool]) -> Vec<f64> {
        let kept: usize = self
            .axes
            .iter()
            .zip(mask)
            .filter(|(_, &k)| k)
            .map(|(a, _)| a.size)
            .product();
        if mask.iter().all(|&k| k) {
            return self.mass.clone();
        }
        let mut out = vec![0.0; kept];
        if kept == 1 {
            out[0] = self.mass.iter().sum();
            return out;
        }
        // Stride of each axis inside the marginal tensor (0 for dropped axes).
        let mut strides = vec![0usize; self.axes.len()];
        let mut s = 1;
        for i in (0..self.axes.len()).rev() {
            if mask[i] {
                strides[i] = s;
                s *= self.axes[i].size;
            }
        }
        let mut counter = vec![0usize; self.axes.len()];
        let mut target = 0usize;
        for &m in &self.mass {
            out[target] += m;
            for i in (0..self.axes.len()).rev() {
                counter[i] += 1;
                target += strides[i];
                if counter[i] < self.axes[i].size {
                    break;
                }
                target -= strides[i] * counter[i];
                counter[i] = 0;
            }
        }
        out
    }

    /// Joint distribution of the kept axes (original order preserved).
    pub fn marginalize(&self, keep: &[AxisName]) -> Result<JointDist> {
        if keep.is_empty() {
            return Err(Error::EmptyAxisSet);
        }
        let mask = self.keep_mask(keep)?;
        let axes = self
            .axes
            .iter()
            .zip(&mask)
            .filter(|(_, &k)| k)
            .map(|(a, _)| *a)
            .collect();
        Ok(JointDist {
            axes,
            mass: self.marginal_mass(&mask),
        })
    }

    /// `H(targets)` in bits. The empty set has entropy zero.
    pub fn entropy(&self, targets: &[AxisName]) -> Result<f64> {
        if targets.is_empty() {
            return Ok(0.0);
        }
        let mask = self.keep_mask(targets)?;
        Ok(entropy_of(&self.marginal_mass(&mask)))
    }

    /// `H(targets | given) = H(targets, given) - H(given)`.
    pub fn conditional_entropy(&self, targets: &[AxisName], given: &[AxisName]) -> Result<f64> {
        disjoint(targets, given)?;
        let union: Vec<AxisName> = targets.iter().chain(given).copied().collect();
        Ok(self.entropy(&union)? - self.entropy(given)?)
    }

    /// `I(a; b) = H(a) + H(b) - H(a, b)`.
    pub fn mutual_info(&self, a: &[AxisName], b: &[AxisName]) -> Result<f64> {
        disjoint(a, b)?;
        let union: Vec<AxisName> = a.iter().chain(b).copied().collect();
        Ok(self.entropy(a)? + self.entropy(b)? - self.entropy(&union)?)
    }

    /// `I(a; b | c) = H(a, c) + H(b, c) - H(a, b, c) - H(c)`.
    pub fn conditional_mutual_info(
        &self,
        a: &[AxisName],
        b: &[AxisName],
        given: &[AxisName],
    ) -> Result<f64> {
        disjoint(a, b)?;
        disjoint(a, given)?;
        disjoint(b, given)?;
        let ac: Vec<AxisName> = a.iter().chain(given).copied().collect();
        let bc: Vec<AxisName> = b.iter().chain(given).copied().collect();
        let abc: Vec<AxisName> = a.iter().chain(b).chain(given).copied().collect();
        Ok(self.entropy(&ac)? + self.entropy(&bc)? - self.entropy(&abc)? - self.entropy(given)?)
    }
}

fn disjoint(a: &[AxisName], b: &[AxisName]) -> Result<()> {
    match a.iter().find(|x| b.contains(x)) {
        Some(&name) => Err(Error::OverlappingAxes(name)),
        None => Ok(()),
    }
}

/// Shannon entropy in bits of a (possibly unnormalized-by-rounding) mass vector.
pub fn entropy_of(mass: &[f64]) -> f64 {
    mass.iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.log2())
        .sum()
}

/// `Hb(q) = -q log2 q - (1-q) log2 (1-q)`.
pub fn binary_entropy(q: f64) -> Result<f64> {
    check_probability(q, || "binary entropy argument".into())?;
    Ok(entropy_of(&[q, 1.0 - q]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use AxisName::*;

    fn bsc_joint(p: f64) -> JointDist {
        // X uniform, Z = X through BSC(p)
        let m = vec![0.5 * (1.0 - p), 0.5 * p, 0.5 * p, 0.5 * (1.0 - p)];
        JointDist::new(vec![Axis::new(X, 2), Axis::new(Z, 2)], m).unwrap()
    }

    #[test]
    fn entropy_examples() {
        let uni = JointDist::new(vec![Axis::new(X, 4)], vec![0.25; 4]).unwrap();
        assert_abs_diff_eq!(uni.entropy(&[X]).unwrap(), 2.0, epsilon = 1e-15);

        let bern = JointDist::new(vec![Axis::new(X, 2)], vec![0.8, 0.2]).unwrap();
        assert_abs_diff_eq!(bern.entropy(&[X]).unwrap(), 0.7219280948873623, epsilon = 1e-12);

        let point = JointDist::new(vec![Axis::new(X, 3)], vec![0.0, 1.0, 0.0]).unwrap();
        assert_eq!(point.entropy(&[X]).unwrap(), 0.0);
    }

    #[test]
    fn unknown_axis_is_an_error() {
        let d = bsc_joint(0.1);
        assert_eq!(d.entropy(&[U]), Err(Error::UnknownAxis(U)));
    }

    #[test]
    fn conditional_entropy_examples() {
        // Y = S copy
        let d = JointDist::new(
            vec![Axis::new(Y, 2), Axis::new(S, 2)],
            vec![0.3, 0.0, 0.0, 0.7],
        )
        .unwrap();
        assert_abs_diff_eq!(d.conditional_entropy(&[Y], &[S]).unwrap(), 0.0, epsilon = 1e-15);

        // independent Y, S
        let py = [0.1, 0.9];
        let ps = [0.6, 0.4];
        let m = py.iter().flat_map(|a| ps.iter().map(move |b| a * b)).collect();
        let d = JointDist::new(vec![Axis::new(Y, 2), Axis::new(S, 2)], m).unwrap();
        assert_abs_diff_eq!(
            d.conditional_entropy(&[Y], &[S]).unwrap(),
            d.entropy(&[Y]).unwrap(),
            epsilon = 1e-12
        );

        assert_eq!(
            d.conditional_entropy(&[Y, S], &[S]),
            Err(Error::OverlappingAxes(S))
        );
    }

    #[test]
    fn mutual_info_examples() {
        let d = bsc_joint(0.2);
        // 1 - Hb(0.2)
        assert_abs_diff_eq!(d.mutual_info(&[X], &[Z]).unwrap(), 0.2780719051126377, epsilon = 1e-12);

        let perfect = bsc_joint(0.0);
        assert_abs_diff_eq!(perfect.mutual_info(&[X], &[Z]).unwrap(), 1.0, epsilon = 1e-15);

        let ind = bsc_joint(0.5);
        assert_abs_diff_eq!(ind.mutual_info(&[X], &[Z]).unwrap(), 0.0, epsilon = 1e-15);

        assert_eq!(d.mutual_info(&[X], &[X, Z]), Err(Error::OverlappingAxes(X)));
    }

    #[test]
    fn marginalize_examples() {
        let px = [0.2, 0.3, 0.5];
        let ps = [0.25, 0.75];
        let m: Vec<f64> = px.iter().flat_map(|a| ps.iter().map(move |b| a * b)).collect();
        let d = JointDist::new(vec![Axis::new(X, 3), Axis::new(S, 2)], m).unwrap();
        let s = d.marginalize(&[S]).unwrap();
        assert_eq!(s.axes(), &[Axis::new(S, 2)]);
        assert_abs_diff_eq!(s.mass()[0], 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(s.mass()[1], 0.75, epsilon = 1e-15);

        let all = d.marginalize(&[S, X]).unwrap();
        assert_eq!(all, d);

        assert_eq!(d.marginalize(&[]), Err(Error::EmptyAxisSet));
    }

    #[test]
    fn binary_entropy_examples() {
        assert_eq!(binary_entropy(0.5).unwrap(), 1.0);
        assert_abs_diff_eq!(binary_entropy(0.2).unwrap(), 0.7219280948873623, epsilon = 1e-12);
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        assert!(binary_entropy(1.5).is_err());
        assert!(binary_entropy(-0.1).is_err());
    }

    #[test]
    fn construction_checks() {
        assert!(JointDist::new(vec![Axis::new(X, 2)], vec![0.5, 0.6]).is_err());
        assert!(JointDist::new(vec![Axis::new(X, 2), Axis::new(X, 2)], vec![0.25; 4]).is_err());
        assert!(JointDist::new(vec![Axis::new(X, 3)], vec![0.5, 0.5]).is_err());
        assert!(CondKernel::from_rows(vec![vec![0.5, 0.5], vec![1.0]]).is_err());
        assert!(CondKernel::from_rows(vec![vec![0.5, 0.4]]).is_err());
        assert!(ProbVec::new(vec![1.2, -0.2]).is_err());
    }

    fn arb_joint() -> impl Strategy<Value = JointDist> {
        (1usize..4, 1usize..4, 1usize..3)
            .prop_flat_map(|(a, b, c)| {
                (
                    Just((a, b, c)),
                    proptest::collection::vec(0.0f64..1.0, a * b * c),
                )
            })
            .prop_filter_map("nonzero mass", |((a, b, c), raw)| {
                let total: f64 = raw.iter().sum();
                (total > 1e-6).then(|| {
                    let m = raw.iter().map(|r| r / total).collect();
                    JointDist::new_unchecked_sum(
                        vec![Axis::new(X, a), Axis::new(Y, b), Axis::new(S, c)],
                        m,
                    )
                    .unwrap()
                })
            })
    }

    proptest! {
        #[test]
        fn chain_rule(d in arb_joint()) {
            let h_ab = d.entropy(&[X, Y]).unwrap();
            let h_a = d.entropy(&[X]).unwrap();
            let h_b_given_a = d.conditional_entropy(&[Y], &[X]).unwrap();
            prop_assert!((h_ab - h_a - h_b_given_a).abs() < 1e-10);
        }

        #[test]
        fn mutual_info_symmetric_and_nonnegative(d in arb_joint()) {
            let ab = d.mutual_info(&[X], &[Y, S]).unwrap();
            let ba = d.mutual_info(&[Y, S], &[X]).unwrap();
            prop_assert!((ab - ba).abs() < 1e-10);
            prop_assert!(ab >= -1e-10);
        }

        #[test]
        fn marginal_entropy_consistent(d in arb_joint()) {
            let sub = d.marginalize(&[X, S]).unwrap();
            let direct = d.entropy(&[S, X]).unwrap();
            prop_assert!((sub.entropy(&[X, S]).unwrap() - direct).abs() < 1e-12);
            let total: f64 = sub.mass().iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }
    }
}
