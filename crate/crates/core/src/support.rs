//! Constructive reduction of the auxiliary alphabet.
//!
//! A joint `P_S P_{XU|S} 1{y = f(x,s)} W(z|x,s)` is a mixture over `u` of
//! conditionals `q_u = P_{XS|U=u}`. The three bound quantities depend on the
//! mixture only through the averages of
//!
//! ```text
//! H(S|U=u) - H(Z|U=u),   H(Y,S|U=u) - H(Z|U=u),   q_u(x, s) for every (x, s)
//! ```
//!
//! so any other mixture with the same averages is equivalent. Reduction runs
//! in two phases:
//!
//! 1. Carathéodory: while the atoms' constraint columns are linearly
//!    dependent, move the weights along a kernel vector until one weight hits
//!    zero. This leaves at most `|X||S| + 2` atoms.
//! 2. One more atom can be removed because the constraint image of the
//!    simplex is connected: slide `q_0` towards `q_1` and track the
//!    barycentric weights of the target averages; the first weight to reach
//!    zero is dropped. This leaves at most `|X||S| + 1` atoms.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::prob::{entropy_of, Axis, AxisName, JointDist};

/// Mass below this is treated as zero when inferring the channel.
const ZERO_MASS: f64 = 1e-12;
/// Allowed mismatch between the joint and its channel factorization.
const FORM_TOL: f64 = 1e-10;
/// Singular values below this (relative to the largest) count as zero.
const RANK_TOL: f64 = 1e-11;
/// Grid resolution of the sliding phase before bisection.
const SLIDE_GRID: usize = 256;

/// Joint over `(X, Y, Z, S, U)` with the same `(X, Y, Z, S)` marginal and
/// bound quantities as `joint`, and at most `|X| |S| + 1` values of `U` with
/// positive mass. Axes of the output are in that canonical order.
pub fn reduce_support(joint: &JointDist) -> Result<JointDist> {
    let form = ChannelForm::infer(joint)?;
    let cap = form.xs * form.ss + 1;
    let mut atoms: Vec<Atom> = form
        .weights
        .iter()
        .zip(&form.conditionals)
        .filter(|(&w, _)| w > 0.0)
        .map(|(&w, q)| Atom {
            weight: w,
            q: q.clone(),
        })
        .collect();
    if atoms.len() > cap {
        let target = form.averages(&atoms);
        caratheodory(&form, &mut atoms)?;
        while atoms.len() > cap {
            slide_out_one(&form, &mut atoms, &target)?;
        }
        reweight(&form, &mut atoms, &target)?;
    }
    Ok(form.rebuild(&atoms))
}

#[derive(Debug, Clone)]
struct Atom {
    weight: f64,
    /// `P_{XS|U=u}`, index `x * |S| + s`.
    q: Vec<f64>,
}

/// Channel recovered from a joint: `f`, `W(z|x,s)` and the `U` mixture.
struct ChannelForm {
    xs: usize,
    ys: usize,
    zs: usize,
    ss: usize,
    f: Vec<usize>,
    /// Index `(x * |S| + s) * |Z| + z`; rows of zero-probability `(x, s)` are
    /// left at zero since they never receive mass.
    w: Vec<f64>,
    weights: Vec<f64>,
    conditionals: Vec<Vec<f64>>,
}

impl ChannelForm {
    fn infer(joint: &JointDist) -> Result<Self> {
        use AxisName::{S, U, X, Y, Z};
        if joint.axes().len() != 5 {
            return Err(Error::NotChannelForm(format!(
                "expected axes X, Y, Z, S, U; got {} axes",
                joint.axes().len()
            )));
        }
        let pos = [X, Y, Z, S, U].map(|a| joint.position(a));
        let pos = pos.into_iter().collect::<Result<Vec<_>>>()?;
        let size = |i: usize| joint.axes()[pos[i]].size;
        let (xs, ys, zs, ss, us) = (size(0), size(1), size(2), size(3), size(4));

        // canonical (x, y, z, s, u) tensor
        let mut m = vec![0.0; xs * ys * zs * ss * us];
        let mut idx = vec![0; 5];
        for x in 0..xs {
            for y in 0..ys {
                for z in 0..zs {
                    for s in 0..ss {
                        for u in 0..us {
                            for (k, v) in [x, y, z, s, u].into_iter().enumerate() {
                                idx[pos[k]] = v;
                            }
                            m[(((x * ys + y) * zs + z) * ss + s) * us + u] = joint.prob(&idx);
                        }
                    }
                }
            }
        }
        let at = |x: usize, y: usize, z: usize, s: usize, u: usize| m[(((x * ys + y) * zs + z) * ss + s) * us + u];

        let mut f = vec![0; xs * ss];
        let mut w = vec![0.0; xs * ss * zs];
        let mut p_xsu = vec![0.0; xs * ss * us];
        for x in 0..xs {
            for s in 0..ss {
                let r = x * ss + s;
                let by_y: Vec<f64> = (0..ys)
                    .map(|y| (0..zs).flat_map(|z| (0..us).map(move |u| (z, u))).map(|(z, u)| at(x, y, z, s, u)).sum())
                    .collect();
                let y_best = (0..ys).fold(0, |b, y| if by_y[y] > by_y[b] { y } else { b });
                if let Some(y) = (0..ys).find(|&y| y != y_best && by_y[y] > ZERO_MASS) {
                    return Err(Error::NotChannelForm(format!(
                        "Y is not a function of (X, S): (x={x}, s={s}) puts mass on y={y_best} and y={y}"
                    )));
                }
                f[r] = y_best;
                let total = by_y[y_best];
                for u in 0..us {
                    p_xsu[r * us + u] = (0..zs).map(|z| at(x, y_best, z, s, u)).sum();
                }
                if total > 0.0 {
                    for z in 0..zs {
                        w[r * zs + z] = (0..us).map(|u| at(x, y_best, z, s, u)).sum::<f64>() / total;
                    }
                }
            }
        }
        for x in 0..xs {
            for s in 0..ss {
                let r = x * ss + s;
                for z in 0..zs {
                    for u in 0..us {
                        let want = p_xsu[r * us + u] * w[r * zs + z];
                        let got = at(x, f[r], z, s, u);
                        if (want - got).abs() > FORM_TOL {
                            return Err(Error::NotChannelForm(format!(
                                "Z depends on U given (X, S) at x={x}, z={z}, s={s}, u={u}"
                            )));
                        }
                    }
                }
            }
        }

        let mut weights = vec![0.0; us];
        let mut conditionals = vec![vec![0.0; xs * ss]; us];
        for u in 0..us {
            let pu: f64 = (0..xs * ss).map(|r| p_xsu[r * us + u]).sum();
            weights[u] = pu;
            if pu > 0.0 {
                for r in 0..xs * ss {
                    conditionals[u][r] = p_xsu[r * us + u] / pu;
                }
            }
        }
        Ok(ChannelForm {
            xs,
            ys,
            zs,
            ss,
            f,
            w,
            weights,
            conditionals,
        })
    }

    /// Constraint image of one conditional: the two entropy differences
    /// followed by `q` itself.
    fn image(&self, q: &[f64]) -> Vec<f64> {
        let (zs, ss, ys) = (self.zs, self.ss, self.ys);
        let mut p_s = vec![0.0; ss];
        let mut p_z = vec![0.0; zs];
        let mut p_ys = vec![0.0; ys * ss];
        for (r, &qr) in q.iter().enumerate() {
            if qr == 0.0 {
                continue;
            }
            let s = r % ss;
            p_s[s] += qr;
            p_ys[self.f[r] * ss + s] += qr;
            for (pz, &wz) in p_z.iter_mut().zip(&self.w[r * zs..(r + 1) * zs]) {
                *pz += qr * wz;
            }
        }
        let h_z = entropy_of(&p_z);
        let mut out = Vec::with_capacity(q.len() + 2);
        out.push(entropy_of(&p_s) - h_z);
        out.push(entropy_of(&p_ys) - h_z);
        out.extend_from_slice(q);
        out
    }

    fn averages(&self, atoms: &[Atom]) -> Vec<f64> {
        let mut out = vec![0.0; self.xs * self.ss + 2];
        for a in atoms {
            for (o, v) in out.iter_mut().zip(self.image(&a.q)) {
                *o += a.weight * v;
            }
        }
        out
    }

    fn rebuild(&self, atoms: &[Atom]) -> JointDist {
        let (xs, ys, zs, ss, us) = (self.xs, self.ys, self.zs, self.ss, atoms.len().max(1));
        let mut mass = vec![0.0; xs * ys * zs * ss * us];
        for (u, a) in atoms.iter().enumerate() {
            for x in 0..xs {
                for s in 0..ss {
                    let r = x * ss + s;
                    let y = self.f[r];
                    for z in 0..zs {
                        mass[(((x * ys + y) * zs + z) * ss + s) * us + u] = a.weight * a.q[r] * self.w[r * zs + z];
                    }
                }
            }
        }
        JointDist::new_unchecked_sum(
            vec![
                Axis::new(AxisName::X, xs),
                Axis::new(AxisName::Y, ys),
                Axis::new(AxisName::Z, zs),
                Axis::new(AxisName::S, ss),
                Axis::new(AxisName::U, us),
            ],
            mass,
        )
        .expect("shape built from the input")
    }
}

/// Columns are the atoms' images with a leading 1 (normalization).
fn constraint_matrix(form: &ChannelForm, qs: &[&[f64]]) -> DMatrix<f64> {
    let rows = form.xs * form.ss + 3;
    let mut m = DMatrix::zeros(rows, qs.len());
    for (j, q) in qs.iter().enumerate() {
        m[(0, j)] = 1.0;
        for (i, v) in form.image(q).into_iter().enumerate() {
            m[(i + 1, j)] = v;
        }
    }
    m
}

/// A unit vector `v` with `m v = 0`, if the columns are dependent.
fn kernel_vector(m: &DMatrix<f64>) -> Option<DVector<f64>> {
    let k = m.ncols();
    // pad to at least square so the SVD exposes the full right singular basis
    let rows = m.nrows().max(k);
    let mut sq = DMatrix::zeros(rows, k);
    sq.view_mut((0, 0), (m.nrows(), k)).copy_from(m);
    let svd = sq.svd(false, true);
    let v_t = svd.v_t.expect("requested");
    let top = svd.singular_values.max();
    let (i, &smallest) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("at least one atom");
    (smallest <= RANK_TOL * top.max(1.0)).then(|| v_t.row(i).transpose())
}

fn caratheodory(form: &ChannelForm, atoms: &mut Vec<Atom>) -> Result<()> {
    loop {
        let qs: Vec<&[f64]> = atoms.iter().map(|a| a.q.as_slice()).collect();
        let Some(v) = kernel_vector(&constraint_matrix(form, &qs)) else {
            return Ok(());
        };
        // sum(v) = 0, so some entry is positive; move until the first weight hits zero
        let (drop, theta) = atoms
            .iter()
            .zip(v.iter())
            .enumerate()
            .filter(|(_, (_, &vj))| vj > 0.0)
            .map(|(j, (a, &vj))| (j, a.weight / vj))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .ok_or_else(|| Error::Numerical("kernel vector has no positive entry".into()))?;
        for (a, &vj) in atoms.iter_mut().zip(v.iter()) {
            a.weight = (a.weight - theta * vj).max(0.0);
        }
        atoms.remove(drop);
    }
}

/// Barycentric weights of `target` with respect to the columns of `m`, solved
/// as a square system on the leading `ncols` rows. `None` when singular.
fn barycentric(m: &DMatrix<f64>, target: &[f64]) -> Option<DVector<f64>> {
    let k = m.ncols();
    let a = m.rows(0, k).into_owned();
    let mut b = DVector::zeros(k);
    b[0] = 1.0;
    for i in 1..k {
        b[i] = target[i - 1];
    }
    a.lu().solve(&b)
}

fn slide_out_one(form: &ChannelForm, atoms: &mut Vec<Atom>, target: &[f64]) -> Result<()> {
    let q0 = atoms[0].q.clone();
    let q1 = atoms[1].q.clone();
    let moved = |t: f64| -> Vec<f64> { q0.iter().zip(&q1).map(|(a, b)| (1.0 - t) * a + t * b).collect() };
    let weights_at = |t: f64| -> Option<DVector<f64>> {
        let qt = moved(t);
        let mut qs: Vec<&[f64]> = vec![&qt];
        qs.extend(atoms[1..].iter().map(|a| a.q.as_slice()));
        barycentric(&constraint_matrix(form, &qs), target)
    };
    let exited = |lam: &Option<DVector<f64>>| lam.as_ref().is_none_or(|l| l.min() <= 0.0);

    let mut lo = 0.0;
    let mut hi = None;
    for step in 1..=SLIDE_GRID {
        let t = step as f64 / SLIDE_GRID as f64;
        if exited(&weights_at(t)) {
            hi = Some(t);
            break;
        }
        lo = t;
    }
    let mut hi = hi.ok_or_else(|| Error::Numerical("sliding phase never left the simplex".into()))?;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if exited(&weights_at(mid)) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let lam = weights_at(lo).ok_or_else(|| Error::Numerical("singular system while sliding".into()))?;
    let drop = lam.argmin().0;
    atoms[0].q = moved(lo);
    for (a, &l) in atoms.iter_mut().zip(lam.iter()) {
        a.weight = l;
    }
    atoms.remove(drop);
    Ok(())
}

/// Least-squares weights for the surviving atoms, so the averages match the
/// target as closely as floating point allows.
fn reweight(form: &ChannelForm, atoms: &mut [Atom], target: &[f64]) -> Result<()> {
    let qs: Vec<&[f64]> = atoms.iter().map(|a| a.q.as_slice()).collect();
    let m = constraint_matrix(form, &qs);
    let mut b = DVector::zeros(m.nrows());
    b[0] = 1.0;
    for (i, &t) in target.iter().enumerate() {
        b[i + 1] = t;
    }
    let lam = m
        .svd(true, true)
        .solve(&b, 1e-14)
        .map_err(|e| Error::Numerical(format!("reweighting failed: {e}")))?;
    if lam.min() < -1e-9 {
        return Err(Error::Numerical(format!("negative weight {} after reduction", lam.min())));
    }
    for (a, &l) in atoms.iter_mut().zip(lam.iter()) {
        a.weight = l.max(0.0);
    }
    Ok(())
}
