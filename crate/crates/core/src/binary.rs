//! The binary example: `Y = x XOR S`, `Z` is `x` through a BSC(p), and
//! `S ~ Bernoulli(sigma)`.
//!
//! With noncausal state knowledge the region is the union over `alpha` of
//! `[0, Hb(alpha)] x [0, 1 - Hb(beta)]`, `beta = alpha (1-p) + (1-alpha) p`.
//! With causal knowledge (and `sigma = 1/2`) only time-sharing between
//! `(1, 0)` and `(0, 1 - Hb(p))` is possible.

use std::fmt::Write as _;

use crate::channel::{AuxPolicy, SelectionPolicy, SemiDetChannel};
use crate::error::{Error, Result};
use crate::prob::{binary_entropy, CondKernel, ProbVec};
use crate::region::{fmt9, ConvexRegion2D, RatePair};

pub const DEFAULT_ALPHA_SAMPLES: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinaryExampleParams {
    pub sigma: f64,
    pub p: f64,
}

impl BinaryExampleParams {
    pub fn new(sigma: f64, p: f64) -> Result<Self> {
        check_prob(sigma, "sigma")?;
        check_prob(p, "p")?;
        Ok(BinaryExampleParams { sigma, p })
    }
}

fn check_prob(v: f64, name: &str) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::InvalidProbability {
            value: v,
            context: name.to_string(),
        })
    }
}

pub fn build_channel(params: BinaryExampleParams) -> Result<SemiDetChannel> {
    let BinaryExampleParams { sigma, p } = params;
    check_prob(sigma, "sigma")?;
    check_prob(p, "p")?;
    let mut f = Vec::with_capacity(4);
    let mut rows = Vec::with_capacity(4);
    for x in 0..2 {
        for s in 0..2 {
            f.push(x ^ s);
            rows.push(if x == 0 { vec![1.0 - p, p] } else { vec![p, 1.0 - p] });
        }
    }
    SemiDetChannel::new(2, f, CondKernel::from_rows(rows)?, ProbVec::new(vec![1.0 - sigma, sigma])?)
}

/// `alpha (1 - p) + (1 - alpha) p`: crossover of a BSC(alpha) followed by a BSC(p).
pub fn beta(alpha: f64, p: f64) -> Result<f64> {
    check_prob(alpha, "alpha")?;
    check_prob(p, "p")?;
    Ok(alpha * (1.0 - p) + (1.0 - alpha) * p)
}

/// Corner `(Hb(alpha), 1 - Hb(beta))` of the rectangle for one `alpha`.
pub fn noncausal_corner(alpha: f64, p: f64) -> Result<RatePair> {
    let b = beta(alpha, p)?;
    Ok(RatePair::new(binary_entropy(alpha)?, 1.0 - binary_entropy(b)?))
}

/// Hull of the rectangles for `alpha_samples` uniformly spaced `alpha` in `[0, 1/2]`.
pub fn noncausal_region(p: f64, alpha_samples: usize) -> Result<ConvexRegion2D> {
    if alpha_samples < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 alpha samples, got {alpha_samples}"
        )));
    }
    check_prob(p, "p")?;
    let mut pts = vec![RatePair::ORIGIN];
    for i in 0..alpha_samples {
        let alpha = 0.5 * i as f64 / (alpha_samples - 1) as f64;
        let c = noncausal_corner(alpha, p)?;
        pts.extend([c, RatePair::new(c.r_y, 0.0), RatePair::new(0.0, c.r_z)]);
    }
    ConvexRegion2D::hull(&pts)
}

/// Triangle `(0,0), (1,0), (0, 1 - Hb(p))`; a segment when `p = 1/2`.
pub fn causal_region(p: f64) -> Result<ConvexRegion2D> {
    let k = 1.0 - binary_entropy(p)?;
    ConvexRegion2D::hull(&[RatePair::ORIGIN, RatePair::new(1.0, 0.0), RatePair::new(0.0, k)])
}

/// [`causal_region`] for full parameters; only `sigma = 1/2` has a known
/// closed form.
pub fn causal_region_for(params: BinaryExampleParams) -> Result<ConvexRegion2D> {
    if params.sigma != 0.5 {
        return Err(Error::InvalidArgument(format!(
            "causal closed form needs sigma = 0.5, got {}",
            params.sigma
        )));
    }
    causal_region(params.p)
}

/// `U` uniform, independent of `S`; `X` is `U` through a BSC(alpha).
pub fn bsc_policy(alpha: f64) -> Result<AuxPolicy> {
    check_prob(alpha, "alpha")?;
    // columns (x, u)
    let row = vec![0.5 * (1.0 - alpha), 0.5 * alpha, 0.5 * alpha, 0.5 * (1.0 - alpha)];
    AuxPolicy::new(2, CondKernel::from_rows(vec![row.clone(), row])?)
}

/// [`bsc_policy`] in selection form: `Y = U xor N xor S` with
/// `N ~ Bernoulli(alpha)` and `g(y, u, s) = y xor s`.
pub fn bsc_selection_policy(alpha: f64) -> Result<SelectionPolicy> {
    check_prob(alpha, "alpha")?;
    let mut rows = Vec::with_capacity(2);
    for s in 0..2usize {
        let mut row = vec![0.0; 4];
        for y in 0..2usize {
            for u in 0..2usize {
                let noise = y ^ u ^ s;
                row[y * 2 + u] = 0.5 * if noise == 1 { alpha } else { 1.0 - alpha };
            }
        }
        rows.push(row);
    }
    let mut g = vec![0; 8];
    for y in 0..2usize {
        for u in 0..2usize {
            for s in 0..2usize {
                g[(y * 2 + u) * 2 + s] = y ^ s;
            }
        }
    }
    SelectionPolicy::new(2, CondKernel::from_rows(rows)?, g)
}

/// Files written by [`figure1`].
#[derive(Debug, Clone, PartialEq)]
pub struct Figure1 {
    pub noncausal_csv: String,
    pub causal_csv: Option<String>,
    pub svg: String,
}

fn boundary_csv(points: &[RatePair]) -> String {
    let mut out = String::from("r_y,r_z\n");
    for p in points {
        writeln!(out, "{},{}", fmt9(p.r_y), fmt9(p.r_z)).unwrap();
    }
    out
}

/// Boundary curves for both regions plus an SVG overlay (noncausal solid,
/// causal dashed). The causal curve needs `sigma = 1/2`; pass
/// `with_causal = false` to skip it for other `sigma`.
pub fn figure1(params: BinaryExampleParams, alpha_samples: usize, with_causal: bool) -> Result<Figure1> {
    let noncausal = noncausal_region(params.p, alpha_samples)?.outer_boundary();
    let causal = if with_causal {
        Some(causal_region_for(params)?.outer_boundary())
    } else {
        None
    };
    let svg = render_svg(&noncausal, causal.as_deref());
    Ok(Figure1 {
        noncausal_csv: boundary_csv(&noncausal),
        causal_csv: causal.as_deref().map(boundary_csv),
        svg,
    })
}

fn render_svg(solid: &[RatePair], dashed: Option<&[RatePair]>) -> String {
    // plot box in user units; R_z is flipped so it grows upward
    let z_max = solid
        .iter()
        .chain(dashed.unwrap_or(&[]))
        .map(|p| p.r_z)
        .fold(0.4_f64, f64::max);
    let z_max = (z_max * 10.0).ceil() / 10.0;
    let (w, h) = (1.0, z_max);
    let margin = 0.08;
    let poly = |pts: &[RatePair]| {
        pts.iter()
            .map(|p| format!("{:.6},{:.6}", p.r_y, h - p.r_z))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let stroke = 0.004;
    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="{:.3} {:.3} {:.3} {:.3}" width="600" height="{:.0}">"#,
        -margin,
        -margin,
        w + 2.0 * margin,
        h + 2.0 * margin,
        600.0 * (h + 2.0 * margin) / (w + 2.0 * margin)
    )
    .unwrap();
    writeln!(svg, r#"  <rect x="0" y="0" width="{w:.3}" height="{h:.3}" fill="none" stroke="black" stroke-width="{stroke}"/>"#).unwrap();
    writeln!(
        svg,
        r#"  <polyline fill="none" stroke="black" stroke-width="{stroke}" points="{}"/>"#,
        poly(solid)
    )
    .unwrap();
    if let Some(d) = dashed {
        writeln!(
            svg,
            r#"  <polyline fill="none" stroke="black" stroke-width="{stroke}" stroke-dasharray="0.02,0.012" points="{}"/>"#,
            poly(d)
        )
        .unwrap();
    }
    let font = 0.035;
    writeln!(svg, r#"  <text x="{:.3}" y="{:.3}" font-size="{font}" text-anchor="middle">R_y</text>"#, w / 2.0, h + 0.065).unwrap();
    writeln!(
        svg,
        r#"  <text x="{:.3}" y="{:.3}" font-size="{font}" text-anchor="middle" transform="rotate(-90 {:.3} {:.3})">R_z</text>"#,
        -0.045,
        h / 2.0,
        -0.045,
        h / 2.0
    )
    .unwrap();
    for (i, label) in [(0usize, "0"), (5, "0.5"), (10, "1")] {
        let x = i as f64 / 10.0;
        writeln!(svg, r#"  <text x="{x:.3}" y="{:.3}" font-size="{:.3}" text-anchor="middle">{label}</text>"#, h + 0.03, font * 0.7).unwrap();
    }
    writeln!(svg, r#"  <text x="0.62" y="{:.3}" font-size="{font}">Noncausal (solid)</text>"#, 0.06).unwrap();
    if dashed.is_some() {
        writeln!(svg, r#"  <text x="0.62" y="{:.3}" font-size="{font}">Causal (dashed)</text>"#, 0.11).unwrap();
    }
    svg.push_str("</svg>\n");
    svg
}
