//! TOML spec files for channels and policies.
//!
//! Semideterministic channel:
//!
//! ```toml
//! x_size = 2
//! y_size = 2
//! z_size = 2
//! s_size = 2
//! f = [0, 1, 1, 0]          # index x * s_size + s
//! w = [[0.8, 0.2], [0.8, 0.2], [0.2, 0.8], [0.2, 0.8]]   # rows (x, s), columns z
//! p_s = [0.5, 0.5]
//! ```
//!
//! A general channel drops `f` and gives `w` with columns `(y, z)`,
//! `y * z_size + z`. Kernels may be written as nested rows or as one flat
//! row-major array.
//!
//! Policies give `u_size` plus either `p_xu_given_s` (rows `s`, columns
//! `x * u_size + u`) or, in selection form, `p_yu_given_s` (columns
//! `y * u_size + u`) and `g` (index `(y * u_size + u) * s_size + s`).
//!
//! Every error names the offending field and, where relevant, the index.

use toml::{Table, Value};

use crate::channel::{AuxPolicy, GeneralChannel, SelectionPolicy, SemiDetChannel};
use crate::error::{Error, Result};
use crate::prob::{CondKernel, ProbVec};

/// Row sums may be off by this much.
const SUM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum ChannelSpec {
    SemiDet(SemiDetChannel),
    General(GeneralChannel),
}

impl ChannelSpec {
    pub fn to_general(&self) -> GeneralChannel {
        match self {
            ChannelSpec::SemiDet(ch) => ch.to_general(),
            ChannelSpec::General(ch) => ch.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PolicySpec {
    Aux(AuxPolicy),
    Selection(SelectionPolicy),
}

fn document(text: &str) -> Result<Table> {
    text.parse::<Table>()
        .map_err(|e| Error::parse("<document>", None, e.message().to_string()))
}

fn positive(t: &Table, name: &str) -> Result<usize> {
    let v = t.get(name).ok_or_else(|| Error::parse(name, None, "missing"))?;
    match v.as_integer() {
        Some(i) if i >= 1 => Ok(i as usize),
        Some(i) => Err(Error::parse(name, None, format!("must be at least 1, got {i}"))),
        None => Err(Error::parse(name, None, format!("expected an integer, got {}", v.type_str()))),
    }
}

fn number(v: &Value, name: &str, index: &str) -> Result<f64> {
    let x = match v {
        Value::Float(f) => *f,
        Value::Integer(i) => *i as f64,
        other => {
            return Err(Error::parse(
                name,
                Some(index.to_string()),
                format!("expected a number, got {}", other.type_str()),
            ))
        }
    };
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::parse(
            name,
            Some(index.to_string()),
            format!("probability {x} outside [0, 1]"),
        ));
    }
    Ok(x)
}

fn array<'a>(t: &'a Table, name: &str) -> Result<&'a [Value]> {
    let v = t.get(name).ok_or_else(|| Error::parse(name, None, "missing"))?;
    v.as_array()
        .map(|a| a.as_slice())
        .ok_or_else(|| Error::parse(name, None, format!("expected an array, got {}", v.type_str())))
}

fn check_row_sum(row: &[f64], name: &str, index: Option<String>) -> Result<()> {
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > SUM_TOL {
        return Err(Error::parse(name, index, format!("entries sum to {sum}, expected 1")));
    }
    Ok(())
}

fn prob_vector(t: &Table, name: &str, len: usize) -> Result<Vec<f64>> {
    let a = array(t, name)?;
    if a.len() != len {
        return Err(Error::parse(name, None, format!("expected {len} entries, got {}", a.len())));
    }
    let v = a
        .iter()
        .enumerate()
        .map(|(i, x)| number(x, name, &format!("[{i}]")))
        .collect::<Result<Vec<_>>>()?;
    check_row_sum(&v, name, None)?;
    Ok(v)
}

/// Row-stochastic matrix written either nested or flat.
fn kernel(t: &Table, name: &str, rows: usize, cols: usize) -> Result<CondKernel> {
    let a = array(t, name)?;
    let nested = a.first().is_some_and(|v| v.is_array());
    let mut data = Vec::with_capacity(rows * cols);
    if nested {
        if a.len() != rows {
            return Err(Error::parse(name, None, format!("expected {rows} rows, got {}", a.len())));
        }
        for (r, row) in a.iter().enumerate() {
            let row = row.as_array().ok_or_else(|| {
                Error::parse(name, Some(format!("[{r}]")), format!("expected a row array, got {}", row.type_str()))
            })?;
            if row.len() != cols {
                return Err(Error::parse(
                    name,
                    Some(format!("[{r}]")),
                    format!("expected {cols} entries, got {}", row.len()),
                ));
            }
            for (c, v) in row.iter().enumerate() {
                data.push(number(v, name, &format!("[{r}][{c}]"))?);
            }
        }
    } else {
        if a.len() != rows * cols {
            return Err(Error::parse(
                name,
                None,
                format!("expected {rows} rows of {cols} ({} entries), got {}", rows * cols, a.len()),
            ));
        }
        for (i, v) in a.iter().enumerate() {
            data.push(number(v, name, &format!("[{i}]"))?);
        }
    }
    for r in 0..rows {
        check_row_sum(&data[r * cols..(r + 1) * cols], name, Some(format!("row {r}")))?;
    }
    CondKernel::new(rows, cols, data).map_err(|e| Error::parse(name, None, e.to_string()))
}

fn index_table(t: &Table, name: &str, len: usize, bound: usize) -> Result<Vec<usize>> {
    let a = array(t, name)?;
    if a.len() != len {
        return Err(Error::parse(name, None, format!("expected {len} entries, got {}", a.len())));
    }
    a.iter()
        .enumerate()
        .map(|(i, v)| match v.as_integer() {
            Some(k) if k >= 0 && (k as usize) < bound => Ok(k as usize),
            Some(k) => Err(Error::parse(name, Some(format!("[{i}]")), format!("{k} outside 0..{bound}"))),
            None => Err(Error::parse(
                name,
                Some(format!("[{i}]")),
                format!("expected an integer, got {}", v.type_str()),
            )),
        })
        .collect()
}

/// Either channel kind; the presence of `f` selects the semideterministic form.
pub fn parse_channel(text: &str) -> Result<ChannelSpec> {
    let t = document(text)?;
    let xs = positive(&t, "x_size")?;
    let ys = positive(&t, "y_size")?;
    let zs = positive(&t, "z_size")?;
    let ss = positive(&t, "s_size")?;
    if t.contains_key("f") {
        let f = index_table(&t, "f", xs * ss, ys)?;
        let w = kernel(&t, "w", xs * ss, zs)?;
        let p_s = ProbVec::new(prob_vector(&t, "p_s", ss)?).map_err(|e| Error::parse("p_s", None, e.to_string()))?;
        SemiDetChannel::new(ys, f, w, p_s)
            .map(ChannelSpec::SemiDet)
            .map_err(|e| Error::parse("<channel>", None, e.to_string()))
    } else {
        let w = kernel(&t, "w", xs * ss, ys * zs)?;
        let p_s = ProbVec::new(prob_vector(&t, "p_s", ss)?).map_err(|e| Error::parse("p_s", None, e.to_string()))?;
        GeneralChannel::new(xs, ys, zs, w, p_s)
            .map(ChannelSpec::General)
            .map_err(|e| Error::parse("<channel>", None, e.to_string()))
    }
}

pub fn parse_semidet_channel(text: &str) -> Result<SemiDetChannel> {
    match parse_channel(text)? {
        ChannelSpec::SemiDet(ch) => Ok(ch),
        ChannelSpec::General(_) => Err(Error::parse("f", None, "missing (needed for a semideterministic channel)")),
    }
}

/// Policy for a channel with the given `|X|` and `|S|` (in selection form
/// the `|Y|` comes from the channel too).
pub fn parse_policy(text: &str, x_size: usize, y_size: usize, s_size: usize) -> Result<PolicySpec> {
    let t = document(text)?;
    let us = positive(&t, "u_size")?;
    match (t.contains_key("p_xu_given_s"), t.contains_key("p_yu_given_s")) {
        (true, false) => {
            let k = kernel(&t, "p_xu_given_s", s_size, x_size * us)?;
            AuxPolicy::new(us, k)
                .map(PolicySpec::Aux)
                .map_err(|e| Error::parse("p_xu_given_s", None, e.to_string()))
        }
        (false, true) => {
            let k = kernel(&t, "p_yu_given_s", s_size, y_size * us)?;
            let g = index_table(&t, "g", y_size * us * s_size, x_size)?;
            SelectionPolicy::new(us, k, g)
                .map(PolicySpec::Selection)
                .map_err(|e| Error::parse("g", None, e.to_string()))
        }
        (true, true) => Err(Error::parse(
            "p_yu_given_s",
            None,
            "give either p_xu_given_s or p_yu_given_s, not both",
        )),
        (false, false) => Err(Error::parse("p_xu_given_s", None, "missing (or p_yu_given_s with g)")),
    }
}

fn fmt_row(row: &[f64]) -> String {
    let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
    format!("[{}]", cells.join(", "))
}

fn fmt_rows(k: &CondKernel) -> String {
    let rows: Vec<String> = (0..k.rows()).map(|r| format!("  {},", fmt_row(k.row(r)))).collect();
    format!("[\n{}\n]", rows.join("\n"))
}

fn fmt_ints(v: &[usize]) -> String {
    let cells: Vec<String> = v.iter().map(|x| x.to_string()).collect();
    format!("[{}]", cells.join(", "))
}

/// Spec text that [`parse_channel`] reads back to the same channel.
pub fn semidet_channel_to_toml(ch: &SemiDetChannel) -> String {
    format!(
        "x_size = {}\ny_size = {}\nz_size = {}\ns_size = {}\nf = {}\nw = {}\np_s = {}\n",
        ch.x_size(),
        ch.y_size(),
        ch.z_size(),
        ch.s_size(),
        fmt_ints(ch.f_table()),
        fmt_rows(ch.w()),
        fmt_row(ch.p_s().as_slice())
    )
}

/// Spec text for a general channel.
pub fn general_channel_to_toml(ch: &GeneralChannel) -> String {
    format!(
        "x_size = {}\ny_size = {}\nz_size = {}\ns_size = {}\nw = {}\np_s = {}\n",
        ch.x_size(),
        ch.y_size(),
        ch.z_size(),
        ch.s_size(),
        fmt_rows(ch.w()),
        fmt_row(ch.p_s().as_slice())
    )
}

/// Spec text for a selection-form policy.
pub fn selection_policy_to_toml(pol: &SelectionPolicy) -> String {
    format!(
        "u_size = {}\np_yu_given_s = {}\ng = {}\n",
        pol.u_size(),
        fmt_rows(pol.p_yu_given_s()),
        fmt_ints(pol.g_table())
    )
}

/// Spec text for a policy in `P_{XU|S}` form.
pub fn aux_policy_to_toml(pol: &AuxPolicy) -> String {
    format!("u_size = {}\np_xu_given_s = {}\n", pol.u_size(), fmt_rows(pol.kernel()))
}
