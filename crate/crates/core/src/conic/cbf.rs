//! Conic Benchmark Format (CBF, version 3) export and import.
//!
//! Scalar variables become one `VAR` list (`F`, `L+`, then one `Q` per
//! second-order block, radius first), PSD blocks become `PSDVAR`s, and
//! `Az = b` is a single `L=` constraint block with `BCOORD = −b`.
//! Off-diagonal PSD coefficients are stored once for the symmetric pair, so a
//! packed coefficient `a` is written as `a/√2`.

use super::sdpa::unpack;
use super::ConicProgram;
use crate::error::{Error, Result};
use crate::linalg::{svec_index, SQRT2};
use std::fmt::Write as _;
use std::path::Path;

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}

/// `(psd block, row, col)` with row ≥ col, as CBF stores the lower triangle.
fn psd_position(cp: &ConicProgram, col: usize) -> Option<(usize, usize, usize)> {
    if cp.psd_dims.is_empty() || col < cp.psd_offset(0) {
        return None;
    }
    let b = (0..cp.psd_dims.len()).rev().find(|&b| cp.psd_offset(b) <= col)?;
    let (i, j) = unpack(col - cp.psd_offset(b), cp.psd_dims[b]);
    Some((b, j, i))
}

pub fn write_cbf(cp: &ConicProgram) -> Result<String> {
    cp.check()?;
    let n_scalar = cp.n_free + cp.n_nonneg + cp.n_soc();
    let mut s = String::new();
    writeln!(s, "# min c'z + c0  s.t.  Az = b").unwrap();
    for (col, name) in &cp.names {
        writeln!(s, "# name {col} {name}").unwrap();
    }
    writeln!(s, "VER\n3\n").unwrap();
    writeln!(s, "OBJSENSE\nMIN\n").unwrap();

    if !cp.psd_dims.is_empty() {
        writeln!(s, "PSDVAR\n{}", cp.psd_dims.len()).unwrap();
        for d in &cp.psd_dims {
            writeln!(s, "{d}").unwrap();
        }
        writeln!(s).unwrap();
    }
    if n_scalar > 0 {
        let mut doms = Vec::new();
        if cp.n_free > 0 {
            doms.push(format!("F {}", cp.n_free));
        }
        if cp.n_nonneg > 0 {
            doms.push(format!("L+ {}", cp.n_nonneg));
        }
        doms.extend(cp.soc_dims.iter().map(|d| format!("Q {d}")));
        writeln!(s, "VAR\n{n_scalar} {}\n{}\n", doms.len(), doms.join("\n")).unwrap();
    }
    if cp.m > 0 {
        writeln!(s, "CON\n{} 1\nL= {}\n", cp.m, cp.m).unwrap();
    }

    let mut obj_f = Vec::new();
    let mut obj_a = Vec::new();
    for (col, &cj) in cp.c.iter().enumerate() {
        if cj == 0.0 {
            continue;
        }
        match psd_position(cp, col) {
            Some((b, i, j)) => obj_f.push(format!("{b} {i} {j} {}", num(if i == j { cj } else { cj / SQRT2 }))),
            None => obj_a.push(format!("{col} {}", num(cj))),
        }
    }
    if !obj_f.is_empty() {
        writeln!(s, "OBJFCOORD\n{}\n{}\n", obj_f.len(), obj_f.join("\n")).unwrap();
    }
    if !obj_a.is_empty() {
        writeln!(s, "OBJACOORD\n{}\n{}\n", obj_a.len(), obj_a.join("\n")).unwrap();
    }
    if cp.c0 != 0.0 {
        writeln!(s, "OBJBCOORD\n{}\n", num(cp.c0)).unwrap();
    }

    let mut f = Vec::new();
    let mut a = Vec::new();
    for (r, col, v) in cp.canonical_a() {
        match psd_position(cp, col) {
            Some((b, i, j)) => f.push(format!("{r} {b} {i} {j} {}", num(if i == j { v } else { v / SQRT2 }))),
            None => a.push(format!("{r} {col} {}", num(v))),
        }
    }
    if !f.is_empty() {
        writeln!(s, "FCOORD\n{}\n{}\n", f.len(), f.join("\n")).unwrap();
    }
    if !a.is_empty() {
        writeln!(s, "ACOORD\n{}\n{}\n", a.len(), a.join("\n")).unwrap();
    }
    let bc: Vec<String> =
        cp.b.iter().enumerate().filter(|(_, &v)| v != 0.0).map(|(r, &v)| format!("{r} {}", num(-v))).collect();
    if !bc.is_empty() {
        writeln!(s, "BCOORD\n{}\n{}\n", bc.len(), bc.join("\n")).unwrap();
    }
    Ok(s)
}

pub fn export_cbf(cp: &ConicProgram, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, write_cbf(cp)?)?;
    Ok(())
}

struct Lines<'a> {
    it: std::iter::Peekable<std::vec::IntoIter<&'a str>>,
}

impl<'a> Lines<'a> {
    fn next(&mut self, what: &str) -> Result<&'a str> {
        self.it.next().ok_or_else(|| bad(format!("unexpected end of file in {what}")))
    }

    fn fields<T: std::str::FromStr>(&mut self, what: &str) -> Result<Vec<T>> {
        self.next(what)?
            .split_whitespace()
            .map(|t| t.parse::<T>().map_err(|_| bad(format!("bad token '{t}' in {what}"))))
            .collect()
    }

    fn count(&mut self, what: &str) -> Result<usize> {
        self.fields::<usize>(what)?.first().copied().ok_or_else(|| bad(format!("empty count in {what}")))
    }
}

/// `(index fields, value)` of a coordinate line with `k` integer fields.
fn coord(line: &str, k: usize, what: &str) -> Result<(Vec<usize>, f64)> {
    let t: Vec<&str> = line.split_whitespace().collect();
    if t.len() != k + 1 {
        return Err(bad(format!("{what} line '{line}' needs {} fields", k + 1)));
    }
    let idx = t[..k]
        .iter()
        .map(|x| x.parse::<usize>().map_err(|_| bad(format!("bad index in {what} line '{line}'"))))
        .collect::<Result<Vec<_>>>()?;
    let v = t[k].parse::<f64>().map_err(|_| bad(format!("bad value in {what} line '{line}'")))?;
    Ok((idx, v))
}

/// Reads the subset of CBF that [`write_cbf`] produces: a minimization with
/// scalar domains `F`, `L+`, `Q` in that order, PSD variables and one `L=`
/// constraint block.
pub fn read_cbf(text: &str) -> Result<ConicProgram> {
    let mut names = Vec::new();
    let mut body = Vec::new();
    for line in text.lines().map(str::trim) {
        if let Some(rest) = line.strip_prefix("# name ") {
            let (col, name) = rest.split_once(' ').ok_or_else(|| bad("bad name comment"))?;
            names.push((col.parse().map_err(|_| bad("bad name column"))?, name.to_string()));
        } else if !line.is_empty() && !line.starts_with('#') {
            body.push(line);
        }
    }
    let mut ln = Lines { it: body.into_iter().peekable() };
    let (mut n_free, mut n_nonneg, mut soc) = (0, 0, Vec::new());
    let mut n_scalar = 0;
    let mut psd = Vec::new();
    let mut m = 0;
    let mut c0 = 0.0;
    let mut c_a = Vec::new();
    let mut c_f = Vec::new();
    let mut a_a = Vec::new();
    let mut a_f = Vec::new();
    let mut bvals = Vec::new();
    while let Some(kw) = ln.it.next() {
        match kw {
            "VER" => {
                let v = ln.count("VER")?;
                if v != 3 {
                    return Err(bad(format!("unsupported CBF version {v}")));
                }
            }
            "OBJSENSE" => {
                if ln.next("OBJSENSE")? != "MIN" {
                    return Err(bad("only OBJSENSE MIN is supported"));
                }
            }
            "PSDVAR" => {
                let k = ln.count("PSDVAR")?;
                for _ in 0..k {
                    psd.push(ln.count("PSDVAR")?);
                }
            }
            "VAR" => {
                let h = ln.fields::<usize>("VAR")?;
                if h.len() != 2 {
                    return Err(bad("VAR header needs two counts"));
                }
                n_scalar = h[0];
                let mut last = None;
                for _ in 0..h[1] {
                    let t: Vec<&str> = ln.next("VAR")?.split_whitespace().collect();
                    let d: usize = t.get(1).and_then(|x| x.parse().ok()).ok_or_else(|| bad("bad VAR domain"))?;
                    let rank = match t[0] {
                        "F" => 0,
                        "L+" => 1,
                        "Q" => 2,
                        other => return Err(bad(format!("unsupported variable domain {other}"))),
                    };
                    if last.is_some_and(|l| rank < l || (rank == l && rank < 2)) {
                        return Err(bad("variable domains must be F, L+, Q in that order"));
                    }
                    last = Some(rank);
                    match rank {
                        0 => n_free = d,
                        1 => n_nonneg = d,
                        _ => soc.push(d),
                    }
                }
            }
            "CON" => {
                let h = ln.fields::<usize>("CON")?;
                if h.len() != 2 || h[1] != 1 {
                    return Err(bad("expected a single constraint block"));
                }
                m = h[0];
                let t: Vec<&str> = ln.next("CON")?.split_whitespace().collect();
                if t.len() != 2 || t[0] != "L=" || t[1].parse::<usize>().ok() != Some(m) {
                    return Err(bad("constraint block must be L= covering every row"));
                }
            }
            "OBJBCOORD" => {
                c0 = ln.next("OBJBCOORD")?.parse().map_err(|_| bad("bad OBJBCOORD"))?;
            }
            "OBJACOORD" | "OBJFCOORD" | "ACOORD" | "FCOORD" | "BCOORD" => {
                let k = ln.count(kw)?;
                let nidx = match kw {
                    "OBJACOORD" | "BCOORD" => 1,
                    "ACOORD" => 2,
                    "OBJFCOORD" => 3,
                    _ => 4,
                };
                for _ in 0..k {
                    let e = coord(ln.next(kw)?, nidx, kw)?;
                    match kw {
                        "OBJACOORD" => c_a.push(e),
                        "OBJFCOORD" => c_f.push(e),
                        "ACOORD" => a_a.push(e),
                        "FCOORD" => a_f.push(e),
                        _ => bvals.push(e),
                    }
                }
            }
            other => return Err(bad(format!("unsupported CBF section {other}"))),
        }
    }
    if n_free + n_nonneg + soc.iter().sum::<usize>() != n_scalar {
        return Err(bad("VAR domain sizes do not add up"));
    }
    let mut cp = ConicProgram::new(n_free, n_nonneg, soc, psd);
    cp.m = m;
    cp.b = vec![0.0; m];
    cp.c0 = c0;
    cp.names = names;
    let psd_col = |cp: &ConicProgram, idx: &[usize]| -> Result<usize> {
        let (b, i, j) = (idx[0], idx[1], idx[2]);
        if b >= cp.psd_dims.len() || i >= cp.psd_dims[b] || j >= cp.psd_dims[b] {
            return Err(bad("PSD coordinate out of range"));
        }
        Ok(cp.psd_offset(b) + svec_index(i, j))
    };
    let unscale = |idx: &[usize], v: f64| if idx[1] == idx[2] { v } else { v * SQRT2 };
    for (idx, v) in c_a {
        if idx[0] >= n_scalar {
            return Err(bad("OBJACOORD index out of range"));
        }
        cp.c[idx[0]] += v;
    }
    for (idx, v) in c_f {
        let col = psd_col(&cp, &idx)?;
        cp.c[col] += unscale(&idx, v);
    }
    for (idx, v) in a_a {
        if idx[0] >= m || idx[1] >= n_scalar {
            return Err(bad("ACOORD index out of range"));
        }
        cp.a.push((idx[0], idx[1], v));
    }
    for (idx, v) in a_f {
        if idx[0] >= m {
            return Err(bad("FCOORD row out of range"));
        }
        let col = psd_col(&cp, &idx[1..])?;
        cp.a.push((idx[0], col, unscale(&idx[1..], v)));
    }
    for (idx, v) in bvals {
        if idx[0] >= m {
            return Err(bad("BCOORD row out of range"));
        }
        cp.b[idx[0]] -= v;
    }
    cp.check()?;
    Ok(cp)
}

pub fn import_cbf(path: impl AsRef<Path>) -> Result<ConicProgram> {
    read_cbf(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn soc_program_round_trips() {
        let mut cp = ConicProgram::new(1, 1, vec![3], vec![2]);
        cp.c = vec![0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 0.5, 2.0];
        cp.c0 = -1.25;
        cp.add_row(&[(0, 1.0), (2, -1.0)], 0.0);
        cp.add_row(&[(3, 1.0), (6, 0.3)], 2.0);
        cp.names.push((0, "x".into()));
        let back = read_cbf(&write_cbf(&cp).unwrap()).unwrap();
        assert_eq!(back.soc_dims, cp.soc_dims);
        assert_eq!(back.psd_dims, cp.psd_dims);
        assert_eq!(back.b, cp.b);
        assert_eq!(back.c0, cp.c0);
        assert_eq!(back.names, cp.names);
        for (x, y) in back.c.iter().zip(&cp.c) {
            assert!((x - y).abs() <= 1e-15 * y.abs().max(1.0));
        }
    }

    #[test]
    fn unknown_section_is_an_error() {
        assert!(read_cbf("VER\n3\nPOWCONES\n0 0\n").is_err());
    }
}
