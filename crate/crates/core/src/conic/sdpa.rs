//! Sparse SDPA (`.dat-s`) export and import.
//!
//! A [`ConicProgram`] `min cᵀz, Az = b, z ∈ K` is written as the SDPA dual
//! `max F₀•Y, Fᵢ•Y = cᵢ, Y ⪰ 0` with `Y = z`, `Fᵢ` the i-th row of `A`,
//! `cᵢ = bᵢ` and `F₀ = −c`. Free variables are split `z = z⁺ − z⁻` inside the
//! diagonal LP block. SDPA has no second-order cones.
//!
//! Comment lines starting with `*` record the layout, `c0` and names so the
//! program can be read back exactly.

use super::ConicProgram;
use crate::error::{Error, Result};
use crate::linalg::{svec_index, svec_len, SQRT2};
use std::fmt::Write as _;
use std::path::Path;

const LAYOUT_TAG: &str = "* layout";

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// Column-to-entry map for the SDPA block structure (1-based indices).
struct Layout {
    n_free: usize,
    n_lp: usize,
    psd_dims: Vec<usize>,
    psd_start: Vec<usize>,
}

impl Layout {
    fn of(cp: &ConicProgram) -> Self {
        let mut psd_start = Vec::with_capacity(cp.psd_dims.len());
        for b in 0..cp.psd_dims.len() {
            psd_start.push(cp.psd_offset(b));
        }
        Layout { n_free: cp.n_free, n_lp: 2 * cp.n_free + cp.n_nonneg, psd_dims: cp.psd_dims.clone(), psd_start }
    }

    fn first_psd_block(&self) -> usize {
        if self.n_lp > 0 {
            2
        } else {
            1
        }
    }

    /// `(block, i, j, value)` entries carrying coefficient `a` on column `col`.
    fn entries(&self, col: usize, a: f64, out: &mut Vec<(usize, usize, usize, f64)>) {
        if col < self.n_free {
            out.push((1, col + 1, col + 1, a));
            out.push((1, self.n_free + col + 1, self.n_free + col + 1, -a));
            return;
        }
        let lp_col = col + self.n_free;
        if lp_col < self.n_lp {
            out.push((1, lp_col + 1, lp_col + 1, a));
            return;
        }
        let b = self.psd_start.iter().rposition(|&s| s <= col).expect("psd column");
        let (i, j) = unpack(col - self.psd_start[b], self.psd_dims[b]);
        let v = if i == j { a } else { a / SQRT2 };
        out.push((self.first_psd_block() + b, i + 1, j + 1, v));
    }
}

/// Inverse of [`svec_index`] within an `n × n` block: `(i, j)` with `i ≤ j`.
pub(crate) fn unpack(k: usize, n: usize) -> (usize, usize) {
    debug_assert!(k < svec_len(n));
    let mut j = 0;
    while (j + 1) * (j + 2) / 2 <= k {
        j += 1;
    }
    (k - j * (j + 1) / 2, j)
}

pub fn write_sdpa(cp: &ConicProgram) -> Result<String> {
    cp.check()?;
    if !cp.soc_dims.is_empty() {
        return Err(Error::Format(
            "SDPA has no second-order cone blocks; export this program as CBF instead".into(),
        ));
    }
    let lay = Layout::of(cp);
    let mut blocks: Vec<i64> = Vec::new();
    if lay.n_lp > 0 {
        blocks.push(-(lay.n_lp as i64));
    }
    blocks.extend(cp.psd_dims.iter().map(|&d| d as i64));
    if blocks.is_empty() {
        return Err(Error::Format("program has no variables".into()));
    }

    let mut s = String::new();
    let dims: Vec<String> = cp.psd_dims.iter().map(|d| d.to_string()).collect();
    writeln!(s, "{LAYOUT_TAG} free {} nonneg {} psd {}", cp.n_free, cp.n_nonneg, dims.join(" ")).unwrap();
    writeln!(s, "* c0 {}", num(cp.c0)).unwrap();
    writeln!(s, "* LP block: z_free+ (1..{0}), z_free- ({0}+1..{1}), then z_nonneg", cp.n_free, 2 * cp.n_free)
        .unwrap();
    for (col, name) in &cp.names {
        writeln!(s, "* name {col} {name}").unwrap();
    }
    writeln!(s, "{}", cp.m).unwrap();
    writeln!(s, "{}", blocks.len()).unwrap();
    let bs: Vec<String> = blocks.iter().map(|b| b.to_string()).collect();
    writeln!(s, "{}", bs.join(" ")).unwrap();
    let rhs: Vec<String> = cp.b.iter().map(|&v| num(v)).collect();
    writeln!(s, "{}", rhs.join(" ")).unwrap();

    let mut ent = Vec::new();
    for (col, &cj) in cp.c.iter().enumerate() {
        if cj != 0.0 {
            lay.entries(col, -cj, &mut ent);
        }
    }
    emit(&mut s, 0, &mut ent);
    let a = cp.canonical_a();
    let mut k = 0;
    for r in 0..cp.m {
        while k < a.len() && a[k].0 == r {
            lay.entries(a[k].1, a[k].2, &mut ent);
            k += 1;
        }
        emit(&mut s, r + 1, &mut ent);
    }
    Ok(s)
}

fn emit(s: &mut String, mat: usize, ent: &mut Vec<(usize, usize, usize, f64)>) {
    ent.sort_by(|x, y| (x.0, x.1, x.2).cmp(&(y.0, y.1, y.2)));
    for &(b, i, j, v) in ent.iter() {
        writeln!(s, "{mat} {b} {i} {j} {}", num(v)).unwrap();
    }
    ent.clear();
}

pub fn export_sdpa(cp: &ConicProgram, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, write_sdpa(cp)?)?;
    Ok(())
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}

fn parse_nums<T: std::str::FromStr>(line: &str, what: &str) -> Result<Vec<T>> {
    line.replace(['(', ')', '{', '}', ','], " ")
        .split_whitespace()
        .map(|t| t.parse::<T>().map_err(|_| bad(format!("bad {what} token '{t}'"))))
        .collect()
}

/// Reads a `.dat-s` file. Without the layout comment the LP block becomes
/// nonnegative variables and `c0 = 0`.
pub fn read_sdpa(text: &str) -> Result<ConicProgram> {
    let mut layout: Option<(usize, usize)> = None;
    let mut c0 = 0.0;
    let mut names = Vec::new();
    let mut body = Vec::new();
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
        if let Some(rest) = line.strip_prefix(LAYOUT_TAG) {
            let t: Vec<&str> = rest.split_whitespace().collect();
            if t.len() < 5 || t[0] != "free" || t[2] != "nonneg" || t[4] != "psd" {
                return Err(bad("malformed layout comment"));
            }
            let nf = t[1].parse().map_err(|_| bad("bad free count"))?;
            let nn = t[3].parse().map_err(|_| bad("bad nonneg count"))?;
            layout = Some((nf, nn));
        } else if let Some(rest) = line.strip_prefix("* c0 ") {
            c0 = rest.trim().parse().map_err(|_| bad("bad c0"))?;
        } else if let Some(rest) = line.strip_prefix("* name ") {
            let (col, name) = rest.split_once(' ').ok_or_else(|| bad("bad name comment"))?;
            names.push((col.parse().map_err(|_| bad("bad name column"))?, name.to_string()));
        } else if !line.starts_with('*') && !line.starts_with('"') {
            body.push(line);
        }
    }
    let mut it = body.into_iter();
    let mut next = |what: &str| it.next().ok_or_else(|| bad(format!("missing {what}")));
    let m: usize = *parse_nums::<usize>(next("mDIM")?, "mDIM")?.first().ok_or_else(|| bad("empty mDIM"))?;
    let nb: usize = *parse_nums::<usize>(next("nBLOCK")?, "nBLOCK")?.first().ok_or_else(|| bad("empty nBLOCK"))?;
    let blocks: Vec<i64> = parse_nums(next("block structure")?, "block structure")?;
    if blocks.len() != nb {
        return Err(bad(format!("{} block sizes for nBLOCK = {nb}", blocks.len())));
    }
    let b: Vec<f64> = if m > 0 { parse_nums(next("c vector")?, "c vector")? } else { Vec::new() };
    if b.len() != m {
        return Err(bad(format!("c vector has {} entries for mDIM = {m}", b.len())));
    }

    let lp_blocks: Vec<usize> = (0..nb).filter(|&k| blocks[k] < 0).collect();
    if lp_blocks.len() > 1 || lp_blocks.first().is_some_and(|&k| k != 0) {
        return Err(bad("only a single leading diagonal block is supported"));
    }
    let n_lp = lp_blocks.first().map_or(0, |&k| (-blocks[k]) as usize);
    let (n_free, n_nonneg) = match layout {
        Some((nf, nn)) if 2 * nf + nn == n_lp => (nf, nn),
        Some(_) => return Err(bad("layout comment disagrees with the diagonal block size")),
        None => (0, n_lp),
    };
    let psd_dims: Vec<usize> = blocks.iter().filter(|&&d| d > 0).map(|&d| d as usize).collect();
    let first_psd = if n_lp > 0 { 2 } else { 1 };
    let mut cp = ConicProgram::new(n_free, n_nonneg, Vec::new(), psd_dims.clone());
    cp.m = m;
    cp.b = b;
    cp.c0 = c0;
    cp.names = names;

    for line in it {
        let t: Vec<&str> = line.split_whitespace().collect();
        if t.len() != 5 {
            return Err(bad(format!("entry line '{line}' must have 5 fields")));
        }
        let idx = |k: usize| t[k].parse::<usize>().map_err(|_| bad(format!("bad index in '{line}'")));
        let (mat, blk, i, j) = (idx(0)?, idx(1)?, idx(2)?, idx(3)?);
        let v: f64 = t[4].parse().map_err(|_| bad(format!("bad value in '{line}'")))?;
        if mat > m || blk == 0 || blk > nb || i == 0 || j == 0 {
            return Err(bad(format!("entry '{line}' out of range")));
        }
        let col;
        let a;
        if n_lp > 0 && blk == 1 {
            if i != j || i > n_lp {
                return Err(bad(format!("off-diagonal or out-of-range LP entry '{line}'")));
            }
            if i <= n_free {
                col = i - 1;
            } else if i <= 2 * n_free {
                // the z⁻ copy mirrors z⁺
                continue;
            } else {
                col = i - 1 - n_free;
            }
            a = v;
        } else {
            let pb = blk - first_psd;
            let d = psd_dims[pb];
            if i > d || j > d {
                return Err(bad(format!("entry '{line}' exceeds block size {d}")));
            }
            col = cp.psd_offset(pb) + svec_index(i - 1, j - 1);
            a = if i == j { v } else { v * SQRT2 };
        }
        if mat == 0 {
            cp.c[col] -= a;
        } else {
            cp.a.push((mat - 1, col, a));
        }
    }
    cp.check()?;
    Ok(cp)
}

pub fn import_sdpa(path: impl AsRef<Path>) -> Result<ConicProgram> {
    read_sdpa(&std::fs::read_to_string(path)?)
}
