//! Plain-text dump of a [`ConicProblem`].
//!
//! ```text
//! * comment lines start with '*'
//! rows <m>
//! block <b> <kind> <size>          kind in {free, nonneg, soc, psd}
//! rhs <i> <value>
//! <i> <b> <r> <c> <value>
//! ```
//!
//! Indices are 1-based. Constraint `0` is the objective (minimized). Free,
//! nonnegative and SOC entries use `r = c =` position within the block. PSD
//! entries are matrix coefficients `F_rc` with `r <= c`, so that a constraint
//! reads `sum F_rc X_rc` over the full symmetric matrix (SDPA convention).

use std::io::{self, Write};
use std::path::Path;

use super::svec::{svec_len, SQRT2};
use super::ConicProblem;

struct BlockInfo {
    kind: &'static str,
    size: usize,
    start: usize,
    len: usize,
}

fn block_infos(p: &ConicProblem) -> Vec<BlockInfo> {
    let mut out = Vec::new();
    let mut at = 0;
    let mut push = |kind, size, len| {
        out.push(BlockInfo {
            kind,
            size,
            start: at,
            len,
        });
        at += len;
    };
    if p.cones.free > 0 {
        push("free", p.cones.free, p.cones.free);
    }
    if p.cones.nonneg > 0 {
        push("nonneg", p.cones.nonneg, p.cones.nonneg);
    }
    for &d in &p.cones.soc {
        push("soc", d, d);
    }
    for &d in &p.cones.psd {
        push("psd", d, svec_len(d));
    }
    out
}

fn locate(blocks: &[BlockInfo], col: usize) -> (usize, usize, usize, f64) {
    let bi = blocks
        .iter()
        .position(|b| col >= b.start && col < b.start + b.len)
        .expect("column inside some block");
    let b = &blocks[bi];
    let local = col - b.start;
    if b.kind != "psd" {
        return (bi + 1, local + 1, local + 1, 1.0);
    }
    // Walk the column-major lower triangle.
    let n = b.size;
    let mut k = local;
    for j in 0..n {
        let len = n - j;
        if k < len {
            let i = j + k;
            let f = if i == j { 1.0 } else { 1.0 / SQRT2 };
            return (bi + 1, j + 1, i + 1, f);
        }
        k -= len;
    }
    unreachable!("svec index within block length")
}

pub fn write_to<W: Write>(p: &ConicProblem, out: &mut W) -> io::Result<()> {
    let blocks = block_infos(p);
    writeln!(out, "* minimize c.x subject to A x = b, x in the listed cones")?;
    writeln!(out, "rows {}", p.rows.len())?;
    for (k, b) in blocks.iter().enumerate() {
        writeln!(out, "block {} {} {}", k + 1, b.kind, b.size)?;
    }
    for (i, v) in p.b.iter().enumerate() {
        if *v != 0.0 {
            writeln!(out, "rhs {} {:e}", i + 1, v)?;
        }
    }
    for (j, &v) in p.c.iter().enumerate() {
        if v != 0.0 {
            let (b, r, c, f) = locate(&blocks, j);
            writeln!(out, "0 {b} {r} {c} {:e}", v * f)?;
        }
    }
    for (i, row) in p.rows.iter().enumerate() {
        for &(j, v) in row {
            if v != 0.0 {
                let (b, r, c, f) = locate(&blocks, j);
                writeln!(out, "{} {b} {r} {c} {:e}", i + 1, v * f)?;
            }
        }
    }
    Ok(())
}

pub fn write_dump(p: &ConicProblem, path: &Path) -> io::Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = io::BufWriter::new(file);
    write_to(p, &mut w)?;
    w.flush()
}
