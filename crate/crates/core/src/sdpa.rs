//! Reader and writer for the single-block SDPA sparse format (`.dat-s`).
//!
//! Grammar accepted here: optional comment lines starting with `*` or `"`;
//! then the constraint count `m`; the block count (must be 1); the block
//! size `n`; `m` whitespace-separated values for `b`; then entry lines
//! `k blk i j v` with `blk == 1` and `1 <= i <= j <= n`. Matrix index
//! `k = 0` defines the cost `C` of the minimization `min <C, X>`; indices
//! `1..=m` define the constraint matrices. Third-party files written for
//! the maximization convention need their cost negated by the caller.
//!
//! The writer emits 17 significant digits so values survive a round trip
//! bit-for-bit.

use nalgebra::DVector;
use thiserror::Error;

use crate::model::{ModelError, SdpProblem, SparseSym};

/// Parse failures carry the 1-based source line.
#[derive(Debug, Error)]
pub enum SdpaError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: multi-block unsupported (file declares {nblocks} blocks)")]
    MultiBlock { line: usize, nblocks: i64 },
    #[error("line {line}: diagonal blocks unsupported (block size {size})")]
    DiagonalBlock { line: usize, size: i64 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn parse_err(line: usize, msg: impl Into<String>) -> SdpaError {
    SdpaError::Parse {
        line,
        msg: msg.into(),
    }
}

struct Tokens<'a> {
    items: Vec<(&'a str, usize)>,
    pos: usize,
}

impl<'a> Tokens<'a> {
    fn new(text: &'a str) -> Self {
        let mut items = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let trimmed = line.trim_start();
            if trimmed.starts_with('*') || trimmed.starts_with('"') {
                continue;
            }
            for tok in line.split_whitespace() {
                items.push((tok, idx + 1));
            }
        }
        Tokens { items, pos: 0 }
    }

    fn next(&mut self, what: &str) -> Result<(&'a str, usize), SdpaError> {
        let item = self.items.get(self.pos).copied().ok_or_else(|| {
            let line = self.items.last().map_or(1, |&(_, l)| l);
            parse_err(line, format!("unexpected end of file, expected {what}"))
        })?;
        self.pos += 1;
        Ok(item)
    }

    fn next_int(&mut self, what: &str) -> Result<(i64, usize), SdpaError> {
        let (tok, line) = self.next(what)?;
        let v = tok
            .parse::<i64>()
            .map_err(|_| parse_err(line, format!("expected integer {what}, got `{tok}`")))?;
        Ok((v, line))
    }

    fn next_real(&mut self, what: &str) -> Result<(f64, usize), SdpaError> {
        let (tok, line) = self.next(what)?;
        let v = tok
            .parse::<f64>()
            .map_err(|_| parse_err(line, format!("expected real {what}, got `{tok}`")))?;
        if !v.is_finite() {
            return Err(parse_err(line, format!("non-finite value for {what}")));
        }
        Ok((v, line))
    }

    fn exhausted(&self) -> bool {
        self.pos >= self.items.len()
    }
}

/// Parses SDPA sparse text into a problem. The returned problem has an
/// empty name; callers usually set it from the file stem.
pub fn read_sdpa(text: &str) -> Result<SdpProblem, SdpaError> {
    let mut toks = Tokens::new(text);
    let (m, line_m) = toks.next_int("constraint count")?;
    if m < 1 {
        return Err(parse_err(line_m, format!("constraint count must be >= 1, got {m}")));
    }
    let (nblocks, line_nb) = toks.next_int("block count")?;
    if nblocks != 1 {
        return Err(SdpaError::MultiBlock {
            line: line_nb,
            nblocks,
        });
    }
    let (bsize, line_bs) = toks.next_int("block size")?;
    if bsize < 0 {
        return Err(SdpaError::DiagonalBlock {
            line: line_bs,
            size: bsize,
        });
    }
    if bsize == 0 {
        return Err(parse_err(line_bs, "block size must be positive"));
    }
    let m = m as usize;
    let n = bsize as usize;

    let mut b = DVector::zeros(m);
    for k in 0..m {
        b[k] = toks.next_real("right-hand-side value")?.0;
    }

    let mut triplets: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); m + 1];
    while !toks.exhausted() {
        let (k, line_k) = toks.next_int("matrix index")?;
        if k < 0 || k as usize > m {
            return Err(parse_err(
                line_k,
                format!("matrix index {k} out of range 0..={m}"),
            ));
        }
        let (blk, line_blk) = toks.next_int("block index")?;
        if blk != 1 {
            return Err(parse_err(line_blk, format!("block index must be 1, got {blk}")));
        }
        let (i, line_i) = toks.next_int("row index")?;
        let (j, line_j) = toks.next_int("column index")?;
        if i < 1 || j < 1 || i as usize > n || j as usize > n {
            return Err(parse_err(
                line_i.max(line_j),
                format!("entry index ({i}, {j}) out of range 1..={n}"),
            ));
        }
        if i > j {
            return Err(parse_err(
                line_i.max(line_j),
                format!("entry ({i}, {j}) below the diagonal; upper triangle required"),
            ));
        }
        let (v, _) = toks.next_real("entry value")?;
        triplets[k as usize].push((i as usize - 1, j as usize - 1, v));
    }

    let mut mats = triplets.into_iter();
    let c = SparseSym::new(n, mats.next().expect("slot 0 exists"))?;
    let constraints = mats
        .map(|t| SparseSym::new(n, t))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SdpProblem::new(n, constraints, b, c, "")?)
}

fn fmt_val(v: f64) -> String {
    format!("{v:.16e}")
}

/// Serializes a problem to single-block SDPA sparse text.
pub fn write_sdpa(p: &SdpProblem) -> String {
    let mut out = String::new();
    out.push_str(&format!("{}\n1\n{}\n", p.m(), p.n()));
    let b_line: Vec<String> = p.b().iter().map(|&v| fmt_val(v)).collect();
    out.push_str(&b_line.join(" "));
    out.push('\n');
    let mut emit = |k: usize, mat: &SparseSym| {
        for &(i, j, v) in mat.triplets() {
            out.push_str(&format!("{k} 1 {} {} {}\n", i + 1, j + 1, fmt_val(v)));
        }
    };
    emit(0, p.cost());
    for (idx, a) in p.constraints().iter().enumerate() {
        emit(idx + 1, a);
    }
    out
}
