//! Plain-text problem files and atomic file writing.
//!
//! Format: a first line `m n`, then the `m*n` matrix entries row-major (one
//! row per line), then the `m` entries of `b` on one line, then an optional
//! line `xbar` followed by its `n` entries, then an optional line `z`
//! followed by its `m` entries. All floats are written in shortest
//! round-trip decimal form, so write/read is bit-faithful.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::problem::{DenseMatrix, ProblemInstance};

/// Shortest round-trip decimal form of `x` (the `Display` form of `f64`).
pub fn format_f64(x: f64) -> String {
    format!("{x}")
}

fn push_floats(out: &mut String, values: &[f64]) {
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        let _ = write!(out, "{v}");
    }
    out.push('\n');
}

/// Renders a problem instance in the text format above.
pub fn write_problem(problem: &ProblemInstance) -> String {
    let a = problem.op.matrix();
    let (m, n) = (a.nrows(), a.ncols());
    let mut out = String::new();
    let _ = writeln!(out, "{m} {n}");
    for i in 0..m {
        push_floats(&mut out, a.row(i));
    }
    push_floats(&mut out, &problem.b);
    if let Some(xbar) = &problem.xbar {
        out.push_str("xbar\n");
        push_floats(&mut out, xbar);
    }
    if let Some(z) = &problem.z {
        out.push_str("z\n");
        push_floats(&mut out, z);
    }
    out
}

struct Tokens<'a> {
    iter: std::str::SplitWhitespace<'a>,
    consumed: usize,
}

impl<'a> Tokens<'a> {
    fn new(text: &'a str) -> Self {
        Tokens {
            iter: text.split_whitespace(),
            consumed: 0,
        }
    }

    fn next(&mut self) -> Option<&'a str> {
        let t = self.iter.next();
        if t.is_some() {
            self.consumed += 1;
        }
        t
    }

    fn expect(&mut self, what: &str) -> Result<&'a str> {
        let pos = self.consumed;
        self.next().ok_or_else(|| {
            Error::Parse(format!(
                "unexpected end of input, expected {what} (token {pos})"
            ))
        })
    }

    fn usize(&mut self, what: &str) -> Result<usize> {
        let tok = self.expect(what)?;
        tok.parse()
            .map_err(|_| Error::Parse(format!("invalid {what} '{tok}'")))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        let tok = self.expect(what)?;
        let v: f64 = tok
            .parse()
            .map_err(|_| Error::Parse(format!("invalid {what} '{tok}'")))?;
        if !v.is_finite() {
            return Err(Error::Parse(format!("non-finite {what} '{tok}'")));
        }
        Ok(v)
    }

    fn f64_block(&mut self, count: usize, what: &str) -> Result<Vec<f64>> {
        (0..count).map(|_| self.f64(what)).collect()
    }
}

/// Parses the text format above.
pub fn read_problem(text: &str) -> Result<ProblemInstance> {
    let mut toks = Tokens::new(text);
    let m = toks.usize("row count")?;
    let n = toks.usize("column count")?;
    let entries = toks.f64_block(
        m.checked_mul(n)
            .ok_or_else(|| Error::Parse(format!("matrix size {m}x{n} overflows")))?,
        "matrix entry",
    )?;
    let matrix = DenseMatrix::new(m, n, entries)?;
    let b = toks.f64_block(m, "b entry")?;

    let mut xbar = None;
    let mut z = None;
    match toks.next() {
        None => {}
        Some("xbar") => {
            xbar = Some(toks.f64_block(n, "xbar entry")?);
            match toks.next() {
                None => {}
                Some("z") => z = Some(toks.f64_block(m, "z entry")?),
                Some(other) => {
                    return Err(Error::Parse(format!(
                        "unexpected token '{other}' after xbar"
                    )))
                }
            }
        }
        Some("z") => z = Some(toks.f64_block(m, "z entry")?),
        Some(other) => return Err(Error::Parse(format!("unexpected token '{other}' after b"))),
    }
    if let Some(extra) = toks.next() {
        return Err(Error::Parse(format!("unexpected trailing token '{extra}'")));
    }
    ProblemInstance::new(matrix, b, xbar, z, None)
}

/// Writes `contents` to `path` via a sibling temp file and a rename, so the
/// destination is never left partially written.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::invalid(format!("not a writable path: {}", path.display())))?;
    let mut tmp_name = file_name.to_os_string();
    tmp_name.push(format!(".tmp.{}", std::process::id()));
    let tmp_path = match dir {
        Some(d) => d.join(&tmp_name),
        None => tmp_name.into(),
    };
    let write_and_rename = (|| {
        fs::write(&tmp_path, contents)?;
        fs::rename(&tmp_path, path)
    })();
    if write_and_rename.is_err() {
        let _ = fs::remove_file(&tmp_path);
    }
    write_and_rename.map_err(Error::Io)
}

pub fn save_problem(problem: &ProblemInstance, path: &Path) -> Result<()> {
    write_atomic(path, write_problem(problem).as_bytes())
}

pub fn load_problem(path: &Path) -> Result<ProblemInstance> {
    let text = fs::read_to_string(path)?;
    read_problem(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ProblemInstance {
        let a =
            DenseMatrix::new(2, 3, vec![0.1, -0.2, 1e-300, 2.5, 0.3333333333333333, -4.0]).unwrap();
        ProblemInstance::new(
            a,
            vec![1.5, -0.25],
            Some(vec![0.0, 0.1 + 0.2, -1.0]),
            Some(vec![0.001, -0.002]),
            None,
        )
        .unwrap()
    }

    #[test]
    fn round_trip_is_bitwise() {
        let p = sample();
        let text = write_problem(&p);
        let q = read_problem(&text).unwrap();
        assert_eq!(q.op.matrix(), p.op.matrix());
        assert_eq!(q.b, p.b);
        assert_eq!(q.xbar, p.xbar);
        assert_eq!(q.z, p.z);
        assert_eq!(write_problem(&q), text);
    }

    #[test]
    fn optional_sections_can_be_absent() {
        let a = DenseMatrix::identity(2);
        let p = ProblemInstance::new(a, vec![1.0, 2.0], None, None, None).unwrap();
        let text = write_problem(&p);
        assert_eq!(text, "2 2\n1 0\n0 1\n1 2\n");
        let q = read_problem(&text).unwrap();
        assert!(q.xbar.is_none() && q.z.is_none());
    }

    #[test]
    fn parse_errors() {
        assert!(read_problem("").is_err());
        assert!(read_problem("2 2\n1 0\n0 1\n1").is_err());
        assert!(read_problem("1 1\nx\n1").is_err());
        assert!(read_problem("1 1\n1\n1\nbogus\n").is_err());
        assert!(read_problem("1 1\n1\n1\nxbar\n2\nextra").is_err());
        assert!(read_problem("1 1\ninf\n1").is_err());
    }

    #[test]
    fn atomic_write_creates_and_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.txt");
        write_atomic(&path, b"first").unwrap();
        assert_eq!(fs::read(&path).unwrap(), b"first");
        write_atomic(&path, b"second").unwrap();
        assert_eq!(fs::read(&path).unwrap(), b"second");
        let leftovers: Vec<_> = fs::read_dir(dir.path())
            .unwrap()
            .filter_map(|e| e.ok())
            .filter(|e| e.file_name() != "out.txt")
            .collect();
        assert!(
            leftovers.is_empty(),
            "temp files left behind: {leftovers:?}"
        );
    }

    #[test]
    fn shortest_round_trip_formatting() {
        for v in [0.1, 1.0 / 3.0, 1e-300, -2.5e17, 0.0, -7.125] {
            let s = format_f64(v);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
    }
}
