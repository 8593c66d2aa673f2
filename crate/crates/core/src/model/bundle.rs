//! Line-oriented text format for problem bundles.
//!
//! ```text
//! BSEBUNDLE 1
//! nb <N_b> nocc <N_orb> tei <dense|cholesky>
//! ENERGIES
//! <N_b values>
//! END
//! COEFFS
//! <N_b rows of N_b values>
//! END
//! TEI DENSE                 | TEI CHOLESKY <rank>
//! <N_b² rows, upper part>   | <N_b² rows of rank values>
//! END
//! ```
//!
//! Values are written with 17 significant digits, which round-trips `f64`
//! exactly. A dense TEI row `i` holds either the `N_b² − i` entries with
//! column `≥ i` (canonical) or all `N_b²` entries, in which case the lower
//! part is ignored.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;

use super::{pair_index, validate, BseInput, Tei, TEI_SYMMETRY_TOL};
use crate::error::{Error, Result};
use crate::linalg::SymMatrix;
use crate::tei::CholTei;

const MAGIC: &str = "BSEBUNDLE";
const VERSION: &str = "1";

/// What loading changed on the way in.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LoadReport {
    /// Largest absolute change made by symmetrizing TEI slices.
    pub max_symmetry_correction: f64,
}

fn fmt_value(out: &mut String, v: f64) {
    write!(out, "{v:.16e}").expect("write to String");
}

fn push_row<I: IntoIterator<Item = f64>>(out: &mut String, values: I) {
    let mut first = true;
    for v in values {
        if !first {
            out.push(' ');
        }
        first = false;
        fmt_value(out, v);
    }
    out.push('\n');
}

/// Canonical text form of a bundle.
pub fn write_bundle_string(input: &BseInput) -> String {
    let nb = input.n_basis;
    let mut out = String::new();
    writeln!(out, "{MAGIC} {VERSION}").unwrap();
    writeln!(out, "nb {nb} nocc {} tei {}", input.n_occ, input.tei.kind()).unwrap();
    out.push_str("ENERGIES\n");
    push_row(&mut out, input.energies.iter().copied());
    out.push_str("END\nCOEFFS\n");
    for r in 0..nb {
        push_row(&mut out, input.coeffs.row(r).iter().copied());
    }
    out.push_str("END\n");
    match &input.tei {
        Tei::Dense(b) => {
            out.push_str("TEI DENSE\n");
            let m = b.as_matrix();
            for r in 0..m.nrows() {
                push_row(&mut out, (r..m.ncols()).map(|c| m[(r, c)]));
            }
        }
        Tei::Cholesky(c) => {
            writeln!(out, "TEI CHOLESKY {}", c.rank()).unwrap();
            let l = c.columns();
            for r in 0..l.nrows() {
                push_row(&mut out, l.row(r).iter().copied());
            }
        }
    }
    out.push_str("END\n");
    out
}

pub fn write_bundle(input: &BseInput, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, write_bundle_string(input)).map_err(|e| Error::io(path, e))
}

pub fn read_bundle(path: impl AsRef<Path>) -> Result<(BseInput, LoadReport)> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_bundle(&text)
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self, field: &str) -> Result<&'a str> {
        match self.inner.next() {
            Some((i, l)) => {
                self.last = i + 1;
                Ok(l.trim_end_matches('\r'))
            }
            None => Err(perr(self.last + 1, field, "unexpected end of file")),
        }
    }

    fn expect(&mut self, field: &str, want: &str) -> Result<()> {
        let l = self.next(field)?;
        if l.trim() != want {
            return Err(perr(self.last, field, format!("expected `{want}`, found `{}`", l.trim())));
        }
        Ok(())
    }

    fn values(&mut self, field: &str, allowed: &[usize]) -> Result<Vec<f64>> {
        let l = self.next(field)?;
        let line = self.last;
        let vals = l
            .split_whitespace()
            .enumerate()
            .map(|(k, tok)| {
                tok.parse::<f64>()
                    .map_err(|_| perr(line, field, format!("value {}: cannot parse `{tok}`", k + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        if !allowed.contains(&vals.len()) {
            let want: Vec<String> = allowed.iter().map(|n| n.to_string()).collect();
            return Err(perr(line, field, format!("expected {} values, found {}", want.join(" or "), vals.len())));
        }
        Ok(vals)
    }
}

fn perr(line: usize, field: &str, message: impl Into<String>) -> Error {
    Error::Parse { line, field: field.to_string(), message: message.into() }
}

fn header_value(tokens: &[&str], key: &str, line: usize) -> Result<String> {
    tokens
        .windows(2)
        .find(|w| w[0] == key)
        .map(|w| w[1].to_string())
        .ok_or_else(|| perr(line, key, "missing"))
}

fn header_count(tokens: &[&str], key: &str, line: usize) -> Result<usize> {
    let s = header_value(tokens, key, line)?;
    s.parse().map_err(|_| perr(line, key, format!("not a count: `{s}`")))
}

/// Parses and validates a bundle, symmetrizing TEI slices under `μ ↔ ν`.
pub fn parse_bundle(text: &str) -> Result<(BseInput, LoadReport)> {
    let mut lines = Lines { inner: text.lines().enumerate(), last: 0 };

    let magic = lines.next("magic")?;
    let mut tok = magic.split_whitespace();
    if tok.next() != Some(MAGIC) {
        return Err(perr(1, "magic", format!("expected `{MAGIC}`")));
    }
    if tok.next() != Some(VERSION) {
        return Err(perr(1, "version", format!("unsupported version, expected {VERSION}")));
    }

    let header = lines.next("header")?;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    let nb = header_count(&tokens, "nb", 2)?;
    let nocc = header_count(&tokens, "nocc", 2)?;
    let kind = header_value(&tokens, "tei", 2)?;
    if nb == 0 {
        return Err(perr(2, "nb", "must be positive"));
    }

    lines.expect("ENERGIES", "ENERGIES")?;
    let energies = lines.values("ENERGIES", &[nb])?;
    lines.expect("ENERGIES", "END")?;

    lines.expect("COEFFS", "COEFFS")?;
    let mut coeffs = DMatrix::zeros(nb, nb);
    for r in 0..nb {
        let row = lines.values("COEFFS", &[nb])?;
        coeffs.row_mut(r).iter_mut().zip(row).for_each(|(d, v)| *d = v);
    }
    lines.expect("COEFFS", "END")?;

    let n2 = nb * nb;
    let section = lines.next("TEI")?;
    let sec: Vec<&str> = section.split_whitespace().collect();
    let sec_line = lines.last;
    let mut report = LoadReport::default();
    let tei = match (kind.as_str(), sec.as_slice()) {
        ("dense", ["TEI", "DENSE"]) => {
            let mut m = DMatrix::zeros(n2, n2);
            for r in 0..n2 {
                let row = lines.values("TEI DENSE", &[n2 - r, n2])?;
                let offset = n2 - row.len();
                for (k, v) in row.into_iter().enumerate() {
                    let c = offset + k;
                    if c >= r {
                        m[(r, c)] = v;
                    }
                }
            }
            lines.expect("TEI DENSE", "END")?;
            let raw = SymMatrix::from_upper(m);
            let asym = super::dense_tei_asymmetry(&raw, nb);
            if asym > TEI_SYMMETRY_TOL {
                return Err(Error::Validation { field: "tei asymmetry".into(), message: format!("relative asymmetry {asym:e}") });
            }
            let (sym, corr) = symmetrize_pairs(raw, nb);
            report.max_symmetry_correction = corr;
            Tei::Dense(sym)
        }
        ("cholesky", ["TEI", "CHOLESKY", rank]) => {
            let rank: usize = rank.parse().map_err(|_| perr(sec_line, "TEI CHOLESKY", format!("bad rank `{rank}`")))?;
            let mut l = DMatrix::zeros(n2, rank);
            for r in 0..n2 {
                let row = lines.values("TEI CHOLESKY", &[rank])?;
                l.row_mut(r).iter_mut().zip(row).for_each(|(d, v)| *d = v);
            }
            lines.expect("TEI CHOLESKY", "END")?;
            let (chol, corr) = CholTei::from_columns(nb, l, None)?;
            report.max_symmetry_correction = corr;
            Tei::Cholesky(chol)
        }
        _ => {
            return Err(perr(sec_line, "TEI", format!("section `{}` does not match header tei `{kind}`", section.trim())));
        }
    };

    for (i, l) in lines.inner.by_ref() {
        if !l.trim().is_empty() {
            return Err(perr(i + 1, "trailing", "unexpected content after final END"));
        }
    }

    let input = BseInput { n_basis: nb, n_occ: nocc, energies, coeffs, tei };
    if let Some(v) = validate(&input).into_iter().next() {
        return Err(Error::Validation { field: v.field.to_string(), message: v.to_string() });
    }
    Ok((input, report))
}

/// Averages rows (and columns) `μν` and `νμ`. Exact when the input already
/// has the symmetry.
fn symmetrize_pairs(b: SymMatrix, nb: usize) -> (SymMatrix, f64) {
    let mut m = b.into_inner();
    let n2 = nb * nb;
    let mut corr = 0.0_f64;
    for mu in 0..nb {
        for nu in (mu + 1)..nb {
            let (r1, r2) = (pair_index(nb, mu, nu), pair_index(nb, nu, mu));
            for c in 0..n2 {
                let avg = 0.5 * (m[(r1, c)] + m[(r2, c)]);
                corr = corr.max((m[(r1, c)] - avg).abs());
                m[(r1, c)] = avg;
                m[(r2, c)] = avg;
            }
            for r in 0..n2 {
                let avg = 0.5 * (m[(r, r1)] + m[(r, r2)]);
                corr = corr.max((m[(r, r1)] - avg).abs());
                m[(r, r1)] = avg;
                m[(r, r2)] = avg;
            }
        }
    }
    (SymMatrix::from_upper(m), corr)
}
