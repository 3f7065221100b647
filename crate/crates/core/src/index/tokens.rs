//! Text rendering of codes for external full-text engines.

use std::io::Write;

use crate::embedding::SparseCode;
use crate::{Error, Result};

/// `"t000003 t000017"` for support `{3, 17}`; empty support gives `""`.
pub fn token_string(code: &SparseCode) -> String {
    let mut out = String::with_capacity(code.k() * 8);
    for (n, i) in code.support().iter().enumerate() {
        if n > 0 {
            out.push(' ');
        }
        out.push_str(&format!("t{i:06}"));
    }
    out
}

/// Inverse of [`token_string`].
pub fn parse_tokens(text: &str, m: usize) -> Result<SparseCode> {
    let support = text
        .split_whitespace()
        .map(|tok| {
            tok.strip_prefix('t')
                .filter(|digits| digits.len() >= 6 && digits.bytes().all(|b| b.is_ascii_digit()))
                .and_then(|digits| digits.parse::<u32>().ok())
                .ok_or_else(|| Error::InvalidCode(format!("bad token {tok:?}")))
        })
        .collect::<Result<Vec<_>>>()?;
    SparseCode::new(m, support)
}

/// `(doc_id, token string)` pairs in input order.
pub fn export_tokens(codes: &[(String, SparseCode)]) -> Vec<(String, String)> {
    codes
        .iter()
        .map(|(id, code)| (id.clone(), token_string(code)))
        .collect()
}

/// One `doc_id<TAB>tokens` line per document.
pub fn write_token_lines<W: Write>(codes: &[(String, SparseCode)], mut out: W) -> Result<()> {
    for (id, tokens) in export_tokens(codes) {
        writeln!(out, "{id}\t{tokens}")?;
    }
    Ok(())
}

/// Parse one `doc_id<TAB>tokens` line.
pub fn parse_token_line(line: &str, m: usize) -> Result<(String, SparseCode)> {
    let line = line.strip_suffix('\n').unwrap_or(line);
    let line = line.strip_suffix('\r').unwrap_or(line);
    let (id, tokens) = line
        .split_once('\t')
        .ok_or_else(|| Error::InvalidCode(format!("missing tab in {line:?}")))?;
    Ok((id.to_string(), parse_tokens(tokens, m)?))
}
