//! Field escaping shared by the line-oriented artifact formats.
//!
//! Every text field written into a tab-separated line goes through
//! [`escape`], which replaces backslash, tab, newline and carriage return
//! with two-character escapes. [`unescape`] is its exact inverse.

use sha2::{Digest, Sha256};

pub fn escape(field: &str) -> String {
    let mut out = String::with_capacity(field.len());
    for c in field.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

/// [`escape`], plus spaces as `\\s`, for fields inside space-separated lists.
pub fn escape_token(field: &str) -> String {
    escape(field).replace(' ', "\\s")
}

/// Inverse of both [`escape`] and [`escape_token`]. Returns `None` on a
/// dangling or unknown escape.
pub fn unescape(field: &str) -> Option<String> {
    let mut out = String::with_capacity(field.len());
    let mut chars = field.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next()? {
            '\\' => out.push('\\'),
            't' => out.push('\t'),
            'n' => out.push('\n'),
            'r' => out.push('\r'),
            's' => out.push(' '),
            _ => return None,
        }
    }
    Some(out)
}

/// Picks tab when the header line contains one, comma otherwise.
pub fn sniff_delimiter(header: &str) -> u8 {
    if header.contains('\t') {
        b'\t'
    } else {
        b','
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
