use std::io::BufRead;

use crate::error::{Error, Result};

/// One parsed line: `(head, relation, tail, timestamp)` labels.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RawQuad {
    pub head: String,
    pub relation: String,
    pub tail: String,
    pub time: String,
}

impl RawQuad {
    pub fn new(
        head: impl Into<String>,
        relation: impl Into<String>,
        tail: impl Into<String>,
        time: impl Into<String>,
    ) -> Self {
        Self {
            head: head.into(),
            relation: relation.into(),
            tail: tail.into(),
            time: time.into(),
        }
    }
}

/// Read separator-delimited quadruple lines. Blank lines are skipped and
/// fields past the fourth are ignored.
pub fn parse_quadruples<R: BufRead>(mut reader: R, separator: char) -> Result<Vec<RawQuad>> {
    let mut out = Vec::new();
    let mut buf = Vec::new();
    let mut line_no = 0;
    loop {
        buf.clear();
        let n = reader
            .read_until(b'\n', &mut buf)
            .map_err(|e| Error::io("<stream>", e))?;
        if n == 0 {
            break;
        }
        line_no += 1;
        let line = std::str::from_utf8(&buf).map_err(|_| Error::Encoding { line: line_no })?;
        let line = line.trim_end_matches(['\n', '\r']);
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(separator);
        match (fields.next(), fields.next(), fields.next(), fields.next()) {
            (Some(h), Some(r), Some(t), Some(ts)) => out.push(RawQuad::new(h, r, t, ts)),
            _ => return Err(Error::MalformedLine { line: line_no }),
        }
    }
    Ok(out)
}
