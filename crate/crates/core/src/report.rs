//! Per-line ingest diagnostics shared by the three loaders.

use std::fmt;

/// One rejected input line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineError {
    /// 1-based line number (the header counts as line 1 for CSV inputs).
    pub line: usize,
    pub message: String,
}

impl fmt::Display for LineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

/// Summary of one ingest pass. Malformed lines are collected here rather
/// than aborting the load; callers decide whether a nonzero error count is
/// fatal.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParseReport {
    /// Total input lines inspected (excluding blank lines).
    pub lines: usize,
    /// Records accepted.
    pub accepted: usize,
    pub errors: Vec<LineError>,
}

impl ParseReport {
    pub fn reject(&mut self, line: usize, message: impl Into<String>) {
        self.errors.push(LineError {
            line,
            message: message.into(),
        });
    }

    pub fn is_clean(&self) -> bool {
        self.errors.is_empty()
    }

    /// Plain-text summary, one error per line.
    pub fn render(&self, source: &str) -> String {
        let mut out = format!(
            "{}: {} lines, {} accepted, {} errors\n",
            source,
            self.lines,
            self.accepted,
            self.errors.len()
        );
        for e in &self.errors {
            out.push_str(&format!("  {e}\n"));
        }
        out
    }
}
