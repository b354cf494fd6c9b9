//! CSV emission helpers.
//!
//! Every file gets a header row; floats are serialized with 17 significant
//! digits so they round-trip exactly. Files are accumulated in memory and
//! written in one call, so a failed computation leaves no partial output.

use std::fmt::Write as _;
use std::path::Path;

/// One CSV file being assembled.
pub struct Csv {
    buf: String,
    columns: usize,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut buf = String::new();
        buf.push_str(&header.join(","));
        buf.push('\n');
        Self { buf, columns: header.len() }
    }

    /// Appends one row of already-formatted cells.
    pub fn row(&mut self, cells: &[String]) {
        assert_eq!(cells.len(), self.columns, "row width must match the header");
        self.buf.push_str(&cells.join(","));
        self.buf.push('\n');
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, &self.buf)
    }
}

/// 17-significant-digit float cell (round-trip exact for f64).
pub fn f(x: f64) -> String {
    let mut s = String::new();
    write!(s, "{x:.16e}").unwrap();
    s
}

/// Integer cell.
pub fn n(x: usize) -> String {
    x.to_string()
}

/// Boolean cell as 0/1.
pub fn b(x: bool) -> String {
    if x { "1".into() } else { "0".into() }
}
