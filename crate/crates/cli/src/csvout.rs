//! CSV assembly with a `#`-prefixed header block recording the tool
//! version, every parameter, and the seed, so an output file alone is
//! enough to rerun the command that produced it.

use std::fmt::Display;
use std::io::Write;

pub struct CsvDoc {
    buf: String,
}

impl CsvDoc {
    pub fn new(command: &str) -> Self {
        let mut doc = Self { buf: String::new() };
        doc.param("tool", format_args!("dfrelay {}", env!("CARGO_PKG_VERSION")));
        doc.param("command", command);
        doc
    }

    pub fn param(&mut self, key: &str, value: impl Display) {
        self.buf.push_str(&format!("# {key} = {value}\n"));
    }

    pub fn columns(&mut self, names: &[&str]) {
        self.buf.push_str(&names.join(","));
        self.buf.push('\n');
    }

    pub fn row<I>(&mut self, cells: I)
    where
        I: IntoIterator,
        I::Item: Display,
    {
        let mut first = true;
        for cell in cells {
            if !first {
                self.buf.push(',');
            }
            first = false;
            self.buf.push_str(&cell.to_string());
        }
        self.buf.push('\n');
    }

    /// Write to a file, or to standard output when `out` is `-`.
    pub fn write_to(&self, out: &str) -> Result<(), String> {
        if out == "-" {
            std::io::stdout()
                .write_all(self.buf.as_bytes())
                .map_err(|e| format!("writing to standard output: {e}"))
        } else {
            std::fs::write(out, self.buf.as_bytes())
                .map_err(|e| format!("writing {out}: {e}"))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_then_columns_then_rows() {
        let mut doc = CsvDoc::new("demo");
        doc.param("seed", 7);
        doc.columns(&["x", "y"]);
        doc.row([1.5, 2.0]);
        let text = doc.buf;
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with("# tool = dfrelay "));
        assert_eq!(lines[1], "# command = demo");
        assert_eq!(lines[2], "# seed = 7");
        assert_eq!(lines[3], "x,y");
        assert_eq!(lines[4], "1.5,2");
    }
}
