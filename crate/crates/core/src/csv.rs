//! Minimal CSV emission: dot decimal, shortest round-trip float text, `\n` line ends.

use std::fmt::Write as _;

/// Shortest text that parses back to exactly `x`.
pub fn fmt_f64(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-4..1e15).contains(&a) || !x.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// Builds CSV text row by row.
#[derive(Debug, Default)]
pub struct CsvWriter {
    buf: String,
    cols: usize,
}

impl CsvWriter {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        let mut w = CsvWriter { buf: String::new(), cols: header.len() };
        let line: Vec<&str> = header.iter().map(AsRef::as_ref).collect();
        w.buf.push_str(&line.join(","));
        w.buf.push('\n');
        w
    }

    pub fn row_f64(&mut self, values: &[f64]) {
        debug_assert_eq!(values.len(), self.cols);
        for (i, v) in values.iter().enumerate() {
            if i > 0 {
                self.buf.push(',');
            }
            self.buf.push_str(&fmt_f64(*v));
        }
        self.buf.push('\n');
    }

    /// Row of numeric fields followed by one trailing text field.
    pub fn row_with_status(&mut self, values: &[f64], status: &str) {
        debug_assert_eq!(values.len() + 1, self.cols);
        for v in values {
            let _ = write!(self.buf, "{},", fmt_f64(*v));
        }
        self.buf.push_str(status);
        self.buf.push('\n');
    }

    pub fn finish(self) -> String {
        self.buf
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_text_round_trips() {
        for x in [0.0, 1.0, -2.5, 1e-7, std::f64::consts::TAU, 1e300, -3.3e-12, 0.1 + 0.2] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_f64(0.25), "0.25");
        assert_eq!(fmt_f64(1e-7), "1e-7");
    }

    #[test]
    fn writer_layout() {
        let mut w = CsvWriter::new(&["a", "b", "status"]);
        w.row_with_status(&[1.0, 0.5], "ok");
        assert_eq!(w.finish(), "a,b,status\n1,0.5,ok\n");
    }
}
