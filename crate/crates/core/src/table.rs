//! Plain numeric tables with deterministic CSV output: 17 significant
//! digits, '.' decimal point, '\n' line endings.

use std::fmt::Write as _;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

/// Formats with 17 significant digits in scientific notation.
pub fn format_f64(x: f64) -> String {
    if x == 0.0 {
        // Normalize −0.
        return "0.0000000000000000e0".to_string();
    }
    format!("{x:.16e}")
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self { header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            for (i, x) in row.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{}", format_f64(*x));
            }
            out.push('\n');
        }
        out
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_through_text() {
        for x in [0.1, -1.0 / 3.0, 1e-300, 6.02214076e23, std::f64::consts::PI] {
            assert_eq!(format_f64(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(format_f64(-0.0), format_f64(0.0));
    }

    #[test]
    fn csv_layout() {
        let mut t = Table::new(["t", "x"]);
        t.push(vec![0.0, 1.5]);
        assert_eq!(t.to_csv(), "t,x\n0.0000000000000000e0,1.5000000000000000e0\n");
        assert_eq!(t.column("x").unwrap(), vec![1.5]);
    }
}
