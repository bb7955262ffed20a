//! CSV, plot data and the JSON summary.

use std::fmt::Write as _;
use std::path::Path;

use super::tasks::{Cell, Table};
use crate::error::Result;

fn float(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_cell(c: &Cell) -> String {
    match c {
        Cell::F(v) => float(*v),
        Cell::I(v) => v.to_string(),
        Cell::B(b) => b.to_string(),
        Cell::Empty => String::new(),
    }
}

fn dat_cell(c: &Cell) -> String {
    match c {
        Cell::F(v) => float(*v),
        Cell::I(v) => v.to_string(),
        Cell::B(b) => u8::from(*b).to_string(),
        Cell::Empty => "nan".into(),
    }
}

/// Comma-separated values with a header row; floats carry 17 significant digits.
pub fn render_csv(table: &Table) -> String {
    let mut s = table.columns.join(",");
    s.push('\n');
    for row in &table.rows {
        let cells: Vec<String> = row.iter().map(csv_cell).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

/// Whitespace-separated columns with `#` header comments.
pub fn render_dat(title: &str, table: &Table) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# leakyguide {title}");
    let _ = writeln!(s, "# {}", table.columns.join(" "));
    for row in &table.rows {
        let cells: Vec<String> = row.iter().map(dat_cell).collect();
        s.push_str(&cells.join(" "));
        s.push('\n');
    }
    s
}

pub fn write(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> Table {
        Table {
            columns: vec!["x".into(), "n".into(), "ok".into(), "y".into()],
            rows: vec![vec![Cell::F(0.1), Cell::I(3), Cell::B(true), Cell::Empty]],
        }
    }

    #[test]
    fn csv_has_full_precision() {
        let s = render_csv(&table());
        assert_eq!(s, "x,n,ok,y\n1.0000000000000001e-1,3,true,\n");
        let back: f64 = s
            .lines()
            .nth(1)
            .unwrap()
            .split(',')
            .next()
            .unwrap()
            .parse()
            .unwrap();
        assert_eq!(back, 0.1);
    }

    #[test]
    fn dat_is_numeric_with_comment_header() {
        let s = render_dat("demo", &table());
        let mut lines = s.lines();
        assert!(lines.next().unwrap().starts_with('#'));
        assert_eq!(lines.next().unwrap(), "# x n ok y");
        assert_eq!(lines.next().unwrap(), "1.0000000000000001e-1 3 1 nan");
    }
}
