//! Field snapshot files.
//!
//! ```text
//! # dim,extent,cells
//! # 2,1.0000000000000000e0;1.0000000000000000e0,64;64
//! 0,7.8125000000000000e-3,7.8125000000000000e-3,1.4999...e0
//! ...
//! ```
//!
//! The second comment line carries the grid; multi-axis entries are joined
//! with `;`. Each data row is `index,x[,y],value` with 17 significant digits.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};

pub const SNAPSHOT_HEADER: &str = "# dim,extent,cells";

/// Formats a double with 17 significant digits.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_snapshot(path: &Path, field: &Field) -> Result<()> {
    let text = snapshot_to_string(field);
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(text.as_bytes())
        .map_err(|e| Error::io(path, e))
}

pub fn snapshot_to_string(field: &Field) -> String {
    let g = field.grid();
    let join_f = |xs: &[f64]| xs.iter().map(|&x| fmt17(x)).collect::<Vec<_>>().join(";");
    let join_n = |xs: &[usize]| xs.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(";");
    let mut s = String::with_capacity(64 * field.len() + 64);
    s.push_str(SNAPSHOT_HEADER);
    s.push('\n');
    s.push_str(&format!(
        "# {},{},{}\n",
        g.dim(),
        join_f(g.extent()),
        join_n(g.cells())
    ));
    for (i, &v) in field.values().iter().enumerate() {
        let c = g.center(i);
        if g.dim() == 1 {
            s.push_str(&format!("{i},{},{}\n", fmt17(c[0]), fmt17(v)));
        } else {
            s.push_str(&format!("{i},{},{},{}\n", fmt17(c[0]), fmt17(c[1]), fmt17(v)));
        }
    }
    s
}

pub fn read_snapshot(path: &Path) -> Result<Field> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_snapshot(&text).map_err(|message| Error::Format {
        path: path.to_path_buf(),
        message,
    })
}

pub fn parse_snapshot(text: &str) -> std::result::Result<Field, String> {
    let mut lines = text.lines();
    let first = lines.next().ok_or("empty snapshot")?;
    if first.trim() != SNAPSHOT_HEADER {
        return Err(format!("line 1: expected `{SNAPSHOT_HEADER}`, found `{first}`"));
    }
    let meta = lines
        .next()
        .and_then(|l| l.strip_prefix('#'))
        .ok_or("line 2: missing grid description")?;
    let parts: Vec<&str> = meta.trim().split(',').collect();
    if parts.len() != 3 {
        return Err(format!("line 2: expected `dim,extent,cells`, found `{meta}`"));
    }
    let dim: usize = parts[0]
        .trim()
        .parse()
        .map_err(|e| format!("line 2: bad dim: {e}"))?;
    let extent = parts[1]
        .split(';')
        .map(|s| s.trim().parse::<f64>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| format!("line 2: bad extent: {e}"))?;
    let cells = parts[2]
        .split(';')
        .map(|s| s.trim().parse::<usize>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| format!("line 2: bad cells: {e}"))?;
    let grid = Grid::new(dim, &extent, &cells).map_err(|e| format!("line 2: {e}"))?;

    let body: String = lines.collect::<Vec<_>>().join("\n");
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(body.as_bytes());
    let mut values = vec![f64::NAN; grid.len()];
    let mut seen = vec![false; grid.len()];
    for (row, record) in reader.records().enumerate() {
        let line = row + 3;
        let record = record.map_err(|e| format!("line {line}: {e}"))?;
        if record.len() != dim + 2 {
            return Err(format!(
                "line {line}: expected {} columns, found {}",
                dim + 2,
                record.len()
            ));
        }
        let index: usize = record[0]
            .parse()
            .map_err(|e| format!("line {line}: bad index: {e}"))?;
        if index >= grid.len() {
            return Err(format!("line {line}: index {index} out of range"));
        }
        let value: f64 = record[dim + 1]
            .parse()
            .map_err(|e| format!("line {line}: bad value: {e}"))?;
        values[index] = value;
        seen[index] = true;
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(format!("cell {missing} has no value"));
    }
    Field::from_values(grid, values).map_err(|e| e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_and_rows() {
        let g = Grid::interval(1.0, 2).unwrap();
        let f = Field::from_values(g, vec![0.1, 2.0]).unwrap();
        let s = snapshot_to_string(&f);
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "# dim,extent,cells");
        assert_eq!(lines[1], "# 1,1.0000000000000000e0,2");
        assert_eq!(lines[2], "0,2.5000000000000000e-1,1.0000000000000001e-1");
        assert_eq!(lines.len(), 4);
    }

    #[test]
    fn rejects_truncated_files() {
        let g = Grid::interval(1.0, 3).unwrap();
        let s = snapshot_to_string(&Field::constant(g, 1.0));
        let cut: String = s.lines().take(4).collect::<Vec<_>>().join("\n");
        assert!(parse_snapshot(&cut).is_err());
        assert!(parse_snapshot("").is_err());
        assert!(parse_snapshot("index,x,value\n").is_err());
    }

    proptest! {
        #[test]
        fn round_trip_is_exact(
            values in proptest::collection::vec(-1e6f64..1e6, 12),
            two_d in any::<bool>(),
        ) {
            let g = if two_d {
                Grid::rectangle([1.5, 0.25], [4, 3]).unwrap()
            } else {
                Grid::interval(3.0, 12).unwrap()
            };
            let f = Field::from_values(g, values).unwrap();
            let back = parse_snapshot(&snapshot_to_string(&f)).unwrap();
            prop_assert_eq!(back, f);
        }
    }
}
