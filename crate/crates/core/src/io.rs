//! Plain-text serialization of states and small CSV helpers.
//!
//! A state file is a CSV with a two-line comment header
//!
//! ```text
//! # critsys state
//! # N=5 R=1 M=2000 d=2
//! r,u_1,u_2
//! ```
//!
//! followed by one row per node `r_0 … r_M` (the Dirichlet row is zero). Numbers are
//! written in shortest round-trip form, so reading a file back reproduces the state
//! bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use crate::energy::State;
use crate::error::{Error, Result};
use crate::grid::RadialGrid;

const MAGIC: &str = "# critsys state";

/// Shortest round-trip representation of `x`.
pub fn num(x: f64) -> String {
    format!("{x:e}")
}

pub fn parse_num(s: &str, line: usize) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|e| Error::Parse {
        line,
        msg: format!("`{s}`: {e}"),
    })
}

pub fn state_to_string(u: &State) -> String {
    let grid = u.grid();
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC}");
    let _ = writeln!(
        out,
        "# N={} R={} M={} d={}",
        grid.dim(),
        num(grid.radius()),
        grid.cells(),
        u.d()
    );
    out.push('r');
    for i in 0..u.d() {
        let _ = write!(out, ",u_{}", i + 1);
    }
    out.push('\n');
    for (k, r) in grid.nodes().iter().enumerate() {
        out.push_str(&num(*r));
        for c in u.components() {
            out.push(',');
            out.push_str(&num(c.values().get(k).copied().unwrap_or(0.0)));
        }
        out.push('\n');
    }
    out
}

fn header_value<'a>(fields: &'a [&'a str], key: &str, line: usize) -> Result<&'a str> {
    fields
        .iter()
        .find_map(|f| f.strip_prefix(key).and_then(|v| v.strip_prefix('=')))
        .ok_or_else(|| Error::Parse {
            line,
            msg: format!("missing `{key}=` in header"),
        })
}

/// Parses a state file; the grid is rebuilt from the header.
pub fn state_from_str(text: &str) -> Result<State> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l.trim() == MAGIC => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                msg: "not a state file".into(),
            })
        }
    }
    let (_, header) = lines.next().ok_or(Error::Parse {
        line: 2,
        msg: "missing grid header".into(),
    })?;
    let fields: Vec<&str> = header.trim_start_matches('#').split_whitespace().collect();
    let parse_usize = |key: &str| -> Result<usize> {
        header_value(&fields, key, 2)?
            .parse()
            .map_err(|e| Error::Parse {
                line: 2,
                msg: format!("{key}: {e}"),
            })
    };
    let dim = parse_usize("N")?;
    let cells = parse_usize("M")?;
    let d = parse_usize("d")?;
    let radius = parse_num(header_value(&fields, "R", 2)?, 2)?;
    let grid = RadialGrid::shared(dim, radius, cells)?;
    lines.next();
    let mut values = vec![Vec::with_capacity(cells); d];
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != d + 1 {
            return Err(Error::Parse {
                line: idx + 1,
                msg: format!("expected {} columns, found {}", d + 1, cols.len()),
            });
        }
        if values[0].len() == cells {
            // the Dirichlet row
            continue;
        }
        for (i, c) in cols[1..].iter().enumerate() {
            values[i].push(parse_num(c, idx + 1)?);
        }
    }
    if values.iter().any(|v| v.len() != cells) {
        return Err(Error::Parse {
            line: 0,
            msg: format!("expected {cells} interior rows"),
        });
    }
    State::from_values(&grid, values)
}

/// Attaches the path to an I/O error.
pub fn io_context(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    }
}

pub fn write_state(path: &Path, u: &State) -> Result<()> {
    fs::write(path, state_to_string(u)).map_err(io_context(path))
}

pub fn read_state(path: &Path) -> Result<State> {
    let text = fs::read_to_string(path).map_err(io_context(path))?;
    state_from_str(&text)
}

/// Checks that `u` lives on a grid with the given parameters.
pub fn check_grid(u: &State, grid: &Arc<RadialGrid>) -> Result<()> {
    let g = u.grid();
    if g.dim() != grid.dim() || g.cells() != grid.cells() || g.radius() != grid.radius() {
        return Err(Error::Mismatch(format!(
            "state grid (N={}, R={}, M={}) differs from configured grid (N={}, R={}, M={})",
            g.dim(),
            g.radius(),
            g.cells(),
            grid.dim(),
            grid.radius(),
            grid.cells()
        )));
    }
    Ok(())
}
