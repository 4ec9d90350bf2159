//! Decision map of the three-ellipse classifier over a sampling grid.

use std::fmt::Write as _;

use ftnn::network::conic::{boundary_grid, ConicClassifier, GridSpec};
use ftnn::{Error, Result};

use crate::config::Config;

pub const KEYS: &[&str] = &["x_min", "x_max", "y_min", "y_max", "steps", "x_steps", "y_steps"];

pub const CSV_HEADER: &str = "x1,x2,z";

/// Grid from config; `[0, 6]²` at 100 × 100 by default. `steps` sets both
/// axes, `x_steps`/`y_steps` override one.
pub fn grid_from_config(cfg: &Config) -> Result<GridSpec> {
    cfg.ensure_known(KEYS)?;
    let steps: usize = cfg.one("steps", 100)?;
    let grid = GridSpec {
        x_range: (cfg.one("x_min", 0.0)?, cfg.one("x_max", 6.0)?),
        y_range: (cfg.one("y_min", 0.0)?, cfg.one("y_max", 6.0)?),
        x_steps: cfg.one("x_steps", steps)?,
        y_steps: cfg.one("y_steps", steps)?,
    };
    let (a, b) = (grid.x_range, grid.y_range);
    if ![a.0, a.1, b.0, b.1].iter().all(|v| v.is_finite()) || a.0 > a.1 || b.0 > b.1 {
        return Err(Error::Config("grid ranges must be finite with min <= max".into()));
    }
    Ok(grid)
}

pub fn boundary_csv(grid: &GridSpec) -> Result<String> {
    let model = ConicClassifier::<f64>::ellipse_union();
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for (x1, x2, z) in boundary_grid(&model, grid)? {
        writeln!(out, "{x1},{x2},{z}").expect("writing to a String");
    }
    Ok(out)
}
