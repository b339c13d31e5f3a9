//! Plain-text exporters: field dumps, PGM mask images, CSV report rows.
//!
//! Field dump format: line 1 holds `nx ny x_min y_min x_max y_max`, followed
//! by the nx*ny node values in row-major order (j outer, i inner). Values are
//! written in shortest round-trip form with a decimal point and no locale
//! dependence, so dump -> load -> dump is byte-identical.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{Grid, GridSpec};
use crate::solver::{SolveReport, ValueField};

fn fmt_f64(x: f64) -> String {
    // {:?} keeps a decimal point on integral values and round-trips exactly
    format!("{x:?}")
}

pub fn field_to_string(spec: &GridSpec, field: &ValueField) -> Result<String> {
    if field.len() != spec.node_count() {
        return Err(Error::DimensionMismatch {
            expected: spec.node_count(),
            found: field.len(),
        });
    }
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{} {} {} {} {} {}",
        spec.nx,
        spec.ny,
        fmt_f64(spec.x_min),
        fmt_f64(spec.y_min),
        fmt_f64(spec.x_max),
        fmt_f64(spec.y_max)
    );
    for j in 0..spec.ny {
        let mut line = String::new();
        for i in 0..spec.nx {
            if i > 0 {
                line.push(' ');
            }
            line.push_str(&fmt_f64(field.values[j * spec.nx + i]));
        }
        out.push_str(&line);
        out.push('\n');
    }
    Ok(out)
}

pub fn write_field(path: &Path, spec: &GridSpec, field: &ValueField) -> Result<()> {
    fs::write(path, field_to_string(spec, field)?)?;
    Ok(())
}

pub fn parse_field(text: &str) -> Result<(GridSpec, ValueField)> {
    let mut tokens = text.split_whitespace();
    let mut next = |what: &str| -> Result<&str> {
        tokens
            .next()
            .ok_or_else(|| Error::ParseField(format!("missing {what}")))
    };
    let nx: usize = next("nx")?
        .parse()
        .map_err(|e| Error::ParseField(format!("nx: {e}")))?;
    let ny: usize = next("ny")?
        .parse()
        .map_err(|e| Error::ParseField(format!("ny: {e}")))?;
    let mut coords = [0.0f64; 4];
    for (k, name) in ["x_min", "y_min", "x_max", "y_max"].iter().enumerate() {
        coords[k] = next(name)?
            .parse()
            .map_err(|e| Error::ParseField(format!("{name}: {e}")))?;
    }
    let spec = GridSpec {
        x_min: coords[0],
        y_min: coords[1],
        x_max: coords[2],
        y_max: coords[3],
        nx,
        ny,
    };
    spec.validate()
        .map_err(|e| Error::ParseField(format!("bad header: {e}")))?;
    let mut values = Vec::with_capacity(nx * ny);
    for k in 0..nx * ny {
        let tok = tokens
            .next()
            .ok_or_else(|| Error::ParseField(format!("expected {} values, got {k}", nx * ny)))?;
        values.push(
            tok.parse::<f64>()
                .map_err(|e| Error::ParseField(format!("value {k}: {e}")))?,
        );
    }
    if tokens.next().is_some() {
        return Err(Error::ParseField("trailing data after field values".into()));
    }
    Ok((spec, ValueField::new(values, "loaded")))
}

pub fn read_field(path: &Path) -> Result<(GridSpec, ValueField)> {
    let text = fs::read_to_string(path)?;
    parse_field(&text)
}

/// P2 PGM rendering of a membership mask: member nodes white (255),
/// non-members black, written image-style with the top row (j = ny-1) first.
pub fn mask_to_pgm(grid: &Grid, members: &[bool]) -> Result<String> {
    if members.len() != grid.node_count() {
        return Err(Error::DimensionMismatch {
            expected: grid.node_count(),
            found: members.len(),
        });
    }
    let mut out = String::new();
    let _ = writeln!(out, "P2");
    let _ = writeln!(out, "{} {}", grid.nx(), grid.ny());
    let _ = writeln!(out, "255");
    for j in (0..grid.ny()).rev() {
        let mut line = String::new();
        for i in 0..grid.nx() {
            if i > 0 {
                line.push(' ');
            }
            line.push_str(if members[grid.index(i, j)] { "255" } else { "0" });
        }
        out.push_str(&line);
        out.push('\n');
    }
    Ok(out)
}

pub fn write_mask_pgm(path: &Path, grid: &Grid, members: &[bool]) -> Result<()> {
    fs::write(path, mask_to_pgm(grid, members)?)?;
    Ok(())
}

/// Text listing of mask membership: a `part K` header line followed by the
/// member node indices, one batch per part.
pub fn write_mask_list(path: &Path, masks: &[(usize, &[bool])]) -> Result<()> {
    let mut file = fs::File::create(path)?;
    for (part, members) in masks {
        writeln!(file, "part {part}")?;
        let indices: Vec<String> = members
            .iter()
            .enumerate()
            .filter(|(_, m)| **m)
            .map(|(i, _)| i.to_string())
            .collect();
        writeln!(file, "{}", indices.join(" "))?;
    }
    Ok(())
}

/// One CSV row per solve: `problem,nx,iters,residual,seconds`.
pub fn solve_report_row(problem: &str, nx: usize, report: &SolveReport) -> String {
    format!(
        "{problem},{nx},{},{:e},{:.6}",
        report.iterations, report.final_residual, report.wall_time_secs
    )
}

pub const SOLVE_REPORT_HEADER: &str = "problem,nx,iters,residual,seconds";
