//! Trajectory CSV with shortest round-trip decimals.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use anyhow::{anyhow, bail, Context, Result};

use crate::dynamics::{IntegratorStats, Trajectory};
use crate::geometry::{frame_observables_with_l, CSV_COLUMNS};
use crate::kernel::ReferenceClock;

/// Shortest round-trip decimal; non-finite values as `inf`, `-inf`, `NaN`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        ryu::Buffer::new().format_finite(x).to_string()
    } else if x.is_nan() {
        "NaN".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// t = e^s, written as `<mantissa>e<exponent>` once e^s leaves the f64 range.
pub fn fmt_time(s: f64) -> String {
    if s <= 700.0 {
        return fmt_f64(s.exp());
    }
    let l10 = s / std::f64::consts::LN_10;
    let e = l10.floor();
    format!("{}e{}", fmt_f64(10f64.powf(l10 - e)), e as i64)
}

pub fn header(d: usize, n: usize, observables: bool) -> Vec<String> {
    let mut cols = vec!["t".to_string(), "s".to_string()];
    for k in 0..n {
        for i in 0..d {
            cols.push(format!("z{k}_{}", i + 1));
        }
    }
    if observables {
        cols.extend(CSV_COLUMNS.iter().map(|c| c.to_string()));
    }
    cols
}

/// Writes one row per frame; (1,3) trajectories also carry the frame observables.
pub fn write_trajectory(mut w: impl Write, traj: &Trajectory, clock: &ReferenceClock) -> Result<()> {
    let observables = traj.signs.len() == 4 && traj.config(0).is_one_three();
    writeln!(w, "{}", header(traj.d, traj.signs.len(), observables).join(","))?;
    let mut line = String::new();
    for n in 0..traj.len() {
        line.clear();
        let s = traj.s[n];
        write!(line, "{},{}", fmt_time(s), fmt_f64(s))?;
        for &x in &traj.frames[n] {
            write!(line, ",{}", fmt_f64(x))?;
        }
        if observables {
            let obs = frame_observables_with_l(&traj.config(n), clock.kernel(), s, clock.l_at_s(s))?;
            for x in obs.csv_values() {
                write!(line, ",{}", fmt_f64(x))?;
            }
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

/// Reads s and the center columns back; signs are not stored in the file.
pub fn read_trajectory(r: impl BufRead, d: usize, signs: &[i8]) -> Result<Trajectory> {
    let mut lines = r.lines();
    let head = lines.next().ok_or_else(|| anyhow!("empty trajectory file"))??;
    let cols: Vec<&str> = head.split(',').collect();
    let find = |name: &str| cols.iter().position(|c| *c == name).ok_or_else(|| anyhow!("missing column `{name}`"));
    let s_col = find("s")?;
    let mut z_cols = Vec::new();
    for k in 0..signs.len() {
        for i in 0..d {
            z_cols.push(find(&format!("z{k}_{}", i + 1))?);
        }
    }
    let mut s = Vec::new();
    let mut frames = Vec::new();
    for (row, line) in lines.enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols.len() {
            bail!("row {} has {} fields, expected {}", row + 2, fields.len(), cols.len());
        }
        let parse = |c: usize| fields[c].parse::<f64>().with_context(|| format!("row {}, column `{}`", row + 2, cols[c]));
        s.push(parse(s_col)?);
        frames.push(z_cols.iter().map(|&c| parse(c)).collect::<Result<Vec<f64>>>()?);
    }
    if s.is_empty() {
        bail!("trajectory file has no rows");
    }
    Ok(Trajectory { d, signs: signs.to_vec(), s, frames, collision: None, stats: IntegratorStats::default() })
}
