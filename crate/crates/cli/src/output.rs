//! CSV emission and re-parsing.
//!
//! Floats use the shortest round-trip decimal form (`{:?}`), so parsing a
//! written file reproduces the values bit for bit.

use std::fmt::Write as _;

use algctl_core::optctl::TrajectoryRecord;

fn push_row(out: &mut String, values: impl IntoIterator<Item = f64>) {
    let mut first = true;
    for v in values {
        if !first {
            out.push(',');
        }
        first = false;
        write!(out, "{v:?}").expect("writing to a String");
    }
    out.push('\n');
}

fn numbered(prefix: &str, count: usize) -> impl Iterator<Item = String> + '_ {
    (1..=count).map(move |i| format!("{prefix}{i}"))
}

pub fn trajectory_header(record: &TrajectoryRecord) -> String {
    let mut cols = vec!["t".to_string()];
    cols.extend(numbered("x", record.base_dim));
    cols.extend(numbered("eta", record.rank));
    cols.extend(numbered("u", record.control_dim));
    cols.push("H".into());
    cols.push("stat_res".into());
    cols.extend(numbered("casimir_", record.casimir_count()));
    cols.join(",")
}

/// `t,x1..xn,eta1..etar,u1..um,H,stat_res[,casimir_1..]`, one row per sample.
pub fn trajectory_csv(record: &TrajectoryRecord) -> String {
    let mut out = trajectory_header(record);
    out.push('\n');
    for k in 0..record.len() {
        let row = std::iter::once(record.times[k])
            .chain(record.x[k].iter().copied())
            .chain(record.eta[k].iter().copied())
            .chain(record.u[k].iter().copied())
            .chain([record.hamiltonian[k], record.stationarity[k]])
            .chain(record.casimirs[k].iter().copied());
        push_row(&mut out, row);
    }
    out
}

fn count_prefixed(cols: &[&str], start: usize, prefix: &str) -> usize {
    cols[start..]
        .iter()
        .enumerate()
        .take_while(|(i, c)| c.strip_prefix(prefix).and_then(|s| s.parse::<usize>().ok()) == Some(i + 1))
        .count()
}

/// Inverse of [`trajectory_csv`].
pub fn parse_trajectory_csv(text: &str) -> Result<TrajectoryRecord, String> {
    let mut lines = text.lines();
    let header = lines.next().ok_or("empty file")?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.first() != Some(&"t") {
        return Err(format!("header must start with `t`, got `{header}`"));
    }
    let n = count_prefixed(&cols, 1, "x");
    let r = count_prefixed(&cols, 1 + n, "eta");
    let m = count_prefixed(&cols, 1 + n + r, "u");
    let at = 1 + n + r + m;
    if cols.get(at) != Some(&"H") || cols.get(at + 1) != Some(&"stat_res") {
        return Err(format!("expected `H,stat_res` after the state columns in `{header}`"));
    }
    let k = count_prefixed(&cols, at + 2, "casimir_");
    if at + 2 + k != cols.len() {
        return Err(format!("unexpected column `{}`", cols[at + 2 + k]));
    }
    let mut rec = TrajectoryRecord {
        base_dim: n,
        rank: r,
        control_dim: m,
        times: Vec::new(),
        x: Vec::new(),
        eta: Vec::new(),
        u: Vec::new(),
        hamiltonian: Vec::new(),
        stationarity: Vec::new(),
        casimirs: Vec::new(),
    };
    for (i, line) in lines.enumerate() {
        let row: Vec<f64> = line
            .split(',')
            .map(|v| v.parse::<f64>().map_err(|e| format!("row {}: `{v}`: {e}", i + 1)))
            .collect::<Result<_, _>>()?;
        if row.len() != cols.len() {
            return Err(format!("row {} has {} fields, header has {}", i + 1, row.len(), cols.len()));
        }
        rec.times.push(row[0]);
        rec.x.push(row[1..1 + n].to_vec());
        rec.eta.push(row[1 + n..1 + n + r].to_vec());
        rec.u.push(row[1 + n + r..at].to_vec());
        rec.hamiltonian.push(row[at]);
        rec.stationarity.push(row[at + 1]);
        rec.casimirs.push(row[at + 2..].to_vec());
    }
    Ok(rec)
}

/// `lambda1..lambdak`, one orbit point per row.
pub fn orbit_csv(points: &[Vec<f64>], dim: usize) -> String {
    let mut out = numbered("lambda", dim).collect::<Vec<_>>().join(",");
    out.push('\n');
    for p in points {
        push_row(&mut out, p.iter().copied());
    }
    out
}

pub fn parse_orbit_csv(text: &str) -> Result<Vec<Vec<f64>>, String> {
    let mut lines = text.lines();
    let width = lines.next().ok_or("empty file")?.split(',').count();
    lines
        .enumerate()
        .map(|(i, line)| {
            let row: Vec<f64> = line
                .split(',')
                .map(|v| v.parse::<f64>().map_err(|e| format!("row {}: `{v}`: {e}", i + 1)))
                .collect::<Result<_, _>>()?;
            if row.len() != width {
                return Err(format!("row {} has {} fields, expected {width}", i + 1, row.len()));
            }
            Ok(row)
        })
        .collect()
}
