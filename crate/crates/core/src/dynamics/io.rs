use std::io::{BufRead, Write};

use super::{DynamicsError, TimeGrid, Trajectory, TrajectoryStore};
use crate::textio;

/// Writes `traj,j,t,x0,...,x{d-1}` rows, one per observed state; `j` is 0-based.
pub fn write_trajectories<W: Write>(out: &mut W, store: &TrajectoryStore) -> std::io::Result<()> {
    let d = store.dim();
    let mut header = String::from("traj,j,t");
    for i in 0..d {
        header.push_str(&format!(",x{i}"));
    }
    writeln!(out, "{header}")?;
    let grid = store.grid();
    let mut line = String::new();
    for n in 0..store.trajectory_count() {
        for j in 0..grid.len() {
            line.clear();
            line.push_str(&format!("{n},{j},"));
            textio::push_real(&mut line, grid.time(j));
            for v in store.state(n, j) {
                line.push(',');
                textio::push_real(&mut line, *v);
            }
            writeln!(out, "{line}")?;
        }
    }
    Ok(())
}

/// Parses the format written by [`write_trajectories`]. Rows must be ordered
/// by trajectory then time index, and times must lie on a uniform grid.
pub fn read_trajectories<R: BufRead>(input: R) -> Result<TrajectoryStore, DynamicsError> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| DynamicsError::Parse("empty trajectory file".into()))?
        .map_err(|e| DynamicsError::Parse(e.to_string()))?;
    let cols: Vec<&str> = header.trim().split(',').collect();
    if cols.len() < 4 || cols[..3] != ["traj", "j", "t"] {
        return Err(DynamicsError::Parse(format!("unexpected header `{header}`")));
    }
    let dim = cols.len() - 3;
    for (i, c) in cols[3..].iter().enumerate() {
        if *c != format!("x{i}") {
            return Err(DynamicsError::Parse(format!("unexpected column `{c}`")));
        }
    }

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut times: Vec<f64> = Vec::new();
    let mut expected = (0usize, 0usize);
    let mut steps: Option<usize> = None;
    for (lineno, line) in lines.enumerate() {
        let line = line.map_err(|e| DynamicsError::Parse(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.trim().split(',').collect();
        let bad = |msg: &str| DynamicsError::Parse(format!("line {}: {msg}", lineno + 2));
        if fields.len() != dim + 3 {
            return Err(bad("wrong number of columns"));
        }
        let n: usize = fields[0].parse().map_err(|_| bad("bad trajectory id"))?;
        let j: usize = fields[1].parse().map_err(|_| bad("bad time index"))?;
        if (n, j) != expected {
            if j == 0 && n == expected.0 + 1 && steps.is_none_or(|s| s == expected.1) {
                steps = Some(expected.1);
            } else {
                return Err(bad("rows out of order or trajectories of unequal length"));
            }
        }
        let t: f64 = fields[2].parse().map_err(|_| bad("bad time"))?;
        if n == 0 {
            times.push(t);
        }
        let state = fields[3..]
            .iter()
            .map(|s| s.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| bad("bad state value"))?;
        rows.push(state);
        expected = (n, j + 1);
    }
    let count = expected.0 + 1;
    let steps = steps.unwrap_or(expected.1);
    if rows.is_empty() || expected.1 != steps || steps < 2 {
        return Err(DynamicsError::Parse(
            "truncated file or trajectories of unequal length".into(),
        ));
    }
    let grid = TimeGrid::new(times[steps - 1], steps)?;
    for (j, t) in times.iter().enumerate() {
        if (t - grid.time(j)).abs() > 1e-9 * grid.t_max() {
            return Err(DynamicsError::Parse(format!(
                "time {t} at index {j} is off the uniform grid"
            )));
        }
    }
    let trajs = rows
        .chunks_exact(steps)
        .map(|c| Trajectory::from_states(grid.delta(), c))
        .collect::<Result<Vec<_>, _>>()?;
    debug_assert_eq!(trajs.len(), count);
    TrajectoryStore::new(grid, &trajs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_store() -> TrajectoryStore {
        let grid = TimeGrid::new(0.3, 4).unwrap();
        let trajs: Vec<Trajectory> = (0..3)
            .map(|n| {
                let s: Vec<f64> = (0..8).map(|k| (n * 8 + k) as f64 * 0.1 + 1e-17).collect();
                Trajectory::from_flat(2, grid.delta(), s).unwrap()
            })
            .collect();
        TrajectoryStore::new(grid, &trajs).unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let store = sample_store();
        let mut buf = Vec::new();
        write_trajectories(&mut buf, &store).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("traj,j,t,x0,x1\n0,0,0.0000000000000000e0,"));
        let back = read_trajectories(buf.as_slice()).unwrap();
        assert_eq!(back, store);
    }

    #[test]
    fn truncated_file_is_rejected() {
        let store = sample_store();
        let mut buf = Vec::new();
        write_trajectories(&mut buf, &store).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let cut: String = text.lines().take(10).map(|l| format!("{l}\n")).collect();
        assert!(read_trajectories(cut.as_bytes()).is_err());
    }

    #[test]
    fn bad_header_is_rejected() {
        assert!(read_trajectories("a,b,c,x0\n".as_bytes()).is_err());
        assert!(read_trajectories("".as_bytes()).is_err());
    }
}
