use std::io::Write;

use super::EvalError;
use crate::dynamics::{TimeGrid, Trajectory};
use crate::linalg::squared_distance;
use crate::textio;

fn same_shape(pred: &Trajectory, reference: &Trajectory) -> Result<(), EvalError> {
    if pred.dim() != reference.dim() {
        return Err(EvalError::Dimension {
            expected: reference.dim(),
            found: pred.dim(),
        });
    }
    if pred.len() != reference.len() {
        return Err(EvalError::Length {
            left: pred.len(),
            right: reference.len(),
        });
    }
    Ok(())
}

/// `||x(t_j) - y(t_j)||^2` for every grid point.
pub fn squared_errors(pred: &Trajectory, reference: &Trajectory) -> Result<Vec<f64>, EvalError> {
    same_shape(pred, reference)?;
    Ok(pred
        .states()
        .zip(reference.states())
        .map(|(p, r)| squared_distance(p, r))
        .collect())
}

/// Mean over all `J` grid points of the squared state error.
pub fn mse(pred: &Trajectory, reference: &Trajectory) -> Result<f64, EvalError> {
    let e = squared_errors(pred, reference)?;
    Ok(e.iter().sum::<f64>() / e.len() as f64)
}

/// `||x(t_j) - y(t_j)||^2 / ||x(t_j)||^2`.
pub fn relative_error(pred: &Trajectory, reference: &Trajectory, j: usize) -> Result<f64, EvalError> {
    same_shape(pred, reference)?;
    if j >= reference.len() {
        return Err(EvalError::Length {
            left: j,
            right: reference.len(),
        });
    }
    let r = reference.state(j);
    let rr = r.iter().map(|v| v * v).sum::<f64>();
    if rr == 0.0 {
        return Err(EvalError::ZeroReference { j });
    }
    Ok(squared_distance(pred.state(j), r) / rr)
}

/// Endpoint closest to `t1`, preferring the smaller one on ties.
pub fn identified_switch(endpoints: &[f64], t1: f64) -> Option<f64> {
    let mut best: Option<f64> = None;
    for &e in endpoints {
        match best {
            None => best = Some(e),
            Some(b) => {
                let (de, db) = ((e - t1).abs(), (b - t1).abs());
                if de < db || (de == db && e < b) {
                    best = Some(e);
                }
            }
        }
    }
    best
}

/// `j,t,pred_x0..,ref_x0..,abs_err,rel_err`; `rel_err` is left empty where
/// the reference state is zero.
pub fn write_prediction_csv<W: Write>(
    mut w: W,
    grid: &TimeGrid,
    pred: &Trajectory,
    reference: &Trajectory,
) -> Result<(), std::io::Error> {
    let d = reference.dim();
    let mut header = String::from("j,t");
    for k in 0..d {
        header.push_str(&format!(",pred_x{k}"));
    }
    for k in 0..d {
        header.push_str(&format!(",ref_x{k}"));
    }
    header.push_str(",abs_err,rel_err");
    writeln!(w, "{header}")?;
    for j in 0..reference.len() {
        let (p, r) = (pred.state(j), reference.state(j));
        let mut line = format!("{j},{}", textio::real(grid.time(j)));
        for v in p.iter().chain(r) {
            line.push(',');
            textio::push_real(&mut line, *v);
        }
        let se = squared_distance(p, r);
        line.push(',');
        textio::push_real(&mut line, se.sqrt());
        line.push(',');
        let rr = r.iter().map(|v| v * v).sum::<f64>();
        if rr > 0.0 {
            textio::push_real(&mut line, se / rr);
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

/// Pointwise `|u - u_hat|` for grid-valued states: `j,t,node,x,u_ref,u_pred,abs_err`
/// with nodes at `x = node / (n - 1)`.
pub fn write_heat_error_csv<W: Write>(
    mut w: W,
    grid: &TimeGrid,
    pred: &Trajectory,
    reference: &Trajectory,
) -> Result<(), std::io::Error> {
    let n = reference.dim();
    writeln!(w, "j,t,node,x,u_ref,u_pred,abs_err")?;
    for j in 0..reference.len() {
        let t = textio::real(grid.time(j));
        for (i, (u, p)) in reference.state(j).iter().zip(pred.state(j)).enumerate() {
            let x = if n > 1 { i as f64 / (n - 1) as f64 } else { 0.0 };
            writeln!(
                w,
                "{j},{t},{i},{},{},{},{}",
                textio::real(x),
                textio::real(*u),
                textio::real(*p),
                textio::real((u - p).abs())
            )?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn traj(states: &[Vec<f64>]) -> Trajectory {
        Trajectory::from_states(0.1, states).unwrap()
    }

    #[test]
    fn mse_examples() {
        let r = traj(&[vec![0.0, 0.0], vec![1.0, 1.0]]);
        assert_eq!(mse(&r, &r).unwrap(), 0.0);
        let p = traj(&[vec![0.02f64.sqrt(), 0.0], vec![1.0, 1.0 + 0.04f64.sqrt()]]);
        assert!((mse(&p, &r).unwrap() - 0.03).abs() < 1e-15);
        assert!(mse(&traj(&[vec![0.0, 0.0], vec![0.0, 0.0], vec![0.0, 0.0]]), &r).is_err());
    }

    #[test]
    fn relative_error_examples() {
        let r = traj(&[vec![2.0, 0.0], vec![0.0, 0.0]]);
        let p = traj(&[vec![2.0, 0.2], vec![0.0, 0.0]]);
        assert!((relative_error(&p, &r, 0).unwrap() - 0.01).abs() < 1e-15);
        assert_eq!(relative_error(&r, &r, 0).unwrap(), 0.0);
        assert!(matches!(relative_error(&p, &r, 1), Err(EvalError::ZeroReference { j: 1 })));
    }

    #[test]
    fn identified_switch_examples() {
        let e = [0.0, 20.0, 25.0, 27.5, 30.0, 40.0];
        assert_eq!(identified_switch(&e, 27.6), Some(27.5));
        assert_eq!(identified_switch(&e, 25.0), Some(25.0));
        assert_eq!(identified_switch(&[0.0, 40.0], 27.6), Some(40.0));
        assert_eq!(identified_switch(&[0.0, 2.0, 4.0], 3.0), Some(2.0));
        assert_eq!(identified_switch(&[], 1.0), None);
    }

    #[test]
    fn prediction_csv_layout() {
        let grid = TimeGrid::new(0.1, 2).unwrap();
        let r = traj(&[vec![2.0, 0.0], vec![0.0, 0.0]]);
        let p = traj(&[vec![2.0, 0.0], vec![0.0, 1.0]]);
        let mut buf = Vec::new();
        write_prediction_csv(&mut buf, &grid, &p, &r).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "j,t,pred_x0,pred_x1,ref_x0,ref_x1,abs_err,rel_err");
        assert!(lines[1].ends_with(",0.0000000000000000e0,0.0000000000000000e0"));
        assert!(lines[2].ends_with(",1.0000000000000000e0,"));
    }
}
