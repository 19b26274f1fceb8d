use super::EvalError;
use crate::dynamics::{BoxDomain, VectorField};
use crate::linalg::{norm, Matrix};

/// Largest grid accepted by the box scans below.
pub const MAX_GRID_POINTS: u128 = 10_000_000;

const POWER_TOL: f64 = 1e-12;
const POWER_CAP: usize = 100_000;

/// Spectral norm of `a`, by power iteration on `A^T A`.
pub fn lipschitz_linear(a: &Matrix) -> Result<f64, EvalError> {
    let n = a.cols();
    if n == 0 || a.rows() == 0 {
        return Ok(0.0);
    }
    // Fixed start with no special alignment to coordinate axes.
    let golden = 0.618_033_988_749_894_9;
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64 * golden).fract()).collect();
    let nv = norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let mut av = vec![0.0; a.rows()];
    let mut u = vec![0.0; n];
    let mut previous = 0.0;
    for _ in 0..POWER_CAP {
        a.mul_vec(&v, &mut av);
        let lambda = av.iter().map(|x| x * x).sum::<f64>();
        a.mul_vec_transposed(&av, &mut u);
        let nu = norm(&u);
        if nu == 0.0 {
            return Ok(0.0);
        }
        if (lambda - previous).abs() <= POWER_TOL * lambda {
            return Ok(lambda.sqrt());
        }
        previous = lambda;
        for (vi, ui) in v.iter_mut().zip(&u) {
            *vi = ui / nu;
        }
    }
    Err(EvalError::NoConvergence(POWER_CAP))
}

fn grid_size(domain: &BoxDomain, per_dim: usize) -> Result<u128, EvalError> {
    let mut total: u128 = 1;
    for _ in 0..domain.dim() {
        total = total.saturating_mul(per_dim as u128);
        if total > MAX_GRID_POINTS {
            return Err(EvalError::GridTooLarge(total));
        }
    }
    Ok(total)
}

/// Calls `visit` on every point of the regular `per_dim^d` grid over `domain`
/// (a single centre point when `per_dim == 1`).
fn for_each_grid_point(
    domain: &BoxDomain,
    per_dim: usize,
    mut visit: impl FnMut(&[f64]) -> Result<(), EvalError>,
) -> Result<(), EvalError> {
    assert!(per_dim >= 1, "grid needs at least one point per dimension");
    domain.validate()?;
    let total = grid_size(domain, per_dim)?;
    let d = domain.dim();
    let coord = |k: usize, idx: usize| {
        let (lo, hi) = (domain.lower[k], domain.upper[k]);
        if per_dim == 1 {
            0.5 * (lo + hi)
        } else if idx + 1 == per_dim {
            hi
        } else {
            lo + (hi - lo) * idx as f64 / (per_dim - 1) as f64
        }
    };
    let mut idx = vec![0usize; d];
    let mut x: Vec<f64> = (0..d).map(|k| coord(k, 0)).collect();
    for _ in 0..total {
        visit(&x)?;
        for k in 0..d {
            idx[k] += 1;
            if idx[k] < per_dim {
                x[k] = coord(k, idx[k]);
                break;
            }
            idx[k] = 0;
            x[k] = coord(k, 0);
        }
    }
    Ok(())
}

/// Lipschitz constant of `field` on `domain`: the exact Jacobian norm for
/// affine fields, otherwise the largest Jacobian norm found on the grid.
pub fn lipschitz_on_box(field: &VectorField, domain: &BoxDomain, per_dim: usize) -> Result<f64, EvalError> {
    if field.dim() != domain.dim() {
        return Err(EvalError::Dimension {
            expected: field.dim(),
            found: domain.dim(),
        });
    }
    if field.is_affine() {
        let centre: Vec<f64> = domain
            .lower
            .iter()
            .zip(&domain.upper)
            .map(|(a, b)| 0.5 * (a + b))
            .collect();
        return lipschitz_linear(&field.jacobian(&centre));
    }
    let mut best = 0.0f64;
    for_each_grid_point(domain, per_dim, |x| {
        best = best.max(lipschitz_linear(&field.jacobian(x))?);
        Ok(())
    })?;
    Ok(best)
}

/// `max ||f1(x) - f2(x)||` over the regular grid on `domain`; a lower
/// estimate of the supremum over the box.
pub fn sup_field_difference(
    f1: &VectorField,
    f2: &VectorField,
    domain: &BoxDomain,
    per_dim: usize,
) -> Result<f64, EvalError> {
    let d = domain.dim();
    for f in [f1, f2] {
        if f.dim() != d {
            return Err(EvalError::Dimension { expected: d, found: f.dim() });
        }
    }
    let mut a = vec![0.0; d];
    let mut b = vec![0.0; d];
    let mut best = 0.0f64;
    for_each_grid_point(domain, per_dim, |x| {
        f1.eval_into(x, &mut a);
        f2.eval_into(x, &mut b);
        let diff = a.iter().zip(&b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
        best = best.max(diff);
        Ok(())
    })?;
    Ok(best)
}
