//! Box-constrained multistart Nelder–Mead used for likelihood maximization.

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
}

fn clamp_into(x: &mut [f64], bounds: &[(f64, f64)]) {
    for (v, &(lo, hi)) in x.iter_mut().zip(bounds) {
        *v = v.clamp(lo, hi);
    }
}

/// Maximizes `f` over the box `bounds`, running one simplex search from each
/// start and sharing `budget` evaluations between them. Non-finite values
/// count as −∞. The first start wins ties, so a sensible default there is
/// never displaced by an equally good point.
pub fn maximize<F>(mut f: F, bounds: &[(f64, f64)], starts: &[Vec<f64>], budget: usize) -> SearchResult
where
    F: FnMut(&[f64]) -> f64,
{
    assert!(!starts.is_empty(), "at least one start point");
    let dims = bounds.len();
    let mut evaluations = 0;
    let mut eval = |x: &[f64], count: &mut usize| {
        *count += 1;
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::NEG_INFINITY
        }
    };

    let mut best = SearchResult {
        x: starts[0].clone(),
        value: f64::NEG_INFINITY,
        evaluations: 0,
    };
    let per_start = (budget / starts.len()).max(dims + 2);
    for start in starts {
        let mut x0 = start.clone();
        clamp_into(&mut x0, bounds);
        let used_before = evaluations;
        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dims + 1);
        let v0 = eval(&x0, &mut evaluations);
        simplex.push((x0.clone(), v0));
        for k in 0..dims {
            let (lo, hi) = bounds[k];
            let step = 0.15 * (hi - lo);
            let mut x = x0.clone();
            x[k] = if x[k] + step <= hi { x[k] + step } else { x[k] - step };
            let v = eval(&x, &mut evaluations);
            simplex.push((x, v));
        }
        while evaluations - used_before < per_start {
            simplex.sort_by(|a, b| b.1.total_cmp(&a.1));
            let spread = simplex[0].1 - simplex[dims].1;
            let size = simplex
                .iter()
                .skip(1)
                .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
                .fold(0.0, f64::max);
            if spread.abs() < 1e-9 * (1.0 + simplex[0].1.abs()) && size < 1e-5 {
                break;
            }
            let centroid: Vec<f64> = (0..dims)
                .map(|k| simplex[..dims].iter().map(|(x, _)| x[k]).sum::<f64>() / dims as f64)
                .collect();
            let worst = simplex[dims].clone();
            let along = |t: f64| {
                let mut x: Vec<f64> = centroid.iter().zip(&worst.0).map(|(c, w)| c + t * (c - w)).collect();
                clamp_into(&mut x, bounds);
                x
            };
            let xr = along(1.0);
            let fr = eval(&xr, &mut evaluations);
            if fr > simplex[0].1 {
                let xe = along(2.0);
                let fe = eval(&xe, &mut evaluations);
                simplex[dims] = if fe > fr { (xe, fe) } else { (xr, fr) };
            } else if fr > simplex[dims - 1].1 {
                simplex[dims] = (xr, fr);
            } else {
                let (xc, fc) = if fr > worst.1 {
                    let x = along(0.5);
                    let v = eval(&x, &mut evaluations);
                    (x, v)
                } else {
                    let x = along(-0.5);
                    let v = eval(&x, &mut evaluations);
                    (x, v)
                };
                let accept = if fr > worst.1 { fc >= fr } else { fc > worst.1 };
                if accept {
                    simplex[dims] = (xc, fc);
                } else {
                    let head = simplex[0].0.clone();
                    for item in simplex.iter_mut().skip(1) {
                        let x: Vec<f64> = head.iter().zip(&item.0).map(|(h, v)| h + 0.5 * (v - h)).collect();
                        let v = eval(&x, &mut evaluations);
                        *item = (x, v);
                    }
                }
            }
        }
        simplex.sort_by(|a, b| b.1.total_cmp(&a.1));
        if simplex[0].1 > best.value {
            best.x = simplex[0].0.clone();
            best.value = simplex[0].1;
        }
    }
    best.evaluations = evaluations;
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_interior_maximum() {
        let f = |x: &[f64]| -(x[0] - 0.3).powi(2) - 2.0 * (x[1] + 0.7).powi(2);
        let r = maximize(f, &[(-3.0, 3.0), (-3.0, 3.0)], &[vec![0.0, 0.0]], 400);
        assert!((r.x[0] - 0.3).abs() < 1e-3 && (r.x[1] + 0.7).abs() < 1e-3, "{r:?}");
    }

    #[test]
    fn respects_bounds() {
        let f = |x: &[f64]| x[0];
        let r = maximize(f, &[(-1.0, 2.0)], &[vec![0.0]], 100);
        assert!((r.x[0] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn multistart_escapes_local_maximum() {
        // Local peak near -2, global near +2.
        let f = |x: &[f64]| (-(x[0] + 2.0).powi(2)).exp() + 2.0 * (-(x[0] - 2.0).powi(2)).exp();
        let r = maximize(f, &[(-3.0, 3.0)], &[vec![-2.0], vec![2.5]], 200);
        assert!((r.x[0] - 2.0).abs() < 1e-2, "{r:?}");
    }

    #[test]
    fn non_finite_values_are_avoided() {
        let f = |x: &[f64]| if x[0] > 0.5 { f64::NAN } else { x[0] };
        let r = maximize(f, &[(0.0, 1.0)], &[vec![0.1]], 200);
        assert!(r.x[0] <= 0.5 && r.x[0] > 0.45, "{r:?}");
    }
}
