//! Reference implementations used only by tests. Each one is written
//! from the textbook form, independent of the library code it checks.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, Matrix3, Rotation3, Vector3};

use vdt_core::datafusion::EhkModel;
use vdt_core::vehicle::{BodyState, ForcesMoments, VehicleParams};

/// Rigid-body state derivative in vector/matrix form:
/// v̇ = F/m + Rᵀg − ω×v, ω̇ = I⁻¹(M − ω×Iω), Euler rates from the
/// body-rate transformation, position from the body→NED rotation.
pub fn dynamics_oracle(s: &BodyState, fm: &ForcesMoments, params: &VehicleParams) -> [f64; 12] {
    let inertia = Matrix3::new(
        params.ixx, -params.ixy, -params.ixz, //
        -params.ixy, params.iyy, -params.iyz, //
        -params.ixz, -params.iyz, params.izz,
    );
    let inv = inertia.try_inverse().expect("inertia is invertible");
    let body_to_ned = Rotation3::from_euler_angles(s.phi, s.theta, s.psi);
    let v = Vector3::new(s.u, s.v, s.w);
    let w = Vector3::new(s.p, s.q, s.r);
    let gravity_body = body_to_ned.inverse() * Vector3::new(0.0, 0.0, params.gravity);
    let v_dot = Vector3::new(fm.fx, fm.fy, fm.fz) / params.mass + gravity_body - w.cross(&v);
    let w_dot = inv * (Vector3::new(fm.l_mom, fm.m_mom, fm.n_mom) - w.cross(&(inertia * w)));
    let (sp, cp) = s.phi.sin_cos();
    let (st, ct) = s.theta.sin_cos();
    let euler_rates = Matrix3::new(
        1.0, sp * st / ct, cp * st / ct, //
        0.0, cp, -sp, //
        0.0, sp / ct, cp / ct,
    ) * w;
    let pos_dot = body_to_ned * v;
    [
        v_dot.x,
        v_dot.y,
        v_dot.z,
        w_dot.x,
        w_dot.y,
        w_dot.z,
        euler_rates.x,
        euler_rates.y,
        euler_rates.z,
        pos_dot.x,
        pos_dot.y,
        pos_dot.z,
    ]
}

/// Natural cubic spline assembled as one dense system over all piece
/// coefficients (value, slope and curvature continuity, zero end curvature).
pub struct SplineOracle {
    xs: Vec<f64>,
    pieces: Vec<[f64; 4]>,
}

impl SplineOracle {
    pub fn new(knots: &[(f64, f64)]) -> Self {
        let n = knots.len() - 1;
        let mut a = DMatrix::<f64>::zeros(4 * n, 4 * n);
        let mut b = DVector::<f64>::zeros(4 * n);
        let mut row = 0;
        // Piece i: y = c0 + c1 x + c2 x² + c3 x³ in absolute x.
        let poly = |x: f64| [1.0, x, x * x, x * x * x];
        let slope = |x: f64| [0.0, 1.0, 2.0 * x, 3.0 * x * x];
        let curv = |x: f64| [0.0, 0.0, 2.0, 6.0 * x];
        for i in 0..n {
            for (x, y) in [knots[i], knots[i + 1]] {
                for (k, c) in poly(x).iter().enumerate() {
                    a[(row, 4 * i + k)] = *c;
                }
                b[row] = y;
                row += 1;
            }
        }
        for i in 0..n - 1 {
            let x = knots[i + 1].0;
            for f in [slope, curv] {
                for (k, c) in f(x).iter().enumerate() {
                    a[(row, 4 * i + k)] = *c;
                    a[(row, 4 * (i + 1) + k)] = -*c;
                }
                row += 1;
            }
        }
        for (i, x) in [(0, knots[0].0), (n - 1, knots[n].0)] {
            for (k, c) in curv(x).iter().enumerate() {
                a[(row, 4 * i + k)] = *c;
            }
            row += 1;
        }
        assert_eq!(row, 4 * n);
        let c = a.lu().solve(&b).expect("spline system is regular");
        Self {
            xs: knots.iter().map(|k| k.0).collect(),
            pieces: (0..n).map(|i| [c[4 * i], c[4 * i + 1], c[4 * i + 2], c[4 * i + 3]]).collect(),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.pieces.len();
        let i = (0..n).rev().find(|&i| x >= self.xs[i]).unwrap_or(0);
        let c = self.pieces[i];
        c[0] + c[1] * x + c[2] * x * x + c[3] * x * x * x
    }
}

/// Multilinear interpolation by nested lerps; outside the grid the edge
/// cell is extended linearly.
pub fn nested_lerp(grids: &[Vec<f64>], values: &[f64], x: &[f64]) -> f64 {
    let Some((g, rest)) = grids.split_first() else {
        return values[0];
    };
    let inner: usize = rest.iter().map(Vec::len).product();
    let mut i = 0;
    while i + 2 < g.len() && x[0] >= g[i + 1] {
        i += 1;
    }
    let t = (x[0] - g[i]) / (g[i + 1] - g[i]);
    let lo = nested_lerp(rest, &values[i * inner..], &x[1..]);
    let hi = nested_lerp(rest, &values[(i + 1) * inner..], &x[1..]);
    (1.0 - t) * lo + t * hi
}

/// Inverse by Gauss–Jordan elimination with partial pivoting.
pub fn gauss_jordan_inverse(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let mut a = m.clone();
    let mut inv = DMatrix::<f64>::identity(n, n);
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[(i, col)].abs().total_cmp(&a[(j, col)].abs()))
            .expect("non-empty");
        a.swap_rows(col, pivot);
        inv.swap_rows(col, pivot);
        let d = a[(col, col)];
        assert!(d.abs() > 1e-300, "singular matrix");
        for k in 0..n {
            a[(col, k)] /= d;
            inv[(col, k)] /= d;
        }
        for i in 0..n {
            if i != col {
                let f = a[(i, col)];
                if f != 0.0 {
                    for k in 0..n {
                        a[(i, k)] -= f * a[(col, k)];
                        inv[(i, k)] -= f * inv[(col, k)];
                    }
                }
            }
        }
    }
    inv
}

/// Generalized least squares with a Gaussian correlation on normalized
/// inputs, solved with a dense explicit inverse.
pub struct GlsOracle {
    pub beta: DVector<f64>,
    pub sigma2: f64,
    train: Vec<Vec<f64>>,
    theta: Vec<f64>,
    nugget: f64,
    weights: DVector<f64>,
}

pub fn gaussian_corr(a: &[f64], b: &[f64], theta: &[f64]) -> f64 {
    let s: f64 = a.iter().zip(b).zip(theta).map(|((x, y), t)| t * (x - y).powi(2)).sum();
    (-s).exp()
}

impl GlsOracle {
    /// `train` rows already normalized; `f` is the n × k regressor matrix.
    pub fn fit(train: Vec<Vec<f64>>, y: &DVector<f64>, f: &DMatrix<f64>, theta: &[f64], nugget: f64) -> Self {
        let n = train.len();
        let r = DMatrix::from_fn(n, n, |i, j| {
            gaussian_corr(&train[i], &train[j], theta) + if i == j { nugget } else { 0.0 }
        });
        let r_inv = gauss_jordan_inverse(&r);
        // Iterative refinement keeps the explicit inverse accurate when R is
        // close to singular.
        let solve = |b: &DMatrix<f64>| {
            let mut x = &r_inv * b;
            for _ in 0..3 {
                x += &r_inv * (b - &r * &x);
            }
            x
        };
        let r_inv_f = solve(f);
        let gram = f.transpose() * &r_inv_f;
        let gram_inv = gauss_jordan_inverse(&gram);
        let mut beta = &gram_inv * (r_inv_f.transpose() * y);
        for _ in 0..3 {
            beta += &gram_inv * (r_inv_f.transpose() * (y - f * &beta));
        }
        let resid = y - f * &beta;
        let weights = solve(&DMatrix::from_column_slice(n, 1, resid.as_slice())).column(0).into_owned();
        let sigma2 = resid.dot(&weights) / n as f64;
        Self {
            beta,
            sigma2,
            train,
            theta: theta.to_vec(),
            nugget,
            weights,
        }
    }

    /// Mean prediction at a normalized point with regressors `fx`.
    pub fn predict(&self, x: &[f64], fx: &DVector<f64>) -> f64 {
        let r = DVector::from_iterator(
            self.train.len(),
            self.train.iter().map(|t| {
                let c = gaussian_corr(t, x, &self.theta);
                if t.as_slice() == x {
                    c + self.nugget
                } else {
                    c
                }
            }),
        );
        fx.dot(&self.beta) + r.dot(&self.weights)
    }
}

fn unit_box(x: &[f64], bounds: &[(f64, f64)]) -> Vec<f64> {
    x.iter().zip(bounds).map(|(v, (lo, hi))| (v - lo) / (hi - lo)).collect()
}

/// Largest relative difference between an EHK fit and the dense GLS solve
/// at the fitted θ and nugget, over ρ, σ² and predictions at `probes`.
pub fn ehk_against_dense(
    model: &EhkModel,
    inputs: &DMatrix<f64>,
    y: &DVector<f64>,
    bounds: &[(f64, f64)],
    probes: &[Vec<f64>],
) -> f64 {
    let raw: Vec<Vec<f64>> = (0..inputs.nrows()).map(|i| inputs.row(i).iter().copied().collect()).collect();
    let l = model.rho().len();
    let f = DMatrix::from_fn(raw.len(), l, |i, j| model.lf_predictions(&raw[i])[j]);
    let oracle = GlsOracle::fit(
        raw.iter().map(|x| unit_box(x, bounds)).collect(),
        y,
        &f,
        model.theta_d(),
        model.nugget(),
    );
    let rho_scale = oracle.beta.amax().max(1e-12);
    let mut worst = (0..l)
        .map(|j| (model.rho()[j] - oracle.beta[j]).abs() / rho_scale)
        .fold(rel_err(model.sigma2_d(), oracle.sigma2), f64::max);
    let y_scale = y.amax();
    for x in probes {
        let want = oracle.predict(&unit_box(x, bounds), &model.lf_predictions(x));
        worst = worst.max((model.predict(x) - want).abs() / want.abs().max(1e-3 * y_scale));
    }
    worst
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

/// Operator script for the loopback sessions: a 20 m square at 2 m/s from
/// 2 s, then a 5 m/s dash north (clamped by the bridge) from 46 s to 49 s.
pub fn teleop_script() -> Vec<vdt_core::session::ScriptedCommand> {
    use vdt_core::session::{square_commands, OperatorCommand, ScriptedCommand};
    let mut s = square_commands(20.0, 2.0, 2.0);
    s.push(ScriptedCommand {
        at: 46.0,
        command: OperatorCommand {
            velocity: [5.0, 0.0, 0.0],
            yaw_rate: 0.0,
        },
    });
    s.push(ScriptedCommand {
        at: 49.0,
        command: OperatorCommand::default(),
    });
    s
}
