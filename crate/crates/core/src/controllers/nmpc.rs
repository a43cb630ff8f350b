//! Linearised unicycle MPC solved as a box-constrained condensed QP.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::geometry::{wrap_angle, Pose2D};
use crate::robot::{BodyTwist, RobotState};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MPCConfig {
    pub horizon_n: usize,
    pub dt: f64,
    pub q_pos: f64,
    pub q_theta: f64,
    pub r_v: f64,
    pub r_omega: f64,
    pub v_box: [f64; 2],
    pub omega_box: [f64; 2],
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for MPCConfig {
    fn default() -> Self {
        MPCConfig {
            horizon_n: 10,
            dt: 0.1,
            q_pos: 10.0,
            q_theta: 1.0,
            r_v: 0.1,
            r_omega: 0.1,
            v_box: [0.0, 1.0],
            omega_box: [-0.5, 0.5],
            max_iterations: 20_000,
            tolerance: 1e-6,
        }
    }
}

impl MPCConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon_n == 0 {
            return Err(Error::domain("MPC horizon must be at least one step"));
        }
        if !(self.dt > 0.0) {
            return Err(Error::domain("MPC step must be positive"));
        }
        let w = [self.q_pos, self.q_theta, self.r_v, self.r_omega];
        if w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::domain("MPC weights must be finite and non-negative"));
        }
        if !(self.v_box[0] <= self.v_box[1] && self.omega_box[0] <= self.omega_box[1]) {
            return Err(Error::domain("MPC boxes must be ordered"));
        }
        if !(self.tolerance > 0.0) || self.max_iterations == 0 {
            return Err(Error::domain("MPC solver budget must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpcSolution {
    /// Optimal inputs `u_0 … u_{N−1}`, all inside the boxes.
    pub inputs: Vec<BodyTwist>,
    pub iterations: usize,
    /// `‖u − P(u − ∇f(u))‖_∞` at the returned point.
    pub kkt_residual: f64,
}

fn unicycle(x: [f64; 3], u: BodyTwist, dt: f64) -> [f64; 3] {
    [
        x[0] + dt * u.v * x[2].cos(),
        x[1] + dt * u.v * x[2].sin(),
        x[2] + dt * u.omega,
    ]
}

struct BoxQp {
    h: DMatrix<f64>,
    g: DVector<f64>,
    lo: DVector<f64>,
    hi: DVector<f64>,
}

impl BoxQp {
    fn project(&self, u: &mut DVector<f64>) {
        for i in 0..u.len() {
            u[i] = u[i].clamp(self.lo[i], self.hi[i]);
        }
    }

    fn gradient(&self, u: &DVector<f64>) -> DVector<f64> {
        &self.h * u + &self.g
    }

    fn residual(&self, u: &DVector<f64>) -> f64 {
        let mut p = u - self.gradient(u);
        self.project(&mut p);
        (u - p).amax()
    }

    /// Accelerated projected gradient with gradient-based restart.
    fn solve(&self, mut u: DVector<f64>, max_iter: usize, tol: f64) -> (DVector<f64>, usize, f64) {
        self.project(&mut u);
        let lip = self
            .h
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .fold(0.0f64, |m, &e| m.max(e));
        if lip <= 0.0 {
            let r = self.residual(&u);
            return (u, 0, r);
        }
        let step = 1.0 / lip;
        let mut y = u.clone();
        let mut t = 1.0f64;
        for it in 0..max_iter {
            let r = self.residual(&u);
            if r <= tol {
                return (u, it, r);
            }
            let mut next = &y - self.gradient(&y) * step;
            self.project(&mut next);
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let restart = (&y - &next).dot(&(&next - &u)) > 0.0;
            if restart {
                y = next.clone();
                t = 1.0;
            } else {
                y = &next + (&next - &u) * ((t - 1.0) / t_next);
                t = t_next;
            }
            u = next;
        }
        let r = self.residual(&u);
        (u, max_iter, r)
    }
}

/// Solves the horizon QP about the nominal inputs `nominal` (or the current
/// twist when absent). `reference[k]` is the body-frame target for state
/// `k + 1`.
pub fn nmpc_solve(
    state: &RobotState,
    reference: &[Pose2D],
    cfg: &MPCConfig,
    nominal: Option<&[BodyTwist]>,
) -> Result<MpcSolution> {
    cfg.validate()?;
    let n = cfg.horizon_n;
    if reference.len() < n {
        return Err(Error::domain(format!(
            "MPC needs {n} reference poses, got {}",
            reference.len()
        )));
    }
    let clamp = |u: BodyTwist| {
        BodyTwist::new(
            u.v.clamp(cfg.v_box[0], cfg.v_box[1]),
            u.omega.clamp(cfg.omega_box[0], cfg.omega_box[1]),
        )
    };
    let ubar: Vec<BodyTwist> = match nominal {
        Some(u) if u.len() >= n => u[..n].iter().map(|&u| clamp(u)).collect(),
        _ => vec![clamp(state.twist); n],
    };

    let mut xbar = Vec::with_capacity(n + 1);
    xbar.push([0.0; 3]);
    for k in 0..n {
        xbar.push(unicycle(xbar[k], ubar[k], cfg.dt));
    }

    // Gamma maps input deviations to state deviations x_{k+1}, k = 0..N-1.
    let dt = cfg.dt;
    let mut gamma = DMatrix::<f64>::zeros(3 * n, 2 * n);
    for j in 0..n {
        let th = xbar[j][2];
        let mut m = DMatrix::<f64>::from_row_slice(
            3,
            2,
            &[dt * th.cos(), 0.0, dt * th.sin(), 0.0, 0.0, dt],
        );
        for k in j..n {
            gamma.view_mut((3 * k, 2 * j), (3, 2)).copy_from(&m);
            if k + 1 < n {
                let (th, v) = (xbar[k + 1][2], ubar[k + 1].v);
                let a = DMatrix::<f64>::from_row_slice(
                    3,
                    3,
                    &[
                        1.0,
                        0.0,
                        -dt * v * th.sin(),
                        0.0,
                        1.0,
                        dt * v * th.cos(),
                        0.0,
                        0.0,
                        1.0,
                    ],
                );
                m = a * m;
            }
        }
    }

    let ubar_vec = DVector::from_iterator(2 * n, ubar.iter().flat_map(|u| [u.v, u.omega]));
    let gu = &gamma * &ubar_vec;
    let mut c = DVector::<f64>::zeros(3 * n);
    let mut q = DVector::<f64>::zeros(3 * n);
    for k in 0..n {
        let (x, r) = (xbar[k + 1], reference[k]);
        c[3 * k] = x[0] - r.x - gu[3 * k];
        c[3 * k + 1] = x[1] - r.y - gu[3 * k + 1];
        c[3 * k + 2] = wrap_angle(x[2] - r.theta) - gu[3 * k + 2];
        q[3 * k] = cfg.q_pos;
        q[3 * k + 1] = cfg.q_pos;
        q[3 * k + 2] = cfg.q_theta;
    }
    let qg = DMatrix::from_diagonal(&q) * &gamma;
    let mut h = gamma.transpose() * &qg * 2.0;
    for j in 0..n {
        h[(2 * j, 2 * j)] += 2.0 * cfg.r_v;
        h[(2 * j + 1, 2 * j + 1)] += 2.0 * cfg.r_omega;
    }
    let g = qg.transpose() * &c * 2.0;
    let lo = DVector::from_iterator(2 * n, (0..n).flat_map(|_| [cfg.v_box[0], cfg.omega_box[0]]));
    let hi = DVector::from_iterator(2 * n, (0..n).flat_map(|_| [cfg.v_box[1], cfg.omega_box[1]]));
    let qp = BoxQp { h, g, lo, hi };

    let (u, iterations, residual) = qp.solve(ubar_vec, cfg.max_iterations, cfg.tolerance);
    if !(residual <= cfg.tolerance) {
        return Err(Error::Infeasible {
            iterations,
            residual,
        });
    }
    Ok(MpcSolution {
        inputs: (0..n)
            .map(|k| BodyTwist::new(u[2 * k], u[2 * k + 1]))
            .collect(),
        iterations,
        kkt_residual: residual,
    })
}

/// First input of the horizon solution.
pub fn nmpc_step(state: &RobotState, reference: &[Pose2D], cfg: &MPCConfig) -> Result<BodyTwist> {
    Ok(nmpc_solve(state, reference, cfg, None)?.inputs[0])
}
