//! Planar n-link revolute arm: kinematics, Lagrangian dynamics with an
//! end-effector payload, and a fixed-step semi-implicit Euler integrator.
//!
//! Joint angles are relative; the absolute angle of link `a` is
//! `θ_a = q_0 + … + q_a`. Gravity pulls along −y in the arm plane.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

pub const IK_TOL_CLOSED_FORM: f64 = 1e-6;
pub const IK_TOL_ITERATIVE: f64 = 1e-4;
pub const IK_MAX_ITERS: usize = 200;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmModel {
    pub link_lengths: Vec<f64>,
    pub link_masses: Vec<f64>,
    /// Rotational inertia of each link about its center (kg·m²).
    pub link_inertias: Vec<f64>,
    /// Viscous friction per joint (N·m·s/rad).
    pub joint_viscous_friction: f64,
    /// Point mass carried at the end-effector (kg).
    pub payload_mass: f64,
    pub gravity: f64,
    pub max_torque: f64,
    pub dt: f64,
}

impl Default for ArmModel {
    fn default() -> Self {
        Self::uniform_rods(vec![1.0, 1.0], vec![2.0, 1.5])
    }
}

impl ArmModel {
    /// Links modeled as uniform rods (`I = m·l²/12`) with the desk-scale
    /// defaults for friction, torque limit and timestep. No payload.
    pub fn uniform_rods(link_lengths: Vec<f64>, link_masses: Vec<f64>) -> Self {
        let link_inertias = link_lengths
            .iter()
            .zip(&link_masses)
            .map(|(l, m)| m * l * l / 12.0)
            .collect();
        Self {
            link_lengths,
            link_masses,
            link_inertias,
            joint_viscous_friction: 0.5,
            payload_mass: 0.0,
            gravity: 9.81,
            max_torque: 100.0,
            dt: 0.001,
        }
    }

    pub fn with_payload(mut self, payload_mass: f64) -> Self {
        self.payload_mass = payload_mass;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.link_lengths.len();
        if n == 0 {
            return Err(Error::Config("arm needs at least one link".into()));
        }
        if self.link_masses.len() != n || self.link_inertias.len() != n {
            return Err(Error::Config(format!(
                "arm has {n} link lengths but {} masses and {} inertias",
                self.link_masses.len(),
                self.link_inertias.len()
            )));
        }
        let positive = |v: &f64| *v > 0.0 && v.is_finite();
        if !self.link_lengths.iter().all(positive) || !self.link_masses.iter().all(positive) {
            return Err(Error::Config("link lengths and masses must be > 0".into()));
        }
        if !self.link_inertias.iter().all(|i| *i >= 0.0 && i.is_finite()) {
            return Err(Error::Config("link inertias must be >= 0".into()));
        }
        if !(self.payload_mass >= 0.0
            && self.joint_viscous_friction >= 0.0
            && self.gravity.is_finite()
            && self.max_torque > 0.0
            && self.dt > 0.0)
        {
            return Err(Error::Config(
                "payload, friction must be >= 0; max_torque and dt must be > 0".into(),
            ));
        }
        Ok(())
    }

    pub fn n_joints(&self) -> usize {
        self.link_lengths.len()
    }

    pub fn reach(&self) -> f64 {
        self.link_lengths.iter().sum()
    }

    /// Inner radius of the reachable annulus.
    pub fn inner_reach(&self) -> f64 {
        let longest = self.link_lengths.iter().cloned().fold(0.0, f64::max);
        (2.0 * longest - self.reach()).max(0.0)
    }

    fn absolute_angles(&self, q: &[f64]) -> Vec<f64> {
        q.iter()
            .scan(0.0, |acc, qi| {
                *acc += qi;
                Some(*acc)
            })
            .collect()
    }

    pub fn forward_kinematics(&self, q: &[f64]) -> Result<[f64; 2]> {
        check_len("joint angles", self.n_joints(), q.len())?;
        let mut p = [0.0, 0.0];
        for (theta, l) in self.absolute_angles(q).iter().zip(&self.link_lengths) {
            p[0] += l * theta.cos();
            p[1] += l * theta.sin();
        }
        Ok(p)
    }

    /// End-effector Jacobian, 2 × n.
    pub fn jacobian(&self, q: &[f64]) -> Result<DMatrix<f64>> {
        check_len("joint angles", self.n_joints(), q.len())?;
        Ok(self.body_jacobian(&self.absolute_angles(q), &self.link_lengths))
    }

    fn body_jacobian(&self, theta: &[f64], weights: &[f64]) -> DMatrix<f64> {
        let n = theta.len();
        let mut jac = DMatrix::zeros(2, n);
        let (mut sx, mut sy) = (0.0, 0.0);
        for a in (0..n).rev() {
            sx -= weights[a] * theta[a].sin();
            sy += weights[a] * theta[a].cos();
            jac[(0, a)] = sx;
            jac[(1, a)] = sy;
        }
        jac
    }

    /// Joint angles placing the end-effector at `position`.
    ///
    /// Two-link arms use the closed form on the elbow-up branch
    /// (non-positive elbow angle); longer chains use damped least squares.
    pub fn inverse_kinematics(&self, position: [f64; 2]) -> Result<Vec<f64>> {
        let r = position[0].hypot(position[1]);
        let slack = 1e-12 * self.reach();
        if !r.is_finite() || r > self.reach() + slack || r < self.inner_reach() - slack {
            return Err(Error::Unreachable {
                x: position[0],
                y: position[1],
            });
        }
        match self.n_joints() {
            1 => Ok(vec![position[1].atan2(position[0])]),
            2 => Ok(self.ik_two_link(position)),
            _ => self.ik_damped_least_squares(position),
        }
    }

    fn ik_two_link(&self, [x, y]: [f64; 2]) -> Vec<f64> {
        let (l1, l2) = (self.link_lengths[0], self.link_lengths[1]);
        let cos_elbow = ((x * x + y * y - l1 * l1 - l2 * l2) / (2.0 * l1 * l2)).clamp(-1.0, 1.0);
        let elbow = -cos_elbow.acos();
        let shoulder = y.atan2(x) - (l2 * elbow.sin()).atan2(l1 + l2 * elbow.cos());
        vec![shoulder, elbow]
    }

    fn ik_damped_least_squares(&self, target: [f64; 2]) -> Result<Vec<f64>> {
        const DAMPING: f64 = 0.05;
        let n = self.n_joints();
        let mut q = vec![0.3; n];
        let mut residual = f64::INFINITY;
        for _ in 0..IK_MAX_ITERS {
            let p = self.forward_kinematics(&q)?;
            let err = DVector::from_vec(vec![target[0] - p[0], target[1] - p[1]]);
            residual = err.norm();
            if residual < 1e-10 {
                return Ok(q);
            }
            let jac = self.jacobian(&q)?;
            let mut jjt = &jac * jac.transpose();
            for i in 0..2 {
                jjt[(i, i)] += DAMPING * DAMPING;
            }
            let step = jjt
                .lu()
                .solve(&err)
                .map(|y| jac.transpose() * y)
                .ok_or_else(|| Error::NumericalFailure("singular damped IK system".into()))?;
            for (qi, s) in q.iter_mut().zip(step.iter()) {
                *qi += s;
            }
        }
        if residual <= IK_TOL_ITERATIVE {
            Ok(q)
        } else {
            Err(Error::IkNoConvergence {
                iterations: IK_MAX_ITERS,
                residual,
            })
        }
    }

    /// Every body contributing to the dynamics: each link's center of mass,
    /// plus the payload point when present. Weights give the body position
    /// as `Σ_a w_a·(cos θ_a, sin θ_a)`.
    fn bodies(&self) -> Vec<(f64, Vec<f64>)> {
        let n = self.n_joints();
        let mut bodies = Vec::with_capacity(n + 1);
        for i in 0..n {
            let w = (0..n)
                .map(|a| match a.cmp(&i) {
                    std::cmp::Ordering::Less => self.link_lengths[a],
                    std::cmp::Ordering::Equal => 0.5 * self.link_lengths[a],
                    std::cmp::Ordering::Greater => 0.0,
                })
                .collect();
            bodies.push((self.link_masses[i], w));
        }
        if self.payload_mass > 0.0 {
            bodies.push((self.payload_mass, self.link_lengths.clone()));
        }
        bodies
    }

    /// Joint-space inertia matrix `M(q)`.
    pub fn mass_matrix(&self, q: &[f64]) -> Result<DMatrix<f64>> {
        check_len("joint angles", self.n_joints(), q.len())?;
        let n = self.n_joints();
        let theta = self.absolute_angles(q);
        let mut m = DMatrix::zeros(n, n);
        for (mass, w) in self.bodies() {
            let jac = self.body_jacobian(&theta, &w);
            m += mass * jac.transpose() * jac;
        }
        // link i spins with the sum of joint rates 0..=i
        for (i, inertia) in self.link_inertias.iter().enumerate() {
            for j in 0..=i {
                for k in 0..=i {
                    m[(j, k)] += inertia;
                }
            }
        }
        Ok(m)
    }

    /// `∂M/∂q_i` for every joint `i`.
    fn mass_matrix_derivatives(&self, theta: &[f64]) -> Vec<DMatrix<f64>> {
        let n = theta.len();
        let mut out = vec![DMatrix::zeros(n, n); n];
        for (mass, w) in self.bodies() {
            let v = self.body_jacobian(theta, &w);
            // s[l] = ∂v_j/∂q_i for max(i, j) = l
            let mut s = DMatrix::zeros(2, n);
            let (mut sx, mut sy) = (0.0, 0.0);
            for a in (0..n).rev() {
                sx -= w[a] * theta[a].cos();
                sy -= w[a] * theta[a].sin();
                s[(0, a)] = sx;
                s[(1, a)] = sy;
            }
            for (i, d) in out.iter_mut().enumerate() {
                for j in 0..n {
                    for k in 0..n {
                        let sj = s.column(i.max(j));
                        let sk = s.column(i.max(k));
                        d[(j, k)] += mass * (sj.dot(&v.column(k)) + v.column(j).dot(&sk));
                    }
                }
            }
        }
        out
    }

    /// Christoffel-consistent Coriolis/centrifugal matrix `C(q, dq)`, for
    /// which `Ṁ − 2C` is skew-symmetric.
    pub fn coriolis_matrix(&self, q: &[f64], dq: &[f64]) -> Result<DMatrix<f64>> {
        check_len("joint angles", self.n_joints(), q.len())?;
        check_len("joint velocities", self.n_joints(), dq.len())?;
        let n = self.n_joints();
        let dm = self.mass_matrix_derivatives(&self.absolute_angles(q));
        let mut c = DMatrix::zeros(n, n);
        for k in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for i in 0..n {
                    acc += 0.5 * (dm[i][(k, j)] + dm[j][(k, i)] - dm[k][(i, j)]) * dq[i];
                }
                c[(k, j)] = acc;
            }
        }
        Ok(c)
    }

    /// Coriolis and centrifugal torques `C(q, dq)·dq`.
    pub fn coriolis(&self, q: &[f64], dq: &[f64]) -> Result<Vec<f64>> {
        let c = self.coriolis_matrix(q, dq)?;
        Ok((c * DVector::from_column_slice(dq)).iter().cloned().collect())
    }

    /// Torques needed to hold the arm still against gravity, `∂V/∂q`.
    pub fn gravity_torque(&self, q: &[f64]) -> Result<Vec<f64>> {
        check_len("joint angles", self.n_joints(), q.len())?;
        let theta = self.absolute_angles(q);
        let mut g = vec![0.0; self.n_joints()];
        for (mass, w) in self.bodies() {
            let jac = self.body_jacobian(&theta, &w);
            for (i, gi) in g.iter_mut().enumerate() {
                *gi += mass * self.gravity * jac[(1, i)];
            }
        }
        Ok(g)
    }

    pub fn potential_energy(&self, q: &[f64]) -> Result<f64> {
        check_len("joint angles", self.n_joints(), q.len())?;
        let theta = self.absolute_angles(q);
        Ok(self
            .bodies()
            .iter()
            .map(|(mass, w)| {
                let y: f64 = w.iter().zip(&theta).map(|(wa, t)| wa * t.sin()).sum();
                mass * self.gravity * y
            })
            .sum())
    }

    pub fn kinetic_energy(&self, state: &ArmState) -> Result<f64> {
        let m = self.mass_matrix(&state.q)?;
        let v = DVector::from_column_slice(&state.dq);
        Ok(0.5 * v.dot(&(m * &v)))
    }

    /// One semi-implicit Euler step under `torques`.
    ///
    /// Solves `M·ddq = τ − C·dq − g − b·dq`, then updates velocity before
    /// position.
    pub fn dynamics_step(&self, state: &ArmState, torques: &[f64]) -> Result<ArmState> {
        let n = self.n_joints();
        check_len("torques", n, torques.len())?;
        check_len("joint velocities", n, state.dq.len())?;
        let m = self.mass_matrix(&state.q)?;
        let h = self.coriolis(&state.q, &state.dq)?;
        let g = self.gravity_torque(&state.q)?;
        let rhs = DVector::from_fn(n, |i, _| {
            torques[i] - h[i] - g[i] - self.joint_viscous_friction * state.dq[i]
        });
        let ddq = m
            .cholesky()
            .map(|c| c.solve(&rhs))
            .ok_or(Error::Diverged { step: 0 })?;
        let mut next = state.clone();
        for i in 0..n {
            next.dq[i] += ddq[i] * self.dt;
            next.q[i] += next.dq[i] * self.dt;
        }
        if !next.is_finite() {
            return Err(Error::Diverged { step: 0 });
        }
        Ok(next)
    }

    /// Clamps each torque to `±max_torque`.
    pub fn clamp_torques(&self, torques: &mut [f64]) {
        for t in torques {
            *t = t.clamp(-self.max_torque, self.max_torque);
        }
    }

    pub fn distance_to(&self, state: &ArmState, target: &Target) -> Result<f64> {
        let p = self.forward_kinematics(&state.q)?;
        Ok((p[0] - target.position[0]).hypot(p[1] - target.position[1]))
    }

    /// Whether the end-effector is within `tol_frac · reach` of the target
    /// (boundary inclusive).
    pub fn reached(&self, state: &ArmState, target: &Target, tol_frac: f64) -> bool {
        self.distance_to(state, target)
            .map(|d| d <= tol_frac * self.reach())
            .unwrap_or(false)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmState {
    pub q: Vec<f64>,
    pub dq: Vec<f64>,
}

impl ArmState {
    pub fn at_rest(q: Vec<f64>) -> Self {
        let dq = vec![0.0; q.len()];
        Self { q, dq }
    }

    pub fn is_finite(&self) -> bool {
        self.q.iter().chain(&self.dq).all(|v| v.is_finite())
    }
}

/// A reach goal: a workspace point and the joint angles that realize it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub position: [f64; 2],
    pub q_target: Vec<f64>,
    /// 1-based ordinal within the scenario.
    pub index: usize,
}

impl Target {
    pub fn solve(model: &ArmModel, position: [f64; 2], index: usize) -> Result<Self> {
        let q_target = model.inverse_kinematics(position)?;
        let p = model.forward_kinematics(&q_target)?;
        let tol = if model.n_joints() <= 2 {
            IK_TOL_CLOSED_FORM
        } else {
            IK_TOL_ITERATIVE
        };
        let residual = (p[0] - position[0]).hypot(p[1] - position[1]);
        if residual > tol {
            return Err(Error::IkNoConvergence {
                iterations: 0,
                residual,
            });
        }
        Ok(Self {
            position,
            q_target,
            index,
        })
    }
}
