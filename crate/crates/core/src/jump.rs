//! Continuous-time jump processes with slowly varying rate matrices.
//!
//! `G = (Pi - Q)^{-1}` plays the role of the fundamental matrix. The exact
//! oracle integrates the forward equation `mu' = mu Q(s)` with classical RK4.

use std::fmt;
use std::ops::Deref;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{ctmc_stationary, dot, inverse, is_primitive, Matrix, RowVec};
use crate::model::{Expansion, StochasticMatrix, STOCHASTIC_TOL};

/// Generator with nonnegative off-diagonal rates and zero row sums.
#[derive(Clone, Debug, PartialEq)]
pub struct RateMatrix(Matrix);

impl RateMatrix {
    pub fn new(q: Matrix) -> Result<RateMatrix> {
        if !q.is_finite() {
            return Err(Error::NotRateMatrix { row: 0, detail: "has non-finite entries".into() });
        }
        for i in 0..q.dim() {
            for (j, &v) in q.row(i).iter().enumerate() {
                if i != j && v < -STOCHASTIC_TOL {
                    return Err(Error::NotRateMatrix { row: i, detail: format!("has negative rate {v:e} to {j}") });
                }
            }
            let s: f64 = q.row(i).iter().sum();
            if s.abs() > STOCHASTIC_TOL {
                return Err(Error::NotRateMatrix { row: i, detail: format!("sums to {s:e}") });
            }
        }
        Ok(RateMatrix(q))
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    /// `max_x |Q(x,x)|`.
    pub fn max_exit_rate(&self) -> f64 {
        (0..self.0.dim()).fold(0.0, |m, i| m.max(self.0[(i, i)].abs()))
    }
}

impl Deref for RateMatrix {
    type Target = Matrix;
    fn deref(&self) -> &Matrix {
        &self.0
    }
}

/// `lambda = ||Q|| / 2 + 1`, which leaves a positive diagonal in `I + Q / lambda`.
pub fn default_lambda(q: &RateMatrix) -> f64 {
    0.5 * q.max_row_sum() + 1.0
}

/// `R = I + Q / lam`.
pub fn uniformize(q: &RateMatrix, lam: f64) -> Result<StochasticMatrix> {
    if !(lam > 0.0 && lam.is_finite()) {
        return Err(Error::InvalidArgument(format!("uniformization rate must be positive, got {lam}")));
    }
    StochasticMatrix::new(Matrix::identity(q.dim()).add_scaled(1.0 / lam, q))
}

/// `Q(t - u) ~ Q + F2 u^2 / 2 - F1 u` near the evaluation time `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct RateDriftModel {
    pub base: RateMatrix,
    pub f1: Matrix,
    pub f2: Option<Matrix>,
}

impl RateDriftModel {
    pub fn new(base: RateMatrix, f1: Matrix, f2: Option<Matrix>) -> Result<RateDriftModel> {
        let n = base.dim();
        if f1.dim() != n || f2.as_ref().is_some_and(|m| m.dim() != n) {
            return Err(Error::Dimension("rate drift matrices must match the base".into()));
        }
        for (name, m) in [("F1", Some(&f1)), ("F2", f2.as_ref())] {
            if let Some(m) = m {
                if let Some((i, s)) = m.row_sums().into_iter().enumerate().find(|(_, s)| s.abs() > STOCHASTIC_TOL) {
                    return Err(Error::InvalidArgument(format!("{name} row {i} sums to {s:e}, expected 0")));
                }
            }
        }
        Ok(RateDriftModel { base, f1, f2 })
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn f2(&self) -> Result<&Matrix> {
        self.f2.as_ref().ok_or(Error::MissingSecondOrder("F2"))
    }

    /// Multiplies `F1` by `c` and `F2` by `c^2`.
    pub fn rescaled(&self, c: f64) -> RateDriftModel {
        RateDriftModel {
            base: self.base.clone(),
            f1: self.f1.scaled(c),
            f2: self.f2.as_ref().map(|m| m.scaled(c * c)),
        }
    }

    /// Path `Q(s) = Q + (s - t) F1 + (s - t)^2 / 2 F2` on `[t - window, t]`,
    /// frozen at `s = t - window` before that.
    pub fn ramp_path(&self, t: f64, window: f64) -> RatePath {
        let m = self.clone();
        RatePath::from_fn(self.dim(), t, move |s| {
            let d = s.max(t - window) - t;
            let mut q = m.base.add_scaled(d, &m.f1);
            if let Some(f2) = &m.f2 {
                q = q.add_scaled(0.5 * d * d, f2);
            }
            RateMatrix::new(q)
        })
    }
}

type RateProvider = Arc<dyn Fn(f64) -> Result<RateMatrix> + Send + Sync>;

/// Rate matrices `s -> Q(s)` on `[0, horizon]`.
#[derive(Clone)]
pub struct RatePath {
    provider: RateProvider,
    horizon: f64,
    dim: usize,
}

impl fmt::Debug for RatePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RatePath").field("dim", &self.dim).field("horizon", &self.horizon).finish()
    }
}

impl RatePath {
    pub fn from_fn<F>(dim: usize, horizon: f64, f: F) -> RatePath
    where
        F: Fn(f64) -> Result<RateMatrix> + Send + Sync + 'static,
    {
        RatePath { provider: Arc::new(f), horizon, dim }
    }

    pub fn constant(q: RateMatrix, horizon: f64) -> RatePath {
        let dim = q.dim();
        RatePath::from_fn(dim, horizon, move |_| Ok(q.clone()))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn get(&self, s: f64) -> Result<RateMatrix> {
        if s < 0.0 || s > self.horizon * (1.0 + 1e-12) {
            return Err(Error::InvalidArgument(format!("time {s} outside [0, {}]", self.horizon)));
        }
        let q = (self.provider)(s)?;
        if q.dim() != self.dim {
            return Err(Error::Dimension(format!("Q({s}) has {} states, expected {}", q.dim(), self.dim)));
        }
        Ok(q)
    }
}

/// Stationary law and `G = (Pi - Q)^{-1}` of an irreducible generator.
fn ergodic(q: &RateMatrix) -> Result<(RowVec, Matrix)> {
    let r = uniformize(q, default_lambda(q))?;
    if !is_primitive(&r) {
        return Err(Error::NotIrreducible("rate matrix is reducible".into()));
    }
    let pi = ctmc_stationary(q)?;
    let g = inverse(&(&Matrix::rank_one(&pi) - q.matrix()))?;
    Ok((pi, g))
}

fn check_reward(rm: &RateDriftModel, r: &[f64]) -> Result<()> {
    if r.len() != rm.dim() {
        return Err(Error::Dimension(format!("reward has {} states, generator has {}", r.len(), rm.dim())));
    }
    Ok(())
}

/// `pi r - pi F1 G^2 r`.
pub fn jump_first(rm: &RateDriftModel, r: &[f64]) -> Result<Expansion> {
    check_reward(rm, r)?;
    let (pi, g) = ergodic(&rm.base)?;
    let g2r = g.mul_vec(&g.mul_vec(r));
    Ok(Expansion::new(vec![("order0", dot(&pi, r)), ("order1", -dot(&rm.f1.left_mul(&pi), &g2r))]))
}

/// Weight on `pi F2 G^3 r` in the second-order expansion.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum JumpForm {
    /// Weight 1, from the `u^2 / 2` Taylor term integrated against the `G^3` kernel.
    #[default]
    Corrected,
    /// Weight 1/2 on the `F2` term, kept for comparison.
    HalfWeight,
}

/// `pi r - pi F1 G^2 r + c pi F2 G^3 r + pi F1 (G^2 F1 G^2 + 2 G F1 G^3) r`.
pub fn jump_second(rm: &RateDriftModel, r: &[f64], form: JumpForm) -> Result<Expansion> {
    check_reward(rm, r)?;
    let f2 = rm.f2()?;
    let (pi, g) = ergodic(&rm.base)?;
    let f1 = &rm.f1;
    let g1 = g.mul_vec(r);
    let g2 = g.mul_vec(&g1);
    let g3 = g.mul_vec(&g2);
    let pf1 = f1.left_mul(&pi);
    let weight = match form {
        JumpForm::Corrected => 1.0,
        JumpForm::HalfWeight => 0.5,
    };
    let left_g2 = g.left_mul(&g.left_mul(&pf1));
    let left_g1 = g.left_mul(&pf1);
    let cross = dot(&left_g2, &f1.mul_vec(&g2)) + 2.0 * dot(&left_g1, &f1.mul_vec(&g3));
    Ok(Expansion::new(vec![
        ("order0", dot(&pi, r)),
        ("order1", -dot(&pf1, &g2)),
        ("curvature", weight * dot(&f2.left_mul(&pi), &g3)),
        ("cross", cross),
    ]))
}

/// `pi F1 (lam Pi - Q)^{-2} r`; independent of `lam > 0`.
pub fn lambda_identity(rm: &RateDriftModel, r: &[f64], lam: f64) -> Result<f64> {
    check_reward(rm, r)?;
    let (pi, _) = ergodic(&rm.base)?;
    let a = inverse(&Matrix::rank_one(&pi).add_scaled(-1.0 / lam, rm.base.matrix()).scaled(lam))?;
    Ok(dot(&rm.f1.left_mul(&pi), &a.mul_vec(&a.mul_vec(r))))
}

/// Output of the ODE oracle.
#[derive(Clone, Debug, PartialEq)]
pub struct JumpTrace {
    pub value: f64,
    pub distribution: RowVec,
    pub steps: usize,
    /// Largest `|mu e - 1|` seen before renormalization.
    pub max_mass_drift: f64,
}

/// Default integration step for a path whose exit rates stay below `max_rate`.
pub fn default_step(max_rate: f64) -> f64 {
    if max_rate > 0.0 {
        (0.05 / max_rate).min(0.01)
    } else {
        0.01
    }
}

/// `mu(t) r` for `mu' = mu Q(s)`, `mu(0) = mu`.
pub fn exact_jump(path: &RatePath, mu: &[f64], r: &[f64], t: f64, h: f64) -> Result<f64> {
    exact_jump_trace(path, mu, r, t, h).map(|tr| tr.value)
}

pub fn exact_jump_trace(path: &RatePath, mu: &[f64], r: &[f64], t: f64, h: f64) -> Result<JumpTrace> {
    let n = path.dim();
    if mu.len() != n || r.len() != n {
        return Err(Error::Dimension("initial distribution and reward must match the path".into()));
    }
    if !(t >= 0.0 && t <= path.horizon() * (1.0 + 1e-12)) {
        return Err(Error::InvalidArgument(format!("time {t} outside [0, {}]", path.horizon())));
    }
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("step must be positive, got {h}")));
    }
    let rhs = |q: &RateMatrix, x: &[f64]| q.left_mul(x);
    let combine = |x: &[f64], c: f64, k: &[f64]| -> Vec<f64> { x.iter().zip(k).map(|(a, b)| a + c * b).collect() };

    let mut eta = mu.to_vec();
    let mut s = 0.0;
    let mut steps = 0;
    let mut drift: f64 = 0.0;
    while s < t - 1e-12 * t.max(1.0) {
        let dt = h.min(t - s);
        let (q0, qm, q1) = (path.get(s)?, path.get(s + 0.5 * dt)?, path.get(s + dt)?);
        let rate = q0.max_exit_rate().max(qm.max_exit_rate()).max(q1.max_exit_rate());
        if rate > 0.0 && h > 0.1 / rate {
            return Err(Error::StepTooLarge { h, limit: 0.1 / rate });
        }
        let k1 = rhs(&q0, &eta);
        let k2 = rhs(&qm, &combine(&eta, 0.5 * dt, &k1));
        let k3 = rhs(&qm, &combine(&eta, 0.5 * dt, &k2));
        let k4 = rhs(&q1, &combine(&eta, dt, &k3));
        for i in 0..n {
            eta[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        let min = eta.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < -1e-9 {
            return Err(Error::NegativeMass(min));
        }
        let mass: f64 = eta.iter().sum();
        drift = drift.max((mass - 1.0).abs());
        eta.iter_mut().for_each(|v| *v = v.max(0.0) / mass);
        s += dt;
        steps += 1;
    }
    Ok(JumpTrace { value: dot(&eta, r), distribution: eta, steps, max_mass_drift: drift })
}
