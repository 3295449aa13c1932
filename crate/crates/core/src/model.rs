//! Transition-law families: validated stochastic matrices, indexed sequences
//! `k -> P_k`, drift models `(P, E1, E2)` and finite-difference estimators.
//!
//! A drift model stores the derivative matrices already multiplied by the
//! drift rate (`E1 = eps P'`, `E2 = eps^2 P''`), so no free `eps` remains.

use std::fmt;
use std::ops::Deref;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{ColVec, Matrix, RowVec};

/// Default tolerance for row sums and negative dust.
pub const STOCHASTIC_TOL: f64 = 1e-9;

/// Row-stochastic square matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct StochasticMatrix(Matrix);

impl StochasticMatrix {
    /// Accepts `a` when every row sums to 1 within `tol` and no entry is below
    /// `-tol`; small negative entries are clamped to zero.
    pub fn validate(a: Matrix, tol: f64) -> Result<StochasticMatrix> {
        let n = a.dim();
        let mut a = a;
        for i in 0..n {
            for j in 0..n {
                let v = a[(i, j)];
                if !v.is_finite() {
                    return Err(Error::NotStochastic { row: i, detail: format!("has entry {v}") });
                }
                if v < -tol {
                    return Err(Error::NotStochastic {
                        row: i,
                        detail: format!("has negative entry {v:e} in column {j}"),
                    });
                }
                if v < 0.0 {
                    a[(i, j)] = 0.0;
                }
            }
            let s: f64 = a.row(i).iter().sum();
            if (s - 1.0).abs() > tol {
                return Err(Error::NotStochastic { row: i, detail: format!("sums to {s}") });
            }
        }
        Ok(StochasticMatrix(a))
    }

    pub fn new(a: Matrix) -> Result<StochasticMatrix> {
        StochasticMatrix::validate(a, STOCHASTIC_TOL)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }
}

impl Deref for StochasticMatrix {
    type Target = Matrix;
    fn deref(&self) -> &Matrix {
        &self.0
    }
}

type Provider = dyn Fn(usize) -> Result<StochasticMatrix> + Send + Sync;

/// Indexed family `k -> P_k`, `k >= 1`, with an optional horizon.
#[derive(Clone)]
pub struct TransitionSequence {
    provider: Arc<Provider>,
    horizon: Option<usize>,
    dim: usize,
}

impl fmt::Debug for TransitionSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TransitionSequence")
            .field("dim", &self.dim)
            .field("horizon", &self.horizon)
            .finish()
    }
}

impl TransitionSequence {
    /// The provider must be a pure function of `k` returning matrices of size `dim`.
    pub fn from_fn<F>(dim: usize, horizon: Option<usize>, f: F) -> TransitionSequence
    where
        F: Fn(usize) -> Result<StochasticMatrix> + Send + Sync + 'static,
    {
        TransitionSequence { provider: Arc::new(f), horizon, dim }
    }

    pub fn constant(p: StochasticMatrix) -> TransitionSequence {
        let dim = p.dim();
        TransitionSequence::from_fn(dim, None, move |_| Ok(p.clone()))
    }

    /// `P_1, ..., P_len` from an explicit list.
    pub fn from_list(list: Vec<StochasticMatrix>) -> Result<TransitionSequence> {
        let dim = list.first().map(|p| p.dim()).ok_or_else(|| {
            Error::InvalidArgument("sequence list is empty".into())
        })?;
        if let Some(k) = list.iter().position(|p| p.dim() != dim) {
            return Err(Error::Dimension(format!("P_{} has a different size", k + 1)));
        }
        let len = list.len();
        Ok(TransitionSequence::from_fn(dim, Some(len), move |k| Ok(list[k - 1].clone())))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn horizon(&self) -> Option<usize> {
        self.horizon
    }

    /// Errors unless the sequence is defined through index `n`.
    pub fn require(&self, n: usize) -> Result<()> {
        match self.horizon {
            Some(h) if h < n => Err(Error::HorizonExceeded { needed: n, available: h }),
            _ => Ok(()),
        }
    }

    pub fn get(&self, k: usize) -> Result<StochasticMatrix> {
        if k == 0 {
            return Err(Error::InvalidArgument("sequence indices start at 1".into()));
        }
        self.require(k)?;
        let p = (self.provider)(k)?;
        if p.dim() != self.dim {
            return Err(Error::Dimension(format!("P_{k} has size {}, expected {}", p.dim(), self.dim)));
        }
        Ok(p)
    }
}

/// Slowly changing family `P_k ~ P + (k-1) E1 + (k-1)^2/2 E2`.
#[derive(Clone, Debug, PartialEq)]
pub struct DriftModel {
    pub base: StochasticMatrix,
    pub e1: Matrix,
    pub e2: Option<Matrix>,
}

fn check_zero_row_sums(m: &Matrix, name: &str, tol: f64) -> Result<()> {
    for (i, s) in m.row_sums().iter().enumerate() {
        if s.abs() > tol {
            return Err(Error::InvalidArgument(format!("{name} row {i} sums to {s:e}, expected 0")));
        }
    }
    Ok(())
}

impl DriftModel {
    pub fn new(base: StochasticMatrix, e1: Matrix, e2: Option<Matrix>) -> Result<DriftModel> {
        let n = base.dim();
        if e1.dim() != n || e2.as_ref().is_some_and(|m| m.dim() != n) {
            return Err(Error::Dimension("drift matrices must match the base matrix".into()));
        }
        check_zero_row_sums(&e1, "E1", STOCHASTIC_TOL)?;
        if let Some(m) = &e2 {
            check_zero_row_sums(m, "E2", STOCHASTIC_TOL)?;
        }
        Ok(DriftModel { base, e1, e2 })
    }

    /// No drift at all.
    pub fn stationary(base: StochasticMatrix) -> DriftModel {
        let n = base.dim();
        DriftModel { base, e1: Matrix::zeros(n), e2: Some(Matrix::zeros(n)) }
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn e2(&self) -> Result<&Matrix> {
        self.e2.as_ref().ok_or(Error::MissingSecondOrder("E2"))
    }

    /// Multiplies `E1` by `c` and `E2` by `c^2`.
    pub fn rescaled(&self, c: f64) -> DriftModel {
        DriftModel {
            base: self.base.clone(),
            e1: self.e1.scaled(c),
            e2: self.e2.as_ref().map(|m| m.scaled(c * c)),
        }
    }
}

/// Reward column and initial distribution.
#[derive(Clone, Debug, PartialEq)]
pub struct RewardSpec {
    pub r: ColVec,
    pub mu: RowVec,
}

impl RewardSpec {
    pub fn new(r: ColVec, mu: RowVec) -> Result<RewardSpec> {
        if r.len() != mu.len() {
            return Err(Error::Dimension(format!("reward has {} states, mu has {}", r.len(), mu.len())));
        }
        if let Some(i) = mu.iter().position(|v| *v < 0.0 || !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("mu({i}) = {} is not a probability", mu[i])));
        }
        let total: f64 = mu.iter().sum();
        if (total - 1.0).abs() > STOCHASTIC_TOL {
            return Err(Error::InvalidArgument(format!("mu sums to {total}, expected 1")));
        }
        if r.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("reward has a non-finite entry".into()));
        }
        Ok(RewardSpec { r, mu })
    }

    pub fn dim(&self) -> usize {
        self.r.len()
    }
}

/// Named breakdown of an approximation; the value is the sum of the terms.
#[derive(Clone, Debug, PartialEq)]
pub struct Expansion {
    pub terms: Vec<(&'static str, f64)>,
}

impl Expansion {
    pub fn new(terms: Vec<(&'static str, f64)>) -> Expansion {
        Expansion { terms }
    }

    pub fn value(&self) -> f64 {
        self.terms.iter().map(|(_, v)| v).sum()
    }

    pub fn term(&self, name: &str) -> Option<f64> {
        self.terms.iter().find(|(n, _)| *n == name).map(|(_, v)| *v)
    }
}

/// `E1 = (P_j - P_1) / (j - 1)`.
pub fn fd_first(seq: &TransitionSequence, j: usize) -> Result<Matrix> {
    if j < 2 {
        return Err(Error::InvalidArgument(format!("finite-difference index j = {j} must be >= 2")));
    }
    let p1 = seq.get(1)?;
    let pj = seq.get(j)?;
    Ok((pj.matrix() - p1.matrix()).scaled(1.0 / (j - 1) as f64))
}

/// `E2 = (P_{2j-1} - 2 P_j + P_1) / (j - 1)^2`.
pub fn fd_second(seq: &TransitionSequence, j: usize) -> Result<Matrix> {
    if j < 2 {
        return Err(Error::InvalidArgument(format!("finite-difference index j = {j} must be >= 2")));
    }
    let p1 = seq.get(1)?;
    let pj = seq.get(j)?;
    let pl = seq.get(2 * j - 1)?;
    let h = (j - 1) as f64;
    Ok(pl.matrix().add_scaled(-2.0, pj.matrix()).add_scaled(1.0, p1.matrix()).scaled(1.0 / (h * h)))
}

/// `j = ceil(1 / (1 - e^{-alpha}))`.
pub fn fd_index_for_discount(alpha: f64) -> usize {
    let j = (1.0 / (1.0 - (-alpha).exp())).ceil() as usize;
    j.max(2)
}

/// Drift model fitted to a sequence by finite differences at index `j`.
pub fn fd_drift_model(seq: &TransitionSequence, j: usize, second: bool) -> Result<DriftModel> {
    let base = seq.get(1)?;
    let e1 = fd_first(seq, j)?;
    let e2 = if second { Some(fd_second(seq, j)?) } else { None };
    DriftModel::new(base, e1, e2)
}

/// `P_k = P + (k-1) E1 + (k-1)^2/2 E2` for `k <= k_max`, each validated.
pub fn drift_sequence(dm: &DriftModel, k_max: usize) -> TransitionSequence {
    let dm = dm.clone();
    TransitionSequence::from_fn(dm.dim(), Some(k_max), move |k| drift_matrix(&dm, (k - 1) as f64, k))
}

/// `P + t E1 + t^2/2 E2`, validated and tagged with index `k` on failure.
pub fn drift_matrix(dm: &DriftModel, t: f64, k: usize) -> Result<StochasticMatrix> {
    let mut m = dm.base.matrix().add_scaled(t, &dm.e1);
    if let Some(e2) = &dm.e2 {
        m = m.add_scaled(0.5 * t * t, e2);
    }
    StochasticMatrix::new(m).map_err(|e| match e {
        Error::NotStochastic { row, detail } => Error::NotStochasticAt { k, row, detail },
        other => other,
    })
}
