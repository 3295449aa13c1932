//! Reward accumulated until the chain first leaves a set `C` of transient
//! states: `delta = sum_{j>=0} mu B_1 ... B_j r_{j+1}`, where `B_k` is the
//! `C x C` block of `P_k` and `r_k(x) = r(x) + sum_{y not in C} P_k(x,y) r(y)`.

use crate::error::{Error, Result};
use crate::linalg::{col_max, contraction_power, dot, row_l1, ColVec, Lu, Matrix, RowVec};
use crate::model::{DriftModel, Expansion, TransitionSequence};

/// Transient set, reward on the full state space and initial law on `C`.
#[derive(Clone, Debug, PartialEq)]
pub struct AbsorbingSpec {
    transient: Vec<usize>,
    exit: Vec<usize>,
    r: ColVec,
    mu: RowVec,
}

impl AbsorbingSpec {
    /// `mu` is given on the full state space and must put all its mass on `C`.
    pub fn new(transient: &[usize], r: ColVec, mu: &[f64]) -> Result<AbsorbingSpec> {
        let n = r.len();
        if mu.len() != n {
            return Err(Error::Dimension(format!("mu has {} states, reward has {n}", mu.len())));
        }
        let mut c = transient.to_vec();
        c.sort_unstable();
        c.dedup();
        if c.is_empty() || c.len() >= n || c.iter().any(|&x| x >= n) {
            return Err(Error::InvalidArgument("C must be a nonempty proper subset of the states".into()));
        }
        let exit: Vec<usize> = (0..n).filter(|x| c.binary_search(x).is_err()).collect();
        let outside: f64 = exit.iter().map(|&y| mu[y].abs()).sum();
        let inside: f64 = c.iter().map(|&x| mu[x]).sum();
        if outside > 1e-12 || (inside - 1.0).abs() > 1e-9 || c.iter().any(|&x| mu[x] < 0.0) {
            return Err(Error::InvalidArgument("mu must be a probability supported on C".into()));
        }
        let mu_c = c.iter().map(|&x| mu[x]).collect();
        Ok(AbsorbingSpec { transient: c, exit, r, mu: mu_c })
    }

    pub fn transient(&self) -> &[usize] {
        &self.transient
    }

    /// `mu` restricted to `C`.
    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn dim(&self) -> usize {
        self.r.len()
    }
}

/// `C x C` block and the effective one-step reward on `C`.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockData {
    pub b: Matrix,
    pub r_eff: ColVec,
}

/// Block of `m` on `C`, plus `sum_{y not in C} m(x,y) r(y)` for `x` in `C`.
fn block_and_outflow(m: &Matrix, spec: &AbsorbingSpec) -> (Matrix, ColVec) {
    let b = m.submatrix(&spec.transient);
    let out = spec
        .transient
        .iter()
        .map(|&x| spec.exit.iter().map(|&y| m[(x, y)] * spec.r[y]).sum())
        .collect();
    (b, out)
}

pub fn build_block(p: &Matrix, spec: &AbsorbingSpec) -> Result<BlockData> {
    if p.dim() != spec.dim() {
        return Err(Error::Dimension("chain and reward sizes differ".into()));
    }
    let (b, out) = block_and_outflow(p, spec);
    let r_eff = spec.transient.iter().zip(out).map(|(&x, o)| spec.r[x] + o).collect();
    Ok(BlockData { b, r_eff })
}

fn contraction_limit(c: usize) -> usize {
    4 * c
}

fn contracting_lu(b: &Matrix) -> Result<Lu> {
    let limit = contraction_limit(b.dim());
    if contraction_power(b, limit).is_none() {
        return Err(Error::NotContracting(limit));
    }
    Lu::new(&Matrix::identity(b.dim()).add_scaled(-1.0, b))
}

/// `w = (I - B)^{-1} r_eff`, `delta0 = mu w`; `mu` lives on `C`.
pub fn stationary_hitting(block: &BlockData, mu: &[f64]) -> Result<(ColVec, f64)> {
    let lu = contracting_lu(&block.b)?;
    let w = lu.solve(&block.r_eff);
    let d0 = dot(mu, &w);
    Ok((w, d0))
}

/// Truncated path sum, stopped once the envelope built from verified window
/// contractions `||B_{k+1} ... B_{k+l}|| <= beta < 1` drops below `tol`.
pub fn exact_hitting(seq: &TransitionSequence, spec: &AbsorbingSpec, tol: f64) -> Result<f64> {
    const MAX_STEPS: usize = 10_000_000;
    if seq.dim() != spec.dim() {
        return Err(Error::Dimension("sequence and reward sizes differ".into()));
    }
    let c = spec.transient.len();
    let first = build_block(seq.get(1)?.matrix(), spec)?;
    let limit = contraction_limit(c);
    let l = contraction_power(&first.b, limit).ok_or(Error::NotContracting(limit))?;
    let r_bound = 2.0 * col_max(&spec.r);

    let mut eta = spec.mu.clone();
    let mut total = 0.0;
    let mut beta: f64 = 0.0;
    let mut window = Matrix::identity(c);
    let mut current = first;
    let mut j = 0;
    loop {
        total += dot(&eta, &current.r_eff);
        let mass = row_l1(&eta);
        if j > 0 && j % l == 0 {
            let wn = window.max_row_sum();
            if wn >= 1.0 {
                return Err(Error::NotContracting(l));
            }
            beta = beta.max(wn);
            window = Matrix::identity(c);
            let envelope = mass * r_bound * l as f64 * (1.0 + 1.0 / (1.0 - beta));
            if envelope <= tol {
                return Ok(total);
            }
        }
        if j >= MAX_STEPS {
            return Err(Error::NotContracting(l));
        }
        eta = current.b.left_mul(&eta);
        window = window.matmul(&current.b);
        j += 1;
        current = build_block(seq.get(j + 1)?.matrix(), spec)?;
    }
}

/// First-order expansion: `mu (I-B)^{-1} r~` plus the block-drift term
/// `mu B (I-B)^{-2} B' (I-B)^{-1} r~` and the exit-reward term `mu B (I-B)^{-2} r~'`.
pub fn first_order_hitting(dm: &DriftModel, spec: &AbsorbingSpec) -> Result<Expansion> {
    let block = build_block(&dm.base, spec)?;
    let (b1, r1) = block_and_outflow(&dm.e1, spec);
    let lu = contracting_lu(&block.b)?;
    let mu = &spec.mu;
    let w = lu.solve(&block.r_eff);
    // Row vector mu B (I-B)^{-2}.
    let rho = lu.solve_left(&lu.solve_left(&block.b.left_mul(mu)));
    Ok(Expansion::new(vec![
        ("order0", dot(mu, &w)),
        ("block_drift", dot(&rho, &b1.mul_vec(&w))),
        ("exit_drift", dot(&rho, &r1)),
    ]))
}
