//! `chi_n = E r(X_n) = mu P_1 ... P_n r`: exact product oracle, the forward
//! expansion around `P_1` and the backward expansions around `P_n`.
//!
//! All expansions use `Z = (I - P + Pi)^{-1}` of the base matrix.

use crate::error::{Error, Result};
use crate::linalg::{dot, fundamental_matrix, is_primitive, stationary_distribution, ColVec, Lu, Matrix, RowVec};
use crate::model::{DriftModel, Expansion, RewardSpec, TransitionSequence};

/// Stationary law and fundamental matrix of an irreducible aperiodic chain.
#[derive(Clone, Debug)]
pub struct Ergodic {
    pub pi: RowVec,
    pub z: Matrix,
}

impl Ergodic {
    pub fn new(p: &Matrix) -> Result<Ergodic> {
        if !is_primitive(p) {
            return Err(Error::NotIrreducible(
                "no power of the base matrix is strictly positive (reducible or periodic)".into(),
            ));
        }
        let pi = stationary_distribution(p)?;
        let z = fundamental_matrix(p, &pi)?;
        Ok(Ergodic { pi, z })
    }

    /// `Z^k x`.
    pub fn z_pow(&self, x: &[f64], k: usize) -> ColVec {
        (0..k).fold(x.to_vec(), |acc, _| self.z.mul_vec(&acc))
    }
}

fn check_dims(dim: usize, reward: &RewardSpec) -> Result<()> {
    if reward.dim() != dim {
        return Err(Error::Dimension(format!("reward has {} states, chain has {dim}", reward.dim())));
    }
    Ok(())
}

/// `mu P_1 ... P_n r` by row-vector propagation.
pub fn exact_transient(seq: &TransitionSequence, reward: &RewardSpec, n: usize) -> Result<f64> {
    check_dims(seq.dim(), reward)?;
    seq.require(n)?;
    let mut eta = reward.mu.clone();
    for k in 1..=n {
        eta = seq.get(k)?.left_mul(&eta);
    }
    Ok(dot(&eta, &reward.r))
}

/// Forward expansion for `P_k ~ P + (k-1) E1`:
/// `pi r + n pi E1 Z r - pi E1 Z^2 r`.
pub fn forward_first(dm: &DriftModel, reward: &RewardSpec, n: usize) -> Result<Expansion> {
    check_dims(dm.dim(), reward)?;
    let erg = Ergodic::new(&dm.base)?;
    let row = dm.e1.left_mul(&erg.pi);
    let zr = erg.z.mul_vec(&reward.r);
    let z2r = erg.z.mul_vec(&zr);
    Ok(Expansion::new(vec![
        ("order0", dot(&erg.pi, &reward.r)),
        ("order1_n", n as f64 * dot(&row, &zr)),
        ("order1_const", -dot(&row, &z2r)),
    ]))
}

/// Backward expansion for `P_{n-k} ~ P - k E1`: `pi r - pi E1 Z^2 P r`.
/// The initial distribution does not enter.
pub fn backward_first(dm: &DriftModel, reward: &RewardSpec) -> Result<Expansion> {
    check_dims(dm.dim(), reward)?;
    let erg = Ergodic::new(&dm.base)?;
    let pr = dm.base.mul_vec(&reward.r);
    let corr = -dot(&dm.e1.left_mul(&erg.pi), &erg.z_pow(&pr, 2));
    Ok(Expansion::new(vec![("order0", dot(&erg.pi, &reward.r)), ("order1", corr)]))
}

/// Result of the two chained Poisson equations.
#[derive(Clone, Debug, PartialEq)]
pub struct PoissonCorrection {
    /// First-order correction `-pi E1 h2`.
    pub chi1: f64,
    pub h1: ColVec,
    pub h2: ColVec,
    /// `|| (I - P) h1 - (P r - (pi r) e) ||`: residual of the centered form.
    pub centered_residual: f64,
    /// `|pi h1 - pi r|`.
    pub mean_gap: f64,
}

/// Solves `(I - P + Pi) h1 = P r`, `(I - P + Pi) h2 = h1`, returns `-pi E1 h2`.
pub fn poisson_correction(p: &Matrix, e1: &Matrix, reward: &RewardSpec) -> Result<PoissonCorrection> {
    check_dims(p.dim(), reward)?;
    if !is_primitive(p) {
        return Err(Error::NotIrreducible("P_n has no strictly positive power".into()));
    }
    let n = p.dim();
    let pi = stationary_distribution(p)?;
    let a = &(&Matrix::identity(n) - p) + &Matrix::rank_one(&pi);
    let lu = Lu::new(&a)?;
    let pr = p.mul_vec(&reward.r);
    let h1 = lu.solve(&pr);
    let h2 = lu.solve(&h1);
    let chi1 = -dot(&e1.left_mul(&pi), &h2);

    let pi_r = dot(&pi, &reward.r);
    let lhs = (&Matrix::identity(n) - p).mul_vec(&h1);
    let centered_residual = lhs.iter().zip(&pr).fold(0.0_f64, |m, (l, g)| m.max((l - (g - pi_r)).abs()));
    let mean_gap = (dot(&pi, &h1) - pi_r).abs();
    Ok(PoissonCorrection { chi1, h1, h2, centered_residual, mean_gap })
}

/// Exponent of `Z` in the first-order term of the second-order backward expansion.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum BackwardForm {
    /// `-pi E1 Z^2 P r`, matching the first-order backward expansion.
    #[default]
    Squared,
    /// Single power `-pi E1 Z P r`, kept for comparison.
    Linear,
}

/// Second-order backward expansion for `P_{n-k} ~ P - k E1 + k^2/2 E2`.
pub fn backward_second(dm: &DriftModel, reward: &RewardSpec, form: BackwardForm) -> Result<Expansion> {
    check_dims(dm.dim(), reward)?;
    let e2 = dm.e2()?;
    let erg = Ergodic::new(&dm.base)?;
    let pi = &erg.pi;
    let e1 = &dm.e1;
    let pr = dm.base.mul_vec(&reward.r);
    let z1 = erg.z.mul_vec(&pr);
    let z2 = erg.z.mul_vec(&z1);
    let z3 = erg.z.mul_vec(&z2);
    let pe1 = e1.left_mul(pi);

    let order1 = -dot(&pe1, if form == BackwardForm::Squared { &z2 } else { &z1 });
    // pi E1 Z^2 E1 Z^2 P r
    let cross = dot(&erg.z.left_mul(&erg.z.left_mul(&pe1)), &e1.mul_vec(&z2));
    // (1/2 pi E2 + pi E1 Z E1) (2 Z^3 - Z^2) P r
    let mut left: Vec<f64> = e2.left_mul(pi).iter().map(|v| 0.5 * v).collect();
    let extra = e1.left_mul(&erg.z.left_mul(&pe1));
    left.iter_mut().zip(&extra).for_each(|(a, b)| *a += b);
    let tail: Vec<f64> = z3.iter().zip(&z2).map(|(a, b)| 2.0 * a - b).collect();
    let curvature = dot(&left, &tail);

    Ok(Expansion::new(vec![
        ("order0", dot(pi, &reward.r)),
        ("order1", order1),
        ("cross", cross),
        ("curvature", curvature),
    ]))
}
