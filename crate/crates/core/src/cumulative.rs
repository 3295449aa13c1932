//! Expected cumulative reward `tau_n = E sum_{j<n} r(X_j)`.

use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};
use crate::model::{DriftModel, Expansion, RewardSpec, TransitionSequence};
use crate::transient::Ergodic;

/// `sum_{j<n} mu P_1 ... P_j r` in one pass.
pub fn exact_cumulative(seq: &TransitionSequence, reward: &RewardSpec, n: usize) -> Result<f64> {
    if seq.dim() != reward.dim() {
        return Err(Error::Dimension("sequence and reward sizes differ".into()));
    }
    seq.require(n.saturating_sub(1))?;
    let mut eta = reward.mu.clone();
    let mut total = 0.0;
    for j in 0..n {
        total += dot(&eta, &reward.r);
        if j + 1 < n {
            eta = seq.get(j + 1)?.left_mul(&eta);
        }
    }
    Ok(total)
}

/// Which weight multiplies the initial-transient drift term.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum CumulativeForm {
    /// `mu (P - Pi) Z^2 E1 Z r`.
    #[default]
    Centered,
    /// Uncentered `mu P Z^2 E1 Z r`, kept for comparison.
    Uncentered,
}

/// First-order expansion for `P_k ~ P + (k-1) E1`, grouped by powers of `n`.
pub fn cumulative_first(dm: &DriftModel, reward: &RewardSpec, n: usize, form: CumulativeForm) -> Result<Expansion> {
    if dm.dim() != reward.dim() {
        return Err(Error::Dimension("drift model and reward sizes differ".into()));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("horizon n must be at least 1".into()));
    }
    let erg = Ergodic::new(&dm.base)?;
    let (pi, z, mu, r) = (&erg.pi, &erg.z, &reward.mu, &reward.r);
    let nf = n as f64;
    let zr = z.mul_vec(r);
    let pr = dm.base.mul_vec(r);
    let z2pr = erg.z_pow(&pr, 2);
    let z3pr = z.mul_vec(&z2pr);
    let pe1 = dm.e1.left_mul(pi);

    let weight = match form {
        CumulativeForm::Centered => dm.base.matrix() - &Matrix::rank_one(pi),
        CumulativeForm::Uncentered => dm.base.matrix().clone(),
    };
    let row = z.left_mul(&z.left_mul(&weight.left_mul(mu)));
    let initial_drift = dot(&row, &dm.e1.mul_vec(&zr));

    Ok(Expansion::new(vec![
        ("stationary_n", (nf - 1.0) * dot(pi, r)),
        ("initial", dot(mu, &zr)),
        ("initial_drift", initial_drift),
        ("drift_n2", 0.5 * (nf - 1.0) * (nf - 2.0) * dot(&pe1, &zr)),
        ("drift_n", -(nf - 1.0) * dot(&pe1, &z2pr)),
        ("drift_const", dot(&pe1, &z3pr)),
    ]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::stationary_distribution;
    use crate::model::{drift_sequence, StochasticMatrix};

    fn chain() -> StochasticMatrix {
        StochasticMatrix::new(Matrix::from_rows(&[vec![0.5, 0.5], vec![0.2, 0.8]]).unwrap()).unwrap()
    }

    #[test]
    fn exact_examples() {
        let seq = TransitionSequence::constant(chain());
        let rw = RewardSpec::new(vec![2.0, 5.0], vec![0.3, 0.7]).unwrap();
        assert!((exact_cumulative(&seq, &rw, 1).unwrap() - 4.1).abs() < 1e-15);
        let ones = RewardSpec::new(vec![1.0, 1.0], vec![0.3, 0.7]).unwrap();
        assert!((exact_cumulative(&seq, &ones, 17).unwrap() - 17.0).abs() < 1e-12);
    }

    #[test]
    fn exact_matches_term_by_term_sum() {
        let e1 = Matrix::from_rows(&[vec![0.003, -0.003], vec![-0.002, 0.002]]).unwrap();
        let dm = DriftModel::new(chain(), e1, None).unwrap();
        let seq = drift_sequence(&dm, 60);
        let rw = RewardSpec::new(vec![1.0, -1.0], vec![1.0, 0.0]).unwrap();
        let mut direct = 0.0;
        for j in 0..40 {
            let mut prod = Matrix::identity(2);
            for k in 1..=j {
                prod = prod.matmul(&seq.get(k).unwrap());
            }
            direct += dot(&prod.left_mul(&rw.mu), &rw.r);
        }
        assert!((exact_cumulative(&seq, &rw, 40).unwrap() - direct).abs() < 1e-12);
    }

    #[test]
    fn zero_drift_is_stationary_sum() {
        let rw = RewardSpec::new(vec![2.0, 5.0], vec![1.0, 0.0]).unwrap();
        let dm = DriftModel::stationary(chain());
        let ex = cumulative_first(&dm, &rw, 30, CumulativeForm::Centered).unwrap();
        let exact = exact_cumulative(&TransitionSequence::constant(chain()), &rw, 30).unwrap();
        assert!((ex.value() - exact).abs() < 1e-10);
        let pi = stationary_distribution(&chain()).unwrap();
        let pi_r = dot(&pi, &rw.r);
        assert!((ex.term("stationary_n").unwrap() - 29.0 * pi_r).abs() < 1e-12);
    }

    #[test]
    fn constant_reward_gives_n() {
        let e1 = Matrix::from_rows(&[vec![0.01, -0.01], vec![-0.02, 0.02]]).unwrap();
        let dm = DriftModel::new(chain(), e1, None).unwrap();
        let ones = RewardSpec::new(vec![1.0, 1.0], vec![0.4, 0.6]).unwrap();
        for form in [CumulativeForm::Centered, CumulativeForm::Uncentered] {
            let v = cumulative_first(&dm, &ones, 25, form).unwrap().value();
            assert!((v - 25.0).abs() < 1e-10);
        }
    }
}
