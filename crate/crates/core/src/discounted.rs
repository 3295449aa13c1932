//! Infinite-horizon discounted reward
//! `kappa = sum_j e^{-alpha j} mu P_1 ... P_j r`.
//!
//! With `q = e^{-alpha}` and `A = I - q P`, every approximation below is a
//! chain of solves against the single factorization of `A`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{col_max, dot, ColVec, Lu, Matrix};
use crate::model::{DriftModel, Expansion, RewardSpec, TransitionSequence};

/// Tail tolerance used to truncate the sums of the general expansions.
pub const GENERAL_TAIL_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct DiscountSpec {
    pub alpha: f64,
    pub reward: RewardSpec,
}

impl DiscountSpec {
    pub fn new(alpha: f64, reward: RewardSpec) -> Result<DiscountSpec> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidArgument(format!("discount rate alpha = {alpha} must be positive")));
        }
        Ok(DiscountSpec { alpha, reward })
    }

    /// One-period discount factor `e^{-alpha}`.
    pub fn q(&self) -> f64 {
        (-self.alpha).exp()
    }
}

type Coeff = Arc<dyn Fn(usize) -> f64 + Send + Sync>;

/// Coefficient sequences `a_{k1}`, `a_{k2}` with `|a(k)| = O(k^p)`.
#[derive(Clone)]
pub struct CoeffSeq {
    a1: Coeff,
    a2: Option<Coeff>,
    p: f64,
}

impl fmt::Debug for CoeffSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoeffSeq").field("p", &self.p).field("has_a2", &self.a2.is_some()).finish()
    }
}

impl CoeffSeq {
    /// Rejects sequences whose sampled growth clearly exceeds `k^p`.
    pub fn new<F, G>(a1: F, a2: Option<G>, p: f64) -> Result<CoeffSeq>
    where
        F: Fn(usize) -> f64 + Send + Sync + 'static,
        G: Fn(usize) -> f64 + Send + Sync + 'static,
    {
        let seq = CoeffSeq { a1: Arc::new(a1), a2: a2.map(|g| Arc::new(g) as Coeff), p };
        seq.check_growth()?;
        Ok(seq)
    }

    /// `a_{k1} = k - 1`, `a_{k2} = (k - 1)^2`: the linear drift `P_k = P((k-1) eps)`.
    pub fn linear() -> CoeffSeq {
        CoeffSeq {
            a1: Arc::new(|k| k as f64 - 1.0),
            a2: Some(Arc::new(|k| (k as f64 - 1.0).powi(2))),
            p: 2.0,
        }
    }

    pub fn a1(&self, k: usize) -> f64 {
        (self.a1)(k)
    }

    pub fn a2(&self, k: usize) -> Option<f64> {
        self.a2.as_ref().map(|a| a(k))
    }

    pub fn growth(&self) -> f64 {
        self.p
    }

    fn check_growth(&self) -> Result<()> {
        let ratio = |a: &Coeff, k: usize| a(k).abs() / (k as f64).powf(self.p);
        let seqs: Vec<&Coeff> = std::iter::once(&self.a1).chain(self.a2.as_ref()).collect();
        for a in seqs {
            let early = (1..=16).map(|k| ratio(a, k)).fold(1.0, f64::max);
            for e in 5..=20 {
                let k = 1usize << e;
                let rk = ratio(a, k);
                if !rk.is_finite() || rk > 16.0 * early {
                    return Err(Error::InvalidArgument(format!(
                        "coefficient a({k}) grows faster than k^{}",
                        self.p
                    )));
                }
            }
        }
        Ok(())
    }
}

fn resolvent(p: &Matrix, q: f64) -> Result<Lu> {
    Lu::new(&Matrix::identity(p.dim()).add_scaled(-q, p))
}

fn check_dims(p: &Matrix, reward: &RewardSpec) -> Result<()> {
    if reward.dim() != p.dim() {
        return Err(Error::Dimension(format!("reward has {} states, chain has {}", reward.dim(), p.dim())));
    }
    Ok(())
}

/// `nu = (I - q P)^{-1} r` and `kappa0 = mu nu`.
pub fn stationary_value(p: &Matrix, spec: &DiscountSpec) -> Result<(ColVec, f64)> {
    check_dims(p, &spec.reward)?;
    let nu = resolvent(p, spec.q())?.solve(&spec.reward.r);
    let k0 = dot(&spec.reward.mu, &nu);
    Ok((nu, k0))
}

/// Horizon `n` whose geometric tail `q^n ||r|| / (1 - q)` is at most `tol`.
pub fn truncation_horizon(alpha: f64, r_norm: f64, tol: f64) -> usize {
    if r_norm == 0.0 {
        return 1;
    }
    let q = (-alpha).exp();
    let n = (-(tol * (1.0 - q) / r_norm).ln() / alpha).ceil();
    (n.max(1.0)) as usize
}

/// `sum_{j<n} q^j mu P_1 ... P_j r` by row-vector propagation.
pub fn exact_discounted(seq: &TransitionSequence, spec: &DiscountSpec, n: usize) -> Result<f64> {
    if seq.dim() != spec.reward.dim() {
        return Err(Error::Dimension("sequence and reward sizes differ".into()));
    }
    seq.require(n.saturating_sub(1))?;
    let q = spec.q();
    let r = &spec.reward.r;
    let mut eta = spec.reward.mu.clone();
    let mut weight = 1.0;
    let mut total = 0.0;
    for j in 0..n {
        total += weight * dot(&eta, r);
        if j + 1 < n {
            eta = seq.get(j + 1)?.left_mul(&eta);
            weight *= q;
        }
    }
    Ok(total)
}

/// Truncated oracle with the tail rule `q^n ||r|| / (1 - q) <= eps_report^6`.
pub fn exact_truncated(seq: &TransitionSequence, spec: &DiscountSpec, eps_report: f64) -> Result<(f64, usize)> {
    if !(eps_report > 0.0) {
        return Err(Error::InvalidArgument(format!("report precision {eps_report} must be positive")));
    }
    let n = truncation_horizon(spec.alpha, col_max(&spec.reward.r), eps_report.powi(6));
    Ok((exact_discounted(seq, spec, n)?, n))
}

fn default_terms(q: f64, p: f64, d_norm: f64) -> usize {
    if d_norm == 0.0 {
        return 0;
    }
    let target = GENERAL_TAIL_TOL * (1.0 - q);
    let mut k = 0usize;
    while q.powi(k as i32) * ((k + 1) as f64).powf(p + 1.0) * d_norm > target {
        k += 1;
        if k > 1_000_000 {
            break;
        }
    }
    k
}

fn check_zero_rows(d: &Matrix, name: &str) -> Result<()> {
    for (i, s) in d.row_sums().iter().enumerate() {
        if s.abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!("{name} row {i} sums to {s:e}, expected 0")));
        }
    }
    Ok(())
}

/// Row vectors `mu (qP)^k`, `k = 0..=K`.
fn discounted_orbit(p: &Matrix, q: f64, mu: &[f64], k: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(k + 1);
    let mut rho = mu.to_vec();
    for i in 0..=k {
        if i > 0 {
            rho = p.left_mul(&rho).iter().map(|v| q * v).collect();
        }
        out.push(rho.clone());
    }
    out
}

/// First-order expansion for a general coefficient sequence:
/// `mu A^{-1} r + q mu sum_k a_{k+1,1} (qP)^k D A^{-1} r`.
pub fn first_order_general(
    p: &Matrix,
    d: &Matrix,
    coeffs: &CoeffSeq,
    spec: &DiscountSpec,
    terms: Option<usize>,
) -> Result<f64> {
    check_dims(p, &spec.reward)?;
    check_zero_rows(d, "D")?;
    let q = spec.q();
    let lu = resolvent(p, q)?;
    let w = lu.solve(&spec.reward.r);
    let u = d.mul_vec(&w);
    let k = terms.unwrap_or_else(|| default_terms(q, coeffs.growth(), d.max_row_sum()));
    let orbit = discounted_orbit(p, q, &spec.reward.mu, k);
    let corr: f64 = orbit.iter().enumerate().map(|(i, rho)| coeffs.a1(i + 1) * dot(rho, &u)).sum();
    Ok(dot(&spec.reward.mu, &w) + q * corr)
}

/// Output of the three-system first-order evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct FirstOrder {
    pub kappa: f64,
    pub nu: ColVec,
    pub nu1: ColVec,
    pub nu2: ColVec,
}

/// `kappa1 = mu nu + q^2 mu P nu2` with `A nu = r`, `A nu1 = E1 nu`, `A nu2 = nu1`.
pub fn first_order_linear(dm: &DriftModel, spec: &DiscountSpec) -> Result<FirstOrder> {
    check_dims(&dm.base, &spec.reward)?;
    let q = spec.q();
    let lu = resolvent(&dm.base, q)?;
    let nu = lu.solve(&spec.reward.r);
    let nu1 = lu.solve(&dm.e1.mul_vec(&nu));
    let nu2 = lu.solve(&nu1);
    let mu = &spec.reward.mu;
    let kappa = dot(mu, &nu) + q * q * dot(&dm.base.left_mul(mu), &nu2);
    Ok(FirstOrder { kappa, nu, nu1, nu2 })
}

/// Second-order expansion for general coefficients: the first-order sum, the
/// `a_{k2}` curvature sum and the nested double sum over pairs `k < l`.
pub fn second_order_general(
    p: &Matrix,
    d1: &Matrix,
    d2: &Matrix,
    coeffs: &CoeffSeq,
    spec: &DiscountSpec,
    terms: Option<usize>,
) -> Result<f64> {
    check_dims(p, &spec.reward)?;
    check_zero_rows(d1, "D1")?;
    check_zero_rows(d2, "D2")?;
    if coeffs.a2.is_none() {
        return Err(Error::MissingSecondOrder("coefficient sequence a2"));
    }
    let q = spec.q();
    let lu = resolvent(p, q)?;
    let w = lu.solve(&spec.reward.r);
    let u1 = d1.mul_vec(&w);
    let u2 = d2.mul_vec(&w);
    let d_norm = d1.max_row_sum().max(d2.max_row_sum());
    let k = terms.unwrap_or_else(|| default_terms(q, coeffs.growth() + 2.0, d_norm));
    let orbit = discounted_orbit(p, q, &spec.reward.mu, k);

    let mut first = 0.0;
    let mut curv = 0.0;
    for (i, rho) in orbit.iter().enumerate() {
        first += coeffs.a1(i + 1) * dot(rho, &u1);
        curv += coeffs.a2(i + 1).unwrap_or(0.0) * dot(rho, &u2);
    }

    // (qP)^m D1 A^{-1} r for m = 0..=K.
    let mut fwd = Vec::with_capacity(k + 1);
    let mut v = u1.clone();
    for m in 0..=k {
        if m > 0 {
            v = p.mul_vec(&v).iter().map(|x| q * x).collect();
        }
        fwd.push(v.clone());
    }
    let mut cross = 0.0;
    for kk in 1..=k {
        let left = d1.left_mul(&orbit[kk - 1]);
        let mut inner = vec![0.0; p.dim()];
        for (m, f) in fwd.iter().enumerate() {
            let a = coeffs.a1(kk + 1 + m);
            if a != 0.0 {
                inner.iter_mut().zip(f).for_each(|(s, x)| *s += a * x);
            }
        }
        cross += coeffs.a1(kk) * dot(&left, &inner);
    }
    Ok(dot(&spec.reward.mu, &w) + q * first + 0.5 * q * curv + q * q * cross)
}

/// Which form of the last closed-form second-order term to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum SecondOrderForm {
    /// `q^4 mu P A^{-2} E1 P A^{-2} E1 A^{-1} r`, the reduction of the double sum.
    #[default]
    Reduced,
    /// Unreduced last term `q^4 mu P A^{-2} E1 P A^{-1} r`, kept for comparison.
    Unreduced,
}

/// Closed-form second-order approximation for linear/quadratic drift.
///
/// Terms: `order0`, `order1` (linear in E1), `curvature` (E2), `cross_a` and
/// `cross_b` (quadratic in E1).
pub fn second_order_linear(dm: &DriftModel, spec: &DiscountSpec, form: SecondOrderForm) -> Result<Expansion> {
    check_dims(&dm.base, &spec.reward)?;
    let e2 = dm.e2()?;
    let q = spec.q();
    let p = &dm.base;
    let e1 = &dm.e1;
    let lu = resolvent(p, q)?;
    let solve_k = |x: &[f64], k: usize| (0..k).fold(x.to_vec(), |acc, _| lu.solve(&acc));

    let mu = &spec.reward.mu;
    let w = lu.solve(&spec.reward.r);
    let rho: Vec<f64> = p.left_mul(mu).iter().map(|v| q * q * v).collect();

    let e1w = e1.mul_vec(&w);
    let c = solve_k(&e1w, 2);
    let order1 = dot(&rho, &c);

    let g = e2.mul_vec(&w);
    let g2 = solve_k(&g, 2);
    let g3 = lu.solve(&g2);
    let pg3 = p.mul_vec(&g3);
    let curvature = 0.5 * (2.0 * q * dot(&rho, &pg3) + dot(&rho, &g2));

    let h = solve_k(&e1.mul_vec(&lu.solve(&e1w)), 3);
    let cross_a = 2.0 * q * dot(&rho, &h);

    let tail = match form {
        SecondOrderForm::Reduced => e1.mul_vec(&p.mul_vec(&c)),
        SecondOrderForm::Unreduced => e1.mul_vec(&p.mul_vec(&w)),
    };
    let cross_b = q * q * dot(&rho, &solve_k(&tail, 2));

    Ok(Expansion::new(vec![
        ("order0", dot(mu, &w)),
        ("order1", order1),
        ("curvature", curvature),
        ("cross_a", cross_a),
        ("cross_b", cross_b),
    ]))
}

/// Analytic `kappa'(0)` and `kappa''(0)` for `P_k = P((k-1) eps)` given
/// `P'(0)` and `P''(0)`.
pub fn derivative_coefficients(
    p: &crate::model::StochasticMatrix,
    dp: &Matrix,
    d2p: &Matrix,
    spec: &DiscountSpec,
) -> Result<(f64, f64)> {
    let dm = DriftModel::new(p.clone(), dp.clone(), Some(d2p.clone()))?;
    let ex = second_order_linear(&dm, spec, SecondOrderForm::Reduced)?;
    let quad: f64 = ["curvature", "cross_a", "cross_b"].iter().filter_map(|n| ex.term(n)).sum();
    Ok((ex.term("order1").unwrap_or(0.0), 2.0 * quad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{drift_sequence, StochasticMatrix};

    fn chain2() -> StochasticMatrix {
        StochasticMatrix::new(Matrix::from_rows(&[vec![0.6, 0.4], vec![0.3, 0.7]]).unwrap()).unwrap()
    }

    fn drift2() -> Matrix {
        Matrix::from_rows(&[vec![-0.002, 0.002], vec![0.001, -0.001]]).unwrap()
    }

    fn curv2() -> Matrix {
        Matrix::from_rows(&[vec![0.00003, -0.00003], vec![-0.00002, 0.00002]]).unwrap()
    }

    fn spec(alpha: f64) -> DiscountSpec {
        DiscountSpec::new(alpha, RewardSpec::new(vec![1.0, 3.0], vec![0.5, 0.5]).unwrap()).unwrap()
    }

    #[test]
    fn stationary_examples() {
        let s0 = DiscountSpec::new(0.3, RewardSpec::new(vec![0.0, 0.0], vec![1.0, 0.0]).unwrap()).unwrap();
        let (nu, k0) = stationary_value(&chain2(), &s0).unwrap();
        assert_eq!(nu, vec![0.0, 0.0]);
        assert_eq!(k0, 0.0);

        let half = Matrix::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        let s = DiscountSpec::new(2f64.ln(), RewardSpec::new(vec![1.0, 0.0], vec![1.0, 0.0]).unwrap()).unwrap();
        let (nu, _) = stationary_value(&half, &s).unwrap();
        assert!((nu[0] - 1.5).abs() < 1e-14 && (nu[1] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn stationary_fixed_point() {
        let s = spec(0.2);
        let (nu, _) = stationary_value(&chain2(), &s).unwrap();
        let pnu = chain2().mul_vec(&nu);
        for i in 0..2 {
            assert!((nu[i] - s.reward.r[i] - s.q() * pnu[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_sequence_within_tail_bound() {
        let s = spec(0.5);
        let (_, k0) = stationary_value(&chain2(), &s).unwrap();
        let seq = TransitionSequence::constant(chain2());
        let (k, n) = exact_truncated(&seq, &s, 0.1).unwrap();
        let bound = s.q().powi(n as i32) / (1.0 - s.q()) * 3.0;
        assert!((k - k0).abs() <= bound);
    }

    #[test]
    fn general_first_order_reductions() {
        let s = spec(0.3);
        let p = chain2();
        let d = drift2();
        let zero = CoeffSeq::new(|_| 0.0, None::<fn(usize) -> f64>, 0.0).unwrap();
        let (_, k0) = stationary_value(&p, &s).unwrap();
        assert!((first_order_general(&p, &d, &zero, &s, None).unwrap() - k0).abs() < 1e-12);

        let one = CoeffSeq::new(|_| 1.0, None::<fn(usize) -> f64>, 0.0).unwrap();
        let lu = resolvent(&p, s.q()).unwrap();
        let w = lu.solve(&s.reward.r);
        let closed = k0 + s.q() * dot(&lu.solve_left(&s.reward.mu), &d.mul_vec(&w));
        assert!((first_order_general(&p, &d, &one, &s, None).unwrap() - closed).abs() < 1e-10);

        let dm = DriftModel::new(p.clone(), d.clone(), None).unwrap();
        let lin = first_order_linear(&dm, &s).unwrap().kappa;
        let gen = first_order_general(&p, &d, &CoeffSeq::linear(), &s, None).unwrap();
        assert!((lin - gen).abs() < 1e-10);
    }

    #[test]
    fn general_second_order_matches_closed_form() {
        for alpha in [0.1, 0.5, 1.0] {
            let s = spec(alpha);
            let dm = DriftModel::new(chain2(), drift2(), Some(curv2())).unwrap();
            let closed = second_order_linear(&dm, &s, SecondOrderForm::Reduced).unwrap().value();
            let gen = second_order_general(&chain2(), &drift2(), &curv2(), &CoeffSeq::linear(), &s, None).unwrap();
            assert!((closed - gen).abs() < 1e-9, "alpha {alpha}: {closed} vs {gen}");
        }
    }

    #[test]
    fn second_order_without_curvature_adds_cross_terms_only() {
        let s = spec(0.4);
        let dm = DriftModel::new(chain2(), drift2(), Some(Matrix::zeros(2))).unwrap();
        let ex = second_order_linear(&dm, &s, SecondOrderForm::Reduced).unwrap();
        let k1 = first_order_linear(&dm, &s).unwrap().kappa;
        assert_eq!(ex.term("curvature"), Some(0.0));
        let cross = ex.term("cross_a").unwrap() + ex.term("cross_b").unwrap();
        assert!((ex.value() - k1 - cross).abs() < 1e-12);
    }

    #[test]
    fn zero_drift_gives_stationary_value() {
        let s = spec(0.7);
        let dm = DriftModel::stationary(chain2());
        let (_, k0) = stationary_value(&chain2(), &s).unwrap();
        assert!((first_order_linear(&dm, &s).unwrap().kappa - k0).abs() < 1e-13);
        assert!((second_order_linear(&dm, &s, SecondOrderForm::Reduced).unwrap().value() - k0).abs() < 1e-13);
    }

    #[test]
    fn first_and_second_order_error_scaling() {
        let s = spec(0.5);
        let base = DriftModel::new(chain2(), drift2(), Some(curv2())).unwrap();
        let mut prev: Option<(f64, f64)> = None;
        for i in 0..4 {
            let dm = base.rescaled(0.5f64.powi(i));
            let seq = drift_sequence(&dm, 400);
            let exact = exact_discounted(&seq, &s, 120).unwrap();
            let e1 = (first_order_linear(&dm, &s).unwrap().kappa - exact).abs();
            let e2 = (second_order_linear(&dm, &s, SecondOrderForm::Reduced).unwrap().value() - exact).abs();
            if let Some((p1, p2)) = prev {
                assert!(p1 / e1 > 3.5, "first-order ratio {}", p1 / e1);
                assert!(p2 / e2 > 7.0, "second-order ratio {}", p2 / e2);
            }
            prev = Some((e1, e2));
        }
    }

    #[test]
    fn coefficient_growth_is_checked() {
        assert!(CoeffSeq::new(|k| (k as f64).powi(3), None::<fn(usize) -> f64>, 1.0).is_err());
        assert!(CoeffSeq::new(|k| k as f64, None::<fn(usize) -> f64>, 1.0).is_ok());
    }
}
