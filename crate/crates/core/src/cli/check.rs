//! Hypothesis checks for a model document.

use crate::discounted::truncation_horizon;
use crate::error::Error;
use crate::examples::inventory_exact_drift;
use crate::hitting::{build_block, AbsorbingSpec};
use crate::jump::{default_lambda, uniformize};
use crate::linalg::{col_max, contraction_power, is_primitive};

use super::doc::{Measure, ModelDoc, Source};
use super::eval::DEFAULT_ORACLE_TOL;

/// Outcome of one hypothesis check.
#[derive(Clone, Debug, PartialEq)]
pub struct Condition {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn pass(name: &'static str, detail: impl Into<String>) -> Condition {
    Condition { name, passed: true, detail: detail.into() }
}

fn fail(name: &'static str, detail: impl Into<String>) -> Condition {
    Condition { name, passed: false, detail: detail.into() }
}

/// Steps of the discrete sequence the measure actually touches.
fn steps_needed(doc: &ModelDoc) -> usize {
    match &doc.measure {
        Measure::Discounted { alpha } => {
            let tol = doc.precision.map_or(DEFAULT_ORACLE_TOL, |p| p.powi(6));
            truncation_horizon(*alpha, col_max(&doc.reward), tol)
        }
        Measure::Transient { n } | Measure::Cumulative { n } => (*n).max(1),
        Measure::Hitting { set } => 4 * set.len().max(1),
        Measure::Jump { .. } => 0,
    }
}

/// Runs the checks in order and stops at the first failure.
pub fn check(doc: &ModelDoc) -> Vec<Condition> {
    let mut out = Vec::new();
    macro_rules! push {
        ($c:expr) => {{
            let c = $c;
            let ok = c.passed;
            out.push(c);
            if !ok {
                return out;
            }
        }};
    }

    match &doc.source {
        Source::Rates(rm) => {
            push!(pass("rate-matrix", "base generator has nonnegative rates and zero row sums"));
            push!(pass("drift-row-sums", "F1 and F2 rows sum to zero"));
            let Measure::Jump { t, window, .. } = &doc.measure else { unreachable!("rate models imply the jump measure") };
            let path = rm.ramp_path(*t, *window);
            let bad = (0..=200).map(|i| t * i as f64 / 200.0).find_map(|s| path.get(s).err().map(|e| (s, e)));
            push!(match bad {
                None => pass("rate-path", format!("Q(s) is a rate matrix on a 201-point grid of [0, {t}]")),
                Some((s, e)) => fail("rate-path", format!("Q({s}): {e}")),
            });
            let r = uniformize(&rm.base, default_lambda(&rm.base)).expect("default lambda is admissible");
            push!(if is_primitive(&r) {
                pass("irreducible", "base generator is irreducible")
            } else {
                fail("irreducible", "base generator is reducible; the stationary law is not unique")
            });
            return out;
        }
        Source::Inventory { params, variant } => {
            let dm = inventory_exact_drift(params, *variant);
            let worst = dm.e1.row_sums().iter().chain(dm.e2.as_ref().map(|m| m.row_sums()).unwrap_or_default().iter()).fold(0.0_f64, |m, s| m.max(s.abs()));
            push!(if worst <= 1e-9 {
                pass("drift-row-sums", format!("exact E1 and E2 rows sum to zero (max {worst:.1e})"))
            } else {
                fail("drift-row-sums", format!("exact drift row sum {worst:e}"))
            });
        }
        Source::Drift { .. } => push!(pass("drift-row-sums", "E1 and E2 rows sum to zero")),
        Source::List(_) | Source::BirthDeath(_) => {}
    }

    let seq = doc.source.sequence().expect("discrete source");
    let k_max = steps_needed(doc);
    let bad = (1..=k_max).find_map(|k| seq.get(k).err().map(|e| (k, e)));
    push!(match bad {
        None => pass("stochastic", format!("P_1..P_{k_max} are stochastic")),
        Some((_, e)) => fail("stochastic", e.to_string()),
    });

    match &doc.measure {
        Measure::Discounted { alpha } => push!(pass("discount", format!("alpha = {alpha} > 0"))),
        Measure::Hitting { set } => {
            let spec = match AbsorbingSpec::new(set, doc.reward.clone(), &doc.initial) {
                Ok(s) => s,
                Err(e) => {
                    out.push(fail("transient-set", e.to_string()));
                    return out;
                }
            };
            let p1 = seq.get(1).expect("checked above");
            let limit = 4 * spec.transient().len();
            push!(match build_block(p1.matrix(), &spec).map(|b| contraction_power(&b.b, limit)) {
                Ok(Some(l)) => pass("contraction", format!("||B^{l}|| < 1 on the transient set")),
                Ok(None) => fail("contraction", Error::NotContracting(limit).to_string()),
                Err(e) => fail("contraction", e.to_string()),
            });
        }
        Measure::Transient { n } | Measure::Cumulative { n } => {
            let mut at = vec![1];
            if matches!(doc.measure, Measure::Transient { .. }) && *n > 1 {
                at.push(*n);
            }
            for k in at {
                let p = seq.get(k).expect("checked above");
                push!(if is_primitive(&p) {
                    pass("irreducible-aperiodic", format!("P_{k} has a strictly positive power"))
                } else {
                    fail("irreducible-aperiodic", format!("no power of P_{k} is strictly positive (reducible or periodic)"))
                });
            }
        }
        Measure::Jump { .. } => unreachable!("jump documents use rate models"),
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_fails_irreducibility() {
        let doc = ModelDoc::parse("measure transient\nn 5\nreward 1 2\ninitial 1 0\nmatrix base\n1 0\n0 1\nend\n").unwrap();
        let c = check(&doc);
        let last = c.last().unwrap();
        assert!(!last.passed);
        assert_eq!(last.name, "irreducible-aperiodic");
    }

    #[test]
    fn trapped_set_fails_contraction() {
        // state 0 never leaves, so C = {0} is never exited
        let doc =
            ModelDoc::parse("measure hitting\nset 0\nreward 1 0\ninitial 1 0\nmatrix base\n1 0\n0.5 0.5\nend\n").unwrap();
        let last = check(&doc).pop().unwrap();
        assert_eq!(last.name, "contraction");
        assert!(!last.passed);
    }

    #[test]
    fn inventory_passes() {
        let doc = ModelDoc::parse("measure transient\nn 30\ngenerator inventory\ns 4\nS 10\neps 0.01\n").unwrap();
        assert!(check(&doc).iter().all(|c| c.passed));
    }
}
