//! Evaluation of a model document: exact oracle plus every applicable expansion.

use crate::cumulative::{cumulative_first, exact_cumulative, CumulativeForm};
use crate::discounted::{
    exact_discounted, first_order_linear, second_order_linear, truncation_horizon, DiscountSpec, SecondOrderForm,
};
use crate::error::{Error, Result};
use crate::hitting::{exact_hitting, first_order_hitting, AbsorbingSpec};
use crate::jump::{default_step, exact_jump, jump_first, jump_second, JumpForm, RateDriftModel, RatePath};
use crate::linalg::{col_max, dot};
use crate::model::{fd_index_for_discount, DriftModel, Expansion, RewardSpec};
use crate::transient::{backward_first, backward_second, exact_transient, forward_first, poisson_correction, BackwardForm, Ergodic};

use super::doc::{Measure, ModelDoc, Source};
use super::report::{Cell, Table};

/// Truncation tolerance of the discounted and hitting oracles without `precision`.
pub const DEFAULT_ORACLE_TOL: f64 = 1e-10;

/// One evaluated quantity. Term rows are named `approximation.term`.
#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub name: String,
    pub value: f64,
    /// `100 |value - exact| / |exact|`, for whole approximations only.
    pub rel_error_pct: Option<f64>,
}

struct Rows {
    exact: f64,
    rows: Vec<Row>,
}

impl Rows {
    fn new(exact: f64) -> Rows {
        Rows { exact, rows: vec![Row { name: "exact".into(), value: exact, rel_error_pct: None }] }
    }

    fn info(&mut self, name: &str, value: f64) {
        self.rows.push(Row { name: name.into(), value, rel_error_pct: None });
    }

    fn approx(&mut self, name: &str, value: f64) {
        let rel = 100.0 * (value - self.exact).abs() / self.exact.abs();
        self.rows.push(Row { name: name.into(), value, rel_error_pct: Some(rel) });
    }

    fn expansion(&mut self, name: &str, ex: &Expansion) {
        self.approx(name, ex.value());
        for (term, v) in &ex.terms {
            self.info(&format!("{name}.{term}"), *v);
        }
    }
}

fn model_at_start(doc: &ModelDoc, j: usize) -> Result<DriftModel> {
    match doc.source.exact_model_at(1)? {
        Some(dm) => Ok(dm),
        None => doc.source.fd_model_at_start(j, true)?.ok_or(Error::InvalidArgument("no discrete-time model".into())),
    }
}

fn model_at_end(doc: &ModelDoc, n: usize, j: usize) -> Result<DriftModel> {
    match doc.source.exact_model_at(n.max(1))? {
        Some(dm) => Ok(dm),
        None => doc.source.fd_model_at_end(n, j, true)?.ok_or(Error::InvalidArgument("no discrete-time model".into())),
    }
}

fn has_fd_variant(source: &Source) -> bool {
    matches!(source, Source::Inventory { .. })
}

/// Largest exit rate over a 201-point grid of the path on `[0, t]`.
fn path_rate(path: &RatePath, t: f64) -> Result<f64> {
    let mut rate: f64 = 0.0;
    for i in 0..=200 {
        rate = rate.max(path.get(t * i as f64 / 200.0)?.max_exit_rate());
    }
    Ok(rate)
}

/// Ramp path, step size and the oracle value for a jump document.
pub fn jump_oracle(rm: &RateDriftModel, mu: &[f64], r: &[f64], t: f64, window: f64, step: Option<f64>) -> Result<(f64, f64)> {
    let path = rm.ramp_path(t, window);
    let h = match step {
        Some(h) => h,
        None => default_step(path_rate(&path, t)?),
    };
    Ok((exact_jump(&path, mu, r, t, h)?, h))
}

pub fn evaluate(doc: &ModelDoc) -> Result<Vec<Row>> {
    let r = doc.reward.clone();
    let mu = doc.initial.clone();
    let j_default = doc.fd_index.unwrap_or(2);
    let out = match &doc.measure {
        Measure::Discounted { alpha } => {
            let seq = doc.source.sequence().expect("discrete source");
            let spec = DiscountSpec::new(*alpha, RewardSpec::new(r, mu)?)?;
            let tol = doc.precision.map_or(DEFAULT_ORACLE_TOL, |p| p.powi(6));
            let n = truncation_horizon(*alpha, col_max(&spec.reward.r), tol);
            let mut rows = Rows::new(exact_discounted(&seq, &spec, n)?);
            rows.info("exact.steps", n as f64);
            let j = doc.fd_index.unwrap_or_else(|| fd_index_for_discount(*alpha));
            let dm = model_at_start(doc, j)?;
            rows.approx("first_order", first_order_linear(&dm, &spec)?.kappa);
            if dm.e2.is_some() {
                rows.expansion("second_order", &second_order_linear(&dm, &spec, SecondOrderForm::Reduced)?);
            }
            if has_fd_variant(&doc.source) {
                let fd = doc.source.fd_model_at_start(j, true)?.expect("discrete source");
                rows.info("fd_index", j as f64);
                rows.approx("first_order_fd", first_order_linear(&fd, &spec)?.kappa);
                rows.approx("second_order_fd", second_order_linear(&fd, &spec, SecondOrderForm::Reduced)?.value());
            }
            rows
        }
        Measure::Hitting { set } => {
            let seq = doc.source.sequence().expect("discrete source");
            let spec = AbsorbingSpec::new(set, r, &mu)?;
            let tol = doc.precision.map_or(DEFAULT_ORACLE_TOL, |p| p.powi(6));
            let mut rows = Rows::new(exact_hitting(&seq, &spec, tol)?);
            rows.expansion("first_order", &first_order_hitting(&model_at_start(doc, j_default)?, &spec)?);
            rows
        }
        Measure::Transient { n } => {
            let seq = doc.source.sequence().expect("discrete source");
            let reward = RewardSpec::new(r, mu)?;
            let mut rows = Rows::new(exact_transient(&seq, &reward, *n)?);
            rows.expansion("forward_first", &forward_first(&model_at_start(doc, j_default)?, &reward, *n)?);
            let end = model_at_end(doc, *n, j_default)?;
            rows.expansion("backward_first", &backward_first(&end, &reward)?);
            let pc = poisson_correction(&end.base, &end.e1, &reward)?;
            let pi = Ergodic::new(&end.base)?.pi;
            rows.approx("backward_first_poisson", dot(&pi, &reward.r) + pc.chi1);
            if end.e2.is_some() {
                rows.expansion("backward_second", &backward_second(&end, &reward, BackwardForm::Squared)?);
            }
            rows
        }
        Measure::Cumulative { n } => {
            let seq = doc.source.sequence().expect("discrete source");
            let reward = RewardSpec::new(r, mu)?;
            let mut rows = Rows::new(exact_cumulative(&seq, &reward, *n)?);
            let dm = model_at_start(doc, j_default)?;
            rows.expansion("cumulative_first", &cumulative_first(&dm, &reward, *n, CumulativeForm::Centered)?);
            rows
        }
        Measure::Jump { t, window, step } => {
            let Source::Rates(rm) = &doc.source else { unreachable!("jump documents carry rate models") };
            let (exact, h) = jump_oracle(rm, &mu, &r, *t, *window, *step)?;
            let mut rows = Rows::new(exact);
            rows.info("exact.step", h);
            rows.expansion("jump_first", &jump_first(rm, &r)?);
            if rm.f2.is_some() {
                rows.expansion("jump_second", &jump_second(rm, &r, JumpForm::Corrected)?);
            }
            rows
        }
    };
    Ok(out.rows)
}

pub fn rows_table(rows: &[Row]) -> Table {
    let mut t = Table::new(vec!["name", "value", "rel_error_pct"]);
    for row in rows {
        let rel = row.rel_error_pct.map_or(Cell::Empty, |v| Cell::fixed(v, 4));
        t.push(vec![Cell::Text(row.name.clone()), Cell::full(row.value), rel]);
    }
    t
}
