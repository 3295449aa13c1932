//! Plain-text model documents.
//!
//! One `key value...` pair per line, `#` starts a comment, and dense matrices
//! are given as
//!
//! ```text
//! matrix base
//! 0.6 0.4
//! 0.3 0.7
//! end
//! ```
//!
//! Matrix names are `base`, `e1`, `e2` (rates and `F1`, `F2` for the jump
//! measure) and `seq`; repeated `seq` blocks list `P_1, P_2, ...`, and the last
//! one is held fixed afterwards.

use std::collections::HashMap;
use std::fmt;

use crate::error::Error;
use crate::examples::{birth_death, inventory_exact_drift, inventory_sequence, InitialDist, InventoryParams, ReorderVariant};
use crate::jump::{RateDriftModel, RateMatrix};
use crate::linalg::{stationary_distribution, Matrix};
use crate::model::{drift_matrix, fd_drift_model, DriftModel, StochasticMatrix, TransitionSequence};

/// Parse or validation failure, anchored to a line when one is known.
#[derive(Debug, Clone, PartialEq)]
pub struct DocError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for DocError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for DocError {}

fn err<T>(line: usize, message: impl Into<String>) -> Result<T, DocError> {
    Err(DocError { line: Some(line), message: message.into() })
}

fn lib_err(line: usize, e: Error) -> DocError {
    DocError { line: Some(line), message: e.to_string() }
}

/// Which performance measure to evaluate.
#[derive(Clone, Debug, PartialEq)]
pub enum Measure {
    Discounted { alpha: f64 },
    Hitting { set: Vec<usize> },
    Transient { n: usize },
    Cumulative { n: usize },
    Jump { t: f64, window: f64, step: Option<f64> },
}

impl Measure {
    pub fn name(&self) -> &'static str {
        match self {
            Measure::Discounted { .. } => "discounted",
            Measure::Hitting { .. } => "hitting",
            Measure::Transient { .. } => "transient",
            Measure::Cumulative { .. } => "cumulative",
            Measure::Jump { .. } => "jump",
        }
    }
}

/// Where the transition laws come from.
#[derive(Clone, Debug)]
pub enum Source {
    /// `P_k = P + t E1 + t^2/2 E2` with `t = min(k - 1, clamp)`.
    Drift { dm: DriftModel, clamp: Option<usize> },
    /// Explicit `P_1..P_L`, held at `P_L` afterwards.
    List(Vec<StochasticMatrix>),
    Inventory { params: InventoryParams, variant: ReorderVariant },
    BirthDeath(StochasticMatrix),
    Rates(RateDriftModel),
}

impl Source {
    pub fn dim(&self) -> usize {
        match self {
            Source::Drift { dm, .. } => dm.dim(),
            Source::List(l) => l[0].dim(),
            Source::Inventory { params, variant } => params.dim(*variant),
            Source::BirthDeath(p) => p.dim(),
            Source::Rates(rm) => rm.dim(),
        }
    }

    /// The discrete-time sequence `k -> P_k`; `None` for rate models.
    pub fn sequence(&self) -> Option<TransitionSequence> {
        match self {
            Source::Drift { dm, clamp } => {
                let dm = dm.clone();
                let clamp = clamp.unwrap_or(usize::MAX);
                Some(TransitionSequence::from_fn(dm.dim(), None, move |k| {
                    drift_matrix(&dm, (k - 1).min(clamp) as f64, k)
                }))
            }
            Source::List(l) => {
                let l = l.clone();
                Some(TransitionSequence::from_fn(l[0].dim(), None, move |k| Ok(l[(k - 1).min(l.len() - 1)].clone())))
            }
            Source::Inventory { params, variant } => Some(inventory_sequence(params, *variant)),
            Source::BirthDeath(p) => Some(TransitionSequence::constant(p.clone())),
            Source::Rates(_) => None,
        }
    }

    /// Law at step `k` and its exact derivatives in `k`, when known in closed form.
    pub fn exact_model_at(&self, k: usize) -> Result<Option<DriftModel>, Error> {
        let t = (k - 1) as f64;
        Ok(match self {
            Source::Drift { dm, clamp } => {
                let clamp = clamp.unwrap_or(usize::MAX);
                let base = drift_matrix(dm, (k - 1).min(clamp) as f64, k)?;
                if k > clamp {
                    Some(DriftModel::stationary(base))
                } else {
                    let e1 = match &dm.e2 {
                        Some(e2) => dm.e1.add_scaled(t, e2),
                        None => dm.e1.clone(),
                    };
                    Some(DriftModel::new(base, e1, dm.e2.clone())?)
                }
            }
            Source::Inventory { params, variant } => {
                let shifted = InventoryParams::new(params.s, params.big_s, params.demand_mean(k), params.eps)?;
                Some(inventory_exact_drift(&shifted, *variant))
            }
            Source::BirthDeath(p) => Some(DriftModel::stationary(p.clone())),
            Source::List(_) | Source::Rates(_) => None,
        })
    }

    /// Forward finite-difference model at step 1 with index `j`.
    pub fn fd_model_at_start(&self, j: usize, second: bool) -> Result<Option<DriftModel>, Error> {
        match self.sequence() {
            Some(seq) => fd_drift_model(&seq, j, second).map(Some),
            None => Ok(None),
        }
    }

    /// Backward finite-difference model at step `n`, built from `P_n, P_{n-1}, ...`.
    pub fn fd_model_at_end(&self, n: usize, j: usize, second: bool) -> Result<Option<DriftModel>, Error> {
        let Some(seq) = self.sequence() else { return Ok(None) };
        let span = if second { 2 * j - 1 } else { j };
        if n < span {
            return Err(Error::InvalidArgument(format!("backward differences with j = {j} need n >= {span}")));
        }
        let rev = TransitionSequence::from_fn(seq.dim(), Some(n), move |i| seq.get(n + 1 - i));
        let fwd = fd_drift_model(&rev, j, second)?;
        Ok(Some(DriftModel::new(fwd.base, fwd.e1.scaled(-1.0), fwd.e2)?))
    }
}

/// A parsed and validated model document.
#[derive(Clone, Debug)]
pub struct ModelDoc {
    pub source: Source,
    pub measure: Measure,
    pub reward: Vec<f64>,
    pub initial: Vec<f64>,
    pub precision: Option<f64>,
    pub fd_index: Option<usize>,
}

struct Entry {
    line: usize,
    args: Vec<String>,
}

struct Block {
    line: usize,
    rows: Vec<Vec<f64>>,
}

const KEYS: &[&str] = &[
    "measure", "alpha", "n", "t", "window", "step", "set", "precision", "fd-index", "clamp", "reward", "initial",
    "generator", "s", "S", "m", "eps", "variant", "up", "down",
];

fn parse_f64(line: usize, tok: &str) -> Result<f64, DocError> {
    match tok.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => err(line, format!("`{tok}` is not a finite decimal number")),
    }
}

fn parse_usize(line: usize, tok: &str) -> Result<usize, DocError> {
    tok.parse::<usize>().or_else(|_| err(line, format!("`{tok}` is not a nonnegative integer")))
}

struct Raw {
    entries: HashMap<String, Entry>,
    blocks: HashMap<String, Block>,
    seq: Vec<Block>,
}

impl Raw {
    fn parse(text: &str) -> Result<Raw, DocError> {
        let mut raw = Raw { entries: HashMap::new(), blocks: HashMap::new(), seq: Vec::new() };
        let mut open: Option<(String, Block)> = None;
        for (idx, full) in text.lines().enumerate() {
            let line = idx + 1;
            let content = full.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let toks: Vec<&str> = content.split_whitespace().collect();
            if let Some((name, mut block)) = open.take() {
                if toks == ["end"] {
                    if block.rows.is_empty() {
                        return err(block.line, format!("matrix `{name}` has no rows"));
                    }
                    if name == "seq" {
                        raw.seq.push(block);
                    } else {
                        raw.blocks.insert(name, block);
                    }
                } else {
                    let row = toks.iter().map(|t| parse_f64(line, t)).collect::<Result<Vec<_>, _>>()?;
                    block.rows.push(row);
                    open = Some((name, block));
                }
                continue;
            }
            match toks[0] {
                "matrix" => {
                    let [_, name] = toks[..] else {
                        return err(line, "expected `matrix NAME`");
                    };
                    if !["base", "e1", "e2", "seq"].contains(&name) {
                        return err(line, format!("unknown matrix `{name}` (expected base, e1, e2 or seq)"));
                    }
                    if name != "seq" && raw.blocks.contains_key(name) {
                        return err(line, format!("matrix `{name}` given twice"));
                    }
                    open = Some((name.to_string(), Block { line, rows: Vec::new() }));
                }
                "end" => return err(line, "`end` without an open matrix block"),
                key if KEYS.contains(&key) => {
                    if toks.len() < 2 {
                        return err(line, format!("`{key}` needs a value"));
                    }
                    if let Some(prev) = raw.entries.get(key) {
                        return err(line, format!("`{key}` already set on line {}", prev.line));
                    }
                    let args = toks[1..].iter().map(|s| s.to_string()).collect();
                    raw.entries.insert(key.to_string(), Entry { line, args });
                }
                other => return err(line, format!("unknown key `{other}`")),
            }
        }
        if let Some((name, block)) = open {
            return err(block.line, format!("matrix `{name}` is not closed with `end`"));
        }
        Ok(raw)
    }

    fn take(&mut self, key: &str) -> Option<Entry> {
        self.entries.remove(key)
    }

    fn single(&mut self, key: &str) -> Result<Option<(usize, String)>, DocError> {
        match self.take(key) {
            None => Ok(None),
            Some(e) if e.args.len() == 1 => Ok(Some((e.line, e.args[0].clone()))),
            Some(e) => err(e.line, format!("`{key}` takes exactly one value")),
        }
    }

    fn f64_key(&mut self, key: &str) -> Result<Option<(usize, f64)>, DocError> {
        self.single(key)?.map(|(l, v)| parse_f64(l, &v).map(|x| (l, x))).transpose()
    }

    fn usize_key(&mut self, key: &str) -> Result<Option<(usize, usize)>, DocError> {
        self.single(key)?.map(|(l, v)| parse_usize(l, &v).map(|x| (l, x))).transpose()
    }

    fn vector(&mut self, key: &str) -> Result<Option<(usize, Vec<f64>)>, DocError> {
        match self.take(key) {
            None => Ok(None),
            Some(e) => {
                let v = e.args.iter().map(|t| parse_f64(e.line, t)).collect::<Result<Vec<_>, _>>()?;
                Ok(Some((e.line, v)))
            }
        }
    }

    fn matrix(&mut self, name: &str) -> Result<Option<(usize, Matrix)>, DocError> {
        match self.blocks.remove(name) {
            None => Ok(None),
            Some(b) => Matrix::from_rows(&b.rows).map(|m| Some((b.line, m))).map_err(|e| lib_err(b.line, e)),
        }
    }

    fn finish(self) -> Result<(), DocError> {
        let mut left: Vec<(usize, String)> = self.entries.into_iter().map(|(k, e)| (e.line, k)).collect();
        left.extend(self.blocks.into_iter().map(|(k, b)| (b.line, format!("matrix {k}"))));
        left.sort();
        match left.first() {
            Some((line, key)) => err(*line, format!("`{key}` is not used by this measure or generator")),
            None => Ok(()),
        }
    }
}

fn required<T>(v: Option<(usize, T)>, key: &str) -> Result<(usize, T), DocError> {
    v.ok_or_else(|| DocError { line: None, message: format!("missing required key `{key}`") })
}

impl ModelDoc {
    pub fn parse(text: &str) -> Result<ModelDoc, DocError> {
        let mut raw = Raw::parse(text)?;
        let (mline, mname) = required(raw.single("measure")?, "measure")?;
        let measure = match mname.as_str() {
            "discounted" => {
                let (l, alpha) = required(raw.f64_key("alpha")?, "alpha")?;
                if alpha <= 0.0 {
                    return err(l, "alpha must be positive");
                }
                Measure::Discounted { alpha }
            }
            "hitting" => {
                let e = raw.take("set").ok_or_else(|| DocError { line: None, message: "missing required key `set`".into() })?;
                let set = e.args.iter().map(|t| parse_usize(e.line, t)).collect::<Result<Vec<_>, _>>()?;
                Measure::Hitting { set }
            }
            "transient" => Measure::Transient { n: required(raw.usize_key("n")?, "n")?.1 },
            "cumulative" => {
                let (l, n) = required(raw.usize_key("n")?, "n")?;
                if n == 0 {
                    return err(l, "n must be at least 1");
                }
                Measure::Cumulative { n }
            }
            "jump" => {
                let (l, t) = required(raw.f64_key("t")?, "t")?;
                if t < 0.0 {
                    return err(l, "t must be nonnegative");
                }
                let window = raw.f64_key("window")?.map_or(t, |(_, w)| w);
                let step = raw.f64_key("step")?.map(|(_, h)| h);
                Measure::Jump { t, window, step }
            }
            other => return err(mline, format!("unknown measure `{other}`")),
        };
        let precision = raw.f64_key("precision")?.map(|(_, p)| p);
        if precision.is_some_and(|p| p <= 0.0) {
            return Err(DocError { line: None, message: "precision must be positive".into() });
        }
        let fd_index = raw.usize_key("fd-index")?.map(|(_, j)| j);

        let generator = raw.single("generator")?;
        let source = match (&measure, generator) {
            (Measure::Jump { .. }, Some((l, _))) => return err(l, "generators are not available for the jump measure"),
            (Measure::Jump { .. }, None) => Source::Rates(Self::rates(&mut raw)?),
            (_, Some((l, g))) => match g.as_str() {
                "inventory" => Self::inventory(&mut raw)?,
                "birth-death" => Self::birth_death(&mut raw, l)?,
                other => return err(l, format!("unknown generator `{other}` (expected inventory or birth-death)")),
            },
            (_, None) => Self::inline(&mut raw)?,
        };

        let dim = source.dim();
        let reward = match (raw.vector("reward")?, &source) {
            (Some((l, r)), _) if r.len() != dim => return err(l, format!("reward has {} entries, expected {dim}", r.len())),
            (Some((_, r)), _) => r,
            (None, Source::Inventory { params, variant }) => params.reward(*variant),
            (None, _) => return Err(DocError { line: None, message: "missing required key `reward`".into() }),
        };
        let initial = Self::initial(&mut raw, &source)?;
        raw.finish()?;
        Ok(ModelDoc { source, measure, reward, initial, precision, fd_index })
    }

    fn rates(raw: &mut Raw) -> Result<RateDriftModel, DocError> {
        let (bl, base) = required(raw.matrix("base")?, "matrix base")?;
        let n = base.dim();
        let base = RateMatrix::new(base).map_err(|e| lib_err(bl, e))?;
        let (l1, f1) = raw.matrix("e1")?.unwrap_or((bl, Matrix::zeros(n)));
        let f2 = raw.matrix("e2")?;
        let l = f2.as_ref().map_or(l1, |(l, _)| *l);
        RateDriftModel::new(base, f1, f2.map(|(_, m)| m)).map_err(|e| lib_err(l, e))
    }

    fn inline(raw: &mut Raw) -> Result<Source, DocError> {
        if !raw.seq.is_empty() {
            let seq = std::mem::take(&mut raw.seq);
            let mut list = Vec::with_capacity(seq.len());
            for b in seq {
                let m = Matrix::from_rows(&b.rows).map_err(|e| lib_err(b.line, e))?;
                list.push(StochasticMatrix::new(m).map_err(|e| lib_err(b.line, e))?);
            }
            if list.iter().any(|p| p.dim() != list[0].dim()) {
                return Err(DocError { line: None, message: "seq matrices differ in size".into() });
            }
            return Ok(Source::List(list));
        }
        let (bl, base) = required(raw.matrix("base")?, "matrix base")?;
        let n = base.dim();
        let base = StochasticMatrix::new(base).map_err(|e| lib_err(bl, e))?;
        let (l1, e1) = raw.matrix("e1")?.unwrap_or((bl, Matrix::zeros(n)));
        let e2 = raw.matrix("e2")?;
        let l = e2.as_ref().map_or(l1, |(l, _)| *l);
        let dm = DriftModel::new(base, e1, e2.map(|(_, m)| m)).map_err(|e| lib_err(l, e))?;
        let clamp = raw.usize_key("clamp")?.map(|(_, c)| c);
        Ok(Source::Drift { dm, clamp })
    }

    fn inventory(raw: &mut Raw) -> Result<Source, DocError> {
        let (l, s) = required(raw.usize_key("s")?, "s")?;
        let big_s = required(raw.usize_key("S")?, "S")?.1;
        let m = raw.f64_key("m")?.map_or(1.0, |(_, v)| v);
        let eps = raw.f64_key("eps")?.map_or(0.0, |(_, v)| v);
        let variant = match raw.single("variant")? {
            None => ReorderVariant::OrderFirst,
            Some((vl, v)) => v.parse().map_err(|e: Error| lib_err(vl, e))?,
        };
        let params = InventoryParams::new(s, big_s, m, eps).map_err(|e| lib_err(l, e))?;
        Ok(Source::Inventory { params, variant })
    }

    fn birth_death(raw: &mut Raw, line: usize) -> Result<Source, DocError> {
        let (_, up) = required(raw.vector("up")?, "up")?;
        let (_, down) = required(raw.vector("down")?, "down")?;
        birth_death(&up, &down).map(Source::BirthDeath).map_err(|e| lib_err(line, e))
    }

    fn initial(raw: &mut Raw, source: &Source) -> Result<Vec<f64>, DocError> {
        let dim = source.dim();
        let Some(e) = raw.take("initial") else {
            return match source {
                Source::Inventory { params, variant } => {
                    InitialDist::Binomial.build(params, *variant).map_err(|e| DocError { line: None, message: e.to_string() })
                }
                _ => Err(DocError { line: None, message: "missing required key `initial`".into() }),
            };
        };
        let l = e.line;
        if e.args.len() == 1 && e.args[0].parse::<f64>().is_err() {
            let name = e.args[0].as_str();
            return match (name, source) {
                ("uniform", _) if !matches!(source, Source::Inventory { .. }) => Ok(vec![1.0 / dim as f64; dim]),
                ("stationary", Source::Rates(rm)) => crate::linalg::ctmc_stationary(rm.base.matrix()).map_err(|e| lib_err(l, e)),
                ("stationary", Source::Drift { .. } | Source::List(_) | Source::BirthDeath(_)) => {
                    let p1 = source.sequence().expect("discrete source").get(1).map_err(|e| lib_err(l, e))?;
                    stationary_distribution(&p1).map_err(|e| lib_err(l, e))
                }
                (_, Source::Inventory { params, variant }) => {
                    let d: InitialDist = name.parse().map_err(|e: Error| lib_err(l, e))?;
                    d.build(params, *variant).map_err(|e| lib_err(l, e))
                }
                _ => err(l, format!("unknown initial distribution `{name}`")),
            };
        }
        let mu = e.args.iter().map(|t| parse_f64(l, t)).collect::<Result<Vec<_>, _>>()?;
        if mu.len() != dim {
            return err(l, format!("initial has {} entries, expected {dim}", mu.len()));
        }
        let total: f64 = mu.iter().sum();
        if mu.iter().any(|&v| v < 0.0) || (total - 1.0).abs() > 1e-9 {
            return err(l, format!("initial must be a probability vector (sum is {total})"));
        }
        Ok(mu)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_STATE: &str = "\
measure transient
n 20
reward 1 4
initial 0.5 0.5   # trailing comment
matrix base
0.6 0.4
0.3 0.7
end
matrix e1
0.001 -0.001
-0.002 0.002
end
";

    #[test]
    fn parses_inline_drift() {
        let doc = ModelDoc::parse(TWO_STATE).unwrap();
        assert_eq!(doc.measure, Measure::Transient { n: 20 });
        assert_eq!(doc.reward, vec![1.0, 4.0]);
        let Source::Drift { dm, clamp } = &doc.source else { panic!("expected drift source") };
        assert_eq!(*clamp, None);
        assert_eq!(dm.e1[(1, 0)], -0.002);
        assert!(dm.e2.is_none());
    }

    #[test]
    fn errors_are_line_anchored() {
        let bad_row = TWO_STATE.replace("0.3 0.7", "0.3 0.6");
        let e = ModelDoc::parse(&bad_row).unwrap_err();
        assert_eq!(e.line, Some(5));
        assert!(e.message.contains("row 1"), "{e}");

        let unknown = format!("{TWO_STATE}colour blue\n");
        assert_eq!(ModelDoc::parse(&unknown).unwrap_err().line, Some(13));

        let dup = TWO_STATE.replace("n 20", "n 20\nn 30");
        assert_eq!(ModelDoc::parse(&dup).unwrap_err().line, Some(3));

        let unclosed = "measure transient\nn 3\nreward 1\ninitial 1\nmatrix base\n1\n";
        assert_eq!(ModelDoc::parse(unclosed).unwrap_err().line, Some(5));

        let unused = TWO_STATE.replace("n 20", "n 20\nalpha 0.1");
        let e = ModelDoc::parse(&unused).unwrap_err();
        assert_eq!(e.line, Some(3));
        assert!(e.message.contains("alpha"));
    }

    #[test]
    fn inventory_defaults() {
        let doc = ModelDoc::parse("measure discounted\nalpha 0.1\ngenerator inventory\ns 4\nS 10\n").unwrap();
        assert_eq!(doc.reward.len(), 11);
        assert_eq!(doc.reward[10], 10.0);
        assert!((doc.initial.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let doc = ModelDoc::parse(
            "measure discounted\nalpha 0.1\ngenerator inventory\ns 4\nS 10\nvariant below-s\ninitial S\n",
        )
        .unwrap();
        assert_eq!(doc.initial.len(), 7);
        assert_eq!(doc.initial[6], 1.0);
    }

    #[test]
    fn sequence_list_is_held() {
        let text = "measure cumulative\nn 5\nreward 1 0\ninitial 1 0\n\
matrix seq\n0.5 0.5\n0.5 0.5\nend\nmatrix seq\n0.4 0.6\n0.5 0.5\nend\n";
        let doc = ModelDoc::parse(text).unwrap();
        let seq = doc.source.sequence().unwrap();
        assert_eq!(seq.get(9).unwrap()[(0, 0)], 0.4);
    }

    #[test]
    fn backward_differences_recover_linear_drift() {
        let doc = ModelDoc::parse(TWO_STATE).unwrap();
        let fd = doc.source.fd_model_at_end(20, 3, true).unwrap().unwrap();
        let exact = doc.source.exact_model_at(20).unwrap().unwrap();
        assert!((&fd.e1 - &exact.e1).max_abs() < 1e-14);
        assert!((fd.base.matrix() - exact.base.matrix()).max_abs() < 1e-15);
    }
}
