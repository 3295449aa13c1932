//! Command-line front end: `eval`, `reproduce-tables` and `check`.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 parse or validation error,
//! 3 violated model hypothesis or failed calibration.

pub mod check;
pub mod doc;
pub mod eval;
pub mod report;
pub mod tables;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::error::Error;
use crate::examples::{InitialDist, ReorderVariant};

use doc::ModelDoc;
use report::Format;
use tables::TableOptions;

pub const EXIT_IO: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "nsmc", version, about = "Approximations for Markov chains with slowly changing transition laws")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate the measure of a model document: oracle, expansions and term breakdown.
    Eval {
        model: PathBuf,
        #[arg(long, value_enum, default_value = "markdown")]
        format: Format,
        /// Report precision; the oracle tail tolerance becomes precision^6.
        #[arg(long)]
        precision: Option<f64>,
        /// Finite-difference index for sequences without closed-form derivatives.
        #[arg(long)]
        fd_index: Option<usize>,
    },
    /// Rebuild the inventory tables and write one CSV per table plus a calibration note.
    ReproduceTables {
        #[arg(long, default_value = "tables")]
        out_dir: PathBuf,
        /// Comma-separated table ids in 1..=6.
        #[arg(long, value_delimiter = ',', default_values_t = [1, 2, 3, 4, 5, 6])]
        tables: Vec<usize>,
        #[arg(long, value_enum, default_value = "markdown")]
        format: Format,
        #[arg(long)]
        fd_index: Option<usize>,
        #[arg(long)]
        precision: Option<f64>,
        /// Force the initial distribution instead of calibrating it.
        #[arg(long)]
        mu: Option<InitialDist>,
        /// Force the reorder rule instead of calibrating it.
        #[arg(long)]
        reorder_variant: Option<ReorderVariant>,
    },
    /// Check the hypotheses behind the expansions for a model document.
    Check { model: PathBuf },
}

fn load(path: &Path) -> Result<ModelDoc, i32> {
    let text = fs::read_to_string(path).map_err(|e| {
        eprintln!("error: cannot read {}: {e}", path.display());
        EXIT_IO
    })?;
    ModelDoc::parse(&text).map_err(|e| {
        eprintln!("error: {}: {e}", path.display());
        EXIT_INPUT
    })
}

fn report_error(e: &Error) -> i32 {
    eprintln!("error: {e}");
    if e.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_INPUT
    }
}

/// Caps the global rayon pool at `NSMC_THREADS` when set.
fn init_threads() {
    if let Some(n) = std::env::var("NSMC_THREADS").ok().and_then(|v| v.parse::<usize>().ok()).filter(|&n| n > 0) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn eval(model: &Path, format: Format, precision: Option<f64>, fd_index: Option<usize>) -> i32 {
    let mut doc = match load(model) {
        Ok(d) => d,
        Err(code) => return code,
    };
    doc.precision = precision.or(doc.precision);
    doc.fd_index = fd_index.or(doc.fd_index);
    match eval::evaluate(&doc) {
        Ok(rows) => {
            print!("{}", eval::rows_table(&rows).render(format));
            0
        }
        Err(e) => report_error(&e),
    }
}

fn reproduce(out_dir: &Path, format: Format, opts: TableOptions) -> i32 {
    if let Some(bad) = opts.tables.iter().find(|&&t| !(1..=6).contains(&t)) {
        eprintln!("error: table id {bad} is not in 1..=6");
        return EXIT_INPUT;
    }
    init_threads();
    let cal = match tables::calibrate(&opts) {
        Ok(c) => c,
        Err(e) => return report_error(&e),
    };
    if let Err(e) = fs::create_dir_all(out_dir).and_then(|_| fs::write(out_dir.join("calibration.md"), cal.note())) {
        eprintln!("error: cannot write to {}: {e}", out_dir.display());
        return EXIT_IO;
    }
    let Some((variant, mu)) = cal.selected else {
        eprintln!("error: calibration failed for every candidate\n{}", cal.note());
        return EXIT_NUMERICAL;
    };
    println!("calibration: reorder variant {variant}, initial distribution {mu}");
    let results = match tables::compute_tables(variant, mu, &opts) {
        Ok(r) => r,
        Err(e) => return report_error(&e),
    };
    for (spec, rows) in results {
        let table = tables::table_of(&rows);
        let path = out_dir.join(format!("table{}.csv", spec.id));
        if let Err(e) = fs::write(&path, table.csv()) {
            eprintln!("error: cannot write {}: {e}", path.display());
            return EXIT_IO;
        }
        println!("\nTable {}: s = {}, S = {}, alpha = {}\n", spec.id, spec.s, spec.big_s, spec.alpha);
        print!("{}", table.render(format));
    }
    0
}

fn check_cmd(model: &Path) -> i32 {
    let doc = match load(model) {
        Ok(d) => d,
        Err(code) => return code,
    };
    let mut code = 0;
    for c in check::check(&doc) {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        if !c.passed {
            code = EXIT_NUMERICAL;
        }
    }
    code
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { 0 };
        }
    };
    match cli.command {
        Command::Eval { model, format, precision, fd_index } => eval(&model, format, precision, fd_index),
        Command::ReproduceTables { out_dir, tables, format, fd_index, precision, mu, reorder_variant } => {
            let opts = TableOptions { tables, fd_index, precision, mu, variant: reorder_variant };
            reproduce(&out_dir, format, opts)
        }
        Command::Check { model } => check_cmd(&model),
    }
}
