use std::fmt;
use std::fs::File;
use std::io::{self, BufWriter, Write};

use pnes_channel::loss::{self, ChannelParams, LossyJoint};
use pnes_channel::protocol::{self, SweepRow};
use pnes_channel::states::{self, Source, StateKind};
use pnes_channel::verify::{self, VerifyGrid};
use serde_json::{json, Value};

use crate::format::{fmt_float, json_float, Cell, Table};
use crate::{
    AsymArgs, CapacityArgs, Command, CurvatureArgs, Format, GridArg, JointArgs, OutputArgs, SourceArgs,
    StateInfoArgs, SweepArgs, VerifyArgs,
};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Model(pnes_channel::Error),
    Io(io::Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "{msg}"),
            CliError::Model(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "{e}"),
        }
    }
}

impl From<pnes_channel::Error> for CliError {
    fn from(e: pnes_channel::Error) -> Self {
        CliError::Model(e)
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(io::Error::other(e))
    }
}

pub enum Outcome {
    Done,
    VerificationFailed,
}

impl Outcome {
    pub fn code(&self) -> u8 {
        match self {
            Outcome::Done => 0,
            Outcome::VerificationFailed => 2,
        }
    }
}

type CliResult<T> = Result<T, CliError>;

pub fn run(command: &Command) -> CliResult<Outcome> {
    match command {
        Command::StateInfo(a) => state_info(a),
        Command::JointDist(a) => joint_dist(a),
        Command::Capacity(a) => capacity(a),
        Command::Sweep(a) => sweep(a),
        Command::AsymSweep(a) => asym_sweep(a),
        Command::Curvature(a) => curvature(a),
        Command::Verify(a) => run_verify(a),
    }
}

fn source_of(args: &SourceArgs) -> CliResult<(Source, f64)> {
    if !args.mean.is_finite() || args.mean < 0.0 {
        return Err(CliError::Usage(format!("--mean must be a finite number >= 0, got {}", args.mean)));
    }
    let total = args.convention.to_total(args.mean);
    Ok((Source::from_total_mean(args.kind.into(), total)?, total))
}

fn source_metadata(args: &SourceArgs, total: f64) -> serde_json::Map<String, Value> {
    let kind: StateKind = args.kind.into();
    let mut m = serde_json::Map::new();
    m.insert("kind".into(), json!(kind.as_str()));
    m.insert("mean_input".into(), json_float(args.mean));
    m.insert("convention".into(), json!(args.convention.as_str()));
    m.insert("mean_total".into(), json_float(total));
    m
}

fn base_metadata(command: &str, out: &OutputArgs) -> serde_json::Map<String, Value> {
    let mut m = serde_json::Map::new();
    m.insert("command".into(), json!(command));
    m.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
    m.insert("tail_tol".into(), json_float(out.tail_tol));
    m
}

/// Writes `table` to `--output` (printing `summary` to stdout) or to stdout
/// (printing `summary` to stderr).
fn emit(out: &OutputArgs, default: Format, table: &Table, metadata: serde_json::Map<String, Value>, summary: &str) -> CliResult<()> {
    let format = out.format.unwrap_or(default);
    let write = |w: &mut dyn Write| -> CliResult<()> {
        match format {
            Format::Csv => table.write_csv(&mut *w)?,
            Format::Json => {
                serde_json::to_writer_pretty(&mut *w, &table.to_json(Value::Object(metadata.clone())))
                    .map_err(io::Error::other)?;
                writeln!(w)?;
            }
        }
        w.flush()?;
        Ok(())
    };
    match &out.output {
        Some(path) => {
            let mut file = BufWriter::new(File::create(path)?);
            write(&mut file)?;
            println!("{summary}");
            println!("wrote {}", path.display());
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            write(&mut lock)?;
            eprintln!("{summary}");
        }
    }
    Ok(())
}

fn check_tail_tol(out: &OutputArgs) -> CliResult<()> {
    if !(out.tail_tol > 0.0 && out.tail_tol < 1.0) {
        return Err(CliError::Usage(format!("--tail-tol must lie in (0, 1), got {}", out.tail_tol)));
    }
    Ok(())
}

/// NaN for quantities that are undefined at this point (zero energy, zero variance).
fn or_nan(r: pnes_channel::Result<f64>) -> CliResult<f64> {
    match r {
        Ok(v) => Ok(v),
        Err(pnes_channel::Error::ZeroEnergy(_) | pnes_channel::Error::ZeroVariance(_)) => Ok(f64::NAN),
        Err(e) => Err(e.into()),
    }
}

fn state_info(a: &StateInfoArgs) -> CliResult<Outcome> {
    check_tail_tol(&a.out)?;
    let (source, total) = source_of(&a.source)?;
    let tol = a.out.tail_tol;
    let cutoff = source.auto_cutoff(tol)?;
    let entropy = match source {
        Source::Tmc { lambda } => states::entanglement_entropy(&states::tmc_coefficients(lambda, cutoff, tol)?),
        Source::Twb { x } => states::entanglement_entropy(&states::twb_coefficients(x, cutoff, tol)?),
        // Mixed and separable: no pure-state entanglement entropy.
        Source::Tth { .. } => f64::NAN,
    };
    let q = or_nan(source.ideal_mandel_q())?;
    let gamma = or_nan(loss::correlation_after_loss(&source, &ChannelParams::lossless()))?;

    let mut table = Table::new([
        "kind",
        "N",
        "parameter",
        "mean_per_mode",
        "mandel_q",
        "correlation_index",
        "entanglement_entropy_bits",
        "cutoff",
    ]);
    table.push(vec![
        source.kind().as_str().into(),
        total.into(),
        source.parameter().into(),
        (0.5 * total).into(),
        q.into(),
        gamma.into(),
        entropy.into(),
        cutoff.into(),
    ]);
    let mut meta = base_metadata("state-info", &a.out);
    meta.extend(source_metadata(&a.source, total));
    meta.insert("cutoff".into(), json!(cutoff));
    let summary = format!(
        "{} N={} parameter={} Q={} cutoff={}",
        source.kind(),
        fmt_float(total),
        fmt_float(source.parameter()),
        fmt_float(q),
        cutoff
    );
    emit(&a.out, Format::Csv, &table, meta, &summary)?;
    Ok(Outcome::Done)
}

fn joint_dist(a: &JointArgs) -> CliResult<Outcome> {
    check_tail_tol(&a.out)?;
    let (source, total) = source_of(&a.source)?;
    let (e1, e2) = a.channel.arms();
    let channel = ChannelParams::new(e1, e2)?;
    let cutoff = match a.cutoff {
        Some(c) => c,
        None => source.auto_cutoff(a.out.tail_tol)?,
    };
    let joint = LossyJoint::new(source, channel)?.distribution(cutoff, a.out.tail_tol)?;

    let mut table = Table::new(["p", "q", "probability"]);
    for (p, q, v) in joint.entries() {
        table.push(vec![p.into(), q.into(), v.into()]);
    }
    let mut meta = base_metadata("joint-dist", &a.out);
    meta.extend(source_metadata(&a.source, total));
    meta.insert("eta1".into(), json_float(e1));
    meta.insert("eta2".into(), json_float(e2));
    meta.insert("cutoff".into(), json!(cutoff));
    meta.insert("tail_mass".into(), json_float(joint.tail_mass()));
    let summary = format!(
        "{} N={} eta=({}, {}) cutoff={} tail_mass={}",
        source.kind(),
        fmt_float(total),
        fmt_float(e1),
        fmt_float(e2),
        cutoff,
        fmt_float(joint.tail_mass())
    );
    emit(&a.out, Format::Csv, &table, meta, &summary)?;
    Ok(Outcome::Done)
}

fn capacity_columns(alphabet: usize, compare: bool) -> Vec<String> {
    let mut cols: Vec<String> = ["N", "eta", "eta1", "eta2", "capacity_bits"].map(String::from).to_vec();
    cols.extend((1..alphabet).map(|k| format!("T{k}")));
    if compare {
        cols.push("T_mean".into());
        cols.push("capacity_mean_threshold_bits".into());
    }
    cols
}

fn capacity_row(row: &SweepRow, compare: bool) -> Vec<Cell> {
    let mut cells: Vec<Cell> = vec![
        row.mean_total.into(),
        row.eta.into(),
        row.eta1.into(),
        row.eta2.into(),
        row.capacity_bits.into(),
    ];
    cells.extend(row.thresholds.thresholds().iter().map(|&t| Cell::from(t)));
    if compare {
        let (t, mi) = row.mean_threshold.expect("binary rows carry the mean threshold");
        cells.push(t.into());
        cells.push(mi.into());
    }
    cells
}

fn rows_metadata(rows: &[SweepRow]) -> Value {
    Value::Array(
        rows.iter()
            .map(|r| json!({ "cutoff": r.cutoff, "tail_mass": json_float(r.tail_mass) }))
            .collect(),
    )
}

fn check_alphabet(alphabet: usize) -> CliResult<()> {
    if !(2..=protocol::MAX_ALPHABET).contains(&alphabet) {
        return Err(CliError::Usage(format!(
            "--alphabet must lie in 2..={}, got {alphabet}",
            protocol::MAX_ALPHABET
        )));
    }
    Ok(())
}

fn capacity(a: &CapacityArgs) -> CliResult<Outcome> {
    check_tail_tol(&a.out)?;
    check_alphabet(a.alphabet)?;
    let (source, total) = source_of(&a.source)?;
    let (e1, e2) = a.channel.arms();
    let channel = ChannelParams::new(e1, e2)?;
    let tol = a.out.tail_tol;
    let cutoff = source.auto_cutoff(tol)?;
    let joint = LossyJoint::new(source, channel)?.distribution(cutoff, tol)?;
    let result = protocol::capacity(&joint, a.alphabet)?;
    let row = SweepRow {
        mean_total: total,
        eta: channel.overall(),
        eta1: e1,
        eta2: e2,
        capacity_bits: result.capacity_bits,
        thresholds: result.best_thresholds.clone(),
        cutoff,
        tail_mass: joint.tail_mass(),
        mean_threshold: None,
    };
    let mut table = Table::new(capacity_columns(a.alphabet, false));
    table.push(capacity_row(&row, false));

    let m = a.alphabet;
    let symbol_table: Vec<Value> = (0..m)
        .map(|i| Value::Array((0..m).map(|j| json_float(result.table.get(i, j))).collect()))
        .collect();
    let mut meta = base_metadata("capacity", &a.out);
    meta.extend(source_metadata(&a.source, total));
    meta.insert("eta1".into(), json_float(e1));
    meta.insert("eta2".into(), json_float(e2));
    meta.insert("alphabet".into(), json!(m));
    meta.insert("cutoff".into(), json!(cutoff));
    meta.insert("tail_mass".into(), json_float(joint.tail_mass()));
    meta.insert("thresholds_evaluated".into(), json!(result.n_evaluated));
    meta.insert("symbol_table".into(), Value::Array(symbol_table));
    let summary = format!(
        "{} N={} eta=({}, {}) M={}: capacity {} bits at thresholds {:?}",
        source.kind(),
        fmt_float(total),
        fmt_float(e1),
        fmt_float(e2),
        m,
        fmt_float(result.capacity_bits),
        result.best_thresholds.thresholds()
    );
    emit(&a.out, Format::Json, &table, meta, &summary)?;
    Ok(Outcome::Done)
}

fn sweep(a: &SweepArgs) -> CliResult<Outcome> {
    check_tail_tol(&a.out)?;
    check_alphabet(a.alphabet)?;
    if a.compare_mean_threshold && a.alphabet != 2 {
        return Err(CliError::Usage("--compare-mean-threshold requires --alphabet 2".into()));
    }
    if let Some(bad) = a.means.iter().find(|m| !m.is_finite() || **m < 0.0) {
        return Err(CliError::Usage(format!("--means entries must be finite and >= 0, got {bad}")));
    }
    let totals: Vec<f64> = a.means.iter().map(|&m| a.convention.to_total(m)).collect();
    let rows = protocol::capacity_sweep(a.kind.into(), &totals, &a.etas, a.alphabet, a.out.tail_tol)?;

    let mut table = Table::new(capacity_columns(a.alphabet, a.compare_mean_threshold));
    for row in &rows {
        table.push(capacity_row(row, a.compare_mean_threshold));
    }
    let kind: StateKind = a.kind.into();
    let mut meta = base_metadata("sweep", &a.out);
    meta.insert("kind".into(), json!(kind.as_str()));
    meta.insert("convention".into(), json!(a.convention.as_str()));
    meta.insert("means_input".into(), Value::Array(a.means.iter().map(|&m| json_float(m)).collect()));
    meta.insert("etas".into(), Value::Array(a.etas.iter().map(|&e| json_float(e)).collect()));
    meta.insert("alphabet".into(), json!(a.alphabet));
    meta.insert("points".into(), rows_metadata(&rows));
    let summary = format!("{kind} sweep: {} grid points, M={}", rows.len(), a.alphabet);
    emit(&a.out, Format::Csv, &table, meta, &summary)?;
    Ok(Outcome::Done)
}

fn asym_sweep(a: &AsymArgs) -> CliResult<Outcome> {
    check_tail_tol(&a.out)?;
    check_alphabet(a.alphabet)?;
    let (source, total) = source_of(&a.source)?;
    let rows = protocol::asymmetry_sweep(source.kind(), total, a.eta, &a.eta1_grid, a.alphabet, a.out.tail_tol)?;

    let mut table = Table::new(capacity_columns(a.alphabet, false));
    for row in &rows {
        table.push(capacity_row(row, false));
    }
    let mut meta = base_metadata("asym-sweep", &a.out);
    meta.extend(source_metadata(&a.source, total));
    meta.insert("eta".into(), json_float(a.eta));
    meta.insert("eta1_grid".into(), Value::Array(a.eta1_grid.iter().map(|&e| json_float(e)).collect()));
    meta.insert("alphabet".into(), json!(a.alphabet));
    meta.insert("points".into(), rows_metadata(&rows));
    let summary = format!(
        "{} N={} eta={}: {} asymmetry points, M={}",
        source.kind(),
        fmt_float(total),
        fmt_float(a.eta),
        rows.len(),
        a.alphabet
    );
    emit(&a.out, Format::Csv, &table, meta, &summary)?;
    Ok(Outcome::Done)
}

fn curvature(a: &CurvatureArgs) -> CliResult<Outcome> {
    check_tail_tol(&a.out)?;
    let (source, total) = source_of(&a.source)?;
    let mut table = Table::new([
        "n",
        "coefficient",
        "coefficient_half_step",
        "extrapolated",
        "stable",
    ]);
    let mut unstable = 0;
    for n in 0..=a.n_max {
        let c = protocol::coincidence_curvature(&source, a.eta, n, a.delta)?;
        unstable += usize::from(!c.stable);
        table.push(vec![
            n.into(),
            c.coefficient.into(),
            c.coefficient_half_step.into(),
            c.extrapolated.into(),
            c.stable.into(),
        ]);
    }
    let mut meta = base_metadata("curvature", &a.out);
    meta.extend(source_metadata(&a.source, total));
    meta.insert("eta".into(), json_float(a.eta));
    meta.insert("delta".into(), json_float(a.delta));
    let mut summary = format!(
        "{} N={} eta={} delta={}: n = 0..={}",
        source.kind(),
        fmt_float(total),
        fmt_float(a.eta),
        fmt_float(a.delta),
        a.n_max
    );
    if unstable > 0 {
        summary.push_str(&format!("; {unstable} estimate(s) unstable under step halving, try a smaller --delta"));
    }
    emit(&a.out, Format::Csv, &table, meta, &summary)?;
    Ok(Outcome::Done)
}

fn run_verify(a: &VerifyArgs) -> CliResult<Outcome> {
    check_tail_tol(&a.out)?;
    let grid = match a.grid {
        GridArg::Default => VerifyGrid::default_grid(),
        GridArg::Quick => VerifyGrid::quick(),
    };
    let report = verify::run(&grid, a.out.tail_tol)?;

    let mut table = Table::new(["suite", "max_deviation", "tolerance", "points", "violations", "passed"]);
    for s in &report.suites {
        println!(
            "{:<20} max deviation {:<20} tolerance {:<8} points {:<4} violations {:<3} {}",
            s.name,
            fmt_float(s.max_deviation),
            fmt_float(s.tolerance),
            s.points,
            s.violations,
            if s.passed() { "PASS" } else { "FAIL" }
        );
        table.push(vec![
            s.name.into(),
            s.max_deviation.into(),
            s.tolerance.into(),
            s.points.into(),
            s.violations.into(),
            s.passed().into(),
        ]);
    }
    let passed = report.passed();
    println!("verify: {}", if passed { "all suites passed" } else { "tolerance violated" });

    if let Some(path) = &a.out.output {
        let mut meta = base_metadata("verify", &a.out);
        meta.insert(
            "grid".into(),
            json!({
                "means_total": report.grid.means_total.iter().map(|&m| json_float(m)).collect::<Vec<_>>(),
                "etas": report.grid.etas.iter().map(|&e| json_float(e)).collect::<Vec<_>>(),
            }),
        );
        let mut file = BufWriter::new(File::create(path)?);
        match a.out.format.unwrap_or(Format::Json) {
            Format::Csv => table.write_csv(&mut file)?,
            Format::Json => {
                serde_json::to_writer_pretty(&mut file, &table.to_json(Value::Object(meta))).map_err(io::Error::other)?;
                writeln!(file)?;
            }
        }
        file.flush()?;
        println!("wrote {}", path.display());
    }
    Ok(if passed { Outcome::Done } else { Outcome::VerificationFailed })
}
