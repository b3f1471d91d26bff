//! `robust-kf`: design, score and stress-test robust Kalman filters.
//!
//! Exit codes: 0 success, 2 configuration or parse error, 3 numerical
//! infeasibility, 4 dimension mismatch. Outputs are staged and only moved
//! into `--out` once every file of the command has been produced.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;
use robust_kf::evaluate::{self, to_db, EvaluationResult, Plant};
use robust_kf::io::{self, GainsDocument, LoadedModel, ModelDocument};
use robust_kf::leastfav::{self, LeastFavorableModel};
use robust_kf::model::{StateSpaceModel, ToleranceSchedule};
use robust_kf::reproduce::{self, Table};
use robust_kf::robust_filter;
use robust_kf::{Error, ErrorKind};

#[derive(Debug, Parser)]
#[command(name = "robust-kf", version, about = "Robust minimax Kalman filtering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Design the robust filter and write its multipliers and covariances.
    Design {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        tolerance: ToleranceArg,
        #[command(flatten)]
        out: OutArg,
    },
    /// Build the least-favorable model and export it with diagnostics.
    Leastfav {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        tolerance: ToleranceArg,
        /// Extra steps appended before the backward sweep.
        #[arg(long, default_value_t = 300)]
        pad: usize,
        #[command(flatten)]
        out: OutArg,
    },
    /// Score a gain sequence on a nominal or least-favorable model.
    Evaluate {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        gains: GainsArgs,
        #[command(flatten)]
        out: OutArg,
    },
    /// Monte Carlo estimate of the error variances.
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        gains: GainsArgs,
        #[arg(long, default_value_t = 10_000)]
        paths: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: OutArg,
    },
    /// Rerun the reference experiments: seven figure series and a summary.
    Reproduce {
        /// Extra steps appended before the backward sweep.
        #[arg(long, default_value_t = robust_kf::reference::PAD)]
        pad: usize,
        #[command(flatten)]
        out: OutArg,
    },
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// Model file, JSON or TOML (chosen by extension).
    #[arg(long)]
    model: PathBuf,
    /// Truncate or extend the model to this horizon.
    #[arg(long)]
    horizon: Option<usize>,
}

#[derive(Debug, Args)]
struct ToleranceArg {
    /// Per-step tolerance in nats, or a file with one value per step.
    /// Defaults to the model file's `tolerance`.
    #[arg(long)]
    tolerance: Option<String>,
}

#[derive(Debug, Args)]
struct GainsArgs {
    /// `kalman`, `robust`, or a gains file.
    #[arg(long, default_value = "kalman")]
    gains: String,
    #[command(flatten)]
    tolerance: ToleranceArg,
}

#[derive(Debug, Args)]
struct OutArg {
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e.kind() {
            ErrorKind::Config => 2,
            ErrorKind::Numerical => 3,
            ErrorKind::Dimension => 4,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            message: message.into(),
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(command: Command) -> CliResult<()> {
    match command {
        Command::Design {
            model,
            tolerance,
            out,
        } => {
            let (model, file_tol) = load_nominal(&model)?;
            let tol = resolve_tolerance(&tolerance, file_tol)?;
            let design = robust_filter::design(&model, &tol)?;
            design.check_invariants()?;
            let mut outputs = Outputs::default();
            outputs.csv("design.csv", &design_table(&design)?)?;
            outputs.commit(&out.out)
        }
        Command::Leastfav {
            model,
            tolerance,
            pad,
            out,
        } => {
            let (model, file_tol) = load_nominal(&model)?;
            let tol = resolve_tolerance(&tolerance, file_tol)?;
            let lf = leastfav::construct(&model, &tol, pad)?;
            let mut outputs = Outputs::default();
            outputs.csv("leastfav.csv", &leastfav_table(&lf))?;
            let doc = ModelDocument::from_lf(&lf).render(io::Format::Json)?;
            outputs.add("lf_model.json", doc.into_bytes());
            outputs.commit(&out.out)
        }
        Command::Evaluate { model, gains, out } => {
            let loaded = load(&model)?;
            let plant = loaded.plant();
            let (label, gains) = resolve_gains(&gains, &loaded)?;
            let result = plant.evaluate(&gains)?;
            let mut outputs = Outputs::default();
            outputs.csv(
                &format!("evaluate_{label}.csv"),
                &evaluation_table(&result)?,
            )?;
            outputs.commit(&out.out)
        }
        Command::Simulate {
            model,
            gains,
            paths,
            seed,
            out,
        } => {
            if paths == 0 {
                return Err(Failure::config("--paths must be at least 1"));
            }
            let loaded = load(&model)?;
            let (_, gains) = resolve_gains(&gains, &loaded)?;
            let summary = evaluate::simulate(loaded.plant(), &gains, paths, seed)?;
            let mut outputs = Outputs::default();
            outputs.csv("simulate.csv", &simulation_table(&summary))?;
            outputs.commit(&out.out)
        }
        Command::Reproduce { pad, out } => {
            let model = robust_kf::reference::model(robust_kf::reference::HORIZON);
            let rep = reproduce::run(
                &model,
                &robust_kf::reference::TOLERANCES,
                robust_kf::reference::COMPARISON_TOLERANCE,
                pad,
            )?;
            for d in &rep.designs {
                d.check_invariants()?;
            }
            let mut outputs = Outputs::default();
            for (name, table) in rep.figures()? {
                outputs.csv(&name, &table)?;
            }
            let summary = rep.summary()?;
            outputs.csv(
                "summary.csv",
                &summary.table(&rep.tolerances, rep.comparison_tolerance),
            )?;
            outputs.commit(&out.out)
        }
    }
}

enum Loaded {
    Nominal {
        model: StateSpaceModel,
        tolerance: Option<ToleranceSchedule>,
    },
    LeastFavorable(Box<LeastFavorableModel>),
}

impl Loaded {
    fn plant(&self) -> Plant<'_> {
        match self {
            Loaded::Nominal { model, .. } => Plant::Nominal(model),
            Loaded::LeastFavorable(lf) => Plant::LeastFavorable(lf),
        }
    }

    fn nominal(&self) -> &StateSpaceModel {
        self.plant().nominal()
    }

    fn file_tolerance(&self) -> Option<ToleranceSchedule> {
        match self {
            Loaded::Nominal { tolerance, .. } => tolerance.clone(),
            Loaded::LeastFavorable(lf) => Some(lf.tolerance().clone()),
        }
    }
}

fn load(args: &ModelArgs) -> CliResult<Loaded> {
    let doc = ModelDocument::read(&args.model)?;
    match doc.load()? {
        LoadedModel::Nominal { model, tolerance } => {
            let model = match args.horizon {
                Some(h) => model.with_horizon(h),
                None => model,
            };
            Ok(Loaded::Nominal { model, tolerance })
        }
        LoadedModel::LeastFavorable(lf) => match args.horizon {
            Some(h) if h > lf.horizon() => Err(Failure::config(format!(
                "--horizon {h} exceeds the least-favorable model's horizon {}",
                lf.horizon()
            ))),
            Some(h) => Ok(Loaded::LeastFavorable(Box::new(lf.truncated(h)))),
            None => Ok(Loaded::LeastFavorable(lf)),
        },
    }
}

fn load_nominal(args: &ModelArgs) -> CliResult<(StateSpaceModel, Option<ToleranceSchedule>)> {
    match load(args)? {
        Loaded::Nominal { model, tolerance } => Ok((model, tolerance)),
        Loaded::LeastFavorable(_) => Err(Failure::config(
            "this command needs a nominal model, not a least-favorable export",
        )),
    }
}

fn resolve_tolerance(
    arg: &ToleranceArg,
    from_file: Option<ToleranceSchedule>,
) -> CliResult<ToleranceSchedule> {
    match (&arg.tolerance, from_file) {
        (Some(text), _) => Ok(io::parse_tolerance(text)?),
        (None, Some(tol)) => Ok(tol),
        (None, None) => Err(Failure::config(
            "no tolerance: pass --tolerance or set `tolerance` in the model file",
        )),
    }
}

fn resolve_gains(args: &GainsArgs, loaded: &Loaded) -> CliResult<(String, Vec<DMatrix<f64>>)> {
    let nominal = loaded.nominal();
    match args.gains.as_str() {
        "kalman" => Ok((
            "kalman".into(),
            robust_filter::kalman_design(nominal)?.gains(),
        )),
        "robust" => {
            let tol = resolve_tolerance(&args.tolerance, loaded.file_tolerance())?;
            Ok((
                "robust".into(),
                robust_filter::design(nominal, &tol)?.gains(),
            ))
        }
        path => {
            let doc = GainsDocument::read(Path::new(path))?;
            let gains = doc.gains(nominal.n(), nominal.p(), nominal.horizon() + 1)?;
            Ok(("file".into(), gains))
        }
    }
}

fn design_table(design: &robust_filter::FilterDesign) -> CliResult<Table> {
    let n = design.v(0).nrows();
    let mut headers = vec!["t".to_string(), "theta".into(), "lambda".into()];
    headers.extend((1..=n).map(|i| format!("V{i}{i}")));
    headers.extend((1..=n).map(|i| format!("P{i}{i}")));
    headers.extend((1..=n).map(|i| format!("V{i}{i}_dB")));
    let mut table = Table::new("design", headers);
    for t in 0..=design.horizon() {
        let step = design.step(t);
        let v = step.v_next.diagonal();
        let p = step.p_next.diagonal();
        let mut row = vec![step.theta(), step.lambda()];
        row.extend(v.iter());
        row.extend(p.iter());
        for &x in v.iter() {
            row.push(to_db(x)?);
        }
        table.push_numeric(t, row);
    }
    Ok(table)
}

fn leastfav_table(lf: &LeastFavorableModel) -> Table {
    let mut table = Table::new(
        "leastfav",
        ["t", "H_norm", "Kv_min_eig", "W_trace"]
            .map(String::from)
            .to_vec(),
    );
    for t in 0..=lf.horizon() {
        let kv_min = lf.kv(t).clone().symmetric_eigenvalues().min();
        table.push_numeric(t, [lf.h(t).norm(), kv_min, lf.w_trace(t)]);
    }
    table
}

fn evaluation_table(result: &EvaluationResult) -> CliResult<Table> {
    let n = result.variances(0).len();
    let mut headers = vec!["t".to_string()];
    headers.extend((1..=n).map(|i| format!("var{i}")));
    headers.extend((1..=n).map(|i| format!("var{i}_dB")));
    let mut table = Table::new("evaluate", headers);
    for t in 0..result.final_index() {
        let var = result.variances(t + 1);
        let db = result.variances_db(t + 1)?;
        table.push_numeric(t, var.iter().chain(db.iter()).copied());
    }
    Ok(table)
}

fn simulation_table(summary: &evaluate::SimulationSummary) -> Table {
    let n = summary.variances(0).len();
    let mut headers = vec!["t".to_string()];
    headers.extend((1..=n).map(|i| format!("empirical_var{i}")));
    headers.extend((1..=n).map(|i| format!("stderr{i}")));
    let mut table = Table::new("simulate", headers);
    for t in 0..summary.second_moments.len() - 1 {
        let var = summary.variances(t + 1);
        table.push_numeric(
            t,
            var.iter().chain(summary.std_errors[t + 1].iter()).copied(),
        );
    }
    table
}

/// Files of one command, written together or not at all.
#[derive(Default)]
struct Outputs {
    files: Vec<(String, Vec<u8>)>,
}

impl Outputs {
    fn add(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_string(), bytes));
    }

    fn csv(&mut self, name: &str, table: &Table) -> CliResult<()> {
        let mut bytes = format!("# schema={} v1\n", table.schema).into_bytes();
        let mut writer = csv::WriterBuilder::new().from_writer(&mut bytes);
        let encode = |e: csv::Error| Failure::config(format!("cannot encode {name}: {e}"));
        writer.write_record(&table.headers).map_err(encode)?;
        for row in &table.rows {
            writer.write_record(row).map_err(encode)?;
        }
        writer
            .flush()
            .map_err(|e| Failure::config(format!("cannot encode {name}: {e}")))?;
        drop(writer);
        self.add(name, bytes);
        Ok(())
    }

    fn commit(self, dir: &Path) -> CliResult<()> {
        let io_err = |what: &str, path: &Path, e: std::io::Error| {
            Failure::config(format!("cannot {what} {}: {e}", path.display()))
        };
        fs::create_dir_all(dir).map_err(|e| io_err("create", dir, e))?;
        let mut staged = Vec::with_capacity(self.files.len());
        for (name, bytes) in &self.files {
            let tmp = dir.join(format!(".{name}.partial"));
            if let Err(e) = fs::write(&tmp, bytes) {
                for (t, _) in &staged {
                    let _ = fs::remove_file(t);
                }
                let _ = fs::remove_file(&tmp);
                return Err(io_err("write", &tmp, e));
            }
            staged.push((tmp, dir.join(name)));
        }
        for (tmp, dest) in &staged {
            fs::rename(tmp, dest).map_err(|e| io_err("write", dest, e))?;
        }
        Ok(())
    }
}
