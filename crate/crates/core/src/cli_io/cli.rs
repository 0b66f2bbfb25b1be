//! Command-line front end. `main` only forwards to [`run`].

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use super::bench::{run_split_benchmark, run_wendelberger, WendelbergerSetup};
use super::data::{load_covariates, load_csv, read_table, validate_ozone, ResponseSelector};
use super::model_file::SavedModel;
use super::report::FitReport;
use super::surface::GridSurface;
use crate::engine::fit;
use crate::error::{IbrError, Result};
use crate::forward::forward_select;
use crate::selection::{CriterionKind, CvPlan, FoldScheme, Loss, SearchMode, SelectionPlan, SplitType};
use crate::smoother::{KernelKind, SmootherConfig};

#[derive(Debug, Parser)]
#[command(name = "ibr", version, about = "Iterative bias reduction smoothing")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a model and print its summary.
    Fit(FitArgs),
    /// Predict new observations with a saved model.
    Predict(PredictArgs),
    /// Forward variable selection.
    Forward(ForwardArgs),
    /// Built-in benchmark experiments.
    #[command(subcommand)]
    Bench(BenchCommand),
    /// Render predictions on a regular 2-d grid as an SVG heat map.
    Surface(SurfaceArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SmootherChoice {
    /// Thin-plate spline.
    Tps,
    /// Product kernel.
    K,
}

#[derive(Debug, Clone, Args)]
pub struct SmootherArgs {
    #[arg(long, value_enum, default_value = "k")]
    pub smoother: SmootherChoice,
    /// Kernel tag: g (gaussian), t (triangle), q (quartic), e (epanechnikov), u (uniform).
    #[arg(long, default_value = "g")]
    pub kernel: String,
    /// Per-variable trace for kernels, null-space multiplier for splines.
    #[arg(long, default_value_t = 1.1)]
    pub df: f64,
    /// Total trace of the kernel smoother; overrides --df.
    #[arg(long)]
    pub dftotal: Option<f64>,
    /// Thin-plate spline order.
    #[arg(long)]
    pub order: Option<usize>,
}

impl SmootherArgs {
    pub fn config(&self) -> Result<SmootherConfig> {
        let kind = KernelKind::from_tag(&self.kernel)?;
        Ok(match self.smoother {
            SmootherChoice::Tps => {
                if self.dftotal.is_some() {
                    return Err(IbrError::InvalidInput("--dftotal applies to kernel smoothers only".into()));
                }
                SmootherConfig::Tps { order: self.order, df: self.df }
            }
            SmootherChoice::K => match self.dftotal {
                Some(total) => SmootherConfig::Kernel { kind, df: total, total: true },
                None => SmootherConfig::Kernel { kind, df: self.df, total: false },
            },
        })
    }
}

#[derive(Debug, Clone, Args)]
pub struct SelectionArgs {
    /// gcv, aic, aicc, bic, gmdl, rmse or map.
    #[arg(long, default_value = "gcv")]
    pub criterion: String,
    #[arg(long, default_value_t = 1.0)]
    pub kmin: f64,
    #[arg(long, default_value_t = 1e5)]
    pub kmax: f64,
    /// Search every integer iteration count instead of the numeric search.
    #[arg(long)]
    pub exhaustive: bool,
    /// Largest admissible effective degrees of freedom (default 2n/3).
    #[arg(long)]
    pub dfmaxi: Option<f64>,
    /// Fixed number of iterations; skips the search.
    #[arg(long)]
    pub iter: Option<u64>,
    /// Subinterval breakpoints for the numeric search, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub fraction: Option<Vec<f64>>,
    /// K-fold cross-validation: a number of folds, or `true` to derive it from the test size.
    #[arg(long = "cv-kfold")]
    pub cv_kfold: Option<String>,
    #[arg(long = "cv-ntest")]
    pub cv_ntest: Option<usize>,
    #[arg(long = "cv-ntrain")]
    pub cv_ntrain: Option<usize>,
    #[arg(long = "cv-npermut")]
    pub cv_npermut: Option<usize>,
    /// random, consecutive, interleaved or timeseries.
    #[arg(long = "cv-type")]
    pub cv_type: Option<String>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

impl SelectionArgs {
    pub fn plan(&self) -> Result<SelectionPlan> {
        let criterion = CriterionKind::parse(&self.criterion)?;
        let mut plan = SelectionPlan::with_criterion(criterion);
        plan.kmin = self.kmin;
        plan.kmax = self.kmax;
        plan.dfmaxi = self.dfmaxi;
        if let Some(f) = &self.fraction {
            plan.fraction = f.clone();
        }
        plan.mode = match (self.iter, self.exhaustive) {
            (Some(_), true) => {
                return Err(IbrError::InvalidInput("--iter and --exhaustive are exclusive".into()))
            }
            (Some(k), false) => SearchMode::Fixed(k),
            (None, true) => SearchMode::Exhaustive,
            (None, false) => SearchMode::Numeric,
        };
        let cv_flags = self.cv_kfold.is_some()
            || self.cv_ntest.is_some()
            || self.cv_ntrain.is_some()
            || self.cv_npermut.is_some()
            || self.cv_type.is_some();
        match Loss::from_criterion(criterion) {
            Some(loss) => {
                let mut cv = CvPlan::for_loss(loss);
                cv.seed = self.seed;
                cv.ntest = self.cv_ntest;
                cv.ntrain = self.cv_ntrain;
                if let Some(p) = self.cv_npermut {
                    cv.npermut = p;
                }
                if let Some(t) = &self.cv_type {
                    cv.split_type = SplitType::parse(t)?;
                }
                cv.scheme = match self.cv_kfold.as_deref() {
                    None => FoldScheme::DataSplit,
                    Some("true" | "TRUE") => FoldScheme::KFold(None),
                    Some(v) => FoldScheme::KFold(Some(v.parse().map_err(|_| {
                        IbrError::InvalidInput(format!(
                            "--cv-kfold expects a fold count or 'true', got '{v}'"
                        ))
                    })?)),
                };
                plan.cv = Some(cv);
            }
            None if cv_flags => {
                return Err(IbrError::InvalidInput(format!(
                    "cross-validation options need --criterion rmse or map, not '{criterion}'"
                )))
            }
            None => {}
        }
        Ok(plan)
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Response column, by name or 1-based position.
    #[arg(long, default_value = "1")]
    pub response: String,
    #[command(flatten)]
    pub smoother: SmootherArgs,
    #[command(flatten)]
    pub selection: SelectionArgs,
    /// Write the fitted model here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// CSV of new covariate values.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Output CSV; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ForwardArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "1")]
    pub response: String,
    #[command(flatten)]
    pub smoother: SmootherArgs,
    #[command(flatten)]
    pub selection: SelectionArgs,
    /// Criterion comparing candidate variables.
    #[arg(long, default_value = "gcv")]
    pub varcrit: String,
    /// Write the criterion matrix as CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum BenchCommand {
    /// Simulated thin-plate spline experiment on the unit square.
    Wendelberger(WendelbergerArgs),
    /// Repeated random-split prediction error on the ozone data.
    Ozone(OzoneArgs),
}

#[derive(Debug, Args)]
pub struct WendelbergerArgs {
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Noise variance relative to the signal variance.
    #[arg(long, default_value_t = 0.2)]
    pub noise: f64,
    #[arg(long, default_value = "gcv")]
    pub criterion: String,
    #[arg(long, default_value_t = 1.1)]
    pub df: f64,
    /// Write grid predictions (x, y, fit) as CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OzoneArgs {
    #[arg(long, default_value = "data/ozone.csv")]
    pub data: PathBuf,
    #[arg(long, default_value_t = 50)]
    pub repeats: usize,
    #[arg(long, default_value_t = 33)]
    pub ntest: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value = "gcv")]
    pub criterion: String,
}

#[derive(Debug, Args)]
pub struct SurfaceArgs {
    /// CSV whose first two columns are grid coordinates and last column the value.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// SVG output path.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional whitespace-separated z matrix output.
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    #[arg(long, default_value = "Fitted surface")]
    pub title: String,
}

fn writer(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(std::io::BufWriter::new(fs::File::create(p)?)),
        None => Box::new(std::io::stdout().lock()),
    })
}

pub fn cmd_fit(args: &FitArgs, out: &mut dyn Write) -> Result<()> {
    let data = load_csv(&args.data, &ResponseSelector::Name(args.response.clone()))?;
    let config = args.smoother.config()?;
    let plan = args.selection.plan()?;
    let model = fit(&data.design, &data.response, &config, &plan)?;
    writeln!(out, "{}", FitReport::from_fit(&model))?;
    if let Some(path) = &args.out {
        SavedModel::from_fit(&model, &data.response_name).save(path)?;
        writeln!(out, "Model written to {}", path.display())?;
    }
    Ok(())
}

pub fn cmd_predict(args: &PredictArgs) -> Result<()> {
    let model = SavedModel::load(&args.model)?;
    let (names, x) = load_covariates(&args.input, &model.covariates)?;
    let pred = model.predict(&x)?;
    let mut w = csv::Writer::from_writer(writer(args.out.as_deref())?);
    let mut header = names;
    header.push("prediction".into());
    w.write_record(&header)?;
    for i in 0..x.nrows() {
        let mut rec: Vec<String> = x.row(i).iter().map(|v| v.to_string()).collect();
        rec.push(pred[i].to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn cmd_forward(args: &ForwardArgs, out: &mut dyn Write) -> Result<()> {
    let data = load_csv(&args.data, &ResponseSelector::Name(args.response.clone()))?;
    let config = args.smoother.config()?;
    let plan = args.selection.plan()?;
    let varcrit = CriterionKind::parse(&args.varcrit)?;
    let result = forward_select(&data.design, &data.response, &config, &plan, varcrit)?;
    let names = data.design.names();
    write!(out, "{:>6}", "stage")?;
    for n in names {
        write!(out, " {n:>10}")?;
    }
    writeln!(out)?;
    for (s, row) in result.r.iter().enumerate() {
        write!(out, "{:>6}", s + 1)?;
        for v in row {
            if v.is_finite() {
                write!(out, " {v:>10.4}")?;
            } else {
                write!(out, " {:>10}", "")?;
            }
        }
        writeln!(out)?;
    }
    let chosen: Vec<&str> = result.selected_order.iter().map(|&j| names[j].as_str()).collect();
    writeln!(out, "Selected variables (in order): {}", chosen.join(", "))?;
    if let Some(path) = &args.out {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(names)?;
        for row in &result.r {
            w.write_record(row.iter().map(|v| if v.is_finite() { v.to_string() } else { String::new() }))?;
        }
        w.flush()?;
    }
    Ok(())
}

pub fn cmd_wendelberger(args: &WendelbergerArgs, out: &mut dyn Write) -> Result<()> {
    let setup = WendelbergerSetup { seed: args.seed, noise: args.noise, ..WendelbergerSetup::default() };
    let config = SmootherConfig::Tps { order: None, df: args.df };
    let plan = SelectionPlan::with_criterion(CriterionKind::parse(&args.criterion)?);
    let res = run_wendelberger(&setup, &config, &plan)?;
    writeln!(out, "{}", FitReport::from_fit(&res.fit))?;
    writeln!(out, "Mean absolute error on the {0}x{0} grid: {1:.5}", setup.eval_per_axis, res.mae)?;
    if let Some(path) = &args.out {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["x", "y", "fit"])?;
        for i in 0..res.grid.nrows() {
            w.write_record([res.grid[(i, 0)], res.grid[(i, 1)], res.predictions[i]].map(|v| v.to_string()))?;
        }
        w.flush()?;
    }
    Ok(())
}

pub fn cmd_ozone(args: &OzoneArgs, out: &mut dyn Write) -> Result<()> {
    if !args.data.exists() {
        return Err(IbrError::Data(format!(
            "{} not found; run scripts/fetch_ozone.py to download it",
            args.data.display()
        )));
    }
    let data = load_csv(&args.data, &ResponseSelector::Index(1))?;
    validate_ozone(&data)?;
    let plan = SelectionPlan::with_criterion(CriterionKind::parse(&args.criterion)?);
    let config = SmootherConfig::default();
    let full = fit(&data.design, &data.response, &config, &plan)?;
    writeln!(out, "{}", FitReport::from_fit(&full))?;
    let bench = run_split_benchmark(
        &data.design,
        &data.response,
        &config,
        &plan,
        args.repeats,
        args.ntest,
        args.seed,
    )?;
    let ks: Vec<f64> = bench.splits.iter().map(|s| s.k).collect();
    let mean_k = ks.iter().sum::<f64>() / ks.len() as f64;
    writeln!(
        out,
        "{} splits of {}/{}: pooled test MSE {:.3}, mean k {:.1}",
        args.repeats,
        data.design.n() - args.ntest,
        args.ntest,
        bench.pooled_mse,
        mean_k
    )?;
    Ok(())
}

pub fn cmd_surface(args: &SurfaceArgs) -> Result<()> {
    let table = read_table(&args.input)?;
    let c = table.header.len();
    if c < 3 {
        return Err(IbrError::Data("surface input needs x, y and value columns".into()));
    }
    let points: Vec<[f64; 3]> = table.rows.iter().map(|r| [r[0], r[1], r[c - 1]]).collect();
    let grid = GridSurface::from_points(&points, [&table.header[0], &table.header[1], &table.header[c - 1]])?;
    fs::write(&args.out, grid.to_svg(&args.title))?;
    if let Some(m) = &args.matrix {
        fs::write(m, grid.to_matrix_text())?;
    }
    Ok(())
}

/// Runs a parsed command line.
pub fn run(cli: Cli) -> Result<()> {
    let mut stdout = std::io::stdout().lock();
    match &cli.command {
        Command::Fit(a) => cmd_fit(a, &mut stdout),
        Command::Predict(a) => cmd_predict(a),
        Command::Forward(a) => cmd_forward(a, &mut stdout),
        Command::Bench(BenchCommand::Wendelberger(a)) => cmd_wendelberger(a, &mut stdout),
        Command::Bench(BenchCommand::Ozone(a)) => cmd_ozone(a, &mut stdout),
        Command::Surface(a) => cmd_surface(a),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("ibr").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn fit_flags_map_to_plan() {
        let cli =
            parse(&["fit", "--data", "d.csv", "--smoother", "tps", "--criterion", "aicc", "--exhaustive"]);
        let Command::Fit(a) = cli.command else { panic!() };
        assert_eq!(a.smoother.config().unwrap(), SmootherConfig::Tps { order: None, df: 1.1 });
        let plan = a.selection.plan().unwrap();
        assert_eq!(plan.criterion, CriterionKind::Aicc);
        assert_eq!(plan.mode, SearchMode::Exhaustive);
    }

    #[test]
    fn cv_flags() {
        let cli = parse(&[
            "fit",
            "--data",
            "d",
            "--criterion",
            "rmse",
            "--cv-kfold",
            "5",
            "--cv-type",
            "interleaved",
        ]);
        let Command::Fit(a) = cli.command else { panic!() };
        let cv = a.selection.plan().unwrap().cv.unwrap();
        assert_eq!(cv.scheme, FoldScheme::KFold(Some(5)));
        assert_eq!(cv.split_type, SplitType::Interleaved);
        let cli = parse(&["fit", "--data", "d", "--cv-ntest", "5"]);
        let Command::Fit(a) = cli.command else { panic!() };
        assert!(a.selection.plan().is_err());
    }

    #[test]
    fn dftotal_builds_total_kernel() {
        let cli = parse(&["fit", "--data", "d", "--kernel", "t", "--dftotal", "4"]);
        let Command::Fit(a) = cli.command else { panic!() };
        assert_eq!(
            a.smoother.config().unwrap(),
            SmootherConfig::Kernel { kind: KernelKind::Triangle, df: 4.0, total: true }
        );
    }

    #[test]
    fn iter_and_exhaustive_conflict() {
        let cli = parse(&["fit", "--data", "d", "--iter", "3", "--exhaustive"]);
        let Command::Fit(a) = cli.command else { panic!() };
        assert!(a.selection.plan().is_err());
    }
}
