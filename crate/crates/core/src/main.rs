use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use replicator_influence::chart::{LineChart, Series};
use replicator_influence::dataset::{self, load_csv_path};
use replicator_influence::dynamics::classify_equilibria;
use replicator_influence::influence::{normalize_payoff, synthesize_payoff};
use replicator_influence::learn::{self, prepare_inputs, split, Split};
use replicator_influence::simulate::{self, format_number, target_equilibrium};
use replicator_influence::{
    ConstraintMode, ConstraintSpec, Error, Execution, FitOptions, FitReport, GridSpec,
    InfluenceMatrix, InputVector, MarketDataset, Result, ScenarioSpec, Trajectory,
};

/// Relative output paths are resolved against this directory when set.
const OUT_DIR_VAR: &str = "REPINF_OUT_DIR";

#[derive(Parser)]
#[command(
    name = "repinf",
    version,
    about = "Replicator dynamics with input-driven payoffs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Learn the influence matrix by exhaustive grid search.
    Fit(FitArgs),
    /// Replay the observed inputs under a given influence matrix.
    Simulate(SimulateArgs),
    /// Counterfactual runs: constant inputs, constant market, custom inputs.
    Scenario(ScenarioArgs),
    /// Equilibria of the payoff matrix produced by one input vector.
    Equilibria(EquilibriaArgs),
}

#[derive(Args)]
struct DataArgs {
    /// Market dataset CSV; the bundled synthetic dataset when omitted.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Fraction of samples held out for validation.
    #[arg(long, default_value_t = 0.2)]
    holdout: f64,
    /// Euler step size.
    #[arg(long, default_value_t = 1.0)]
    dt: f64,
    /// Feed inputs in their original units instead of min-max scaling them.
    #[arg(long)]
    raw_inputs: bool,
}

#[derive(Args)]
struct GridArgs {
    /// Search radius: coefficients range over the integers -r..=r.
    #[arg(long, default_value_t = 4, allow_negative_numbers = true)]
    r: i64,
    /// Constraint mode: full, cross or none.
    #[arg(long, default_value = "full")]
    constraints: String,
    /// Owning strategy (1-based) of each input, comma separated.
    #[arg(long)]
    ownership: Option<String>,
    /// Evaluate candidates on the calling thread only.
    #[arg(long)]
    sequential: bool,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    grid: GridArgs,
    /// Fit report JSON.
    #[arg(long)]
    out: PathBuf,
    /// Every candidate's training error as CSV.
    #[arg(long)]
    dump_candidates: Option<PathBuf>,
    /// Raise r from 1 until the training error reaches --target.
    #[arg(long)]
    auto_radius: bool,
    #[arg(long, default_value_t = learn::DEFAULT_ESCALATION_TARGET)]
    target: f64,
    #[arg(long, default_value_t = 6)]
    max_r: u32,
    /// Chart of fitted and observed shares.
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Influence matrix JSON, or a fit report.
    #[arg(long)]
    alpha: PathBuf,
    /// Trajectory CSV.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScenarioKindArg {
    ConstantInputs,
    ConstantMarket,
    CustomInputs,
}

#[derive(Args)]
struct ScenarioArgs {
    #[arg(long, value_enum)]
    kind: ScenarioKindArg,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    grid: GridArgs,
    /// Influence matrix JSON or fit report (constant-inputs, custom-inputs).
    #[arg(long)]
    alpha: Option<PathBuf>,
    /// Input series CSV for custom-inputs.
    #[arg(long)]
    inputs: Option<PathBuf>,
    /// Steps to simulate; the dataset horizon by default.
    #[arg(long)]
    horizon: Option<usize>,
    /// Trajectory CSV, or the fit report for constant-market.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args)]
struct EquilibriaArgs {
    /// Influence matrix JSON or fit report.
    #[arg(long)]
    alpha: PathBuf,
    /// Comma-separated input vector.
    #[arg(long, allow_hyphen_values = true)]
    y: String,
    /// Scale `y` with this dataset's training-window statistics first.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, default_value_t = 0.2)]
    holdout: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fit(args) => cmd_fit(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Scenario(args) => cmd_scenario(args),
        Command::Equilibria(args) => cmd_equilibria(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("repinf: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn output_path(path: &Path) -> PathBuf {
    match std::env::var_os(OUT_DIR_VAR) {
        Some(dir) if path.is_relative() => Path::new(&dir).join(path),
        _ => path.to_path_buf(),
    }
}

fn write_output(path: &Path, contents: &str) -> Result<PathBuf> {
    let path = output_path(path);
    std::fs::write(&path, contents).map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(path)
}

fn load_dataset(path: Option<&Path>) -> Result<MarketDataset> {
    match path {
        Some(p) => load_csv_path(p),
        None => Ok(MarketDataset::bundled()),
    }
}

/// Accepts a bare influence matrix document or a fit report.
fn load_alpha(path: &Path) -> Result<InfluenceMatrix> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    if value.get("best_alpha").is_some() {
        Ok(FitReport::from_json(&text)?.best_alpha)
    } else {
        InfluenceMatrix::from_json(&text)
    }
}

fn parse_list<T: std::str::FromStr>(flag: &str, text: &str) -> Result<Vec<T>> {
    text.split(',')
        .map(|v| {
            v.trim().parse().map_err(|_| {
                Error::Argument(format!("--{flag}: `{}` is not a valid value", v.trim()))
            })
        })
        .collect()
}

fn check_data_args(args: &DataArgs) -> Result<()> {
    if !(args.holdout > 0.0 && args.holdout < 1.0) {
        return Err(Error::Argument(format!(
            "--holdout must lie strictly between 0 and 1, got {}",
            args.holdout
        )));
    }
    if !(args.dt > 0.0 && args.dt.is_finite()) {
        return Err(Error::Argument(format!(
            "--dt must be positive, got {}",
            args.dt
        )));
    }
    Ok(())
}

fn radius(args: &GridArgs) -> Result<u32> {
    u32::try_from(args.r).map_err(|_| {
        Error::Argument(format!(
            "--r must be a non-negative integer, got {}",
            args.r
        ))
    })
}

fn constraint_spec(args: &GridArgs, n: usize, n_y: usize) -> Result<ConstraintSpec> {
    let mode: ConstraintMode = args.constraints.parse()?;
    if mode == ConstraintMode::Unconstrained && n != 2 {
        return Ok(ConstraintSpec {
            mode,
            swap: (0..n).collect(),
            pairing: (0..n_y).collect(),
            ownership: vec![0; n_y],
        });
    }
    if n != 2 {
        return Err(Error::UnsupportedDimension {
            operation: "symmetric constraint modes",
            required: 2,
            actual: n,
        });
    }
    let Some(text) = &args.ownership else {
        return ConstraintSpec::two_product(mode, n_y);
    };
    let owners: Vec<usize> = parse_list("ownership", text)?;
    if owners.len() != n_y || owners.iter().any(|&o| o != 1 && o != 2) {
        return Err(Error::Argument(format!(
            "--ownership needs {n_y} entries, each 1 or 2"
        )));
    }
    let ownership: Vec<usize> = owners.iter().map(|o| o - 1).collect();
    // k-th input of strategy 1 corresponds to the k-th input of strategy 2
    let of = |s: usize| -> Vec<usize> { (0..n_y).filter(|&m| ownership[m] == s).collect() };
    let (first, second) = (of(0), of(1));
    let mut pairing: Vec<usize> = (0..n_y).collect();
    if mode != ConstraintMode::Unconstrained {
        if first.len() != second.len() {
            return Err(Error::Argument(
                "--ownership must give both strategies the same number of inputs".into(),
            ));
        }
        for (&a, &b) in first.iter().zip(&second) {
            pairing[a] = b;
            pairing[b] = a;
        }
    }
    let spec = ConstraintSpec {
        mode,
        swap: vec![1, 0],
        pairing,
        ownership,
    };
    spec.validate(n, n_y)?;
    Ok(spec)
}

fn fit_options(data: &DataArgs, grid: &GridArgs, record: bool) -> FitOptions {
    FitOptions {
        holdout_fraction: data.holdout,
        dt: data.dt,
        normalize_inputs: !data.raw_inputs,
        execution: if grid.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        },
        record_candidates: record,
        ..FitOptions::default()
    }
}

fn format_row(values: &[f64]) -> String {
    let cells: Vec<String> = values.iter().map(|v| format!("{v}")).collect();
    format!("[{}]", cells.join(", "))
}

fn print_alpha(alpha: &InfluenceMatrix) {
    let n = alpha.n();
    for k in 0..n * n {
        println!(
            "  A{}{}: {}",
            k / n + 1,
            k % n + 1,
            format_row(alpha.row(k))
        );
    }
}

fn print_report(dataset: &MarketDataset, report: &FitReport) {
    let labels = dataset.labels();
    println!(
        "dataset: {} samples ({} to {}), train {} / validation {}",
        dataset.len(),
        labels[0],
        labels[labels.len() - 1],
        report.train_len,
        report.validation_len
    );
    println!(
        "grid: r = {}, constraints {}, {} free parameters, {} candidates evaluated",
        report.radius,
        report.constraint_mode,
        report.free_positions.len(),
        report.candidates_evaluated
    );
    if report.inert_excluded > 0 {
        println!("inert candidates excluded: {}", report.inert_excluded);
    }
    println!("best parameters: {:?}", report.best_params);
    println!("best alpha:");
    print_alpha(&report.best_alpha);
    println!("train error: {}", format_number(report.train_error));
    println!(
        "validation error: {}",
        format_number(report.validation_error)
    );
    println!("tie class size: {}", report.tie_class_size);
    match report.crossing_index() {
        Some(t) => println!("predicted share_1 crosses 0.5 at {} (t = {t})", labels[t]),
        None => println!("predicted share_1 never crosses 0.5"),
    }
    println!("validation window (label, predicted share_1, target share_1):");
    let window = report.train_len..report.train_len + report.validation_len;
    for ((label, predicted), target) in labels[window.clone()]
        .iter()
        .zip(&report.predicted_share[window.clone()])
        .zip(&report.target_share[window])
    {
        println!(
            "  {label} {} {}",
            format_number(*predicted),
            format_number(*target)
        );
    }
}

fn report_chart(dataset: &MarketDataset, report: &FitReport, title: &str) -> LineChart {
    LineChart {
        title: title.into(),
        lines: vec![Series {
            name: "fitted share_1".into(),
            values: report.predicted_share.clone(),
        }],
        markers: vec![Series {
            name: "target share_1".into(),
            values: report.target_share.clone(),
        }],
        boundary: Some(report.train_len),
        x_labels: dataset.labels().to_vec(),
    }
}

fn cmd_fit(args: FitArgs) -> Result<()> {
    check_data_args(&args.data)?;
    let r = radius(&args.grid)?;
    let dataset = load_dataset(args.data.data.as_deref())?;
    let spec = constraint_spec(&args.grid, dataset.n(), dataset.n_y())?;
    let options = fit_options(&args.data, &args.grid, args.dump_candidates.is_some());
    let report = if args.auto_radius {
        let reports = learn::fit_escalating(&dataset, &spec, &options, args.target, args.max_r)?;
        for rep in &reports {
            println!(
                "r = {}: train error {}",
                rep.radius,
                format_number(rep.train_error)
            );
        }
        reports
            .into_iter()
            .last()
            .expect("escalation returns at least one report")
    } else {
        learn::fit(&dataset, &GridSpec::new(r), &spec, &options)?
    };
    print_report(&dataset, &report);
    eprintln!("search time: {:.3} s", report.elapsed.as_secs_f64());
    let path = write_output(&args.out, &report.to_json()?)?;
    println!("wrote {}", path.display());
    if let Some(dump) = &args.dump_candidates {
        let csv = report
            .candidates_csv()
            .expect("candidate errors were recorded");
        let path = write_output(dump, &csv)?;
        println!("wrote {}", path.display());
    }
    if let Some(svg) = &args.svg {
        let chart = report_chart(&dataset, &report, "Fitted vs observed share");
        let path = write_output(svg, &chart.to_svg())?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

/// Inputs as the model sees them for this dataset and flags.
fn model_inputs(dataset: &MarketDataset, args: &DataArgs) -> Result<(Split, Vec<InputVector>)> {
    let split = split(dataset, args.holdout)?;
    let (inputs, _) = prepare_inputs(dataset, &split, !args.raw_inputs)?;
    Ok((split, inputs))
}

fn check_shape(alpha: &InfluenceMatrix, dataset: &MarketDataset) -> Result<()> {
    if alpha.n() != dataset.n() || alpha.n_y() != dataset.n_y() {
        return Err(Error::Argument(format!(
            "influence matrix is for {} strategies and {} inputs, the dataset has {} and {}",
            alpha.n(),
            alpha.n_y(),
            dataset.n(),
            dataset.n_y()
        )));
    }
    Ok(())
}

fn share_lines(traj: &Trajectory, prefix: &str) -> Vec<Series> {
    (0..traj.n())
        .map(|i| Series {
            name: format!("{prefix}share_{}", i + 1),
            values: traj.share_series(i),
        })
        .collect()
}

fn observed_markers(dataset: &MarketDataset) -> Vec<Series> {
    (0..dataset.n())
        .map(|i| Series {
            name: format!("observed share_{}", i + 1),
            values: dataset.share_series(i),
        })
        .collect()
}

fn print_errors(traj: &Trajectory, dataset: &MarketDataset, split: &Split) -> Result<()> {
    let predicted = traj.share_series(0);
    let observed = dataset.share_series(0);
    let train = learn::mse(
        &predicted[split.train.clone()],
        &observed[split.train.clone()],
    )?;
    let validation = learn::mse(
        &predicted[split.validation.clone()],
        &observed[split.validation.clone()],
    )?;
    println!("train error: {}", format_number(train));
    println!("validation error: {}", format_number(validation));
    Ok(())
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    check_data_args(&args.data)?;
    let dataset = load_dataset(args.data.data.as_deref())?;
    let alpha = load_alpha(&args.alpha)?;
    check_shape(&alpha, &dataset)?;
    let (split, inputs) = model_inputs(&dataset, &args.data)?;
    let spec = ScenarioSpec::observed(inputs, dataset.initial_shares().clone(), args.data.dt)?;
    let traj = simulate::run(&spec, &alpha)?;
    println!("steps: {}", traj.len() - 1);
    println!("final shares: {}", format_row(traj.final_state()));
    print_errors(&traj, &dataset, &split)?;
    let path = write_output(&args.out, &traj.to_csv())?;
    println!("wrote {}", path.display());
    if let Some(svg) = &args.svg {
        let chart = LineChart {
            title: "Simulated market shares".into(),
            lines: share_lines(&traj, ""),
            markers: observed_markers(&dataset),
            boundary: Some(split.train.end),
            x_labels: dataset.labels().to_vec(),
        };
        let path = write_output(svg, &chart.to_svg())?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn required<'a>(value: &'a Option<PathBuf>, flag: &str, kind: &str) -> Result<&'a Path> {
    value
        .as_deref()
        .ok_or_else(|| Error::Argument(format!("--{flag} is required for {kind}")))
}

fn cmd_scenario(args: ScenarioArgs) -> Result<()> {
    check_data_args(&args.data)?;
    let dataset = load_dataset(args.data.data.as_deref())?;
    let horizon = args.horizon.unwrap_or(dataset.len() - 1);
    match args.kind {
        ScenarioKindArg::ConstantMarket => {
            let r = radius(&args.grid)?;
            let spec = constraint_spec(&args.grid, dataset.n(), dataset.n_y())?;
            let options = fit_options(&args.data, &args.grid, false);
            let report = learn::fit_constant_market(&dataset, &GridSpec::new(r), &spec, &options)?;
            print_report(&dataset, &report);
            print_own_input_coefficients(&report.best_alpha);
            let path = write_output(&args.out, &report.to_json()?)?;
            println!("wrote {}", path.display());
            if let Some(svg) = &args.svg {
                let chart = report_chart(&dataset, &report, "Constant-market fit");
                let path = write_output(svg, &chart.to_svg())?;
                println!("wrote {}", path.display());
            }
        }
        ScenarioKindArg::ConstantInputs => {
            let alpha = load_alpha(required(&args.alpha, "alpha", "constant-inputs")?)?;
            check_shape(&alpha, &dataset)?;
            let (split, inputs) = model_inputs(&dataset, &args.data)?;
            let initial = dataset.initial_shares().clone();
            let observed = simulate::run(
                &ScenarioSpec::observed(inputs.clone(), initial.clone(), args.data.dt)?,
                &alpha,
            )?;
            let pinned = simulate::run(
                &ScenarioSpec::constant(inputs[0].clone(), initial, horizon, args.data.dt)?,
                &alpha,
            )?;
            println!(
                "inputs held at {}: {}",
                dataset.labels()[0],
                format_row(&inputs[0])
            );
            println!(
                "final share_1, constant inputs: {}",
                format_number(pinned.final_state()[0])
            );
            println!(
                "final share_1, observed inputs: {}",
                format_number(observed.final_state()[0])
            );
            let path = write_output(&args.out, &pinned.to_csv())?;
            println!("wrote {}", path.display());
            if let Some(svg) = &args.svg {
                let mut lines = share_lines(&pinned, "constant inputs ");
                lines.truncate(1);
                lines.push(Series {
                    name: "observed inputs share_1".into(),
                    values: observed.share_series(0),
                });
                let chart = LineChart {
                    title: "Constant-input counterfactual".into(),
                    lines,
                    markers: observed_markers(&dataset).into_iter().take(1).collect(),
                    boundary: Some(split.train.end),
                    x_labels: dataset.labels().to_vec(),
                };
                let path = write_output(svg, &chart.to_svg())?;
                println!("wrote {}", path.display());
            }
        }
        ScenarioKindArg::CustomInputs => {
            let alpha = load_alpha(required(&args.alpha, "alpha", "custom-inputs")?)?;
            check_shape(&alpha, &dataset)?;
            let series =
                dataset::load_inputs_csv_path(required(&args.inputs, "inputs", "custom-inputs")?)?;
            if series.inputs.iter().any(|y| y.len() != dataset.n_y()) {
                return Err(Error::Argument(format!(
                    "custom inputs must have {} columns",
                    dataset.n_y()
                )));
            }
            let split = split(&dataset, args.data.holdout)?;
            let inputs = if args.data.raw_inputs {
                series.inputs
            } else {
                dataset::NormalizationRecord::fit(dataset.inputs(), split.train.clone())?
                    .apply_all(&series.inputs)?
            };
            let spec = ScenarioSpec::custom(
                inputs,
                dataset.initial_shares().clone(),
                horizon,
                args.data.dt,
            )?;
            let traj = simulate::run(&spec, &alpha)?;
            println!("steps: {}", traj.len() - 1);
            println!("final shares: {}", format_row(traj.final_state()));
            let path = write_output(&args.out, &traj.to_csv())?;
            println!("wrote {}", path.display());
            if let Some(svg) = &args.svg {
                let labels = if series.labels.len() >= traj.len() {
                    series.labels[..traj.len()].to_vec()
                } else {
                    (0..traj.len()).map(|t| t.to_string()).collect()
                };
                let chart = LineChart {
                    title: "Custom-input scenario".into(),
                    lines: share_lines(&traj, ""),
                    markers: Vec::new(),
                    boundary: None,
                    x_labels: labels,
                };
                let path = write_output(svg, &chart.to_svg())?;
                println!("wrote {}", path.display());
            }
        }
    }
    Ok(())
}

/// Coefficient of each strategy's own inputs on its own diagonal payoff.
fn print_own_input_coefficients(alpha: &InfluenceMatrix) {
    let n = alpha.n();
    println!("own-input coefficients on own payoff:");
    for i in 0..n {
        let row = alpha.row(i * n + i);
        let owned: Vec<String> = alpha
            .ownership()
            .iter()
            .enumerate()
            .filter(|(_, &o)| o == i)
            .map(|(m, _)| format!("y_{} {}", m + 1, row[m]))
            .collect();
        println!("  A{}{}: {}", i + 1, i + 1, owned.join(", "));
    }
}

fn cmd_equilibria(args: EquilibriaArgs) -> Result<()> {
    let alpha = load_alpha(&args.alpha)?;
    let values: Vec<f64> = parse_list("y", &args.y)?;
    if values.len() != alpha.n_y() {
        return Err(Error::Argument(format!(
            "--y has {} values, the influence matrix expects {}",
            values.len(),
            alpha.n_y()
        )));
    }
    let mut y = InputVector::new(values).map_err(|e| Error::Argument(format!("--y: {e}")))?;
    if let Some(path) = &args.data {
        let dataset = load_csv_path(path)?;
        check_shape(&alpha, &dataset)?;
        let split = learn::split_len(dataset.len(), args.holdout)?;
        y = dataset::NormalizationRecord::fit(dataset.inputs(), split.train)?.apply(&y)?;
        println!("scaled inputs: {}", format_row(&y));
    }
    let payoff = normalize_payoff(&synthesize_payoff(&alpha, &y)?);
    println!("normalized payoff matrix:");
    for row in payoff.rows() {
        println!("  {}", format_row(row));
    }
    if alpha.n() != 2 {
        return Err(Error::UnsupportedDimension {
            operation: "equilibrium classification",
            required: 2,
            actual: alpha.n(),
        });
    }
    let set = classify_equilibria(&payoff)?;
    println!("equilibria:");
    for v in &set.vertices {
        println!("  {} vertex", format_row(v));
    }
    if payoff.is_uniform() {
        println!("no interior equilibrium; all states stationary");
        return Ok(());
    }
    match &set.mixed {
        Some(m) => println!("  {} interior, {}", format_row(&m.point), m.stability),
        None => println!("  no interior equilibrium"),
    }
    match target_equilibrium(&alpha, &y)? {
        Some(x) => println!("target equilibrium: share_1 = {}", format_number(x[0])),
        None => println!("target equilibrium: none inside the simplex"),
    }
    Ok(())
}
