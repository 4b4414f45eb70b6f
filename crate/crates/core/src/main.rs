//! Command-line scenario runner.
//!
//! Exit status: 0 on success, 1 for invalid input or arguments, 2 when a
//! computation fails at runtime (e.g. a condition domain error).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fockfilter::scenario::{DetectorSpec, InputSpec, Scenario, ScenarioError};

#[derive(Parser, Debug)]
#[command(name = "fockfilter", version, about = "Heralded multiphoton interference filter simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Output population-difference distribution of a Fock state on a balanced splitter.
    HomDist(Overrides),
    /// Transmitted (S_t, Δ_t) distribution heralded by a detector outcome.
    CondDist(Overrides),
    /// Probability that the heralded state meets the condition.
    ShutterProb(Overrides),
    /// Purity of the heralded transmitted state.
    Purity(Overrides),
    /// Check a scenario file and list every problem.
    Validate { file: PathBuf },
    /// Run a scenario file; flags override its scalar fields.
    Run {
        file: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
}

#[derive(Args, Debug, Default)]
struct Overrides {
    /// Input kind: fock, uniform-fixed-sum, uniform-range or file.
    #[arg(long)]
    input: Option<String>,
    /// Input total photon number S_i.
    #[arg(long, allow_negative_numbers = true)]
    si: Option<i64>,
    /// Input population difference Δ_i (fock inputs).
    #[arg(long, allow_negative_numbers = true)]
    di: Option<i64>,
    /// Lowest shell of a uniform-range input.
    #[arg(long)]
    s_lo: Option<i64>,
    /// Highest shell of a uniform-range input.
    #[arg(long)]
    s_hi: Option<i64>,
    /// JSON state file for file inputs.
    #[arg(long)]
    state_file: Option<String>,
    /// Tapping reflectivity.
    #[arg(long)]
    r: Option<f64>,
    /// Measured total photon number S.
    #[arg(long, allow_negative_numbers = true)]
    s: Option<i64>,
    /// Measured difference Δ = L - K.
    #[arg(long, allow_negative_numbers = true)]
    delta: Option<i64>,
    /// Binomial detector efficiency.
    #[arg(long)]
    eta: Option<f64>,
    /// Gaussian detector standard deviation.
    #[arg(long)]
    sigma: Option<f64>,
    /// Filtering condition, e.g. "adt >= 120".
    #[arg(long)]
    condition: Option<String>,
    /// Condition parameter binding, repeatable.
    #[arg(long = "param", value_name = "NAME=VALUE")]
    params: Vec<String>,
    /// Report P(|Δ| ≥ threshold) for hom-dist.
    #[arg(long)]
    threshold: Option<i64>,
    /// Pass probability needed to open the shutter.
    #[arg(long)]
    shutter_threshold: Option<f64>,
    /// Map condition domain errors to the nearest valid value instead of failing.
    #[arg(long)]
    clamp: bool,
    /// csv or json.
    #[arg(long)]
    format: Option<String>,
    /// Write output here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Overrides {
    fn apply(&self, scenario: &mut Scenario) -> Result<(), ScenarioError> {
        let mut errors = Vec::new();
        if self.input.is_some()
            || self.si.is_some()
            || self.di.is_some()
            || self.s_lo.is_some()
            || self.s_hi.is_some()
            || self.state_file.is_some()
        {
            let input = scenario.input.get_or_insert_with(|| InputSpec {
                kind: "fock".to_owned(),
                ..InputSpec::default()
            });
            if let Some(kind) = &self.input {
                input.kind.clone_from(kind);
            }
            input.si = self.si.or(input.si);
            input.di = self.di.or(input.di);
            input.s_lo = self.s_lo.or(input.s_lo);
            input.s_hi = self.s_hi.or(input.s_hi);
            if let Some(path) = &self.state_file {
                input.path = Some(path.clone());
                if self.input.is_none() {
                    input.kind = "file".to_owned();
                }
            }
            if input.kind == "fock" && input.di.is_none() && input.si.is_some() {
                input.di = Some(0);
            }
        }
        scenario.r = self.r.or(scenario.r);
        scenario.s = self.s.or(scenario.s);
        scenario.delta = self.delta.or(scenario.delta);
        match (self.eta, self.sigma) {
            (Some(_), Some(_)) => errors.push("--eta and --sigma select different detector models".to_owned()),
            (Some(eta), None) => {
                scenario.detector = Some(DetectorSpec {
                    model: "binomial".to_owned(),
                    eta: Some(eta),
                    sigma: None,
                })
            }
            (None, Some(sigma)) => {
                scenario.detector = Some(DetectorSpec {
                    model: "gaussian".to_owned(),
                    eta: None,
                    sigma: Some(sigma),
                })
            }
            (None, None) => {}
        }
        if let Some(c) = &self.condition {
            scenario.condition = Some(c.clone());
        }
        for binding in &self.params {
            match binding.split_once('=').map(|(k, v)| (k.trim(), v.trim().parse::<f64>())) {
                Some((name, Ok(value))) if !name.is_empty() => {
                    scenario.condition_params.insert(name.to_owned(), value);
                }
                _ => errors.push(format!("--param: expected NAME=VALUE, got {binding:?}")),
            }
        }
        scenario.threshold = self.threshold.or(scenario.threshold);
        scenario.shutter_threshold = self.shutter_threshold.or(scenario.shutter_threshold);
        if self.clamp {
            scenario.condition_mode = Some("clamp".to_owned());
        }
        if let Some(f) = &self.format {
            scenario.format = Some(f.clone());
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(ScenarioError::Invalid(errors))
        }
    }
}

fn run_scenario(mut scenario: Scenario, overrides: &Overrides) -> Result<(), ScenarioError> {
    overrides.apply(&mut scenario)?;
    let plan = scenario.plan()?;
    let text = plan.render()?;
    match &overrides.out {
        Some(path) => std::fs::write(path, text).map_err(|e| ScenarioError::Io {
            path: path.clone(),
            message: e.to_string(),
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn subcommand(quantity: &str, overrides: &Overrides) -> Result<(), ScenarioError> {
    let scenario = Scenario {
        quantity: quantity.to_owned(),
        ..Scenario::default()
    };
    run_scenario(scenario, overrides)
}

fn report(error: &ScenarioError) -> u8 {
    match error {
        ScenarioError::Invalid(list) => {
            for line in list {
                eprintln!("error: {line}");
            }
        }
        other => eprintln!("error: {other}"),
    }
    if error.is_validation() {
        1
    } else {
        2
    }
}

fn dispatch<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let result = match &cli.command {
        Command::HomDist(o) => subcommand("hom-dist", o),
        Command::CondDist(o) => subcommand("cond-dist", o),
        Command::ShutterProb(o) => subcommand("shutter-prob", o),
        Command::Purity(o) => subcommand("purity", o),
        Command::Validate { file } => match Scenario::load(file) {
            Ok(scenario) => {
                let diagnostics = scenario.diagnostics();
                if diagnostics.is_empty() {
                    println!("ok");
                    Ok(())
                } else {
                    Err(ScenarioError::Invalid(diagnostics))
                }
            }
            Err(e) => Err(e),
        },
        Command::Run { file, overrides } => Scenario::load(file).and_then(|s| run_scenario(s, overrides)),
    };
    match result {
        Ok(()) => 0,
        Err(e) => report(&e),
    }
}

fn main() -> ExitCode {
    ExitCode::from(dispatch(std::env::args_os()))
}
