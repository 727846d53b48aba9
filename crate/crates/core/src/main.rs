use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use implicit_vqa::circuits::two_design_ansatz;
use implicit_vqa::diff::{energy, grad_a, grad_z};
use implicit_vqa::experiments::{
    emit_results, linspace, run_entanglement, run_hyperopt, run_susceptibility, Emit,
    EntanglementConfig, EntanglementInit, HyperParametrization, HyperoptConfig, OutputFormat,
    SusceptibilityConfig,
};
use implicit_vqa::implicit::{implicit_vjp, solve_map, SolveMethod, Stationarity};
use implicit_vqa::observables::build_spin_chain;
use implicit_vqa::optim::GDConfig;
use implicit_vqa::oracle::{entanglement_brute, susceptibility_exact_fd};
use implicit_vqa::statevec::{Gate, StateVector};
use implicit_vqa::Error;

const EXIT_USAGE: u8 = 1;
const EXIT_NON_CONVERGENCE: u8 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "implicit-vqa",
    version,
    about = "Implicit differentiation of variational quantum algorithms"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Magnetization susceptibility of the transverse-field chain along a grid.
    Susceptibility(Options),
    /// Per-layer regularization strengths of a one-qubit classifier.
    Hyperopt(Options),
    /// Entanglement maximization of a two-layer entangler circuit.
    Entanglement(Options),
    /// Fast end-to-end consistency checks.
    Selftest(Options),
}

/// Every flag is optional; unset flags fall back to the config file, then to
/// the pipeline defaults.
#[derive(Args, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct Options {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    a_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    a_max: Option<f64>,
    #[arg(long)]
    a_steps: Option<usize>,
    #[arg(long)]
    inner_lr: Option<f64>,
    #[arg(long)]
    inner_tol: Option<f64>,
    #[arg(long)]
    inner_max_iter: Option<usize>,
    #[arg(long)]
    outer_lr: Option<f64>,
    #[arg(long)]
    outer_steps: Option<usize>,
    /// direct, cg, gmres or neumann.
    #[arg(long)]
    solver: Option<String>,
    #[arg(long)]
    damping: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Start every grid point from the same random angles.
    #[arg(long)]
    cold_start: Option<bool>,
    #[arg(long)]
    n_train: Option<usize>,
    #[arg(long)]
    n_val: Option<usize>,
    #[arg(long)]
    init_hyper: Option<f64>,
    /// linear or log.
    #[arg(long)]
    parametrization: Option<String>,
    /// Half-width of the random initial angles.
    #[arg(long)]
    init_scale: Option<f64>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// json or csv.
    #[arg(long)]
    format: Option<String>,
    /// TOML file with the same keys as the flags (kebab-case).
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
}

macro_rules! merge {
    ($cli:ident, $file:ident; $($field:ident),*) => {
        Options {
            $($field: $cli.$field.or($file.$field),)*
            config: None,
        }
    };
}

impl Options {
    fn resolve(self) -> Result<Self, String> {
        let Some(path) = self.config.clone() else {
            return Ok(self);
        };
        let text = std::fs::read_to_string(&path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        let file: Options =
            toml::from_str(&text).map_err(|e| format!("invalid config {}: {e}", path.display()))?;
        let cli = self;
        Ok(
            merge!(cli, file; n, layers, gamma, delta, a_min, a_max, a_steps, inner_lr,
            inner_tol, inner_max_iter, outer_lr, outer_steps, solver, damping, seed, cold_start,
            n_train, n_val, init_hyper, parametrization, init_scale, out, format),
        )
    }

    fn inner(&self, base: GDConfig) -> GDConfig {
        GDConfig {
            learning_rate: self.inner_lr.unwrap_or(base.learning_rate),
            max_iter: self.inner_max_iter.unwrap_or(base.max_iter),
            tol: self.inner_tol.unwrap_or(base.tol),
            seed: self.seed.unwrap_or(base.seed),
        }
    }

    fn solver(
        &self,
        mut base: implicit_vqa::implicit::LinearSolveConfig,
    ) -> Result<implicit_vqa::implicit::LinearSolveConfig, String> {
        if let Some(s) = &self.solver {
            base.method = s.parse::<SolveMethod>().map_err(|e| e.to_string())?;
        }
        if let Some(d) = self.damping {
            base.damping = d;
        }
        Ok(base)
    }

    fn format(&self) -> Result<OutputFormat, String> {
        match &self.format {
            Some(f) => f.parse().map_err(|e: Error| e.to_string()),
            None => Ok(OutputFormat::Json),
        }
    }

    fn reject(&self, name: &str, present: bool) -> Result<(), String> {
        if present {
            Err(format!("--{name} does not apply to this subcommand"))
        } else {
            Ok(())
        }
    }
}

enum Failure {
    Usage(String),
    NonConvergence(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_non_convergence() {
            Failure::NonConvergence(e.to_string())
        } else {
            Failure::Usage(e.to_string())
        }
    }
}

impl From<String> for Failure {
    fn from(s: String) -> Self {
        Failure::Usage(s)
    }
}

fn write_out<R: Emit>(result: &R, opts: &Options) -> Result<(), Failure> {
    let format = opts.format()?;
    match &opts.out {
        Some(path) => emit_results(result, path, format)?,
        None => print!("{}", result.render(format)?),
    }
    Ok(())
}

fn susceptibility(opts: &Options) -> Result<(), Failure> {
    opts.reject("n-train", opts.n_train.is_some())?;
    opts.reject("n-val", opts.n_val.is_some())?;
    opts.reject("init-hyper", opts.init_hyper.is_some())?;
    opts.reject("parametrization", opts.parametrization.is_some())?;
    let d = SusceptibilityConfig::default();
    let cfg = SusceptibilityConfig {
        n: opts.n.unwrap_or(d.n),
        layers: opts.layers.unwrap_or(d.layers),
        gamma: opts.gamma.unwrap_or(d.gamma),
        delta: opts.delta.unwrap_or(d.delta),
        a_grid: linspace(
            opts.a_min.unwrap_or(-1.0),
            opts.a_max.unwrap_or(1.0),
            opts.a_steps.unwrap_or(d.a_grid.len()),
        ),
        inner: opts.inner(d.inner),
        solver: opts.solver(d.solver)?,
        warm_start: !opts.cold_start.unwrap_or(false),
        init_scale: opts.init_scale.unwrap_or(d.init_scale),
        exact_eps: d.exact_eps,
    };
    let result = run_susceptibility(&cfg)?;
    write_out(&result, opts)?;
    let failed = result.points.iter().filter(|p| !p.converged).count();
    eprintln!(
        "max |chi_var - chi_exact| = {:.4e} over {} points",
        result.max_deviation(),
        result.points.len()
    );
    if failed > 0 {
        return Err(Failure::NonConvergence(format!(
            "{failed} of {} grid points did not converge",
            result.points.len()
        )));
    }
    Ok(())
}

fn susceptibility_only(opts: &Options) -> Result<(), Failure> {
    for (name, set) in [
        ("gamma", opts.gamma.is_some()),
        ("delta", opts.delta.is_some()),
        ("a-min", opts.a_min.is_some()),
        ("a-max", opts.a_max.is_some()),
        ("a-steps", opts.a_steps.is_some()),
        ("cold-start", opts.cold_start.is_some()),
    ] {
        opts.reject(name, set)?;
    }
    Ok(())
}

fn hyperopt(opts: &Options) -> Result<(), Failure> {
    susceptibility_only(opts)?;
    opts.reject("n", opts.n.is_some())?;
    let d = HyperoptConfig::default();
    let parametrization = match &opts.parametrization {
        Some(p) => p
            .parse::<HyperParametrization>()
            .map_err(|e| e.to_string())?,
        None => d.parametrization,
    };
    let cfg = HyperoptConfig {
        layers: opts.layers.unwrap_or(d.layers),
        n_train: opts.n_train.unwrap_or(d.n_train),
        n_val: opts.n_val.unwrap_or(d.n_val),
        outer_steps: opts.outer_steps.unwrap_or(d.outer_steps),
        inner: opts.inner(d.inner),
        outer_lr: opts.outer_lr.unwrap_or(d.outer_lr),
        solver: opts.solver(d.solver)?,
        init_hyper: opts.init_hyper.unwrap_or(d.init_hyper),
        parametrization,
        init_scale: opts.init_scale.unwrap_or(d.init_scale),
        grid_resolution: d.grid_resolution,
    };
    let result = run_hyperopt(&cfg)?;
    write_out(&result, opts)?;
    let losses = result.validation_losses();
    if let (Some(first), Some(last)) = (losses.first(), losses.last()) {
        eprintln!("validation loss {first:.6} -> {last:.6}");
    }
    Ok(())
}

fn entanglement(opts: &Options) -> Result<(), Failure> {
    susceptibility_only(opts)?;
    opts.reject("n-train", opts.n_train.is_some())?;
    opts.reject("n-val", opts.n_val.is_some())?;
    opts.reject("init-hyper", opts.init_hyper.is_some())?;
    opts.reject("parametrization", opts.parametrization.is_some())?;
    let d = EntanglementConfig::default();
    let init = match opts.init_scale {
        Some(scale) => EntanglementInit::Random { scale },
        None => d.init,
    };
    let cfg = EntanglementConfig {
        n: opts.n.unwrap_or(d.n),
        layers: opts.layers.unwrap_or(d.layers),
        outer_steps: opts.outer_steps.unwrap_or(d.outer_steps),
        inner: opts.inner(d.inner),
        outer_lr: opts.outer_lr.unwrap_or(d.outer_lr),
        solver: opts.solver(d.solver)?,
        init,
    };
    let result = run_entanglement(&cfg)?;
    write_out(&result, opts)?;
    eprintln!("final entanglement {:.6}", result.final_measure());
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }
    Ok(())
}

fn check(name: &str, ok: bool, detail: String) -> bool {
    println!("{} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
    ok
}

fn selftest(opts: &Options) -> Result<(), Failure> {
    let seed = opts.seed.unwrap_or(0);
    let mut all = true;

    let bell = StateVector::zero(2)?.apply_all(&[Gate::h(0), Gate::cnot(0, 1)])?;
    let e = entanglement_brute(&bell, 8, seed)?.value;
    all &= check(
        "bell entanglement",
        (e - 0.5).abs() < 1e-3,
        format!("{e:.6}"),
    );

    // Two-spin chain: implicit susceptibility against the exact ground state.
    let h = build_spin_chain(2, 1.0, 1e-3)?;
    let problem = Stationarity::new(energy(two_design_ansatz(2, 2)?, h.clone())?);
    let magnetization = implicit_vqa::observables::magnetization_observable(2)?;
    let observable =
        implicit_vqa::diff::Expectation::new(two_design_ansatz(2, 2)?, magnetization.clone(), 1)?;
    let inner = GDConfig::new(0.1, 50_000, 1e-10, seed)?;
    let a = [0.5];
    let z0 = vec![0.1; problem.field.circuit().n_trainable()];
    let z = solve_map(&problem, &a, &z0, &inner)?.z;
    let v = grad_z(&observable, &z, &a)?.values;
    let solver = opts.solver(Default::default())?;
    let chi = implicit_vjp(&problem, &z, &a, &v, &solver)?.values[0];
    let exact = susceptibility_exact_fd(&h, &magnetization, &a, 0, 1e-4)?.value;
    all &= check(
        "two-spin susceptibility",
        (chi - exact).abs() < 1e-3,
        format!("implicit {chi:.6}, exact {exact:.6}"),
    );

    // At the optimum the implicit part of d<H>/da vanishes.
    let dh = grad_z(&problem.field, &z, &a)?.values;
    let implicit = implicit_vjp(&problem, &z, &a, &dh, &solver)?.values[0];
    let direct = grad_a(&problem.field, &z, &a)?.values[0];
    all &= check(
        "hellmann-feynman",
        implicit.abs() < 1e-5,
        format!("implicit {implicit:.2e}, direct {direct:.6}"),
    );

    if all {
        Ok(())
    } else {
        Err(Failure::NonConvergence("self-test failed".into()))
    }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Susceptibility(o) => susceptibility(&o.resolve()?),
        Command::Hyperopt(o) => hyperopt(&o.resolve()?),
        Command::Entanglement(o) => entanglement(&o.resolve()?),
        Command::Selftest(o) => selftest(&o.resolve()?),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::NonConvergence(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_NON_CONVERGENCE)
        }
    }
}
