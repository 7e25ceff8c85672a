//! `uamark`: runs the labs from JSON configs and writes CSV results.

mod commands;
mod config;
mod error;
mod output;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::commands::{gauss, hedge, highdim, ingest};
use crate::config::{Common, Overrides};
use crate::error::CliError;
use crate::output::Output;

#[derive(Parser)]
#[command(name = "uamark", version, about = "Uncertainty-aware strategy labs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// JSON config; unknown keys are rejected.
    #[arg(long, value_name = "FILE")]
    config: PathBuf,
    /// Seed, overriding the config's `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, overriding the config's `out`.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Also write SVG plots.
    #[arg(long)]
    svg: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Actions of each strategy against the estimated drift.
    #[command(name = "strategies-1d", after_help = "Writes strategies_1d.csv: mu_hat,plugin,ua_entropic,ua_cvar,oracle")]
    Strategies1d(CommonArgs),
    /// Out-of-sample performance over entropic and CVaR aversion grids.
    #[command(after_help = "Writes oosp_frontier.csv: kind,aversion,oracle,plugin,mixture,ua")]
    OospFrontier(CommonArgs),
    /// OOSP-optimal aversion while sweeping the drift or the variance.
    #[command(after_help = "Writes optimal_aversion.csv: factor,mu,sigma2,lambda_prime,oosp_entropic,lambda_prime_closed_form,alpha,oosp_cvar")]
    OptimalAversion(CommonArgs),
    /// Monte Carlo subsampling or bootstrap OOSP against the closed forms.
    #[command(after_help = "Writes bootstrap_compare.csv: kind,aversion,analytic,mc,std_error,z")]
    BootstrapCompare(CommonArgs),
    /// Variance-inflated plug-in strategies.
    #[command(after_help = "Writes var_adjust.csv: factor,tau2,oosp,plugin,mixture")]
    VarAdjust(CommonArgs),
    /// CVaR-SGD against the analytic multivariate strategy.
    #[command(after_help = "Writes highdim_instance.csv: asset,mu_true,mu_hat,sigma_0..\n\
                            and highdim.csv: variant,alpha,models,expected_k,abs_distance,rel_distance,shrinkage,peak_gradients")]
    Highdim(CommonArgs),
    /// Trains and evaluates cliquet hedging policies.
    #[command(after_help = "Writes hedge_summary.csv: policy,alpha,mean,std,diff_vs_plugin,diff_std_error\n\
                            hedge_models.csv: policy,alpha,model,kappa,theta,xi,rho,v0,objective\n\
                            hedge_traces.csv: policy,alpha,step,k,retained_mean,step_size,param_norm\n\
                            policy_<name>.csv: index,value")]
    Hedge(CommonArgs),
    /// Estimates drift and variance from a column of returns.
    #[command(after_help = "Reads a CSV column of returns. Writes ingest.csv: n_obs,mu_hat,sigma2_uncentered,sigma2_centered\n\
                            and returns.csv: index,return")]
    Ingest(CommonArgs),
}

fn run<T, F>(name: &'static str, args: &CommonArgs, body: F) -> Result<(), CliError>
where
    T: DeserializeOwned + Serialize,
    F: FnOnce(&mut T, &mut Output, &Common) -> Result<(), CliError>,
{
    let overrides = Overrides {
        seed: args.seed,
        out: args.out.clone(),
        svg: args.svg,
    };
    let mut loaded = config::load::<T>(&args.config, &overrides)?;
    let mut out = Output::new(&loaded.common, name)?;
    body(&mut loaded.params, &mut out, &loaded.common)?;
    // Written last so defaults derived during the run are recorded.
    out.resolved_config(&config::resolved(&loaded.params, &loaded.common)?)?;
    for path in out.written() {
        log::info!("wrote {}", path.display());
    }
    Ok(())
}

fn dispatch(cmd: &Command) -> Result<(), CliError> {
    match cmd {
        Command::Strategies1d(a) => run("strategies-1d", a, |c, o, _| gauss::strategies_1d(c, o)),
        Command::OospFrontier(a) => run("oosp-frontier", a, |c, o, _| gauss::oosp_frontier(c, o)),
        Command::OptimalAversion(a) => run("optimal-aversion", a, |c, o, _| gauss::optimal_aversion_cmd(c, o)),
        Command::BootstrapCompare(a) => run("bootstrap-compare", a, |c, o, k| gauss::bootstrap_compare(c, o, k.seed)),
        Command::VarAdjust(a) => run("var-adjust", a, |c, o, _| gauss::var_adjust(c, o)),
        Command::Highdim(a) => run("highdim", a, |c, o, k| highdim::highdim(c, o, k.seed)),
        Command::Hedge(a) => run("hedge", a, |c, o, k| hedge::hedge(c, o, k.seed)),
        Command::Ingest(a) => run("ingest", a, |c, o, _| ingest::ingest(c, o)),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
