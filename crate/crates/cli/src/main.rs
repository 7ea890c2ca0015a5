//! `mdsclt` command-line tool.
//!
//! Exit codes: 0 on success, 1 on invalid input or usage, 2 on numerical failure.

mod commands;
mod plot;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "mdsclt", version, about = "Classical MDS under noise: embeddings, limiting covariances and Monte Carlo checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample latent points from a distribution.
    GenPoints(commands::GenPointsArgs),
    /// Pairwise Euclidean distances of a point cloud.
    Distmat(commands::DistmatArgs),
    /// Apply a noise model to a distance matrix.
    Perturb(commands::PerturbArgs),
    /// Classical MDS of a squared-dissimilarity matrix.
    Embed(commands::EmbedArgs),
    /// Choose an embedding dimension by the n^(2/3) eigenvalue rule.
    SelectDim(commands::SelectDimArgs),
    /// Minimize raw stress from a dissimilarity matrix.
    Rawstress(commands::RawstressArgs),
    /// Limiting covariances for a distribution and noise model.
    TheoryCov(commands::TheoryCovArgs),
    /// Run a Monte Carlo experiment.
    McRun(commands::McRunArgs),
    /// Rate-normalized perturbation bounds, expansion terms and growth checks.
    Diagnose(commands::DiagnoseArgs),
    /// Render a section of an experiment report as SVG.
    Plot(commands::PlotArgs),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::GenPoints(a) => commands::gen_points(a),
        Command::Distmat(a) => commands::distmat(a),
        Command::Perturb(a) => commands::perturb(a),
        Command::Embed(a) => commands::embed(a),
        Command::SelectDim(a) => commands::select_dim(a),
        Command::Rawstress(a) => commands::rawstress(a),
        Command::TheoryCov(a) => commands::theory_cov(a),
        Command::McRun(a) => commands::mc_run(a),
        Command::Diagnose(a) => commands::diagnose(a),
        Command::Plot(a) => commands::plot(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}
