// SPDX-License-Identifier: Apache-2.0

//! Command-line surface of encsearch. The owner, the cloud server and the
//! user are simulated as three directories of one workspace; every command
//! moves data between them only through files.

pub mod commands;
pub mod config;
pub mod workspace;

use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::{Parser, Subcommand};
use encsearch::sse::IndexFormat;

use crate::commands::{BenchArgs, Ctx, EvalSource, Scheme, SseBuildArgs};
use crate::config::Config;

#[derive(Debug, Parser)]
#[command(name = "encsearch", version, about = "Concept-based ranked search over encrypted indexes")]
pub struct Cli {
    /// Workspace root holding config.toml and the owner/, cloud/ and user/ directories.
    #[arg(long, global = true, default_value = "workspace")]
    pub workspace: PathBuf,
    /// Overrides the seed of config.toml.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Creates the role directories and a config.toml.
    Init {
        #[arg(long)]
        force: bool,
        /// Parameters to start from instead of the defaults.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Generates the homomorphic key pair and the symmetric table and block keys.
    Keygen {
        #[arg(long)]
        force: bool,
    },
    /// Builds the ontology, the index of one scheme and the block store.
    Build {
        #[arg(long, value_enum)]
        scheme: Scheme,
        /// Directory of `<doc_id>.txt` documents.
        #[arg(long)]
        corpus: PathBuf,
        /// Directory of `<concept>.txt` concept pages.
        #[arg(long)]
        onto: PathBuf,
        /// `user_id<TAB>doc_id` access rights (required for siis).
        #[arg(long)]
        users: Option<PathBuf>,
    },
    /// Ranked search as a user.
    Search {
        #[arg(long, value_enum)]
        scheme: Scheme,
        #[arg(long)]
        user: Option<String>,
        #[arg(long, default_value_t = 10)]
        k: usize,
        /// Prints the plaintext reference ranking instead.
        #[arg(long)]
        oracle: bool,
        query: String,
    },
    /// Retrieves documents through the block protocol into user/docs.
    Fetch {
        #[arg(long = "doc", required = true)]
        docs: Vec<String>,
    },
    /// Times batch search on a synthetic encrypted index; prints CSV.
    Bench {
        #[arg(long, default_value_t = 10_000)]
        docs: usize,
        #[arg(long, default_value_t = 20)]
        queries: usize,
        #[arg(long, default_value_t = 50)]
        concepts: usize,
        /// Nonzero concepts per document.
        #[arg(long, default_value_t = 20)]
        x: usize,
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[arg(long, value_delimiter = ',', default_value = "1")]
        workers: Vec<usize>,
        /// `shared`, `partitioned`, or both separated by a comma.
        #[arg(long, value_delimiter = ',', default_value = "shared,partitioned")]
        strategy: Vec<String>,
        #[arg(long, value_delimiter = ',', default_value = "1")]
        partitions: Vec<usize>,
    },
    /// Accuracy and recall of a run against `query_id<TAB>doc_id` judgments.
    Eval {
        #[arg(long)]
        qrels: PathBuf,
        /// `query_id<TAB>doc_id` retrieved documents.
        #[arg(long, conflicts_with = "queries", required_unless_present = "queries")]
        run: Option<PathBuf>,
        /// `query_id<TAB>query` texts to search in the workspace.
        #[arg(long)]
        queries: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "sse")]
        scheme: Scheme,
        #[arg(long)]
        user: Option<String>,
        #[arg(long, default_value_t = 10)]
        k: usize,
    },
    /// Checks that cloud/ holds nothing secret; exits nonzero otherwise.
    LeakCheck,
    /// File-level vector scheme operations outside a workspace.
    #[command(subcommand)]
    Sse(SseCommand),
}

#[derive(Debug, Subcommand)]
pub enum SseCommand {
    BuildIndex {
        #[arg(long)]
        corpus: PathBuf,
        /// Ontology JSONL as written by `build`.
        #[arg(long)]
        ontology: PathBuf,
        /// Vector key; created when missing.
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "binary")]
        format: FormatArg,
        #[arg(long, default_value_t = 20)]
        x: usize,
    },
    Trapdoor {
        #[arg(long)]
        ontology: PathBuf,
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 20)]
        x: usize,
        query: String,
    },
    Search {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        trapdoor: PathBuf,
        #[arg(long, default_value_t = 10)]
        k: usize,
    },
}

#[derive(Clone, Copy, Debug, clap::ValueEnum)]
pub enum FormatArg {
    Binary,
    Json,
}

/// Runs one parsed command. Returns the process exit code.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<i32> {
    let root = cli.workspace.as_path();
    match cli.command {
        Command::Init { force, config } => commands::cmd_init(root, force, config.as_deref(), out)?,
        Command::Keygen { force } => commands::cmd_keygen(&Ctx::open(root, cli.seed)?, force, out)?,
        Command::Build { scheme, corpus, onto, users } => {
            commands::cmd_build(&Ctx::open(root, cli.seed)?, scheme, &corpus, &onto, users.as_deref(), out)?
        }
        Command::Search { scheme, user, k, oracle, query } => {
            commands::cmd_search(&Ctx::open(root, cli.seed)?, scheme, user.as_deref(), k, &query, oracle, out)?
        }
        Command::Fetch { docs } => commands::cmd_fetch(&Ctx::open(root, cli.seed)?, &docs, out)?,
        Command::Bench { docs, queries, concepts, x, k, workers, strategy, partitions } => {
            for s in &strategy {
                config::parse_strategy(s, 1)?;
            }
            if workers.contains(&0) || partitions.contains(&0) {
                bail!("workers and partitions must be at least 1");
            }
            let args = BenchArgs {
                docs,
                queries,
                concepts,
                x,
                k,
                workers,
                strategies: strategy,
                partitions,
                seed: cli.seed.unwrap_or(1),
            };
            commands::cmd_bench(&args, out)?
        }
        Command::Eval { qrels, run, queries, scheme, user, k } => match (run, queries) {
            (Some(run), _) => commands::cmd_eval(&qrels, EvalSource::Run(&run), out)?,
            (None, Some(path)) => {
                let ctx = Ctx::open(root, cli.seed)?;
                let source = EvalSource::Queries { path: &path, ctx: &ctx, scheme, user: user.as_deref(), k };
                commands::cmd_eval(&qrels, source, out)?
            }
            (None, None) => bail!("give --run or --queries"),
        },
        Command::LeakCheck => {
            if commands::cmd_leak_check(root, out)? > 0 {
                return Ok(1);
            }
        }
        Command::Sse(sub) => run_sse(sub, cli.seed.unwrap_or(1), out)?,
    }
    Ok(0)
}

fn run_sse(sub: SseCommand, seed: u64, out: &mut dyn Write) -> Result<()> {
    match sub {
        SseCommand::BuildIndex { corpus, ontology, key, out: dest, format, x } => {
            let cfg = Config { x, ..Config::default() };
            let format = match format {
                FormatArg::Binary => IndexFormat::Binary,
                FormatArg::Json => IndexFormat::Json,
            };
            let args = SseBuildArgs { corpus: &corpus, ontology: &ontology, key: &key, out: &dest, format, cfg: &cfg, seed };
            commands::cmd_sse_build_index(&args, out)
        }
        SseCommand::Trapdoor { ontology, key, out: dest, x, query } => {
            let cfg = Config { x, ..Config::default() };
            commands::cmd_sse_trapdoor(&ontology, &key, &query, &dest, &cfg, seed, out)
        }
        SseCommand::Search { index, trapdoor, k } => commands::cmd_sse_search(&index, &trapdoor, k, out),
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run_args<I, T>(args: I, out: &mut dyn Write) -> Result<i32>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    run(Cli::try_parse_from(args)?, out)
}
