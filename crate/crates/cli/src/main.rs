mod dataset;
mod eval;
mod run;
mod util;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use lifegen_core::artifact::Stage;
use lifegen_core::metrics::{score_pair, MetricConfig};
use lifegen_core::prompts::{PromptMode, PromptRegistry};
use lifegen_core::scxml;

use util::{list_arg, read_text};

#[derive(Parser)]
#[command(
    name = "lifegen",
    version,
    about = "Lifecycle-staged code generation: runs, checks, metrics, datasets and reports"
)]
struct Cli {
    /// Backend configuration file with [[backend]] tables. Defaults to
    /// ./lifegen.toml when present; `echo` is always available.
    #[arg(long, global = true, env = "LIFEGEN_BACKENDS")]
    backends: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate or simulate SCXML statecharts.
    #[command(subcommand)]
    Scxml(ScxmlCmd),
    /// Inspect the prompt registry.
    #[command(subcommand)]
    Prompts(PromptsCmd),
    /// Start one run, or one run per record of a manifest split.
    Run(run::RunArgs),
    /// Continue a paused run, optionally replacing its checkpoint artifact.
    Resume(run::ResumeArgs),
    /// Score artifacts against references.
    #[command(subcommand)]
    Metrics(MetricsCmd),
    /// Build, screen, split and export lifecycle datasets.
    #[command(subcommand)]
    Dataset(dataset::DatasetCmd),
    /// Produce evaluation reports from persisted runs.
    Eval(eval::EvalArgs),
    /// Serve the JSON API and the review UI.
    Serve(ServeArgs),
}

#[derive(Subcommand)]
enum ScxmlCmd {
    /// Report parse and static-check findings. Exits 1 on any error finding.
    Validate {
        file: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Feed events to the chart and print the transitions taken.
    Simulate {
        file: PathBuf,
        /// Comma-separated event names.
        #[arg(long, default_value = "")]
        events: String,
        #[arg(long, default_value_t = 1000)]
        max_steps: usize,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Subcommand)]
enum PromptsCmd {
    /// Print a template's instruction and labels.
    Show {
        id: String,
        /// Render the template with this input instead.
        #[arg(long)]
        input: Option<String>,
    },
    /// List template ids of a mode.
    List {
        #[arg(long)]
        mode: String,
    },
}

#[derive(Subcommand)]
enum MetricsCmd {
    /// Score one candidate file against one reference file.
    Score {
        #[arg(long)]
        stage: Stage,
        #[arg(long)]
        candidate: PathBuf,
        #[arg(long)]
        reference: PathBuf,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: std::net::SocketAddr,
    #[arg(long, default_value = "runs")]
    store: PathBuf,
    /// Directory with the built review UI, served at /ui.
    #[arg(long)]
    ui_dir: Option<PathBuf>,
    /// Dataset directory whose records.jsonl and decisions.jsonl back the
    /// screening endpoints.
    #[arg(long)]
    dataset: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<ExitCode> {
    let backends = || util::load_backends(cli.backends.as_deref());
    match cli.command {
        Command::Scxml(cmd) => scxml_cmd(cmd),
        Command::Prompts(cmd) => prompts_cmd(cmd),
        Command::Run(args) => run::run(args, &backends()?),
        Command::Resume(args) => run::resume(args, &backends()?),
        Command::Metrics(MetricsCmd::Score {
            stage,
            candidate,
            reference,
            json,
        }) => metrics_score(stage, &candidate, &reference, json),
        Command::Dataset(cmd) => dataset::dispatch(cmd, &backends),
        Command::Eval(args) => eval::run(args),
        Command::Serve(args) => serve(args, backends()?),
    }
}

fn scxml_cmd(cmd: ScxmlCmd) -> anyhow::Result<ExitCode> {
    match cmd {
        ScxmlCmd::Validate { file, json } => {
            let report = scxml::check(&read_text(&file)?);
            if json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else if report.findings.is_empty() {
                println!("ok: no findings");
            } else {
                for f in &report.findings {
                    println!("{f}");
                }
            }
            Ok(if report.has_errors() {
                ExitCode::FAILURE
            } else {
                ExitCode::SUCCESS
            })
        }
        ScxmlCmd::Simulate {
            file,
            events,
            max_steps,
            json,
        } => {
            let text = read_text(&file)?;
            let report = scxml::check(&text);
            if report.has_errors() {
                for f in report.errors() {
                    eprintln!("{f}");
                }
                return Ok(ExitCode::FAILURE);
            }
            let chart = scxml::parse_scxml(&text).map_err(|errs| anyhow::anyhow!("{} parse error(s)", errs.len()))?;
            let events = list_arg(&events);
            let trace = match scxml::simulate(&chart, &events, max_steps) {
                Ok(t) => t,
                Err(scxml::SimError::StepLimitExceeded {
                    trace,
                    limit,
                    remaining,
                }) => {
                    eprintln!("step limit of {limit} reached with {remaining} event(s) left");
                    trace
                }
                Err(e) => return Err(e.into()),
            };
            if json {
                println!("{}", serde_json::to_string_pretty(&trace)?);
            } else {
                for s in &trace.steps {
                    println!("{} --{}--> {}", s.from, s.event, s.to);
                }
                let done = if trace.reached_final { " (final)" } else { "" };
                println!("configuration: {}{done}", trace.final_configuration);
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn prompts_cmd(cmd: PromptsCmd) -> anyhow::Result<ExitCode> {
    let registry = PromptRegistry::builtin();
    match cmd {
        PromptsCmd::Show { id, input } => {
            if let Some(input) = input {
                print!("{}", registry.render(&id, &input)?.text);
                return Ok(ExitCode::SUCCESS);
            }
            let t = registry.get(&id)?;
            println!("id: {}", t.id);
            println!("mode: {}", t.mode);
            println!("input label: {}", t.input_label);
            println!("output label: {}", t.output_label);
            println!();
            println!("{}", t.instruction);
        }
        PromptsCmd::List { mode } => {
            let mode: PromptMode = mode.parse()?;
            for id in registry.list_templates(mode) {
                println!("{id}");
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn metrics_score(
    stage: Stage,
    candidate: &std::path::Path,
    reference: &std::path::Path,
    json: bool,
) -> anyhow::Result<ExitCode> {
    let c = read_text(candidate)?;
    let r = read_text(reference)?;
    let scores = score_pair(&c, &r, stage, &MetricConfig::default(), None)?;
    if json {
        println!("{}", serde_json::to_string_pretty(&scores)?);
        return Ok(ExitCode::SUCCESS);
    }
    println!("em\t{:.4}", scores.em);
    println!("bleu\t{:.4}", scores.bleu);
    if let Some(v) = scores.rouge_l {
        println!("rouge_l\t{v:.4}");
    }
    if let Some(v) = scores.tfidf {
        println!("tfidf\t{v:.4}");
    }
    if let Some(b) = &scores.codebleu {
        println!("codebleu\t{:.4}", b.combined);
        for (name, v) in ["ngram", "weighted_ngram", "ast_match", "dataflow_match"]
            .iter()
            .zip(b.components())
        {
            println!("  {name}\t{v:.4}");
        }
        if b.parse_fallback {
            println!("  (candidate did not parse; syntax and dataflow scored 0)");
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn serve(args: ServeArgs, backends: lifegen_core::gateway::BackendSet) -> anyhow::Result<ExitCode> {
    use lifegen_core::pipeline::{Pipeline, RunStore};
    use lifegen_server::{AppState, TOKEN_ENV};

    let pipeline = Pipeline::new(RunStore::open(&args.store)?);
    let mut state =
        AppState::new(pipeline, backends).with_token(std::env::var(TOKEN_ENV).ok().filter(|t| !t.is_empty()));
    if let Some(d) = &args.dataset {
        state = state.with_dataset(d.join(dataset::RECORDS_FILE), d.join(dataset::DECISIONS_FILE));
    }
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    eprintln!("listening on http://{}", args.addr);
    rt.block_on(lifegen_server::serve(args.addr, state, args.ui_dir))?;
    Ok(ExitCode::SUCCESS)
}
