//! Subcommands of the `branchsearch` binary.

use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use branchsearch_core::query::{EsearchClient, QueryError, RemoteConfig};
use branchsearch_core::session::SessionError;
use branchsearch_core::vocabulary::{count_reference_occurrences, filter_generic, load_blocklist, load_synonym_table};
use branchsearch_core::{
    leaf_size_histogram, local_search, parse_corpus, render_query, store, Answer, Artifact, CorpusFormat, MatchMode,
    QuerySpec, Session, TreeParams, Vocabulary,
};
use branchsearch_service::{AppState, ServiceConfig};

#[derive(Debug, Parser)]
#[command(name = "branchsearch", version, about = "Find documents by answering yes/no/maybe questions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Index a corpus and grow the question tree.
    Build(BuildArgs),
    /// Leaf-size histogram of a built artifact.
    Stats(StatsArgs),
    /// Answer questions in the terminal until a query comes out.
    Ask(AskArgs),
    /// Evaluate a query spec (JSON) against the artifact.
    Search(SearchArgs),
    /// Serve the JSON session API.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum InputFormat {
    Jsonl,
    Medline,
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    /// Corpus file (JSONL, or MEDLINE XML by extension or --format).
    #[arg(long)]
    pub corpus: PathBuf,
    /// Candidate terms, one per line (TAB-separated synonyms allowed).
    #[arg(long)]
    pub terms: PathBuf,
    /// canonical<TAB>synonym table.
    #[arg(long)]
    pub synonyms: Option<PathBuf>,
    /// Terms to drop, one per line.
    #[arg(long)]
    pub blocklist: Option<PathBuf>,
    /// General-language text; terms seen more than --max-count times in it are dropped.
    #[arg(long = "ref-text")]
    pub ref_text: Vec<PathBuf>,
    #[arg(long, default_value_t = 5)]
    pub max_count: u64,
    #[arg(long, default_value_t = 18)]
    pub max_depth: u32,
    /// Last question scored by plain information gain [default: min(4, max-depth)].
    #[arg(long)]
    pub scale_after: Option<u32>,
    /// Leaves smaller than this add their uids to the query.
    #[arg(long, default_value_t = 10)]
    pub uid_threshold: u32,
    /// Match on Porter stems instead of synonyms.
    #[arg(long, conflicts_with = "synonyms")]
    pub stem: bool,
    #[arg(long, value_enum)]
    pub format: Option<InputFormat>,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, Default, ValueEnum)]
pub enum StatsFormat {
    #[default]
    Text,
    Csv,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    pub artifact: PathBuf,
    #[arg(long, value_enum, default_value_t = StatsFormat::Text)]
    pub format: StatsFormat,
}

#[derive(Debug, Args, Clone)]
pub struct RemoteArgs {
    /// Also run the query against the esearch endpoint.
    #[arg(long)]
    pub remote: bool,
    #[arg(long, default_value = branchsearch_core::query::remote::DEFAULT_BASE_URL)]
    pub base_url: String,
    #[arg(long, env = "NCBI_API_KEY", hide_env_values = true)]
    pub api_key: Option<String>,
    #[arg(long)]
    pub email: Option<String>,
    /// Requests per second [default: 3, or 10 with an API key].
    #[arg(long)]
    pub rate_limit: Option<f64>,
}

impl RemoteArgs {
    fn client(&self) -> anyhow::Result<Option<EsearchClient>> {
        if !self.remote {
            return Ok(None);
        }
        let cfg = RemoteConfig {
            base_url: self.base_url.clone(),
            api_key: self.api_key.clone(),
            email: self.email.clone(),
            rate_limit: self.rate_limit.unwrap_or(if self.api_key.is_some() { 10.0 } else { 3.0 }),
            ..RemoteConfig::default()
        };
        Ok(Some(EsearchClient::new(cfg)?))
    }
}

#[derive(Debug, Args)]
pub struct AskArgs {
    pub artifact: PathBuf,
    /// Stop after this many answers [default: the tree's max depth].
    #[arg(long)]
    pub max_questions: Option<u32>,
    #[command(flatten)]
    pub remote: RemoteArgs,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    pub artifact: PathBuf,
    /// JSON object with include/exclude/bespoke/uids arrays.
    #[arg(long)]
    pub query_spec: PathBuf,
    #[command(flatten)]
    pub remote: RemoteArgs,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Artifact to serve; without one, session routes answer 503.
    pub artifact: Option<PathBuf>,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// CORS origin allowed to call the API (repeatable; default any).
    #[arg(long = "allow-origin")]
    pub allow_origin: Vec<String>,
    /// Idle seconds before a session is dropped.
    #[arg(long, default_value_t = 3600)]
    pub session_ttl: u64,
    #[command(flatten)]
    pub remote: RemoteArgs,
}

/// Failure with its exit status: 2 for bad invocations, 1 otherwise.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(anyhow::Error),
}

impl CliError {
    /// Output cut short by a closed pipe (`branchsearch stats x | head`).
    pub fn is_broken_pipe(&self) -> bool {
        match self {
            CliError::Runtime(e) => {
                e.chain().any(|c| c.downcast_ref::<io::Error>().is_some_and(|e| e.kind() == io::ErrorKind::BrokenPipe))
            }
            CliError::Usage(_) => false,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Runtime(e) => write!(f, "{e:#}"),
        }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Runtime(e)
    }
}

fn require_file(path: &Path, what: &str) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("{what} file not found: {}", path.display())))
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let stdout = io::stdout();
    match cli.command {
        Command::Build(args) => cmd_build(&args, &mut stdout.lock()),
        Command::Stats(args) => {
            require_file(&args.artifact, "artifact")?;
            cmd_stats(&load_artifact(&args.artifact)?, args.format, &mut stdout.lock())
        }
        Command::Ask(args) => {
            require_file(&args.artifact, "artifact")?;
            let artifact = Arc::new(load_artifact(&args.artifact)?);
            let client = args.remote.client()?;
            run_ask(artifact, args.max_questions, client.as_ref(), io::stdin().lock(), &mut stdout.lock())?;
            Ok(())
        }
        Command::Search(args) => {
            require_file(&args.artifact, "artifact")?;
            require_file(&args.query_spec, "query spec")?;
            cmd_search(&args, &mut stdout.lock())
        }
        Command::Serve(args) => {
            if let Some(path) = &args.artifact {
                require_file(path, "artifact")?;
            }
            cmd_serve(&args)
        }
    }
}

pub fn load_artifact(path: &Path) -> anyhow::Result<Artifact> {
    store::load(path).with_context(|| format!("loading {}", path.display()))
}

fn build_vocabulary(args: &BuildArgs) -> anyhow::Result<(Vocabulary, usize)> {
    let mut vocab =
        Vocabulary::load_term_list(&args.terms).with_context(|| format!("reading {}", args.terms.display()))?;
    let listed = vocab.len();
    if let Some(path) = &args.synonyms {
        let table = load_synonym_table(path).with_context(|| format!("reading {}", path.display()))?;
        vocab.add_synonyms(&table)?;
    }
    if !args.ref_text.is_empty() || args.blocklist.is_some() {
        let texts = args
            .ref_text
            .iter()
            .map(|p| std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display())))
            .collect::<anyhow::Result<Vec<_>>>()?;
        let stats = count_reference_occurrences(&vocab, &texts);
        let blocklist = match &args.blocklist {
            Some(p) => load_blocklist(p).with_context(|| format!("reading {}", p.display()))?,
            None => Default::default(),
        };
        vocab = filter_generic(&vocab, &stats, args.max_count, &blocklist);
    }
    if args.stem {
        vocab = vocab.into_mode(MatchMode::Stemmed);
    }
    if vocab.is_empty() {
        return Err(anyhow!("no terms left after filtering"));
    }
    Ok((vocab, listed))
}

pub fn cmd_build(args: &BuildArgs, out: &mut impl Write) -> Result<(), CliError> {
    require_file(&args.corpus, "corpus")?;
    require_file(&args.terms, "terms")?;
    for p in args.synonyms.iter().chain(&args.blocklist).chain(&args.ref_text) {
        require_file(p, "input")?;
    }
    let params = TreeParams {
        max_depth: args.max_depth,
        scale_after: args.scale_after.unwrap_or(args.max_depth.min(4)),
        uid_leaf_threshold: args.uid_threshold,
        ..TreeParams::default()
    };
    params.validate().map_err(|e| CliError::Usage(e.to_string()))?;

    let start = Instant::now();
    let format = match args.format {
        Some(InputFormat::Jsonl) => CorpusFormat::Jsonl,
        Some(InputFormat::Medline) => CorpusFormat::MedlineXml,
        None => CorpusFormat::from_path(&args.corpus),
    };
    let file = File::open(&args.corpus).with_context(|| format!("opening {}", args.corpus.display()))?;
    let docs =
        parse_corpus(BufReader::new(file), format).with_context(|| format!("parsing {}", args.corpus.display()))?;
    let (vocab, listed) = build_vocabulary(args)?;
    let artifact = Artifact::build(&docs, vocab, &params).map_err(anyhow::Error::from)?;
    let elapsed = start.elapsed();
    store::save(&artifact, &args.output).with_context(|| format!("writing {}", args.output.display()))?;

    let hist = leaf_size_histogram(&artifact.tree);
    let s = &hist.summary;
    let w = |out: &mut dyn Write, line: String| writeln!(out, "{line}").map_err(anyhow::Error::from);
    w(out, format!("documents:  {}", artifact.index.n_docs()))?;
    w(out, format!("terms:      {} of {listed} listed", artifact.index.n_terms()))?;
    w(out, format!("tree depth: {}", artifact.tree.depth()))?;
    w(
        out,
        format!("leaves:     {} (min {}, median {}, max {}, mean {:.2})", s.leaves, s.min, s.median, s.max, s.mean),
    )?;
    w(out, format!("build time: {:.3}s", elapsed.as_secs_f64()))?;
    w(out, format!("wrote {}", args.output.display()))?;
    Ok(())
}

pub fn cmd_stats(artifact: &Artifact, format: StatsFormat, out: &mut impl Write) -> Result<(), CliError> {
    let hist = leaf_size_histogram(&artifact.tree);
    match format {
        StatsFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(["leaf_size", "count"]).map_err(anyhow::Error::from)?;
            for (size, count) in &hist.counts {
                w.write_record([size.to_string(), count.to_string()]).map_err(anyhow::Error::from)?;
            }
            w.flush().map_err(anyhow::Error::from)?;
        }
        StatsFormat::Text => {
            let s = &hist.summary;
            let text = (|| -> io::Result<()> {
                writeln!(out, "documents: {}", artifact.index.n_docs())?;
                writeln!(out, "terms:     {}", artifact.index.n_terms())?;
                writeln!(out, "depth:     {}", artifact.tree.depth())?;
                writeln!(
                    out,
                    "leaves:    {} (min {}, median {}, max {}, mean {:.2}, ideal {:.2})",
                    s.leaves, s.min, s.median, s.max, s.mean, s.ideal
                )?;
                writeln!(out, "{:>10}  {:>6}", "leaf_size", "count")?;
                for (size, count) in &hist.counts {
                    writeln!(out, "{size:>10}  {count:>6}")?;
                }
                Ok(())
            })();
            text.map_err(anyhow::Error::from)?;
        }
    }
    Ok(())
}

fn read_query_spec(path: &Path) -> Result<QuerySpec, CliError> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("invalid query spec {}: {e}", path.display())))
}

pub fn cmd_search(args: &SearchArgs, out: &mut impl Write) -> Result<(), CliError> {
    let spec = read_query_spec(&args.query_spec)?;
    let artifact = load_artifact(&args.artifact)?;
    let hits = local_search(&artifact.index, &spec).map_err(anyhow::Error::from)?;
    for d in hits {
        writeln!(out, "{}", artifact.index.uid(d)).map_err(anyhow::Error::from)?;
    }
    if let Some(client) = args.remote.client()? {
        let ids = client.esearch(&spec).map_err(anyhow::Error::from)?;
        writeln!(out, "# remote ({})", ids.len()).map_err(anyhow::Error::from)?;
        for id in ids {
            writeln!(out, "{id}").map_err(anyhow::Error::from)?;
        }
    }
    Ok(())
}

/// What the terminal session ended with.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AskOutcome {
    pub spec: QuerySpec,
    pub query: Option<String>,
    pub local_uids: Vec<String>,
    pub remote_uids: Option<Vec<String>>,
}

enum Input {
    Answer(Answer),
    Undo,
    Finish(Vec<String>),
    Help,
}

fn parse_input(line: &str) -> Option<Input> {
    let line = line.trim();
    let (head, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
    match head.to_ascii_lowercase().as_str() {
        "u" | "undo" => Some(Input::Undo),
        "f" | "finish" => {
            Some(Input::Finish(rest.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect()))
        }
        "?" | "h" | "help" => Some(Input::Help),
        _ => line.parse().ok().map(Input::Answer),
    }
}

const HELP: &str =
    "answers: y(es), n(o), m(aybe); u(ndo) steps back; f(inish) [term, term...] ends with optional extra terms";

/// Interactive loop: one command per input line. End of input finishes the
/// session as if `f` had been typed.
pub fn run_ask<R: BufRead, W: Write>(
    artifact: Arc<Artifact>,
    max_questions: Option<u32>,
    remote: Option<&EsearchClient>,
    input: R,
    out: &mut W,
) -> anyhow::Result<AskOutcome> {
    let mut session = match max_questions {
        Some(limit) => Session::with_limit(artifact.clone(), limit),
        None => Session::start(artifact.clone()),
    };
    let mut lines = input.lines();
    let mut bespoke = Vec::new();
    while !session.is_finished() {
        let q = session.question()?;
        writeln!(
            out,
            "Q{}/{}: {}?  (yes {}, no {}; {} documents left)",
            q.depth,
            session.limit(),
            q.term,
            q.n_yes,
            q.n_no,
            session.remaining()
        )?;
        write!(out, "[y/n/m/u/f]> ")?;
        out.flush()?;
        let Some(line) = lines.next().transpose()? else {
            writeln!(out)?;
            break;
        };
        match parse_input(&line) {
            Some(Input::Answer(a)) => {
                session.answer(a)?;
            }
            Some(Input::Undo) => match session.undo() {
                Ok(_) => {}
                Err(SessionError::NothingToUndo) => writeln!(out, "nothing to undo")?,
                Err(e) => return Err(e.into()),
            },
            Some(Input::Finish(terms)) => {
                bespoke = terms;
                break;
            }
            Some(Input::Help) => writeln!(out, "{HELP}")?,
            None => writeln!(out, "unrecognised input '{}'; {HELP}", line.trim())?,
        }
    }
    if session.depth() as u32 >= session.limit() {
        writeln!(out, "question limit reached after {} answers", session.depth())?;
    } else if session.current_node().is_leaf() {
        writeln!(out, "reached a leaf after {} answers", session.depth())?;
    }
    let spec = session.finish(bespoke);
    let query = match render_query(&spec) {
        Ok(q) => Some(q),
        Err(QueryError::Empty) => None,
        Err(e) => return Err(e.into()),
    };
    let Some(rendered) = &query else {
        writeln!(out, "query: (empty query; nothing to search)")?;
        return Ok(AskOutcome { spec, query, local_uids: Vec::new(), remote_uids: None });
    };
    writeln!(out, "query: {rendered}")?;
    let index = &artifact.index;
    let local_uids: Vec<String> = local_search(index, &spec)?.into_iter().map(|d| index.uid(d).to_string()).collect();
    writeln!(out, "local results ({}): {}", local_uids.len(), local_uids.join(" "))?;
    let remote_uids = match remote {
        Some(client) => {
            let ids = client.esearch(&spec)?;
            writeln!(out, "remote results ({}): {}", ids.len(), ids.join(" "))?;
            Some(ids)
        }
        None => None,
    };
    Ok(AskOutcome { spec, query, local_uids, remote_uids })
}

pub fn cmd_serve(args: &ServeArgs) -> Result<(), CliError> {
    let artifact = match &args.artifact {
        Some(p) => Some(Arc::new(load_artifact(p)?)),
        None => None,
    };
    let config = ServiceConfig {
        session_ttl: Duration::from_secs(args.session_ttl),
        allowed_origins: args.allow_origin.clone(),
    };
    let state = Arc::new(AppState::new(artifact, args.remote.client()?, config));
    let runtime = tokio::runtime::Runtime::new().map_err(anyhow::Error::from)?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind((args.host.as_str(), args.port))
            .await
            .with_context(|| format!("binding {}:{}", args.host, args.port))?;
        let addr = listener.local_addr()?;
        println!("listening on http://{addr}");
        io::stdout().flush()?;
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
            log::info!("interrupt received, shutting down");
        };
        branchsearch_service::serve(listener, state, shutdown).await?;
        println!("stopped");
        Ok::<(), anyhow::Error>(())
    })?;
    Ok(())
}
