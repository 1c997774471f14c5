use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde_json::json;
use tkg_core::synth::{populate_bench_graph, BenchSpec};
use tkg_core::{Graph, IngestReport, RerankMethod, Timestamp};
use tkg_server::registry::{build_graph, valid_name};
use tkg_server::{bench, transcript, Registry, ServiceConfig};

#[derive(Parser)]
#[command(name = "tkg", version, about = "Temporal knowledge-graph memory: ingest, search, bench and serve")]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true, env = "TKG_CONFIG")]
    config: Option<PathBuf>,
    /// Directory holding one store file per graph (overrides the config).
    #[arg(long, global = true)]
    data_dir: Option<PathBuf>,
    /// Graph to work on.
    #[arg(long, short, global = true, default_value = "default")]
    graph: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        listen: Option<String>,
    },
    /// Ingest a JSON Lines transcript into the graph, in file order.
    Ingest {
        transcript: PathBuf,
        /// Skip the community refresh after the last message.
        #[arg(long)]
        no_refresh: bool,
    },
    /// Retrieve context for a query and print it.
    Search {
        query: String,
        #[arg(long)]
        limit: Option<usize>,
        /// Only facts valid at this instant (ISO 8601).
        #[arg(long)]
        as_of: Option<String>,
        #[arg(long, value_parser = parse_rerank)]
        rerank: Option<RerankMethod>,
        /// Print the full JSON response instead of the context block.
        #[arg(long)]
        json: bool,
    },
    /// Measure retrieval latency per stage.
    Bench {
        /// A store file or a `.jsonl` transcript; omit with `--synthetic`.
        corpus: Option<PathBuf>,
        /// One query per line.
        #[arg(long)]
        queries: Option<PathBuf>,
        /// Generate a random graph instead of reading a corpus.
        #[arg(long)]
        synthetic: bool,
        #[arg(long, default_value_t = 10_000)]
        entities: usize,
        #[arg(long, default_value_t = 50_000)]
        edges: usize,
        #[arg(long, default_value_t = 200)]
        num_queries: usize,
        #[arg(long, default_value_t = 10)]
        warmup: usize,
        /// Print the report as JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
}

fn parse_rerank(s: &str) -> Result<RerankMethod, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|_| {
        "expected one of rrf, mmr, episode_mentions, node_distance, cross_encoder".to_string()
    })
}

fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let mut config = ServiceConfig::load(cli.config.as_deref())?;
    if let Some(dir) = cli.data_dir {
        config.data_dir = dir;
    }
    if !valid_name(&cli.graph) {
        bail!("invalid graph name {:?}", cli.graph);
    }
    match cli.command {
        Command::Serve { listen } => {
            if let Some(l) = listen {
                config.listen = l;
            }
            config.validate()?;
            serve(config)
        }
        Command::Ingest { transcript, no_refresh } => ingest(config, &cli.graph, &transcript, !no_refresh),
        Command::Search {
            query,
            limit,
            as_of,
            rerank,
            json,
        } => search(config, &cli.graph, query, limit, as_of, rerank, json),
        Command::Bench {
            corpus,
            queries,
            synthetic,
            entities,
            edges,
            num_queries,
            warmup,
            json,
        } => {
            let spec = BenchSpec {
                entities,
                edges,
                queries: num_queries,
                ..Default::default()
            };
            run_bench(config, corpus.as_deref(), queries.as_deref(), synthetic.then_some(spec), warmup, json)
        }
    }
}

fn serve(config: ServiceConfig) -> Result<()> {
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&config.listen)
            .await
            .with_context(|| format!("cannot listen on {}", config.listen))?;
        tracing::info!(addr = %listener.local_addr()?, data_dir = %config.data_dir.display(), "serving");
        let app = tkg_server::router(Arc::new(Registry::new(config)));
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok(())
    })
}

fn ingest(config: ServiceConfig, graph: &str, path: &Path, refresh: bool) -> Result<()> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    let messages: Vec<transcript::TranscriptMessage> = transcript::read(BufReader::new(file))
        .collect::<Result<_, _>>()
        .with_context(|| format!("cannot parse {}", path.display()))?;
    let registry = Registry::new(config);
    let g = registry.get_or_create(graph)?;
    let mut total = IngestReport::default();
    for (i, m) in messages.iter().enumerate() {
        let r = g
            .ingest(m.episode.clone())
            .with_context(|| format!("{}:{}", path.display(), m.line))?;
        total.entities_added += r.entities_added;
        total.entities_merged += r.entities_merged;
        total.edges_added += r.edges_added;
        total.edges_invalidated += r.edges_invalidated;
        if (i + 1) % 100 == 0 {
            tracing::info!(messages = i + 1, "ingesting");
        }
    }
    if refresh {
        g.refresh_communities().context("community refresh")?;
    }
    let s = g.snapshot();
    let summary = json!({
        "graph": graph,
        "store": registry.path_of(graph),
        "messages": messages.len(),
        "report": total,
        "totals": {
            "episodes": s.episode_count(),
            "entities": s.entity_count(),
            "edges": s.edge_count(),
            "communities": s.community_count(),
        },
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn search(
    config: ServiceConfig,
    graph: &str,
    text: String,
    limit: Option<usize>,
    as_of: Option<String>,
    rerank: Option<RerankMethod>,
    json: bool,
) -> Result<()> {
    let registry = Registry::new(config.clone());
    let path = registry.path_of(graph);
    let g = if path.exists() {
        build_graph(&config).load(&path).with_context(|| format!("cannot load {}", path.display()))?
    } else {
        build_graph(&config).in_memory()?
    };
    let mut q = config.search.query(text);
    if let Some(l) = limit {
        q.limit = l;
    }
    if let Some(t) = as_of {
        q.as_of = Some(Timestamp::parse(&t)?);
    }
    let mut rerank_cfg = config.search.rerank.clone();
    if let Some(m) = rerank {
        rerank_cfg.method = m;
    }
    let r = g.retrieve(&q, &rerank_cfg)?;
    if json {
        println!("{}", serde_json::to_string_pretty(&r)?);
    } else {
        println!("{}", r.context);
    }
    Ok(())
}

fn read_queries(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    Ok(text.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect())
}

fn run_bench(
    config: ServiceConfig,
    corpus: Option<&Path>,
    queries: Option<&Path>,
    synthetic: Option<BenchSpec>,
    warmup: usize,
    json: bool,
) -> Result<()> {
    let (graph, generated): (Graph, Vec<String>) = match (corpus, synthetic) {
        (Some(_), Some(_)) => bail!("give either a corpus or --synthetic, not both"),
        (None, None) => bail!("give a corpus file or --synthetic"),
        (None, Some(spec)) => {
            let g = build_graph(&config).in_memory()?;
            tracing::info!(entities = spec.entities, edges = spec.edges, "generating graph");
            let q = populate_bench_graph(&g, &spec)?;
            (g, q)
        }
        (Some(path), None) if path.extension().is_some_and(|e| e == "jsonl") => {
            let g = build_graph(&config).in_memory()?;
            let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
            for m in transcript::read(BufReader::new(file)) {
                let m = m.with_context(|| format!("cannot parse {}", path.display()))?;
                g.ingest(m.episode).with_context(|| format!("{}:{}", path.display(), m.line))?;
            }
            g.refresh_communities()?;
            (g, Vec::new())
        }
        (Some(path), None) => {
            let g = build_graph(&config).load(path).with_context(|| format!("cannot load {}", path.display()))?;
            (g, Vec::new())
        }
    };
    let queries = match queries {
        Some(p) => read_queries(p)?,
        None if !generated.is_empty() => generated,
        None => bail!("--queries is required for a corpus"),
    };
    if queries.is_empty() {
        bail!("no queries to run");
    }
    let report = bench::run(&graph, &queries, &config.search, warmup)?;
    if json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        print!("{}", bench::render_table(&report));
    }
    Ok(())
}
