//! Subcommand implementations.

use crate::args::*;
use crate::config::{resolve, Resolved};
use crate::report::*;
use anyhow::{anyhow, Context, Result};
use osbm_core::analysis::{self, lexicographic_order, model_select};
use osbm_core::dl::ModelVariant;
use osbm_core::generate::{
    add_upstream_perturbation, sample_imbalanced_degrees, sample_microcanonical, GeneratorSpec,
};
use osbm_core::graph::{load_edge_list, DegreeSequence, DirectedMultigraph, IdPolicy};
use osbm_core::mcmc::{anneal_map, collect_marginals, Beta};
use osbm_core::state::BlockState;
use osbm_core::DlTables;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

/// Errors split by exit code: 1 for usage, 2 for runtime.
pub enum CliError {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
    pub fn message(&self) -> String {
        match self {
            CliError::Usage(e) | CliError::Runtime(e) => format!("{e:#}"),
        }
    }
}

type CmdResult = Result<(), CliError>;

fn usage<T>(r: Result<T>) -> Result<T, CliError> {
    r.map_err(CliError::Usage)
}

fn runtime<T, E: Into<anyhow::Error>>(r: Result<T, E>) -> Result<T, CliError> {
    r.map_err(|e| CliError::Runtime(e.into()))
}

fn load_graph(
    path: &Path,
    integer_ids: bool,
) -> Result<(Arc<DirectedMultigraph>, Vec<String>), CliError> {
    let text = runtime(
        std::fs::read_to_string(path)
            .with_context(|| format!("cannot read edge list {}", path.display())),
    )?;
    let policy = if integer_ids { IdPolicy::Integer } else { IdPolicy::FirstSeen };
    let (graph, ids) = runtime(
        load_edge_list(&text, policy)
            .map_err(anyhow::Error::from)
            .with_context(|| format!("parsing {}", path.display())),
    )?;
    if graph.num_nodes() == 0 {
        return Err(CliError::Runtime(anyhow!("{}: graph has no nodes", path.display())));
    }
    Ok((Arc::new(graph), ids))
}

fn digest(path: &Path, graph: &DirectedMultigraph) -> InputDigest {
    InputDigest {
        path: path.display().to_string(),
        num_nodes: graph.num_nodes(),
        num_edges: graph.num_edges(),
    }
}

fn emit(output: &Option<PathBuf>, content: &str) -> CmdResult {
    match output {
        Some(path) => runtime(
            std::fs::write(path, content)
                .with_context(|| format!("cannot write {}", path.display())),
        ),
        None => {
            use std::io::Write;
            let mut stdout = std::io::stdout().lock();
            match writeln!(stdout, "{content}") {
                Ok(()) => Ok(()),
                // downstream consumer (e.g. head) closed the pipe
                Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
                Err(e) => Err(CliError::Runtime(e.into())),
            }
        }
    }
}

fn emit_json<T: serde::Serialize>(output: &Option<PathBuf>, value: &T) -> CmdResult {
    let json = runtime(serde_json::to_string_pretty(value).map_err(anyhow::Error::from))?;
    emit(output, &json)
}

fn partition_tsv(assignments: &[NodeAssignment]) -> String {
    let mut out = String::new();
    for a in assignments {
        let _ = writeln!(out, "{}\t{}\t{}", a.node, a.group, a.rank);
    }
    out.trim_end().to_string()
}

pub fn cmd_fit(args: &FitArgs) -> CmdResult {
    let t0 = Instant::now();
    let Resolved { variant, chain, q_cap } = usage(resolve(&args.opts))?;
    let (graph, ids) = load_graph(&args.graph, args.opts.integer_ids)?;
    let tables = Arc::new(DlTables::new(q_cap));
    let fit = runtime(anneal_map(&graph, variant, &chain, &tables))?;
    let mut partition = fit.partition;
    let mut state = BlockState::build(Arc::clone(&graph), &partition);
    // report with most edges flowing upstream; the description length
    // is invariant under the full reversal
    if variant.ordered && state.alignment().1 > state.alignment().0 {
        partition = partition.reversed();
        state.reverse_order();
    }
    let report = RunReport {
        input: digest(&args.graph, &graph),
        model: variant.name().to_string(),
        seed: chain.seed,
        description_length: fit.breakdown,
        num_groups: partition.num_groups,
        partition: node_assignments(&partition, &ids),
        group_order: group_order(&partition),
        alignment: alignment_report(&state, variant.ordered),
        wall_clock_secs: t0.elapsed().as_secs_f64(),
    };
    match args.opts.format.unwrap_or(OutputFormat::Json) {
        OutputFormat::Json => emit_json(&args.opts.output, &report),
        OutputFormat::Tsv => emit(&args.opts.output, &partition_tsv(&report.partition)),
    }
}

pub fn cmd_compare(args: &CompareArgs) -> CmdResult {
    let t0 = Instant::now();
    let Resolved { chain, q_cap, .. } = usage(resolve(&args.opts))?;
    let variants: Vec<ModelVariant> = match &args.models {
        Some(csv) => usage(
            csv.split(',')
                .map(|name| {
                    ModelVariant::from_name(name.trim())
                        .ok_or_else(|| anyhow!("unknown model {name:?}"))
                })
                .collect::<Result<Vec<_>>>(),
        )?,
        None => ModelVariant::ALL.to_vec(),
    };
    if variants.is_empty() {
        return Err(CliError::Usage(anyhow!("--models must name at least one variant")));
    }
    let (graph, ids) = load_graph(&args.graph, args.opts.integer_ids)?;
    let tables = Arc::new(DlTables::new(q_cap));
    let cmp = runtime(model_select(&graph, &variants, &chain, &tables))?;
    let fits = cmp
        .fits
        .iter()
        .map(|f| VariantReport {
            model: f.variant.name().to_string(),
            description_length: f.breakdown,
            num_groups: f.num_groups,
            alignment: AlignmentReport {
                upstream: f.e_up,
                downstream: f.e_down,
                lateral: f.e_lat,
                delta: f.e_up as i64 - f.e_down as i64,
                upstream_fraction: f.upstream_fraction,
            },
        })
        .collect();
    let best = cmp.fits.iter().find(|f| f.variant == cmp.best).unwrap();
    let report = ComparisonReport {
        input: digest(&args.graph, &graph),
        seed: chain.seed,
        models: cmp.fits.iter().map(|f| f.variant.name().to_string()).collect(),
        fits,
        best_model: cmp.best.name().to_string(),
        sigma_diff: cmp.sigma_diffs.clone(),
        posterior_odds: cmp.odds.clone(),
        best_partition: node_assignments(&best.partition, &ids),
        wall_clock_secs: t0.elapsed().as_secs_f64(),
    };
    match args.opts.format.unwrap_or(OutputFormat::Json) {
        OutputFormat::Json => emit_json(&args.opts.output, &report),
        OutputFormat::Tsv => emit(&args.opts.output, &partition_tsv(&report.best_partition)),
    }
}

pub fn cmd_marginals(args: &MarginalsArgs) -> CmdResult {
    let t0 = Instant::now();
    let Resolved { variant, chain, q_cap } = usage(resolve(&args.opts))?;
    if !matches!(chain.beta, Beta::Finite(b) if b == 1.0) {
        return Err(CliError::Usage(anyhow!("rank marginals sample the posterior; --beta must be 1")));
    }
    let (graph, ids) = load_graph(&args.graph, args.opts.integer_ids)?;
    let tables = Arc::new(DlTables::new(q_cap));
    let marginals = runtime(collect_marginals(&graph, variant, &chain, &tables))?;
    let mean = analysis::mean_rank(&marginals);
    let report = MarginalsReport {
        input: digest(&args.graph, &graph),
        model: variant.name().to_string(),
        seed: chain.seed,
        samples: marginals.num_samples(),
        num_ranks: marginals.num_ranks(),
        node_ids: ids,
        pi: (0..graph.num_nodes()).map(|i| marginals.pi(i)).collect(),
        mean_rank: mean,
        wall_clock_secs: t0.elapsed().as_secs_f64(),
    };
    match args.opts.format.unwrap_or(OutputFormat::Json) {
        OutputFormat::Json => emit_json(&args.opts.output, &report),
        OutputFormat::Tsv => {
            let mut out = String::new();
            for (i, id) in report.node_ids.iter().enumerate() {
                for (r, p) in report.pi[i].iter().enumerate() {
                    if *p > 0.0 {
                        let _ = writeln!(out, "{id}\t{r}\t{p}");
                    }
                }
            }
            emit(&args.opts.output, out.trim_end())
        }
    }
}

#[derive(Debug, Deserialize)]
struct SpecFile {
    labels: Vec<usize>,
    affinities: Vec<Vec<u64>>,
    #[serde(default)]
    out_degrees: Option<Vec<u64>>,
    #[serde(default)]
    in_degrees: Option<Vec<u64>>,
}

pub fn cmd_generate(args: &GenerateArgs) -> CmdResult {
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let graph = if let Some(path) = &args.spec {
        let text = runtime(
            std::fs::read_to_string(path)
                .with_context(|| format!("cannot read spec {}", path.display())),
        )?;
        let spec_file: SpecFile = runtime(
            serde_json::from_str(&text)
                .map_err(anyhow::Error::from)
                .with_context(|| format!("parsing {}", path.display())),
        )?;
        let degrees = match (spec_file.out_degrees, spec_file.in_degrees) {
            (Some(out_degrees), Some(in_degrees)) => {
                Some(DegreeSequence { out_degrees, in_degrees })
            }
            (None, None) => None,
            _ => {
                return Err(CliError::Usage(anyhow!(
                    "spec must give both out_degrees and in_degrees or neither"
                )))
            }
        };
        let spec = GeneratorSpec { labels: spec_file.labels, affinities: spec_file.affinities, degrees };
        runtime(sample_microcanonical(&spec, &mut rng))?
    } else if let Some(nk) = &args.imbalanced {
        let (n, k) = (nk[0] as usize, nk[1]);
        if n < 2 || k < 1 {
            return Err(CliError::Usage(anyhow!("--imbalanced needs N >= 2 and K >= 1")));
        }
        if (n as u64 * k) % 2 == 1 {
            return Err(CliError::Usage(anyhow!(
                "--imbalanced {n} {k}: N*K must be even for a balanced degree sequence"
            )));
        }
        let degrees = sample_imbalanced_degrees(n, k, &mut rng);
        let e_total: u64 = degrees.out_degrees.iter().sum();
        let spec = GeneratorSpec {
            labels: vec![0; n],
            affinities: vec![vec![e_total]],
            degrees: Some(degrees),
        };
        runtime(sample_microcanonical(&spec, &mut rng))?
    } else {
        return Err(CliError::Usage(anyhow!("generate needs --imbalanced N K or --spec FILE")));
    };
    let graph = match (args.perturb_nodes, args.perturb_edges) {
        (Some(m), Some(extra)) => {
            if m < 2 || m > graph.num_nodes() {
                return Err(CliError::Usage(anyhow!(
                    "--perturb-nodes must be in [2, {}]",
                    graph.num_nodes()
                )));
            }
            add_upstream_perturbation(&graph, m, extra, &mut rng)
        }
        _ => graph,
    };
    emit(&args.output, graph.to_edge_list().trim_end())
}

pub fn cmd_rank(args: &RankArgs) -> CmdResult {
    let (graph, ids) = load_graph(&args.graph, args.integer_ids)?;
    let fit_text = runtime(
        std::fs::read_to_string(&args.fit)
            .with_context(|| format!("cannot read fit report {}", args.fit.display())),
    )?;
    let fit: RunReport = runtime(
        serde_json::from_str(&fit_text)
            .map_err(anyhow::Error::from)
            .with_context(|| format!("parsing {}", args.fit.display())),
    )?;
    // ranks by original node id
    let mut rank_of: std::collections::HashMap<&str, usize> = std::collections::HashMap::new();
    for a in &fit.partition {
        rank_of.insert(a.node.as_str(), a.rank);
    }
    let ranks: Vec<usize> = runtime(
        ids.iter()
            .map(|id| {
                rank_of
                    .get(id.as_str())
                    .copied()
                    .ok_or_else(|| anyhow!("node {id:?} missing from the fit report"))
            })
            .collect::<Result<Vec<_>>>(),
    )?;
    let imbalance = graph.degree_imbalance();
    let mean_rank = match &args.marginals {
        Some(path) => {
            let text = runtime(
                std::fs::read_to_string(path)
                    .with_context(|| format!("cannot read marginals {}", path.display())),
            )?;
            let m: MarginalsReport = runtime(
                serde_json::from_str(&text)
                    .map_err(anyhow::Error::from)
                    .with_context(|| format!("parsing {}", path.display())),
            )?;
            if m.node_ids != ids {
                return Err(CliError::Runtime(anyhow!(
                    "marginals node ids do not match the graph"
                )));
            }
            Some(m.mean_rank)
        }
        None => None,
    };
    let (tau, tau_note) = if args.tau {
        let xs: Vec<f64> = if args.use_mean_rank {
            mean_rank.clone().expect("clap enforces --marginals with --use-mean-rank")
        } else {
            ranks.iter().map(|&r| r as f64).collect()
        };
        let ys: Vec<f64> = imbalance.iter().map(|&d| d as f64).collect();
        match analysis::kendall_tau(&xs, &ys) {
            Ok(t) => (Some(Some(t)), None),
            Err(e) => (Some(None), Some(e.to_string())),
        }
    } else {
        (None, None)
    };
    let lex = args.lex.then(|| {
        lexicographic_order(&ranks, &imbalance)
            .into_iter()
            .map(|i| ids[i].clone())
            .collect::<Vec<_>>()
    });
    let report = RankReport {
        input: digest(&args.graph, &graph),
        fit: args.fit.display().to_string(),
        node_ids: ids,
        ranks,
        degree_imbalance: imbalance,
        mean_rank,
        tau,
        tau_note,
        lexicographic_order: lex,
    };
    match args.format.unwrap_or(OutputFormat::Json) {
        OutputFormat::Json => emit_json(&args.output, &report),
        OutputFormat::Tsv => {
            let mut out = String::new();
            for (i, id) in report.node_ids.iter().enumerate() {
                let _ = writeln!(out, "{id}\t{}\t{}", report.ranks[i], report.degree_imbalance[i]);
            }
            emit(&args.output, out.trim_end())
        }
    }
}
