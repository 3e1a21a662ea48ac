use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use graphcf::embed::{
    default_pair_count, embed_all, loss_trace_csv, sample_pairs, train, Activation, EmbeddingModel, GedNormalization,
    LossKind, TrainConfig,
};
use graphcf::eval::{
    aggregate_global_edits, edit_statistics, eligible_ranking, ged_ranking, group_by_transition, spearman, EvalReport,
};
use graphcf::ged::{bipartite_ged, edit_path_dot, exact_ged, ged_matrix, ExactLimits};
use graphcf::graph::{parse_star_records, serialize_dataset};
use graphcf::kernel::{kernel_rank, PyramidConfig};
use graphcf::retrieval::{
    load_confusions, rank_candidates, select_counterfactual, sort_ranking, RankedRetrieval, Similarity, TargetRule,
};
use graphcf::{CostModel, Error, GedMatrix, GraphDataset};
use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;

use crate::args::*;
use crate::artifacts::*;

pub struct Ctx {
    pub out: PathBuf,
}

impl Ctx {
    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn or_default(&self, p: &Option<PathBuf>, name: &str) -> PathBuf {
        p.clone().unwrap_or_else(|| self.path(name))
    }
}

fn cost_model(args: &CostArgs) -> CliResult<CostModel> {
    let mut b = CostModel::builder(Arc::new(load_taxonomy(&args.taxonomy)?));
    if let Some(p) = &args.relation_taxonomy {
        b = b.relation_taxonomy(Arc::new(load_taxonomy(p)?));
    }
    if let Some(c) = args.node_indel {
        b = b.node_indel(c);
    }
    if let Some(c) = args.edge_indel {
        b = b.edge_indel(c);
    }
    if let Some(c) = args.unknown_cost {
        b = b.unknown_cost(c);
    }
    Ok(b.build()?)
}

fn target_rule(args: &TargetArgs) -> CliResult<TargetRule> {
    Ok(match (&args.target_class, &args.confusion_file) {
        (Some(c), _) => TargetRule::Fixed(c.clone()),
        (None, Some(p)) => TargetRule::Confusion(load_confusions(&read(p)?)?),
        (None, None) => TargetRule::Fallback,
    })
}

fn load_ged(path: &Path, ds: &GraphDataset) -> CliResult<GedMatrix> {
    let m = GedMatrix::from_csv(&read_text(path)?)?;
    if m.ids().iter().map(String::as_str).ne(ds.ids()) {
        return Err(Error::Validation(format!("GED matrix {} does not match the dataset's graphs", path.display())).into());
    }
    Ok(m)
}

fn print_json<T: Serialize>(v: &T) {
    println!("{}", serde_json::to_string_pretty(v).expect("serializes"));
}

#[derive(Serialize)]
struct ValidationSummary {
    dataset: String,
    content_hash: String,
    graphs: usize,
    nodes: usize,
    edges: usize,
    classes: BTreeMap<String, usize>,
    disconnected_graphs: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    labels_missing_from_taxonomy: Option<Vec<String>>,
}

pub fn validate(ctx: &Ctx, a: &ValidateArgs) -> CliResult<()> {
    let ds = load_dataset(&a.dataset)?;
    let mut classes = BTreeMap::new();
    for g in ds.graphs() {
        *classes.entry(g.class_pred().to_string()).or_insert(0) += 1;
    }
    let missing = match &a.taxonomy {
        Some(p) => {
            let t = load_taxonomy(p)?;
            let mut m: Vec<String> = ds
                .graphs()
                .iter()
                .flat_map(|g| g.nodes())
                .filter(|n| !t.contains(&n.label))
                .map(|n| n.label.clone())
                .collect();
            m.sort();
            m.dedup();
            Some(m)
        }
        None => None,
    };
    let summary = ValidationSummary {
        dataset: ds.name().to_string(),
        content_hash: ds.content_hash(),
        graphs: ds.len(),
        nodes: ds.graphs().iter().map(|g| g.node_count()).sum(),
        edges: ds.graphs().iter().map(|g| g.edge_count()).sum(),
        classes,
        disconnected_graphs: ds
            .graphs()
            .iter()
            .filter(|g| !g.is_weakly_connected())
            .map(|g| g.instance_id().to_string())
            .collect(),
        labels_missing_from_taxonomy: missing,
    };
    write_json(&ctx.path("validation.json"), &summary)?;
    print_json(&summary);
    Ok(())
}

pub fn ged(ctx: &Ctx, a: &GedArgs) -> CliResult<()> {
    let ds = load_dataset(&a.dataset)?;
    let cm = cost_model(&a.cost)?;
    let n = ds.len();
    let pairs: Option<Vec<(usize, usize)>> = match a.pairs {
        PairSelection::All => None,
        PairSelection::Sampled => {
            let seed = a
                .seed
                .ok_or_else(|| Error::Config("--pairs sampled needs --seed".into()))?;
            Some(sample_pairs(n, a.num_pairs.unwrap_or_else(|| default_pair_count(n)), seed))
        }
    };
    let pair_spec = match &pairs {
        None => "all".to_string(),
        Some(p) => format!("{p:?}"),
    };
    let key = digest(&[
        ds.content_hash().as_bytes(),
        cm.fingerprint().as_bytes(),
        pair_spec.as_bytes(),
        &[u8::from(a.exact)],
    ]);
    let cache = ctx.path(&format!("cache/ged-{key}.bin"));
    let start = Instant::now();
    let cached = std::fs::read(&cache).ok().and_then(|b| GedMatrix::from_cache_bytes(&b, &key));
    let matrix = match cached {
        Some(m) => {
            info!("GED matrix loaded from cache {}", cache.display());
            m
        }
        None => {
            let m = if a.exact {
                exact_matrix(&ds, &cm, pairs.as_deref())?
            } else {
                ged_matrix(&ds, &cm, pairs.as_deref())?
            };
            write(&cache, m.to_cache_bytes(&key))?;
            m
        }
    };
    let computed = matrix.computed_pairs().count();
    record_timing(&ctx.out, "ged", "ged", start.elapsed().as_secs_f64(), computed)?;
    write(&ctx.path("ged.csv"), matrix.to_csv())?;
    println!("wrote {} ({computed} pairs)", ctx.path("ged.csv").display());
    Ok(())
}

fn exact_matrix(ds: &GraphDataset, cm: &CostModel, pairs: Option<&[(usize, usize)]>) -> CliResult<GedMatrix> {
    let n = ds.len();
    let all: Vec<(usize, usize)> = match pairs {
        Some(p) => p.iter().map(|&(i, j)| (i.min(j), i.max(j))).filter(|(i, j)| i != j).collect(),
        None => (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect(),
    };
    let g = ds.graphs();
    let values: Vec<f64> = all
        .par_iter()
        .map(|&(i, j)| exact_ged(&g[i], &g[j], cm, ExactLimits::default()).map(|r| r.value))
        .collect::<graphcf::Result<_>>()?;
    let mut m = GedMatrix::empty(ds.ids().into_iter().map(String::from).collect());
    for (&(i, j), v) in all.iter().zip(values) {
        m.set(i, j, v);
    }
    Ok(m)
}

#[derive(Serialize)]
struct TrainReport {
    num_pairs: usize,
    ged_scale: f64,
    first_epoch_loss: f64,
    final_epoch_loss: f64,
    heldout_pairs: usize,
    heldout_spearman: Option<f64>,
}

pub fn train_cmd(ctx: &Ctx, a: &TrainArgs) -> CliResult<()> {
    let ds = load_dataset(&a.dataset)?;
    let ged = load_ged(&ctx.or_default(&a.ged, "ged.csv"), &ds)?;
    let wv = load_word_vectors(&a.word_vectors)?;
    let base = if a.wide_preset {
        TrainConfig::wide_preset()
    } else {
        TrainConfig::default()
    };
    let cfg = TrainConfig {
        learning_rate: a.lr.unwrap_or(base.learning_rate),
        batch_size: a.batch_size.unwrap_or(base.batch_size),
        epochs: a.epochs.unwrap_or(base.epochs),
        d_out: a.d_out.unwrap_or(base.d_out),
        activation: match a.activation {
            Some(ActivationArg::Identity) => Activation::Identity,
            Some(ActivationArg::Relu) => Activation::Relu,
            None => base.activation,
        },
        reify_edges: a.reify_edges,
        seed: a.seed,
        num_pairs: a.num_pairs,
        loss: match a.loss {
            LossArg::Mse => LossKind::Mse,
            LossArg::Mae => LossKind::Mae,
        },
        normalize_ged: match a.normalize_ged {
            NormalizeArg::None => GedNormalization::None,
            NormalizeArg::Max => GedNormalization::Max,
        },
    };
    let start = Instant::now();
    let outcome = train(&ds, &ged, &wv, &cfg)?;
    let elapsed = start.elapsed().as_secs_f64();
    record_timing(&ctx.out, "train", "train", elapsed, outcome.pairs.len())?;

    let emb = embed_all(&outcome.model, &ds, &wv)?;
    let trained: std::collections::HashSet<(usize, usize)> = outcome.pairs.iter().map(|p| (p.i, p.j)).collect();
    let (mut dist, mut target) = (Vec::new(), Vec::new());
    for (i, j, v) in ged.computed_pairs() {
        if !trained.contains(&(i, j)) {
            let d = &emb.row(i) - &emb.row(j);
            dist.push(d.dot(&d));
            target.push(v);
        }
    }
    let report = TrainReport {
        num_pairs: outcome.pairs.len(),
        ged_scale: outcome.ged_scale,
        first_epoch_loss: outcome.loss_trace[0],
        final_epoch_loss: *outcome.loss_trace.last().expect("epochs >= 1"),
        heldout_pairs: dist.len(),
        heldout_spearman: if dist.len() >= 2 { Some(spearman(&dist, &target)?) } else { None },
    };
    let ids = ds.ids();
    let mut pairs_csv = String::from("i,j,ged\n");
    for p in &outcome.pairs {
        pairs_csv.push_str(&format!("{},{},{}\n", ids[p.i], ids[p.j], p.ged));
    }
    write(&ctx.path("model.bin"), outcome.model.to_bytes())?;
    write(&ctx.path("loss.csv"), loss_trace_csv(&outcome.loss_trace))?;
    write(&ctx.path("train_pairs.csv"), pairs_csv)?;
    write_json(&ctx.path("train_report.json"), &report)?;
    print_json(&report);
    Ok(())
}

pub fn embed(ctx: &Ctx, a: &EmbedArgs) -> CliResult<()> {
    let ds = load_dataset(&a.dataset)?;
    let model_bytes = read(&ctx.or_default(&a.model, "model.bin"))?;
    let model = EmbeddingModel::from_bytes(&model_bytes)?;
    let wv = load_word_vectors(&a.word_vectors)?;
    let key = digest(&[ds.content_hash().as_bytes(), &model_bytes, wv.fingerprint().as_bytes()]);
    let cache = ctx.path(&format!("cache/emb-{key}.csv"));
    let start = Instant::now();
    let csv = match std::fs::read_to_string(&cache) {
        Ok(text) => text,
        Err(_) => {
            let e = embed_all(&model, &ds, &wv)?;
            let text = embeddings_csv(&ds.ids(), &e);
            write(&cache, &text)?;
            text
        }
    };
    record_timing(&ctx.out, "embed", "inference", start.elapsed().as_secs_f64(), ds.len())?;
    write(&ctx.path("embeddings.csv"), csv)?;
    println!("wrote {}", ctx.path("embeddings.csv").display());
    Ok(())
}

fn query_indices(ds: &GraphDataset, ids: &[String]) -> CliResult<Vec<usize>> {
    if ids.is_empty() {
        return Ok((0..ds.len()).collect());
    }
    ids.iter()
        .map(|id| {
            ds.index_of(id)
                .ok_or_else(|| Error::Argument(format!("unknown query id '{id}'")).into())
        })
        .collect()
}

fn tagged(tag: &Option<String>, name: &str) -> String {
    match tag {
        Some(t) => format!("{t}_{name}"),
        None => name.to_string(),
    }
}

pub fn retrieve(ctx: &Ctx, a: &RetrieveArgs) -> CliResult<()> {
    let tag = &a.tag;
    let ds = load_dataset(&a.dataset)?;
    let cm = cost_model(&a.cost)?;
    let rule = target_rule(&a.target)?;
    let queries = query_indices(&ds, &a.queries)?;
    let ids = ds.ids();
    let (method, scorer): (String, Box<dyn Fn(usize) -> CliResult<Vec<(usize, f64)>> + Sync>) = match &a.ged {
        Some(p) => {
            let ged = load_ged(p, &ds)?;
            let ids = ids.clone();
            let n = ds.len();
            (
                "ged".into(),
                Box::new(move |q| {
                    let mut r = Vec::with_capacity(n);
                    for c in (0..n).filter(|&c| c != q) {
                        let v = ged
                            .get(q, c)
                            .ok_or_else(|| Error::Argument(format!("GED missing for ({}, {})", ids[q], ids[c])))?;
                        r.push((c, -v));
                    }
                    sort_ranking(&mut r, &ids, true);
                    Ok(r)
                }),
            )
        }
        None => {
            let emb = parse_embeddings(&read_text(&ctx.or_default(&a.embeddings, "embeddings.csv"))?, &ds)?;
            let sim = match a.similarity {
                SimilarityArg::Cosine => Similarity::Cosine,
                SimilarityArg::Euclidean => Similarity::Euclidean,
            };
            let ids = ids.clone();
            (
                format!("gnn-{}", if sim == Similarity::Cosine { "cosine" } else { "euclidean" }),
                Box::new(move |q| Ok(rank_candidates(&emb, q, &ids, sim)?)),
            )
        }
    };

    let start = Instant::now();
    let per_query: Vec<(usize, Vec<(usize, f64)>, Option<RankedRetrieval>)> = queries
        .par_iter()
        .map(|&q| {
            let ranking = scorer(q)?;
            let target = rule.target_for(ds.graphs()[q].class_pred())?;
            let r = match select_counterfactual(&ds, &ranking, q, target.as_deref(), &cm) {
                Ok(r) => Some(r),
                Err(Error::NoCounterfactual(t)) => {
                    warn!("query {}: no counterfactual in class {t}", ids[q]);
                    None
                }
                Err(e) => return Err(e.into()),
            };
            Ok((q, ranking, r))
        })
        .collect::<CliResult<_>>()?;
    record_timing(&ctx.out, "retrieve", "retrieval", start.elapsed().as_secs_f64(), queries.len())?;

    let rankings = Rankings::new(
        &method,
        &ds,
        &per_query.iter().map(|(q, r, _)| (*q, r.clone())).collect::<Vec<_>>(),
    );
    let results: Vec<RankedRetrieval> = per_query
        .iter()
        .filter_map(|(_, _, r)| r.as_ref().map(|r| r.truncated(a.k)))
        .collect();
    if a.dot {
        for r in &results {
            let title = format!("{} -> {}", r.query_id, r.counterfactual_id);
            write(
                &ctx.path(&format!("dot/{}.dot", file_stem(&r.query_id))),
                edit_path_dot(&r.edit_path, &title),
            )?;
        }
    }
    write_json(&ctx.path(&tagged(tag, "rankings.json")), &rankings)?;
    write_json(&ctx.path(&tagged(tag, "retrievals.json")), &results)?;
    println!(
        "{} queries, {} counterfactuals -> {}",
        queries.len(),
        results.len(),
        ctx.path(&tagged(tag, "retrievals.json")).display()
    );
    Ok(())
}

fn file_stem(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

#[derive(Serialize)]
struct Explanation<'a> {
    query_id: &'a str,
    counterfactual_id: &'a str,
    exact: bool,
    ged_value: f64,
    node_edits: usize,
    edge_edits: usize,
    edit_path: &'a graphcf::EditPath,
}

pub fn explain(ctx: &Ctx, a: &ExplainArgs) -> CliResult<()> {
    let ds = load_dataset(&a.dataset)?;
    let cm = cost_model(&a.cost)?;
    let cf_id = match &a.counterfactual {
        Some(c) => c.clone(),
        None => {
            let results: Vec<RankedRetrieval> = read_json(&ctx.path("retrievals.json"))?;
            results
                .into_iter()
                .find(|r| r.query_id == a.query)
                .map(|r| r.counterfactual_id)
                .ok_or_else(|| Error::Argument(format!("no retrieval recorded for query '{}'", a.query)))?
        }
    };
    let get = |id: &str| {
        ds.index_of(id)
            .map(|i| &ds.graphs()[i])
            .ok_or_else(|| CliError::from(Error::Argument(format!("unknown instance id '{id}'"))))
    };
    let (q, c) = (get(&a.query)?, get(&cf_id)?);
    let result = if a.exact {
        exact_ged(q, c, &cm, ExactLimits::default())?
    } else {
        bipartite_ged(q, c, &cm)
    };
    let e = Explanation {
        query_id: &a.query,
        counterfactual_id: &cf_id,
        exact: result.exact,
        ged_value: result.value,
        node_edits: result.path.node_edits(),
        edge_edits: result.path.edge_edits(),
        edit_path: &result.path,
    };
    let stem = format!("explain/{}__{}", file_stem(&a.query), file_stem(&cf_id));
    write_json(&ctx.path(&format!("{stem}.json")), &e)?;
    write(
        &ctx.path(&format!("{stem}.dot")),
        edit_path_dot(&result.path, &format!("{} -> {}", a.query, cf_id)),
    )?;
    print_json(&e);
    Ok(())
}

pub fn eval(ctx: &Ctx, a: &EvalArgs) -> CliResult<()> {
    let ds = load_dataset(&a.dataset)?;
    let cm = cost_model(&a.cost)?;
    let rule = target_rule(&a.target)?;
    let ged = load_ged(&ctx.or_default(&a.ged, "ged.csv"), &ds)?;
    let rankings: Rankings = read_json(&ctx.or_default(&a.rankings, "rankings.json"))?;
    let resolved = rankings.resolve(&ds)?;
    let scored: Vec<Option<((Vec<usize>, Vec<usize>), RankedRetrieval)>> = resolved
        .par_iter()
        .map(|(q, ranking)| {
            let target = rule.target_for(ds.graphs()[*q].class_pred())?;
            let r = match select_counterfactual(&ds, ranking, *q, target.as_deref(), &cm) {
                Ok(r) => r,
                Err(Error::NoCounterfactual(_)) => return Ok(None),
                Err(e) => return Err(e.into()),
            };
            let gt = ged_ranking(&ds, &ged, *q, &rule)?;
            let pred = eligible_ranking(&ds, ranking, *q, &rule)?;
            Ok(Some(((gt, pred), r)))
        })
        .collect::<CliResult<_>>()?;
    let (pairs, results): (Vec<_>, Vec<_>) = scored.into_iter().flatten().unzip();
    let stats = edit_statistics(&results, &ds, &cm)?;
    let report = EvalReport::build(&pairs, &a.ks, stats)?;
    let name = a.name.clone().unwrap_or_else(|| rankings.method.clone());
    write_json(&ctx.path(&format!("eval_{}.json", file_stem(&name))), &report)?;
    let md = report.to_markdown(&name);
    write(&ctx.path(&format!("eval_{}.md", file_stem(&name))), &md)?;
    print!("{md}");
    Ok(())
}

pub fn aggregate(ctx: &Ctx, a: &AggregateArgs) -> CliResult<()> {
    let results: Vec<RankedRetrieval> = read_json(&ctx.or_default(&a.retrievals, "retrievals.json"))?;
    let groups = group_by_transition(&results);
    let mut written = 0;
    for ((from, to), rs) in &groups {
        if a.from.as_ref().is_some_and(|f| f != from) || a.to.as_ref().is_some_and(|t| t != to) {
            continue;
        }
        let g = aggregate_global_edits(rs)?;
        let stem = format!("global_edits/{}__{}", file_stem(from), file_stem(to));
        write_json(&ctx.path(&format!("{stem}.json")), &g)?;
        write(&ctx.path(&format!("{stem}.csv")), g.to_csv()?)?;
        println!("{from} -> {to}: {} queries", rs.len());
        written += 1;
    }
    if written == 0 {
        return Err(Error::Argument("no results match the requested transition".into()).into());
    }
    Ok(())
}

pub fn kernel(ctx: &Ctx, a: &KernelArgs) -> CliResult<()> {
    let ds = load_dataset(&a.dataset)?;
    let cfg = PyramidConfig {
        d: a.d,
        levels: a.levels,
        use_labels: !a.no_labels,
    };
    let start = Instant::now();
    let (gram, ranks) = kernel_rank(&ds, &cfg)?;
    record_timing(&ctx.out, "kernel", "gram+ranking", start.elapsed().as_secs_f64(), ds.len())?;
    let per_query: Vec<(usize, Vec<(usize, f64)>)> = ranks.into_iter().enumerate().collect();
    write_json(&ctx.path("kernel_rankings.json"), &Rankings::new("kernel", &ds, &per_query))?;
    let ids = ds.ids();
    let mut csv = format!("instance_id,{}\n", ids.join(","));
    for (id, row) in ids.iter().zip(gram.rows()) {
        csv.push_str(id);
        for v in row {
            csv.push_str(&format!(",{v}"));
        }
        csv.push('\n');
    }
    write(&ctx.path("kernel_gram.csv"), csv)?;
    println!("wrote {}", ctx.path("kernel_rankings.json").display());
    Ok(())
}

pub fn star(ctx: &Ctx, a: &StarArgs) -> CliResult<()> {
    let records = parse_star_records(&read(&a.input)?)?;
    let graphs = records
        .into_iter()
        .map(|r| r.into_graph())
        .collect::<graphcf::Result<Vec<_>>>()?;
    let ds = GraphDataset::new(a.name.clone(), graphs)?;
    let path = ctx.path(&format!("{}.json", file_stem(&a.name)));
    write(&path, serialize_dataset(&ds))?;
    println!("wrote {} ({} graphs)", path.display(), ds.len());
    Ok(())
}

pub fn synth(ctx: &Ctx, a: &SynthArgs) -> CliResult<()> {
    let corpus = graphcf::synth::generate(a.seed, a.templates)?;
    let dir = ctx.or_default(&a.dir, "synthetic");
    for (name, bytes) in corpus.files() {
        write(&dir.join(name), bytes)?;
    }
    println!("wrote {} graphs to {}", corpus.dataset.len(), dir.display());
    Ok(())
}
