use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use sinr_core::community::{load_partition, louvain_with_trace, save_partition};
use sinr_core::cooc::{build_cooc_graph, load_corpus, load_exceptions, save_vocab, CorpusConfig};
use sinr_core::eval::datasets::{
    load_categorization, load_graph_dataset, load_similarity, CategorizationFormat, GraphDataset, SimilarityFormat,
};
use sinr_core::eval::graph::{
    run_classification, run_link_prediction, run_regression, run_spectral_clustering, NodeTarget, ProtocolConfig,
};
use sinr_core::eval::word::{community_stability, concept_categorization, mean_varnn, word_similarity};
use sinr_core::eval::{EmbedderSpec, EvalReport};
use sinr_core::graph::save_edge_list;
use sinr_core::interpret::{
    read_key, sample_intrusion_tasks, score_annotations, shared_dimensions, strongest_dimensions, top_words,
    write_key, write_tasks,
};
use sinr_core::learn::gbdt::GbdtConfig;
use sinr_core::learn::logreg::LogRegConfig;
use sinr_core::learn::ClassifierSpec;
use sinr_core::{modularity, sinr_mf, sinr_nr, LabeledEmbedding, LouvainConfig, MfConfig, Partition};

use crate::args::*;

const LARGE_GRAPH: usize = 10_000;

fn stem(p: &Path) -> String {
    p.file_stem().map_or_else(|| "input".to_owned(), |s| s.to_string_lossy().into_owned())
}

fn out_dir(o: &OutputDir) -> PathBuf {
    o.out_dir
        .clone()
        .or_else(|| std::env::var_os("SINR_OUTPUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

fn write_report(report: &EvalReport, o: &OutputDir) -> Result<PathBuf> {
    let dir = out_dir(o);
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let gamma = report.gamma.map(|g| format!("-g{g}")).unwrap_or_default();
    let path = dir.join(format!("{}-{}-{}{gamma}.json", report.task, report.dataset, report.model));
    report.save(&path)?;
    println!("{}", report.summary());
    for n in &report.notes {
        println!("note: {n}");
    }
    println!("report: {}", path.display());
    Ok(path)
}

fn load_graph(input: &GraphInput, labels: Option<&Path>) -> Result<GraphDataset> {
    let d = load_graph_dataset(&stem(&input.graph), &input.graph, labels, input.weighted)
        .with_context(|| format!("loading graph {}", input.graph.display()))?;
    if d.graph.edge_count() == 0 {
        bail!("graph {} has no edges", input.graph.display());
    }
    Ok(d)
}

fn gamma(c: &CommunityArgs, n: usize) -> f64 {
    c.gamma.unwrap_or(if n < LARGE_GRAPH { 1.0 } else { 5.0 })
}

fn louvain_config(c: &CommunityArgs, n: usize) -> LouvainConfig {
    LouvainConfig::with_gamma(gamma(c, n)).seeded(c.seed)
}

fn mf_config(m: &MfArgs, seed: u64) -> MfConfig {
    MfConfig {
        epochs: m.epochs,
        learning_rate: m.lr,
        seed,
        init_scale: m.init_scale,
        max_nodes: m.max_nodes,
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

pub fn build_graph(a: &BuildGraph) -> Result<()> {
    let d = load_graph(&a.input, None)?;
    save_edge_list(&d.graph, &d.labels, &a.out)?;
    println!("{} nodes, {} edges -> {}", d.graph.node_count(), d.graph.edge_count(), a.out.display());
    Ok(())
}

pub fn build_cooc(a: &BuildCooc) -> Result<()> {
    let cfg = CorpusConfig {
        window_size: a.window,
        min_count: a.min_count,
        min_word_length: a.min_length,
        lowercase: !a.no_lowercase,
    };
    let corpus = load_corpus(&a.corpus).with_context(|| format!("reading corpus {}", a.corpus.display()))?;
    let exceptions = match &a.exceptions {
        Some(p) => load_exceptions(p)?,
        None => Vec::new(),
    };
    let (vocab, cg) = build_cooc_graph(&corpus, &cfg, &exceptions)?;
    save_edge_list(&cg.graph, &cg.labels, &a.out)?;
    if let Some(p) = &a.vocab_out {
        save_vocab(&vocab, p)?;
    }
    println!(
        "vocabulary {} words; graph {} nodes, {} edges -> {}",
        vocab.len(),
        cg.graph.node_count(),
        cg.graph.edge_count(),
        a.out.display()
    );
    Ok(())
}

pub fn louvain(a: &LouvainArgs) -> Result<()> {
    let d = load_graph(&a.input, None)?;
    let cfg = louvain_config(&a.community, d.graph.node_count());
    let out = louvain_with_trace(&d.graph, &cfg)?;
    save_partition(&out.partition, &d.labels, &a.out)?;
    println!(
        "{} communities, modularity {:.6} (gamma {}) -> {}",
        out.partition.community_count(),
        modularity(&d.graph, &out.partition, cfg.gamma)?,
        cfg.gamma,
        a.out.display()
    );
    Ok(())
}

fn partition_for(c: &EmbedCommon, d: &GraphDataset) -> Result<Partition> {
    match &c.partition {
        Some(p) => Ok(load_partition(p, &d.labels).with_context(|| format!("reading partition {}", p.display()))?),
        None => Ok(sinr_core::louvain(&d.graph, &louvain_config(&c.community, d.graph.node_count()))?),
    }
}

fn save_model(c: &EmbedCommon, model: &LabeledEmbedding) -> Result<()> {
    if c.binary {
        model.save_binary(&c.out)?;
    } else {
        model.save_text(&c.out)?;
    }
    println!(
        "{} rows, {} dimensions, {} nonzeros -> {}",
        model.embedding.rows(),
        model.embedding.cols(),
        model.embedding.nnz(),
        c.out.display()
    );
    Ok(())
}

pub fn embed_nr(a: &EmbedNr) -> Result<()> {
    let d = load_graph(&a.common.input, None)?;
    let p = partition_for(&a.common, &d)?;
    let e = sinr_nr(&d.graph, &p)?;
    save_model(&a.common, &LabeledEmbedding::new(e, d.labels)?)
}

pub fn embed_mf(a: &EmbedMf) -> Result<()> {
    let d = load_graph(&a.common.input, None)?;
    let p = partition_for(&a.common, &d)?;
    let out = sinr_mf(&d.graph, &p, &mf_config(&a.mf, a.common.community.seed))?;
    if let Some(path) = &a.loss_out {
        let mut w = create(path)?;
        for l in &out.loss_trace {
            writeln!(w, "{l}")?;
        }
        w.flush()?;
    }
    if let Some(l) = out.loss_trace.last() {
        println!("final loss {l:.6e}");
    }
    save_model(&a.common, &LabeledEmbedding::new(out.embedding, d.labels)?)
}

fn embedder(p: &Protocol, n: usize) -> EmbedderSpec {
    let g = gamma(&p.community, n);
    match p.embed {
        Embedder::Nr => EmbedderSpec::nr(g),
        Embedder::Mf => EmbedderSpec::mf(g, mf_config(&p.mf, p.community.seed)),
        Embedder::Heuristics => EmbedderSpec::Heuristics,
    }
}

fn protocol_config(p: &Protocol, test_fraction: f64, train_fraction: f64) -> ProtocolConfig {
    ProtocolConfig {
        runs: p.runs,
        seed: p.community.seed,
        test_fraction,
        train_fraction,
        classifier: match p.classifier {
            ClassifierKind::Gbdt => ClassifierSpec::Gbdt(GbdtConfig::default()),
            ClassifierKind::Logistic => ClassifierSpec::Logistic(LogRegConfig::default()),
        },
    }
}

fn require_embedding(p: &Protocol) -> Result<()> {
    if p.embed == Embedder::Heuristics {
        bail!("heuristics only apply to link prediction; use --embed nr or --embed mf");
    }
    Ok(())
}

pub fn eval(e: &Eval) -> Result<()> {
    match e {
        Eval::Linkpred(a) => {
            let p = &a.protocol;
            let d = load_graph(&p.input, None)?;
            let cfg = protocol_config(p, a.test_fraction, 0.8);
            let r = run_link_prediction(&d.graph, &embedder(p, d.graph.node_count()), &cfg)?.dataset(&d.name);
            write_report(&r, &p.output)?;
        }
        Eval::Degree(a) | Eval::Clustcoef(a) | Eval::Pagerank(a) => {
            let target = match e {
                Eval::Degree(_) => NodeTarget::Degree,
                Eval::Clustcoef(_) => NodeTarget::ClusteringCoefficient,
                _ => NodeTarget::PageRank,
            };
            let p = &a.protocol;
            require_embedding(p)?;
            let d = load_graph(&p.input, None)?;
            let cfg = protocol_config(p, 0.2, a.train_fraction);
            let r = run_regression(&d.graph, &embedder(p, d.graph.node_count()), target, &cfg)?.dataset(&d.name);
            write_report(&r, &p.output)?;
        }
        Eval::Spectral(a) | Eval::Classify(a) => {
            let p = &a.task.protocol;
            require_embedding(p)?;
            let d = load_graph(&p.input, Some(&a.labels))?;
            let classes = d.classes.as_deref().expect("labels were given");
            let cfg = protocol_config(p, 0.2, a.task.train_fraction);
            let spec = embedder(p, d.graph.node_count());
            let r = match e {
                Eval::Spectral(_) => run_spectral_clustering(&d.graph, &spec, classes, &cfg)?,
                _ => run_classification(&d.graph, &spec, classes, &cfg)?,
            };
            write_report(&r.dataset(&d.name), &p.output)?;
        }
        Eval::Similarity(a) => {
            let model = load_model(&a.model)?;
            let format = match a.format {
                SimilarityFormatArg::Tsv => SimilarityFormat::Tsv,
                SimilarityFormatArg::Men => SimilarityFormat::Men,
                SimilarityFormatArg::Ws353 => SimilarityFormat::Ws353,
                SimilarityFormatArg::Scws => SimilarityFormat::Scws,
            };
            let ds = load_similarity(&a.dataset, format)?;
            let s = word_similarity(&model, &ds)?;
            let r = EvalReport::new("similarity", "spearman", vec![s.spearman])
                .dataset(&stem(&a.dataset))
                .model(&stem(&a.model), None)
                .extra("coverage", vec![s.coverage])
                .extra("pairs_used", vec![s.pairs_used as f64]);
            write_report(&r, &a.output)?;
        }
        Eval::Categorize(a) => {
            let model = load_model(&a.model)?;
            let format = match a.format {
                CategorizationFormatArg::Tsv => CategorizationFormat::Tsv,
                CategorizationFormatArg::Bless => CategorizationFormat::Bless,
            };
            let ds = load_categorization(&a.dataset, format)?;
            let s = concept_categorization(&model, &ds, a.runs, a.seed)?;
            let r = EvalReport::new("categorize", "purity", vec![s.purity])
                .dataset(&stem(&a.dataset))
                .model(&stem(&a.model), None)
                .extra("kmeans_purity", vec![s.kmeans_purity])
                .extra("agglomerative_purity", vec![s.agglomerative_purity])
                .extra("coverage", vec![s.coverage])
                .config(&serde_json::json!({ "runs": a.runs, "seed": a.seed }));
            write_report(&r, &a.output)?;
        }
        Eval::Stability(a) => {
            let d = load_graph(&a.input, None)?;
            let cfg = louvain_config(&a.community, d.graph.node_count());
            let r = community_stability(&d.graph, &cfg, a.runs)?.dataset(&d.name);
            write_report(&r, &a.output)?;
        }
        Eval::Varnn(a) => {
            let models = a.models.iter().map(|p| load_model(p)).collect::<Result<Vec<_>>>()?;
            let curve = mean_varnn(&models, &a.grid, a.sample, a.seed)?;
            for (n, v) in &curve {
                println!("N={n}\t{v:.6}");
            }
            let names: Vec<String> = a.models.iter().map(|p| stem(p)).collect();
            let mut r = EvalReport::new("varnn", "mean_varnn", curve.iter().map(|c| c.1).collect())
                .dataset(&names.join("+"))
                .model("pairwise", None)
                .extra("n", curve.iter().map(|c| c.0 as f64).collect())
                .config(&serde_json::json!({ "sample": a.sample, "seed": a.seed }));
            r.note("values are per neighborhood size, listed in extra.n");
            write_report(&r, &a.output)?;
        }
    }
    Ok(())
}

fn load_model(path: &Path) -> Result<LabeledEmbedding> {
    LabeledEmbedding::load(path).with_context(|| format!("loading embedding {}", path.display()))
}

pub fn probe(p: &Probe) -> Result<()> {
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match p {
        Probe::TopWords { model, dim, k } => {
            let m = load_model(model)?;
            let d = top_words(&m, *dim, *k)?;
            for (i, (w, v)) in d.words.iter().enumerate() {
                writeln!(out, "{}\t{w}\t{v}", i + 1)?;
            }
            if d.short {
                eprintln!("dimension {dim} has only {} nonzero words", d.member_count);
            }
        }
        Probe::WordDims { model, word, k, describe } => {
            let m = load_model(model)?;
            let (dims, short) = strongest_dimensions(&m, word, *k, *describe)?;
            for d in &dims {
                writeln!(out, "{}\t{}\t{}", d.dim, d.value, d.descriptor.label())?;
            }
            if short {
                eprintln!("{word} has only {} nonzero dimensions", dims.len());
            }
        }
        Probe::SharedDims { model, words, describe, out: path, presence } => {
            let m = load_model(model)?;
            let refs: Vec<&str> = words.iter().map(String::as_str).collect();
            let s = shared_dimensions(&m, &refs, *describe)?;
            match path {
                Some(path) => {
                    let mut w = create(path)?;
                    s.write_grid(&mut w, *presence)?;
                    w.flush()?;
                    println!("{} shared dimensions -> {}", s.dims.len(), path.display());
                }
                None => s.write_grid(&mut out, *presence)?,
            }
        }
    }
    Ok(())
}

pub fn intrusion_gen(a: &IntrusionGen) -> Result<()> {
    let m = load_model(&a.model)?;
    let id = a.model_id.clone().unwrap_or_else(|| stem(&a.model));
    let tasks = sample_intrusion_tasks(&m, a.count, a.seed, &id)?;
    let mut w = create(&a.out)?;
    write_tasks(&tasks, &mut w)?;
    w.flush()?;
    let mut k = create(&a.key_out)?;
    write_key(&tasks, &mut k)?;
    k.flush()?;
    println!("{} tasks -> {} (key {})", tasks.len(), a.out.display(), a.key_out.display());
    Ok(())
}

pub fn intrusion_score(a: &IntrusionScore) -> Result<()> {
    let key = read_key(BufReader::new(
        File::open(&a.key).with_context(|| format!("opening {}", a.key.display()))?,
    ))?;
    let scores = score_annotations(
        BufReader::new(File::open(&a.annotations).with_context(|| format!("opening {}", a.annotations.display()))?),
        &key,
    )?;
    for (o, c) in &scores.counts {
        println!("{}\t{c}\t{:.4}", serde_json::to_value(o)?.as_str().unwrap_or_default(), scores.shares[o]);
    }
    match scores.fleiss_kappa {
        Some(k) => println!("fleiss_kappa\t{k:.4}"),
        None => println!("fleiss_kappa\tn/a"),
    }
    let dir = out_dir(&a.output);
    std::fs::create_dir_all(&dir)?;
    let path = dir.join(format!("intrusion-{}.json", stem(&a.annotations)));
    let mut w = create(&path)?;
    serde_json::to_writer_pretty(&mut w, &scores)?;
    writeln!(w)?;
    w.flush()?;
    println!("report: {}", path.display());
    Ok(())
}
