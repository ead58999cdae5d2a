use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context};
use ghl_core::dataio::{graph_from_neighbors, knn_neighbors, load_idx_pairs, make_split, median_kth_distance};
use ghl_core::diffusion::{accuracy, lp_solve};
use ghl_core::learner::{default_front, evaluate_checkpoint, incorporate_labels, FrontCheckpoint, TrainConfig};
use ghl_core::{
    integrate, load_dataset, predict_labels, save_dataset, BoundarySpec, ClampMode, Dataset, NodeSignal, SplitSpec,
};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::report::{Failure, Results, RunReport, SeedResult};
use crate::{
    AddLabelsArgs, BuildKnnArgs, DatasetArgs, EvaluateArgs, HorizonArgs, LpArgs, SolveArgs, SolverArgs, SplitArgs,
    TrainArgs,
};

const FORMATS: &str = "GHLEDGE1 GHLFEAT1 GHLLABL1 GHLCHKP1";

fn config_echo(parts: Value) -> Value {
    let mut v = parts;
    v["formats"] = json!(FORMATS);
    v["version"] = json!(env!("CARGO_PKG_VERSION"));
    v
}

fn load(args: &DatasetArgs) -> anyhow::Result<(Dataset, SplitSpec)> {
    let (mut ds, stored) =
        load_dataset(&args.dataset).with_context(|| format!("loading {}", args.dataset.display()))?;
    if args.normalize_features {
        ds.normalize_rows_l1();
    }
    let split = match (sampled_split(&ds.labels, ds.num_classes, &args.split)?, stored) {
        (Some(s), _) | (None, Some(s)) => s,
        (None, None) => bail!(
            "{} has no split.json; pass --train-per-class to sample one",
            args.dataset.display()
        ),
    };
    Ok((ds, split))
}

fn sampled_split(labels: &[usize], num_classes: usize, args: &SplitArgs) -> anyhow::Result<Option<SplitSpec>> {
    Ok(match args.train_per_class {
        Some(train) => Some(make_split(labels, num_classes, train, args.valid_per_class, args.split_seed)?),
        None => None,
    })
}

fn accuracies(f: &NodeSignal, ds: &Dataset, split: &SplitSpec) -> (f64, f64) {
    let pred = predict_labels(f);
    (
        accuracy(&pred, &ds.labels, &split.valid),
        accuracy(&pred, &ds.labels, &split.test),
    )
}

/// Default-front clamped solves at each candidate time; the best validation
/// accuracy wins, ties going to the earlier candidate.
fn default_sweep(
    ds: &Dataset,
    boundary: &BoundarySpec,
    split: &SplitSpec,
    horizon: &HorizonArgs,
    solver: &SolverArgs,
) -> anyhow::Result<(usize, Vec<(f64, f64, f64)>)> {
    let psi0 = default_front(boundary, ds.num_nodes(), ds.num_classes);
    let mut points = Vec::new();
    for t in horizon.candidates() {
        let f = integrate(&ds.graph, &psi0, boundary, ClampMode::Clamped, &solver.config(t))?;
        let (va, ta) = accuracies(&f, ds, split);
        points.push((t, va, ta));
    }
    let mut best = 0;
    for (i, p) in points.iter().enumerate() {
        if p.1 > points[best].1 {
            best = i;
        }
    }
    Ok((best, points))
}

fn sweep_json(points: &[(f64, f64, f64)]) -> Value {
    json!(points
        .iter()
        .map(|&(t, va, ta)| json!({"t": t, "valid_acc": va, "test_acc": ta}))
        .collect::<Vec<_>>())
}

pub fn solve(a: &SolveArgs) -> anyhow::Result<RunReport> {
    let start = Instant::now();
    let (ds, split) = load(&a.data)?;
    let boundary = ds.boundary(&split.train)?;
    let (best, points) = default_sweep(&ds, &boundary, &split, &a.horizon, &a.solver)?;
    let mut results = Results {
        valid_acc: Some(points[best].1),
        test_acc: Some(points[best].2),
        ..Results::default()
    };
    results.extra.insert("t_final".into(), json!(points[best].0));
    if a.horizon.sweep_t.is_some() {
        results.extra.insert("sweep".into(), sweep_json(&points));
    }
    Ok(RunReport {
        command: "solve".into(),
        dataset: ds.name.clone(),
        config: config_echo(json!({"data": a.data, "horizon": a.horizon, "solver": a.solver})),
        results,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

pub fn lp(a: &LpArgs) -> anyhow::Result<RunReport> {
    let start = Instant::now();
    let (ds, split) = load(&a.data)?;
    let boundary = ds.boundary(&split.train)?;
    let out = lp_solve(&ds.graph, &boundary, a.iters, a.tol)?;
    let (va, ta) = accuracies(&out.signal, &ds, &split);
    let mut results = Results {
        valid_acc: Some(va),
        test_acc: Some(ta),
        ..Results::default()
    };
    results.extra.insert("iterations".into(), json!(out.iterations));
    results.extra.insert("converged".into(), json!(out.converged));
    Ok(RunReport {
        command: "lp".into(),
        dataset: ds.name.clone(),
        config: config_echo(json!({"data": a.data, "iters": a.iters, "tol": a.tol.to_string()})),
        results,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

fn train_config(a: &TrainArgs, seed: u64, t_final: f64) -> TrainConfig {
    TrainConfig {
        optimizer: a.learn.optimizer_config(),
        l2_penalty: a.learn.l2,
        dropout: a.learn.dropout,
        epochs: a.learn.epochs,
        seed,
        t_final,
        front_transform: a.learn.transform(),
        hidden: a.learn.hidden.clone(),
        learn_weights: a.learn.learn_weights,
        train_steps: a.learn.train_steps,
        ..TrainConfig::default()
    }
}

/// Trains one seed at every candidate time and keeps the run with the best
/// validation accuracy (then lower validation loss, then earlier time).
fn train_seed(a: &TrainArgs, ds: &Dataset, split: &SplitSpec, seed: u64) -> ghl_core::Result<(SeedResult, FrontCheckpoint)> {
    let mut best: Option<(f64, f64, FrontCheckpoint, usize)> = None;
    for t in a.horizon.candidates() {
        let out = ghl_core::train(ds, split, &train_config(a, seed, t), &a.solver.config(t))?;
        let acc = out.checkpoint.val_accuracy;
        let loss = out.history[out.best_epoch].val_loss;
        let better = match &best {
            None => true,
            Some((ba, bl, _, _)) => acc > *ba || (acc == *ba && loss < *bl),
        };
        if better {
            best = Some((acc, loss, out.checkpoint, out.best_epoch));
        }
    }
    let (valid_acc, _, chk, best_epoch) = best.expect("at least one candidate time");
    let boundary = ds.boundary(&split.train)?;
    let f = evaluate_checkpoint(&chk, &ds.graph, &boundary, &a.solver.config(chk.t_final))?;
    let test_acc = accuracy(&predict_labels(&f), &ds.labels, &split.test);
    Ok((
        SeedResult {
            seed,
            t_final: chk.t_final,
            valid_acc,
            test_acc,
            best_epoch: Some(best_epoch),
        },
        chk,
    ))
}

pub fn train(a: &TrainArgs) -> anyhow::Result<RunReport> {
    let start = Instant::now();
    let (ds, split) = load(&a.data)?;
    let seeds: Vec<u64> = a.seeds.clone().unwrap_or_else(|| (0..a.num_seeds).collect());
    if seeds.is_empty() {
        bail!("no seeds to run");
    }
    let runs: Vec<_> = seeds.par_iter().map(|&s| (s, train_seed(a, &ds, &split, s))).collect();
    let mut results = Results::default();
    if let Some(dir) = &a.checkpoint_dir {
        std::fs::create_dir_all(dir)?;
    }
    for (seed, run) in runs {
        match run {
            Ok((res, chk)) => {
                if let Some(dir) = &a.checkpoint_dir {
                    chk.save(&dir.join(format!("seed-{seed}.chk")))?;
                }
                results.per_seed.push(res);
            }
            Err(e) => results.failures.push(Failure {
                seed,
                error: e.to_string(),
            }),
        }
    }
    results.summarize_seeds();
    if let [only] = results.per_seed.as_slice() {
        results.valid_acc = Some(only.valid_acc);
        results.test_acc = Some(only.test_acc);
    }
    Ok(RunReport {
        command: "train".into(),
        dataset: ds.name.clone(),
        config: config_echo(json!({
            "data": a.data,
            "horizon": a.horizon,
            "solver": a.solver,
            "learn": a.learn,
            "seeds": seeds,
        })),
        results,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

pub fn evaluate(a: &EvaluateArgs) -> anyhow::Result<RunReport> {
    let start = Instant::now();
    let (ds, split) = load(&a.data)?;
    let chk = FrontCheckpoint::load(&a.checkpoint)?;
    let boundary = ds.boundary(&split.train)?;
    let f = evaluate_checkpoint(&chk, &ds.graph, &boundary, &a.solver.config(chk.t_final))?;
    let (va, ta) = accuracies(&f, &ds, &split);
    let mut results = Results {
        valid_acc: Some(va),
        test_acc: Some(ta),
        ..Results::default()
    };
    results.extra.insert("t_final".into(), json!(chk.t_final));
    Ok(RunReport {
        command: "evaluate".into(),
        dataset: ds.name.clone(),
        config: config_echo(json!({"data": a.data, "checkpoint": a.checkpoint, "solver": a.solver})),
        results,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Reads `{"node": class, ...}`; an empty file means no labels.
fn read_label_file(path: &Path) -> anyhow::Result<Vec<(usize, usize)>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    let map: BTreeMap<String, usize> =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    map.into_iter()
        .map(|(k, c)| {
            k.parse::<usize>()
                .map(|u| (u, c))
                .with_context(|| format!("node id {k:?} in {}", path.display()))
        })
        .collect()
}

pub fn add_labels(a: &AddLabelsArgs) -> anyhow::Result<RunReport> {
    let start = Instant::now();
    let (ds, split) = load(&a.data)?;
    let new_labels: Vec<(usize, usize)> = if a.labels_from == "valid" {
        split.valid.iter().map(|&u| (u, ds.labels[u])).collect()
    } else {
        read_label_file(Path::new(&a.labels_from))?
    };
    let boundary = ds.boundary(&split.train)?;
    let extended = boundary.extended(new_labels.iter().copied())?;
    let eval_nodes: Vec<usize> = split.test.iter().copied().filter(|&u| !extended.contains(u)).collect();
    let test_acc = |f: &NodeSignal| accuracy(&predict_labels(f), &ds.labels, &eval_nodes);

    let mut results = Results::default();
    results.extra.insert("num_new_labels".into(), json!(new_labels.len()));
    if let Some(path) = &a.checkpoint {
        let chk = FrontCheckpoint::load(path)?;
        let cfg = a.solver.config(chk.t_final);
        let before = evaluate_checkpoint(&chk, &ds.graph, &boundary, &cfg)?;
        let after = incorporate_labels(&chk, &ds.graph, &boundary, &new_labels, &cfg)?;
        results.test_acc = Some(test_acc(&after));
        results.extra.insert("checkpoint_test_acc".into(), json!(test_acc(&before)));
        results.extra.insert("t_final".into(), json!(chk.t_final));
    }
    if a.checkpoint.is_none() || !a.no_compare {
        let (best, points) = default_sweep(&ds, &boundary, &split, &a.horizon, &a.solver)?;
        let t = points[best].0;
        let psi0 = default_front(&extended, ds.num_nodes(), ds.num_classes);
        let f = integrate(&ds.graph, &psi0, &extended, ClampMode::Clamped, &a.solver.config(t))?;
        results.extra.insert("default_test_acc".into(), json!(test_acc(&f)));
        results.extra.insert("default_t_final".into(), json!(t));
        if a.checkpoint.is_none() {
            results.test_acc = Some(test_acc(&f));
        }
    }
    Ok(RunReport {
        command: "add-labels".into(),
        dataset: ds.name.clone(),
        config: config_echo(json!({
            "data": a.data,
            "checkpoint": a.checkpoint,
            "labels_from": a.labels_from,
            "compare_default": a.checkpoint.is_none() || !a.no_compare,
            "horizon": a.horizon,
            "solver": a.solver,
        })),
        results,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

pub fn build_knn(a: &BuildKnnArgs) -> anyhow::Result<RunReport> {
    let start = Instant::now();
    let (features, labels, source) = match &a.from {
        Some(dir) => {
            let (ds, _) = load_dataset(dir)?;
            (ds.features, ds.labels, ds.name)
        }
        None => {
            if a.idx.is_empty() {
                bail!("pass --idx IMAGES LABELS (repeatable) or --from DIR");
            }
            let pairs: Vec<_> = a.idx.chunks(2).map(|p| (p[0].clone(), p[1].clone())).collect();
            let (x, y) = load_idx_pairs(&pairs)?;
            (x, y, "idx".to_string())
        }
    };
    let neighbors = knn_neighbors(features.view(), a.k)?;
    let sigma = a.sigma.unwrap_or_else(|| median_kth_distance(&neighbors));
    let graph = graph_from_neighbors(&neighbors, sigma)?;
    let num_classes = labels.iter().max().map_or(0, |&m| m + 1);
    let name = a.name.clone().unwrap_or_else(|| {
        a.output
            .file_name()
            .map_or_else(|| "knn".to_string(), |s| s.to_string_lossy().into_owned())
    });
    let ds = Dataset::new(name, graph, features, labels, num_classes)?;
    let split = sampled_split(&ds.labels, ds.num_classes, &a.split)?;
    save_dataset(&a.output, &ds, split.as_ref())?;

    let mut results = Results::default();
    results.extra.insert("num_nodes".into(), json!(ds.num_nodes()));
    results
        .extra
        .insert("num_undirected_edges".into(), json!(ds.graph.num_undirected_edges()));
    results.extra.insert("sigma".into(), json!(sigma));
    results.extra.insert("source".into(), json!(source));
    Ok(RunReport {
        command: "build-knn".into(),
        dataset: ds.name.clone(),
        config: config_echo(json!({
            "idx": a.idx,
            "from": a.from,
            "k": a.k,
            "sigma": a.sigma,
            "output": a.output,
            "split": a.split,
        })),
        results,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}
