//! Stage orchestration: solve (through currents), embed (through training) and identify.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::json;

use crate::config::{ConfigEcho, RunConfig};
use crate::embed::{
    neighborhoods, simulate_walks, train_embedding, write_train_log, Embedding, NeighborProbabilities,
};
use crate::error::{Error, Result};
use crate::graph::{build_current_graph, transition_matrix, DirectedGraph, TransitionMatrix};
use crate::identify::{
    base_similarity, cluster_embeddings, identify_transition_states, propagate_similarity, Clustering,
    PropagatedSimilarity, TransitionStateReport,
};
use crate::markov::{stationary_distribution, Generator, StationaryDist};
use crate::models::Model;
use crate::tpt::{
    effective_current, probability_current, total_effective_current, transition_states_tpt, CommittorPair,
    CurrentField, NodeCurrent, ReactantProductSpec, TptTransitionStates,
};

/// Relative tolerance for treating the generator as reversible.
pub const REVERSIBILITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Solve,
    Embed,
    Identify,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Solve => "solve",
            Stage::Embed => "embed",
            Stage::Identify => "identify",
        }
    }
}

pub struct Solved {
    pub model: Model,
    pub gen: Generator,
    pub spec: ReactantProductSpec,
    pub pi: StationaryDist,
    pub committors: CommittorPair,
    pub reversible: bool,
    pub f_plus: CurrentField,
    pub c_plus: NodeCurrent,
    pub tpt: Vec<TptTransitionStates>,
    pub graph: DirectedGraph,
}

pub fn solve(cfg: &RunConfig) -> Result<Solved> {
    let model = cfg.build_model()?;
    let gen = model.generator()?;
    let spec = model.reactant_product(gen.space())?;
    let pi = stationary_distribution(&gen)?;
    let committors = CommittorPair::compute(&gen, &pi, &spec)?;
    let reversible = gen.satisfies_detailed_balance(pi.as_slice(), REVERSIBILITY_TOL);
    let f = probability_current(&pi, &committors.q_minus, &gen, &committors.q_plus)?;
    let f_plus = effective_current(&f)?;
    let c_plus = total_effective_current(&f_plus)?;
    let tpt = cfg
        .sigmas
        .iter()
        .map(|&s| transition_states_tpt(&c_plus, &committors.q_plus, &committors.q_minus, s, reversible, &f_plus))
        .collect::<Result<Vec<_>>>()?;
    let graph = build_current_graph(&f_plus)?;
    Ok(Solved { model, gen, spec, pi, committors, reversible, f_plus, c_plus, tpt, graph })
}

pub struct Embedded {
    pub transitions: TransitionMatrix,
    pub np: NeighborProbabilities,
    pub neighborhoods: Vec<Vec<usize>>,
    pub inputs: Vec<Vec<f64>>,
    pub embedding: Embedding,
}

pub fn embed(cfg: &RunConfig, solved: &Solved) -> Result<Embedded> {
    let transitions = transition_matrix(&solved.graph);
    let np = simulate_walks(&transitions, &cfg.walks)?;
    let nbhd = neighborhoods(&np, cfg.identify.tau)?;
    let space = solved.gen.space();
    let inputs: Vec<Vec<f64>> = (0..space.len()).map(|i| space.unit_coords(i)).collect();
    let embedding = train_embedding(&inputs, &np, &nbhd, solved.pi.as_slice(), &cfg.embed)?;
    Ok(Embedded { transitions, np, neighborhoods: nbhd, inputs, embedding })
}

pub struct Identified {
    pub similarity: PropagatedSimilarity,
    /// `Err` holds an empty-result condition, which is reported rather than fatal.
    pub report: std::result::Result<TransitionStateReport, String>,
    pub clustering: std::result::Result<Clustering, String>,
}

pub fn identify(cfg: &RunConfig, solved: &Solved, embedded: &Embedded) -> Result<Identified> {
    let sim = base_similarity(&embedded.embedding, &embedded.np);
    let sources: Vec<(usize, f64)> = solved.spec.reactant().iter().map(|&a| (a, solved.c_plus.c_plus[a])).collect();
    let similarity = propagate_similarity(&sim, &sources, cfg.identify.rounds, cfg.identify.rule)?;
    let report = match identify_transition_states(&similarity.values, &solved.graph, &solved.spec, cfg.identify.theta) {
        Ok(r) => Ok(r),
        Err(e @ Error::EmptyResult(_)) => Err(e.to_string()),
        Err(e) => return Err(e),
    };
    let clustering = match cluster_embeddings(
        &embedded.embedding.vectors,
        &similarity.values,
        cfg.identify.clusters,
        cfg.identify.restarts,
        cfg.seed,
    ) {
        Ok(c) => Ok(c),
        Err(e @ Error::InsufficientPoints { .. }) => Err(e.to_string()),
        Err(e) => return Err(e),
    };
    Ok(Identified { similarity, report, clustering })
}

/// Outcome of a run: written files and any reported (non-fatal) empty results.
#[derive(Debug, Clone, PartialEq)]
pub struct RunArtifacts {
    pub out_dir: PathBuf,
    pub files: Vec<String>,
    pub empty_results: Vec<String>,
}

#[derive(Serialize)]
struct Timing {
    stage: &'static str,
    seconds: f64,
}

struct Writer<'a> {
    dir: &'a Path,
    files: Vec<String>,
}

impl Writer<'_> {
    fn write(&mut self, name: &str, body: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
        let mut w = BufWriter::new(File::create(self.dir.join(name))?);
        body(&mut w)?;
        w.flush()?;
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
        Ok(())
    }
}

fn coord_header(n: usize) -> String {
    (1..=n).map(|k| format!(",coord_{k}")).collect()
}

fn coord_cells(x: &[f64]) -> String {
    x.iter().map(|v| format!(",{v:.16e}")).collect()
}

fn write_solve(w: &mut Writer, s: &Solved) -> Result<()> {
    let space = s.gen.space();
    let d = space.dim();
    w.write("pi.csv", |f| {
        writeln!(f, "id{},pi", coord_header(d))?;
        for i in 0..space.len() {
            writeln!(f, "{i}{},{:.16e}", coord_cells(&space.coords(i)), s.pi[i])?;
        }
        Ok(())
    })?;
    w.write("committors.csv", |f| {
        writeln!(f, "id,q_plus,q_minus")?;
        for i in 0..space.len() {
            writeln!(f, "{i},{:.16e},{:.16e}", s.committors.q_plus[i], s.committors.q_minus[i])?;
        }
        Ok(())
    })?;
    w.write("current.edges", |f| {
        for &(u, v, x) in s.f_plus.edges() {
            if x > 0.0 {
                writeln!(f, "{u} {v} {x:.16e}")?;
            }
        }
        Ok(())
    })?;
    w.write("graph.edges", |f| s.graph.write_edge_list(f))
}

fn write_embedding(w: &mut Writer, s: &Solved, e: &Embedded, sim: Option<&[f64]>) -> Result<()> {
    let space = s.gen.space();
    let m = e.embedding.dimension();
    let active = s.graph.active_nodes();
    w.write("embedding.csv", |f| {
        let comps: String = (1..=m).map(|k| format!(",e_{k}")).collect();
        writeln!(f, "id{}{comps}{}", coord_header(space.dim()), if sim.is_some() { ",similarity" } else { "" })?;
        for i in (0..space.len()).filter(|&i| active[i]) {
            write!(f, "{i}{}{}", coord_cells(&space.coords(i)), coord_cells(&e.embedding.vectors[i]))?;
            match sim {
                Some(v) => writeln!(f, ",{:.16e}", v[i])?,
                None => writeln!(f)?,
            }
        }
        Ok(())
    })
}

fn write_embed(w: &mut Writer, s: &Solved, e: &Embedded) -> Result<()> {
    w.write("np.triplets", |f| e.np.write_triplets(f))?;
    w.write("train_log.csv", |f| write_train_log(&e.embedding.log, f))?;
    write_embedding(w, s, e, None)
}

fn write_identify(w: &mut Writer, s: &Solved, e: &Embedded, r: &Identified) -> Result<()> {
    let space = s.gen.space();
    let d = space.dim();
    let sim = &r.similarity.values;
    w.write("sim_field.csv", |f| {
        writeln!(f, "id{},similarity", coord_header(d))?;
        for (i, v) in sim.iter().enumerate() {
            writeln!(f, "{i}{},{v:.16e}", coord_cells(&space.coords(i)))?;
        }
        Ok(())
    })?;
    w.write("transition_states.csv", |f| {
        writeln!(f, "id{},score", coord_header(d))?;
        if let Ok(rep) = &r.report {
            for &(i, v) in &rep.states {
                writeln!(f, "{i}{},{v:.16e}", coord_cells(&space.coords(i)))?;
            }
        }
        Ok(())
    })?;
    w.write("clusters.json", |f| {
        let clusters = r.clustering.as_ref().map(|c| c.clusters.clone()).unwrap_or_default();
        serde_json::to_writer_pretty(&mut *f, &clusters)?;
        writeln!(f)?;
        Ok(())
    })?;
    write_embedding(w, s, e, Some(sim))
}

fn tpt_json(s: &Solved) -> serde_json::Value {
    json!(s
        .tpt
        .iter()
        .map(|t| json!({ "sigma": t.sigma, "omega": t.omega, "objective": t.objective }))
        .collect::<Vec<_>>())
}

/// Runs every stage up to `last`, writing outputs into the configured directory. Stage
/// errors are returned wrapped with the stage name; the summary written beforehand marks
/// the failed stage.
pub fn run_pipeline(cfg: &RunConfig, last: Stage) -> Result<RunArtifacts> {
    let dir = cfg.out_dir.clone();
    std::fs::create_dir_all(&dir)?;
    let mut w = Writer { dir: &dir, files: Vec::new() };
    let mut timings = Vec::new();
    let mut summary = json!({
        "config": serde_json::to_value(ConfigEcho::from(cfg))?,
        "completed_stages": [],
        "failed_stage": null,
        "error": null,
    });
    let mut completed: Vec<&str> = Vec::new();
    let mut empty_results = Vec::new();

    let outcome = (|| -> std::result::Result<(), (Stage, Error)> {
        let t = Instant::now();
        let solved = solve(cfg).map_err(|e| (Stage::Solve, e))?;
        write_solve(&mut w, &solved).map_err(|e| (Stage::Solve, e))?;
        timings.push(Timing { stage: "solve", seconds: t.elapsed().as_secs_f64() });
        completed.push("solve");
        summary["solve"] = json!({
            "states": solved.gen.len(),
            "reactant": solved.spec.reactant(),
            "product": solved.spec.product(),
            "reversible": solved.reversible,
            "total_reactive_current": solved.spec.reactant().iter().map(|&a| solved.c_plus.c_plus[a]).sum::<f64>(),
            "graph_nodes": solved.graph.active_nodes().iter().filter(|&&a| a).count(),
            "graph_edges": solved.graph.num_edges(),
            "tpt_transition_states": tpt_json(&solved),
        });
        if last == Stage::Solve {
            return Ok(());
        }

        let t = Instant::now();
        let embedded = embed(cfg, &solved).map_err(|e| (Stage::Embed, e))?;
        write_embed(&mut w, &solved, &embedded).map_err(|e| (Stage::Embed, e))?;
        timings.push(Timing { stage: "embed", seconds: t.elapsed().as_secs_f64() });
        completed.push("embed");
        let log = &embedded.embedding.log;
        summary["embed"] = json!({
            "objective_initial": log.first(),
            "objective_final": log.last(),
            "iterations": log.len().saturating_sub(1),
            "parameters": embedded.embedding.encoder.num_params(),
        });
        if last == Stage::Embed {
            return Ok(());
        }

        let t = Instant::now();
        let identified = identify(cfg, &solved, &embedded).map_err(|e| (Stage::Identify, e))?;
        write_identify(&mut w, &solved, &embedded, &identified).map_err(|e| (Stage::Identify, e))?;
        timings.push(Timing { stage: "identify", seconds: t.elapsed().as_secs_f64() });
        completed.push("identify");
        summary["identify"] = json!({
            "propagation_rounds": identified.similarity.rounds,
            "nonzero_similarity": identified.similarity.values.iter().filter(|&&v| v > 0.0).count(),
            "transition_states": identified.report.as_ref().map(|r| r.states.len()).unwrap_or(0),
            "threshold": identified.report.as_ref().map(|r| r.threshold).ok(),
            "clusters": identified.clustering.as_ref().map(|c| c.clusters.len()).unwrap_or(0),
            "inertia": identified.clustering.as_ref().map(|c| c.inertia).ok(),
        });
        if let Err(e) = &identified.report {
            empty_results.push(e.clone());
        }
        if let Err(e) = &identified.clustering {
            empty_results.push(e.clone());
        }
        Ok(())
    })();

    summary["completed_stages"] = json!(completed);
    summary["empty_results"] = json!(empty_results);
    if let Err((stage, e)) = &outcome {
        summary["failed_stage"] = json!(stage.name());
        summary["error"] = json!(e.to_string());
    }
    let mut files = w.files.clone();
    files.push("summary.json".into());
    summary["files"] = json!(files);
    summary["timing"] = json!(timings);
    w.write("summary.json", |f| {
        serde_json::to_writer_pretty(&mut *f, &summary)?;
        writeln!(f)?;
        Ok(())
    })?;

    match outcome {
        Ok(()) => Ok(RunArtifacts { out_dir: dir, files, empty_results }),
        Err((stage, e)) => Err(Error::Stage { stage: stage.name(), source: Box::new(e) }),
    }
}
