use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use anyhow::{Context, Result};
use fedbandit::env::LossTensor;
use fedbandit::gossip::GossipMatrix;
use fedbandit::graph::{make_complete, make_grid, make_rgg, Graph};
use fedbandit::movielens::{build_loss_tensor, parse_ratings, IngestReport, GENRES};
use fedbandit::report::{emit_plot, regret_rows, write_regret_csv, RegretRow, Series};
use fedbandit::sim::{
    aggregate, run_seed, Aggregate, Algorithm, EnvSeed, EnvironmentSpec, SimConfig,
};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::config::{Config, ConfigError, EnvironmentKind, Experiment, NetworkKind};

struct NamedNetwork {
    name: String,
    graph: Graph,
    gossip: GossipMatrix,
}

struct MovielensData {
    report: IngestReport,
    qualifying: usize,
    tensor: Arc<fedbandit::movielens::BlockLosses>,
}

/// Final regret of one (network, algorithm) pair.
pub struct Outcome {
    pub label: String,
    pub final_mean: f64,
    pub final_sd: f64,
}

/// Runs the experiment and writes every artifact under `out`.
pub fn execute(cfg: &Config, out: &Path) -> Result<Vec<Outcome>> {
    let sim = &cfg.simulation;
    let movielens = match cfg.experiment {
        Experiment::Movielens => Some(load_movielens(cfg)?),
        _ => None,
    };
    let networks = match &movielens {
        Some(m) => vec![with_gossip(
            "complete",
            make_complete(m.tensor.agent_count())?,
            None,
        )?],
        None => networks(cfg)?,
    };
    let (arms, horizon) = match &movielens {
        Some(m) => (m.tensor.arm_count(), m.tensor.horizon()),
        None => (sim.arms, sim.horizon),
    };
    let environment = match (&movielens, cfg.environment.kind) {
        (Some(m), _) => EnvironmentSpec::Tensor(m.tensor.clone() as Arc<dyn LossTensor>),
        (None, EnvironmentKind::Constant) => EnvironmentSpec::Constant {
            value: cfg.environment.value,
        },
        (None, EnvironmentKind::ActivatedBernoulli) => EnvironmentSpec::ActivatedBernoulli {
            seed: cfg.environment.seed.map_or(EnvSeed::PerRun, EnvSeed::Fixed),
        },
    };

    if matches!(environment, EnvironmentSpec::ActivatedBernoulli { .. }) {
        if let Some(net) = networks
            .iter()
            .find(|n| !n.graph.node_count().is_multiple_of(2))
        {
            let field = format!("{}.nodes", network_field(cfg));
            let msg = format!(
                "the activated Bernoulli environment needs an even agent count, {} has {}",
                net.name,
                net.graph.node_count()
            );
            return Err(ConfigError::new(field, msg).into());
        }
    }

    // build and validate every job before spending time on any of them
    let mut jobs = Vec::new();
    for net in &networks {
        for &alg in &sim.algorithms {
            let mut sc =
                SimConfig::new(net.graph.clone(), environment.clone(), alg, arms, horizon)?;
            sc.gossip = net.gossip.clone();
            sc.runs = sim.runs;
            sc.seed = sim.seed;
            sc.schedule = cfg.schedule;
            sc.gucb_alpha = sim.gucb_alpha;
            sc.regret_mode = sim.regret_mode;
            sc.execution = sim.execution;
            sc.validate()
                .map_err(|e| ConfigError::new(network_field(cfg), e.to_string()))?;
            jobs.push((net, sc));
        }
    }

    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut rows: Vec<RegretRow> = Vec::new();
    let mut series = Vec::new();
    let mut outcomes = Vec::new();
    let mut net_meta: Vec<Value> = networks.iter().map(network_meta).collect::<Result<_>>()?;
    let mut sweep = Vec::new();
    for (net, sc) in &jobs {
        let label = match cfg.experiment {
            Experiment::SigmaSweep => format!("{}@{}", sc.algorithm, net.name),
            _ if networks.len() > 1 => format!("{}@{}", sc.algorithm, net.name),
            _ => sc.algorithm.to_string(),
        };
        eprintln!(
            "running {label}: N = {}, K = {arms}, T = {horizon}, {} runs",
            sc.agent_count(),
            sc.runs
        );
        let agg = aggregate(sc).with_context(|| format!("simulating {label}"))?;
        rows.extend(regret_rows(&label, &agg));
        series.push(Series::new(
            label.clone(),
            (1..=horizon).map(|t| (t as f64, agg.mean[t])).collect(),
        ));
        let idx = networks
            .iter()
            .position(|n| std::ptr::eq(n, *net))
            .unwrap_or(0);
        net_meta[idx]["algorithms"]
            .as_array_mut()
            .expect("algorithms array")
            .push(algorithm_meta(sc, &agg)?);
        if cfg.experiment == Experiment::SigmaSweep {
            let s2 = net.gossip.second_singular_value();
            sweep.push((
                net.name.clone(),
                sc.algorithm,
                s2,
                (1.0 - s2).powf(-1.0 / 3.0),
                agg.final_mean(),
                agg.final_sd(),
            ));
        }
        outcomes.push(Outcome {
            label,
            final_mean: agg.final_mean(),
            final_sd: agg.final_sd(),
        });
    }

    write_regret_csv(create(out, "regret.csv")?, &rows)?;
    if cfg.plot {
        let title = match cfg.experiment {
            Experiment::Synthetic => "average regret",
            Experiment::SigmaSweep => "average regret by network",
            Experiment::Movielens => "average regret, movielens",
        };
        if let Some(svg) = emit_plot(&series, title, "round", "average regret") {
            fs::write(out.join("regret.svg"), svg).context("writing regret.svg")?;
        }
    }
    if !sweep.is_empty() {
        let mut w = csv_writer(out, "sweep.csv")?;
        w.write_record([
            "network",
            "algorithm",
            "sigma2",
            "inv_gap_cbrt",
            "final_mean",
            "final_sd",
        ])?;
        for (name, alg, s2, inv, m, sd) in &sweep {
            w.write_record([
                name.clone(),
                alg.to_string(),
                fmt(*s2),
                fmt(*inv),
                fmt(*m),
                fmt(*sd),
            ])?;
        }
        w.flush()?;
    }
    if let Some(m) = &movielens {
        let mut f = create(out, "genre_summary.csv")?;
        m.tensor.write_genre_summary(&mut f)?;
        f.flush()?;
    }

    let run_seeds: Vec<u64> = (0..sim.runs).map(|r| run_seed(sim.seed, r)).collect();
    let env_seeds: Vec<Option<u64>> = jobs
        .first()
        .map(|(_, sc)| run_seeds.iter().map(|&s| sc.environment_seed(s)).collect())
        .unwrap_or_default();
    let mut meta = json!({
        "experiment": format!("{:?}", cfg.experiment).to_lowercase(),
        "master_seed": sim.seed,
        "runs": sim.runs,
        "run_seeds": run_seeds,
        "environment_seeds": env_seeds,
        "arms": arms,
        "horizon": horizon,
        "regret_mode": sim.regret_mode,
        "execution": sim.execution,
        "threads": if sim.execution.is_parallel() { rayon::current_num_threads() } else { 1 },
        "schedule_options": cfg.schedule,
        "networks": net_meta,
    });
    if let Some(m) = &movielens {
        meta["movielens"] = json!({
            "ratings_read": m.report.ratings_read,
            "unknown_movie_ratings": m.report.unknown_movie_ratings,
            "users_seen": m.report.users_seen,
            "users_dropped": m.report.users_dropped,
            "qualifying_users": m.qualifying,
            "cohort_size": m.tensor.agent_count(),
            "genres": GENRES,
        });
    }
    let mut f = create(out, "metadata.json")?;
    serde_json::to_writer_pretty(&mut f, &meta)?;
    writeln!(f)?;
    f.flush()?;
    Ok(outcomes)
}

fn network_field(cfg: &Config) -> &'static str {
    match cfg.experiment {
        Experiment::Synthetic => "network",
        Experiment::SigmaSweep => "sweep",
        Experiment::Movielens => "movielens",
    }
}

fn fmt(x: f64) -> String {
    fedbandit::report::fmt_f64(x)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    Ok(BufWriter::new(
        File::create(&path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn csv_writer(dir: &Path, name: &str) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(create(dir, name)?))
}

fn with_gossip(name: &str, graph: Graph, matrix: Option<&Path>) -> Result<NamedNetwork> {
    let gossip = match matrix {
        None => GossipMatrix::max_degree(&graph)?,
        Some(p) => {
            let f = File::open(p).with_context(|| format!("opening {}", p.display()))?;
            GossipMatrix::read_dense(BufReader::new(f), &graph)
                .map_err(|e| ConfigError::new("network.gossip_matrix", e.to_string()))?
        }
    };
    Ok(NamedNetwork {
        name: name.to_string(),
        graph,
        gossip,
    })
}

fn rgg(nodes: usize, radius: f64, seed: u64, field: &str) -> Result<Graph> {
    make_rgg(nodes, radius, &mut ChaCha8Rng::seed_from_u64(seed))
        .map_err(|e| ConfigError::new(field, format!("radius {radius}: {e}")).into())
}

fn networks(cfg: &Config) -> Result<Vec<NamedNetwork>> {
    let side = |n: usize| (n as f64).sqrt().round() as usize;
    if cfg.experiment == Experiment::SigmaSweep {
        let sw = &cfg.sweep;
        let mut nets = vec![
            with_gossip("complete", make_complete(sw.nodes)?, None)?,
            with_gossip("grid", make_grid(side(sw.nodes))?, None)?,
        ];
        for &r in &sw.radii {
            nets.push(with_gossip(
                &format!("rgg-{r}"),
                rgg(sw.nodes, r, sw.graph_seed, "sweep.radii")?,
                None,
            )?);
        }
        return Ok(nets);
    }
    let net = &cfg.network;
    let (name, graph) = match net.kind {
        NetworkKind::Complete => ("complete".to_string(), make_complete(net.nodes)?),
        NetworkKind::Grid => ("grid".to_string(), make_grid(side(net.nodes))?),
        NetworkKind::Rgg => (
            format!("rgg-{}", net.radius),
            rgg(net.nodes, net.radius, net.graph_seed, "network.radius")?,
        ),
        NetworkKind::File => {
            let p = net.edge_list.as_deref().expect("checked");
            let f = File::open(p).with_context(|| format!("opening {}", p.display()))?;
            let g = Graph::read_edge_list(BufReader::new(f))
                .map_err(|e| ConfigError::new("network.edge_list", e.to_string()))?;
            ("file".to_string(), g)
        }
    };
    Ok(vec![with_gossip(
        &name,
        graph,
        net.gossip_matrix.as_deref(),
    )?])
}

fn load_movielens(cfg: &Config) -> Result<MovielensData> {
    let dir = cfg.movielens_dir()?;
    let open = |name: &str| {
        let p = dir.join(name);
        File::open(&p)
            .map(BufReader::new)
            .with_context(|| format!("opening {}", p.display()))
    };
    let (mut seqs, report) =
        parse_ratings(open("ratings.csv")?, open("movies.csv")?).context("reading ratings")?;
    let qualifying = seqs.agent_count();
    if let Some(n) = cfg.movielens.agents {
        seqs = seqs.select_agents(n);
    }
    if let Some(m) = cfg.movielens.max_ratings {
        seqs = seqs.truncate(m);
    }
    if seqs.agent_count() < 2 {
        return Err(ConfigError::new(
            "movielens.agents",
            format!("cohort has {} user(s), need 2", seqs.agent_count()),
        )
        .into());
    }
    let horizon = match cfg.movielens.horizon {
        Some(h) => h,
        None => seqs.default_horizon()?,
    };
    let tensor = build_loss_tensor(&seqs, horizon)
        .map_err(|e| ConfigError::new("movielens.horizon", e.to_string()))?;
    Ok(MovielensData {
        report,
        qualifying,
        tensor: Arc::new(tensor),
    })
}

fn network_meta(net: &NamedNetwork) -> Result<Value> {
    let spec = net.graph.spectral_summary()?;
    Ok(json!({
        "name": net.name,
        "nodes": net.graph.node_count(),
        "edges": net.graph.edge_count(),
        "sigma2": net.gossip.second_singular_value(),
        "laplacian_largest": spec.largest(),
        "algebraic_connectivity": spec.algebraic_connectivity,
        "d_max": spec.d_max,
        "d_min": spec.d_min,
        "algorithms": [],
    }))
}

fn algorithm_meta(sc: &SimConfig, agg: &Aggregate) -> Result<Value> {
    let mut v = json!({
        "algorithm": sc.algorithm,
        "final_mean": agg.final_mean(),
        "final_sd": agg.final_sd(),
    });
    match sc.schedule_for()? {
        Some(s) => {
            v["schedule"] = json!({
                "c_w": s.c_w,
                "gamma_coef": s.gamma_coef,
                "gamma_cap": s.gamma_cap,
                "gamma_first": s.gamma(1),
                "gamma_last": s.gamma(s.horizon),
                "gamma_last_unclamped": s.gamma_raw(s.horizon),
                "eta": s.eta,
                "first_unclamped_round": s.first_unclamped_round(),
            });
        }
        None if sc.algorithm == Algorithm::Gucb => v["gucb_alpha"] = json!(sc.gucb_alpha),
        None => {}
    }
    Ok(v)
}
