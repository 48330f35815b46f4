//! Command-line front end: build a combing, verify it against the group
//! oracle, analyze its spectral data, or run a counting experiment.
//!
//! Exit codes: 0 success, 1 validation failure, 2 configuration error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use loxolab::combing::{build_combing, verify_combing, Combing};
use loxolab::experiments::{run_experiment, ActionSpec, ExperimentConfig, Workbench};
use loxolab::graph::{classify_growth, count_spheres, CombingGraph};
use loxolab::group::PresentationGraph;
use loxolab::spectral::{
    build_markov, first_return_stats, growth_constant, perron_with,
};
use loxolab::{Error, Result};

#[derive(Parser)]
#[command(name = "loxolab", version, about = "Geodesic combings of graph products and counting experiments on tree actions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the recurrent combing automaton of a graph product.
    Build {
        #[arg(long)]
        presentation: PathBuf,
        /// Comma-separated vertex order override.
        #[arg(long, value_delimiter = ',')]
        order: Option<Vec<String>>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Verify a combing against the exact group oracle.
    Verify {
        #[arg(long)]
        combing: PathBuf,
        #[arg(long)]
        presentation: PathBuf,
        #[arg(long, default_value_t = 8)]
        nmax: usize,
        /// Cap on enumerated elements per sphere.
        #[arg(long, default_value_t = 10_000_000)]
        cap: u64,
    },
    /// Perron-Frobenius and Markov-chain report for a combing.
    Analyze {
        #[arg(long)]
        combing: PathBuf,
        #[arg(long, default_value_t = 100_000)]
        samples: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a counting experiment from a config file.
    Run {
        /// One of: exact-growth, drift, displacement, translation-genericity,
        /// markov-genericity, subgroup-density, gromov-products, shadow-decay,
        /// quasitightness.
        experiment: String,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        presentation: Option<PathBuf>,
        /// Path of an action spec JSON overriding the config's action.
        #[arg(long)]
        action: Option<PathBuf>,
        /// Restrict the experiment to a single n.
        #[arg(long)]
        nmax: Option<usize>,
        #[arg(long)]
        samples: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// csv | json
        #[arg(long)]
        format: Option<String>,
    },
}

fn load_presentation(path: &Path) -> Result<(PresentationGraph, Vec<String>)> {
    let text = std::fs::read_to_string(path)?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    PresentationGraph::from_json(&value)
}

fn load_combing(path: &Path) -> Result<Combing> {
    let text = std::fs::read_to_string(path)?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let graph = CombingGraph::from_json(&value)?;
    graph.require_valid()?;
    // The sidecar is informative; absence is fine.
    let meta_path = path.with_extension("meta.json");
    let (order, flags, construction, lambda_hint) = match std::fs::read_to_string(&meta_path) {
        Ok(meta) => {
            let v: serde_json::Value = serde_json::from_str(&meta)?;
            (
                v["order"]
                    .as_array()
                    .map(|a| a.iter().filter_map(|x| x.as_str().map(String::from)).collect())
                    .unwrap_or_default(),
                v["flags"]
                    .as_array()
                    .map(|a| a.iter().filter_map(|x| x.as_str().map(String::from)).collect())
                    .unwrap_or_default(),
                v["construction"].as_str().unwrap_or_default().to_string(),
                v["lambda_hint"].as_f64().unwrap_or(0.0),
            )
        }
        Err(_) => (Vec::new(), Vec::new(), String::new(), 0.0),
    };
    Ok(Combing { graph, kinds: Vec::new(), order, flags, construction, lambda_hint })
}

fn cmd_build(presentation: &Path, order: Option<Vec<String>>, out: &Path) -> Result<()> {
    let (pres, file_order) = load_presentation(presentation)?;
    let order = order.or({
        if file_order != pres.names() {
            Some(file_order)
        } else {
            None
        }
    });
    let combing = build_combing(&pres, order.as_deref())?;
    std::fs::write(out, serde_json::to_string_pretty(&combing.graph.to_json())? + "\n")?;
    let meta_path = out.with_extension("meta.json");
    std::fs::write(&meta_path, serde_json::to_string_pretty(&combing.meta_json())? + "\n")?;
    println!(
        "built combing: {} vertices, {} edges, lambda ~ {:.6}, flags {:?}",
        combing.graph.vertex_count(),
        combing.graph.edge_count(),
        combing.lambda_hint,
        combing.flags
    );
    println!("wrote {} and {}", out.display(), meta_path.display());
    Ok(())
}

fn cmd_verify(combing: &Path, presentation: &Path, nmax: usize, cap: u64) -> Result<()> {
    let combing = load_combing(combing)?;
    let (pres, _) = load_presentation(presentation)?;
    let report = verify_combing(&combing, &pres, nmax, cap)?;
    for (n, size) in report.sphere_sizes.iter().enumerate() {
        println!("n = {n}: sphere {size}, ev injective, image = oracle sphere, |ev| = n");
    }
    println!("verify PASS up to n = {}", report.n_max);
    Ok(())
}

fn cmd_analyze(combing: &Path, samples: u64, seed: u64, out: Option<&Path>) -> Result<()> {
    let combing = load_combing(combing)?;
    let graph = &combing.graph;
    let class = classify_growth(graph)?;
    let perron = perron_with(graph, &class)?;
    let chain = build_markov(graph, &perron, &class)?;
    let table = count_spheres(graph, 40)?;
    let gc = growth_constant(&table, &perron, 1..=40)?;
    let v = *class.sccs[class.maximal_scc_ids()[0]].first().expect("recurrent vertex");
    let returns = first_return_stats(&chain, graph, &class, v, samples, seed, 10_000)?;
    let report = serde_json::json!({
        "lambda": perron.lambda,
        "rho": perron.rho,
        "C_window": gc.window.iter().map(|(_, v)| *v).collect::<Vec<_>>(),
        "row_sum_max_dev": chain.row_sum_max_dev,
        "return_tail": { "slope": returns.tail_slope, "r2": returns.tail_r2 },
    });
    let text = serde_json::to_string_pretty(&report)? + "\n";
    match out {
        Some(path) => {
            std::fs::write(path, text)?;
            println!("wrote {}", path.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_run(
    experiment: &str,
    config: &Path,
    presentation: Option<PathBuf>,
    action: Option<PathBuf>,
    nmax: Option<usize>,
    samples: Option<u64>,
    seed: Option<u64>,
    epsilon: Option<f64>,
    out: Option<PathBuf>,
    format: Option<String>,
) -> Result<()> {
    let mut cfg = ExperimentConfig::from_file(config)?;
    if let Some(p) = presentation {
        cfg.presentation = Some(p);
    }
    if let Some(path) = action {
        let text = std::fs::read_to_string(&path)?;
        let spec: ActionSpec = serde_json::from_str(&text)?;
        cfg.action = Some(spec);
    }
    if let Some(n) = nmax {
        cfg.n_values = vec![n];
    }
    if let Some(s) = samples {
        cfg.samples = s;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(e) = epsilon {
        cfg.epsilon = Some(e);
    }
    if let Some(o) = out {
        cfg.out = Some(o);
    }
    if let Some(f) = format {
        cfg.format = Some(f);
    }

    let wb = Workbench::from_config(cfg)?;
    let report = run_experiment(experiment, &wb)?;
    let format = wb.cfg.format.clone().unwrap_or_else(|| "csv".into());
    let rendered = match format.as_str() {
        "csv" => report.to_csv(),
        "json" => serde_json::to_string_pretty(&report.to_json())? + "\n",
        other => return Err(Error::Config(format!("unknown format `{other}` (csv|json)"))),
    };
    match &wb.cfg.out {
        Some(path) => {
            std::fs::write(path, rendered)?;
            println!("wrote {}", path.display());
        }
        None => print!("{rendered}"),
    }
    Ok(())
}

/// 1 for validation failures, 2 for configuration problems.
fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Config(_)
        | Error::Io(_)
        | Error::Json(_)
        | Error::InvalidPresentation(_)
        | Error::Combing(_)
        | Error::CompleteGraph
        | Error::NotAnticonnected => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let threads = std::env::var("LOXOLAB_THREADS").ok().and_then(|v| v.parse::<usize>().ok());
    loxolab::par::configure_threads(threads);

    let cli = Cli::parse();
    let result = match cli.command {
        Command::Build { presentation, order, out } => cmd_build(&presentation, order, &out),
        Command::Verify { combing, presentation, nmax, cap } => {
            cmd_verify(&combing, &presentation, nmax, cap)
        }
        Command::Analyze { combing, samples, seed, out } => {
            cmd_analyze(&combing, samples, seed, out.as_deref())
        }
        Command::Run {
            experiment,
            config,
            presentation,
            action,
            nmax,
            samples,
            seed,
            epsilon,
            out,
            format,
        } => cmd_run(
            &experiment,
            &config,
            presentation,
            action,
            nmax,
            samples,
            seed,
            epsilon,
            out,
            format,
        ),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
