use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::analytics::{
    default_fit_window, degree_moment_stats, empirical_degree_pmf, fingerprint_sparsity, fit_powerlaw_exponent,
    max_sparsity_psi,
};
use crate::attack::{Attack, AttackOptions, AttackResult, ChannelAssignment, QueryChannel, Strategy, VictimModel};
use crate::bigraph::{format_alpha, generate, load_edge_list, parse_alpha, save_edge_list, BigraphParams, BipartiteGraph};
use crate::bounds::{corollary1_bound, theorem2_bounds, BoundError, BoundInputs, DegreeMass};

use super::{io_at, run_sweep_to_dir, ExperimentConfig, HarnessError};

#[derive(Debug, Parser)]
#[command(name = "bigraph-privacy", version, about = "Bipartite graph generation and fingerprinting attack experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a graph and write it as an edge list.
    Generate {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        mu: u64,
        /// Power-law exponent, or `inf` for unit initial popularities.
        #[arg(long, value_parser = alpha_arg)]
        alpha: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Degree, moment and sparsity reports for one or more edge-list files.
    Analyze {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        /// Slack for the fingerprint-weight tail; half the admissible maximum by default.
        #[arg(long)]
        psi: Option<f64>,
        #[arg(long)]
        fit_min: Option<usize>,
        #[arg(long)]
        fit_max: Option<usize>,
        #[arg(long, default_value_t = 3)]
        max_order: usize,
        /// Write the pooled degree pmf as CSV.
        #[arg(long)]
        pmf_out: Option<PathBuf>,
    },
    /// Run one attack on an edge-list graph and print its trace.
    Attack {
        #[arg(long)]
        graph: PathBuf,
        /// BSC crossover probability of the query channel.
        #[arg(long, default_value_t = 0.05)]
        nq: f64,
        #[arg(long, default_value_t = 0.01)]
        epsilon: f64,
        #[arg(long, default_value = "aits", value_parser = strategy_arg)]
        strategy: Strategy,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// 1-based victim index; drawn uniformly when omitted.
        #[arg(long)]
        victim: Option<usize>,
        /// Write the trace to this file instead of stdout.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Run a Monte Carlo sweep and write CSV and plot data.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        /// `desk` or `full`, used when no config file is given.
        #[arg(long, default_value = "desk")]
        preset: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Evaluate the expected-query and error-probability bounds.
    Bounds {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        mu: u64,
        #[arg(long, value_parser = alpha_arg)]
        alpha: f64,
        #[arg(long)]
        nq: f64,
        #[arg(long)]
        epsilon: f64,
        #[arg(long, default_value_t = 1.0)]
        c_prime: f64,
        #[arg(long, default_value_t = 1.0)]
        c: f64,
        /// Victim entropy in nats; `ln m` (uniform victim) by default.
        #[arg(long)]
        entropy: Option<f64>,
        /// Use this graph's degree histogram and realized degrees.
        #[arg(long)]
        graph: Option<PathBuf>,
    },
}

fn alpha_arg(s: &str) -> Result<f64, String> {
    parse_alpha(s).ok_or_else(|| format!("`{s}` is not a number or `inf`"))
}

fn strategy_arg(s: &str) -> Result<Strategy, String> {
    s.parse()
}

/// Parses `argv` (including the program name), runs the command and returns
/// the exit code: 0 on success, 1 on usage errors, 2 on runtime errors.
pub fn cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let parsed = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match run(parsed.command, &mut out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = out.flush();
            eprintln!("error: {e}");
            2
        }
    }
}

fn load(path: &Path) -> Result<BipartiteGraph, HarnessError> {
    let file = File::open(path).map_err(io_at(path))?;
    load_edge_list(BufReader::new(file)).map_err(|e| match e {
        crate::bigraph::GraphError::Io(source) => HarnessError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => other.into(),
    })
}

fn stdout_err(e: io::Error) -> HarnessError {
    HarnessError::Io {
        path: PathBuf::from("<stdout>"),
        source: e,
    }
}

fn run<W: Write>(command: Command, out: &mut W) -> Result<(), HarnessError> {
    match command {
        Command::Generate {
            n,
            m,
            mu,
            alpha,
            seed,
            out: path,
        } => {
            let graph = generate(&BigraphParams::new(n, m, mu, alpha, seed)?)?;
            match path {
                Some(path) => {
                    let mut w = BufWriter::new(File::create(&path).map_err(io_at(&path))?);
                    save_edge_list(&graph, &mut w)
                        .and_then(|_| w.flush())
                        .map_err(io_at(&path))?;
                }
                None => save_edge_list(&graph, out).map_err(stdout_err)?,
            }
        }
        Command::Analyze {
            files,
            psi,
            fit_min,
            fit_max,
            max_order,
            pmf_out,
        } => {
            let graphs = files.iter().map(|f| load(f)).collect::<Result<Vec<_>, _>>()?;
            writeln!(out, "{}", analyze_report(&graphs, psi, fit_min, fit_max, max_order)?).map_err(stdout_err)?;
            if let Some(path) = pmf_out {
                let pmf = empirical_degree_pmf(&graphs)?;
                let mut w = BufWriter::new(File::create(&path).map_err(io_at(&path))?);
                pmf.write_csv(&mut w).and_then(|_| w.flush()).map_err(io_at(&path))?;
            }
        }
        Command::Attack {
            graph,
            nq,
            epsilon,
            strategy,
            seed,
            victim,
            trace,
        } => {
            let g = load(&graph)?;
            let channel = if nq == 0.0 {
                QueryChannel::noiseless()
            } else {
                QueryChannel::bsc(nq)?
            };
            let assignment = ChannelAssignment::uniform(g.m(), channel);
            let victims = VictimModel::uniform(g.m());
            let options = AttackOptions {
                record_trace: true,
                ..AttackOptions::default()
            };
            let attack = Attack::new(&g, &assignment, &victims, strategy, epsilon, options)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let outcome = match victim {
                Some(0) => {
                    return Err(crate::attack::AttackError::UserOutOfRange { user: 0, m: g.m() }.into());
                }
                Some(v) => attack.run_for_victim(v - 1, &mut rng)?,
                None => attack.run(&mut rng)?,
            };
            match &trace {
                Some(path) => {
                    let mut w = BufWriter::new(File::create(path).map_err(io_at(path))?);
                    outcome.write_trace(&mut w).and_then(|_| w.flush()).map_err(io_at(path))?;
                }
                None => outcome.write_trace(out).map_err(stdout_err)?,
            }
            let result = match outcome.result {
                AttackResult::Identified(u) => format!("identified {}", u + 1),
                AttackResult::Unresolved => "unresolved".to_string(),
            };
            let correct = outcome.correct().map_or("n/a".to_string(), |c| c.to_string());
            write!(
                out,
                "strategy={}\nvictim={}\nresult={}\nqueries={}\ncorrect={}\n",
                strategy,
                outcome.victim + 1,
                result,
                outcome.queries_used,
                correct
            )
            .map_err(stdout_err)?;
        }
        Command::Sweep {
            config,
            preset,
            out: out_dir,
            workers,
        } => {
            let mut cfg = match &config {
                Some(path) => ExperimentConfig::parse(&fs::read_to_string(path).map_err(io_at(path))?)?,
                None => ExperimentConfig::preset(&preset).ok_or_else(|| HarnessError::Config {
                    line: 0,
                    msg: format!("unknown preset `{preset}`"),
                })?,
            };
            if let Some(w) = workers {
                cfg.workers = Some(w);
            }
            if let Some(dir) = out_dir {
                cfg.out_dir = Some(dir);
            }
            let dir = cfg.out_dir.clone().ok_or_else(|| HarnessError::Config {
                line: 0,
                msg: "no output directory (use --out or `out =`)".into(),
            })?;
            let result = run_sweep_to_dir(&cfg, &dir)?;
            for p in &result.points {
                writeln!(
                    out,
                    "m={} alpha={} strategy={} mean_Q={:.2} ci95_Q={:.2} pe={:.3} epsilon={}",
                    p.m,
                    format_alpha(p.alpha),
                    p.strategy,
                    p.mean_q,
                    p.ci95_q,
                    p.pe,
                    p.epsilon
                )
                .map_err(stdout_err)?;
            }
            writeln!(out, "wrote {}", dir.display()).map_err(stdout_err)?;
        }
        Command::Bounds {
            m,
            n,
            mu,
            alpha,
            nq,
            epsilon,
            c_prime,
            c,
            entropy,
            graph,
        } => {
            let params = BigraphParams::new(n, m, mu, alpha, 0)?;
            let mut inputs = BoundInputs::bsc(params, nq, epsilon)?;
            inputs.c_prime = c_prime;
            inputs.c_thm1 = c;
            if let Some(h) = entropy {
                inputs.entropy_of_victim = h;
            }
            if let Some(path) = &graph {
                let g = load(path)?;
                if g.m() != m {
                    return Err(BoundError::InvalidInput(format!("graph has m = {}, expected {m}", g.m())).into());
                }
                inputs.degree_mass = DegreeMass::from_graph(&g);
                let mut ds = g.degrees();
                ds.sort_unstable();
                ds.dedup();
                inputs.i_max_degrees = Some(ds);
            }
            match theorem2_bounds(&inputs) {
                Ok(r) => write!(out, "{}", r.to_key_value()),
                Err(BoundError::Infeasible { psi, available }) => {
                    write!(out, "bound=theorem2\nq_bar_bound=INFEASIBLE\npsi={psi}\navailable={available}\n")
                }
                Err(e) => return Err(e.into()),
            }
            .map_err(stdout_err)?;
            writeln!(out).map_err(stdout_err)?;
            match corollary1_bound(&params, nq, epsilon, c, c_prime, inputs.entropy_of_victim) {
                Ok(r) => write!(out, "{}", r.to_key_value()),
                Err(BoundError::Infeasible { psi, .. }) => {
                    write!(out, "bound=corollary1\nq_bar_bound=INFEASIBLE\npsi={psi}\n")
                }
                Err(e) => return Err(e.into()),
            }
            .map_err(stdout_err)?;
        }
    }
    Ok(())
}

fn analyze_report(
    graphs: &[BipartiteGraph],
    psi: Option<f64>,
    fit_min: Option<usize>,
    fit_max: Option<usize>,
    max_order: usize,
) -> Result<String, HarnessError> {
    use std::fmt::Write as _;
    let pmf = empirical_degree_pmf(graphs)?;
    let p = *graphs[0].params();
    let sum_degrees: usize = graphs.iter().map(|g| g.degrees().iter().sum::<usize>()).sum();
    let max_degree = graphs.iter().flat_map(|g| g.degrees()).max().unwrap_or(0);
    let mut s = String::new();
    let _ = writeln!(
        s,
        "n={}\nm={}\nmu={}\nalpha={}\nfiles={}",
        p.n,
        p.m,
        p.mu,
        format_alpha(p.alpha),
        graphs.len()
    );
    let _ = writeln!(s, "sum_degrees={sum_degrees}\nmax_degree={max_degree}");
    let (lo, hi) = default_fit_window(p.n);
    let (lo, hi) = (fit_min.unwrap_or(lo), fit_max.unwrap_or(hi));
    match fit_powerlaw_exponent(&pmf, lo, hi) {
        Ok(a) => {
            let _ = writeln!(s, "powerlaw_fit_window={lo}..{hi}\npowerlaw_exponent={a}");
        }
        Err(e) => {
            let _ = writeln!(s, "powerlaw_fit_window={lo}..{hi}\npowerlaw_exponent=n/a ({e})");
        }
    }
    s.push_str(&degree_moment_stats(graphs, max_order)?.to_key_value());
    let upper = max_sparsity_psi(&p);
    if upper > 0.0 {
        let psi = psi.unwrap_or(upper / 2.0);
        for (i, g) in graphs.iter().enumerate() {
            let _ = writeln!(s, "# sparsity file {}", i + 1);
            s.push_str(&fingerprint_sparsity(g, psi)?.to_key_value());
        }
    }
    Ok(s)
}
