use bigraph_privacy::attack::{
    run_attack, AttackResult, ChannelAssignment, QueryChannel, Strategy, VictimModel,
};
use bigraph_privacy::bigraph::generate;
use bigraph_privacy::harness::{
    export_csv, export_plot_data, graph_seed, grid_params, point_graphs, run_sweep, run_sweep_to_dir, trial_seed,
    tune_point, ExperimentConfig, SweepPoint, SweepResult, CSV_HEADER,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn small() -> ExperimentConfig {
    ExperimentConfig {
        m_values: vec![40, 60],
        alphas: vec![3.0, 10.0],
        mu: 5,
        beta: 0.2,
        nq: 0.05,
        epsilon: 0.05,
        graphs: 2,
        victims: 10,
        base_seed: 7,
        timing: false,
        ..ExperimentConfig::desk()
    }
}

fn csv(result: &SweepResult) -> String {
    let mut buf = Vec::new();
    export_csv(result, &mut buf).unwrap();
    String::from_utf8(buf).unwrap()
}

#[test]
fn five_graphs_of_a_hundred_victims_give_500_trials() {
    let cfg = ExperimentConfig {
        m_values: vec![30],
        alphas: vec![3.0],
        strategies: vec![Strategy::Aits],
        graphs: 5,
        victims: 100,
        ..small()
    };
    let r = run_sweep(&cfg).unwrap();
    let p = &r.points[0];
    assert_eq!(p.trials, 500);
    assert_eq!(p.records.len(), 500);
    assert_eq!(p.errors + p.correct + p.unresolved, p.trials);
    assert!((p.pe - (p.errors + p.unresolved) as f64 / 500.0).abs() < 1e-15);
    for g in 0..5 {
        assert_eq!(p.records.iter().filter(|t| t.graph == g).count(), 100);
    }
}

#[test]
fn reruns_are_byte_identical_for_any_worker_count() {
    let mut cfg = small();
    cfg.workers = Some(1);
    let a = run_sweep(&cfg).unwrap();
    cfg.workers = Some(3);
    let b = run_sweep(&cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(csv(&a), csv(&b));

    // With timing on, only the seconds column may differ.
    cfg.timing = true;
    let c = run_sweep(&cfg).unwrap();
    let strip = |text: &str| -> Vec<String> {
        text.lines()
            .map(|l| l.rsplit_once(',').unwrap().0.to_string())
            .collect()
    };
    assert_eq!(strip(&csv(&a)), strip(&csv(&c)));
}

#[test]
fn single_trial_passes_through_the_attack() {
    let cfg = ExperimentConfig {
        m_values: vec![20],
        alphas: vec![3.0],
        strategies: vec![Strategy::Its],
        nq: 0.0,
        graphs: 1,
        victims: 1,
        ..small()
    };
    let r = run_sweep(&cfg).unwrap();
    let rec = &r.points[0].records[0];

    let params = grid_params(&cfg, 20, 3.0).unwrap().with_seed(graph_seed(7, 20, 3.0, 0));
    let g = generate(&params).unwrap();
    let a = ChannelAssignment::uniform(20, QueryChannel::noiseless());
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(7, 20, 3.0, Strategy::Its, 0, 0));
    let out = run_attack(&g, &a, &VictimModel::uniform(20), Strategy::Its, cfg.epsilon, &mut rng).unwrap();
    assert_eq!(rec.victim, out.victim);
    assert_eq!(rec.queries, out.queries_used);
    assert_eq!(rec.result, out.result);
    assert_eq!(point_graphs(&cfg, 20, 3.0).unwrap()[0], g);
}

#[test]
fn csv_round_trips_and_rows_are_sane() {
    let cfg = small();
    let r = run_sweep(&cfg).unwrap();
    let text = csv(&r);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), CSV_HEADER);
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 2 * 2 * 2);
    for (row, p) in rows.iter().zip(&r.points) {
        assert_eq!(row.len(), 15);
        assert_eq!(row[0].parse::<usize>().unwrap(), p.m);
        assert_eq!(row[1].parse::<f64>().unwrap(), p.alpha);
        assert_eq!(row[2], p.strategy.name());
        assert_eq!(row[3].parse::<usize>().unwrap(), p.n);
        assert_eq!(row[4].parse::<u64>().unwrap(), p.mu);
        assert_eq!(row[5].parse::<f64>().unwrap(), p.beta);
        assert_eq!(row[6].parse::<f64>().unwrap(), p.nq);
        assert_eq!(row[7].parse::<f64>().unwrap(), p.epsilon);
        assert_eq!(row[8].parse::<usize>().unwrap(), p.trials);
        assert_eq!(row[9].parse::<f64>().unwrap(), p.mean_q);
        assert_eq!(row[10].parse::<f64>().unwrap(), p.ci95_q);
        assert_eq!(row[11].parse::<f64>().unwrap(), p.pe);
        assert_eq!(row[12].parse::<usize>().unwrap(), p.errors);
        assert_eq!(row[13].parse::<usize>().unwrap(), p.unresolved);
        assert_eq!(row[14].parse::<f64>().unwrap(), p.seconds);
        assert!(p.mean_q >= 1.0 && p.mean_q <= p.n as f64);
        assert!(p.ci95_q >= 0.0);
        assert!((0.0..=1.0).contains(&p.pe));
    }
}

#[test]
fn unresolved_trials_cost_n_queries() {
    let cfg = ExperimentConfig {
        m_values: vec![30],
        alphas: vec![3.0],
        nq: 0.5,
        ..small()
    };
    let r = run_sweep(&cfg).unwrap();
    for p in &r.points {
        assert_eq!(p.unresolved, p.trials);
        assert_eq!(p.pe, 1.0);
        assert_eq!(p.mean_q, p.n as f64);
        assert!(p.records.iter().all(|t| t.result == AttackResult::Unresolved));
    }
}

fn fake_point(m: usize, alpha: f64, strategy: Strategy) -> SweepPoint {
    SweepPoint {
        m,
        alpha,
        strategy,
        n: m * 10,
        mu: 100,
        beta: 0.1,
        nq: 0.05,
        epsilon: 0.01,
        trials: 1,
        mean_q: m as f64 / 100.0,
        ci95_q: 0.0,
        pe: 0.0,
        errors: 0,
        correct: 1,
        unresolved: 0,
        seconds: 0.0,
        records: Vec::new(),
    }
}

#[test]
fn full_grid_plot_data_has_six_series() {
    let full = ExperimentConfig::full();
    let mut result = SweepResult::default();
    for &m in &full.m_values {
        for &a in &full.alphas {
            for &s in &full.strategies {
                result.points.push(fake_point(m, a, s));
            }
        }
    }
    let mut buf = Vec::new();
    export_plot_data(&result, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let headers: Vec<&str> = text.lines().filter(|l| l.starts_with("# series")).collect();
    assert_eq!(headers.len(), 6);
    assert_eq!(headers[0], "# series m=1000,2000,4000,6000,8000,10000 alpha=3 strategy=its");
    let blocks: Vec<&str> = text.split("\n\n").collect();
    assert_eq!(blocks.len(), 6);
    for block in blocks {
        assert_eq!(block.trim_end().lines().count(), 7);
    }
}

#[test]
fn tuning_picks_the_largest_passing_epsilon() {
    let cfg = ExperimentConfig {
        tune_candidates: vec![0.9, 0.5, 0.1, 0.01, 0.001],
        ..small()
    };
    let graphs = point_graphs(&cfg, 60, 3.0).unwrap();
    let p = tune_point(&cfg, &graphs, Strategy::Aits, 0.1).unwrap();
    assert!(p.pe <= 0.1);
    for eps in cfg.tune_candidates.iter().filter(|&&e| e > p.epsilon) {
        let q = bigraph_privacy::harness::run_point(&cfg, &graphs, Strategy::Aits, *eps).unwrap();
        assert!(q.pe > 0.1, "candidate {eps} also passes");
    }
}

#[test]
fn output_directory_contents() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        m_values: vec![30],
        alphas: vec![3.0, 5.0],
        ..small()
    };
    let r = run_sweep_to_dir(&cfg, dir.path()).unwrap();
    let written = std::fs::read_to_string(dir.path().join("results.csv")).unwrap();
    assert_eq!(written, csv(&r));
    let echo = std::fs::read_to_string(dir.path().join("config.txt")).unwrap();
    assert_eq!(ExperimentConfig::parse(&echo).unwrap(), cfg);
    let plot = std::fs::read_to_string(dir.path().join("plot.dat")).unwrap();
    assert_eq!(plot.lines().filter(|l| l.starts_with("# series")).count(), 4);
    assert!(std::fs::read_to_string(dir.path().join("metadata.txt")).unwrap().contains("unresolved"));
}
