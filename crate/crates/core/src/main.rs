use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use cmsnb::diagnostics::{convergence_gate, diagnose, gate, GateRule};
use cmsnb::inference::{
    mean_score, pointwise_loglik, posterior_predictive, realtime_scores, realtime_state_probabilities,
    state_probabilities, waic, PosteriorDraws,
    WaicKind,
};
use cmsnb::io::{self, LoadOptions, LoadedPanel, RunConfig};
use cmsnb::model::{ModelSpec, ParamLayout, Regime};
use cmsnb::sampler::gibbs_run;
use cmsnb::sim::{self, BenchmarkConfig, BenchmarkTruth, ScoreTable};
use cmsnb::{Error, Result};

#[derive(Parser)]
#[command(name = "cmsnb", version, about = "Coupled Markov-switching negative binomial outbreak models")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate a panel from the model or the fixed-outbreak benchmark
    Simulate(SimulateArgs),
    /// Fit a model and store the posterior draws
    Fit(FitArgs),
    /// Convergence diagnostics of stored draws
    Diagnose(DiagnoseArgs),
    /// Posterior regime probabilities per area and week
    States(PostArgs),
    /// Real-time regime probabilities: one refit per week of the final window
    RealtimeStates(RealtimeArgs),
    /// Posterior-predictive forecasts
    Forecast(ForecastArgs),
    /// WAIC of stored draws
    Waic(WaicArgs),
    /// Real-time one-step-ahead multivariate log scores
    Score(ScoreArgs),
    /// Detection accuracy of outbreak probabilities against a truth table
    EvalDetect(EvalArgs),
    /// Neighbour weights from patient-sample counts
    Weights(WeightsArgs),
}

/// Configuration and panel inputs shared by the model commands.
#[derive(Args)]
struct ModelArgs {
    /// Configuration file (default: $CMSNB_CONFIG, else built-in defaults)
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    counts: Option<PathBuf>,
    #[arg(long)]
    covariates: Option<PathBuf>,
    #[arg(long)]
    neighbors: Option<PathBuf>,
    /// coupled, non-coupled or no-absence-clone
    #[arg(long)]
    variant: Option<String>,
    /// Extra configuration settings, e.g. `--set emission_covariates=beds`
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    chains: Option<usize>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    burnin: Option<usize>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DiagnoseArgs {
    /// Draw directory written by `fit`
    #[arg(long)]
    draws: PathBuf,
    /// Diagnostics CSV (default: <draws>/../diagnostics.csv)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PostArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    draws: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Fail instead of warning when the draws do not pass the convergence gate
    #[arg(long)]
    require_gate: bool,
}

#[derive(Args)]
struct ForecastArgs {
    #[command(flatten)]
    post: PostArgs,
    #[arg(long, default_value_t = 1)]
    horizon: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Marginalized,
    Conditional,
}

#[derive(Args)]
struct WaicArgs {
    #[command(flatten)]
    post: PostArgs,
    #[arg(long, value_enum, default_value_t = Kind::Marginalized)]
    kind: Kind,
    /// Model label in the output table
    #[arg(long, default_value = "model")]
    label: String,
}

#[derive(Args)]
struct ScoreArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Number of final weeks scored
    #[arg(long, default_value_t = 10)]
    weeks: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    chains: Option<usize>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    burnin: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RealtimeArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Number of final weeks evaluated (21 = weeks 100-120 of the benchmark)
    #[arg(long, default_value_t = 21)]
    weeks: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    chains: Option<usize>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    burnin: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Counts CSV of the evaluated panel (area ids and weeks)
    #[arg(long)]
    counts: PathBuf,
    /// State probabilities written by `states`
    #[arg(long)]
    states: PathBuf,
    /// Truth table written by `simulate`
    #[arg(long)]
    truth: PathBuf,
    /// Alarm when the outbreak probability exceeds this value
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SimKind {
    /// Draw from the model with a synthetic covariate skeleton
    Model,
    /// Fixed-outbreak cluster benchmark
    Benchmark,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Design {
    Recovery,
    Coupled,
    NonCoupled,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_enum, default_value_t = SimKind::Model)]
    kind: SimKind,
    /// Parameter design for `--kind model`
    #[arg(long, value_enum, default_value_t = Design::Recovery)]
    design: Design,
    #[arg(long, default_value_t = 10)]
    areas: usize,
    #[arg(long, default_value_t = 113)]
    weeks: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct WeightsArgs {
    /// Patient-sample CSV (area_id, neighborhood_id, n)
    #[arg(long)]
    samples: PathBuf,
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Simulate(a) => simulate(a),
        Cmd::Fit(a) => fit(a),
        Cmd::Diagnose(a) => diagnose_cmd(a),
        Cmd::States(a) => states(a),
        Cmd::RealtimeStates(a) => realtime_states(a),
        Cmd::Forecast(a) => forecast(a),
        Cmd::Waic(a) => waic_cmd(a),
        Cmd::Score(a) => score(a),
        Cmd::EvalDetect(a) => eval_detect(a),
        Cmd::Weights(a) => weights(a),
    }
}

impl ModelArgs {
    fn config(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::resolve(self.config.as_deref())?;
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, found '{kv}'")))?;
            cfg.set(k.trim(), v.trim())?;
        }
        if let Some(v) = &self.variant {
            cfg.set("variant", v)?;
        }
        for (key, p) in [("counts", &self.counts), ("covariates", &self.covariates), ("neighbors", &self.neighbors)] {
            if let Some(p) = p {
                cfg.set(key, &p.to_string_lossy())?;
            }
        }
        Ok(cfg)
    }

    /// Validated configuration, panel and model specification.
    fn load(&self) -> Result<(RunConfig, LoadedPanel, ModelSpec)> {
        let cfg = self.config()?;
        cfg.validate()?;
        let counts = cfg
            .counts
            .as_deref()
            .ok_or_else(|| Error::Config("no counts file given (--counts or 'counts' key)".into()))?;
        let panel = io::load_panel(
            counts,
            cfg.covariates.as_deref(),
            cfg.neighbors.as_deref(),
            LoadOptions {
                scale_covariates: cfg.scale_covariates,
            },
        )?;
        let spec = cfg.build_spec(&panel.data)?;
        Ok((cfg, panel, spec))
    }
}

fn override_sampler(cfg: &mut RunConfig, seed: Option<u64>, chains: Option<usize>, iters: Option<usize>, burnin: Option<usize>) -> Result<()> {
    let s = &mut cfg.sampler;
    if let Some(v) = seed {
        s.seed = v;
    }
    if let Some(v) = chains {
        s.n_chains = v;
    }
    if let Some(v) = iters {
        s.n_iterations = v;
    }
    if let Some(v) = burnin {
        s.burn_in = v;
    }
    cfg.validate()
}

fn fit(a: FitArgs) -> Result<()> {
    let (mut cfg, panel, spec) = a.model.load()?;
    override_sampler(&mut cfg, a.seed, a.chains, a.iters, a.burnin)?;
    if let Some(o) = a.out {
        cfg.out = o;
    }
    let priors = cfg.build_priors(&spec, &panel.data)?;
    let out = gibbs_run(&panel.data, &spec, &priors, &cfg.sampler_config())?;
    io::persist_draws(&out.draws, &cfg.out.join("draws"))?;
    println!(
        "fit: {} chains x {} iterations, {} kept rows per chain, {} latent draws",
        out.draws.n_chains(),
        out.draws.n_iterations,
        out.draws.n_kept(),
        out.draws.n_state_draws()
    );
    if out.draws.n_chains() > 1 {
        let diags = diagnose(&out.draws)?;
        io::write_diagnostics(&cfg.out.join("diagnostics.csv"), &diags)?;
        let g = gate(&diags, &GateRule::default());
        println!(
            "gate: {} (min ESS {:.1}, max R-hat {:.4})",
            if g.pass { "PASS" } else { "FAIL" },
            g.min_ess,
            g.max_rhat
        );
    } else {
        println!("gate: skipped (needs at least two chains)");
    }
    if let Some(acc) = &out.waic {
        let w = acc.report()?;
        io::write_waic(&cfg.out.join("waic.csv"), &[("model".into(), w)])?;
        println!("waic: {:.3} (lpdd {:.3}, pwaic {:.3})", w.waic, w.lpdd, w.pwaic);
    }
    println!("draws written to {}", cfg.out.join("draws").display());
    Ok(())
}

fn diagnose_cmd(a: DiagnoseArgs) -> Result<()> {
    let draws: PosteriorDraws<f64> = io::load_draws(&a.draws)?;
    let diags = diagnose(&draws)?;
    let out = a
        .out
        .unwrap_or_else(|| a.draws.parent().unwrap_or(Path::new(".")).join("diagnostics.csv"));
    io::write_diagnostics(&out, &diags)?;
    let g = gate(&diags, &GateRule::default());
    for d in &g.offending {
        println!("offending: {} (ESS {:.1}, R-hat {:.4})", d.name, d.ess, d.rhat);
    }
    println!(
        "gate: {} (min ESS {:.1}, max R-hat {:.4})",
        if g.pass { "PASS" } else { "FAIL" },
        g.min_ess,
        g.max_rhat
    );
    Ok(())
}

/// Loads draws, checks them against the panel and applies the gate.
fn load_checked(p: &PostArgs, panel: &LoadedPanel, spec: &ModelSpec) -> Result<PosteriorDraws<f64>> {
    let draws: PosteriorDraws<f64> = io::load_draws(&p.draws)?;
    let layout = ParamLayout::new(spec, &panel.data);
    if layout.names() != draws.names.as_slice()
        || draws.n_areas != panel.data.n_areas()
        || draws.n_times != panel.data.n_times()
    {
        return Err(Error::Draws("draws were not produced by this model and panel".into()));
    }
    let g = convergence_gate(&draws)?;
    if !g.pass {
        let msg = format!(
            "draws fail the convergence gate (min ESS {:.1}, max R-hat {:.4})",
            g.min_ess, g.max_rhat
        );
        if p.require_gate {
            return Err(Error::Draws(msg));
        }
        eprintln!("warning: {msg}");
    }
    Ok(draws)
}

fn states(a: PostArgs) -> Result<()> {
    let (_, panel, spec) = a.model.load()?;
    let draws = load_checked(&a, &panel, &spec)?;
    let s = state_probabilities(&draws, 0..panel.data.n_times(), &spec.states)?;
    io::write_state_probabilities(&a.out, &s, panel.data.area_ids(), panel.first_week)?;
    println!("state probabilities written to {}", a.out.display());
    Ok(())
}

fn realtime_states(a: RealtimeArgs) -> Result<()> {
    let (mut cfg, panel, spec) = a.model.load()?;
    override_sampler(&mut cfg, a.seed, a.chains, a.iters, a.burnin)?;
    let nt = panel.data.n_times();
    let s = realtime_state_probabilities(
        &panel.data,
        &spec,
        |d| cfg.build_priors(&spec, d),
        &cfg.sampler_config(),
        nt.saturating_sub(a.weeks)..nt,
    )?;
    io::write_state_probabilities(&a.out, &s, panel.data.area_ids(), panel.first_week)?;
    println!("real-time state probabilities for {} weeks written to {}", s.n_times, a.out.display());
    Ok(())
}

fn forecast(a: ForecastArgs) -> Result<()> {
    let p = &a.post;
    let (_, panel, spec) = p.model.load()?;
    let draws = load_checked(p, &panel, &spec)?;
    let layout = ParamLayout::new(&spec, &panel.data);
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let fc = posterior_predictive(&draws, &panel.data, &spec, &layout, a.horizon, &mut rng)?;
    let rows = fc.summarize(&spec.states);
    io::write_forecast(&p.out, &rows, panel.data.area_ids(), panel.first_week, fc.t_last)?;
    println!("{} forecast rows written to {}", rows.len(), p.out.display());
    Ok(())
}

fn waic_cmd(a: WaicArgs) -> Result<()> {
    let p = &a.post;
    let (_, panel, spec) = p.model.load()?;
    let draws = load_checked(p, &panel, &spec)?;
    let layout = ParamLayout::new(&spec, &panel.data);
    let kind = match a.kind {
        Kind::Marginalized => WaicKind::Marginalized,
        Kind::Conditional => WaicKind::Conditional,
    };
    let ll = pointwise_loglik(&draws, &panel.data, &spec, &layout, kind)?;
    let w = waic(&ll)?;
    io::write_waic(&p.out, &[(a.label, w)])?;
    println!("waic: {:.3} (lpdd {:.3}, pwaic {:.3})", w.waic, w.lpdd, w.pwaic);
    Ok(())
}

fn score(a: ScoreArgs) -> Result<()> {
    let (mut cfg, panel, spec) = a.model.load()?;
    override_sampler(&mut cfg, a.seed, a.chains, a.iters, a.burnin)?;
    let scores = realtime_scores(
        &panel.data,
        &spec,
        |d| cfg.build_priors(&spec, d),
        &cfg.sampler_config(),
        a.weeks,
    )?;
    io::write_scores(&a.out, &scores, panel.first_week)?;
    println!("mean multivariate log score over {} weeks: {:.4}", scores.len(), mean_score(&scores));
    Ok(())
}

fn eval_detect(a: EvalArgs) -> Result<()> {
    let panel = io::load_panel(&a.counts, None, None, LoadOptions::default())?;
    let ids = panel.data.area_ids();
    let s = io::read_state_probabilities(&a.states, ids, panel.first_week)?;
    let truth = io::read_truth(&a.truth, ids, panel.first_week)?;
    let table = ScoreTable::new(s.t0, s.outbreak_matrix());
    let auc = sim::roc_auc(&table, &truth)?;
    let ss = sim::sens_spec(&table, &truth, a.threshold)?;
    let tl = sim::timeliness(&table, &truth, a.threshold)?;
    println!("auc: {auc:.4}");
    println!("sensitivity: {:.4}", ss.sensitivity);
    println!("specificity: {:.4}", ss.specificity);
    println!(
        "timeliness: {:.3} weeks ({} detected, {} missed)",
        tl.mean, tl.n_detected, tl.n_undetected
    );
    Ok(())
}

fn weights(a: WeightsArgs) -> Result<()> {
    let (ids, dists) = io::distributions_from_samples(&a.samples)?;
    let ne = io::nearest_neighbors(&dists, a.k)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["from_area", "to_area", "weight"])?;
    let mut symmetric = true;
    for (i, list) in ne.iter().enumerate() {
        for nb in list {
            symmetric &= ne[nb.area].iter().any(|b| b.area == i);
            w.write_record([ids[nb.area].clone(), ids[i].clone(), nb.weight.to_string()])?;
        }
    }
    let body = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    // nearest-neighbour sets need not be mutual
    let mut bytes = if symmetric { Vec::new() } else { b"# asymmetric\n".to_vec() };
    bytes.extend_from_slice(&body);
    io::atomic_write(&a.out, &bytes)?;
    println!("{} areas, neighbour lists written to {}", ids.len(), a.out.display());
    Ok(())
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let (data, truth) = match a.kind {
        SimKind::Benchmark => {
            let (data, truth) = sim::simulate_cluster_benchmark(&BenchmarkConfig::default(), &mut rng)?;
            (data, truth)
        }
        SimKind::Model => {
            let skeleton = sim::synthetic_skeleton(a.areas, a.weeks, &mut rng)?;
            let (spec, params) = match a.design {
                Design::Recovery => {
                    let spec = sim::recovery_spec(&skeleton);
                    let p = sim::recovery_truth(&spec, a.areas);
                    (spec, p)
                }
                Design::Coupled | Design::NonCoupled => {
                    let coupled = a.design == Design::Coupled;
                    let spec = sim::selection_spec(&skeleton, coupled);
                    let p = sim::selection_truth(&spec, a.areas, coupled);
                    (spec, p)
                }
            };
            let (data, states) = sim::simulate_from_model(&params, &skeleton, &spec, &mut rng)?;
            let layout = ParamLayout::new(&spec, &data);
            let flat = params.to_flat(&layout);
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["parameter", "value"])?;
            for (name, v) in layout.names().iter().zip(&flat) {
                w.write_record([name.clone(), v.to_string()])?;
            }
            std::fs::create_dir_all(&a.out)?;
            let body = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
            io::atomic_write(&a.out.join("truth_params.csv"), &body)?;
            let regimes: Vec<Regime> = (0..data.n_areas())
                .flat_map(|i| (0..data.n_times()).map(move |t| (i, t)))
                .map(|(i, t)| spec.states.regime(states.get(i, t)))
                .collect();
            let truth = BenchmarkTruth::from_regimes(data.n_areas(), data.n_times(), regimes)?;
            (data, truth)
        }
    };
    io::write_panel(&data, 1, &a.out)?;
    io::write_truth(&a.out.join("truth.csv"), &truth, data.area_ids(), 1)?;
    println!(
        "simulated {} areas x {} weeks into {}",
        data.n_areas(),
        data.n_times(),
        a.out.display()
    );
    Ok(())
}
