//! Command-line front end. [`dispatch`] parses arguments, runs one
//! subcommand and returns the process exit code.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use socmap::bootstrap::{build_dataset, load_split, DatasetSpec};
use socmap::config::GlobalConfig;
use socmap::costmap::CostMap;
use socmap::geom::Point2;
use socmap::graph::build_scene_graph;
use socmap::nav::{benchmark_with, reports_to_csv, run_episode, GmmProvider, MapProvider, ModelProvider, TeacherProvider};
use socmap::nn::{evaluate, load_checkpoint, prepare_samples, save_checkpoint, train};
use socmap::render::render_png;
use socmap::scenario::{to_robot_frame, Frame, Scenario, ScenarioClass};
use socmap::Sngnn2d;

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "socmap", version, about = "Social cost maps: generate, bootstrap, train, evaluate, navigate")]
struct Cli {
    /// JSON config file; falls back to $SOCMAP_CONFIG, then built-in defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Emit a random scenario as JSON.
    Gen(GenArgs),
    /// Build a train/dev/test dataset of (graph, map) samples.
    Bootstrap(BootstrapArgs),
    /// Train a model on a dataset.
    Train(TrainArgs),
    /// Print the MSE of a checkpoint on one dataset split.
    Eval(EvalArgs),
    /// Render the model's map for one scenario.
    Infer(InferArgs),
    /// Run one navigation episode and write its trace.
    Simulate(SimulateArgs),
    /// Paired comparison of map providers over seeded episodes.
    Benchmark(BenchmarkArgs),
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long, default_value = "S_A")]
    class: ScenarioClass,
    #[arg(long)]
    seed: u64,
    /// Express the scenario in the robot's frame.
    #[arg(long)]
    robot_frame: bool,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BootstrapArgs {
    #[arg(long, default_value_t = 600)]
    train: usize,
    #[arg(long, default_value_t = 50)]
    dev: usize,
    #[arg(long, default_value_t = 50)]
    test: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Dataset directory; config `paths.data` when absent.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Output directory for model.ckpt and history.csv.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the config's training seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config's epoch limit.
    #[arg(long)]
    epochs: Option<usize>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, default_value = "test")]
    split: String,
}

#[derive(Args, Debug)]
struct InferArgs {
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Scenario JSON in world or robot frame.
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory for map.png and map.json.
    #[arg(long)]
    out: PathBuf,
    /// Pixels per map cell in the image.
    #[arg(long, default_value_t = 4)]
    scale: usize,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// sngnn2d, gmm or teacher.
    #[arg(long, default_value = "sngnn2d")]
    provider: String,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// World-frame scenario; a random one of --class is drawn when absent.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long, default_value = "S_A")]
    class: ScenarioClass,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct BenchmarkArgs {
    /// Comma-separated providers: sngnn2d, gmm, teacher.
    #[arg(long, value_delimiter = ',', default_value = "sngnn2d,gmm")]
    providers: Vec<String>,
    /// S_A, S_B, S_C or all.
    #[arg(long, default_value = "all")]
    class: String,
    #[arg(long, default_value_t = 50)]
    episodes: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Output directory for benchmark.csv; CSV goes to standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write one JSON trace per episode under <out>/traces.
    #[arg(long)]
    traces: bool,
}

/// Parses `argv` (program name first) and runs the subcommand.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_RUNTIME
        }
    }
}

/// Writes through a sibling temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path.file_name().context("output path has no file name")?;
    let mut tmp_name = OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))
}

fn out_dir(dir: &Path, cfg: &GlobalConfig) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    write_atomic(&dir.join(socmap::config::ECHO_FILE), (cfg.to_json_pretty() + "\n").as_bytes())
}

fn run(cli: Cli) -> Result<()> {
    let cfg = GlobalConfig::resolve(cli.config.as_deref())?;
    match cli.cmd {
        Command::Gen(a) => gen(&cfg, a),
        Command::Bootstrap(a) => bootstrap(&cfg, a),
        Command::Train(a) => train_cmd(&cfg, a),
        Command::Eval(a) => eval(&cfg, a),
        Command::Infer(a) => infer(&cfg, a),
        Command::Simulate(a) => simulate(&cfg, a),
        Command::Benchmark(a) => bench(&cfg, a),
    }
}

fn gen(cfg: &GlobalConfig, a: GenArgs) -> Result<()> {
    let mut s = cfg.generator.generate(a.class, a.seed)?;
    if a.robot_frame {
        s = to_robot_frame(&s)?;
    }
    let json = s.to_json() + "\n";
    match a.out {
        Some(p) => write_atomic(&p, json.as_bytes()),
        None => {
            print!("{json}");
            Ok(())
        }
    }
}

fn bootstrap(cfg: &GlobalConfig, a: BootstrapArgs) -> Result<()> {
    let spec = DatasetSpec {
        graph: cfg.graph,
        social: cfg.social,
        map_side: cfg.map_side,
        generator: cfg.generator.clone(),
        ..DatasetSpec::with_counts(a.train, a.dev, a.test, a.seed)
    };
    if spec.is_long_running() {
        log::warn!("{} samples requested; this will take a while", spec.total());
    }
    let m = build_dataset(&a.out, &spec)?;
    out_dir(&a.out, cfg)?;
    println!("{} samples written to {} ({} skipped)", spec.total(), a.out.display(), m.skipped);
    Ok(())
}

fn load_model(cfg: &GlobalConfig, path: Option<&Path>) -> Result<Sngnn2d> {
    let p = path.unwrap_or(&cfg.paths.checkpoint);
    let m: Sngnn2d = load_checkpoint(p).with_context(|| format!("loading checkpoint {}", p.display()))?;
    if m.config().grid_side != cfg.graph.grid_side {
        bail!("checkpoint expects a {}x{0} lattice but the config builds {}x{1}", m.config().grid_side, cfg.graph.grid_side);
    }
    Ok(m)
}

fn train_cmd(cfg: &GlobalConfig, a: TrainArgs) -> Result<()> {
    let data = a.data.as_deref().unwrap_or(&cfg.paths.data);
    let mut tcfg = cfg.train.clone();
    if let Some(s) = a.seed {
        tcfg.seed = s;
    }
    if let Some(e) = a.epochs {
        tcfg.max_epochs = e;
        tcfg.patience = tcfg.patience.min(e);
    }
    let tr = prepare_samples::<f32>(&load_split(data, "train")?, &cfg.model)?;
    let dv = prepare_samples::<f32>(&load_split(data, "dev")?, &cfg.model)?;
    let model = Sngnn2d::new(cfg.model.clone(), tcfg.seed)?;
    let out = train(model, &tr, &dv, &tcfg)?;
    let mut echoed = cfg.clone();
    echoed.train = tcfg;
    out_dir(&a.out, &echoed)?;
    save_checkpoint(&out.model, &a.out.join("model.ckpt"))?;
    write_atomic(&a.out.join("history.csv"), out.history.to_csv().as_bytes())?;
    println!("best epoch {} dev_mse {:.6}", out.history.best_epoch, out.history.best_dev_mse);
    Ok(())
}

fn eval(cfg: &GlobalConfig, a: EvalArgs) -> Result<()> {
    let m = load_model(cfg, a.checkpoint.as_deref())?;
    let data = a.data.as_deref().unwrap_or(&cfg.paths.data);
    let samples = prepare_samples::<f32>(&load_split(data, &a.split)?, m.config())?;
    println!("{:.8}", evaluate(&m, &samples)?);
    Ok(())
}

fn read_scenario(path: &Path) -> Result<Scenario> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Scenario::from_json(&text).with_context(|| format!("parsing {}", path.display()))
}

fn map_json(map: &CostMap) -> String {
    let n = map.side();
    let rows: Vec<&[f64]> = map.values().chunks(n).collect();
    serde_json::json!({ "side": n, "area_side": map.area_side(), "values": rows }).to_string() + "\n"
}

fn infer(cfg: &GlobalConfig, a: InferArgs) -> Result<()> {
    let m = load_model(cfg, a.checkpoint.as_deref())?;
    let s = read_scenario(&a.scenario)?;
    let s = if s.frame == Frame::Robot { s } else { to_robot_frame(&s)? };
    let map = m.forward(&build_scene_graph(&s, &cfg.graph)?)?;
    out_dir(&a.out, cfg)?;
    write_atomic(&a.out.join("map.json"), map_json(&map).as_bytes())?;
    write_atomic(&a.out.join("map.png"), &render_png(&map, a.scale, &[]))?;
    println!("{:.8}", map.centre_value());
    Ok(())
}

fn provider<'a>(name: &str, cfg: &GlobalConfig, model: Option<&'a Sngnn2d>) -> Result<Box<dyn MapProvider + 'a>> {
    let area_side = cfg.graph.area_side;
    Ok(match name {
        "sngnn2d" => Box::new(ModelProvider { model: model.context("the sngnn2d provider needs a checkpoint")?, graph: cfg.graph }),
        "gmm" => Box::new(GmmProvider { params: cfg.social, side: cfg.map_side, area_side }),
        "teacher" => Box::new(TeacherProvider { params: cfg.social, side: cfg.map_side, area_side }),
        other => bail!("unknown provider {other:?} (expected sngnn2d, gmm or teacher)"),
    })
}

fn trajectory_cells(map_side: usize, area_side: f64, robot: socmap::scenario::Pose2D, pts: impl Iterator<Item = Point2>) -> Vec<(usize, usize)> {
    let res = area_side / (map_side - 1) as f64;
    let c = ((map_side - 1) / 2) as f64;
    pts.filter_map(|p| {
        let l = robot.to_local(p);
        let i = (c - l.x / res).round();
        let j = (c + l.y / res).round();
        let max = (map_side - 1) as f64;
        ((0.0..=max).contains(&i) && (0.0..=max).contains(&j)).then_some((i as usize, j as usize))
    })
    .collect()
}

fn simulate(cfg: &GlobalConfig, a: SimulateArgs) -> Result<()> {
    let model = if a.provider == "sngnn2d" { Some(load_model(cfg, a.checkpoint.as_deref())?) } else { None };
    let p = provider(&a.provider, cfg, model.as_ref())?;
    let world = match &a.scenario {
        Some(path) => read_scenario(path)?,
        None => cfg.generator.generate(a.class, a.seed)?,
    };
    if world.frame != Frame::World {
        bail!("simulate needs a world-frame scenario");
    }
    let e = run_episode(&world, p.as_ref(), &cfg.nav)?;
    out_dir(&a.out, cfg)?;
    write_atomic(&a.out.join("trace.json"), (e.to_json() + "\n").as_bytes())?;
    let first = p.cost_map(&to_robot_frame(&world)?).map_err(anyhow::Error::msg)?;
    let cells = trajectory_cells(first.side(), first.area_side(), world.robot, e.trajectory.iter().map(|t| t.position()));
    write_atomic(&a.out.join("episode.png"), &render_png(&first, 4, &cells))?;
    println!("{:?} tau {:.1} d_t {:.2} si_i {:.2}", e.outcome, e.metrics.tau, e.metrics.d_t, e.metrics.si_i);
    Ok(())
}

fn bench(cfg: &GlobalConfig, a: BenchmarkArgs) -> Result<()> {
    let classes: Vec<ScenarioClass> = if a.class == "all" { ScenarioClass::ALL.to_vec() } else { vec![a.class.parse()?] };
    let model = if a.providers.iter().any(|p| p == "sngnn2d") { Some(load_model(cfg, a.checkpoint.as_deref())?) } else { None };
    let providers = a.providers.iter().map(|n| provider(n, cfg, model.as_ref())).collect::<Result<Vec<_>>>()?;
    let mut reports = Vec::new();
    for &class in &classes {
        for p in &providers {
            reports.push(benchmark_with(p.as_ref(), &cfg.generator, class, a.episodes, a.seed, &cfg.nav)?);
        }
    }
    for pair in reports.windows(2) {
        if pair[0].class == pair[1].class && pair[0].scenario_hashes != pair[1].scenario_hashes {
            bail!("providers saw different scenarios for {}", pair[0].class.name());
        }
    }
    let csv = reports_to_csv(&reports);
    match &a.out {
        Some(dir) => {
            out_dir(dir, cfg)?;
            write_atomic(&dir.join("benchmark.csv"), csv.as_bytes())?;
            if a.traces {
                let tdir = dir.join("traces");
                fs::create_dir_all(&tdir)?;
                for r in &reports {
                    for (k, e) in r.episodes.iter().enumerate() {
                        let name = format!("{}_{}_{k:03}.json", r.provider, r.class.name());
                        write_atomic(&tdir.join(name), (e.to_json() + "\n").as_bytes())?;
                    }
                }
            }
        }
        None => print!("{csv}"),
    }
    Ok(())
}
