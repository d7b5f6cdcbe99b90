mod config;
mod svg;

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use lambmp::damage_db::{gen_database, write_database, DbConfig, Manifest, Split};
use lambmp::dispersion::{dispersion_curves, write_dispersion_csv, A0Form};
use lambmp::features::{case_features, write_feature_csv, FeatureConfig, Method};
use lambmp::localize::{
    coordinate_ranges, load_model, nn_evaluate, nn_train, save_model, train_and_evaluate,
    EvalReport, TrainConfig,
};
use lambmp::signal::{norm_time, read_signal_csv, write_signal_csv};
use lambmp::*;

use config::{pick, FileConfig};
use svg::{line_plot, Series};

#[derive(Parser)]
#[command(
    name = "lambmp",
    version,
    about = "Matching-pursuit decomposition of guided-wave signals"
)]
struct Cli {
    /// JSON file with default settings; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Propagate a tone burst over a range of distances.
    Synth(SynthArgs),
    /// Write a tone burst atom.
    Atom(AtomArgs),
    /// Decompose a signal with either pursuit.
    Decompose(DecomposeArgs),
    /// Synthetic damage database.
    Db {
        #[command(subcommand)]
        cmd: DbCommand,
    },
    /// Feature matrix from a database.
    Features(FeaturesArgs),
    /// Train or evaluate the localization network.
    Localize {
        #[command(subcommand)]
        cmd: LocalizeCommand,
    },
    /// Database, features, training and evaluation for both methods.
    Pipeline(PipelineArgs),
}

#[derive(Subcommand)]
enum DbCommand {
    Gen(DbGenArgs),
}

#[derive(Subcommand)]
enum LocalizeCommand {
    Train(TrainArgs),
    Eval(EvalArgs),
}

#[derive(Args, Clone)]
struct OutArg {
    /// Output directory.
    #[arg(long, env = "LAMBMP_OUT")]
    out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct BurstArgs {
    #[arg(long)]
    f0: Option<f64>,
    #[arg(long)]
    cycles: Option<u32>,
    #[arg(long)]
    fs: Option<f64>,
}

#[derive(Args)]
struct SynthArgs {
    #[command(flatten)]
    out: OutArg,
    #[command(flatten)]
    burst: BurstArgs,
    #[arg(long)]
    d_min: Option<f64>,
    #[arg(long)]
    d_max: Option<f64>,
    #[arg(long)]
    d_step: Option<f64>,
    /// Window length in samples.
    #[arg(long)]
    len: Option<usize>,
    /// Comma separated subset of `s0,a0`.
    #[arg(long)]
    modes: Option<String>,
    /// `mindlin` or `as-printed`.
    #[arg(long)]
    a0_form: Option<String>,
    #[arg(long)]
    svg: bool,
}

#[derive(Args)]
struct AtomArgs {
    #[command(flatten)]
    out: OutArg,
    #[command(flatten)]
    burst: BurstArgs,
    #[arg(long)]
    amplitude: Option<f64>,
}

#[derive(Args)]
struct DecomposeArgs {
    #[command(flatten)]
    out: OutArg,
    /// `time_s,value` CSV.
    #[arg(long)]
    signal: PathBuf,
    /// Atom CSV; defaults to a tone burst at the signal's sample rate.
    #[arg(long)]
    atom: Option<PathBuf>,
    #[arg(long)]
    f0: Option<f64>,
    #[arg(long)]
    cycles: Option<u32>,
    #[arg(long)]
    method: Option<String>,
    /// Stop once the relative error reaches this percentage (0 disables).
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_terms: Option<usize>,
    /// Number of Chebyshev functions.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    ridge: Option<f64>,
    #[arg(long)]
    grid_min: Option<f64>,
    #[arg(long)]
    grid_max: Option<f64>,
    #[arg(long)]
    svg: bool,
}

#[derive(Args)]
struct DbGenArgs {
    #[command(flatten)]
    out: OutArg,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    snr: Option<f64>,
    /// Disable the additive noise.
    #[arg(long)]
    no_noise: bool,
    #[arg(long)]
    reflection: Option<f64>,
    #[arg(long)]
    n_test: Option<usize>,
    #[arg(long)]
    len: Option<usize>,
}

#[derive(Args)]
struct FeaturesArgs {
    #[command(flatten)]
    out: OutArg,
    /// Database directory, defaults to `<out>/db`.
    #[arg(long)]
    db: Option<PathBuf>,
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    ridge: Option<f64>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    out: OutArg,
    #[arg(long)]
    features: PathBuf,
    /// `label,x_m,y_m[,split]` CSV; rows marked `test` are left out.
    #[arg(long)]
    targets: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    /// Model file, defaults to `<out>/model.json`.
    #[arg(long)]
    model: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    out: OutArg,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    targets: PathBuf,
    /// `train`, `test` or `all`.
    #[arg(long, default_value = "test")]
    split: String,
}

#[derive(Args)]
struct PipelineArgs {
    #[command(flatten)]
    out: OutArg,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    snr: Option<f64>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    ridge: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    svg: bool,
}

impl Command {
    fn out_flag(&self) -> Option<PathBuf> {
        match self {
            Command::Synth(a) => a.out.out.clone(),
            Command::Atom(a) => a.out.out.clone(),
            Command::Decompose(a) => a.out.out.clone(),
            Command::Db {
                cmd: DbCommand::Gen(a),
            } => a.out.out.clone(),
            Command::Features(a) => a.out.out.clone(),
            Command::Localize {
                cmd: LocalizeCommand::Train(a),
            } => a.out.out.clone(),
            Command::Localize {
                cmd: LocalizeCommand::Eval(a),
            } => a.out.out.clone(),
            Command::Pipeline(a) => a.out.out.clone(),
        }
    }
}

fn main() {
    let cli = Cli::parse();
    let outcome = FileConfig::load(cli.config.as_deref()).and_then(|file| {
        let out = pick(cli.cmd.out_flag(), file.out.clone(), PathBuf::from("out"));
        let result = run(&cli.cmd, &file, &out);
        let marker = out.join("FAILED");
        match &result {
            Ok(()) if marker.exists() => {
                let _ = fs::remove_file(&marker);
            }
            Err(e) if out.is_dir() => {
                let _ = fs::write(&marker, format!("{e:#}\n"));
            }
            _ => {}
        }
        result
    });
    if let Err(e) = outcome {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cmd: &Command, file: &FileConfig, out: &Path) -> Result<()> {
    match cmd {
        Command::Synth(a) => synth(a, file, out),
        Command::Atom(a) => atom(a, file, out),
        Command::Decompose(a) => decompose(a, file, out),
        Command::Db {
            cmd: DbCommand::Gen(a),
        } => db_gen(a, file, out),
        Command::Features(a) => features(a, file, out),
        Command::Localize {
            cmd: LocalizeCommand::Train(a),
        } => train(a, file, out),
        Command::Localize {
            cmd: LocalizeCommand::Eval(a),
        } => eval(a, out),
        Command::Pipeline(a) => pipeline(a, file, out),
    }
}

fn burst_spec(b: &BurstArgs, file: &FileConfig, amplitude: Option<f64>) -> BurstSpec {
    let r = BurstSpec::reference();
    BurstSpec {
        f0_hz: pick(b.f0, file.f0_hz, r.f0_hz),
        n_cycles: pick(b.cycles, file.cycles, r.n_cycles),
        sample_rate_hz: pick(b.fs, file.sample_rate_hz, r.sample_rate_hz),
        amplitude: pick(amplitude, file.amplitude, r.amplitude),
    }
}

fn parse_a0_form(s: &str) -> Result<A0Form> {
    match s.to_ascii_lowercase().replace('_', "-").as_str() {
        "mindlin" => Ok(A0Form::Mindlin),
        "as-printed" => Ok(A0Form::AsPrinted),
        other => bail!("unknown A0 form `{other}`, expected `mindlin` or `as-printed`"),
    }
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)?)
        .with_context(|| format!("writing {}", path.display()))
}

fn synth(a: &SynthArgs, file: &FileConfig, out: &Path) -> Result<()> {
    let spec = burst_spec(&a.burst, file, None);
    let len = pick(a.len, file.len, 1024);
    let modes = ModeSet::parse(&pick(a.modes.clone(), file.modes.clone(), "s0,a0".into()))?;
    let form = parse_a0_form(&pick(
        a.a0_form.clone(),
        file.a0_form.clone(),
        "mindlin".into(),
    ))?;
    let plate = PlateModel::reference().with_a0_form(form);
    let (d_min, d_max, d_step) = (
        pick(a.d_min, file.d_min_m, 0.15),
        pick(a.d_max, file.d_max_m, 0.55),
        pick(a.d_step, file.d_step_m, 0.05),
    );
    if !(d_step > 0.0 && d_min >= 0.0 && d_max >= d_min) {
        bail!("distance range must satisfy 0 <= d-min <= d-max and d-step > 0");
    }
    let count = ((d_max - d_min) / d_step + 1e-9).floor() as usize + 1;
    let x = make_tone_burst(&spec)?;
    if len < x.len() {
        bail!("--len {len} is shorter than the {}-sample burst", x.len());
    }
    let x = x.resized(len)?;
    fs::create_dir_all(out)?;
    let mut series = Vec::new();
    for i in 0..count {
        let d = d_min + i as f64 * d_step;
        let s = propagate(&x, d, &plate, modes)?;
        let path = out.join(format!("signal_d{:03.0}mm.csv", d * 1e3));
        write_signal_csv(&path, &s)?;
        println!("{}", path.display());
        series.push((d, s));
    }
    let f_max = (spec.sample_rate_hz / 2.0).min(500e3);
    let freqs: Vec<f64> = (1..)
        .map(|k| k as f64 * 5e3)
        .take_while(|f| *f <= f_max)
        .collect();
    let curves = dispersion_curves(&plate, &freqs)?;
    write_dispersion_csv(out.join("dispersion.csv"), &curves)?;
    if a.svg {
        let peak = series
            .iter()
            .flat_map(|(_, s)| s.samples().iter())
            .fold(0.0_f64, |m, v| m.max(v.abs()));
        let names: Vec<String> = series
            .iter()
            .map(|(d, _)| format!("{:.0} cm", d * 100.0))
            .collect();
        let plots: Vec<Series> = series
            .iter()
            .zip(&names)
            .enumerate()
            .map(|(i, ((_, s), name))| Series {
                name,
                points: s
                    .samples()
                    .iter()
                    .enumerate()
                    .map(|(k, v)| (k as f64 * s.dt() * 1e6, v + 2.0 * peak * i as f64))
                    .collect(),
            })
            .collect();
        fs::write(
            out.join("signals.svg"),
            line_plot(
                "Propagated signals",
                "time [us]",
                "offset amplitude",
                &plots,
            ),
        )?;
        let curve = |f: fn(&lambmp::dispersion::DispersionPoint) -> f64| {
            curves
                .iter()
                .map(|p| (p.f_hz / 1e3, f(p)))
                .collect::<Vec<_>>()
        };
        let plots = [
            Series {
                name: "cp S0",
                points: curve(|p| p.cp_s0),
            },
            Series {
                name: "cp A0",
                points: curve(|p| p.cp_a0),
            },
            Series {
                name: "cg S0",
                points: curve(|p| p.cg_s0),
            },
            Series {
                name: "cg A0",
                points: curve(|p| p.cg_a0),
            },
        ];
        fs::write(
            out.join("dispersion.svg"),
            line_plot("Dispersion", "frequency [kHz]", "velocity [m/s]", &plots),
        )?;
    }
    Ok(())
}

fn atom(a: &AtomArgs, file: &FileConfig, out: &Path) -> Result<()> {
    let x = make_tone_burst(&burst_spec(&a.burst, file, a.amplitude))?;
    fs::create_dir_all(out)?;
    let path = out.join("atom.csv");
    write_signal_csv(&path, &x)?;
    println!("{}", path.display());
    Ok(())
}

#[derive(Serialize)]
struct ConvergenceRow {
    term: usize,
    error_pct: f64,
}

#[derive(Serialize)]
struct ReconstructionRow {
    time_s: f64,
    signal: f64,
    reconstruction: f64,
    residual: f64,
}

fn decompose(a: &DecomposeArgs, file: &FileConfig, out: &Path) -> Result<()> {
    let s =
        read_signal_csv(&a.signal).with_context(|| format!("reading {}", a.signal.display()))?;
    let (atom, source) = match &a.atom {
        Some(p) => (load_atom(p)?, Some(p.display().to_string())),
        None => {
            let r = BurstSpec::reference();
            let spec = BurstSpec {
                f0_hz: pick(a.f0, file.f0_hz, r.f0_hz),
                n_cycles: pick(a.cycles, file.cycles, r.n_cycles),
                sample_rate_hz: s.sample_rate_hz(),
                amplitude: 1.0,
            };
            (make_tone_burst(&spec)?, Some("tone burst".to_string()))
        }
    };
    let method: Method = pick(a.method.clone(), file.method.clone(), "sampm".into()).parse()?;
    let grid = match (
        pick(a.grid_min, file.grid_min_s, -1.0),
        pick(a.grid_max, file.grid_max_s, -1.0),
    ) {
        (lo, hi) if lo < 0.0 && hi < 0.0 => None,
        (lo, hi) => {
            let full = DelayGrid::full(s.len(), atom.support_len(), s.sample_rate_hz())?;
            Some(DelayGrid::new(
                if lo < 0.0 { full.min_delay_s } else { lo },
                if hi < 0.0 { full.max_delay_s } else { hi },
                s.dt(),
            )?)
        }
    };
    let pursuit = PursuitConfig {
        max_terms: pick(a.max_terms, file.max_terms, 50),
        tol_pct: pick(a.tol, file.tol_pct, 10.0),
        grid,
    };
    fs::create_dir_all(out)?;
    let (history, waveforms, reconstruction, residual) = match method {
        Method::Sampm => {
            let d = sampm_decompose(&s, &atom, &pursuit)?;
            write_json(&out.join("decomposition.json"), &d.to_file(source))?;
            (
                d.error_history_pct.clone(),
                d.term_waveforms()?,
                d.reconstruction()?,
                d.residual.clone(),
            )
        }
        Method::Sacmpm => {
            let cfg = SacmpmConfig {
                pursuit,
                n_funcs: pick(a.n, file.n_funcs, 40),
                ridge_lambda: pick(
                    a.ridge,
                    file.ridge_lambda,
                    SacmpmConfig::default().ridge_lambda,
                ),
            };
            let d = sacmpm_decompose(&s, &atom, &cfg)?;
            write_json(&out.join("decomposition.json"), &d.to_file(source))?;
            (
                d.error_history_pct.clone(),
                d.term_waveforms()?,
                d.reconstruction()?,
                d.residual.clone(),
            )
        }
    };
    let conv: Vec<ConvergenceRow> = history
        .iter()
        .enumerate()
        .map(|(i, e)| ConvergenceRow {
            term: i + 1,
            error_pct: *e,
        })
        .collect();
    write_csv(&out.join("convergence.csv"), &conv)?;
    let rec: Vec<ReconstructionRow> = (0..s.len())
        .map(|i| ReconstructionRow {
            time_s: i as f64 * s.dt(),
            signal: s.samples()[i],
            reconstruction: reconstruction.samples()[i],
            residual: residual.samples()[i],
        })
        .collect();
    write_csv(&out.join("reconstruction.csv"), &rec)?;
    let mut w = csv::Writer::from_path(out.join("terms.csv"))?;
    let mut header = vec!["time_s".to_string()];
    header.extend((1..=waveforms.len()).map(|k| format!("term_{k}")));
    w.write_record(&header)?;
    for i in 0..s.len() {
        let mut row = vec![(i as f64 * s.dt()).to_string()];
        row.extend(waveforms.iter().map(|t| t.samples()[i].to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    if a.svg {
        let conv_pts: Vec<(f64, f64)> = conv.iter().map(|r| (r.term as f64, r.error_pct)).collect();
        let name = method.name();
        fs::write(
            out.join("convergence.svg"),
            line_plot(
                "Convergence",
                "terms",
                "relative error [%]",
                &[Series {
                    name,
                    points: conv_pts,
                }],
            ),
        )?;
        let t = |sig: &Signal| -> Vec<(f64, f64)> {
            sig.samples()
                .iter()
                .enumerate()
                .map(|(i, v)| (i as f64 * sig.dt() * 1e6, *v))
                .collect()
        };
        fs::write(
            out.join("reconstruction.svg"),
            line_plot(
                "Reconstruction",
                "time [us]",
                "amplitude",
                &[
                    Series {
                        name: "signal",
                        points: t(&s),
                    },
                    Series {
                        name: "reconstruction",
                        points: t(&reconstruction),
                    },
                ],
            ),
        )?;
    }
    let final_error = history.last().copied().unwrap_or(100.0);
    println!(
        "{}: {} terms, final error {:.4}% (check {:.4}%)",
        method.name(),
        history.len(),
        final_error,
        100.0 * norm_time(&s.sub(&reconstruction)?) / norm_time(&s)
    );
    Ok(())
}

fn db_config(
    file: &FileConfig,
    seed: Option<u64>,
    snr: Option<f64>,
    no_noise: bool,
    reflection: Option<f64>,
    n_test: Option<usize>,
    len: Option<usize>,
) -> DbConfig {
    let d = DbConfig::default();
    DbConfig {
        seed: pick(seed, file.seed, d.seed),
        snr_db: if no_noise {
            None
        } else {
            Some(pick(snr, file.snr_db, 150.0))
        },
        reflection_coeff: pick(reflection, file.reflection_coeff, d.reflection_coeff),
        n_test: pick(n_test, file.n_test, d.n_test),
        window_len: pick(len, file.len, d.window_len),
        ..d
    }
}

#[derive(Serialize)]
struct TargetRow {
    label: String,
    x_m: f64,
    y_m: f64,
    split: Split,
}

fn write_targets(path: &Path, manifest: &Manifest) -> Result<()> {
    let rows: Vec<TargetRow> = manifest
        .cases
        .iter()
        .map(|c| TargetRow {
            label: c.label.clone(),
            x_m: c.x_m,
            y_m: c.y_m,
            split: c.split,
        })
        .collect();
    write_csv(path, &rows)
}

fn db_gen(a: &DbGenArgs, file: &FileConfig, out: &Path) -> Result<()> {
    let cfg = db_config(
        file,
        a.seed,
        a.snr,
        a.no_noise,
        a.reflection,
        a.n_test,
        a.len,
    );
    let db = gen_database(&cfg)?;
    let dir = out.join("db");
    let manifest = write_database(&db, &dir)?;
    write_targets(&dir.join("targets.csv"), &manifest)?;
    println!(
        "{} cases written to {}",
        manifest.cases.len(),
        dir.display()
    );
    Ok(())
}

fn feature_config(
    method: Method,
    file: &FileConfig,
    m: Option<usize>,
    n: Option<usize>,
    ridge: Option<f64>,
) -> FeatureConfig {
    let d = FeatureConfig::new(method);
    FeatureConfig {
        method,
        m: pick(m, file.m, d.m),
        n_funcs: pick(n, file.n_funcs, d.n_funcs),
        ridge_lambda: pick(ridge, file.ridge_lambda, d.ridge_lambda),
    }
}

fn features(a: &FeaturesArgs, file: &FileConfig, out: &Path) -> Result<()> {
    let dir = a.db.clone().unwrap_or_else(|| out.join("db"));
    let (manifest, residuals) = lambmp::damage_db::read_database(&dir)
        .with_context(|| format!("reading database in {}", dir.display()))?;
    let method: Method = pick(a.method.clone(), file.method.clone(), "sampm".into()).parse()?;
    let cfg = feature_config(method, file, a.m, a.n, a.ridge);
    let atom = make_tone_burst(&manifest.config.burst)?;
    let (schema, rows) = case_features(&residuals, &atom, &cfg)?;
    let labels: Vec<String> = manifest.cases.iter().map(|c| c.label.clone()).collect();
    fs::create_dir_all(out)?;
    let path = out.join(format!("features_{}.csv", method.name()));
    write_feature_csv(&path, &schema, &labels, &rows)?;
    write_json(
        &out.join(format!("features_{}.schema.json", method.name())),
        &schema,
    )?;
    println!(
        "{} rows x {} features -> {}",
        rows.len(),
        schema.len(),
        path.display()
    );
    Ok(())
}

struct Targets {
    labels: Vec<String>,
    coords: Vec<(f64, f64)>,
    splits: Vec<Option<Split>>,
}

fn read_targets(path: &Path) -> Result<Targets> {
    let mut r =
        csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let headers = r.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (li, xi, yi) = (
        col("label").ok_or_else(|| anyhow!("{}: no `label` column", path.display()))?,
        col("x_m").ok_or_else(|| anyhow!("{}: no `x_m` column", path.display()))?,
        col("y_m").ok_or_else(|| anyhow!("{}: no `y_m` column", path.display()))?,
    );
    let si = col("split");
    let mut t = Targets {
        labels: Vec::new(),
        coords: Vec::new(),
        splits: Vec::new(),
    };
    for rec in r.records() {
        let rec = rec?;
        t.labels.push(rec[li].to_string());
        t.coords.push((rec[xi].parse()?, rec[yi].parse()?));
        t.splits.push(match si.map(|i| &rec[i]) {
            Some("train") => Some(Split::Train),
            Some("test") => Some(Split::Test),
            _ => None,
        });
    }
    Ok(t)
}

/// Feature rows reordered to match the target labels.
fn align(features: &Path, targets: &Targets) -> Result<Vec<Vec<f64>>> {
    let (labels, rows) = lambmp::features::read_feature_csv(features)?;
    let index: HashMap<&str, usize> = labels
        .iter()
        .enumerate()
        .map(|(i, l)| (l.as_str(), i))
        .collect();
    targets
        .labels
        .iter()
        .map(|l| {
            index
                .get(l.as_str())
                .map(|i| rows[*i].clone())
                .ok_or_else(|| anyhow!("no feature row for `{l}`"))
        })
        .collect()
}

type Subset = (Vec<Vec<f64>>, Vec<(f64, f64)>, Vec<String>);

fn select(t: &Targets, rows: &[Vec<f64>], keep: impl Fn(Option<Split>) -> bool) -> Subset {
    let idx: Vec<usize> = (0..rows.len()).filter(|i| keep(t.splits[*i])).collect();
    (
        idx.iter().map(|i| rows[*i].clone()).collect(),
        idx.iter().map(|i| t.coords[*i]).collect(),
        idx.iter().map(|i| t.labels[*i].clone()).collect(),
    )
}

fn train_config(
    file: &FileConfig,
    seed: Option<u64>,
    epochs: Option<usize>,
    lr: Option<f64>,
) -> TrainConfig {
    let d = TrainConfig::default();
    TrainConfig {
        seed: pick(seed, file.seed, d.seed),
        max_epochs: pick(epochs, file.epochs, d.max_epochs),
        learning_rate: pick(lr, file.learning_rate, d.learning_rate),
        ..d
    }
}

fn train(a: &TrainArgs, file: &FileConfig, out: &Path) -> Result<()> {
    let targets = read_targets(&a.targets)?;
    let rows = align(&a.features, &targets)?;
    let (x, y, _) = select(&targets, &rows, |s| s != Some(Split::Test));
    let cfg = train_config(file, a.seed, a.epochs, a.lr);
    let trained = nn_train(&x, &y, &cfg)?;
    let path = a.model.clone().unwrap_or_else(|| out.join("model.json"));
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    save_model(&trained.model, &path)?;
    let h = &trained.loss_history;
    println!(
        "trained on {} cases, loss {:.3e} -> {:.3e}, model {}",
        x.len(),
        h[0],
        h[h.len() - 1],
        path.display()
    );
    Ok(())
}

fn eval(a: &EvalArgs, out: &Path) -> Result<()> {
    let model = load_model(&a.model)?;
    let targets = read_targets(&a.targets)?;
    let rows = align(&a.features, &targets)?;
    let ranges = coordinate_ranges(&targets.coords);
    let keep: Box<dyn Fn(Option<Split>) -> bool> = match a.split.as_str() {
        "all" => Box::new(|_| true),
        "train" => Box::new(|s| s != Some(Split::Test)),
        "test" => Box::new(|s| s == Some(Split::Test)),
        other => bail!("unknown split `{other}`"),
    };
    let (x, y, labels) = select(&targets, &rows, keep);
    if x.is_empty() {
        bail!("no cases in split `{}`", a.split);
    }
    let report = nn_evaluate(&model, &x, &y, &labels, ranges)?;
    fs::create_dir_all(out)?;
    write_json(&out.join("eval.json"), &report)?;
    println!(
        "{} cases: x error {:.2}%, y error {:.2}%",
        report.cases.len(),
        report.x_error_pct,
        report.y_error_pct
    );
    Ok(())
}

#[derive(Serialize)]
struct ReportRow {
    method: &'static str,
    coordinate: &'static str,
    train_error_pct: f64,
    test_error_pct: f64,
}

#[derive(Serialize)]
struct PredictionRow {
    method: &'static str,
    split: Split,
    label: String,
    x_true: f64,
    y_true: f64,
    x_pred: f64,
    y_pred: f64,
}

#[derive(Serialize)]
struct MethodSummary {
    method: Method,
    features: usize,
    initial_loss: f64,
    final_loss: f64,
    accepted_steps: usize,
    train: EvalReport,
    test: EvalReport,
}

fn pipeline(a: &PipelineArgs, file: &FileConfig, out: &Path) -> Result<()> {
    let cfg = db_config(file, a.seed, a.snr, false, None, None, None);
    let db = gen_database(&cfg)?;
    fs::create_dir_all(out)?;
    let manifest = write_database(&db, out.join("db"))?;
    write_targets(&out.join("db").join("targets.csv"), &manifest)?;
    let atom = make_tone_burst(&cfg.burst)?;
    let targets = db.targets();
    let labels: Vec<String> = db.cases.iter().map(|c| c.case.label.clone()).collect();
    let splits: Vec<Split> = db.cases.iter().map(|c| c.split).collect();
    let ranges = coordinate_ranges(&targets);
    let residuals = db.residuals();
    let tcfg = train_config(file, a.seed, a.epochs, None);

    let mut report = Vec::new();
    let mut predictions = Vec::new();
    let mut summaries = Vec::new();
    for method in [Method::Sampm, Method::Sacmpm] {
        let fcfg = feature_config(method, file, a.m, a.n, a.ridge);
        let (schema, rows) = case_features(&residuals, &atom, &fcfg)?;
        write_feature_csv(
            out.join(format!("features_{}.csv", method.name())),
            &schema,
            &labels,
            &rows,
        )?;
        let r = train_and_evaluate(&rows, &targets, &labels, &splits, ranges, &tcfg)?;
        save_model(
            &r.trained.model,
            out.join(format!("model_{}.json", method.name())),
        )?;
        for (coordinate, tr, te) in [
            ("x", r.train.x_error_pct, r.test.x_error_pct),
            ("y", r.train.y_error_pct, r.test.y_error_pct),
        ] {
            report.push(ReportRow {
                method: method.name(),
                coordinate,
                train_error_pct: tr,
                test_error_pct: te,
            });
        }
        for (split, ev) in [(Split::Train, &r.train), (Split::Test, &r.test)] {
            for c in &ev.cases {
                predictions.push(PredictionRow {
                    method: method.name(),
                    split,
                    label: c.label.clone(),
                    x_true: c.x_true,
                    y_true: c.y_true,
                    x_pred: c.x_pred,
                    y_pred: c.y_pred,
                });
            }
        }
        if a.svg {
            let pts = |ev: &EvalReport| -> Vec<(f64, f64)> {
                ev.cases
                    .iter()
                    .map(|c| (c.x_pred * 1e3, c.y_pred * 1e3))
                    .collect()
            };
            let truth: Vec<(f64, f64)> = r
                .test
                .cases
                .iter()
                .map(|c| (c.x_true * 1e3, c.y_true * 1e3))
                .collect();
            let svg = scatter_svg(
                &format!("{} predictions", method.name()),
                &[
                    ("train", pts(&r.train)),
                    ("test", pts(&r.test)),
                    ("test truth", truth),
                ],
            );
            fs::write(out.join(format!("predictions_{}.svg", method.name())), svg)?;
        }
        let h = &r.trained.loss_history;
        println!(
            "{:<7} features {:>4}  test x {:>6.2}%  test y {:>6.2}%",
            method.name(),
            schema.len(),
            r.test.x_error_pct,
            r.test.y_error_pct
        );
        summaries.push(MethodSummary {
            method,
            features: schema.len(),
            initial_loss: h[0],
            final_loss: h[h.len() - 1],
            accepted_steps: h.len() - 1,
            train: r.train,
            test: r.test,
        });
    }
    write_csv(&out.join("report.csv"), &report)?;
    write_csv(&out.join("predictions.csv"), &predictions)?;
    write_json(&out.join("report.json"), &summaries)?;
    Ok(())
}

/// Scatter plot reusing the line plot frame with markers only.
fn scatter_svg(title: &str, groups: &[(&str, Vec<(f64, f64)>)]) -> String {
    let series: Vec<Series> = groups
        .iter()
        .map(|(n, p)| Series {
            name: n,
            points: p.clone(),
        })
        .collect();
    let plot = line_plot(title, "x [mm]", "y [mm]", &series);
    // swap polylines for markers
    plot.lines()
        .map(|l| {
            if let Some(rest) = l.strip_prefix(r#"<polyline fill="none" stroke=""#) {
                let (color, tail) = rest.split_once('"').unwrap_or(("black", ""));
                let pts = tail
                    .split("points=\"")
                    .nth(1)
                    .unwrap_or("")
                    .trim_end_matches("\"/>");
                pts.split_whitespace()
                    .filter_map(|p| p.split_once(','))
                    .map(|(x, y)| format!(r#"<circle cx="{x}" cy="{y}" r="3" fill="{color}"/>"#))
                    .collect::<Vec<_>>()
                    .join("\n")
            } else {
                l.to_string()
            }
        })
        .collect::<Vec<_>>()
        .join("\n")
        + "\n"
}
