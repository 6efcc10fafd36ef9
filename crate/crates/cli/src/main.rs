//! `qwscatter`: band tables, root sweeps, S-matrix sweeps, bound states,
//! packet probes and the validation suite for a coin-field config.

use std::f64::consts::{FRAC_PI_2, TAU};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qwscatter::config::load_field;
use qwscatter::dispersion::{self, bands, classify, BandKind};
use qwscatter::stationary::{self, BoundStateOptions};
use qwscatter::timedomain::{self, WaveSign};
use qwscatter::validate::{self, ValidateOptions};
use qwscatter::{fmt_f64, smatrix, CoinField, Error};

#[derive(Parser, Debug)]
#[command(name = "qwscatter", version, about = "Scattering theory of position-dependent quantum walks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Band and threshold table.
    Bands(Common),
    /// On-shell momenta, velocities and Jacobians over a θ grid.
    Roots(Common),
    /// Transfer-matrix and resolvent S-matrix sweep.
    Smatrix(Common),
    /// Gap bound states with a dense ring cross-check.
    Eigen {
        #[command(flatten)]
        common: Common,
        /// Gap scan points per gap.
        #[arg(long, default_value_t = 2000)]
        resolution: usize,
        /// Ring size of the dense cross-check; 0 skips it.
        #[arg(long, default_value_t = 2000)]
        ring_sites: usize,
    },
    /// Gaussian packet scattering and wave-operator probe.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = timedomain::DEFAULT_SIGMA)]
        sigma: f64,
        /// Carrier momentum ξ₀.
        #[arg(long, default_value_t = FRAC_PI_2)]
        xi0: f64,
        #[arg(long, default_value_t = 2)]
        branch: u8,
        /// Scattering time T; the packet runs for 2T steps.
        #[arg(long)]
        time: Option<i64>,
        /// Times for the wave-operator Cauchy defects.
        #[arg(long, value_delimiter = ',', default_value = "200,400,800")]
        times: Vec<i64>,
        #[arg(long, default_value_t = timedomain::DEFAULT_RING)]
        ring_sites: usize,
        /// Also write the per-step density CSV (needs --out).
        #[arg(long)]
        density: bool,
    },
    /// Property suite; runs the bundled corpus when no config is given.
    Validate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 2000)]
        ring_sites: usize,
    },
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Coin-field JSON config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; artifacts go to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    theta_min: Option<f64>,
    #[arg(long)]
    theta_max: Option<f64>,
    /// Grid points (per band for band sweeps).
    #[arg(long)]
    steps: Option<usize>,
    /// Closest approach to a band threshold, in radians.
    #[arg(long)]
    edge_margin: Option<f64>,
    #[arg(long, env = "QWSCATTER_THREADS")]
    threads: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Validated run parameters shared by all subcommands.
struct RunConfig {
    field: Option<CoinField>,
    out: Option<PathBuf>,
    range: Option<(f64, f64)>,
    steps: Option<usize>,
    edge_margin: Option<f64>,
    seed: u64,
}

enum Failure {
    Usage(String),
    Compute(Error),
    Io(String),
    Validation,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Compute(e)
    }
}

type Outcome = std::result::Result<(), Failure>;

impl RunConfig {
    fn new(c: &Common, needs_field: bool) -> std::result::Result<Self, Failure> {
        let field = match &c.config {
            Some(p) => Some(load_field(p)?),
            None if needs_field => return Err(Failure::Usage("--config FILE is required".into())),
            None => None,
        };
        let range = match (c.theta_min, c.theta_max) {
            (None, None) => None,
            (lo, hi) => {
                let (lo, hi) = (lo.unwrap_or(0.0), hi.unwrap_or(TAU));
                if !(0.0 <= lo && lo < hi && hi <= TAU) {
                    return Err(Failure::Usage(format!(
                        "theta range [{lo}, {hi}) must satisfy 0 <= theta-min < theta-max <= 2π"
                    )));
                }
                Some((lo, hi))
            }
        };
        if let Some(m) = c.edge_margin {
            if !(m > 0.0 && m.is_finite()) {
                return Err(Failure::Usage(format!("--edge-margin must be positive, got {m}")));
            }
        }
        if c.steps == Some(0) {
            return Err(Failure::Usage("--steps must be positive".into()));
        }
        Ok(RunConfig { field, out: c.out.clone(), range, steps: c.steps, edge_margin: c.edge_margin, seed: c.seed })
    }

    fn field(&self) -> &CoinField {
        self.field.as_ref().expect("field checked at load")
    }

    /// `steps` points of `[lo, hi)`.
    fn uniform(&self, default_steps: usize) -> Vec<f64> {
        let (lo, hi) = self.range.unwrap_or((0.0, TAU));
        let n = self.steps.unwrap_or(default_steps);
        (0..n).map(|k| lo + (hi - lo) * k as f64 / n as f64).collect()
    }

    /// Sends each artifact to its file under `--out`, or the first one to stdout.
    fn emit(&self, artifacts: &[(&str, String)]) -> Outcome {
        match &self.out {
            None => {
                print!("{}", artifacts[0].1);
                Ok(())
            }
            Some(dir) => {
                fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))?;
                for (name, body) in artifacts {
                    let path = dir.join(name);
                    fs::write(&path, body).map_err(|e| io_failure(&path, e))?;
                    println!("{}", path.display());
                }
                Ok(())
            }
        }
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::Io(format!("{}: {e}", path.display()))
}

fn bands_cmd(rc: &RunConfig) -> Outcome {
    let bs = bands(rc.field().params());
    let gaps = bs.gaps();
    let mut csv = String::from("name,start,end,width\n");
    for (name, b) in [("band1", bs.band1), ("band2", bs.band2), ("gap1", gaps[0]), ("gap2", gaps[1])] {
        csv.push_str(&format!("{name},{},{},{}\n", fmt_f64(b.start), fmt_f64(b.end), fmt_f64(b.width())));
    }
    let json = format!(
        "{{\n  \"band1\": [{}, {}],\n  \"band2\": [{}, {}],\n  \"thresholds\": [{}]\n}}\n",
        fmt_f64(bs.band1.start),
        fmt_f64(bs.band1.end),
        fmt_f64(bs.band2.start),
        fmt_f64(bs.band2.end),
        bs.thresholds.map(fmt_f64).join(", ")
    );
    rc.emit(&[("bands.csv", csv), ("bands.json", json)])
}

fn roots_cmd(rc: &RunConfig) -> Outcome {
    let grid = rc.uniform(1000);
    rc.emit(&[("roots.csv", dispersion::root_sweep_csv(rc.field().params(), &grid))])
}

fn smatrix_cmd(rc: &RunConfig) -> Outcome {
    let field = rc.field();
    let margin = rc.edge_margin.unwrap_or(1e-3);
    let grid = match rc.range {
        None => smatrix::band_grid(field, rc.steps.unwrap_or(200), margin),
        Some(_) => {
            let bs = bands(field.params());
            let all = rc.uniform(400);
            let kept: Vec<f64> = all
                .iter()
                .copied()
                .filter(|&t| {
                    let p = classify(t, &bs);
                    matches!(p.kind, BandKind::Band1 | BandKind::Band2) && p.margin >= margin
                })
                .collect();
            if kept.len() < all.len() {
                log::warn!("dropped {} grid angles in gaps or within {margin} of a threshold", all.len() - kept.len());
            }
            kept
        }
    };
    let rows = smatrix::sweep(&grid, field);
    rc.emit(&[("smatrix.csv", smatrix::sweep_csv(&rows)), ("smatrix.json", smatrix::sweep_json(&rows))])
}

fn eigen_cmd(rc: &RunConfig, resolution: usize, ring_sites: usize) -> Outcome {
    let opts = BoundStateOptions {
        resolution,
        ring_sites,
        edge_margin: rc.edge_margin.unwrap_or(BoundStateOptions::default().edge_margin),
    };
    let report = stationary::bound_state_search_with(rc.field(), &opts)?;
    for w in &report.warnings {
        log::warn!("{w}");
    }
    let mut artifacts = vec![("bound_states.json".to_string(), stationary::bound_states_json(&report))];
    for (k, s) in report.states.iter().enumerate() {
        if let Some(u) = &s.eigenvector {
            artifacts.push((format!("eigenfunction_{k}.csv"), stationary::eigenfunction_csv(u)));
        }
    }
    let refs: Vec<(&str, String)> = artifacts.iter().map(|(n, b)| (n.as_str(), b.clone())).collect();
    rc.emit(&refs)
}

#[allow(clippy::too_many_arguments)]
fn simulate_cmd(
    rc: &RunConfig,
    sigma: f64,
    xi0: f64,
    branch: u8,
    time: Option<i64>,
    times: &[i64],
    ring_sites: usize,
    density: bool,
) -> Outcome {
    let field = rc.field();
    let spec = timedomain::launch(field, sigma, xi0, branch)?;
    let mut probe = timedomain::scattering_probe(field, &spec, time, ring_sites)?;
    let mut times = times.to_vec();
    times.sort_unstable();
    times.dedup();
    if !times.is_empty() {
        let wave = timedomain::wave_operator_probe(field, &spec, &times, WaveSign::Plus, ring_sites)?;
        probe.times = wave.times;
        probe.cauchy_defects = wave.cauchy_defects;
        probe.series_deviation = wave.series_deviation;
        probe.norm_drift = probe.norm_drift.max(wave.norm_drift);
    }
    let mut artifacts = vec![("probe.json", probe.to_json())];
    if density {
        if rc.out.is_none() {
            return Err(Failure::Usage("--density needs --out DIR".into()));
        }
        let psi = timedomain::gaussian_packet(&spec, field.params())?;
        let steps = 2 * time.unwrap_or(probe.times.first().copied().unwrap_or(0).max(1));
        let ring = timedomain::Ring::centred(field, ring_sites);
        artifacts.push(("density.csv", timedomain::density_csv(field, &psi, steps, ring, 1e-10)?));
    }
    rc.emit(&artifacts)
}

fn validate_cmd(rc: &RunConfig, c: &Common, ring_sites: usize) -> Outcome {
    let opts = ValidateOptions {
        seed: rc.seed,
        ring_sites,
        edge_margin: rc.edge_margin.unwrap_or(ValidateOptions::default().edge_margin),
        angles_per_band: rc.steps.unwrap_or(ValidateOptions::default().angles_per_band),
    };
    let report = match &rc.field {
        None => validate::run_corpus(&opts),
        Some(f) => {
            let name = c
                .config
                .as_ref()
                .and_then(|p| p.file_stem())
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "config".into());
            validate::run(&[(name, f.clone())], &opts)
        }
    };
    if rc.out.is_some() {
        print!("{}", report.to_text());
    }
    rc.emit(&[("validate.txt", report.to_text()), ("validate.json", report.to_json())])?;
    if report.all_passed() {
        Ok(())
    } else {
        Err(Failure::Validation)
    }
}

fn common(cmd: &Command) -> &Common {
    match cmd {
        Command::Bands(c) | Command::Roots(c) | Command::Smatrix(c) => c,
        Command::Eigen { common, .. } | Command::Simulate { common, .. } | Command::Validate { common, .. } => common,
    }
}

fn run(cli: &Cli) -> Outcome {
    let c = common(&cli.command);
    // dense kernels split work by thread count; keep them sequential so output bytes do not
    faer::set_global_parallelism(faer::Par::Seq);
    if let Some(n) = c.threads {
        if n == 0 {
            return Err(Failure::Usage("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Usage(format!("thread pool: {e}")))?;
    }
    let needs_field = !matches!(cli.command, Command::Validate { .. });
    let rc = RunConfig::new(c, needs_field)?;
    match &cli.command {
        Command::Bands(_) => bands_cmd(&rc),
        Command::Roots(_) => roots_cmd(&rc),
        Command::Smatrix(_) => smatrix_cmd(&rc),
        Command::Eigen { resolution, ring_sites, .. } => eigen_cmd(&rc, *resolution, *ring_sites),
        Command::Simulate { sigma, xi0, branch, time, times, ring_sites, density, .. } => {
            simulate_cmd(&rc, *sigma, *xi0, *branch, *time, times, *ring_sites, *density)
        }
        Command::Validate { ring_sites, .. } => validate_cmd(&rc, c, *ring_sites),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation) => {
            eprintln!("error[validation-failed]: one or more checks failed");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error[usage]: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error[io]: {msg}");
            ExitCode::from(4)
        }
        Err(Failure::Compute(e)) => {
            eprintln!("error[{}]: {e}", e.code());
            match e {
                Error::Config(_) | Error::InvalidParams(_) | Error::NotUnitary { .. } | Error::AmplitudeBound { .. } => {
                    ExitCode::from(2)
                }
                _ => ExitCode::from(3),
            }
        }
    }
}
