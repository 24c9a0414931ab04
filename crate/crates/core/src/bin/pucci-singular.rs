use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use pucci_singular::barriers::{certify_sign, make_barrier, BarrierKind, FreeParams};
use pucci_singular::classifier::{classify, ClassifyOptions};
use pucci_singular::comparison::{check_annulus, check_ball, ComparisonOptions, RATIO_TOL};
use pucci_singular::constants::{classify_regime, derive_constants, ConstantSet, ProblemParams, RegimeKind, DEFAULT_EQ_TOL};
use pucci_singular::emden_fowler::{equilibria, integrate, EfState, IntegrateOptions, TimeDirection};
use pucci_singular::io::{read_columns, read_radial, to_json, write_columns, write_radial, write_trajectory};
use pucci_singular::monotone_scheme::{run_scheme, SchemeCase, SchemeConfig};
use pucci_singular::radial_pucci::{residual_main, LogGrid, RadialFunction};
use pucci_singular::Error;

#[derive(Parser)]
#[command(name = "pucci-singular", version, about = "Radial singular solutions of Pucci equations with a Hardy potential")]
struct Cli {
    /// Seed for randomized runs; recorded in JSON outputs.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Copy)]
struct Ellipticity {
    #[arg(long)]
    lambda: f64,
    #[arg(long = "Lambda")]
    big_lambda: f64,
    #[arg(long = "N")]
    dim: u32,
}

#[derive(Args, Clone, Copy)]
struct Params {
    #[command(flatten)]
    ell: Ellipticity,
    #[arg(long)]
    mu: f64,
    #[arg(long)]
    p: f64,
}

impl Params {
    fn constants(&self) -> Result<ConstantSet, Error> {
        let params = ProblemParams::new(self.ell.lambda, self.ell.big_lambda, self.ell.dim, self.mu, self.p)?;
        derive_constants(&params)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Every closed-form constant as a flat JSON object.
    Constants {
        #[command(flatten)]
        ell: Ellipticity,
        #[arg(long)]
        mu: f64,
        #[arg(long)]
        p: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_EQ_TOL)]
        eq_tol: f64,
    },
    /// Builds and certifies one catalogue barrier.
    Barrier {
        #[arg(long)]
        kind: BarrierKind,
        #[command(flatten)]
        params: Params,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        a: Option<f64>,
        #[arg(long)]
        b: Option<f64>,
        #[arg(long)]
        c: Option<f64>,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        r0: Option<f64>,
        #[arg(long)]
        u_r0: Option<f64>,
        #[arg(long, default_value_t = 2048)]
        nodes: usize,
        #[arg(long, default_value_t = 1e-8)]
        r_min: f64,
        /// Also write r,value samples here.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Residual of the main equation for sampled data.
    Residual {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        params: Params,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Emden–Fowler dynamics.
    Ef {
        #[command(subcommand)]
        command: EfCommand,
    },
    /// Monotone construction of a singular solution.
    Scheme {
        #[arg(long)]
        case: SchemeCase,
        #[command(flatten)]
        params: Params,
        #[arg(long, default_value_t = 24)]
        n_max: u32,
        /// Nodes on the innermost annulus [2^-n_max, 1].
        #[arg(long, default_value_t = 3072)]
        nodes: usize,
        #[arg(long, default_value_t = 4)]
        trim_octaves: u32,
        /// Where to write the limit as r,u.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Asymptotic class of sampled data.
    Classify {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        params: Params,
        #[arg(long, default_value_t = 3.0)]
        tail_decades: f64,
        #[arg(long)]
        slope_tol: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_EQ_TOL)]
        eq_tol: f64,
        #[arg(long)]
        check_regime: bool,
    },
    /// r, r^q u for plotting normalized limits.
    Scaled {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        exponent: f64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Comparison harness for a sub-/super-solution pair.
    Compare {
        #[arg(long)]
        u: PathBuf,
        #[arg(long)]
        v: PathBuf,
        #[arg(long)]
        mode: CompareMode,
        #[command(flatten)]
        params: Params,
        #[arg(long)]
        c1g: Option<f64>,
        #[arg(long)]
        c2g: Option<f64>,
        #[arg(long, default_value_t = RATIO_TOL)]
        ratio_tol: f64,
    },
    /// Regime, constants and scheme classification over a (mu, p) grid.
    Sweep {
        #[command(flatten)]
        ell: Ellipticity,
        /// Comma list of values or start:stop:count ranges.
        #[arg(long, allow_hyphen_values = true)]
        mu_values: String,
        #[arg(long, allow_hyphen_values = true)]
        p_values: String,
        #[arg(long, env = "PUCCI_SINGULAR_JOBS")]
        jobs: Option<usize>,
        #[arg(long, default_value_t = 24)]
        n_max: u32,
        #[arg(long, default_value_t = 3072)]
        nodes: usize,
        #[arg(long, default_value_t = DEFAULT_EQ_TOL)]
        eq_tol: f64,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum EfCommand {
    /// Integrates from (x0, xp0), writing t,x,xp.
    Integrate {
        #[command(flatten)]
        params: Params,
        #[arg(long)]
        x0: f64,
        #[arg(long, allow_hyphen_values = true)]
        xp0: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        t0: f64,
        #[arg(long)]
        t_span: f64,
        #[arg(long, value_enum, default_value_t = Dir::Forward)]
        direction: Dir,
        #[arg(long, default_value_t = 1e-10)]
        rel_tol: f64,
        #[arg(long, default_value_t = 1e-14)]
        abs_tol: f64,
        #[arg(long, default_value_t = 1e12)]
        x_max: f64,
        #[arg(long, default_value_t = 1e-300)]
        x_min: f64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Equilibria and their eigenvalues.
    Equilibria {
        #[command(flatten)]
        params: Params,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Dir {
    Forward,
    Backward,
}

#[derive(Clone, Copy, ValueEnum)]
enum CompareMode {
    Annulus,
    Ball,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

enum Failure {
    Domain(Error),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Domain(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

fn sink(path: &Option<PathBuf>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| Failure::Io(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn open(path: &Path) -> Result<File, Failure> {
    File::open(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn load(path: &Path) -> Result<RadialFunction, Failure> {
    Ok(read_radial(open(path)?)?)
}

fn emit(mut value: Value, seed: u64) -> Result<(), Failure> {
    if let Value::Object(m) = &mut value {
        m.insert("seed".into(), json!(seed));
    }
    let mut out = io::stdout().lock();
    writeln!(out, "{}", to_json(&value))?;
    Ok(())
}

fn value<T: serde::Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("serializable")
}

/// Flat object: the parameters next to the derived constants.
fn flat_constants(c: &ConstantSet) -> Value {
    let mut v = value(c);
    let m = v.as_object_mut().unwrap();
    if let Some(Value::Object(params)) = m.remove("params") {
        for (k, x) in params {
            m.insert(k, x);
        }
    }
    v
}

fn parse_values(spec: &str) -> Result<Vec<f64>, String> {
    let mut out = Vec::new();
    for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let parts: Vec<&str> = item.split(':').collect();
        let num = |s: &str| s.parse::<f64>().map_err(|_| format!("`{s}` is not a number"));
        match parts.as_slice() {
            [x] => out.push(num(x)?),
            [a, b, n] => {
                let (a, b) = (num(a)?, num(b)?);
                let n: usize = n.parse().map_err(|_| format!("`{n}` is not a count"))?;
                match n {
                    0 => {}
                    1 => out.push(a),
                    _ => out.extend((0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64)),
                }
            }
            _ => return Err(format!("cannot parse `{item}`; use a value or start:stop:count")),
        }
    }
    Ok(out)
}

#[derive(serde::Serialize)]
struct SweepRow {
    mu: f64,
    p: f64,
    regime: Option<RegimeKind>,
    p_star: Option<f64>,
    p_star_star: Option<f64>,
    k: Option<f64>,
    k_bar: Option<f64>,
    case: Option<String>,
    variant: Option<String>,
    exponent: Option<f64>,
    constant: Option<f64>,
    error: Option<String>,
    message: Option<String>,
}

fn sweep_row(ell: Ellipticity, mu: f64, p: f64, cfg: &SchemeConfig, eq_tol: f64) -> SweepRow {
    let mut row = SweepRow {
        mu,
        p,
        regime: None,
        p_star: None,
        p_star_star: None,
        k: None,
        k_bar: None,
        case: None,
        variant: None,
        exponent: None,
        constant: None,
        error: None,
        message: None,
    };
    let run = |row: &mut SweepRow| -> Result<(), Error> {
        let c = Params { ell, mu, p }.constants()?;
        row.p_star = c.p_star;
        row.p_star_star = c.p_star_star;
        row.k = c.k_opt;
        row.k_bar = c.k_bar;
        let regime = classify_regime(p, &c, eq_tol)?;
        row.regime = Some(regime.kind);
        let case = match regime.kind {
            RegimeKind::Subcritical => SchemeCase::TauPlus,
            RegimeKind::Intermediate => SchemeCase::TauMinus,
            RegimeKind::LogCritical => SchemeCase::LogCritical,
            RegimeKind::Supercritical => return Ok(()),
        };
        row.case = Some(case.to_string());
        let res = run_scheme(case, &c, cfg)?;
        let class = classify(
            &res.limit,
            &c,
            &ClassifyOptions {
                eq_tol,
                ..ClassifyOptions::default()
            },
        )?;
        row.variant = Some(class.variant.to_string());
        row.exponent = Some(class.exponent);
        row.constant = Some(class.constant);
        Ok(())
    };
    if let Err(e) = run(&mut row) {
        row.error = Some(e.kind().to_string());
        row.message = Some(e.to_string());
    }
    row
}

fn write_sweep_csv<W: Write>(w: &mut W, rows: &[SweepRow]) -> io::Result<()> {
    let num = |x: Option<f64>| x.map(pucci_singular::io::format_f64).unwrap_or_default();
    writeln!(w, "mu,p,regime,p_star,p_star_star,k,k_bar,case,variant,exponent,constant,error")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            num(Some(r.mu)),
            num(Some(r.p)),
            r.regime.map(|k| k.to_string()).unwrap_or_default(),
            num(r.p_star),
            num(r.p_star_star),
            num(r.k),
            num(r.k_bar),
            r.case.clone().unwrap_or_default(),
            r.variant.clone().unwrap_or_default(),
            num(r.exponent),
            num(r.constant),
            r.error.clone().unwrap_or_default(),
        )?;
    }
    Ok(())
}

fn scheme_config(n_max: u32, nodes: usize, trim_octaves: u32) -> SchemeConfig {
    SchemeConfig {
        n_max,
        nodes_per_octave: ((nodes as f64 / n_max.max(1) as f64).round() as usize).max(1),
        trim_octaves,
        ..SchemeConfig::default()
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let seed = cli.seed;
    match cli.command {
        Command::Constants { ell, mu, p, eq_tol } => {
            let params = ProblemParams::new(ell.lambda, ell.big_lambda, ell.dim, mu, p.unwrap_or(f64::NAN))?;
            let c = derive_constants(&params)?;
            let mut v = flat_constants(&c);
            if let Some(p) = p {
                let regime = classify_regime(p, &c, eq_tol)?;
                v["regime"] = value(&regime.kind);
            }
            emit(v, seed)
        }
        Command::Barrier {
            kind,
            params,
            delta,
            eps,
            a,
            b,
            c,
            gamma,
            r0,
            u_r0,
            nodes,
            r_min,
            output,
        } => {
            let consts = params.constants()?;
            let free = FreeParams {
                delta,
                eps,
                a,
                b,
                c,
                gamma,
                r0,
                u_r0,
                direction: None,
            };
            let barrier = make_barrier(kind, &consts, &free)?;
            let grid = LogGrid::new(r_min, barrier.validity_radius, nodes)?;
            let cert = certify_sign(&barrier, &grid, &consts)?;
            if output.is_some() {
                let f = barrier.sample(&grid)?;
                let mut w = sink(&output)?;
                write_columns(&mut w, &["r", "value"], &[f.r(), &f.u])?;
                w.flush()?;
            }
            emit(
                json!({
                    "kind": kind.to_string(),
                    "direction": value(&barrier.direction),
                    "equation": value(&barrier.equation),
                    "params": value(&barrier.params),
                    "constraints": value(&barrier.constraints),
                    "validity_radius": barrier.validity_radius,
                    "certificate": value(&cert),
                }),
                seed,
            )
        }
        Command::Residual { input, params, output } => {
            let consts = params.constants()?;
            let u = load(&input)?;
            let res = residual_main(&u, &consts.params)?;
            let mut w = sink(&output)?;
            write_columns(&mut w, &["r", "residual"], &[u.r(), &res.value])?;
            w.flush()?;
            Ok(())
        }
        Command::Ef { command } => match command {
            EfCommand::Integrate {
                params,
                x0,
                xp0,
                t0,
                t_span,
                direction,
                rel_tol,
                abs_tol,
                x_max,
                x_min,
                output,
            } => {
                let consts = params.constants()?;
                if x0 < 0.0 {
                    return Err(Error::NegativeX(x0).into());
                }
                let opts = IntegrateOptions {
                    rel_tol,
                    abs_tol,
                    x_max,
                    x_min,
                    ..IntegrateOptions::default()
                };
                let dir = match direction {
                    Dir::Forward => TimeDirection::Forward,
                    Dir::Backward => TimeDirection::Backward,
                };
                let traj = integrate(EfState { t: t0, x: x0, xp: xp0 }, dir, t_span, &consts, &opts)?;
                let mut w = sink(&output)?;
                write_trajectory(&mut w, &traj.states)?;
                w.flush()?;
                Ok(())
            }
            EfCommand::Equilibria { params } => {
                let consts = params.constants()?;
                emit(json!({ "equilibria": value(&equilibria(&consts)) }), seed)
            }
        },
        Command::Scheme {
            case,
            params,
            n_max,
            nodes,
            trim_octaves,
            output,
        } => {
            let consts = params.constants()?;
            let cfg = scheme_config(n_max, nodes, trim_octaves);
            let res = run_scheme(case, &consts, &cfg)?;
            if output.is_some() {
                let mut w = sink(&output)?;
                write_radial(&mut w, &res.limit, false)?;
                w.flush()?;
            }
            emit(
                json!({
                    "case": case.to_string(),
                    "sub": res.sub.kind.to_string(),
                    "super": res.sup.kind.to_string(),
                    "n_max": cfg.n_max,
                    "nodes_per_octave": cfg.nodes_per_octave,
                    "limit_nodes": res.limit.len(),
                    "limit_r_min": res.limit.grid.r_min(),
                    "certificate": value(&res.certificate),
                }),
                seed,
            )
        }
        Command::Classify {
            input,
            params,
            tail_decades,
            slope_tol,
            eq_tol,
            check_regime,
        } => {
            let consts = params.constants()?;
            let u = load(&input)?;
            let regime = classify_regime(params.p, &consts, eq_tol)?;
            if regime.kind == RegimeKind::LogCritical && u.grid.r_min() > 1e-10 {
                eprintln!(
                    "warning: log-critical fits need deep tails; r_min = {:e} > 1e-10",
                    u.grid.r_min()
                );
            }
            let opts = ClassifyOptions {
                tail_decades,
                slope_tol,
                eq_tol,
                check_regime,
            };
            emit(value(&classify(&u, &consts, &opts)?), seed)
        }
        Command::Scaled { input, exponent, output } => {
            let (header, cols) = read_columns(open(&input)?)?;
            if header.len() < 2 || header[0] != "r" || header[1] != "u" {
                return Err(Error::InvalidInput("expected leading columns r,u".into()).into());
            }
            let scaled: Vec<f64> = cols[0].iter().zip(&cols[1]).map(|(r, u)| r.powf(exponent) * u).collect();
            let mut w = sink(&output)?;
            write_columns(&mut w, &["r", "scaled"], &[&cols[0], &scaled])?;
            w.flush()?;
            Ok(())
        }
        Command::Compare {
            u,
            v,
            mode,
            params,
            c1g,
            c2g,
            ratio_tol,
        } => {
            let consts = params.constants()?;
            let (u, v) = (load(&u)?, load(&v)?);
            let opts = ComparisonOptions {
                ratio_tol,
                ..ComparisonOptions::default()
            };
            let report = match mode {
                CompareMode::Annulus => check_annulus(&u, &v, &consts.params, &opts)?,
                CompareMode::Ball => {
                    let growth = match (c1g, c2g) {
                        (Some(a), Some(b)) => Some((a, b)),
                        (None, None) => None,
                        _ => return Err(Error::InvalidInput("give both --c1g and --c2g or neither".into()).into()),
                    };
                    check_ball(&u, &v, &consts.params, growth, &opts)?
                }
            };
            emit(value(&report), seed)
        }
        Command::Sweep {
            ell,
            mu_values,
            p_values,
            jobs,
            n_max,
            nodes,
            eq_tol,
            format,
            output,
        } => {
            ProblemParams::new(ell.lambda, ell.big_lambda, ell.dim, f64::NAN, f64::NAN)?;
            let mus = parse_values(&mu_values).map_err(Error::InvalidInput)?;
            let ps = parse_values(&p_values).map_err(Error::InvalidInput)?;
            let points: Vec<(f64, f64)> = mus.iter().flat_map(|&m| ps.iter().map(move |&p| (m, p))).collect();
            let cfg = scheme_config(n_max, nodes, 4);
            let jobs = jobs
                .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
                .clamp(1, points.len().max(1));
            let slots: Mutex<Vec<Option<SweepRow>>> = Mutex::new((0..points.len()).map(|_| None).collect());
            let next = AtomicUsize::new(0);
            std::thread::scope(|s| {
                for _ in 0..jobs {
                    s.spawn(|| loop {
                        let i = next.fetch_add(1, Ordering::Relaxed);
                        let Some(&(mu, p)) = points.get(i) else { break };
                        let row = sweep_row(ell, mu, p, &cfg, eq_tol);
                        slots.lock().unwrap()[i] = Some(row);
                    });
                }
            });
            let rows: Vec<SweepRow> = slots.into_inner().unwrap().into_iter().map(Option::unwrap).collect();
            let mut w = sink(&output)?;
            match format {
                Format::Csv => write_sweep_csv(&mut w, &rows)?,
                Format::Json => writeln!(w, "{}", to_json(&json!({ "rows": value(&rows), "seed": seed })))?,
            }
            w.flush()?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (kind, message) = match f {
                Failure::Domain(e) => (e.kind().to_string(), e.to_string()),
                Failure::Io(m) => ("Io".to_string(), m),
            };
            eprintln!("{}", json!({ "error": kind, "message": message }));
            ExitCode::from(1)
        }
    }
}
