use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use gpuiseux::embed::{Expander, Expansion};
use gpuiseux::series::GenSeries;
use gpuiseux::value_group::{parse_element, GroupElement};

mod arith;
mod spec;
mod verify;

use spec::{Problem, ProblemSpec};

#[derive(Parser)]
#[command(name = "gpuiseux", version, about = "Generalized Puiseux expansions of roots of polynomials")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum, PartialEq, Eq)]
enum Format {
    Text,
    Records,
}

#[derive(clap::Args)]
struct RunOpts {
    /// Problem file
    spec: PathBuf,
    /// Stop after this many terms (overrides the file)
    #[arg(long)]
    budget_terms: Option<usize>,
    /// Stop once the precision reaches this value (overrides the file)
    #[arg(long)]
    prec: Option<String>,
    /// Close geometric exponent streams by their defining equation
    #[arg(long)]
    resolve_limits: bool,
    /// Write the step trace to this file
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    /// Samples per randomized check
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Add a spurious term to the result before checking
    #[arg(long, hide = true)]
    corrupt_series: Option<String>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Expand the root and print the result, chain and trace
    Expand(RunOpts),
    /// Expand and run the self-checks
    Verify(RunOpts),
    /// Evaluate a series calculator script
    Arith {
        file: PathBuf,
    },
    /// Print a problem file in normal form
    Normalize {
        spec: PathBuf,
    },
}

enum Fail {
    Parse(String),
    Engine(String),
}

fn read(path: &Path) -> Result<String, Fail> {
    fs::read_to_string(path).map_err(|e| Fail::Engine(format!("{}: {e}", path.display())))
}

fn load(opts: &RunOpts) -> Result<ProblemSpec, Fail> {
    let text = read(&opts.spec)?;
    let mut spec = ProblemSpec::parse(&text).map_err(|e| Fail::Parse(format!("{}:{e}", opts.spec.display())))?;
    if let Some(n) = opts.budget_terms {
        spec.budget_terms = Some(n);
    }
    if let Some(p) = &opts.prec {
        spec.prec = Some(p.clone());
    }
    if opts.resolve_limits {
        spec.resolve_limits = true;
    }
    if let Some(n) = opts.samples {
        spec.samples = n;
    }
    if let Some(s) = opts.seed {
        spec.seed = s;
    }
    Ok(spec)
}

fn quote(s: &str) -> String {
    if s.contains(char::is_whitespace) || s.is_empty() {
        format!("\"{s}\"")
    } else {
        s.to_string()
    }
}

fn render(exp: &Expansion, format: Format) -> String {
    let mut out = String::new();
    match format {
        Format::Text => {
            out.push_str(&format!("series: {}\nstatus: {}\n", exp.series, exp.status));
            if let Some(lp) = &exp.limit_poly {
                out.push_str(&format!("limit: {lp}\n"));
            }
            if !exp.residue.tower().stages().is_empty() {
                out.push_str(&format!("residue field: {}\n", exp.residue.tower().describe()));
            }
            out.push_str("chain:\n");
            for l in exp.chain.to_string().lines() {
                out.push_str(&format!("  {l}\n"));
            }
            out.push_str("trace:\n");
            for r in &exp.trace {
                out.push_str(&format!("  {r}\n"));
            }
        }
        Format::Records => {
            out.push_str(&format!("record=result series={} status={}", quote(&exp.series.to_string()), exp.status));
            if let Some(lp) = &exp.limit_poly {
                out.push_str(&format!(" limit={}", quote(&lp.to_string())));
            }
            out.push('\n');
            for (k, e) in exp.chain.entries().iter().enumerate() {
                out.push_str(&format!(
                    "record=chain index={} q={} beta={} b={} eps={} alpha={}\n",
                    k + 1,
                    quote(&e.q.to_string()),
                    quote(&e.beta.to_string()),
                    e.b,
                    quote(&e.eps.to_string()),
                    e.alpha
                ));
            }
            for r in &exp.trace {
                out.push_str(&format!(
                    "record=step beta={} coeff={} i_beta={} beta_plus={} branch={}\n",
                    quote(&r.beta.to_string()),
                    quote(&r.coeff.to_string()),
                    r.i_beta,
                    quote(&r.beta_plus.to_string()),
                    r.branch
                ));
            }
        }
    }
    out
}

fn corrupt(exp: &mut Expansion, e: &str) -> Result<(), Fail> {
    let ring = exp.series.ring().clone();
    let g: GroupElement = parse_element(ring.descriptor(), e).map_err(|err| Fail::Parse(format!("--corrupt-series: {err}")))?;
    let bumped = exp.series.add(&GenSeries::var_pow(&ring, g));
    exp.series = bumped.with_prec(exp.series.prec().clone());
    Ok(())
}

fn run(opts: &RunOpts, checks: bool) -> Result<bool, Fail> {
    let spec = load(opts)?;
    let problem = Problem::build(&spec).map_err(Fail::Parse)?;
    let mut ex = match (&problem.poly, problem.chain) {
        (Some(f), _) => Expander::from_poly(f, problem.lower.clone(), problem.residue).map_err(|e| Fail::Engine(e.to_string()))?,
        (None, Some(c)) => Expander::from_chain(c, problem.residue),
        (None, None) => return Err(Fail::Parse("nothing to expand".into())),
    };
    let mut exp = ex.expand(&problem.budget).map_err(|e| Fail::Engine(e.to_string()))?;
    if let Some(path) = &opts.trace {
        fs::write(path, exp.trace_text()).map_err(|e| Fail::Engine(format!("{}: {e}", path.display())))?;
    }
    if let Some(e) = &opts.corrupt_series {
        corrupt(&mut exp, e)?;
    }
    print!("{}", render(&exp, opts.format));
    if !(checks || spec.verify) {
        return Ok(true);
    }
    let lines = verify::run_all(&mut ex, &exp, spec.samples, spec.seed);
    let ok = lines.iter().all(|l| l.pass);
    for l in &lines {
        println!("{l}");
    }
    println!("verify={}", if ok { "PASS" } else { "FAIL" });
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.cmd {
        Cmd::Expand(o) => run(o, false),
        Cmd::Verify(o) => run(o, true),
        Cmd::Arith { file } => read(file).and_then(|text| match arith::run(&text) {
            Ok(lines) => {
                for l in lines {
                    println!("{l}");
                }
                Ok(true)
            }
            Err(arith::ArithError::Parse(e)) => Err(Fail::Parse(format!("{}:{e}", file.display()))),
            Err(arith::ArithError::Eval(e)) => Err(Fail::Engine(e)),
        }),
        Cmd::Normalize { spec } => read(spec).and_then(|text| {
            let s = ProblemSpec::parse(&text).map_err(|e| Fail::Parse(format!("{}:{e}", spec.display())))?;
            print!("{s}");
            Ok(true)
        }),
    };
    match res {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Fail::Engine(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Fail::Parse(m)) => {
            eprintln!("parse error: {m}");
            ExitCode::from(2)
        }
    }
}
