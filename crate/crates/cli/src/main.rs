use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use soficdim::lab::config::ExperimentConfig;
use soficdim::lab::pipeline;
use soficdim::lab::report::{write_all_atomic, DimensionReport};
use soficdim::lab::standalone::{family_brackets, sofic_check, FamilyFile};
use soficdim::{Error, ErrorCategory, Result};

/// Sofic dimension experiments.
#[derive(Debug, Parser)]
#[command(name = "soficdim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Multiplicativity and freeness defects of the configured levels.
    SoficCheck(Common),
    /// ε-dimension brackets of a vector family file.
    Epsdim(Common),
    /// First l^p cohomology of a free group.
    Betti(Common),
    /// regular-lp, finite-group-rep or z-rotation experiments.
    Dimexp(Common),
    /// Schatten-class targets.
    Schatten(Common),
}

#[derive(Debug, Args)]
struct Common {
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// JSON report path; CSV and timing files go next to it.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Overrides the configured levels, e.g. "100,200,400".
    #[arg(long, value_name = "D1,D2,...", value_delimiter = ',')]
    levels: Option<Vec<usize>>,
    #[arg(long)]
    quiet: bool,
}

fn load(args: &Common) -> Result<ExperimentConfig> {
    let mut c = ExperimentConfig::load(&args.config)?;
    if let Some(s) = args.seed {
        c.seed = s;
    }
    if let Some(l) = &args.levels {
        c.approximation.levels = l.clone();
    }
    c.validate()?;
    Ok(c)
}

fn out_path(args: &Common, configured: Option<&Path>, fallback: &str) -> PathBuf {
    args.out
        .clone()
        .or_else(|| configured.map(Path::to_path_buf))
        .unwrap_or_else(|| PathBuf::from(format!("{fallback}.json")))
}

fn print_levels(r: &DimensionReport) {
    for l in &r.levels {
        let rung = l.finest();
        for b in &rung.brackets {
            println!(
                "{} d={} eps={} delta={} bracket=[{},{}] normalized=[{:.6},{:.6}] pass={:.4}",
                r.experiment,
                l.degree,
                b.epsilon,
                rung.delta,
                b.bracket.lower,
                b.bracket.upper,
                b.normalized.lower,
                b.normalized.upper,
                rung.pass_fraction
            );
        }
    }
}

fn dimension(args: &Common, accept: &[&str], name: &str) -> Result<()> {
    let c = load(args)?;
    if !accept.contains(&c.action.kind()) {
        return Err(Error::Config(format!(
            "{name} cannot run action {}; expected one of {}",
            c.action.kind(),
            accept.join(", ")
        )));
    }
    let r = pipeline::run(&c)?;
    r.write(&out_path(args, c.output.as_deref(), &c.id))?;
    if !args.quiet {
        print_levels(&r);
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Dimexp(a) => dimension(&a, &["regular-lp", "finite-group-rep", "z-rotation"], "dimexp"),
        Command::Betti(a) => dimension(&a, &["betti"], "betti"),
        Command::Schatten(a) => dimension(&a, &["schatten-regular"], "schatten"),
        Command::SoficCheck(a) => {
            let c = load(&a)?;
            let r = sofic_check(&c)?;
            let out = out_path(&a, c.output.as_deref(), &c.id);
            let (json, csv) = (r.to_json()?, r.to_csv()?);
            write_all_atomic(&[(&out, json.as_bytes()), (&out.with_extension("csv"), csv.as_bytes())])?;
            if !a.quiet {
                for l in &r.levels {
                    println!(
                        "{} d={} max_multiplicativity={} min_freeness={} mean_freeness={:.6}",
                        r.experiment, l.degree, l.max_multiplicativity, l.min_freeness, l.mean_freeness
                    );
                }
            }
            Ok(())
        }
        Command::Epsdim(a) => {
            let f = FamilyFile::load(&a.config)?;
            let r = family_brackets(&f)?;
            let stem = a.config.file_stem().map_or("epsdim".into(), |s| s.to_string_lossy().into_owned());
            let out = out_path(&a, None, &stem);
            let (json, csv) = (r.to_json()?, r.to_csv()?);
            write_all_atomic(&[(&out, json.as_bytes()), (&out.with_extension("csv"), csv.as_bytes())])?;
            if !a.quiet {
                for b in &r.brackets {
                    println!("eps={} bracket=[{},{}]", b.epsilon, b.bracket.lower, b.bracket.upper);
                }
            }
            Ok(())
        }
    }
}

fn fail(tag: &str, category: &str, message: &str) {
    eprintln!("{}", serde_json::json!({ "error": tag, "category": category, "message": message }));
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            fail("usage", "usage", e.to_string().trim());
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => match e.category() {
            ErrorCategory::Usage => {
                fail(e.tag(), "usage", &e.to_string());
                ExitCode::from(2)
            }
            ErrorCategory::Runtime => {
                fail(e.tag(), "runtime", &e.to_string());
                ExitCode::from(1)
            }
        },
    }
}
