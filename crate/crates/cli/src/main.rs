use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};

use mvrm_core::analysis::{run_analysis, AnalysisRequest, OutputReport};
use mvrm_core::confidence::CiMethod;
use mvrm_core::design::FormulaMode;
use mvrm_core::io::CsvDialect;
use mvrm_core::plot::emit_plot_data;
use mvrm_core::report::{render_text, to_json};
use mvrm_core::resampling::Scheme;
use mvrm_core::Error;

#[derive(Parser)]
#[command(
    name = "mvrm",
    version,
    about = "Wald-type and ANOVA-type tests for repeated measures and multivariate data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Repeated measures design, long data (one row per measurement)
    Rm {
        #[command(flatten)]
        common: Common,
        /// Subject identifier column
        #[arg(long)]
        subject: String,
        /// Number of sub-plot factors, taken from the end of the formula
        #[arg(long = "no-subf", default_value_t = 1)]
        no_subf: usize,
        /// Factor(s) to plot, e.g. `Group` or `sex:diagnosis`
        #[arg(long = "plot-factor")]
        plot_factor: Option<String>,
        /// Write plot.csv and plot.svg (implied by --plot-factor)
        #[arg(long)]
        plot: bool,
        /// Horizontal distance between error bars of different series
        #[arg(long, default_value_t = 0.1)]
        gap: f64,
    },
    /// MANOVA design, long data (one row per measurement)
    Manova {
        #[command(flatten)]
        common: Common,
        /// Subject identifier column
        #[arg(long)]
        subject: String,
        /// Column naming the response dimension of each row; without it
        /// dimensions follow the order of each subject's rows
        #[arg(long)]
        dimension: Option<String>,
        #[command(flatten)]
        region: Region,
    },
    /// MANOVA design, wide data (one row per subject, `cbind(...)` response)
    ManovaWide {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        region: Region,
    },
}

#[derive(Args)]
struct Region {
    /// Confidence region for an effect (the only effect if no name is given)
    #[arg(long = "conf-reg", num_args = 0..=1, default_missing_value = "", value_name = "EFFECT")]
    conf_reg: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum CiArg {
    #[value(name = "t-quantile")]
    TQuantile,
    #[value(name = "resampling")]
    Resampling,
}

#[derive(Args)]
struct Common {
    /// Model formula, e.g. `O2 ~ Group * Staphylococci * Time`
    #[arg(long)]
    formula: String,
    /// Input file
    #[arg(long)]
    data: PathBuf,
    /// Resampling iterations
    #[arg(long, default_value_t = 10_000)]
    iter: usize,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Perm, paramBS or WildBS (default Perm for rm, paramBS otherwise)
    #[arg(long)]
    resampling: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for resampling
    #[arg(long)]
    threads: Option<usize>,
    /// Decimals in the text report
    #[arg(long, default_value_t = 3)]
    dec: usize,
    #[arg(long = "ci-method", value_enum, default_value_t = CiArg::TQuantile)]
    ci_method: CiArg,
    /// Nested factor levels are named uniquely across parent levels
    #[arg(long = "nested-levels-unique")]
    nested_levels_unique: bool,
    /// Field separator (a single character, or `tab`)
    #[arg(long, default_value = ",")]
    sep: String,
    #[arg(long = "decimal-char", default_value_t = '.')]
    decimal_char: char,
    /// Input has no header row; columns are named V1, V2, ...
    #[arg(long = "no-header")]
    no_header: bool,
    /// Drop subjects with missing values instead of failing
    #[arg(long = "na-drop")]
    na_drop: bool,
    /// Directory for report.txt, report.json and plot files
    #[arg(long)]
    out: Option<PathBuf>,
}

fn separator(s: &str) -> anyhow::Result<u8> {
    match s {
        "tab" | "\\t" | "\t" => Ok(b'\t'),
        _ if s.len() == 1 && s.is_ascii() => Ok(s.as_bytes()[0]),
        _ => Err(Error::InvalidArgument(format!(
            "separator must be a single character, got `{s}`"
        ))
        .into()),
    }
}

fn request(mode: FormulaMode, c: &Common) -> anyhow::Result<AnalysisRequest> {
    let mut r = AnalysisRequest::new(mode, c.formula.clone(), c.data.clone());
    r.iterations = c.iter;
    r.alpha = c.alpha;
    r.resampling = c
        .resampling
        .as_deref()
        .map(str::parse::<Scheme>)
        .transpose()?;
    r.seed = c.seed;
    r.workers = c.threads;
    r.decimals = c.dec;
    r.ci_method = match c.ci_method {
        CiArg::TQuantile => CiMethod::TQuantile,
        CiArg::Resampling => CiMethod::Resampling,
    };
    r.nested_levels_unique = c.nested_levels_unique;
    r.na_drop = c.na_drop;
    r.dialect = CsvDialect {
        separator: separator(&c.sep)?,
        decimal: c.decimal_char,
        has_header: !c.no_header,
    };
    Ok(r)
}

fn write_outputs(report: &OutputReport, text: &str, dir: &PathBuf) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    std::fs::write(dir.join("report.txt"), text).map_err(Error::from)?;
    std::fs::write(
        dir.join("report.json"),
        to_json(report).map_err(Error::from)?,
    )
    .map_err(Error::from)?;
    if let Some(cr) = &report.confidence_region {
        if cr.ellipsoid.dim() == 2 {
            let names = &report.layout.components;
            let labels = [names[0].as_str(), names[1 % names.len()].as_str()];
            std::fs::write(dir.join("ellipse.svg"), cr.ellipsoid.to_svg(labels)?)
                .map_err(Error::from)?;
        } else {
            warn!(
                "confidence region has {} dimensions, only 2-dimensional regions are drawn",
                cr.ellipsoid.dim()
            );
        }
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let (req, plot, out) = match &cli.command {
        Command::Rm {
            common,
            subject,
            no_subf,
            plot_factor,
            plot,
            gap,
        } => {
            let mut r = request(FormulaMode::Rm, common)?;
            r.subject = Some(subject.clone());
            r.n_subplot_factors = *no_subf;
            let p = (*plot || plot_factor.is_some()).then(|| (plot_factor.clone(), *gap));
            (r, p, common.out.clone())
        }
        Command::Manova {
            common,
            subject,
            dimension,
            region,
        } => {
            let mut r = request(FormulaMode::ManovaLong, common)?;
            r.subject = Some(subject.clone());
            r.dimension = dimension.clone();
            r.confidence_region = region.conf_reg.clone();
            (r, None, common.out.clone())
        }
        Command::ManovaWide { common, region } => {
            let mut r = request(FormulaMode::ManovaWide, common)?;
            r.confidence_region = region.conf_reg.clone();
            (r, None, common.out.clone())
        }
    };

    let report = run_analysis(&req)?;
    let text = render_text(&report);
    print!("{text}");
    if let Some(dir) = &out {
        write_outputs(&report, &text, dir)?;
    }
    if let Some((selection, gap)) = plot {
        let dir = out.unwrap_or_else(|| PathBuf::from("."));
        std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        let (csv, svg) = emit_plot_data(
            &report.fit,
            &report.layout,
            selection.as_deref(),
            req.alpha,
            gap,
            &dir,
        )?;
        info!("wrote {} and {}", csv.display(), svg.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = match e.downcast_ref::<Error>() {
                // the library message already includes its causes
                Some(err) => {
                    eprintln!("error: {err}");
                    err.exit_code()
                }
                None => {
                    eprintln!("error: {e:#}");
                    2
                }
            };
            ExitCode::from(code as u8)
        }
    }
}
