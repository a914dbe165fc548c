use clap::{Parser, Subcommand, ValueEnum};
use horndeski_core::hamiltonian::HamiltonCase;
use horndeski_core::lagrangian::LagrangianSpec;
use horndeski_core::report::{self, Background, Chart, Report, RunOptions};
use horndeski_core::Error;
use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

const EXIT_CONFIG: u8 = 2;
const EXIT_INAPPLICABLE: u8 = 3;
const EXIT_VERIFY: u8 = 4;

#[derive(Parser, Debug)]
#[command(name = "horndeski", version, about = "Multisymplectic derivations for cubic Horndeski theories")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// G2(phi, X) in the expression DSL.
    #[arg(long, global = true)]
    g2: Option<String>,
    /// G3(phi, X) in the expression DSL.
    #[arg(long, global = true)]
    g3: Option<String>,
    /// Gravitational prefactor as a rational, e.g. 1/2.
    #[arg(long, global = true)]
    kappa: Option<String>,
    #[arg(long, global = true, value_enum)]
    chart: Option<ChartArg>,
    /// Key=value configuration file with [lagrangian], [run], [hamiltonian] and [verify] sections.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    emit: Option<Emit>,
    /// Residual tolerance for verification rows.
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Number of random sample points.
    #[arg(long, global = true)]
    points: Option<usize>,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Legendre map, ranks and projectability.
    Derive,
    /// Constraint stages and their census.
    Constraints,
    /// Hamiltonian and Hamilton equations.
    Hamiltonian {
        #[arg(long, value_enum)]
        case: Option<CaseArg>,
    },
    /// Residuals against independent oracles on backgrounds.
    Verify {
        /// Background, repeatable: minkowski, minkowski+wave, flrw(H), schwarzschild(M), perturbed(eps).
        #[arg(long = "background")]
        backgrounds: Vec<String>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ChartArg {
    Partial,
    Covariant,
}

#[derive(Clone, Copy, Debug, PartialEq, ValueEnum)]
enum Emit {
    Json,
    Latex,
    Text,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum CaseArg {
    Particular,
    General,
}

enum Failure {
    Config(String),
    Inapplicable(String),
    Other(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Syntax { .. } | Error::UnknownIdentifier { .. } => Failure::Config(e.to_string()),
            Error::Inapplicable(_) | Error::SingularInversion(_) => Failure::Inapplicable(e.to_string()),
            other => Failure::Other(other.to_string()),
        }
    }
}

type Config = BTreeMap<(String, String), String>;

const KEYS: &[(&str, &str)] = &[
    ("lagrangian", "g2"),
    ("lagrangian", "g3"),
    ("lagrangian", "kappa"),
    ("run", "chart"),
    ("run", "emit"),
    ("run", "tol"),
    ("run", "seed"),
    ("run", "points"),
    ("run", "out"),
    ("hamiltonian", "case"),
    ("verify", "backgrounds"),
];

/// Strict parser: every key belongs to a known section, no duplicates.
fn parse_config(text: &str) -> Result<Config, String> {
    let mut section: Option<String> = None;
    let mut out = Config::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let lineno = n + 1;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            let name = name.trim();
            if !KEYS.iter().any(|(s, _)| *s == name) {
                return Err(format!("line {lineno}: unknown section [{name}]"));
            }
            section = Some(name.to_string());
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(format!("line {lineno}: expected key = value"));
        };
        let sec = section.clone().ok_or_else(|| format!("line {lineno}: key outside of any section"))?;
        let key = k.trim();
        if !KEYS.contains(&(sec.as_str(), key)) {
            return Err(format!("line {lineno}: unknown key `{key}` in [{sec}]"));
        }
        let mut value = v.trim();
        if value.len() >= 2 && value.starts_with('"') && value.ends_with('"') {
            value = &value[1..value.len() - 1];
        }
        if out.insert((sec.clone(), key.to_string()), value.to_string()).is_some() {
            return Err(format!("line {lineno}: duplicate key `{key}` in [{sec}]"));
        }
    }
    Ok(out)
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, Failure> {
    v.parse().map_err(|_| Failure::Config(format!("invalid value `{v}` for {key}")))
}

struct Resolved {
    spec: LagrangianSpec,
    opts: RunOptions,
    emit: Emit,
    out: Option<PathBuf>,
}

fn resolve(cli: &Cli) -> Result<Resolved, Failure> {
    let cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
            parse_config(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?
        }
        None => Config::new(),
    };
    let get = |s: &str, k: &str| cfg.get(&(s.to_string(), k.to_string())).cloned();

    let g2 = cli.g2.clone().or_else(|| get("lagrangian", "g2")).unwrap_or_else(|| "0".into());
    let g3 = cli.g3.clone().or_else(|| get("lagrangian", "g3")).unwrap_or_else(|| "0".into());
    let mut spec = LagrangianSpec::new(&g2, &g3)?;
    if let Some(k) = cli.kappa.clone().or_else(|| get("lagrangian", "kappa")) {
        let kappa = LagrangianSpec::parse_kappa(&k).map_err(|e| Failure::Config(format!("kappa: {e}")))?;
        spec = spec.with_kappa(kappa);
    }

    let mut opts = RunOptions::default();
    opts.chart = match (cli.chart, get("run", "chart")) {
        (Some(ChartArg::Partial), _) => Chart::Partial,
        (Some(ChartArg::Covariant), _) => Chart::Covariant,
        (None, Some(c)) => Chart::parse(&c).map_err(|e| Failure::Config(e.to_string()))?,
        (None, None) => opts.chart,
    };
    if let Some(t) = cli.tol.or(get("run", "tol").map(|v| parse_num("tol", &v)).transpose()?) {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Failure::Config(format!("tol must be positive, got {t}")));
        }
        opts.tol = t;
    }
    if let Some(s) = cli.seed.or(get("run", "seed").map(|v| parse_num("seed", &v)).transpose()?) {
        opts.seed = s;
    }
    if let Some(p) = cli.points.or(get("run", "points").map(|v| parse_num("points", &v)).transpose()?) {
        if p == 0 {
            return Err(Failure::Config("points must be at least 1".into()));
        }
        opts.points = p;
    }
    let emit = match (cli.emit, get("run", "emit").as_deref()) {
        (Some(e), _) => e,
        (None, Some("json")) | (None, None) => Emit::Json,
        (None, Some("latex")) => Emit::Latex,
        (None, Some("text")) => Emit::Text,
        (None, Some(other)) => return Err(Failure::Config(format!("unknown emit format `{other}`"))),
    };
    let out = cli.out.clone().or_else(|| get("run", "out").map(PathBuf::from));

    match &cli.command {
        Command::Hamiltonian { case } => {
            opts.case = match (case, get("hamiltonian", "case").as_deref()) {
                (Some(CaseArg::Particular), _) | (None, Some("particular")) | (None, None) => HamiltonCase::Particular,
                (Some(CaseArg::General), _) | (None, Some("general")) => HamiltonCase::General,
                (None, Some(other)) => return Err(Failure::Config(format!("unknown case `{other}`"))),
            };
        }
        Command::Verify { backgrounds } => {
            let list: Vec<String> = if backgrounds.is_empty() {
                get("verify", "backgrounds").map(|v| v.split_whitespace().map(String::from).collect()).unwrap_or_default()
            } else {
                backgrounds.clone()
            };
            if !list.is_empty() {
                opts.backgrounds = list.iter().map(|b| Background::parse(b).map_err(|e| Failure::Config(e.to_string()))).collect::<Result<_, _>>()?;
            }
        }
        _ => {}
    }
    Ok(Resolved { spec, opts, emit, out })
}

fn run(cli: &Cli) -> Result<Report, Failure> {
    let r = resolve(cli)?;
    let report = match cli.command {
        Command::Derive => report::derive(&r.spec, &r.opts)?,
        Command::Constraints => report::constraints(&r.spec, &r.opts)?,
        Command::Hamiltonian { .. } => report::hamiltonian(&r.spec, &r.opts)?,
        Command::Verify { .. } => report::verify(&r.spec, &r.opts)?,
    };
    let body = match r.emit {
        Emit::Json => report::to_json(&report),
        Emit::Text => report::to_text(&report),
        Emit::Latex => report::to_latex_report(&report),
    };
    match &r.out {
        Some(path) => std::fs::write(path, body).map_err(|e| Failure::Other(format!("cannot write {}: {e}", path.display())))?,
        None => print!("{body}"),
    }
    // Text and LaTeX bodies already carry the warnings when they go to stdout.
    if r.out.is_some() || r.emit == Emit::Json {
        for w in &report.warnings {
            eprintln!("warning: {w}");
        }
    }
    Ok(report)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(report) if report.failed() => {
            eprintln!("error: verification failed");
            ExitCode::from(EXIT_VERIFY)
        }
        Ok(_) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Inapplicable(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_INAPPLICABLE)
        }
        Err(Failure::Other(m)) => {
            eprintln!("error: {m}");
            ExitCode::FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::parse_config;

    #[test]
    fn config_is_strict() {
        let ok = parse_config("[lagrangian]\ng2 = \"X*phi\"\n# comment\n[run]\nseed=3\n").unwrap();
        assert_eq!(ok[&("lagrangian".into(), "g2".into())], "X*phi");
        assert!(parse_config("g2 = X").unwrap_err().contains("outside"));
        assert!(parse_config("[run]\ncolour = red").unwrap_err().contains("unknown key"));
        assert!(parse_config("[bogus]").unwrap_err().contains("unknown section"));
        assert!(parse_config("[run]\nseed=1\nseed=2").unwrap_err().contains("duplicate"));
        assert!(parse_config("[run]\nseed").unwrap_err().contains("key = value"));
    }
}
