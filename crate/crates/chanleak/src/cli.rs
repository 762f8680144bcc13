//! Subcommands: `simulate`, `check`, `analyze`, `lint`, `list`.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use chanleak_core::analyzer::{self, assemble, goleak_verify, AnalyzerConfig, GoleakFinding};
use chanleak_core::dsl::scenarios::{self, NAMES};
use chanleak_core::dsl::{load_program, range_lint, SimProgram};
use chanleak_core::profile::{emit_profile, snapshot};
use chanleak_core::runtime::{run as simulate, Outcome, SchedulerConfig};

use crate::config::{load_list, FileConfig};
use crate::input::{load_profiles, profile_files};
use crate::{exit, report, CliError};

#[derive(Parser, Debug)]
#[command(name = "chanleak", version, about = "Goroutine-leak simulator, checker and fleet profile analyzer")]
struct Cli {
    /// Flat `key = value` config file; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Run a scenario or program and write its trace and end-state profile.
    Simulate(SimulateArgs),
    /// Run a scenario or program and fail if any task is left over.
    Check(CheckArgs),
    /// Rank blocking sites across a fleet of profiles.
    Analyze(AnalyzeArgs),
    /// Report channels ranged over but never closed.
    Lint(LintArgs),
    /// List the built-in scenarios.
    List,
}

#[derive(Args, Debug)]
struct Target {
    /// Built-in scenario name or path to a program file.
    target: String,
    /// Use the fixed variant of a built-in scenario.
    #[arg(long)]
    fixed: bool,
    /// Sets parameter `n` (ncast).
    #[arg(long)]
    n: Option<u64>,
    /// Sets parameter `workers` (unclosed-range).
    #[arg(long)]
    workers: Option<u64>,
    /// Sets token `err` (discount-fetch).
    #[arg(long, num_args = 0..=1, default_missing_value = "true", value_name = "BOOL")]
    err: Option<bool>,
    /// Sets a token (`true`/`false`) or integer parameter.
    #[arg(long = "set", value_name = "NAME=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_steps: Option<u64>,
    #[arg(long)]
    model_time: Option<u64>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    target: Target,
    /// Output directory (default: current directory).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Instance id written into the profile (default: scenario or file name).
    #[arg(long)]
    instance: Option<String>,
    /// Capture timestamp written into the profile (default: `tick-<end time>`).
    #[arg(long)]
    captured_at: Option<String>,
}

#[derive(Args, Debug)]
struct CheckArgs {
    #[command(flatten)]
    target: Target,
    /// Function names whose leftover tasks do not fail the check.
    #[arg(long, value_name = "FILE")]
    suppress: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    /// Profile files or directories of `.gprof.txt` files.
    #[arg(required = true)]
    paths: Vec<PathBuf>,
    #[arg(long)]
    threshold: Option<u64>,
    #[arg(long)]
    top_n: Option<usize>,
    #[arg(long, value_name = "FILE")]
    suppress: Option<PathBuf>,
    /// Transient channel symbols, replacing the defaults.
    #[arg(long, value_name = "FILE")]
    transient: Option<PathBuf>,
    /// Also write report.json and report.txt here.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Fail on the first unreadable profile instead of skipping it.
    #[arg(long)]
    strict: bool,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Report timestamp (default: latest profile capture time).
    #[arg(long)]
    generated_at: Option<String>,
}

#[derive(Args, Debug)]
struct LintArgs {
    /// Built-in scenario name or path to a program file.
    target: String,
    #[arg(long)]
    fixed: bool,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Format {
    Json,
    Text,
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { exit::OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    let result = FileConfig::load_opt(cli.config.as_deref()).and_then(|file| match cli.cmd {
        Cmd::Simulate(a) => cmd_simulate(a, &file, out, err),
        Cmd::Check(a) => cmd_check(a, &file, out, err),
        Cmd::Analyze(a) => cmd_analyze(a, &file, out, err),
        Cmd::Lint(a) => cmd_lint(a, out),
        Cmd::List => cmd_list(out),
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "chanleak: {e}");
            e.code
        }
    }
}

impl FileConfig {
    fn load_opt(path: Option<&Path>) -> Result<Self, CliError> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }
}

fn io_err(e: std::io::Error) -> CliError {
    CliError { code: exit::NO_INPUT, message: e.to_string() }
}

fn unknown_target(name: &str) -> CliError {
    CliError::usage(format!(
        "unknown scenario `{name}` (not a file either); available: {}",
        NAMES.join(", ")
    ))
}

/// Loads a built-in scenario or a program file. Returns a display name.
fn resolve_program(target: &str, fixed: bool) -> Result<(String, SimProgram), CliError> {
    if let Some(s) = scenarios::scenario(target, fixed) {
        let name = if fixed { format!("{target}.fixed") } else { target.to_string() };
        return Ok((name, s.program));
    }
    let path = Path::new(target);
    if !path.is_file() {
        return Err(unknown_target(target));
    }
    if fixed {
        return Err(CliError::usage("--fixed only applies to built-in scenarios"));
    }
    let text = std::fs::read_to_string(path).map_err(io_err)?;
    let program = load_program(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    let name = path.file_stem().map_or_else(|| target.to_string(), |s| s.to_string_lossy().into_owned());
    Ok((name, program))
}

fn set_param(p: SimProgram, name: &str, v: u64) -> Result<SimProgram, CliError> {
    p.with_param(name, v)
        .ok_or_else(|| CliError::usage(format!("program has no parameter `{name}`")))
}

fn set_token(p: SimProgram, name: &str, v: bool) -> Result<SimProgram, CliError> {
    p.with_token(name, v)
        .ok_or_else(|| CliError::usage(format!("program has no token `{name}`")))
}

impl Target {
    fn program(&self) -> Result<(String, SimProgram), CliError> {
        let (name, mut p) = resolve_program(&self.target, self.fixed)?;
        if let Some(n) = self.n {
            p = set_param(p, "n", n)?;
        }
        if let Some(w) = self.workers {
            p = set_param(p, "workers", w)?;
        }
        if let Some(e) = self.err {
            p = set_token(p, "err", e)?;
        }
        for kv in &self.set {
            let Some((k, v)) = kv.split_once('=') else {
                return Err(CliError::usage(format!("--set expects NAME=VALUE, got `{kv}`")));
            };
            p = match v {
                "true" => set_token(p, k, true)?,
                "false" => set_token(p, k, false)?,
                _ => {
                    let n = v.parse().map_err(|_| CliError::usage(format!("--set {k}: `{v}` is not a bool or integer")))?;
                    set_param(p, k, n)?
                }
            };
        }
        Ok((name, p))
    }

    fn scheduler(&self, file: &FileConfig) -> Result<SchedulerConfig, CliError> {
        let d = SchedulerConfig::default();
        let c = SchedulerConfig {
            seed: self.seed.or(file.get("seed")?).unwrap_or(d.seed),
            max_steps: self.max_steps.or(file.get("max_steps")?).unwrap_or(d.max_steps),
            model_time: self.model_time.or(file.get("model_time")?).unwrap_or(d.model_time),
        };
        if c.max_steps == 0 {
            return Err(CliError::usage("max_steps must be at least 1"));
        }
        Ok(c)
    }
}

fn outcome_str(o: Outcome) -> &'static str {
    match o {
        Outcome::Quiescent => "quiescent",
        Outcome::HorizonReached => "horizon reached",
    }
}

fn cmd_simulate(a: SimulateArgs, file: &FileConfig, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, CliError> {
    let (name, program) = a.target.program()?;
    let cfg = a.target.scheduler(file)?;
    let (exec, bounded) = match simulate(&program, &cfg) {
        Ok(e) => (e, false),
        Err(e) => (e.into_execution(), true),
    };
    let instance = a.instance.unwrap_or(name);
    let captured_at = a.captured_at.unwrap_or_else(|| format!("tick-{}", exec.now));
    let dir = a.out.or_else(|| file.path("out")).unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).map_err(io_err)?;
    let trace_path = dir.join(format!("{instance}.trace.txt"));
    let profile_path = dir.join(format!("{instance}.gprof.txt"));
    std::fs::write(&trace_path, exec.trace.to_string()).map_err(io_err)?;
    let profile = snapshot(&exec, &instance, &captured_at);
    std::fs::write(&profile_path, emit_profile(&profile)).map_err(io_err)?;
    if bounded {
        let _ = writeln!(err, "warning: step bound {} reached; profile shows the partial state", cfg.max_steps);
    }
    let status = if bounded { "step bound reached" } else { outcome_str(exec.outcome) };
    let _ = writeln!(
        out,
        "{status} after {} steps at tick {}; {} task(s) left\ntrace: {}\nprofile: {}",
        exec.steps,
        exec.now,
        profile.goroutines.len(),
        trace_path.display(),
        profile_path.display()
    );
    Ok(exit::OK)
}

fn describe(f: &GoleakFinding) -> String {
    let created = f
        .creation_context
        .as_ref()
        .map_or_else(|| "entry task".to_string(), |c| format!("created by {} at {c}", c.function));
    format!(
        "task {} [{}] at {} in {}, {created}",
        f.task,
        f.status.as_str(),
        f.code_context,
        f.code_context.function
    )
}

fn cmd_check(a: CheckArgs, file: &FileConfig, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, CliError> {
    let (name, program) = a.target.program()?;
    let cfg = a.target.scheduler(file)?;
    let suppression = match a.suppress.or_else(|| file.path("suppress")) {
        Some(p) => load_list(&p)?,
        None => BTreeSet::new(),
    };
    let v = goleak_verify(&program, &cfg, &suppression);
    if v.bound_exceeded {
        let _ = writeln!(err, "warning: step bound {} reached; checking the partial state", cfg.max_steps);
    }
    if !v.result.suppressed.is_empty() {
        let _ = writeln!(out, "suppressed: {} lingering task(s)", v.result.suppressed.len());
        for f in &v.result.suppressed {
            let _ = writeln!(out, "  {}", describe(f));
        }
    }
    if v.passed() {
        let _ = writeln!(out, "PASS {name}: no lingering tasks");
        return Ok(exit::OK);
    }
    let _ = writeln!(err, "FAIL {name}: {} lingering task(s)", v.result.findings.len());
    for f in &v.result.findings {
        let _ = writeln!(err, "  {}", describe(f));
    }
    Ok(exit::FINDINGS)
}

fn cmd_analyze(a: AnalyzeArgs, file: &FileConfig, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, CliError> {
    let mut config = AnalyzerConfig::default();
    if let Some(t) = a.threshold.or(file.get("threshold")?) {
        config.threshold = t;
    }
    if let Some(n) = a.top_n.or(file.get("top_n")?) {
        config.top_n = n;
    }
    if let Some(p) = a.suppress.or_else(|| file.path("suppress")) {
        config.suppression = load_list(&p)?;
    }
    if let Some(p) = a.transient.or_else(|| file.path("transient")) {
        config.transient_symbols = load_list(&p)?;
    }
    let strict = a.strict || file.get("strict")?.unwrap_or(false);
    let format = match (a.format, file.str("format")) {
        (Some(f), _) => f,
        (None, Some(s)) => Format::from_str(s, true).map_err(|_| CliError::usage(format!("config key `format`: invalid value `{s}`")))?,
        (None, None) => Format::Text,
    };

    let files = profile_files(&a.paths)?;
    let loaded = load_profiles(&files);
    if let Some((path, why)) = loaded.skipped.first() {
        if strict {
            return Err(CliError::strict(format!("{}: {why}", path.display())));
        }
    }
    for (path, why) in &loaded.skipped {
        let _ = writeln!(err, "warning: skipping {}: {why}", path.display());
    }
    let profiles = loaded.profiles;
    if profiles.is_empty() {
        return Err(CliError::no_input("no readable profiles"));
    }

    let generated_at = a
        .generated_at
        .or_else(|| file.str("generated_at").map(String::from))
        .or_else(|| profiles.iter().map(|p| &p.captured_at).filter(|c| !c.is_empty()).max().cloned())
        .unwrap_or_else(|| "unknown".into());
    let tallies = profiles.par_iter().map(|p| analyzer::profile_sites(p, &config.signatures)).collect();
    let report = assemble(&profiles, tallies, &config, &generated_at).map_err(|e| CliError::usage(e.to_string()))?;

    let json = report::to_json(&report);
    let text = report::to_text(&report);
    if let Some(dir) = a.out.or_else(|| file.path("out")) {
        std::fs::create_dir_all(&dir).map_err(io_err)?;
        std::fs::write(dir.join("report.json"), &json).map_err(io_err)?;
        std::fs::write(dir.join("report.txt"), &text).map_err(io_err)?;
    }
    let _ = out.write_all(if format == Format::Json { json } else { text }.as_bytes());
    Ok(exit::OK)
}

fn cmd_lint(a: LintArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let (name, program) = resolve_program(&a.target, a.fixed)?;
    let findings = range_lint(&program);
    for f in &findings {
        let _ = writeln!(
            out,
            "{}: range over `{}` (made at {}) which is never closed",
            f.range_site, f.channel, f.declared_at
        );
    }
    if findings.is_empty() {
        let _ = writeln!(out, "{name}: no findings");
        Ok(exit::OK)
    } else {
        Ok(exit::FINDINGS)
    }
}

fn cmd_list(out: &mut dyn Write) -> Result<i32, CliError> {
    for name in NAMES {
        for fixed in [false, true] {
            let s = scenarios::scenario(name, fixed).expect("listed scenario exists");
            let variant = if fixed { "fixed" } else { "leaky" };
            let _ = writeln!(out, "{name:<18} {variant:<6} {:<13} {}", s.expectation.tag.as_str(), s.summary);
        }
    }
    Ok(exit::OK)
}
