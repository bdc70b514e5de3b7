//! The `arena` command line: check, run, and harness single programs, or
//! replay a directory of programs against their recorded expectations.

use std::ffi::OsString;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::dynamics::{eval, Outcome};
use crate::meta::{check_preservation, check_progress};
use crate::surface::{arena_summary, lower_program, parse_expr, parse_program, to_core, FrontError, LowerError, ParseOptions, Program};
use crate::typecheck::{check_program, elaborate_program, Term, TypeReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_REJECTED: i32 = 1;
pub const EXIT_STUCK: i32 = 2;
pub const EXIT_PARSE: i32 = 3;
pub const EXIT_HARNESS: i32 = 4;
pub const EXIT_CORPUS: i32 = 5;

#[derive(Parser, Debug)]
#[command(name = "arena", version, about = "Check, run and test programs with shadow arenas")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Type-check a program and print its arenas and type.
    Check(FileArgs),
    /// Type-check, then evaluate a program.
    Run {
        #[command(flatten)]
        file: FileArgs,
        /// Print every reduction step.
        #[arg(long)]
        trace: bool,
        /// Evaluate without type checking first.
        #[arg(long = "unsafe")]
        unchecked: bool,
    },
    /// Run the progress and preservation harnesses on a program.
    Meta(FileArgs),
    /// Run every `.arn` file in a directory against its `.expect` file.
    Corpus {
        dir: PathBuf,
        #[arg(long, default_value_t = 100_000, value_parser = clap::value_parser!(u64).range(1..))]
        fuel: u64,
    },
}

#[derive(Args, Debug, Clone)]
pub struct FileArgs {
    pub path: PathBuf,
    /// Read the file as a single core term instead of a surface program.
    #[arg(long)]
    pub core: bool,
    /// Enable integer arithmetic and `ifz`.
    #[arg(long = "ext-int")]
    pub ext_int: bool,
    #[arg(long, default_value_t = 100_000, value_parser = clap::value_parser!(u64).range(1..))]
    pub fuel: u64,
}

/// A program after parsing and lowering.
#[derive(Clone, Debug)]
pub struct Loaded {
    /// The surface program, absent for core input.
    pub surface: Option<Program>,
    pub term: Term,
}

/// Parses and lowers source text. Type errors raised while lowering are
/// returned as a rejected report rather than a front-end failure.
pub fn load(src: &str, core: bool, ext_int: bool) -> Result<Result<Loaded, TypeReport>, FrontError> {
    if core {
        let opts = ParseOptions { core: true, runtime: false, ext_int };
        let term = to_core(&parse_expr(src, opts)?)?;
        return Ok(Ok(Loaded { surface: None, term }));
    }
    let program = parse_program(src, ParseOptions { core: false, runtime: false, ext_int })?;
    match lower_program(&program) {
        Ok(term) => Ok(Ok(Loaded { surface: Some(program), term })),
        Err(LowerError::Type(e)) => Ok(Err(TypeReport::rejected(e))),
        Err(e) => Err(e.into()),
    }
}

/// Loads and checks; `Err` carries the exit code after printing.
fn load_checked(
    args: &FileArgs,
    out: &mut dyn Write,
    err: &mut dyn Write,
    check: bool,
) -> Result<(Loaded, Option<TypeReport>), i32> {
    let src = std::fs::read_to_string(&args.path).map_err(|e| {
        let _ = writeln!(err, "{}: {e}", args.path.display());
        EXIT_PARSE
    })?;
    let loaded = match load(&src, args.core, args.ext_int) {
        Ok(Ok(l)) => l,
        Ok(Err(report)) => {
            print_report(&report, out, err);
            return Err(EXIT_REJECTED);
        }
        Err(e) => {
            let _ = writeln!(err, "{}:{e}", args.path.display());
            return Err(EXIT_PARSE);
        }
    };
    if !check {
        return Ok((loaded, None));
    }
    let report = check_program(&loaded.term);
    if !report.is_accepted() {
        print_report(&report, out, err);
        return Err(EXIT_REJECTED);
    }
    Ok((loaded, Some(report)))
}

fn print_report(report: &TypeReport, out: &mut dyn Write, err: &mut dyn Write) {
    for d in &report.diagnostics {
        let _ = writeln!(err, "{d}");
    }
    let text = report.to_string();
    let _ = writeln!(out, "{}", text.lines().last().unwrap_or_default());
}

/// Parses `argv` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run_cli<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let shown = e.render();
            if e.use_stderr() {
                let _ = write!(err, "{shown}");
                return EXIT_PARSE;
            }
            let _ = write!(out, "{shown}");
            return EXIT_OK;
        }
    };
    match cli.command {
        Command::Check(args) => cmd_check(&args, out, err),
        Command::Run { file, trace, unchecked } => cmd_run(&file, trace, unchecked, out, err),
        Command::Meta(args) => cmd_meta(&args, out, err),
        Command::Corpus { dir, fuel } => cmd_corpus(&dir, fuel, out, err),
    }
}

fn cmd_check(args: &FileArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let src = match std::fs::read_to_string(&args.path) {
        Ok(s) => s,
        Err(e) => {
            let _ = writeln!(err, "{}: {e}", args.path.display());
            return EXIT_PARSE;
        }
    };
    // The arena summary is syntactic, so it is shown even for rejected programs.
    if !args.core {
        if let Ok(p) = parse_program(&src, ParseOptions { ext_int: args.ext_int, ..Default::default() }) {
            for g in arena_summary(&p) {
                let _ = writeln!(out, "{g}");
            }
        }
    }
    match load_checked(args, out, err, true) {
        Ok((_, Some(report))) => {
            print_report(&report, out, err);
            EXIT_OK
        }
        Ok(_) => EXIT_OK,
        Err(code) => code,
    }
}

fn cmd_run(args: &FileArgs, trace: bool, unchecked: bool, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let (loaded, _) = match load_checked(args, out, err, !unchecked) {
        Ok(x) => x,
        Err(code) => return code,
    };
    let term = if unchecked {
        loaded.term
    } else {
        elaborate_program(&loaded.term).map(|(t, _)| t).unwrap_or(loaded.term)
    };
    let result = eval(&term, args.fuel);
    if trace {
        for (i, e) in result.trace.iter().enumerate() {
            match e.cell {
                Some((l, o)) => writeln!(out, "TRACE {} {} {l}·{o}", i + 1, e.tag),
                None => writeln!(out, "TRACE {} {}", i + 1, e.tag),
            }
            .ok();
        }
    }
    let code = match &result.outcome {
        Outcome::Value(v) => {
            let _ = writeln!(out, "VALUE {v}");
            EXIT_OK
        }
        Outcome::Stuck(t, reason) => {
            let _ = writeln!(out, "STUCK {reason}");
            let _ = writeln!(err, "stuck at {t}");
            EXIT_STUCK
        }
        Outcome::FuelExhausted(_) => {
            let _ = writeln!(out, "FUEL-EXHAUSTED after {} steps", args.fuel);
            EXIT_STUCK
        }
    };
    for (l, live, total) in result.store.arenas() {
        let _ = writeln!(out, "ARENA {l} live={live} killed={}", total - live);
    }
    let _ = writeln!(out, "STORE live={} killed={}", result.store.live_count(), result.store.killed_count());
    code
}

fn cmd_meta(args: &FileArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let (loaded, _) = match load_checked(args, out, err, true) {
        Ok(x) => x,
        Err(code) => return code,
    };
    let name = args.path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let preservation = check_preservation(&loaded.term, args.fuel).named(name.clone());
    let progress = check_progress(&loaded.term, args.fuel).named(name);
    let _ = writeln!(out, "{preservation}");
    let _ = writeln!(out, "{progress}");
    if preservation.is_ok() && progress.is_ok() {
        EXIT_OK
    } else {
        EXIT_HARNESS
    }
}

/// The recorded outcome of a corpus program.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Expectation {
    /// `None` for acceptance, otherwise the rejection kind.
    pub reject: Option<String>,
    pub ty: Option<String>,
    pub value: Option<String>,
    pub store: Option<(usize, usize)>,
    pub ext_int: bool,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("line {line}: {message}")]
pub struct ExpectationError {
    pub line: usize,
    pub message: String,
}

impl Expectation {
    /// Reads the line-oriented `.expect` format. Blank lines and lines
    /// starting with `#` are ignored; `VERDICT` is required.
    pub fn parse(text: &str) -> Result<Expectation, ExpectationError> {
        let mut e = Expectation::default();
        let mut verdict = false;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fail = |message: String| ExpectationError { line: i + 1, message };
            let (key, rest) = line.split_once(' ').unwrap_or((line, ""));
            let rest = rest.trim();
            match key {
                "VERDICT" => {
                    verdict = true;
                    match rest.split_once(':') {
                        None if rest == "accept" => e.reject = None,
                        Some(("reject", kind)) if !kind.is_empty() => e.reject = Some(kind.to_string()),
                        _ => return Err(fail(format!("bad verdict `{rest}`"))),
                    }
                }
                "TYPE" => e.ty = Some(rest.to_string()),
                "VALUE" => e.value = Some(rest.to_string()),
                "STORE" => {
                    let mut live = None;
                    let mut killed = None;
                    for part in rest.split_whitespace() {
                        match part.split_once('=') {
                            Some(("live", n)) => live = n.parse().ok(),
                            Some(("killed", n)) => killed = n.parse().ok(),
                            _ => return Err(fail(format!("bad store field `{part}`"))),
                        }
                    }
                    match (live, killed) {
                        (Some(l), Some(k)) => e.store = Some((l, k)),
                        _ => return Err(fail("STORE needs live=<n> killed=<m>".into())),
                    }
                }
                "FLAGS" => {
                    for flag in rest.split_whitespace() {
                        match flag {
                            "--ext-int" => e.ext_int = true,
                            other => return Err(fail(format!("unknown flag `{other}`"))),
                        }
                    }
                }
                other => return Err(fail(format!("unknown key `{other}`"))),
            }
        }
        if !verdict {
            return Err(ExpectationError { line: 0, message: "missing VERDICT".into() });
        }
        Ok(e)
    }
}

/// The observed outcome of a corpus program, in the terms of [`Expectation`].
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Observed {
    pub reject: Option<String>,
    pub ty: Option<String>,
    pub value: Option<String>,
    pub store: Option<(usize, usize)>,
    /// Front-end failure or abnormal evaluation end.
    pub failure: Option<String>,
}

impl fmt::Display for Observed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(x) = &self.failure {
            return write!(f, "{x}");
        }
        match &self.reject {
            Some(k) => write!(f, "reject:{k}"),
            None => {
                write!(f, "accept {}", self.ty.as_deref().unwrap_or("?"))?;
                if let Some(v) = &self.value {
                    write!(f, " value {v}")?;
                }
                if let Some((l, k)) = self.store {
                    write!(f, " live={l} killed={k}")?;
                }
                Ok(())
            }
        }
    }
}

/// Checks and, when accepted, runs a surface program.
pub fn observe(src: &str, ext_int: bool, fuel: u64) -> Observed {
    let loaded = match load(src, false, ext_int) {
        Ok(Ok(l)) => l,
        Ok(Err(report)) => return Observed { reject: report.error_kind().map(|k| k.to_string()), ..Default::default() },
        Err(e) => return Observed { failure: Some(e.to_string()), ..Default::default() },
    };
    let (term, ty) = match elaborate_program(&loaded.term) {
        Ok(x) => x,
        Err(e) => return Observed { reject: Some(e.kind.to_string()), ..Default::default() },
    };
    let result = eval(&term, fuel);
    let mut obs = Observed {
        ty: Some(ty.to_string()),
        store: Some((result.store.live_count(), result.store.killed_count())),
        ..Default::default()
    };
    match result.outcome {
        Outcome::Value(v) => obs.value = Some(v.to_string()),
        Outcome::Stuck(_, r) => obs.failure = Some(format!("stuck: {r}")),
        Outcome::FuelExhausted(_) => obs.failure = Some("fuel exhausted".into()),
    }
    obs
}

/// Differences between what was expected and what happened; empty on a match.
pub fn compare(expect: &Expectation, seen: &Observed) -> Vec<String> {
    let mut diffs = Vec::new();
    if let Some(f) = &seen.failure {
        diffs.push(f.clone());
        return diffs;
    }
    if expect.reject != seen.reject {
        let show = |r: &Option<String>| r.as_ref().map_or("accept".to_string(), |k| format!("reject:{k}"));
        diffs.push(format!("verdict {} expected {}", show(&seen.reject), show(&expect.reject)));
        return diffs;
    }
    if expect.reject.is_some() {
        return diffs;
    }
    if let Some(t) = &expect.ty {
        if seen.ty.as_ref() != Some(t) {
            diffs.push(format!("type {} expected {t}", seen.ty.as_deref().unwrap_or("?")));
        }
    }
    if let Some(v) = &expect.value {
        if seen.value.as_ref() != Some(v) {
            diffs.push(format!("value {} expected {v}", seen.value.as_deref().unwrap_or("?")));
        }
    }
    if let Some((l, k)) = expect.store {
        if seen.store != Some((l, k)) {
            let (sl, sk) = seen.store.unwrap_or_default();
            diffs.push(format!("store live={sl} killed={sk} expected live={l} killed={k}"));
        }
    }
    diffs
}

/// The `.arn` files of a directory, sorted by name.
pub fn corpus_files(dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "arn"))
        .collect();
    files.sort();
    Ok(files)
}

fn cmd_corpus(dir: &Path, fuel: u64, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let files = match corpus_files(dir) {
        Ok(f) => f,
        Err(e) => {
            let _ = writeln!(err, "{}: {e}", dir.display());
            return EXIT_CORPUS;
        }
    };
    let mut failed = 0;
    for path in &files {
        let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let diffs = match (std::fs::read_to_string(path), std::fs::read_to_string(path.with_extension("expect"))) {
            (Ok(src), Ok(expect)) => match Expectation::parse(&expect) {
                Ok(e) => compare(&e, &observe(&src, e.ext_int, fuel)),
                Err(e) => vec![format!("bad expectation: {e}")],
            },
            (Err(e), _) | (_, Err(e)) => vec![e.to_string()],
        };
        if diffs.is_empty() {
            let _ = writeln!(out, "PASS {name}");
        } else {
            failed += 1;
            let _ = writeln!(out, "FAIL {name}: {}", diffs.join("; "));
        }
    }
    let _ = writeln!(out, "CORPUS {} passed, {failed} failed", files.len() - failed);
    if failed == 0 {
        EXIT_OK
    } else {
        EXIT_CORPUS
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expectation_format() {
        let e = Expectation::parse("# scoped\nVERDICT accept\nTYPE Int^{}\nVALUE 42\nSTORE live=2 killed=2\nFLAGS --ext-int\n")
            .unwrap();
        assert_eq!(e.reject, None);
        assert_eq!(e.ty.as_deref(), Some("Int^{}"));
        assert_eq!(e.store, Some((2, 2)));
        assert!(e.ext_int);
        let r = Expectation::parse("VERDICT reject:OverlapViolation").unwrap();
        assert_eq!(r.reject.as_deref(), Some("OverlapViolation"));
        assert!(Expectation::parse("TYPE Int^{}").is_err());
        assert_eq!(Expectation::parse("VERDICT maybe").unwrap_err().line, 1);
    }

    #[test]
    fn observe_and_compare() {
        let seen = observe("val a = new Ref(41); a := !a; !a", false, 1000);
        assert_eq!(seen.value.as_deref(), Some("41"));
        let mut e = Expectation { value: Some("41".into()), store: Some((1, 0)), ..Default::default() };
        assert!(compare(&e, &seen).is_empty(), "{seen}");
        e.value = Some("42".into());
        assert_eq!(compare(&e, &seen).len(), 1);
    }

    #[test]
    fn unsafe_is_only_for_run() {
        let mut out = Vec::new();
        let mut err = Vec::new();
        assert_eq!(run_cli(["arena", "check", "--unsafe", "x.arn"], &mut out, &mut err), EXIT_PARSE);
        assert_eq!(run_cli(["arena", "run", "--fuel", "0", "x.arn"], &mut out, &mut err), EXIT_PARSE);
    }
}
