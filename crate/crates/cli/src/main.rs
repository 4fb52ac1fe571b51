//! `fermi`: command-line front end for the mode-entanglement toolkit.
//!
//! Exit codes: 0 on success, 1 when a requested check fails (a confirmed
//! spectrum violation, an unfaithful qubit mapping, a failed worked
//! example), 2 on usage or input errors.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use fermi_core::entanglement::{parity_check, spectrum, spectrum_distance, von_neumann_entropy};
use fermi_core::error::Error;
use fermi_core::fock::FermionicState;
use fermi_core::formats::{
    density_to_json, parse_alpha_list, parse_cut_spec, parse_mode_list, read_state_file,
    report_spectrum, AnalysisRecord, ANALYSIS_CSV_HEADER,
};
use fermi_core::qubit_map::{even_four_mode_state, faithfulness_check, FaithfulnessReport};
use fermi_core::reductions::{pure_reduction, ModePartition};
use fermi_core::verifier::{
    find_counterexample, run_worked_examples, verify_theorem, worked_example_state, CampaignConfig,
    CampaignReport, CounterexampleReport, CutSelection, CutsEcho, ExamplesReport, Sector,
    TrialRecord,
};
use fermi_core::Result;

#[derive(Parser)]
#[command(
    name = "fermi",
    version,
    about = "Fermionic mode entanglement: signed reductions, marginal spectra, qubit-encoding checks"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Reduce a pure state to a subset of modes
    Reduce(ReduceArgs),
    /// Parity, marginal spectra, entropies and mutual information across a cut
    Analyze(AnalyzeArgs),
    /// Campaign: marginal spectra agree across every cut for definite-parity states
    Verify(VerifyArgs),
    /// Hunt for states whose marginal spectra disagree (unrestricted sector)
    Counterexample(CounterexampleArgs),
    /// Decide whether a four-mode even state maps faithfully onto four qubits
    JwCheck(JwCheckArgs),
    /// Worked examples plus the faithfulness analysis of one state
    AppendixDemo(AppendixDemoArgs),
    /// Reproduce every worked number end to end
    Examples(ExamplesArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Args)]
struct OutputArgs {
    /// Write the report here instead of stdout
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

#[derive(Args)]
struct ReduceArgs {
    /// State file (JSON)
    state: PathBuf,
    /// Comma-separated modes to trace out (may be empty)
    #[arg(long, conflicts_with = "keep")]
    trace: Option<String>,
    /// Comma-separated modes to keep
    #[arg(long)]
    keep: Option<String>,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// State file (JSON)
    state: PathBuf,
    /// Bipartition, e.g. 1,2|3,4
    #[arg(long)]
    cut: String,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    modes: u32,
    #[arg(long, default_value_t = 200)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Parity sector: even or odd
    #[arg(long)]
    sector: String,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// "all" or semicolon-separated cuts like "1|2,3;1,2|3"
    #[arg(long, default_value = "all")]
    cuts: String,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct CounterexampleArgs {
    #[arg(long)]
    modes: u32,
    #[arg(long, default_value_t = 200)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// "all" or semicolon-separated cuts like "1|2,3;1,2|3"
    #[arg(long, default_value = "all")]
    cuts: String,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct JwCheckArgs {
    /// State file (JSON); alternatively use --alpha
    #[arg(required_unless_present = "alpha", conflicts_with = "alpha")]
    state: Option<PathBuf>,
    /// Eight even-sector amplitudes, positional: vacuum, {1,2}, {1,3},
    /// {1,4}, {2,3}, {2,4}, {3,4}, {1,2,3,4}
    #[arg(long)]
    alpha: Option<String>,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct AppendixDemoArgs {
    /// Amplitudes for the faithfulness analysis; defaults to the built-in
    /// generic state (every congruence active)
    #[arg(long)]
    alpha: Option<String>,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct ExamplesArgs {
    #[command(flatten)]
    out: OutputArgs,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::SpectrumViolation { .. }
        | Error::AmbiguousEntanglement { .. }
        | Error::MissingPhase { .. }
        | Error::SingularSystem { .. } => 1,
        _ => 2,
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.cmd {
        Cmd::Reduce(args) => cmd_reduce(args),
        Cmd::Analyze(args) => cmd_analyze(args),
        Cmd::Verify(args) => cmd_verify(args),
        Cmd::Counterexample(args) => cmd_counterexample(args),
        Cmd::JwCheck(args) => cmd_jw_check(args),
        Cmd::AppendixDemo(args) => cmd_appendix_demo(args),
        Cmd::Examples(args) => cmd_examples(args),
    }
}

/// 12 significant digits, the text-mode precision.
fn sig(x: f64) -> String {
    format!("{x:.11e}")
}

fn sig_complex(z: &fermi_core::Complex64) -> String {
    let sign = if z.im.is_sign_negative() { "-" } else { "+" };
    format!("{}{}{}i", sig(z.re), sign, sig(z.im.abs()))
}

fn join_sig(values: &[f64]) -> String {
    values.iter().map(|v| sig(*v)).collect::<Vec<_>>().join(" ")
}

fn emit(out: &OutputArgs, content: String) -> Result<()> {
    match &out.output {
        Some(path) => std::fs::write(path, content)?,
        None => print!("{content}"),
    }
    Ok(())
}

fn cmd_reduce(args: ReduceArgs) -> Result<ExitCode> {
    let psi = read_state_file(&args.state)?;
    let n = psi.n_modes();
    let kept: Vec<u32> = match (&args.keep, &args.trace) {
        (Some(keep), _) => parse_mode_list(keep)?,
        (None, trace) => {
            let traced = parse_mode_list(trace.as_deref().unwrap_or(""))?;
            let mut seen = BTreeSet::new();
            for &m in &traced {
                if m > n {
                    return Err(Error::ModeOutOfRange { mode: m, n });
                }
                if !seen.insert(m) {
                    return Err(Error::InvalidPartition(format!("mode {m} listed twice")));
                }
            }
            (1..=n).filter(|m| !seen.contains(m)).collect()
        }
    };
    let rho = pure_reduction(&psi, &kept)?;
    let spec = spectrum(&rho)?;
    let entropy = von_neumann_entropy(&spec)?;

    let rendering = match args.out.format {
        Format::Json => density_to_json(&rho) + "\n",
        Format::Csv => {
            let mut s = String::from("row,col,re,im\n");
            for r in 0..rho.dim() {
                for c in 0..rho.dim() {
                    let z = rho.matrix()[(r, c)];
                    s.push_str(&format!("{r},{c},{},{}\n", z.re, z.im));
                }
            }
            s
        }
        Format::Text => {
            let mut s = format!("modes: {}\nmatrix:\n", label_modes(rho.modes()));
            for r in 0..rho.dim() {
                let row: Vec<String> = (0..rho.dim())
                    .map(|c| sig_complex(&rho.matrix()[(r, c)]))
                    .collect();
                s.push_str(&format!("  {}\n", row.join("  ")));
            }
            s.push_str(&format!("spectrum: {}\n", join_sig(spec.values())));
            s.push_str(&format!("entropy: {}\n", sig(entropy)));
            s
        }
    };
    if args.out.output.is_some() {
        // The file is the artifact; keep the human summary on stdout.
        emit(&args.out, rendering)?;
        println!("spectrum: {}", join_sig(spec.values()));
        println!("entropy: {}", sig(entropy));
    } else {
        emit(&args.out, rendering)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn label_modes(modes: &[u32]) -> String {
    if modes.is_empty() {
        "none".into()
    } else {
        modes
            .iter()
            .map(|m| m.to_string())
            .collect::<Vec<_>>()
            .join(",")
    }
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<ExitCode> {
    let psi = read_state_file(&args.state)?;
    let cut = parse_cut_spec(&args.cut)?;
    let (spec_a, spec_b) = fermi_core::entanglement::marginal_spectra(&psi, &cut)?;
    let mismatch = spectrum_distance(&spec_a, &spec_b);
    let entropy_a = von_neumann_entropy(&spec_a)?;
    let entropy_b = von_neumann_entropy(&spec_b)?;
    let record = AnalysisRecord {
        state_id: args
            .state
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "state".into()),
        cut: cut.label(),
        parity: parity_check(&psi).to_string(),
        spectrum_a: report_spectrum(&spec_a),
        spectrum_b: report_spectrum(&spec_b),
        mismatch,
        entropy_a,
        entropy_b,
        // The input is pure, so its own entropy vanishes and the mutual
        // information is the sum of the marginal entropies.
        mutual_information: entropy_a + entropy_b,
    };
    let rendering = match args.out.format {
        Format::Json => serde_json::to_string_pretty(&record)? + "\n",
        Format::Csv => format!("{ANALYSIS_CSV_HEADER}\n{}\n", record.csv_row()),
        Format::Text => format!(
            "state: {}\ncut: {}\nparity: {}\nspectrum A: {}\nspectrum B: {}\n\
             mismatch: {}\nentropy A: {}\nentropy B: {}\nmutual information: {}\n",
            record.state_id,
            record.cut,
            record.parity,
            join_sig(&record.spectrum_a),
            join_sig(&record.spectrum_b),
            sig(record.mismatch),
            sig(record.entropy_a),
            sig(record.entropy_b),
            sig(record.mutual_information),
        ),
    };
    emit(&args.out, rendering)?;
    Ok(ExitCode::SUCCESS)
}

fn parse_cuts_flag(s: &str) -> Result<CutSelection> {
    if s.trim() == "all" {
        return Ok(CutSelection::All);
    }
    let cuts: Vec<ModePartition> = s
        .split(';')
        .map(|tok| parse_cut_spec(tok.trim()))
        .collect::<Result<_>>()?;
    Ok(CutSelection::Explicit(cuts))
}

fn trial_csv(per_trial: &[TrialRecord]) -> String {
    let mut s = String::from("trial,worst_mismatch,worst_cut\n");
    for rec in per_trial {
        s.push_str(&format!(
            "{},{},{}\n",
            rec.trial,
            rec.worst_mismatch,
            rec.worst_cut.replace(',', ";")
        ));
    }
    s
}

fn cuts_echo_text(cuts: &CutsEcho) -> String {
    match cuts {
        CutsEcho::Keyword(k) => k.clone(),
        CutsEcho::Labels(labels) => labels.join(" "),
    }
}

fn campaign_text(report: &CampaignReport) -> String {
    format!(
        "modes: {}\ntrials: {}\nseed: {}\nsector: {}\ntolerance: {:e}\ncuts: {}\n\
         max mismatch: {} (trial {}, cut {})\nruntime: {:.3}s\nresult: pass\n",
        report.modes,
        report.trials,
        report.seed,
        report.sector,
        report.tolerance,
        cuts_echo_text(&report.cuts),
        sig(report.max_mismatch),
        report.worst_trial,
        report.worst_cut,
        report.runtime.as_secs_f64(),
    )
}

fn cmd_verify(args: VerifyArgs) -> Result<ExitCode> {
    let cfg = CampaignConfig {
        modes: args.modes,
        trials: args.trials,
        seed: args.seed,
        tolerance: args.tol,
        sector: args.sector.parse::<Sector>()?,
        cuts: parse_cuts_flag(&args.cuts)?,
    };
    let report = verify_theorem(&cfg)?;
    let rendering = match args.out.format {
        Format::Json => serde_json::to_string_pretty(&report)? + "\n",
        Format::Csv => trial_csv(&report.per_trial),
        Format::Text => campaign_text(&report),
    };
    emit(&args.out, rendering)?;
    Ok(ExitCode::SUCCESS)
}

fn counterexample_text(report: &CounterexampleReport) -> String {
    format!(
        "modes: {}\ntrials: {}\nseed: {}\ncuts: {}\n\
         best mismatch: {} (trial {}, cut {})\noracle recheck: {}\n\
         state support: {} patterns\nruntime: {:.3}s\n",
        report.modes,
        report.trials,
        report.seed,
        cuts_echo_text(&report.cuts),
        sig(report.best_mismatch),
        report.best_trial,
        report.best_cut,
        sig(report.oracle_mismatch),
        report.state.terms.len(),
        report.runtime.as_secs_f64(),
    )
}

fn cmd_counterexample(args: CounterexampleArgs) -> Result<ExitCode> {
    let cfg = CampaignConfig {
        modes: args.modes,
        trials: args.trials,
        seed: args.seed,
        tolerance: 1e-9,
        sector: Sector::Unrestricted,
        cuts: parse_cuts_flag(&args.cuts)?,
    };
    let report = find_counterexample(&cfg)?;
    let rendering = match args.out.format {
        Format::Json => serde_json::to_string_pretty(&report)? + "\n",
        Format::Csv => trial_csv(&report.per_trial),
        Format::Text => counterexample_text(&report),
    };
    emit(&args.out, rendering)?;
    Ok(ExitCode::SUCCESS)
}

fn congruence_text(coeffs: &[i64], variables: &[String], rhs: i64) -> String {
    let mut terms = String::new();
    for (c, pattern) in coeffs.iter().zip(variables) {
        match c {
            0 => {}
            1 => terms.push_str(&format!(" +phi({pattern})")),
            -1 => terms.push_str(&format!(" -phi({pattern})")),
            c if *c > 0 => terms.push_str(&format!(" +{c} phi({pattern})")),
            c => terms.push_str(&format!(" {c} phi({pattern})")),
        }
    }
    let rhs = if rhs == 0 { "0" } else { "pi" };
    format!("{} = {} (mod 2 pi)", terms.trim_start(), rhs)
}

fn faithfulness_text(report: &FaithfulnessReport) -> String {
    let mut s = format!("verdict: {}\n", report.verdict);
    s.push_str(&format!(
        "activated congruences: {}\n",
        report.activated_rows.len()
    ));
    for row in &report.activated_rows {
        s.push_str(&format!(
            "  [{}]  {}\n",
            row.sources.join("; "),
            congruence_text(&row.coeffs, &report.variables, row.rhs_half_turns),
        ));
    }
    if let Some(witness) = &report.witness {
        let w: Vec<String> = witness.iter().map(|c| c.to_string()).collect();
        s.push_str(&format!("witness multipliers: {}\n", w.join(" ")));
        s.push_str("no phase assignment reproduces all pair off-diagonal magnitudes\n");
    }
    if let Some(phases) = &report.phases {
        s.push_str("phases:\n");
        for (pattern, phase) in phases {
            s.push_str(&format!("  phi({pattern}) = {}\n", sig(*phase)));
        }
    }
    if let Some(err) = report.max_offdiag_error {
        s.push_str(&format!("max off-diagonal magnitude error: {}\n", sig(err)));
    }
    s
}

fn faithfulness_csv(report: &FaithfulnessReport) -> String {
    let mut s = String::from("key,value\n");
    s.push_str(&format!("verdict,{}\n", report.verdict));
    if let Some(witness) = &report.witness {
        let w: Vec<String> = witness.iter().map(|c| c.to_string()).collect();
        s.push_str(&format!("witness,{}\n", w.join(";")));
    }
    if let Some(phases) = &report.phases {
        for (pattern, phase) in phases {
            s.push_str(&format!("phase:{pattern},{phase}\n"));
        }
    }
    if let Some(err) = report.max_offdiag_error {
        s.push_str(&format!("max_offdiag_error,{err}\n"));
    }
    s
}

fn jw_input_state(state: &Option<PathBuf>, alpha: &Option<String>) -> Result<FermionicState> {
    match (state, alpha) {
        (_, Some(alpha)) => {
            let alphas = parse_alpha_list(alpha)?;
            even_four_mode_state(&alphas).normalized()
        }
        (Some(path), None) => read_state_file(path),
        (None, None) => Err(Error::Parse("provide a state file or --alpha".into())),
    }
}

fn cmd_jw_check(args: JwCheckArgs) -> Result<ExitCode> {
    let psi = jw_input_state(&args.state, &args.alpha)?;
    let report = faithfulness_check(&psi)?;
    let rendering = match args.out.format {
        Format::Json => serde_json::to_string_pretty(&report)? + "\n",
        Format::Csv => faithfulness_csv(&report),
        Format::Text => faithfulness_text(&report),
    };
    emit(&args.out, rendering)?;
    Ok(if report.is_faithful() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn examples_text(report: &ExamplesReport) -> String {
    let mut s = String::new();
    for check in &report.checks {
        let relation = match check.kind {
            fermi_core::verifier::BoundKind::Max => "<=",
            fermi_core::verifier::BoundKind::Min => ">=",
        };
        s.push_str(&format!(
            "[{}] {}: {} {} {:e}\n",
            if check.pass { "pass" } else { "FAIL" },
            check.name,
            sig(check.value),
            relation,
            check.bound,
        ));
    }
    s.push_str(if report.all_pass {
        "all checks passed\n"
    } else {
        "some checks FAILED\n"
    });
    s
}

fn examples_csv(report: &ExamplesReport) -> String {
    let mut s = String::from("name,value,bound,kind,pass\n");
    for check in &report.checks {
        let kind = match check.kind {
            fermi_core::verifier::BoundKind::Max => "max",
            fermi_core::verifier::BoundKind::Min => "min",
        };
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            check.name.replace(',', ";"),
            check.value,
            check.bound,
            kind,
            check.pass,
        ));
    }
    s
}

fn cmd_examples(args: ExamplesArgs) -> Result<ExitCode> {
    let report = run_worked_examples()?;
    let rendering = match args.out.format {
        Format::Json => serde_json::to_string_pretty(&report)? + "\n",
        Format::Csv => examples_csv(&report),
        Format::Text => examples_text(&report),
    };
    emit(&args.out, rendering)?;
    Ok(if report.all_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

/// Combined report of the demo subcommand.
#[derive(serde::Serialize)]
struct DemoReport {
    examples: ExamplesReport,
    faithfulness: FaithfulnessReport,
}

fn cmd_appendix_demo(args: AppendixDemoArgs) -> Result<ExitCode> {
    let psi = match &args.alpha {
        Some(alpha) => even_four_mode_state(&parse_alpha_list(alpha)?).normalized()?,
        None => worked_example_state()?,
    };
    let examples = run_worked_examples()?;
    let faithfulness = faithfulness_check(&psi)?;
    let all_pass = examples.all_pass;
    let rendering = match args.out.format {
        Format::Json => {
            serde_json::to_string_pretty(&DemoReport {
                examples,
                faithfulness,
            })? + "\n"
        }
        Format::Csv => {
            let mut s = examples_csv(&examples);
            s.push('\n');
            s.push_str(&faithfulness_csv(&faithfulness));
            s
        }
        Format::Text => {
            let mut s = examples_text(&examples);
            s.push('\n');
            s.push_str(&faithfulness_text(&faithfulness));
            s
        }
    };
    emit(&args.out, rendering)?;
    Ok(if all_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}
