use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Parser, Subcommand, ValueEnum};
use photonic_lab::analysis::{
    gate_spec, optimize_gate, verify_gate, GateOptions, GateReport, GateSpec, OptimizationOutcome,
    OptimizationProblem, GATE_NAMES, PROBLEM_NAMES,
};
use photonic_lab::circuit::{Circuit, SimplifiedParams};
use photonic_lab::{prepare_logical_input, LogicalAmplitudes, PhotonicState, C64};
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::error::{self, CliError};
use crate::file::{CircuitFile, GateMeta, IdealGate, OutputBins};
use crate::format::{complex, probability, sig12};

#[derive(Debug, Parser)]
#[command(name = "photonic-lab", version, about = "Verify, simulate and optimize linear-optical gates")]
pub struct Cli {
    /// TOML configuration file (takes precedence over PHOTONIC_LAB_CONFIG).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a gate's truth table, fidelity and success probability.
    Verify {
        /// Built-in gate name or circuit file.
        target: String,
        /// Logical input amplitudes, comma separated (e.g. `0.6,0.8i,0,0`).
        #[arg(long, conflicts_with = "sweep", allow_hyphen_values = true)]
        input: Option<String>,
        /// Number of random inputs to check the success probability on.
        #[arg(long)]
        sweep: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
        /// Optimizer output supplying the known-target CNOT parameters.
        #[arg(long)]
        params: Option<PathBuf>,
    },
    /// Run one input through a circuit and print the surviving state.
    Simulate {
        target: String,
        #[arg(long, allow_hyphen_values = true)]
        input: Option<String>,
        /// Also print every detection branch with unnormalized amplitudes.
        #[arg(long)]
        dump_state: bool,
        /// Stop at a named checkpoint.
        #[arg(long)]
        until: Option<String>,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
        #[arg(long)]
        params: Option<PathBuf>,
    },
    /// Maximize a gate family's success probability at unit fidelity.
    Optimize {
        problem: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        restarts: Option<usize>,
        /// Where to write the parameter file.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Write a built-in gate as a circuit file.
    Export {
        gate: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        params: Option<PathBuf>,
    },
    /// List built-in gates and optimization problems.
    List,
}

/// What a command prints and how the process should exit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Output {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Output {
    fn ok(stdout: String, code: i32) -> Self {
        Output {
            code,
            stdout,
            stderr: String::new(),
        }
    }

    fn error(e: &CliError) -> Self {
        Output {
            code: e.exit_code(),
            stdout: String::new(),
            stderr: format!("error: {e}\n"),
        }
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> Output
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            return if code == 0 {
                Output::ok(text, 0)
            } else {
                Output {
                    code,
                    stdout: String::new(),
                    stderr: text,
                }
            };
        }
    };
    match execute(&cli) {
        Ok(out) => out,
        Err(e) => Output::error(&e),
    }
}

fn execute(cli: &Cli) -> Result<Output, CliError> {
    let config = Config::load(cli.config.as_deref())?;
    match &cli.command {
        Command::Verify {
            target,
            input,
            sweep,
            seed,
            format,
            params,
        } => {
            let spec = resolve_spec(target, &config, params.as_deref())?;
            let seed = seed.unwrap_or(config.seed);
            cmd_verify(&spec, input.as_deref(), sweep.map(|n| (n, seed)), *format, &config)
        }
        Command::Simulate {
            target,
            input,
            dump_state,
            until,
            format,
            params,
        } => {
            let circuit = resolve_circuit(target, &config, params.as_deref())?;
            cmd_simulate(&circuit, input.as_deref(), *dump_state, until.as_deref(), *format)
        }
        Command::Optimize {
            problem,
            seed,
            restarts,
            out,
            format,
        } => {
            let mut opt = config.optimizer();
            if let Some(s) = seed {
                opt.seed = *s;
            }
            if let Some(r) = restarts {
                opt.restarts = *r;
            }
            cmd_optimize(problem, &opt, out.as_deref(), *format)
        }
        Command::Export { gate, out, params } => {
            let options = gate_options(&config, params.as_deref())?;
            let text = export_gate(gate, &options)?.to_json();
            match out {
                Some(path) => {
                    error::write(path, &text)?;
                    Ok(Output::ok(String::new(), 0))
                }
                None => Ok(Output::ok(text, 0)),
            }
        }
        Command::List => {
            let mut s = String::from("gates\n");
            for g in GATE_NAMES {
                writeln!(s, "  {g}").unwrap();
            }
            s.push_str("problems\n");
            for p in PROBLEM_NAMES {
                writeln!(s, "  {p}").unwrap();
            }
            Ok(Output::ok(s, 0))
        }
    }
}

/// Parameter files are optimizer outputs; only `parameters` is required.
#[derive(Debug, Deserialize)]
struct ParamsFile {
    #[serde(default)]
    problem: Option<String>,
    parameters: Vec<f64>,
}

fn gate_options(config: &Config, params: Option<&Path>) -> Result<GateOptions, CliError> {
    let mut options = GateOptions {
        time_bin: config.time_bin,
        ..GateOptions::default()
    };
    if let Some(path) = params {
        let text = error::read(path)?;
        let file: ParamsFile = serde_json::from_str(&text).map_err(|e| CliError::Parse {
            origin: path.display().to_string(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        if let Some(p) = file.problem.as_deref().filter(|p| *p != "simplified-cnot") {
            return Err(CliError::Usage(format!(
                "{}: parameters are for `{p}`, not the known-target CNOT",
                path.display()
            )));
        }
        options.simplified = SimplifiedParams::from_slice(&file.parameters)?;
    }
    Ok(options)
}

fn load_file(target: &str) -> Result<Option<CircuitFile>, CliError> {
    let path = Path::new(target);
    if GATE_NAMES.contains(&target) || !path.exists() {
        return Ok(None);
    }
    let text = error::read(path)?;
    CircuitFile::parse(&text, target).map(Some)
}

fn resolve_spec(target: &str, config: &Config, params: Option<&Path>) -> Result<GateSpec, CliError> {
    match load_file(target)? {
        Some(file) => file.to_spec(),
        None if GATE_NAMES.contains(&target) => Ok(gate_spec(target, &gate_options(config, params)?)?),
        None => Err(CliError::UnknownGate(target.to_string())),
    }
}

fn resolve_circuit(target: &str, config: &Config, params: Option<&Path>) -> Result<Circuit, CliError> {
    match load_file(target)? {
        Some(file) => file.to_circuit(),
        None => Ok(resolve_spec(target, config, params)?.circuit),
    }
}

/// The circuit file for a built-in gate. The known-target CNOT has no qubit
/// code (its target may be empty), so it is exported without a gate section.
pub fn export_gate(name: &str, options: &GateOptions) -> Result<CircuitFile, CliError> {
    let spec = match gate_spec(name, options) {
        Err(photonic_lab::Error::UnknownGate(g)) => return Err(CliError::UnknownGate(g)),
        other => other?,
    };
    let meta = match name {
        "cnot-simplified" => None,
        _ => Some(GateMeta {
            ideal: if name.starts_with("fredkin") {
                IdealGate::Fredkin
            } else {
                IdealGate::Cnot
            },
            expected_probability: spec.expected_probability,
            output_bins: if spec.circuit.registry().time_resolved() {
                OutputBins::FollowControl
            } else {
                OutputBins::Default
            },
        }),
    };
    Ok(CircuitFile::from_circuit(&spec.circuit, meta))
}

pub fn parse_amplitudes(text: &str) -> Result<Vec<C64>, CliError> {
    text.split(',')
        .map(|s| {
            let s = s.trim();
            C64::from_str(s).map_err(|_| CliError::Usage(format!("`{s}` is not a complex number")))
        })
        .collect()
}

/// The run of one explicit input through a gate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputRun {
    pub amplitudes: Vec<[f64; 2]>,
    pub probability: f64,
    /// Normalized logical output; empty if nothing got through.
    pub output: Vec<[f64; 2]>,
    pub ideal_output: Vec<[f64; 2]>,
    pub state_fidelity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    #[serde(flatten)]
    pub report: GateReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_run: Option<InputRun>,
}

fn pairs(v: &[C64]) -> Vec<[f64; 2]> {
    v.iter().map(|z| [z.re, z.im]).collect()
}

fn run_input(spec: &GateSpec, amplitudes: &[C64]) -> Result<InputRun, CliError> {
    if amplitudes.len() != spec.dimension() {
        return Err(photonic_lab::Error::AmplitudeCount {
            expected: spec.dimension(),
            got: amplitudes.len(),
        }
        .into());
    }
    let terms: Vec<(usize, C64)> = amplitudes.iter().copied().enumerate().collect();
    let input = spec.superpose(&terms)?;
    let result = spec.circuit.run(&input)?;
    let p = result.success_probability();
    let ideal: Vec<C64> = (0..spec.outputs.len())
        .map(|i| (0..spec.dimension()).map(|j| spec.ideal[(i, j)] * amplitudes[j]).sum())
        .collect();
    let ideal_norm = ideal.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let ideal: Vec<C64> = ideal.iter().map(|z| z / ideal_norm).collect();
    let (output, fidelity) = match result.conditional_state() {
        Some(state) => {
            let out: Vec<C64> = spec.outputs.iter().map(|o| state.amplitude(o)).collect();
            let overlap: C64 = ideal.iter().zip(&out).map(|(a, b)| a.conj() * b).sum();
            (out, overlap.norm_sqr())
        }
        None => (Vec::new(), 0.0),
    };
    Ok(InputRun {
        amplitudes: pairs(amplitudes),
        probability: p,
        output: pairs(&output),
        ideal_output: pairs(&ideal),
        state_fidelity: fidelity,
    })
}

pub fn cmd_verify(
    spec: &GateSpec,
    input: Option<&str>,
    sweep: Option<(usize, u64)>,
    format: Format,
    config: &Config,
) -> Result<Output, CliError> {
    let tol = config.tolerances();
    let input_run = match input {
        Some(text) => Some(run_input(spec, &parse_amplitudes(text)?)?),
        None => None,
    };
    let report = verify_gate(spec, sweep, &tol)?;
    let input_ok = input_run.as_ref().is_none_or(|r| {
        r.state_fidelity >= 1.0 - tol.fidelity
            && (r.probability - report.success_probability).abs() <= tol.probability
    });
    let passed = report.passed && input_ok;
    let full = VerifyReport { report, input_run };
    let text = match format {
        Format::Json => json(&full),
        Format::Table => verify_table(&full, passed, spec),
    };
    Ok(Output::ok(text, if passed { 0 } else { 1 }))
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports always serialize");
    s.push('\n');
    s
}

fn verify_table(full: &VerifyReport, passed: bool, spec: &GateSpec) -> String {
    let r = &full.report;
    let mut s = String::new();
    let row = |s: &mut String, k: &str, v: String| writeln!(s, "{k:<22}{v}").unwrap();
    row(&mut s, "gate", r.gate.clone());
    row(&mut s, "dimension", r.dimension.to_string());
    row(&mut s, "heralded branches", r.branches.to_string());
    row(&mut s, "process fidelity", sig12(r.process_fidelity));
    row(&mut s, "success probability", probability(r.success_probability));
    if let Some(e) = r.expected_probability {
        row(&mut s, "expected probability", probability(e));
    }
    row(&mut s, "tomography residual", sig12(r.tomography_residual));
    if let Some(sw) = &r.sweep {
        row(
            &mut s,
            "sweep",
            format!(
                "{} inputs, min {}, max {}, spread {}",
                sw.probabilities.len(),
                probability(sw.min),
                probability(sw.max),
                sig12(sw.spread)
            ),
        );
    }
    if let Some(run) = &full.input_run {
        row(&mut s, "input probability", probability(run.probability));
        row(&mut s, "input fidelity", sig12(run.state_fidelity));
        s.push_str("input output state\n");
        for (label, a) in spec.output_labels.iter().zip(&run.output) {
            if a[0] != 0.0 || a[1] != 0.0 {
                writeln!(s, "  {label:<10}{}", complex(a[0], a[1])).unwrap();
            }
        }
    }
    s.push_str("truth table\n");
    for t in &r.truth_table {
        writeln!(
            s,
            "  {:<8}-> {:<10}amplitude {}  p {}",
            t.input,
            t.output,
            complex(t.amplitude[0], t.amplitude[1]),
            probability(t.probability)
        )
        .unwrap();
    }
    s.push_str("conventions\n");
    for c in &r.conventions {
        writeln!(s, "  {c}").unwrap();
    }
    row(&mut s, "result", if passed { "PASS".into() } else { "FAIL".into() });
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub ket: String,
    pub occupations: Vec<u8>,
    pub amplitude: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchDump {
    pub outcomes: Vec<String>,
    pub probability: f64,
    pub state: Vec<Term>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub circuit: String,
    pub stopped_at: Option<String>,
    pub probability: f64,
    /// Mode labels in canonical order; `occupations` index into this.
    pub modes: Vec<String>,
    /// Surviving state normalized to one.
    pub state: Vec<Term>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub branches: Option<Vec<BranchDump>>,
}

/// Photons in earlier modes first, as `describe` orders them.
fn terms(state: &PhotonicState) -> Vec<Term> {
    let mut all: Vec<_> = state.iter().collect();
    all.reverse();
    all.into_iter()
        .map(|(occ, a)| Term {
            ket: occ.ket(state.registry()),
            occupations: occ.occupations().to_vec(),
            amplitude: [a.re, a.im],
        })
        .collect()
}

pub fn cmd_simulate(
    circuit: &Circuit,
    input: Option<&str>,
    dump_state: bool,
    until: Option<&str>,
    format: Format,
) -> Result<Output, CliError> {
    let n = circuit.qubits().len();
    let amplitudes = match input {
        Some(text) => LogicalAmplitudes::new(parse_amplitudes(text)?)?,
        None => LogicalAmplitudes::basis(n, 0),
    };
    if amplitudes.qubits() != n {
        return Err(photonic_lab::Error::AmplitudeCount {
            expected: 1 << n,
            got: amplitudes.as_slice().len(),
        }
        .into());
    }
    let state = prepare_logical_input(circuit.registry(), &amplitudes, circuit.qubits())?;
    let result = match until {
        Some(name) => circuit.run_until(&state, name)?,
        None => circuit.run(&state)?,
    };
    let report = SimulationReport {
        circuit: circuit.name.clone(),
        stopped_at: until.map(str::to_string),
        probability: result.success_probability(),
        modes: circuit.registry().labels().iter().map(|l| l.to_string()).collect(),
        state: result.conditional_state().map(|s| terms(&s)).unwrap_or_default(),
        branches: dump_state.then(|| {
            result
                .branches
                .iter()
                .map(|b| BranchDump {
                    outcomes: b.outcomes.iter().map(|o| o.to_string()).collect(),
                    probability: b.probability(),
                    state: terms(&b.state),
                })
                .collect()
        }),
    };
    let text = match format {
        Format::Json => json(&report),
        Format::Table => simulate_table(&report),
    };
    Ok(Output::ok(text, 0))
}

fn simulate_table(r: &SimulationReport) -> String {
    let mut s = String::new();
    writeln!(s, "{:<14}{}", "circuit", r.circuit).unwrap();
    writeln!(s, "{:<14}{}", "stopped at", r.stopped_at.as_deref().unwrap_or("end")).unwrap();
    writeln!(s, "{:<14}{}", "probability", probability(r.probability)).unwrap();
    s.push_str("state\n");
    let dump = |s: &mut String, terms: &[Term]| {
        for t in terms {
            writeln!(s, "  {:<36}{}", complex(t.amplitude[0], t.amplitude[1]), t.ket).unwrap();
        }
    };
    dump(&mut s, &r.state);
    if let Some(branches) = &r.branches {
        writeln!(s, "modes {}", r.modes.join(" ")).unwrap();
        for (i, b) in r.branches.iter().flatten().enumerate() {
            let rec = if b.outcomes.is_empty() {
                "-".to_string()
            } else {
                b.outcomes.join("; ")
            };
            writeln!(s, "branch {i}  p {}  {rec}", probability(b.probability)).unwrap();
            dump(&mut s, &b.state);
        }
        if branches.is_empty() {
            s.push_str("no branch survived\n");
        }
    }
    s
}

pub fn cmd_optimize(
    problem: &str,
    config: &photonic_lab::analysis::OptimizerConfig,
    out: Option<&Path>,
    format: Format,
) -> Result<Output, CliError> {
    let p = OptimizationProblem::named(problem).map_err(|_| {
        CliError::Usage(format!(
            "unknown problem `{problem}`; known problems: {}",
            PROBLEM_NAMES.join(", ")
        ))
    })?;
    let outcome = optimize_gate(&p, config)?;
    if let Some(path) = out {
        error::write(path, &json(&outcome))?;
    }
    let text = match format {
        Format::Json => json(&outcome),
        Format::Table => optimize_table(&outcome),
    };
    let mut output = Output::ok(text, if outcome.feasible { 0 } else { 1 });
    if !outcome.feasible {
        output.stderr = format!(
            "error: no feasible point within budget; best infidelity {}\n",
            sig12(outcome.infidelity)
        );
    }
    Ok(output)
}

fn optimize_table(o: &OptimizationOutcome) -> String {
    let mut s = String::new();
    let row = |s: &mut String, k: &str, v: String| writeln!(s, "{k:<14}{v}").unwrap();
    row(&mut s, "problem", o.problem.clone());
    row(&mut s, "seed", o.seed.to_string());
    row(&mut s, "restarts", o.restarts.to_string());
    row(&mut s, "evaluations", o.evaluations.to_string());
    row(&mut s, "feasible", if o.feasible { "yes".into() } else { "no".into() });
    s.push_str("parameters\n");
    for (name, v) in o.parameter_names.iter().zip(&o.parameters) {
        writeln!(s, "  {name:<20}{}", sig12(*v)).unwrap();
    }
    row(&mut s, "probability", probability(o.probability));
    row(&mut s, "fidelity", sig12(o.fidelity));
    row(&mut s, "infidelity", sig12(o.infidelity));
    s
}
