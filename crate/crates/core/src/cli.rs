//! Command-line front end.
//!
//! [`parse_and_dispatch`] is the whole program; the `dndm` binary only wires
//! it to the process streams. Exit status is 0 on success, 1 on usage or
//! validation errors and 2 when `verify` reports failing checks.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::analytics::expected_nfe;
use crate::batch::map_trials;
use crate::datamodel::{load_data_model, oracle_denoiser, DecodeMode};
use crate::domain::{NoiseKind, NoiseModel, RngStream, Sequence, VocabSpec};
use crate::error::{Error, Result};
use crate::forward::{markov_forward, nonmarkov_forward};
use crate::sampler::{run_sampler, SampleTrace, SamplerConfig, SamplerKind};
use crate::schedule::{
    beta_transition_distribution, transition_distribution, AlphaSchedule, DiscretePmf,
    ScheduleKind, Time, TransitionOrder, TransitionSet, TransitionTimeDistribution,
    DEFAULT_CONTINUOUS_BETA, DEFAULT_COSINE_OFFSET, DEFAULT_DISCRETE_BETA,
};
use crate::verify::{verify_suite, VerifyConfig, FULL_TRIALS};

pub const DEFAULT_SEED: u64 = 7;

#[derive(Parser, Debug)]
#[command(
    name = "dndm",
    version,
    about = "Discrete non-Markov diffusion samplers over toy categorical data"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct GlobalArgs {
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Output file; `sample` treats it as a prefix and writes PREFIX.jsonl and PREFIX.csv.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Worker threads for batched trials; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    parallelism: usize,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Format {
    Csv,
    Jsonl,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum NoiseArg {
    Uniform,
    Absorbing,
}

impl From<NoiseArg> for NoiseKind {
    fn from(n: NoiseArg) -> Self {
        match n {
            NoiseArg::Uniform => NoiseKind::UniformMultinomial,
            NoiseArg::Absorbing => NoiseKind::Absorbing,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum OrderArg {
    Random,
    LeftToRight,
    RightToLeft,
}

impl From<OrderArg> for TransitionOrder {
    fn from(o: OrderArg) -> Self {
        match o {
            OrderArg::Random => TransitionOrder::Random,
            OrderArg::LeftToRight => TransitionOrder::LeftToRight,
            OrderArg::RightToLeft => TransitionOrder::RightToLeft,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum ProcessArg {
    Markov,
    NonMarkov,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Steps {
    Finite(usize),
    Infinite,
}

impl Steps {
    fn get(self) -> Option<usize> {
        match self {
            Steps::Finite(t) => Some(t),
            Steps::Infinite => None,
        }
    }
}

impl FromStr for Steps {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "inf" {
            return Ok(Steps::Infinite);
        }
        match s.parse::<usize>() {
            Ok(t) if t >= 1 => Ok(Steps::Finite(t)),
            _ => Err(format!("expected a positive integer or `inf`, got `{s}`")),
        }
    }
}

/// `schedule`, `beta` (default parameters) or `beta:a,b`.
#[derive(Clone, Copy, Debug, PartialEq)]
enum TauArg {
    Schedule,
    Beta(Option<(f64, f64)>),
}

impl FromStr for TauArg {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "schedule" => Ok(TauArg::Schedule),
            "beta" => Ok(TauArg::Beta(None)),
            _ => parse_beta(s).map(|ab| TauArg::Beta(Some(ab))),
        }
    }
}

fn parse_beta(s: &str) -> std::result::Result<(f64, f64), String> {
    let bad = || format!("expected `beta:a,b`, got `{s}`");
    let params = s.strip_prefix("beta:").ok_or_else(bad)?;
    let (a, b) = params.split_once(',').ok_or_else(bad)?;
    let a: f64 = a.trim().parse().map_err(|_| bad())?;
    let b: f64 = b.trim().parse().map_err(|_| bad())?;
    Ok((a, b))
}

#[derive(Args, Debug)]
struct ScheduleArgs {
    #[arg(long, default_value = "linear", value_parser = parse_schedule)]
    schedule: ScheduleKind,
    /// Number of steps, or `inf` for continuous time.
    #[arg(long, default_value = "50")]
    steps: Steps,
    /// Cosine offset `s`.
    #[arg(long, default_value_t = DEFAULT_COSINE_OFFSET)]
    offset: f64,
}

fn parse_schedule(s: &str) -> std::result::Result<ScheduleKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_sampler(s: &str) -> std::result::Result<SamplerKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_decode(s: &str) -> std::result::Result<DecodeMode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Dump a schedule and its transition-time law as `t,alpha,p_tau`.
    Schedules {
        #[command(flatten)]
        schedule: ScheduleArgs,
        #[arg(long, default_value = "schedule")]
        tau: TauArg,
        /// Grid points for continuous schedules.
        #[arg(long, default_value_t = 101)]
        grid: usize,
    },
    /// Run forward corruption trajectories.
    SimulateForward {
        #[command(flatten)]
        schedule: ScheduleArgs,
        #[arg(long, value_enum, default_value = "absorbing")]
        noise: NoiseArg,
        /// Data categories K.
        #[arg(long, default_value_t = 5)]
        k: usize,
        /// Clean sequence as comma-separated token indices.
        #[arg(long, value_delimiter = ',', default_value = "0,2,4")]
        x0: Vec<u32>,
        #[arg(long, value_enum, default_value = "non-markov")]
        process: ProcessArg,
        #[arg(long, default_value_t = 10)]
        trials: u64,
        /// Times to record; defaults to every step (or an 11-point grid in continuous time).
        #[arg(long, value_delimiter = ',')]
        times: Vec<f64>,
    },
    /// Generate sequences with a reverse sampler and the exact oracle denoiser.
    Sample {
        #[arg(long, value_parser = parse_sampler)]
        sampler: SamplerKind,
        #[command(flatten)]
        schedule: ScheduleArgs,
        #[arg(long, default_value = "schedule")]
        tau: TauArg,
        /// Data model file.
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 10)]
        runs: u64,
        #[arg(long, default_value = "sample", value_parser = parse_decode)]
        decode: DecodeMode,
        #[arg(long, value_enum, default_value = "absorbing")]
        noise: NoiseArg,
        /// Draw whole sequences from the joint posterior instead of per-position marginals.
        #[arg(long)]
        joint: bool,
        #[arg(long, value_enum, default_value = "random")]
        order: OrderArg,
        /// Include the sequence after every denoiser call in the traces.
        #[arg(long)]
        record_states: bool,
    },
    /// Expected NFE and its Monte Carlo estimate.
    NfeAnalysis {
        #[arg(long = "steps", value_delimiter = ',', default_value = "4,50,1000")]
        steps: Vec<usize>,
        #[arg(long = "n", value_delimiter = ',', default_value = "2,25")]
        n: Vec<usize>,
        /// `uniform`, `beta:a,b`, `linear`, `cosine` or `cosine2`; repeatable.
        #[arg(long = "dist")]
        dist: Vec<String>,
        /// Monte Carlo transition-set draws per row; 0 skips the estimate.
        #[arg(long, default_value_t = 0)]
        trials: u64,
    },
    /// Run the statistical verification suite.
    Verify {
        #[arg(long, default_value_t = FULL_TRIALS)]
        trials: u64,
        #[arg(long, default_value_t = 1e-4)]
        significance: f64,
        /// Comma-separated check ids.
        #[arg(long, value_delimiter = ',')]
        only: Vec<usize>,
        /// Write the JSON report here.
        #[arg(long)]
        json: Option<PathBuf>,
        /// Shift the expected transition pmf; any positive value should fail check 2.
        #[arg(long, default_value_t = 0.0)]
        pmf_perturbation: f64,
    },
}

/// Parses `args` (including the program name) and runs the command.
pub fn parse_and_dispatch<I, S>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(stderr, "{text}");
                1
            } else {
                let _ = write!(stdout, "{text}");
                0
            };
        }
    };
    match dispatch(cli, stdout) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            1
        }
    }
}

fn dispatch(cli: Cli, stdout: &mut dyn Write) -> Result<i32> {
    let g = &cli.global;
    match &cli.command {
        Command::Schedules {
            schedule,
            tau,
            grid,
        } => {
            check_out(g.out.as_deref())?;
            let table = schedules_table(schedule, *tau, *grid)?;
            emit(g, stdout, &table.render(g.format.unwrap_or(Format::Csv)))?;
        }
        Command::SimulateForward {
            schedule,
            noise,
            k,
            x0,
            process,
            trials,
            times,
        } => {
            check_out(g.out.as_deref())?;
            let table = forward_table(g, schedule, *noise, *k, x0, *process, *trials, times)?;
            emit(g, stdout, &table.render(g.format.unwrap_or(Format::Jsonl)))?;
        }
        Command::Sample { .. } => return sample_command(g, &cli.command, stdout),
        Command::NfeAnalysis {
            steps,
            n,
            dist,
            trials,
        } => {
            check_out(g.out.as_deref())?;
            let table = nfe_table(g, steps, n, dist, *trials)?;
            emit(g, stdout, &table.render(g.format.unwrap_or(Format::Csv)))?;
        }
        Command::Verify {
            trials,
            significance,
            only,
            json,
            pmf_perturbation,
        } => {
            check_out(g.out.as_deref())?;
            check_out(json.as_deref())?;
            let config = VerifyConfig {
                trials: *trials,
                seed: g.seed,
                significance: *significance,
                parallelism: g.parallelism,
                pmf_perturbation: *pmf_perturbation,
                only: (!only.is_empty()).then(|| only.clone()),
            };
            let report = verify_suite(&config)?;
            emit(g, stdout, &report.table())?;
            if let Some(path) = json {
                let text = serde_json::to_string_pretty(&report).expect("report serializes");
                std::fs::write(path, text + "\n")?;
            }
            return Ok(if report.all_passed() { 0 } else { 2 });
        }
    }
    Ok(0)
}

/// Fails early when an output file could not be created.
fn check_out(path: Option<&Path>) -> Result<()> {
    let Some(path) = path else { return Ok(()) };
    if path.is_dir() {
        return Err(Error::arg(format!(
            "output path {} is a directory",
            path.display()
        )));
    }
    let parent = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    if !parent.is_dir() {
        return Err(Error::arg(format!(
            "output directory {} does not exist",
            parent.display()
        )));
    }
    Ok(())
}

fn emit(g: &GlobalArgs, stdout: &mut dyn Write, text: &str) -> Result<()> {
    match &g.out {
        Some(path) => std::fs::write(path, text)?,
        None => stdout.write_all(text.as_bytes())?,
    }
    Ok(())
}

/// Rows rendered either as CSV with a header or as JSONL tagged with `schema`.
struct Table {
    schema: &'static str,
    columns: Vec<&'static str>,
    rows: Vec<Vec<Value>>,
}

impl Table {
    fn new(schema: &'static str, columns: &[&'static str]) -> Self {
        Self {
            schema,
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.csv(),
            Format::Jsonl => self.jsonl(),
        }
    }

    fn csv(&self) -> String {
        let mut out = self.columns.join(",") + "\n";
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(csv_cell).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    fn jsonl(&self) -> String {
        let mut out = String::new();
        for row in &self.rows {
            let mut record = serde_json::Map::new();
            record.insert("schema".into(), Value::from(self.schema));
            for (c, v) in self.columns.iter().zip(row) {
                record.insert((*c).into(), v.clone());
            }
            out.push_str(&Value::Object(record).to_string());
            out.push('\n');
        }
        out
    }
}

fn csv_cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) if s.contains([',', '"', '\n']) => {
            format!("\"{}\"", s.replace('"', "\"\""))
        }
        Value::String(s) => s.clone(),
        Value::Array(items) => items.iter().map(csv_cell).collect::<Vec<_>>().join(" "),
        other => other.to_string(),
    }
}

fn time_value(t: Time) -> Value {
    match t {
        Time::Step(s) => json!(s),
        Time::Continuous(x) => json!(x),
    }
}

fn tau_values(set: &TransitionSet) -> Value {
    match (set.steps(), set.continuous_times()) {
        (Some(s), _) => json!(s),
        (_, Some(c)) => json!(c),
        _ => Value::Null,
    }
}

fn resolve_tau(tau: TauArg, steps: Option<usize>) -> Result<Option<TransitionTimeDistribution>> {
    match tau {
        TauArg::Schedule => Ok(None),
        TauArg::Beta(params) => {
            let default = if steps.is_some() {
                DEFAULT_DISCRETE_BETA
            } else {
                DEFAULT_CONTINUOUS_BETA
            };
            let (a, b) = params.unwrap_or(default);
            beta_transition_distribution(a, b, steps).map(Some)
        }
    }
}

/// The schedule and transition law selected by `--schedule`, `--steps` and
/// `--tau`. An overridden law replaces the schedule by the one it implies.
fn resolve_schedule(
    args: &ScheduleArgs,
    tau: TauArg,
) -> Result<(AlphaSchedule, TransitionTimeDistribution)> {
    let steps = args.steps.get();
    match resolve_tau(tau, steps)? {
        Some(dist) => Ok((AlphaSchedule::from_transition(&dist)?, dist)),
        None => {
            let schedule = args.schedule.build(steps, args.offset)?;
            let dist = transition_distribution(&schedule)?;
            Ok((schedule, dist))
        }
    }
}

fn schedules_table(args: &ScheduleArgs, tau: TauArg, grid: usize) -> Result<Table> {
    let (schedule, dist) = resolve_schedule(args, tau)?;
    let mut table = Table::new("dndm.schedule.v1", &["t", "alpha", "p_tau"]);
    match dist.pmf() {
        Some(pmf) => {
            for t in 1..=pmf.steps() {
                table.rows.push(vec![
                    json!(t),
                    json!(schedule.alpha(Time::Step(t))?),
                    json!(pmf.prob(t)),
                ]);
            }
        }
        None => {
            if grid < 2 {
                return Err(Error::arg("--grid needs at least 2 points"));
            }
            for i in 0..grid {
                let t = i as f64 / (grid - 1) as f64;
                let density = dist.density(t).expect("continuous law");
                table.rows.push(vec![
                    json!(t),
                    json!(schedule.alpha(Time::Continuous(t))?),
                    json!(density),
                ]);
            }
        }
    }
    Ok(table)
}

#[allow(clippy::too_many_arguments)]
fn forward_table(
    g: &GlobalArgs,
    args: &ScheduleArgs,
    noise: NoiseArg,
    k: usize,
    x0: &[u32],
    process: ProcessArg,
    trials: u64,
    times: &[f64],
) -> Result<Table> {
    let noise = NoiseModel::new(noise.into(), k)?;
    let x0 = Sequence::from_indices(x0, &VocabSpec::new(k, false)?)?;
    let schedule = args.schedule.build(args.steps.get(), args.offset)?;
    let times: Vec<Time> = match (schedule.steps(), times.is_empty()) {
        (Some(t), true) => (0..=t).map(Time::Step).collect(),
        (None, true) => (0..=10)
            .map(|i| Time::Continuous(i as f64 / 10.0))
            .collect(),
        (Some(t), false) => times
            .iter()
            .map(|&x| {
                if x.fract() != 0.0 || x < 0.0 || x > t as f64 {
                    Err(Error::arg(format!("time {x} is not a step in 0..={t}")))
                } else {
                    Ok(Time::Step(x as usize))
                }
            })
            .collect::<Result<_>>()?,
        (None, false) => times.iter().map(|&x| Time::Continuous(x)).collect(),
    };
    if matches!(process, ProcessArg::Markov) && schedule.is_continuous() {
        return Err(Error::arg("the Markov process needs a finite --steps"));
    }
    let records = map_trials(trials, g.parallelism, |trial| -> Result<Vec<Value>> {
        let mut rng = RngStream::for_trial(g.seed, trial);
        let traj = match process {
            ProcessArg::Markov => markov_forward(&x0, &schedule, &noise, &mut rng)?,
            ProcessArg::NonMarkov => nonmarkov_forward(&x0, &schedule, &noise, &mut rng)?,
        };
        let states = times
            .iter()
            .map(|&t| traj.state_at(t).map(|s| json!(s.indices())))
            .collect::<Result<Vec<_>>>()?;
        let tau = traj.transition_set().map_or(Value::Null, tau_values);
        Ok(vec![
            json!(trial),
            Value::Array(times.iter().map(|&t| time_value(t)).collect()),
            json!(states),
            tau,
        ])
    });
    let mut table = Table::new("dndm.forward.v1", &["trial", "t", "tokens", "tau"]);
    table.rows = records.into_iter().collect::<Result<_>>()?;
    Ok(table)
}

fn nfe_dist(spec: &str, steps: usize) -> Result<TransitionTimeDistribution> {
    if spec == "uniform" {
        return Ok(TransitionTimeDistribution::DiscretePmf(
            DiscretePmf::uniform(steps)?,
        ));
    }
    if spec.starts_with("beta") {
        let (a, b) = if spec == "beta" {
            DEFAULT_DISCRETE_BETA
        } else {
            parse_beta(spec).map_err(Error::arg)?
        };
        return beta_transition_distribution(a, b, Some(steps));
    }
    let kind: ScheduleKind = spec.parse()?;
    transition_distribution(&kind.build(Some(steps), DEFAULT_COSINE_OFFSET)?)
}

fn nfe_table(
    g: &GlobalArgs,
    steps: &[usize],
    ns: &[usize],
    dists: &[String],
    trials: u64,
) -> Result<Table> {
    let dists: Vec<String> = if dists.is_empty() {
        vec!["uniform".into(), "beta:3,3".into()]
    } else {
        dists.to_vec()
    };
    let mut table = Table::new(
        "dndm.nfe.v1",
        &[
            "T",
            "N",
            "dist",
            "expected_nfe",
            "c_constant",
            "empirical_mean",
            "stderr",
        ],
    );
    let mut row_index = 0u64;
    for &t in steps {
        for &n in ns {
            for d in &dists {
                let dist = nfe_dist(d, t)?;
                let mut report = expected_nfe(&dist, n)?;
                if trials > 0 {
                    report = report.with_monte_carlo(
                        &dist,
                        trials,
                        g.seed.wrapping_add(row_index),
                        g.parallelism,
                    )?;
                }
                row_index += 1;
                table.rows.push(vec![
                    json!(t),
                    json!(n),
                    json!(d),
                    json!(report.expected_nfe),
                    json!(report.c_constant),
                    json!(report.empirical_mean),
                    json!(report.stderr()),
                ]);
            }
        }
    }
    Ok(table)
}

fn sample_command(g: &GlobalArgs, command: &Command, stdout: &mut dyn Write) -> Result<i32> {
    let Command::Sample {
        sampler,
        schedule,
        tau,
        model,
        runs,
        decode,
        noise,
        joint,
        order,
        record_states,
    } = command
    else {
        unreachable!("called for the sample subcommand")
    };
    let outputs = g
        .out
        .as_ref()
        .map(|p| (with_suffix(p, "jsonl"), with_suffix(p, "csv")));
    if let Some((jsonl, csv)) = &outputs {
        check_out(Some(jsonl))?;
        check_out(Some(csv))?;
    }
    if *runs == 0 {
        return Err(Error::arg("--runs must be at least 1"));
    }
    let data = load_data_model(model)?;
    let noise = NoiseModel::new((*noise).into(), data.base_size())?;
    let (schedule, dist) = resolve_schedule(schedule, *tau)?;
    if sampler.is_continuous() != schedule.is_continuous() {
        return Err(Error::arg(if sampler.is_continuous() {
            "dndm-c needs --steps inf"
        } else {
            "discrete samplers need a finite --steps"
        }));
    }
    let oracle =
        oracle_denoiser(data.clone(), schedule.clone(), noise, *joint)?.with_decode(*decode);
    let config = SamplerConfig {
        transition: Some(dist),
        order: (*order).into(),
        record_states: *record_states,
    };
    let n = data.len();
    let results = map_trials(*runs, g.parallelism, |run| -> Result<(SampleTrace, u128)> {
        let mut rng = RngStream::for_trial(g.seed, run);
        let start = Instant::now();
        let trace = run_sampler(*sampler, &oracle, &schedule, &noise, n, &config, &mut rng)?;
        Ok((trace, start.elapsed().as_nanos()))
    });
    let mut traces = String::new();
    let mut summary = String::from("run,nfe,final_tokens,wall_ns\n");
    for (run, result) in results.into_iter().enumerate() {
        let (trace, wall_ns) = result?;
        traces.push_str(&trace_record(run, &trace, wall_ns).to_string());
        traces.push('\n');
        summary.push_str(&format!(
            "{run},{},{},{wall_ns}\n",
            trace.nfe, trace.final_seq
        ));
    }
    match outputs {
        Some((jsonl, csv)) => {
            std::fs::write(jsonl, traces)?;
            std::fs::write(csv, summary)?;
        }
        None => match g.format.unwrap_or(Format::Csv) {
            Format::Csv => stdout.write_all(summary.as_bytes())?,
            Format::Jsonl => stdout.write_all(traces.as_bytes())?,
        },
    }
    Ok(0)
}

fn with_suffix(prefix: &Path, ext: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

fn trace_record(run: usize, trace: &SampleTrace, wall_ns: u128) -> Value {
    let events: Vec<Value> = trace
        .events
        .iter()
        .map(|e| {
            let mut v = json!({ "t": time_value(e.time), "updated": e.updated });
            if let Some(s) = &e.state {
                v["state"] = json!(s.indices());
            }
            v
        })
        .collect();
    json!({
        "schema": "dndm.sample.trace.v1",
        "run": run,
        "sampler": trace.sampler,
        "seed": trace.seed,
        "stream_id": trace.stream_id,
        "nfe": trace.nfe,
        "final_tokens": trace.final_seq.indices(),
        "tau": trace.transitions.as_ref().map_or(Value::Null, tau_values),
        "events": events,
        "wall_ns": wall_ns as u64,
    })
}

/// Zeroes every `wall_ns` field so outputs can be compared byte for byte.
/// Handles JSONL records and CSV files with a `wall_ns` column.
pub fn normalize_timings(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut wall_column: Option<usize> = None;
    for line in text.lines() {
        if line.starts_with('{') {
            match serde_json::from_str::<Value>(line) {
                Ok(mut v) => {
                    if let Some(w) = v.get_mut("wall_ns") {
                        *w = json!(0);
                    }
                    out.push_str(&v.to_string());
                }
                Err(_) => out.push_str(line),
            }
        } else if let Some(header) = line.split(',').position(|c| c == "wall_ns") {
            wall_column = Some(header);
            out.push_str(line);
        } else if let Some(col) = wall_column {
            let cells: Vec<&str> = line
                .split(',')
                .enumerate()
                .map(|(i, c)| if i == col { "0" } else { c })
                .collect();
            out.push_str(&cells.join(","));
        } else {
            out.push_str(line);
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let mut argv = vec!["dndm"];
        argv.extend_from_slice(args);
        let code = parse_and_dispatch(argv, &mut out, &mut err);
        (
            code,
            String::from_utf8(out).unwrap(),
            String::from_utf8(err).unwrap(),
        )
    }

    #[test]
    fn linear_schedule_has_uniform_tau() {
        let (code, out, _) = run(&["schedules", "--schedule", "linear", "--steps", "4"]);
        assert_eq!(code, 0);
        assert_eq!(
            out,
            "t,alpha,p_tau\n1,0.75,0.25\n2,0.5,0.25\n3,0.25,0.25\n4,0.0,0.25\n"
        );
    }

    #[test]
    fn tau_argument_forms() {
        assert_eq!("schedule".parse::<TauArg>().unwrap(), TauArg::Schedule);
        assert_eq!("beta".parse::<TauArg>().unwrap(), TauArg::Beta(None));
        assert_eq!(
            "beta:17,4".parse::<TauArg>().unwrap(),
            TauArg::Beta(Some((17.0, 4.0)))
        );
        assert!("beta:1".parse::<TauArg>().is_err());
        assert!("gamma".parse::<TauArg>().is_err());
    }

    #[test]
    fn unknown_flag_is_usage_error() {
        let (code, out, err) = run(&["schedules", "--bogus"]);
        assert_eq!(code, 1);
        assert!(out.is_empty());
        assert!(err.contains("Usage"));
    }

    #[test]
    fn normalization_zeroes_timings() {
        let csv = "run,nfe,final_tokens,wall_ns\n0,3,1 2,12345\n";
        assert_eq!(
            normalize_timings(csv),
            "run,nfe,final_tokens,wall_ns\n0,3,1 2,0\n"
        );
        let jsonl = "{\"run\":0,\"wall_ns\":999}\n";
        assert_eq!(normalize_timings(jsonl), "{\"run\":0,\"wall_ns\":0}\n");
    }

    #[test]
    fn csv_cells_quote_commas() {
        assert_eq!(csv_cell(&json!("beta:3,3")), "\"beta:3,3\"");
        assert_eq!(csv_cell(&json!([1, 2])), "1 2");
        assert_eq!(csv_cell(&Value::Null), "");
    }
}
