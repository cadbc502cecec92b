use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use sasi_core::attack::{
    efficiency_curve, residue_agreement, table1, AttackConfig, DistributionAttack, Fig2Attack,
    GuessReport, Modulus,
};
use sasi_core::sim::Simulation;
use sasi_core::trace::{TraceError, TraceHeader, TraceReader, TraceWriter};
use sasi_core::RotationVariant;
use thiserror::Error;

use crate::report::{
    sibling, write_efficiency_csv, write_histogram_csv, write_json, write_table1_csv,
    AttackMode, AttackSummary, RunManifest, ScoreSummary, SecretsFile,
};
use crate::{Command, ModeArg};

/// Moduli whose ID residues `simulate` records for later scoring.
const SCORED_MODULI: [u64; 4] = [16, 32, 96, 256];

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Trace { path: PathBuf, source: TraceError },
    #[error("{0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            _ => 2,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(io_err(path))
}

fn write_file(
    path: &Path,
    body: impl FnOnce(&mut dyn Write) -> io::Result<()>,
) -> Result<(), CliError> {
    let mut out = create(path)?;
    body(&mut out).and_then(|_| out.flush()).map_err(io_err(path))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let file = File::open(path).map_err(io_err(path))?;
    serde_json::from_reader(BufReader::new(file))
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn modulus(n: u64) -> Result<Modulus, CliError> {
    Modulus::new(n).map_err(|e| CliError::Usage(e.to_string()))
}

pub fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Simulate {
            seed,
            variant,
            sessions,
            out,
            secrets,
            common,
        } => {
            let secrets = secrets.unwrap_or_else(|| {
                let mut name = out.clone().into_os_string();
                name.push(".secrets.json");
                PathBuf::from(name)
            });
            let manifest = RunManifest {
                seed: Some(seed),
                variant: Some(variant.into()),
                budget: Some(sessions),
                ..RunManifest::new("simulate")
            }
            .output(&out)
            .output(&secrets)
            .stamp(common.timestamp);
            simulate(seed, variant.into(), sessions, &out, &secrets, manifest)
        }
        Command::Attack {
            trace,
            modulus: n,
            mode,
            budget,
            variant,
            seed,
            out,
            common,
        } => {
            let n = modulus(n)?;
            let csv = sibling(&out, "csv");
            let manifest = RunManifest {
                seed,
                modulus: Some(n.get()),
                budget: Some(budget),
                ..RunManifest::new("attack")
            }
            .output(&out)
            .output(&csv)
            .stamp(common.timestamp);
            attack(&trace, n, mode, budget, variant.map(Into::into), &out, &csv, manifest)
        }
        Command::Table1 {
            moduli,
            trials,
            seed,
            out,
            common,
        } => {
            if trials == 0 {
                return Err(CliError::Usage("--trials must be positive".into()));
            }
            let mut moduli = moduli
                .into_iter()
                .map(modulus)
                .collect::<Result<Vec<_>, _>>()?;
            moduli.sort_unstable();
            moduli.dedup();
            let manifest = RunManifest {
                seed: Some(seed),
                variant: Some(RotationVariant::Modular),
                budget: Some(trials),
                ..RunManifest::new("table1")
            }
            .output(&out)
            .stamp(common.timestamp);
            let rows = table1(&moduli, trials, seed);
            write_file(&out, |w| write_table1_csv(w, &manifest, &rows))
        }
        Command::Score {
            report,
            secrets,
            out,
            common,
        } => {
            let mut manifest = RunManifest::new("score").stamp(common.timestamp);
            if let Some(path) = &out {
                manifest = manifest.output(path);
            }
            score(&report, &secrets, out.as_deref(), manifest)
        }
        Command::Efficiency {
            seed,
            variant,
            modulus: n,
            max_sessions,
            out,
            common,
        } => {
            let n = modulus(n)?;
            let cfg = AttackConfig {
                modulus: n,
                session_budget: max_sessions,
                variant: variant.into(),
                seed,
            };
            let manifest = RunManifest {
                seed: Some(seed),
                variant: Some(cfg.variant),
                modulus: Some(n.get()),
                budget: Some(max_sessions),
                ..RunManifest::new("efficiency")
            }
            .output(&out)
            .stamp(common.timestamp);
            let mut checkpoints: Vec<u64> = (4..64)
                .map(|e| 1u64 << e)
                .take_while(|&c| c < max_sessions)
                .collect();
            checkpoints.push(max_sessions);
            let points = efficiency_curve(&cfg, &checkpoints);
            write_file(&out, |w| write_efficiency_csv(w, &manifest, &points))
        }
    }
}

fn simulate(
    seed: u64,
    variant: RotationVariant,
    sessions: u64,
    out: &Path,
    secrets_path: &Path,
    manifest: RunManifest,
) -> Result<(), CliError> {
    let mut sim = Simulation::new(seed, variant);
    let residues: BTreeMap<u64, u64> = SCORED_MODULI
        .iter()
        .map(|&n| (n, sim.id().mod_small(n).expect("modulus >= 2")))
        .collect();

    let sink = create(out)?;
    let mut writer = TraceWriter::new(sink, &TraceHeader::new(variant)).map_err(io_err(out))?;
    let mut final_ids = sim.state().ids;
    for _ in 0..sessions {
        let s = sim.step();
        writer
            .write_record(&s.transcript.messages())
            .map_err(io_err(out))?;
        final_ids = s.transcript.ids_next;
    }
    writer.finish(final_ids).map_err(io_err(out))?;

    let secrets = SecretsFile {
        manifest,
        variant,
        residues,
    };
    write_file(secrets_path, |w| write_json(w, &secrets))
}

#[allow(clippy::too_many_arguments)]
fn attack(
    trace: &Path,
    n: Modulus,
    mode: ModeArg,
    budget: u64,
    expected_variant: Option<RotationVariant>,
    out: &Path,
    csv: &Path,
    mut manifest: RunManifest,
) -> Result<(), CliError> {
    let trace_err = |source| CliError::Trace {
        path: trace.to_path_buf(),
        source,
    };
    let file = File::open(trace).map_err(io_err(trace))?;
    let reader = TraceReader::new(BufReader::new(file)).map_err(trace_err)?;
    let variant = reader.header().variant;
    if let Some(expected) = expected_variant {
        if expected != variant {
            return Err(CliError::Data(format!(
                "{}: trace variant is {variant}, expected {expected}",
                trace.display()
            )));
        }
    }
    manifest.variant = Some(variant);

    let (report, mode) = match mode {
        ModeArg::Fig2 => {
            let cfg = AttackConfig {
                modulus: n,
                session_budget: budget,
                variant,
                seed: manifest.seed.unwrap_or_default(),
            };
            let mut attack = Fig2Attack::new(&cfg);
            for t in reader.transcripts() {
                if attack.is_exhausted() {
                    break;
                }
                attack.observe(&t.map_err(trace_err)?);
            }
            (attack.finish(), AttackMode::Fig2)
        }
        ModeArg::Distribution => {
            let mut attack = DistributionAttack::for_modulus(n.get(), budget)
                .map_err(|e| CliError::Usage(e.to_string()))?;
            for t in reader.transcripts() {
                if attack.is_exhausted() {
                    break;
                }
                attack.observe(&t.map_err(trace_err)?);
            }
            (attack.finish(), AttackMode::Distribution)
        }
    };

    let summary = summarize(&report, mode, variant, manifest.clone());
    write_file(out, |w| write_json(w, &summary))?;
    write_file(csv, |w| write_histogram_csv(w, &manifest, &report))
}

fn summarize(
    report: &GuessReport,
    mode: AttackMode,
    variant: RotationVariant,
    manifest: RunManifest,
) -> AttackSummary {
    AttackSummary {
        manifest,
        mode,
        guess: report.guess,
        useful_sessions: report.useful_sessions,
        sessions_consumed: report.sessions_consumed,
        modulus: report.modulus.get(),
        variant,
        chi_square: match mode {
            AttackMode::Distribution => report.histogram.chi_square_uniform().map(Into::into),
            AttackMode::Fig2 => None,
        },
    }
}

fn score(
    report_path: &Path,
    secrets_path: &Path,
    out: Option<&Path>,
    mut manifest: RunManifest,
) -> Result<(), CliError> {
    let report: AttackSummary = read_json(report_path)?;
    let secrets: SecretsFile = read_json(secrets_path)?;
    if report.variant != secrets.variant {
        return Err(CliError::Data(format!(
            "report variant {} does not match secrets variant {}",
            report.variant, secrets.variant
        )));
    }
    let n = Modulus::new(report.modulus).map_err(|e| CliError::Data(e.to_string()))?;
    let truth = secrets.residue(n.get()).ok_or_else(|| {
        CliError::Data(format!(
            "secrets file cannot score modulus {n} (stored: {:?})",
            secrets.residues.keys().collect::<Vec<_>>()
        ))
    })?;
    manifest.variant = Some(report.variant);
    manifest.modulus = Some(n.get());
    let agreement = report.guess.map(|g| residue_agreement(g, truth, n));
    let summary = ScoreSummary {
        manifest,
        modulus: n.get(),
        guess: report.guess,
        truth,
        exact: agreement.is_some_and(|a| a.exact),
        matching_low_bits: agreement.map_or(0, |a| a.low_bits),
    };
    match out {
        Some(path) => write_file(path, |w| write_json(w, &summary)),
        None => write_json(&mut io::stdout().lock(), &summary).map_err(io_err(Path::new("<stdout>"))),
    }
}
