//! Report artifacts: run manifests, JSON summaries and CSV tables.

use std::collections::BTreeMap;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use sasi_core::attack::{ChiSquareTest, EfficiencyPoint, GuessReport, Table1Row};
use sasi_core::RotationVariant;
use serde::{Deserialize, Serialize};

/// Everything needed to reproduce a report.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub seed: Option<u64>,
    pub variant: Option<RotationVariant>,
    pub modulus: Option<u64>,
    pub budget: Option<u64>,
    pub outputs: Vec<String>,
    /// Unix seconds; only recorded on request so reruns stay byte-identical.
    pub timestamp: Option<u64>,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        RunManifest {
            command: command.to_string(),
            seed: None,
            variant: None,
            modulus: None,
            budget: None,
            outputs: Vec::new(),
            timestamp: None,
        }
    }

    pub fn stamp(mut self, enabled: bool) -> Self {
        if enabled {
            self.timestamp = SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .ok()
                .map(|d| d.as_secs());
        }
        self
    }

    pub fn output(mut self, path: &Path) -> Self {
        self.outputs.push(path.display().to_string());
        self
    }

    /// `# manifest: {...}` line carried at the top of CSV artifacts.
    pub fn csv_comment(&self) -> String {
        format!(
            "# manifest: {}",
            serde_json::to_string(self).expect("manifest serializes")
        )
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SecretsFile {
    pub manifest: RunManifest,
    pub variant: RotationVariant,
    /// ID mod N, keyed by N.
    pub residues: BTreeMap<u64, u64>,
}

impl SecretsFile {
    /// `ID mod n`, derived from any stored residue whose modulus `n` divides.
    pub fn residue(&self, n: u64) -> Option<u64> {
        self.residues
            .iter()
            .find(|(&m, _)| m % n == 0)
            .map(|(_, &r)| r % n)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttackMode {
    Fig2,
    Distribution,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AttackSummary {
    pub manifest: RunManifest,
    pub mode: AttackMode,
    pub guess: Option<u64>,
    pub useful_sessions: u64,
    pub sessions_consumed: u64,
    pub modulus: u64,
    pub variant: RotationVariant,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub chi_square: Option<ChiSquareSummary>,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ChiSquareSummary {
    pub statistic: f64,
    pub degrees_of_freedom: u64,
    pub p_value: f64,
}

impl From<ChiSquareTest> for ChiSquareSummary {
    fn from(t: ChiSquareTest) -> Self {
        ChiSquareSummary {
            statistic: t.statistic,
            degrees_of_freedom: t.degrees_of_freedom,
            p_value: t.p_value,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScoreSummary {
    pub manifest: RunManifest,
    pub modulus: u64,
    pub guess: Option<u64>,
    pub truth: u64,
    pub exact: bool,
    pub matching_low_bits: u32,
}

pub fn write_json<T: Serialize>(out: &mut dyn Write, value: &T) -> io::Result<()> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out)
}

pub fn write_histogram_csv(
    out: &mut dyn Write,
    manifest: &RunManifest,
    report: &GuessReport,
) -> io::Result<()> {
    writeln!(out, "{}", manifest.csv_comment())?;
    writeln!(out, "residue,count")?;
    for (residue, count) in report.histogram.counts().iter().enumerate() {
        writeln!(out, "{residue},{count}")?;
    }
    Ok(())
}

pub fn write_table1_csv(
    out: &mut dyn Write,
    manifest: &RunManifest,
    rows: &[Table1Row],
) -> io::Result<()> {
    writeln!(out, "{}", manifest.csv_comment())?;
    writeln!(
        out,
        "modulus,class,theoretical,empirical,trials,std_error,detection_rate,joint_rate"
    )?;
    for row in rows {
        let theoretical = row
            .theoretical
            .map_or_else(|| "n/a".to_string(), |p| format!("{p:.6}"));
        let est = &row.estimate;
        writeln!(
            out,
            "{},{},{},{:.6},{},{:.6},{:.6},{:.6}",
            row.modulus,
            row.class,
            theoretical,
            est.recovery_rate(),
            est.trials,
            est.standard_error(),
            est.detection_rate(),
            est.joint_rate()
        )?;
    }
    Ok(())
}

pub fn write_efficiency_csv(
    out: &mut dyn Write,
    manifest: &RunManifest,
    points: &[EfficiencyPoint],
) -> io::Result<()> {
    writeln!(out, "{}", manifest.csv_comment())?;
    writeln!(out, "sessions,useful_sessions,guess,exact,matching_low_bits")?;
    for p in points {
        let guess = p.guess.map(|g| g.to_string()).unwrap_or_default();
        let (exact, bits) = p
            .agreement
            .map_or((String::new(), String::new()), |a| {
                (a.exact.to_string(), a.low_bits.to_string())
            });
        writeln!(out, "{},{},{guess},{exact},{bits}", p.sessions, p.useful_sessions)?;
    }
    Ok(())
}

/// Sibling path with the extension replaced, e.g. `report.json` -> `report.csv`.
pub fn sibling(path: &Path, extension: &str) -> PathBuf {
    path.with_extension(extension)
}
