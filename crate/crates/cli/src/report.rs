//! Machine-readable outputs of `analyze` and `oracle`.
//!
//! Everything here is plain data with a lossless JSON form. Rows, columns,
//! vertex numbers and the permutation are one-based; for interval entries
//! vertex `v` is the `v`-th Kharitonov polynomial.

use edgestab::edges::{CellChoice, EdgeConfiguration};
use edgestab::family::FamilyMode;
use edgestab::oracle::{MemberRecord, OracleVerdict, SampleReport, SampleScheme};
use edgestab::stab::{self, ConfigSummary, FamilyAnalysis, Tolerances, Verdict};
use edgestab::{ComplexValue, MatrixFamily, Polynomial, Region};
use serde::{Deserialize, Serialize};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// How each configuration is decided: a multi-parameter box test with one
/// parameter per column whose pattern entry is a proper edge.
pub const CONFIGURATION_CHECK: &str = "multi_affine_box";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisReport {
    pub tool_version: String,
    pub input_digest: String,
    pub mode: FamilyMode,
    pub region: Region,
    pub configuration_check: String,
    pub configuration_count: u64,
    /// Checked configurations in index order. Shorter than the count when
    /// checking stopped early on an unstable configuration.
    pub configurations: Vec<ConfigSummary>,
    pub verdict: Verdict,
    pub witness: Option<WitnessBlock>,
    pub tolerances: Tolerances,
    pub dedup: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_ms: Option<u64>,
}

/// Everything needed to re-check a witness by hand.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WitnessBlock {
    pub config_index: u64,
    /// One-line notation: column `j` carries its edge in row `sigma[j-1]`.
    pub sigma: Vec<usize>,
    /// Row-major.
    pub cells: Vec<WitnessCell>,
    /// Per column; `null` where the pattern entry is a single point.
    pub lambda: Vec<Option<f64>>,
    /// Determinant of the instantiated matrix, ascending.
    pub determinant: Polynomial,
    pub root: ComplexValue,
    pub root_margin: f64,
    /// Recomputing the determinant's roots gives a root at or beyond the boundary.
    pub reproduced: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WitnessCell {
    Vertex { row: usize, col: usize, vertex: usize, poly: Polynomial },
    Edge { row: usize, col: usize, ends: (usize, usize), p0: Polynomial, p1: Polynomial },
}

impl WitnessBlock {
    pub fn build(cfg: &EdgeConfiguration, verdict: &Verdict, region: &Region) -> Option<Self> {
        let w = verdict.witness.as_ref()?;
        let matrix = cfg.instantiate(&w.lambda).ok()?;
        let det = matrix.det();
        let reproduced = matches!(stab::worst_root(&det, region), Ok(Some((m, z))) if stab::reproduces(m, z));
        let n = cfg.n();
        let cells = cfg
            .cells()
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let (row, col) = (i / n + 1, i % n + 1);
                match c {
                    CellChoice::Vertex { index, poly } => {
                        WitnessCell::Vertex { row, col, vertex: index + 1, poly: poly.clone() }
                    }
                    CellChoice::Edge { segment, .. } => WitnessCell::Edge {
                        row,
                        col,
                        ends: (segment.ends.0 + 1, segment.ends.1 + 1),
                        p0: segment.p0.clone(),
                        p1: segment.p1.clone(),
                    },
                }
            })
            .collect();
        let full = cfg.column_lambdas(&w.lambda);
        let lambda = (0..n)
            .map(|j| cfg.param_columns().contains(&j).then_some(full[j]))
            .collect();
        Some(WitnessBlock {
            config_index: cfg.index,
            sigma: cfg.sigma_one_line(),
            cells,
            lambda,
            determinant: det,
            root: w.root,
            root_margin: w.root_margin,
            reproduced,
        })
    }
}

pub struct AnalysisInput<'a> {
    pub family: &'a MatrixFamily,
    pub digest: &'a str,
    pub tolerances: Tolerances,
    pub dedup: bool,
}

impl AnalysisReport {
    /// `lookup` rebuilds a configuration from its index.
    pub fn build(
        input: &AnalysisInput<'_>,
        analysis: FamilyAnalysis,
        lookup: impl Fn(u64) -> Option<EdgeConfiguration>,
    ) -> Self {
        let region = input.family.region();
        let witness = analysis
            .verdict
            .config_index
            .and_then(&lookup)
            .and_then(|cfg| WitnessBlock::build(&cfg, &analysis.verdict, &region));
        AnalysisReport {
            tool_version: TOOL_VERSION.to_string(),
            input_digest: input.digest.to_string(),
            mode: analysis.mode,
            region,
            configuration_check: CONFIGURATION_CHECK.to_string(),
            configuration_count: analysis.configuration_count,
            configurations: analysis.summaries,
            verdict: analysis.verdict,
            witness,
            tolerances: input.tolerances,
            dedup: input.dedup,
            wall_time_ms: None,
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.verdict.status.exit_code()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleReport {
    pub tool_version: String,
    pub input_digest: String,
    pub mode: FamilyMode,
    pub region: Region,
    pub scheme: SampleScheme,
    pub budget: u64,
    pub seed: u64,
    pub samples: u64,
    /// `null` when every sampled determinant is a nonzero constant or when
    /// some sample's determinant vanishes identically.
    pub worst_margin: Option<f64>,
    pub worst_member: Option<OracleMember>,
    pub verdict: OracleVerdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_ms: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleMember {
    pub sample_index: u64,
    pub member: MemberRecord,
    pub determinant: Polynomial,
    /// `null` for an identically zero determinant.
    pub margin: Option<f64>,
    pub root: Option<ComplexValue>,
}

fn finite(x: Option<f64>) -> Option<f64> {
    x.filter(|v| v.is_finite())
}

impl OracleReport {
    pub fn build(
        fam: &MatrixFamily,
        digest: &str,
        scheme: SampleScheme,
        budget: u64,
        seed: u64,
        report: SampleReport,
    ) -> Self {
        let worst_member = report.worst_member.map(|w| OracleMember {
            sample_index: w.sample_index,
            determinant: w.member.determinant(fam).unwrap_or_else(|_| Polynomial::zero()),
            member: w.member,
            margin: finite(Some(w.margin)),
            root: w.root,
        });
        OracleReport {
            tool_version: TOOL_VERSION.to_string(),
            input_digest: digest.to_string(),
            mode: fam.mode(),
            region: fam.region(),
            scheme,
            budget,
            seed,
            samples: report.samples,
            worst_margin: finite(report.worst_margin),
            worst_member,
            verdict: report.verdict,
            wall_time_ms: None,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.verdict {
            OracleVerdict::StableAtAllSamples => 0,
            OracleVerdict::UnstableSampleFound => 1,
        }
    }
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}
