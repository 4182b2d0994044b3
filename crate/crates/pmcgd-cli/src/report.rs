//! The JSON report schema and its assembly from sweep results.

use serde::{Deserialize, Serialize};

use pmcgd::classify::{misallocation_count, ConfusionTable, MisallocationMode, ObservationLabel};
use pmcgd::selection::RankedResults;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub seed: u64,
    pub best: ModelSummary,
    pub ranking: Vec<ModelSummary>,
    pub failures: Vec<FailureEntry>,
    pub observations: Vec<ObservationReport>,
    /// Per-component estimates of the best model.
    pub components: Vec<ComponentReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub confusion: Option<ConfusionReport>,
    pub warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replication: Option<ReplicationSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub structure: String,
    pub g: usize,
    /// Overall free-parameter count.
    pub m: usize,
    pub bic: f64,
    pub loglik: f64,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureEntry {
    pub structure: String,
    pub g: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationReport {
    pub row_id: usize,
    /// 1-based cluster index.
    pub cluster: usize,
    pub is_bad: bool,
    pub z_max: f64,
    pub v_at_map: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentReport {
    pub pi: f64,
    pub alpha: f64,
    pub eta: f64,
    pub mean: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionReport {
    /// Class names in table-row order.
    pub classes: Vec<String>,
    /// Bad points counted inside their MAP cluster: rows are classes,
    /// columns clusters.
    pub merged: Vec<Vec<usize>>,
    /// Good observations only.
    pub good: Vec<Vec<usize>>,
    /// Flagged bad points per class.
    pub bad: Vec<usize>,
    pub misallocated_merged: usize,
    pub misallocated_good_only: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "kebab-case")]
pub enum ReplicationSummary {
    SyntheticNoise {
        seeds: Vec<u64>,
        per_seed: Vec<SyntheticSeedOutcome>,
        median_noise_recall: f64,
        median_good_ari: f64,
        /// Seeds on which the contaminated model out-scored the best plain
        /// Gaussian mixture (G in {2, 3}) on BIC.
        bic_wins: usize,
    },
    Crabs {
        rows: Vec<CrabsRow>,
    },
    Wine {
        best_structure: String,
        best_g: usize,
        misallocated_merged: usize,
        bad_count: usize,
        bad_by_class: Vec<ClassCount>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSeedOutcome {
    pub seed: u64,
    pub noise_recall: f64,
    pub good_ari: f64,
    pub pmcgd_bic: f64,
    pub best_gpcm_bic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrabsRow {
    /// The substituted value of the perturbed cell.
    pub value: f64,
    pub misallocated: usize,
    /// Fitted inflation in the group holding the perturbed observation.
    pub eta_outlier_group: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassCount {
    pub class: String,
    pub count: usize,
}

pub fn model_summary(entry: &pmcgd::selection::SweepEntry) -> ModelSummary {
    ModelSummary {
        structure: entry.structure.code().to_string(),
        g: entry.g,
        m: entry.m,
        bic: entry.bic,
        loglik: entry.result.final_loglik(),
        converged: entry.result.converged,
        iterations: entry.result.iterations,
    }
}

pub fn observation_reports(labels: &[ObservationLabel]) -> Vec<ObservationReport> {
    labels
        .iter()
        .map(|l| ObservationReport {
            row_id: l.row_id,
            cluster: l.cluster,
            is_bad: l.is_bad,
            z_max: l.z_max,
            v_at_map: l.v_at_map,
        })
        .collect()
}

pub fn component_reports(params: &pmcgd::ecm::ModelParams) -> Vec<ComponentReport> {
    params
        .components()
        .iter()
        .map(|c| {
            let cov = c.cov.matrix();
            ComponentReport {
                pi: c.pi,
                alpha: c.alpha,
                eta: c.eta,
                mean: c.mu.iter().cloned().collect(),
                covariance: (0..cov.nrows())
                    .map(|i| (0..cov.ncols()).map(|j| cov[(i, j)]).collect())
                    .collect(),
            }
        })
        .collect()
}

pub fn confusion_report(
    labels: &[ObservationLabel],
    classes: &[String],
    truth: &[usize],
    g: usize,
) -> Result<ConfusionReport, pmcgd::Error> {
    let merged = ConfusionTable::merged(labels, truth, g)?;
    let split = ConfusionTable::split_bad(labels, truth, g)?;
    Ok(ConfusionReport {
        classes: merged
            .class_ids
            .iter()
            .map(|&id| classes[id].clone())
            .collect(),
        merged: merged.counts,
        good: split.counts.clone(),
        bad: split.bad.clone().unwrap_or_default(),
        misallocated_merged: misallocation_count(labels, truth, MisallocationMode::Merged)?,
        misallocated_good_only: misallocation_count(labels, truth, MisallocationMode::GoodOnly)?,
    })
}

/// Assembles the standard sweep report.
pub fn build_report(
    seed: u64,
    ranked: &RankedResults,
    labels: &[ObservationLabel],
    truth: Option<(&[String], &[usize])>,
) -> Result<Report, pmcgd::Error> {
    let best = ranked.best();
    let confusion = match truth {
        Some((classes, ids)) => Some(confusion_report(labels, classes, ids, best.g)?),
        None => None,
    };
    Ok(Report {
        seed,
        best: model_summary(best),
        ranking: ranked.entries().iter().map(model_summary).collect(),
        failures: ranked
            .failures()
            .iter()
            .map(|f| FailureEntry {
                structure: f.structure.code().to_string(),
                g: f.g,
                error: f.message.clone(),
            })
            .collect(),
        observations: observation_reports(labels),
        components: component_reports(&best.result.params),
        confusion,
        warnings: best.result.warnings.clone(),
        replication: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_round_trips_through_json() {
        let report = Report {
            seed: 7,
            best: ModelSummary {
                structure: "EVE".into(),
                g: 2,
                m: 13,
                bic: -1729.442,
                loglik: -830.282_117,
                converged: true,
                iterations: 41,
            },
            ranking: vec![],
            failures: vec![FailureEntry {
                structure: "VVV".into(),
                g: 3,
                error: "component 2 died".into(),
            }],
            observations: vec![ObservationReport {
                row_id: 0,
                cluster: 1,
                is_bad: true,
                z_max: 0.987_654_321_123,
                v_at_map: 0.012_345_678_9,
            }],
            components: vec![ComponentReport {
                pi: 0.5,
                alpha: 0.93,
                eta: 38.2,
                mean: vec![-2.0, -2.0],
                covariance: vec![vec![1.1, -0.3], vec![-0.3, 0.9]],
            }],
            confusion: Some(ConfusionReport {
                classes: vec!["a".into(), "b".into()],
                merged: vec![vec![50, 0], vec![1, 49]],
                good: vec![vec![48, 0], vec![1, 47]],
                bad: vec![2, 2],
                misallocated_merged: 1,
                misallocated_good_only: 1,
            }),
            warnings: vec!["component 1: effective size 2.91 below p + 1 = 3".into()],
            replication: Some(ReplicationSummary::Crabs {
                rows: vec![CrabsRow {
                    value: -15.0,
                    misallocated: 13,
                    eta_outlier_group: 484.287,
                }],
            }),
        };
        let json = serde_json::to_string_pretty(&report).unwrap();
        let parsed: Report = serde_json::from_str(&json).unwrap();
        assert_eq!(parsed, report);
    }
}
