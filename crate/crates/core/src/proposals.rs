//! Primitive proposals from a model, the top-k expansion rule that turns them
//! into search restrictions, and prediction metrics.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::primitives::PrimitiveKind;
use crate::program::{Program, MAX_STEPS};
use crate::search::SearchConfig;

/// Number of executable kinds kept per position, by effective length.
pub const TOP_K: [usize; 3] = [5, 4, 3];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProposalError {
    #[error("malformed proposal: {0}")]
    MalformedProposal(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredKind {
    pub kind: PrimitiveKind,
    pub score: f64,
}

/// Ranked kind lists for the three label positions, best first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposalSet {
    pub task_id: String,
    pub positions: Vec<Vec<ScoredKind>>,
}

impl ProposalSet {
    pub fn parse(text: &str) -> Result<ProposalSet, ProposalError> {
        let p: ProposalSet = serde_json::from_str(text)
            .map_err(|e| ProposalError::MalformedProposal(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ProposalError> {
        let bad = |m: String| Err(ProposalError::MalformedProposal(m));
        if self.positions.len() != MAX_STEPS {
            return bad(format!(
                "expected 3 positions, got {}",
                self.positions.len()
            ));
        }
        let vocab: BTreeSet<PrimitiveKind> = PrimitiveKind::vocabulary().collect();
        for (i, list) in self.positions.iter().enumerate() {
            let kinds: BTreeSet<PrimitiveKind> = list.iter().map(|s| s.kind).collect();
            if list.len() != vocab.len() || kinds != vocab {
                return bad(format!(
                    "position {} is not a permutation of the vocabulary",
                    i + 1
                ));
            }
            if list.iter().any(|s| !s.score.is_finite()) {
                return bad(format!("position {} has a non-finite score", i + 1));
            }
            if list.windows(2).any(|w| w[0].score < w[1].score) {
                return bad(format!(
                    "position {} is not sorted by descending score",
                    i + 1
                ));
            }
        }
        Ok(())
    }

    fn top(&self, position: usize) -> PrimitiveKind {
        self.positions[position][0].kind
    }

    /// The first `k` executable kinds of a position.
    fn top_executable(&self, position: usize, k: usize) -> BTreeSet<PrimitiveKind> {
        self.positions[position]
            .iter()
            .map(|s| s.kind)
            .filter(|k| k.is_executable())
            .take(k)
            .collect()
    }

    /// 1-based rank of `kind` at `position`.
    pub fn rank(&self, position: usize, kind: PrimitiveKind) -> usize {
        self.positions[position]
            .iter()
            .position(|s| s.kind == kind)
            .map(|i| i + 1)
            .expect("validated lists contain every kind")
    }
}

/// Reads one proposal set per non-empty line.
pub fn parse_proposals_jsonl(text: &str) -> Result<Vec<ProposalSet>, ProposalError> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(ProposalSet::parse)
        .collect()
}

/// Program length and per-depth kinds the search may use.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Restriction {
    pub effective_length: usize,
    pub allowed: Vec<BTreeSet<PrimitiveKind>>,
}

impl Restriction {
    pub fn admits(&self, label: &[PrimitiveKind; 3]) -> bool {
        let length = label.iter().take_while(|k| k.is_executable()).count();
        length == self.effective_length
            && label[..length]
                .iter()
                .zip(&self.allowed)
                .all(|(k, set)| set.contains(k))
    }

    /// Search limited to the restriction.
    pub fn apply(&self, mut config: SearchConfig) -> SearchConfig {
        config.max_depth = self.effective_length;
        config.allowed = Some(self.allowed.clone());
        config
    }
}

/// Length from the first position whose best kind is `no_trans`, then the
/// top 5, 4 or 3 executable kinds of each used position.
pub fn expand_topk(p: &ProposalSet) -> Result<Restriction, ProposalError> {
    p.validate()?;
    let length = if p.top(1) == PrimitiveKind::NoTrans {
        1
    } else if p.top(2) == PrimitiveKind::NoTrans {
        2
    } else {
        3
    };
    let k = TOP_K[length - 1];
    Ok(Restriction {
        effective_length: length,
        allowed: (0..length).map(|i| p.top_executable(i, k)).collect(),
    })
}

/// A perfect predictor: the true kind (or `no_trans` past the end) first,
/// everything else after in vocabulary order.
pub fn oracle_proposals(task_id: &str, program: &Program) -> ProposalSet {
    let kinds = program.kinds();
    let positions = (0..MAX_STEPS)
        .map(|i| {
            let truth = kinds.get(i).copied().unwrap_or(PrimitiveKind::NoTrans);
            let rest = PrimitiveKind::vocabulary().filter(|k| *k != truth);
            // dyadic scores survive a JSON round trip exactly
            std::iter::once(ScoredKind {
                kind: truth,
                score: 0.5,
            })
            .chain(rest.enumerate().map(|(j, kind)| ScoredKind {
                kind,
                score: (26 - j) as f64 / 1024.0,
            }))
            .collect()
        })
        .collect();
    ProposalSet {
        task_id: task_id.to_string(),
        positions,
    }
}

/// Random scores, independently per position.
pub fn random_proposals<R: Rng>(rng: &mut R, task_id: &str) -> ProposalSet {
    let positions = (0..MAX_STEPS)
        .map(|_| {
            let mut kinds: Vec<PrimitiveKind> = PrimitiveKind::vocabulary().collect();
            kinds.shuffle(rng);
            let mut scores: Vec<f64> = (0..kinds.len()).map(|_| rng.gen::<f64>()).collect();
            scores.sort_by(|a, b| b.total_cmp(a));
            kinds
                .into_iter()
                .zip(scores)
                .map(|(kind, score)| ScoredKind { kind, score })
                .collect()
        })
        .collect();
    ProposalSet {
        task_id: task_id.to_string(),
        positions,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    /// The expansion admits the true label.
    pub inclusion: bool,
    /// Rank of each true label entry in its position's full list.
    pub ranks: [usize; 3],
}

pub fn score_predictions(
    p: &ProposalSet,
    truth: &[PrimitiveKind; 3],
) -> Result<Prediction, ProposalError> {
    let restriction = expand_topk(p)?;
    Ok(Prediction {
        inclusion: restriction.admits(truth),
        ranks: [0, 1, 2].map(|i| p.rank(i, truth[i])),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub inclusion_rate: f64,
    pub mean_rank: [f64; 3],
    pub n: usize,
}

pub fn aggregate(predictions: &[Prediction]) -> Metrics {
    let n = predictions.len();
    let denom = n.max(1) as f64;
    let included = predictions.iter().filter(|p| p.inclusion).count();
    let mean_rank =
        [0, 1, 2].map(|i| predictions.iter().map(|p| p.ranks[i] as f64).sum::<f64>() / denom);
    Metrics {
        inclusion_rate: included as f64 / denom,
        mean_rank,
        n,
    }
}

#[cfg(test)]
mod tests;
