//! Typed envelopes for every cross-party transfer, plus the audit trace.

use sha2::{Digest, Sha256};

use crate::linalg::RealMatrix;
use crate::secure::KernelBasis;
use crate::types::{InstanceId, PartyId, RecordId};

/// Message kind tags; one per protocol phase artifact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum MessageKind {
    AnnounceUserSet,
    KernelBasis,
    SecureResponse,
    ScoreReport,
    SplitRequest,
    SplitReveal,
    Refusal,
}

impl std::fmt::Display for MessageKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            MessageKind::AnnounceUserSet => "announce-user-set",
            MessageKind::KernelBasis => "kernel-basis",
            MessageKind::SecureResponse => "secure-response",
            MessageKind::ScoreReport => "score-report",
            MessageKind::SplitRequest => "split-request",
            MessageKind::SplitReveal => "split-reveal",
            MessageKind::Refusal => "refusal",
        };
        f.write_str(s)
    }
}

/// Message payloads. `SecureResponse` doubles as the LDP gradient release
/// (a perturbed n×1 matrix with the true total attached and no hessian).
#[derive(Debug, Clone)]
pub enum Payload {
    AnnounceUserSet {
        tree: usize,
        node: u64,
        users: Vec<InstanceId>,
    },
    KernelBasis {
        basis: KernelBasis,
    },
    SecureResponse {
        data: RealMatrix,
        g_total: Option<f64>,
        h_total: Option<f64>,
        perturbed: bool,
    },
    ScoreReport {
        score: f64,
    },
    SplitRequest {
        /// Candidate index when the requester already knows it (smm1).
        candidate: Option<usize>,
        /// Set for inference routing queries.
        record: Option<RecordId>,
        instance: Option<InstanceId>,
    },
    SplitReveal {
        record: RecordId,
        feature: String,
        threshold: f64,
        left_members: Vec<InstanceId>,
    },
    Refusal {
        reason: String,
        flagged_rows: usize,
    },
}

impl Payload {
    pub fn kind(&self) -> MessageKind {
        match self {
            Payload::AnnounceUserSet { .. } => MessageKind::AnnounceUserSet,
            Payload::KernelBasis { .. } => MessageKind::KernelBasis,
            Payload::SecureResponse { .. } => MessageKind::SecureResponse,
            Payload::ScoreReport { .. } => MessageKind::ScoreReport,
            Payload::SplitRequest { .. } => MessageKind::SplitRequest,
            Payload::SplitReveal { .. } => MessageKind::SplitReveal,
            Payload::Refusal { .. } => MessageKind::Refusal,
        }
    }

    fn feed_matrix(h: &mut Sha256, m: &RealMatrix) {
        h.update((m.nrows() as u64).to_le_bytes());
        h.update((m.ncols() as u64).to_le_bytes());
        for v in m.iter() {
            h.update(v.to_le_bytes());
        }
    }

    /// Stable content digest for the trace log.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        match self {
            Payload::AnnounceUserSet { tree, node, users } => {
                h.update(b"announce");
                h.update((*tree as u64).to_le_bytes());
                h.update(node.to_le_bytes());
                for u in users {
                    h.update(u.to_le_bytes());
                }
            }
            Payload::KernelBasis { basis } => {
                h.update(b"basis");
                Self::feed_matrix(&mut h, basis.vectors());
            }
            Payload::SecureResponse {
                data,
                g_total,
                h_total,
                perturbed,
            } => {
                h.update(b"response");
                Self::feed_matrix(&mut h, data);
                h.update([u8::from(*perturbed)]);
                for t in [g_total, h_total].into_iter().flatten() {
                    h.update(t.to_le_bytes());
                }
            }
            Payload::ScoreReport { score } => {
                h.update(b"score");
                h.update(score.to_le_bytes());
            }
            Payload::SplitRequest {
                candidate,
                record,
                instance,
            } => {
                h.update(b"request");
                h.update(candidate.unwrap_or(usize::MAX).to_le_bytes());
                h.update(record.unwrap_or(u64::MAX).to_le_bytes());
                h.update(instance.unwrap_or(u64::MAX).to_le_bytes());
            }
            Payload::SplitReveal {
                record,
                feature,
                threshold,
                left_members,
            } => {
                h.update(b"reveal");
                h.update(record.to_le_bytes());
                h.update(feature.as_bytes());
                h.update(threshold.to_le_bytes());
                for m in left_members {
                    h.update(m.to_le_bytes());
                }
            }
            Payload::Refusal {
                reason,
                flagged_rows,
            } => {
                h.update(b"refusal");
                h.update(reason.as_bytes());
                h.update((*flagged_rows as u64).to_le_bytes());
            }
        }
        let out = h.finalize();
        out.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

/// One cross-party transfer.
#[derive(Debug, Clone)]
pub struct PartyMessage {
    pub round: u64,
    pub sender: PartyId,
    pub receiver: PartyId,
    pub payload: Payload,
}

/// Flat audit record of one transfer: enough structure to verify the
/// per-mode privacy boundary without retaining payload contents.
#[derive(Debug, Clone, serde::Serialize)]
pub struct TraceRecord {
    pub round: u64,
    pub sender: PartyId,
    pub receiver: PartyId,
    pub kind: String,
    pub payload_digest: String,
    /// Columns of the carried matrix, if any.
    pub cols: Option<usize>,
    pub perturbed: bool,
    pub carries_g_total: bool,
    pub carries_h_total: bool,
}

impl TraceRecord {
    pub fn of(msg: &PartyMessage) -> TraceRecord {
        let (cols, perturbed, carries_g_total, carries_h_total) = match &msg.payload {
            Payload::SecureResponse {
                data,
                g_total,
                h_total,
                perturbed,
            } => (
                Some(data.ncols()),
                *perturbed,
                g_total.is_some(),
                h_total.is_some(),
            ),
            Payload::KernelBasis { basis } => (Some(basis.r()), false, false, false),
            _ => (None, false, false, false),
        };
        TraceRecord {
            round: msg.round,
            sender: msg.sender,
            receiver: msg.receiver,
            kind: msg.payload.kind().to_string(),
            payload_digest: msg.payload.digest(),
            cols,
            perturbed,
            carries_g_total,
            carries_h_total,
        }
    }

    pub fn kind_is(&self, kind: MessageKind) -> bool {
        self.kind == kind.to_string()
    }
}
