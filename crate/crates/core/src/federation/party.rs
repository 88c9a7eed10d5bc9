//! Party state machines. Each party owns its private data and a receive
//! allowlist that encodes the protocol phase automaton; any message kind
//! arriving outside its phase aborts the run.

use std::collections::{BTreeMap, BTreeSet};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::message::{MessageKind, PartyMessage, Payload};
use super::{Mode, ProtocolParams};
use crate::boosting::best_candidate;
use crate::data::DatasetSlice;
use crate::error::{Error, Result};
use crate::linalg::{derive_seed, RealVector};
use crate::secure::{secure_kernel, secure_response, QuasiSecureMatrix, SecureKernelConfig};
use crate::split::{merge_feature_matrices, propose_candidates, split_operator, SplittingMatrix};
use crate::types::{InstanceId, PartyId, RecordId, ACTIVE_PARTY};

/// A split operation kept in the owning party's private store.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitRecord {
    pub record_id: RecordId,
    pub feature: String,
    pub threshold: f64,
}

/// Per-node working state of a passive party.
#[derive(Debug)]
struct NodeScratch {
    tree: usize,
    node: u64,
    users: Vec<InstanceId>,
    matrix: Option<SplittingMatrix>,
    quasi: Option<QuasiSecureMatrix>,
    l1: usize,
    l2: usize,
    retries: usize,
    best: Option<(usize, f64)>,
}

/// Feature-holding party.
#[derive(Debug)]
pub struct PassiveParty {
    pub id: PartyId,
    slice: DatasetSlice,
    row_of: BTreeMap<InstanceId, usize>,
    pub records: Vec<SplitRecord>,
    allowed: BTreeSet<MessageKind>,
    scratch: Option<NodeScratch>,
    mode: Mode,
    seed: u64,
}

fn resting_kinds() -> BTreeSet<MessageKind> {
    [MessageKind::AnnounceUserSet, MessageKind::SplitRequest]
        .into_iter()
        .collect()
}

impl PassiveParty {
    pub fn new(id: PartyId, slice: DatasetSlice, seed: u64) -> Result<PassiveParty> {
        if id == ACTIVE_PARTY {
            return Err(Error::Parameter("passive party id cannot be 0".into()));
        }
        if slice.label.is_some() {
            return Err(Error::Parameter(format!(
                "passive party {id} must not hold labels"
            )));
        }
        let row_of = slice
            .user_ids
            .iter()
            .enumerate()
            .map(|(i, &id)| (id, i))
            .collect();
        Ok(PassiveParty {
            id,
            slice,
            row_of,
            records: Vec::new(),
            allowed: resting_kinds(),
            scratch: None,
            mode: Mode::Centralized,
            seed,
        })
    }

    pub fn begin_training(&mut self, mode: Mode) {
        self.mode = mode;
        self.allowed = resting_kinds();
        self.scratch = None;
    }

    pub fn slice(&self) -> &DatasetSlice {
        &self.slice
    }

    pub fn record(&self, id: RecordId) -> Option<&SplitRecord> {
        self.records.get(id as usize)
    }

    fn rng(&self, tags: &[u64]) -> ChaCha20Rng {
        ChaCha20Rng::seed_from_u64(derive_seed(self.seed, tags))
    }

    fn reply(&self, receiver: PartyId, payload: Payload) -> PartyMessage {
        PartyMessage {
            round: 0,
            sender: self.id,
            receiver,
            payload,
        }
    }

    /// Builds the merged splitting matrix for the announced users; `None`
    /// when every feature is constant on the node.
    fn build_matrix(
        &self,
        users: &[InstanceId],
        l: usize,
    ) -> Result<Option<SplittingMatrix>> {
        let rows: Vec<usize> = users
            .iter()
            .map(|id| {
                self.row_of.get(id).copied().ok_or_else(|| {
                    Error::Routing(format!("party {} does not know instance {id}", self.id))
                })
            })
            .collect::<Result<_>>()?;
        let mut per_feature = Vec::new();
        for feature in &self.slice.features {
            let values: Vec<f64> = rows.iter().map(|&r| feature.values[r]).collect();
            if values.len() < 2 {
                continue;
            }
            if let Some(cands) = propose_candidates(&feature.name, &values, l)? {
                per_feature.push(split_operator(&values, &cands, users)?);
            }
        }
        if per_feature.is_empty() {
            return Ok(None);
        }
        Ok(Some(merge_feature_matrices(&per_feature)?))
    }

    /// Quasi-secure kernel construction with node-adaptive column counts.
    fn run_secure_kernel(&mut self, params: &ProtocolParams) -> Result<Payload> {
        let scratch = self.scratch.as_mut().expect("scratch present");
        let m = scratch.matrix.as_ref().expect("matrix present");
        let n = scratch.users.len();
        let l = m.cols();
        let l1 = scratch.l1.min(n.saturating_sub(2 + l));
        let l2 = scratch.l2.min(n.saturating_sub(2 + l + l1));
        let r = params.node_r(n, l + l1 + l2);
        let cfg = SecureKernelConfig {
            l1,
            l2,
            mu: params.mu,
            sigma: params.sigma,
            r,
        };
        let mut rng = self.rng(&[
            3,
            scratch.tree as u64,
            scratch.node,
            scratch.retries as u64,
        ]);
        let (quasi, basis) = secure_kernel(m, &cfg, &mut rng)?;
        scratch.quasi = Some(quasi);
        Ok(Payload::KernelBasis { basis })
    }

    fn guard(&self, msg: &PartyMessage) -> Result<()> {
        let kind = msg.payload.kind();
        if !self.allowed.contains(&kind) {
            return Err(Error::protocol(
                msg.round,
                format!(
                    "party {} received {kind} outside its phase (allowed: {})",
                    self.id,
                    self.allowed
                        .iter()
                        .map(|k| k.to_string())
                        .collect::<Vec<_>>()
                        .join(", ")
                ),
            ));
        }
        Ok(())
    }

    /// Delivers one message, returning any replies.
    pub fn receive(
        &mut self,
        msg: PartyMessage,
        params: &ProtocolParams,
    ) -> Result<Vec<PartyMessage>> {
        self.guard(&msg)?;
        let round = msg.round;
        match msg.payload {
            Payload::AnnounceUserSet { tree, node, users } => {
                self.on_announce(tree, node, users, params)
            }
            Payload::KernelBasis { basis } => {
                // smm1: mask the splitting matrix with the received basis.
                let scratch = self.scratch.as_ref().expect("announced");
                let n = scratch.users.len();
                let w = match &scratch.matrix {
                    Some(m) => {
                        let r_prime = params.node_r_prime(basis.r());
                        let mut rng = self.rng(&[2, scratch.tree as u64, scratch.node]);
                        secure_response(m.entries(), &basis, r_prime, &mut rng)?
                    }
                    None => crate::linalg::RealMatrix::zeros(n, 0),
                };
                self.allowed = resting_kinds();
                Ok(vec![self.reply(
                    ACTIVE_PARTY,
                    Payload::SecureResponse {
                        data: w,
                        g_total: None,
                        h_total: None,
                        perturbed: false,
                    },
                )])
            }
            Payload::SecureResponse {
                data,
                g_total,
                h_total,
                ..
            } => self.on_secure_response(round, data, g_total, h_total, params),
            Payload::Refusal { reason, .. } => {
                let scratch = self.scratch.as_mut().expect("announced");
                scratch.retries += 1;
                if scratch.retries > params.max_refusal_retries {
                    return Err(Error::protocol(
                        round,
                        format!(
                            "party {}: mask refused {} times ({reason}); giving up",
                            self.id, scratch.retries
                        ),
                    ));
                }
                scratch.l2 = (scratch.l2 * 2).max(2);
                let payload = self.run_secure_kernel(params)?;
                Ok(vec![self.reply(ACTIVE_PARTY, payload)])
            }
            Payload::SplitRequest {
                candidate,
                record,
                instance,
            } => self.on_split_request(round, candidate, record, instance),
            other => Err(Error::protocol(
                round,
                format!("party {} cannot handle {}", self.id, other.kind()),
            )),
        }
    }

    fn on_announce(
        &mut self,
        tree: usize,
        node: u64,
        users: Vec<InstanceId>,
        params: &ProtocolParams,
    ) -> Result<Vec<PartyMessage>> {
        let matrix = self.build_matrix(&users, params.l)?;
        self.scratch = Some(NodeScratch {
            tree,
            node,
            users,
            matrix,
            quasi: None,
            l1: params.l1,
            l2: params.l2,
            retries: 0,
            best: None,
        });
        match self.mode {
            Mode::Smm1 => {
                self.allowed = [MessageKind::KernelBasis].into_iter().collect();
                Ok(Vec::new())
            }
            Mode::Smm2 => {
                if self.scratch.as_ref().unwrap().matrix.is_none() {
                    // Nothing to propose; report an empty score immediately.
                    self.allowed = resting_kinds();
                    return Ok(vec![self.reply(
                        ACTIVE_PARTY,
                        Payload::ScoreReport {
                            score: f64::NEG_INFINITY,
                        },
                    )]);
                }
                let payload = self.run_secure_kernel(params)?;
                self.allowed = [MessageKind::SecureResponse, MessageKind::Refusal]
                    .into_iter()
                    .collect();
                Ok(vec![self.reply(ACTIVE_PARTY, payload)])
            }
            Mode::Ldp => {
                self.allowed = [MessageKind::SecureResponse].into_iter().collect();
                Ok(Vec::new())
            }
            Mode::Centralized => Err(Error::Parameter(
                "centralized mode does not exchange node announcements".into(),
            )),
        }
    }

    fn on_secure_response(
        &mut self,
        round: u64,
        data: crate::linalg::RealMatrix,
        g_total: Option<f64>,
        h_total: Option<f64>,
        params: &ProtocolParams,
    ) -> Result<Vec<PartyMessage>> {
        let scratch = self.scratch.as_mut().expect("announced");
        let score = match self.mode {
            Mode::Smm2 => {
                let quasi = scratch.quasi.as_ref().expect("kernel built");
                let g_total = g_total
                    .ok_or_else(|| Error::protocol(round, "secure response missing G".into()))?;
                let h_total = h_total
                    .ok_or_else(|| Error::protocol(round, "secure response missing H".into()))?;
                // (M*)ᵀW, then keep only rows of genuine candidates.
                let product = quasi.m_star.transpose() * &data;
                let gl = quasi.filter_true_rows(&product.column(0).into_owned());
                let hl = quasi.filter_true_rows(&product.column(1).into_owned());
                let scores: Vec<f64> = (0..gl.len())
                    .map(|i| {
                        second_order_or_neg_inf(
                            gl[i],
                            hl[i],
                            g_total - gl[i],
                            h_total - hl[i],
                            g_total,
                            h_total,
                            params.lambda,
                            params.gamma,
                        )
                    })
                    .collect();
                scratch.best = best_candidate(&scores);
                scratch.best.map(|(_, s)| s).unwrap_or(f64::NEG_INFINITY)
            }
            Mode::Ldp => {
                let g_total = g_total
                    .ok_or_else(|| Error::protocol(round, "gradient release missing G".into()))?;
                match &scratch.matrix {
                    Some(m) => {
                        let g_star: RealVector = data.column(0).into_owned();
                        let gl = m.entries().transpose() * &g_star;
                        let scores: Vec<f64> = (0..gl.len())
                            .map(|i| -(gl[i] * (g_total - gl[i])) / params.lambda)
                            .collect();
                        scratch.best = best_candidate(&scores);
                        scratch.best.map(|(_, s)| s).unwrap_or(f64::NEG_INFINITY)
                    }
                    None => f64::NEG_INFINITY,
                }
            }
            _ => {
                return Err(Error::protocol(
                    round,
                    format!("party {} got a secure response in {:?}", self.id, self.mode),
                ))
            }
        };
        self.allowed = resting_kinds();
        Ok(vec![self.reply(ACTIVE_PARTY, Payload::ScoreReport { score })])
    }

    fn on_split_request(
        &mut self,
        round: u64,
        candidate: Option<usize>,
        record: Option<RecordId>,
        instance: Option<InstanceId>,
    ) -> Result<Vec<PartyMessage>> {
        // Inference routing: answer membership for a single instance.
        if let (Some(record_id), Some(instance_id)) = (record, instance) {
            let rec = self
                .records
                .get(record_id as usize)
                .ok_or_else(|| {
                    Error::Routing(format!(
                        "party {} has no split record {record_id}",
                        self.id
                    ))
                })?
                .clone();
            let row = self.row_of.get(&instance_id).copied().ok_or_else(|| {
                Error::Routing(format!(
                    "instance {instance_id} unknown to party {}",
                    self.id
                ))
            })?;
            let value = self
                .slice
                .feature(&rec.feature)
                .expect("recorded feature exists")
                .values[row];
            let left_members = if value <= rec.threshold {
                vec![instance_id]
            } else {
                Vec::new()
            };
            return Ok(vec![self.reply(
                ACTIVE_PARTY,
                Payload::SplitReveal {
                    record: rec.record_id,
                    feature: rec.feature.clone(),
                    threshold: rec.threshold,
                    left_members,
                },
            )]);
        }

        // Training: reveal the requested (or saved best) splitting column.
        let scratch = self
            .scratch
            .as_ref()
            .ok_or_else(|| Error::protocol(round, "split request before any announce".into()))?;
        let matrix = scratch
            .matrix
            .as_ref()
            .ok_or_else(|| Error::protocol(round, "split request without candidates".into()))?;
        let col = match candidate {
            Some(c) => c,
            None => {
                scratch
                    .best
                    .ok_or_else(|| {
                        Error::protocol(round, "split request but no best candidate saved".into())
                    })?
                    .0
            }
        };
        if col >= matrix.cols() {
            return Err(Error::protocol(
                round,
                format!("candidate index {col} out of range"),
            ));
        }
        let meta = &matrix.column_meta()[col];
        let record_id = self.records.len() as RecordId;
        self.records.push(SplitRecord {
            record_id,
            feature: meta.feature.clone(),
            threshold: meta.threshold,
        });
        let left_members = matrix.left_members(col);
        self.allowed = resting_kinds();
        Ok(vec![self.reply(
            ACTIVE_PARTY,
            Payload::SplitReveal {
                record: record_id,
                feature: meta.feature.clone(),
                threshold: meta.threshold,
                left_members,
            },
        )])
    }
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn second_order_or_neg_inf(
    gl: f64,
    hl: f64,
    gr: f64,
    hr: f64,
    g: f64,
    h: f64,
    lambda: f64,
    gamma: f64,
) -> f64 {
    crate::boosting::split_score_second_order(gl, hl, gr, hr, g, h, lambda, gamma)
        .unwrap_or(f64::NEG_INFINITY)
}

/// Label-holding party: owns gradients/hessians and validates its own
/// receive phases. The tree-construction decisions live in the driver,
/// which acts on this party's behalf.
#[derive(Debug)]
pub struct ActiveParty {
    pub ids: Vec<InstanceId>,
    pub labels: Vec<f64>,
    allowed: BTreeSet<MessageKind>,
    inbox: Vec<(PartyId, Payload)>,
}

impl ActiveParty {
    pub fn new(slice: &DatasetSlice) -> Result<ActiveParty> {
        let labels = slice
            .label
            .clone()
            .ok_or_else(|| Error::Parameter("active party slice must hold the label".into()))?;
        Ok(ActiveParty {
            ids: slice.user_ids.clone(),
            labels,
            allowed: BTreeSet::new(),
            inbox: Vec::new(),
        })
    }

    pub fn expect(&mut self, kinds: &[MessageKind]) {
        self.allowed = kinds.iter().copied().collect();
    }

    /// Validates and stores an incoming message; the driver drains the
    /// inbox sorted by sender so delivery order cannot matter.
    pub fn receive(&mut self, msg: PartyMessage) -> Result<()> {
        let kind = msg.payload.kind();
        if !self.allowed.contains(&kind) {
            return Err(Error::protocol(
                msg.round,
                format!(
                    "active party received {kind} outside its phase (allowed: {})",
                    self.allowed
                        .iter()
                        .map(|k| k.to_string())
                        .collect::<Vec<_>>()
                        .join(", ")
                ),
            ));
        }
        self.inbox.push((msg.sender, msg.payload));
        Ok(())
    }

    pub fn drain_inbox(&mut self) -> Vec<(PartyId, Payload)> {
        let mut out = std::mem::take(&mut self.inbox);
        out.sort_by_key(|(sender, _)| *sender);
        out
    }
}
