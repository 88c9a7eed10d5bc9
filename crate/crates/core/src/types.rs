//! Identifier types shared across the workspace.

/// Identifies one sample instance across all parties.
pub type InstanceId = u64;

/// Identifies a party. The active party is always `0`; passive parties
/// are numbered from `1`.
pub type PartyId = u32;

/// Identifies a split record inside the owning party's private store.
pub type RecordId = u64;

/// Party id reserved for the active party.
pub const ACTIVE_PARTY: PartyId = 0;
