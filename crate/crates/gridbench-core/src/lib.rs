//! Desk-scale benchmark harness for smart-meter data pipelines.
//!
//! Four storage architectures (single tabular store, per-concentrator
//! stores, key-value monthly append, hybrid file-system + metadata store)
//! are driven through the same daily collect / monthly bill workflow and
//! must produce bit-identical bills. Billing itself is done either by the
//! store's query layer or by the in-memory multi-core billing kernel in
//! [`mcb`].
//!
//! Module map:
//! - [`domain`]: readings, slot arithmetic, identifiers, fixed-point units
//! - [`tariff`]: time buckets, slot classification, the indirection mask
//! - [`mcb`]: gather-sort + contiguous reduction billing kernel and its
//!   brute-force oracle
//! - [`datagen`]: deterministic synthetic load profiles
//! - [`storage`]: the four backends behind one contract
//! - [`actors`]: minimal message-passing runtime and the coordinator /
//!   concentrator services
//! - [`bench`]: experiment harness, timing, CSV reports

pub mod actors;
pub mod bench;
pub mod datagen;
pub mod domain;
pub mod mcb;
pub mod storage;
pub mod tariff;
pub mod testkit;
