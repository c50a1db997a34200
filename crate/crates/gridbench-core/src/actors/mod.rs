//! Message-passing runtime and the services that drive the daily
//! collect / monthly bill workflow over it.

mod messages;
mod runtime;
mod services;

pub use messages::{decode, encode, DayOutcome, Message, MonthOutcome, Reply};
pub use runtime::{Actor, ActorError, Address, Context, Envelope, HandlerMode, Runtime, RuntimeConfig, WireCodec};
pub use services::{CdpnService, CnService, IngestRoute, SimError, Simulation, SimulationConfig, StorageGateway};
