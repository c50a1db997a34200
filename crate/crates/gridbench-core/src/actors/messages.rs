//! The harness protocol: the messages exchanged between the coordinator,
//! the concentrators, and the storage gateway, plus the wire codec used
//! when payload serialization is forced on to emulate remote nodes.
//! Daily readings travel in the same blob encoding the key-value store
//! persists, so the wire format and the storage fixtures stay one format.

use std::sync::mpsc;

use serde::{Deserialize, Serialize};

use crate::domain::{ConcentratorId, HouseholdId, Kwh, MeterReading, Money};
use crate::mcb::BillLine;
use crate::storage::formats;
use crate::tariff::BucketSetSpec;

/// One-shot response channel carried by driver-plane messages. Local
/// only; the wire codec never sees these messages.
pub struct Reply<T>(mpsc::Sender<T>);

impl<T> Reply<T> {
    pub fn channel() -> (Reply<T>, mpsc::Receiver<T>) {
        let (tx, rx) = mpsc::channel();
        (Reply(tx), rx)
    }

    pub fn send(&self, value: T) {
        // The driver may have timed out and dropped the receiver.
        let _ = self.0.send(value);
    }
}

impl<T> std::fmt::Debug for Reply<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("Reply")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DayOutcome {
    pub day: u32,
    pub elapsed: std::time::Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonthOutcome {
    pub per_day: Vec<std::time::Duration>,
}

#[derive(Debug)]
pub enum Message {
    // Node-to-node protocol; round-trips through the wire codec when
    // payload serialization is on.
    Collect { day: u32 },
    DailyData { cn: ConcentratorId, day: u32, readings: Vec<MeterReading> },
    InsertDone { cn: ConcentratorId, day: u32, error: Option<String> },
    BillRequest { set: BucketSetSpec },
    BillResponse { cn: ConcentratorId, result: Result<Vec<BillLine>, String> },
    Shutdown,
    // Driver plane (harness to coordinator, or coordinator to itself).
    RunDay { day: u32, reply: Reply<Result<DayOutcome, super::SimError>> },
    RunMonth { reply: Reply<Result<MonthOutcome, super::SimError>> },
    NextDay { day: u32 },
    RunBilling { set: BucketSetSpec, reply: Reply<Result<Vec<BillLine>, super::SimError>> },
    PendingCns { reply: Reply<Vec<u32>> },
}

#[derive(Serialize, Deserialize)]
struct WireHousehold {
    id: String,
    blob: String,
}

#[derive(Serialize, Deserialize)]
struct WireBill {
    household: String,
    kwh_milli: Vec<i64>,
    total_nano: i64,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Wire {
    Collect { day: u32 },
    DailyData { cn: u32, day: u32, households: Vec<WireHousehold> },
    InsertDone { cn: u32, day: u32, error: Option<String> },
    BillRequest { set: BucketSetSpec },
    BillResponse { cn: u32, bills: Option<Vec<WireBill>>, error: Option<String> },
    Shutdown,
}

/// Wire encoding for protocol messages; `None` for driver-plane messages,
/// which never cross a node boundary.
pub fn encode(msg: &Message) -> Option<Vec<u8>> {
    let wire = match msg {
        Message::Collect { day } => Wire::Collect { day: *day },
        Message::DailyData { cn, day, readings } => {
            let mut households: Vec<WireHousehold> = Vec::new();
            for r in readings {
                let id = r.household.to_string();
                if households.last().map(|h| h.id.as_str()) != Some(id.as_str()) {
                    households.push(WireHousehold { id, blob: String::new() });
                }
                households.last_mut().expect("just pushed").blob.push_str(&formats::blob_entry(r.slot, r.kwh));
            }
            Wire::DailyData { cn: cn.0, day: *day, households }
        }
        Message::InsertDone { cn, day, error } => Wire::InsertDone { cn: cn.0, day: *day, error: error.clone() },
        Message::BillRequest { set } => Wire::BillRequest { set: set.clone() },
        Message::BillResponse { cn, result } => match result {
            Ok(bills) => Wire::BillResponse {
                cn: cn.0,
                bills: Some(
                    bills
                        .iter()
                        .map(|b| WireBill {
                            household: b.household.to_string(),
                            kwh_milli: b.per_bucket_kwh.iter().map(|k| k.milli()).collect(),
                            total_nano: b.total_amount.nano(),
                        })
                        .collect(),
                ),
                error: None,
            },
            Err(e) => Wire::BillResponse { cn: cn.0, bills: None, error: Some(e.clone()) },
        },
        Message::Shutdown => Wire::Shutdown,
        _ => return None,
    };
    Some(serde_json::to_vec(&wire).expect("wire form is serializable"))
}

pub fn decode(bytes: &[u8]) -> Result<Message, String> {
    let wire: Wire = serde_json::from_slice(bytes).map_err(|e| e.to_string())?;
    Ok(match wire {
        Wire::Collect { day } => Message::Collect { day },
        Wire::DailyData { cn, day, households } => {
            let mut readings = Vec::new();
            for h in households {
                let household: HouseholdId = h.id.parse()?;
                readings.extend(formats::blob_to_readings(household, &h.blob)?);
            }
            Message::DailyData { cn: ConcentratorId(cn), day, readings }
        }
        Wire::InsertDone { cn, day, error } => Message::InsertDone { cn: ConcentratorId(cn), day, error },
        Wire::BillRequest { set } => Message::BillRequest { set },
        Wire::BillResponse { cn, bills, error } => {
            let result = match (bills, error) {
                (Some(bills), None) => Ok(bills
                    .into_iter()
                    .map(|b| {
                        Ok(BillLine {
                            household: b.household.parse()?,
                            per_bucket_kwh: b.kwh_milli.into_iter().map(Kwh::from_milli).collect(),
                            total_amount: Money::from_nano(b.total_nano),
                        })
                    })
                    .collect::<Result<Vec<_>, String>>()?),
                (None, Some(e)) => Err(e),
                _ => return Err("bill response needs exactly one of bills or error".into()),
            };
            Message::BillResponse { cn: ConcentratorId(cn), result }
        }
        Wire::Shutdown => Message::Shutdown,
    })
}
