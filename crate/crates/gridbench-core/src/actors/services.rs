//! The coordinator and concentrator services on top of the runtime.
//!
//! The coordinator is the only active node: it broadcasts the daily
//! `Collect` order, joins the per-concentrator `InsertDone` replies
//! before advancing the month state machine (driving itself with
//! `NextDay` messages for full-month runs), and computes or gathers the
//! monthly bill. Concentrators are passive; they generate their
//! households' readings on order and either write to their own store
//! (architectures II and IV) or forward the day's data to the storage
//! gateway fronting the central store (architectures I and III).

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::actors::messages::{DayOutcome, Message, MonthOutcome, Reply};
use crate::actors::runtime::{Actor, Address, Context, Envelope, HandlerMode, Runtime, RuntimeConfig, WireCodec};
use crate::datagen::{self, DatagenConfig};
use crate::domain::{ConcentratorId, HouseholdId, MonthSpec};
use crate::mcb::BillLine;
use crate::storage::{AnyBackend, Architecture, BackendConfig, StorageBackend};
use crate::tariff::{BucketSet, BucketSetSpec};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("day {requested} out of order; the next day to run is {expected}")]
    DayOutOfOrder { requested: u32, expected: u32 },
    #[error("a daily cycle is already in progress")]
    DayInProgress,
    #[error("month incomplete: {days_done} of {days} days ingested")]
    IncompleteMonth { days_done: u32, days: u32 },
    #[error("concentrators {0:?} did not answer before the deadline")]
    CnTimeout(Vec<u32>),
    #[error("concentrator {cn} failed: {error}")]
    CnFailed { cn: u32, error: String },
    #[error("tariff: {0}")]
    Tariff(String),
    #[error("storage: {0}")]
    Storage(String),
    #[error("runtime: {0}")]
    Runtime(String),
    #[error("coordinator dropped the request")]
    Disconnected,
}

enum DayCompletion {
    Reply(Reply<Result<DayOutcome, SimError>>),
    MonthRun,
}

struct DayJoin {
    day: u32,
    pending: BTreeSet<u32>,
    failures: Vec<(u32, String)>,
    started: Instant,
    completion: DayCompletion,
}

struct MonthRun {
    per_day: Vec<Duration>,
    reply: Reply<Result<MonthOutcome, SimError>>,
}

struct BillJoin {
    pending: BTreeSet<u32>,
    collected: BTreeMap<u32, Vec<BillLine>>,
    failures: Vec<(u32, String)>,
    reply: Reply<Result<Vec<BillLine>, SimError>>,
}

/// Central data processing service: month state machine, daily join,
/// billing orchestration.
pub struct CdpnService {
    cns: Vec<Address>,
    gateway: Option<Address>,
    backend: Arc<AnyBackend>,
    month: MonthSpec,
    days_done: u32,
    finalized: bool,
    day_join: Option<DayJoin>,
    month_run: Option<MonthRun>,
    bill_join: Option<BillJoin>,
    /// Wall time of each completed daily cycle, join to join.
    day_timings: Vec<Duration>,
}

impl CdpnService {
    pub fn new(cns: Vec<Address>, gateway: Option<Address>, backend: Arc<AnyBackend>, month: MonthSpec) -> Self {
        CdpnService {
            cns,
            gateway,
            backend,
            month,
            days_done: 0,
            finalized: false,
            day_join: None,
            month_run: None,
            bill_join: None,
            day_timings: Vec::new(),
        }
    }

    fn start_day(&mut self, ctx: &Context<Message>, day: u32, completion: DayCompletion) {
        let fail = |completion: DayCompletion, month_run: &mut Option<MonthRun>, err: SimError| match completion {
            DayCompletion::Reply(reply) => reply.send(Err(err)),
            DayCompletion::MonthRun => {
                if let Some(run) = month_run.take() {
                    run.reply.send(Err(err));
                }
            }
        };
        if self.day_join.is_some() {
            return fail(completion, &mut self.month_run, SimError::DayInProgress);
        }
        if day != self.days_done || day >= self.month.days {
            return fail(
                completion,
                &mut self.month_run,
                SimError::DayOutOfOrder { requested: day, expected: self.days_done },
            );
        }
        let mut pending = BTreeSet::new();
        for (cn, addr) in self.cns.iter().enumerate() {
            if let Err(e) = ctx.send(addr, Message::Collect { day }) {
                return fail(completion, &mut self.month_run, SimError::Runtime(e.to_string()));
            }
            pending.insert(cn as u32);
        }
        self.day_join =
            Some(DayJoin { day, pending, failures: Vec::new(), started: Instant::now(), completion });
        if self.cns.is_empty() {
            self.complete_day_if_done(ctx);
        }
    }

    fn complete_day_if_done(&mut self, ctx: &Context<Message>) {
        let done = self.day_join.as_ref().is_some_and(|j| j.pending.is_empty());
        if !done {
            return;
        }
        let join = self.day_join.take().expect("checked above");
        let elapsed = join.started.elapsed();
        let outcome = if let Some((cn, error)) = join.failures.into_iter().next() {
            Err(SimError::CnFailed { cn, error })
        } else {
            self.days_done += 1;
            self.day_timings.push(elapsed);
            if self.days_done == self.month.days && !self.finalized {
                // Last join of the month closes the ingest window.
                match self.backend.finalize_month() {
                    Ok(()) => self.finalized = true,
                    Err(e) => return self.finish_day(join.completion, Err(SimError::Storage(e.to_string()))),
                }
            }
            Ok(DayOutcome { day: join.day, elapsed })
        };
        match (&outcome, &join.completion) {
            (Ok(out), DayCompletion::MonthRun) => {
                if let Some(run) = self.month_run.as_mut() {
                    run.per_day.push(out.elapsed);
                }
                if self.days_done < self.month.days {
                    if let Err(e) = ctx.send_to_self(Message::NextDay { day: self.days_done }) {
                        if let Some(run) = self.month_run.take() {
                            run.reply.send(Err(SimError::Runtime(e.to_string())));
                        }
                    }
                } else if let Some(run) = self.month_run.take() {
                    run.reply.send(Ok(MonthOutcome { per_day: run.per_day }));
                }
            }
            _ => self.finish_day(join.completion, outcome),
        }
    }

    fn finish_day(&mut self, completion: DayCompletion, outcome: Result<DayOutcome, SimError>) {
        match completion {
            DayCompletion::Reply(reply) => reply.send(outcome),
            DayCompletion::MonthRun => {
                if let Some(run) = self.month_run.take() {
                    run.reply.send(outcome.map(|_| MonthOutcome { per_day: run.per_day.clone() }));
                }
            }
        }
    }

    fn start_billing(&mut self, ctx: &Context<Message>, set_spec: BucketSetSpec, reply: Reply<Result<Vec<BillLine>, SimError>>) {
        if self.day_join.is_some() {
            return reply.send(Err(SimError::DayInProgress));
        }
        if self.days_done < self.month.days {
            return reply.send(Err(SimError::IncompleteMonth { days_done: self.days_done, days: self.month.days }));
        }
        // Generating the bucket set: validate the spec into a partition.
        let set = match set_spec.build() {
            Ok(set) => set,
            Err(e) => return reply.send(Err(SimError::Tariff(e.to_string()))),
        };
        match self.backend.architecture() {
            Architecture::A2 => {
                // Each concentrator bills its own store and forwards the
                // result; the coordinator only joins and concatenates.
                let mut pending = BTreeSet::new();
                for (cn, addr) in self.cns.iter().enumerate() {
                    if let Err(e) = ctx.send(addr, Message::BillRequest { set: set_spec.clone() }) {
                        return reply.send(Err(SimError::Runtime(e.to_string())));
                    }
                    pending.insert(cn as u32);
                }
                self.bill_join =
                    Some(BillJoin { pending, collected: BTreeMap::new(), failures: Vec::new(), reply });
                if self.cns.is_empty() {
                    self.complete_billing_if_done();
                }
            }
            _ => {
                let result = self
                    .backend
                    .compute_bill(&set)
                    .map_err(|e| SimError::Storage(e.to_string()));
                reply.send(result);
            }
        }
    }

    fn complete_billing_if_done(&mut self) {
        let done = self.bill_join.as_ref().is_some_and(|j| j.pending.is_empty());
        if !done {
            return;
        }
        let join = self.bill_join.take().expect("checked above");
        if let Some((cn, error)) = join.failures.into_iter().next() {
            return join.reply.send(Err(SimError::CnFailed { cn, error }));
        }
        // Concatenate forwarded results in concentrator order.
        let mut bills = Vec::new();
        for (_, mut lines) in join.collected {
            bills.append(&mut lines);
        }
        join.reply.send(Ok(bills));
    }

    pub fn day_timings(&self) -> &[Duration] {
        &self.day_timings
    }
}

impl Actor<Message> for CdpnService {
    fn mode(&self, msg: &Message) -> HandlerMode {
        match msg {
            // Read-only status query; may overlap other reads but never a
            // state transition.
            Message::PendingCns { .. } => HandlerMode::Concurrent,
            _ => HandlerMode::Exclusive,
        }
    }

    fn handle_exclusive(&mut self, ctx: &Context<Message>, env: Envelope<Message>) {
        match env.msg {
            Message::RunDay { day, reply } => self.start_day(ctx, day, DayCompletion::Reply(reply)),
            Message::NextDay { day } => self.start_day(ctx, day, DayCompletion::MonthRun),
            Message::RunMonth { reply } => {
                if self.days_done != 0 || self.day_join.is_some() {
                    return reply.send(Err(SimError::DayOutOfOrder { requested: 0, expected: self.days_done }));
                }
                self.month_run = Some(MonthRun { per_day: Vec::new(), reply });
                if let Err(e) = ctx.send_to_self(Message::NextDay { day: 0 }) {
                    if let Some(run) = self.month_run.take() {
                        run.reply.send(Err(SimError::Runtime(e.to_string())));
                    }
                }
            }
            Message::InsertDone { cn, day, error } => {
                if let Some(join) = self.day_join.as_mut() {
                    if join.day == day && join.pending.remove(&cn.0) {
                        if let Some(e) = error {
                            join.failures.push((cn.0, e));
                        }
                        self.complete_day_if_done(ctx);
                    }
                }
            }
            Message::RunBilling { set, reply } => self.start_billing(ctx, set, reply),
            Message::BillResponse { cn, result } => {
                if let Some(join) = self.bill_join.as_mut() {
                    if join.pending.remove(&cn.0) {
                        match result {
                            Ok(lines) => {
                                join.collected.insert(cn.0, lines);
                            }
                            Err(e) => join.failures.push((cn.0, e)),
                        }
                        self.complete_billing_if_done();
                    }
                }
            }
            Message::Shutdown => {
                for addr in &self.cns {
                    let _ = ctx.send(addr, Message::Shutdown);
                }
                if let Some(gw) = &self.gateway {
                    let _ = ctx.send(gw, Message::Shutdown);
                }
            }
            _ => {}
        }
    }

    fn handle_concurrent(&self, _ctx: &Context<Message>, env: Envelope<Message>) {
        if let Message::PendingCns { reply } = env.msg {
            let pending = self
                .day_join
                .as_ref()
                .map(|j| j.pending.iter().copied().collect())
                .unwrap_or_default();
            reply.send(pending);
        }
    }
}

/// How a concentrator gets its day's readings into storage.
pub enum IngestRoute {
    /// Architecture II / IV: the concentrator writes to its own store.
    Direct,
    /// Architecture I / III: the day's data is forwarded to the storage
    /// gateway fronting the central store.
    Forward(Address),
}

/// Concentrator service: generates its households' readings on `Collect`
/// and reports `InsertDone` once they are stored.
pub struct CnService {
    cn: ConcentratorId,
    households: Vec<HouseholdId>,
    datagen: DatagenConfig,
    backend: Arc<AnyBackend>,
    route: IngestRoute,
    cdpn: Address,
    stopped: bool,
}

impl CnService {
    pub fn new(
        cn: ConcentratorId,
        households: Vec<HouseholdId>,
        datagen: DatagenConfig,
        backend: Arc<AnyBackend>,
        route: IngestRoute,
        cdpn: Address,
    ) -> Self {
        CnService { cn, households, datagen, backend, route, cdpn, stopped: false }
    }

    fn collect_day(&self, day: u32) -> Vec<crate::domain::MeterReading> {
        let mut batch = Vec::with_capacity(self.households.len() * crate::domain::SLOTS_PER_DAY as usize);
        for &hh in &self.households {
            batch.extend(datagen::generate_household_day(&self.datagen, hh, day));
        }
        batch
    }
}

impl Actor<Message> for CnService {
    fn handle_exclusive(&mut self, ctx: &Context<Message>, env: Envelope<Message>) {
        if self.stopped {
            return;
        }
        let reply_to = env.reply_handle();
        match env.msg {
            Message::Collect { day } => {
                let batch = self.collect_day(day);
                match &self.route {
                    IngestRoute::Direct => {
                        let error = self
                            .backend
                            .insert_daily(self.cn, day, &batch)
                            .err()
                            .map(|e| e.to_string());
                        let _ = ctx.send(&self.cdpn, Message::InsertDone { cn: self.cn, day, error });
                    }
                    IngestRoute::Forward(gateway) => {
                        if let Err(e) = ctx.send(gateway, Message::DailyData { cn: self.cn, day, readings: batch }) {
                            let _ = ctx.send(
                                &self.cdpn,
                                Message::InsertDone { cn: self.cn, day, error: Some(e.to_string()) },
                            );
                        }
                    }
                }
            }
            // The gateway's ack for a forwarded day; pass it up.
            Message::InsertDone { cn, day, error } => {
                let _ = ctx.send(&self.cdpn, Message::InsertDone { cn, day, error });
            }
            Message::BillRequest { set } => {
                let result = set
                    .build()
                    .map_err(|e| e.to_string())
                    .and_then(|set| self.bill_own_store(&set).map_err(|e| e.to_string()));
                let _ = ctx.respond(&reply_to, Message::BillResponse { cn: self.cn, result });
            }
            Message::Shutdown => self.stopped = true,
            _ => {}
        }
    }
}

impl CnService {
    fn bill_own_store(&self, set: &BucketSet) -> Result<Vec<BillLine>, String> {
        match self.backend.as_a2() {
            Some(a2) => a2.compute_bill_for_cn(self.cn, set).map_err(|e| e.to_string()),
            None => Err("per-concentrator billing needs architecture A2".into()),
        }
    }
}

/// Front-end for the central store of architectures I and III. The
/// ingest handler is exclusive, which is what serializes forwarded
/// batches at the actor layer on top of the store's own writer queue.
pub struct StorageGateway {
    backend: Arc<AnyBackend>,
    stopped: bool,
}

impl StorageGateway {
    pub fn new(backend: Arc<AnyBackend>) -> Self {
        StorageGateway { backend, stopped: false }
    }
}

impl Actor<Message> for StorageGateway {
    fn handle_exclusive(&mut self, ctx: &Context<Message>, env: Envelope<Message>) {
        if self.stopped {
            return;
        }
        match &env.msg {
            Message::DailyData { cn, day, readings } => {
                let (cn, day) = (*cn, *day);
                let error = self.backend.insert_daily(cn, day, readings).err().map(|e| e.to_string());
                let _ = ctx.reply(&env, Message::InsertDone { cn, day, error });
            }
            Message::Shutdown => self.stopped = true,
            _ => {}
        }
    }
}

/// Everything needed to stand up one simulated deployment.
pub struct SimulationConfig {
    pub architecture: Architecture,
    pub cn_count: u32,
    pub households_per_cn: u32,
    pub datagen: DatagenConfig,
    pub mcb_workers: usize,
    pub store_dir: Option<PathBuf>,
    /// Deadline for one daily collect cycle.
    pub collect_deadline: Duration,
    /// Force protocol payloads through the wire encoding.
    pub serialize_payloads: bool,
    pub runtime_workers: usize,
}

impl SimulationConfig {
    pub fn new(architecture: Architecture, cn_count: u32, households_per_cn: u32, datagen: DatagenConfig) -> Self {
        SimulationConfig {
            architecture,
            cn_count,
            households_per_cn,
            datagen,
            mcb_workers: 1,
            store_dir: None,
            collect_deadline: Duration::from_secs(60),
            serialize_payloads: false,
            runtime_workers: RuntimeConfig::<Message>::default().workers,
        }
    }

    pub fn households(&self) -> Vec<HouseholdId> {
        (0..self.cn_count)
            .flat_map(|cn| (0..self.households_per_cn).map(move |local| HouseholdId::new(cn, local)))
            .collect()
    }
}

/// A wired deployment: runtime, coordinator, concentrators, storage.
pub struct Simulation {
    runtime: Runtime<Message>,
    cdpn: Address,
    backend: Arc<AnyBackend>,
    month: MonthSpec,
    deadline: Duration,
    days: u32,
}

impl Simulation {
    pub fn build(cfg: &SimulationConfig) -> Result<Self, SimError> {
        let month = cfg.datagen.month;
        let backend_cfg = BackendConfig {
            month,
            cn_count: cfg.cn_count,
            mcb_workers: cfg.mcb_workers,
            store_dir: cfg.store_dir.clone(),
        };
        let backend = Arc::new(
            AnyBackend::open(cfg.architecture, &backend_cfg).map_err(|e| SimError::Storage(e.to_string()))?,
        );
        if let Some(a4) = backend.as_a4() {
            // First day of the month: build the tree before any Collect.
            a4.build_month(&cfg.households()).map_err(|e| SimError::Storage(e.to_string()))?;
        }
        let codec = cfg
            .serialize_payloads
            .then_some(WireCodec { encode: crate::actors::messages::encode, decode: crate::actors::messages::decode });
        let runtime = Runtime::new(RuntimeConfig { workers: cfg.runtime_workers, codec });

        let needs_gateway = matches!(cfg.architecture, Architecture::A1 | Architecture::A3);
        let gateway = if needs_gateway {
            Some(
                runtime
                    .spawn("storage-gateway", StorageGateway::new(backend.clone()))
                    .map_err(|e| SimError::Runtime(e.to_string()))?,
            )
        } else {
            None
        };

        let cdpn_addr = Address::unregistered("cdpn");
        let mut cn_addrs = Vec::new();
        for cn in 0..cfg.cn_count {
            let households: Vec<HouseholdId> =
                (0..cfg.households_per_cn).map(|local| HouseholdId::new(cn, local)).collect();
            let route = match &gateway {
                Some(gw) => IngestRoute::Forward(gw.clone()),
                None => IngestRoute::Direct,
            };
            let service = CnService::new(
                ConcentratorId(cn),
                households,
                cfg.datagen.clone(),
                backend.clone(),
                route,
                cdpn_addr.clone(),
            );
            cn_addrs.push(
                runtime
                    .spawn(&format!("cn-{cn}"), service)
                    .map_err(|e| SimError::Runtime(e.to_string()))?,
            );
        }
        let cdpn = runtime
            .spawn("cdpn", CdpnService::new(cn_addrs, gateway, backend.clone(), month))
            .map_err(|e| SimError::Runtime(e.to_string()))?;
        debug_assert_eq!(cdpn, cdpn_addr);
        Ok(Simulation { runtime, cdpn, backend, month, deadline: cfg.collect_deadline, days: month.days })
    }

    pub fn backend(&self) -> &AnyBackend {
        &self.backend
    }

    pub fn runtime(&self) -> &Runtime<Message> {
        &self.runtime
    }

    pub fn month(&self) -> MonthSpec {
        self.month
    }

    fn pending_cns(&self) -> Vec<u32> {
        let (reply, rx) = Reply::channel();
        if self.runtime.send(&self.cdpn, Message::PendingCns { reply }).is_err() {
            return Vec::new();
        }
        rx.recv_timeout(Duration::from_secs(5)).unwrap_or_default()
    }

    /// One daily collect/insert cycle; returns once every concentrator
    /// reported in, or attributes the stall after the deadline.
    pub fn run_day(&self, day: u32) -> Result<DayOutcome, SimError> {
        let (reply, rx) = Reply::channel();
        self.runtime
            .send(&self.cdpn, Message::RunDay { day, reply })
            .map_err(|e| SimError::Runtime(e.to_string()))?;
        match rx.recv_timeout(self.deadline) {
            Ok(outcome) => outcome,
            Err(_) => Err(SimError::CnTimeout(self.pending_cns())),
        }
    }

    /// Runs the whole month, coordinator-driven day by day.
    pub fn run_month(&self) -> Result<MonthOutcome, SimError> {
        let (reply, rx) = Reply::channel();
        self.runtime
            .send(&self.cdpn, Message::RunMonth { reply })
            .map_err(|e| SimError::Runtime(e.to_string()))?;
        let budget = self.deadline.saturating_mul(self.days.max(1));
        match rx.recv_timeout(budget) {
            Ok(outcome) => outcome,
            Err(_) => Err(SimError::CnTimeout(self.pending_cns())),
        }
    }

    /// Monthly billing for the given bucket set.
    pub fn run_month_billing(&self, set: &BucketSet) -> Result<Vec<BillLine>, SimError> {
        let (reply, rx) = Reply::channel();
        let spec = BucketSetSpec::from_set(set);
        self.runtime
            .send(&self.cdpn, Message::RunBilling { set: spec, reply })
            .map_err(|e| SimError::Runtime(e.to_string()))?;
        rx.recv_timeout(self.deadline).map_err(|_| SimError::Disconnected)?
    }

    /// Propagates `Shutdown`, waits for quiescence, and stops the pool.
    pub fn shutdown(self) -> Result<(), SimError> {
        self.runtime
            .send(&self.cdpn, Message::Shutdown)
            .map_err(|e| SimError::Runtime(e.to_string()))?;
        self.runtime
            .await_quiescence(Duration::from_secs(30))
            .map_err(|e| SimError::Runtime(e.to_string()))?;
        let leftover = self.runtime.queued_messages();
        if leftover != 0 {
            return Err(SimError::Runtime(format!("{leftover} messages queued after shutdown")));
        }
        self.runtime
            .shutdown(Duration::from_secs(5))
            .map_err(|e| SimError::Runtime(e.to_string()))
    }
}
