//! Minimal message-passing runtime. Actors own a FIFO mailbox and
//! declare, per message, whether the handler is exclusive or concurrent:
//! an exclusive handler never overlaps any other handler of the same
//! actor, concurrent handlers may overlap each other. Many actors
//! multiplex over a bounded worker pool; an idle actor costs nothing but
//! its queue, and a handler waits for other messages by returning and
//! picking up the continuation later, never by blocking a worker.

use std::collections::{HashMap, VecDeque};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex, RwLock};
use std::time::{Duration, Instant};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ActorError {
    #[error("no actor registered at {0:?}")]
    UnknownAddress(String),
    #[error("an actor named {0:?} already exists")]
    DuplicateAddress(String),
    #[error("runtime did not quiesce within {0:?}")]
    QuiesceTimeout(Duration),
    #[error("wire codec rejected a message: {0}")]
    Codec(String),
    #[error("runtime is shutting down")]
    ShuttingDown,
}

/// Name-based actor address.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Address(Arc<str>);

impl Address {
    pub fn name(&self) -> &str {
        &self.0
    }

    /// An address value for a name that may not be registered yet; sends
    /// to it fail with `UnknownAddress` until an actor spawns under the
    /// name. Lets mutually-partnered services be wired up in any order.
    pub fn unregistered(name: &str) -> Address {
        Address(Arc::from(name))
    }
}

impl std::fmt::Display for Address {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HandlerMode {
    Exclusive,
    Concurrent,
}

/// A delivered message with its envelope metadata.
#[derive(Debug)]
pub struct Envelope<M> {
    /// Sender address; `None` when sent from outside the actor world.
    pub from: Option<Address>,
    /// Request/response correlation: replies carry the request's id.
    pub correlation: u64,
    pub msg: M,
}

/// Where a response to a request should go; detachable from the envelope
/// so handlers can consume the message first and respond after.
#[derive(Clone, Debug)]
pub struct ReplyHandle {
    from: Option<Address>,
    correlation: u64,
}

impl<M> Envelope<M> {
    pub fn reply_handle(&self) -> ReplyHandle {
        ReplyHandle { from: self.from.clone(), correlation: self.correlation }
    }
}

pub trait Actor<M: Send + 'static>: Send + Sync + 'static {
    /// Scheduling class of the handler for this message.
    fn mode(&self, _msg: &M) -> HandlerMode {
        HandlerMode::Exclusive
    }

    fn handle_exclusive(&mut self, _ctx: &Context<M>, _env: Envelope<M>) {}

    fn handle_concurrent(&self, _ctx: &Context<M>, _env: Envelope<M>) {}
}

/// Optional encode/decode pair applied to every message on send,
/// emulating a remote boundary. `encode` returning `None` marks a
/// message as local-only (delivered without the round-trip).
#[derive(Clone, Copy)]
pub struct WireCodec<M> {
    pub encode: fn(&M) -> Option<Vec<u8>>,
    pub decode: fn(&[u8]) -> Result<M, String>,
}

pub struct RuntimeConfig<M: Send + 'static> {
    pub workers: usize,
    pub codec: Option<WireCodec<M>>,
}

impl<M: Send + 'static> Default for RuntimeConfig<M> {
    fn default() -> Self {
        let workers = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(2).clamp(2, 8);
        RuntimeConfig { workers, codec: None }
    }
}

struct SchedState<M> {
    mailbox: VecDeque<Envelope<M>>,
    running_exclusive: bool,
    running_concurrent: usize,
}

struct ActorCell<M: Send + 'static> {
    address: Address,
    sched: Mutex<SchedState<M>>,
    behavior: RwLock<Box<dyn Actor<M>>>,
}

struct Inner<M: Send + 'static> {
    registry: RwLock<HashMap<String, Arc<ActorCell<M>>>>,
    run_queue: Mutex<VecDeque<Arc<ActorCell<M>>>>,
    queue_cv: Condvar,
    /// Messages enqueued or currently being handled.
    in_flight: Mutex<usize>,
    quiesce_cv: Condvar,
    stopping: AtomicBool,
    codec: Option<WireCodec<M>>,
    next_correlation: AtomicU64,
}

impl<M: Send + 'static> Inner<M> {
    fn push_token(&self, cell: Arc<ActorCell<M>>) {
        self.run_queue.lock().unwrap().push_back(cell);
        self.queue_cv.notify_one();
    }

    fn fresh_correlation(&self) -> u64 {
        self.next_correlation.fetch_add(1, Ordering::Relaxed)
    }

    fn deliver(&self, from: Option<Address>, to: &Address, correlation: u64, msg: M) -> Result<(), ActorError> {
        if self.stopping.load(Ordering::SeqCst) {
            return Err(ActorError::ShuttingDown);
        }
        let msg = match &self.codec {
            Some(codec) => match (codec.encode)(&msg) {
                Some(bytes) => (codec.decode)(&bytes).map_err(ActorError::Codec)?,
                None => msg,
            },
            None => msg,
        };
        let cell = self
            .registry
            .read()
            .unwrap()
            .get(to.name())
            .cloned()
            .ok_or_else(|| ActorError::UnknownAddress(to.name().to_string()))?;
        *self.in_flight.lock().unwrap() += 1;
        cell.sched.lock().unwrap().mailbox.push_back(Envelope { from, correlation, msg });
        self.push_token(cell);
        Ok(())
    }

    fn finish(&self, cell: &Arc<ActorCell<M>>, undo: impl FnOnce(&mut SchedState<M>)) {
        let more = {
            let mut s = cell.sched.lock().unwrap();
            undo(&mut s);
            !s.mailbox.is_empty()
        };
        {
            let mut n = self.in_flight.lock().unwrap();
            *n -= 1;
            if *n == 0 {
                self.quiesce_cv.notify_all();
            }
        }
        if more {
            self.push_token(cell.clone());
        }
    }
}

enum Task<M> {
    Exclusive(Envelope<M>),
    Concurrent(Envelope<M>),
}

fn dispatch<M: Send + 'static>(inner: &Arc<Inner<M>>, cell: Arc<ActorCell<M>>) {
    let task = {
        let mut s = cell.sched.lock().unwrap();
        if s.running_exclusive {
            // The running handler reschedules on completion; this token
            // is stale.
            return;
        }
        let Some(env) = s.mailbox.front() else { return };
        let mode = cell.behavior.read().unwrap().mode(&env.msg);
        match mode {
            HandlerMode::Exclusive => {
                if s.running_concurrent > 0 {
                    return;
                }
                s.running_exclusive = true;
                Task::Exclusive(s.mailbox.pop_front().expect("peeked above"))
            }
            HandlerMode::Concurrent => {
                s.running_concurrent += 1;
                let env = s.mailbox.pop_front().expect("peeked above");
                let more = !s.mailbox.is_empty();
                drop(s);
                if more {
                    // Let another worker overlap on the next message.
                    inner.push_token(cell.clone());
                }
                Task::Concurrent(env)
            }
        }
    };
    let ctx = Context { inner: inner.clone(), self_address: cell.address.clone() };
    match task {
        Task::Exclusive(env) => {
            cell.behavior.write().unwrap().handle_exclusive(&ctx, env);
            inner.finish(&cell, |s| s.running_exclusive = false);
        }
        Task::Concurrent(env) => {
            cell.behavior.read().unwrap().handle_concurrent(&ctx, env);
            inner.finish(&cell, |s| s.running_concurrent -= 1);
        }
    }
}

/// Handler-side view of the runtime.
pub struct Context<M: Send + 'static> {
    inner: Arc<Inner<M>>,
    self_address: Address,
}

impl<M: Send + 'static> Context<M> {
    pub fn self_address(&self) -> &Address {
        &self.self_address
    }

    pub fn send(&self, to: &Address, msg: M) -> Result<(), ActorError> {
        let correlation = self.inner.fresh_correlation();
        self.inner.deliver(Some(self.self_address.clone()), to, correlation, msg)
    }

    /// Responds to a request, preserving its correlation id.
    pub fn reply(&self, request: &Envelope<M>, msg: M) -> Result<(), ActorError> {
        self.respond(&request.reply_handle(), msg)
    }

    /// [`Context::reply`] through a detached [`ReplyHandle`].
    pub fn respond(&self, handle: &ReplyHandle, msg: M) -> Result<(), ActorError> {
        let to = handle
            .from
            .clone()
            .ok_or_else(|| ActorError::UnknownAddress("<no reply address>".into()))?;
        self.inner.deliver(Some(self.self_address.clone()), &to, handle.correlation, msg)
    }

    pub fn send_to_self(&self, msg: M) -> Result<(), ActorError> {
        self.send(&self.self_address.clone(), msg)
    }
}

pub struct Runtime<M: Send + 'static> {
    inner: Arc<Inner<M>>,
    workers: Vec<std::thread::JoinHandle<()>>,
}

impl<M: Send + 'static> Runtime<M> {
    pub fn new(config: RuntimeConfig<M>) -> Self {
        let inner = Arc::new(Inner {
            registry: RwLock::new(HashMap::new()),
            run_queue: Mutex::new(VecDeque::new()),
            queue_cv: Condvar::new(),
            in_flight: Mutex::new(0),
            quiesce_cv: Condvar::new(),
            stopping: AtomicBool::new(false),
            codec: config.codec,
            next_correlation: AtomicU64::new(1),
        });
        let workers = (0..config.workers.max(1))
            .map(|i| {
                let inner = inner.clone();
                std::thread::Builder::new()
                    .name(format!("actor-worker-{i}"))
                    .spawn(move || worker_loop(inner))
                    .expect("spawn worker")
            })
            .collect();
        Runtime { inner, workers }
    }

    pub fn spawn(&self, name: &str, actor: impl Actor<M>) -> Result<Address, ActorError> {
        let address = Address(Arc::from(name));
        let cell = Arc::new(ActorCell {
            address: address.clone(),
            sched: Mutex::new(SchedState { mailbox: VecDeque::new(), running_exclusive: false, running_concurrent: 0 }),
            behavior: RwLock::new(Box::new(actor)),
        });
        let mut reg = self.inner.registry.write().unwrap();
        if reg.contains_key(name) {
            return Err(ActorError::DuplicateAddress(name.to_string()));
        }
        reg.insert(name.to_string(), cell);
        Ok(address)
    }

    pub fn address(&self, name: &str) -> Option<Address> {
        self.inner.registry.read().unwrap().get(name).map(|c| c.address.clone())
    }

    /// Sends from outside the actor world (no reply address).
    pub fn send(&self, to: &Address, msg: M) -> Result<(), ActorError> {
        let correlation = self.inner.fresh_correlation();
        self.inner.deliver(None, to, correlation, msg)
    }

    /// Blocks until no message is queued or being handled.
    pub fn await_quiescence(&self, timeout: Duration) -> Result<(), ActorError> {
        let deadline = Instant::now() + timeout;
        let mut n = self.inner.in_flight.lock().unwrap();
        while *n != 0 {
            let left = deadline.saturating_duration_since(Instant::now());
            if left.is_zero() {
                return Err(ActorError::QuiesceTimeout(timeout));
            }
            let (guard, _) = self.inner.quiesce_cv.wait_timeout(n, left).unwrap();
            n = guard;
        }
        Ok(())
    }

    /// Total queued messages across all mailboxes.
    pub fn queued_messages(&self) -> usize {
        let reg = self.inner.registry.read().unwrap();
        reg.values().map(|c| c.sched.lock().unwrap().mailbox.len()).sum()
    }

    /// Drains in-flight work, then stops and joins the worker pool.
    pub fn shutdown(mut self, timeout: Duration) -> Result<(), ActorError> {
        let result = self.await_quiescence(timeout);
        self.inner.stopping.store(true, Ordering::SeqCst);
        self.inner.queue_cv.notify_all();
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
        result
    }
}

impl<M: Send + 'static> Drop for Runtime<M> {
    fn drop(&mut self) {
        self.inner.stopping.store(true, Ordering::SeqCst);
        self.inner.queue_cv.notify_all();
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }
}

fn worker_loop<M: Send + 'static>(inner: Arc<Inner<M>>) {
    loop {
        let cell = {
            let mut q = inner.run_queue.lock().unwrap();
            loop {
                if let Some(cell) = q.pop_front() {
                    break cell;
                }
                if inner.stopping.load(Ordering::SeqCst) {
                    return;
                }
                q = inner.queue_cv.wait(q).unwrap();
            }
        };
        dispatch(&inner, cell);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::AtomicUsize;

    enum TestMsg {
        Tag(u64, u64),      // (sender, sequence)
        Slow,               // concurrent, sleeps
        Bump,               // exclusive, sleeps briefly
        Ask,                // concurrent, replies Pong
        Pong(u64),
    }

    #[derive(Default)]
    struct Recorder {
        per_sender: Mutex<HashMap<u64, Vec<u64>>>,
        total: AtomicUsize,
    }

    struct RecorderActor(Arc<Recorder>);

    impl Actor<TestMsg> for RecorderActor {
        fn handle_exclusive(&mut self, _ctx: &Context<TestMsg>, env: Envelope<TestMsg>) {
            if let TestMsg::Tag(sender, seq) = env.msg {
                self.0.per_sender.lock().unwrap().entry(sender).or_default().push(seq);
                self.0.total.fetch_add(1, Ordering::SeqCst);
            }
        }
    }

    #[test]
    fn per_pair_fifo_and_exactly_once() {
        let rt = Runtime::new(RuntimeConfig { workers: 4, codec: None });
        let state = Arc::new(Recorder::default());
        let addr = rt.spawn("recorder", RecorderActor(state.clone())).unwrap();
        assert_eq!(rt.address("recorder").unwrap(), addr);
        std::thread::scope(|scope| {
            for sender in 0..4u64 {
                let addr = addr.clone();
                let rt = &rt;
                scope.spawn(move || {
                    for seq in 0..500u64 {
                        rt.send(&addr, TestMsg::Tag(sender, seq)).unwrap();
                    }
                });
            }
        });
        rt.await_quiescence(Duration::from_secs(10)).unwrap();
        assert_eq!(state.total.load(Ordering::SeqCst), 2000);
        let per_sender = state.per_sender.lock().unwrap();
        for sender in 0..4u64 {
            let seqs = &per_sender[&sender];
            assert_eq!(seqs.len(), 500);
            assert!(seqs.windows(2).all(|w| w[0] < w[1]), "sender {sender} reordered");
        }
    }

    #[derive(Default)]
    struct OverlapStats {
        concurrent_now: AtomicUsize,
        concurrent_peak: AtomicUsize,
        exclusive_overlaps: AtomicUsize,
        running_any: AtomicUsize,
    }

    struct OverlapActor(Arc<OverlapStats>);

    impl Actor<TestMsg> for OverlapActor {
        fn mode(&self, msg: &TestMsg) -> HandlerMode {
            match msg {
                TestMsg::Slow => HandlerMode::Concurrent,
                _ => HandlerMode::Exclusive,
            }
        }

        fn handle_exclusive(&mut self, _ctx: &Context<TestMsg>, _env: Envelope<TestMsg>) {
            let peers = self.0.running_any.fetch_add(1, Ordering::SeqCst);
            if peers > 0 {
                self.0.exclusive_overlaps.fetch_add(1, Ordering::SeqCst);
            }
            std::thread::sleep(Duration::from_micros(200));
            self.0.running_any.fetch_sub(1, Ordering::SeqCst);
        }

        fn handle_concurrent(&self, _ctx: &Context<TestMsg>, _env: Envelope<TestMsg>) {
            self.0.running_any.fetch_add(1, Ordering::SeqCst);
            let now = self.0.concurrent_now.fetch_add(1, Ordering::SeqCst) + 1;
            self.0.concurrent_peak.fetch_max(now, Ordering::SeqCst);
            std::thread::sleep(Duration::from_micros(300));
            self.0.concurrent_now.fetch_sub(1, Ordering::SeqCst);
            self.0.running_any.fetch_sub(1, Ordering::SeqCst);
        }
    }

    #[test]
    fn concurrent_handlers_overlap_but_exclusive_never_does() {
        let rt = Runtime::new(RuntimeConfig { workers: 4, codec: None });
        let stats = Arc::new(OverlapStats::default());
        let addr = rt.spawn("overlap", OverlapActor(stats.clone())).unwrap();
        for i in 0..400 {
            if i % 10 == 9 {
                rt.send(&addr, TestMsg::Bump).unwrap();
            } else {
                rt.send(&addr, TestMsg::Slow).unwrap();
            }
        }
        rt.await_quiescence(Duration::from_secs(30)).unwrap();
        assert_eq!(stats.exclusive_overlaps.load(Ordering::SeqCst), 0);
        assert!(
            stats.concurrent_peak.load(Ordering::SeqCst) >= 2,
            "concurrent handlers never overlapped"
        );
        assert_eq!(rt.queued_messages(), 0);
    }

    struct Responder;

    impl Actor<TestMsg> for Responder {
        fn mode(&self, msg: &TestMsg) -> HandlerMode {
            match msg {
                TestMsg::Ask => HandlerMode::Concurrent,
                _ => HandlerMode::Exclusive,
            }
        }

        fn handle_concurrent(&self, ctx: &Context<TestMsg>, env: Envelope<TestMsg>) {
            let correlation = env.correlation;
            let _ = ctx.reply(&env, TestMsg::Pong(correlation));
        }
    }

    struct Chaser {
        responder: Address,
        seen: Arc<Mutex<Vec<(u64, u64)>>>,
    }

    impl Actor<TestMsg> for Chaser {
        fn handle_exclusive(&mut self, ctx: &Context<TestMsg>, env: Envelope<TestMsg>) {
            match env.msg {
                TestMsg::Bump => {
                    ctx.send(&self.responder, TestMsg::Ask).unwrap();
                }
                TestMsg::Pong(original) => {
                    self.seen.lock().unwrap().push((env.correlation, original));
                }
                _ => {}
            }
        }
    }

    #[test]
    fn replies_preserve_correlation_ids() {
        let rt = Runtime::new(RuntimeConfig::default());
        let responder = rt.spawn("responder", Responder).unwrap();
        let seen = Arc::new(Mutex::new(Vec::new()));
        let chaser = rt.spawn("chaser", Chaser { responder, seen: seen.clone() }).unwrap();
        for _ in 0..20 {
            rt.send(&chaser, TestMsg::Bump).unwrap();
        }
        rt.await_quiescence(Duration::from_secs(10)).unwrap();
        let seen = seen.lock().unwrap();
        assert_eq!(seen.len(), 20);
        // The Pong's envelope correlation equals the Ask's correlation it
        // answers, which the responder echoed into the payload.
        assert!(seen.iter().all(|(env_corr, payload_corr)| env_corr == payload_corr));
    }

    #[test]
    fn unknown_address_is_an_error() {
        let rt = Runtime::new(RuntimeConfig::<TestMsg>::default());
        let ghost = Address(Arc::from("ghost"));
        assert!(matches!(rt.send(&ghost, TestMsg::Bump), Err(ActorError::UnknownAddress(_))));
    }

    #[test]
    fn idle_actors_get_no_work_scheduled() {
        let rt = Runtime::new(RuntimeConfig { workers: 2, codec: None });
        let state = Arc::new(Recorder::default());
        let _addr = rt.spawn("idle", RecorderActor(state.clone())).unwrap();
        std::thread::sleep(Duration::from_millis(50));
        assert_eq!(state.total.load(Ordering::SeqCst), 0);
        assert_eq!(rt.queued_messages(), 0);
        rt.await_quiescence(Duration::from_millis(10)).unwrap();
    }

    #[test]
    fn duplicate_names_are_rejected() {
        let rt = Runtime::new(RuntimeConfig::<TestMsg>::default());
        rt.spawn("x", Responder).unwrap();
        assert!(matches!(rt.spawn("x", Responder), Err(ActorError::DuplicateAddress(_))));
    }
}
