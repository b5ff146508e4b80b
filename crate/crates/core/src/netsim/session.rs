//! Alice and Bob as separate state machines exchanging wire messages.
//!
//! Each endpoint only sees its own input, the public parameters and the
//! messages it receives. Alice holds the detectors and the local random
//! stream; both derive the public sample from the shared seed. With the
//! same seeds an endpoint pair reproduces the library run bit for bit.

use std::fmt;
use std::thread;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::transport::{Link, Transport};
use super::wire::{Party, Payload, WireMessage};
use crate::and_protocols::{classify, record_attempt, record_verification, run_and_tilde, AndOutcome, AndParams, AndSchedule, AndValue};
use crate::error::{Error, Result};
use crate::grover::{
    announce_bits, diffuse_in_place, oracle_register, oracle_unregister, run_grover, uniform_state, GroverParams,
};
use crate::optics::{detect, ChannelModel, ModeAmplitudes};
use crate::rng::StreamKey;
use crate::scheduler::{
    date_stream, public_draws, record_sample_phase, reply_bits, run_pi_d, Calendar, ProtocolParams, ScheduleResult,
    SchedulerOutput,
};
use crate::stats::ExecStats;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "protocol", content = "params")]
pub enum SessionProtocol {
    AndTilde(AndParams),
    PiD(ProtocolParams),
    Grover(GroverParams),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionSeeds {
    pub shared: u64,
    /// Alice's detector noise.
    pub local: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub session_id: u64,
    pub protocol: SessionProtocol,
    pub channel: ChannelModel,
    pub seeds: SessionSeeds,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PartyInput {
    Bit(bool),
    Calendar(Calendar),
}

impl PartyInput {
    fn bit(&self) -> Result<bool> {
        match self {
            PartyInput::Bit(b) => Ok(*b),
            PartyInput::Calendar(_) => Err(Error::param("input", "this protocol takes a single bit per party")),
        }
    }

    fn calendar(&self) -> Result<&Calendar> {
        match self {
            PartyInput::Calendar(c) => Ok(c),
            PartyInput::Bit(_) => Err(Error::param("input", "this protocol takes a calendar per party")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionOutcome {
    And(AndOutcome),
    Schedule(SchedulerOutput),
}

/// The part of the outcome both parties learn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    And(AndValue),
    Schedule(ScheduleResult),
}

impl SessionOutcome {
    pub fn verdict(&self) -> Verdict {
        match self {
            SessionOutcome::And(o) => Verdict::And(o.value),
            SessionOutcome::Schedule(o) => Verdict::Schedule(o.result),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EndpointRun<T> {
    pub result: Result<T>,
    /// Messages this endpoint sent, in order.
    pub sent: Vec<WireMessage>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionOutput {
    pub outcome: SessionOutcome,
    pub transcript: Vec<WireMessage>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionFailure {
    pub error: Error,
    pub transcript: Vec<WireMessage>,
}

impl fmt::Display for SessionFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (after {} messages)", self.error, self.transcript.len())
    }
}

impl std::error::Error for SessionFailure {}

struct Endpoint {
    link: Box<dyn Link>,
    me: Party,
    session_id: u64,
    next_index: u64,
    sent: Vec<WireMessage>,
}

impl Endpoint {
    fn new(link: Box<dyn Link>, me: Party, session_id: u64) -> Self {
        Endpoint {
            link,
            me,
            session_id,
            next_index: 0,
            sent: Vec::new(),
        }
    }

    fn send(&mut self, payload: Payload) -> Result<()> {
        let m = WireMessage {
            session_id: self.session_id,
            round_index: self.next_index,
            sender: self.me,
            payload,
        };
        self.link.send(&m)?;
        self.next_index += 1;
        self.sent.push(m);
        Ok(())
    }

    fn send_quantum(&mut self, state: &ModeAmplitudes) -> Result<()> {
        self.send(Payload::Quantum(state.clone()))
    }

    fn send_bits(&mut self, bits: Vec<bool>) -> Result<()> {
        self.send(Payload::Classical(bits))
    }

    fn recv(&mut self) -> Result<Payload> {
        let m = self.link.recv()?;
        if m.session_id != self.session_id {
            return Err(Error::Desync(format!("message for session {} in session {}", m.session_id, self.session_id)));
        }
        if m.sender != self.me.peer() {
            return Err(Error::Desync(format!("{} received its own message", self.me.name())));
        }
        if m.round_index != self.next_index {
            return Err(Error::Desync(format!("expected round index {}, got {}", self.next_index, m.round_index)));
        }
        self.next_index += 1;
        Ok(m.payload)
    }

    fn recv_quantum(&mut self, modes: usize) -> Result<ModeAmplitudes> {
        match self.recv()? {
            Payload::Quantum(s) if s.len() == modes => Ok(s),
            Payload::Quantum(s) => Err(Error::Desync(format!("expected {modes} modes, got {}", s.len()))),
            Payload::Classical(_) => Err(Error::Desync("expected a quantum message".into())),
        }
    }

    fn recv_bits(&mut self) -> Result<Vec<bool>> {
        match self.recv()? {
            Payload::Classical(b) => Ok(b),
            Payload::Quantum(_) => Err(Error::Desync("expected a classical message".into())),
        }
    }

    fn recv_exact_bits(&mut self, len: usize) -> Result<Vec<bool>> {
        let b = self.recv_bits()?;
        if b.len() != len {
            return Err(Error::Desync(format!("expected {len} bits, got {}", b.len())));
        }
        Ok(b)
    }

    fn finish<T>(self, result: Result<T>) -> EndpointRun<T> {
        // dropping the link here unblocks a peer still waiting on us
        EndpointRun { result, sent: self.sent }
    }
}

fn to_bits(value: u64, width: u32) -> Vec<bool> {
    (0..width).rev().map(|i| (value >> i) & 1 == 1).collect()
}

fn from_bits(bits: &[bool]) -> u64 {
    bits.iter().fold(0, |acc, &b| (acc << 1) | b as u64)
}

fn index_width(n: usize) -> u32 {
    announce_bits(n) as u32 - 1
}

fn result_bits(v: AndValue) -> Vec<bool> {
    match v {
        AndValue::Zero => vec![false, false],
        AndValue::One => vec![false, true],
        AndValue::Inconclusive => vec![true, false],
    }
}

fn parse_result(bits: &[bool]) -> Result<AndValue> {
    match bits {
        [false, false] => Ok(AndValue::Zero),
        [false, true] => Ok(AndValue::One),
        [true, false] => Ok(AndValue::Inconclusive),
        _ => Err(Error::Desync(format!("invalid result announcement {bits:?}"))),
    }
}

fn alice_attempt<R: Rng + ?Sized>(
    ep: &mut Endpoint,
    sched: &AndSchedule,
    a: bool,
    ch: &ChannelModel,
    rng: &mut R,
) -> Result<AndOutcome> {
    let mut state = sched.initial_state();
    for _ in 0..sched.rounds() {
        sched.alice_round(a, &mut state);
        ep.send_quantum(&state)?;
        state = ep.recv_quantum(2)?;
    }
    let clicks = detect(&state, ch, rng);
    let value = classify(&clicks);
    ep.send_bits(result_bits(value))?;
    Ok(AndOutcome {
        value,
        click_pattern: clicks,
        transcript_len: 2 * sched.rounds() as u64 + 1,
    })
}

fn bob_attempt(ep: &mut Endpoint, sched: &AndSchedule, b: bool) -> Result<AndValue> {
    for round in 1..=sched.rounds() {
        let mut state = ep.recv_quantum(2)?;
        sched.bob_round(b, round, &mut state);
        ep.send_quantum(&state)?;
    }
    parse_result(&ep.recv_exact_bits(2)?)
}

/// Conclusive AND on Alice's side, with the library's accounting.
fn alice_and<R: Rng + ?Sized>(
    ep: &mut Endpoint,
    sched: &AndSchedule,
    p: &AndParams,
    a: bool,
    ch: &ChannelModel,
    rng: &mut R,
    stats: &mut ExecStats,
) -> Result<bool> {
    for attempt in 0..p.max_reruns {
        let out = alice_attempt(ep, sched, a, ch, rng)?;
        record_attempt(stats, p, &out);
        if attempt > 0 {
            stats.reruns += 1;
        }
        match out.value {
            AndValue::Zero => return Ok(false),
            AndValue::One => {
                record_verification(stats);
                ep.send_bits(vec![a])?;
                let b = ep.recv_exact_bits(1)?[0];
                return Ok(a && b);
            }
            AndValue::Inconclusive => {}
        }
    }
    Err(Error::BudgetExhausted { budget: p.max_reruns })
}

fn bob_and(ep: &mut Endpoint, sched: &AndSchedule, p: &AndParams, b: bool) -> Result<bool> {
    for _ in 0..p.max_reruns {
        match bob_attempt(ep, sched, b)? {
            AndValue::Zero => return Ok(false),
            AndValue::One => {
                let a = ep.recv_exact_bits(1)?[0];
                ep.send_bits(vec![b])?;
                return Ok(a && b);
            }
            AndValue::Inconclusive => {}
        }
    }
    Err(Error::BudgetExhausted { budget: p.max_reruns })
}

fn check_grover_size(gp: &GroverParams, cal: &Calendar) -> Result<()> {
    gp.validate()?;
    if cal.len() != gp.n {
        return Err(Error::Dimension {
            expected: gp.n,
            got: cal.len(),
        });
    }
    // with one date the index field is empty and a one-bit announcement
    // would be indistinguishable from the no-click message
    if gp.n < 2 {
        return Err(Error::param("n", "networked search needs at least 2 dates"));
    }
    Ok(())
}

fn alice_body(ep: &mut Endpoint, cfg: &SessionConfig, input: &PartyInput) -> Result<SessionOutcome> {
    let ch = &cfg.channel;
    ch.validate()?;
    let shared = StreamKey::new(cfg.seeds.shared);
    let local = StreamKey::new(cfg.seeds.local);
    match &cfg.protocol {
        SessionProtocol::AndTilde(p) => {
            let sched = AndSchedule::new(p, ch.eta)?;
            let out = alice_attempt(ep, &sched, input.bit()?, ch, &mut local.rng())?;
            Ok(SessionOutcome::And(out))
        }
        SessionProtocol::PiD(p) => {
            p.validate()?;
            let x = input.calendar()?;
            let sched = AndSchedule::new(&p.and, ch.eta)?;
            let mut stats = ExecStats::default();
            let draws = public_draws(x.len(), p.s, shared)?;
            if p.s > 0 {
                record_sample_phase(&mut stats, p.s);
                ep.send_bits(draws.iter().map(|&d| x.get(d)).collect())?;
                let reply = ep.recv_exact_bits(reply_bits(p.s) as usize)?;
                if reply[0] {
                    let pos = from_bits(&reply[1..]) as usize;
                    let date = *draws
                        .get(pos)
                        .ok_or_else(|| Error::Desync(format!("sample position {pos} out of range")))?;
                    return Ok(SessionOutcome::Schedule(SchedulerOutput {
                        result: ScheduleResult::Date(date),
                        stats,
                    }));
                }
            }
            let mut first = None;
            for date in (0..x.len()).filter(|d| !draws.contains(d)) {
                let mut rng = date_stream(local, date).rng();
                if alice_and(ep, &sched, &p.and, x.get(date), ch, &mut rng, &mut stats)? && first.is_none() {
                    first = Some(date);
                    if p.early_stop {
                        break;
                    }
                }
            }
            Ok(SessionOutcome::Schedule(SchedulerOutput {
                result: first.map_or(ScheduleResult::Empty, ScheduleResult::Date),
                stats,
            }))
        }
        SessionProtocol::Grover(gp) => {
            let x = input.calendar()?;
            check_grover_size(gp, x)?;
            let mut rng = local.rng();
            let iters = gp.iterations();
            let mut stats = ExecStats::default();
            for rep in 0..gp.repetitions()? {
                stats.attempts += 1;
                if rep > 0 {
                    stats.reruns += 1;
                }
                let mut state = uniform_state(gp.n, gp.alpha)?;
                for _ in 0..iters {
                    ep.send_quantum(&ModeAmplitudes::new(oracle_register(state.as_slice(), x))?)?;
                    let back = ep.recv_quantum(2 * gp.n)?;
                    let mut main = oracle_unregister(back.into_vec(), x);
                    diffuse_in_place(&mut main);
                    state = ModeAmplitudes::new(main)?;
                }
                stats.quantum_messages += 2 * iters as u64;
                let clicks = detect(&state, ch, &mut rng);
                let clicked: Vec<usize> = clicks.clicked_indices().collect();
                stats.detector_clicks += clicked.len() as u64;
                if clicked.is_empty() {
                    stats.classical_messages += 1;
                    stats.classical_bits += 1;
                    ep.send_bits(vec![false])?;
                    continue;
                }
                let i = clicked[rng.random_range(0..clicked.len())];
                stats.classical_messages += 2;
                stats.classical_bits += announce_bits(gp.n) + 1;
                let mut msg = to_bits(i as u64, index_width(gp.n));
                msg.push(x.get(i));
                ep.send_bits(msg)?;
                let y_i = ep.recv_exact_bits(1)?[0];
                if x.get(i) && y_i {
                    return Ok(SessionOutcome::Schedule(SchedulerOutput {
                        result: ScheduleResult::Date(i),
                        stats,
                    }));
                }
            }
            Ok(SessionOutcome::Schedule(SchedulerOutput {
                result: ScheduleResult::Empty,
                stats,
            }))
        }
    }
}

fn bob_body(ep: &mut Endpoint, cfg: &SessionConfig, input: &PartyInput) -> Result<Verdict> {
    let ch = &cfg.channel;
    ch.validate()?;
    let shared = StreamKey::new(cfg.seeds.shared);
    match &cfg.protocol {
        SessionProtocol::AndTilde(p) => {
            let sched = AndSchedule::new(p, ch.eta)?;
            Ok(Verdict::And(bob_attempt(ep, &sched, input.bit()?)?))
        }
        SessionProtocol::PiD(p) => {
            p.validate()?;
            let y = input.calendar()?;
            let sched = AndSchedule::new(&p.and, ch.eta)?;
            let draws = public_draws(y.len(), p.s, shared)?;
            if p.s > 0 {
                let disclosed = ep.recv_exact_bits(p.s)?;
                let hit = draws
                    .iter()
                    .zip(&disclosed)
                    .enumerate()
                    .filter(|&(_, (&d, &xd))| xd && y.get(d))
                    .min_by_key(|&(_, (&d, _))| d)
                    .map(|(pos, (&d, _))| (draws.iter().position(|&e| e == d).unwrap_or(pos), d));
                let width = reply_bits(p.s) as u32 - 1;
                let mut reply = vec![hit.is_some()];
                reply.extend(to_bits(hit.map_or(0, |(pos, _)| pos as u64), width));
                ep.send_bits(reply)?;
                if let Some((_, d)) = hit {
                    return Ok(Verdict::Schedule(ScheduleResult::Date(d)));
                }
            }
            let mut first = None;
            for date in (0..y.len()).filter(|d| !draws.contains(d)) {
                if bob_and(ep, &sched, &p.and, y.get(date))? && first.is_none() {
                    first = Some(date);
                    if p.early_stop {
                        break;
                    }
                }
            }
            Ok(Verdict::Schedule(first.map_or(ScheduleResult::Empty, ScheduleResult::Date)))
        }
        SessionProtocol::Grover(gp) => {
            let y = input.calendar()?;
            check_grover_size(gp, y)?;
            let width = index_width(gp.n) as usize;
            for _ in 0..gp.repetitions()? {
                for _ in 0..gp.iterations() {
                    let mut reg = ep.recv_quantum(2 * gp.n)?;
                    crate::grover::oracle_mark(reg.as_mut_slice(), y);
                    ep.send_quantum(&reg)?;
                }
                let msg = ep.recv_bits()?;
                if msg == [false] {
                    continue;
                }
                if msg.len() != width + 1 {
                    return Err(Error::Desync(format!("announcement of {} bits", msg.len())));
                }
                let i = from_bits(&msg[..width]) as usize;
                if i >= gp.n {
                    return Err(Error::Desync(format!("announced date {i} out of range")));
                }
                ep.send_bits(vec![y.get(i)])?;
                if msg[width] && y.get(i) {
                    return Ok(Verdict::Schedule(ScheduleResult::Date(i)));
                }
            }
            Ok(Verdict::Schedule(ScheduleResult::Empty))
        }
    }
}

pub fn run_alice(cfg: &SessionConfig, input: &PartyInput, link: Box<dyn Link>) -> EndpointRun<SessionOutcome> {
    let mut ep = Endpoint::new(link, Party::Alice, cfg.session_id);
    let result = alice_body(&mut ep, cfg, input);
    ep.finish(result)
}

pub fn run_bob(cfg: &SessionConfig, input: &PartyInput, link: Box<dyn Link>) -> EndpointRun<Verdict> {
    let mut ep = Endpoint::new(link, Party::Bob, cfg.session_id);
    let result = bob_body(&mut ep, cfg, input);
    ep.finish(result)
}

/// The same run without the message layer.
pub fn run_in_library(cfg: &SessionConfig, alice: &PartyInput, bob: &PartyInput) -> Result<SessionOutcome> {
    let ch = &cfg.channel;
    let shared = StreamKey::new(cfg.seeds.shared);
    let local = StreamKey::new(cfg.seeds.local);
    match &cfg.protocol {
        SessionProtocol::AndTilde(p) => Ok(SessionOutcome::And(run_and_tilde(
            alice.bit()?,
            bob.bit()?,
            p,
            ch,
            &mut local.rng(),
        )?)),
        SessionProtocol::PiD(p) => Ok(SessionOutcome::Schedule(run_pi_d(
            alice.calendar()?,
            bob.calendar()?,
            p,
            ch,
            shared,
            local,
        )?)),
        SessionProtocol::Grover(gp) => Ok(SessionOutcome::Schedule(run_grover(
            alice.calendar()?,
            bob.calendar()?,
            gp,
            ch,
            &mut local.rng(),
        )?)),
    }
}

fn merge_transcripts(mut a: Vec<WireMessage>, b: Vec<WireMessage>) -> Vec<WireMessage> {
    a.extend(b);
    a.sort_by_key(|m| m.round_index);
    a
}

fn validate_inputs(cfg: &SessionConfig, alice: &PartyInput, bob: &PartyInput) -> Result<()> {
    cfg.channel.validate()?;
    match &cfg.protocol {
        SessionProtocol::AndTilde(p) => {
            p.validate()?;
            alice.bit()?;
            bob.bit()?;
        }
        SessionProtocol::PiD(p) => {
            p.validate()?;
            alice.calendar()?.expect_same_len(bob.calendar()?)?;
        }
        SessionProtocol::Grover(gp) => {
            let (x, y) = (alice.calendar()?, bob.calendar()?);
            x.expect_same_len(y)?;
            check_grover_size(gp, x)?;
            if gp.verify_promise {
                let actual = x.intersections(y).count();
                if actual != 0 && actual != gp.k {
                    return Err(Error::PromiseViolation {
                        promised: gp.k,
                        actual,
                    });
                }
            }
        }
    }
    Ok(())
}

/// Runs both endpoints, Bob on a separate thread, over a fresh link pair.
pub fn run_session(
    transport: &Transport,
    cfg: &SessionConfig,
    alice: &PartyInput,
    bob: &PartyInput,
) -> std::result::Result<SessionOutput, SessionFailure> {
    let fail = |error| SessionFailure {
        error,
        transcript: Vec::new(),
    };
    validate_inputs(cfg, alice, bob).map_err(fail)?;
    let (alice_link, bob_link) = transport.pair(cfg.channel.eta).map_err(fail)?;
    let (a, b) = thread::scope(|scope| {
        let bob_thread = scope.spawn(|| run_bob(cfg, bob, bob_link));
        let a = run_alice(cfg, alice, alice_link);
        let b = bob_thread.join().unwrap_or_else(|_| EndpointRun {
            result: Err(Error::Transport("bob's endpoint panicked".into())),
            sent: Vec::new(),
        });
        (a, b)
    });
    let transcript = merge_transcripts(a.sent, b.sent);
    let error = match (a.result, b.result) {
        (Ok(outcome), Ok(verdict)) => {
            if outcome.verdict() == verdict {
                return Ok(SessionOutput { outcome, transcript });
            }
            Error::Desync(format!("alice concluded {:?}, bob concluded {verdict:?}", outcome.verdict()))
        }
        (Err(e), Ok(_)) | (Ok(_), Err(e)) => e,
        // a failing endpoint closes its link, so the root cause is the
        // error that is not a transport failure
        (Err(ea), Err(eb)) => match (&ea, &eb) {
            (Error::Transport(_), e) if !matches!(e, Error::Transport(_)) => eb,
            _ => ea,
        },
    };
    Err(SessionFailure { error, transcript })
}
