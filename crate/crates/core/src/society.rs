//! Seeded discrete-time simulation of entities exchanging data.
//!
//! Each tick, every candidate `(sender, receiver, datum)` triple draws a
//! Bernoulli decision whose probability depends on the sender's factors
//! (trust and incentives). Those are explicit flows. Environment channels such
//! as cameras fire with a fixed probability that ignores the subject's factors;
//! those are implicit flows. Both draw from separate ChaCha streams so that the
//! implicit-event set is a function of the seed alone.
//!
//! Every release is charged to a ledger at its worst-case information content.
//! Explicit releases stop once a per-datum budget would be exceeded.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::causalnet::{self, BayesNet, InducedContext, DEFAULT_FLOW_THRESHOLD};
use crate::error::{Error, Result};
use crate::infocore::InfoMeasure;
use crate::mechanisms::dp_to_mi_bound;
use crate::TOLERANCE;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Governance {
    Conjunct,
    Delegated,
    DistributedShard,
    DistributedShare,
    DistributedCopy,
}

/// Optional privatizing mechanism applied before every explicit release.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Mechanism {
    /// k-ary randomized response over the datum's states at the given ε.
    RandomizedResponse { eps: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Datum {
    pub id: String,
    pub value: String,
    /// Possible values; a verbatim release carries at most `log₂ |states|` Sh.
    pub states: Vec<String>,
    pub owner: String,
    pub governance: Governance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mechanism: Option<Mechanism>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Entity {
    pub id: String,
    #[serde(default)]
    pub data: Vec<Datum>,
}

impl Entity {
    pub fn datum(&self, id: &str) -> Option<&Datum> {
        self.data.iter().find(|d| d.id == id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogisticParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Default for LogisticParams {
    fn default() -> Self {
        LogisticParams {
            alpha: 4.0,
            beta: 1.0,
            gamma: 3.0,
        }
    }
}

/// Circumstances that shape an entity's decisions.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FactorState {
    pub trust: BTreeMap<(String, String), f64>,
    pub incentives: BTreeMap<(String, String), f64>,
    pub extra: BTreeMap<String, f64>,
}

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl FactorState {
    pub fn validate(&self) -> Result<()> {
        for ((s, r), t) in &self.trust {
            if !(0.0..=1.0).contains(t) {
                return Err(Error::domain(format!(
                    "trust {s}->{r} = {t} outside [0, 1]"
                )));
            }
        }
        for ((e, d), v) in &self.incentives {
            if !v.is_finite() || *v < 0.0 {
                return Err(Error::domain(format!(
                    "incentive of {e} for {d} must be finite and >= 0"
                )));
            }
        }
        if let Some((k, v)) = self.extra.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::domain(format!("factor {k} = {v} is not finite")));
        }
        Ok(())
    }

    pub fn trust(&self, s: &str, r: &str) -> f64 {
        self.trust
            .get(&(s.to_string(), r.to_string()))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn incentive(&self, s: &str, datum: &str) -> f64 {
        self.incentives
            .get(&(s.to_string(), datum.to_string()))
            .copied()
            .unwrap_or(0.0)
    }

    /// `logistic(α·trust(s,r) + β·incentive(s,datum) − γ)`; missing entries are 0.
    pub fn decision_prob(&self, params: &LogisticParams, s: &str, r: &str, datum: &str) -> f64 {
        let z =
            params.alpha * self.trust(s, r) + params.beta * self.incentive(s, datum) - params.gamma;
        if z.is_nan() {
            return 0.0;
        }
        logistic(z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlowKind {
    Explicit,
    Implicit,
}

impl FlowKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FlowKind::Explicit => "explicit",
            FlowKind::Implicit => "implicit",
        }
    }
}

/// One atomic, pairwise transit of a single datum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowEvent {
    pub id: u64,
    pub t: u64,
    pub sender: String,
    pub receiver: String,
    pub datum: String,
    pub measure: InfoMeasure,
    pub kind: FlowKind,
    pub context_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Context {
    pub id: String,
    pub t: u64,
    pub sender: String,
    pub receiver: String,
    pub flow_ids: Vec<u64>,
}

/// An explicit release suppressed because it would exceed the datum's budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetStop {
    pub t: u64,
    pub sender: String,
    pub receiver: String,
    pub datum: String,
    pub attempted_sh: f64,
    pub cumulative_sh: f64,
    pub budget_sh: f64,
}

type FlowKey = (String, String, String);

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Ledger {
    explicit: BTreeMap<FlowKey, f64>,
    implicit: BTreeMap<FlowKey, f64>,
    budgets: BTreeMap<String, f64>,
    stopped: BTreeSet<FlowKey>,
}

impl Ledger {
    pub fn new(budgets: BTreeMap<String, f64>) -> Result<Self> {
        if let Some((d, b)) = budgets.iter().find(|(_, b)| !b.is_finite() || **b < 0.0) {
            return Err(Error::domain(format!(
                "budget for {d} must be finite and >= 0, got {b}"
            )));
        }
        Ok(Ledger {
            budgets,
            ..Ledger::default()
        })
    }

    pub fn budget(&self, datum: &str) -> Option<f64> {
        self.budgets.get(datum).copied()
    }

    /// Cumulative explicit information released along `(sender, receiver, datum)`.
    pub fn cumulative(&self, sender: &str, receiver: &str, datum: &str) -> f64 {
        self.explicit
            .get(&key(sender, receiver, datum))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn implicit(&self, sender: &str, receiver: &str, datum: &str) -> f64 {
        self.implicit
            .get(&key(sender, receiver, datum))
            .copied()
            .unwrap_or(0.0)
    }

    /// Charges an explicit release, or returns the stop record if the budget
    /// for the datum would be exceeded.
    pub fn charge_explicit(
        &mut self,
        t: u64,
        sender: &str,
        receiver: &str,
        datum: &str,
        sh: f64,
    ) -> std::result::Result<(), BudgetStop> {
        let k = key(sender, receiver, datum);
        let current = self.explicit.get(&k).copied().unwrap_or(0.0);
        if let Some(budget) = self.budget(datum) {
            if self.stopped.contains(&k) || current + sh > budget + TOLERANCE {
                self.stopped.insert(k);
                return Err(BudgetStop {
                    t,
                    sender: sender.to_string(),
                    receiver: receiver.to_string(),
                    datum: datum.to_string(),
                    attempted_sh: sh,
                    cumulative_sh: current,
                    budget_sh: budget,
                });
            }
        }
        self.explicit.insert(k, current + sh);
        Ok(())
    }

    /// Implicit flows bypass the sender's decision, so budgets do not gate them.
    pub fn charge_implicit(&mut self, sender: &str, receiver: &str, datum: &str, sh: f64) {
        *self
            .implicit
            .entry(key(sender, receiver, datum))
            .or_insert(0.0) += sh;
    }
}

fn key(s: &str, r: &str, d: &str) -> FlowKey {
    (s.to_string(), r.to_string(), d.to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerRow {
    pub sender: String,
    pub receiver: String,
    pub datum: String,
    pub kind: FlowKind,
    pub cumulative_sh: f64,
    pub budget_sh: Option<f64>,
    pub headroom_sh: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LedgerReport {
    pub rows: Vec<LedgerRow>,
    /// Total Sh charged per receiver, explicit and implicit combined.
    pub receiver_totals: BTreeMap<String, f64>,
}

/// Tabulates cumulative information per flow key. Amounts are channel upper
/// bounds, so they do not depend on what any receiver already knows.
pub fn ledger_report(ledger: &Ledger) -> LedgerReport {
    let mut rows = Vec::new();
    let mut receiver_totals: BTreeMap<String, f64> = BTreeMap::new();
    for (kind, map) in [
        (FlowKind::Explicit, &ledger.explicit),
        (FlowKind::Implicit, &ledger.implicit),
    ] {
        for ((s, r, d), &sh) in map {
            let budget_sh = match kind {
                FlowKind::Explicit => ledger.budget(d),
                FlowKind::Implicit => None,
            };
            let headroom_sh = budget_sh.map(|b| {
                let left = b - sh;
                if ledger.stopped.contains(&key(s, r, d)) || left <= TOLERANCE {
                    0.0
                } else {
                    left
                }
            });
            *receiver_totals.entry(r.clone()).or_insert(0.0) += sh;
            rows.push(LedgerRow {
                sender: s.clone(),
                receiver: r.clone(),
                datum: d.clone(),
                kind,
                cumulative_sh: sh,
                budget_sh,
                headroom_sh,
            });
        }
    }
    LedgerReport {
        rows,
        receiver_totals,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Candidate {
    pub sender: String,
    pub receiver: String,
    pub datum: String,
}

/// An environmental channel observing `subject`'s datum with fixed probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImplicitChannel {
    pub id: String,
    pub subject: String,
    pub observer: String,
    pub datum: String,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrustEntry {
    pub from: String,
    pub to: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IncentiveEntry {
    pub entity: String,
    pub datum: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CausalConfig {
    pub net: BayesNet,
    /// Node name → owning entity.
    pub ownership: BTreeMap<String, String>,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

fn default_threshold() -> f64 {
    DEFAULT_FLOW_THRESHOLD
}

fn default_window() -> u64 {
    1
}

/// JSON scenario consumed by [`run`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub seed: u64,
    pub ticks: u64,
    #[serde(default = "default_window")]
    pub window: u64,
    #[serde(default)]
    pub logistic: LogisticParams,
    pub entities: Vec<Entity>,
    #[serde(default)]
    pub trust: Vec<TrustEntry>,
    #[serde(default)]
    pub incentives: Vec<IncentiveEntry>,
    #[serde(default)]
    pub factors: BTreeMap<String, f64>,
    /// Explicit candidates; defaults to every trust edge times the sender's data.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidates: Option<Vec<Candidate>>,
    #[serde(default)]
    pub implicit_channels: Vec<ImplicitChannel>,
    #[serde(default)]
    pub budgets: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub causal: Option<CausalConfig>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Society {
    t: u64,
    entities: Vec<Entity>,
    factors: FactorState,
    params: LogisticParams,
    candidates: Vec<Candidate>,
    implicit: Vec<ImplicitChannel>,
    ledger: Ledger,
    next_id: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepOutcome {
    pub events: Vec<FlowEvent>,
    pub stops: Vec<BudgetStop>,
}

const EXPLICIT_STREAM: u64 = 0;
const ENVIRONMENT_STREAM: u64 = 1;

/// Seed for tick `t` of a run seeded with `seed`.
pub fn tick_seed(seed: u64, t: u64) -> u64 {
    seed ^ t.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

impl Society {
    pub fn from_config(cfg: &ScenarioConfig) -> Result<Self> {
        let mut ids = HashSet::new();
        for e in &cfg.entities {
            if !ids.insert(e.id.as_str()) {
                return Err(Error::domain(format!("duplicate entity {:?}", e.id)));
            }
        }
        for e in &cfg.entities {
            let mut seen = HashSet::new();
            for d in &e.data {
                if !seen.insert(d.id.as_str()) {
                    return Err(Error::domain(format!(
                        "{} holds datum {:?} twice",
                        e.id, d.id
                    )));
                }
                if !ids.contains(d.owner.as_str()) {
                    return Err(Error::domain(format!(
                        "datum {:?} has unknown owner {:?}",
                        d.id, d.owner
                    )));
                }
                let conjunct = d.governance == Governance::Conjunct;
                if conjunct != (d.owner == e.id) {
                    return Err(Error::domain(format!(
                        "datum {:?} held by {}: conjunct governance iff the holder owns it",
                        d.id, e.id
                    )));
                }
                if d.states.is_empty() || !d.states.contains(&d.value) {
                    return Err(Error::domain(format!(
                        "datum {:?} value is not among its states",
                        d.id
                    )));
                }
                if let Some(Mechanism::RandomizedResponse { eps }) = d.mechanism {
                    if !(eps.is_finite() && eps > 0.0) || d.states.len() < 2 {
                        return Err(Error::domain(format!(
                            "datum {:?} has an invalid mechanism",
                            d.id
                        )));
                    }
                }
            }
        }
        let entity = |id: &str| -> Result<&Entity> {
            cfg.entities
                .iter()
                .find(|e| e.id == id)
                .ok_or_else(|| Error::domain(format!("unknown entity {id:?}")))
        };

        let mut factors = FactorState {
            extra: cfg.factors.clone(),
            ..FactorState::default()
        };
        for t in &cfg.trust {
            entity(&t.from)?;
            entity(&t.to)?;
            factors
                .trust
                .insert((t.from.clone(), t.to.clone()), t.value);
        }
        for i in &cfg.incentives {
            if entity(&i.entity)?.datum(&i.datum).is_none() {
                return Err(Error::domain(format!(
                    "{} does not hold {:?}",
                    i.entity, i.datum
                )));
            }
            factors
                .incentives
                .insert((i.entity.clone(), i.datum.clone()), i.value);
        }
        factors.validate()?;

        let candidates = match &cfg.candidates {
            Some(list) => list.clone(),
            None => cfg
                .trust
                .iter()
                .flat_map(|t| {
                    let holder = cfg.entities.iter().find(|e| e.id == t.from);
                    holder.into_iter().flat_map(move |e| {
                        e.data.iter().map(move |d| Candidate {
                            sender: t.from.clone(),
                            receiver: t.to.clone(),
                            datum: d.id.clone(),
                        })
                    })
                })
                .collect(),
        };
        for c in &candidates {
            if c.sender == c.receiver {
                return Err(Error::domain(format!("{} cannot send to itself", c.sender)));
            }
            entity(&c.receiver)?;
            if entity(&c.sender)?.datum(&c.datum).is_none() {
                return Err(Error::domain(format!(
                    "{} does not hold {:?}",
                    c.sender, c.datum
                )));
            }
        }
        for ch in &cfg.implicit_channels {
            if !(0.0..=1.0).contains(&ch.p) {
                return Err(Error::domain(format!(
                    "channel {:?} has p outside [0, 1]",
                    ch.id
                )));
            }
            if ch.subject == ch.observer {
                return Err(Error::domain(format!(
                    "channel {:?} observes its own subject",
                    ch.id
                )));
            }
            entity(&ch.observer)?;
            if entity(&ch.subject)?.datum(&ch.datum).is_none() {
                return Err(Error::domain(format!(
                    "{} does not hold {:?}",
                    ch.subject, ch.datum
                )));
            }
        }
        for p in [cfg.logistic.alpha, cfg.logistic.beta, cfg.logistic.gamma] {
            if p.is_nan() {
                return Err(Error::domain("logistic parameters must not be NaN"));
            }
        }
        Ok(Society {
            t: 0,
            entities: cfg.entities.clone(),
            factors,
            params: cfg.logistic,
            candidates,
            implicit: cfg.implicit_channels.clone(),
            ledger: Ledger::new(cfg.budgets.clone())?,
            next_id: 0,
        })
    }

    pub fn tick(&self) -> u64 {
        self.t
    }

    pub fn ledger(&self) -> &Ledger {
        &self.ledger
    }

    pub fn factors(&self) -> &FactorState {
        &self.factors
    }

    pub fn factors_mut(&mut self) -> &mut FactorState {
        &mut self.factors
    }

    pub fn params(&self) -> &LogisticParams {
        &self.params
    }

    pub fn entities(&self) -> &[Entity] {
        &self.entities
    }

    fn datum(&self, holder: &str, datum: &str) -> Result<&Datum> {
        self.entities
            .iter()
            .find(|e| e.id == holder)
            .ok_or_else(|| Error::domain(format!("unknown entity {holder:?}")))?
            .datum(datum)
            .ok_or_else(|| Error::domain(format!("{holder} does not hold {datum:?}")))
    }

    /// Probability that `s` decides to send `datum` to `r` this tick.
    pub fn decision_prob(&self, s: &str, r: &str, datum: &str) -> Result<f64> {
        self.datum(s, datum)?;
        if !self.entities.iter().any(|e| e.id == r) {
            return Err(Error::domain(format!("unknown entity {r:?}")));
        }
        Ok(self.factors.decision_prob(&self.params, s, r, datum))
    }

    /// Worst-case information of one release of `datum` held by `holder`.
    fn release_measure(&self, holder: &str, datum: &str, kind: FlowKind) -> Result<InfoMeasure> {
        let d = self.datum(holder, datum)?;
        let k = d.states.len() as u64;
        let verbatim = InfoMeasure {
            selective_sh: (k as f64).log2(),
            logons: k,
            metrons: 1,
            unbounded: false,
        };
        Ok(match (kind, d.mechanism) {
            (FlowKind::Explicit, Some(Mechanism::RandomizedResponse { eps })) => InfoMeasure {
                selective_sh: dp_to_mi_bound(eps, 1)?,
                ..verbatim
            },
            _ => verbatim,
        })
    }

    /// Advances one tick, returning the next state and the tick's events.
    pub fn step(&self, seed: u64) -> Result<(Society, StepOutcome)> {
        let mut next = self.clone();
        let mut out = StepOutcome::default();
        let t = self.t;

        let mut decide = ChaCha8Rng::seed_from_u64(seed);
        decide.set_stream(EXPLICIT_STREAM);
        for c in &self.candidates {
            // one draw per candidate regardless of outcome keeps the stream aligned
            let u: f64 = decide.random();
            let p = self.decision_prob(&c.sender, &c.receiver, &c.datum)?;
            if u >= p {
                continue;
            }
            let measure = self.release_measure(&c.sender, &c.datum, FlowKind::Explicit)?;
            match next.ledger.charge_explicit(
                t,
                &c.sender,
                &c.receiver,
                &c.datum,
                measure.selective_sh,
            ) {
                Ok(()) => out.events.push(next.event(
                    t,
                    &c.sender,
                    &c.receiver,
                    &c.datum,
                    measure,
                    FlowKind::Explicit,
                )),
                Err(stop) => out.stops.push(stop),
            }
        }

        let mut env = ChaCha8Rng::seed_from_u64(seed);
        env.set_stream(ENVIRONMENT_STREAM);
        for ch in &self.implicit {
            let u: f64 = env.random();
            if u >= ch.p {
                continue;
            }
            let measure = self.release_measure(&ch.subject, &ch.datum, FlowKind::Implicit)?;
            next.ledger
                .charge_implicit(&ch.subject, &ch.observer, &ch.datum, measure.selective_sh);
            out.events.push(next.event(
                t,
                &ch.subject,
                &ch.observer,
                &ch.datum,
                measure,
                FlowKind::Implicit,
            ));
        }

        next.t += 1;
        Ok((next, out))
    }

    fn event(
        &mut self,
        t: u64,
        sender: &str,
        receiver: &str,
        datum: &str,
        measure: InfoMeasure,
        kind: FlowKind,
    ) -> FlowEvent {
        let id = self.next_id;
        self.next_id += 1;
        FlowEvent {
            id,
            t,
            sender: sender.to_string(),
            receiver: receiver.to_string(),
            datum: datum.to_string(),
            measure,
            kind,
            context_id: format!("t{t}:{sender}->{receiver}"),
        }
    }
}

/// Groups events by `(sender, receiver)`; a context collects every event of
/// that pair within `window` ticks of its first event. Every event lands in
/// exactly one context.
pub fn bundle_contexts(events: &[FlowEvent], window: u64) -> Vec<Context> {
    let window = window.max(1);
    let mut sorted: Vec<&FlowEvent> = events.iter().collect();
    sorted.sort_by_key(|e| e.t);
    let mut contexts: Vec<Context> = Vec::new();
    let mut open: HashMap<(&str, &str), usize> = HashMap::new();
    for e in sorted {
        let pair = (e.sender.as_str(), e.receiver.as_str());
        match open.get(&pair) {
            Some(&i) if e.t < contexts[i].t + window => contexts[i].flow_ids.push(e.id),
            _ => {
                open.insert(pair, contexts.len());
                contexts.push(Context {
                    id: format!("ctx{}", contexts.len()),
                    t: e.t,
                    sender: e.sender.clone(),
                    receiver: e.receiver.clone(),
                    flow_ids: vec![e.id],
                });
            }
        }
    }
    contexts
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationRun {
    pub seed: u64,
    pub ticks: u64,
    pub events: Vec<FlowEvent>,
    pub budget_stops: Vec<BudgetStop>,
    pub contexts: Vec<Context>,
    pub induced: Vec<InducedContext>,
    pub ledger: LedgerReport,
}

/// Runs a scenario for its configured ticks. Explicit flows whose datum names
/// a node of the configured causal network are then attributed.
pub fn run(cfg: &ScenarioConfig) -> Result<SimulationRun> {
    let mut society = Society::from_config(cfg)?;
    let mut events = Vec::new();
    let mut stops = Vec::new();
    for t in 0..cfg.ticks {
        let (next, out) = society.step(tick_seed(cfg.seed, t))?;
        events.extend(out.events);
        stops.extend(out.stops);
        society = next;
    }
    let induced = match &cfg.causal {
        Some(c) => {
            let in_net: Vec<FlowEvent> = events
                .iter()
                .filter(|e| c.net.node_index(&e.datum).is_some())
                .cloned()
                .collect();
            causalnet::attribute_flows(&in_net, &c.net, &c.ownership, c.threshold)?
        }
        None => Vec::new(),
    };
    Ok(SimulationRun {
        seed: cfg.seed,
        ticks: cfg.ticks,
        contexts: bundle_contexts(&events, cfg.window),
        ledger: ledger_report(society.ledger()),
        events,
        budget_stops: stops,
        induced,
    })
}

/// Writes events as JSON lines.
pub fn write_events_jsonl<W: Write>(mut w: W, events: &[FlowEvent]) -> std::io::Result<()> {
    for e in events {
        serde_json::to_writer(&mut w, e)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Writes events as CSV with a flattened measure.
pub fn write_events_csv<W: Write>(
    w: W,
    events: &[FlowEvent],
) -> std::result::Result<(), csv::Error> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "id",
        "t",
        "sender",
        "receiver",
        "datum",
        "kind",
        "selective_sh",
        "logons",
        "metrons",
        "context_id",
    ])?;
    for e in events {
        out.write_record([
            e.id.to_string(),
            e.t.to_string(),
            e.sender.clone(),
            e.receiver.clone(),
            e.datum.clone(),
            e.kind.as_str().to_string(),
            e.measure.selective_sh.to_string(),
            e.measure.logons.to_string(),
            e.measure.metrons.to_string(),
            e.context_id.clone(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_ledger_csv<W: Write>(
    w: W,
    report: &LedgerReport,
) -> std::result::Result<(), csv::Error> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "sender",
        "receiver",
        "datum",
        "kind",
        "cumulative_sh",
        "budget_sh",
        "headroom_sh",
    ])?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in &report.rows {
        out.write_record([
            r.sender.clone(),
            r.receiver.clone(),
            r.datum.clone(),
            r.kind.as_str().to_string(),
            r.cumulative_sh.to_string(),
            opt(r.budget_sh),
            opt(r.headroom_sh),
        ])?;
    }
    out.flush()?;
    Ok(())
}
