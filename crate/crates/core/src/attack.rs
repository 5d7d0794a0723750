//! Active fingerprinting attack.
//!
//! The attacker queries the victim's membership in one group at a time and
//! receives a noisy answer through the victim's query channel. Every user
//! carries an information value: the log prior plus the running sum of
//! `ln(P(y | user's bit) / P(y))`. The attack stops as soon as exactly one
//! user's value exceeds `ln(1/epsilon)`.
//!
//! Two query orders are provided: ITS queries groups by index, A-ITS queries
//! the largest groups first.

use std::fmt;
use std::io::Write;

use rand::Rng;
use thiserror::Error;

use crate::bigraph::BipartiteGraph;
use crate::numerics::{ChannelSpec, DomainError};

/// Information value of a user whose likelihood has dropped to zero.
pub const ELIMINATED: f64 = f64::NEG_INFINITY;

#[derive(Debug, Error)]
pub enum AttackError {
    #[error("response marginal {0} is degenerate")]
    DegenerateMarginal(f64),
    #[error("all {0} groups have already been queried")]
    QueryLimit(usize),
    #[error("group {0} was already queried")]
    AlreadyQueried(usize),
    #[error("group {group} out of range for n = {n}")]
    GroupOutOfRange { group: usize, n: usize },
    #[error("user {user} out of range for m = {m}")]
    UserOutOfRange { user: usize, m: usize },
    #[error("epsilon = {0} must lie in (0, 1)")]
    InvalidEpsilon(f64),
    #[error("invalid victim model: {0}")]
    InvalidVictimModel(String),
    #[error("invalid channel assignment: {0}")]
    InvalidAssignment(String),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryChannel {
    pub spec: ChannelSpec,
    pub theta: String,
}

impl QueryChannel {
    pub fn new(theta: impl Into<String>, spec: ChannelSpec) -> Self {
        Self {
            spec,
            theta: theta.into(),
        }
    }

    pub fn bsc(nq: f64) -> Result<Self, AttackError> {
        Ok(Self::new(format!("bsc({nq})"), ChannelSpec::bsc(nq)?))
    }

    pub fn noiseless() -> Self {
        Self::new("noiseless", ChannelSpec::noiseless())
    }
}

/// Map from users to noise classes, and the channel of every class.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelAssignment {
    user_to_theta: Vec<usize>,
    channels: Vec<QueryChannel>,
}

impl ChannelAssignment {
    pub fn new(user_to_theta: Vec<usize>, channels: Vec<QueryChannel>) -> Result<Self, AttackError> {
        if user_to_theta.is_empty() {
            return Err(AttackError::InvalidAssignment("no users".into()));
        }
        if let Some(&t) = user_to_theta.iter().find(|&&t| t >= channels.len()) {
            return Err(AttackError::InvalidAssignment(format!(
                "class {t} has no channel ({} defined)",
                channels.len()
            )));
        }
        Ok(Self {
            user_to_theta,
            channels,
        })
    }

    /// Every user shares one channel.
    pub fn uniform(m: usize, channel: QueryChannel) -> Self {
        Self {
            user_to_theta: vec![0; m],
            channels: vec![channel],
        }
    }

    pub fn users(&self) -> usize {
        self.user_to_theta.len()
    }

    pub fn channels(&self) -> &[QueryChannel] {
        &self.channels
    }

    pub fn theta_of(&self, user: usize) -> usize {
        self.user_to_theta[user]
    }

    pub fn channel_of(&self, user: usize) -> &QueryChannel {
        &self.channels[self.user_to_theta[user]]
    }

    /// `P_Theta(theta)`: the fraction of users in each class.
    pub fn theta_distribution(&self) -> Vec<f64> {
        let mut counts = vec![0usize; self.channels.len()];
        for &t in &self.user_to_theta {
            counts[t] += 1;
        }
        let m = self.user_to_theta.len() as f64;
        counts.into_iter().map(|c| c as f64 / m).collect()
    }
}

/// Distribution of the victim's index.
#[derive(Debug, Clone, PartialEq)]
pub struct VictimModel {
    pmf: Vec<f64>,
    cumulative: Vec<f64>,
}

impl VictimModel {
    pub fn new(pmf: Vec<f64>) -> Result<Self, AttackError> {
        if pmf.is_empty() {
            return Err(AttackError::InvalidVictimModel("empty pmf".into()));
        }
        if pmf.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(AttackError::InvalidVictimModel("negative or non-finite mass".into()));
        }
        let total: f64 = pmf.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(AttackError::InvalidVictimModel(format!("masses sum to {total}")));
        }
        let mut acc = 0.0;
        let cumulative = pmf
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Ok(Self { pmf, cumulative })
    }

    pub fn uniform(m: usize) -> Self {
        Self::new(vec![1.0 / m as f64; m]).expect("uniform pmf is valid")
    }

    pub fn degenerate(m: usize, user: usize) -> Self {
        let mut pmf = vec![0.0; m];
        pmf[user] = 1.0;
        Self::new(pmf).expect("point mass is valid")
    }

    pub fn users(&self) -> usize {
        self.pmf.len()
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    /// `H(M)` in nats.
    pub fn entropy(&self) -> f64 {
        -self.pmf.iter().map(|&p| crate::numerics::xlnx(p)).sum::<f64>()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let total = *self.cumulative.last().unwrap();
        let u = rng.gen::<f64>() * total;
        let idx = self.cumulative.partition_point(|&c| c <= u);
        let idx = idx.min(self.pmf.len() - 1);
        // Skip zero-mass entries that a rounding edge might land on.
        if self.pmf[idx] > 0.0 {
            idx
        } else {
            (0..self.pmf.len())
                .rev()
                .find(|&k| self.pmf[k] > 0.0)
                .unwrap()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    /// Groups in index order.
    Its,
    /// Largest groups first.
    Aits,
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Its => "its",
            Strategy::Aits => "aits",
        }
    }

    pub fn id(&self) -> u64 {
        match self {
            Strategy::Its => 0,
            Strategy::Aits => 1,
        }
    }

    pub fn query_order(&self, graph: &BipartiteGraph) -> Vec<usize> {
        match self {
            Strategy::Its => query_order_its(graph),
            Strategy::Aits => query_order_aits(graph),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "its" => Ok(Strategy::Its),
            "aits" | "a-its" => Ok(Strategy::Aits),
            other => Err(format!("unknown strategy `{other}` (expected its or aits)")),
        }
    }
}

pub fn query_order_its(graph: &BipartiteGraph) -> Vec<usize> {
    (0..graph.n()).collect()
}

/// Groups by descending degree, ties by ascending index.
pub fn query_order_aits(graph: &BipartiteGraph) -> Vec<usize> {
    let mut order: Vec<usize> = (0..graph.n()).collect();
    order.sort_by(|&a, &b| graph.degree(b).cmp(&graph.degree(a)).then(a.cmp(&b)));
    order
}

/// How the response marginal `P(Y = 1)` of a queried group is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MarginalRule {
    /// Channel output under the edge prior `P(R = 1) = d / m`.
    #[default]
    ChannelOutput,
    /// `1 / d`, the reciprocal group size, kept for comparison.
    ReciprocalDegree,
}

/// `P(Y = 1) = P(Y=1|R=1) d/m + P(Y=1|R=0) (1 - d/m)` for group `group`.
pub fn marginal_response_prob(graph: &BipartiteGraph, group: usize, channel: &QueryChannel) -> f64 {
    channel
        .spec
        .output_marginal(graph.degree(group) as f64 / graph.m() as f64)
}

fn marginal_with_rule(graph: &BipartiteGraph, group: usize, channel: &QueryChannel, rule: MarginalRule) -> f64 {
    match rule {
        MarginalRule::ChannelOutput => marginal_response_prob(graph, group, channel),
        MarginalRule::ReciprocalDegree => {
            let d = graph.degree(group);
            if d == 0 {
                f64::INFINITY
            } else {
                1.0 / d as f64
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InformationState {
    info: Vec<f64>,
    queried: Vec<bool>,
    t: usize,
    threshold: f64,
}

/// Per-user increments applied by one query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueryIncrement {
    pub member: f64,
    pub non_member: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Identification {
    Identified(usize),
    Continue,
}

pub fn threshold_for(epsilon: f64) -> Result<f64, AttackError> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(AttackError::InvalidEpsilon(epsilon));
    }
    Ok((1.0 / epsilon).ln())
}

/// `I_0(k) = ln P_M(k)`, with zero-mass users eliminated.
pub fn init_information(
    victim_model: &VictimModel,
    groups: usize,
    epsilon: f64,
) -> Result<InformationState, AttackError> {
    let threshold = threshold_for(epsilon)?;
    let info = victim_model
        .pmf()
        .iter()
        .map(|&p| if p > 0.0 { p.ln() } else { ELIMINATED })
        .collect();
    Ok(InformationState {
        info,
        queried: vec![false; groups],
        t: 0,
        threshold,
    })
}

impl InformationState {
    /// State with explicit information values and no queries made yet.
    pub fn from_values(info: Vec<f64>, groups: usize, epsilon: f64) -> Result<Self, AttackError> {
        Ok(InformationState {
            info,
            queried: vec![false; groups],
            t: 0,
            threshold: threshold_for(epsilon)?,
        })
    }

    pub fn info(&self) -> &[f64] {
        &self.info
    }

    pub fn queries(&self) -> usize {
        self.t
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn survivors(&self) -> usize {
        self.info.iter().filter(|&&v| v != ELIMINATED).count()
    }

    /// User with the largest information value, lowest index on ties.
    pub fn leader(&self) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (k, &v) in self.info.iter().enumerate() {
            if v != ELIMINATED && best.map_or(true, |(_, b)| v > b) {
                best = Some((k, v));
            }
        }
        best
    }

    fn claim(&mut self, group: usize) -> Result<(), AttackError> {
        let n = self.queried.len();
        if group >= n {
            return Err(AttackError::GroupOutOfRange { group, n });
        }
        if self.t >= n {
            return Err(AttackError::QueryLimit(n));
        }
        if self.queried[group] {
            return Err(AttackError::AlreadyQueried(group));
        }
        self.queried[group] = true;
        self.t += 1;
        Ok(())
    }

    /// Counts a query whose answer is certain and so leaves every value as is.
    pub fn record_uninformative(&mut self, group: usize) -> Result<(), AttackError> {
        self.claim(group)
    }

    /// Adds `ln(P(response | bit) / P_Y(response))` to every live user, where
    /// `bit` is the user's membership in `group` and `P_Y(1) = q`. A zero
    /// likelihood eliminates the user.
    pub fn update(
        &mut self,
        graph: &BipartiteGraph,
        group: usize,
        response: bool,
        channel: &QueryChannel,
        q: f64,
    ) -> Result<QueryIncrement, AttackError> {
        if !(q > 0.0 && q < 1.0) {
            return Err(AttackError::DegenerateMarginal(q));
        }
        self.claim(group)?;
        let p_y = if response { q } else { 1.0 - q };
        let increment = |bit: bool| {
            let lik = channel.spec.likelihood(response, bit);
            if lik == 0.0 {
                ELIMINATED
            } else {
                (lik / p_y).ln()
            }
        };
        let inc = QueryIncrement {
            member: increment(true),
            non_member: increment(false),
        };

        let members = graph.members(group);
        let mut next = members.iter().peekable();
        for (k, value) in self.info.iter_mut().enumerate() {
            let is_member = next.next_if(|&&u| u as usize == k).is_some();
            if *value == ELIMINATED {
                continue;
            }
            let delta = if is_member { inc.member } else { inc.non_member };
            *value = if delta == ELIMINATED {
                ELIMINATED
            } else {
                *value + delta
            };
        }
        Ok(inc)
    }

    /// `Identified(k)` iff `k` is the only user strictly above the threshold.
    pub fn identify(&self) -> Identification {
        let mut found = None;
        for (k, &v) in self.info.iter().enumerate() {
            if v > self.threshold {
                if found.is_some() {
                    return Identification::Continue;
                }
                found = Some(k);
            }
        }
        found.map_or(Identification::Continue, Identification::Identified)
    }
}

/// Free-function form of [`InformationState::update`].
pub fn update_information(
    state: &mut InformationState,
    graph: &BipartiteGraph,
    group: usize,
    response: bool,
    channel: &QueryChannel,
    q: f64,
) -> Result<QueryIncrement, AttackError> {
    state.update(graph, group, response, channel, q)
}

pub fn identify(state: &InformationState) -> Identification {
    state.identify()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttackResult {
    Identified(usize),
    Unresolved,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryRecord {
    /// 1-based query number.
    pub t: usize,
    pub group: usize,
    pub degree: usize,
    pub response: bool,
    /// Marginal `P(Y = 1)` used for the update.
    pub marginal: f64,
    /// `None` when the marginal was degenerate and nothing changed.
    pub increment: Option<QueryIncrement>,
    pub survivors: usize,
    pub leader: Option<(usize, f64)>,
}

impl fmt::Display for QueryRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "q {} group={} degree={} y={} survivors={} top=",
            self.t,
            self.group + 1,
            self.degree,
            u8::from(self.response),
            self.survivors
        )?;
        match self.leader {
            Some((user, info)) => write!(f, "{}:{}", user + 1, info),
            None => f.write_str("none"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackOutcome {
    pub result: AttackResult,
    pub queries_used: usize,
    pub victim: usize,
    pub trace: Option<Vec<QueryRecord>>,
}

impl AttackOutcome {
    /// `Some(true)` when the identified user is the victim; `None` when unresolved.
    pub fn correct(&self) -> Option<bool> {
        match self.result {
            AttackResult::Identified(u) => Some(u == self.victim),
            AttackResult::Unresolved => None,
        }
    }

    pub fn write_trace<W: Write>(&self, sink: &mut W) -> std::io::Result<()> {
        for record in self.trace.iter().flatten() {
            writeln!(sink, "{record}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AttackOptions {
    pub marginal_rule: MarginalRule,
    pub record_trace: bool,
}

/// One configured attack over a fixed graph. The query order is computed
/// once and reused for every victim.
#[derive(Debug, Clone)]
pub struct Attack<'g> {
    graph: &'g BipartiteGraph,
    assignment: &'g ChannelAssignment,
    victim_model: &'g VictimModel,
    order: Vec<usize>,
    epsilon: f64,
    options: AttackOptions,
}

impl<'g> Attack<'g> {
    pub fn new(
        graph: &'g BipartiteGraph,
        assignment: &'g ChannelAssignment,
        victim_model: &'g VictimModel,
        strategy: Strategy,
        epsilon: f64,
        options: AttackOptions,
    ) -> Result<Self, AttackError> {
        threshold_for(epsilon)?;
        if assignment.users() != graph.m() {
            return Err(AttackError::InvalidAssignment(format!(
                "assignment covers {} users, graph has {}",
                assignment.users(),
                graph.m()
            )));
        }
        if victim_model.users() != graph.m() {
            return Err(AttackError::InvalidVictimModel(format!(
                "pmf covers {} users, graph has {}",
                victim_model.users(),
                graph.m()
            )));
        }
        Ok(Self {
            graph,
            assignment,
            victim_model,
            order: strategy.query_order(graph),
            epsilon,
            options,
        })
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Draws the victim from the victim model, then attacks.
    pub fn run<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<AttackOutcome, AttackError> {
        let victim = self.victim_model.sample(rng);
        self.run_for_victim(victim, rng)
    }

    pub fn run_for_victim<R: Rng + ?Sized>(&self, victim: usize, rng: &mut R) -> Result<AttackOutcome, AttackError> {
        let graph = self.graph;
        if victim >= graph.m() {
            return Err(AttackError::UserOutOfRange {
                user: victim,
                m: graph.m(),
            });
        }
        // The attacker learns the victim's noise class.
        let channel = self.assignment.channel_of(victim);
        let mut state = init_information(self.victim_model, graph.n(), self.epsilon)?;
        let mut trace = self.options.record_trace.then(Vec::new);

        for &group in &self.order {
            let bit = graph.contains(victim, group);
            let response = rng.gen::<f64>() < channel.spec.likelihood(true, bit);
            let q = marginal_with_rule(graph, group, channel, self.options.marginal_rule);
            let increment = if q > 0.0 && q < 1.0 {
                Some(state.update(graph, group, response, channel, q)?)
            } else {
                state.record_uninformative(group)?;
                None
            };
            if let Some(trace) = trace.as_mut() {
                trace.push(QueryRecord {
                    t: state.queries(),
                    group,
                    degree: graph.degree(group),
                    response,
                    marginal: q,
                    increment,
                    survivors: state.survivors(),
                    leader: state.leader(),
                });
            }
            if let Identification::Identified(user) = state.identify() {
                return Ok(AttackOutcome {
                    result: AttackResult::Identified(user),
                    queries_used: state.queries(),
                    victim,
                    trace,
                });
            }
        }
        Ok(AttackOutcome {
            result: AttackResult::Unresolved,
            queries_used: state.queries(),
            victim,
            trace,
        })
    }
}

/// Samples a victim and runs one attack with default options.
pub fn run_attack<R: Rng + ?Sized>(
    graph: &BipartiteGraph,
    assignment: &ChannelAssignment,
    victim_model: &VictimModel,
    strategy: Strategy,
    epsilon: f64,
    rng: &mut R,
) -> Result<AttackOutcome, AttackError> {
    Attack::new(graph, assignment, victim_model, strategy, epsilon, AttackOptions::default())?.run(rng)
}
