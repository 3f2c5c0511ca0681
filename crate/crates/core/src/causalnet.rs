//! Exact inference on small categorical Bayesian networks.
//!
//! Everything here works on the dense joint table obtained by enumerating
//! every state combination, so the networks must stay small: the table is
//! capped at [`STATE_SPACE_LIMIT`] cells.

use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, STATE_SPACE_LIMIT};
use crate::infocore::{entropy_of, InfoMeasure};
use crate::society::{Context, FlowEvent, FlowKind};

/// Default MI threshold (Sh) above which information is considered to flow.
pub const DEFAULT_FLOW_THRESHOLD: f64 = 1e-6;

/// Leakage below this is summation roundoff and is reported as exactly zero.
const ROUNDOFF_SH: f64 = 1e-12;

/// A categorical node. CPT rows follow the mixed-radix order of the parent
/// states with the first parent most significant; a root has a single row.
#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub name: String,
    pub states: Vec<String>,
    pub parents: Vec<String>,
    pub cpt: Vec<Vec<f64>>,
}

impl Node {
    pub fn new<S: Into<String>>(
        name: impl Into<String>,
        states: Vec<S>,
        parents: Vec<S>,
        cpt: Vec<Vec<f64>>,
    ) -> Self {
        Node {
            name: name.into(),
            states: states.into_iter().map(Into::into).collect(),
            parents: parents.into_iter().map(Into::into).collect(),
            cpt,
        }
    }

    pub fn root<S: Into<String>>(name: impl Into<String>, states: Vec<S>, probs: Vec<f64>) -> Self {
        Node::new(name, states, Vec::new(), vec![probs])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BayesNet {
    nodes: Vec<Node>,
    parent_idx: Vec<Vec<usize>>,
    topo: Vec<usize>,
}

// JSON schema: every CPT row names the parent states it is conditioned on.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNet {
    nodes: Vec<RawNode>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNode {
    name: String,
    states: Vec<String>,
    #[serde(default)]
    parents: Vec<String>,
    cpt: Vec<RawRow>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRow {
    #[serde(default)]
    given: Vec<String>,
    probs: Vec<f64>,
}

impl Serialize for BayesNet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let nodes = self
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| RawNode {
                name: n.name.clone(),
                states: n.states.clone(),
                parents: n.parents.clone(),
                cpt: n
                    .cpt
                    .iter()
                    .enumerate()
                    .map(|(r, probs)| RawRow {
                        given: self.decode_parent_row(i, r),
                        probs: probs.clone(),
                    })
                    .collect(),
            })
            .collect();
        RawNet { nodes }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for BayesNet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawNet::deserialize(d)?;
        BayesNet::from_raw(raw).map_err(serde::de::Error::custom)
    }
}

impl BayesNet {
    pub fn new(nodes: Vec<Node>) -> Result<Self> {
        let mut index = HashMap::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            if index.insert(n.name.clone(), i).is_some() {
                return Err(Error::domain(format!("duplicate node {:?}", n.name)));
            }
        }
        let mut parent_idx = Vec::with_capacity(nodes.len());
        for n in &nodes {
            if n.states.is_empty() {
                return Err(Error::domain(format!("node {:?} has no states", n.name)));
            }
            let mut sorted = n.states.clone();
            sorted.sort();
            if sorted.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::domain(format!("node {:?} repeats a state", n.name)));
            }
            let idx = n
                .parents
                .iter()
                .map(|p| {
                    index.get(p).copied().ok_or_else(|| {
                        Error::domain(format!("{:?} has unknown parent {p:?}", n.name))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            parent_idx.push(idx);
        }
        for (i, n) in nodes.iter().enumerate() {
            let rows: usize = parent_idx[i]
                .iter()
                .map(|&p| nodes[p].states.len())
                .product();
            if n.cpt.len() != rows {
                return Err(Error::domain(format!(
                    "node {:?} needs {rows} CPT rows, has {}",
                    n.name,
                    n.cpt.len()
                )));
            }
            for row in &n.cpt {
                if row.len() != n.states.len() || row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                    return Err(Error::domain(format!(
                        "node {:?} has a malformed CPT row",
                        n.name
                    )));
                }
                let total: f64 = row.iter().sum();
                if (total - 1.0).abs() > crate::TOLERANCE {
                    return Err(Error::domain(format!(
                        "node {:?} has a CPT row summing to {total}",
                        n.name
                    )));
                }
            }
        }
        let topo = topological_order(&parent_idx)
            .ok_or_else(|| Error::domain("network has a directed cycle"))?;
        Ok(BayesNet {
            nodes,
            parent_idx,
            topo,
        })
    }

    fn from_raw(raw: RawNet) -> Result<Self> {
        let states: HashMap<&str, &[String]> = raw
            .nodes
            .iter()
            .map(|n| (n.name.as_str(), n.states.as_slice()))
            .collect();
        let mut nodes = Vec::with_capacity(raw.nodes.len());
        for n in &raw.nodes {
            let radices = n
                .parents
                .iter()
                .map(|p| {
                    states.get(p.as_str()).copied().ok_or_else(|| {
                        Error::domain(format!("{:?} has unknown parent {p:?}", n.name))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let rows: usize = radices.iter().map(|s| s.len()).product();
            let mut cpt: Vec<Option<Vec<f64>>> = vec![None; rows];
            for row in &n.cpt {
                if row.given.len() != radices.len() {
                    return Err(Error::domain(format!(
                        "CPT row of {:?} must name {} parent states",
                        n.name,
                        radices.len()
                    )));
                }
                let mut r = 0;
                for (value, parent_states) in row.given.iter().zip(&radices) {
                    let s = parent_states
                        .iter()
                        .position(|x| x == value)
                        .ok_or_else(|| {
                            Error::domain(format!(
                                "CPT row of {:?} uses unknown state {value:?}",
                                n.name
                            ))
                        })?;
                    r = r * parent_states.len() + s;
                }
                if cpt[r].replace(row.probs.clone()).is_some() {
                    return Err(Error::domain(format!("CPT of {:?} repeats a row", n.name)));
                }
            }
            let cpt = cpt
                .into_iter()
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| Error::domain(format!("CPT of {:?} is missing rows", n.name)))?;
            nodes.push(Node {
                name: n.name.clone(),
                states: n.states.clone(),
                parents: n.parents.clone(),
                cpt,
            });
        }
        BayesNet::new(nodes)
    }

    fn decode_parent_row(&self, node: usize, mut row: usize) -> Vec<String> {
        let parents = &self.parent_idx[node];
        let mut given = vec![String::new(); parents.len()];
        for (slot, &p) in parents.iter().enumerate().rev() {
            let card = self.nodes[p].states.len();
            given[slot] = self.nodes[p].states[row % card].clone();
            row /= card;
        }
        given
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node_index(&self, name: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.name == name)
    }

    fn require(&self, name: &str) -> Result<usize> {
        self.node_index(name)
            .ok_or_else(|| Error::domain(format!("unknown node {name:?}")))
    }

    pub fn parents_of(&self, node: usize) -> &[usize] {
        &self.parent_idx[node]
    }

    /// Indices in a topological order (parents before children).
    pub fn topological_order(&self) -> &[usize] {
        &self.topo
    }

    /// Number of cells in the full joint table.
    pub fn state_space(&self) -> u128 {
        self.nodes.iter().map(|n| n.states.len() as u128).product()
    }

    /// Row index of `node`'s CPT selected by a full assignment (declared order).
    pub fn cpt_row(&self, node: usize, assignment: &[usize]) -> usize {
        self.parent_idx[node]
            .iter()
            .fold(0, |r, &p| r * self.nodes[p].states.len() + assignment[p])
    }
}

fn topological_order(parents: &[Vec<usize>]) -> Option<Vec<usize>> {
    let n = parents.len();
    let mut indegree: Vec<usize> = parents.iter().map(Vec::len).collect();
    let mut children = vec![Vec::new(); n];
    for (c, ps) in parents.iter().enumerate() {
        for &p in ps {
            children[p].push(c);
        }
    }
    let mut ready: Vec<usize> = (0..n).rev().filter(|&i| indegree[i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(i) = ready.pop() {
        order.push(i);
        for &c in children[i].iter().rev() {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                ready.push(c);
            }
        }
    }
    (order.len() == n).then_some(order)
}

/// Dense joint table over every node of a network, indexed in mixed radix
/// over the declared node order (first node most significant).
#[derive(Debug, Clone, PartialEq)]
pub struct JointTable {
    names: Vec<String>,
    cards: Vec<usize>,
    table: Vec<f64>,
}

impl JointTable {
    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn cards(&self) -> &[usize] {
        &self.cards
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn total(&self) -> f64 {
        self.table.iter().sum()
    }

    fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.cards.len()];
        for i in (0..self.cards.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * self.cards[i + 1];
        }
        strides
    }

    /// Marginal over `vars`, indexed in mixed radix over `vars` in the given order.
    pub fn marginal(&self, vars: &[usize]) -> Vec<f64> {
        let strides = self.strides();
        let size: usize = vars.iter().map(|&v| self.cards[v]).product();
        let mut out = vec![0.0; size];
        for (cell, &p) in self.table.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let mut idx = 0;
            for &v in vars {
                idx = idx * self.cards[v] + (cell / strides[v]) % self.cards[v];
            }
            out[idx] += p;
        }
        out
    }

    pub fn entropy(&self, vars: &[usize]) -> f64 {
        entropy_of(&self.marginal(vars))
    }

    /// Conditional mutual information `I(A; B | C)` in Sh.
    pub fn conditional_mi(&self, a: &[usize], b: &[usize], c: &[usize]) -> f64 {
        let card = |vs: &[usize]| -> usize { vs.iter().map(|&v| self.cards[v]).product() };
        let (na, nb, nc) = (card(a), card(b), card(c));
        let vars: Vec<usize> = c.iter().chain(a).chain(b).copied().collect();
        // Cell layout: (c, a, b) in mixed radix.
        let abc = self.marginal(&vars);
        let mut ac = vec![0.0; nc * na];
        let mut bc = vec![0.0; nc * nb];
        let mut pc = vec![0.0; nc];
        for ci in 0..nc {
            for ai in 0..na {
                for bi in 0..nb {
                    let p = abc[(ci * na + ai) * nb + bi];
                    ac[ci * na + ai] += p;
                    bc[ci * nb + bi] += p;
                    pc[ci] += p;
                }
            }
        }
        let mut mi = 0.0;
        for ci in 0..nc {
            for ai in 0..na {
                for bi in 0..nb {
                    let p = abc[(ci * na + ai) * nb + bi];
                    if p > 0.0 {
                        mi += p * ((p * pc[ci]) / (ac[ci * na + ai] * bc[ci * nb + bi])).log2();
                    }
                }
            }
        }
        mi.max(0.0)
    }

    pub fn mutual_information(&self, a: &[usize], b: &[usize]) -> f64 {
        self.conditional_mi(a, b, &[])
    }

    /// Posterior table given `var = state`; `None` when the evidence has zero mass.
    pub fn condition(&self, var: usize, state: usize) -> Option<JointTable> {
        let strides = self.strides();
        let mut table: Vec<f64> = self
            .table
            .iter()
            .enumerate()
            .map(|(cell, &p)| {
                if (cell / strides[var]) % self.cards[var] == state {
                    p
                } else {
                    0.0
                }
            })
            .collect();
        let mass: f64 = table.iter().sum();
        if mass <= 0.0 {
            return None;
        }
        table.iter_mut().for_each(|p| *p /= mass);
        Some(JointTable {
            names: self.names.clone(),
            cards: self.cards.clone(),
            table,
        })
    }
}

/// Exact joint by enumeration, extending the table one node at a time in
/// topological order.
pub fn joint(net: &BayesNet) -> Result<JointTable> {
    let size = net.state_space();
    if size > STATE_SPACE_LIMIT {
        return Err(Error::Capacity {
            size,
            limit: STATE_SPACE_LIMIT,
        });
    }
    let n = net.nodes.len();
    // position of each node inside the growing table, if already placed
    let mut placed: Vec<Option<usize>> = vec![None; n];
    let mut order: Vec<usize> = Vec::with_capacity(n);
    let mut table = vec![1.0];
    for &node in &net.topo {
        let card = net.nodes[node].states.len();
        let cards: Vec<usize> = order.iter().map(|&v| net.nodes[v].states.len()).collect();
        let mut strides = vec![1; order.len()];
        for i in (0..order.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * cards[i + 1];
        }
        let parent_pos: Vec<(usize, usize)> = net.parent_idx[node]
            .iter()
            .map(|&p| {
                let pos = placed[p].expect("topological order places parents first");
                (pos, net.nodes[p].states.len())
            })
            .collect();
        let mut next = Vec::with_capacity(table.len() * card);
        for (cell, &p) in table.iter().enumerate() {
            let row = parent_pos.iter().fold(0, |r, &(pos, pc)| {
                r * pc + (cell / strides[pos]) % cards[pos]
            });
            next.extend(net.nodes[node].cpt[row].iter().map(|q| p * q));
        }
        table = next;
        placed[node] = Some(order.len());
        order.push(node);
    }
    // Reorder from topological layout to declared node order.
    let cards: Vec<usize> = net.nodes.iter().map(|n| n.states.len()).collect();
    let mut topo_strides = vec![1; n];
    for i in (0..n.saturating_sub(1)).rev() {
        topo_strides[i] = topo_strides[i + 1] * cards[order[i + 1]];
    }
    let mut out = vec![0.0; table.len()];
    let mut assignment = vec![0usize; n];
    for (cell, slot) in out.iter_mut().enumerate() {
        let mut rest = cell;
        for v in (0..n).rev() {
            assignment[v] = rest % cards[v];
            rest /= cards[v];
        }
        let src: usize = (0..n).map(|i| assignment[order[i]] * topo_strides[i]).sum();
        *slot = table[src];
    }
    Ok(JointTable {
        names: net.nodes.iter().map(|n| n.name.clone()).collect(),
        cards,
        table: out,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeLeakage {
    pub node: String,
    /// `I(M; V)` in Sh.
    pub mi_sh: f64,
    pub entropy_sh: f64,
    pub posterior_entropy_sh: f64,
    /// `H(V) − H(V | M = observed)`; negative when the observation adds uncertainty.
    pub entropy_drop_sh: f64,
}

/// How much transmitting a message node reveals about every other node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeakageProfile {
    pub message_node: String,
    pub message_entropy_sh: f64,
    pub observed: String,
    /// One entry per other node, in declared node order.
    pub nodes: Vec<NodeLeakage>,
}

impl LeakageProfile {
    pub fn mi(&self, node: &str) -> Option<f64> {
        self.nodes.iter().find(|n| n.node == node).map(|n| n.mi_sh)
    }

    /// Entries sorted by MI, largest first; ties keep node order.
    pub fn sorted_by_mi(&self) -> Vec<&NodeLeakage> {
        let mut rows: Vec<&NodeLeakage> = self.nodes.iter().collect();
        rows.sort_by(|a, b| b.mi_sh.total_cmp(&a.mi_sh));
        rows
    }
}

/// Leakage of `message` about every other node. The posterior entropy drop is
/// taken at `observed`, or at the most probable message state when `None`.
pub fn leakage_profile(
    net: &BayesNet,
    message: &str,
    observed: Option<&str>,
) -> Result<LeakageProfile> {
    let m = net.require(message)?;
    let jt = joint(net)?;
    let pm = jt.marginal(&[m]);
    let state = match observed {
        Some(s) => net.nodes[m]
            .states
            .iter()
            .position(|x| x == s)
            .ok_or_else(|| Error::domain(format!("{message:?} has no state {s:?}")))?,
        None => pm
            .iter()
            .enumerate()
            .fold(0, |best, (i, &p)| if p > pm[best] { i } else { best }),
    };
    let posterior = jt.condition(m, state).ok_or_else(|| {
        Error::domain(format!(
            "observed state of {message:?} has zero probability"
        ))
    })?;
    let nodes = (0..net.nodes.len())
        .filter(|&v| v != m)
        .map(|v| {
            let entropy_sh = jt.entropy(&[v]);
            let posterior_entropy_sh = posterior.entropy(&[v]);
            NodeLeakage {
                node: net.nodes[v].name.clone(),
                mi_sh: Some(jt.mutual_information(&[m], &[v]))
                    .filter(|&mi| mi >= ROUNDOFF_SH)
                    .unwrap_or(0.0),
                entropy_sh,
                posterior_entropy_sh,
                entropy_drop_sh: entropy_sh - posterior_entropy_sh,
            }
        })
        .collect();
    Ok(LeakageProfile {
        message_node: message.to_string(),
        message_entropy_sh: entropy_of(&pm),
        observed: net.nodes[m].states[state].clone(),
        nodes,
    })
}

/// Builds the causal graph used to illustrate fork and collider structure:
/// `A→D, B→D, C→D, A→E, D→E, F→E, E→X, G→X, X→M`, all nodes binary, CPT
/// entries drawn uniformly from `[0.1, 0.9)` with a seeded ChaCha8 generator.
pub fn example_graph(seed: u64) -> BayesNet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    build_seeded(&mut rng, &graph_structure()).expect("fixed structure is a DAG")
}

/// [`example_graph`] plus an isolated binary root `H` that no other node touches.
pub fn example_graph_with_control(seed: u64) -> BayesNet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut structure = graph_structure();
    structure.push(("H", vec![]));
    build_seeded(&mut rng, &structure).expect("fixed structure is a DAG")
}

fn graph_structure() -> Vec<(&'static str, Vec<&'static str>)> {
    vec![
        ("A", vec![]),
        ("B", vec![]),
        ("C", vec![]),
        ("D", vec!["A", "B", "C"]),
        ("E", vec!["A", "D", "F"]),
        ("F", vec![]),
        ("G", vec![]),
        ("X", vec!["E", "G"]),
        ("M", vec!["X"]),
    ]
}

fn build_seeded<R: Rng>(rng: &mut R, structure: &[(&str, Vec<&str>)]) -> Result<BayesNet> {
    let nodes = structure
        .iter()
        .map(|(name, parents)| {
            let cpt = (0..1usize << parents.len())
                .map(|_| {
                    let p: f64 = rng.random_range(0.1..0.9);
                    vec![p, 1.0 - p]
                })
                .collect();
            Node::new(*name, vec!["0", "1"], parents.clone(), cpt)
        })
        .collect();
    BayesNet::new(nodes)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwinsReport {
    pub zygosity_prior: f64,
    /// `H(S2 | S1 = s, Z = identical)` for every `s`.
    pub posterior_entropy_identical: Vec<f64>,
    /// `H(S2 | S1 = s, Z = fraternal)` for every `s`.
    pub posterior_entropy_fraternal: Vec<f64>,
    /// `H(S2 | S1)`, before the zygosity is revealed.
    pub entropy_s2_given_s1: f64,
    /// `I(Z; S2 | S1)`: what revealing zygosity adds once S1 is known.
    pub mi_z_s2_given_s1: f64,
    /// `I(S2; S1, Z)`: what the sender's own datum and zygosity jointly reveal.
    pub mi_s2_given_s1_and_z: f64,
}

/// Zygosity `Z`, the sender's sex `S1`, and the sibling's sex `S2`, which
/// copies `S1` for identical twins and is an independent fair coin otherwise.
pub fn twins_net(zygosity_prior: f64) -> Result<BayesNet> {
    if !(0.0..=1.0).contains(&zygosity_prior) {
        return Err(Error::domain("zygosity prior must lie in [0, 1]"));
    }
    let q = zygosity_prior;
    BayesNet::new(vec![
        Node::root("Z", vec!["identical", "fraternal"], vec![q, 1.0 - q]),
        Node::root("S1", vec!["female", "male"], vec![0.5, 0.5]),
        Node::new(
            "S2",
            vec!["female", "male"],
            vec!["Z", "S1"],
            vec![
                vec![1.0, 0.0],
                vec![0.0, 1.0],
                vec![0.5, 0.5],
                vec![0.5, 0.5],
            ],
        ),
    ])
}

pub fn twins_scenario(zygosity_prior: f64) -> Result<(BayesNet, TwinsReport)> {
    let net = twins_net(zygosity_prior)?;
    let jt = joint(&net)?;
    let (z, s1, s2) = (0, 1, 2);
    let branch = |zstate: usize| -> Vec<f64> {
        (0..2)
            .map(|s| {
                jt.condition(z, zstate)
                    .and_then(|t| t.condition(s1, s))
                    .map_or(f64::NAN, |t| t.entropy(&[s2]))
            })
            .collect()
    };
    let report = TwinsReport {
        zygosity_prior,
        posterior_entropy_identical: branch(0),
        posterior_entropy_fraternal: branch(1),
        entropy_s2_given_s1: jt.entropy(&[s1, s2]) - jt.entropy(&[s1]),
        mi_z_s2_given_s1: jt.conditional_mi(&[z], &[s2], &[s1]),
        mi_s2_given_s1_and_z: jt.mutual_information(&[s2], &[s1, z]),
    };
    Ok((net, report))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TallyPosterior {
    pub tally: usize,
    pub p_tally: f64,
    /// `P(V1 = 1 | T = tally)`.
    pub p_v1_yes: f64,
    pub entropy_v1_sh: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallotReport {
    pub voters: usize,
    pub mi_tally_v1: f64,
    pub posteriors: Vec<TallyPosterior>,
}

/// Largest electorate accepted by [`ballot_scenario`].
pub const MAX_VOTERS: usize = 20;

/// Builds `n` iid fair binary voters `V1..Vn` and their tally `T`.
pub fn ballot_net(n_voters: usize) -> Result<BayesNet> {
    if n_voters < 2 {
        return Err(Error::domain("a ballot needs at least two voters"));
    }
    let size = (1u128 << n_voters.min(127)) * (n_voters as u128 + 1);
    if n_voters > MAX_VOTERS || size > STATE_SPACE_LIMIT {
        return Err(Error::Capacity {
            size,
            limit: STATE_SPACE_LIMIT,
        });
    }
    let mut nodes: Vec<Node> = (1..=n_voters)
        .map(|i| Node::root(format!("V{i}"), vec!["0", "1"], vec![0.5, 0.5]))
        .collect();
    let cpt = (0..1usize << n_voters)
        .map(|row| {
            let mut probs = vec![0.0; n_voters + 1];
            probs[row.count_ones() as usize] = 1.0;
            probs
        })
        .collect();
    nodes.push(Node::new(
        "T",
        (0..=n_voters).map(|t| t.to_string()).collect(),
        (1..=n_voters).map(|i| format!("V{i}")).collect(),
        cpt,
    ));
    BayesNet::new(nodes)
}

pub fn ballot_scenario(n_voters: usize) -> Result<(BayesNet, BallotReport)> {
    let net = ballot_net(n_voters)?;
    let jt = joint(&net)?;
    let (v1, t) = (0, n_voters);
    let pt = jt.marginal(&[t]);
    let posteriors = pt
        .iter()
        .enumerate()
        .map(|(tally, &p_tally)| {
            let post = jt.condition(t, tally).expect("every tally is reachable");
            let pv = post.marginal(&[v1]);
            TallyPosterior {
                tally,
                p_tally,
                p_v1_yes: pv[1],
                entropy_v1_sh: entropy_of(&pv),
            }
        })
        .collect();
    let report = BallotReport {
        voters: n_voters,
        mi_tally_v1: jt.mutual_information(&[t], &[v1]),
        posteriors,
    };
    Ok((net, report))
}

/// An explicit context together with the implicit context it induces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InducedContext {
    pub cause: Context,
    pub induced: Context,
    pub flows: Vec<FlowEvent>,
}

/// A leaked node: its owner, index and the larger of the two MI scores.
type Leak = (String, usize, f64);

/// For every explicit flow, finds nodes owned by other entities that the
/// message is informative about and emits an implicit context with that
/// entity as sender.
///
/// A node counts as leaked when either `I(M; V)` or `I(M; V | K)` exceeds
/// `threshold`, where `K` is the sender's other owned nodes (data the receiver
/// may already link to the sender). Nodes without an owner are skipped.
pub fn attribute_flows(
    log: &[FlowEvent],
    net: &BayesNet,
    ownership: &BTreeMap<String, String>,
    threshold: f64,
) -> Result<Vec<InducedContext>> {
    for node in ownership.keys() {
        net.require(node)?;
    }
    let explicit: Vec<&FlowEvent> = log
        .iter()
        .filter(|e| e.kind == FlowKind::Explicit)
        .collect();
    for e in &explicit {
        net.require(&e.datum)?;
    }
    if explicit.is_empty() {
        return Ok(Vec::new());
    }
    let jt = joint(net)?;
    let mut next_id = log.iter().map(|e| e.id + 1).max().unwrap_or(0);
    let mut cache: HashMap<(usize, String), Vec<Leak>> = HashMap::new();
    let mut out = Vec::new();
    for e in explicit {
        let m = net.require(&e.datum)?;
        let leaks = cache.entry((m, e.sender.clone())).or_insert_with(|| {
            let known: Vec<usize> = ownership
                .iter()
                .filter(|(node, owner)| **owner == e.sender && node.as_str() != e.datum)
                .filter_map(|(node, _)| net.node_index(node))
                .collect();
            (0..net.nodes.len())
                .filter(|&v| v != m)
                .filter_map(|v| {
                    let owner = ownership.get(&net.nodes[v].name)?;
                    if *owner == e.sender {
                        return None;
                    }
                    let marginal = jt.mutual_information(&[m], &[v]);
                    let given = jt.conditional_mi(&[m], &[v], &known);
                    let mi = marginal.max(given);
                    (mi > threshold).then(|| (owner.clone(), v, mi))
                })
                .collect()
        });
        let mut by_owner: BTreeMap<&str, Vec<(usize, f64)>> = BTreeMap::new();
        for (owner, v, mi) in leaks.iter() {
            by_owner.entry(owner.as_str()).or_default().push((*v, *mi));
        }
        let cause = Context {
            id: e.context_id.clone(),
            t: e.t,
            sender: e.sender.clone(),
            receiver: e.receiver.clone(),
            flow_ids: vec![e.id],
        };
        for (owner, nodes) in by_owner {
            if owner == e.receiver {
                continue;
            }
            let flows: Vec<FlowEvent> = nodes
                .iter()
                .map(|&(v, mi)| {
                    let id = next_id;
                    next_id += 1;
                    FlowEvent {
                        id,
                        t: e.t,
                        sender: owner.to_string(),
                        receiver: e.receiver.clone(),
                        datum: net.nodes[v].name.clone(),
                        measure: InfoMeasure::selective(mi),
                        kind: FlowKind::Implicit,
                        context_id: format!("{}/implicit:{owner}", e.context_id),
                    }
                })
                .collect();
            out.push(InducedContext {
                cause: cause.clone(),
                induced: Context {
                    id: format!("{}/implicit:{owner}", e.context_id),
                    t: e.t,
                    sender: owner.to_string(),
                    receiver: e.receiver.clone(),
                    flow_ids: flows.iter().map(|f| f.id).collect(),
                },
                flows,
            });
        }
    }
    Ok(out)
}
