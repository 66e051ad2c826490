//! Circuit lattices built from grounded capacitors, grounded inductors and
//! voltage-follower-buffered capacitive couplings, plus the line-oriented
//! text format used to store them.
//!
//! ```text
//! # label: ten-site chain
//! nodes 10
//! indg  1 2.2e-4
//! capg  1 1e-8
//! vfcap 2 1 2.2e-7
//! ```
//!
//! Values are SI base units (farads, henrys). Node indices are 1-based.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// 1-based node label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }

    /// 0-based position in matrices.
    pub fn zero_based(self) -> usize {
        self.0 - 1
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Component {
    GroundCap {
        node: NodeId,
        capacitance: f64,
    },
    GroundInd {
        node: NodeId,
        inductance: f64,
    },
    /// A voltage follower senses `input` (drawing no current) and drives
    /// `driven` through a series capacitor.
    DirectedCoupling {
        input: NodeId,
        driven: NodeId,
        capacitance: f64,
    },
}

impl Component {
    fn validate(&self, num_nodes: usize) -> std::result::Result<(), String> {
        let check_node = |id: NodeId| {
            if id.0 == 0 || id.0 > num_nodes {
                Err(format!("node {} out of range 1..={num_nodes}", id.0))
            } else {
                Ok(())
            }
        };
        let check_value = |v: f64, what: &str| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(format!("{what} must be positive and finite, got {v}"))
            }
        };
        match *self {
            Component::GroundCap { node, capacitance } => {
                check_node(node)?;
                check_value(capacitance, "capacitance")
            }
            Component::GroundInd { node, inductance } => {
                check_node(node)?;
                check_value(inductance, "inductance")
            }
            Component::DirectedCoupling {
                input,
                driven,
                capacitance,
            } => {
                check_node(input)?;
                check_node(driven)?;
                if input == driven {
                    return Err(format!("self-coupling on node {input}"));
                }
                check_value(capacitance, "capacitance")
            }
        }
    }

    /// Canonical order: grounded parts by node (inductor before capacitor),
    /// then couplings by (input, driven).
    fn sort_key(&self) -> (u8, usize, usize, u8) {
        match *self {
            Component::GroundInd { node, .. } => (0, node.0, 0, 0),
            Component::GroundCap { node, .. } => (0, node.0, 0, 1),
            Component::DirectedCoupling { input, driven, .. } => (1, input.0, driven.0, 0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Netlist {
    num_nodes: usize,
    components: Vec<Component>,
    label: String,
}

impl Netlist {
    /// Validates the components, merges grounded capacitors that share a
    /// node, and stores everything in canonical order.
    pub fn new(
        num_nodes: usize,
        components: Vec<Component>,
        label: impl Into<String>,
    ) -> Result<Self> {
        if num_nodes == 0 {
            return Err(Error::InvalidComponent(
                "netlist needs at least one node".into(),
            ));
        }
        let mut caps: BTreeMap<NodeId, f64> = BTreeMap::new();
        let mut inds: BTreeMap<NodeId, f64> = BTreeMap::new();
        let mut rest = Vec::new();
        for c in components {
            c.validate(num_nodes).map_err(Error::InvalidComponent)?;
            match c {
                Component::GroundCap { node, capacitance } => {
                    *caps.entry(node).or_insert(0.0) += capacitance;
                }
                Component::GroundInd { node, inductance } => {
                    if inds.insert(node, inductance).is_some() {
                        return Err(Error::InvalidComponent(format!(
                            "node {node} has more than one grounded inductor"
                        )));
                    }
                }
                Component::DirectedCoupling { .. } => rest.push(c),
            }
        }
        let mut components: Vec<Component> = inds
            .into_iter()
            .map(|(node, inductance)| Component::GroundInd { node, inductance })
            .chain(
                caps.into_iter()
                    .map(|(node, capacitance)| Component::GroundCap { node, capacitance }),
            )
            .chain(rest)
            .collect();
        components.sort_by_key(Component::sort_key);
        Ok(Self {
            num_nodes,
            components,
            label: label.into(),
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Applies `f` to every capacitance and `g` to every inductance.
    pub fn map_values(
        &self,
        mut f: impl FnMut(f64) -> f64,
        mut g: impl FnMut(f64) -> f64,
    ) -> Result<Self> {
        let comps = self
            .components
            .iter()
            .map(|c| match *c {
                Component::GroundCap { node, capacitance } => Component::GroundCap {
                    node,
                    capacitance: f(capacitance),
                },
                Component::GroundInd { node, inductance } => Component::GroundInd {
                    node,
                    inductance: g(inductance),
                },
                Component::DirectedCoupling {
                    input,
                    driven,
                    capacitance,
                } => Component::DirectedCoupling {
                    input,
                    driven,
                    capacitance: f(capacitance),
                },
            })
            .collect();
        Netlist::new(self.num_nodes, comps, self.label.clone())
    }
}

/// Component values of the unidirectional chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainParams {
    pub n: usize,
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub l: f64,
}

impl ChainParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidComponent(m));
        if self.n == 0 {
            return bad("chain needs at least one site".into());
        }
        for (name, v) in [("C1", self.c1), ("L", self.l)] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive and finite, got {v}"));
            }
        }
        for (name, v) in [("C0", self.c0), ("C2", self.c2), ("C3", self.c3)] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be non-negative and finite, got {v}"));
            }
        }
        if self.n == 1 && self.c2 > 0.0 {
            return bad("a single-site chain cannot carry a boundary coupling".into());
        }
        Ok(())
    }

    /// Boundary coupling `C2 / C1`.
    pub fn delta_t(&self) -> f64 {
        self.c2 / self.c1
    }

    /// `|(C1 + C0) - (C2 + C3)|`; zero for a balanced chain.
    pub fn balance_residual(&self) -> f64 {
        ((self.c1 + self.c0) - (self.c2 + self.c3)).abs()
    }

    pub fn is_balanced(&self, rel_tol: f64) -> bool {
        self.balance_residual() <= rel_tol * (self.c1 + self.c0)
    }

    /// Balanced chain realizing boundary coupling `delta_t`:
    /// `C2 = delta_t * C1`, `C3 = C0 + C1 - C2`.
    pub fn balanced(n: usize, c0: f64, c1: f64, l: f64, delta_t: f64) -> Result<Self> {
        let c2 = delta_t * c1;
        let c3 = (c0 + c1) - c2;
        if c3 < 0.0 {
            return Err(Error::InvalidComponent(format!(
                "delta_t = {delta_t} needs C3 = {c3:e} < 0"
            )));
        }
        let p = Self {
            n,
            c0,
            c1,
            c2,
            c3,
            l,
        };
        p.validate()?;
        Ok(p)
    }

    /// Copy with every capacitance scaled by `1 + lambda_c` and the
    /// inductance by `1 + lambda_l`.
    pub fn scaled(&self, lambda_l: f64, lambda_c: f64) -> Self {
        let s = 1.0 + lambda_c;
        Self {
            n: self.n,
            c0: self.c0 * s,
            c1: self.c1 * s,
            c2: self.c2 * s,
            c3: self.c3 * s,
            l: self.l * (1.0 + lambda_l),
        }
    }
}

/// Node `m < N`: inductor `L`, grounded `C0`, coupling `C1` sensing `m+1`.
/// Node `N`: inductor `L`, grounded `C3`, coupling `C2` sensing node 1.
/// Zero-valued capacitors are omitted, so `C2 = 0` is the open chain.
pub fn build_chain(p: &ChainParams) -> Result<Netlist> {
    p.validate()?;
    let n = p.n;
    let mut comps = Vec::with_capacity(3 * n);
    for m in 1..=n {
        comps.push(Component::GroundInd {
            node: NodeId(m),
            inductance: p.l,
        });
        let ground = if m < n { p.c0 } else { p.c3 };
        if ground > 0.0 {
            comps.push(Component::GroundCap {
                node: NodeId(m),
                capacitance: ground,
            });
        }
    }
    for m in 1..n {
        comps.push(Component::DirectedCoupling {
            input: NodeId(m + 1),
            driven: NodeId(m),
            capacitance: p.c1,
        });
    }
    if p.c2 > 0.0 {
        comps.push(Component::DirectedCoupling {
            input: NodeId(1),
            driven: NodeId(n),
            capacitance: p.c2,
        });
    }
    Netlist::new(n, comps, format!("chain N={n} delta_t={}", p.delta_t()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainMeta {
    pub params: ChainParams,
    pub delta_t: f64,
}

/// Recognizes the chain template produced by [`build_chain`].
pub fn chain_meta(net: &Netlist) -> Result<ChainMeta> {
    let not = |m: String| Err(Error::NotAChain(m));
    let n = net.num_nodes();
    if n < 2 {
        return not("fewer than two nodes".into());
    }
    let mut ind = vec![None; n + 1];
    let mut cap = vec![0.0; n + 1];
    let mut c1: Option<f64> = None;
    let mut c2 = 0.0;
    let mut forward = vec![false; n + 1];
    for c in net.components() {
        match *c {
            Component::GroundInd { node, inductance } => ind[node.0] = Some(inductance),
            Component::GroundCap { node, capacitance } => cap[node.0] = capacitance,
            Component::DirectedCoupling {
                input,
                driven,
                capacitance,
            } => {
                if input.0 == driven.0 + 1 {
                    if forward[driven.0] {
                        return not(format!("duplicate coupling into node {driven}"));
                    }
                    match c1 {
                        Some(v) if v != capacitance => {
                            return not("coupling capacitances differ along the chain".into())
                        }
                        _ => c1 = Some(capacitance),
                    }
                    forward[driven.0] = true;
                } else if input.0 == 1 && driven.0 == n && c2 == 0.0 {
                    c2 = capacitance;
                } else {
                    return not(format!("unexpected coupling {input} -> {driven}"));
                }
            }
        }
    }
    if !(1..n).all(|m| forward[m]) {
        return not("missing nearest-neighbour coupling".into());
    }
    let c1 = c1.expect("n >= 2 with all forward couplings present");
    let l = match ind[1] {
        Some(l) => l,
        None => return not("node 1 has no inductor".into()),
    };
    if ind[1..].iter().any(|&x| x != Some(l)) {
        return not("inductors differ between nodes".into());
    }
    let c0 = cap[1];
    if cap[1..n].iter().any(|&x| x != c0) {
        return not("grounded capacitors differ between bulk nodes".into());
    }
    let params = ChainParams {
        n,
        c0,
        c1,
        c2,
        c3: cap[n],
        l,
    };
    Ok(ChainMeta {
        params,
        delta_t: params.delta_t(),
    })
}

const LABEL_PREFIX: &str = "# label:";

/// Canonical text form. `parse_netlist(&serialize_netlist(n)) == n`.
pub fn serialize_netlist(net: &Netlist) -> String {
    let mut out = String::new();
    if !net.label.is_empty() {
        // labels are single-line
        let label = net.label.replace(['\n', '\r'], " ");
        let _ = writeln!(out, "{LABEL_PREFIX} {label}");
    }
    let _ = writeln!(out, "nodes {}", net.num_nodes);
    for c in &net.components {
        let _ = match *c {
            Component::GroundCap { node, capacitance } => {
                writeln!(out, "capg {node} {capacitance:e}")
            }
            Component::GroundInd { node, inductance } => {
                writeln!(out, "indg {node} {inductance:e}")
            }
            Component::DirectedCoupling {
                input,
                driven,
                capacitance,
            } => writeln!(out, "vfcap {input} {driven} {capacitance:e}"),
        };
    }
    out
}

pub fn parse_netlist(text: &str) -> Result<Netlist> {
    let mut label = String::new();
    let mut num_nodes: Option<usize> = None;
    let mut comps = Vec::new();
    let mut inductor_line: BTreeMap<usize, usize> = BTreeMap::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let err = |message: String| Error::Parse {
            line: line_no,
            message,
        };
        if let Some(rest) = raw.trim_start().strip_prefix(LABEL_PREFIX) {
            if label.is_empty() {
                label = rest.trim().to_string();
            }
            continue;
        }
        let content = raw.split('#').next().unwrap_or("");
        let tokens: Vec<&str> = content.split_whitespace().collect();
        let Some((&directive, args)) = tokens.split_first() else {
            continue;
        };

        let expect_args = |k: usize| {
            if args.len() == k {
                Ok(())
            } else {
                Err(err(format!(
                    "'{directive}' takes {k} argument(s), got {}",
                    args.len()
                )))
            }
        };
        let node_count =
            || num_nodes.ok_or_else(|| err("component before 'nodes' directive".into()));
        let node = |tok: &str, n: usize| -> Result<NodeId> {
            let v: usize = tok
                .parse()
                .map_err(|_| err(format!("invalid node index '{tok}'")))?;
            if v == 0 || v > n {
                return Err(err(format!("node {v} out of range 1..={n}")));
            }
            Ok(NodeId(v))
        };
        let value = |tok: &str| -> Result<f64> {
            let v: f64 = tok
                .parse()
                .map_err(|_| err(format!("invalid number '{tok}'")))?;
            if !v.is_finite() || v <= 0.0 {
                return Err(err(format!("value must be positive, got '{tok}'")));
            }
            Ok(v)
        };

        match directive {
            "nodes" => {
                expect_args(1)?;
                if num_nodes.is_some() {
                    return Err(err("duplicate 'nodes' directive".into()));
                }
                let n: usize = args[0]
                    .parse()
                    .map_err(|_| err(format!("invalid node count '{}'", args[0])))?;
                if n == 0 {
                    return Err(err("node count must be positive".into()));
                }
                num_nodes = Some(n);
            }
            "capg" => {
                expect_args(2)?;
                let n = node_count()?;
                comps.push(Component::GroundCap {
                    node: node(args[0], n)?,
                    capacitance: value(args[1])?,
                });
            }
            "indg" => {
                expect_args(2)?;
                let n = node_count()?;
                let id = node(args[0], n)?;
                if let Some(prev) = inductor_line.insert(id.0, line_no) {
                    return Err(err(format!(
                        "second inductor on node {id} (first on line {prev})"
                    )));
                }
                comps.push(Component::GroundInd {
                    node: id,
                    inductance: value(args[1])?,
                });
            }
            "vfcap" => {
                expect_args(3)?;
                let n = node_count()?;
                let input = node(args[0], n)?;
                let driven = node(args[1], n)?;
                if input == driven {
                    return Err(err(format!("self-coupling on node {input}")));
                }
                comps.push(Component::DirectedCoupling {
                    input,
                    driven,
                    capacitance: value(args[2])?,
                });
            }
            other => return Err(err(format!("unknown directive '{other}'"))),
        }
    }

    let n = num_nodes.ok_or(Error::Parse {
        line: text.lines().count().max(1),
        message: "missing 'nodes' directive".into(),
    })?;
    Netlist::new(n, comps, label)
}
