//! Control-flow graph of a loop-free function and its dynamic single
//! assignment form.
//!
//! The graph is structured: every `if` becomes one `Decision` node whose two
//! branches each end in a `Block` (possibly empty) that flows into the join
//! node. Those branch-tail blocks are where the DSA pass places synthetic
//! copies.

mod dot;
mod dsa;

pub use dot::to_dot;
pub use dsa::to_dsa;

use crate::frontend::{BoolExpr, Function, Param, SourceLoc, Stmt};
use crate::ir::{ConstraintId, Formula, LinError, LinTerm, SsaName, RESULT_BASE};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub usize);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Then,
    Else,
}

impl Branch {
    pub fn flipped(self) -> Branch {
        match self {
            Branch::Then => Branch::Else,
            Branch::Else => Branch::Then,
        }
    }

    pub fn from_bool(taken: bool) -> Branch {
        if taken {
            Branch::Then
        } else {
            Branch::Else
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Branch::Then => "then",
            Branch::Else => "else",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EdgeLabel {
    Next,
    Then,
    Else,
}

impl From<Branch> for EdgeLabel {
    fn from(b: Branch) -> Self {
        match b {
            Branch::Then => EdgeLabel::Then,
            Branch::Else => EdgeLabel::Else,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Assignment {
    pub id: ConstraintId,
    pub target: SsaName,
    pub rhs: LinTerm,
    pub loc: SourceLoc,
    /// Inserted by the DSA pass to unify versions at a join.
    pub synthetic: bool,
    /// Declaration initializer (`int k = 0`); takes version 0.
    pub initializer: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NodeKind {
    Entry,
    Exit,
    Block(Vec<Assignment>),
    Decision { guard: Formula, loc: SourceLoc },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CfgNode {
    pub id: NodeId,
    pub kind: NodeKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Edge {
    pub from: NodeId,
    pub to: NodeId,
    pub label: EdgeLabel,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cfg {
    pub name: String,
    pub params: Vec<Param>,
    pub nodes: Vec<CfgNode>,
    pub edges: Vec<Edge>,
    pub entry: NodeId,
    pub exit: NodeId,
    /// Over version-0 parameters and `result`.
    pub postcondition: Formula,
    pub postcondition_loc: SourceLoc,
    pub precondition: Option<Formula>,
    /// Name holding the returned value. Before DSA this is either the
    /// returned variable or `\result`.
    pub result: SsaName,
    /// `return x;` binds the result to `x` directly, without a constraint.
    pub result_is_alias: bool,
    pub return_node: NodeId,
    /// Decision nodes in depth-first (source) order.
    pub decision_order: Vec<NodeId>,
    /// Join node -> the decision whose branches meet there.
    pub joins: BTreeMap<NodeId, NodeId>,
    pub in_dsa: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum CfgError {
    #[error(transparent)]
    Lin(#[from] LinError),
}

impl Cfg {
    pub fn node(&self, id: NodeId) -> &CfgNode {
        &self.nodes[id.0]
    }

    pub fn successors(&self, id: NodeId) -> impl Iterator<Item = (NodeId, EdgeLabel)> + '_ {
        self.edges.iter().filter(move |e| e.from == id).map(|e| (e.to, e.label))
    }

    pub fn successor(&self, id: NodeId, label: EdgeLabel) -> Option<NodeId> {
        self.successors(id).find(|(_, l)| *l == label).map(|(n, _)| n)
    }

    pub fn predecessors(&self, id: NodeId) -> Vec<NodeId> {
        self.edges.iter().filter(|e| e.to == id).map(|e| e.from).collect()
    }

    pub fn decision_loc(&self, id: NodeId) -> Option<SourceLoc> {
        match &self.node(id).kind {
            NodeKind::Decision { loc, .. } => Some(*loc),
            _ => None,
        }
    }

    pub fn guard(&self, id: NodeId) -> Option<&Formula> {
        match &self.node(id).kind {
            NodeKind::Decision { guard, .. } => Some(guard),
            _ => None,
        }
    }

    pub fn assignments(&self) -> impl Iterator<Item = &Assignment> {
        self.nodes.iter().flat_map(|n| match &n.kind {
            NodeKind::Block(a) => a.as_slice(),
            _ => &[],
        })
    }

    pub fn assignment_count(&self) -> usize {
        self.assignments().count()
    }

    /// Input constraints are numbered after all assignments.
    pub fn input_constraint_id(&self, param_index: usize) -> ConstraintId {
        ConstraintId((self.assignment_count() + param_index) as u32)
    }

    pub fn postcondition_constraint_id(&self) -> ConstraintId {
        ConstraintId((self.assignment_count() + self.params.len()) as u32)
    }

    pub fn guard_constraint_id(&self, decision: NodeId, branch: Branch) -> ConstraintId {
        let idx = self
            .decision_order
            .iter()
            .position(|d| *d == decision)
            .expect("not a decision node");
        let base = self.assignment_count() + self.params.len() + 1;
        let b = match branch {
            Branch::Then => 0,
            Branch::Else => 1,
        };
        ConstraintId((base + 2 * idx + b) as u32)
    }

    /// Every entry-to-exit path as the sequence of (node, label taken out of it).
    pub fn all_paths(&self) -> Vec<Vec<(NodeId, EdgeLabel)>> {
        let mut out = Vec::new();
        let mut stack = vec![(self.entry, Vec::new())];
        while let Some((node, path)) = stack.pop() {
            if node == self.exit {
                out.push(path);
                continue;
            }
            let mut succ: Vec<_> = self.successors(node).collect();
            succ.reverse();
            for (next, label) in succ {
                let mut p = path.clone();
                p.push((node, label));
                stack.push((next, p));
            }
        }
        out
    }

    /// Checks the structural invariants: out-degrees by kind, acyclicity
    /// and reachability.
    pub fn validate(&self) -> Result<(), String> {
        for n in &self.nodes {
            let labels: Vec<EdgeLabel> = self.successors(n.id).map(|(_, l)| l).collect();
            let ok = match n.kind {
                NodeKind::Exit => labels.is_empty(),
                NodeKind::Entry | NodeKind::Block(_) => labels == [EdgeLabel::Next],
                NodeKind::Decision { .. } => {
                    labels.len() == 2 && labels.contains(&EdgeLabel::Then) && labels.contains(&EdgeLabel::Else)
                }
            };
            if !ok {
                return Err(format!("node {} has out-edges {labels:?}", n.id));
            }
        }
        for e in &self.edges {
            if e.to.0 <= e.from.0 {
                return Err(format!("edge {} -> {} is not forward", e.from, e.to));
            }
        }
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![self.entry];
        while let Some(n) = stack.pop() {
            if std::mem::replace(&mut seen[n.0], true) {
                continue;
            }
            stack.extend(self.successors(n).map(|(s, _)| s));
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(format!("node n{i} is unreachable"));
        }
        Ok(())
    }
}

struct Builder {
    nodes: Vec<CfgNode>,
    edges: Vec<Edge>,
    pending: Vec<(NodeId, EdgeLabel)>,
    open_block: Option<NodeId>,
    pending_join: Option<NodeId>,
    joins: BTreeMap<NodeId, NodeId>,
    decision_order: Vec<NodeId>,
    return_node: Option<NodeId>,
    result: Option<(SsaName, bool)>,
}

fn plain(name: &str) -> SsaName {
    SsaName::new(name, 0)
}

impl Builder {
    fn new_node(&mut self, kind: NodeKind) -> NodeId {
        let id = NodeId(self.nodes.len());
        self.nodes.push(CfgNode { id, kind });
        for (from, label) in self.pending.drain(..) {
            self.edges.push(Edge { from, to: id, label });
        }
        if let Some(d) = self.pending_join.take() {
            self.joins.insert(id, d);
        }
        id
    }

    fn block(&mut self) -> NodeId {
        if let Some(b) = self.open_block {
            return b;
        }
        let b = self.new_node(NodeKind::Block(Vec::new()));
        self.pending.push((b, EdgeLabel::Next));
        self.open_block = Some(b);
        b
    }

    fn push_assignment(&mut self, target: &str, rhs: LinTerm, loc: SourceLoc, initializer: bool) {
        let b = self.block();
        if let NodeKind::Block(items) = &mut self.nodes[b.0].kind {
            items.push(Assignment {
                id: ConstraintId(0),
                target: plain(target),
                rhs,
                loc,
                synthetic: false,
                initializer,
            });
        }
    }

    fn branch(&mut self, from: NodeId, label: EdgeLabel, stmts: &[Stmt]) -> Result<NodeId, CfgError> {
        self.pending = vec![(from, label)];
        self.open_block = None;
        self.stmts(stmts)?;
        let tail = self.block();
        self.open_block = None;
        self.pending.clear();
        Ok(tail)
    }

    fn stmts(&mut self, stmts: &[Stmt]) -> Result<(), CfgError> {
        for s in stmts {
            match s {
                Stmt::Decl { init: None, .. } => {}
                Stmt::Decl {
                    name, init: Some(e), loc,
                } => {
                    let rhs = LinTerm::from_expr(e, &mut |n| plain(n), None)?;
                    self.push_assignment(name, rhs, *loc, true);
                }
                Stmt::Assign { target, rhs, loc } => {
                    let rhs = LinTerm::from_expr(rhs, &mut |n| plain(n), None)?;
                    self.push_assignment(target, rhs, *loc, false);
                }
                Stmt::If {
                    cond,
                    then_branch,
                    else_branch,
                    loc,
                } => {
                    self.open_block = None;
                    let guard = Formula::from_bool(cond, &mut |n| plain(n), None)?;
                    let d = self.new_node(NodeKind::Decision { guard, loc: *loc });
                    self.decision_order.push(d);
                    let then_tail = self.branch(d, EdgeLabel::Then, then_branch)?;
                    let else_tail = self.branch(d, EdgeLabel::Else, else_branch)?;
                    self.pending = vec![(then_tail, EdgeLabel::Next), (else_tail, EdgeLabel::Next)];
                    self.pending_join = Some(d);
                }
                Stmt::Return { expr, loc } => {
                    self.open_block = None;
                    let node = self.block();
                    self.return_node = Some(node);
                    match expr.as_var() {
                        Some(x) => self.result = Some((plain(x), true)),
                        None => {
                            let rhs = LinTerm::from_expr(expr, &mut |n| plain(n), None)?;
                            self.push_assignment(RESULT_BASE, rhs, *loc, false);
                            self.result = Some((plain(RESULT_BASE), false));
                        }
                    }
                    self.open_block = None;
                }
            }
        }
        Ok(())
    }
}

fn number_assignments(nodes: &mut [CfgNode]) {
    let mut next = 0u32;
    for n in nodes {
        if let NodeKind::Block(items) = &mut n.kind {
            for a in items {
                a.id = ConstraintId(next);
                next += 1;
            }
        }
    }
}

fn annotation(b: &BoolExpr) -> Result<Formula, CfgError> {
    let result = plain(RESULT_BASE);
    Ok(Formula::from_bool(b, &mut |n| plain(n), Some(&result))?)
}

/// Lowers a (typechecked) function to a structured CFG. Variables are not
/// yet versioned: every name carries version 0 until [`to_dsa`] runs.
pub fn build_cfg(f: &Function) -> Result<Cfg, CfgError> {
    let mut b = Builder {
        nodes: Vec::new(),
        edges: Vec::new(),
        pending: Vec::new(),
        open_block: None,
        pending_join: None,
        joins: BTreeMap::new(),
        decision_order: Vec::new(),
        return_node: None,
        result: None,
    };
    let entry = b.new_node(NodeKind::Entry);
    b.pending.push((entry, EdgeLabel::Next));
    b.stmts(&f.body)?;
    let exit = b.new_node(NodeKind::Exit);
    let (result, result_is_alias) = b.result.expect("parser guarantees a trailing return");
    number_assignments(&mut b.nodes);
    Ok(Cfg {
        name: f.name.clone(),
        params: f.params.clone(),
        nodes: b.nodes,
        edges: b.edges,
        entry,
        exit,
        postcondition: annotation(&f.postcondition)?,
        postcondition_loc: f.postcondition.loc,
        precondition: f.precondition.as_ref().map(annotation).transpose()?,
        result,
        result_is_alias,
        return_node: b.return_node.expect("return node"),
        decision_order: b.decision_order,
        joins: b.joins,
        in_dsa: false,
    })
}

/// `build_cfg` followed by `to_dsa`.
pub fn lower(f: &Function) -> Result<Cfg, CfgError> {
    Ok(to_dsa(&build_cfg(f)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_program;

    fn cfg_of(src: &str) -> Cfg {
        build_cfg(&parse_program(src).unwrap()).unwrap()
    }

    fn decisions(g: &Cfg) -> usize {
        g.nodes
            .iter()
            .filter(|n| matches!(n.kind, NodeKind::Decision { .. }))
            .count()
    }

    #[test]
    fn abs_minus_has_two_decisions() {
        let g = cfg_of(include_str!("../../../../corpus/absminus.src"));
        g.validate().unwrap();
        assert_eq!(decisions(&g), 2);
        let guards: Vec<String> = g.decision_order.iter().map(|d| g.guard(*d).unwrap().to_string()).collect();
        assert_eq!(guards, ["i_0 <= j_0", "k_0 = 1 && i_0 != j_0"]);
        let lines: Vec<u32> = g.decision_order.iter().map(|d| g.decision_loc(*d).unwrap().line).collect();
        assert_eq!(lines, [9, 11]);
        assert_eq!(g.all_paths().len(), 4);
        assert!(g.result_is_alias);
    }

    #[test]
    fn straight_line_function() {
        let g = cfg_of("/*@ ensures \\result == x; */ int f(int x){ return x; }");
        g.validate().unwrap();
        assert!(g.decision_order.is_empty());
        let kinds: Vec<_> = g.nodes.iter().map(|n| &n.kind).collect();
        assert!(matches!(kinds.as_slice(), [NodeKind::Entry, NodeKind::Block(_), NodeKind::Exit]));
        assert_eq!(g.edges.len(), 2);
    }

    #[test]
    fn nested_ifs_match_hand_built_graph() {
        let src = "/*@ ensures \\result == 0; */
int f(int x, int y) {
  int r = 0;
  if (x > 0) {
    if (y > 0) { r = 1; } else { r = 2; }
  } else {
    if (y > 0) { r = 3; }
  }
  return r;
}";
        let g = cfg_of(src);
        g.validate().unwrap();
        assert_eq!(decisions(&g), 3);
        assert_eq!(g.all_paths().len(), 4);
        // Hand-built expected graph (ids in creation order):
        // 0 entry, 1 [r=0], 2 D(x>0), 3 D(y>0), 4 [r=1], 5 [r=2], 6 tail(then of 2),
        // 7 D(y>0), 8 [r=3], 9 [] (else of 7), 10 tail(else of 2), 11 return, 12 exit
        let expected: Vec<(usize, usize, EdgeLabel)> = vec![
            (0, 1, EdgeLabel::Next),
            (1, 2, EdgeLabel::Next),
            (2, 3, EdgeLabel::Then),
            (3, 4, EdgeLabel::Then),
            (3, 5, EdgeLabel::Else),
            (4, 6, EdgeLabel::Next),
            (5, 6, EdgeLabel::Next),
            (2, 7, EdgeLabel::Else),
            (7, 8, EdgeLabel::Then),
            (7, 9, EdgeLabel::Else),
            (8, 10, EdgeLabel::Next),
            (9, 10, EdgeLabel::Next),
            (6, 11, EdgeLabel::Next),
            (10, 11, EdgeLabel::Next),
            (11, 12, EdgeLabel::Next),
        ];
        let mut got: Vec<(usize, usize, EdgeLabel)> = g.edges.iter().map(|e| (e.from.0, e.to.0, e.label)).collect();
        let mut want = expected;
        got.sort();
        want.sort();
        assert_eq!(got, want);
        assert_eq!(g.decision_order, [NodeId(2), NodeId(3), NodeId(7)]);
        assert_eq!(g.joins.get(&NodeId(6)), Some(&NodeId(3)));
        assert_eq!(g.joins.get(&NodeId(10)), Some(&NodeId(7)));
        assert_eq!(g.joins.get(&NodeId(11)), Some(&NodeId(2)));
    }

    #[test]
    fn non_variable_return_assigns_result() {
        let g = cfg_of("/*@ ensures \\result == 0; */ int f(int x){ return x + 1; }");
        assert!(!g.result_is_alias);
        let a: Vec<_> = g.assignments().collect();
        assert_eq!(a.len(), 1);
        assert_eq!(a[0].target.base, RESULT_BASE);
    }

    #[test]
    fn constraint_ids_are_distinct() {
        let g = lower(&parse_program(include_str!("../../../../corpus/absminus.src")).unwrap()).unwrap();
        let mut ids: Vec<ConstraintId> = g.assignments().map(|a| a.id).collect();
        ids.extend((0..g.params.len()).map(|i| g.input_constraint_id(i)));
        ids.push(g.postcondition_constraint_id());
        for d in &g.decision_order {
            ids.push(g.guard_constraint_id(*d, Branch::Then));
            ids.push(g.guard_constraint_id(*d, Branch::Else));
        }
        let n = ids.len();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), n);
    }
}
