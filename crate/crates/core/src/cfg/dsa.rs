//! Dynamic single assignment: every assignment defines a fresh version and
//! the two branches of a decision agree on versions at the join.

use super::{Assignment, Cfg, NodeId, NodeKind};
use crate::ir::{ConstraintId, LinTerm, SsaName, RESULT_BASE};
use std::collections::BTreeMap;

#[derive(Clone, Debug, Default)]
struct State {
    /// Current version of every definitely-assigned variable.
    cur: BTreeMap<String, u32>,
    /// Highest version handed out so far on this path.
    counter: BTreeMap<String, u32>,
}

impl State {
    fn fresh(&mut self, base: &str, initializer: bool) -> u32 {
        let v = match self.counter.get(base) {
            None if initializer => 0,
            None => 1,
            Some(c) => c + 1,
        };
        self.counter.insert(base.to_string(), v);
        self.cur.insert(base.to_string(), v);
        v
    }

    fn resolve(&self, name: &SsaName) -> SsaName {
        SsaName::new(name.base.clone(), self.cur.get(&name.base).copied().unwrap_or(0))
    }
}

/// Copies that must be appended to each side of a join.
type Copies = Vec<(String, u32, u32)>;

fn merge(a: &State, b: &State) -> (State, Copies, Copies) {
    let mut counter = a.counter.clone();
    for (k, v) in &b.counter {
        let slot = counter.entry(k.clone()).or_insert(*v);
        *slot = (*slot).max(*v);
    }
    let mut cur = BTreeMap::new();
    let (mut to_a, mut to_b) = (Vec::new(), Vec::new());
    for (base, va) in &a.cur {
        let Some(vb) = b.cur.get(base) else { continue };
        let v = (*va).max(*vb);
        if va < vb {
            to_a.push((base.clone(), v, *va));
        } else if vb < va {
            to_b.push((base.clone(), v, *vb));
        }
        cur.insert(base.clone(), v);
    }
    (State { cur, counter }, to_a, to_b)
}

/// Rewrites a CFG produced by `build_cfg` into DSA form. Synthetic copies
/// are appended to the branch-tail block that lacks the newest version and
/// carry the governing decision's location.
pub fn to_dsa(cfg: &Cfg) -> Cfg {
    assert!(!cfg.in_dsa, "CFG is already in DSA form");
    let mut out = cfg.clone();
    let mut states: Vec<Option<State>> = vec![None; out.nodes.len()];
    let mut result = cfg.result.clone();

    for idx in 0..out.nodes.len() {
        let id = NodeId(idx);
        let preds = out.predecessors(id);
        let mut st = match preds.as_slice() {
            [] => {
                let mut s = State::default();
                for p in &out.params {
                    s.cur.insert(p.name.clone(), 0);
                    s.counter.insert(p.name.clone(), 0);
                }
                s
            }
            [p] => states[p.0].clone().expect("predecessors come first"),
            [a, b] => {
                let sa = states[a.0].as_ref().expect("predecessors come first");
                let sb = states[b.0].as_ref().expect("predecessors come first");
                let (merged, to_a, to_b) = merge(sa, sb);
                let decision = out.joins[&id];
                let loc = out.decision_loc(decision).expect("join governed by a decision");
                for (tail, copies) in [(*a, to_a), (*b, to_b)] {
                    let NodeKind::Block(items) = &mut out.nodes[tail.0].kind else {
                        panic!("branch tail {tail} is not a block");
                    };
                    for (base, v, from) in copies {
                        items.push(Assignment {
                            id: ConstraintId(0),
                            target: SsaName::new(base.clone(), v),
                            rhs: LinTerm::var(SsaName::new(base, from)),
                            loc,
                            synthetic: true,
                            initializer: false,
                        });
                    }
                }
                merged
            }
            _ => panic!("node {id} has more than two predecessors"),
        };

        match &mut out.nodes[idx].kind {
            NodeKind::Block(items) => {
                for a in items.iter_mut() {
                    a.rhs = a.rhs.rename(|n| st.resolve(n));
                    let v = st.fresh(&a.target.base, a.initializer);
                    a.target = SsaName::new(a.target.base.clone(), v);
                }
            }
            NodeKind::Decision { guard, .. } => {
                *guard = guard.rename(&mut |n| st.resolve(n));
            }
            NodeKind::Entry | NodeKind::Exit => {}
        }
        if id == out.return_node {
            result = if cfg.result_is_alias {
                st.resolve(&cfg.result)
            } else {
                let NodeKind::Block(items) = &out.nodes[idx].kind else { unreachable!() };
                items.last().expect("return assignment").target.clone()
            };
        }
        states[idx] = Some(st);
    }

    let res = result.clone();
    out.postcondition = cfg.postcondition.rename(&mut |n: &SsaName| {
        if n.base == RESULT_BASE {
            res.clone()
        } else {
            n.clone()
        }
    });
    out.result = result;
    out.in_dsa = true;
    super::number_assignments(&mut out.nodes);
    out
}
