//! Shared helpers for the integration and acceptance suites.
#![allow(dead_code)] // not every suite uses every helper

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use locfaults_core::bmc::Counterexample;
use locfaults_core::cfg::{
    Assign, AssignBlock, AssignOrigin, CExpr, Cfg, CondNode, Node, NodeId, SourceCoord, VarRef,
};
use locfaults_core::frontend::BinOp;

pub fn corpus_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

pub fn corpus_path(name: &str) -> PathBuf {
    corpus_dir().join(name)
}

pub fn ce_ints(pairs: &[(&str, i64)]) -> Counterexample {
    Counterexample {
        ints: pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        arrays: BTreeMap::new(),
    }
}

pub fn ce_array(name: &str, values: &[i64]) -> Counterexample {
    Counterexample {
        ints: BTreeMap::new(),
        arrays: std::iter::once((name.to_string(), values.to_vec())).collect(),
    }
}

/// The abstract condition graph used to pin the node-marking behavior:
/// sixteen conditions whose labels double as source lines, wired so that
/// flipping condition 7 after the flip chains 1-2-3-4 or 8-9-11-12 repairs
/// the run, while the longer chain 8-13-14-15-16 reaches 7 only with five
/// prior flips.
///
/// Every condition `c` tests `qc == 1` where an entry block copies `qc`
/// from input `pc` (all zero in the counterexample), and every arc into the
/// postcondition passes through a block setting `w`; only the deviated
/// branch of condition 7 sets it to 1, and the postcondition is `w == 1`.
pub fn marking_fixture() -> (Cfg, Counterexample) {
    const CONDS: [u32; 16] = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16];
    fn push(nodes: &mut Vec<Node>, n: Node) -> NodeId {
        let id = NodeId(nodes.len() as u32);
        nodes.push(n);
        id
    }

    let mut nodes: Vec<Node> = Vec::new();
    let post = push(&mut nodes, Node::Post);

    // terminal blocks: w_0 = 0 or 1, then POST
    fn w_block(nodes: &mut Vec<Node>, post: NodeId, wline: &mut u32, value: i64) -> NodeId {
        *wline += 1;
        push(
            nodes,
            Node::Block(AssignBlock {
                assigns: vec![Assign {
                    target: VarRef::versioned("w", 0),
                    index: None,
                    prev_array: None,
                    value: CExpr::Const(value),
                    coord: Some(SourceCoord::plain(*wline)),
                    origin: AssignOrigin::Source,
                }],
                next: post,
            }),
        )
    }
    let mut wline = 300u32;

    // reserve the sixteen condition nodes up front so wiring can forward-
    // reference them
    let mut cond_ids: BTreeMap<u32, NodeId> = BTreeMap::new();
    for c in CONDS {
        let id = push(&mut nodes, Node::Post); // placeholder
        cond_ids.insert(c, id);
    }

    // wiring: (condition, then-target, else-target); `T(n)` = condition n,
    // `W0`/`W1` = fresh terminal block
    enum Target {
        Cond(u32),
        W0,
        W1,
    }
    use Target::*;
    let wiring: [(u32, Target, Target); 16] = [
        (1, Cond(2), Cond(8)),
        (2, Cond(3), W0),
        (3, Cond(4), W0),
        (4, Cond(5), W0),
        (5, W0, Cond(6)),
        (6, W0, Cond(7)),
        (7, W1, W0),
        (8, Cond(9), W0),
        (9, Cond(10), Cond(13)),
        (10, W0, Cond(11)),
        (11, Cond(12), W0),
        (12, Cond(7), W0),
        (13, Cond(14), W0),
        (14, Cond(15), W0),
        (15, Cond(16), W0),
        (16, Cond(7), W0),
    ];
    for (c, then_t, else_t) in wiring {
        let resolve = |nodes: &mut Vec<Node>, wline: &mut u32, t: &Target| -> NodeId {
            match t {
                Cond(n) => cond_ids[n],
                W0 => w_block(nodes, post, wline, 0),
                W1 => w_block(nodes, post, wline, 1),
            }
        };
        let then_to = resolve(&mut nodes, &mut wline, &then_t);
        let else_to = resolve(&mut nodes, &mut wline, &else_t);
        let id = cond_ids[&c];
        nodes[id.index()] = Node::Cond(CondNode {
            expr: CExpr::bin(
                BinOp::Eq,
                CExpr::Var(VarRef::versioned(&format!("q{c}"), 0)),
                CExpr::Const(1),
            ),
            line: c,
            loop_ctx: Vec::new(),
            then_to,
            else_to,
            is_loop: false,
        });
    }

    // entry block: q{c}_0 = p{c}_0 for every condition
    let entry_assigns: Vec<Assign> = CONDS
        .iter()
        .map(|c| Assign {
            target: VarRef::versioned(&format!("q{c}"), 0),
            index: None,
            prev_array: None,
            value: CExpr::Var(VarRef::versioned(&format!("p{c}"), 0)),
            coord: Some(SourceCoord::plain(100 + c)),
            origin: AssignOrigin::Source,
        })
        .collect();
    let entry = push(
        &mut nodes,
        Node::Block(AssignBlock { assigns: entry_assigns, next: cond_ids[&1] }),
    );

    let cfg = Cfg {
        nodes,
        entry,
        post,
        post_expr: CExpr::bin(
            BinOp::Eq,
            CExpr::Var(VarRef::versioned("w", 0)),
            CExpr::Const(1),
        ),
        requires_expr: None,
        return_expr: CExpr::Const(0),
        params: CONDS.iter().map(|c| (format!("p{c}"), None)).collect(),
        array_lengths: BTreeMap::new(),
        is_dsa: true,
    };
    let ce = Counterexample {
        ints: CONDS.iter().map(|c| (format!("p{c}"), 0i64)).collect(),
        arrays: BTreeMap::new(),
    };
    (cfg, ce)
}
