//! Finite circular proof objects: the validity checker (back-edge maps and
//! their goodness), bounded unfolding, an independent trace-based oracle for
//! cycle soundness, and line-oriented (de)serialization.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::annotation::{
    check_saf_instance, is_annotated_axiom, AnnMember, AnnotatedSequent, Name, NameWord,
    SafRuleTag,
};
use crate::calculus::{trace_step, Member, OriginalityContext, RuleTag, TraceKind};
use crate::semantics::sccs;
use crate::syntax::{Formula, VariableOrder};

/// A node of a proof tree.  Leaves have no rule and no premises.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ProofNode {
    pub sequent: AnnotatedSequent,
    pub rule: Option<SafRuleTag>,
    pub premises: Vec<usize>,
}

/// A finite proof tree with back edges.  Node 0 is the root.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Proof {
    /// The root member `@'r rho`.
    pub root_member: Member,
    /// The linear order on the bound variables of `rho`.
    pub order: VariableOrder,
    pub nodes: Vec<ProofNode>,
    /// Partial map from leaves to proper ancestors with identical labels.
    pub backedges: BTreeMap<usize, usize>,
}

/// Result of checking a proof.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Verdict {
    Accepted,
    Rejected { node: usize, reason: String },
}

impl Verdict {
    pub fn is_accepted(&self) -> bool {
        matches!(self, Verdict::Accepted)
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Accepted => write!(f, "accepted"),
            Verdict::Rejected { node, reason } => {
                write!(f, "rejected at node {node}: {reason}")
            }
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ProofError {
    #[error("proof file error on line {0}: {1}")]
    Parse(usize, String),
    #[error("node {0} referenced but never defined")]
    Dangling(usize),
    #[error("node {0} has two parents")]
    TwoParents(usize),
    #[error("back edge target {0} is not a proper ancestor of leaf {1}")]
    NotAncestor(usize, usize),
    #[error("missing root node 0")]
    NoRoot,
}

impl Proof {
    pub fn parent_of(&self, mut v: usize) -> Option<usize> {
        for (i, n) in self.nodes.iter().enumerate() {
            if n.premises.contains(&v) {
                v = i;
                return Some(v);
            }
        }
        None
    }

    /// Nodes on the path from `anc` to `desc`, inclusive, root-side first.
    pub fn path(&self, anc: usize, desc: usize) -> Option<Vec<usize>> {
        let mut rev = vec![desc];
        let mut cur = desc;
        while cur != anc {
            cur = self.parent_of(cur)?;
            rev.push(cur);
        }
        rev.reverse();
        Some(rev)
    }

    pub fn is_leaf(&self, v: usize) -> bool {
        self.nodes[v].premises.is_empty()
    }
}

/// The highest-ranking name contained in the control of every node on the
/// cycle path of back-edged leaf `l` and reset at least once on that path.
pub fn goodness(p: &Proof, l: usize) -> Option<Name> {
    let target = *p.backedges.get(&l)?;
    let path = p.path(target, l)?;
    // Names alive on the whole path.
    let mut alive: BTreeSet<Name> = p.nodes[path[0]]
        .sequent
        .control
        .0
        .iter()
        .cloned()
        .collect();
    for &v in &path[1..] {
        let ctl: BTreeSet<Name> = p.nodes[v].sequent.control.0.iter().cloned().collect();
        alive = alive.intersection(&ctl).cloned().collect();
    }
    // Names reset somewhere on the path (the leaf itself applies no rule).
    let mut reset: BTreeSet<Name> = BTreeSet::new();
    for &v in &path[..path.len() - 1] {
        if let Some(SafRuleTag::Reset { name }) = &p.nodes[v].rule {
            reset.insert(name.clone());
        }
    }
    alive
        .intersection(&reset)
        .cloned()
        .min_by_key(|n| n.rank_key(&p.order))
}

/// Check a proof end to end: root shape, every rule instance, every leaf,
/// and goodness of every back edge.
pub fn check_proof(p: &Proof, ctx: &OriginalityContext) -> Verdict {
    let reject = |node: usize, reason: String| Verdict::Rejected { node, reason };
    if p.nodes.is_empty() {
        return reject(0, "empty proof".into());
    }
    if ctx.root != p.root_member {
        return reject(0, "originality context does not match the root member".into());
    }
    // Root label must be the empty-control, empty-annotation root sequent.
    let want_root = AnnotatedSequent::new(
        NameWord::empty(),
        BTreeSet::from([AnnMember::new(p.root_member.clone(), NameWord::empty())]),
    );
    if p.nodes[0].sequent != want_root {
        return reject(0, format!("root label must be `{want_root}`"));
    }
    for (v, node) in p.nodes.iter().enumerate() {
        match (&node.rule, node.premises.is_empty()) {
            (Some(tag), _) => {
                let prems: Vec<AnnotatedSequent> = node
                    .premises
                    .iter()
                    .map(|&c| p.nodes[c].sequent.clone())
                    .collect();
                if let Err(e) = check_saf_instance(&node.sequent, tag, &prems, ctx, &p.order) {
                    return reject(v, format!("rule instance error ({}): {e}", tag.name()));
                }
            }
            (None, false) => {
                return reject(v, "node has premises but no rule".into());
            }
            (None, true) => {
                if is_annotated_axiom(&node.sequent) {
                    continue;
                }
                let Some(&target) = p.backedges.get(&v) else {
                    return reject(v, "leaf is neither an axiom nor back-edged".into());
                };
                if target == v || p.path(target, v).is_none() {
                    return reject(v, format!("back edge target {target} is not a proper ancestor"));
                }
                if p.nodes[target].sequent != node.sequent {
                    return reject(v, format!("label mismatch with back edge target {target}"));
                }
                if goodness(p, v).is_none() {
                    return reject(v, "no good name for the back edge".into());
                }
            }
        }
    }
    // Back edges must start at leaves.
    for (&l, _) in &p.backedges {
        if l >= p.nodes.len() || !p.is_leaf(l) {
            return reject(l.min(p.nodes.len().saturating_sub(1)), "back edge source is not a leaf".into());
        }
    }
    Verdict::Accepted
}

// ---------------------------------------------------------------------------
// Unfolding

/// A finite prefix of the infinite unfolding of a proof with back edges.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct UnfoldTree {
    pub sequent: AnnotatedSequent,
    pub rule: Option<String>,
    pub children: Vec<UnfoldTree>,
}

/// The depth-`depth` prefix of the infinite unfolding: back-edged leaves at
/// depth below the bound continue with a copy of the subtree at their target.
pub fn unfold_proof(p: &Proof, depth: usize) -> UnfoldTree {
    fn go(p: &Proof, v: usize, depth: usize) -> UnfoldTree {
        let node = &p.nodes[v];
        let mut v = v;
        let mut node = node;
        // Follow the back edge, if any, before expanding children.
        if depth > 0 {
            if let Some(&t) = p.backedges.get(&v) {
                v = t;
                node = &p.nodes[v];
            }
        }
        let children = if depth == 0 {
            Vec::new()
        } else {
            node.premises
                .iter()
                .map(|&c| go(p, c, depth - 1))
                .collect()
        };
        UnfoldTree {
            sequent: node.sequent.clone(),
            rule: node.rule.as_ref().map(|r| r.name().to_string()),
            children,
        }
    }
    go(p, 0, depth)
}

impl UnfoldTree {
    pub fn render(&self) -> String {
        fn go(t: &UnfoldTree, indent: usize, out: &mut String) {
            out.push_str(&"  ".repeat(indent));
            out.push_str(&t.sequent.to_string());
            if let Some(r) = &t.rule {
                out.push_str(&format!("   [{r}]"));
            }
            out.push('\n');
            for c in &t.children {
                go(c, indent + 1, out);
            }
        }
        let mut out = String::new();
        go(self, 0, &mut out);
        out
    }

    pub fn size(&self) -> usize {
        1 + self.children.iter().map(|c| c.size()).sum::<usize>()
    }
}

// ---------------------------------------------------------------------------
// Lasso trace oracle

/// Strip an annotated rule tag to the plain-calculus tag, when the rule has a
/// plain counterpart.  Structural rules (Exp, Weak, Thin, Reset) admit only
/// silent trace steps and map to `None`.
fn plain_tag(tag: &SafRuleTag) -> Option<RuleTag> {
    match tag {
        SafRuleTag::And { principal } => Some(RuleTag::And {
            principal: principal.member.clone(),
        }),
        SafRuleTag::Or { principal } => Some(RuleTag::Or {
            principal: principal.member.clone(),
        }),
        SafRuleTag::Eq { principal, side } => Some(RuleTag::Eq {
            principal: principal.member.clone(),
            side: side.member.clone(),
        }),
        SafRuleTag::Com { principal } => Some(RuleTag::Com {
            principal: principal.member.clone(),
        }),
        SafRuleTag::Glob { principal } => Some(RuleTag::Glob {
            principal: principal.member.clone(),
        }),
        SafRuleTag::Mod { principal, fresh } => Some(RuleTag::Mod {
            principal: principal.member.clone(),
            fresh: fresh.clone(),
        }),
        SafRuleTag::Eta { principal } | SafRuleTag::Rec { principal, .. } => {
            Some(RuleTag::Eta {
                principal: principal.member.clone(),
            })
        }
        SafRuleTag::Reset { .. } | SafRuleTag::Exp | SafRuleTag::Weak | SafRuleTag::Thin => None,
    }
}

/// Does the infinite branch that repeats the cycle of back-edged leaf `l`
/// forever carry a good infinite trace?  Decided on the product graph of
/// cycle positions and plain sequent members.
pub fn lasso_trace_oracle(p: &Proof, l: usize) -> bool {
    let Some(&target) = p.backedges.get(&l) else {
        return false;
    };
    let Some(path) = p.path(target, l) else {
        return false;
    };
    // Cycle nodes u_0 .. u_{m-1}; u_m = l carries the same label as u_0.
    let cycle = &path[..path.len() - 1];
    let m = cycle.len();
    if m == 0 {
        return false;
    }
    // Product vertices: (cycle position, member of that node's label).
    let mut verts: Vec<(usize, Member)> = Vec::new();
    let mut index: BTreeMap<(usize, Member), usize> = BTreeMap::new();
    for (t, &v) in cycle.iter().enumerate() {
        for mem in p.nodes[v].sequent.underlying() {
            index.insert((t, mem.clone()), verts.len());
            verts.push((t, mem));
        }
    }
    // Edges with their unfolded variable, if any.
    let mut edges: Vec<(usize, usize)> = Vec::new();
    let mut unfold_var: BTreeMap<(usize, usize), String> = BTreeMap::new();
    for (t, &v) in cycle.iter().enumerate() {
        let nt = (t + 1) % m;
        let next_node = if t + 1 < m { cycle[t + 1] } else { path[m] };
        let premise_index = p.nodes[v]
            .premises
            .iter()
            .position(|&c| c == next_node)
            .expect("path child");
        let tag = p.nodes[v].rule.as_ref().expect("internal node");
        let plain = plain_tag(tag);
        let next_members = p.nodes[next_node].sequent.underlying();
        for from in p.nodes[v].sequent.underlying() {
            for to in &next_members {
                let kind = match &plain {
                    Some(pt) => trace_step(pt, premise_index, &from, to),
                    None => (from == *to).then_some(TraceKind::Silent),
                };
                let Some(kind) = kind else { continue };
                let a = index[&(t, from.clone())];
                let b = index[&(nt, to.clone())];
                edges.push((a, b));
                if let TraceKind::Unfold(x) = kind {
                    unfold_var.insert((a, b), x);
                }
            }
        }
    }
    // A good trace exists iff for some nu-variable x, the subgraph excluding
    // unfoldings of higher-ranking variables has a cycle through an x-unfold
    // edge.
    for x in p.order.vars() {
        if !p.order.is_nu(x) {
            continue;
        }
        let rx = p.order.rank(x).unwrap();
        let sub: Vec<(usize, usize)> = edges
            .iter()
            .copied()
            .filter(|e| match unfold_var.get(e) {
                Some(y) => p.order.rank(y).unwrap_or(usize::MAX) >= rx,
                None => true,
            })
            .collect();
        let comps = sccs(verts.len(), &sub);
        let comp_of = {
            let mut map = vec![usize::MAX; verts.len()];
            for (ci, c) in comps.iter().enumerate() {
                for &v in c {
                    map[v] = ci;
                }
            }
            map
        };
        for (e, y) in &unfold_var {
            if y != x {
                continue;
            }
            if !sub.contains(e) {
                continue;
            }
            let (a, b) = *e;
            if comp_of[a] != usize::MAX && comp_of[a] == comp_of[b] {
                let c = &comps[comp_of[a]];
                if c.len() > 1 || sub.contains(&(a, a)) || a != b {
                    // a and b in one SCC and connected: the edge lies on a
                    // cycle (if a == b it is a self-loop).
                    return true;
                }
            }
        }
    }
    false
}

// ---------------------------------------------------------------------------
// Serialization

fn fmt_name_list(w: &NameWord) -> String {
    w.0.iter()
        .map(|n| n.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Render a proof in the line-oriented proof file format.
pub fn serialize(p: &Proof) -> String {
    let mut out = String::new();
    out.push_str(&format!("root {}\n", p.root_member));
    out.push_str("order");
    for v in p.order.vars() {
        out.push_str(&format!(" {v}"));
    }
    out.push('\n');
    for (i, node) in p.nodes.iter().enumerate() {
        out.push_str(&format!("node {i}"));
        if !node.sequent.control.is_empty() {
            out.push_str(&format!(" {}", fmt_name_list(&node.sequent.control)));
        }
        out.push_str(" |- ");
        let members: Vec<String> = node
            .sequent
            .members
            .iter()
            .map(|m| {
                if m.ann.is_empty() {
                    m.member.to_string()
                } else {
                    format!("{} ^ {}", m.member, fmt_name_list(&m.ann))
                }
            })
            .collect();
        out.push_str(&members.join(", "));
        out.push('\n');
    }
    for (i, node) in p.nodes.iter().enumerate() {
        let Some(tag) = &node.rule else { continue };
        let members: Vec<&AnnMember> = node.sequent.members.iter().collect();
        let idx_of = |m: &AnnMember| members.iter().position(|x| *x == m).expect("principal");
        let mut line = format!("rule {i} {}", tag.name());
        match tag {
            SafRuleTag::And { principal }
            | SafRuleTag::Or { principal }
            | SafRuleTag::Com { principal }
            | SafRuleTag::Glob { principal }
            | SafRuleTag::Eta { principal } => {
                line.push_str(&format!(" {}", idx_of(principal)));
            }
            SafRuleTag::Eq { principal, side } => {
                line.push_str(&format!(" {} {}", idx_of(principal), idx_of(side)));
            }
            SafRuleTag::Mod { principal, fresh } => {
                line.push_str(&format!(" {} '{}", idx_of(principal), fresh));
            }
            SafRuleTag::Rec { principal, name } => {
                line.push_str(&format!(" {} {}", idx_of(principal), name));
            }
            SafRuleTag::Reset { name } => {
                line.push_str(&format!(" {name}"));
            }
            SafRuleTag::Exp | SafRuleTag::Weak | SafRuleTag::Thin => {}
        }
        line.push_str(" -> ");
        line.push_str(
            &node
                .premises
                .iter()
                .map(|c| c.to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        out.push_str(&line);
        out.push('\n');
    }
    for (l, t) in &p.backedges {
        out.push_str(&format!("backedge {l} {t}\n"));
    }
    out
}

fn parse_name(tok: &str, ln: usize) -> Result<Name, ProofError> {
    let Some(dot) = tok.rfind('.') else {
        return Err(ProofError::Parse(ln, format!("malformed name `{tok}`")));
    };
    let idx: u32 = tok[dot + 1..]
        .parse()
        .map_err(|_| ProofError::Parse(ln, format!("malformed name index in `{tok}`")))?;
    let var = &tok[..dot];
    if var.is_empty() {
        return Err(ProofError::Parse(ln, format!("malformed name `{tok}`")));
    }
    Ok(Name::new(var, idx))
}

fn parse_member(text: &str, ln: usize) -> Result<Member, ProofError> {
    let f = crate::syntax::parse(text)
        .map_err(|e| ProofError::Parse(ln, format!("bad member `{text}`: {e}")))?;
    match f {
        Formula::At(i, body) => Ok(Member::new(i, *body)),
        _ => Err(ProofError::Parse(
            ln,
            format!("member `{text}` does not start with a satisfaction operator"),
        )),
    }
}

/// Parse the proof file format produced by [`serialize`].
pub fn deserialize(text: &str) -> Result<Proof, ProofError> {
    let mut root_member: Option<Member> = None;
    let mut order_vars: Option<Vec<String>> = None;
    let mut raw_nodes: BTreeMap<usize, (AnnotatedSequent, usize)> = BTreeMap::new();
    // Rule lines are kept raw until the nodes are known.
    let mut raw_rules: Vec<(usize, usize, String, Vec<String>, Vec<usize>)> = Vec::new();
    let mut backedges: BTreeMap<usize, usize> = BTreeMap::new();

    for (ln0, raw) in text.lines().enumerate() {
        let ln = ln0 + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (head, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
        let rest = rest.trim();
        match head {
            "root" => {
                root_member = Some(parse_member(rest, ln)?);
            }
            "order" => {
                order_vars = Some(rest.split_whitespace().map(str::to_string).collect());
            }
            "node" => {
                let Some((idpart, members_part)) = rest.split_once("|-") else {
                    return Err(ProofError::Parse(ln, "missing `|-` in node line".into()));
                };
                let mut toks = idpart.split_whitespace();
                let id: usize = toks
                    .next()
                    .ok_or_else(|| ProofError::Parse(ln, "missing node id".into()))?
                    .parse()
                    .map_err(|_| ProofError::Parse(ln, "bad node id".into()))?;
                let mut control = NameWord::empty();
                for t in toks {
                    control = control.push(parse_name(t, ln)?);
                }
                let mut members = BTreeSet::new();
                let members_part = members_part.trim();
                if !members_part.is_empty() {
                    for chunk in members_part.split(',') {
                        let chunk = chunk.trim();
                        let (mtext, ann) = match chunk.split_once('^') {
                            Some((m, names)) => {
                                let mut w = NameWord::empty();
                                for t in names.split_whitespace() {
                                    w = w.push(parse_name(t, ln)?);
                                }
                                (m.trim(), w)
                            }
                            None => (chunk, NameWord::empty()),
                        };
                        members.insert(AnnMember::new(parse_member(mtext, ln)?, ann));
                    }
                }
                if raw_nodes
                    .insert(id, (AnnotatedSequent::new(control, members), ln))
                    .is_some()
                {
                    return Err(ProofError::Parse(ln, format!("duplicate node {id}")));
                }
            }
            "rule" => {
                let Some((before, after)) = rest.split_once("->") else {
                    return Err(ProofError::Parse(ln, "missing `->` in rule line".into()));
                };
                let mut toks = before.split_whitespace();
                let id: usize = toks
                    .next()
                    .ok_or_else(|| ProofError::Parse(ln, "missing rule node id".into()))?
                    .parse()
                    .map_err(|_| ProofError::Parse(ln, "bad rule node id".into()))?;
                let tag = toks
                    .next()
                    .ok_or_else(|| ProofError::Parse(ln, "missing rule tag".into()))?
                    .to_string();
                let args: Vec<String> = toks.map(str::to_string).collect();
                let mut premises = Vec::new();
                for t in after.split(',') {
                    let t = t.trim();
                    if t.is_empty() {
                        continue;
                    }
                    premises.push(
                        t.parse::<usize>()
                            .map_err(|_| ProofError::Parse(ln, format!("bad premise id `{t}`")))?,
                    );
                }
                raw_rules.push((id, ln, tag, args, premises));
            }
            "backedge" => {
                let toks: Vec<&str> = rest.split_whitespace().collect();
                if toks.len() != 2 {
                    return Err(ProofError::Parse(ln, "backedge needs two node ids".into()));
                }
                let l: usize = toks[0]
                    .parse()
                    .map_err(|_| ProofError::Parse(ln, "bad backedge leaf id".into()))?;
                let t: usize = toks[1]
                    .parse()
                    .map_err(|_| ProofError::Parse(ln, "bad backedge target id".into()))?;
                backedges.insert(l, t);
            }
            other => {
                return Err(ProofError::Parse(ln, format!("unknown directive `{other}`")));
            }
        }
    }

    let root_member = root_member.ok_or(ProofError::Parse(0, "missing root line".into()))?;
    let order_vars = order_vars.ok_or(ProofError::Parse(0, "missing order line".into()))?;
    let order = VariableOrder::from_list(order_vars, &root_member.body)
        .map_err(|e| ProofError::Parse(0, e.to_string()))?;

    // Node ids must be contiguous from 0.
    let n = raw_nodes.len();
    if n == 0 || !raw_nodes.contains_key(&0) {
        return Err(ProofError::NoRoot);
    }
    for id in raw_nodes.keys() {
        if *id >= n {
            return Err(ProofError::Dangling(*id));
        }
    }
    let mut nodes: Vec<ProofNode> = (0..n)
        .map(|i| ProofNode {
            sequent: raw_nodes[&i].0.clone(),
            rule: None,
            premises: Vec::new(),
        })
        .collect();

    for (id, ln, tagname, args, premises) in raw_rules {
        if id >= n {
            return Err(ProofError::Dangling(id));
        }
        for &c in &premises {
            if c >= n {
                return Err(ProofError::Dangling(c));
            }
        }
        let members: Vec<AnnMember> = nodes[id].sequent.members.iter().cloned().collect();
        let member_at = |k: usize| -> Result<AnnMember, ProofError> {
            members
                .get(k)
                .cloned()
                .ok_or_else(|| ProofError::Parse(ln, format!("member index {k} out of range")))
        };
        let int_arg = |k: usize| -> Result<usize, ProofError> {
            args.get(k)
                .ok_or_else(|| ProofError::Parse(ln, "missing rule argument".into()))?
                .parse()
                .map_err(|_| ProofError::Parse(ln, "bad member index".into()))
        };
        let tag = match tagname.as_str() {
            "and" => SafRuleTag::And {
                principal: member_at(int_arg(0)?)?,
            },
            "or" => SafRuleTag::Or {
                principal: member_at(int_arg(0)?)?,
            },
            "com" => SafRuleTag::Com {
                principal: member_at(int_arg(0)?)?,
            },
            "glob" => SafRuleTag::Glob {
                principal: member_at(int_arg(0)?)?,
            },
            "eta" => SafRuleTag::Eta {
                principal: member_at(int_arg(0)?)?,
            },
            "eq" => SafRuleTag::Eq {
                principal: member_at(int_arg(0)?)?,
                side: member_at(int_arg(1)?)?,
            },
            "mod" => {
                let nom = args
                    .get(1)
                    .ok_or_else(|| ProofError::Parse(ln, "missing modal nominal".into()))?;
                let Some(nom) = nom.strip_prefix('\'') else {
                    return Err(ProofError::Parse(ln, format!("bad nominal `{nom}`")));
                };
                SafRuleTag::Mod {
                    principal: member_at(int_arg(0)?)?,
                    fresh: nom.to_string(),
                }
            }
            "rec" => {
                let name = args
                    .get(1)
                    .ok_or_else(|| ProofError::Parse(ln, "missing rec name".into()))?;
                SafRuleTag::Rec {
                    principal: member_at(int_arg(0)?)?,
                    name: parse_name(name, ln)?,
                }
            }
            "reset" => {
                let name = args
                    .first()
                    .ok_or_else(|| ProofError::Parse(ln, "missing reset name".into()))?;
                SafRuleTag::Reset {
                    name: parse_name(name, ln)?,
                }
            }
            "exp" => SafRuleTag::Exp,
            "weak" => SafRuleTag::Weak,
            "thin" => SafRuleTag::Thin,
            other => {
                return Err(ProofError::Parse(ln, format!("unknown rule tag `{other}`")));
            }
        };
        if nodes[id].rule.is_some() {
            return Err(ProofError::Parse(ln, format!("node {id} has two rules")));
        }
        nodes[id].rule = Some(tag);
        nodes[id].premises = premises;
    }

    // Tree shape: every node except the root has exactly one parent.
    let mut parent: Vec<Option<usize>> = vec![None; n];
    for (i, node) in nodes.iter().enumerate() {
        for &c in &node.premises {
            if parent[c].is_some() {
                return Err(ProofError::TwoParents(c));
            }
            parent[c] = Some(i);
        }
    }
    for (i, par) in parent.iter().enumerate() {
        if i != 0 && par.is_none() {
            return Err(ProofError::Dangling(i));
        }
    }
    let proof = Proof {
        root_member,
        order,
        nodes,
        backedges,
    };
    // Back edges must go to proper ancestors.
    for (&l, &t) in &proof.backedges {
        if l >= n || t >= n {
            return Err(ProofError::Dangling(l.max(t)));
        }
        if l == t || proof.path(t, l).is_none() {
            return Err(ProofError::NotAncestor(t, l));
        }
    }
    Ok(proof)
}

#[cfg(test)]
pub mod tests {
    use super::*;
    use crate::annotation::tests::{nm, word};
    use crate::calculus::tests::mem;
    use crate::syntax::{dependency_order, parse};

    fn ann(m: Member, w: NameWord) -> AnnMember {
        AnnMember::new(m, w)
    }

    /// The hand-built three-node proof of @'r (p \/ ~p).
    pub fn excluded_middle_proof() -> Proof {
        let root = mem("r", "p \\/ ~p");
        let order = dependency_order(&parse("p \\/ ~p").unwrap()).unwrap();
        let s0 = AnnotatedSequent::new(
            NameWord::empty(),
            BTreeSet::from([ann(root.clone(), NameWord::empty())]),
        );
        let s1 = AnnotatedSequent::new(
            NameWord::empty(),
            BTreeSet::from([
                ann(root.clone(), NameWord::empty()),
                ann(mem("r", "p"), NameWord::empty()),
                ann(mem("r", "~p"), NameWord::empty()),
            ]),
        );
        let s2 = AnnotatedSequent::new(
            NameWord::empty(),
            BTreeSet::from([
                ann(mem("r", "p"), NameWord::empty()),
                ann(mem("r", "~p"), NameWord::empty()),
            ]),
        );
        Proof {
            root_member: root.clone(),
            order,
            nodes: vec![
                ProofNode {
                    sequent: s0,
                    rule: Some(SafRuleTag::Or {
                        principal: ann(root, NameWord::empty()),
                    }),
                    premises: vec![1],
                },
                ProofNode {
                    sequent: s1,
                    rule: Some(SafRuleTag::Weak),
                    premises: vec![2],
                },
                ProofNode {
                    sequent: s2,
                    rule: None,
                    premises: vec![],
                },
            ],
            backedges: BTreeMap::new(),
        }
    }

    #[test]
    fn excluded_middle_checks() {
        let p = excluded_middle_proof();
        let ctx = OriginalityContext::new(p.root_member.clone()).unwrap();
        assert_eq!(check_proof(&p, &ctx), Verdict::Accepted);
    }

    #[test]
    fn broken_weakening_rejected() {
        let mut p = excluded_middle_proof();
        // Sneak a member into the leaf that the Weak conclusion lacks.
        p.nodes[2]
            .sequent
            .members
            .insert(ann(mem("r", "q"), NameWord::empty()));
        let ctx = OriginalityContext::new(p.root_member.clone()).unwrap();
        let v = check_proof(&p, &ctx);
        assert!(matches!(v, Verdict::Rejected { node: 1, .. }), "{v:?}");
    }

    #[test]
    fn leaf_must_be_axiom_or_backedged() {
        let mut p = excluded_middle_proof();
        p.nodes[2].sequent.members.remove(&ann(mem("r", "~p"), NameWord::empty()));
        // Fix the weakening so the rule instance stays valid.
        let ctx = OriginalityContext::new(p.root_member.clone()).unwrap();
        let v = check_proof(&p, &ctx);
        assert!(matches!(v, Verdict::Rejected { node: 2, .. }), "{v:?}");
    }

    #[test]
    fn serialization_roundtrip() {
        let p = excluded_middle_proof();
        let text = serialize(&p);
        let q = deserialize(&text).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn deserialize_errors() {
        assert!(matches!(
            deserialize("order\nnode 0 |- @'r p"),
            Err(ProofError::Parse(0, _))
        ));
        // Back edge to a non-ancestor.
        let text = "\
root @'r (p \\/ ~p)
order
node 0 |- @'r (p \\/ ~p)
node 1 |- @'r (p \\/ ~p), @'r p, @'r ~p
node 2 |- @'r p, @'r ~p
rule 0 or 0 -> 1
rule 1 weak -> 2
backedge 2 1
backedge 2 2
";
        // Self-target back edge is rejected.
        assert!(matches!(
            deserialize(text),
            Err(ProofError::NotAncestor(2, 2))
        ));
    }

    /// A minimal cyclic proof skeleton used to exercise goodness directly:
    /// node 0 (control x.0) -> Reset(x.0) -> node 1 -> Weak -> node 2 with a
    /// back edge to node 0.  The sequents are synthetic; only path shape,
    /// controls and Reset tags matter for `goodness`.
    fn synthetic_cycle(with_reset: bool) -> Proof {
        let rho = parse("nu x. []x").unwrap();
        let root = Member::new("r", rho.clone());
        let order = dependency_order(&rho).unwrap();
        let body = mem("r", "nu x. []x");
        let s = |anns: &[(&str, u32)]| {
            AnnotatedSequent::new(
                word(&[("x", 0)]),
                BTreeSet::from([ann(body.clone(), word(anns))]),
            )
        };
        let tag = if with_reset {
            SafRuleTag::Reset { name: nm("x", 0) }
        } else {
            SafRuleTag::Weak
        };
        Proof {
            root_member: root,
            order,
            nodes: vec![
                ProofNode {
                    sequent: s(&[("x", 0)]),
                    rule: Some(tag),
                    premises: vec![1],
                },
                ProofNode {
                    sequent: s(&[("x", 0)]),
                    rule: Some(SafRuleTag::Weak),
                    premises: vec![2],
                },
                ProofNode {
                    sequent: s(&[("x", 0)]),
                    rule: None,
                    premises: vec![],
                },
            ],
            backedges: BTreeMap::from([(2, 0)]),
        }
    }

    #[test]
    fn goodness_requires_reset_on_path() {
        let p = synthetic_cycle(true);
        assert_eq!(goodness(&p, 2), Some(nm("x", 0)));
        let p = synthetic_cycle(false);
        assert_eq!(goodness(&p, 2), None);
    }

    #[test]
    fn unfold_depths() {
        let p = excluded_middle_proof();
        assert_eq!(unfold_proof(&p, 0).size(), 1);
        // Acyclic proof of height 2: any depth >= 2 gives the whole tree.
        assert_eq!(unfold_proof(&p, 2).size(), 3);
        assert_eq!(unfold_proof(&p, 10).size(), 3);
        // Cyclic proof keeps growing with depth.
        let c = synthetic_cycle(true);
        let small = unfold_proof(&c, 2).size();
        let large = unfold_proof(&c, 8).size();
        assert!(large > small);
        // The cycle labels repeat in the unfolding.
        let t = unfold_proof(&c, 4);
        let mut cur = &t;
        let top = cur.sequent.clone();
        let mut repeats = 0;
        loop {
            if cur.sequent == top {
                repeats += 1;
            }
            match cur.children.first() {
                Some(c2) => cur = c2,
                None => break,
            }
        }
        assert!(repeats >= 2);
    }
}
