//! Proof search: a deterministic depth-first prover over annotated sequents
//! that either produces a finite circular proof accepted by the checker or a
//! small countermodel verified by the model checker.
//!
//! The search discipline, per node, in priority order:
//!
//! 1. close on a contained axiom (weakening to the axiom pair, expanding the
//!    control away, axiom leaf);
//! 2. close by a back edge when the label literally equals an ancestor label
//!    and the induced cycle has a good name — a literal repeat without a good
//!    name fails the branch;
//! 3. the deterministic rule (∧/∨/Glob/unfoldings) on the `≺`-smallest
//!    principal, every ν-unfolding realized as `Rec` with the smallest name
//!    fresh for the control and every μ-unfolding as `ηx`; if the principal's
//!    annotation violates the `b ≤ x` side condition, an `Exp` step first
//!    restricts the control and all annotations to `·|x`;
//! 4. the ground rule (`Eq`/`Com` on original nominals);
//! 5. `Thinning` wherever two annotations of one formula compare under the
//!    annotation order;
//! 6. an `Exp` step trimming control names used by no annotation;
//! 7. `Reset` wherever its side condition holds and it makes progress;
//! 8. modal expansion: one proponent choice per box member, `≺`-ordered,
//!    realized as a `Mod` step with a maximal diamond set immediately
//!    weakened down to the narrowed premise.
//!
//! Rule steps that consume their principal (∧/∨/Glob/η/Rec) are followed by a
//! weakening that removes the principal, keeping saturated labels small
//! enough to literally repeat.  Fresh nominals alternate between the two
//! reserved names `_n0`/`_n1`, which makes cycling labels literally equal.

use std::collections::{BTreeMap, BTreeSet};

use crate::annotation::{AnnMember, AnnotatedSequent, Name, NameWord, restrict, SafRuleTag};
use crate::calculus::{
    self, check_reachability_invariants, Member, OriginalityContext, PlainSequent, RuleTag,
};
use crate::proof::{check_proof, Proof, ProofNode};
use crate::semantics::{model_check, Model};
use crate::syntax::{check_guarded, closure, dependency_order, make_well_named, Formula,
    VariableOrder};

/// Resource limits for the search.
#[derive(Clone, Debug)]
pub struct Budget {
    /// Maximum number of nested search nodes on one branch.
    pub max_depth: usize,
    /// Maximum total number of search nodes.
    pub max_steps: u64,
    /// Maximum number of memoized sequents.
    pub memo_cap: usize,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            max_depth: 500,
            max_steps: 200_000,
            memo_cap: 100_000,
        }
    }
}

/// What the search spent, reported on exhaustion.
#[derive(Clone, Debug)]
pub struct BudgetReport {
    pub steps: u64,
    pub memo_size: usize,
    pub note: String,
}

/// Result of `prove`.
#[derive(Clone, Debug)]
pub enum SearchOutcome {
    /// A proof accepted by `check_proof`.
    Proved(Proof),
    /// A model and a world id at which the formula is false.
    Refuted(Model, usize),
    /// Budget ran out, or countermodel verification failed.
    Exhausted(BudgetReport),
}

impl SearchOutcome {
    pub fn verdict(&self) -> &'static str {
        match self {
            SearchOutcome::Proved(_) => "proved",
            SearchOutcome::Refuted(..) => "refuted",
            SearchOutcome::Exhausted(_) => "exhausted",
        }
    }
}

// ---------------------------------------------------------------------------
// Search-internal structures

/// A proof subtree under construction.  `entry` nodes are search entries, the
/// only back-edge candidates; `Back` leaves reference the entry-frame index
/// of their target.
#[derive(Clone, Debug)]
enum Tree {
    Node {
        seq: AnnotatedSequent,
        rule: Option<SafRuleTag>,
        entry: bool,
        children: Vec<Tree>,
    },
    Back {
        seq: AnnotatedSequent,
        frame: usize,
    },
}

/// One ancestor search entry: its label and, once its rule is chosen, the
/// name it resets (if any) — the data goodness needs.
struct Frame {
    label: AnnotatedSequent,
    reset: Option<Name>,
}

/// Everything a failing branch set contributes to countermodel extraction.
#[derive(Clone, Debug, Default)]
struct FailInfo {
    exhausted: bool,
    /// Smallest entry-frame index consulted by a literal-repeat failure;
    /// `usize::MAX` when none.  Governs memoizability.
    min_ancestor: usize,
    noms: BTreeSet<String>,
    /// Occurring apartness members `i != j`, read as `i ≡ j` in the model.
    apart: BTreeSet<(String, String)>,
    /// Occurring `@i ~p`, read as `i ∈ V(p)`.
    negprops: BTreeSet<(String, String)>,
    /// Modal introductions `(i, j)`, read as edges.
    edges: BTreeSet<(String, String)>,
}

impl FailInfo {
    fn fresh() -> FailInfo {
        FailInfo {
            min_ancestor: usize::MAX,
            ..FailInfo::default()
        }
    }

    fn absorb(&mut self, other: FailInfo) {
        self.exhausted |= other.exhausted;
        self.min_ancestor = self.min_ancestor.min(other.min_ancestor);
        self.noms.extend(other.noms);
        self.apart.extend(other.apart);
        self.negprops.extend(other.negprops);
        self.edges.extend(other.edges);
    }

    fn add_sequent(&mut self, g: &AnnotatedSequent) {
        for am in &g.members {
            let m = &am.member;
            self.noms.extend(m.nominals());
            if let Some((i, j)) = m.as_apartness() {
                self.apart.insert((i.to_string(), j.to_string()));
            }
            if let Formula::Prop(p, false) = &m.body {
                self.negprops.insert((m.nom.clone(), p.clone()));
            }
        }
    }
}

enum MemoResult {
    /// Subtree with back-leaf frames relative to the subtree root.
    Proved(Tree),
    Failed(FailInfo),
}

struct MemoEntry {
    /// The concrete non-original nominal in the sequent when cached.
    concrete: Option<String>,
    result: MemoResult,
}

// ---------------------------------------------------------------------------
// The prover

struct Prover {
    ctx: OriginalityContext,
    order: VariableOrder,
    closure_size: usize,
    budget: Budget,
    steps: u64,
    memo: BTreeMap<String, MemoEntry>,
    trace: Option<Vec<PlainSequent>>,
}

type StepResult = Result<(Tree, usize), FailInfo>;

impl Prover {
    /// Bound on consecutive deterministic/ground steps between expansions; a
    /// trip signals a guardedness bug.
    fn saturation_bound(&self, g: &AnnotatedSequent) -> u32 {
        let noms = calculus::sequent_nominals(&g.underlying()).len();
        ((self.closure_size + self.ctx.originals.len()) * (noms + 2) * 4) as u32
    }

    fn search(&mut self, seq: AnnotatedSequent, stack: &mut Vec<Frame>, satur: u32) -> StepResult {
        self.steps += 1;
        if self.steps > self.budget.max_steps || stack.len() >= self.budget.max_depth {
            let mut info = FailInfo::fresh();
            info.exhausted = true;
            info.add_sequent(&seq);
            return Err(info);
        }
        debug_assert!(
            check_reachability_invariants(&seq.underlying(), &self.ctx, self.closure_size)
                .is_ok(),
            "reachability invariant violated at {seq}"
        );
        if let Some(trace) = &mut self.trace {
            trace.push(seq.underlying());
        }

        // 1. Axiom closure.
        if let Some(tree) = self.close_on_axiom(&seq) {
            return Ok((tree, usize::MAX));
        }

        // 2. Literal repeats: back edge if some target admits a good name,
        // otherwise the branch fails.
        let repeats: Vec<usize> = (0..stack.len())
            .filter(|&k| stack[k].label == seq)
            .collect();
        if !repeats.is_empty() {
            for &t in repeats.iter().rev() {
                if self.cycle_good_name(&seq, stack, t).is_some() {
                    return Ok((Tree::Back { seq, frame: t }, t));
                }
            }
            let mut info = FailInfo::fresh();
            info.min_ancestor = repeats[0];
            info.add_sequent(&seq);
            return Err(info);
        }

        // 3. Memo lookup.
        let key = self.memo_key(&seq);
        let concrete = self.non_original_nominal(&seq);
        if let Some(entry) = self.memo.get(&key) {
            let swap = entry.concrete != concrete;
            let (from, to) = if swap {
                (
                    entry.concrete.clone().unwrap_or_default(),
                    concrete.clone().unwrap_or_default(),
                )
            } else {
                (String::new(), String::new())
            };
            match &entry.result {
                MemoResult::Proved(tree) => {
                    let mut t = tree.clone();
                    if swap {
                        t = swap_tree(t, &from, &to);
                    }
                    let base = stack.len();
                    t = rebase_tree(t, base);
                    return Ok((t, usize::MAX));
                }
                MemoResult::Failed(info) => {
                    let mut i = info.clone();
                    if swap {
                        i = swap_info(i, &from, &to);
                    }
                    return Err(i);
                }
            }
        }

        let d0 = stack.len();
        stack.push(Frame {
            label: seq.clone(),
            reset: None,
        });
        let result = self.step(seq, stack, satur, d0);
        stack.pop();

        // 4. Memoize context-free results.
        match &result {
            Ok((tree, min_back)) => {
                if *min_back >= d0 && self.memo.len() < self.budget.memo_cap {
                    let rel = derebase_tree(tree.clone(), d0);
                    self.memo.insert(
                        key,
                        MemoEntry {
                            concrete,
                            result: MemoResult::Proved(rel),
                        },
                    );
                }
            }
            Err(info) => {
                if !info.exhausted
                    && info.min_ancestor >= d0
                    && self.memo.len() < self.budget.memo_cap
                {
                    let mut stored = info.clone();
                    stored.min_ancestor = usize::MAX;
                    self.memo.insert(
                        key,
                        MemoEntry {
                            concrete,
                            result: MemoResult::Failed(stored),
                        },
                    );
                }
            }
        }
        result
    }

    /// One rule application at `seq` (whose frame is already at `stack[d0]`).
    fn step(
        &mut self,
        seq: AnnotatedSequent,
        stack: &mut Vec<Frame>,
        satur: u32,
        d0: usize,
    ) -> StepResult {
        let plain = seq.underlying();

        // Deterministic rule.
        if let Some((tag, _)) = calculus::deterministic_step(&plain, &self.ctx) {
            assert!(
                satur < self.saturation_bound(&seq),
                "saturation bound exceeded at {seq}; guardedness bug?"
            );
            return self.det_step(seq, stack, satur, tag);
        }

        // Ground rule.
        if let Some((tag, _)) = calculus::ground_step(&plain, &self.ctx) {
            assert!(
                satur < self.saturation_bound(&seq),
                "saturation bound exceeded at {seq}; guardedness bug?"
            );
            return self.ground_lift(seq, stack, satur, tag);
        }

        // Thinning.
        if let Some((drop, _keep)) = self.pick_thinning(&seq) {
            let mut members = seq.members.clone();
            members.remove(&drop);
            let premise = AnnotatedSequent::new(
                seq.control
                    .filtered(&members.iter().flat_map(|m| m.ann.0.iter().cloned()).collect()),
                members,
            );
            return self.chain(seq, SafRuleTag::Thin, premise, stack, satur + 1);
        }

        // Control trim.
        let used = seq.used_names();
        let trimmed = seq.control.filtered(&used);
        if trimmed != seq.control {
            let premise = AnnotatedSequent::new(trimmed, seq.members.clone());
            return self.chain(seq, SafRuleTag::Exp, premise, stack, satur + 1);
        }

        // Reset.
        if let Some((name, premise)) = self.pick_reset(&seq) {
            stack[d0].reset = Some(name.clone());
            return self.chain(seq, SafRuleTag::Reset { name }, premise, stack, satur + 1);
        }

        // Modal expansion.
        self.expand(seq, stack)
    }

    /// Apply a single-premise rule node and recurse.
    fn chain(
        &mut self,
        seq: AnnotatedSequent,
        tag: SafRuleTag,
        premise: AnnotatedSequent,
        stack: &mut Vec<Frame>,
        satur: u32,
    ) -> StepResult {
        match self.search(premise, stack, satur) {
            Ok((sub, min_back)) => Ok((
                Tree::Node {
                    seq,
                    rule: Some(tag),
                    entry: true,
                    children: vec![sub],
                },
                min_back,
            )),
            Err(mut info) => {
                info.add_sequent(&seq);
                Err(info)
            }
        }
    }

    /// Lift the plain deterministic rule to the annotated level: pick the
    /// smallest-annotation copy of the plain principal, handle the `b ≤ x`
    /// side condition by restriction, and weaken the principal away.
    fn det_step(
        &mut self,
        seq: AnnotatedSequent,
        stack: &mut Vec<Frame>,
        satur: u32,
        tag: RuleTag,
    ) -> StepResult {
        let principal = tag.principal().expect("det rules have principals");
        let pm = self.min_ann_copy(&seq, principal);

        // Fixpoint principals: restrict first when the annotation violates
        // `b ≤ x`.
        if let Formula::Mu(x, _) | Formula::Nu(x, _) = &principal.body {
            if !pm.ann.le_var(x, &self.order) {
                let premise = restrict_sequent(&seq, x, &self.order);
                return self.chain(seq, SafRuleTag::Exp, premise, stack, satur + 1);
            }
        }

        let saf_tag = match &principal.body {
            Formula::And(..) => SafRuleTag::And { principal: pm.clone() },
            Formula::Or(..) => SafRuleTag::Or { principal: pm.clone() },
            Formula::At(..) => SafRuleTag::Glob { principal: pm.clone() },
            Formula::Mu(..) => SafRuleTag::Eta { principal: pm.clone() },
            Formula::Nu(x, _) => {
                let idx = (0..)
                    .find(|&k| !seq.control.contains(&Name::new(x.clone(), k)))
                    .expect("some index is fresh");
                SafRuleTag::Rec {
                    principal: pm.clone(),
                    name: Name::new(x.clone(), idx),
                }
            }
            _ => unreachable!("deterministic principal shape"),
        };
        let premises = crate::annotation::build_saf_premises(&seq, &saf_tag, &self.order)
            .expect("deterministic instance is valid");

        let mut children = Vec::new();
        let mut min_back = usize::MAX;
        for prem in premises {
            let mut weakened = prem.clone();
            weakened.members.remove(&pm);
            match self.search(weakened, stack, satur + 1) {
                Ok((sub, mb)) => {
                    min_back = min_back.min(mb);
                    children.push(Tree::Node {
                        seq: prem,
                        rule: Some(SafRuleTag::Weak),
                        entry: false,
                        children: vec![sub],
                    });
                }
                Err(mut info) => {
                    info.add_sequent(&seq);
                    return Err(info);
                }
            }
        }
        Ok((
            Tree::Node {
                seq,
                rule: Some(saf_tag),
                entry: true,
                children,
            },
            min_back,
        ))
    }

    /// Lift the plain ground rule (Eq/Com); principals are retained.
    fn ground_lift(
        &mut self,
        seq: AnnotatedSequent,
        stack: &mut Vec<Frame>,
        satur: u32,
        tag: RuleTag,
    ) -> StepResult {
        let saf_tag = match &tag {
            RuleTag::Com { principal } => SafRuleTag::Com {
                principal: self.min_ann_copy(&seq, principal),
            },
            RuleTag::Eq { principal, side } => SafRuleTag::Eq {
                principal: self.min_ann_copy(&seq, principal),
                side: self.min_ann_copy(&seq, side),
            },
            _ => unreachable!("ground rules are Eq/Com"),
        };
        let premises = crate::annotation::build_saf_premises(&seq, &saf_tag, &self.order)
            .expect("ground instance is valid");
        self.chain(seq, saf_tag, premises.into_iter().next().unwrap(), stack, satur + 1)
    }

    /// First thinnable pair `(drop, keep)` in sorted member order.
    fn pick_thinning(&self, seq: &AnnotatedSequent) -> Option<(AnnMember, AnnMember)> {
        for drop in &seq.members {
            for keep in &seq.members {
                if keep != drop
                    && keep.member == drop.member
                    && crate::annotation::ann_less(&keep.ann, &drop.ann, &seq.control, &self.order)
                {
                    return Some((drop.clone(), keep.clone()));
                }
            }
        }
        None
    }

    /// First applicable, progress-making Reset, trying control names by rank.
    fn pick_reset(&self, seq: &AnnotatedSequent) -> Option<(Name, AnnotatedSequent)> {
        let mut names = seq.control.0.clone();
        names.sort_by_key(|n| (n.rank_key(&self.order), n.var.clone(), n.idx));
        'names: for name in names {
            let tracked: Vec<&AnnMember> = seq
                .members
                .iter()
                .filter(|m| m.ann.contains(&name))
                .collect();
            if tracked.is_empty() {
                continue;
            }
            let cut = |w: &NameWord| -> NameWord {
                let k = w.0.iter().position(|n| *n == name).expect("name present");
                NameWord(w.0[..=k].to_vec())
            };
            let merged = cut(&tracked[0].ann);
            for m in &tracked {
                if cut(&m.ann) != merged {
                    continue 'names;
                }
            }
            for m in &seq.members {
                if !m.ann.contains(&name) && m.member.body.mentions_var(&name.var) {
                    continue 'names;
                }
            }
            let mut members: BTreeSet<AnnMember> = seq
                .members
                .iter()
                .filter(|m| !m.ann.contains(&name))
                .cloned()
                .collect();
            for m in &tracked {
                members.insert(AnnMember::new(m.member.clone(), merged.clone()));
            }
            if members == seq.members {
                continue; // repeating application
            }
            return Some((name, AnnotatedSequent::new(seq.control.clone(), members)));
        }
        None
    }

    /// Modal expansion: one proponent choice per box member, `≺`-ordered; all
    /// must fail for the branch set to fail.
    fn expand(&mut self, seq: AnnotatedSequent, stack: &mut Vec<Frame>) -> StepResult {
        let mut boxes: Vec<AnnMember> = seq
            .members
            .iter()
            .filter(|m| matches!(m.member.body, Formula::Boxm(..)))
            .cloned()
            .collect();
        boxes.sort_by_key(|m| (m.member.to_string(), m.ann.to_string()));
        if boxes.is_empty() {
            // Saturated, repeat-free, axiom-free dead end.
            let mut info = FailInfo::fresh();
            info.add_sequent(&seq);
            return Err(info);
        }

        let used = calculus::sequent_nominals(&seq.underlying());
        let fresh = ["_n0", "_n1"]
            .iter()
            .map(|s| s.to_string())
            .find(|s| !used.contains(s))
            .unwrap_or_else(|| calculus::fresh_nominal(&seq.underlying()));

        let mut merged = FailInfo::fresh();
        for pm in boxes {
            let Formula::Boxm(phi) = &pm.member.body else {
                unreachable!()
            };
            let mut full = seq.members.clone();
            full.insert(AnnMember::new(
                Member::new(fresh.clone(), phi.as_ref().clone()),
                pm.ann.clone(),
            ));
            for m in &seq.members {
                if m.member.nom == pm.member.nom {
                    if let Formula::Dia(psi) = &m.member.body {
                        full.insert(AnnMember::new(
                            Member::new(fresh.clone(), psi.as_ref().clone()),
                            m.ann.clone(),
                        ));
                    }
                }
            }
            let narrowed: BTreeSet<AnnMember> = full
                .iter()
                .filter(|m| m.member.nom == fresh || self.ctx.is_original(&m.member.nom))
                .cloned()
                .collect();
            let full_seq = AnnotatedSequent::new(seq.control.clone(), full);
            let narrowed_seq = AnnotatedSequent::new(seq.control.clone(), narrowed);
            match self.search(narrowed_seq, stack, 0) {
                Ok((sub, min_back)) => {
                    return Ok((
                        Tree::Node {
                            seq,
                            rule: Some(SafRuleTag::Mod {
                                principal: pm,
                                fresh,
                            }),
                            entry: true,
                            children: vec![Tree::Node {
                                seq: full_seq,
                                rule: Some(SafRuleTag::Weak),
                                entry: false,
                                children: vec![sub],
                            }],
                        },
                        min_back,
                    ));
                }
                Err(info) => {
                    merged.absorb(info);
                    merged
                        .edges
                        .insert((pm.member.nom.clone(), fresh.clone()));
                }
            }
        }
        merged.add_sequent(&seq);
        Err(merged)
    }

    /// The smallest-annotation copy of a plain member.
    fn min_ann_copy(&self, seq: &AnnotatedSequent, m: &Member) -> AnnMember {
        seq.members
            .iter()
            .filter(|am| am.member == *m)
            .min_by_key(|am| am.ann.to_string())
            .expect("principal occurs in the sequent")
            .clone()
    }

    /// If the sequent contains an axiom, build the closing chain
    /// `Weak → Exp → axiom leaf`.
    fn close_on_axiom(&self, seq: &AnnotatedSequent) -> Option<Tree> {
        let core = calculus::axiom_core(&seq.underlying())?;
        let copies: BTreeSet<AnnMember> = core
            .iter()
            .map(|m| self.min_ann_copy(seq, m))
            .collect();
        let ax = AnnotatedSequent::new(
            NameWord::empty(),
            core.iter()
                .map(|m| AnnMember::new(m.clone(), NameWord::empty()))
                .collect(),
        );
        let weakened = AnnotatedSequent::new(seq.control.clone(), copies);

        let mut tree = Tree::Node {
            seq: ax.clone(),
            rule: None,
            entry: false,
            children: vec![],
        };
        if weakened != ax {
            tree = Tree::Node {
                seq: weakened.clone(),
                rule: Some(SafRuleTag::Exp),
                entry: false,
                children: vec![tree],
            };
        }
        if *seq != weakened {
            tree = Tree::Node {
                seq: seq.clone(),
                rule: Some(SafRuleTag::Weak),
                entry: false,
                children: vec![tree],
            };
        }
        // The outermost node is this search entry.
        tree = match tree {
            Tree::Node {
                seq,
                rule,
                children,
                ..
            } => Tree::Node {
                seq,
                rule,
                entry: true,
                children,
            },
            t => t,
        };
        Some(tree)
    }

    /// Is there a name alive in every control from frame `t` to the current
    /// leaf and reset somewhere on that path?
    fn cycle_good_name(
        &self,
        leaf: &AnnotatedSequent,
        stack: &[Frame],
        t: usize,
    ) -> Option<Name> {
        let mut alive: BTreeSet<Name> = leaf.control.0.iter().cloned().collect();
        for f in &stack[t..] {
            let ctl: BTreeSet<Name> = f.label.control.0.iter().cloned().collect();
            alive = alive.intersection(&ctl).cloned().collect();
        }
        let reset: BTreeSet<Name> = stack[t..]
            .iter()
            .filter_map(|f| f.reset.clone())
            .collect();
        alive
            .intersection(&reset)
            .cloned()
            .min_by_key(|n| n.rank_key(&self.order))
    }

    /// The memo key: canonical print with the non-original nominal (if any)
    /// replaced by a fixed placeholder.
    fn memo_key(&self, seq: &AnnotatedSequent) -> String {
        match self.non_original_nominal(seq) {
            None => seq.to_string(),
            Some(n) => swap_seq(seq.clone(), &n, "_nC").to_string(),
        }
    }

    fn non_original_nominal(&self, seq: &AnnotatedSequent) -> Option<String> {
        seq.members
            .iter()
            .map(|m| m.member.nom.clone())
            .find(|n| !self.ctx.is_original(n))
    }
}

/// Restrict the control and every annotation to `·|x`.
fn restrict_sequent(seq: &AnnotatedSequent, x: &str, order: &VariableOrder) -> AnnotatedSequent {
    AnnotatedSequent::new(
        restrict(&seq.control, x, order),
        seq.members
            .iter()
            .map(|m| AnnMember::new(m.member.clone(), restrict(&m.ann, x, order)))
            .collect(),
    )
}

// ---------------------------------------------------------------------------
// Nominal renaming (memo splicing)

fn swap_str(s: &str, a: &str, b: &str) -> String {
    if s == a {
        b.to_string()
    } else if s == b {
        a.to_string()
    } else {
        s.to_string()
    }
}

fn swap_seq(mut seq: AnnotatedSequent, a: &str, b: &str) -> AnnotatedSequent {
    seq.members = seq
        .members
        .into_iter()
        .map(|mut m| {
            m.member.nom = swap_str(&m.member.nom, a, b);
            m
        })
        .collect();
    seq
}

fn swap_tag(tag: SafRuleTag, a: &str, b: &str) -> SafRuleTag {
    let fix = |mut m: AnnMember| {
        m.member.nom = swap_str(&m.member.nom, a, b);
        m
    };
    match tag {
        SafRuleTag::And { principal } => SafRuleTag::And { principal: fix(principal) },
        SafRuleTag::Or { principal } => SafRuleTag::Or { principal: fix(principal) },
        SafRuleTag::Eq { principal, side } => SafRuleTag::Eq {
            principal: fix(principal),
            side: fix(side),
        },
        SafRuleTag::Com { principal } => SafRuleTag::Com { principal: fix(principal) },
        SafRuleTag::Glob { principal } => SafRuleTag::Glob { principal: fix(principal) },
        SafRuleTag::Mod { principal, fresh } => SafRuleTag::Mod {
            principal: fix(principal),
            fresh: swap_str(&fresh, a, b),
        },
        SafRuleTag::Eta { principal } => SafRuleTag::Eta { principal: fix(principal) },
        SafRuleTag::Rec { principal, name } => SafRuleTag::Rec {
            principal: fix(principal),
            name,
        },
        t => t,
    }
}

fn swap_tree(tree: Tree, a: &str, b: &str) -> Tree {
    match tree {
        Tree::Node {
            seq,
            rule,
            entry,
            children,
        } => Tree::Node {
            seq: swap_seq(seq, a, b),
            rule: rule.map(|t| swap_tag(t, a, b)),
            entry,
            children: children.into_iter().map(|c| swap_tree(c, a, b)).collect(),
        },
        Tree::Back { seq, frame } => Tree::Back {
            seq: swap_seq(seq, a, b),
            frame,
        },
    }
}

fn swap_info(mut info: FailInfo, a: &str, b: &str) -> FailInfo {
    let fix_set = |s: BTreeSet<(String, String)>| {
        s.into_iter()
            .map(|(x, y)| (swap_str(&x, a, b), swap_str(&y, a, b)))
            .collect()
    };
    info.noms = info.noms.iter().map(|n| swap_str(n, a, b)).collect();
    info.apart = fix_set(info.apart);
    info.negprops = info
        .negprops
        .into_iter()
        .map(|(n, p)| (swap_str(&n, a, b), p))
        .collect();
    info.edges = fix_set(info.edges);
    info
}

/// Shift back-leaf frame indices by `base` (memo splice).
fn rebase_tree(tree: Tree, base: usize) -> Tree {
    map_frames(tree, &|f| f + base)
}

/// Make back-leaf frame indices relative to `base` (memo store).
fn derebase_tree(tree: Tree, base: usize) -> Tree {
    map_frames(tree, &|f| f - base)
}

fn map_frames(tree: Tree, f: &impl Fn(usize) -> usize) -> Tree {
    match tree {
        Tree::Node {
            seq,
            rule,
            entry,
            children,
        } => Tree::Node {
            seq,
            rule,
            entry,
            children: children.into_iter().map(|c| map_frames(c, f)).collect(),
        },
        Tree::Back { seq, frame } => Tree::Back {
            seq,
            frame: f(frame),
        },
    }
}

// ---------------------------------------------------------------------------
// Flattening a search tree into a proof object

fn flatten(tree: Tree, root_member: Member, order: VariableOrder) -> Proof {
    let mut nodes: Vec<ProofNode> = Vec::new();
    let mut backedges: BTreeMap<usize, usize> = BTreeMap::new();
    let mut entry_path: Vec<usize> = Vec::new();
    go(tree, &mut nodes, &mut backedges, &mut entry_path);
    Proof {
        root_member,
        order,
        nodes,
        backedges,
    }
}

fn go(
    tree: Tree,
    nodes: &mut Vec<ProofNode>,
    backedges: &mut BTreeMap<usize, usize>,
    entry_path: &mut Vec<usize>,
) -> usize {
    match tree {
        Tree::Node {
            seq,
            rule,
            entry,
            children,
        } => {
            let id = nodes.len();
            nodes.push(ProofNode {
                sequent: seq,
                rule,
                premises: vec![],
            });
            if entry {
                entry_path.push(id);
            }
            let prems: Vec<usize> = children
                .into_iter()
                .map(|c| go(c, nodes, backedges, entry_path))
                .collect();
            nodes[id].premises = prems;
            if entry {
                entry_path.pop();
            }
            id
        }
        Tree::Back { seq, frame } => {
            let id = nodes.len();
            nodes.push(ProofNode {
                sequent: seq,
                rule: None,
                premises: vec![],
            });
            backedges.insert(id, entry_path[frame]);
            id
        }
    }
}

// ---------------------------------------------------------------------------
// Countermodel extraction

fn extract_countermodel(
    info: &FailInfo,
    ctx: &OriginalityContext,
    rho: &Formula,
) -> Option<(Model, usize)> {
    let mut noms = info.noms.clone();
    noms.insert(ctx.root.nom.clone());
    noms.extend(ctx.originals.iter().cloned());

    // Union-find over nominals, merging along occurring apartness members.
    let mut parent: BTreeMap<String, String> = noms.iter().map(|n| (n.clone(), n.clone())).collect();
    fn find(parent: &mut BTreeMap<String, String>, x: &str) -> String {
        let p = parent[x].clone();
        if p == x {
            return p;
        }
        let r = find(parent, &p);
        parent.insert(x.to_string(), r.clone());
        r
    }
    for (i, j) in &info.apart {
        let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
        if ri != rj {
            // Deterministic union: smaller root wins.
            let (lo, hi) = if ri < rj { (ri, rj) } else { (rj, ri) };
            parent.insert(hi, lo);
        }
    }

    // Class representatives: the smallest original in the class if any, else
    // the smallest member.
    let mut classes: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    let all: Vec<String> = noms.iter().cloned().collect();
    for n in &all {
        let r = find(&mut parent, n);
        classes.entry(r).or_default().insert(n.clone());
    }
    let mut rep_of: BTreeMap<String, String> = BTreeMap::new();
    for class in classes.values() {
        let rep = class
            .iter()
            .find(|n| ctx.is_original(n))
            .unwrap_or_else(|| class.iter().next().expect("nonempty class"))
            .clone();
        for n in class {
            rep_of.insert(n.clone(), rep.clone());
        }
    }

    let mut model = Model::default();
    let reps: BTreeSet<String> = rep_of.values().cloned().collect();
    for r in &reps {
        model.add_world(r.clone());
    }
    for (i, j) in &info.edges {
        let a = model.world_id(&rep_of[i])?;
        let b = model.world_id(&rep_of[j])?;
        model.edges[a].insert(b);
    }
    for (i, p) in &info.negprops {
        let w = model.world_id(&rep_of[i])?;
        model.valuation.entry(p.clone()).or_default().insert(w);
    }
    for n in &all {
        let w = model.world_id(&rep_of[n])?;
        model.assignment.insert(n.clone(), w);
    }

    let world = model.world_id(&rep_of[&ctx.root.nom])?;
    match model_check(&model, world, rho) {
        Ok(false) => Some((model, world)),
        _ => None,
    }
}

// ---------------------------------------------------------------------------
// Entry points

/// Decide the validity of a closed guarded formula.  Returns a checkable
/// proof, a verified countermodel, or an exhaustion report.
pub fn prove(rho: &Formula, budget: &Budget) -> SearchOutcome {
    run(rho, budget, false).0
}

/// Like `prove`, also returning the plain projection of every search node in
/// exploration order (for invariant auditing).
pub fn prove_traced(rho: &Formula, budget: &Budget) -> (SearchOutcome, Vec<PlainSequent>) {
    let (out, trace) = run(rho, budget, true);
    (out, trace.unwrap_or_default())
}

fn run(rho: &Formula, budget: &Budget, traced: bool) -> (SearchOutcome, Option<Vec<PlainSequent>>) {
    // Propositions are syntactically indistinguishable from free fixpoint
    // variables; what must not happen is a bound variable occurring free.
    assert!(
        rho.free_vars().is_disjoint(&rho.bound_vars()),
        "formula must be closed"
    );
    check_guarded(rho).expect("formula must be guarded");
    let rho = make_well_named(rho);
    let order = dependency_order(&rho).expect("well-named closed formula");

    // A fresh root nominal from the reserved namespace.
    let used = rho.nominals();
    let root_nom = std::iter::once("_r".to_string())
        .chain((0..).map(|k| format!("_r{k}")))
        .find(|n| !used.contains(n))
        .expect("some root nominal is fresh");
    let root_member = Member::new(root_nom, rho.clone());
    let ctx = OriginalityContext::new(root_member.clone()).expect("root nominal is fresh");

    let mut prover = Prover {
        closure_size: closure(&rho).len(),
        ctx,
        order: order.clone(),
        budget: budget.clone(),
        steps: 0,
        memo: BTreeMap::new(),
        trace: traced.then(Vec::new),
    };
    let root_seq = AnnotatedSequent::new(
        NameWord::empty(),
        BTreeSet::from([AnnMember::new(root_member.clone(), NameWord::empty())]),
    );
    let mut stack = Vec::new();
    let result = prover.search(root_seq, &mut stack, 0);
    let outcome = match result {
        Ok((tree, _)) => {
            let proof = flatten(tree, root_member, order);
            debug_assert!(
                check_proof(&proof, &prover.ctx).is_accepted(),
                "produced proof rejected: {}",
                check_proof(&proof, &prover.ctx)
            );
            SearchOutcome::Proved(proof)
        }
        Err(info) => {
            if info.exhausted {
                SearchOutcome::Exhausted(BudgetReport {
                    steps: prover.steps,
                    memo_size: prover.memo.len(),
                    note: "budget exhausted".into(),
                })
            } else {
                match extract_countermodel(&info, &prover.ctx, &rho) {
                    Some((m, w)) => SearchOutcome::Refuted(m, w),
                    None => SearchOutcome::Exhausted(BudgetReport {
                        steps: prover.steps,
                        memo_size: prover.memo.len(),
                        note: "countermodel verification failed".into(),
                    }),
                }
            }
        }
    };
    (outcome, prover.trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::proof::{goodness, lasso_trace_oracle};
    use crate::semantics::eval;
    use crate::syntax::parse;

    fn outcome(text: &str) -> SearchOutcome {
        prove(&parse(text).unwrap(), &Budget::default())
    }

    fn assert_proved(text: &str) -> Proof {
        match outcome(text) {
            SearchOutcome::Proved(p) => p,
            o => panic!("{text}: expected Proved, got {}", o.verdict()),
        }
    }

    fn assert_refuted(text: &str) -> (Model, usize) {
        match outcome(text) {
            SearchOutcome::Refuted(m, w) => (m, w),
            o => panic!("{text}: expected Refuted, got {}", o.verdict()),
        }
    }

    #[test]
    fn excluded_middle_is_proved_without_back_edges() {
        let p = assert_proved("p \\/ ~p");
        assert!(p.backedges.is_empty());
    }

    #[test]
    fn simple_box_nu_needs_a_back_edge() {
        let p = assert_proved("nu x. []x");
        assert!(!p.backedges.is_empty());
        for &l in p.backedges.keys() {
            assert!(goodness(&p, l).is_some());
            assert!(lasso_trace_oracle(&p, l));
        }
    }

    #[test]
    fn nested_box_nu_cycles_through_a_reset() {
        let p = assert_proved("nu x. [](x \\/ []x)");
        assert!(!p.backedges.is_empty());
        let has_reset = p
            .nodes
            .iter()
            .any(|n| matches!(n.rule, Some(SafRuleTag::Reset { .. })));
        assert!(has_reset, "expected a Reset on the cycle");
        for &l in p.backedges.keys() {
            assert!(goodness(&p, l).is_some());
            assert!(lasso_trace_oracle(&p, l));
        }
    }

    #[test]
    fn valid_corpus_is_proved() {
        for text in [
            "@'r(p \\/ ~p)",
            "'i == 'i",
            "@'i p \\/ @'i ~p",
            "<>p \\/ []~p",
            "nu x. []x",
            "nu x. [](x \\/ []x)",
            "(mu x.(p \\/ []x)) \\/ (nu y.(~p /\\ <>y))",
        ] {
            let proof = assert_proved(text);
            let ctx = OriginalityContext::new(proof.root_member.clone()).unwrap();
            assert!(check_proof(&proof, &ctx).is_accepted(), "{text}");
        }
    }

    #[test]
    fn invalid_corpus_is_refuted_with_small_verified_models() {
        for text in ["p", "<>p", "mu x. <>x", "mu x. []x", "nu y. <>y", "@'i p"] {
            let (m, w) = assert_refuted(text);
            assert!(m.worlds.len() <= 4, "{text}: {} worlds", m.worlds.len());
            let rho = make_well_named(&parse(text).unwrap());
            assert_eq!(model_check(&m, w, &rho), Ok(false), "{text}");
        }
    }

    #[test]
    fn refuting_p_gives_one_world() {
        let (m, _) = assert_refuted("p");
        assert_eq!(m.worlds.len(), 1);
        assert!(m.valuation.get("p").map(|s| s.is_empty()).unwrap_or(true));
    }

    #[test]
    fn refuting_diamond_p_gives_a_deadlock_world() {
        let (m, w) = assert_refuted("<>p");
        assert!(m.edges[w].is_empty());
    }

    #[test]
    fn refuting_at_assigns_the_named_nominal() {
        let (m, _) = assert_refuted("@'i p");
        let wi = m.assignment["i"];
        assert!(!m.valuation.get("p").map(|s| s.contains(&wi)).unwrap_or(false));
    }

    #[test]
    fn proved_formulas_hold_in_random_models() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let texts = ["<>p \\/ []~p", "nu x. []x", "nu x. [](x \\/ []x)"];
        for text in texts {
            assert_proved(text);
            let rho = make_well_named(&parse(text).unwrap());
            let props = vec!["p".to_string()];
            for _ in 0..200 {
                let m = crate::rnd::random_model(&mut rng, 5, &props, &[]);
                let sat = eval(&m, &rho).unwrap();
                assert_eq!(sat, m.all_worlds(), "{text} not valid in {}", m.to_text());
            }
        }
    }

    #[test]
    fn complement_of_valid_corpus_is_refuted() {
        for text in [
            "@'r(p \\/ ~p)",
            "'i == 'i",
            "@'i p \\/ @'i ~p",
            "<>p \\/ []~p",
            "nu x. []x",
            "nu x. [](x \\/ []x)",
            "(mu x.(p \\/ []x)) \\/ (nu y.(~p /\\ <>y))",
        ] {
            let neg = crate::syntax::negate(&parse(text).unwrap());
            match prove(&neg, &Budget::default()) {
                SearchOutcome::Refuted(m, w) => {
                    assert_eq!(model_check(&m, w, &make_well_named(&neg)), Ok(false));
                }
                o => panic!("negate({text}): expected Refuted, got {}", o.verdict()),
            }
        }
    }

    #[test]
    fn search_is_deterministic() {
        for text in ["nu x. [](x \\/ []x)", "mu x. []x"] {
            let a = outcome(text);
            let b = outcome(text);
            match (a, b) {
                (SearchOutcome::Proved(p1), SearchOutcome::Proved(p2)) => {
                    assert_eq!(crate::proof::serialize(&p1), crate::proof::serialize(&p2));
                }
                (SearchOutcome::Refuted(m1, w1), SearchOutcome::Refuted(m2, w2)) => {
                    assert_eq!((m1.to_text(), w1), (m2.to_text(), w2));
                }
                _ => panic!("nondeterministic verdict for {text}"),
            }
        }
    }

    #[test]
    fn tiny_budget_exhausts() {
        let budget = Budget {
            max_depth: 3,
            max_steps: 5,
            memo_cap: 10,
        };
        let out = prove(&parse("nu x. [](x \\/ []x)").unwrap(), &budget);
        assert!(matches!(out, SearchOutcome::Exhausted(_)));
    }

    #[test]
    fn traced_nodes_satisfy_reachability_invariants() {
        for text in ["nu x. [](x \\/ []x)", "mu x. []x", "@'i p"] {
            let rho = make_well_named(&parse(text).unwrap());
            let (_, trace) = prove_traced(&rho, &Budget::default());
            assert!(!trace.is_empty());
            let root_nom = "_r".to_string();
            let ctx =
                OriginalityContext::new(Member::new(root_nom, rho.clone())).unwrap();
            let bound = closure(&rho).len();
            for g in &trace {
                check_reachability_invariants(g, &ctx, bound)
                    .unwrap_or_else(|e| panic!("{text}: {e}"));
            }
        }
    }

    #[test]
    fn proof_serialization_roundtrips_through_the_checker() {
        let p = assert_proved("nu x. [](x \\/ []x)");
        let text = crate::proof::serialize(&p);
        let q = crate::proof::deserialize(&text).unwrap();
        assert_eq!(p, q);
        let ctx = OriginalityContext::new(p.root_member.clone()).unwrap();
        assert!(check_proof(&q, &ctx).is_accepted());
    }
}
