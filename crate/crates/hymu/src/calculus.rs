//! Plain sequents of satisfaction statements, the core inference rules with
//! instance checking, trace steps, and the derived rules (deterministic,
//! ground, narrowed modal) that make root-to-leaf search deterministic up to
//! the choice of box formula at modal steps.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::syntax::{unfold, Formula};

/// A sequent member `@'i body`.  Identity statements `'i == 'j` / `'i != 'j`
/// are members whose body is a nominal literal.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Member {
    pub nom: String,
    pub body: Formula,
}

impl Member {
    pub fn new(nom: impl Into<String>, body: Formula) -> Member {
        Member {
            nom: nom.into(),
            body,
        }
    }

    /// The member as a formula, `@'i body`.
    pub fn to_formula(&self) -> Formula {
        Formula::at(self.nom.clone(), self.body.clone())
    }

    /// Is this `i != j` for some nominals?
    pub fn as_apartness(&self) -> Option<(&str, &str)> {
        match &self.body {
            Formula::Nom(j, false) => Some((&self.nom, j)),
            _ => None,
        }
    }

    /// All nominals occurring in the member, prefix included.
    pub fn nominals(&self) -> BTreeSet<String> {
        let mut s = self.body.nominals();
        s.insert(self.nom.clone());
        s
    }
}

impl fmt::Display for Member {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_formula())
    }
}

/// A sequent: a finite set of members, read disjunctively.
pub type PlainSequent = BTreeSet<Member>;

/// Canonical print of a sequent; also the basis of the global instance order.
pub fn seq_print(g: &PlainSequent) -> String {
    let mut parts: Vec<String> = g.iter().map(|m| m.to_string()).collect();
    parts.sort();
    parts.join(", ")
}

/// The fixed global order on formulas (and members): lexicographic on the
/// canonical print.
pub fn print_lt(a: &Member, b: &Member) -> bool {
    a.to_string() < b.to_string()
}

/// Root formula and original nominals of a proof attempt.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct OriginalityContext {
    /// The root member `@'r rho`.
    pub root: Member,
    /// Nominals occurring in the root member, its prefix included.
    pub originals: BTreeSet<String>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CalcError {
    #[error("root nominal '{0} occurs in the root formula")]
    RootNotFresh(String),
    #[error("wrong premise count for {0}: expected {1}, found {2}")]
    PremiseCount(&'static str, usize, usize),
    #[error("principal formula {0} not in the conclusion")]
    MissingPrincipal(String),
    #[error("principal formula {0} has the wrong shape for rule {1}")]
    PrincipalShape(String, &'static str),
    #[error("side formula {0} is not an apartness statement with the principal's nominal")]
    BadSide(String),
    #[error("nominal '{0} is not fresh for the conclusion")]
    NotFresh(String),
    #[error("premise mismatch for {0}: expected {1}, found {2}")]
    PremiseMismatch(&'static str, String, String),
    #[error("extra premise member {0} not licensed by the modal rule")]
    BadModMember(String),
    #[error("weakening premise is not a subset of the conclusion")]
    NotSubset,
}

impl OriginalityContext {
    /// Build the context for root member `@'r rho`; `r` must not occur in
    /// `rho`.
    pub fn new(root: Member) -> Result<OriginalityContext, CalcError> {
        if root.body.nominals().contains(&root.nom) {
            return Err(CalcError::RootNotFresh(root.nom));
        }
        let originals = root.nominals();
        Ok(OriginalityContext { root, originals })
    }

    pub fn is_original(&self, i: &str) -> bool {
        self.originals.contains(i)
    }
}

/// Core rule tags with their instance parameters.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum RuleTag {
    And { principal: Member },
    Or { principal: Member },
    Eq { principal: Member, side: Member },
    Com { principal: Member },
    Glob { principal: Member },
    Mod { principal: Member, fresh: String },
    Eta { principal: Member },
    Weak,
}

impl RuleTag {
    pub fn name(&self) -> &'static str {
        match self {
            RuleTag::And { .. } => "and",
            RuleTag::Or { .. } => "or",
            RuleTag::Eq { .. } => "eq",
            RuleTag::Com { .. } => "com",
            RuleTag::Glob { .. } => "glob",
            RuleTag::Mod { .. } => "mod",
            RuleTag::Eta { .. } => "eta",
            RuleTag::Weak => "weak",
        }
    }

    pub fn principal(&self) -> Option<&Member> {
        match self {
            RuleTag::And { principal }
            | RuleTag::Or { principal }
            | RuleTag::Eq { principal, .. }
            | RuleTag::Com { principal }
            | RuleTag::Glob { principal }
            | RuleTag::Mod { principal, .. }
            | RuleTag::Eta { principal } => Some(principal),
            RuleTag::Weak => None,
        }
    }

    /// Rank in the fixed instance order: and < or < glob < eta < eq < com.
    fn rank(&self) -> u8 {
        match self {
            RuleTag::And { .. } => 0,
            RuleTag::Or { .. } => 1,
            RuleTag::Glob { .. } => 2,
            RuleTag::Eta { .. } => 3,
            RuleTag::Eq { .. } => 4,
            RuleTag::Com { .. } => 5,
            RuleTag::Mod { .. } => 6,
            RuleTag::Weak => 7,
        }
    }
}

/// Is the sequent an axiom: `{@i p, @i ~p}` with `p` a proposition or
/// nominal, or the single identity `{'i == 'i}`?
pub fn is_axiom(g: &PlainSequent) -> bool {
    axiom_core(g).is_some() && g.len() == axiom_core(g).map(|s| s.len()).unwrap_or(0)
}

/// If the sequent *contains* an axiom, return a minimal axiom subset.
pub fn axiom_core(g: &PlainSequent) -> Option<PlainSequent> {
    use Formula::*;
    for m in g {
        match &m.body {
            Nom(j, true) if *j == m.nom => {
                return Some(BTreeSet::from([m.clone()]));
            }
            Prop(p, pol) => {
                let dual = Member::new(m.nom.clone(), Prop(p.clone(), !pol));
                if g.contains(&dual) {
                    return Some(BTreeSet::from([m.clone(), dual]));
                }
            }
            Nom(j, pol) => {
                let dual = Member::new(m.nom.clone(), Nom(j.clone(), !pol));
                if g.contains(&dual) {
                    return Some(BTreeSet::from([m.clone(), dual]));
                }
            }
            _ => {}
        }
    }
    None
}

/// All nominals occurring in the sequent (prefixes and bodies).
pub fn sequent_nominals(g: &PlainSequent) -> BTreeSet<String> {
    g.iter().flat_map(|m| m.nominals()).collect()
}

/// The premises prescribed by the core rules for a given tag, built from the
/// conclusion.  `Weak` and `Mod` admit many instances and are not covered;
/// use `check_inf_instance` to validate those.
pub fn build_premises(
    conclusion: &PlainSequent,
    tag: &RuleTag,
) -> Result<Vec<PlainSequent>, CalcError> {
    use Formula::*;
    let need_principal = |p: &Member| {
        if conclusion.contains(p) {
            Ok(())
        } else {
            Err(CalcError::MissingPrincipal(p.to_string()))
        }
    };
    match tag {
        RuleTag::And { principal } => {
            need_principal(principal)?;
            let And(a, b) = &principal.body else {
                return Err(CalcError::PrincipalShape(principal.to_string(), "and"));
            };
            let mut left = conclusion.clone();
            left.insert(Member::new(principal.nom.clone(), a.as_ref().clone()));
            let mut right = conclusion.clone();
            right.insert(Member::new(principal.nom.clone(), b.as_ref().clone()));
            Ok(vec![left, right])
        }
        RuleTag::Or { principal } => {
            need_principal(principal)?;
            let Or(a, b) = &principal.body else {
                return Err(CalcError::PrincipalShape(principal.to_string(), "or"));
            };
            let mut prem = conclusion.clone();
            prem.insert(Member::new(principal.nom.clone(), a.as_ref().clone()));
            prem.insert(Member::new(principal.nom.clone(), b.as_ref().clone()));
            Ok(vec![prem])
        }
        RuleTag::Eq { principal, side } => {
            need_principal(principal)?;
            need_principal(side)?;
            if side == principal {
                return Err(CalcError::BadSide(side.to_string()));
            }
            let Some((i, j)) = side.as_apartness() else {
                return Err(CalcError::BadSide(side.to_string()));
            };
            if i != principal.nom {
                return Err(CalcError::BadSide(side.to_string()));
            }
            let mut prem = conclusion.clone();
            prem.insert(Member::new(j.to_string(), principal.body.clone()));
            Ok(vec![prem])
        }
        RuleTag::Com { principal } => {
            need_principal(principal)?;
            let Some((i, j)) = principal.as_apartness() else {
                return Err(CalcError::PrincipalShape(principal.to_string(), "com"));
            };
            let mut prem = conclusion.clone();
            prem.insert(Member::new(j.to_string(), Nom(i.to_string(), false)));
            Ok(vec![prem])
        }
        RuleTag::Glob { principal } => {
            need_principal(principal)?;
            let At(j, a) = &principal.body else {
                return Err(CalcError::PrincipalShape(principal.to_string(), "glob"));
            };
            let mut prem = conclusion.clone();
            prem.insert(Member::new(j.clone(), a.as_ref().clone()));
            Ok(vec![prem])
        }
        RuleTag::Eta { principal } => {
            need_principal(principal)?;
            if !matches!(principal.body, Mu(..) | Nu(..)) {
                return Err(CalcError::PrincipalShape(principal.to_string(), "eta"));
            }
            let mut prem = conclusion.clone();
            prem.insert(Member::new(
                principal.nom.clone(),
                unfold(&principal.body).expect("fixpoint"),
            ));
            Ok(vec![prem])
        }
        RuleTag::Mod { .. } | RuleTag::Weak => Err(CalcError::PremiseMismatch(
            tag.name(),
            "instance not determined by the conclusion".into(),
            String::new(),
        )),
    }
}

/// Validate a full rule instance against the conclusion.
pub fn check_inf_instance(
    conclusion: &PlainSequent,
    tag: &RuleTag,
    premises: &[PlainSequent],
    _ctx: &OriginalityContext,
) -> Result<(), CalcError> {
    use Formula::*;
    match tag {
        RuleTag::Weak => {
            if premises.len() != 1 {
                return Err(CalcError::PremiseCount("weak", 1, premises.len()));
            }
            if premises[0].is_subset(conclusion) {
                Ok(())
            } else {
                Err(CalcError::NotSubset)
            }
        }
        RuleTag::Mod { principal, fresh } => {
            if premises.len() != 1 {
                return Err(CalcError::PremiseCount("mod", 1, premises.len()));
            }
            if !conclusion.contains(principal) {
                return Err(CalcError::MissingPrincipal(principal.to_string()));
            }
            let Boxm(phi) = &principal.body else {
                return Err(CalcError::PrincipalShape(principal.to_string(), "mod"));
            };
            if sequent_nominals(conclusion).contains(fresh) {
                return Err(CalcError::NotFresh(fresh.clone()));
            }
            let prem = &premises[0];
            if !conclusion.is_subset(prem) {
                return Err(CalcError::PremiseMismatch(
                    "mod",
                    seq_print(conclusion),
                    seq_print(prem),
                ));
            }
            let box_intro = Member::new(fresh.clone(), phi.as_ref().clone());
            if !prem.contains(&box_intro) {
                return Err(CalcError::PremiseMismatch(
                    "mod",
                    box_intro.to_string(),
                    seq_print(prem),
                ));
            }
            for m in prem.difference(conclusion) {
                if m.nom != *fresh {
                    return Err(CalcError::BadModMember(m.to_string()));
                }
                if m.body == *phi.as_ref() {
                    continue;
                }
                let dia = Member::new(
                    principal.nom.clone(),
                    Formula::dia(m.body.clone()),
                );
                if !conclusion.contains(&dia) {
                    return Err(CalcError::BadModMember(m.to_string()));
                }
            }
            Ok(())
        }
        _ => {
            let want = build_premises(conclusion, tag)?;
            if premises.len() != want.len() {
                return Err(CalcError::PremiseCount(
                    tag.name(),
                    want.len(),
                    premises.len(),
                ));
            }
            for (got, exp) in premises.iter().zip(&want) {
                if got != exp {
                    return Err(CalcError::PremiseMismatch(
                        tag.name(),
                        seq_print(exp),
                        seq_print(got),
                    ));
                }
            }
            Ok(())
        }
    }
}

/// A rule application is repeating when every premise equals the conclusion.
pub fn is_repeating(conclusion: &PlainSequent, premises: &[PlainSequent]) -> bool {
    premises.iter().all(|p| p == conclusion)
}

/// One trace step across a rule application.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum TraceKind {
    /// The member is carried over unchanged.
    Silent,
    /// A non-silent, non-unfolding step.
    Step,
    /// A fixpoint unfolding of the given variable.
    Unfold(String),
}

/// Does the pair `(from, to)` form a trace step across the given rule
/// application, and of which kind?  Callers ensure `from` is in the
/// conclusion and `to` in the selected premise.
pub fn trace_step(
    tag: &RuleTag,
    premise_index: usize,
    from: &Member,
    to: &Member,
) -> Option<TraceKind> {
    use Formula::*;
    if from == to {
        return Some(TraceKind::Silent);
    }
    match tag {
        RuleTag::Or { principal } if from == principal => {
            let Or(a, b) = &from.body else { return None };
            let la = Member::new(from.nom.clone(), a.as_ref().clone());
            let lb = Member::new(from.nom.clone(), b.as_ref().clone());
            (*to == la || *to == lb).then_some(TraceKind::Step)
        }
        RuleTag::And { principal } if from == principal => {
            let And(a, b) = &from.body else { return None };
            let want = if premise_index == 0 { a } else { b };
            (*to == Member::new(from.nom.clone(), want.as_ref().clone()))
                .then_some(TraceKind::Step)
        }
        RuleTag::Glob { principal } if from == principal => {
            let At(j, a) = &from.body else { return None };
            (*to == Member::new(j.clone(), a.as_ref().clone())).then_some(TraceKind::Step)
        }
        RuleTag::Eq { principal, side } if from == principal => {
            let (_, j) = side.as_apartness()?;
            (*to == Member::new(j.to_string(), from.body.clone())).then_some(TraceKind::Step)
        }
        RuleTag::Eta { principal } if from == principal => {
            let (Mu(x, _) | Nu(x, _)) = &from.body else {
                return None;
            };
            let unf = Member::new(from.nom.clone(), unfold(&from.body).ok()?);
            (*to == unf).then_some(TraceKind::Unfold(x.clone()))
        }
        RuleTag::Mod { principal, fresh } => {
            if from == principal {
                let Boxm(phi) = &from.body else { return None };
                (*to == Member::new(fresh.clone(), phi.as_ref().clone()))
                    .then_some(TraceKind::Step)
            } else if from.nom == principal.nom {
                let Dia(psi) = &from.body else { return None };
                (*to == Member::new(fresh.clone(), psi.as_ref().clone()))
                    .then_some(TraceKind::Step)
            } else {
                None
            }
        }
        _ => None,
    }
}

/// The deterministic derived rule: the unique non-repeating instance of the
/// and/or/Glob/eta rules with the `<`-smallest principal, if any.
pub fn deterministic_step(
    g: &PlainSequent,
    _ctx: &OriginalityContext,
) -> Option<(RuleTag, Vec<PlainSequent>)> {
    use Formula::*;
    let mut best: Option<(String, RuleTag, Vec<PlainSequent>)> = None;
    for m in g {
        let tag = match &m.body {
            And(..) => RuleTag::And {
                principal: m.clone(),
            },
            Or(..) => RuleTag::Or {
                principal: m.clone(),
            },
            At(..) => RuleTag::Glob {
                principal: m.clone(),
            },
            Mu(..) | Nu(..) => RuleTag::Eta {
                principal: m.clone(),
            },
            _ => continue,
        };
        let premises = build_premises(g, &tag).expect("shape matched");
        if is_repeating(g, &premises) {
            continue;
        }
        let key = m.to_string();
        if best.as_ref().map(|(k, _, _)| key < *k).unwrap_or(true) {
            best = Some((key, tag, premises));
        }
    }
    best.map(|(_, t, p)| (t, p))
}

/// The ground derived rule: deterministic application of `Eq`/`Com` instances
/// that concern original nominals.  Callers must have exhausted the
/// deterministic rule first.
pub fn ground_step(
    g: &PlainSequent,
    ctx: &OriginalityContext,
) -> Option<(RuleTag, Vec<PlainSequent>)> {
    assert!(
        deterministic_step(g, ctx).is_none(),
        "ground rule requires the deterministic rule to be exhausted"
    );
    // Candidate instances as (principal print, tag rank, premise prints).
    let mut cands: Vec<(String, u8, String, RuleTag, Vec<PlainSequent>)> = Vec::new();
    // Condition 1: non-repeating Com with both nominals original.
    for m in g {
        if let Some((i, j)) = m.as_apartness() {
            if ctx.is_original(i) && ctx.is_original(j) {
                let tag = RuleTag::Com {
                    principal: m.clone(),
                };
                let premises = build_premises(g, &tag).expect("com shape");
                if !is_repeating(g, &premises) {
                    cands.push(instance_key(m, &tag, &premises));
                }
            }
        }
    }
    // Condition 2: non-repeating Eq with principal @j phi, side j != i, where
    // i is a `<`-minimal original nominal admitting such an instance.
    let mut eq_cands: Vec<(String, (String, u8, String, RuleTag, Vec<PlainSequent>))> = Vec::new();
    for side in g {
        let Some((j, i)) = side.as_apartness() else {
            continue;
        };
        if !ctx.is_original(i) {
            continue;
        }
        for m in g {
            if m == side || m.nom != j {
                continue;
            }
            let tag = RuleTag::Eq {
                principal: m.clone(),
                side: side.clone(),
            };
            let premises = build_premises(g, &tag).expect("eq shape");
            if !is_repeating(g, &premises) {
                eq_cands.push((nominal_print(i), instance_key(m, &tag, &premises)));
            }
        }
    }
    if let Some(min_i) = eq_cands.iter().map(|(i, _)| i.clone()).min() {
        for (i, c) in eq_cands {
            if i == min_i {
                cands.push(c);
            }
        }
    }
    cands
        .into_iter()
        .min_by(|a, b| (&a.0, a.1, &a.2).cmp(&(&b.0, b.1, &b.2)))
        .map(|(_, _, _, t, p)| (t, p))
}

fn nominal_print(i: &str) -> String {
    Formula::nom(i).to_string()
}

fn instance_key(
    principal: &Member,
    tag: &RuleTag,
    premises: &[PlainSequent],
) -> (String, u8, String, RuleTag, Vec<PlainSequent>) {
    let prem_print = premises
        .iter()
        .map(seq_print)
        .collect::<Vec<_>>()
        .join(" | ");
    (
        principal.to_string(),
        tag.rank(),
        prem_print,
        tag.clone(),
        premises.to_vec(),
    )
}

/// Smallest reserved nominal `_n0, _n1, ...` not occurring in the sequent.
pub fn fresh_nominal(g: &PlainSequent) -> String {
    let used = sequent_nominals(g);
    for n in 0.. {
        let cand = format!("_n{n}");
        if !used.contains(&cand) {
            return cand;
        }
    }
    unreachable!()
}

/// The narrowed modal rule: a `Mod` step on `principal` introducing `j` with
/// the diamond set taken maximally, immediately followed by weakening away
/// every member prefixed by a non-original nominal other than `j`.  When the
/// principal's nominal is original and no other non-original members are
/// present, this is a plain `Mod` premise.
pub fn narrow_modal(
    g: &PlainSequent,
    principal: &Member,
    j: &str,
    ctx: &OriginalityContext,
) -> Result<PlainSequent, CalcError> {
    use Formula::*;
    if !g.contains(principal) {
        return Err(CalcError::MissingPrincipal(principal.to_string()));
    }
    let Boxm(phi) = &principal.body else {
        return Err(CalcError::PrincipalShape(principal.to_string(), "mod"));
    };
    if sequent_nominals(g).contains(j) {
        return Err(CalcError::NotFresh(j.to_string()));
    }
    let mut prem = g.clone();
    prem.insert(Member::new(j, phi.as_ref().clone()));
    for m in g {
        if m.nom == principal.nom {
            if let Dia(psi) = &m.body {
                prem.insert(Member::new(j, psi.as_ref().clone()));
            }
        }
    }
    prem.retain(|m| m.nom == j || ctx.is_original(&m.nom));
    Ok(prem)
}

/// Check the reachability invariants that every sequent derivable from a
/// root `{@r rho}` by the derived rules satisfies.
pub fn check_reachability_invariants(
    g: &PlainSequent,
    ctx: &OriginalityContext,
    closure_size: usize,
) -> Result<(), String> {
    let mut non_original: BTreeSet<String> = BTreeSet::new();
    for m in g {
        for i in m.body.nominals() {
            if !ctx.is_original(&i) {
                return Err(format!(
                    "non-original nominal '{i} occurs in the body of {m}"
                ));
            }
        }
        if let Some((_, j)) = m.as_apartness() {
            if !ctx.is_original(j) {
                return Err(format!("apartness target '{j} in {m} is not original"));
            }
        }
        if !ctx.is_original(&m.nom) {
            non_original.insert(m.nom.clone());
        }
    }
    if non_original.len() > 1 {
        return Err(format!(
            "more than one non-original nominal occurs: {non_original:?}"
        ));
    }
    let bound = closure_size + ctx.originals.len();
    for i in sequent_nominals(g) {
        let count = g.iter().filter(|m| m.nom == i).count();
        if count > bound {
            return Err(format!(
                "{count} members prefixed by '{i} exceed the bound {bound}"
            ));
        }
    }
    Ok(())
}
