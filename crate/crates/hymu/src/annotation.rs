//! Name words, their combinatorics (subsequence, meet, restriction, the
//! order used by thinning), annotated sequents, and validation of every
//! annotated rule instance.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::calculus::{Member, OriginalityContext, PlainSequent};
use crate::syntax::{unfold, Formula, VariableOrder};

/// The `idx`-th name for fixpoint variable `var`, printed `var.idx`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Name {
    pub var: String,
    pub idx: u32,
}

impl Name {
    pub fn new(var: impl Into<String>, idx: u32) -> Name {
        Name {
            var: var.into(),
            idx,
        }
    }

    /// Sort key for "highest ranking" comparisons: smaller key = higher
    /// ranking.  Names are ranked by their variable's rank, ties by index.
    pub fn rank_key(&self, order: &VariableOrder) -> (usize, u32) {
        (order.rank(&self.var).unwrap_or(usize::MAX), self.idx)
    }
}

impl fmt::Display for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.var, self.idx)
    }
}

/// A finite word over names.  Controls and annotations are non-repeating.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default)]
pub struct NameWord(pub Vec<Name>);

impl NameWord {
    pub fn empty() -> NameWord {
        NameWord(Vec::new())
    }

    pub fn of(names: &[Name]) -> NameWord {
        NameWord(names.to_vec())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, n: &Name) -> bool {
        self.0.contains(n)
    }

    pub fn push(&self, n: Name) -> NameWord {
        let mut v = self.0.clone();
        v.push(n);
        NameWord(v)
    }

    pub fn non_repeating(&self) -> bool {
        let set: BTreeSet<&Name> = self.0.iter().collect();
        set.len() == self.0.len()
    }

    /// Non-decreasing with respect to the variable order.
    pub fn non_decreasing(&self, order: &VariableOrder) -> bool {
        self.0
            .windows(2)
            .all(|w| order.rank(&w[0].var) <= order.rank(&w[1].var))
    }

    /// `a <= x`: no name of a variable ranked strictly below `x` (i.e. with
    /// `y > x` in the order) occurs.
    pub fn le_var(&self, x: &str, order: &VariableOrder) -> bool {
        let rx = order.rank(x);
        self.0.iter().all(|n| order.rank(&n.var) <= rx)
    }

    pub fn is_prefix_of(&self, other: &NameWord) -> bool {
        other.0.len() >= self.0.len() && other.0[..self.0.len()] == self.0[..]
    }

    /// Keep only names occurring in `keep`.
    pub fn filtered(&self, keep: &BTreeSet<Name>) -> NameWord {
        NameWord(self.0.iter().filter(|n| keep.contains(n)).cloned().collect())
    }
}

impl fmt::Display for NameWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|n| n.to_string()).collect();
        f.write_str(&parts.join(" "))
    }
}

/// `a | x`: remove all names of variables ranked strictly below `x`.
pub fn restrict(a: &NameWord, x: &str, order: &VariableOrder) -> NameWord {
    let rx = order.rank(x);
    NameWord(
        a.0.iter()
            .filter(|n| order.rank(&n.var) <= rx)
            .cloned()
            .collect(),
    )
}

/// Is `a` a subsequence of `b`?
pub fn subseq(a: &NameWord, b: &NameWord) -> bool {
    let mut i = 0;
    for n in &b.0 {
        if i < a.0.len() && a.0[i] == *n {
            i += 1;
        }
    }
    i == a.0.len()
}

/// The unique longest common subsequence of `a` and `b`, if unique.
pub fn meet(a: &NameWord, b: &NameWord) -> Option<NameWord> {
    let n = a.0.len();
    let m = b.0.len();
    // Longest-common-subsequence lengths.
    let mut len = vec![vec![0usize; m + 1]; n + 1];
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            len[i][j] = if a.0[i] == b.0[j] {
                len[i + 1][j + 1] + 1
            } else {
                len[i + 1][j].max(len[i][j + 1])
            };
        }
    }
    // Enumerate all distinct longest common subsequences; words here are
    // short (bounded by the control), so this stays small.
    fn all(
        a: &NameWord,
        b: &NameWord,
        len: &[Vec<usize>],
        i: usize,
        j: usize,
    ) -> BTreeSet<Vec<Name>> {
        if len[i][j] == 0 {
            return BTreeSet::from([Vec::new()]);
        }
        let mut out = BTreeSet::new();
        if a.0[i] == b.0[j] && len[i][j] == len[i + 1][j + 1] + 1 {
            for mut tail in all(a, b, len, i + 1, j + 1) {
                tail.insert(0, a.0[i].clone());
                out.insert(tail);
            }
        }
        if len[i][j] == len[i + 1][j] {
            out.extend(all(a, b, len, i + 1, j));
        }
        if len[i][j] == len[i][j + 1] {
            out.extend(all(a, b, len, i, j + 1));
        }
        out
    }
    let words = all(a, b, &len, 0, 0);
    if words.len() != 1 {
        return None;
    }
    let cand = NameWord(words.into_iter().next().unwrap());
    // A unique *longest* common subsequence need not be the greatest lower
    // bound: a shorter maximal common subsequence may fail to embed into it.
    // Verify by enumerating the subsequences of the shorter word.
    let (shorter, longer) = if a.0.len() <= b.0.len() { (a, b) } else { (b, a) };
    let k = shorter.0.len();
    assert!(k < 30, "name words stay short");
    for mask in 0u32..(1 << k) {
        let sub = NameWord(
            shorter
                .0
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, n)| n.clone())
                .collect(),
        );
        if subseq(&sub, longer) && !subseq(&sub, &cand) {
            return None;
        }
    }
    Some(cand)
}

/// The strict order `b <_a c` used by thinning.  Both `b` and `c` must be
/// subsequences of `a`.
pub fn ann_less(b: &NameWord, c: &NameWord, a: &NameWord, order: &VariableOrder) -> bool {
    if !subseq(b, a) || !subseq(c, a) {
        return false;
    }
    // Clause 1: some nu-variable x with c|x a proper prefix of b|x.
    for x in order.vars() {
        if !order.is_nu(x) {
            continue;
        }
        let bx = restrict(b, x, order);
        let cx = restrict(c, x, order);
        if cx.len() < bx.len() && cx.is_prefix_of(&bx) {
            return true;
        }
    }
    // Clause 2: at the first divergence, names of the same variable with the
    // b-side name occurring to the left in `a`.
    let k = b
        .0
        .iter()
        .zip(&c.0)
        .take_while(|(x, y)| x == y)
        .count();
    if k < b.0.len() && k < c.0.len() {
        let z = &b.0[k];
        let z2 = &c.0[k];
        if z.var == z2.var && z != z2 {
            let pz = a.0.iter().position(|n| n == z);
            let pz2 = a.0.iter().position(|n| n == z2);
            if let (Some(p1), Some(p2)) = (pz, pz2) {
                if p1 < p2 {
                    return true;
                }
            }
        }
    }
    false
}

// ---------------------------------------------------------------------------
// Annotated sequents

/// A sequent member together with its annotation.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct AnnMember {
    pub member: Member,
    pub ann: NameWord,
}

impl AnnMember {
    pub fn new(member: Member, ann: NameWord) -> AnnMember {
        AnnMember { member, ann }
    }
}

impl fmt::Display for AnnMember {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.ann.is_empty() {
            write!(f, "{}", self.member)
        } else {
            write!(f, "{} ^ {}", self.member, self.ann)
        }
    }
}

/// An annotated sequent: a control word and a set of annotated members.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default)]
pub struct AnnotatedSequent {
    pub control: NameWord,
    pub members: BTreeSet<AnnMember>,
}

impl AnnotatedSequent {
    pub fn new(control: NameWord, members: BTreeSet<AnnMember>) -> AnnotatedSequent {
        AnnotatedSequent { control, members }
    }

    pub fn underlying(&self) -> PlainSequent {
        self.members.iter().map(|m| m.member.clone()).collect()
    }

    /// Structural well-formedness: non-repeating control, and every
    /// annotation non-repeating, non-decreasing and a subsequence of the
    /// control.
    pub fn well_formed(&self, order: &VariableOrder) -> Result<(), AnnError> {
        if !self.control.non_repeating() {
            return Err(AnnError::RepeatingWord(self.control.to_string()));
        }
        for m in &self.members {
            if !m.ann.non_repeating() {
                return Err(AnnError::RepeatingWord(m.ann.to_string()));
            }
            if !m.ann.non_decreasing(order) {
                return Err(AnnError::NotMonotone(m.to_string()));
            }
            if !subseq(&m.ann, &self.control) {
                return Err(AnnError::NotInControl(m.to_string()));
            }
        }
        Ok(())
    }

    /// Names occurring in some annotation.
    pub fn used_names(&self) -> BTreeSet<Name> {
        self.members
            .iter()
            .flat_map(|m| m.ann.0.iter().cloned())
            .collect()
    }
}

impl fmt::Display for AnnotatedSequent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.members.iter().map(|m| m.to_string()).collect();
        write!(f, "{} |- {}", self.control, parts.join(", "))
    }
}

/// The set of members whose annotation contains the name `x`, as a plain
/// sequent.
pub fn names_theory(g: &AnnotatedSequent, x: &Name) -> PlainSequent {
    g.members
        .iter()
        .filter(|m| m.ann.contains(x))
        .map(|m| m.member.clone())
        .collect()
}

/// The annotated axioms: empty control, empty annotations, underlying plain
/// axiom.
pub fn is_annotated_axiom(g: &AnnotatedSequent) -> bool {
    g.control.is_empty()
        && g.members.iter().all(|m| m.ann.is_empty())
        && crate::calculus::is_axiom(&g.underlying())
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AnnError {
    #[error("word {0} repeats a name")]
    RepeatingWord(String),
    #[error("annotation of {0} is not non-decreasing")]
    NotMonotone(String),
    #[error("annotation of {0} is not a subsequence of the control")]
    NotInControl(String),
    #[error("wrong premise count for {0}: expected {1}, found {2}")]
    PremiseCount(&'static str, usize, usize),
    #[error("principal {0} not in the conclusion")]
    MissingPrincipal(String),
    #[error("principal {0} has the wrong shape for rule {1}")]
    PrincipalShape(String, &'static str),
    #[error("side formula {0} is not an apartness member matching the principal")]
    BadSide(String),
    #[error("annotation {0} violates the side condition `b <= {1}`")]
    AnnotationTooLow(String, String),
    #[error("name {0} is not fresh for the control")]
    NameNotFresh(String),
    #[error("nominal '{0} is not fresh for the conclusion")]
    NominalNotFresh(String),
    #[error("control mismatch: expected {0}, found {1}")]
    ControlMismatch(String, String),
    #[error("premise mismatch for {0}: expected {1}, found {2}")]
    PremiseMismatch(&'static str, String, String),
    #[error("member {0} not licensed by the rule")]
    BadMember(String),
    #[error("reset name {0} does not occur in any annotation")]
    ResetUnused(String),
    #[error("reset prefixes disagree: {0} vs {1}")]
    ResetPrefixes(String, String),
    #[error("variable {0} occurs in a formula outside the reset part")]
    ResetVariablePresent(String),
    #[error("expansion condition fails on member {0}")]
    ExpCondition(String),
    #[error("thinning requires exactly one removed member")]
    ThinShape,
    #[error("thinning order violated: {0} is not below {1}")]
    ThinOrder(String, String),
    #[error("premise is not a subset of the conclusion")]
    NotSubset,
    #[error("axiom leaf must have empty control and annotations")]
    AxiomShape,
}

/// Annotated rule tags with their instance parameters.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum SafRuleTag {
    And { principal: AnnMember },
    Or { principal: AnnMember },
    Eq { principal: AnnMember, side: AnnMember },
    Com { principal: AnnMember },
    Glob { principal: AnnMember },
    Mod { principal: AnnMember, fresh: String },
    Eta { principal: AnnMember },
    Rec { principal: AnnMember, name: Name },
    Reset { name: Name },
    Exp,
    Weak,
    Thin,
}

impl SafRuleTag {
    pub fn name(&self) -> &'static str {
        match self {
            SafRuleTag::And { .. } => "and",
            SafRuleTag::Or { .. } => "or",
            SafRuleTag::Eq { .. } => "eq",
            SafRuleTag::Com { .. } => "com",
            SafRuleTag::Glob { .. } => "glob",
            SafRuleTag::Mod { .. } => "mod",
            SafRuleTag::Eta { .. } => "eta",
            SafRuleTag::Rec { .. } => "rec",
            SafRuleTag::Reset { .. } => "reset",
            SafRuleTag::Exp => "exp",
            SafRuleTag::Weak => "weak",
            SafRuleTag::Thin => "thin",
        }
    }

    /// Is this tag an unfolding of the given variable (eta or Rec)?
    pub fn unfolds(&self) -> Option<&str> {
        match self {
            SafRuleTag::Eta { principal } => match &principal.member.body {
                Formula::Mu(x, _) | Formula::Nu(x, _) => Some(x),
                _ => None,
            },
            SafRuleTag::Rec { principal, .. } => match &principal.member.body {
                Formula::Nu(x, _) => Some(x),
                _ => None,
            },
            _ => None,
        }
    }
}

fn with_member(g: &AnnotatedSequent, m: AnnMember) -> AnnotatedSequent {
    let mut out = g.clone();
    out.members.insert(m);
    out
}

/// The premises prescribed by the annotated rules whose instance is
/// determined by the conclusion and tag (everything except Mod, Exp, Weak,
/// Reset, Thin).
pub fn build_saf_premises(
    conclusion: &AnnotatedSequent,
    tag: &SafRuleTag,
    order: &VariableOrder,
) -> Result<Vec<AnnotatedSequent>, AnnError> {
    use Formula::*;
    let need = |p: &AnnMember| {
        if conclusion.members.contains(p) {
            Ok(())
        } else {
            Err(AnnError::MissingPrincipal(p.to_string()))
        }
    };
    match tag {
        SafRuleTag::And { principal } => {
            need(principal)?;
            let And(a, b) = &principal.member.body else {
                return Err(AnnError::PrincipalShape(principal.to_string(), "and"));
            };
            let nom = principal.member.nom.clone();
            let left = with_member(
                conclusion,
                AnnMember::new(Member::new(nom.clone(), a.as_ref().clone()), principal.ann.clone()),
            );
            let right = with_member(
                conclusion,
                AnnMember::new(Member::new(nom, b.as_ref().clone()), principal.ann.clone()),
            );
            Ok(vec![left, right])
        }
        SafRuleTag::Or { principal } => {
            need(principal)?;
            let Or(a, b) = &principal.member.body else {
                return Err(AnnError::PrincipalShape(principal.to_string(), "or"));
            };
            let nom = principal.member.nom.clone();
            let mut prem = conclusion.clone();
            prem.members.insert(AnnMember::new(
                Member::new(nom.clone(), a.as_ref().clone()),
                principal.ann.clone(),
            ));
            prem.members.insert(AnnMember::new(
                Member::new(nom, b.as_ref().clone()),
                principal.ann.clone(),
            ));
            Ok(vec![prem])
        }
        SafRuleTag::Eq { principal, side } => {
            need(principal)?;
            need(side)?;
            if side.member == principal.member {
                return Err(AnnError::BadSide(side.to_string()));
            }
            let Some((i, j)) = side.member.as_apartness() else {
                return Err(AnnError::BadSide(side.to_string()));
            };
            if i != principal.member.nom {
                return Err(AnnError::BadSide(side.to_string()));
            }
            Ok(vec![with_member(
                conclusion,
                AnnMember::new(
                    Member::new(j.to_string(), principal.member.body.clone()),
                    principal.ann.clone(),
                ),
            )])
        }
        SafRuleTag::Com { principal } => {
            need(principal)?;
            let Some((i, j)) = principal.member.as_apartness() else {
                return Err(AnnError::PrincipalShape(principal.to_string(), "com"));
            };
            Ok(vec![with_member(
                conclusion,
                AnnMember::new(
                    Member::new(j.to_string(), Formula::Nom(i.to_string(), false)),
                    principal.ann.clone(),
                ),
            )])
        }
        SafRuleTag::Glob { principal } => {
            need(principal)?;
            let At(j, a) = &principal.member.body else {
                return Err(AnnError::PrincipalShape(principal.to_string(), "glob"));
            };
            Ok(vec![with_member(
                conclusion,
                AnnMember::new(
                    Member::new(j.clone(), a.as_ref().clone()),
                    principal.ann.clone(),
                ),
            )])
        }
        SafRuleTag::Eta { principal } => {
            need(principal)?;
            let (Mu(x, _) | Nu(x, _)) = &principal.member.body else {
                return Err(AnnError::PrincipalShape(principal.to_string(), "eta"));
            };
            if !principal.ann.le_var(x, order) {
                return Err(AnnError::AnnotationTooLow(
                    principal.ann.to_string(),
                    x.clone(),
                ));
            }
            Ok(vec![with_member(
                conclusion,
                AnnMember::new(
                    Member::new(
                        principal.member.nom.clone(),
                        unfold(&principal.member.body).expect("fixpoint"),
                    ),
                    principal.ann.clone(),
                ),
            )])
        }
        SafRuleTag::Rec { principal, name } => {
            need(principal)?;
            let Nu(x, _) = &principal.member.body else {
                return Err(AnnError::PrincipalShape(principal.to_string(), "rec"));
            };
            if name.var != *x {
                return Err(AnnError::PrincipalShape(principal.to_string(), "rec"));
            }
            if !principal.ann.le_var(x, order) {
                return Err(AnnError::AnnotationTooLow(
                    principal.ann.to_string(),
                    x.clone(),
                ));
            }
            if conclusion.control.contains(name) {
                return Err(AnnError::NameNotFresh(name.to_string()));
            }
            let mut prem = conclusion.clone();
            prem.control = conclusion.control.push(name.clone());
            prem.members.insert(AnnMember::new(
                Member::new(
                    principal.member.nom.clone(),
                    unfold(&principal.member.body).expect("fixpoint"),
                ),
                principal.ann.push(name.clone()),
            ));
            Ok(vec![prem])
        }
        _ => Err(AnnError::PremiseMismatch(
            tag.name(),
            "instance not determined by the conclusion".into(),
            String::new(),
        )),
    }
}

/// Validate a full annotated rule instance.
pub fn check_saf_instance(
    conclusion: &AnnotatedSequent,
    tag: &SafRuleTag,
    premises: &[AnnotatedSequent],
    _ctx: &OriginalityContext,
    order: &VariableOrder,
) -> Result<(), AnnError> {
    use Formula::*;
    conclusion.well_formed(order)?;
    for p in premises {
        p.well_formed(order)?;
    }
    let one = |name: &'static str| {
        if premises.len() == 1 {
            Ok(&premises[0])
        } else {
            Err(AnnError::PremiseCount(name, 1, premises.len()))
        }
    };
    match tag {
        SafRuleTag::Weak => {
            let prem = one("weak")?;
            if prem.control != conclusion.control {
                return Err(AnnError::ControlMismatch(
                    conclusion.control.to_string(),
                    prem.control.to_string(),
                ));
            }
            if prem.members.is_subset(&conclusion.members) {
                Ok(())
            } else {
                Err(AnnError::NotSubset)
            }
        }
        SafRuleTag::Mod { principal, fresh } => {
            let prem = one("mod")?;
            if !conclusion.members.contains(principal) {
                return Err(AnnError::MissingPrincipal(principal.to_string()));
            }
            let Boxm(phi) = &principal.member.body else {
                return Err(AnnError::PrincipalShape(principal.to_string(), "mod"));
            };
            if crate::calculus::sequent_nominals(&conclusion.underlying()).contains(fresh) {
                return Err(AnnError::NominalNotFresh(fresh.clone()));
            }
            if prem.control != conclusion.control {
                return Err(AnnError::ControlMismatch(
                    conclusion.control.to_string(),
                    prem.control.to_string(),
                ));
            }
            if !conclusion.members.is_subset(&prem.members) {
                return Err(AnnError::PremiseMismatch(
                    "mod",
                    conclusion.to_string(),
                    prem.to_string(),
                ));
            }
            let box_intro = AnnMember::new(
                Member::new(fresh.clone(), phi.as_ref().clone()),
                principal.ann.clone(),
            );
            if !prem.members.contains(&box_intro) {
                return Err(AnnError::PremiseMismatch(
                    "mod",
                    box_intro.to_string(),
                    prem.to_string(),
                ));
            }
            for m in prem.members.difference(&conclusion.members) {
                if m.member.nom != *fresh {
                    return Err(AnnError::BadMember(m.to_string()));
                }
                if *m == box_intro {
                    continue;
                }
                // Each extra @j psi must mirror a diamond @i <> psi with the
                // same annotation.
                let dia = AnnMember::new(
                    Member::new(
                        principal.member.nom.clone(),
                        Formula::dia(m.member.body.clone()),
                    ),
                    m.ann.clone(),
                );
                if !conclusion.members.contains(&dia) {
                    return Err(AnnError::BadMember(m.to_string()));
                }
            }
            Ok(())
        }
        SafRuleTag::Reset { name } => {
            let prem = one("reset")?;
            if prem.control != conclusion.control {
                return Err(AnnError::ControlMismatch(
                    conclusion.control.to_string(),
                    prem.control.to_string(),
                ));
            }
            let tracked: Vec<&AnnMember> = conclusion
                .members
                .iter()
                .filter(|m| m.ann.contains(name))
                .collect();
            if tracked.is_empty() {
                return Err(AnnError::ResetUnused(name.to_string()));
            }
            // All tracked members must share the prefix ending at the name.
            let cut = |w: &NameWord| -> NameWord {
                let k = w.0.iter().position(|n| n == name).expect("name present");
                NameWord(w.0[..=k].to_vec())
            };
            let merged_ann = cut(&tracked[0].ann);
            for m in &tracked {
                if cut(&m.ann) != merged_ann {
                    return Err(AnnError::ResetPrefixes(
                        merged_ann.to_string(),
                        cut(&m.ann).to_string(),
                    ));
                }
            }
            // The untracked part must not mention the variable at all.
            for m in &conclusion.members {
                if !m.ann.contains(name) && m.member.body.mentions_var(&name.var) {
                    return Err(AnnError::ResetVariablePresent(name.var.clone()));
                }
            }
            let mut want: BTreeSet<AnnMember> = conclusion
                .members
                .iter()
                .filter(|m| !m.ann.contains(name))
                .cloned()
                .collect();
            for m in &tracked {
                want.insert(AnnMember::new(m.member.clone(), merged_ann.clone()));
            }
            if prem.members == want {
                Ok(())
            } else {
                Err(AnnError::PremiseMismatch(
                    "reset",
                    AnnotatedSequent::new(prem.control.clone(), want).to_string(),
                    prem.to_string(),
                ))
            }
        }
        SafRuleTag::Exp => {
            let prem = one("exp")?;
            if !subseq(&prem.control, &conclusion.control) {
                return Err(AnnError::ControlMismatch(
                    conclusion.control.to_string(),
                    prem.control.to_string(),
                ));
            }
            // Every premise member must expand to some conclusion member and
            // vice versa: same formula, b ⊑ b', meet(b', a) ⊑ b.
            let matches = |p: &AnnMember, c: &AnnMember| {
                p.member == c.member
                    && subseq(&p.ann, &c.ann)
                    && meet(&c.ann, &prem.control)
                        .map(|m| subseq(&m, &p.ann))
                        .unwrap_or(false)
            };
            for p in &prem.members {
                if !conclusion.members.iter().any(|c| matches(p, c)) {
                    return Err(AnnError::ExpCondition(p.to_string()));
                }
            }
            for c in &conclusion.members {
                if !prem.members.iter().any(|p| matches(p, c)) {
                    return Err(AnnError::ExpCondition(c.to_string()));
                }
            }
            Ok(())
        }
        SafRuleTag::Thin => {
            let prem = one("thin")?;
            check_thinning(conclusion, prem, order)
        }
        _ => {
            let want = build_saf_premises(conclusion, tag, order)?;
            if premises.len() != want.len() {
                return Err(AnnError::PremiseCount(
                    tag.name(),
                    want.len(),
                    premises.len(),
                ));
            }
            for (got, exp) in premises.iter().zip(&want) {
                if got != exp {
                    return Err(AnnError::PremiseMismatch(
                        tag.name(),
                        exp.to_string(),
                        got.to_string(),
                    ));
                }
            }
            Ok(())
        }
    }
}

/// Validate a thinning step: the conclusion carries two annotations `b`, `c`
/// of the same formula with `b <_{a'} c`; the premise drops the `c`-copy and
/// trims the control to the names still used.
pub fn check_thinning(
    conclusion: &AnnotatedSequent,
    premise: &AnnotatedSequent,
    order: &VariableOrder,
) -> Result<(), AnnError> {
    let removed: Vec<&AnnMember> = conclusion
        .members
        .difference(&premise.members)
        .collect();
    if removed.len() != 1 {
        return Err(AnnError::ThinShape);
    }
    let removed = removed[0];
    if !premise.members.is_subset(&conclusion.members) {
        return Err(AnnError::NotSubset);
    }
    if premise.members.len() != conclusion.members.len() - 1 {
        return Err(AnnError::ThinShape);
    }
    let kept_ok = premise.members.iter().any(|m| {
        m.member == removed.member
            && ann_less(&m.ann, &removed.ann, &conclusion.control, order)
    });
    if !kept_ok {
        return Err(AnnError::ThinOrder(
            removed.to_string(),
            conclusion.control.to_string(),
        ));
    }
    let used = premise.used_names();
    let want_control = conclusion.control.filtered(&used);
    if premise.control != want_control {
        return Err(AnnError::ControlMismatch(
            want_control.to_string(),
            premise.control.to_string(),
        ));
    }
    Ok(())
}

#[cfg(test)]
pub mod tests {
    use super::*;
    use crate::calculus::tests::{ctx_for, mem};
    use crate::syntax::{dependency_order, parse};

    pub fn nm(var: &str, idx: u32) -> Name {
        Name::new(var, idx)
    }

    pub fn word(names: &[(&str, u32)]) -> NameWord {
        NameWord(names.iter().map(|(v, i)| nm(v, *i)).collect())
    }

    /// Variable order x < y, x and y both nu-variables.
    fn xy_order() -> VariableOrder {
        dependency_order(&parse("nu x. [](x \\/ nu y. <>y)").unwrap()).unwrap()
    }

    /// Variable order with a mu-variable m and nu-variable x, m < x.
    fn mx_order() -> VariableOrder {
        dependency_order(&parse("mu m. <>(m /\\ nu x. []x)").unwrap()).unwrap()
    }

    #[test]
    fn restrict_examples() {
        let ord = xy_order();
        assert_eq!(
            restrict(&word(&[("x", 0), ("y", 0)]), "x", &ord),
            word(&[("x", 0)])
        );
        assert_eq!(restrict(&NameWord::empty(), "x", &ord), NameWord::empty());
        assert_eq!(
            restrict(&word(&[("x", 0), ("x", 1), ("y", 0)]), "y", &ord),
            word(&[("x", 0), ("x", 1), ("y", 0)])
        );
    }

    #[test]
    fn subseq_examples() {
        // x y ⊑ x z y (using distinct indices as stand-ins for letters).
        let x = nm("x", 0);
        let y = nm("y", 0);
        let z = nm("x", 1);
        assert!(subseq(
            &NameWord::of(&[x.clone(), y.clone()]),
            &NameWord::of(&[x.clone(), z.clone(), y.clone()])
        ));
        assert!(subseq(&NameWord::empty(), &NameWord::of(&[x.clone()])));
        assert!(!subseq(
            &NameWord::of(&[y.clone(), x.clone()]),
            &NameWord::of(&[x, y])
        ));
    }

    #[test]
    fn meet_examples() {
        let a = nm("x", 0);
        let b = nm("x", 1);
        let c = nm("y", 0);
        // meet(xzy, xy) = xy.
        assert_eq!(
            meet(
                &NameWord::of(&[a.clone(), b.clone(), c.clone()]),
                &NameWord::of(&[a.clone(), c.clone()])
            ),
            Some(NameWord::of(&[a.clone(), c.clone()]))
        );
        // meet(ab, ba) is undefined: two maximal common subsequences.
        assert_eq!(
            meet(
                &NameWord::of(&[a.clone(), b.clone()]),
                &NameWord::of(&[b.clone(), a.clone()])
            ),
            None
        );
        assert_eq!(
            meet(&NameWord::of(&[a.clone()]), &NameWord::empty()),
            Some(NameWord::empty())
        );
    }

    #[test]
    fn meet_is_glb_exhaustively() {
        // meet, when defined, is the greatest lower bound: check all pairs of
        // words up to length 3 over a 3-name alphabet (non-repeating).
        let names = [nm("x", 0), nm("x", 1), nm("y", 0)];
        let mut words: Vec<NameWord> = vec![NameWord::empty()];
        for n1 in &names {
            words.push(NameWord::of(&[n1.clone()]));
            for n2 in &names {
                if n2 == n1 {
                    continue;
                }
                words.push(NameWord::of(&[n1.clone(), n2.clone()]));
                for n3 in &names {
                    if n3 == n1 || n3 == n2 {
                        continue;
                    }
                    words.push(NameWord::of(&[n1.clone(), n2.clone(), n3.clone()]));
                }
            }
        }
        for a in &words {
            for b in &words {
                if let Some(m) = meet(a, b) {
                    assert!(subseq(&m, a) && subseq(&m, b));
                    for c in &words {
                        if subseq(c, a) && subseq(c, b) {
                            assert!(
                                subseq(c, &m),
                                "meet({a}, {b}) = {m} missed lower bound {c}"
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn ann_less_examples() {
        let ord = xy_order();
        // Clause 1: b = x0, c = ε, x is a nu-variable.
        assert!(ann_less(
            &word(&[("x", 0)]),
            &NameWord::empty(),
            &word(&[("x", 0)]),
            &ord
        ));
        // Clause 2: b = x0, c = x1, a = x0 x1.
        assert!(ann_less(
            &word(&[("x", 0)]),
            &word(&[("x", 1)]),
            &word(&[("x", 0), ("x", 1)]),
            &ord
        ));
        // Irreflexive.
        assert!(!ann_less(
            &word(&[("x", 0)]),
            &word(&[("x", 0)]),
            &word(&[("x", 0)]),
            &ord
        ));
        // Clause 1 quantifies over nu-variables only: with nu x ranked above
        // mu m, a lone m-name gives no clause-1 witness.
        let ordxm =
            dependency_order(&parse("nu x. <>(x /\\ mu m.(p \\/ <>m))").unwrap()).unwrap();
        assert!(ordxm.is_nu("x") && !ordxm.is_nu("m"));
        assert!(!ann_less(
            &word(&[("m", 0)]),
            &NameWord::empty(),
            &word(&[("m", 0)]),
            &ordxm
        ));
        assert!(ann_less(
            &word(&[("x", 0)]),
            &NameWord::empty(),
            &word(&[("x", 0)]),
            &ordxm
        ));
        // In mx_order (mu m ranked above nu x) the nu-restriction retains
        // m-names, so the literal clause-1 reading applies.
        let ordm = mx_order();
        assert!(ann_less(
            &word(&[("x", 0)]),
            &NameWord::empty(),
            &word(&[("x", 0)]),
            &ordm
        ));
    }

    #[test]
    fn annotated_sequent_well_formedness() {
        let ord = xy_order();
        let m = mem("i", "p");
        let good = AnnotatedSequent::new(
            word(&[("x", 0), ("y", 0)]),
            BTreeSet::from([AnnMember::new(m.clone(), word(&[("x", 0)]))]),
        );
        assert!(good.well_formed(&ord).is_ok());
        // Annotation not in control.
        let bad = AnnotatedSequent::new(
            word(&[("x", 0)]),
            BTreeSet::from([AnnMember::new(m.clone(), word(&[("y", 0)]))]),
        );
        assert!(bad.well_formed(&ord).is_err());
        // Decreasing annotation.
        let bad = AnnotatedSequent::new(
            word(&[("y", 0), ("x", 0)]),
            BTreeSet::from([AnnMember::new(m, word(&[("y", 0), ("x", 0)]))]),
        );
        assert!(bad.well_formed(&ord).is_err());
    }

    /// The recurring example: phi = nu x. [](x \/ []x).
    fn phi() -> Formula {
        parse("nu x. [](x \\/ []x)").unwrap()
    }

    fn phi_order() -> VariableOrder {
        dependency_order(&phi()).unwrap()
    }

    #[test]
    fn rec_instance_from_worked_proof() {
        let ord = phi_order();
        let ctx = ctx_for("r", "nu x. [](x \\/ []x)");
        let unf = unfold(&phi()).unwrap(); // [](phi \/ []phi)
        let principal = AnnMember::new(Member::new("j", phi()), word(&[("x", 0)]));
        let conclusion = AnnotatedSequent::new(
            word(&[("x", 0)]),
            BTreeSet::from([
                principal.clone(),
                AnnMember::new(Member::new("j", Formula::boxm(phi())), word(&[("x", 0)])),
            ]),
        );
        let tag = SafRuleTag::Rec {
            principal: principal.clone(),
            name: nm("x", 1),
        };
        let premise = AnnotatedSequent::new(
            word(&[("x", 0), ("x", 1)]),
            BTreeSet::from([
                principal.clone(),
                AnnMember::new(Member::new("j", Formula::boxm(phi())), word(&[("x", 0)])),
                AnnMember::new(Member::new("j", unf.clone()), word(&[("x", 0), ("x", 1)])),
            ]),
        );
        assert!(check_saf_instance(&conclusion, &tag, &[premise.clone()], &ctx, &ord).is_ok());
        // Weakening away the principal afterwards.
        let mut weakened = premise.clone();
        weakened.members.remove(&principal);
        assert!(
            check_saf_instance(&premise, &SafRuleTag::Weak, &[weakened], &ctx, &ord).is_ok()
        );
        // Rec with a name already in the control is rejected.
        let bad = SafRuleTag::Rec {
            principal,
            name: nm("x", 0),
        };
        let ps = build_saf_premises(&conclusion, &bad, &ord);
        assert!(matches!(ps, Err(AnnError::NameNotFresh(_))));
    }

    #[test]
    fn reset_and_exp_from_worked_proof() {
        let ord = phi_order();
        let ctx = ctx_for("r", "nu x. [](x \\/ []x)");
        let unf = unfold(&phi()).unwrap();
        let body = Member::new("k", unf); // @k (phi \/ []phi) stand-in
        let conclusion = AnnotatedSequent::new(
            word(&[("x", 0), ("x", 1)]),
            BTreeSet::from([AnnMember::new(body.clone(), word(&[("x", 0), ("x", 1)]))]),
        );
        let tag = SafRuleTag::Reset { name: nm("x", 0) };
        let reset_prem = AnnotatedSequent::new(
            word(&[("x", 0), ("x", 1)]),
            BTreeSet::from([AnnMember::new(body.clone(), word(&[("x", 0)]))]),
        );
        assert!(
            check_saf_instance(&conclusion, &tag, &[reset_prem.clone()], &ctx, &ord).is_ok()
        );
        // Exp trims the now-unused name from the control.
        let exp_prem = AnnotatedSequent::new(
            word(&[("x", 0)]),
            BTreeSet::from([AnnMember::new(body, word(&[("x", 0)]))]),
        );
        assert!(
            check_saf_instance(&reset_prem, &SafRuleTag::Exp, &[exp_prem], &ctx, &ord).is_ok()
        );
    }

    #[test]
    fn reset_rejects_variable_in_untracked_part() {
        let ord = phi_order();
        let ctx = ctx_for("r", "nu x. [](x \\/ []x)");
        let tracked = AnnMember::new(Member::new("j", phi()), word(&[("x", 0), ("x", 1)]));
        // The untracked member's formula mentions the variable x.
        let untracked = AnnMember::new(Member::new("j", Formula::boxm(phi())), NameWord::empty());
        let conclusion = AnnotatedSequent::new(
            word(&[("x", 0), ("x", 1)]),
            BTreeSet::from([tracked.clone(), untracked.clone()]),
        );
        let premise = AnnotatedSequent::new(
            word(&[("x", 0), ("x", 1)]),
            BTreeSet::from([
                AnnMember::new(tracked.member.clone(), word(&[("x", 0)])),
                untracked,
            ]),
        );
        let tag = SafRuleTag::Reset { name: nm("x", 0) };
        assert!(matches!(
            check_saf_instance(&conclusion, &tag, &[premise], &ctx, &ord),
            Err(AnnError::ResetVariablePresent(_))
        ));
    }

    #[test]
    fn thinning_from_worked_proof() {
        // Order x < y with both nu; use a root with that shape.
        let root = parse("nu x. [](x \\/ nu y. <>y)").unwrap();
        let ord = dependency_order(&root).unwrap();
        let f = Member::new("j", phi());
        let g = Member::new("j", Formula::boxm(phi()));
        let conclusion = AnnotatedSequent::new(
            word(&[("x", 0), ("y", 0)]),
            BTreeSet::from([
                AnnMember::new(f.clone(), word(&[("x", 0)])),
                AnnMember::new(g.clone(), word(&[("x", 0)])),
                AnnMember::new(f.clone(), word(&[("y", 0)])),
            ]),
        );
        let premise = AnnotatedSequent::new(
            word(&[("x", 0)]),
            BTreeSet::from([
                AnnMember::new(f.clone(), word(&[("x", 0)])),
                AnnMember::new(g.clone(), word(&[("x", 0)])),
            ]),
        );
        assert!(check_thinning(&conclusion, &premise, &ord).is_ok());
        // Keeping the larger annotation instead is rejected.
        let wrong = AnnotatedSequent::new(
            word(&[("x", 0), ("y", 0)]),
            BTreeSet::from([
                AnnMember::new(f.clone(), word(&[("y", 0)])),
                AnnMember::new(g, word(&[("x", 0)])),
            ]),
        );
        assert!(check_thinning(&conclusion, &wrong, &ord).is_err());
        // b = c never thins.
        let same = AnnotatedSequent::new(
            word(&[("x", 0), ("y", 0)]),
            BTreeSet::from([AnnMember::new(f, word(&[("x", 0)]))]),
        );
        assert!(check_thinning(&same.clone(), &same, &ord).is_err());
    }

    #[test]
    fn names_theory_examples() {
        let f = Member::new("j", phi());
        let g = Member::new("j", Formula::boxm(phi()));
        let seq = AnnotatedSequent::new(
            word(&[("x", 0), ("y", 0)]),
            BTreeSet::from([
                AnnMember::new(f.clone(), word(&[("x", 0)])),
                AnnMember::new(g.clone(), word(&[("x", 0)])),
                AnnMember::new(Member::new("k", phi()), word(&[("y", 0)])),
            ]),
        );
        let th = names_theory(&seq, &nm("x", 0));
        assert_eq!(th, BTreeSet::from([f, g]));
        assert!(names_theory(&seq, &nm("x", 7)).is_empty());
    }

    #[test]
    fn annotated_axioms() {
        let ax = AnnotatedSequent::new(
            NameWord::empty(),
            BTreeSet::from([
                AnnMember::new(mem("i", "p"), NameWord::empty()),
                AnnMember::new(mem("i", "~p"), NameWord::empty()),
            ]),
        );
        assert!(is_annotated_axiom(&ax));
        // Non-empty control disqualifies.
        let mut bad = ax.clone();
        bad.control = word(&[("x", 0)]);
        assert!(!is_annotated_axiom(&bad));
        // Non-empty annotation disqualifies.
        let bad = AnnotatedSequent::new(
            NameWord::empty(),
            BTreeSet::from([
                AnnMember::new(mem("i", "p"), word(&[("x", 0)])),
                AnnMember::new(mem("i", "~p"), NameWord::empty()),
            ]),
        );
        assert!(!is_annotated_axiom(&bad));
        let _ = crate::calculus::axiom_core(&ax.underlying());
    }

    #[test]
    fn eta_requires_low_annotation() {
        // Order x < y; unfolding x with a y-name in the annotation is barred.
        let root = parse("nu x. [](x \\/ nu y. <>y)").unwrap();
        let ord = dependency_order(&root).unwrap();
        let inner = parse("nu y. <>y").unwrap();
        let principal = AnnMember::new(Member::new("i", root.clone()), word(&[("y", 0)]));
        let conclusion = AnnotatedSequent::new(
            word(&[("y", 0)]),
            BTreeSet::from([principal.clone()]),
        );
        let tag = SafRuleTag::Eta { principal };
        assert!(matches!(
            build_saf_premises(&conclusion, &tag, &ord),
            Err(AnnError::AnnotationTooLow(..))
        ));
        // Unfolding y with a y-name is fine.
        let principal = AnnMember::new(Member::new("i", inner), word(&[("y", 0)]));
        let conclusion = AnnotatedSequent::new(
            word(&[("y", 0)]),
            BTreeSet::from([principal.clone()]),
        );
        let tag = SafRuleTag::Eta { principal };
        assert!(build_saf_premises(&conclusion, &tag, &ord).is_ok());
    }
}
