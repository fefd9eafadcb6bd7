//! Finite Kripke models, denotational evaluation, the evaluation parity game,
//! a Zielonka solver with verifiable certificates, and the model checker.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::syntax::{closure, Closure, Formula, VariableOrder};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SemError {
    #[error("model error on line {0}: {1}")]
    ModelParse(usize, String),
    #[error("nominal '{0} is not assigned a world in the model")]
    UnassignedNominal(String),
    #[error("unknown world {0}")]
    UnknownWorld(String),
    #[error("free fixpoint variable {0} during evaluation")]
    FreeVariable(String),
}

/// A finite pointed-free Kripke model: worlds, a transition relation, a
/// valuation for propositions, and an assignment of nominals to worlds.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct Model {
    /// World names; a world's id is its index here.
    pub worlds: Vec<String>,
    /// Successor sets, indexed by world id.
    pub edges: Vec<BTreeSet<usize>>,
    /// Proposition name to set of world ids.
    pub valuation: BTreeMap<String, BTreeSet<usize>>,
    /// Nominal name to world id.
    pub assignment: BTreeMap<String, usize>,
}

impl Model {
    pub fn world_id(&self, name: &str) -> Option<usize> {
        self.worlds.iter().position(|w| w == name)
    }

    pub fn add_world(&mut self, name: impl Into<String>) -> usize {
        self.worlds.push(name.into());
        self.edges.push(BTreeSet::new());
        self.worlds.len() - 1
    }

    pub fn all_worlds(&self) -> BTreeSet<usize> {
        (0..self.worlds.len()).collect()
    }

    /// Parse the line-oriented model format:
    ///
    /// ```text
    /// # comment
    /// world w0
    /// edge w0 w1
    /// prop p w0
    /// nom i w1
    /// ```
    pub fn parse(text: &str) -> Result<Model, SemError> {
        let mut m = Model::default();
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let lineno = ln + 1;
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            let need = |n: usize| {
                if toks.len() == n {
                    Ok(())
                } else {
                    Err(SemError::ModelParse(
                        lineno,
                        format!("expected {} tokens, found {}", n, toks.len()),
                    ))
                }
            };
            match toks[0] {
                "world" => {
                    need(2)?;
                    if m.world_id(toks[1]).is_some() {
                        return Err(SemError::ModelParse(
                            lineno,
                            format!("duplicate world {}", toks[1]),
                        ));
                    }
                    m.add_world(toks[1]);
                }
                "edge" => {
                    need(3)?;
                    let a = m.world_id(toks[1]).ok_or_else(|| {
                        SemError::ModelParse(lineno, format!("unknown world {}", toks[1]))
                    })?;
                    let b = m.world_id(toks[2]).ok_or_else(|| {
                        SemError::ModelParse(lineno, format!("unknown world {}", toks[2]))
                    })?;
                    m.edges[a].insert(b);
                }
                "prop" => {
                    need(3)?;
                    let w = m.world_id(toks[2]).ok_or_else(|| {
                        SemError::ModelParse(lineno, format!("unknown world {}", toks[2]))
                    })?;
                    m.valuation
                        .entry(toks[1].to_string())
                        .or_default()
                        .insert(w);
                }
                "nom" => {
                    need(3)?;
                    let w = m.world_id(toks[2]).ok_or_else(|| {
                        SemError::ModelParse(lineno, format!("unknown world {}", toks[2]))
                    })?;
                    if m.assignment.insert(toks[1].to_string(), w).is_some() {
                        return Err(SemError::ModelParse(
                            lineno,
                            format!("nominal {} assigned twice", toks[1]),
                        ));
                    }
                }
                other => {
                    return Err(SemError::ModelParse(
                        lineno,
                        format!("unknown directive `{other}`"),
                    ));
                }
            }
        }
        Ok(m)
    }

    /// Render in the same line format `parse` accepts.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for w in &self.worlds {
            out.push_str(&format!("world {w}\n"));
        }
        for (a, succs) in self.edges.iter().enumerate() {
            for b in succs {
                out.push_str(&format!("edge {} {}\n", self.worlds[a], self.worlds[*b]));
            }
        }
        for (p, ws) in &self.valuation {
            for w in ws {
                out.push_str(&format!("prop {} {}\n", p, self.worlds[*w]));
            }
        }
        for (i, w) in &self.assignment {
            out.push_str(&format!("nom {} {}\n", i, self.worlds[*w]));
        }
        out
    }

    fn nominal_world(&self, i: &str) -> Result<usize, SemError> {
        self.assignment
            .get(i)
            .copied()
            .ok_or_else(|| SemError::UnassignedNominal(i.to_string()))
    }
}

// ---------------------------------------------------------------------------
// Denotational semantics

/// Extension of a formula: the set of worlds satisfying it.  Fixpoints are
/// computed by naive Knaster-Tarski iteration from the bottom (`mu`) or top
/// (`nu`) element; on a finite model at most `|W|` rounds are needed, and the
/// intermediate chain is asserted monotone.
pub fn eval(model: &Model, f: &Formula) -> Result<BTreeSet<usize>, SemError> {
    eval_env(model, f, &BTreeMap::new())
}

fn eval_env(
    model: &Model,
    f: &Formula,
    env: &BTreeMap<String, BTreeSet<usize>>,
) -> Result<BTreeSet<usize>, SemError> {
    use Formula::*;
    Ok(match f {
        Prop(p, pol) => {
            if let Some(v) = env.get(p) {
                // Bound variables occur only positively, so polarity is +.
                v.clone()
            } else {
                let base = model.valuation.get(p).cloned().unwrap_or_default();
                if *pol {
                    base
                } else {
                    model.all_worlds().difference(&base).copied().collect()
                }
            }
        }
        Nom(i, pol) => {
            let w = model.nominal_world(i)?;
            if *pol {
                BTreeSet::from([w])
            } else {
                let mut all = model.all_worlds();
                all.remove(&w);
                all
            }
        }
        Or(a, b) => {
            let mut s = eval_env(model, a, env)?;
            s.extend(eval_env(model, b, env)?);
            s
        }
        And(a, b) => {
            let sa = eval_env(model, a, env)?;
            let sb = eval_env(model, b, env)?;
            sa.intersection(&sb).copied().collect()
        }
        Dia(a) => {
            let s = eval_env(model, a, env)?;
            (0..model.worlds.len())
                .filter(|w| model.edges[*w].iter().any(|v| s.contains(v)))
                .collect()
        }
        Boxm(a) => {
            let s = eval_env(model, a, env)?;
            (0..model.worlds.len())
                .filter(|w| model.edges[*w].iter().all(|v| s.contains(v)))
                .collect()
        }
        At(i, a) => {
            let w = model.nominal_world(i)?;
            if eval_env(model, a, env)?.contains(&w) {
                model.all_worlds()
            } else {
                BTreeSet::new()
            }
        }
        Mu(x, a) => {
            let mut cur: BTreeSet<usize> = BTreeSet::new();
            loop {
                let mut env2 = env.clone();
                env2.insert(x.clone(), cur.clone());
                let next = eval_env(model, a, &env2)?;
                assert!(
                    cur.is_subset(&next),
                    "mu iteration chain must be increasing"
                );
                if next == cur {
                    break cur;
                }
                cur = next;
            }
        }
        Nu(x, a) => {
            let mut cur = model.all_worlds();
            loop {
                let mut env2 = env.clone();
                env2.insert(x.clone(), cur.clone());
                let next = eval_env(model, a, &env2)?;
                assert!(
                    next.is_subset(&cur),
                    "nu iteration chain must be decreasing"
                );
                if next == cur {
                    break cur;
                }
                cur = next;
            }
        }
    })
}

// ---------------------------------------------------------------------------
// Parity games

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Player {
    /// The verifier; wins when the maximum priority seen infinitely often is
    /// even, and wins finite plays where the opponent is stuck.
    Even,
    Odd,
}

impl Player {
    pub fn opponent(self) -> Player {
        match self {
            Player::Even => Player::Odd,
            Player::Odd => Player::Even,
        }
    }

    pub fn wins_priority(self, p: u32) -> bool {
        (p % 2 == 0) == (self == Player::Even)
    }
}

/// A max-parity game.  Deadlocked positions (no moves) are lost by their
/// owner.
#[derive(Clone, Debug, Default)]
pub struct ParityGame {
    pub owner: Vec<Player>,
    pub priority: Vec<u32>,
    pub moves: Vec<Vec<usize>>,
}

impl ParityGame {
    pub fn len(&self) -> usize {
        self.owner.len()
    }

    pub fn is_empty(&self) -> bool {
        self.owner.is_empty()
    }

    pub fn add(&mut self, owner: Player, priority: u32) -> usize {
        self.owner.push(owner);
        self.priority.push(priority);
        self.moves.push(Vec::new());
        self.owner.len() - 1
    }
}

/// A solved game: per-position winner and, for each position owned by its
/// winner, a strategy edge.
#[derive(Clone, Debug)]
pub struct Certificate {
    pub winner: Vec<Player>,
    pub strategy: Vec<Option<usize>>,
}

/// Solve a parity game with Zielonka's recursive algorithm.
///
/// The game may contain deadlocks; they are handled by totalizing with two
/// winning sinks before the recursion and stripping them afterwards.
pub fn solve(game: &ParityGame) -> Certificate {
    let n = game.len();
    // Totalize: sink_even is winning for Even (priority 0 self-loop),
    // sink_odd for Odd (priority 1 self-loop).  A deadlocked position gets a
    // single edge to the sink its owner loses at.
    let mut g = game.clone();
    let sink_even = g.add(Player::Even, 0);
    let sink_odd = g.add(Player::Odd, 1);
    g.moves[sink_even].push(sink_even);
    g.moves[sink_odd].push(sink_odd);
    for v in 0..n {
        if g.moves[v].is_empty() {
            let sink = match g.owner[v] {
                Player::Even => sink_odd,
                Player::Odd => sink_even,
            };
            g.moves[v].push(sink);
        }
    }

    let mut strategy: Vec<Option<usize>> = vec![None; g.len()];
    let mut winner: Vec<Player> = vec![Player::Even; g.len()];
    let alive: Vec<bool> = vec![true; g.len()];
    zielonka(&g, alive, &mut winner, &mut strategy);

    strategy.truncate(n);
    winner.truncate(n);
    for s in strategy.iter_mut() {
        if matches!(s, Some(t) if *t >= n) {
            *s = None;
        }
    }
    Certificate { winner, strategy }
}

/// Attractor of `target` for player `p` within `alive`; records strategy
/// edges for `p`-owned positions attracted (and for `p`-owned targets with an
/// edge back into the attractor, if they lack one).
fn attractor(
    g: &ParityGame,
    alive: &[bool],
    p: Player,
    target: &[usize],
    strategy: &mut [Option<usize>],
) -> Vec<bool> {
    let mut inset = vec![false; g.len()];
    let mut queue: Vec<usize> = Vec::new();
    for &t in target {
        if alive[t] && !inset[t] {
            inset[t] = true;
            queue.push(t);
        }
    }
    // Predecessor lists restricted to alive positions.
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); g.len()];
    let mut out_deg: Vec<usize> = vec![0; g.len()];
    for v in 0..g.len() {
        if !alive[v] {
            continue;
        }
        for &w in &g.moves[v] {
            if alive[w] {
                preds[w].push(v);
                out_deg[v] += 1;
            }
        }
    }
    let mut qi = 0;
    while qi < queue.len() {
        let w = queue[qi];
        qi += 1;
        for &v in &preds[w] {
            if inset[v] {
                continue;
            }
            if g.owner[v] == p {
                inset[v] = true;
                strategy[v] = Some(w);
                queue.push(v);
            } else {
                out_deg[v] -= 1;
                if out_deg[v] == 0 {
                    inset[v] = true;
                    queue.push(v);
                }
            }
        }
    }
    inset
}

fn zielonka(
    g: &ParityGame,
    alive: Vec<bool>,
    winner: &mut [Player],
    strategy: &mut [Option<usize>],
) {
    let live: Vec<usize> = (0..g.len()).filter(|&v| alive[v]).collect();
    if live.is_empty() {
        return;
    }
    let d = live.iter().map(|&v| g.priority[v]).max().unwrap();
    let p = if d % 2 == 0 { Player::Even } else { Player::Odd };
    let top: Vec<usize> = live
        .iter()
        .copied()
        .filter(|&v| g.priority[v] == d)
        .collect();
    let a = attractor(g, &alive, p, &top, strategy);
    let mut rest = alive.clone();
    for v in 0..g.len() {
        if a[v] {
            rest[v] = false;
        }
    }
    zielonka(g, rest.clone(), winner, strategy);
    let opp = p.opponent();
    let opp_wins: Vec<usize> = (0..g.len())
        .filter(|&v| rest[v] && winner[v] == opp)
        .collect();
    if opp_wins.is_empty() {
        // p wins everywhere in this subgame.  Give p-owned top positions a
        // strategy edge staying in the subgame (any one is fine: every
        // successor in the subgame is won by p).
        for v in live {
            winner[v] = p;
            if g.owner[v] == p && g.priority[v] == d {
                strategy[v] = g.moves[v].iter().copied().find(|&w| alive[w]);
            }
        }
    } else {
        let b = attractor(g, &alive, opp, &opp_wins, strategy);
        let mut rest2 = alive.clone();
        for v in 0..g.len() {
            if b[v] {
                rest2[v] = false;
                winner[v] = opp;
            }
        }
        zielonka(g, rest2, winner, strategy);
    }
}

/// Check a certificate against a game.
///
/// For each player `p` and each position in `p`'s claimed region:
/// - if owned by `p`: the strategy edge must exist and stay in the region;
/// - if owned by the opponent: every move must stay in the region (no moves
///   means the opponent is stuck, which is fine for `p`);
/// - a `p`-owned position with no moves may not be claimed by `p`;
/// and every cycle of the strategy-restricted region must have a maximum
/// priority of `p`'s parity.
pub fn verify_certificate(game: &ParityGame, cert: &Certificate) -> bool {
    let n = game.len();
    if cert.winner.len() != n || cert.strategy.len() != n {
        return false;
    }
    for p in [Player::Even, Player::Odd] {
        let region: Vec<usize> = (0..n).filter(|&v| cert.winner[v] == p).collect();
        let in_region = |v: usize| cert.winner[v] == p;
        // Strategy-restricted edges within the region.
        let mut edges: Vec<(usize, usize)> = Vec::new();
        for &v in &region {
            if game.owner[v] == p {
                match cert.strategy[v] {
                    Some(w) if game.moves[v].contains(&w) && in_region(w) => {
                        edges.push((v, w));
                    }
                    _ => {
                        if game.moves[v].is_empty() {
                            // Owner p is stuck: p loses here, cannot claim it.
                            return false;
                        }
                        return false;
                    }
                }
            } else {
                for &w in &game.moves[v] {
                    if !in_region(w) {
                        return false;
                    }
                    edges.push((v, w));
                }
            }
        }
        if !cycles_all_have_parity(n, &region, &edges, &game.priority, p) {
            return false;
        }
    }
    true
}

/// True iff every cycle of the given subgraph has maximum priority of
/// `p`'s parity.  Checked by looking, for each bad priority `d` (wrong
/// parity), at the subgraph of positions with priority at most `d`: no cycle
/// there may visit a position of priority exactly `d`.
fn cycles_all_have_parity(
    n: usize,
    region: &[usize],
    edges: &[(usize, usize)],
    priority: &[u32],
    p: Player,
) -> bool {
    let mut bad_prios: BTreeSet<u32> = region
        .iter()
        .map(|&v| priority[v])
        .filter(|&d| !p.wins_priority(d))
        .collect();
    while let Some(d) = bad_prios.pop_last() {
        let keep: Vec<bool> = (0..n)
            .map(|v| region.contains(&v) && priority[v] <= d)
            .collect();
        let sub: Vec<(usize, usize)> = edges
            .iter()
            .copied()
            .filter(|&(a, b)| keep[a] && keep[b])
            .collect();
        for scc in sccs(n, &sub) {
            let cyclic = scc.len() > 1 || sub.contains(&(scc[0], scc[0]));
            if cyclic && scc.iter().any(|&v| priority[v] == d) {
                return false;
            }
        }
    }
    true
}

/// Strongly connected components (iterative Tarjan) of the subgraph given by
/// the edge list; vertices not incident to any edge form singleton SCCs only
/// if they appear as endpoints.
pub fn sccs(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut present = vec![false; n];
    for &(a, b) in edges {
        adj[a].push(b);
        present[a] = true;
        present[b] = true;
    }
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<usize> = Vec::new();
    let mut next_index = 0usize;
    let mut out: Vec<Vec<usize>> = Vec::new();
    // Iterative DFS frames: (vertex, next child position).
    for start in 0..n {
        if !present[start] || index[start] != usize::MAX {
            continue;
        }
        let mut frames: Vec<(usize, usize)> = vec![(start, 0)];
        index[start] = next_index;
        low[start] = next_index;
        next_index += 1;
        stack.push(start);
        on_stack[start] = true;
        while let Some(&mut (v, ref mut ci)) = frames.last_mut() {
            if *ci < adj[v].len() {
                let w = adj[v][*ci];
                *ci += 1;
                if index[w] == usize::MAX {
                    index[w] = next_index;
                    low[w] = next_index;
                    next_index += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    frames.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                frames.pop();
                if let Some(&(u, _)) = frames.last() {
                    low[u] = low[u].min(low[v]);
                }
                if low[v] == index[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().unwrap();
                        on_stack[w] = false;
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    comp.sort_unstable();
                    out.push(comp);
                }
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// The evaluation game

/// The evaluation game of a formula over a model.  Positions are pairs of a
/// world and a closure member; `Even` plays verifier.
pub struct EvalGame {
    pub game: ParityGame,
    pub closure: Closure,
    /// `pos[w][c]` is the game position for world `w` and closure member `c`.
    pub pos: Vec<Vec<usize>>,
}

impl EvalGame {
    pub fn position(&self, world: usize, f: &Formula) -> Option<usize> {
        Some(self.pos[world][self.closure.id(f)?])
    }
}

/// Priority of a closure member under the given variable order: an unfolding
/// position for the variable at ascending rank `k` out of `n` gets level
/// `i = n - k` and priority `2i` (`nu`) or `2i + 1` (`mu`); everything else
/// gets 0.
fn formula_priority(f: &Formula, order: &VariableOrder) -> u32 {
    match f {
        Formula::Mu(x, _) => {
            let i = (order.len() - order.rank(x).expect("ordered variable")) as u32;
            2 * i + 1
        }
        Formula::Nu(x, _) => {
            let i = (order.len() - order.rank(x).expect("ordered variable")) as u32;
            2 * i
        }
        _ => 0,
    }
}

/// Build the evaluation game for `f` over `model`.
pub fn build_eval_game(
    model: &Model,
    f: &Formula,
    order: &VariableOrder,
) -> Result<EvalGame, SemError> {
    use Formula::*;
    let cl = closure(f);
    let nw = model.worlds.len();
    let mut game = ParityGame::default();
    let mut pos = vec![vec![0usize; cl.len()]; nw];
    for w in 0..nw {
        for (ci, g) in cl.iter().enumerate() {
            let owner = match g {
                Prop(p, pol) => {
                    let holds = model
                        .valuation
                        .get(p)
                        .map(|s| s.contains(&w))
                        .unwrap_or(false)
                        == *pol;
                    if holds {
                        Player::Odd
                    } else {
                        Player::Even
                    }
                }
                Nom(i, pol) => {
                    let holds = (model.nominal_world(i)? == w) == *pol;
                    if holds {
                        Player::Odd
                    } else {
                        Player::Even
                    }
                }
                Or(..) | Dia(_) => Player::Even,
                And(..) | Boxm(_) => Player::Odd,
                // Unique-move positions; the owner is immaterial, fixed to
                // Even for determinism.
                At(..) | Mu(..) | Nu(..) => Player::Even,
            };
            pos[w][ci] = game.add(owner, formula_priority(g, order));
        }
    }
    for w in 0..nw {
        for (ci, g) in cl.iter().enumerate() {
            let v = pos[w][ci];
            match g {
                Prop(..) | Nom(..) => {}
                Or(a, b) | And(a, b) => {
                    game.moves[v].push(pos[w][cl.id(a).unwrap()]);
                    game.moves[v].push(pos[w][cl.id(b).unwrap()]);
                }
                Dia(a) | Boxm(a) => {
                    let ai = cl.id(a).unwrap();
                    for &u in &model.edges[w] {
                        game.moves[v].push(pos[u][ai]);
                    }
                }
                At(i, a) => {
                    let u = model.nominal_world(i)?;
                    game.moves[v].push(pos[u][cl.id(a).unwrap()]);
                }
                Mu(..) | Nu(..) => {
                    let unf = crate::syntax::unfold(g).expect("fixpoint");
                    game.moves[v].push(pos[w][cl.id(&unf).expect("closure member")]);
                }
            }
        }
    }
    Ok(EvalGame { game, closure: cl, pos })
}

/// Does `world` satisfy `f` in `model`?  Decided by solving the evaluation
/// game; the formula must be closed, guarded and locally well-named.
pub fn model_check(model: &Model, world: usize, f: &Formula) -> Result<bool, SemError> {
    let order = crate::syntax::dependency_order(f)
        .map_err(|e| SemError::ModelParse(0, e.to_string()))?;
    let eg = build_eval_game(model, f, &order)?;
    let cert = solve(&eg.game);
    debug_assert!(verify_certificate(&eg.game, &cert));
    let v = eg.position(world, f).expect("root in closure");
    Ok(cert.winner[v] == Player::Even)
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

#[cfg(test)]
pub mod tests {
    use super::*;
    use crate::syntax::parse;

    /// Two-world model: a -> b, a -> a, p holds at a, nominal i at b.
    pub fn small_model() -> Model {
        Model::parse(
            "# test model\n\
             world a\n\
             world b\n\
             edge a b\n\
             edge a a\n\
             prop p a\n\
             nom i b\n",
        )
        .unwrap()
    }

    #[test]
    fn model_parse_roundtrip() {
        let m = small_model();
        assert_eq!(m.worlds, vec!["a", "b"]);
        assert_eq!(m.edges[0], BTreeSet::from([0, 1]));
        assert!(m.edges[1].is_empty());
        assert_eq!(Model::parse(&m.to_text()).unwrap(), m);
    }

    #[test]
    fn model_parse_errors() {
        assert!(matches!(
            Model::parse("edge a b"),
            Err(SemError::ModelParse(1, _))
        ));
        assert!(matches!(
            Model::parse("world a\nworld a"),
            Err(SemError::ModelParse(2, _))
        ));
        assert!(matches!(
            Model::parse("wat a"),
            Err(SemError::ModelParse(1, _))
        ));
    }

    #[test]
    fn eval_literals_and_booleans() {
        let m = small_model();
        assert_eq!(eval(&m, &parse("p").unwrap()).unwrap(), BTreeSet::from([0]));
        assert_eq!(
            eval(&m, &parse("~p").unwrap()).unwrap(),
            BTreeSet::from([1])
        );
        assert_eq!(
            eval(&m, &parse("'i").unwrap()).unwrap(),
            BTreeSet::from([1])
        );
        assert_eq!(
            eval(&m, &parse("~'i").unwrap()).unwrap(),
            BTreeSet::from([0])
        );
        assert_eq!(
            eval(&m, &parse("p \\/ 'i").unwrap()).unwrap(),
            BTreeSet::from([0, 1])
        );
        assert_eq!(
            eval(&m, &parse("p /\\ 'i").unwrap()).unwrap(),
            BTreeSet::new()
        );
    }

    #[test]
    fn eval_modalities_and_at() {
        let m = small_model();
        // <>'i holds exactly at a (edge a->b).
        assert_eq!(
            eval(&m, &parse("<>'i").unwrap()).unwrap(),
            BTreeSet::from([0])
        );
        // []p: b vacuously, a not (a->b fails p).
        assert_eq!(
            eval(&m, &parse("[]p").unwrap()).unwrap(),
            BTreeSet::from([1])
        );
        // @'i p is false (p fails at b), so empty everywhere.
        assert_eq!(
            eval(&m, &parse("@'i p").unwrap()).unwrap(),
            BTreeSet::new()
        );
        assert_eq!(
            eval(&m, &parse("@'i ~p").unwrap()).unwrap(),
            BTreeSet::from([0, 1])
        );
        assert!(matches!(
            eval(&m, &parse("'z").unwrap()),
            Err(SemError::UnassignedNominal(_))
        ));
    }

    #[test]
    fn eval_fixpoints() {
        let m = small_model();
        // mu x. <>x: no well-founded path loops... actually a->a gives no
        // base case, least fixpoint is empty.
        assert_eq!(
            eval(&m, &parse("mu x. <>x").unwrap()).unwrap(),
            BTreeSet::new()
        );
        // nu x. <>x: a can loop forever on a->a; b is stuck.
        assert_eq!(
            eval(&m, &parse("nu x. <>x").unwrap()).unwrap(),
            BTreeSet::from([0])
        );
        // mu x. 'i \/ <>x: can reach b.
        assert_eq!(
            eval(&m, &parse("mu x. 'i \\/ <>x").unwrap()).unwrap(),
            BTreeSet::from([0, 1])
        );
        // nu x. []x holds everywhere (box is vacuous at b, a loops).
        assert_eq!(
            eval(&m, &parse("nu x. []x").unwrap()).unwrap(),
            BTreeSet::from([0, 1])
        );
    }

    #[test]
    fn game_agrees_with_eval_on_small_model() {
        let m = small_model();
        for s in [
            "p",
            "~p",
            "'i",
            "<>'i",
            "[]p",
            "@'i p",
            "@'i ~p",
            "mu x. <>x",
            "nu x. <>x",
            "nu x. []x",
            "mu x. 'i \\/ <>x",
            "nu x. [](x \\/ []x)",
            "mu x. nu y. <>(x /\\ y)",
        ] {
            let f = parse(s).unwrap();
            let denot = eval(&m, &f).unwrap();
            for w in 0..m.worlds.len() {
                assert_eq!(
                    model_check(&m, w, &f).unwrap(),
                    denot.contains(&w),
                    "disagreement on {s} at world {w}"
                );
            }
        }
    }

    #[test]
    fn zielonka_simple_games() {
        // Single Even-owned position, priority 1, self-loop: Odd wins.
        let mut g = ParityGame::default();
        let v = g.add(Player::Even, 1);
        g.moves[v].push(v);
        let c = solve(&g);
        assert_eq!(c.winner[v], Player::Odd);
        assert!(verify_certificate(&g, &c));

        // Deadlock: owner loses.
        let mut g = ParityGame::default();
        let v = g.add(Player::Even, 0);
        let c = solve(&g);
        assert_eq!(c.winner[v], Player::Odd);
        assert!(verify_certificate(&g, &c));

        // Even can choose between a bad self-loop and a good one.
        let mut g = ParityGame::default();
        let v = g.add(Player::Even, 0);
        let bad = g.add(Player::Even, 1);
        let good = g.add(Player::Even, 2);
        g.moves[v] = vec![bad, good];
        g.moves[bad] = vec![bad];
        g.moves[good] = vec![good];
        let c = solve(&g);
        assert_eq!(c.winner[v], Player::Even);
        assert_eq!(c.winner[bad], Player::Odd);
        assert_eq!(c.winner[good], Player::Even);
        assert!(verify_certificate(&g, &c));
    }

    #[test]
    fn certificate_rejects_tampering() {
        let mut g = ParityGame::default();
        let v = g.add(Player::Even, 1);
        g.moves[v].push(v);
        let mut c = solve(&g);
        assert!(verify_certificate(&g, &c));
        c.winner[v] = Player::Even; // claim the odd self-loop for Even
        c.strategy[v] = Some(v);
        assert!(!verify_certificate(&g, &c));
    }

    #[test]
    fn scc_basics() {
        let edges = [(0, 1), (1, 0), (2, 2), (1, 2)];
        let comps = sccs(4, &edges);
        assert!(comps.contains(&vec![0, 1]));
        assert!(comps.contains(&vec![2]));
        assert_eq!(comps.iter().map(|c| c.len()).sum::<usize>(), 3);
    }
}
