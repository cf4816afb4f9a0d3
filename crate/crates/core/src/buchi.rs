//! Büchi automata and the tableau translation from LTL.
//!
//! The automaton alphabet is the powerset of a declared proposition list;
//! letters are bit masks over that list. Transitions are stored symbolically
//! as positive/negative literal constraints, so one stored edge stands for
//! every letter that contains `pos` and avoids `neg`.
//!
//! The construction is the classic node-expansion tableau on negation normal
//! form, yielding a generalized automaton with one acceptance set per until
//! subformula, followed by a round-robin counter degeneralization.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::ltl::{to_nnf, Ltl, LtlError};

/// A letter: bit `i` set means proposition `i` of the declared list holds.
pub type Letter = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct BaEdge {
    pub from: usize,
    /// Propositions the letter must contain.
    pub pos: Letter,
    /// Propositions the letter must avoid.
    pub neg: Letter,
    pub to: usize,
}

impl BaEdge {
    pub fn matches(&self, letter: Letter) -> bool {
        self.pos & !letter == 0 && self.neg & letter == 0
    }
}

#[derive(Debug, Clone)]
pub struct BuchiAutomaton {
    pub props: Vec<String>,
    pub n_states: usize,
    pub initial: usize,
    pub accepting: Vec<bool>,
    pub edges: Vec<BaEdge>,
    /// Edge indices grouped by source state.
    outgoing: Vec<Vec<usize>>,
}

impl BuchiAutomaton {
    pub fn new(
        props: Vec<String>,
        n_states: usize,
        initial: usize,
        accepting: Vec<bool>,
        mut edges: Vec<BaEdge>,
    ) -> Self {
        edges.sort();
        edges.dedup();
        let mut outgoing = vec![Vec::new(); n_states];
        for (i, e) in edges.iter().enumerate() {
            outgoing[e.from].push(i);
        }
        BuchiAutomaton { props, n_states, initial, accepting, edges, outgoing }
    }

    pub fn letter_mask(&self) -> Letter {
        if self.props.len() >= 32 {
            u32::MAX
        } else {
            (1u32 << self.props.len()) - 1
        }
    }

    pub fn letter_from_names<S: AsRef<str>>(&self, names: &[S]) -> Result<Letter, LtlError> {
        let mut letter = 0;
        for n in names {
            let idx = self
                .props
                .iter()
                .position(|p| p == n.as_ref())
                .ok_or_else(|| LtlError::UnknownAtom(n.as_ref().to_string()))?;
            letter |= 1 << idx;
        }
        Ok(letter)
    }

    pub fn successors(&self, state: usize, letter: Letter) -> impl Iterator<Item = usize> + '_ {
        self.outgoing[state]
            .iter()
            .map(|&i| &self.edges[i])
            .filter(move |e| e.matches(letter))
            .map(|e| e.to)
    }

    pub fn edges_from(&self, state: usize) -> impl Iterator<Item = &BaEdge> {
        self.outgoing[state].iter().map(|&i| &self.edges[i])
    }

    /// Decides whether the ultimately periodic word `stem . loop^w` has an
    /// accepting run, by SCC analysis of the product of the automaton with
    /// the lasso positions.
    pub fn accepts_lasso(&self, stem: &[Letter], looop: &[Letter]) -> Result<bool, LtlError> {
        assert!(!looop.is_empty(), "lasso loop must be nonempty");
        let mask = self.letter_mask();
        for &l in stem.iter().chain(looop) {
            if l & !mask != 0 {
                return Err(LtlError::LetterOutsideAlphabet(
                    (l & !mask).trailing_zeros() as usize,
                ));
            }
        }
        let positions = stem.len() + looop.len();
        let letter_at = |p: usize| {
            if p < stem.len() {
                stem[p]
            } else {
                looop[p - stem.len()]
            }
        };
        let next_pos = |p: usize| {
            if p + 1 < positions {
                p + 1
            } else {
                stem.len()
            }
        };
        let id = |state: usize, p: usize| state * positions + p;

        // Restrict to nodes reachable from the initial node.
        let total = self.n_states * positions;
        let mut adj = vec![Vec::new(); total];
        let mut seen = vec![false; total];
        let start = id(self.initial, 0);
        seen[start] = true;
        let mut work = vec![start];
        while let Some(node) = work.pop() {
            let (state, p) = (node / positions, node % positions);
            for succ in self.successors(state, letter_at(p)) {
                let t = id(succ, next_pos(p));
                adj[node].push(t);
                if !seen[t] {
                    seen[t] = true;
                    work.push(t);
                }
            }
        }
        let comp = crate::scc::tarjan(&adj);
        // A component accepts if it contains an accepting state and has an
        // internal edge (so the product run can cycle through it).
        let mut has_internal_edge = BTreeSet::new();
        for (node, succs) in adj.iter().enumerate() {
            for &t in succs {
                if comp[node] == comp[t] {
                    has_internal_edge.insert(comp[node]);
                }
            }
        }
        for node in 0..total {
            if seen[node] && self.accepting[node / positions] && has_internal_edge.contains(&comp[node])
            {
                return Ok(true);
            }
        }
        Ok(false)
    }
}

/// Interned NNF formula nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum Fx {
    True,
    False,
    Lit { ap: usize, neg: bool },
    And(usize, usize),
    Or(usize, usize),
    Next(usize),
    Until(usize, usize),
    Release(usize, usize),
}

struct Interner {
    nodes: Vec<Fx>,
    index: HashMap<Fx, usize>,
}

impl Interner {
    fn new() -> Self {
        Interner { nodes: Vec::new(), index: HashMap::new() }
    }

    fn put(&mut self, fx: Fx) -> usize {
        if let Some(&i) = self.index.get(&fx) {
            return i;
        }
        let i = self.nodes.len();
        self.nodes.push(fx);
        self.index.insert(fx, i);
        i
    }

    fn intern(&mut self, f: &Ltl, props: &[String]) -> Result<usize, LtlError> {
        let fx = match f {
            Ltl::True => Fx::True,
            Ltl::False => Fx::False,
            Ltl::Atom(name) => {
                let ap = props
                    .iter()
                    .position(|p| p == name)
                    .ok_or_else(|| LtlError::UnknownAtom(name.clone()))?;
                Fx::Lit { ap, neg: false }
            }
            Ltl::Not(inner) => match &**inner {
                Ltl::Atom(name) => {
                    let ap = props
                        .iter()
                        .position(|p| p == name)
                        .ok_or_else(|| LtlError::UnknownAtom(name.clone()))?;
                    Fx::Lit { ap, neg: true }
                }
                _ => unreachable!("input is in negation normal form"),
            },
            Ltl::And(a, b) => {
                let (a, b) = (self.intern(a, props)?, self.intern(b, props)?);
                Fx::And(a, b)
            }
            Ltl::Or(a, b) => {
                let (a, b) = (self.intern(a, props)?, self.intern(b, props)?);
                Fx::Or(a, b)
            }
            Ltl::Next(p) => {
                let p = self.intern(p, props)?;
                Fx::Next(p)
            }
            Ltl::Until(a, b) => {
                let (a, b) = (self.intern(a, props)?, self.intern(b, props)?);
                Fx::Until(a, b)
            }
            Ltl::Release(a, b) => {
                let (a, b) = (self.intern(a, props)?, self.intern(b, props)?);
                Fx::Release(a, b)
            }
        };
        Ok(self.put(fx))
    }
}

type FormSet = BTreeSet<usize>;

#[derive(Debug)]
struct TabNode {
    old: FormSet,
    next: FormSet,
    incoming: BTreeSet<usize>,
}

/// Node-expansion tableau producing a generalized automaton, represented as
/// nodes keyed by their (old, next) pair.
struct Tableau<'a> {
    ir: &'a Interner,
    /// Key (old, next) to node id; node 0 is the virtual initial node.
    keyed: HashMap<(Vec<usize>, Vec<usize>), usize>,
    nodes: Vec<TabNode>,
}

const INIT: usize = 0;

impl<'a> Tableau<'a> {
    fn contradicts(&self, old: &FormSet, fx: usize) -> bool {
        if let Fx::Lit { ap, neg } = self.ir.nodes[fx] {
            let dual = Fx::Lit { ap, neg: !neg };
            if let Some(&d) = self.ir.index.get(&dual) {
                return old.contains(&d);
            }
        }
        false
    }

    fn expand(&mut self, mut new: FormSet, mut old: FormSet, mut next: FormSet, incoming: BTreeSet<usize>) {
        loop {
            let Some(&fx) = new.iter().next() else {
                // Fully expanded: merge with an existing node or create one.
                let key = (
                    old.iter().copied().collect::<Vec<_>>(),
                    next.iter().copied().collect::<Vec<_>>(),
                );
                if let Some(&id) = self.keyed.get(&key) {
                    self.nodes[id].incoming.extend(incoming.iter().copied());
                    return;
                }
                let id = self.nodes.len();
                self.nodes.push(TabNode { old: old.clone(), next: next.clone(), incoming });
                self.keyed.insert(key, id);
                let succ_new = next.clone();
                self.expand(succ_new, FormSet::new(), FormSet::new(), BTreeSet::from([id]));
                return;
            };
            new.remove(&fx);
            if old.contains(&fx) {
                continue;
            }
            match self.ir.nodes[fx] {
                Fx::False => return,
                Fx::True => {
                    old.insert(fx);
                }
                Fx::Lit { .. } => {
                    if self.contradicts(&old, fx) {
                        return;
                    }
                    old.insert(fx);
                }
                Fx::And(a, b) => {
                    old.insert(fx);
                    new.insert(a);
                    new.insert(b);
                }
                Fx::Or(a, b) => {
                    old.insert(fx);
                    let mut new2 = new.clone();
                    new2.insert(b);
                    self.expand(new2, old.clone(), next.clone(), incoming.clone());
                    new.insert(a);
                }
                Fx::Next(p) => {
                    old.insert(fx);
                    next.insert(p);
                }
                Fx::Until(a, b) => {
                    old.insert(fx);
                    let mut new2 = new.clone();
                    new2.insert(b);
                    self.expand(new2, old.clone(), next.clone(), incoming.clone());
                    new.insert(a);
                    next.insert(fx);
                }
                Fx::Release(a, b) => {
                    old.insert(fx);
                    let mut new2 = new.clone();
                    new2.insert(b);
                    let mut next2 = next.clone();
                    next2.insert(fx);
                    self.expand(new2, old.clone(), next2, incoming.clone());
                    new.insert(a);
                    new.insert(b);
                }
            }
        }
    }
}

/// Builds a Büchi automaton recognizing exactly the words over `2^props`
/// that satisfy `f`. The formula is brought into negation normal form first.
pub fn build_buchi(f: &Ltl, props: &[String]) -> Result<BuchiAutomaton, LtlError> {
    let f = to_nnf(f);
    // Constant formulas get the minimal automata directly.
    match f {
        Ltl::True => {
            return Ok(BuchiAutomaton::new(
                props.to_vec(),
                1,
                0,
                vec![true],
                vec![BaEdge { from: 0, pos: 0, neg: 0, to: 0 }],
            ));
        }
        Ltl::False => {
            return Ok(BuchiAutomaton::new(props.to_vec(), 1, 0, vec![false], Vec::new()));
        }
        _ => {}
    }

    let mut ir = Interner::new();
    let root = ir.intern(&f, props)?;
    let mut tab = Tableau { ir: &ir, keyed: HashMap::new(), nodes: Vec::new() };
    tab.nodes.push(TabNode { old: FormSet::new(), next: FormSet::new(), incoming: BTreeSet::new() });
    tab.expand(FormSet::from([root]), FormSet::new(), FormSet::new(), BTreeSet::from([INIT]));

    // Generalized acceptance: one set per until subformula, containing the
    // nodes where the until is absent or already fulfilled.
    let untils: Vec<(usize, usize)> = ir
        .nodes
        .iter()
        .enumerate()
        .filter_map(|(i, fx)| match *fx {
            Fx::Until(_, b) => Some((i, b)),
            _ => None,
        })
        .collect();
    let n_nodes = tab.nodes.len();
    let in_set = |node: &TabNode, (u, b): (usize, usize)| !node.old.contains(&u) || node.old.contains(&b);

    // Symbolic edge constraint of a target node.
    let constraint = |node: &TabNode| -> (Letter, Letter) {
        let mut pos = 0;
        let mut neg = 0;
        for &fx in &node.old {
            if let Fx::Lit { ap, neg: n } = ir.nodes[fx] {
                if n {
                    neg |= 1 << ap;
                } else {
                    pos |= 1 << ap;
                }
            }
        }
        (pos, neg)
    };

    let k = untils.len().max(1);
    // Degeneralization: states (node, counter). With no until subformulas
    // every node is accepting and the counter is inert.
    let mut state_ids: HashMap<(usize, usize), usize> = HashMap::new();
    let mut states: Vec<(usize, usize)> = Vec::new();
    let mut intern_state = |node: usize, ctr: usize, states: &mut Vec<(usize, usize)>| -> usize {
        *state_ids.entry((node, ctr)).or_insert_with(|| {
            states.push((node, ctr));
            states.len() - 1
        })
    };

    let advance = |node: usize, ctr: usize| -> usize {
        if untils.is_empty() {
            return ctr;
        }
        let mut c = ctr;
        // Skip over every satisfied acceptance set, at most one full round.
        for _ in 0..k {
            if in_set(&tab.nodes[node], untils[c]) {
                c = (c + 1) % k;
            } else {
                break;
            }
        }
        c
    };

    let initial = intern_state(INIT, 0, &mut states);
    let mut edges = Vec::new();
    let mut work = vec![initial];
    let mut done = vec![false; 0];
    while let Some(sid) = work.pop() {
        if sid >= done.len() {
            done.resize(sid + 1, false);
        }
        if done[sid] {
            continue;
        }
        done[sid] = true;
        let (node, ctr) = states[sid];
        let next_ctr = advance(node, ctr);
        for target in 1..n_nodes {
            if !tab.nodes[target].incoming.contains(&node) {
                continue;
            }
            let (pos, neg) = constraint(&tab.nodes[target]);
            let tid = intern_state(target, next_ctr, &mut states);
            edges.push(BaEdge { from: sid, pos, neg, to: tid });
            if tid >= done.len() || !done[tid] {
                work.push(tid);
            }
        }
    }

    let accepting: Vec<bool> = states
        .iter()
        .map(|&(node, ctr)| {
            if untils.is_empty() {
                true
            } else {
                // Accepting when the counter is about to wrap: the state's
                // node satisfies set `ctr` and the advance cycles to 0 having
                // satisfied all remaining sets.
                node != INIT && ctr == 0 && advance(node, 0) == 0 && in_set(&tab.nodes[node], untils[0])
            }
        })
        .collect();

    let n = states.len();
    Ok(BuchiAutomaton::new(props.to_vec(), n, initial, accepting, edges))
}

/// Renders the constraint of an edge over the automaton's propositions.
pub fn render_constraint(ba: &BuchiAutomaton, e: &BaEdge) -> String {
    let mut parts = Vec::new();
    for (i, name) in ba.props.iter().enumerate() {
        if e.pos & (1 << i) != 0 {
            parts.push(name.clone());
        } else if e.neg & (1 << i) != 0 {
            parts.push(format!("!{name}"));
        }
    }
    if parts.is_empty() {
        "true".to_string()
    } else {
        parts.join(" & ")
    }
}

/// Letters compatible with an edge constraint, for explicit enumeration.
pub fn explicit_letters(ba: &BuchiAutomaton, e: &BaEdge) -> Vec<Letter> {
    let free: Vec<usize> = (0..ba.props.len())
        .filter(|i| e.pos & (1 << i) == 0 && e.neg & (1 << i) == 0)
        .collect();
    let mut out = Vec::new();
    for combo in 0..(1u32 << free.len()) {
        let mut letter = e.pos;
        for (j, &i) in free.iter().enumerate() {
            if combo & (1 << j) != 0 {
                letter |= 1 << i;
            }
        }
        out.push(letter);
    }
    out.sort();
    out.dedup();
    out
}

/// Groups the automaton's explicit transitions by (from, letter, to), used by
/// tests and DOT export.
pub fn explicit_transitions(ba: &BuchiAutomaton) -> BTreeMap<(usize, Letter), BTreeSet<usize>> {
    let mut out: BTreeMap<(usize, Letter), BTreeSet<usize>> = BTreeMap::new();
    for e in &ba.edges {
        for letter in explicit_letters(ba, e) {
            out.entry((e.from, letter)).or_default().insert(e.to);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ltl::parse_ltl;

    fn props(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn true_formula_gives_single_state_accept_all() {
        let ba = build_buchi(&Ltl::True, &props(&["p"])).unwrap();
        assert_eq!(ba.n_states, 1);
        assert!(ba.accepting[0]);
        assert!(ba.accepts_lasso(&[], &[0]).unwrap());
        assert!(ba.accepts_lasso(&[1], &[0, 1]).unwrap());
    }

    #[test]
    fn false_formula_rejects_everything() {
        let ba = build_buchi(&Ltl::False, &props(&["p"])).unwrap();
        assert!(!ba.accepts_lasso(&[], &[0]).unwrap());
        assert!(!ba.accepts_lasso(&[1], &[1]).unwrap());
    }

    #[test]
    fn globally_p_on_lassos() {
        let ba = build_buchi(&parse_ltl("G p").unwrap(), &props(&["p"])).unwrap();
        // Empty letter then p forever: position 0 violates p.
        assert!(!ba.accepts_lasso(&[0], &[1]).unwrap());
        assert!(ba.accepts_lasso(&[], &[1]).unwrap());
        assert!(!ba.accepts_lasso(&[], &[1, 0]).unwrap());
    }

    #[test]
    fn no_transition_on_letter_rejects() {
        let ba = build_buchi(&parse_ltl("p").unwrap(), &props(&["p"])).unwrap();
        assert!(!ba.accepts_lasso(&[], &[0]).unwrap());
        assert!(ba.accepts_lasso(&[], &[1]).unwrap());
    }

    #[test]
    fn eventually_globally_p() {
        let ba = build_buchi(&parse_ltl("F G p").unwrap(), &props(&["p"])).unwrap();
        assert!(ba.accepts_lasso(&[0, 0], &[1]).unwrap());
        assert!(!ba.accepts_lasso(&[1], &[1, 0]).unwrap());
    }

    #[test]
    fn until_requires_eventual_fulfilment() {
        let ba = build_buchi(&parse_ltl("a U b").unwrap(), &props(&["a", "b"])).unwrap();
        assert!(ba.accepts_lasso(&[1, 1], &[2]).unwrap());
        assert!(ba.accepts_lasso(&[], &[2]).unwrap());
        // a forever, never b.
        assert!(!ba.accepts_lasso(&[], &[1]).unwrap());
    }

    #[test]
    fn letter_outside_alphabet_is_an_error() {
        let ba = build_buchi(&parse_ltl("p").unwrap(), &props(&["p"])).unwrap();
        assert!(matches!(ba.accepts_lasso(&[], &[2]), Err(LtlError::LetterOutsideAlphabet(1))));
    }

    #[test]
    fn next_steps_one_position() {
        let ba = build_buchi(&parse_ltl("X p").unwrap(), &props(&["p"])).unwrap();
        assert!(ba.accepts_lasso(&[0], &[1]).unwrap());
        assert!(!ba.accepts_lasso(&[1], &[0]).unwrap());
    }
}
