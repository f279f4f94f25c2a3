//! Trace sets and the decision procedure for trace equivalence.
//!
//! Trace equivalence of productive systems coincides with equality of
//! emitted stream sets, and (by the soundness/completeness results the
//! axiom system realizes) with fractal-recipe equivalence, so this module
//! is the semantic heart of the `equiv` pipeline. The decision procedure
//! determinizes both systems by subset construction and then runs a
//! union-find equivalence check over the pair graph; on failure a
//! shortest distinguishing word (ties broken lexicographically) is
//! reported.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use crate::semantics::Lts;
use crate::syntax::ActionLabel;

/// A finite word over the action alphabet.
pub type Word = Vec<ActionLabel>;

/// Outcome of an equivalence check, with a distinguishing witness on
/// failure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Equivalence {
    Equivalent,
    Inequivalent { witness: Word },
}

impl Equivalence {
    pub fn is_equivalent(&self) -> bool {
        matches!(self, Equivalence::Equivalent)
    }

    pub fn witness(&self) -> Option<&Word> {
        match self {
            Equivalence::Equivalent => None,
            Equivalence::Inequivalent { witness } => Some(witness),
        }
    }
}

/// All words of length at most `depth` labelling paths from a state.
/// Prefix-closed by construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceSet {
    depth: usize,
    words: BTreeSet<Word>,
}

impl TraceSet {
    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn words(&self) -> &BTreeSet<Word> {
        &self.words
    }

    pub fn contains(&self, w: &[ActionLabel]) -> bool {
        self.words.contains(w)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// Enumerates `traces(x)` truncated at `depth`.
pub fn traces(lts: &Lts, state: usize, depth: usize) -> TraceSet {
    let mut memo: HashMap<(usize, usize), BTreeSet<Word>> = HashMap::new();
    let words = trace_words(lts, state, depth, &mut memo);
    TraceSet { depth, words }
}

fn trace_words(
    lts: &Lts,
    state: usize,
    depth: usize,
    memo: &mut HashMap<(usize, usize), BTreeSet<Word>>,
) -> BTreeSet<Word> {
    if let Some(cached) = memo.get(&(state, depth)) {
        return cached.clone();
    }
    let mut words = BTreeSet::from([Word::new()]);
    if depth > 0 {
        for (a, next) in lts.successors(state) {
            for suffix in trace_words(lts, *next, depth - 1, memo) {
                let mut w = Word::with_capacity(suffix.len() + 1);
                w.push(a.clone());
                w.extend(suffix);
                words.insert(w);
            }
        }
    }
    memo.insert((state, depth), words.clone());
    words
}

/// Deterministic automaton produced by the subset construction. All
/// non-dead states accept (trace languages are prefix-closed), so
/// language equality reduces to matching dead-state reachability.
#[derive(Debug, Clone)]
pub struct Dfa {
    subsets: Vec<BTreeSet<usize>>,
    trans: Vec<Vec<usize>>,
    start: usize,
    dead: usize,
    alphabet: Vec<ActionLabel>,
}

impl Dfa {
    /// Subset construction from `state`, total over `alphabet` (which
    /// must be sorted and duplicate-free).
    pub fn determinize(lts: &Lts, state: usize, alphabet: &[ActionLabel]) -> Dfa {
        debug_assert!(alphabet.windows(2).all(|w| w[0] < w[1]));
        let start_subset = BTreeSet::from([state]);
        let mut subsets = vec![start_subset.clone(), BTreeSet::new()];
        let mut index: HashMap<BTreeSet<usize>, usize> =
            HashMap::from([(start_subset, 0), (BTreeSet::new(), 1)]);
        let mut trans: Vec<Vec<usize>> = Vec::new();
        let mut next = 0;
        while next < subsets.len() {
            let current = subsets[next].clone();
            let mut row = Vec::with_capacity(alphabet.len());
            for a in alphabet {
                let mut image = BTreeSet::new();
                for &s in &current {
                    for (label, target) in lts.successors(s) {
                        if label == a {
                            image.insert(*target);
                        }
                    }
                }
                let id = match index.get(&image) {
                    Some(&id) => id,
                    None => {
                        let id = subsets.len();
                        index.insert(image.clone(), id);
                        subsets.push(image);
                        id
                    }
                };
                row.push(id);
            }
            trans.push(row);
            next += 1;
        }
        Dfa {
            subsets,
            trans,
            start: 0,
            dead: 1,
            alphabet: alphabet.to_vec(),
        }
    }

    pub fn num_states(&self) -> usize {
        self.subsets.len()
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn subset(&self, state: usize) -> &BTreeSet<usize> {
        &self.subsets[state]
    }

    pub fn is_dead(&self, state: usize) -> bool {
        self.subsets[state].is_empty()
    }

    /// The canonical dead state (the empty subset).
    pub fn dead_state(&self) -> usize {
        self.dead
    }

    fn letter_index(&self, a: &ActionLabel) -> Option<usize> {
        self.alphabet.binary_search(a).ok()
    }

    pub fn next(&self, state: usize, a: &ActionLabel) -> Option<usize> {
        Some(self.trans[state][self.letter_index(a)?])
    }

    /// Membership in the (prefix-closed) trace language.
    pub fn accepts(&self, word: &[ActionLabel]) -> bool {
        let mut state = self.start;
        for a in word {
            match self.next(state, a) {
                Some(s) => state = s,
                None => return false,
            }
        }
        !self.is_dead(state)
    }
}

fn combined_alphabet(l1: &Lts, l2: &Lts) -> Vec<ActionLabel> {
    let mut all: BTreeSet<ActionLabel> = l1.alphabet().clone();
    all.extend(l2.alphabet().iter().cloned());
    all.into_iter().collect()
}

struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u32>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, x: usize) -> usize {
        if self.parent[x] != x {
            let root = self.find(self.parent[x]);
            self.parent[x] = root;
        }
        self.parent[x]
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        if self.rank[ra] < self.rank[rb] {
            self.parent[ra] = rb;
        } else if self.rank[ra] > self.rank[rb] {
            self.parent[rb] = ra;
        } else {
            self.parent[rb] = ra;
            self.rank[ra] += 1;
        }
    }
}

/// Decides `tr(x1) = tr(x2)`. Both systems must be productive (every
/// unfolded system is). On inequivalence, the witness is the shortest
/// distinguishing word, ties broken by lexicographic action order; it
/// belongs to exactly one of the two trace languages.
pub fn trace_equiv(l1: &Lts, x1: usize, l2: &Lts, x2: usize) -> Equivalence {
    let alphabet = combined_alphabet(l1, l2);
    let d1 = Dfa::determinize(l1, x1, &alphabet);
    let d2 = Dfa::determinize(l2, x2, &alphabet);
    if hk_equivalent(&d1, &d2) {
        Equivalence::Equivalent
    } else {
        let witness = shortest_witness(&d1, &d2);
        Equivalence::Inequivalent { witness }
    }
}

/// Union-find equivalence over the pair graph of the two DFAs.
fn hk_equivalent(d1: &Dfa, d2: &Dfa) -> bool {
    let n1 = d1.num_states();
    let mut uf = UnionFind::new(n1 + d2.num_states());
    let accepting = |i: usize| {
        if i < n1 {
            !d1.is_dead(i)
        } else {
            !d2.is_dead(i - n1)
        }
    };
    let succ = |i: usize, letter: usize| {
        if i < n1 {
            d1.trans[i][letter]
        } else {
            n1 + d2.trans[i - n1][letter]
        }
    };
    let mut stack = vec![(d1.start, n1 + d2.start)];
    uf.union(d1.start, n1 + d2.start);
    while let Some((p, q)) = stack.pop() {
        if accepting(p) != accepting(q) {
            return false;
        }
        for letter in 0..d1.alphabet.len() {
            let (ps, qs) = (succ(p, letter), succ(q, letter));
            if uf.find(ps) != uf.find(qs) {
                uf.union(ps, qs);
                stack.push((ps, qs));
            }
        }
    }
    true
}

/// BFS over the product automaton; expanding letters in sorted order
/// makes the first distinguishing pair dequeued carry the
/// shortest-then-lexicographically-least witness.
fn shortest_witness(d1: &Dfa, d2: &Dfa) -> Word {
    let mut parent: HashMap<(usize, usize), ((usize, usize), usize)> = HashMap::new();
    let mut queue = VecDeque::from([(d1.start, d2.start)]);
    let mut seen = BTreeSet::from([(d1.start, d2.start)]);
    while let Some((p, q)) = queue.pop_front() {
        if d1.is_dead(p) != d2.is_dead(q) {
            let mut word = Vec::new();
            let mut cur = (p, q);
            while let Some(&(prev, letter)) = parent.get(&cur) {
                word.push(d1.alphabet[letter].clone());
                cur = prev;
            }
            word.reverse();
            return word;
        }
        for letter in 0..d1.alphabet.len() {
            let next = (d1.trans[p][letter], d2.trans[q][letter]);
            if seen.insert(next) {
                parent.insert(next, ((p, q), letter));
                queue.push_back(next);
            }
        }
    }
    unreachable!("called on inequivalent automata")
}

/// Finite-depth brute force: literal comparison of enumerated trace
/// sets. Used as an independent oracle in tests; agrees with
/// [`trace_equiv`] at any depth at least the length of the shortest
/// distinguishing word (in particular at `|states1| * |states2|`).
pub fn equiv_oracle(l1: &Lts, x1: usize, l2: &Lts, x2: usize, depth: usize) -> bool {
    traces(l1, x1, depth).words() == traces(l2, x2, depth).words()
}

/// Convenience: depth-`n` trace table for several states at once, used
/// by the dump/trace CLI path.
pub fn trace_table(lts: &Lts, depth: usize) -> BTreeMap<usize, TraceSet> {
    (0..lts.num_states())
        .map(|i| (i, traces(lts, i, depth)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semantics::unfold;
    use crate::syntax::parse_term;

    fn act(name: &str) -> ActionLabel {
        ActionLabel::new(name)
    }

    fn word(names: &[&str]) -> Word {
        names.iter().map(|n| act(n)).collect()
    }

    #[test]
    fn traces_of_single_loop() {
        let lts = unfold(&parse_term("mu v. a.v").unwrap()).unwrap();
        let t = traces(&lts, lts.root(), 3);
        let expected: BTreeSet<Word> =
            [word(&[]), word(&["a"]), word(&["a", "a"]), word(&["a", "a", "a"])]
                .into_iter()
                .collect();
        assert_eq!(t.words(), &expected);
    }

    #[test]
    fn traces_of_fig5_e2_at_depth_two() {
        let lts = unfold(&parse_term("mu v. a1.(a2.v + a3.v)").unwrap()).unwrap();
        let t = traces(&lts, lts.root(), 2);
        let expected: BTreeSet<Word> =
            [word(&[]), word(&["a1"]), word(&["a1", "a2"]), word(&["a1", "a3"])]
                .into_iter()
                .collect();
        assert_eq!(t.words(), &expected);
    }

    #[test]
    fn productivity_extends_every_word() {
        let lts = unfold(&parse_term("mu v. a.(b.v + c.v)").unwrap()).unwrap();
        let shallow = traces(&lts, lts.root(), 2);
        let deep = traces(&lts, lts.root(), 3);
        for w in shallow.words().iter().filter(|w| w.len() == 2) {
            assert!(
                deep.words().iter().any(|d| d.len() == 3 && d.starts_with(w)),
                "{w:?} has no extension"
            );
        }
    }

    #[test]
    fn fig5_terms_are_trace_equivalent() {
        let l1 = unfold(&parse_term("mu w. mu v. (a1.a2.v + a1.a3.w)").unwrap()).unwrap();
        let l2 = unfold(&parse_term("mu v. a1.(a2.v + a3.v)").unwrap()).unwrap();
        assert!(trace_equiv(&l1, l1.root(), &l2, l2.root()).is_equivalent());
        assert!(equiv_oracle(&l1, l1.root(), &l2, l2.root(), 8));
    }

    #[test]
    fn plain_and_twisted_gaskets_differ_with_witness_ba() {
        let plain = unfold(&parse_term("mu v. (a.v + b.v + c.v)").unwrap()).unwrap();
        let twisted =
            unfold(&parse_term("mu v. (a.v + b.(b.v + c.v) + c.(b.v + c.v))").unwrap()).unwrap();
        match trace_equiv(&plain, plain.root(), &twisted, twisted.root()) {
            Equivalence::Inequivalent { witness } => {
                assert_eq!(witness, word(&["b", "a"]));
                // The witness is in exactly one of the trace sets.
                let depth = witness.len();
                let in_plain = traces(&plain, plain.root(), depth).contains(&witness);
                let in_twisted = traces(&twisted, twisted.root(), depth).contains(&witness);
                assert!(in_plain ^ in_twisted);
            }
            Equivalence::Equivalent => panic!("gaskets should differ"),
        }
    }

    #[test]
    fn every_term_is_equivalent_to_itself() {
        for src in ["mu v. a.v", "mu v. (a.v + b.v + c.v)", "mu v. a.(b.v + c.v)"] {
            let lts = unfold(&parse_term(src).unwrap()).unwrap();
            assert!(trace_equiv(&lts, lts.root(), &lts, lts.root()).is_equivalent());
        }
    }

    #[test]
    fn oracle_at_depth_zero_is_trivially_true() {
        let l1 = unfold(&parse_term("mu v. a.v").unwrap()).unwrap();
        let l2 = unfold(&parse_term("mu v. b.v").unwrap()).unwrap();
        assert!(equiv_oracle(&l1, l1.root(), &l2, l2.root(), 0));
        assert!(!equiv_oracle(&l1, l1.root(), &l2, l2.root(), 1));
    }

    #[test]
    fn dfa_membership_matches_path_enumeration() {
        let terms = [
            "mu v. a.(b.v + c.v)",
            "mu v. (a.v + b.v)",
            "mu w. mu v. (a.b.v + b.a.w)",
        ];
        for src in terms {
            let lts = unfold(&parse_term(src).unwrap()).unwrap();
            let alphabet: Vec<ActionLabel> = lts.alphabet().iter().cloned().collect();
            let dfa = Dfa::determinize(&lts, lts.root(), &alphabet);
            let t = traces(&lts, lts.root(), 6);
            // Every word up to depth 6 over the alphabet is classified
            // identically by the DFA and the enumeration.
            let mut words: Vec<Word> = vec![Word::new()];
            for _ in 0..6 {
                let mut next = Vec::new();
                for w in &words {
                    for a in &alphabet {
                        let mut ext = w.clone();
                        ext.push(a.clone());
                        next.push(ext);
                    }
                }
                for w in &next {
                    assert_eq!(dfa.accepts(w), t.contains(w), "{src}: {w:?}");
                }
                words = next;
            }
        }
    }

    #[test]
    fn dead_state_is_explicit_and_total() {
        let lts = unfold(&parse_term("mu v. a.b.v").unwrap()).unwrap();
        let alphabet: Vec<ActionLabel> = lts.alphabet().iter().cloned().collect();
        let dfa = Dfa::determinize(&lts, lts.root(), &alphabet);
        assert!(dfa.is_dead(dfa.dead_state()));
        for s in 0..dfa.num_states() {
            for a in &alphabet {
                assert!(dfa.next(s, a).is_some());
            }
        }
        // b is not available initially, so it leads to the dead state.
        let s = dfa.next(dfa.start(), &act("b")).unwrap();
        assert!(dfa.is_dead(s));
    }
}
