//! Exact trace measures of cylinder sets and trace-measure equivalence.
//!
//! A state of a labelled Markov chain induces a Borel probability
//! measure on streams, determined by its values on cylinders: the
//! measure of `B_w` is the total probability of the paths labelled `w`.
//! We compute those values exactly as `e_x * M_a1 * ... * M_an * 1` over
//! rational transition matrices, decide equality of the induced measures
//! by spanning the reachable row-vector space of the disjoint-union
//! automaton, and sample the pushforward measures for rendering.

use std::collections::{BTreeMap, VecDeque};

use num_traits::{One, Zero};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::fractal::{eval_stream, origin, FractalError, Interpretation, Point};
use crate::rational::{rational_to_f64, Rational};
use crate::semantics::Lmc;
use crate::syntax::ActionLabel;
use crate::trace::{Equivalence, Word};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MeasureError {
    #[error("action `{0}` is not in the chain's alphabet")]
    UnknownAction(ActionLabel),
}

/// A cylinder query: the set of streams extending a finite word.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct CylinderQuery(pub Word);

/// Linear-algebra form of an LMC: one rational matrix per action with
/// `M_a[x][y]` the probability of emitting `a` and moving from `x` to
/// `y`. The sum of the matrices is row-stochastic; cylinder measures are
/// products `e_x * M_w * 1`.
#[derive(Debug, Clone)]
pub struct WeightedAutomaton {
    n: usize,
    alphabet: Vec<ActionLabel>,
    matrices: Vec<Vec<Vec<Rational>>>,
}

impl WeightedAutomaton {
    pub fn from_lmc(lmc: &Lmc) -> Self {
        let alphabet: Vec<ActionLabel> = lmc.alphabet().iter().cloned().collect();
        Self::build(&[lmc], &alphabet)
    }

    /// Disjoint union of two chains over the combined alphabet; the
    /// second chain's states are offset by the first's state count.
    pub fn from_pair(l1: &Lmc, l2: &Lmc) -> Self {
        let mut alphabet: Vec<ActionLabel> = l1
            .alphabet()
            .union(l2.alphabet())
            .cloned()
            .collect();
        alphabet.sort();
        alphabet.dedup();
        Self::build(&[l1, l2], &alphabet)
    }

    fn build(chains: &[&Lmc], alphabet: &[ActionLabel]) -> Self {
        let n: usize = chains.iter().map(|l| l.num_states()).sum();
        let mut matrices = vec![vec![vec![Rational::zero(); n]; n]; alphabet.len()];
        let mut offset = 0;
        for lmc in chains {
            for x in 0..lmc.num_states() {
                for (a, y, p) in lmc.transitions(x) {
                    let letter = alphabet.binary_search(a).expect("alphabet covers chains");
                    matrices[letter][offset + x][offset + y] += p;
                }
            }
            offset += lmc.num_states();
        }
        WeightedAutomaton {
            n,
            alphabet: alphabet.to_vec(),
            matrices,
        }
    }

    pub fn num_states(&self) -> usize {
        self.n
    }

    pub fn alphabet(&self) -> &[ActionLabel] {
        &self.alphabet
    }

    fn letter(&self, a: &ActionLabel) -> Option<usize> {
        self.alphabet.binary_search(a).ok()
    }

    /// `v * M_letter` for a row vector `v`.
    fn advance(&self, v: &[Rational], letter: usize) -> Vec<Rational> {
        let m = &self.matrices[letter];
        let mut out = vec![Rational::zero(); self.n];
        for (x, vx) in v.iter().enumerate() {
            if vx.is_zero() {
                continue;
            }
            for (y, cell) in m[x].iter().enumerate() {
                if !cell.is_zero() {
                    out[y] += vx * cell;
                }
            }
        }
        out
    }

    fn unit(&self, state: usize) -> Vec<Rational> {
        let mut v = vec![Rational::zero(); self.n];
        v[state] = Rational::one();
        v
    }

    /// `e_state * M_w * 1`, the exact measure of the cylinder `B_w`.
    pub fn cylinder_weight(&self, state: usize, word: &[ActionLabel]) -> Option<Rational> {
        let mut v = self.unit(state);
        for a in word {
            let letter = self.letter(a)?;
            v = self.advance(&v, letter);
        }
        Some(v.into_iter().sum())
    }

    /// The sum over actions of each row must be exactly 1.
    pub fn is_row_stochastic(&self) -> bool {
        (0..self.n).all(|x| {
            let total: Rational = self
                .matrices
                .iter()
                .map(|m| m[x].iter().cloned().sum::<Rational>())
                .sum();
            total.is_one()
        })
    }
}

/// Exact trace measure `trm(x)(B_w)`: the sum over paths labelled `w`
/// from `x` of the products of edge probabilities. Letters outside the
/// chain's alphabet are errors; letters in the alphabet but off the
/// reachable support give an exact 0.
pub fn trace_measure(lmc: &Lmc, state: usize, word: &[ActionLabel]) -> Result<Rational, MeasureError> {
    for a in word {
        if !lmc.alphabet().contains(a) {
            return Err(MeasureError::UnknownAction(a.clone()));
        }
    }
    let wa = WeightedAutomaton::from_lmc(lmc);
    Ok(wa
        .cylinder_weight(state, word)
        .expect("letters checked against alphabet"))
}

/// Support table of cylinder measures: every `(state, word)` with a
/// strictly positive measure, for `|word| <= depth`. Absent words have
/// measure exactly 0.
#[derive(Debug, Clone)]
pub struct TraceMeasureTable {
    depth: usize,
    alphabet: Vec<ActionLabel>,
    entries: BTreeMap<(usize, Word), Rational>,
}

impl TraceMeasureTable {
    pub fn build(lmc: &Lmc, depth: usize) -> Self {
        let wa = WeightedAutomaton::from_lmc(lmc);
        let mut entries = BTreeMap::new();
        for x in 0..lmc.num_states() {
            let mut queue = VecDeque::from([(Word::new(), wa.unit(x))]);
            while let Some((word, v)) = queue.pop_front() {
                let weight: Rational = v.iter().cloned().sum();
                debug_assert!(!weight.is_zero());
                entries.insert((x, word.clone()), weight);
                if word.len() < depth {
                    for (letter, a) in wa.alphabet.iter().enumerate() {
                        let next = wa.advance(&v, letter);
                        if next.iter().any(|r| !r.is_zero()) {
                            let mut w = word.clone();
                            w.push(a.clone());
                            queue.push_back((w, next));
                        }
                    }
                }
            }
        }
        TraceMeasureTable {
            depth,
            alphabet: wa.alphabet,
            entries,
        }
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn get(&self, state: usize, word: &Word) -> Rational {
        self.entries
            .get(&(state, word.clone()))
            .cloned()
            .unwrap_or_else(Rational::zero)
    }

    pub fn support(&self) -> impl Iterator<Item = (&(usize, Word), &Rational)> {
        self.entries.iter()
    }

    /// Checks `trm(x)(B_eps) = 1` and the additivity identity
    /// `trm(x)(B_w) = sum over a of trm(x)(B_wa)` for every tabulated
    /// word shorter than the depth, as exact rational equalities.
    pub fn check_additivity(&self) -> bool {
        for ((state, word), value) in &self.entries {
            if word.is_empty() && !value.is_one() {
                return false;
            }
            if word.len() < self.depth {
                let total: Rational = self
                    .alphabet
                    .iter()
                    .map(|a| {
                        let mut w = word.clone();
                        w.push(a.clone());
                        self.get(*state, &w)
                    })
                    .sum();
                if total != *value {
                    return false;
                }
            }
        }
        true
    }
}

/// Decides whether two states induce the same trace measure, i.e. agree
/// on every cylinder. Spans the reachable row-vector space of the
/// disjoint-union automaton starting from `e_x1 - e_x2`; the difference
/// vanishes on all cylinders iff every spanning vector is orthogonal to
/// the all-ones vector. Exact rational arithmetic throughout; on failure
/// the offending word is returned and has provably different measures.
pub fn tzeng_equiv(l1: &Lmc, x1: usize, l2: &Lmc, x2: usize) -> Equivalence {
    let wa = WeightedAutomaton::from_pair(l1, l2);
    let n = wa.num_states();
    let mut v0 = vec![Rational::zero(); n];
    v0[x1] = Rational::one();
    v0[l1.num_states() + x2] -= Rational::one();

    // Reduced basis rows, each normalized at its pivot column.
    let mut basis: Vec<(Vec<Rational>, usize)> = Vec::new();
    let mut queue = VecDeque::from([(Word::new(), v0)]);
    while let Some((word, raw)) = queue.pop_front() {
        let mut v = raw.clone();
        for (row, pivot) in &basis {
            if !v[*pivot].is_zero() {
                let factor = v[*pivot].clone();
                for (vi, ri) in v.iter_mut().zip(row) {
                    *vi -= &factor * ri;
                }
            }
        }
        let pivot = match v.iter().position(|r| !r.is_zero()) {
            Some(p) => p,
            None => continue,
        };
        // Every earlier basis vector is orthogonal to the ones vector,
        // so this residue's total equals the raw difference of measures.
        let total: Rational = v.iter().cloned().sum();
        if !total.is_zero() {
            return Equivalence::Inequivalent { witness: word };
        }
        let norm = v[pivot].clone();
        for vi in v.iter_mut() {
            *vi /= &norm;
        }
        basis.push((v, pivot));
        for (letter, a) in wa.alphabet.iter().enumerate() {
            let child = wa.advance(&raw, letter);
            let mut w = word.clone();
            w.push(a.clone());
            queue.push_back((w, child));
        }
    }
    Equivalence::Equivalent
}

/// Brute-force companion to [`tzeng_equiv`]: compares cylinder measures
/// of every support word up to `depth` by direct path sums (the
/// recursion `trm(x)(B_aw) = sum of r * trm(y)(B_w)` over `x -r|a-> y`),
/// independently of the spanning procedure.
pub fn cylinder_equiv_oracle(l1: &Lmc, x1: usize, l2: &Lmc, x2: usize, depth: usize) -> bool {
    fn measures(lmc: &Lmc, state: usize, depth: usize, prefix: &mut Word, out: &mut BTreeMap<Word, Rational>) {
        // Path-sum recursion, one prefix at a time.
        fn measure_rec(lmc: &Lmc, state: usize, word: &[ActionLabel]) -> Rational {
            match word.split_first() {
                None => Rational::one(),
                Some((a, rest)) => {
                    let mut total = Rational::zero();
                    for (b, y, p) in lmc.transitions(state) {
                        if b == a {
                            total += p * measure_rec(lmc, *y, rest);
                        }
                    }
                    total
                }
            }
        }
        let m = measure_rec(lmc, state, prefix);
        if m.is_zero() {
            return;
        }
        out.insert(prefix.clone(), m);
        if prefix.len() < depth {
            let alphabet: Vec<ActionLabel> = lmc.alphabet().iter().cloned().collect();
            for a in alphabet {
                prefix.push(a);
                measures(lmc, state, depth, prefix, out);
                prefix.pop();
            }
        }
    }
    let mut m1 = BTreeMap::new();
    let mut m2 = BTreeMap::new();
    measures(l1, x1, depth, &mut Word::new(), &mut m1);
    measures(l2, x2, depth, &mut Word::new(), &mut m2);
    m1 == m2
}

/// Draws `samples` i.i.d. truncated runs of the chain from `state`,
/// mapping each emitted word through the interpretation. Each sample is
/// within `c^truncation` of a diameter bound of an exact subfractal
/// measure sample; empirical cylinder frequencies converge to the exact
/// trace measures. The RNG is keyed by `(seed, sample index)`, so the
/// multiset is reproducible and independent of evaluation order.
pub fn sample_measure(
    lmc: &Lmc,
    state: usize,
    interp: &Interpretation,
    truncation: usize,
    samples: usize,
    seed: u64,
) -> Result<Vec<Point>, FractalError> {
    for a in lmc.alphabet() {
        interp.get(a)?;
    }
    // Cumulative transition weights per state, in transition order.
    let cumulative: Vec<Vec<(f64, ActionLabel, usize)>> = (0..lmc.num_states())
        .map(|x| {
            let mut acc = 0.0;
            lmc.transitions(x)
                .iter()
                .map(|(a, y, p)| {
                    acc += rational_to_f64(p);
                    (acc, a.clone(), *y)
                })
                .collect()
        })
        .collect();
    let points: Vec<Point> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let mut here = state;
            let mut word = Word::with_capacity(truncation);
            for _ in 0..truncation {
                let u: f64 = rng.gen();
                let row = &cumulative[here];
                let (_, a, y) = row
                    .iter()
                    .find(|(cum, _, _)| u < *cum)
                    .unwrap_or_else(|| row.last().expect("productive state"));
                word.push(a.clone());
                here = *y;
            }
            eval_stream(interp, &word, origin()).expect("alphabet coverage checked")
        })
        .collect();
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fractal::certify_contraction;
    use crate::rational::rat;
    use crate::semantics::{unfold_prob, Lmc};
    use crate::syntax::parse_pterm;

    fn act(name: &str) -> ActionLabel {
        ActionLabel::new(name)
    }

    fn word(names: &[&str]) -> Word {
        names.iter().map(|n| act(n)).collect()
    }

    fn chain(src: &str) -> Lmc {
        unfold_prob(&parse_pterm(src).unwrap()).unwrap()
    }

    fn interval_interp() -> Interpretation {
        Interpretation::new(
            1,
            [
                (act("a"), certify_contraction(1, &[0.5], &[0.0]).unwrap()),
                (act("b"), certify_contraction(1, &[0.5], &[0.5]).unwrap()),
            ],
        )
        .unwrap()
    }

    #[test]
    fn single_state_chain_measures() {
        let lmc = chain("mu v. (a.v +[1/3] b.v)");
        assert_eq!(trace_measure(&lmc, 0, &word(&["a"])).unwrap(), rat(1, 3));
        assert_eq!(trace_measure(&lmc, 0, &word(&["a", "b"])).unwrap(), rat(2, 9));
        assert_eq!(trace_measure(&lmc, 0, &word(&[])).unwrap(), rat(1, 1));
    }

    #[test]
    fn empty_cylinder_has_measure_one_everywhere() {
        let lmc = chain("mu v. (a.(b.v +[1/4] c.v) +[1/2] b.v)");
        for x in 0..lmc.num_states() {
            assert!(trace_measure(&lmc, x, &[]).unwrap().is_one());
        }
    }

    #[test]
    fn off_support_words_have_measure_zero() {
        let lmc = chain("mu v. (a.v +[1/2] b.(mu w. c.w +[1/3] b.w))");
        // `c` is in the alphabet but not reachable as a first letter.
        assert_eq!(trace_measure(&lmc, 0, &word(&["c"])).unwrap(), rat(0, 1));
        // Unknown actions are errors, not zeros.
        assert!(matches!(
            trace_measure(&lmc, 0, &word(&["z"])),
            Err(MeasureError::UnknownAction(_))
        ));
    }

    #[test]
    fn weighted_automaton_is_row_stochastic() {
        let lmc = chain("mu v. (a.(b.v +[1/4] c.v) +[2/7] b.v)");
        let wa = WeightedAutomaton::from_lmc(&lmc);
        assert!(wa.is_row_stochastic());
    }

    #[test]
    fn mixing_with_itself_preserves_the_measure() {
        let e = parse_pterm("mu v. (a.v +[1/2] b.v)").unwrap();
        let mixed = crate::syntax::PTerm::choice(e.clone(), rat(1, 2), e.clone());
        let l1 = unfold_prob(&e).unwrap();
        let l2 = unfold_prob(&mixed).unwrap();
        assert!(tzeng_equiv(&l1, l1.root(), &l2, l2.root()).is_equivalent());
    }

    #[test]
    fn different_weights_are_distinguished_by_a() {
        let l1 = chain("mu v. (a.v +[1/2] b.v)");
        let l2 = chain("mu v. (a.v +[1/3] b.v)");
        match tzeng_equiv(&l1, l1.root(), &l2, l2.root()) {
            Equivalence::Inequivalent { witness } => {
                assert_eq!(witness, word(&["a"]));
                let m1 = trace_measure(&l1, l1.root(), &witness).unwrap();
                let m2 = trace_measure(&l2, l2.root(), &witness).unwrap();
                assert_ne!(m1, m2);
            }
            Equivalence::Equivalent => panic!("chains differ"),
        }
    }

    #[test]
    fn alpha_variants_are_equivalent() {
        let l1 = chain("mu v. (a.v +[1/2] b.v)");
        let l2 = chain("mu w. (a.w +[1/2] b.w)");
        assert!(tzeng_equiv(&l1, l1.root(), &l2, l2.root()).is_equivalent());
    }

    #[test]
    fn oracle_agrees_on_small_fixtures() {
        let pairs = [
            ("mu v. (a.v +[1/2] b.v)", "mu w. (a.w +[1/2] b.w)", true),
            ("mu v. (a.v +[1/2] b.v)", "mu v. (a.v +[1/3] b.v)", false),
            (
                "mu v. a.(b.v +[1/2] c.v)",
                "mu v. (a.b.v +[1/2] a.c.v)",
                true,
            ),
        ];
        for (s1, s2, expected) in pairs {
            let l1 = chain(s1);
            let l2 = chain(s2);
            let depth = l1.num_states() + l2.num_states();
            let fast = tzeng_equiv(&l1, l1.root(), &l2, l2.root()).is_equivalent();
            let brute = cylinder_equiv_oracle(&l1, l1.root(), &l2, l2.root(), depth);
            assert_eq!(fast, expected, "{s1} vs {s2}");
            assert_eq!(brute, expected, "{s1} vs {s2} (oracle)");
        }
    }

    #[test]
    fn additivity_holds_exactly_on_the_support_table() {
        for src in [
            "mu v. (a.v +[1/3] b.v)",
            "mu v. (a.(b.v +[1/4] c.v) +[2/7] b.v)",
            "mu v. a.v +[1/2] mu w. b.w",
        ] {
            let lmc = chain(src);
            let table = TraceMeasureTable::build(&lmc, 5);
            assert!(table.check_additivity(), "{src}");
        }
    }

    #[test]
    fn recursion_identities_hold_exactly() {
        // Prefix: trm(a.e)(B_au) = trm(e)(B_u).
        let e = parse_pterm("mu v. (a.v +[1/3] b.v)").unwrap();
        let ae = crate::syntax::PTerm::prefix(act("a"), e.clone());
        let le = unfold_prob(&e).unwrap();
        let lae = unfold_prob(&ae).unwrap();
        for u in [word(&[]), word(&["a"]), word(&["a", "b"]), word(&["b", "b"])] {
            let mut au = word(&["a"]);
            au.extend(u.iter().cloned());
            assert_eq!(
                trace_measure(&lae, lae.root(), &au).unwrap(),
                trace_measure(&le, le.root(), &u).unwrap()
            );
        }
        // And a prefix mismatch gives zero.
        assert!(trace_measure(&lae, lae.root(), &word(&["b"])).unwrap().is_zero());

        // Choice: trm(e1 +[r] e2)(B_w) = r trm(e1) + (1-r) trm(e2).
        let e1 = parse_pterm("mu v. (a.v +[1/2] b.v)").unwrap();
        let e2 = parse_pterm("mu w. (a.w +[1/4] b.w)").unwrap();
        let r = rat(2, 5);
        let mix = crate::syntax::PTerm::choice(e1.clone(), r.clone(), e2.clone());
        let l1 = unfold_prob(&e1).unwrap();
        let l2 = unfold_prob(&e2).unwrap();
        let lm = unfold_prob(&mix).unwrap();
        for w in [word(&["a"]), word(&["b"]), word(&["b", "b"]), word(&["a", "b"])] {
            let lhs = trace_measure(&lm, lm.root(), &w).unwrap();
            let rhs = &r * trace_measure(&l1, l1.root(), &w).unwrap()
                + (Rational::one() - &r) * trace_measure(&l2, l2.root(), &w).unwrap();
            assert_eq!(lhs, rhs, "{w:?}");
        }

        // Fixpoint: trm(mu v. e)(B_w) = trm(e[mu v. e / v])(B_w).
        let m = parse_pterm("mu v. (a.v +[1/4] b.(mu w. a.w +[1/2] b.w))").unwrap();
        let unfolded = m.unfold_fixpoint().unwrap();
        let lmu = unfold_prob(&m).unwrap();
        let lun = unfold_prob(&unfolded).unwrap();
        for w in [word(&[]), word(&["a"]), word(&["b", "a"]), word(&["a", "b", "b"])] {
            assert_eq!(
                trace_measure(&lmu, lmu.root(), &w).unwrap(),
                trace_measure(&lun, lun.root(), &w).unwrap()
            );
        }
    }

    #[test]
    fn solution_equation_on_interval_boxes() {
        // Under the interval maps, sigma_a covers [0, 1/2] and sigma_b
        // covers [1/2, 1]. For U = [0, 1/2), the preimage under stream
        // evaluation is the cylinder B_a minus a null set, and under
        // sigma_a^-1 it is everything minus a null set, under sigma_b^-1
        // nothing. The solution equation for the measure then reads
        // trm(x)(B_a) = r_a * 1 + r_b * 0 for a state x -r_a|a-> ... .
        let lmc = chain("mu v. (a.v +[2/5] b.v)");
        let u_measure = trace_measure(&lmc, 0, &word(&["a"])).unwrap();
        let mut rhs = Rational::zero();
        for (a, _, p) in lmc.transitions(0) {
            let preimage_measure = if a.name() == "a" {
                Rational::one()
            } else {
                Rational::zero()
            };
            rhs += p * preimage_measure;
        }
        assert_eq!(u_measure, rhs);

        // A second box: U' = [0, 1/4) pulls back to B_aa (up to null
        // sets): sigma_a^-1 U' = [0, 1/2) ~ B_a, sigma_b^-1 U' = empty.
        let lhs = trace_measure(&lmc, 0, &word(&["a", "a"])).unwrap();
        let mut rhs = Rational::zero();
        for (a, y, p) in lmc.transitions(0) {
            let pre = if a.name() == "a" {
                trace_measure(&lmc, *y, &word(&["a"])).unwrap()
            } else {
                Rational::zero()
            };
            rhs += p * pre;
        }
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn sampling_is_deterministic_and_on_support() {
        let lmc = chain("mu v. (a.v +[1/2] b.v)");
        let interp = interval_interp();
        let s1 = sample_measure(&lmc, 0, &interp, 20, 200, 42).unwrap();
        let s2 = sample_measure(&lmc, 0, &interp, 20, 200, 42).unwrap();
        assert_eq!(s1, s2);
        let s3 = sample_measure(&lmc, 0, &interp, 20, 200, 43).unwrap();
        assert_ne!(s1, s3);
        // Support bridge: every sample lies within the solve guarantee
        // (plus truncation slack) of the fractal solution for the
        // underlying LTS.
        let lts = lmc.underlying_lts();
        let sv = crate::fractal::solve(&lts, &interp, 20, origin()).unwrap();
        let cloud = sv.component(lts.root());
        let slack = cloud.guarantee() + interp.max_coeff().powi(20) * 2.0 + 1e-9;
        for p in &s1 {
            let nearest = cloud
                .points()
                .iter()
                .map(|&q| crate::fractal::distance(*p, q))
                .fold(f64::INFINITY, f64::min);
            assert!(nearest <= slack, "{nearest} > {slack}");
        }
    }

    #[test]
    fn deterministic_walk_reaches_the_fixed_point() {
        let lmc = chain("mu v. a.v");
        let interp = Interpretation::new(
            2,
            [(
                act("a"),
                certify_contraction(2, &[0.5, 0.0, 0.0, 0.5], &[0.25, 3f64.sqrt() / 4.0]).unwrap(),
            )],
        )
        .unwrap();
        let samples = sample_measure(&lmc, 0, &interp, 30, 8, 1).unwrap();
        for p in samples {
            assert!((p[0] - 0.5).abs() < 1e-6);
            assert!((p[1] - 3f64.sqrt() / 2.0).abs() < 1e-6);
        }
    }
}
