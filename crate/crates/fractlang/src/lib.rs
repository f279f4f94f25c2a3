//! Process terms as fractal recipes.
//!
//! This crate parses Milner-style process terms (and Stark–Smolka-style
//! probabilistic terms), unfolds them into finite labelled transition
//! systems and labelled Markov chains, decides trace(-measure)
//! equivalence, checks derivations in the corresponding equational axiom
//! systems, and interprets action labels as affine contractions to
//! render the regular subfractals and subfractal measures those systems
//! determine.
//!
//! The high-level pipeline is:
//!
//! 1. [`syntax`] — term grammar, well-formedness, substitution.
//! 2. [`semantics`] — small-step transitions and finite unfolding into
//!    [`semantics::Lts`] / [`semantics::Lmc`].
//! 3. [`trace`] — trace sets and the decision procedure for trace
//!    equivalence (which coincides with fractal-recipe equivalence).
//! 4. [`proof`] — a checker for explicit derivations in the classic and
//!    probabilistic axiom systems, plus a random-rewrite fuzzer.
//! 5. [`fractal`] — contraction interpretations, stream evaluation, the
//!    fixed-point solver for graph-directed IFS, Hausdorff distances.
//! 6. [`measure`] — exact rational cylinder measures, trace-measure
//!    equivalence, and Monte Carlo sampling of subfractal measures.
//! 7. [`render`] — rasterization of point clouds and sample multisets
//!    into PPM/PGM images.

pub mod fractal;
pub mod gen;
pub mod measure;
pub mod proof;
pub mod rational;
pub mod render;
pub mod semantics;
pub mod syntax;
pub mod trace;

pub use rational::Rational;
pub use syntax::{ActionLabel, PTerm, Term, Var};
