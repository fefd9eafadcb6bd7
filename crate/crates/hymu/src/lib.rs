//! Decision-procedure toolkit for the hybrid mu-calculus.
//!
//! The logic extends the modal mu-calculus with nominals (`'i`), their
//! negations, and satisfaction operators (`@'i F`).  The crate provides:
//!
//! - [`syntax`]: formulas in negation normal form, a parser and canonical
//!   printer, dualization, well-naming, fixpoint unfolding, the dependency
//!   order on bound variables, and the Fischer-Ladner closure;
//! - [`semantics`]: finite Kripke models with named worlds, denotational
//!   evaluation by fixpoint iteration, the evaluation parity game, a Zielonka
//!   solver with certificate verification, and a model checker;
//! - [`calculus`]: plain sequents of satisfaction statements, the core
//!   inference rules with instance checking, trace steps between sequents,
//!   and the deterministic / ground / narrowed-modal derived rules that make
//!   root-to-leaf search deterministic up to modal choices;
//! - [`annotation`]: annotated sequents whose members carry words of names
//!   tracking nu-unfoldings, the annotated rule system, and the ordering used
//!   by the derived thinning rule;
//! - [`proof`]: finite proof trees with back edges, the goodness check on
//!   back edges, full proof checking, serialization, and an independent
//!   trace-based oracle for cycle soundness;
//! - [`prover`]: the bounded proof-search procedure, returning either a
//!   checkable proof object or a countermodel;
//! - [`rnd`]: seeded random generation of formulas and models for testing.

pub mod annotation;
pub mod calculus;
pub mod proof;
pub mod prover;
pub mod rnd;
pub mod semantics;
pub mod syntax;
