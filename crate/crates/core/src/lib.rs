//! Exact inference for Bayesian networks specified by propositional and
//! relational logical languages.
//!
//! A specification declares relations and gives each one either a
//! probabilistic assessment (a root with a shared rational probability) or a
//! definition axiom (a deterministic logical body). Grounding over a finite
//! domain `{1..N}` turns the specification into an ordinary Bayesian network
//! over ground atoms, answerable exactly with arbitrary-precision rationals.
//!
//! Beyond the general enumerator, the crate implements the tractable routes
//! that make exact inference scale on restricted languages:
//!
//! * a product-form evaluator for positive queries on conjunctive
//!   propositional specifications ([`infer::positive_query_product`]),
//! * ancestor pruning for quantifier-free specifications
//!   ([`ground::relevant_subnetwork`]),
//! * a polynomial pipeline for the negation-free DL-Lite fragment that
//!   reduces role factors to edge-cover partition functions ([`dllite`]),
//! * the cubic class-B edge-cover counting dynamic program, the all-black
//!   complete-bipartite decomposition, weighted partition functions, minimum
//!   covers and a Glauber-dynamics sampler ([`edgecover`]),
//! * encoders from CPTs, noisy-or gates, plate models, PRMs-with-skeletons,
//!   CNF gadgets and matrix counting problems into the core language
//!   ([`encode`]).

pub mod dllite;
pub mod edgecover;
pub mod encode;
pub mod ground;
pub mod infer;
pub mod lang;
pub mod model;
