//! Model checking of dynamic pushdown networks with nested locks (L-DPNs)
//! against single-indexed LTL properties.
//!
//! An L-DPN is a collection of pushdown systems that can spawn new instances
//! of each other and synchronize through a finite set of non-reentrant locks.
//! A single-indexed property assigns one LTL formula to each pushdown system;
//! the network satisfies the property if it has a global run, using locks in a
//! nested style, in which every instance's local run satisfies the formula of
//! its system.
//!
//! The decision procedure eliminates locks first: each control location is
//! paired with an acquisition structure summarizing the lock behaviour of the
//! run ahead ([`acq`], [`reduce`]), which turns the L-DPN into a lock-free DPN.
//! The lock-free network is then checked by a saturation-based engine
//! ([`engine`]): a Büchi product per pushdown system, repeating-head detection,
//! `pre*` saturation, and a greatest fixpoint over dynamically created initial
//! configurations. [`check`] glues the pipeline together and [`cli`] exposes it
//! as a command-line tool.

pub mod acq;
pub mod buchi;
pub mod check;
pub mod cli;
pub mod corpus;
pub mod dot;
pub mod engine;
pub mod ltl;
pub mod model;
pub mod oracle;
pub mod reduce;

pub(crate) mod scc;
