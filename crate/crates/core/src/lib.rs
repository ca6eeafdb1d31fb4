//! Topological invariants of non-Hermitian Bloch Hamiltonians.
//!
//! A non-Hermitian N×N Bloch Hamiltonian is "gapped" at a momentum when its
//! discriminant ∏_{i<j}(λ_i − λ_j)² is nonzero, i.e. all complex eigenvalues
//! are distinct. Families of such matrices over momentum-space loops, spheres
//! and tori carry invariants beyond the Hermitian Chern number:
//!
//! * along a loop the eigenvalues trace an N-strand braid ([`braids`]),
//! * on a sphere each band carries an integer charge computed from the
//!   biorthogonal Berry phase flow ([`nodes::chern_sphere`]),
//! * on a cylinder/torus the biorthogonal Wilson-loop eigenphase flow yields
//!   a Z₂ crossing invariant ([`wilson`]),
//! * and the exact N-band classification group is an abelian quotient
//!   computed by Smith normal form over the integers ([`algebra`]).
//!
//! [`models`] supplies the built-in lattice and k·p Hamiltonians plus a
//! binary grid-file format for externally sampled models; [`spectra`] holds
//! the eigen machinery (closed-form two-band path, biorthogonal frames,
//! eigenvalue continuation along paths) that everything else builds on.

pub mod algebra;
pub mod braids;
pub mod models;
pub mod nodes;
pub mod spectra;
pub mod wilson;

pub use models::{BlochModel, GridModel, LatticeVariant, LoopSpec, Momentum};
pub use spectra::{decompose, discriminant, track, EigenFrame};
