//! Regularized Feynman amplitudes of Euclidean scalar field theory on flat
//! space, computed as meromorphic germs with linear poles and renormalized by
//! projection onto the holomorphic part.
//!
//! The pipeline: a [`graph::FeynmanGraph`] is cut into Hepp sectors (one per
//! edge ordering), each sector is desingularized by the spanning-tree blow-up
//! of [`blowup`], the resulting cube integrals are continued meromorphically
//! by integration by parts in [`continuation`], and the polar/holomorphic
//! split of [`germ`] yields the renormalized value in [`renorm`].

pub mod blowup;
pub mod continuation;
pub mod error;
pub mod gauss;
pub mod geometry;
pub mod germ;
pub mod graph;
pub mod jet;
pub mod linform;
pub mod quadrature;
pub mod renorm;

pub use error::CoreError;
pub use germ::{MeromorphicGerm, PolarTerm, RawGerm};
pub use graph::{DivergenceReport, FeynmanGraph, LabelledGraph, MetricGraph};
pub use jet::Jet;
pub use linform::LinearForm;
