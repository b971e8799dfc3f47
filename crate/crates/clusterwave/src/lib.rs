//! Scattering by clusters of small, highly contrasted inclusions.
//!
//! The pipeline runs from a [`config::ClusterConfig`] through the Newtonian
//! spectrum of the reference shape ([`spectral`]) to the Foldy–Lax system
//! ([`foldylax`]), with a dense Lippmann–Schwinger solve ([`oracle`]) as reference.

pub mod config;
pub mod grid;
pub mod kernels;
pub mod linalg;
pub mod quadrature;
pub mod spectral;
pub mod foldylax;
pub mod oracle;
pub mod experiments;
