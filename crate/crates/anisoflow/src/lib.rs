//! AnisoFlow: a 2D level-set finite-element solver for interface migration
//! driven by inclination-dependent boundary energy density.
//!
//! The interface is carried as the zero contour of a signed distance field
//! (positive inside) on a conforming triangular mesh. Each time step solves a
//! backward-Euler step of the level-set transport equation
//!
//! ```text
//!   d(phi)/dt = mu * D : grad(grad(phi)),    D = gamma*I + d2(gamma)/d(grad phi)^2
//! ```
//!
//! in weak form with SUPG-stabilized convection, then reinitializes the field
//! to an exact distance function of its own zero contour.
//!
//! Crate layout:
//! - [`mesh`]: triangular meshes, nodal fields, gradient recovery, I/O
//! - [`levelset`]: signed-distance initialization, contouring, reinitialization
//! - [`energy`]: inclination-dependent energy models and diffusion tensors
//! - [`fem`]: sparse assembly, preconditioned Krylov solve, one-step advance
//! - [`bench`]: the shrinking-ellipse oracle, measurements and diagnostics
//! - [`sim`]: the end-to-end time loop and iso/aniso comparison runner

pub mod bench;
pub mod energy;
pub mod fem;
pub mod levelset;
pub mod mesh;
pub mod sim;
