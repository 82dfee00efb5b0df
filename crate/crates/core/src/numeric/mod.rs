//! Small self-contained numerical kernels shared by the physics modules.

pub mod diff;
pub mod fit;
pub mod ode;
pub mod quad;
pub mod roots;
