//! Small numerical kernels shared by the modules: adaptive quadrature,
//! an embedded Runge–Kutta pair and bracketed root finding.

pub mod ode;
pub mod quad;
pub mod roots;
