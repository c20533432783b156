pub mod analytic;
pub mod geometry;
pub mod numeric;
pub mod series;
pub mod quadrature;
pub mod kernel;
pub mod decomp;
pub mod lookup;
pub mod integrator;
pub mod experiments;
