//! Gate synthesis for block propagators and Ising Hamiltonians.

pub mod cartan;
pub mod euler;
pub mod ms;
pub mod program;
pub mod propagator;
pub mod text;
pub mod trotter;

pub use cartan::cartan_decompose;
pub use euler::{euler_zyz, EulerAngles};
pub use ms::cnot_to_ms;
pub use program::{Gate, GateKind, GateProgram};
pub use propagator::{block_propagator, TwoQubitUnitary};
pub use text::{emit_text, parse_text};
pub use trotter::trotter_compile;
