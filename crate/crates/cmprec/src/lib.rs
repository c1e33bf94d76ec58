//! Finite-phase constant-modulus precoding for the massive MU-MIMO downlink.
//!
//! This crate simulates a base station with `B` antennas serving `U`
//! single-antenna users over a narrowband i.i.d. Rayleigh channel. Every
//! transmit antenna is driven at constant envelope, so each precoded entry is
//! restricted to a `P`-point phase alphabet (`P = 4` or `P = 8`). The crate
//! provides:
//!
//! * [`precoder`]: the C3PO nonlinear precoder (forward-backward splitting
//!   over the convex hull of the phase alphabet), its 4-phase variant C2PO,
//!   and the linear baselines MRT and ZF with optional phase quantization.
//! * [`projection`]: the exact Euclidean projection onto the octagon (P = 8)
//!   or square (P = 4) polytope that makes each FBS iteration cheap.
//! * [`sim`]: a Monte-Carlo bit-error-rate harness with deterministic
//!   per-trial seeding, ready for figure-style sweeps.
//! * [`hwmodel`]: a bit-accurate fixed-point model of the precoder datapath
//!   and a cycle-level schedule of the processing-element arrays it maps to.
//! * [`linalg`] and [`constellation`]: the small dense complex-matrix kernel
//!   and the BPSK/QPSK/16-QAM mappings everything else is built on.
//!
//! Notation follows the usual downlink model `y = Hx + n` with `H` of size
//! `U x B`, unit-variance circularly symmetric channel entries, per-symbol
//! transmit power `||x||^2 = B`, and SNR defined as `rho = B / N0`.

pub mod constellation;
pub mod hwmodel;
pub mod linalg;
pub mod precoder;
pub mod projection;
pub mod sim;

/// Complex scalar used throughout the crate.
pub type C64 = num_complex::Complex<f64>;
