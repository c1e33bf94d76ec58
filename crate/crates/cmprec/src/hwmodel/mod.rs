//! Hardware model of the solver: bit-accurate fixed-point arithmetic and a
//! cycle-level schedule of the processing-element arrays.
//!
//! [`fixed`] holds the word-level Q-format machinery and the datapath
//! profile; [`pe_array`] replays the rotation schedule of the two
//! matrix-vector products, evaluates full solver iterations in fixed point,
//! and reports per-iteration latency and symbol rate. Everything is
//! deterministic and integer-only inside, so results are identical across
//! platforms and runs.

pub mod fixed;
pub mod pe_array;

pub use fixed::{
    fx_decode, fx_encode, fx_requantize, FixedPointProfile, FxComplex, Overflow, QFormatSpec,
    Rounding,
};
pub use pe_array::{
    cannon_matvec_schedule, cycle_report, fx_c3po, fx_c3po_iteration, latency,
    matvec_in_schedule_order, CycleReport, FixedMacArith, FloatArith, HwError, PeArrayConfig,
    ScheduleArith, ScheduleCycles,
};
