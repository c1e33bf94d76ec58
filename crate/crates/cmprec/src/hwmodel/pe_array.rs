//! Cycle-level model of the processing-element arrays that evaluate one
//! solver iteration, and the bit-accurate fixed-point datapath they run.
//!
//! The machine is organized as `B/U` linear arrays of `U+1` processing
//! elements. The first matrix-vector product `w = Hbar (tau x)` assigns PE
//! `p` of array `a` the dot product of row `p` with the `a`-th length-`U`
//! slice of the vector; operands rotate cyclically so PE `p` touches slice
//! entry `(p + k) mod U` on step `k`, every entry exactly once in `U` steps.
//! The per-array partial sums are then folded by a binary adder tree in
//! `log2(B/U)` stages. The second product `z = x - HbarUpsilon w` rotates
//! the length-`U+1` vector `w` through a ring, so output `r` starts at ring
//! slot `r mod (U+1)` and subtracts one product per step from an
//! accumulator seeded with `x_r`. With a fixed pipeline allowance for the
//! projection unit the iteration latency comes to
//!
//! ```text
//!   cycles = 2 U + log2(B/U) + 9
//! ```
//!
//! Arithmetic is pluggable: the same schedule drives plain floating point
//! or the fixed-point formats of [`FixedPointProfile`], and because every
//! accumulation happens in schedule order, replaying the schedule is
//! bit-identical to a direct product evaluated in that same order.

use std::io::Write;

use crate::constellation::CmAlphabet;
use crate::hwmodel::fixed::{
    fx_cadd, fx_cmul, fx_csub, fx_encode, fx_mul_const, fx_neg, fx_requantize,
    fx_requantize_wide, fx_sub, FixedPointProfile, FxComplex, QFormatSpec,
};
use crate::precoder::{
    self, AugmentedChannel, FbsParams, PrecodeError, PrecodeOutput, ProblemInstance,
};
use crate::C64;

/// Errors from the hardware model.
#[derive(Debug, thiserror::Error)]
pub enum HwError {
    /// The antenna count must be a positive multiple of the user count.
    #[error("B = {b} must be a positive multiple of U = {u}")]
    BadPartition {
        /// Antenna count.
        b: usize,
        /// User count.
        u: usize,
    },
    /// The adder tree needs a power-of-two array count.
    #[error("B/U = {arrays} must be a power of two for the adder tree")]
    NonPowerOfTwoArrays {
        /// Array count B/U.
        arrays: usize,
    },
    /// Operand dimensions disagree with the array configuration.
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    /// A scalar parameter failed validation.
    #[error("invalid parameter: {0}")]
    BadParams(String),
    /// Failure in the underlying precoding setup.
    #[error(transparent)]
    Precode(#[from] PrecodeError),
    /// Trace output failed.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Geometry of the PE arrays for one (B, U) operating point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PeArrayConfig {
    /// Transmit antennas B.
    pub b: usize,
    /// Users U.
    pub u: usize,
    /// Number of linear arrays, B/U.
    pub arrays: usize,
    /// Processing elements per array, U+1.
    pub pes_per_array: usize,
}

impl PeArrayConfig {
    /// Validates that B is a positive multiple of U and derives the array
    /// geometry.
    pub fn new(b: usize, u: usize) -> Result<Self, HwError> {
        if u == 0 || b == 0 || b % u != 0 {
            return Err(HwError::BadPartition { b, u });
        }
        Ok(Self {
            b,
            u,
            arrays: b / u,
            pes_per_array: u + 1,
        })
    }

    fn tree_stages(&self) -> Result<u32, HwError> {
        if !self.arrays.is_power_of_two() {
            return Err(HwError::NonPowerOfTwoArrays {
                arrays: self.arrays,
            });
        }
        Ok(self.arrays.trailing_zeros())
    }
}

// The schedule accounts for 2U + log2(B/U) + 1 arithmetic cycles (U rotate
// steps, the tree, U+1 ring steps); the projection unit's pipeline
// registers add the rest of the fixed overhead.
const PIPELINE_OVERHEAD_CYCLES: u64 = 8;

/// Latency of one solver iteration in clock cycles,
/// `2U + log2(B/U) + 9`. Requires a power-of-two array count.
pub fn latency(cfg: &PeArrayConfig) -> Result<u64, HwError> {
    let stages = cfg.tree_stages()? as u64;
    Ok(cfg.u as u64 + stages + (cfg.u as u64 + 1) + PIPELINE_OVERHEAD_CYCLES)
}

/// Iteration latency plus the symbol rate it implies at a given clock.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleReport {
    /// Clock cycles per solver iteration.
    pub cycles_per_iteration: u64,
    /// Precoded symbols per second: each finished precode carries U symbols
    /// and costs `t_max` iterations.
    pub symbols_per_second: f64,
}

/// Builds a [`CycleReport`] for a clock frequency and iteration count.
pub fn cycle_report(
    cfg: &PeArrayConfig,
    clock_hz: f64,
    t_max: usize,
) -> Result<CycleReport, HwError> {
    if !(clock_hz.is_finite() && clock_hz > 0.0) {
        return Err(HwError::BadParams(format!("clock {clock_hz} Hz")));
    }
    if t_max == 0 {
        return Err(HwError::BadParams("t_max must be at least 1".into()));
    }
    let cycles = latency(cfg)?;
    Ok(CycleReport {
        cycles_per_iteration: cycles,
        symbols_per_second: clock_hz * cfg.u as f64 / (t_max as f64 * cycles as f64),
    })
}

/// Arithmetic plugged into the schedule: how to multiply a matrix entry
/// with a vector entry, accumulate, and fold partial sums in the adder
/// tree.
pub trait ScheduleArith {
    /// The value domain the schedule moves around.
    type Val: Copy;
    /// Additive identity for accumulators.
    fn zero(&self) -> Self::Val;
    /// Product of a matrix entry and a vector entry, already in
    /// accumulator form.
    fn mac_mul(&self, m: Self::Val, v: Self::Val) -> Self::Val;
    /// Accumulator update.
    fn mac_add(&self, acc: Self::Val, p: Self::Val) -> Self::Val;
    /// Moves a finished per-array partial sum into the adder tree domain.
    fn tree_lift(&self, partial: Self::Val) -> Self::Val;
    /// One adder-tree combine.
    fn tree_add(&self, a: Self::Val, b: Self::Val) -> Self::Val;
}

/// Plain double-precision complex arithmetic.
#[derive(Debug, Clone, Copy, Default)]
pub struct FloatArith;

impl ScheduleArith for FloatArith {
    type Val = C64;
    fn zero(&self) -> C64 {
        C64::new(0.0, 0.0)
    }
    fn mac_mul(&self, m: C64, v: C64) -> C64 {
        m * v
    }
    fn mac_add(&self, acc: C64, p: C64) -> C64 {
        acc + p
    }
    fn tree_lift(&self, partial: C64) -> C64 {
        partial
    }
    fn tree_add(&self, a: C64, b: C64) -> C64 {
        a + b
    }
}

/// Fixed-point schedule arithmetic: matrix and vector entries arrive at
/// their own fraction positions, products land in the accumulator format,
/// and the tree runs in a wider format at the same fraction position.
#[derive(Debug, Clone, Copy)]
pub struct FixedMacArith {
    /// Fraction bits of the matrix entries.
    pub m_frac: u32,
    /// Fraction bits of the vector entries.
    pub v_frac: u32,
    /// Accumulator format of the rotate-multiply-accumulate phase.
    pub acc_fmt: QFormatSpec,
    /// Adder tree format.
    pub tree_fmt: QFormatSpec,
}

impl ScheduleArith for FixedMacArith {
    type Val = FxComplex;
    fn zero(&self) -> FxComplex {
        FxComplex::ZERO
    }
    fn mac_mul(&self, m: FxComplex, v: FxComplex) -> FxComplex {
        fx_cmul(m, self.m_frac, v, self.v_frac, self.acc_fmt)
    }
    fn mac_add(&self, acc: FxComplex, p: FxComplex) -> FxComplex {
        fx_cadd(self.acc_fmt, acc, p)
    }
    fn tree_lift(&self, partial: FxComplex) -> FxComplex {
        partial.requantize(self.acc_fmt.frac_bits, self.tree_fmt)
    }
    fn tree_add(&self, a: FxComplex, b: FxComplex) -> FxComplex {
        fx_cadd(self.tree_fmt, a, b)
    }
}

/// Cycle counts of one scheduled matrix-vector product.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScheduleCycles {
    /// Rotation steps of the multiply-accumulate phase (equals U).
    pub rotate_steps: u64,
    /// Adder-tree stages (equals log2(B/U)).
    pub tree_stages: u64,
}

impl ScheduleCycles {
    /// Total arithmetic cycles of this product.
    pub fn total(&self) -> u64 {
        self.rotate_steps + self.tree_stages
    }
}

fn check_product_dims<T>(
    cfg: &PeArrayConfig,
    m: &[T],
    rows: usize,
    cols: usize,
    v: &[T],
) -> Result<(), HwError> {
    if rows != cfg.pes_per_array || cols != cfg.b || m.len() != rows * cols || v.len() != cols {
        return Err(HwError::DimMismatch(format!(
            "expected ({} x {}) matrix and length-{} vector, got ({rows} x {cols}) with {} \
             entries and length {}",
            cfg.pes_per_array,
            cfg.b,
            cfg.b,
            m.len(),
            v.len()
        )));
    }
    Ok(())
}

/// Replays the rotation schedule of the first product: `(U+1) x B` matrix
/// times length-`B` vector, partitioned into `B/U` column blocks.
///
/// The optional trace receives one tab-separated line per PE per cycle:
/// `cycle, array, pe, op, operand-index`. For `mac` lines the operand index
/// is the global column consumed; for `tree` lines it is the partial-sum
/// slot folded into the slot named by the array column.
pub fn cannon_matvec_schedule<A: ScheduleArith>(
    cfg: &PeArrayConfig,
    arith: &A,
    m: &[A::Val],
    rows: usize,
    cols: usize,
    v: &[A::Val],
    mut trace: Option<&mut dyn Write>,
) -> Result<(Vec<A::Val>, ScheduleCycles), HwError> {
    check_product_dims(cfg, m, rows, cols, v)?;
    let stages = cfg.tree_stages()?;
    let u = cfg.u;

    let mut partials = vec![vec![arith.zero(); rows]; cfg.arrays];
    for k in 0..u {
        for (a, block) in partials.iter_mut().enumerate() {
            for (p, acc) in block.iter_mut().enumerate() {
                let j = a * u + (p + k) % u;
                *acc = arith.mac_add(*acc, arith.mac_mul(m[p * cols + j], v[j]));
                if let Some(w) = trace.as_mut() {
                    writeln!(w, "{k}\t{a}\t{p}\tmac\t{j}")?;
                }
            }
        }
    }

    let mut cur: Vec<Vec<A::Val>> = partials
        .iter()
        .map(|block| block.iter().map(|&x| arith.tree_lift(x)).collect())
        .collect();
    for s in 0..stages {
        let cycle = u as u64 + s as u64;
        let half = cur.len() / 2;
        let mut next = Vec::with_capacity(half);
        for i in 0..half {
            let mut row = Vec::with_capacity(rows);
            for p in 0..rows {
                row.push(arith.tree_add(cur[2 * i][p], cur[2 * i + 1][p]));
                if let Some(w) = trace.as_mut() {
                    writeln!(w, "{cycle}\t{i}\t{p}\ttree\t{}", 2 * i + 1)?;
                }
            }
            next.push(row);
        }
        cur = next;
    }

    Ok((
        cur.swap_remove(0),
        ScheduleCycles {
            rotate_steps: u as u64,
            tree_stages: stages as u64,
        },
    ))
}

/// The same product as [`cannon_matvec_schedule`], evaluated by plain
/// loops with the accumulation order pinned to the schedule order: each
/// block is summed along its rotation sequence, then blocks fold pairwise.
/// This is the reference the schedule replay must match bit for bit.
pub fn matvec_in_schedule_order<A: ScheduleArith>(
    cfg: &PeArrayConfig,
    arith: &A,
    m: &[A::Val],
    rows: usize,
    cols: usize,
    v: &[A::Val],
) -> Result<Vec<A::Val>, HwError> {
    check_product_dims(cfg, m, rows, cols, v)?;
    cfg.tree_stages()?;
    let u = cfg.u;

    let mut out = Vec::with_capacity(rows);
    for p in 0..rows {
        let mut blocks: Vec<A::Val> = (0..cfg.arrays)
            .map(|a| {
                let mut acc = arith.zero();
                for k in 0..u {
                    let j = a * u + (p + k) % u;
                    acc = arith.mac_add(acc, arith.mac_mul(m[p * cols + j], v[j]));
                }
                arith.tree_lift(acc)
            })
            .collect();
        while blocks.len() > 1 {
            blocks = blocks
                .chunks(2)
                .map(|pair| arith.tree_add(pair[0], pair[1]))
                .collect();
        }
        out.push(blocks[0]);
    }
    Ok(out)
}

// Projection constants as 5-bit signed mantissas with per-constant binary
// exponents, the closest such values to sqrt(2)-1, sqrt(2)/4 and
// (2-sqrt(2))/4. They drive both the region classifier and the
// perpendicular-foot arithmetic.
const C_EDGE_SLOPE: (i64, u32) = (13, 5); // 13/32 for sqrt(2)-1
const C_FOOT_CROSS: (i64, u32) = (11, 5); // 11/32 for sqrt(2)/4
const C_FOOT_SELF: (i64, u32) = (9, 6); // 9/64  for (2-sqrt(2))/4

// First-quadrant region classifier on raw words. The line comparisons are
// exact integer arithmetic: with slope 13/32 the steep lines have slope
// 2 + 13/32 = 77/32, so every test clears denominators by 32.
fn classify_fx(a: i64, b: i64, one: i64) -> u8 {
    if 32 * b + 13 * a <= 32 * one && 32 * a + 13 * b <= 32 * one {
        0 // inside both shallow edges: already feasible
    } else if 32 * b >= 77 * a + 32 * one {
        1 // beyond the vertical-axis vertex
    } else if 32 * b <= 77 * a - 32 * one && 32 * a <= 77 * b - 32 * one {
        2 // beyond the diagonal vertex
    } else if 32 * a >= 77 * b + 32 * one {
        3 // beyond the horizontal-axis vertex
    } else if 32 * b > 77 * a - 32 * one {
        4 // perpendicular foot on the upper edge
    } else {
        5 // perpendicular foot on the lower edge
    }
}

fn foot_fx(a: i64, b: i64, one: i64, fmt: QFormatSpec) -> (i64, i64) {
    let bm1 = fx_sub(fmt, b, one);
    let t_self = fx_mul_const(a, C_FOOT_SELF.0, C_FOOT_SELF.1, fmt);
    let t_cross = fx_mul_const(bm1, C_FOOT_CROSS.0, C_FOOT_CROSS.1, fmt);
    let re = fx_sub(fmt, fx_sub(fmt, a, t_self), t_cross);
    let im = fx_sub(fmt, one, fx_mul_const(re, C_EDGE_SLOPE.0, C_EDGE_SLOPE.1, fmt));
    (re, im)
}

// Fixed-point projection onto the phase polytope, operating at mac_z_fmt.
fn project_fx(profile: &FixedPointProfile, phases: u32, z: FxComplex) -> FxComplex {
    let fmt = profile.mac_z_fmt;
    let one = fx_requantize(
        fx_encode(profile.x_fmt, 1.0),
        profile.x_fmt.frac_bits,
        fmt,
    );
    let vert = fx_requantize(
        fx_encode(profile.x_fmt, std::f64::consts::FRAC_1_SQRT_2),
        profile.x_fmt.frac_bits,
        fmt,
    );
    let neg_re = z.re < 0;
    let neg_im = z.im < 0;
    let a = if neg_re { fx_neg(fmt, z.re) } else { z.re };
    let b = if neg_im { fx_neg(fmt, z.im) } else { z.im };

    let (pa, pb) = if phases == 4 {
        (a.min(vert), b.min(vert))
    } else {
        match classify_fx(a, b, one) {
            0 => (a, b),
            1 => (0, one),
            2 => (vert, vert),
            3 => (one, 0),
            4 => foot_fx(a, b, one, fmt),
            _ => {
                let (im, re) = foot_fx(b, a, one, fmt);
                (re, im)
            }
        }
    };

    FxComplex {
        re: if neg_re { fx_neg(fmt, pa) } else { pa },
        im: if neg_im { fx_neg(fmt, pb) } else { pb },
    }
}

/// One full solver iteration evaluated in the fixed-point datapath.
///
/// The input vector is encoded at `x_fmt`, scaled by the step size into
/// `taux_fmt` words, pushed through the scheduled first product with
/// `mac_w_fmt` accumulation and the `adder_tree_fmt` fold, requantized to
/// `mac_z_fmt` for the ring product, and finally scaled by
/// `1 / (1 - tau delta)` and projected with the quantized projection
/// constants. The result is decoded back to floating point at `x_fmt`
/// precision.
pub fn fx_c3po_iteration(
    cfg: &PeArrayConfig,
    profile: &FixedPointProfile,
    aug: &AugmentedChannel,
    params: &FbsParams,
    phases: u32,
    x: &[C64],
) -> Result<Vec<C64>, HwError> {
    if phases != 4 && phases != 8 {
        return Err(HwError::BadParams(format!("phases must be 4 or 8, got {phases}")));
    }
    FbsParams::new(params.tau, params.delta, params.t_max)?;
    let (rows, cols) = (aug.hbar().rows(), aug.hbar().cols());
    if rows != cfg.pes_per_array || cols != cfg.b || x.len() != cfg.b {
        return Err(HwError::DimMismatch(format!(
            "stack is {rows} x {cols} with input length {} against B={} U={}",
            x.len(),
            cfg.b,
            cfg.u
        )));
    }

    let x_f = profile.x_fmt.frac_bits;
    let h_f = profile.h_fmt.frac_bits;
    let taux_f = profile.taux_fmt.frac_bits;
    let z_f = profile.mac_z_fmt.frac_bits;

    let xq: Vec<FxComplex> = x
        .iter()
        .map(|&z| FxComplex::encode(profile.x_fmt, z))
        .collect();
    let hbar_fx: Vec<FxComplex> = (0..rows * cols)
        .map(|i| FxComplex::encode(profile.h_fmt, aug.hbar()[(i / cols, i % cols)]))
        .collect();
    let tau_raw = fx_encode(profile.taux_fmt, params.tau);
    let kappa_raw = fx_encode(profile.x_fmt, 1.0 / (1.0 - params.tau * params.delta));

    // tau * x at taux_fmt.
    let tx: Vec<FxComplex> = xq
        .iter()
        .map(|q| FxComplex {
            re: fx_requantize_wide(q.re as i128 * tau_raw as i128, x_f + taux_f, profile.taux_fmt),
            im: fx_requantize_wide(q.im as i128 * tau_raw as i128, x_f + taux_f, profile.taux_fmt),
        })
        .collect();

    // First product through the scheduled arrays.
    let arith = FixedMacArith {
        m_frac: h_f,
        v_frac: taux_f,
        acc_fmt: profile.mac_w_fmt,
        tree_fmt: profile.adder_tree_fmt,
    };
    let (w_tree, _) = cannon_matvec_schedule(cfg, &arith, &hbar_fx, rows, cols, &tx, None)?;
    let w: Vec<FxComplex> = w_tree
        .iter()
        .map(|&wi| wi.requantize(profile.adder_tree_fmt.frac_bits, profile.mac_z_fmt))
        .collect();

    // Second product: ring rotation over the U+1 entries of w, accumulator
    // seeded with x. The adjoint stack entry is the conjugate of the stored
    // stack entry, negated in the last ring slot.
    let mut out = Vec::with_capacity(cfg.b);
    for r in 0..cfg.b {
        let mut acc = xq[r].requantize(x_f, profile.mac_z_fmt);
        for k in 0..rows {
            let j = (r + k) % rows;
            let stored = hbar_fx[j * cols + r].conj(profile.h_fmt);
            let elem = if j + 1 == rows {
                stored.neg(profile.h_fmt)
            } else {
                stored
            };
            let prod = fx_cmul(elem, h_f, w[j], z_f, profile.mac_z_fmt);
            acc = fx_csub(profile.mac_z_fmt, acc, prod);
        }
        // Proximal scaling and projection, still at mac_z_fmt.
        let scaled = FxComplex {
            re: fx_requantize_wide(acc.re as i128 * kappa_raw as i128, z_f + x_f, profile.mac_z_fmt),
            im: fx_requantize_wide(acc.im as i128 * kappa_raw as i128, z_f + x_f, profile.mac_z_fmt),
        };
        let proj = project_fx(profile, phases, scaled);
        out.push(proj.requantize(z_f, profile.x_fmt).decode(profile.x_fmt));
    }
    Ok(out)
}

/// Runs the full fixed-point solver: matched-filter initialization,
/// `t_max` datapath iterations, then phase quantization of the decoded
/// result. The float and fixed solvers share initialization and quantizer,
/// so any output difference comes from the datapath itself.
pub fn fx_c3po(
    inst: &ProblemInstance,
    params: &FbsParams,
    alphabet: &CmAlphabet,
    profile: &FixedPointProfile,
) -> Result<PrecodeOutput, HwError> {
    let cfg = PeArrayConfig::new(inst.antennas(), inst.users())?;
    let aug = precoder::build_augmented(inst)?;
    let mut x = inst.channel().conj_transpose().matvec(inst.symbols());
    for _ in 0..params.t_max {
        x = fx_c3po_iteration(&cfg, profile, &aug, params, alphabet.phases(), &x)?;
    }
    let xs = alphabet.quantize(&x);
    let a = precoder::alpha_hat(inst, &xs);
    Ok(PrecodeOutput {
        x: xs,
        alpha_hat: a,
        trace: None,
    })
}
