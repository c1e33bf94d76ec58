//! Downlink precoders: matched filter, zero forcing, their phase-quantized
//! variants, and the finite-phase forward-backward splitting solver.
//!
//! All precoders consume a [`ProblemInstance`] holding the channel `H`
//! (`U x B`), the symbol vector `s`, and the noise variance `N0`, and emit a
//! transmit vector with `||x||^2 = B`. The linear precoders reach that energy
//! by scaling; the constant-modulus ones reach it per entry, since every
//! entry sits on the unit circle.
//!
//! The splitting solver minimizes
//!
//! ```text
//!   f(x) = (1/2) ||A x||^2 - (delta/2) ||x||^2,   A = (I - s s^H / ||s||^2) H
//! ```
//!
//! over the per-entry phase polytope. `A^H A` is never formed: with
//! `v = H^H s / ||s||`, the identity `A^H A = H^H H - v v^H` lets the
//! gradient be evaluated through the `(U+1) x B` stack `Hbar = [H; v^H]` and
//! its sign-flipped adjoint, which is also the shape the hardware model works
//! with. Each iteration is a gradient step on the smooth part followed by the
//! proximal map of the polytope indicator plus the concave quadratic, and the
//! final iterate is quantized to the phase alphabet.

use crate::constellation::CmAlphabet;
use crate::linalg::{self, Matrix};
use crate::projection::PolytopeP;
use crate::C64;

/// Errors produced while building or running a precoder.
#[derive(Debug, thiserror::Error)]
pub enum PrecodeError {
    /// The symbol vector has zero norm, so the rank-one deflation that the
    /// augmented channel encodes is undefined.
    #[error("symbol vector must have a nonzero entry")]
    ZeroSymbols,
    /// A parameter failed validation; the message names the offender.
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    /// The zero-forcing Gram system was not positive definite (rank-deficient
    /// channel).
    #[error(transparent)]
    Linalg(#[from] linalg::LinalgError),
}

/// One precoding problem: channel, symbols to deliver, and noise level.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    h: Matrix,
    s: Vec<C64>,
    n0: f64,
}

impl ProblemInstance {
    /// Bundles a `U x B` channel with a length-`U` symbol vector and the
    /// per-receiver noise variance.
    ///
    /// Panics if the dimensions disagree, if `U > B`, or if `n0` is negative
    /// or non-finite.
    pub fn new(h: Matrix, s: Vec<C64>, n0: f64) -> Self {
        assert_eq!(h.rows(), s.len(), "symbol count must match channel rows");
        assert!(
            h.rows() >= 1 && h.rows() <= h.cols(),
            "need 1 <= U <= B, got U={} B={}",
            h.rows(),
            h.cols()
        );
        assert!(n0.is_finite() && n0 >= 0.0, "n0 must be finite and >= 0");
        Self { h, s, n0 }
    }

    /// Number of users `U`.
    pub fn users(&self) -> usize {
        self.h.rows()
    }

    /// Number of transmit antennas `B`.
    pub fn antennas(&self) -> usize {
        self.h.cols()
    }

    /// The channel matrix.
    pub fn channel(&self) -> &Matrix {
        &self.h
    }

    /// The symbol vector.
    pub fn symbols(&self) -> &[C64] {
        &self.s
    }

    /// The receiver noise variance `N0`.
    pub fn n0(&self) -> f64 {
        self.n0
    }
}

/// Result of a precoder run: the transmit vector and the receive-side scale
/// a genie receiver would apply.
#[derive(Debug, Clone)]
pub struct PrecodeOutput {
    /// Transmit vector, `||x||^2 = B`.
    pub x: Vec<C64>,
    /// Least-squares receive scale for this `x`; see [`alpha_hat`].
    pub alpha_hat: C64,
    /// Objective value after each proximal step, present only for traced
    /// solver runs.
    pub trace: Option<Vec<f64>>,
}

fn scale_to_energy(mut x: Vec<C64>, target_sq: f64) -> Vec<C64> {
    let e = linalg::norm_sq(&x);
    if e > 0.0 {
        let c = (target_sq / e).sqrt();
        for xi in x.iter_mut() {
            *xi *= c;
        }
    }
    x
}

/// Least-squares receive scale: the minimizer of `||alpha s - H x||^2` over
/// complex `alpha`, namely `s^H H x / ||s||^2`.
pub fn alpha_hat(inst: &ProblemInstance, x: &[C64]) -> C64 {
    let hx = inst.h.matvec(x);
    linalg::inner(&inst.s, &hx) / linalg::norm_sq(&inst.s)
}

/// The precoding objective `||s - beta H x||^2 + |beta|^2 U N0` for a given
/// receive scale `beta`.
pub fn opp_objective(inst: &ProblemInstance, x: &[C64], beta: C64) -> f64 {
    let hx = inst.h.matvec(x);
    let mut resid = 0.0;
    for (si, hxi) in inst.s.iter().zip(hx.iter()) {
        resid += (si - beta * hxi).norm_sqr();
    }
    resid + beta.norm_sqr() * inst.users() as f64 * inst.n0
}

/// Matched-filter (maximum ratio) precoder: `x` proportional to `H^H s`,
/// scaled to `||x||^2 = B`.
pub fn mrt(inst: &ProblemInstance) -> PrecodeOutput {
    let x = scale_to_energy(
        inst.h.conj_transpose().matvec(&inst.s),
        inst.antennas() as f64,
    );
    let a = alpha_hat(inst, &x);
    PrecodeOutput {
        x,
        alpha_hat: a,
        trace: None,
    }
}

/// Zero-forcing precoder: `x` proportional to `H^H (H H^H)^{-1} s`, scaled
/// to `||x|| ^2 = B`. Before scaling, the raw vector satisfies `H x = s`
/// exactly, so the scaled output keeps `H x` collinear with `s`.
pub fn zf(inst: &ProblemInstance) -> Result<PrecodeOutput, PrecodeError> {
    let hh = inst.h.mul(&inst.h.conj_transpose());
    let t = linalg::hermitian_solve(&hh, &inst.s)?;
    let x = scale_to_energy(
        inst.h.conj_transpose().matvec(&t),
        inst.antennas() as f64,
    );
    let a = alpha_hat(inst, &x);
    Ok(PrecodeOutput {
        x,
        alpha_hat: a,
        trace: None,
    })
}

/// Which linear precoder seeds a phase-quantized variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinearBase {
    /// Matched filter.
    Mrt,
    /// Zero forcing.
    Zf,
}

/// Phase-quantized linear precoding: run the linear precoder, then snap each
/// entry to the nearest point of the phase alphabet. Quantization only looks
/// at phases, so the linear stage's power normalization cannot affect it.
pub fn quantized_linear(
    inst: &ProblemInstance,
    base: LinearBase,
    alphabet: &CmAlphabet,
) -> Result<PrecodeOutput, PrecodeError> {
    let lin = match base {
        LinearBase::Mrt => mrt(inst),
        LinearBase::Zf => zf(inst)?,
    };
    let x = alphabet.quantize(&lin.x);
    let a = alpha_hat(inst, &x);
    Ok(PrecodeOutput {
        x,
        alpha_hat: a,
        trace: None,
    })
}

/// The deflated channel stack used by the splitting solver and the hardware
/// model.
///
/// `hbar` stacks `H` on top of `v^H` where `v = H^H s / ||s||`; the adjoint
/// side `hbar_upsilon` is `[H^H, -v]`, i.e. the conjugate transpose with the
/// last column negated. Their product reproduces the deflated Gram matrix:
/// `hbar_upsilon * hbar = H^H H - v v^H`.
#[derive(Debug, Clone)]
pub struct AugmentedChannel {
    hbar: Matrix,
    hbar_upsilon: Matrix,
}

impl AugmentedChannel {
    /// The `(U+1) x B` forward stack.
    pub fn hbar(&self) -> &Matrix {
        &self.hbar
    }

    /// The `B x (U+1)` sign-flipped adjoint.
    pub fn hbar_upsilon(&self) -> &Matrix {
        &self.hbar_upsilon
    }

    /// Applies the deflated Gram operator `x -> hbar_upsilon (hbar x)`
    /// without forming the `B x B` product.
    pub fn apply_gram(&self, x: &[C64]) -> Vec<C64> {
        self.hbar_upsilon.matvec(&self.hbar.matvec(x))
    }
}

/// Builds the deflated stack for an instance. Fails with
/// [`PrecodeError::ZeroSymbols`] when `||s|| = 0`.
pub fn build_augmented(inst: &ProblemInstance) -> Result<AugmentedChannel, PrecodeError> {
    let s_norm = linalg::norm_sq(&inst.s).sqrt();
    if s_norm <= 0.0 {
        return Err(PrecodeError::ZeroSymbols);
    }
    let (u, b) = (inst.users(), inst.antennas());
    let hh = inst.h.conj_transpose();
    let v: Vec<C64> = hh.matvec(&inst.s).iter().map(|&c| c / s_norm).collect();

    let hbar = Matrix::from_fn(u + 1, b, |r, c| {
        if r < u {
            inst.h[(r, c)]
        } else {
            v[c].conj()
        }
    });
    let hbar_upsilon = Matrix::from_fn(b, u + 1, |r, c| {
        if c < u {
            hh[(r, c)]
        } else {
            -v[r]
        }
    });
    Ok(AugmentedChannel { hbar, hbar_upsilon })
}

/// Step size, shrinkage weight, and iteration count for the splitting
/// solver.
#[derive(Debug, Clone, Copy)]
pub struct FbsParams {
    /// Gradient step size `tau`.
    pub tau: f64,
    /// Weight of the concave `-(delta/2)||x||^2` term. The proximal step
    /// divides by `1 - tau * delta`, so `tau * delta < 1` is required.
    pub delta: f64,
    /// Number of iterations. Zero is allowed and reduces the solver to
    /// quantizing its matched-filter initializer.
    pub t_max: usize,
}

impl FbsParams {
    /// Validates `tau > 0`, `delta >= 0`, `tau * delta < 1`, all finite.
    pub fn new(tau: f64, delta: f64, t_max: usize) -> Result<Self, PrecodeError> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(PrecodeError::InvalidParams(format!(
                "tau must be finite and positive, got {tau}"
            )));
        }
        if !(delta.is_finite() && delta >= 0.0) {
            return Err(PrecodeError::InvalidParams(format!(
                "delta must be finite and nonnegative, got {delta}"
            )));
        }
        if !(tau * delta < 1.0) {
            return Err(PrecodeError::InvalidParams(format!(
                "need tau * delta < 1, got {}",
                tau * delta
            )));
        }
        Ok(Self { tau, delta, t_max })
    }
}

// Power-iteration count for the default step-size rule. The spectral gap of
// the deflated Gram matrix is healthy for i.i.d. channels, so thirty
// iterations put the estimate well within a percent of the true value.
const STEP_RULE_POWER_ITERS: usize = 30;

/// Matrix-free largest-eigenvalue estimate of the deflated Gram operator,
/// run exactly like [`linalg::spectral_norm_sq_estimate`] on the dense
/// matrix: same fixed-seed start vector, same iteration, same Rayleigh
/// quotient readout.
fn lambda_max_estimate(aug: &AugmentedChannel, iters: usize) -> f64 {
    let b = aug.hbar.cols();
    let mut rng = linalg::Rng::new(linalg::POWER_ITER_SEED);
    let mut v = linalg::gaussian_complex_vector(&mut rng, b, 1.0);
    let n = linalg::norm_sq(&v).sqrt();
    if n == 0.0 {
        return 0.0;
    }
    for vi in v.iter_mut() {
        *vi /= n;
    }
    for _ in 0..iters {
        // One step of power iteration on G^H G with G the deflated Gram
        // operator, which is Hermitian, so two applications per step.
        let u = aug.apply_gram(&aug.apply_gram(&v));
        let un = linalg::norm_sq(&u).sqrt();
        if un == 0.0 {
            return 0.0;
        }
        v = u.iter().map(|&c| c / un).collect();
    }
    linalg::norm_sq(&aug.apply_gram(&v))
}

/// Default solver parameters for an instance, tuned per polytope:
/// `tau = 1.3 / lambda_max_hat` and `tau * delta = 0.4` for the 8-phase
/// octagon, `tau = 1.4 / lambda_max_hat` and `tau * delta = 0.35` for the
/// 4-phase square, with the largest eigenvalue of the deflated Gram
/// operator estimated by power iteration.
///
/// The constants were tuned on i.i.d. Rayleigh channels. A step beyond the
/// classical `1 / lambda_max` makes a handful of iterations count, but the
/// interleaved projections turn unstable somewhat past `1.5 / lambda_max`,
/// so the defaults keep a safety margin. The mild outward scaling keeps
/// iterates near the polytope boundary without freezing them onto vertices
/// early; the square polytope, whose vertex cones leave the least room,
/// wants a slightly longer step and a gentler push than the octagon.
pub fn default_fbs_params(
    aug: &AugmentedChannel,
    phases: u32,
    t_max: usize,
) -> Result<FbsParams, PrecodeError> {
    assert!(phases == 4 || phases == 8, "phase count must be 4 or 8");
    let lam_sq = lambda_max_estimate(aug, STEP_RULE_POWER_ITERS);
    if !(lam_sq.is_finite() && lam_sq > 0.0) {
        return Err(PrecodeError::InvalidParams(format!(
            "cannot derive a step size: eigenvalue estimate {lam_sq}"
        )));
    }
    let (step_scale, taudelta) = if phases == 4 { (1.4, 0.35) } else { (1.3, 0.4) };
    let tau = step_scale / lam_sq.sqrt();
    FbsParams::new(tau, taudelta / tau, t_max)
}

// Runs the splitting iteration and hands every post-proximal iterate to the
// observer, with the iteration index counting from one. The returned vector
// is the final iterate before phase quantization. Kept crate-visible so
// tests can watch feasibility of the whole trajectory.
pub(crate) fn fbs_iterates(
    aug: &AugmentedChannel,
    inst: &ProblemInstance,
    params: &FbsParams,
    polytope: &PolytopeP,
    mut observe: impl FnMut(usize, &[C64]),
) -> Vec<C64> {
    let mut x = inst.h.conj_transpose().matvec(&inst.s);
    for t in 1..=params.t_max {
        let g = aug.apply_gram(&x);
        let z: Vec<C64> = x
            .iter()
            .zip(g.iter())
            .map(|(&xi, &gi)| xi - params.tau * gi)
            .collect();
        x = polytope.prox(&z, params.tau, params.delta);
        observe(t, &x);
    }
    x
}

fn run_c3po(
    inst: &ProblemInstance,
    params: &FbsParams,
    alphabet: &CmAlphabet,
    traced: bool,
) -> Result<PrecodeOutput, PrecodeError> {
    FbsParams::new(params.tau, params.delta, params.t_max)?;
    let aug = build_augmented(inst)?;
    let polytope = PolytopeP::new(alphabet.phases());
    let mut trace = traced.then(Vec::new);
    let xf = fbs_iterates(&aug, inst, params, &polytope, |_, xt| {
        if let Some(tr) = trace.as_mut() {
            let gx = aug.apply_gram(xt);
            let smooth = 0.5 * linalg::inner(xt, &gx).re;
            tr.push(smooth - 0.5 * params.delta * linalg::norm_sq(xt));
        }
    });
    let x = alphabet.quantize(&xf);
    let a = alpha_hat(inst, &x);
    Ok(PrecodeOutput {
        x,
        alpha_hat: a,
        trace,
    })
}

/// Finite-phase constant-modulus precoding by forward-backward splitting.
///
/// Initializes at the matched filter `H^H s`, runs `t_max` iterations of a
/// gradient step on `(1/2)||A x||^2` followed by the proximal map of the
/// phase polytope with the `-(delta/2)||x||^2` shrinkage folded in, then
/// quantizes the final iterate to the alphabet. With `t_max = 0` this is
/// exactly the phase-quantized matched filter.
pub fn c3po(
    inst: &ProblemInstance,
    params: &FbsParams,
    alphabet: &CmAlphabet,
) -> Result<PrecodeOutput, PrecodeError> {
    run_c3po(inst, params, alphabet, false)
}

/// Same as [`c3po`] but records the relaxed objective
/// `(1/2)||A x||^2 - (delta/2)||x||^2` after every proximal step in
/// [`PrecodeOutput::trace`].
pub fn c3po_traced(
    inst: &ProblemInstance,
    params: &FbsParams,
    alphabet: &CmAlphabet,
) -> Result<PrecodeOutput, PrecodeError> {
    run_c3po(inst, params, alphabet, true)
}
