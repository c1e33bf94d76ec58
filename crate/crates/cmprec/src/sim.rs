//! Monte-Carlo downlink evaluation: channel draws, precoding, receive-side
//! rescaling and detection, BER accounting over SNR sweeps, and the 1% BER
//! threshold search.
//!
//! One trial draws an i.i.d. Rayleigh channel, maps fresh uniform bits to
//! symbols, precodes, forms `y = Hx + n` with noise variance `N0 = B / rho`
//! (the normalized transmit power is `rho = B / N0`, supplied in dB), lets
//! a genie receiver rescale by the objective-optimal `beta_hat`, detects,
//! and counts bit errors. Every transmitted vector carries energy
//! `||x||^2 = B`, so sweeps compare precoders at equal radiated power.
//!
//! Reproducibility contract: each trial runs on its own generator seeded by
//! a 64-bit mix of the sweep seed, the grid index, and the trial index, so
//! a sweep's output is bit-identical no matter how trials are scheduled
//! across threads.

use rayon::prelude::*;

use crate::constellation::{CmAlphabet, Constellation, ConstellationName};
use crate::hwmodel::{self, FixedPointProfile, HwError};
use crate::linalg::{self, Matrix, Rng};
use crate::precoder::{self, FbsParams, LinearBase, PrecodeError, ProblemInstance};
use crate::C64;

/// Errors from configuration or the simulation pipeline.
#[derive(Debug, thiserror::Error)]
pub enum SimError {
    /// The configuration failed validation; the message names the problem.
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    /// The receive scale is undefined because `Hx = 0` and `N0 = 0`.
    #[error("receiver scale undefined: H x = 0 and N0 = 0")]
    DegenerateReceiver,
    /// The BER curve never reaches the 1% target inside the grid.
    #[error("BER curve never reaches the 1% target inside the grid")]
    NoThresholdCrossing,
    /// Failure inside a precoder.
    #[error(transparent)]
    Precode(#[from] PrecodeError),
    /// Failure inside the fixed-point datapath model.
    #[error(transparent)]
    Hw(#[from] HwError),
    /// Output writing failed.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Which precoder a sweep evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrecoderKind {
    /// Matched filter (maximum ratio transmission).
    Mrt,
    /// Zero forcing.
    Zf,
    /// Phase-quantized matched filter.
    MrtQ,
    /// Phase-quantized zero forcing.
    ZfQ,
    /// Splitting solver on the 4-phase polytope.
    C2po,
    /// Splitting solver on the configured phase polytope.
    C3po,
}

impl PrecoderKind {
    /// True for precoders whose output lies on the phase alphabet.
    pub fn is_constant_modulus(&self) -> bool {
        !matches!(self, PrecoderKind::Mrt | PrecoderKind::Zf)
    }
}

impl std::fmt::Display for PrecoderKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PrecoderKind::Mrt => "mrt",
            PrecoderKind::Zf => "zf",
            PrecoderKind::MrtQ => "mrtq",
            PrecoderKind::ZfQ => "zfq",
            PrecoderKind::C2po => "c2po",
            PrecoderKind::C3po => "c3po",
        })
    }
}

impl std::str::FromStr for PrecoderKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mrt" => Ok(PrecoderKind::Mrt),
            "zf" => Ok(PrecoderKind::Zf),
            "mrtq" => Ok(PrecoderKind::MrtQ),
            "zfq" => Ok(PrecoderKind::ZfQ),
            "c2po" => Ok(PrecoderKind::C2po),
            "c3po" => Ok(PrecoderKind::C3po),
            other => Err(format!(
                "unknown precoder '{other}' (expected mrt, zf, mrtq, zfq, c2po or c3po)"
            )),
        }
    }
}

/// Solver settings carried by a sweep configuration. Step size and
/// shrinkage are optional: when absent, the per-channel defaults of
/// [`precoder::default_fbs_params`] apply.
#[derive(Debug, Clone, Copy)]
pub struct FbsConfig {
    /// Iteration count.
    pub t_max: usize,
    /// Fixed step size, or `None` for the spectral default.
    pub tau: Option<f64>,
    /// Fixed shrinkage weight, or `None` for the polytope's default
    /// `tau * delta` product over the resolved step.
    pub delta: Option<f64>,
}

impl FbsConfig {
    /// Defaults for a given iteration count.
    pub fn new(t_max: usize) -> Self {
        Self {
            t_max,
            tau: None,
            delta: None,
        }
    }
}

/// Everything a sweep needs: system size, signaling, precoder, SNR grid,
/// trial budget, and seed.
#[derive(Debug, Clone)]
pub struct SimConfig {
    /// Transmit antennas B.
    pub b: usize,
    /// Users U.
    pub u: usize,
    /// Data constellation.
    pub constellation: ConstellationName,
    /// Precoder under test.
    pub precoder: PrecoderKind,
    /// Phase count of the transmit alphabet for constant-modulus
    /// precoders. [`PrecoderKind::C2po`] always runs with 4 phases.
    pub phases: u32,
    /// Splitting solver settings.
    pub fbs: FbsConfig,
    /// Normalized transmit power grid in dB, strictly increasing.
    pub rho_grid_db: Vec<f64>,
    /// Monte-Carlo trials per grid point.
    pub trials: usize,
    /// Sweep seed.
    pub seed: u64,
    /// Route the splitting solver through the fixed-point datapath.
    pub fixed_point: bool,
    /// Datapath profile for fixed-point runs; ignored otherwise.
    pub fx_profile: FixedPointProfile,
}

impl SimConfig {
    /// A configuration with conventional defaults: 8 phases, float
    /// datapath, solver defaults resolved per channel.
    pub fn new(
        b: usize,
        u: usize,
        constellation: ConstellationName,
        precoder: PrecoderKind,
        t_max: usize,
        rho_grid_db: Vec<f64>,
        trials: usize,
        seed: u64,
    ) -> Self {
        Self {
            b,
            u,
            constellation,
            precoder,
            phases: 8,
            fbs: FbsConfig::new(t_max),
            rho_grid_db,
            trials,
            seed,
            fixed_point: false,
            fx_profile: FixedPointProfile::default(),
        }
    }

    /// Checks every invariant a sweep relies on.
    pub fn validate(&self) -> Result<(), SimError> {
        let err = |m: String| Err(SimError::InvalidConfig(m));
        if self.u == 0 {
            return err("U must be at least 1".into());
        }
        if self.u > self.b {
            return err(format!("U must not exceed B (got U={}, B={})", self.u, self.b));
        }
        if self.phases != 4 && self.phases != 8 {
            return err(format!("phases must be 4 or 8, got {}", self.phases));
        }
        if self.trials == 0 {
            return err("trials must be at least 1".into());
        }
        if self.trials > u32::MAX as usize {
            return err(format!("trials {} exceeds the seed-derivation range", self.trials));
        }
        if self.rho_grid_db.is_empty() {
            return err("rho grid must not be empty".into());
        }
        if self.rho_grid_db.iter().any(|r| !r.is_finite()) {
            return err("rho grid entries must be finite".into());
        }
        if self.rho_grid_db.windows(2).any(|w| w[0] >= w[1]) {
            return err("rho grid must be strictly increasing".into());
        }
        if let Some(t) = self.fbs.tau {
            if !(t.is_finite() && t > 0.0) {
                return err(format!("tau must be finite and positive, got {t}"));
            }
            if let Some(d) = self.fbs.delta {
                if !(d.is_finite() && d >= 0.0 && t * d < 1.0) {
                    return err(format!("need delta >= 0 and tau*delta < 1, got tau={t} delta={d}"));
                }
            }
        }
        if self.fixed_point {
            if !matches!(self.precoder, PrecoderKind::C3po | PrecoderKind::C2po) {
                return err("fixed_point applies only to the c3po and c2po precoders".into());
            }
            if self.b % self.u != 0 || !(self.b / self.u).is_power_of_two() {
                return err(format!(
                    "fixed_point datapath needs B a multiple of U with B/U a power of two, \
                     got B={} U={}",
                    self.b, self.u
                ));
            }
        }
        Ok(())
    }

    // The alphabet actually transmitted; 0 for unquantized precoders.
    fn effective_phases(&self) -> u32 {
        match self.precoder {
            PrecoderKind::Mrt | PrecoderKind::Zf => 0,
            PrecoderKind::C2po => 4,
            _ => self.phases,
        }
    }
}

/// One BER measurement with its Wilson confidence half-width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BerPoint {
    /// Normalized transmit power in dB.
    pub rho_db: f64,
    /// Accumulated bit errors.
    pub bit_errors: u64,
    /// Bits simulated.
    pub bits: u64,
    /// `bit_errors / bits`.
    pub ber: f64,
    /// Wilson score interval half-width at 95% confidence.
    pub ci_halfwidth: f64,
}

impl BerPoint {
    /// Aggregates raw counts into a curve point.
    pub fn from_counts(rho_db: f64, bit_errors: u64, bits: u64) -> Self {
        assert!(bits > 0, "cannot form a BER point from zero bits");
        let n = bits as f64;
        let p = bit_errors as f64 / n;
        let z = 1.96;
        let zz = z * z;
        let halfwidth = z * (p * (1.0 - p) / n + zz / (4.0 * n * n)).sqrt() / (1.0 + zz / n);
        Self {
            rho_db,
            bit_errors,
            bits,
            ber: p,
            ci_halfwidth: halfwidth,
        }
    }
}

/// A BER sweep result, one point per grid entry, in grid order.
#[derive(Debug, Clone, PartialEq)]
pub struct BerCurve {
    /// The measured points.
    pub points: Vec<BerPoint>,
}

/// Error and bit counts of a single trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialOutcome {
    /// Bit errors in this trial.
    pub bit_errors: u64,
    /// Bits carried by this trial, `U * bits_per_symbol`.
    pub bits: u64,
}

// splitmix64 finalizer: a full-avalanche 64-bit mix.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The per-trial generator seed: a mix of the sweep seed, the grid index,
/// and the trial index. Trials are independent of scheduling because each
/// draws from its own stream.
pub fn derive_trial_seed(seed: u64, rho_index: usize, trial: usize) -> u64 {
    let key = ((rho_index as u64) << 32) | (trial as u64 & 0xFFFF_FFFF);
    mix64(seed ^ mix64(key.wrapping_add(0x9E37_79B9_7F4A_7C15)))
}

/// Draws a `U x B` channel with i.i.d. circularly-symmetric complex
/// Gaussian entries of unit variance.
pub fn draw_channel(rng: &mut Rng, u: usize, b: usize) -> Matrix {
    let entries = linalg::gaussian_complex_vector(rng, u * b, 1.0);
    Matrix::new(u, b, entries)
}

fn beta_from_hx(inst: &ProblemInstance, hx: &[C64]) -> Result<C64, SimError> {
    let denom = linalg::norm_sq(hx) + inst.users() as f64 * inst.n0();
    if denom <= 0.0 {
        return Err(SimError::DegenerateReceiver);
    }
    Ok(linalg::inner(hx, inst.symbols()) / denom)
}

/// The genie receive scale: the unique minimizer of
/// `||s - beta H x||^2 + |beta|^2 U N0` over complex `beta`, namely
/// `(Hx)^H s / (||Hx||^2 + U N0)`. Fails when `Hx = 0` and `N0 = 0`.
pub fn beta_hat(inst: &ProblemInstance, x: &[C64]) -> Result<C64, SimError> {
    beta_from_hx(inst, &inst.channel().matvec(x))
}

fn precode(cfg: &SimConfig, inst: &ProblemInstance) -> Result<Vec<C64>, SimError> {
    match cfg.precoder {
        PrecoderKind::Mrt => Ok(precoder::mrt(inst).x),
        PrecoderKind::Zf => Ok(precoder::zf(inst)?.x),
        PrecoderKind::MrtQ => {
            let alphabet = CmAlphabet::new(cfg.phases);
            Ok(precoder::quantized_linear(inst, LinearBase::Mrt, &alphabet)?.x)
        }
        PrecoderKind::ZfQ => {
            let alphabet = CmAlphabet::new(cfg.phases);
            Ok(precoder::quantized_linear(inst, LinearBase::Zf, &alphabet)?.x)
        }
        PrecoderKind::C2po | PrecoderKind::C3po => {
            let phases = if cfg.precoder == PrecoderKind::C2po {
                4
            } else {
                cfg.phases
            };
            let alphabet = CmAlphabet::new(phases);
            let aug = precoder::build_augmented(inst)?;
            let params = resolve_fbs(&cfg.fbs, &aug, phases)?;
            if cfg.fixed_point {
                Ok(hwmodel::fx_c3po(inst, &params, &alphabet, &cfg.fx_profile)?.x)
            } else {
                Ok(precoder::c3po(inst, &params, &alphabet)?.x)
            }
        }
    }
}

fn resolve_fbs(
    fbs: &FbsConfig,
    aug: &precoder::AugmentedChannel,
    phases: u32,
) -> Result<FbsParams, PrecodeError> {
    let taudelta = if phases == 4 { 0.35 } else { 0.4 };
    match (fbs.tau, fbs.delta) {
        (None, None) => precoder::default_fbs_params(aug, phases, fbs.t_max),
        (Some(t), None) => FbsParams::new(t, taudelta / t, fbs.t_max),
        (Some(t), Some(d)) => FbsParams::new(t, d, fbs.t_max),
        (None, Some(d)) => {
            let base = precoder::default_fbs_params(aug, phases, fbs.t_max)?;
            FbsParams::new(base.tau, d, fbs.t_max)
        }
    }
}

/// Runs one Monte-Carlo trial at a given normalized transmit power.
///
/// Draw order is fixed: channel first, then data bits, then receiver
/// noise. Changing it would silently re-randomize every pinned result, so
/// it is part of the reproducibility contract.
pub fn run_trial(cfg: &SimConfig, rho_db: f64, rng: &mut Rng) -> Result<TrialOutcome, SimError> {
    let rho = 10f64.powf(rho_db / 10.0);
    let n0 = cfg.b as f64 / rho;
    let constellation = Constellation::new(cfg.constellation);

    let h = draw_channel(rng, cfg.u, cfg.b);
    let nbits = cfg.u * constellation.bits_per_symbol();
    let tx_bits: Vec<u8> = (0..nbits).map(|_| rng.next_bit()).collect();
    let s = constellation.map_bits(&tx_bits);
    let noise = linalg::gaussian_complex_vector(rng, cfg.u, n0);

    let inst = ProblemInstance::new(h, s, n0);
    let x = precode(cfg, &inst)?;
    let hx = inst.channel().matvec(&x);
    let beta = beta_from_hx(&inst, &hx)?;
    let shat: Vec<C64> = hx
        .iter()
        .zip(noise.iter())
        .map(|(&hxi, &ni)| beta * (hxi + ni))
        .collect();
    let rx_bits = constellation.detect(&shat);

    let bit_errors = tx_bits
        .iter()
        .zip(rx_bits.iter())
        .filter(|(a, b)| a != b)
        .count() as u64;
    Ok(TrialOutcome {
        bit_errors,
        bits: nbits as u64,
    })
}

/// Runs the full sweep: `cfg.trials` trials at every grid point, in
/// parallel, aggregated into a [`BerCurve`]. Deterministic for a given
/// config regardless of thread count.
pub fn sweep(cfg: &SimConfig) -> Result<BerCurve, SimError> {
    cfg.validate()?;
    let mut points = Vec::with_capacity(cfg.rho_grid_db.len());
    for (ri, &rho_db) in cfg.rho_grid_db.iter().enumerate() {
        let outcomes = (0..cfg.trials)
            .into_par_iter()
            .map(|t| {
                let mut rng = Rng::new(derive_trial_seed(cfg.seed, ri, t));
                run_trial(cfg, rho_db, &mut rng)
            })
            .collect::<Result<Vec<_>, _>>()?;
        let bit_errors = outcomes.iter().map(|o| o.bit_errors).sum();
        let bits = outcomes.iter().map(|o| o.bits).sum();
        points.push(BerPoint::from_counts(rho_db, bit_errors, bits));
    }
    Ok(BerCurve { points })
}

/// The smallest grid power whose BER reaches 1%, refined by log-linear
/// interpolation between the bracketing grid points. If the first grid
/// point is already at or below 1% it is returned as-is. A right bracket
/// with zero measured errors is treated as half an error over its bit
/// count, the usual rule for interpolating against an empty bin.
pub fn threshold_from_curve(curve: &BerCurve) -> Result<f64, SimError> {
    const TARGET: f64 = 1e-2;
    if curve.points.is_empty() {
        return Err(SimError::InvalidConfig("empty BER curve".into()));
    }
    if curve.points.windows(2).any(|w| w[0].rho_db >= w[1].rho_db) {
        return Err(SimError::InvalidConfig(
            "BER curve grid must be strictly increasing".into(),
        ));
    }
    let hit = curve
        .points
        .iter()
        .position(|p| p.ber <= TARGET)
        .ok_or(SimError::NoThresholdCrossing)?;
    if hit == 0 {
        return Ok(curve.points[0].rho_db);
    }
    let lo = &curve.points[hit - 1];
    let hi = &curve.points[hit];
    let b_lo = lo.ber;
    let b_hi = if hi.ber > 0.0 {
        hi.ber
    } else {
        0.5 / hi.bits as f64
    };
    let f = (b_lo.ln() - TARGET.ln()) / (b_lo.ln() - b_hi.ln());
    Ok(lo.rho_db + (hi.rho_db - lo.rho_db) * f)
}

/// Sweeps the configuration and returns the 1% BER threshold in dB.
pub fn threshold_1pct(cfg: &SimConfig) -> Result<f64, SimError> {
    threshold_from_curve(&sweep(cfg)?)
}

/// Writes a sweep result as CSV, one row per grid point:
/// `precoder,B,U,constellation,P,t_max,rho_dB,trials,bit_errors,bits,ber,ci_halfwidth`.
/// The P column echoes the transmitted alphabet size and is 0 for the
/// unquantized linear precoders.
pub fn write_csv(
    out: &mut dyn std::io::Write,
    cfg: &SimConfig,
    curve: &BerCurve,
) -> std::io::Result<()> {
    writeln!(
        out,
        "precoder,B,U,constellation,P,t_max,rho_dB,trials,bit_errors,bits,ber,ci_halfwidth"
    )?;
    for p in &curve.points {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            cfg.precoder,
            cfg.b,
            cfg.u,
            cfg.constellation,
            cfg.effective_phases(),
            cfg.fbs.t_max,
            p.rho_db,
            cfg.trials,
            p.bit_errors,
            p.bits,
            p.ber,
            p.ci_halfwidth
        )?;
    }
    Ok(())
}

/// Tail probability of the standard normal distribution,
/// `Q(x) = P(Z > x)`, accurate to about 1e-7 absolute. Validation suites
/// use it to evaluate closed-form BER references.
pub fn qfunc(x: f64) -> f64 {
    if x < 0.0 {
        return 1.0 - qfunc(-x);
    }
    // Rational erfc approximation; coefficients give |error| < 1.5e-7.
    let y = x / std::f64::consts::SQRT_2;
    let t = 1.0 / (1.0 + 0.327_591_1 * y);
    let poly = t
        * (0.254_829_592
            + t * (-0.284_496_736 + t * (1.421_413_741 + t * (-1.453_152_027 + t * 1.061_405_429))));
    0.5 * poly * (-y * y).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_cfg(precoder: PrecoderKind) -> SimConfig {
        SimConfig::new(
            8,
            2,
            ConstellationName::Qpsk,
            precoder,
            3,
            vec![10.0],
            20,
            7,
        )
    }

    #[test]
    fn qfunc_matches_tabulated_values() {
        for (x, want) in [
            (0.0, 0.5),
            (1.0, 0.158_655_25),
            (2.0, 0.022_750_13),
            (3.0, 0.001_349_90),
            (-1.0, 0.841_344_75),
        ] {
            assert!((qfunc(x) - want).abs() < 1e-6, "Q({x})");
        }
    }

    #[test]
    fn channel_entries_have_unit_variance_and_zero_mean() {
        let mut rng = Rng::new(3);
        let h = draw_channel(&mut rng, 100, 1000);
        let n = 100 * 1000;
        let mut sum = C64::new(0.0, 0.0);
        let mut sum_sq = 0.0;
        for r in 0..100 {
            for c in 0..1000 {
                sum += h[(r, c)];
                sum_sq += h[(r, c)].norm_sqr();
            }
        }
        let mean = sum / n as f64;
        assert!(mean.norm() < 0.02, "mean {mean}");
        let var = sum_sq / n as f64;
        assert!((0.98..1.02).contains(&var), "variance {var}");
    }

    #[test]
    fn beta_hat_worked_examples() {
        // H = I, x = s, N0 = 0: Hx = s so the scale is exactly one.
        let s = vec![C64::new(0.6, -0.2), C64::new(-0.3, 0.9)];
        let inst = ProblemInstance::new(Matrix::identity(2), s.clone(), 0.0);
        let b = beta_hat(&inst, &s).unwrap();
        assert!((b - C64::new(1.0, 0.0)).norm() < 1e-12);

        // Hx orthogonal to s: zero scale.
        let x_orth = vec![s[1].conj(), -s[0].conj()];
        assert!(beta_hat(&inst, &x_orth).unwrap().norm() < 1e-12);

        // Hx = 0 with no noise: undefined.
        let zero = vec![C64::new(0.0, 0.0); 2];
        assert!(matches!(
            beta_hat(&inst, &zero),
            Err(SimError::DegenerateReceiver)
        ));
    }

    #[test]
    fn beta_hat_minimizes_the_objective() {
        let mut rng = Rng::new(17);
        let h = draw_channel(&mut rng, 4, 16);
        let s = linalg::gaussian_complex_vector(&mut rng, 4, 1.0);
        let inst = ProblemInstance::new(h, s, 0.3);
        let x = linalg::gaussian_complex_vector(&mut rng, 16, 1.0);
        let b = beta_hat(&inst, &x).unwrap();
        let base = precoder::opp_objective(&inst, &x, b);
        for _ in 0..100 {
            let (re, im) = rng.gaussian_pair();
            let eps = C64::new(re, im);
            let probe = b + eps * (1e-3 / eps.norm());
            assert!(precoder::opp_objective(&inst, &x, probe) >= base - 1e-12);
        }
    }

    #[test]
    fn noiseless_zf_makes_no_errors() {
        let mut cfg = base_cfg(PrecoderKind::Zf);
        cfg.rho_grid_db = vec![200.0];
        cfg.trials = 50;
        let curve = sweep(&cfg).unwrap();
        assert_eq!(curve.points[0].bit_errors, 0);
        assert_eq!(curve.points[0].bits, 50 * 2 * 2);
    }

    #[test]
    fn trials_are_deterministic_and_seed_sensitive() {
        let cfg = base_cfg(PrecoderKind::MrtQ);
        let mut rng1 = Rng::new(99);
        let mut rng2 = Rng::new(99);
        let a = run_trial(&cfg, 5.0, &mut rng1).unwrap();
        let b = run_trial(&cfg, 5.0, &mut rng2).unwrap();
        assert_eq!(a, b);

        // Different sweep seeds should move at least one error count at a
        // noisy operating point.
        let mut cfg1 = base_cfg(PrecoderKind::Mrt);
        cfg1.rho_grid_db = vec![0.0];
        cfg1.trials = 50;
        let mut cfg2 = cfg1.clone();
        cfg2.seed = 8;
        let c1 = sweep(&cfg1).unwrap();
        let c2 = sweep(&cfg2).unwrap();
        assert_ne!(c1.points[0].bit_errors, c2.points[0].bit_errors);
    }

    #[test]
    fn sweep_with_one_trial_equals_a_bare_trial() {
        let mut cfg = base_cfg(PrecoderKind::C3po);
        cfg.trials = 1;
        cfg.rho_grid_db = vec![6.0];
        let curve = sweep(&cfg).unwrap();
        let mut rng = Rng::new(derive_trial_seed(cfg.seed, 0, 0));
        let single = run_trial(&cfg, 6.0, &mut rng).unwrap();
        assert_eq!(curve.points[0].bit_errors, single.bit_errors);
        assert_eq!(curve.points[0].bits, single.bits);
    }

    #[test]
    fn sweep_is_thread_count_independent() {
        let mut cfg = base_cfg(PrecoderKind::C3po);
        cfg.trials = 40;
        cfg.rho_grid_db = vec![4.0, 8.0];
        let run_in_pool = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| sweep(&cfg).unwrap())
        };
        let one = run_in_pool(1);
        let three = run_in_pool(3);
        assert_eq!(one, three);
    }

    #[test]
    fn c2po_is_c3po_on_four_phases() {
        let mut a = base_cfg(PrecoderKind::C2po);
        let mut b = base_cfg(PrecoderKind::C3po);
        a.trials = 10;
        b.trials = 10;
        b.phases = 4;
        let ca = sweep(&a).unwrap();
        let cb = sweep(&b).unwrap();
        assert_eq!(ca, cb);
    }

    #[test]
    fn fixed_point_route_runs_and_is_deterministic() {
        let mut cfg = SimConfig::new(
            32,
            16,
            ConstellationName::Bpsk,
            PrecoderKind::C3po,
            2,
            vec![8.0],
            5,
            13,
        );
        cfg.fixed_point = true;
        let a = sweep(&cfg).unwrap();
        let b = sweep(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.points[0].bits, 5 * 16);
    }

    #[test]
    fn config_validation_catches_bad_setups() {
        let ok = base_cfg(PrecoderKind::Mrt);
        assert!(ok.validate().is_ok());

        let mut bad = base_cfg(PrecoderKind::Mrt);
        bad.u = 9;
        assert!(bad.validate().is_err());

        let mut bad = base_cfg(PrecoderKind::Mrt);
        bad.phases = 6;
        assert!(bad.validate().is_err());

        let mut bad = base_cfg(PrecoderKind::Mrt);
        bad.trials = 0;
        assert!(bad.validate().is_err());

        let mut bad = base_cfg(PrecoderKind::Mrt);
        bad.rho_grid_db = vec![3.0, 3.0];
        assert!(bad.validate().is_err());

        let mut bad = base_cfg(PrecoderKind::Mrt);
        bad.fixed_point = true;
        assert!(bad.validate().is_err());

        let mut bad = base_cfg(PrecoderKind::C3po);
        bad.b = 24;
        bad.u = 9;
        bad.fixed_point = true;
        assert!(bad.validate().is_err());

        let mut bad = base_cfg(PrecoderKind::C3po);
        bad.fbs.tau = Some(1.0);
        bad.fbs.delta = Some(1.5);
        assert!(bad.validate().is_err());
    }

    #[test]
    fn single_user_mrt_tracks_the_diversity_two_reference() {
        // U = 1, B = 2, BPSK: the matched filter aligns with the channel,
        // so the post-rescaling error probability is E[Q(sqrt(2 rho g))]
        // with g following a Gamma(2,1) law. Integrate that numerically
        // and demand agreement within 3.5 binomial standard deviations.
        let reference = |rho: f64| {
            let n = 40_000;
            let upper = 60.0;
            let h = upper / n as f64;
            // Simpson's rule over the Gamma(2,1) density g exp(-g).
            let f = |g: f64| qfunc((2.0 * rho * g).sqrt()) * g * (-g).exp();
            let mut acc = f(0.0) + f(upper);
            for i in 1..n {
                let w = if i % 2 == 1 { 4.0 } else { 2.0 };
                acc += w * f(i as f64 * h);
            }
            acc * h / 3.0
        };
        let mut cfg = SimConfig::new(
            2,
            1,
            ConstellationName::Bpsk,
            PrecoderKind::Mrt,
            0,
            vec![-3.0, 0.0, 3.0],
            4000,
            21,
        );
        cfg.trials = 4000;
        let curve = sweep(&cfg).unwrap();
        for p in &curve.points {
            let rho = 10f64.powf(p.rho_db / 10.0);
            let want = reference(rho);
            let sigma = (want * (1.0 - want) / p.bits as f64).sqrt();
            assert!(
                (p.ber - want).abs() < 3.5 * sigma,
                "rho {} dB: measured {} reference {want} sigma {sigma}",
                p.rho_db,
                p.ber
            );
        }
    }

    #[test]
    fn zf_ber_is_monotone_in_power() {
        let mut cfg = base_cfg(PrecoderKind::Zf);
        cfg.constellation = ConstellationName::Bpsk;
        cfg.rho_grid_db = vec![0.0, 4.0, 8.0];
        cfg.trials = 3000;
        let curve = sweep(&cfg).unwrap();
        for w in curve.points.windows(2) {
            let slack = 3.0 * (w[0].ci_halfwidth + w[1].ci_halfwidth);
            assert!(
                w[1].ber <= w[0].ber + slack,
                "{} -> {}",
                w[0].ber,
                w[1].ber
            );
        }
    }

    #[test]
    fn threshold_interpolation_on_synthetic_curves() {
        let curve = BerCurve {
            points: vec![
                BerPoint::from_counts(0.0, 200, 10_000),
                BerPoint::from_counts(2.0, 50, 10_000),
            ],
        };
        // 0.02 to 0.005 crosses 0.01 exactly halfway in log space.
        let t = threshold_from_curve(&curve).unwrap();
        assert!((t - 1.0).abs() < 1e-9, "got {t}");

        // First point already under target: returned untouched.
        let early = BerCurve {
            points: vec![
                BerPoint::from_counts(0.0, 50, 10_000),
                BerPoint::from_counts(2.0, 10, 10_000),
            ],
        };
        assert_eq!(threshold_from_curve(&early).unwrap(), 0.0);

        // Never reaches target.
        let flat = BerCurve {
            points: vec![
                BerPoint::from_counts(0.0, 300, 10_000),
                BerPoint::from_counts(2.0, 200, 10_000),
            ],
        };
        assert!(matches!(
            threshold_from_curve(&flat),
            Err(SimError::NoThresholdCrossing)
        ));

        // Zero errors on the right bracket: substitute half an error.
        let cliff = BerCurve {
            points: vec![
                BerPoint::from_counts(0.0, 200, 10_000),
                BerPoint::from_counts(2.0, 0, 10_000),
            ],
        };
        let t = threshold_from_curve(&cliff).unwrap();
        assert!(
            (0.2313..0.2314).contains(&t),
            "interpolation against the empty bin moved: {t}"
        );
    }

    #[test]
    fn csv_output_has_the_pinned_schema() {
        let mut cfg = base_cfg(PrecoderKind::C3po);
        cfg.trials = 5;
        cfg.rho_grid_db = vec![2.0, 4.0];
        let curve = sweep(&cfg).unwrap();
        let mut buf = Vec::new();
        write_csv(&mut buf, &cfg, &curve).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(
            lines[0],
            "precoder,B,U,constellation,P,t_max,rho_dB,trials,bit_errors,bits,ber,ci_halfwidth"
        );
        let row: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(row.len(), 12);
        assert_eq!(row[0], "c3po");
        assert_eq!(row[1], "8");
        assert_eq!(row[4], "8");
        assert_eq!(row[6], "2");
        let ber: f64 = row[10].parse().unwrap();
        assert!((ber - curve.points[0].ber).abs() < 1e-15);

        // The unquantized linear precoders advertise no alphabet.
        let mut lin = base_cfg(PrecoderKind::Zf);
        lin.trials = 2;
        let lc = sweep(&lin).unwrap();
        let mut buf = Vec::new();
        write_csv(&mut buf, &lin, &lc).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.lines().nth(1).unwrap().starts_with("zf,8,2,qpsk,0,"));
    }

    #[test]
    fn wilson_halfwidth_matches_hand_computation() {
        // 100 errors in 10,000 bits: p = 0.01, z = 1.96.
        let p = BerPoint::from_counts(0.0, 100, 10_000);
        let z: f64 = 1.96;
        let n = 10_000.0;
        let want =
            z * (0.01 * 0.99 / n + z * z / (4.0 * n * n)).sqrt() / (1.0 + z * z / n);
        assert!((p.ci_halfwidth - want).abs() < 1e-15);
        assert!(p.ci_halfwidth > 0.0019 && p.ci_halfwidth < 0.0021);
    }
}
