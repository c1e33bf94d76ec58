//! Symbol constellations and the constant-modulus phase alphabet.
//!
//! [`Constellation`] maps user bits to unit-average-energy BPSK, QPSK or
//! 16-QAM symbols and detects noisy estimates back to bits by minimum
//! Euclidean distance. The bit-to-point maps are Gray-coded per axis and
//! fixed once here; the simulator depends on them being stable across
//! releases.
//!
//! [`CmAlphabet`] is the transmit-side alphabet: `P` equispaced points on
//! the unit circle (`P = 4` or `P = 8`). [`CmAlphabet::quantize`] maps an
//! arbitrary iterate to the nearest phase, which is the final step of every
//! constant-modulus precoder in this crate.

use crate::C64;

/// Which constellation a simulation uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstellationName {
    Bpsk,
    Qpsk,
    Qam16,
}

impl std::fmt::Display for ConstellationName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ConstellationName::Bpsk => "bpsk",
            ConstellationName::Qpsk => "qpsk",
            ConstellationName::Qam16 => "qam16",
        })
    }
}

impl std::str::FromStr for ConstellationName {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bpsk" => Ok(ConstellationName::Bpsk),
            "qpsk" => Ok(ConstellationName::Qpsk),
            "qam16" => Ok(ConstellationName::Qam16),
            other => Err(format!("unknown constellation '{other}'")),
        }
    }
}

/// A bit-to-symbol map with unit average energy.
///
/// `points[i]` is the symbol for the bit pattern whose big-endian integer
/// value is `i` (the first bit of a group is the most significant). The
/// conventions are:
///
/// * BPSK: bit 0 maps to -1, bit 1 to +1.
/// * QPSK: the first bit selects the sign of the real part, the second the
///   sign of the imaginary part (0 = positive), giving the Gray sequence
///   00, 01, 11, 10 around the circle. Points are `(+-1 +- j) / sqrt(2)`.
/// * 16-QAM: two bits per axis, Gray-coded 00, 01, 11, 10 onto the levels
///   -3, -1, +1, +3, scaled by `1/sqrt(10)`. The first two bits drive the
///   real axis, the last two the imaginary axis.
#[derive(Debug, Clone)]
pub struct Constellation {
    name: ConstellationName,
    bits_per_symbol: usize,
    points: Vec<C64>,
}

/// Gray map of two bits onto an amplitude level in {-3, -1, +1, +3}.
fn gray_level(b0: u8, b1: u8) -> f64 {
    match (b0, b1) {
        (0, 0) => -3.0,
        (0, 1) => -1.0,
        (1, 1) => 1.0,
        (1, 0) => 3.0,
        _ => unreachable!("bits must be 0 or 1"),
    }
}

impl Constellation {
    pub fn new(name: ConstellationName) -> Self {
        match name {
            ConstellationName::Bpsk => Self::bpsk(),
            ConstellationName::Qpsk => Self::qpsk(),
            ConstellationName::Qam16 => Self::qam16(),
        }
    }

    pub fn bpsk() -> Self {
        Self {
            name: ConstellationName::Bpsk,
            bits_per_symbol: 1,
            points: vec![C64::new(-1.0, 0.0), C64::new(1.0, 0.0)],
        }
    }

    pub fn qpsk() -> Self {
        let a = 1.0 / 2f64.sqrt();
        let sign = |b: usize| if b == 0 { 1.0 } else { -1.0 };
        let points = (0..4)
            .map(|i| C64::new(a * sign(i >> 1), a * sign(i & 1)))
            .collect();
        Self {
            name: ConstellationName::Qpsk,
            bits_per_symbol: 2,
            points,
        }
    }

    pub fn qam16() -> Self {
        let s = 1.0 / 10f64.sqrt();
        let points = (0..16)
            .map(|i| {
                let b = |k: usize| ((i >> (3 - k)) & 1) as u8;
                C64::new(s * gray_level(b(0), b(1)), s * gray_level(b(2), b(3)))
            })
            .collect();
        Self {
            name: ConstellationName::Qam16,
            bits_per_symbol: 4,
            points,
        }
    }

    pub fn name(&self) -> ConstellationName {
        self.name
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.bits_per_symbol
    }

    pub fn points(&self) -> &[C64] {
        &self.points
    }

    /// Maps a bit string (values 0/1, length a multiple of
    /// `bits_per_symbol`) to symbols.
    pub fn map_bits(&self, bits: &[u8]) -> Vec<C64> {
        assert_eq!(
            bits.len() % self.bits_per_symbol,
            0,
            "bit string length must be a multiple of bits_per_symbol"
        );
        bits.chunks(self.bits_per_symbol)
            .map(|group| {
                let idx = group.iter().fold(0usize, |acc, &b| {
                    assert!(b <= 1, "bits must be 0 or 1");
                    (acc << 1) | b as usize
                });
                self.points[idx]
            })
            .collect()
    }

    /// Detects each symbol estimate to the bits of the closest
    /// constellation point (minimum Euclidean distance; ties resolve to the
    /// lowest point index).
    pub fn detect(&self, shat: &[C64]) -> Vec<u8> {
        let mut bits = Vec::with_capacity(shat.len() * self.bits_per_symbol);
        for z in shat {
            let mut best = 0usize;
            let mut best_d = f64::INFINITY;
            for (i, p) in self.points.iter().enumerate() {
                let d = (z - p).norm_sqr();
                if d < best_d {
                    best_d = d;
                    best = i;
                }
            }
            for k in (0..self.bits_per_symbol).rev() {
                bits.push(((best >> k) & 1) as u8);
            }
        }
        bits
    }
}

/// `P` equispaced unit-modulus transmit points.
///
/// The 8-phase set starts at angle zero, `exp(j pi k / 4)`. The 4-phase
/// set carries a `pi/4` offset, `(+-1 +- j) / sqrt(2)`: it is what a pair
/// of 1-bit converters per antenna emits (each rail holding `+-1/sqrt(2)`),
/// and its convex hull is the axis-aligned square that the 4-phase
/// projection clamps onto. Points use exact component constants so that
/// the symmetries hold bit-for-bit.
#[derive(Debug, Clone)]
pub struct CmAlphabet {
    phases: u32,
    points: Vec<C64>,
}

impl CmAlphabet {
    /// Builds the alphabet. Panics unless `p` is 4 or 8.
    pub fn new(p: u32) -> Self {
        assert!(p == 4 || p == 8, "phase count must be 4 or 8");
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let points: Vec<C64> = match p {
            4 => vec![
                C64::new(s, s),
                C64::new(-s, s),
                C64::new(-s, -s),
                C64::new(s, -s),
            ],
            _ => vec![
                C64::new(1.0, 0.0),
                C64::new(s, s),
                C64::new(0.0, 1.0),
                C64::new(-s, s),
                C64::new(-1.0, 0.0),
                C64::new(-s, -s),
                C64::new(0.0, -1.0),
                C64::new(s, -s),
            ],
        };
        Self { phases: p, points }
    }

    pub fn phases(&self) -> u32 {
        self.phases
    }

    pub fn points(&self) -> &[C64] {
        &self.points
    }

    /// Nearest alphabet point by phase for one entry. Equivalently, the
    /// point maximizing `Re(conj(point) * z)`; ties resolve to the lowest
    /// phase index, and `z = 0` maps to index 0.
    pub fn quantize_point(&self, z: C64) -> C64 {
        let mut best = 0usize;
        let mut best_score = f64::NEG_INFINITY;
        for (i, p) in self.points.iter().enumerate() {
            let score = (p.conj() * z).re;
            if score > best_score {
                best_score = score;
                best = i;
            }
        }
        self.points[best]
    }

    /// Entry-wise phase quantization of a vector.
    pub fn quantize(&self, z: &[C64]) -> Vec<C64> {
        z.iter().map(|&zi| self.quantize_point(zi)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn all(names: [ConstellationName; 3]) -> impl Iterator<Item = Constellation> {
        names.into_iter().map(Constellation::new)
    }

    const NAMES: [ConstellationName; 3] = [
        ConstellationName::Bpsk,
        ConstellationName::Qpsk,
        ConstellationName::Qam16,
    ];

    #[test]
    fn unit_average_energy() {
        for k in all(NAMES) {
            let e: f64 = k.points().iter().map(|p| p.norm_sqr()).sum::<f64>()
                / k.points().len() as f64;
            assert!((e - 1.0).abs() < 1e-12, "{:?}: mean energy {e}", k.name());
        }
    }

    #[test]
    fn bitmaps_are_bijective() {
        for k in all(NAMES) {
            let pts = k.points();
            assert_eq!(pts.len(), 1 << k.bits_per_symbol());
            for i in 0..pts.len() {
                for j in i + 1..pts.len() {
                    assert!(
                        (pts[i] - pts[j]).norm() > 1e-9,
                        "{:?}: duplicate points {i}, {j}",
                        k.name()
                    );
                }
            }
        }
    }

    #[test]
    fn bpsk_convention() {
        let k = Constellation::bpsk();
        assert_eq!(k.map_bits(&[0]), vec![c(-1.0, 0.0)]);
        assert_eq!(k.map_bits(&[1]), vec![c(1.0, 0.0)]);
    }

    #[test]
    fn qpsk_gray_sequence_walks_the_circle() {
        let k = Constellation::qpsk();
        // 00, 01, 11, 10 must be in circular order (90 degrees apart each).
        let seq = [[0u8, 0], [0, 1], [1, 1], [1, 0]];
        let pts: Vec<C64> = seq.iter().map(|b| k.map_bits(b)[0]).collect();
        for i in 0..4 {
            let a = pts[i];
            let b = pts[(i + 1) % 4];
            let step = (b / a).arg().abs();
            assert!(
                (step - std::f64::consts::FRAC_PI_2).abs() < 1e-12,
                "step {i}: {step}"
            );
        }
        assert!((pts[0] - c(1.0 / 2f64.sqrt(), 1.0 / 2f64.sqrt())).norm() < 1e-15);
    }

    #[test]
    fn qam16_gray_neighbors_differ_in_one_bit() {
        let k = Constellation::qam16();
        let step = 2.0 / 10f64.sqrt();
        let pts = k.points();
        for i in 0..16 {
            for j in i + 1..16 {
                let d = pts[i] - pts[j];
                // Grid neighbors: one axis step apart.
                if (d.norm() - step).abs() < 1e-9 {
                    let diff = (i ^ j).count_ones();
                    assert_eq!(diff, 1, "points {i} and {j} differ in {diff} bits");
                }
            }
        }
    }

    #[test]
    fn detect_example_bpsk() {
        let k = Constellation::bpsk();
        assert_eq!(k.detect(&[c(0.3, -0.9)]), vec![1]);
    }

    #[test]
    fn detect_inverts_map_on_clean_symbols() {
        let mut rng = Rng::new(21);
        for k in all(NAMES) {
            let bits: Vec<u8> = (0..k.bits_per_symbol() * 500)
                .map(|_| rng.next_bit())
                .collect();
            let s = k.map_bits(&bits);
            assert_eq!(k.detect(&s), bits, "{:?}", k.name());
        }
    }

    /// Independent per-axis threshold slicer for 16-QAM.
    fn qam16_slicer(z: C64) -> [u8; 4] {
        let t = 2.0 / 10f64.sqrt();
        let axis = |v: f64| -> [u8; 2] {
            if v < -t {
                [0, 0]
            } else if v < 0.0 {
                [0, 1]
            } else if v < t {
                [1, 1]
            } else {
                [1, 0]
            }
        };
        let re = axis(z.re);
        let im = axis(z.im);
        [re[0], re[1], im[0], im[1]]
    }

    #[test]
    fn qam16_detect_matches_slicer_oracle() {
        let k = Constellation::qam16();
        let mut rng = Rng::new(22);
        for _ in 0..10_000 {
            let z = c(
                3.0 * (rng.next_f64() - 0.5),
                3.0 * (rng.next_f64() - 0.5),
            );
            assert_eq!(k.detect(&[z]), qam16_slicer(z).to_vec(), "z = {z}");
        }
    }

    #[test]
    fn alphabet_points_are_unit_modulus_and_distinct() {
        for p in [4u32, 8] {
            let a = CmAlphabet::new(p);
            assert_eq!(a.points().len(), p as usize);
            for (i, x) in a.points().iter().enumerate() {
                assert!((x.norm() - 1.0).abs() <= 1e-15, "P={p} point {i}");
                for y in &a.points()[..i] {
                    assert!((x - y).norm() > 0.1);
                }
            }
        }
    }

    #[test]
    fn quantize_examples() {
        let a8 = CmAlphabet::new(8);
        // On-alphabet input is returned exactly.
        let out = a8.quantize_point(c(-1.0, 0.0));
        assert_eq!(out, a8.points()[4]);
        assert!((out - c(-1.0, 0.0)).norm() < 1e-15);
        // 0.6 + 0.5j sits at 39.8 degrees, closest to the 45-degree point.
        assert_eq!(a8.quantize_point(c(0.6, 0.5)), a8.points()[1]);
        // 0.9 + 0.1j sits at 6.3 degrees, closest to 0 degrees.
        assert_eq!(a8.quantize_point(c(0.9, 0.1)), a8.points()[0]);
        // The zero input maps to phase index 0 by convention.
        assert_eq!(a8.quantize_point(c(0.0, 0.0)), a8.points()[0]);
    }

    #[test]
    fn quantize_tie_rounds_to_lower_phase_index() {
        let a4 = CmAlphabet::new(4);
        // j sits exactly between phases 0 and 1, and with the exact point
        // components both correlation scores evaluate to the same f64, so
        // the tie rule is exercised for real.
        let p0 = a4.points()[0];
        let p1 = a4.points()[1];
        assert_eq!((p0.conj() * c(0.0, 1.0)).re, (p1.conj() * c(0.0, 1.0)).re);
        assert_eq!(a4.quantize_point(c(0.0, 1.0)), p0);
    }

    #[test]
    fn quantize_idempotent_on_alphabet() {
        for p in [4u32, 8] {
            let a = CmAlphabet::new(p);
            for (i, &x) in a.points().iter().enumerate() {
                assert_eq!(a.quantize_point(x), a.points()[i]);
            }
        }
    }

    /// Angle-rounding oracle: quantize by rounding the phase directly,
    /// honoring the pi/4 offset of the 4-phase set.
    fn nearest_phase_oracle(a: &CmAlphabet, z: C64) -> C64 {
        let p = a.phases() as f64;
        let offset = if a.phases() == 4 {
            std::f64::consts::FRAC_PI_4
        } else {
            0.0
        };
        let k = ((z.arg() - offset) / std::f64::consts::TAU * p).round();
        let idx = (k as i64).rem_euclid(a.phases() as i64) as usize;
        a.points()[idx]
    }

    #[test]
    fn quantize_matches_angle_rounding_oracle() {
        let mut rng = Rng::new(23);
        for p in [4u32, 8] {
            let a = CmAlphabet::new(p);
            for _ in 0..100_000 {
                let z = c(rng.next_f64() * 6.0 - 3.0, rng.next_f64() * 6.0 - 3.0);
                if z.norm() < 1e-12 {
                    continue;
                }
                let got = a.quantize_point(z);
                let want = nearest_phase_oracle(&a, z);
                assert_eq!(got, want, "P={p} z={z} (angle {})", z.arg());
            }
        }
    }
}
