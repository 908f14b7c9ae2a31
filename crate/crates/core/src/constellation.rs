//! Modulation alphabets with bit labels.

use num_complex::Complex64;

use crate::error::{domain, Error, Result};

/// Complex baseband symbol.
pub type Symbol = Complex64;

/// A finite, bit-labelled symbol alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    points: Vec<Symbol>,
    bit_labels: Vec<u32>,
    bits_per_symbol: u32,
    avg_power: f64,
}

impl Constellation {
    /// Builds an alphabet and checks its invariants: power-of-two size,
    /// distinct labels that fit in `log2(M)` bits, and a mean symbol energy
    /// equal to `avg_power` within 1e-12 (relative above unit power).
    pub fn new(points: Vec<Symbol>, bit_labels: Vec<u32>, avg_power: f64) -> Result<Self> {
        let m = points.len();
        if m < 2 || !m.is_power_of_two() {
            return Err(domain(format!("constellation size {m} is not a power of two ≥ 2")));
        }
        if bit_labels.len() != m {
            return Err(domain("one bit label per point required"));
        }
        let bits = m.trailing_zeros();
        let mut seen = vec![false; m];
        for &label in &bit_labels {
            let idx = label as usize;
            if idx >= m || seen[idx] {
                return Err(domain(format!("bit label {label:#b} duplicated or wider than {bits} bits")));
            }
            seen[idx] = true;
        }
        let mean = points.iter().map(|p| p.norm_sqr()).sum::<f64>() / m as f64;
        if !(avg_power > 0.0) || (mean - avg_power).abs() > 1e-12 * avg_power.max(1.0) {
            return Err(domain(format!(
                "mean symbol energy {mean} does not match avg_power {avg_power}"
            )));
        }
        Ok(Self {
            points,
            bit_labels,
            bits_per_symbol: bits,
            avg_power,
        })
    }

    /// Gray-labelled QPSK with points `(±1 ± j)·sqrt(avg_power/2)`.
    ///
    /// Index order and labels: 0 → `00` (+1+j), 1 → `01` (−1+j),
    /// 2 → `11` (−1−j), 3 → `10` (+1−j).
    pub fn qpsk(avg_power: f64) -> Result<Self> {
        if !(avg_power > 0.0) || !avg_power.is_finite() {
            return Err(domain(format!("QPSK average power must be positive, got {avg_power}")));
        }
        let a = (avg_power / 2.0).sqrt();
        let points = vec![
            Symbol::new(a, a),
            Symbol::new(-a, a),
            Symbol::new(-a, -a),
            Symbol::new(a, -a),
        ];
        Self::new(points, vec![0b00, 0b01, 0b11, 0b10], avg_power)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Symbol] {
        &self.points
    }

    pub fn point(&self, index: usize) -> Result<Symbol> {
        self.points.get(index).copied().ok_or(Error::IndexOutOfRange {
            index,
            len: self.points.len(),
        })
    }

    pub fn bits_per_symbol(&self) -> u32 {
        self.bits_per_symbol
    }

    pub fn avg_power(&self) -> f64 {
        self.avg_power
    }

    pub fn bit_label(&self, index: usize) -> Result<u32> {
        self.bit_labels.get(index).copied().ok_or(Error::IndexOutOfRange {
            index,
            len: self.points.len(),
        })
    }

    /// Bit label rendered MSB first, e.g. `"01"`.
    pub fn bit_string(&self, index: usize) -> Result<String> {
        let label = self.bit_label(index)?;
        Ok(format!("{:0width$b}", label, width = self.bits_per_symbol as usize))
    }

    /// Hamming distance between the labels of two symbols.
    pub fn bit_errors(&self, x: usize, x_hat: usize) -> Result<u32> {
        Ok((self.bit_label(x)? ^ self.bit_label(x_hat)?).count_ones())
    }

    /// Index of the point closest to `r` after scaling the alphabet by `gain`.
    /// Ties go to the lowest index.
    #[inline]
    pub fn nearest(&self, r: Symbol, gain: Symbol) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, p) in self.points.iter().enumerate() {
            let d = (r - gain * p).norm_sqr();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    /// All ordered pairs `(x, x̂)` with `x ≠ x̂`.
    pub fn error_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let m = self.len();
        (0..m).flat_map(move |tx| (0..m).filter(move |&rx| rx != tx).map(move |rx| (tx, rx)))
    }
}

/// `Δ = x − x̂`.
#[inline]
pub fn symbol_difference(x: Symbol, x_hat: Symbol) -> Symbol {
    x - x_hat
}

/// A transmitted symbol together with a competing hypothesis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymbolPair {
    pub tx: Symbol,
    pub rx_hypothesis: Symbol,
    pub delta: Symbol,
}

impl SymbolPair {
    pub fn new(tx: Symbol, rx_hypothesis: Symbol) -> Self {
        Self {
            tx,
            rx_hypothesis,
            delta: symbol_difference(tx, rx_hypothesis),
        }
    }

    /// Whether the pair can produce a pairwise error (`Δ ≠ 0`).
    pub fn is_error_event(&self) -> bool {
        self.delta != Symbol::new(0.0, 0.0)
    }
}
