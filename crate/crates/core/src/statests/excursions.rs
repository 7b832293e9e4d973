use super::{erfc, igamc};

pub const EXCURSION_STATES: [i64; 8] = [-4, -3, -2, -1, 1, 2, 3, 4];
pub const VARIANT_STATES: [i64; 18] = [-9, -8, -7, -6, -5, -4, -3, -2, -1, 1, 2, 3, 4, 5, 6, 7, 8, 9];

/// Random walk padded with a zero at both ends, plus its zero positions.
pub struct Walk {
    walk: Vec<i64>,
    zeros: Vec<usize>,
}

impl Walk {
    pub fn new(bits: &[u8]) -> Self {
        let mut walk = Vec::with_capacity(bits.len() + 2);
        walk.push(0);
        let mut s = 0i64;
        for &b in bits {
            s += if b == 1 { 1 } else { -1 };
            walk.push(s);
        }
        walk.push(0);
        let zeros = walk
            .iter()
            .enumerate()
            .filter(|(_, &v)| v == 0)
            .map(|(i, _)| i)
            .collect();
        Self { walk, zeros }
    }

    /// Number of cycles J.
    pub fn cycles(&self) -> usize {
        self.zeros.len() - 1
    }

    /// Random-excursions p-value for state `x`.
    pub fn excursion(&self, x: i64) -> f64 {
        let j = self.cycles();
        let ax = x.unsigned_abs() as f64;
        let q = 1.0 - 1.0 / (2.0 * ax);
        let mut pi = [0.0; 6];
        pi[0] = q;
        for (k, p) in pi.iter_mut().enumerate().take(5).skip(1) {
            *p = 1.0 / (4.0 * ax * ax) * q.powi(k as i32 - 1);
        }
        pi[5] = 1.0 / (2.0 * ax) * q.powi(4);
        let mut nu = [0usize; 6];
        for c in self.zeros.windows(2) {
            let count = self.walk[c[0]..c[1]].iter().filter(|&&v| v == x).count();
            nu[count.min(5)] += 1;
        }
        let jf = j as f64;
        let chi: f64 = nu
            .iter()
            .zip(&pi)
            .map(|(&v, &p)| (v as f64 - jf * p).powi(2) / (jf * p))
            .sum();
        igamc(2.5, chi / 2.0)
    }

    /// Random-excursions-variant p-value for state `x`.
    pub fn variant(&self, x: i64) -> f64 {
        let j = self.cycles() as f64;
        let xi = self.walk.iter().filter(|&&v| v == x).count() as f64;
        erfc((xi - j).abs() / (2.0 * j * (4.0 * x.unsigned_abs() as f64 - 2.0)).sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statests::parse_bits;

    #[test]
    fn walk_cycles() {
        // 0110110101: walk -1 0 1 0 1 2 1 2 1 2, three cycles after padding
        let w = Walk::new(&parse_bits("0110110101"));
        assert_eq!(w.cycles(), 3);
    }
}
