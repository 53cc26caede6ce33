//! Seeded low-discrepancy points (Halton with a Cranley-Patterson shift).

const PRIMES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

pub const MAX_DIM: usize = PRIMES.len();

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut acc = 0.0;
    while i > 0 {
        acc += (i % base) as f64 * f;
        i /= base;
        f *= inv;
    }
    acc
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Shifted Halton sequence in `[0, 1)^dim`; seed 0 means no shift.
#[derive(Debug, Clone)]
pub struct Halton {
    shifts: Vec<f64>,
}

impl Halton {
    pub fn new(dim: usize, seed: u64) -> Self {
        assert!((1..=MAX_DIM).contains(&dim), "Halton dimension {dim} unsupported");
        let shifts = (0..dim)
            .map(|d| {
                if seed == 0 {
                    0.0
                } else {
                    (splitmix64(seed.wrapping_mul(131).wrapping_add(d as u64)) >> 11) as f64
                        / (1u64 << 53) as f64
                }
            })
            .collect();
        Self { shifts }
    }

    pub fn dim(&self) -> usize {
        self.shifts.len()
    }

    /// Point number `index` (1-based internally, so index 0 is not the origin).
    pub fn point(&self, index: u64, out: &mut [f64]) {
        for (d, o) in out.iter_mut().enumerate().take(self.shifts.len()) {
            let v = radical_inverse(index + 1, PRIMES[d]) + self.shifts[d];
            *o = if v >= 1.0 { v - 1.0 } else { v };
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radical_inverse_base_two() {
        assert_eq!(radical_inverse(1, 2), 0.5);
        assert_eq!(radical_inverse(2, 2), 0.25);
        assert_eq!(radical_inverse(3, 2), 0.75);
    }

    #[test]
    fn integrates_smooth_function() {
        let h = Halton::new(3, 7);
        let mut p = [0.0; 3];
        let m = 20_000;
        let mut acc = 0.0;
        for i in 0..m {
            h.point(i, &mut p);
            assert!(p.iter().all(|v| (0.0..1.0).contains(v)));
            acc += p[0] * p[1] + p[2] * p[2];
        }
        let est = acc / m as f64;
        assert!((est - (0.25 + 1.0 / 3.0)).abs() < 1e-3);
    }

    #[test]
    fn seeds_differ() {
        let (a, b) = (Halton::new(2, 1), Halton::new(2, 2));
        let (mut pa, mut pb) = ([0.0; 2], [0.0; 2]);
        a.point(5, &mut pa);
        b.point(5, &mut pb);
        assert_ne!(pa, pb);
    }
}
