//! Normal deviates matching R's default generator (Mersenne-Twister seeded by
//! `set.seed`, inversion for normals), used to replay reference examples.

use rand_mt::Mt;
use statrs::distribution::{ContinuousCDF, Normal};

const N: usize = 624;

fn temper(mut y: u32) -> u32 {
    y ^= y >> 11;
    y ^= (y << 7) & 0x9d2c_5680;
    y ^= (y << 15) & 0xefc6_0000;
    y ^ (y >> 18)
}

pub struct RRng {
    mt: Mt,
    std_normal: Normal,
}

impl RRng {
    pub fn set_seed(seed: u32) -> Self {
        let mut s = seed;
        for _ in 0..50 {
            s = s.wrapping_mul(69069).wrapping_add(1);
        }
        // first word is the position index, replaced by N
        s = s.wrapping_mul(69069).wrapping_add(1);
        let mut state = [0u32; N];
        for word in state.iter_mut() {
            s = s.wrapping_mul(69069).wrapping_add(1);
            *word = s;
        }
        // `From<[u32; N]>` untempers its input, so hand it tempered words
        let mt = Mt::from(state.map(temper));
        Self { mt, std_normal: Normal::new(0.0, 1.0).unwrap() }
    }

    pub fn unif_rand(&mut self) -> f64 {
        let v = f64::from(self.mt.next_u32()) * 2.328_306_436_538_696_3e-10;
        if v <= 0.0 {
            0.5 * 2.328_306_437_080_797e-10
        } else if 1.0 - v <= 0.0 {
            1.0 - 0.5 * 2.328_306_437_080_797e-10
        } else {
            v
        }
    }

    pub fn norm_rand(&mut self) -> f64 {
        const BIG: f64 = 134_217_728.0;
        let u = self.unif_rand();
        let u = (BIG * u).trunc() + self.unif_rand();
        self.std_normal.inverse_cdf(u / BIG)
    }

    pub fn rnorm(&mut self, n: usize, mean: f64, sd: f64) -> Vec<f64> {
        (0..n).map(|_| mean + sd * self.norm_rand()).collect()
    }
}
