#![allow(dead_code)]

use gridsync_core::analysis::{drive_subsystem, SubsystemModel, SubsystemRecord};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Smooth random input: three sinusoids plus an offset.
pub struct RandomInput {
    offset: f64,
    terms: Vec<(f64, f64, f64)>,
}

impl RandomInput {
    pub fn new(rng: &mut ChaCha8Rng) -> Self {
        RandomInput {
            offset: rng.gen_range(-0.5..0.5),
            terms: (0..3)
                .map(|_| {
                    (
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(0.2..3.0),
                        rng.gen_range(0.0..std::f64::consts::TAU),
                    )
                })
                .collect(),
        }
    }

    pub fn at(&self, t: f64) -> f64 {
        self.offset + self.terms.iter().map(|(a, w, p)| a * (w * t + p).sin()).sum::<f64>()
    }
}

/// Random-input trajectory of `sub` from a random initial state.
pub fn random_trajectory(sub: &SubsystemModel, seed: u64, dt: f64, horizon: f64) -> SubsystemRecord {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x0: Vec<f64> = (0..sub.state_dim()).map(|_| rng.gen_range(-0.5..0.5)).collect();
    let input = RandomInput::new(&mut rng);
    drive_subsystem(sub, &x0, |t| input.at(t), dt, horizon).unwrap()
}
