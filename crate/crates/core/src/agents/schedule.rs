/// Linear per-step exploration decay: `eps(k) = max(min, start - decay * k)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub decay: f64,
    pub min: f64,
    steps: u64,
}

impl EpsilonSchedule {
    pub fn new(start: f64, decay: f64, min: f64) -> Self {
        EpsilonSchedule {
            start,
            decay,
            min,
            steps: 0,
        }
    }

    pub fn value(&self) -> f64 {
        (self.start - self.decay * self.steps as f64).max(self.min)
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn advance(&mut self) {
        self.steps += 1;
    }
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        EpsilonSchedule::new(1.0, 1e-5, 0.01)
    }
}
