/// Reduce-on-plateau learning-rate schedule.
///
/// An epoch improves when its loss is below `best · (1 − rel_threshold)`.
/// After `patience` consecutive epochs without improvement the rate is
/// multiplied by `factor` and the counter restarts.
#[derive(Clone, Debug, PartialEq)]
pub struct PlateauScheduler {
    pub lr: f64,
    pub factor: f64,
    pub patience: usize,
    pub rel_threshold: f64,
    pub best: f64,
    pub bad_epochs: usize,
}

impl PlateauScheduler {
    pub fn new(lr: f64, factor: f64, patience: usize, rel_threshold: f64) -> Self {
        Self {
            lr,
            factor,
            patience,
            rel_threshold,
            best: f64::INFINITY,
            bad_epochs: 0,
        }
    }

    /// Records one epoch's loss and returns the rate for the next epoch.
    pub fn step(&mut self, epoch_loss: f64) -> f64 {
        if epoch_loss < self.best * (1.0 - self.rel_threshold) {
            self.best = epoch_loss;
            self.bad_epochs = 0;
        } else {
            self.bad_epochs += 1;
            if self.bad_epochs >= self.patience {
                self.lr *= self.factor;
                self.bad_epochs = 0;
            }
        }
        self.lr
    }
}
