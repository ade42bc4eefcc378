//! Learning-rate reduction on plateau and early stopping, both monitoring
//! validation accuracy. "Improvement" always means strictly greater than the
//! best value seen so far; ties do not count.

/// Multiplies the learning rate by `factor` (down to `min_lr`) after
/// `patience` consecutive epochs without improvement. The wait counter
/// resets after each reduction, which is why this is a stateful scheduler
/// rather than a pure function of the accuracy history.
#[derive(Debug, Clone)]
pub struct PlateauScheduler {
    lr: f32,
    factor: f32,
    patience: usize,
    min_lr: f32,
    best: f32,
    wait: usize,
}

impl PlateauScheduler {
    pub fn new(initial_lr: f32, factor: f32, patience: usize, min_lr: f32) -> Self {
        PlateauScheduler {
            lr: initial_lr,
            factor,
            patience,
            min_lr,
            best: f32::NEG_INFINITY,
            wait: 0,
        }
    }

    pub fn current_lr(&self) -> f32 {
        self.lr
    }

    /// Feed one epoch's validation accuracy; returns the learning rate to
    /// use from the next epoch on.
    pub fn observe(&mut self, val_accuracy: f32) -> f32 {
        if val_accuracy > self.best {
            self.best = val_accuracy;
            self.wait = 0;
        } else {
            self.wait += 1;
            if self.wait >= self.patience {
                self.lr = (self.lr * self.factor).max(self.min_lr);
                self.wait = 0;
            }
        }
        self.lr
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Continue,
    Stop { best_epoch: usize },
}

/// Stop once the last `patience` epochs all failed to strictly exceed the
/// best value seen before them. `best_epoch` indexes the maximum of the
/// history, earliest on ties.
pub fn early_stopping_check(history: &[f32], patience: usize) -> StopDecision {
    assert!(patience >= 1, "patience must be at least 1");
    if history.is_empty() {
        return StopDecision::Continue;
    }
    let mut best_epoch = 0;
    for (i, &v) in history.iter().enumerate().skip(1) {
        if v > history[best_epoch] {
            best_epoch = i;
        }
    }
    if history.len() - 1 - best_epoch >= patience {
        StopDecision::Stop { best_epoch }
    } else {
        StopDecision::Continue
    }
}
