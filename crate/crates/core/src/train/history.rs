use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Improved,
    Continue,
    Stop,
}

/// Stops once validation loss has not improved for `patience` consecutive
/// epochs.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: usize,
    since_best: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best: f64::INFINITY,
            best_epoch: 0,
            since_best: 0,
        }
    }

    pub fn observe(&mut self, epoch: usize, validation_loss: f64) -> StopDecision {
        if validation_loss < self.best {
            self.best = validation_loss;
            self.best_epoch = epoch;
            self.since_best = 0;
            StopDecision::Improved
        } else {
            self.since_best += 1;
            if self.since_best >= self.patience {
                StopDecision::Stop
            } else {
                StopDecision::Continue
            }
        }
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn best_loss(&self) -> f64 {
        self.best
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub validation_loss: f64,
    /// Excluded from checkpoints so they stay reproducible.
    #[serde(skip)]
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    pub stopping_epoch: usize,
    pub best_epoch: usize,
}

impl TrainHistory {
    pub fn best_validation_loss(&self) -> Option<f64> {
        self.epochs
            .iter()
            .find(|r| r.epoch == self.best_epoch)
            .map(|r| r.validation_loss)
    }

    /// Delimited text, one row per epoch:
    /// `epoch,train_loss,validation_loss,wall_time_s`. The last column is
    /// the only non-reproducible one.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,validation_loss,wall_time_s\n");
        for r in &self.epochs {
            out.push_str(&format!(
                "{},{:e},{:e},{:.3}\n",
                r.epoch, r.train_loss, r.validation_loss, r.wall_time_s
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn patience_one_stops_on_first_worse_epoch() {
        let mut s = EarlyStopping::new(1);
        assert_eq!(s.observe(1, 0.5), StopDecision::Improved);
        assert_eq!(s.observe(2, 0.6), StopDecision::Stop);
        assert_eq!(s.best_epoch(), 1);
    }

    #[test]
    fn equal_loss_is_not_an_improvement() {
        let mut s = EarlyStopping::new(2);
        s.observe(1, 0.5);
        assert_eq!(s.observe(2, 0.5), StopDecision::Continue);
        assert_eq!(s.observe(3, 0.4), StopDecision::Improved);
        assert_eq!(s.observe(4, 0.45), StopDecision::Continue);
        assert_eq!(s.observe(5, 0.41), StopDecision::Stop);
        assert_eq!(s.best_loss(), 0.4);
    }

    #[test]
    fn csv_has_one_row_per_epoch() {
        let h = TrainHistory {
            epochs: (1..=3)
                .map(|e| EpochRecord {
                    epoch: e,
                    train_loss: 1.0 / e as f64,
                    validation_loss: 1.0,
                    wall_time_s: 0.1,
                })
                .collect(),
            stopping_epoch: 3,
            best_epoch: 1,
        };
        let csv = h.to_csv();
        assert_eq!(csv.lines().count(), 1 + h.stopping_epoch);
        assert!(csv.starts_with("epoch,train_loss"));
    }
}
