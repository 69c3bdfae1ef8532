//! Regret learner over discrete price levels.
//!
//! Levels are 1-based: level `x` prices a bid at `x / levels` of the heard
//! budget. The regret matrix is indexed `(from, to)`; the learner reads the
//! row of its last action and moves to the level with the largest regret.

use rand::Rng;

use super::StrategyError;

/// Square matrix with 1-based row and column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretMatrix {
    size: usize,
    values: Vec<f64>,
}

impl RegretMatrix {
    pub fn zeros(size: usize) -> Self {
        Self { size, values: vec![0.0; size * size] }
    }

    pub fn from_fn<F: FnMut(usize, usize) -> f64>(size: usize, mut f: F) -> Self {
        let mut m = Self::zeros(size);
        for a in 1..=size {
            for x in 1..=size {
                m.set(a, x, f(a, x));
            }
        }
        m
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[self.offset(row, col)]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        let i = self.offset(row, col);
        self.values[i] = value;
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let start = (row - 1) * self.size;
        &self.values[start..start + self.size]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn offset(&self, row: usize, col: usize) -> usize {
        assert!((1..=self.size).contains(&row) && (1..=self.size).contains(&col), "index ({row}, {col}) out of range");
        (row - 1) * self.size + (col - 1)
    }
}

/// Counterfactual utility of switching from `last_action` to each other
/// level, zero outside row `last_action`.
///
/// After a loss: `x - a` below the action, `levels - x` above it.
/// After a win: `x - a` below the action, `3 (a - x)` above it.
pub fn build_potential(last_action: usize, won: bool, levels: usize) -> Result<RegretMatrix, StrategyError> {
    if last_action == 0 || last_action > levels {
        return Err(StrategyError::LevelOutOfRange { level: last_action, levels });
    }
    let a = last_action as f64;
    let mut m = RegretMatrix::zeros(levels);
    for x in 1..=levels {
        let xf = x as f64;
        let value = match (x.cmp(&last_action), won) {
            (std::cmp::Ordering::Equal, _) => 0.0,
            (std::cmp::Ordering::Less, _) => xf - a,
            (std::cmp::Ordering::Greater, false) => levels as f64 - xf,
            (std::cmp::Ordering::Greater, true) => 3.0 * (a - xf),
        };
        m.set(last_action, x, value);
    }
    Ok(m)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegretState {
    pub matrix: RegretMatrix,
    pub last_action: usize,
    /// Index of the current round, starting at 1.
    pub round: u64,
}

impl RegretState {
    pub fn new(matrix: RegretMatrix, last_action: usize) -> Result<Self, StrategyError> {
        if last_action == 0 || last_action > matrix.size() {
            return Err(StrategyError::LevelOutOfRange { level: last_action, levels: matrix.size() });
        }
        Ok(Self { matrix, last_action, round: 1 })
    }

    /// Matrix entries uniform in `[0, 1)`, starting action uniform over levels.
    pub fn random<R: Rng + ?Sized>(levels: usize, rng: &mut R) -> Self {
        let matrix = RegretMatrix::from_fn(levels, |_, _| rng.gen::<f64>());
        let last_action = rng.gen_range(1..=levels);
        Self { matrix, last_action, round: 1 }
    }

    pub fn levels(&self) -> usize {
        self.matrix.size()
    }

    /// `R <- (1 - 1/(r+1)) R + potential`, then `r <- r + 1`.
    pub fn update(&mut self, potential: &RegretMatrix) -> Result<(), StrategyError> {
        if potential.size() != self.matrix.size() {
            return Err(StrategyError::DimensionMismatch { expected: self.matrix.size(), found: potential.size() });
        }
        let decay = 1.0 - 1.0 / (self.round as f64 + 1.0);
        for (r, p) in self.matrix.values.iter_mut().zip(&potential.values) {
            *r = decay * *r + p;
        }
        self.round += 1;
        Ok(())
    }

    /// Level with the largest regret in the last action's row; lowest level
    /// on ties.
    pub fn choose_level(&self) -> usize {
        let row = self.matrix.row(self.last_action);
        let mut best = 0;
        for (i, v) in row.iter().enumerate() {
            if *v > row[best] {
                best = i;
            }
        }
        best + 1
    }

    /// Folds in the outcome of bidding at `level`, which becomes the last action.
    pub fn observe(&mut self, level: usize, won: bool) -> Result<(), StrategyError> {
        let potential = build_potential(level, won, self.levels())?;
        self.update(&potential)?;
        self.last_action = level;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn with_row(levels: usize, last_action: usize, row: &[f64]) -> RegretState {
        let m = RegretMatrix::from_fn(levels, |a, x| if a == last_action { row[x - 1] } else { 0.0 });
        RegretState::new(m, last_action).unwrap()
    }

    #[test]
    fn potential_matches_worked_example() {
        let loss = build_potential(3, false, 10).unwrap();
        assert_eq!(loss.get(3, 1), -2.0);
        assert_eq!(loss.get(3, 5), 5.0);
        let win = build_potential(3, true, 10).unwrap();
        assert_eq!(win.get(3, 2), -1.0);
        assert_eq!(win.get(3, 5), -6.0);
        for a in 1..=10 {
            for won in [false, true] {
                let p = build_potential(a, won, 10).unwrap();
                assert_eq!(p.get(a, a), 0.0);
                for row in (1..=10).filter(|&r| r != a) {
                    assert!(p.row(row).iter().all(|&v| v == 0.0));
                }
            }
        }
        assert!(build_potential(0, true, 10).is_err());
        assert!(build_potential(11, true, 10).is_err());
    }

    #[test]
    fn potential_sign_structure() {
        for levels in 2..=12 {
            for a in 1..=levels {
                let win = build_potential(a, true, levels).unwrap();
                assert!((1..=levels).filter(|&x| x != a).all(|x| win.get(a, x) <= 0.0));
                let loss = build_potential(a, false, levels).unwrap();
                assert!((a + 1..levels).all(|x| loss.get(a, x) >= 0.0));
                assert!((1..a).all(|x| loss.get(a, x) < 0.0));
            }
        }
    }

    #[test]
    fn update_halves_on_first_round() {
        let mut s = RegretState::new(RegretMatrix::from_fn(10, |_, _| 1.0), 1).unwrap();
        s.update(&RegretMatrix::zeros(10)).unwrap();
        assert!(s.matrix.values().iter().all(|&v| v == 0.5));
        assert_eq!(s.round, 2);
    }

    #[test]
    fn update_adds_potential() {
        let mut s = RegretState::new(RegretMatrix::from_fn(10, |_, _| 1.0), 3).unwrap();
        s.update(&build_potential(3, false, 10).unwrap()).unwrap();
        assert_eq!(s.matrix.get(3, 5), 5.5);
        assert_eq!(s.matrix.get(3, 1), -1.5);
    }

    #[test]
    fn update_rejects_mismatched_dimensions() {
        let mut s = RegretState::new(RegretMatrix::zeros(10), 1).unwrap();
        assert_eq!(s.update(&RegretMatrix::zeros(4)), Err(StrategyError::DimensionMismatch { expected: 10, found: 4 }));
        assert_eq!(s.round, 1);
    }

    #[test]
    fn zero_potential_decay_telescopes() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut s = RegretState::random(10, &mut rng);
        let start = s.matrix.clone();
        let zero = RegretMatrix::zeros(10);
        for k in 1..=60u64 {
            s.update(&zero).unwrap();
            // After k updates the round index is k + 1 and R = R1 / (k + 1).
            assert_eq!(s.round, k + 1);
            for (r, r1) in s.matrix.values().iter().zip(start.values()) {
                assert!((r - r1 / (k + 1) as f64).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn choose_level_argmax() {
        let s = with_row(10, 3, &[0.0, 0.0, 0.0, 7.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(s.choose_level(), 4);
        let s = with_row(10, 3, &[2.0; 10]);
        assert_eq!(s.choose_level(), 1);
        let s = with_row(10, 6, &[0.0, 0.0, 0.0, 0.0, 0.0, 9.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(s.choose_level(), 6);
    }

    #[test]
    fn observe_moves_last_action() {
        let mut s = RegretState::new(RegretMatrix::zeros(10), 3).unwrap();
        s.observe(5, false).unwrap();
        assert_eq!(s.last_action, 5);
        assert_eq!(s.round, 2);
        // Losing at 5 puts regret on levels 6..=9 in row 5; level 6 is largest.
        assert_eq!(s.choose_level(), 6);
    }

    proptest! {
        #[test]
        fn argmax_ignores_row_offset(row in proptest::collection::vec(-50i32..50, 10), c in -1000i32..1000, a in 1usize..=10) {
            let base: Vec<f64> = row.iter().map(|&v| f64::from(v)).collect();
            let shifted: Vec<f64> = row.iter().map(|&v| f64::from(v + c)).collect();
            prop_assert_eq!(with_row(10, a, &base).choose_level(), with_row(10, a, &shifted).choose_level());
        }

        #[test]
        fn choice_is_a_row_maximum(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = RegretState::random(10, &mut rng);
            let level = s.choose_level();
            let row = s.matrix.row(s.last_action);
            prop_assert!(row.iter().all(|&v| v <= row[level - 1]));
            prop_assert!(row[..level - 1].iter().all(|&v| v < row[level - 1]));
        }
    }
}
