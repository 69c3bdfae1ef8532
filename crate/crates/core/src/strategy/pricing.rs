//! Closed-form pricing rules: budgets, fines, bid caps and revenue estimates.
//!
//! Hop counts are plain `u32`. Callers holding an unreachable distance pass
//! `u32::MAX`, which lands every rule in its infeasible branch.

use crate::auction::{ForwardRequest, Money};

use super::{StrategyConfig, StrategyError};

/// `num / den` rounded half up, for `den > 0`.
pub(crate) fn round_ratio(num: i128, den: i128) -> Money {
    debug_assert!(den > 0);
    (2 * num + den).div_euclid(2 * den) as Money
}

pub(crate) fn round_half_up(x: f64) -> Money {
    (x + 0.5).floor() as Money
}

/// Budget to advertise after winning at price `b_i`.
///
/// Scales the won price by `dist / timeout` when the task is feasible, and
/// never drops below half the upstream fine.
pub fn decide_budget(b_i: Money, dist: u32, timeout: u32, f_u: Money) -> Money {
    let (num, den) = if timeout > 0 && timeout >= dist {
        (i128::from(b_i) * i128::from(dist), i128::from(timeout))
    } else {
        (i128::from(b_i), 1)
    };
    let floor = i128::from(f_u);
    // max(num/den, floor/2)
    if floor * den > 2 * num {
        round_ratio(floor, 2)
    } else {
        round_ratio(num, den)
    }
}

pub fn decide_fine(budget: Money, epsilon: Money) -> Money {
    (budget - epsilon).max(0)
}

/// Success weight of a task: `timeout / dist` when infeasible, otherwise 1.
pub fn mu(timeout: u32, dist: u32) -> f64 {
    if dist > 0 && timeout < dist {
        f64::from(timeout) / f64::from(dist)
    } else {
        1.0
    }
}

/// `B * mu - f * (1 - mu)`, rounded half up.
pub fn estimate_rival_revenue(budget: Money, fine: Money, timeout: u32, dist: u32) -> Money {
    if dist == 0 || timeout >= dist {
        return budget;
    }
    let (t, d) = (i128::from(timeout), i128::from(dist));
    round_ratio(i128::from(budget) * t - i128::from(fine) * (d - t), d)
}

/// `B * level / levels`, rounded half up.
pub fn price_level(budget: Money, level: usize, levels: usize) -> Result<Money, StrategyError> {
    if level == 0 || level > levels {
        return Err(StrategyError::LevelOutOfRange { level, levels });
    }
    Ok(round_ratio(i128::from(budget) * level as i128, levels as i128))
}

/// `min(level_price, round(B_u * (dist / timeout)^n))`.
pub fn combine_bid(level_price: Money, heard_budget: Money, dist: u32, timeout: u32, n: f64) -> Money {
    if timeout == 0 {
        return level_price;
    }
    let cap = round_half_up(heard_budget as f64 * (f64::from(dist) / f64::from(timeout)).powf(n));
    level_price.min(cap)
}

/// Bid of the honest baseline: `B_u * dist / timeout`, capped at `B_u`.
pub fn honest_bid(heard_budget: Money, dist: u32, timeout: u32) -> Money {
    if timeout == 0 || dist >= timeout {
        return heard_budget;
    }
    round_ratio(i128::from(heard_budget) * i128::from(dist), i128::from(timeout)).min(heard_budget)
}

/// True iff the request's budget is strictly below `dropThreshold` of the
/// largest budget heard so far.
pub fn should_drop(request: &ForwardRequest, max_budget_seen: Money, config: &StrategyConfig) -> bool {
    config.drop_threshold.exceeds(request.budget, max_budget_seen)
}

/// Budget and fine after winning at `b_i`, with the budget held to at least
/// `rebudgetFloor * b_i`.
pub fn rebudget_after_win(b_i: Money, dist: u32, timeout: u32, f_u: Money, config: &StrategyConfig) -> (Money, Money) {
    let budget = decide_budget(b_i, dist, timeout, f_u).max(config.rebudget_floor.of_money_ceil(b_i));
    (budget, decide_fine(budget, config.epsilon))
}
