//! Technical indicator kernels and the 18-rule GR/LR signal catalogue.

pub mod kernels;
pub mod rules;

pub use kernels::{bbands, ema, macd, obv, roc, rsi, sma, trb, Bands, IndicatorError, MacdPoint, ObvMode, TrbMode};
pub use rules::{
    compute_signal_table, evaluate_rule, IndicatorOptions, RuleId, RuleValues, Signal, SignalTable,
    ALL_RULES,
};
