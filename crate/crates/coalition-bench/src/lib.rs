//! Criterion benchmark harness for the core payoff machinery.
