"""Sentiment-signal asset allocation pipeline.

Build a daily polarity index from per-sentence language-model scores, test
whether it leads an equal-weight stock portfolio, segment it into trend
regimes, and backtest entropic-risk portfolio strategies that switch
optimization mode at regime boundaries.
"""

__version__ = "0.1.0"

from .backtest import (  # noqa: F401
    PerfReport,
    RebalanceSchedule,
    StrategyConfig,
    StrategyKind,
    build_schedule,
    max_drawdown,
    run_backtest,
    select_optimizer,
    total_return,
)
from .causal import CausalGraph, LeadReport, VarFit, fast_ica, fit_var, leading_effect, var_lingam  # noqa: F401
from .cpd import (  # noqa: F401
    Breakpoints,
    Regime,
    Signal,
    Trend,
    binseg,
    classify_trend,
    cost_l2,
    detect_regimes,
    regimes_from_breakpoints,
)
from .data import (  # noqa: F401
    AlignedPanel,
    PriceTable,
    ScoreTable,
    align_by_date,
    build_equal_weight_portfolio,
    load_price_table,
    load_score_table,
)
from .optim import (  # noqa: F401
    ConeSolution,
    RiskSpec,
    SolveStatus,
    cvar_scalar,
    evar_scalar,
    max_return_evar_portfolio,
    min_cvar_portfolio,
    min_evar_portfolio,
    min_variance_portfolio,
    var_scalar,
)
from .sentiment import (  # noqa: F401
    PolarityIndex,
    PolarityLabel,
    Quartiles,
    build_polarity_index,
    classify_polarity,
    compute_quartiles,
)
