from .chain import BoundChainReport, verify_bound_chain
from .model import (
    MODES,
    PAPER_FAITHFUL,
    ConstraintMode,
    ConstraintReport,
    EmptyModelClass,
    OnticModel,
    OnticModelError,
    check_constraints,
    evaluate_C,
    random_feasible_model,
)
from .optimize import OptimizerConfig, OptResult, maximize_C
