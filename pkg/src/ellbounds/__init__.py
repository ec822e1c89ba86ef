"""Cramer-Rao and semiparametric efficiency bounds for elliptical models."""

__version__ = "0.1.0"

from .errors import (  # noqa: F401
    BatchMismatch,
    ConfigError,
    EllboundsError,
    EstimatorError,
    IntegrityError,
    ModelError,
    MomentError,
    NonConvergence,
    NonIdentifiable,
    SamplingError,
    ScheduleError,
    ScoreError,
    ShapeError,
    SingularFim,
    SingularSpan,
    SubmodelError,
)
from .generators import DensityGenerator, make_generator  # noqa: F401
from .model import (  # noqa: F401
    ParamPartition,
    ResModel,
    make_partition,
    mahalanobis,
    normalize_scatter,
    pack_params,
    pack_point,
    res_logpdf,
    unpack_params,
)
from .sampling import SampleBatch, radial_moment, sample_res  # noqa: F401
from .hilbert import (  # noqa: F401
    FunctionSample,
    ProjectionPolicy,
    SpanBasis,
    cov0,
    inner,
    project_span,
    residual,
)
from .fisher import (  # noqa: F401
    BoundResult,
    ScoreSample,
    compute_bounds,
    crb_schur,
    efficient_fim,
    efficient_score,
    fim_mc,
    score_analytic,
    score_fd,
)
from .semiparam import (  # noqa: F401
    SieveTrace,
    SubmodelSpec,
    build_submodel,
    nuisance_score_submodel,
    scrb,
    semipar_efficient_fim,
    semipar_efficient_score,
)
from .estimators import (  # noqa: F401
    EstimatorReport,
    benchmark,
    huber_m,
    sample_moments,
    student_t_mle,
    tyler,
)
from .config import ExperimentConfig, parse_config  # noqa: F401
