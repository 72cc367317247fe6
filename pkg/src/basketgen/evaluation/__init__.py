from .histograms import (
    FEATURES,
    FeatureHistogram,
    feature_histograms,
    mean_basket_price,
    mean_basket_size,
    price_bin,
)
from .patterns import (
    SequentialPattern,
    contains,
    format_pattern,
    mine_patterns,
    min_support_count,
    pattern_coverage,
    rank_patterns,
    sequence_db,
)
from .projection import Projection, project_2d, top_eigenvectors
from .separability import (
    InsufficientSamplesError,
    LogisticRegression,
    SeparabilityReport,
    basket_vectors,
    self_separability,
    separability,
)
