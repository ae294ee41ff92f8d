"""One-sample OVL-q goodness-of-fit tests, an extension of the one-sample KS test."""

from ovlq.distributions import (
    MIXTURE,
    TRAPEZOIDAL,
    UNIFORM,
    DistributionSpec,
    EmpiricalSample,
    Kind,
    cdf,
    ecdf,
    normal,
    parse_distribution,
    sample,
)
from ovlq.nulldist import (
    NullTable,
    asymptotic_sf_d1,
    asymptotic_sf_d2,
    build_null_table,
    critical_value,
    empirical_pvalue,
    load_table,
    save_table,
)
from ovlq.statistics import (
    DeltaEnvelope,
    StepCdf,
    d2_statistic,
    delta_envelope,
    dq_oracle,
    dq_statistic,
    ks_statistic,
)
from ovlq.testing import TestReport, cvm_statistic, cvm_test, ks_test, ovlq_test

__version__ = "0.1.0"
