"""Junction-tree copulas built on the sample-derived copula of a rank partition."""
from .errors import InputError, InvariantViolation, JtcError
from .infotheory import (
    entropy,
    info_content_general,
    info_content_uniform,
    jtree_weight,
    kl_direct,
    kl_formula,
    multi_information,
    mutual_information_matrix,
)
from .model import JtreeCopulaModel, density, fit, load, sample_data_scale, sample_grid, save
from .sdc import SdcTable, build_sdc, cell_mass, marginalize, sdc_cdf
from .structure import JunctionTree, chow_liu, t_cherry_k3, validate
from .tabular import (
    Partition,
    SampleMatrix,
    TransformedSample,
    general_partition,
    load_sample,
    transform,
    uniform_partition,
)

__version__ = "0.1.0"
