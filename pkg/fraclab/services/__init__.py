from .stable_kernel import StableKernelService
from .geometry import GeometryService
from .dirichlet_kernel import DirichletKernelService, KernelSampleSpec
from .measures import MeasureService, Weight, critical_exponent
from .criteria import CriteriaService, SearchSpec
from .picard import PicardService, integral_inequality_bound
