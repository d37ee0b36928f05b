from .params import StableParams, KernelValue, fractional_constant
from .domain import Domain, TruncatedBall
from .measure import DensityProfile, SingularProfile, Atom, MeasureSpec
from .kernel import DirichletKernelGrid, BoundaryFactor
from .run import Verdict, PicardRun, IntegralInequalityInstance, KappaBracket, InequalityBound
from .report import CriterionReport, StableKernelReport, DirichletKernelReport
from .gauge import OrliczGauge
