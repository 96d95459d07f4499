"""Exception types shared across the package."""


class DimertreeError(Exception):
    """Base class for all package errors."""


class NonSimpleBoundary(DimertreeError):
    """Boundary polygon is not a simple closed lattice curve."""


class NotPiecewiseTemperleyan(DimertreeError):
    """White-corner counts are incompatible with the n+1 convex / n-1 concave split."""


class AssumptionViolated(DimertreeError):
    """A structural assumption on the domain combinatorics fails."""


class NonPlanarInput(DimertreeError):
    """Input graph is not planar with the required embedding."""


class ArcOverlap(DimertreeError):
    """Two boundary arcs share a vertex."""


class SingularSystem(DimertreeError):
    """Linear system has no Dirichlet vertex reachable from some unknown."""


class EmptySet(DimertreeError):
    """An absorbing target set is empty."""


class DivisionByZero(DimertreeError):
    """Reference hitting probability vanishes."""


class NonTermination(DimertreeError):
    """Random walk exceeded the step cap."""


class UnreachableVertex(DimertreeError):
    """A vertex cannot reach any wired component."""


class RejectionBudgetExceeded(DimertreeError):
    """Conditioned sampling exhausted its rejection budget."""

    def __init__(self, message, acceptance_rate=None):
        super().__init__(message)
        self.acceptance_rate = acceptance_rate


class NotN2Domain(DimertreeError):
    """Operation requires a domain with exactly two wired arcs."""


class NotPerfect(DimertreeError):
    """Matching is not a perfect dimer cover."""


class NotInU(DimertreeError):
    """Spanning tree is not in the admissible tree class of the bijection."""


class EnumerationBudgetExceeded(DimertreeError):
    """Instance too large for exhaustive enumeration."""


class DisconnectedVertex(DimertreeError):
    """Vertex not connected to the tree."""


class SupportTouchesBoundary(DimertreeError):
    """Test function support reaches the domain boundary."""


class UnbalancedBipartition(DimertreeError):
    """Bipartite classes differ in size; no perfect matching exists."""


class DisconnectedGraph(DimertreeError):
    """Graph is disconnected through its wired components."""


class PathNotSimple(DimertreeError):
    """Path revisits a vertex."""


class NonSquare(DimertreeError):
    """Matrix is not square."""


class DomainError(DimertreeError):
    """Argument outside the supported domain of a special function."""


class DegenerateQuad(DimertreeError):
    """Marked boundary points do not form a nondegenerate quadrilateral."""


class NewtonDiverged(DimertreeError):
    """Newton iteration for slit parameters failed to converge."""

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals


class BoundaryPoint(DimertreeError):
    """Evaluation point lies on the boundary."""


class CoincidentPoints(DimertreeError):
    """Green function evaluated at coincident points."""


class SlitSolveFailed(DimertreeError):
    """Slit-map solve failed for the evolved configuration."""


class StepUnderflow(DimertreeError):
    """Adaptive SDE step collapsed below the resolution floor."""


class SelfTouchTolerance(DimertreeError):
    """Curve self-touches beyond the welding tolerance."""


class TooFewSamples(DimertreeError):
    """Not enough samples for the requested estimator."""


class ConfigError(DimertreeError):
    """Experiment configuration is invalid."""
