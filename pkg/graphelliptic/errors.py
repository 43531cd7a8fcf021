"""Exception hierarchy. Every class carries the CLI exit code it maps to."""


class GraphEllipticError(Exception):
    exit_code: int = 1


# Documents (exit 2)
class ParseError(GraphEllipticError):
    exit_code = 2


class InvalidGraph(ParseError):
    """Structurally well-formed document violating a graph hypothesis."""


class NonPositiveMeasure(InvalidGraph):
    pass


class NegativeWeight(InvalidGraph):
    pass


class AsymmetricWeight(InvalidGraph):
    pass


class SelfLoop(InvalidGraph):
    pass


class DanglingEdge(InvalidGraph):
    """Edge naming a vertex the document does not declare."""


# Domains (exit 3)
class DomainError(GraphEllipticError):
    exit_code = 3


class UnknownVertex(DomainError):
    pass


class EmptyDomain(DomainError):
    pass


class EmptyInterior(DomainError):
    pass


class EmptyBoundary(DomainError):
    pass


class DisconnectedDomain(DomainError):
    pass


class DomainMismatch(DomainError):
    pass


class VertexOutsideDomain(DomainError):
    pass


class NotDirichletClass(DomainError):
    pass


# Constraint classes (exit 4)
class TrivialConstraintClass(GraphEllipticError):
    exit_code = 4


# Iterative methods (exit 5)
class NonConvergence(GraphEllipticError):
    exit_code = 5


class NoInteriorMinimizer(NonConvergence):
    pass


# Everything else (exit 1)
class ZeroFunction(GraphEllipticError):
    pass


class InvalidAlphaRegime(GraphEllipticError):
    pass


class HypothesisViolated(GraphEllipticError):
    pass


class OnlyTrivialFound(GraphEllipticError):
    pass


class NegativePartNonzero(GraphEllipticError):
    pass


class ZeroSlopeSingularity(GraphEllipticError):
    pass
