"""
Exception hierarchy for the Lipschitz toolkit.

Every error carries the offending datum as attributes so the CLI can
render it without string parsing.
"""


class LipschitzError(Exception):
    """Root of all toolkit errors."""

    exit_code = 2

    def __init__(self, message, **details):
        super().__init__(message)
        self.details = details

    def __getattr__(self, name):
        details = self.__dict__.get("details", {})
        if name in details:
            return details[name]
        raise AttributeError(name)


class ValidationFailure(LipschitzError):
    """Input data does not satisfy its invariants."""

    exit_code = 1


# Groups

class NonAssociative(ValidationFailure):
    def __init__(self, a, b, c):
        super().__init__(f"table is not associative at ({a}, {b}, {c})", triple=(a, b, c))


class MissingInverse(ValidationFailure):
    def __init__(self, element):
        super().__init__(f"element {element} has no two-sided inverse", element=element)


class BadIdentity(ValidationFailure):
    def __init__(self, element):
        super().__init__(f"element 0 is not an identity (fails against {element})", element=element)


class GroupTooLarge(ValidationFailure):
    def __init__(self, order, limit):
        super().__init__(f"group order {order} exceeds configured limit {limit}", order=order, limit=limit)


class ElementOutOfRange(LipschitzError):
    def __init__(self, element, order):
        super().__init__(f"element {element} is not in a group of order {order}", element=element, order=order)


class SubgroupParentMismatch(LipschitzError):
    def __init__(self, what="subgroup"):
        super().__init__(f"{what} does not belong to the given group")


# Graphs and paths

class InvalidGraph(ValidationFailure):
    def __init__(self, violations):
        violations = list(violations)
        super().__init__("invalid graph of groups: " + "; ".join(violations), violations=violations)


class InconsistentPath(LipschitzError):
    def __init__(self, reason):
        super().__init__(f"inconsistent edge path: {reason}", reason=reason)


class NonpositiveFactor(LipschitzError):
    def __init__(self, factor):
        super().__init__(f"scale factor must be positive, got {factor}", factor=factor)


# Maps and distances

class AllEdgesCollapsed(LipschitzError):
    def __init__(self):
        super().__init__("every edge of the source is collapsed by the map")


class EllipticLoop(LipschitzError):
    def __init__(self):
        super().__init__("loop is elliptic (zero translation length)")


class NoHyperbolics(LipschitzError):
    def __init__(self):
        super().__init__("graph of groups has no hyperbolic elements (elementary)")


class NotVolumeOne(LipschitzError):
    def __init__(self, which, volume):
        super().__init__(f"{which} graph has volume {volume}, expected 1 (use --normalize)",
                         which=which, volume=volume)


class BudgetExceeded(LipschitzError):
    def __init__(self, what, budget):
        super().__init__(f"{what} exceeded budget of {budget}", what=what, budget=budget)


class DepthLimitExceeded(LipschitzError):
    def __init__(self, depth, limit):
        super().__init__(f"brute-force depth {depth} is outside 1..{limit} (LIPSCHITZ_BRUTE_MAX_EDGES)",
                         depth=depth, limit=limit)


class NotSausage(LipschitzError):
    def __init__(self, edges):
        super().__init__(f"no shortening move applies to a {edges}-edge loop that is still not a sausage",
                         edges=edges)


class NotImmersed(LipschitzError):
    def __init__(self):
        super().__init__("loop image is not cyclically reduced in the target")


# Covers

class InvalidQuotient(ValidationFailure):
    def __init__(self, violations):
        violations = list(violations)
        super().__init__("invalid finite quotient: " + "; ".join(violations), violations=violations)


class IncompatibleQuotient(LipschitzError):
    def __init__(self, reason):
        super().__init__(f"quotient cannot be transported through map: {reason}", reason=reason)


class KernelHasTorsion(LipschitzError):
    def __init__(self, vertex, element):
        super().__init__(f"quotient kills element {element} of vertex group {vertex}",
                         vertex=vertex, element=element)


class StartSheetMismatch(LipschitzError):
    def __init__(self, sheet, vertex):
        super().__init__(f"cover vertex {sheet} does not lie over base vertex {vertex}", sheet=sheet, vertex=vertex)


class InvalidDeckAction(LipschitzError):
    def __init__(self, element, reason):
        super().__init__(f"element {element} does not act by deck transformations: {reason}",
                         element=element, reason=reason)


# Spine

class NotCollapsible(LipschitzError):
    def __init__(self, edge, stage):
        super().__init__(f"edge {edge} is not collapsible at stage {stage}", edge=edge, stage=stage)


# Folds

class OutOfRange(LipschitzError):
    def __init__(self, t, length):
        super().__init__(f"subdivision point {t} is not inside (0, {length})", t=t, length=length)


class UnsupportedFoldKind(LipschitzError):
    def __init__(self, turn, reason):
        super().__init__(f"unsupported fold at turn {turn}: {reason}", turn=turn, reason=reason)


class ArmsUnequal(LipschitzError):
    def __init__(self, turn, first, second):
        super().__init__(f"fold arms at turn {turn} have lengths {first} and {second}",
                         turn=turn, first=first, second=second)


class NotIllegal(LipschitzError):
    def __init__(self, turn):
        super().__init__(f"turn {turn} is legal; nothing to fold", turn=turn)


class NotFoldingMap(LipschitzError):
    def __init__(self, reason):
        super().__init__(f"map is not a folding map: {reason}", reason=reason)


# Workspace

class ParseError(ValidationFailure):
    def __init__(self, source, line, reason):
        super().__init__(f"{source}:{line}: {reason}", source=source, line=line, reason=reason)


class ValidationError(ValidationFailure):
    def __init__(self, name, violations):
        violations = list(violations)
        super().__init__(f"{name} failed validation: " + "; ".join(violations),
                         name=name, violations=violations)


class DanglingReference(ValidationFailure):
    def __init__(self, source, name):
        super().__init__(f"{source}: reference to unknown object '{name}'", source=source, name=name)
