"""Exception hierarchy shared by the estimation toolkit."""


class ALAAMError(Exception):
    """Base class for all errors raised by this package."""


class DataError(ALAAMError, ValueError):
    """Input data (network, attribute, outcome or zone file) is invalid."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        elif line is not None:
            where = f"line {line}: "
        super().__init__(where + message)


class ModelError(ALAAMError, ValueError):
    """An effect token or model specification is invalid."""


class DegenerateModel(ALAAMError):
    """A statistic covariance matrix is (computationally) singular."""


class Diverged(ALAAMError):
    """Parameter estimates became non-finite or too large."""


class InsufficientData(ALAAMError, ValueError):
    """Not enough samples for the requested summary."""


class NoConvergedRuns(ALAAMError):
    """Pooling was requested but no run converged."""


class StudyError(ALAAMError):
    """A simulation study could not produce any converged estimate."""


class HeaderError(DataError):
    """Missing or malformed ``*vertices`` / ``*edges`` / ``*arcs`` line."""


class NodeIdError(DataError):
    """Node id outside ``1..N``."""


class SelfLoopError(DataError):
    """An edge or arc joins a node to itself."""


class BipartiteEdgeError(DataError):
    """A bipartite edge joins two nodes of the same mode."""
