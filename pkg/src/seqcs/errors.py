"""Exception types raised across the toolkit."""


class SeqCSError(Exception):
    """Base class for all toolkit errors."""


class RankDeficient(SeqCSError):
    pass


class ZeroColumn(SeqCSError):
    pass


class Infeasible(SeqCSError):
    pass


class Unbounded(SeqCSError):
    pass


class IterationLimit(SeqCSError):
    pass


class SlackStuck(SeqCSError):
    """The warm-start slack stayed positive at the augmented optimum."""


class NoProgress(SeqCSError):
    pass


class ConvergenceFailure(SeqCSError):
    pass


class DegreesOfFreedom(SeqCSError):
    """A moment of C_T that does not exist was requested (T <= 2)."""


class InfeasibleReconstruction(SeqCSError):
    """The reconstruction violates its own measurements; the geometric certificate is void."""


class BudgetExhausted(SeqCSError):
    pass


class ConfigError(SeqCSError):
    pass
