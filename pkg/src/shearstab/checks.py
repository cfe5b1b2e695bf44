"""Record type for one evaluated inequality instance."""

from dataclasses import dataclass, field
import math


@dataclass
class EstimateCheck:
    """LHS/RHS of a single "lhs <~ rhs" instance.

    ``ratio`` is lhs/rhs when rhs > 0.  When rhs == 0 the ratio is set to 0
    if lhs is also 0 (trivially satisfied) and to inf otherwise, and
    ``flagged`` is raised in both cases.
    """

    check_id: str
    params: dict
    lhs: float
    rhs: float
    ratio: float = field(init=False)
    flagged: bool = field(init=False)
    refinement_stable: bool | None = None
    n: int = 0
    note: str = ""

    def __post_init__(self):
        self.lhs = float(self.lhs)
        self.rhs = float(self.rhs)
        if self.rhs > 0:
            self.ratio = self.lhs / self.rhs
            self.flagged = False
        else:
            self.ratio = 0.0 if self.lhs == 0 else math.inf
            self.flagged = True

    @property
    def margin(self):
        return self.rhs - self.lhs

    def row(self):
        d = {"check_id": self.check_id}
        d.update({k: self.params[k] for k in sorted(self.params)})
        d.update(lhs=self.lhs, rhs=self.rhs, ratio=self.ratio,
                 flagged=self.flagged, refinement_stable=self.refinement_stable,
                 n=self.n)
        return d
