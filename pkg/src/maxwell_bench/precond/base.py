from __future__ import annotations


class Preconditioner:
    """Apply-only approximate inverse.

    Subclasses implement :meth:`apply`; ``report`` collects setup
    information (sizes, factor statistics, timing) for the bench tables.
    """

    def __init__(self):
        self.report = {}

    def apply(self, r):
        raise NotImplementedError

    def __call__(self, r):
        return self.apply(r)
