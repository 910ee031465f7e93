"""Counters for asserting that preparation work stays out of timed regions."""


class PrepCounter:
    """Counts factorization/operator-build events by tag."""

    def __init__(self):
        self.counts = {}

    def bump(self, tag: str):
        self.counts[tag] = self.counts.get(tag, 0) + 1

    def total(self) -> int:
        return sum(self.counts.values())

    def snapshot(self) -> dict:
        return dict(self.counts)


prep_counter = PrepCounter()
