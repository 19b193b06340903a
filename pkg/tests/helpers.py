"""Shared test oracles."""


class LruOracle:
    """Independent byte-budgeted LRU model over (key, size) accesses."""

    def __init__(self, budget):
        self.budget = budget
        self.order = []
        self.sizes = {}
        self.hits = 0
        self.misses = 0

    def access(self, key, size):
        if key in self.sizes:
            self.hits += 1
            self.order.remove(key)
            self.order.append(key)
            return
        self.misses += 1
        self.sizes[key] = size
        self.order.append(key)
        if self.budget:
            while sum(self.sizes.values()) > self.budget:
                evicted = self.order.pop(0)
                del self.sizes[evicted]
