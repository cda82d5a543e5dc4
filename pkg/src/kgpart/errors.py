"""
Exception hierarchy for kgpart.

InputError subclasses describe bad user input (exit code 2 at the CLI);
everything else deriving from KgPartError is an engine failure (exit code 1).
"""

from typing import Optional


class KgPartError(Exception):
    """Base class for all kgpart errors"""


class InputError(KgPartError):
    """Raised for malformed or inconsistent user input"""


class MalformedLine(InputError):
    def __init__(self, line_number: int, reason: str):
        self.line_number = line_number
        self.reason = reason
        super().__init__(f"line {line_number}: {reason}")


class AllVariables(InputError):
    def __init__(self) -> None:
        super().__init__("pattern has no bound position; use scan() instead")


class QuerySyntaxError(InputError):
    def __init__(self, position: int, expected: str, found: str = ""):
        self.position = position
        self.expected = expected
        self.found = found
        detail = f", found {found!r}" if found else ""
        super().__init__(f"syntax error at offset {position}: expected {expected}{detail}")


class UnknownPrefix(InputError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"unknown prefix: {name}:")


class UnsupportedConstruct(InputError):
    def __init__(self, keyword: str):
        self.keyword = keyword
        super().__init__(f"unsupported construct: {keyword}")


class DuplicateIdWithDifferentText(InputError):
    def __init__(self, query_id: str):
        self.query_id = query_id
        super().__init__(f"query {query_id} already registered with a different body")


class UnknownQuery(InputError):
    def __init__(self, query_id: str):
        self.query_id = query_id
        super().__init__(f"unknown query: {query_id}")


class MissingSamples(InputError):
    def __init__(self, query_id: str):
        self.query_id = query_id
        super().__init__(f"no run time samples recorded for {query_id}")


class WorkloadFormatError(InputError):
    def __init__(self, line_number: int, reason: str):
        self.line_number = line_number
        self.reason = reason
        super().__init__(f"workload line {line_number}: {reason}")


class ConfigError(InputError):
    def __init__(self, key: Optional[str], reason: str):
        self.key = key
        self.reason = reason
        prefix = f"{key}: " if key else ""
        super().__init__(f"invalid configuration: {prefix}{reason}")


class PartitionMismatch(InputError):
    """The partition does not cover the loaded dataset"""


class TooFewFeatures(InputError):
    def __init__(self, predicates: int, k: int):
        self.predicates = predicates
        self.k = k
        super().__init__(
            f"dataset has {predicates} distinct predicates, fewer than k={k}"
        )


class EmptyMatrix(KgPartError):
    def __init__(self) -> None:
        super().__init__("cannot cluster an empty distance matrix")


class FeatureNotResident(KgPartError):
    def __init__(self, feature: object, shard: int):
        self.feature = feature
        self.shard = shard
        super().__init__(f"{feature} is not resident on shard {shard}")


class InfeasibleBalance(KgPartError):
    def __init__(self, feature: object, capacity: float):
        self.feature = feature
        self.capacity = capacity
        super().__init__(
            f"no shard can take {feature} within capacity {capacity:.1f} triples"
        )


class StaleMigration(KgPartError):
    def __init__(self, feature: object, shard: int):
        self.feature = feature
        self.shard = shard
        super().__init__(f"shard {shard} no longer owns {feature}")


class UnownedPattern(KgPartError):
    def __init__(self, pattern: object, shard: int):
        self.pattern = pattern
        self.shard = shard
        super().__init__(f"pattern {pattern} routed to missing shard {shard}")
