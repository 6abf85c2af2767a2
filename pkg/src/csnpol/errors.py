"""Exception types shared across the package.

Every error carries a short machine-readable ``code`` that the CLI emits in its
JSON error payload.
"""

from __future__ import annotations


class CsnpolError(Exception):
    code = "error"

    def to_dict(self) -> dict:
        return {"error": self.code, "message": str(self)}


class InvalidScore(CsnpolError, ValueError):
    code = "invalid_score"


class EmptyCorpus(CsnpolError, ValueError):
    code = "empty_corpus"


class InvalidWindow(CsnpolError, ValueError):
    code = "invalid_window"


class CommentFormatError(CsnpolError, ValueError):
    code = "comment_format"

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class StageFailure(CsnpolError, RuntimeError):
    code = "stage_failure"

    def __init__(self, stage: str, message: str, checkpoint: str | None = None):
        super().__init__(f"{stage}: {message}")
        self.stage = stage
        self.checkpoint = checkpoint

    def to_dict(self) -> dict:
        d = super().to_dict()
        d["stage"] = self.stage
        if self.checkpoint:
            d["checkpoint"] = self.checkpoint
        return d


class TransportError(CsnpolError, RuntimeError):
    code = "transport"

    def __init__(self, message: str, attempts: int = 0, status: int | None = None):
        super().__init__(message)
        self.attempts = attempts
        self.status = status


class LLMTimeoutError(CsnpolError, TimeoutError):
    code = "timeout"


class SubgroupOverflow(CsnpolError, ValueError):
    code = "subgroup_overflow"

    def __init__(self, found: list[str], limit: int):
        super().__init__(
            f"{len(found)} subgroups discovered but at most {limit} are allowed; "
            "merge closely related subgroups or raise max_subgroups"
        )
        self.found = found
        self.limit = limit

    def to_dict(self) -> dict:
        d = super().to_dict()
        d["subgroups"] = self.found
        d["limit"] = self.limit
        return d


class ReviewFormatError(CsnpolError, ValueError):
    code = "review_format"

    def __init__(self, problems: list[tuple[int, str]]):
        super().__init__("; ".join(f"line {n}: {msg}" for n, msg in problems))
        self.problems = problems


class EmptyNetwork(CsnpolError, ValueError):
    code = "empty_network"


class FormatError(CsnpolError, ValueError):
    code = "format"


class EmptyEval(CsnpolError, ValueError):
    code = "empty_eval"


class ConfigMismatch(CsnpolError, ValueError):
    code = "config_mismatch"
