from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Options:
    """Analysis settings shared by the interpreter, symex and the driver."""
    unwind: int = 1
    throw_runtime: bool = False
    check_overflow: bool = False
    unwinding_assertions: bool = False
    max_nondet_string_length: int = 64
    max_string_length: int | None = None      # None: derived, see string_bound()
    max_array_length: int = 16
    nondet_may_be_null: bool = True

    def string_bound(self, literals: tuple[str, ...] = ()) -> int:
        if self.max_string_length is not None:
            return self.max_string_length
        longest = max((len(s) for s in literals), default=0)
        return max(self.max_nondet_string_length, longest)
