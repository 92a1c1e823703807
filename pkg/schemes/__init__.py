# schemes/__init__.py
"""
Scheme registry. Every module in this folder exposes setup(registry) and
registers one Scheme; the CLI loads them all at start-up.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, List

from bcd import SolveOptions, SolveReport, TrialData
from scenario import SystemConfig

Runner = Callable[[SystemConfig, TrialData, SolveOptions], SolveReport]


@dataclass(frozen=True)
class Scheme:
    name: str
    run: Runner
    description: str = ""


class SchemeRegistry:
    def __init__(self):
        self._schemes: Dict[str, Scheme] = {}

    def register(self, scheme: Scheme) -> None:
        if scheme.name in self._schemes:
            raise ValueError(f"scheme {scheme.name!r} registered twice")
        self._schemes[scheme.name] = scheme

    def get(self, name: str) -> Scheme:
        try:
            return self._schemes[name]
        except KeyError:
            raise KeyError(f"unknown scheme {name!r}; known: {', '.join(self.names())}") from None

    def names(self) -> List[str]:
        return sorted(self._schemes)

    def __contains__(self, name: str) -> bool:
        return name in self._schemes

    def __len__(self) -> int:
        return len(self._schemes)
