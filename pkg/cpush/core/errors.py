"""공용 예외 — CLI 가 종료 코드로 매핑한다 (2 설정, 3 수치, 4 연결성)."""
from __future__ import annotations


class CpushError(Exception):
    pass


class InvalidGraphError(CpushError, ValueError):
    """자기 루프 누락, 노드 범위 밖, 노드 수 불일치, 엣지 파일 형식 오류."""


class ConfigError(CpushError, ValueError):
    def __init__(self, msg: str, field: str | None = None,
                 line: int | None = None):
        where = []
        if line is not None:
            where.append(f"{line}행")
        if field:
            where.append(f"'{field}'")
        super().__init__(f"{' '.join(where)}: {msg}" if where else msg)
        self.field = field
        self.line = line


class DegenerateDirectionError(CpushError, RuntimeError):
    """g⁺ > 0 인데 방향 벡터 노름이 grad_floor 미만 (Slater 위반 신호)."""

    def __init__(self, msg: str, agent: int | None = None):
        super().__init__(msg if agent is None else f"에이전트 {agent}: {msg}")
        self.agent = agent


class NumericalError(CpushError, RuntimeError):
    def __init__(self, term: str, agent: int | None = None,
                 t: int | None = None):
        parts = [f"비유한 값: {term}"]
        if agent is not None:
            parts.append(f"에이전트 {agent}")
        if t is not None:
            parts.append(f"t={t}")
        super().__init__(", ".join(parts))
        self.term = term
        self.agent = agent
        self.t = t


class ConnectivityError(CpushError, RuntimeError):
    pass
