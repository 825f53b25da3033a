"""cpush — 시변 불균형 방향 그래프 위 제약 분산 최적화 (push-pull + Polyak) 시뮬레이터."""

__version__ = "0.1.0"
