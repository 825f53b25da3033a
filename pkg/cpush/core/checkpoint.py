"""실행 상태 체크포인트 (.npz).

형식 (version 1):
  version     int
  t           int
  x, y        (N, n) float64
  seed        int
  config_hash str  — 결과에 영향을 주는 설정의 sha256 (config.config_hash)

α(t) 는 저장하지 않는다. 재개 시 스케줄에서 다시 계산되므로 같은
설정이면 끊김 없이 같은 궤적이 나온다.
"""
from __future__ import annotations

import os
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .solver import NetworkState

VERSION = 1


def save_checkpoint(path: str | Path, s: NetworkState, seed: int,
                    config_hash: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as f:
        np.savez(f, version=np.int64(VERSION), t=np.int64(s.t), x=s.x, y=s.y,
                 seed=np.int64(seed), config_hash=np.str_(config_hash))
    os.replace(tmp, path)


def load_checkpoint(path: str | Path, config_hash: str | None = None):
    """(state, seed). config_hash 를 주면 불일치 시 ConfigError."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"체크포인트 없음: {path}", field="resume")
    with np.load(path, allow_pickle=False) as z:
        version = int(z["version"])
        if version > VERSION:
            raise ConfigError(f"지원하지 않는 체크포인트 버전: {version}",
                              field="resume")
        saved_hash = str(z["config_hash"])
        if config_hash is not None and saved_hash != config_hash:
            raise ConfigError(
                f"설정 해시 불일치 (체크포인트 {saved_hash[:12]}… ≠ "
                f"현재 {config_hash[:12]}…)", field="resume")
        state = NetworkState(int(z["t"]), np.array(z["x"]), np.array(z["y"]))
        return state, int(z["seed"])
