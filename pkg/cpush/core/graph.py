"""시변 방향 그래프: 스케줄, 결합 강연결 검증, 행/열 확률 가중치 쌍.

엣지 규약: (i, j) ∈ E 는 "i 가 j 로부터 받는다". 인접 행렬 adj[i, j]
도 같은 뜻 — 행 i 가 i 의 in-이웃, 열 j 가 j 의 out-이웃이다. 노드
번호는 내부·파일·로그 모두 0 기반.

가중치 (1/d 규칙):
  A_ij = 1/|in-이웃(i)|   (행 확률, "pull")
  B_ij = 1/|out-이웃(j)|  (열 확률, "push")
자기 루프가 있으므로 대각은 항상 ≥ 1/n.

엣지 파일 형식 (plain text):
  n <N>
  i j        # i 가 j 로부터 받음, 한 줄에 한 쌍
  ...
'#' 이후는 주석. 자기 루프는 생략 가능하며 읽을 때 추가된다.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import networkx as nx
import numpy as np

from .errors import ConnectivityError, InvalidGraphError


class Digraph:
    """공통 노드 집합 위 방향 그래프 (불변 bool 인접 행렬)."""

    __slots__ = ("adj",)

    def __init__(self, adj):
        a = np.array(adj, dtype=bool)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise InvalidGraphError(f"정방 인접 행렬이 아님: shape={a.shape}")
        a.setflags(write=False)
        self.adj = a

    @classmethod
    def from_edges(cls, n_nodes: int, edges, self_loops: bool = True):
        if n_nodes < 1:
            raise InvalidGraphError(f"노드 수는 1 이상: {n_nodes}")
        a = np.zeros((n_nodes, n_nodes), bool)
        for i, j in edges:
            if not (0 <= i < n_nodes and 0 <= j < n_nodes):
                raise InvalidGraphError(
                    f"노드 번호 범위 밖 ({i}, {j}) — 0..{n_nodes - 1}")
            a[i, j] = True
        if self_loops:
            np.fill_diagonal(a, True)
        return cls(a)

    @property
    def n_nodes(self) -> int:
        return self.adj.shape[0]

    @property
    def edges(self) -> frozenset:
        return frozenset((int(i), int(j)) for i, j in np.argwhere(self.adj))

    def has_self_loops(self) -> bool:
        return bool(np.diag(self.adj).all())

    def in_degree(self) -> np.ndarray:
        return self.adj.sum(axis=1)

    def out_degree(self) -> np.ndarray:
        return self.adj.sum(axis=0)

    def __eq__(self, other):
        if not isinstance(other, Digraph):
            return NotImplemented
        return np.array_equal(self.adj, other.adj)

    def __hash__(self):
        return hash((self.n_nodes, self.adj.tobytes()))

    def __repr__(self):
        return f"Digraph(n={self.n_nodes}, edges={int(self.adj.sum())})"


@dataclass(frozen=True)
class WeightPair:
    A: np.ndarray    # 행 확률
    B: np.ndarray    # 열 확률


def build_weights(g: Digraph) -> WeightPair:
    if not g.has_self_loops():
        missing = np.flatnonzero(~np.diag(g.adj)).tolist()
        raise InvalidGraphError(f"자기 루프 누락: 노드 {missing}")
    a = g.adj.astype(np.float64)
    A = a / a.sum(axis=1, keepdims=True)
    B = a / a.sum(axis=0, keepdims=True)
    A.setflags(write=False)
    B.setflags(write=False)
    return WeightPair(A, B)


def is_strongly_connected(g: Digraph) -> bool:
    return _adj_strongly_connected(g.adj)


def _adj_strongly_connected(adj: np.ndarray) -> bool:
    if adj.shape[0] == 1:
        return True
    off = adj & ~np.eye(adj.shape[0], dtype=bool)
    if not (off.any(axis=0).all() and off.any(axis=1).all()):
        return False                    # 고립된 in/out 이 있으면 바로 탈락
    G = nx.DiGraph()
    G.add_nodes_from(range(adj.shape[0]))
    G.add_edges_from(np.argwhere(off).tolist())
    return nx.is_strongly_connected(G)


def union_graph(graphs) -> Digraph:
    graphs = list(graphs)
    if not graphs:
        raise InvalidGraphError("빈 그래프 목록")
    n = graphs[0].n_nodes
    for g in graphs[1:]:
        if g.n_nodes != n:
            raise InvalidGraphError(
                f"노드 수 불일치: {g.n_nodes} vs {n}")
    return Digraph(np.logical_or.reduce([g.adj for g in graphs]))


# ------------------------------------------------------------ 스케줄


class GraphSchedule:
    """t → 그래프 규칙의 공통 인터페이스.

    window 는 주장하는 결합 강연결 창 H, verified_horizon 은
    verify_jointly_connected 를 통과한 horizon (0 = 미검증).
    period 가 있으면 graph_at 이 그 주기로 반복된다.
    """

    window: int
    verified_horizon: int
    period: int | None = None

    @property
    def n_nodes(self) -> int:
        raise NotImplementedError

    def graph_at(self, t: int) -> Digraph:
        raise NotImplementedError

    def weights_at(self, t: int) -> WeightPair:
        return build_weights(self.graph_at(t))

    def describe(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class RotatingSchedule(GraphSchedule):
    graphs: tuple
    window: int = 0
    verified_horizon: int = 0
    _weights: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        graphs = tuple(self.graphs)
        if not graphs:
            raise InvalidGraphError("회전 스케줄에 그래프 없음")
        n = graphs[0].n_nodes
        if any(g.n_nodes != n for g in graphs):
            raise InvalidGraphError("회전 스케줄 그래프 간 노드 수 불일치")
        object.__setattr__(self, "graphs", graphs)
        if self.window <= 0:
            object.__setattr__(self, "window", len(graphs))
        object.__setattr__(self, "_weights",
                           tuple(build_weights(g) for g in graphs))

    @property
    def period(self) -> int:
        return len(self.graphs)

    @property
    def n_nodes(self) -> int:
        return self.graphs[0].n_nodes

    def graph_at(self, t: int) -> Digraph:
        return self.graphs[t % len(self.graphs)]

    def weights_at(self, t: int) -> WeightPair:
        return self._weights[t % len(self._weights)]

    def describe(self) -> dict:
        return {"kind": "rotating", "graphs": len(self.graphs),
                "window": self.window}


@dataclass(frozen=True)
class StaticSchedule(GraphSchedule):
    graph: Digraph
    window: int = 1
    verified_horizon: int = 0
    _weights: WeightPair = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_weights", build_weights(self.graph))

    period = 1

    @property
    def n_nodes(self) -> int:
        return self.graph.n_nodes

    def graph_at(self, t: int) -> Digraph:
        return self.graph

    def weights_at(self, t: int) -> WeightPair:
        return self._weights

    def describe(self) -> dict:
        return {"kind": "static", "edges": int(self.graph.adj.sum()),
                "window": self.window}


@dataclass(frozen=True)
class RandomSchedule(GraphSchedule):
    """시드 고정 랜덤 그래프열: 매 t 마다 각 노드 j 가 가능한 out-엣지를
    확률 p 로 독립 추가 (자기 루프는 항상). graph_at(t) 는 (seed, t) 만의
    함수 — 체크포인트 재시작이 같은 그래프를 다시 만든다."""

    n: int
    seed: int
    p: float = 0.05
    window: int = 1
    verified_horizon: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise InvalidGraphError(f"노드 수는 1 이상: {self.n}")
        if not 0.0 <= self.p <= 1.0:
            raise InvalidGraphError(f"엣지 확률 p 는 [0, 1]: {self.p}")

    @property
    def n_nodes(self) -> int:
        return self.n

    def graph_at(self, t: int) -> Digraph:
        rng = np.random.default_rng([self.seed, t])
        adj = rng.random((self.n, self.n)) < self.p
        np.fill_diagonal(adj, True)
        return Digraph(adj)

    def describe(self) -> dict:
        return {"kind": "random", "seed": self.seed, "p": self.p,
                "window": self.window,
                "verified_horizon": self.verified_horizon}


# ------------------------------------------------------------ 연결성 검증


def _adjacency_stack(schedule: GraphSchedule, length: int) -> np.ndarray:
    n = schedule.n_nodes
    out = np.empty((length, n, n), bool)
    for t in range(length):
        out[t] = schedule.graph_at(t).adj
    return out


def _cumulative(stack: np.ndarray) -> np.ndarray:
    cs = np.zeros((len(stack) + 1,) + stack.shape[1:], np.int32)
    np.cumsum(stack, axis=0, out=cs[1:])
    return cs


def _windows_connected(cs: np.ndarray, H: int, n_windows: int) -> bool:
    """누적 인접 cs 위 길이 H 창 n_windows 개 모두 합집합이 강연결인가."""
    for t in range(n_windows):
        if not _adj_strongly_connected((cs[t + H] - cs[t]) > 0):
            return False
    return True


def verify_jointly_connected(schedule: GraphSchedule, horizon: int) -> bool:
    """[0, horizon − H] 의 모든 t 에서 그래프 t..t+H−1 합집합이 강연결."""
    H = schedule.window
    if H < 1:
        raise ValueError(f"window_H 는 1 이상: {H}")
    if horizon < H:
        raise ValueError(f"horizon({horizon}) < window_H({H})")
    n_windows = horizon - H + 1
    if schedule.period is not None:      # 주기 스케줄은 한 주기만 보면 충분
        n_windows = min(n_windows, schedule.period)
    cs = _cumulative(_adjacency_stack(schedule, n_windows + H - 1))
    return _windows_connected(cs, H, n_windows)


def calibrate_window(schedule: GraphSchedule, probe: int,
                     max_window: int | None = None) -> int | None:
    """probe horizon 에서 검증을 통과하는 가장 작은 H (없으면 None).

    창이 길수록 합집합이 커지므로 통과 여부는 H 에 단조. H=1,2,4,… 로
    올라가며 처음 통과하는 창을 찾고 그 아래 구간을 이분 탐색한다.
    """
    limit = max_window or max(1, probe // 2)
    cs = _cumulative(_adjacency_stack(schedule, probe))

    def ok(H):
        return _windows_connected(cs, H, probe - H + 1)

    lo, hi = 1, 1
    while not ok(hi):
        if hi >= limit:
            return None
        lo, hi = hi + 1, min(2 * hi, limit)
    while lo < hi:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid + 1
    return lo


def make_random_schedule(n: int, seed: int, p: float = 0.05,
                         probe: int | None = None, max_tries: int = 10,
                         log=None) -> RandomSchedule:
    """검증된 랜덤 스케줄: 창 H 를 실측으로 정하고, probe 안에서 강연결
    창이 없으면 seed+1 로 다시 뽑는다."""
    probe = probe or 10 * n
    for k in range(max_tries):
        s = RandomSchedule(n, seed + k, p)
        H = calibrate_window(s, probe)
        if H is not None:
            if log:
                log(f"[graph] 랜덤 스케줄 seed={seed + k}: 창 H={H} "
                    f"(probe {probe} 스텝 검증)")
            return replace(s, window=H, verified_horizon=probe)
        if log:
            log(f"[graph] seed={seed + k}: probe {probe} 안에 강연결 창 없음 "
                "— 다시 뽑음")
    raise ConnectivityError(
        f"랜덤 스케줄 검증 실패 (n={n}, p={p}, 시도 {max_tries}회)")


def product_decay_diagnostic(schedule: GraphSchedule, k_max: int):
    """[(k, spread_A(k), spread_B(k))] — A(k:0)=A(k)···A(0) 의 열별
    (max−min) 최대, B(k:0) 의 행별 (max−min) 최대. 결합 강연결이면
    둘 다 기하급수적으로 0 으로 간다."""
    out = []
    PA = PB = None
    for k in range(k_max + 1):
        w = schedule.weights_at(k)
        PA = w.A.copy() if PA is None else w.A @ PA
        PB = w.B.copy() if PB is None else w.B @ PB
        out.append((k, float(np.ptp(PA, axis=0).max()),
                    float(np.ptp(PB, axis=1).max())))
    return out


# ------------------------------------------------------------ 생성기 / 파일


def self_loops_only(n: int) -> Digraph:
    return Digraph(np.eye(n, dtype=bool))


def complete_graph(n: int) -> Digraph:
    return Digraph(np.ones((n, n), bool))


def ring_graph(n: int) -> Digraph:
    """방향 사이클 0→1→…→n−1→0 (+ 자기 루프)."""
    return Digraph.from_edges(n, [((i + 1) % n, i) for i in range(n)])


def unbalanced_ring(n: int) -> Digraph:
    """링 + 노드 0 에서 짝수 노드로 가는 현 — 강연결, in/out 차수 불균형."""
    edges = [((i + 1) % n, i) for i in range(n)]
    edges += [(k, 0) for k in range(2, n, 2)]
    return Digraph.from_edges(n, edges)


def case_a_graphs(n: int = 8, period: int = 4) -> tuple:
    """회전 4그래프 족: 그래프 k 는 i mod period == k 인 i 에 대해 링 엣지
    i → i+1 만 가진다. 각각은 강연결이 아니고 합집합이 전체 링."""
    return tuple(
        Digraph.from_edges(n, [((i + 1) % n, i) for i in range(n)
                               if i % period == k])
        for k in range(period))


def case_a_schedule() -> RotatingSchedule:
    return RotatingSchedule(case_a_graphs(), window=4)


def load_graph(path: str | Path) -> Digraph:
    path = Path(path)
    n = None
    edges = []
    for ln, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        if n is None:
            if len(tok) != 2 or tok[0] != "n":
                raise InvalidGraphError(f"{path.name}:{ln}: 첫 줄은 'n <N>'")
            try:
                n = int(tok[1])
            except ValueError:
                raise InvalidGraphError(
                    f"{path.name}:{ln}: 노드 수가 정수가 아님: {tok[1]}") from None
            continue
        try:
            i, j = (int(x) for x in tok)
        except ValueError:
            raise InvalidGraphError(
                f"{path.name}:{ln}: 'i j' 정수 쌍이 아님: {raw.strip()}") from None
        edges.append((i, j))
    if n is None:
        raise InvalidGraphError(f"{path.name}: 빈 그래프 파일")
    return Digraph.from_edges(n, edges, self_loops=True)


def save_graph(path: str | Path, g: Digraph, comment: str = ""):
    lines = [f"# {comment}"] if comment else []
    lines.append(f"n {g.n_nodes}")
    lines += [f"{i} {j}" for i, j in sorted(g.edges) if i != j]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
