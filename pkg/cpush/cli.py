"""헤드리스 실행: 설정/기본 실험 → 그래프 검증 → 분산 반복 → CSV·요약.

사용법:
  python main.py run --config presets/configs/case_a.json [옵션]
  python main.py case-a [--paper-exact] [옵션]
  python main.py case-b [--agents N] [옵션]
  python main.py case-a-prime [옵션]
  python main.py validate-graphs --config CFG [--k-max K]

산출물 (--output 기준):
  <out>.csv           t,alpha,criterion,consensus_error,feasibility,objective_gap
                      (log_every 마다 + 마지막 반복, 12 유효숫자)
  <out>.summary.json  최종 xᵢ, 최종 기준값, 포락선 맞춤, 불변량 점검 결과
  <out>.timing.json   단계별 소요 (결정적 산출물과 분리)
같은 설정·시드면 CSV 와 요약은 바이트 단위로 같다.

종료 코드: 0 성공, 2 설정 오류, 3 수치 오류, 4 연결성 검증 실패.
CPUSH_THREADS (정수 ≥ 0) 는 스텝 내 에이전트 병렬 평가 상한 (0 = 직렬).
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time
from contextlib import contextmanager
from dataclasses import replace
from pathlib import Path

from . import __version__
from .core.checkpoint import load_checkpoint, save_checkpoint
from .core.config import (RunConfig, build_problem, build_schedule,
                          builtin_config, config_hash, load_run_config,
                          solver_config, step_schedule)
from .core.errors import (ConfigError, ConnectivityError,
                          DegenerateDirectionError, InvalidGraphError,
                          NumericalError)
from .core.graph import product_decay_diagnostic, verify_jointly_connected
from .core.metrics import (FIELDS, consensus_error, criterion,
                           rate_envelope_fit, trailing_upticks)
from .core.monitor import RunMonitor
from .core.solver import run, with_derived_optimum

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_CONNECTIVITY = 4

#: --paper-exact 의 step-size 상수와 case-a 기본 길이
EXACT_ALPHA_C = 1e-3
EXACT_CASE_A_HORIZON = 200_000


def _log(msg: str):
    print(f"[{time.strftime('%H:%M:%S')}] {msg}", flush=True)


class _StageTimer:
    """단계별 소요를 <out>.timing.json 에 기록.

    CSV/요약과 분리된 파일이라 결정적 산출물의 바이트 동일성에 영향이 없다.
    파일은 설정 해시로 묶인다: 같은 설정이면 실행된 단계만 갱신하고
    (oracle 처럼 건너뛴 단계의 이전 값은 남는다) 해시가 다르면 새로 쓴다.
    단계 안에서 rec["steps"] 를 채우면 반복 수와 초당 스텝이 함께 남는다.
    """

    def __init__(self, out: Path, chash: str):
        self.path = out.with_suffix(".timing.json")
        try:
            doc = json.loads(self.path.read_text(encoding="utf-8"))
            if doc.get("config_hash") != chash:
                raise ValueError("다른 설정")
            doc.setdefault("stages", {})
        except (OSError, ValueError, AttributeError):
            doc = {"version": 2, "config_hash": chash, "stages": {}}
        self.doc = doc

    @contextmanager
    def stage(self, name):
        rec = {"start": time.strftime("%Y-%m-%d %H:%M:%S")}
        t0 = time.perf_counter()
        ok = False
        try:
            yield rec
            ok = True
        finally:
            sec = time.perf_counter() - t0
            rec["sec"] = round(sec, 3)
            rec["ok"] = ok
            if rec.get("steps") and sec > 0:
                rec["steps_per_sec"] = round(rec["steps"] / sec, 1)
            self.doc["stages"][name] = rec
            _write_atomic(self.path, json.dumps(
                self.doc, ensure_ascii=False, indent=1))


def _threads() -> int:
    raw = os.environ.get("CPUSH_THREADS", "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"정수가 아님: {raw!r}", field="CPUSH_THREADS") from None
    if n < 0:
        raise ConfigError(f"0 이상이어야 함: {n}", field="CPUSH_THREADS")
    return n


def _write_atomic(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8", newline="\n")
    tmp.replace(path)


def _verify(schedule, horizon: int):
    """주기 스케줄은 한 주기, 랜덤은 이미 검증된 구간만 — 통과하면
    verified_horizon 을 갱신한 스케줄을 돌려준다."""
    if schedule.period is None:
        return schedule, schedule.verified_horizon >= horizon
    h = max(horizon, schedule.window)
    if verify_jointly_connected(schedule, h):
        return replace(schedule, verified_horizon=h), True
    return schedule, False


def execute(rc: RunConfig, resume: Path | None = None) -> dict:
    """설정 하나를 끝까지 실행하고 요약 dict 를 돌려준다."""
    out = rc.output_path
    chash = config_hash(rc)
    timer = _StageTimer(out, chash)
    threads = _threads()

    with timer.stage("setup"):
        p = build_problem(rc)
        _log(f"[problem] {p.name}: 에이전트 {p.n_agents}개, 차원 {p.dim}")
        schedule = build_schedule(rc, p.n_agents, log=_log)
        schedule, ok = _verify(schedule, rc.horizon)
        desc = schedule.describe()
        if ok:
            _log(f"[graph] {desc['kind']}: 창 H={schedule.window} 결합 강연결 확인")
        else:
            _log(f"[graph] 경고: {desc['kind']} 스케줄이 t<{rc.horizon} 에서 "
                 "결합 강연결로 검증되지 않음")
        sched = step_schedule(rc)
        cfg = solver_config(rc)

    if p.optimum is None:
        with timer.stage("oracle") as rec:
            rec["steps"] = rc.oracle_horizon
            p = with_derived_optimum(p, rc.oracle_horizon, sched, cfg, log=_log)
            _log(f"[oracle] 도출 x* = {[round(float(v), 6) for v in p.optimum]}")

    state = None
    if resume is not None:
        state, seed = load_checkpoint(rc.resolve(resume), chash)
        _log(f"[resume] t={state.t} 에서 재개 (seed {seed})")

    monitor = RunMonitor(p, sched, cfg, rc.log_every)
    ckpt = rc.resolve(rc.checkpoint) if rc.checkpoint else None

    def observer(s, trace):
        monitor(s, trace)
        if (ckpt and rc.checkpoint_every and trace is not None
                and s.t % rc.checkpoint_every == 0):
            save_checkpoint(ckpt, s, rc.seed, chash)

    with timer.stage("run") as rec:
        _log(f"[run] T={rc.horizon}, β={rc.beta}, α(t)={rc.alpha_c}/(t+1)^"
             f"{rc.alpha_sigma}, x0={'explicit' if not isinstance(rc.x0, str) else rc.x0}"
             + (f", 스레드 {threads}" if threads else ""))
        final = run(p, schedule, sched, cfg, observer=observer, state=state,
                    log=_log, threads=threads)
        rec["steps"] = final.t - (state.t if state is not None else 0)

    with timer.stage("write"):
        records = monitor.finalize()
        _write_atomic(out, "\n".join([",".join(FIELDS)]
                                     + [r.csv_row() for r in records]) + "\n")
        try:
            c_hat, violations = rate_envelope_fit(records, rc.envelope_t_min)
            envelope = {"t_min": rc.envelope_t_min, "c_hat": c_hat,
                        "violations": violations}
        except ValueError as e:
            _log(f"[summary] 포락선 맞춤 생략: {e}")
            envelope = None
        summary = {
            "version": 1,
            "cpush": __version__,
            "problem": p.name,
            "agents": p.n_agents,
            "graph": desc,
            "horizon": rc.horizon,
            "final_t": final.t,
            "seed": rc.seed,
            "config_hash": chash,
            "optimum": [float(v) for v in p.optimum],
            "optimum_derived": p.optimum_derived,
            "optimal_value": p.optimal_value,
            "final_x": final.x.tolist(),
            "final_criterion": criterion(final.x, p.optimum),
            "final_consensus_error": consensus_error(final.x),
            "envelope": envelope,
            "trailing_uptick_fraction": trailing_upticks(records),
            "checks": monitor.summary(),
        }
        summary_path = out.with_suffix(".summary.json")
        _write_atomic(summary_path,
                      json.dumps(summary, ensure_ascii=False, indent=1) + "\n")
        if ckpt:
            save_checkpoint(ckpt, final, rc.seed, chash)
            _log(f"[checkpoint] t={final.t} → {ckpt}")

    chk = summary["checks"]
    _log(f"[summary] 기준값 {summary['final_criterion']:.4g}, 합의 오차 "
         f"{summary['final_consensus_error']:.3g}, 추적 잔차 최대 "
         f"{chk['max_tracking_residual']:.2g}, 인증 위반 "
         f"{chk['certificate_violations']}")
    frac = chk["polyak_decrease_fraction"]
    _log(f"[summary] Polyak 감소 비율 "
         f"{'-' if frac is None else format(frac, '.4f')} "
         f"(활성 {chk['polyak_active_steps']} 스텝), 후반 반등 비율 "
         f"{summary['trailing_uptick_fraction']:.4f}")
    if envelope:
        _log(f"[summary] 포락선 C={envelope['c_hat']:.4g}, 위반 "
             f"{envelope['violations']}")
    _log(f"완료 → {out} / {summary_path.name}")
    return summary


# ------------------------------------------------------------ 하위 명령


def _overrides(args) -> dict:
    return {
        "agents": args.agents,
        "beta": args.beta,
        "alpha_c": EXACT_ALPHA_C if args.paper_exact else args.alpha_c,
        "alpha_sigma": args.alpha_sigma,
        "horizon": args.horizon,
        "seed": args.seed,
        "output": Path(args.output).absolute() if args.output else None,
        "log_every": args.log_every,
        "checkpoint": (Path(args.checkpoint).absolute() if args.checkpoint
                       else None),
        "envelope_t_min": args.envelope_tmin,
        "x0": args.x0,
    }


def cmd_run(args) -> int:
    rc = load_run_config(args.config).with_overrides(**_overrides(args))
    execute(rc, resume=Path(args.resume).absolute() if args.resume else None)
    return EXIT_OK


def _cmd_builtin(name: str, args) -> int:
    kw = _overrides(args)
    if args.paper_exact and name == "case-a" and args.horizon is None:
        kw["horizon"] = EXACT_CASE_A_HORIZON
    rc = builtin_config(name, **kw)
    execute(rc, resume=Path(args.resume).absolute() if args.resume else None)
    return EXIT_OK


def cmd_case_a(args) -> int:
    return _cmd_builtin("case-a", args)


def cmd_case_b(args) -> int:
    return _cmd_builtin("case-b", args)


def cmd_case_a_prime(args) -> int:
    return _cmd_builtin("case-a-prime", args)


def cmd_validate_graphs(args) -> int:
    rc = load_run_config(args.config)
    p = build_problem(rc)
    schedule = build_schedule(rc, p.n_agents, log=_log)
    if schedule.period is None:
        horizon = max(schedule.window, min(rc.horizon, 10 * p.n_agents))
    else:
        horizon = max(schedule.window, rc.horizon)
    ok = verify_jointly_connected(schedule, horizon)
    _log(f"[graph] {schedule.describe()['kind']}, n={schedule.n_nodes}, "
         f"H={schedule.window}, horizon {horizon}: "
         + ("결합 강연결 ✓" if ok else "검증 실패 ✗"))
    rows = product_decay_diagnostic(schedule, args.k_max)
    print(f"{'k':>6s}  {'spread_A':>12s}  {'spread_B':>12s}")
    for k, sa, sb in rows:
        if k % schedule.window == 0 or k == args.k_max:
            print(f"{k:6d}  {sa:12.6g}  {sb:12.6g}")
    return EXIT_OK if ok else EXIT_CONNECTIVITY


def _add_overrides(ap: argparse.ArgumentParser):
    ap.add_argument("--agents", type=int, default=None)
    ap.add_argument("--beta", type=float, default=None, help="Polyak β ∈ (0, 2)")
    ap.add_argument("--alpha-c", type=float, default=None)
    ap.add_argument("--alpha-sigma", type=float, default=None)
    ap.add_argument("--horizon", type=int, default=None)
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--paper-exact", action="store_true",
                    help=f"α 상수 c={EXACT_ALPHA_C:g} (case-a 기본 T="
                         f"{EXACT_CASE_A_HORIZON})")
    ap.add_argument("--output", default=None, help="CSV 경로")
    ap.add_argument("--log-every", type=int, default=None)
    ap.add_argument("--x0", choices=("box-center", "uniform"), default=None)
    ap.add_argument("--envelope-tmin", type=int, default=None)
    ap.add_argument("--checkpoint", default=None,
                    help="실행 끝 상태를 저장할 .npz")
    ap.add_argument("--resume", default=None, help="이어 갈 체크포인트")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="cpush",
        description="시변 불균형 방향 그래프 위 제약 분산 최적화 시뮬레이터")
    ap.add_argument("--version", action="version",
                    version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="cmd", required=True)

    sp = sub.add_parser("run", help="설정 파일로 실행")
    sp.add_argument("--config", required=True)
    _add_overrides(sp)
    sp.set_defaults(func=cmd_run)

    for name, func in (("case-a", cmd_case_a), ("case-b", cmd_case_b),
                       ("case-a-prime", cmd_case_a_prime)):
        sp = sub.add_parser(name, help=f"기본 실험 {name}")
        _add_overrides(sp)
        sp.set_defaults(func=func)

    sp = sub.add_parser("validate-graphs",
                        help="결합 강연결 검증 + 곱 수렴 표")
    sp.add_argument("--config", required=True)
    sp.add_argument("--k-max", type=int, default=40)
    sp.set_defaults(func=cmd_validate_graphs)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, InvalidGraphError) as e:
        _log(f"[오류] 설정: {e}")
        return EXIT_CONFIG
    except (NumericalError, DegenerateDirectionError) as e:
        _log(f"[오류] 수치: {e}")
        return EXIT_NUMERIC
    except ConnectivityError as e:
        _log(f"[오류] 연결성: {e}")
        return EXIT_CONNECTIVITY
    except ValueError as e:
        _log(f"[오류] 설정: {e}")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
